//! KEM and key generation timings, parallel pool vs a single worker.
//!
//! `cargo bench -p cpabe-core` compares the default rayon pool against a
//! one-thread pool in the same binary. With `--no-default-features` the
//! library runs its sequential fallback and both groups measure that.

use cpabe_core::abe;
use cpabe_core::policy::{parse_attribute_list, parse_policy, PolicyTree};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::ThreadPool;

/// `rules` disjuncts of `k`-of-`k` conjunctions over distinct attributes.
fn policy(rules: usize, k: usize) -> (PolicyTree, String) {
    let mut text = String::new();
    for r in 1..=rules {
        for a in 1..=k {
            text.push_str(&format!("r{r}:a{a} "));
        }
        text.push_str(&format!("{k}of{k} "));
    }
    text.push_str(&format!("1of{rules}"));
    let last: Vec<String> = (1..=k).map(|a| format!("r{rules}:a{a}")).collect();
    (parse_policy(&text).unwrap(), last.join(","))
}

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let name = if cpabe_core::is_parallel() { "parallel" } else { "sequential" };
    vec![
        (name, rayon::ThreadPoolBuilder::new().build().unwrap()),
        ("one-thread", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ]
}

fn kem(c: &mut Criterion) {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (pp, mk) = abe::setup(128, &mut rng).unwrap();
    let pools = pools();

    let mut enc = c.benchmark_group("kem_encrypt");
    enc.sample_size(10);
    for leaves in [10, 50, 100] {
        let (tree, _) = policy(leaves / 5, 5);
        enc.throughput(Throughput::Elements(leaves as u64));
        for (name, pool) in &pools {
            enc.bench_with_input(BenchmarkId::new(*name, leaves), &tree, |b, tree| {
                let mut rng = ChaCha20Rng::seed_from_u64(2);
                b.iter(|| pool.install(|| abe::kem_encrypt(&pp, tree, &mut rng).unwrap()))
            });
        }
    }
    enc.finish();

    let mut dec = c.benchmark_group("keygen_and_decrypt");
    dec.sample_size(10);
    for k in [2, 6, 10] {
        let (tree, attrs) = policy(10, k);
        let attrs = parse_attribute_list(&attrs).unwrap();
        let (_, ct) = abe::kem_encrypt(&pp, &tree, &mut rng).unwrap();
        for (name, pool) in &pools {
            dec.bench_with_input(BenchmarkId::new(*name, k), &k, |b, _| {
                let mut rng = ChaCha20Rng::seed_from_u64(3);
                b.iter(|| {
                    pool.install(|| {
                        let key = abe::keygen(&pp, &mk, &attrs, &mut rng).unwrap();
                        abe::kem_decrypt(&pp, &key, &ct).unwrap()
                    })
                })
            });
        }
    }
    dec.finish();
}

criterion_group!(benches, kem);
criterion_main!(benches);
