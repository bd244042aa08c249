use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cpabe(home: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpabe"))
        .arg("--home")
        .arg(home)
        .args(args)
        .env_remove("CPABE_HOME")
        .output()
        .expect("spawn cpabe")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn with_setup() -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let home = dir.path().join("home");
    let o = cpabe(&home, &["setup"]);
    assert!(o.status.success(), "{}", stderr(&o));
    (dir, home)
}

#[test]
fn enclave_round_trip_and_denial_exit_codes() {
    let (dir, home) = with_setup();
    let input = dir.path().join("in.bin");
    let data: Vec<u8> = (0..5000u32).map(|i| (i * 31 % 251) as u8).collect();
    fs::write(&input, &data).unwrap();
    let ct = dir.path().join("in.bin.cpsx");

    let o = cpabe(&home, &["enc", "--policy", "a b 2of2", input.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(ct.exists());

    let out = dir.path().join("ok.bin");
    let o = cpabe(&home, &["dec", "--attrs", "a,b", "-o", out.to_str().unwrap(), ct.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(&out).unwrap(), data);

    let denied = dir.path().join("denied.bin");
    let o = cpabe(&home, &["dec", "--attrs", "a", "-o", denied.to_str().unwrap(), ct.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("access denied"));
    assert!(!denied.exists());
}

#[test]
fn library_paths_interoperate_with_the_enclave() {
    let (dir, home) = with_setup();
    let input = dir.path().join("doc.txt");
    fs::write(&input, b"quarterly numbers").unwrap();
    let ct = dir.path().join("doc.cpsx");
    let o = cpabe(
        &home,
        &[
            "enc",
            "--no-enclave",
            "--policy",
            "dept:x role:a role:b 1of2 2of2",
            "-o",
            ct.to_str().unwrap(),
            input.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));

    // enclave decrypts a container produced outside it
    let out = dir.path().join("a.txt");
    let o = cpabe(&home, &["dec", "--attrs", "dept:x,role:b", "-o", out.to_str().unwrap(), ct.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(&out).unwrap(), b"quarterly numbers");

    // explicit key file
    let key = dir.path().join("user.key");
    let o = cpabe(&home, &["keygen", "--attrs", "dept:x,role:a", "-o", key.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("b.txt");
    let o = cpabe(
        &home,
        &[
            "dec",
            "--no-enclave",
            "--attrs",
            "ignored",
            "--key",
            key.to_str().unwrap(),
            "-o",
            out.to_str().unwrap(),
            ct.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(&out).unwrap(), b"quarterly numbers");

    let o = cpabe(&home, &["dec", "--no-enclave", "--attrs", "role:a,role:b", ct.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("access denied"));
}

#[test]
fn setup_refuses_to_overwrite_without_force() {
    let (_dir, home) = with_setup();
    let before = fs::read(home.join("sealed/master.seal")).unwrap();
    let o = cpabe(&home, &["setup"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read(home.join("sealed/master.seal")).unwrap(), before);
    let o = cpabe(&home, &["setup", "--force"]);
    assert!(o.status.success());
    assert_ne!(fs::read(home.join("sealed/master.seal")).unwrap(), before);
}

#[test]
fn commands_fail_cleanly_without_setup() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x");
    fs::write(&input, b"x").unwrap();
    let o = cpabe(&dir.path().join("empty"), &["enc", "--policy", "a 1of1", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("setup"));
}

#[test]
fn malformed_policy_is_an_error_not_a_denial() {
    let (dir, home) = with_setup();
    let input = dir.path().join("x");
    fs::write(&input, b"x").unwrap();
    let o = cpabe(&home, &["enc", "--policy", "a b 3of2", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_writes_csv_with_expected_schema() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let o = cpabe(
        dir.path(),
        &[
            "bench",
            "--experiment",
            "rules",
            "--sweep",
            "1,2",
            "--attrs",
            "2",
            "--reps",
            "3",
            "--file-bytes",
            "4096",
            "--csv",
            csv.to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["experiment", "param", "phase", "enclave", "median_ms", "mean_ms", "min_ms", "reps"]);
    let rows: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>().unwrap();
    // 2 values x {encrypt, decrypt} x {off, on}
    assert_eq!(rows.len(), 8);
    for row in &rows {
        assert_eq!(&row[0], "rules");
        assert!(["1", "2"].contains(&&row[1]));
        assert!(["encrypt", "decrypt"].contains(&&row[2]));
        assert!(["on", "off"].contains(&&row[3]));
        let median: f64 = row[4].parse().unwrap();
        let min: f64 = row[6].parse().unwrap();
        assert!(median >= min && min > 0.0);
        assert_eq!(&row[7], "3");
    }
}

#[test]
fn bench_rejects_zero_repetitions() {
    let dir = tempfile::tempdir().unwrap();
    let o = cpabe(dir.path(), &["bench", "--experiment", "filesize", "--reps", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("repetitions"), "{}", stderr(&o));
}
