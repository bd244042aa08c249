mod common;

use common::*;
use cpabe_enclave::attestation::load_or_create_signing_key;

#[tokio::test(flavor = "multi_thread")]
async fn provisioning_through_a_remote_verifier() {
    // the verifier instance runs its own built-in verifier for POLICY
    let vdir = tempfile::tempdir().unwrap();
    let verifier = start(config(vdir.path(), Some(POLICY))).await;
    let verifier_key = load_or_create_signing_key(&vdir.path().join("verifier.key")).unwrap();

    // a second instance on the same platform attests to it over HTTP
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path(), None);
    c.platform_key_path = Some(vdir.path().join("platform.key"));
    c.device_secret_path = Some(vdir.path().join("device.secret"));
    c.verifier_url = Some(verifier.base.clone());
    c.verifier_public_key = Some(hex::encode(verifier_key.verifying_key().to_bytes()));
    let s = start(c).await;
    assert!(s.service.is_ready());
    let attrs: Vec<String> = s.get("/attributes").await.json().await.unwrap();
    assert_eq!(attrs.len(), 3);
    let id = s.upload_ok("r.bin", b"remote".to_vec()).await;
    assert_eq!(s.decrypt(&id, &ALL).await.status(), 200);

    // re-provisioning runs a fresh round
    let resp = s.http.post(format!("{}/provision", s.base)).send().await.unwrap();
    assert_eq!(resp.status(), 200);
}

#[tokio::test(flavor = "multi_thread")]
async fn foreign_platform_is_rejected_by_the_verifier() {
    let vdir = tempfile::tempdir().unwrap();
    let verifier = start(config(vdir.path(), Some(POLICY))).await;
    let verifier_key = load_or_create_signing_key(&vdir.path().join("verifier.key")).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path(), None);
    c.verifier_url = Some(verifier.base.clone());
    c.verifier_public_key = Some(hex::encode(verifier_key.verifying_key().to_bytes()));
    let s = start(c).await;
    assert!(!s.service.is_ready());
    assert_eq!(s.upload("x", b"x".to_vec()).await.status(), 503);
    let resp = s.http.post(format!("{}/provision", s.base)).send().await.unwrap();
    assert_eq!(resp.status(), 502);
    assert!(resp.text().await.unwrap().contains("signature"));
}

#[tokio::test(flavor = "multi_thread")]
async fn attest_endpoints_reject_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let s = start(config(dir.path(), Some(POLICY))).await;
    let resp = s.http.post(format!("{}/attest/quote", s.base)).body(vec![1, 2, 3]).send().await.unwrap();
    assert_eq!(resp.status(), 400);
    let resp = s.http.post(format!("{}/attest/challenge", s.base)).send().await.unwrap();
    assert_eq!(resp.status(), 200);
    assert_eq!(resp.bytes().await.unwrap().len(), 4 + 16 + 4 + 8);

    let bare = tempfile::tempdir().unwrap();
    let s = start(config(bare.path(), None)).await;
    let resp = s.http.post(format!("{}/attest/challenge", s.base)).send().await.unwrap();
    assert_eq!(resp.status(), 404);
}
