#![allow(dead_code)]

use std::path::Path;

use cpabe_service::{Service, ServiceConfig};
use reqwest::multipart::{Form, Part};

pub const POLICY: &str = "designation:professor department:cs file-type:pdf 3of3";
pub const ALL: [&str; 3] = ["designation:professor", "department:cs", "file-type:pdf"];

pub struct Running {
    pub base: String,
    pub service: Service,
    pub http: reqwest::Client,
    task: tokio::task::JoinHandle<()>,
}

impl Drop for Running {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub fn config(dir: &Path, policy: Option<&str>) -> ServiceConfig {
    let mut c = ServiceConfig::for_storage(dir);
    c.policy = policy.map(str::to_string);
    c
}

pub async fn start(config: ServiceConfig) -> Running {
    let service = tokio::task::spawn_blocking(move || Service::open(config)).await.unwrap().unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let task = tokio::spawn({
        let service = service.clone();
        async move {
            cpabe_service::serve(service, listener).await.unwrap();
        }
    });
    Running { base, service, http: reqwest::Client::new(), task }
}

impl Running {
    pub async fn upload(&self, name: &str, data: Vec<u8>) -> reqwest::Response {
        let form = Form::new().part("file", Part::bytes(data).file_name(name.to_string()));
        self.http.post(format!("{}/encrypt-sgx", self.base)).multipart(form).send().await.unwrap()
    }

    pub async fn upload_ok(&self, name: &str, data: Vec<u8>) -> String {
        let resp = self.upload(name, data).await;
        assert_eq!(resp.status(), 200);
        let v: serde_json::Value = resp.json().await.unwrap();
        v["file_id"].as_str().unwrap().to_string()
    }

    pub async fn decrypt(&self, file_id: &str, attrs: &[&str]) -> reqwest::Response {
        self.http
            .post(format!("{}/decrypt-sgx", self.base))
            .json(&serde_json::json!({ "file_id": file_id, "attributes": attrs }))
            .send()
            .await
            .unwrap()
    }

    pub async fn get(&self, path: &str) -> reqwest::Response {
        self.http.get(format!("{}{path}", self.base)).send().await.unwrap()
    }
}

/// Every regular file below `dir`, relative path and contents.
pub fn scan(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

pub fn contains(hay: &[u8], needle: &[u8]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}
