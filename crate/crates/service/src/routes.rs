use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cpabe_enclave::attestation::{decode_submission, VerifierError};
use cpabe_enclave::EnclaveError;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::app::{Download, Service};
use crate::now_ms;
use crate::storage::{Storage, StoredFile};

#[derive(Debug)]
pub(crate) struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn not_ready() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "NotReady", "enclave not set up or policy not provisioned")
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn random_id() -> String {
    hex::encode(rand::random::<[u8; 16]>())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

pub fn router(service: Service) -> Router {
    // multipart framing needs a little room beyond the file itself
    let body_limit = service.config().max_upload_bytes.saturating_add(64 * 1024);
    Router::new()
        .route("/status", get(status))
        .route("/encrypt-sgx", post(encrypt).layer(DefaultBodyLimit::max(body_limit)))
        .route("/decrypt-sgx", post(decrypt))
        .route("/files", get(files))
        .route("/download/:token", get(download))
        .route("/attributes", get(attributes))
        .route("/provision", post(provision))
        .route("/attest/challenge", post(attest_challenge))
        .route("/attest/quote", post(attest_quote))
        .layer(middleware::from_fn_with_state(service.clone(), sweep))
        .with_state(service)
}

async fn sweep(State(service): State<Service>, req: axum::extract::Request, next: Next) -> Response {
    service.sweep();
    next.run(req).await
}

async fn status(State(service): State<Service>) -> Json<serde_json::Value> {
    Json(json!({
        "ready": service.is_ready(),
        "measurement": service.measurement().to_hex(),
        "files": service.state.files.lock().expect("files lock").len(),
    }))
}

#[derive(Serialize)]
struct EncryptResponse {
    file_id: String,
    filename: String,
    size: u64,
}

async fn encrypt(State(service): State<Service>, mut multipart: Multipart) -> ApiResult<Json<EncryptResponse>> {
    if !service.is_ready() {
        return Err(ApiError::not_ready());
    }
    let limit = service.config().max_upload_bytes;
    let too_large =
        || ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "TooLarge", format!("upload limit is {limit} bytes"));
    let mut upload = None;
    while let Some(field) =
        multipart.next_field().await.map_err(|e| ApiError::new(e.status(), "BadUpload", e.body_text()))?
    {
        if field.name() != Some("file") {
            continue;
        }
        let filename = field.file_name().unwrap_or("upload.bin").to_string();
        let data = field.bytes().await.map_err(|e| {
            if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                too_large()
            } else {
                ApiError::new(e.status(), "BadUpload", e.body_text())
            }
        })?;
        upload = Some((filename, data));
        break;
    }
    let (filename, data) =
        upload.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "BadUpload", "missing file field"))?;
    if data.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "EmptyUpload", "file is empty"));
    }
    if data.len() > limit {
        return Err(too_large());
    }

    let file_id = random_id();
    let size = data.len() as u64;
    let storage = service.state.storage.clone();
    let resource = storage.park_upload(&file_id, Vec::from(data));
    let client = service.state.client.clone();
    let output = Storage::container_resource(&file_id);
    let result = blocking({
        let resource = resource.clone();
        move || client.encrypt(&resource, &output, None)
    })
    .await?;
    storage.discard_upload(&resource);
    match result {
        Ok(_) => {}
        Err(EnclaveError::State(_)) => return Err(ApiError::not_ready()),
        Err(e) => return Err(ApiError::internal(e.to_string())),
    }

    let file = StoredFile { file_id: file_id.clone(), filename: filename.clone(), size, created: now_ms() };
    storage.save_metadata(&file).map_err(|e| ApiError::internal(e.to_string()))?;
    service.state.files.lock().expect("files lock").insert(file_id.clone(), file);
    log::info!("stored {file_id} ({size} bytes)");
    Ok(Json(EncryptResponse { file_id, filename, size }))
}

#[derive(Deserialize)]
struct DecryptRequest {
    file_id: String,
    attributes: Vec<String>,
}

async fn decrypt(
    State(service): State<Service>,
    Json(req): Json<DecryptRequest>,
) -> ApiResult<Json<serde_json::Value>> {
    let filename = service
        .state
        .files
        .lock()
        .expect("files lock")
        .get(&req.file_id)
        .map(|f| f.filename.clone())
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NotFound", "unknown file"))?;
    if req.attributes.iter().any(|a| a.contains(',')) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "BadAttributes", "attribute names cannot contain commas"));
    }
    let token = random_id();
    let client = service.state.client.clone();
    let attrs = req.attributes.join(",");
    let input = Storage::container_resource(&req.file_id);
    let output = Storage::staging_resource(&token);
    let result = blocking(move || client.decrypt(&attrs, &input, &output, None)).await?;
    let storage = &service.state.storage;
    match result {
        Ok(_) => {}
        Err(EnclaveError::AccessDenied) => {
            return Err(ApiError::new(StatusCode::FORBIDDEN, "AccessDenied", "attributes do not satisfy the policy"))
        }
        Err(EnclaveError::MalformedFrame(m)) => return Err(ApiError::new(StatusCode::BAD_REQUEST, "BadAttributes", m)),
        Err(EnclaveError::State(_)) => return Err(ApiError::not_ready()),
        Err(e @ (EnclaveError::AuthenticationFailure | EnclaveError::MalformedContainer(_))) => {
            storage.audit("container-corrupt", &req.file_id, &e.to_string());
            return Err(ApiError::internal("stored container failed integrity checks"));
        }
        Err(e) => return Err(ApiError::internal(e.to_string())),
    }
    let expires = now_ms() + service.config().token_ttl().as_millis() as u64;
    service
        .state
        .tokens
        .lock()
        .expect("token lock")
        .live
        .insert(token.clone(), Download { file_id: req.file_id, filename, expires });
    Ok(Json(json!({ "download_token": token })))
}

async fn files(State(service): State<Service>) -> Json<Vec<StoredFile>> {
    let mut list: Vec<StoredFile> = service.state.files.lock().expect("files lock").values().cloned().collect();
    list.sort_by(|a, b| b.created.cmp(&a.created).then_with(|| a.file_id.cmp(&b.file_id)));
    Json(list)
}

async fn download(State(service): State<Service>, Path(token): Path<String>) -> ApiResult<Response> {
    let entry = {
        let mut tokens = service.state.tokens.lock().expect("token lock");
        match tokens.live.remove(&token) {
            Some(d) => {
                tokens.spent.insert(token.clone(), now_ms());
                d
            }
            None if tokens.spent.contains_key(&token) => {
                return Err(ApiError::new(StatusCode::GONE, "Gone", "download token already used or expired"))
            }
            None => return Err(ApiError::new(StatusCode::NOT_FOUND, "NotFound", "unknown download token")),
        }
    };
    let path = service.state.storage.staging_path(&token);
    let data = tokio::fs::read(&path).await.map_err(|e| ApiError::internal(e.to_string()));
    if let Err(e) = tokio::fs::remove_file(&path).await {
        log::error!("cannot remove staged file for {}: {e}", entry.file_id);
    }
    let data = data?;
    let disposition = format!("attachment; filename=\"{}\"", entry.filename.replace(['"', '\\', '\r', '\n'], "_"));
    let mut resp = Bytes::from(data).into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"));
    if let Ok(v) = HeaderValue::from_str(&disposition) {
        headers.insert(header::CONTENT_DISPOSITION, v);
    }
    Ok(resp)
}

async fn attributes(State(service): State<Service>) -> ApiResult<Json<Vec<String>>> {
    service.attributes().map(Json).ok_or_else(ApiError::not_ready)
}

async fn provision(State(service): State<Service>) -> ApiResult<Json<serde_json::Value>> {
    let s = service.clone();
    match blocking(move || s.provision()).await? {
        Ok(attrs) => Ok(Json(json!({ "attributes": attrs }))),
        Err(e) => Err(ApiError::new(StatusCode::BAD_GATEWAY, "ProvisioningFailed", e.to_string())),
    }
}

fn octets(data: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/octet-stream")], data).into_response()
}

async fn attest_challenge(State(service): State<Service>) -> ApiResult<Response> {
    let verifier =
        service.verifier().ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NoVerifier", "no verifier here"))?;
    let challenge = verifier
        .issue_challenge()
        .map_err(|e| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "Busy", e.to_string()))?;
    Ok(octets(challenge.to_bytes()))
}

async fn attest_quote(State(service): State<Service>, body: Bytes) -> ApiResult<Response> {
    let verifier = service
        .verifier()
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NoVerifier", "no verifier here"))?;
    let (challenge, quote) =
        decode_submission(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "Malformed", e.to_string()))?;
    match verifier.handle_quote(&challenge, &quote) {
        Ok(resp) => Ok(octets(resp.to_bytes())),
        Err(VerifierError::Rejected(r)) => {
            log::warn!("rejected quote from {}: {r}", quote.measurement);
            Err(ApiError::new(StatusCode::FORBIDDEN, "Rejected", r.to_string()))
        }
        Err(e) => Err(ApiError::new(StatusCode::BAD_REQUEST, "Malformed", e.to_string())),
    }
}
