use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub chromosome: String,
    pub position: u64,
    /// Informational only; answers do not depend on it.
    #[serde(default)]
    pub allele: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub exists: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub member_count: usize,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
    pub message: String,
}

pub const BAD_REQUEST: &str = "bad_request";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    Query(QueryRequest),
    Meta,
}

/// Decodes one request line. Objects with `"op": "meta"` are metadata
/// requests; anything else must be a [`QueryRequest`].
pub fn decode_request(line: &str) -> Result<Request, ErrorResponse> {
    let bad = |message: String| ErrorResponse {
        error: BAD_REQUEST.to_string(),
        message,
    };
    let value: Value =
        serde_json::from_str(line).map_err(|e| bad(format!("malformed json: {e}")))?;
    match value.get("op") {
        Some(Value::String(op)) if op == "meta" => return Ok(Request::Meta),
        Some(other) => return Err(bad(format!("unknown op {other}"))),
        None => {}
    }
    serde_json::from_value(value)
        .map(Request::Query)
        .map_err(|e| bad(format!("invalid query: {e}")))
}
