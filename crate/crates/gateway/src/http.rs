//! HTTP front end.
//!
//! `POST /function/{name}` invokes a function with the raw request body and
//! answers 200 with `{result, duration_ms, replica, node}`, or 504 when the
//! modelled response time exceeds the timeout. `GET /system/functions` lists
//! deployments.

use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::error::Error;
use crate::gateway::{Gateway, Outcome};

#[derive(Clone)]
pub struct ApiState {
    pub gateway: Arc<Gateway>,
    pub timeout_ms: f64,
    /// Hold each response until the modelled latency has elapsed.
    pub pace: bool,
}

pub fn router(state: ApiState) -> Router {
    Router::new().route("/function/:name", post(invoke)).route("/system/functions", get(list)).with_state(state)
}

async fn invoke(State(st): State<ApiState>, Path(name): Path<String>, body: Bytes) -> Response {
    let gw = Arc::clone(&st.gateway);
    let timeout = st.timeout_ms;
    let result = tokio::task::spawn_blocking(move || gw.invoke(&name, &body, timeout)).await;
    let inv = match result {
        Ok(Ok(inv)) => inv,
        Ok(Err(Error::UnknownFunction(name))) => {
            return (StatusCode::NOT_FOUND, Json(json!({ "error": format!("function {name} not found") })))
                .into_response()
        }
        Ok(Err(e)) => {
            return (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": e.to_string() }))).into_response()
        }
        Err(e) => return (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": e.to_string() }))).into_response(),
    };
    let rec = &inv.record;
    if st.pace {
        let reply_at = rec.finish_ms.min(rec.enqueue_ms + st.timeout_ms);
        let wait = reply_at - st.gateway.now_ms();
        if wait > 0.0 {
            tokio::time::sleep(Duration::from_secs_f64(wait / 1000.0)).await;
        }
    }
    match rec.outcome {
        Outcome::Ok => Json(json!({
            "result": inv.response,
            "duration_ms": rec.response_ms(),
            "replica": rec.replica,
            "node": rec.node,
        }))
        .into_response(),
        Outcome::Timeout | Outcome::Error => (
            StatusCode::GATEWAY_TIMEOUT,
            Json(json!({ "error": "timeout", "duration_ms": rec.response_ms(), "node": rec.node })),
        )
            .into_response(),
    }
}

async fn list(State(st): State<ApiState>) -> impl IntoResponse {
    Json(st.gateway.status())
}
