//! Drive the instrument service in-process: watch a few video frames, run an
//! imaging sequence, then classify the archived maps over the HTTP API.
//!
//! cargo run --release -p doci-service --example instrument_session

use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use doci::phantom::{make_tissue_phantom, TissueSpec};
use doci_service::server::{router, start, ServerOptions};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> anyhow::Result<(u16, Value)> {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))?;
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await?.to_bytes();
    Ok((
        status,
        if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes)?
        },
    ))
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let data = std::env::temp_dir().join(format!("doci-session-{}", std::process::id()));
    let phantom = make_tissue_phantom(&TissueSpec::default().resized(256, 256))?;
    let options = ServerOptions {
        frame_interval: Duration::from_millis(100),
        ..ServerOptions::new(phantom, &data)
    };
    let app = router(start(options)?);

    call(&app, Method::POST, "/api/mode", Some(json!("video"))).await?;
    let mut since = 0;
    for _ in 0..3 {
        let (_, f) = call(
            &app,
            Method::GET,
            &format!("/api/frame?since={since}&format=json"),
            None,
        )
        .await?;
        println!(
            "frame {} {} {}x{}",
            f["seq"], f["kind"], f["width"], f["height"]
        );
        since = f["seq"].as_u64().unwrap_or(since);
    }

    let (_, s) = call(&app, Method::POST, "/api/mode", Some(json!("imaging"))).await?;
    println!("mode {}", s["mode"]);
    let (code, e) = call(
        &app,
        Method::PUT,
        "/api/config",
        Some(json!({ "gate_width_ns": 30.0 })),
    )
    .await?;
    println!("config change while imaging: {code} {}", e["code"]);
    loop {
        tokio::time::sleep(Duration::from_millis(200)).await;
        let (_, s) = call(&app, Method::GET, "/api/status", None).await?;
        if s["mode"] != "imaging" {
            println!("archive {}", s["last_archive"]);
            break;
        }
        println!("imaging {}/{}", s["imaging"]["done"], s["imaging"]["total"]);
    }

    let (_, r) = call(
        &app,
        Method::POST,
        "/api/classify",
        Some(json!({ "channels": "[3 8 9]" })),
    )
    .await?;
    println!(
        "classify {}: accuracy {}",
        r["row"]["channels"], r["row"]["accuracy"]
    );
    std::fs::remove_dir_all(&data)?;
    Ok(())
}
