//! The annotation workflow over HTTP + JSON.
//!
//! Starts the service on a free local port, sets up a campaign through the
//! admin endpoints and plays one annotator session.
//!
//! ```bash
//! cargo run --example http_service
//! ```

use std::sync::Arc;

use annocamp::i18n::MessageCatalogs;
use annocamp::service::{http, Service};
use annocamp::store::Installation;
use serde_json::{json, Value};

const ADMIN: &str = "example-admin-token";

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let service = Arc::new(
        Service::new(Arc::new(Installation::new()), MessageCatalogs::shipped())?
            .with_admin_token(ADMIN),
    );
    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    runtime.spawn(async move { axum::serve(listener, http::router(service)).await });

    let client = reqwest::blocking::Client::new();
    let admin = |method: reqwest::Method, path: &str, body: Value| -> reqwest::Result<Value> {
        client
            .request(method, format!("{base}/api/admin/campaigns{path}"))
            .bearer_auth(ADMIN)
            .json(&body)
            .send()?
            .error_for_status()?
            .json()
    };
    use reqwest::Method;

    let campaign = admin(
        Method::POST,
        "",
        json!({ "name": "web", "quota": 1, "languages": ["en", "fr"] }),
    )?;
    let id = campaign["id"].as_str().unwrap_or_default().to_owned();
    admin(
        Method::POST,
        &format!("/{id}/images"),
        json!({ "sources": ["one.jpg", "two.jpg"] }),
    )?;
    let creds = admin(
        Method::POST,
        &format!("/{id}/annotators"),
        json!({ "count": 1, "language": "fr" }),
    )?;
    admin(
        Method::POST,
        &format!("/{id}/status"),
        json!({ "status": "active" }),
    )?;
    let user = &creds["credentials"][0];

    let login: Value = client
        .post(format!("{base}/api/login"))
        .json(&json!({ "username": user["username"], "password": user["password"] }))
        .send()?
        .json()?;
    let token = login["token"].as_str().unwrap_or_default().to_owned();

    let mut task: Value = client
        .get(format!("{base}/api/task"))
        .bearer_auth(&token)
        .send()?
        .json()?;
    println!("prompt: {}", task["prompt"]);
    let mut n = 0;
    while task["status"] == "image" {
        let body = if n == 0 {
            json!({ "image_id": task["image_id"], "verdict": "yes",
                    "comment": { "text": "Inquietante", "trigger": "Other" } })
        } else {
            json!({ "image_id": task["image_id"], "verdict": "no" })
        };
        let reply: Value = client
            .post(format!("{base}/api/judgment"))
            .bearer_auth(&token)
            .header(http::IDEMPOTENCY_HEADER, format!("submit-{n}"))
            .json(&body)
            .send()?
            .error_for_status()?
            .json()?;
        task = reply["next"].clone();
        n += 1;
    }
    println!("done: {}", task["message"]);

    // a stale submission is a structured error
    let stale = client
        .post(format!("{base}/api/judgment"))
        .bearer_auth(&token)
        .json(&json!({ "image_id": "img_0", "verdict": "no" }))
        .send()?;
    println!("{} {}", stale.status(), stale.text()?);

    let report = client
        .get(format!(
            "{base}/api/admin/campaigns/{id}/reports/trigger-distribution?format=csv"
        ))
        .bearer_auth(ADMIN)
        .send()?
        .text()?;
    print!("{report}");
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
