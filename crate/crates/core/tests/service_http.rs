//! HTTP routes driven in-process through the router.

use std::sync::Arc;

use annocamp::i18n::MessageCatalogs;
use annocamp::service::{http, Service};
use annocamp::store::Installation;
use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const ADMIN: &str = "test-admin";

fn app() -> Router {
    let service = Service::new(Arc::new(Installation::new()), MessageCatalogs::shipped())
        .unwrap()
        .with_admin_token(ADMIN);
    http::router(Arc::new(service))
}

struct Call<'a> {
    method: Method,
    path: &'a str,
    token: Option<&'a str>,
    key: Option<&'a str>,
    body: Option<Vec<u8>>,
}

impl<'a> Call<'a> {
    fn new(method: Method, path: &'a str) -> Self {
        Call {
            method,
            path,
            token: None,
            key: None,
            body: None,
        }
    }

    fn token(mut self, token: &'a str) -> Self {
        self.token = Some(token);
        self
    }

    fn key(mut self, key: &'a str) -> Self {
        self.key = Some(key);
        self
    }

    fn json(mut self, body: Value) -> Self {
        self.body = Some(body.to_string().into_bytes());
        self
    }

    fn raw(mut self, body: &str) -> Self {
        self.body = Some(body.as_bytes().to_vec());
        self
    }

    async fn send(self, app: &Router) -> (StatusCode, Vec<u8>) {
        let mut req = Request::builder().method(self.method).uri(self.path);
        if let Some(t) = self.token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        if let Some(k) = self.key {
            req = req.header(http::IDEMPOTENCY_HEADER, k);
        }
        let req = req.body(Body::from(self.body.unwrap_or_default())).unwrap();
        let resp = app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp
            .into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec();
        (status, bytes)
    }

    async fn value(self, app: &Router) -> (StatusCode, Value) {
        let (status, bytes) = self.send(app).await;
        let v = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, v)
    }
}

/// Creates an active campaign with `images` images and `users` annotators.
async fn campaign(app: &Router, images: usize, users: usize, quota: u32) -> (String, Vec<Value>) {
    let (s, c) = Call::new(Method::POST, "/api/admin/campaigns")
        .token(ADMIN)
        .json(json!({ "name": "t", "quota": quota }))
        .value(app)
        .await;
    assert_eq!(s, StatusCode::CREATED, "{c}");
    let id = c["id"].as_str().unwrap().to_owned();
    let sources: Vec<String> = (0..images)
        .map(|i| format!("https://secret.example/{i}.jpg"))
        .collect();
    let (s, _) = Call::new(Method::POST, &format!("/api/admin/campaigns/{id}/images"))
        .token(ADMIN)
        .json(json!({ "sources": sources }))
        .value(app)
        .await;
    assert_eq!(s, StatusCode::OK);
    let (s, creds) = Call::new(
        Method::POST,
        &format!("/api/admin/campaigns/{id}/annotators"),
    )
    .token(ADMIN)
    .json(json!({ "count": users }))
    .value(app)
    .await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = Call::new(Method::POST, &format!("/api/admin/campaigns/{id}/status"))
        .token(ADMIN)
        .json(json!({ "status": "active" }))
        .value(app)
        .await;
    assert_eq!(s, StatusCode::OK);
    (id, creds["credentials"].as_array().unwrap().clone())
}

async fn login(app: &Router, cred: &Value) -> String {
    let (s, v) = Call::new(Method::POST, "/api/login")
        .json(json!({ "username": cred["username"], "password": cred["password"] }))
        .value(app)
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    v["token"].as_str().unwrap().to_owned()
}

#[tokio::test]
async fn admin_routes_require_the_token() {
    let app = app();
    let body = json!({ "name": "t", "quota": 1 });
    let (s, v) = Call::new(Method::POST, "/api/admin/campaigns")
        .json(body.clone())
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    assert_eq!(v["code"], "unauthorized");
    let (s, _) = Call::new(Method::POST, "/api/admin/campaigns")
        .token("wrong")
        .json(body)
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn errors_have_a_json_shape() {
    let app = app();
    let (s, v) = Call::new(Method::POST, "/api/admin/campaigns")
        .token(ADMIN)
        .raw("{not json")
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "malformed");
    assert!(v["message"].is_string());

    let (s, v) = Call::new(Method::POST, "/api/admin/campaigns")
        .token(ADMIN)
        .json(json!({ "name": "t", "quota": 0 }))
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "invalid_config");
    assert_eq!(v["field"], "quota");

    let (s, v) = Call::new(Method::GET, "/api/admin/campaigns/cmp_9")
        .token(ADMIN)
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "unknown_campaign");

    let (s, v) = Call::new(Method::POST, "/api/login")
        .json(json!({ "username": "nobody", "password": "x" }))
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    assert_eq!(v["code"], "invalid_credentials");
}

#[tokio::test]
async fn annotation_round_trip() {
    let app = app();
    let (id, creds) = campaign(&app, 3, 1, 1).await;
    let token = login(&app, &creds[0]).await;

    let (s, task) = Call::new(Method::GET, "/api/task")
        .token(&token)
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(task["status"], "image");
    assert_eq!(task["categories"].as_array().unwrap().len(), 7);
    // the offer is stable until answered
    let (_, again) = Call::new(Method::GET, "/api/task")
        .token(&token)
        .value(&app)
        .await;
    assert_eq!(again["image_id"], task["image_id"]);

    let (s, v) = Call::new(Method::POST, "/api/judgment")
        .token(&token)
        .json(json!({ "image_id": task["image_id"], "verdict": "yes" }))
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "missing_comment");
    assert_eq!(v["field"], "comment");

    let body = json!({ "image_id": task["image_id"], "verdict": "yes",
                       "comment": { "text": "bad", "trigger": "Pose" } });
    let (s, first) = Call::new(Method::POST, "/api/judgment")
        .token(&token)
        .key("k1")
        .json(body.clone())
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::OK, "{first}");
    let (s, replay) = Call::new(Method::POST, "/api/judgment")
        .token(&token)
        .key("k1")
        .json(body.clone())
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(replay, first);

    let (s, v) = Call::new(Method::POST, "/api/judgment")
        .token(&token)
        .json(body)
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "stale_image");

    let mut next = first["next"].clone();
    while next["status"] == "image" {
        let (s, r) = Call::new(Method::POST, "/api/judgment")
            .token(&token)
            .json(json!({ "image_id": next["image_id"], "verdict": "no" }))
            .value(&app)
            .await;
        assert_eq!(s, StatusCode::OK);
        next = r["next"].clone();
    }
    assert_eq!(next["status"], "exhausted");

    let (s, summary) = Call::new(Method::GET, &format!("/api/admin/campaigns/{id}"))
        .token(ADMIN)
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(summary["judgments"], 3);
    assert_eq!(summary["comments"], 1);

    let (s, csv) = Call::new(
        Method::GET,
        &format!("/api/admin/campaigns/{id}/reports/trigger-distribution?format=csv"),
    )
    .token(ADMIN)
    .send(&app)
    .await;
    assert_eq!(s, StatusCode::OK);
    assert!(String::from_utf8(csv).unwrap().contains("Pose,1"));

    let (s, v) = Call::new(
        Method::GET,
        &format!("/api/admin/campaigns/{id}/reports/nope"),
    )
    .token(ADMIN)
    .value(&app)
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "unknown_report");

    let (s, export) = Call::new(
        Method::GET,
        &format!("/api/admin/campaigns/{id}/export?seed=3"),
    )
    .token(ADMIN)
    .send(&app)
    .await;
    assert_eq!(s, StatusCode::OK);
    let text = String::from_utf8(export).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(!text.contains("secret.example"));
    assert!(!text.contains(creds[0]["username"].as_str().unwrap()));
}

#[tokio::test]
async fn sessions_end_on_logout_and_language_changes() {
    let app = app();
    let (_, creds) = campaign(&app, 1, 1, 1).await;
    let token = login(&app, &creds[0]).await;

    let (s, v) = Call::new(Method::PUT, "/api/language")
        .token(&token)
        .json(json!({ "language": "xx" }))
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "unknown_language");

    let (s, _) = Call::new(Method::POST, "/api/logout")
        .token(&token)
        .send(&app)
        .await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, _) = Call::new(Method::GET, "/api/task")
        .token(&token)
        .send(&app)
        .await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);

    let (s, v) = Call::new(Method::GET, "/api/messages/en").value(&app).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v.is_object());
}

#[tokio::test]
async fn closed_campaigns_refuse_work() {
    let app = app();
    let (id, creds) = campaign(&app, 2, 1, 1).await;
    let token = login(&app, &creds[0]).await;
    let (s, _) = Call::new(Method::POST, &format!("/api/admin/campaigns/{id}/status"))
        .token(ADMIN)
        .json(json!({ "status": "closed" }))
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::OK);
    let (s, v) = Call::new(Method::GET, "/api/task")
        .token(&token)
        .value(&app)
        .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "campaign_closed");
}
