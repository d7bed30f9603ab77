#![allow(dead_code)]

use std::sync::Arc;

use factlens_annotation::{router, GoldItem, ServiceConfig, Store, SystemClock};
use factlens_core::annotation::SummaryContext;
use serde_json::{json, Value};

pub fn summaries(n: usize) -> Vec<SummaryContext> {
    (0..n)
        .map(|i| SummaryContext {
            summary_id: format!("s{i:02}"),
            claim: format!("claim {i}"),
            verdict: "False.".into(),
            article: format!("article {i} ").repeat(120),
            explanation: format!("explanation {i}"),
        })
        .collect()
}

pub fn gold() -> Vec<GoldItem> {
    (0..4)
        .map(|i| GoldItem {
            task_id: format!("gold-{i}"),
            claim: format!("gold claim {i}"),
            article: "gold article".into(),
            explanation: "gold explanation".into(),
            q1: i % 2 == 0,
            q2: false,
            q3: i == 3,
            q4: true,
        })
        .collect()
}

/// Starts the service on an ephemeral port in a background runtime.
pub fn spawn(store: Store) -> String {
    let store = Arc::new(store);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router(store)).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

pub fn service(n: usize, with_gold: bool) -> String {
    let store = Store::in_memory(ServiceConfig::default(), Box::new(SystemClock)).unwrap();
    store.load_summaries(&summaries(n)).unwrap();
    if with_gold {
        store.load_gold(&gold()).unwrap();
    }
    spawn(store)
}

pub struct Client {
    pub base: String,
    http: reqwest::blocking::Client,
}

impl Client {
    pub fn new(base: &str) -> Self {
        Client {
            base: base.to_string(),
            http: reqwest::blocking::Client::new(),
        }
    }

    pub fn task(&self, annotator: &str) -> (u16, Value) {
        let r = self
            .http
            .get(format!("{}/api/task", self.base))
            .query(&[("annotator", annotator)])
            .send()
            .unwrap();
        (r.status().as_u16(), r.json().unwrap())
    }

    pub fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let r = self
            .http
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .unwrap();
        (r.status().as_u16(), r.json().unwrap())
    }

    pub fn judge(&self, annotator: &str, task_id: &str, quality: f64) -> (u16, Value) {
        self.post(
            "/api/judgment",
            &json!({
                "annotator_id": annotator,
                "task_id": task_id,
                "q1": true, "q2": false, "q3": true, "q4": false,
                "quality": quality,
            }),
        )
    }

    pub fn progress(&self, annotator: Option<&str>) -> Value {
        let mut req = self.http.get(format!("{}/api/progress", self.base));
        if let Some(a) = annotator {
            req = req.query(&[("annotator", a)]);
        }
        req.send().unwrap().json().unwrap()
    }
}
