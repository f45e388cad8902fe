#![allow(dead_code)]

use std::io::Cursor;
use std::net::SocketAddr;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use beatscribe::audio::voice::{enrolment_hits, random_pattern, Performance, Voice};
use beatscribe::audio::write_wav_to;
use beatscribe::{AudioClip, ClassSpec, DrumEvent};
use beatscribe_cli::service::{router, AppState};
use beatscribe_cli::stream::{chunk_pcm, float_to_pcm, pcm_to_float, StreamChunk};
use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

pub const ENROL_SPEC: &str = "kick:5,snare:5,hihat:5";

pub fn enrolment_wav(voice: &Voice, seed: u64) -> Vec<u8> {
    let spec: ClassSpec = ENROL_SPEC.parse().unwrap();
    let p: Performance<f64> = voice.perform(&enrolment_hits(spec.classes(), 0.4, 0.7), 0.0, 0.001, seed).unwrap();
    wav(p.clip.samples())
}

pub fn performance(voice: &Voice, n: usize, seed: u64) -> Performance<f64> {
    voice.perform(&random_pattern(&voice.class_names(), n, 0.25, seed), 0.0, 0.001, seed + 7).unwrap()
}

/// 16-bit quantised copy of a clip, as a streaming client would send it.
pub fn pcm(clip: &[f64]) -> Vec<i16> {
    float_to_pcm(clip)
}

/// Float WAV of samples; i16-derived values survive the f32 container exactly.
pub fn wav(samples: &[f64]) -> Vec<u8> {
    let clip = AudioClip::new(samples.to_vec(), 44_100).unwrap();
    let mut cur = Cursor::new(Vec::new());
    write_wav_to(&mut cur, &clip).unwrap();
    cur.into_inner()
}

pub fn pcm_wav(pcm: &[i16]) -> Vec<u8> {
    wav(&pcm_to_float(pcm))
}

pub fn multipart(fields: &[(&str, &[u8])]) -> (String, Vec<u8>) {
    let boundary = "beatscribe-test-boundary";
    let mut body = Vec::new();
    for (name, data) in fields {
        body.extend_from_slice(format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"").as_bytes());
        if *name == "audio" {
            body.extend_from_slice(b"; filename=\"take.wav\"\r\nContent-Type: audio/wav");
        }
        body.extend_from_slice(b"\r\n\r\n");
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

/// In-process client over the router.
#[derive(Clone)]
pub struct Client {
    pub app: Router,
}

impl Client {
    pub fn new(state: AppState) -> Self {
        Self { app: router(state) }
    }

    pub async fn call(&self, req: Request<Body>) -> (StatusCode, Vec<u8>) {
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Vec<u8>) {
        self.call(Request::get(uri).body(Body::empty()).unwrap()).await
    }

    pub async fn post(&self, uri: &str, content_type: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
        self.call(Request::post(uri).header("content-type", content_type).body(Body::from(body)).unwrap()).await
    }

    pub async fn create(&self) -> String {
        let (status, body) = self.post("/api/sessions", "application/json", vec![]).await;
        assert_eq!(status, StatusCode::CREATED);
        json(&body)["id"].as_str().unwrap().to_string()
    }

    pub async fn train(&self, id: &str, wav: &[u8], classes: &str) -> (StatusCode, Value) {
        let (ct, body) = multipart(&[("audio", wav), ("classes", classes.as_bytes())]);
        let (status, body) = self.post(&format!("/api/sessions/{id}/train"), &ct, body).await;
        (status, json(&body))
    }

    pub async fn transcribe(&self, id: &str, wav: Vec<u8>) -> (StatusCode, Value) {
        let (status, body) = self.post(&format!("/api/sessions/{id}/transcribe"), "audio/wav", wav).await;
        (status, json(&body))
    }
}

pub fn json(body: &[u8]) -> Value {
    serde_json::from_slice(body).unwrap_or(Value::Null)
}

pub fn events_of(v: &Value) -> Vec<DrumEvent> {
    serde_json::from_value(v["events"].clone()).unwrap()
}

/// Serve the router on an ephemeral port.
pub async fn spawn_server(state: AppState) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    addr
}

/// Outcome of one live session: events in arrival order and the final message.
pub struct LiveResult {
    pub events: Vec<DrumEvent>,
    pub last: Value,
}

pub async fn stream_chunks(addr: SocketAddr, id: &str, chunks: &[StreamChunk]) -> LiveResult {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/api/sessions/{id}/live")).await.unwrap();
    let (mut tx, mut rx) = ws.split();
    let frames: Vec<Vec<u8>> = chunks.iter().map(StreamChunk::encode).collect();
    let sender = tokio::spawn(async move {
        for f in frames {
            if tx.send(Message::Binary(f.into())).await.is_err() {
                break;
            }
        }
        tx
    });
    let mut events = Vec::new();
    let mut last = Value::Null;
    while let Some(msg) = rx.next().await {
        match msg {
            Ok(Message::Text(t)) => {
                let v: Value = serde_json::from_str(&t).unwrap();
                if v["type"] == "event" {
                    events.push(serde_json::from_value(v.clone()).unwrap());
                } else {
                    last = v;
                }
            }
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => {}
        }
    }
    let _ = sender.await;
    LiveResult { events, last }
}

pub async fn stream_pcm(addr: SocketAddr, id: &str, pcm: &[i16], chunk: usize) -> LiveResult {
    stream_chunks(addr, id, &chunk_pcm(pcm, chunk)).await
}

pub fn same_events(live: &[DrumEvent], offline: &[DrumEvent], hop_s: f64) -> bool {
    live.len() == offline.len()
        && live.iter().zip(offline).all(|(a, b)| a.label == b.label && (a.time - b.time).abs() <= hop_s)
}
