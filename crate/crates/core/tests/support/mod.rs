//! Shared fixtures for the integration suites: a local mock of the
//! vision-language endpoint and brute-force reference computations.
#![allow(dead_code)]

use std::io::Cursor;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use elss_core::raster::{RasterKind, RasterMeta, SuitabilityRaster, WorldPoint};

/// One scripted reply of the mock endpoint.
#[derive(Debug, Clone)]
pub enum MockReply {
    /// HTTP 200 with `{"text": ...}`.
    Text(String),
    /// Bare status code with a short body.
    Status(u16),
    /// HTTP 200 with a body that is not the reply schema.
    Garbage,
    /// Sleep before answering with `{"text": ...}`.
    Slow(u64, String),
}

impl MockReply {
    pub fn text(t: &str) -> Self {
        Self::Text(t.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct RecordedRequest {
    pub authorization: Option<String>,
    pub body: Value,
}

/// Local HTTP server speaking the `{"model","prompt","image_base64"}` →
/// `{"text"}` contract. Replies follow the script; once it is exhausted every
/// request gets HTTP 500.
pub struct MockVlm {
    pub url: String,
    requests: Arc<Mutex<Vec<RecordedRequest>>>,
    hits: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    handle: Option<thread::JoinHandle<()>>,
}

impl MockVlm {
    pub fn start(script: Vec<MockReply>) -> Self {
        let server = tiny_http::Server::http("127.0.0.1:0").expect("bind mock server");
        let url = format!("http://{}/v1/verify", server.server_addr().to_ip().expect("ip listener"));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let hits = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let (req_log, hit_count, stop_flag) = (requests.clone(), hits.clone(), stop.clone());
        let handle = thread::spawn(move || {
            while !stop_flag.load(Ordering::SeqCst) {
                let Ok(Some(mut request)) = server.recv_timeout(Duration::from_millis(20)) else {
                    continue;
                };
                let n = hit_count.fetch_add(1, Ordering::SeqCst);
                let mut raw = String::new();
                let _ = request.as_reader().read_to_string(&mut raw);
                let authorization = request
                    .headers()
                    .iter()
                    .find(|h| h.field.equiv("Authorization"))
                    .map(|h| h.value.as_str().to_string());
                req_log.lock().unwrap().push(RecordedRequest {
                    authorization,
                    body: serde_json::from_str(&raw).unwrap_or(Value::Null),
                });
                let reply = script.get(n).cloned().unwrap_or(MockReply::Status(500));
                thread::spawn(move || respond(request, reply));
            }
        });
        Self {
            url,
            requests,
            hits,
            stop,
            handle: Some(handle),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for MockVlm {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn json_response(status: u16, body: String) -> tiny_http::Response<Cursor<Vec<u8>>> {
    let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
    tiny_http::Response::from_data(body.into_bytes())
        .with_status_code(status)
        .with_header(header)
}

fn respond(request: tiny_http::Request, reply: MockReply) {
    let response = match reply {
        MockReply::Text(t) => json_response(200, serde_json::json!({ "text": t }).to_string()),
        MockReply::Status(code) => json_response(code, format!("{{\"error\":\"status {code}\"}}")),
        MockReply::Garbage => json_response(200, "{\"choices\": []}".into()),
        MockReply::Slow(ms, t) => {
            thread::sleep(Duration::from_millis(ms));
            json_response(200, serde_json::json!({ "text": t }).to_string())
        }
    };
    let _ = request.respond(response);
}

pub fn suitability_meta() -> RasterMeta {
    RasterMeta::new(1.0, WorldPoint::new(0.0, 0.0), "local", RasterKind::Suitability).unwrap()
}

pub fn raster_from(width: usize, height: usize, data: Vec<u8>) -> SuitabilityRaster {
    SuitabilityRaster::new(width, height, data, suitability_meta()).unwrap()
}

pub fn random_raster(rng: &mut ChaCha8Rng, width: usize, height: usize, density: f64) -> SuitabilityRaster {
    let data = (0..width * height).map(|_| u8::from(rng.gen_bool(density))).collect();
    raster_from(width, height, data)
}

/// Kernel weight written out longhand from the radial definition.
pub fn reference_weight(d: usize, i: usize, j: usize) -> f64 {
    let (d, i, j) = (d as f64, i as f64, j as f64);
    let r2 = (i - d) * (i - d) + (j - d) * (j - d);
    1.0 - r2 / (2.0 * d * d)
}

/// Zero-padded cross-correlation by four nested loops, row-major output.
pub fn brute_force_response(data: &[u8], width: usize, height: usize, d: usize) -> Vec<f64> {
    let side = 2 * d + 1;
    let mut out = vec![0.0; width * height];
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let mut acc = 0.0;
            for i in 0..side {
                for j in 0..side {
                    let sx = x + i as i64 - d as i64;
                    let sy = y + j as i64 - d as i64;
                    if sx < 0 || sy < 0 || sx >= width as i64 || sy >= height as i64 {
                        continue;
                    }
                    acc += f64::from(data[sy as usize * width + sx as usize]) * reference_weight(d, i, j);
                }
            }
            out[y as usize * width + x as usize] = acc;
        }
    }
    out
}

/// One iteration of [`reference_loop`]: center, response, accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefStep {
    pub center: (usize, usize),
    pub response: f64,
    pub safe: bool,
}

/// Straight-line restatement of the propose → verify → update loop over the
/// brute-force response. `safe` decides each candidate from its center.
#[allow(clippy::too_many_arguments)]
pub fn reference_loop(
    data: &[u8],
    width: usize,
    height: usize,
    d: usize,
    floor: f64,
    max_accepted: usize,
    max_iterations: usize,
    safe: impl Fn(usize, usize) -> bool,
) -> Vec<RefStep> {
    let mut r = brute_force_response(data, width, height, d);
    let mut steps = Vec::new();
    let mut accepted = 0;
    while accepted < max_accepted && steps.len() < max_iterations {
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for y in 0..height {
            for x in 0..width {
                if r[y * width + x] > best_v {
                    best_v = r[y * width + x];
                    best = (x, y);
                }
            }
        }
        if best_v <= floor {
            break;
        }
        let ok = safe(best.0, best.1);
        steps.push(RefStep { center: best, response: best_v, safe: ok });
        let (cx, cy) = (best.0 as i64, best.1 as i64);
        for y in (cy - d as i64).max(0)..=(cy + d as i64).min(height as i64 - 1) {
            for x in (cx - d as i64).max(0)..=(cx + d as i64).min(width as i64 - 1) {
                let cell = &mut r[y as usize * width + x as usize];
                if ok {
                    *cell = 0.0;
                } else {
                    let dist2 = ((x - cx).pow(2) + (y - cy).pow(2)) as f64;
                    *cell *= dist2 / (2.0 * (d * d) as f64);
                }
            }
        }
        if ok {
            accepted += 1;
        }
    }
    steps
}

/// True when any hazard pixel lies in the clipped `(2d+1)`-square around `(cx, cy)`.
pub fn hazard_in_square(hazards: &[u8], width: usize, height: usize, d: usize, cx: usize, cy: usize) -> bool {
    let (x0, y0) = (cx.saturating_sub(d), cy.saturating_sub(d));
    let (x1, y1) = ((cx + d).min(width - 1), (cy + d).min(height - 1));
    (y0..=y1).any(|y| (x0..=x1).any(|x| hazards[y * width + x] != 0))
}
