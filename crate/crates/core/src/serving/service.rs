//! Newline-delimited JSON prediction service.
//!
//! One JSON object per line in, one per line out. Requests route by mode
//! to the mounted incomplete- or complete-query bundle. Lines are handled
//! by a worker pool, so responses may interleave across requests but every
//! response is written as a single complete line and echoes its request
//! id. Malformed input produces an error line and never kills the service.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::ModelBundle;
use crate::text::{Query, UserContext};
use crate::{Error, Result};

use super::bundle_io::bundle_checksum;

#[derive(Debug, Clone, Deserialize)]
pub struct ServiceRequest {
    #[serde(default)]
    pub id: serde_json::Value,
    pub mode: String,
    pub query: String,
    #[serde(default)]
    pub locale: String,
    #[serde(default)]
    pub user_features: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ServiceResponse {
    Ok {
        id: serde_json::Value,
        probabilities: BTreeMap<String, f64>,
        argmax: String,
        model_version: String,
        latency_us: u64,
    },
    Err {
        id: serde_json::Value,
        error: String,
        message: String,
    },
}

/// The bundles a service instance routes to, with precomputed version
/// strings. Bundles are immutable; traffic can never mutate them.
pub struct ServiceBundles {
    incomplete: Option<(Arc<ModelBundle>, String)>,
    complete: Option<(Arc<ModelBundle>, String)>,
}

impl ServiceBundles {
    pub fn new(
        incomplete: Option<Arc<ModelBundle>>,
        complete: Option<Arc<ModelBundle>>,
    ) -> Result<Self> {
        if incomplete.is_none() && complete.is_none() {
            return Err(Error::InvalidConfig("no bundle mounted".into()));
        }
        let tag = |b: &Arc<ModelBundle>| -> Result<String> {
            Ok(format!("{}:{:08x}", b.format_version, bundle_checksum(b)?))
        };
        Ok(ServiceBundles {
            incomplete: match incomplete {
                Some(b) => {
                    let t = tag(&b)?;
                    Some((b, t))
                }
                None => None,
            },
            complete: match complete {
                Some(b) => {
                    let t = tag(&b)?;
                    Some((b, t))
                }
                None => None,
            },
        })
    }
}

/// Handles one request line and renders the response line (no trailing
/// newline). Infallible by design: every failure becomes an error response.
pub fn handle_line(line: &str, bundles: &ServiceBundles) -> String {
    let response = match serde_json::from_str::<ServiceRequest>(line) {
        Ok(req) => respond(req, bundles),
        Err(e) => {
            // Recover the id when the line is valid JSON with an id field.
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").cloned())
                .unwrap_or(serde_json::Value::Null);
            ServiceResponse::Err {
                id,
                error: "bad_request".into(),
                message: format!("malformed request: {e}"),
            }
        }
    };
    serde_json::to_string(&response).unwrap_or_else(|e| {
        format!("{{\"id\":null,\"error\":\"internal\",\"message\":\"{e}\"}}")
    })
}

fn respond(req: ServiceRequest, bundles: &ServiceBundles) -> ServiceResponse {
    let err = |id: &serde_json::Value, error: &str, message: String| ServiceResponse::Err {
        id: id.clone(),
        error: error.into(),
        message,
    };
    let complete = match req.mode.as_str() {
        "incomplete" => false,
        "complete" => true,
        other => {
            return err(&req.id, "unknown_mode", format!("mode {other:?} is not served"));
        }
    };
    let slot = if complete { &bundles.complete } else { &bundles.incomplete };
    let Some((bundle, version)) = slot else {
        return err(&req.id, "unmounted_mode", format!("no bundle mounted for {:?}", req.mode));
    };

    let locale = match (&bundle.locales, req.locale.as_str()) {
        (Some(reg), code) => match reg.id(code) {
            Ok(l) => l,
            Err(e) => return err(&req.id, "unknown_locale", e.to_string()),
        },
        (None, _) => 0,
    };
    let user = match &req.user_features {
        Some(f) => UserContext { user_id: String::new(), features: f.clone() },
        None => {
            match UserContext::fresh("", locale, bundle.config.trad_width, bundle.config.label_count, 8)
            {
                Ok(u) => u,
                Err(e) => return err(&req.id, "bad_features", e.to_string()),
            }
        }
    };
    let q = if complete {
        Query::complete(req.query.clone(), locale)
    } else {
        Query::incomplete(req.query.clone(), locale)
    };
    let started = Instant::now();
    match bundle.predict(&q, &user) {
        Ok(dist) => {
            let latency_us = started.elapsed().as_micros() as u64;
            let probabilities: BTreeMap<String, f64> = bundle
                .labels
                .names()
                .iter()
                .zip(&dist.probabilities)
                .map(|(n, p)| (n.clone(), *p))
                .collect();
            let argmax = bundle
                .labels
                .name(dist.argmax)
                .unwrap_or("?")
                .to_string();
            ServiceResponse::Ok {
                id: req.id,
                probabilities,
                argmax,
                model_version: version.clone(),
                latency_us,
            }
        }
        Err(e) => err(&req.id, "prediction_failed", e.to_string()),
    }
}

/// Serves newline-delimited requests from `reader` to `writer` with a
/// fixed worker pool until the reader ends. Responses interleave freely.
pub fn serve_lines<R, W>(reader: R, writer: W, bundles: &ServiceBundles, workers: usize) -> Result<()>
where
    R: BufRead,
    W: Write + Send,
{
    let writer = Mutex::new(writer);
    let workers = workers.max(1);
    std::thread::scope(|scope| -> Result<()> {
        let (tx, rx) = mpsc::channel::<String>();
        let rx = Arc::new(Mutex::new(rx));
        let mut handles = Vec::new();
        for _ in 0..workers {
            let rx = rx.clone();
            let writer = &writer;
            handles.push(scope.spawn(move || loop {
                let job = rx.lock().expect("job queue poisoned").recv();
                match job {
                    Ok(line) => {
                        let response = handle_line(&line, bundles);
                        let mut w = writer.lock().expect("writer poisoned");
                        let _ = writeln!(w, "{response}");
                        let _ = w.flush();
                    }
                    Err(_) => break,
                }
            }));
        }
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            tx.send(line).expect("workers exited early");
        }
        drop(tx);
        for h in handles {
            let _ = h.join();
        }
        Ok(())
    })
}
