//! Line-delimited JSON scoring service for training loops.
//!
//! One request per line in, one response per line out. Requests are
//! independent and the service is stateless between them; a malformed line
//! produces an error response (echoing any recoverable request id) instead
//! of a crash.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use veriseq::domain::{DatasetRecord, GroundTruth, Instance, RecordRow, RewardSpec, Task};
use veriseq::reward::{score, RewardBreakdown};

/// One scoring request. `rows` uses the dataset record row shape; the
/// reward spec falls back to the service default when omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    #[serde(default)]
    pub request_id: Value,
    pub task: Task,
    pub rows: Vec<RecordRow>,
    pub ground_truth_ids: Vec<u32>,
    pub ground_truth_answer: u32,
    pub response_text: String,
    #[serde(default)]
    pub reward_spec: Option<RewardSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScoreResponse {
    Ok {
        request_id: Value,
        #[serde(flatten)]
        breakdown: RewardBreakdown,
    },
    Err {
        request_id: Value,
        error: String,
    },
}

fn build_instance(task: Task, rows: &[RecordRow]) -> Result<Instance, veriseq::Error> {
    // Reuse the dataset record conversion so the service accepts exactly the
    // dataset row shape.
    let record = DatasetRecord {
        task,
        seed: 0,
        hinted: false,
        rows: rows.to_vec(),
        ground_truth_ids: vec![],
        ground_truth_answer: 0,
        prompt: String::new(),
    };
    record.instance()
}

/// Scores one request. Errors become values, never panics.
pub fn handle_request(request: &ScoreRequest, default_spec: &RewardSpec) -> ScoreResponse {
    let spec = request.reward_spec.as_ref().unwrap_or(default_spec);
    let result = build_instance(request.task, &request.rows).and_then(|instance| {
        let truth = GroundTruth::from_parts(
            request.ground_truth_ids.clone(),
            request.ground_truth_answer,
        )?;
        score(&request.response_text, &instance, &truth, spec)
    });
    match result {
        Ok(breakdown) => ScoreResponse::Ok {
            request_id: request.request_id.clone(),
            breakdown,
        },
        Err(e) => ScoreResponse::Err {
            request_id: request.request_id.clone(),
            error: e.to_string(),
        },
    }
}

/// Processes one raw line into one response line.
pub fn handle_line(line: &str, default_spec: &RewardSpec) -> String {
    let response = match serde_json::from_str::<ScoreRequest>(line) {
        Ok(request) => handle_request(&request, default_spec),
        Err(e) => {
            // Best effort: pull a request_id out of whatever JSON did parse.
            let request_id = serde_json::from_str::<Value>(line)
                .ok()
                .and_then(|v| v.get("request_id").cloned())
                .unwrap_or(Value::Null);
            ScoreResponse::Err {
                request_id,
                error: format!("malformed request: {e}"),
            }
        }
    };
    serde_json::to_string(&response).expect("response serializes")
}

/// Serves requests from stdin to stdout until EOF.
pub fn serve_stdio(default_spec: &RewardSpec) -> Result<()> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for line in stdin.lock().lines() {
        let line = line.context("reading stdin")?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(out, "{}", handle_line(&line, default_spec))?;
        out.flush()?;
    }
    Ok(())
}

/// Serves requests over TCP, one connection per thread, each connection a
/// stream of request lines.
pub fn serve_tcp(addr: &str, default_spec: &RewardSpec) -> Result<()> {
    let listener =
        TcpListener::bind(addr).with_context(|| format!("binding tcp listener on {addr}"))?;
    eprintln!("scoring service listening on {}", listener.local_addr()?);
    for stream in listener.incoming() {
        let stream = stream.context("accepting connection")?;
        let spec = default_spec.clone();
        std::thread::spawn(move || {
            let peer = stream
                .peer_addr()
                .map(|a| a.to_string())
                .unwrap_or_else(|_| "unknown".into());
            let mut writer = match stream.try_clone() {
                Ok(w) => w,
                Err(e) => {
                    eprintln!("connection {peer}: {e}");
                    return;
                }
            };
            for line in BufReader::new(stream).lines() {
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                let out = handle_line(&line, &spec);
                if writeln!(writer, "{out}").is_err() {
                    break;
                }
            }
        });
    }
    Ok(())
}

/// Builds a request for callers that already hold typed instances (used by
/// tests and the offline/online parity harness).
pub fn request_for(
    request_id: Value,
    instance: &Instance,
    truth: &GroundTruth,
    response_text: String,
    reward_spec: Option<RewardSpec>,
) -> ScoreRequest {
    let rows = match instance {
        Instance::Activity(a) => a
            .activities()
            .iter()
            .map(|x| RecordRow::Activity {
                id: x.id,
                start: x.start,
                finish: x.finish,
            })
            .collect(),
        Instance::Lis(l) => l
            .rows()
            .iter()
            .map(|r| RecordRow::Lis {
                id: r.id,
                value: r.value,
            })
            .collect(),
    };
    ScoreRequest {
        request_id,
        task: instance.task(),
        rows,
        ground_truth_ids: truth.ids().to_vec(),
        ground_truth_answer: truth.answer(),
        response_text,
        reward_spec,
    }
}
