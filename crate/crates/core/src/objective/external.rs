use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Objective, ObjectiveRequest, ObjectiveResult, Status};
use crate::error::{Error, Result};

/// Request line written to the trainer's standard input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalRequest {
    pub bits: Vec<u8>,
    pub epochs: u32,
    pub seed: u64,
}

/// Response line expected on the trainer's standard output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalResponse {
    pub accuracy: f64,
    pub cost_seconds: f64,
}

/// Runs a training command once per evaluation.
#[derive(Debug, Clone)]
pub struct External {
    program: String,
    args: Vec<String>,
    timeout: Duration,
}

const POLL: Duration = Duration::from_millis(5);

impl External {
    /// `command[0]` is the program, the rest its arguments.
    pub fn new(command: Vec<String>, timeout: Duration) -> Result<Self> {
        let mut it = command.into_iter();
        let program = it
            .next()
            .filter(|p| !p.is_empty())
            .ok_or_else(|| Error::config("external command is empty"))?;
        if timeout.is_zero() {
            return Err(Error::config("external timeout must be positive"));
        }
        Ok(External {
            program,
            args: it.collect(),
            timeout,
        })
    }

    fn run(&self, line: &str) -> ObjectiveResult {
        let mut child = match Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
        {
            Ok(c) => c,
            Err(e) => return ObjectiveResult::failed(Status::Failed, format!("spawn {}: {e}", self.program)),
        };
        let mut stdin = child.stdin.take().expect("stdin was piped");
        let mut stdout = child.stdout.take().expect("stdout was piped");
        let reader = thread::spawn(move || {
            let mut out = String::new();
            let _ = stdout.read_to_string(&mut out);
            out
        });
        // a trainer that never reads stdin is not an error by itself
        let _ = stdin.write_all(line.as_bytes()).and_then(|_| stdin.write_all(b"\n"));
        drop(stdin);

        let deadline = Instant::now() + self.timeout;
        let status = loop {
            match child.try_wait() {
                Ok(Some(s)) => break s,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return ObjectiveResult::failed(
                        Status::Timeout,
                        format!("no response within {:.3} s", self.timeout.as_secs_f64()),
                    );
                }
                Ok(None) => thread::sleep(POLL),
                Err(e) => return ObjectiveResult::failed(Status::Failed, format!("wait: {e}")),
            }
        };
        let out = reader.join().unwrap_or_default();
        if !status.success() {
            return ObjectiveResult::failed(Status::Failed, format!("trainer exited with {status}"));
        }
        parse_response(&out)
    }
}

fn parse_response(out: &str) -> ObjectiveResult {
    let Some(line) = out.lines().map(str::trim).find(|l| !l.is_empty()) else {
        return ObjectiveResult::failed(Status::Failed, "empty response");
    };
    let resp: ExternalResponse = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => return ObjectiveResult::failed(Status::Failed, format!("malformed response {line:?}: {e}")),
    };
    if !(0.0..=1.0).contains(&resp.accuracy) {
        return ObjectiveResult::failed(Status::Failed, format!("accuracy {} outside [0, 1]", resp.accuracy));
    }
    let mut r = ObjectiveResult::ok(resp.accuracy, resp.cost_seconds);
    if !resp.cost_seconds.is_finite() {
        r.cost_actual = 0.0;
    }
    r
}

impl Objective for External {
    fn evaluate(&mut self, request: &ObjectiveRequest) -> ObjectiveResult {
        let req = ExternalRequest {
            bits: request.bits.bits().to_vec(),
            epochs: request.epochs,
            seed: request.seed,
        };
        let line = serde_json::to_string(&req).expect("plain struct serializes");
        self.run(&line)
    }
}
