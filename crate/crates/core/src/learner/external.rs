//! Client for an out-of-process classifier speaking JSON lines over the
//! child's stdin/stdout. One request line, one response line:
//!
//! ```text
//! -> {"op":"fit","model":"stage-0-sit","texts":["..."],"labels":["..."]}
//! <- {"ok":true,"classes":["piel","todo"]}
//! -> {"op":"predict","model":"stage-0-sit","text":"...","k":2}
//! <- {"ok":true,"ranked":[["piel",0.91],["todo",0.09]]}
//! <- {"ok":false,"error":"unknown model"}
//! ```
//!
//! Calls are serialized: the pipe carries one request at a time.

use std::{
    io::{BufRead, BufReader, Write},
    process::{Child, ChildStdin, ChildStdout, Command, Stdio},
    sync::{Arc, Mutex},
};

use serde::{Deserialize, Serialize};

use super::{LearnerError, Scored, TextClassifier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum ExternalRequest {
    Fit { model: String, texts: Vec<String>, labels: Vec<String> },
    Predict { model: String, text: String, k: usize },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExternalResponse {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranked: Option<Vec<Scored>>,
}

struct Pipe {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Drop for Pipe {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[derive(Serialize, Deserialize)]
struct ExternalRepr {
    command: Vec<String>,
    model: String,
    classes: Vec<String>,
}

/// Handle to one model hosted by an external process. The process is
/// spawned on first use and shared by clones.
#[derive(Clone, Serialize, Deserialize)]
#[serde(from = "ExternalRepr", into = "ExternalRepr")]
pub struct ExternalClassifier {
    command: Vec<String>,
    model: String,
    classes: Vec<String>,
    pipe: Arc<Mutex<Option<Pipe>>>,
}

impl std::fmt::Debug for ExternalClassifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalClassifier")
            .field("command", &self.command)
            .field("model", &self.model)
            .field("classes", &self.classes)
            .finish()
    }
}

impl From<ExternalRepr> for ExternalClassifier {
    fn from(r: ExternalRepr) -> Self {
        Self { command: r.command, model: r.model, classes: r.classes, pipe: Arc::default() }
    }
}

impl From<ExternalClassifier> for ExternalRepr {
    fn from(c: ExternalClassifier) -> Self {
        Self { command: c.command, model: c.model, classes: c.classes }
    }
}

fn ext(msg: impl std::fmt::Display) -> LearnerError {
    LearnerError::External(msg.to_string())
}

impl ExternalClassifier {
    pub fn new(command: Vec<String>, model: &str) -> Self {
        Self { command, model: model.to_string(), classes: Vec::new(), pipe: Arc::default() }
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    fn call(&self, request: &ExternalRequest) -> Result<ExternalResponse, LearnerError> {
        let mut guard = self.pipe.lock().map_err(|_| ext("pipe mutex poisoned"))?;
        if guard.is_none() {
            let (program, args) = self.command.split_first().ok_or_else(|| ext("empty command"))?;
            let mut child = Command::new(program)
                .args(args)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .spawn()
                .map_err(|e| ext(format!("spawning {program}: {e}")))?;
            let stdin = child.stdin.take().ok_or_else(|| ext("no stdin"))?;
            let stdout = BufReader::new(child.stdout.take().ok_or_else(|| ext("no stdout"))?);
            *guard = Some(Pipe { child, stdin, stdout });
        }
        let pipe = guard.as_mut().expect("pipe initialized");
        let mut line = serde_json::to_string(request).map_err(ext)?;
        line.push('\n');
        pipe.stdin.write_all(line.as_bytes()).and_then(|_| pipe.stdin.flush()).map_err(ext)?;
        let mut reply = String::new();
        if pipe.stdout.read_line(&mut reply).map_err(ext)? == 0 {
            *guard = None;
            return Err(ext("external process closed its output"));
        }
        let resp: ExternalResponse = serde_json::from_str(&reply).map_err(ext)?;
        if !resp.ok {
            return Err(ext(resp.error.unwrap_or_else(|| "request failed".into())));
        }
        Ok(resp)
    }

    /// Asks the process to train this model; records the returned classes.
    pub fn fit(&mut self, texts: &[String], labels: &[String]) -> Result<(), LearnerError> {
        let resp = self.call(&ExternalRequest::Fit {
            model: self.model.clone(),
            texts: texts.to_vec(),
            labels: labels.to_vec(),
        })?;
        self.classes = resp.classes.ok_or_else(|| ext("fit response without classes"))?;
        Ok(())
    }
}

impl TextClassifier for ExternalClassifier {
    fn class_names(&self) -> &[String] {
        &self.classes
    }

    fn predict_topk(&self, text: &str, k: usize) -> Result<Vec<Scored>, LearnerError> {
        if k == 0 {
            return Err(LearnerError::InvalidK);
        }
        let resp = self.call(&ExternalRequest::Predict { model: self.model.clone(), text: text.to_string(), k })?;
        resp.ranked.ok_or_else(|| ext("predict response without ranking"))
    }
}
