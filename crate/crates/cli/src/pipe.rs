//! Reference server for the external-classifier protocol, backed by the
//! built-in linear learner. Useful for testing the protocol end to end and
//! as a template for wrapping other learners.
//!
//! With a store directory, each fitted model is written to
//! `<store>/<model>.json` and loaded on demand, so a bundle trained in one
//! process can be served by another.

use std::{
    collections::BTreeMap,
    fs,
    io::{BufRead, Write},
    path::{Path, PathBuf},
};

use dermcascade::learner::{
    ExternalRequest, ExternalResponse, LinearTextClassifier, TextClassifier, TrainConfig, DEFAULT_MAX_FEATURES,
};

struct Models<'a> {
    loaded: BTreeMap<String, LinearTextClassifier>,
    store: Option<&'a Path>,
}

impl Models<'_> {
    fn path(&self, model: &str) -> Option<PathBuf> {
        // model names are stage file stems; keep them to one path component
        let safe: String =
            model.chars().map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
        self.store.map(|d| d.join(format!("{safe}.json")))
    }

    fn insert(&mut self, model: String, clf: LinearTextClassifier) -> Result<(), String> {
        if let Some(p) = self.path(&model) {
            let json = serde_json::to_string(&clf).map_err(|e| e.to_string())?;
            fs::create_dir_all(p.parent().expect("joined path")).map_err(|e| e.to_string())?;
            fs::write(&p, json).map_err(|e| format!("{}: {e}", p.display()))?;
        }
        self.loaded.insert(model, clf);
        Ok(())
    }

    fn get(&mut self, model: &str) -> Result<&LinearTextClassifier, String> {
        if !self.loaded.contains_key(model) {
            let p = self.path(model).filter(|p| p.exists()).ok_or_else(|| format!("unknown model {model:?}"))?;
            let text = fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            let clf = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?;
            self.loaded.insert(model.to_string(), clf);
        }
        Ok(&self.loaded[model])
    }
}

fn handle(models: &mut Models, config: &TrainConfig, line: &str) -> ExternalResponse {
    let fail = |e: String| ExternalResponse { ok: false, error: Some(e), ..Default::default() };
    match serde_json::from_str::<ExternalRequest>(line) {
        Err(e) => fail(format!("bad request: {e}")),
        Ok(ExternalRequest::Fit { model, texts, labels }) => {
            match LinearTextClassifier::fit(&texts, &labels, config, DEFAULT_MAX_FEATURES) {
                Ok(clf) => {
                    let classes = clf.class_names().to_vec();
                    match models.insert(model, clf) {
                        Ok(()) => ExternalResponse { ok: true, classes: Some(classes), ..Default::default() },
                        Err(e) => fail(e),
                    }
                }
                Err(e) => fail(e.to_string()),
            }
        }
        Ok(ExternalRequest::Predict { model, text, k }) => match models.get(&model) {
            Err(e) => fail(e),
            Ok(clf) => match clf.predict_topk(&text, k) {
                Ok(ranked) => ExternalResponse { ok: true, ranked: Some(ranked), ..Default::default() },
                Err(e) => fail(e.to_string()),
            },
        },
    }
}

/// Serves requests line by line until end of input.
pub fn serve(
    input: impl BufRead,
    mut output: impl Write,
    config: &TrainConfig,
    store: Option<&Path>,
) -> std::io::Result<()> {
    let mut models = Models { loaded: BTreeMap::new(), store };
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = handle(&mut models, config, &line);
        serde_json::to_writer(&mut output, &resp)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(input: &str, store: Option<&Path>) -> Vec<ExternalResponse> {
        let cfg = TrainConfig { learning_rate: 0.1, ..TrainConfig::default() };
        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out, &cfg, store).unwrap();
        String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
    }

    const FIT: &str = r#"{"op":"fit","model":"m","texts":["rojo rojo","azul azul"],"labels":["r","a"]}"#;
    const PREDICT: &str = r#"{"op":"predict","model":"m","text":"azul","k":1}"#;

    #[test]
    fn fit_then_predict() {
        let input = format!("{FIT}\n{PREDICT}\n{}\nnot json\n", r#"{"op":"predict","model":"x","text":"azul","k":1}"#);
        let lines = run(&input, None);
        assert_eq!(lines[0].classes.as_deref(), Some(&["a".to_string(), "r".to_string()][..]));
        assert_eq!(lines[1].ranked.as_ref().unwrap()[0].0, "a");
        assert!(!lines[2].ok);
        assert!(!lines[3].ok);
    }

    #[test]
    fn store_survives_restart() {
        let dir = tempfile::tempdir().unwrap();
        assert!(run(&format!("{FIT}\n"), Some(dir.path()))[0].ok);
        let again = run(&format!("{PREDICT}\n"), Some(dir.path()));
        assert_eq!(again[0].ranked.as_ref().unwrap()[0].0, "a");
        assert!(!run(&format!("{PREDICT}\n"), None)[0].ok);
    }
}
