//! Prediction logs and their join with task samples.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::sampler::{Task, TaskSample};

/// One model's confidences for one sample. Scores are used as-is; they need
/// not sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub model: String,
    pub task: Task,
    pub confidences: Vec<f64>,
}

impl PredictionRecord {
    /// Highest-scoring class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.confidences)
    }
}

pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub sample: TaskSample,
    pub pred: PredictionRecord,
    pub weight: f64,
}

impl EvalRow {
    pub fn new(sample: TaskSample, pred: PredictionRecord) -> Self {
        EvalRow {
            sample,
            pred,
            weight: 1.0,
        }
    }

    pub fn gt(&self) -> usize {
        self.sample.label.class_index()
    }

    pub fn predicted(&self) -> usize {
        self.pred.argmax()
    }

    pub fn is_correct(&self) -> bool {
        self.gt() == self.predicted()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinPolicy {
    Strict,
    Inner,
}

/// Rows dropped on each side of an inner join.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub missing: usize,
    pub orphan: usize,
}

fn check_record(rec: &PredictionRecord) -> std::result::Result<(), String> {
    if let Some(c) = rec.confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(format!("confidence {c} outside [0, 1]"));
    }
    if rec.sample_id.is_empty() {
        return Err("empty sample_id".into());
    }
    Ok(())
}

/// Parses a JSONL prediction log. Blank lines are skipped. `n_regions` sets
/// the expected arity of risk predictions.
pub fn parse_predictions(text: &str, n_regions: u32) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        check_record(&rec).map_err(|message| Error::MalformedLine {
            line: line_no,
            message,
        })?;
        let expected = rec.task.arity(n_regions);
        if rec.confidences.len() != expected {
            return Err(Error::ArityMismatch {
                context: format!("line {line_no}"),
                task: rec.task,
                expected,
                actual: rec.confidences.len(),
            });
        }
        let key = (rec.model.clone(), rec.sample_id.clone());
        if seen.insert(key, line_no).is_some() {
            return Err(Error::DuplicatePrediction {
                model: rec.model,
                sample_id: rec.sample_id,
                line: line_no,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_predictions(path: impl AsRef<Path>, n_regions: u32) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text, n_regions)
}

/// Canonical JSONL text, one record per line.
pub fn predictions_to_string(records: &[PredictionRecord]) -> Result<String> {
    jsonl(records)
}

pub fn write_predictions(records: &[PredictionRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, predictions_to_string(records)?).map_err(|e| Error::io(path, e))
}

/// Canonical JSONL export of samples.
pub fn samples_to_string(samples: &[TaskSample]) -> Result<String> {
    jsonl(samples)
}

pub fn parse_samples(text: &str) -> Result<Vec<TaskSample>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&json::to_canonical_line(item)?);
        out.push('\n');
    }
    Ok(out)
}

/// Pairs samples with one model's predictions. Rows follow `samples` order.
pub fn join(
    samples: &[TaskSample],
    preds: &[PredictionRecord],
    policy: JoinPolicy,
) -> Result<(Vec<EvalRow>, Coverage)> {
    let mut models: Vec<String> = preds.iter().map(|p| p.model.clone()).collect();
    models.sort();
    models.dedup();
    if models.len() > 1 {
        return Err(Error::MixedModels(models));
    }

    let by_id: HashMap<&str, &PredictionRecord> =
        preds.iter().map(|p| (p.sample_id.as_str(), p)).collect();
    let sample_ids: HashSet<&str> = samples.iter().map(|s| s.sample_id.as_str()).collect();

    let mut rows = Vec::with_capacity(samples.len());
    let mut missing = Vec::new();
    for s in samples {
        match by_id.get(s.sample_id.as_str()) {
            Some(p) if p.task != s.task => {
                return Err(Error::TaskMismatch {
                    sample_id: s.sample_id.clone(),
                    sample_task: s.task,
                    pred_task: p.task,
                })
            }
            Some(p) => rows.push(EvalRow::new(s.clone(), (*p).clone())),
            None => missing.push(s.sample_id.clone()),
        }
    }
    let orphans: Vec<String> = preds
        .iter()
        .filter(|p| !sample_ids.contains(p.sample_id.as_str()))
        .map(|p| p.sample_id.clone())
        .collect();

    if policy == JoinPolicy::Strict {
        if !missing.is_empty() {
            return Err(Error::MissingPrediction(missing));
        }
        if !orphans.is_empty() {
            return Err(Error::OrphanPrediction(orphans));
        }
    }
    let coverage = Coverage {
        missing: missing.len(),
        orphan: orphans.len(),
    };
    Ok((rows, coverage))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{RoadType, SignalState};
    use crate::sampler::{ActionClass, Label, MotionState, ScenarioContext};

    fn sample(i: u32) -> TaskSample {
        TaskSample {
            sample_id: format!("p#{i}#action"),
            ped_id: "p".into(),
            task: Task::Action,
            obs_start: i,
            obs_end: i + 14,
            tte: Some(40),
            label: Label::Action(ActionClass::Crossing),
            context: ScenarioContext {
                mean_scale: 100.0,
                state: MotionState::Walking,
                mean_speed: 0.0,
                signal: SignalState::None,
                road_type: RoadType::Unknown,
            },
        }
    }

    fn pred(i: u32) -> PredictionRecord {
        PredictionRecord {
            sample_id: format!("p#{i}#action"),
            model: "m".into(),
            task: Task::Action,
            confidences: vec![0.3, 0.7],
        }
    }

    #[test]
    fn reads_well_formed_lines() {
        let text = (0..3)
            .map(|i| json::to_canonical_line(&pred(i)).unwrap())
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(parse_predictions(&text, 12).unwrap().len(), 3);
    }

    #[test]
    fn rejects_out_of_range_confidence() {
        let text = r#"{"sample_id":"a","model":"m","task":"action","confidences":[1.3,0.0]}"#;
        let err = parse_predictions(text, 12).unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 1, .. }), "{err}");
    }

    #[test]
    fn rejects_duplicates() {
        let line = json::to_canonical_line(&pred(0)).unwrap();
        let err = parse_predictions(&format!("{line}\n\n{line}\n"), 12).unwrap_err();
        assert!(matches!(err, Error::DuplicatePrediction { line: 3, .. }), "{err}");
    }

    #[test]
    fn same_sample_different_models_is_fine() {
        let mut other = pred(0);
        other.model = "n".into();
        let text = format!(
            "{}\n{}\n",
            json::to_canonical_line(&pred(0)).unwrap(),
            json::to_canonical_line(&other).unwrap()
        );
        assert_eq!(parse_predictions(&text, 12).unwrap().len(), 2);
    }

    #[test]
    fn rejects_wrong_arity() {
        let text = r#"{"sample_id":"a","model":"m","task":"risk","confidences":[0.5,0.5]}"#;
        assert!(matches!(
            parse_predictions(text, 12),
            Err(Error::ArityMismatch { expected: 12, actual: 2, .. })
        ));
        let text = r#"{"sample_id":"a","model":"m","task":"intention","confidences":[0.5,0.5]}"#;
        assert!(matches!(parse_predictions(text, 12), Err(Error::ArityMismatch { .. })));
    }

    #[test]
    fn malformed_json_reports_line() {
        let text = format!("{}\nnot json\n", json::to_canonical_line(&pred(0)).unwrap());
        assert!(matches!(
            parse_predictions(&text, 12),
            Err(Error::MalformedLine { line: 2, .. })
        ));
    }

    #[test]
    fn strict_join() {
        let samples: Vec<_> = (0..5).map(sample).collect();
        let preds: Vec<_> = (0..5).rev().map(pred).collect();
        let (rows, cov) = join(&samples, &preds, JoinPolicy::Strict).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(cov, Coverage::default());
        let order: Vec<u32> = rows.iter().map(|r| r.sample.obs_start).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn strict_join_missing() {
        let samples: Vec<_> = (0..5).map(sample).collect();
        let preds: Vec<_> = (0..4).map(pred).collect();
        match join(&samples, &preds, JoinPolicy::Strict) {
            Err(Error::MissingPrediction(ids)) => assert_eq!(ids, vec!["p#4#action"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strict_join_orphan() {
        let samples: Vec<_> = (0..4).map(sample).collect();
        let preds: Vec<_> = (0..5).map(pred).collect();
        let err = join(&samples, &preds, JoinPolicy::Strict).unwrap_err();
        assert!(matches!(err, Error::OrphanPrediction(ref ids) if ids.len() == 1));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn inner_join_reports_coverage() {
        let samples: Vec<_> = (0..5).map(sample).collect();
        let preds: Vec<_> = (0..4).map(pred).collect();
        let (rows, cov) = join(&samples, &preds, JoinPolicy::Inner).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(cov, Coverage { missing: 1, orphan: 0 });
    }

    #[test]
    fn join_rejects_mixed_models() {
        let samples: Vec<_> = (0..2).map(sample).collect();
        let mut preds: Vec<_> = (0..2).map(pred).collect();
        preds[1].model = "other".into();
        assert!(matches!(
            join(&samples, &preds, JoinPolicy::Inner),
            Err(Error::MixedModels(_))
        ));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.1, 0.2, 0.7]), 2);
    }

    #[test]
    fn samples_roundtrip_through_jsonl() {
        let samples: Vec<_> = (0..3).map(sample).collect();
        let text = samples_to_string(&samples).unwrap();
        assert_eq!(parse_samples(&text).unwrap(), samples);
    }
}
