//! Scenario slicing and intention/action agreement.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::annotation::{RoadType, SignalState};
use crate::error::{Error, Result};
use crate::json;
use crate::metrics::core::{base_metrics, BaseMetrics};
use crate::predlog::EvalRow;
use crate::sampler::{ActionClass, IntentionClass, MotionState, ScenarioContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Scale,
    State,
    Speed,
    Signal,
    Road,
}

impl Factor {
    pub const ALL: [Factor; 5] = [
        Factor::Scale,
        Factor::State,
        Factor::Speed,
        Factor::Signal,
        Factor::Road,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Factor::Scale => "scale",
            Factor::State => "state",
            Factor::Speed => "speed",
            Factor::Signal => "signal",
            Factor::Road => "road",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBinning {
    /// Bounding-box height cut points in pixels.
    pub scale_bins: Vec<f64>,
    /// Ego-speed cut points in km/h; a leading 0 makes a stationary bin.
    pub speed_bins: Vec<f64>,
    pub factors: BTreeSet<Factor>,
    /// Bins with fewer samples are flagged low-confidence.
    pub min_samples: usize,
}

impl Default for ScenarioBinning {
    fn default() -> Self {
        ScenarioBinning {
            scale_bins: vec![60.0, 120.0],
            speed_bins: vec![0.0, 10.0, 20.0, 30.0],
            factors: Factor::ALL.into_iter().collect(),
            min_samples: 10,
        }
    }
}

impl ScenarioBinning {
    pub fn validate(&self) -> Result<()> {
        for (name, cuts) in [("scale_bins", &self.scale_bins), ("speed_bins", &self.speed_bins)] {
            if cuts.windows(2).any(|w| !(w[0] < w[1])) || cuts.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be strictly ascending")));
            }
        }
        if self.factors.is_empty() {
            return Err(Error::InvalidConfig("at least one scenario factor is required".into()));
        }
        Ok(())
    }

    /// Labels of every bin of `factor`, in order.
    pub fn bin_labels(&self, factor: Factor) -> Vec<String> {
        match factor {
            Factor::Scale => interval_labels(&self.scale_bins),
            Factor::Speed => interval_labels(&self.speed_bins),
            Factor::State => [MotionState::Walking, MotionState::Standing]
                .iter()
                .map(|s| s.as_str().to_string())
                .collect(),
            Factor::Signal => SignalState::ALL.iter().map(|s| s.as_str().to_string()).collect(),
            Factor::Road => RoadType::ALL.iter().map(|r| r.as_str().to_string()).collect(),
        }
    }

    /// Index into [`Self::bin_labels`] of the bin holding `ctx`.
    pub fn bin_of(&self, factor: Factor, ctx: &ScenarioContext) -> usize {
        match factor {
            Factor::Scale => interval_index(&self.scale_bins, ctx.mean_scale),
            Factor::Speed => interval_index(&self.speed_bins, ctx.mean_speed),
            Factor::State => match ctx.state {
                MotionState::Walking => 0,
                MotionState::Standing => 1,
            },
            Factor::Signal => ctx.signal as usize,
            Factor::Road => ctx.road_type as usize,
        }
    }
}

fn fmt_cut(c: f64) -> String {
    if c.fract() == 0.0 {
        format!("{}", c as i64)
    } else {
        format!("{c}")
    }
}

/// Right-closed intervals over the cut points: `<=c0` (or `=0` when the
/// first cut is zero), `(c0,c1]`, ..., `>c_last`.
fn interval_labels(cuts: &[f64]) -> Vec<String> {
    let mut out = Vec::with_capacity(cuts.len() + 1);
    for (i, &c) in cuts.iter().enumerate() {
        if i == 0 {
            out.push(if c == 0.0 { "=0".to_string() } else { format!("<={}", fmt_cut(c)) });
        } else {
            out.push(format!("({},{}]", fmt_cut(cuts[i - 1]), fmt_cut(c)));
        }
    }
    match cuts.last() {
        Some(&c) => out.push(format!(">{}", fmt_cut(c))),
        None => out.push("all".to_string()),
    }
    out
}

fn interval_index(cuts: &[f64], value: f64) -> usize {
    cuts.iter().position(|&c| value <= c).unwrap_or(cuts.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceBin {
    pub factor: Factor,
    pub bin: String,
    pub count: usize,
    pub low_confidence: bool,
    /// Absent for empty bins.
    pub metrics: Option<BaseMetrics>,
}

/// Partitions rows independently per enabled factor and scores each bin.
pub fn slice(rows: &[EvalRow], binning: &ScenarioBinning) -> Result<Vec<SliceBin>> {
    let mut out = Vec::new();
    for &factor in &binning.factors {
        let labels = binning.bin_labels(factor);
        let mut members: Vec<Vec<EvalRow>> = vec![Vec::new(); labels.len()];
        for row in rows {
            members[binning.bin_of(factor, &row.sample.context)].push(row.clone());
        }
        for (label, bin_rows) in labels.into_iter().zip(members) {
            let metrics = if bin_rows.is_empty() {
                None
            } else {
                Some(base_metrics(&bin_rows)?)
            };
            out.push(SliceBin {
                factor,
                bin: label,
                count: bin_rows.len(),
                low_confidence: bin_rows.len() < binning.min_samples,
                metrics,
            });
        }
    }
    Ok(out)
}

/// Two-factor cross product of bins. Experimental: sparse cells are common.
pub fn slice_pair(
    rows: &[EvalRow],
    binning: &ScenarioBinning,
    a: Factor,
    b: Factor,
) -> Result<Vec<SliceBin>> {
    let (la, lb) = (binning.bin_labels(a), binning.bin_labels(b));
    let mut cells: Vec<Vec<EvalRow>> = vec![Vec::new(); la.len() * lb.len()];
    for row in rows {
        let ctx = &row.sample.context;
        cells[binning.bin_of(a, ctx) * lb.len() + binning.bin_of(b, ctx)].push(row.clone());
    }
    let mut out = Vec::new();
    for (i, cell) in cells.into_iter().enumerate() {
        out.push(SliceBin {
            factor: a,
            bin: format!("{}={} & {}={}", a.as_str(), la[i / lb.len()], b.as_str(), lb[i % lb.len()]),
            count: cell.len(),
            low_confidence: cell.len() < binning.min_samples,
            metrics: if cell.is_empty() { None } else { Some(base_metrics(&cell)?) },
        });
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(json::format_float).unwrap_or_default()
}

/// CSV table, one row per factor bin.
pub fn slices_to_csv(bins: &[SliceBin]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = ["factor", "bin", "count", "low_confidence", "acc", "bacc", "prec", "recall", "f1", "map", "auc"];
    let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for b in bins {
        let m = b.metrics.as_ref();
        let f = |x: Option<f64>| opt(x);
        w.write_record([
            b.factor.as_str().to_string(),
            b.bin.clone(),
            b.count.to_string(),
            b.low_confidence.to_string(),
            f(m.map(|m| m.acc)),
            f(m.map(|m| m.bacc)),
            f(m.map(|m| m.prec)),
            f(m.map(|m| m.recall)),
            f(m.map(|m| m.f1)),
            f(m.and_then(|m| m.map)),
            f(m.and_then(|m| m.auc)),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    BothCorrect,
    IntentionOnly,
    ActionOnly,
    BothIncorrect,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [
        Outcome::BothCorrect,
        Outcome::IntentionOnly,
        Outcome::ActionOnly,
        Outcome::BothIncorrect,
    ];

    pub fn from_correctness(intention: bool, action: bool) -> Self {
        match (intention, action) {
            (true, true) => Outcome::BothCorrect,
            (true, false) => Outcome::IntentionOnly,
            (false, true) => Outcome::ActionOnly,
            (false, false) => Outcome::BothIncorrect,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementCell {
    pub intention_class: IntentionClass,
    pub action_class: ActionClass,
    pub outcome: Outcome,
    pub count: usize,
    pub fraction: f64,
}

/// Joint correctness of intention and action predictions on the same
/// windows, matched by pedestrian and window start.
///
/// Returns every (intention class, action class, outcome) cell, including
/// empty ones, with fractions of the matched total.
pub fn agreement(intention_rows: &[EvalRow], action_rows: &[EvalRow]) -> Result<Vec<AgreementCell>> {
    let by_window: HashMap<(&str, u32), &EvalRow> = action_rows
        .iter()
        .map(|r| (r.sample.window_key(), r))
        .collect();
    let mut counts = [[[0usize; 4]; 2]; 3];
    let mut total = 0usize;
    for ir in intention_rows {
        let Some(ar) = by_window.get(&ir.sample.window_key()) else {
            continue;
        };
        let outcome = Outcome::from_correctness(ir.is_correct(), ar.is_correct());
        counts[ir.gt()][ar.gt()][outcome as usize] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::JoinMismatch);
    }
    let mut cells = Vec::with_capacity(24);
    for ic in IntentionClass::ALL {
        for ac in ActionClass::ALL {
            for outcome in Outcome::ALL {
                let count = counts[ic as usize][ac as usize][outcome as usize];
                cells.push(AgreementCell {
                    intention_class: ic,
                    action_class: ac,
                    outcome,
                    count,
                    fraction: count as f64 / total as f64,
                });
            }
        }
    }
    Ok(cells)
}

/// Fraction of matched samples per outcome, summed over class pairs.
pub fn outcome_fractions(cells: &[AgreementCell]) -> [f64; 4] {
    let total: usize = cells.iter().map(|c| c.count).sum();
    let mut out = [0.0; 4];
    for o in Outcome::ALL {
        let n: usize = cells.iter().filter(|c| c.outcome == o).map(|c| c.count).sum();
        out[o as usize] = if total > 0 { n as f64 / total as f64 } else { 0.0 };
    }
    out
}

pub fn agreement_to_csv(cells: &[AgreementCell]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
    w.write_record(["intention_class", "action_class", "outcome", "count", "fraction"])
        .map_err(csv_err)?;
    for c in cells {
        let outcome = serde_json::to_value(c.outcome)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        w.write_record([
            c.intention_class.to_string(),
            c.action_class.to_string(),
            outcome,
            c.count.to_string(),
            json::format_float(c.fraction),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::weighted::tests::action_row;
    use crate::predlog::PredictionRecord;
    use crate::sampler::{Label, Task, TaskSample};

    fn with_speed(i: u32, speed: f64) -> EvalRow {
        let mut r = action_row(i, 60, 1, 0.8);
        r.sample.context.mean_speed = speed;
        r
    }

    #[test]
    fn speed_binning() {
        let rows = vec![with_speed(0, 0.0), with_speed(1, 5.0), with_speed(2, 25.0)];
        let binning = ScenarioBinning {
            factors: [Factor::Speed].into_iter().collect(),
            ..ScenarioBinning::default()
        };
        let bins = slice(&rows, &binning).unwrap();
        let counts: Vec<(&str, usize)> = bins.iter().map(|b| (b.bin.as_str(), b.count)).collect();
        assert_eq!(
            counts,
            vec![("=0", 1), ("(0,10]", 1), ("(10,20]", 0), ("(20,30]", 1), (">30", 0)]
        );
        assert!(bins.iter().all(|b| b.low_confidence));
        assert!(bins[2].metrics.is_none());
    }

    #[test]
    fn empty_standing_bin_flagged() {
        let rows: Vec<EvalRow> = (0..12)
            .map(|i| {
                let mut r = action_row(i, 60, 1, 0.8);
                r.sample.context.state = MotionState::Walking;
                r
            })
            .collect();
        let bins = slice(&rows, &ScenarioBinning::default()).unwrap();
        let standing = bins.iter().find(|b| b.bin == "standing").unwrap();
        assert_eq!(standing.count, 0);
        assert!(standing.low_confidence);
        let walking = bins.iter().find(|b| b.bin == "walking").unwrap();
        assert!(!walking.low_confidence);
    }

    #[test]
    fn every_factor_partitions_rows() {
        let rows: Vec<EvalRow> = (0..30)
            .map(|i| {
                let mut r = action_row(i, 60, (i % 2) as usize, 0.3 + 0.02 * i as f64);
                r.sample.context.mean_scale = 20.0 + 7.0 * i as f64;
                r.sample.context.mean_speed = (i % 7) as f64 * 6.0;
                r
            })
            .collect();
        let bins = slice(&rows, &ScenarioBinning::default()).unwrap();
        for f in Factor::ALL {
            let total: usize = bins.iter().filter(|b| b.factor == f).map(|b| b.count).sum();
            assert_eq!(total, rows.len(), "{f:?}");
        }
    }

    #[test]
    fn interval_labels_without_zero() {
        assert_eq!(interval_labels(&[60.0, 120.0]), vec!["<=60", "(60,120]", ">120"]);
        assert_eq!(interval_index(&[60.0, 120.0], 60.0), 0);
        assert_eq!(interval_index(&[60.0, 120.0], 60.5), 1);
        assert_eq!(interval_index(&[60.0, 120.0], 500.0), 2);
    }

    #[test]
    fn binning_validation() {
        let mut b = ScenarioBinning::default();
        b.scale_bins = vec![120.0, 60.0];
        assert!(b.validate().is_err());
        let mut b = ScenarioBinning::default();
        b.factors.clear();
        assert!(b.validate().is_err());
    }

    #[test]
    fn pair_slices_partition() {
        let rows: Vec<EvalRow> = (0..10).map(|i| with_speed(i, i as f64 * 4.0)).collect();
        let cells = slice_pair(&rows, &ScenarioBinning::default(), Factor::Speed, Factor::State).unwrap();
        assert_eq!(cells.len(), 10);
        assert_eq!(cells.iter().map(|c| c.count).sum::<usize>(), 10);
    }

    fn intention_row(ped: &str, start: u32, gt: IntentionClass, pred: usize) -> EvalRow {
        let mut conf = vec![0.1; 3];
        conf[pred] = 0.8;
        let base = action_row(0, 60, 0, 0.5);
        EvalRow::new(
            TaskSample {
                sample_id: format!("{ped}#{start}#intention"),
                ped_id: ped.into(),
                task: Task::Intention,
                obs_start: start,
                obs_end: start + 14,
                tte: None,
                label: Label::Intention(gt),
                context: base.sample.context.clone(),
            },
            PredictionRecord {
                sample_id: format!("{ped}#{start}#intention"),
                model: "m".into(),
                task: Task::Intention,
                confidences: conf,
            },
        )
    }

    fn action_on(ped: &str, start: u32, gt: usize, correct: bool) -> EvalRow {
        let conf1 = if (gt == 1) == correct { 0.9 } else { 0.1 };
        let mut r = action_row(0, 60, gt, conf1);
        r.sample.ped_id = ped.into();
        r.sample.obs_start = start;
        r.sample.sample_id = format!("{ped}#{start}#action");
        r.pred.sample_id = r.sample.sample_id.clone();
        r
    }

    #[test]
    fn all_correct_agreement() {
        let ir: Vec<EvalRow> = (0..4)
            .map(|i| intention_row("p", i * 10, IntentionClass::Crossing, 2))
            .collect();
        let ar: Vec<EvalRow> = (0..4).map(|i| action_on("p", i * 10, 1, true)).collect();
        let cells = agreement(&ir, &ar).unwrap();
        assert_eq!(cells.len(), 24);
        let populated: Vec<&AgreementCell> = cells.iter().filter(|c| c.count > 0).collect();
        assert_eq!(populated.len(), 1);
        assert_eq!(populated[0].outcome, Outcome::BothCorrect);
        assert_eq!(populated[0].fraction, 1.0);
        assert_eq!(outcome_fractions(&cells), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn disjoint_windows_fail() {
        let ir = vec![intention_row("p", 0, IntentionClass::Crossing, 2)];
        let ar = vec![action_on("q", 0, 1, true)];
        assert!(matches!(agreement(&ir, &ar), Err(Error::JoinMismatch)));
    }

    #[test]
    fn agreement_csv_has_all_cells() {
        let ir = vec![intention_row("p", 0, IntentionClass::Unsure, 0)];
        let ar = vec![action_on("p", 0, 0, true)];
        let csv = agreement_to_csv(&agreement(&ir, &ar).unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 25);
        assert!(csv.contains("UI,NC,action_only,1,1.000000"));
    }
}
