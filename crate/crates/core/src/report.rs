//! End-to-end evaluation and the report bundle.
//!
//! [`evaluate`] samples a dataset, joins one model's predictions and runs every
//! metric suite; the resulting [`MetricReport`] serializes to canonical JSON,
//! CSV tables and a markdown summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::annotation::Dataset;
use crate::config::Settings;
use crate::error::{Error, Result};
use crate::json;
use crate::metrics::core::{
    accumulate, base_metrics, f1, per_class_ap, per_class_auc, precision, recall, BaseMetrics,
    ConfusionAccumulator, LabelMetrics,
};
use crate::metrics::instance::{group_instances, group_label_runs, instance_report, ConfDelta};
use crate::metrics::weighted::{weighted_report, WeightScheme};
use crate::pipeline;
use crate::predlog::{join, Coverage, EvalRow, PredictionRecord};
use crate::risk_grid;
use crate::sampler::{Label, Task, TaskSample};
use crate::scenario::{self, agreement, AgreementCell, Factor, Outcome, SliceBin};

pub type ScalarMap = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassEntry {
    pub class: String,
    pub index: usize,
    pub support: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    pub prec: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldedSection {
    pub n_classes: usize,
    pub base: ScalarMap,
    pub per_class: Vec<PerClassEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWeight {
    pub sample_id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementSection {
    pub n_matched: usize,
    pub outcomes: ScalarMap,
    pub cells: Vec<AgreementCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub task: Task,
    pub n_samples: usize,
    pub n_instances: usize,
    pub coverage: Coverage,
    pub base: ScalarMap,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_scheme: Option<WeightScheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted: Option<ScalarMap>,
    pub soft: ScalarMap,
    pub hard: ScalarMap,
    pub conf_delta: ConfDelta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conf_delta_per_class: Option<Vec<ConfDelta>>,
    #[serde(default)]
    pub per_class: Vec<PerClassEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folded: Option<FoldedSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Vec<SliceBin>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<AgreementSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<SampleWeight>>,
    /// Metric cells that fell back to the 0/0 convention or were skipped.
    pub flags: Vec<String>,
    pub config_echo: Settings,
}

/// Optional sections of an evaluation.
#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Restrict the prediction log to this model.
    pub model: Option<String>,
    pub scenario: bool,
    /// Experimental two-factor slice.
    pub scenario_pair: Option<(Factor, Factor)>,
    /// Action predictions on the intention windows (intention task only).
    pub agreement_predictions: Option<Vec<PredictionRecord>>,
}

pub fn base_map(m: &BaseMetrics) -> ScalarMap {
    let mut out: ScalarMap = [
        ("acc", m.acc),
        ("bacc", m.bacc),
        ("prec", m.prec),
        ("recall", m.recall),
        ("f1", m.f1),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    if let Some(v) = m.map {
        out.insert("map".into(), v);
    }
    if let Some(v) = m.auc {
        out.insert("auc".into(), v);
    }
    out
}

pub fn label_map(m: &LabelMetrics) -> ScalarMap {
    [
        ("acc", m.acc),
        ("bacc", m.bacc),
        ("prec", m.prec),
        ("recall", m.recall),
        ("f1", m.f1),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn per_class_entries(
    rows: &[EvalRow],
    names: &[String],
    flags: &mut Vec<String>,
    tag: &str,
) -> Result<Vec<PerClassEntry>> {
    let cm: ConfusionAccumulator = accumulate(rows)?;
    let aps = per_class_ap(rows);
    let aucs = per_class_auc(rows);
    let mut out = Vec::with_capacity(names.len());
    for (c, name) in names.iter().enumerate() {
        if cm.col_sum(c) == 0.0 {
            flags.push(format!("{tag}prec[{name}]: no predictions"));
        }
        if cm.row_sum(c) == 0.0 {
            flags.push(format!("{tag}recall[{name}]: no ground truth"));
        }
        if aps[c].is_none() {
            flags.push(format!("{tag}ap[{name}]: no positives, skipped"));
        }
        if aucs[c].is_none() {
            flags.push(format!("{tag}auc[{name}]: degenerate class, skipped"));
        }
        out.push(PerClassEntry {
            class: name.clone(),
            index: c,
            support: cm.row_sum(c),
            ap: aps[c],
            auc: aucs[c],
            prec: precision(&cm, c),
            recall: recall(&cm, c),
            f1: f1(&cm, c),
        });
    }
    Ok(out)
}

/// Risk rows re-expressed over folded risk classes; confidences of mirrored
/// regions are summed.
pub fn fold_risk_rows(rows: &[EvalRow], grid: &risk_grid::RiskGridConfig) -> Vec<EvalRow> {
    let m = grid.center() as usize;
    rows.iter()
        .map(|r| {
            let mut folded = vec![0.0; m];
            for (i, c) in r.pred.confidences.iter().enumerate() {
                folded[risk_grid::fold_to_risk_class(i as u32 + 1, grid) as usize] += c;
            }
            let mut row = r.clone();
            if let Label::Risk(region) = r.sample.label {
                row.sample.label = Label::Risk(risk_grid::fold_to_risk_class(region, grid) + 1);
            }
            row.pred.confidences = folded;
            row
        })
        .collect()
}

/// Samples `ds` for `task` and evaluates `predictions` against them.
pub fn evaluate(
    ds: &Dataset,
    predictions: &[PredictionRecord],
    task: Task,
    settings: &Settings,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    settings.validate()?;
    let sampler_cfg = settings.sampler();
    let grid = settings.grid();
    let samples = pipeline::samples_for_task(ds, task, &sampler_cfg, &grid);
    evaluate_samples(ds, &samples, predictions, task, settings, opts)
}

fn select_predictions(predictions: &[PredictionRecord], task: Task, model: Option<&str>) -> Vec<PredictionRecord> {
    let selected: Vec<PredictionRecord> = predictions
        .iter()
        .filter(|p| p.task == task && model.is_none_or(|m| p.model == m))
        .cloned()
        .collect();
    if selected.len() < predictions.len() {
        log::info!(
            "using {} of {} prediction records (task {task}{})",
            selected.len(),
            predictions.len(),
            model.map(|m| format!(", model {m}")).unwrap_or_default()
        );
    }
    selected
}

/// Evaluation on an explicit sample list.
pub fn evaluate_samples(
    ds: &Dataset,
    samples: &[TaskSample],
    predictions: &[PredictionRecord],
    task: Task,
    settings: &Settings,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    settings.validate()?;
    let grid = settings.grid();
    let preds = select_predictions(predictions, task, opts.model.as_deref());
    let (rows, coverage) = join(samples, &preds, settings.join)?;
    if rows.is_empty() {
        return Err(Error::EmptyInput("no evaluation rows after the join"));
    }
    let model = rows[0].pred.model.clone();
    let names = task.class_names(settings.n_regions);
    let mut flags = Vec::new();

    let base = base_metrics(&rows)?;
    let per_class = per_class_entries(&rows, &names, &mut flags, "")?;

    let mut weights = None;
    let (weight_scheme, weighted) = match WeightScheme::for_task(task) {
        Some(scheme) => {
            let mut weighted_rows = rows.clone();
            let section = weighted_report(&mut weighted_rows, scheme, &settings.tte_weights(), &grid)?;
            if settings.export_weights {
                weights = Some(
                    weighted_rows
                        .iter()
                        .map(|r| SampleWeight {
                            sample_id: r.sample.sample_id.clone(),
                            weight: r.weight,
                        })
                        .collect(),
                );
            }
            (Some(scheme), Some(base_map(&section.weighted)))
        }
        None => (None, None),
    };

    let series = if task == Task::Risk {
        group_label_runs(&rows)?
    } else {
        group_instances(&rows)?
    };
    let inst = instance_report(&series, settings.wrong_label)?;

    let folded = if task == Task::Risk {
        let folded_rows = fold_risk_rows(&rows, &grid);
        let folded_names: Vec<String> = (0..grid.center()).map(|d| format!("D{d}")).collect();
        Some(FoldedSection {
            n_classes: folded_names.len(),
            base: base_map(&base_metrics(&folded_rows)?),
            per_class: per_class_entries(&folded_rows, &folded_names, &mut flags, "folded.")?,
        })
    } else {
        None
    };

    let scenario = if opts.scenario || opts.scenario_pair.is_some() {
        let binning = settings.binning();
        let mut bins = if opts.scenario {
            scenario::slice(&rows, &binning)?
        } else {
            Vec::new()
        };
        if let Some((a, b)) = opts.scenario_pair {
            bins.extend(scenario::slice_pair(&rows, &binning, a, b)?);
        }
        Some(bins)
    } else {
        None
    };

    let agreement = match &opts.agreement_predictions {
        Some(action_preds) if task == Task::Intention => {
            let twins = pipeline::action_twins(ds, &settings.sampler());
            let action_preds = select_predictions(action_preds, Task::Action, opts.model.as_deref());
            let (action_rows, _) = join(&twins, &action_preds, crate::predlog::JoinPolicy::Inner)?;
            Some(agreement_section(&rows, &action_rows)?)
        }
        Some(_) => {
            return Err(Error::InvalidConfig(
                "agreement analysis runs on the intention task".into(),
            ))
        }
        None => None,
    };

    Ok(MetricReport {
        model,
        task,
        n_samples: rows.len(),
        n_instances: series.len(),
        coverage,
        base: base_map(&base),
        weight_scheme,
        weighted,
        soft: label_map(&inst.soft),
        hard: label_map(&inst.hard),
        conf_delta: inst.conf_delta,
        conf_delta_per_class: settings.per_class_delta.then_some(inst.conf_delta_per_class),
        per_class,
        folded,
        scenario,
        agreement,
        weights,
        flags,
        config_echo: settings.resolved(),
    })
}

pub fn agreement_section(intention_rows: &[EvalRow], action_rows: &[EvalRow]) -> Result<AgreementSection> {
    let cells = agreement(intention_rows, action_rows)?;
    let fractions = scenario::outcome_fractions(&cells);
    let outcomes = Outcome::ALL
        .iter()
        .map(|o| {
            let key = serde_json::to_value(o)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            (key, fractions[*o as usize])
        })
        .collect();
    Ok(AgreementSection {
        n_matched: cells.iter().map(|c| c.count).sum(),
        outcomes,
        cells,
    })
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        json::to_canonical_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedFile {
            path: "<report>".into(),
            message: e.to_string(),
        })
    }

    /// Per-class table as CSV.
    pub fn per_class_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
        w.write_record(["class", "index", "support", "ap", "auc", "prec", "recall", "f1"])
            .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(json::format_float).unwrap_or_default();
        for e in &self.per_class {
            w.write_record([
                e.class.clone(),
                e.index.to_string(),
                json::format_float(e.support),
                opt(e.ap),
                opt(e.auc),
                json::format_float(e.prec),
                json::format_float(e.recall),
                json::format_float(e.f1),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Human-readable summary.
    pub fn to_markdown(&self) -> String {
        let get = |m: &ScalarMap, k: &str| m.get(k).map(|v| format!("{:.3}", v)).unwrap_or_else(|| "-".into());
        let mut s = String::new();
        let _ = writeln!(s, "# {} / {}\n", self.model, self.task);
        let _ = writeln!(
            s,
            "{} samples, {} instances (missing {}, orphan {})\n",
            self.n_samples, self.n_instances, self.coverage.missing, self.coverage.orphan
        );
        let _ = writeln!(s, "| suite | mAP | AUC | Acc | bAcc | Prec | Recall | F1 |");
        let _ = writeln!(s, "|---|---|---|---|---|---|---|---|");
        let mut suites = vec![("base", &self.base)];
        if let Some(w) = &self.weighted {
            suites.push(("weighted", w));
        }
        suites.push(("soft", &self.soft));
        suites.push(("hard", &self.hard));
        for (name, m) in suites {
            let _ = writeln!(
                s,
                "| {name} | {} | {} | {} | {} | {} | {} | {} |",
                get(m, "map"),
                get(m, "auc"),
                get(m, "acc"),
                get(m, "bacc"),
                get(m, "prec"),
                get(m, "recall"),
                get(m, "f1")
            );
        }
        let _ = writeln!(
            s,
            "\nconf_delta max/avg: {:.3}/{:.3}\n",
            self.conf_delta.max, self.conf_delta.avg
        );
        let _ = writeln!(s, "| class | support | AP | AUC | Prec | Recall | F1 |");
        let _ = writeln!(s, "|---|---|---|---|---|---|---|");
        for e in &self.per_class {
            let o = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {:.3} | {:.3} | {:.3} |",
                e.class,
                e.support,
                o(e.ap),
                o(e.auc),
                e.prec,
                e.recall,
                e.f1
            );
        }
        if let Some(bins) = &self.scenario {
            let _ = writeln!(s, "\nScenario bin edges are configurable defaults, not published thresholds.\n");
            let _ = writeln!(s, "| factor | bin | n | mAP | Acc | note |");
            let _ = writeln!(s, "|---|---|---|---|---|---|");
            for b in bins {
                let m = b.metrics.as_ref();
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} |",
                    b.factor.as_str(),
                    b.bin,
                    b.count,
                    m.and_then(|m| m.map).map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
                    m.map(|m| format!("{:.3}", m.acc)).unwrap_or_else(|| "-".into()),
                    if b.low_confidence { "low n" } else { "" }
                );
            }
        }
        if let Some(a) = &self.agreement {
            let _ = writeln!(s, "\nAgreement over {} windows:", a.n_matched);
            for (k, v) in &a.outcomes {
                let _ = writeln!(s, "- {k}: {:.3}", v);
            }
        }
        if !self.flags.is_empty() {
            let _ = writeln!(s, "\nFlags:");
            for fl in &self.flags {
                let _ = writeln!(s, "- {fl}");
            }
        }
        s
    }
}
