//! Instance-level metrics.
//!
//! Samples of one pedestrian are ordered by window start and judged together.
//! The soft prediction averages confidences; the hard prediction accepts the
//! per-sample label only if every sample agrees and otherwise counts the
//! instance as wrong. Confidence delta measures how much one class's
//! confidence jumps between consecutive windows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::core::{ConfusionAccumulator, LabelMetrics};
use crate::predlog::{argmax, EvalRow};

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSeries {
    pub ped_id: String,
    pub gt_label: usize,
    /// `(obs_start, confidences)` ordered by window start.
    pub samples: Vec<(u32, Vec<f64>)>,
}

impl InstanceSeries {
    pub fn n_classes(&self) -> usize {
        self.samples.first().map_or(0, |(_, c)| c.len())
    }

    fn class_track(&self, cls: usize) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(move |(_, c)| c[cls])
    }
}

/// Which wrong class a hard prediction falls back to when samples disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrongLabelRule {
    /// `(gt + 1) mod K`; for binary tasks this is the opposite class.
    #[default]
    NextClass,
    /// `(gt + K - 1) mod K`.
    PreviousClass,
}

fn sorted_groups(rows: &[EvalRow]) -> Result<BTreeMap<&str, Vec<&EvalRow>>> {
    let mut groups: BTreeMap<&str, Vec<&EvalRow>> = BTreeMap::new();
    for row in rows {
        groups.entry(row.sample.ped_id.as_str()).or_default().push(row);
    }
    for (ped_id, members) in groups.iter_mut() {
        members.sort_by_key(|r| r.sample.obs_start);
        if let Some(pair) = members
            .windows(2)
            .find(|p| p[0].sample.obs_start == p[1].sample.obs_start)
        {
            return Err(Error::DuplicateSample {
                ped_id: ped_id.to_string(),
                obs_start: pair[0].sample.obs_start,
            });
        }
    }
    Ok(groups)
}

fn series(ped_id: String, members: &[&EvalRow]) -> InstanceSeries {
    InstanceSeries {
        ped_id,
        gt_label: members[0].gt(),
        samples: members
            .iter()
            .map(|r| (r.sample.obs_start, r.pred.confidences.clone()))
            .collect(),
    }
}

/// Groups rows by pedestrian, ordered by `ped_id`, samples by window start.
pub fn group_instances(rows: &[EvalRow]) -> Result<Vec<InstanceSeries>> {
    sorted_groups(rows)?
        .into_iter()
        .map(|(ped_id, members)| {
            let gt = members[0].gt();
            if members.iter().any(|r| r.gt() != gt) {
                return Err(Error::InconsistentGroundTruth(ped_id.to_string()));
            }
            Ok(series(ped_id.to_string(), &members))
        })
        .collect()
}

/// Like [`group_instances`], but splits each pedestrian into maximal runs of
/// consecutive samples sharing a ground truth, for tasks whose label changes
/// along the track. A pedestrian with several runs yields series named
/// `ped_id@obs_start` after the first window of each run.
pub fn group_label_runs(rows: &[EvalRow]) -> Result<Vec<InstanceSeries>> {
    let mut out = Vec::new();
    for (ped_id, members) in sorted_groups(rows)? {
        let runs: Vec<&[&EvalRow]> = members.chunk_by(|a, b| a.gt() == b.gt()).collect();
        if runs.len() == 1 {
            out.push(series(ped_id.to_string(), &members));
            continue;
        }
        for run in runs {
            out.push(series(format!("{ped_id}@{}", run[0].sample.obs_start), run));
        }
    }
    Ok(out)
}

/// Argmax of the mean confidence vector, with the mean itself.
pub fn soft_prediction(series: &InstanceSeries) -> (usize, Vec<f64>) {
    let k = series.n_classes();
    let n = series.samples.len() as f64;
    let mut mean = vec![0.0; k];
    for (_, conf) in &series.samples {
        for (m, c) in mean.iter_mut().zip(conf) {
            *m += c;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    (argmax(&mean), mean)
}

pub fn hard_prediction(series: &InstanceSeries, rule: WrongLabelRule) -> usize {
    let mut labels = series.samples.iter().map(|(_, c)| argmax(c));
    let first = labels.next().unwrap_or(series.gt_label);
    if labels.all(|l| l == first) {
        return first;
    }
    let k = series.n_classes().max(1);
    match rule {
        WrongLabelRule::NextClass => (series.gt_label + 1) % k,
        WrongLabelRule::PreviousClass => (series.gt_label + k - 1) % k,
    }
}

/// `(max, mean)` absolute change of class `cls` confidence between
/// consecutive samples; `(0, 0)` for single-sample instances.
pub fn confidence_delta(series: &InstanceSeries, cls: usize) -> (f64, f64) {
    let values: Vec<f64> = series.class_track(cls).collect();
    if values.len() < 2 {
        return (0.0, 0.0);
    }
    let deltas: Vec<f64> = values.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let max = deltas.iter().copied().fold(0.0, f64::max);
    let avg = deltas.iter().sum::<f64>() / deltas.len() as f64;
    (max, avg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfDelta {
    pub max: f64,
    pub avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub n_instances: usize,
    pub soft: LabelMetrics,
    pub hard: LabelMetrics,
    /// Averaged over instances, on each instance's ground-truth class.
    pub conf_delta: ConfDelta,
    /// Same averages for every class, in class order.
    pub conf_delta_per_class: Vec<ConfDelta>,
}

pub fn instance_report(series: &[InstanceSeries], rule: WrongLabelRule) -> Result<InstanceReport> {
    let k = series
        .first()
        .ok_or(Error::EmptyInput("no instances"))?
        .n_classes();
    let soft = ConfusionAccumulator::from_pairs(
        k,
        series.iter().map(|s| (s.gt_label, soft_prediction(s).0, 1.0)),
    );
    let hard = ConfusionAccumulator::from_pairs(
        k,
        series.iter().map(|s| (s.gt_label, hard_prediction(s, rule), 1.0)),
    );

    let n = series.len() as f64;
    let mean_delta = |pick: &dyn Fn(&InstanceSeries) -> usize| {
        let (mut max, mut avg) = (0.0, 0.0);
        for s in series {
            let (m, a) = confidence_delta(s, pick(s));
            max += m;
            avg += a;
        }
        ConfDelta {
            max: max / n,
            avg: avg / n,
        }
    };
    let conf_delta = mean_delta(&|s| s.gt_label);
    let conf_delta_per_class = (0..k).map(|c| mean_delta(&move |_| c)).collect();

    Ok(InstanceReport {
        n_instances: series.len(),
        soft: LabelMetrics::from_confusion(&soft),
        hard: LabelMetrics::from_confusion(&hard),
        conf_delta,
        conf_delta_per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::weighted::tests::action_row;

    fn series(gt: usize, class1: &[f64]) -> InstanceSeries {
        InstanceSeries {
            ped_id: "p".into(),
            gt_label: gt,
            samples: class1
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as u32 * 10, vec![1.0 - c, c]))
                .collect(),
        }
    }

    fn row(ped: &str, start: u32, gt: usize, conf1: f64) -> EvalRow {
        let mut r = action_row(0, 60, gt, conf1);
        r.sample.ped_id = ped.into();
        r.sample.obs_start = start;
        r.sample.sample_id = format!("{ped}#{start}#action");
        r.pred.sample_id = r.sample.sample_id.clone();
        r
    }

    #[test]
    fn grouping() {
        let rows = vec![row("b", 10, 1, 0.7), row("a", 0, 0, 0.2), row("b", 0, 1, 0.6)];
        let g = group_instances(&rows).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].ped_id.as_str(), g[0].samples.len()), ("a", 1));
        assert_eq!((g[1].ped_id.as_str(), g[1].samples.len()), ("b", 2));
        assert_eq!(g[1].samples[0].0, 0);

        let mut shuffled = rows.clone();
        shuffled.reverse();
        assert_eq!(group_instances(&shuffled).unwrap(), g);
    }

    #[test]
    fn inconsistent_ground_truth() {
        let rows = vec![row("a", 0, 0, 0.2), row("a", 10, 1, 0.2)];
        assert!(matches!(
            group_instances(&rows),
            Err(Error::InconsistentGroundTruth(id)) if id == "a"
        ));
    }

    #[test]
    fn label_runs_split_changing_ground_truth() {
        let rows = vec![
            row("a", 20, 0, 0.2),
            row("a", 0, 1, 0.7),
            row("a", 10, 1, 0.6),
            row("b", 0, 1, 0.6),
            row("a", 30, 1, 0.9),
        ];
        let g = group_label_runs(&rows).unwrap();
        let ids: Vec<&str> = g.iter().map(|s| s.ped_id.as_str()).collect();
        assert_eq!(ids, ["a@0", "a@20", "a@30", "b"]);
        assert_eq!(g[0].samples.len(), 2);
        assert_eq!((g[1].gt_label, g[2].gt_label), (0, 1));
        let consistent = vec![row("a", 0, 0, 0.2), row("a", 10, 0, 0.3)];
        assert_eq!(group_label_runs(&consistent).unwrap(), group_instances(&consistent).unwrap());
    }

    #[test]
    fn duplicate_window() {
        let rows = vec![row("a", 0, 0, 0.2), row("a", 0, 0, 0.3)];
        assert!(matches!(group_instances(&rows), Err(Error::DuplicateSample { .. })));
    }

    #[test]
    fn soft_examples() {
        let (label, mean) = soft_prediction(&series(1, &[0.8]));
        assert_eq!(label, 1);
        assert!((mean[0] - 0.2).abs() < 1e-15 && mean[1] == 0.8);

        let (label, mean) = soft_prediction(&series(1, &[0.9, 0.4, 0.8]));
        assert!((mean[1] - 0.7).abs() < 1e-12);
        assert_eq!(label, 1);

        assert_eq!(soft_prediction(&series(1, &[0.5, 0.5])).0, 0);
    }

    #[test]
    fn hard_examples() {
        let rule = WrongLabelRule::NextClass;
        assert_eq!(hard_prediction(&series(1, &[0.9, 0.8, 0.7]), rule), 1);
        assert_eq!(hard_prediction(&series(1, &[0.9, 0.2, 0.7]), rule), 0);
        assert_eq!(hard_prediction(&series(1, &[0.1, 0.2]), rule), 0);
    }

    #[test]
    fn hard_wrong_label_multiclass() {
        let s = InstanceSeries {
            ped_id: "p".into(),
            gt_label: 2,
            samples: vec![(0, vec![0.1, 0.2, 0.7]), (10, vec![0.6, 0.2, 0.2])],
        };
        assert_eq!(hard_prediction(&s, WrongLabelRule::NextClass), 0);
        assert_eq!(hard_prediction(&s, WrongLabelRule::PreviousClass), 1);
    }

    #[test]
    fn delta_examples() {
        let (m, a) = confidence_delta(&series(1, &[0.9, 0.1, 0.9]), 1);
        assert!((m - 0.8).abs() < 1e-12 && (a - 0.8).abs() < 1e-12);
        let (m, a) = confidence_delta(&series(1, &[0.6, 0.7, 0.5]), 1);
        assert!((m - 0.2).abs() < 1e-12 && (a - 0.15).abs() < 1e-12);
        assert_eq!(confidence_delta(&series(1, &[0.4, 0.4, 0.4]), 1), (0.0, 0.0));
        assert_eq!(confidence_delta(&series(1, &[0.4]), 1), (0.0, 0.0));
    }

    #[test]
    fn one_inconsistent_instance_of_ten() {
        let mut all: Vec<InstanceSeries> = (0..9)
            .map(|i| InstanceSeries {
                ped_id: format!("p{i}"),
                ..series(i % 2, if i % 2 == 1 { &[0.8, 0.9] } else { &[0.2, 0.1] })
            })
            .collect();
        // Correct on average, but one window flips.
        all.push(InstanceSeries {
            ped_id: "p9".into(),
            ..series(1, &[0.9, 0.4, 0.8])
        });
        let r = instance_report(&all, WrongLabelRule::NextClass).unwrap();
        assert_eq!(r.soft.acc, 1.0);
        assert!((r.hard.acc - 0.9).abs() < 1e-12);
    }

    #[test]
    fn constant_confidences_have_no_delta() {
        let all = vec![series(1, &[0.7, 0.7, 0.7]), series(0, &[0.3, 0.3])];
        let r = instance_report(&all, WrongLabelRule::NextClass).unwrap();
        assert_eq!((r.conf_delta.max, r.conf_delta.avg), (0.0, 0.0));
    }

    #[test]
    fn empty_input() {
        assert!(matches!(
            instance_report(&[], WrongLabelRule::NextClass),
            Err(Error::EmptyInput(_))
        ));
    }
}
