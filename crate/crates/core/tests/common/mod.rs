//! Row builders and brute-force metric oracles shared by integration tests.
//! The oracles are deliberately naive and share no code with the library.

#![allow(dead_code)]

use pedeval::annotation::{RoadType, SignalState};
use pedeval::predlog::{EvalRow, PredictionRecord};
use pedeval::sampler::{
    sample_id, ActionClass, IntentionClass, Label, MotionState, ScenarioContext, Task, TaskSample,
};
use rand::Rng;

pub fn label(task: Task, class: usize) -> Label {
    match task {
        Task::Intention => Label::Intention(IntentionClass::ALL[class]),
        Task::Action => Label::Action(ActionClass::ALL[class]),
        Task::Risk => Label::Risk(class as u32 + 1),
    }
}

pub fn task_for_arity(k: usize) -> Task {
    match k {
        2 => Task::Action,
        3 => Task::Intention,
        _ => Task::Risk,
    }
}

pub fn context() -> ScenarioContext {
    ScenarioContext {
        mean_scale: 80.0,
        state: MotionState::Walking,
        mean_speed: 12.0,
        signal: SignalState::None,
        road_type: RoadType::TwoWay,
    }
}

pub fn row(task: Task, ped: &str, start: u32, gt: usize, conf: Vec<f64>, weight: f64) -> EvalRow {
    let id = sample_id(ped, start, task);
    let mut r = EvalRow::new(
        TaskSample {
            sample_id: id.clone(),
            ped_id: ped.into(),
            task,
            obs_start: start,
            obs_end: start + 14,
            tte: (task == Task::Action).then_some(60),
            label: label(task, gt),
            context: context(),
        },
        PredictionRecord {
            sample_id: id,
            model: "m".into(),
            task,
            confidences: conf,
        },
    );
    r.weight = weight;
    r
}

/// Random rows with continuous scores (ties have probability zero).
pub fn random_rows(rng: &mut impl Rng, k: usize, n: usize, weighted: bool) -> Vec<EvalRow> {
    let task = task_for_arity(k);
    (0..n)
        .map(|i| {
            let conf: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
            let gt = rng.random_range(0..k);
            let w = if weighted { rng.random_range(0.05..2.0) } else { 1.0 };
            row(task, &format!("p{i}"), 0, gt, conf, w)
        })
        .collect()
}

pub fn first_max(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn safe_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

pub struct Oracle {
    pub k: usize,
    gt: Vec<usize>,
    pred: Vec<usize>,
    w: Vec<f64>,
    scores: Vec<Vec<f64>>,
}

impl Oracle {
    pub fn new(rows: &[EvalRow]) -> Self {
        Oracle {
            k: rows[0].pred.confidences.len(),
            gt: rows.iter().map(|r| r.sample.label.class_index()).collect(),
            pred: rows.iter().map(|r| first_max(&r.pred.confidences)).collect(),
            w: rows.iter().map(|r| r.weight).collect(),
            scores: rows.iter().map(|r| r.pred.confidences.clone()).collect(),
        }
    }

    fn sum_where(&self, f: impl Fn(usize) -> bool) -> f64 {
        (0..self.gt.len()).filter(|&i| f(i)).map(|i| self.w[i]).sum()
    }

    pub fn acc(&self) -> f64 {
        safe_div(self.sum_where(|i| self.gt[i] == self.pred[i]), self.sum_where(|_| true))
    }

    pub fn precision(&self, c: usize) -> f64 {
        safe_div(
            self.sum_where(|i| self.gt[i] == c && self.pred[i] == c),
            self.sum_where(|i| self.pred[i] == c),
        )
    }

    pub fn recall(&self, c: usize) -> f64 {
        safe_div(
            self.sum_where(|i| self.gt[i] == c && self.pred[i] == c),
            self.sum_where(|i| self.gt[i] == c),
        )
    }

    pub fn f1(&self, c: usize) -> f64 {
        let (p, r) = (self.precision(c), self.recall(c));
        safe_div(2.0 * p * r, p + r)
    }

    fn present(&self) -> Vec<usize> {
        (0..self.k).filter(|&c| self.sum_where(|i| self.gt[i] == c) > 0.0).collect()
    }

    fn summary(&self, f: impl Fn(usize) -> f64) -> f64 {
        if self.k == 2 {
            return f(1);
        }
        let p = self.present();
        safe_div(p.iter().map(|&c| f(c)).sum(), p.len() as f64)
    }

    pub fn bacc(&self) -> f64 {
        let p = self.present();
        safe_div(p.iter().map(|&c| self.recall(c)).sum(), p.len() as f64)
    }

    pub fn prec_summary(&self) -> f64 {
        self.summary(|c| self.precision(c))
    }

    pub fn recall_summary(&self) -> f64 {
        self.summary(|c| self.recall(c))
    }

    pub fn f1_summary(&self) -> f64 {
        self.summary(|c| self.f1(c))
    }

    /// Area under the precision/recall step function, sweeping every
    /// distinct score as a threshold.
    pub fn ap(&self, c: usize) -> Option<f64> {
        let total_pos = self.sum_where(|i| self.gt[i] == c);
        if total_pos == 0.0 {
            return None;
        }
        let mut thresholds: Vec<f64> = self.scores.iter().map(|s| s[c]).collect();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let mut ap = 0.0;
        let mut prev_recall = 0.0;
        for t in thresholds {
            let tp = self.sum_where(|i| self.scores[i][c] >= t && self.gt[i] == c);
            let pp = self.sum_where(|i| self.scores[i][c] >= t);
            let rec = tp / total_pos;
            ap += (rec - prev_recall) * safe_div(tp, pp);
            prev_recall = rec;
        }
        Some(ap)
    }

    /// AP over the list ranked by descending score, equal scores kept in
    /// input order; precision at each positive is recounted from scratch.
    pub fn ap_ranked(&self, c: usize) -> Option<f64> {
        let total_pos = self.sum_where(|i| self.gt[i] == c);
        if total_pos == 0.0 {
            return None;
        }
        let mut order: Vec<usize> = (0..self.gt.len()).collect();
        order.sort_by(|&a, &b| self.scores[b][c].partial_cmp(&self.scores[a][c]).unwrap());
        let mut ap = 0.0;
        for k in 0..order.len() {
            let i = order[k];
            if self.gt[i] != c {
                continue;
            }
            let prefix = &order[..=k];
            let tp: f64 = prefix.iter().filter(|&&j| self.gt[j] == c).map(|&j| self.w[j]).sum();
            let seen: f64 = prefix.iter().map(|&j| self.w[j]).sum();
            ap += self.w[i] / total_pos * (tp / seen);
        }
        Some(ap)
    }

    pub fn map_ranked(&self) -> Option<f64> {
        let aps: Vec<f64> = (0..self.k).filter_map(|c| self.ap_ranked(c)).collect();
        (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64)
    }

    /// Weighted fraction of (positive, negative) pairs ranked correctly,
    /// ties counted half.
    pub fn auc(&self, c: usize) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..self.gt.len() {
            if self.gt[i] != c {
                continue;
            }
            for j in 0..self.gt.len() {
                if self.gt[j] == c {
                    continue;
                }
                let pair = self.w[i] * self.w[j];
                den += pair;
                let (si, sj) = (self.scores[i][c], self.scores[j][c]);
                if si > sj {
                    num += pair;
                } else if si == sj {
                    num += 0.5 * pair;
                }
            }
        }
        (den > 0.0).then(|| num / den)
    }

    pub fn map(&self) -> Option<f64> {
        let aps: Vec<f64> = (0..self.k).filter_map(|c| self.ap(c)).collect();
        (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64)
    }

    pub fn auc_summary(&self) -> Option<f64> {
        if self.k == 2 {
            return self.auc(1);
        }
        let aucs: Vec<f64> = (0..self.k).filter_map(|c| self.auc(c)).collect();
        (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn close_opt(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => close(a, b, tol),
        (None, None) => true,
        _ => false,
    }
}

pub fn instance(ped_id: &str, first: u32, last: u32) -> pedeval::annotation::PedestrianInstance {
    use pedeval::annotation::{BBox, CrossingLabel, FrameObservation, Occlusion, PedestrianInstance};
    PedestrianInstance {
        ped_id: ped_id.into(),
        video_id: "v1".into(),
        frames: (first..=last)
            .map(|i| FrameObservation {
                frame_index: i,
                bbox: BBox::new(900.0, 400.0, 940.0, 500.0),
                occlusion: Occlusion::None,
                walking: true,
                signal_state: SignalState::None,
                ego_speed: 10.0,
            })
            .collect(),
        intention_prob: Some(0.9),
        crossing_label: CrossingLabel::Crossing,
        exp_start_point: Some(first),
        critical_point: Some(last),
        crossing_point: last,
        road_type: RoadType::TwoWay,
    }
}

pub fn dataset(instances: Vec<pedeval::annotation::PedestrianInstance>) -> pedeval::annotation::Dataset {
    use pedeval::annotation::{Dataset, Split, VideoMeta};
    Dataset {
        name: "fixture".into(),
        split: Split::Test,
        videos: vec![VideoMeta {
            video_id: "v1".into(),
            width: 1920,
            height: 1080,
            fps: 30,
        }],
        instances,
    }
}
