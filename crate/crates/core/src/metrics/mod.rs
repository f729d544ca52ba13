//! Metric suites: base label and ranking metrics, weighted variants and
//! instance-level metrics.

pub mod core;
pub mod instance;
pub mod weighted;

pub use self::core::{
    accumulate, accuracy, auc, average_precision, balanced_accuracy, base_metrics,
    binary_metrics_positive, f1, macro_auc, map, precision, recall, weighted_ovr_auc,
    BaseMetrics, BinaryMetrics, ConfusionAccumulator, LabelMetrics, RankedScores,
};
pub use self::instance::{
    confidence_delta, group_instances, group_label_runs, hard_prediction, instance_report, soft_prediction,
    ConfDelta, InstanceReport, InstanceSeries, WrongLabelRule,
};
pub use self::weighted::{
    normalize_weights, tte_weight_raw, weighted_report, TteWeightConfig, WeightScheme,
    WeightedSection,
};
