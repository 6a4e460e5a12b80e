//! Confusion-count metrics, reports, qualitative grids, ablation runs and
//! whole-volume prediction.

pub mod ablation;
pub mod evaluate;
pub mod metrics;
pub mod predict;
pub mod qualitative;
pub mod report;

pub use ablation::{run_ablation, AblationConfig, AblationData, AblationResult, AblationRow};
pub use evaluate::{evaluate, evaluate_pairs, predict_masks, Averaging, Evaluation};
pub use metrics::{confusion_counts, metrics_from_counts, ConfusionCounts, MetricFlags, Metrics, DEFAULT_THRESHOLD};
pub use predict::predict_volume;
pub use qualitative::{export_qualitative, qualitative_grid, qualitative_row};
pub use report::{MetricsReport, Provenance, ReportRow};
