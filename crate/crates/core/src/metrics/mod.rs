//! Frame-level evaluation: accuracy, weighted F1, AP/mAP, confusion
//! matrices, PR curves and aggregate time on activity.

pub mod aggregate;
pub mod ap;
pub mod classification;
pub mod report;
pub mod svg;

pub use aggregate::{aggregate_time, frames_to_minutes, headline_rmse, AggregateTimeReport, SessionMinutes};
pub use ap::{average_precision, mean_average_precision, pr_curve, pr_curves, ApReport, PrCurve};
pub use classification::{confusion_matrix, frame_accuracy, hard_accuracy, weighted_f1, Accuracy, ConfusionMatrix};
pub use report::{
    evaluate, read_trace_csv, write_confusion_csv, write_json, write_pr_csv, write_trace_csv, EvalReport,
};
pub use svg::{aggregate_svg, pr_svg, segments, trace_svg};
