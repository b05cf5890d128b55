//! Analyses over finished runs: multi-run aggregation, confusion matrices,
//! PCA projections, and deterministic SVG/CSV rendering.

mod aggregate;
mod confusion;
mod pca;
mod render;

pub use aggregate::{aggregate_runs, aggregate_values, export_csv, parse_csv, AggregateCurve};
pub use confusion::{accuracy, confusion_matrix, ConfusionMatrix};
pub use pca::{pca_project, PcaResult};
pub use render::{render_confusion_svg, render_curves_svg, render_decision_svg, Bounds, ScatterPoint};
