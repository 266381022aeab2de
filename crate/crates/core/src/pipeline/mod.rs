//! Dataset ingestion, orchestration and reporting.

mod dataset;
mod report;
mod run;

pub use dataset::{load_edit_dataset, parse_edit_dataset, DatasetError, DatasetSource, EditDataset};
pub use report::{
    aggregate, render_report, render_table, summarize, EvaluationReport, Format, GroupBy, GroupSummary, ReportSummary,
    SubjectMeans, Table, TableRow,
};
pub use run::{run_evaluation, RunConfig, RunError, RunInputs, IMAGE_EXTENSIONS};
