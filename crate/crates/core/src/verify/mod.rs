//! Equivariance audits, gradient checks, parameter accounting and the
//! brute-force orbit oracle.

mod degenerate;
mod equivariance;
mod grad;
mod oracle;
mod params;
mod report;

pub use degenerate::{degeneration_gaps, DegenerationGap};
pub use equivariance::{audit, equivariance_error, tiling_gap, toy_swin, toy_vit, AuditTarget, Transport, AUDIT_SEEDS};
pub use grad::{
    grad_audit, grad_check, grad_check_names, relative_error, GradResult, COMPOSED_TOL, FD_STEP, PRIMITIVE_TOL,
    REL_FLOOR,
};
pub use oracle::{brute_pair, brute_rep, orbit_oracle, OracleReport};
pub use params::{linear_shapes, reduce, LinearShape};
pub use report::{write_reports_csv, EquivarianceReport, GroupRecord, ReportCell, CSV_HEADER};
