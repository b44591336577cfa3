//! End-to-end EEOPA and APA runs, parameter sweeps and the oracle
//! cross-check suite.

mod scenario;
mod sweep;
mod verify;

pub use scenario::{
    run_apa, run_apa_with, run_eeopa, run_eeopa_with, ApaOutcome, EeopaOutcome, Scenario,
    ScenarioModel, DEFAULT_BANDWIDTH, DEFAULT_FRAME_DURATION, DEFAULT_P_BAR, DEFAULT_THETA,
    FALLBACK_MC_SAMPLES,
};
pub use sweep::{
    default_p_bar_grid, default_theta_grid, is_descending, p_bar_crossover, rows_from_csv,
    rows_to_csv, sweep, theta_crossover, threshold_table, Algorithm, Crossover, SweepResult,
    SweepRow, SweepSpec, CSV_HEADER,
};
pub use verify::{
    published_formula_audit, verify, Check, Discrepancy, FormulaAudit, VerifyOptions, VerifyReport,
    AUDIT_POINTS, EXACT_NORMALIZATION_TOL, L1_TOL, POINTWISE_TOL, QUADRATURE_NORMALIZATION_TOL,
};
