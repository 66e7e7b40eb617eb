//! Crate-wide error type.
//!
//! Every fallible contract in the library reports through [`Error`]; messages
//! name the violated constraint with the offending values so config and CLI
//! failures are actionable without a debugger.

/// Errors reported by grid construction, spectral operators, samplers,
/// solvers and the I/O layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Physical grid cannot represent the retained modes (Nyquist).
    #[error("grid too coarse: M = {m} < 2K+1 = {min} for K = {k_max} (aliasing certain)")]
    GridTooCoarse { k_max: usize, m: usize, min: usize },

    /// Two fields on different grids were combined.
    #[error("grid mismatch: (K={k_a}, M={m_a}) vs (K={k_b}, M={m_b})")]
    GridMismatch {
        k_a: usize,
        m_a: usize,
        k_b: usize,
        m_b: usize,
    },

    /// Grid does not retain the full support of the requested spectral cutoff.
    #[error("cutoff level N = {n} (profile {which}) needs K >= {required}, grid has K = {k_max}")]
    InsufficientResolution {
        n: u32,
        which: u8,
        required: usize,
        k_max: usize,
    },

    /// Pseudo-spectral product would alias on this grid.
    #[error("aliasing-unsafe grid for pseudo-spectral products: M = {m} < 4K+1 = {min}")]
    AliasUnsafe { m: usize, min: usize },

    /// Lattice double sum too large to evaluate in the configured budget.
    #[error("double-sum budget exceeded for N = {n}: about 10^{cost_log10:.1} kernel evaluations (guard: N <= {n_max})")]
    BudgetExceeded { n: u32, cost_log10: f64, n_max: u32 },

    /// Trajectory left the trust region (non-finite or enormous field values).
    #[error("numerical blow-up at t = {t:.6}: {what}")]
    BlowUp { t: f64, what: String },

    /// History fields are not aligned with the state they are used with.
    #[error("history fields out of sync: expected t = {expected:.6}, found t = {found:.6}")]
    StaleHistory { expected: f64, found: f64 },

    /// An estimator was asked to work from too few snapshots.
    #[error("need at least {need} snapshots, got {got}")]
    InsufficientSnapshots { need: usize, got: usize },

    /// Configuration violated a named constraint.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or truncated binary snapshot data.
    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
