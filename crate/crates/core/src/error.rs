use thiserror::Error;

/// Errors raised by the numerical pipeline and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("defective matrix at k = {k}: eigenvalue gap {gap:e} with a single eigenvector")]
    Defective { k: f64, gap: f64 },

    #[error("no minus-branch fixed point: a = {a} < 4b^2 = {threshold}")]
    NoBranch { a: f64, threshold: f64 },

    #[error("no Turing point: max growth never changes sign for a in [{lo}, {hi}]")]
    NoTuringPoint { lo: f64, hi: f64 },

    #[error("homogeneous instability: maximal growth attained at k = 0, not a Turing point")]
    HomogeneousInstability,

    #[error("Turing-Hopf point (Im lambda1 = {imag:e}) is unsupported")]
    TuringHopf { imag: f64 },

    #[error("resonant correction solve at k = {k}: condition number {cond:e}")]
    ResonantCorrection { k: f64, cond: f64 },

    #[error("blow-up abort at t = {t}: sup-norm {norm:e} exceeds {threshold:e}")]
    BlowUp { t: f64, norm: f64, threshold: f64 },

    #[error("time step {dt} exceeds the quasilinear stability ceiling {ceiling}")]
    StepTooLarge { dt: f64, ceiling: f64 },

    #[error("slow field not resolvable on the fast grid: {0}")]
    Unresolvable(String),

    #[error("semigroup probe inconsistent: fitted decay rate {sigma} <= 0")]
    ProbeInconsistent { sigma: f64 },

    #[error("degenerate projection: carrier amplitude {0:e} below 1e-10")]
    DegenerateProjection(f64),

    #[error("amplitude bound C_GL = {bound} still exceeded after {retries} halvings of A0")]
    RetryExhausted { bound: f64, retries: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
