use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or grid configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The sampled representation cannot hold the requested pulse without wraparound.
    #[error("aliasing guard: {0}")]
    Aliasing(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("amplitude not unit-normalized (norm^2 = {norm_squared:.12}); renormalize lossy outputs before interference")]
    NotNormalized { norm_squared: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("pipeline element {index}: {source}")]
    Element {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dip fit did not converge after {iterations} iterations (residual norm {residual_norm:.3e}, last iterate {last:?})")]
    FitNonConvergence {
        iterations: usize,
        residual_norm: f64,
        last: [f64; 4],
    },

    #[error("bootstrap: {failed} of {total} resample fits failed")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("optimizer: every evaluated point was flagged invalid")]
    NoValidEvaluations,

    #[error("numerical: {0}")]
    Numerical(String),
}
