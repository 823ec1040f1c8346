use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point ({x}, {y}, {z}) lies outside the grid bounds")]
    OutOfDomain { x: f64, y: f64, z: f64 },

    #[error("{what} needs {required} bytes, over the memory budget of {budget} bytes")]
    Resource {
        what: &'static str,
        required: usize,
        budget: usize,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("mesh component {component} is not watertight ({open_edges} open or non-manifold edges)")]
    NotWatertight { component: usize, open_edges: usize },

    #[error("missing layer `{0}`")]
    MissingLayer(String),

    #[error("collision resolution diverged at iteration {iteration}: loss rose on {rejected} consecutive steps")]
    Diverged {
        iteration: usize,
        rejected: usize,
        trace: Vec<f64>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
