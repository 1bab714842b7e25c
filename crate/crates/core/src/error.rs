use thiserror::Error;

use crate::types::LandmarkId;

pub type Result<T, E = SlamError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SlamError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("unknown landmark {0}")]
    UnknownLandmark(LandmarkId),

    #[error("duplicate observation of landmark {0}")]
    DuplicateObservation(LandmarkId),

    #[error("particle {particle}, landmark {landmark:?}: {source}")]
    InParticle {
        particle: usize,
        landmark: Option<LandmarkId>,
        #[source]
        source: Box<SlamError>,
    },

    #[error("landmark {landmark}: {source}")]
    AtLandmark {
        landmark: LandmarkId,
        #[source]
        source: Box<SlamError>,
    },

    #[error("simulation aborted: {0}")]
    Simulation(String),

    #[error("{0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SlamError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        SlamError::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_landmark(self, landmark: LandmarkId) -> Self {
        SlamError::AtLandmark {
            landmark,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_particle(self, particle: usize, landmark: Option<LandmarkId>) -> Self {
        match self {
            SlamError::AtLandmark { landmark, source } => SlamError::InParticle {
                particle,
                landmark: Some(landmark),
                source,
            },
            other => SlamError::InParticle {
                particle,
                landmark,
                source: Box::new(other),
            },
        }
    }
}
