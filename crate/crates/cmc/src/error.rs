use std::fmt;
use std::io;
use std::path::PathBuf;

/// Pipeline stage an error was raised in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Input,
    Superpixels,
    MergeTree,
    Candidates,
    Features,
    Training,
    Costs,
    Solve,
    Segmentation,
    Evaluation,
    Synthesis,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Input => "input",
            Stage::Superpixels => "superpixels",
            Stage::MergeTree => "merge-tree",
            Stage::Candidates => "candidates",
            Stage::Features => "features",
            Stage::Training => "training",
            Stage::Costs => "costs",
            Stage::Solve => "solve",
            Stage::Segmentation => "segmentation",
            Stage::Evaluation => "evaluation",
            Stage::Synthesis => "synthesis",
            Stage::Output => "output",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{stage}: {}: {source}", path.display())]
    Io {
        stage: Stage,
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{stage}: {}: {message}", path.display())]
    Format {
        stage: Stage,
        path: PathBuf,
        message: String,
    },
    #[error("{stage}: {source}")]
    Module {
        stage: Stage,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("{stage}: {message}")]
    Invalid { stage: Stage, message: String },
}

impl Error {
    pub fn stage(&self) -> Stage {
        match self {
            Error::Io { stage, .. }
            | Error::Format { stage, .. }
            | Error::Module { stage, .. }
            | Error::Invalid { stage, .. } => *stage,
        }
    }

    pub fn invalid(stage: Stage, message: impl Into<String>) -> Self {
        Error::Invalid {
            stage,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Tags a module error with the stage it came from.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T, E: std::error::Error + Send + Sync + 'static> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| Error::Module {
            stage,
            source: Box::new(e),
        })
    }
}
