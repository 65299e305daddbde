use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: mgda_core::Error },

    #[error(transparent)]
    Core(#[from] mgda_core::Error),
}

impl CliError {
    /// 2 for configuration mistakes, 1 for file and data errors.
    pub fn exit_code(&self) -> i32 {
        use mgda_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                E::Config(_)
                | E::UnknownScenario(_)
                | E::UnknownProblem(_)
                | E::UnknownAlgorithm(_)
                | E::InvalidArgument(_)
                | E::GridTooLarge { .. },
            ) => 2,
            _ => 1,
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::File { path, source }
    }
}
