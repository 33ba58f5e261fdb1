//! Shared CLI plumbing: error-to-exit-code mapping, file helpers, point
//! parsing, and checkpoint-to-field resolution.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sdr_core::field::RandomField;
use sdr_core::training::{Checkpoint, TrainConfig};
use sdr_core::{NetworkField, ProblemSpec};

/// CLI failure with its exit code class.
#[derive(Debug)]
pub enum CliError {
    /// Exit 1: a numerical check failed or a computation went non-finite.
    Numerical(String),
    /// Exit 2: bad arguments or malformed inline values.
    Usage(String),
    /// Exit 3: file system or serialization failure.
    Io(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Numerical(_) => 1,
            Self::Usage(_) => 2,
            Self::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Numerical(msg) | Self::Usage(msg) => write!(f, "{msg}"),
            Self::Io(err) => write!(f, "{err:#}"),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn io_error(context: &str, err: impl Into<anyhow::Error>) -> CliError {
    CliError::Io(err.into().context(context.to_string()))
}

/// Parse a comma-separated point like "0.25,0.5".
pub fn parse_point(text: &str, expected_dim: usize) -> CliResult<Vec<f64>> {
    let point: Vec<f64> = text
        .split(',')
        .map(|part| part.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("malformed point {text:?}")))?;
    if point.len() != expected_dim {
        return Err(CliError::Usage(format!(
            "point {text:?} has {} coordinates, problem needs {expected_dim}",
            point.len()
        )));
    }
    Ok(point)
}

pub fn read_config(path: &Path) -> CliResult<TrainConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_error(&format!("reading config {}", path.display()), e))?;
    serde_json::from_str(&text)
        .map_err(|e| io_error(&format!("parsing config {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    Checkpoint::load(path)
        .map_err(|e| io_error(&format!("loading checkpoint {}", path.display()), e))
}

/// The field a checkpoint denotes: the stored network, or the problem's
/// exact-solution oracle for `exact_solution` fixtures.
pub enum CheckpointField {
    Network(sdr_core::MlpParams, usize),
    Exact(Arc<dyn RandomField>),
}

impl CheckpointField {
    pub fn as_field(&self) -> Box<dyn RandomField + '_> {
        match self {
            Self::Network(params, dim) => Box::new(NetworkField::new(params, *dim)),
            Self::Exact(exact) => Box::new(exact.clone()),
        }
    }
}

/// Rebuild the problem and the evaluated field from a checkpoint.
pub fn checkpoint_problem_and_field(cp: &Checkpoint) -> CliResult<(ProblemSpec, CheckpointField)> {
    let problem = cp
        .build_problem()
        .map_err(|e| io_error("rebuilding problem from checkpoint", e))?;
    let field = if cp.exact_solution {
        CheckpointField::Exact(problem.exact.clone())
    } else {
        let params = cp.params().map_err(|e| io_error("decoding checkpoint network", e))?;
        CheckpointField::Network(params, problem.spatial_dim)
    };
    Ok((problem, field))
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult {
    let tmp: PathBuf = path.with_extension("tmp");
    std::fs::write(&tmp, contents)
        .map_err(|e| io_error(&format!("writing {}", tmp.display()), e))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| io_error(&format!("renaming into {}", path.display()), e))
}

pub fn ensure_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir)
        .map_err(|e| io_error(&format!("creating output directory {}", dir.display()), e))
}

pub fn float_cell(v: f64) -> String {
    v.to_string()
}
