//! Declarative runs of the non-reciprocal Casimir engine.

#![allow(non_snake_case)]

use std::fmt;
use std::path::{Path, PathBuf};

pub mod config;
pub mod output;
pub mod tasks;
pub mod validate;

use config::{ConfigError, Format, RunConfig, Task};
use output::{Artifact, TaskOutput};
use tasks::Field;

#[derive(Debug)]
pub enum RunError {
    Config { path: PathBuf, error: ConfigError },
    Numerical { task: &'static str, error: nrcasimir::Error },
    Io { path: PathBuf, error: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            RunError::Numerical { .. } => 3,
            RunError::Io { .. } => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config { path, error } => write!(f, "invalid configuration {}: {error}", path.display()),
            RunError::Numerical { task, error } => write!(f, "numerical failure in {task}: {error}"),
            RunError::Io { path, error } => write!(f, "{}: {error}", path.display()),
        }
    }
}

impl std::error::Error for RunError {}

/// Command-line overrides of the `[output]` table.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
}

/// Run `task` on an already parsed and overridden configuration.
pub fn execute(task: Task, cfg: &RunConfig, source: &str) -> Result<TaskOutput, RunError> {
    let resolved = cfg.resolve(task, source).map_err(|error| RunError::Config {
        path: PathBuf::new(),
        error,
    })?;
    let numerical = |task: &'static str| move |error| RunError::Numerical { task, error };
    let name = task.name();
    let out = match task {
        Task::Energy => TaskOutput::Energy(tasks::energy(&resolved).map_err(numerical(name))?),
        Task::Force => TaskOutput::Force(tasks::force_task(&resolved).map_err(numerical(name))?),
        Task::Map => TaskOutput::Map(tasks::map(cfg, &resolved, Field::FreeEnergy).map_err(numerical(name))?),
        Task::LaplacianMap => {
            TaskOutput::Map(tasks::map(cfg, &resolved, Field::Laplacian).map_err(numerical(name))?)
        }
        Task::ScanAngle => TaskOutput::Scan(tasks::scan_angle(cfg, &resolved).map_err(numerical(name))?),
        Task::ThreeBody => TaskOutput::ThreeBody(tasks::three_body(&resolved).map_err(numerical(name))?),
        Task::ValidateAsymptotics => {
            TaskOutput::Validation(tasks::validate_asymptotics(cfg, &resolved).map_err(numerical(name))?)
        }
    };
    Ok(out)
}

fn write_artifacts(dir: &Path, files: &[Artifact]) -> Result<Vec<PathBuf>, RunError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |error| RunError::Io { path, error }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    files
        .iter()
        .map(|a| {
            let p = dir.join(&a.name);
            std::fs::write(&p, &a.contents).map_err(io(&p))?;
            Ok(p)
        })
        .collect()
}

/// Read the configuration at `path`, run `task` on a pool of the requested
/// size and write the artifacts. Returns the written paths.
pub fn run(task: Task, path: &Path, overrides: &Overrides) -> Result<Vec<PathBuf>, RunError> {
    let source = std::fs::read_to_string(path).map_err(|error| RunError::Io {
        path: path.to_path_buf(),
        error,
    })?;
    let config_error = |error| RunError::Config {
        path: path.to_path_buf(),
        error,
    };
    let mut cfg = RunConfig::parse(&source).map_err(config_error)?;
    if let Some(d) = &overrides.out {
        cfg.output.dir = d.clone();
    }
    if let Some(t) = overrides.threads {
        cfg.output.threads = t;
    }
    if let Some(f) = overrides.format {
        cfg.output.format = f;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.output.threads)
        .build()
        .map_err(|e| {
            config_error(ConfigError {
                line: None,
                message: format!("cannot start {} worker threads: {e}", cfg.output.threads),
            })
        })?;
    log::info!("{}: {} threads", task.name(), pool.current_num_threads());
    let result = pool.install(|| execute(task, &cfg, &source)).map_err(|e| match e {
        RunError::Config { error, .. } => config_error(error),
        other => other,
    })?;
    let files = output::render(task, &cfg, &result, cfg.output.format);
    write_artifacts(&cfg.output.dir, &files)
}
