//! Run configuration: a TOML file whose physical keys carry their unit in
//! the name (`_K`, `_m`, `_m3`, `_rad_s`, `_lambda` for multiples of λ_T).

use std::fmt;
use std::path::PathBuf;

use nalgebra::Vector3;
use nrcasimir::materials::{MagnetoOpticalModel, Material, ToyPolarizability};
use nrcasimir::{Approximation, MatsubaraPolicy, ParticleSpec, ThermalContext};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Energy,
    Force,
    Map,
    ScanAngle,
    LaplacianMap,
    ThreeBody,
    ValidateAsymptotics,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Energy => "energy",
            Task::Force => "force",
            Task::Map => "map",
            Task::ScanAngle => "scan-angle",
            Task::LaplacianMap => "laplacian-map",
            Task::ThreeBody => "three-body",
            Task::ValidateAsymptotics => "validate-asymptotics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproximationKind {
    #[default]
    OneReflection,
    ExactDipole,
}

impl From<ApproximationKind> for Approximation {
    fn from(a: ApproximationKind) -> Self {
        match a {
            ApproximationKind::OneReflection => Approximation::OneReflection,
            ApproximationKind::ExactDipole => Approximation::ExactDipole,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatsubaraConfig {
    #[serde(default)]
    pub abs_tol_J: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_n_min")]
    pub n_min: u64,
    #[serde(default = "default_n_max")]
    pub n_max: u64,
    #[serde(default = "default_cutoff")]
    pub screening_cutoff: f64,
}

fn default_rel_tol() -> f64 {
    MatsubaraPolicy::default().rel_tol
}
fn default_n_min() -> u64 {
    MatsubaraPolicy::default().n_min
}
fn default_n_max() -> u64 {
    MatsubaraPolicy::default().n_max
}
fn default_cutoff() -> f64 {
    MatsubaraPolicy::default().screening_cutoff
}
fn default_min_separation() -> f64 {
    nrcasimir::em::DEFAULT_MIN_SEPARATION
}

impl Default for MatsubaraConfig {
    fn default() -> Self {
        let p = MatsubaraPolicy::default();
        Self {
            abs_tol_J: p.abs_tol,
            rel_tol: p.rel_tol,
            n_min: p.n_min,
            n_max: p.n_max,
            screening_cutoff: p.screening_cutoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MaterialConfig {
    Toy {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha0_m3: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha0_lambda3: Option<f64>,
        #[serde(default)]
        b: f64,
        #[serde(default = "x_axis")]
        axis: [f64; 3],
    },
    MagnetoOptical {
        omega_p_rad_s: f64,
        omega_tau_rad_s: f64,
        omega_b_rad_s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_m: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_lambda: Option<f64>,
        #[serde(default = "x_axis")]
        axis: [f64; 3],
    },
}

fn x_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_m: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_lambda: Option<[f64; 3]>,
    pub material: MaterialConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    #[default]
    Xy,
    Xz,
    Yz,
}

impl Plane {
    /// Cartesian indices of the two in-plane axes and the normal.
    pub fn axes(self) -> (usize, usize, usize) {
        match self {
            Plane::Xy => (0, 1, 2),
            Plane::Xz => (0, 2, 1),
            Plane::Yz => (1, 2, 0),
        }
    }

    pub fn labels(self) -> (&'static str, &'static str, &'static str) {
        const L: [&str; 3] = ["x", "y", "z"];
        let (u, v, w) = self.axes();
        (L[u], L[v], L[w])
    }
}

/// Planar grid of positions of the moving particle, relative to the fixed
/// one, in units of λ_T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub plane: Plane,
    pub u_range_lambda: [f64; 2],
    pub v_range_lambda: [f64; 2],
    #[serde(default)]
    pub offset_lambda: f64,
    pub resolution: [usize; 2],
    /// 1-based index of the particle that is moved.
    #[serde(default = "default_moving")]
    pub moving_particle: usize,
}

fn default_moving() -> usize {
    2
}

/// Circle of positions at fixed radius and height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub radius_lambda: f64,
    #[serde(default)]
    pub z_lambda: f64,
    pub samples: usize,
    #[serde(default = "default_moving")]
    pub moving_particle: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default = "default_validate_alpha")]
    pub alpha0_lambda3: f64,
}

fn default_validate_alpha() -> f64 {
    1e-9
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            alpha0_lambda3: default_validate_alpha(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
    /// Worker threads; 0 lets the pool decide.
    #[serde(default)]
    pub threads: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            format: Format::Csv,
            threads: 0,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    pub temperature_K: f64,
    #[serde(default)]
    pub approximation: ApproximationKind,
    /// Smallest allowed separation, in units of λ_T.
    #[serde(default = "default_min_separation")]
    pub min_separation_lambda: f64,
    #[serde(default)]
    pub matsubara: MatsubaraConfig,
    #[serde(default, rename = "particle")]
    pub particles: Vec<ParticleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A configuration problem, anchored to a line of the source when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Physics objects built from a validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub ctx: ThermalContext,
    pub policy: MatsubaraPolicy,
    pub approximation: Approximation,
    pub particles: Vec<ParticleSpec>,
}

impl RunConfig {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        toml::from_str(source).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of(source, s.start)),
            message: e.message().to_string(),
        })
    }

    /// Canonical TOML with every default filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// The configuration as embedded in outputs: everything except where
    /// and how fast it ran.
    pub fn embedded(&self) -> Self {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        c.output.threads = 0;
        c
    }

    /// Check everything the task needs and build the physics objects.
    /// `source` anchors errors to lines.
    pub fn resolve(&self, task: Task, source: &str) -> Result<Resolved, ConfigError> {
        let err = |key: &str, message: String| ConfigError {
            line: find_key(source, key),
            message,
        };
        if let Some(t) = self.task {
            if t != task {
                return Err(err("task", format!("config is for task `{}`, not `{}`", t.name(), task.name())));
            }
        }
        let ctx = ThermalContext::new(self.temperature_K).map_err(|e| err("temperature_K", e.to_string()))?;
        if !(self.min_separation_lambda.is_finite() && self.min_separation_lambda > 0.0) {
            return Err(err("min_separation_lambda", "must be positive".into()));
        }
        let ctx = ctx.with_min_separation(self.min_separation_lambda);
        let m = &self.matsubara;
        if !(m.rel_tol >= 0.0 && m.abs_tol_J >= 0.0) {
            return Err(err("rel_tol", "tolerances must be non-negative".into()));
        }
        if m.n_max < m.n_min.max(1) {
            return Err(err("n_max", "must be at least n_min and at least 1".into()));
        }
        if !(m.screening_cutoff > 0.0) {
            return Err(err("screening_cutoff", "must be positive".into()));
        }
        let policy = MatsubaraPolicy {
            abs_tol: m.abs_tol_J,
            rel_tol: m.rel_tol,
            n_min: m.n_min,
            n_max: m.n_max,
            screening_cutoff: m.screening_cutoff,
            fixed_terms: None,
        };

        let lt = ctx.thermal_length();
        let mut particles = Vec::with_capacity(self.particles.len());
        for (i, p) in self.particles.iter().enumerate() {
            particles.push(p.build(lt).map_err(|(key, msg)| ConfigError {
                line: find_nth_table(source, "particle", i).and_then(|start| find_key_after(source, key, start)),
                message: format!("particle {}: {msg}", i + 1),
            })?);
        }

        let needed = match task {
            Task::ThreeBody => Some(3),
            Task::ValidateAsymptotics => None,
            _ => Some(2),
        };
        if let Some(n) = needed {
            if particles.len() != n {
                return Err(ConfigError {
                    line: find_key(source, "[[particle]]"),
                    message: format!("task `{}` needs exactly {n} particles, found {}", task.name(), particles.len()),
                });
            }
        }
        match task {
            Task::Map | Task::LaplacianMap => {
                let g = self.grid.as_ref().ok_or_else(|| err("[grid]", format!("task `{}` needs a [grid] table", task.name())))?;
                if g.resolution.iter().any(|&r| r < 2) {
                    return Err(err("resolution", "grid resolution must be at least 2 per axis".into()));
                }
                for (key, r) in [("u_range_lambda", g.u_range_lambda), ("v_range_lambda", g.v_range_lambda)] {
                    if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
                        return Err(err(key, "range must be finite and increasing".into()));
                    }
                }
                if !g.offset_lambda.is_finite() {
                    return Err(err("offset_lambda", "must be finite".into()));
                }
                check_moving(g.moving_particle, source)?;
            }
            Task::ScanAngle => {
                let s = self.scan.as_ref().ok_or_else(|| err("[scan]", "task `scan-angle` needs a [scan] table".into()))?;
                if !(s.radius_lambda.is_finite() && s.radius_lambda > 0.0) {
                    return Err(err("radius_lambda", "must be positive".into()));
                }
                if !s.z_lambda.is_finite() {
                    return Err(err("z_lambda", "must be finite".into()));
                }
                if s.samples < 2 {
                    return Err(err("samples", "need at least 2 angles".into()));
                }
                check_moving(s.moving_particle, source)?;
            }
            Task::ValidateAsymptotics => {
                let a = self.validate.alpha0_lambda3;
                if !(a.is_finite() && a > 0.0 && a < 1e-3) {
                    return Err(err("alpha0_lambda3", "must be positive and weak (below 1e-3)".into()));
                }
            }
            _ => {}
        }
        Ok(Resolved {
            ctx,
            policy,
            approximation: self.approximation.into(),
            particles,
        })
    }
}

fn check_moving(index: usize, source: &str) -> Result<(), ConfigError> {
    if index == 1 || index == 2 {
        Ok(())
    } else {
        Err(ConfigError {
            line: find_key(source, "moving_particle"),
            message: "moving_particle must be 1 or 2".into(),
        })
    }
}

type FieldError = (&'static str, String);

fn position(m: Option<[f64; 3]>, l: Option<[f64; 3]>, lt: f64, what: &'static str) -> Result<Vector3<f64>, FieldError> {
    let v = match (m, l) {
        (Some(m), None) => Vector3::from(m),
        (None, Some(l)) => Vector3::from(l) * lt,
        (Some(_), Some(_)) => return Err((what, "give the value in metres or in λ_T, not both".into())),
        (None, None) => return Err((what, "missing (use the `_m` or `_lambda` key)".into())),
    };
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err((what, "must be finite".into()))
    }
}

fn scalar(m: Option<f64>, l: Option<f64>, scale: f64, what: &'static str) -> Result<f64, FieldError> {
    match (m, l) {
        (Some(m), None) => Ok(m),
        (None, Some(l)) => Ok(l * scale),
        (Some(_), Some(_)) => Err((what, "give the value in SI units or in λ_T units, not both".into())),
        (None, None) => Err((what, "missing (use the SI or `_lambda` key)".into())),
    }
}

impl ParticleConfig {
    fn build(&self, lt: f64) -> Result<ParticleSpec, FieldError> {
        let position = position(self.position_m, self.position_lambda, lt, "position")?;
        let material: Material = match &self.material {
            MaterialConfig::Toy {
                alpha0_m3,
                alpha0_lambda3,
                b,
                axis,
            } => {
                let a = scalar(*alpha0_m3, *alpha0_lambda3, lt.powi(3), "alpha0")?;
                ToyPolarizability::new(a, *b, Vector3::from(*axis))
                    .map_err(|e| ("alpha0", e.to_string()))?
                    .into()
            }
            MaterialConfig::MagnetoOptical {
                omega_p_rad_s,
                omega_tau_rad_s,
                omega_b_rad_s,
                radius_m,
                radius_lambda,
                axis,
            } => {
                let r = scalar(*radius_m, *radius_lambda, lt, "radius")?;
                MagnetoOpticalModel::new(*omega_p_rad_s, *omega_tau_rad_s, *omega_b_rad_s, Vector3::from(*axis), r)
                    .map_err(|e| ("omega_p_rad_s", e.to_string()))?
                    .into()
            }
        };
        Ok(ParticleSpec::new(position, material))
    }
}

/// 1-based line of a byte offset.
fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

fn key_matches(line: &str, key: &str) -> bool {
    let t = line.trim_start();
    if key.starts_with('[') {
        return t.starts_with(key);
    }
    t.strip_prefix(key)
        .map(|rest| rest.trim_start().starts_with('='))
        .unwrap_or(false)
}

/// Line of the first assignment to a key (or table header).
fn find_key(source: &str, key: &str) -> Option<usize> {
    source.lines().position(|l| key_matches(l, key)).map(|i| i + 1)
}

/// Line of the first key whose name starts with `stem`, at or after line `start`.
fn find_key_after(source: &str, stem: &str, start: usize) -> Option<usize> {
    source
        .lines()
        .enumerate()
        .skip(start.saturating_sub(1))
        .find(|(_, l)| l.trim_start().starts_with(stem) && l.contains('='))
        .map(|(i, _)| i + 1)
        .or(Some(start))
}

/// Line of the `i`-th `[[table]]` header.
fn find_nth_table(source: &str, table: &str, i: usize) -> Option<usize> {
    let header = format!("[[{table}]]");
    source
        .lines()
        .enumerate()
        .filter(|(_, l)| l.trim_start().starts_with(&header))
        .nth(i)
        .map(|(n, _)| n + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = r#"
temperature_K = 300.0

[[particle]]
position_lambda = [0.0, 0.0, 0.0]
material = { kind = "toy", alpha0_lambda3 = 1e-9, b = 1.0 }

[[particle]]
position_lambda = [0.5, 0.0, 0.0]
material = { kind = "toy", alpha0_lambda3 = 1e-9, b = 1.0 }
"#;

    #[test]
    fn parses_and_resolves() {
        let c = RunConfig::parse(PAIR).unwrap();
        let r = c.resolve(Task::Energy, PAIR).unwrap();
        assert_eq!(r.particles.len(), 2);
        let lt = r.ctx.thermal_length();
        assert!((r.particles[1].position.x - 0.5 * lt).abs() < 1e-20);
        assert_eq!(r.approximation, Approximation::OneReflection);
    }

    #[test]
    fn resolved_toml_round_trips() {
        let c = RunConfig::parse(PAIR).unwrap();
        let again = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.matsubara, MatsubaraConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let bad = PAIR.replace("temperature_K", "temperature");
        let e = RunConfig::parse(&bad).unwrap_err();
        assert_eq!(e.line, Some(2));
        let bad = PAIR.replace("b = 1.0 }\n\n[[particle]]", "b = 1.0, colour = 2 }\n\n[[particle]]");
        let e = RunConfig::parse(&bad).unwrap_err();
        assert_eq!(e.line, Some(6));
    }

    #[test]
    fn semantic_errors_point_at_the_key() {
        let bad = PAIR.replace("temperature_K = 300.0", "temperature_K = -1.0");
        let c = RunConfig::parse(&bad).unwrap();
        assert_eq!(c.resolve(Task::Energy, &bad).unwrap_err().line, Some(2));

        let bad = PAIR.replacen("position_lambda = [0.5, 0.0, 0.0]", "position_lambda = [0.5, 0.0, 0.0]\nposition_m = [0.0, 0.0, 0.0]", 1);
        let c = RunConfig::parse(&bad).unwrap();
        let e = c.resolve(Task::Energy, &bad).unwrap_err();
        assert_eq!(e.line, Some(9));
        assert!(e.message.starts_with("particle 2"));

        let c = RunConfig::parse(PAIR).unwrap();
        assert!(c.resolve(Task::Map, PAIR).unwrap_err().message.contains("[grid]"));
        assert!(c.resolve(Task::ThreeBody, PAIR).unwrap_err().message.contains("exactly 3"));
    }

    #[test]
    fn grid_resolution_is_checked() {
        let src = format!("{PAIR}\n[grid]\nu_range_lambda = [-1.0, 1.0]\nv_range_lambda = [-1.0, 1.0]\nresolution = [1, 5]\n");
        let c = RunConfig::parse(&src).unwrap();
        let e = c.resolve(Task::Map, &src).unwrap_err();
        assert_eq!(e.line, Some(src.lines().position(|l| l.starts_with("resolution")).unwrap() + 1));
    }
}
