//! Artifact rendering. Every file carries the engine version and the
//! resolved configuration; numbers are written with 17 significant digits.

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::{Format, RunConfig, Task};
use crate::tasks::{
    EnergyReport, Extremum, ForceReport, MapResult, ScanResult, ThreeBodyReport,
};
use crate::validate::ValidationReport;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum TaskOutput {
    Energy(EnergyReport),
    Force(ForceReport),
    Map(MapResult),
    Scan(ScanResult),
    ThreeBody(ThreeBodyReport),
    Validation(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), num)
}

fn preamble(task: Task, cfg: &RunConfig) -> String {
    let mut s = format!("# nrcasimir {VERSION}\n# task: {}\n", task.name());
    for line in cfg.embedded().to_toml().lines() {
        let _ = writeln!(s, "# {line}");
    }
    s
}

fn csv(task: Task, cfg: &RunConfig, header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = preamble(task, cfg);
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    engine: &'static str,
    version: &'static str,
    task: &'static str,
    config: RunConfig,
    result: &'a T,
}

fn json<T: Serialize>(task: Task, cfg: &RunConfig, result: &T) -> String {
    let env = Envelope {
        engine: "nrcasimir",
        version: VERSION,
        task: task.name(),
        config: cfg.embedded(),
        result,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("results serialize");
    s.push('\n');
    s
}

fn extrema_rows(e: &[Extremum]) -> Vec<String> {
    e.iter()
        .map(|e| {
            format!(
                "{},{},{},{},{},{},{},{},{:?},{}",
                num(e.position_lambda[0]),
                num(e.position_lambda[1]),
                num(e.position_lambda[2]),
                num(e.free_energy_J),
                num(e.gradient_norm),
                num(e.hessian_eigenvalues[0]),
                num(e.hessian_eigenvalues[1]),
                num(e.hessian_eigenvalues[2]),
                e.classification,
                e.on_axis
            )
            .to_lowercase()
        })
        .collect()
}

fn map_artifacts(task: Task, cfg: &RunConfig, m: &MapResult, stem: &str) -> Vec<Artifact> {
    let (nu, nv) = (m.u_lambda.len(), m.v_lambda.len());
    let unit = if stem == "laplacian" { "J_m2" } else { "J" };
    let rows = (0..nv).flat_map(|iv| {
        (0..nu).map(move |iu| {
            let p = m.point(iu, iv);
            format!("{},{},{},{}", num(p[0]), num(p[1]), num(p[2]), num(m.value(iu, iv)))
        })
    });
    let mut out = vec![Artifact {
        name: format!("{stem}.csv"),
        contents: csv(task, cfg, &format!("x_lambda,y_lambda,z_lambda,value_{unit}"), rows),
    }];
    for cut in &m.cuts {
        let rows = cut
            .coordinate_lambda
            .iter()
            .zip(&cut.value)
            .map(|(c, v)| format!("{},{}", num(*c), num(*v)));
        out.push(Artifact {
            name: format!("{stem}_cut_{}.csv", cut.axis),
            contents: csv(task, cfg, &format!("{}_lambda,value_{unit}", cut.axis), rows),
        });
    }
    if task == Task::Map {
        out.push(Artifact {
            name: "extrema.csv".into(),
            contents: csv(
                task,
                cfg,
                "x_lambda,y_lambda,z_lambda,free_energy_J,gradient_norm_J_m,eig1_J_m2,eig2_J_m2,eig3_J_m2,classification,on_axis",
                extrema_rows(&m.extrema),
            ),
        });
    }
    out
}

/// Files produced by a task in the requested format, plus the resolved
/// configuration.
pub fn render(task: Task, cfg: &RunConfig, out: &TaskOutput, format: Format) -> Vec<Artifact> {
    let mut files = match (out, format) {
        (TaskOutput::Energy(e), Format::Csv) => vec![Artifact {
            name: "energy.csv".into(),
            contents: csv(
                task,
                cfg,
                "x_m,y_m,z_m,distance_lambda,free_energy_J,reciprocal_J,anti_reciprocal_J,cross_J,second_order_bound_J,matsubara_terms",
                [format!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    num(e.separation_m[0]),
                    num(e.separation_m[1]),
                    num(e.separation_m[2]),
                    num(e.distance_lambda),
                    num(e.free_energy_J),
                    opt(e.reciprocal_J),
                    opt(e.anti_reciprocal_J),
                    opt(e.cross_J),
                    opt(e.second_order_bound_J),
                    e.matsubara_terms
                )],
            ),
        }],
        (TaskOutput::Force(f), Format::Csv) => vec![Artifact {
            name: "force.csv".into(),
            contents: csv(
                task,
                cfg,
                "particle,fx_N,fy_N,fz_N",
                [(1, f.force_1_N), (2, f.force_2_N)]
                    .iter()
                    .map(|(i, v)| format!("{i},{},{},{}", num(v[0]), num(v[1]), num(v[2]))),
            ) + &format!(
                "# free_energy_J = {}\n# laplacian_2_J_m2 = {}\n# laplacian_noisy = {}\n",
                num(f.free_energy_J),
                num(f.laplacian_2_J_m2),
                f.laplacian_noisy
            ),
        }],
        (TaskOutput::Map(m), Format::Csv) => {
            let stem = if task == Task::LaplacianMap { "laplacian" } else { "map" };
            map_artifacts(task, cfg, m, stem)
        }
        (TaskOutput::Scan(s), Format::Csv) => vec![
            Artifact {
                name: "scan.csv".into(),
                contents: csv(
                    task,
                    cfg,
                    "phi_rad,free_energy_J",
                    s.phi.iter().zip(&s.free_energy_J).map(|(p, f)| format!("{},{}", num(*p), num(*f))),
                ),
            },
            Artifact {
                name: "scan_extrema.csv".into(),
                contents: csv(
                    task,
                    cfg,
                    "phi_rad,free_energy_J,kind",
                    s.extrema
                        .iter()
                        .map(|e| format!("{},{},{:?}", num(e.phi), num(e.free_energy_J), e.kind).to_lowercase()),
                ),
            },
        ],
        (TaskOutput::Validation(v), Format::Csv) => vec![
            Artifact {
                name: "validation.csv".into(),
                contents: csv(
                    task,
                    cfg,
                    "check,distance_lambda,theta_rad,phi_rad,b1,b2,numeric_J,reference_J,ratio",
                    v.rows.iter().map(|r| {
                        format!(
                            "{},{},{},{},{},{},{},{},{}",
                            r.check,
                            num(r.distance_lambda),
                            num(r.theta),
                            num(r.phi),
                            num(r.b1),
                            num(r.b2),
                            num(r.numeric_J),
                            num(r.reference_J),
                            num(r.ratio)
                        )
                    }),
                ),
            },
            Artifact {
                name: "validation_summary.csv".into(),
                contents: csv(
                    task,
                    cfg,
                    "check,passed,measured,target,tolerance",
                    v.checks.iter().map(|c| {
                        format!("{},{},{},{},{}", c.name, c.passed, num(c.measured), num(c.target), num(c.tolerance))
                    }),
                ),
            },
        ],
        // Scalar-heavy results are JSON in either format.
        (TaskOutput::ThreeBody(t), _) => vec![Artifact {
            name: "three_body.json".into(),
            contents: json(task, cfg, t),
        }],
        (TaskOutput::Energy(e), Format::Json) => vec![json_artifact("energy", task, cfg, e)],
        (TaskOutput::Force(f), Format::Json) => vec![json_artifact("force", task, cfg, f)],
        (TaskOutput::Map(m), Format::Json) => {
            let stem = if task == Task::LaplacianMap { "laplacian" } else { "map" };
            vec![json_artifact(stem, task, cfg, m)]
        }
        (TaskOutput::Scan(s), Format::Json) => vec![json_artifact("scan", task, cfg, s)],
        (TaskOutput::Validation(v), Format::Json) => vec![json_artifact("validation", task, cfg, v)],
    };
    files.push(Artifact {
        name: "resolved_config.toml".into(),
        contents: format!("# nrcasimir {VERSION}\n{}", cfg.to_toml()),
    });
    files
}

fn json_artifact<T: Serialize>(stem: &str, task: Task, cfg: &RunConfig, value: &T) -> Artifact {
    Artifact {
        name: format!("{stem}.json"),
        contents: json(task, cfg, value),
    }
}
