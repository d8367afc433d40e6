//! One runner per subcommand. Rows are computed in parallel and returned in
//! input order.

use std::path::{Path, PathBuf};

use permadyn::dicke::{
    finite_analysis, read_checkpoint, solve_lmg, state_residual, write_checkpoint, Checkpoint,
    FiniteResult, SolveInfo, SolverKind, SolverOptions,
};
use permadyn::floquet::floquet_analysis_with;
use permadyn::ground_state::ground_state_mutual_info;
use permadyn::lmg::{analytic_mutual_info, LmgParams};
use permadyn::meanfield::{find_attractor, macroscopic_analysis, MeanFieldSettings};
use permadyn::ode::Tolerances;
use permadyn::oracle::compare_with_oracle;
use permadyn::state_space::BlochVector;
use rayon::prelude::*;
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use crate::config::{Command, JobConfig};
use crate::table::{json_document, Row};

/// Rendered result and whether every row passed.
pub enum Report {
    Table(Vec<Row>),
    Document(Json),
}

pub struct RunOutput {
    pub report: Report,
    pub failures: usize,
}

pub struct Context {
    pub mem_cap_mb: Option<usize>,
    pub resume: Option<PathBuf>,
}

pub fn run(command: Command, c: &JobConfig, ctx: &Context) -> RunOutput {
    match command {
        Command::LmgTheory => lmg_theory(c),
        Command::LmgFinite => lmg_finite(c, ctx),
        Command::Ground => ground(c),
        Command::Floquet => floquet(c),
        Command::OracleCheck => oracle_check(c),
    }
}

fn params_row(p: &LmgParams) -> Row {
    let mut r = Row::default();
    r.push("coupling", p.coupling);
    r.push("field", p.field);
    r.push("collective_rate", p.collective_rate);
    r.push("local_rate", p.local_rate);
    r
}

fn settings(c: &JobConfig) -> MeanFieldSettings {
    MeanFieldSettings {
        tolerances: Tolerances::new(c.meanfield.rtol, c.meanfield.atol),
        max_time: c.meanfield.max_time,
        transient_override: c.meanfield.transient,
        ..MeanFieldSettings::default()
    }
}

fn initial(c: &JobConfig) -> BlochVector {
    BlochVector::qubit(c.initial[0], c.initial[1], c.initial[2])
}

fn table(rows: Vec<(Row, bool)>) -> RunOutput {
    let failures = rows.iter().filter(|(_, ok)| !ok).count();
    RunOutput {
        report: Report::Table(rows.into_iter().map(|(r, _)| r).collect()),
        failures,
    }
}

fn lmg_theory(c: &JobConfig) -> RunOutput {
    let s = settings(c);
    let xi0 = initial(c);
    let rows = c
        .points()
        .par_iter()
        .map(|p| {
            let mut row = params_row(p);
            row.push("gamma_ratio", p.collective_rate / p.local_rate);
            let analytic = (p.field == 0.0).then(|| analytic_mutual_info(p).ok()).flatten();
            match macroscopic_analysis(p, &xi0, &s) {
                Ok(r) => {
                    row.push("mutual_info", r.mutual_info);
                    row.push("mutual_info_analytic", analytic);
                    row.push("entropy_of_mean", r.entropy_of_mean);
                    row.push("mean_entropy", r.mean_entropy);
                    row.push("m_z", r.mean_bloch[2]);
                    row.push("m_xy", r.mean_bloch[0].hypot(r.mean_bloch[1]));
                    row.push("kind", r.report.label());
                    row.push("period", r.report.period());
                    row.push("error", None::<String>);
                    (row, true)
                }
                Err(e) => {
                    row.push("mutual_info", None::<f64>);
                    row.push("mutual_info_analytic", analytic);
                    for col in ["entropy_of_mean", "mean_entropy", "m_z", "m_xy", "kind", "period"] {
                        row.push(col, None::<f64>);
                    }
                    row.push("error", e.to_string());
                    (row, false)
                }
            }
        })
        .collect();
    table(rows)
}

fn solver_options(c: &JobConfig, mem_cap_mb: Option<usize>) -> SolverOptions {
    SolverOptions {
        tolerance: c.solver.tolerance,
        cg_target: c.solver.cg_target,
        max_iterations: c.solver.max_iterations,
        mem_cap_mb,
        matrix_free: c.solver.matrix_free,
        check_uniqueness: c.solver.check_uniqueness,
        ..SolverOptions::default()
    }
}

fn checkpoint_path(dir: &Path, p: &LmgParams, n: usize) -> PathBuf {
    let mut h = Sha256::new();
    for v in [p.coupling, p.field, p.collective_rate, p.local_rate] {
        h.update(v.to_le_bytes());
    }
    let digest = hex::encode(h.finalize());
    dir.join(format!("n{n}-{}.ckpt", &digest[..16]))
}

/// Reuses a matching checkpoint whose residual still passes, otherwise solves
/// and refreshes the checkpoint. Returns the result and whether it was reused.
fn solve_resumable(p: &LmgParams, n: usize, opts: &SolverOptions, dir: &Path) -> permadyn::Result<(FiniteResult, bool)> {
    let path = checkpoint_path(dir, p, n);
    if let Ok(saved) = read_checkpoint(&path) {
        if saved.params == *p && saved.state.n() == n {
            let residual = state_residual(p, &saved.state, opts)?;
            if residual < opts.tolerance {
                let diagonal = saved
                    .state
                    .blocks()
                    .iter()
                    .all(|b| matches!(b, permadyn::dicke::Block::Diagonal(_)));
                let info = SolveInfo {
                    kind: if diagonal { SolverKind::Diagonal } else { SolverKind::General },
                    iterations: 0,
                    residual,
                    matrix_free: false,
                };
                return Ok((FiniteResult::from_state(&saved.state, info)?, true));
            }
        }
    }
    let (state, info) = solve_lmg(p, n, opts)?;
    std::fs::create_dir_all(dir).map_err(|e| permadyn::Error::Checkpoint(e.to_string()))?;
    write_checkpoint(
        &path,
        &Checkpoint {
            params: *p,
            residual: info.residual,
            state: state.clone(),
        },
    )?;
    Ok((FiniteResult::from_state(&state, info)?, false))
}

fn lmg_finite(c: &JobConfig, ctx: &Context) -> RunOutput {
    let opts = solver_options(c, ctx.mem_cap_mb);
    let jobs: Vec<(LmgParams, usize)> = c
        .points()
        .into_iter()
        .flat_map(|p| c.n.iter().map(move |&n| (p, n)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|(p, n)| {
            let mut row = params_row(p);
            row.push("gamma_ratio", p.collective_rate / p.local_rate);
            row.push("n", *n);
            let solved = match &ctx.resume {
                Some(dir) => solve_resumable(p, *n, &opts, dir),
                None => finite_analysis(p, *n, &opts).map(|r| (r, false)),
            };
            match solved {
                Ok((r, resumed)) => {
                    let kind = match r.info.kind {
                        SolverKind::General => "general",
                        SolverKind::Diagonal => "diagonal",
                    };
                    row.push("solver", kind);
                    row.push("mutual_info", r.mutual_info);
                    row.push("total_entropy_per_unit", r.total_entropy / *n as f64);
                    row.push("local_entropy", r.local_entropy);
                    row.push("m_x", r.magnetization[0]);
                    row.push("m_y", r.magnetization[1]);
                    row.push("m_z", r.magnetization[2]);
                    row.push("m_xy", r.transverse_magnetization());
                    row.push("iterations", r.info.iterations);
                    row.push("residual", r.info.residual);
                    row.push("raw_mutual_info", r.raw_mutual_info);
                    row.push("matrix_free", r.info.matrix_free);
                    row.push("resumed", resumed);
                    row.push("error", None::<String>);
                    (row, true)
                }
                Err(e) => {
                    for col in [
                        "solver",
                        "mutual_info",
                        "total_entropy_per_unit",
                        "local_entropy",
                        "m_x",
                        "m_y",
                        "m_z",
                        "m_xy",
                        "iterations",
                        "residual",
                        "raw_mutual_info",
                        "matrix_free",
                        "resumed",
                    ] {
                        row.push(col, None::<f64>);
                    }
                    row.push("error", e.to_string());
                    (row, false)
                }
            }
        })
        .collect();
    table(rows)
}

fn ground(c: &JobConfig) -> RunOutput {
    let jobs: Vec<(LmgParams, usize)> = c
        .points()
        .into_iter()
        .flat_map(|p| c.n.iter().map(move |&n| (p, n)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|(p, n)| {
            let mut row = Row::default();
            row.push("coupling", p.coupling);
            row.push("field", p.field);
            row.push("field_ratio", p.field / p.coupling.abs());
            row.push("n", *n);
            match ground_state_mutual_info(p.coupling, p.field, *n) {
                Ok(g) => {
                    row.push("mutual_info", g.mutual_info_per_unit);
                    row.push("energy", g.energy);
                    row.push("m_x", g.magnetization[0]);
                    row.push("m_y", g.magnetization[1]);
                    row.push("m_z", g.magnetization[2]);
                    row.push("gap", g.gap);
                    row.push("error", None::<String>);
                    (row, true)
                }
                Err(e) => {
                    for col in ["mutual_info", "energy", "m_x", "m_y", "m_z", "gap"] {
                        row.push(col, None::<f64>);
                    }
                    row.push("error", e.to_string());
                    (row, false)
                }
            }
        })
        .collect();
    table(rows)
}

fn floquet(c: &JobConfig) -> RunOutput {
    let s = settings(c);
    let xi0 = initial(c);
    let reports: Vec<(Json, bool)> = c
        .points()
        .par_iter()
        .map(|p| {
            let base = json!({
                "coupling": p.coupling,
                "field": p.field,
                "collective_rate": p.collective_rate,
                "local_rate": p.local_rate,
            });
            let analysed = find_attractor(p, &xi0, &s).and_then(|r| floquet_analysis_with(p, &r, c.floquet_tolerance));
            let mut obj = base.as_object().cloned().unwrap_or_default();
            match analysed {
                Ok(f) => {
                    let multipliers: Vec<Json> = f
                        .multipliers
                        .iter()
                        .map(|m| json!({"re": m.re, "im": m.im, "modulus": m.norm()}))
                        .collect();
                    obj.insert("period".into(), json!(f.period));
                    obj.insert("multipliers".into(), Json::Array(multipliers));
                    obj.insert("unit_multiplier_error".into(), json!(f.unit_multiplier_error));
                    obj.insert("is_hyperbolic".into(), json!(f.is_hyperbolic));
                    obj.insert("is_attractive".into(), json!(f.is_attractive));
                    obj.insert("determinant".into(), json!(f.determinant));
                    obj.insert("trace_integral".into(), json!(f.trace_integral));
                    obj.insert("determinant_mismatch".into(), json!(f.determinant_mismatch()));
                    obj.insert("error".into(), Json::Null);
                    (Json::Object(obj), true)
                }
                Err(e) => {
                    obj.insert("error".into(), json!(e.to_string()));
                    (Json::Object(obj), false)
                }
            }
        })
        .collect();
    let failures = reports.iter().filter(|(_, ok)| !ok).count();
    let body = Json::Array(reports.into_iter().map(|(r, _)| r).collect());
    RunOutput {
        report: Report::Document(json_document(c, "reports", body)),
        failures,
    }
}

fn oracle_check(c: &JobConfig) -> RunOutput {
    let jobs: Vec<(LmgParams, usize)> = c
        .points()
        .into_iter()
        .flat_map(|p| c.n.iter().map(move |&n| (p, n)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|(p, n)| {
            let mut row = params_row(p);
            row.push("n", *n);
            match compare_with_oracle(p, *n) {
                Ok(cmp) => {
                    let pass = cmp.passes(c.oracle_tolerance);
                    row.push("max_state_deviation", cmp.max_state_deviation);
                    row.push("mutual_info_diff", cmp.mutual_info_diff);
                    row.push("entropy_diff", cmp.entropy_diff);
                    row.push("diagonal_deviation", cmp.diagonal_deviation);
                    row.push("oracle_mutual_info", cmp.oracle_mutual_info);
                    row.push("solver_mutual_info", cmp.solver_mutual_info);
                    row.push("pass", pass);
                    row.push("error", None::<String>);
                    (row, pass)
                }
                Err(e) => {
                    for col in [
                        "max_state_deviation",
                        "mutual_info_diff",
                        "entropy_diff",
                        "diagonal_deviation",
                        "oracle_mutual_info",
                        "solver_mutual_info",
                    ] {
                        row.push(col, None::<f64>);
                    }
                    row.push("pass", false);
                    row.push("error", e.to_string());
                    (row, false)
                }
            }
        })
        .collect();
    table(rows)
}
