//! The `solve`, `convergence`, `carleman-sweep` and `uc-lab` experiments.

use crate::config::{DataConfig, ExperimentConfig};
use crate::error::CliError;
use crate::output::{data_table, num, read_data, Sink, Table};
use nanoplate_core::discretization::{assemble, build_space_with, export_coo, SpaceOptions, SplineField, SplineSpace};
use nanoplate_core::exec::Execution;
use nanoplate_core::expr::Expr;
use nanoplate_core::field::Field;
use nanoplate_core::geometry::Domain;
use nanoplate_core::material::MaterialField;
use nanoplate_core::neumann::{synthesize, BoundaryFunction, NeumannData};
use nanoplate_core::solver::{error_modulo_affine, solve_with, Method, SolveOptions, SolveResult};
use nanoplate_core::uc_lab::battery::{carleman_battery, harmonic_battery, TestField};
use nanoplate_core::uc_lab::{
    ball_profile, caccioppoli_report, carleman_sweep, doubling_report, dyadic_radii, tau_range, three_sphere_report,
    CarlemanWeight, Operator, PolarResolution, SweepOptions,
};
use serde_json::{json, Value};
use std::sync::Arc;

const EXEC: Execution = Execution::Parallel;

fn expr(src: &str, key: &str) -> Result<Expr, CliError> {
    Expr::parse(src).map_err(|e| CliError::Config(format!("{key}: {e}")))
}

/// Boundary data and, when synthesized, the generating displacement.
pub fn build_data(
    cfg: &DataConfig,
    mat: &MaterialField,
    dom: &Domain,
) -> Result<(NeumannData, Option<Expr>), CliError> {
    Ok(match cfg {
        DataConfig::Zero => (NeumannData::zero(), None),
        DataConfig::Synthesize { u_star, samples } => {
            let u = expr(u_star, "data.u_star")?;
            (synthesize(&u, mat, dom, *samples)?, Some(u))
        }
        DataConfig::Analytic { vhat, mn_hat, mnh_hat } => (
            NeumannData {
                vhat: BoundaryFunction::Analytic(expr(vhat, "data.vhat")?),
                mn_hat: BoundaryFunction::Analytic(expr(mn_hat, "data.mn_hat")?),
                mnh_hat: BoundaryFunction::Analytic(expr(mnh_hat, "data.mnh_hat")?),
            },
            None,
        ),
        DataConfig::Csv { path } => (read_data(std::path::Path::new(path), dom)?, None),
    })
}

fn method(name: &str) -> Result<Method, CliError> {
    match name {
        "direct" => Ok(Method::Direct),
        "iterative" | "minres" => Ok(Method::Iterative),
        other => Err(CliError::Config(format!("discretization.solver: unknown method `{other}` (direct | iterative)"))),
    }
}

/// Everything a solve produces.
pub struct Solved {
    pub domain: Domain,
    pub space: Arc<SplineSpace>,
    pub data: NeumannData,
    pub exact: Option<Expr>,
    pub result: SolveResult,
    pub compatibility: [f64; 3],
    pub compatibility_tolerance: f64,
    pub k_coo: Option<String>,
}

pub fn run_solve_with(
    cfg: &ExperimentConfig,
    degree: usize,
    elements: usize,
    data_cfg: &DataConfig,
    export_matrix: bool,
) -> Result<Solved, CliError> {
    let domain = ExperimentConfig::require(&cfg.domain, "domain")?.build()?;
    let mat = ExperimentConfig::require(&cfg.material, "material")?.build()?;
    let disc = ExperimentConfig::require(&cfg.discretization, "discretization")?;
    let (data, exact) = build_data(data_cfg, &mat, &domain)?;
    let opts = SpaceOptions { quad_points: disc.quadrature_points, ..Default::default() };
    let space = Arc::new(build_space_with(&domain, degree, elements, opts).map_err(|e| match e {
        nanoplate_core::Error::InvalidDegree(_) | nanoplate_core::Error::InvalidDiscretization(_) => {
            CliError::Config(format!("discretization: {e}"))
        }
        e => e.into(),
    })?);
    let system = assemble(space.clone(), &mat, &data, EXEC)?;
    let result = solve_with(&system, &SolveOptions { method: method(&disc.solver)?, permutation: None, exec: EXEC })?;
    Ok(Solved {
        domain,
        space,
        data,
        exact,
        result,
        compatibility: system.compatibility.residuals,
        compatibility_tolerance: system.compatibility.tolerance,
        k_coo: export_matrix.then(|| export_coo(&system.k)),
    })
}

pub fn run_solve(cfg: &ExperimentConfig) -> Result<Solved, CliError> {
    let disc = ExperimentConfig::require(&cfg.discretization, "discretization")?;
    let data = ExperimentConfig::require(&cfg.data, "data")?;
    run_solve_with(cfg, disc.degree, disc.elements, data, cfg.output.export_matrix)
}

pub fn solve(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Value, CliError> {
    let s = run_solve(cfg)?;
    let r = &s.result;
    let field = SplineField { space: s.space.clone(), coefs: r.coefs.clone() };
    let n = cfg.output.grid.max(2);
    let [[x0, x1], [y0, y1]] = s.domain.bounding_box();
    let mut table = Table::new(&["x1", "x2", "u", "u1", "u2"]);
    for j in 0..n {
        for i in 0..n {
            let x = [x0 + (x1 - x0) * i as f64 / (n - 1) as f64, y0 + (y1 - y0) * j as f64 / (n - 1) as f64];
            if !s.domain.contains(x) {
                continue;
            }
            let jet = field.jet(x, 1);
            table.push(vec![num(x[0]), num(x[1]), num(jet.value()), num(jet.deriv(1, 0)), num(jet.deriv(0, 1))]);
        }
    }
    sink.csv("solution.csv", &table)?;
    if let Some(coo) = &s.k_coo {
        sink.text("stiffness.coo", coo)?;
    }
    if cfg.output.export_data {
        sink.csv("data.csv", &data_table(&s.data, &s.domain, 1024))?;
    }
    let h3_error = match &s.exact {
        Some(u) => {
            let (e, norm) = error_modulo_affine(&s.space, r.coefs.as_slice(), u, EXEC)?;
            json!({ "absolute": e, "relative": e / norm })
        }
        None => Value::Null,
    };
    let diag = json!({
        "dofs": s.space.num_dofs(),
        "degree": s.space.p,
        "elements": s.space.n_el,
        "method": format!("{:?}", r.method_used),
        "energy": r.energy,
        "load": r.load,
        "h3_norm": r.h3_norm,
        "multipliers": r.multipliers,
        "constraint_residual": r.constraint_residual,
        "galerkin_residual": r.galerkin_residual,
        "stability_ratio": r.stability_ratio,
        "compatibility_residuals": s.compatibility,
        "compatibility_tolerance": s.compatibility_tolerance,
        "h3_error_modulo_affine": h3_error,
    });
    sink.json("diagnostics.json", diag.clone())?;
    Ok(diag)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn convergence(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Value, CliError> {
    let conv = ExperimentConfig::require(&cfg.convergence, "convergence")?;
    let disc = ExperimentConfig::require(&cfg.discretization, "discretization")?;
    let data = ExperimentConfig::require(&cfg.data, "data")?;
    if !matches!(data, DataConfig::Synthesize { .. }) {
        return Err(CliError::Config("convergence needs data.source = \"synthesize\" to know the exact field".into()));
    }
    if conv.elements.len() < 2 {
        return Err(CliError::Config("convergence.elements needs at least two entries".into()));
    }
    let p = conv.degree.unwrap_or(disc.degree);
    let mut table = Table::new(&["elements", "h", "dofs", "h3_seminorm_error", "relative_h3_error"]);
    let (mut hs, mut errs) = (Vec::new(), Vec::new());
    for &n_el in &conv.elements {
        let s = run_solve_with(cfg, p, n_el, data, false)?;
        let exact = s.exact.as_ref().expect("synthesized data keeps its field");
        let semi = s.space.error_norms(s.result.coefs.as_slice(), exact, EXEC)?[3].sqrt();
        let (e, norm) = error_modulo_affine(&s.space, s.result.coefs.as_slice(), exact, EXEC)?;
        let h = (s.space.kx.breakpoint(1) - s.space.kx.breakpoint(0)).abs();
        table.push(vec![n_el.to_string(), num(h), s.space.num_dofs().to_string(), num(semi), num(e / norm)]);
        hs.push(h);
        errs.push(semi);
    }
    sink.csv("convergence.csv", &table)?;
    let slope = log_slope(&hs, &errs);
    let required = p as f64 - 2.0 - 0.3;
    let summary = json!({
        "degree": p,
        "elements": conv.elements,
        "h3_seminorm_errors": errs,
        "slope": slope,
        "required_slope": required,
        "passed": slope >= required,
    });
    sink.json("convergence.json", summary.clone())?;
    Ok(summary)
}

fn default_epsilon(order: u32) -> f64 {
    if order == 3 {
        0.2
    } else {
        0.5
    }
}

pub fn carleman(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Value, CliError> {
    let c = cfg.carleman.clone().unwrap_or_else(|| toml::from_str("").expect("all carleman keys have defaults"));
    if c.tau_count == 0 || !(c.tau_min > 0.0 && c.tau_max >= c.tau_min) {
        return Err(CliError::Config("carleman: need 0 < tau_min <= tau_max and tau_count >= 1".into()));
    }
    let taus = tau_range(c.tau_min, c.tau_max, c.tau_count);
    let battery = carleman_battery(c.r1, cfg.seed());
    let mut table = Table::new(&["order", "epsilon", "field", "tau", "lhs", "rhs", "ratio"]);
    let mut orders = Vec::new();
    for &order in &c.orders {
        let op = Operator::from_order(order).map_err(|e| CliError::Config(format!("carleman.orders: {e}")))?;
        let eps = c.epsilon.unwrap_or(default_epsilon(order));
        let w = CarlemanWeight::new(eps).map_err(|e| CliError::Config(format!("carleman.epsilon: {e}")))?;
        let opts =
            SweepOptions { outer_radius: c.r1, doubling_radius: c.doubling_radius, exec: EXEC, ..Default::default() };
        let mut fields = Vec::new();
        let mut constant = 0.0f64;
        let mut worst_change = 0.0f64;
        for f in &battery {
            let support = f.support.expect("Carleman battery fields are compactly supported");
            let rep = carleman_sweep(op, f.field.as_ref(), &support, &w, &taus, &opts)?;
            for row in &rep.rows {
                table.push(vec![
                    order.to_string(),
                    num(eps),
                    f.name.clone(),
                    num(row.tau),
                    num(row.lhs),
                    num(row.rhs),
                    num(row.ratio),
                ]);
            }
            constant = constant.max(rep.constant);
            worst_change = worst_change.max(rep.quadrature_change);
            fields
                .push(json!({ "field": f.name, "constant": rep.constant, "quadrature_change": rep.quadrature_change }));
        }
        orders.push(json!({
            "order": order,
            "epsilon": eps,
            "constant": constant,
            "quadrature_change": worst_change,
            "finite": constant.is_finite(),
            "fields": fields,
        }));
    }
    sink.csv("carleman.csv", &table)?;
    let summary = json!({ "taus": taus, "r1": c.r1, "doubling_radius": c.doubling_radius, "orders": orders });
    sink.json("carleman.json", summary.clone())?;
    Ok(summary)
}

/// Harmonic battery plus the discrete solutions for the configured fields.
pub fn uc_fields(cfg: &ExperimentConfig, solver_fields: &[String]) -> Result<Vec<TestField>, CliError> {
    let mut fields = harmonic_battery();
    for (k, src) in solver_fields.iter().enumerate() {
        let data = DataConfig::Synthesize { u_star: src.clone(), samples: 1024 };
        let disc = ExperimentConfig::require(&cfg.discretization, "discretization")?;
        let s = run_solve_with(cfg, disc.degree, disc.elements, &data, false).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("uc_lab.solver_fields[{k}]: {m}")),
            e => e,
        })?;
        fields.push(TestField {
            name: format!("solution of {src}"),
            field: Box::new(SplineField { space: s.space, coefs: s.result.coefs }),
            support: None,
        });
    }
    Ok(fields)
}

pub fn uc_lab(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Value, CliError> {
    let c = cfg.uc_lab.clone().unwrap_or_else(|| toml::from_str("").expect("all uc_lab keys have defaults"));
    if c.levels < 10 {
        return Err(CliError::Config("uc_lab.levels must be at least 10 (three-sphere radii R1/2^10, R1/2^9)".into()));
    }
    let limit = match &cfg.domain {
        Some(d) if !c.solver_fields.is_empty() => d.build()?.inradius_at_origin(),
        _ => f64::INFINITY,
    };
    let fields = uc_fields(cfg, &c.solver_fields)?;
    let radii = dyadic_radii(c.r1, c.levels);
    let res = PolarResolution::new(2, 8, 64);
    let mut table = Table::new(&["field", "r", "l2", "doubling_ratio", "N", "C_cert"]);
    let mut out = Vec::new();
    for f in &fields {
        let prof = ball_profile(f.field.as_ref(), &radii, limit, res, EXEC)?;
        let d = doubling_report(&prof, c.r1)?;
        let t = three_sphere_report(&prof, c.r1 / 1024.0, c.r1 / 512.0, c.r1)?;
        let cacc = caccioppoli_report(f.field.as_ref(), c.caccioppoli_radius, res, EXEC)?;
        for (i, &r) in prof.radii.iter().enumerate() {
            let row = d.rows.iter().find(|row| row.r == r);
            table.push(vec![
                f.name.clone(),
                num(r),
                num(prof.l2[i]),
                row.map(|x| num(x.ratio)).unwrap_or_default(),
                num(d.frequency),
                row.map(|x| num(x.c_cert)).unwrap_or_default(),
            ]);
        }
        out.push(json!({
            "field": f.name,
            "frequency": d.frequency,
            "doubling_ratios": d.rows.iter().map(|r| r.ratio).collect::<Vec<_>>(),
            "certified_c": d.certified_c,
            "three_sphere": { "r": c.r1 / 1024.0, "s": c.r1 / 512.0, "theta": t.theta, "lhs": t.lhs, "rhs": t.rhs, "c_cert": t.c_cert },
            "caccioppoli": { "radius": c.caccioppoli_radius, "ratios": cacc },
            "finite": d.certified_c.is_finite() && t.c_cert.is_finite(),
        }));
    }
    sink.csv("uc_lab.csv", &table)?;
    let summary = json!({ "r1": c.r1, "doubling_exponent": nanoplate_core::uc_lab::DOUBLING_EXPONENT, "fields": out });
    sink.json("uc_lab.json", summary.clone())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_slope_of_a_power_law() {
        let h = [0.5, 0.25, 0.125];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powi(4)).collect();
        assert!((log_slope(&h, &e) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn trilaplace_defaults_to_one_fifth() {
        assert_eq!(default_epsilon(3), 0.2);
        assert_eq!(default_epsilon(1), 0.5);
    }
}
