//! Deterministic invariant suite behind `nanoplate verify`.

use crate::error::CliError;
use crate::output::{num, Sink, Table};
use nalgebra::DMatrix;
use nanoplate_core::discretization::{
    assemble, bilinear_form, build_space, build_space_with, AssembledSystem, SpaceOptions, SplineField,
};
use nanoplate_core::exec::Execution;
use nanoplate_core::expr::Expr;
use nanoplate_core::field::HarmonicPower;
use nanoplate_core::geometry::{hessian_from_local, hessian_from_local_transposed, surface_derivatives, Domain};
use nanoplate_core::material::{
    apply4, apply6, convexity_probe, couple_mh, eval_coefficients, eval_tensors, frob2, frob3, sym3, tensor_norm,
    MaterialField, Sym2, Tensor3,
};
use nanoplate_core::neumann::{compatibility_check, load_functional, synthesize};
use nanoplate_core::solver::{error_modulo_affine, remove_affine, solve, solve_with, SolveOptions};
use nanoplate_core::uc_lab::battery::{
    carleman_battery, harmonic_battery, identity_battery, reduction_battery, TestField,
};
use nanoplate_core::uc_lab::{
    ball_profile, carleman_sweep, doubling_report, dyadic_radii, identity_check, reduction_check_fields,
    three_sphere_exponent, three_sphere_report, CarlemanWeight, Identity, Operator, PolarResolution, SweepOptions,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::f64::consts::PI;
use std::sync::Arc;

type Outcome = nanoplate_core::Result<()>;

#[derive(Clone, Debug)]
pub struct Check {
    pub module: &'static str,
    pub property: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Default)]
pub struct Suite {
    pub checks: Vec<Check>,
}

impl Suite {
    /// Records `value <= tolerance`; NaN fails.
    fn at_most(&mut self, module: &'static str, property: impl Into<String>, value: f64, tolerance: f64) {
        let passed = value <= tolerance;
        self.checks.push(Check { module, property: property.into(), value, tolerance, passed });
    }

    /// Records `value >= bound`; NaN fails.
    fn at_least(&mut self, module: &'static str, property: impl Into<String>, value: f64, bound: f64) {
        let passed = value >= bound;
        self.checks.push(Check { module, property: property.into(), value, tolerance: bound, passed });
    }

    fn section(&mut self, module: &'static str, name: &str, run: impl FnOnce(&mut Suite) -> Outcome) {
        if let Err(e) = run(self) {
            self.checks.push(Check {
                module,
                property: format!("{name}: {e}"),
                value: f64::NAN,
                tolerance: 0.0,
                passed: false,
            });
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn exec() -> Execution {
    Execution::best()
}

fn unit_material() -> MaterialField {
    MaterialField::constant(1.0, 1.0, 1.0, [1.0; 3])
}

fn random_material(rng: &mut ChaCha8Rng) -> MaterialField {
    let mu = rng.random_range(0.1..10.0);
    let mut m = MaterialField::constant(
        mu,
        rng.random_range(-0.6..5.0) * mu,
        rng.random_range(0.1..3.0),
        [rng.random_range(0.1..2.0), rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)],
    );
    m.q9_share = rng.random_range(0.0..1.0);
    m
}

fn random_sym2(rng: &mut ChaCha8Rng) -> Sym2 {
    let (a, b, c) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    [[a, b], [b, c]]
}

fn random_sym3(rng: &mut ChaCha8Rng) -> Tensor3 {
    sym3(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    )
}

const M: &str = "material";

pub fn tensor_algebra(s: &mut Suite, seed: u64) {
    s.section(M, "tensor symmetry", |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut p, mut ph, mut q) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..100 {
            let ts = eval_tensors(&eval_coefficients(&random_material(&mut rng), [0.0, 0.0])?);
            let (a, b) = (random_sym2(&mut rng), random_sym2(&mut rng));
            let (x, y) = (random_sym3(&mut rng), random_sym3(&mut rng));
            let n2 = frob2(&a, &a).sqrt() * frob2(&b, &b).sqrt();
            let n3 = frob3(&x, &x).sqrt() * frob3(&y, &y).sqrt();
            let gap4 = |t| (frob2(&apply4(t, &a), &b) - frob2(&apply4(t, &b), &a)).abs() / (tensor_norm(t) * n2);
            p = p.max(gap4(&ts.p));
            ph = ph.max(gap4(&ts.ph));
            q = q
                .max((frob3(&apply6(&ts.q, &x), &y) - frob3(&apply6(&ts.q, &y), &x)).abs() / (tensor_norm(&ts.q) * n3));
        }
        s.at_most(M, "bending stiffness symmetric on 100 random pairs", p, 1e-12);
        s.at_most(M, "higher bending stiffness symmetric on 100 random pairs", ph, 1e-12);
        s.at_most(M, "sixth-order stiffness symmetric on 100 random pairs", q, 1e-12);
        Ok(())
    });
    s.section(M, "constitutive equivalence", |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let (mut gap, mut constraint) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            let c = eval_coefficients(&random_material(&mut rng), [0.0, 0.0])?;
            constraint = constraint.max((2.0 * (c.q8 + 2.0 * c.q9) - 5.0 * c.b1).abs() / c.b1);
            let ts = eval_tensors(&c);
            let x = random_sym3(&mut rng);
            let (direct, formula) = (apply6(&ts.q, &x), couple_mh(&ts, &x));
            let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in direct.iter().zip(&formula) {
                gap = gap.max((a - b).abs() / scale);
            }
        }
        s.at_most(M, "split constraint 2(Q8+2Q9) = 5 b1", constraint, 1e-14);
        s.at_most(M, "closed-form higher couple equals tensor contraction", gap, 1e-12);
        Ok(())
    });
}

pub fn convexity(s: &mut Suite, seed: u64) {
    s.section(M, "convexity probe", |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let (mut least, mut drift) = (f64::INFINITY, 0.0f64);
        for k in 0..20 {
            let c = eval_coefficients(&random_material(&mut rng), [0.0, 0.0])?;
            let (p0, q0) = convexity_probe(&eval_tensors(&c.with_split(0.0)), 400, seed + k, exec())?;
            let (p1, q1) = convexity_probe(&eval_tensors(&c.with_split(0.8)), 400, seed + k, exec())?;
            least = least.min(p0.min(q0));
            drift = drift.max(((p0 - p1) / p0).abs()).max(((q0 - q1) / q0).abs());
        }
        s.at_least(M, "probe estimates positive for 20 random materials (min)", least, f64::MIN_POSITIVE);
        s.at_most(M, "probe invariant under Q8/Q9 resplit", drift, 1e-12);
        Ok(())
    });
}

pub fn geometry(s: &mut Suite, seed: u64) {
    const G: &str = "geometry";
    s.section(G, "frames", |s| {
        for (name, dom) in
            [("disk", Domain::disk(1.3)?), ("rounded rectangle", Domain::rounded_rectangle(2.0, 1.0, 0.2)?)]
        {
            let (mut ortho, mut frenet) = (0.0f64, 0.0f64);
            let h = 1e-6;
            let off = dom.segment_offsets().to_vec();
            for i in 0..1000 {
                let sv = dom.perimeter() * (i as f64 + 0.5) / 1000.0;
                let f = dom.frame_wrapped(sv);
                ortho = ortho
                    .max((f.n[0].hypot(f.n[1]) - 1.0).abs())
                    .max((f.tau[0].hypot(f.tau[1]) - 1.0).abs())
                    .max((f.n[0] * f.tau[0] + f.n[1] * f.tau[1]).abs())
                    .max((f.tau[0] + f.n[1]).abs().max((f.tau[1] - f.n[0]).abs()));
                if off.iter().chain([dom.perimeter()].iter()).any(|o| (o - sv).abs() < 10.0 * h) {
                    continue;
                }
                let (a, b) = (dom.frame_wrapped(sv + h), dom.frame_wrapped(sv - h));
                for k in 0..2 {
                    frenet = frenet
                        .max(((a.n[k] - b.n[k]) / (2.0 * h) - f.n_s()[k]).abs())
                        .max(((a.tau[k] - b.tau[k]) / (2.0 * h) - f.tau_s()[k]).abs());
                }
            }
            s.at_most(G, format!("{name}: frame orthonormal and counterclockwise at 1000 points"), ortho, 1e-12);
            s.at_most(G, format!("{name}: Frenet relations by finite differences"), frenet, 1e-8);
        }
        Ok(())
    });
    s.section(G, "hessian round trip", |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let dom = Domain::disk(0.7)?;
        let (mut a_gap, mut b_gap) = (0.0f64, 0.0f64);
        for _ in 0..200 {
            let f = dom.frame_wrapped(rng.random_range(0.0..dom.perimeter()));
            let g = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let h = random_sym2(&mut rng);
            let d = surface_derivatives(g, h, &f);
            let (a, b) = (hessian_from_local(&d, &f), hessian_from_local_transposed(&d, &f));
            let scale = 1.0 + frob2(&h, &h).sqrt();
            for i in 0..2 {
                for j in 0..2 {
                    a_gap = a_gap.max((a[i][j] - h[i][j]).abs() / scale);
                    b_gap = b_gap.max((b[i][j] - h[i][j]).abs() / scale);
                }
            }
        }
        s.at_most(G, "hessian round trip through local derivatives", a_gap, 1e-10);
        s.at_most(G, "hessian round trip in transposed form", b_gap, 1e-10);
        Ok(())
    });
    s.section(G, "perimeter", |s| {
        for r in [0.5, 1.0, 3.0] {
            let p = Domain::disk(r)?.perimeter_by_quadrature();
            s.at_most(
                G,
                format!("perimeter of disk({r}) by arclength quadrature"),
                (p / (2.0 * PI * r) - 1.0).abs(),
                1e-8,
            );
        }
        Ok(())
    });
}

pub fn neumann(s: &mut Suite) {
    const N: &str = "neumann_data";
    s.section(N, "closed forms", |s| {
        // symbolic boundary data of x1^3 on the unit disk, unit material
        let dom = Domain::disk(1.0)?;
        let data = synthesize(&Expr::parse("x1^3")?, &unit_material(), &dom, 1024)?;
        let mut gap = 0.0f64;
        for i in 0..64 {
            let t = 2.0 * PI * i as f64 / 64.0;
            let (c, s2) = (t.cos(), t.sin().powi(2));
            let exact =
                [(810.0 * s2 + 89.0) * c / 15.0, 22.0 * (15.0 * s2 - 17.0) * c / 15.0, (5.0 * s2 - 7.0) * c / 5.0];
            let got = data.eval(&dom.frame_wrapped(t));
            for k in 0..3 {
                gap = gap.max((got[k] - exact[k]).abs());
            }
        }
        s.at_most(N, "synthesized data of x1^3 match symbolic closed forms", gap, 1e-10);
        Ok(())
    });
    s.section(N, "compatibility", |s| {
        let dom = Domain::disk(1.0)?;
        for u in ["x1^3", "x2^3", "x1^2*x2", "x1^3 - 3*x1*x2^2", "exp(x1)*cos(x2)"] {
            let data = synthesize(&Expr::parse(u)?, &unit_material(), &dom, 1024)?;
            let rep = compatibility_check(&data, &dom);
            let worst = rep.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            s.at_most(N, format!("synthesized data of {u} compatible"), worst, rep.tolerance);
        }
        Ok(())
    });
    s.section(N, "green identity", |s| {
        let dom = Domain::disk(1.0)?;
        let mat = MaterialField::constant(1.3, 0.4, 0.8, [0.9, 0.6, 1.1]);
        let space = build_space(&dom, 4, 6)?;
        let u = Expr::parse("x1^3 - 3*x1*x2^2 + 2*x1^2*x2")?;
        let data = synthesize(&u, &mat, &dom, 1024)?;
        let mut gap = 0.0f64;
        for w in ["x1^3", "x1*x2^2 - x2^4", "x1^4*x2 + x2^2"] {
            let w = Expr::parse(w)?;
            let a = bilinear_form(&space, &mat, &u, &w, exec())?;
            let l = load_functional(&data, &w, &space.boundary);
            let scale =
                (bilinear_form(&space, &mat, &u, &u, exec())? * bilinear_form(&space, &mat, &w, &w, exec())?).sqrt();
            gap = gap.max((a - l).abs() / scale);
        }
        s.at_most(N, "a(u; w) equals boundary load of synthesized data", gap, 1e-7);
        Ok(())
    });
}

fn dense_k(sys: &AssembledSystem) -> DMatrix<f64> {
    let n = sys.n();
    let mut k = DMatrix::zeros(n, n);
    for (i, j, v) in sys.k.triplet_iter() {
        k[(i, j)] += *v;
    }
    k
}

/// Smallest eigenvalue of `K` on `{C u = 0}`, relative to `‖K‖`.
fn constrained_min_eig(sys: &AssembledSystem) -> f64 {
    let k = dense_k(sys);
    let svd = sys.c.transpose().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let n = k.nrows();
    // columns 3.. of a full orthonormal completion span the null space of C
    let mut basis = DMatrix::<f64>::identity(n, n);
    basis.view_mut((0, 0), (n, 3)).copy_from(&u.columns(0, 3));
    let q = basis.qr().q();
    let z = q.columns(3, n - 3).into_owned();
    let reduced = z.transpose() * &k * &z;
    let eig = reduced.symmetric_eigen().eigenvalues;
    eig.min() / sys.k_norm()
}

fn disk_system(u: &str, p: usize, n_el: usize) -> nanoplate_core::Result<AssembledSystem> {
    let dom = Domain::disk(1.0)?;
    let space = Arc::new(build_space(&dom, p, n_el)?);
    let data = synthesize(&Expr::parse(u)?, &unit_material(), &dom, 1024)?;
    assemble(space, &unit_material(), &data, exec())
}

const D: &str = "discretization";

pub fn kernel(s: &mut Suite) {
    s.section(D, "kernel", |s| {
        for (name, dom) in [("square", Domain::rectangle(1.0, 1.0)?), ("disk", Domain::disk(1.0)?)] {
            let space = Arc::new(build_space(&dom, 4, 6)?);
            let sys = assemble(space.clone(), &unit_material(), &nanoplate_core::neumann::NeumannData::zero(), exec())?;
            s.at_most(D, format!("{name}: stiffness symmetric"), sys.asymmetry() / sys.k_norm(), 1e-12);
            let mut worst = 0.0f64;
            for c in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                let a = space.affine_coefficients(c).expect("fitted or immersed space");
                worst = worst.max(sys.apply_k(&a).amax() / sys.k_norm());
            }
            s.at_most(D, format!("{name}: stiffness annihilates affines"), worst, 1e-10);
        }
        Ok(())
    });
}

pub fn discretization(s: &mut Suite) {
    s.section(D, "coercivity", |s| {
        let dom = Domain::rectangle(1.0, 1.0)?;
        let zero = nanoplate_core::neumann::NeumannData::zero();
        let mut c = Vec::new();
        for n_el in [2, 4] {
            let sys = assemble(Arc::new(build_space(&dom, 3, n_el)?), &unit_material(), &zero, exec())?;
            c.push(constrained_min_eig(&sys));
        }
        s.at_least(D, "constrained minimum eigenvalue positive (n_el = 2)", c[0], 1e-14);
        s.at_least(D, "constrained minimum eigenvalue positive (n_el = 4)", c[1], 1e-14);
        s.at_least(D, "constrained minimum eigenvalue ratio under halving h", c[1] / c[0], 2f64.powi(-6));
        Ok(())
    });
    s.section(D, "quadrature", |s| {
        for (name, dom) in [("square", Domain::rectangle(1.0, 1.0)?), ("disk", Domain::disk(1.0)?)] {
            let zero = nanoplate_core::neumann::NeumannData::zero();
            let base = assemble(Arc::new(build_space(&dom, 4, 4)?), &unit_material(), &zero, exec())?;
            let opts = SpaceOptions { quad_points: Some(8), cut_extra: 2 };
            let fine = assemble(Arc::new(build_space_with(&dom, 4, 4, opts)?), &unit_material(), &zero, exec())?;
            let gap = (dense_k(&base) - dense_k(&fine)).amax() / base.k_norm();
            s.at_most(D, format!("{name}: stiffness stable when quadrature order rises by 2"), gap, 1e-10);
        }
        Ok(())
    });
}

const S: &str = "solver";

pub fn recovery(s: &mut Suite) {
    s.section(S, "manufactured recovery", |s| {
        for u in ["x1^3", "x2^3", "x1^2*x2", "x1^3 - 3*x1*x2^2"] {
            let sys = disk_system(u, 4, 8)?;
            let r = solve(&sys)?;
            let (e, norm) = error_modulo_affine(&sys.space, r.coefs.as_slice(), &Expr::parse(u)?, exec())?;
            s.at_most(S, format!("recovers {u} modulo affines (p = 4 n_el = 8) relative H3"), e / norm, 1e-6);
            s.at_most(S, format!("{u}: Galerkin orthogonality"), r.galerkin_residual, 1e-9);
            s.at_most(S, format!("{u}: energy equals load"), ((r.energy - r.load) / r.energy).abs(), 1e-9);
        }
        Ok(())
    });
}

pub fn uniqueness(s: &mut Suite) {
    s.section(S, "uniqueness", |s| {
        let sys = disk_system("exp(x1)*cos(x2)", 4, 6)?;
        let n = sys.n();
        let a = solve(&sys)?;
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let b = solve_with(&sys, &SolveOptions { permutation: Some(perm), ..Default::default() })?;
        let (pa, pb) = (remove_affine(&sys.space, &a.coefs, exec())?, remove_affine(&sys.space, &b.coefs, exec())?);
        s.at_most(S, "permuted solve agrees after affine projection", (&pa - &pb).amax() / pa.amax(), 1e-10);
        Ok(())
    });
}

pub fn convergence(s: &mut Suite) {
    s.section(S, "convergence", |s| {
        let u = Expr::parse("exp(x1)*cos(x2)")?;
        let (mut hs, mut es) = (Vec::new(), Vec::new());
        for n_el in [4, 8, 16, 32] {
            let sys = disk_system("exp(x1)*cos(x2)", 5, n_el)?;
            let r = solve(&sys)?;
            es.push(sys.space.error_norms(r.coefs.as_slice(), &u, exec())?[3].sqrt());
            hs.push(2.0 / n_el as f64);
        }
        let slope = crate::commands::log_slope(&hs, &es);
        s.at_least(S, "H3-seminorm rate for exp(x1)cos(x2) at p = 5 over n_el = 4..32", slope, 5.0 - 2.0 - 0.3);
        Ok(())
    });
}

const U: &str = "uc_lab";

pub fn weights(s: &mut Suite, seed: u64) {
    s.section(U, "weight bounds", |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        for eps in [0.2, 0.25, 0.5] {
            let w = CarlemanWeight::new(eps)?;
            let mut bad = 0usize;
            for _ in 0..10_000 {
                let (r, th) = (rng.random_range(0.0..1.0), rng.random_range(0.0..2.0 * PI));
                let x = [r * th.cos(), r * th.sin()];
                let (lo, hi) = w.bounds(x);
                let rho = w.rho(x);
                if !(lo <= rho && rho <= hi) {
                    bad += 1;
                }
            }
            s.at_most(U, format!("weight bounds at 10^4 random points for epsilon = {eps}"), bad as f64, 0.0);
        }
        Ok(())
    });
}

pub fn identities(s: &mut Suite, seed: u64) {
    s.section(U, "identities", |s| {
        let mut worst = [0.0f64; 3];
        for pair in identity_battery(20, seed) {
            let support = pair.u.support.expect("identity battery fields are compactly supported");
            for (k, which) in [Identity::First, Identity::Second, Identity::Third].into_iter().enumerate() {
                let r = identity_check(
                    which,
                    pair.u.field.as_ref(),
                    &support,
                    pair.zeta.as_ref(),
                    PolarResolution::new(24, 10, 64),
                    exec(),
                )?;
                worst[k] = worst[k].max(r.gap);
            }
        }
        for (k, w) in worst.iter().enumerate() {
            s.at_most(U, format!("integration-by-parts identity {} on 20 pairs", k + 1), *w, 1e-7);
        }
        Ok(())
    });
}

pub fn reduction(s: &mut Suite, seed: u64) {
    s.section(U, "reduction", |s| {
        let pts = [[0.1, -0.2], [0.3, 0.4], [-0.5, 0.05]];
        let (mut gap, mut fifth) = (0.0f64, 0.0f64);
        for case in reduction_battery(10, seed) {
            let r = reduction_check_fields(&case.u, &case.b0, &case.b1, &pts)?;
            gap = gap.max(r.gap);
            fifth = fifth.max(r.fifth_gap);
        }
        s.at_most(U, "sixth-order regrouping on 10 degree-6 polynomials", gap, 1e-6);
        s.at_most(U, "fifth-order regrouping on 10 degree-6 polynomials", fifth, 1e-6);
        let r = reduction_check_fields(&Expr::parse("x1^5")?, &Expr::constant(0.7), &Expr::parse("1 + 2*x1")?, &pts)?;
        let miss = r.points.iter().map(|p| (p.fifth_coefficient[0] - 12.0).abs() + p.fifth_coefficient[1].abs()).sum();
        s.at_most(U, "fifth-order coefficient of x1^5 with b1 = 1 + 2 x1 is exactly (12; 0)", miss, 0.0);
        Ok(())
    });
}

pub fn carleman(s: &mut Suite, seed: u64) {
    s.section(U, "carleman", |s| {
        let taus = nanoplate_core::uc_lab::tau_range(8.0, 32.0, 7);
        let battery = carleman_battery(0.5, seed);
        for (op, eps) in [(Operator::Laplace, 0.5), (Operator::Bilaplace, 0.5), (Operator::Trilaplace, 0.2)] {
            let w = CarlemanWeight::new(eps)?;
            let opts = SweepOptions { outer_radius: 0.5, exec: exec(), ..Default::default() };
            let (mut constant, mut change) = (0.0f64, 0.0f64);
            for f in &battery {
                let rep = carleman_sweep(
                    op,
                    f.field.as_ref(),
                    f.support.as_ref().expect("compact support"),
                    &w,
                    &taus,
                    &opts,
                )?;
                constant = constant.max(rep.constant);
                change = change.max(rep.quadrature_change);
            }
            let name = format!("order {}", op.order());
            s.at_most(U, format!("Carleman {name}: empirical constant finite"), constant, f64::MAX);
            s.at_most(U, format!("Carleman {name}: constant change under quadrature refinement"), change, 0.05);
        }
        Ok(())
    });
}

pub fn doubling(s: &mut Suite) {
    s.section(U, "doubling", |s| {
        let r1 = 0.5;
        let radii = dyadic_radii(r1, 12);
        let res = PolarResolution::new(2, 8, 64);
        let mut fields = harmonic_battery();
        for u in ["x1^3", "exp(x1)*cos(x2)"] {
            let sys = disk_system(u, 4, 8)?;
            let coefs = solve(&sys)?.coefs;
            fields.push(TestField {
                name: format!("solution of {u}"),
                field: Box::new(SplineField { space: sys.space.clone(), coefs }),
                support: None,
            });
        }
        for f in &fields {
            let limit = if f.name.starts_with("solution") { 1.0 } else { f64::INFINITY };
            let prof = ball_profile(f.field.as_ref(), &radii, limit, res, exec())?;
            let d = doubling_report(&prof, r1)?;
            let t = three_sphere_report(&prof, r1 / 1024.0, r1 / 512.0, r1)?;
            s.at_most(U, format!("{}: doubling constant certified finite", f.name), d.certified_c, f64::MAX);
            s.at_most(U, format!("{}: three-sphere constant certified finite", f.name), t.c_cert, f64::MAX);
        }
        for (name, m, exact) in
            [("1", 0u32, 4.0), ("x1", 1, 16.0), ("Re z^2", 2, 64.0), ("Re z^3", 3, 256.0), ("Re z^4", 4, 1024.0)]
        {
            let prof = ball_profile(&HarmonicPower { m }, &radii, f64::INFINITY, res, exec())?;
            let d = doubling_report(&prof, r1)?;
            let worst = d.rows.iter().map(|r| (r.ratio / exact - 1.0).abs()).fold(0.0f64, f64::max);
            s.at_most(U, format!("doubling ratio of {name} equals {exact}"), worst, 1e-7);
        }
        s.at_most(
            U,
            "three-sphere exponent at s = 2r is 1/17",
            (three_sphere_exponent(2.0, 1.0) - 1.0 / 17.0).abs(),
            0.0,
        );
        Ok(())
    });
}

/// Runs every module's invariants in a fixed order.
pub fn run_suite(seed: u64) -> Suite {
    let mut s = Suite::default();
    tensor_algebra(&mut s, seed);
    convexity(&mut s, seed);
    geometry(&mut s, seed);
    neumann(&mut s);
    kernel(&mut s);
    discretization(&mut s);
    recovery(&mut s);
    uniqueness(&mut s);
    convergence(&mut s);
    weights(&mut s, seed);
    identities(&mut s, seed);
    reduction(&mut s, seed);
    carleman(&mut s, seed);
    doubling(&mut s);
    s
}

pub fn verify(seed: u64, sink: &mut Sink) -> Result<Suite, CliError> {
    let suite = run_suite(seed);
    let mut table = Table::new(&["module", "property", "value", "tolerance", "passed"]);
    for c in &suite.checks {
        table.push(vec![c.module.into(), c.property.clone(), num(c.value), num(c.tolerance), c.passed.to_string()]);
    }
    sink.csv("verify.csv", &table)?;
    let failures: Vec<_> = suite.failures().map(|c| json!({ "module": c.module, "property": c.property })).collect();
    sink.json(
        "verify.json",
        json!({ "seed": seed, "checks": suite.checks.len(), "failed": failures.len(), "failures": failures }),
    )?;
    Ok(suite)
}
