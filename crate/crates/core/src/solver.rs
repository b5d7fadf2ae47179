//! Constrained solve of the discrete Neumann problem and its well-posedness
//! diagnostics.
//!
//! The saddle system `[K Cᵀ; C 0]` is solved through the positive definite
//! matrix `A = K + GᵀG`, where `G` evaluates a field at three interior
//! points. With `v = A⁻¹F`, `X = A⁻¹Cᵀ`, `Y = A⁻¹Gᵀ` and `μ = Gu` the
//! unknowns reduce to the 6×6 system
//!
//! ```text
//! [ CX  -CY  ] [λ]   [Cv]
//! [ GX  I-GY ] [μ] = [Gv],      u = v - Xλ + Yμ.
//! ```

use crate::discretization::{AssembledSystem, SplineSpace};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::expr::Expr;
use crate::field::{Field, PlusAffine};
use crate::neumann::NeumannData;
use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    /// Sparse Cholesky of `K + GᵀG`, falling back to MINRES on failure.
    #[default]
    Direct,
    /// MINRES on the full saddle system.
    Iterative,
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub method: Method,
    /// Renumbering of the unknowns before factorization: entry `i` is the
    /// new position of unknown `i`.
    pub permutation: Option<Vec<usize>>,
    pub exec: Execution,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub coefs: DVector<f64>,
    pub multipliers: [f64; 3],
    /// `a(u, u)`.
    pub energy: f64,
    /// `L̃(u)`.
    pub load: f64,
    /// Size-weighted H³ norm.
    pub h3_norm: f64,
    /// Largest relative normalization residual.
    pub constraint_residual: f64,
    /// `|Ku + Cᵀλ - F|∞` relative to `|K|·|u| + |F|`.
    pub galerkin_residual: f64,
    /// `h3_norm / data norm`, absent for zero data.
    pub stability_ratio: Option<f64>,
    pub method_used: Method,
}

impl SolveResult {
    pub fn residual(&self) -> f64 {
        self.constraint_residual.max(self.galerkin_residual)
    }
}

/// Solves the assembled system with the default options.
pub fn solve(system: &AssembledSystem) -> Result<SolveResult> {
    solve_with(system, &SolveOptions::default())
}

pub fn solve_with(system: &AssembledSystem, opts: &SolveOptions) -> Result<SolveResult> {
    if !system.compatibility.passed {
        return Err(Error::IncompatibleData {
            residuals: system.compatibility.residuals,
            tolerance: system.compatibility.tolerance,
        });
    }
    let n = system.n();
    let (k, c, f) = match &opts.permutation {
        Some(perm) => {
            check_permutation(perm, n)?;
            permute_system(system, perm)
        }
        None => (system.k.clone(), system.c.clone(), system.f.clone()),
    };
    let g = match &opts.permutation {
        Some(perm) => permute_columns(&point_rows(&system.space, &k)?, perm),
        None => point_rows(&system.space, &k)?,
    };
    let (u, lambda, method_used) = match opts.method {
        Method::Direct => match direct(&k, &c, &g, &f) {
            Ok((u, l)) => (u, l, Method::Direct),
            Err(_) => {
                let (u, l) = minres_saddle(&k, &c, &f)?;
                (u, l, Method::Iterative)
            }
        },
        Method::Iterative => {
            let (u, l) = minres_saddle(&k, &c, &f)?;
            (u, l, Method::Iterative)
        }
    };
    let coefs = match &opts.permutation {
        Some(perm) => DVector::from_fn(n, |i, _| u[perm[i]]),
        None => u,
    };
    finish(system, coefs, lambda, method_used, opts.exec)
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::InvalidInput(format!("permutation of length {} for {n} unknowns", perm.len())));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidInput("not a permutation".into()));
        }
        seen[p] = true;
    }
    Ok(())
}

fn permute_columns(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &p) in perm.iter().enumerate() {
        out.set_column(p, &m.column(i));
    }
    out
}

fn permute_system(s: &AssembledSystem, perm: &[usize]) -> (CscMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let n = s.n();
    let mut coo = CooMatrix::new(n, n);
    for (i, j, v) in s.k.triplet_iter() {
        coo.push(perm[i], perm[j], *v);
    }
    let mut f = DVector::zeros(n);
    for (i, &p) in perm.iter().enumerate() {
        f[p] = s.f[i];
    }
    (CscMatrix::from(&coo), permute_columns(&s.c, perm), f)
}

/// Three rows evaluating a field at well separated interior quadrature
/// points, scaled to the size of the diagonal of `K`.
fn point_rows(space: &SplineSpace, k: &CscMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = space.num_dofs();
    let (mut area, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for q in space.cells.iter().flat_map(|c| &c.points) {
        area += q.w;
        cx += q.w * q.x[0];
        cy += q.w * q.x[1];
    }
    let (cx, cy) = (cx / area, cy / area);
    let d = 0.3 * area.sqrt();
    let targets = [[cx, cy], [cx + d, cy], [cx, cy + d]];
    let diag: f64 = k.triplet_iter().filter(|(i, j, _)| i == j).map(|(_, _, v)| *v).sum::<f64>() / n as f64;
    let scale = diag.abs().sqrt().max(f64::MIN_POSITIVE);
    let mut g = DMatrix::zeros(3, n);
    for (r, t) in targets.iter().enumerate() {
        let mut best = (0, 0, f64::INFINITY);
        for (ci, c) in space.cells.iter().enumerate() {
            for (qi, q) in c.points.iter().enumerate() {
                let dist = (q.x[0] - t[0]).hypot(q.x[1] - t[1]);
                if dist < best.2 {
                    best = (ci, qi, dist);
                }
            }
        }
        let cell = &space.cells[best.0];
        for (dof, j) in space.basis_jets(cell.ex, cell.ey, cell.points[best.1].xi, 0)? {
            g[(r, dof)] = scale * j.value();
        }
    }
    Ok(g)
}

fn direct(
    k: &CscMatrix<f64>,
    c: &DMatrix<f64>,
    g: &DMatrix<f64>,
    f: &DVector<f64>,
) -> Result<(DVector<f64>, [f64; 3])> {
    let n = f.len();
    let mut coo = CooMatrix::new(n, n);
    for (i, j, v) in k.triplet_iter() {
        coo.push(i, j, *v);
    }
    let support: Vec<Vec<usize>> = (0..3).map(|r| (0..n).filter(|&j| g[(r, j)] != 0.0).collect()).collect();
    for r in 0..3 {
        for &i in &support[r] {
            for &j in &support[r] {
                coo.push(i, j, g[(r, i)] * g[(r, j)]);
            }
        }
    }
    let a = CscMatrix::from(&coo);
    let chol = CscCholesky::factor(&a).map_err(|e| Error::SingularSystem(format!("Cholesky failed: {e:?}")))?;
    let mut rhs = DMatrix::zeros(n, 7);
    rhs.set_column(0, f);
    for r in 0..3 {
        rhs.set_column(1 + r, &c.row(r).transpose());
        rhs.set_column(4 + r, &g.row(r).transpose());
    }
    let sol = chol.solve(&rhs);
    let v = sol.column(0);
    let x = sol.columns(1, 3);
    let y = sol.columns(4, 3);
    let cx = c * x;
    let cy = c * y;
    let gx = g * x;
    let gy = g * y;
    let cv = c * v;
    let gv = g * v;
    let mut m = Matrix6::zeros();
    let mut b = Vector6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = cx[(i, j)];
            m[(i, j + 3)] = -cy[(i, j)];
            m[(i + 3, j)] = gx[(i, j)];
            m[(i + 3, j + 3)] = if i == j { 1.0 } else { 0.0 } - gy[(i, j)];
        }
        b[i] = cv[i];
        b[i + 3] = gv[i];
    }
    let z = m
        .full_piv_lu()
        .solve(&b)
        .ok_or_else(|| Error::SingularSystem("reduced multiplier system is singular".into()))?;
    let lambda = [z[0], z[1], z[2]];
    let mu = z.fixed_rows::<3>(3).into_owned();
    let l = nalgebra::Vector3::new(z[0], z[1], z[2]);
    let u = v - x * l + y * mu;
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite solution".into()));
    }
    Ok((u, lambda))
}

/// Unpreconditioned MINRES on the saddle system, relative tolerance 1e-12.
fn minres_saddle(k: &CscMatrix<f64>, c: &DMatrix<f64>, f: &DVector<f64>) -> Result<(DVector<f64>, [f64; 3])> {
    let n = f.len();
    let apply = |x: &DVector<f64>| -> DVector<f64> {
        let u = x.rows(0, n).into_owned();
        let l = x.rows(n, 3).into_owned();
        let mut y = DVector::zeros(n + 3);
        let top = k * &u + c.transpose() * &l;
        y.rows_mut(0, n).copy_from(&top);
        y.rows_mut(n, 3).copy_from(&(c * &u));
        y
    };
    let mut b = DVector::zeros(n + 3);
    b.rows_mut(0, n).copy_from(f);
    let x = minres(apply, &b, 1e-12, 20 * (n + 3))?;
    Ok((x.rows(0, n).into_owned(), [x[n], x[n + 1], x[n + 2]]))
}

/// MINRES for a symmetric, possibly indefinite operator.
pub fn minres(
    op: impl Fn(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let m = b.len();
    let mut x = DVector::zeros(m);
    let beta1 = b.norm();
    if beta1 == 0.0 {
        return Ok(x);
    }
    let mut v_prev = DVector::zeros(m);
    let mut v = b / beta1;
    let mut beta = beta1;
    let (mut c_prev, mut s_prev, mut c, mut s) = (1.0, 0.0, 1.0, 0.0);
    let mut w_prev = DVector::<f64>::zeros(m);
    let mut w_prev2 = DVector::<f64>::zeros(m);
    let mut eta = beta1;
    for _ in 0..max_iter {
        let av = op(&v);
        let alpha = v.dot(&av);
        let mut v_next = av - &v * alpha - &v_prev * beta;
        let beta_next = v_next.norm();
        if beta_next > 0.0 {
            v_next /= beta_next;
        }
        // QR update with the two previous rotations
        let eps = s_prev * beta;
        let delta_bar = c_prev * beta;
        let delta = c * delta_bar + s * alpha;
        let gamma_bar = -s * delta_bar + c * alpha;
        let gamma = gamma_bar.hypot(beta_next);
        if gamma == 0.0 {
            break;
        }
        let (c_new, s_new) = (gamma_bar / gamma, beta_next / gamma);
        let w = (&v - &w_prev * delta - &w_prev2 * eps) / gamma;
        x += &w * (c_new * eta);
        eta *= -s_new;
        w_prev2 = w_prev;
        w_prev = w;
        v_prev = v;
        v = v_next;
        beta = beta_next;
        c_prev = c;
        s_prev = s;
        c = c_new;
        s = s_new;
        if eta.abs() <= tol * beta1 {
            return Ok(x);
        }
    }
    let r = (b - op(&x)).norm();
    if r <= 1e3 * tol * beta1 {
        Ok(x)
    } else {
        Err(Error::SingularSystem(format!("MINRES stalled at relative residual {:.3e}", r / beta1)))
    }
}

fn finish(
    system: &AssembledSystem,
    coefs: DVector<f64>,
    lambda: [f64; 3],
    method_used: Method,
    exec: Execution,
) -> Result<SolveResult> {
    let ku = system.apply_k(&coefs);
    let energy = coefs.dot(&ku);
    let load = coefs.dot(&system.f);
    let l = nalgebra::Vector3::from(lambda);
    let galerkin = &ku + system.c.transpose() * l - &system.f;
    let k_abs = system.k_norm();
    let scale_g = k_abs * coefs.amax() + system.f.amax();
    let galerkin_residual = if scale_g > 0.0 { galerkin.amax() / scale_g } else { 0.0 };
    let cu = &system.c * &coefs;
    let mut constraint_residual: f64 = 0.0;
    for r in 0..3 {
        let s: f64 = system.c.row(r).iter().zip(coefs.iter()).map(|(a, b)| (a * b).abs()).sum();
        if s > 0.0 {
            constraint_residual = constraint_residual.max(cu[r].abs() / s);
        }
    }
    let space = &system.space;
    let h3_norm = h3_norm(space, coefs.as_slice(), exec)?;
    let mut result = SolveResult {
        coefs,
        multipliers: lambda,
        energy,
        load,
        h3_norm,
        constraint_residual,
        galerkin_residual,
        stability_ratio: None,
        method_used,
    };
    result.stability_ratio = stability_report(&result, &system.data, space);
    Ok(result)
}

/// `r0⁻¹ (Σ_{i≤3} r0^{2i} ∫|Dⁱu|²)^{1/2}` from the per-order squared norms.
pub fn weighted_h3(norms: &[f64; 4], r0: f64) -> f64 {
    let mut s = 0.0;
    let mut w = 1.0;
    for n in norms {
        s += w * n;
        w *= r0 * r0;
    }
    s.sqrt() / r0
}

/// Size-weighted H³ norm of a spline field.
pub fn h3_norm(space: &SplineSpace, coefs: &[f64], exec: Execution) -> Result<f64> {
    let zero = Expr::constant(0.0);
    let norms = space.error_norms(coefs, &zero, exec)?;
    Ok(weighted_h3(&norms, space.domain.r0))
}

/// Empirical stability ratio `‖u‖_{H³} / (‖V̂‖ + r0⁻¹‖M̂ₙ‖ + r0⁻²‖M̂ₙʰ‖)` with
/// size-weighted L²(∂Ω) norms standing in for the negative order data
/// norms. `None` for zero data.
pub fn stability_report(result: &SolveResult, data: &NeumannData, space: &SplineSpace) -> Option<f64> {
    let r0 = space.domain.r0;
    let mut sq = [0.0; 3];
    for (f, w) in space.boundary.frames.iter().zip(&space.boundary.weights) {
        let d = data.eval(f);
        for i in 0..3 {
            sq[i] += w * d[i] * d[i];
        }
    }
    let norm = |s: f64| (s / r0).sqrt();
    let denom = norm(sq[0]) + norm(sq[1]) / r0 + norm(sq[2]) / (r0 * r0);
    if denom > 0.0 && denom.is_finite() {
        Some(result.h3_norm / denom)
    } else {
        None
    }
}

/// L²(Ω)-orthogonal projection of a field onto `span{1, x1, x2}`, returned
/// as `[c0, c1, c2]`.
pub fn affine_projection(space: &SplineSpace, f: &dyn Field, exec: Execution) -> Result<[f64; 3]> {
    let parts = exec.map(&space.cells, |c| {
        let mut gram = [[0.0; 3]; 3];
        let mut rhs = [0.0; 3];
        for q in &c.points {
            let phi = [1.0, q.x[0], q.x[1]];
            let v = f.value(q.x);
            for i in 0..3 {
                rhs[i] += q.w * phi[i] * v;
                for j in 0..3 {
                    gram[i][j] += q.w * phi[i] * phi[j];
                }
            }
        }
        (gram, rhs)
    });
    let mut gram = nalgebra::Matrix3::zeros();
    let mut rhs = nalgebra::Vector3::zeros();
    for (g, r) in parts {
        for i in 0..3 {
            rhs[i] += r[i];
            for j in 0..3 {
                gram[(i, j)] += g[i][j];
            }
        }
    }
    let sol = gram.lu().solve(&rhs).ok_or_else(|| Error::SingularSystem("degenerate affine Gram matrix".into()))?;
    Ok([sol[0], sol[1], sol[2]])
}

/// Error of the spline `coefs` against `exact` modulo affine functions:
/// returns `(‖e - Πe‖, ‖u* - Πu*‖)` in the size-weighted H³ norm, where `Π`
/// is the L² projection onto affines.
pub fn error_modulo_affine(
    space: &SplineSpace,
    coefs: &[f64],
    exact: &dyn Field,
    exec: Execution,
) -> Result<(f64, f64)> {
    let uh = SplineFieldRef { space, coefs };
    let diff = crate::field::FnField(|x: [f64; 2], order: usize| exact.jet(x, order) - uh.jet(x, order));
    let pe = affine_projection(space, &diff, exec)?;
    let shifted = PlusAffine { inner: exact, affine: [-pe[0], -pe[1], -pe[2]] };
    let e = space.error_norms(coefs, &shifted, exec)?;
    let pu = affine_projection(space, exact, exec)?;
    let centred = PlusAffine { inner: exact, affine: [-pu[0], -pu[1], -pu[2]] };
    let ref_norms = space.field_norms(&centred, exec);
    let r0 = space.domain.r0;
    Ok((weighted_h3(&e, r0), weighted_h3(&ref_norms, r0)))
}

/// Coefficients with the L² affine projection of the field removed;
/// unavailable on mapped domains.
pub fn remove_affine(space: &SplineSpace, coefs: &DVector<f64>, exec: Execution) -> Result<DVector<f64>> {
    let field = SplineFieldRef { space, coefs: coefs.as_slice() };
    let p = affine_projection(space, &field, exec)?;
    let a = space
        .affine_coefficients(p)
        .ok_or_else(|| Error::InvalidDiscretization("affine functions are not in a mapped space".into()))?;
    Ok(coefs - a)
}

struct SplineFieldRef<'a> {
    space: &'a SplineSpace,
    coefs: &'a [f64],
}

impl Field for SplineFieldRef<'_> {
    fn jet(&self, x: [f64; 2], order: usize) -> crate::jet::Jet {
        self.space
            .eval_field(self.coefs, x, order.min(self.space.max_derivative()))
            .expect("evaluation order checked against the degree")
    }
}
