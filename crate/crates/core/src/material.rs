//! Isotropic strain-gradient plate constitutive law.
//!
//! Index conventions: second-order tensors are `[[f64; 2]; 2]`, fourth-order
//! tensors are flat `[f64; 16]` with index `((i*2+j)*2+k)*2+l`, third-order
//! tensors are flat `[f64; 8]` with index `(i*2+j)*2+k`, and the sixth-order
//! tensor is flat `[f64; 64]`. All indices are zero-based.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::expr::Expr;
use crate::jet::Jet;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Sym2 = [[f64; 2]; 2];
pub type Tensor3 = [f64; 8];
pub type Tensor4 = [f64; 16];
pub type Tensor6 = [f64; 64];

#[inline]
pub const fn i3(i: usize, j: usize, k: usize) -> usize {
    (i * 2 + j) * 2 + k
}

#[inline]
pub const fn i4(i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * 2 + j) * 2 + k) * 2 + l
}

#[inline]
pub const fn i6(i: usize, j: usize, k: usize, l: usize, m: usize, n: usize) -> usize {
    ((((i * 2 + j) * 2 + k) * 2 + l) * 2 + m) * 2 + n
}

#[inline]
fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// Fully symmetric third-order tensor from its four distinct components.
pub fn sym3(a111: f64, a112: f64, a122: f64, a222: f64) -> Tensor3 {
    let mut t = [0.0; 8];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                t[i3(i, j, k)] = match i + j + k {
                    0 => a111,
                    1 => a112,
                    2 => a122,
                    _ => a222,
                };
            }
        }
    }
    t
}

/// Third derivatives of a jet as a symmetric tensor.
pub fn third_of(j: &Jet) -> Tensor3 {
    sym3(j.deriv(3, 0), j.deriv(2, 1), j.deriv(1, 2), j.deriv(0, 3))
}

/// Hessian of a jet.
pub fn hessian_of(j: &Jet) -> Sym2 {
    [[j.deriv(2, 0), j.deriv(1, 1)], [j.deriv(1, 1), j.deriv(0, 2)]]
}

pub fn frob2(a: &Sym2, b: &Sym2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

pub fn frob3(a: &Tensor3, b: &Tensor3) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothness {
    C01,
    C11,
    C21,
}

/// A scalar coefficient field: constant or an analytic expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    Analytic(Expr),
}

impl Coefficient {
    pub fn from_expr(e: Expr) -> Self {
        match e.as_constant() {
            Some(v) => Coefficient::Constant(v),
            None => Coefficient::Analytic(e),
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::Analytic(e) => e.value(x),
        }
    }

    pub fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        match self {
            Coefficient::Constant(v) => Jet::constant(*v, order),
            Coefficient::Analytic(e) => e.jet(x, order),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }
}

/// Lamé moduli, thickness and length scales of the plate.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialField {
    pub mu: Coefficient,
    pub lambda: Coefficient,
    pub t: f64,
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    pub r0: f64,
    /// `Q9 = q9_share · b1`; `Q8` follows from `2(Q8 + 2 Q9) = 5 b1`.
    pub q9_share: f64,
    pub smoothness: Smoothness,
}

impl MaterialField {
    pub fn constant(mu: f64, lambda: f64, t: f64, l: [f64; 3]) -> Self {
        MaterialField {
            mu: Coefficient::Constant(mu),
            lambda: Coefficient::Constant(lambda),
            t,
            l0: l[0],
            l1: l[1],
            l2: l[2],
            r0: 1.0,
            q9_share: 0.0,
            smoothness: Smoothness::C21,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t", self.t), ("l0", self.l0), ("l1", self.l1), ("l2", self.l2), ("r0", self.r0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidMaterial(name));
            }
        }
        if !self.q9_share.is_finite() {
            return Err(Error::InvalidMaterial("q9_share"));
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        self.mu.is_constant() && self.lambda.is_constant()
    }

    /// `l = min(l0, l1, l2)`.
    pub fn l(&self) -> f64 {
        self.l0.min(self.l1).min(self.l2)
    }

    /// Jets of `b0` and `b1` at `x`.
    pub fn b_jets(&self, x: [f64; 2], order: usize) -> (Jet, Jet) {
        let mu = self.mu.jet(x, order);
        let t3 = self.t.powi(3) / 12.0;
        (mu.scale(2.0 * t3 * self.l0 * self.l0), mu.scale(0.4 * t3 * self.l1 * self.l1))
    }

    /// Smallest `μ` and `2μ + 3λ` over the given sample points.
    pub fn ellipticity_bounds(&self, points: &[[f64; 2]]) -> (f64, f64) {
        points.iter().fold((f64::INFINITY, f64::INFINITY), |(a, g), &x| {
            let mu = self.mu.value(x);
            let la = self.lambda.value(x);
            (a.min(mu), g.min(2.0 * mu + 3.0 * la))
        })
    }
}

/// Jets of the bending pair `(c1, c2)` with `(P+Pʰ)H = c1 H + c2 tr(H) I`.
pub fn bending_pair_jets(mat: &MaterialField, x: [f64; 2], order: usize) -> (Jet, Jet) {
    let mu = mat.mu.jet(x, order);
    let la = mat.lambda.jet(x, order);
    let t = mat.t;
    let e = mu * (mu.scale(2.0) + la.scale(3.0)) / (mu + la);
    let nu = la / (mu + la).scale(2.0);
    let one = Jet::constant(1.0, order);
    let b = e.scale(t.powi(3) / 12.0) / (one - nu * nu);
    let a0 = mu.scale(2.0 * t * mat.l0 * mat.l0);
    let a1 = mu.scale(2.0 / 15.0 * t * mat.l1 * mat.l1);
    let a2 = mu.scale(t * mat.l2 * mat.l2);
    let c1 = b * (one - nu) + a2.scale(2.0) + a1.scale(5.0);
    let c2 = b * nu + a0 - a1 - a2;
    (c1, c2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsotropicCoefficients {
    pub mu: f64,
    pub lambda: f64,
    pub t: f64,
    pub l: f64,
    pub e: f64,
    pub nu: f64,
    pub b: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b0: f64,
    pub b1: f64,
    pub q8: f64,
    pub q9: f64,
}

impl IsotropicCoefficients {
    /// Scalars of the isotropic action `(P+Pʰ)H = c1 H + c2 tr(H) I`.
    pub fn bending_pair(&self) -> (f64, f64) {
        (self.b * (1.0 - self.nu) + 2.0 * self.a2 + 5.0 * self.a1, self.b * self.nu + self.a0 - self.a1 - self.a2)
    }

    /// Rebuilds `Q8`, `Q9` with `Q9 = share · b1`.
    pub fn with_split(mut self, share: f64) -> Self {
        self.q9 = share * self.b1;
        self.q8 = 2.5 * self.b1 - 2.0 * self.q9;
        self
    }
}

/// Pointwise constitutive scalars from the Lamé moduli.
pub fn eval_coefficients(mat: &MaterialField, x: [f64; 2]) -> Result<IsotropicCoefficients> {
    mat.validate()?;
    let mu = mat.mu.value(x);
    let lambda = mat.lambda.value(x);
    coefficients_from(mu, lambda, mat, x)
}

fn coefficients_from(mu: f64, lambda: f64, mat: &MaterialField, x: [f64; 2]) -> Result<IsotropicCoefficients> {
    let bulk = 2.0 * mu + 3.0 * lambda;
    if !(mu > 0.0 && bulk > 0.0) {
        return Err(Error::EllipticityViolation { x: x[0], y: x[1], mu, bulk });
    }
    let t = mat.t;
    let e = mu * bulk / (mu + lambda);
    let nu = lambda / (2.0 * (mu + lambda));
    let b = t.powi(3) * e / (12.0 * (1.0 - nu * nu));
    let a0 = 2.0 * mu * t * mat.l0 * mat.l0;
    let a1 = 2.0 / 15.0 * mu * t * mat.l1 * mat.l1;
    let a2 = mu * t * mat.l2 * mat.l2;
    let t3 = t.powi(3) / 12.0;
    let b0 = 2.0 * mu * t3 * mat.l0 * mat.l0;
    let b1 = 0.4 * mu * t3 * mat.l1 * mat.l1;
    Ok(IsotropicCoefficients { mu, lambda, t, l: mat.l(), e, nu, b, a0, a1, a2, b0, b1, q8: 0.0, q9: 0.0 }
        .with_split(mat.q9_share))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StiffnessTensors {
    pub p: Tensor4,
    pub ph: Tensor4,
    pub q: Tensor6,
    pub coef: IsotropicCoefficients,
}

/// Component arrays of `P`, `Pʰ` and `Q`.
pub fn eval_tensors(coef: &IsotropicCoefficients) -> StiffnessTensors {
    let c = coef;
    debug_assert!((2.0 * (c.q8 + 2.0 * c.q9) - 5.0 * c.b1).abs() <= 1e-12 * c.b1.abs().max(1e-300));
    let mut p = [0.0; 16];
    let mut ph = [0.0; 16];
    for a in 0..2 {
        for b in 0..2 {
            for g in 0..2 {
                for d in 0..2 {
                    let id = i4(a, b, g, d);
                    p[id] = c.b * ((1.0 - c.nu) * delta(a, g) * delta(b, d) + c.nu * delta(a, b) * delta(g, d));
                    ph[id] = (2.0 * c.a2 + 5.0 * c.a1) * delta(a, g) * delta(b, d)
                        + (c.a0 - c.a1 - c.a2) * delta(a, b) * delta(g, d);
                }
            }
        }
    }
    let mut q = [0.0; 64];
    let s = c.b0 - 3.0 * c.b1;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    for m in 0..2 {
                        for n in 0..2 {
                            let d = delta;
                            q[i6(i, j, k, l, m, n)] = s / 3.0 * d(i, j) * d(k, n) * d(l, m)
                                + s / 6.0
                                    * (d(i, k) * (d(j, l) * d(m, n) + d(j, m) * d(l, n))
                                        + d(j, k) * (d(i, l) * d(m, n) + d(i, m) * d(l, n)))
                                + c.q8 * d(k, n) * (d(i, l) * d(j, m) + d(i, m) * d(j, l))
                                + c.q9
                                    * (d(j, n) * (d(i, l) * d(k, m) + d(i, m) * d(k, l))
                                        + d(i, n) * (d(j, l) * d(k, m) + d(j, m) * d(k, l)));
                        }
                    }
                }
            }
        }
    }
    StiffnessTensors { p, ph, q, coef: *coef }
}

/// `(T A)_{ij} = T_{ijkl} A_{kl}`.
pub fn apply4(t: &Tensor4, a: &Sym2) -> Sym2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[i][j] += t[i4(i, j, k, l)] * a[k][l];
                }
            }
        }
    }
    out
}

/// `(Q A)_{ijk} = Q_{ijklmn} A_{lmn}`.
pub fn apply6(q: &Tensor6, a: &Tensor3) -> Tensor3 {
    let mut out = [0.0; 8];
    for (ijk, o) in out.iter_mut().enumerate() {
        for (lmn, av) in a.iter().enumerate() {
            *o += q[ijk * 8 + lmn] * av;
        }
    }
    out
}

/// Couple tensor `M_{αβ} = -(P + Pʰ)_{αβγδ} u,_{γδ}`.
pub fn couple_m(tensors: &StiffnessTensors, hessian: &Sym2) -> Sym2 {
    let (c1, c2) = tensors.coef.bending_pair();
    let tr = hessian[0][0] + hessian[1][1];
    let mut m = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            m[a][b] = -(c1 * hessian[a][b] + c2 * tr * delta(a, b));
        }
    }
    m
}

/// High-order couple tensor `M̄ʰ_{ijk} = (b0-3b1)/3 (δ_ij u_mmk + δ_ik u_mmj + δ_jk u_mmi) + 5 b1 u_ijk`.
pub fn couple_mh(tensors: &StiffnessTensors, third: &Tensor3) -> Tensor3 {
    couple_mh_scalars(tensors.coef.b0, tensors.coef.b1, third)
}

pub fn couple_mh_scalars(b0: f64, b1: f64, third: &Tensor3) -> Tensor3 {
    let s = (b0 - 3.0 * b1) / 3.0;
    let trace = [third[i3(0, 0, 0)] + third[i3(1, 1, 0)], third[i3(0, 0, 1)] + third[i3(1, 1, 1)]];
    let mut out = [0.0; 8];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                out[i3(i, j, k)] = s * (delta(i, j) * trace[k] + delta(i, k) * trace[j] + delta(j, k) * trace[i])
                    + 5.0 * b1 * third[i3(i, j, k)];
            }
        }
    }
    out
}

/// Random unit symmetric matrix (Frobenius norm) and random unit fully
/// symmetric third-order tensor.
fn random_unit_pair(rng: &mut ChaCha8Rng) -> (Sym2, Tensor3) {
    let mut g = || -> f64 { rng.sample(StandardNormal) };
    let (x, y, z) = (g(), g(), g());
    let a = [[x, y / 2f64.sqrt()], [y / 2f64.sqrt(), z]];
    let na = frob2(&a, &a).sqrt();
    let a = [[a[0][0] / na, a[0][1] / na], [a[1][0] / na, a[1][1] / na]];
    let (p, q, r, s) = (g(), g() / 3f64.sqrt(), g() / 3f64.sqrt(), g());
    let t = sym3(p, q, r, s);
    let nt = frob3(&t, &t).sqrt();
    (a, t.map(|v| v / nt))
}

/// Symmetric unit samples used by the convexity probe, reproducible from `seed`.
pub fn probe_samples(samples: usize, seed: u64) -> Vec<(Sym2, Tensor3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|_| random_unit_pair(&mut rng)).collect()
}

/// Monte-Carlo estimates of the strong-convexity constants: minima of
/// `(P+Pʰ)A·A / (t(t²+l²)|A|²)` and `QA·A / (t³l²|A|²)` over random unit `A`.
pub fn convexity_probe(tensors: &StiffnessTensors, samples: usize, seed: u64, exec: Execution) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::InvalidInput("convexity probe needs at least one sample".into()));
    }
    let c = &tensors.coef;
    let sp = c.t * (c.t * c.t + c.l * c.l);
    let sq = c.t.powi(3) * c.l * c.l;
    let mut pph = tensors.p;
    for (v, w) in pph.iter_mut().zip(&tensors.ph) {
        *v += w;
    }
    let draws = probe_samples(samples, seed);
    let values = exec.map(&draws, |(a, t)| {
        let ea = frob2(&apply4(&pph, a), a);
        let eq = frob3(&apply6(&tensors.q, t), t);
        (ea / sp, eq / sq)
    });
    let (xi_p, xi_q) = values.iter().fold((f64::INFINITY, f64::INFINITY), |(p, q), &(a, b)| (p.min(a), q.min(b)));
    if !(xi_p > 0.0 && xi_q > 0.0) {
        return Err(Error::ConvexityViolation { xi_p, xi_q });
    }
    Ok((xi_p, xi_q))
}

/// Norm of a fourth-order tensor as an operator-free coefficient magnitude.
pub fn tensor_norm(t: &[f64]) -> f64 {
    t.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_material() -> MaterialField {
        MaterialField::constant(1.0, 1.0, 1.0, [1.0, 1.0, 1.0])
    }

    #[test]
    fn moduli_of_unit_lame_pair() {
        let c = eval_coefficients(&unit_material(), [0.0, 0.0]).unwrap();
        assert_relative_eq!(c.e, 2.5, epsilon = 1e-15);
        assert_relative_eq!(c.nu, 0.25, epsilon = 1e-15);
        assert_relative_eq!(c.b, 2.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(c.a0, 2.0, epsilon = 1e-15);
        assert_relative_eq!(c.a1, 2.0 / 15.0, epsilon = 1e-15);
        assert_relative_eq!(c.a2, 1.0, epsilon = 1e-15);
        assert_relative_eq!(c.b0, 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(c.b1, 1.0 / 30.0, epsilon = 1e-15);
        assert_relative_eq!(2.0 * (c.q8 + 2.0 * c.q9), 5.0 * c.b1, epsilon = 1e-15);
        assert_eq!(c.q9, 0.0);
    }

    #[test]
    fn negative_lambda_is_admissible() {
        let m = MaterialField::constant(1.0, -0.25, 1.0, [1.0; 3]);
        let c = eval_coefficients(&m, [0.0, 0.0]).unwrap();
        assert_relative_eq!(c.nu, -1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn ellipticity_violations_are_rejected() {
        let m = MaterialField::constant(0.0, 1.0, 1.0, [1.0; 3]);
        assert!(matches!(eval_coefficients(&m, [0.0, 0.0]), Err(Error::EllipticityViolation { .. })));
        let m = MaterialField::constant(1.0, -1.0, 1.0, [1.0; 3]);
        assert!(matches!(eval_coefficients(&m, [0.0, 0.0]), Err(Error::EllipticityViolation { .. })));
        let mut m = unit_material();
        m.t = -1.0;
        assert!(matches!(eval_coefficients(&m, [0.0, 0.0]), Err(Error::InvalidMaterial("t"))));
    }

    #[test]
    fn tensor_components() {
        let c = eval_coefficients(&unit_material(), [0.0, 0.0]).unwrap();
        let t = eval_tensors(&c);
        assert_relative_eq!(t.p[i4(0, 0, 0, 0)], c.b, epsilon = 1e-15);
        assert_relative_eq!(t.ph[i4(0, 0, 0, 0)], c.a0 + 4.0 * c.a1 + c.a2, epsilon = 1e-15);
        let e111 = sym3(1.0, 0.0, 0.0, 0.0);
        let qe = apply6(&t.q, &e111);
        assert_relative_eq!(qe[i3(0, 0, 0)], c.b0 + 2.0 * c.b1, epsilon = 1e-15);
        let mh = couple_mh(&t, &e111);
        assert_relative_eq!(mh[i3(0, 0, 0)], c.b0 + 2.0 * c.b1, epsilon = 1e-15);
        assert_relative_eq!(mh[i3(0, 1, 1)], (c.b0 - 3.0 * c.b1) / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn couple_m_matches_index_loop() {
        let c = eval_coefficients(&unit_material(), [0.0, 0.0]).unwrap();
        let t = eval_tensors(&c);
        let h = [[1.0, 0.0], [0.0, 0.0]];
        let m = couple_m(&t, &h);
        assert_relative_eq!(m[0][0], -(c.b + c.a0 + 4.0 * c.a1 + c.a2), epsilon = 1e-14);
        let mut sum = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for g in 0..2 {
                    for d in 0..2 {
                        sum[a][b] -= (t.p[i4(a, b, g, d)] + t.ph[i4(a, b, g, d)]) * h[g][d];
                    }
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                assert_relative_eq!(m[a][b], sum[a][b], epsilon = 1e-14);
            }
        }
        assert_eq!(couple_m(&t, &[[0.0; 2]; 2]), [[0.0; 2]; 2]);
        let mi = couple_m(&t, &[[1.0, 0.0], [0.0, 1.0]]);
        assert_relative_eq!(mi[0][0], mi[1][1], epsilon = 1e-15);
        assert_eq!(mi[0][1], 0.0);
    }

    #[test]
    fn probe_bounded_by_closed_form_minimum() {
        let c = eval_coefficients(&unit_material(), [0.0, 0.0]).unwrap();
        let t = eval_tensors(&c);
        let (xp, xq) = convexity_probe(&t, 10_000, 7, Execution::best()).unwrap();
        let (c1, c2) = c.bending_pair();
        let exact_p = c1.min(c1 + 2.0 * c2) / (c.t * (c.t * c.t + c.l * c.l));
        let exact_q = (5.0 * c.b1).min(5.0 * c.b1 + 4.0 / 3.0 * (c.b0 - 3.0 * c.b1)) / (c.t.powi(3) * c.l * c.l);
        assert!(xp >= exact_p * (1.0 - 1e-12) && xp < exact_p * 1.05, "{xp} vs {exact_p}");
        assert!(xq >= exact_q * (1.0 - 1e-12) && xq < exact_q * 1.05, "{xq} vs {exact_q}");
    }

    #[test]
    fn rank_one_probe_value() {
        let c = eval_coefficients(&unit_material(), [0.0, 0.0]).unwrap();
        let t = eval_tensors(&c);
        let a = [[1.0, 0.0], [0.0, 0.0]];
        let mut v = 0.0;
        for i in 0..16 {
            let (a_, b_, g_, d_) = (i >> 3 & 1, i >> 2 & 1, i >> 1 & 1, i & 1);
            v += (t.p[i] + t.ph[i]) * a[g_][d_] * a[a_][b_];
        }
        assert_relative_eq!(v, c.b + c.a0 + 4.0 * c.a1 + c.a2, epsilon = 1e-14);
    }
}
