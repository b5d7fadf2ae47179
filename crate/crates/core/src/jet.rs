//! Truncated bivariate Taylor expansions.
//!
//! A [`Jet`] of order `K` at a point `x` stores the Taylor coefficients
//! `c[i][j] = ∂₁^i ∂₂^j f(x) / (i! j!)` for `i + j ≤ K`. Arithmetic on jets is
//! exact polynomial arithmetic truncated at `K`, which gives every partial
//! derivative up to order `K` of any composite expression without finite
//! differences.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Highest supported derivative order.
pub const MAX_ORDER: usize = 6;

const LEN: usize = (MAX_ORDER + 1) * (MAX_ORDER + 2) / 2;

const FACT: [f64; MAX_ORDER + 1] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0];

#[inline]
const fn idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Number of coefficients stored for a jet of order `k`.
#[inline]
pub const fn coefficient_count(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    c: [f64; LEN],
}

impl Jet {
    pub fn zero(order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        Jet { order, c: [0.0; LEN] }
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut j = Jet::zero(order);
        j.c[0] = value;
        j
    }

    /// The coordinate function `x_axis` (0 → x₁, 1 → x₂) expanded at `at`.
    pub fn variable(axis: usize, at: [f64; 2], order: usize) -> Self {
        let mut j = Jet::constant(at[axis], order);
        if order >= 1 {
            if axis == 0 {
                j.c[idx(1, 0)] = 1.0;
            } else {
                j.c[idx(0, 1)] = 1.0;
            }
        }
        j
    }

    /// The pair of coordinate jets `(x₁, x₂)` at `at`.
    pub fn coordinates(at: [f64; 2], order: usize) -> [Jet; 2] {
        [Jet::variable(0, at, order), Jet::variable(1, at, order)]
    }

    /// Builds a jet from partial derivatives `d(i, j) = ∂₁^i ∂₂^j f`.
    pub fn from_derivatives(order: usize, mut d: impl FnMut(usize, usize) -> f64) -> Self {
        let mut j = Jet::zero(order);
        for tot in 0..=order {
            for b in 0..=tot {
                let a = tot - b;
                j.c[idx(a, b)] = d(a, b) / (FACT[a] * FACT[b]);
            }
        }
        j
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor coefficient of `h₁^i h₂^j`.
    #[inline]
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order {
            0.0
        } else {
            self.c[idx(i, j)]
        }
    }

    #[inline]
    pub fn set_coeff(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i + j <= self.order);
        self.c[idx(i, j)] = v;
    }

    /// Partial derivative `∂₁^i ∂₂^j f` at the expansion point.
    #[inline]
    pub fn deriv(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order {
            0.0
        } else {
            self.c[idx(i, j)] * FACT[i] * FACT[j]
        }
    }

    /// Partial derivative indexed by a list of axes, e.g. `[0, 1, 1]` for `f,₁₂₂`.
    pub fn deriv_axes(&self, axes: &[usize]) -> f64 {
        let i = axes.iter().filter(|&&a| a == 0).count();
        self.deriv(i, axes.len() - i)
    }

    /// Same jet truncated to a lower order.
    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        let mut j = Jet::zero(order);
        let n = coefficient_count(order);
        j.c[..n].copy_from_slice(&self.c[..n]);
        j
    }

    /// Jet of `∂f/∂x_axis`, one order lower.
    pub fn diff(&self, axis: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let mut out = Jet::zero(self.order - 1);
        for tot in 0..self.order {
            for b in 0..=tot {
                let a = tot - b;
                out.c[idx(a, b)] = if axis == 0 {
                    (a + 1) as f64 * self.c[idx(a + 1, b)]
                } else {
                    (b + 1) as f64 * self.c[idx(a, b + 1)]
                };
            }
        }
        out
    }

    /// Repeated differentiation along the listed axes.
    pub fn diff_axes(&self, axes: &[usize]) -> Self {
        axes.iter().fold(*self, |acc, &a| acc.diff(a))
    }

    pub fn laplacian(&self) -> Self {
        self.diff(0).diff(0) + self.diff(1).diff(1)
    }

    pub fn scale(mut self, s: f64) -> Self {
        let n = coefficient_count(self.order);
        for v in &mut self.c[..n] {
            *v *= s;
        }
        self
    }

    /// Applies a scalar function given its derivatives at the jet's value:
    /// `derivs[k] = f^{(k)}(value)` for `k = 0..=order`.
    pub fn compose(&self, derivs: &[f64]) -> Self {
        let order = self.order;
        let mut h = *self;
        h.c[0] = 0.0;
        let mut out = Jet::constant(derivs[0], order);
        let mut power = Jet::constant(1.0, order);
        for (k, &dk) in derivs.iter().enumerate().take(order + 1).skip(1) {
            power *= h;
            out += power.scale(dk / FACT[k]);
        }
        out
    }

    pub fn recip(&self) -> Self {
        let a = self.c[0];
        let mut d = [0.0; MAX_ORDER + 1];
        let mut v = 1.0 / a;
        for (k, dk) in d.iter_mut().enumerate().take(self.order + 1) {
            *dk = v;
            v *= -((k + 1) as f64) / a;
        }
        self.compose(&d[..=self.order])
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        self.compose(&[e; MAX_ORDER + 1][..=self.order])
    }

    pub fn ln(&self) -> Self {
        let a = self.c[0];
        let mut d = [0.0; MAX_ORDER + 1];
        d[0] = a.ln();
        let mut v = 1.0 / a;
        for (k, dk) in d.iter_mut().enumerate().take(self.order + 1).skip(1) {
            *dk = v;
            v *= -(k as f64) / a;
        }
        self.compose(&d[..=self.order])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.order).map(|k| cyc[k % 4]).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.order).map(|k| cyc[k % 4]).collect();
        self.compose(&d)
    }

    pub fn sinh(&self) -> Self {
        let (s, c) = (self.c[0].sinh(), self.c[0].cosh());
        let d: Vec<f64> = (0..=self.order).map(|k| if k % 2 == 0 { s } else { c }).collect();
        self.compose(&d)
    }

    pub fn cosh(&self) -> Self {
        let (s, c) = (self.c[0].sinh(), self.c[0].cosh());
        let d: Vec<f64> = (0..=self.order).map(|k| if k % 2 == 0 { c } else { s }).collect();
        self.compose(&d)
    }

    /// Real power `f^p`; requires `f > 0` unless `p` is a non-negative integer.
    pub fn powf(&self, p: f64) -> Self {
        if p.fract() == 0.0 && p.abs() <= 64.0 {
            return self.powi(p as i32);
        }
        let a = self.c[0];
        let mut d = [0.0; MAX_ORDER + 1];
        let mut coef = 1.0;
        for (k, dk) in d.iter_mut().enumerate().take(self.order + 1) {
            *dk = coef * a.powf(p - k as f64);
            coef *= p - k as f64;
        }
        self.compose(&d[..=self.order])
    }

    pub fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return self.recip().powi(-n);
        }
        let mut base = *self;
        let mut acc = Jet::constant(1.0, self.order);
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    /// Substitutes `h = (h₁, h₂)` into this Taylor polynomial, where `h` are
    /// jets with vanishing constant term. Used for changes of variables.
    pub fn substitute(&self, h: [Jet; 2], order: usize) -> Self {
        let mut out = Jet::zero(order);
        // powers of h1 and h2
        let mut p1 = Vec::with_capacity(self.order + 1);
        let mut p2 = Vec::with_capacity(self.order + 1);
        p1.push(Jet::constant(1.0, order));
        p2.push(Jet::constant(1.0, order));
        for k in 1..=self.order {
            p1.push(p1[k - 1] * h[0]);
            p2.push(p2[k - 1] * h[1]);
        }
        for tot in 0..=self.order {
            for b in 0..=tot {
                let a = tot - b;
                let c = self.c[idx(a, b)];
                if c != 0.0 {
                    out += (p1[a] * p2[b]).scale(c);
                }
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self += rhs;
        self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        let order = self.order.min(rhs.order);
        self.order = order;
        let n = coefficient_count(order);
        for k in 0..n {
            self.c[k] += rhs.c[k];
        }
        for v in &mut self.c[n..] {
            *v = 0.0;
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self -= rhs;
        self
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self += -rhs;
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut out = Jet::zero(order);
        for t1 in 0..=order {
            for b1 in 0..=t1 {
                let a1 = t1 - b1;
                let x = self.c[idx(a1, b1)];
                if x == 0.0 {
                    continue;
                }
                for t2 in 0..=(order - t1) {
                    for b2 in 0..=t2 {
                        let a2 = t2 - b2;
                        out.c[idx(a1 + a2, b1 + b2)] += x * rhs.c[idx(a2, b2)];
                    }
                }
            }
        }
        out
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}

/// Euclidean norm of all order-`k` partials using the multi-index convention
/// `|Dᵏu|² = Σ_{|α|=k} |D^α u|²`.
pub fn multi_index_norm_sq(j: &Jet, k: usize) -> f64 {
    (0..=k).map(|b| j.deriv(k - b, b).powi(2)).sum()
}

/// Full tensor norm `Σ_{i₁..i_k} |∂_{i₁..i_k} u|²`, where each mixed
/// partial is counted with its binomial multiplicity.
pub fn tensor_norm_sq(j: &Jet, k: usize) -> f64 {
    let mut binom = 1.0;
    let mut sum = 0.0;
    for b in 0..=k {
        sum += binom * j.deriv(k - b, b).powi(2);
        binom = binom * (k - b) as f64 / (b + 1) as f64;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn poly_at(at: [f64; 2], order: usize) -> Jet {
        // f = x^3 y + 2 x y^2 - y^4
        let [x, y] = Jet::coordinates(at, order);
        x.powi(3) * y + (x * y * y).scale(2.0) - y.powi(4)
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        let at = [0.7, -1.3];
        let f = poly_at(at, 4);
        let (x, y) = (at[0], at[1]);
        assert_relative_eq!(f.value(), x.powi(3) * y + 2.0 * x * y * y - y.powi(4), epsilon = 1e-14);
        assert_relative_eq!(f.deriv(1, 0), 3.0 * x * x * y + 2.0 * y * y, epsilon = 1e-13);
        assert_relative_eq!(f.deriv(1, 1), 3.0 * x * x + 4.0 * y, epsilon = 1e-13);
        assert_relative_eq!(f.deriv(3, 1), 6.0, epsilon = 1e-13);
        assert_relative_eq!(f.deriv(0, 4), -24.0, epsilon = 1e-13);
        assert_eq!(f.deriv(2, 3), 0.0);
    }

    #[test]
    fn transcendental_chain_rule() {
        let at = [0.3, 0.4];
        let [x, y] = Jet::coordinates(at, 3);
        let f = (x * y).sin() + (x + y).exp();
        let (a, b) = (0.3f64, 0.4f64);
        // ∂₁∂₂ sin(xy) = cos(xy) - xy sin(xy)
        let expect = (a * b).cos() - a * b * (a * b).sin() + (a + b).exp();
        assert_relative_eq!(f.deriv(1, 1), expect, epsilon = 1e-13);
        // ∂₁³ sin(xy) = -y³ cos(xy)
        let expect3 = -b.powi(3) * (a * b).cos() + (a + b).exp();
        assert_relative_eq!(f.deriv(3, 0), expect3, epsilon = 1e-13);
    }

    #[test]
    fn recip_ln_sqrt_agree_with_closed_forms() {
        let at = [1.2, 0.5];
        let [x, y] = Jet::coordinates(at, 4);
        let r2 = x * x + y * y;
        let r = r2.sqrt();
        let lr = r2.ln().scale(0.5);
        // ln r is harmonic
        assert!(lr.laplacian().value().abs() < 1e-13);
        let inv = r.recip();
        assert_relative_eq!(inv.value(), 1.0 / r.value(), epsilon = 1e-15);
        assert_relative_eq!((inv * r).value(), 1.0, epsilon = 1e-15);
        assert!((inv * r).deriv(2, 1).abs() < 1e-12);
    }

    #[test]
    fn diff_and_substitute() {
        let at = [0.2, 0.1];
        let f = poly_at(at, 5);
        let fx = f.diff(0);
        assert_relative_eq!(fx.deriv(0, 1), f.deriv(1, 1), epsilon = 1e-13);
        // identity substitution reproduces the jet
        let h = [Jet::variable(0, [0.0, 0.0], 5), Jet::variable(1, [0.0, 0.0], 5)];
        let g = f.substitute(h, 5);
        for i in 0..=5 {
            for j in 0..=(5 - i) {
                assert_relative_eq!(g.deriv(i, j), f.deriv(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn norms_count_multiplicities() {
        let at = [1.0, 2.0];
        let [x, y] = Jet::coordinates(at, 2);
        let f = x * y; // only u_12 = 1
        assert_relative_eq!(multi_index_norm_sq(&f, 2), 1.0);
        assert_relative_eq!(tensor_norm_sq(&f, 2), 2.0);
    }
}
