//! The sixth-order operator `h(u) = (M̄ʰ_{αβγ}(u)),_{αβγ}` of the
//! high-order couple tensor, computed three ways:
//!
//! * from the tensor components, differentiating every `M̄ʰ_{αβγ}`;
//! * from the grouped moments `M₁₁₁ = (b₀+2b₁)(Δu),₁ - 5b₁u,₁₂₂`, ... each
//!   differentiated by the product rule;
//! * in the regrouped form `(b₀+2b₁)Δ³u + (3b₀+6b₁),ₐ(Δ²u),ₐ + R(u)`, with the
//!   fourth-and-lower order remainder `R` written out term by term.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::jet::Jet;
use crate::material::{i3, MaterialField};
use crate::neumann::couple_jets;

/// Partial derivative `∂^{i}_{1}∂^{j}_{2}` of a jet at its base point.
fn d(j: &Jet, i: usize, k: usize) -> f64 {
    j.deriv(i, k)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReductionPoint {
    pub x: [f64; 2],
    /// `h(u)` from the tensor components.
    pub tensor: f64,
    /// `h(u)` from the grouped moments.
    pub expanded: f64,
    /// `h(u)` from the regrouped form.
    pub regrouped: f64,
    /// Sum of the fifth-order terms of the expansion.
    pub fifth_expanded: f64,
    /// `(3b₀+6b₁),ₐ(Δ²u),ₐ`.
    pub fifth_regrouped: f64,
    /// `(3b₀+6b₁),ₐ` at `x`.
    pub fifth_coefficient: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionReport {
    pub points: Vec<ReductionPoint>,
    /// Largest pairwise gap between the three routes, relative to the
    /// largest term magnitude.
    pub gap: f64,
    /// Largest relative gap between the two fifth-order forms.
    pub fifth_gap: f64,
    /// `sup |Δ³u| / (|DΔ²u| + Σ_{k≤4}|Dᵏu|)` over the points.
    pub inequality_constant: f64,
}

/// `h(u)` from the components `M̄ʰ_{αβγ}` of the couple tensor.
pub fn h_from_tensor(u: &Jet, mat: &MaterialField, x: [f64; 2]) -> f64 {
    let (_, mbar) = couple_jets(u, mat, x);
    let mut h = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                h += mbar[i3(a, b, c)].deriv_axes(&[a, b, c]);
            }
        }
    }
    h
}

/// Grouped moments `[M₁₁₁, M₂₂₂, M₁₁₂, M₂₂₁]` as jets of order 3.
fn grouped_moments(u: &Jet, b0: &Jet, b1: &Jet) -> [Jet; 4] {
    let lap = u.laplacian();
    let lap1 = lap.diff(0);
    let lap2 = lap.diff(1);
    let c2 = *b0 + b1.scale(2.0);
    let c12 = *b0 + b1.scale(12.0);
    [
        c2 * lap1 - *b1 * u.diff_axes(&[0, 1, 1]).scale(5.0),
        c2 * lap2 - *b1 * u.diff_axes(&[0, 0, 1]).scale(5.0),
        c12 * lap2 - *b1 * u.diff_axes(&[1, 1, 1]).scale(15.0),
        c12 * lap1 - *b1 * u.diff_axes(&[0, 0, 0]).scale(15.0),
    ]
}

fn h_expanded(u: &Jet, b0: &Jet, b1: &Jet) -> f64 {
    let m = grouped_moments(u, b0, b1);
    m[0].deriv(3, 0) + m[1].deriv(0, 3) + m[2].deriv(2, 1) + m[3].deriv(1, 2)
}

/// Fifth-order part of the product-rule expansion: every term where the
/// coefficient carries exactly one derivative.
fn fifth_expanded(u: &Jet, b0: &Jet, b1: &Jet) -> f64 {
    let c2 = *b0 + b1.scale(2.0);
    let c12 = *b0 + b1.scale(12.0);
    let lap = u.laplacian();
    let l = |i, k| d(&lap, i, k);
    let g = |j: &Jet, i, k| d(j, i, k);
    // (fg),111 -> 3 f,1 g,11 ; (fg),222 -> 3 f,2 g,22
    // (fg),112 -> f,2 g,11 + 2 f,1 g,12 ; (fg),122 -> f,1 g,22 + 2 f,2 g,12
    let m111 = 3.0 * g(&c2, 1, 0) * l(3, 0) - 5.0 * 3.0 * g(b1, 1, 0) * d(u, 3, 2);
    let m222 = 3.0 * g(&c2, 0, 1) * l(0, 3) - 5.0 * 3.0 * g(b1, 0, 1) * d(u, 2, 3);
    let m112 = g(&c12, 0, 1) * l(2, 1) + 2.0 * g(&c12, 1, 0) * l(1, 2)
        - 15.0 * (g(b1, 0, 1) * d(u, 2, 3) + 2.0 * g(b1, 1, 0) * d(u, 1, 4));
    let m221 = g(&c12, 1, 0) * l(1, 2) + 2.0 * g(&c12, 0, 1) * l(2, 1)
        - 15.0 * (g(b1, 1, 0) * d(u, 3, 2) + 2.0 * g(b1, 0, 1) * d(u, 4, 1));
    m111 + m222 + m112 + m221
}

/// Terms of the expansion where the coefficient carries two or three
/// derivatives (fourth and lower order in `u`).
fn remainder(u: &Jet, b0: &Jet, b1: &Jet) -> f64 {
    let c2 = *b0 + b1.scale(2.0);
    let c12 = *b0 + b1.scale(12.0);
    let lap = u.laplacian();
    let l = |i, k| d(&lap, i, k);
    let m111 = d(&c2, 3, 0) * l(1, 0) + 3.0 * d(&c2, 2, 0) * l(2, 0)
        - 5.0 * (d(b1, 3, 0) * d(u, 1, 2) + 3.0 * d(b1, 2, 0) * d(u, 2, 2));
    let m222 = d(&c2, 0, 3) * l(0, 1) + 3.0 * d(&c2, 0, 2) * l(0, 2)
        - 5.0 * (d(b1, 0, 3) * d(u, 2, 1) + 3.0 * d(b1, 0, 2) * d(u, 2, 2));
    let m112 = d(&c12, 2, 1) * l(0, 1) + d(&c12, 2, 0) * l(0, 2) + 2.0 * d(&c12, 1, 1) * l(1, 1)
        - 15.0 * (d(b1, 2, 1) * d(u, 0, 3) + d(b1, 2, 0) * d(u, 0, 4) + 2.0 * d(b1, 1, 1) * d(u, 1, 3));
    let m221 = d(&c12, 1, 2) * l(1, 0) + d(&c12, 0, 2) * l(2, 0) + 2.0 * d(&c12, 1, 1) * l(1, 1)
        - 15.0 * (d(b1, 1, 2) * d(u, 3, 0) + d(b1, 0, 2) * d(u, 4, 0) + 2.0 * d(b1, 1, 1) * d(u, 3, 1));
    m111 + m222 + m112 + m221
}

/// Checks the regrouping at one point for coefficient fields `b0`, `b1`.
pub fn reduction_point(u: &Jet, b0: &Jet, b1: &Jet, tensor: f64, x: [f64; 2]) -> ReductionPoint {
    let lap = u.laplacian();
    let bilap = lap.laplacian();
    let trilap = bilap.laplacian().value();
    let a = *b0 * 3.0 + b1.scale(6.0);
    let coef = [a.deriv(1, 0), a.deriv(0, 1)];
    let fifth_regrouped = coef[0] * bilap.deriv(1, 0) + coef[1] * bilap.deriv(0, 1);
    let regrouped = (b0.value() + 2.0 * b1.value()) * trilap + fifth_regrouped + remainder(u, b0, b1);
    ReductionPoint {
        x,
        tensor,
        expanded: h_expanded(u, b0, b1),
        regrouped,
        fifth_expanded: fifth_expanded(u, b0, b1),
        fifth_regrouped,
        fifth_coefficient: coef,
    }
}

/// Runs the three routes at each point for `u` and the material's `b₀, b₁`.
pub fn reduction_check(u: &dyn Field, mat: &MaterialField, points: &[[f64; 2]]) -> Result<ReductionReport> {
    let mut out = Vec::with_capacity(points.len());
    for &x in points {
        let j = u.jet(x, 6);
        if j.order() < 6 {
            return Err(Error::OrderTooHigh { requested: 6, available: j.order() });
        }
        let (b0, b1) = mat.b_jets(x, 3);
        let tensor = h_from_tensor(&j, mat, x);
        out.push((reduction_point(&j, &b0, &b1, tensor, x), inequality_ratio(&j)));
    }
    Ok(summarize(out))
}

/// Same as [`reduction_check`] with `b₀`, `b₁` given as independent fields;
/// the tensor route is skipped (reported equal to the expanded one).
pub fn reduction_check_fields(
    u: &dyn Field,
    b0: &dyn Field,
    b1: &dyn Field,
    points: &[[f64; 2]],
) -> Result<ReductionReport> {
    let mut out = Vec::with_capacity(points.len());
    for &x in points {
        let j = u.jet(x, 6);
        if j.order() < 6 {
            return Err(Error::OrderTooHigh { requested: 6, available: j.order() });
        }
        let (c0, c1) = (b0.jet(x, 3), b1.jet(x, 3));
        let tensor = h_expanded(&j, &c0, &c1);
        out.push((reduction_point(&j, &c0, &c1, tensor, x), inequality_ratio(&j)));
    }
    Ok(summarize(out))
}

fn inequality_ratio(j: &Jet) -> f64 {
    let bilap = j.laplacian().laplacian();
    let tri = bilap.laplacian().value().abs();
    let mut denom = bilap.deriv(1, 0).hypot(bilap.deriv(0, 1));
    for k in 0..=4 {
        denom += crate::jet::multi_index_norm_sq(j, k).sqrt();
    }
    if denom > 0.0 {
        tri / denom
    } else if tri == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn summarize(points: Vec<(ReductionPoint, f64)>) -> ReductionReport {
    let mut gap: f64 = 0.0;
    let mut fifth_gap: f64 = 0.0;
    let mut constant: f64 = 0.0;
    let scale =
        points.iter().map(|(p, _)| p.tensor.abs().max(p.expanded.abs()).max(p.regrouped.abs())).fold(0.0f64, f64::max);
    let fifth_scale =
        points.iter().map(|(p, _)| p.fifth_expanded.abs().max(p.fifth_regrouped.abs())).fold(0.0f64, f64::max);
    for (p, m) in &points {
        if scale > 0.0 {
            let g =
                (p.tensor - p.expanded).abs().max((p.expanded - p.regrouped).abs()).max((p.tensor - p.regrouped).abs());
            gap = gap.max(g / scale);
        }
        if fifth_scale > 0.0 {
            fifth_gap = fifth_gap.max((p.fifth_expanded - p.fifth_regrouped).abs() / fifth_scale);
        }
        constant = constant.max(*m);
    }
    ReductionReport {
        points: points.into_iter().map(|(p, _)| p).collect(),
        gap,
        fifth_gap,
        inequality_constant: constant,
    }
}
