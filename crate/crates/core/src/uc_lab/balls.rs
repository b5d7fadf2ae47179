//! Ball integrals `∫_{B_r} u²` and the doubling, three-sphere and
//! Caccioppoli measurements built on them. Balls are centred at the origin.

use super::polar::{PolarResolution, PolarRule};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::Field;
use crate::jet::multi_index_norm_sq;

/// Doubling exponent `k̄`.
pub const DOUBLING_EXPONENT: i32 = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct BallProfile {
    /// Increasing radii.
    pub radii: Vec<f64>,
    /// `∫_{B_r} u²` per radius.
    pub l2: Vec<f64>,
}

impl BallProfile {
    /// `∫_{B_r} u²` at a tabulated radius.
    pub fn at(&self, r: f64) -> Result<f64> {
        self.radii
            .iter()
            .position(|&q| (q - r).abs() <= 1e-12 * r.abs().max(1e-300))
            .map(|i| self.l2[i])
            .ok_or_else(|| Error::InvalidInput(format!("radius {r} is not in the profile")))
    }
}

/// Accumulates `∫_{B_r} u²` over the sorted, deduplicated radii, annulus by
/// annulus, so the profile is nondecreasing by construction.
pub fn ball_profile(
    u: &dyn Field,
    radii: &[f64],
    limit: f64,
    res: PolarResolution,
    exec: Execution,
) -> Result<BallProfile> {
    let mut rs: Vec<f64> = radii.to_vec();
    rs.sort_by(f64::total_cmp);
    rs.dedup();
    for &r in &rs {
        if !(r > 0.0) || r >= limit {
            return Err(Error::RadiusOutOfDomain { radius: r, limit });
        }
    }
    let mut l2 = Vec::with_capacity(rs.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &r in &rs {
        let rule = PolarRule::annulus(prev, r, res);
        acc += rule.integrate(exec, |x| {
            let v = u.value(x);
            v * v
        });
        l2.push(acc);
        prev = r;
    }
    Ok(BallProfile { radii: rs, l2 })
}

/// `R₁ / 2ᵏ` for `k = 0..=levels`, the radii used by the doubling report.
pub fn dyadic_radii(r1: f64, levels: u32) -> Vec<f64> {
    (0..=levels).map(|k| r1 / 2f64.powi(k as i32)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoublingRow {
    pub r: f64,
    pub l2_r: f64,
    pub l2_2r: f64,
    /// `∫_{B_{2r}}u² / ∫_{B_r}u²`
    pub ratio: f64,
    /// Smallest `C` with `∫_{B_{2r}}u² ≤ C N^{k̄} ∫_{B_r}u²`.
    pub c_cert: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoublingReport {
    /// Frequency `N = ∫_{B_{R₁}}u² / ∫_{B_{R₁/2⁷}}u²`.
    pub frequency: f64,
    pub rows: Vec<DoublingRow>,
    /// Largest `c_cert` over the tested radii.
    pub certified_c: f64,
}

/// Doubling ratios for every tabulated `r < R₁/2⁸` whose double is also
/// tabulated.
pub fn doubling_report(profile: &BallProfile, r1: f64) -> Result<DoublingReport> {
    let outer = profile.at(r1)?;
    let inner_r = r1 / 128.0;
    let inner = profile.at(inner_r)?;
    let floor = 1e-300f64.max(1e-30 * outer);
    if !(inner > floor) {
        return Err(Error::DegenerateDenominator(inner));
    }
    let frequency = outer / inner;
    let nk = frequency.powi(DOUBLING_EXPONENT);
    let mut rows = Vec::new();
    for (i, &r) in profile.radii.iter().enumerate() {
        if r >= r1 / 256.0 {
            continue;
        }
        let Ok(l2_2r) = profile.at(2.0 * r) else { continue };
        let l2_r = profile.l2[i];
        if !(l2_r > 0.0) {
            return Err(Error::DegenerateDenominator(l2_r));
        }
        let ratio = l2_2r / l2_r;
        rows.push(DoublingRow { r, l2_r, l2_2r, ratio, c_cert: ratio / nk });
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("profile has no radius pair r, 2r with r < R₁/2⁸".into()));
    }
    let certified_c = rows.iter().map(|r| r.c_cert).fold(0.0, f64::max);
    Ok(DoublingReport { frequency, rows, certified_c })
}

/// `θ̃(s, r) = 1 / (1 + 2k̄ log₂(s/r))`.
pub fn three_sphere_exponent(s: f64, r: f64) -> f64 {
    1.0 / (1.0 + 2.0 * DOUBLING_EXPONENT as f64 * (s / r).log2())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeSphereReport {
    /// `∫_{B_s}u²`
    pub lhs: f64,
    /// `(∫_{B_{R₁}}u²)^{1-θ} (∫_{B_r}u²)^θ`, the right side with `C = 1`.
    pub rhs: f64,
    pub theta: f64,
    /// Smallest `C` for which the inequality holds.
    pub c_cert: f64,
}

pub fn three_sphere_report(profile: &BallProfile, r: f64, s: f64, r1: f64) -> Result<ThreeSphereReport> {
    if 2.0 * r > s {
        return Err(Error::RadiusOrdering { r, s });
    }
    if s > r1 / 256.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("s = {s} exceeds R₁/2⁸ = {}", r1 / 256.0)));
    }
    let theta = three_sphere_exponent(s, r);
    let (ls, lr, lo) = (profile.at(s)?, profile.at(r)?, profile.at(r1)?);
    if !(lr > 0.0) {
        return Err(Error::DegenerateDenominator(lr));
    }
    let rhs = lo.powf(1.0 - theta) * lr.powf(theta);
    // ls ≤ (C lo)^{1-θ} lr^θ  ⇔  C ≥ (ls / lr^θ)^{1/(1-θ)} / lo
    let c_cert = (ls / lr.powf(theta)).powf(1.0 / (1.0 - theta)) / lo;
    Ok(ThreeSphereReport { lhs: ls, rhs, theta, c_cert })
}

/// `‖Dʰu‖_{L²(B_{r/2})} rʰ / ‖u‖_{L²(B_r)}` for `h = 1..=6`.
pub fn caccioppoli_report(u: &dyn Field, r: f64, res: PolarResolution, exec: Execution) -> Result<[f64; 6]> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!("radius {r} must be positive")));
    }
    let base = PolarRule::disk(r, res).integrate(exec, |x| {
        let v = u.value(x);
        v * v
    });
    if !(base > 0.0) {
        return Err(Error::DegenerateDenominator(base));
    }
    let d = PolarRule::disk(0.5 * r, res).integrate_many::<6>(exec, |x| {
        let j = u.jet(x, 6);
        let mut out = [0.0; 6];
        for h in 1..=6.min(j.order()) {
            out[h - 1] = multi_index_norm_sq(&j, h);
        }
        out
    });
    let mut ratios = [0.0; 6];
    for h in 0..6 {
        ratios[h] = d[h].sqrt() * r.powi(h as i32 + 1) / base.sqrt();
    }
    Ok(ratios)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::field::HarmonicPower;
    use std::f64::consts::PI;

    const RES: PolarResolution = PolarResolution::new(2, 8, 64);

    fn profile(u: &dyn Field, r1: f64) -> BallProfile {
        ball_profile(u, &dyadic_radii(r1, 12), 1.0, RES, Execution::Sequential).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn constant_and_linear_profiles() {
        let one = profile(&HarmonicPower { m: 0 }, 0.5);
        let x1 = profile(&Expr::parse("x1").unwrap(), 0.5);
        for (i, &r) in one.radii.iter().enumerate() {
            assert!(rel(one.l2[i], PI * r * r) < 1e-12);
            assert!(rel(x1.l2[i], PI * r.powi(4) / 4.0) < 1e-12);
        }
    }

    #[test]
    fn harmonic_power_profile() {
        // ∫_{B_r} (ρᵐ cos mθ)² = π r^{2m+2} / (2m+2)
        for m in 2..=4 {
            let p = profile(&HarmonicPower { m }, 0.5);
            for (i, &r) in p.radii.iter().enumerate() {
                assert!(rel(p.l2[i], PI * r.powi(2 * m as i32 + 2) / f64::from(2 * m + 2)) < 1e-10);
            }
        }
    }

    #[test]
    fn profile_is_monotone_and_checks_radii() {
        let p = profile(&Expr::parse("sin(3*x1) + x2").unwrap(), 0.5);
        assert!(p.l2.windows(2).all(|w| w[0] <= w[1]));
        assert!(matches!(
            ball_profile(&HarmonicPower { m: 1 }, &[0.5, 1.2], 1.0, RES, Execution::Sequential),
            Err(Error::RadiusOutOfDomain { .. })
        ));
    }

    #[test]
    fn doubling_ratios_of_homogeneous_fields() {
        let r1 = 0.5;
        for m in 0..=4u32 {
            let d = doubling_report(&profile(&HarmonicPower { m }, r1), r1).unwrap();
            let exact = 4f64.powi(m as i32 + 1);
            assert!(!d.rows.is_empty());
            for row in &d.rows {
                assert!(rel(row.ratio, exact) < 1e-7, "m={m}: {}", row.ratio);
            }
            // N = (2⁷)^{2m+2}
            assert!(rel(d.frequency, 2f64.powi(14 * (m as i32 + 1))) < 1e-7);
            assert!(d.certified_c.is_finite() && d.certified_c > 0.0);
        }
    }

    #[test]
    fn doubling_needs_mass_near_the_centre() {
        let p = BallProfile { radii: dyadic_radii(0.5, 9), l2: vec![0.0; 10] };
        let mut p = p;
        p.radii.sort_by(f64::total_cmp);
        p.l2[9] = 1.0;
        assert!(matches!(doubling_report(&p, 0.5), Err(Error::DegenerateDenominator(_))));
    }

    #[test]
    fn three_sphere_exponents() {
        assert_eq!(three_sphere_exponent(2.0, 1.0), 1.0 / 17.0);
        assert_eq!(three_sphere_exponent(4.0, 1.0), 1.0 / 33.0);
    }

    #[test]
    fn three_sphere_for_x1() {
        let r1 = 0.5;
        let p = profile(&Expr::parse("x1").unwrap(), r1);
        let t = three_sphere_report(&p, r1 / 1024.0, r1 / 512.0, r1).unwrap();
        assert_eq!(t.theta, 1.0 / 17.0);
        assert!(t.c_cert.is_finite() && t.c_cert > 0.0);
        // with the certified constant the inequality is an equality
        let lhs = (t.c_cert * p.at(r1).unwrap()).powf(1.0 - t.theta) * p.at(r1 / 1024.0).unwrap().powf(t.theta);
        assert!(rel(lhs, t.lhs) < 1e-10);
        assert!(matches!(three_sphere_report(&p, r1 / 512.0, r1 / 1024.0, r1), Err(Error::RadiusOrdering { .. })));
    }

    #[test]
    fn caccioppoli_examples() {
        assert_eq!(caccioppoli_report(&HarmonicPower { m: 0 }, 0.5, RES, Execution::Sequential).unwrap(), [0.0; 6]);
        // ‖Dx1‖_{B_{1/4}} = (π/16)^{1/2}, ‖x1‖_{B_{1/2}} = (π/64)^{1/2}
        let c = caccioppoli_report(&Expr::parse("x1").unwrap(), 0.5, RES, Execution::Sequential).unwrap();
        let exact = (PI / 16.0).sqrt() * 0.5 / (PI / 64.0).sqrt();
        assert!(rel(c[0], exact) < 1e-12);
        assert!(c[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn caccioppoli_is_scale_invariant_for_homogeneous_fields() {
        for m in 2..=4 {
            let u = HarmonicPower { m };
            let base = caccioppoli_report(&u, 0.4, RES, Execution::Sequential).unwrap();
            for r in [0.1, 0.2] {
                let c = caccioppoli_report(&u, r, RES, Execution::Sequential).unwrap();
                for h in 0..6 {
                    assert!((c[h] - base[h]).abs() <= 1e-10 * base[h].max(1.0));
                }
            }
        }
    }
}
