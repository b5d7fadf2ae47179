//! Empirical τ-sweeps of the Carleman estimates for Δ, Δ² and Δ³.
//!
//! For each τ the operator side `∫ρ^{a-2τ}|Δᵐu|²` (`lhs`) and the weighted
//! lower-order side (`rhs`) are integrated; `rhs / lhs` is the smallest
//! constant for which the estimate holds at that τ.

use super::polar::{PolarResolution, PolarRule};
use super::weight::CarlemanWeight;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{Field, Support};
use crate::jet::{multi_index_norm_sq, Jet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    Laplace,
    Bilaplace,
    Trilaplace,
}

impl Operator {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Operator::Laplace),
            2 => Ok(Operator::Bilaplace),
            3 => Ok(Operator::Trilaplace),
            _ => Err(Error::InvalidInput(format!("Carleman order {order} is not 1, 2 or 3"))),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Operator::Laplace => 1,
            Operator::Bilaplace => 2,
            Operator::Trilaplace => 3,
        }
    }

    fn jet_order(self) -> usize {
        2 * self.order() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub operator: Operator,
    pub epsilon: f64,
    /// Inner radius `r` of the doubling variant, if used.
    pub doubling_radius: Option<f64>,
    pub rows: Vec<SweepRow>,
    /// `sup_τ rhs / lhs`.
    pub constant: f64,
    /// Relative change of the constant when the quadrature is refined.
    pub quadrature_change: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    /// Outer radius `R₁` of the admissible support.
    pub outer_radius: f64,
    /// `r` for the doubling variants (support must avoid `B̄_{r/4}`).
    pub doubling_radius: Option<f64>,
    pub resolution: PolarResolution,
    pub exec: Execution,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            outer_radius: 0.5,
            doubling_radius: None,
            resolution: PolarResolution::new(32, 10, 64),
            exec: Execution::best(),
        }
    }
}

/// Squared quantities at one node, shared by all τ.
struct NodeTerms {
    log_rho: f64,
    /// `|Δᵐu|²`
    op: f64,
    /// `|Dᵏu|²`, `k = 0..=2m-2`
    d: [f64; 5],
    /// `|DΔ²u|²` (third order only)
    d_bilap: f64,
}

fn node_terms(op: Operator, j: &Jet, rho: f64) -> NodeTerms {
    let mut d = [0.0; 5];
    let kmax = match op {
        Operator::Laplace => 1,
        Operator::Bilaplace => 3,
        Operator::Trilaplace => 4,
    };
    for (k, v) in d.iter_mut().enumerate().take(kmax + 1) {
        *v = multi_index_norm_sq(j, k);
    }
    let lap = j.laplacian();
    let (opv, d_bilap) = match op {
        Operator::Laplace => (lap.value(), 0.0),
        Operator::Bilaplace => (lap.laplacian().value(), 0.0),
        Operator::Trilaplace => {
            let bil = lap.laplacian();
            (bil.laplacian().value(), multi_index_norm_sq(&bil, 1))
        }
    };
    NodeTerms { log_rho: rho.ln(), op: opv * opv, d, d_bilap }
}

fn sides(op: Operator, eps: f64, tau: f64, doubling: Option<f64>, t: &NodeTerms) -> (f64, f64) {
    let pw = |e: f64| (e * t.log_rho).exp();
    match op {
        Operator::Laplace => {
            let lhs = pw(4.0 - 2.0 * tau) * t.op;
            let mut rhs = 0.0;
            for k in 0..=1 {
                rhs += tau.powi(3 - 2 * k as i32) * pw(2.0 * k as f64 + eps - 2.0 * tau) * t.d[k];
            }
            if let Some(r) = doubling {
                rhs += tau * tau * r * pw(-1.0 - 2.0 * tau) * t.d[0];
            }
            (lhs, rhs)
        }
        Operator::Bilaplace => {
            let lhs = pw(8.0 - 2.0 * tau) * t.op;
            let mut rhs = 0.0;
            for k in 0..=3 {
                rhs += tau.powi(6 - 2 * k as i32) * pw(2.0 * k as f64 + 2.0 * eps - 2.0 * tau) * t.d[k];
            }
            (lhs, rhs)
        }
        Operator::Trilaplace => {
            let lhs = pw(4.0 - 2.0 * tau) * t.op;
            let mut rhs = tau * pw(2.0 + eps - 2.0 * tau) * t.d_bilap;
            for k in 0..=4 {
                rhs += tau.powi(9 - 2 * k as i32) * pw(2.0 * k as f64 + 5.0 * eps - 8.0 - 2.0 * tau) * t.d[k];
            }
            if let Some(r) = doubling {
                rhs += tau.powi(6) * r.powi(3) * pw(-11.0 - 2.0 * tau) * t.d[0];
            }
            (lhs, rhs)
        }
    }
}

/// Confirms that `u` vanishes off its declared support and that the
/// support lies in `B_{R₁} \ B̄_{inner}`.
fn check_support(u: &dyn Field, support: &Support, inner_limit: f64, outer_limit: f64) -> Result<()> {
    let (a, b) = support.radial_extent();
    if a <= inner_limit {
        return Err(Error::SupportViolation(format!(
            "support reaches radius {a}, must stay outside radius {inner_limit}"
        )));
    }
    if b > outer_limit {
        return Err(Error::SupportViolation(format!("support reaches radius {b} beyond R₁ = {outer_limit}")));
    }
    let probe = |r: f64| {
        (0..16).any(|k| {
            let t = std::f64::consts::TAU * k as f64 / 16.0;
            u.value([r * t.cos(), r * t.sin()]) != 0.0
        })
    };
    let radii_in = [0.0, 0.25 * a, 0.5 * a, 0.999 * a];
    let radii_out = [b * 1.001, 0.5 * (b + outer_limit.max(b)) + 1e-3, 2.0 * b];
    if radii_in.iter().chain(&radii_out).any(|&r| probe(r)) {
        return Err(Error::SupportViolation("field is nonzero outside its declared support".into()));
    }
    Ok(())
}

fn sweep_at(
    op: Operator,
    u: &dyn Field,
    support: &Support,
    w: &CarlemanWeight,
    taus: &[f64],
    doubling: Option<f64>,
    res: PolarResolution,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    let (a, b) = support.radial_extent();
    let rule = PolarRule::annulus(a, b, res);
    let order = op.jet_order();
    let terms: Vec<(f64, NodeTerms)> = exec.map_range(rule.len(), |i| {
        let x = rule.points[i];
        (rule.weights[i], node_terms(op, &u.jet(x, order), w.rho(x)))
    });
    let rows = exec.map(taus, |&tau| {
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for (wt, t) in &terms {
            let (l, r) = sides(op, w.epsilon, tau, doubling, t);
            lhs += wt * l;
            rhs += wt * r;
        }
        SweepRow { tau, lhs, rhs, ratio: rhs / lhs }
    });
    if rows.iter().any(|r| !(r.lhs.is_finite() && r.rhs.is_finite())) {
        return Err(Error::InvalidInput("weighted integrals overflow; lower τ or move the support outward".into()));
    }
    Ok(rows)
}

/// Sweeps τ for one test field and reports `sup_τ rhs/lhs`, together with
/// its change under a doubled quadrature resolution.
pub fn carleman_sweep(
    op: Operator,
    u: &dyn Field,
    support: &Support,
    w: &CarlemanWeight,
    taus: &[f64],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    if op == Operator::Trilaplace && w.epsilon > 0.2 + 1e-15 {
        return Err(Error::InvalidInput(format!("the Δ³ estimate needs ε ≤ 1/5, got {}", w.epsilon)));
    }
    if taus.is_empty() {
        return Err(Error::InvalidInput("empty τ list".into()));
    }
    let inner_limit = match opts.doubling_radius {
        Some(r) => {
            if !(r > 0.0 && r < opts.outer_radius) {
                return Err(Error::InvalidInput(format!("doubling radius {r} outside (0, R₁)")));
            }
            r / 4.0
        }
        None => 0.0,
    };
    check_support(u, support, inner_limit, opts.outer_radius)?;
    let coarse = sweep_at(op, u, support, w, taus, opts.doubling_radius, opts.resolution, opts.exec)?;
    let fine = sweep_at(op, u, support, w, taus, opts.doubling_radius, opts.resolution.refined(), opts.exec)?;
    let sup = |rows: &[SweepRow]| rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let (c0, c1) = (sup(&coarse), sup(&fine));
    Ok(SweepReport {
        operator: op,
        epsilon: w.epsilon,
        doubling_radius: opts.doubling_radius,
        rows: fine,
        constant: c1,
        quadrature_change: ((c1 - c0) / c1).abs(),
    })
}

/// `n` values evenly spaced on `[lo, hi]`.
pub fn tau_range(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{AnnularBump, DiskBump, Scaled};

    fn opts() -> SweepOptions {
        SweepOptions { resolution: PolarResolution::new(16, 10, 48), exec: Execution::Sequential, ..Default::default() }
    }

    #[test]
    fn radial_bump_laplace_sweep_is_finite_and_stable() {
        let u = AnnularBump::new(0.2, 0.4);
        let w = CarlemanWeight::new(0.5).unwrap();
        let rep = carleman_sweep(Operator::Laplace, &u, &u.support(), &w, &[5.0, 10.0, 20.0], &opts()).unwrap();
        assert!(rep.constant.is_finite() && rep.constant > 0.0);
        assert!(rep.quadrature_change < 1e-6, "{}", rep.quadrature_change);
        assert!(rep.rows.iter().all(|r| r.ratio <= rep.constant));
    }

    #[test]
    fn ratios_are_invariant_under_scaling() {
        let u = AnnularBump::new(0.2, 0.4);
        let v = Scaled { factor: 2.0, inner: AnnularBump::new(0.2, 0.4) };
        let w = CarlemanWeight::new(0.5).unwrap();
        for op in [Operator::Laplace, Operator::Bilaplace] {
            let a = carleman_sweep(op, &u, &u.support(), &w, &[8.0, 16.0], &opts()).unwrap();
            let b = carleman_sweep(op, &v, &u.support(), &w, &[8.0, 16.0], &opts()).unwrap();
            for (x, y) in a.rows.iter().zip(&b.rows) {
                assert!((x.ratio - y.ratio).abs() <= 1e-12 * x.ratio);
                assert!((4.0 * x.lhs - y.lhs).abs() <= 1e-12 * y.lhs);
            }
        }
    }

    #[test]
    fn both_sides_grow_with_tau() {
        let u = AnnularBump::new(0.1, 0.45);
        let w = CarlemanWeight::new(0.2).unwrap();
        let rep = carleman_sweep(Operator::Trilaplace, &u, &u.support(), &w, &[8.0, 16.0, 32.0], &opts()).unwrap();
        for p in rep.rows.windows(2) {
            assert!(p[1].lhs > p[0].lhs && p[1].rhs > p[0].rhs);
        }
        assert!(rep.rows.iter().all(|r| r.ratio <= rep.constant));
    }

    #[test]
    fn support_is_enforced() {
        let w = CarlemanWeight::new(0.5).unwrap();
        let centred = DiskBump { center: [0.0, 0.0], radius: 0.3 };
        assert!(matches!(
            carleman_sweep(Operator::Laplace, &centred, &centred.support(), &w, &[8.0], &opts()),
            Err(Error::SupportViolation(_))
        ));
        let wide = AnnularBump::new(0.2, 0.7);
        assert!(matches!(
            carleman_sweep(Operator::Laplace, &wide, &wide.support(), &w, &[8.0], &opts()),
            Err(Error::SupportViolation(_))
        ));
        // declared support narrower than the real one
        let u = AnnularBump::new(0.1, 0.4);
        let lie = Support { center: [0.0, 0.0], inner: 0.2, outer: 0.4 };
        assert!(matches!(
            carleman_sweep(Operator::Laplace, &u, &lie, &w, &[8.0], &opts()),
            Err(Error::SupportViolation(_))
        ));
        // doubling variant: support must avoid B_{r/4}
        let d = SweepOptions { doubling_radius: Some(0.45), ..opts() };
        assert!(matches!(
            carleman_sweep(Operator::Laplace, &u, &u.support(), &w, &[8.0], &d),
            Err(Error::SupportViolation(_))
        ));
    }

    #[test]
    fn trilaplace_needs_small_epsilon() {
        let u = AnnularBump::new(0.2, 0.4);
        let w = CarlemanWeight::new(0.5).unwrap();
        assert!(carleman_sweep(Operator::Trilaplace, &u, &u.support(), &w, &[8.0], &opts()).is_err());
    }

    #[test]
    fn doubling_variant_adds_a_positive_term() {
        let u = AnnularBump::new(0.2, 0.4);
        let w = CarlemanWeight::new(0.5).unwrap();
        let plain = carleman_sweep(Operator::Laplace, &u, &u.support(), &w, &[10.0], &opts()).unwrap();
        let d = SweepOptions { doubling_radius: Some(0.3), ..opts() };
        let doub = carleman_sweep(Operator::Laplace, &u, &u.support(), &w, &[10.0], &d).unwrap();
        assert_eq!(plain.rows[0].lhs, doub.rows[0].lhs);
        assert!(doub.rows[0].rhs > plain.rows[0].rhs);
    }

    #[test]
    fn tau_grid() {
        assert_eq!(tau_range(8.0, 32.0, 4), vec![8.0, 16.0, 24.0, 32.0]);
        assert_eq!(Operator::from_order(2).unwrap(), Operator::Bilaplace);
        assert!(Operator::from_order(4).is_err());
    }
}
