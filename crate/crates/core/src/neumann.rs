//! Neumann boundary data `(V̂, M̂ₙ, M̂ₙʰ)`: synthesis from a displacement
//! field, compatibility check and the load functional.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::Field;
use crate::geometry::{BoundaryFrame, Domain, Segment};
use crate::jet::Jet;
use crate::material::{bending_pair_jets, i3, MaterialField};
use crate::quadrature;
use crate::spectral::PeriodicSamples;
use std::sync::Arc;

/// A scalar function on the boundary.
#[derive(Clone, Debug)]
pub enum BoundaryFunction {
    Zero,
    Constant(f64),
    /// Uniform samples in arclength, evaluated by trigonometric interpolation.
    Sampled(Arc<PeriodicSamples>),
    /// Analytic expression in the boundary point coordinates.
    Analytic(Expr),
}

impl BoundaryFunction {
    pub fn eval(&self, frame: &BoundaryFrame) -> f64 {
        match self {
            BoundaryFunction::Zero => 0.0,
            BoundaryFunction::Constant(c) => *c,
            BoundaryFunction::Sampled(p) => p.eval(frame.s),
            BoundaryFunction::Analytic(e) => e.value(frame.point),
        }
    }

    fn scaled(&self, f: f64) -> Self {
        match self {
            BoundaryFunction::Zero => BoundaryFunction::Zero,
            BoundaryFunction::Constant(c) => BoundaryFunction::Constant(c * f),
            BoundaryFunction::Sampled(p) => BoundaryFunction::Sampled(Arc::new(PeriodicSamples::new(
                p.period(),
                p.values().iter().map(|v| v * f).collect(),
            ))),
            BoundaryFunction::Analytic(e) => {
                BoundaryFunction::Analytic(Expr::parse(&format!("({}) * ({:e})", e.source(), f)).unwrap())
            }
        }
    }
}

/// Shear force `V̂`, bending moment `M̂ₙ` and high-order moment `M̂ₙʰ`.
#[derive(Clone, Debug)]
pub struct NeumannData {
    pub vhat: BoundaryFunction,
    pub mn_hat: BoundaryFunction,
    pub mnh_hat: BoundaryFunction,
}

impl NeumannData {
    pub fn zero() -> Self {
        NeumannData { vhat: BoundaryFunction::Zero, mn_hat: BoundaryFunction::Zero, mnh_hat: BoundaryFunction::Zero }
    }

    /// Data from three sample columns on a uniform arclength grid.
    pub fn from_samples(period: f64, vhat: Vec<f64>, mn_hat: Vec<f64>, mnh_hat: Vec<f64>) -> Result<Self> {
        if vhat.len() < 2 || vhat.len() != mn_hat.len() || vhat.len() != mnh_hat.len() {
            return Err(Error::InvalidInput("sample columns must have equal length >= 2".into()));
        }
        let wrap = |v| BoundaryFunction::Sampled(Arc::new(PeriodicSamples::new(period, v)));
        Ok(NeumannData { vhat: wrap(vhat), mn_hat: wrap(mn_hat), mnh_hat: wrap(mnh_hat) })
    }

    /// `(V̂, M̂ₙ, M̂ₙʰ)` at a boundary frame.
    pub fn eval(&self, frame: &BoundaryFrame) -> [f64; 3] {
        [self.vhat.eval(frame), self.mn_hat.eval(frame), self.mnh_hat.eval(frame)]
    }

    pub fn scaled(&self, f: f64) -> Self {
        NeumannData { vhat: self.vhat.scaled(f), mn_hat: self.mn_hat.scaled(f), mnh_hat: self.mnh_hat.scaled(f) }
    }

    /// Samples `(s, V̂, M̂ₙ, M̂ₙʰ)` on `n` uniform arclength nodes.
    pub fn tabulate(&self, dom: &Domain, n: usize) -> Vec<[f64; 4]> {
        (0..n)
            .map(|j| {
                let s = dom.perimeter() * j as f64 / n as f64;
                let f = dom.frame_wrapped(s);
                let [a, b, c] = self.eval(&f);
                [s, a, b, c]
            })
            .collect()
    }
}

/// Gauss nodes along the boundary, panelled between the given breakpoints
/// (arclengths) and segment junctions.
#[derive(Clone, Debug)]
pub struct BoundaryRule {
    pub frames: Vec<BoundaryFrame>,
    pub weights: Vec<f64>,
    /// Arclength intervals of the panels, in order.
    pub panels: Vec<(f64, f64)>,
    pub points_per_panel: usize,
}

impl BoundaryRule {
    pub fn new(dom: &Domain, breakpoints: &[f64], points_per_panel: usize, max_panel: f64) -> Self {
        let mut cuts: Vec<f64> = dom.segment_offsets().to_vec();
        cuts.extend(breakpoints.iter().map(|s| s.rem_euclid(dom.perimeter())));
        cuts.push(dom.perimeter());
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * dom.perimeter());
        let mut frames = Vec::new();
        let mut weights = Vec::new();
        let mut panels = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let pieces = ((b - a) / max_panel).ceil().max(1.0) as usize;
            let h = (b - a) / pieces as f64;
            for k in 0..pieces {
                let (pa, pb) = (a + k as f64 * h, a + (k + 1) as f64 * h);
                panels.push((pa, pb));
                let seg_idx = dom.segment_offsets().partition_point(|&o| o <= 0.5 * (pa + pb)).max(1) - 1;
                let seg: &Segment = &dom.segments()[seg_idx];
                let off = dom.segment_offsets()[seg_idx];
                for (s, wt) in quadrature::gauss_on(points_per_panel, pa, pb) {
                    let mut f = seg.frame(s - off);
                    f.s = s;
                    frames.push(f);
                    weights.push(wt);
                }
            }
        }
        BoundaryRule { frames, weights, panels, points_per_panel }
    }

    /// Default rule: 16-point panels no longer than 1/64 of the perimeter.
    pub fn standard(dom: &Domain) -> Self {
        BoundaryRule::new(dom, &[], 16, dom.perimeter() / 64.0)
    }

    pub fn integrate(&self, f: impl Fn(&BoundaryFrame) -> f64) -> f64 {
        self.frames.iter().zip(&self.weights).map(|(fr, w)| w * f(fr)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompatibilityReport {
    /// `∮V̂`, `∮(V̂x₁ + M̂ₙn₁)`, `∮(V̂x₂ + M̂ₙn₂)`.
    pub residuals: [f64; 3],
    pub tolerance: f64,
    pub passed: bool,
}

/// The three compatibility integrals, with the pass tolerance
/// `1e-8 · max(|V̂|∞|∂Ω|, |M̂ₙ|∞|∂Ω|)`.
pub fn compatibility_check(data: &NeumannData, dom: &Domain) -> CompatibilityReport {
    compatibility_check_with(data, dom, &BoundaryRule::standard(dom))
}

pub fn compatibility_check_with(data: &NeumannData, dom: &Domain, rule: &BoundaryRule) -> CompatibilityReport {
    let mut r = [0.0; 3];
    let (mut vmax, mut mmax) = (0.0f64, 0.0f64);
    for (f, w) in rule.frames.iter().zip(&rule.weights) {
        let [v, m, _] = data.eval(f);
        vmax = vmax.max(v.abs());
        mmax = mmax.max(m.abs());
        r[0] += w * v;
        r[1] += w * (v * f.point[0] + m * f.n[0]);
        r[2] += w * (v * f.point[1] + m * f.n[1]);
    }
    let tolerance = 1e-8 * (vmax * dom.perimeter()).max(mmax * dom.perimeter());
    let passed = r.iter().all(|v| v.abs() <= tolerance);
    CompatibilityReport { residuals: r, tolerance, passed }
}

/// Trace of a test function on the boundary: value, normal derivative and
/// second normal derivative `nᵀD²w n`.
pub fn trace_of(jet: &Jet, frame: &BoundaryFrame) -> (f64, f64, f64) {
    let n = frame.n;
    let g = [jet.deriv(1, 0), jet.deriv(0, 1)];
    let h = [[jet.deriv(2, 0), jet.deriv(1, 1)], [jet.deriv(1, 1), jet.deriv(0, 2)]];
    let wn = g[0] * n[0] + g[1] * n[1];
    let mut wnn = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            wnn += n[a] * h[a][b] * n[b];
        }
    }
    (jet.value(), wn, wnn)
}

/// `L̃(w) = -∮(V̂w + M̂ₙ nₐw,ₐ + M̂ₙʰ nₐn_βw,ₐ_β)`.
pub fn load_functional(data: &NeumannData, w: &dyn Field, rule: &BoundaryRule) -> f64 {
    -rule.integrate(|f| {
        let [v, m, mh] = data.eval(f);
        let (w0, wn, wnn) = trace_of(&w.jet(f.point, 2), f);
        v * w0 + m * wn + mh * wnn
    })
}

/// Pointwise boundary quantities entering the Neumann operators, before any
/// arclength differentiation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundaryTerms {
    /// `T_{αβ,α} n_β`
    pub q1: f64,
    /// `T(n, τ)`
    pub q2: f64,
    /// `M̄(τ, τ, n)`
    pub q3: f64,
    /// `M̄_{αβγ} n_γ (τ_{α,s} τ_β - n_{α,s} n_β)`
    pub q4: f64,
    /// `T(n, n)`
    pub q5: f64,
    /// `M̄_{αβγ} n_γ (τ_α n_β + τ_β n_α)`
    pub q6: f64,
    /// `M̄_{αβγ} n_γ n_{α,s} τ_β`
    pub q7: f64,
    /// `M̄(n, n, n)`
    pub q8: f64,
}

/// Couple tensors at `x` as jets. For a field jet of order `k` returns
/// `M_{αβ}` to order `k - 2` and `M̄ʰ_{αβγ}` to order `k - 3`.
pub fn couple_jets(u: &Jet, mat: &MaterialField, x: [f64; 2]) -> ([[Jet; 2]; 2], [Jet; 8]) {
    let k = u.order();
    assert!(k >= 3, "couple jets need at least third derivatives");
    let (c1, c2) = bending_pair_jets(mat, x, k - 2);
    let (b0, b1) = mat.b_jets(x, k - 3);
    let h = [[u.diff_axes(&[0, 0]), u.diff_axes(&[0, 1])], [u.diff_axes(&[1, 0]), u.diff_axes(&[1, 1])]];
    let tr = h[0][0] + h[1][1];
    let mut m = [[Jet::zero(k - 2); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut v = c1 * h[a][b];
            if a == b {
                v += c2 * tr;
            }
            m[a][b] = -v;
        }
    }
    let third: Vec<Jet> = (0..8).map(|id| u.diff_axes(&[id >> 2 & 1, id >> 1 & 1, id & 1])).collect();
    let trace = [third[i3(0, 0, 0)] + third[i3(1, 1, 0)], third[i3(0, 0, 1)] + third[i3(1, 1, 1)]];
    let s = (b0 - b1.scale(3.0)).scale(1.0 / 3.0);
    let mut mbar = [Jet::zero(k - 3); 8];
    for i in 0..2 {
        for j in 0..2 {
            for l in 0..2 {
                let mut v = b1.scale(5.0) * third[i3(i, j, l)];
                let mut t = Jet::zero(k - 3);
                if i == j {
                    t += trace[l];
                }
                if i == l {
                    t += trace[j];
                }
                if j == l {
                    t += trace[i];
                }
                v += s * t;
                mbar[i3(i, j, l)] = v;
            }
        }
    }
    (m, mbar)
}

/// Evaluates the pointwise boundary terms from a field jet of order 5.
pub fn boundary_terms(u: &Jet, mat: &MaterialField, frame: &BoundaryFrame) -> BoundaryTerms {
    let (m, mbar) = couple_jets(u, mat, frame.point);
    // T_αβ = M_αβ + M̄_αβγ,γ as order-1 jets
    let mut t = [[Jet::zero(1); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut v = m[a][b].truncate(1);
            for g in 0..2 {
                v += mbar[i3(a, b, g)].diff(g).truncate(1);
            }
            t[a][b] = v;
        }
    }
    let (n, tau, ts, ns) = (frame.n, frame.tau, frame.tau_s(), frame.n_s());
    let mb = |i: usize, j: usize, k: usize| mbar[i3(i, j, k)].value();
    let mut q = BoundaryTerms::default();
    for a in 0..2 {
        for b in 0..2 {
            q.q1 += t[a][b].diff(a).value() * n[b];
            q.q2 += t[a][b].value() * n[a] * tau[b];
            q.q5 += t[a][b].value() * n[a] * n[b];
            for g in 0..2 {
                let v = mb(a, b, g);
                q.q3 += v * tau[a] * tau[b] * n[g];
                q.q4 += v * n[g] * (ts[a] * tau[b] - ns[a] * n[b]);
                q.q6 += v * n[g] * (tau[a] * n[b] + tau[b] * n[a]);
                q.q7 += v * n[g] * ns[a] * tau[b];
                q.q8 += v * n[a] * n[b] * n[g];
            }
        }
    }
    q
}

/// Neumann data generated by a displacement field `u*`:
/// `V̂ = -(q1 + q2,s + q3,ss - q4,s)`, `M̂ₙ = q5 + q6,s - q7`, `M̂ₙʰ = -M̄(n,n,n)`,
/// with arclength derivatives taken spectrally on `samples` uniform nodes.
pub fn synthesize(u_star: &dyn Field, mat: &MaterialField, dom: &Domain, samples: usize) -> Result<NeumannData> {
    if !dom.boundary_is_c21() {
        return Err(Error::InsufficientSmoothness(
            "spectral synthesis (boundary must be of class C^{2,1} and periodic-smooth)".into(),
        ));
    }
    if samples < 8 {
        return Err(Error::InvalidInput("synthesis needs at least 8 samples".into()));
    }
    let per = dom.perimeter();
    let terms: Vec<BoundaryTerms> = (0..samples)
        .map(|j| {
            let f = dom.frame_wrapped(per * j as f64 / samples as f64);
            boundary_terms(&u_star.jet(f.point, 5), mat, &f)
        })
        .collect();
    let col = |g: fn(&BoundaryTerms) -> f64| PeriodicSamples::new(per, terms.iter().map(g).collect());
    let q2s = col(|q| q.q2).derivative(1);
    let q3ss = col(|q| q.q3).derivative(2);
    let q4s = col(|q| q.q4).derivative(1);
    let q6s = col(|q| q.q6).derivative(1);
    let mut v = Vec::with_capacity(samples);
    let mut mn = Vec::with_capacity(samples);
    let mut mnh = Vec::with_capacity(samples);
    for (j, q) in terms.iter().enumerate() {
        v.push(-(q.q1 + q2s.values()[j] + q3ss.values()[j] - q4s.values()[j]));
        mn.push(q.q5 + q6s.values()[j] - q.q7);
        mnh.push(-q.q8);
    }
    NeumannData::from_samples(per, v, mn, mnh)
}
