//! Domains, their arclength-parameterised boundaries and the boundary frame
//! calculus (tangent, normal, curvature, surface derivatives).
//!
//! Boundaries are traversed counterclockwise. The tangent is `τ = e₃ × n`,
//! so the outward normal is `n = (τ₂, -τ₁)`, and the Frenet relations read
//! `n,s = 𝒦τ` and `τ,s = -𝒦n`.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::Jet;
use crate::quadrature;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

/// Smooth map from a reference rectangle onto the physical domain.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneMap {
    pub components: [Expr; 2],
}

/// First, second and third derivatives of a plane map:
/// `s[k][r] = ∂φ_k/∂ξ_r`, `r[k][a][b] = ∂²φ_k/∂ξ_a∂ξ_b`, `z[k][a][b][c]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapJacobians {
    pub s: [[f64; 2]; 2],
    pub r: [[[f64; 2]; 2]; 2],
    pub z: [[[[f64; 2]; 2]; 2]; 2],
}

impl MapJacobians {
    pub fn det(&self) -> f64 {
        self.s[0][0] * self.s[1][1] - self.s[0][1] * self.s[1][0]
    }
}

impl PlaneMap {
    pub fn identity() -> Self {
        PlaneMap { components: [Expr::parse("x1").unwrap(), Expr::parse("x2").unwrap()] }
    }

    pub fn apply(&self, xi: [f64; 2]) -> [f64; 2] {
        [self.components[0].value(xi), self.components[1].value(xi)]
    }

    /// Jets of both components at `xi`.
    pub fn jets(&self, xi: [f64; 2], order: usize) -> [Jet; 2] {
        [self.components[0].jet(xi, order), self.components[1].jet(xi, order)]
    }

    pub fn jacobians(&self, xi: [f64; 2]) -> MapJacobians {
        let j = self.jets(xi, 3);
        let mut out = MapJacobians { s: [[0.0; 2]; 2], r: [[[0.0; 2]; 2]; 2], z: [[[[0.0; 2]; 2]; 2]; 2] };
        for k in 0..2 {
            for a in 0..2 {
                out.s[k][a] = j[k].deriv_axes(&[a]);
                for b in 0..2 {
                    out.r[k][a][b] = j[k].deriv_axes(&[a, b]);
                    for c in 0..2 {
                        out.z[k][a][b][c] = j[k].deriv_axes(&[a, b, c]);
                    }
                }
            }
        }
        out
    }

    /// Jets `h(Δx)` of the inverse map around `φ(xi)`: `φ(xi + h) = φ(xi) + Δx`.
    pub fn inverse_jets(&self, xi: [f64; 2], order: usize) -> Result<[Jet; 2]> {
        let f = self.jets(xi, order);
        let s = [[f[0].deriv(1, 0), f[0].deriv(0, 1)], [f[1].deriv(1, 0), f[1].deriv(0, 1)]];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        if det.abs() < 1e-300 {
            return Err(Error::SingularMap { x: xi[0], y: xi[1], det });
        }
        let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        let dx = Jet::coordinates([0.0, 0.0], order);
        // nonlinear part of the forward map
        let mut nl = f;
        for k in 0..2 {
            nl[k].set_coeff(0, 0, 0.0);
            if order >= 1 {
                nl[k].set_coeff(1, 0, 0.0);
                nl[k].set_coeff(0, 1, 0.0);
            }
        }
        let mut h = [dx[0].scale(inv[0][0]) + dx[1].scale(inv[0][1]), dx[0].scale(inv[1][0]) + dx[1].scale(inv[1][1])];
        for _ in 1..order {
            let g = [nl[0].substitute(h, order), nl[1].substitute(h, order)];
            let rhs = [dx[0] - g[0], dx[1] - g[1]];
            h = [rhs[0].scale(inv[0][0]) + rhs[1].scale(inv[0][1]), rhs[0].scale(inv[1][0]) + rhs[1].scale(inv[1][1])];
        }
        Ok(h)
    }
}

/// Curvature of a planar curve from its first and second parameter derivatives.
pub fn parametric_curvature(d1: [f64; 2], d2: [f64; 2]) -> f64 {
    (d1[0] * d2[1] - d1[1] * d2[0]) / d1[0].hypot(d1[1]).powi(3)
}

/// Curvature of the graph `x₂ = g(x₁)` traversed with increasing `x₁`.
pub fn graph_curvature(dg: f64, d2g: f64) -> f64 {
    d2g / (1.0 + dg * dg).powf(1.5)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryFrame {
    pub point: [f64; 2],
    pub n: [f64; 2],
    pub tau: [f64; 2],
    pub curvature: f64,
    pub s: f64,
}

impl BoundaryFrame {
    /// `τ,s = -𝒦n`.
    pub fn tau_s(&self) -> [f64; 2] {
        [-self.curvature * self.n[0], -self.curvature * self.n[1]]
    }

    /// `n,s = 𝒦τ`.
    pub fn n_s(&self) -> [f64; 2] {
        [self.curvature * self.tau[0], self.curvature * self.tau[1]]
    }

    fn from_tangent(point: [f64; 2], tangent: [f64; 2], curvature: f64, s: f64) -> Self {
        let len = tangent[0].hypot(tangent[1]);
        let tau = [tangent[0] / len, tangent[1] / len];
        BoundaryFrame { point, n: [tau[1], -tau[0]], tau, curvature, s }
    }
}

#[derive(Clone, Debug)]
pub struct MappedEdge {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub map: Arc<PlaneMap>,
    /// Cumulative arclength at `PANELS + 1` equispaced edge parameters.
    table: Vec<f64>,
}

const EDGE_PANELS: usize = 64;

impl MappedEdge {
    fn new(from: [f64; 2], to: [f64; 2], map: Arc<PlaneMap>) -> Self {
        let mut e = MappedEdge { from, to, map, table: vec![0.0] };
        let mut acc = 0.0;
        for k in 0..EDGE_PANELS {
            let a = k as f64 / EDGE_PANELS as f64;
            let b = (k + 1) as f64 / EDGE_PANELS as f64;
            acc += quadrature::gauss_on(12, a, b).map(|(t, w)| w * e.speed(t)).sum::<f64>();
            e.table.push(acc);
        }
        e
    }

    fn derivs(&self, t: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let d = [self.to[0] - self.from[0], self.to[1] - self.from[1]];
        let xi = [self.from[0] + t * d[0], self.from[1] + t * d[1]];
        let j = self.map.jacobians(xi);
        let x = self.map.apply(xi);
        let mut d1 = [0.0; 2];
        let mut d2 = [0.0; 2];
        for k in 0..2 {
            for a in 0..2 {
                d1[k] += j.s[k][a] * d[a];
                for b in 0..2 {
                    d2[k] += j.r[k][a][b] * d[a] * d[b];
                }
            }
        }
        (x, d1, d2)
    }

    fn speed(&self, t: f64) -> f64 {
        let (_, d1, _) = self.derivs(t);
        d1[0].hypot(d1[1])
    }

    fn length(&self) -> f64 {
        *self.table.last().unwrap()
    }

    /// Arclength from the start of the edge to parameter `t ∈ [0, 1]`.
    pub fn arclength_at(&self, t: f64) -> f64 {
        let k = ((t * EDGE_PANELS as f64).floor() as usize).min(EDGE_PANELS - 1);
        let a = k as f64 / EDGE_PANELS as f64;
        self.table[k] + quadrature::gauss_on(12, a, t).map(|(u, w)| w * self.speed(u)).sum::<f64>()
    }

    /// Reference point at edge parameter `t`.
    pub fn reference_point(&self, t: f64) -> [f64; 2] {
        [self.from[0] + t * (self.to[0] - self.from[0]), self.from[1] + t * (self.to[1] - self.from[1])]
    }

    /// Edge parameter at arclength `s` from the start.
    pub fn param_at_arclength(&self, s: f64) -> f64 {
        self.param_at(s)
    }

    /// Edge parameter with arclength `s` from the start.
    fn param_at(&self, s: f64) -> f64 {
        let k = self.table.partition_point(|&v| v <= s).clamp(1, EDGE_PANELS) - 1;
        let (a, b) = (k as f64 / EDGE_PANELS as f64, (k + 1) as f64 / EDGE_PANELS as f64);
        let mut t = a + (b - a) * (s - self.table[k]) / (self.table[k + 1] - self.table[k]);
        for _ in 0..30 {
            let arc: f64 = quadrature::gauss_on(12, a, t).map(|(u, w)| w * self.speed(u)).sum();
            let dt = (self.table[k] + arc - s) / self.speed(t);
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        t
    }
}

#[derive(Clone, Debug)]
pub enum Segment {
    Line {
        from: [f64; 2],
        to: [f64; 2],
    },
    /// Counterclockwise arc starting at angle `start` and sweeping `sweep > 0`.
    Arc {
        center: [f64; 2],
        radius: f64,
        start: f64,
        sweep: f64,
    },
    Mapped(MappedEdge),
}

impl Segment {
    pub fn length(&self) -> f64 {
        match self {
            Segment::Line { from, to } => (to[0] - from[0]).hypot(to[1] - from[1]),
            Segment::Arc { radius, sweep, .. } => radius * sweep,
            Segment::Mapped(e) => e.length(),
        }
    }

    /// Frame at local arclength `s` (measured from the segment start).
    pub fn frame(&self, s: f64) -> BoundaryFrame {
        match self {
            Segment::Line { from, to } => {
                let len = self.length();
                let d = [(to[0] - from[0]) / len, (to[1] - from[1]) / len];
                BoundaryFrame::from_tangent([from[0] + s * d[0], from[1] + s * d[1]], d, 0.0, s)
            }
            Segment::Arc { center, radius, start, .. } => {
                let th = start + s / radius;
                let (sn, cs) = th.sin_cos();
                BoundaryFrame::from_tangent(
                    [center[0] + radius * cs, center[1] + radius * sn],
                    [-sn, cs],
                    1.0 / radius,
                    s,
                )
            }
            Segment::Mapped(e) => {
                let t = e.param_at(s);
                let (x, d1, d2) = e.derivs(t);
                BoundaryFrame::from_tangent(x, d1, parametric_curvature(d1, d2), s)
            }
        }
    }

    pub fn point(&self, s: f64) -> [f64; 2] {
        self.frame(s).point
    }

    /// Local arclengths where the segment meets the line `x_axis = value`,
    /// strictly inside the segment. Mapped edges are not supported.
    pub fn crossings(&self, axis: usize, value: f64) -> Vec<f64> {
        let len = self.length();
        let inside = |s: f64| s > 1e-14 * len && s < len * (1.0 - 1e-14);
        match self {
            Segment::Line { from, to } => {
                let (a, b) = (from[axis], to[axis]);
                if (b - a).abs() < 1e-300 {
                    return vec![];
                }
                let t = (value - a) / (b - a);
                let s = t * len;
                if inside(s) {
                    vec![s]
                } else {
                    vec![]
                }
            }
            Segment::Arc { center, radius, start, sweep } => {
                let c = (value - center[axis]) / radius;
                if c.abs() >= 1.0 {
                    return vec![];
                }
                // solutions of cos θ = c (axis 0) or sin θ = c (axis 1)
                let base = if axis == 0 { c.acos() } else { c.asin() };
                let roots = if axis == 0 { [base, -base] } else { [base, PI - base] };
                let mut out: Vec<f64> = roots
                    .iter()
                    .map(|&th| (th - start).rem_euclid(TAU) * radius)
                    .filter(|&s| s <= sweep * radius && inside(s))
                    .collect();
                out.sort_by(f64::total_cmp);
                out.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * len);
                out
            }
            Segment::Mapped(_) => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind {
    /// Axis-aligned rectangle `[-a/2, a/2] × [-b/2, b/2]`.
    Rectangle { a: f64, b: f64 },
    /// The same rectangle with corners rounded to `radius`.
    RoundedRectangle { a: f64, b: f64, radius: f64 },
    /// Disk of radius `radius` centered at the origin.
    Disk { radius: f64 },
    /// Image of the rectangle `[-a/2, a/2] × [-b/2, b/2]` under `map`.
    Mapped { a: f64, b: f64, map: PlaneMap },
}

#[derive(Clone, Debug)]
pub struct Domain {
    pub kind: DomainKind,
    pub r0: f64,
    segments: Vec<Segment>,
    offsets: Vec<f64>,
    perimeter: f64,
    /// Mean `|det S|` over a sampling grid (mapped domains only).
    mean_det: f64,
}

impl Domain {
    pub fn disk(radius: f64) -> Result<Self> {
        Self::new(DomainKind::Disk { radius }, radius)
    }

    pub fn rectangle(a: f64, b: f64) -> Result<Self> {
        Self::new(DomainKind::Rectangle { a, b }, 0.5 * a.min(b))
    }

    pub fn rounded_rectangle(a: f64, b: f64, radius: f64) -> Result<Self> {
        Self::new(DomainKind::RoundedRectangle { a, b, radius }, 0.5 * a.min(b))
    }

    pub fn mapped(a: f64, b: f64, map: PlaneMap) -> Result<Self> {
        Self::new(DomainKind::Mapped { a, b, map }, 0.5 * a.min(b))
    }

    pub fn with_r0(mut self, r0: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::InvalidDomain("r0 must be positive".into()));
        }
        self.r0 = r0;
        Ok(self)
    }

    pub fn new(kind: DomainKind, r0: f64) -> Result<Self> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!("{what} must be positive, got {v}")))
            }
        };
        let mut mean_det = 1.0;
        let segments = match &kind {
            DomainKind::Disk { radius } => {
                positive(*radius, "radius")?;
                vec![Segment::Arc { center: [0.0, 0.0], radius: *radius, start: 0.0, sweep: TAU }]
            }
            DomainKind::Rectangle { a, b } => {
                positive(*a, "a")?;
                positive(*b, "b")?;
                let (x, y) = (a / 2.0, b / 2.0);
                let c = [[-x, -y], [x, -y], [x, y], [-x, y]];
                (0..4).map(|k| Segment::Line { from: c[k], to: c[(k + 1) % 4] }).collect()
            }
            DomainKind::RoundedRectangle { a, b, radius } => {
                positive(*a, "a")?;
                positive(*b, "b")?;
                positive(*radius, "corner radius")?;
                if 2.0 * radius >= a.min(*b) {
                    return Err(Error::InvalidDomain("corner radius must be below half the shorter side".into()));
                }
                let (x, y, r) = (a / 2.0, b / 2.0, *radius);
                vec![
                    Segment::Line { from: [-x + r, -y], to: [x - r, -y] },
                    Segment::Arc { center: [x - r, -y + r], radius: r, start: -FRAC_PI_2, sweep: FRAC_PI_2 },
                    Segment::Line { from: [x, -y + r], to: [x, y - r] },
                    Segment::Arc { center: [x - r, y - r], radius: r, start: 0.0, sweep: FRAC_PI_2 },
                    Segment::Line { from: [x - r, y], to: [-x + r, y] },
                    Segment::Arc { center: [-x + r, y - r], radius: r, start: FRAC_PI_2, sweep: FRAC_PI_2 },
                    Segment::Line { from: [-x, y - r], to: [-x, -y + r] },
                    Segment::Arc { center: [-x + r, -y + r], radius: r, start: PI, sweep: FRAC_PI_2 },
                ]
            }
            DomainKind::Mapped { a, b, map } => {
                positive(*a, "a")?;
                positive(*b, "b")?;
                let (x, y) = (a / 2.0, b / 2.0);
                let mut sum = 0.0;
                let mut min_det = f64::INFINITY;
                let mut max_det = f64::NEG_INFINITY;
                let n = 16;
                let mut worst = [0.0, 0.0];
                for i in 0..=n {
                    for j in 0..=n {
                        let xi = [-x + a * i as f64 / n as f64, -y + b * j as f64 / n as f64];
                        let d = map.jacobians(xi).det();
                        sum += d.abs();
                        if d < min_det {
                            min_det = d;
                            worst = xi;
                        }
                        max_det = max_det.max(d);
                    }
                }
                mean_det = sum / ((n + 1) * (n + 1)) as f64;
                if min_det.signum() != max_det.signum() || min_det.abs().min(max_det.abs()) < 1e-10 * mean_det {
                    return Err(Error::SingularMap { x: worst[0], y: worst[1], det: min_det });
                }
                if min_det < 0.0 {
                    return Err(Error::InvalidDomain("map must preserve orientation".into()));
                }
                let map = Arc::new(map.clone());
                let c = [[-x, -y], [x, -y], [x, y], [-x, y]];
                (0..4).map(|k| Segment::Mapped(MappedEdge::new(c[k], c[(k + 1) % 4], map.clone()))).collect()
            }
        };
        positive(r0, "r0")?;
        let mut offsets = vec![0.0];
        for s in &segments {
            let last = *offsets.last().unwrap();
            offsets.push(last + s.length());
        }
        let perimeter = offsets.pop().unwrap();
        Ok(Domain { kind, r0, segments, offsets, perimeter, mean_det })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Arclength at which each segment starts.
    pub fn segment_offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// Whether the boundary is of class C^{2,1}.
    pub fn boundary_is_c21(&self) -> bool {
        matches!(self.kind, DomainKind::Disk { .. })
    }

    /// Axis-aligned box `[x0, x1] × [y0, y1]` enclosing the domain.
    pub fn bounding_box(&self) -> [[f64; 2]; 2] {
        match &self.kind {
            DomainKind::Disk { radius } => [[-radius, *radius], [-radius, *radius]],
            DomainKind::Rectangle { a, b } | DomainKind::RoundedRectangle { a, b, .. } => {
                [[-a / 2.0, a / 2.0], [-b / 2.0, b / 2.0]]
            }
            DomainKind::Mapped { .. } => {
                let mut bb = [[f64::INFINITY, f64::NEG_INFINITY]; 2];
                let n = 400;
                for k in 0..n {
                    let p = self.point_at(self.perimeter * k as f64 / n as f64);
                    for a in 0..2 {
                        bb[a][0] = bb[a][0].min(p[a]);
                        bb[a][1] = bb[a][1].max(p[a]);
                    }
                }
                bb
            }
        }
    }

    /// Reference rectangle of a mapped domain.
    pub fn reference_rectangle(&self) -> Option<[[f64; 2]; 2]> {
        match &self.kind {
            DomainKind::Mapped { a, b, .. } | DomainKind::Rectangle { a, b } => {
                Some([[-a / 2.0, a / 2.0], [-b / 2.0, b / 2.0]])
            }
            _ => None,
        }
    }

    pub fn map(&self) -> Option<&PlaneMap> {
        match &self.kind {
            DomainKind::Mapped { map, .. } => Some(map),
            _ => None,
        }
    }

    /// Point-in-domain test for physical points of non-mapped domains.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        match &self.kind {
            DomainKind::Disk { radius } => x[0].hypot(x[1]) < *radius,
            DomainKind::Rectangle { a, b } => x[0].abs() < a / 2.0 && x[1].abs() < b / 2.0,
            DomainKind::RoundedRectangle { a, b, radius } => {
                let (hx, hy) = (a / 2.0 - radius, b / 2.0 - radius);
                let dx = (x[0].abs() - hx).max(0.0);
                let dy = (x[1].abs() - hy).max(0.0);
                x[0].abs() < a / 2.0 && x[1].abs() < b / 2.0 && dx.hypot(dy) < *radius
            }
            DomainKind::Mapped { .. } => {
                // winding number of the sampled boundary
                let n = 2000;
                let mut wind = 0.0;
                let mut prev = self.point_at(0.0);
                for k in 1..=n {
                    let p = self.point_at(self.perimeter * (k % n) as f64 / n as f64);
                    let a = (prev[1] - x[1]).atan2(prev[0] - x[0]);
                    let b = (p[1] - x[1]).atan2(p[0] - x[0]);
                    let mut d = b - a;
                    if d > PI {
                        d -= TAU;
                    } else if d < -PI {
                        d += TAU;
                    }
                    wind += d;
                    prev = p;
                }
                wind.abs() > PI
            }
        }
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let k = self.offsets.partition_point(|&o| o <= s).max(1) - 1;
        (k, s - self.offsets[k])
    }

    /// Boundary frame at arclength `s ∈ [0, perimeter)`.
    pub fn boundary_frame(&self, s: f64) -> Result<BoundaryFrame> {
        if !(0.0..self.perimeter).contains(&s) {
            return Err(Error::OutOfRange { s, perimeter: self.perimeter });
        }
        Ok(self.frame_wrapped(s))
    }

    /// Boundary frame at `s` taken modulo the perimeter.
    pub fn frame_wrapped(&self, s: f64) -> BoundaryFrame {
        let s = s.rem_euclid(self.perimeter);
        let (k, local) = self.locate(s);
        let mut f = self.segments[k].frame(local);
        f.s = s;
        f
    }

    pub fn point_at(&self, s: f64) -> [f64; 2] {
        self.frame_wrapped(s).point
    }

    /// Reference-rectangle point of the boundary point at `s` (mapped
    /// domains); the physical point otherwise.
    pub fn reference_point_at(&self, s: f64) -> [f64; 2] {
        let s = s.rem_euclid(self.perimeter);
        let (k, local) = self.locate(s);
        match &self.segments[k] {
            Segment::Mapped(e) => e.reference_point(e.param_at(local)),
            seg => seg.point(local),
        }
    }

    /// Perimeter by Gauss quadrature of the speed along each segment.
    pub fn perimeter_by_quadrature(&self) -> f64 {
        self.segments
            .iter()
            .map(|seg| match seg {
                Segment::Mapped(e) => {
                    quadrature::composite(12, 64, 0.0, 1.0).into_iter().map(|(t, w)| w * e.speed(t)).sum::<f64>()
                }
                _ => {
                    let len = seg.length();
                    // points are spaced by arclength, so the speed is |dx/ds| ≈ 1
                    let h = 1e-6 * len;
                    quadrature::composite(12, 16, 0.0, len)
                        .into_iter()
                        .map(|(s, w)| {
                            let a = seg.point((s - h).max(0.0));
                            let b = seg.point((s + h).min(len));
                            let span = (s + h).min(len) - (s - h).max(0.0);
                            w * (b[0] - a[0]).hypot(b[1] - a[1]) / span
                        })
                        .sum::<f64>()
                }
            })
            .sum()
    }

    /// Area by the boundary integral `½∮(x dy - y dx)`.
    pub fn area(&self) -> f64 {
        let mut a = 0.0;
        for (k, seg) in self.segments.iter().enumerate() {
            let len = seg.length();
            let panels = if matches!(seg, Segment::Line { .. }) { 1 } else { 32 };
            for (s, w) in quadrature::composite(12, panels, 0.0, len) {
                let f = self.segments[k].frame(s);
                a += 0.5 * w * (f.point[0] * f.tau[1] - f.point[1] * f.tau[0]);
            }
        }
        a
    }

    /// Geometry constants `(M0, M1)`: `M0 = r0 · max|𝒦|` and `M1 = |Ω|/r0²`.
    pub fn geometry_constants(&self) -> (f64, f64) {
        let n = 1000;
        let kmax = (0..n)
            .map(|i| self.frame_wrapped(self.perimeter * i as f64 / n as f64).curvature.abs())
            .fold(0.0, f64::max);
        (self.r0 * kmax, self.area() / (self.r0 * self.r0))
    }

    /// Derivatives of the map at a reference point; rejects near-singular
    /// Jacobians (below `1e-10` of the mean `|det S|`).
    pub fn map_jacobians(&self, xi: [f64; 2]) -> Result<MapJacobians> {
        let map = self.map().ok_or(Error::NotMapped)?;
        let j = map.jacobians(xi);
        if j.det().abs() < 1e-10 * self.mean_det {
            return Err(Error::SingularMap { x: xi[0], y: xi[1], det: j.det() });
        }
        Ok(j)
    }

    /// Largest radius of a ball around the origin contained in the domain.
    pub fn inradius_at_origin(&self) -> f64 {
        match &self.kind {
            DomainKind::Disk { radius } => *radius,
            DomainKind::Rectangle { a, b } | DomainKind::RoundedRectangle { a, b, .. } => 0.5 * a.min(*b),
            DomainKind::Mapped { .. } => {
                let n = 4000;
                (0..n)
                    .map(|i| {
                        let p = self.point_at(self.perimeter * i as f64 / n as f64);
                        p[0].hypot(p[1])
                    })
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Local derivatives of `w` at a boundary point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceDerivatives {
    pub w_s: f64,
    pub w_n: f64,
    pub w_ss: f64,
    pub w_sn: f64,
    pub w_nn: f64,
}

/// Tangential and normal derivatives from the cartesian gradient and Hessian.
/// `w_ss = (w,s),s` and `w_sn = (w,n),s` are derivatives along the boundary.
pub fn surface_derivatives(grad: [f64; 2], hess: [[f64; 2]; 2], frame: &BoundaryFrame) -> SurfaceDerivatives {
    let (t, n) = (frame.tau, frame.n);
    let quad = |a: [f64; 2], b: [f64; 2]| {
        let mut v = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                v += a[i] * hess[i][j] * b[j];
            }
        }
        v
    };
    let w_s = grad[0] * t[0] + grad[1] * t[1];
    let w_n = grad[0] * n[0] + grad[1] * n[1];
    let ts = frame.tau_s();
    let ns = frame.n_s();
    SurfaceDerivatives {
        w_s,
        w_n,
        w_ss: quad(t, t) + grad[0] * ts[0] + grad[1] * ts[1],
        w_sn: quad(t, n) + grad[0] * ns[0] + grad[1] * ns[1],
        w_nn: quad(n, n),
    }
}

/// Cartesian gradient `w,β = w,n n_β + w,s τ_β`.
pub fn gradient_from_local(d: &SurfaceDerivatives, frame: &BoundaryFrame) -> [f64; 2] {
    [0, 1].map(|b| d.w_n * frame.n[b] + d.w_s * frame.tau[b])
}

/// Cartesian Hessian rebuilt from local derivatives:
/// `w,αβ = w,ss τατβ + w,nn nαnβ + w,sn(ταnβ + τβnα) + w,s(τα τβ,s - nα nβ,s) + w,n τα nβ,s`.
pub fn hessian_from_local(d: &SurfaceDerivatives, frame: &BoundaryFrame) -> [[f64; 2]; 2] {
    let (t, n, ts, ns) = (frame.tau, frame.n, frame.tau_s(), frame.n_s());
    let mut h = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            h[a][b] = d.w_ss * t[a] * t[b]
                + d.w_nn * n[a] * n[b]
                + d.w_sn * (t[a] * n[b] + t[b] * n[a])
                + d.w_s * (t[a] * ts[b] - n[a] * ns[b])
                + d.w_n * t[a] * ns[b];
        }
    }
    h
}

/// The transposed form of [`hessian_from_local`], with the roles of `α` and
/// `β` exchanged in the frame-derivative terms.
pub fn hessian_from_local_transposed(d: &SurfaceDerivatives, frame: &BoundaryFrame) -> [[f64; 2]; 2] {
    let (t, n, ts, ns) = (frame.tau, frame.n, frame.tau_s(), frame.n_s());
    let mut h = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            h[a][b] = d.w_ss * t[a] * t[b]
                + d.w_nn * n[a] * n[b]
                + d.w_sn * (t[a] * n[b] + t[b] * n[a])
                + d.w_s * (t[b] * ts[a] - n[b] * ns[a])
                + d.w_n * t[b] * ns[a];
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn disk_frame_and_curvature() {
        let d = Domain::disk(2.0).unwrap();
        for k in 0..10 {
            let f = d.boundary_frame(d.perimeter() * k as f64 / 10.0).unwrap();
            assert_relative_eq!(f.curvature, 0.5, epsilon = 1e-15);
            assert_relative_eq!(f.n[0] * f.point[0] + f.n[1] * f.point[1], 2.0, epsilon = 1e-13);
        }
        assert!(matches!(d.boundary_frame(-1.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(d.boundary_frame(d.perimeter()), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn rectangle_edges_are_straight() {
        let d = Domain::rectangle(2.0, 1.0).unwrap();
        let f = d.boundary_frame(0.5).unwrap();
        assert_eq!(f.curvature, 0.0);
        assert_eq!(f.n, [0.0, -1.0]);
        assert_relative_eq!(d.area(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn graph_curvature_of_parabola() {
        assert_relative_eq!(graph_curvature(0.0, 1.0), 1.0);
        // parametric form (x, x²/2) at x = 0
        assert_relative_eq!(parametric_curvature([1.0, 0.0], [0.0, 1.0]), 1.0);
    }

    #[test]
    fn tangential_gradient_on_the_unit_disk() {
        let d = Domain::disk(1.0).unwrap();
        let f = d.boundary_frame(0.0).unwrap();
        assert_relative_eq!(f.n[0], 1.0);
        let sd = surface_derivatives([1.0, 0.0], [[0.0; 2]; 2], &f);
        assert_relative_eq!(sd.w_n, 1.0);
        assert!(sd.w_s.abs() < 1e-15);
    }

    #[test]
    fn linear_field_along_tangent() {
        // w = τ·x has w,α = τ_α and zero Hessian: w_s = 1 and w_ss = -𝒦 w_n = 0
        let d = Domain::disk(1.5).unwrap();
        let f = d.boundary_frame(0.7).unwrap();
        let sd = surface_derivatives(f.tau, [[0.0; 2]; 2], &f);
        assert_relative_eq!(sd.w_s, 1.0, epsilon = 1e-15);
        assert!(sd.w_ss.abs() < 1e-15);
        assert_relative_eq!(sd.w_sn, f.curvature, epsilon = 1e-15);
        let h = hessian_from_local(&sd, &f);
        for row in h {
            for v in row {
                assert!(v.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn straight_edge_is_a_rotation() {
        let d = Domain::rectangle(2.0, 2.0).unwrap();
        let f = d.boundary_frame(3.0).unwrap();
        let h = [[1.0, 2.0], [2.0, -3.0]];
        let sd = surface_derivatives([0.3, 0.4], h, &f);
        // right edge: τ = e2, n = e1
        assert_relative_eq!(sd.w_ss, -3.0);
        assert_relative_eq!(sd.w_nn, 1.0);
        assert_relative_eq!(sd.w_sn, 2.0);
    }

    #[test]
    fn rounded_rectangle_is_closed_and_smooth_in_tangent() {
        let d = Domain::rounded_rectangle(2.0, 1.0, 0.2).unwrap();
        let exact = 2.0 * (2.0 - 0.4) + 2.0 * (1.0 - 0.4) + TAU * 0.2;
        assert_relative_eq!(d.perimeter(), exact, epsilon = 1e-13);
        let area = 2.0 - (4.0 - PI) * 0.04;
        assert_relative_eq!(d.area(), area, epsilon = 1e-12);
        let end = d.point_at(d.perimeter() - 1e-12);
        let start = d.point_at(0.0);
        assert!((end[0] - start[0]).hypot(end[1] - start[1]) < 1e-10);
    }

    #[test]
    fn map_jacobians_of_shear() {
        let map = PlaneMap { components: [Expr::parse("x1").unwrap(), Expr::parse("x2 + x1^2").unwrap()] };
        let d = Domain::mapped(1.0, 1.0, map).unwrap();
        let j = d.map_jacobians([0.2, 0.1]).unwrap();
        assert_relative_eq!(j.r[1][0][0], 2.0, epsilon = 1e-14);
        assert_eq!(j.s, [[1.0, 0.0], [0.4, 1.0]]);
        for k in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    if (k, a, b) != (1, 0, 0) {
                        assert_eq!(j.r[k][a][b], 0.0);
                    }
                    for c in 0..2 {
                        assert_eq!(j.z[k][a][b][c], 0.0);
                    }
                }
            }
        }
        assert!(matches!(Domain::disk(1.0).unwrap().map_jacobians([0.0, 0.0]), Err(Error::NotMapped)));
    }

    #[test]
    fn identity_and_affine_maps() {
        let d = Domain::mapped(1.0, 1.0, PlaneMap::identity()).unwrap();
        let j = d.map_jacobians([0.1, 0.3]).unwrap();
        assert_eq!(j.s, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(j.r, [[[0.0; 2]; 2]; 2]);
        let aff = PlaneMap { components: [Expr::parse("2*x1 + x2 + 1").unwrap(), Expr::parse("3*x2 - 1").unwrap()] };
        let d = Domain::mapped(1.0, 1.0, aff).unwrap();
        let j = d.map_jacobians([0.0, 0.0]).unwrap();
        assert_eq!(j.s, [[2.0, 1.0], [0.0, 3.0]]);
        assert_relative_eq!(d.area(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn folding_map_is_rejected() {
        let map = PlaneMap { components: [Expr::parse("x1^2").unwrap(), Expr::parse("x2").unwrap()] };
        assert!(matches!(Domain::mapped(1.0, 1.0, map), Err(Error::SingularMap { .. })));
    }

    #[test]
    fn inverse_map_jets_invert_the_map() {
        let map =
            PlaneMap { components: [Expr::parse("x1 + 0.1*sin(x2)").unwrap(), Expr::parse("x2 + 0.2*x1^2").unwrap()] };
        let xi = [0.3, -0.2];
        let h = map.inverse_jets(xi, 4).unwrap();
        let f = map.jets(xi, 4);
        // composing the Taylor polynomial of φ with h must give the identity
        for k in 0..2 {
            let mut g = f[k];
            g.set_coeff(0, 0, 0.0);
            let comp = g.substitute(h, 4);
            for i in 0..=4 {
                for j in 0..=(4 - i) {
                    let expect = if (k == 0 && (i, j) == (1, 0)) || (k == 1 && (i, j) == (0, 1)) { 1.0 } else { 0.0 };
                    assert!((comp.deriv(i, j) - expect).abs() < 1e-12, "k={k} ({i},{j}) {}", comp.deriv(i, j));
                }
            }
        }
    }
}
