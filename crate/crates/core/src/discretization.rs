//! Tensor-product spline Galerkin space, cell quadrature and assembly of
//! the bilinear form, load vector and normalization rows.
//!
//! Three embeddings are supported:
//! * fitted: the spline patch covers the rectangle exactly;
//! * immersed: the patch covers a bounding box of a convex domain (disk,
//!   rounded rectangle) and cut cells are integrated exactly on the
//!   curved subregion;
//! * mapped: the patch lives on a reference rectangle and derivatives are
//!   pulled back through the map.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::Field;
use crate::geometry::{Domain, DomainKind, PlaneMap, Segment};
use crate::jet::{coefficient_count, Jet, MAX_ORDER};
use crate::material::{bending_pair_jets, eval_coefficients, MaterialField};
use crate::neumann::{compatibility_check_with, trace_of, BoundaryRule, CompatibilityReport, NeumannData};
use crate::quadrature;
use crate::spline::KnotVector;
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CscMatrix};
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Embedding {
    Fitted,
    Immersed,
    Mapped,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint {
    /// Physical point.
    pub x: [f64; 2],
    /// Point in the spline parameter domain.
    pub xi: [f64; 2],
    /// Weight including the area element.
    pub w: f64,
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub ex: usize,
    pub ey: usize,
    pub cut: bool,
    pub points: Vec<QuadPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct SpaceOptions {
    /// Gauss points per direction on uncut cells; at least `p + 2`.
    pub quad_points: Option<usize>,
    /// Extra points per direction on cut cells and boundary panels.
    pub cut_extra: usize,
}

#[derive(Clone, Debug)]
pub struct BoundaryNode {
    pub ex: usize,
    pub ey: usize,
    pub xi: [f64; 2],
}

/// Smooth spline trial/test space on a domain.
#[derive(Clone, Debug)]
pub struct SplineSpace {
    pub domain: Domain,
    pub p: usize,
    pub n_el: usize,
    pub kx: KnotVector,
    pub ky: KnotVector,
    pub embedding: Embedding,
    pub cells: Vec<Cell>,
    pub boundary: BoundaryRule,
    pub boundary_nodes: Vec<BoundaryNode>,
    pub quad_points: usize,
    dof_of: Vec<Option<usize>>,
    global_of: Vec<usize>,
}

/// Spline coefficients with their space: a field on the plane.
#[derive(Clone, Debug)]
pub struct SplineField {
    pub space: Arc<SplineSpace>,
    pub coefs: DVector<f64>,
}

impl Field for SplineField {
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        self.space
            .eval_field(self.coefs.as_slice(), x, order.min(self.space.max_derivative()))
            .expect("evaluation order checked against the degree")
    }
}

/// Jets `h₁^a h₂^b` for the change from reference to physical derivatives.
struct PullBack {
    monomials: Vec<(usize, usize, Jet)>,
}

impl PullBack {
    fn new(map: &PlaneMap, xi: [f64; 2], order: usize) -> Result<Self> {
        let h = map.inverse_jets(xi, order)?;
        let mut monomials = Vec::new();
        let mut p1 = Jet::constant(1.0, order);
        for a in 0..=order {
            let mut m = p1;
            for b in 0..=(order - a) {
                if a + b > 0 {
                    monomials.push((a, b, m));
                }
                m *= h[1];
            }
            p1 *= h[0];
        }
        Ok(PullBack { monomials })
    }

    /// Physical jet from the reference jet `r` (same order).
    fn apply(&self, r: &Jet) -> Jet {
        let mut out = Jet::constant(r.value(), r.order());
        for (a, b, m) in &self.monomials {
            let c = r.coeff(*a, *b);
            if c != 0.0 {
                out += m.scale(c);
            }
        }
        out
    }
}

fn inside_box(x: [f64; 2], bx: [f64; 2], by: [f64; 2]) -> bool {
    x[0] >= bx[0] && x[0] <= bx[1] && x[1] >= by[0] && x[1] <= by[1]
}

/// Gauss nodes on the ruled triangle `P + η(γ(ξ) - P)`; `curve` returns the
/// point and tangent (derivative in the piece parameter) at a parameter.
fn fan_points(
    p: [f64; 2],
    range: (f64, f64),
    n_xi: usize,
    n_eta: usize,
    curve: impl Fn(f64) -> ([f64; 2], [f64; 2]),
    out: &mut Vec<QuadPoint>,
) {
    for (t, wt) in quadrature::gauss_on(n_xi, range.0, range.1) {
        let (g, dg) = curve(t);
        let d = [g[0] - p[0], g[1] - p[1]];
        let cross = d[0] * dg[1] - d[1] * dg[0];
        for (eta, we) in quadrature::gauss_on(n_eta, 0.0, 1.0) {
            let x = [p[0] + eta * d[0], p[1] + eta * d[1]];
            out.push(QuadPoint { x, xi: x, w: wt * we * eta * cross });
        }
    }
}

fn tensor_points(bx: [f64; 2], by: [f64; 2], n: usize) -> Vec<QuadPoint> {
    let mut pts = Vec::with_capacity(n * n);
    for (y, wy) in quadrature::gauss_on(n, by[0], by[1]) {
        for (x, wx) in quadrature::gauss_on(n, bx[0], bx[1]) {
            pts.push(QuadPoint { x: [x, y], xi: [x, y], w: wx * wy });
        }
    }
    pts
}

/// Global arclengths where the boundary meets a knot line, plus segment
/// junctions.
fn knot_crossings(dom: &Domain, kx: &KnotVector, ky: &KnotVector) -> Vec<f64> {
    let mut out: Vec<f64> = dom.segment_offsets().to_vec();
    for (seg, off) in dom.segments().iter().zip(dom.segment_offsets()) {
        match seg {
            Segment::Mapped(e) => {
                let (from, to) = (e.from, e.to);
                for (axis, kv) in [(0, kx), (1, ky)] {
                    let (a, b) = (from[axis], to[axis]);
                    if (b - a).abs() < 1e-300 {
                        continue;
                    }
                    for v in kv.breakpoints() {
                        let t = (v - a) / (b - a);
                        if t > 1e-14 && t < 1.0 - 1e-14 {
                            out.push(off + e.arclength_at(t));
                        }
                    }
                }
            }
            _ => {
                for (axis, kv) in [(0, kx), (1, ky)] {
                    for v in kv.breakpoints() {
                        out.extend(seg.crossings(axis, v).into_iter().map(|s| off + s));
                    }
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * dom.perimeter());
    out
}

fn immersed_cells(
    dom: &Domain,
    kx: &KnotVector,
    ky: &KnotVector,
    n_full: usize,
    n_line: usize,
    n_curve: usize,
    crossings: &[f64],
) -> Result<Vec<Cell>> {
    let n = kx.n_el;
    let per = dom.perimeter();
    let mut pieces: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n * n];
    let mut cuts = crossings.to_vec();
    cuts.push(per);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 1e-14 * per {
            continue;
        }
        let m = dom.point_at(0.5 * (a + b));
        let (ex, ey) = (kx.element_of(m[0]), ky.element_of(m[1]));
        pieces[ey * n + ex].push((a, b));
    }
    let mut cells = Vec::new();
    for ey in 0..n {
        for ex in 0..n {
            let bx = [kx.breakpoint(ex), kx.breakpoint(ex + 1)];
            let by = [ky.breakpoint(ey), ky.breakpoint(ey + 1)];
            let cell_pieces = &pieces[ey * n + ex];
            if cell_pieces.is_empty() {
                let center = [0.5 * (bx[0] + bx[1]), 0.5 * (by[0] + by[1])];
                if dom.contains(center) {
                    cells.push(Cell { ex, ey, cut: false, points: tensor_points(bx, by, n_full) });
                }
                continue;
            }
            // straight portions of the cell boundary lying inside the domain
            let corners = [[bx[0], by[0]], [bx[1], by[0]], [bx[1], by[1]], [bx[0], by[1]]];
            let mut edges: Vec<([f64; 2], [f64; 2])> = Vec::new();
            for k in 0..4 {
                let (a, b) = (corners[k], corners[(k + 1) % 4]);
                let (axis, value) = if a[1] == b[1] { (1, a[1]) } else { (0, a[0]) };
                let along = 1 - axis;
                let mut ts = vec![0.0, 1.0];
                let tol = 1e-12 * (1.0 + value.abs());
                for &s in crossings {
                    let q = dom.point_at(s);
                    if (q[axis] - value).abs() > tol {
                        continue;
                    }
                    let t = (q[along] - a[along]) / (b[along] - a[along]);
                    if t > 0.0 && t < 1.0 {
                        ts.push(t);
                    }
                }
                ts.sort_by(f64::total_cmp);
                for w in ts.windows(2) {
                    if w[1] - w[0] < 1e-14 {
                        continue;
                    }
                    let tm = 0.5 * (w[0] + w[1]);
                    let mid = [a[0] + tm * (b[0] - a[0]), a[1] + tm * (b[1] - a[1])];
                    if dom.contains(mid) {
                        let pa = [a[0] + w[0] * (b[0] - a[0]), a[1] + w[0] * (b[1] - a[1])];
                        let pb = [a[0] + w[1] * (b[0] - a[0]), a[1] + w[1] * (b[1] - a[1])];
                        edges.push((pa, pb));
                    }
                }
            }
            // interior reference point of the convex region
            let mut acc = [0.0, 0.0];
            let mut cnt = 0.0;
            for &(s0, s1) in cell_pieces {
                for s in [s0, 0.5 * (s0 + s1), s1] {
                    let q = dom.point_at(s);
                    acc[0] += q[0];
                    acc[1] += q[1];
                    cnt += 1.0;
                }
            }
            for &(a, b) in &edges {
                for q in [a, b] {
                    acc[0] += q[0];
                    acc[1] += q[1];
                    cnt += 1.0;
                }
            }
            let pc = [acc[0] / cnt, acc[1] / cnt];
            let mut points = Vec::new();
            for &(s0, s1) in cell_pieces {
                fan_points(
                    pc,
                    (s0, s1),
                    n_curve,
                    n_line,
                    |s| {
                        let f = dom.frame_wrapped(s);
                        (f.point, f.tau)
                    },
                    &mut points,
                );
            }
            for &(a, b) in &edges {
                let d = [b[0] - a[0], b[1] - a[1]];
                fan_points(pc, (0.0, 1.0), n_line, n_line, |t| ([a[0] + t * d[0], a[1] + t * d[1]], d), &mut points);
            }
            let area: f64 = points.iter().map(|q| q.w).sum();
            let full = (bx[1] - bx[0]) * (by[1] - by[0]);
            if area < -1e-12 * full || points.iter().any(|q| !inside_box(q.x, bx, by) && q.w.abs() > 1e-300) {
                return Err(Error::QuadratureUnderflow(format!("cut cell ({ex}, {ey}) is not star-shaped")));
            }
            if area > 1e-15 * full {
                cells.push(Cell { ex, ey, cut: true, points });
            }
        }
    }
    Ok(cells)
}

impl SplineSpace {
    pub fn num_dofs(&self) -> usize {
        self.global_of.len()
    }

    pub fn basis_per_direction(&self) -> usize {
        self.kx.num_basis()
    }

    /// Degree of freedom of the tensor basis `(ix, iy)`, if active.
    pub fn dof(&self, ix: usize, iy: usize) -> Option<usize> {
        self.dof_of[iy * self.basis_per_direction() + ix]
    }

    /// Tensor indices `(ix, iy)` of a degree of freedom.
    pub fn basis_index(&self, dof: usize) -> (usize, usize) {
        let g = self.global_of[dof];
        let nb = self.basis_per_direction();
        (g % nb, g / nb)
    }

    /// Highest derivative order available from the basis.
    pub fn max_derivative(&self) -> usize {
        self.p.min(MAX_ORDER)
    }

    /// Active basis functions on cell `(ex, ey)` with their physical jets at
    /// the reference point `xi`.
    pub fn basis_jets(&self, ex: usize, ey: usize, xi: [f64; 2], order: usize) -> Result<Vec<(usize, Jet)>> {
        let bx = self.kx.basis_derivatives(ex, xi[0], order);
        let by = self.ky.basis_derivatives(ey, xi[1], order);
        let pull = match (&self.embedding, self.domain.map()) {
            (Embedding::Mapped, Some(map)) => Some(PullBack::new(map, xi, order)?),
            _ => None,
        };
        let mut out = Vec::with_capacity((self.p + 1) * (self.p + 1));
        for jy in 0..=self.p {
            for jx in 0..=self.p {
                let Some(dof) = self.dof(ex + jx, ey + jy) else { continue };
                let r = Jet::from_derivatives(order, |a, b| bx[a][jx] * by[b][jy]);
                out.push((
                    dof,
                    match &pull {
                        Some(pb) => pb.apply(&r),
                        None => r,
                    },
                ));
            }
        }
        Ok(out)
    }

    /// Reference point of a physical point.
    pub fn reference_of(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        match self.domain.map() {
            Some(map) if self.embedding == Embedding::Mapped => invert_map(map, &self.domain, x),
            _ => Ok(x),
        }
    }

    /// Value and all partial derivatives up to order `k` of the spline with
    /// coefficients `coefs` at the physical point `x`.
    pub fn eval_field(&self, coefs: &[f64], x: [f64; 2], k: usize) -> Result<Jet> {
        if k > self.max_derivative() {
            return Err(Error::OrderTooHigh { requested: k, available: self.max_derivative() });
        }
        let xi = self.reference_of(x)?;
        self.eval_reference(coefs, xi, k)
    }

    pub fn eval_reference(&self, coefs: &[f64], xi: [f64; 2], k: usize) -> Result<Jet> {
        if k > self.max_derivative() {
            return Err(Error::OrderTooHigh { requested: k, available: self.max_derivative() });
        }
        let (ex, ey) = (self.kx.element_of(xi[0]), self.ky.element_of(xi[1]));
        let mut acc = Jet::zero(k);
        for (dof, j) in self.basis_jets(ex, ey, xi, k)? {
            acc += j.scale(coefs[dof]);
        }
        Ok(acc)
    }

    /// Coefficients reproducing `c0 + c1 x1 + c2 x2` (Greville interpolation);
    /// unavailable on mapped domains, where physical affines are not splines.
    pub fn affine_coefficients(&self, c: [f64; 3]) -> Option<DVector<f64>> {
        if self.embedding == Embedding::Mapped {
            return None;
        }
        Some(DVector::from_iterator(
            self.num_dofs(),
            (0..self.num_dofs()).map(|d| {
                let (ix, iy) = self.basis_index(d);
                c[0] + c[1] * self.kx.greville(ix) + c[2] * self.ky.greville(iy)
            }),
        ))
    }

    /// Coefficients interpolating a field at the Greville points, corrected
    /// by the exact reproduction of polynomials of degree `≤ p`: for fields
    /// in the space the result is exact.
    pub fn interpolate(&self, f: &dyn Field) -> Result<DVector<f64>> {
        let nb = self.basis_per_direction();
        let gx: Vec<f64> = (0..nb).map(|i| self.kx.greville(i)).collect();
        let gy: Vec<f64> = (0..nb).map(|i| self.ky.greville(i)).collect();
        let colloc = |kv: &KnotVector, g: &[f64]| {
            let mut m = DMatrix::zeros(nb, nb);
            for (r, &x) in g.iter().enumerate() {
                let e = kv.element_of(x);
                let d = kv.basis_derivatives(e, x, 0);
                for j in 0..=kv.p {
                    m[(r, e + j)] = d[0][j];
                }
            }
            m
        };
        let ax = colloc(&self.kx, &gx).lu();
        let ay = colloc(&self.ky, &gy).lu();
        let mut vals = DMatrix::zeros(nb, nb);
        for (j, &y) in gy.iter().enumerate() {
            for (i, &x) in gx.iter().enumerate() {
                let phys = match (self.embedding, self.domain.map()) {
                    (Embedding::Mapped, Some(map)) => map.apply([x, y]),
                    _ => [x, y],
                };
                vals[(i, j)] = f.value(phys);
            }
        }
        let bad = || Error::InvalidDiscretization("singular collocation matrix".into());
        let tmp = ax.solve(&vals).ok_or_else(bad)?;
        let coef = ay.solve(&tmp.transpose()).ok_or_else(bad)?.transpose();
        Ok(DVector::from_iterator(
            self.num_dofs(),
            (0..self.num_dofs()).map(|d| {
                let (ix, iy) = self.basis_index(d);
                coef[(ix, iy)]
            }),
        ))
    }

    /// Sum of weights of the cell quadrature (the domain area).
    pub fn area(&self) -> f64 {
        self.cells.iter().flat_map(|c| &c.points).map(|q| q.w).sum()
    }

    /// `∫_Ω g(x)` over the cell quadrature.
    pub fn integrate(&self, g: impl Fn(&QuadPoint) -> f64 + Sync + Send, exec: Execution) -> f64 {
        let parts = exec.map(&self.cells, |c| c.points.iter().map(|q| q.w * g(q)).sum::<f64>());
        parts.iter().sum()
    }

    /// Per-order squared norms `∫|D^i(u_h - u*)|²`, `i = 0..=3`, with the
    /// multi-index convention, for the spline `coefs` against the field `exact`
    /// (pass a zero field for norms of the spline itself).
    pub fn error_norms(&self, coefs: &[f64], exact: &dyn Field, exec: Execution) -> Result<[f64; 4]> {
        let parts: Vec<Result<[f64; 4]>> = exec.map(&self.cells, |c| {
            let mut acc = [0.0; 4];
            for q in &c.points {
                let mut uh = Jet::zero(3);
                for (dof, j) in self.basis_jets(c.ex, c.ey, q.xi, 3)? {
                    uh += j.scale(coefs[dof]);
                }
                let e = uh - exact.jet(q.x, 3);
                for (k, a) in acc.iter_mut().enumerate() {
                    *a += q.w * crate::jet::multi_index_norm_sq(&e, k);
                }
            }
            Ok(acc)
        });
        let mut total = [0.0; 4];
        for p in parts {
            let p = p?;
            for k in 0..4 {
                total[k] += p[k];
            }
        }
        Ok(total)
    }

    /// Per-order squared norms of a field over the domain.
    pub fn field_norms(&self, f: &dyn Field, exec: Execution) -> [f64; 4] {
        let parts = exec.map(&self.cells, |c| {
            let mut acc = [0.0; 4];
            for q in &c.points {
                let j = f.jet(q.x, 3);
                for (k, a) in acc.iter_mut().enumerate() {
                    *a += q.w * crate::jet::multi_index_norm_sq(&j, k);
                }
            }
            acc
        });
        let mut total = [0.0; 4];
        for p in parts {
            for k in 0..4 {
                total[k] += p[k];
            }
        }
        total
    }
}

fn invert_map(map: &PlaneMap, dom: &Domain, x: [f64; 2]) -> Result<[f64; 2]> {
    let rect = dom.reference_rectangle().expect("mapped domains have a reference rectangle");
    // start from the nearest point of a coarse reference grid
    let n = 24;
    let mut best = ([0.0, 0.0], f64::INFINITY);
    for i in 0..=n {
        for j in 0..=n {
            let xi = [
                rect[0][0] + (rect[0][1] - rect[0][0]) * i as f64 / n as f64,
                rect[1][0] + (rect[1][1] - rect[1][0]) * j as f64 / n as f64,
            ];
            let y = map.apply(xi);
            let d = (y[0] - x[0]).hypot(y[1] - x[1]);
            if d < best.1 {
                best = (xi, d);
            }
        }
    }
    let mut xi = best.0;
    for _ in 0..60 {
        let y = map.apply(xi);
        let r = [y[0] - x[0], y[1] - x[1]];
        if r[0].hypot(r[1]) < 1e-14 * (1.0 + x[0].hypot(x[1])) {
            return Ok(xi);
        }
        let j = map.jacobians(xi);
        let det = j.det();
        if det.abs() < 1e-300 {
            break;
        }
        xi[0] -= (j.s[1][1] * r[0] - j.s[0][1] * r[1]) / det;
        xi[1] -= (-j.s[1][0] * r[0] + j.s[0][0] * r[1]) / det;
    }
    let y = map.apply(xi);
    if (y[0] - x[0]).hypot(y[1] - x[1]) < 1e-10 * (1.0 + x[0].hypot(x[1])) {
        Ok(xi)
    } else {
        Err(Error::InvalidInput(format!("point ({}, {}) not in the mapped domain", x[0], x[1])))
    }
}

/// Builds the spline space of degree `p` with `n_el` elements per direction.
pub fn build_space(dom: &Domain, p: usize, n_el: usize) -> Result<SplineSpace> {
    build_space_with(dom, p, n_el, SpaceOptions::default())
}

pub fn build_space_with(dom: &Domain, p: usize, n_el: usize, opts: SpaceOptions) -> Result<SplineSpace> {
    if p < 3 {
        return Err(Error::InvalidDegree(p));
    }
    if p > 8 {
        return Err(Error::InvalidDiscretization(format!("degree {p} above 8 is not supported")));
    }
    if n_el == 0 {
        return Err(Error::InvalidDiscretization("need at least one element per direction".into()));
    }
    let n_full = opts.quad_points.unwrap_or(p + 2);
    if n_full < p + 2 {
        return Err(Error::InvalidDiscretization(format!("quadrature needs at least p + 2 = {} points", p + 2)));
    }
    let n_line = 2 * p + 2 + opts.cut_extra;
    let n_curve = 2 * p + 8 + opts.cut_extra;
    let (embedding, bbox) = match &dom.kind {
        DomainKind::Rectangle { .. } => (Embedding::Fitted, dom.bounding_box()),
        DomainKind::Mapped { .. } => (Embedding::Mapped, dom.reference_rectangle().unwrap()),
        DomainKind::Disk { .. } | DomainKind::RoundedRectangle { .. } => {
            // pad the box so the boundary never touches a knot line tangentially
            let bb = dom.bounding_box();
            let pad = |r: [f64; 2]| {
                let h = 0.5 * (r[1] - r[0]) * 0.0371;
                [r[0] - h, r[1] + h]
            };
            (Embedding::Immersed, [pad(bb[0]), pad(bb[1])])
        }
    };
    let kx = KnotVector::uniform(p, n_el, bbox[0][0], bbox[0][1]);
    let ky = KnotVector::uniform(p, n_el, bbox[1][0], bbox[1][1]);
    let crossings = knot_crossings(dom, &kx, &ky);
    let cells = match embedding {
        Embedding::Immersed => immersed_cells(dom, &kx, &ky, n_full, n_line, n_curve, &crossings)?,
        Embedding::Fitted => {
            let mut cells = Vec::new();
            for ey in 0..n_el {
                for ex in 0..n_el {
                    let bx = [kx.breakpoint(ex), kx.breakpoint(ex + 1)];
                    let by = [ky.breakpoint(ey), ky.breakpoint(ey + 1)];
                    cells.push(Cell { ex, ey, cut: false, points: tensor_points(bx, by, n_full) });
                }
            }
            cells
        }
        Embedding::Mapped => {
            let map = dom.map().unwrap();
            let mut cells = Vec::new();
            for ey in 0..n_el {
                for ex in 0..n_el {
                    let bx = [kx.breakpoint(ex), kx.breakpoint(ex + 1)];
                    let by = [ky.breakpoint(ey), ky.breakpoint(ey + 1)];
                    let mut points = tensor_points(bx, by, n_full);
                    for q in &mut points {
                        let j = dom
                            .map_jacobians(q.xi)
                            .map_err(|e| Error::QuadratureUnderflow(format!("cell ({ex}, {ey}): {e}")))?;
                        q.w *= j.det().abs();
                        q.x = map.apply(q.xi);
                    }
                    cells.push(Cell { ex, ey, cut: false, points });
                }
            }
            cells
        }
    };
    let nb = kx.num_basis();
    let mut active = vec![false; nb * nb];
    for c in &cells {
        for jy in 0..=p {
            for jx in 0..=p {
                active[(c.ey + jy) * nb + c.ex + jx] = true;
            }
        }
    }
    let mut dof_of = vec![None; nb * nb];
    let mut global_of = Vec::new();
    for (g, &a) in active.iter().enumerate() {
        if a {
            dof_of[g] = Some(global_of.len());
            global_of.push(g);
        }
    }
    let per = dom.perimeter();
    let boundary = BoundaryRule::new(dom, &crossings, 2 * p + 8 + opts.cut_extra, per / (4.0 * n_el as f64));
    let boundary_nodes = boundary
        .frames
        .iter()
        .map(|f| {
            let xi = dom.reference_point_at(f.s);
            BoundaryNode { ex: kx.element_of(xi[0]), ey: ky.element_of(xi[1]), xi }
        })
        .collect();
    Ok(SplineSpace {
        domain: dom.clone(),
        p,
        n_el,
        kx,
        ky,
        embedding,
        cells,
        boundary,
        boundary_nodes,
        quad_points: n_full,
        dof_of,
        global_of,
    })
}

/// Discrete Galerkin system: stiffness `K`, load `F` and the three
/// normalization rows `C`.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub space: Arc<SplineSpace>,
    pub k: CscMatrix<f64>,
    pub f: DVector<f64>,
    pub c: DMatrix<f64>,
    pub compatibility: CompatibilityReport,
    pub data: NeumannData,
}

impl AssembledSystem {
    /// Largest absolute entry of `K`.
    pub fn k_norm(&self) -> f64 {
        self.k.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// `K x`.
    pub fn apply_k(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.k * x
    }

    /// `max |K - Kᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        let dense = DMatrix::from(&self.k);
        (&dense - dense.transpose()).amax()
    }
}

/// Pointwise coefficients entering the integrand.
#[derive(Clone, Copy)]
struct LocalCoefficients {
    c1: f64,
    c2: f64,
    b0: f64,
    b1: f64,
}

fn local_coefficients(mat: &MaterialField, x: [f64; 2]) -> Result<LocalCoefficients> {
    let c = eval_coefficients(mat, x)?;
    let (c1, c2) = c.bending_pair();
    Ok(LocalCoefficients { c1, c2, b0: c.b0, b1: c.b1 })
}

/// Second and third derivatives of a basis jet in the layout used by the
/// integrand: `[N11, N12, N22]`, `[N111, N112, N122, N222]`.
fn split_derivatives(j: &Jet) -> ([f64; 3], [f64; 4]) {
    ([j.deriv(2, 0), j.deriv(1, 1), j.deriv(0, 2)], [j.deriv(3, 0), j.deriv(2, 1), j.deriv(1, 2), j.deriv(0, 3)])
}

/// Integrand `(P+Pʰ)D²u·D²w + QD³u·D³w` for isotropic coefficients.
#[inline]
fn energy_density(lc: &LocalCoefficients, u: &([f64; 3], [f64; 4]), w: &([f64; 3], [f64; 4])) -> f64 {
    let (hu, tu) = u;
    let (hw, tw) = w;
    let hh = hu[0] * hw[0] + 2.0 * hu[1] * hw[1] + hu[2] * hw[2];
    let lap = (hu[0] + hu[2]) * (hw[0] + hw[2]);
    let gu = [tu[0] + tu[2], tu[1] + tu[3]];
    let gw = [tw[0] + tw[2], tw[1] + tw[3]];
    let tt = tu[0] * tw[0] + 3.0 * tu[1] * tw[1] + 3.0 * tu[2] * tw[2] + tu[3] * tw[3];
    lc.c1 * hh + lc.c2 * lap + (lc.b0 - 3.0 * lc.b1) * (gu[0] * gw[0] + gu[1] * gw[1]) + 5.0 * lc.b1 * tt
}

/// `a(u, w)` for two fields, by the domain quadrature of the space.
pub fn bilinear_form(
    space: &SplineSpace,
    mat: &MaterialField,
    u: &dyn Field,
    w: &dyn Field,
    exec: Execution,
) -> Result<f64> {
    let constant = if mat.is_constant() { Some(local_coefficients(mat, [0.0, 0.0])?) } else { None };
    let parts: Vec<Result<f64>> = exec.map(&space.cells, |c| {
        let mut acc = 0.0;
        for q in &c.points {
            let lc = match constant {
                Some(lc) => lc,
                None => local_coefficients(mat, q.x)?,
            };
            let du = split_derivatives(&u.jet(q.x, 3));
            let dw = split_derivatives(&w.jet(q.x, 3));
            acc += q.w * energy_density(&lc, &du, &dw);
        }
        Ok(acc)
    });
    parts.into_iter().sum()
}

struct CellContribution {
    dofs: Vec<usize>,
    k: Vec<f64>,
    c: Vec<[f64; 3]>,
}

/// Assembles `K`, `F` and `C` for material `mat` and data `data`.
pub fn assemble(
    space: Arc<SplineSpace>,
    mat: &MaterialField,
    data: &NeumannData,
    exec: Execution,
) -> Result<AssembledSystem> {
    mat.validate()?;
    let n = space.num_dofs();
    let constant = if mat.is_constant() { Some(local_coefficients(mat, [0.0, 0.0])?) } else { None };
    let sp = &space;
    let contributions: Vec<Result<CellContribution>> = exec.map(&space.cells, |cell| {
        let nloc = (sp.p + 1) * (sp.p + 1);
        let mut dofs: Vec<usize> = Vec::with_capacity(nloc);
        let mut k = Vec::new();
        let mut cacc: Vec<[f64; 3]> = Vec::new();
        for q in &cell.points {
            let lc = match constant {
                Some(lc) => lc,
                None => local_coefficients(mat, q.x)?,
            };
            let basis = sp.basis_jets(cell.ex, cell.ey, q.xi, 3)?;
            if dofs.is_empty() {
                dofs = basis.iter().map(|(d, _)| *d).collect();
                k = vec![0.0; dofs.len() * dofs.len()];
                cacc = vec![[0.0; 3]; dofs.len()];
            }
            let m = dofs.len();
            let split: Vec<_> = basis.iter().map(|(_, j)| split_derivatives(j)).collect();
            for a in 0..m {
                let j = &basis[a].1;
                cacc[a][0] += q.w * j.value();
                cacc[a][1] += q.w * j.deriv(1, 0);
                cacc[a][2] += q.w * j.deriv(0, 1);
                for b in a..m {
                    k[a * m + b] += q.w * energy_density(&lc, &split[a], &split[b]);
                }
            }
        }
        let m = dofs.len();
        for a in 0..m {
            for b in 0..a {
                k[a * m + b] = k[b * m + a];
            }
        }
        Ok(CellContribution { dofs, k, c: cacc })
    });
    let mut coo = CooMatrix::new(n, n);
    let mut c = DMatrix::zeros(3, n);
    for contrib in contributions {
        let cc = contrib?;
        let m = cc.dofs.len();
        for a in 0..m {
            for r in 0..3 {
                c[(r, cc.dofs[a])] += cc.c[a][r];
            }
            for b in 0..m {
                coo.push(cc.dofs[a], cc.dofs[b], cc.k[a * m + b]);
            }
        }
    }
    let k = CscMatrix::from(&coo);
    let f = load_vector(&space, data, exec)?;
    let compatibility = compatibility_check_with(data, &space.domain, &space.boundary);
    Ok(AssembledSystem { space, k, f, c, compatibility, data: data.clone() })
}

/// `F_i = L̃(N_i)`.
pub fn load_vector(space: &SplineSpace, data: &NeumannData, exec: Execution) -> Result<DVector<f64>> {
    let idx: Vec<usize> = (0..space.boundary.frames.len()).collect();
    let parts: Vec<Result<Vec<(usize, f64)>>> = exec.map(&idx, |&i| {
        let f = &space.boundary.frames[i];
        let w = space.boundary.weights[i];
        let node = &space.boundary_nodes[i];
        let [v, m, mh] = data.eval(f);
        Ok(space
            .basis_jets(node.ex, node.ey, node.xi, 2)?
            .into_iter()
            .map(|(dof, j)| {
                let (w0, wn, wnn) = trace_of(&j, f);
                (dof, -w * (v * w0 + m * wn + mh * wnn))
            })
            .collect())
    });
    let mut out = DVector::zeros(space.num_dofs());
    for p in parts {
        for (dof, v) in p? {
            out[dof] += v;
        }
    }
    Ok(out)
}

/// Coordinate text format: `rows cols nnz`, then zero-based `i j value`.
pub fn export_coo(k: &CscMatrix<f64>) -> String {
    let mut s = String::new();
    writeln!(s, "{} {} {}", k.nrows(), k.ncols(), k.nnz()).unwrap();
    for (i, j, v) in k.triplet_iter() {
        writeln!(s, "{i} {j} {v:.16e}").unwrap();
    }
    s
}

/// Parses the coordinate text format back into a sparse matrix.
pub fn import_coo(text: &str) -> Result<CscMatrix<f64>> {
    let bad = |m: &str| Error::InvalidInput(format!("COO parse error: {m}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<usize> = lines
        .next()
        .ok_or_else(|| bad("missing header"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("header")))
        .collect::<Result<_>>()?;
    if header.len() != 3 {
        return Err(bad("header needs rows cols nnz"));
    }
    let mut coo = CooMatrix::new(header[0], header[1]);
    let mut count = 0;
    for l in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(bad(l));
        }
        let i: usize = t[0].parse().map_err(|_| bad(l))?;
        let j: usize = t[1].parse().map_err(|_| bad(l))?;
        let v: f64 = t[2].parse().map_err(|_| bad(l))?;
        if i >= header[0] || j >= header[1] {
            return Err(bad("index out of range"));
        }
        coo.push(i, j, v);
        count += 1;
    }
    if count != header[2] {
        return Err(bad("entry count differs from header"));
    }
    Ok(CscMatrix::from(&coo))
}

/// Physical jets of the material's bending pair, exposed for diagnostics.
pub fn bending_pair_at(mat: &MaterialField, x: [f64; 2]) -> (f64, f64) {
    let (c1, c2) = bending_pair_jets(mat, x, 0);
    (c1.value(), c2.value())
}

/// Number of Taylor coefficients of an order-`k` jet.
pub fn derivative_count(k: usize) -> usize {
    coefficient_count(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> MaterialField {
        MaterialField::constant(1.0, 1.0, 1.0, [1.0; 3])
    }

    fn square(p: usize, n_el: usize) -> Arc<SplineSpace> {
        Arc::new(build_space(&Domain::rectangle(1.0, 1.0).unwrap(), p, n_el).unwrap())
    }

    fn dense_k(space: Arc<SplineSpace>) -> (AssembledSystem, DMatrix<f64>) {
        let sys = assemble(space, &unit(), &NeumannData::zero(), Execution::Sequential).unwrap();
        let k = DMatrix::from(&sys.k);
        (sys, k)
    }

    #[test]
    fn dimensions() {
        assert_eq!(square(3, 1).num_dofs(), 16);
        assert_eq!(square(3, 4).num_dofs(), 49);
    }

    #[test]
    fn degree_below_three_is_rejected() {
        let dom = Domain::rectangle(1.0, 1.0).unwrap();
        assert!(matches!(build_space(&dom, 2, 4), Err(Error::InvalidDegree(2))));
    }

    #[test]
    fn partition_of_unity() {
        let space = square(4, 5);
        let ones = vec![1.0; space.num_dofs()];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            let j = space.eval_field(&ones, x, 4).unwrap();
            assert!((j.value() - 1.0).abs() < 1e-13);
            for (a, b) in [(1, 0), (0, 1), (2, 1), (0, 4)] {
                assert!(j.deriv(a, b).abs() < 1e-9);
            }
        }
        for c in &space.cells {
            for q in &c.points {
                assert!((space.eval_reference(&ones, q.xi, 0).unwrap().value() - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn interpolated_quadratic_has_constant_curvature() {
        let space = square(3, 4);
        let c = space.interpolate(&Expr::parse("x1^2").unwrap()).unwrap();
        for x in [[0.1, 0.2], [-0.4, 0.33], [0.49, -0.49]] {
            let j = space.eval_field(c.as_slice(), x, 3).unwrap();
            assert!((j.deriv(2, 0) - 2.0).abs() < 1e-10);
            assert!((j.value() - x[0] * x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn order_above_degree_is_rejected() {
        let space = square(3, 2);
        let c = vec![0.0; space.num_dofs()];
        assert!(matches!(space.eval_field(&c, [0.0, 0.0], 4), Err(Error::OrderTooHigh { .. })));
    }

    #[test]
    fn fourth_derivative_matches_finite_differences() {
        let space = square(5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c: Vec<f64> = (0..space.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = 1e-5;
        for x in [[0.05, 0.07], [-0.21, 0.3], [0.4, -0.12]] {
            let j = space.eval_field(&c, x, 4).unwrap();
            let plus = space.eval_field(&c, [x[0] + h, x[1]], 3).unwrap();
            let minus = space.eval_field(&c, [x[0] - h, x[1]], 3).unwrap();
            for (a, b) in [(3, 0), (2, 1), (1, 2), (0, 3)] {
                let fd = (plus.deriv(a, b) - minus.deriv(a, b)) / (2.0 * h);
                let exact = j.deriv(a + 1, b);
                assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "{fd} vs {exact}");
            }
        }
    }

    #[test]
    fn stiffness_is_symmetric_and_kills_affines() {
        for space in [square(3, 4), Arc::new(build_space(&Domain::disk(1.0).unwrap(), 4, 6).unwrap())] {
            let (sys, _) = dense_k(space.clone());
            assert!(sys.asymmetry() <= 1e-12 * sys.k_norm());
            for c in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.3, -2.0, 1.5]] {
                let a = space.affine_coefficients(c).unwrap();
                assert!(sys.apply_k(&a).amax() <= 1e-10 * sys.k_norm());
            }
        }
    }

    #[test]
    fn single_element_stiffness_is_positive_off_affines() {
        let (_, k) = dense_k(square(3, 1));
        let mut eig: Vec<f64> = k.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let top = eig[15];
        assert!(eig[..3].iter().all(|e| e.abs() < 1e-12 * top), "{eig:?}");
        assert!(eig[3..].iter().all(|&e| e > 1e-8 * top), "{eig:?}");
    }

    #[test]
    fn constraint_rows_integrate_the_basis() {
        let space = Arc::new(build_space(&Domain::disk(1.0).unwrap(), 4, 6).unwrap());
        let (sys, _) = dense_k(space.clone());
        let one = space.affine_coefficients([1.0, 0.0, 0.0]).unwrap();
        let x1 = space.affine_coefficients([0.0, 1.0, 0.0]).unwrap();
        assert!(((&sys.c * &one)[0] - std::f64::consts::PI).abs() < 1e-12);
        // ∫∂₁x1 = area, ∫∂₂x1 = 0
        assert!(((&sys.c * &x1)[1] - std::f64::consts::PI).abs() < 1e-12);
        assert!((&sys.c * &x1)[2].abs() < 1e-12);
    }

    #[test]
    fn immersed_disk_area() {
        let space = build_space(&Domain::disk(1.0).unwrap(), 3, 7).unwrap();
        assert!((space.area() - std::f64::consts::PI).abs() < 1e-12);
        assert!(space.cells.iter().any(|c| c.cut));
    }

    #[test]
    fn stiffness_stable_under_quadrature_refinement() {
        for dom in [Domain::rectangle(1.0, 1.0).unwrap(), Domain::disk(1.0).unwrap()] {
            let base = Arc::new(build_space(&dom, 4, 4).unwrap());
            let fine =
                Arc::new(build_space_with(&dom, 4, 4, SpaceOptions { quad_points: Some(8), cut_extra: 2 }).unwrap());
            let (a, ka) = dense_k(base);
            let (_, kb) = dense_k(fine);
            assert!((&ka - &kb).amax() <= 1e-10 * a.k_norm());
        }
    }

    #[test]
    fn bilinear_form_matches_stiffness() {
        let space = square(4, 3);
        let (_, k) = dense_k(space.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = space.num_dofs();
        let u = DVector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)));
        let w = DVector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)));
        let fu = SplineField { space: space.clone(), coefs: u.clone() };
        let fw = SplineField { space: space.clone(), coefs: w.clone() };
        let a = bilinear_form(&space, &unit(), &fu, &fw, Execution::Sequential).unwrap();
        let kk = (w.transpose() * &k * &u)[0];
        assert!((a - kk).abs() <= 1e-11 * kk.abs().max(1.0));
    }

    #[test]
    fn parallel_and_sequential_assembly_agree_bitwise() {
        let space = Arc::new(build_space(&Domain::disk(1.0).unwrap(), 4, 5).unwrap());
        let a = assemble(space.clone(), &unit(), &NeumannData::zero(), Execution::Sequential).unwrap();
        let b = assemble(space, &unit(), &NeumannData::zero(), Execution::Parallel).unwrap();
        assert_eq!(a.k.values(), b.k.values());
    }

    #[test]
    fn coo_round_trip() {
        let (sys, _) = dense_k(square(3, 2));
        let text = export_coo(&sys.k);
        assert!(text.starts_with(&format!("{} {} {}\n", sys.n(), sys.n(), sys.k.nnz())));
        let back = import_coo(&text).unwrap();
        assert_eq!(DMatrix::from(&back), DMatrix::from(&sys.k));
        assert!(import_coo("2 2 1\n0 5 1.0\n").is_err());
        assert!(import_coo("2 2 2\n0 0 1.0\n").is_err());
    }

    #[test]
    fn mapped_space_reproduces_constants() {
        let map = PlaneMap { components: [Expr::parse("x1 + 0.2*x2").unwrap(), Expr::parse("x2 + 0.1*x1^2").unwrap()] };
        let dom = Domain::mapped(1.0, 1.0, map).unwrap();
        let space = Arc::new(build_space(&dom, 3, 3).unwrap());
        assert_eq!(space.embedding, Embedding::Mapped);
        assert!(space.affine_coefficients([1.0, 0.0, 0.0]).is_none());
        let ones = DVector::from_element(space.num_dofs(), 1.0);
        let (sys, _) = dense_k(space.clone());
        assert!(sys.apply_k(&ones).amax() <= 1e-10 * sys.k_norm());
        let x = dom.point_at(0.37);
        let inner = [0.8 * x[0], 0.8 * x[1]];
        let j = space.eval_field(ones.as_slice(), inner, 2).unwrap();
        assert!((j.value() - 1.0).abs() < 1e-12 && j.deriv(1, 0).abs() < 1e-10);
    }
}
