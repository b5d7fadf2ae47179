//! Scalar fields on the plane that can report all partial derivatives up to
//! order six at a point.

use crate::expr::Expr;
use crate::jet::Jet;

pub trait Field: Send + Sync {
    /// Taylor jet of the field at `x`, truncated at `order`.
    fn jet(&self, x: [f64; 2], order: usize) -> Jet;

    fn value(&self, x: [f64; 2]) -> f64 {
        self.jet(x, 0).value()
    }
}

impl Field for Expr {
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        Expr::jet(self, x, order)
    }
}

impl<F: Field + ?Sized> Field for &F {
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        (**self).jet(x, order)
    }
}

impl<F: Field + ?Sized> Field for Box<F> {
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        (**self).jet(x, order)
    }
}

impl<F: Field + ?Sized> Field for std::sync::Arc<F> {
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        (**self).jet(x, order)
    }
}

/// A closure-backed field.
pub struct FnField<F>(pub F);

impl<F> Field for FnField<F>
where
    F: Fn([f64; 2], usize) -> Jet + Send + Sync,
{
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        (self.0)(x, order)
    }
}

/// `Re((x1 + i x2)^m)`, a harmonic (hence Δ³-harmonic) polynomial.
#[derive(Clone, Copy, Debug)]
pub struct HarmonicPower {
    pub m: u32,
}

impl Field for HarmonicPower {
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        let [a, b] = Jet::coordinates(x, order);
        let (mut re, mut im) = (Jet::constant(1.0, order), Jet::zero(order));
        for _ in 0..self.m {
            let r = re * a - im * b;
            im = re * b + im * a;
            re = r;
        }
        re
    }
}

/// `c · f` for a field `f`.
pub struct Scaled<F> {
    pub factor: f64,
    pub inner: F,
}

impl<F: Field> Field for Scaled<F> {
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        self.inner.jet(x, order).scale(self.factor)
    }
}

/// `f - g`.
pub struct Difference<F, G>(pub F, pub G);

impl<F: Field, G: Field> Field for Difference<F, G> {
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        self.0.jet(x, order) - self.1.jet(x, order)
    }
}

/// `f + c0 + c1 x1 + c2 x2`.
pub struct PlusAffine<F> {
    pub inner: F,
    pub affine: [f64; 3],
}

impl<F: Field> Field for PlusAffine<F> {
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        let [a, b] = Jet::coordinates(x, order);
        self.inner.jet(x, order) + a.scale(self.affine[1]) + b.scale(self.affine[2]) + self.affine[0]
    }
}

/// Where a compactly supported field may be nonzero: the closed annulus
/// `inner ≤ |x - center| ≤ outer`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Support {
    pub center: [f64; 2],
    pub inner: f64,
    pub outer: f64,
}

impl Support {
    /// Smallest and largest distance from the origin over the support.
    pub fn radial_extent(&self) -> (f64, f64) {
        let c = self.center[0].hypot(self.center[1]);
        if c == 0.0 {
            (self.inner, self.outer)
        } else {
            ((c - self.outer).max(0.0), c + self.outer)
        }
    }
}

/// `((r - a)(b - r))^7 · g(x)` on `a < r < b`, zero elsewhere, with
/// `r = |x - center|`. Six continuous derivatives.
pub struct AnnularBump {
    pub center: [f64; 2],
    pub inner: f64,
    pub outer: f64,
    pub factor: Option<Expr>,
}

impl AnnularBump {
    pub fn new(inner: f64, outer: f64) -> Self {
        AnnularBump { center: [0.0, 0.0], inner, outer, factor: None }
    }

    pub fn with_factor(mut self, factor: Expr) -> Self {
        self.factor = Some(factor);
        self
    }

    pub fn support(&self) -> Support {
        Support { center: self.center, inner: self.inner, outer: self.outer }
    }
}

impl Field for AnnularBump {
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let r0 = d[0].hypot(d[1]);
        if r0 <= self.inner || r0 >= self.outer {
            return Jet::zero(order);
        }
        let [a, b] = Jet::coordinates(x, order);
        let (dx, dy) = (a - self.center[0], b - self.center[1]);
        let r = (dx * dx + dy * dy).sqrt();
        let bump = ((r - self.inner) * (Jet::constant(self.outer, order) - r)).powi(7);
        match &self.factor {
            Some(g) => bump * g.jet(x, order),
            None => bump,
        }
    }
}

/// `(R² - |x - c|²)^7` inside the disk of radius `R` around `c`.
pub struct DiskBump {
    pub center: [f64; 2],
    pub radius: f64,
}

impl DiskBump {
    pub fn support(&self) -> Support {
        Support { center: self.center, inner: 0.0, outer: self.radius }
    }
}

impl Field for DiskBump {
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        if d[0].hypot(d[1]) >= self.radius {
            return Jet::zero(order);
        }
        let [a, b] = Jet::coordinates(x, order);
        let (dx, dy) = (a - self.center[0], b - self.center[1]);
        (Jet::constant(self.radius * self.radius, order) - dx * dx - dy * dy).powi(7)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_powers_are_harmonic() {
        for m in 0..6 {
            let f = HarmonicPower { m };
            let j = f.jet([0.3, -0.7], 4);
            assert!(j.laplacian().value().abs() < 1e-12);
        }
        let z3 = HarmonicPower { m: 3 }.jet([0.5, 0.2], 0).value();
        assert_relative_eq!(z3, 0.5f64.powi(3) - 3.0 * 0.5 * 0.04, epsilon = 1e-15);
    }

    #[test]
    fn bumps_vanish_outside_support_and_are_smooth_inside() {
        let b = AnnularBump::new(0.2, 0.4);
        assert_eq!(b.value([0.1, 0.0]), 0.0);
        assert_eq!(b.value([0.5, 0.0]), 0.0);
        assert!(b.value([0.3, 0.0]) > 0.0);
        // sixth derivatives stay finite approaching the edge
        let j = b.jet([0.2 + 1e-3, 0.0], 6);
        assert!(j.deriv(6, 0).is_finite());
        let d = DiskBump { center: [0.3, 0.1], radius: 0.1 };
        assert_eq!(d.value([0.0, 0.0]), 0.0);
        assert_relative_eq!(d.value([0.3, 0.1]), 1e-14, max_relative = 1e-12);
    }
}
