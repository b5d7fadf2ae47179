//! Polar quadrature on disks and annuli centred at the origin.

use crate::exec::Execution;
use crate::quadrature;

/// Tensor rule: Gauss–Legendre panels in the radius, trapezoid in the angle.
#[derive(Clone, Debug)]
pub struct PolarRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolarResolution {
    pub panels: usize,
    pub points_per_panel: usize,
    pub angles: usize,
}

impl PolarResolution {
    pub const fn new(panels: usize, points_per_panel: usize, angles: usize) -> Self {
        PolarResolution { panels, points_per_panel, angles }
    }

    /// Twice the panels and angles.
    pub fn refined(self) -> Self {
        PolarResolution { panels: 2 * self.panels, angles: 2 * self.angles, ..self }
    }
}

impl PolarRule {
    pub fn annulus(inner: f64, outer: f64, res: PolarResolution) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let dtheta = std::f64::consts::TAU / res.angles as f64;
        for (r, wr) in quadrature::composite(res.points_per_panel, res.panels, inner, outer) {
            for k in 0..res.angles {
                let t = dtheta * k as f64;
                points.push([r * t.cos(), r * t.sin()]);
                weights.push(wr * r * dtheta);
            }
        }
        PolarRule { points, weights }
    }

    pub fn disk(radius: f64, res: PolarResolution) -> Self {
        Self::annulus(0.0, radius, res)
    }

    /// `Σ wᵢ g(xᵢ)` accumulated in a fixed order.
    pub fn integrate(&self, exec: Execution, g: impl Fn([f64; 2]) -> f64 + Sync + Send) -> f64 {
        self.integrate_many::<1>(exec, |x| [g(x)])[0]
    }

    /// Several integrals sharing one evaluation per node.
    pub fn integrate_many<const N: usize>(
        &self,
        exec: Execution,
        g: impl Fn([f64; 2]) -> [f64; N] + Sync + Send,
    ) -> [f64; N] {
        const CHUNK: usize = 256;
        let chunks: Vec<usize> = (0..self.points.len()).step_by(CHUNK).collect();
        let parts = exec.map(&chunks, |&start| {
            let mut acc = [0.0; N];
            for i in start..(start + CHUNK).min(self.points.len()) {
                let v = g(self.points[i]);
                for k in 0..N {
                    acc[k] += self.weights[i] * v[k];
                }
            }
            acc
        });
        let mut total = [0.0; N];
        for p in parts {
            for k in 0..N {
                total[k] += p[k];
            }
        }
        total
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn disk_moments() {
        let rule = PolarRule::disk(0.5, PolarResolution::new(2, 8, 32));
        assert_relative_eq!(rule.integrate(Execution::Sequential, |_| 1.0), PI * 0.25, epsilon = 1e-14);
        let m = rule.integrate(Execution::Sequential, |x| x[0] * x[0]);
        assert_relative_eq!(m, PI * 0.5f64.powi(4) / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn annulus_area() {
        let rule = PolarRule::annulus(0.2, 0.4, PolarResolution::new(3, 6, 16));
        assert_relative_eq!(rule.integrate(Execution::best(), |_| 1.0), PI * (0.16 - 0.04), epsilon = 1e-14);
    }
}
