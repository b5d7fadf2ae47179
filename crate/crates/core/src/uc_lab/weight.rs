//! The singular Carleman weight `ρ(x) = φ_ε(|x|)`, `φ_ε(s) = s / (1 + s^ε)^{1/ε}`.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::jet::Jet;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarlemanWeight {
    pub epsilon: f64,
}

impl CarlemanWeight {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 0.5) {
            return Err(Error::InvalidInput(format!("weight exponent ε = {epsilon} outside (0, 1/2]")));
        }
        Ok(CarlemanWeight { epsilon })
    }

    pub fn phi(&self, s: f64) -> f64 {
        s / (1.0 + s.powf(self.epsilon)).powf(1.0 / self.epsilon)
    }

    pub fn rho(&self, x: [f64; 2]) -> f64 {
        self.phi(x[0].hypot(x[1]))
    }

    /// `ρ(x)^k`; negative powers are undefined at the origin.
    pub fn power(&self, x: [f64; 2], k: f64) -> Result<f64> {
        let r = self.rho(x);
        if r == 0.0 && k < 0.0 {
            return Err(Error::OriginSingular);
        }
        Ok(r.powf(k))
    }

    /// Lower and upper bounds `|x| / 2^{1/ε} ≤ ρ(x) ≤ |x|` on the unit disk.
    pub fn bounds(&self, x: [f64; 2]) -> (f64, f64) {
        let s = x[0].hypot(x[1]);
        (s / 2f64.powf(1.0 / self.epsilon), s)
    }

    /// `ρ^k` as a field with derivatives, for use as a multiplier.
    pub fn power_field(&self, k: f64) -> RhoPower {
        RhoPower { weight: *self, exponent: k }
    }
}

/// `ρ(x)^k` away from the origin.
#[derive(Clone, Copy, Debug)]
pub struct RhoPower {
    pub weight: CarlemanWeight,
    pub exponent: f64,
}

impl Field for RhoPower {
    fn jet(&self, x: [f64; 2], order: usize) -> Jet {
        let [a, b] = Jet::coordinates(x, order);
        let s = (a * a + b * b).sqrt();
        let eps = self.weight.epsilon;
        let phi = s / (s.powf(eps) + 1.0).powf(1.0 / eps);
        phi.powf(self.exponent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_radius_values() {
        let w = CarlemanWeight::new(0.5).unwrap();
        assert_relative_eq!(w.rho([1.0, 0.0]), 0.25, epsilon = 1e-15);
        let w = CarlemanWeight::new(0.2).unwrap();
        assert_relative_eq!(w.rho([0.0, 1.0]), 1.0 / 32.0, epsilon = 1e-15);
    }

    #[test]
    fn ratio_to_radius_tends_to_one() {
        let w = CarlemanWeight::new(0.25).unwrap();
        let s = 1e-12;
        assert!((w.rho([s, 0.0]) / s - 1.0).abs() < 1e-2);
        assert!((w.rho([1e-40, 0.0]) / 1e-40 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_power_at_origin_is_an_error() {
        let w = CarlemanWeight::new(0.5).unwrap();
        assert_eq!(w.power([0.0, 0.0], -1.0), Err(Error::OriginSingular));
        assert_eq!(w.power([0.0, 0.0], 2.0), Ok(0.0));
    }

    #[test]
    fn power_field_matches_pointwise_values() {
        let w = CarlemanWeight::new(0.2).unwrap();
        let f = w.power_field(-3.0);
        let x = [0.3, -0.2];
        let j = f.jet(x, 2);
        assert_relative_eq!(j.value(), w.power(x, -3.0).unwrap(), max_relative = 1e-13);
        let h = 1e-5;
        let fd = (w.power([x[0] + h, x[1]], -3.0).unwrap() - w.power([x[0] - h, x[1]], -3.0).unwrap()) / (2.0 * h);
        assert_relative_eq!(j.deriv(1, 0), fd, max_relative = 1e-8);
    }

    #[test]
    fn rejects_exponent_outside_range() {
        assert!(CarlemanWeight::new(0.0).is_err());
        assert!(CarlemanWeight::new(0.6).is_err());
    }
}
