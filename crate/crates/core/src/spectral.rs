//! Periodic sampled functions: FFT differentiation and trigonometric
//! interpolation.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

#[derive(Clone, Debug)]
pub struct PeriodicSamples {
    period: f64,
    values: Vec<f64>,
    /// Normalised Fourier coefficients in FFT order.
    coeffs: Vec<Complex64>,
}

fn wavenumber(j: usize, n: usize) -> f64 {
    if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

impl PeriodicSamples {
    /// `values[j]` is the function at `s = j · period / n`.
    pub fn new(period: f64, values: Vec<f64>) -> Self {
        let n = values.len();
        assert!(n >= 2, "need at least two samples");
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        for c in &mut buf {
            *c /= n as f64;
        }
        PeriodicSamples { period, values, coeffs: buf }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.period / self.len() as f64;
        (0..self.len()).map(move |j| j as f64 * h)
    }

    /// Spectral derivative of order `m` in `s`.
    pub fn derivative(&self, m: u32) -> PeriodicSamples {
        let n = self.len();
        let scale = TAU / self.period;
        let mut c = self.coeffs.clone();
        for (j, cj) in c.iter_mut().enumerate() {
            if n.is_multiple_of(2) && j == n / 2 {
                *cj = Complex64::new(0.0, 0.0);
                continue;
            }
            let k = wavenumber(j, n) * scale;
            *cj *= Complex64::new(0.0, k).powu(m);
        }
        let mut buf: Vec<Complex64> = c.iter().map(|v| v * n as f64).collect();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        let values = buf.iter().map(|v| v.re / n as f64).collect();
        PeriodicSamples { period: self.period, values, coeffs: c }
    }

    /// Trigonometric interpolant at arbitrary `s`.
    pub fn eval(&self, s: f64) -> f64 {
        let n = self.len();
        let theta = TAU * s / self.period;
        let mut acc = self.coeffs[0].re;
        let half = n.div_ceil(2);
        for j in 1..half {
            let (sn, cs) = (j as f64 * theta).sin_cos();
            let c = self.coeffs[j];
            acc += 2.0 * (c.re * cs - c.im * sn);
        }
        if n.is_multiple_of(2) {
            acc += self.coeffs[n / 2].re * (n as f64 / 2.0 * theta).cos();
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn differentiates_trig_polynomials_exactly() {
        let p = 3.0;
        let n = 64;
        let f = |s: f64| (TAU * s / p).sin() + 0.5 * (3.0 * TAU * s / p).cos();
        let df = |s: f64| TAU / p * ((TAU * s / p).cos() - 1.5 * (3.0 * TAU * s / p).sin());
        let vals = (0..n).map(|j| f(j as f64 * p / n as f64)).collect();
        let ps = PeriodicSamples::new(p, vals);
        let d = ps.derivative(1);
        for (s, v) in d.nodes().zip(d.values()) {
            assert_relative_eq!(*v, df(s), epsilon = 1e-12);
        }
        let d2 = ps.derivative(2);
        let d2_again = d.derivative(1);
        for (a, b) in d2.values().iter().zip(d2_again.values()) {
            assert_relative_eq!(a, b, epsilon = 1e-11);
        }
        for s in [0.1, 0.77, 2.9] {
            assert_relative_eq!(ps.eval(s), f(s), epsilon = 1e-13);
            assert_relative_eq!(d.eval(s), df(s), epsilon = 1e-12);
        }
    }
}
