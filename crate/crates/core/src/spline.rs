//! Univariate B-spline bases on open uniform knot vectors.

/// Open uniform knot vector of degree `p` with `n_el` equal elements on `[a, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    pub p: usize,
    pub n_el: usize,
    pub a: f64,
    pub b: f64,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn uniform(p: usize, n_el: usize, a: f64, b: f64) -> Self {
        let mut knots = vec![a; p + 1];
        for i in 1..n_el {
            knots.push(a + (b - a) * i as f64 / n_el as f64);
        }
        knots.extend(std::iter::repeat_n(b, p + 1));
        KnotVector { p, n_el, a, b, knots }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_basis(&self) -> usize {
        self.n_el + self.p
    }

    /// Element boundaries `a = x₀ < x₁ < … < x_{n_el} = b`.
    pub fn breakpoints(&self) -> Vec<f64> {
        (0..=self.n_el).map(|i| self.breakpoint(i)).collect()
    }

    pub fn breakpoint(&self, i: usize) -> f64 {
        if i == self.n_el {
            self.b
        } else {
            self.knots[self.p + i]
        }
    }

    /// Element containing `x`; points outside are clamped to the end elements.
    pub fn element_of(&self, x: f64) -> usize {
        let t = (x - self.a) / (self.b - self.a) * self.n_el as f64;
        (t.floor().max(0.0) as usize).min(self.n_el - 1)
    }

    /// Greville abscissa of basis function `i`.
    pub fn greville(&self, i: usize) -> f64 {
        self.knots[i + 1..=i + self.p].iter().sum::<f64>() / self.p as f64
    }

    /// Derivatives `out[k][j]` of order `k = 0..=nd` of the `p + 1` basis
    /// functions `e, …, e + p` that are nonzero on element `e`, at `x`.
    pub fn basis_derivatives(&self, e: usize, x: f64, nd: usize) -> Vec<Vec<f64>> {
        let p = self.p;
        let span = e + p;
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = vec![vec![0.0; p + 1]; nd + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=nd.min(p) {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = p as f64;
        for k in 1..=nd.min(p) {
            for v in ders[k].iter_mut() {
                *v *= fac;
            }
            fac *= (p - k) as f64;
        }
        ders
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn partition_of_unity_and_linear_reproduction() {
        let kv = KnotVector::uniform(4, 5, -1.0, 2.0);
        assert_eq!(kv.num_basis(), 9);
        for k in 0..=50 {
            let x = -1.0 + 3.0 * k as f64 / 50.0;
            let e = kv.element_of(x);
            let d = kv.basis_derivatives(e, x, 2);
            let s: f64 = d[0].iter().sum();
            assert_relative_eq!(s, 1.0, epsilon = 1e-14);
            let lin: f64 = d[0].iter().enumerate().map(|(j, v)| v * kv.greville(e + j)).sum();
            assert_relative_eq!(lin, x, epsilon = 1e-14);
            let ds: f64 = d[1].iter().sum();
            assert!(ds.abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let kv = KnotVector::uniform(5, 3, 0.0, 1.0);
        let x = 0.41;
        let e = kv.element_of(x);
        let h = 1e-5;
        let d = kv.basis_derivatives(e, x, 3);
        let dp = kv.basis_derivatives(e, x + h, 2);
        let dm = kv.basis_derivatives(e, x - h, 2);
        for j in 0..6 {
            assert_relative_eq!(d[1][j], (dp[0][j] - dm[0][j]) / (2.0 * h), epsilon = 1e-8);
            assert_relative_eq!(d[3][j], (dp[2][j] - dm[2][j]) / (2.0 * h), epsilon = 1e-4);
        }
    }

    #[test]
    fn single_element_is_bernstein() {
        let kv = KnotVector::uniform(3, 1, 0.0, 1.0);
        let d = kv.basis_derivatives(0, 0.25, 0);
        let t: f64 = 0.25;
        let expect = [(1.0 - t).powi(3), 3.0 * t * (1.0 - t).powi(2), 3.0 * t * t * (1.0 - t), t.powi(3)];
        for j in 0..4 {
            assert_relative_eq!(d[0][j], expect[j], epsilon = 1e-15);
        }
    }
}
