//! Seeded test fields for the laboratory.
//!
//! * Carleman battery: five annular bumps `((r-a)(b-r))^7 g(x)` inside
//!   `B_{R₁}`, one radial, three with fixed smooth factors and one with
//!   seeded random support and factor.
//! * Identity battery: random bumps paired with multipliers `ρ^{-k}`,
//!   exponentials and positive quadratics.
//! * Δ³-harmonic battery: `1, x1, Re z², Re z³, Re z⁴`.
//! * Reduction battery: random degree-6 polynomials with degree-2
//!   coefficients `b₀, b₁`.

use super::weight::CarlemanWeight;
use crate::expr::Expr;
use crate::field::{AnnularBump, Field, HarmonicPower, Support};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct TestField {
    pub name: String,
    pub field: Box<dyn Field>,
    pub support: Option<Support>,
}

fn expr(src: &str) -> Expr {
    Expr::parse(src).expect("battery expressions are well formed")
}

fn coef(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn bump(name: String, b: AnnularBump) -> TestField {
    let support = Some(b.support());
    TestField { name, field: Box::new(b), support }
}

pub fn carleman_battery(r1: f64, seed: u64) -> Vec<TestField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (coef(&mut rng, 0.2, 0.4) * r1, coef(&mut rng, 0.6, 0.95) * r1);
    let (c1, c2, c3) = (coef(&mut rng, -1.0, 1.0), coef(&mut rng, -1.0, 1.0), coef(&mut rng, -1.0, 1.0));
    vec![
        bump("radial".into(), AnnularBump::new(0.4 * r1, 0.8 * r1)),
        bump("linear-factor".into(), AnnularBump::new(0.2 * r1, 0.9 * r1).with_factor(expr("1 + x1"))),
        bump("quadratic-factor".into(), AnnularBump::new(0.3 * r1, 0.7 * r1).with_factor(expr("x1^2 - x2^2 + 0.5"))),
        bump("exponential-factor".into(), AnnularBump::new(0.25 * r1, 0.95 * r1).with_factor(expr("exp(x2)"))),
        bump(
            format!("random-{seed}"),
            AnnularBump::new(a, b).with_factor(expr(&format!("1 + ({c1:?})*x1 + ({c2:?})*x2 + ({c3:?})*x1*x2"))),
        ),
    ]
}

pub struct IdentityPair {
    pub u: TestField,
    pub zeta: Box<dyn Field>,
    pub zeta_name: String,
}

pub fn identity_battery(n: usize, seed: u64) -> Vec<IdentityPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let a = coef(&mut rng, 0.1, 0.3);
            let b = coef(&mut rng, 0.5, 0.9);
            let (c1, c2) = (coef(&mut rng, -1.0, 1.0), coef(&mut rng, -1.0, 1.0));
            let u = bump(
                format!("bump-{i}"),
                AnnularBump::new(a, b).with_factor(expr(&format!("1 + ({c1:?})*x1 + ({c2:?})*x2^2"))),
            );
            let (zeta, zeta_name): (Box<dyn Field>, String) = match i % 3 {
                0 => {
                    let eps = [0.2, 0.25, 0.5][rng.random_range(0..3usize)];
                    let k = -f64::from(rng.random_range(1..=4u32));
                    let w = CarlemanWeight { epsilon: eps };
                    (Box::new(w.power_field(k)), format!("rho^({k}) eps={eps}"))
                }
                1 => {
                    let (p, q) = (coef(&mut rng, -2.0, 2.0), coef(&mut rng, -2.0, 2.0));
                    let s = format!("exp(({p:?})*x1 + ({q:?})*x2)");
                    (Box::new(expr(&s)), s)
                }
                _ => {
                    let (p, q) = (coef(&mut rng, 0.0, 3.0), coef(&mut rng, -1.0, 1.0));
                    let s = format!("1 + ({p:?})*x1^2 + ({q:?})*x1*x2 + x2^2");
                    (Box::new(expr(&s)), s)
                }
            };
            IdentityPair { u, zeta, zeta_name }
        })
        .collect()
}

pub fn harmonic_battery() -> Vec<TestField> {
    let mut out = vec![
        TestField { name: "1".into(), field: Box::new(HarmonicPower { m: 0 }), support: None },
        TestField { name: "x1".into(), field: Box::new(expr("x1")), support: None },
    ];
    for m in 2..=4 {
        out.push(TestField { name: format!("Re z^{m}"), field: Box::new(HarmonicPower { m }), support: None });
    }
    out
}

pub struct ReductionCase {
    pub u: Expr,
    pub b0: Expr,
    pub b1: Expr,
}

fn random_poly(rng: &mut ChaCha8Rng, degree: u32, constant: f64) -> Expr {
    let mut terms = vec![format!("{constant:?}")];
    for total in 1..=degree {
        for i in 0..=total {
            let c = coef(rng, -1.0, 1.0);
            terms.push(format!("({c:?})*x1^{}*x2^{}", total - i, i));
        }
    }
    expr(&terms.join(" + "))
}

pub fn reduction_battery(n: usize, seed: u64) -> Vec<ReductionCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u = random_poly(&mut rng, 6, 0.0);
            let b0 = random_poly(&mut rng, 2, 3.0);
            let b1 = random_poly(&mut rng, 2, 2.0);
            ReductionCase { u, b0, b1 }
        })
        .collect()
}
