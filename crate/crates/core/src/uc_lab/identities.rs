//! Weighted integration-by-parts identities for compactly supported `u` and
//! a multiplier `ζ`.

use super::polar::{PolarResolution, PolarRule};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{Field, Support};
use crate::jet::{tensor_norm_sq, Jet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Identity {
    /// `∫ζuΔu = -∫(ζ|Du|² + (Du·Dζ)u)`
    First,
    /// `∫ζΣ|∂ⱼₖu|² = ∫(-D²ζDu·Du + Δζ|Du|² + ζ(Δu)²)`
    Second,
    /// `∫ζΣ|∂ᵢⱼₖu|² = -∫ζΔuΔ²u + ∫(-tr(D²uD²ζD²u) + Δζ|D²u|² + ½Δζ(Δu)²)`
    Third,
}

impl Identity {
    pub fn from_index(i: u32) -> Result<Self> {
        match i {
            1 => Ok(Identity::First),
            2 => Ok(Identity::Second),
            3 => Ok(Identity::Third),
            _ => Err(Error::InvalidInput(format!("identity {i} is not 1, 2 or 3"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs|` relative to the largest integrated term.
    pub gap: f64,
}

fn hess(j: &Jet) -> [[f64; 2]; 2] {
    [[j.deriv(2, 0), j.deriv(1, 1)], [j.deriv(1, 1), j.deriv(0, 2)]]
}

fn mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Pointwise terms: `[lhs, rhs terms...]`, at most five.
fn integrand(which: Identity, u: &Jet, z: &Jet) -> [f64; 5] {
    let zeta = z.value();
    let du = [u.deriv(1, 0), u.deriv(0, 1)];
    let dz = [z.deriv(1, 0), z.deriv(0, 1)];
    let lap_u = u.deriv(2, 0) + u.deriv(0, 2);
    let lap_z = z.deriv(2, 0) + z.deriv(0, 2);
    let grad2 = du[0] * du[0] + du[1] * du[1];
    match which {
        Identity::First => {
            [zeta * u.value() * lap_u, -zeta * grad2, -(du[0] * dz[0] + du[1] * dz[1]) * u.value(), 0.0, 0.0]
        }
        Identity::Second => {
            let hz = hess(z);
            let q = du[0] * (hz[0][0] * du[0] + hz[0][1] * du[1]) + du[1] * (hz[1][0] * du[0] + hz[1][1] * du[1]);
            [zeta * tensor_norm_sq(u, 2), -q, lap_z * grad2, zeta * lap_u * lap_u, 0.0]
        }
        Identity::Third => {
            let hu = hess(u);
            let hz = hess(z);
            let m = mul(&mul(&hu, &hz), &hu);
            let bilap = u.laplacian().laplacian().value();
            [
                zeta * tensor_norm_sq(u, 3),
                -zeta * lap_u * bilap,
                -(m[0][0] + m[1][1]),
                lap_z * tensor_norm_sq(u, 2),
                0.5 * lap_z * lap_u * lap_u,
            ]
        }
    }
}

/// Integrates both sides of an identity over the support annulus of `u`.
pub fn identity_check(
    which: Identity,
    u: &dyn Field,
    support: &Support,
    zeta: &dyn Field,
    res: PolarResolution,
    exec: Execution,
) -> Result<IdentityCheck> {
    let (a, b) = support.radial_extent();
    if a <= 0.0 {
        return Err(Error::SupportViolation("the identities need a support away from the origin".into()));
    }
    let rule = PolarRule::annulus(a, b, res);
    let order = if which == Identity::Third { 4 } else { 2 };
    let t = rule.integrate_many::<5>(exec, |x| integrand(which, &u.jet(x, order), &zeta.jet(x, 2)));
    let lhs = t[0];
    let rhs: f64 = t[1..].iter().sum();
    let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = if scale > 0.0 { (lhs - rhs).abs() / scale } else { 0.0 };
    Ok(IdentityCheck { lhs, rhs, gap })
}
