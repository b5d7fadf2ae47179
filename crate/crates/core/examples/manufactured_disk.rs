//! Solves the Neumann problem on the unit disk with data generated by a
//! cubic displacement and reports how well it is recovered.
//!
//! `cargo run --release --example manufactured_disk -- [degree] [elements] [u*]`

use nanoplate_core::discretization::{assemble, build_space};
use nanoplate_core::exec::Execution;
use nanoplate_core::expr::Expr;
use nanoplate_core::geometry::Domain;
use nanoplate_core::material::MaterialField;
use nanoplate_core::neumann::synthesize;
use nanoplate_core::solver::{error_modulo_affine, solve};
use std::sync::Arc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let p = args.first().map(|s| s.parse()).transpose()?.unwrap_or(4);
    let n_el = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    let u = Expr::parse(args.get(2).map(String::as_str).unwrap_or("x1^3"))?;

    let dom = Domain::disk(1.0)?;
    let mat = MaterialField::constant(1.0, 1.0, 1.0, [1.0; 3]);
    let data = synthesize(&u, &mat, &dom, 1024)?;
    let space = Arc::new(build_space(&dom, p, n_el)?);
    let system = assemble(space.clone(), &mat, &data, Execution::best())?;
    println!("dofs {}  compatibility residuals {:?}", system.n(), system.compatibility.residuals);

    let result = solve(&system)?;
    let (err, norm) = error_modulo_affine(&space, result.coefs.as_slice(), &u, Execution::best())?;
    println!("energy {:.12e}  load {:.12e}", result.energy, result.load);
    println!("relative H3 error modulo affines {:.3e}", err / norm);
    println!("stability ratio {:?}", result.stability_ratio);
    Ok(())
}
