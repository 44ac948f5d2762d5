//! Prints the invariants and residuals of one surface point.
//!
//!     cargo run --example point_report -p mlq

use mlq::frames::{SurfaceEvaluator, SurfaceOptions};
use mlq::potentials::{make_potential, PotentialSpec};
use mlq::verify::pipeline_report;
use mlq::Complex64;

fn main() -> Result<(), mlq::Error> {
    let p = make_potential(PotentialSpec::Equivariant { a: 0.75, b: 0.25, c: 0.0 })?;
    let ev = SurfaceEvaluator::new(p, Complex64::new(1.0, 0.0), SurfaceOptions::default())?;
    let r = pipeline_report(&ev, Complex64::new(1.1, 0.2), 1e-3)?;
    println!("u = {:.6}, alpha = {:.6}, beta = {:.6}", r.invariants.u, r.invariants.alpha, r.invariants.beta);
    println!("{:#?}", r.geometry);
    Ok(())
}
