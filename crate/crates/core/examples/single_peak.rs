//! Single-peak Kirchhoff solutions for `V = 1 + x^2` built from the
//! finite-difference NLS family, with residuals and decay fits.

use std::sync::Arc;

use kirchhoff::correspondence::{analyse, build_single_peak};
use kirchhoff::family::NumericalFamily1D;
use kirchhoff::kirchhoff_map::{DeltaOptions, KirchhoffFunction};
use kirchhoff::profiles::PeakOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = KirchhoffFunction::affine(1.0, 1.0);
    for eps in [0.1, 0.05, 0.025] {
        let fam = NumericalFamily1D::new(Arc::new(|x: f64| 1.0 + x * x), 4.0, 0.0, PeakOptions::default())?;
        let mut sol = build_single_peak(&fam, &m, eps, &DeltaOptions::default())?;
        analyse(&mut sol, &fam, &m)?;
        let res = sol.residual.unwrap();
        let decay = sol.decay.unwrap();
        println!(
            "eps={eps:<6} delta/eps={:.10} C*={:.10} identity={:.1e} residual={:.1e} decay={:.4}",
            sol.c_star_estimate,
            sol.correspondence.c_star.unwrap_or(f64::NAN),
            sol.identity_error(),
            res.max,
            decay.rate
        );
    }
    Ok(())
}
