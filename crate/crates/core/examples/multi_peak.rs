//! Two peaks in the double well `V = 1 + (x^2 - 1)^2`: the correction to the
//! superposition shrinks faster than `eps^{1/2}` and the centers settle on `+-1`.

use std::sync::Arc;

use kirchhoff::multipeak::{build_multi_peak, build_multi_peak_spec, correction_norm, MultiPeakOptions};
use kirchhoff::kirchhoff_map::KirchhoffFunction;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = KirchhoffFunction::affine(1.0, 1.0);
    let spec = build_multi_peak_spec(
        Arc::new(|x: &[f64]| 1.0 + (x[0] * x[0] - 1.0).powi(2)),
        Arc::new(|x: &[f64]| vec![4.0 * x[0] * (x[0] * x[0] - 1.0)]),
        4.0,
        vec![vec![-1.0], vec![1.0]],
        &m,
        2.0,
    )?;
    println!("C* = {:.12}, A_total = {:.12}", spec.c_star, spec.a_total);
    for eps in [0.1, 0.05, 0.025] {
        let sol = build_multi_peak(&spec, eps, None, &MultiPeakOptions::default())?;
        let c = correction_norm(&sol, &spec.v)?;
        let drift: Vec<f64> = sol.centers.iter().zip([-1.0, 1.0]).map(|(c, q)| (c - q).abs() / eps).collect();
        println!(
            "eps={eps:<6} |phi|/eps^(1/2)={:.4e} drift={:?} residual={:.1e} newton={}",
            c.ratio, drift, sol.residual.max, sol.iterations
        );
    }
    Ok(())
}
