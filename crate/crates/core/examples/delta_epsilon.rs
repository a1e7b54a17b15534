//! `delta_eps` for constant `V`: the ratio `delta_eps / eps` is the same root
//! of `t^2 - A t - 1` for every `eps`. The `N = 4` case has no solution.

use kirchhoff::family::{ExactFamily, ScalingMap};
use kirchhoff::kirchhoff_map::{solve_delta_epsilon, DeltaOptions, KirchhoffFunction};
use kirchhoff::profiles::ground_state;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = KirchhoffFunction::affine(1.0, 1.0);
    let w = ground_state(3, 1.0, 4.0)?;
    let a = w.gradient_norm_sq;
    let closed = 0.5 * (a + (a * a + 4.0).sqrt());
    let fam = ExactFamily::new(w);
    for eps in [0.1, 0.05, 0.025, 0.0125] {
        let c = solve_delta_epsilon(&m, &fam, eps, &DeltaOptions::default())?;
        println!(
            "eps={eps:<7} delta={:.12e} ratio={:.12} |ratio - root|={:.1e} in [{:.3}, {}]",
            c.delta,
            c.ratio,
            (c.ratio - closed).abs(),
            c.lower,
            c.upper
        );
    }

    let map = ScalingMap::new(4, 1.0);
    let opts = DeltaOptions {
        k: Some(1e3),
        ..DeltaOptions::default()
    };
    match solve_delta_epsilon(&m, &map, 0.1, &opts) {
        Ok(c) => println!("N=4 unexpectedly solved: {c:?}"),
        Err(e) => println!("N=4, A=1: {e}"),
    }
    Ok(())
}
