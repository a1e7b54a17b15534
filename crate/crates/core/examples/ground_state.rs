//! Ground states by shooting, compared against the 1D closed form and the
//! Nehari and Pohozaev identities.

use kirchhoff::profiles::ground_state;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let w = ground_state(1, 1.0, 4.0)?;
    let sup = w
        .radii
        .iter()
        .zip(&w.values)
        .map(|(r, v)| (v - 2f64.sqrt() / r.cosh()).abs())
        .fold(0.0, f64::max);
    println!("N=1 m=1 p=4: W(0) = {:.12}, A = {:.12} (4/3), sup |W - sqrt2 sech| = {sup:.2e}", w.peak(), w.gradient_norm_sq);

    println!("{:>2} {:>3} {:>3} {:>14} {:>14} {:>10} {:>10}", "N", "m", "p", "A", "mass", "nehari", "pohozaev");
    for dim in 1..=3 {
        for m in [1.0, 4.0] {
            for p in [3.0, 4.0] {
                let w = ground_state(dim, m, p)?;
                println!(
                    "{dim:>2} {m:>3} {p:>3} {:>14.8} {:>14.8} {:>10.2e} {:>10.2e}",
                    w.gradient_norm_sq,
                    w.mass,
                    w.nehari_residual(),
                    w.pohozaev_residual()
                );
            }
        }
    }
    Ok(())
}
