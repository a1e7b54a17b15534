//! Stable zeros of the concentration field `L_P` in one and two dimensions.

use kirchhoff::concentration::{
    check_admissible, find_stable_zeros, AdmissibleOptions, AdmissiblePotential, QuadratureOptions, ZeroSearch,
};
use kirchhoff::profiles::ground_state;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        ("1 + x^2", vec![0.0], vec![("2*x", 1.0, 2.0)]),
        ("1 + x^4", vec![0.0], vec![("4*x^3", 3.0, 4.0)]),
        ("1 + x1^2 + 2*x2^2", vec![0.0, 0.0], vec![("2*x1", 1.0, 2.0), ("4*x2", 1.0, 2.0)]),
    ];
    for (v, p, leading) in cases {
        let pot = AdmissiblePotential::from_expressions(v, p.clone(), &leading, 1.0)?;
        let report = check_admissible(&pot, &AdmissibleOptions::default());
        let w = ground_state(p.len(), pot.value_at_point(), 4.0)?;
        let bounds = vec![(-1.0, 1.0); p.len()];
        let zs = find_stable_zeros(&pot, &w, &bounds, &QuadratureOptions::default(), &ZeroSearch::default())?;
        println!("V = {v}: admissible = {}, #Z = {}", report.all_pass(), zs.count());
        for z in &zs.stable {
            println!("  y = {:?}  det = {:.10}", z.location, z.determinant);
        }
    }
    Ok(())
}
