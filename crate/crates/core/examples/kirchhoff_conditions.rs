//! Grid verdicts for the structural conditions on a few Kirchhoff functions.

use kirchhoff::kirchhoff_map::{default_condition_grid, verify_m_conditions, ConditionOptions, KirchhoffFunction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = default_condition_grid();
    let cases = [
        (KirchhoffFunction::affine(1.0, 1.0), 3),
        (KirchhoffFunction::affine(1.0, 1.0), 4),
        (KirchhoffFunction::power(1.0, 1.0, 2.0), 3),
        (KirchhoffFunction::constant(1.0), 3),
    ];
    for (m, dim) in cases {
        let r = verify_m_conditions(&m, dim, &grid, &ConditionOptions::default())?;
        let verdicts: Vec<String> = r.verdicts().iter().map(|(n, v)| format!("{n}:{:?}", v.verdict)).collect();
        println!("N={dim} {:<24} m0~{:.3e}  {}", m.label(), r.m0_candidate, verdicts.join(" "));
    }
    Ok(())
}
