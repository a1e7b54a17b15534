//! Roots of `G(t) = M(t^{N-2} A) - t^2`, including a case with two positive roots.

use kirchhoff::kirchhoff_map::{find_g_roots, KirchhoffFunction, RootScan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scan = RootScan::default();
    let r = find_g_roots(&KirchhoffFunction::affine(1.0, 1.0), 2.0, 3, (1e-3, 1e3), &scan)?;
    println!("M=1+t, A=2, N=3: roots {:?} (1+sqrt2 = {})", r.roots, 1.0 + 2f64.sqrt());

    let r = find_g_roots(&KirchhoffFunction::affine(0.05, 1.0), 1.0, 5, (1e-3, 1e3), &scan)?;
    println!("M=0.05+t, A=1, N=5: roots {:?}, C* = {}", r.roots, r.c_star);

    let r = find_g_roots(&KirchhoffFunction::constant(1.0), 4.0 / 3.0, 1, (1e-3, 1e3), &scan)?;
    println!("M=1, N=1: C* = {}", r.c_star);
    Ok(())
}
