//! Uniform grids for 1D and radially symmetric problems, with the
//! second-order Laplacian stencil and the matching discrete Dirichlet energy.

use serde::{Deserialize, Serialize};

/// Uniform grid on `[lo, hi]` with `points` nodes (endpoints included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl LineGrid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        assert!(hi > lo && points >= 3, "degenerate grid");
        Self { lo, hi, points }
    }

    /// Grid with spacing at most `h`, keeping the endpoints.
    pub fn with_spacing(lo: f64, hi: f64, h: f64) -> Self {
        let cells = ((hi - lo) / h).ceil() as usize;
        Self::new(lo, hi, cells.max(2) + 1)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.points - 1 {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    /// Same interval with the spacing halved.
    pub fn refined(&self) -> Self {
        Self::new(self.lo, self.hi, 2 * self.points - 1)
    }
}

/// Radial grid `r_j = j h`, `j = 0..points`, for radial functions in `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub dim: usize,
    pub step: f64,
    pub points: usize,
}

impl RadialGrid {
    pub fn new(dim: usize, step: f64, points: usize) -> Self {
        assert!(dim >= 1 && step > 0.0 && points >= 3);
        Self { dim, step, points }
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.step
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.node(j)).collect()
    }

    pub fn radius(&self) -> f64 {
        self.node(self.points - 1)
    }

    pub fn refined(&self) -> Self {
        Self::new(self.dim, 0.5 * self.step, 2 * self.points - 1)
    }
}

/// Surface measure of the unit sphere in `R^dim` (2 for `dim = 1`).
pub fn sphere_area(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            // 2 pi^{N/2} / Gamma(N/2) by the recursion |S^{N+1}| = 2 pi |S^{N-1}| / N
            let mut area = if dim % 2 == 0 { 2.0 * PI } else { 4.0 * PI };
            let mut n = if dim % 2 == 0 { 2 } else { 3 };
            while n < dim {
                area *= 2.0 * PI / n as f64;
                n += 2;
            }
            area
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grid {
    Line(LineGrid),
    Radial(RadialGrid),
}

impl Grid {
    pub fn dim(&self) -> usize {
        match self {
            Grid::Line(_) => 1,
            Grid::Radial(r) => r.dim,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Line(g) => g.points,
            Grid::Radial(g) => g.points,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self) -> f64 {
        match self {
            Grid::Line(g) => g.step(),
            Grid::Radial(g) => g.step,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        match self {
            Grid::Line(g) => g.nodes(),
            Grid::Radial(g) => g.nodes(),
        }
    }

    pub fn refined(&self) -> Self {
        match self {
            Grid::Line(g) => Grid::Line(g.refined()),
            Grid::Radial(g) => Grid::Radial(g.refined()),
        }
    }

    /// Indices of the unknowns in a Dirichlet problem: interior nodes on a
    /// line, everything but the outer radius on a radial grid.
    pub fn unknowns(&self) -> std::ops::Range<usize> {
        match self {
            Grid::Line(g) => 1..g.points - 1,
            Grid::Radial(g) => 0..g.points - 1,
        }
    }

    /// Row `i` of the second-order Laplacian as `(lower, diag, upper)`
    /// coefficients acting on `u[i-1], u[i], u[i+1]`. At `r = 0` the radial
    /// stencil uses the even ghost value `u[-1] = u[1]`, folded into `upper`.
    pub fn laplacian_row(&self, i: usize) -> (f64, f64, f64) {
        match self {
            Grid::Line(g) => {
                let h2 = g.step() * g.step();
                (1.0 / h2, -2.0 / h2, 1.0 / h2)
            }
            Grid::Radial(g) => {
                let h = g.step;
                let h2 = h * h;
                let n = g.dim as f64;
                if i == 0 {
                    (0.0, -2.0 * n / h2, 2.0 * n / h2)
                } else {
                    let r = g.node(i);
                    let c = (n - 1.0) / (2.0 * h * r);
                    (1.0 / h2 - c, -2.0 / h2, 1.0 / h2 + c)
                }
            }
        }
    }

    /// Second-order discrete Laplacian at node `i` (not valid at Dirichlet ends).
    pub fn laplacian_at(&self, u: &[f64], i: usize) -> f64 {
        let (lo, di, up) = self.laplacian_row(i);
        match self {
            Grid::Line(g) => {
                // first differences first: keeps round-off at the level of u' h
                let forward = u[i + 1] - u[i];
                let backward = u[i] - u[i - 1];
                (forward - backward) / (g.step() * g.step())
            }
            Grid::Radial(_) => {
                let left = if i == 0 { 0.0 } else { lo * u[i - 1] };
                left + di * u[i] + up * u[i + 1]
            }
        }
    }

    /// Discrete Dirichlet energy `int |grad u|^2` from first differences at
    /// cell midpoints; this is the energy whose variation gives the stencil.
    pub fn dirichlet_energy(&self, u: &[f64]) -> f64 {
        match self {
            Grid::Line(g) => {
                let h = g.step();
                u.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum::<f64>() / h
            }
            Grid::Radial(g) => {
                let h = g.step;
                let area = sphere_area(g.dim);
                let k = g.dim as i32 - 1;
                u.windows(2)
                    .enumerate()
                    .map(|(j, w)| {
                        let r = (j as f64 + 0.5) * h;
                        r.powi(k) * (w[1] - w[0]) * (w[1] - w[0])
                    })
                    .sum::<f64>()
                    * area
                    / h
            }
        }
    }

    /// Trapezoid weights including the radial volume element.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        match self {
            Grid::Line(g) => {
                let h = g.step();
                let mut w = vec![h; g.points];
                w[0] *= 0.5;
                w[g.points - 1] *= 0.5;
                w
            }
            Grid::Radial(g) => {
                let area = sphere_area(g.dim);
                let k = g.dim as i32 - 1;
                let mut w: Vec<f64> = (0..g.points).map(|j| area * g.node(j).powi(k) * g.step).collect();
                w[0] *= 0.5;
                w[g.points - 1] *= 0.5;
                w
            }
        }
    }

    /// `int f` for grid samples `f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.trapezoid_weights().iter().zip(f).map(|(w, v)| w * v).sum()
    }
}

/// Samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn dirichlet_energy(&self) -> f64 {
        self.grid.dirichlet_energy(&self.values)
    }

    /// Location of the maximum with three-point parabolic refinement.
    pub fn peak_location(&self) -> f64 {
        let i = crate::numerics::argmax(&self.values);
        crate::numerics::parabolic_peak(&self.grid.nodes(), &self.values, i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-15);
        // |S^4| = 8 pi^2 / 3, |S^3| = 2 pi^2
        assert!((sphere_area(4) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
        assert!((sphere_area(5) - 8.0 * std::f64::consts::PI.powi(2) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn radial_laplacian_of_quadratic_is_exact() {
        // Delta r^2 = 2N for every N, including the r = 0 ghost row
        for dim in 1..=3 {
            let g = Grid::Radial(RadialGrid::new(dim, 0.1, 20));
            let u: Vec<f64> = g.nodes().iter().map(|r| r * r).collect();
            for i in 0..19 {
                assert!((g.laplacian_at(&u, i) - 2.0 * dim as f64).abs() < 1e-9, "dim {dim} i {i}");
            }
        }
    }

    #[test]
    fn energy_summation_by_parts() {
        // sum u (-Delta_h u) w = discrete energy for Dirichlet data
        let g = Grid::Line(LineGrid::new(-1.0, 1.0, 41));
        let u: Vec<f64> = g.nodes().iter().map(|x| (1.0 - x * x) * (1.0 + 0.3 * x)).collect();
        let h = g.step();
        let lhs: f64 = (1..40).map(|i| -u[i] * g.laplacian_at(&u, i) * h).sum();
        assert!((lhs - g.dirichlet_energy(&u)).abs() < 1e-12);
    }
}
