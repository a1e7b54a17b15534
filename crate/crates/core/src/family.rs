//! Sources of the NLS family `omega_delta` feeding the correspondence: the
//! exactly rescaled ground state for constant `V`, and finite-difference
//! solves for a 1D potential.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, LineGrid, RadialGrid};
use crate::profiles::{interpolate_line, solve_nls_peak_1d, solve_nls_peak_on, GroundState, PeakOptions, PeakProfile1D};

pub type Potential1D = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `delta -> |grad omega_delta|_2^2` together with its limit constant `A`.
pub trait GradientMap: Send + Sync {
    fn dim(&self) -> usize;
    /// `A = lim |grad omega_delta|^2 / delta^{N-2}`.
    fn limit_constant(&self) -> f64;
    fn grad_norm_sq(&self, delta: f64) -> Result<f64>;
}

/// A gradient map that also produces the profiles themselves.
pub trait PeakFamily: GradientMap {
    fn power(&self) -> f64;
    /// Concentration point used for the initial guess (0 for radial families).
    fn center(&self) -> f64;
    fn default_grid(&self, delta: f64) -> Grid;
    fn profile_on(&self, delta: f64, grid: &Grid) -> Result<GridFunction>;
    fn potential_on(&self, grid: &Grid) -> Vec<f64>;

    fn profile(&self, delta: f64) -> Result<GridFunction> {
        self.profile_on(delta, &self.default_grid(delta))
    }
}

/// Pure scaling law `delta^{N-2} A`, for algebraic experiments with a synthetic `A`.
#[derive(Debug, Clone, Copy)]
pub struct ScalingMap {
    pub dim: usize,
    pub a: f64,
}

impl ScalingMap {
    pub fn new(dim: usize, a: f64) -> Self {
        Self { dim, a }
    }
}

impl GradientMap for ScalingMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn limit_constant(&self) -> f64 {
        self.a
    }

    fn grad_norm_sq(&self, delta: f64) -> Result<f64> {
        Ok(delta.powi(self.dim as i32 - 2) * self.a)
    }
}

/// `omega_delta(x) = W((x - c)/delta)` for `V == m`; exact in every dimension.
#[derive(Debug, Clone)]
pub struct ExactFamily {
    pub ground: GroundState,
    pub center: f64,
    pub cells_per_delta: f64,
    /// Half-width of the default grid in units of `delta`.
    pub half_width: f64,
}

impl ExactFamily {
    pub fn new(ground: GroundState) -> Self {
        let half_width = 30.0 / ground.m.sqrt();
        Self {
            ground,
            center: 0.0,
            cells_per_delta: 1000.0,
            half_width,
        }
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn with_resolution(mut self, cells_per_delta: f64) -> Self {
        self.cells_per_delta = cells_per_delta;
        self
    }
}

impl GradientMap for ExactFamily {
    fn dim(&self) -> usize {
        self.ground.dim
    }

    fn limit_constant(&self) -> f64 {
        self.ground.gradient_norm_sq
    }

    fn grad_norm_sq(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(delta.powi(self.ground.dim as i32 - 2) * self.ground.gradient_norm_sq)
    }
}

impl PeakFamily for ExactFamily {
    fn power(&self) -> f64 {
        self.ground.p
    }

    fn center(&self) -> f64 {
        self.center
    }

    fn default_grid(&self, delta: f64) -> Grid {
        let h = delta / self.cells_per_delta;
        let half = self.half_width * delta;
        if self.ground.dim == 1 {
            Grid::Line(LineGrid::with_spacing(self.center - half, self.center + half, h))
        } else {
            let cells = (half / h).ceil() as usize;
            Grid::Radial(RadialGrid::new(self.ground.dim, h, cells + 1))
        }
    }

    fn profile_on(&self, delta: f64, grid: &Grid) -> Result<GridFunction> {
        if grid.dim() != self.ground.dim {
            return Err(Error::InvalidParameter(format!(
                "grid dimension {} does not match family dimension {}",
                grid.dim(),
                self.ground.dim
            )));
        }
        let c = match grid {
            Grid::Line(_) => self.center,
            Grid::Radial(_) => 0.0,
        };
        Ok(GridFunction::from_fn(*grid, |x| self.ground.eval((x - c) / delta)))
    }

    fn potential_on(&self, grid: &Grid) -> Vec<f64> {
        vec![self.ground.m; grid.len()]
    }
}

struct Cache {
    last: Option<PeakProfile1D>,
    grads: HashMap<u64, f64>,
}

/// Finite-difference family for a 1D potential, with the most recent profile
/// kept as a warm start. Build a fresh family per sweep row: results depend
/// (at solver tolerance) on the order of requests.
pub struct NumericalFamily1D {
    v: Potential1D,
    p: f64,
    center: f64,
    opts: PeakOptions,
    limit: f64,
    cache: Mutex<Cache>,
}

impl NumericalFamily1D {
    pub fn new(v: Potential1D, p: f64, center: f64, opts: PeakOptions) -> Result<Self> {
        let m = v(center);
        let ground = crate::profiles::solve_ground_state_1d(m, p)?;
        Ok(Self {
            v,
            p,
            center,
            opts,
            limit: ground.gradient_norm_sq,
            cache: Mutex::new(Cache {
                last: None,
                grads: HashMap::new(),
            }),
        })
    }

    pub fn potential(&self) -> &Potential1D {
        &self.v
    }

    pub fn options(&self) -> &PeakOptions {
        &self.opts
    }

    /// Full peak profile at `delta` on the default grid.
    pub fn peak_profile(&self, delta: f64) -> Result<PeakProfile1D> {
        let mut cache = self.cache.lock().expect("family cache poisoned");
        if let Some(last) = &cache.last {
            if last.delta == delta {
                return Ok(last.clone());
            }
        }
        let v = |x: f64| (self.v)(x);
        let profile = match &cache.last {
            None => solve_nls_peak_1d(&v, self.p, delta, self.center, &self.opts),
            Some(prev) => {
                let grid = self.opts.grid(v(self.center), delta, self.center);
                let ratio = prev.delta / delta;
                let initial: Vec<f64> = grid
                    .nodes()
                    .iter()
                    .map(|x| interpolate_line(&prev.grid, &prev.values, prev.peak + (x - prev.peak) * ratio))
                    .collect();
                solve_nls_peak_on(&v, self.p, delta, grid, &initial, &self.opts.newton)
                    .or_else(|_| solve_nls_peak_1d(&v, self.p, delta, self.center, &self.opts))
            }
        }
        .map_err(|e| Error::at_delta(delta, e))?;
        cache.grads.insert(delta.to_bits(), profile.gradient_norm_sq);
        cache.last = Some(profile.clone());
        Ok(profile)
    }
}

impl GradientMap for NumericalFamily1D {
    fn dim(&self) -> usize {
        1
    }

    fn limit_constant(&self) -> f64 {
        self.limit
    }

    fn grad_norm_sq(&self, delta: f64) -> Result<f64> {
        if let Some(g) = self.cache.lock().expect("family cache poisoned").grads.get(&delta.to_bits()) {
            return Ok(*g);
        }
        Ok(self.peak_profile(delta)?.gradient_norm_sq)
    }
}

impl PeakFamily for NumericalFamily1D {
    fn power(&self) -> f64 {
        self.p
    }

    fn center(&self) -> f64 {
        self.center
    }

    fn default_grid(&self, delta: f64) -> Grid {
        Grid::Line(self.opts.grid((self.v)(self.center), delta, self.center))
    }

    fn profile_on(&self, delta: f64, grid: &Grid) -> Result<GridFunction> {
        if *grid == self.default_grid(delta) {
            return Ok(self.peak_profile(delta)?.grid_function());
        }
        let Grid::Line(line) = grid else {
            return Err(Error::UnsupportedDimension(grid.dim()));
        };
        let v = |x: f64| (self.v)(x);
        let ground = crate::profiles::solve_ground_state_1d(v(self.center), self.p)?;
        let initial: Vec<f64> = line.nodes().iter().map(|x| ground.eval((x - self.center) / delta)).collect();
        let profile = solve_nls_peak_on(&v, self.p, delta, *line, &initial, &self.opts.newton)
            .map_err(|e| Error::at_delta(delta, e))?;
        Ok(profile.grid_function())
    }

    fn potential_on(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes().into_iter().map(|x| (self.v)(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::solve_ground_state_1d;

    #[test]
    fn exact_family_scaling() {
        let fam = ExactFamily::new(solve_ground_state_1d(1.0, 4.0).unwrap());
        for d in [0.2, 0.1, 0.05] {
            let g = fam.grad_norm_sq(d).unwrap();
            assert!((g * d - 4.0 / 3.0).abs() < 1e-9);
        }
        let prof = fam.profile(0.1).unwrap();
        let discrete = prof.dirichlet_energy() * 0.1;
        assert!((discrete - 4.0 / 3.0).abs() < 1e-4, "{discrete}");
    }
}
