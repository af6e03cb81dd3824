//! Logarithmic energy grids.

use crate::error::{Error, Result};

pub const DEFAULT_EMIN: f64 = 1e-5;
pub const DEFAULT_EMAX: f64 = 10.0;
pub const DEFAULT_POINTS_PER_DECADE: f64 = 25.0;

/// Log-spaced grid from `emin` to `emax` (both included) with about
/// `points_per_decade` points per decade. The point count is
/// `round(decades * points_per_decade) + 1`; `emin == emax` yields one point.
pub fn log_grid(emin: f64, emax: f64, points_per_decade: f64) -> Result<Vec<f64>> {
    if !(emin.is_finite() && emin > 0.0) {
        return Err(Error::InvalidGrid("emin must be finite and positive"));
    }
    if !(emax.is_finite() && emax >= emin) {
        return Err(Error::InvalidGrid("emax must be finite and not below emin"));
    }
    if !(points_per_decade.is_finite() && points_per_decade > 0.0) {
        return Err(Error::InvalidGrid("points per decade must be positive"));
    }
    if emin == emax {
        return Ok(vec![emin]);
    }
    let (lo, hi) = (emin.log10(), emax.log10());
    let intervals = (((hi - lo) * points_per_decade).round() as usize).max(1);
    let mut grid: Vec<f64> = (0..=intervals)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / intervals as f64))
        .collect();
    grid[0] = emin;
    grid[intervals] = emax;
    Ok(grid)
}

/// Grid with exactly `points` log-spaced values from `emin` to `emax`.
pub fn log_grid_points(emin: f64, emax: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidGrid("need at least two points"));
    }
    let decades = (emax / emin).log10();
    let ppd = if decades > 0.0 {
        (points - 1) as f64 / decades
    } else {
        1.0
    };
    let grid = log_grid(emin, emax, ppd)?;
    if grid.len() != points {
        return Err(Error::InvalidGrid("emin and emax must differ"));
    }
    Ok(grid)
}

pub fn default_grid() -> Vec<f64> {
    log_grid(DEFAULT_EMIN, DEFAULT_EMAX, DEFAULT_POINTS_PER_DECADE).expect("default grid is valid")
}
