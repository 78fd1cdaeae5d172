//! Uniform periodic lattice and its conjugate momentum lattice.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic 1D lattice `x_i = x_min + i * dx`, `0 <= i < n`.
///
/// The momentum lattice is laid out in FFT order: `k_j = j * dk` for
/// `j < n/2` and `(j - n) * dk` otherwise, so it covers `[-pi/dx, pi/dx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    x_min: f64,
    dx: f64,
    n: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRepr {
    x_min: f64,
    dx: f64,
    n: usize,
}

impl TryFrom<GridRepr> for Grid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        Grid::new(r.x_min, r.dx, r.n)
    }
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> Self {
        GridRepr {
            x_min: g.x_min,
            dx: g.dx,
            n: g.n,
        }
    }
}

impl Default for Grid {
    /// 16384 points at spacing 0.15625, covering `[-1280, 1280)`.
    ///
    /// The largest kinetic energy on this grid, `k_max^2/2 ~ 202`, stays
    /// below the kick frequency `2 pi/dt` of the split-step scheme for any
    /// `dt < 0.031`. A finer grid at `dt = 0.02` lets a sharp barrier pump
    /// the packet into modes near `k_max` that run into the edges.
    fn default() -> Self {
        Grid {
            x_min: -1280.0,
            dx: 0.15625,
            n: 16384,
        }
    }
}

impl Grid {
    pub fn new(x_min: f64, dx: f64, n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::invalid(
                "grid.n",
                format!("{n} is not a power of two >= 2"),
            ));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::invalid("grid.dx", format!("{dx} must be positive")));
        }
        if !x_min.is_finite() {
            return Err(Error::invalid("grid.x_min", "must be finite"));
        }
        Ok(Grid { x_min, dx, n })
    }

    /// Grid of `n` points centred on the origin.
    pub fn centered(dx: f64, n: usize) -> Result<Self> {
        Grid::new(-0.5 * dx * n as f64, dx, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.dx * self.n as f64
    }

    /// One past the last sample; the domain is `[x_min, x_max)`.
    pub fn x_max(&self) -> f64 {
        self.x_min + self.length()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn xs(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length()
    }

    pub fn k_max(&self) -> f64 {
        PI / self.dx
    }

    /// Momentum of FFT bin `j`.
    pub fn k(&self, j: usize) -> f64 {
        let j = j as isize;
        let n = self.n as isize;
        let m = if j < n / 2 { j } else { j - n };
        m as f64 * self.dk()
    }

    pub fn ks(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.k(j)).collect()
    }

    /// Index of the first sample strictly greater than `x_cut`, clamped to
    /// `[0, n]`.
    pub fn first_above(&self, x_cut: f64) -> usize {
        if x_cut < self.x_min {
            return 0;
        }
        let i = ((x_cut - self.x_min) / self.dx).floor() as usize + 1;
        // floor() can land one off when x_cut sits on a sample
        let mut i = i.min(self.n);
        while i > 0 && self.x(i - 1) > x_cut {
            i -= 1;
        }
        while i < self.n && self.x(i) <= x_cut {
            i += 1;
        }
        i
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x < self.x_max()
    }

    /// The same lattice stretched by `eta` in position.
    pub fn scaled(&self, eta: f64) -> Result<Self> {
        Grid::new(self.x_min * eta, self.dx * eta, self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_domain() {
        let g = Grid::new(-1280.0, 0.15625, 16384).unwrap();
        assert_eq!(g.x_min(), -1280.0);
        assert_eq!(g.x_max(), 1280.0);
        assert_relative_eq!(g.k_max(), 20.106192982974676, epsilon = 1e-12);
        assert!(0.5 * g.k_max() * g.k_max() < 2.0 * PI / 0.02);
        assert_eq!(g, Grid::default());
    }

    #[test]
    fn momentum_spacing() {
        let g = Grid::new(-10.0, 1.25, 16).unwrap();
        assert_relative_eq!(g.dk(), 2.0 * PI / 20.0, epsilon = 1e-15);
        assert_relative_eq!(g.dk(), 0.3141592653589793, epsilon = 1e-15);
        let ks = g.ks();
        assert_eq!(ks[0], 0.0);
        assert_relative_eq!(ks[8], -g.k_max(), epsilon = 1e-12);
        assert!(ks.iter().all(|&k| k >= -g.k_max() - 1e-12 && k < g.k_max()));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(
            Grid::new(0.0, 0.1, 100),
            Err(Error::Invalid { ref field, .. }) if field == "grid.n"
        ));
        assert!(Grid::new(0.0, 0.1, 1).is_err());
        assert!(Grid::new(0.0, 0.0, 16).is_err());
        assert!(Grid::new(0.0, -1.0, 16).is_err());
    }

    #[test]
    fn first_above_cut() {
        let g = Grid::new(-4.0, 1.0, 8).unwrap();
        assert_eq!(g.first_above(0.0), 5);
        assert_eq!(g.first_above(-0.5), 4);
        assert_eq!(g.first_above(-100.0), 0);
        assert_eq!(g.first_above(100.0), 8);
        assert_eq!(g.first_above(3.0), 8);
    }
}
