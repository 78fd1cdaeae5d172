//! Barrier and nonlinearity profiles, initial packets and the wave function
//! container.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Spatial profile `f(x)` shared by the barrier and the interaction strength.
/// Both shapes are centred on `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// `f = 1` on the open interval `(-L/2, L/2)`, zero elsewhere.
    Rectangular { width: f64 },
    /// `f = exp(-(2x/L)^(2 order))`.
    SuperGaussian { width: f64, order: u32 },
}

impl Shape {
    pub fn width(&self) -> f64 {
        match *self {
            Shape::Rectangular { width } | Shape::SuperGaussian { width, .. } => width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.width();
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::invalid("barrier.width", format!("{w} must be positive")));
        }
        if let Shape::SuperGaussian { order, .. } = *self {
            if order == 0 {
                return Err(Error::invalid("barrier.order", "must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Shape::Rectangular { width } => {
                if x.abs() < 0.5 * width {
                    1.0
                } else {
                    0.0
                }
            }
            Shape::SuperGaussian { width, order } => {
                let u = (2.0 * x / width).abs();
                (-u.powf(2.0 * order as f64)).exp()
            }
        }
    }

    /// Profile on the grid. The rectangular profile is averaged over each
    /// cell `[x - dx/2, x + dx/2]` so the sampled barrier has width exactly
    /// `L` whatever the grid alignment; smooth profiles are sampled
    /// pointwise.
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        match *self {
            Shape::Rectangular { width } => {
                let (half, h) = (0.5 * width, grid.dx());
                grid.xs()
                    .map(|x| {
                        let lo = (x - 0.5 * h).max(-half);
                        let hi = (x + 0.5 * h).min(half);
                        ((hi - lo) / h).clamp(0.0, 1.0)
                    })
                    .collect()
            }
            Shape::SuperGaussian { .. } => grid.xs().map(|x| self.eval(x)).collect(),
        }
    }

    pub fn scaled(&self, eta: f64) -> Shape {
        match *self {
            Shape::Rectangular { width } => Shape::Rectangular { width: width * eta },
            Shape::SuperGaussian { width, order } => Shape::SuperGaussian {
                width: width * eta,
                order,
            },
        }
    }
}

/// Free-function form of [`Shape::eval`].
pub fn profile_eval(shape: &Shape, x: f64) -> f64 {
    shape.eval(x)
}

/// Barrier `V(x) = v0 * f(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub v0: f64,
    #[serde(flatten)]
    pub shape: Shape,
}

impl PotentialSpec {
    pub fn rectangular(v0: f64, width: f64) -> Self {
        PotentialSpec {
            v0,
            shape: Shape::Rectangular { width },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.v0.is_finite() {
            return Err(Error::invalid("barrier.v0", "must be finite"));
        }
        self.shape.validate()
    }

    pub fn width(&self) -> f64 {
        self.shape.width()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.v0 * self.shape.eval(x)
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        self.shape.sample(grid).into_iter().map(|f| self.v0 * f).collect()
    }
}

/// Interaction strength `g(x) = g0 * f(x)`, gated by the barrier profile.
/// Positive `g0` is repulsive, negative attractive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearitySpec {
    pub g0: f64,
    pub shape: Shape,
}

impl NonlinearitySpec {
    pub fn gated(g0: f64, potential: &PotentialSpec) -> Self {
        NonlinearitySpec {
            g0,
            shape: potential.shape,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let f = self.shape.eval(x);
        if f == 0.0 {
            0.0
        } else {
            self.g0 * f
        }
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        self.shape
            .sample(grid)
            .into_iter()
            .map(|f| if f == 0.0 { 0.0 } else { self.g0 * f })
            .collect()
    }
}

/// Gaussian packet launched from `-x0` with half width `dx0` and mean
/// momentum `k0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub x0: f64,
    pub dx0: f64,
    pub k0: f64,
}

impl Default for PacketSpec {
    fn default() -> Self {
        PacketSpec {
            x0: 390.0,
            dx0: 50.0,
            k0: 0.6,
        }
    }
}

impl PacketSpec {
    pub fn new(x0: f64, dx0: f64, k0: f64) -> Result<Self> {
        let p = PacketSpec { x0, dx0, k0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x0 > 0.0) || !self.x0.is_finite() {
            return Err(Error::invalid(
                "packet.x0",
                format!("{} must be positive", self.x0),
            ));
        }
        if !(self.dx0 > 0.0) || !self.dx0.is_finite() {
            return Err(Error::invalid(
                "packet.dx0",
                format!("{} must be positive", self.dx0),
            ));
        }
        if !self.k0.is_finite() {
            return Err(Error::invalid("packet.k0", "must be finite"));
        }
        Ok(())
    }

    /// Relative density of the initial packet at the near barrier edge,
    /// `exp(-((x0 - L/2)/dx0)^2)`.
    pub fn barrier_overlap(&self, width: f64) -> f64 {
        let gap = self.x0 - 0.5 * width;
        if gap <= 0.0 {
            return 1.0;
        }
        (-(gap / self.dx0).powi(2)).exp()
    }

    /// Fails if the initial packet overlaps the barrier by `tol` or more.
    pub fn check_clear_of(&self, width: f64, tol: f64) -> Result<()> {
        let overlap = self.barrier_overlap(width);
        if overlap < tol {
            Ok(())
        } else {
            Err(Error::invalid(
                "packet.x0",
                format!(
                    "initial overlap with the barrier exp(-((x0-L/2)/dx0)^2) = {overlap:.3e} \
                     is not below {tol:.1e}"
                ),
            ))
        }
    }

    pub fn scaled(&self, eta: f64) -> PacketSpec {
        PacketSpec {
            x0: self.x0 * eta,
            dx0: self.dx0 * eta,
            k0: self.k0 / eta,
        }
    }

    /// Closed-form amplitude of the freely evolving packet at `(x, t)`.
    ///
    /// With `s = 1 + i t / dx0^2` the packet is
    /// `(sqrt(pi) dx0 s)^(-1/2) exp(-(x + x0 - k0 t)^2 / (2 dx0^2 s) + i k0 (x + x0) - i k0^2 t / 2)`.
    pub fn free_amplitude(&self, x: f64, t: f64) -> Complex64 {
        let s = Complex64::new(1.0, t / (self.dx0 * self.dx0));
        let norm = (PI.sqrt() * self.dx0).powf(-0.5);
        let u = x + self.x0 - self.k0 * t;
        let phase = Complex64::new(0.0, self.k0 * (x + self.x0) - 0.5 * self.k0 * self.k0 * t);
        let arg = -Complex64::new(u * u, 0.0) / (2.0 * self.dx0 * self.dx0 * s) + phase;
        norm * arg.exp() / s.sqrt()
    }
}

/// Complex field on a grid at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl WaveFunction {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.n() {
            return Err(Error::invalid(
                "amplitudes",
                format!(
                    "length {} does not match grid size {}",
                    amplitudes.len(),
                    grid.n()
                ),
            ));
        }
        Ok(WaveFunction {
            grid,
            amplitudes,
            time,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        WaveFunction {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.n()],
            time: 0.0,
        }
    }

    pub fn from_fn(grid: Grid, time: f64, f: impl Fn(f64) -> Complex64) -> Self {
        WaveFunction {
            grid,
            amplitudes: grid.xs().map(f).collect(),
            time,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Discrete norm `sum |psi_i|^2 dx`.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes
            .iter()
            .all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// Discrete L2 distance `sqrt(sum |a_i - b_i|^2 dx)`.
    pub fn l2_distance(&self, other: &WaveFunction) -> f64 {
        assert_eq!(self.grid.n(), other.grid.n(), "grid size mismatch");
        let s: f64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (s * self.grid.dx()).sqrt()
    }

    /// L2 distance between the densities `|psi|^2`.
    pub fn density_l2_distance(&self, other: &WaveFunction) -> f64 {
        assert_eq!(self.grid.n(), other.grid.n(), "grid size mismatch");
        let s: f64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).powi(2))
            .sum();
        (s * self.grid.dx()).sqrt()
    }

    pub fn conjugate(&mut self) {
        for a in &mut self.amplitudes {
            *a = a.conj();
        }
    }

    /// Density within `points` samples of either end of the grid.
    pub fn edge_density(&self, points: usize) -> f64 {
        let n = self.amplitudes.len();
        let points = points.min(n / 2);
        self.amplitudes[..points]
            .iter()
            .chain(&self.amplitudes[n - points..])
            .map(|a| a.norm_sqr())
            .fold(0.0, f64::max)
    }
}

/// Samples the normalized Gaussian packet on `grid` at `t = 0`.
///
/// Fails when the packet's tails at either grid edge are not below
/// `edge_tol` relative to its peak density.
pub fn gaussian_packet_with_tolerance(grid: &Grid, spec: &PacketSpec, edge_tol: f64) -> Result<WaveFunction> {
    spec.validate()?;
    let center = -spec.x0;
    if !grid.contains(center) {
        return Err(Error::invalid(
            "packet.x0",
            format!("centre {center} lies outside the grid"),
        ));
    }
    let gap = (center - grid.x_min()).min(grid.x_max() - center);
    let tail = (-(gap / spec.dx0).powi(2)).exp();
    if !(tail < edge_tol) {
        return Err(Error::invalid(
            "packet",
            format!("tail density {tail:.3e} at the grid edge is not below {edge_tol:.1e}"),
        ));
    }
    Ok(WaveFunction::from_fn(*grid, 0.0, |x| spec.free_amplitude(x, 0.0)))
}

pub fn gaussian_packet(grid: &Grid, spec: &PacketSpec) -> Result<WaveFunction> {
    gaussian_packet_with_tolerance(grid, spec, crate::config::Tolerances::default().packet_edge)
}
