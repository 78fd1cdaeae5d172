//! Finite-difference Crank-Nicolson integrator, kept as an independent
//! check on the spectral propagator.
//!
//! The Laplacian uses the fourth-order compact (Numerov) stencil
//! `psi_xx ~ M^-1 delta^2 psi / h^2` with `M = (1, 10, 1)/12`, so each step
//! solves one tridiagonal system
//!
//! `(i M/dt + delta^2/(4h^2) - M W/2) psi' = (i M/dt - delta^2/(4h^2) + M W/2) psi`
//!
//! where `W = V + g (|psi|^2 + |psi'|^2)/2` is found by fixed-point
//! iteration. The end points are held at zero.

use num_complex::Complex64;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::model::WaveFunction;
use crate::propagator::initial_state;

const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_MAX_ITER: usize = 100;

pub struct CrankNicolson {
    h: f64,
    dt: f64,
    potential: Vec<f64>,
    nonlinearity: Vec<f64>,
    nonlinear: bool,
    max_iter: usize,
    // work arrays
    w: Vec<f64>,
    rhs: Vec<Complex64>,
    next: Vec<Complex64>,
    trial: Vec<Complex64>,
    c_prime: Vec<Complex64>,
    steps: u64,
}

impl CrankNicolson {
    pub fn new(config: &SimConfig) -> Self {
        let grid = config.grid;
        let potential = config.barrier.sample(&grid);
        let nonlinearity = config.nonlinearity_spec().sample(&grid);
        CrankNicolson::with_arrays(grid.dx(), config.integrator.dt, potential, nonlinearity)
    }

    pub fn with_arrays(h: f64, dt: f64, potential: Vec<f64>, nonlinearity: Vec<f64>) -> Self {
        let n = potential.len();
        let zero = Complex64::new(0.0, 0.0);
        let nonlinear = nonlinearity.iter().any(|&g| g != 0.0);
        CrankNicolson {
            h,
            dt,
            potential,
            nonlinearity,
            nonlinear,
            max_iter: FIXED_POINT_MAX_ITER,
            w: vec![0.0; n],
            rhs: vec![zero; n],
            next: vec![zero; n],
            trial: vec![zero; n],
            c_prime: vec![zero; n],
            steps: 0,
        }
    }

    /// Caps the fixed-point iterations per step.
    pub fn with_max_iterations(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    /// Off-diagonal and diagonal entries of the implicit operator at row `i`
    /// given the local `W` values.
    fn coefficients(&self, sign: f64, wl: f64, wc: f64, wr: f64) -> (Complex64, Complex64, Complex64) {
        let it = Complex64::new(0.0, 1.0 / (12.0 * self.dt));
        let lap = 1.0 / (4.0 * self.h * self.h);
        let lower = it + sign * (lap - wl / 24.0);
        let diag = it * 10.0 + sign * (-2.0 * lap - 10.0 * wc / 24.0);
        let upper = it + sign * (lap - wr / 24.0);
        (lower, diag, upper)
    }

    fn build_rhs(&mut self, psi: &[Complex64]) {
        let n = psi.len();
        self.rhs[0] = Complex64::new(0.0, 0.0);
        self.rhs[n - 1] = Complex64::new(0.0, 0.0);
        for i in 1..n - 1 {
            let (l, d, u) = self.coefficients(-1.0, self.w[i - 1], self.w[i], self.w[i + 1]);
            self.rhs[i] = l * psi[i - 1] + d * psi[i] + u * psi[i + 1];
        }
    }

    /// Thomas algorithm for the implicit side; result in `self.next`.
    fn solve(&mut self) {
        let n = self.rhs.len();
        let zero = Complex64::new(0.0, 0.0);
        // row 0 and row n-1 are identity rows (Dirichlet)
        self.c_prime[0] = zero;
        self.next[0] = zero;
        for i in 1..n - 1 {
            let (a, b, c) = self.coefficients(1.0, self.w[i - 1], self.w[i], self.w[i + 1]);
            let denom = b - a * self.c_prime[i - 1];
            self.c_prime[i] = c / denom;
            self.next[i] = (self.rhs[i] - a * self.next[i - 1]) / denom;
        }
        self.next[n - 1] = zero;
        for i in (1..n - 1).rev() {
            let nx = self.next[i + 1];
            self.next[i] -= self.c_prime[i] * nx;
        }
    }

    fn set_w(&mut self, psi: &[Complex64], trial: Option<&[Complex64]>) {
        for i in 0..psi.len() {
            let dens = match trial {
                Some(t) => 0.5 * (psi[i].norm_sqr() + t[i].norm_sqr()),
                None => psi[i].norm_sqr(),
            };
            self.w[i] = self.potential[i] + self.nonlinearity[i] * dens;
        }
    }

    pub fn step(&mut self, state: &mut WaveFunction) -> Result<()> {
        self.steps += 1;
        let psi = state.amplitudes.clone();
        self.set_w(&psi, None);
        self.build_rhs(&psi);
        self.solve();
        if self.nonlinear {
            let scale = psi.iter().map(|a| a.norm()).fold(0.0, f64::max).max(1e-300);
            let mut converged = false;
            let mut residual = f64::INFINITY;
            for _ in 0..self.max_iter {
                self.trial.copy_from_slice(&self.next);
                let trial = std::mem::take(&mut self.trial);
                self.set_w(&psi, Some(&trial));
                self.trial = trial;
                self.build_rhs(&psi);
                self.solve();
                residual = self
                    .next
                    .iter()
                    .zip(&self.trial)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
                    / scale;
                if residual < FIXED_POINT_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NoConvergence {
                    step: self.steps,
                    residual,
                });
            }
        }
        if self.next.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite { step: self.steps });
        }
        state.amplitudes.copy_from_slice(&self.next);
        state.time += self.dt;
        Ok(())
    }

    pub fn run(&mut self, state: &mut WaveFunction, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step(state)?;
        }
        Ok(())
    }
}

/// Integrates `config` from its Gaussian packet to `t_max` with
/// Crank-Nicolson. Intended for small grids.
pub fn reference_integrator(config: &SimConfig) -> Result<WaveFunction> {
    let mut psi = initial_state(config)?;
    let steps = config.steps_for(config.integrator.t_max);
    CrankNicolson::new(config).run(&mut psi, steps)?;
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::PacketSpec;
    use crate::propagator::free_reference;

    fn free_config(dt: f64) -> SimConfig {
        let mut cfg = SimConfig::tunneling(0.6, 0.0, 6.0, 0.0);
        cfg.grid = Grid::centered(0.125, 2048).unwrap();
        cfg.packet = PacketSpec::new(60.0, 6.0, 0.6).unwrap();
        cfg.integrator.dt = dt;
        cfg.integrator.t_max = 40.0;
        cfg
    }

    #[test]
    fn free_packet_matches_closed_form() {
        let cfg = free_config(0.01);
        let psi = reference_integrator(&cfg).unwrap();
        let exact = free_reference(&cfg.packet, &cfg.grid, 40.0).unwrap();
        let err = psi.l2_distance(&exact);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn second_order_in_time() {
        let cfg = free_config(0.2);
        let exact = free_reference(&cfg.packet, &cfg.grid, 40.0).unwrap();
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&dt| {
                reference_integrator(&free_config(dt))
                    .unwrap()
                    .l2_distance(&exact)
            })
            .collect();
        let p1 = (errs[0] / errs[1]).log2();
        let p2 = (errs[1] / errs[2]).log2();
        assert!(p1 >= 1.9 && p2 >= 1.9, "{errs:?} {p1} {p2}");
    }

    #[test]
    fn fixed_point_failure_is_reported() {
        let n = 64;
        let grid = Grid::centered(0.5, n).unwrap();
        let g = vec![5.0; n];
        let mut cn = CrankNicolson::with_arrays(0.5, 0.1, vec![0.0; n], g).with_max_iterations(2);
        let mut psi = WaveFunction::from_fn(grid, 0.0, |x| Complex64::new((-x * x / 4.0).exp(), 0.0));
        let r = cn.step(&mut psi);
        assert!(matches!(r, Err(Error::NoConvergence { step: 1, .. })), "{r:?}");
        assert_eq!(psi.time, 0.0);
    }
}
