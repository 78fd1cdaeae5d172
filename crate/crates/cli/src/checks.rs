//! Numerical checks shared by the self-test command and the acceptance
//! suite. Each returns the measured quantities; callers apply thresholds.

use gptunnel::observables::{
    full_spectrum, momentum_spectrum, plane_wave_transmission, region_centroid_width,
};
use gptunnel::propagator::{propagate_from, Flow, Observer, Snapshot};
use gptunnel::{
    free_reference, gaussian_packet, measure, reference_integrator, Grid, PacketSpec, Result, SimConfig,
    StepPlan, Stepper, TunnelingResult, WaveFunction,
};
use serde::Serialize;

/// Least-squares slope of `ys` against `xs`.
pub fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn evolve(config: &SimConfig, mut psi: WaveFunction, t: f64) -> Result<WaveFunction> {
    let mut stepper = Stepper::new(StepPlan::from_config(config)?);
    stepper.advance(&mut psi, config.steps_for(t))?;
    Ok(psi)
}

fn run(config: &SimConfig, t: f64) -> Result<WaveFunction> {
    let psi = gaussian_packet(&config.grid, &config.packet)?;
    evolve(config, psi, t)
}

/// Largest `|norm - 1|` over the snapshots of a full run to `t_max`.
pub fn norm_deviation(config: &SimConfig) -> Result<f64> {
    let initial = gaussian_packet(&config.grid, &config.packet)?;
    let (_, log) = propagate_from(config, initial, &mut [])?;
    Ok(log
        .snapshots
        .iter()
        .map(|s| (s.norm - 1.0).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FreeOracle {
    pub l2: f64,
    pub centroid_error: f64,
    /// Relative error of the half width against `dx0 sqrt(1 + t^2/dx0^4)`.
    pub width_error: f64,
}

/// Free propagation to `t` against the closed-form Gaussian.
pub fn free_oracle(config: &SimConfig, t: f64) -> Result<FreeOracle> {
    let cfg = config.free_reference();
    let psi = run(&cfg, t)?;
    let exact = free_reference(&cfg.packet, &cfg.grid, t)?;
    let p = &cfg.packet;
    let (c, rms) = region_centroid_width(&psi, cfg.grid.x_min() - 1.0, 0.0)?;
    // the density of the packet is a Gaussian with rms width dx(t)/sqrt(2)
    let half_width = rms * std::f64::consts::SQRT_2;
    let expected = p.dx0 * (1.0 + (t / (p.dx0 * p.dx0)).powi(2)).sqrt();
    Ok(FreeOracle {
        l2: psi.l2_distance(&exact),
        centroid_error: (c - (-p.x0 + p.k0 * t)).abs(),
        width_error: (half_width / expected - 1.0).abs(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceOrder {
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// L2 error at `t_max` against a run at `dt_ref`, for each step in `dts`,
/// and the log-log slope.
pub fn convergence_order(config: &SimConfig, dts: &[f64], dt_ref: f64) -> Result<ConvergenceOrder> {
    let t = config.integrator.t_max;
    let with_dt = |dt: f64| {
        let mut c = *config;
        c.integrator.dt = dt;
        run(&c, t)
    };
    let reference = with_dt(dt_ref)?;
    let errors = dts
        .iter()
        .map(|&dt| with_dt(dt).map(|psi| psi.l2_distance(&reference)))
        .collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    Ok(ConvergenceOrder {
        dts: dts.to_vec(),
        slope: lsq_slope(&lx, &ly),
        errors,
    })
}

/// L2 distance at `t_max` between the split-step and Crank-Nicolson runs.
pub fn cross_scheme(config: &SimConfig) -> Result<f64> {
    let a = run(config, config.integrator.t_max)?;
    let b = reference_integrator(config)?;
    Ok(a.l2_distance(&b))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Filtering {
    /// Worst `|measured/predicted - 1|` over the compared points.
    pub worst: f64,
    pub points: usize,
    pub mean_k: f64,
}

/// Transmitted spectrum at `t` against `|t(k)|^2 |psi_0(k)|^2`, on the points
/// where the prediction exceeds `floor` times its peak. Linear runs only.
pub fn filtering(config: &SimConfig, t: f64, floor: f64) -> Result<Filtering> {
    let v0 = config.barrier.v0;
    let width = config.barrier.width();
    let psi0 = gaussian_packet(&config.grid, &config.packet)?;
    let before = full_spectrum(&psi0);
    let psi = evolve(config, psi0, t)?;
    let after = momentum_spectrum(&psi, config.spectrum_cut())?;
    let predicted: Vec<f64> = before
        .k
        .iter()
        .zip(&before.density)
        .map(|(&k, d)| plane_wave_transmission(k, v0, width).norm_sqr() * d)
        .collect();
    let peak = predicted.iter().copied().fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let mut points = 0;
    for (p, a) in predicted.iter().zip(&after.density) {
        if *p > floor * peak {
            points += 1;
            worst = worst.max((a / p - 1.0).abs());
        }
    }
    Ok(Filtering {
        worst,
        points,
        mean_k: after.mean()?,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct Scaling {
    pub base: TunnelingResult,
    pub scaled: TunnelingResult,
    pub eta: f64,
    /// Relative difference of the transmitted fractions.
    pub fraction_error: f64,
    /// Relative difference of `delta_t` and `delta_t(scaled) / eta^2`.
    pub delta_t_error: f64,
}

/// Measures `config` and its `eta`-rescaled copy.
pub fn scaling(config: &SimConfig, eta: f64) -> Result<Scaling> {
    let base = measure(config)?;
    let scaled = measure(&config.scaled(eta)?)?;
    Ok(Scaling {
        base,
        scaled,
        eta,
        fraction_error: (scaled.transmitted_fraction / base.transmitted_fraction - 1.0).abs(),
        delta_t_error: (scaled.delta_t / (eta * eta) / base.delta_t - 1.0).abs(),
    })
}

/// Captures the field at the first snapshot at or after `at`.
#[derive(Debug, Clone)]
pub struct CaptureAt {
    pub at: f64,
    pub state: Option<WaveFunction>,
}

impl CaptureAt {
    pub fn new(at: f64) -> Self {
        CaptureAt { at, state: None }
    }

    /// Capture time that centres a window of length `window` on the
    /// incident packet's arrival at the barrier.
    pub fn arrival(config: &SimConfig, window: f64) -> Self {
        let p = &config.packet;
        let arrival = if p.k0 > 0.0 {
            (p.x0 - 0.5 * config.barrier.width()) / p.k0
        } else {
            0.0
        };
        CaptureAt::new((arrival - 0.5 * window).max(0.0))
    }
}

impl Observer for CaptureAt {
    fn observe(&mut self, state: &WaveFunction, snapshot: &Snapshot) -> Result<Flow> {
        if self.state.is_none() && snapshot.t >= self.at - 1e-9 {
            self.state = Some(state.clone());
        }
        Ok(Flow::Continue)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DtHalving {
    pub t_start: f64,
    pub window: f64,
    pub dt: f64,
    /// L2 distance after `window` between steps `dt` and `dt/2`.
    pub l2_delta: f64,
}

/// Advances `from` over `window` with `dt` and with `dt/2` and compares.
pub fn dt_halving(config: &SimConfig, from: &WaveFunction, window: f64) -> Result<DtHalving> {
    let dt = config.integrator.dt;
    let mut half = *config;
    half.integrator.dt = 0.5 * dt;
    let a = evolve(config, from.clone(), window)?;
    let b = evolve(&half, from.clone(), window)?;
    Ok(DtHalving {
        t_start: from.time,
        window,
        dt,
        l2_delta: a.l2_distance(&b),
    })
}

/// Compact barrier problem on a 2048-point grid used by the quick checks:
/// `V0 = 1, L = 6, k0 = 0.6`, packet at `-x0` with half width `dx0`.
pub fn compact_barrier(dx: f64, x0: f64, dx0: f64, g0: f64) -> SimConfig {
    let mut cfg = SimConfig::tunneling(0.6, 1.0, 6.0, g0);
    cfg.grid = Grid::centered(dx, 2048).expect("2048 is a power of two");
    cfg.packet = PacketSpec { x0, dx0, k0: 0.6 };
    cfg
}
