//! Second-order split-operator integration of
//! `i psi_t = -psi_xx / 2 + V(x) psi + g(x) |psi|^2 psi` on a periodic grid.
//!
//! One step is a half kinetic step in Fourier space, a full potential and
//! nonlinear phase in position space using `|psi|^2` after the first half
//! step, and a second half kinetic step. Every factor has unit modulus, so
//! without an absorber the discrete norm is conserved to rounding.

use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{gaussian_packet_with_tolerance, PacketSpec, WaveFunction};
use crate::observables::{region_centroid_width, region_norm};

/// Precomputed operator arrays for one time step.
#[derive(Debug, Clone)]
pub struct StepPlan {
    grid: Grid,
    dt: f64,
    /// `exp(-i k^2 dt / 4)` in FFT order.
    pub half_kinetic: Vec<Complex64>,
    pub potential: Vec<f64>,
    pub nonlinearity: Vec<f64>,
    pub absorber: Option<Vec<f64>>,
    /// Indices where the potential or nonlinearity is nonzero.
    active: Vec<usize>,
}

impl StepPlan {
    pub fn new(
        grid: Grid,
        dt: f64,
        potential: Vec<f64>,
        nonlinearity: Vec<f64>,
        absorber: Option<Vec<f64>>,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        let n = grid.n();
        if potential.len() != n || nonlinearity.len() != n {
            return Err(Error::invalid("plan", "operator arrays must match the grid"));
        }
        if let Some(mask) = &absorber {
            if mask.len() != n || mask.iter().any(|m| !(0.0..=1.0).contains(m)) {
                return Err(Error::invalid(
                    "absorber",
                    "mask must match the grid and lie in [0, 1]",
                ));
            }
        }
        let half_kinetic = (0..n)
            .map(|j| {
                let k = grid.k(j);
                Complex64::from_polar(1.0, -k * k * dt / 4.0)
            })
            .collect();
        let active = (0..n)
            .filter(|&i| potential[i] != 0.0 || nonlinearity[i] != 0.0)
            .collect();
        Ok(StepPlan {
            grid,
            dt,
            half_kinetic,
            potential,
            nonlinearity,
            absorber,
            active,
        })
    }

    pub fn from_config(config: &SimConfig) -> Result<Self> {
        let grid = config.grid;
        let absorber = config.integrator.absorber.map(|a| absorber_mask(&grid, a.width));
        StepPlan::new(
            grid,
            config.integrator.dt,
            config.barrier.sample(&grid),
            config.nonlinearity_spec().sample(&grid),
            absorber,
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// Mask equal to one in the interior and falling to zero over `width` at
/// each edge as `cos(pi/2 * (width - d)/width)^(1/8)`, `d` the distance to
/// the edge.
pub fn absorber_mask(grid: &Grid, width: f64) -> Vec<f64> {
    grid.xs()
        .map(|x| {
            let d = (x - grid.x_min()).min(grid.x_max() - x);
            if d >= width {
                1.0
            } else {
                let c = (0.5 * std::f64::consts::PI * (width - d) / width).cos();
                c.max(0.0).powf(0.125)
            }
        })
        .collect()
}

/// Reusable stepping engine: a plan plus FFT workspaces.
pub struct Stepper {
    plan: StepPlan,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    /// Half and full kinetic factors with the 1/n of the inverse FFT folded in.
    half_scaled: Vec<Complex64>,
    full_scaled: Vec<Complex64>,
    steps_taken: u64,
}

impl Stepper {
    pub fn new(plan: StepPlan) -> Self {
        let n = plan.grid.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let inv_n = 1.0 / n as f64;
        let half_scaled = plan.half_kinetic.iter().map(|p| p * inv_n).collect();
        let full_scaled = plan.half_kinetic.iter().map(|p| p * p * inv_n).collect();
        Stepper {
            plan,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            half_scaled,
            full_scaled,
            steps_taken: 0,
        }
    }

    pub fn plan(&self) -> &StepPlan {
        &self.plan
    }

    fn kinetic(&mut self, psi: &mut [Complex64], full: bool) {
        self.forward.process_with_scratch(psi, &mut self.scratch);
        let factors = if full {
            &self.full_scaled
        } else {
            &self.half_scaled
        };
        for (a, f) in psi.iter_mut().zip(factors) {
            *a *= f;
        }
        self.inverse.process_with_scratch(psi, &mut self.scratch);
    }

    fn local_phase(&self, psi: &mut [Complex64]) {
        let dt = self.plan.dt;
        for &i in &self.plan.active {
            let a = psi[i];
            let w = self.plan.potential[i] + self.plan.nonlinearity[i] * a.norm_sqr();
            psi[i] = a * Complex64::from_polar(1.0, -w * dt);
        }
    }

    fn absorb(&self, psi: &mut [Complex64]) {
        if let Some(mask) = &self.plan.absorber {
            for (a, m) in psi.iter_mut().zip(mask) {
                *a *= m;
            }
        }
    }

    fn check(&self, state: &WaveFunction) -> Result<()> {
        if state.grid() != &self.plan.grid {
            return Err(Error::invalid("state", "grid does not match the step plan"));
        }
        Ok(())
    }

    /// One Strang step.
    pub fn step(&mut self, state: &mut WaveFunction) -> Result<()> {
        self.check(state)?;
        let psi = &mut state.amplitudes;
        self.kinetic(psi, false);
        self.local_phase(psi);
        self.kinetic(psi, false);
        self.absorb(psi);
        self.steps_taken += 1;
        state.time += self.plan.dt;
        if !state.is_finite() {
            return Err(Error::NonFinite {
                step: self.steps_taken,
            });
        }
        Ok(())
    }

    /// `steps` Strang steps with adjacent half kinetic steps fused, giving
    /// the same result as repeated [`Stepper::step`] up to rounding.
    pub fn advance(&mut self, state: &mut WaveFunction, steps: u64) -> Result<()> {
        self.check(state)?;
        if steps == 0 {
            return Ok(());
        }
        if self.plan.absorber.is_some() {
            // the mask sits between kinetic half steps, so nothing fuses
            for _ in 0..steps {
                self.step(state)?;
            }
            return Ok(());
        }
        let psi = &mut state.amplitudes;
        self.kinetic(psi, false);
        for s in 0..steps {
            self.local_phase(psi);
            self.kinetic(psi, s + 1 < steps);
        }
        self.steps_taken += steps;
        state.time += steps as f64 * self.plan.dt;
        if !state.is_finite() {
            return Err(Error::NonFinite {
                step: self.steps_taken,
            });
        }
        Ok(())
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }
}

/// One Strang step of `state` under `plan`.
pub fn split_step(state: &WaveFunction, plan: &StepPlan) -> Result<WaveFunction> {
    let mut out = state.clone();
    Stepper::new(plan.clone()).step(&mut out)?;
    Ok(out)
}

/// Closed-form free evolution of the Gaussian packet, sampled on `grid`.
pub fn free_reference(spec: &PacketSpec, grid: &Grid, t: f64) -> Result<WaveFunction> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "must be non-negative"));
    }
    Ok(WaveFunction::from_fn(*grid, t, |x| spec.free_amplitude(x, t)))
}

/// Reduced observables recorded at a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub t: f64,
    pub norm: f64,
    /// Norm in the centroid region `x > x_cut_centroid`.
    pub transmitted_fraction: f64,
    /// Centroid and width of the centroid region, when it holds any norm.
    pub centroid: Option<f64>,
    pub width: Option<f64>,
    pub field: Option<Vec<Complex64>>,
}

impl Snapshot {
    pub fn capture(state: &WaveFunction, step: u64, config: &SimConfig, keep_field: bool) -> Self {
        let cut = config.measurement.x_cut_centroid;
        let floor = config.tolerances.region_floor;
        let (centroid, width) = match region_centroid_width(state, cut, floor) {
            Ok((c, w)) => (Some(c), Some(w)),
            Err(_) => (None, None),
        };
        Snapshot {
            step,
            t: state.time,
            norm: state.norm(),
            transmitted_fraction: region_norm(state, cut),
            centroid,
            width,
            field: keep_field.then(|| state.amplitudes.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SnapshotLog {
    pub snapshots: Vec<Snapshot>,
}

fn fmt_value(v: f64) -> String {
    format!("{v:.11e}")
}

impl SnapshotLog {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    /// Snapshot whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    /// Columns `t, norm, centroid, transmitted_fraction`; a missing
    /// centroid is written as `nan`.
    pub fn write_csv<W: Write>(&self, mut out: W, config_hash: &str) -> io::Result<()> {
        writeln!(out, "# config_hash: {config_hash}")?;
        writeln!(out, "t,norm,centroid,transmitted_fraction")?;
        for s in &self.snapshots {
            writeln!(
                out,
                "{},{},{},{}",
                fmt_value(s.t),
                fmt_value(s.norm),
                s.centroid.map_or_else(|| "nan".to_string(), fmt_value),
                fmt_value(s.transmitted_fraction)
            )?;
        }
        Ok(())
    }
}

/// Decision returned by an observer after each snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

pub trait Observer {
    fn observe(&mut self, state: &WaveFunction, snapshot: &Snapshot) -> Result<Flow>;
}

impl<F> Observer for F
where
    F: FnMut(&WaveFunction, &Snapshot) -> Result<Flow>,
{
    fn observe(&mut self, state: &WaveFunction, snapshot: &Snapshot) -> Result<Flow> {
        self(state, snapshot)
    }
}

fn guard(state: &WaveFunction, config: &SimConfig) -> Result<()> {
    if config.integrator.absorber.is_some() {
        return Ok(());
    }
    let tol = &config.tolerances;
    let density = state.edge_density(tol.guard_points);
    if density > tol.guard_density {
        return Err(Error::BoundaryContamination {
            t: state.time,
            density,
            points: tol.guard_points,
            limit: tol.guard_density,
        });
    }
    Ok(())
}

/// Initial Gaussian packet for `config`.
pub fn initial_state(config: &SimConfig) -> Result<WaveFunction> {
    config.validate()?;
    gaussian_packet_with_tolerance(&config.grid, &config.packet, config.tolerances.packet_edge)
}

/// Integrates from `initial` until `t_max`, or until an observer stops the
/// run. Snapshots are taken at step 0, every `snapshot_every` steps and at
/// the final step; observers see each one in order.
pub fn propagate_from(
    config: &SimConfig,
    initial: WaveFunction,
    observers: &mut [&mut dyn Observer],
) -> Result<(WaveFunction, SnapshotLog)> {
    config.validate()?;
    propagate_unvalidated(config, initial, observers)
}

pub(crate) fn propagate_unvalidated(
    config: &SimConfig,
    initial: WaveFunction,
    observers: &mut [&mut dyn Observer],
) -> Result<(WaveFunction, SnapshotLog)> {
    let mut stepper = Stepper::new(StepPlan::from_config(config)?);
    let mut state = initial;
    let mut log = SnapshotLog::default();
    let total = config.steps_for(config.integrator.t_max);
    let every = config.integrator.snapshot_every;
    let keep = config.integrator.store_fields;
    let mut step = 0u64;
    loop {
        if !state.is_finite() {
            return Err(Error::NonFinite { step });
        }
        guard(&state, config)?;
        let snap = Snapshot::capture(&state, step, config, keep);
        let mut flow = Flow::Continue;
        for obs in observers.iter_mut() {
            if obs.observe(&state, &snap)? == Flow::Stop {
                flow = Flow::Stop;
            }
        }
        log.snapshots.push(snap);
        if flow == Flow::Stop || step >= total {
            break;
        }
        let n = every.min(total - step);
        stepper.advance(&mut state, n)?;
        step += n;
        // re-derive time from the step count so long runs do not drift
        state.time = step as f64 * config.integrator.dt + initial_time(&log);
    }
    Ok((state, log))
}

fn initial_time(log: &SnapshotLog) -> f64 {
    log.snapshots.first().map_or(0.0, |s| s.t)
}

/// [`propagate_from`] starting at the configured Gaussian packet.
pub fn propagate(
    config: &SimConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<(WaveFunction, SnapshotLog)> {
    let initial = initial_state(config)?;
    propagate_from(config, initial, observers)
}

/// Raw little-endian field dump: `n` as u64, then `dx`, `x_min`, `t` as f64,
/// then `n` (re, im) pairs of f64.
pub fn write_field_dump<W: Write>(mut out: W, state: &WaveFunction) -> io::Result<()> {
    let g = state.grid();
    out.write_all(&(g.n() as u64).to_le_bytes())?;
    out.write_all(&g.dx().to_le_bytes())?;
    out.write_all(&g.x_min().to_le_bytes())?;
    out.write_all(&state.time.to_le_bytes())?;
    for a in &state.amplitudes {
        out.write_all(&a.re.to_le_bytes())?;
        out.write_all(&a.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_dump<R: io::Read>(mut input: R) -> Result<WaveFunction> {
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input
            .read_exact(&mut word)
            .map_err(|e| Error::Parse(format!("field dump: {e}")))?;
        Ok(word)
    };
    let n = u64::from_le_bytes(next(&mut input)?) as usize;
    let dx = f64::from_le_bytes(next(&mut input)?);
    let x_min = f64::from_le_bytes(next(&mut input)?);
    let t = f64::from_le_bytes(next(&mut input)?);
    let grid = Grid::new(x_min, dx, n)?;
    let mut amps = Vec::with_capacity(n);
    for _ in 0..n {
        let re = f64::from_le_bytes(next(&mut input)?);
        let im = f64::from_le_bytes(next(&mut input)?);
        amps.push(Complex64::new(re, im));
    }
    WaveFunction::new(grid, amps, t)
}
