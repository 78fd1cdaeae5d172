//! Time-of-flight tunneling time.
//!
//! A packet launched from `-x0` with momentum `k0` is followed until the
//! transmitted part has emerged past the barrier at `t_T`. The tunneling
//! time is the elapsed time minus the free flight to the near barrier edge
//! and the free flight from the far edge to the transmitted centroid:
//!
//! `dt = t_T - (x0 - L/2)/k0 - (x_T - L/2)/k_bar`
//!
//! where `k_bar` is the mean momentum of the transmitted spectrum.

use std::io::{self, Write};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::model::WaveFunction;
use crate::observables::{mean_transmitted_momentum, region_centroid, windowed_spectrum, Window};
use crate::propagator::{initial_state, propagate_unvalidated, Flow, Observer, Snapshot, SnapshotLog};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunnelingResult {
    pub t_t: f64,
    pub x_t: f64,
    pub k_bar: f64,
    pub delta_t: f64,
    pub transmitted_fraction: f64,
    /// Tunneling time re-evaluated `stability_offset` after `t_t`.
    pub delta_t_later: f64,
    pub converged: bool,
}

impl TunnelingResult {
    /// Relative change of the tunneling time between `t_t` and the later
    /// evaluation.
    pub fn drift(&self) -> f64 {
        ((self.delta_t_later - self.delta_t) / self.delta_t).abs()
    }
}

pub fn tunneling_time(t_t: f64, x0: f64, width: f64, k0: f64, x_t: f64, k_bar: f64) -> Result<f64> {
    if !(k0 > 0.0) {
        return Err(Error::invalid("k0", format!("{k0} must be positive")));
    }
    if !(k_bar > 0.0) {
        return Err(Error::invalid("k_bar", format!("{k_bar} must be positive")));
    }
    let half = 0.5 * width;
    Ok(t_t - (x0 - half) / k0 - (x_t - half) / k_bar)
}

/// Emergence test on a snapshot history.
///
/// The snapshot at index `i` qualifies when the transmitted fraction has
/// plateaued, `|T(t) - T(t - window)| / max(T(t), floor) < tol`, and the
/// transmitted centroid sits more than `clearance` transmitted widths past
/// the barrier exit.
#[derive(Debug, Clone, Copy)]
pub struct EmergenceRule {
    pub half_width: f64,
    pub window: f64,
    pub tol: f64,
    pub clearance: f64,
    pub floor: f64,
}

impl EmergenceRule {
    pub fn from_config(config: &SimConfig) -> Self {
        let m = &config.measurement;
        EmergenceRule {
            half_width: 0.5 * config.barrier.width(),
            window: m.plateau_window,
            tol: m.plateau_tol,
            clearance: m.clearance_widths,
            floor: config.tolerances.region_floor,
        }
    }

    pub fn emerged_at(&self, snaps: &[Snapshot], i: usize) -> bool {
        let cur = &snaps[i];
        if !(cur.transmitted_fraction > self.floor) {
            return false;
        }
        let (Some(c), Some(w)) = (cur.centroid, cur.width) else {
            return false;
        };
        if c <= self.half_width + self.clearance * w {
            return false;
        }
        let target = cur.t - self.window;
        // small slack for accumulated rounding in snapshot times
        let slack = 1e-9 * self.window.max(1.0);
        let Some(prev) = snaps[..i].iter().rev().find(|s| s.t <= target + slack) else {
            return false;
        };
        let rel = (cur.transmitted_fraction - prev.transmitted_fraction).abs()
            / cur.transmitted_fraction.max(self.floor);
        rel < self.tol
    }
}

/// Earliest snapshot time at which the transmitted packet has emerged.
pub fn detect_emergence(log: &SnapshotLog, config: &SimConfig) -> Result<f64> {
    let rule = EmergenceRule::from_config(config);
    let snaps = &log.snapshots;
    if let Some(i) = (0..snaps.len()).find(|&i| rule.emerged_at(snaps, i)) {
        return Ok(snaps[i].t);
    }
    match snaps.last() {
        Some(s) if s.transmitted_fraction > rule.floor => Err(Error::NotEmerged {
            t_max: config.integrator.t_max,
        }),
        Some(s) => Err(Error::NoTransmission {
            norm: s.transmitted_fraction,
            floor: rule.floor,
        }),
        None => Err(Error::NotEmerged {
            t_max: config.integrator.t_max,
        }),
    }
}

/// Centroid, mean transmitted momentum and tunneling time of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub t: f64,
    pub x_t: f64,
    pub k_bar: f64,
    pub delta_t: f64,
    pub transmitted_fraction: f64,
}

pub fn evaluate(state: &WaveFunction, config: &SimConfig, transmitted_fraction: f64) -> Result<Evaluation> {
    let floor = config.tolerances.region_floor;
    let x_t = region_centroid(state, config.measurement.x_cut_centroid, floor)?;
    let spec = windowed_spectrum(state, config.spectrum_cut(), Window::Sharp, floor)?;
    let k_bar = mean_transmitted_momentum(&spec)?;
    let p = &config.packet;
    let delta_t = tunneling_time(state.time, p.x0, config.barrier.width(), p.k0, x_t, k_bar)?;
    Ok(Evaluation {
        t: state.time,
        x_t,
        k_bar,
        delta_t,
        transmitted_fraction,
    })
}

/// Observer that stops the run once the packet has emerged and the
/// follow-up evaluation is done.
pub struct EmergenceDetector<'a> {
    config: &'a SimConfig,
    rule: EmergenceRule,
    history: Vec<Snapshot>,
    /// Detection is only allowed up to this time.
    deadline: f64,
    pub first: Option<Evaluation>,
    pub later: Option<Evaluation>,
    /// Field at the first evaluation.
    pub emerged: Option<WaveFunction>,
}

impl<'a> EmergenceDetector<'a> {
    pub fn new(config: &'a SimConfig) -> Self {
        EmergenceDetector {
            config,
            rule: EmergenceRule::from_config(config),
            history: Vec::new(),
            deadline: config.integrator.t_max,
            first: None,
            later: None,
            emerged: None,
        }
    }
}

impl Observer for EmergenceDetector<'_> {
    fn observe(&mut self, state: &WaveFunction, snapshot: &Snapshot) -> Result<Flow> {
        let mut s = snapshot.clone();
        s.field = None;
        self.history.push(s);
        let i = self.history.len() - 1;
        match self.first {
            None => {
                if snapshot.t <= self.deadline + 1e-9 && self.rule.emerged_at(&self.history, i) {
                    let ev = evaluate(state, self.config, snapshot.transmitted_fraction)?;
                    self.first = Some(ev);
                    self.emerged = Some(state.clone());
                    if self.config.measurement.stability_offset == 0.0 {
                        self.later = Some(ev);
                        return Ok(Flow::Stop);
                    }
                } else if snapshot.t > self.deadline + 1e-9 {
                    return Ok(Flow::Stop);
                }
                Ok(Flow::Continue)
            }
            Some(first) => {
                let target = first.t + self.config.measurement.stability_offset;
                if snapshot.t + 1e-9 >= target {
                    self.later = Some(evaluate(state, self.config, snapshot.transmitted_fraction)?);
                    Ok(Flow::Stop)
                } else {
                    Ok(Flow::Continue)
                }
            }
        }
    }
}

/// Full pipeline: propagate with the emergence stop rule, evaluate at
/// `t_T` and again `stability_offset` later.
pub fn measure(config: &SimConfig) -> Result<TunnelingResult> {
    measure_with_log(config).map(|(r, _)| r)
}

pub fn measure_with_log(config: &SimConfig) -> Result<(TunnelingResult, SnapshotLog)> {
    measure_observed(config, &mut []).map(|m| (m.result, m.log))
}

/// Outcome of [`measure_observed`].
#[derive(Debug, Clone)]
pub struct Measurement {
    pub result: TunnelingResult,
    pub log: SnapshotLog,
    /// Field at `t_T`.
    pub emerged: WaveFunction,
}

/// [`measure`] with extra observers riding along on the same run.
pub fn measure_observed(config: &SimConfig, extra: &mut [&mut dyn Observer]) -> Result<Measurement> {
    config.validate()?;
    // room for the follow-up evaluation past the detection deadline
    let mut run = *config;
    run.integrator.t_max = config.integrator.t_max + config.measurement.stability_offset;
    let mut detector = EmergenceDetector::new(config);
    // the extended run may leave the envelope validated for t_max; the
    // boundary guard still covers it
    let initial = initial_state(config)?;
    let mut chain = Chain {
        detector: &mut detector,
        extra,
    };
    let (_, log) = propagate_unvalidated(&run, initial, &mut [&mut chain])?;
    let (Some(first), Some(emerged)) = (detector.first, detector.emerged) else {
        let t_max = config.integrator.t_max;
        let mut trimmed = log.clone();
        trimmed.snapshots.retain(|s| s.t <= t_max + 1e-9);
        return Err(detect_emergence(&trimmed, config)
            .err()
            .unwrap_or(Error::NotEmerged { t_max }));
    };
    let later = detector.later.unwrap_or(first);
    let drift = ((later.delta_t - first.delta_t) / first.delta_t).abs();
    let result = TunnelingResult {
        t_t: first.t,
        x_t: first.x_t,
        k_bar: first.k_bar,
        delta_t: first.delta_t,
        transmitted_fraction: first.transmitted_fraction,
        delta_t_later: later.delta_t,
        converged: detector.later.is_some() && drift < config.measurement.stability_tol,
    };
    Ok(Measurement { result, log, emerged })
}

/// Detector followed by caller observers; either may stop the run.
struct Chain<'a, 'c, 'o> {
    detector: &'a mut EmergenceDetector<'c>,
    extra: &'a mut [&'o mut dyn Observer],
}

impl Observer for Chain<'_, '_, '_> {
    fn observe(&mut self, state: &WaveFunction, snapshot: &Snapshot) -> Result<Flow> {
        let mut flow = self.detector.observe(state, snapshot)?;
        for obs in self.extra.iter_mut() {
            if obs.observe(state, snapshot)? == Flow::Stop {
                flow = Flow::Stop;
            }
        }
        Ok(flow)
    }
}

/// CSV header for [`write_result_row`].
pub const RESULT_HEADER: &str = "g0,L,k0,v0,t_T,x_T,k_bar,delta_t,transmitted_fraction,converged";

pub fn write_result_row<W: Write>(mut out: W, config: &SimConfig, r: &TunnelingResult) -> io::Result<()> {
    let f = |v: f64| format!("{v:.11e}");
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{}",
        f(config.nonlinearity.g0),
        f(config.barrier.width()),
        f(config.packet.k0),
        f(config.barrier.v0),
        f(r.t_t),
        f(r.x_t),
        f(r.k_bar),
        f(r.delta_t),
        f(r.transmitted_fraction),
        r.converged
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::PacketSpec;

    #[test]
    fn formula_example() {
        let dt = tunneling_time(100.0, 60.0, 6.0, 0.6, 30.0, 0.8).unwrap();
        assert!((dt - -28.75).abs() < 1e-12, "{dt}");
    }

    #[test]
    fn free_flight_collapses_to_zero() {
        let (x0, k0, t) = (200.0, 0.6, 500.0);
        let dt = tunneling_time(t, x0, 0.0, k0, -x0 + k0 * t, k0).unwrap();
        assert!(dt.abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_momenta() {
        assert!(tunneling_time(1.0, 1.0, 1.0, 0.0, 5.0, 1.0).is_err());
        assert!(tunneling_time(1.0, 1.0, 1.0, 1.0, 5.0, -1.0).is_err());
    }

    fn snap(t: f64, frac: f64, c: f64, w: f64) -> Snapshot {
        Snapshot {
            step: 0,
            t,
            norm: 1.0,
            transmitted_fraction: frac,
            centroid: Some(c),
            width: Some(w),
            field: None,
        }
    }

    #[test]
    fn rule_needs_plateau_and_clearance() {
        let rule = EmergenceRule {
            half_width: 3.0,
            window: 20.0,
            tol: 1e-4,
            clearance: 2.0,
            floor: 1e-20,
        };
        let snaps = vec![
            snap(0.0, 1e-8, 10.0, 5.0),
            snap(10.0, 2e-8, 20.0, 5.0),
            snap(20.0, 2e-8, 20.0, 5.0),
            snap(30.0, 2e-8, 10.0, 5.0),
        ];
        assert!(!rule.emerged_at(&snaps, 1)); // no snapshot a window back
        assert!(!rule.emerged_at(&snaps, 2)); // still growing over the window
        assert!(!rule.emerged_at(&snaps, 3)); // plateau, but centroid too close
        let snaps = vec![snap(0.0, 2e-8, 30.0, 5.0), snap(20.0, 2e-8, 30.0, 5.0)];
        assert!(rule.emerged_at(&snaps, 1));
    }

    #[test]
    fn not_emerged_when_run_too_short() {
        let mut cfg = SimConfig::tunneling(0.6, 1.0, 6.0, 0.0);
        cfg.integrator.t_max = 10.0;
        cfg.integrator.snapshot_every = 50;
        assert!(matches!(measure(&cfg), Err(Error::NoTransmission { .. })));

        // a free packet that has crossed x = 0 but has not yet plateaued
        let mut cfg = SimConfig::tunneling(0.6, 0.0, 6.0, 0.0);
        cfg.grid = Grid::centered(0.25, 4096).unwrap();
        cfg.packet = PacketSpec::new(60.0, 10.0, 0.6).unwrap();
        cfg.integrator.t_max = 100.0;
        assert!(matches!(measure(&cfg), Err(Error::NotEmerged { .. })));
    }
}
