//! Run configuration and the tolerance table.
//!
//! A [`SimConfig`] round-trips through TOML; every section and key is
//! optional and falls back to the defaults below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{NonlinearitySpec, PacketSpec, PotentialSpec, Shape};

/// Numerical thresholds shared across modules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest relative density of the initial packet allowed at either grid edge.
    pub packet_edge: f64,
    /// Largest relative density of the initial packet allowed at the barrier edge.
    pub barrier_overlap: f64,
    /// Density above which the boundary guard aborts a run.
    pub guard_density: f64,
    /// Number of samples at each grid edge watched by the guard.
    pub guard_points: usize,
    /// Region norm below which no transmitted packet is deemed present.
    pub region_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            packet_edge: 1e-12,
            barrier_overlap: 1e-12,
            guard_density: 1e-8,
            guard_points: 10,
            region_floor: 1e-20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorberSpec {
    /// Width of the ramp at each grid edge.
    pub width: f64,
}

impl Default for AbsorberSpec {
    fn default() -> Self {
        AbsorberSpec { width: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Steps between recorded snapshots.
    pub snapshot_every: u64,
    pub absorber: Option<AbsorberSpec>,
    /// Keep the full complex field with every snapshot.
    pub store_fields: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 0.02,
            t_max: 1300.0,
            snapshot_every: 250,
            absorber: None,
            store_fields: false,
        }
    }
}

/// Parameters of the transmitted-packet measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Region `x > x_cut_centroid` defines the transmitted centroid and fraction.
    pub x_cut_centroid: f64,
    /// Window for the transmitted spectrum; `None` means the barrier exit `L/2`.
    pub x_cut_spectrum: Option<f64>,
    /// Lag used by the plateau test on the transmitted fraction.
    pub plateau_window: f64,
    /// Relative change of the transmitted fraction over one window that
    /// counts as a plateau.
    pub plateau_tol: f64,
    /// Required clearance of the centroid past `L/2`, in transmitted widths.
    pub clearance_widths: f64,
    /// Delay after emergence at which the tunneling time is re-evaluated.
    pub stability_offset: f64,
    /// Relative change of the tunneling time tolerated at the re-evaluation.
    pub stability_tol: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        MeasurementConfig {
            x_cut_centroid: 0.0,
            x_cut_spectrum: None,
            plateau_window: 20.0,
            plateau_tol: 1e-6,
            clearance_widths: 2.0,
            stability_offset: 50.0,
            stability_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub g0: f64,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        NonlinearityConfig { g0: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub grid: Grid,
    pub packet: PacketSpec,
    pub barrier: PotentialSpec,
    pub nonlinearity: NonlinearityConfig,
    pub integrator: IntegratorConfig,
    pub measurement: MeasurementConfig,
    pub tolerances: Tolerances,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::rectangular(1.0, 6.0)
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            grid: Grid::default(),
            packet: PacketSpec::default(),
            barrier: PotentialSpec::default(),
            nonlinearity: NonlinearityConfig::default(),
            integrator: IntegratorConfig::default(),
            measurement: MeasurementConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl SimConfig {
    /// Rectangular barrier of height `v0` and width `width`, with the
    /// default grid, integrator and measurement settings.
    pub fn tunneling(k0: f64, v0: f64, width: f64, g0: f64) -> Self {
        SimConfig {
            packet: PacketSpec {
                k0,
                ..PacketSpec::default()
            },
            barrier: PotentialSpec::rectangular(v0, width),
            nonlinearity: NonlinearityConfig { g0 },
            ..SimConfig::default()
        }
    }

    /// Same packet with the barrier and nonlinearity switched off.
    pub fn free_reference(&self) -> Self {
        SimConfig {
            barrier: PotentialSpec {
                v0: 0.0,
                ..self.barrier
            },
            nonlinearity: NonlinearityConfig { g0: 0.0 },
            ..*self
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg = SimConfig::parse_toml(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validating, for callers that override fields first.
    pub fn parse_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("SimConfig serializes to TOML")
    }

    pub fn nonlinearity_spec(&self) -> NonlinearitySpec {
        NonlinearitySpec::gated(self.nonlinearity.g0, &self.barrier)
    }

    pub fn spectrum_cut(&self) -> f64 {
        self.measurement
            .x_cut_spectrum
            .unwrap_or(0.5 * self.barrier.width())
    }

    pub fn steps_for(&self, t: f64) -> u64 {
        (t / self.integrator.dt).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.barrier.validate()?;
        self.packet.validate()?;
        let it = &self.integrator;
        if !(it.dt > 0.0) || !it.dt.is_finite() {
            return Err(Error::invalid(
                "integrator.dt",
                format!("{} must be positive", it.dt),
            ));
        }
        if !(it.t_max > 0.0) || !it.t_max.is_finite() {
            return Err(Error::invalid(
                "integrator.t_max",
                format!("{} must be positive", it.t_max),
            ));
        }
        if it.snapshot_every == 0 {
            return Err(Error::invalid("integrator.snapshot_every", "must be >= 1"));
        }
        if let Some(a) = it.absorber {
            if !(a.width > 0.0) || 2.0 * a.width >= self.grid.length() {
                return Err(Error::invalid(
                    "integrator.absorber.width",
                    "must be positive and narrower than half the domain",
                ));
            }
        }
        if !self.nonlinearity.g0.is_finite() {
            return Err(Error::invalid("nonlinearity.g0", "must be finite"));
        }
        let m = &self.measurement;
        let cut = self.spectrum_cut();
        if !(m.x_cut_centroid >= 0.0 && m.x_cut_centroid <= cut) {
            return Err(Error::invalid(
                "measurement.x_cut_centroid",
                format!("need 0 <= x_cut_centroid <= x_cut_spectrum ({cut})"),
            ));
        }
        if !(m.plateau_window > 0.0) {
            return Err(Error::invalid("measurement.plateau_window", "must be positive"));
        }
        if !(m.plateau_tol > 0.0) {
            return Err(Error::invalid("measurement.plateau_tol", "must be positive"));
        }
        if !(m.stability_offset >= 0.0) {
            return Err(Error::invalid("measurement.stability_offset", "must be >= 0"));
        }
        if !self.grid.contains(cut) {
            return Err(Error::invalid("measurement.x_cut_spectrum", "outside the grid"));
        }
        self.packet
            .check_clear_of(self.barrier.width(), self.tolerances.barrier_overlap)?;

        if it.absorber.is_none() {
            // ballistic envelope of the packet over the whole run
            let p = &self.packet;
            let lo = -p.x0 - 10.0 * p.dx0;
            let far = -p.x0 + p.k0 * it.t_max;
            let hi = far.max(-p.x0) + 10.0 * p.dx0;
            let lo = lo.min(far - 10.0 * p.dx0);
            if lo < self.grid.x_min() || hi > self.grid.x_max() {
                return Err(Error::invalid(
                    "grid",
                    format!(
                        "domain [{}, {}) does not contain the packet envelope [{lo}, {hi}] \
                         up to t_max; enlarge the grid, shorten t_max or enable the absorber",
                        self.grid.x_min(),
                        self.grid.x_max()
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Configuration related by the scale invariance of the 1D equation:
    /// lengths grow by `eta`, times by `eta^2`, momenta and the barrier
    /// height shrink by `eta` and `eta^2`.
    ///
    /// Packets are always normalized to one, so the interaction strength is
    /// divided by `eta` to keep `g |psi|^2` on the same footing.
    pub fn scaled(&self, eta: f64) -> Result<Self> {
        let t2 = eta * eta;
        let shape: Shape = self.barrier.shape.scaled(eta);
        Ok(SimConfig {
            grid: self.grid.scaled(eta)?,
            packet: self.packet.scaled(eta),
            barrier: PotentialSpec {
                v0: self.barrier.v0 / t2,
                shape,
            },
            nonlinearity: NonlinearityConfig {
                g0: self.nonlinearity.g0 / eta,
            },
            integrator: IntegratorConfig {
                dt: self.integrator.dt * t2,
                t_max: self.integrator.t_max * t2,
                absorber: self
                    .integrator
                    .absorber
                    .map(|a| AbsorberSpec { width: a.width * eta }),
                ..self.integrator
            },
            measurement: MeasurementConfig {
                x_cut_centroid: self.measurement.x_cut_centroid * eta,
                x_cut_spectrum: self.measurement.x_cut_spectrum.map(|c| c * eta),
                plateau_window: self.measurement.plateau_window * t2,
                stability_offset: self.measurement.stability_offset * t2,
                ..self.measurement
            },
            tolerances: self.tolerances,
        })
    }
}
