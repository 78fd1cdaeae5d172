//! Quick numerical checks on compact problems.

use gptunnel::{Grid, PacketSpec, Result, SimConfig};

use crate::checks::{
    compact_barrier, convergence_order, cross_scheme, filtering, free_oracle, norm_deviation, scaling,
};

pub struct Suite {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn suite(name: &'static str, outcome: Result<(bool, String)>) -> Suite {
    match outcome {
        Ok((pass, detail)) => Suite { name, pass, detail },
        Err(e) => Suite {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn small_measurement(k0: f64, width: f64, g0: f64) -> SimConfig {
    let mut cfg = SimConfig::tunneling(k0, 1.0, width, g0);
    cfg.grid = Grid::centered(0.15625, 4096).expect("power of two");
    cfg.packet = PacketSpec {
        x0: 100.0,
        dx0: 15.0,
        k0,
    };
    cfg.integrator.t_max = 400.0;
    cfg.integrator.snapshot_every = 50;
    cfg
}

pub fn run_suites() -> Vec<Suite> {
    let mut out = Vec::new();

    let mut cfg = compact_barrier(0.1, 30.0, 5.0, 5.0);
    // dx = 0.1 resolves kinetic energies that resonate with the default step
    cfg.integrator.dt = 0.005;
    cfg.integrator.t_max = 50.0;
    cfg.integrator.snapshot_every = 500;
    out.push(suite(
        "norm",
        norm_deviation(&cfg).map(|d| (d < 1e-8, format!("max |N-1| = {d:.2e}"))),
    ));

    let cfg = compact_barrier(0.1, 30.0, 5.0, 0.0);
    out.push(suite(
        "free",
        free_oracle(&cfg, 20.0).map(|f| {
            (
                f.l2 < 1e-6 && f.centroid_error < cfg.grid.dx() && f.width_error < 1e-3,
                format!(
                    "L2 {:.2e}, centroid {:.2e}, width {:.2e}",
                    f.l2, f.centroid_error, f.width_error
                ),
            )
        }),
    ));

    let mut cfg = compact_barrier(0.25, 60.0, 10.0, 5.0);
    cfg.integrator.t_max = 100.0;
    out.push(suite(
        "order",
        convergence_order(&cfg, &[0.04, 0.02, 0.01, 0.005], 3.125e-4)
            .map(|c| ((c.slope - 2.0).abs() < 0.1, format!("slope {:.3}", c.slope))),
    ));

    let mut cfg = compact_barrier(0.1, 30.0, 5.0, 5.0);
    cfg.integrator.dt = 0.005;
    cfg.integrator.t_max = 50.0;
    out.push(suite(
        "cross-scheme",
        cross_scheme(&cfg).map(|d| (d < 1e-4, format!("L2 {d:.2e}"))),
    ));

    out.push(suite(
        "scaling",
        scaling(&small_measurement(0.6, 6.0, 5.0), 2.0).map(|s| {
            (
                s.fraction_error < 1e-6 && s.delta_t_error < 5e-3,
                format!(
                    "T rel {:.2e}, delta_t rel {:.2e}",
                    s.fraction_error, s.delta_t_error
                ),
            )
        }),
    ));

    let cfg = small_measurement(0.8, 8.0, 0.0);
    out.push(suite(
        "filtering",
        filtering(&cfg, 250.0, 0.01).map(|f| {
            (
                f.worst < 0.05 && f.mean_k > cfg.packet.k0,
                format!(
                    "worst {:.2e} over {} points, mean k {:.4}",
                    f.worst, f.points, f.mean_k
                ),
            )
        }),
    ));
    out
}

pub fn cmd_selftest() -> i32 {
    let suites = run_suites();
    for s in &suites {
        println!(
            "{}: {} ({})",
            s.name,
            if s.pass { "PASS" } else { "FAIL" },
            s.detail
        );
    }
    if suites.iter().all(|s| s.pass) {
        0
    } else {
        1
    }
}
