use gptunnel::timing::measure_with_log;
use gptunnel::{measure, Error, Grid, PacketSpec, PotentialSpec, SimConfig};

fn small(k0: f64, v0: f64, g0: f64) -> SimConfig {
    let mut cfg = SimConfig::tunneling(k0, v0, 6.0, g0);
    cfg.grid = Grid::centered(0.15625, 4096).unwrap();
    cfg.packet = PacketSpec::new(100.0, 15.0, k0).unwrap();
    cfg.integrator.t_max = 400.0;
    cfg.integrator.snapshot_every = 50;
    cfg
}

#[test]
fn free_packet_has_no_delay() {
    // a vanishing barrier width turns the construction into pure free flight
    let mut cfg = small(0.6, 0.0, 0.0);
    cfg.barrier = PotentialSpec::rectangular(0.0, 1e-6);
    let r = measure(&cfg).unwrap();
    assert!(r.delta_t.abs() < 1.0, "{r:?}");
    assert!((r.k_bar - 0.6).abs() < 1e-6);
    assert!((r.transmitted_fraction - 1.0).abs() < 1e-6);
}

#[test]
fn barrier_run_emerges_and_is_stable() {
    let cfg = small(0.6, 1.0, 5.0);
    let (r, log) = measure_with_log(&cfg).unwrap();
    assert!(r.converged, "{r:?}");
    assert!(r.drift() < 0.01);
    assert!(r.t_t > 100.0 / 0.6 && r.t_t < cfg.integrator.t_max);
    assert!(r.k_bar > 0.6);
    // the run stops at the follow-up evaluation
    let last = log.last().unwrap().t;
    assert!(
        (last - (r.t_t + cfg.measurement.stability_offset)).abs() < 1e-6,
        "{last}"
    );
}

#[test]
fn stopping_before_transmission_settles_is_not_emerged() {
    let mut cfg = small(0.6, 1.0, 0.0);
    cfg.integrator.t_max = 180.0;
    assert!(matches!(measure(&cfg), Err(Error::NotEmerged { .. })));
    cfg.integrator.t_max = 10.0;
    assert!(matches!(measure(&cfg), Err(Error::NoTransmission { .. })));
}

#[test]
fn repulsive_barrier_shortens_tunneling_time() {
    let a = measure(&small(0.6, 1.0, 0.0)).unwrap();
    let b = measure(&small(0.6, 1.0, 50.0)).unwrap();
    assert!(b.delta_t < a.delta_t, "{a:?} {b:?}");
}

#[test]
fn launch_distance_enters_through_filtering_shift() {
    // With k_bar > k0 the construction retains -x0 (k_bar - k0)/(k0 k_bar),
    // so moving the start back by 50 shifts the result by that much.
    let near = SimConfig::tunneling(0.6, 1.0, 6.0, 0.0);
    let mut far = near;
    far.packet.x0 += 50.0;
    let a = measure(&near).unwrap();
    let b = measure(&far).unwrap();
    assert!(a.converged && b.converged);
    assert!((a.k_bar - b.k_bar).abs() < 1e-6);
    let k0 = near.packet.k0;
    let predicted = -50.0 * (a.k_bar - k0) / (k0 * a.k_bar);
    let shift = b.delta_t - a.delta_t;
    assert!((shift / predicted - 1.0).abs() < 0.02, "{shift} vs {predicted}");
}
