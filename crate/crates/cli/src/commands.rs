use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use gptunnel::observables::{momentum_spectrum, region_centroid, region_norm};
use gptunnel::propagator::{initial_state, propagate_from, write_field_dump};
use gptunnel::timing::{write_result_row, RESULT_HEADER};
use gptunnel::{measure_observed, Error, Shape, SimConfig, Spectrum, TunnelingResult, WaveFunction};
use rayon::prelude::*;

use crate::checks::{dt_halving, lsq_slope, CaptureAt, DtHalving};
use crate::manifest::{Recorder, SelfTestEntry};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_NOT_EMERGED: i32 = 3;

pub const FIG2_K0: f64 = 1.2;
pub const FIG2_WIDTH: f64 = 12.0;
pub const FIG2_TIME: f64 = 440.0;
/// `(label, v0, g0)`; the first case has no barrier at all.
pub const FIG2_CASES: [(&str, f64, f64); 4] = [
    ("free", 0.0, 0.0),
    ("g-16", 1.0, -16.0),
    ("g0", 1.0, 0.0),
    ("g200", 1.0, 200.0),
];
pub const FIG3_K_RANGE: (f64, f64) = (0.0, 3.0);

pub const FIG4_K0: f64 = 0.6;
pub const FIG4_WIDTH: f64 = 6.0;
pub const FIG4_G0: [f64; 7] = [-2.0, 0.0, 2.0, 5.0, 10.0, 50.0, 200.0];
pub const FIG5_L: [f64; 5] = [4.0, 6.0, 8.0, 10.0, 12.0];
pub const FIG5_G0: [f64; 3] = [0.0, 5.0, -2.0];

/// Length of the window advanced with `dt` and `dt/2` by the self-test.
pub const SELF_TEST_WINDOW: f64 = 50.0;

pub const SWEEP_HEADER: &str =
    "g0,L,k0,v0,status,t_T,x_T,k_bar,delta_t,delta_t_later,transmitted_fraction,converged";

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invalid { .. } | Error::Parse(_) | Error::UnknownKind(_) => EXIT_CONFIG,
        Error::NotEmerged { .. } | Error::NoTransmission { .. } => EXIT_NOT_EMERGED,
        Error::NonFinite { .. }
        | Error::BoundaryContamination { .. }
        | Error::NoConvergence { .. }
        | Error::EmptySpectrum => EXIT_NUMERICAL,
    }
}

#[derive(Debug)]
pub enum Failure {
    Sim(Error),
    Io(io::Error),
    Usage(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Sim(e) => exit_code(e),
            Failure::Io(_) | Failure::Usage(_) => EXIT_CONFIG,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Sim(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
            Failure::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Sim(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub jobs: usize,
    pub dt: Option<f64>,
    pub dump_fields: bool,
    pub g0_list: Option<Vec<f64>>,
    pub l_list: Option<Vec<f64>>,
}

impl Options {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Options {
            config: None,
            out: out.into(),
            jobs: 1,
            dt: None,
            dump_fields: false,
            g0_list: None,
            l_list: None,
        }
    }

    /// The config file if given, else the defaults, with `--dt` applied.
    pub fn base_config(&self) -> Result<SimConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => SimConfig::parse_toml(&fs::read_to_string(path)?)?,
            None => SimConfig::default(),
        };
        if let Some(dt) = self.dt {
            cfg.integrator.dt = dt;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn pool(&self) -> Result<rayon::ThreadPool, Failure> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .map_err(|e| Failure::Usage(format!("cannot start worker pool: {e}")))
    }
}

/// `base` with barrier height `v0` and width `width`, keeping its shape kind.
pub fn with_barrier(base: &SimConfig, v0: f64, width: f64) -> SimConfig {
    let mut cfg = *base;
    cfg.barrier.v0 = v0;
    cfg.barrier.shape = match base.barrier.shape {
        Shape::Rectangular { .. } => Shape::Rectangular { width },
        Shape::SuperGaussian { order, .. } => Shape::SuperGaussian { width, order },
    };
    cfg
}

fn fmt_e(v: f64) -> String {
    format!("{v:.11e}")
}

fn conclude(rec: Recorder, outcome: Result<i32, Failure>) -> i32 {
    match outcome {
        Ok(code) => rec.finish(code, None),
        Err(f) => {
            eprintln!("gp-tunnel: {f}");
            rec.finish(f.exit_code(), Some(f.to_string()))
        }
    }
}

fn start(opts: &Options, command: &str) -> Option<Recorder> {
    match Recorder::new(&opts.out, command) {
        Ok(r) => Some(r),
        Err(e) => {
            eprintln!("gp-tunnel: cannot create {}: {e}", opts.out.display());
            None
        }
    }
}

fn write_hash_line<W: Write>(out: &mut W, hash: &str) -> io::Result<()> {
    writeln!(out, "# config_hash: {hash}")
}

/// One measurement with the arrival window captured for the step self-test.
struct Row {
    config: SimConfig,
    outcome: Result<TunnelingResult, Error>,
    self_test: Option<DtHalving>,
}

fn measure_row(config: SimConfig) -> Row {
    let mut capture = CaptureAt::arrival(&config, SELF_TEST_WINDOW);
    match measure_observed(&config, &mut [&mut capture]) {
        Ok(m) => Row {
            self_test: capture
                .state
                .as_ref()
                .and_then(|s| dt_halving(&config, s, SELF_TEST_WINDOW).ok()),
            config,
            outcome: Ok(m.result),
        },
        Err(e) => Row {
            config,
            outcome: Err(e),
            self_test: None,
        },
    }
}

fn run_rows(opts: &Options, configs: Vec<SimConfig>) -> Result<Vec<Row>, Failure> {
    let pool = opts.pool()?;
    Ok(pool.install(|| configs.into_par_iter().map(measure_row).collect()))
}

fn write_sweep<W: Write>(mut out: W, hash: &str, rows: &[Row]) -> io::Result<()> {
    write_hash_line(&mut out, hash)?;
    writeln!(out, "{SWEEP_HEADER}")?;
    for row in rows {
        let c = &row.config;
        let head = [c.nonlinearity.g0, c.barrier.width(), c.packet.k0, c.barrier.v0].map(fmt_e);
        let (status, values, converged) = match &row.outcome {
            Ok(r) => (
                "ok",
                [
                    r.t_t,
                    r.x_t,
                    r.k_bar,
                    r.delta_t,
                    r.delta_t_later,
                    r.transmitted_fraction,
                ]
                .map(fmt_e),
                r.converged.to_string(),
            ),
            Err(e) => (e.kind(), [(); 6].map(|_| "nan".to_string()), "false".to_string()),
        };
        writeln!(
            out,
            "{},{status},{},{converged}",
            head.join(","),
            values.join(",")
        )?;
    }
    out.flush()
}

/// Records the per-row self-tests and failures; returns the exit code of
/// the first failed row, or 0.
fn record_rows(rec: &mut Recorder, rows: &[Row]) -> i32 {
    let mut code = EXIT_OK;
    for row in rows {
        let label = format!(
            "g0={} L={}",
            row.config.nonlinearity.g0,
            row.config.barrier.width()
        );
        rec.manifest.self_test.push(SelfTestEntry {
            label: label.clone(),
            result: row.self_test,
        });
        if let Err(e) = &row.outcome {
            eprintln!("gp-tunnel: {label}: {e}");
            rec.note(&format!("failed {label}"), e);
            if code == EXIT_OK {
                code = exit_code(e);
            }
        }
    }
    code
}

/// Linear interpolation of the first sign change of `delta_t` along the rows.
pub fn sign_change(points: &[(f64, f64)]) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((g1, d1), (g2, d2)) = (w[0], w[1]);
        (d1.signum() != d2.signum() && d1 != d2).then(|| g1 - d1 * (g2 - g1) / (d2 - d1))
    })
}

pub fn cmd_run(opts: &Options) -> i32 {
    let Some(mut rec) = start(opts, "run") else {
        return EXIT_CONFIG;
    };
    let outcome = run_single(opts, &mut rec);
    conclude(rec, outcome)
}

fn run_single(opts: &Options, rec: &mut Recorder) -> Result<i32, Failure> {
    if opts.config.is_none() {
        return Err(Failure::Usage("run needs --config PATH".into()));
    }
    let config = opts.base_config()?;
    rec.set_config(&config, BTreeMap::new())?;
    let hash = rec.hash().to_string();

    let mut capture = CaptureAt::arrival(&config, SELF_TEST_WINDOW);
    let m = measure_observed(&config, &mut [&mut capture])?;

    m.log.write_csv(rec.create("snapshots.csv")?, &hash)?;
    momentum_spectrum(&m.emerged, config.spectrum_cut())?.write_csv(rec.create("spectrum.csv")?, &hash)?;
    let mut out = rec.create("result.csv")?;
    write_hash_line(&mut out, &hash)?;
    writeln!(out, "{RESULT_HEADER}")?;
    write_result_row(&mut out, &config, &m.result)?;
    out.flush()?;
    if opts.dump_fields {
        let mut out = rec.create("field_emerged.bin")?;
        write_field_dump(&mut out, &m.emerged)?;
        out.flush()?;
    }

    let check = match &capture.state {
        Some(s) => Some(dt_halving(&config, s, SELF_TEST_WINDOW)?),
        None => None,
    };
    rec.manifest.self_test.push(SelfTestEntry {
        label: "arrival".into(),
        result: check,
    });

    let r = &m.result;
    for (k, v) in [
        ("t_T", r.t_t),
        ("x_T", r.x_t),
        ("k_bar", r.k_bar),
        ("delta_t", r.delta_t),
        ("transmitted_fraction", r.transmitted_fraction),
    ] {
        rec.note(k, fmt_e(v));
    }
    rec.note("converged", r.converged);
    println!(
        "t_T={:.6} delta_t={:.6} k_bar={:.6} T={:.6e} converged={}",
        r.t_t, r.delta_t, r.k_bar, r.transmitted_fraction, r.converged
    );
    Ok(EXIT_OK)
}

pub fn cmd_fig4(opts: &Options) -> i32 {
    let Some(mut rec) = start(opts, "fig4") else {
        return EXIT_CONFIG;
    };
    let outcome = fig4(opts, &mut rec);
    conclude(rec, outcome)
}

fn fig4(opts: &Options, rec: &mut Recorder) -> Result<i32, Failure> {
    let mut base = with_barrier(&opts.base_config()?, 1.0, FIG4_WIDTH);
    base.packet.k0 = FIG4_K0;
    let g0s = opts.g0_list.clone().unwrap_or_else(|| FIG4_G0.to_vec());
    rec.set_config(&base, BTreeMap::from([("g0".to_string(), g0s.clone())]))?;

    let configs = g0s
        .iter()
        .map(|&g0| {
            let mut c = base;
            c.nonlinearity.g0 = g0;
            c
        })
        .collect();
    let rows = run_rows(opts, configs)?;
    write_sweep(rec.create("fig4.csv")?, rec.hash(), &rows)?;
    let code = record_rows(rec, &rows);

    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.outcome
                .as_ref()
                .ok()
                .map(|m| (r.config.nonlinearity.g0, m.delta_t))
        })
        .collect();
    for (g0, dt) in &points {
        println!("g0={g0:>8} delta_t={dt:.6}");
    }
    match sign_change(&points) {
        Some(g) => {
            println!("delta_t changes sign near g0 = {g:.3}");
            rec.note("sign_change_g0", fmt_e(g));
        }
        None => rec.note("sign_change_g0", "none"),
    }
    Ok(code)
}

pub fn cmd_fig5(opts: &Options) -> i32 {
    let Some(mut rec) = start(opts, "fig5") else {
        return EXIT_CONFIG;
    };
    let outcome = fig5(opts, &mut rec);
    conclude(rec, outcome)
}

fn fig5(opts: &Options, rec: &mut Recorder) -> Result<i32, Failure> {
    let mut base = opts.base_config()?;
    base.packet.k0 = FIG4_K0;
    let widths = opts.l_list.clone().unwrap_or_else(|| FIG5_L.to_vec());
    let g0s = opts.g0_list.clone().unwrap_or_else(|| FIG5_G0.to_vec());
    rec.set_config(
        &base,
        BTreeMap::from([("L".to_string(), widths.clone()), ("g0".to_string(), g0s.clone())]),
    )?;

    let mut configs = Vec::new();
    for &g0 in &g0s {
        for &w in &widths {
            let mut c = with_barrier(&base, 1.0, w);
            c.nonlinearity.g0 = g0;
            configs.push(c);
        }
    }
    let rows = run_rows(opts, configs)?;
    write_sweep(rec.create("fig5.csv")?, rec.hash(), &rows)?;
    let code = record_rows(rec, &rows);

    let mut out = rec.create("fig5_slopes.csv")?;
    write_hash_line(&mut out, rec.hash())?;
    writeln!(out, "g0,slope,points")?;
    for (&g0, chunk) in g0s.iter().zip(rows.chunks(widths.len())) {
        let (ls, dts): (Vec<f64>, Vec<f64>) = chunk
            .iter()
            .filter_map(|r| {
                r.outcome
                    .as_ref()
                    .ok()
                    .map(|m| (r.config.barrier.width(), m.delta_t))
            })
            .unzip();
        let slope = if ls.len() >= 2 {
            lsq_slope(&ls, &dts)
        } else {
            f64::NAN
        };
        writeln!(out, "{},{},{}", fmt_e(g0), fmt_e(slope), ls.len())?;
        println!("g0={g0:>6} d(delta_t)/dL={slope:.6} over {} widths", ls.len());
        rec.note(&format!("slope g0={g0}"), fmt_e(slope));
    }
    out.flush()?;
    Ok(code)
}

/// Final state of each comparison case, propagated to a fixed time.
struct Snap {
    label: &'static str,
    config: SimConfig,
    state: WaveFunction,
    self_test: Option<DtHalving>,
}

fn fixed_time_runs(opts: &Options, rec: &mut Recorder, command: &str) -> Result<Vec<Snap>, Failure> {
    let mut base = with_barrier(&opts.base_config()?, 1.0, FIG2_WIDTH);
    base.packet.k0 = FIG2_K0;
    base.integrator.t_max = FIG2_TIME;
    rec.set_config(
        &base,
        BTreeMap::from([(format!("{command}_g0"), FIG2_CASES.iter().map(|c| c.2).collect())]),
    )?;
    let configs: Vec<(&'static str, SimConfig)> = FIG2_CASES
        .iter()
        .map(|&(label, v0, g0)| {
            let mut c = base;
            c.barrier.v0 = v0;
            c.nonlinearity.g0 = g0;
            (label, c)
        })
        .collect();
    let pool = opts.pool()?;
    let snaps = pool.install(|| {
        configs
            .into_par_iter()
            .map(|(label, config)| -> Result<Snap, Error> {
                let mut capture = CaptureAt::arrival(&config, SELF_TEST_WINDOW);
                let (state, _) = propagate_from(&config, initial_state(&config)?, &mut [&mut capture])?;
                let self_test = match &capture.state {
                    Some(s) => Some(dt_halving(&config, s, SELF_TEST_WINDOW)?),
                    None => None,
                };
                Ok(Snap {
                    label,
                    config,
                    state,
                    self_test,
                })
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;
    for s in &snaps {
        rec.manifest.self_test.push(SelfTestEntry {
            label: s.label.to_string(),
            result: s.self_test,
        });
        if opts.dump_fields {
            let mut out = rec.create(&format!("field_{}.bin", s.label))?;
            write_field_dump(&mut out, &s.state)?;
            out.flush()?;
        }
    }
    Ok(snaps)
}

pub fn cmd_fig2(opts: &Options) -> i32 {
    let Some(mut rec) = start(opts, "fig2") else {
        return EXIT_CONFIG;
    };
    let outcome = fig2(opts, &mut rec);
    conclude(rec, outcome)
}

fn fig2(opts: &Options, rec: &mut Recorder) -> Result<i32, Failure> {
    let snaps = fixed_time_runs(opts, rec, "fig2")?;
    let cut = 0.5 * FIG2_WIDTH;
    let floor = snaps[0].config.tolerances.region_floor;
    let hash = rec.hash().to_string();

    let mut out = rec.create("fig2_centroids.csv")?;
    write_hash_line(&mut out, &hash)?;
    writeln!(out, "case,v0,g0,centroid,transmitted_fraction")?;
    for s in &snaps {
        let c = region_centroid(&s.state, cut, floor)?;
        let frac = region_norm(&s.state, cut);
        writeln!(
            out,
            "{},{},{},{},{}",
            s.label,
            fmt_e(s.config.barrier.v0),
            fmt_e(s.config.nonlinearity.g0),
            fmt_e(c),
            fmt_e(frac)
        )?;
        println!("{:>5}: centroid {c:.4} transmitted {frac:.4e}", s.label);
        rec.note(&format!("centroid {}", s.label), fmt_e(c));
    }
    out.flush()?;

    // transmitted profiles scaled to unit peak and to unit area
    let grid = *snaps[0].state.grid();
    let dens: Vec<Vec<f64>> = snaps.iter().map(|s| s.state.density()).collect();
    let idx: Vec<usize> = grid
        .xs()
        .enumerate()
        .filter(|(_, x)| *x > cut)
        .map(|(i, _)| i)
        .collect();
    let scales: Vec<(f64, f64)> = dens
        .iter()
        .map(|d| {
            let peak = idx.iter().map(|&i| d[i]).fold(0.0, f64::max);
            let area = idx.iter().map(|&i| d[i]).sum::<f64>() * grid.dx();
            (peak, area)
        })
        .collect();
    let mut out = rec.create("fig2_profiles.csv")?;
    write_hash_line(&mut out, &hash)?;
    let mut header = vec!["x".to_string()];
    for s in &snaps {
        header.push(format!("{}_peak", s.label));
        header.push(format!("{}_area", s.label));
    }
    writeln!(out, "{}", header.join(","))?;
    let xs: Vec<f64> = grid.xs().collect();
    for &i in &idx {
        let mut cols = vec![fmt_e(xs[i])];
        for (d, (peak, area)) in dens.iter().zip(&scales) {
            cols.push(fmt_e(if *peak > 0.0 { d[i] / peak } else { 0.0 }));
            cols.push(fmt_e(if *area > 0.0 { d[i] / area } else { 0.0 }));
        }
        writeln!(out, "{}", cols.join(","))?;
    }
    out.flush()?;
    Ok(EXIT_OK)
}

pub fn cmd_fig3(opts: &Options) -> i32 {
    let Some(mut rec) = start(opts, "fig3") else {
        return EXIT_CONFIG;
    };
    let outcome = fig3(opts, &mut rec);
    conclude(rec, outcome)
}

fn fig3(opts: &Options, rec: &mut Recorder) -> Result<i32, Failure> {
    let snaps = fixed_time_runs(opts, rec, "fig3")?;
    let hash = rec.hash().to_string();
    let barrier_cases: Vec<&Snap> = snaps.iter().filter(|s| s.config.barrier.v0 > 0.0).collect();
    let spectra = barrier_cases
        .iter()
        .map(|s| {
            let mut sp = momentum_spectrum(&s.state, 0.5 * FIG2_WIDTH)?;
            sp.normalize()?;
            Ok(sp)
        })
        .collect::<Result<Vec<Spectrum>, Error>>()?;

    let mut out = rec.create("fig3_moments.csv")?;
    write_hash_line(&mut out, &hash)?;
    writeln!(out, "case,g0,mean,variance,peak")?;
    for (s, sp) in barrier_cases.iter().zip(&spectra) {
        let (mean, var, peak) = (sp.mean()?, sp.variance()?, sp.peak()?);
        writeln!(
            out,
            "{},{},{},{},{}",
            s.label,
            fmt_e(s.config.nonlinearity.g0),
            fmt_e(mean),
            fmt_e(var),
            fmt_e(peak)
        )?;
        println!("{:>5}: mean {mean:.5} variance {var:.5e} peak {peak:.5}", s.label);
    }
    out.flush()?;

    let mut out = rec.create("fig3_spectra.csv")?;
    write_hash_line(&mut out, &hash)?;
    let labels: Vec<&str> = barrier_cases.iter().map(|s| s.label).collect();
    writeln!(out, "k,{}", labels.join(","))?;
    let (lo, hi) = FIG3_K_RANGE;
    let mut order: Vec<usize> = (0..spectra[0].k.len())
        .filter(|&i| (lo..=hi).contains(&spectra[0].k[i]))
        .collect();
    order.sort_by(|&a, &b| spectra[0].k[a].total_cmp(&spectra[0].k[b]));
    for i in order {
        let cols: Vec<String> = spectra.iter().map(|sp| fmt_e(sp.density[i])).collect();
        writeln!(out, "{},{}", fmt_e(spectra[0].k[i]), cols.join(","))?;
    }
    out.flush()?;
    Ok(EXIT_OK)
}
