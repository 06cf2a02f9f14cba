//! `alhier`: lattice and hydro runs, verification suites and period tables.
//!
//! Exit status: 0 pass, 1 check failure, 2 config error, 3 runtime or numerical failure.

mod config;

use alhier::hydro::{self, HydroError, HydroField};
use alhier::lattice::{self, Boundary, LatticeState};
use alhier::mirror;
use alhier::report::SuiteReport;
use alhier::suite::{self, Scope};
use clap::{Parser, Subcommand, ValueEnum};
use config::RunConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "alhier", version, about = "Ablowitz-Ladik lattice, hydro limit, Frobenius and mirror checks")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Random points for the frobenius and mirror suites.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Print the embedded default configuration and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Discrete AL / 2D-Toda lattice.
    Lattice {
        #[command(subcommand)]
        action: LatticeAction,
    },
    /// Dispersionless system and the continuum comparison.
    Hydro {
        #[command(subcommand)]
        action: HydroAction,
    },
    /// Run invariant suites and write a JSON report.
    Verify {
        #[arg(value_enum)]
        scope: ScopeArg,
    },
    /// Twisted period table as CSV.
    Periods {
        /// Comma-separated exponents z.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Option<Vec<f64>>,
    },
}

#[derive(Subcommand, Debug)]
enum LatticeAction {
    /// Integrate a random initial state; writes a trajectory CSV and a conservation JSON.
    Evolve {
        /// periodic, window or semi-infinite.
        #[arg(long)]
        boundary: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t")]
        t_final: Option<f64>,
        /// al or ham:k:i.
        #[arg(long)]
        flow: Option<String>,
        #[arg(long)]
        amp: Option<f64>,
    },
    /// Lattice invariant suite.
    Verify {
        /// factorization, flows, conservation, semi_infinite or all.
        #[arg(long)]
        suite: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
enum HydroAction {
    /// Evolve the slow profile on a periodic grid; writes the final field CSV.
    Evolve {
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t")]
        t_final: Option<f64>,
        /// al or lax:k:n.
        #[arg(long)]
        flow: Option<String>,
        #[arg(long)]
        length: Option<f64>,
        #[arg(long)]
        v_amp: Option<f64>,
        #[arg(long)]
        w_mean: Option<f64>,
        #[arg(long)]
        w_amp: Option<f64>,
    },
    /// Lattice vs hydro sup error for each ε.
    Compare {
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ScopeArg {
    Lattice,
    Hydro,
    Frobenius,
    Mirror,
    All,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Lattice => Scope::Lattice,
            ScopeArg::Hydro => Scope::Hydro,
            ScopeArg::Frobenius => Scope::Frobenius,
            ScopeArg::Mirror => Scope::Mirror,
            ScopeArg::All => Scope::All,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Checks,
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Checks => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    Ok(cfg.out.clone())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Checks => {}
                Failure::Config(m) => eprintln!("config error: {m}"),
                Failure::Runtime(m) => eprintln!("runtime failure: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.print_defaults {
        println!("{}", serde_json::to_string_pretty(&RunConfig::default()).expect("defaults serialize"));
        return Ok(());
    }
    let mut cfg = match &cli.config {
        Some(p) => config::load(p).map_err(Failure::Config)?,
        None => RunConfig::default(),
    };
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.points {
        cfg.points = p;
    }
    let Some(command) = cli.command else {
        return Err(Failure::Config("no subcommand given; see --help".into()));
    };
    match command {
        Command::Lattice { action: LatticeAction::Evolve { boundary, n, dt, t_final, flow, amp } } => {
            let l = &mut cfg.lattice;
            set(&mut l.boundary, boundary);
            set(&mut l.n, n);
            set(&mut l.dt, dt);
            set(&mut l.t_final, t_final);
            set(&mut l.flow, flow);
            set(&mut l.amp, amp);
            cfg.validate().map_err(Failure::Config)?;
            lattice_evolve(&cfg)
        }
        Command::Lattice { action: LatticeAction::Verify { suite } } => {
            set(&mut cfg.lattice.suite, suite);
            cfg.validate().map_err(Failure::Config)?;
            let which = cfg.lattice_suite().map_err(Failure::Config)?;
            let mut report = suite::lattice_suite(cfg.seed, which);
            apply_tolerances(&cfg, std::slice::from_mut(&mut report));
            print_checks(std::slice::from_ref(&report));
            write_json(&out_dir(&cfg)?.join("lattice_verify.json"), &report)?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Checks)
            }
        }
        Command::Hydro { action: HydroAction::Evolve { grid, dt, t_final, flow, length, v_amp, w_mean, w_amp } } => {
            let h = &mut cfg.hydro;
            set(&mut h.grid, grid);
            set(&mut h.dt, dt);
            set(&mut h.t_final, t_final);
            set(&mut h.flow, flow);
            set(&mut h.profile.length, length);
            set(&mut h.profile.v_amp, v_amp);
            set(&mut h.profile.w_mean, w_mean);
            set(&mut h.profile.w_amp, w_amp);
            cfg.validate().map_err(Failure::Config)?;
            hydro_evolve(&cfg)
        }
        Command::Hydro { action: HydroAction::Compare { eps } } => {
            set(&mut cfg.hydro.epsilons, eps);
            cfg.validate().map_err(Failure::Config)?;
            let entries = hydro::continuum_sweep(&cfg.hydro.profile, &cfg.hydro.epsilons, &cfg.hydro.compare).map_err(|e| Failure::Runtime(e.to_string()))?;
            for e in &entries {
                println!("epsilon {} sup_error {:e} order {}", e.epsilon, e.sup_error, e.order_estimate.map_or("-".into(), |o| format!("{o:.3}")));
            }
            write_json(&out_dir(&cfg)?.join("hydro_compare.json"), &entries)
        }
        Command::Verify { scope } => {
            cfg.validate().map_err(Failure::Config)?;
            let scope = Scope::from(scope);
            let mut report = suite::verify(scope, cfg.seed, cfg.points);
            apply_tolerances(&cfg, &mut report.suites);
            report.pass = report.suites.iter().all(SuiteReport::passed);
            print_checks(&report.suites);
            let name = serde_json::to_value(scope).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            write_json(&out_dir(&cfg)?.join(format!("verify_{name}.json")), &report)?;
            if report.pass {
                Ok(())
            } else {
                Err(Failure::Checks)
            }
        }
        Command::Periods { z } => {
            set(&mut cfg.periods.z, z);
            cfg.validate().map_err(Failure::Config)?;
            let rows = mirror::period_table(&cfg.periods.z, &cfg.periods.points).map_err(|e| Failure::Runtime(e.to_string()))?;
            let path = out_dir(&cfg)?.join("periods.csv");
            let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
            for r in &rows {
                w.serialize(r).map_err(|e| io_err(&path, e))?;
            }
            w.flush().map_err(|e| io_err(&path, e))?;
            println!("{} rows -> {}", rows.len(), path.display());
            Ok(())
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_tolerances(cfg: &RunConfig, suites: &mut [SuiteReport]) {
    for (name, tol) in &cfg.tolerances {
        if !suites.iter_mut().any(|s| s.override_tolerance(name, *tol)) {
            eprintln!("note: tolerance override for {name} matches no check in this run");
        }
    }
}

fn print_checks(suites: &[SuiteReport]) {
    for s in suites {
        for c in &s.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            println!("{tag} {} residual {:e} tolerance {:e}", c.check_name, c.max_residual, c.tolerance);
        }
    }
}

#[derive(Serialize)]
struct HamiltonianDrift {
    k: u8,
    i: usize,
    initial: [f64; 2],
    last: [f64; 2],
    relative_drift: f64,
}

#[derive(Serialize)]
struct LatticeSidecar<'a> {
    seed: u64,
    boundary: &'a str,
    flow: &'a str,
    sites: usize,
    dt: f64,
    t_final: f64,
    steps: usize,
    rows: usize,
    hamiltonians: Vec<HamiltonianDrift>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn lattice_evolve(cfg: &RunConfig) -> Result<(), Failure> {
    let l = &cfg.lattice;
    let boundary = cfg.boundary().map_err(Failure::Config)?;
    let flow = cfg.lattice_flow().map_err(Failure::Config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s0 = LatticeState::random(&mut rng, l.n, l.amp, boundary);
    let monitor: Vec<(u8, usize)> = if boundary == Boundary::Periodic {
        (1..=2u8).flat_map(|k| (1..=l.monitor_i_max).map(move |i| (k, i))).filter(|&(k, i)| lattice::hamiltonian(k, i, &s0).is_ok()).collect()
    } else {
        Vec::new()
    };
    let dir = out_dir(cfg)?;
    let path = dir.join("lattice_trajectory.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    w.write_record(["time", "site", "re_x", "im_x", "re_y", "im_y"]).map_err(|e| io_err(&path, e))?;
    let mut rows = 0usize;
    let mut write_err: Option<csv::Error> = None;
    let steps = (l.t_final / l.dt).round() as usize;
    let result = lattice::integrate_with(&s0, flow, l.t_final, l.dt, &monitor, 10, |s| {
        if write_err.is_some() {
            return;
        }
        for i in 0..s.len() {
            let site = s.n_min + i as i64;
            let rec = [s.time.to_string(), site.to_string(), s.x[i].re.to_string(), s.x[i].im.to_string(), s.y[i].re.to_string(), s.y[i].im.to_string()];
            if let Err(e) = w.write_record(&rec) {
                write_err = Some(e);
                return;
            }
            rows += 1;
        }
    });
    w.flush().map_err(|e| io_err(&path, e))?;
    if let Some(e) = write_err {
        return Err(io_err(&path, e));
    }
    let mut sidecar = LatticeSidecar {
        seed: cfg.seed,
        boundary: &l.boundary,
        flow: &l.flow,
        sites: l.n,
        dt: l.dt,
        t_final: l.t_final,
        steps,
        rows,
        hamiltonians: Vec::new(),
        error: None,
    };
    let side = dir.join("lattice_conservation.json");
    match result {
        Ok(t) => {
            let drift = t.relative_drift();
            for (j, &(k, i)) in monitor.iter().enumerate() {
                let h = &t.conserved[j];
                let (a, b) = (h[0], h[h.len() - 1]);
                sidecar.hamiltonians.push(HamiltonianDrift { k, i, initial: [a.re, a.im], last: [b.re, b.im], relative_drift: drift[j] });
            }
            write_json(&side, &sidecar)?;
            println!("{rows} rows -> {}", path.display());
            Ok(())
        }
        Err(e) => {
            sidecar.error = Some(e.to_string());
            write_json(&side, &sidecar)?;
            Err(Failure::Runtime(e.to_string()))
        }
    }
}

#[derive(Serialize)]
struct HydroSidecar<'a> {
    flow: &'a str,
    grid: usize,
    t_final: f64,
    steps: usize,
    /// Relative drift of ∫t₁, ∫t₂ and ∫(1 − e^w)cosh v.
    drift: [f64; 3],
    /// max |(v, w)(t) − (v, w)(0)| over the grid.
    max_change: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn write_field(path: &Path, f: &HydroField) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["x", "re_v", "im_v", "re_w", "im_w"]).map_err(|e| io_err(path, e))?;
    for r in f.csv_rows() {
        w.write_record(r.iter().map(|x| x.to_string())).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn max_change(a: &HydroField, b: &HydroField) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(p, q)| {
            let ((v0, w0), (v1, w1)) = (p.vw_pair(), q.vw_pair());
            (v1 - v0).norm().max((w1 - w0).norm())
        })
        .fold(0.0, f64::max)
}

fn hydro_evolve(cfg: &RunConfig) -> Result<(), Failure> {
    let h = &cfg.hydro;
    let flow = cfg.hydro_flow().map_err(Failure::Config)?;
    let f0 = h.profile.field(h.grid).map_err(|e| Failure::Config(e.to_string()))?;
    let dir = out_dir(cfg)?;
    let csv_path = dir.join("hydro_field.csv");
    let side = dir.join("hydro_evolve.json");
    match hydro::pde_integrate(&f0, flow, h.t_final, h.dt) {
        Ok(run) => {
            write_field(&csv_path, &run.field)?;
            let sc = HydroSidecar { flow: &h.flow, grid: h.grid, t_final: h.t_final, steps: run.steps, drift: run.drift, max_change: max_change(&f0, &run.field), error: None };
            write_json(&side, &sc)?;
            println!("{} rows -> {}", run.field.len(), csv_path.display());
            Ok(())
        }
        Err(HydroError::GradientCatastrophe { time, gradient, last }) => {
            write_field(&csv_path, &last)?;
            let msg = format!("gradient catastrophe at t = {time}: max gradient {gradient:e}");
            let sc = HydroSidecar { flow: &h.flow, grid: h.grid, t_final: time, steps: 0, drift: [f64::NAN; 3], max_change: max_change(&f0, &last), error: Some(msg.clone()) };
            write_json(&side, &sc)?;
            Err(Failure::Runtime(msg))
        }
        Err(e) => Err(Failure::Runtime(e.to_string())),
    }
}
