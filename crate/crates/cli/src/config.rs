//! Run configuration: one JSON document, embedded defaults, flag overrides on top.

use alhier::hydro::{CompareOptions, HydroFlow, SlowProfile};
use alhier::lattice::{Boundary, Flow};
use alhier::suite::LatticeSuite;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Random points for the frobenius and mirror suites.
    pub points: usize,
    pub out: PathBuf,
    pub lattice: LatticeConfig,
    pub hydro: HydroConfig,
    pub periods: PeriodsConfig,
    /// Per-check tolerance overrides keyed by check name.
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            points: 100,
            out: PathBuf::from("out"),
            lattice: LatticeConfig::default(),
            hydro: HydroConfig::default(),
            periods: PeriodsConfig::default(),
            tolerances: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    /// periodic, window or semi-infinite.
    pub boundary: String,
    pub n: usize,
    /// Edge sites excluded from window/semi-infinite evolution.
    pub buffer: usize,
    pub amp: f64,
    pub dt: f64,
    pub t_final: f64,
    /// `al` or `ham:k:i`.
    pub flow: String,
    /// Hamiltonians H⁽ᵏ⁾ᵢ, k = 1, 2, i ≤ this, recorded in the conservation sidecar.
    pub monitor_i_max: usize,
    pub suite: String,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            boundary: "periodic".into(),
            n: 64,
            buffer: 4,
            amp: 0.5,
            dt: 1e-3,
            t_final: 1.0,
            flow: "al".into(),
            monitor_i_max: 4,
            suite: "all".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroConfig {
    pub grid: usize,
    pub dt: f64,
    pub t_final: f64,
    /// `al` or `lax:k:n`.
    pub flow: String,
    pub profile: SlowProfile,
    pub epsilons: Vec<f64>,
    pub compare: CompareOptions,
}

impl Default for HydroConfig {
    fn default() -> Self {
        Self {
            grid: 256,
            dt: 1e-2,
            t_final: 0.25,
            flow: "al".into(),
            profile: SlowProfile::default(),
            epsilons: vec![0.1, 0.05],
            compare: CompareOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodsConfig {
    pub z: Vec<f64>,
    /// (v, w) with real v and w < 0.
    pub points: Vec<(f64, f64)>,
}

impl Default for PeriodsConfig {
    fn default() -> Self {
        Self {
            z: vec![-0.25, -0.5, -0.75],
            points: vec![(0.1, -0.5), (-0.3, -1.0), (0.2, -1.5), (0.0, -0.3), (-0.4, -2.0)],
        }
    }
}

pub fn load(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Parse errors carry the offending line.
pub fn parse(text: &str) -> Result<RunConfig, String> {
    serde_json::from_str(text).map_err(|e| {
        let line = text.lines().nth(e.line().saturating_sub(1)).unwrap_or("");
        format!("line {} column {}: {e}\n  | {line}", e.line(), e.column())
    })
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (k, v) in &self.tolerances {
            if !(*v > 0.0) {
                return Err(format!("tolerance for {k} must be > 0, got {v}"));
            }
        }
        let l = &self.lattice;
        if !(l.dt > 0.0) || !(l.t_final >= 0.0) {
            return Err(format!("lattice dt = {}, t_final = {}", l.dt, l.t_final));
        }
        if l.n < 2 {
            return Err(format!("lattice n = {} is below 2", l.n));
        }
        self.boundary()?;
        self.lattice_flow()?;
        self.lattice_suite()?;
        let h = &self.hydro;
        if !(h.dt > 0.0) || !(h.t_final >= 0.0) || h.grid < 8 {
            return Err(format!("hydro dt = {}, t_final = {}, grid = {}", h.dt, h.t_final, h.grid));
        }
        if h.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err("hydro epsilons must be > 0".into());
        }
        self.hydro_flow()?;
        if self.periods.points.iter().any(|(_, w)| !(*w < 0.0)) {
            return Err("period points need w < 0".into());
        }
        Ok(())
    }

    pub fn boundary(&self) -> Result<Boundary, String> {
        match self.lattice.boundary.as_str() {
            "periodic" => Ok(Boundary::Periodic),
            "window" => Ok(Boundary::Window { buffer: self.lattice.buffer }),
            "semi-infinite" | "semi_infinite" => Ok(Boundary::SemiInfinite),
            b => Err(format!("unknown boundary {b:?}; expected periodic, window or semi-infinite")),
        }
    }

    pub fn lattice_flow(&self) -> Result<Flow, String> {
        let f = &self.lattice.flow;
        if f == "al" {
            return Ok(Flow::Al);
        }
        match pair(f, "ham") {
            Some((k, i)) if (k == 1 || k == 2) && i >= 1 => Ok(Flow::Ham { k: k as u8, i }),
            _ => Err(format!("unknown lattice flow {f:?}; expected al or ham:k:i")),
        }
    }

    pub fn hydro_flow(&self) -> Result<HydroFlow, String> {
        let f = &self.hydro.flow;
        if f == "al" {
            return Ok(HydroFlow::Al);
        }
        match pair(f, "lax") {
            Some((k, n)) if (k == 1 || k == 2) && (1..=6).contains(&n) => Ok(HydroFlow::Lax { k: k as u8, n }),
            _ => Err(format!("unknown hydro flow {f:?}; expected al or lax:k:n with n ≤ 6")),
        }
    }

    pub fn lattice_suite(&self) -> Result<LatticeSuite, String> {
        self.lattice.suite.parse()
    }
}

fn pair(s: &str, head: &str) -> Option<(usize, usize)> {
    let mut it = s.split(':');
    if it.next()? != head {
        return None;
    }
    let a = it.next()?.parse().ok()?;
    let b = it.next()?.parse().ok()?;
    it.next().is_none().then_some((a, b))
}
