//! Seeded Monte Carlo sweeps over the solver variants, plus the CSV and
//! config-file formats used by the command-line tool.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::channel::generate_scenario;
use crate::error::{Error, Result};
use crate::individual::{individual_solve, ris_max_min, MaxMinOptions};
use crate::penalty::{solve_with, Diagnostics, SolveOptions};
use crate::system::{db_to_linear, dbm_to_watts, linear_to_db, random_phases, watts_to_dbm, SystemConfig};

pub const CSV_HEADER: [&str; 8] =
    ["variant", "sweep_value", "realization", "power_dbm", "converged", "min_sinr_db", "outer_iters", "wall_ms"];
pub const TRACE_HEADER: [&str; 4] = ["outer_iter", "rho", "objective", "xi"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Values are SINR targets in dB.
    Sinr,
    /// Values are total RIS element counts; `f2 = F / f1`.
    Elements,
    /// Values are horizontal RIS positions in metres.
    Distance,
    /// Values are SINR targets in dB; meant to be used with a trace file.
    Convergence,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Sinr => "sinr",
            SweepKind::Elements => "elements",
            SweepKind::Distance => "distance",
            SweepKind::Convergence => "convergence",
        }
    }

    pub fn default_values(self, base: &SystemConfig) -> Vec<f64> {
        match self {
            SweepKind::Sinr => vec![0.0, 5.0, 10.0, 15.0, 20.0],
            SweepKind::Elements => vec![12.0, 24.0, 36.0, 48.0, 60.0],
            SweepKind::Distance => vec![10.0, 30.0, 50.0, 70.0, 90.0],
            SweepKind::Convergence => vec![linear_to_db(base.gamma[0])],
        }
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sinr" => Ok(SweepKind::Sinr),
            "elements" => Ok(SweepKind::Elements),
            "distance" => Ok(SweepKind::Distance),
            "convergence" => Ok(SweepKind::Convergence),
            other => Err(Error::InvalidConfig(format!("unknown sweep kind `{other}`"))),
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Joint penalty design of `W`, `V` and the RIS.
    PenaltyHybrid,
    /// Penalty design with one RF chain per antenna.
    PenaltyFullyDigital,
    /// Penalty design of `W`, `V` with the RIS fixed at random phases.
    RandomTheta,
    /// Penalty design of `W`, `V` with the RIS fixed at the max-min design.
    MaxminThetaJointWv,
    /// Sequential RIS / OMP / power-minimization design.
    Individual,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::PenaltyHybrid,
        Variant::PenaltyFullyDigital,
        Variant::RandomTheta,
        Variant::MaxminThetaJointWv,
        Variant::Individual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::PenaltyHybrid => "penalty_hybrid",
            Variant::PenaltyFullyDigital => "penalty_fully_digital",
            Variant::RandomTheta => "random_theta",
            Variant::MaxminThetaJointWv => "maxmin_theta_joint_wv",
            Variant::Individual => "individual",
        }
    }

    fn runs_penalty(self) -> bool {
        self != Variant::Individual
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant `{s}`")))
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parse a comma-separated list such as `penalty_hybrid,individual`.
pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<T>().map_err(|e| Error::InvalidConfig(format!("`{}`: {e}", s.trim()))))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub values: Vec<f64>,
    pub realizations: usize,
    pub variants: Vec<Variant>,
    pub seed: u64,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
    /// Fill `wall_ms`; otherwise it is written as 0 so reruns are byte-identical.
    pub record_timing: bool,
}

impl SweepSpec {
    pub fn new(kind: SweepKind, values: Vec<f64>, realizations: usize, variants: Vec<Variant>, seed: u64) -> Self {
        Self { kind, values, realizations, variants, seed, threads: 0, record_timing: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::InvalidConfig("realizations must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one value".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) || self.values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig("sweep values must be finite and sorted".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one variant".into()));
        }
        Ok(())
    }
}

/// Configuration of one sweep point.
pub fn point_config(base: &SystemConfig, kind: SweepKind, value: f64) -> Result<SystemConfig> {
    let cfg = match kind {
        SweepKind::Sinr | SweepKind::Convergence => base.clone().with_gamma_db(value),
        SweepKind::Elements => {
            let total = value.round();
            if (value - total).abs() > 1e-9 || total < 1.0 || total as usize % base.f1 != 0 {
                return Err(Error::InvalidConfig(format!("element count {value} is not a multiple of f1 = {}", base.f1)));
            }
            SystemConfig { f2: total as usize / base.f1, ..base.clone() }
        }
        SweepKind::Distance => SystemConfig { ris_distance: value, ..base.clone() },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Channel seed of a realization. Shared by every sweep point and variant so
/// all comparisons are paired.
pub fn channel_seed(seed: u64, realization: usize) -> u64 {
    splitmix(splitmix(seed) ^ realization as u64)
}

/// Seed for solver initialization at one (sweep point, realization).
pub fn init_seed(seed: u64, sweep_index: usize, realization: usize) -> u64 {
    splitmix(channel_seed(seed, realization) ^ splitmix(sweep_index as u64 ^ 0x5eed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub variant: Variant,
    pub sweep_value: f64,
    pub realization: usize,
    pub power_dbm: f64,
    pub converged: bool,
    pub min_sinr_db: f64,
    pub outer_iters: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    /// Ordered by (sweep index, realization, variant order as given).
    pub rows: Vec<ResultRow>,
    /// Trace of the first penalty-type run in row order, if any.
    pub trace: Option<Diagnostics>,
}

struct RunResult {
    power_dbm: f64,
    converged: bool,
    min_sinr_db: f64,
    outer_iters: usize,
    diagnostics: Option<Diagnostics>,
}

impl RunResult {
    fn failed() -> Self {
        Self { power_dbm: f64::NAN, converged: false, min_sinr_db: f64::NAN, outer_iters: 0, diagnostics: None }
    }
}

fn min_db(sinr: &[f64]) -> f64 {
    sinr.iter().map(|s| linear_to_db(*s)).fold(f64::INFINITY, f64::min)
}

fn run_variant(variant: Variant, cfg: &SystemConfig, channel_seed: u64, init: u64) -> Result<RunResult> {
    let channels = generate_scenario(cfg, channel_seed)?;
    if variant == Variant::Individual {
        let opts = MaxMinOptions { seed: init, ..MaxMinOptions::default() };
        let out = individual_solve(cfg, &channels, &opts)?;
        let sinr = crate::system::sinr_all(&out.solution, &channels);
        return Ok(RunResult {
            power_dbm: watts_to_dbm(out.solution.transmit_power()),
            converged: true,
            min_sinr_db: min_db(&sinr),
            outer_iters: 0,
            diagnostics: None,
        });
    }
    let (cfg, opts) = match variant {
        Variant::PenaltyHybrid => (cfg.clone(), SolveOptions::default()),
        Variant::PenaltyFullyDigital => (cfg.fully_digital(), SolveOptions::default()),
        Variant::RandomTheta => {
            let mut rng = ChaCha8Rng::seed_from_u64(init ^ 0x7a11_d0e5);
            let ris = random_phases(cfg.f(), &mut rng);
            (cfg.clone(), SolveOptions { optimize_ris: false, initial_ris: Some(ris), ..SolveOptions::default() })
        }
        Variant::MaxminThetaJointWv => {
            let ris = ris_max_min(&channels, &MaxMinOptions { seed: init, ..MaxMinOptions::default() })?;
            (cfg.clone(), SolveOptions { optimize_ris: false, initial_ris: Some(ris), ..SolveOptions::default() })
        }
        Variant::Individual => unreachable!(),
    };
    let out = solve_with(&cfg, &channels, init, &opts)?;
    Ok(RunResult {
        power_dbm: watts_to_dbm(out.solution.transmit_power()),
        converged: out.converged,
        min_sinr_db: min_db(&out.sinr),
        outer_iters: out.state.outer_iters,
        diagnostics: Some(out.diagnostics),
    })
}

/// Run every (sweep point, realization, variant) combination.
///
/// Per-row failures (rank-deficient or infeasible draws, solver errors) give
/// non-converged rows with NaN power instead of aborting the sweep.
pub fn run_sweep(spec: &SweepSpec, base: &SystemConfig) -> Result<SweepOutput> {
    spec.validate()?;
    base.validate()?;
    let configs = spec.values.iter().map(|&v| point_config(base, spec.kind, v)).collect::<Result<Vec<_>>>()?;

    let mut items = Vec::with_capacity(configs.len() * spec.realizations * spec.variants.len());
    for s in 0..configs.len() {
        for r in 0..spec.realizations {
            for &variant in &spec.variants {
                items.push((s, r, variant));
            }
        }
    }

    let work = || -> Vec<(ResultRow, Option<Diagnostics>)> {
        items
            .par_iter()
            .map(|&(s, r, variant)| {
                let start = Instant::now();
                let run = run_variant(variant, &configs[s], channel_seed(spec.seed, r), init_seed(spec.seed, s, r))
                    .unwrap_or_else(|_| RunResult::failed());
                let wall_ms = if spec.record_timing { start.elapsed().as_millis() as u64 } else { 0 };
                let row = ResultRow {
                    variant,
                    sweep_value: spec.values[s],
                    realization: r,
                    power_dbm: run.power_dbm,
                    converged: run.converged,
                    min_sinr_db: run.min_sinr_db,
                    outer_iters: run.outer_iters,
                    wall_ms,
                };
                (row, run.diagnostics)
            })
            .collect()
    };
    let results = if spec.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(work)
    } else {
        work()
    };

    let trace = results.iter().find(|(row, _)| row.variant.runs_penalty()).and_then(|(_, d)| d.clone());
    Ok(SweepOutput { rows: results.into_iter().map(|(row, _)| row).collect(), trace })
}

fn csv_error(path: &Path, source: csv::Error) -> Error {
    if !source.is_io_error() {
        return Error::Csv { path: path.to_path_buf(), source };
    }
    match source.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.to_path_buf(), source },
        _ => unreachable!("checked above"),
    }
}

/// Write result rows as CSV to any sink.
pub fn write_csv<W: Write>(rows: &[ResultRow], sink: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record([
            row.variant.as_str().to_string(),
            format!("{}", row.sweep_value),
            row.realization.to_string(),
            format!("{:.6}", row.power_dbm),
            row.converged.to_string(),
            format!("{:.6}", row.min_sinr_db),
            row.outer_iters.to_string(),
            row.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write a convergence trace as CSV to any sink.
pub fn write_trace<W: Write>(diagnostics: &Diagnostics, sink: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(TRACE_HEADER)?;
    for rec in &diagnostics.records {
        w.write_record([
            rec.outer_iter.to_string(),
            format!("{:e}", rec.rho),
            format!("{:e}", rec.objective),
            format!("{:e}", rec.xi),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_csv(rows, create(path)?).map_err(|e| csv_error(path, e))
}

pub fn emit_trace(diagnostics: &Diagnostics, path: &Path) -> Result<()> {
    write_trace(diagnostics, create(path)?).map_err(|e| csv_error(path, e))
}

/// Flat `key = value` configuration file. Unset keys keep the desk-scale
/// defaults; SINR and noise are given in dB and dBm.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub f1: Option<usize>,
    pub f2: Option<usize>,
    pub bs_rows: Option<usize>,
    pub bs_cols: Option<usize>,
    pub gamma_db: Option<f64>,
    pub noise_dbm: Option<f64>,
    pub ris_distance: Option<f64>,
    pub rho0: Option<f64>,
    pub c: Option<f64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub outer_cap: Option<usize>,
    pub inner_cap: Option<usize>,
    pub mu: Option<usize>,
    pub seed: Option<u64>,
}

fn near_square(m: usize) -> (usize, usize) {
    let rows = (1..=m).take_while(|r| r * r <= m).filter(|r| m % r == 0).last().unwrap_or(1);
    (rows, m / rows)
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Overlay onto `base` and validate.
    pub fn apply(&self, base: &SystemConfig) -> Result<SystemConfig> {
        let mut cfg = base.clone();
        if let Some(m) = self.m {
            cfg.m = m;
            if self.bs_rows.is_none() && self.bs_cols.is_none() {
                (cfg.bs_rows, cfg.bs_cols) = near_square(m);
            }
        }
        if let Some(r) = self.bs_rows {
            cfg.bs_rows = r;
            if self.bs_cols.is_none() && r > 0 {
                cfg.bs_cols = cfg.m / r;
            }
        }
        if let Some(c) = self.bs_cols {
            cfg.bs_cols = c;
            if self.bs_rows.is_none() && c > 0 {
                cfg.bs_rows = cfg.m / c;
            }
        }
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {$(
                if let Some(v) = self.$field { cfg.$target = v; }
            )*};
        }
        set!(n => n, f1 => f1, f2 => f2, ris_distance => ris_distance, rho0 => rho0, c => c,
             eps1 => eps1, eps2 => eps2, outer_cap => outer_cap, inner_cap => inner_cap, mu => codebook_oversampling);

        let k = self.k.unwrap_or(cfg.k);
        let gamma = self.gamma_db.map(db_to_linear).unwrap_or(cfg.gamma[0]);
        let sigma2 = self.noise_dbm.map(dbm_to_watts).unwrap_or(cfg.sigma2[0]);
        cfg.k = k;
        cfg.gamma = vec![gamma; k];
        cfg.sigma2 = vec![sigma2; k];
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Read a config file; returns the configuration and the file's seed, if set.
pub fn load_config(path: &Path, base: &SystemConfig) -> Result<(SystemConfig, Option<u64>)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let file = ConfigFile::parse(&text)?;
    Ok((file.apply(base)?, file.seed))
}
