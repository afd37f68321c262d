//! Monte-Carlo evaluation: per-trial echo synthesis, localization,
//! estimate-to-truth association and SMSE aggregation over noise sweeps.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{localize, EstimatorParams, LocalizationResult, Method, SensingTensor};
use crate::fusion::{fuse_symbol_level, FusionOptions};
use crate::scenario::{GridSpec, Point, Region, Scenario, SystemConfig};
use crate::waveform::{synthesize_echo, GainMode, Side};

/// Which receivers contribute to a localization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cooperation {
    Cooperative,
    MbsOnly,
    MibsOnly,
}

impl Cooperation {
    pub const ALL: [Cooperation; 3] = [
        Cooperation::Cooperative,
        Cooperation::MbsOnly,
        Cooperation::MibsOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Cooperation::Cooperative => "cooperative",
            Cooperation::MbsOnly => "mbs_only",
            Cooperation::MibsOnly => "mibs_only",
        }
    }
}

/// Where the two receivers' information is combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionLevel {
    /// Tensors are fused before a single localization.
    SymbolLevel,
    /// Each receiver localizes on its own and the position sets are averaged.
    DataLevel,
}

impl FusionLevel {
    pub const ALL: [FusionLevel; 2] = [FusionLevel::SymbolLevel, FusionLevel::DataLevel];

    pub fn name(self) -> &'static str {
        match self {
            FusionLevel::SymbolLevel => "symbol_level",
            FusionLevel::DataLevel => "data_level",
        }
    }
}

macro_rules! named_enum {
    ($t:ty, $what:literal) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                <$t>::ALL
                    .into_iter()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| {
                        let valid: Vec<_> = <$t>::ALL.iter().map(|v| v.name()).collect();
                        Error::Config(format!(
                            "unknown {} '{s}' (expected one of: {})",
                            $what,
                            valid.join(", ")
                        ))
                    })
            }
        }
    };
}

named_enum!(Cooperation, "cooperation");
named_enum!(FusionLevel, "fusion level");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridParams {
    pub region: Region,
    pub resolution_m: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            region: Region::reference(),
            resolution_m: 5.0,
        }
    }
}

/// Path amplitude of the desk preset (about -146 dB two-way loss, between
/// the bistatic-radar losses of the two carriers at the reference ranges).
pub const DESK_PATH_AMPLITUDE: f64 = 5e-8;

/// One experiment: a fixed scene, receiver setup and estimator swept over
/// noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub config: SystemConfig,
    pub method: Method,
    pub cooperation: Cooperation,
    pub fusion_level: FusionLevel,
    pub noise_sweep_dbm_hz: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub grid: GridParams,
    pub gain_mode: GainMode,
    pub fusion: FusionOptions,
    pub estimator: EstimatorParams,
    /// Largest tolerated fraction of failed trials per cell.
    pub max_failure_rate: f64,
}

impl ExperimentSpec {
    /// Desk-scale defaults: reference scene, cooperative GDFT with
    /// symbol-level fusion, five noise levels from -175 to -135 dBm/Hz.
    ///
    /// Paths use the unit-gain model with a common amplitude of
    /// [`DESK_PATH_AMPLITUDE`], so both links see the same two-way loss and
    /// differ only in transmit power, noise bandwidth and numerology.
    pub fn desk() -> Self {
        let mut scenario = Scenario::reference();
        for t in &mut scenario.targets {
            t.reflectivity = Complex64::new(DESK_PATH_AMPLITUDE, 0.0);
        }
        Self {
            scenario,
            config: SystemConfig::desk(),
            method: Method::Gdft,
            cooperation: Cooperation::Cooperative,
            fusion_level: FusionLevel::SymbolLevel,
            noise_sweep_dbm_hz: vec![-175.0, -165.0, -155.0, -145.0, -135.0],
            trials: 100,
            base_seed: 0,
            grid: GridParams::default(),
            gain_mode: GainMode::Unit,
            fusion: FusionOptions::default(),
            estimator: EstimatorParams {
                min_separation_m: Some(15.0),
                ..EstimatorParams::default()
            },
            max_failure_rate: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.scenario.validate()?;
        if self.scenario.targets.is_empty() {
            return Err(Error::Config("at least one target is required".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.noise_sweep_dbm_hz.is_empty() {
            return Err(Error::Precondition("noise sweep is empty".into()));
        }
        if self.noise_sweep_dbm_hz.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("noise levels must be finite".into()));
        }
        if self.noise_sweep_dbm_hz.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "noise sweep must be strictly ascending".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(Error::Config("max_failure_rate must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<GridSpec> {
        GridSpec::build(
            self.grid.region,
            self.grid.resolution_m,
            &self.scenario.mbs_pos,
            &self.scenario.mibs_pos,
        )
    }

    /// Seed of trial `index`.
    pub fn trial_seed(&self, index: usize) -> u64 {
        self.base_seed.wrapping_add(index as u64)
    }
}

/// Optimal one-to-one matching of estimates to truths.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// For each truth, the index of its estimate (`None` for a miss).
    pub matches: Vec<Option<usize>>,
    /// Per-truth squared error, capped; a miss costs the cap.
    pub sq_errors: Vec<f64>,
    pub cost: f64,
}

const MAX_ASSIGN_ESTIMATES: usize = 20;

/// Minimum-cost assignment of `estimates` to `truths` with squared
/// distance costs capped at `cap`. Truths left without an estimate cost
/// `cap`. Solved exactly by dynamic programming over estimate subsets.
pub fn associate(estimates: &[Point], truths: &[Point], cap: f64) -> Result<Assignment> {
    let m = estimates.len();
    if m > MAX_ASSIGN_ESTIMATES {
        return Err(Error::Precondition(format!(
            "at most {MAX_ASSIGN_ESTIMATES} estimates can be associated, got {m}"
        )));
    }
    let l = truths.len();
    let cost = |t: usize, e: usize| truths[t].distance_sq(&estimates[e]).min(cap);
    // best[t][mask]: minimal cost of truths t.. given used estimates `mask`.
    let states = 1usize << m;
    let mut best = vec![vec![0.0f64; states]; l + 1];
    let mut choice = vec![vec![usize::MAX; states]; l];
    for t in (0..l).rev() {
        for mask in 0..states {
            let mut b = cap + best[t + 1][mask];
            let mut c = usize::MAX;
            for e in 0..m {
                if mask & (1 << e) == 0 {
                    let v = cost(t, e) + best[t + 1][mask | (1 << e)];
                    if v < b {
                        b = v;
                        c = e;
                    }
                }
            }
            best[t][mask] = b;
            choice[t][mask] = c;
        }
    }
    let mut mask = 0usize;
    let mut matches = Vec::with_capacity(l);
    let mut sq_errors = Vec::with_capacity(l);
    for (t, row) in choice.iter().enumerate() {
        match row[mask] {
            usize::MAX => {
                matches.push(None);
                sq_errors.push(cap);
            }
            e => {
                mask |= 1 << e;
                matches.push(Some(e));
                sq_errors.push(cost(t, e));
            }
        }
    }
    Ok(Assignment {
        matches,
        cost: best[0][0],
        sq_errors,
    })
}

/// Sum over targets of the per-target RMSE across trials.
///
/// `per_trial[i][l]` is the squared error of target `l` in trial `i`.
pub fn smse(per_trial: &[Vec<f64>]) -> Result<f64> {
    let first = per_trial
        .first()
        .ok_or_else(|| Error::Precondition("no trials to aggregate".into()))?;
    let l = first.len();
    if per_trial.iter().any(|t| t.len() != l) {
        return Err(Error::Shape("trials cover different target counts".into()));
    }
    let n = per_trial.len() as f64;
    Ok((0..l)
        .map(|t| (per_trial.iter().map(|e| e[t]).sum::<f64>() / n).sqrt())
        .sum())
}

/// Outcome of one Monte-Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub estimates: Vec<Point>,
    pub truths: Vec<Point>,
    /// Per-truth squared error in m² (empty for failed trials).
    pub sq_errors: Vec<f64>,
    /// Fewer estimates than targets were produced.
    pub incomplete: bool,
    /// Estimator error message of a failed trial.
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    /// Sum of the per-target position errors of this trial.
    pub fn error_sum(&self) -> f64 {
        self.sq_errors.iter().map(|e| e.sqrt()).sum()
    }
}

/// Aggregates of one (noise level, method, cooperation, fusion) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    /// `None` for a noiseless cell.
    pub noise_dbm_hz: Option<f64>,
    pub method: Method,
    pub cooperation: Cooperation,
    pub fusion_level: FusionLevel,
    /// SMSE over successful trials; `None` if every trial failed.
    pub smse_m: Option<f64>,
    /// Median over successful trials of the per-trial error sum.
    pub median_error_m: Option<f64>,
    pub trials: usize,
    pub failures: usize,
    pub wall_time_s: f64,
    pub records: Vec<TrialRecord>,
}

impl CellReport {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }
}

/// Cells of one or more sweeps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cells: Vec<CellReport>,
}

pub const CSV_HEADER: &str =
    "noise_dbm_hz,method,cooperation,fusion,smse_m,trials,failures,wall_time_s,median_error_m";

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{v}"))
}

impl EvalReport {
    /// One CSV row per cell. With `timing` off the wall-time column is
    /// written as 0 so that reruns compare byte for byte.
    pub fn write_csv<W: Write>(&self, mut w: W, timing: bool) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                c.noise_dbm_hz
                    .map_or_else(|| "off".to_string(), |v| format!("{v}")),
                c.method,
                c.cooperation,
                c.fusion_level,
                opt_num(c.smse_m),
                c.trials,
                c.failures,
                if timing { c.wall_time_s } else { 0.0 },
                opt_num(c.median_error_m),
            )?;
        }
        Ok(())
    }

    /// Per-trial records as JSON lines, each tagged with its cell.
    pub fn write_records<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            noise_dbm_hz: Option<f64>,
            method: Method,
            cooperation: Cooperation,
            fusion: FusionLevel,
            #[serde(flatten)]
            record: &'a TrialRecord,
        }
        for c in &self.cells {
            for r in &c.records {
                let line = Line {
                    noise_dbm_hz: c.noise_dbm_hz,
                    method: c.method,
                    cooperation: c.cooperation,
                    fusion: c.fusion_level,
                    record: r,
                };
                serde_json::to_writer(&mut w, &line).map_err(|e| Error::Io(e.to_string()))?;
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Pairs the MiBS estimates with the MBS estimates and averages matched
/// pairs; MBS estimates without a partner are kept as they are, surplus
/// MiBS estimates are appended.
pub fn data_level_merge(mbs: &[Point], mibs: &[Point]) -> Result<Vec<Point>> {
    let a = associate(mibs, mbs, f64::INFINITY)?;
    let mut out: Vec<Point> = mbs
        .iter()
        .zip(&a.matches)
        .map(|(p, m)| match m {
            Some(e) => Point::new((p.x + mibs[*e].x) / 2.0, (p.y + mibs[*e].y) / 2.0),
            None => *p,
        })
        .collect();
    for (e, p) in mibs.iter().enumerate() {
        if !a.matches.contains(&Some(e)) {
            out.push(*p);
        }
    }
    Ok(out)
}

/// Tensor a single localization runs on: the fused tensor for cooperative
/// runs, otherwise the named receiver's own echo.
pub fn sensing_input(
    spec: &ExperimentSpec,
    scenario: &Scenario,
    seed: u64,
    cooperation: Cooperation,
) -> Result<SensingTensor> {
    let cfg = &spec.config;
    let echo = |side| synthesize_echo(cfg, scenario, side, 0, seed, spec.gain_mode);
    match cooperation {
        Cooperation::MbsOnly => SensingTensor::from_echo(&echo(Side::MbsRx)?),
        Cooperation::MibsOnly => SensingTensor::from_echo(&echo(Side::MibsRx)?),
        Cooperation::Cooperative => {
            let fused = fuse_symbol_level(
                &echo(Side::MbsRx)?,
                &echo(Side::MibsRx)?,
                cfg.q()?,
                spec.fusion,
            )?;
            SensingTensor::from_fused(&fused)
        }
    }
}

/// Localization of one noisy realization under the experiment's setup.
pub fn localize_trial(
    spec: &ExperimentSpec,
    scenario: &Scenario,
    grid: &GridSpec,
    seed: u64,
) -> Result<LocalizationResult> {
    let l = scenario.targets.len();
    let (mbs, mibs) = (&scenario.mbs_pos, &scenario.mibs_pos);
    let run = |c| {
        let input = sensing_input(spec, scenario, seed, c)?;
        localize(spec.method, &input, grid, l, &spec.estimator, mbs, mibs)
    };
    match (spec.cooperation, spec.fusion_level) {
        (Cooperation::Cooperative, FusionLevel::DataLevel) => {
            let a = run(Cooperation::MbsOnly)?;
            let b = run(Cooperation::MibsOnly)?;
            let estimates = data_level_merge(&a.estimates, &b.estimates)?;
            Ok(LocalizationResult {
                incomplete: estimates.len() < l,
                estimates,
                method: spec.method,
                peak_values: Vec::new(),
            })
        }
        (c, _) => run(c),
    }
}

fn run_trial(
    spec: &ExperimentSpec,
    scenario: &Scenario,
    grid: &GridSpec,
    index: usize,
) -> TrialRecord {
    let seed = spec.trial_seed(index);
    let truths = scenario.truths();
    let cap = spec.grid.region.diagonal().powi(2);
    let outcome = localize_trial(spec, scenario, grid, seed)
        .and_then(|r| associate(&r.estimates, &truths, cap).map(|a| (r, a)));
    match outcome {
        Ok((r, a)) => TrialRecord {
            trial: index,
            seed,
            incomplete: r.incomplete,
            estimates: r.estimates,
            truths,
            sq_errors: a.sq_errors,
            error: None,
        },
        Err(e) => TrialRecord {
            trial: index,
            seed,
            estimates: Vec::new(),
            truths,
            sq_errors: Vec::new(),
            incomplete: true,
            error: Some(e.to_string()),
        },
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Runs every trial of one cell. `noise_dbm_hz = None` is noiseless.
pub fn run_cell(spec: &ExperimentSpec, noise_dbm_hz: Option<f64>) -> Result<CellReport> {
    spec.config.validate()?;
    spec.scenario.validate()?;
    if spec.trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let grid = spec.build_grid()?;
    let scenario = spec.scenario.with_noise(noise_dbm_hz);
    let start = Instant::now();
    let records: Vec<TrialRecord> = (0..spec.trials)
        .into_par_iter()
        .map(|i| run_trial(spec, &scenario, &grid, i))
        .collect();
    let wall_time_s = start.elapsed().as_secs_f64();

    let ok: Vec<&TrialRecord> = records.iter().filter(|r| !r.failed()).collect();
    let errors: Vec<Vec<f64>> = ok.iter().map(|r| r.sq_errors.clone()).collect();
    let smse_m = if errors.is_empty() {
        None
    } else {
        Some(smse(&errors)?)
    };
    Ok(CellReport {
        noise_dbm_hz,
        method: spec.method,
        cooperation: spec.cooperation,
        fusion_level: spec.fusion_level,
        smse_m,
        median_error_m: median(ok.iter().map(|r| r.error_sum()).collect()),
        trials: spec.trials,
        failures: records.len() - ok.len(),
        wall_time_s,
        records,
    })
}

/// One cell per noise level of the sweep, in sweep order.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<EvalReport> {
    spec.validate()?;
    let cells = spec
        .noise_sweep_dbm_hz
        .iter()
        .map(|&n| run_cell(spec, Some(n)))
        .collect::<Result<_>>()?;
    Ok(EvalReport { cells })
}
