//! Command implementations behind the `coopsense` binary.
//!
//! Settings resolve with the precedence flag > config file > built-in desk
//! defaults. Every output file starts with a `#` provenance line carrying
//! the seed, followed by its column header.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use coopsense_core::estimators::{
    dft3d_estimate, dft3d_grid_spectrum, gdft_spectrum, music3d_estimate, music_grid_spectrum,
    Method, SensingTensor, SpectrumResult,
};
use coopsense_core::eval::{
    associate, localize_trial, run_sweep, sensing_input, Cooperation, EvalReport, ExperimentSpec,
    FusionLevel,
};
use coopsense_core::scenario::{GridSpec, Point, Region, SystemConfig};
use coopsense_core::waveform::GainMode;

#[derive(Debug, Parser)]
#[command(
    name = "coopsense",
    version,
    about = "Cooperative MBS/MiBS passive sensing experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// One trial per (method, cooperation): spectrum and estimate CSVs.
    Map,
    /// Monte-Carlo noise sweep over the experiment matrix.
    Sweep,
    /// Wall-time measurements of the three estimators.
    Bench,
    /// Load and check the configuration without running anything.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Map => "map",
            Command::Sweep => "sweep",
            Command::Bench => "bench",
            Command::Validate => "validate",
        }
    }
}

/// A noise level argument: dBm/Hz or `off` for a noiseless run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseArg(pub Option<f64>);

impl FromStr for NoiseArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "off" | "none" => Ok(NoiseArg(None)),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| NoiseArg(Some(v)))
                .ok_or_else(|| format!("invalid noise level '{s}' (dBm/Hz or 'off')")),
        }
    }
}

fn parse_enum<T: FromStr>(s: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed; trial i uses seed + i.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Noise PSD in dBm/Hz: the sweep levels, or the single map level.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub noise_dbm_hz: Vec<NoiseArg>,
    /// Estimators: gdft, dft3d, music3d.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_enum::<Method>)]
    pub method: Vec<Method>,
    /// Receivers: cooperative, mbs_only, mibs_only.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_enum::<Cooperation>)]
    pub cooperation: Vec<Cooperation>,
    /// Fusion level of cooperative runs: symbol_level, data_level.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_enum::<FusionLevel>)]
    pub fusion_mode: Vec<FusionLevel>,
    /// Search grid spacing in meters.
    #[arg(long, global = true)]
    pub grid_res_m: Option<f64>,
    /// Monte-Carlo trials per cell.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Use the full-scale system parameters (slow).
    #[arg(long, global = true)]
    pub full_scale: bool,
    /// Write measured wall times into the sweep CSV instead of 0.
    #[arg(long, global = true)]
    pub timing: bool,
    /// Bench grid sizes (perfect squares).
    #[arg(long, global = true, value_delimiter = ',')]
    pub bench_grid: Vec<usize>,
}

/// Configuration file schema. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub methods: Option<Vec<Method>>,
    pub cooperation: Option<Vec<Cooperation>>,
    pub fusion_mode: Option<Vec<FusionLevel>>,
    pub noise_sweep_dbm_hz: Option<Vec<f64>>,
    /// Map noise level; omit the key for the -200 dBm/Hz default.
    pub map_noise_dbm_hz: Option<f64>,
    pub map_noiseless: Option<bool>,
    pub full_scale: Option<bool>,
    pub gain_mode: Option<GainMode>,
    // Tables below are overlaid key by key on the preset values.
    pub grid: Option<toml::Table>,
    pub fusion: Option<toml::Table>,
    pub estimator: Option<toml::Table>,
    pub system: Option<toml::Table>,
    pub scenario: Option<toml::Table>,
    pub max_failure_rate: Option<f64>,
    pub bench_grid_points: Option<Vec<usize>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Template for every cell; method/cooperation/fusion are overwritten
    /// per combination.
    pub spec: ExperimentSpec,
    pub methods: Vec<Method>,
    pub cooperations: Vec<Cooperation>,
    pub fusions: Vec<FusionLevel>,
    pub map_noise_dbm_hz: Option<f64>,
    pub out: PathBuf,
    pub timing: bool,
    pub bench_grid_points: Vec<usize>,
}

pub const DEFAULT_MAP_NOISE_DBM_HZ: f64 = -200.0;

fn pick<T>(flag: Vec<T>, file: Option<Vec<T>>, default: Vec<T>) -> Vec<T> {
    if !flag.is_empty() {
        flag
    } else {
        file.unwrap_or(default)
    }
}

/// Replaces the keys of `base` named in `patch`, leaving the rest alone.
fn overlay<T: Serialize + DeserializeOwned>(
    base: &mut T,
    patch: Option<toml::Table>,
    name: &str,
) -> Result<()> {
    let Some(patch) = patch else { return Ok(()) };
    let mut table = toml::Table::try_from(&*base)
        .with_context(|| format!("cannot encode [{name}] defaults"))?;
    table.extend(patch);
    *base = table
        .try_into()
        .with_context(|| format!("invalid [{name}] table"))?;
    Ok(())
}

impl Manifest {
    pub fn resolve(cmd: Command, opts: &Options) -> Result<Self> {
        let file = match &opts.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut spec = ExperimentSpec::desk();
        if opts.full_scale || file.full_scale.unwrap_or(false) {
            spec.config = SystemConfig::full_scale();
        }
        overlay(&mut spec.config, file.system, "system")?;
        overlay(&mut spec.scenario, file.scenario, "scenario")?;
        overlay(&mut spec.grid, file.grid, "grid")?;
        overlay(&mut spec.fusion, file.fusion, "fusion")?;
        overlay(&mut spec.estimator, file.estimator, "estimator")?;
        if let Some(g) = file.gain_mode {
            spec.gain_mode = g;
        }
        if let Some(m) = file.max_failure_rate {
            spec.max_failure_rate = m;
        }
        if let Some(r) = opts.grid_res_m {
            spec.grid.resolution_m = r;
        }
        spec.trials = opts.trials.or(file.trials).unwrap_or(spec.trials);
        spec.base_seed = opts.seed.or(file.seed).unwrap_or(spec.base_seed);

        let mut map_noise = if file.map_noiseless.unwrap_or(false) {
            None
        } else {
            Some(file.map_noise_dbm_hz.unwrap_or(DEFAULT_MAP_NOISE_DBM_HZ))
        };
        if !opts.noise_dbm_hz.is_empty() {
            if cmd == Command::Map {
                ensure!(
                    opts.noise_dbm_hz.len() == 1,
                    "map takes a single --noise-dbm-hz level"
                );
                map_noise = opts.noise_dbm_hz[0].0;
            } else {
                spec.noise_sweep_dbm_hz = opts
                    .noise_dbm_hz
                    .iter()
                    .map(|n| {
                        n.0.context("'off' is only valid for map; sweeps need dBm/Hz levels")
                    })
                    .collect::<Result<_>>()?;
            }
        } else if let Some(s) = file.noise_sweep_dbm_hz {
            spec.noise_sweep_dbm_hz = s;
        }

        let manifest = Self {
            methods: pick(opts.method.clone(), file.methods, Method::ALL.to_vec()),
            cooperations: pick(
                opts.cooperation.clone(),
                file.cooperation,
                Cooperation::ALL.to_vec(),
            ),
            fusions: pick(
                opts.fusion_mode.clone(),
                file.fusion_mode,
                FusionLevel::ALL.to_vec(),
            ),
            map_noise_dbm_hz: map_noise,
            out: opts
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("out")),
            timing: opts.timing,
            bench_grid_points: pick(
                opts.bench_grid.clone(),
                file.bench_grid_points,
                vec![100, 400, 1600],
            ),
            spec,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec
            .validate()
            .context("invalid experiment settings")?;
        self.spec.build_grid().context("invalid search grid")?;
        ensure!(!self.methods.is_empty(), "no estimator selected");
        ensure!(
            !self.cooperations.is_empty(),
            "no cooperation mode selected"
        );
        ensure!(!self.fusions.is_empty(), "no fusion level selected");
        Ok(())
    }

    /// Cells of the sweep matrix in output order. Single-receiver runs do
    /// not fuse, so they appear once under `symbol_level`.
    pub fn combinations(&self) -> Vec<(Method, Cooperation, FusionLevel)> {
        let mut out = Vec::new();
        for &m in &self.methods {
            for &c in &self.cooperations {
                match c {
                    Cooperation::Cooperative => out.extend(self.fusions.iter().map(|&f| (m, c, f))),
                    _ => out.push((m, c, FusionLevel::SymbolLevel)),
                }
            }
        }
        out
    }

    fn cell_spec(&self, m: Method, c: Cooperation, f: FusionLevel) -> ExperimentSpec {
        ExperimentSpec {
            method: m,
            cooperation: c,
            fusion_level: f,
            ..self.spec.clone()
        }
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot write into {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.persist(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    Ok(())
}

fn provenance(cmd: Command, seed: u64) -> String {
    format!("# coopsense {} seed={seed}\n", cmd.name())
}

/// Files written by a command, in creation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub message: Option<String>,
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let manifest = Manifest::resolve(cli.command, &cli.opts)?;
    match cli.command {
        Command::Validate => Ok(Outcome {
            files: Vec::new(),
            message: Some(validate_summary(&manifest)),
        }),
        Command::Map => cmd_map(&manifest),
        Command::Sweep => cmd_sweep(&manifest),
        Command::Bench => cmd_bench(&manifest),
    }
}

fn validate_summary(m: &Manifest) -> String {
    let c = &m.spec.config;
    let grid = m.spec.build_grid().map(|g| g.n_grid()).unwrap_or(0);
    format!(
        "config ok: N={}x{}, subcarriers {}/{}, Q={}, {} targets, {} grid points, {} trials, {} cells per noise level",
        c.n_rx,
        c.n_tx,
        c.n_subcarriers_mbs,
        c.n_subcarriers_mibs,
        c.q().unwrap_or(0),
        m.spec.scenario.targets.len(),
        grid,
        m.spec.trials,
        m.combinations().len()
    )
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn spectrum_for<'g>(
    method: Method,
    input: &SensingTensor,
    grid: &'g GridSpec,
    n_targets: usize,
) -> coopsense_core::Result<SpectrumResult<'g>> {
    match method {
        Method::Gdft => gdft_spectrum(input, grid),
        Method::Dft3d => dft3d_grid_spectrum(input, grid),
        Method::Music3d => music_grid_spectrum(input, grid, n_targets),
    }
}

pub const ESTIMATES_HEADER: &str = "target,truth_x_m,truth_y_m,estimate_x_m,estimate_y_m,error_m";

fn estimates_csv(estimates: &[Point], truths: &[Point], cap: f64) -> Result<String> {
    let a = associate(estimates, truths, cap)?;
    let mut s = format!("{ESTIMATES_HEADER}\n");
    for (l, (t, m)) in truths.iter().zip(&a.matches).enumerate() {
        match m {
            Some(e) => {
                let p = estimates[*e];
                writeln!(s, "{l},{},{},{},{},{}", t.x, t.y, p.x, p.y, t.distance(&p))?;
            }
            None => writeln!(s, "{l},{},{},nan,nan,nan", t.x, t.y)?,
        }
    }
    Ok(s)
}

/// Spectrum and estimate CSVs for every (method, cooperation) pair.
pub fn cmd_map(m: &Manifest) -> Result<Outcome> {
    prepare_out(&m.out)?;
    let grid = m.spec.build_grid()?;
    let scenario = m.spec.scenario.with_noise(m.map_noise_dbm_hz);
    let seed = m.spec.base_seed;
    let truths = scenario.truths();
    let cap = m.spec.grid.region.diagonal().powi(2);
    let header = provenance(Command::Map, seed);
    let mut files = Vec::new();
    for &method in &m.methods {
        for &coop in &m.cooperations {
            let spec = m.cell_spec(method, coop, FusionLevel::SymbolLevel);
            let input = sensing_input(&spec, &scenario, seed, coop)?;
            let spectrum = spectrum_for(method, &input, &grid, truths.len())
                .with_context(|| format!("{method} spectrum ({coop})"))?;
            let mut buf = header.clone().into_bytes();
            spectrum.write_csv(&mut buf)?;
            let path = m.out.join(format!("map_{method}_{coop}_spectrum.csv"));
            write_atomic(&path, &buf)?;
            files.push(path);

            let est = localize_trial(&spec, &scenario, &grid, seed)
                .with_context(|| format!("{method} localization ({coop})"))?;
            let text = header.clone() + &estimates_csv(&est.estimates, &truths, cap)?;
            let path = m.out.join(format!("map_{method}_{coop}_estimates.csv"));
            write_atomic(&path, text.as_bytes())?;
            files.push(path);
        }
    }
    Ok(Outcome {
        files,
        message: None,
    })
}

/// Runs the sweep matrix and collects all cells into one report.
pub fn sweep_report(m: &Manifest) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for (method, coop, fusion) in m.combinations() {
        let r = run_sweep(&m.cell_spec(method, coop, fusion))
            .with_context(|| format!("{method}/{coop}/{fusion} sweep"))?;
        report.cells.extend(r.cells);
    }
    Ok(report)
}

fn subset(
    report: &EvalReport,
    keep: impl Fn(&coopsense_core::eval::CellReport) -> bool,
) -> EvalReport {
    EvalReport {
        cells: report.cells.iter().filter(|c| keep(c)).cloned().collect(),
    }
}

/// Sweep CSV, per-trial JSON lines and the per-figure subsets.
pub fn cmd_sweep(m: &Manifest) -> Result<Outcome> {
    prepare_out(&m.out)?;
    let report = sweep_report(m)?;
    let header = provenance(Command::Sweep, m.spec.base_seed);
    let mut files = Vec::new();
    let mut emit = |name: &str, r: &EvalReport| -> Result<()> {
        let mut buf = header.clone().into_bytes();
        r.write_csv(&mut buf, m.timing)?;
        let path = m.out.join(name);
        write_atomic(&path, &buf)?;
        files.push(path);
        Ok(())
    };
    emit("sweep.csv", &report)?;
    let figures: [(&str, EvalReport); 3] = [
        (
            "fig4_cooperation.csv",
            subset(&report, |c| c.fusion_level == FusionLevel::SymbolLevel),
        ),
        (
            "fig5_methods.csv",
            subset(&report, |c| {
                c.cooperation == Cooperation::Cooperative
                    && c.fusion_level == FusionLevel::SymbolLevel
            }),
        ),
        (
            "fig6_fusion.csv",
            subset(&report, |c| c.cooperation == Cooperation::Cooperative),
        ),
    ];
    for (name, r) in &figures {
        if !r.cells.is_empty() {
            emit(name, r)?;
        }
    }

    let mut buf = format!(
        "{{\"command\":\"sweep\",\"base_seed\":{}}}\n",
        m.spec.base_seed
    )
    .into_bytes();
    report.write_records(&mut buf)?;
    let path = m.out.join("records.jsonl");
    write_atomic(&path, &buf)?;
    files.push(path);

    let over: Vec<String> = report
        .cells
        .iter()
        .filter(|c| c.failure_rate() > m.spec.max_failure_rate)
        .map(|c| {
            format!(
                "{}/{}/{} at {}: {} of {} trials failed",
                c.method,
                c.cooperation,
                c.fusion_level,
                c.noise_dbm_hz.map_or("off".into(), |v| v.to_string()),
                c.failures,
                c.trials
            )
        })
        .collect();
    if !over.is_empty() {
        bail!("failure-rate bound exceeded:\n  {}", over.join("\n  "));
    }
    Ok(Outcome {
        files,
        message: None,
    })
}

/// `side x side` evenly spaced points over `region`.
pub fn square_grid(
    region: Region,
    side: usize,
    mbs: &Point,
    mibs: &Point,
) -> coopsense_core::Result<GridSpec> {
    let step = |lo: f64, hi: f64, i: usize| {
        if side == 1 {
            (lo + hi) / 2.0
        } else {
            lo + (hi - lo) * i as f64 / (side - 1) as f64
        }
    };
    let points = (0..side)
        .flat_map(|j| (0..side).map(move |i| (i, j)))
        .map(|(i, j)| {
            Point::new(
                step(region.x_min, region.x_max, i),
                step(region.y_min, region.y_max, j),
            )
        })
        .collect();
    GridSpec::from_points(points, mbs, mibs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub grid_points: usize,
    pub params: String,
    pub wall_time_s: f64,
}

pub const BENCH_HEADER: &str = "method,grid_points,params,wall_time_s";

/// Fastest of `repeats` runs of `f`.
fn time_min<T>(
    repeats: usize,
    mut f: impl FnMut() -> coopsense_core::Result<T>,
) -> coopsense_core::Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        std::hint::black_box(f()?);
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Times GDFT on each requested grid size and the two baselines once, all
/// on the same cooperative tensor.
pub fn bench_rows(
    spec: &ExperimentSpec,
    grid_points: &[usize],
    repeats: usize,
) -> Result<Vec<BenchRow>> {
    ensure!(!grid_points.is_empty(), "no bench grid sizes given");
    let scenario = &spec.scenario;
    let input = sensing_input(spec, scenario, spec.base_seed, Cooperation::Cooperative)?;
    let (na, nb) = input.n_antennas();
    let bins = input.occupied.len();
    let l = scenario.targets.len();
    let mut rows = Vec::new();
    for &g in grid_points {
        let side = (g as f64).sqrt().round() as usize;
        ensure!(
            g > 0 && side * side == g,
            "bench grid size {g} is not a positive perfect square"
        );
        let grid = square_grid(
            spec.grid.region,
            side,
            &scenario.mbs_pos,
            &scenario.mibs_pos,
        )?;
        rows.push(BenchRow {
            method: Method::Gdft,
            grid_points: g,
            params: format!("N={na}x{nb} bins={bins}"),
            wall_time_s: time_min(repeats, || {
                gdft_spectrum(&input, &grid).map(|s| s.values.len())
            })?,
        });
    }
    rows.push(BenchRow {
        method: Method::Dft3d,
        grid_points: 0,
        params: format!("N={na}x{nb} bins={} L={l}", input.n_bins()),
        wall_time_s: time_min(repeats, || {
            dft3d_estimate(&input, l, spec.estimator.delay_scaling)
        })?,
    });
    let (psi, phi) = (
        spec.estimator.music_angle_grid,
        spec.estimator.music_delay_grid,
    );
    rows.push(BenchRow {
        method: Method::Music3d,
        grid_points: 0,
        params: format!("N={na}x{nb} bins={bins} L={l} psi={psi} phi={phi}"),
        wall_time_s: time_min(repeats, || music3d_estimate(&input, l, psi, phi))?,
    });
    Ok(rows)
}

pub fn cmd_bench(m: &Manifest) -> Result<Outcome> {
    prepare_out(&m.out)?;
    let rows = bench_rows(&m.spec, &m.bench_grid_points, 3)?;
    let mut s = provenance(Command::Bench, m.spec.base_seed);
    writeln!(s, "{BENCH_HEADER}")?;
    for r in &rows {
        writeln!(
            s,
            "{},{},{},{:e}",
            r.method, r.grid_points, r.params, r.wall_time_s
        )?;
    }
    let path = m.out.join("bench.csv");
    write_atomic(&path, s.as_bytes())?;
    Ok(Outcome {
        files: vec![path],
        message: None,
    })
}
