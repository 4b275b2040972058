//! Command-line front end: `geometry`, `pattern`, `compare` and `doa`.
//!
//! Every output carries a metadata header with the resolved configuration
//! (CSV comment lines or a `metadata` JSON member). Exit codes: 0 success,
//! 2 invalid input, 3 internal invariant violation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::beamforming::{composite_pattern, subarray_responses, ScanGrid, DEFAULT_GRID_POINTS};
use crate::error::Error;
use crate::geometry::{parse_positions, ArraySpec, BUNDLED_MRA_17, UNIFORM_EXTENSION_FACTOR};
use crate::metrics::{self, counted_ratio, savings_ratio};
use crate::simulation::{
    default_tolerance, detect_peaks, doa_spectrum, evaluate_detection, generate_snapshots,
    SourceScene, RNG_NAME,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::invalid(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Parser, Debug)]
#[command(name = "arraylab", version, about = "Sparse linear array geometry, beampatterns and DoA experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build an array and print its geometry.
    Geometry(GeometryArgs),
    /// Evaluate a composite beampattern.
    Pattern(PatternArgs),
    /// Sensor-savings table with measured main-lobe width and PSL.
    Compare(CompareArgs),
    /// Simulate snapshots and estimate directions of arrival.
    Doa(DoaArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    Ula,
    Sca,
    #[value(alias = "basic-csa", alias = "basic_csa")]
    Csa,
    Ecsa,
    Mcsa,
    Nsa,
    Mra,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct ArrayArgs {
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long)]
    pub k: Option<u32>,
    /// ECSA extension factor.
    #[arg(long)]
    pub c: Option<f64>,
    /// MRA positions file (JSON array or one integer per line); defaults to the bundled 17-sensor array.
    #[arg(long)]
    pub positions: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// Scan grid points on [-1, 1].
    #[arg(long, env = "ARRAYLAB_GRID", default_value_t = DEFAULT_GRID_POINTS)]
    pub grid: usize,
    /// Steering direction cosine.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub steer: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SeedArgs {
    /// RNG seed, recorded in the output metadata.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct GeometryArgs {
    #[command(flatten)]
    pub array: ArrayArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Args, Debug, Clone)]
pub struct PatternArgs {
    #[command(flatten)]
    pub array: ArrayArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Also emit each subarray's response.
    #[arg(long)]
    pub with_subarrays: bool,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    /// JSON list of array specs, e.g. `[{"kind":"sca","params":{"m":3,"n":4,"p":4,"q":9}}]`.
    #[arg(long)]
    pub specs: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Args, Debug, Clone)]
pub struct DoaArgs {
    #[command(flatten)]
    pub array: ArrayArgs,
    /// JSON list of array specs evaluated under one shared scene and seed.
    #[arg(long)]
    pub specs: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Spectrum CSV path; the detection report goes to `--report` or stdout.
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 54)]
    pub sources: usize,
    /// Sources are spaced evenly over [-span, span].
    #[arg(long, default_value_t = 0.95)]
    pub span: f64,
    #[arg(long, default_value_t = 100)]
    pub snapshots: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub snr_db: f64,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Match tolerance in u; defaults to 2 / (equivalent ULA size).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Number of peaks to pick; defaults to the number of sources.
    #[arg(long)]
    pub peaks: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Geometry,
    Pattern,
    Compare,
    Doa,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SceneConfig {
    pub sources: usize,
    pub span: f64,
    pub snapshots: usize,
    pub snr_db: f64,
    /// `None` means 2 / (equivalent ULA size) per array.
    pub tol_u: Option<f64>,
    pub peaks: usize,
}

/// Fully resolved and validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub arrays: Vec<ArraySpec>,
    pub grid: usize,
    pub steer: f64,
    pub scene: Option<SceneConfig>,
    pub seed: Option<u64>,
    pub rng: Option<&'static str>,
    pub with_subarrays: bool,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub format: Format,
}

fn required(value: Option<u32>, flag: &str, kind: KindArg) -> Result<u32, CliError> {
    value.ok_or_else(|| {
        CliError::invalid(format!("--{flag} is required for --kind {}", kind_name(kind)))
    })
}

fn kind_name(kind: KindArg) -> &'static str {
    match kind {
        KindArg::Ula => "ula",
        KindArg::Sca => "sca",
        KindArg::Csa => "csa",
        KindArg::Ecsa => "ecsa",
        KindArg::Mcsa => "mcsa",
        KindArg::Nsa => "nsa",
        KindArg::Mra => "mra",
    }
}

impl ArrayArgs {
    fn any_set(&self) -> bool {
        self.kind.is_some()
            || self.m.is_some()
            || self.n.is_some()
            || self.p.is_some()
            || self.q.is_some()
            || self.k.is_some()
            || self.c.is_some()
            || self.positions.is_some()
    }

    pub fn to_spec(&self) -> Result<ArraySpec, CliError> {
        let kind = self.kind.ok_or_else(|| CliError::invalid("--kind is required"))?;
        let allowed: &[&str] = match kind {
            KindArg::Ula => &["k"],
            KindArg::Sca => &["m", "n", "p", "q"],
            KindArg::Csa | KindArg::Nsa => &["m", "n"],
            KindArg::Ecsa => &["m", "c"],
            KindArg::Mcsa => &["m"],
            KindArg::Mra => &["positions"],
        };
        let given = [
            ("m", self.m.is_some()),
            ("n", self.n.is_some()),
            ("p", self.p.is_some()),
            ("q", self.q.is_some()),
            ("k", self.k.is_some()),
            ("c", self.c.is_some()),
            ("positions", self.positions.is_some()),
        ];
        if let Some((flag, _)) = given.iter().find(|(f, set)| *set && !allowed.contains(f)) {
            return Err(CliError::invalid(format!(
                "--{flag} does not apply to --kind {}",
                kind_name(kind)
            )));
        }
        Ok(match kind {
            KindArg::Ula => ArraySpec::Ula {
                k: required(self.k, "k", kind)?,
            },
            KindArg::Sca => ArraySpec::Sca {
                m: required(self.m, "m", kind)?,
                n: required(self.n, "n", kind)?,
                p: required(self.p, "p", kind)?,
                q: required(self.q, "q", kind)?,
            },
            KindArg::Csa => ArraySpec::BasicCsa {
                m: required(self.m, "m", kind)?,
                n: required(self.n, "n", kind)?,
            },
            KindArg::Nsa => ArraySpec::Nsa {
                m: required(self.m, "m", kind)?,
                n: required(self.n, "n", kind)?,
            },
            KindArg::Ecsa => ArraySpec::Ecsa {
                m: required(self.m, "m", kind)?,
                c: self.c.unwrap_or(UNIFORM_EXTENSION_FACTOR),
            },
            KindArg::Mcsa => ArraySpec::Mcsa {
                m: required(self.m, "m", kind)?,
            },
            KindArg::Mra => ArraySpec::Mra {
                positions: match &self.positions {
                    Some(path) => {
                        let text = fs::read_to_string(path).map_err(|e| {
                            CliError::invalid(format!("--positions {}: {e}", path.display()))
                        })?;
                        parse_positions(&text)?
                    }
                    None => BUNDLED_MRA_17.to_vec(),
                },
            },
        })
    }
}

fn check_grid(grid: &GridArgs) -> Result<(), CliError> {
    if grid.grid < 2 {
        return Err(CliError::invalid(format!("--grid must be at least 2 (got {})", grid.grid)));
    }
    if grid.steer.is_nan() || grid.steer.abs() > 1.0 {
        return Err(CliError::invalid(format!(
            "--steer must lie in [-1, 1] (got {})",
            grid.steer
        )));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let base = |command, arrays, format| RunConfig {
            command,
            arrays,
            grid: DEFAULT_GRID_POINTS,
            steer: 0.0,
            scene: None,
            seed: None,
            rng: None,
            with_subarrays: false,
            out: None,
            report: None,
            format,
        };
        let config = match &cli.command {
            Command::Geometry(a) => {
                let mut c = base(
                    CommandKind::Geometry,
                    vec![a.array.to_spec()?],
                    a.output.format.unwrap_or(Format::Json),
                );
                c.out = a.output.out.clone();
                c.seed = a.seed.seed;
                c
            }
            Command::Pattern(a) => {
                check_grid(&a.grid)?;
                let mut c = base(
                    CommandKind::Pattern,
                    vec![a.array.to_spec()?],
                    a.output.format.unwrap_or_default(),
                );
                c.grid = a.grid.grid;
                c.steer = a.grid.steer;
                c.with_subarrays = a.with_subarrays;
                c.out = a.output.out.clone();
                c.seed = a.seed.seed;
                c
            }
            Command::Compare(a) => {
                check_grid(&a.grid)?;
                let arrays = match &a.specs {
                    Some(path) => read_spec_list(path)?,
                    None => equal_sensor_configs(),
                };
                let mut c = base(CommandKind::Compare, arrays, a.output.format.unwrap_or_default());
                c.grid = a.grid.grid;
                c.steer = a.grid.steer;
                c.out = a.output.out.clone();
                c.seed = a.seed.seed;
                c
            }
            Command::Doa(a) => {
                check_grid(&a.grid)?;
                let arrays = match &a.specs {
                    Some(_) if a.array.any_set() => {
                        return Err(CliError::invalid("--specs cannot be combined with array flags"))
                    }
                    Some(path) => read_spec_list(path)?,
                    None => vec![a.array.to_spec()?],
                };
                for spec in &arrays {
                    spec.build()?;
                }
                if !(a.span > 0.0 && a.span < 1.0) {
                    return Err(CliError::invalid(format!(
                        "--span must lie in (0, 1) (got {})",
                        a.span
                    )));
                }
                if a.snapshots == 0 {
                    return Err(CliError::invalid("--snapshots must be at least 1"));
                }
                if a.snr_db.is_nan() {
                    return Err(CliError::invalid("--snr-db must be a number"));
                }
                if let Some(tol) = a.tol {
                    if tol.is_nan() || tol <= 0.0 {
                        return Err(CliError::invalid(format!("--tol must be positive (got {tol})")));
                    }
                }
                if a.peaks == Some(0) {
                    return Err(CliError::invalid("--peaks must be at least 1"));
                }
                let mut c = base(CommandKind::Doa, arrays, a.output.format.unwrap_or_default());
                c.grid = a.grid.grid;
                c.steer = a.grid.steer;
                c.scene = Some(SceneConfig {
                    sources: a.sources,
                    span: a.span,
                    snapshots: a.snapshots,
                    snr_db: a.snr_db,
                    tol_u: a.tol,
                    peaks: a.peaks.unwrap_or(a.sources.max(1)),
                });
                c.seed = Some(a.seed.seed.unwrap_or(0));
                c.rng = Some(RNG_NAME);
                c.out = a.output.out.clone();
                c.report = a.report.clone();
                c
            }
        };
        Ok(config)
    }

    fn metadata(&self) -> Value {
        json!({
            "tool": "arraylab",
            "version": env!("CARGO_PKG_VERSION"),
            "config": self,
        })
    }

    fn csv_header(&self) -> String {
        format!("# {}\n", self.metadata())
    }
}

fn read_spec_list(path: &Path) -> Result<Vec<ArraySpec>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("--specs {}: {e}", path.display())))?;
    let specs: Vec<ArraySpec> =
        serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("--specs: {e}")))?;
    if specs.is_empty() {
        return Err(CliError::invalid("--specs: list is empty"));
    }
    Ok(specs)
}

/// The 32-sensor configurations compared against each other: SCA(3,4,4,9),
/// ECSA(M=2), MCSA(M=8), basic CSA(16,17) and NSA(16,17).
pub fn equal_sensor_configs() -> Vec<ArraySpec> {
    vec![
        ArraySpec::Sca { m: 3, n: 4, p: 4, q: 9 },
        ArraySpec::ecsa(2),
        ArraySpec::Mcsa { m: 8 },
        ArraySpec::BasicCsa { m: 16, n: 17 },
        ArraySpec::Nsa { m: 16, n: 17 },
    ]
}

/// One file (or stdout section) produced by a command.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub path: Option<PathBuf>,
    pub contents: String,
}

/// Result of a command: artifacts to write plus an optional failure that is
/// reported after they are written.
#[derive(Debug)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub error: Option<CliError>,
}

impl Outcome {
    fn ok(artifacts: Vec<Artifact>) -> Self {
        Self {
            artifacts,
            error: None,
        }
    }
}

fn grid_of(config: &RunConfig) -> Result<Arc<ScanGrid>, CliError> {
    Ok(Arc::new(ScanGrid::new(config.grid)?))
}

pub fn cmd_geometry(config: &RunConfig) -> Result<Outcome, CliError> {
    let geometry = config.arrays[0].build()?;
    let contents = match config.format {
        Format::Json => {
            let mut value = serde_json::to_value(&geometry).expect("geometry serializes");
            value["metadata"] = config.metadata();
            format!("{}\n", serde_json::to_string_pretty(&value).expect("json"))
        }
        Format::Csv => {
            let mut out = config.csv_header();
            out.push_str("position\n");
            for p in geometry.positions() {
                out.push_str(&format!("{p}\n"));
            }
            out
        }
    };
    Ok(Outcome::ok(vec![Artifact {
        path: config.out.clone(),
        contents,
    }]))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

pub fn cmd_pattern(config: &RunConfig) -> Result<Outcome, CliError> {
    let geometry = config.arrays[0].build()?;
    let grid = grid_of(config)?;
    let pattern = composite_pattern(&geometry, &grid, config.steer)?;
    let subs = if config.with_subarrays {
        subarray_responses(&geometry, &grid, config.steer)
    } else {
        Vec::new()
    };

    let artifacts = match config.format {
        Format::Json => {
            let subarrays: Vec<Value> = subs
                .iter()
                .map(|r| {
                    json!({
                        "subarray": r.subarray,
                        "re": r.values.iter().map(|v| v.re).collect::<Vec<_>>(),
                        "im": r.values.iter().map(|v| v.im).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let value = json!({
                "metadata": config.metadata(),
                "array": geometry,
                "grid": { "resolution": grid.resolution(), "step": grid.step() },
                "steer": config.steer,
                "combiner": pattern.combiner,
                "u": grid.u_values(),
                "magnitude": pattern.magnitude,
                "magnitude_db": pattern.magnitude_db,
                "subarrays": subarrays,
            });
            vec![Artifact {
                path: config.out.clone(),
                contents: format!("{value}\n"),
            }]
        }
        Format::Csv => {
            let mut artifacts = vec![Artifact {
                path: config.out.clone(),
                contents: config.csv_header() + &pattern.to_csv(),
            }];
            for (i, r) in subs.iter().enumerate() {
                let label = format!("sub{}", i + 1);
                let mut contents = config.csv_header();
                if config.out.is_none() {
                    contents.push_str(&format!("# {label}: {:?}\n", r.subarray));
                }
                contents.push_str(&r.to_pattern().to_csv());
                artifacts.push(Artifact {
                    path: config.out.as_deref().map(|p| sibling(p, &label)),
                    contents,
                });
            }
            artifacts
        }
    };
    Ok(Outcome::ok(artifacts))
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub family: String,
    pub params: String,
    pub num_sensors: usize,
    pub equivalent_ula: Option<u64>,
    pub ratio: String,
    pub matches_psl: bool,
    pub counted_ratio: Option<String>,
    pub formula_matches_count: bool,
    pub mlw: Option<f64>,
    pub psl_db: Option<f64>,
}

pub fn compare_rows(config: &RunConfig) -> Result<Vec<CompareRow>, CliError> {
    let grid = grid_of(config)?;
    config
        .arrays
        .par_iter()
        .map(|spec| {
            let geometry = spec.build()?;
            let savings = savings_ratio(spec)?;
            let counted = counted_ratio(&geometry);
            let pattern = composite_pattern(&geometry, &grid, config.steer)?;
            let lobe = metrics::main_lobe(&pattern).ok();
            let psl = metrics::peak_sidelobe_db(&pattern).ok();
            Ok(CompareRow {
                family: spec.kind().name().to_owned(),
                params: spec.params_string(),
                num_sensors: geometry.num_sensors(),
                equivalent_ula: geometry.equivalent_ula_sensors(),
                ratio: savings.ratio.to_string(),
                matches_psl: savings.matches_ula_psl,
                counted_ratio: counted.map(|r| r.to_string()),
                formula_matches_count: counted == Some(savings.ratio),
                mlw: lobe.map(|l| l.width),
                psl_db: psl.map(|p| p.0),
            })
        })
        .collect()
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

pub fn cmd_compare(config: &RunConfig) -> Result<Outcome, CliError> {
    let rows = compare_rows(config)?;
    let contents = match config.format {
        Format::Json => {
            let value = json!({ "metadata": config.metadata(), "rows": rows });
            format!("{}\n", serde_json::to_string_pretty(&value).expect("json"))
        }
        Format::Csv => {
            let mut out = config.csv_header();
            out.push_str("family,params,num_sensors,equivalent_ula,ratio,matches_psl,counted_ratio,mlw,psl_db\n");
            for r in &rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.family,
                    r.params,
                    r.num_sensors,
                    opt(&r.equivalent_ula),
                    r.ratio,
                    if r.matches_psl { "yes" } else { "no" },
                    opt(&r.counted_ratio),
                    opt(&r.mlw),
                    opt(&r.psl_db),
                ));
            }
            out
        }
    };
    let mismatches: Vec<String> = rows
        .iter()
        .filter(|r| !r.formula_matches_count)
        .map(|r| {
            format!(
                "{}({}): closed form {} vs counted {}",
                r.family,
                r.params,
                r.ratio,
                opt(&r.counted_ratio)
            )
        })
        .collect();
    let error = (!mismatches.is_empty()).then(|| CliError {
        code: EXIT_INVARIANT,
        message: format!("savings ratio mismatch: {}", mismatches.join("; ")),
    });
    Ok(Outcome {
        artifacts: vec![Artifact {
            path: config.out.clone(),
            contents,
        }],
        error,
    })
}

/// Runs every configured array against one scene and seed. A single array
/// writes its spectrum to `--out`; a batch writes `<stem>.<family><index>.<ext>`
/// beside it and reports a JSON list.
pub fn cmd_doa(config: &RunConfig) -> Result<Outcome, CliError> {
    let scene_cfg = config
        .scene
        .as_ref()
        .ok_or_else(|| CliError::invalid("doa needs a scene"))?;
    let seed = config.seed.unwrap_or(0);
    let scene = SourceScene::uniform(scene_cfg.sources, scene_cfg.span)?;
    let grid = grid_of(config)?;
    let batch = config.arrays.len() > 1;

    let mut artifacts = Vec::new();
    let mut reports = Vec::new();
    for (i, spec) in config.arrays.iter().enumerate() {
        let geometry = spec.build()?;
        let tol_u = scene_cfg.tol_u.unwrap_or_else(|| default_tolerance(&geometry));
        let snapshots =
            generate_snapshots(&geometry, &scene, scene_cfg.snapshots, scene_cfg.snr_db, seed)?;
        let spectrum = doa_spectrum(&geometry, &snapshots, &grid)?;
        let peaks = detect_peaks(&spectrum, scene_cfg.peaks)?;
        let mut report = evaluate_detection(&peaks.peaks, &scene, tol_u)?;
        report.seed = Some(seed);

        reports.push(json!({
            "array": spec,
            "hits": report.hits,
            "misses": report.misses,
            "false_alarms": report.false_alarms,
            "matched_pairs": report.matched_pairs,
            "tol_u": report.tol_u,
            "seed": report.seed,
            "peak_shortfall": peaks.shortfall,
        }));
        if let Some(path) = &config.out {
            let contents = match config.format {
                Format::Csv => config.csv_header() + &spectrum.to_csv(),
                Format::Json => format!(
                    "{}\n",
                    json!({
                        "metadata": config.metadata(),
                        "array": spec,
                        "u": grid.u_values(),
                        "value": spectrum.values,
                        "peaks": peaks.peaks,
                    })
                ),
            };
            let path = if batch {
                sibling(path, &format!("{}{}", spec.kind().name(), i + 1))
            } else {
                path.clone()
            };
            artifacts.push(Artifact {
                path: Some(path),
                contents,
            });
        }
    }

    let mut report_value = if batch {
        json!({ "runs": reports })
    } else {
        reports.pop().expect("one array")
    };
    report_value["metadata"] = config.metadata();
    report_value["sources"] = json!(scene.directions());
    artifacts.push(Artifact {
        path: config.report.clone(),
        contents: format!("{}\n", serde_json::to_string_pretty(&report_value).expect("json")),
    });
    Ok(Outcome::ok(artifacts))
}

pub fn dispatch(config: &RunConfig) -> Result<Outcome, CliError> {
    match config.command {
        CommandKind::Geometry => cmd_geometry(config),
        CommandKind::Pattern => cmd_pattern(config),
        CommandKind::Compare => cmd_compare(config),
        CommandKind::Doa => cmd_doa(config),
    }
}

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(contents.as_bytes())?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Parses nothing; runs an already parsed command line and returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = RunConfig::from_cli(cli).and_then(|config| dispatch(&config));
    let outcome = match result {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("error: {e}");
            return e.code;
        }
    };
    let stdout = std::io::stdout();
    for artifact in &outcome.artifacts {
        let written = match &artifact.path {
            Some(path) => write_atomic(path, &artifact.contents),
            None => stdout.lock().write_all(artifact.contents.as_bytes()),
        };
        if let Err(e) = written {
            eprintln!("error: writing output: {e}");
            return EXIT_IO;
        }
    }
    match outcome.error {
        Some(e) => {
            eprintln!("error: {e}");
            e.code
        }
        None => EXIT_OK,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("arraylab").chain(args.iter().copied())).unwrap()
    }

    fn config(args: &[&str]) -> Result<RunConfig, CliError> {
        RunConfig::from_cli(&parse(args))
    }

    #[test]
    fn array_flags() {
        let c = config(&["geometry", "--kind", "sca", "--m", "3", "--n", "4", "--p", "2", "--q", "2"]).unwrap();
        assert_eq!(c.arrays, vec![ArraySpec::Sca { m: 3, n: 4, p: 2, q: 2 }]);
        assert_eq!(c.format, Format::Json);

        let e = config(&["geometry", "--kind", "sca", "--m", "3", "--n", "4", "--p", "2"]).unwrap_err();
        assert_eq!(e.code, EXIT_INVALID);
        assert!(e.message.contains("--q"), "{}", e.message);

        let e = config(&["geometry", "--kind", "csa", "--m", "4", "--n", "5", "--p", "2"]).unwrap_err();
        assert!(e.message.contains("--p does not apply"), "{}", e.message);

        let c = config(&["geometry", "--kind", "ecsa", "--m", "2"]).unwrap();
        assert_eq!(c.arrays[0], ArraySpec::ecsa(2));
        let c = config(&["geometry", "--kind", "mra"]).unwrap();
        assert_eq!(c.arrays[0], ArraySpec::bundled_mra());
    }

    #[test]
    fn geometry_output() {
        let c = config(&["geometry", "--kind", "ula", "--k", "1"]).unwrap();
        let out = cmd_geometry(&c).unwrap();
        let v: Value = serde_json::from_str(&out.artifacts[0].contents).unwrap();
        assert_eq!(v["positions"], json!([0]));
        assert_eq!(v["metadata"]["config"]["command"], "geometry");

        let c = config(&["geometry", "--kind", "sca", "--m", "4", "--n", "6", "--p", "2", "--q", "2"]).unwrap();
        let e = cmd_geometry(&c).unwrap_err();
        assert_eq!(e.code, EXIT_INVALID);
        assert!(e.message.contains("M and N must be coprime"));
    }

    #[test]
    fn grid_and_steer_validation() {
        assert!(config(&["pattern", "--kind", "ula", "--k", "4", "--grid", "1"]).is_err());
        assert!(config(&["pattern", "--kind", "ula", "--k", "4", "--steer", "1.5"]).is_err());
        let c = config(&["pattern", "--kind", "ula", "--k", "4", "--steer", "-0.5"]).unwrap();
        assert_eq!(c.steer, -0.5);
    }

    #[test]
    fn pattern_with_subarrays() {
        let c = config(&[
            "pattern", "--kind", "sca", "--m", "3", "--n", "4", "--p", "2", "--q", "2", "--grid", "65",
            "--with-subarrays", "--out", "/tmp/x/fig3.csv",
        ])
        .unwrap();
        let out = cmd_pattern(&c).unwrap();
        assert_eq!(out.artifacts.len(), 4);
        assert_eq!(out.artifacts[2].path.as_deref(), Some(Path::new("/tmp/x/fig3.sub2.csv")));
        let body: Vec<&str> = out.artifacts[0]
            .contents
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect();
        assert_eq!(body[0], "u,magnitude,magnitude_db");
        assert_eq!(body.len(), 66);
    }

    #[test]
    fn compare_single_ula() {
        let c = config(&["compare", "--grid", "1024"]).unwrap();
        assert_eq!(c.arrays.len(), 5);
        let mut c = c;
        c.arrays = vec![ArraySpec::Ula { k: 16 }];
        let rows = compare_rows(&c).unwrap();
        assert_eq!(rows[0].ratio, "1");
        assert!(rows[0].formula_matches_count);
        assert!(cmd_compare(&c).unwrap().error.is_none());
    }

    #[test]
    fn compare_flags_ecsa_mismatch() {
        let mut c = config(&["compare", "--grid", "1024"]).unwrap();
        c.arrays = vec![ArraySpec::ecsa(2), ArraySpec::Mcsa { m: 8 }];
        let out = cmd_compare(&c).unwrap();
        let e = out.error.unwrap();
        assert_eq!(e.code, EXIT_INVARIANT);
        assert!(e.message.contains("ecsa"));
        assert!(!e.message.contains("mcsa"));
        assert_eq!(out.artifacts[0].contents.lines().filter(|l| !l.starts_with('#')).count(), 3);
    }

    #[test]
    fn doa_scene_validation() {
        let base = ["doa", "--kind", "ula", "--k", "8"];
        let with = |extra: &[&str]| {
            let args: Vec<&str> = base.iter().chain(extra).copied().collect();
            config(&args)
        };
        assert!(with(&["--span", "1.2"]).is_err());
        assert!(with(&["--snapshots", "0"]).is_err());
        assert!(with(&["--tol", "0"]).is_err());
        let c = with(&["--sources", "1", "--snr-db", "30"]).unwrap();
        assert_eq!(c.scene.as_ref().unwrap().tol_u, None);
        assert_eq!(c.seed, Some(0));
        assert_eq!(c.rng, Some(RNG_NAME));
    }

    #[test]
    fn doa_single_source_hit() {
        let c = config(&["doa", "--kind", "ula", "--k", "8", "--sources", "1", "--snr-db", "30", "--grid", "1024"])
            .unwrap();
        let out = cmd_doa(&c).unwrap();
        let v: Value = serde_json::from_str(&out.artifacts[0].contents).unwrap();
        assert_eq!(v["hits"], 1);
        assert_eq!(v["seed"], 0);
    }

    #[test]
    fn doa_batch_shares_scene() {
        let dir = tempfile::tempdir().unwrap();
        let specs = dir.path().join("specs.json");
        fs::write(&specs, r#"[{"kind":"ula","params":{"k":8}},{"kind":"basic_csa","params":{"m":3,"n":4}}]"#).unwrap();
        let out_path = dir.path().join("doa.csv");
        let c = config(&[
            "doa", "--specs", specs.to_str().unwrap(), "--sources", "2", "--span", "0.5", "--snr-db", "20",
            "--grid", "512", "--seed", "3", "--out", out_path.to_str().unwrap(),
        ])
        .unwrap();
        let out = cmd_doa(&c).unwrap();
        assert_eq!(out.artifacts.len(), 3);
        assert_eq!(out.artifacts[1].path.as_deref(), Some(dir.path().join("doa.basic_csa2.csv").as_path()));
        let v: Value = serde_json::from_str(&out.artifacts[2].contents).unwrap();
        assert_eq!(v["runs"].as_array().unwrap().len(), 2);
        assert_eq!(v["runs"][0]["tol_u"], 0.25);
        assert_eq!(v["runs"][1]["seed"], 3);

        let e = config(&["doa", "--specs", specs.to_str().unwrap(), "--kind", "ula"]).unwrap_err();
        assert!(e.message.contains("--specs"));
    }

    #[test]
    fn atomic_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_atomic(&path, "x\n").unwrap();
        write_atomic(&path, "y\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "y\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
