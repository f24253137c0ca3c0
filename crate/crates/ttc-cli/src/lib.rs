//! Experiment harness behind the `ttc` binary.
//!
//! This crate owns everything between the command line and the completion
//! library: configuration resolution (flat `key=value` files plus flag
//! overrides, flags winning), input loading by kind, mask sampling or
//! loading, scheme dispatch, CSV emission (metrics, objective/error trace,
//! weight diagnostics), the synthetic benchmark sweep, and tensorization
//! plan inspection.
//!
//! Everything here is deterministic given the resolved configuration: RNG
//! use is seeded, CSV bodies contain no timestamps (wall-clock seconds
//! appear only in the metrics CSV's dedicated column), and the completion
//! engine itself is scheduling-independent.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ttc::completion::{
    complete, complete_pipeline_with_probe, Augmentation, CompletionConfig, CompletionResult,
    ProbeEvent, RankSpec, Scheme, Tensorization,
};
use ttc::error::{Error, Result};
use ttc::io;
use ttc::mask::{sample_mask, ObservationMask};
use ttc::metrics::{report, rse, MetricsReport};
use ttc::synth::{gen_synthetic, SyntheticSpec};
use ttc::tensor::DenseTensor;

/// How many missing entries the diagnostics CSV samples per run.
pub const DIAGNOSTIC_SAMPLE: usize = 1000;

pub const METRICS_HEADER: &str = "dataset,missing_rate,scheme,rse,psnr,ssim,iters,seconds";
pub const TRACE_HEADER: &str = "iteration,objective,rse";
pub const DIAGNOSTICS_HEADER: &str = "entry_id,weight,abs_error,iteration";

// ---------------------------------------------------------------------------
// Command-line surface
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "ttc",
    version,
    about = "Low-rank tensor completion in the tensor-train format"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run one completion experiment (config file and/or flags).
    Complete(CompleteArgs),
    /// Sweep missing rates x schemes on a seeded synthetic low-rank tensor.
    SynthBench(SynthBenchArgs),
    /// Print a tensorization plan; optionally write the augmented tensor.
    AugmentInspect(InspectArgs),
    /// Score an estimate against a reference tensor or image.
    Metrics(MetricsArgs),
}

/// Flags mirror the config-file keys (the key is the long flag name);
/// explicit flags override file entries.
#[derive(Debug, Default, Args)]
pub struct CompleteArgs {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ground-truth input (PGM, PPM, or DT1).
    #[arg(long)]
    pub input: Option<String>,
    /// Input kind: pgm | ppm | dt1 (default: from the extension).
    #[arg(long)]
    pub input_kind: Option<String>,
    /// DM1 observation mask; replaces seeded sampling.
    #[arg(long)]
    pub mask: Option<String>,
    /// Fraction of entries to hide, in [0, 1).
    #[arg(long)]
    pub missing_rate: Option<f64>,
    /// Seed for mask sampling and factor initialization.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tensorization: none | reshape | ka | oka.
    #[arg(long)]
    pub augment: Option<String>,
    /// Completion scheme: tmac-tt | twmac-tt.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Rank cap ("20") or explicit per-mode list ("4,8,4").
    #[arg(long)]
    pub ranks: Option<String>,
    /// Confidence-weight ceiling.
    #[arg(long)]
    pub c: Option<f64>,
    /// Confidence-weight residual sensitivity.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Ridge strength on row factors.
    #[arg(long)]
    pub lambda_u: Option<f64>,
    /// Ridge strength on column factors.
    #[arg(long)]
    pub lambda_v: Option<f64>,
    /// Relative-change stop threshold.
    #[arg(long)]
    pub th: Option<f64>,
    /// Outer iteration cap.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Dataset label for CSV rows (default: input file stem).
    #[arg(long)]
    pub dataset: Option<String>,
    /// Where to write the estimate (.pgm/.ppm for images, DT1 otherwise).
    #[arg(long)]
    pub estimate_out: Option<String>,
    /// Where to write the one-row metrics CSV.
    #[arg(long)]
    pub metrics_out: Option<String>,
    /// Where to write the per-iteration objective/error trace CSV.
    #[arg(long)]
    pub trace_out: Option<String>,
    /// Where to write the weight/error diagnostics CSV.
    #[arg(long)]
    pub diagnostics_out: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthBenchArgs {
    /// Tensor order N (>= 3).
    #[arg(long)]
    pub order: usize,
    /// Uniform extent I.
    #[arg(long)]
    pub extent: usize,
    /// Uniform generation rank r.
    #[arg(long)]
    pub rank: usize,
    /// Comma-separated missing rates, each in [0, 1).
    #[arg(long, value_delimiter = ',', required = true)]
    pub missing_rates: Vec<f64>,
    /// Comma-separated schemes (tmac-tt, twmac-tt).
    #[arg(long, value_delimiter = ',', required = true)]
    pub schemes: Vec<String>,
    /// Seed for generation, masking, and factor initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rank cap or per-mode list (default: the generation rank).
    #[arg(long)]
    pub ranks: Option<String>,
    /// Confidence-weight ceiling.
    #[arg(long)]
    pub c: Option<f64>,
    /// Confidence-weight residual sensitivity.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Ridge strength on row factors.
    #[arg(long)]
    pub lambda_u: Option<f64>,
    /// Ridge strength on column factors.
    #[arg(long)]
    pub lambda_v: Option<f64>,
    /// Relative-change stop threshold.
    #[arg(long)]
    pub th: Option<f64>,
    /// Outer iteration cap.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Also write the CSV here (it always goes to stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Tensorization to inspect: reshape | ka | oka.
    #[arg(long)]
    pub augment: String,
    /// Spatial rows (ignored with --input).
    #[arg(long)]
    pub rows: Option<usize>,
    /// Spatial columns (ignored with --input).
    #[arg(long)]
    pub cols: Option<usize>,
    /// Channel extent (ignored with --input).
    #[arg(long)]
    pub channels: Option<usize>,
    /// Take the shape from this tensor/image instead of --rows/--cols.
    #[arg(long)]
    pub input: Option<String>,
    /// Write the augmented tensor here in DT1 format (needs --input).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Estimate tensor/image.
    #[arg(long)]
    pub estimate: String,
    /// Reference tensor/image.
    #[arg(long)]
    pub truth: String,
    /// Kind override for the estimate: pgm | ppm | dt1.
    #[arg(long)]
    pub estimate_kind: Option<String>,
    /// Kind override for the reference: pgm | ppm | dt1.
    #[arg(long)]
    pub truth_kind: Option<String>,
}

// ---------------------------------------------------------------------------
// Enum labels and parsers (shared by flags and config files)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Pgm,
    Ppm,
    Dt1,
}

pub fn parse_input_kind(s: &str) -> Result<InputKind> {
    match s {
        "pgm" => Ok(InputKind::Pgm),
        "ppm" => Ok(InputKind::Ppm),
        "dt1" => Ok(InputKind::Dt1),
        other => Err(Error::InvalidArgument(format!(
            "unknown input kind {other:?} (expected pgm, ppm, or dt1)"
        ))),
    }
}

/// Infers the input kind from a file extension.
pub fn kind_from_path(path: &Path) -> Result<InputKind> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pgm") => Ok(InputKind::Pgm),
        Some("ppm") => Ok(InputKind::Ppm),
        Some("dt1") => Ok(InputKind::Dt1),
        _ => Err(Error::InvalidArgument(format!(
            "cannot infer input kind from {path:?}; pass input-kind=pgm|ppm|dt1"
        ))),
    }
}

pub fn parse_scheme(s: &str) -> Result<Scheme> {
    match s {
        "tmac-tt" => Ok(Scheme::ModeWeighted),
        "twmac-tt" => Ok(Scheme::ElementWeighted),
        other => Err(Error::InvalidArgument(format!(
            "unknown scheme {other:?} (expected tmac-tt or twmac-tt)"
        ))),
    }
}

pub fn scheme_label(s: Scheme) -> &'static str {
    match s {
        Scheme::ModeWeighted => "tmac-tt",
        Scheme::ElementWeighted => "twmac-tt",
    }
}

pub fn parse_augmentation(s: &str) -> Result<Augmentation> {
    match s {
        "none" => Ok(Augmentation::None),
        "reshape" => Ok(Augmentation::Reshape),
        "ka" => Ok(Augmentation::Ka),
        "oka" => Ok(Augmentation::Oka),
        other => Err(Error::InvalidArgument(format!(
            "unknown augmentation {other:?} (expected none, reshape, ka, or oka)"
        ))),
    }
}

pub fn augmentation_label(a: Augmentation) -> &'static str {
    match a {
        Augmentation::None => "none",
        Augmentation::Reshape => "reshape",
        Augmentation::Ka => "ka",
        Augmentation::Oka => "oka",
    }
}

/// A single integer is a rank cap; a comma-separated list gives explicit
/// per-mode ranks.
pub fn parse_ranks(s: &str) -> Result<RankSpec> {
    let values: Vec<usize> = s
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("rank {tok:?} is not an integer")))
        })
        .collect::<Result<_>>()?;
    match values.as_slice() {
        [] => Err(Error::InvalidArgument("empty rank list".into())),
        [cap] => Ok(RankSpec::Max(*cap)),
        _ => Ok(RankSpec::PerMode(values)),
    }
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub input: PathBuf,
    pub input_kind: InputKind,
    pub mask: Option<PathBuf>,
    pub missing_rate: f64,
    pub seed: u64,
    pub augmentation: Augmentation,
    pub scheme: Scheme,
    pub ranks: RankSpec,
    pub c: f64,
    pub gamma: f64,
    pub lambda_u: f64,
    pub lambda_v: f64,
    pub threshold: f64,
    pub max_iters: usize,
    pub dataset: String,
    pub estimate_out: Option<PathBuf>,
    pub metrics_out: Option<PathBuf>,
    pub trace_out: Option<PathBuf>,
    pub diagnostics_out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn completion_config(&self) -> CompletionConfig {
        CompletionConfig {
            ranks: self.ranks.clone(),
            lambda_u: self.lambda_u,
            lambda_v: self.lambda_v,
            c: self.c,
            gamma: self.gamma,
            threshold: self.threshold,
            max_iters: self.max_iters,
            scheme: self.scheme,
            seed: self.seed,
        }
    }
}

const EXPERIMENT_KEYS: &[&str] = &[
    "input",
    "input-kind",
    "mask",
    "missing-rate",
    "seed",
    "augment",
    "scheme",
    "ranks",
    "c",
    "gamma",
    "lambda-u",
    "lambda-v",
    "th",
    "max-iters",
    "dataset",
    "estimate-out",
    "metrics-out",
    "trace-out",
    "diagnostics-out",
];

fn parsed<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
            Error::InvalidArgument(format!("value {raw:?} for {key} does not parse"))
        }),
    }
}

/// Interprets a merged key → value map as an experiment description,
/// applying defaults for everything optional.
pub fn experiment_from_map(map: &BTreeMap<String, String>) -> Result<ExperimentConfig> {
    for key in map.keys() {
        if !EXPERIMENT_KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "unknown configuration key {key:?}"
            )));
        }
    }
    let input = PathBuf::from(
        map.get("input")
            .ok_or_else(|| Error::InvalidArgument("input is required".into()))?,
    );
    let input_kind = match map.get("input-kind") {
        Some(s) => parse_input_kind(s)?,
        None => kind_from_path(&input)?,
    };
    let mask = map.get("mask").map(PathBuf::from);
    let missing_rate = parsed::<f64>(map, "missing-rate")?;
    if mask.is_none() && missing_rate.is_none() {
        return Err(Error::InvalidArgument(
            "either missing-rate or a mask file is required".into(),
        ));
    }
    let seed = parsed::<u64>(map, "seed")?.unwrap_or(0);
    let scheme = match map.get("scheme") {
        Some(s) => parse_scheme(s)?,
        None => Scheme::ElementWeighted,
    };
    let defaults = CompletionConfig::new(scheme, seed);
    let dataset = match map.get("dataset") {
        Some(d) => d.clone(),
        None => input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string()),
    };
    Ok(ExperimentConfig {
        input_kind,
        mask,
        missing_rate: missing_rate.unwrap_or(0.0),
        seed,
        augmentation: match map.get("augment") {
            Some(a) => parse_augmentation(a)?,
            None => Augmentation::None,
        },
        scheme,
        ranks: match map.get("ranks") {
            Some(r) => parse_ranks(r)?,
            None => defaults.ranks.clone(),
        },
        c: parsed(map, "c")?.unwrap_or(defaults.c),
        gamma: parsed(map, "gamma")?.unwrap_or(defaults.gamma),
        lambda_u: parsed(map, "lambda-u")?.unwrap_or(defaults.lambda_u),
        lambda_v: parsed(map, "lambda-v")?.unwrap_or(defaults.lambda_v),
        threshold: parsed(map, "th")?.unwrap_or(defaults.threshold),
        max_iters: parsed(map, "max-iters")?.unwrap_or(defaults.max_iters),
        dataset,
        estimate_out: map.get("estimate-out").map(PathBuf::from),
        metrics_out: map.get("metrics-out").map(PathBuf::from),
        trace_out: map.get("trace-out").map(PathBuf::from),
        diagnostics_out: map.get("diagnostics-out").map(PathBuf::from),
        input,
    })
}

/// Turns the `complete` flags into config-file form so file entries and
/// flags resolve through one path (flags win on merge).
pub fn complete_args_to_map(args: &CompleteArgs) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    let mut put = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    };
    put("input", args.input.clone());
    put("input-kind", args.input_kind.clone());
    put("mask", args.mask.clone());
    put("missing-rate", args.missing_rate.map(|v| v.to_string()));
    put("seed", args.seed.map(|v| v.to_string()));
    put("augment", args.augment.clone());
    put("scheme", args.scheme.clone());
    put("ranks", args.ranks.clone());
    put("c", args.c.map(|v| v.to_string()));
    put("gamma", args.gamma.map(|v| v.to_string()));
    put("lambda-u", args.lambda_u.map(|v| v.to_string()));
    put("lambda-v", args.lambda_v.map(|v| v.to_string()));
    put("th", args.th.map(|v| v.to_string()));
    put("max-iters", args.max_iters.map(|v| v.to_string()));
    put("dataset", args.dataset.clone());
    put("estimate-out", args.estimate_out.clone());
    put("metrics-out", args.metrics_out.clone());
    put("trace-out", args.trace_out.clone());
    put("diagnostics-out", args.diagnostics_out.clone());
    map
}

/// Resolves the `complete` subcommand: config file first, flags override.
pub fn resolve_experiment(args: &CompleteArgs) -> Result<ExperimentConfig> {
    let mut map = match &args.config {
        Some(path) => ttc::config::parse_config_bytes(&ttc::io::read_bytes(path)?)?,
        None => BTreeMap::new(),
    };
    map.extend(complete_args_to_map(args));
    experiment_from_map(&map)
}

// ---------------------------------------------------------------------------
// Running experiments
// ---------------------------------------------------------------------------

/// Loads an input by kind, checking that the file matches the declaration.
pub fn load_input(path: &Path, kind: InputKind) -> Result<DenseTensor> {
    match kind {
        InputKind::Dt1 => io::load_dt1(path),
        InputKind::Pgm | InputKind::Ppm => {
            let t = io::load_image(path)?;
            let want_order = if kind == InputKind::Pgm { 2 } else { 3 };
            if t.order() != want_order {
                return Err(Error::InvalidArgument(format!(
                    "{path:?} is a {}-way image but was declared {}",
                    t.order(),
                    if want_order == 2 { "pgm" } else { "ppm" }
                )));
            }
            Ok(t)
        }
    }
}

/// Everything a finished experiment produced.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub metrics: MetricsReport,
    pub iterations: usize,
    pub seconds: f64,
    pub input_dims: Vec<usize>,
    pub augmented_dims: Vec<usize>,
    pub missing_fraction: f64,
    pub estimate: DenseTensor,
}

/// One metrics CSV row.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub dataset: String,
    pub missing_rate: f64,
    pub scheme: Scheme,
    pub report: MetricsReport,
    pub iters: usize,
    pub seconds: f64,
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let ssim = r
            .report
            .ssim
            .map_or_else(|| "NaN".to_string(), |v| v.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.3}",
            r.dataset,
            r.missing_rate,
            scheme_label(r.scheme),
            r.report.rse,
            r.report.psnr,
            ssim,
            r.iters,
            r.seconds
        )
        .unwrap();
    }
    out
}

pub fn trace_csv(rows: &[(usize, f64, f64)]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for (iteration, objective, err) in rows {
        writeln!(out, "{iteration},{objective},{err}").unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsRow {
    pub entry_id: usize,
    pub weight: f64,
    pub abs_error: f64,
    pub iteration: usize,
}

pub fn diagnostics_csv(rows: &[DiagnosticsRow]) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{},{}", r.entry_id, r.weight, r.abs_error, r.iteration).unwrap();
    }
    out
}

/// Deterministic sample of missing positions (flat offsets, ascending).
pub fn sample_missing_offsets(mask: &ObservationMask, count: usize, seed: u64) -> Vec<usize> {
    let mut offsets = mask.missing_offsets();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = count.min(offsets.len());
    let (picked, _) = offsets.partial_shuffle(&mut rng, take);
    let mut picked = picked.to_vec();
    picked.sort_unstable();
    picked
}

/// Writes the estimate in the format implied by the extension: `.pgm`/
/// `.ppm` as an image, anything else as DT1.
pub fn save_estimate(estimate: &DenseTensor, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") | Some("ppm") => io::save_image(estimate, path),
        _ => io::save_dt1(estimate, path),
    }
}

/// Runs a resolved experiment end to end: load, mask, complete, score,
/// write the requested artifacts.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let truth = load_input(&config.input, config.input_kind)?;
    let mask = match &config.mask {
        Some(path) => {
            let m = io::load_dm1(path)?;
            if m.dims() != truth.dims() {
                return Err(Error::InvalidArgument(format!(
                    "mask shape {:?} does not match input shape {:?}",
                    m.dims(),
                    truth.dims()
                )));
            }
            m
        }
        None => sample_mask(truth.dims(), config.missing_rate, config.seed)?,
    };
    let missing_fraction = mask.missing_count() as f64 / mask.len() as f64;
    let cc = config.completion_config();

    let want_trace = config.trace_out.is_some();
    let want_diag = config.diagnostics_out.is_some();
    let mut trace_rows: Vec<(usize, f64, f64)> = Vec::new();
    let mut diag_rows: Vec<DiagnosticsRow> = Vec::new();

    let started = Instant::now();
    let result = if want_trace || want_diag {
        // Plan the same tensorization the pipeline will use, so snapshots
        // can be mapped back to the input geometry.
        let tz = Tensorization::plan(truth.dims(), config.augmentation)?;
        let aug_truth = tz.apply(&truth)?;
        let sampled = if want_diag {
            let aug_mask = tz.apply_mask(&mask)?;
            sample_missing_offsets(&aug_mask, DIAGNOSTIC_SAMPLE, config.seed.wrapping_add(1))
        } else {
            Vec::new()
        };
        let mut probe = |event: ProbeEvent<'_>| {
            let ProbeEvent::IterationEnd {
                iteration,
                estimate,
                objective,
                weights,
                ..
            } = event
            else {
                return;
            };
            if want_trace {
                let back = tz
                    .invert(estimate)
                    .expect("inverting a plan-consistent estimate");
                let err = rse(&back, &truth).expect("estimate and truth shapes match");
                trace_rows.push((iteration, objective, err));
            }
            if let Some(ws) = weights.filter(|_| want_diag) {
                for &p in &sampled {
                    let weight =
                        ws.iter().map(|w| w.mat.as_slice()[p]).sum::<f64>() / ws.len() as f64;
                    diag_rows.push(DiagnosticsRow {
                        entry_id: p,
                        weight,
                        abs_error: (estimate.as_slice()[p] - aug_truth.as_slice()[p]).abs(),
                        iteration,
                    });
                }
            }
        };
        complete_pipeline_with_probe(&truth, &mask, config.augmentation, &cc, Some(&mut probe))?
    } else {
        complete_pipeline_with_probe(&truth, &mask, config.augmentation, &cc, None)?
    };
    let seconds = started.elapsed().as_secs_f64();
    let metrics = report(&result.estimate, &truth)?;

    if let Some(path) = &config.estimate_out {
        save_estimate(&result.estimate, path)?;
    }
    if let Some(path) = &config.metrics_out {
        let row = MetricsRow {
            dataset: config.dataset.clone(),
            missing_rate: missing_fraction,
            scheme: config.scheme,
            report: metrics,
            iters: result.iterations,
            seconds,
        };
        ttc::io::write_bytes(path, metrics_csv(std::slice::from_ref(&row)))?;
    }
    if let Some(path) = &config.trace_out {
        ttc::io::write_bytes(path, trace_csv(&trace_rows))?;
    }
    if let Some(path) = &config.diagnostics_out {
        ttc::io::write_bytes(path, diagnostics_csv(&diag_rows))?;
    }
    Ok(ExperimentOutput {
        metrics,
        iterations: result.iterations,
        seconds,
        input_dims: truth.dims().to_vec(),
        augmented_dims: result.augmented_dims,
        missing_fraction,
        estimate: result.estimate,
    })
}

// ---------------------------------------------------------------------------
// Synthetic benchmark
// ---------------------------------------------------------------------------

/// Sweep description for the synthetic benchmark.
#[derive(Debug, Clone)]
pub struct SynthBenchSpec {
    pub order: usize,
    pub extent: usize,
    pub rank: usize,
    pub missing_rates: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    /// Completion ranks (default: cap at the generation rank).
    pub ranks: RankSpec,
    pub c: f64,
    pub gamma: f64,
    pub lambda_u: f64,
    pub lambda_v: f64,
    pub threshold: f64,
    pub max_iters: usize,
}

impl SynthBenchSpec {
    pub fn new(
        order: usize,
        extent: usize,
        rank: usize,
        missing_rates: Vec<f64>,
        schemes: Vec<Scheme>,
        seed: u64,
    ) -> Self {
        let defaults = CompletionConfig::new(Scheme::ElementWeighted, seed);
        SynthBenchSpec {
            order,
            extent,
            rank,
            missing_rates,
            schemes,
            seed,
            ranks: RankSpec::Max(rank),
            c: defaults.c,
            gamma: defaults.gamma,
            lambda_u: defaults.lambda_u,
            lambda_v: defaults.lambda_v,
            threshold: defaults.threshold,
            max_iters: defaults.max_iters,
        }
    }
}

/// Result of one benchmark cell, kept so callers can assert on numbers
/// without re-parsing the CSV.
#[derive(Debug, Clone)]
pub struct SynthBenchCell {
    pub missing_rate: f64,
    pub scheme: Scheme,
    pub result: CompletionResult,
    pub row: MetricsRow,
}

/// Generates the tensor once (normalized to unit max magnitude so the
/// weight-map defaults for `[0, 1]` data stay meaningful), then sweeps
/// missing rates x schemes. Within a rate, every scheme sees the same mask.
pub fn run_synth_bench_cells(spec: &SynthBenchSpec) -> Result<Vec<SynthBenchCell>> {
    if spec.schemes.is_empty() || spec.missing_rates.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one scheme and one missing rate".into(),
        ));
    }
    let raw = gen_synthetic(&SyntheticSpec {
        order: spec.order,
        extent: spec.extent,
        rank: spec.rank,
        seed: spec.seed,
    })?;
    let max_abs = raw
        .as_slice()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let truth = DenseTensor::from_vec(
        raw.dims(),
        raw.as_slice().iter().map(|v| v / max_abs).collect(),
    )?;
    let dataset = format!("synth-n{}-i{}-r{}", spec.order, spec.extent, spec.rank);

    let mut cells = Vec::new();
    for (ri, &rate) in spec.missing_rates.iter().enumerate() {
        let mask = sample_mask(truth.dims(), rate, spec.seed.wrapping_add(ri as u64))?;
        for &scheme in &spec.schemes {
            let cc = CompletionConfig {
                ranks: spec.ranks.clone(),
                lambda_u: spec.lambda_u,
                lambda_v: spec.lambda_v,
                c: spec.c,
                gamma: spec.gamma,
                threshold: spec.threshold,
                max_iters: spec.max_iters,
                scheme,
                seed: spec.seed,
            };
            let started = Instant::now();
            let result = complete(&truth, &mask, &cc)?;
            let seconds = started.elapsed().as_secs_f64();
            let row = MetricsRow {
                dataset: dataset.clone(),
                missing_rate: rate,
                scheme,
                report: report(&result.estimate, &truth)?,
                iters: result.iterations,
                seconds,
            };
            cells.push(SynthBenchCell {
                missing_rate: rate,
                scheme,
                result,
                row,
            });
        }
    }
    Ok(cells)
}

/// [`run_synth_bench_cells`] rendered as the metrics CSV.
pub fn run_synth_bench(spec: &SynthBenchSpec) -> Result<String> {
    let cells = run_synth_bench_cells(spec)?;
    let rows: Vec<MetricsRow> = cells.into_iter().map(|c| c.row).collect();
    Ok(metrics_csv(&rows))
}

// ---------------------------------------------------------------------------
// Plan inspection
// ---------------------------------------------------------------------------

/// Renders the tensorization plan for a given input shape as aligned text.
pub fn describe_plan(dims: &[usize], augmentation: Augmentation) -> Result<String> {
    let tz = Tensorization::plan(dims, augmentation)?;
    let mut out = String::new();
    writeln!(out, "tensorization: {}", augmentation_label(augmentation)).unwrap();
    writeln!(out, "input shape:   {dims:?}").unwrap();
    match &tz {
        Tensorization::Direct => {
            writeln!(out, "output shape:  {dims:?} (unchanged)").unwrap();
        }
        Tensorization::Reshape { target, .. } => {
            writeln!(out, "output shape:  {target:?} (order {})", target.len()).unwrap();
        }
        Tensorization::Oka(plan) => {
            writeln!(out, "{:<7}{:<14}{}", "level", "size", "second-block start").unwrap();
            for (t, &(sr, sc)) in plan.sizes.iter().enumerate() {
                let start = if t == 0 {
                    "-".to_string()
                } else {
                    let (xr, xc) = plan.starts[t];
                    format!("({xr}, {xc})")
                };
                writeln!(out, "{:<7}{:<14}{}", t, format!("{sr}x{sc}"), start).unwrap();
            }
            writeln!(
                out,
                "output shape:  {:?} (order {})",
                plan.output_dims,
                plan.output_dims.len()
            )
            .unwrap();
        }
        Tensorization::Ka(plan) => {
            writeln!(out, "{:<7}{}", "level", "size").unwrap();
            for t in 0..=plan.levels {
                let s = plan.rows >> t;
                writeln!(out, "{:<7}{s}x{s}", t).unwrap();
            }
            writeln!(
                out,
                "output shape:  {:?} (order {})",
                plan.output_dims,
                plan.output_dims.len()
            )
            .unwrap();
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Worker-pool cap and dispatch
// ---------------------------------------------------------------------------

/// Applies the `TTC_WORKERS` cap to the process-global worker pool. Must
/// run before any parallel work.
pub fn init_workers() -> Result<Option<usize>> {
    let Some(raw) = std::env::var_os("TTC_WORKERS") else {
        return Ok(None);
    };
    let s = raw
        .to_str()
        .ok_or_else(|| Error::InvalidArgument("TTC_WORKERS is not valid UTF-8".into()))?;
    if s.is_empty() {
        return Ok(None);
    }
    let n: usize = s.parse().map_err(|_| {
        Error::InvalidArgument(format!("TTC_WORKERS must be a positive integer, got {s:?}"))
    })?;
    if n == 0 {
        return Err(Error::InvalidArgument(
            "TTC_WORKERS must be a positive integer".into(),
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("worker pool setup failed: {e}")))?;
    Ok(Some(n))
}

/// Executes a parsed command line, writing human-readable results to
/// stdout. File artifacts go wherever the flags pointed.
pub fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Complete(args) => {
            let config = resolve_experiment(&args)?;
            let out = run_experiment(&config)?;
            println!("dataset:         {}", config.dataset);
            println!("input shape:     {:?}", out.input_dims);
            println!(
                "augmented shape: {:?} (order {})",
                out.augmented_dims,
                out.augmented_dims.len()
            );
            println!(
                "scheme:          {}   augmentation: {}",
                scheme_label(config.scheme),
                augmentation_label(config.augmentation)
            );
            println!(
                "missing:         {}   seed: {}",
                out.missing_fraction, config.seed
            );
            println!(
                "iterations:      {}   seconds: {:.3}",
                out.iterations, out.seconds
            );
            let ssim = out
                .metrics
                .ssim
                .map_or_else(|| "NaN".to_string(), |v| v.to_string());
            println!(
                "rse: {}   psnr: {}   ssim: {}",
                out.metrics.rse, out.metrics.psnr, ssim
            );
            Ok(())
        }
        Cmd::SynthBench(args) => {
            let schemes: Vec<Scheme> = args
                .schemes
                .iter()
                .map(|s| parse_scheme(s))
                .collect::<Result<_>>()?;
            let mut spec = SynthBenchSpec::new(
                args.order,
                args.extent,
                args.rank,
                args.missing_rates.clone(),
                schemes,
                args.seed,
            );
            if let Some(r) = &args.ranks {
                spec.ranks = parse_ranks(r)?;
            }
            if let Some(v) = args.c {
                spec.c = v;
            }
            if let Some(v) = args.gamma {
                spec.gamma = v;
            }
            if let Some(v) = args.lambda_u {
                spec.lambda_u = v;
            }
            if let Some(v) = args.lambda_v {
                spec.lambda_v = v;
            }
            if let Some(v) = args.th {
                spec.threshold = v;
            }
            if let Some(v) = args.max_iters {
                spec.max_iters = v;
            }
            let csv = run_synth_bench(&spec)?;
            print!("{csv}");
            if let Some(path) = &args.out {
                ttc::io::write_bytes(path, &csv)?;
            }
            Ok(())
        }
        Cmd::AugmentInspect(args) => {
            let augmentation = parse_augmentation(&args.augment)?;
            let input = args
                .input
                .as_ref()
                .map(|p| {
                    let path = PathBuf::from(p);
                    let kind = kind_from_path(&path)?;
                    load_input(&path, kind)
                })
                .transpose()?;
            let dims: Vec<usize> = match (&input, args.rows, args.cols) {
                (Some(t), _, _) => t.dims().to_vec(),
                (None, Some(r), Some(c)) => match args.channels {
                    Some(l) => vec![r, c, l],
                    None => vec![r, c],
                },
                _ => {
                    return Err(Error::InvalidArgument(
                        "pass --input or both --rows and --cols".into(),
                    ))
                }
            };
            print!("{}", describe_plan(&dims, augmentation)?);
            if let Some(out) = &args.out {
                let t = input.ok_or_else(|| {
                    Error::InvalidArgument("--out needs --input to augment".into())
                })?;
                let tz = Tensorization::plan(t.dims(), augmentation)?;
                io::save_dt1(&tz.apply(&t)?, out)?;
                println!("augmented tensor written to {}", out.display());
            }
            Ok(())
        }
        Cmd::Metrics(args) => {
            let load = |spec: &str, kind: &Option<String>| -> Result<DenseTensor> {
                let path = PathBuf::from(spec);
                let kind = match kind {
                    Some(k) => parse_input_kind(k)?,
                    None => kind_from_path(&path)?,
                };
                load_input(&path, kind)
            };
            let estimate = load(&args.estimate, &args.estimate_kind)?;
            let truth = load(&args.truth, &args.truth_kind)?;
            let m = report(&estimate, &truth)?;
            let ssim = m.ssim.map_or_else(|| "NaN".to_string(), |v| v.to_string());
            println!("rse,psnr,ssim");
            println!("{},{},{}", m.rse, m.psnr, ssim);
            Ok(())
        }
    }
}
