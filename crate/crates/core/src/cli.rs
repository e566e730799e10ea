//! Command implementations behind the `gbbvpa` binary.
//!
//! Every command resolves its configuration as flags over an optional JSON file over
//! defaults, runs, and writes a [`RunManifest`] beside its outputs. `replay` re-executes
//! a manifest and checks that the outputs reproduce byte for byte.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayes::{analytic_checks, default_bayes_init, fit_bayes, BayesConfig, IntervalKind, PosteriorSummary};
use crate::bivariate::BivariateSample;
use crate::dataio::{
    density_grid, empirical_survival, pot_transform, read_pairs, write_grid, write_pairs, GridSpec, PairSpec,
    PotConfig, RowFilter, Schema,
};
use crate::dist::{loglik, marginal_survival, pdf_gbb, standardize, survival_geo, LocationScale, Margin, ModelParams, RegionTag};
use crate::em::{default_init, fit_em_with, DiagonalMean, EmConfig, StopRule, ThetaUpdate, TraceEntry};
use crate::error::{Error, Result};
use crate::experiments::{run_study, Method, StudyConfig, StudyReport};
use crate::rng::RngStream;
use crate::sampler::sample_gbb;

#[derive(Debug, Parser)]
#[command(name = "gbbvpa", version, about = "Simulate, fit and evaluate G-BBBVPA bivariate Pareto models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw an off-diagonal sample and write it as CSV (`y1,y2`).
    Simulate(SimulateArgs),
    /// Maximum-likelihood fit by the modified EM algorithm.
    FitEm(FitEmArgs),
    /// Posterior sampling by slice-within-Gibbs.
    FitBayes(FitBayesArgs),
    /// Replicated simulation study (EM or Bayes).
    Study(StudyArgs),
    /// Extract two columns, apply peak-over-threshold, write excesses.
    PrepData(PrepArgs),
    /// Density and survival values at points or on a grid.
    Eval(EvalArgs),
    /// Re-run a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct ModelFlags {
    /// parameters as `theta,alpha0,alpha1,alpha2`
    #[arg(long, value_parser = parse_params)]
    pub params: Option<ModelParams>,
    /// location and scale as `mu1,mu2,sigma1,sigma2`
    #[arg(long, value_parser = parse_loc_scale)]
    pub loc_scale: Option<LocationScale>,
}

#[derive(Debug, Args)]
pub struct DataFlags {
    /// input CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// first column (header name, or 0-based position)
    #[arg(long)]
    pub col1: Option<String>,
    #[arg(long)]
    pub col2: Option<String>,
    /// keep rows where `column=value`
    #[arg(long, value_parser = parse_filter)]
    pub filter: Option<RowFilter>,
    #[arg(long, value_enum)]
    pub schema: Option<SchemaArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemaArg {
    Auto,
    Headerless,
    Abalone,
}

impl From<SchemaArg> for Schema {
    fn from(s: SchemaArg) -> Self {
        match s {
            SchemaArg::Auto => Schema::Auto,
            SchemaArg::Headerless => Schema::Headerless,
            SchemaArg::Abalone => Schema::Abalone,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(short, long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitEmArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataFlags,
    /// location and scale of the data as `mu1,mu2,sigma1,sigma2`
    #[arg(long, value_parser = parse_loc_scale)]
    pub loc_scale: Option<LocationScale>,
    /// starting point `theta,alpha0,alpha1,alpha2`
    #[arg(long, value_parser = parse_params)]
    pub init: Option<ModelParams>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, value_enum)]
    pub theta_update: Option<ThetaUpdateArg>,
    #[arg(long, value_enum)]
    pub diagonal_mean: Option<DiagonalMeanArg>,
    #[arg(long, value_enum)]
    pub stop_rule: Option<StopRuleArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ThetaUpdateArg {
    ImputedCount,
    AsPrinted,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DiagonalMeanArg {
    Marginal,
    Recursion,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StopRuleArg {
    PseudoLoglik,
    Loglik,
    Params,
}

#[derive(Debug, Args)]
pub struct FitBayesArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataFlags,
    #[arg(long, value_parser = parse_loc_scale)]
    pub loc_scale: Option<LocationScale>,
    #[arg(long, value_parser = parse_params)]
    pub init: Option<ModelParams>,
    /// Gamma shape used for all three alphas
    #[arg(long)]
    pub prior_k: Option<f64>,
    /// Gamma scale used for all three alphas
    #[arg(long)]
    pub prior_scale: Option<f64>,
    #[arg(long)]
    pub prior_a: Option<f64>,
    #[arg(long)]
    pub prior_b: Option<f64>,
    #[arg(long)]
    pub total: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long)]
    pub level: Option<f64>,
    /// highest-posterior-density intervals instead of equal-tailed ones
    #[arg(long)]
    pub hpd: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// summary JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// chain CSV
    #[arg(long)]
    pub chain_out: Option<PathBuf>,
    /// check the slice sampler on targets with known moments and exit
    #[arg(long, hide = true)]
    pub self_test: bool,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// JSON study configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// true parameters `theta,alpha0,alpha1,alpha2`
    #[arg(long, value_parser = parse_params)]
    pub truth: Option<ModelParams>,
    /// take the truth from a previous fit-em output (parametric bootstrap)
    #[arg(long, conflicts_with = "truth")]
    pub bootstrap_from: Option<PathBuf>,
    #[arg(short, long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// use 1000 replications
    #[arg(long, conflicts_with = "replications")]
    pub full_scale: bool,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// output directory for report.json, report.txt and report.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Em,
    Bayes,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataFlags,
    #[arg(long, allow_hyphen_values = true)]
    pub threshold1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub threshold2: Option<f64>,
    /// excess pairs CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// marginal empirical survival tables (CSV: margin,y,survival)
    #[arg(long)]
    pub survival_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    /// evaluation point `y1,y2`; repeatable
    #[arg(long, value_parser = parse_pair)]
    pub point: Vec<(f64, f64)>,
    /// grid `lo,hi,steps` on both axes or `y1lo,y1hi,y2lo,y2hi,steps1,steps2`
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<GridSpec>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// where to write the regenerated outputs (defaults to a `replay` folder beside the manifest)
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn numbers(s: &str, expected: &[usize]) -> std::result::Result<Vec<f64>, String> {
    let v: std::result::Result<Vec<f64>, _> = s.split(',').map(|x| x.trim().parse::<f64>()).collect();
    let v = v.map_err(|e| format!("{s:?}: {e}"))?;
    if !expected.contains(&v.len()) {
        return Err(format!("{s:?}: expected {expected:?} comma-separated numbers"));
    }
    Ok(v)
}

fn parse_params(s: &str) -> std::result::Result<ModelParams, String> {
    let v = numbers(s, &[4])?;
    ModelParams::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn parse_loc_scale(s: &str) -> std::result::Result<LocationScale, String> {
    let v = numbers(s, &[4])?;
    LocationScale::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let v = numbers(s, &[2])?;
    Ok((v[0], v[1]))
}

fn parse_grid(s: &str) -> std::result::Result<GridSpec, String> {
    let v = numbers(s, &[3, 6])?;
    let steps = |x: f64| -> std::result::Result<usize, String> {
        if x >= 0.0 && x.fract() == 0.0 {
            Ok(x as usize)
        } else {
            Err(format!("grid steps must be whole numbers, got {x}"))
        }
    };
    Ok(if v.len() == 3 {
        GridSpec::square(v[0], v[1], steps(v[2])?)
    } else {
        GridSpec {
            y1_lo: v[0],
            y1_hi: v[1],
            y2_lo: v[2],
            y2_hi: v[3],
            steps1: steps(v[4])?,
            steps2: steps(v[5])?,
        }
    })
}

fn parse_filter(s: &str) -> std::result::Result<RowFilter, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

// ---------------------------------------------------------------------------
// resolved configurations

fn default_columns() -> PairSpec {
    PairSpec::new("y1", "y2")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub params: ModelParams,
    pub n: usize,
    pub seed: Option<RngStream>,
    pub out: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::new(0.2, 0.1, 0.2, 0.4).expect("valid constant"),
            n: 1000,
            seed: None,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitEmConfig {
    pub data: Option<PathBuf>,
    pub columns: PairSpec,
    pub loc_scale: LocationScale,
    pub init: ModelParams,
    pub em: EmConfig,
    pub out: Option<PathBuf>,
}

impl Default for FitEmConfig {
    fn default() -> Self {
        Self {
            data: None,
            columns: default_columns(),
            loc_scale: LocationScale::default(),
            init: default_init(),
            em: EmConfig::default(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitBayesConfig {
    pub data: Option<PathBuf>,
    pub columns: PairSpec,
    pub loc_scale: LocationScale,
    pub init: ModelParams,
    pub bayes: BayesConfig,
    pub seed: Option<RngStream>,
    pub out: Option<PathBuf>,
    pub chain_out: Option<PathBuf>,
}

impl Default for FitBayesConfig {
    fn default() -> Self {
        Self {
            data: None,
            columns: default_columns(),
            loc_scale: LocationScale::default(),
            init: default_bayes_init(),
            bayes: BayesConfig::default(),
            seed: None,
            out: None,
            chain_out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct StudyRunConfig {
    pub study: StudyConfig,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub data: Option<PathBuf>,
    pub columns: PairSpec,
    pub pot: Option<PotConfig>,
    pub out: Option<PathBuf>,
    pub survival_out: Option<PathBuf>,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            data: None,
            columns: default_columns(),
            pot: None,
            out: None,
            survival_out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub params: ModelParams,
    pub points: Vec<(f64, f64)>,
    pub grid: Option<GridSpec>,
    pub out: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::new(0.2, 0.1, 0.2, 0.4).expect("valid constant"),
            points: Vec::new(),
            grid: None,
            out: None,
        }
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn apply_data_flags(columns: &mut PairSpec, data: &mut Option<PathBuf>, flags: &DataFlags) {
    if let Some(d) = &flags.data {
        // absolute, so a manifest can be replayed from any working directory
        *data = Some(fs::canonicalize(d).unwrap_or_else(|_| d.clone()));
    }
    if let Some(c) = &flags.col1 {
        columns.col1 = c.clone();
    }
    if let Some(c) = &flags.col2 {
        columns.col2 = c.clone();
    }
    if let Some(f) = &flags.filter {
        columns.filter = Some(f.clone());
    }
    if let Some(s) = flags.schema {
        columns.schema = s.into();
    }
}

fn require<'a>(v: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    v.as_ref().ok_or_else(|| Error::Config(format!("missing {what}")))
}

// ---------------------------------------------------------------------------
// manifests

/// Record of one run: enough to reproduce it and to check that it was reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// fully resolved configuration, including every output path
    pub config: serde_json::Value,
    pub seed: Option<RngStream>,
    pub version: String,
    pub wall_time_s: f64,
    /// sha256 of each output, keyed by path. Study reports are hashed with their timing zeroed.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Outputs {
    digests: BTreeMap<String, String>,
}

impl Outputs {
    fn new() -> Self {
        Self {
            digests: BTreeMap::new(),
        }
    }

    /// Write `bytes` to `path` and record the digest of `digest_bytes`.
    fn write_with_digest(&mut self, path: &Path, bytes: &[u8], digest_bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        self.digests.insert(path.display().to_string(), sha256_hex(digest_bytes));
        Ok(())
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        self.write_with_digest(path, bytes, bytes)
    }
}

fn manifest_path_for(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    primary.with_file_name(name)
}

fn finish<C: Serialize>(
    subcommand: &str,
    config: &C,
    seed: Option<RngStream>,
    started: Instant,
    outputs: Outputs,
    manifest_at: &Path,
) -> Result<RunManifest> {
    let manifest = RunManifest {
        subcommand: subcommand.into(),
        config: serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?,
        seed,
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: outputs.digests,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(manifest_at, text).map_err(|e| Error::io(manifest_at, e))?;
    Ok(manifest)
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

// ---------------------------------------------------------------------------
// commands

pub fn resolve_simulate(args: &SimulateArgs) -> Result<SimulateConfig> {
    let mut c: SimulateConfig = load_config(args.config.as_deref())?;
    if let Some(p) = args.model.params {
        c.params = ModelParams {
            loc_scale: c.params.loc_scale,
            ..p
        };
    }
    if let Some(ls) = args.model.loc_scale {
        c.params.loc_scale = ls;
    }
    if let Some(n) = args.n {
        c.n = n;
    }
    if let Some(s) = args.seed {
        c.seed = Some(RngStream::new(s));
    }
    if let Some(o) = &args.out {
        c.out = Some(o.clone());
    }
    if c.seed.is_none() {
        c.seed = Some(RngStream::from_entropy());
    }
    Ok(c)
}

pub fn cmd_simulate(c: &SimulateConfig) -> Result<RunManifest> {
    let started = Instant::now();
    let out = require(&c.out, "--out")?;
    if c.n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let seed = c.seed.ok_or_else(|| Error::Config("missing seed".into()))?;
    let sample = sample_gbb(&c.params, c.n, &mut seed.rng())?;
    let mut buf = Vec::new();
    write_pairs(&mut buf, &sample.pairs())?;
    let mut outputs = Outputs::new();
    outputs.write(out, &buf)?;
    finish("simulate", c, Some(seed), started, outputs, &manifest_path_for(out))
}

fn load_sample(data: &Option<PathBuf>, columns: &PairSpec, ls: LocationScale) -> Result<BivariateSample> {
    let path = require(data, "--data")?;
    let pairs = read_pairs(path, columns)?;
    BivariateSample::new(&pairs, ls)
}

fn theta_update(a: ThetaUpdateArg) -> ThetaUpdate {
    match a {
        ThetaUpdateArg::ImputedCount => ThetaUpdate::ImputedCount,
        ThetaUpdateArg::AsPrinted => ThetaUpdate::AsPrinted,
    }
}

fn diagonal_mean(a: DiagonalMeanArg) -> DiagonalMean {
    match a {
        DiagonalMeanArg::Marginal => DiagonalMean::Marginal,
        DiagonalMeanArg::Recursion => DiagonalMean::Recursion,
    }
}

fn stop_rule(a: StopRuleArg) -> StopRule {
    match a {
        StopRuleArg::PseudoLoglik => StopRule::PseudoLoglik,
        StopRuleArg::Loglik => StopRule::Loglik,
        StopRuleArg::Params => StopRule::Params,
    }
}

pub fn resolve_fit_em(args: &FitEmArgs) -> Result<FitEmConfig> {
    let mut c: FitEmConfig = load_config(args.config.as_deref())?;
    apply_data_flags(&mut c.columns, &mut c.data, &args.data);
    if let Some(ls) = args.loc_scale {
        c.loc_scale = ls;
    }
    if let Some(p) = args.init {
        c.init = p;
    }
    if let Some(t) = args.tol {
        c.em.tol = t;
    }
    if let Some(m) = args.max_iter {
        c.em.max_iter = m;
    }
    if let Some(t) = args.theta_update {
        c.em.theta_update = theta_update(t);
    }
    if let Some(d) = args.diagonal_mean {
        c.em.diagonal_mean = diagonal_mean(d);
    }
    if let Some(s) = args.stop_rule {
        c.em.stop_rule = stop_rule(s);
    }
    if let Some(o) = &args.out {
        c.out = Some(o.clone());
    }
    Ok(c)
}

/// JSON written by `fit-em`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFitOutput {
    pub params: ModelParams,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub trace: Vec<TraceEntry>,
}

pub fn cmd_fit_em(c: &FitEmConfig) -> Result<RunManifest> {
    let started = Instant::now();
    let out = require(&c.out, "--out")?;
    let data = load_sample(&c.data, &c.columns, c.loc_scale)?;
    let fit = fit_em_with(&data, &c.init, &c.em)?;
    let report = EmFitOutput {
        params: fit.params,
        loglik: loglik(&data, &fit.params)?,
        iterations: fit.iterations,
        converged: fit.converged,
        n: data.len(),
        m1: data.m1(),
        m2: data.m2(),
        trace: fit.trace,
    };
    let mut outputs = Outputs::new();
    outputs.write(out, &to_json(&report)?)?;
    finish("fit-em", c, None, started, outputs, &manifest_path_for(out))
}

pub fn resolve_fit_bayes(args: &FitBayesArgs) -> Result<FitBayesConfig> {
    let mut c: FitBayesConfig = load_config(args.config.as_deref())?;
    apply_data_flags(&mut c.columns, &mut c.data, &args.data);
    if let Some(ls) = args.loc_scale {
        c.loc_scale = ls;
    }
    if let Some(p) = args.init {
        c.init = p;
    }
    let prior = &mut c.bayes.prior;
    if let Some(k) = args.prior_k {
        (prior.k0, prior.k1, prior.k2) = (k, k, k);
    }
    if let Some(s) = args.prior_scale {
        (prior.theta0, prior.theta1, prior.theta2) = (s, s, s);
    }
    if let Some(a) = args.prior_a {
        prior.a = a;
    }
    if let Some(b) = args.prior_b {
        prior.b = b;
    }
    if let Some(t) = args.total {
        c.bayes.total = t;
    }
    if let Some(b) = args.burn_in {
        c.bayes.burn_in = b;
    }
    if let Some(w) = args.width {
        c.bayes.slice.width = w;
    }
    if let Some(l) = args.level {
        c.bayes.level = l;
    }
    if args.hpd {
        c.bayes.interval = IntervalKind::Hpd;
    }
    if let Some(s) = args.seed {
        c.seed = Some(RngStream::new(s));
    }
    if let Some(o) = &args.out {
        c.out = Some(o.clone());
    }
    if let Some(o) = &args.chain_out {
        c.chain_out = Some(o.clone());
    }
    if c.seed.is_none() {
        c.seed = Some(RngStream::from_entropy());
    }
    Ok(c)
}

/// JSON written by `fit-bayes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesFitOutput {
    pub summary: PosteriorSummary,
    pub draws: usize,
    pub burn_in: usize,
    pub total: usize,
    pub shrink_exhausted: usize,
    pub n: usize,
}

pub fn cmd_fit_bayes(c: &FitBayesConfig) -> Result<RunManifest> {
    let started = Instant::now();
    let out = require(&c.out, "--out")?;
    let seed = c.seed.ok_or_else(|| Error::Config("missing seed".into()))?;
    let data = load_sample(&c.data, &c.columns, c.loc_scale)?;
    let fit = fit_bayes(&data, &c.init, &c.bayes, seed)?;
    let report = BayesFitOutput {
        summary: fit.summary,
        draws: fit.chain.len(),
        burn_in: fit.chain.burn_in,
        total: fit.chain.total,
        shrink_exhausted: fit.chain.shrink_exhausted,
        n: data.len(),
    };
    let mut outputs = Outputs::new();
    outputs.write(out, &to_json(&report)?)?;
    if let Some(path) = &c.chain_out {
        let mut csv = String::from("draw,theta,alpha0,alpha1,alpha2\n");
        for i in 0..fit.chain.len() {
            let p = fit.chain.draw(i);
            csv.push_str(&format!("{},{},{},{},{}\n", i, p.theta, p.alpha0, p.alpha1, p.alpha2));
        }
        outputs.write(path, csv.as_bytes())?;
    }
    finish("fit-bayes", c, Some(seed), started, outputs, &manifest_path_for(out))
}

/// Run the slice sampler on analytic targets; true when every check passes.
pub fn slice_self_test() -> Result<bool> {
    let mut ok = true;
    for c in analytic_checks(100_000, 7)? {
        let pass = c.within(4.0);
        ok &= pass;
        println!(
            "{} {:<16} mean {:.5} (exact {:.5}, se {:.1e})  var {:.5} (exact {:.5}, se {:.1e})",
            if pass { "PASS" } else { "FAIL" },
            c.target,
            c.mean,
            c.mean_expected,
            c.mean_se,
            c.variance,
            c.variance_expected,
            c.variance_se
        );
    }
    Ok(ok)
}

pub fn resolve_study(args: &StudyArgs) -> Result<StudyRunConfig> {
    let mut c: StudyRunConfig = load_config(args.config.as_deref())?;
    let s = &mut c.study;
    if let Some(m) = args.method {
        s.method = match m {
            MethodArg::Em => Method::Em,
            MethodArg::Bayes => Method::Bayes,
        };
    }
    if let Some(t) = args.truth {
        s.truth = t;
    }
    if let Some(path) = &args.bootstrap_from {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let fit: EmFitOutput =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        s.truth = fit.params;
        if args.n.is_none() {
            s.n = fit.n;
        }
    }
    if let Some(n) = args.n {
        s.n = n;
    }
    if let Some(r) = args.replications {
        s.replications = r;
    }
    if args.full_scale {
        s.replications = 1000;
    }
    if let Some(l) = args.level {
        s.level = l;
    }
    if let Some(seed) = args.seed {
        s.seed = Some(RngStream::new(seed));
    }
    if let Some(j) = args.jobs {
        s.jobs = j;
    }
    if let Some(o) = &args.out {
        c.out = Some(o.clone());
    }
    if c.study.seed.is_none() {
        return Err(Error::Config("study needs --seed (or a seed in the config file)".into()));
    }
    Ok(c)
}

pub fn cmd_study(c: &StudyRunConfig) -> Result<(RunManifest, StudyReport)> {
    let started = Instant::now();
    let dir = require(&c.out, "--out")?;
    let report = run_study(&c.study)?;
    let stable = report.without_timing();
    let mut outputs = Outputs::new();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    outputs.write_with_digest(&dir.join("report.json"), &to_json(&report)?, &to_json(&stable)?)?;
    outputs.write_with_digest(&dir.join("report.txt"), report.to_text().as_bytes(), stable.to_text().as_bytes())?;
    outputs.write_with_digest(&dir.join("report.csv"), report.to_csv().as_bytes(), stable.to_csv().as_bytes())?;
    let manifest = finish("study", c, c.study.seed, started, outputs, &dir.join("manifest.json"))?;
    Ok((manifest, report))
}

pub fn resolve_prep(args: &PrepArgs) -> Result<PrepConfig> {
    let mut c: PrepConfig = load_config(args.config.as_deref())?;
    apply_data_flags(&mut c.columns, &mut c.data, &args.data);
    match (args.threshold1, args.threshold2) {
        (Some(t1), Some(t2)) => c.pot = Some(PotConfig { threshold1: t1, threshold2: t2 }),
        (None, None) => {}
        _ => return Err(Error::Config("give both --threshold1 and --threshold2".into())),
    }
    if let Some(o) = &args.out {
        c.out = Some(o.clone());
    }
    if let Some(o) = &args.survival_out {
        c.survival_out = Some(o.clone());
    }
    Ok(c)
}

pub fn cmd_prep_data(c: &PrepConfig) -> Result<(RunManifest, usize)> {
    let started = Instant::now();
    let out = require(&c.out, "--out")?;
    let path = require(&c.data, "--data")?;
    let pot = c
        .pot
        .ok_or_else(|| Error::Config("thresholds are required (--threshold1, --threshold2)".into()))?;
    let pairs = read_pairs(path, &c.columns)?;
    let result = pot_transform(&pairs, &pot)?;
    let mut buf = Vec::new();
    write_pairs(&mut buf, &result.excesses)?;
    let mut outputs = Outputs::new();
    outputs.write(out, &buf)?;
    if let Some(sp) = &c.survival_out {
        let mut csv = String::from("margin,y,survival\n");
        if !result.excesses.is_empty() {
            for (name, values) in [
                ("1", result.excesses.iter().map(|p| p.0).collect::<Vec<_>>()),
                ("2", result.excesses.iter().map(|p| p.1).collect::<Vec<_>>()),
            ] {
                for (y, s) in empirical_survival(&values)?.points {
                    csv.push_str(&format!("{name},{y},{s}\n"));
                }
            }
        }
        outputs.write(sp, csv.as_bytes())?;
    }
    let manifest = finish("prep-data", c, None, started, outputs, &manifest_path_for(out))?;
    Ok((manifest, result.retained))
}

pub fn resolve_eval(args: &EvalArgs) -> Result<EvalConfig> {
    let mut c: EvalConfig = load_config(args.config.as_deref())?;
    if let Some(p) = args.model.params {
        c.params = ModelParams {
            loc_scale: c.params.loc_scale,
            ..p
        };
    }
    if let Some(ls) = args.model.loc_scale {
        c.params.loc_scale = ls;
    }
    if !args.point.is_empty() {
        c.points = args.point.clone();
    }
    if let Some(g) = args.grid {
        c.grid = Some(g);
    }
    if let Some(o) = &args.out {
        c.out = Some(o.clone());
    }
    Ok(c)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())
}

pub fn cmd_eval(c: &EvalConfig) -> Result<RunManifest> {
    let started = Instant::now();
    let out = require(&c.out, "--out")?;
    let p = &c.params;
    p.validate()?;
    let bytes = match (&c.grid, c.points.is_empty()) {
        (Some(g), true) => {
            let mut buf = Vec::new();
            write_grid(&mut buf, &density_grid(p, g)?).map_err(|e| Error::io(out, e))?;
            buf
        }
        (None, false) => {
            let mut csv = String::from("y1,y2,density,survival_gmo,marginal_survival1,marginal_survival2\n");
            for &(y1, y2) in &c.points {
                let density = match standardize((y1, y2), &p.loc_scale).region {
                    RegionTag::Diagonal => None,
                    _ => Some(pdf_gbb((y1, y2), p)?),
                };
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    y1,
                    y2,
                    fmt_opt(density),
                    survival_geo((y1, y2), p)?,
                    marginal_survival(y1, Margin::First, p)?,
                    marginal_survival(y2, Margin::Second, p)?
                ));
            }
            csv.into_bytes()
        }
        _ => return Err(Error::Config("give either --point (repeatable) or --grid".into())),
    };
    let mut outputs = Outputs::new();
    outputs.write(out, &bytes)?;
    finish("eval", c, None, started, outputs, &manifest_path_for(out))
}

/// Outcome of replaying a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    /// `(original path, expected digest, regenerated digest)`
    pub files: Vec<(String, String, Option<String>)>,
}

impl ReplayOutcome {
    pub fn all_match(&self) -> bool {
        self.files.iter().all(|(_, want, got)| got.as_deref() == Some(want.as_str()))
    }
}

fn redirect(path: &mut Option<PathBuf>, dir: &Path, map: &mut BTreeMap<String, String>) {
    if let Some(p) = path {
        let new = dir.join(p.file_name().unwrap_or_default());
        map.insert(p.display().to_string(), new.display().to_string());
        *p = new;
    }
}

fn from_value<T: DeserializeOwned>(v: &serde_json::Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("manifest config: {e}")))
}

/// Re-run the command recorded in `manifest` with outputs redirected into `out_dir`.
pub fn cmd_replay(manifest: &RunManifest, out_dir: &Path) -> Result<ReplayOutcome> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut moved = BTreeMap::new();
    let fresh = match manifest.subcommand.as_str() {
        "simulate" => {
            let mut c: SimulateConfig = from_value(&manifest.config)?;
            redirect(&mut c.out, out_dir, &mut moved);
            cmd_simulate(&c)?
        }
        "fit-em" => {
            let mut c: FitEmConfig = from_value(&manifest.config)?;
            redirect(&mut c.out, out_dir, &mut moved);
            cmd_fit_em(&c)?
        }
        "fit-bayes" => {
            let mut c: FitBayesConfig = from_value(&manifest.config)?;
            redirect(&mut c.out, out_dir, &mut moved);
            redirect(&mut c.chain_out, out_dir, &mut moved);
            cmd_fit_bayes(&c)?
        }
        "study" => {
            let mut c: StudyRunConfig = from_value(&manifest.config)?;
            if let Some(old) = c.out.take() {
                for name in ["report.json", "report.txt", "report.csv"] {
                    moved.insert(old.join(name).display().to_string(), out_dir.join(name).display().to_string());
                }
            }
            c.out = Some(out_dir.to_path_buf());
            cmd_study(&c)?.0
        }
        "prep-data" => {
            let mut c: PrepConfig = from_value(&manifest.config)?;
            redirect(&mut c.out, out_dir, &mut moved);
            redirect(&mut c.survival_out, out_dir, &mut moved);
            cmd_prep_data(&c)?.0
        }
        "eval" => {
            let mut c: EvalConfig = from_value(&manifest.config)?;
            redirect(&mut c.out, out_dir, &mut moved);
            cmd_eval(&c)?
        }
        other => return Err(Error::Config(format!("unknown subcommand {other:?} in manifest"))),
    };
    let files = manifest
        .outputs
        .iter()
        .map(|(path, want)| {
            let got = moved.get(path).and_then(|new| fresh.outputs.get(new)).cloned();
            (path.clone(), want.clone(), got)
        })
        .collect();
    Ok(ReplayOutcome { files })
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(a) => {
            let m = cmd_simulate(&resolve_simulate(&a)?)?;
            println!("wrote {} (seed {})", m.outputs.keys().next().cloned().unwrap_or_default(), m.seed.map(|s| s.seed).unwrap_or(0));
        }
        Command::FitEm(a) => {
            let c = resolve_fit_em(&a)?;
            cmd_fit_em(&c)?;
            println!("wrote {}", require(&c.out, "--out")?.display());
        }
        Command::FitBayes(a) => {
            if a.self_test {
                return Ok(if slice_self_test()? { 0 } else { 4 });
            }
            let c = resolve_fit_bayes(&a)?;
            cmd_fit_bayes(&c)?;
            println!("wrote {}", require(&c.out, "--out")?.display());
        }
        Command::Study(a) => {
            let (_, report) = cmd_study(&resolve_study(&a)?)?;
            print!("{}", report.to_text());
        }
        Command::PrepData(a) => {
            let (_, retained) = cmd_prep_data(&resolve_prep(&a)?)?;
            println!("retained {retained} pairs");
        }
        Command::Eval(a) => {
            let c = resolve_eval(&a)?;
            cmd_eval(&c)?;
            println!("wrote {}", require(&c.out, "--out")?.display());
        }
        Command::Replay(a) => {
            let text = fs::read_to_string(&a.manifest).map_err(|e| Error::io(&a.manifest, e))?;
            let manifest: RunManifest =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", a.manifest.display())))?;
            let dir = a.out_dir.clone().unwrap_or_else(|| {
                a.manifest.parent().unwrap_or(Path::new(".")).join("replay")
            });
            let outcome = cmd_replay(&manifest, &dir)?;
            for (path, want, got) in &outcome.files {
                let status = if got.as_deref() == Some(want.as_str()) { "match" } else { "DIFFER" };
                println!("{status} {path}");
            }
            return Ok(if outcome.all_match() { 0 } else { 4 });
        }
    }
    Ok(0)
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
