//! `sigma-mono` command line: classification, displacement series,
//! Filippov simulation and the built-in case studies.
//!
//! Exit codes: 0 success, 1 bad input or failed computation, 2 monodromy
//! undetermined (or rejected without `--assume-monodromic`), 3 blow-up
//! hypothesis violated, 4 I/O failure.

pub mod spec;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use sigma_mono_core::cases::BUNDLE_START;
use sigma_mono_core::{
    analyze, case_study_bundle, classify_point, simulate, AnalysisOptions, CaseParams, CaseStudy, Error, Monodromy,
    MonodromyOptions, PiecewiseField, Termination, Verdict,
};

pub use spec::{SpecError, SystemSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_UNDETERMINED: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Default integration tolerance for `simulate` and the case-study runs.
pub const DEFAULT_SIM_TOL: f64 = 1e-12;

/// Environment variable holding the log filter.
pub const LOG_ENV: &str = "SIGMA_MONO_LOG";

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::HypothesisViolation { .. } => EXIT_HYPOTHESIS,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.to_string())
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sigma-mono",
    version,
    about = "Monodromy and stability of Σ-singular points of piecewise polynomial fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify a point of the switching curve.
    Classify(ClassifyArgs),
    /// Displacement series and stability verdict at the origin.
    Displacement(DisplacementArgs),
    /// Integrate a Filippov trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Run one of the built-in case studies.
    CaseStudy(CaseStudyArgs),
}

#[derive(Debug, Args)]
struct Source {
    /// JSON system description.
    #[arg(long, value_name = "FILE", required_unless_present = "case", conflicts_with = "case")]
    spec: Option<PathBuf>,
    /// Use a built-in case study as the system.
    #[arg(long, value_name = "ID", value_parser = parse_case)]
    case: Option<CaseStudy>,
    /// Case-study parameter, e.g. `-p b=-1` or `--params a=1,b=0`.
    #[arg(short = 'p', long = "param", visible_alias = "params", value_name = "NAME=VALUE",
          value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_param, requires = "case")]
    params: Vec<(String, f64)>,
}

#[derive(Debug, Args)]
struct MonodromyFlags {
    /// Assert that no characteristic orbit reaches the point from above.
    #[arg(long)]
    assert_upper: bool,
    #[arg(long)]
    assert_lower: bool,
    /// Highest Lie derivative tried when computing fold orders.
    #[arg(long, value_name = "N")]
    max_order: Option<usize>,
}

#[derive(Debug, Args)]
struct AnalysisFlags {
    /// Number of transported coefficients per half.
    #[arg(long, value_name = "N", value_parser = parse_order)]
    order: Option<usize>,
    #[arg(long, value_name = "T", value_parser = parse_positive)]
    tol: Option<f64>,
    /// Coefficients below this magnitude count as zero.
    #[arg(long, value_name = "T", value_parser = parse_nonnegative)]
    tau_coef: Option<f64>,
    /// Skip the jet-route cross-check of the transport.
    #[arg(long)]
    no_cross_check: bool,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_name = "X,Y", default_value = "0,0", allow_hyphen_values = true, value_parser = parse_point)]
    point: [f64; 2],
    #[command(flatten)]
    mono: MonodromyFlags,
}

#[derive(Debug, Args)]
struct DisplacementArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    analysis: AnalysisFlags,
    #[command(flatten)]
    mono: MonodromyFlags,
    /// Run the pipeline even when monodromy is not established.
    #[arg(long)]
    assume_monodromic: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, visible_alias = "point", value_name = "X,Y", allow_hyphen_values = true, value_parser = parse_point)]
    start: [f64; 2],
    /// Time span.
    #[arg(long = "t", value_name = "T", value_parser = parse_nonnegative)]
    t: f64,
    /// CSV output; events go to `<out>.events.json`.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[arg(long, value_name = "T", default_value_t = DEFAULT_SIM_TOL, value_parser = parse_positive)]
    tol: f64,
}

#[derive(Debug, Args)]
struct CaseStudyArgs {
    /// One of cusp-fold2, cusp-degenerate, fold2-fold4, elementary-degenerate.
    id: String,
    #[arg(short = 'p', long = "param", visible_alias = "params", value_name = "NAME=VALUE",
          value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[command(flatten)]
    analysis: AnalysisFlags,
    /// Run the case over `n` evenly spaced values of one parameter.
    #[arg(long, value_name = "PARAM=LO:HI:N", allow_hyphen_values = true, value_parser = parse_sweep)]
    sweep: Option<Sweep>,
    #[arg(long, value_name = "T", default_value_t = DEFAULT_SIM_TOL, value_parser = parse_positive)]
    sim_tol: f64,
    /// Write the JSON here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|i| if i + 1 == self.n { self.hi } else { self.lo + step * i as f64 }).collect()
    }
}

fn parse_case(s: &str) -> Result<CaseStudy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}

fn parse_order(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive: {s}"))
    }
}

fn parse_nonnegative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be nonnegative: {s}"))
    }
}

pub fn parse_point(s: &str) -> Result<[f64; 2], String> {
    match s.split(',').collect::<Vec<_>>()[..] {
        [x, y] => Ok([parse_f64(x)?, parse_f64(y)?]),
        _ => Err(format!("expected X,Y, got {s:?}")),
    }
}

pub fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    Ok((name.trim().to_string(), parse_f64(value)?))
}

pub fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let (param, range) = s.split_once('=').ok_or_else(|| format!("expected PARAM=LO:HI:N, got {s:?}"))?;
    let parts: Vec<&str> = range.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(format!("expected LO:HI:N, got {range:?}"));
    };
    let n: usize = n.trim().parse().map_err(|_| format!("bad sample count {n:?}"))?;
    if n == 0 {
        return Err("sample count must be at least 1".into());
    }
    Ok(Sweep { param: param.trim().to_string(), lo: parse_f64(lo)?, hi: parse_f64(hi)?, n })
}

fn case_params(case: CaseStudy, params: &[(String, f64)]) -> Result<CaseParams, Failure> {
    let mut k = CaseParams::default();
    for (name, value) in params {
        if !case.parameters().contains(&name.as_str()) {
            return Err(Failure::new(
                EXIT_FAILURE,
                format!("{case} has no parameter {name:?} (expected one of {:?})", case.parameters()),
            ));
        }
        k.set(name, *value)?;
    }
    Ok(k)
}

/// A system with the options it carries.
struct Loaded {
    system: PiecewiseField,
    mono: MonodromyOptions,
    analysis: AnalysisOptions,
}

impl Source {
    fn load(&self) -> Result<Loaded, Failure> {
        if let Some(case) = self.case {
            let k = case_params(case, &self.params)?;
            return Ok(Loaded {
                system: case.system(&k),
                mono: case.monodromy_options(),
                analysis: AnalysisOptions::default(),
            });
        }
        let path = self.spec.as_ref().expect("clap requires --spec or --case");
        let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let spec = SystemSpec::parse(&text)
            .map_err(|e| Failure::new(EXIT_FAILURE, format!("{}: invalid system {e}", path.display())))?;
        info!("loaded {}", path.display());
        Ok(Loaded { system: spec.system(), mono: spec.monodromy_options(), analysis: spec.analysis_options() })
    }
}

impl MonodromyFlags {
    fn apply(&self, o: &mut MonodromyOptions) {
        o.assert_no_char_orbit_upper |= self.assert_upper;
        o.assert_no_char_orbit_lower |= self.assert_lower;
        if let Some(n) = self.max_order {
            o.max_order = n;
        }
    }
}

impl AnalysisFlags {
    fn apply(&self, o: &mut AnalysisOptions) {
        if let Some(n) = self.order {
            o.order = n;
        }
        if let Some(t) = self.tol {
            o.tol = t;
        }
        if let Some(t) = self.tau_coef {
            o.tau_coef = t;
        }
        if self.no_cross_check {
            o.cross_check = false;
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Failure::new(EXIT_IO, format!("stdout: {e}")))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

fn cmd_classify(a: &ClassifyArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut sys = a.source.load()?;
    a.mono.apply(&mut sys.mono);
    let report = classify_point(&sys.system, a.point, &sys.mono)?;
    emit(out, &report)?;
    if let Monodromy::Undetermined { reason } = &report.monodromy {
        return Err(Failure::new(EXIT_UNDETERMINED, format!("monodromy undetermined: {reason}")));
    }
    Ok(())
}

fn cmd_displacement(a: &DisplacementArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut sys = a.source.load()?;
    a.mono.apply(&mut sys.mono);
    a.analysis.apply(&mut sys.analysis);
    let origin = classify_point(&sys.system, [0.0, 0.0], &sys.mono)?;
    match &origin.monodromy {
        Monodromy::Monodromic { case, .. } => info!("origin is monodromic, case {case:?}"),
        Monodromy::NotMonodromic { reason } | Monodromy::Undetermined { reason } => {
            if !a.assume_monodromic {
                return Err(Failure::new(
                    EXIT_UNDETERMINED,
                    format!("origin not shown to be monodromic ({reason}); pass --assume-monodromic to continue"),
                ));
            }
            warn!("continuing without monodromy: {reason}");
        }
    }
    let report = analyze(&sys.system, &sys.analysis)?;
    if report.verdict == Verdict::Undetermined {
        warn!("no coefficient cleared the threshold; raise --order or lower --tau-coef");
    }
    emit(out, &report)
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    csv: String,
    events: String,
    samples: usize,
    event_count: usize,
    terminated: Termination,
    positive_crossings: Vec<f64>,
}

pub fn events_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".events.json");
    PathBuf::from(s)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let sys = a.source.load()?;
    let tr = simulate(&sys.system, a.start, a.t, a.tol)?;
    let mut csv = Vec::new();
    tr.write_csv(&mut csv).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    write_file(&a.out, &csv)?;
    let events = events_path(&a.out);
    let json = tr.events_json().map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
    write_file(&events, json.as_bytes())?;
    let summary = SimulateSummary {
        csv: a.out.display().to_string(),
        events: events.display().to_string(),
        samples: tr.samples.len(),
        event_count: tr.events.len(),
        terminated: tr.terminated,
        positive_crossings: tr.positive_crossings(),
    };
    let line = serde_json::to_string(&summary).map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
    writeln!(out, "{line}").map_err(|e| Failure::new(EXIT_IO, format!("stdout: {e}")))
}

/// One row of a parameter sweep.
#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub param: String,
    pub value: f64,
    pub params: CaseParams,
    pub monodromy: Option<Monodromy>,
    pub verdict: Option<Verdict>,
    pub leading_w_exponent: Option<u32>,
    pub leading_coefficient: Option<f64>,
    /// Numeric displacement at the bundle start abscissa.
    pub numeric_displacement: Option<f64>,
    pub published_verdict: String,
    pub verdict_agrees: Option<bool>,
    pub error: Option<String>,
}

fn sweep_point(case: CaseStudy, base: &CaseParams, sweep: &Sweep, value: f64, opts: &AnalysisOptions) -> SweepPoint {
    let mut k = *base;
    k.set(&sweep.param, value).expect("parameter name checked");
    let published_verdict = case.published_verdict(&k).to_string();
    let mut point = SweepPoint {
        param: sweep.param.clone(),
        value,
        params: k,
        monodromy: None,
        verdict: None,
        leading_w_exponent: None,
        leading_coefficient: None,
        numeric_displacement: None,
        published_verdict,
        verdict_agrees: None,
        error: None,
    };
    let w = case.system(&k);
    match classify_point(&w, [0.0, 0.0], &case.monodromy_options()) {
        Ok(r) => point.monodromy = Some(r.monodromy),
        Err(e) => point.error = Some(e.to_string()),
    }
    match analyze(&w, opts) {
        Ok(r) => {
            point.leading_w_exponent = r.leading_w_exponent;
            point.leading_coefficient = r.leading_index.map(|i| r.w_coeffs[i]);
            point.verdict_agrees = Some(verdict_name(&r.verdict) == point.published_verdict);
            point.verdict = Some(r.verdict);
        }
        Err(e) => point.error = Some(e.to_string()),
    }
    point.numeric_displacement = sigma_mono_core::numeric_displacement(&w, BUNDLE_START, DEFAULT_SIM_TOL).ok();
    point
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::StableFocus => "StableFocus",
        Verdict::UnstableFocus => "UnstableFocus",
        Verdict::CenterCandidate { .. } => "CenterCandidate",
        Verdict::Center => "Center",
        Verdict::Undetermined => "Undetermined",
    }
}

fn cmd_case_study(a: &CaseStudyArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let case = parse_case(&a.id).map_err(|e| Failure::new(EXIT_FAILURE, e))?;
    let k = case_params(case, &a.params)?;
    let mut opts = AnalysisOptions::default();
    a.analysis.apply(&mut opts);

    let text = match &a.sweep {
        None => {
            let bundle = case_study_bundle(case, &k, &opts, a.sim_tol)?;
            if let Some(err) = &bundle.displacement_error {
                warn!("{case}: displacement failed: {err}");
            }
            serde_json::to_string_pretty(&bundle)
        }
        Some(sweep) => {
            case_params(case, &[(sweep.param.clone(), sweep.lo)])?;
            info!("sweeping {} over {} values", sweep.param, sweep.n);
            let rows: Vec<SweepPoint> =
                sweep.values().into_par_iter().map(|v| sweep_point(case, &k, sweep, v, &opts)).collect();
            serde_json::to_string_pretty(&rows)
        }
    }
    .map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;

    match &a.out {
        Some(path) => write_file(path, format!("{text}\n").as_bytes()),
        None => writeln!(out, "{text}").map_err(|e| Failure::new(EXIT_IO, format!("stdout: {e}"))),
    }
}

/// Parse `args` (program name first) and run the command, writing reports to
/// `out`. Help and version requests succeed with the text on `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), Failure>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return write!(out, "{}", e.render()).map_err(|e| Failure::new(EXIT_IO, e.to_string()));
        }
        Err(e) => return Err(Failure::new(EXIT_FAILURE, e.render().to_string().trim_end().to_string())),
    };
    match &cli.command {
        Command::Classify(a) => cmd_classify(a, out),
        Command::Displacement(a) => cmd_displacement(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::CaseStudy(a) => cmd_case_study(a, out),
    }
}

/// Log filter from `SIGMA_MONO_LOG`, warnings by default.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_parsers() {
        assert_eq!(parse_point("-0.5, 2").unwrap(), [-0.5, 2.0]);
        assert!(parse_point("1").is_err());
        assert!(parse_point("1,nan").is_err());
        assert_eq!(parse_param("b=-1").unwrap(), ("b".into(), -1.0));
        assert!(parse_param("b").is_err());
        let s = parse_sweep("b=-1:1:5").unwrap();
        assert_eq!(s.values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(parse_sweep("a=2:3:1").unwrap().values(), vec![2.0]);
        assert!(parse_sweep("a=2:3:0").is_err());
        assert!(parse_sweep("a=2:3").is_err());
    }

    #[test]
    fn events_sidecar_name() {
        assert_eq!(events_path(Path::new("out/tr.csv")), PathBuf::from("out/tr.csv.events.json"));
    }

    #[test]
    fn failures_map_to_codes() {
        let f: Failure = Error::HypothesisViolation { theta: 1.0, reason: "r".into() }.into();
        assert_eq!(f.code, EXIT_HYPOTHESIS);
        let f: Failure = Error::SwitchNotAxis.into();
        assert_eq!(f.code, EXIT_FAILURE);
    }

    #[test]
    fn help_and_usage_errors() {
        let mut out = Vec::new();
        assert!(run(["sigma-mono", "--help"], &mut out).is_ok());
        assert!(String::from_utf8(out).unwrap().contains("case-study"));
        let e = run(["sigma-mono", "bogus"], &mut Vec::new()).unwrap_err();
        assert_eq!(e.code, EXIT_FAILURE);
        let e = run(["sigma-mono", "classify"], &mut Vec::new()).unwrap_err();
        assert_eq!(e.code, EXIT_FAILURE);
    }

    #[test]
    fn case_source_in_process() {
        let mut out = Vec::new();
        run(["sigma-mono", "classify", "--case", "fold2-fold4"], &mut out).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(v["monodromy"]["case"], "i");
        let e = run(["sigma-mono", "classify", "--case", "fold2-fold4", "-p", "z=1"], &mut Vec::new()).unwrap_err();
        assert_eq!(e.code, EXIT_FAILURE);
    }
}
