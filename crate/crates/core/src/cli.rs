//! Batch front-end: `mlq generate|verify|closing|family --config <path>`.
//!
//! Exit codes: 0 all checks pass, 1 checks failed, 2 usage or configuration
//! error, 3 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedform::{cylinder_closing, trinoid_admissible, AdmissibilityReport, ClosingReport};
use crate::frames::{SurfaceEvaluator, SurfaceOptions, SurfaceSample, ZGrid};
use crate::holonomy::{OdeOptions, EPS_POLE};
use crate::iwasawa::IwasawaOptions;
use crate::loops::{Mat2C, Window};
use crate::potentials::{make_potential, Potential, PotentialSpec};
use crate::verify::{
    associated_family_deviation, pipeline_report, symmetry_check, trinoid_monodromy_report, PointReport,
    SymmetryTransform, TrinoidMonodromyReport,
};
use crate::{Error, Result, VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Exit code for an error that aborted a command.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

#[derive(Debug, Parser)]
#[command(name = "mlq", version, about = "Minimal Lagrangian surfaces in the complex quadric")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the surface on the grid and write meshes, CSV and metadata.
    Generate(CommonArgs),
    /// Finite-difference residual report; exit 0 iff all are within tolerance.
    Verify(CommonArgs),
    /// Closing conditions for equivariant and trinoid potentials.
    Closing(CommonArgs),
    /// Associated-family sweep over lambda0.
    Family(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output_dir in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides MLQ_JOBS).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum LambdaSpec {
    Point { re: f64, im: f64 },
    Sweep { sweep: usize },
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Point { re: 1.0, im: 0.0 }
    }
}

impl LambdaSpec {
    /// The single spectral value; sweeps are rejected.
    pub fn point(&self) -> Result<Complex64> {
        match *self {
            LambdaSpec::Point { re, im } => Ok(Complex64::new(re, im)),
            LambdaSpec::Sweep { .. } => Err(Error::Config("lambda0 sweep is only valid for the family command".into())),
        }
    }

    /// λ_k = e^{iπk/n}, k = 0..n.
    pub fn sweep(&self) -> Result<Vec<Complex64>> {
        match *self {
            LambdaSpec::Sweep { sweep } if sweep >= 2 => Ok((0..sweep)
                .map(|k| Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 / sweep as f64))
                .collect()),
            LambdaSpec::Sweep { sweep } => Err(Error::Config(format!("sweep count must be at least 2, got {sweep}"))),
            LambdaSpec::Point { .. } => Err(Error::Config("the family command needs lambda0 = {\"sweep\": n}".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeControl {
    /// Rotation angle applied to the second spectral value.
    #[serde(default)]
    pub partner_angle: f64,
    /// ε in F2 ↦ F2·exp(iε·Re z·σ₁).
    #[serde(default)]
    pub frame_perturbation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ClosingConfig {
    /// Sample points for the numerical deck-transformation check.
    #[serde(default)]
    pub samples: Option<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub potential: PotentialSpec,
    pub grid: ZGrid,
    #[serde(default)]
    pub lambda0: LambdaSpec,
    #[serde(rename = "truncation_N", default = "default_truncation")]
    pub truncation_n: i32,
    #[serde(default)]
    pub ode: OdeOptions,
    #[serde(default)]
    pub iwasawa: IwasawaOptions,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Overrides of the default tolerances, by name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub phi0: Option<Mat2C>,
    #[serde(default)]
    pub negative_control: Option<NegativeControl>,
    #[serde(default)]
    pub closing: Option<ClosingConfig>,
}

fn default_truncation() -> i32 {
    Window::DEFAULT_N
}

fn default_fd_step() -> f64 {
    crate::verify::DEFAULT_H
}

/// Default tolerances by name. Residuals involving second derivatives get
/// the looser finite-difference bound.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("alpha_holomorphy", 1e-4),
        ("beta_phase", 1e-4),
        ("phi_norm", 1e-4),
        ("quadric", 1e-8),
        ("horizontality", 1e-4),
        ("relation_e2u", 1e-4),
        ("sinh_gordon", 1e-3),
        ("metric_identity", 1e-3),
        ("conformal", 1e-4),
        ("lagrangian", 1e-4),
        ("harmonic", 1e-3),
        ("jacobian_sum", 1e-4),
        ("theta", 1e-6),
        ("jacobian_match", 1e-6),
        ("gauss", 1e-3),
        ("family_u", 1e-6),
        ("family_alpha", 1e-6),
        ("closing", 1e-6),
        ("product", 1e-6),
        ("unitarity", 1e-6),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != 1 {
            return Err(Error::Config(format!("unsupported schema {}", self.schema)));
        }
        let g = &self.grid;
        if g.n_re < 2 || g.n_im < 2 {
            return Err(Error::Config("grid counts must be at least 2".into()));
        }
        if !(g.re_min < g.re_max) || !(g.im_min < g.im_max) {
            return Err(Error::Config("grid ranges must be nonempty".into()));
        }
        if let LambdaSpec::Point { re, im } = self.lambda0 {
            if (Complex64::new(re, im).norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Config("|lambda0| must be 1 within 1e-12".into()));
            }
        }
        if self.truncation_n < 1 {
            return Err(Error::Config("truncation_N must be positive".into()));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::Config("fd_step must be positive".into()));
        }
        let known = default_tolerances();
        for (k, v) in &self.tolerances {
            if !known.contains_key(k) {
                return Err(Error::Config(format!("unknown tolerance '{k}'")));
            }
            if !(*v > 0.0) {
                return Err(Error::Config(format!("tolerance '{k}' must be positive")));
            }
        }
        if let Some(p) = self.phi0 {
            if (p.det() - 1.0).norm() > 1e-12 {
                return Err(Error::Config("phi0 must have determinant 1".into()));
            }
        }
        self.ode.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| default_tolerances()[name])
    }

    pub fn surface_options(&self) -> SurfaceOptions {
        let mut ode = self.ode;
        ode.window = Window::symmetric(self.truncation_n);
        SurfaceOptions { ode, iwasawa: self.iwasawa, phi0: self.phi0.unwrap_or_else(Mat2C::identity) }
    }

    pub fn potential(&self) -> Result<Potential> {
        make_potential(self.potential.clone())
    }

    /// Potential with the grid checked against its singular set.
    fn checked_potential(&self) -> Result<Potential> {
        let p = self.potential()?;
        self.grid
            .check_singular(&p, EPS_POLE)
            .map_err(|e| Error::Config(format!("grid intersects singular set ({e})")))?;
        Ok(p)
    }

    pub fn evaluator(&self, p: Potential, lambda0: Complex64) -> Result<SurfaceEvaluator> {
        let mut ev = SurfaceEvaluator::new(p, lambda0, self.surface_options())?;
        if let Some(nc) = self.negative_control {
            ev.partner_angle = nc.partner_angle;
            ev.frame_perturbation = nc.frame_perturbation;
        }
        Ok(ev)
    }
}

/// Worker count: explicit value, then MLQ_JOBS, then the available cores.
pub fn resolve_jobs(explicit: Option<usize>) -> Result<usize> {
    if let Some(n) = explicit {
        return if n == 0 { Err(Error::Config("--jobs must be positive".into())) } else { Ok(n) };
    }
    if let Ok(s) = std::env::var("MLQ_JOBS") {
        return match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("MLQ_JOBS must be a positive integer, got '{s}'"))),
        };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Maps `f` over `items` on a bounded pool; results keep input order.
fn par_map<T: Sync, R: Send>(jobs: usize, items: &[T], f: impl Fn(&T) -> R + Sync) -> Result<Vec<R>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Result of one command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub exit: i32,
    pub summary: String,
}

#[derive(Debug, Clone, Serialize)]
struct NodeFailure {
    index: usize,
    z: Complex64,
    error: String,
    numerical: bool,
}

fn failure(index: usize, z: Complex64, e: &Error) -> NodeFailure {
    NodeFailure { index, z, error: e.to_string(), numerical: e.is_numerical() }
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::write(dir.join(name), content).map_err(|e| Error::Io(format!("{}: {e}", dir.join(name).display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    write_file(dir, name, &s)
}

fn prepare_dir(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf> {
    let dir = out.map(Path::to_path_buf).or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("mlq_out"));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn obj_mesh(grid: &ZGrid, samples: &[Result<SurfaceSample>], factor: usize) -> String {
    let mut s = format!("# mlq {VERSION} S2 factor {}\n", factor + 1);
    for r in samples {
        let v = match r {
            Ok(smp) => if factor == 0 { smp.s2_pair.0 } else { smp.s2_pair.1 },
            Err(_) => [0.0; 3],
        };
        let _ = writeln!(s, "v {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
    }
    let idx = |i: usize, j: usize| j * grid.n_re + i;
    for j in 0..grid.n_im - 1 {
        for i in 0..grid.n_re - 1 {
            let q = [idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)];
            if q.iter().any(|&k| samples[k].is_err()) {
                continue;
            }
            let _ = writeln!(s, "f {} {} {}", q[0] + 1, q[1] + 1, q[2] + 1);
            let _ = writeln!(s, "f {} {} {}", q[0] + 1, q[2] + 1, q[3] + 1);
        }
    }
    s
}

fn surface_csv(grid: &ZGrid, samples: &[Result<SurfaceSample>]) -> String {
    let mut s = String::from("i_re,i_im,z_re,z_im");
    for k in 0..4 {
        let _ = write!(s, ",q2_{k}_re,q2_{k}_im");
    }
    for name in ["fmin", "n"] {
        for k in 0..4 {
            let _ = write!(s, ",{name}_{k}");
        }
    }
    for name in ["phi", "psi"] {
        for k in 0..3 {
            let _ = write!(s, ",{name}_{k}");
        }
    }
    s.push_str(",ok\n");
    for (n, r) in samples.iter().enumerate() {
        let (i, j) = (n % grid.n_re, n / grid.n_re);
        let z = grid.node(i, j);
        let mut vals: Vec<f64> = Vec::with_capacity(22);
        match r {
            Ok(smp) => {
                vals.extend(smp.q2_hom.iter().flat_map(|c| [c.re, c.im]));
                vals.extend(smp.s3_pair.0);
                vals.extend(smp.s3_pair.1);
                vals.extend(smp.s2_pair.0);
                vals.extend(smp.s2_pair.1);
            }
            Err(_) => vals.resize(22, f64::NAN),
        }
        let _ = write!(s, "{i},{j},{:.16e},{:.16e}", z.re, z.im);
        for v in vals {
            let _ = write!(s, ",{v:.16e}");
        }
        let _ = writeln!(s, ",{}", u8::from(r.is_ok()));
    }
    s
}

#[derive(Serialize)]
struct Meta<'a> {
    schema: u32,
    version: &'a str,
    command: &'a str,
    config: &'a RunConfig,
    #[serde(rename = "truncation_N")]
    truncation_n: i32,
    max_tail_norm: f64,
    nodes: usize,
    failures: Vec<NodeFailure>,
}

pub fn cmd_generate(cfg: &RunConfig, out: Option<&Path>, jobs: usize) -> Result<Outcome> {
    let p = cfg.checked_potential()?;
    let ev = cfg.evaluator(p, cfg.lambda0.point()?)?;
    let nodes = cfg.grid.nodes();
    let samples = par_map(jobs, &nodes, |&z| ev.sample(z))?;
    let dir = prepare_dir(cfg, out)?;
    write_file(&dir, "factor1.obj", &obj_mesh(&cfg.grid, &samples, 0))?;
    write_file(&dir, "factor2.obj", &obj_mesh(&cfg.grid, &samples, 1))?;
    write_file(&dir, "surface.csv", &surface_csv(&cfg.grid, &samples))?;
    let failures: Vec<NodeFailure> = samples
        .iter()
        .zip(&nodes)
        .enumerate()
        .filter_map(|(i, (r, z))| r.as_ref().err().map(|e| failure(i, *z, e)))
        .collect();
    let max_tail = samples.iter().flatten().map(|s| s.tail_norm).fold(0.0, f64::max);
    let n_fail = failures.len();
    let meta = Meta {
        schema: 1,
        version: VERSION,
        command: "generate",
        config: cfg,
        truncation_n: cfg.truncation_n,
        max_tail_norm: max_tail,
        nodes: nodes.len(),
        failures,
    };
    write_json(&dir, "meta.json", &meta)?;
    Ok(Outcome {
        exit: if n_fail == 0 { EXIT_OK } else { EXIT_NUMERICAL },
        summary: format!("generate: {} nodes, {} failed, wrote {}", nodes.len(), n_fail, dir.display()),
    })
}

/// Flattened residuals of one point report, keyed like the tolerances.
pub fn residual_metrics(r: &PointReport) -> BTreeMap<String, f64> {
    let mut m = r.invariants.residuals.clone();
    m.insert("conformal".into(), r.geometry.conformal_residual);
    m.insert("lagrangian".into(), r.geometry.lagrangian_residual);
    m.insert("harmonic".into(), r.geometry.harmonic_residual);
    m.insert("jacobian_sum".into(), r.geometry.jacobian_sum.abs());
    m.insert("theta".into(), r.cu.theta_residual);
    m.insert("jacobian_match".into(), r.cu.jacobian_match);
    if let Some(g) = r.cu.gauss_residual {
        m.insert("gauss".into(), g);
    }
    m
}

/// Decade of a nonnegative value: k with v ∈ (10^{k−1}, 10^k], clamped to
/// [−16, 1]; zero falls in −16.
fn decade(v: f64) -> i32 {
    if !(v > 0.0) {
        return if v.is_nan() { 1 } else { -16 };
    }
    (v.log10().ceil() as i32).clamp(-16, 1)
}

#[derive(Serialize)]
struct MetricSummary {
    max: f64,
    tolerance: f64,
    pass: bool,
    /// Count per decade k, i.e. values in (10^{k−1}, 10^k].
    histogram: BTreeMap<i32, usize>,
}

#[derive(Serialize)]
struct NodeReport {
    index: usize,
    z: Complex64,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<PointReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    schema: u32,
    version: &'a str,
    lambda0: Complex64,
    fd_step: f64,
    nodes: Vec<NodeReport>,
    metrics: BTreeMap<String, MetricSummary>,
    failed_checks: Vec<String>,
    failures: Vec<NodeFailure>,
    pass: bool,
}

pub fn cmd_verify(cfg: &RunConfig, out: Option<&Path>, jobs: usize) -> Result<Outcome> {
    let p = cfg.checked_potential()?;
    let lambda0 = cfg.lambda0.point()?;
    let ev = cfg.evaluator(p, lambda0)?;
    let nodes = cfg.grid.nodes();
    let reports = par_map(jobs, &nodes, |&z| pipeline_report(&ev, z, cfg.fd_step))?;

    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut node_reports = Vec::with_capacity(nodes.len());
    let mut failures = Vec::new();
    for (i, (r, &z)) in reports.into_iter().zip(&nodes).enumerate() {
        match r {
            Ok(rep) => {
                for (k, v) in residual_metrics(&rep) {
                    values.entry(k).or_default().push(v);
                }
                node_reports.push(NodeReport { index: i, z, report: Some(rep), error: None });
            }
            Err(e) => {
                failures.push(failure(i, z, &e));
                node_reports.push(NodeReport { index: i, z, report: None, error: Some(e.to_string()) });
            }
        }
    }
    let mut metrics = BTreeMap::new();
    let mut failed_checks = Vec::new();
    for (k, vs) in values {
        let tolerance = cfg.tolerance(&k);
        let max = vs.iter().copied().fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
        let pass = max <= tolerance;
        if !pass {
            failed_checks.push(k.clone());
        }
        let mut histogram = BTreeMap::new();
        for v in vs {
            *histogram.entry(decade(v)).or_insert(0) += 1;
        }
        metrics.insert(k, MetricSummary { max, tolerance, pass, histogram });
    }
    let pass = failed_checks.is_empty() && failures.is_empty();
    let exit = if !failures.is_empty() {
        EXIT_NUMERICAL
    } else if pass {
        EXIT_OK
    } else {
        EXIT_CHECKS_FAILED
    };
    let summary = format!(
        "verify: {} nodes, {} failed, failed checks: [{}]",
        nodes.len(),
        failures.len(),
        failed_checks.join(", ")
    );
    let report = VerifyReport {
        schema: 1,
        version: VERSION,
        lambda0,
        fd_step: cfg.fd_step,
        nodes: node_reports,
        metrics,
        failed_checks,
        failures,
        pass,
    };
    let dir = prepare_dir(cfg, out)?;
    write_json(&dir, "report.json", &report)?;
    Ok(Outcome { exit, summary })
}

#[derive(Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum ClosingOutput {
    Equivariant {
        lambda0: Complex64,
        prediction: ClosingReport,
        samples: Vec<Complex64>,
        /// Largest projective distance between f̂ and its continuation around 0.
        deck_residual: f64,
        tolerance: f64,
        /// Prediction and numerics agree.
        consistent: bool,
        pass: bool,
    },
    Trinoid {
        admissibility: AdmissibilityReport,
        monodromy: TrinoidMonodromyReport,
        tolerance: f64,
        pass: bool,
    },
}

fn default_deck_samples() -> Vec<Complex64> {
    vec![Complex64::new(1.2, 0.3), Complex64::new(0.6, -0.5)]
}

pub fn cmd_closing(cfg: &RunConfig, out: Option<&Path>, _jobs: usize) -> Result<Outcome> {
    let p = cfg.potential()?;
    let tol = cfg.tolerance("closing");
    let (output, pass) = match cfg.potential {
        PotentialSpec::Equivariant { a, b, c } => {
            let lambda0 = cfg.lambda0.point()?;
            let prediction = cylinder_closing(a, b, c, lambda0);
            let samples = cfg.closing.as_ref().and_then(|c| c.samples.clone()).unwrap_or_else(default_deck_samples);
            let ev = cfg.evaluator(p, lambda0)?;
            let deck_residual = symmetry_check(&ev, SymmetryTransform::Deck { center: Complex64::new(0.0, 0.0) }, &samples)?;
            let closes_numerically = deck_residual <= tol;
            let pass = prediction.closes_q2 && closes_numerically;
            let out = ClosingOutput::Equivariant {
                lambda0,
                consistent: prediction.closes_q2 == closes_numerically,
                prediction,
                samples,
                deck_residual,
                tolerance: tol,
                pass,
            };
            (out, pass)
        }
        PotentialSpec::Trinoid { lambda0, v0, v1, v_inf } => {
            let admissibility = trinoid_admissible(lambda0, v0, v1, v_inf)?;
            let monodromy = trinoid_monodromy_report(&p, &cfg.surface_options().ode, 8, tol)?;
            let pass = admissibility.admissible
                && monodromy.closing.closes_q2
                && monodromy.product_defects.iter().all(|(_, d)| *d <= cfg.tolerance("product"))
                && monodromy.unitarized_unitarity <= cfg.tolerance("unitarity");
            (ClosingOutput::Trinoid { admissibility, monodromy, tolerance: tol, pass }, pass)
        }
        ref other => {
            return Err(Error::Config(format!(
                "closing needs an equivariant or trinoid potential, got {}",
                other.family()
            )))
        }
    };
    let dir = prepare_dir(cfg, out)?;
    write_json(&dir, "closing.json", &output)?;
    Ok(Outcome {
        exit: if pass { EXIT_OK } else { EXIT_CHECKS_FAILED },
        summary: format!("closing: {}", if pass { "closes" } else { "does not close" }),
    })
}

#[derive(Serialize)]
struct FamilyNode {
    index: usize,
    z: Complex64,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct FamilyReport<'a> {
    schema: u32,
    version: &'a str,
    lambdas: Vec<Complex64>,
    nodes: Vec<FamilyNode>,
    max_u_deviation: f64,
    max_alpha_deviation: f64,
    tolerance_u: f64,
    tolerance_alpha: f64,
    failures: Vec<NodeFailure>,
    pass: bool,
}

pub fn cmd_family(cfg: &RunConfig, out: Option<&Path>, jobs: usize) -> Result<Outcome> {
    let lambdas = cfg.lambda0.sweep()?;
    let p = cfg.checked_potential()?;
    let ev = cfg.evaluator(p, lambdas[0])?;
    let nodes = cfg.grid.nodes();
    let devs = par_map(jobs, &nodes, |&z| associated_family_deviation(&ev, z, &lambdas, cfg.fd_step))?;
    let (mut du, mut da): (f64, f64) = (0.0, 0.0);
    let mut failures = Vec::new();
    let mut fam_nodes = Vec::with_capacity(nodes.len());
    for (i, (r, &z)) in devs.into_iter().zip(&nodes).enumerate() {
        match r {
            Ok((u, a)) => {
                du = du.max(u);
                da = da.max(a);
                fam_nodes.push(FamilyNode { index: i, z, u_deviation: Some(u), alpha_deviation: Some(a), error: None });
            }
            Err(e) => {
                failures.push(failure(i, z, &e));
                fam_nodes.push(FamilyNode { index: i, z, u_deviation: None, alpha_deviation: None, error: Some(e.to_string()) });
            }
        }
    }
    let (tu, ta) = (cfg.tolerance("family_u"), cfg.tolerance("family_alpha"));
    let pass = failures.is_empty() && du <= tu && da <= ta;
    let exit = if !failures.is_empty() {
        EXIT_NUMERICAL
    } else if pass {
        EXIT_OK
    } else {
        EXIT_CHECKS_FAILED
    };
    let summary = format!("family: {} lambdas, max |du| = {du:.3e}, max |dalpha| = {da:.3e}", lambdas.len());
    let report = FamilyReport {
        schema: 1,
        version: VERSION,
        lambdas,
        nodes: fam_nodes,
        max_u_deviation: du,
        max_alpha_deviation: da,
        tolerance_u: tu,
        tolerance_alpha: ta,
        failures,
        pass,
    };
    let dir = prepare_dir(cfg, out)?;
    write_json(&dir, "family.json", &report)?;
    Ok(Outcome { exit, summary })
}

/// Parses arguments (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (name, common, cmd): (&str, &CommonArgs, fn(&RunConfig, Option<&Path>, usize) -> Result<Outcome>) = match &cli.command {
        Command::Generate(a) => ("generate", a, cmd_generate),
        Command::Verify(a) => ("verify", a, cmd_verify),
        Command::Closing(a) => ("closing", a, cmd_closing),
        Command::Family(a) => ("family", a, cmd_family),
    };
    let result = resolve_jobs(common.jobs)
        .and_then(|jobs| RunConfig::load(&common.config).map(|cfg| (jobs, cfg)))
        .and_then(|(jobs, cfg)| cmd(&cfg, common.out.as_deref(), jobs));
    match result {
        Ok(o) => {
            println!("{}", o.summary);
            o.exit
        }
        Err(e) => {
            eprintln!("mlq {name}: error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"{"schema": 1, "potential": {"family": "sphere"},
        "grid": {"re_min": -0.5, "re_max": 0.5, "im_min": -0.5, "im_max": 0.5, "n_re": 2, "n_im": 2}}"#;

    #[test]
    fn config_defaults_and_validation() {
        let cfg = RunConfig::from_json(SPHERE).unwrap();
        assert_eq!(cfg.truncation_n, 16);
        assert_eq!(cfg.lambda0.point().unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(cfg.tolerance("quadric"), 1e-8);
        let bad = [
            SPHERE.replace("\"schema\": 1", "\"schema\": 2"),
            SPHERE.replace("\"n_re\": 2", "\"n_re\": 1"),
            SPHERE.replace("\"schema\": 1,", "\"schema\": 1, \"lambda0\": {\"re\": 2, \"im\": 0},"),
            SPHERE.replace("\"schema\": 1,", "\"schema\": 1, \"tolerances\": {\"nonsense\": 1},"),
            SPHERE.replace("\"schema\": 1,", "\"schema\": 1, \"extra\": 0,"),
        ];
        for b in bad {
            assert!(matches!(RunConfig::from_json(&b), Err(Error::Config(_))), "{b}");
        }
    }

    #[test]
    fn lambda_sweep() {
        let s = LambdaSpec::Sweep { sweep: 4 }.sweep().unwrap();
        assert_eq!(s.len(), 4);
        assert!((s[2] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(LambdaSpec::Sweep { sweep: 1 }.sweep().is_err());
        assert!(LambdaSpec::Sweep { sweep: 3 }.point().is_err());
    }

    #[test]
    fn decades() {
        assert_eq!(decade(0.0), -16);
        assert_eq!(decade(1e-3), -3);
        assert_eq!(decade(2e-3), -2);
        assert_eq!(decade(1e5), 1);
    }

    #[test]
    fn mesh_faces_skip_failed_nodes() {
        let grid = ZGrid { re_min: 0.0, re_max: 1.0, im_min: 0.0, im_max: 1.0, n_re: 3, n_im: 2 };
        let ok = |z| {
            Ok(SurfaceSample {
                z,
                q2_hom: [Complex64::new(0.0, 0.0); 4],
                s2_pair: ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
                s3_pair: ([1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]),
                diagnostics: None,
                tail_norm: 0.0,
            })
        };
        let mut samples: Vec<Result<SurfaceSample>> = grid.nodes().into_iter().map(ok).collect();
        assert_eq!(obj_mesh(&grid, &samples, 0).lines().filter(|l| l.starts_with("f ")).count(), 4);
        samples[2] = Err(Error::Factorization("x".into()));
        let mesh = obj_mesh(&grid, &samples, 1);
        assert_eq!(mesh.lines().filter(|l| l.starts_with("v ")).count(), 6);
        assert_eq!(mesh.lines().filter(|l| l.starts_with("f ")).count(), 2);
        let csv = surface_csv(&grid, &samples);
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.lines().nth(3).unwrap().ends_with(",0"));
    }
}
