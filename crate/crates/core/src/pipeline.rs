//! Command-line pipeline: degrade, restore, compare, check-operators.
//!
//! Each command is an ordinary function over parsed arguments so that it can
//! be driven from tests. Every run produces a [`RunManifest`], a flat
//! `key=value` record of the resolved parameters and measured results.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checks::{run_checks, CheckConfig};
use crate::degrade::{degrade, phantom, psnr, BlurSpec, NoiseSpec, PhantomKind};
use crate::error::TvError;
use crate::grid::{relative_l2, Image};
use crate::mld::{estimate_lambda, mld_restore, MldConfig, MldOutput};
use crate::pnm::{quantize, read_image, write_image, Encoding};
use crate::shrinkage::{restore, step_constant, stretch_to_255, Renormalize, SolverConfig};
use crate::spectral::{condition_number, SpectralFilter};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<TvError> for CliError {
    fn from(e: TvError) -> Self {
        let msg = e.to_string();
        match e {
            TvError::Io(_) | TvError::Pnm(_) => CliError::Io(msg),
            TvError::Divergence { .. }
            | TvError::NotConverged { .. }
            | TvError::NonFinite { .. }
            | TvError::ZeroGradient => CliError::Numerical(msg),
            _ => CliError::Usage(msg),
        }
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Flat `key=value` run record. Keys keep insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = RunManifest::default();
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    /// Insert or replace. Newlines in values are flattened to spaces.
    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        let value = value.to_string().replace(['\n', '\r'], " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Parse `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut m = RunManifest::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        RunManifest::parse(&text).map_err(|e| io_err(path, e))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_string()).map_err(|e| io_err(path, e))
    }
}

impl fmt::Display for RunManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Default manifest location: the output path with `.manifest` appended.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

/// Place a small PSF image, whose center pixel `(rows/2, cols/2)` is the
/// origin, onto a periodic `rows x cols` grid.
pub fn psf_on_grid(psf: &Image, rows: usize, cols: usize) -> Result<Image, CliError> {
    let (pr, pc) = psf.shape();
    if pr > rows || pc > cols {
        return Err(CliError::Usage(format!(
            "PSF {pr}x{pc} is larger than the image {rows}x{cols}"
        )));
    }
    let mut k = Image::zeros(rows, cols);
    for i in 0..pr {
        for j in 0..pc {
            let n = (i as isize - (pr / 2) as isize).rem_euclid(rows as isize) as usize;
            let m = (j as isize - (pc / 2) as isize).rem_euclid(cols as isize) as usize;
            k[(n, m)] += psf[(i, j)];
        }
    }
    Ok(k)
}

/// Parametric blur (`gauss:<sigma>`, `box:<size>`) or a PSF graymap path.
pub fn resolve_blur(arg: &str, rows: usize, cols: usize) -> Result<(BlurSpec, SpectralFilter), CliError> {
    let spec = if arg.starts_with("gauss:") || arg.starts_with("gaussian:") || arg.starts_with("box:") {
        arg.parse::<BlurSpec>()?
    } else {
        let path = Path::new(arg);
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "blur `{arg}` is neither gauss:<sigma>, box:<size> nor an existing PSF file"
            )));
        }
        BlurSpec::Kernel(psf_on_grid(&read_image(path)?, rows, cols)?)
    };
    let h = spec.filter(rows, cols)?;
    Ok((spec, h))
}

fn encoding(ascii: bool) -> Encoding {
    if ascii {
        Encoding::Ascii
    } else {
        Encoding::Binary
    }
}

fn quantized(u: &Image) -> Image {
    u.map(|v| f64::from(quantize(v)))
}

#[derive(Debug, Parser)]
#[command(name = "tvis", version, about = "Total-variation deconvolution by iterative shrinkage")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Blur an image and add white Gaussian noise.
    Degrade(DegradeArgs),
    /// Restore a blurred, noisy image.
    Restore(RestoreArgs),
    /// PSNR and pairwise relative errors of restored images.
    Compare(CompareArgs),
    /// Run the discrete-calculus identity checks on random instances.
    CheckOperators(CheckArgs),
}

const BLUR_HELP: &str = "gauss:<sigma>, box:<size>, or a PSF graymap whose center pixel (rows/2, cols/2) is the origin";

#[derive(Debug, Args, Clone)]
pub struct DegradeArgs {
    /// Clean input image (8-bit graymap).
    #[arg(long, short, required_unless_present = "phantom", conflicts_with = "phantom")]
    pub input: Option<PathBuf>,
    /// Use a generated Shepp-Logan phantom of this size instead of an input file.
    #[arg(long, value_name = "SIZE")]
    pub phantom: Option<usize>,
    /// Also write the clean image (useful with --phantom).
    #[arg(long, value_name = "PATH")]
    pub original_out: Option<PathBuf>,
    #[arg(long, help = BLUR_HELP)]
    pub blur: String,
    /// Noise level given as the PSNR of the noise alone, in dB.
    #[arg(long, conflicts_with = "noise_sigma", required_unless_present = "noise_sigma")]
    pub target_psnr: Option<f64>,
    /// Noise standard deviation in gray levels.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Also write the noise-free blurred image.
    #[arg(long, value_name = "PATH")]
    pub blurred_out: Option<PathBuf>,
    /// Write ASCII (P2) instead of binary (P5) graymaps.
    #[arg(long)]
    pub ascii: bool,
    /// Manifest path [default: <out>.manifest].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Tvis,
    Mld,
}

#[derive(Debug, Args, Clone)]
pub struct RestoreArgs {
    /// Degraded image (8-bit graymap).
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, help = BLUR_HELP)]
    pub blur: String,
    /// Number of gradient directions.
    #[arg(long = "L", default_value_t = 3)]
    pub directions: usize,
    /// Regularization weight, or `auto` for the Laplace-prior estimate.
    #[arg(long, default_value = "auto")]
    pub lambda: String,
    /// Noise standard deviation for --lambda auto [default: read from <input>.manifest].
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub rel_tol: f64,
    #[arg(long)]
    pub backtracking: bool,
    #[arg(long, default_value_t = 0.8)]
    pub mu: f64,
    /// Step constant c [default: the uniform bound plus slack].
    #[arg(long)]
    pub step: Option<f64>,
    /// Slack added to the uniform bound [default: 1e-3 times the bound].
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum, default_value_t = Solver::Tvis)]
    pub solver: Solver,
    /// Per-iteration CSV trace (TVIS) or per-level table (MLD).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Write the mean-restored image instead of stretching to [0, 255].
    #[arg(long)]
    pub no_renormalize: bool,
    /// Ground truth; adds PSNR to the manifest.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Worker threads. The solvers are sequential; the value is validated and recorded.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub ascii: bool,
    /// Manifest path [default: <out>.manifest].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct CompareArgs {
    /// Ground-truth image.
    #[arg(long, short)]
    pub reference: PathBuf,
    /// Restored images to compare.
    #[arg(required = true, num_args = 2..)]
    pub images: Vec<PathBuf>,
    /// Write the report as a manifest.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct CheckArgs {
    /// Comma-separated grid sizes.
    #[arg(long, default_value = "4x4,5x7,32x48")]
    pub sizes: String,
    /// Comma-separated direction counts.
    #[arg(long, default_value = "1,2,3,5")]
    pub directions: String,
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Negative control: flip the sign of the multidirectional divergence.
    #[arg(long, hide = true)]
    pub flip_mdd_sign: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn cmd_degrade(args: &DegradeArgs) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let mut m = RunManifest::new("degrade");
    let f = match (&args.input, args.phantom) {
        (Some(path), _) => {
            m.set("input", path.display());
            read_image(path)?
        }
        (None, Some(n)) => {
            m.set("input", format!("phantom:{n}"));
            phantom(n, n, PhantomKind::Classic)?
        }
        (None, None) => return Err(CliError::Usage("either --input or --phantom is required".into())),
    };
    let (rows, cols) = f.shape();
    let (spec, h) = resolve_blur(&args.blur, rows, cols)?;
    let noise = match (args.target_psnr, args.noise_sigma) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("--target-psnr and --noise-sigma are mutually exclusive".into()))
        }
        (Some(db), None) => NoiseSpec::target_psnr(db, args.seed),
        (None, Some(s)) => NoiseSpec::sigma(s, args.seed),
        (None, None) => return Err(CliError::Usage("one of --target-psnr or --noise-sigma is required".into())),
    };
    let d = degrade(&f, &h, &noise)?;
    let enc = encoding(args.ascii);
    write_image(&args.out, &d.observed, enc)?;
    if let Some(p) = &args.original_out {
        write_image(p, &f, enc)?;
    }
    if let Some(p) = &args.blurred_out {
        write_image(p, &d.blurred, enc)?;
    }

    m.set("rows", rows);
    m.set("cols", cols);
    m.set("blur", &spec);
    m.set("blur_arg", &args.blur);
    m.set("boundary", "periodic");
    m.set("condition_number", condition_number(&h));
    if let Some(db) = args.target_psnr {
        m.set("target_psnr", db);
    }
    m.set("noise_sigma", d.sigma_n);
    m.set("seed", args.seed);
    m.set("psnr_noise", psnr(&d.observed, &d.blurred)?);
    m.set("psnr_observed_vs_original", psnr(&d.observed, &f)?);
    m.set("psnr_written_vs_blurred", psnr(&quantized(&d.observed), &d.blurred)?);
    m.set("output", args.out.display());
    if let Some(p) = &args.original_out {
        m.set("original_output", p.display());
    }
    if let Some(p) = &args.blurred_out {
        m.set("blurred_output", p.display());
    }
    m.set("duration_s", start.elapsed().as_secs_f64());
    m.write(&args.manifest.clone().unwrap_or_else(|| manifest_path_for(&args.out)))?;
    Ok(m)
}

fn resolve_lambda(args: &RestoreArgs, g: &Image, m: &mut RunManifest) -> Result<f64, CliError> {
    if args.lambda != "auto" {
        let v: f64 = args
            .lambda
            .parse()
            .map_err(|_| CliError::Usage(format!("--lambda expects a number or `auto`, got `{}`", args.lambda)))?;
        m.set("lambda_source", "given");
        return Ok(v);
    }
    let (sigma, source) = match args.noise_sigma {
        Some(s) => (s, "flag".to_string()),
        None => {
            let path = manifest_path_for(&args.input);
            let found = path
                .exists()
                .then(|| RunManifest::read(&path))
                .transpose()?
                .and_then(|im| im.get_f64("noise_sigma"));
            match found {
                Some(s) => (s, path.display().to_string()),
                None => {
                    return Err(CliError::Usage(
                        "--lambda auto needs --noise-sigma or a manifest next to the input".into(),
                    ))
                }
            }
        }
    };
    let est = estimate_lambda(g, sigma * sigma)?;
    m.set("lambda_source", "auto");
    m.set("noise_sigma_source", source);
    m.set("noise_variance", est.noise_variance);
    m.set("gradient_variance", est.gradient_variance);
    m.set("beta", est.beta);
    Ok(est.lambda)
}

fn mld_table(out: &MldOutput) -> String {
    let mut s = String::from("stage,epsilon,outer_iterations,cg_iterations,residual,energy,converged\n");
    for (i, st) in out.stages.iter().enumerate() {
        s.push_str(&format!(
            "{i},{:e},{},{},{:e},{:.17e},{}\n",
            st.epsilon, st.outer_iterations, st.cg_iterations, st.residual, st.energy, st.converged
        ));
    }
    s
}

pub fn cmd_restore(args: &RestoreArgs) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    if args.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let mut m = RunManifest::new("restore");
    let g = read_image(&args.input)?;
    let (rows, cols) = g.shape();
    let (spec, h) = resolve_blur(&args.blur, rows, cols)?;
    let lambda = resolve_lambda(args, &g, &mut m)?;

    m.set("input", args.input.display());
    m.set("rows", rows);
    m.set("cols", cols);
    m.set("blur", &spec);
    m.set("blur_arg", &args.blur);
    m.set("boundary", "periodic");
    m.set("lambda", lambda);
    m.set("threads", args.threads);

    let restored = match args.solver {
        Solver::Tvis => {
            let cfg = SolverConfig {
                lambda,
                directions: args.directions,
                step: args.step,
                epsilon_margin: args.epsilon,
                mu: args.mu,
                max_iters: args.iters,
                rel_tol: args.rel_tol,
                backtracking: args.backtracking,
                renormalize: Renormalize::DataMean,
                ..SolverConfig::default()
            };
            cfg.validate()?;
            let out = restore(&g, &h, &cfg)?;
            let bound = step_constant(rows, cols, args.directions, 0.0);
            m.set("solver", "tvis");
            m.set("L", args.directions);
            m.set("c", out.step);
            m.set("epsilon", out.step - bound);
            m.set("mu", args.mu);
            m.set("backtracking", args.backtracking);
            m.set("energy_guard", cfg.energy_guard);
            m.set("max_iters", args.iters);
            m.set("rel_tol", args.rel_tol);
            m.set("iterations", out.iterations());
            m.set("converged", out.converged);
            if let Some(last) = out.trace.last() {
                m.set("final_energy", last.energy);
                m.set("final_data_term", last.data_term);
                m.set("final_tv_term", last.tv_term);
                m.set("final_c", last.c);
            }
            m.set("max_relative_energy_increase", out.trace.max_relative_increase());
            if let Some(p) = &args.trace {
                fs::write(p, out.trace.to_csv()).map_err(|e| io_err(p, e))?;
            }
            out.restored
        }
        Solver::Mld => {
            let cfg = MldConfig::new(lambda);
            cfg.validate()?;
            let out = mld_restore(&g, &h, &cfg)?;
            m.set("solver", "mld");
            m.set(
                "epsilon_schedule",
                cfg.epsilon_schedule.iter().map(|e| format!("{e:e}")).collect::<Vec<_>>().join(","),
            );
            m.set("cg_tol", cfg.cg_tol);
            m.set("outer_tol", cfg.outer_tol);
            m.set("stages", out.stages.len());
            m.set("cg_iterations", out.stages.iter().map(|s| s.cg_iterations).sum::<usize>());
            m.set("final_residual", out.final_residual());
            m.set("converged", out.stages.last().is_some_and(|s| s.converged));
            if let Some(last) = out.stages.last() {
                m.set("final_energy", last.energy);
            }
            if let Some(p) = &args.trace {
                fs::write(p, mld_table(&out)).map_err(|e| io_err(p, e))?;
            }
            out.restored
        }
    };

    let written = if args.no_renormalize {
        m.set("renormalize", "data_mean");
        restored.clone()
    } else {
        m.set("renormalize", "range255");
        stretch_to_255(&restored)
    };
    write_image(&args.out, &written, encoding(args.ascii))?;
    if let Some(p) = &args.reference {
        let truth = read_image(p)?;
        m.set("reference", p.display());
        m.set("psnr_input", psnr(&g, &truth)?);
        m.set("psnr", psnr(&restored, &truth)?);
    }
    m.set("output", args.out.display());
    if let Some(p) = &args.trace {
        m.set("trace", p.display());
    }
    m.set("duration_s", start.elapsed().as_secs_f64());
    m.write(&args.manifest.clone().unwrap_or_else(|| manifest_path_for(&args.out)))?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub labels: Vec<String>,
    pub psnr: Vec<f64>,
    /// Energy at the final iterate, from each image's manifest when present.
    pub energy: Vec<Option<f64>>,
    /// `(i, j, ||u_i - u_j|| / ||u_j||)` for `i < j`.
    pub pairwise: Vec<(usize, usize, f64)>,
}

impl CompareReport {
    pub fn from_images(truth: &Image, images: &[(String, Image, Option<f64>)]) -> Result<Self, CliError> {
        let mut r = CompareReport {
            labels: Vec::new(),
            psnr: Vec::new(),
            energy: Vec::new(),
            pairwise: Vec::new(),
        };
        for (label, img, e) in images {
            r.labels.push(label.clone());
            r.psnr.push(psnr(img, truth)?);
            r.energy.push(*e);
        }
        for i in 0..images.len() {
            for j in i + 1..images.len() {
                r.pairwise.push((i, j, relative_l2(&images[i].1, &images[j].1)?));
            }
        }
        Ok(r)
    }

    pub fn to_manifest(&self) -> RunManifest {
        let mut m = RunManifest::new("compare");
        for (i, l) in self.labels.iter().enumerate() {
            m.set(&format!("image.{i}"), l);
            m.set(&format!("psnr.{i}"), self.psnr[i]);
            if let Some(e) = self.energy[i] {
                m.set(&format!("energy.{i}"), e);
            }
        }
        for &(i, j, e) in &self.pairwise {
            m.set(&format!("relative_error.{i}.{j}"), e);
        }
        m
    }
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<4} {:>9} {:>16}  image", "#", "PSNR(dB)", "final energy")?;
        for (i, l) in self.labels.iter().enumerate() {
            let e = self.energy[i].map_or("n/a".to_string(), |e| format!("{e:.6e}"));
            writeln!(f, "{i:<4} {:>9.3} {e:>16}  {l}", self.psnr[i])?;
        }
        for &(i, j, e) in &self.pairwise {
            writeln!(f, "relative l2 {i} vs {j}: {:.4}%", 100.0 * e)?;
        }
        Ok(())
    }
}

pub fn cmd_compare(args: &CompareArgs) -> Result<CompareReport, CliError> {
    let truth = read_image(&args.reference)?;
    let mut images = Vec::new();
    for p in &args.images {
        let img = read_image(p)?;
        if img.shape() != truth.shape() {
            return Err(TvError::shape(truth.shape(), img.shape()).into());
        }
        let mp = manifest_path_for(p);
        let energy = if mp.exists() {
            RunManifest::read(&mp)?.get_f64("final_energy")
        } else {
            None
        };
        images.push((p.display().to_string(), img, energy));
    }
    let report = CompareReport::from_images(&truth, &images)?;
    if let Some(out) = &args.out {
        let mut m = report.to_manifest();
        m.set("reference", args.reference.display());
        m.write(out)?;
    }
    Ok(report)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| CliError::Usage(format!("bad {what} `{t}`"))))
        .collect()
}

fn parse_size(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("bad size `{s}`, expected <rows>x<cols>"));
    let (r, c) = s.trim().split_once('x').ok_or_else(bad)?;
    Ok((r.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?))
}

/// Runs the suite; the returned text has one line per check. Any failing check
/// turns into a numerical error carrying the full report.
pub fn cmd_check_operators(args: &CheckArgs) -> Result<String, CliError> {
    let cfg = CheckConfig {
        sizes: args.sizes.split(',').map(parse_size).collect::<Result<_, _>>()?,
        directions: parse_list(&args.directions, "direction count")?,
        instances: args.instances,
        seed: args.seed,
        tolerance: args.tolerance,
        mdd_sign: if args.flip_mdd_sign { -1.0 } else { 1.0 },
        ..CheckConfig::default()
    };
    let results = run_checks(&cfg)?;
    let failed = results.iter().filter(|r| !r.passed()).count();
    let mut text: String = results.iter().map(|r| format!("{r}\n")).collect();
    text.push_str(&format!("{} checks, {failed} failed\n", results.len()));
    if let Some(p) = &args.manifest {
        let mut m = RunManifest::new("check-operators");
        m.set("sizes", &args.sizes);
        m.set("directions", &args.directions);
        m.set("instances", args.instances);
        m.set("seed", args.seed);
        m.set("tolerance", args.tolerance);
        m.set("flip_mdd_sign", args.flip_mdd_sign);
        m.set("checks", results.len());
        m.set("failed", failed);
        m.write(p)?;
    }
    if failed > 0 {
        return Err(CliError::Numerical(text));
    }
    Ok(text)
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Degrade(a) => cmd_degrade(a).map(|m| m.to_string()),
        Command::Restore(a) => cmd_restore(a).map(|m| m.to_string()),
        Command::Compare(a) => cmd_compare(a).map(|r| r.to_string()),
        Command::CheckOperators(a) => cmd_check_operators(a),
    }
}

/// Parse `args` (program name first), run, print, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
