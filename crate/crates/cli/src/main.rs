//! `affinv`: command-line driver for affine-density experiments.

mod config;
mod oracles;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use affinv::coreset::random_box_union;
use affinv::oberlin::CSV_HEADER;
use affinv::{
    affine_density, build_embedding, core_subset, harmonic_untf, index_set, oberlin_experiment, pullback_measure,
    BodyFamilies, FunctionSystem, OptimizerConfig, PolynomialMap, WeightedSampleSet,
};
use clap::{Args, Parser, Subcommand};

use config::FileConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(affinv::Error),
}

impl From<affinv::Error> for CliError {
    fn from(e: affinv::Error) -> Self {
        CliError::Compute(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "affinv", version, about = "Affine curvature tensors, densities and Oberlin ratios")]
struct Cli {
    /// `key = value` file with option defaults; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// κ-sequence, index set Λ and homogeneous dimension Q.
    Homdim {
        d: usize,
        n: usize,
        /// Emit a CSV row instead of plain text.
        #[arg(long)]
        csv: bool,
    },
    /// Affine density of a polynomial map at a point.
    Density(DensityArgs),
    /// Closed-form oracle suites: bilinear, detnorm, curve, hypersurface.
    Oracles(SeedArgs),
    /// Zeroth-order core subsets of polynomial systems on seeded box unions.
    Coreset(CoresetArgs),
    /// Harmonic uniform normalized tight frame of `d` vectors in ℝ^{d0}.
    Frame { d0: usize, d: usize },
    /// Nondegenerate embedding of ℝ^d into ℝ^n in map text format.
    Construct {
        d: usize,
        n: usize,
        #[command(flatten)]
        seed: SeedArgs,
    },
    /// Oberlin ratios μ(K)/|K|^α over seeded random convex bodies.
    Oberlin(OberlinArgs),
}

#[derive(Args, Debug)]
struct SeedArgs {
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct OptimizerArgs {
    /// Optimizer restarts (default 16).
    #[arg(long)]
    restarts: Option<usize>,
    /// Iteration cap per restart (default 2000).
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args, Debug)]
struct DensityArgs {
    #[arg(long, value_name = "FILE")]
    map: Option<PathBuf>,
    /// Comma- or space-separated coordinates; the origin when omitted.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    opt: OptimizerArgs,
}

#[derive(Args, Debug)]
struct CoresetArgs {
    /// Total degree of the polynomial system (default 2).
    #[arg(long)]
    degree: Option<usize>,
    /// Parameter dimension of the unit cube (default 1).
    #[arg(long)]
    dim: Option<usize>,
    /// Grid cells per axis (default 200 for dim 1, 24 otherwise).
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct OberlinArgs {
    #[arg(long, value_name = "FILE")]
    map: Option<PathBuf>,
    /// Exponent α (default d/Q).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    resolution: Option<usize>,
    /// Parameter box `[lo, hi]^d` as `lo,hi` (default `-1,1`).
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a log-log scatter of μ(K) against |K|.
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
    #[command(flatten)]
    opt: OptimizerArgs,
}

fn optimizer(cfg: &FileConfig, a: OptimizerArgs, seed: u64) -> Result<OptimizerConfig, CliError> {
    let base = OptimizerConfig::default();
    Ok(OptimizerConfig {
        restarts: cfg.or("restarts", a.restarts, base.restarts)?,
        max_iterations: cfg.or("max-iterations", a.max_iterations, base.max_iterations)?,
        ..base
    }
    .with_seed(seed))
}

fn read_map(path: Option<PathBuf>, cfg: &FileConfig) -> Result<PolynomialMap, CliError> {
    let path = cfg.get::<PathBuf>("map", path)?.ok_or_else(|| CliError::Usage("--map FILE is required".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("file-not-found: cannot read {}: {e}", path.display())))?;
    Ok(PolynomialMap::parse(&text)?)
}

fn parse_reals(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| CliError::Usage(format!("{what}: cannot parse {t:?}: {e}"))))
        .collect()
}

fn join<T: std::fmt::Display>(v: &[T], sep: &str) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

fn homdim(d: usize, n: usize, csv: bool) -> Result<String, CliError> {
    let set = index_set(d, n)?;
    let lambda: Vec<String> = set.lambda().iter().map(|(j, k)| format!("({j},{k})")).collect();
    Ok(if csv {
        format!("d,n,Q,kappa,lambda\n{d},{n},{},{},{}\n", set.q(), join(set.kappa(), ";"), lambda.join(";"))
    } else {
        format!("κ=[{}]\nΛ=[{}]\nQ={}\n", join(set.kappa(), ","), lambda.join(","), set.q())
    })
}

fn density(a: DensityArgs, cfg: &FileConfig) -> Result<String, CliError> {
    cfg.restrict(&["map", "point", "seed", "restarts", "max-iterations"])?;
    let f = read_map(a.map, cfg)?;
    let seed = cfg.or("seed", a.seed, 0)?;
    let opt = optimizer(cfg, a.opt, seed)?;
    let point = match cfg.get::<String>("point", a.point)? {
        Some(s) => parse_reals(&s, "point")?,
        None => vec![0.0; f.d()],
    };
    if point.len() != f.d() {
        return Err(CliError::Usage(format!("point has {} coordinates, the map has d = {}", point.len(), f.d())));
    }
    let q = index_set(f.d(), f.n())?.q();
    let r = affine_density(&f, &point, &opt)?;
    Ok(format!(
        "d,n,Q,density,infimum,nullcone,iterations\n{},{},{q},{},{},{},{}\n",
        f.d(),
        f.n(),
        r.density,
        r.infimum,
        r.nullcone_suspected,
        r.iterations
    ))
}

fn run_oracles(a: SeedArgs, cfg: &FileConfig) -> Result<(String, bool), CliError> {
    cfg.restrict(&["seed"])?;
    let seed = cfg.or("seed", a.seed, 0)?;
    let opt = OptimizerConfig::default().with_seed(seed);
    let mut out = String::new();
    let mut all = true;
    for s in oracles::run_all(seed, &opt)? {
        all &= s.passed();
        let _ = writeln!(
            out,
            "{} {}: {} cases, worst gap {:e} (tolerance {:e})",
            if s.passed() { "PASS" } else { "FAIL" },
            s.name,
            s.cases,
            s.worst_gap,
            s.tolerance
        );
    }
    Ok((out, all))
}

fn coreset(a: CoresetArgs, cfg: &FileConfig) -> Result<String, CliError> {
    cfg.restrict(&["degree", "dim", "grid", "trials", "seed"])?;
    let degree = cfg.or("degree", a.degree, 2)?;
    let dim = cfg.or("dim", a.dim, 1)?;
    let grid = cfg.or("grid", a.grid, if dim == 1 { 200 } else { 24 })?;
    let trials = cfg.or("trials", a.trials, 10)?;
    let seed = cfg.or("seed", a.seed, 0)?;
    let (lo, hi) = (vec![0.0; dim], vec![1.0; dim]);
    let f = FunctionSystem::polynomials(degree, lo.clone(), hi.clone())?;
    let base = WeightedSampleSet::uniform_grid(&lo, &hi, grid)?;
    let min_frac = ((degree as f64 + 1.5) / grid as f64).clamp(0.05, 0.5);
    let mut out = String::from("trial,seed,k,eps_b,mass_ratio,sup_constant,sup_bound\n");
    for t in 0..trials {
        let s = seed.wrapping_add(t as u64);
        let mask = random_box_union(&base, &lo, &hi, min_frac, 0.5, 2 * f.k(), s);
        let mu = base.clone().with_mask(mask)?;
        let r = core_subset(&f, &mu, s)?;
        let _ = writeln!(out, "{t},{s},{},{},{},{},{}", f.k(), r.eps_b, r.mass_ratio, r.sup_bound_constant, r.sup_bound);
    }
    Ok(out)
}

fn frame(d0: usize, d: usize) -> Result<String, CliError> {
    let f = harmonic_untf(d0, d)?;
    let mut out = format!(
        "# tightness residual {:e}, uniformity residual {:e}\nj,{}\n",
        f.tightness_residual(),
        f.uniformity_residual(),
        (1..=d0).map(|k| format!("phi{k}")).collect::<Vec<_>>().join(",")
    );
    for (j, v) in f.vectors().iter().enumerate() {
        let _ = writeln!(out, "{},{}", j + 1, join(v, ","));
    }
    Ok(out)
}

fn oberlin(a: OberlinArgs, cfg: &FileConfig) -> Result<String, CliError> {
    cfg.restrict(&["map", "alpha", "trials", "resolution", "domain", "seed", "svg", "restarts", "max-iterations"])?;
    let f = read_map(a.map, cfg)?;
    let seed = cfg.or("seed", a.seed, 0)?;
    let opt = optimizer(cfg, a.opt, seed)?;
    let q = index_set(f.d(), f.n())?.q();
    let alpha = cfg.or("alpha", a.alpha, f.d() as f64 / q as f64)?;
    let trials = cfg.or("trials", a.trials, 1000)?;
    let resolution = cfg.or("resolution", a.resolution, 64)?;
    let domain = parse_reals(&cfg.or("domain", a.domain, "-1,1".to_string())?, "domain")?;
    let [lo, hi] = domain[..] else {
        return Err(CliError::Usage("domain must be lo,hi".into()));
    };
    let mu = pullback_measure(&f, &vec![lo; f.d()], &vec![hi; f.d()], resolution, &opt)?;
    let report = oberlin_experiment(&mu, alpha, BodyFamilies::all(), trials, seed)?;
    if let Some(path) = cfg.get::<PathBuf>("svg", a.svg)? {
        write_file(&path, &report.to_svg())?;
    }
    debug_assert!(report.to_csv().starts_with(CSV_HEADER));
    Ok(report.to_csv())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(String, bool), CliError> {
    let cfg = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let ok = |s: String| Ok((s, true));
    match cli.command {
        Command::Homdim { d, n, csv } => {
            cfg.restrict(&[])?;
            ok(homdim(d, n, csv)?)
        }
        Command::Density(a) => ok(density(a, &cfg)?),
        Command::Oracles(a) => run_oracles(a, &cfg),
        Command::Coreset(a) => ok(coreset(a, &cfg)?),
        Command::Frame { d0, d } => {
            cfg.restrict(&[])?;
            ok(frame(d0, d)?)
        }
        Command::Construct { d, n, seed } => {
            cfg.restrict(&["seed"])?;
            let seed = cfg.or("seed", seed.seed, 0)?;
            ok(build_embedding(d, n, seed)?.to_text())
        }
        Command::Oberlin(a) => ok(oberlin(a, &cfg)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((out, all_passed)) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            if all_passed { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Compute(e)) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(1)
        }
    }
}
