//! Subcommand implementations.
//!
//! Every command writes its artifacts under `--output` with an embedded run
//! manifest and prints a short human summary to stdout. Exit code 0 means the
//! run completed and every checked inequality held; 1 means the run completed
//! but a mathematical check failed; 2 means the inputs never made it to the
//! math (usage errors, unreadable files, invalid lattices).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use dyadlab_core::bellman::{optimize_family, BellmanCandidate, GridSpec};
use dyadlab_core::formats;
use dyadlab_core::generate;
use dyadlab_core::haar::StepFunction;
use dyadlab_core::lattice::{LatticeSpec, NodeId};
use dyadlab_core::lemma::{duality_constant, duality_sum, verify_key_lemma, AdmissiblePair};
use dyadlab_core::search::{search, SearchConfig, Strategy};
use dyadlab_core::tolerances::RATIO_CEILING_SLACK;
use dyadlab_core::Error as CoreError;

use crate::manifest::{self, RunManifest};

/// Errors are split by exit code: a failed mathematical check is 1, anything
/// that prevented the check from running is 2.
#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    Io { path: PathBuf, source: std::io::Error },
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            // These three mean the math ran and came out false.
            CliError::Core(
                CoreError::Inadmissible(..)
                | CoreError::CrossCheck(..)
                | CoreError::CertificationFailed(..),
            ) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(out, "{e}"),
            CliError::Io { path, source } => write!(out, "{}: {source}", path.display()),
            CliError::Usage(msg) => write!(out, "{msg}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser)]
#[command(
    name = "dyadlab",
    version,
    about = "Dyadic analysis laboratory: Bellman candidates, induction on scales, duality pairings, extremal search"
)]
pub struct Cli {
    /// Directory where output artifacts are written (created on demand)
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    pub output: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Check a Bellman candidate against the six pointwise conditions
    VerifyBellman(VerifyBellmanArgs),
    /// Run the induction on scales for an admissible pair and one candidate
    RunLemma(RunLemmaArgs),
    /// Pair two step functions and test the sqrt(2)/4 product bound
    CheckDuality(CheckDualityArgs),
    /// Search for pairs maximizing pairing / (oscillation x square-function)
    SearchExtremal(SearchExtremalArgs),
    /// Generate sample inputs: random steps, Haar functions, cancellative atoms
    Gen(GenArgs),
}

pub fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::VerifyBellman(args) => verify_bellman(&cli.output, args),
        Command::RunLemma(args) => run_lemma(&cli.output, args),
        Command::CheckDuality(args) => check_duality(&cli.output, args),
        Command::SearchExtremal(args) => search_extremal(&cli.output, args),
        Command::Gen(args) => gen(&cli.output, args),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Step functions travel as JSON (`.json`) or one-value-per-line CSV
/// (anything else).
fn load_step_function(path: &Path) -> Result<StepFunction<f64>, CliError> {
    let text = read_file(path)?;
    let is_json = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false);
    let f = if is_json {
        formats::step_function_from_json::<f64>(&text)?
    } else {
        formats::step_function_from_csv::<f64>(&text)?
    };
    Ok(f)
}

/// Serialize the parsed arguments, with the output directory, as the manifest
/// `config` echo.
fn config_value<A: Serialize>(args: &A, output: &Path) -> Value {
    let mut v = serde_json::to_value(args).expect("arguments serialize");
    if let Value::Object(map) = &mut v {
        map.insert("output".to_string(), json!(output));
    }
    v
}

// ---------------------------------------------------------------------------
// verify-bellman

#[derive(Args, Serialize)]
pub struct VerifyBellmanArgs {
    /// Closed-form candidate "A=<value>"; needs --mbar
    #[arg(long, value_name = "A=VALUE", requires = "mbar", conflicts_with = "grid")]
    family: Option<String>,

    /// Cap parameter for the family candidate
    #[arg(long, requires = "family")]
    mbar: Option<f64>,

    /// JSON file with a candidate tabulated on a grid
    #[arg(long, value_name = "FILE")]
    grid: Option<PathBuf>,

    /// Verification grid "xmin,xmax,xcount,ycount" (built-in grid if omitted)
    #[arg(long, value_name = "SPEC")]
    grid_spec: Option<String>,

    /// Per-condition margin tolerance
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,

    /// Also report the optimal family member for this cap
    #[arg(long, default_value_t = false)]
    optimize: bool,
}

fn parse_family(text: &str) -> Result<f64, CliError> {
    let body = text
        .strip_prefix("A=")
        .or_else(|| text.strip_prefix("a="))
        .unwrap_or(text);
    body.trim().parse::<f64>().map_err(|_| {
        CliError::Usage(format!(
            "cannot parse family parameter {text:?}; expected the form A=<number>"
        ))
    })
}

fn parse_grid_spec(text: &str) -> Result<GridSpec<f64>, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(CliError::Usage(format!(
            "grid spec {text:?} must be xmin,xmax,xcount,ycount"
        )));
    }
    let bad = |what: &str| CliError::Usage(format!("grid spec {text:?}: bad {what}"));
    let x_min: f64 = parts[0].parse().map_err(|_| bad("xmin"))?;
    let x_max: f64 = parts[1].parse().map_err(|_| bad("xmax"))?;
    let x_count: usize = parts[2].parse().map_err(|_| bad("xcount"))?;
    let y_count: usize = parts[3].parse().map_err(|_| bad("ycount"))?;
    Ok(GridSpec::new(x_min, x_max, x_count, y_count)?)
}

fn verify_bellman(output: &Path, args: VerifyBellmanArgs) -> Result<bool, CliError> {
    let candidate = match (&args.family, &args.grid) {
        (Some(spec), None) => {
            let a = parse_family(spec)?;
            let mbar = args.mbar.expect("clap enforces --mbar with --family");
            BellmanCandidate::family(a, mbar)?
        }
        (None, Some(path)) => formats::grid_candidate_from_json::<f64>(&read_file(path)?)?,
        _ => {
            return Err(CliError::Usage(
                "pass exactly one candidate: --family A=<value> --mbar <cap>, or --grid <file>"
                    .to_string(),
            ))
        }
    };
    let grid = args.grid_spec.as_deref().map(parse_grid_spec).transpose()?;

    let report = candidate.verify(grid.as_ref(), args.tol)?;
    for rec in &report.records {
        let verdict = if rec.passed { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {:<18} worst_margin={} at (x={}, y={})",
            rec.condition.to_string(),
            rec.worst_margin,
            rec.worst_x,
            rec.worst_y
        );
    }

    let optimum = if args.optimize {
        let opt = optimize_family(candidate.mbar())?;
        println!(
            "optimal family member: A*={} ratio={}",
            opt.a_star, opt.ratio_star
        );
        Some(opt)
    } else {
        None
    };

    let passed = report.all_passed;
    if passed {
        println!("bellman candidate: all conditions hold (tol={})", args.tol);
    } else {
        let names: Vec<String> = report.failing().iter().map(|c| c.to_string()).collect();
        println!("bellman candidate: FAILED {}", names.join(", "));
    }

    let man = RunManifest::new(
        "verify-bellman",
        None,
        config_value(&args, output),
        if passed { "pass" } else { "fail" },
    );
    let mut envelope = man.envelope("report", json!(report));
    if let (Value::Object(map), Some(opt)) = (&mut envelope, optimum) {
        map.insert("optimum".to_string(), json!(opt));
    }
    let path = manifest::prepare(output, "bellman_report.json")?;
    manifest::write_json(&path, &envelope)?;
    println!("wrote {}", path.display());
    Ok(passed)
}

// ---------------------------------------------------------------------------
// run-lemma

#[derive(Args, Serialize)]
pub struct RunLemmaArgs {
    /// JSON file {"f": <step function>, "phi": <step function>}
    #[arg(long, value_name = "FILE")]
    pair: Option<PathBuf>,

    /// Step-function file for f (with --phi)
    #[arg(long, value_name = "FILE", requires = "phi")]
    f: Option<PathBuf>,

    /// Step-function file for phi (with --f)
    #[arg(long, value_name = "FILE", requires = "f")]
    phi: Option<PathBuf>,

    /// JSON file carrying the (S, M) node functionals directly
    #[arg(long, value_name = "FILE")]
    sm: Option<PathBuf>,

    /// Split dimension for a randomly generated pair (with --depth)
    #[arg(long, requires = "depth")]
    dim: Option<u32>,

    /// Lattice depth for a randomly generated pair (with --dim)
    #[arg(long, requires = "dim")]
    depth: Option<u32>,

    /// Truncation level n (defaults to the full lattice depth)
    #[arg(long, value_name = "N")]
    depth_n: Option<u32>,

    /// Seed for the random-pair mode
    #[arg(long, env = "DYADLAB_SEED", default_value_t = 0)]
    seed: u64,

    /// Margin tolerance for node and truncation checks
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Deserialize)]
struct FunctionPairDoc {
    f: Value,
    phi: Value,
}

fn load_pair(args: &RunLemmaArgs) -> Result<(AdmissiblePair<f64>, bool), CliError> {
    let modes = [
        args.pair.is_some(),
        args.f.is_some(),
        args.sm.is_some(),
        args.dim.is_some(),
    ];
    if modes.iter().filter(|&&m| m).count() != 1 {
        return Err(CliError::Usage(
            "pass exactly one input mode: --pair <file>, --f <file> --phi <file>, --sm <file>, \
             or --dim <d> --depth <n>"
                .to_string(),
        ));
    }

    if let Some(path) = &args.pair {
        let text = read_file(path)?;
        let doc: FunctionPairDoc = serde_json::from_str(&text)
            .map_err(|e| CoreError::Format(format!("{}: {e}", path.display())))?;
        let f = formats::step_function_from_json::<f64>(&doc.f.to_string())?;
        let phi = formats::step_function_from_json::<f64>(&doc.phi.to_string())?;
        return Ok((AdmissiblePair::from_functions(&f, &phi)?, false));
    }
    if let (Some(fp), Some(pp)) = (&args.f, &args.phi) {
        let f = load_step_function(fp)?;
        let phi = load_step_function(pp)?;
        return Ok((AdmissiblePair::from_functions(&f, &phi)?, false));
    }
    if let Some(path) = &args.sm {
        let pair = formats::pair_from_json::<f64>(&read_file(path)?, args.tol)?;
        return Ok((pair, false));
    }
    let (dim, depth) = (args.dim.unwrap(), args.depth.unwrap());
    let spec = LatticeSpec::new(dim, depth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    Ok((generate::random_admissible_pair(spec, &mut rng)?, true))
}

fn run_lemma(output: &Path, args: RunLemmaArgs) -> Result<bool, CliError> {
    let (pair, random_mode) = load_pair(&args)?;
    let spec = *pair.spec();
    let depth_n = args.depth_n.unwrap_or(spec.depth());
    let cap = if pair.mbar() > 0.0 { pair.mbar() } else { 1.0 };
    let candidate = BellmanCandidate::sample(cap)?;

    println!(
        "pair: dim={} depth={} mbar={}  candidate cap={}",
        spec.dim(),
        spec.depth(),
        pair.mbar(),
        cap
    );

    let trace = verify_key_lemma(&candidate, &pair, depth_n, args.tol)?;

    println!(
        "induction to n={}: lhs={} rhs={} slack={}",
        trace.depth_n,
        trace.lhs,
        trace.rhs,
        trace.rhs - trace.lhs
    );
    println!(
        "worst node margin {} (scaled {}) at {}",
        trace.min_margin, trace.min_scaled_margin, trace.min_margin_node
    );
    for level in &trace.truncations {
        println!(
            "  level {:>2}: lhs={} rhs={} {}",
            level.level,
            level.lhs,
            level.rhs,
            if level.passed { "ok" } else { "VIOLATED" }
        );
    }
    println!(
        "telescope: lhs={} rhs+margins={} gap={}",
        trace.telescope_lhs,
        trace.telescope_rhs + trace.margin_total,
        trace.telescope_gap
    );
    println!(
        "key lemma: {}",
        if trace.passed { "PASS" } else { "FAIL" }
    );

    let man = RunManifest::new(
        "run-lemma",
        random_mode.then_some(args.seed),
        config_value(&args, output),
        if trace.passed { "pass" } else { "fail" },
    );
    let path = manifest::prepare(output, "lemma_trace.json")?;
    manifest::write_json(&path, &man.envelope("trace", json!(trace)))?;
    println!("wrote {}", path.display());
    Ok(trace.passed)
}

// ---------------------------------------------------------------------------
// check-duality

#[derive(Args, Serialize)]
pub struct CheckDualityArgs {
    /// Step-function file for f, the square-function side
    #[arg(long, value_name = "FILE")]
    f: PathBuf,

    /// Step-function file for phi, the oscillation side
    #[arg(long, value_name = "FILE")]
    phi: PathBuf,
}

#[derive(Serialize)]
struct DualityReport {
    duality_sum: f64,
    bmo_norm: f64,
    tl_norm: f64,
    constant: f64,
    bound: f64,
    /// `duality_sum / (bmo_norm * tl_norm)`; null when a norm vanishes.
    ratio: Option<f64>,
    bound_holds: bool,
}

fn check_duality(output: &Path, args: CheckDualityArgs) -> Result<bool, CliError> {
    let f = load_step_function(&args.f)?;
    let phi = load_step_function(&args.phi)?;

    let sum = duality_sum(&f, &phi)?;
    let bmo = phi.bmo_norm();
    let tl = f.tl_norm();
    let constant = duality_constant::<f64>();
    let bound = constant * bmo * tl;
    let ratio = if bmo > 0.0 && tl > 0.0 {
        Some(sum / (bmo * tl))
    } else {
        None
    };
    let bound_holds = sum <= bound + RATIO_CEILING_SLACK * 1.0f64.max(bound);

    let report = DualityReport {
        duality_sum: sum,
        bmo_norm: bmo,
        tl_norm: tl,
        constant,
        bound,
        ratio,
        bound_holds,
    };

    println!("duality_sum={sum} bmo(phi)={bmo} tl(f)={tl}");
    println!("bound = sqrt(2)/4 * bmo * tl = {bound}");
    match ratio {
        Some(r) => println!("ratio={r}"),
        None => println!("ratio undefined: a norm vanishes, the bound is trivial"),
    }
    println!(
        "bound {}",
        if bound_holds { "holds" } else { "VIOLATED" }
    );

    let man = RunManifest::new(
        "check-duality",
        None,
        config_value(&args, output),
        if bound_holds { "pass" } else { "fail" },
    );
    let path = manifest::prepare(output, "duality_report.json")?;
    manifest::write_json(&path, &man.envelope("report", json!(report)))?;
    println!("wrote {}", path.display());
    Ok(bound_holds)
}

// ---------------------------------------------------------------------------
// search-extremal

#[derive(Args, Serialize)]
pub struct SearchExtremalArgs {
    /// Depth to search, or inclusive sweep "A..B"
    #[arg(long, value_name = "N|A..B")]
    depth: String,

    /// Proposals per restart
    #[arg(long, default_value_t = 1000)]
    iters: u32,

    /// Seed; restart r at any depth uses seed + r
    #[arg(long, env = "DYADLAB_SEED", default_value_t = 0)]
    seed: u64,

    /// random | coordinate-ascent | hybrid
    #[arg(long, default_value = "hybrid")]
    strategy: String,

    /// Independent restarts per depth
    #[arg(long, default_value_t = 4)]
    restarts: u32,
}

fn parse_depth_range(text: &str) -> Result<Vec<u32>, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "cannot parse depth {text:?}; expected a number or an inclusive range A..B"
        ))
    };
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().strip_prefix('=').unwrap_or(hi.trim()).trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(CliError::Usage(format!("empty depth range {text:?}")));
        }
        Ok((lo..=hi).collect())
    } else {
        Ok(vec![text.trim().parse().map_err(|_| bad())?])
    }
}

fn search_extremal(output: &Path, args: SearchExtremalArgs) -> Result<bool, CliError> {
    let depths = parse_depth_range(&args.depth)?;
    let strategy = Strategy::from_str(&args.strategy)?;

    let man = RunManifest::new(
        "search-extremal",
        Some(args.seed),
        config_value(&args, output),
        "pass",
    );

    let mut csv = format!("# manifest: {}\n", man.compact());
    csv.push_str("depth,best_ratio,iterations,strategy\n");

    for &depth in &depths {
        let config = SearchConfig {
            depth,
            iterations: args.iters,
            seed: args.seed,
            strategy,
            restarts: args.restarts,
        };
        let result = search::<f64>(&config)?;
        println!(
            "depth {depth}: best_ratio={} over {} restarts x {} iters ({})",
            result.best_ratio, args.restarts, args.iters, strategy
        );

        let result_doc: Value = serde_json::from_str(&formats::search_result_to_json(&result)?)
            .expect("search result JSON parses");
        let path = manifest::prepare(output, &format!("search_depth{depth}.json"))?;
        manifest::write_json(&path, &man.envelope("result", result_doc))?;

        let f_doc = formats::step_function_to_json(&result.f_star.reconstruct())?;
        let path = manifest::prepare(output, &format!("extremal_f_depth{depth}.json"))?;
        manifest::write_json(&path, &manifest::embed(&f_doc, &man))?;

        let phi_doc = formats::step_function_to_json(&result.phi_star.reconstruct())?;
        let path = manifest::prepare(output, &format!("extremal_phi_depth{depth}.json"))?;
        manifest::write_json(&path, &manifest::embed(&phi_doc, &man))?;

        csv.push_str(&format!(
            "{depth},{},{},{}\n",
            result.best_ratio, args.iters, strategy
        ));
    }

    let path = manifest::prepare(output, "ratio_vs_depth.csv")?;
    manifest::write_text(&path, &csv)?;
    println!("wrote {}", path.display());
    Ok(true)
}

// ---------------------------------------------------------------------------
// gen

#[derive(Copy, Clone, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    /// Independent uniform values on the leaves
    Random,
    /// A single Haar function
    Haar,
    /// A mean-zero profile supported on one node, bounded by 1/|supp|
    Atom,
}

impl GenKind {
    fn name(self) -> &'static str {
        match self {
            GenKind::Random => "random",
            GenKind::Haar => "haar",
            GenKind::Atom => "atom",
        }
    }
}

#[derive(Args, Serialize)]
pub struct GenArgs {
    /// What to generate
    #[arg(long, value_enum)]
    kind: GenKind,

    /// Lattice depth (at most 12)
    #[arg(long)]
    depth: u32,

    /// RNG seed
    #[arg(long, env = "DYADLAB_SEED", default_value_t = 0)]
    seed: u64,

    /// Target node "k,i" for haar and atom kinds
    #[arg(long, value_name = "K,I", default_value = "0,0")]
    node: String,
}

const MAX_GEN_DEPTH: u32 = 12;

fn parse_node(text: &str) -> Result<NodeId, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "cannot parse node {text:?}; expected generation,index as in 2,3"
        ))
    };
    let (k, i) = text.split_once(',').ok_or_else(bad)?;
    let k: u32 = k.trim().parse().map_err(|_| bad())?;
    let i: u64 = i.trim().parse().map_err(|_| bad())?;
    Ok(NodeId::new(k, i))
}

fn gen(output: &Path, args: GenArgs) -> Result<bool, CliError> {
    if args.depth == 0 || args.depth > MAX_GEN_DEPTH {
        return Err(CliError::Usage(format!(
            "depth {} outside the supported range 1..={MAX_GEN_DEPTH}",
            args.depth
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let f: StepFunction<f64> = match args.kind {
        GenKind::Random => generate::random_step_function(args.depth, &mut rng)?,
        GenKind::Haar => StepFunction::haar(args.depth, parse_node(&args.node)?)?,
        GenKind::Atom => generate::random_atom(args.depth, parse_node(&args.node)?, &mut rng)?,
    };

    let uses_rng = matches!(args.kind, GenKind::Random | GenKind::Atom);
    let man = RunManifest::new(
        "gen",
        uses_rng.then_some(args.seed),
        config_value(&args, output),
        "generated",
    );
    let doc = formats::step_function_to_json(&f)?;
    let path = manifest::prepare(output, &format!("gen_{}.json", args.kind.name()))?;
    manifest::write_json(&path, &manifest::embed(&doc, &man))?;
    println!(
        "wrote {} (depth {}, mean {})",
        path.display(),
        args.depth,
        f.mean()
    );
    Ok(true)
}
