//! Command-line front end for the spin-chain OTOC laboratory.
//!
//! One binary, eight subcommands: `spectrum`, `otoc`, `fn`, `haar`,
//! `eth`, `leakage`, `scaling`, and `verify`. Every run prints a short
//! text report to stdout; `--output` additionally writes a CSV or JSON
//! artifact that embeds the tool version, a hash of the canonical
//! configuration, and the seed, so identical configurations are
//! byte-comparable across reruns.
//!
//! Exit codes: 0 on success, 1 when a computed check fails (or a
//! computation errors out), 2 on usage errors.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use otoc_lab::cache::{self, CacheStatus};
use otoc_lab::eth::{diagonal_moment, diagonal_profile, fit_linear_response, zero_density_fraction};
use otoc_lab::haar::{haar_otoc_monte_carlo, seeded_hermitian_quadruple};
use otoc_lab::operators::{
    build_chain_hamiltonian, site_operator, DenseOperator, HamiltonianModel, PauliAxis,
};
use otoc_lab::otoc::{
    eigenstate_formula_average, generic_closed_form_average, sampled_infinite_time_average,
    theory_prediction, translation_averaged_fn, OtocEstimate, OtocQuery, Route, TimeSampler,
};
use otoc_lab::record::{self, RunMetadata};
use otoc_lab::scaling::{
    power_law_fit, run_scaling_sweep, Observable, SweepConfig, SWEEP_GENERICITY_TOL,
};
use otoc_lab::spectral::{check_generic_spectrum, microcanonical_leakage, to_energy_basis};
use otoc_lab::{par, C64};

/// Default collision-scan tolerance for spectrum reports and closed-form
/// gating on a single size.
const DEFAULT_SCAN_TOL: f64 = 1e-8;
/// Total scratch budget the thread cap protects (bytes).
const SCRATCH_BUDGET: usize = 4 << 30;

#[derive(Parser)]
#[command(
    name = "otoc-lab",
    version,
    about = "Late-time OTOCs of finite spin chains: spectra, closed forms, Monte Carlo, and scaling sweeps",
    after_help = "Defaults: --g 0.1, --seed 0, --tol-generic 1e-8 (scaling sweeps gate at 1e-12), \
                  --target-se 1e-4, --max-samples 100000, --tail 5, --threads = available cores \
                  capped by a memory heuristic at the largest size in the run. \
                  The spectrum cache directory falls back to the OTOC_LAB_CACHE environment variable."
)]
struct Cli {
    /// Key=value configuration file; explicit flags take precedence.
    /// Recognized keys: g, seed, tol-generic, target-se, max-samples,
    /// tail, cache-dir, threads, format.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Transverse-chain coupling of the sigma-y sigma-z term [default: 0.1]
    #[arg(long, global = true)]
    g: Option<f64>,

    /// Seed for every stochastic route [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Collision-scan tolerance [default: 1e-8; scaling sweeps: 1e-12]
    #[arg(long, global = true, value_name = "TOL")]
    tol_generic: Option<f64>,

    /// Target standard error for sampled time averages [default: 1e-4]
    #[arg(long, global = true, value_name = "SE")]
    target_se: Option<f64>,

    /// Sample cap for sampled time averages [default: 100000]
    #[arg(long, global = true, value_name = "N")]
    max_samples: Option<usize>,

    /// Points in the power-law fit tail [default: 5]
    #[arg(long, global = true, value_name = "N")]
    tail: Option<usize>,

    /// Spectrum cache directory [default: $OTOC_LAB_CACHE if set]
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,

    /// Worker threads [default: available cores, memory-capped]
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Artifact path (a directory for `scaling`, a file elsewhere)
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Artifact and diagnostic format [default: csv for spectrum/eth/
    /// leakage/scaling, json for otoc/fn/haar/verify]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    /// Monte Carlo average over uniformly sampled times
    Sampled,
    /// Collision-free closed form (requires a passing collision scan)
    Closed,
    /// Diagonal (eigenstate-expectation) formula
    Eigenstate,
    /// Leading-order structural prediction from Hamiltonian overlaps
    Theory,
}

#[derive(Subcommand)]
enum Command {
    /// Diagonalize the chain and scan for additive spectral collisions.
    /// Exits 1 when the spectrum fails the scan.
    Spectrum {
        /// Chain length (sites)
        #[arg(long)]
        n: usize,
    },
    /// One infinite-time OTOC average by the route of your choice.
    Otoc {
        /// Chain length (sites)
        #[arg(long)]
        n: usize,
        /// Evaluation route
        #[arg(long, value_enum, default_value = "closed")]
        route: RouteArg,
        /// Slot A operator: x/y/zSITE (Pauli) or hSITE (chain term) [default: x1]
        #[arg(long)]
        a: Option<String>,
        /// Slot B operator [default: --a]
        #[arg(long)]
        b: Option<String>,
        /// Slot C operator [default: --a]
        #[arg(long)]
        c: Option<String>,
        /// Slot D operator [default: --b]
        #[arg(long)]
        d: Option<String>,
    },
    /// Translation-averaged late-time sigma-x correlator F_n.
    #[command(name = "fn")]
    FnAvg {
        /// Chain length (sites)
        #[arg(long)]
        n: usize,
    },
    /// Haar Monte Carlo vs the exact ensemble closed form.
    Haar {
        /// Hilbert-space dimension
        #[arg(long)]
        dim: usize,
        /// Monte Carlo draws [default: 10000]
        #[arg(long)]
        samples: Option<usize>,
        /// Operator quadruple [default: preset-x]
        #[arg(long, value_enum, default_value = "preset-x")]
        quadruple: QuadrupleArg,
    },
    /// Diagonal-profile fit, moments, and zero-density fraction.
    Eth {
        /// Chain length (sites)
        #[arg(long)]
        n: usize,
        /// Profiled operator: x/y/zSITE or hSITE [default: x1]
        #[arg(long)]
        probe: Option<String>,
        /// Energy-density half-width of the line fit [default: 0.5]
        #[arg(long)]
        window: Option<f64>,
        /// Exponent for the |E| >= n^theta zero-density count [default: 0.51]
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Off-diagonal leakage between separated energy windows.
    Leakage {
        /// Chain length (sites)
        #[arg(long)]
        n: usize,
        /// Probed operator [default: x1]
        #[arg(long)]
        probe: Option<String>,
        /// Lower window edge [default: 0]
        #[arg(long)]
        eps: Option<f64>,
        /// Largest window gap; the sweep runs gaps 1..=MAX [default: 8]
        #[arg(long, value_name = "MAX")]
        max_gap: Option<usize>,
    },
    /// Observable sweep across sizes with a power-law fit; writes the
    /// plot-ready CSV and fit JSON into --output [default: .].
    Scaling {
        /// Observable: fn, gn, gn-fn, or residual
        #[arg(long, default_value = "fn")]
        observable: String,
        /// Size or inclusive range A..B [default: 5..12]
        #[arg(long, visible_alias = "n-range", value_name = "N|A..B")]
        n: Option<String>,
    },
    /// Run the full desk-scale verification suite. Exits 1 when any
    /// check fails.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuadrupleArg {
    /// All four slots sigma-x (dimension 2 only; exact value -1/3)
    PresetX,
    /// Four seeded Gaussian Hermitian operators
    Random,
}

/// Failures after argument parsing, tagged with the exit code they map
/// to: usage problems exit 2, failed checks and computations exit 1.
enum RunError {
    Usage(String),
    Check(String),
    Failed(String),
}

impl RunError {
    fn code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 2,
            RunError::Check(_) | RunError::Failed(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            RunError::Usage(_) => "usage",
            RunError::Check(_) => "check_failure",
            RunError::Failed(_) => "failure",
        }
    }

    fn message(&self) -> &str {
        match self {
            RunError::Usage(m) | RunError::Check(m) | RunError::Failed(m) => m,
        }
    }
}

impl From<otoc_lab::Error> for RunError {
    fn from(e: otoc_lab::Error) -> Self {
        RunError::Failed(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> RunError {
    RunError::Usage(msg.into())
}

/// Fully resolved run options: flag > config file > documented default.
struct Settings {
    g: f64,
    seed: u64,
    /// None means "use the per-command default" (1e-8 for single-size
    /// scans, the tighter sweep gate for scaling).
    tol_generic: Option<f64>,
    target_se: f64,
    max_samples: usize,
    tail: usize,
    cache_dir: Option<PathBuf>,
    threads: Option<usize>,
    output: Option<PathBuf>,
    format: Option<Format>,
}

impl Settings {
    fn scan_tol(&self) -> f64 {
        self.tol_generic.unwrap_or(DEFAULT_SCAN_TOL)
    }

    fn sweep_tol(&self) -> f64 {
        self.tol_generic.unwrap_or(SWEEP_GENERICITY_TOL)
    }

    fn format_for(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

/// Keys the configuration file may set (the shared options; sizes and
/// per-subcommand arguments stay on the command line).
const CONFIG_KEYS: [&str; 9] = [
    "g",
    "seed",
    "tol-generic",
    "target-se",
    "max-samples",
    "tail",
    "cache-dir",
    "threads",
    "format",
];

fn parse_config_file(path: &Path) -> Result<HashMap<String, String>, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("--config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(usage(format!(
                "--config {}: line {} is not key=value: '{raw}'",
                path.display(),
                idx + 1
            )));
        };
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(usage(format!(
                "--config {}: unknown key '{key}' on line {} (expected one of {})",
                path.display(),
                idx + 1,
                CONFIG_KEYS.join(", ")
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Parse a config-file value, naming the key on failure.
fn conf<T: std::str::FromStr>(
    map: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, RunError>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|e| usage(format!("config key {key}={raw}: {e}"))),
    }
}

fn resolve_settings(cli: &Cli) -> Result<Settings, RunError> {
    let file = match &cli.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    let format = match (cli.format, file.get("format")) {
        (Some(f), _) => Some(f),
        (None, Some(raw)) => match raw.as_str() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            other => return Err(usage(format!("config key format={other}: expected csv or json"))),
        },
        (None, None) => None,
    };
    let cache_flag = match (&cli.cache_dir, file.get("cache-dir")) {
        (Some(d), _) => Some(d.clone()),
        (None, Some(raw)) => Some(PathBuf::from(raw)),
        (None, None) => None,
    };
    Ok(Settings {
        g: cli.g.or(conf(&file, "g")?).unwrap_or(0.1),
        seed: cli.seed.or(conf(&file, "seed")?).unwrap_or(0),
        tol_generic: cli.tol_generic.or(conf(&file, "tol-generic")?),
        target_se: cli.target_se.or(conf(&file, "target-se")?).unwrap_or(1e-4),
        max_samples: cli
            .max_samples
            .or(conf(&file, "max-samples")?)
            .unwrap_or(100_000),
        tail: cli.tail.or(conf(&file, "tail")?).unwrap_or(5),
        cache_dir: cache::resolve_cache_dir(cache_flag),
        threads: cli.threads.or(conf(&file, "threads")?),
        output: cli.output.clone(),
        format,
    })
}

/// Thread count for this run: the request (or core count), capped so
/// that concurrent per-sample scratch at the largest size stays inside
/// the budget (three dense complex matrices per worker).
fn effective_threads(requested: Option<usize>, n_max: usize) -> usize {
    let cores = std::thread::available_parallelism()
        .map(|v| v.get())
        .unwrap_or(1);
    let per_worker = 48usize.saturating_mul(1usize << (2 * n_max.min(32)));
    let cap = (SCRATCH_BUDGET / per_worker.max(1)).max(1);
    requested.unwrap_or(cores).clamp(1, cap)
}

/// "x3", "z1", "y2" for single-site Paulis, "h2" for a chain term.
fn operator_from_spec(
    spec: &str,
    flag: &str,
    model: &HamiltonianModel,
) -> Result<DenseOperator, RunError> {
    let s = spec.trim().to_ascii_lowercase();
    let err = || {
        usage(format!(
            "--{flag} {spec}: expected an axis or term letter followed by a site, \
             like x1, z3, or h2"
        ))
    };
    if s.len() < 2 {
        return Err(err());
    }
    let (kind, digits) = s.split_at(1);
    let site: usize = digits.parse().map_err(|_| err())?;
    let n = model.n_sites();
    if site == 0 || site > n {
        return Err(usage(format!(
            "--{flag} {spec}: site must be between 1 and {n} for this chain"
        )));
    }
    let op = match kind {
        "x" => site_operator(PauliAxis::X, site, n),
        "y" => site_operator(PauliAxis::Y, site, n),
        "z" => site_operator(PauliAxis::Z, site, n),
        "h" => model.local_term(site),
        _ => return Err(err()),
    };
    op.map_err(RunError::from)
}

/// "7" or "5..12" (inclusive).
fn parse_size_range(raw: &str) -> Result<(usize, usize), RunError> {
    let err = || usage(format!("--n {raw}: expected a size or an inclusive range A..B"));
    if let Some((a, b)) = raw.split_once("..") {
        let lo: usize = a.trim().parse().map_err(|_| err())?;
        let hi: usize = b.trim().strip_prefix('=').unwrap_or(b.trim()).parse().map_err(|_| err())?;
        if lo > hi {
            return Err(usage(format!("--n {raw}: range start exceeds range end")));
        }
        Ok((lo, hi))
    } else {
        let n: usize = raw.trim().parse().map_err(|_| err())?;
        Ok((n, n))
    }
}

fn main() {
    let cli = Cli::parse();
    let settings = match resolve_settings(&cli) {
        Ok(s) => s,
        Err(e) => {
            // Format may itself be unresolved here; report as text.
            eprintln!("error: {}", e.message());
            std::process::exit(e.code());
        }
    };
    if let Err(e) = dispatch(&cli.command, &settings) {
        if settings.format == Some(Format::Json) {
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.message(), "kind": e.kind() })
            );
        } else {
            eprintln!("error: {}", e.message());
        }
        std::process::exit(e.code());
    }
}

fn dispatch(command: &Command, st: &Settings) -> Result<(), RunError> {
    match command {
        Command::Spectrum { n } => cmd_spectrum(*n, st),
        Command::Otoc { n, route, a, b, c, d } => {
            cmd_otoc(*n, *route, a.as_deref(), b.as_deref(), c.as_deref(), d.as_deref(), st)
        }
        Command::FnAvg { n } => cmd_fn(*n, st),
        Command::Haar { dim, samples, quadruple } => {
            cmd_haar(*dim, samples.unwrap_or(10_000), *quadruple, st)
        }
        Command::Eth { n, probe, window, theta } => cmd_eth(
            *n,
            probe.as_deref().unwrap_or("x1"),
            window.unwrap_or(0.5),
            theta.unwrap_or(0.51),
            st,
        ),
        Command::Leakage { n, probe, eps, max_gap } => cmd_leakage(
            *n,
            probe.as_deref().unwrap_or("x1"),
            eps.unwrap_or(0.0),
            max_gap.unwrap_or(8),
            st,
        ),
        Command::Scaling { observable, n } => cmd_scaling(observable, n.as_deref(), st),
        Command::Verify => cmd_verify(st),
    }
}

/// Canonicalize, hash, and stamp a run configuration.
fn meta_for(canonical: &str, seed: u64, started: Instant) -> RunMetadata {
    RunMetadata::new(
        record::config_hash(canonical),
        seed,
        started.elapsed().as_secs_f64(),
    )
}

fn describe_cache(status: &CacheStatus) -> &'static str {
    match status {
        CacheStatus::Disabled => "computed (cache disabled)",
        CacheStatus::Hit => "loaded from cache",
        CacheStatus::MissStored => "computed and cached",
        CacheStatus::MissRaceLost => "computed (another run cached it first)",
        CacheStatus::Rebuilt(_) => "recomputed (cache entry was rebuilt)",
    }
}

fn cmd_spectrum(n: usize, st: &Settings) -> Result<(), RunError> {
    let started = Instant::now();
    par::configure_threads(effective_threads(st.threads, n));
    let tol = st.scan_tol();
    let model = build_chain_hamiltonian(n, st.g)?;
    let (s, status) = cache::load_or_compute(st.cache_dir.as_deref(), &model)?;
    let report = check_generic_spectrum(s.energies(), tol)?;

    println!("model: n={n} g={} (dimension {})", st.g, s.dim());
    println!("spectrum: {}", describe_cache(&status));
    let (lo, hi) = (s.energies()[0], s.energies()[s.dim() - 1]);
    println!("energy range: [{lo:.6}, {hi:.6}]");
    if report.passed() {
        println!(
            "collision scan at {tol:.1e}: clear ({} near misses; tightest additive gap {:.3e})",
            report.n_near_misses(),
            report.min_nontrivial_gap().unwrap_or(f64::NAN),
        );
    } else {
        println!(
            "collision scan at {tol:.1e}: {} nontrivial collisions ({} near misses; \
             tightest additive gap {:.3e})",
            report.n_violations(),
            report.n_near_misses(),
            report.min_nontrivial_gap().unwrap_or(f64::NAN),
        );
        for rec in report.violations().iter().take(5) {
            let c = rec.collision;
            println!(
                "  E[{}] + E[{}] = E[{}] + E[{}] within {:.3e}",
                c.p, c.r, c.q, c.s, rec.gap
            );
        }
        if report.violations().len() > 5 || report.truncated() {
            println!("  ... (list truncated)");
        }
    }

    if let Some(path) = &st.output {
        let canonical = format!("command=spectrum n={n} g={} tol_generic={tol:e} seed={}", st.g, st.seed);
        let meta = meta_for(&canonical, st.seed, started);
        match st.format_for(Format::Csv) {
            Format::Csv => {
                let mut out = String::new();
                out.push_str(&format!(
                    "# n={n} g={} tol_generic={tol:e} seed={} version={} config={}\n",
                    st.g, st.seed, meta.tool_version, meta.config_hash
                ));
                out.push_str("level,energy\n");
                for (j, e) in s.energies().iter().enumerate() {
                    out.push_str(&format!("{j},{e}\n"));
                }
                out.push_str(&format!(
                    "# violations={} near_misses={}\n",
                    report.n_violations(),
                    report.n_near_misses()
                ));
                std::fs::write(path, out).map_err(|e| RunError::Failed(e.to_string()))?;
            }
            Format::Json => {
                let value = serde_json::json!({
                    "n": n,
                    "g": st.g,
                    "dim": s.dim(),
                    "tol_generic": tol,
                    "passed": report.passed(),
                    "n_violations": report.n_violations(),
                    "n_near_misses": report.n_near_misses(),
                    "min_nontrivial_gap": report.min_nontrivial_gap(),
                    "truncated": report.truncated(),
                    "energy_range": [lo, hi],
                    "tool_version": meta.tool_version,
                    "config_hash": meta.config_hash,
                    "seed": meta.seed,
                    "wall_time_s": meta.wall_time_s,
                });
                record::write_json_file(&value, path)?;
            }
        }
        println!("artifact: {}", path.display());
    }

    if report.passed() {
        Ok(())
    } else {
        Err(RunError::Check(format!(
            "spectrum has {} nontrivial additive collisions at tolerance {tol:.1e}",
            report.n_violations()
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_otoc(
    n: usize,
    route: RouteArg,
    a: Option<&str>,
    b: Option<&str>,
    c: Option<&str>,
    d: Option<&str>,
    st: &Settings,
) -> Result<(), RunError> {
    let started = Instant::now();
    par::configure_threads(effective_threads(st.threads, n));
    let model = build_chain_hamiltonian(n, st.g)?;
    let a_spec = a.unwrap_or("x1");
    let b_spec = b.unwrap_or(a_spec);
    let c_spec = c.unwrap_or(a_spec);
    let d_spec = d.unwrap_or(b_spec);
    let a_op = operator_from_spec(a_spec, "a", &model)?;
    let b_op = operator_from_spec(b_spec, "b", &model)?;
    let c_op = operator_from_spec(c_spec, "c", &model)?;
    let d_op = operator_from_spec(d_spec, "d", &model)?;
    let label = format!("{},{},{},{}", a_op.label(), b_op.label(), c_op.label(), d_op.label());

    let est = match route {
        RouteArg::Theory => {
            if c.is_some() || d.is_some() {
                return Err(usage(
                    "--route theory predicts the A=C, B=D correlator from --a and --b; \
                     --c and --d do not apply"
                        .into(),
                ));
            }
            let value = theory_prediction(&a_op, &b_op, &model)?;
            OtocEstimate {
                value: C64::new(value, 0.0),
                std_error: 0.0,
                route: Route::TheoryPrediction,
                samples: 0,
                converged: true,
            }
        }
        _ => {
            let (s, status) = cache::load_or_compute(st.cache_dir.as_deref(), &model)?;
            println!("spectrum: {}", describe_cache(&status));
            let ae = to_energy_basis(&a_op, &s)?;
            let be = to_energy_basis(&b_op, &s)?;
            let ce = to_energy_basis(&c_op, &s)?;
            let de = to_energy_basis(&d_op, &s)?;
            let query = OtocQuery::new(&ae, &be, &ce, &de, &s)?;
            match route {
                RouteArg::Closed => {
                    let report = check_generic_spectrum(s.energies(), st.scan_tol())?;
                    let query = query.with_genericity(&report)?;
                    generic_closed_form_average(&query)?
                }
                RouteArg::Eigenstate => eigenstate_formula_average(&query),
                RouteArg::Sampled => {
                    let sampler = TimeSampler::new(st.seed).with_max_samples(st.max_samples)?;
                    sampled_infinite_time_average(&query, &sampler, st.target_se)?
                }
                RouteArg::Theory => unreachable!("handled above"),
            }
        }
    };

    println!("operators: {label}");
    println!("route: {}", est.route);
    println!("value: {:+.10} {:+.10}i", est.value.re, est.value.im);
    if est.route == Route::Sampled {
        println!(
            "standard error: {:.3e} over {} samples ({})",
            est.std_error,
            est.samples,
            if est.converged { "converged" } else { "hit the sample cap" }
        );
    }

    if let Some(path) = &st.output {
        if st.format_for(Format::Json) != Format::Json {
            return Err(usage("--format csv: the otoc artifact is JSON only".into()));
        }
        let canonical = format!(
            "command=otoc n={n} g={} route={} a={a_spec} b={b_spec} c={c_spec} d={d_spec} \
             seed={} tol_generic={:e} target_se={:e} max_samples={}",
            st.g,
            est.route,
            st.seed,
            st.scan_tol(),
            st.target_se,
            st.max_samples
        );
        let meta = meta_for(&canonical, st.seed, started);
        let rec = record::OtocRecord::new(n, st.g, label, &est, meta);
        record::write_json_file(&rec, path)?;
        println!("artifact: {}", path.display());
    }
    Ok(())
}

fn cmd_fn(n: usize, st: &Settings) -> Result<(), RunError> {
    let started = Instant::now();
    par::configure_threads(effective_threads(st.threads, n));
    let tol = st.scan_tol();
    let model = build_chain_hamiltonian(n, st.g)?;
    let (s, status) = cache::load_or_compute(st.cache_dir.as_deref(), &model)?;
    println!("spectrum: {}", describe_cache(&status));
    let report = check_generic_spectrum(s.energies(), tol)?;
    if !report.passed() {
        return Err(RunError::Check(format!(
            "the closed form needs a collision-free spectrum, but the scan found {} \
             collisions at {tol:.1e}; near-collisions at large n may clear at a \
             tighter --tol-generic (the scaling sweep gates at {SWEEP_GENERICITY_TOL:.0e})",
            report.n_violations()
        )));
    }
    let est = translation_averaged_fn(&s, n, &report)?;
    println!("F_{n} = {:.10} (imaginary part {:.3e})", est.value.re, est.value.im);

    if let Some(path) = &st.output {
        if st.format_for(Format::Json) != Format::Json {
            return Err(usage("--format csv: the fn artifact is JSON only".into()));
        }
        let canonical = format!(
            "command=fn n={n} g={} tol_generic={tol:e} seed={}",
            st.g, st.seed
        );
        let meta = meta_for(&canonical, st.seed, started);
        let rec = record::OtocRecord::new(n, st.g, "sx1,sx_i (translation averaged)", &est, meta);
        record::write_json_file(&rec, path)?;
        println!("artifact: {}", path.display());
    }
    Ok(())
}

fn cmd_haar(
    dim: usize,
    samples: usize,
    quadruple: QuadrupleArg,
    st: &Settings,
) -> Result<(), RunError> {
    let started = Instant::now();
    par::configure_threads(effective_threads(st.threads, 0));
    let est = match quadruple {
        QuadrupleArg::PresetX => {
            if dim != 2 {
                return Err(usage(format!(
                    "--quadruple preset-x is the 2x2 sigma-x quadruple; for --dim {dim} \
                     use --quadruple random"
                )));
            }
            let sx = ndarray::array![
                [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
                [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
            ];
            haar_otoc_monte_carlo(&sx, &sx, &sx, &sx, samples, st.seed)?
        }
        QuadrupleArg::Random => {
            let [a, b, c, d] = seeded_hermitian_quadruple(dim, st.seed)?;
            haar_otoc_monte_carlo(&a, &b, &c, &d, samples, st.seed)?
        }
    };
    println!(
        "monte carlo ({} draws at dimension {dim}): {:+.6} {:+.6}i +/- {:.2e}",
        est.samples, est.mc_value.re, est.mc_value.im, est.mc_std_error
    );
    println!(
        "closed form: {:+.6} {:+.6}i",
        est.closed_form.re, est.closed_form.im
    );
    println!("deviation: {:.2} standard errors", est.sigma_deviation());

    if let Some(path) = &st.output {
        if st.format_for(Format::Json) != Format::Json {
            return Err(usage("--format csv: the haar artifact is JSON only".into()));
        }
        let kind = match quadruple {
            QuadrupleArg::PresetX => "preset-x",
            QuadrupleArg::Random => "random",
        };
        let canonical =
            format!("command=haar dim={dim} samples={samples} quadruple={kind} seed={}", st.seed);
        let meta = meta_for(&canonical, st.seed, started);
        let rec = record::HaarRecord::new(&est, meta);
        record::write_json_file(&rec, path)?;
        println!("artifact: {}", path.display());
    }
    Ok(())
}

fn cmd_eth(n: usize, probe: &str, window: f64, theta: f64, st: &Settings) -> Result<(), RunError> {
    let started = Instant::now();
    par::configure_threads(effective_threads(st.threads, n));
    let model = build_chain_hamiltonian(n, st.g)?;
    let probe_op = operator_from_spec(probe, "probe", &model)?;
    let (s, status) = cache::load_or_compute(st.cache_dir.as_deref(), &model)?;
    println!("spectrum: {}", describe_cache(&status));
    let x = to_energy_basis(&probe_op, &s)?;
    let profile = diagonal_profile(&x, &s, n)?;
    let fit = fit_linear_response(&profile, window)?;
    let m2 = diagonal_moment(&x, 2)?;
    let m4 = diagonal_moment(&x, 4)?;
    let frac = zero_density_fraction(s.energies(), n, theta)?;

    println!(
        "diagonal profile of {} over {} eigenstates",
        probe_op.label(),
        s.dim()
    );
    println!(
        "line fit in |E|/n < {window}: f0 = {:+.6} {:+.6}i, f1 = {:+.6} {:+.6}i \
         (rms residual {:.3e})",
        fit.f0.re, fit.f0.im, fit.f1.re, fit.f1.im, fit.residual_rms
    );
    println!(
        "diagonal moments: m2 = {m2:.6e} (n*m2 = {:.6}), m4 = {m4:.6e} (n^2*m4 = {:.6})",
        n as f64 * m2,
        (n * n) as f64 * m4
    );
    println!("fraction of eigenstates with |E| >= n^{theta}: {frac:.4}");

    if let Some(path) = &st.output {
        let canonical = format!(
            "command=eth n={n} g={} probe={} window={window} theta={theta} seed={}",
            st.g,
            probe_op.label(),
            st.seed
        );
        let meta = meta_for(&canonical, st.seed, started);
        match st.format_for(Format::Csv) {
            Format::Csv => {
                let mut buf = Vec::new();
                record::write_profile_csv(&profile, st.g, st.seed, &meta.config_hash, &mut buf)?;
                std::fs::write(path, buf).map_err(|e| RunError::Failed(e.to_string()))?;
            }
            Format::Json => {
                let value = serde_json::json!({
                    "n": n,
                    "g": st.g,
                    "probe": probe_op.label(),
                    "window": window,
                    "f0_re": fit.f0.re,
                    "f0_im": fit.f0.im,
                    "f1_re": fit.f1.re,
                    "f1_im": fit.f1.im,
                    "residual_rms": fit.residual_rms,
                    "m2": m2,
                    "n_m2": n as f64 * m2,
                    "m4": m4,
                    "n2_m4": (n * n) as f64 * m4,
                    "theta": theta,
                    "zero_density_fraction": frac,
                    "tool_version": meta.tool_version,
                    "config_hash": meta.config_hash,
                    "seed": meta.seed,
                    "wall_time_s": meta.wall_time_s,
                });
                record::write_json_file(&value, path)?;
            }
        }
        println!("artifact: {}", path.display());
    }
    Ok(())
}

fn cmd_leakage(
    n: usize,
    probe: &str,
    eps: f64,
    max_gap: usize,
    st: &Settings,
) -> Result<(), RunError> {
    let started = Instant::now();
    par::configure_threads(effective_threads(st.threads, n));
    if max_gap == 0 {
        return Err(usage("--max-gap must be at least 1".into()));
    }
    let model = build_chain_hamiltonian(n, st.g)?;
    let probe_op = operator_from_spec(probe, "probe", &model)?;
    let (s, status) = cache::load_or_compute(st.cache_dir.as_deref(), &model)?;
    println!("spectrum: {}", describe_cache(&status));
    let x = to_energy_basis(&probe_op, &s)?;

    println!("leakage of {} between E < {eps} and E >= {eps} + gap:", probe_op.label());
    println!("{:>5}  {:>12}  {:>10}", "gap", "leakage", "log");
    let mut rows = Vec::new();
    for k in 1..=max_gap {
        let gap = k as f64;
        let leak = microcanonical_leakage(&x, s.energies(), eps, eps + gap)?;
        let log = if leak > 0.0 { leak.ln() } else { f64::NEG_INFINITY };
        println!("{gap:>5}  {leak:>12.6e}  {log:>10.4}");
        rows.push((gap, leak, log));
    }
    let finite = rows.iter().all(|r| r.2.is_finite());
    if finite && rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.iter().map(|&x| (x - mx) * (x - mx)).sum::<f64>();
        let rms = (xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = y - (my + slope * (x - mx));
                r * r
            })
            .sum::<f64>()
            / xs.len() as f64)
            .sqrt();
        println!("log-linear fit: slope {slope:.4} per gap, rms residual {rms:.4}");
    }

    if let Some(path) = &st.output {
        let canonical = format!(
            "command=leakage n={n} g={} probe={} eps={eps} max_gap={max_gap} seed={}",
            st.g,
            probe_op.label(),
            st.seed
        );
        let meta = meta_for(&canonical, st.seed, started);
        match st.format_for(Format::Csv) {
            Format::Csv => {
                let mut out = format!(
                    "# n={n} g={} probe={} eps={eps} seed={} version={} config={}\n",
                    st.g,
                    probe_op.label(),
                    st.seed,
                    meta.tool_version,
                    meta.config_hash
                );
                out.push_str("gap,leakage\n");
                for (gap, leak, _) in &rows {
                    out.push_str(&format!("{gap},{leak}\n"));
                }
                std::fs::write(path, out).map_err(|e| RunError::Failed(e.to_string()))?;
            }
            Format::Json => {
                let value = serde_json::json!({
                    "n": n,
                    "g": st.g,
                    "probe": probe_op.label(),
                    "eps": eps,
                    "rows": rows.iter().map(|(gap, leak, _)| {
                        serde_json::json!({"gap": gap, "leakage": leak})
                    }).collect::<Vec<_>>(),
                    "tool_version": meta.tool_version,
                    "config_hash": meta.config_hash,
                    "seed": meta.seed,
                    "wall_time_s": meta.wall_time_s,
                });
                record::write_json_file(&value, path)?;
            }
        }
        println!("artifact: {}", path.display());
    }
    Ok(())
}

fn cmd_scaling(observable: &str, n: Option<&str>, st: &Settings) -> Result<(), RunError> {
    let obs: Observable = observable
        .parse()
        .map_err(|e: otoc_lab::Error| usage(format!("--observable {observable}: {e}")))?;
    let (n_min, n_max) = match n {
        Some(raw) => parse_size_range(raw)?,
        None => (5, 12),
    };
    par::configure_threads(effective_threads(st.threads, n_max));

    let mut config = SweepConfig::new(obs, n_min, n_max, st.g);
    config.seed = st.seed;
    config.genericity_tol = st.sweep_tol();
    config.cache_dir = st.cache_dir.clone();
    config.output_dir = Some(st.output.clone().unwrap_or_else(|| PathBuf::from(".")));
    config.tail = Some(st.tail);

    let series = run_scaling_sweep(&config).map_err(|e| match e {
        otoc_lab::Error::InsufficientData { .. } => RunError::Failed(format!(
            "{e}; lower --tail or widen --n so the fit artifact has enough points"
        )),
        other => RunError::from(other),
    })?;

    println!(
        "{} at g={} over n={}..{} (collision gate {:.0e}):",
        series.observable(),
        st.g,
        n_min,
        n_max,
        config.genericity_tol
    );
    println!("{:>4}  {:>18}", "n", "value");
    for p in series.points() {
        println!("{:>4}  {:>18.12}", p.n, p.value);
    }
    for e in series.excluded() {
        println!("excluded n={}: {}", e.n, e.reason);
    }
    if series.points().len() >= st.tail {
        let fit = power_law_fit(&series, st.tail)?;
        println!(
            "power-law fit over the last {} points (n={}..{}): {:.6} * n^-{:.6} \
             (log-rms {:.3e})",
            st.tail, fit.fit_range.0, fit.fit_range.1, fit.amplitude, fit.exponent,
            fit.rms_log_residual
        );
    } else {
        println!(
            "power-law fit skipped: {} points is fewer than --tail {}",
            series.points().len(),
            st.tail
        );
    }
    let dir = config.output_dir.expect("set above");
    println!(
        "artifacts: {}/scaling_{}_g{}.csv (+ _fit.json)",
        dir.display(),
        series.observable(),
        st.g
    );
    Ok(())
}

fn cmd_verify(st: &Settings) -> Result<(), RunError> {
    par::configure_threads(effective_threads(st.threads, 12));
    let outcomes = otoc_lab::verify::run_all(st.cache_dir.as_deref(), |o| println!("{o}"));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "{}/{} checks passed",
        outcomes.len() - failed,
        outcomes.len()
    );

    if let Some(path) = &st.output {
        if st.format_for(Format::Json) != Format::Json {
            return Err(usage("--format csv: the verify artifact is JSON only".into()));
        }
        let value = outcomes
            .iter()
            .map(|o| {
                serde_json::json!({
                    "id": o.id,
                    "name": o.name,
                    "passed": o.passed,
                    "detail": o.detail,
                })
            })
            .collect::<Vec<_>>();
        record::write_json_file(&value, path)?;
        println!("artifact: {}", path.display());
    }

    if failed == 0 {
        Ok(())
    } else {
        Err(RunError::Check(format!("{failed} verification checks failed")))
    }
}
