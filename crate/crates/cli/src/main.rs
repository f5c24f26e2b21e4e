// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod experiments;
mod scenario;
mod sources;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lqdim::spectrum::DEFAULT_Q_GRID;
use lqdim::{DyadicMeasure, RuleSet};

use experiments::{self as ex, AssertionFailed, CheckParams};

const COLUMNS: &str = "\
CSV columns:
  build            # level=L comment, then cell,mass (1-D) or cell_x,cell_y,mass (2-D)
  spectrum         q,level,log2_cq,slope,dimension,residual
  project          index,angle,q,dimension,residual
  --summary        q,min,max,spread,max_abs_err
  convolve sweep   t,q,dimension,residual,closed_form,abs_err
  cocycle check    n,m,fiber,lhs,rhs,pass
  cocycle check --equivalence FILE
                   n,fiber,q,tau,tau_smooth,ratio,upper,pass
  cocycle phi      n,avg_phi,phi_over_n,running_inf
  dynamics orbit   step,fiber
  formula          name,value

Exit status: 0 success, 1 invalid input, 2 a checked inequality failed.";

#[derive(Parser)]
#[command(name = "lqdim", version, about = "L^q dimensions of random self-similar measures", after_help = COLUMNS)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "LQDIM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Rule set JSON file.
    #[arg(long, conflicts_with = "preset")]
    ruleset: Option<PathBuf>,
    /// Built-in rule set.
    #[arg(long, help = format!("Built-in rule set: {}", sources::PRESET_HELP))]
    preset: Option<String>,
    /// Driving weights, comma separated; fractions like 1/3 are accepted.
    #[arg(long, value_delimiter = ',', value_parser = sources::parse_number)]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `iid` or `balanced:BLOCK`.
    #[arg(long, default_value = "iid")]
    sampling: String,
}

impl Source {
    fn ruleset(&self) -> Result<RuleSet> {
        match (&self.ruleset, &self.preset) {
            (Some(p), _) => sources::ruleset_from_file(p),
            (None, Some(s)) => sources::preset(s),
            (None, None) => bail!("give --ruleset FILE or --preset SPEC"),
        }
    }

    fn resolve(&self, level: u32, extra_steps: usize) -> Result<(RuleSet, Vec<f64>, lqdim::OmegaSequence)> {
        let rs = self.ruleset()?;
        let weights = sources::weights_for(&rs, self.weights.as_deref())?;
        let sampling = sources::parse_sampling(&self.sampling)?;
        let omega = sources::omega_for(&rs, &weights, self.seed, level, extra_steps, sampling)?;
        Ok((rs, weights, omega))
    }
}

#[derive(Args, Clone)]
struct Estimation {
    /// Moment exponents, each above 1.
    #[arg(long = "q", value_delimiter = ',', value_parser = sources::parse_number)]
    q_grid: Option<Vec<f64>>,
    /// Regression window LO,HI in dyadic levels.
    #[arg(long, value_delimiter = ',', num_args = 1, default_value = "8,14")]
    window: Vec<u32>,
    /// Levels by which measures are built finer than the window top.
    #[arg(long, default_value_t = 3)]
    extra_levels: u32,
}

impl Estimation {
    fn resolve(&self) -> Result<(Vec<f64>, (u32, u32), u32)> {
        let q = self.q_grid.clone().unwrap_or_else(|| DEFAULT_Q_GRID.to_vec());
        ex::check_q_grid(&q)?;
        let &[lo, hi] = self.window.as_slice() else {
            bail!("--window takes two levels LO,HI");
        };
        ex::check_window((lo, hi))?;
        let top = hi + self.extra_levels;
        if top > lqdim::measure::MAX_LEVEL {
            bail!("window top plus extra levels exceeds {}", lqdim::measure::MAX_LEVEL);
        }
        Ok((q, (lo, hi), top))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Discretize a realization at a dyadic level and print it as CSV.
    Build {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 14)]
        level: u32,
    },
    /// Estimate D_q of a measure CSV, or of a freshly built realization.
    Spectrum {
        /// Measure CSV as written by `build`.
        #[arg(long, conflicts_with_all = ["ruleset", "preset"])]
        input: Option<PathBuf>,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        est: Estimation,
    },
    /// Estimate D_q of orthogonal projections of a planar realization.
    Project {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        est: Estimation,
        #[arg(long, default_value_t = 64)]
        directions: usize,
        #[arg(long, value_parser = sources::parse_number)]
        closed_form: Option<f64>,
        /// Print per-q ranges instead of one row per direction.
        #[arg(long)]
        summary: bool,
    },
    /// Convolutions with a scaled deterministic measure.
    Convolve {
        #[command(subcommand)]
        action: ConvolveAction,
    },
    /// Projection moment cocycles.
    Cocycle {
        #[command(subcommand)]
        action: CocycleAction,
    },
    /// Orbits of the base-fiber dynamics.
    Dynamics {
        #[command(subcommand)]
        action: DynamicsAction,
    },
    /// Closed-form dimensions of a rule set.
    Formula {
        #[command(flatten)]
        source: Source,
        #[arg(long = "q", value_delimiter = ',', value_parser = sources::parse_number)]
        q_grid: Option<Vec<f64>>,
        /// Block length for the projection lower bound.
        #[arg(long)]
        block_len: Option<usize>,
    },
    /// Type-class disintegration of a self-similar measure into blocks.
    Decompose {
        #[arg(long, value_delimiter = ',', value_parser = sources::parse_number, required = true)]
        pbar: Vec<f64>,
        #[arg(long)]
        block_len: usize,
        /// Fiber words listed in the output, in total.
        #[arg(long, default_value_t = 10_000)]
        max_words: usize,
    },
    /// Run a JSON scenario and write its outputs to a directory.
    Run {
        scenario: PathBuf,
        #[arg(long, env = "LQDIM_OUT_DIR", default_value = "lqdim-out")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ConvolveAction {
    /// D_q of ν * A_t ϑ over a grid of t.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        est: Estimation,
        /// Deterministic factor: a preset or a rule set JSON file with a single rule.
        #[arg(long)]
        theta: String,
        /// Explicit t values; otherwise a log grid over one period.
        #[arg(long, value_delimiter = ',', value_parser = sources::parse_number)]
        t: Option<Vec<f64>>,
        #[arg(long, default_value_t = 32)]
        t_count: usize,
        #[arg(long, value_parser = sources::parse_number)]
        closed_form: Option<f64>,
        #[arg(long)]
        summary: bool,
    },
}

#[derive(Subcommand)]
enum CocycleAction {
    /// Random instances of submultiplicativity and smoothing equivalence.
    Check {
        #[command(flatten)]
        source: Source,
        #[arg(long = "q", value_delimiter = ',', value_parser = sources::parse_number)]
        q_grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        /// Also write the equivalence rows here.
        #[arg(long)]
        equivalence: Option<PathBuf>,
    },
    /// Averages of the cocycle over ω and fibers, with the dimension read off them.
    Phi {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_parser = sources::parse_number, default_value = "2")]
        q: f64,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7")]
        steps: Vec<usize>,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
    },
}

#[derive(Subcommand)]
enum DynamicsAction {
    /// Fiber coordinates along the orbit of a point.
    Orbit {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_parser = sources::parse_number, default_value = "0")]
        start: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
}

fn q_or_default(q: &Option<Vec<f64>>) -> Result<Vec<f64>> {
    let q = q.clone().unwrap_or_else(|| DEFAULT_Q_GRID.to_vec());
    ex::check_q_grid(&q)?;
    Ok(q)
}

fn theta_ruleset(spec: &str) -> Result<RuleSet> {
    let path = std::path::Path::new(spec);
    if path.is_file() {
        sources::ruleset_from_file(path)
    } else {
        sources::preset(spec)
    }
}

fn dispatch(command: Command) -> Result<String> {
    Ok(match command {
        Command::Build { source, level } => {
            if level > lqdim::measure::MAX_LEVEL {
                bail!("level {level} exceeds the maximum {}", lqdim::measure::MAX_LEVEL);
            }
            let (rs, _, omega) = source.resolve(level, 0)?;
            ex::build_fine(&rs, &omega, level)?.to_csv()
        }
        Command::Spectrum { input, source, est } => {
            let (q, window, top) = est.resolve()?;
            let m = match input {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    DyadicMeasure::from_csv(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                None => {
                    let (rs, _, omega) = source.resolve(top, 0)?;
                    ex::build_fine(&rs, &omega, top)?
                }
            };
            if m.level() < window.1 {
                bail!("measure level {} is below the window top {}", m.level(), window.1);
            }
            let curves = ex::spectrum(&m, &q, window)?;
            let failures = ex::holder_failures(&m, &q, window)?;
            if !failures.is_empty() {
                print!("{}", ex::spectrum_csv(&curves));
                return Err(AssertionFailed(format!("Hölder bound: {}", failures.join("; "))).into());
            }
            ex::spectrum_csv(&curves)
        }
        Command::Project {
            source,
            est,
            directions,
            closed_form,
            summary,
        } => {
            let (q, window, top) = est.resolve()?;
            let (rs, _, omega) = source.resolve(top, 0)?;
            let rows = ex::sweep_directions(&rs, &omega, directions, &q, window, top)?;
            if summary {
                let dims: Vec<(f64, f64)> = rows.iter().map(|r| (r.q, r.dimension)).collect();
                format!("{}\n{}", ex::SUMMARY_HEADER, ex::summary_rows(&dims, &q, closed_form))
            } else {
                ex::directions_csv(&rows)
            }
        }
        Command::Convolve {
            action:
                ConvolveAction::Sweep {
                    source,
                    est,
                    theta,
                    t,
                    t_count,
                    closed_form,
                    summary,
                },
        } => {
            let (q, window, top) = est.resolve()?;
            let (rs, _, omega) = source.resolve(top, 0)?;
            if t_count == 0 {
                bail!("--t-count must be positive");
            }
            let theta = theta_ruleset(&theta)?;
            let sweeps = ex::convolution_sweeps(&rs, &omega, &theta, &q, t.as_deref(), t_count, window, top, closed_form)?;
            if summary {
                let dims: Vec<(f64, f64)> = sweeps
                    .iter()
                    .flat_map(|s| s.points.iter().map(|p| (p.curve.q, p.curve.dimension)))
                    .collect();
                format!("{}\n{}", ex::SUMMARY_HEADER, ex::summary_rows(&dims, &q, closed_form))
            } else {
                ex::sweeps_csv(&sweeps)
            }
        }
        Command::Cocycle {
            action:
                CocycleAction::Check {
                    source,
                    q_grid,
                    instances,
                    n_max,
                    k,
                    equivalence,
                },
        } => {
            let rs = source.ruleset()?;
            let weights = sources::weights_for(&rs, source.weights.as_deref())?;
            let params = CheckParams {
                instances,
                n_max,
                k,
                seed: source.seed,
                sampling: sources::parse_sampling(&source.sampling)?,
            };
            let res = ex::cocycle_checks(&rs, &weights, &q_or_default(&q_grid)?, &params)?;
            if let Some(path) = equivalence {
                std::fs::write(&path, ex::equivalence_csv(&res.equivalence))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let csv = lqdim::cocycle::checks_to_csv(&res.submultiplicative);
            if res.failures() > 0 {
                print!("{csv}");
                return Err(AssertionFailed(format!("{} cocycle inequalities violated", res.failures())).into());
            }
            csv
        }
        Command::Cocycle {
            action:
                CocycleAction::Phi {
                    source,
                    q,
                    steps,
                    samples,
                    k,
                },
        } => {
            let rs = source.ruleset()?;
            let weights = sources::weights_for(&rs, source.weights.as_deref())?;
            let sampling = sources::parse_sampling(&source.sampling)?;
            ex::phi(&rs, &weights, q, &steps, samples, source.seed, k, sampling)?.to_csv()
        }
        Command::Dynamics {
            action: DynamicsAction::Orbit { source, start, steps },
        } => {
            let rs = source.ruleset()?;
            let weights = sources::weights_for(&rs, source.weights.as_deref())?;
            let sampling = sources::parse_sampling(&source.sampling)?;
            let omega = if rs.len() == 1 {
                lqdim::OmegaSequence::constant(0, steps + 1, 1)
            } else {
                lqdim::cocycle::draw_omega(&weights, steps + 1, source.seed, sampling)?
            };
            ex::orbit_csv(&rs, &omega, start, steps)?
        }
        Command::Formula {
            source,
            q_grid,
            block_len,
        } => {
            let rs = source.ruleset()?;
            let weights = sources::weights_for(&rs, source.weights.as_deref())?;
            ex::formula_csv(&ex::formula_table(&rs, &weights, &q_or_default(&q_grid)?, block_len)?)
        }
        Command::Decompose {
            pbar,
            block_len,
            max_words,
        } => {
            let (json, entropy_ok) = ex::decomposition_json(&pbar, block_len, max_words)?;
            if !entropy_ok {
                print!("{json}");
                return Err(AssertionFailed("class entropy exceeds k log(ℓ+1)".into()).into());
            }
            json
        }
        Command::Run { scenario, out } => {
            let written = scenario::run(&scenario, &out)?;
            written.iter().map(|p| format!("{}\n", p.display())).collect()
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.command) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<AssertionFailed>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
