//! JSON scenarios: validated in full before any computation, results held in
//! memory and written only once every output is ready.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use lqdim::cocycle::OmegaSampling;
use lqdim::spectrum::DEFAULT_Q_GRID;
use lqdim::{AmbientDim, RuleSet};
use serde::Deserialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::experiments::{self as ex, AssertionFailed, CheckParams};
use crate::sources;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Build,
    Project,
    Convolve,
    Cocycle,
    Formula,
    Decompose,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleSettings {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default)]
    pub phi_steps: Vec<usize>,
    #[serde(default = "default_phi_samples")]
    pub phi_samples: usize,
}

fn default_instances() -> usize {
    200
}
fn default_n_max() -> usize {
    4
}
fn default_k() -> f64 {
    1.0
}
fn default_phi_samples() -> usize {
    32
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    /// Inline rule set JSON or a preset string.
    #[serde(default)]
    pub ruleset: Option<serde_json::Value>,
    #[serde(default)]
    pub driving_weights: Option<Vec<f64>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub q_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub level_window: Option<(u32, u32)>,
    /// Levels by which measures are built finer than the window top.
    #[serde(default)]
    pub extra_levels: Option<u32>,
    #[serde(default)]
    pub sampling: Option<String>,
    #[serde(default)]
    pub direction_count: Option<usize>,
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub t_count: Option<usize>,
    /// Deterministic factor of a convolution.
    #[serde(default)]
    pub theta: Option<serde_json::Value>,
    #[serde(default)]
    pub closed_form: Option<f64>,
    #[serde(default)]
    pub cocycle: Option<CocycleSettings>,
    #[serde(default)]
    pub pbar: Option<Vec<f64>>,
    #[serde(default)]
    pub block_len: Option<usize>,
}

/// A scenario with every parameter resolved and checked.
struct Plan {
    scenario: Scenario,
    ruleset: Option<RuleSet>,
    theta: Option<RuleSet>,
    weights: Vec<f64>,
    q_grid: Vec<f64>,
    window: (u32, u32),
    extra_levels: u32,
    sampling: OmegaSampling,
}

const MAX_DUMP_WORDS: usize = 1_000_000;

fn validate(scenario: Scenario) -> Result<Plan> {
    if scenario.name.trim().is_empty() {
        bail!("scenario name must not be empty");
    }
    if scenario.seeds.is_empty() {
        bail!("at least one seed is required");
    }
    let ruleset = scenario.ruleset.as_ref().map(sources::ruleset_from_value).transpose()?;
    let theta = scenario.theta.as_ref().map(sources::ruleset_from_value).transpose()?;
    let q_grid = scenario.q_grid.clone().unwrap_or_else(|| DEFAULT_Q_GRID.to_vec());
    ex::check_q_grid(&q_grid)?;
    let window = scenario.level_window.unwrap_or((8, 14));
    ex::check_window(window)?;
    let extra_levels = scenario.extra_levels.unwrap_or(3);
    if window.1 + extra_levels > lqdim::measure::MAX_LEVEL {
        bail!("window top plus extra levels exceeds {}", lqdim::measure::MAX_LEVEL);
    }
    let sampling = sources::parse_sampling(scenario.sampling.as_deref().unwrap_or("iid"))?;
    let needs_rules = scenario.mode != Mode::Decompose;
    let weights = match (&ruleset, needs_rules) {
        (Some(rs), _) => sources::weights_for(rs, scenario.driving_weights.as_deref())?,
        (None, true) => bail!("mode {:?} needs a ruleset", scenario.mode),
        (None, false) => Vec::new(),
    };
    let dim = ruleset.as_ref().map(|r| r.ambient_dim());
    match scenario.mode {
        Mode::Project | Mode::Cocycle if dim != Some(AmbientDim::Two) => {
            bail!("mode {:?} needs a planar rule set", scenario.mode)
        }
        Mode::Project if scenario.direction_count == Some(0) => bail!("direction_count must be positive"),
        Mode::Convolve => {
            if dim != Some(AmbientDim::One) {
                bail!("convolve needs a 1-D rule set for the random factor");
            }
            match &theta {
                Some(t) if t.ambient_dim() == AmbientDim::One && t.len() == 1 => {}
                _ => bail!("convolve needs `theta`: a 1-D rule set with one rule"),
            }
            if let Some(g) = &scenario.t_grid {
                if g.is_empty() || g.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                    bail!("t_grid must be a nonempty list of positive numbers");
                }
            }
            if scenario.t_count == Some(0) {
                bail!("t_count must be positive");
            }
        }
        Mode::Cocycle => {
            if let Some(c) = &scenario.cocycle {
                if c.instances == 0 || c.n_max == 0 || !(c.k >= 1.0) || c.phi_samples == 0 || c.phi_steps.contains(&0) {
                    bail!("cocycle settings need positive counts, positive steps and k ≥ 1");
                }
            }
        }
        Mode::Decompose => {
            let pbar = scenario.pbar.as_ref().context("decompose needs `pbar`")?;
            let l = scenario.block_len.context("decompose needs `block_len`")?;
            lqdim::decomposition::decompose_self_similar(pbar, l)?;
        }
        _ => {}
    }
    Ok(Plan {
        scenario,
        ruleset,
        theta,
        weights,
        q_grid,
        window,
        extra_levels,
        sampling,
    })
}

pub struct Outputs {
    pub files: Vec<(String, String)>,
    pub assertion_failures: Vec<String>,
}

fn execute(plan: &Plan) -> Result<Outputs> {
    let sc = &plan.scenario;
    let mut files = Vec::new();
    let mut failures = Vec::new();
    let top = plan.window.1 + plan.extra_levels;
    match sc.mode {
        Mode::Build => {
            let rs = plan.ruleset.as_ref().expect("validated");
            let mut summary = format!("seed,{}\n", ex::SUMMARY_HEADER);
            for &seed in &sc.seeds {
                let omega = sources::omega_for(rs, &plan.weights, seed, top, 0, plan.sampling)?;
                let m = ex::build_fine(rs, &omega, top)?;
                let curves = ex::spectrum(&m, &plan.q_grid, plan.window)?;
                failures.extend(
                    ex::holder_failures(&m, &plan.q_grid, plan.window)?
                        .into_iter()
                        .map(|f| format!("seed {seed}: Hölder bound, {f}")),
                );
                let dims: Vec<(f64, f64)> = curves.iter().map(|c| (c.q, c.dimension)).collect();
                for line in ex::summary_rows(&dims, &plan.q_grid, sc.closed_form).lines() {
                    summary.push_str(&format!("{seed},{line}\n"));
                }
                files.push((format!("measure_seed{seed}.csv"), m.to_csv()));
                files.push((format!("spectrum_seed{seed}.csv"), ex::spectrum_csv(&curves)));
            }
            files.push(("summary.csv".into(), summary));
        }
        Mode::Project => {
            let rs = plan.ruleset.as_ref().expect("validated");
            let count = sc.direction_count.unwrap_or(64);
            let mut summary = format!("seed,{}\n", ex::SUMMARY_HEADER);
            for &seed in &sc.seeds {
                let omega = sources::omega_for(rs, &plan.weights, seed, top, 0, plan.sampling)?;
                let rows = ex::sweep_directions(rs, &omega, count, &plan.q_grid, plan.window, top)?;
                let dims: Vec<(f64, f64)> = rows.iter().map(|r| (r.q, r.dimension)).collect();
                for line in ex::summary_rows(&dims, &plan.q_grid, sc.closed_form).lines() {
                    summary.push_str(&format!("{seed},{line}\n"));
                }
                files.push((format!("directions_seed{seed}.csv"), ex::directions_csv(&rows)));
            }
            files.push(("summary.csv".into(), summary));
        }
        Mode::Convolve => {
            let rs = plan.ruleset.as_ref().expect("validated");
            let theta = plan.theta.as_ref().expect("validated");
            let mut summary = String::from("seed,q,min,max,spread,max_abs_err\n");
            for &seed in &sc.seeds {
                let omega = sources::omega_for(rs, &plan.weights, seed, top, 0, plan.sampling)?;
                let sweeps = ex::convolution_sweeps(
                    rs,
                    &omega,
                    theta,
                    &plan.q_grid,
                    sc.t_grid.as_deref(),
                    sc.t_count.unwrap_or(32),
                    plan.window,
                    top,
                    sc.closed_form,
                )?;
                for s in &sweeps {
                    let q = s.points[0].curve.q;
                    let hi = s.min_dimension() + s.spread();
                    let err = s.max_abs_err().map(|e| format!("{e:.12}")).unwrap_or_default();
                    summary.push_str(&format!("{seed},{q},{:.12},{hi:.12},{:.12},{err}\n", s.min_dimension(), s.spread()));
                }
                files.push((format!("sweep_seed{seed}.csv"), ex::sweeps_csv(&sweeps)));
            }
            files.push(("summary.csv".into(), summary));
        }
        Mode::Cocycle => {
            let rs = plan.ruleset.as_ref().expect("validated");
            let settings = sc.cocycle.clone().unwrap_or(CocycleSettings {
                instances: default_instances(),
                n_max: default_n_max(),
                k: default_k(),
                phi_steps: Vec::new(),
                phi_samples: default_phi_samples(),
            });
            for &seed in &sc.seeds {
                let params = CheckParams {
                    instances: settings.instances,
                    n_max: settings.n_max,
                    k: settings.k,
                    seed,
                    sampling: plan.sampling,
                };
                let res = ex::cocycle_checks(rs, &plan.weights, &plan.q_grid, &params)?;
                if res.failures() > 0 {
                    failures.push(format!("seed {seed}: {} cocycle inequalities violated", res.failures()));
                }
                files.push((
                    format!("checks_seed{seed}.csv"),
                    lqdim::cocycle::checks_to_csv(&res.submultiplicative),
                ));
                files.push((format!("equivalence_seed{seed}.csv"), ex::equivalence_csv(&res.equivalence)));
                for &q in &plan.q_grid {
                    if settings.phi_steps.is_empty() {
                        break;
                    }
                    let est = ex::phi(rs, &plan.weights, q, &settings.phi_steps, settings.phi_samples, seed, settings.k, plan.sampling)?;
                    files.push((format!("phi_seed{seed}_q{q}.csv"), est.to_csv()));
                }
            }
        }
        Mode::Formula => {
            let rs = plan.ruleset.as_ref().expect("validated");
            let rows = ex::formula_table(rs, &plan.weights, &plan.q_grid, sc.block_len)?;
            files.push(("formula.csv".into(), ex::formula_csv(&rows)));
        }
        Mode::Decompose => {
            let pbar = sc.pbar.as_ref().expect("validated");
            let (json, entropy_ok) = ex::decomposition_json(pbar, sc.block_len.expect("validated"), MAX_DUMP_WORDS)?;
            if !entropy_ok {
                failures.push("class entropy exceeds k log(ℓ+1)".into());
            }
            files.push(("decomposition.json".into(), json));
        }
    }
    Ok(Outputs {
        files,
        assertion_failures: failures,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the scenario at `path`, writing into `out_dir`. Returns the written paths.
pub fn run(path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let scenario: Scenario = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let plan = validate(scenario)?;
    let outputs = execute(&plan)?;
    let sc = &plan.scenario;

    let mut manifest_files: Vec<String> = outputs.files.iter().map(|f| f.0.clone()).collect();
    manifest_files.push("manifest.json".into());
    manifest_files.push("timing.json".into());
    let manifest = json!({
        "name": sc.name,
        "mode": format!("{:?}", sc.mode).to_lowercase(),
        "config_sha256": hex(&Sha256::digest(text.as_bytes())),
        "seeds": sc.seeds,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "outputs": manifest_files,
        "assertion_failures": outputs.assertion_failures,
    });
    let timing = json!({ "wall_seconds": start.elapsed().as_secs_f64() });

    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut written = Vec::new();
    let all = outputs.files.iter().cloned().chain([
        ("manifest.json".to_string(), serde_json::to_string_pretty(&manifest)? + "\n"),
        ("timing.json".to_string(), serde_json::to_string_pretty(&timing)? + "\n"),
    ]);
    for (name, contents) in all {
        let p = out_dir.join(&name);
        std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        written.push(p);
    }
    if !outputs.assertion_failures.is_empty() {
        return Err(AssertionFailed(outputs.assertion_failures.join("; ")).into());
    }
    Ok(written)
}
