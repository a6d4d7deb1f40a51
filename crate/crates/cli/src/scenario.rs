//! Wiring configs to agents and environments, and writing run artifacts.
//!
//! Output directory layout:
//!
//! - `trace.csv`: `cycle,action,observation,reward,value,posterior_top`, one
//!   row per cycle. `value` is the planner's value (or the selected validated
//!   claim for `aixitl`); `posterior_top` labels the class component with the
//!   largest posterior mass after the cycle.
//! - `results.txt`: `key = value` lines (see [`emit_report`]).
//! - `report.txt`: the human-readable summary.
//! - `manifest.txt`: a config that reproduces the run, with hashes and versions
//!   in its comment header. Spec files are copied to `inputs/`.
//! - `bounds.csv` when bounds were requested, `selection.csv` for `aixitl`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use aixi::aixitl::{run_aixitl, AixitlConfig, CandidateConfig, EnvClass, Validator};
use aixi::domains::{
    make_ex_env, make_fm_env, make_heavenhell, make_lazy, make_onlyone, make_sg_env, make_sp_env, FunctionClassSpec,
    GameSpec, PeriodicSequence, ProgramSequence, RelationSpec,
};
use aixi::eval::{
    check_convergence_bound, check_loss_bound, check_sp_error_bound, disagreement_rate, sp_mixture, BoundReport,
    DisagreementReport, LossMatrix, PoolSetting,
};
use aixi::interaction::FnPolicy;
use aixi::model::{build_mixture, posterior, ChronologicalModel, MixtureModel, ProgramModel, TabularModel};
use aixi::planner::{run_interaction, Environment, ExpectimaxPolicy};
use aixi::rational::{self, Rational};
use aixi::vm::{enumerate_programs, Program, ProgramPolicy, RunBudget};
use aixi::{ActionSymbol, History, HorizonPolicy, PerceptSpace};
use sha2::{Digest, Sha256};

use crate::config::{AgentKind, BoundKind, EnvSpec, ScenarioConfig};
use crate::error::{CliError, Result};

/// Largest `(|Y| |X|)^h` expectimax tree the runner will attempt.
pub const MAX_PLANNER_NODES: f64 = (1u64 << 26) as f64;
/// Largest candidate pool for `aixitl`.
pub const MAX_CANDIDATES: usize = 2000;

/// The environment, the class the universal agents mix over, and the
/// program pool behind it when there is one.
pub struct World {
    pub space: PerceptSpace,
    pub truth: Arc<dyn ChronologicalModel>,
    pub class: Arc<MixtureModel>,
    pub truth_program: Option<Program>,
    pub pool: Option<Vec<Program>>,
    pub budget: RunBudget,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(vec![msg.into()])
}

fn singleton(truth: &Arc<dyn ChronologicalModel>) -> Result<Arc<MixtureModel>> {
    Ok(Arc::new(MixtureModel::uniform(
        truth.space().clone(),
        vec![truth.clone()],
    )?))
}

pub fn build_world(cfg: &ScenarioConfig) -> Result<World> {
    let budget = RunBudget::new(cfg.steps)?;
    let pool = || enumerate_programs(cfg.max_bits);
    let (truth, class, truth_program, pool): (Arc<dyn ChronologicalModel>, _, _, _) = match &cfg.environment {
        EnvSpec::HeavenHell(i) => {
            let truth: Arc<dyn ChronologicalModel> = Arc::new(make_heavenhell(*i)?);
            let members: Vec<Arc<dyn ChronologicalModel>> =
                vec![Arc::new(make_heavenhell(0)?), Arc::new(make_heavenhell(1)?)];
            let class = MixtureModel::uniform(truth.space().clone(), members)?;
            (truth, Arc::new(class), None, None)
        }
        EnvSpec::OnlyOne { n, y_star } => {
            let truth: Arc<dyn ChronologicalModel> = Arc::new(make_onlyone(*n, ActionSymbol(*y_star))?);
            let members = (0..*n)
                .map(|y| make_onlyone(*n, ActionSymbol(y)).map(|m| Arc::new(m) as Arc<dyn ChronologicalModel>))
                .collect::<aixi::Result<Vec<_>>>()?;
            let class = MixtureModel::uniform(truth.space().clone(), members)?;
            (truth, Arc::new(class), None, None)
        }
        EnvSpec::Lazy => {
            let truth: Arc<dyn ChronologicalModel> = Arc::new(make_lazy(cfg.lifetime.max(2))?);
            let class = singleton(&truth)?;
            (truth, class, None, None)
        }
        EnvSpec::Program(p) => {
            let space = PerceptSpace::with_binary_rewards(cfg.actions, cfg.observations);
            let truth: Arc<dyn ChronologicalModel> = Arc::new(ProgramModel::new(p.clone(), budget, space.clone()));
            let pool = pool();
            let class = if pool.is_empty() {
                singleton(&truth)?
            } else {
                Arc::new(build_mixture(&pool, budget, &space)?)
            };
            (truth, class, Some(p.clone()), Some(pool))
        }
        EnvSpec::SpPeriodic(bits) => {
            let truth: Arc<dyn ChronologicalModel> = Arc::new(make_sp_env(PeriodicSequence::new(bits.clone())?));
            let class = singleton(&truth)?;
            (truth, class, None, None)
        }
        EnvSpec::SpProgram(p) => {
            let truth: Arc<dyn ChronologicalModel> = Arc::new(make_sp_env(ProgramSequence {
                program: p.clone(),
                budget,
            }));
            let pool = pool();
            let class = if pool.is_empty() {
                singleton(&truth)?
            } else {
                Arc::new(sp_mixture(&pool, budget)?)
            };
            (truth, class, Some(p.clone()), Some(pool))
        }
        EnvSpec::Tabular(path) => {
            let truth: Arc<dyn ChronologicalModel> = Arc::new(TabularModel::from_text(&read(path)?)?);
            let class = singleton(&truth)?;
            (truth, class, None, None)
        }
        EnvSpec::Fm(path) => {
            let fm = make_fm_env(FunctionClassSpec::from_text(&read(path)?)?)?;
            let values = cfg.truth.as_deref().unwrap_or_default();
            let f = fm
                .class()
                .find(values)
                .ok_or_else(|| validation(format!("truth {values:?} is not a function of the class")))?;
            let truth: Arc<dyn ChronologicalModel> = Arc::new(fm.single(f)?);
            let members = (0..fm.class().functions.len())
                .map(|g| {
                    Ok((
                        fm.class().prior[g].clone(),
                        Arc::new(fm.single(g)?) as Arc<dyn ChronologicalModel>,
                    ))
                })
                .collect::<aixi::Result<Vec<_>>>()?;
            let class = MixtureModel::from_models(fm.space().clone(), members)?;
            (truth, Arc::new(class), None, None)
        }
        EnvSpec::Sg(path) => {
            let truth: Arc<dyn ChronologicalModel> = Arc::new(make_sg_env(GameSpec::from_text(&read(path)?)?)?);
            let class = singleton(&truth)?;
            (truth, class, None, None)
        }
        EnvSpec::Ex(path) => {
            let truth: Arc<dyn ChronologicalModel> = Arc::new(make_ex_env(RelationSpec::from_text(&read(path)?)?)?);
            let class = singleton(&truth)?;
            (truth, class, None, None)
        }
    };
    Ok(World {
        space: truth.space().clone(),
        truth,
        class,
        truth_program,
        pool,
        budget,
    })
}

/// `(|Y| |X|)^h` for the longest planning window of the run.
fn planner_nodes(space: &PerceptSpace, horizon: &HorizonPolicy, lifetime: usize) -> Result<f64> {
    let mut window = 0;
    for k in 1..=lifetime {
        window = window.max(horizon.horizon_end(k, lifetime)? + 1 - k);
    }
    Ok(((space.num_actions() * space.num_percepts()) as f64).powi(window as i32))
}

fn check_planner_capacity(world: &World, cfg: &ScenarioConfig, horizon: &HorizonPolicy) -> Result<()> {
    let nodes = planner_nodes(&world.space, horizon, cfg.lifetime)?;
    if nodes > MAX_PLANNER_NODES {
        return Err(CliError::Capacity(format!(
            "expectimax tree of about {nodes:.0} nodes exceeds {MAX_PLANNER_NODES:.0}; shorten the horizon"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub cycle: usize,
    pub action: ActionSymbol,
    pub observation: usize,
    pub reward: Rational,
    pub value: Option<Rational>,
    pub posterior_top: Option<String>,
}

pub const TRACE_HEADER: &str = "cycle,action,observation,reward,value,posterior_top";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.cycle,
            r.action,
            r.observation,
            rational::format(&r.reward),
            r.value.as_ref().map(rational::format).unwrap_or_default(),
            csv_field(r.posterior_top.as_deref().unwrap_or_default())
        );
    }
    out
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub config: ScenarioConfig,
    pub history: History,
    pub trace: Vec<TraceRow>,
    pub bounds: Vec<BoundReport>,
    pub disagreement: Option<DisagreementReport>,
    /// The per-cycle selection log of an `aixitl` run, as CSV.
    pub selection_csv: Option<String>,
}

/// Runs a scenario in memory.
pub fn execute(cfg: &ScenarioConfig) -> Result<RunArtifacts> {
    let world = build_world(cfg)?;
    let env = match (&cfg.environment, &world.truth_program) {
        (EnvSpec::Program(_), Some(p)) => Environment::Program {
            program: p,
            budget: world.budget,
            space: &world.space,
        },
        _ => Environment::Model(world.truth.as_ref()),
    };

    let mut selection_csv = None;
    let (history, values): (History, Vec<Option<Rational>>) = match cfg.agent {
        AgentKind::Informed | AgentKind::Universal | AgentKind::Greedy => {
            let (model, horizon): (Arc<dyn ChronologicalModel>, HorizonPolicy) = match cfg.agent {
                AgentKind::Informed => (world.truth.clone(), cfg.horizon.clone()),
                AgentKind::Universal => (world.class.clone(), cfg.horizon.clone()),
                _ => (world.class.clone(), HorizonPolicy::Moving(1)),
            };
            check_planner_capacity(&world, cfg, &horizon)?;
            let agent = ExpectimaxPolicy::new(model, horizon, cfg.lifetime)?;
            let h = run_interaction(&agent, &env, cfg.lifetime, cfg.seed)?;
            let values = (0..h.len())
                .map(|i| agent.decide(&h.prefix(i)).map(|(_, v)| Some(v)))
                .collect::<aixi::Result<Vec<_>>>()?;
            (h, values)
        }
        AgentKind::FixedProgram => {
            let program = cfg.agent_program.clone().expect("validated config has a program");
            let agent = ProgramPolicy::new(program, world.budget, world.space.clone());
            let h = run_interaction(&agent, &env, cfg.lifetime, cfg.seed)?;
            let n = h.len();
            (h, vec![None; n])
        }
        AgentKind::Bounded => {
            let candidates = enumerate_programs(cfg.max_bits).len();
            if candidates > MAX_CANDIDATES {
                return Err(CliError::Capacity(format!(
                    "{candidates} candidate programs at max_bits = {} exceed {MAX_CANDIDATES}",
                    cfg.max_bits
                )));
            }
            let env_class = match (&cfg.environment, &world.pool) {
                (EnvSpec::Program(_), Some(pool)) => EnvClass::Programs {
                    pool: pool.clone(),
                    budget: world.budget,
                },
                _ => EnvClass::Mixture(world.class.clone()),
            };
            let validator = Validator {
                env: env_class,
                horizon: cfg.horizon.clone(),
                lifetime: cfg.lifetime,
                candidates: CandidateConfig {
                    budget: world.budget,
                    space: world.space.clone(),
                    claim_unit: cfg.claim_unit.clone(),
                },
            };
            let run = run_aixitl(
                &AixitlConfig {
                    max_bits: cfg.max_bits,
                    validator,
                    seed: cfg.seed,
                },
                &env,
                Vec::new(),
            )?;
            selection_csv = Some(run.log_csv());
            let values = run.log.iter().map(|o| Some(o.selected_value())).collect();
            (run.history, values)
        }
    };

    let mut trace = Vec::with_capacity(history.len());
    for (i, value) in values.into_iter().enumerate() {
        let post = posterior(&world.class, &history.prefix(i + 1))?;
        let posterior_top = post.top_component().map(|c| world.class.components()[c].1.label());
        let x = history.percept(i);
        trace.push(TraceRow {
            cycle: i + 1,
            action: history.action(i),
            observation: x.observation,
            reward: x.reward.clone(),
            value,
            posterior_top,
        });
    }

    let (bounds, disagreement) = compute_bounds(cfg, &world, &history)?;
    Ok(RunArtifacts {
        config: cfg.clone(),
        history,
        trace,
        bounds,
        disagreement,
        selection_csv,
    })
}

fn compute_bounds(
    cfg: &ScenarioConfig,
    world: &World,
    history: &History,
) -> Result<(Vec<BoundReport>, Option<DisagreementReport>)> {
    // The bounds hold for any fixed action rule; replay the run's actions.
    let actions: Vec<ActionSymbol> = history.actions().collect();
    let rule = FnPolicy(move |h: &History| actions.get(h.len()).copied().unwrap_or(ActionSymbol(0)));
    let mut reports = Vec::new();
    let mut disagreement = None;
    for bound in &cfg.bounds {
        match bound {
            BoundKind::Loss | BoundKind::Convergence => {
                let (Some(mu), Some(pool)) = (&world.truth_program, &world.pool) else {
                    return Err(validation(format!("{} needs a program environment", bound.keyword())));
                };
                let setting = PoolSetting {
                    pool,
                    budget: world.budget,
                    space: &world.space,
                    actions: &rule,
                };
                reports.push(if *bound == BoundKind::Loss {
                    check_loss_bound(
                        mu,
                        &setting,
                        &LossMatrix::error_loss(world.space.num_percepts()),
                        cfg.lifetime,
                    )?
                } else {
                    check_convergence_bound(mu, &setting, cfg.lifetime)?
                });
            }
            BoundKind::SpErrors => {
                let (Some(mu), Some(pool)) = (&world.truth_program, &world.pool) else {
                    return Err(validation("sp-errors needs an sp-program environment"));
                };
                reports.push(check_sp_error_bound(mu, pool, world.budget, cfg.lifetime)?);
            }
            BoundKind::Disagreement => {
                check_planner_capacity(world, cfg, &cfg.horizon)?;
                disagreement = Some(disagreement_rate(
                    world.truth.as_ref(),
                    world.class.as_ref(),
                    &cfg.horizon,
                    cfg.lifetime,
                )?);
            }
        }
    }
    Ok((reports, disagreement))
}

/// The summary text and the machine-readable results of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub summary: String,
    pub results: String,
    pub failed_bounds: usize,
}

/// Aggregates a run. `results` holds `key = value` lines:
///
/// ```text
/// scenario = <name>
/// agent = <kind>
/// cycles = <n>
/// total_reward = <p/q>
/// mean_reward = <p/q>
/// bound.<name>.lhs = <p/q>
/// bound.<name>.rhs = <p/q>
/// bound.<name>.holds = true|false
/// disagreement.rate = <p/q>
/// disagreement.weighted_rate = <p/q>
/// ```
pub fn emit_report(art: &RunArtifacts) -> Result<Report> {
    if art.trace.is_empty() {
        return Err(CliError::EmptyTrace);
    }
    let cfg = &art.config;
    let total: Rational = art.trace.iter().map(|r| &r.reward).sum();
    let mean = &total / rational::int(art.trace.len() as i64);

    let mut results = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(results, "{k} = {v}");
    };
    kv("scenario", cfg.name.clone());
    kv("agent", cfg.agent.keyword().into());
    kv("cycles", art.trace.len().to_string());
    kv("total_reward", rational::format(&total));
    kv("mean_reward", rational::format(&mean));
    for b in &art.bounds {
        kv(&format!("bound.{}.lhs", b.name), rational::format(&b.lhs));
        kv(&format!("bound.{}.rhs", b.name), rational::format(&b.rhs));
        kv(&format!("bound.{}.holds", b.name), b.holds.to_string());
    }
    if let Some(d) = &art.disagreement {
        kv("disagreement.rate", rational::format(&d.rate));
        kv("disagreement.weighted_rate", rational::format(&d.weighted_rate));
    }

    let mut summary = String::new();
    let _ = writeln!(summary, "scenario {}", cfg.name);
    let _ = writeln!(
        summary,
        "agent {}, environment {}, horizon {}, lifetime {}, seed {}",
        cfg.agent.keyword(),
        cfg.environment
            .to_config_value(cfg.environment.file().and_then(|p| p.file_name()?.to_str())),
        cfg.horizon,
        cfg.lifetime,
        cfg.seed
    );
    let _ = writeln!(summary, "cycles {}", art.trace.len());
    let _ = writeln!(
        summary,
        "total reward {} ({:.6})",
        rational::format(&total),
        rational::to_f64(&total)
    );
    let _ = writeln!(
        summary,
        "mean reward {} ({:.6})",
        rational::format(&mean),
        rational::to_f64(&mean)
    );
    if !art.bounds.is_empty() {
        summary.push_str("bounds (program code length stands in for complexity):\n");
        summary.push_str(&BoundReport::summary(&art.bounds));
    }
    if let Some(d) = &art.disagreement {
        let _ = writeln!(
            summary,
            "disagreement rate {} ({:.6}), value-weighted {} ({:.6})",
            rational::format(&d.rate),
            rational::to_f64(&d.rate),
            rational::format(&d.weighted_rate),
            rational::to_f64(&d.weighted_rate)
        );
    }
    Ok(Report {
        summary,
        results,
        failed_bounds: art.bounds.iter().filter(|b| !b.holds).count(),
    })
}

/// Where a run writes its artifacts.
pub fn output_dir(cfg: &ScenarioConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// The manifest: a config reproducing the run, preceded by comment lines with
/// the config hash, seed, versions and input hashes.
pub fn manifest(cfg: &ScenarioConfig) -> Result<(String, Option<(String, String)>)> {
    let input = match cfg.environment.file() {
        Some(p) => {
            let name = p
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| validation(format!("bad spec file name {}", p.display())))?;
            Some((format!("inputs/{name}"), read(p)?))
        }
        None => None,
    };
    let text = cfg.to_text(input.as_ref().map(|(n, _)| n.as_str()));
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    if let Some((_, contents)) = &input {
        hasher.update(contents.as_bytes());
    }
    let mut out = String::from("# aixi run manifest\n");
    let _ = writeln!(out, "# config_sha256 = {}", hex::encode(hasher.finalize()));
    let _ = writeln!(out, "# seed = {}", cfg.seed);
    let _ = writeln!(out, "# aixi = {}", aixi::VERSION);
    let _ = writeln!(out, "# aixi-cli = {}", env!("CARGO_PKG_VERSION"));
    if let Some((name, contents)) = &input {
        let _ = writeln!(
            out,
            "# input {name} sha256 = {}",
            hex::encode(Sha256::digest(contents.as_bytes()))
        );
    }
    out.push_str(&text);
    Ok((out, input))
}

/// Output of [`run_scenario`].
pub struct RunOutcome {
    pub dir: PathBuf,
    pub artifacts: RunArtifacts,
    pub report: Report,
}

/// Runs a scenario and writes every artifact into `dir`.
pub fn run_scenario(cfg: &ScenarioConfig, dir: &Path) -> Result<RunOutcome> {
    let artifacts = execute(cfg)?;
    let report = emit_report(&artifacts)?;
    let (manifest, input) = manifest(cfg)?;

    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    if let Some((name, contents)) = &input {
        let path = dir.join(name);
        let parent = path.parent().expect("inputs/ prefix");
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        write(&path, contents)?;
    }
    write(&dir.join("trace.csv"), &trace_csv(&artifacts.trace))?;
    write(&dir.join("manifest.txt"), &manifest)?;
    write(&dir.join("results.txt"), &report.results)?;
    write(&dir.join("report.txt"), &report.summary)?;
    if !artifacts.bounds.is_empty() {
        write(&dir.join("bounds.csv"), &BoundReport::to_csv(&artifacts.bounds))?;
    }
    if let Some(sel) = &artifacts.selection_csv {
        write(&dir.join("selection.csv"), sel)?;
    }
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        artifacts,
        report,
    })
}
