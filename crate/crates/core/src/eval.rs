//! Measurements: prediction losses, bound checks, Pareto and intelligence
//! order verdicts, and disagreement between informed and universal agents.
//!
//! Bounds that involve a complexity term use the program's code length in
//! bits where the theory has Kolmogorov complexity.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use num_traits::{Signed, Zero};

use crate::domains::{make_sp_env, ProgramSequence};
use crate::error::{Error, Result};
use crate::interaction::{ActionSymbol, History, HorizonPolicy, PerceptSpace, Policy};
use crate::model::{build_mixture, sq_distance_sum, ChronologicalModel, MixtureModel, ProgramModel};
use crate::planner::{policy_value_functional, run_interaction, Environment, ExpectimaxPolicy, Planner};
use crate::rational::{self, Rational};
use crate::vm::{consistent_envs, Program, RunBudget};

/// `entries[x][y]`: loss of predicting `y` when percept `x` occurs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LossMatrix {
    entries: Vec<Vec<Rational>>,
}

impl LossMatrix {
    pub fn new(entries: Vec<Vec<Rational>>) -> Result<Self> {
        let width = entries.first().map_or(0, Vec::len);
        if entries.is_empty() || width == 0 || entries.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidModel("loss matrix must be a nonempty rectangle".into()));
        }
        if let Some(bad) = entries
            .iter()
            .flatten()
            .find(|l| l.is_negative() || **l > rational::one())
        {
            return Err(Error::out_of_range("loss", rational::format(bad), "[0, 1]"));
        }
        Ok(LossMatrix { entries })
    }

    /// 0 for a correct prediction of one of `n` symbols, 1 otherwise.
    pub fn error_loss(n: usize) -> Self {
        let entries = (0..n)
            .map(|x| {
                (0..n)
                    .map(|y| if x == y { rational::zero() } else { rational::one() })
                    .collect()
            })
            .collect();
        LossMatrix { entries }
    }

    pub fn loss(&self, x: usize, y: usize) -> &Rational {
        &self.entries[x][y]
    }

    pub fn num_outcomes(&self) -> usize {
        self.entries.len()
    }

    pub fn num_predictions(&self) -> usize {
        self.entries[0].len()
    }
}

/// Predicts the next percept (as an index into the prediction alphabet of a
/// loss matrix) after history `h` and action `y`.
pub trait Predictor {
    fn predict(&self, h: &History, y: ActionSymbol) -> Result<usize>;
}

/// The loss-minimising predictor for a model: `argmin_p sum_x rho(x) loss(x, p)`,
/// smallest prediction on ties.
pub struct LambdaPredictor<'a> {
    pub model: &'a dyn ChronologicalModel,
    pub loss: &'a LossMatrix,
}

impl Predictor for LambdaPredictor<'_> {
    fn predict(&self, h: &History, y: ActionSymbol) -> Result<usize> {
        let row = match self.model.conditional(h, y) {
            Ok(row) => row,
            Err(Error::UndefinedConditional(_)) => return Ok(0),
            Err(e) => return Err(e),
        };
        let mut best: Option<(usize, Rational)> = None;
        for p in 0..self.loss.num_predictions() {
            let expected: Rational = row.iter().enumerate().map(|(x, q)| q * self.loss.loss(x, p)).sum();
            if best.as_ref().is_none_or(|(_, b)| expected < *b) {
                best = Some((p, expected));
            }
        }
        Ok(best.expect("nonempty prediction alphabet").0)
    }
}

/// A predictor backed by a closure.
pub struct FnPredictor<F>(pub F);

impl<F: Fn(&History, ActionSymbol) -> usize> Predictor for FnPredictor<F> {
    fn predict(&self, h: &History, y: ActionSymbol) -> Result<usize> {
        Ok((self.0)(h, y))
    }
}

/// `L_n = sum_{t<=n} E_mu[loss(x_t, prediction_t)]`, with actions from `actions`.
pub fn expected_loss(
    predictor: &dyn Predictor,
    mu: &dyn ChronologicalModel,
    loss: &LossMatrix,
    n: usize,
    actions: &dyn Policy,
) -> Result<Rational> {
    if loss.num_outcomes() != mu.space().num_percepts() {
        return Err(Error::InvalidModel(
            "loss matrix rows must match the percept alphabet".into(),
        ));
    }
    fn walk(
        predictor: &dyn Predictor,
        mu: &dyn ChronologicalModel,
        loss: &LossMatrix,
        n: usize,
        actions: &dyn Policy,
        h: &History,
        weight: &Rational,
    ) -> Result<Rational> {
        if h.len() == n {
            return Ok(Rational::zero());
        }
        let y = actions.act(h)?;
        let guess = predictor.predict(h, y)?;
        let row = mu.conditional(h, y)?;
        let mut total = Rational::zero();
        for (x, p) in row.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let w = weight * p;
            total += &w * loss.loss(x, guess);
            total += walk(
                predictor,
                mu,
                loss,
                n,
                actions,
                &h.with_cycle(y, mu.space().percept(x)),
                &w,
            )?;
        }
        Ok(total)
    }
    walk(predictor, mu, loss, n, actions, &History::new(), &rational::one())
}

/// A checked inequality `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundReport {
    pub name: String,
    pub lhs: Rational,
    pub rhs: Rational,
    pub holds: bool,
    pub context: String,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: Rational, rhs: Rational, context: impl Into<String>) -> Self {
        let holds = lhs <= rhs;
        BoundReport {
            name: name.into(),
            lhs,
            rhs,
            holds,
            context: context.into(),
        }
    }

    pub const CSV_HEADER: &'static str = "name,lhs,rhs,holds,lhs_approx,rhs_approx,context";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},\"{}\"",
            self.name,
            rational::format(&self.lhs),
            rational::format(&self.rhs),
            self.holds,
            rational::to_f64(&self.lhs),
            rational::to_f64(&self.rhs),
            self.context.replace('"', "'")
        )
    }

    pub fn to_csv(reports: &[BoundReport]) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in reports {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    /// One `holds`/`fails` line per report.
    pub fn summary(reports: &[BoundReport]) -> String {
        let mut out = String::new();
        for r in reports {
            let _ = writeln!(out, "{r}");
        }
        out
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.6} <= {:.6} ({})",
            if self.holds { "holds" } else { "fails" },
            self.name,
            rational::to_f64(&self.lhs),
            rational::to_f64(&self.rhs),
            self.context
        )
    }
}

/// `sum 2^-length` over `programs`.
pub fn kraft_sum(programs: &[Program]) -> Rational {
    programs.iter().map(|p| rational::dyadic(p.length_bits())).sum()
}

fn pool_member<'a>(mu: &Program, pool: &'a [Program]) -> Result<&'a Program> {
    pool.iter()
        .find(|q| *q == mu)
        .ok_or_else(|| Error::NotFound(format!("program {} is not in the pool", mu.to_hex())))
}

/// The program-pool setting shared by the prediction bounds: the pool, how
/// its programs run, and the fixed action rule feeding them.
pub struct PoolSetting<'a> {
    pub pool: &'a [Program],
    pub budget: RunBudget,
    pub space: &'a PerceptSpace,
    pub actions: &'a dyn Policy,
}

/// `sum_t E[sum_x (xi - mu)^2] <= (ln 2 / 2) * length(mu)` for a pool member `mu`.
/// The right side uses a rational lower bound on `ln 2`, so `holds` is never
/// reported for an inequality that fails with the true constant.
pub fn check_convergence_bound(mu: &Program, setting: &PoolSetting<'_>, n: usize) -> Result<BoundReport> {
    let mu = pool_member(mu, setting.pool)?;
    let xi = build_mixture(setting.pool, setting.budget, setting.space)?;
    let truth = ProgramModel::new(mu.clone(), setting.budget, setting.space.clone());
    let lhs = sq_distance_sum(&xi, &truth, setting.actions, n)?;
    let bits = rational::int(mu.length_bits() as i64);
    let rhs = rational::ln2_lower() / rational::int(2) * bits;
    Ok(BoundReport::new(
        "convergence",
        lhs,
        rhs,
        format!(
            "mu={} length={} n={n} pool={}",
            mu.to_hex(),
            mu.length_bits(),
            setting.pool.len()
        ),
    ))
}

/// `0 <= L(xi) - L(mu) <= 2 ln2 l + 2 sqrt(L(mu) ln2 l)` with `l` the code
/// length of `mu`. The right side is rounded down, and `holds` also requires
/// the left side to be non-negative.
pub fn check_loss_bound(mu: &Program, setting: &PoolSetting<'_>, loss: &LossMatrix, n: usize) -> Result<BoundReport> {
    let mu = pool_member(mu, setting.pool)?;
    let xi = build_mixture(setting.pool, setting.budget, setting.space)?;
    let truth = ProgramModel::new(mu.clone(), setting.budget, setting.space.clone());
    let l_xi = expected_loss(&LambdaPredictor { model: &xi, loss }, &truth, loss, n, setting.actions)?;
    let l_mu = expected_loss(
        &LambdaPredictor { model: &truth, loss },
        &truth,
        loss,
        n,
        setting.actions,
    )?;
    let lhs = &l_xi - &l_mu;
    let ln2_l = rational::ln2_lower() * rational::int(mu.length_bits() as i64);
    let rhs = rational::int(2) * &ln2_l + rational::int(2) * rational::sqrt_lower(&(&l_mu * &ln2_l), 12);
    let mut report = BoundReport::new(
        "loss",
        lhs.clone(),
        rhs,
        format!(
            "mu={} length={} n={n} L_xi={} L_mu={}",
            mu.to_hex(),
            mu.length_bits(),
            rational::format(&l_xi),
            rational::format(&l_mu)
        ),
    );
    report.holds &= !lhs.is_negative();
    Ok(report)
}

/// The universal sequence predictor over a pool of sequence programs makes at
/// most as many errors as there are programs. `lhs` counts the errors of the
/// myopic mixture agent over `n` cycles against the sequence printed by `mu`.
pub fn check_sp_error_bound(mu: &Program, pool: &[Program], budget: RunBudget, n: usize) -> Result<BoundReport> {
    let mu = pool_member(mu, pool)?;
    let truth = make_sp_env(ProgramSequence {
        program: mu.clone(),
        budget,
    });
    let xi = sp_mixture(pool, budget)?;
    let agent = ExpectimaxPolicy::new(&xi, HorizonPolicy::Moving(1), n)?;
    let h = run_interaction(&agent, &Environment::Model(&truth), n, 0)?;
    let errors = h.percepts().filter(|x| x.reward.is_zero()).count();
    Ok(BoundReport::new(
        "sp-errors",
        rational::int(errors as i64),
        rational::int(pool.len() as i64),
        format!("mu={} n={n} pool={}", mu.to_hex(), pool.len()),
    ))
}

/// The sequence-prediction embedding of a program pool, weighted `2^-length`.
pub fn sp_mixture(pool: &[Program], budget: RunBudget) -> Result<MixtureModel> {
    let space = PerceptSpace::with_binary_rewards(2, 1);
    let components: Vec<(Rational, Arc<dyn ChronologicalModel>)> = pool
        .iter()
        .map(|q| {
            let env = make_sp_env(ProgramSequence {
                program: q.clone(),
                budget,
            });
            (
                rational::dyadic(q.length_bits()),
                Arc::new(env) as Arc<dyn ChronologicalModel>,
            )
        })
        .collect();
    MixtureModel::from_models(space, components)
}

/// Enumeration caps for [`pareto_check`].
pub const PARETO_MAX_SYMBOLS: usize = 3;
pub const PARETO_MAX_LIFETIME: usize = 3;
pub const PARETO_MAX_CLASS: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParetoVerdict {
    pub undominated: bool,
    /// The policy's value in each environment.
    pub values: Vec<Rational>,
    /// A value vector of some policy that dominates, if any.
    pub dominator: Option<Vec<Rational>>,
    /// Size of the final Pareto frontier over all deterministic policies.
    pub frontier_size: usize,
}

type ValueVector = Vec<Rational>;

fn dominates(a: &ValueVector, b: &ValueVector) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a != b
}

fn prune(mut set: Vec<ValueVector>) -> Vec<ValueVector> {
    set.sort();
    set.dedup();
    let keep: Vec<bool> = set.iter().map(|v| !set.iter().any(|w| dominates(w, v))).collect();
    set.into_iter().zip(keep).filter_map(|(v, k)| k.then_some(v)).collect()
}

/// Maximal vectors of `sum_e mu_e(h) * (rewards from h on)` over every
/// deterministic continuation policy.
fn frontier(
    class: &[&dyn ChronologicalModel],
    h: &History,
    joints: &[Rational],
    lifetime: usize,
) -> Result<Vec<ValueVector>> {
    if h.len() == lifetime {
        return Ok(vec![vec![Rational::zero(); class.len()]]);
    }
    let space = class[0].space();
    let mut all = Vec::new();
    for y in space.actions() {
        let rows: Vec<Option<Vec<Rational>>> = class
            .iter()
            .zip(joints)
            .map(|(m, j)| {
                if j.is_zero() {
                    Ok(None)
                } else {
                    m.conditional(h, y).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        let mut acc: Vec<ValueVector> = vec![vec![Rational::zero(); class.len()]];
        for (xi, x) in space.percepts().into_iter().enumerate() {
            let next_joints: Vec<Rational> = rows
                .iter()
                .zip(joints)
                .map(|(row, j)| row.as_ref().map_or_else(Rational::zero, |r| j * &r[xi]))
                .collect();
            if next_joints.iter().all(Zero::is_zero) {
                continue;
            }
            let immediate: ValueVector = next_joints.iter().map(|j| j * &x.reward).collect();
            let sub = frontier(class, &h.with_cycle(y, x), &next_joints, lifetime)?;
            let mut combined = Vec::with_capacity(acc.len() * sub.len());
            for a in &acc {
                for s in &sub {
                    combined.push(a.iter().zip(s).zip(&immediate).map(|((a, s), r)| a + s + r).collect());
                }
            }
            acc = prune(combined);
        }
        all.extend(acc);
    }
    Ok(prune(all))
}

/// Whether any deterministic policy is at least as good as `policy` in every
/// environment of `class` and strictly better in one. Exact: the achievable
/// value vectors are built bottom-up over all histories and pruned to their
/// Pareto frontier.
pub fn pareto_check(policy: &dyn Policy, class: &[&dyn ChronologicalModel], lifetime: usize) -> Result<ParetoVerdict> {
    let space = class
        .first()
        .ok_or_else(|| Error::InvalidModel("empty environment class".into()))?
        .space();
    if class.len() > PARETO_MAX_CLASS
        || lifetime > PARETO_MAX_LIFETIME
        || space.num_actions() > PARETO_MAX_SYMBOLS
        || space.num_percepts() > PARETO_MAX_SYMBOLS
    {
        return Err(Error::Capacity(format!(
            "pareto check limited to {PARETO_MAX_CLASS} environments, lifetime {PARETO_MAX_LIFETIME}, \
             {PARETO_MAX_SYMBOLS} actions and percepts"
        )));
    }
    if class.iter().any(|m| m.space() != space) {
        return Err(Error::InvalidModel("environments must share a percept space".into()));
    }
    let values = class
        .iter()
        .map(|m| crate::planner::policy_value_iterative(policy, *m, 1, lifetime, &History::new()))
        .collect::<Result<Vec<_>>>()?;
    let front = frontier(class, &History::new(), &vec![rational::one(); class.len()], lifetime)?;
    let dominator = front.iter().find(|v| dominates(v, &values)).cloned();
    Ok(ParetoVerdict {
        undominated: dominator.is_none(),
        values,
        dominator,
        frontier_size: front.len(),
    })
}

/// `p >= q` in the intelligence order: on every history with fewer than
/// `depth` cycles that some pool program produces, `p`'s value under the pool
/// mixture is at least `q`'s.
#[allow(clippy::too_many_arguments)]
pub fn intel_geq(
    p: &dyn Policy,
    q: &dyn Policy,
    pool: &[Program],
    depth: usize,
    horizon: &HorizonPolicy,
    lifetime: usize,
    budget: RunBudget,
    space: &PerceptSpace,
) -> Result<bool> {
    for len in 0..depth.min(lifetime) {
        for h in space.histories_of_len(len) {
            if consistent_envs(pool, &h, budget, space).is_empty() {
                continue;
            }
            let k = h.next_cycle();
            let m = horizon.horizon_end(k, lifetime)?;
            let vp = policy_value_functional(p, pool, k, m, &h, budget, space)?;
            let vq = policy_value_functional(q, pool, k, m, &h, budget, space)?;
            if vp < vq {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisagreementReport {
    /// Expected number of cycles where the universal agent's action differs
    /// from the informed agent's, divided by `n`.
    pub rate: Rational,
    /// Same, each disagreement weighted by the informed value it gives up.
    pub weighted_rate: Rational,
    /// Expected count per cycle.
    pub per_cycle: Vec<Rational>,
}

/// Exact disagreement between the agent planning with `xi` and the agent
/// planning with the true `mu`, along the universal agent's own histories
/// under `mu`, over `n` cycles.
pub fn disagreement_rate(
    mu: &dyn ChronologicalModel,
    xi: &dyn ChronologicalModel,
    horizon: &HorizonPolicy,
    n: usize,
) -> Result<DisagreementReport> {
    if n == 0 {
        return Err(Error::out_of_range("cycles", 0, ">= 1"));
    }
    let agent_xi = ExpectimaxPolicy::new(xi, horizon.clone(), n)?;
    let mut planner_mu = Planner::new(mu).with_horizon(horizon.clone());
    let mut per_cycle = vec![Rational::zero(); n];
    let mut weighted = Rational::zero();
    let mut frontier = vec![(History::new(), rational::one())];
    while let Some((h, p)) = frontier.pop() {
        let k = h.next_cycle();
        if k > n {
            continue;
        }
        let m = horizon.horizon_end(k, n)?;
        let y_xi = agent_xi.act(&h)?;
        let (y_mu, v_mu) = planner_mu.best_action(&h, m)?;
        if y_xi != y_mu {
            per_cycle[k - 1] += &p;
            let v_xi = planner_mu.value_given_action(&h, y_xi, m)?;
            weighted += &p * (v_mu - v_xi);
        }
        for (i, q) in mu.conditional(&h, y_xi)?.into_iter().enumerate() {
            if !q.is_zero() {
                frontier.push((h.with_cycle(y_xi, mu.space().percept(i)), &p * q));
            }
        }
    }
    let count: Rational = per_cycle.iter().sum();
    let n_r = rational::int(n as i64);
    Ok(DisagreementReport {
        rate: count / &n_r,
        weighted_rate: weighted / n_r,
        per_cycle,
    })
}

/// Quick exact checks of the library's core invariants, for the `verify`
/// command. Each report states an inequality; equalities are reported as
/// `|difference| <= 0`.
pub fn invariant_suite() -> Result<Vec<BoundReport>> {
    use crate::interaction::ConstantPolicy;
    use crate::model::check_chronological;
    use crate::planner::policy_value_iterative;
    use crate::vm::{enumerate_programs, ProgramPolicy};

    let mut reports = Vec::new();
    let all12 = enumerate_programs(12);
    reports.push(BoundReport::new(
        "kraft",
        kraft_sum(&all12),
        rational::one(),
        format!("{} programs of at most 12 bits", all12.len()),
    ));

    let budget = RunBudget::new(16)?;
    let space = PerceptSpace::with_binary_rewards(2, 2);
    let pool = enumerate_programs(8);
    let xi = build_mixture(&pool, budget, &space)?;
    let chrono = check_chronological(&xi, 3)?;
    reports.push(BoundReport::new(
        "chronological",
        if chrono { rational::zero() } else { rational::one() },
        rational::zero(),
        "program mixture at 8 bits, depth 3",
    ));

    let mut worst = Rational::zero();
    for p in enumerate_programs(8) {
        let policy = ProgramPolicy::new(p, budget, space.clone());
        let f = policy_value_functional(&policy, &pool, 1, 3, &History::new(), budget, &space)?;
        let i = policy_value_iterative(&policy, &xi, 1, 3, &History::new())?;
        worst = worst.max((f - i).abs());
    }
    reports.push(BoundReport::new(
        "functional-iterative",
        worst,
        rational::zero(),
        "all 8-bit policies, empty history, m=3",
    ));

    let mu = Program::from_asm("INC; END")?;
    let setting = PoolSetting {
        pool: &pool,
        budget,
        space: &space,
        actions: &ConstantPolicy(ActionSymbol(0)),
    };
    reports.push(check_convergence_bound(&mu, &setting, 6)?);
    reports.push(check_loss_bound(
        &mu,
        &setting,
        &LossMatrix::error_loss(space.num_percepts()),
        6,
    )?);
    Ok(reports)
}
