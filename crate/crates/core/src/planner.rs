//! Exact expectimax over histories.
//!
//! `V*(h, m)` is the optimal expected reward from cycle `k = |h| + 1` through
//! cycle `m` under a chronological model; `V*(h, m) = 0` once `k > m`. Every
//! node of the search tree is a complete history, and values are memoised on
//! `(history, m)` so one planner can answer many queries against the same model.

use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::RandBigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::interaction::{check_consistent, ActionSymbol, History, HorizonPolicy, Percept, PerceptSpace, Policy};
use crate::model::ChronologicalModel;
use crate::rational::Rational;
use crate::vm::{consistent_envs, env_cycle, replay_env, Program, RunBudget};

/// One value question: plan from `history` (so `k = |history| + 1`) up to cycle `m`.
#[derive(Clone)]
pub struct ValueQuery<'a> {
    pub model: &'a dyn ChronologicalModel,
    pub history: History,
    pub k: usize,
    pub m: usize,
    pub horizon: HorizonPolicy,
}

impl<'a> ValueQuery<'a> {
    pub fn new(model: &'a dyn ChronologicalModel, history: History, m: usize, horizon: HorizonPolicy) -> Result<Self> {
        if !history.is_complete() {
            return Err(Error::Alternation(
                "planning from a history with a pending action".into(),
            ));
        }
        let k = history.next_cycle();
        if m < k {
            return Err(Error::out_of_range("horizon end", m, format!(">= {k}")));
        }
        horizon.validate()?;
        Ok(ValueQuery {
            model,
            history,
            k,
            m,
            horizon,
        })
    }

    /// Uses `horizon` to pick `m_k` for the next cycle.
    pub fn from_horizon(
        model: &'a dyn ChronologicalModel,
        history: History,
        horizon: HorizonPolicy,
        lifetime: usize,
    ) -> Result<Self> {
        let m = horizon.horizon_end(history.next_cycle(), lifetime)?;
        Self::new(model, history, m, horizon)
    }

    fn planner(&self) -> Planner<'a> {
        Planner::new(self.model).with_horizon(self.horizon.clone())
    }
}

pub fn value_given_action(q: &ValueQuery<'_>, y: ActionSymbol) -> Result<Rational> {
    q.planner().value_given_action(&q.history, y, q.m)
}

pub fn value_opt(q: &ValueQuery<'_>) -> Result<Rational> {
    q.planner().value_opt(&q.history, q.m)
}

pub fn best_action(q: &ValueQuery<'_>) -> Result<ActionSymbol> {
    Ok(q.planner().best_action(&q.history, q.m)?.0)
}

/// Memoising expectimax search over one model.
pub struct Planner<'a> {
    model: &'a dyn ChronologicalModel,
    horizon: HorizonPolicy,
    memo: HashMap<(History, usize), Rational>,
}

impl<'a> Planner<'a> {
    pub fn new(model: &'a dyn ChronologicalModel) -> Self {
        Planner {
            model,
            horizon: HorizonPolicy::Moving(1),
            memo: HashMap::new(),
        }
    }

    /// Only the reward weighting of `horizon` matters here; the caller picks `m`.
    pub fn with_horizon(mut self, horizon: HorizonPolicy) -> Self {
        self.horizon = horizon;
        self.memo.clear();
        self
    }

    pub fn model(&self) -> &'a dyn ChronologicalModel {
        self.model
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    fn credit(&self, k: usize, x: &Percept) -> Rational {
        self.horizon.discounted_reward(k, &x.reward)
    }

    /// `sum_x [r(x) + V*(h y x, m)] * rho(x | h y)`.
    pub fn value_given_action(&mut self, h: &History, y: ActionSymbol, m: usize) -> Result<Rational> {
        let k = h.next_cycle();
        if k > m {
            return Err(Error::out_of_range("cycle", k, format!("<= horizon end {m}")));
        }
        let row = self.model.conditional(h, y)?;
        let space = self.model.space();
        let mut total = Rational::zero();
        for (i, p) in row.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let x = space.percept(i);
            let mut v = self.credit(k, &x);
            if k < m {
                v += self.value_opt(&h.with_cycle(y, x), m)?;
            }
            total += v * p;
        }
        Ok(total)
    }

    pub fn value_opt(&mut self, h: &History, m: usize) -> Result<Rational> {
        if h.next_cycle() > m {
            return Ok(Rational::zero());
        }
        if let Some(v) = self.memo.get(&(h.clone(), m)) {
            return Ok(v.clone());
        }
        let (_, v) = self.best_action(h, m)?;
        Ok(v)
    }

    /// The lexicographically smallest maximiser and its value.
    pub fn best_action(&mut self, h: &History, m: usize) -> Result<(ActionSymbol, Rational)> {
        let mut best: Option<(ActionSymbol, Rational)> = None;
        for y in self.model.space().actions() {
            let v = self.value_given_action(h, y, m)?;
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((y, v));
            }
        }
        let (y, v) = best.expect("percept space has at least one action");
        self.memo.insert((h.clone(), m), v.clone());
        Ok((y, v))
    }

    /// Values of every action, in action order.
    pub fn action_values(&mut self, h: &History, m: usize) -> Result<Vec<Rational>> {
        self.model
            .space()
            .actions()
            .map(|y| self.value_given_action(h, y, m))
            .collect()
    }
}

/// The AIμ / AIξ agent: expectimax on a model with a horizon policy.
pub struct ExpectimaxPolicy<M> {
    pub model: M,
    pub horizon: HorizonPolicy,
    pub lifetime: usize,
    memo: Mutex<HashMap<(History, usize), Rational>>,
}

impl<M: ChronologicalModel> ExpectimaxPolicy<M> {
    pub fn new(model: M, horizon: HorizonPolicy, lifetime: usize) -> Result<Self> {
        horizon.validate()?;
        Ok(ExpectimaxPolicy {
            model,
            horizon,
            lifetime,
            memo: Mutex::new(HashMap::new()),
        })
    }

    /// The chosen action and its value `V*(h, m_k)`.
    pub fn decide(&self, h: &History) -> Result<(ActionSymbol, Rational)> {
        let h = h.completed();
        let m = self.horizon.horizon_end(h.next_cycle(), self.lifetime)?;
        let mut memo = self.memo.lock().unwrap_or_else(|e| e.into_inner());
        let mut planner = Planner::new(&self.model).with_horizon(self.horizon.clone());
        planner.memo = std::mem::take(&mut *memo);
        let out = planner.best_action(&h, m);
        *memo = planner.memo;
        out
    }
}

impl<M: ChronologicalModel> Policy for ExpectimaxPolicy<M> {
    fn act(&self, history: &History) -> Result<ActionSymbol> {
        Ok(self.decide(history)?.0)
    }
}

/// What the agent interacts with.
pub enum Environment<'a> {
    /// A (possibly stochastic) model, sampled exactly from a seeded generator.
    Model(&'a dyn ChronologicalModel),
    /// A deterministic environment program.
    Program {
        program: &'a Program,
        budget: RunBudget,
        space: &'a PerceptSpace,
    },
}

/// Runs `lifetime` cycles. Given the same agent, environment and seed the
/// resulting history is identical.
pub fn run_interaction(agent: &dyn Policy, env: &Environment<'_>, lifetime: usize, seed: u64) -> Result<History> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = History::new();
    let mut state = crate::vm::MachineState::new();
    for _ in 0..lifetime {
        let y = agent.act(&h)?;
        let x = match env {
            Environment::Model(model) => {
                model.space().check_action(y)?;
                let row = model.conditional(&h, y)?;
                let i = sample_index(&row, &mut rng)?;
                model.space().percept(i)
            }
            Environment::Program { program, budget, space } => {
                space.check_action(y)?;
                let step = env_cycle(program, state, y, *budget, space);
                state = step.state;
                step.percept
            }
        };
        h = h.append_cycle(y, x)?;
    }
    Ok(h)
}

/// Draws index `i` with probability `row[i] / sum(row)`, exactly.
pub(crate) fn sample_index<R: rand::Rng>(row: &[Rational], rng: &mut R) -> Result<usize> {
    let denom = row.iter().fold(num_bigint::BigInt::one(), |acc, p| acc.lcm(p.denom()));
    let weights: Vec<num_bigint::BigInt> = row.iter().map(|p| p.numer() * (&denom / p.denom())).collect();
    let total: num_bigint::BigInt = weights.iter().sum();
    if total.is_zero() {
        return Err(Error::UndefinedConditional("environment emits no percept".into()));
    }
    let mut u = rng.gen_bigint_range(&num_bigint::BigInt::zero(), &total);
    for (i, w) in weights.iter().enumerate() {
        if &u < w {
            return Ok(i);
        }
        u -= w;
    }
    unreachable!("u is below the total weight")
}

/// `min(m, n_{r+1})` for the episode `n_r < k <= n_{r+1}` containing cycle `k`.
pub fn episode_cutoff(boundaries: &[usize], k: usize, m: usize) -> Result<usize> {
    if boundaries.first() != Some(&0) || boundaries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::out_of_range(
            "episode boundaries",
            format!("{boundaries:?}"),
            "0 = n0 < n1 < ...",
        ));
    }
    let last = *boundaries.last().unwrap_or(&0);
    if k == 0 || k > last {
        return Err(Error::out_of_range("cycle", k, format!("1..={last}")));
    }
    let end = boundaries
        .iter()
        .copied()
        .find(|&n| n >= k)
        .expect("k is within the last episode");
    Ok(m.min(end))
}

/// Expected reward of following `p` from `h` through cycle `m`, with `h`'s
/// actions taken as given even where `p` would have acted differently.
pub fn policy_value_forced(p: &dyn Policy, model: &dyn ChronologicalModel, m: usize, h: &History) -> Result<Rational> {
    let k = h.next_cycle();
    if k > m {
        return Ok(Rational::zero());
    }
    let y = p.act(h)?;
    let row = model.conditional(h, y)?;
    let mut total = Rational::zero();
    for (i, prob) in row.iter().enumerate() {
        if prob.is_zero() {
            continue;
        }
        let x = model.space().percept(i);
        let future = policy_value_forced(p, model, m, &h.with_cycle(y, x.clone()))?;
        total += (x.reward + future) * prob;
    }
    Ok(total)
}

/// `V^{p rho}_{km}(h)`: expected reward in cycles `k..=m` when `p` acts.
/// `p` must have produced every action of `h`, and `k` must be `|h| + 1`.
pub fn policy_value_iterative(
    p: &dyn Policy,
    model: &dyn ChronologicalModel,
    k: usize,
    m: usize,
    h: &History,
) -> Result<Rational> {
    if k != h.next_cycle() {
        return Err(Error::out_of_range(
            "cycle",
            k,
            format!("{} for this history", h.next_cycle()),
        ));
    }
    check_consistent(p, h)?;
    policy_value_forced(p, model, m, h)
}

/// The same value computed on the program pool directly: the prior-weighted
/// average, over environments reproducing `h`, of the reward `p` collects
/// against each. A program that times out stops contributing reward from
/// that cycle on.
pub fn policy_value_functional(
    p: &dyn Policy,
    pool: &[Program],
    k: usize,
    m: usize,
    h: &History,
    budget: RunBudget,
    space: &PerceptSpace,
) -> Result<Rational> {
    if k != h.next_cycle() {
        return Err(Error::out_of_range(
            "cycle",
            k,
            format!("{} for this history", h.next_cycle()),
        ));
    }
    let consistent = consistent_envs(pool, h, budget, space);
    if consistent.is_empty() {
        return Err(Error::UndefinedConditional(format!("no pool program reproduces {h}")));
    }
    let mut numer = Rational::zero();
    let mut denom = Rational::zero();
    for q in consistent {
        let w = crate::rational::dyadic(q.length_bits());
        let mut state = replay_env(q, h, budget, space).expect("consistent program replays");
        let mut rollout = h.clone();
        let mut reward = Rational::zero();
        for _ in k..=m {
            let y = p.act(&rollout)?;
            let step = env_cycle(q, state, y, budget, space);
            if step.timed_out {
                break;
            }
            reward += &step.percept.reward;
            rollout = rollout.with_cycle(y, step.percept);
            state = step.state;
        }
        numer += &w * reward;
        denom += w;
    }
    Ok(numer / denom)
}
