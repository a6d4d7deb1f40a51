//! Chronological (semi)measures over percept sequences given action sequences.
//!
//! A model answers one question: given a complete history `h` and the next
//! action `y`, what is `rho(h y x) / rho(h)` for every percept `x`? The joint
//! `rho(h)` follows from the chain rule unless a model overrides it; a mixture
//! does, because its joint at the empty history is its total prior weight.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::interaction::{ActionSymbol, History, Percept, PerceptSpace, Policy};
use crate::rational::{self, Rational};
use crate::vm::{env_cycle, replay_env, Program, RunBudget};

pub trait ChronologicalModel: Send + Sync {
    fn space(&self) -> &PerceptSpace;

    /// `rho(h y x) / rho(h)` for every percept index `x`. Rows may sum to less
    /// than one for semimeasures.
    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>>;

    /// `rho(y x_{1:n})` for a complete history.
    fn joint(&self, h: &History) -> Result<Rational> {
        chain_joint(self, h)
    }

    fn label(&self) -> String {
        "model".to_string()
    }
}

/// Chain rule: the product of the conditionals along `h`.
pub fn chain_joint<M: ChronologicalModel + ?Sized>(model: &M, h: &History) -> Result<Rational> {
    if !h.is_complete() {
        return Err(Error::Alternation("joint of a history with a pending action".into()));
    }
    let space = model.space();
    let mut p = Rational::one();
    for i in 0..h.len() {
        let Some(x) = space.index_of(h.percept(i)) else {
            return Ok(Rational::zero());
        };
        let row = model.conditional(&h.prefix(i), h.action(i))?;
        p *= &row[x];
        if p.is_zero() {
            break;
        }
    }
    Ok(p)
}

impl<M: ChronologicalModel + ?Sized> ChronologicalModel for Arc<M> {
    fn space(&self) -> &PerceptSpace {
        (**self).space()
    }
    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        (**self).conditional(h, y)
    }
    fn joint(&self, h: &History) -> Result<Rational> {
        (**self).joint(h)
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

impl<M: ChronologicalModel + ?Sized> ChronologicalModel for &M {
    fn space(&self) -> &PerceptSpace {
        (**self).space()
    }
    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        (**self).conditional(h, y)
    }
    fn joint(&self, h: &History) -> Result<Rational> {
        (**self).joint(h)
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

impl<M: ChronologicalModel + ?Sized> ChronologicalModel for Box<M> {
    fn space(&self) -> &PerceptSpace {
        (**self).space()
    }
    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        (**self).conditional(h, y)
    }
    fn joint(&self, h: &History) -> Result<Rational> {
        (**self).joint(h)
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

pub fn joint_prob(model: &dyn ChronologicalModel, h: &History) -> Result<Rational> {
    model.joint(h)
}

/// `rho(h y x) / rho(h)`; undefined when `rho(h) = 0`.
pub fn cond_prob(model: &dyn ChronologicalModel, h: &History, y: ActionSymbol, x: &Percept) -> Result<Rational> {
    if model.joint(h)?.is_zero() {
        return Err(Error::UndefinedConditional(format!("history {h} has probability 0")));
    }
    let idx = model
        .space()
        .index_of(x)
        .ok_or_else(|| Error::out_of_range("percept", x, "the percept alphabet"))?;
    Ok(model.conditional(h, y)?.swap_remove(idx))
}

/// `1 - sum_x rho(h y x) / rho(h)`: the mass a semimeasure leaves unassigned.
pub fn evidence_gap(model: &dyn ChronologicalModel, h: &History, y: ActionSymbol) -> Result<Rational> {
    let row = model.conditional(h, y)?;
    Ok(Rational::one() - row.iter().sum::<Rational>())
}

/// The conditional rescaled to sum to one; for display only.
pub fn normalized_conditional(model: &dyn ChronologicalModel, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
    let row = model.conditional(h, y)?;
    let total: Rational = row.iter().sum();
    if total.is_zero() {
        return Err(Error::UndefinedConditional(format!("no mass after {h} y:{y}")));
    }
    Ok(row.into_iter().map(|p| p / &total).collect())
}

/// True iff `sum_x rho(h y x)` does not depend on `y`, for every context
/// with fewer than `depth` completed cycles.
pub fn check_chronological(model: &dyn ChronologicalModel, depth: usize) -> Result<bool> {
    let space = model.space();
    for len in 0..depth {
        for h in space.histories_of_len(len) {
            if model.joint(&h)?.is_zero() {
                continue;
            }
            let mut first: Option<Rational> = None;
            for y in space.actions() {
                let mut total = Rational::zero();
                for x in space.percepts() {
                    total += model.joint(&h.with_cycle(y, x))?;
                }
                match &first {
                    None => first = Some(total),
                    Some(f) if *f != total => return Ok(false),
                    Some(_) => {}
                }
            }
        }
    }
    Ok(true)
}

/// Explicit conditional tables for every context shorter than `depth`;
/// uniform elsewhere.
#[derive(Clone, Debug)]
pub struct TabularModel {
    space: PerceptSpace,
    depth: usize,
    rows: HashMap<History, Vec<Rational>>,
    proper: bool,
    label: String,
}

impl TabularModel {
    /// A proper measure: every row must sum to exactly one.
    pub fn new(space: PerceptSpace, depth: usize, rows: Vec<(History, Vec<Rational>)>) -> Result<Self> {
        Self::build(space, depth, rows, true)
    }

    /// A semimeasure: rows may sum to less than one.
    pub fn semimeasure(space: PerceptSpace, depth: usize, rows: Vec<(History, Vec<Rational>)>) -> Result<Self> {
        Self::build(space, depth, rows, false)
    }

    fn build(space: PerceptSpace, depth: usize, rows: Vec<(History, Vec<Rational>)>, proper: bool) -> Result<Self> {
        let mut table = HashMap::with_capacity(rows.len());
        for (ctx, row) in rows {
            let y = ctx
                .pending()
                .ok_or_else(|| Error::InvalidModel(format!("context {ctx} lacks the pending action")))?;
            space.check_history(&ctx)?;
            space.check_action(y)?;
            if ctx.len() >= depth {
                return Err(Error::InvalidModel(format!(
                    "context {ctx} deeper than table depth {depth}"
                )));
            }
            if row.len() != space.num_percepts() {
                return Err(Error::InvalidModel(format!(
                    "row for {ctx} has {} entries, expected {}",
                    row.len(),
                    space.num_percepts()
                )));
            }
            if row.iter().any(|p| p.is_negative()) {
                return Err(Error::InvalidModel(format!("negative probability in row for {ctx}")));
            }
            let total: Rational = row.iter().sum();
            if proper && !total.is_one() {
                return Err(Error::InvalidModel(format!(
                    "row for {ctx} sums to {}",
                    rational::format(&total)
                )));
            }
            if total > Rational::one() {
                return Err(Error::InvalidModel(format!("row for {ctx} exceeds one")));
            }
            if table.insert(ctx.clone(), row).is_some() {
                return Err(Error::InvalidModel(format!("duplicate context {ctx}")));
            }
        }
        Ok(TabularModel {
            space,
            depth,
            rows: table,
            proper,
            label: "tabular".into(),
        })
    }

    /// A proper measure with a random row for every context shorter than `depth`.
    /// Rows use small integer weights, so some percepts get probability zero.
    pub fn random<R: Rng>(space: PerceptSpace, depth: usize, rng: &mut R) -> Self {
        let mut rows = Vec::new();
        for len in 0..depth {
            for h in space.histories_of_len(len) {
                for y in space.actions() {
                    let mut weights: Vec<i64> = (0..space.num_percepts()).map(|_| rng.gen_range(0..=3)).collect();
                    if weights.iter().all(|&w| w == 0) {
                        let i = rng.gen_range(0..weights.len());
                        weights[i] = 1;
                    }
                    let total: i64 = weights.iter().sum();
                    rows.push((
                        h.with_action(y),
                        weights.iter().map(|&w| rational::ratio(w, total)).collect(),
                    ));
                }
            }
        }
        TabularModel::new(space, depth, rows).expect("random rows are normalised")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_proper(&self) -> bool {
        self.proper
    }

    /// Parses the plain-text table format:
    ///
    /// ```text
    /// # comment
    /// actions 2
    /// rewards 0 1
    /// observations 1
    /// rmax 1
    /// depth 1
    /// semimeasure            (optional: allow rows summing below one)
    /// row y:0 | 1/4 3/4
    /// row y:1 | 1/2 1/2
    /// ```
    ///
    /// A row line holds a context (a history ending in its pending action) and
    /// one probability per percept, in percept-index order.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut actions = None;
        let mut rewards = None;
        let mut observations = None;
        let mut r_max = None;
        let mut depth = None;
        let mut proper = true;
        let mut rows = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            let count = |v: &str| -> Result<usize> {
                v.parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad count {v:?}", n + 1)))
            };
            match key {
                "actions" => actions = Some(count(rest)?),
                "observations" => observations = Some(count(rest)?),
                "depth" => depth = Some(count(rest)?),
                "rmax" => r_max = Some(rational::parse(rest)?),
                "rewards" => {
                    rewards = Some(
                        rest.split_whitespace()
                            .map(rational::parse)
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "semimeasure" => proper = false,
                "row" => {
                    let (ctx, probs) = rest
                        .split_once('|')
                        .ok_or_else(|| Error::Parse(format!("line {}: row needs '|'", n + 1)))?;
                    let ctx: History = ctx.parse()?;
                    let probs = probs
                        .split_whitespace()
                        .map(rational::parse)
                        .collect::<Result<Vec<_>>>()?;
                    rows.push((ctx, probs));
                }
                other => return Err(Error::Parse(format!("line {}: unknown key {other:?}", n + 1))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("missing key {k:?}"));
        let rewards = rewards.ok_or_else(|| missing("rewards"))?;
        let r_max = match r_max {
            Some(r) => r,
            None => rewards.last().cloned().unwrap_or_else(Rational::one),
        };
        let space = PerceptSpace::new(
            actions.ok_or_else(|| missing("actions"))?,
            rewards,
            observations.unwrap_or(1),
            r_max,
        )?;
        Self::build(space, depth.ok_or_else(|| missing("depth"))?, rows, proper)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.space;
        let _ = writeln!(out, "actions {}", s.num_actions());
        let rewards: Vec<String> = s.rewards().iter().map(rational::format).collect();
        let _ = writeln!(out, "rewards {}", rewards.join(" "));
        let _ = writeln!(out, "observations {}", s.num_observations());
        let _ = writeln!(out, "rmax {}", rational::format(s.r_max()));
        let _ = writeln!(out, "depth {}", self.depth);
        if !self.proper {
            let _ = writeln!(out, "semimeasure");
        }
        let mut rows: Vec<(&History, &Vec<Rational>)> = self.rows.iter().collect();
        rows.sort_by_key(|(h, _)| h.to_text());
        for (ctx, row) in rows {
            let probs: Vec<String> = row.iter().map(rational::format).collect();
            let _ = writeln!(out, "row {} | {}", ctx, probs.join(" "));
        }
        out
    }
}

impl ChronologicalModel for TabularModel {
    fn space(&self) -> &PerceptSpace {
        &self.space
    }

    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        self.space.check_action(y)?;
        if let Some(row) = self.rows.get(&h.with_action(y)) {
            return Ok(row.clone());
        }
        let n = self.space.num_percepts();
        Ok(vec![rational::ratio(1, n as i64); n])
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// The deterministic measure induced by an environment program.
#[derive(Clone, Debug)]
pub struct ProgramModel {
    pub program: Program,
    pub budget: RunBudget,
    space: PerceptSpace,
}

impl ProgramModel {
    pub fn new(program: Program, budget: RunBudget, space: PerceptSpace) -> Self {
        ProgramModel { program, budget, space }
    }

    /// The percept index the program emits after `h` on action `y`, if it reproduces `h`.
    fn next_percept(&self, h: &History, y: ActionSymbol) -> Option<usize> {
        let state = replay_env(&self.program, h, self.budget, &self.space)?;
        let step = env_cycle(&self.program, state, y, self.budget, &self.space);
        if step.timed_out {
            return None;
        }
        self.space.index_of(&step.percept)
    }
}

impl ChronologicalModel for ProgramModel {
    fn space(&self) -> &PerceptSpace {
        &self.space
    }

    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        if replay_env(&self.program, h, self.budget, &self.space).is_none() {
            return Err(Error::UndefinedConditional(format!(
                "program {} does not produce {h}",
                self.program.to_hex()
            )));
        }
        // A timeout in this cycle leaves the whole row empty.
        let mut row = vec![Rational::zero(); self.space.num_percepts()];
        if let Some(idx) = self.next_percept(h, y) {
            row[idx] = Rational::one();
        }
        Ok(row)
    }

    fn joint(&self, h: &History) -> Result<Rational> {
        let consistent = replay_env(&self.program, h, self.budget, &self.space).is_some();
        Ok(if consistent { Rational::one() } else { Rational::zero() })
    }

    fn label(&self) -> String {
        format!("program:{}", self.program.to_hex())
    }
}

/// One mixture component.
#[derive(Clone)]
pub enum Component {
    /// A deterministic environment program, replayed on the VM.
    Program(Program),
    /// Any chronological model.
    Model(Arc<dyn ChronologicalModel>),
}

impl Component {
    pub fn label(&self) -> String {
        match self {
            Component::Program(p) => format!("program:{}", p.to_hex()),
            Component::Model(m) => m.label(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixtureMode {
    /// Components are programs weighted `2^-length`.
    ProgramClass,
    /// Components are arbitrary (semi)measures with given weights.
    SemimeasureClass,
}

/// `xi(h) = sum_i w_i rho_i(h)`.
#[derive(Clone)]
pub struct MixtureModel {
    space: PerceptSpace,
    budget: RunBudget,
    components: Vec<(Rational, Component)>,
    mode: MixtureMode,
}

/// The program-class mixture: every program in `pool` weighted `2^-length`.
pub fn build_mixture(pool: &[Program], budget: RunBudget, space: &PerceptSpace) -> Result<MixtureModel> {
    if pool.is_empty() {
        return Err(Error::InvalidModel("empty program pool".into()));
    }
    let components = pool
        .iter()
        .map(|p| (rational::dyadic(p.length_bits()), Component::Program(p.clone())))
        .collect();
    let m = MixtureModel {
        space: space.clone(),
        budget,
        components,
        mode: MixtureMode::ProgramClass,
    };
    if m.total_weight() > Rational::one() {
        return Err(Error::InvalidModel(
            "pool violates Kraft's inequality; is it prefix-free?".into(),
        ));
    }
    Ok(m)
}

impl MixtureModel {
    /// A mixture over arbitrary models sharing one percept space.
    pub fn from_models(space: PerceptSpace, components: Vec<(Rational, Arc<dyn ChronologicalModel>)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidModel("empty mixture".into()));
        }
        for (w, m) in &components {
            if w.is_negative() {
                return Err(Error::InvalidModel("negative mixture weight".into()));
            }
            if m.space() != &space {
                return Err(Error::InvalidModel(format!(
                    "component {} has a different percept space",
                    m.label()
                )));
            }
        }
        let m = MixtureModel {
            space,
            budget: RunBudget { steps_per_cycle: 1 },
            components: components.into_iter().map(|(w, m)| (w, Component::Model(m))).collect(),
            mode: MixtureMode::SemimeasureClass,
        };
        if m.total_weight() > Rational::one() {
            return Err(Error::InvalidModel("mixture weights sum above one".into()));
        }
        Ok(m)
    }

    /// Equal weights `1/n` over `models`.
    pub fn uniform(space: PerceptSpace, models: Vec<Arc<dyn ChronologicalModel>>) -> Result<Self> {
        let n = models.len() as i64;
        Self::from_models(
            space,
            models.into_iter().map(|m| (rational::ratio(1, n.max(1)), m)).collect(),
        )
    }

    pub fn mode(&self) -> MixtureMode {
        self.mode
    }

    pub fn components(&self) -> &[(Rational, Component)] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn total_weight(&self) -> Rational {
        self.components.iter().map(|(w, _)| w.clone()).sum()
    }

    pub fn budget(&self) -> RunBudget {
        self.budget
    }

    /// `rho_i(h)` for component `i`.
    pub fn component_joint(&self, i: usize, h: &History) -> Result<Rational> {
        match &self.components[i].1 {
            Component::Program(p) => Ok(if replay_env(p, h, self.budget, &self.space).is_some() {
                Rational::one()
            } else {
                Rational::zero()
            }),
            Component::Model(m) => m.joint(h),
        }
    }

    /// Unnormalised next-percept masses `sum_i w_i rho_i(h y x)`.
    fn next_masses(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        let mut masses = vec![Rational::zero(); self.space.num_percepts()];
        for (w, c) in &self.components {
            match c {
                Component::Program(p) => {
                    if let Some(state) = replay_env(p, h, self.budget, &self.space) {
                        let step = env_cycle(p, state, y, self.budget, &self.space);
                        if step.timed_out {
                            continue;
                        }
                        if let Some(idx) = self.space.index_of(&step.percept) {
                            masses[idx] += w;
                        }
                    }
                }
                Component::Model(m) => {
                    let jw = w * m.joint(h)?;
                    if jw.is_zero() {
                        continue;
                    }
                    for (mass, p) in masses.iter_mut().zip(m.conditional(h, y)?) {
                        *mass += &jw * p;
                    }
                }
            }
        }
        Ok(masses)
    }
}

impl ChronologicalModel for MixtureModel {
    fn space(&self) -> &PerceptSpace {
        &self.space
    }

    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        self.space.check_action(y)?;
        let total = self.joint(h)?;
        if total.is_zero() {
            return Err(Error::UndefinedConditional(format!("mixture assigns 0 to {h}")));
        }
        Ok(self.next_masses(h, y)?.into_iter().map(|m| m / &total).collect())
    }

    fn joint(&self, h: &History) -> Result<Rational> {
        let mut total = Rational::zero();
        for (i, (w, _)) in self.components.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let j = self.component_joint(i, h)?;
            if !j.is_zero() {
                total += w * j;
            }
        }
        Ok(total)
    }

    fn label(&self) -> String {
        format!("mixture[{}]", self.components.len())
    }
}

/// Per-component posterior mass `w_i rho_i(h)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PosteriorState {
    pub masses: Vec<Rational>,
}

impl PosteriorState {
    pub fn total(&self) -> Rational {
        self.masses.iter().sum()
    }

    /// Index of the heaviest component; the lowest index wins ties.
    pub fn top_component(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, m) in self.masses.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            if best.is_none_or(|b| m > &self.masses[b]) {
                best = Some(i);
            }
        }
        best
    }

    pub fn normalized(&self) -> Vec<Rational> {
        let total = self.total();
        self.masses.iter().map(|m| m / &total).collect()
    }

    /// CSV with columns `component,label,weight,mass`.
    pub fn to_csv(&self, mixture: &MixtureModel) -> String {
        let mut out = String::from("component,label,weight,mass\n");
        for (i, ((w, c), m)) in mixture.components().iter().zip(&self.masses).enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", c.label(), rational::format(w), rational::format(m));
        }
        out
    }
}

pub fn posterior(m: &MixtureModel, h: &History) -> Result<PosteriorState> {
    let masses = (0..m.len())
        .map(|i| Ok(&m.components()[i].0 * m.component_joint(i, h)?))
        .collect::<Result<Vec<_>>>()?;
    let state = PosteriorState { masses };
    if state.total().is_zero() {
        return Err(Error::UndefinedConditional(format!("mixture assigns 0 to {h}")));
    }
    Ok(state)
}

/// Per-cycle squared prediction gaps between a mixture and the true measure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SqDistanceTrace {
    /// `per_step[t-1] = sum_{x_<t} mu(x_<t) sum_x (xi(x|..) - mu(x|..))^2`.
    pub per_step: Vec<Rational>,
}

impl SqDistanceTrace {
    pub fn total(&self) -> Rational {
        self.per_step.iter().sum()
    }
}

/// Exact expectation, under `mu` with actions from `actions`, of the squared
/// Euclidean gap between the predictive distributions of `xi` and `mu`,
/// summed over cycles `1..=n` and over all next percepts.
pub fn sq_distance_trace(
    xi: &dyn ChronologicalModel,
    mu: &dyn ChronologicalModel,
    actions: &dyn Policy,
    n: usize,
) -> Result<SqDistanceTrace> {
    fn walk(
        xi: &dyn ChronologicalModel,
        mu: &dyn ChronologicalModel,
        actions: &dyn Policy,
        h: &History,
        weight: &Rational,
        n: usize,
        per_step: &mut [Rational],
    ) -> Result<()> {
        let t = h.len();
        if t == n {
            return Ok(());
        }
        let y = actions.act(h)?;
        let mu_row = mu.conditional(h, y)?;
        let xi_row = match xi.conditional(h, y) {
            Ok(row) => row,
            Err(Error::UndefinedConditional(_)) => vec![Rational::zero(); mu_row.len()],
            Err(e) => return Err(e),
        };
        let gap: Rational = xi_row
            .iter()
            .zip(&mu_row)
            .map(|(a, b)| {
                let d = a - b;
                &d * &d
            })
            .sum();
        per_step[t] += weight * gap;
        for (i, p) in mu_row.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let next = h.with_cycle(y, mu.space().percept(i));
            walk(xi, mu, actions, &next, &(weight * p), n, per_step)?;
        }
        Ok(())
    }
    let mut per_step = vec![Rational::zero(); n];
    walk(xi, mu, actions, &History::new(), &Rational::one(), n, &mut per_step)?;
    Ok(SqDistanceTrace { per_step })
}

pub fn sq_distance_sum(
    xi: &dyn ChronologicalModel,
    mu: &dyn ChronologicalModel,
    actions: &dyn Policy,
    n: usize,
) -> Result<Rational> {
    Ok(sq_distance_trace(xi, mu, actions, n)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::ConstantPolicy;
    use crate::rational::{int, ratio};
    use crate::vm::enumerate_programs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coin_space() -> PerceptSpace {
        PerceptSpace::with_binary_rewards(2, 1)
    }

    fn budget() -> RunBudget {
        RunBudget::new(16).unwrap()
    }

    fn h(s: &str) -> History {
        s.parse().unwrap()
    }

    fn two_cycle_table() -> TabularModel {
        TabularModel::new(
            coin_space(),
            2,
            vec![
                (h("y:0"), vec![ratio(3, 10), ratio(7, 10)]),
                (h("y:1"), vec![ratio(1, 2), ratio(1, 2)]),
                (h("y:0 r:1/1 o:0 y:1"), vec![ratio(1, 4), ratio(3, 4)]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn empty_history_has_probability_one() {
        assert_eq!(joint_prob(&two_cycle_table(), &History::new()).unwrap(), int(1));
    }

    #[test]
    fn deterministic_program_joint_is_zero_or_one() {
        let q = ProgramModel::new(Program::from_asm("READ; END").unwrap(), budget(), coin_space());
        assert_eq!(q.joint(&h("y:1 r:1/1 o:0 y:0 r:0/1 o:0")).unwrap(), int(1));
        assert_eq!(q.joint(&h("y:1 r:0/1 o:0")).unwrap(), int(0));
    }

    #[test]
    fn two_cycle_joint_is_product_of_entries() {
        let t = two_cycle_table();
        // 7/10 * 3/4
        assert_eq!(t.joint(&h("y:0 r:1/1 o:0 y:1 r:1/1 o:0")).unwrap(), ratio(21, 40));
    }

    #[test]
    fn conditional_echoes_table_entry() {
        let t = two_cycle_table();
        let x = Percept::new(int(1), 0);
        assert_eq!(
            cond_prob(&t, &History::new(), ActionSymbol(0), &x).unwrap(),
            ratio(7, 10)
        );
        let row_sum: Rational = t.conditional(&History::new(), ActionSymbol(0)).unwrap().iter().sum();
        assert_eq!(row_sum, int(1));
    }

    #[test]
    fn conditioning_on_impossible_history_is_an_error() {
        let q = ProgramModel::new(Program::from_asm("END").unwrap(), budget(), coin_space());
        let x = Percept::new(int(0), 0);
        let impossible = h("y:0 r:1/1 o:0");
        assert!(matches!(
            cond_prob(&q, &impossible, ActionSymbol(0), &x),
            Err(Error::UndefinedConditional(_))
        ));
    }

    #[test]
    fn mixture_of_two_disagreeing_programs() {
        // "READ; END" (6 bits, weight 1/64) copies the action into the reward;
        // "LOAD 1; END" (8 bits, weight 1/256) always rewards. Under action 0
        // they disagree in cycle 1: 1/64 vs 1/256 of 5/256.
        let space = coin_space();
        let copy = Program::from_asm("READ; END").unwrap();
        let always = Program::from_asm("LOAD 1; END").unwrap();
        let m = build_mixture(&[copy, always], budget(), &space).unwrap();
        let row = m.conditional(&History::new(), ActionSymbol(0)).unwrap();
        assert_eq!(row, vec![ratio(4, 5), ratio(1, 5)]);

        // Same shape as weights 1/2 and 1/4: conditionals 2/3 and 1/3.
        let a: Arc<dyn ChronologicalModel> = Arc::new(ProgramModel::new(
            Program::from_asm("END").unwrap(),
            budget(),
            space.clone(),
        ));
        let b: Arc<dyn ChronologicalModel> = Arc::new(ProgramModel::new(
            Program::from_asm("LOAD 1; END").unwrap(),
            budget(),
            space.clone(),
        ));
        let m = MixtureModel::from_models(space, vec![(ratio(1, 2), a), (ratio(1, 4), b)]).unwrap();
        let row = m.conditional(&History::new(), ActionSymbol(0)).unwrap();
        assert_eq!(row, vec![ratio(2, 3), ratio(1, 3)]);
    }

    #[test]
    fn tabular_models_are_chronological() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = TabularModel::random(PerceptSpace::with_binary_rewards(2, 2), 3, &mut rng);
        assert!(check_chronological(&t, 3).unwrap());
    }

    #[test]
    fn action_dependent_deficit_is_not_chronological() {
        let t = TabularModel::semimeasure(
            coin_space(),
            1,
            vec![
                (h("y:0"), vec![ratio(1, 2), ratio(1, 2)]),
                (h("y:1"), vec![ratio(1, 4), ratio(1, 4)]),
            ],
        )
        .unwrap();
        assert!(!check_chronological(&t, 1).unwrap());
        assert_eq!(evidence_gap(&t, &History::new(), ActionSymbol(1)).unwrap(), ratio(1, 2));
        assert_eq!(
            normalized_conditional(&t, &History::new(), ActionSymbol(1)).unwrap(),
            vec![ratio(1, 2), ratio(1, 2)]
        );
    }

    #[test]
    fn program_mixture_is_chronological() {
        let space = PerceptSpace::with_binary_rewards(2, 2);
        let m = build_mixture(&enumerate_programs(8), budget(), &space).unwrap();
        assert!(check_chronological(&m, 3).unwrap());
    }

    #[test]
    fn proper_table_rejects_unnormalised_rows() {
        let err = TabularModel::new(coin_space(), 1, vec![(h("y:0"), vec![ratio(1, 2), ratio(1, 4)])]);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
        let deep = TabularModel::new(
            coin_space(),
            1,
            vec![(h("y:0 r:0/1 o:0 y:0"), vec![ratio(1, 2), ratio(1, 2)])],
        );
        assert!(deep.is_err());
        assert!(build_mixture(&[], budget(), &coin_space()).is_err());
    }

    #[test]
    fn table_text_round_trip() {
        let t = two_cycle_table();
        let parsed = TabularModel::from_text(&t.to_text()).unwrap();
        assert_eq!(parsed.to_text(), t.to_text());
        let hist = h("y:0 r:1/1 o:0 y:1 r:0/1 o:0");
        assert_eq!(parsed.joint(&hist).unwrap(), t.joint(&hist).unwrap());
        assert!(TabularModel::from_text("actions 2\nrow y:0 | 1/2 1/2").is_err());
    }

    #[test]
    fn singleton_mixture_reproduces_the_program() {
        let space = coin_space();
        let q = Program::from_asm("READ; END").unwrap();
        let m = build_mixture(std::slice::from_ref(&q), budget(), &space).unwrap();
        let single = ProgramModel::new(q.clone(), budget(), space);
        for hist in [h("y:1 r:1/1 o:0"), h("y:1 r:0/1 o:0"), h("y:0 r:0/1 o:0 y:1 r:1/1 o:0")] {
            assert_eq!(
                m.joint(&hist).unwrap(),
                rational::dyadic(q.length_bits()) * single.joint(&hist).unwrap()
            );
        }
    }

    #[test]
    fn posterior_of_truth_keeps_its_prior_weight() {
        let space = PerceptSpace::with_binary_rewards(2, 2);
        let pool = enumerate_programs(8);
        let m = build_mixture(&pool, budget(), &space).unwrap();
        let truth = ProgramModel::new(Program::from_asm("INC; END").unwrap(), budget(), space.clone());
        let mut hist = History::new();
        for y in [1, 0, 0] {
            let row = truth.conditional(&hist, ActionSymbol(y)).unwrap();
            let x = row.iter().position(|p| p.is_one()).unwrap();
            hist = hist.with_cycle(ActionSymbol(y), space.percept(x));
        }
        let post = posterior(&m, &hist).unwrap();
        let i = pool.iter().position(|p| p == &truth.program).unwrap();
        assert_eq!(post.masses[i], rational::dyadic(truth.program.length_bits()));
        assert_eq!(post.total(), m.joint(&hist).unwrap());
        for (j, q) in pool.iter().enumerate() {
            if replay_env(q, &hist, budget(), &space).is_none() {
                assert!(post.masses[j].is_zero());
            }
        }
        // Posterior predictive equals the mixture conditional.
        let y = ActionSymbol(1);
        let row = m.conditional(&hist, y).unwrap();
        for (x, p) in row.iter().enumerate() {
            let mut mass = Rational::zero();
            for (j, q) in pool.iter().enumerate() {
                if post.masses[j].is_zero() {
                    continue;
                }
                let s = replay_env(q, &hist, budget(), &space).unwrap();
                let step = env_cycle(q, s, y, budget(), &space);
                if space.index_of(&step.percept) == Some(x) {
                    mass += &post.masses[j];
                }
            }
            assert_eq!(*p, mass / post.total());
        }
        assert!(post.to_csv(&m).starts_with("component,label,weight,mass\n"));
    }

    #[test]
    fn sq_distance_of_own_singleton_is_zero() {
        let space = coin_space();
        let q = Program::from_asm("INC; END").unwrap();
        let m = build_mixture(std::slice::from_ref(&q), budget(), &space).unwrap();
        let mu = ProgramModel::new(q, budget(), space);
        assert_eq!(
            sq_distance_sum(&m, &mu, &ConstantPolicy(ActionSymbol(0)), 6).unwrap(),
            int(0)
        );
    }

    #[test]
    fn sq_distance_is_monotone_in_n() {
        let space = PerceptSpace::with_binary_rewards(2, 2);
        let m = build_mixture(&enumerate_programs(8), budget(), &space).unwrap();
        let mu = ProgramModel::new(Program::from_asm("INC; END").unwrap(), budget(), space);
        let trace = sq_distance_trace(&m, &mu, &ConstantPolicy(ActionSymbol(1)), 8).unwrap();
        assert!(trace.per_step.iter().all(|s| !s.is_negative()));
        let mut prev = Rational::zero();
        for n in 1..=8 {
            let s = sq_distance_sum(&m, &mu, &ConstantPolicy(ActionSymbol(1)), n).unwrap();
            assert!(s >= prev);
            prev = s;
        }
        assert_eq!(prev, trace.total());
    }
}
