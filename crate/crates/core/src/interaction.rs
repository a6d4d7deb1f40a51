//! Shared vocabulary: action and percept alphabets, interaction histories,
//! horizon policies, and the [`Policy`] trait every agent implements.

use std::fmt;
use std::str::FromStr;

use num_traits::{Pow, Signed};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// An action `y` from a finite alphabet, by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ActionSymbol(pub usize);

impl ActionSymbol {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ActionSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A percept `x = (r, o)`: an exact reward and an observation index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Percept {
    pub reward: Rational,
    pub observation: usize,
}

impl Percept {
    pub fn new(reward: Rational, observation: usize) -> Self {
        Percept { reward, observation }
    }
}

impl fmt::Display for Percept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r:{} o:{}", rational::format(&self.reward), self.observation)
    }
}

/// The finite alphabets of one scenario.
///
/// Percepts are indexed `reward_index * num_observations + observation`, so the
/// percept order is lexicographic in (reward, observation).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerceptSpace {
    num_actions: usize,
    rewards: Vec<Rational>,
    num_observations: usize,
    r_max: Rational,
}

impl PerceptSpace {
    pub fn new(num_actions: usize, rewards: Vec<Rational>, num_observations: usize, r_max: Rational) -> Result<Self> {
        if num_actions == 0 {
            return Err(Error::out_of_range("action alphabet size", 0, ">= 1"));
        }
        if num_observations == 0 {
            return Err(Error::out_of_range("observation alphabet size", 0, ">= 1"));
        }
        if rewards.is_empty() {
            return Err(Error::InvalidModel("empty reward alphabet".into()));
        }
        if rewards.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel(
                "reward alphabet must be strictly increasing".into(),
            ));
        }
        for r in &rewards {
            if r.is_negative() || r > &r_max {
                return Err(Error::out_of_range(
                    "reward",
                    rational::format(r),
                    format!("[0, {}]", rational::format(&r_max)),
                ));
            }
        }
        Ok(PerceptSpace {
            num_actions,
            rewards,
            num_observations,
            r_max,
        })
    }

    /// Rewards `{0, 1}` with `r_max = 1`.
    pub fn with_binary_rewards(num_actions: usize, num_observations: usize) -> Self {
        PerceptSpace::new(
            num_actions,
            vec![rational::zero(), rational::one()],
            num_observations,
            rational::one(),
        )
        .expect("binary reward space is valid")
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_observations(&self) -> usize {
        self.num_observations
    }

    pub fn rewards(&self) -> &[Rational] {
        &self.rewards
    }

    pub fn r_max(&self) -> &Rational {
        &self.r_max
    }

    pub fn num_percepts(&self) -> usize {
        self.rewards.len() * self.num_observations
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionSymbol> {
        (0..self.num_actions).map(ActionSymbol)
    }

    pub fn percept(&self, index: usize) -> Percept {
        let r = index / self.num_observations;
        let o = index % self.num_observations;
        Percept::new(self.rewards[r].clone(), o)
    }

    pub fn percepts(&self) -> Vec<Percept> {
        (0..self.num_percepts()).map(|i| self.percept(i)).collect()
    }

    pub fn reward_index(&self, reward: &Rational) -> Option<usize> {
        self.rewards.binary_search(reward).ok()
    }

    pub fn index_of(&self, x: &Percept) -> Option<usize> {
        if x.observation >= self.num_observations {
            return None;
        }
        self.reward_index(&x.reward)
            .map(|r| r * self.num_observations + x.observation)
    }

    pub fn check_action(&self, y: ActionSymbol) -> Result<()> {
        if y.0 < self.num_actions {
            Ok(())
        } else {
            Err(Error::out_of_range("action", y.0, format!("< {}", self.num_actions)))
        }
    }

    pub fn check_percept(&self, x: &Percept) -> Result<()> {
        if self.index_of(x).is_some() {
            Ok(())
        } else {
            Err(Error::out_of_range("percept", x, "a member of the percept alphabet"))
        }
    }

    pub fn check_history(&self, h: &History) -> Result<()> {
        for (y, x) in h.cycles() {
            self.check_action(*y)?;
            self.check_percept(x)?;
        }
        if let Some(y) = h.pending() {
            self.check_action(y)?;
        }
        Ok(())
    }

    /// Every complete history with exactly `len` cycles, in lexicographic order.
    pub fn histories_of_len(&self, len: usize) -> Vec<History> {
        let mut out = vec![History::new()];
        for _ in 0..len {
            let mut next = Vec::with_capacity(out.len() * self.num_actions * self.num_percepts());
            for h in &out {
                for y in self.actions() {
                    for x in self.percepts() {
                        next.push(h.with_cycle(y, x));
                    }
                }
            }
            out = next;
        }
        out
    }
}

/// The alternating record `y1 x1 y2 x2 ...`, optionally ending in an action
/// that has not been answered yet.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct History {
    cycles: Vec<(ActionSymbol, Percept)>,
    pending: Option<ActionSymbol>,
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    /// Number of completed cycles.
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty() && self.pending.is_none()
    }

    /// Index `k` of the cycle that follows this history.
    pub fn next_cycle(&self) -> usize {
        self.cycles.len() + 1
    }

    pub fn cycles(&self) -> &[(ActionSymbol, Percept)] {
        &self.cycles
    }

    pub fn pending(&self) -> Option<ActionSymbol> {
        self.pending
    }

    pub fn is_complete(&self) -> bool {
        self.pending.is_none()
    }

    pub fn action(&self, i: usize) -> ActionSymbol {
        self.cycles[i].0
    }

    pub fn percept(&self, i: usize) -> &Percept {
        &self.cycles[i].1
    }

    pub fn last_percept(&self) -> Option<&Percept> {
        self.cycles.last().map(|(_, x)| x)
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionSymbol> + '_ {
        self.cycles.iter().map(|(y, _)| *y)
    }

    pub fn percepts(&self) -> impl Iterator<Item = &Percept> + '_ {
        self.cycles.iter().map(|(_, x)| x)
    }

    pub fn total_reward(&self) -> Rational {
        self.cycles.iter().map(|(_, x)| x.reward.clone()).sum()
    }

    pub fn push_action(&mut self, y: ActionSymbol) -> Result<()> {
        if let Some(p) = self.pending {
            return Err(Error::Alternation(format!("action {y} follows unanswered action {p}")));
        }
        self.pending = Some(y);
        Ok(())
    }

    pub fn push_percept(&mut self, x: Percept) -> Result<()> {
        match self.pending.take() {
            Some(y) => {
                self.cycles.push((y, x));
                Ok(())
            }
            None => Err(Error::Alternation(format!("percept {x} without a preceding action"))),
        }
    }

    /// Returns the history extended by the full cycle `y x`.
    pub fn append_cycle(&self, y: ActionSymbol, x: Percept) -> Result<History> {
        if let Some(p) = self.pending {
            return Err(Error::Alternation(format!(
                "cannot append a cycle while action {p} is pending"
            )));
        }
        Ok(self.with_cycle(y, x))
    }

    /// Like [`History::append_cycle`] for histories known to be complete.
    pub fn with_cycle(&self, y: ActionSymbol, x: Percept) -> History {
        debug_assert!(self.pending.is_none());
        let mut cycles = Vec::with_capacity(self.cycles.len() + 1);
        cycles.extend_from_slice(&self.cycles);
        cycles.push((y, x));
        History { cycles, pending: None }
    }

    pub fn with_action(&self, y: ActionSymbol) -> History {
        debug_assert!(self.pending.is_none());
        History {
            cycles: self.cycles.clone(),
            pending: Some(y),
        }
    }

    /// The first `n` complete cycles.
    pub fn prefix(&self, n: usize) -> History {
        History {
            cycles: self.cycles[..n].to_vec(),
            pending: None,
        }
    }

    /// Drops the pending action, if any.
    pub fn completed(&self) -> History {
        History {
            cycles: self.cycles.clone(),
            pending: None,
        }
    }

    /// Canonical whitespace-separated encoding: `y:<int> r:<p>/<q> o:<int>`.
    pub fn to_text(&self) -> String {
        let mut parts = Vec::with_capacity(3 * self.cycles.len() + 1);
        for (y, x) in &self.cycles {
            parts.push(format!("y:{y}"));
            parts.push(format!("r:{}", rational::format(&x.reward)));
            parts.push(format!("o:{}", x.observation));
        }
        if let Some(y) = self.pending {
            parts.push(format!("y:{y}"));
        }
        parts.join(" ")
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for History {
    type Err = Error;

    fn from_str(s: &str) -> Result<History> {
        let mut h = History::new();
        let mut reward: Option<Rational> = None;
        for token in s.split_whitespace() {
            let (tag, value) = token
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("malformed history token {token:?}")))?;
            match tag {
                "y" => {
                    if reward.is_some() {
                        return Err(Error::Alternation(format!("action {token} inside a percept")));
                    }
                    let y = value
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad action {value:?}")))?;
                    h.push_action(ActionSymbol(y))?;
                }
                "r" => {
                    if h.pending.is_none() || reward.is_some() {
                        return Err(Error::Alternation(format!("unexpected reward {token}")));
                    }
                    let r = rational::parse(value)?;
                    if r.is_negative() {
                        return Err(Error::out_of_range("reward", value, ">= 0"));
                    }
                    reward = Some(r);
                }
                "o" => {
                    let r = reward
                        .take()
                        .ok_or_else(|| Error::Alternation(format!("observation {token} before reward")))?;
                    let o = value
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad observation {value:?}")))?;
                    h.push_percept(Percept::new(r, o))?;
                }
                _ => return Err(Error::Parse(format!("unknown history token {token:?}"))),
            }
        }
        if reward.is_some() {
            return Err(Error::Parse("history ends inside a percept".into()));
        }
        Ok(h)
    }
}

/// How far ahead the agent plans in each cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HorizonPolicy {
    /// `m_k = m`.
    Fixed(usize),
    /// `m_k = k + h - 1`.
    Moving(usize),
    /// `m_k = k + ceil(beta * k) - 1`.
    Proportional(Rational),
    /// Rewards are weighted by `gamma^k`; the horizon is moving with length `cap`.
    GeometricDiscount { gamma: Rational, cap: usize },
}

impl HorizonPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            HorizonPolicy::Fixed(0) => Err(Error::out_of_range("fixed horizon", 0, ">= 1")),
            HorizonPolicy::Moving(0) => Err(Error::out_of_range("moving horizon", 0, ">= 1")),
            HorizonPolicy::Proportional(beta) if !beta.is_positive() => Err(Error::out_of_range(
                "proportional horizon factor",
                rational::format(beta),
                "> 0",
            )),
            HorizonPolicy::GeometricDiscount { gamma, cap } => {
                if !gamma.is_positive() || gamma >= &rational::one() {
                    Err(Error::out_of_range("discount", rational::format(gamma), "(0, 1)"))
                } else if *cap == 0 {
                    Err(Error::out_of_range("discount horizon cap", 0, ">= 1"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// The last cycle `m_k` counted when planning in cycle `k`.
    pub fn horizon_end(&self, k: usize, lifetime: usize) -> Result<usize> {
        self.validate()?;
        if k == 0 || k > lifetime {
            return Err(Error::out_of_range("cycle", k, format!("1..={lifetime}")));
        }
        let end = match self {
            HorizonPolicy::Fixed(m) => (*m).max(k),
            HorizonPolicy::Moving(h) => k + h - 1,
            HorizonPolicy::Proportional(beta) => {
                let extra = rational::ceil_nonneg(&(beta * rational::int(k as i64)));
                k + extra as usize - 1
            }
            HorizonPolicy::GeometricDiscount { cap, .. } => k + cap - 1,
        };
        Ok(end.min(lifetime).max(k))
    }

    /// The reward credited in cycle `k`: `r * gamma^k` under discounting,
    /// `r` otherwise.
    pub fn discounted_reward(&self, k: usize, r: &Rational) -> Rational {
        match self {
            HorizonPolicy::GeometricDiscount { gamma, .. } => {
                if k == 0 {
                    r.clone()
                } else {
                    r * Pow::pow(gamma, k as u32)
                }
            }
            _ => r.clone(),
        }
    }

    pub fn is_discounted(&self) -> bool {
        matches!(self, HorizonPolicy::GeometricDiscount { .. })
    }
}

impl fmt::Display for HorizonPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HorizonPolicy::Fixed(m) => write!(f, "fixed:{m}"),
            HorizonPolicy::Moving(h) => write!(f, "moving:{h}"),
            HorizonPolicy::Proportional(b) => write!(f, "proportional:{}", rational::format(b)),
            HorizonPolicy::GeometricDiscount { gamma, cap } => {
                write!(f, "discount:{}:{cap}", rational::format(gamma))
            }
        }
    }
}

impl FromStr for HorizonPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let int = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Parse(format!("bad horizon parameter {v:?}")))
        };
        let policy = match parts.as_slice() {
            ["fixed", m] => HorizonPolicy::Fixed(int(m)?),
            ["moving", h] => HorizonPolicy::Moving(int(h)?),
            ["proportional", b] => HorizonPolicy::Proportional(rational::parse(b)?),
            ["discount", g, cap] => HorizonPolicy::GeometricDiscount {
                gamma: rational::parse(g)?,
                cap: int(cap)?,
            },
            _ => return Err(Error::Parse(format!("unknown horizon policy {s:?}"))),
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// A deterministic agent: a function from complete histories to actions.
///
/// Policies are evaluated on hypothetical histories, so they must not depend on
/// anything but the history they are given.
pub trait Policy {
    fn act(&self, history: &History) -> Result<ActionSymbol>;
}

impl<P: Policy + ?Sized> Policy for &P {
    fn act(&self, history: &History) -> Result<ActionSymbol> {
        (**self).act(history)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn act(&self, history: &History) -> Result<ActionSymbol> {
        (**self).act(history)
    }
}

/// Always outputs the same action.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy(pub ActionSymbol);

impl Policy for ConstantPolicy {
    fn act(&self, _: &History) -> Result<ActionSymbol> {
        Ok(self.0)
    }
}

/// A policy backed by a closure.
pub struct FnPolicy<F>(pub F);

impl<F> Policy for FnPolicy<F>
where
    F: Fn(&History) -> ActionSymbol,
{
    fn act(&self, history: &History) -> Result<ActionSymbol> {
        Ok((self.0)(history))
    }
}

/// Checks that `policy` would have produced every action recorded in `h`.
pub fn check_consistent(policy: &dyn Policy, h: &History) -> Result<()> {
    for i in 0..h.len() {
        if policy.act(&h.prefix(i))? != h.action(i) {
            return Err(Error::InconsistentPolicy { cycle: i + 1 });
        }
    }
    Ok(())
}
