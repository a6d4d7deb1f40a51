//! Problem classes embedded as chronological models, plus a few small
//! demonstration environments.
//!
//! | model | actions | observations | reward |
//! |---|---|---|---|
//! | [`SpEnv`] | predicted bit | none | 1 iff the prediction was right |
//! | [`SgEnv`] | agent move | opponent's minimax reply | shifted game value at the last round |
//! | [`FmEnv`] | query point | function value index | `(z_max - z) / (z_max - z_min) * r_max` |
//! | [`ExEnv`] | answer | next example or question | 1 iff the previous question was answered correctly |

use std::collections::HashMap;
use std::fmt::Write as _;

use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::interaction::{ActionSymbol, History, Percept, PerceptSpace};
use crate::model::ChronologicalModel;
use crate::rational::{self, Rational};
use crate::vm::{CycleInput, MachineState, Program, RunBudget};

fn one_hot(space: &PerceptSpace, x: &Percept) -> Vec<Rational> {
    let mut row = vec![Rational::zero(); space.num_percepts()];
    row[space.index_of(x).expect("percept from the model's own alphabet")] = Rational::one();
    row
}

fn binary_space(actions: usize) -> PerceptSpace {
    PerceptSpace::with_binary_rewards(actions, 1)
}

fn bit_reward(b: bool) -> Rational {
    if b {
        Rational::one()
    } else {
        Rational::zero()
    }
}

/// Strips comments and blank lines; yields `(line number, key, rest)`.
fn spec_lines(text: &str) -> impl Iterator<Item = (usize, &str, &str)> {
    text.lines().enumerate().filter_map(|(n, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return None;
        }
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        Some((n + 1, key, rest.trim()))
    })
}

fn parse_count(n: usize, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Parse(format!("line {n}: bad count {v:?}")))
}

// ---------------------------------------------------------------------------
// Sequence prediction

/// A distribution over binary sequences, given by its next-bit predictions.
pub trait SequenceMeasure: Send + Sync {
    /// Probability that the bit after `prefix` is 1.
    fn prob_one(&self, prefix: &[bool]) -> Result<Rational>;

    fn label(&self) -> String {
        "sequence".into()
    }
}

/// Explicit next-bit probabilities for prefixes shorter than `depth`; 1/2 elsewhere.
#[derive(Clone, Debug)]
pub struct BitTable {
    depth: usize,
    table: HashMap<Vec<bool>, Rational>,
}

impl BitTable {
    pub fn new(depth: usize, table: HashMap<Vec<bool>, Rational>) -> Result<Self> {
        for (prefix, p) in &table {
            if prefix.len() >= depth {
                return Err(Error::InvalidModel(format!(
                    "prefix of length {} beyond depth {depth}",
                    prefix.len()
                )));
            }
            if p < &Rational::zero() || p > &Rational::one() {
                return Err(Error::out_of_range("bit probability", rational::format(p), "[0, 1]"));
            }
        }
        Ok(BitTable { depth, table })
    }

    /// Random probabilities in eighths for every prefix shorter than `depth`.
    pub fn random<R: Rng>(depth: usize, rng: &mut R) -> Self {
        let mut table = HashMap::new();
        for len in 0..depth {
            for bits in 0..(1u64 << len) {
                let prefix: Vec<bool> = (0..len).map(|i| bits >> i & 1 == 1).collect();
                table.insert(prefix, rational::ratio(rng.gen_range(0..=8), 8));
            }
        }
        BitTable { depth, table }
    }
}

impl SequenceMeasure for BitTable {
    fn prob_one(&self, prefix: &[bool]) -> Result<Rational> {
        Ok(self.table.get(prefix).cloned().unwrap_or_else(|| rational::ratio(1, 2)))
    }

    fn label(&self) -> String {
        format!("bit-table:{}", self.depth)
    }
}

/// The deterministic sequence repeating `pattern` forever.
#[derive(Clone, Debug)]
pub struct PeriodicSequence {
    pub pattern: Vec<bool>,
}

impl PeriodicSequence {
    pub fn new(pattern: Vec<bool>) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::InvalidModel("empty periodic pattern".into()));
        }
        Ok(PeriodicSequence { pattern })
    }
}

impl SequenceMeasure for PeriodicSequence {
    fn prob_one(&self, prefix: &[bool]) -> Result<Rational> {
        Ok(bit_reward(self.pattern[prefix.len() % self.pattern.len()]))
    }

    fn label(&self) -> String {
        let bits: String = self.pattern.iter().map(|&b| if b { '1' } else { '0' }).collect();
        format!("periodic:{bits}")
    }
}

/// The bit sequence printed by a VM program that always reads input 0: bit
/// `t` is its first output symbol in cycle `t`, taken mod 2.
#[derive(Clone, Debug)]
pub struct ProgramSequence {
    pub program: Program,
    pub budget: RunBudget,
}

impl ProgramSequence {
    pub fn bits(&self, n: usize) -> Vec<bool> {
        let mut state = MachineState::new();
        (0..n)
            .map(|_| {
                let out = self
                    .program
                    .run_cycle(&mut state, CycleInput::for_env(ActionSymbol(0)), 1, self.budget);
                out.symbols[0] % 2 == 1
            })
            .collect()
    }
}

impl SequenceMeasure for ProgramSequence {
    fn prob_one(&self, prefix: &[bool]) -> Result<Rational> {
        let bits = self.bits(prefix.len() + 1);
        if bits[..prefix.len()] != *prefix {
            return Ok(rational::ratio(1, 2));
        }
        Ok(bit_reward(bits[prefix.len()]))
    }

    fn label(&self) -> String {
        format!("program-sequence:{}", self.program.to_hex())
    }
}

/// The informed sequence predictor: predicts 1 iff `P(1) > 1/2`.
pub fn sp_predict(measure: &dyn SequenceMeasure, prefix: &[bool]) -> Result<bool> {
    Ok(measure.prob_one(prefix)? > rational::ratio(1, 2))
}

/// Sequence prediction as an agent task: the agent's action is its guess for
/// the next bit and the reward says whether it was right.
pub struct SpEnv<S> {
    measure: S,
    space: PerceptSpace,
}

pub fn make_sp_env<S: SequenceMeasure>(measure: S) -> SpEnv<S> {
    SpEnv {
        measure,
        space: binary_space(2),
    }
}

impl<S: SequenceMeasure> SpEnv<S> {
    pub fn measure(&self) -> &S {
        &self.measure
    }

    /// The sequence seen so far: each bit is the guess if rewarded, its complement otherwise.
    pub fn sequence(h: &History) -> Vec<bool> {
        h.cycles()
            .iter()
            .map(|(y, x)| (y.0 == 1) == !x.reward.is_zero())
            .collect()
    }
}

impl<S: SequenceMeasure> ChronologicalModel for SpEnv<S> {
    fn space(&self) -> &PerceptSpace {
        &self.space
    }

    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        self.space.check_action(y)?;
        let p1 = self.measure.prob_one(&Self::sequence(h))?;
        let hit = if y.0 == 1 { p1 } else { Rational::one() - p1 };
        Ok(vec![Rational::one() - &hit, hit])
    }

    fn label(&self) -> String {
        format!("sp[{}]", self.measure.label())
    }
}

// ---------------------------------------------------------------------------
// Strategic games

/// A fixed-length, deterministic, strictly competitive game with alternating moves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameSpec {
    pub rounds: usize,
    pub agent_moves: usize,
    pub opponent_moves: usize,
    /// One value per complete move sequence `y1 o1 ... yn on`, in lexicographic order.
    pub leaf_values: Vec<Rational>,
    /// Leaf values must lie in `[lo, hi]`; they are mapped affinely onto `[0, r_max]`.
    pub value_range: (Rational, Rational),
}

impl GameSpec {
    pub fn new(
        rounds: usize,
        agent_moves: usize,
        opponent_moves: usize,
        leaf_values: Vec<Rational>,
        value_range: (Rational, Rational),
    ) -> Result<Self> {
        if rounds == 0 || agent_moves == 0 || opponent_moves == 0 {
            return Err(Error::InvalidModel(
                "games need at least one round and one move per player".into(),
            ));
        }
        let leaves = (agent_moves * opponent_moves)
            .checked_pow(rounds as u32)
            .ok_or_else(|| Error::Capacity("game tree too large".into()))?;
        if leaf_values.len() != leaves {
            return Err(Error::InvalidModel(format!(
                "game has {leaves} leaves, got {} values",
                leaf_values.len()
            )));
        }
        let (lo, hi) = &value_range;
        if lo >= hi {
            return Err(Error::InvalidModel("empty value range".into()));
        }
        if let Some(v) = leaf_values.iter().find(|v| *v < lo || *v > hi) {
            return Err(Error::out_of_range(
                "leaf value",
                rational::format(v),
                "the value range",
            ));
        }
        Ok(GameSpec {
            rounds,
            agent_moves,
            opponent_moves,
            leaf_values,
            value_range,
        })
    }

    /// Win/draw/loss values `{-1, 0, 1}`.
    pub fn win_draw_loss(
        rounds: usize,
        agent_moves: usize,
        opponent_moves: usize,
        leaf_values: &[i64],
    ) -> Result<Self> {
        let values = leaf_values.iter().map(|&v| rational::int(v)).collect();
        Self::new(
            rounds,
            agent_moves,
            opponent_moves,
            values,
            (rational::int(-1), rational::int(1)),
        )
    }

    fn leaf_index(&self, moves: &[usize]) -> usize {
        moves.iter().enumerate().fold(0, |acc, (i, &m)| {
            let radix = if i % 2 == 0 {
                self.agent_moves
            } else {
                self.opponent_moves
            };
            acc * radix + m
        })
    }

    pub fn value(&self, moves: &[usize]) -> &Rational {
        &self.leaf_values[self.leaf_index(moves)]
    }

    /// The leaf value mapped onto `[0, r_max]`.
    pub fn shifted(&self, v: &Rational, r_max: &Rational) -> Rational {
        let (lo, hi) = &self.value_range;
        (v - lo) / (hi - lo) * r_max
    }

    /// Minimax value of a partial move sequence `y1 o1 ... ` (either player to move).
    pub fn minimax(&self, moves: &mut Vec<usize>) -> Rational {
        if moves.len() == 2 * self.rounds {
            return self.value(moves).clone();
        }
        let agent_turn = moves.len().is_multiple_of(2);
        let n = if agent_turn {
            self.agent_moves
        } else {
            self.opponent_moves
        };
        let mut best: Option<Rational> = None;
        for m in 0..n {
            moves.push(m);
            let v = self.minimax(moves);
            moves.pop();
            best = Some(match best {
                None => v,
                Some(b) if agent_turn => b.max(v),
                Some(b) => b.min(v),
            });
        }
        best.expect("at least one move")
    }

    /// The opponent's reply after `moves` (ending with an agent move): the
    /// smallest move minimising the minimax value.
    pub fn opponent_reply(&self, moves: &[usize]) -> usize {
        let mut buf = moves.to_vec();
        let mut best: Option<(usize, Rational)> = None;
        for o in 0..self.opponent_moves {
            buf.push(o);
            let v = self.minimax(&mut buf);
            buf.pop();
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((o, v));
            }
        }
        best.expect("at least one move").0
    }

    /// Text format:
    ///
    /// ```text
    /// rounds 1
    /// agent_moves 2
    /// opponent_moves 2
    /// range -1 1
    /// values -1 0 1 1      # leaves in lexicographic order of y1 o1 y2 o2 ...
    /// ```
    pub fn from_text(text: &str) -> Result<Self> {
        let (mut rounds, mut ya, mut yo, mut range, mut values) = (None, None, None, None, None);
        for (n, key, rest) in spec_lines(text) {
            match key {
                "rounds" => rounds = Some(parse_count(n, rest)?),
                "agent_moves" => ya = Some(parse_count(n, rest)?),
                "opponent_moves" => yo = Some(parse_count(n, rest)?),
                "range" => {
                    let v = rest
                        .split_whitespace()
                        .map(rational::parse)
                        .collect::<Result<Vec<_>>>()?;
                    if v.len() != 2 {
                        return Err(Error::Parse(format!("line {n}: range needs two values")));
                    }
                    range = Some((v[0].clone(), v[1].clone()));
                }
                "values" => {
                    values = Some(
                        rest.split_whitespace()
                            .map(rational::parse)
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                other => return Err(Error::Parse(format!("line {n}: unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("game spec missing {k:?}"));
        Self::new(
            rounds.ok_or_else(|| missing("rounds"))?,
            ya.ok_or_else(|| missing("agent_moves"))?,
            yo.ok_or_else(|| missing("opponent_moves"))?,
            values.ok_or_else(|| missing("values"))?,
            range.unwrap_or_else(|| (rational::int(-1), rational::int(1))),
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rounds {}", self.rounds);
        let _ = writeln!(out, "agent_moves {}", self.agent_moves);
        let _ = writeln!(out, "opponent_moves {}", self.opponent_moves);
        let _ = writeln!(
            out,
            "range {} {}",
            rational::format(&self.value_range.0),
            rational::format(&self.value_range.1)
        );
        let values: Vec<String> = self.leaf_values.iter().map(rational::format).collect();
        let _ = writeln!(out, "values {}", values.join(" "));
        out
    }
}

/// The game played repeatedly against a minimax opponent; rewards arrive
/// only in the last round of each game.
pub struct SgEnv {
    game: GameSpec,
    space: PerceptSpace,
}

pub fn make_sg_env(game: GameSpec) -> Result<SgEnv> {
    let r_max = Rational::one();
    let mut rewards: Vec<Rational> = game.leaf_values.iter().map(|v| game.shifted(v, &r_max)).collect();
    rewards.push(Rational::zero());
    rewards.sort();
    rewards.dedup();
    let space = PerceptSpace::new(game.agent_moves, rewards, game.opponent_moves, r_max)?;
    Ok(SgEnv { game, space })
}

impl SgEnv {
    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    /// Moves of the game in progress after `h`.
    pub fn current_moves(&self, h: &History) -> Vec<usize> {
        let start = h.len() - h.len() % self.game.rounds;
        h.cycles()[start..]
            .iter()
            .flat_map(|(y, x)| [y.0, x.observation])
            .collect()
    }

    /// Episode boundaries `0, n, 2n, ...` up to `lifetime`.
    pub fn episode_boundaries(&self, lifetime: usize) -> Vec<usize> {
        (0..=lifetime.div_ceil(self.game.rounds))
            .map(|r| r * self.game.rounds)
            .collect()
    }
}

impl ChronologicalModel for SgEnv {
    fn space(&self) -> &PerceptSpace {
        &self.space
    }

    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        self.space.check_action(y)?;
        let mut moves = self.current_moves(h);
        moves.push(y.0);
        let o = self.game.opponent_reply(&moves);
        moves.push(o);
        let reward = if moves.len() == 2 * self.game.rounds {
            self.game.shifted(self.game.value(&moves), self.space.r_max())
        } else {
            Rational::zero()
        };
        Ok(one_hot(&self.space, &Percept::new(reward, o)))
    }

    fn label(&self) -> String {
        format!("sg[{} rounds]", self.game.rounds)
    }
}

// ---------------------------------------------------------------------------
// Function minimisation

/// A finite class of functions `{0..|Y|} -> Z` with a prior.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionClassSpec {
    pub inputs: usize,
    /// Strictly increasing codomain values.
    pub codomain: Vec<Rational>,
    /// `functions[f][y]` indexes into `codomain`.
    pub functions: Vec<Vec<usize>>,
    pub prior: Vec<Rational>,
}

impl FunctionClassSpec {
    pub fn new(
        inputs: usize,
        codomain: Vec<Rational>,
        functions: Vec<Vec<usize>>,
        prior: Vec<Rational>,
    ) -> Result<Self> {
        if inputs == 0 || codomain.len() < 2 {
            return Err(Error::InvalidModel(
                "need at least one input and two codomain values".into(),
            ));
        }
        if codomain.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel("codomain must be strictly increasing".into()));
        }
        if functions.is_empty() || functions.len() != prior.len() {
            return Err(Error::InvalidModel("one prior weight per function required".into()));
        }
        if functions
            .iter()
            .any(|f| f.len() != inputs || f.iter().any(|&z| z >= codomain.len()))
        {
            return Err(Error::InvalidModel(
                "function table does not match domain/codomain".into(),
            ));
        }
        if prior.iter().any(|p| p < &Rational::zero()) || !prior.iter().sum::<Rational>().is_one() {
            return Err(Error::InvalidModel("prior must be a probability distribution".into()));
        }
        Ok(FunctionClassSpec {
            inputs,
            codomain,
            functions,
            prior,
        })
    }

    /// Every function `{0..inputs} -> codomain`, uniformly weighted.
    pub fn uniform_all(inputs: usize, codomain: Vec<Rational>) -> Result<Self> {
        let nz = codomain.len();
        let count = nz
            .checked_pow(inputs as u32)
            .filter(|&c| c <= 1 << 16)
            .ok_or_else(|| Error::Capacity("function class too large".into()))?;
        let functions: Vec<Vec<usize>> = (0..count)
            .map(|mut i| {
                (0..inputs)
                    .map(|_| {
                        let z = i % nz;
                        i /= nz;
                        z
                    })
                    .collect()
            })
            .collect();
        let prior = vec![rational::ratio(1, count as i64); count];
        Self::new(inputs, codomain, functions, prior)
    }

    /// Text format:
    ///
    /// ```text
    /// inputs 2
    /// codomain 1 2 3 4
    /// all                       # every function, uniform prior; or:
    /// function 1/2 : 1 3        # prior, then f(0) f(1) ...
    /// ```
    pub fn from_text(text: &str) -> Result<Self> {
        let (mut inputs, mut codomain, mut all) = (None, None, false);
        let mut functions = Vec::new();
        for (n, key, rest) in spec_lines(text) {
            match key {
                "inputs" => inputs = Some(parse_count(n, rest)?),
                "codomain" => {
                    codomain = Some(
                        rest.split_whitespace()
                            .map(rational::parse)
                            .collect::<Result<Vec<Rational>>>()?,
                    )
                }
                "all" => all = true,
                "function" => {
                    let (p, vals) = rest
                        .split_once(':')
                        .ok_or_else(|| Error::Parse(format!("line {n}: function needs ':'")))?;
                    let vals = vals
                        .split_whitespace()
                        .map(rational::parse)
                        .collect::<Result<Vec<_>>>()?;
                    functions.push((rational::parse(p)?, vals));
                }
                other => return Err(Error::Parse(format!("line {n}: unknown key {other:?}"))),
            }
        }
        let inputs = inputs.ok_or_else(|| Error::Parse("function class missing \"inputs\"".into()))?;
        let codomain = codomain.ok_or_else(|| Error::Parse("function class missing \"codomain\"".into()))?;
        if all {
            return Self::uniform_all(inputs, codomain);
        }
        let mut table = Vec::new();
        let mut prior = Vec::new();
        for (p, vals) in functions {
            let idx = vals
                .iter()
                .map(|v| {
                    codomain
                        .iter()
                        .position(|z| z == v)
                        .ok_or_else(|| Error::out_of_range("function value", rational::format(v), "the codomain"))
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(idx);
            prior.push(p);
        }
        Self::new(inputs, codomain, table, prior)
    }

    /// Index of the function whose values are `values` (as codomain indices).
    pub fn find(&self, values: &[usize]) -> Option<usize> {
        self.functions.iter().position(|f| f == values)
    }
}

/// Function minimisation: each query `y` reveals `z = f(y)` for a latent `f`
/// drawn from the prior, rewarded so that smaller `z` pays more.
pub struct FmEnv {
    class: FunctionClassSpec,
    space: PerceptSpace,
}

pub fn make_fm_env(class: FunctionClassSpec) -> Result<FmEnv> {
    let r_max = Rational::one();
    let mut rewards: Vec<Rational> = class.codomain.iter().map(|z| fm_reward(&class, z, &r_max)).collect();
    rewards.sort();
    let space = PerceptSpace::new(class.inputs, rewards, class.codomain.len(), r_max)?;
    Ok(FmEnv { class, space })
}

fn fm_reward(class: &FunctionClassSpec, z: &Rational, r_max: &Rational) -> Rational {
    let lo = &class.codomain[0];
    let hi = class.codomain.last().expect("nonempty codomain");
    (hi - z) / (hi - lo) * r_max
}

impl FmEnv {
    pub fn class(&self) -> &FunctionClassSpec {
        &self.class
    }

    /// The percept revealing `z = codomain[zi]`.
    pub fn percept_for(&self, zi: usize) -> Percept {
        Percept::new(fm_reward(&self.class, &self.class.codomain[zi], self.space.r_max()), zi)
    }

    /// The deterministic environment of one function from the class.
    pub fn single(&self, f: usize) -> Result<FmEnv> {
        let mut prior = vec![Rational::zero(); self.class.functions.len()];
        *prior
            .get_mut(f)
            .ok_or_else(|| Error::NotFound(format!("function {f}")))? = Rational::one();
        Ok(FmEnv {
            class: FunctionClassSpec {
                prior,
                ..self.class.clone()
            },
            space: self.space.clone(),
        })
    }

    /// Prior mass of the functions agreeing with every observation of `h`.
    fn posterior(&self, h: &History) -> Vec<Rational> {
        self.class
            .functions
            .iter()
            .zip(&self.class.prior)
            .map(|(f, p)| {
                let agrees = h.cycles().iter().all(|(y, x)| self.percept_for(f[y.0]) == *x);
                if agrees {
                    p.clone()
                } else {
                    Rational::zero()
                }
            })
            .collect()
    }

    /// `E[z_k | h, y_k = y]`.
    pub fn expected_z(&self, h: &History, y: ActionSymbol) -> Result<Rational> {
        self.space.check_action(y)?;
        let post = self.posterior(h);
        let total: Rational = post.iter().sum();
        if total.is_zero() {
            return Err(Error::UndefinedConditional(format!("no function agrees with {h}")));
        }
        let mut e = Rational::zero();
        for (f, p) in self.class.functions.iter().zip(&post) {
            e += p * &self.class.codomain[f[y.0]];
        }
        Ok(e / total)
    }
}

impl ChronologicalModel for FmEnv {
    fn space(&self) -> &PerceptSpace {
        &self.space
    }

    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        self.space.check_action(y)?;
        let post = self.posterior(h);
        let total: Rational = post.iter().sum();
        if total.is_zero() {
            return Err(Error::UndefinedConditional(format!("no function agrees with {h}")));
        }
        let mut row = vec![Rational::zero(); self.space.num_percepts()];
        for (f, p) in self.class.functions.iter().zip(&post) {
            if p.is_zero() {
                continue;
            }
            let idx = self.space.index_of(&self.percept_for(f[y.0])).expect("fm percept");
            row[idx] += p / &total;
        }
        Ok(row)
    }

    fn joint(&self, h: &History) -> Result<Rational> {
        Ok(self.posterior(h).iter().sum())
    }

    fn label(&self) -> String {
        let support: Vec<usize> = (0..self.class.prior.len())
            .filter(|&f| !self.class.prior[f].is_zero())
            .collect();
        match support.as_slice() {
            [f] => {
                let values: Vec<String> = self.class.functions[*f]
                    .iter()
                    .map(|zi| self.class.codomain[*zi].to_string())
                    .collect();
                format!("fm:f={}", values.join(";"))
            }
            _ => format!("fm[{} functions]", support.len()),
        }
    }
}

// ---------------------------------------------------------------------------
// Supervised learning from examples

/// A relation `R ⊆ Z × Y` and an i.i.d. presentation distribution over
/// examples `(z, v)` and questions `(z, ?)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationSpec {
    pub inputs: usize,
    pub labels: usize,
    /// `relation[z][y]`.
    pub relation: Vec<Vec<bool>>,
    /// Indexed by `z * (labels + 1) + v`, with `v = labels` meaning `?`.
    pub presentation: Vec<Rational>,
}

impl RelationSpec {
    pub fn new(inputs: usize, labels: usize, relation: Vec<Vec<bool>>, presentation: Vec<Rational>) -> Result<Self> {
        if inputs == 0 || labels == 0 {
            return Err(Error::InvalidModel("relation needs inputs and labels".into()));
        }
        if relation.len() != inputs || relation.iter().any(|r| r.len() != labels) {
            return Err(Error::InvalidModel("relation table has the wrong shape".into()));
        }
        if presentation.len() != inputs * (labels + 1) {
            return Err(Error::InvalidModel("presentation table has the wrong shape".into()));
        }
        if presentation.iter().any(|p| p < &Rational::zero()) || !presentation.iter().sum::<Rational>().is_one() {
            return Err(Error::InvalidModel(
                "presentation must be a probability distribution".into(),
            ));
        }
        for z in 0..inputs {
            for v in 0..labels {
                if !relation[z][v] && !presentation[z * (labels + 1) + v].is_zero() {
                    return Err(Error::InvalidModel(format!(
                        "wrong example ({z},{v}) has positive probability"
                    )));
                }
            }
        }
        Ok(RelationSpec {
            inputs,
            labels,
            relation,
            presentation,
        })
    }

    /// Text format:
    ///
    /// ```text
    /// inputs 2
    /// labels 2
    /// relation 0:0 1:1          # pairs z:y in R
    /// present 0 0 1/4           # z, v (or ?), probability
    /// present 1 ? 1/4
    /// ```
    pub fn from_text(text: &str) -> Result<Self> {
        let (mut inputs, mut labels) = (None, None);
        let mut pairs = Vec::new();
        let mut present = Vec::new();
        for (n, key, rest) in spec_lines(text) {
            match key {
                "inputs" => inputs = Some(parse_count(n, rest)?),
                "labels" => labels = Some(parse_count(n, rest)?),
                "relation" => {
                    for pair in rest.split_whitespace() {
                        let (z, y) = pair
                            .split_once(':')
                            .ok_or_else(|| Error::Parse(format!("line {n}: relation pair {pair:?}")))?;
                        pairs.push((parse_count(n, z)?, parse_count(n, y)?));
                    }
                }
                "present" => {
                    let parts: Vec<&str> = rest.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(Error::Parse(format!("line {n}: present needs z v p")));
                    }
                    let v = if parts[1] == "?" {
                        None
                    } else {
                        Some(parse_count(n, parts[1])?)
                    };
                    present.push((parse_count(n, parts[0])?, v, rational::parse(parts[2])?));
                }
                other => return Err(Error::Parse(format!("line {n}: unknown key {other:?}"))),
            }
        }
        let inputs = inputs.ok_or_else(|| Error::Parse("relation spec missing \"inputs\"".into()))?;
        let labels = labels.ok_or_else(|| Error::Parse("relation spec missing \"labels\"".into()))?;
        let mut relation = vec![vec![false; labels]; inputs];
        for (z, y) in pairs {
            if z >= inputs || y >= labels {
                return Err(Error::out_of_range(
                    "relation pair",
                    format!("{z}:{y}"),
                    "the alphabets",
                ));
            }
            relation[z][y] = true;
        }
        let mut presentation = vec![Rational::zero(); inputs * (labels + 1)];
        for (z, v, p) in present {
            let v = v.unwrap_or(labels);
            if z >= inputs || v > labels {
                return Err(Error::out_of_range("presentation", format!("{z} {v}"), "the alphabets"));
            }
            presentation[z * (labels + 1) + v] += p;
        }
        Self::new(inputs, labels, relation, presentation)
    }

    pub fn holds(&self, z: usize, y: usize) -> bool {
        self.relation[z][y]
    }
}

/// Observation `o = z * (|Y| + 1) + v`; the reward in cycle `k` scores the
/// answer `y_k` to the input `z` presented in cycle `k - 1`.
pub struct ExEnv {
    spec: RelationSpec,
    space: PerceptSpace,
}

pub fn make_ex_env(spec: RelationSpec) -> Result<ExEnv> {
    let space = PerceptSpace::with_binary_rewards(spec.labels, spec.inputs * (spec.labels + 1));
    Ok(ExEnv { spec, space })
}

impl ExEnv {
    pub fn spec(&self) -> &RelationSpec {
        &self.spec
    }

    /// The observation presenting `(z, v)`, where `None` is the question mark.
    pub fn observation(&self, z: usize, v: Option<usize>) -> usize {
        z * (self.spec.labels + 1) + v.unwrap_or(self.spec.labels)
    }
}

impl ChronologicalModel for ExEnv {
    fn space(&self) -> &PerceptSpace {
        &self.space
    }

    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        self.space.check_action(y)?;
        let reward = match h.last_percept() {
            None => false,
            Some(x) => self.spec.holds(x.observation / (self.spec.labels + 1), y.0),
        };
        let r = bit_reward(reward);
        let mut row = vec![Rational::zero(); self.space.num_percepts()];
        for (o, p) in self.spec.presentation.iter().enumerate() {
            let idx = self.space.index_of(&Percept::new(r.clone(), o)).expect("ex percept");
            row[idx] = p.clone();
        }
        Ok(row)
    }

    fn label(&self) -> String {
        "ex".into()
    }
}

// ---------------------------------------------------------------------------
// Demonstration environments

/// Two actions; the first action decides every reward that follows.
pub struct HeavenHell {
    pub heaven: usize,
    space: PerceptSpace,
}

pub fn make_heavenhell(i: usize) -> Result<HeavenHell> {
    if i > 1 {
        return Err(Error::out_of_range("heaven action", i, "0 or 1"));
    }
    Ok(HeavenHell {
        heaven: i,
        space: binary_space(2),
    })
}

impl ChronologicalModel for HeavenHell {
    fn space(&self) -> &PerceptSpace {
        &self.space
    }

    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        self.space.check_action(y)?;
        let first = if h.is_empty() { y } else { h.action(0) };
        Ok(one_hot(
            &self.space,
            &Percept::new(bit_reward(first.0 == self.heaven), 0),
        ))
    }

    fn label(&self) -> String {
        format!("heavenhell:{}", self.heaven)
    }
}

/// `N` actions, of which only `y_star` is ever rewarded.
pub struct OnlyOne {
    pub y_star: ActionSymbol,
    space: PerceptSpace,
}

pub fn make_onlyone(n: usize, y_star: ActionSymbol) -> Result<OnlyOne> {
    if y_star.0 >= n {
        return Err(Error::out_of_range("rewarded action", y_star, format!("0..{n}")));
    }
    Ok(OnlyOne {
        y_star,
        space: binary_space(n),
    })
}

impl ChronologicalModel for OnlyOne {
    fn space(&self) -> &PerceptSpace {
        &self.space
    }

    fn conditional(&self, _: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        self.space.check_action(y)?;
        Ok(one_hot(&self.space, &Percept::new(bit_reward(y == self.y_star), 0)))
    }

    fn label(&self) -> String {
        format!("onlyone:{}:{}", self.space.num_actions(), self.y_star)
    }
}

/// Work (`y = 0`, reward 0) earns holidays (`y = 1`, reward 1). Action 1 in
/// cycle `k` pays iff for some `l >= 1` the `ceil(sqrt(l))` cycles ending at
/// cycle `k - l` were all work.
pub struct Lazy {
    pub lifetime: usize,
    space: PerceptSpace,
}

pub fn make_lazy(lifetime: usize) -> Result<Lazy> {
    if lifetime < 2 {
        return Err(Error::out_of_range("lifetime", lifetime, ">= 2"));
    }
    Ok(Lazy {
        lifetime,
        space: binary_space(2),
    })
}

impl Lazy {
    /// Whether action 1 pays in cycle `k = actions.len() + 1` after `actions`.
    pub fn holiday_earned(actions: &[ActionSymbol]) -> bool {
        let k = actions.len() + 1;
        (1..k).any(|l| {
            let run = rational::ceil_sqrt(l as u64) as usize;
            let end = k - l;
            end >= run && (end + 1 - run..=end).all(|j| actions[j - 1].0 == 0)
        })
    }
}

impl ChronologicalModel for Lazy {
    fn space(&self) -> &PerceptSpace {
        &self.space
    }

    fn conditional(&self, h: &History, y: ActionSymbol) -> Result<Vec<Rational>> {
        self.space.check_action(y)?;
        let actions: Vec<ActionSymbol> = h.actions().collect();
        let paid = y.0 == 1 && Self::holiday_earned(&actions);
        Ok(one_hot(&self.space, &Percept::new(bit_reward(paid), 0)))
    }

    fn label(&self) -> String {
        format!("lazy:{}", self.lifetime)
    }
}
