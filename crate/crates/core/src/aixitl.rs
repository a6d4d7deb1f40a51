//! The length- and time-bounded best-vote agent.
//!
//! Each candidate emits, every cycle, a claim `w` about the value it will
//! achieve followed by an action. A claim is accepted only if it does not
//! exceed the candidate's exact value `V^{p xi}_{k m_k}` under the environment
//! class; rejected claims count as zero. The agent acts like the candidate
//! with the highest accepted claim.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::interaction::{ActionSymbol, History, HorizonPolicy, PerceptSpace, Policy};
use crate::model::{ChronologicalModel, MixtureModel};
use crate::planner::{policy_value_forced, policy_value_functional, Environment};
use crate::rational::{self, Rational};
use crate::vm::{enumerate_programs, env_cycle, CycleInput, MachineState, Program, RunBudget};

/// A self-rating `w` and the proposed action `y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Claim {
    pub w: Rational,
    pub y: ActionSymbol,
}

impl Claim {
    pub fn zero() -> Self {
        Claim {
            w: Rational::zero(),
            y: ActionSymbol(0),
        }
    }
}

type ScriptFn = dyn Fn(&History) -> Claim + Send + Sync;

/// Where a candidate's claims come from.
#[derive(Clone)]
pub enum CandidateSource {
    /// A VM program writing two symbols per cycle: the claim (in units of
    /// `claim_unit`) and the action (reduced mod `|Y|`).
    Program(Program),
    /// A hand-written candidate, used to test the selection machinery.
    Scripted { name: String, claim: Arc<ScriptFn> },
}

impl CandidateSource {
    pub fn scripted(name: impl Into<String>, f: impl Fn(&History) -> Claim + Send + Sync + 'static) -> Self {
        CandidateSource::Scripted {
            name: name.into(),
            claim: Arc::new(f),
        }
    }

    pub fn id(&self) -> String {
        match self {
            CandidateSource::Program(p) => format!("program:{}", p.to_hex()),
            CandidateSource::Scripted { name, .. } => format!("scripted:{name}"),
        }
    }

    /// Tie-break order: programs by code, then scripted candidates by name.
    fn tie_key(&self) -> (u8, Vec<bool>, &str) {
        match self {
            CandidateSource::Program(p) => (0, p.code().to_vec(), ""),
            CandidateSource::Scripted { name, .. } => (1, Vec::new(), name),
        }
    }
}

impl fmt::Debug for CandidateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// How candidate programs are run and how their claims are scaled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateConfig {
    pub budget: RunBudget,
    pub space: PerceptSpace,
    pub claim_unit: Rational,
}

/// What one candidate produced in one cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleClaim {
    pub claim: Claim,
    pub steps_used: u64,
    pub timed_out: bool,
}

fn program_claim(p: &Program, state: &mut MachineState, h: &History, cfg: &CandidateConfig) -> CycleClaim {
    let out = p.run_cycle(state, CycleInput::for_policy(h.last_percept()), 2, cfg.budget);
    let claim = if out.timed_out {
        Claim::zero()
    } else {
        Claim {
            w: rational::int(out.symbols[0] as i64) * &cfg.claim_unit,
            y: ActionSymbol((out.symbols[1] % cfg.space.num_actions() as u64) as usize),
        }
    };
    CycleClaim {
        claim,
        steps_used: out.steps_used,
        timed_out: out.timed_out,
    }
}

/// A candidate with its persistent machine state.
#[derive(Clone, Debug)]
pub struct ExtendedCandidate {
    pub source: CandidateSource,
    pub state: MachineState,
    pub last_claim: Option<Claim>,
    pub alive: bool,
    cycles_run: usize,
}

impl ExtendedCandidate {
    pub fn new(source: CandidateSource) -> Self {
        ExtendedCandidate {
            source,
            state: MachineState::new(),
            last_claim: None,
            alive: true,
            cycles_run: 0,
        }
    }
}

/// The claim of `source` after `h`, computed by replaying every cycle of `h`.
pub fn claim_from_scratch(source: &CandidateSource, h: &History, cfg: &CandidateConfig) -> CycleClaim {
    match source {
        CandidateSource::Program(p) => {
            let mut state = MachineState::new();
            for i in 0..h.len() {
                program_claim(p, &mut state, &h.prefix(i), cfg);
            }
            program_claim(p, &mut state, h, cfg)
        }
        CandidateSource::Scripted { claim, .. } => CycleClaim {
            claim: claim(h),
            steps_used: 0,
            timed_out: false,
        },
    }
}

/// Runs one more cycle of `c` on the last percept of `h`. Falls back to a
/// full replay if `c` has not seen exactly the cycles before `h`'s end.
pub fn run_candidate_cycle(c: &mut ExtendedCandidate, h: &History, cfg: &CandidateConfig) -> CycleClaim {
    let out = match &c.source {
        CandidateSource::Program(p) if c.cycles_run == h.len() => program_claim(p, &mut c.state, h, cfg),
        CandidateSource::Program(p) => {
            let mut state = MachineState::new();
            for i in 0..h.len() {
                program_claim(p, &mut state, &h.prefix(i), cfg);
            }
            let out = program_claim(p, &mut state, h, cfg);
            c.state = state;
            out
        }
        CandidateSource::Scripted { .. } => claim_from_scratch(&c.source, h, cfg),
    };
    c.cycles_run = h.len() + 1;
    c.last_claim = Some(out.claim.clone());
    out
}

/// A candidate viewed as a policy: its action on any history.
pub struct CandidatePolicy<'a> {
    pub source: &'a CandidateSource,
    pub cfg: &'a CandidateConfig,
}

impl Policy for CandidatePolicy<'_> {
    fn act(&self, history: &History) -> Result<ActionSymbol> {
        Ok(claim_from_scratch(self.source, &history.completed(), self.cfg).claim.y)
    }
}

/// The environment class claims are validated against.
#[derive(Clone)]
pub enum EnvClass {
    /// Deterministic environment programs weighted `2^-length`.
    Programs { pool: Vec<Program>, budget: RunBudget },
    /// Any mixture.
    Mixture(Arc<MixtureModel>),
}

/// Everything needed to check claims.
#[derive(Clone)]
pub struct Validator {
    pub env: EnvClass,
    pub horizon: HorizonPolicy,
    pub lifetime: usize,
    pub candidates: CandidateConfig,
}

impl Validator {
    pub fn horizon_end(&self, h: &History) -> Result<usize> {
        self.horizon.horizon_end(h.next_cycle(), self.lifetime)
    }

    /// `V^{p xi}_{k m_k}(h)` for the candidate's policy, normalised by `xi(h)`.
    pub fn value(&self, source: &CandidateSource, h: &History) -> Result<Rational> {
        let m = self.horizon_end(h)?;
        let policy = CandidatePolicy {
            source,
            cfg: &self.candidates,
        };
        match &self.env {
            EnvClass::Programs { pool, budget } => {
                policy_value_functional(&policy, pool, h.next_cycle(), m, h, *budget, &self.candidates.space)
            }
            EnvClass::Mixture(xi) => policy_value_forced(&policy, xi.as_ref(), m, h),
        }
    }

    /// The claim as accepted for selection: `w` if `w <= V^{p xi}`, else 0.
    pub fn validated(&self, source: &CandidateSource, claim: &Claim, h: &History) -> Rational {
        if validate_claim(self, source, claim, h) {
            claim.w.clone()
        } else {
            Rational::zero()
        }
    }
}

/// True iff `claim.w` does not exceed the candidate's exact value. Claims are
/// invalid wherever that value is undefined.
pub fn validate_claim(v: &Validator, source: &CandidateSource, claim: &Claim, h: &History) -> bool {
    if claim.w.is_zero() {
        return true;
    }
    match v.value(source, h) {
        Ok(value) => claim.w <= value,
        Err(_) => false,
    }
}

/// One row of the selection log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteEntry {
    pub candidate: String,
    pub claim: Claim,
    pub valid: bool,
    pub steps_used: u64,
    pub timed_out: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteOutcome {
    pub action: ActionSymbol,
    pub selected: usize,
    pub entries: Vec<VoteEntry>,
}

impl VoteOutcome {
    /// The winning claim after clamping.
    pub fn selected_value(&self) -> Rational {
        let e = &self.entries[self.selected];
        if e.valid {
            e.claim.w.clone()
        } else {
            Rational::zero()
        }
    }
}

/// Runs every candidate for one cycle and picks the action of the highest
/// validated claim; ties go to the smallest program code.
pub fn best_vote_cycle(candidates: &mut [ExtendedCandidate], h: &History, v: &Validator) -> Result<VoteOutcome> {
    if candidates.is_empty() {
        return Err(Error::InvalidModel("best vote needs at least one candidate".into()));
    }
    let mut entries = Vec::with_capacity(candidates.len());
    for c in candidates.iter_mut() {
        let out = run_candidate_cycle(c, h, &v.candidates);
        let valid = validate_claim(v, &c.source, &out.claim, h);
        entries.push(VoteEntry {
            candidate: c.source.id(),
            claim: out.claim,
            valid,
            steps_used: out.steps_used,
            timed_out: out.timed_out,
        });
    }
    let effective = |i: usize| -> Rational {
        if entries[i].valid {
            entries[i].claim.w.clone()
        } else {
            Rational::zero()
        }
    };
    let mut selected = 0;
    for i in 1..candidates.len() {
        let (a, b) = (effective(i), effective(selected));
        if a > b || (a == b && candidates[i].source.tie_key() < candidates[selected].source.tie_key()) {
            selected = i;
        }
    }
    Ok(VoteOutcome {
        action: entries[selected].claim.y,
        selected,
        entries,
    })
}

/// Parameters of one AIXItl run.
#[derive(Clone)]
pub struct AixitlConfig {
    /// Every program of at most this many bits is a candidate.
    pub max_bits: usize,
    pub validator: Validator,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AixitlRun {
    pub history: History,
    pub log: Vec<VoteOutcome>,
}

impl AixitlRun {
    /// CSV with columns `cycle,candidate,claimed_w,valid,selected,action,steps_used`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("cycle,candidate,claimed_w,valid,selected,action,steps_used\n");
        for (k, vote) in self.log.iter().enumerate() {
            for (i, e) in vote.entries.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    k + 1,
                    e.candidate,
                    rational::format(&e.claim.w),
                    e.valid,
                    i == vote.selected,
                    e.claim.y,
                    e.steps_used
                );
            }
        }
        out
    }
}

/// The candidate pool: every program of at most `max_bits` bits, followed by `extra`.
pub fn candidate_pool(max_bits: usize, extra: Vec<CandidateSource>) -> Vec<ExtendedCandidate> {
    enumerate_programs(max_bits)
        .into_iter()
        .map(CandidateSource::Program)
        .chain(extra)
        .map(ExtendedCandidate::new)
        .collect()
}

/// Runs the best-vote agent for `validator.lifetime` cycles.
pub fn run_aixitl(cfg: &AixitlConfig, env: &Environment<'_>, extra: Vec<CandidateSource>) -> Result<AixitlRun> {
    let mut candidates = candidate_pool(cfg.max_bits, extra);
    let mut rng_env = EnvStepper::new(env, cfg.seed);
    let mut h = History::new();
    let mut log = Vec::new();
    for _ in 0..cfg.validator.lifetime {
        let vote = best_vote_cycle(&mut candidates, &h, &cfg.validator)?;
        let x = rng_env.step(&h, vote.action)?;
        h = h.append_cycle(vote.action, x)?;
        log.push(vote);
    }
    Ok(AixitlRun { history: h, log })
}

/// Steps an [`Environment`] one cycle at a time.
struct EnvStepper<'e, 'a> {
    env: &'e Environment<'a>,
    rng: rand_chacha::ChaCha8Rng,
    state: MachineState,
}

impl<'e, 'a> EnvStepper<'e, 'a> {
    fn new(env: &'e Environment<'a>, seed: u64) -> Self {
        use rand::SeedableRng;
        EnvStepper {
            env,
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
            state: MachineState::new(),
        }
    }

    fn step(&mut self, h: &History, y: ActionSymbol) -> Result<crate::interaction::Percept> {
        match self.env {
            Environment::Model(m) => {
                let row = m.conditional(h, y)?;
                let i = crate::planner::sample_index(&row, &mut self.rng)?;
                Ok(m.space().percept(i))
            }
            Environment::Program { program, budget, space } => {
                let step = env_cycle(program, std::mem::take(&mut self.state), y, *budget, space);
                self.state = step.state;
                Ok(step.percept)
            }
        }
    }
}

/// An agent whose claims can be compared in the effective order.
pub enum Claimant<'a> {
    Candidate(&'a CandidateSource),
    /// The best-vote composite of a pool: claims the highest validated member claim.
    BestVote(&'a [CandidateSource]),
}

impl Claimant<'_> {
    /// The validated claim after `h`.
    pub fn validated_claim(&self, h: &History, v: &Validator) -> Rational {
        match self {
            Claimant::Candidate(s) => {
                let c = claim_from_scratch(s, h, &v.candidates).claim;
                v.validated(s, &c, h)
            }
            Claimant::BestVote(pool) => pool
                .iter()
                .map(|s| {
                    let c = claim_from_scratch(s, h, &v.candidates).claim;
                    v.validated(s, &c, h)
                })
                .max()
                .unwrap_or_else(Rational::zero),
        }
    }
}

/// `p` is effectively at least as intelligent as `q`: on every history with
/// fewer than `depth` cycles that the environment class can produce, `p`'s
/// validated claim is at least `q`'s.
pub fn eff_intel_geq(p: &Claimant<'_>, q: &Claimant<'_>, depth: usize, v: &Validator) -> Result<bool> {
    for h in reachable_histories(v, depth)? {
        if p.validated_claim(&h, v) < q.validated_claim(&h, v) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Histories with fewer than `depth` cycles (and within the lifetime) that
/// have positive probability under the environment class.
pub fn reachable_histories(v: &Validator, depth: usize) -> Result<Vec<History>> {
    let space = &v.candidates.space;
    let mut out = Vec::new();
    for len in 0..depth.min(v.lifetime) {
        for h in space.histories_of_len(len) {
            let reachable = match &v.env {
                EnvClass::Programs { pool, budget } => !crate::vm::consistent_envs(pool, &h, *budget, space).is_empty(),
                EnvClass::Mixture(xi) => !xi.joint(&h)?.is_zero(),
            };
            if reachable {
                out.push(h);
            }
        }
    }
    Ok(out)
}
