//! Scenario configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment. Keys:
//!
//! | key              | value                                                        | default      |
//! |------------------|--------------------------------------------------------------|--------------|
//! | `name`           | scenario name                                                | `scenario`   |
//! | `environment`    | see below                                                    | required     |
//! | `agent`          | `aimu`, `aixi`, `greedy`, `aixitl` or `program`              | required     |
//! | `agent_program`  | policy program for `agent = program` (assembly or `hex:..`)  |              |
//! | `actions`        | action alphabet size for program environments                | 2            |
//! | `observations`   | observation alphabet size for program environments           | 2            |
//! | `max_bits`       | longest program in the pool                                  | 8            |
//! | `steps`          | step budget per program cycle                                | 16           |
//! | `horizon`        | `fixed:m`, `moving:h`, `proportional:b` or `discount:g:cap`  | required     |
//! | `lifetime`       | number of cycles                                             | required     |
//! | `seed`           | environment sampling seed                                    | 0            |
//! | `claim_unit`     | value of one claim symbol for `aixitl` candidates            | 1/4          |
//! | `truth`          | true function values for `fm` environments, e.g. `1 3`       |              |
//! | `bounds`         | comma list of `loss`, `convergence`, `sp-errors`, `disagreement` |          |
//! | `output`         | output directory (overridden by `--out`)                     | `out/<name>` |
//!
//! Environments:
//!
//! - `heavenhell <i>`, `onlyone <n> <y*>`, `lazy`
//! - `program <code>`: a deterministic environment program
//! - `sp-periodic <bits>`, `sp-program <code>`: sequence prediction
//! - `tabular <file>`, `fm <file>`, `sg <file>`, `ex <file>`: spec files relative
//!   to the config file

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use aixi::rational::{self, Rational};
use aixi::vm::Program;
use aixi::HorizonPolicy;

use crate::error::{CliError, Result};

pub const MAX_LIFETIME: usize = 64;
pub const MAX_ALPHABET: usize = 8;
pub const MAX_BITS: usize = 14;
pub const MAX_STEPS: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentKind {
    /// Expectimax with the true environment.
    Informed,
    /// Expectimax with the environment class mixture.
    Universal,
    /// Expectimax with the class mixture and a one-cycle horizon.
    Greedy,
    /// The time/length bounded best-vote agent.
    Bounded,
    /// A fixed policy program.
    FixedProgram,
}

impl AgentKind {
    pub fn keyword(self) -> &'static str {
        match self {
            AgentKind::Informed => "aimu",
            AgentKind::Universal => "aixi",
            AgentKind::Greedy => "greedy",
            AgentKind::Bounded => "aixitl",
            AgentKind::FixedProgram => "program",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            AgentKind::Informed,
            AgentKind::Universal,
            AgentKind::Greedy,
            AgentKind::Bounded,
            AgentKind::FixedProgram,
        ]
        .into_iter()
        .find(|k| k.keyword() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EnvSpec {
    HeavenHell(usize),
    OnlyOne { n: usize, y_star: usize },
    Lazy,
    Program(Program),
    SpPeriodic(Vec<bool>),
    SpProgram(Program),
    Tabular(PathBuf),
    Fm(PathBuf),
    Sg(PathBuf),
    Ex(PathBuf),
}

impl EnvSpec {
    fn parse(value: &str, base: &Path) -> std::result::Result<Self, String> {
        let (kind, rest) = value.split_once(char::is_whitespace).unwrap_or((value, ""));
        let rest = rest.trim();
        let num = |s: &str| s.parse::<usize>().map_err(|_| format!("environment: bad number {s:?}"));
        let file = |s: &str| -> std::result::Result<PathBuf, String> {
            if s.is_empty() {
                return Err(format!("environment: {kind} needs a file"));
            }
            let p = base.join(s);
            if !p.is_file() {
                return Err(format!("environment: file {} does not exist", p.display()));
            }
            Ok(p)
        };
        match kind {
            "heavenhell" => Ok(EnvSpec::HeavenHell(num(rest)?)),
            "onlyone" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                match parts.as_slice() {
                    [n, y] => Ok(EnvSpec::OnlyOne {
                        n: num(n)?,
                        y_star: num(y)?,
                    }),
                    _ => Err("environment: onlyone takes <n> <y*>".into()),
                }
            }
            "lazy" => Ok(EnvSpec::Lazy),
            "program" => parse_program(rest).map(EnvSpec::Program),
            "sp-program" => parse_program(rest).map(EnvSpec::SpProgram),
            "sp-periodic" => {
                if rest.is_empty() || !rest.chars().all(|c| c == '0' || c == '1') {
                    return Err(format!("environment: bad bit pattern {rest:?}"));
                }
                Ok(EnvSpec::SpPeriodic(rest.chars().map(|c| c == '1').collect()))
            }
            "tabular" => file(rest).map(EnvSpec::Tabular),
            "fm" => file(rest).map(EnvSpec::Fm),
            "sg" => file(rest).map(EnvSpec::Sg),
            "ex" => file(rest).map(EnvSpec::Ex),
            other => Err(format!("environment: unknown kind {other:?}")),
        }
    }

    /// The spec file this environment reads, if any.
    pub fn file(&self) -> Option<&Path> {
        match self {
            EnvSpec::Tabular(p) | EnvSpec::Fm(p) | EnvSpec::Sg(p) | EnvSpec::Ex(p) => Some(p),
            _ => None,
        }
    }

    /// Config-file form; spec files are written as `file_name`.
    pub fn to_config_value(&self, file_name: Option<&str>) -> String {
        let f = || file_name.unwrap_or_default().to_string();
        match self {
            EnvSpec::HeavenHell(i) => format!("heavenhell {i}"),
            EnvSpec::OnlyOne { n, y_star } => format!("onlyone {n} {y_star}"),
            EnvSpec::Lazy => "lazy".into(),
            EnvSpec::Program(p) => format!("program hex:{}", p.to_hex()),
            EnvSpec::SpProgram(p) => format!("sp-program hex:{}", p.to_hex()),
            EnvSpec::SpPeriodic(bits) => {
                format!(
                    "sp-periodic {}",
                    bits.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>()
                )
            }
            EnvSpec::Tabular(_) => format!("tabular {}", f()),
            EnvSpec::Fm(_) => format!("fm {}", f()),
            EnvSpec::Sg(_) => format!("sg {}", f()),
            EnvSpec::Ex(_) => format!("ex {}", f()),
        }
    }

    fn program(&self) -> Option<&Program> {
        match self {
            EnvSpec::Program(p) | EnvSpec::SpProgram(p) => Some(p),
            _ => None,
        }
    }
}

fn parse_program(s: &str) -> std::result::Result<Program, String> {
    let parsed = match s.strip_prefix("hex:") {
        Some(hex) => Program::from_hex(hex.trim()),
        None => Program::from_asm(s),
    };
    parsed.map_err(|e| format!("program {s:?}: {e}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Loss,
    Convergence,
    SpErrors,
    Disagreement,
}

impl BoundKind {
    pub fn keyword(self) -> &'static str {
        match self {
            BoundKind::Loss => "loss",
            BoundKind::Convergence => "convergence",
            BoundKind::SpErrors => "sp-errors",
            BoundKind::Disagreement => "disagreement",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub name: String,
    pub environment: EnvSpec,
    pub agent: AgentKind,
    pub agent_program: Option<Program>,
    pub actions: usize,
    pub observations: usize,
    pub max_bits: usize,
    pub steps: u64,
    pub horizon: HorizonPolicy,
    pub lifetime: usize,
    pub seed: u64,
    pub claim_unit: Rational,
    pub truth: Option<Vec<usize>>,
    pub bounds: Vec<BoundKind>,
    pub output: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "name",
    "environment",
    "agent",
    "agent_program",
    "actions",
    "observations",
    "max_bits",
    "steps",
    "horizon",
    "lifetime",
    "seed",
    "claim_unit",
    "truth",
    "bounds",
    "output",
];

/// Reads and validates a config file. Relative spec-file paths resolve
/// against the config file's directory.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

/// Parses config text, reporting every violation rather than the first.
pub fn parse_config(text: &str, base: &Path) -> Result<ScenarioConfig> {
    let mut errors = Vec::new();
    let mut values: Vec<(&str, &str)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected key = value", n + 1));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            errors.push(format!("line {}: unknown key {key:?}", n + 1));
        } else if values.iter().any(|(k, _)| *k == key) {
            errors.push(format!("line {}: duplicate key {key:?}", n + 1));
        } else {
            values.push((key, value));
        }
    }
    let get = |key: &str| values.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);

    fn number<T: std::str::FromStr>(
        errors: &mut Vec<String>,
        key: &str,
        v: Option<&str>,
        default: Option<T>,
    ) -> Option<T> {
        match v {
            None => {
                if default.is_none() {
                    errors.push(format!("missing key {key:?}"));
                }
                default
            }
            Some(s) => match s.parse() {
                Ok(x) => Some(x),
                Err(_) => {
                    errors.push(format!("{key}: not a number: {s:?}"));
                    None
                }
            },
        }
    }
    fn capped<T: PartialOrd + std::fmt::Display + Copy>(
        errors: &mut Vec<String>,
        key: &str,
        v: Option<T>,
        lo: T,
        hi: T,
    ) -> Option<T> {
        match v {
            Some(x) if x < lo || x > hi => {
                errors.push(format!("{key} = {x} outside {lo}..={hi}"));
                None
            }
            other => other,
        }
    }

    let name = get("name").unwrap_or("scenario").to_string();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        errors.push(format!(
            "name {name:?} must be nonempty and use only letters, digits, '-' and '_'"
        ));
    }
    let environment = match get("environment") {
        None => {
            errors.push("missing key \"environment\"".into());
            None
        }
        Some(v) => EnvSpec::parse(v, base).map_err(|e| errors.push(e)).ok(),
    };
    let agent = match get("agent") {
        None => {
            errors.push("missing key \"agent\"".into());
            None
        }
        Some(v) => {
            let kind = AgentKind::parse(v);
            if kind.is_none() {
                errors.push(format!(
                    "agent: unknown kind {v:?} (expected aimu, aixi, greedy, aixitl or program)"
                ));
            }
            kind
        }
    };
    let agent_program = get("agent_program").and_then(|v| parse_program(v).map_err(|e| errors.push(e)).ok());
    let actions = number(&mut errors, "actions", get("actions"), Some(2));
    let actions = capped(&mut errors, "actions", actions, 1, MAX_ALPHABET);
    let observations = number(&mut errors, "observations", get("observations"), Some(2));
    let observations = capped(&mut errors, "observations", observations, 1, MAX_ALPHABET);
    let max_bits = number(&mut errors, "max_bits", get("max_bits"), Some(8));
    let max_bits = capped(&mut errors, "max_bits", max_bits, 3, MAX_BITS);
    let steps = number(&mut errors, "steps", get("steps"), Some(16u64));
    let steps = capped(&mut errors, "steps", steps, 1, MAX_STEPS);
    let lifetime = number(&mut errors, "lifetime", get("lifetime"), None);
    let lifetime = capped(&mut errors, "lifetime", lifetime, 1, MAX_LIFETIME);
    let seed = number(&mut errors, "seed", get("seed"), Some(0u64));
    let horizon = match get("horizon") {
        None => {
            errors.push("missing key \"horizon\"".into());
            None
        }
        Some(v) => v
            .parse::<HorizonPolicy>()
            .map_err(|e| errors.push(format!("horizon: {e}")))
            .ok(),
    };
    let claim_unit = match get("claim_unit") {
        None => Some(rational::ratio(1, 4)),
        Some(v) => match rational::parse(v) {
            Ok(r) if r > rational::zero() => Some(r),
            _ => {
                errors.push(format!("claim_unit: expected a positive rational, got {v:?}"));
                None
            }
        },
    };
    let truth = get("truth").and_then(|v| {
        v.split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| errors.push(format!("truth: expected codomain indices, got {v:?}")))
            .ok()
    });
    let mut bounds = Vec::new();
    if let Some(v) = get("bounds") {
        for word in v.split(',').map(str::trim).filter(|w| !w.is_empty()) {
            match [
                BoundKind::Loss,
                BoundKind::Convergence,
                BoundKind::SpErrors,
                BoundKind::Disagreement,
            ]
            .into_iter()
            .find(|b| b.keyword() == word)
            {
                Some(b) if !bounds.contains(&b) => bounds.push(b),
                Some(_) => {}
                None => errors.push(format!("bounds: unknown bound {word:?}")),
            }
        }
    }

    // Cross-field rules.
    if agent == Some(AgentKind::FixedProgram) && get("agent_program").is_none() {
        errors.push("agent = program requires agent_program".into());
    }
    if let Some(env) = &environment {
        if matches!(env, EnvSpec::Fm(_)) && get("truth").is_none() {
            errors.push("fm environments require truth".into());
        }
        if let (Some(p), Some(bits)) = (env.program(), max_bits) {
            let needs_pool = matches!(agent, Some(AgentKind::Universal | AgentKind::Greedy))
                || bounds
                    .iter()
                    .any(|b| matches!(b, BoundKind::Loss | BoundKind::Convergence | BoundKind::SpErrors));
            if needs_pool && p.length_bits() > bits {
                errors.push(format!(
                    "environment program has {} bits, more than max_bits = {bits}, so it is not in the class",
                    p.length_bits()
                ));
            }
        }
        for b in &bounds {
            let ok = match b {
                BoundKind::Loss | BoundKind::Convergence => matches!(env, EnvSpec::Program(_)),
                BoundKind::SpErrors => matches!(env, EnvSpec::SpProgram(_)),
                BoundKind::Disagreement => true,
            };
            if !ok {
                errors.push(format!(
                    "bounds: {} does not apply to environment {}",
                    b.keyword(),
                    env.to_config_value(Some("<file>"))
                ));
            }
        }
    }

    if !errors.is_empty() {
        return Err(CliError::Validation(errors));
    }
    Ok(ScenarioConfig {
        name,
        environment: environment.expect("validated"),
        agent: agent.expect("validated"),
        agent_program,
        actions: actions.expect("validated"),
        observations: observations.expect("validated"),
        max_bits: max_bits.expect("validated"),
        steps: steps.expect("validated"),
        horizon: horizon.expect("validated"),
        lifetime: lifetime.expect("validated"),
        seed: seed.expect("validated"),
        claim_unit: claim_unit.expect("validated"),
        truth,
        bounds,
        output: get("output").map(|o| base.join(o)),
    })
}

impl ScenarioConfig {
    /// Canonical config text. `env_file` replaces the path of the
    /// environment's spec file; the output directory is omitted.
    pub fn to_text(&self, env_file: Option<&str>) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("name", self.name.clone());
        kv("environment", self.environment.to_config_value(env_file));
        kv("agent", self.agent.keyword().into());
        if let Some(p) = &self.agent_program {
            kv("agent_program", format!("hex:{}", p.to_hex()));
        }
        kv("actions", self.actions.to_string());
        kv("observations", self.observations.to_string());
        kv("max_bits", self.max_bits.to_string());
        kv("steps", self.steps.to_string());
        kv("horizon", self.horizon.to_string());
        kv("lifetime", self.lifetime.to_string());
        kv("seed", self.seed.to_string());
        kv("claim_unit", rational::format(&self.claim_unit));
        if let Some(t) = &self.truth {
            kv("truth", t.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "));
        }
        if !self.bounds.is_empty() {
            kv(
                "bounds",
                self.bounds.iter().map(|b| b.keyword()).collect::<Vec<_>>().join(","),
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig> {
        parse_config(text, Path::new("."))
    }

    fn violations(text: &str) -> Vec<String> {
        match parse(text) {
            Err(CliError::Validation(v)) => v,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    const HH: &str = "name = hh\nenvironment = heavenhell 1\nagent = aimu\nhorizon = fixed:5\nlifetime = 5\n";

    #[test]
    fn minimal_heavenhell_config() {
        let cfg = parse(HH).unwrap();
        assert_eq!(cfg.environment, EnvSpec::HeavenHell(1));
        assert_eq!(cfg.agent, AgentKind::Informed);
        assert_eq!(cfg.lifetime, 5);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn zero_lifetime_is_rejected() {
        let v = violations(&HH.replace("lifetime = 5", "lifetime = 0"));
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("lifetime"));
    }

    #[test]
    fn unknown_agent_is_rejected() {
        let v = violations(&HH.replace("aimu", "oracle"));
        assert!(v[0].contains("unknown kind"));
    }

    #[test]
    fn every_violation_is_listed() {
        let v = violations("agent = nobody\nlifetime = 999\nfoo = 1\nhorizon = sideways\n");
        assert!(v.len() >= 5, "{v:?}");
    }

    #[test]
    fn canonical_text_round_trips() {
        let cfg = parse(&format!("{HH}seed = 4\nbounds = disagreement\n")).unwrap();
        assert_eq!(parse(&cfg.to_text(None)).unwrap(), cfg);
    }

    #[test]
    fn program_outside_class_is_rejected() {
        let text = "environment = program READ; MOVE R; LOAD 1; END\nagent = aixi\nhorizon = moving:1\nlifetime = 3\nmax_bits = 8\n";
        assert!(violations(text)[0].contains("max_bits"));
    }
}
