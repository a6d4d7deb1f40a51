//! A deterministic, step-budgeted chronological bytecode machine.
//!
//! Programs are self-delimiting bit strings. Each instruction starts with a
//! 3-bit opcode followed by a fixed-width operand:
//!
//! | opcode | mnemonic  | operand        | effect                                         |
//! |--------|-----------|----------------|------------------------------------------------|
//! | `000`  | `END`     | -              | end the cycle                                  |
//! | `001`  | `READ`    | -              | cell := primary input                          |
//! | `010`  | `SIGN`    | -              | cell := 1 if the input flag is set, else 0     |
//! | `011`  | `WRITE`   | -              | emit cell as the next output symbol            |
//! | `100`  | `LOAD c`  | 2 bits         | cell := c                                      |
//! | `101`  | `JZ t`    | 3 bits         | jump to instruction t if cell = 0              |
//! | `110`  | `INC`     | -              | cell := cell + 1                               |
//! | `111`  | `MOVE d`  | 1 bit          | move the tape head left (0) or right (1)       |
//!
//! "cell" is the work-tape cell under the head; it is the machine's only
//! arithmetic register. The first `END` terminates decoding, so the set of
//! valid codes is prefix-free. A code whose jump targets fall outside the
//! program is ill-formed.
//!
//! Every cycle starts at instruction 0 with the tape and head carried over
//! from the previous cycle. The cycle ends at `END`; output symbols the cycle
//! did not `WRITE` are filled with the current cell. A cycle that does not
//! reach `END` within the step budget times out and emits all zeros.
//!
//! Policies read the previous percept (`READ` = observation, `SIGN` = reward
//! is positive) and emit one symbol, the action. Environments read the
//! current action through `READ` (`SIGN` reads 0) and emit two symbols:
//! the reward index and the observation. Symbols are reduced modulo the
//! alphabet sizes.

use std::fmt;
use std::str::FromStr;

use num_traits::Signed;

use crate::error::{Error, Result};
use crate::interaction::{ActionSymbol, History, Percept, PerceptSpace};

const OPCODE_BITS: usize = 3;
const CONST_BITS: usize = 2;
const TARGET_BITS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Instruction {
    End,
    ReadObservation,
    ReadRewardSign,
    WriteSymbol,
    LoadConst(u8),
    JumpIfZero(u8),
    Increment,
    MoveTape(Direction),
}

impl Instruction {
    fn opcode(self) -> u8 {
        match self {
            Instruction::End => 0,
            Instruction::ReadObservation => 1,
            Instruction::ReadRewardSign => 2,
            Instruction::WriteSymbol => 3,
            Instruction::LoadConst(_) => 4,
            Instruction::JumpIfZero(_) => 5,
            Instruction::Increment => 6,
            Instruction::MoveTape(_) => 7,
        }
    }

    /// Encoded length in bits.
    pub fn width(self) -> usize {
        OPCODE_BITS
            + match self {
                Instruction::LoadConst(_) => CONST_BITS,
                Instruction::JumpIfZero(_) => TARGET_BITS,
                Instruction::MoveTape(_) => 1,
                _ => 0,
            }
    }

    fn encode_into(self, bits: &mut Vec<bool>) {
        push_uint(bits, self.opcode() as u64, OPCODE_BITS);
        match self {
            Instruction::LoadConst(c) => push_uint(bits, c as u64, CONST_BITS),
            Instruction::JumpIfZero(t) => push_uint(bits, t as u64, TARGET_BITS),
            Instruction::MoveTape(d) => bits.push(d == Direction::Right),
            _ => {}
        }
    }

    /// Every instruction, in code order.
    fn all() -> Vec<Instruction> {
        let mut out = vec![
            Instruction::End,
            Instruction::ReadObservation,
            Instruction::ReadRewardSign,
            Instruction::WriteSymbol,
        ];
        out.extend((0..1u8 << CONST_BITS).map(Instruction::LoadConst));
        out.extend((0..1u8 << TARGET_BITS).map(Instruction::JumpIfZero));
        out.push(Instruction::Increment);
        out.push(Instruction::MoveTape(Direction::Left));
        out.push(Instruction::MoveTape(Direction::Right));
        out
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::End => write!(f, "END"),
            Instruction::ReadObservation => write!(f, "READ"),
            Instruction::ReadRewardSign => write!(f, "SIGN"),
            Instruction::WriteSymbol => write!(f, "WRITE"),
            Instruction::LoadConst(c) => write!(f, "LOAD {c}"),
            Instruction::JumpIfZero(t) => write!(f, "JZ {t}"),
            Instruction::Increment => write!(f, "INC"),
            Instruction::MoveTape(Direction::Left) => write!(f, "MOVE L"),
            Instruction::MoveTape(Direction::Right) => write!(f, "MOVE R"),
        }
    }
}

impl FromStr for Instruction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let operand = |w: &str, bits: usize| -> Result<u8> {
            let v: u8 = w
                .parse()
                .map_err(|_| Error::Parse(format!("bad operand {w:?} in {s:?}")))?;
            if (v as usize) >= 1 << bits {
                return Err(Error::Parse(format!("operand {v} too wide in {s:?}")));
            }
            Ok(v)
        };
        Ok(match words.as_slice() {
            ["END"] => Instruction::End,
            ["READ"] => Instruction::ReadObservation,
            ["SIGN"] => Instruction::ReadRewardSign,
            ["WRITE"] => Instruction::WriteSymbol,
            ["LOAD", c] => Instruction::LoadConst(operand(c, CONST_BITS)?),
            ["JZ", t] => Instruction::JumpIfZero(operand(t, TARGET_BITS)?),
            ["INC"] => Instruction::Increment,
            ["MOVE", "L"] => Instruction::MoveTape(Direction::Left),
            ["MOVE", "R"] => Instruction::MoveTape(Direction::Right),
            _ => return Err(Error::Parse(format!("unknown instruction {s:?}"))),
        })
    }
}

fn push_uint(bits: &mut Vec<bool>, value: u64, width: usize) {
    for i in (0..width).rev() {
        bits.push((value >> i) & 1 == 1);
    }
}

fn read_uint(bits: &[bool], pos: usize, width: usize) -> Option<u64> {
    let slice = bits.get(pos..pos + width)?;
    Some(slice.iter().fold(0, |acc, &b| (acc << 1) | b as u64))
}

/// A decoded program together with its exact code.
///
/// Programs order by code, lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Program {
    code: Vec<bool>,
    instructions: Vec<Instruction>,
}

impl Program {
    /// Builds a program from instructions; the last (and only the last)
    /// instruction must be `END`.
    pub fn assemble(instructions: &[Instruction]) -> Result<Program> {
        let mut code = Vec::new();
        for i in instructions {
            i.encode_into(&mut code);
        }
        let program = decode(&code)?;
        if program.instructions.len() != instructions.len() {
            return Err(Error::Decode {
                position: program.length_bits(),
                reason: "END before the last instruction".into(),
            });
        }
        Ok(program)
    }

    /// Parses a `;`- or newline-separated assembly listing, e.g. `READ; END`.
    pub fn from_asm(text: &str) -> Result<Program> {
        let instructions = text
            .split([';', '\n'])
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                // Accept disassembly output: "3: JZ 0".
                let l = l.split_once(':').map_or(l, |(_, rest)| rest.trim());
                l.parse()
            })
            .collect::<Result<Vec<Instruction>>>()?;
        Program::assemble(&instructions)
    }

    pub fn code(&self) -> &[bool] {
        &self.code
    }

    pub fn length_bits(&self) -> usize {
        self.code.len()
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    /// The code packed into hex digits, zero padded to a whole nibble.
    pub fn to_hex(&self) -> String {
        self.code
            .chunks(4)
            .map(|chunk| {
                let v = (0..4).fold(0u32, |acc, i| {
                    (acc << 1) | chunk.get(i).copied().unwrap_or(false) as u32
                });
                char::from_digit(v, 16).expect("nibble")
            })
            .collect()
    }

    /// Inverse of [`Program::to_hex`]: the padding must be zero and shorter than a nibble.
    pub fn from_hex(hex: &str) -> Result<Program> {
        let mut bits = Vec::with_capacity(hex.len() * 4);
        for (i, c) in hex.trim().chars().enumerate() {
            let v = c.to_digit(16).ok_or_else(|| Error::Decode {
                position: 4 * i,
                reason: format!("not a hex digit: {c:?}"),
            })?;
            push_uint(&mut bits, v as u64, 4);
        }
        let program = decode(&bits)?;
        let rest = &bits[program.length_bits()..];
        if rest.len() >= 4 || rest.iter().any(|&b| b) {
            return Err(Error::Decode {
                position: program.length_bits(),
                reason: "trailing data after END".into(),
            });
        }
        Ok(program)
    }

    pub fn code_string(&self) -> String {
        self.code.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// Executes one cycle, emitting exactly `arity` symbols.
    pub fn run_cycle(
        &self,
        state: &mut MachineState,
        input: CycleInput,
        arity: usize,
        budget: RunBudget,
    ) -> CycleOutcome {
        state.input_cursor += 1;
        let mut symbols = Vec::with_capacity(arity);
        let mut pc = 0usize;
        let mut steps = 0u64;
        loop {
            if steps >= budget.steps_per_cycle {
                state.output_count += arity;
                return CycleOutcome {
                    symbols: vec![0; arity],
                    steps_used: steps,
                    timed_out: true,
                };
            }
            steps += 1;
            let cell = state.cell();
            match self.instructions[pc] {
                Instruction::End => break,
                Instruction::ReadObservation => *state.cell_mut() = input.primary,
                Instruction::ReadRewardSign => *state.cell_mut() = input.flag as u64,
                Instruction::WriteSymbol => {
                    if symbols.len() < arity {
                        symbols.push(cell);
                    }
                }
                Instruction::LoadConst(c) => *state.cell_mut() = c as u64,
                Instruction::JumpIfZero(t) => {
                    if cell == 0 {
                        pc = t as usize;
                        continue;
                    }
                }
                Instruction::Increment => *state.cell_mut() = cell.saturating_add(1),
                Instruction::MoveTape(d) => state.move_head(d),
            }
            pc += 1;
        }
        let fill = state.cell();
        symbols.resize(arity, fill);
        state.output_count += arity;
        CycleOutcome {
            symbols,
            steps_used: steps,
            timed_out: false,
        }
    }
}

impl fmt::Display for Program {
    /// Disassembly listing, one numbered instruction per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, ins) in self.instructions.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{i}: {ins}")?;
        }
        Ok(())
    }
}

/// Decodes the shortest prefix of `bits` that forms a program.
pub fn decode(bits: &[bool]) -> Result<Program> {
    let mut pos = 0;
    let mut instructions = Vec::new();
    loop {
        let opcode = read_uint(bits, pos, OPCODE_BITS).ok_or_else(|| Error::Decode {
            position: pos,
            reason: "missing END".into(),
        })?;
        let operand_pos = pos + OPCODE_BITS;
        let operand = |width: usize| {
            read_uint(bits, operand_pos, width).ok_or_else(|| Error::Decode {
                position: operand_pos,
                reason: "truncated operand".into(),
            })
        };
        let ins = match opcode {
            0 => Instruction::End,
            1 => Instruction::ReadObservation,
            2 => Instruction::ReadRewardSign,
            3 => Instruction::WriteSymbol,
            4 => Instruction::LoadConst(operand(CONST_BITS)? as u8),
            5 => Instruction::JumpIfZero(operand(TARGET_BITS)? as u8),
            6 => Instruction::Increment,
            7 => Instruction::MoveTape(if operand(1)? == 1 {
                Direction::Right
            } else {
                Direction::Left
            }),
            _ => unreachable!("3-bit opcode"),
        };
        pos += ins.width();
        instructions.push(ins);
        if ins == Instruction::End {
            break;
        }
    }
    for (i, ins) in instructions.iter().enumerate() {
        if let Instruction::JumpIfZero(t) = ins {
            if *t as usize >= instructions.len() {
                return Err(Error::Decode {
                    position: i,
                    reason: format!("jump target {t} outside a {}-instruction program", instructions.len()),
                });
            }
        }
    }
    Ok(Program {
        code: bits[..pos].to_vec(),
        instructions,
    })
}

/// Every valid program of at most `max_bits` bits, in code order.
pub fn enumerate_programs(max_bits: usize) -> Vec<Program> {
    fn extend(prefix: &mut Vec<Instruction>, used: usize, max_bits: usize, out: &mut Vec<Program>) {
        for ins in Instruction::all() {
            let width = used + ins.width();
            if width > max_bits {
                continue;
            }
            prefix.push(ins);
            if ins == Instruction::End {
                if let Ok(p) = Program::assemble(prefix) {
                    out.push(p);
                }
            } else {
                extend(prefix, width, max_bits, out);
            }
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), 0, max_bits, &mut out);
    out.sort();
    out
}

/// Per-cycle step limit `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RunBudget {
    pub steps_per_cycle: u64,
}

impl RunBudget {
    pub fn new(steps_per_cycle: u64) -> Result<Self> {
        if steps_per_cycle == 0 {
            return Err(Error::out_of_range("steps per cycle", 0, ">= 1"));
        }
        Ok(RunBudget { steps_per_cycle })
    }
}

/// The two input channels of a cycle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CycleInput {
    pub primary: u64,
    pub flag: bool,
}

impl CycleInput {
    /// What a policy sees: the previous percept, or zeros in cycle 1.
    pub fn for_policy(x_prev: Option<&Percept>) -> Self {
        match x_prev {
            Some(x) => CycleInput {
                primary: x.observation as u64,
                flag: x.reward.is_positive(),
            },
            None => CycleInput::default(),
        }
    }

    /// What an environment sees: the current action.
    pub fn for_env(y: ActionSymbol) -> Self {
        CycleInput {
            primary: y.0 as u64,
            flag: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleOutcome {
    pub symbols: Vec<u64>,
    pub steps_used: u64,
    pub timed_out: bool,
}

/// Work tape and cursors; persists across cycles.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MachineState {
    tape: Vec<u64>,
    head: usize,
    /// Cycles of input consumed so far.
    pub input_cursor: usize,
    /// Output symbols emitted so far.
    pub output_count: usize,
}

impl Default for MachineState {
    fn default() -> Self {
        MachineState {
            tape: vec![0],
            head: 0,
            input_cursor: 0,
            output_count: 0,
        }
    }
}

impl MachineState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn tape(&self) -> &[u64] {
        &self.tape
    }

    fn cell(&self) -> u64 {
        self.tape[self.head]
    }

    fn cell_mut(&mut self) -> &mut u64 {
        &mut self.tape[self.head]
    }

    fn move_head(&mut self, d: Direction) {
        match d {
            Direction::Left => self.head = self.head.saturating_sub(1),
            Direction::Right => {
                self.head += 1;
                if self.head == self.tape.len() {
                    self.tape.push(0);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolicyStep {
    pub action: ActionSymbol,
    pub state: MachineState,
    pub steps_used: u64,
    pub timed_out: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvStep {
    pub percept: Percept,
    pub state: MachineState,
    pub steps_used: u64,
    pub timed_out: bool,
}

/// One policy cycle: read the previous percept, emit an action.
pub fn policy_cycle(
    p: &Program,
    mut s: MachineState,
    x_prev: Option<&Percept>,
    budget: RunBudget,
    space: &PerceptSpace,
) -> PolicyStep {
    let out = p.run_cycle(&mut s, CycleInput::for_policy(x_prev), 1, budget);
    PolicyStep {
        action: ActionSymbol((out.symbols[0] % space.num_actions() as u64) as usize),
        state: s,
        steps_used: out.steps_used,
        timed_out: out.timed_out,
    }
}

/// One environment cycle: read the action, emit a percept.
pub fn env_cycle(
    q: &Program,
    mut s: MachineState,
    y: ActionSymbol,
    budget: RunBudget,
    space: &PerceptSpace,
) -> EnvStep {
    let out = q.run_cycle(&mut s, CycleInput::for_env(y), 2, budget);
    EnvStep {
        percept: symbols_to_percept(out.symbols[0], out.symbols[1], space),
        state: s,
        steps_used: out.steps_used,
        timed_out: out.timed_out,
    }
}

pub(crate) fn symbols_to_percept(reward: u64, observation: u64, space: &PerceptSpace) -> Percept {
    let r = (reward % space.rewards().len() as u64) as usize;
    let o = (observation % space.num_observations() as u64) as usize;
    Percept::new(space.rewards()[r].clone(), o)
}

/// Replays `q` on the actions of `h`; returns the final machine state if
/// every percept of `h` is reproduced without a timeout.
pub fn replay_env(q: &Program, h: &History, budget: RunBudget, space: &PerceptSpace) -> Option<MachineState> {
    let mut state = MachineState::new();
    for (y, x) in h.cycles() {
        let step = env_cycle(q, state, *y, budget, space);
        if step.timed_out || &step.percept != x {
            return None;
        }
        state = step.state;
    }
    Some(state)
}

/// Runs a policy program on the percepts of `h` and returns its next action.
/// The program's own earlier outputs are ignored: it always continues from
/// the recorded history.
pub fn policy_action(p: &Program, h: &History, budget: RunBudget, space: &PerceptSpace) -> PolicyStep {
    let mut state = MachineState::new();
    let mut prev: Option<&Percept> = None;
    for (_, x) in h.cycles() {
        state = policy_cycle(p, state, prev, budget, space).state;
        prev = Some(x);
    }
    policy_cycle(p, state, prev, budget, space)
}

/// The environments in `pool` that reproduce `h`.
pub fn consistent_envs<'a>(
    pool: &'a [Program],
    h: &History,
    budget: RunBudget,
    space: &PerceptSpace,
) -> Vec<&'a Program> {
    pool.iter()
        .filter(|q| replay_env(q, h, budget, space).is_some())
        .collect()
}

/// A program used as a policy.
#[derive(Clone, Debug)]
pub struct ProgramPolicy {
    pub program: Program,
    pub budget: RunBudget,
    pub space: PerceptSpace,
}

impl ProgramPolicy {
    pub fn new(program: Program, budget: RunBudget, space: PerceptSpace) -> Self {
        ProgramPolicy { program, budget, space }
    }
}

impl crate::interaction::Policy for ProgramPolicy {
    fn act(&self, history: &History) -> Result<ActionSymbol> {
        Ok(policy_action(&self.program, &history.completed(), self.budget, &self.space).action)
    }
}
