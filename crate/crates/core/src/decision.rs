//! The per-cycle action decision. [`DecisionState`] runs the shipped rule
//! file through the logic engine; [`DirectDecision`] codes the same table
//! by hand and serves as its cross-check.

use std::cell::RefCell;

use thiserror::Error;

use crate::actions::ActionCommand;
use crate::geometry::normalize_angle;
use crate::logic::{
    parse_program, solve, EngineError, Externals, ParseError, PredKey, Program, SolveLimits, Term,
};
use crate::sensors::{LookOutcome, PerceptionRecord};

/// The decision program in the engine's rule syntax.
pub const BUILTIN_RULES: &str = include_str!("../rules/search_target.pl");

pub fn builtin_program() -> &'static str {
    BUILTIN_RULES
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("look request failed: {0}")]
    Look(String),
    #[error("decision program produced an unusable operator `{0}`")]
    BadOperator(String),
    #[error("decision program has no derivation for this cycle")]
    NoDerivation,
}

/// Executes `looking` on the executor and returns what it saw.
pub type LookFn<'a> = dyn FnMut() -> Result<LookOutcome, String> + 'a;

pub trait DecisionMaker: Send {
    fn step(
        &mut self,
        perception: &PerceptionRecord,
        look: &mut LookFn<'_>,
    ) -> Result<ActionCommand, DecisionError>;

    fn cycle_count(&self) -> u64;

    /// Heading recorded on the first cycle.
    fn initial_direction(&self) -> Option<f64>;
}

/// The decision table:
///
/// | found | obstacle | command |
/// |-------|----------|---------|
/// | yes   | no       | `forward(found_dir)` |
/// | yes   | yes      | `search(found_dir)` |
/// | no    | no       | `forward(initial_dir)` |
/// | no    | yes      | `search(initial_dir)` |
pub fn decide_action(
    found: bool,
    found_dir: f64,
    initial_dir: f64,
    obstacle: bool,
) -> ActionCommand {
    let direction = if found { found_dir } else { initial_dir };
    if obstacle {
        ActionCommand::Search(direction)
    } else {
        ActionCommand::Forward(direction)
    }
}

#[derive(Debug, Clone, Default)]
pub struct DirectDecision {
    initial: Option<f64>,
    cycles: u64,
}

impl DirectDecision {
    pub fn new() -> Self {
        Self::default()
    }
}

impl DecisionMaker for DirectDecision {
    fn step(
        &mut self,
        perception: &PerceptionRecord,
        look: &mut LookFn<'_>,
    ) -> Result<ActionCommand, DecisionError> {
        let command = match self.initial {
            None => {
                self.initial = Some(perception.direction);
                ActionCommand::None
            }
            Some(initial) => {
                let seen = look().map_err(DecisionError::Look)?;
                decide_action(seen.found, seen.bearing, initial, perception.obstacle)
            }
        };
        self.cycles += 1;
        Ok(command)
    }

    fn cycle_count(&self) -> u64 {
        self.cycles
    }

    fn initial_direction(&self) -> Option<f64> {
        self.initial
    }
}

/// Rule-file decision state: the program plus its dynamic facts, `first`
/// until the first cycle and `initial_state/3` afterwards.
#[derive(Debug, Clone)]
pub struct DecisionState {
    program: Program,
    cycles: u64,
    limits: SolveLimits,
    log: Vec<String>,
}

impl DecisionState {
    pub fn new(mut program: Program) -> Self {
        program.assert_fact(Term::atom("first"));
        Self {
            program,
            cycles: 0,
            limits: SolveLimits::default(),
            log: Vec::new(),
        }
    }

    pub fn builtin() -> Self {
        Self::from_rules(BUILTIN_RULES).expect("shipped rule file parses")
    }

    pub fn from_rules(text: &str) -> Result<Self, ParseError> {
        Ok(Self::new(parse_program(text)?))
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn has_first(&self) -> bool {
        !self.program.facts(&PredKey::new("first", 0)).is_empty()
    }

    /// `(direction, x, y)` of every `initial_state/3` fact.
    pub fn initial_states(&self) -> Vec<(f64, f64, f64)> {
        self.program
            .facts(&PredKey::new("initial_state", 3))
            .iter()
            .filter_map(|c| match c.head.args() {
                [Term::Number(d), Term::Number(x), Term::Number(y)] => Some((*d, *x, *y)),
                _ => None,
            })
            .collect()
    }

    /// Messages the program logged during the last cycle.
    pub fn log(&self) -> &[String] {
        &self.log
    }
}

fn operator_to_command(op: &Term) -> Result<ActionCommand, DecisionError> {
    let bad = || DecisionError::BadOperator(op.to_string());
    match op {
        Term::Atom(a) if a == "none" => Ok(ActionCommand::None),
        Term::Compound { functor, args } if args.len() == 1 => {
            let Term::Number(dir) = args[0] else {
                return Err(bad());
            };
            let dir = normalize_angle(dir).map_err(|_| bad())?;
            match functor.as_str() {
                "forward_Qbo" => Ok(ActionCommand::Forward(dir)),
                "search_Qbo" => Ok(ActionCommand::Search(dir)),
                _ => Err(bad()),
            }
        }
        _ => Err(bad()),
    }
}

impl DecisionMaker for DecisionState {
    fn step(
        &mut self,
        perception: &PerceptionRecord,
        look: &mut LookFn<'_>,
    ) -> Result<ActionCommand, DecisionError> {
        let pending: RefCell<Option<LookOutcome>> = RefCell::new(None);
        let look_error: RefCell<Option<String>> = RefCell::new(None);
        let messages: RefCell<Vec<String>> = RefCell::new(Vec::new());
        let mut looked = false;

        let mut externals = Externals::new();
        externals
            .register("send_command", 2, |args: &[Term]| {
                if args[1] != Term::atom("looking_Qbo") {
                    return Err(format!("unsupported command {}", args[1]));
                }
                if looked {
                    return Err("looking requested twice in one cycle".into());
                }
                looked = true;
                match look() {
                    Ok(outcome) => {
                        *pending.borrow_mut() = Some(outcome);
                        Ok(Some(args.to_vec()))
                    }
                    Err(e) => {
                        *look_error.borrow_mut() = Some(e.clone());
                        Err(e)
                    }
                }
            })
            .register("read_look_reply", 3, |args: &[Term]| {
                let outcome = pending
                    .borrow_mut()
                    .take()
                    .ok_or_else(|| "no look reply pending".to_string())?;
                let found = Term::atom(if outcome.found { "true" } else { "false" });
                Ok(Some(vec![
                    args[0].clone(),
                    found,
                    Term::Number(outcome.bearing),
                ]))
            })
            .register("log", 1, |args: &[Term]| {
                messages.borrow_mut().push(args[0].to_string());
                Ok(Some(args.to_vec()))
            });

        let op = Term::var(0);
        let goal = Term::compound(
            "search_target",
            vec![
                Term::Number(perception.direction),
                Term::Number(perception.x),
                Term::Number(perception.y),
                op.clone(),
                Term::Number(if perception.obstacle { 1.0 } else { 0.0 }),
                Term::atom("input"),
                Term::atom("output"),
            ],
        );
        let result = solve(&mut self.program, &goal, &mut externals, self.limits);
        drop(externals);
        self.log = messages.into_inner();
        let solution = match result {
            Ok(s) => s,
            Err(e) => {
                return Err(match look_error.into_inner() {
                    Some(msg) => DecisionError::Look(msg),
                    None => e.into(),
                })
            }
        };
        let solution = solution.ok_or(DecisionError::NoDerivation)?;
        let command = operator_to_command(&solution.apply(&op))?;
        self.cycles += 1;
        Ok(command)
    }

    fn cycle_count(&self) -> u64 {
        self.cycles
    }

    fn initial_direction(&self) -> Option<f64> {
        self.initial_states().first().map(|s| s.0)
    }
}
