//! Depth-first, leftmost-goal resolution with cut.
//!
//! Goals are kept in a shared continuation list; each choice point stores
//! the continuation it resumes, the clause snapshot still to try and the
//! trail height to unwind to. A cut truncates the choice-point stack to the
//! height recorded when its clause was entered.

use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use thiserror::Error;

use super::program::{Clause, Goal, Program};
use super::term::{PredKey, Substitution, Term, VarId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("resolution depth limit of {limit} exceeded")]
    DepthExceeded { limit: usize },
    #[error("unknown predicate {0}")]
    UnknownPredicate(PredKey),
    #[error("instantiation error: {0}")]
    Instantiation(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("external predicate {pred} failed: {message}")]
    External { pred: PredKey, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveLimits {
    pub max_depth: usize,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self { max_depth: 10_000 }
    }
}

/// Host callback for an external predicate. It receives the fully
/// substituted arguments and returns terms to unify with them pairwise,
/// `Ok(None)` to fail, or an error message to abort the derivation.
pub type ExternalFn<'a> = Box<dyn FnMut(&[Term]) -> Result<Option<Vec<Term>>, String> + 'a>;

#[derive(Default)]
pub struct Externals<'a> {
    map: HashMap<PredKey, ExternalFn<'a>>,
}

impl<'a> Externals<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        name: &str,
        arity: usize,
        f: impl FnMut(&[Term]) -> Result<Option<Vec<Term>>, String> + 'a,
    ) -> &mut Self {
        self.map.insert(PredKey::new(name, arity), Box::new(f));
        self
    }

    pub fn contains(&self, key: &PredKey) -> bool {
        self.map.contains_key(key)
    }
}

struct Frame {
    goal: Goal,
    cut_barrier: usize,
    depth: usize,
    next: Cont,
}

type Cont = Option<Rc<Frame>>;

impl Drop for Frame {
    // long conjunctions would otherwise drop recursively
    fn drop(&mut self) {
        let mut next = self.next.take();
        while let Some(rc) = next {
            match Rc::try_unwrap(rc) {
                Ok(mut frame) => next = frame.next.take(),
                Err(_) => break,
            }
        }
    }
}

struct ChoicePoint {
    goal: Term,
    key: PredKey,
    depth: usize,
    rest: Cont,
    clauses: Vec<Arc<Clause>>,
    next: usize,
    trail_mark: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    trials: HashMap<(PredKey, usize), u64>,
    pub total_trials: u64,
    pub max_depth_seen: usize,
}

impl SolveStats {
    /// How many times clause `index` of `key` was tried against a goal.
    /// Indices count static clauses first, then dynamic facts.
    pub fn clause_trials(&self, key: &PredKey, index: usize) -> u64 {
        self.trials.get(&(key.clone(), index)).copied().unwrap_or(0)
    }
}

pub struct Solver<'p, 'e, 'a> {
    program: &'p mut Program,
    externals: &'e mut Externals<'a>,
    limits: SolveLimits,
    subst: Substitution,
    trail: Vec<VarId>,
    choicepoints: Vec<ChoicePoint>,
    next_var: usize,
    initial: Option<Cont>,
    stats: SolveStats,
}

impl<'p, 'e, 'a> Solver<'p, 'e, 'a> {
    pub fn new(
        program: &'p mut Program,
        goal: &Term,
        externals: &'e mut Externals<'a>,
        limits: SolveLimits,
    ) -> Self {
        let start = Some(Rc::new(Frame {
            goal: Goal::Call(goal.clone()),
            cut_barrier: 0,
            depth: 0,
            next: None,
        }));
        Self {
            program,
            externals,
            limits,
            subst: Substitution::new(),
            trail: Vec::new(),
            choicepoints: Vec::new(),
            next_var: goal.max_var().map_or(0, |v| v + 1),
            initial: Some(start),
            stats: SolveStats::default(),
        }
    }

    pub fn stats(&self) -> &SolveStats {
        &self.stats
    }

    /// The next solution by backtracking, or `None` once exhausted.
    pub fn next_solution(&mut self) -> Result<Option<Substitution>, EngineError> {
        let cont = match self.initial.take() {
            Some(start) => start,
            None => match self.backtrack()? {
                Some(c) => c,
                None => return Ok(None),
            },
        };
        if self.run(cont)? {
            Ok(Some(self.subst.clone()))
        } else {
            Ok(None)
        }
    }

    fn run(&mut self, mut cont: Cont) -> Result<bool, EngineError> {
        loop {
            let Some(frame) = cont else {
                return Ok(true);
            };
            let rest = frame.next.clone();
            let step = match &frame.goal {
                Goal::Cut => {
                    self.choicepoints.truncate(frame.cut_barrier);
                    Some(rest)
                }
                Goal::Call(goal) => {
                    if frame.depth > self.limits.max_depth {
                        return Err(EngineError::DepthExceeded {
                            limit: self.limits.max_depth,
                        });
                    }
                    self.stats.max_depth_seen = self.stats.max_depth_seen.max(frame.depth);
                    self.call(goal, frame.depth, rest)?
                }
            };
            cont = match step {
                Some(c) => c,
                None => match self.backtrack()? {
                    Some(c) => c,
                    None => return Ok(false),
                },
            };
        }
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().expect("trail above mark");
            self.subst.unbind(v);
        }
    }

    fn unify(&mut self, a: &Term, b: &Term) -> bool {
        let mark = self.trail.len();
        let ok = self.subst.unify_in_place(a, b, &mut self.trail);
        if !ok {
            self.undo(mark);
        }
        ok
    }

    fn rename(&mut self, clause: &Clause) -> (Term, Vec<Goal>) {
        let base = self.next_var;
        self.next_var += clause.var_count();
        let head = clause.head.offset_vars(base);
        let body = clause
            .body
            .iter()
            .map(|g| match g {
                Goal::Call(t) => Goal::Call(t.offset_vars(base)),
                Goal::Cut => Goal::Cut,
            })
            .collect();
        (head, body)
    }

    fn backtrack(&mut self) -> Result<Option<Cont>, EngineError> {
        while let Some(cp) = self.choicepoints.pop() {
            self.undo(cp.trail_mark);
            if let Some(c) =
                self.try_clauses(cp.goal, cp.key, cp.depth, cp.rest, cp.clauses, cp.next)
            {
                return Ok(Some(c));
            }
        }
        Ok(None)
    }

    fn try_clauses(
        &mut self,
        goal: Term,
        key: PredKey,
        depth: usize,
        rest: Cont,
        clauses: Vec<Arc<Clause>>,
        start: usize,
    ) -> Option<Cont> {
        let barrier = self.choicepoints.len();
        for index in start..clauses.len() {
            let mark = self.trail.len();
            let (head, body) = self.rename(&clauses[index]);
            *self.stats.trials.entry((key.clone(), index)).or_default() += 1;
            self.stats.total_trials += 1;
            if !self.unify(&goal, &head) {
                continue;
            }
            let mut cont = rest.clone();
            for g in body.into_iter().rev() {
                cont = Some(Rc::new(Frame {
                    goal: g,
                    cut_barrier: barrier,
                    depth: depth + 1,
                    next: cont,
                }));
            }
            if index + 1 < clauses.len() {
                self.choicepoints.push(ChoicePoint {
                    goal,
                    key,
                    depth,
                    rest,
                    clauses,
                    next: index + 1,
                    trail_mark: mark,
                });
            }
            return Some(cont);
        }
        None
    }

    fn call(&mut self, goal: &Term, depth: usize, rest: Cont) -> Result<Option<Cont>, EngineError> {
        let goal = self.subst.walk(goal).clone();
        let key = match &goal {
            Term::Var(_) => return Err(EngineError::Instantiation("unbound goal".into())),
            Term::Number(n) => return Err(EngineError::Type(format!("{n} is not callable"))),
            t => t.indicator().expect("atom or compound"),
        };

        match (key.name.as_str(), key.arity) {
            ("true", 0) => return Ok(Some(rest)),
            ("=", 2) => {
                let args = goal.args();
                return Ok(self.unify(&args[0], &args[1]).then_some(rest));
            }
            ("assert", 1) => {
                let fact = self.callable_arg(&goal, "assert/1")?;
                self.program.assert_fact(fact);
                return Ok(Some(rest));
            }
            ("retract", 1) => {
                let pattern = self.callable_arg(&goal, "retract/1")?;
                let fact_key = pattern.indicator().expect("callable");
                let facts = self.program.facts(&fact_key).to_vec();
                for (i, fact) in facts.iter().enumerate() {
                    let (head, _) = self.rename(fact);
                    if self.unify(&pattern, &head) {
                        self.program.remove_fact(&fact_key, i);
                        return Ok(Some(rest));
                    }
                }
                return Ok(None);
            }
            _ => {}
        }

        if self.program.defines(&key) {
            let clauses = self.program.candidates(&key);
            return Ok(self.try_clauses(goal, key, depth, rest, clauses, 0));
        }

        if let Some(f) = self.externals.map.get_mut(&key) {
            let args: Vec<Term> = goal.args().iter().map(|a| self.subst.apply(a)).collect();
            let out = f(&args).map_err(|message| EngineError::External {
                pred: key.clone(),
                message,
            })?;
            let Some(out) = out else {
                return Ok(None);
            };
            if out.len() != args.len() {
                return Err(EngineError::External {
                    pred: key,
                    message: format!("returned {} terms for {} arguments", out.len(), args.len()),
                });
            }
            let mark = self.trail.len();
            for (a, b) in goal.args().iter().zip(&out) {
                if !self.unify(a, b) {
                    self.undo(mark);
                    return Ok(None);
                }
            }
            return Ok(Some(rest));
        }

        Err(EngineError::UnknownPredicate(key))
    }

    fn callable_arg(&self, goal: &Term, what: &str) -> Result<Term, EngineError> {
        let arg = self.subst.apply(&goal.args()[0]);
        match arg {
            Term::Atom(_) | Term::Compound { .. } => Ok(arg),
            Term::Var(_) => Err(EngineError::Instantiation(format!(
                "{what} needs a callable term"
            ))),
            Term::Number(n) => Err(EngineError::Type(format!("{what}: {n} is not callable"))),
        }
    }
}

/// First solution of `goal`, or `None` when the derivation fails.
pub fn solve(
    program: &mut Program,
    goal: &Term,
    externals: &mut Externals<'_>,
    limits: SolveLimits,
) -> Result<Option<Substitution>, EngineError> {
    Solver::new(program, goal, externals, limits).next_solution()
}
