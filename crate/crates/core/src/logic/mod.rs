//! Ordered-clause logic interpreter: terms, unification without occurs
//! check, depth-first resolution with cut, a dynamic fact database and
//! host-registered external predicates.

mod parser;
mod program;
mod solve;
mod term;

pub use parser::{parse_program, parse_query, ParseError, Query};
pub use program::{Clause, Goal, Program};
pub use solve::{solve, EngineError, ExternalFn, Externals, SolveLimits, SolveStats, Solver};
pub use term::{apply_subst, unify, PredKey, Substitution, Term, VarId};
