use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::term::{PredKey, Term, VarId};

#[derive(Debug, Clone, PartialEq)]
pub enum Goal {
    Call(Term),
    Cut,
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Goal::Call(t) => write!(f, "{t}"),
            Goal::Cut => f.write_str("!"),
        }
    }
}

/// A fact or rule. Variables are numbered `0..var_count` within the clause
/// and renamed apart at each use.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub head: Term,
    pub body: Vec<Goal>,
    pub var_names: Vec<String>,
}

impl Clause {
    pub fn new(head: Term, body: Vec<Goal>, var_names: Vec<String>) -> Self {
        debug_assert!(matches!(head, Term::Atom(_) | Term::Compound { .. }));
        Self {
            head,
            body,
            var_names,
        }
    }

    /// A body-less clause; variables are renumbered from zero.
    pub fn fact(head: Term) -> Self {
        fn renumber(t: &Term, seen: &mut Vec<VarId>) -> Term {
            match t {
                Term::Var(v) => {
                    let id = seen.iter().position(|s| s == v).unwrap_or_else(|| {
                        seen.push(*v);
                        seen.len() - 1
                    });
                    Term::Var(VarId(id))
                }
                Term::Compound { functor, args } => Term::Compound {
                    functor: functor.clone(),
                    args: args.iter().map(|a| renumber(a, seen)).collect(),
                },
                other => other.clone(),
            }
        }
        let mut seen = Vec::new();
        let head = renumber(&head, &mut seen);
        Self {
            head,
            body: Vec::new(),
            var_names: (0..seen.len()).map(|i| format!("_{i}")).collect(),
        }
    }

    pub fn var_count(&self) -> usize {
        self.var_names.len()
    }

    pub fn key(&self) -> PredKey {
        self.head
            .indicator()
            .expect("clause heads are atoms or compounds")
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, g) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{g}")?;
            }
        }
        f.write_str(".")
    }
}

/// Static clauses in source order plus the dynamic fact database that
/// `assert/1` and `retract/1` operate on.
#[derive(Debug, Clone, Default)]
pub struct Program {
    clauses: HashMap<PredKey, Vec<Arc<Clause>>>,
    order: Vec<PredKey>,
    dynamic_db: HashMap<PredKey, Vec<Arc<Clause>>>,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_clause(&mut self, clause: Arc<Clause>) {
        let key = clause.key();
        let entry = self.clauses.entry(key.clone()).or_default();
        if entry.is_empty() {
            self.order.push(key);
        }
        entry.push(clause);
    }

    pub fn clauses(&self, key: &PredKey) -> &[Arc<Clause>] {
        self.clauses.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.values().map(Vec::len).sum()
    }

    /// Predicates with static clauses, in first-appearance order.
    pub fn predicates(&self) -> &[PredKey] {
        &self.order
    }

    pub fn facts(&self, key: &PredKey) -> &[Arc<Clause>] {
        self.dynamic_db.get(key).map_or(&[], Vec::as_slice)
    }

    /// True when `key` has static clauses or has ever held a dynamic fact.
    pub fn defines(&self, key: &PredKey) -> bool {
        self.clauses.contains_key(key) || self.dynamic_db.contains_key(key)
    }

    /// Static clauses followed by dynamic facts, snapshotted for one call.
    pub(crate) fn candidates(&self, key: &PredKey) -> Vec<Arc<Clause>> {
        self.clauses(key)
            .iter()
            .chain(self.facts(key))
            .cloned()
            .collect()
    }

    pub fn assert_fact(&mut self, fact: Term) {
        let clause = Clause::fact(fact);
        self.dynamic_db
            .entry(clause.key())
            .or_default()
            .push(Arc::new(clause));
    }

    pub(crate) fn remove_fact(&mut self, key: &PredKey, index: usize) {
        if let Some(facts) = self.dynamic_db.get_mut(key) {
            facts.remove(index);
        }
    }
}
