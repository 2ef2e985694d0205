use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Atom(String),
    Number(f64),
    Var(VarId),
    Compound { functor: String, args: Vec<Term> },
}

impl Term {
    pub fn atom(name: impl Into<String>) -> Self {
        Term::Atom(name.into())
    }

    pub fn var(id: usize) -> Self {
        Term::Var(VarId(id))
    }

    pub fn compound(functor: impl Into<String>, args: Vec<Term>) -> Self {
        Term::Compound {
            functor: functor.into(),
            args,
        }
    }

    /// Name and arity for atoms and compounds.
    pub fn indicator(&self) -> Option<PredKey> {
        match self {
            Term::Atom(name) => Some(PredKey::new(name, 0)),
            Term::Compound { functor, args } => Some(PredKey::new(functor, args.len())),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound { args, .. } => args,
            _ => &[],
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Term::Var(VarId(v)) => Some(*v),
            Term::Compound { args, .. } => args.iter().filter_map(Term::max_var).max(),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Compound { args, .. } => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub(crate) fn offset_vars(&self, base: usize) -> Term {
        match self {
            Term::Var(VarId(v)) => Term::Var(VarId(v + base)),
            Term::Compound { functor, args } => Term::Compound {
                functor: functor.clone(),
                args: args.iter().map(|a| a.offset_vars(base)).collect(),
            },
            other => other.clone(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(a) => f.write_str(a),
            Term::Number(n) => write!(f, "{n}"),
            Term::Var(VarId(v)) => write!(f, "_G{v}"),
            Term::Compound { functor, args } if functor == "=" && args.len() == 2 => {
                write!(f, "{} = {}", args[0], args[1])
            }
            Term::Compound { functor, args } => {
                write!(f, "{functor}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Predicate indicator, `name/arity`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredKey {
    pub name: String,
    pub arity: usize,
}

impl PredKey {
    pub fn new(name: &str, arity: usize) -> Self {
        Self {
            name: name.to_owned(),
            arity,
        }
    }
}

impl fmt::Display for PredKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// Variable bindings. No occurs check is performed, so binding a variable
/// to a term containing itself produces a cyclic substitution; the shipped
/// decision program never does this.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Substitution {
    bindings: HashMap<VarId, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, v: VarId) -> Option<&Term> {
        self.bindings.get(&v)
    }

    pub fn bind(&mut self, v: VarId, t: Term) {
        self.bindings.insert(v, t);
    }

    pub(crate) fn unbind(&mut self, v: VarId) {
        self.bindings.remove(&v);
    }

    /// Follows variable links until reaching a non-variable or an unbound variable.
    pub fn walk<'a>(&'a self, mut t: &'a Term) -> &'a Term {
        while let Term::Var(v) = t {
            match self.bindings.get(v) {
                Some(next) => t = next,
                None => break,
            }
        }
        t
    }

    /// Replaces bound variables transitively.
    pub fn apply(&self, t: &Term) -> Term {
        match self.walk(t) {
            Term::Compound { functor, args } => Term::Compound {
                functor: functor.clone(),
                args: args.iter().map(|a| self.apply(a)).collect(),
            },
            other => other.clone(),
        }
    }

    /// Extends `self` in place, recording each new binding on `trail`.
    /// On failure the caller undoes via the trail.
    pub(crate) fn unify_in_place(&mut self, a: &Term, b: &Term, trail: &mut Vec<VarId>) -> bool {
        let a = self.walk(a).clone();
        let b = self.walk(b).clone();
        match (a, b) {
            (Term::Var(x), Term::Var(y)) if x == y => true,
            (Term::Var(x), other) | (other, Term::Var(x)) => {
                self.bind(x, other);
                trail.push(x);
                true
            }
            (Term::Atom(x), Term::Atom(y)) => x == y,
            (Term::Number(x), Term::Number(y)) => x == y,
            (
                Term::Compound {
                    functor: f1,
                    args: a1,
                },
                Term::Compound {
                    functor: f2,
                    args: a2,
                },
            ) => {
                f1 == f2
                    && a1.len() == a2.len()
                    && a1
                        .iter()
                        .zip(&a2)
                        .all(|(x, y)| self.unify_in_place(x, y, trail))
            }
            _ => false,
        }
    }
}

/// Most general unifier of `a` and `b` extending `s`, or `None`.
pub fn unify(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let mut out = s.clone();
    let mut trail = Vec::new();
    out.unify_in_place(a, b, &mut trail).then_some(out)
}

pub fn apply_subst(s: &Substitution, t: &Term) -> Term {
    s.apply(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(args: Vec<Term>) -> Term {
        Term::compound("f", args)
    }

    #[test]
    fn unify_examples() {
        let s = unify(&Term::var(0), &Term::atom("a"), &Substitution::new()).unwrap();
        assert_eq!(s.get(VarId(0)), Some(&Term::atom("a")));
        assert_eq!(s.len(), 1);

        let s = unify(
            &f(vec![Term::var(0), Term::atom("b")]),
            &f(vec![Term::atom("a"), Term::var(1)]),
            &Substitution::new(),
        )
        .unwrap();
        assert_eq!(s.apply(&Term::var(0)), Term::atom("a"));
        assert_eq!(s.apply(&Term::var(1)), Term::atom("b"));

        assert!(unify(
            &f(vec![Term::var(0)]),
            &Term::compound("g", vec![Term::var(0)]),
            &Substitution::new()
        )
        .is_none());
        assert!(unify(&Term::Number(1.0), &Term::Number(1.5), &Substitution::new()).is_none());
        assert!(unify(&Term::atom("a"), &Term::Number(1.0), &Substitution::new()).is_none());
    }

    #[test]
    fn apply_examples() {
        let mut s = Substitution::new();
        s.bind(VarId(0), Term::atom("a"));
        assert_eq!(
            apply_subst(&s, &f(vec![Term::var(0), Term::var(1)])),
            f(vec![Term::atom("a"), Term::var(1)])
        );

        let t = f(vec![Term::var(3), Term::Number(2.0)]);
        assert_eq!(apply_subst(&Substitution::new(), &t), t);

        let mut s = Substitution::new();
        s.bind(VarId(0), Term::compound("g", vec![Term::var(1)]));
        s.bind(VarId(1), Term::atom("b"));
        assert_eq!(
            apply_subst(&s, &Term::var(0)),
            Term::compound("g", vec![Term::atom("b")])
        );
    }

    #[test]
    fn display_round_trips_shape() {
        let t = Term::compound("forward_Qbo", vec![Term::Number(30.0)]);
        assert_eq!(t.to_string(), "forward_Qbo(30)");
        assert_eq!(PredKey::new("p", 2).to_string(), "p/2");
    }
}
