use proptest::prelude::*;

use rnav_core::logic::{
    parse_program, parse_query, solve, unify, EngineError, Externals, PredKey, Program,
    SolveLimits, Solver, Substitution, Term,
};

fn term(vars: usize) -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["a", "b", "c"]).prop_map(Term::atom),
        (0i32..3).prop_map(|n| Term::Number(f64::from(n))),
        (0..vars).prop_map(Term::var),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        (
            prop::sample::select(vec!["f", "g"]),
            prop::collection::vec(inner, 1..3),
        )
            .prop_map(|(f, args)| Term::compound(f, args))
    })
}

fn ground() -> impl Strategy<Value = Term> {
    term(1).prop_filter("ground", Term::is_ground)
}

fn has_cycle(s: &Substitution, t: &Term, path: &mut Vec<usize>) -> bool {
    match t {
        Term::Var(v) if path.contains(&v.0) => true,
        Term::Var(v) => match s.get(*v) {
            None => false,
            Some(b) => {
                path.push(v.0);
                let hit = has_cycle(s, b, path);
                path.pop();
                hit
            }
        },
        Term::Compound { args, .. } => args.iter().any(|a| has_cycle(s, a, path)),
        _ => false,
    }
}

fn rename_equal(a: &Term, b: &Term, map: &mut Vec<(usize, usize)>) -> bool {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => match map.iter().find(|(p, q)| *p == x.0 || *q == y.0) {
            Some(&(p, q)) => p == x.0 && q == y.0,
            None => {
                map.push((x.0, y.0));
                true
            }
        },
        (
            Term::Compound {
                functor: f,
                args: xs,
            },
            Term::Compound {
                functor: g,
                args: ys,
            },
        ) => {
            f == g
                && xs.len() == ys.len()
                && xs.iter().zip(ys).all(|(x, y)| rename_equal(x, y, map))
        }
        _ => a == b,
    }
}

fn all_answers(program: &str, query: &str) -> Vec<String> {
    let mut p = parse_program(program).unwrap();
    let q = parse_query(query).unwrap();
    let mut ext = Externals::new();
    let mut solver = Solver::new(&mut p, &q.goal, &mut ext, SolveLimits::default());
    let mut out = Vec::new();
    while let Some(s) = solver.next_solution().unwrap() {
        out.push(s.apply(&q.goal).to_string());
    }
    out
}

proptest! {
    #[test]
    fn unification_is_symmetric(a in term(3), b in term(3)) {
        let empty = Substitution::new();
        let ab = unify(&a, &b, &empty);
        let ba = unify(&b, &a, &empty);
        prop_assert_eq!(ab.is_some(), ba.is_some());
        if let (Some(s1), Some(s2)) = (ab, ba) {
            let pair = Term::compound("p", vec![a.clone(), b.clone()]);
            prop_assume!(!has_cycle(&s1, &pair, &mut Vec::new()) && !has_cycle(&s2, &pair, &mut Vec::new()));
            prop_assert_eq!(s1.apply(&a), s1.apply(&b));
            prop_assert!(rename_equal(&s1.apply(&pair), &s2.apply(&pair), &mut Vec::new()));
        }
    }

    #[test]
    fn ground_terms_unify_iff_equal(a in ground(), b in ground()) {
        prop_assert_eq!(unify(&a, &b, &Substitution::new()).is_some(), a == b);
    }

    #[test]
    fn unify_with_fresh_variable_binds_it(t in ground()) {
        let s = unify(&Term::var(0), &t, &Substitution::new()).unwrap();
        prop_assert_eq!(s.apply(&Term::var(0)), t);
    }

    #[test]
    fn answers_follow_clause_order(names in prop::collection::vec(0u32..50, 1..12)) {
        let program: String = names.iter().map(|n| format!("p(k{n}). ")).collect();
        let expected: Vec<String> = names.iter().map(|n| format!("p(k{n})")).collect();
        prop_assert_eq!(all_answers(&program, "p(X)"), expected);
    }

    #[test]
    fn cut_commits_to_first_answer(n in 1usize..10, cut_clause in 0usize..3) {
        let facts: String = (0..n).map(|i| format!("q({i}). ")).collect();
        let mut rules = ["r(X) :- q(X).".to_string(), "r(late).".to_string(), "r(last).".to_string()];
        rules[cut_clause] = "r(X) :- q(X), !.".into();
        let program = format!("{} {facts}", rules.join(" "));
        let answers = all_answers(&program, "r(X)");
        let mut expected = Vec::new();
        for (i, rule) in rules.iter().enumerate() {
            if rule.starts_with("r(X)") {
                let take = if i == cut_clause { 1 } else { n };
                expected.extend((0..take).map(|k| format!("r({k})")));
            } else {
                expected.push(rule.trim_end_matches('.').to_string());
            }
            if i == cut_clause {
                break;
            }
        }
        prop_assert_eq!(answers, expected);
    }

    #[test]
    fn assert_retract_matches_a_list_model(ops in prop::collection::vec((any::<bool>(), 0u32..4), 0..30)) {
        let mut p = Program::new();
        let mut model: Vec<u32> = Vec::new();
        let mut ext = Externals::new();
        for (insert, n) in ops {
            let goal = parse_query(&if insert { format!("assert(k({n}))") } else { format!("retract(k({n}))") })
                .unwrap()
                .goal;
            let ok = solve(&mut p, &goal, &mut ext, SolveLimits::default()).unwrap().is_some();
            if insert {
                prop_assert!(ok);
                model.push(n);
            } else {
                let pos = model.iter().position(|&m| m == n);
                prop_assert_eq!(ok, pos.is_some());
                if let Some(i) = pos {
                    model.remove(i);
                }
            }
        }
        let facts: Vec<String> = p.facts(&PredKey::new("k", 1)).iter().map(|c| c.head.to_string()).collect();
        let expected: Vec<String> = model.iter().map(|n| format!("k({n})")).collect();
        prop_assert_eq!(facts, expected);
    }

    #[test]
    fn depth_limit_is_exact(n in 0usize..40, limit in 0usize..40) {
        let mut program: String = (0..n).map(|i| format!("c{i} :- c{}. ", i + 1)).collect();
        program.push_str(&format!("c{n}."));
        let mut p = parse_program(&program).unwrap();
        let r = solve(&mut p, &Term::atom("c0"), &mut Externals::new(), SolveLimits { max_depth: limit });
        if n <= limit {
            prop_assert!(matches!(r, Ok(Some(_))), "{:?}", r);
        } else {
            prop_assert_eq!(r.unwrap_err(), EngineError::DepthExceeded { limit });
        }
    }
}

#[test]
fn cut_skips_later_clauses_entirely() {
    let mut p = parse_program("h :- g, !. h :- other. g. other.").unwrap();
    let mut ext = Externals::new();
    let mut solver = Solver::new(&mut p, &Term::atom("h"), &mut ext, SolveLimits::default());
    assert!(solver.next_solution().unwrap().is_some());
    assert!(solver.next_solution().unwrap().is_none());
    assert_eq!(solver.stats().clause_trials(&PredKey::new("h", 0), 1), 0);
}
