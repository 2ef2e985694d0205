//! Rule-file reader.
//!
//! ```text
//! program := clause*
//! clause  := term [":-" goal ("," goal)*] "."
//! goal    := "!" | term ["=" term]
//! term    := number | Variable | atom ["(" term ("," term)* ")"]
//! ```
//!
//! Atoms start lowercase, variables uppercase or `_` (a lone `_` is fresh
//! at every occurrence), numbers are decimal with an optional leading `-`,
//! and `%` starts a comment running to end of line.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use super::program::{Clause, Goal, Program};
use super::term::{Term, VarId};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Var(String),
    Number(f64),
    Open,
    Close,
    Comma,
    End,
    Neck,
    Cut,
    Eq,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Atom(a) => format!("atom `{a}`"),
            Tok::Var(v) => format!("variable `{v}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Open => "`(`".into(),
            Tok::Close => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "`.`".into(),
            Tok::Neck => "`:-`".into(),
            Tok::Cut => "`!`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, column, message: String| ParseError {
        line,
        column,
        message,
    };

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(&mut i, &mut col, 1),
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => {
                out.push(Spanned {
                    tok: Tok::Open,
                    line: tl,
                    column: tc,
                });
                advance(&mut i, &mut col, 1);
            }
            ')' => {
                out.push(Spanned {
                    tok: Tok::Close,
                    line: tl,
                    column: tc,
                });
                advance(&mut i, &mut col, 1);
            }
            ',' => {
                out.push(Spanned {
                    tok: Tok::Comma,
                    line: tl,
                    column: tc,
                });
                advance(&mut i, &mut col, 1);
            }
            '!' => {
                out.push(Spanned {
                    tok: Tok::Cut,
                    line: tl,
                    column: tc,
                });
                advance(&mut i, &mut col, 1);
            }
            '=' => {
                out.push(Spanned {
                    tok: Tok::Eq,
                    line: tl,
                    column: tc,
                });
                advance(&mut i, &mut col, 1);
            }
            '.' => {
                out.push(Spanned {
                    tok: Tok::End,
                    line: tl,
                    column: tc,
                });
                advance(&mut i, &mut col, 1);
            }
            ':' if chars.get(i + 1) == Some(&'-') => {
                out.push(Spanned {
                    tok: Tok::Neck,
                    line: tl,
                    column: tc,
                });
                advance(&mut i, &mut col, 2);
            }
            c if c.is_ascii_digit()
                || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) =>
            {
                let start = i;
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                // a fraction needs a digit after the dot; otherwise the dot ends the clause
                if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                let lexeme: String = chars[start..j].iter().collect();
                let value = lexeme
                    .parse::<f64>()
                    .map_err(|e| err(tl, tc, format!("bad number `{lexeme}`: {e}")))?;
                out.push(Spanned {
                    tok: Tok::Number(value),
                    line: tl,
                    column: tc,
                });
                advance(&mut i, &mut col, j - start);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let word: String = chars[start..j].iter().collect();
                let tok = if c.is_ascii_lowercase() {
                    Tok::Atom(word)
                } else {
                    Tok::Var(word)
                };
                out.push(Spanned {
                    tok,
                    line: tl,
                    column: tc,
                });
                advance(&mut i, &mut col, j - start);
            }
            other => return Err(err(tl, tc, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

fn advance(i: &mut usize, col: &mut usize, n: usize) {
    *i += n;
    *col += n;
}

/// Per-clause variable scope.
#[derive(Default)]
struct Scope {
    names: HashMap<String, usize>,
    ordered: Vec<String>,
}

impl Scope {
    fn var(&mut self, name: &str) -> Term {
        if name == "_" {
            let id = self.ordered.len();
            self.ordered.push("_".into());
            return Term::Var(VarId(id));
        }
        if let Some(&id) = self.names.get(name) {
            return Term::Var(VarId(id));
        }
        let id = self.ordered.len();
        self.names.insert(name.to_owned(), id);
        self.ordered.push(name.to_owned());
        Term::Var(VarId(id))
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Spanned, expected: &str) -> ParseError {
        let message = if t.tok == Tok::Eof {
            format!("unexpected end of input, expected {expected}")
        } else {
            format!("expected {expected}, found {}", t.tok.describe())
        };
        ParseError {
            line: t.line,
            column: t.column,
            message,
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        let t = self.next();
        if t.tok == tok {
            Ok(())
        } else {
            Err(self.error_at(&t, expected))
        }
    }

    fn term(&mut self, scope: &mut Scope) -> Result<Term, ParseError> {
        let t = self.next();
        match t.tok {
            Tok::Number(n) => Ok(Term::Number(n)),
            Tok::Var(name) => Ok(scope.var(&name)),
            Tok::Atom(name) => {
                if self.peek().tok != Tok::Open {
                    return Ok(Term::Atom(name));
                }
                self.next();
                let mut args = vec![self.term(scope)?];
                loop {
                    let t = self.next();
                    match t.tok {
                        Tok::Comma => args.push(self.term(scope)?),
                        Tok::Close => break,
                        _ => return Err(self.error_at(&t, "`,` or `)`")),
                    }
                }
                Ok(Term::Compound {
                    functor: name,
                    args,
                })
            }
            _ => Err(self.error_at(&t, "a term")),
        }
    }

    fn goal(&mut self, scope: &mut Scope) -> Result<Goal, ParseError> {
        if self.peek().tok == Tok::Cut {
            self.next();
            return Ok(Goal::Cut);
        }
        let start = self.peek().clone();
        let lhs = self.term(scope)?;
        if self.peek().tok == Tok::Eq {
            self.next();
            let rhs = self.term(scope)?;
            return Ok(Goal::Call(Term::compound("=", vec![lhs, rhs])));
        }
        match lhs {
            Term::Atom(_) | Term::Compound { .. } => Ok(Goal::Call(lhs)),
            _ => Err(ParseError {
                line: start.line,
                column: start.column,
                message: "goal must be an atom or compound".into(),
            }),
        }
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let mut scope = Scope::default();
        let start = self.peek().clone();
        let head = self.term(&mut scope)?;
        if !matches!(head, Term::Atom(_) | Term::Compound { .. }) {
            return Err(ParseError {
                line: start.line,
                column: start.column,
                message: "clause head must be an atom or compound".into(),
            });
        }
        let mut body = Vec::new();
        let t = self.next();
        match t.tok {
            Tok::End => {}
            Tok::Neck => {
                body.push(self.goal(&mut scope)?);
                loop {
                    let t = self.next();
                    match t.tok {
                        Tok::Comma => body.push(self.goal(&mut scope)?),
                        Tok::End => break,
                        _ => return Err(self.error_at(&t, "`,` or `.`")),
                    }
                }
            }
            _ => return Err(self.error_at(&t, "`:-` or `.`")),
        }
        Ok(Clause::new(head, body, scope.ordered))
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let mut program = Program::new();
    while parser.peek().tok != Tok::Eof {
        let clause = parser.clause()?;
        program.add_clause(Arc::new(clause));
    }
    Ok(program)
}

/// A parsed query term plus the names of its variables, indexed by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub goal: Term,
    pub var_names: Vec<String>,
}

impl Query {
    pub fn var(&self, name: &str) -> Option<VarId> {
        self.var_names.iter().position(|n| n == name).map(VarId)
    }
}

/// Parses a single goal such as `q(X)` or `X = f(a)`. A trailing `.` is optional.
pub fn parse_query(text: &str) -> Result<Query, ParseError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let mut scope = Scope::default();
    let goal = match parser.goal(&mut scope)? {
        Goal::Call(t) => t,
        Goal::Cut => Term::atom("true"),
    };
    if parser.peek().tok == Tok::End {
        parser.next();
    }
    parser.expect(Tok::Eof, "end of input")?;
    Ok(Query {
        goal,
        var_names: scope.ordered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::term::PredKey;

    #[test]
    fn single_fact() {
        let p = parse_program("p(a).").unwrap();
        let clauses = p.clauses(&PredKey::new("p", 1));
        assert_eq!(clauses.len(), 1);
        assert_eq!(clauses[0].head, Term::compound("p", vec![Term::atom("a")]));
        assert!(clauses[0].body.is_empty());
    }

    #[test]
    fn rule_with_cut() {
        let p = parse_program("q(X) :- p(X), !.").unwrap();
        let c = &p.clauses(&PredKey::new("q", 1))[0];
        assert_eq!(
            c.body,
            vec![
                Goal::Call(Term::compound("p", vec![Term::var(0)])),
                Goal::Cut
            ]
        );
        assert_eq!(c.var_names, vec!["X"]);
    }

    #[test]
    fn unterminated_compound() {
        let e = parse_program("p(a").unwrap_err();
        assert_eq!((e.line, e.column), (1, 4));
        assert!(e.message.contains("end of input"), "{e}");
    }

    #[test]
    fn errors_carry_position() {
        let e = parse_program("p(a).\n\nq :- , r.").unwrap_err();
        assert_eq!((e.line, e.column), (3, 6));
        let e = parse_program("X :- p.").unwrap_err();
        assert_eq!((e.line, e.column), (1, 1));
        assert!(parse_program("p :- q").is_err());
        assert!(parse_program("p(#).").is_err());
    }

    #[test]
    fn numbers_comments_and_equality() {
        let text =
            "% header\r\ngo(O, Obj) :- Obj = 1, !, O = search_Qbo(-12.5). % trailing\r\nn(3).\n";
        let p = parse_program(text).unwrap();
        let go = &p.clauses(&PredKey::new("go", 2))[0];
        assert_eq!(go.body.len(), 3);
        assert_eq!(
            go.body[2],
            Goal::Call(Term::compound(
                "=",
                vec![
                    Term::var(0),
                    Term::compound("search_Qbo", vec![Term::Number(-12.5)])
                ]
            ))
        );
        assert_eq!(
            p.clauses(&PredKey::new("n", 1))[0].head,
            Term::compound("n", vec![Term::Number(3.0)])
        );
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let p = parse_program("s(_, _, X) :- t(X).").unwrap();
        let c = &p.clauses(&PredKey::new("s", 3))[0];
        assert_eq!(
            c.head,
            Term::compound("s", vec![Term::var(0), Term::var(1), Term::var(2)])
        );
        assert_eq!(c.var_count(), 3);
    }

    #[test]
    fn source_order_is_kept() {
        let p = parse_program("p(b). q. p(a). p(c).").unwrap();
        let heads: Vec<String> = p
            .clauses(&PredKey::new("p", 1))
            .iter()
            .map(|c| c.head.to_string())
            .collect();
        assert_eq!(heads, ["p(b)", "p(a)", "p(c)"]);
        assert_eq!(p.clause_count(), 4);
    }

    #[test]
    fn query_parsing() {
        let q = parse_query("q(X, Y).").unwrap();
        assert_eq!(q.var("Y"), Some(VarId(1)));
        let q = parse_query("X = f(a)").unwrap();
        assert_eq!(q.goal.indicator(), Some(PredKey::new("=", 2)));
    }
}
