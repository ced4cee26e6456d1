//! S-expression surface syntax for terms, set terms, formulas and (in the
//! proof module) whole proofs.
//!
//! Grammar:
//! - terms: `0`, `eps`, `(s t)`, `(+ t u)`, `(* t u)`, `(app t u)`, names
//! - set terms: `X`, `(mu X x f)`, `(nu X x f)`, `(nu^ k X x f)`
//! - formulas: `(< t u)`, `(nless t u)`, `(= t u)`, `(!= t u)`,
//!   `(in t S)`, `(notin t S)`, `(and f g)`, `(or f g)`,
//!   `(all x f)`, `(ex x f)`
//!
//! Printing is the exact inverse on canonical spacing: `parse(print(x)) == x`
//! structurally, and `print(parse(s)) == s` up to whitespace.

use crate::formula::{Formula, SetTerm, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("byte {pos}: unexpected character {ch:?}")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("byte {pos}: unbalanced ')'")]
    UnbalancedClose { pos: usize },
    #[error("unexpected end of input (unclosed '(')")]
    UnexpectedEof,
    #[error("trailing input after expression")]
    TrailingInput,
    #[error("{context}: malformed {what}: {detail}")]
    Malformed {
        context: String,
        what: String,
        detail: String,
    },
}

fn malformed(what: &str, detail: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        context: "parse".into(),
        what: what.into(),
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// Reader / printer for raw S-expressions
// ---------------------------------------------------------------------------

pub fn read_all(input: &str) -> Result<Vec<Sx>, ParseError> {
    let mut out = Vec::new();
    let mut stack: Vec<Vec<Sx>> = Vec::new();
    let mut atom = String::new();
    let bytes = input.char_indices().collect::<Vec<_>>();
    let mut i = 0usize;
    let flush =
        |atom: &mut String, stack: &mut Vec<Vec<Sx>>, out: &mut Vec<Sx>| {
            if !atom.is_empty() {
                let sx = Sx::Atom(std::mem::take(atom));
                match stack.last_mut() {
                    Some(top) => top.push(sx),
                    None => out.push(sx),
                }
            }
        };
    while i < bytes.len() {
        let (pos, c) = bytes[i];
        match c {
            '(' => {
                flush(&mut atom, &mut stack, &mut out);
                stack.push(Vec::new());
            }
            ')' => {
                flush(&mut atom, &mut stack, &mut out);
                let done = stack
                    .pop()
                    .ok_or(ParseError::UnbalancedClose { pos })?;
                let sx = Sx::List(done);
                match stack.last_mut() {
                    Some(top) => top.push(sx),
                    None => out.push(sx),
                }
            }
            ';' => {
                // comment to end of line
                flush(&mut atom, &mut stack, &mut out);
                while i < bytes.len() && bytes[i].1 != '\n' {
                    i += 1;
                }
            }
            c if c.is_whitespace() => flush(&mut atom, &mut stack, &mut out),
            c if is_atom_char(c) => atom.push(c),
            c => return Err(ParseError::UnexpectedChar { pos, ch: c }),
        }
        i += 1;
    }
    flush(&mut atom, &mut stack, &mut out);
    if !stack.is_empty() {
        return Err(ParseError::UnexpectedEof);
    }
    Ok(out)
}

pub fn read_one(input: &str) -> Result<Sx, ParseError> {
    let all = read_all(input)?;
    match all.len() {
        1 => Ok(all.into_iter().next().unwrap()),
        0 => Err(ParseError::UnexpectedEof),
        _ => Err(ParseError::TrailingInput),
    }
}

fn is_atom_char(c: char) -> bool {
    c.is_ascii_alphanumeric()
        || matches!(c, '_' | '-' | '+' | '*' | '=' | '!' | '<' | '^' | '#' | '.' | '/' | ':')
}

impl Sx {
    pub fn atom(s: &str) -> Sx {
        Sx::Atom(s.to_string())
    }
    pub fn list(items: Vec<Sx>) -> Sx {
        Sx::List(items)
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sx::Atom(a) => Some(a),
            Sx::List(_) => None,
        }
    }
    pub fn as_list(&self) -> Option<&[Sx]> {
        match self {
            Sx::List(l) => Some(l),
            Sx::Atom(_) => None,
        }
    }

    /// Compact one-line rendering.
    pub fn to_string_compact(&self) -> String {
        let mut s = String::new();
        self.write_compact(&mut s);
        s
    }

    fn write_compact(&self, out: &mut String) {
        match self {
            Sx::Atom(a) => out.push_str(a),
            Sx::List(items) => {
                out.push('(');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    item.write_compact(out);
                }
                out.push(')');
            }
        }
    }

    /// Indented rendering: lists whose compact form exceeds the width break
    /// one child per line.
    pub fn to_string_pretty(&self, width: usize) -> String {
        let mut s = String::new();
        self.write_pretty(&mut s, 0, width);
        s
    }

    fn write_pretty(&self, out: &mut String, indent: usize, width: usize) {
        let compact = self.to_string_compact();
        if compact.len() + indent <= width || matches!(self, Sx::Atom(_)) {
            out.push_str(&compact);
            return;
        }
        let Sx::List(items) = self else { unreachable!() };
        out.push('(');
        let mut first = true;
        for item in items {
            if first {
                item.write_pretty(out, indent + 1, width);
                first = false;
            } else {
                out.push('\n');
                for _ in 0..indent + 2 {
                    out.push(' ');
                }
                item.write_pretty(out, indent + 2, width);
            }
        }
        out.push(')');
    }
}

// ---------------------------------------------------------------------------
// Terms
// ---------------------------------------------------------------------------

pub fn term_to_sx(t: &Term) -> Sx {
    match t {
        Term::Var(x) => Sx::atom(x),
        Term::Zero => Sx::atom("0"),
        Term::Eps => Sx::atom("eps"),
        Term::Succ(a) => Sx::list(vec![Sx::atom("s"), term_to_sx(a)]),
        Term::Plus(a, b) => Sx::list(vec![Sx::atom("+"), term_to_sx(a), term_to_sx(b)]),
        Term::Times(a, b) => Sx::list(vec![Sx::atom("*"), term_to_sx(a), term_to_sx(b)]),
        Term::App(a, b) => Sx::list(vec![Sx::atom("app"), term_to_sx(a), term_to_sx(b)]),
    }
}

pub fn term_from_sx(sx: &Sx) -> Result<Term, ParseError> {
    match sx {
        Sx::Atom(a) => match a.as_str() {
            "0" => Ok(Term::Zero),
            "eps" => Ok(Term::Eps),
            name if is_var_name(name) => Ok(Term::Var(name.to_string())),
            other => Err(malformed("term", format!("bad atom {other:?}"))),
        },
        Sx::List(items) => {
            let head = items
                .first()
                .and_then(Sx::as_atom)
                .ok_or_else(|| malformed("term", "empty or headless list"))?;
            let arity = items.len() - 1;
            match (head, arity) {
                ("s", 1) => Ok(Term::Succ(Box::new(term_from_sx(&items[1])?))),
                ("+", 2) => Ok(Term::Plus(
                    Box::new(term_from_sx(&items[1])?),
                    Box::new(term_from_sx(&items[2])?),
                )),
                ("*", 2) => Ok(Term::Times(
                    Box::new(term_from_sx(&items[1])?),
                    Box::new(term_from_sx(&items[2])?),
                )),
                ("app", 2) => Ok(Term::App(
                    Box::new(term_from_sx(&items[1])?),
                    Box::new(term_from_sx(&items[2])?),
                )),
                (h, n) => Err(malformed(
                    "term",
                    format!("operator {h:?} with arity {n}"),
                )),
            }
        }
    }
}

fn is_var_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().unwrap().is_ascii_alphabetic()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '#')
        && !matches!(s, "eps" | "s" | "app" | "mu" | "nu" | "in" | "notin" | "and" | "or" | "all" | "ex" | "nless")
}

// ---------------------------------------------------------------------------
// Set terms
// ---------------------------------------------------------------------------

pub fn set_term_to_sx(s: &SetTerm) -> Sx {
    match s {
        SetTerm::Var(v) => Sx::atom(v),
        SetTerm::Mu {
            set_var,
            num_var,
            body,
        } => Sx::list(vec![
            Sx::atom("mu"),
            Sx::atom(set_var),
            Sx::atom(num_var),
            formula_to_sx(body),
        ]),
        SetTerm::Nu {
            ann: None,
            set_var,
            num_var,
            body,
        } => Sx::list(vec![
            Sx::atom("nu"),
            Sx::atom(set_var),
            Sx::atom(num_var),
            formula_to_sx(body),
        ]),
        SetTerm::Nu {
            ann: Some(k),
            set_var,
            num_var,
            body,
        } => Sx::list(vec![
            Sx::atom("nu^"),
            Sx::atom(k),
            Sx::atom(set_var),
            Sx::atom(num_var),
            formula_to_sx(body),
        ]),
    }
}

pub fn set_term_from_sx(sx: &Sx) -> Result<SetTerm, ParseError> {
    match sx {
        Sx::Atom(a) if is_var_name(a) => Ok(SetTerm::Var(a.clone())),
        Sx::Atom(a) => Err(malformed("set term", format!("bad atom {a:?}"))),
        Sx::List(items) => {
            let head = items
                .first()
                .and_then(Sx::as_atom)
                .ok_or_else(|| malformed("set term", "empty or headless list"))?;
            match (head, items.len()) {
                ("mu", 4) => Ok(SetTerm::Mu {
                    set_var: expect_name(&items[1], "set variable")?,
                    num_var: expect_name(&items[2], "number variable")?,
                    body: Box::new(formula_from_sx(&items[3])?),
                }),
                ("nu", 4) => Ok(SetTerm::Nu {
                    ann: None,
                    set_var: expect_name(&items[1], "set variable")?,
                    num_var: expect_name(&items[2], "number variable")?,
                    body: Box::new(formula_from_sx(&items[3])?),
                }),
                ("nu^", 5) => Ok(SetTerm::Nu {
                    ann: Some(expect_name(&items[1], "ordinal variable")?),
                    set_var: expect_name(&items[2], "set variable")?,
                    num_var: expect_name(&items[3], "number variable")?,
                    body: Box::new(formula_from_sx(&items[4])?),
                }),
                (h, n) => Err(malformed(
                    "set term",
                    format!("operator {h:?} with {} arguments", n - 1),
                )),
            }
        }
    }
}

fn expect_name(sx: &Sx, what: &str) -> Result<String, ParseError> {
    match sx.as_atom() {
        Some(a) if is_var_name(a) => Ok(a.to_string()),
        Some(a) => Err(malformed(what, format!("bad name {a:?}"))),
        None => Err(malformed(what, "expected a name, found a list")),
    }
}

// ---------------------------------------------------------------------------
// Formulas
// ---------------------------------------------------------------------------

pub fn formula_to_sx(f: &Formula) -> Sx {
    match f {
        Formula::Lt(a, b) => Sx::list(vec![Sx::atom("<"), term_to_sx(a), term_to_sx(b)]),
        Formula::NLess(a, b) => Sx::list(vec![Sx::atom("nless"), term_to_sx(a), term_to_sx(b)]),
        Formula::Eq(a, b) => Sx::list(vec![Sx::atom("="), term_to_sx(a), term_to_sx(b)]),
        Formula::Neq(a, b) => Sx::list(vec![Sx::atom("!="), term_to_sx(a), term_to_sx(b)]),
        Formula::In(t, s) => Sx::list(vec![Sx::atom("in"), term_to_sx(t), set_term_to_sx(s)]),
        Formula::NotIn(t, s) => {
            Sx::list(vec![Sx::atom("notin"), term_to_sx(t), set_term_to_sx(s)])
        }
        Formula::And(a, b) => Sx::list(vec![Sx::atom("and"), formula_to_sx(a), formula_to_sx(b)]),
        Formula::Or(a, b) => Sx::list(vec![Sx::atom("or"), formula_to_sx(a), formula_to_sx(b)]),
        Formula::All(v, g) => Sx::list(vec![Sx::atom("all"), Sx::atom(v), formula_to_sx(g)]),
        Formula::Ex(v, g) => Sx::list(vec![Sx::atom("ex"), Sx::atom(v), formula_to_sx(g)]),
    }
}

pub fn formula_from_sx(sx: &Sx) -> Result<Formula, ParseError> {
    let items = sx
        .as_list()
        .ok_or_else(|| malformed("formula", "expected a list"))?;
    let head = items
        .first()
        .and_then(Sx::as_atom)
        .ok_or_else(|| malformed("formula", "empty or headless list"))?;
    match (head, items.len()) {
        ("<", 3) => Ok(Formula::Lt(
            term_from_sx(&items[1])?,
            term_from_sx(&items[2])?,
        )),
        ("nless", 3) => Ok(Formula::NLess(
            term_from_sx(&items[1])?,
            term_from_sx(&items[2])?,
        )),
        ("=", 3) => Ok(Formula::Eq(
            term_from_sx(&items[1])?,
            term_from_sx(&items[2])?,
        )),
        ("!=", 3) => Ok(Formula::Neq(
            term_from_sx(&items[1])?,
            term_from_sx(&items[2])?,
        )),
        ("in", 3) => Ok(Formula::In(
            term_from_sx(&items[1])?,
            set_term_from_sx(&items[2])?,
        )),
        ("notin", 3) => Ok(Formula::NotIn(
            term_from_sx(&items[1])?,
            set_term_from_sx(&items[2])?,
        )),
        ("and", 3) => Ok(Formula::and(
            formula_from_sx(&items[1])?,
            formula_from_sx(&items[2])?,
        )),
        ("or", 3) => Ok(Formula::or(
            formula_from_sx(&items[1])?,
            formula_from_sx(&items[2])?,
        )),
        ("all", 3) => Ok(Formula::All(
            expect_name(&items[1], "bound variable")?,
            Box::new(formula_from_sx(&items[2])?),
        )),
        ("ex", 3) => Ok(Formula::Ex(
            expect_name(&items[1], "bound variable")?,
            Box::new(formula_from_sx(&items[2])?),
        )),
        (h, n) => Err(malformed(
            "formula",
            format!("operator {h:?} with {} arguments", n - 1),
        )),
    }
}

pub fn print_formula(f: &Formula) -> String {
    formula_to_sx(f).to_string_compact()
}

pub fn parse_formula(input: &str) -> Result<Formula, ParseError> {
    formula_from_sx(&read_one(input)?)
}

pub fn print_term(t: &Term) -> String {
    term_to_sx(t).to_string_compact()
}

pub fn parse_term(input: &str) -> Result<Term, ParseError> {
    term_from_sx(&read_one(input)?)
}

pub fn print_set_term(s: &SetTerm) -> String {
    set_term_to_sx(s).to_string_compact()
}

pub fn parse_set_term(input: &str) -> Result<SetTerm, ParseError> {
    set_term_from_sx(&read_one(input)?)
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_formula(self))
    }
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_term(self))
    }
}

impl std::fmt::Display for SetTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_set_term(self))
    }
}

impl std::fmt::Display for Sx {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        self.write_compact(&mut s);
        // write! to forward
        write!(f, "{s}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_terms() {
        for src in ["0", "eps", "x", "(s 0)", "(+ x (s y))", "(* (s 0) 0)", "(app z w)"] {
            let t = parse_term(src).unwrap();
            assert_eq!(print_term(&t), src);
        }
    }

    #[test]
    fn roundtrip_formulas() {
        for src in [
            "(< x y)",
            "(nless x y)",
            "(= (s 0) 0)",
            "(!= x eps)",
            "(in x (mu X x (or (= x 0) (in x X))))",
            "(notin x Y)",
            "(and (= x 0) (or (< x y) (= y 0)))",
            "(all x (ex y (= x y)))",
            "(in t (nu X x (in x X)))",
            "(in t (nu^ k0 X x (in x X)))",
        ] {
            let f = parse_formula(src).unwrap();
            assert_eq!(print_formula(&f), src);
        }
    }

    #[test]
    fn whitespace_and_comments() {
        let f = parse_formula("(and ; a comment\n  (= x 0)\n  (= y 0))").unwrap();
        assert_eq!(print_formula(&f), "(and (= x 0) (= y 0))");
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_formula("(= x)").is_err());
        assert!(parse_formula("(meow x y)").is_err());
        assert!(parse_formula("(in x (mu X))").is_err());
        assert!(parse_formula("(= x 0) (= y 0)").is_err());
    }
}
