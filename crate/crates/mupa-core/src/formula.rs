//! Core ASTs for the fixed-point arithmetic language and its annotated
//! extension, together with the operations every other module builds on:
//! negation (De Morgan dual), positivity, capture-avoiding substitution,
//! alpha-equivalence, canonical renaming, and ordinal-assignment handling
//! (annotate / strip / extract, plus the characteristic "push" operations
//! used when unfolding annotated fixed points).
//!
//! Design notes:
//! - Formulas are kept in negation normal form: there is no negation node.
//!   `negate` is a total involution. Negating a membership in a bare `mu`
//!   or `nu` set term rewrites to membership in the dual set term; negating
//!   a membership in an *annotated* `nu^k` has no representable dual set
//!   term (annotated `mu` is deliberately not representable), so it is kept
//!   as a `notin` atom instead. `notin` over a set variable is the usual
//!   positive/negative occurrence marker.
//! - The list constant `eps` and the binary append `app` are primitive term
//!   formers with a fixed numeric encoding supplied by the evaluator
//!   (`eps` = 0, `app a b` = cantor(a,b)+1).
//! - Bound variables are plain names; all substitutions are simultaneous
//!   and capture-avoiding, renaming against a deterministic fresh-name
//!   supply (`base`, `base_1`, `base_2`, ...).

use std::collections::{BTreeMap, BTreeSet};

/// First-order terms over 0, successor, +, *, the list constant and append.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Zero,
    Eps,
    Succ(Box<Term>),
    Plus(Box<Term>, Box<Term>),
    Times(Box<Term>, Box<Term>),
    App(Box<Term>, Box<Term>),
}

/// Set terms: variables and (possibly annotated) fixed points.
///
/// `Nu { ann: Some(k), .. }` is the annotated form `nu^k X x phi`. There is
/// no annotated `mu`: no inference rule introduces one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetTerm {
    Var(String),
    Mu {
        set_var: String,
        num_var: String,
        body: Box<Formula>,
    },
    Nu {
        ann: Option<String>,
        set_var: String,
        num_var: String,
        body: Box<Formula>,
    },
}

/// Formulas in negation normal form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Lt(Term, Term),
    NLess(Term, Term),
    Eq(Term, Term),
    Neq(Term, Term),
    In(Term, SetTerm),
    NotIn(Term, SetTerm),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    All(String, Box<Formula>),
    Ex(String, Box<Formula>),
}

/// One entry of an ordinal assignment: a named ordinal variable or the
/// placeholder (printed `*`) meaning "leave this binder bare".
pub type OrdEntry = Option<String>;

impl Term {
    /// The numeral with `n` successor applications over zero.
    pub fn numeral(n: u64) -> Term {
        let mut t = Term::Zero;
        for _ in 0..n {
            t = Term::Succ(Box::new(t));
        }
        t
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    fn collect_fv(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                out.insert(x.clone());
            }
            Term::Zero | Term::Eps => {}
            Term::Succ(t) => t.collect_fv(out),
            Term::Plus(a, b) | Term::Times(a, b) | Term::App(a, b) => {
                a.collect_fv(out);
                b.collect_fv(out);
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut out);
        out
    }

    /// Symbol count (used for the size ranking of set terms).
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Zero | Term::Eps => 1,
            Term::Succ(t) => 1 + t.size(),
            Term::Plus(a, b) | Term::Times(a, b) | Term::App(a, b) => 1 + a.size() + b.size(),
        }
    }
}

impl SetTerm {
    pub fn var(name: &str) -> SetTerm {
        SetTerm::Var(name.to_string())
    }

    pub fn size(&self) -> usize {
        match self {
            SetTerm::Var(_) => 1,
            SetTerm::Mu { body, .. } => 1 + body.size(),
            // An annotation does not change the symbol count of the
            // underlying set term: sizes are always of the stripped term.
            SetTerm::Nu { body, .. } => 1 + body.size(),
        }
    }

    pub fn is_annotated_nu(&self) -> bool {
        matches!(self, SetTerm::Nu { ann: Some(_), .. })
    }
}

impl Formula {
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }
    pub fn all(x: &str, f: Formula) -> Formula {
        Formula::All(x.to_string(), Box::new(f))
    }
    pub fn ex(x: &str, f: Formula) -> Formula {
        Formula::Ex(x.to_string(), Box::new(f))
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::Lt(a, b)
            | Formula::NLess(a, b)
            | Formula::Eq(a, b)
            | Formula::Neq(a, b) => 1 + a.size() + b.size(),
            Formula::In(t, s) | Formula::NotIn(t, s) => 1 + t.size() + s.size(),
            Formula::And(a, b) | Formula::Or(a, b) => 1 + a.size() + b.size(),
            Formula::All(_, f) | Formula::Ex(_, f) => 2 + f.size(),
        }
    }

    /// Atomic formulas: the four arithmetic comparisons and memberships.
    pub fn is_atomic(&self) -> bool {
        matches!(
            self,
            Formula::Lt(..)
                | Formula::NLess(..)
                | Formula::Eq(..)
                | Formula::Neq(..)
                | Formula::In(..)
                | Formula::NotIn(..)
        )
    }
}

// ---------------------------------------------------------------------------
// Negation
// ---------------------------------------------------------------------------

/// Replace free occurrences of the set variable `x` by their opposite
/// polarity (`in` <-> `notin`). This is the `phi(¬X)` operation of the
/// De Morgan table; it respects shadowing by inner binders of the same name.
pub fn flip_set_var(f: &Formula, x: &str) -> Formula {
    fn go_set(s: &SetTerm, x: &str) -> SetTerm {
        match s {
            SetTerm::Var(_) => s.clone(),
            SetTerm::Mu {
                set_var,
                num_var,
                body,
            } => {
                if set_var == x {
                    s.clone()
                } else {
                    SetTerm::Mu {
                        set_var: set_var.clone(),
                        num_var: num_var.clone(),
                        body: Box::new(flip_set_var(body, x)),
                    }
                }
            }
            SetTerm::Nu {
                ann,
                set_var,
                num_var,
                body,
            } => {
                if set_var == x {
                    s.clone()
                } else {
                    SetTerm::Nu {
                        ann: ann.clone(),
                        set_var: set_var.clone(),
                        num_var: num_var.clone(),
                        body: Box::new(flip_set_var(body, x)),
                    }
                }
            }
        }
    }
    match f {
        Formula::Lt(..) | Formula::NLess(..) | Formula::Eq(..) | Formula::Neq(..) => f.clone(),
        Formula::In(t, s) => {
            if matches!(s, SetTerm::Var(v) if v == x) {
                Formula::NotIn(t.clone(), s.clone())
            } else {
                Formula::In(t.clone(), go_set(s, x))
            }
        }
        Formula::NotIn(t, s) => {
            if matches!(s, SetTerm::Var(v) if v == x) {
                Formula::In(t.clone(), s.clone())
            } else {
                Formula::NotIn(t.clone(), go_set(s, x))
            }
        }
        Formula::And(a, b) => Formula::and(flip_set_var(a, x), flip_set_var(b, x)),
        Formula::Or(a, b) => Formula::or(flip_set_var(a, x), flip_set_var(b, x)),
        Formula::All(v, g) => Formula::All(v.clone(), Box::new(flip_set_var(g, x))),
        Formula::Ex(v, g) => Formula::Ex(v.clone(), Box::new(flip_set_var(g, x))),
    }
}

/// The dual of a bare fixed-point set term:
/// `mu X x phi  ->  nu X x ¬phi(¬X)` and symmetrically for `nu`.
/// Annotated `nu^k` has no representable dual (`negate` keeps such
/// memberships as `notin` atoms instead); set variables are their own
/// responsibility (callers never dualize a bare variable).
pub fn dual_set_term(s: &SetTerm) -> Option<SetTerm> {
    match s {
        SetTerm::Var(_) => None,
        SetTerm::Mu {
            set_var,
            num_var,
            body,
        } => Some(SetTerm::Nu {
            ann: None,
            set_var: set_var.clone(),
            num_var: num_var.clone(),
            body: Box::new(negate(&flip_set_var(body, set_var))),
        }),
        SetTerm::Nu {
            ann: None,
            set_var,
            num_var,
            body,
        } => Some(SetTerm::Mu {
            set_var: set_var.clone(),
            num_var: num_var.clone(),
            body: Box::new(negate(&flip_set_var(body, set_var))),
        }),
        SetTerm::Nu { ann: Some(_), .. } => None,
    }
}

/// De Morgan dual. Total involution on all formulas, annotated ones
/// included: membership in an annotated `nu^k` negates to a `notin` atom
/// (and back), since the annotated `mu` dual is not representable.
pub fn negate(f: &Formula) -> Formula {
    match f {
        Formula::Lt(a, b) => Formula::NLess(a.clone(), b.clone()),
        Formula::NLess(a, b) => Formula::Lt(a.clone(), b.clone()),
        Formula::Eq(a, b) => Formula::Neq(a.clone(), b.clone()),
        Formula::Neq(a, b) => Formula::Eq(a.clone(), b.clone()),
        Formula::In(t, s) => match dual_set_term(s) {
            Some(d) => Formula::In(t.clone(), d),
            None => Formula::NotIn(t.clone(), s.clone()),
        },
        Formula::NotIn(t, s) => Formula::In(t.clone(), s.clone()),
        Formula::And(a, b) => Formula::or(negate(a), negate(b)),
        Formula::Or(a, b) => Formula::and(negate(a), negate(b)),
        Formula::All(v, g) => Formula::Ex(v.clone(), Box::new(negate(g))),
        Formula::Ex(v, g) => Formula::All(v.clone(), Box::new(negate(g))),
    }
}

// ---------------------------------------------------------------------------
// Positivity and free variables
// ---------------------------------------------------------------------------

/// True iff the set variable `x` never occurs free under a `notin` atom.
pub fn is_positive(f: &Formula, x: &str) -> bool {
    fn set_ok(s: &SetTerm, x: &str) -> bool {
        match s {
            SetTerm::Var(_) => true,
            SetTerm::Mu { set_var, body, .. } | SetTerm::Nu { set_var, body, .. } => {
                set_var == x || is_positive(body, x)
            }
        }
    }
    match f {
        Formula::Lt(..) | Formula::NLess(..) | Formula::Eq(..) | Formula::Neq(..) => true,
        Formula::In(_, s) => set_ok(s, x),
        Formula::NotIn(_, s) => match s {
            SetTerm::Var(v) => v != x,
            _ => set_ok(s, x),
        },
        Formula::And(a, b) | Formula::Or(a, b) => is_positive(a, x) && is_positive(b, x),
        Formula::All(_, g) | Formula::Ex(_, g) => is_positive(g, x),
    }
}

/// Formula-hood: every fixed-point body is positive in its bound set
/// variable.
pub fn is_wellformed(f: &Formula) -> bool {
    fn set_ok(s: &SetTerm) -> bool {
        match s {
            SetTerm::Var(_) => true,
            SetTerm::Mu {
                set_var, body, ..
            }
            | SetTerm::Nu {
                set_var, body, ..
            } => is_positive(body, set_var) && is_wellformed(body),
        }
    }
    match f {
        Formula::Lt(..) | Formula::NLess(..) | Formula::Eq(..) | Formula::Neq(..) => true,
        Formula::In(_, s) | Formula::NotIn(_, s) => set_ok(s),
        Formula::And(a, b) | Formula::Or(a, b) => is_wellformed(a) && is_wellformed(b),
        Formula::All(_, g) | Formula::Ex(_, g) => is_wellformed(g),
    }
}

pub fn fv_num_formula(f: &Formula) -> BTreeSet<String> {
    fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        let term = |t: &Term, bound: &Vec<String>, out: &mut BTreeSet<String>| {
            for v in t.free_vars() {
                if !bound.contains(&v) {
                    out.insert(v);
                }
            }
        };
        match f {
            Formula::Lt(a, b)
            | Formula::NLess(a, b)
            | Formula::Eq(a, b)
            | Formula::Neq(a, b) => {
                term(a, bound, out);
                term(b, bound, out);
            }
            Formula::In(t, s) | Formula::NotIn(t, s) => {
                term(t, bound, out);
                go_set(s, bound, out);
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            Formula::All(v, g) | Formula::Ex(v, g) => {
                bound.push(v.clone());
                go(g, bound, out);
                bound.pop();
            }
        }
    }
    fn go_set(s: &SetTerm, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match s {
            SetTerm::Var(_) => {}
            SetTerm::Mu {
                num_var, body, ..
            }
            | SetTerm::Nu {
                num_var, body, ..
            } => {
                bound.push(num_var.clone());
                go(body, bound, out);
                bound.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut Vec::new(), &mut out);
    out
}

pub fn fv_set_formula(f: &Formula) -> BTreeSet<String> {
    fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match f {
            Formula::Lt(..) | Formula::NLess(..) | Formula::Eq(..) | Formula::Neq(..) => {}
            Formula::In(_, s) | Formula::NotIn(_, s) => go_set(s, bound, out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            Formula::All(_, g) | Formula::Ex(_, g) => go(g, bound, out),
        }
    }
    fn go_set(s: &SetTerm, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match s {
            SetTerm::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            SetTerm::Mu {
                set_var, body, ..
            }
            | SetTerm::Nu {
                set_var, body, ..
            } => {
                bound.push(set_var.clone());
                go(body, bound, out);
                bound.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut Vec::new(), &mut out);
    out
}

/// All ordinal variables annotating `nu` binders anywhere in the formula.
pub fn ord_vars_formula(f: &Formula) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    visit_nu_binders(f, &mut |ann| {
        if let Some(k) = ann {
            out.insert(k.clone());
        }
    });
    out
}

pub fn ord_vars_set(s: &SetTerm) -> BTreeSet<String> {
    match s {
        SetTerm::Var(_) => BTreeSet::new(),
        SetTerm::Mu { body, .. } => ord_vars_formula(body),
        SetTerm::Nu { ann, body, .. } => {
            let mut out = ord_vars_formula(body);
            if let Some(k) = ann {
                out.insert(k.clone());
            }
            out
        }
    }
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

/// What a set variable is replaced by: a set term, or an abstraction
/// (designated variable + formula) so that `t in X` becomes `psi[t/v]`.
#[derive(Debug, Clone)]
pub enum SetRepl {
    Term(SetTerm),
    Abstraction(String, Formula),
}

impl SetRepl {
    fn fv_num(&self) -> BTreeSet<String> {
        match self {
            SetRepl::Term(s) => fv_num_set(s),
            SetRepl::Abstraction(v, f) => {
                let mut fv = fv_num_formula(f);
                fv.remove(v);
                fv
            }
        }
    }
    fn fv_set(&self) -> BTreeSet<String> {
        match self {
            SetRepl::Term(s) => fv_set_set(s),
            SetRepl::Abstraction(_, f) => fv_set_formula(f),
        }
    }
}

pub fn fv_num_set(s: &SetTerm) -> BTreeSet<String> {
    match s {
        SetTerm::Var(_) => BTreeSet::new(),
        SetTerm::Mu {
            num_var, body, ..
        }
        | SetTerm::Nu {
            num_var, body, ..
        } => {
            let mut fv = fv_num_formula(body);
            fv.remove(num_var);
            fv
        }
    }
}

pub fn fv_set_set(s: &SetTerm) -> BTreeSet<String> {
    match s {
        SetTerm::Var(v) => [v.clone()].into_iter().collect(),
        SetTerm::Mu {
            set_var, body, ..
        }
        | SetTerm::Nu {
            set_var, body, ..
        } => {
            let mut fv = fv_set_formula(body);
            fv.remove(set_var);
            fv
        }
    }
}

/// Deterministic fresh-name supply: `base`, `base_1`, `base_2`, ...
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    // Strip an existing `_<digits>` suffix so renames do not pile up.
    let stem = match base.rfind('_') {
        Some(i) if base[i + 1..].chars().all(|c| c.is_ascii_digit()) && i + 1 < base.len() => {
            &base[..i]
        }
        _ => base,
    };
    if !avoid.contains(stem) {
        return stem.to_string();
    }
    let mut n = 1usize;
    loop {
        let cand = format!("{stem}_{n}");
        if !avoid.contains(&cand) {
            return cand;
        }
        n += 1;
    }
}

/// A simultaneous, capture-avoiding substitution of number variables by
/// terms and set variables by set terms or abstractions.
#[derive(Debug, Clone, Default)]
pub struct Subst {
    pub num: BTreeMap<String, Term>,
    pub set: BTreeMap<String, SetRepl>,
}

impl Subst {
    pub fn one_num(x: &str, t: Term) -> Subst {
        Subst {
            num: [(x.to_string(), t)].into_iter().collect(),
            set: BTreeMap::new(),
        }
    }
    pub fn one_set(x: &str, s: SetTerm) -> Subst {
        Subst {
            num: BTreeMap::new(),
            set: [(x.to_string(), SetRepl::Term(s))].into_iter().collect(),
        }
    }
    pub fn one_abs(x: &str, v: &str, f: Formula) -> Subst {
        Subst {
            num: BTreeMap::new(),
            set: [(x.to_string(), SetRepl::Abstraction(v.to_string(), f))]
                .into_iter()
                .collect(),
        }
    }

    fn is_empty(&self) -> bool {
        self.num.is_empty() && self.set.is_empty()
    }

    /// Number variables that may be captured by a binder: the free number
    /// variables of every replacement image.
    fn num_avoid(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for t in self.num.values() {
            out.extend(t.free_vars());
        }
        for r in self.set.values() {
            out.extend(r.fv_num());
        }
        out
    }

    fn set_avoid(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for r in self.set.values() {
            out.extend(r.fv_set());
        }
        out
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        match t {
            Term::Var(x) => self.num.get(x).cloned().unwrap_or_else(|| t.clone()),
            Term::Zero | Term::Eps => t.clone(),
            Term::Succ(a) => Term::Succ(Box::new(self.apply_term(a))),
            Term::Plus(a, b) => {
                Term::Plus(Box::new(self.apply_term(a)), Box::new(self.apply_term(b)))
            }
            Term::Times(a, b) => {
                Term::Times(Box::new(self.apply_term(a)), Box::new(self.apply_term(b)))
            }
            Term::App(a, b) => {
                Term::App(Box::new(self.apply_term(a)), Box::new(self.apply_term(b)))
            }
        }
    }

    /// Descend under a number binder: drop a shadowed mapping and rename the
    /// bound variable when it would capture a replacement image. Returns the
    /// (possibly renamed) bound variable, the substitution to use inside and
    /// the renaming applied to the body first (as an extra mapping).
    fn under_num_binder(&self, v: &str, body_fv: &BTreeSet<String>) -> (String, Subst) {
        let mut inner = self.clone();
        inner.num.remove(v);
        // Only mappings for variables actually free in the body matter.
        inner.num.retain(|k, _| body_fv.contains(k) || k == v);
        let relevant: Subst = Subst {
            num: inner
                .num
                .iter()
                .filter(|(k, _)| body_fv.contains(*k))
                .map(|(k, t)| (k.clone(), t.clone()))
                .collect(),
            set: inner.set.clone(),
        };
        let avoid = relevant.num_avoid();
        if avoid.contains(v) {
            // Rename the binder.
            let mut all_avoid = avoid;
            all_avoid.extend(body_fv.iter().cloned());
            let v2 = fresh_name(v, &all_avoid);
            let mut with_rename = relevant;
            with_rename.num.insert(v.to_string(), Term::var(&v2));
            (v2, with_rename)
        } else {
            (v.to_string(), relevant)
        }
    }

    fn under_set_binder(&self, v: &str, body_set_fv: &BTreeSet<String>) -> (String, Subst) {
        let mut inner = self.clone();
        inner.set.remove(v);
        let relevant: Subst = Subst {
            num: inner.num.clone(),
            set: inner
                .set
                .iter()
                .filter(|(k, _)| body_set_fv.contains(*k))
                .map(|(k, r)| (k.clone(), r.clone()))
                .collect(),
        };
        let avoid = relevant.set_avoid();
        if avoid.contains(v) {
            let mut all_avoid = avoid;
            all_avoid.extend(body_set_fv.iter().cloned());
            let v2 = fresh_name(v, &all_avoid);
            let mut with_rename = relevant;
            with_rename
                .set
                .insert(v.to_string(), SetRepl::Term(SetTerm::var(&v2)));
            (v2, with_rename)
        } else {
            (v.to_string(), relevant)
        }
    }

    pub fn apply_set(&self, s: &SetTerm) -> SetTerm {
        if self.is_empty() {
            return s.clone();
        }
        match s {
            SetTerm::Var(v) => match self.set.get(v) {
                Some(SetRepl::Term(r)) => r.clone(),
                Some(SetRepl::Abstraction(..)) => {
                    // An abstraction can only stand where a membership atom
                    // can absorb it; a bare set-term position cannot.
                    panic!("abstraction substituted into bare set-term position")
                }
                None => s.clone(),
            },
            SetTerm::Mu {
                set_var,
                num_var,
                body,
            } => {
                let (sv2, sub1) = self.under_set_binder(set_var, &fv_set_formula(body));
                let mut body_fv = fv_num_formula(body);
                body_fv.remove(num_var);
                let (nv2, sub2) = sub1.under_num_binder(num_var, &body_fv);
                SetTerm::Mu {
                    set_var: sv2,
                    num_var: nv2,
                    body: Box::new(sub2.apply(body)),
                }
            }
            SetTerm::Nu {
                ann,
                set_var,
                num_var,
                body,
            } => {
                let (sv2, sub1) = self.under_set_binder(set_var, &fv_set_formula(body));
                let mut body_fv = fv_num_formula(body);
                body_fv.remove(num_var);
                let (nv2, sub2) = sub1.under_num_binder(num_var, &body_fv);
                SetTerm::Nu {
                    ann: ann.clone(),
                    set_var: sv2,
                    num_var: nv2,
                    body: Box::new(sub2.apply(body)),
                }
            }
        }
    }

    pub fn apply(&self, f: &Formula) -> Formula {
        if self.is_empty() {
            return f.clone();
        }
        match f {
            Formula::Lt(a, b) => Formula::Lt(self.apply_term(a), self.apply_term(b)),
            Formula::NLess(a, b) => Formula::NLess(self.apply_term(a), self.apply_term(b)),
            Formula::Eq(a, b) => Formula::Eq(self.apply_term(a), self.apply_term(b)),
            Formula::Neq(a, b) => Formula::Neq(self.apply_term(a), self.apply_term(b)),
            Formula::In(t, s) => {
                let t2 = self.apply_term(t);
                if let SetTerm::Var(v) = s {
                    match self.set.get(v) {
                        Some(SetRepl::Abstraction(av, af)) => {
                            return Subst::one_num(av, t2).apply(af);
                        }
                        Some(SetRepl::Term(r)) => return Formula::In(t2, r.clone()),
                        None => return Formula::In(t2, s.clone()),
                    }
                }
                Formula::In(t2, self.apply_set(s))
            }
            Formula::NotIn(t, s) => {
                let t2 = self.apply_term(t);
                if let SetTerm::Var(v) = s {
                    match self.set.get(v) {
                        Some(SetRepl::Abstraction(av, af)) => {
                            return negate(&Subst::one_num(av, t2).apply(af));
                        }
                        Some(SetRepl::Term(r)) => return Formula::NotIn(t2, r.clone()),
                        None => return Formula::NotIn(t2, s.clone()),
                    }
                }
                Formula::NotIn(t2, self.apply_set(s))
            }
            Formula::And(a, b) => Formula::and(self.apply(a), self.apply(b)),
            Formula::Or(a, b) => Formula::or(self.apply(a), self.apply(b)),
            Formula::All(v, g) => {
                let (v2, inner) = self.under_num_binder(v, &{
                    let mut fv = fv_num_formula(g);
                    fv.remove(v);
                    fv
                });
                Formula::All(v2, Box::new(inner.apply(g)))
            }
            Formula::Ex(v, g) => {
                let (v2, inner) = self.under_num_binder(v, &{
                    let mut fv = fv_num_formula(g);
                    fv.remove(v);
                    fv
                });
                Formula::Ex(v2, Box::new(inner.apply(g)))
            }
        }
    }
}

/// `f[t/x]` for a number variable.
pub fn subst_num(f: &Formula, x: &str, t: &Term) -> Formula {
    Subst::one_num(x, t.clone()).apply(f)
}

/// `f[S/X]` for a set variable.
pub fn subst_set(f: &Formula, x: &str, s: &SetTerm) -> Formula {
    Subst::one_set(x, s.clone()).apply(f)
}

/// `f[psi/X]` where `psi` is an abstraction with designated variable `v`:
/// `t in X` becomes `psi[t/v]`, `t notin X` its negation.
pub fn subst_abstraction(f: &Formula, x: &str, v: &str, psi: &Formula) -> Formula {
    Subst::one_abs(x, v, psi.clone()).apply(f)
}

/// Apply a substitution map (variable -> term) simultaneously.
pub fn apply_theta(f: &Formula, theta: &[(String, Term)]) -> Formula {
    let sub = Subst {
        num: theta.iter().cloned().collect(),
        set: BTreeMap::new(),
    };
    sub.apply(f)
}

// ---------------------------------------------------------------------------
// Fixed-point unfolding
// ---------------------------------------------------------------------------

/// `mu X x phi` at `t`: the premise formula `phi[mu X x phi / X, t / x]`.
pub fn mu_unfold(t: &Term, s: &SetTerm) -> Option<Formula> {
    if let SetTerm::Mu {
        set_var,
        num_var,
        body,
    } = s
    {
        let sub = Subst {
            num: [(num_var.clone(), t.clone())].into_iter().collect(),
            set: [(set_var.clone(), SetRepl::Term(s.clone()))]
                .into_iter()
                .collect(),
        };
        Some(sub.apply(body))
    } else {
        None
    }
}

/// Bare `nu X x phi` at `t`: `phi[nu X x phi / X, t / x]`.
pub fn nu_unfold(t: &Term, s: &SetTerm) -> Option<Formula> {
    if let SetTerm::Nu {
        ann: None,
        set_var,
        num_var,
        body,
    } = s
    {
        let sub = Subst {
            num: [(num_var.clone(), t.clone())].into_iter().collect(),
            set: [(set_var.clone(), SetRepl::Term(s.clone()))]
                .into_iter()
                .collect(),
        };
        Some(sub.apply(body))
    } else {
        None
    }
}

/// Annotated `nu^k X x phi` at `t`, unfolding with the fresh child `lambda`:
/// `phi[nu^lambda X x phi / X, t / x]`.
pub fn nu_ann_unfold(t: &Term, s: &SetTerm, lambda: &str) -> Option<Formula> {
    if let SetTerm::Nu {
        ann: Some(_),
        set_var,
        num_var,
        body,
    } = s
    {
        let child = SetTerm::Nu {
            ann: Some(lambda.to_string()),
            set_var: set_var.clone(),
            num_var: num_var.clone(),
            body: body.clone(),
        };
        let sub = Subst {
            num: [(num_var.clone(), t.clone())].into_iter().collect(),
            set: [(set_var.clone(), SetRepl::Term(child))]
                .into_iter()
                .collect(),
        };
        Some(sub.apply(body))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Alpha-equivalence and canonical renaming
// ---------------------------------------------------------------------------

/// Structural equality up to renaming of bound (number and set) variables.
/// Annotations on `nu` binders are free names and must match exactly.
pub fn alpha_eq(a: &Formula, b: &Formula) -> bool {
    canon(a) == canon(b)
}

pub fn alpha_eq_set(a: &SetTerm, b: &SetTerm) -> bool {
    // Compare via membership with a shared fresh term.
    let probe = Term::var("#probe");
    canon(&Formula::In(probe.clone(), a.clone())) == canon(&Formula::In(probe, b.clone()))
}

/// Canonical bound-variable renaming of a set term (via a probe membership).
pub fn canon_set(s: &SetTerm) -> SetTerm {
    let probe = Term::var("#probe");
    match canon(&Formula::In(probe, s.clone())) {
        Formula::In(_, out) => out,
        _ => unreachable!("canon preserves the atom shape"),
    }
}

/// Canonical bound-variable renaming: binders become `#b0`, `#b1`, ... in
/// traversal order (`#` keeps them disjoint from parsable user names).
/// Free variables and ordinal annotations are untouched.
pub fn canon(f: &Formula) -> Formula {
    fn go(
        f: &Formula,
        num_env: &mut Vec<(String, String)>,
        set_env: &mut Vec<(String, String)>,
        counter: &mut usize,
    ) -> Formula {
        let term = |t: &Term, num_env: &Vec<(String, String)>| -> Term {
            fn tr(t: &Term, env: &Vec<(String, String)>) -> Term {
                match t {
                    Term::Var(x) => {
                        for (from, to) in env.iter().rev() {
                            if from == x {
                                return Term::var(to);
                            }
                        }
                        t.clone()
                    }
                    Term::Zero | Term::Eps => t.clone(),
                    Term::Succ(a) => Term::Succ(Box::new(tr(a, env))),
                    Term::Plus(a, b) => Term::Plus(Box::new(tr(a, env)), Box::new(tr(b, env))),
                    Term::Times(a, b) => Term::Times(Box::new(tr(a, env)), Box::new(tr(b, env))),
                    Term::App(a, b) => Term::App(Box::new(tr(a, env)), Box::new(tr(b, env))),
                }
            }
            tr(t, num_env)
        };
        fn go_set(
            s: &SetTerm,
            num_env: &mut Vec<(String, String)>,
            set_env: &mut Vec<(String, String)>,
            counter: &mut usize,
        ) -> SetTerm {
            match s {
                SetTerm::Var(v) => {
                    for (from, to) in set_env.iter().rev() {
                        if from == v {
                            return SetTerm::var(to);
                        }
                    }
                    s.clone()
                }
                SetTerm::Mu {
                    set_var,
                    num_var,
                    body,
                } => {
                    let sv = format!("#b{}", *counter);
                    *counter += 1;
                    let nv = format!("#b{}", *counter);
                    *counter += 1;
                    set_env.push((set_var.clone(), sv.clone()));
                    num_env.push((num_var.clone(), nv.clone()));
                    let b = go(body, num_env, set_env, counter);
                    num_env.pop();
                    set_env.pop();
                    SetTerm::Mu {
                        set_var: sv,
                        num_var: nv,
                        body: Box::new(b),
                    }
                }
                SetTerm::Nu {
                    ann,
                    set_var,
                    num_var,
                    body,
                } => {
                    let sv = format!("#b{}", *counter);
                    *counter += 1;
                    let nv = format!("#b{}", *counter);
                    *counter += 1;
                    set_env.push((set_var.clone(), sv.clone()));
                    num_env.push((num_var.clone(), nv.clone()));
                    let b = go(body, num_env, set_env, counter);
                    num_env.pop();
                    set_env.pop();
                    SetTerm::Nu {
                        ann: ann.clone(),
                        set_var: sv,
                        num_var: nv,
                        body: Box::new(b),
                    }
                }
            }
        }
        match f {
            Formula::Lt(a, b) => Formula::Lt(term(a, num_env), term(b, num_env)),
            Formula::NLess(a, b) => Formula::NLess(term(a, num_env), term(b, num_env)),
            Formula::Eq(a, b) => Formula::Eq(term(a, num_env), term(b, num_env)),
            Formula::Neq(a, b) => Formula::Neq(term(a, num_env), term(b, num_env)),
            Formula::In(t, s) => {
                Formula::In(term(t, num_env), go_set(s, num_env, set_env, counter))
            }
            Formula::NotIn(t, s) => {
                Formula::NotIn(term(t, num_env), go_set(s, num_env, set_env, counter))
            }
            Formula::And(a, b) => {
                let l = go(a, num_env, set_env, counter);
                let r = go(b, num_env, set_env, counter);
                Formula::and(l, r)
            }
            Formula::Or(a, b) => {
                let l = go(a, num_env, set_env, counter);
                let r = go(b, num_env, set_env, counter);
                Formula::or(l, r)
            }
            Formula::All(v, g) => {
                let nv = format!("#b{}", *counter);
                *counter += 1;
                num_env.push((v.clone(), nv.clone()));
                let b = go(g, num_env, set_env, counter);
                num_env.pop();
                Formula::All(nv, Box::new(b))
            }
            Formula::Ex(v, g) => {
                let nv = format!("#b{}", *counter);
                *counter += 1;
                num_env.push((v.clone(), nv.clone()));
                let b = go(g, num_env, set_env, counter);
                num_env.pop();
                Formula::Ex(nv, Box::new(b))
            }
        }
    }
    go(f, &mut Vec::new(), &mut Vec::new(), &mut 0)
}

// ---------------------------------------------------------------------------
// Ordinal assignments
// ---------------------------------------------------------------------------

fn visit_nu_binders<'a>(f: &'a Formula, visit: &mut impl FnMut(&'a Option<String>)) {
    fn go_set<'a>(s: &'a SetTerm, visit: &mut impl FnMut(&'a Option<String>)) {
        match s {
            SetTerm::Var(_) => {}
            SetTerm::Mu { body, .. } => visit_nu_binders(body, visit),
            SetTerm::Nu { ann, body, .. } => {
                visit(ann);
                visit_nu_binders(body, visit);
            }
        }
    }
    match f {
        Formula::Lt(..) | Formula::NLess(..) | Formula::Eq(..) | Formula::Neq(..) => {}
        Formula::In(_, s) | Formula::NotIn(_, s) => go_set(s, visit),
        Formula::And(a, b) | Formula::Or(a, b) => {
            visit_nu_binders(a, visit);
            visit_nu_binders(b, visit);
        }
        Formula::All(_, g) | Formula::Ex(_, g) => visit_nu_binders(g, visit),
    }
}

/// Number of `nu` binders (bare and annotated alike), in left-to-right
/// preorder — the positions an ordinal assignment types.
pub fn nu_count(f: &Formula) -> usize {
    let mut n = 0usize;
    visit_nu_binders(f, &mut |_| n += 1);
    n
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssignError {
    #[error("ordinal assignment length {given} does not match nu-binder count {expected}")]
    LengthMismatch { given: usize, expected: usize },
}

/// Replace the i-th `nu` binder's annotation by the i-th assignment entry
/// (a variable annotates, `*` leaves the binder bare). Overwrites any
/// existing annotations.
pub fn annotate(f: &Formula, ell: &[OrdEntry]) -> Result<Formula, AssignError> {
    let expected = nu_count(f);
    if ell.len() != expected {
        return Err(AssignError::LengthMismatch {
            given: ell.len(),
            expected,
        });
    }
    fn go(f: &Formula, ell: &[OrdEntry], idx: &mut usize) -> Formula {
        fn go_set(s: &SetTerm, ell: &[OrdEntry], idx: &mut usize) -> SetTerm {
            match s {
                SetTerm::Var(_) => s.clone(),
                SetTerm::Mu {
                    set_var,
                    num_var,
                    body,
                } => SetTerm::Mu {
                    set_var: set_var.clone(),
                    num_var: num_var.clone(),
                    body: Box::new(go(body, ell, idx)),
                },
                SetTerm::Nu {
                    set_var,
                    num_var,
                    body,
                    ..
                } => {
                    let ann = ell[*idx].clone();
                    *idx += 1;
                    SetTerm::Nu {
                        ann,
                        set_var: set_var.clone(),
                        num_var: num_var.clone(),
                        body: Box::new(go(body, ell, idx)),
                    }
                }
            }
        }
        match f {
            Formula::Lt(..) | Formula::NLess(..) | Formula::Eq(..) | Formula::Neq(..) => f.clone(),
            Formula::In(t, s) => Formula::In(t.clone(), go_set(s, ell, idx)),
            Formula::NotIn(t, s) => Formula::NotIn(t.clone(), go_set(s, ell, idx)),
            Formula::And(a, b) => {
                let l = go(a, ell, idx);
                let r = go(b, ell, idx);
                Formula::and(l, r)
            }
            Formula::Or(a, b) => {
                let l = go(a, ell, idx);
                let r = go(b, ell, idx);
                Formula::or(l, r)
            }
            Formula::All(v, g) => Formula::All(v.clone(), Box::new(go(g, ell, idx))),
            Formula::Ex(v, g) => Formula::Ex(v.clone(), Box::new(go(g, ell, idx))),
        }
    }
    let mut idx = 0usize;
    let out = go(f, ell, &mut idx);
    debug_assert_eq!(idx, expected);
    Ok(out)
}

/// Remove every annotation.
pub fn strip(f: &Formula) -> Formula {
    let stars = vec![None; nu_count(f)];
    annotate(f, &stars).expect("length computed from the same formula")
}

pub fn strip_set(s: &SetTerm) -> SetTerm {
    let probe = Term::var("#probe");
    match strip(&Formula::In(probe, s.clone())) {
        Formula::In(_, out) => out,
        _ => unreachable!(),
    }
}

/// Read off the ordinal assignment carried by a formula's `nu` binders.
pub fn extract_assignment(f: &Formula) -> Vec<OrdEntry> {
    let mut out = Vec::new();
    visit_nu_binders(f, &mut |ann| out.push(ann.clone()));
    out
}

/// The assignment typing the `mu`-unfolding `phi[mu X x phi / X, t / x]`
/// when `phi` is typed by `ell`: every substituted occurrence of `X`
/// receives a fresh copy of `ell` under a bare `mu` head. Characterized by
/// `annotate(unfolding, result) == unfold-of-annotated`.
pub fn push_assignment_mu(
    body: &Formula,
    num_var: &str,
    set_var: &str,
    t: &Term,
    ell: &[OrdEntry],
) -> Result<Vec<OrdEntry>, AssignError> {
    let annotated_body = annotate(body, ell)?;
    let fp = SetTerm::Mu {
        set_var: set_var.to_string(),
        num_var: num_var.to_string(),
        body: Box::new(annotated_body.clone()),
    };
    let sub = Subst {
        num: [(num_var.to_string(), t.clone())].into_iter().collect(),
        set: [(set_var.to_string(), SetRepl::Term(fp))]
            .into_iter()
            .collect(),
    };
    Ok(extract_assignment(&sub.apply(&annotated_body)))
}

/// The assignment typing the `nu`-unfolding when the head is annotated with
/// `kappa`: every substituted `X` receives `kappa` followed by a copy of
/// `ell`.
pub fn push_assignment_nu(
    body: &Formula,
    num_var: &str,
    set_var: &str,
    t: &Term,
    ell: &[OrdEntry],
    kappa: &str,
) -> Result<Vec<OrdEntry>, AssignError> {
    let annotated_body = annotate(body, ell)?;
    let fp = SetTerm::Nu {
        ann: Some(kappa.to_string()),
        set_var: set_var.to_string(),
        num_var: num_var.to_string(),
        body: Box::new(annotated_body.clone()),
    };
    let sub = Subst {
        num: [(num_var.to_string(), t.clone())].into_iter().collect(),
        set: [(set_var.to_string(), SetRepl::Term(fp))]
            .into_iter()
            .collect(),
    };
    Ok(extract_assignment(&sub.apply(&annotated_body)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_in(t: Term, s: SetTerm) -> Formula {
        Formula::In(t, s)
    }

    /// mu X x (x = 0 or x in X)
    fn simple_mu() -> SetTerm {
        SetTerm::Mu {
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(Formula::or(
                Formula::Eq(Term::var("x"), Term::Zero),
                t_in(Term::var("x"), SetTerm::var("X")),
            )),
        }
    }

    #[test]
    fn negate_atoms() {
        let f = Formula::Lt(Term::var("x"), Term::var("y"));
        assert_eq!(negate(&f), Formula::NLess(Term::var("x"), Term::var("y")));
        assert_eq!(negate(&negate(&f)), f);
    }

    #[test]
    fn negate_mu_membership() {
        // negate(t in mu X x (x=0 or x in X)) = t in nu X x (x != 0 and x in X):
        // the dual body negates everything except the bound variable, whose
        // double negation cancels so the result stays positive in X.
        let f = t_in(Term::var("t"), simple_mu());
        let expected = t_in(
            Term::var("t"),
            SetTerm::Nu {
                ann: None,
                set_var: "X".into(),
                num_var: "x".into(),
                body: Box::new(Formula::and(
                    Formula::Neq(Term::var("x"), Term::Zero),
                    Formula::In(Term::var("x"), SetTerm::var("X")),
                )),
            },
        );
        assert_eq!(negate(&f), expected);
        assert_eq!(negate(&negate(&f)), f);
        assert!(is_positive(
            &Formula::and(
                Formula::Neq(Term::var("x"), Term::Zero),
                Formula::In(Term::var("x"), SetTerm::var("X")),
            ),
            "X"
        ));
    }

    #[test]
    fn negate_is_involution_on_quantifiers() {
        let f = Formula::all(
            "x",
            Formula::ex(
                "y",
                Formula::and(
                    Formula::Eq(Term::var("x"), Term::var("y")),
                    t_in(Term::var("x"), simple_mu()),
                ),
            ),
        );
        assert_eq!(negate(&negate(&f)), f);
    }

    #[test]
    fn negate_annotated_nu_keeps_notin() {
        let s = SetTerm::Nu {
            ann: Some("k0".into()),
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(t_in(Term::var("x"), SetTerm::var("X"))),
        };
        let f = t_in(Term::var("t"), s.clone());
        assert_eq!(negate(&f), Formula::NotIn(Term::var("t"), s));
        assert_eq!(negate(&negate(&f)), f);
    }

    #[test]
    fn positivity() {
        assert!(is_positive(
            &t_in(Term::var("t"), SetTerm::var("X")),
            "X"
        ));
        assert!(!is_positive(
            &Formula::NotIn(Term::var("t"), SetTerm::var("X")),
            "X"
        ));
        // N's body: x=0 or exists y (y in X and x = s y)
        let body = Formula::or(
            Formula::Eq(Term::var("x"), Term::Zero),
            Formula::ex(
                "y",
                Formula::and(
                    t_in(Term::var("y"), SetTerm::var("X")),
                    Formula::Eq(Term::var("x"), Term::Succ(Box::new(Term::var("y")))),
                ),
            ),
        );
        assert!(is_positive(&body, "X"));
    }

    #[test]
    fn subst_basic() {
        let f = Formula::Eq(Term::var("x"), Term::Zero);
        let g = subst_num(&f, "x", &Term::Succ(Box::new(Term::Zero)));
        assert_eq!(g, Formula::Eq(Term::Succ(Box::new(Term::Zero)), Term::Zero));

        let h = subst_set(
            &t_in(Term::var("y"), SetTerm::var("X")),
            "X",
            &simple_mu(),
        );
        assert_eq!(h, t_in(Term::var("y"), simple_mu()));
    }

    #[test]
    fn subst_capture_avoiding() {
        // (exists y (y in X))[ mu Z z (z = y) / X ]: the free y of the image
        // must not be captured by the binder.
        let f = Formula::ex("y", t_in(Term::var("y"), SetTerm::var("X")));
        let image = SetTerm::Mu {
            set_var: "Z".into(),
            num_var: "z".into(),
            body: Box::new(Formula::Eq(Term::var("z"), Term::var("y"))),
        };
        let g = subst_set(&f, "X", &image.clone());
        match &g {
            Formula::Ex(v, inner) => {
                assert_ne!(v, "y", "binder must be renamed");
                match &**inner {
                    Formula::In(t, s) => {
                        assert_eq!(t, &Term::var(v.as_str()));
                        assert_eq!(s, &image, "image must keep its free y");
                    }
                    other => panic!("unexpected body {other:?}"),
                }
            }
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn theta_is_simultaneous() {
        // [x -> y, y -> x] swaps.
        let f = Formula::Lt(Term::var("x"), Term::var("y"));
        let g = apply_theta(
            &f,
            &[
                ("x".to_string(), Term::var("y")),
                ("y".to_string(), Term::var("x")),
            ],
        );
        assert_eq!(g, Formula::Lt(Term::var("y"), Term::var("x")));
    }

    #[test]
    fn alpha_equivalence() {
        let a = Formula::all("x", Formula::Eq(Term::var("x"), Term::var("x")));
        let b = Formula::all("y", Formula::Eq(Term::var("y"), Term::var("y")));
        assert!(alpha_eq(&a, &b));
        let c = Formula::all("x", Formula::Eq(Term::var("x"), Term::var("z")));
        let d = Formula::all("y", Formula::Eq(Term::var("y"), Term::var("w")));
        assert!(!alpha_eq(&c, &d));
    }

    #[test]
    fn annotate_strip_roundtrip() {
        let nu = SetTerm::Nu {
            ann: None,
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(t_in(Term::var("x"), SetTerm::var("X"))),
        };
        let f = t_in(Term::var("t"), nu);
        assert_eq!(nu_count(&f), 1);
        let ann = annotate(&f, &[Some("k0".into())]).unwrap();
        assert_eq!(
            extract_assignment(&ann),
            vec![Some("k0".to_string())]
        );
        assert_eq!(strip(&ann), f);
        // zero-nu formula with empty assignment is identity
        let g = Formula::Eq(Term::var("x"), Term::Zero);
        assert_eq!(annotate(&g, &[]).unwrap(), g);
        assert!(annotate(&g, &[None]).is_err());
    }

    #[test]
    fn push_nu_characteristic_equation() {
        // body = x in X (one X occurrence, no inner nu): nu^k([]) = [k]
        let body = t_in(Term::var("x"), SetTerm::var("X"));
        let ell = push_assignment_nu(&body, "x", "X", &Term::var("t"), &[], "k0").unwrap();
        assert_eq!(ell, vec![Some("k0".to_string())]);

        // mu([]) on a nu-free body with X occurrences stays empty
        let ellm = push_assignment_mu(&body, "x", "X", &Term::var("t"), &[]).unwrap();
        assert_eq!(ellm, Vec::<OrdEntry>::new());
    }

    #[test]
    fn push_nu_distributes_over_occurrences() {
        // body = (x in X) and (x in X), inner nu absent:
        // unfolding duplicates the head annotation once per occurrence.
        let body = Formula::and(
            t_in(Term::var("x"), SetTerm::var("X")),
            t_in(Term::var("x"), SetTerm::var("X")),
        );
        let ell = push_assignment_nu(&body, "x", "X", &Term::var("t"), &[], "k1").unwrap();
        assert_eq!(ell, vec![Some("k1".to_string()), Some("k1".to_string())]);
    }

    #[test]
    fn wellformedness() {
        assert!(is_wellformed(&t_in(Term::var("t"), simple_mu())));
        let bad = SetTerm::Mu {
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(Formula::NotIn(Term::var("x"), SetTerm::var("X"))),
        };
        assert!(!is_wellformed(&t_in(Term::var("t"), bad)));
    }
}
