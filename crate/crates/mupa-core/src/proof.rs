//! Proof objects: sequents, ordinal-variable constraint forests, rule
//! labels with their stored arguments, and finite (possibly cyclic)
//! derivation graphs with an S-expression file format and DOT export.
//!
//! Sequents are *lists*: rules address formulas positionally (principal
//! formulas sit at fixed positions, exchange swaps one adjacent pair,
//! weakening appends strictly at the end).
//!
//! A constraint is a strict partial order on finitely many ordinal
//! variables whose upper sets are linearly ordered (a forest growing
//! downward: every variable has at most one parent, its least strict upper
//! bound). It is stored transitively closed.

use crate::formula::Formula;
use crate::sexpr::{
    formula_from_sx, formula_to_sx, read_all, term_from_sx, term_to_sx, ParseError, Sx,
};
use crate::formula::Term;
use std::collections::{BTreeMap, BTreeSet};

// ---------------------------------------------------------------------------
// Sequents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Sequent(pub Vec<Formula>);

impl Sequent {
    pub fn new(fs: Vec<Formula>) -> Sequent {
        Sequent(fs)
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    /// Ordinal variables occurring in any formula.
    pub fn ord_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for f in &self.0 {
            out.extend(crate::formula::ord_vars_formula(f));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Constraints
// ---------------------------------------------------------------------------

/// Transitively closed strict order with forest-shaped Hasse diagram.
/// `less` holds pairs `(a, b)` meaning `a < b` (`a` is below `b`; children
/// are created *below* the variable they refine).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Constraint {
    vars: BTreeSet<String>,
    less: BTreeSet<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstraintError {
    #[error("variable {0} already present")]
    Duplicate(String),
    #[error("variable {0} not present")]
    Missing(String),
    #[error("constraint is not a forest: {0}")]
    NotForest(String),
}

impl Constraint {
    pub fn new() -> Constraint {
        Constraint::default()
    }

    pub fn vars(&self) -> &BTreeSet<String> {
        &self.vars
    }

    pub fn contains(&self, v: &str) -> bool {
        self.vars.contains(v)
    }

    pub fn lt(&self, a: &str, b: &str) -> bool {
        self.less.contains(&(a.to_string(), b.to_string()))
    }

    pub fn le(&self, a: &str, b: &str) -> bool {
        a == b || self.lt(a, b)
    }

    /// Add a fresh root (maximal, unrelated variable).
    pub fn add_root(&self, v: &str) -> Result<Constraint, ConstraintError> {
        if self.contains(v) {
            return Err(ConstraintError::Duplicate(v.to_string()));
        }
        let mut out = self.clone();
        out.vars.insert(v.to_string());
        Ok(out)
    }

    /// Add `child` strictly below `parent`: `child < x` exactly for
    /// `parent <= x`.
    pub fn add_child(&self, parent: &str, child: &str) -> Result<Constraint, ConstraintError> {
        if !self.contains(parent) {
            return Err(ConstraintError::Missing(parent.to_string()));
        }
        if self.contains(child) {
            return Err(ConstraintError::Duplicate(child.to_string()));
        }
        let mut out = self.clone();
        out.vars.insert(child.to_string());
        out.less.insert((child.to_string(), parent.to_string()));
        for v in &self.vars {
            if self.lt(parent, v) {
                out.less.insert((child.to_string(), v.clone()));
            }
        }
        Ok(out)
    }

    /// Induced order on `keep`.
    pub fn restrict(&self, keep: &BTreeSet<String>) -> Constraint {
        Constraint {
            vars: self.vars.intersection(keep).cloned().collect(),
            less: self
                .less
                .iter()
                .filter(|(a, b)| keep.contains(a) && keep.contains(b))
                .cloned()
                .collect(),
        }
    }

    /// Remove a set of variables.
    pub fn remove(&self, drop: &BTreeSet<String>) -> Constraint {
        let keep: BTreeSet<String> = self.vars.difference(drop).cloned().collect();
        self.restrict(&keep)
    }

    /// Immediate children of `v`: variables directly below it.
    pub fn children_of(&self, v: &str) -> BTreeSet<String> {
        self.vars
            .iter()
            .filter(|c| {
                self.lt(c, v)
                    && !self
                        .vars
                        .iter()
                        .any(|m| self.lt(c, m) && self.lt(m, v))
            })
            .cloned()
            .collect()
    }

    /// The unique minimal strict upper bound, if any.
    pub fn parent_of(&self, v: &str) -> Option<String> {
        let uppers: Vec<&String> = self.vars.iter().filter(|u| self.lt(v, u)).collect();
        uppers
            .iter()
            .find(|u| !uppers.iter().any(|m| self.lt(m, u)))
            .map(|u| (*u).clone())
    }

    /// Strict descendants of `v` (everything below it).
    pub fn below(&self, v: &str) -> BTreeSet<String> {
        self.vars.iter().filter(|c| self.lt(c, v)).cloned().collect()
    }

    /// Validity: irreflexive, transitive, and upper sets linearly ordered.
    pub fn validate(&self) -> Result<(), ConstraintError> {
        for (a, b) in &self.less {
            if a == b {
                return Err(ConstraintError::NotForest(format!("{a} < {a}")));
            }
            if !self.vars.contains(a) || !self.vars.contains(b) {
                return Err(ConstraintError::Missing(format!("{a} or {b}")));
            }
            if self.less.contains(&(b.clone(), a.clone())) {
                return Err(ConstraintError::NotForest(format!("{a} < {b} < {a}")));
            }
        }
        for (a, b) in &self.less {
            for (c, d) in &self.less {
                if b == c && !self.less.contains(&(a.clone(), d.clone())) {
                    return Err(ConstraintError::NotForest(format!(
                        "not transitively closed: {a} < {b} < {d}"
                    )));
                }
            }
        }
        for v in &self.vars {
            // Upper set must be a chain.
            let uppers: Vec<&String> = self.vars.iter().filter(|u| self.lt(v, u)).collect();
            for (i, u1) in uppers.iter().enumerate() {
                for u2 in uppers.iter().skip(i + 1) {
                    if !self.lt(u1, u2) && !self.lt(u2, u1) {
                        return Err(ConstraintError::NotForest(format!(
                            "uppers of {v} not a chain: {u1} vs {u2}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Variables eligible for a reset step on `kappa` given sequent
    /// variables `used`: `kappa` present, unused, with nonempty child set
    /// none of which is used (removing the children must keep the premise
    /// well-formed).
    pub fn reset_applicable(&self, kappa: &str, used: &BTreeSet<String>) -> bool {
        if !self.contains(kappa) || used.contains(kappa) {
            return false;
        }
        let children = self.children_of(kappa);
        !children.is_empty() && children.is_disjoint(used)
    }

    /// The prune set: variables all of whose weak descendants are unused.
    pub fn prune_set(&self, used: &BTreeSet<String>) -> BTreeSet<String> {
        self.vars
            .iter()
            .filter(|v| {
                !used.contains(*v) && self.below(v).is_disjoint(used)
            })
            .cloned()
            .collect()
    }
}

/// A constraint together with a sequent. Well-formed when every ordinal
/// variable used in the sequent is governed by the constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedSequent {
    pub constraint: Constraint,
    pub sequent: Sequent,
}

impl ExtendedSequent {
    pub fn is_wellformed(&self) -> bool {
        self.constraint.validate().is_ok()
            && self.sequent.ord_vars().is_subset(self.constraint.vars())
    }
}

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

/// Rule label plus the arguments stored at the node (cut formula, exchange
/// position, substitution, witnesses, fresh names, rewrite positions,
/// removal sets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    /// `Gamma, ¬phi, phi` (the last two formulas are dual).
    Id,
    /// Premise is a prefix of the conclusion.
    Weaken,
    /// Swap the adjacent pair at `at` and `at+1`.
    Exchange { at: usize },
    /// Conclusion is `theta(premise)` for the stored substitution.
    Sub { theta: Vec<(String, Term)> },
    /// Premises `Gamma, phi` and `Gamma, ¬phi`.
    Cut { phi: Formula },
    And,
    Or,
    /// Fresh eigenvariable for the universal premise.
    All { fresh: String },
    /// Existential witness term.
    Ex { witness: Term },
    /// Conclusion `Gamma(t), s != t` from premise `Gamma(s)`; `positions`
    /// lists the rewritten occurrences as (formula index, AST path).
    EqSub { positions: Vec<(usize, Vec<usize>)> },
    /// `t = t`, a singleton sequent.
    EqRefl,
    /// The seven arithmetic axioms (index 1..=7).
    Pa(u8),
    /// `t in N` for the canonical numeric fixed point, any term `t`.
    Nat,
    /// Least-fixed-point unfolding.
    Mu,
    /// Cyclic system: greatest-fixed-point unfolding (no argument).
    /// Annotated system: annotation step introducing the fresh root `fresh`.
    Nu { fresh: Option<String> },
    /// Induction with stored invariant abstraction (`var`, `inv`) and the
    /// fresh eigenvariable of the second premise.
    Ind {
        var: String,
        inv: Formula,
        fresh: String,
    },
    /// Annotated unfolding of `nu^kappa`, creating `fresh` below kappa.
    NuAnn { fresh: String },
    /// Remove the children of `kappa` from the constraint.
    Reset { kappa: String },
    /// Remove the prune set of the conclusion.
    Prune,
    /// Constraint weakening: remove the listed variables.
    Cw { removed: Vec<String> },
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::Id => "id",
            Rule::Weaken => "w",
            Rule::Exchange { .. } => "e",
            Rule::Sub { .. } => "sub",
            Rule::Cut { .. } => "cut",
            Rule::And => "and",
            Rule::Or => "or",
            Rule::All { .. } => "all",
            Rule::Ex { .. } => "ex",
            Rule::EqSub { .. } => "eqsub",
            Rule::EqRefl => "eqrefl",
            Rule::Pa(1) => "pa1",
            Rule::Pa(2) => "pa2",
            Rule::Pa(3) => "pa3",
            Rule::Pa(4) => "pa4",
            Rule::Pa(5) => "pa5",
            Rule::Pa(6) => "pa6",
            Rule::Pa(_) => "pa7",
            Rule::Nat => "nat",
            Rule::Mu => "mu",
            Rule::Nu { .. } => "nu",
            Rule::Ind { .. } => "ind",
            Rule::NuAnn { .. } => "nu-ann",
            Rule::Reset { .. } => "reset",
            Rule::Prune => "prune",
            Rule::Cw { .. } => "cw",
        }
    }

    /// Number of premises the rule takes.
    pub fn arity(&self) -> usize {
        match self {
            Rule::Id
            | Rule::EqRefl
            | Rule::Pa(_)
            | Rule::Nat => 0,
            Rule::Cut { .. } | Rule::And | Rule::Ind { .. } => 2,
            _ => 1,
        }
    }

    pub fn is_axiom(&self) -> bool {
        self.arity() == 0
    }
}

// ---------------------------------------------------------------------------
// Proof graphs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub rule: Rule,
    pub sequent: Sequent,
    /// Present exactly on annotated-system nodes.
    pub constraint: Option<Constraint>,
    pub premises: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proof {
    pub root: String,
    pub nodes: BTreeMap<String, Node>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProofError {
    #[error("node {0}: premise {1} does not exist")]
    DanglingPremise(String, String),
    #[error("root {0} does not exist")]
    MissingRoot(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("node {node}: rule {rule} takes {expected} premises, found {found}")]
    Arity {
        node: String,
        rule: String,
        expected: usize,
        found: usize,
    },
}

impl Proof {
    pub fn node(&self, id: &str) -> &Node {
        &self.nodes[id]
    }

    /// Structural sanity: root exists, premises resolve, arities match.
    pub fn validate_structure(&self) -> Result<(), ProofError> {
        if !self.nodes.contains_key(&self.root) {
            return Err(ProofError::MissingRoot(self.root.clone()));
        }
        for node in self.nodes.values() {
            if node.premises.len() != node.rule.arity() {
                return Err(ProofError::Arity {
                    node: node.id.clone(),
                    rule: node.rule.name().to_string(),
                    expected: node.rule.arity(),
                    found: node.premises.len(),
                });
            }
            for p in &node.premises {
                if !self.nodes.contains_key(p) {
                    return Err(ProofError::DanglingPremise(node.id.clone(), p.clone()));
                }
            }
        }
        Ok(())
    }

    /// Node ids reachable from the root.
    pub fn reachable(&self) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.root.clone()];
        while let Some(id) = stack.pop() {
            if !seen.insert(id.clone()) {
                continue;
            }
            if let Some(node) = self.nodes.get(&id) {
                for p in &node.premises {
                    stack.push(p.clone());
                }
            }
        }
        seen
    }

    /// True when the premise graph restricted to reachable nodes is acyclic.
    pub fn is_acyclic(&self) -> bool {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            InProgress,
            Done,
        }
        let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
        // Iterative DFS with explicit phase to detect back edges.
        let mut stack: Vec<(&str, bool)> = vec![(self.root.as_str(), false)];
        while let Some((id, leaving)) = stack.pop() {
            if leaving {
                marks.insert(id, Mark::Done);
                continue;
            }
            match marks.get(id) {
                Some(Mark::InProgress) => return false,
                Some(Mark::Done) => continue,
                None => {}
            }
            marks.insert(id, Mark::InProgress);
            stack.push((id, true));
            if let Some(node) = self.nodes.get(id) {
                for p in &node.premises {
                    match marks.get(p.as_str()) {
                        Some(Mark::InProgress) => return false,
                        Some(Mark::Done) => {}
                        None => stack.push((self.nodes[p].id.as_str(), false)),
                    }
                }
            }
        }
        true
    }
}

// ---------------------------------------------------------------------------
// Proof file format
// ---------------------------------------------------------------------------
//
// (proof
//   (root r0)
//   (node r0 (rule cut (in x N)) (sequent (= x 0)) (premises r1 r2))
//   (node r1 (rule id) (sequent (!= 0 0) (= 0 0)) (premises))
//   ...)
//
// Annotated nodes append (constraint (vars k0 k1) (lt k1 k0) ...) after the
// premises; the listed pairs are the full transitive order.

fn rule_to_sx(rule: &Rule) -> Sx {
    let mut items = vec![Sx::atom("rule"), Sx::atom(rule.name())];
    match rule {
        Rule::Exchange { at } => items.push(Sx::atom(&at.to_string())),
        Rule::Sub { theta } => {
            for (x, t) in theta {
                items.push(Sx::list(vec![Sx::atom(x), term_to_sx(t)]));
            }
        }
        Rule::Cut { phi } => items.push(formula_to_sx(phi)),
        Rule::All { fresh } => items.push(Sx::atom(fresh)),
        Rule::Ex { witness } => items.push(term_to_sx(witness)),
        Rule::EqSub { positions } => {
            for (idx, path) in positions {
                let mut at = vec![Sx::atom("at"), Sx::atom(&idx.to_string())];
                at.extend(path.iter().map(|p| Sx::atom(&p.to_string())));
                items.push(Sx::list(at));
            }
        }
        Rule::Nu { fresh: Some(k) } => items.push(Sx::atom(k)),
        Rule::Ind { var, inv, fresh } => {
            items.push(Sx::atom(var));
            items.push(formula_to_sx(inv));
            items.push(Sx::atom(fresh));
        }
        Rule::NuAnn { fresh } => items.push(Sx::atom(fresh)),
        Rule::Reset { kappa } => items.push(Sx::atom(kappa)),
        Rule::Cw { removed } => {
            for k in removed {
                items.push(Sx::atom(k));
            }
        }
        _ => {}
    }
    Sx::list(items)
}

fn parse_usize(sx: &Sx, what: &str) -> Result<usize, ParseError> {
    sx.as_atom()
        .and_then(|a| a.parse::<usize>().ok())
        .ok_or_else(|| ParseError::Malformed {
            context: "parse".into(),
            what: what.into(),
            detail: format!("expected a number, found {sx}"),
        })
}

fn parse_name(sx: &Sx, what: &str) -> Result<String, ParseError> {
    sx.as_atom()
        .map(|a| a.to_string())
        .ok_or_else(|| ParseError::Malformed {
            context: "parse".into(),
            what: what.into(),
            detail: "expected a name".into(),
        })
}

fn rule_from_sx(sx: &Sx) -> Result<Rule, ParseError> {
    let bad = |detail: String| ParseError::Malformed {
        context: "parse".into(),
        what: "rule".into(),
        detail,
    };
    let items = sx.as_list().ok_or_else(|| bad("expected a list".into()))?;
    if items.first().and_then(Sx::as_atom) != Some("rule") {
        return Err(bad("expected (rule ...)".into()));
    }
    let name = items
        .get(1)
        .and_then(Sx::as_atom)
        .ok_or_else(|| bad("missing rule name".into()))?;
    let args = &items[2..];
    let no_args = |rule: Rule| -> Result<Rule, ParseError> {
        if args.is_empty() {
            Ok(rule)
        } else {
            Err(bad(format!("rule {name} takes no arguments")))
        }
    };
    match name {
        "id" => no_args(Rule::Id),
        "w" => no_args(Rule::Weaken),
        "e" => {
            if args.len() != 1 {
                return Err(bad("e takes one position".into()));
            }
            Ok(Rule::Exchange {
                at: parse_usize(&args[0], "exchange position")?,
            })
        }
        "sub" => {
            let mut theta = Vec::new();
            for pair in args {
                let p = pair
                    .as_list()
                    .filter(|p| p.len() == 2)
                    .ok_or_else(|| bad("sub argument must be (var term)".into()))?;
                theta.push((parse_name(&p[0], "substituted variable")?, term_from_sx(&p[1])?));
            }
            Ok(Rule::Sub { theta })
        }
        "cut" => {
            if args.len() != 1 {
                return Err(bad("cut takes one formula".into()));
            }
            Ok(Rule::Cut {
                phi: formula_from_sx(&args[0])?,
            })
        }
        "and" => no_args(Rule::And),
        "or" => no_args(Rule::Or),
        "all" => {
            if args.len() != 1 {
                return Err(bad("all takes one fresh variable".into()));
            }
            Ok(Rule::All {
                fresh: parse_name(&args[0], "fresh variable")?,
            })
        }
        "ex" => {
            if args.len() != 1 {
                return Err(bad("ex takes one witness term".into()));
            }
            Ok(Rule::Ex {
                witness: term_from_sx(&args[0])?,
            })
        }
        "eqsub" => {
            let mut positions = Vec::new();
            for at in args {
                let l = at
                    .as_list()
                    .filter(|l| l.len() >= 2 && l[0].as_atom() == Some("at"))
                    .ok_or_else(|| bad("eqsub argument must be (at idx path...)".into()))?;
                let idx = parse_usize(&l[1], "formula index")?;
                let path = l[2..]
                    .iter()
                    .map(|p| parse_usize(p, "path step"))
                    .collect::<Result<Vec<_>, _>>()?;
                positions.push((idx, path));
            }
            Ok(Rule::EqSub { positions })
        }
        "eqrefl" => no_args(Rule::EqRefl),
        "pa1" | "pa2" | "pa3" | "pa4" | "pa5" | "pa6" | "pa7" => {
            let i = name.as_bytes()[2] - b'0';
            no_args(Rule::Pa(i))
        }
        "nat" => no_args(Rule::Nat),
        "mu" => no_args(Rule::Mu),
        "nu" => match args.len() {
            0 => Ok(Rule::Nu { fresh: None }),
            1 => Ok(Rule::Nu {
                fresh: Some(parse_name(&args[0], "fresh ordinal variable")?),
            }),
            _ => Err(bad("nu takes at most one ordinal variable".into())),
        },
        "ind" => {
            if args.len() != 3 {
                return Err(bad("ind takes (var formula fresh)".into()));
            }
            Ok(Rule::Ind {
                var: parse_name(&args[0], "invariant variable")?,
                inv: formula_from_sx(&args[1])?,
                fresh: parse_name(&args[2], "fresh variable")?,
            })
        }
        "nu-ann" => {
            if args.len() != 1 {
                return Err(bad("nu-ann takes one fresh ordinal variable".into()));
            }
            Ok(Rule::NuAnn {
                fresh: parse_name(&args[0], "fresh ordinal variable")?,
            })
        }
        "reset" => {
            if args.len() != 1 {
                return Err(bad("reset takes one ordinal variable".into()));
            }
            Ok(Rule::Reset {
                kappa: parse_name(&args[0], "reset variable")?,
            })
        }
        "prune" => no_args(Rule::Prune),
        "cw" => Ok(Rule::Cw {
            removed: args
                .iter()
                .map(|a| parse_name(a, "removed variable"))
                .collect::<Result<Vec<_>, _>>()?,
        }),
        other => Err(bad(format!("unknown rule {other:?}"))),
    }
}

fn constraint_to_sx(c: &Constraint) -> Sx {
    let mut items = vec![Sx::atom("constraint")];
    let mut vars = vec![Sx::atom("vars")];
    vars.extend(c.vars.iter().map(|v| Sx::atom(v)));
    items.push(Sx::list(vars));
    for (a, b) in &c.less {
        items.push(Sx::list(vec![Sx::atom("lt"), Sx::atom(a), Sx::atom(b)]));
    }
    Sx::list(items)
}

fn constraint_from_sx(sx: &Sx) -> Result<Constraint, ParseError> {
    let bad = |detail: String| ParseError::Malformed {
        context: "parse".into(),
        what: "constraint".into(),
        detail,
    };
    let items = sx.as_list().ok_or_else(|| bad("expected a list".into()))?;
    if items.first().and_then(Sx::as_atom) != Some("constraint") {
        return Err(bad("expected (constraint ...)".into()));
    }
    let mut c = Constraint::new();
    for item in &items[1..] {
        let l = item.as_list().ok_or_else(|| bad("expected a sublist".into()))?;
        match l.first().and_then(Sx::as_atom) {
            Some("vars") => {
                for v in &l[1..] {
                    c.vars.insert(parse_name(v, "ordinal variable")?);
                }
            }
            Some("lt") if l.len() == 3 => {
                c.less.insert((
                    parse_name(&l[1], "ordinal variable")?,
                    parse_name(&l[2], "ordinal variable")?,
                ));
            }
            _ => return Err(bad(format!("unexpected entry {item}"))),
        }
    }
    c.validate().map_err(|e| bad(e.to_string()))?;
    Ok(c)
}

pub fn proof_to_sx(proof: &Proof) -> Sx {
    let mut items = vec![
        Sx::atom("proof"),
        Sx::list(vec![Sx::atom("root"), Sx::atom(&proof.root)]),
    ];
    for node in proof.nodes.values() {
        let mut n = vec![
            Sx::atom("node"),
            Sx::atom(&node.id),
            rule_to_sx(&node.rule),
        ];
        let mut seq = vec![Sx::atom("sequent")];
        seq.extend(node.sequent.0.iter().map(formula_to_sx));
        n.push(Sx::list(seq));
        let mut prem = vec![Sx::atom("premises")];
        prem.extend(node.premises.iter().map(|p| Sx::atom(p)));
        n.push(Sx::list(prem));
        if let Some(c) = &node.constraint {
            n.push(constraint_to_sx(c));
        }
        items.push(Sx::list(n));
    }
    Sx::list(items)
}

pub fn print_proof(proof: &Proof) -> String {
    let Sx::List(items) = proof_to_sx(proof) else {
        unreachable!()
    };
    // One top-level entry per line for readable diffs.
    let mut out = String::from("(proof\n");
    for item in &items[1..] {
        out.push_str("  ");
        out.push_str(&item.to_string_pretty(100));
        out.push('\n');
    }
    out.push_str(")\n");
    out
}

pub fn proof_from_sx(sx: &Sx) -> Result<Proof, ParseError> {
    let bad = |detail: String| ParseError::Malformed {
        context: "parse".into(),
        what: "proof".into(),
        detail,
    };
    let items = sx.as_list().ok_or_else(|| bad("expected a list".into()))?;
    if items.first().and_then(Sx::as_atom) != Some("proof") {
        return Err(bad("expected (proof ...)".into()));
    }
    let mut root: Option<String> = None;
    let mut nodes = BTreeMap::new();
    for item in &items[1..] {
        let l = item.as_list().ok_or_else(|| bad("expected a sublist".into()))?;
        match l.first().and_then(Sx::as_atom) {
            Some("root") if l.len() == 2 => {
                root = Some(parse_name(&l[1], "root id")?);
            }
            Some("node") => {
                if l.len() < 5 {
                    return Err(bad("node needs id, rule, sequent, premises".into()));
                }
                let id = parse_name(&l[1], "node id")?;
                let rule = rule_from_sx(&l[2])?;
                let seq_items = l[3]
                    .as_list()
                    .filter(|s| s.first().and_then(Sx::as_atom) == Some("sequent"))
                    .ok_or_else(|| bad("expected (sequent ...)".into()))?;
                let sequent = Sequent(
                    seq_items[1..]
                        .iter()
                        .map(formula_from_sx)
                        .collect::<Result<Vec<_>, _>>()?,
                );
                let prem_items = l[4]
                    .as_list()
                    .filter(|s| s.first().and_then(Sx::as_atom) == Some("premises"))
                    .ok_or_else(|| bad("expected (premises ...)".into()))?;
                let premises = prem_items[1..]
                    .iter()
                    .map(|p| parse_name(p, "premise id"))
                    .collect::<Result<Vec<_>, _>>()?;
                let constraint = match l.get(5) {
                    Some(c) => Some(constraint_from_sx(c)?),
                    None => None,
                };
                if l.len() > 6 {
                    return Err(bad(format!("node {id}: trailing entries")));
                }
                if nodes
                    .insert(
                        id.clone(),
                        Node {
                            id: id.clone(),
                            rule,
                            sequent,
                            constraint,
                            premises,
                        },
                    )
                    .is_some()
                {
                    return Err(bad(format!("duplicate node id {id}")));
                }
            }
            _ => return Err(bad(format!("unexpected entry {item}"))),
        }
    }
    let proof = Proof {
        root: root.ok_or_else(|| bad("missing (root ...)".into()))?,
        nodes,
    };
    proof
        .validate_structure()
        .map_err(|e| bad(e.to_string()))?;
    Ok(proof)
}

pub fn parse_proof(input: &str) -> Result<Proof, ParseError> {
    let all = read_all(input)?;
    match all.len() {
        1 => proof_from_sx(&all[0]),
        0 => Err(ParseError::UnexpectedEof),
        _ => Err(ParseError::TrailingInput),
    }
}

// ---------------------------------------------------------------------------
// DOT export
// ---------------------------------------------------------------------------

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Render the proof graph as a DOT digraph: one node per derivation step
/// labelled with rule and sequent, edges to premises.
pub fn proof_to_dot(proof: &Proof) -> String {
    let mut out = String::from("digraph proof {\n  rankdir=BT;\n  node [shape=box, fontname=\"monospace\"];\n");
    for node in proof.nodes.values() {
        let seq = node
            .sequent
            .0
            .iter()
            .map(crate::sexpr::print_formula)
            .collect::<Vec<_>>()
            .join(", ");
        let mut label = format!("{}\\n[{}]", node.rule.name(), dot_escape(&seq));
        if let Some(c) = &node.constraint {
            let vars = c.vars().iter().cloned().collect::<Vec<_>>().join(" ");
            label.push_str(&format!("\\nO: {{{}}}", dot_escape(&vars)));
        }
        out.push_str(&format!("  \"{}\" [label=\"{}\"];\n", dot_escape(&node.id), label));
        for p in &node.premises {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\";\n",
                dot_escape(&node.id),
                dot_escape(p)
            ));
        }
    }
    out.push_str(&format!("  \"{}\" [penwidth=2];\n", dot_escape(&proof.root)));
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_forest_ops() {
        let c = Constraint::new().add_root("k0").unwrap();
        let c = c.add_child("k0", "k1").unwrap();
        let c = c.add_child("k1", "k2").unwrap();
        assert!(c.lt("k2", "k0"));
        assert!(c.lt("k1", "k0"));
        assert!(!c.lt("k0", "k1"));
        assert_eq!(c.parent_of("k2"), Some("k1".to_string()));
        assert_eq!(c.children_of("k0"), ["k1".to_string()].into_iter().collect());
        c.validate().unwrap();

        // Sibling branches keep a forest shape.
        let c2 = c.add_child("k0", "k3").unwrap();
        c2.validate().unwrap();
        assert_eq!(
            c2.children_of("k0"),
            ["k1".to_string(), "k3".to_string()].into_iter().collect()
        );

        // Removing a middle variable reparents its children upward.
        let c3 = c.remove(&["k1".to_string()].into_iter().collect());
        c3.validate().unwrap();
        assert_eq!(c3.parent_of("k2"), Some("k0".to_string()));
    }

    #[test]
    fn reset_and_prune_sets() {
        let c = Constraint::new()
            .add_root("k0")
            .unwrap()
            .add_child("k0", "k1")
            .unwrap();
        let used_none: BTreeSet<String> = BTreeSet::new();
        let used_k1: BTreeSet<String> = ["k1".to_string()].into_iter().collect();
        assert!(c.reset_applicable("k0", &used_none));
        // A used child blocks the reset.
        assert!(!c.reset_applicable("k0", &used_k1));
        // No children -> no reset.
        assert!(!c.reset_applicable("k1", &used_none));
        // Prune set: with nothing used, everything prunes; with k1 used,
        // nothing does (k0 has a used descendant).
        assert_eq!(c.prune_set(&used_none).len(), 2);
        assert!(c.prune_set(&used_k1).is_empty());
    }

    #[test]
    fn proof_roundtrip() {
        let text = r#"
            (proof
              (root r0)
              (node r0 (rule cut (= 0 0)) (sequent (= 0 0)) (premises r1 r2))
              (node r1 (rule w) (sequent (= 0 0) (= 0 0)) (premises r2))
              (node r2 (rule eqrefl) (sequent (= 0 0)) (premises)))
        "#;
        let p = parse_proof(text).unwrap();
        assert_eq!(p.root, "r0");
        assert_eq!(p.nodes.len(), 3);
        let printed = print_proof(&p);
        let p2 = parse_proof(&printed).unwrap();
        assert_eq!(p, p2);
    }

    #[test]
    fn annotated_node_roundtrip() {
        let text = r#"
            (proof
              (root a)
              (node a (rule nu-ann k2)
                (sequent (in t (nu^ k1 X x (in x X))))
                (premises b)
                (constraint (vars k0 k1) (lt k1 k0)))
              (node b (rule mu)
                (sequent (in t (nu^ k2 X x (in x X))))
                (premises a)
                (constraint (vars k0 k1 k2) (lt k1 k0) (lt k2 k0) (lt k2 k1))))
        "#;
        let p = parse_proof(text).unwrap();
        let c = p.node("b").constraint.as_ref().unwrap();
        assert!(c.lt("k2", "k0"));
        let printed = print_proof(&p);
        assert_eq!(parse_proof(&printed).unwrap(), p);
    }

    #[test]
    fn acyclicity() {
        let text = r#"
            (proof
              (root a)
              (node a (rule mu) (sequent (in 0 (mu X x (in x X)))) (premises a)))
        "#;
        let p = parse_proof(text).unwrap();
        assert!(!p.is_acyclic());
    }

    #[test]
    fn dot_output_mentions_nodes() {
        let text = r#"
            (proof
              (root a)
              (node a (rule eqrefl) (sequent (= 0 0)) (premises)))
        "#;
        let p = parse_proof(text).unwrap();
        let dot = proof_to_dot(&p);
        assert!(dot.contains("digraph proof"));
        assert!(dot.contains("eqrefl"));
    }
}
