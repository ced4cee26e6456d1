//! Bounded-domain three-valued semantics.
//!
//! Formulas are evaluated over the initial segment `{0..D}` of the
//! naturals. Arithmetic atoms are computed exactly in ℕ (values live in
//! `u128`); set terms denote subsets of `{0..D}` stored as `u64` bitmasks.
//! Quantifiers search `{0..Q}` (`Q ≤ D`) and return `unknown` instead of a
//! verdict the truncated range cannot certify: a universal formula is never
//! reported `true`, an existential never `false`. Connectives use strong
//! Kleene logic. A membership atom whose term value exceeds `D` is
//! `unknown` — the set masks cannot represent it — which keeps every
//! definite verdict stable under enlarging the bounds.
//!
//! Fixed points are computed as *pairs* `(must, may)`: `must` collects the
//! values whose body evaluates definitely true, `may` those not definitely
//! false. Both operators are monotone for positive bodies, so the joint
//! iteration closes within `2(D+1)` steps; `must` coincides with the naive
//! iteration that binds the recursion variable to an exact set. Membership
//! is `true` inside `must`, `false` outside `may`, `unknown` between.
//!
//! The falsification stepper maps a definitely-false conclusion of a rule
//! node to a premise and an assignment under which that premise is again
//! definitely false, decreasing annotation ordinals at reset steps.

use crate::formula::{
    canon_set, fv_num_formula, fv_num_set, fv_set_set, nu_ann_unfold, ord_vars_set, Formula,
    SetTerm, Term,
};
use crate::proof::{Constraint, Node, Proof, Rule, Sequent};
use std::collections::{BTreeMap, HashMap};

// ---------------------------------------------------------------------------
// Model and assignments
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("domain bound {0} exceeds the representable maximum 62")]
    DomainTooLarge(u64),
    #[error("quantifier bound {q} exceeds the domain bound {d}")]
    QuantExceedsDomain { q: u64, d: u64 },
}

/// Evaluation bounds: domain `{0..D}`, quantifier range `{0..Q}`,
/// approximant index limit `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundedModel {
    domain_bound: u64,
    quant_bound: u64,
    ordinal_bound: u64,
}

impl BoundedModel {
    pub fn new(domain_bound: u64, quant_bound: u64, ordinal_bound: u64) -> Result<Self, ModelError> {
        if domain_bound > 62 {
            return Err(ModelError::DomainTooLarge(domain_bound));
        }
        if quant_bound > domain_bound {
            return Err(ModelError::QuantExceedsDomain {
                q: quant_bound,
                d: domain_bound,
            });
        }
        Ok(BoundedModel {
            domain_bound,
            quant_bound,
            ordinal_bound,
        })
    }

    /// Defaults derived from the domain bound: `Q = D`, `B = D + 1` (every
    /// monotone operator on subsets of `{0..D}` closes within `D+1` steps).
    pub fn with_domain(domain_bound: u64) -> Result<Self, ModelError> {
        BoundedModel::new(domain_bound, domain_bound, domain_bound + 1)
    }

    pub fn domain_bound(&self) -> u64 {
        self.domain_bound
    }
    pub fn quant_bound(&self) -> u64 {
        self.quant_bound
    }
    pub fn ordinal_bound(&self) -> u64 {
        self.ordinal_bound
    }
    pub fn full_mask(&self) -> u64 {
        (1u64 << (self.domain_bound + 1)) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TriBool {
    False,
    Unknown,
    True,
}

impl TriBool {
    pub fn from_bool(b: bool) -> TriBool {
        if b {
            TriBool::True
        } else {
            TriBool::False
        }
    }
    pub fn negated(self) -> TriBool {
        match self {
            TriBool::True => TriBool::False,
            TriBool::False => TriBool::True,
            TriBool::Unknown => TriBool::Unknown,
        }
    }
    pub fn and(self, other: TriBool) -> TriBool {
        self.min(other)
    }
    pub fn or(self, other: TriBool) -> TriBool {
        self.max(other)
    }
    pub fn is_true(self) -> bool {
        self == TriBool::True
    }
    pub fn is_false(self) -> bool {
        self == TriBool::False
    }
    pub fn is_definite(self) -> bool {
        self != TriBool::Unknown
    }
}

impl std::fmt::Display for TriBool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TriBool::True => "true",
            TriBool::False => "false",
            TriBool::Unknown => "unknown",
        })
    }
}

/// Under/over-approximation pair for a set variable binding. Exact sets
/// have `must == may`; in-flight fixed-point iterations bind proper pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SetPair {
    pub must: u64,
    pub may: u64,
}

impl SetPair {
    pub fn exact(mask: u64) -> SetPair {
        SetPair {
            must: mask,
            may: mask,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    pub num: BTreeMap<String, u128>,
    pub set: BTreeMap<String, SetPair>,
    pub ord: BTreeMap<String, u64>,
}

impl Assignment {
    pub fn new() -> Assignment {
        Assignment::default()
    }
    pub fn with_num(mut self, x: &str, v: u128) -> Assignment {
        self.num.insert(x.to_string(), v);
        self
    }
    pub fn with_set(mut self, x: &str, mask: u64) -> Assignment {
        self.set.insert(x.to_string(), SetPair::exact(mask));
        self
    }
    pub fn with_ord(mut self, k: &str, v: u64) -> Assignment {
        self.ord.insert(k.to_string(), v);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound numeric variable {0}")]
    UnboundNumVar(String),
    #[error("unbound set variable {0}")]
    UnboundSetVar(String),
    #[error("unbound ordinal variable {0}")]
    UnboundOrdVar(String),
    #[error("arithmetic overflow while evaluating a term")]
    Overflow,
    #[error("approximant index {index} exceeds the ordinal bound {bound}")]
    ApproximantIndex { index: u64, bound: u64 },
}

// ---------------------------------------------------------------------------
// Term evaluation
// ---------------------------------------------------------------------------

fn cantor_pair(a: u128, b: u128) -> Option<u128> {
    let s = a.checked_add(b)?;
    let sq = s.checked_mul(s.checked_add(1)?)? / 2;
    sq.checked_add(a)
}

/// Exact arithmetic value of a term; `eps` is the empty-word code `0` and
/// `app` the shifted pairing code `cantor(a, b) + 1`.
pub fn eval_term(t: &Term, rho: &Assignment) -> Result<u128, EvalError> {
    match t {
        Term::Var(x) => rho
            .num
            .get(x)
            .copied()
            .ok_or_else(|| EvalError::UnboundNumVar(x.clone())),
        Term::Zero | Term::Eps => Ok(0),
        Term::Succ(a) => eval_term(a, rho)?.checked_add(1).ok_or(EvalError::Overflow),
        Term::Plus(a, b) => eval_term(a, rho)?
            .checked_add(eval_term(b, rho)?)
            .ok_or(EvalError::Overflow),
        Term::Times(a, b) => eval_term(a, rho)?
            .checked_mul(eval_term(b, rho)?)
            .ok_or(EvalError::Overflow),
        Term::App(a, b) => {
            let (va, vb) = (eval_term(a, rho)?, eval_term(b, rho)?);
            cantor_pair(va, vb)
                .and_then(|p| p.checked_add(1))
                .ok_or(EvalError::Overflow)
        }
    }
}

// ---------------------------------------------------------------------------
// Formula evaluation
// ---------------------------------------------------------------------------

pub struct Evaluator<'m> {
    model: &'m BoundedModel,
    memo: HashMap<String, SetPair>,
}

impl<'m> Evaluator<'m> {
    pub fn new(model: &'m BoundedModel) -> Evaluator<'m> {
        Evaluator {
            model,
            memo: HashMap::new(),
        }
    }

    pub fn model(&self) -> &BoundedModel {
        self.model
    }

    fn memo_key(&self, s: &SetTerm, rho: &Assignment) -> Result<String, EvalError> {
        let mut key = crate::sexpr::print_set_term(&canon_set(s));
        key.push('|');
        for x in fv_num_set(s) {
            let v = rho
                .num
                .get(&x)
                .ok_or_else(|| EvalError::UnboundNumVar(x.clone()))?;
            key.push_str(&format!("{x}={v};"));
        }
        for x in fv_set_set(s) {
            let p = rho
                .set
                .get(&x)
                .ok_or_else(|| EvalError::UnboundSetVar(x.clone()))?;
            key.push_str(&format!("{x}={},{};", p.must, p.may));
        }
        for k in ord_vars_set(s) {
            let v = rho
                .ord
                .get(&k)
                .ok_or_else(|| EvalError::UnboundOrdVar(k.clone()))?;
            key.push_str(&format!("{k}={v};"));
        }
        Ok(key)
    }

    /// One application of the joint must/may operator of a fixed-point body.
    fn op_pair(
        &mut self,
        set_var: &str,
        num_var: &str,
        body: &Formula,
        current: SetPair,
        rho: &Assignment,
    ) -> Result<SetPair, EvalError> {
        let mut next = SetPair { must: 0, may: 0 };
        let mut inner = rho.clone();
        inner.set.insert(set_var.to_string(), current);
        for v in 0..=self.model.domain_bound {
            inner.num.insert(num_var.to_string(), v as u128);
            let bit = 1u64 << v;
            match self.eval3(body, &inner)? {
                TriBool::True => {
                    next.must |= bit;
                    next.may |= bit;
                }
                TriBool::Unknown => next.may |= bit,
                TriBool::False => {}
            }
        }
        Ok(next)
    }

    /// Iterate the joint operator from `start` until stable, or at most
    /// `limit` steps when given.
    fn iterate_pair(
        &mut self,
        set_var: &str,
        num_var: &str,
        body: &Formula,
        start: SetPair,
        limit: Option<u64>,
        rho: &Assignment,
    ) -> Result<SetPair, EvalError> {
        let mut current = start;
        let mut steps = 0u64;
        loop {
            if let Some(l) = limit {
                if steps >= l {
                    return Ok(current);
                }
            }
            let next = self.op_pair(set_var, num_var, body, current, rho)?;
            if next == current {
                return Ok(current);
            }
            current = next;
            steps += 1;
        }
    }

    /// Must/may denotation of a set term under `rho`. An annotated
    /// `nu^kappa` denotes the `rho(kappa)`-th approximant.
    pub fn set_pair(&mut self, s: &SetTerm, rho: &Assignment) -> Result<SetPair, EvalError> {
        match s {
            SetTerm::Var(x) => rho
                .set
                .get(x)
                .copied()
                .ok_or_else(|| EvalError::UnboundSetVar(x.clone())),
            _ => {
                let key = self.memo_key(s, rho)?;
                if let Some(p) = self.memo.get(&key) {
                    return Ok(*p);
                }
                let pair = match s {
                    SetTerm::Var(_) => unreachable!(),
                    SetTerm::Mu {
                        set_var,
                        num_var,
                        body,
                    } => self.iterate_pair(
                        set_var,
                        num_var,
                        body,
                        SetPair { must: 0, may: 0 },
                        None,
                        rho,
                    )?,
                    SetTerm::Nu {
                        ann,
                        set_var,
                        num_var,
                        body,
                    } => {
                        let full = SetPair::exact(self.model.full_mask());
                        let limit = match ann {
                            None => None,
                            Some(k) => Some(
                                rho.ord
                                    .get(k)
                                    .copied()
                                    .ok_or_else(|| EvalError::UnboundOrdVar(k.clone()))?,
                            ),
                        };
                        self.iterate_pair(set_var, num_var, body, full, limit, rho)?
                    }
                };
                self.memo.insert(key, pair);
                Ok(pair)
            }
        }
    }

    /// The `index`-th approximant of an (unannotated) fixed-point term:
    /// the definite-membership set after `index` operator applications from
    /// the empty set (μ) or the full domain (ν).
    pub fn approximant(
        &mut self,
        s: &SetTerm,
        index: u64,
        rho: &Assignment,
    ) -> Result<u64, EvalError> {
        if index > self.model.ordinal_bound {
            return Err(EvalError::ApproximantIndex {
                index,
                bound: self.model.ordinal_bound,
            });
        }
        let (set_var, num_var, body, start) = match s {
            SetTerm::Mu {
                set_var,
                num_var,
                body,
            } => (set_var, num_var, body, SetPair { must: 0, may: 0 }),
            SetTerm::Nu {
                set_var,
                num_var,
                body,
                ..
            } => (set_var, num_var, body, SetPair::exact(self.model.full_mask())),
            SetTerm::Var(x) => return Err(EvalError::UnboundSetVar(x.clone())),
        };
        Ok(self
            .iterate_pair(set_var, num_var, body, start, Some(index), rho)?
            .must)
    }

    /// Full closure of a fixed-point term: the definite-membership set of
    /// its least (μ) or greatest (ν) fixed point.
    pub fn lfp_gfp(&mut self, s: &SetTerm, rho: &Assignment) -> Result<u64, EvalError> {
        let mut bare = s.clone();
        if let SetTerm::Nu { ann, .. } = &mut bare {
            *ann = None;
        }
        Ok(self.set_pair(&bare, rho)?.must)
    }

    /// Three-valued satisfaction.
    pub fn eval3(&mut self, f: &Formula, rho: &Assignment) -> Result<TriBool, EvalError> {
        Ok(match f {
            Formula::Lt(a, b) => TriBool::from_bool(eval_term(a, rho)? < eval_term(b, rho)?),
            Formula::NLess(a, b) => TriBool::from_bool(eval_term(a, rho)? >= eval_term(b, rho)?),
            Formula::Eq(a, b) => TriBool::from_bool(eval_term(a, rho)? == eval_term(b, rho)?),
            Formula::Neq(a, b) => TriBool::from_bool(eval_term(a, rho)? != eval_term(b, rho)?),
            Formula::In(t, s) | Formula::NotIn(t, s) => {
                let v = eval_term(t, rho)?;
                let membership = if v > self.model.domain_bound as u128 {
                    // Outside the representable domain no mask can certify
                    // either verdict; stay conservative.
                    TriBool::Unknown
                } else {
                    let pair = self.set_pair(s, rho)?;
                    let bit = 1u64 << (v as u64);
                    if pair.must & bit != 0 {
                        TriBool::True
                    } else if pair.may & bit == 0 {
                        TriBool::False
                    } else {
                        TriBool::Unknown
                    }
                };
                if matches!(f, Formula::In(..)) {
                    membership
                } else {
                    membership.negated()
                }
            }
            Formula::And(a, b) => self.eval3(a, rho)?.and(self.eval3(b, rho)?),
            Formula::Or(a, b) => self.eval3(a, rho)?.or(self.eval3(b, rho)?),
            Formula::All(x, body) => {
                let mut inner = rho.clone();
                let mut verdict = TriBool::Unknown;
                for v in 0..=self.model.quant_bound {
                    inner.num.insert(x.clone(), v as u128);
                    if self.eval3(body, &inner)?.is_false() {
                        verdict = TriBool::False;
                        break;
                    }
                }
                // A finite range never certifies a universal claim.
                verdict
            }
            Formula::Ex(x, body) => {
                let mut inner = rho.clone();
                let mut verdict = TriBool::Unknown;
                for v in 0..=self.model.quant_bound {
                    inner.num.insert(x.clone(), v as u128);
                    if self.eval3(body, &inner)?.is_true() {
                        verdict = TriBool::True;
                        break;
                    }
                }
                // A finite range never refutes an existential claim.
                verdict
            }
        })
    }

    pub fn satisfies(&mut self, f: &Formula, rho: &Assignment) -> Result<TriBool, EvalError> {
        self.eval3(f, rho)
    }

    /// Three-valued disjunction over a sequent (empty sequent is false).
    pub fn satisfies_sequent(
        &mut self,
        seq: &Sequent,
        rho: &Assignment,
    ) -> Result<TriBool, EvalError> {
        let mut verdict = TriBool::False;
        for f in &seq.0 {
            verdict = verdict.or(self.eval3(f, rho)?);
        }
        Ok(verdict)
    }

    /// Satisfaction of a constraint-guarded sequent: an assignment that
    /// violates the constraint order satisfies the sequent vacuously.
    pub fn satisfies_extended(
        &mut self,
        constraint: &Constraint,
        seq: &Sequent,
        rho: &Assignment,
    ) -> Result<TriBool, EvalError> {
        for k in constraint.vars() {
            if !rho.ord.contains_key(k) {
                return Err(EvalError::UnboundOrdVar(k.clone()));
            }
        }
        for a in constraint.vars() {
            for b in constraint.vars() {
                if constraint.lt(a, b) && rho.ord[a] >= rho.ord[b] {
                    return Ok(TriBool::True);
                }
            }
        }
        self.satisfies_sequent(seq, rho)
    }
}

// ---------------------------------------------------------------------------
// Falsification stepper
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    /// The indexed premise is definitely false under the returned assignment.
    Premise { index: usize, rho: Assignment },
    /// The bounds cannot certify any premise false.
    StuckUnknown,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("conclusion is not definitely false under the given assignment")]
    NotDefinitelyFalse,
    #[error("axiom conclusion evaluated definitely false ({0}); this signals an internal error")]
    AxiomRefuted(String),
    #[error("malformed rule instance: {0}")]
    Malformed(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn empty_constraint() -> Constraint {
    Constraint::new()
}

fn node_constraint(node: &Node) -> Constraint {
    node.constraint.clone().unwrap_or_else(empty_constraint)
}

/// Given a rule node whose conclusion is definitely false under `rho`,
/// produce a premise index and an assignment under which that premise is
/// definitely false. Ordinal values never increase across the step and
/// strictly decrease at the reset variable of a reset step.
pub fn falsify_step(
    ev: &mut Evaluator,
    node: &Node,
    premise_nodes: &[&Node],
    rho: &Assignment,
) -> Result<StepOutcome, StepError> {
    let conclusion_constraint = node_constraint(node);
    if !ev
        .satisfies_extended(&conclusion_constraint, &node.sequent, rho)?
        .is_false()
    {
        return Err(StepError::NotDefinitelyFalse);
    }
    if premise_nodes.len() != node.rule.arity() {
        return Err(StepError::Malformed(format!(
            "rule {} expects {} premises, got {}",
            node.rule.name(),
            node.rule.arity(),
            premise_nodes.len()
        )));
    }

    let gamma = &node.sequent.0;
    let last = gamma.last();
    let candidate: Option<(usize, Assignment)> = match &node.rule {
        Rule::Id | Rule::EqRefl | Rule::Pa(_) | Rule::Nat => {
            return Err(StepError::AxiomRefuted(node.rule.name().to_string()));
        }
        Rule::Ind { .. } => {
            return Err(StepError::Malformed(
                "induction nodes are outside the falsification fragment".into(),
            ));
        }
        Rule::Weaken
        | Rule::Exchange { .. }
        | Rule::Or
        | Rule::Mu
        | Rule::EqSub { .. }
        | Rule::Prune
        | Rule::Cw { .. } => Some((0, rho.clone())),
        Rule::Nu { fresh: None } => Some((0, rho.clone())),
        Rule::Sub { theta } => {
            // Premise truth under rho' equals conclusion truth under rho,
            // where rho'(x) is the value of the substituted term.
            let mut rho2 = rho.clone();
            let mut fv = std::collections::BTreeSet::new();
            for f in &premise_nodes[0].sequent.0 {
                fv.extend(fv_num_formula(f));
            }
            for x in fv {
                let replaced = theta
                    .iter()
                    .find(|(y, _)| *y == x)
                    .map(|(_, t)| t.clone())
                    .unwrap_or_else(|| Term::var(&x));
                rho2.num.insert(x, eval_term(&replaced, rho)?);
            }
            Some((0, rho2))
        }
        Rule::Cut { phi } => {
            let mut rho2 = rho.clone();
            for x in fv_num_formula(phi) {
                rho2.num.entry(x).or_insert(0);
            }
            match ev.eval3(phi, &rho2)? {
                TriBool::False => Some((0, rho2)),
                TriBool::True => Some((1, rho2)),
                TriBool::Unknown => None,
            }
        }
        Rule::And => {
            let Some(Formula::And(a, b)) = last else {
                return Err(StepError::Malformed("and node without conjunction".into()));
            };
            if ev.eval3(a, rho)?.is_false() {
                Some((0, rho.clone()))
            } else if ev.eval3(b, rho)?.is_false() {
                Some((1, rho.clone()))
            } else {
                None
            }
        }
        Rule::All { fresh } => {
            let Some(Formula::All(x, body)) = last else {
                return Err(StepError::Malformed("all node without universal".into()));
            };
            let mut found = None;
            let mut inner = rho.clone();
            for v in 0..=ev.model().quant_bound() {
                inner.num.insert(x.clone(), v as u128);
                if ev.eval3(body, &inner)?.is_false() {
                    found = Some(v);
                    break;
                }
            }
            found.map(|v| {
                let mut rho2 = rho.clone();
                rho2.num.insert(fresh.clone(), v as u128);
                (0, rho2)
            })
        }
        Rule::Ex { witness } => {
            // Unreachable in practice: an existential conclusion is never
            // definitely false under quantifier truncation.
            let mut rho2 = rho.clone();
            for x in witness.free_vars() {
                rho2.num.entry(x).or_insert(0);
            }
            Some((0, rho2))
        }
        Rule::Nu { fresh: Some(lambda) } => {
            let Some(Formula::In(t, s)) = last else {
                return Err(StepError::Malformed(
                    "annotation node without membership".into(),
                ));
            };
            let v = eval_term(t, rho)?;
            let mut found = None;
            if v <= ev.model().domain_bound() as u128 {
                let bit = 1u64 << (v as u64);
                for alpha in 0..=ev.model().ordinal_bound() {
                    let mut rho2 = rho.clone();
                    rho2.ord.insert(lambda.clone(), alpha);
                    let mut annotated = s.clone();
                    if let SetTerm::Nu { ann, .. } = &mut annotated {
                        *ann = Some(lambda.clone());
                    } else {
                        return Err(StepError::Malformed(
                            "annotation node on a non-greatest fixed point".into(),
                        ));
                    }
                    let pair = ev.set_pair(&annotated, &rho2)?;
                    if pair.may & bit == 0 {
                        found = Some((0, rho2));
                        break;
                    }
                }
            }
            found
        }
        Rule::NuAnn { fresh: lambda } => {
            let Some(Formula::In(t, s)) = last else {
                return Err(StepError::Malformed("unfolding node without membership".into()));
            };
            let SetTerm::Nu {
                ann: Some(kappa), ..
            } = s
            else {
                return Err(StepError::Malformed(
                    "unfolding node without annotated fixed point".into(),
                ));
            };
            let bound = rho
                .ord
                .get(kappa)
                .copied()
                .ok_or_else(|| EvalError::UnboundOrdVar(kappa.clone()))?;
            let unfolded = nu_ann_unfold(t, s, lambda).ok_or_else(|| {
                StepError::Malformed("unfolding node without annotated fixed point".into())
            })?;
            let mut found = None;
            for alpha in 0..bound {
                let mut rho2 = rho.clone();
                rho2.ord.insert(lambda.clone(), alpha);
                if ev.eval3(&unfolded, &rho2)?.is_false() {
                    found = Some((0, rho2));
                    break;
                }
            }
            found
        }
        Rule::Reset { kappa } => {
            let children = conclusion_constraint.children_of(kappa);
            if children.is_empty() {
                return Err(StepError::Malformed("reset variable has no children".into()));
            }
            let mut max = 0u64;
            for c in &children {
                let v = rho
                    .ord
                    .get(c)
                    .copied()
                    .ok_or_else(|| EvalError::UnboundOrdVar(c.clone()))?;
                max = max.max(v);
            }
            let mut rho2 = rho.clone();
            rho2.ord.insert(kappa.clone(), max);
            Some((0, rho2))
        }
    };

    match candidate {
        None => Ok(StepOutcome::StuckUnknown),
        Some((index, rho2)) => {
            let premise = premise_nodes[index];
            let verdict =
                ev.satisfies_extended(&node_constraint(premise), &premise.sequent, &rho2)?;
            if verdict.is_false() {
                Ok(StepOutcome::Premise { index, rho: rho2 })
            } else {
                Ok(StepOutcome::StuckUnknown)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WalkOutcome {
    StuckUnknown { node: String, steps: usize },
    AxiomRefuted { node: String, steps: usize },
    BudgetExceeded { steps: usize },
}

/// Iterate the falsification stepper from the root of a proof until it
/// sticks, refutes an axiom (internal-error signal), or exhausts `budget`.
pub fn falsify_walk(
    ev: &mut Evaluator,
    proof: &Proof,
    rho0: &Assignment,
    budget: usize,
) -> Result<WalkOutcome, StepError> {
    let mut current = proof.root.clone();
    let mut rho = rho0.clone();
    for steps in 0..budget {
        let node = proof.node(&current);
        let premises: Vec<&Node> = node.premises.iter().map(|p| proof.node(p)).collect();
        match falsify_step(ev, node, &premises, &rho) {
            Ok(StepOutcome::Premise { index, rho: rho2 }) => {
                current = node.premises[index].clone();
                rho = rho2;
            }
            Ok(StepOutcome::StuckUnknown) => {
                return Ok(WalkOutcome::StuckUnknown {
                    node: current,
                    steps,
                })
            }
            Err(StepError::AxiomRefuted(_)) => {
                return Ok(WalkOutcome::AxiomRefuted {
                    node: current,
                    steps,
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(WalkOutcome::BudgetExceeded { steps: budget })
}

// ---------------------------------------------------------------------------
// Approximant tables
// ---------------------------------------------------------------------------

/// Rows (index, definite-membership set) for indices `0..=max_index`,
/// formatted for display; the final row is the full closure.
pub fn approximant_table(
    ev: &mut Evaluator,
    s: &SetTerm,
    max_index: u64,
    rho: &Assignment,
) -> Result<Vec<(String, Vec<u64>)>, EvalError> {
    let mut rows = Vec::new();
    for i in 0..=max_index {
        let mask = ev.approximant(s, i, rho)?;
        rows.push((i.to_string(), mask_to_values(mask)));
    }
    let closure = ev.lfp_gfp(s, rho)?;
    rows.push(("closure".to_string(), mask_to_values(closure)));
    Ok(rows)
}

pub fn mask_to_values(mask: u64) -> Vec<u64> {
    (0..64).filter(|v| mask & (1u64 << v) != 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::negate;
    use crate::sexpr::{parse_formula, parse_set_term};

    fn n_term() -> SetTerm {
        parse_set_term("(mu X x (or (= x 0) (ex y (and (in y X) (= x (s y))))))").unwrap()
    }

    fn t_term() -> SetTerm {
        parse_set_term(
            "(mu Y y (in y (mu X x (or (= x eps) (ex z (ex w (and (in z X) (and (in w Y) (= x (app z w))))))))))",
        )
        .unwrap()
    }

    #[test]
    fn term_values() {
        let rho = Assignment::new().with_num("x", 3);
        let two = Term::Succ(Box::new(Term::Succ(Box::new(Term::Zero))));
        assert_eq!(eval_term(&two, &rho).unwrap(), 2);
        let plus = Term::Plus(
            Box::new(Term::var("x")),
            Box::new(Term::Succ(Box::new(Term::Zero))),
        );
        assert_eq!(eval_term(&plus, &rho).unwrap(), 4);
        // app eps 0 encodes the one-element word [0]: pairing(0,0)+1 = 1.
        let app = Term::App(Box::new(Term::Eps), Box::new(Term::Zero));
        assert_eq!(eval_term(&app, &rho).unwrap(), 1);
    }

    #[test]
    fn numeric_set_approximants() {
        let m = BoundedModel::with_domain(8).unwrap();
        let mut ev = Evaluator::new(&m);
        let n = n_term();
        let rho = Assignment::new();
        assert_eq!(ev.approximant(&n, 0, &rho).unwrap(), 0);
        assert_eq!(mask_to_values(ev.approximant(&n, 1, &rho).unwrap()), vec![0]);
        assert_eq!(
            mask_to_values(ev.approximant(&n, 2, &rho).unwrap()),
            vec![0, 1]
        );
        assert_eq!(ev.lfp_gfp(&n, &rho).unwrap(), m.full_mask());
        // 2 in N is definitely true once the domain contains 2.
        let f = Formula::In(
            Term::Succ(Box::new(Term::Succ(Box::new(Term::Zero)))),
            n.clone(),
        );
        assert_eq!(ev.eval3(&f, &rho).unwrap(), TriBool::True);
    }

    #[test]
    fn word_set_first_approximant_is_empty_word() {
        let m = BoundedModel::with_domain(8).unwrap();
        let mut ev = Evaluator::new(&m);
        let rho = Assignment::new();
        assert_eq!(mask_to_values(ev.approximant(&t_term(), 1, &rho).unwrap()), vec![0]);
    }

    #[test]
    fn approximant_index_bound() {
        let m = BoundedModel::with_domain(4).unwrap();
        let mut ev = Evaluator::new(&m);
        let err = ev.approximant(&n_term(), 99, &Assignment::new()).unwrap_err();
        assert_eq!(
            err,
            EvalError::ApproximantIndex {
                index: 99,
                bound: 5
            }
        );
    }

    #[test]
    fn quantifier_truncation() {
        let m = BoundedModel::with_domain(8).unwrap();
        let mut ev = Evaluator::new(&m);
        let rho = Assignment::new();
        let f = parse_formula("(all x (< x (s x)))").unwrap();
        assert_eq!(ev.eval3(&f, &rho).unwrap(), TriBool::Unknown);
        let g = parse_formula("(all x (< (s x) x))").unwrap();
        assert_eq!(ev.eval3(&g, &rho).unwrap(), TriBool::False);
        let h = parse_formula("(ex x (= x (s 0)))").unwrap();
        assert_eq!(ev.eval3(&h, &rho).unwrap(), TriBool::True);
        let i = parse_formula("(ex x (< (s x) x))").unwrap();
        assert_eq!(ev.eval3(&i, &rho).unwrap(), TriBool::Unknown);
    }

    #[test]
    fn empty_least_fixed_point_is_false() {
        let m = BoundedModel::with_domain(6).unwrap();
        let mut ev = Evaluator::new(&m);
        let f = parse_formula("(in 0 (mu X x (in x X)))").unwrap();
        assert_eq!(ev.eval3(&f, &Assignment::new()).unwrap(), TriBool::False);
        let g = parse_formula("(in 0 (nu X x (in x X)))").unwrap();
        assert_eq!(ev.eval3(&g, &Assignment::new()).unwrap(), TriBool::True);
    }

    #[test]
    fn out_of_domain_membership_is_unknown() {
        let m = BoundedModel::with_domain(2).unwrap();
        let mut ev = Evaluator::new(&m);
        let f = Formula::In(Term::numeral(7), n_term());
        assert_eq!(ev.eval3(&f, &Assignment::new()).unwrap(), TriBool::Unknown);
        assert_eq!(
            ev.eval3(&negate(&f), &Assignment::new()).unwrap(),
            TriBool::Unknown
        );
    }

    #[test]
    fn negation_flips_definite_verdicts() {
        let m = BoundedModel::with_domain(6).unwrap();
        let mut ev = Evaluator::new(&m);
        let rho = Assignment::new().with_num("x", 3);
        for text in [
            "(= x (s (s (s 0))))",
            "(< x 0)",
            "(in x (mu X y (or (= y 0) (ex z (and (in z X) (= y (s z)))))))",
            "(in x (mu X y (in y X)))",
            "(and (= x x) (all y (< y (s y))))",
        ] {
            let f = parse_formula(text).unwrap();
            let v = ev.eval3(&f, &rho).unwrap();
            let nv = ev.eval3(&negate(&f), &rho).unwrap();
            assert_eq!(nv, v.negated(), "negation mismatch on {text}");
        }
    }

    #[test]
    fn extended_satisfaction_is_vacuous_on_violated_order() {
        let m = BoundedModel::with_domain(4).unwrap();
        let mut ev = Evaluator::new(&m);
        let c = Constraint::new()
            .add_root("l")
            .unwrap()
            .add_child("l", "k")
            .unwrap();
        let seq = Sequent(vec![parse_formula("(= 0 (s 0))").unwrap()]);
        // k < l violated: vacuously true.
        let bad = Assignment::new().with_ord("k", 2).with_ord("l", 1);
        assert_eq!(
            ev.satisfies_extended(&c, &seq, &bad).unwrap(),
            TriBool::True
        );
        // k < l respected: the false sequent shows through.
        let good = Assignment::new().with_ord("k", 0).with_ord("l", 3);
        assert_eq!(
            ev.satisfies_extended(&c, &seq, &good).unwrap(),
            TriBool::False
        );
        assert_eq!(
            ev.satisfies_sequent(&Sequent(vec![parse_formula("(= 0 0)").unwrap()]), &good)
                .unwrap(),
            TriBool::True
        );
    }

    #[test]
    fn annotated_approximant_membership() {
        let m = BoundedModel::with_domain(4).unwrap();
        let mut ev = Evaluator::new(&m);
        // nu X x (and (!= x 0) (in x X)) shrinks to the empty set; its
        // 0-th approximant is the full domain, the first drops 0.
        let f = parse_formula("(in 0 (nu^ k X x (and (!= x 0) (in x X))))").unwrap();
        let rho0 = Assignment::new().with_ord("k", 0);
        assert_eq!(ev.eval3(&f, &rho0).unwrap(), TriBool::True);
        let rho1 = Assignment::new().with_ord("k", 1);
        assert_eq!(ev.eval3(&f, &rho1).unwrap(), TriBool::False);
    }

    #[test]
    fn falsify_step_on_cut_and_all() {
        let m = BoundedModel::with_domain(6).unwrap();
        let mut ev = Evaluator::new(&m);
        // cut on a decidable formula picks the unsatisfied premise.
        let phi = parse_formula("(= 0 0)").unwrap();
        let conclusion = Node {
            id: "c".into(),
            rule: Rule::Cut { phi: phi.clone() },
            sequent: Sequent(vec![parse_formula("(< (s 0) 0)").unwrap()]),
            constraint: None,
            premises: vec!["p0".into(), "p1".into()],
        };
        let p0 = Node {
            id: "p0".into(),
            rule: Rule::EqRefl,
            sequent: Sequent(vec![parse_formula("(< (s 0) 0)").unwrap(), phi.clone()]),
            constraint: None,
            premises: vec![],
        };
        let p1 = Node {
            id: "p1".into(),
            rule: Rule::EqRefl,
            sequent: Sequent(vec![
                parse_formula("(< (s 0) 0)").unwrap(),
                negate(&phi),
            ]),
            constraint: None,
            premises: vec![],
        };
        let out = falsify_step(&mut ev, &conclusion, &[&p0, &p1], &Assignment::new()).unwrap();
        // (= 0 0) is true, so the premise carrying its negation is false.
        assert!(matches!(out, StepOutcome::Premise { index: 1, .. }));

        // The universal rule picks the least counterexample value.
        let all_node = Node {
            id: "a".into(),
            rule: Rule::All { fresh: "y".into() },
            sequent: Sequent(vec![parse_formula("(all x (< (s x) x))").unwrap()]),
            constraint: None,
            premises: vec!["ap".into()],
        };
        let ap = Node {
            id: "ap".into(),
            rule: Rule::EqRefl,
            sequent: Sequent(vec![parse_formula("(< (s y) y)").unwrap()]),
            constraint: None,
            premises: vec![],
        };
        let out = falsify_step(&mut ev, &all_node, &[&ap], &Assignment::new()).unwrap();
        match out {
            StepOutcome::Premise { index: 0, rho } => assert_eq!(rho.num["y"], 0),
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn falsify_step_requires_false_conclusion() {
        let m = BoundedModel::with_domain(4).unwrap();
        let mut ev = Evaluator::new(&m);
        let node = Node {
            id: "n".into(),
            rule: Rule::Weaken,
            sequent: Sequent(vec![parse_formula("(= 0 0)").unwrap()]),
            constraint: None,
            premises: vec!["p".into()],
        };
        let p = Node {
            id: "p".into(),
            rule: Rule::EqRefl,
            sequent: Sequent(vec![]),
            constraint: None,
            premises: vec![],
        };
        let err = falsify_step(&mut ev, &node, &[&p], &Assignment::new()).unwrap_err();
        assert_eq!(err, StepError::NotDefinitelyFalse);
    }

    #[test]
    fn falsify_walk_exhausts_budget_on_unfounded_loop() {
        let m = BoundedModel::with_domain(4).unwrap();
        let mut ev = Evaluator::new(&m);
        let text = r#"
            (proof
              (root a)
              (node a (rule mu) (sequent (in 0 (mu X x (in x X)))) (premises a)))
        "#;
        let p = crate::proof::parse_proof(text).unwrap();
        let out = falsify_walk(&mut ev, &p, &Assignment::new(), 25).unwrap();
        assert_eq!(out, WalkOutcome::BudgetExceeded { steps: 25 });
    }

    #[test]
    fn falsify_step_reset_decreases_strictly() {
        let m = BoundedModel::with_domain(4).unwrap();
        let mut ev = Evaluator::new(&m);
        let c_conc = Constraint::new()
            .add_root("k0")
            .unwrap()
            .add_child("k0", "k1")
            .unwrap()
            .add_child("k0", "k2")
            .unwrap();
        let c_prem = c_conc.remove(&["k1".to_string(), "k2".to_string()].into_iter().collect());
        let seq = Sequent(vec![parse_formula("(= 0 (s 0))").unwrap()]);
        let node = Node {
            id: "r".into(),
            rule: Rule::Reset { kappa: "k0".into() },
            sequent: seq.clone(),
            constraint: Some(c_conc),
            premises: vec!["p".into()],
        };
        let p = Node {
            id: "p".into(),
            rule: Rule::Weaken,
            sequent: seq,
            constraint: Some(c_prem),
            premises: vec!["r".into()],
        };
        let rho = Assignment::new()
            .with_ord("k0", 7)
            .with_ord("k1", 3)
            .with_ord("k2", 1);
        let out = falsify_step(&mut ev, &node, &[&p], &rho).unwrap();
        match out {
            StepOutcome::Premise { index: 0, rho: r2 } => {
                assert_eq!(r2.ord["k0"], 3);
                assert!(r2.ord["k0"] < rho.ord["k0"]);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }
}
