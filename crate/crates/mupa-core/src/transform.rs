//! Derived proof constructions.
//!
//! This module builds proof graphs rather than checking them: a uniform
//! "identity engine" that proves `Gamma, ¬phi[sigma1], phi[sigma2]` by
//! decomposing `phi`, and on top of it
//!
//! * identity expansions for arbitrary formulas ([`derive_identity`]),
//! * monotonicity/functoriality in a designated set variable
//!   ([`derive_functorial`]),
//! * prefix-point and (co)induction schemes as finite derivations
//!   ([`derive_prefix_mu`], [`derive_prefix_nu`], [`derive_induction_mu`],
//!   [`derive_coinduction_nu`], [`derive_numeric_induction`]),
//! * introduction of a greatest-fixed-point membership from a proof of its
//!   unfolding ([`derive_nu_intro`]), and
//! * compilation of explicit induction rules into cyclic proofs
//!   ([`eliminate_induction`]).
//!
//! All constructions emit nodes whose premise sequents match the checker's
//! rule schemas exactly. That requires a Barendregt-style discipline: the
//! free names of substitution images must avoid the bound names of the
//! formulas they are pushed under. Violations are reported as
//! [`TransformError::NameCollision`] instead of producing proofs that fail
//! to check.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::formula::{
    alpha_eq, apply_theta, canon_set, dual_set_term, fresh_name, fv_num_formula, fv_num_set,
    fv_set_formula, fv_set_set, mu_unfold, negate, nu_unfold, subst_abstraction, subst_num,
    Formula, SetRepl, SetTerm, Subst, Term,
};
use crate::proof::{Node, Proof, Rule, Sequent};
use crate::rules::{check_derivation, System};
use crate::sexpr::{print_formula, print_set_term};

/// Map from set variables to their replacements, applied simultaneously.
pub type Sigma = BTreeMap<String, SetRepl>;

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("cannot reorder [{found}] into [{expected}]: not a permutation")]
    NotPermutation { expected: String, found: String },
    #[error("cannot weaken [{have}] into [{target}]: a formula is missing from the target")]
    NotSuperset { have: String, target: String },
    #[error("the designated set variable {0} occurs negatively")]
    NegativeOccurrence(String),
    #[error("unsupported formula for this construction: {0}")]
    Unsupported(String),
    #[error("a substitution image mentions the bound name {0}; rename the inputs apart")]
    NameCollision(String),
    #[error("expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    #[error("the supplied premise proof concludes [{found}] instead of [{expected}]")]
    PremiseMismatch { expected: String, found: String },
    #[error("input proof is not a valid finite derivation: {0}")]
    InvalidInput(String),
    #[error("annotated proofs are not a target of this construction")]
    AnnotatedTarget,
}

fn show_seq(fs: &[Formula]) -> String {
    fs.iter().map(print_formula).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// Name bookkeeping
// ---------------------------------------------------------------------------

fn names_term(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Zero | Term::Eps => {}
        Term::Var(x) => {
            out.insert(x.clone());
        }
        Term::Succ(a) => names_term(a, out),
        Term::Plus(a, b) | Term::Times(a, b) | Term::App(a, b) => {
            names_term(a, out);
            names_term(b, out);
        }
    }
}

fn names_set(s: &SetTerm, out: &mut BTreeSet<String>) {
    match s {
        SetTerm::Var(x) => {
            out.insert(x.clone());
        }
        SetTerm::Mu {
            set_var,
            num_var,
            body,
        } => {
            out.insert(set_var.clone());
            out.insert(num_var.clone());
            names_formula(body, out);
        }
        SetTerm::Nu {
            ann,
            set_var,
            num_var,
            body,
        } => {
            if let Some(k) = ann {
                out.insert(k.clone());
            }
            out.insert(set_var.clone());
            out.insert(num_var.clone());
            names_formula(body, out);
        }
    }
}

fn names_formula(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Formula::Lt(a, b) | Formula::NLess(a, b) | Formula::Eq(a, b) | Formula::Neq(a, b) => {
            names_term(a, out);
            names_term(b, out);
        }
        Formula::In(t, s) | Formula::NotIn(t, s) => {
            names_term(t, out);
            names_set(s, out);
        }
        Formula::And(a, b) | Formula::Or(a, b) => {
            names_formula(a, out);
            names_formula(b, out);
        }
        Formula::All(x, g) | Formula::Ex(x, g) => {
            out.insert(x.clone());
            names_formula(g, out);
        }
    }
}

fn binders_formula(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Formula::Lt(..) | Formula::NLess(..) | Formula::Eq(..) | Formula::Neq(..) => {}
        Formula::In(_, s) | Formula::NotIn(_, s) => binders_set(s, out),
        Formula::And(a, b) | Formula::Or(a, b) => {
            binders_formula(a, out);
            binders_formula(b, out);
        }
        Formula::All(x, g) | Formula::Ex(x, g) => {
            out.insert(x.clone());
            binders_formula(g, out);
        }
    }
}

fn binders_set(s: &SetTerm, out: &mut BTreeSet<String>) {
    match s {
        SetTerm::Var(_) => {}
        SetTerm::Mu {
            set_var,
            num_var,
            body,
        }
        | SetTerm::Nu {
            set_var,
            num_var,
            body,
            ..
        } => {
            out.insert(set_var.clone());
            out.insert(num_var.clone());
            binders_formula(body, out);
        }
    }
}

/// Supplier of names that are fresh for everything absorbed so far,
/// including bound names (so capture-avoiding renaming never fires and
/// substitutions compose exactly).
struct NamePool {
    used: BTreeSet<String>,
}

impl NamePool {
    fn new() -> NamePool {
        NamePool {
            used: BTreeSet::new(),
        }
    }

    fn absorb_formula(&mut self, f: &Formula) {
        names_formula(f, &mut self.used);
    }

    fn absorb_term(&mut self, t: &Term) {
        names_term(t, &mut self.used);
    }

    fn absorb_set(&mut self, s: &SetTerm) {
        names_set(s, &mut self.used);
    }

    fn absorb_rule(&mut self, r: &Rule) {
        match r {
            Rule::Sub { theta } => {
                for (x, t) in theta {
                    self.used.insert(x.clone());
                    names_term(t, &mut self.used);
                }
            }
            Rule::Cut { phi } => self.absorb_formula(phi),
            Rule::All { fresh } => {
                self.used.insert(fresh.clone());
            }
            Rule::Ex { witness } => self.absorb_term(witness),
            Rule::Ind { var, inv, fresh } => {
                self.used.insert(var.clone());
                self.used.insert(fresh.clone());
                self.absorb_formula(inv);
            }
            _ => {}
        }
    }

    fn fresh(&mut self, base: &str) -> String {
        let name = fresh_name(base, &self.used);
        self.used.insert(name.clone());
        name
    }
}

// ---------------------------------------------------------------------------
// Proof builder
// ---------------------------------------------------------------------------

/// Incremental construction of proof graphs with generated node ids.
pub struct ProofBuilder {
    nodes: BTreeMap<String, Node>,
    next: usize,
}

impl Default for ProofBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ProofBuilder {
    pub fn new() -> ProofBuilder {
        ProofBuilder {
            nodes: BTreeMap::new(),
            next: 0,
        }
    }

    /// Claim a node id now and fill it later (for cycle targets).
    pub fn reserve(&mut self) -> String {
        let id = format!("n{}", self.next);
        self.next += 1;
        id
    }

    pub fn fill(&mut self, id: &str, rule: Rule, sequent: Vec<Formula>, premises: Vec<String>) {
        let node = Node {
            id: id.to_string(),
            rule,
            sequent: Sequent(sequent),
            constraint: None,
            premises,
        };
        let prev = self.nodes.insert(id.to_string(), node);
        debug_assert!(prev.is_none(), "node id {id} filled twice");
    }

    pub fn infer(&mut self, rule: Rule, sequent: Vec<Formula>, premises: Vec<String>) -> String {
        let id = self.reserve();
        self.fill(&id, rule, sequent, premises);
        id
    }

    pub fn leaf(&mut self, rule: Rule, sequent: Vec<Formula>) -> String {
        self.infer(rule, sequent, Vec::new())
    }

    pub fn sequent(&self, id: &str) -> &[Formula] {
        &self.nodes[id].sequent.0
    }

    /// Copy a whole foreign proof into this builder under fresh ids and
    /// return the copied root.
    pub fn import(&mut self, proof: &Proof) -> String {
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        for old in proof.nodes.keys() {
            map.insert(old, self.reserve());
        }
        for (old, node) in &proof.nodes {
            let id = map[old.as_str()].clone();
            let premises = node
                .premises
                .iter()
                .map(|p| map[p.as_str()].clone())
                .collect();
            self.nodes.insert(
                id.clone(),
                Node {
                    id,
                    rule: node.rule.clone(),
                    sequent: node.sequent.clone(),
                    constraint: node.constraint.clone(),
                    premises,
                },
            );
        }
        map[proof.root.as_str()].clone()
    }

    pub fn finish(self, root: String) -> Proof {
        Proof {
            root,
            nodes: self.nodes,
        }
    }

    /// Chain adjacent exchanges from the node `from` down to a node whose
    /// sequent is exactly `target` (a permutation of `from`'s sequent).
    pub fn reorder(&mut self, from: String, target: &[Formula]) -> Result<String, TransformError> {
        let mut current: Vec<Formula> = self.sequent(&from).to_vec();
        if current.len() != target.len() {
            return Err(TransformError::NotPermutation {
                expected: show_seq(target),
                found: show_seq(&current),
            });
        }
        let mut node = from;
        for k in 0..target.len() {
            if current[k] == target[k] {
                continue;
            }
            let Some(j) = (k + 1..current.len()).find(|&j| current[j] == target[k]) else {
                return Err(TransformError::NotPermutation {
                    expected: show_seq(target),
                    found: show_seq(self.sequent(&node)),
                });
            };
            for at in (k..j).rev() {
                current.swap(at, at + 1);
                node = self.infer(Rule::Exchange { at }, current.clone(), vec![node]);
            }
        }
        Ok(node)
    }

    /// Weaken the node `from` into a node whose sequent is exactly `target`
    /// (a super-multiset of `from`'s sequent, in any order).
    pub fn weaken_to(&mut self, from: String, target: &[Formula]) -> Result<String, TransformError> {
        let src: Vec<Formula> = self.sequent(&from).to_vec();
        let mut extras: Vec<Formula> = target.to_vec();
        for f in &src {
            let Some(pos) = extras.iter().position(|g| g == f) else {
                return Err(TransformError::NotSuperset {
                    have: show_seq(&src),
                    target: show_seq(target),
                });
            };
            extras.remove(pos);
        }
        let node = if extras.is_empty() {
            from
        } else {
            let mut widened = src;
            widened.extend(extras);
            self.infer(Rule::Weaken, widened, vec![from])
        };
        self.reorder(node, target)
    }
}

// ---------------------------------------------------------------------------
// Substitution helpers
// ---------------------------------------------------------------------------

/// Apply a set-variable substitution to a formula.
pub fn apply_sigma(f: &Formula, sigma: &Sigma) -> Formula {
    if sigma.is_empty() {
        return f.clone();
    }
    Subst {
        num: BTreeMap::new(),
        set: sigma.clone(),
    }
    .apply(f)
}

/// Apply a set-variable substitution to a set term.
pub fn apply_sigma_set(s: &SetTerm, sigma: &Sigma) -> SetTerm {
    if sigma.is_empty() {
        return s.clone();
    }
    Subst {
        num: BTreeMap::new(),
        set: sigma.clone(),
    }
    .apply_set(s)
}

fn image_free_names(img: &SetRepl) -> BTreeSet<String> {
    let mut free = BTreeSet::new();
    match img {
        SetRepl::Term(m) => {
            free.extend(fv_num_set(m));
            free.extend(fv_set_set(m));
        }
        SetRepl::Abstraction(v, f) => {
            let mut nums = fv_num_formula(f);
            nums.remove(v);
            free.extend(nums);
            free.extend(fv_set_formula(f));
        }
    }
    free
}

// ---------------------------------------------------------------------------
// The identity engine
// ---------------------------------------------------------------------------

/// Closure supplying the proof of `ctx, ¬(t in Y)[sigma1], (t in Y)[sigma2]`
/// for a designated hole variable `Y`.
type LeafFn = Box<dyn FnMut(&mut ProofBuilder, &[Formula], &Term) -> Result<String, TransformError>>;

/// Proves sequents of the shape `ctx, negate(phi[sigma1]), phi[sigma2]` by
/// structural decomposition of `phi`. Fixed points are traversed by cycle
/// formation (cyclic target) or by explicit induction (inductive target);
/// designated hole variables are delegated to caller-supplied leaves.
struct Engine<'p> {
    system: System,
    leaf: BTreeMap<String, LeafFn>,
    /// Cyclic targets: canonical print of the substituted pair to the
    /// generalized cycle node and its generalization variable.
    memo: HashMap<String, (String, String)>,
    pool: &'p mut NamePool,
}

impl<'p> Engine<'p> {
    fn new(system: System, pool: &'p mut NamePool) -> Engine<'p> {
        Engine {
            system,
            leaf: BTreeMap::new(),
            memo: HashMap::new(),
            pool,
        }
    }

    fn goal(&self, ctx: &[Formula], phi: &Formula, s1: &Sigma, s2: &Sigma) -> Vec<Formula> {
        let mut g = ctx.to_vec();
        g.push(negate(&apply_sigma(phi, s1)));
        g.push(apply_sigma(phi, s2));
        g
    }

    fn touched(&self, s: &SetTerm, s1: &Sigma, s2: &Sigma) -> bool {
        fv_set_set(s)
            .iter()
            .any(|v| s1.contains_key(v) || s2.contains_key(v) || self.leaf.contains_key(v))
    }

    /// Reject substitution images whose free names collide with a bound
    /// name of `phi` (substitution composition would stop being exact).
    fn guard(&self, phi: &Formula, s1: &Sigma, s2: &Sigma) -> Result<(), TransformError> {
        let mut bound = BTreeSet::new();
        binders_formula(phi, &mut bound);
        if bound.is_empty() {
            return Ok(());
        }
        let relevant = fv_set_formula(phi);
        for (dom, img) in s1.iter().chain(s2.iter()) {
            if !relevant.contains(dom) {
                continue;
            }
            if let Some(hit) = image_free_names(img).intersection(&bound).next() {
                return Err(TransformError::NameCollision(hit.clone()));
            }
        }
        Ok(())
    }

    fn derive(
        &mut self,
        b: &mut ProofBuilder,
        ctx: &[Formula],
        phi: &Formula,
        s1: &Sigma,
        s2: &Sigma,
    ) -> Result<String, TransformError> {
        self.guard(phi, s1, s2)?;
        match phi {
            Formula::In(t, SetTerm::Var(y)) if self.leaf.contains_key(y.as_str()) => {
                let expected = self.goal(ctx, phi, s1, s2);
                let leaf = self.leaf.get_mut(y.as_str()).expect("checked above");
                let node = leaf(b, ctx, t)?;
                if b.sequent(&node) != expected.as_slice() {
                    return Err(TransformError::Shape {
                        expected: show_seq(&expected),
                        found: show_seq(b.sequent(&node)),
                    });
                }
                Ok(node)
            }
            Formula::NotIn(_, SetTerm::Var(y))
                if self.leaf.contains_key(y.as_str())
                    || s1.contains_key(y.as_str())
                    || s2.contains_key(y.as_str()) =>
            {
                Err(TransformError::NegativeOccurrence(y.clone()))
            }
            Formula::And(a, c) => self.derive_and(b, ctx, phi, a, c, s1, s2),
            Formula::Or(a, c) => self.derive_or(b, ctx, phi, a, c, s1, s2),
            Formula::All(x, body) => self.derive_all(b, ctx, phi, x, body, s1, s2),
            Formula::Ex(x, body) => self.derive_ex(b, ctx, phi, x, body, s1, s2),
            Formula::In(t, s @ SetTerm::Mu { .. }) if self.touched(s, s1, s2) => {
                self.derive_mu(b, ctx, t, s, s1, s2)
            }
            Formula::In(t, s @ SetTerm::Nu { ann: None, .. }) if self.touched(s, s1, s2) => {
                self.derive_nu(b, ctx, t, s, s1, s2)
            }
            Formula::In(_, SetTerm::Nu { ann: Some(_), .. }) => Err(TransformError::Unsupported(
                "annotated fixed point in an identity source".into(),
            )),
            _ => {
                // Atoms, and memberships the substitutions do not touch (or
                // touch identically on both sides).
                let a1 = apply_sigma(phi, s1);
                let a2 = apply_sigma(phi, s2);
                if !alpha_eq(&a1, &a2) {
                    return Err(TransformError::Unsupported(format!(
                        "substituted sides differ at an atom: {} vs {}",
                        print_formula(&a1),
                        print_formula(&a2)
                    )));
                }
                if self.system != System::Inductive && !a2.is_atomic() {
                    return Err(TransformError::Unsupported(format!(
                        "non-atomic identity leaf in a cyclic target: {}",
                        print_formula(&a2)
                    )));
                }
                let mut goal = ctx.to_vec();
                goal.push(negate(&a1));
                goal.push(a2);
                Ok(b.leaf(Rule::Id, goal))
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn derive_and(
        &mut self,
        b: &mut ProofBuilder,
        ctx: &[Formula],
        phi: &Formula,
        a: &Formula,
        c: &Formula,
        s1: &Sigma,
        s2: &Sigma,
    ) -> Result<String, TransformError> {
        let a1 = apply_sigma(a, s1);
        let a2 = apply_sigma(a, s2);
        let c1 = apply_sigma(c, s1);
        let c2 = apply_sigma(c, s2);
        let whole_neg = negate(&apply_sigma(phi, s1));
        let whole_pos = apply_sigma(phi, s2);

        let left = self.derive(b, ctx, a, s1, s2)?;
        let mut t1 = ctx.to_vec();
        t1.extend([a2.clone(), negate(&a1), negate(&c1)]);
        let l1 = b.weaken_to(left, &t1)?;
        let mut t2 = ctx.to_vec();
        t2.extend([a2.clone(), whole_neg.clone()]);
        let l2 = b.infer(Rule::Or, t2, vec![l1]);
        let mut t3 = ctx.to_vec();
        t3.extend([whole_neg.clone(), a2]);
        let l3 = b.reorder(l2, &t3)?;

        let right = self.derive(b, ctx, c, s1, s2)?;
        let mut u1 = ctx.to_vec();
        u1.extend([c2.clone(), negate(&a1), negate(&c1)]);
        let r1 = b.weaken_to(right, &u1)?;
        let mut u2 = ctx.to_vec();
        u2.extend([c2.clone(), whole_neg.clone()]);
        let r2 = b.infer(Rule::Or, u2, vec![r1]);
        let mut u3 = ctx.to_vec();
        u3.extend([whole_neg.clone(), c2]);
        let r3 = b.reorder(r2, &u3)?;

        let mut root_seq = ctx.to_vec();
        root_seq.extend([whole_neg, whole_pos]);
        Ok(b.infer(Rule::And, root_seq, vec![l3, r3]))
    }

    #[allow(clippy::too_many_arguments)]
    fn derive_or(
        &mut self,
        b: &mut ProofBuilder,
        ctx: &[Formula],
        phi: &Formula,
        a: &Formula,
        c: &Formula,
        s1: &Sigma,
        s2: &Sigma,
    ) -> Result<String, TransformError> {
        let a1 = apply_sigma(a, s1);
        let a2 = apply_sigma(a, s2);
        let c1 = apply_sigma(c, s1);
        let c2 = apply_sigma(c, s2);
        let whole_neg = negate(&apply_sigma(phi, s1));
        let whole_pos = apply_sigma(phi, s2);

        let left = self.derive(b, ctx, a, s1, s2)?;
        let mut t1 = ctx.to_vec();
        t1.extend([a2.clone(), c2.clone(), negate(&a1)]);
        let l1 = b.weaken_to(left, &t1)?;

        let right = self.derive(b, ctx, c, s1, s2)?;
        let mut u1 = ctx.to_vec();
        u1.extend([a2.clone(), c2.clone(), negate(&c1)]);
        let r1 = b.weaken_to(right, &u1)?;

        let mut and_seq = ctx.to_vec();
        and_seq.extend([a2.clone(), c2.clone(), whole_neg.clone()]);
        let and_node = b.infer(Rule::And, and_seq, vec![l1, r1]);

        let mut m1 = ctx.to_vec();
        m1.extend([whole_neg.clone(), a2, c2]);
        let m = b.reorder(and_node, &m1)?;

        let mut root_seq = ctx.to_vec();
        root_seq.extend([whole_neg, whole_pos]);
        Ok(b.infer(Rule::Or, root_seq, vec![m]))
    }

    #[allow(clippy::too_many_arguments)]
    fn derive_all(
        &mut self,
        b: &mut ProofBuilder,
        ctx: &[Formula],
        phi: &Formula,
        x: &str,
        body: &Formula,
        s1: &Sigma,
        s2: &Sigma,
    ) -> Result<String, TransformError> {
        let whole_neg = negate(&apply_sigma(phi, s1));
        let whole_pos = apply_sigma(phi, s2);
        let y = self.pool.fresh("y");
        let inst = subst_num(body, x, &Term::var(&y));
        let inner = self.derive(b, ctx, &inst, s1, s2)?;
        let inst_neg = negate(&apply_sigma(&inst, s1));
        let inst_pos = apply_sigma(&inst, s2);

        let mut t1 = ctx.to_vec();
        t1.extend([inst_pos.clone(), inst_neg]);
        let n1 = b.reorder(inner, &t1)?;
        let mut t2 = ctx.to_vec();
        t2.extend([inst_pos.clone(), whole_neg.clone()]);
        let n2 = b.infer(
            Rule::Ex {
                witness: Term::var(&y),
            },
            t2,
            vec![n1],
        );
        let mut t3 = ctx.to_vec();
        t3.extend([whole_neg.clone(), inst_pos]);
        let n3 = b.reorder(n2, &t3)?;
        let mut root_seq = ctx.to_vec();
        root_seq.extend([whole_neg, whole_pos]);
        Ok(b.infer(Rule::All { fresh: y }, root_seq, vec![n3]))
    }

    #[allow(clippy::too_many_arguments)]
    fn derive_ex(
        &mut self,
        b: &mut ProofBuilder,
        ctx: &[Formula],
        phi: &Formula,
        x: &str,
        body: &Formula,
        s1: &Sigma,
        s2: &Sigma,
    ) -> Result<String, TransformError> {
        let whole_neg = negate(&apply_sigma(phi, s1));
        let whole_pos = apply_sigma(phi, s2);
        let y = self.pool.fresh("y");
        let inst = subst_num(body, x, &Term::var(&y));
        let inner = self.derive(b, ctx, &inst, s1, s2)?;
        let inst_neg = negate(&apply_sigma(&inst, s1));

        let mut t1 = ctx.to_vec();
        t1.extend([inst_neg.clone(), whole_pos.clone()]);
        let n1 = b.infer(
            Rule::Ex {
                witness: Term::var(&y),
            },
            t1,
            vec![inner],
        );
        let mut t2 = ctx.to_vec();
        t2.extend([whole_pos.clone(), inst_neg]);
        let n2 = b.reorder(n1, &t2)?;
        let mut t3 = ctx.to_vec();
        t3.extend([whole_pos.clone(), whole_neg.clone()]);
        let n3 = b.infer(Rule::All { fresh: y }, t3, vec![n2]);
        let mut root_seq = ctx.to_vec();
        root_seq.extend([whole_neg, whole_pos]);
        b.reorder(n3, &root_seq)
    }

    /// An instance of a memoized cycle node at the member term `t`.
    #[allow(clippy::too_many_arguments)]
    fn instantiate(
        &mut self,
        b: &mut ProofBuilder,
        ctx: &[Formula],
        star: &str,
        v: &str,
        t: &Term,
        dual: &SetTerm,
        pos: &SetTerm,
    ) -> Result<String, TransformError> {
        if matches!(t, Term::Var(name) if name == v) {
            return Ok(star.to_string());
        }
        let mut goal = ctx.to_vec();
        goal.push(Formula::In(t.clone(), dual.clone()));
        goal.push(Formula::In(t.clone(), pos.clone()));
        Ok(b.infer(
            Rule::Sub {
                theta: vec![(v.to_string(), t.clone())],
            },
            goal,
            vec![star.to_string()],
        ))
    }

    fn derive_mu(
        &mut self,
        b: &mut ProofBuilder,
        ctx: &[Formula],
        t: &Term,
        s: &SetTerm,
        s1: &Sigma,
        s2: &Sigma,
    ) -> Result<String, TransformError> {
        let SetTerm::Mu {
            set_var,
            num_var,
            body,
        } = s
        else {
            unreachable!("dispatched on Mu");
        };
        let m1 = apply_sigma_set(s, s1);
        let m2 = apply_sigma_set(s, s2);
        let dual1 = dual_set_term(&m1).expect("least fixed points dualize");
        match self.system {
            System::Annotated => Err(TransformError::AnnotatedTarget),
            System::Cyclic => {
                let key = format!(
                    "mu {} {}",
                    print_set_term(&canon_set(&m1)),
                    print_set_term(&canon_set(&m2))
                );
                if let Some((star, v)) = self.memo.get(&key).cloned() {
                    return self.instantiate(b, ctx, &star, &v, t, &dual1, &m2);
                }
                let v = self.pool.fresh("v");
                let vt = Term::var(&v);
                let star = b.reserve();
                self.memo.insert(key, (star.clone(), v.clone()));

                let dual_head = Formula::In(vt.clone(), dual1.clone());
                let head = Formula::In(vt.clone(), m2.clone());
                let mut goal_star = ctx.to_vec();
                goal_star.extend([dual_head.clone(), head]);

                let mut s1x = s1.clone();
                s1x.insert(set_var.clone(), SetRepl::Term(m1.clone()));
                let mut s2x = s2.clone();
                s2x.insert(set_var.clone(), SetRepl::Term(m2.clone()));
                let saved = self.leaf.remove(set_var.as_str());
                self.leaf.insert(set_var.clone(), {
                    let star = star.clone();
                    let v = v.clone();
                    let dual1 = dual1.clone();
                    let m2 = m2.clone();
                    Box::new(move |b, ctx2, u| {
                        let mut goal = ctx2.to_vec();
                        goal.push(Formula::In(u.clone(), dual1.clone()));
                        goal.push(Formula::In(u.clone(), m2.clone()));
                        Ok(b.infer(
                            Rule::Sub {
                                theta: vec![(v.clone(), u.clone())],
                            },
                            goal,
                            vec![star.clone()],
                        ))
                    })
                });

                let inner_phi = subst_num(body, num_var, &vt);
                let inner = self.derive(b, ctx, &inner_phi, &s1x, &s2x);
                self.leaf.remove(set_var.as_str());
                if let Some(prev) = saved {
                    self.leaf.insert(set_var.clone(), prev);
                }
                let inner = inner?;

                let neg_in = negate(&apply_sigma(&inner_phi, &s1x));
                let pos_in = apply_sigma(&inner_phi, &s2x);
                debug_assert_eq!(pos_in, mu_unfold(&vt, &m2).expect("mu unfolds"));
                debug_assert_eq!(neg_in, nu_unfold(&vt, &dual1).expect("nu unfolds"));

                let mut t1 = ctx.to_vec();
                t1.extend([pos_in.clone(), neg_in]);
                let c1 = b.reorder(inner, &t1)?;
                let mut t2 = ctx.to_vec();
                t2.extend([pos_in.clone(), dual_head.clone()]);
                let c2 = b.infer(Rule::Nu { fresh: None }, t2, vec![c1]);
                let mut t3 = ctx.to_vec();
                t3.extend([dual_head, pos_in]);
                let c3 = b.reorder(c2, &t3)?;
                b.fill(&star, Rule::Mu, goal_star, vec![c3]);
                self.instantiate(b, ctx, &star, &v, t, &dual1, &m2)
            }
            System::Inductive => {
                let dual2 = dual_set_term(&m2).expect("least fixed points dualize");
                let u = self.pool.fresh("u");
                let w = self.pool.fresh("w");
                let ut = Term::var(&u);
                let wt = Term::var(&w);
                let inv = Formula::In(ut, dual2);
                let mem2 = Formula::In(t.clone(), m2.clone());
                let d1 = Formula::In(t.clone(), dual1.clone());

                let mut concl = ctx.to_vec();
                concl.extend([mem2.clone(), d1.clone()]);

                // Invariant at the member: the last two formulas are dual.
                let mut p1_seq = ctx.to_vec();
                p1_seq.extend([mem2.clone(), subst_num(&inv, &u, t)]);
                let p1 = b.leaf(Rule::Id, p1_seq);

                // Invariant preservation, via the engine one level in.
                let mut ctx2 = ctx.to_vec();
                ctx2.push(mem2.clone());
                let mut s1x = s1.clone();
                s1x.insert(set_var.clone(), SetRepl::Term(m2.clone()));
                let mut s2x = s2.clone();
                s2x.insert(set_var.clone(), SetRepl::Term(m2.clone()));
                let inner_phi = subst_num(body, num_var, &wt);
                let inner = self.derive(b, &ctx2, &inner_phi, &s1x, &s2x)?;
                let neg_in = negate(&apply_sigma(&inner_phi, &s1x));
                let pos_in = apply_sigma(&inner_phi, &s2x);
                debug_assert_eq!(pos_in, mu_unfold(&wt, &m2).expect("mu unfolds"));

                let head_w = Formula::In(wt, m2.clone());
                let mut t1 = ctx2.clone();
                t1.extend([neg_in.clone(), head_w.clone()]);
                let i3 = b.infer(Rule::Mu, t1, vec![inner]);
                let mut t2 = ctx2;
                t2.extend([head_w, neg_in]);
                let i4 = b.reorder(i3, &t2)?;

                let ind = b.infer(
                    Rule::Ind {
                        var: u,
                        inv,
                        fresh: w,
                    },
                    concl,
                    vec![p1, i4],
                );
                let mut goal = ctx.to_vec();
                goal.extend([d1, mem2]);
                b.reorder(ind, &goal)
            }
        }
    }

    fn derive_nu(
        &mut self,
        b: &mut ProofBuilder,
        ctx: &[Formula],
        t: &Term,
        s: &SetTerm,
        s1: &Sigma,
        s2: &Sigma,
    ) -> Result<String, TransformError> {
        let SetTerm::Nu {
            ann: None,
            set_var,
            num_var,
            body,
        } = s
        else {
            unreachable!("dispatched on bare Nu");
        };
        let n1 = apply_sigma_set(s, s1);
        let n2 = apply_sigma_set(s, s2);
        let dual1 = dual_set_term(&n1).expect("greatest fixed points dualize");
        match self.system {
            System::Annotated => Err(TransformError::AnnotatedTarget),
            System::Cyclic => {
                let key = format!(
                    "nu {} {}",
                    print_set_term(&canon_set(&n1)),
                    print_set_term(&canon_set(&n2))
                );
                if let Some((star, v)) = self.memo.get(&key).cloned() {
                    return self.instantiate(b, ctx, &star, &v, t, &dual1, &n2);
                }
                let v = self.pool.fresh("v");
                let vt = Term::var(&v);
                let star = b.reserve();
                self.memo.insert(key, (star.clone(), v.clone()));

                let dual_head = Formula::In(vt.clone(), dual1.clone());
                let head = Formula::In(vt.clone(), n2.clone());
                let mut goal_star = ctx.to_vec();
                goal_star.extend([dual_head.clone(), head]);

                let mut s1x = s1.clone();
                s1x.insert(set_var.clone(), SetRepl::Term(n1.clone()));
                let mut s2x = s2.clone();
                s2x.insert(set_var.clone(), SetRepl::Term(n2.clone()));
                let saved = self.leaf.remove(set_var.as_str());
                self.leaf.insert(set_var.clone(), {
                    let star = star.clone();
                    let v = v.clone();
                    let dual1 = dual1.clone();
                    let n2 = n2.clone();
                    Box::new(move |b, ctx2, u| {
                        let mut goal = ctx2.to_vec();
                        goal.push(Formula::In(u.clone(), dual1.clone()));
                        goal.push(Formula::In(u.clone(), n2.clone()));
                        Ok(b.infer(
                            Rule::Sub {
                                theta: vec![(v.clone(), u.clone())],
                            },
                            goal,
                            vec![star.clone()],
                        ))
                    })
                });

                let inner_phi = subst_num(body, num_var, &vt);
                let inner = self.derive(b, ctx, &inner_phi, &s1x, &s2x);
                self.leaf.remove(set_var.as_str());
                if let Some(prev) = saved {
                    self.leaf.insert(set_var.clone(), prev);
                }
                let inner = inner?;

                let neg_in = negate(&apply_sigma(&inner_phi, &s1x));
                let pos_in = apply_sigma(&inner_phi, &s2x);
                debug_assert_eq!(pos_in, nu_unfold(&vt, &n2).expect("nu unfolds"));
                debug_assert_eq!(neg_in, mu_unfold(&vt, &dual1).expect("mu unfolds"));

                let mut t1 = ctx.to_vec();
                t1.extend([pos_in.clone(), neg_in]);
                let c1 = b.reorder(inner, &t1)?;
                let mut t2 = ctx.to_vec();
                t2.extend([pos_in.clone(), dual_head.clone()]);
                let c2 = b.infer(Rule::Mu, t2, vec![c1]);
                let mut t3 = ctx.to_vec();
                t3.extend([dual_head, pos_in]);
                let c3 = b.reorder(c2, &t3)?;
                b.fill(&star, Rule::Nu { fresh: None }, goal_star, vec![c3]);
                self.instantiate(b, ctx, &star, &v, t, &dual1, &n2)
            }
            System::Inductive => {
                let u = self.pool.fresh("u");
                let w = self.pool.fresh("w");
                let ut = Term::var(&u);
                let wt = Term::var(&w);
                let inv = Formula::In(ut, n1.clone());
                let mem2 = Formula::In(t.clone(), n2.clone());
                let d1 = Formula::In(t.clone(), dual1.clone());

                let mut concl = ctx.to_vec();
                concl.extend([d1.clone(), mem2]);

                let mut p1_seq = ctx.to_vec();
                p1_seq.extend([d1.clone(), subst_num(&inv, &u, t)]);
                let p1 = b.leaf(Rule::Id, p1_seq);

                let mut ctx2 = ctx.to_vec();
                ctx2.push(d1);
                let mut s1x = s1.clone();
                s1x.insert(set_var.clone(), SetRepl::Term(n1.clone()));
                let mut s2x = s2.clone();
                s2x.insert(set_var.clone(), SetRepl::Term(n1.clone()));
                let inner_phi = subst_num(body, num_var, &wt);
                let inner = self.derive(b, &ctx2, &inner_phi, &s1x, &s2x)?;
                let neg_in = negate(&apply_sigma(&inner_phi, &s1x));
                let pos_in = apply_sigma(&inner_phi, &s2x);
                debug_assert_eq!(neg_in, mu_unfold(&wt, &dual1).expect("mu unfolds"));
                let dual_w = Formula::In(wt, dual1.clone());

                let mut t1 = ctx2.clone();
                t1.extend([pos_in.clone(), neg_in]);
                let i2 = b.reorder(inner, &t1)?;
                let mut t2 = ctx2.clone();
                t2.extend([pos_in.clone(), dual_w.clone()]);
                let i3 = b.infer(Rule::Mu, t2, vec![i2]);
                let mut t3 = ctx2;
                t3.extend([dual_w, pos_in]);
                let i4 = b.reorder(i3, &t3)?;

                Ok(b.infer(
                    Rule::Ind {
                        var: u,
                        inv,
                        fresh: w,
                    },
                    concl,
                    vec![p1, i4],
                ))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Derived constructions
// ---------------------------------------------------------------------------

/// A cyclic proof of `¬phi, phi` for an arbitrary formula.
pub fn derive_identity(phi: &Formula) -> Result<Proof, TransformError> {
    let mut b = ProofBuilder::new();
    let mut pool = NamePool::new();
    pool.absorb_formula(phi);
    let root = {
        let mut eng = Engine::new(System::Cyclic, &mut pool);
        eng.derive(&mut b, &[], phi, &Sigma::new(), &Sigma::new())?
    };
    Ok(b.finish(root))
}

/// A cyclic identity derivation `¬phi, phi` for a fixed-point membership
/// `phi` that unfolds the fixed point into a cycle instead of closing it as
/// an atomic leaf. Identity leaves remain only at atoms and at memberships
/// of set terms nested strictly inside the body.
pub fn derive_membership_identity(phi: &Formula) -> Result<Proof, TransformError> {
    let Formula::In(t, set) = phi else {
        return Err(TransformError::Unsupported(format!(
            "not a membership: {}",
            print_formula(phi)
        )));
    };
    let mut b = ProofBuilder::new();
    let mut pool = NamePool::new();
    pool.absorb_formula(phi);
    let root = {
        let mut eng = Engine::new(System::Cyclic, &mut pool);
        match set {
            SetTerm::Mu { .. } => eng.derive_mu(&mut b, &[], t, set, &Sigma::new(), &Sigma::new())?,
            SetTerm::Nu { ann: None, .. } => {
                eng.derive_nu(&mut b, &[], t, set, &Sigma::new(), &Sigma::new())?
            }
            _ => {
                return Err(TransformError::Unsupported(format!(
                    "not a fixed-point membership: {}",
                    print_formula(phi)
                )));
            }
        }
    };
    Ok(b.finish(root))
}

/// A proof of `¬phi, phi` whose leaves at the designated set variable
/// `hole` are plain identities `t ∉ hole, t ∈ hole` — the formula shape is
/// traversed functorially in `hole`. Fails if `hole` occurs negatively.
pub fn derive_functorial(
    phi: &Formula,
    hole: &str,
    system: System,
) -> Result<Proof, TransformError> {
    if system == System::Annotated {
        return Err(TransformError::AnnotatedTarget);
    }
    let mut b = ProofBuilder::new();
    let mut pool = NamePool::new();
    pool.absorb_formula(phi);
    pool.used.insert(hole.to_string());
    let hole_set = SetTerm::var(hole);
    let root = {
        let mut eng = Engine::new(system, &mut pool);
        eng.leaf.insert(
            hole.to_string(),
            Box::new(move |b, ctx, t| {
                let mut goal = ctx.to_vec();
                goal.push(Formula::NotIn(t.clone(), hole_set.clone()));
                goal.push(Formula::In(t.clone(), hole_set.clone()));
                Ok(b.leaf(Rule::Id, goal))
            }),
        );
        eng.derive(&mut b, &[], phi, &Sigma::new(), &Sigma::new())?
    };
    Ok(b.finish(root))
}

/// A finite derivation of `∀y (¬(body of m at y) ∨ y ∈ m)`: unfolding a
/// least fixed point into it.
pub fn derive_prefix_mu(m: &SetTerm) -> Result<Proof, TransformError> {
    if !matches!(m, SetTerm::Mu { .. }) {
        return Err(TransformError::Shape {
            expected: "a least fixed point".into(),
            found: print_set_term(m),
        });
    }
    let mut b = ProofBuilder::new();
    let mut pool = NamePool::new();
    pool.absorb_set(m);
    let y = pool.fresh("y");
    let yt = Term::var(&y);
    let unfolded = mu_unfold(&yt, m).expect("mu unfolds");
    let neg_unf = negate(&unfolded);
    let head = Formula::In(yt, m.clone());

    let id = b.leaf(Rule::Id, vec![neg_unf.clone(), unfolded]);
    let mu = b.infer(Rule::Mu, vec![neg_unf.clone(), head.clone()], vec![id]);
    let or_f = Formula::or(neg_unf, head);
    let or = b.infer(Rule::Or, vec![or_f.clone()], vec![mu]);
    let all = b.infer(
        Rule::All { fresh: y.clone() },
        vec![Formula::all(&y, or_f)],
        vec![or],
    );
    Ok(b.finish(all))
}

/// A finite derivation of `∀y (¬(y ∈ n) ∨ (body of n at y))`: a greatest
/// fixed point unfolds out of itself.
pub fn derive_prefix_nu(n: &SetTerm) -> Result<Proof, TransformError> {
    if !matches!(n, SetTerm::Nu { ann: None, .. }) {
        return Err(TransformError::Shape {
            expected: "a bare greatest fixed point".into(),
            found: print_set_term(n),
        });
    }
    let mut b = ProofBuilder::new();
    let mut pool = NamePool::new();
    pool.absorb_set(n);
    let y = pool.fresh("y");
    let yt = Term::var(&y);
    let unfolded = nu_unfold(&yt, n).expect("nu unfolds");
    let dual = dual_set_term(n).expect("dualizes");
    let neg_head = Formula::In(yt, dual);

    let id = b.leaf(Rule::Id, vec![negate(&unfolded), unfolded.clone()]);
    let e1 = b.reorder(id, &[unfolded.clone(), negate(&unfolded)])?;
    let mu = b.infer(Rule::Mu, vec![unfolded.clone(), neg_head.clone()], vec![e1]);
    let e2 = b.reorder(mu, &[neg_head.clone(), unfolded.clone()])?;
    let or_f = Formula::or(neg_head, unfolded);
    let or = b.infer(Rule::Or, vec![or_f.clone()], vec![e2]);
    let all = b.infer(
        Rule::All { fresh: y.clone() },
        vec![Formula::all(&y, or_f)],
        vec![or],
    );
    Ok(b.finish(all))
}

/// A finite derivation of the induction scheme for a least fixed point `m`
/// with invariant `psi` (free variable `v`):
/// `(∃z ((body at psi)(z) ∧ ¬psi(z))) ∨ ∀w (¬(w ∈ m) ∨ psi(w))`.
pub fn derive_induction_mu(
    m: &SetTerm,
    v: &str,
    psi: &Formula,
) -> Result<Proof, TransformError> {
    let SetTerm::Mu {
        set_var,
        num_var,
        body,
    } = m
    else {
        return Err(TransformError::Shape {
            expected: "a least fixed point".into(),
            found: print_set_term(m),
        });
    };
    let mut b = ProofBuilder::new();
    let mut pool = NamePool::new();
    pool.absorb_set(m);
    pool.absorb_formula(psi);
    pool.used.insert(v.to_string());
    let dual_m = dual_set_term(m).expect("dualizes");
    let w = pool.fresh("w");
    let wp = pool.fresh("w");
    let z = pool.fresh("z");
    let wt = Term::var(&w);
    let wpt = Term::var(&wp);
    let zt = Term::var(&z);

    let phi_psi = subst_abstraction(body, set_var, v, psi);
    let inv = negate(psi);

    let prem = Formula::all(
        &z,
        Formula::or(
            negate(&subst_num(&phi_psi, num_var, &zt)),
            subst_num(psi, v, &zt),
        ),
    );
    let not_prem = negate(&prem);
    let psi_w = subst_num(psi, v, &wt);
    let concl_inner = Formula::or(Formula::In(wt.clone(), dual_m.clone()), psi_w.clone());
    let concl = Formula::all(&w, concl_inner.clone());
    let axiom = Formula::or(not_prem.clone(), concl.clone());

    // Premise 1 of the induction: the invariant ¬psi at the member w.
    let p1 = b.leaf(
        Rule::Id,
        vec![not_prem.clone(), psi_w.clone(), subst_num(&inv, v, &wt)],
    );

    // Premise 2: preservation. The checker computes these two formulas
    // from the stored invariant; reproduce them by the same route.
    let psi_wp = subst_num(&negate(&inv), v, &wpt);
    let SetTerm::Nu {
        body: dual_body, ..
    } = &dual_m
    else {
        unreachable!("dual of mu is nu");
    };
    let third = subst_num(&subst_abstraction(dual_body, set_var, v, &inv), num_var, &wpt);

    let Formula::Ex(zb, ex_body) = &not_prem else {
        unreachable!("negated universal is existential");
    };
    let inst = subst_num(ex_body, zb, &wpt);
    let Formula::And(inst_a, inst_b) = &inst else {
        unreachable!("negated disjunction is a conjunction");
    };

    let q1 = b.leaf(
        Rule::Id,
        vec![
            psi_w.clone(),
            psi_wp.clone(),
            third.clone(),
            (**inst_a).clone(),
        ],
    );
    let q2_leaf = b.leaf(
        Rule::Id,
        vec![
            psi_w.clone(),
            third.clone(),
            psi_wp.clone(),
            (**inst_b).clone(),
        ],
    );
    let q2 = b.reorder(
        q2_leaf,
        &[
            psi_w.clone(),
            psi_wp.clone(),
            third.clone(),
            (**inst_b).clone(),
        ],
    )?;
    let and_node = b.infer(
        Rule::And,
        vec![psi_w.clone(), psi_wp.clone(), third.clone(), inst.clone()],
        vec![q1, q2],
    );
    let ex_node = b.infer(
        Rule::Ex {
            witness: wpt.clone(),
        },
        vec![psi_w.clone(), psi_wp.clone(), third.clone(), not_prem.clone()],
        vec![and_node],
    );
    let p2 = b.reorder(
        ex_node,
        &[not_prem.clone(), psi_w.clone(), psi_wp, third],
    )?;

    let ind = b.infer(
        Rule::Ind {
            var: v.to_string(),
            inv,
            fresh: wp,
        },
        vec![
            not_prem.clone(),
            psi_w.clone(),
            Formula::In(wt.clone(), dual_m.clone()),
        ],
        vec![p1, p2],
    );
    let r1 = b.reorder(
        ind,
        &[not_prem.clone(), Formula::In(wt, dual_m), psi_w],
    )?;
    let or_node = b.infer(Rule::Or, vec![not_prem.clone(), concl_inner], vec![r1]);
    let all_node = b.infer(
        Rule::All { fresh: w },
        vec![not_prem, concl],
        vec![or_node],
    );
    let root = b.infer(Rule::Or, vec![axiom], vec![all_node]);
    Ok(b.finish(root))
}

/// A finite derivation of the coinduction scheme for a greatest fixed
/// point `n` with invariant `psi` (free variable `v`):
/// `(∃z (psi(z) ∧ ¬(body at psi)(z))) ∨ ∀w (¬psi(w) ∨ w ∈ n)`.
pub fn derive_coinduction_nu(
    n: &SetTerm,
    v: &str,
    psi: &Formula,
) -> Result<Proof, TransformError> {
    let SetTerm::Nu {
        ann: None,
        set_var,
        num_var,
        body,
    } = n
    else {
        return Err(TransformError::Shape {
            expected: "a bare greatest fixed point".into(),
            found: print_set_term(n),
        });
    };
    let mut b = ProofBuilder::new();
    let mut pool = NamePool::new();
    pool.absorb_set(n);
    pool.absorb_formula(psi);
    pool.used.insert(v.to_string());
    let w = pool.fresh("w");
    let wp = pool.fresh("w");
    let z = pool.fresh("z");
    let wt = Term::var(&w);
    let wpt = Term::var(&wp);
    let zt = Term::var(&z);

    let phi_psi = subst_abstraction(body, set_var, v, psi);
    let prem = Formula::all(
        &z,
        Formula::or(
            negate(&subst_num(psi, v, &zt)),
            subst_num(&phi_psi, num_var, &zt),
        ),
    );
    let not_prem = negate(&prem);
    let neg_psi_w = subst_num(&negate(psi), v, &wt);
    let concl_inner = Formula::or(neg_psi_w.clone(), Formula::In(wt.clone(), n.clone()));
    let concl = Formula::all(&w, concl_inner.clone());
    let axiom = Formula::or(not_prem.clone(), concl.clone());

    // Premise 1: the invariant psi at the member w.
    let p1 = b.leaf(
        Rule::Id,
        vec![not_prem.clone(), neg_psi_w.clone(), subst_num(psi, v, &wt)],
    );

    // Premise 2: preservation, checker route.
    let neg_psi_wp = subst_num(&negate(psi), v, &wpt);
    let third = subst_num(&phi_psi, num_var, &wpt);

    let Formula::Ex(zb, ex_body) = &not_prem else {
        unreachable!("negated universal is existential");
    };
    let inst = subst_num(ex_body, zb, &wpt);
    let Formula::And(inst_a, inst_b) = &inst else {
        unreachable!("negated disjunction is a conjunction");
    };

    let q1_leaf = b.leaf(
        Rule::Id,
        vec![
            neg_psi_w.clone(),
            third.clone(),
            neg_psi_wp.clone(),
            (**inst_a).clone(),
        ],
    );
    let q1 = b.reorder(
        q1_leaf,
        &[
            neg_psi_w.clone(),
            neg_psi_wp.clone(),
            third.clone(),
            (**inst_a).clone(),
        ],
    )?;
    let q2 = b.leaf(
        Rule::Id,
        vec![
            neg_psi_w.clone(),
            neg_psi_wp.clone(),
            third.clone(),
            (**inst_b).clone(),
        ],
    );
    let and_node = b.infer(
        Rule::And,
        vec![
            neg_psi_w.clone(),
            neg_psi_wp.clone(),
            third.clone(),
            inst.clone(),
        ],
        vec![q1, q2],
    );
    let ex_node = b.infer(
        Rule::Ex {
            witness: wpt.clone(),
        },
        vec![
            neg_psi_w.clone(),
            neg_psi_wp.clone(),
            third.clone(),
            not_prem.clone(),
        ],
        vec![and_node],
    );
    let p2 = b.reorder(
        ex_node,
        &[not_prem.clone(), neg_psi_w.clone(), neg_psi_wp, third],
    )?;

    let ind = b.infer(
        Rule::Ind {
            var: v.to_string(),
            inv: psi.clone(),
            fresh: wp,
        },
        vec![
            not_prem.clone(),
            neg_psi_w,
            Formula::In(wt, n.clone()),
        ],
        vec![p1, p2],
    );
    let or_node = b.infer(Rule::Or, vec![not_prem.clone(), concl_inner], vec![ind]);
    let all_node = b.infer(
        Rule::All { fresh: w },
        vec![not_prem, concl],
        vec![or_node],
    );
    let root = b.infer(Rule::Or, vec![axiom], vec![all_node]);
    Ok(b.finish(root))
}

/// All paths (in the equality-substitution addressing scheme) to free
/// occurrences of the numeric variable `x` in `f`.
fn paths_to_var(f: &Formula, x: &str) -> Vec<Vec<usize>> {
    fn term_paths(t: &Term, x: &str, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match t {
            Term::Var(v) if v == x => out.push(prefix.clone()),
            Term::Var(_) | Term::Zero | Term::Eps => {}
            Term::Succ(a) => {
                prefix.push(0);
                term_paths(a, x, prefix, out);
                prefix.pop();
            }
            Term::Plus(a, b) | Term::Times(a, b) | Term::App(a, b) => {
                prefix.push(0);
                term_paths(a, x, prefix, out);
                prefix.pop();
                prefix.push(1);
                term_paths(b, x, prefix, out);
                prefix.pop();
            }
        }
    }
    fn set_paths(s: &SetTerm, x: &str, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match s {
            SetTerm::Var(_) => {}
            SetTerm::Mu { num_var, body, .. } | SetTerm::Nu { num_var, body, .. } => {
                if num_var != x {
                    prefix.push(0);
                    go(body, x, prefix, out);
                    prefix.pop();
                }
            }
        }
    }
    fn go(f: &Formula, x: &str, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match f {
            Formula::Lt(a, b) | Formula::NLess(a, b) | Formula::Eq(a, b) | Formula::Neq(a, b) => {
                prefix.push(0);
                term_paths(a, x, prefix, out);
                prefix.pop();
                prefix.push(1);
                term_paths(b, x, prefix, out);
                prefix.pop();
            }
            Formula::In(t, s) | Formula::NotIn(t, s) => {
                prefix.push(0);
                term_paths(t, x, prefix, out);
                prefix.pop();
                prefix.push(1);
                set_paths(s, x, prefix, out);
                prefix.pop();
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                prefix.push(0);
                go(a, x, prefix, out);
                prefix.pop();
                prefix.push(1);
                go(b, x, prefix, out);
                prefix.pop();
            }
            Formula::All(y, g) | Formula::Ex(y, g) => {
                if y != x {
                    prefix.push(0);
                    go(g, x, prefix, out);
                    prefix.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    go(f, x, &mut prefix, &mut out);
    out
}

/// A finite derivation of the numeric induction scheme for `phi` in `x`:
/// `(¬phi(0) ∨ ∃x (phi(x) ∧ ¬phi(x+1))) ∨ ∀x phi(x)`.
pub fn derive_numeric_induction(x: &str, phi: &Formula) -> Result<Proof, TransformError> {
    let mut b = ProofBuilder::new();
    let mut pool = NamePool::new();
    pool.absorb_formula(phi);
    pool.used.insert(x.to_string());
    let nat = crate::rules::canonical_nat();
    pool.absorb_set(&nat);
    let dual_nat = dual_set_term(&nat).expect("dualizes");

    let y = pool.fresh("y");
    let w = pool.fresh("w");
    let zp = pool.fresh("z");
    let yt = Term::var(&y);
    let wt = Term::var(&w);
    let zpt = Term::var(&zp);

    let neg_phi = negate(phi);
    let zero_case = subst_num(&neg_phi, x, &Term::Zero);
    let step_case = Formula::ex(
        x,
        Formula::and(
            phi.clone(),
            subst_num(&neg_phi, x, &Term::Succ(Box::new(Term::var(x)))),
        ),
    );
    let both = Formula::or(zero_case.clone(), step_case.clone());
    let concl = Formula::all(x, phi.clone());
    let axiom = Formula::or(both.clone(), concl.clone());

    let phi_y = subst_num(phi, x, &yt);
    let in_y_nat = Formula::In(yt.clone(), nat.clone());

    // Left cut branch: y is a number.
    let nat_leaf = b.leaf(Rule::Nat, vec![in_y_nat.clone()]);
    let p1 = b.weaken_to(
        nat_leaf,
        &[both.clone(), phi_y.clone(), in_y_nat.clone()],
    )?;

    // Right cut branch: induction along the dual of the numeric fixed
    // point, with invariant ¬phi.
    let in_y_dual = Formula::In(yt.clone(), dual_nat.clone());

    // Premise 1 of the induction.
    let neg_phi_y = subst_num(&neg_phi, x, &yt);
    let p21_leaf = b.leaf(
        Rule::Id,
        vec![
            zero_case.clone(),
            step_case.clone(),
            phi_y.clone(),
            neg_phi_y,
        ],
    );
    let p21 = b.reorder(
        p21_leaf,
        &[
            phi_y.clone(),
            zero_case.clone(),
            step_case.clone(),
            subst_num(&neg_phi, x, &yt),
        ],
    )?;

    // Premise 2 of the induction, checker route.
    let phi_w = subst_num(&negate(&neg_phi), x, &wt);
    let SetTerm::Nu {
        set_var: nat_sv,
        num_var: nat_nv,
        body: dual_body,
        ..
    } = &dual_nat
    else {
        unreachable!("dual of mu is nu");
    };
    let third = subst_num(
        &subst_abstraction(dual_body, nat_sv, x, &neg_phi),
        nat_nv,
        &wt,
    );
    let Formula::And(t_zero, t_step) = &third else {
        return Err(TransformError::Shape {
            expected: "a conjunction after unfolding the numeric dual".into(),
            found: print_formula(&third),
        });
    };
    let t_zero = (**t_zero).clone();
    let t_step = (**t_step).clone();

    let neg_phi_w = subst_num(&neg_phi, x, &wt);
    let paths = paths_to_var(&neg_phi, x);

    // Zero branch: rewrite w back to 0 in ¬phi(0) using w ≠ 0.
    let z_id = b.leaf(
        Rule::Id,
        vec![
            phi_y.clone(),
            step_case.clone(),
            neg_phi_w.clone(),
            phi_w.clone(),
        ],
    );
    let z_pre = b.reorder(
        z_id,
        &[
            phi_y.clone(),
            neg_phi_w.clone(),
            step_case.clone(),
            phi_w.clone(),
        ],
    )?;
    let z_branch = b.infer(
        Rule::EqSub {
            positions: paths.iter().map(|p| (1, p.clone())).collect(),
        },
        vec![
            phi_y.clone(),
            zero_case.clone(),
            step_case.clone(),
            phi_w.clone(),
            t_zero.clone(),
        ],
        vec![z_pre],
    );

    // Step branch: unpack the universal half of the unfolding.
    let Formula::All(step_binder, step_inner) = &t_step else {
        return Err(TransformError::Shape {
            expected: "a universal step case".into(),
            found: print_formula(&t_step),
        });
    };
    let inst_or = subst_num(step_inner, step_binder, &zpt);
    let Formula::Or(c1, c2) = &inst_or else {
        return Err(TransformError::Shape {
            expected: "a disjunctive step case".into(),
            found: print_formula(&inst_or),
        });
    };
    let c1 = (**c1).clone();
    let c2 = (**c2).clone();

    let Formula::Ex(sb, s_inner) = &step_case else {
        unreachable!("step case is existential");
    };
    let inst_b = subst_num(s_inner, sb, &zpt);
    let Formula::And(d1, d2) = &inst_b else {
        unreachable!("step case instance is a conjunction");
    };
    let d1 = (**d1).clone();
    let d2 = (**d2).clone();

    let b1_leaf = b.leaf(
        Rule::Id,
        vec![
            phi_y.clone(),
            zero_case.clone(),
            phi_w.clone(),
            c2.clone(),
            c1.clone(),
            d1.clone(),
        ],
    );
    let b1 = b.reorder(
        b1_leaf,
        &[
            phi_y.clone(),
            zero_case.clone(),
            phi_w.clone(),
            c1.clone(),
            c2.clone(),
            d1.clone(),
        ],
    )?;

    let b2_id = b.leaf(
        Rule::Id,
        vec![
            phi_y.clone(),
            zero_case.clone(),
            c1.clone(),
            neg_phi_w.clone(),
            phi_w.clone(),
        ],
    );
    let b2_pre = b.reorder(
        b2_id,
        &[
            phi_y.clone(),
            zero_case.clone(),
            phi_w.clone(),
            c1.clone(),
            neg_phi_w.clone(),
        ],
    )?;
    let b2_eq = b.infer(
        Rule::EqSub {
            positions: paths.iter().map(|p| (4, p.clone())).collect(),
        },
        vec![
            phi_y.clone(),
            zero_case.clone(),
            phi_w.clone(),
            c1.clone(),
            d2.clone(),
            c2.clone(),
        ],
        vec![b2_pre],
    );
    let b2 = b.reorder(
        b2_eq,
        &[
            phi_y.clone(),
            zero_case.clone(),
            phi_w.clone(),
            c1.clone(),
            c2.clone(),
            d2.clone(),
        ],
    )?;

    let s_and = b.infer(
        Rule::And,
        vec![
            phi_y.clone(),
            zero_case.clone(),
            phi_w.clone(),
            c1.clone(),
            c2.clone(),
            inst_b.clone(),
        ],
        vec![b1, b2],
    );
    let s_ex = b.infer(
        Rule::Ex {
            witness: zpt.clone(),
        },
        vec![
            phi_y.clone(),
            zero_case.clone(),
            phi_w.clone(),
            c1.clone(),
            c2.clone(),
            step_case.clone(),
        ],
        vec![s_and],
    );
    let s_re = b.reorder(
        s_ex,
        &[
            phi_y.clone(),
            zero_case.clone(),
            step_case.clone(),
            phi_w.clone(),
            c1,
            c2,
        ],
    )?;
    let s_or = b.infer(
        Rule::Or,
        vec![
            phi_y.clone(),
            zero_case.clone(),
            step_case.clone(),
            phi_w.clone(),
            inst_or,
        ],
        vec![s_re],
    );
    let s_branch = b.infer(
        Rule::All { fresh: zp },
        vec![
            phi_y.clone(),
            zero_case.clone(),
            step_case.clone(),
            phi_w.clone(),
            t_step,
        ],
        vec![s_or],
    );

    let and_split = b.infer(
        Rule::And,
        vec![
            phi_y.clone(),
            zero_case.clone(),
            step_case.clone(),
            phi_w,
            third,
        ],
        vec![z_branch, s_branch],
    );
    let ind = b.infer(
        Rule::Ind {
            var: x.to_string(),
            inv: neg_phi,
            fresh: w,
        },
        vec![
            phi_y.clone(),
            zero_case.clone(),
            step_case.clone(),
            in_y_dual.clone(),
        ],
        vec![p21, and_split],
    );
    let r2 = b.reorder(
        ind,
        &[
            phi_y.clone(),
            in_y_dual.clone(),
            zero_case,
            step_case,
        ],
    )?;
    let or_m = b.infer(
        Rule::Or,
        vec![phi_y.clone(), in_y_dual.clone(), both.clone()],
        vec![r2],
    );
    let p2 = b.reorder(or_m, &[both.clone(), phi_y.clone(), in_y_dual])?;

    let cut = b.infer(
        Rule::Cut { phi: in_y_nat },
        vec![both.clone(), phi_y],
        vec![p1, p2],
    );
    let all_y = b.infer(Rule::All { fresh: y }, vec![both, concl], vec![cut]);
    let root = b.infer(Rule::Or, vec![axiom], vec![all_y]);
    Ok(b.finish(root))
}

/// From a proof of `gamma, (unfolding of n at t)` produce a finite
/// derivation of `gamma, t ∈ n` by explicit induction along the dual of
/// `n` with the unfolding itself as the invariant.
pub fn derive_nu_intro(
    gamma: &[Formula],
    t: &Term,
    n: &SetTerm,
    premise: &Proof,
) -> Result<Proof, TransformError> {
    let SetTerm::Nu {
        ann: None,
        set_var,
        num_var,
        body,
    } = n
    else {
        return Err(TransformError::Shape {
            expected: "a bare greatest fixed point".into(),
            found: print_set_term(n),
        });
    };
    let mut b = ProofBuilder::new();
    let mut pool = NamePool::new();
    for f in gamma {
        pool.absorb_formula(f);
    }
    pool.absorb_term(t);
    pool.absorb_set(n);
    for node in premise.nodes.values() {
        for f in &node.sequent.0 {
            pool.absorb_formula(f);
        }
        pool.absorb_rule(&node.rule);
    }

    let u = pool.fresh("u");
    let w = pool.fresh("w");
    let ut = Term::var(&u);
    let wt = Term::var(&w);
    let inv = nu_unfold(&ut, n).expect("nu unfolds");
    let dual_n = dual_set_term(n).expect("dualizes");

    let mut expected = gamma.to_vec();
    expected.push(subst_num(&inv, &u, t));
    let found = &premise.node(&premise.root).sequent.0;
    if found != &expected {
        return Err(TransformError::PremiseMismatch {
            expected: show_seq(&expected),
            found: show_seq(found),
        });
    }
    let p1 = b.import(premise);

    let p2 = {
        let mut eng = Engine::new(System::Inductive, &mut pool);
        let s1: Sigma = [(set_var.clone(), SetRepl::Term(n.clone()))]
            .into_iter()
            .collect();
        let s2: Sigma = [(
            set_var.clone(),
            SetRepl::Abstraction(u.clone(), inv.clone()),
        )]
        .into_iter()
        .collect();
        eng.leaf.insert(set_var.clone(), {
            let n = n.clone();
            let dual_n = dual_n.clone();
            Box::new(move |b, ctx2, s| {
                let unf = nu_unfold(s, &n).expect("nu unfolds");
                let mut g1 = ctx2.to_vec();
                g1.extend([negate(&unf), unf.clone()]);
                let id = b.leaf(Rule::Id, g1);
                let mut g2 = ctx2.to_vec();
                g2.extend([unf.clone(), negate(&unf)]);
                let e1 = b.reorder(id, &g2)?;
                let in_dual = Formula::In(s.clone(), dual_n.clone());
                let mut g3 = ctx2.to_vec();
                g3.extend([unf.clone(), in_dual.clone()]);
                let mu = b.infer(Rule::Mu, g3, vec![e1]);
                let mut g4 = ctx2.to_vec();
                g4.extend([in_dual, unf]);
                b.reorder(mu, &g4)
            })
        });
        let inner_phi = subst_num(body, num_var, &wt);
        eng.derive(&mut b, gamma, &inner_phi, &s1, &s2)?
    };

    let mut concl = gamma.to_vec();
    concl.push(Formula::In(t.clone(), n.clone()));
    let ind = b.infer(
        Rule::Ind {
            var: u,
            inv,
            fresh: w,
        },
        concl,
        vec![p1, p2],
    );
    Ok(b.finish(ind))
}

// ---------------------------------------------------------------------------
// Induction elimination
// ---------------------------------------------------------------------------

/// Compile a finite derivation (which may use explicit induction and
/// identity on compound formulas) into a cyclic proof: induction nodes
/// become cycles through a generalized membership, identity nodes become
/// identity expansions.
pub fn eliminate_induction(proof: &Proof) -> Result<Proof, TransformError> {
    let verdict = check_derivation(proof);
    if !verdict.ok {
        let why = verdict
            .diagnostics
            .first()
            .map(|d| format!("{} ({}): {}", d.node, d.rule, d.reason))
            .unwrap_or_else(|| "unknown defect".into());
        return Err(TransformError::InvalidInput(why));
    }
    let mut b = ProofBuilder::new();
    let mut pool = NamePool::new();
    for node in proof.nodes.values() {
        for f in &node.sequent.0 {
            pool.absorb_formula(f);
        }
        pool.absorb_rule(&node.rule);
    }
    let mut map: HashMap<String, String> = HashMap::new();
    let root = convert_node(proof, &proof.root, &mut b, &mut map, &mut pool)?;
    Ok(b.finish(root))
}

fn convert_node(
    proof: &Proof,
    id: &str,
    b: &mut ProofBuilder,
    map: &mut HashMap<String, String>,
    pool: &mut NamePool,
) -> Result<String, TransformError> {
    if let Some(done) = map.get(id) {
        return Ok(done.clone());
    }
    let node = proof.node(id);
    let seq = &node.sequent.0;
    let new_id = match &node.rule {
        Rule::Id if !seq[seq.len() - 1].is_atomic() => {
            let phi = seq[seq.len() - 1].clone();
            let ident = {
                let mut eng = Engine::new(System::Cyclic, pool);
                eng.derive(b, &[], &phi, &Sigma::new(), &Sigma::new())?
            };
            b.weaken_to(ident, seq)?
        }
        Rule::Ind { var, inv, fresh } => {
            let d1 = convert_node(proof, &node.premises[0], b, map, pool)?;
            let d2 = convert_node(proof, &node.premises[1], b, map, pool)?;
            eliminate_ind_node(seq, var, inv, fresh, d1, d2, b, pool)?
        }
        rule => {
            let mut premises = Vec::with_capacity(node.premises.len());
            for p in &node.premises {
                premises.push(convert_node(proof, p, b, map, pool)?);
            }
            b.infer(rule.clone(), seq.clone(), premises)
        }
    };
    map.insert(id.to_string(), new_id.clone());
    Ok(new_id)
}

#[allow(clippy::too_many_arguments)]
fn eliminate_ind_node(
    seq: &[Formula],
    var: &str,
    inv: &Formula,
    fresh0: &str,
    d1: String,
    d2: String,
    b: &mut ProofBuilder,
    pool: &mut NamePool,
) -> Result<String, TransformError> {
    let n = seq.len();
    let Formula::In(t, nuterm) = &seq[n - 1] else {
        unreachable!("validated induction node");
    };
    let SetTerm::Nu {
        ann: None,
        set_var,
        num_var,
        body,
    } = nuterm
    else {
        unreachable!("validated induction node");
    };
    if fv_num_formula(inv).contains(num_var) && var != num_var {
        return Err(TransformError::NameCollision(num_var.clone()));
    }
    let gamma: Vec<Formula> = seq[..n - 1].to_vec();

    let v = pool.fresh("v");
    let vt = Term::var(&v);
    let neg_f_v = subst_num(&negate(inv), var, &vt);
    let in_v = Formula::In(vt.clone(), nuterm.clone());
    let unf_v = nu_unfold(&vt, nuterm).expect("nu unfolds");
    let h = subst_num(&subst_abstraction(body, set_var, var, inv), num_var, &vt);

    let star = b.reserve();
    let mut g_star = gamma.clone();
    g_star.extend([neg_f_v.clone(), in_v]);
    let mut nu_premise = gamma.clone();
    nu_premise.extend([neg_f_v.clone(), unf_v]);

    // Branch A of the cut inside the cycle: the second induction premise,
    // instantiated at the generalization variable.
    let theta_a = vec![(fresh0.to_string(), vt.clone())];
    let mapped_a: Vec<Formula> = b
        .sequent(&d2)
        .iter()
        .map(|f| apply_theta(f, &theta_a))
        .collect();
    let sub_a = b.infer(Rule::Sub { theta: theta_a }, mapped_a, vec![d2]);
    let mut target_a = nu_premise.clone();
    target_a.push(h.clone());
    let branch_a = b.weaken_to(sub_a, &target_a)?;

    // Branch B: monotonicity of the body, closing back at the cycle node.
    let mut ctx_b = gamma.clone();
    ctx_b.push(neg_f_v.clone());
    let branch_b_raw = {
        let mut eng = Engine::new(System::Cyclic, pool);
        let s1: Sigma = [(
            set_var.clone(),
            SetRepl::Abstraction(var.to_string(), inv.clone()),
        )]
        .into_iter()
        .collect();
        let s2: Sigma = [(set_var.clone(), SetRepl::Term(nuterm.clone()))]
            .into_iter()
            .collect();
        eng.leaf.insert(set_var.clone(), {
            let star = star.clone();
            let v = v.clone();
            let g_star = g_star.clone();
            let inv = inv.clone();
            let var = var.to_string();
            let nuterm = nuterm.clone();
            Box::new(move |b, ctx2, s| {
                let theta = vec![(v.clone(), s.clone())];
                let mapped: Vec<Formula> =
                    g_star.iter().map(|f| apply_theta(f, &theta)).collect();
                let sub = b.infer(Rule::Sub { theta }, mapped, vec![star.clone()]);
                let mut target = ctx2.to_vec();
                target.push(negate(&subst_num(&inv, &var, s)));
                target.push(Formula::In(s.clone(), nuterm.clone()));
                b.weaken_to(sub, &target)
            })
        });
        let inner_phi = subst_num(body, num_var, &vt);
        eng.derive(b, &ctx_b, &inner_phi, &s1, &s2)?
    };
    let mut target_b = nu_premise.clone();
    target_b.push(negate(&h));
    let branch_b = b.reorder(branch_b_raw, &target_b)?;

    let cut_inner = b.infer(
        Rule::Cut { phi: h },
        nu_premise,
        vec![branch_a, branch_b],
    );
    b.fill(&star, Rule::Nu { fresh: None }, g_star.clone(), vec![cut_inner]);

    // Outer cut replacing the induction node itself.
    let f_t = subst_num(inv, var, t);
    let mut target_p1 = seq.to_vec();
    target_p1.push(f_t.clone());
    let p1 = b.weaken_to(d1, &target_p1)?;

    let theta_t = vec![(v, t.clone())];
    let mapped_t: Vec<Formula> = g_star.iter().map(|f| apply_theta(f, &theta_t)).collect();
    let sub_t = b.infer(Rule::Sub { theta: theta_t }, mapped_t, vec![star]);
    let mut target_p2 = seq.to_vec();
    target_p2.push(negate(&f_t));
    let p2 = b.reorder(sub_t, &target_p2)?;

    Ok(b.infer(Rule::Cut { phi: f_t }, seq.to_vec(), vec![p1, p2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{check_cyclic_local, check_local};
    use crate::validity::{check_progressing, ProgressOutcome};

    fn nat() -> SetTerm {
        crate::rules::canonical_nat()
    }

    fn assert_cyclic_and_progressing(proof: &Proof) {
        let verdict = check_cyclic_local(proof);
        assert!(
            verdict.ok,
            "cyclic check failed: {:?}",
            verdict.diagnostics.first()
        );
        match check_progressing(proof).expect("progress check runs") {
            ProgressOutcome::Progressing => {}
            ProgressOutcome::NotProgressing(lasso) => {
                panic!("expected a progressing proof, got counterexample {lasso}")
            }
        }
    }

    fn assert_finite(proof: &Proof) {
        let verdict = check_derivation(proof);
        assert!(
            verdict.ok,
            "finite derivation check failed: {:?}",
            verdict.diagnostics.first()
        );
    }

    #[test]
    fn identity_of_an_atom_is_a_single_node() {
        let phi = Formula::Eq(Term::var("a"), Term::Zero);
        let proof = derive_identity(&phi).expect("derives");
        assert_eq!(proof.nodes.len(), 1);
        assert_cyclic_and_progressing(&proof);
        assert_eq!(
            proof.node(&proof.root).sequent.0,
            vec![negate(&phi), phi.clone()]
        );
    }

    #[test]
    fn identity_of_propositional_compounds_checks() {
        let atom = |l: &str, r: u64| Formula::Eq(Term::var(l), Term::numeral(r));
        let phi = Formula::or(
            Formula::and(atom("a", 0), atom("b", 1)),
            Formula::all("c", Formula::ex("d", Formula::Lt(Term::var("c"), Term::var("d")))),
        );
        let proof = derive_identity(&phi).expect("derives");
        assert_cyclic_and_progressing(&proof);
        assert_eq!(
            proof.node(&proof.root).sequent.0,
            vec![negate(&phi), phi]
        );
    }

    #[test]
    fn identity_of_a_numeric_membership_is_atomic_here() {
        let phi = Formula::In(Term::numeral(2), nat());
        let proof = derive_identity(&phi).expect("derives");
        assert_eq!(proof.nodes.len(), 1);
        assert_cyclic_and_progressing(&proof);
    }

    #[test]
    fn membership_identity_unfolds_instead_of_closing() {
        let phi = Formula::In(Term::numeral(2), nat());
        let proof = derive_membership_identity(&phi).expect("derives");
        assert!(proof.nodes.len() > 1);
        let root = &proof.nodes[&proof.root];
        assert_eq!(root.sequent.0, vec![negate(&phi), phi.clone()]);
        // No leaf closes a fixed-point membership any more.
        for node in proof.nodes.values() {
            if let Rule::Id = node.rule {
                let s = &node.sequent.0;
                assert!(!matches!(
                    &s[s.len() - 1],
                    Formula::In(_, SetTerm::Mu { .. } | SetTerm::Nu { .. })
                ));
            }
        }
        assert_cyclic_and_progressing(&proof);
        // Atoms are rejected: there is nothing to unfold.
        let atom = Formula::Eq(Term::Zero, Term::Zero);
        assert!(derive_membership_identity(&atom).is_err());
    }

    #[test]
    fn functorial_traversal_handles_nested_fixed_points() {
        // x ∈ muZ z. (z=0 ∨ z ∈ Y ∨ z ∈ Z): positive in the hole Y.
        let body = Formula::or(
            Formula::Eq(Term::var("z"), Term::Zero),
            Formula::or(
                Formula::In(Term::var("z"), SetTerm::var("Y")),
                Formula::In(Term::var("z"), SetTerm::var("Z")),
            ),
        );
        let m = SetTerm::Mu {
            set_var: "Z".into(),
            num_var: "z".into(),
            body: Box::new(body),
        };
        let phi = Formula::In(Term::var("x"), m);
        let proof = derive_functorial(&phi, "Y", System::Cyclic).expect("derives");
        assert_cyclic_and_progressing(&proof);

        let finite = derive_functorial(&phi, "Y", System::Inductive).expect("derives");
        assert_finite(&finite);
    }

    #[test]
    fn functorial_rejects_a_negative_hole() {
        let phi = Formula::NotIn(Term::var("x"), SetTerm::var("Y"));
        let err = derive_functorial(&phi, "Y", System::Cyclic).unwrap_err();
        assert!(matches!(err, TransformError::NegativeOccurrence(_)));
    }

    #[test]
    fn prefix_schemes_for_the_numeric_fixed_point_check() {
        let mu = derive_prefix_mu(&nat()).expect("derives");
        assert_finite(&mu);

        let stream = SetTerm::Nu {
            ann: None,
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(Formula::In(
                Term::Succ(Box::new(Term::var("x"))),
                SetTerm::var("X"),
            )),
        };
        let nu = derive_prefix_nu(&stream).expect("derives");
        assert_finite(&nu);
    }

    #[test]
    fn induction_and_coinduction_schemes_check() {
        let psi = Formula::NLess(Term::var("k"), Term::Zero);
        let ind = derive_induction_mu(&nat(), "k", &psi).expect("derives");
        assert_finite(&ind);

        let stream = SetTerm::Nu {
            ann: None,
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(Formula::In(
                Term::Succ(Box::new(Term::var("x"))),
                SetTerm::var("X"),
            )),
        };
        let coind = derive_coinduction_nu(&stream, "k", &psi).expect("derives");
        assert_finite(&coind);
    }

    #[test]
    fn numeric_induction_scheme_checks() {
        let phi = Formula::Eq(
            Term::Plus(Box::new(Term::var("x")), Box::new(Term::Zero)),
            Term::var("x"),
        );
        let proof = derive_numeric_induction("x", &phi).expect("derives");
        assert_finite(&proof);
    }

    #[test]
    fn numeric_induction_handles_quantified_predicates() {
        let phi = Formula::ex("q", Formula::Eq(Term::var("x"), Term::var("q")));
        let proof = derive_numeric_induction("x", &phi).expect("derives");
        assert_finite(&proof);
    }

    #[test]
    fn nu_intro_from_a_proof_of_the_unfolding() {
        let stream = SetTerm::Nu {
            ann: None,
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(Formula::In(Term::var("x"), SetTerm::var("X"))),
        };
        let t = Term::var("a");
        let gamma = vec![Formula::In(
            t.clone(),
            dual_set_term(&stream).expect("dualizes"),
        )];
        // gamma, (unfolding at a) is an identity: the unfolding here is
        // a ∈ stream itself and gamma holds its dual.
        let mut pre = ProofBuilder::new();
        let mut seq = gamma.clone();
        seq.push(nu_unfold(&t, &stream).expect("unfolds"));
        let id = pre.leaf(Rule::Id, seq);
        let premise = pre.finish(id);
        assert_finite(&premise);

        let proof = derive_nu_intro(&gamma, &t, &stream, &premise).expect("derives");
        assert_finite(&proof);
        let mut expected = gamma;
        expected.push(Formula::In(t, stream));
        assert_eq!(proof.node(&proof.root).sequent.0, expected);
    }

    #[test]
    fn nu_intro_rejects_a_mismatched_premise() {
        let stream = SetTerm::Nu {
            ann: None,
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(Formula::In(Term::var("x"), SetTerm::var("X"))),
        };
        let mut pre = ProofBuilder::new();
        let id = pre.leaf(
            Rule::Id,
            vec![
                Formula::Neq(Term::Zero, Term::Zero),
                Formula::Eq(Term::Zero, Term::Zero),
            ],
        );
        let premise = pre.finish(id);
        let err = derive_nu_intro(&[], &Term::Zero, &stream, &premise).unwrap_err();
        assert!(matches!(err, TransformError::PremiseMismatch { .. }));
    }

    #[test]
    fn eliminating_induction_from_the_coinduction_scheme_yields_a_progressing_cycle() {
        let stream = SetTerm::Nu {
            ann: None,
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(Formula::In(
                Term::Succ(Box::new(Term::var("x"))),
                SetTerm::var("X"),
            )),
        };
        let psi = Formula::NLess(Term::var("k"), Term::Zero);
        let finite = derive_coinduction_nu(&stream, "k", &psi).expect("derives");
        assert_finite(&finite);

        let cyclic = eliminate_induction(&finite).expect("compiles");
        assert_eq!(
            cyclic.node(&cyclic.root).sequent.0,
            finite.node(&finite.root).sequent.0
        );
        assert_cyclic_and_progressing(&cyclic);
    }

    #[test]
    fn eliminating_induction_from_numeric_induction_yields_a_progressing_cycle() {
        let phi = Formula::Eq(
            Term::Plus(Box::new(Term::var("x")), Box::new(Term::Zero)),
            Term::var("x"),
        );
        let finite = derive_numeric_induction("x", &phi).expect("derives");
        assert_finite(&finite);

        let cyclic = eliminate_induction(&finite).expect("compiles");
        assert_eq!(
            cyclic.node(&cyclic.root).sequent.0,
            finite.node(&finite.root).sequent.0
        );
        assert_cyclic_and_progressing(&cyclic);
    }

    #[test]
    fn eliminating_induction_from_nu_intro_yields_a_progressing_cycle() {
        let stream = SetTerm::Nu {
            ann: None,
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(Formula::In(Term::var("x"), SetTerm::var("X"))),
        };
        let t = Term::var("a");
        let gamma = vec![Formula::In(
            t.clone(),
            dual_set_term(&stream).expect("dualizes"),
        )];
        let mut pre = ProofBuilder::new();
        let mut seq = gamma.clone();
        seq.push(nu_unfold(&t, &stream).expect("unfolds"));
        let id = pre.leaf(Rule::Id, seq);
        let premise = pre.finish(id);
        let finite = derive_nu_intro(&gamma, &t, &stream, &premise).expect("derives");

        let cyclic = eliminate_induction(&finite).expect("compiles");
        assert_cyclic_and_progressing(&cyclic);
    }

    #[test]
    fn builder_reorder_rejects_non_permutations() {
        let mut b = ProofBuilder::new();
        let id = b.leaf(
            Rule::Id,
            vec![
                Formula::Neq(Term::Zero, Term::Zero),
                Formula::Eq(Term::Zero, Term::Zero),
            ],
        );
        let err = b
            .reorder(id, &[Formula::Eq(Term::Zero, Term::Zero)])
            .unwrap_err();
        assert!(matches!(err, TransformError::NotPermutation { .. }));
    }

    #[test]
    fn builder_weaken_embeds_into_larger_sequents_in_any_order() {
        let a = Formula::Eq(Term::Zero, Term::Zero);
        let b_f = Formula::Neq(Term::Zero, Term::Zero);
        let c = Formula::Lt(Term::Zero, Term::numeral(1));
        let mut b = ProofBuilder::new();
        let id = b.leaf(Rule::Id, vec![b_f.clone(), a.clone()]);
        let widened = b
            .weaken_to(id, &[c.clone(), a.clone(), b_f.clone()])
            .expect("weakens");
        assert_eq!(b.sequent(&widened), &[c, a, b_f]);
        // Every node produced along the way must check in the finite system.
        let proof = b.finish(widened);
        assert_finite(&proof);
    }

    #[test]
    fn identity_engine_output_is_checked_in_both_systems() {
        // A formula mixing every connective around the numeric fixed point.
        let phi = Formula::all(
            "p",
            Formula::or(
                Formula::NotIn(Term::var("p"), nat()),
                Formula::ex(
                    "q",
                    Formula::and(
                        Formula::In(Term::var("q"), nat()),
                        Formula::Eq(Term::var("p"), Term::var("q")),
                    ),
                ),
            ),
        );
        let proof = derive_identity(&phi).expect("derives");
        assert_cyclic_and_progressing(&proof);
        let verdict = check_local(&proof, System::Cyclic);
        assert!(verdict.ok);
    }
}
