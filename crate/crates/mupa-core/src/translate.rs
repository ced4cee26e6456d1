//! Translation of progressing cyclic proofs into annotated proofs.
//!
//! The translator walks the cyclic proof through *extended states*: a source
//! node together with an ordinal-variable constraint and an assignment
//! vector giving every `nu` binder of every sequent formula its annotation
//! (or none). Greatest-fixed-point unfoldings annotate their head with fresh
//! variables, every other rule transports the assignments structurally, and
//! on entry to each state the constraint is normalized by exhaustive
//! pruning and resetting. Normal states are memoized literally — source
//! node, printed constraint, printed assignments — so revisits tie back
//! edges, turning the progress of the input proof into the reset discipline
//! of the output.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::formula::{
    annotate, negate, nu_count, ord_vars_formula, push_assignment_mu, push_assignment_nu, strip,
    Formula, OrdEntry, SetTerm,
};
use crate::proof::{Constraint, Node, Proof, Rule, Sequent};
use crate::rules::check_cyclic_local;
use crate::transform::derive_membership_identity;
use crate::validity::{check_progressing, ProgressOutcome, ValidityError};

/// Default bound on distinct translation states (see [`TranslateError::CapExceeded`]).
pub const DEFAULT_STATE_CAP: usize = 10_000;

/// Stack reserved for the translation walk: state recursion is as deep as
/// the number of states, which the cap bounds.
const TRANSLATE_STACK: usize = 256 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum TranslateError {
    #[error("input proof fails the cyclic checks: {0}")]
    InvalidInput(String),
    #[error("input proof does not progress; counterexample branch: {0}")]
    NotProgressing(String),
    #[error("validity check failed: {0}")]
    Validity(#[from] ValidityError),
    #[error("node {0} already carries ordinal annotations; translation takes bare proofs")]
    AnnotatedInput(String),
    #[error("identity node {node} carries a non-empty ordinal assignment on its dual pair")]
    AnnotatedAxiom { node: String },
    #[error("translation exceeded {cap} distinct states; treating the input as non-regular")]
    CapExceeded { cap: usize },
}

/// Result of a successful translation.
#[derive(Debug)]
pub struct Translation {
    /// The annotated proof. Root sequent equals the input root sequent.
    pub proof: Proof,
    /// The cyclic proof the walk actually followed: the input with every
    /// fixed-point membership identity expanded into its unfolding cycle.
    /// `origin` refers to its nodes.
    pub source: Proof,
    /// For every output node, the source node it was produced from.
    pub origin: BTreeMap<String, String>,
    /// Output nodes that are memoized normal states (pruning and resetting
    /// exhausted). Their sequents strip back to their origin's sequent.
    pub normal_states: Vec<String>,
}

/// Translate a progressing cyclic proof into an annotated proof, bounding
/// the number of distinct extended states by `cap`.
pub fn translate_to_annotated(proof: &Proof, cap: usize) -> Result<Translation, TranslateError> {
    for node in proof.nodes.values() {
        if node
            .sequent
            .0
            .iter()
            .any(|f| !ord_vars_formula(f).is_empty())
        {
            return Err(TranslateError::AnnotatedInput(node.id.clone()));
        }
    }
    let verdict = check_cyclic_local(proof);
    if !verdict.ok {
        let why = verdict
            .diagnostics
            .first()
            .map(|d| format!("{} ({}): {}", d.node, d.rule, d.reason))
            .unwrap_or_else(|| "unknown defect".into());
        return Err(TranslateError::InvalidInput(why));
    }
    // No axiom may close an annotated formula, so identities over
    // fixed-point memberships are first expanded into unfolding cycles.
    let source = expand_membership_ids(proof);
    debug_assert!(check_cyclic_local(&source).ok);
    match check_progressing(&source)? {
        ProgressOutcome::Progressing => {}
        ProgressOutcome::NotProgressing(lasso) => {
            return Err(TranslateError::NotProgressing(lasso.to_string()));
        }
    }
    // The state walk recurses once per state; give it room.
    let (proof_out, origin, normal_states) = std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(TRANSLATE_STACK)
            .spawn_scoped(s, || run(&source, cap))
            .expect("translation thread spawns")
            .join()
            .expect("translation does not panic")
    })?;
    Ok(Translation {
        proof: proof_out,
        source,
        origin,
        normal_states,
    })
}

/// Replace every identity leaf whose dual pair is a fixed-point membership
/// by the membership's unfolding identity derivation, weakened and
/// exchanged back under the leaf's context. Each round expands into
/// memberships of strictly smaller set terms, so iteration terminates.
fn expand_membership_ids(proof: &Proof) -> Proof {
    let mut nodes = proof.nodes.clone();
    let mut next = 0usize;
    loop {
        let targets: Vec<String> = nodes
            .values()
            .filter(|nd| is_expandable_id(nd))
            .map(|nd| nd.id.clone())
            .collect();
        if targets.is_empty() {
            break;
        }
        for old_id in targets {
            splice_expansion(&mut nodes, &mut next, &old_id);
        }
    }
    Proof {
        root: proof.root.clone(),
        nodes,
    }
}

fn is_expandable_id(nd: &Node) -> bool {
    if !matches!(nd.rule, Rule::Id) {
        return false;
    }
    let s = &nd.sequent.0;
    let n = s.len();
    matches!(
        &s[n - 1],
        Formula::In(_, SetTerm::Mu { .. } | SetTerm::Nu { ann: None, .. })
    ) && s[n - 2] == negate(&s[n - 1])
}

fn alloc_id(nodes: &BTreeMap<String, Node>, next: &mut usize) -> String {
    loop {
        let cand = format!("x{}", *next);
        *next += 1;
        if !nodes.contains_key(&cand) {
            return cand;
        }
    }
}

fn splice_expansion(nodes: &mut BTreeMap<String, Node>, next: &mut usize, old_id: &str) {
    let s = nodes[old_id].sequent.0.clone();
    let n = s.len();
    let phi = s[n - 1].clone();
    let sub = derive_membership_identity(&phi)
        .expect("checked dual fixed-point memberships always expand");
    debug_assert_eq!(
        sub.nodes[&sub.root].sequent.0,
        vec![s[n - 2].clone(), phi.clone()]
    );
    let mut remap: BTreeMap<String, String> = BTreeMap::new();
    for id in sub.nodes.keys() {
        remap.insert(id.clone(), alloc_id(nodes, next));
    }
    for nd in sub.nodes.values() {
        let id = remap[&nd.id].clone();
        nodes.insert(
            id.clone(),
            Node {
                id,
                rule: nd.rule.clone(),
                sequent: nd.sequent.clone(),
                constraint: None,
                premises: nd.premises.iter().map(|p| remap[p].clone()).collect(),
            },
        );
    }
    let exp_root = remap[&sub.root].clone();
    if n == 2 {
        // The expansion concludes the axiom's sequent exactly: move its
        // root onto the axiom's id so parents and back edges stay valid.
        for id in remap.values() {
            let nd = nodes.get_mut(id).expect("imported above");
            for p in &mut nd.premises {
                if *p == exp_root {
                    *p = old_id.to_string();
                }
            }
        }
        let mut root_node = nodes.remove(&exp_root).expect("imported above");
        root_node.id = old_id.to_string();
        nodes.insert(old_id.to_string(), root_node);
        return;
    }
    // Rebuild the context: weaken the bare pair, then exchange it into
    // place, landing the last step on the axiom's id.
    let mut widened = vec![s[n - 2].clone(), phi];
    widened.extend_from_slice(&s[..n - 2]);
    let script = swap_script(&widened, &s);
    let mut steps: Vec<(Rule, Vec<Formula>)> = vec![(Rule::Weaken, widened.clone())];
    let mut current = widened;
    for at in script {
        current.swap(at, at + 1);
        steps.push((Rule::Exchange { at }, current.clone()));
    }
    debug_assert_eq!(steps.last().expect("nonempty").1, s);
    let last = steps.len() - 1;
    let mut below = exp_root;
    for (i, (rule, seq)) in steps.into_iter().enumerate() {
        let id = if i == last {
            old_id.to_string()
        } else {
            alloc_id(nodes, next)
        };
        nodes.insert(
            id.clone(),
            Node {
                id: id.clone(),
                rule,
                sequent: Sequent(seq),
                constraint: None,
                premises: vec![below],
            },
        );
        below = id;
    }
}

/// What `run` hands back to the public entry point: the annotated proof,
/// the origin map, and the normal-state list.
type RawTranslation = (Proof, BTreeMap<String, String>, Vec<String>);

fn run(proof: &Proof, cap: usize) -> Result<RawTranslation, TranslateError> {
    let mut tr = Translator {
        src: proof,
        cap,
        nodes: BTreeMap::new(),
        next: 0,
        origin: BTreeMap::new(),
        normal_states: Vec::new(),
        memo: HashMap::new(),
    };
    let root_ell: Vec<Vec<OrdEntry>> = proof
        .node(&proof.root)
        .sequent
        .0
        .iter()
        .map(|f| vec![None; nu_count(f)])
        .collect();
    let root = tr.state(&proof.root, Constraint::new(), root_ell)?;
    Ok((
        Proof {
            root,
            nodes: tr.nodes,
        },
        tr.origin,
        tr.normal_states,
    ))
}

/// Least-index ordinal variable name not governed by the constraint.
fn fresh_ord(c: &Constraint) -> String {
    (0..)
        .map(|i| format!("k{i}"))
        .find(|name| !c.contains(name))
        .expect("an unused index exists")
}

/// Deterministic ordering for reset candidates: generated names by index,
/// then anything else by name.
fn reset_key(name: &str) -> (u8, u64, String) {
    if let Some(rest) = name.strip_prefix('k') {
        if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(i) = rest.parse::<u64>() {
                return (0, i, String::new());
            }
        }
    }
    (1, 0, name.to_string())
}

fn constraint_key(c: &Constraint) -> String {
    c.vars()
        .iter()
        .map(|v| match c.parent_of(v) {
            Some(p) => format!("{v}<{p}"),
            None => v.clone(),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn assignment_key(ell: &[Vec<OrdEntry>]) -> String {
    ell.iter()
        .map(|entry| {
            let slots = entry
                .iter()
                .map(|slot| slot.as_deref().unwrap_or("*"))
                .collect::<Vec<_>>()
                .join(" ");
            format!("[{slots}]")
        })
        .collect::<String>()
}

fn eps(n: usize) -> Vec<OrdEntry> {
    vec![None; n]
}

struct Translator<'a> {
    src: &'a Proof,
    cap: usize,
    nodes: BTreeMap<String, Node>,
    next: usize,
    origin: BTreeMap<String, String>,
    normal_states: Vec<String>,
    /// (source node, printed constraint, printed assignment) -> output node.
    memo: HashMap<String, String>,
}

impl<'a> Translator<'a> {
    fn reserve(&mut self) -> String {
        let id = format!("a{}", self.next);
        self.next += 1;
        id
    }

    fn fill(
        &mut self,
        id: &str,
        rule: Rule,
        sequent: Vec<Formula>,
        c: &Constraint,
        premises: Vec<String>,
        origin: &str,
    ) {
        debug_assert!(
            sequent
                .iter()
                .flat_map(ord_vars_formula)
                .all(|v| c.contains(&v)),
            "sequent ordinal variables escape the constraint at {id}"
        );
        let node = Node {
            id: id.to_string(),
            rule,
            sequent: Sequent(sequent),
            constraint: Some(c.clone()),
            premises,
        };
        let prev = self.nodes.insert(id.to_string(), node);
        debug_assert!(prev.is_none(), "output node {id} filled twice");
        self.origin.insert(id.to_string(), origin.to_string());
    }

    fn emit(
        &mut self,
        rule: Rule,
        sequent: Vec<Formula>,
        c: &Constraint,
        premises: Vec<String>,
        origin: &str,
    ) -> String {
        let id = self.reserve();
        self.fill(&id, rule, sequent, c, premises, origin);
        id
    }

    fn annotated_seq(&self, u: &str, ell: &[Vec<OrdEntry>]) -> Vec<Formula> {
        self.src
            .node(u)
            .sequent
            .0
            .iter()
            .zip(ell)
            .map(|(f, entry)| annotate(f, entry).expect("assignment length tracks the formula"))
            .collect()
    }

    /// Translate the extended state `(u, c, ell)`: normalize by pruning and
    /// resetting, then memoize and dispatch on the source rule. Returns the
    /// output node whose sequent is the annotated sequent of the state.
    fn state(
        &mut self,
        u: &str,
        c: Constraint,
        ell: Vec<Vec<OrdEntry>>,
    ) -> Result<String, TranslateError> {
        debug_assert_eq!(self.src.node(u).sequent.0.len(), ell.len());
        let seq_ann = self.annotated_seq(u, &ell);
        let used: BTreeSet<String> = seq_ann.iter().flat_map(ord_vars_formula).collect();

        // Normalization: prune dead variables, then reset the least
        // applicable variable, until neither applies. Each step strictly
        // shrinks the constraint.
        let mut chain: Vec<(Rule, Constraint)> = Vec::new();
        let mut c = c;
        loop {
            let prunable = c.prune_set(&used);
            if !prunable.is_empty() {
                chain.push((Rule::Prune, c.clone()));
                c = c.remove(&prunable);
                continue;
            }
            let candidate = c
                .vars()
                .iter()
                .filter(|k| {
                    if used.contains(*k) {
                        return false;
                    }
                    let children = c.children_of(k);
                    !children.is_empty() && children.is_disjoint(&used)
                })
                .min_by_key(|k| reset_key(k))
                .cloned();
            match candidate {
                Some(kappa) => {
                    let children = c.children_of(&kappa);
                    chain.push((Rule::Reset { kappa }, c.clone()));
                    c = c.remove(&children);
                }
                None => break,
            }
        }

        let key = format!("{u}|{}|{}", constraint_key(&c), assignment_key(&ell));
        let normal = match self.memo.get(&key) {
            Some(id) => id.clone(),
            None => {
                if self.memo.len() >= self.cap {
                    return Err(TranslateError::CapExceeded { cap: self.cap });
                }
                let id = self.reserve();
                self.memo.insert(key, id.clone());
                self.normal_states.push(id.clone());
                self.dispatch(u, &c, &ell, &id)?;
                id
            }
        };

        // Emit the normalization chain above the normal node, bottom-up.
        let mut below = normal;
        for (rule, conclusion_c) in chain.into_iter().rev() {
            below = self.emit(rule, seq_ann.clone(), &conclusion_c, vec![below], u);
        }
        Ok(below)
    }

    /// Emit the rule instance for a normal state into the reserved `slot`.
    fn dispatch(
        &mut self,
        u: &str,
        c: &Constraint,
        ell: &[Vec<OrdEntry>],
        slot: &str,
    ) -> Result<(), TranslateError> {
        let node = self.src.node(u);
        let seq = &node.sequent.0;
        let seq_ann = self.annotated_seq(u, ell);
        let n = seq.len();
        match &node.rule {
            Rule::Id => {
                // The annotated axiom is the bare dual pair; context and
                // pair order are restored by one weakening and exchanges.
                if ell[n - 2].iter().any(Option::is_some)
                    || ell[n - 1].iter().any(Option::is_some)
                {
                    return Err(TranslateError::AnnotatedAxiom {
                        node: u.to_string(),
                    });
                }
                let pair = vec![seq[n - 2].clone(), seq[n - 1].clone()];
                if n == 2 {
                    self.fill(slot, Rule::Id, pair, c, Vec::new(), u);
                    return Ok(());
                }
                let leaf = self.emit(Rule::Id, pair.clone(), c, Vec::new(), u);
                let mut widened = pair;
                widened.extend_from_slice(&seq_ann[..n - 2]);
                let script = swap_script(&widened, &seq_ann);
                if script.is_empty() {
                    // The context happens to coincide with the pair order;
                    // a full-prefix weakening concludes directly.
                    self.fill(slot, Rule::Weaken, widened, c, vec![leaf], u);
                    return Ok(());
                }
                let w = self.emit(Rule::Weaken, widened.clone(), c, vec![leaf], u);
                self.exchanges(widened, script, w, c, u, slot);
            }
            Rule::EqRefl | Rule::Pa(_) | Rule::Nat => {
                debug_assert!(ell.iter().all(|e| e.is_empty()));
                self.fill(slot, node.rule.clone(), seq_ann, c, Vec::new(), u);
            }
            Rule::Weaken => {
                let k = self.src.node(&node.premises[0]).sequent.0.len();
                let child = self.state(&node.premises[0], c.clone(), ell[..k].to_vec())?;
                self.fill(slot, Rule::Weaken, seq_ann, c, vec![child], u);
            }
            Rule::Exchange { at } => {
                let mut next = ell.to_vec();
                next.swap(*at, *at + 1);
                let child = self.state(&node.premises[0], c.clone(), next)?;
                self.fill(slot, node.rule.clone(), seq_ann, c, vec![child], u);
            }
            Rule::Sub { .. } => {
                let child = self.state(&node.premises[0], c.clone(), ell.to_vec())?;
                self.fill(slot, node.rule.clone(), seq_ann, c, vec![child], u);
            }
            Rule::Cut { phi } => {
                let mut left = ell.to_vec();
                left.push(eps(nu_count(phi)));
                let mut right = ell.to_vec();
                right.push(eps(nu_count(&negate(phi))));
                let l = self.state(&node.premises[0], c.clone(), left)?;
                let r = self.state(&node.premises[1], c.clone(), right)?;
                self.fill(slot, node.rule.clone(), seq_ann, c, vec![l, r], u);
            }
            Rule::And => {
                let Formula::And(a, _) = &seq[n - 1] else {
                    unreachable!("validated conjunction");
                };
                let ca = nu_count(a);
                let entry = &ell[n - 1];
                let mut left = ell[..n - 1].to_vec();
                left.push(entry[..ca].to_vec());
                let mut right = ell[..n - 1].to_vec();
                right.push(entry[ca..].to_vec());
                let l = self.state(&node.premises[0], c.clone(), left)?;
                let r = self.state(&node.premises[1], c.clone(), right)?;
                self.fill(slot, Rule::And, seq_ann, c, vec![l, r], u);
            }
            Rule::Or => {
                let Formula::Or(a, _) = &seq[n - 1] else {
                    unreachable!("validated disjunction");
                };
                let ca = nu_count(a);
                let entry = &ell[n - 1];
                let mut next = ell[..n - 1].to_vec();
                next.push(entry[..ca].to_vec());
                next.push(entry[ca..].to_vec());
                let child = self.state(&node.premises[0], c.clone(), next)?;
                self.fill(slot, Rule::Or, seq_ann, c, vec![child], u);
            }
            Rule::All { .. } | Rule::Ex { .. } => {
                let child = self.state(&node.premises[0], c.clone(), ell.to_vec())?;
                self.fill(slot, node.rule.clone(), seq_ann, c, vec![child], u);
            }
            Rule::EqSub { .. } => {
                let child = self.state(&node.premises[0], c.clone(), ell[..n - 1].to_vec())?;
                self.fill(slot, node.rule.clone(), seq_ann, c, vec![child], u);
            }
            Rule::Mu => {
                let Formula::In(t, SetTerm::Mu {
                    set_var,
                    num_var,
                    body,
                }) = &seq[n - 1]
                else {
                    unreachable!("validated least-fixed-point membership");
                };
                let pushed = push_assignment_mu(body, num_var, set_var, t, &ell[n - 1])
                    .expect("assignment length tracks the formula");
                let mut next = ell[..n - 1].to_vec();
                next.push(pushed);
                let child = self.state(&node.premises[0], c.clone(), next)?;
                self.fill(slot, Rule::Mu, seq_ann, c, vec![child], u);
            }
            Rule::Nu { fresh: None } => {
                let Formula::In(t, SetTerm::Nu {
                    ann: None,
                    set_var,
                    num_var,
                    body,
                }) = &seq[n - 1]
                else {
                    unreachable!("validated greatest-fixed-point membership");
                };
                let entry = &ell[n - 1];
                match entry[0].clone() {
                    None => {
                        // Bare head: annotate with a fresh root, then unfold
                        // under a fresh child of it.
                        let lambda = fresh_ord(c);
                        let c1 = c.add_root(&lambda).expect("fresh by construction");
                        let lambda2 = fresh_ord(&c1);
                        let c2 = c1
                            .add_child(&lambda, &lambda2)
                            .expect("fresh by construction");
                        let pushed =
                            push_assignment_nu(body, num_var, set_var, t, &entry[1..], &lambda2)
                                .expect("assignment length tracks the formula");
                        let mut next = ell[..n - 1].to_vec();
                        next.push(pushed);
                        let child = self.state(&node.premises[0], c2, next)?;

                        let mut mid_entry = entry.clone();
                        mid_entry[0] = Some(lambda.clone());
                        let mut mid_ell = ell[..n - 1].to_vec();
                        mid_ell.push(mid_entry);
                        let mid_seq = self.annotated_seq(u, &mid_ell);
                        let mid = self.emit(
                            Rule::NuAnn { fresh: lambda2 },
                            mid_seq,
                            &c1,
                            vec![child],
                            u,
                        );
                        self.fill(
                            slot,
                            Rule::Nu {
                                fresh: Some(lambda),
                            },
                            seq_ann,
                            c,
                            vec![mid],
                            u,
                        );
                    }
                    Some(_) => {
                        // Annotated head: a single unfolding step under a
                        // fresh child of the head variable.
                        let kappa = entry[0].clone().expect("checked annotated");
                        let lambda2 = fresh_ord(c);
                        let c2 = c
                            .add_child(&kappa, &lambda2)
                            .expect("head annotation is governed by the constraint");
                        let pushed =
                            push_assignment_nu(body, num_var, set_var, t, &entry[1..], &lambda2)
                                .expect("assignment length tracks the formula");
                        let mut next = ell[..n - 1].to_vec();
                        next.push(pushed);
                        let child = self.state(&node.premises[0], c2, next)?;
                        self.fill(
                            slot,
                            Rule::NuAnn { fresh: lambda2 },
                            seq_ann,
                            c,
                            vec![child],
                            u,
                        );
                    }
                }
            }
            other => unreachable!("rule {} cannot appear in a checked cyclic proof", other.name()),
        }
        Ok(())
    }

    /// Adjacent-swap positions turning `from` into `target` (both are the
    /// same multiset). Selection order: fix positions left to right.
    /// Then emit the exchange chain, landing the last node in `slot`.
    fn exchanges(
        &mut self,
        mut current: Vec<Formula>,
        script: Vec<usize>,
        from: String,
        c: &Constraint,
        origin: &str,
        slot: &str,
    ) {
        let mut node = from;
        let last = script.len() - 1;
        for (i, at) in script.into_iter().enumerate() {
            current.swap(at, at + 1);
            if i == last {
                self.fill(
                    slot,
                    Rule::Exchange { at },
                    current.clone(),
                    c,
                    vec![node.clone()],
                    origin,
                );
                node = slot.to_string();
            } else {
                node = self.emit(
                    Rule::Exchange { at },
                    current.clone(),
                    c,
                    vec![node],
                    origin,
                );
            }
        }
    }
}

/// The adjacent-swap script `exchanges` will execute.
fn swap_script(from: &[Formula], target: &[Formula]) -> Vec<usize> {
    debug_assert_eq!(from.len(), target.len());
    let mut current = from.to_vec();
    let mut script = Vec::new();
    for k in 0..target.len() {
        if current[k] == target[k] {
            continue;
        }
        let j = (k + 1..current.len())
            .find(|&j| current[j] == target[k])
            .expect("target is a permutation of the source");
        for at in (k..j).rev() {
            current.swap(at, at + 1);
            script.push(at);
        }
    }
    debug_assert_eq!(current, target);
    script
}

/// Check that the translation's sequents strip back to their origins at
/// every normal state. Used by tests and the command-line report.
pub fn strip_agrees(tr: &Translation) -> bool {
    tr.normal_states.iter().all(|id| {
        let ann = &tr.proof.node(id).sequent.0;
        let orig = &tr.source.node(&tr.origin[id]).sequent.0;
        ann.len() == orig.len()
            && ann
                .iter()
                .zip(orig.iter())
                .all(|(a, o)| strip(a) == *o)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{dual_set_term, nu_unfold, Term};
    use crate::proof::{Node, Sequent};
    use crate::rules::{check_annotated_local, check_cyclic_local};
    use crate::transform::{
        derive_coinduction_nu, derive_numeric_induction, eliminate_induction, derive_nu_intro,
        ProofBuilder,
    };
    use crate::validity::{check_reset_condition, ResetOutcome};

    fn stream() -> SetTerm {
        SetTerm::Nu {
            ann: None,
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(Formula::In(
                Term::Succ(Box::new(Term::var("x"))),
                SetTerm::var("X"),
            )),
        }
    }

    fn self_loop() -> SetTerm {
        SetTerm::Nu {
            ann: None,
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(Formula::In(Term::var("x"), SetTerm::var("X"))),
        }
    }

    fn translated_is_sound(src: &Proof, tr: &Translation) {
        let verdict = check_annotated_local(&tr.proof);
        assert!(
            verdict.ok,
            "annotated check failed: {:?}",
            verdict.diagnostics.first()
        );
        assert_eq!(
            check_reset_condition(&tr.proof).expect("reset check runs"),
            ResetOutcome::Satisfied
        );
        assert!(strip_agrees(tr), "normal states do not strip back");
        // Root sequent is preserved verbatim.
        assert_eq!(
            tr.proof.node(&tr.proof.root).sequent.0,
            src.node(&src.root).sequent.0
        );
        // The walked source is itself a valid progressing cyclic proof.
        assert!(check_cyclic_local(&tr.source).ok);
        // Every output edge projects to its origin node or a source edge.
        for node in tr.proof.nodes.values() {
            let from = &tr.origin[&node.id];
            for p in &node.premises {
                let to = &tr.origin[p];
                assert!(
                    from == to || tr.source.node(from).premises.contains(to),
                    "edge {} -> {} does not project onto the source",
                    node.id,
                    p
                );
            }
        }
        // Constraint size at normal states is bounded by twice the number
        // of nu binders in the sequent.
        for id in &tr.normal_states {
            let node = tr.proof.node(id);
            let bound = 2 * node
                .sequent
                .0
                .iter()
                .map(|f| nu_count(&strip(f)))
                .sum::<usize>();
            let have = node
                .constraint
                .as_ref()
                .expect("annotated nodes carry constraints")
                .vars()
                .len();
            assert!(
                have <= bound,
                "normal state {id} holds {have} variables, bound {bound}"
            );
        }
    }

    /// The one-node proof `x in nuX x (x in X)` unfolding into itself.
    fn self_loop_proof() -> Proof {
        let seq = vec![Formula::In(Term::var("x"), self_loop())];
        let node = Node {
            id: "r".into(),
            rule: Rule::Nu { fresh: None },
            sequent: Sequent(seq),
            constraint: None,
            premises: vec!["r".into()],
        };
        Proof {
            root: "r".into(),
            nodes: [("r".to_string(), node)].into_iter().collect(),
        }
    }

    #[test]
    fn self_unfolding_stream_translates_with_resets() {
        let proof = self_loop_proof();
        assert!(check_cyclic_local(&proof).ok);
        let tr = translate_to_annotated(&proof, DEFAULT_STATE_CAP).expect("translates");
        translated_is_sound(&proof, &tr);
        // Deterministic walk: bare head, annotated head, and the post-reset
        // renamed head — then the states repeat.
        assert_eq!(tr.normal_states.len(), 3);
    }

    #[test]
    fn compiled_coinduction_translates() {
        let psi = Formula::NLess(Term::var("k"), Term::Zero);
        let finite = derive_coinduction_nu(&stream(), "k", &psi).expect("derives");
        let cyclic = eliminate_induction(&finite).expect("compiles");
        let tr = translate_to_annotated(&cyclic, DEFAULT_STATE_CAP).expect("translates");
        translated_is_sound(&cyclic, &tr);
    }

    #[test]
    fn compiled_numeric_induction_translates() {
        let phi = Formula::Eq(
            Term::Plus(Box::new(Term::var("x")), Box::new(Term::Zero)),
            Term::var("x"),
        );
        let finite = derive_numeric_induction("x", &phi).expect("derives");
        let cyclic = eliminate_induction(&finite).expect("compiles");
        let tr = translate_to_annotated(&cyclic, DEFAULT_STATE_CAP).expect("translates");
        translated_is_sound(&cyclic, &tr);
    }

    #[test]
    fn compiled_nu_introduction_translates() {
        let n = self_loop();
        let t = Term::var("a");
        let gamma = vec![Formula::In(
            t.clone(),
            dual_set_term(&n).expect("dualizes"),
        )];
        let mut pre = ProofBuilder::new();
        let mut seq = gamma.clone();
        seq.push(nu_unfold(&t, &n).expect("unfolds"));
        let id = pre.leaf(Rule::Id, seq);
        let premise = pre.finish(id);
        let finite = derive_nu_intro(&gamma, &t, &n, &premise).expect("derives");
        let cyclic = eliminate_induction(&finite).expect("compiles");
        let tr = translate_to_annotated(&cyclic, DEFAULT_STATE_CAP).expect("translates");
        translated_is_sound(&cyclic, &tr);
    }

    #[test]
    fn non_progressing_input_is_rejected_with_a_branch() {
        // x in muX x (x in X) unfolding into itself: never progresses.
        let mu = SetTerm::Mu {
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(Formula::In(Term::var("x"), SetTerm::var("X"))),
        };
        let seq = vec![Formula::In(Term::var("x"), mu)];
        let node = Node {
            id: "r".into(),
            rule: Rule::Mu,
            sequent: Sequent(seq),
            constraint: None,
            premises: vec!["r".into()],
        };
        let proof = Proof {
            root: "r".into(),
            nodes: [("r".to_string(), node)].into_iter().collect(),
        };
        assert!(check_cyclic_local(&proof).ok);
        let err = translate_to_annotated(&proof, DEFAULT_STATE_CAP).unwrap_err();
        assert!(matches!(err, TranslateError::NotProgressing(_)));
    }

    #[test]
    fn the_state_cap_stops_the_walk() {
        let proof = self_loop_proof();
        let err = translate_to_annotated(&proof, 1).unwrap_err();
        assert!(matches!(err, TranslateError::CapExceeded { cap: 1 }));
    }

    #[test]
    fn annotated_inputs_are_rejected() {
        let mut annotated_stream = self_loop();
        if let SetTerm::Nu { ann, .. } = &mut annotated_stream {
            *ann = Some("k0".into());
        }
        let pair_mu = SetTerm::Mu {
            set_var: "X".into(),
            num_var: "x".into(),
            body: Box::new(Formula::Eq(Term::var("x"), Term::Zero)),
        };
        let phi = Formula::In(Term::Zero, pair_mu);
        let mut b = ProofBuilder::new();
        let id = b.leaf(Rule::Id, vec![negate(&phi), phi.clone()]);
        let top = b.infer(
            Rule::Weaken,
            vec![
                negate(&phi),
                phi,
                Formula::In(Term::Zero, annotated_stream),
            ],
            vec![id],
        );
        let proof = b.finish(top);
        let err = translate_to_annotated(&proof, DEFAULT_STATE_CAP).unwrap_err();
        assert!(matches!(err, TranslateError::AnnotatedInput(_)));
    }

    #[test]
    fn identity_context_is_rebuilt_around_the_bare_pair() {
        // An identity whose context formula passes through one unfolding
        // above it, so the context carries an annotation by the time the
        // translation reaches the axiom.
        let phi = Formula::Eq(Term::var("x"), Term::Zero);
        let member = Formula::In(Term::var("x"), self_loop());
        let mut b = ProofBuilder::new();
        let id = b.leaf(
            Rule::Id,
            vec![member.clone(), negate(&phi), phi.clone()],
        );
        let e0 = b.infer(
            Rule::Exchange { at: 0 },
            vec![negate(&phi), member.clone(), phi.clone()],
            vec![id],
        );
        let e1 = b.infer(
            Rule::Exchange { at: 1 },
            vec![negate(&phi), phi.clone(), member.clone()],
            vec![e0],
        );
        // The self-loop body makes the unfolding the membership itself.
        let top = b.infer(
            Rule::Nu { fresh: None },
            vec![negate(&phi), phi, member],
            vec![e1],
        );
        let proof = b.finish(top);
        assert!(check_cyclic_local(&proof).ok);
        let tr = translate_to_annotated(&proof, DEFAULT_STATE_CAP).expect("translates");
        translated_is_sound(&proof, &tr);
        // The identity expands into axiom, weakening, and exchanges.
        assert!(tr.proof.nodes.len() > proof.nodes.len());
    }
}
