//! Formula ancestry across inference steps.
//!
//! For every rule instance, each formula occurrence in a premise either
//! descends from an occurrence in the conclusion or is newly introduced
//! (a cut formula, the inequation discharged by an equality substitution).
//! A [`TraceEdge`] records one such descent: position `from` in the
//! conclusion is carried to position `to` in premise `premise`.
//!
//! Fixed-point unfoldings are the only steps that matter for progress
//! measures, so those edges carry an [`EdgeKind::Unfold`] tag with the
//! polarity and size of the set term being unfolded. Everything else is
//! [`EdgeKind::Carry`].
//!
//! Priorities: a `nu`-unfolding of a set term with `s` symbols has priority
//! `2*s`, a `mu`-unfolding has `2*s + 1`. Along an infinite trace the
//! fixed point that regenerates in its original (small) form controls the
//! trace: every other term unfolded infinitely often contains it as a
//! substituted subterm and is therefore strictly larger. Hence the trace is
//! a successful one exactly when the least priority occurring infinitely
//! often is even, and a tie between a `nu` and a `mu` of equal size resolves
//! in favour of the `nu`.

use crate::formula::Formula;
use crate::proof::{Node, Rule};

/// How a formula occurrence in the conclusion relates to its descendant in
/// a premise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// The formula is carried along (possibly rewritten by substitution,
    /// exchange, or decomposition of a connective).
    Carry,
    /// A fixed point is unfolded at this occurrence. `size` counts the
    /// symbols of the set term with any ordinal annotation ignored.
    Unfold { is_nu: bool, size: usize },
}

impl EdgeKind {
    /// The parity-coded priority of this step, if it is an unfolding.
    /// `nu` maps to `2*size`, `mu` to `2*size + 1`; carries have none.
    pub fn priority(&self) -> Option<u64> {
        match *self {
            EdgeKind::Carry => None,
            EdgeKind::Unfold { is_nu, size } => {
                Some(2 * size as u64 + if is_nu { 0 } else { 1 })
            }
        }
    }
}

/// One ancestry edge: conclusion position `from` descends to position `to`
/// in premise number `premise`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEdge {
    pub premise: usize,
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

fn carry(premise: usize, from: usize, to: usize) -> TraceEdge {
    TraceEdge {
        premise,
        from,
        to,
        kind: EdgeKind::Carry,
    }
}

/// The unfold tag for the principal formula of `node`, which must be a
/// membership in a fixed point. Falls back to a plain carry when the
/// sequent does not have the expected shape (the rule checker reports that
/// separately; ancestry stays total).
fn unfold_kind(node: &Node, expect_nu: bool) -> EdgeKind {
    match node.sequent.0.last() {
        Some(Formula::In(_, s)) => EdgeKind::Unfold {
            is_nu: expect_nu,
            size: s.size(),
        },
        _ => EdgeKind::Carry,
    }
}

/// All ancestry edges of one rule instance. `premise_nodes` must line up
/// with `node.premises`; only premise sequent lengths are consulted.
pub fn trace_edges(node: &Node, premise_nodes: &[&Node]) -> Vec<TraceEdge> {
    let n = node.sequent.len();
    let mut edges = Vec::new();
    // Context positions `0..ctx` map identically into premise `p`.
    let carry_context = |edges: &mut Vec<TraceEdge>, p: usize, ctx: usize| {
        for i in 0..ctx {
            edges.push(carry(p, i, i));
        }
    };
    match &node.rule {
        Rule::Id | Rule::EqRefl | Rule::Pa(_) | Rule::Nat => {}
        Rule::Weaken => {
            let m = premise_nodes.first().map_or(0, |q| q.sequent.len());
            carry_context(&mut edges, 0, m.min(n));
        }
        Rule::Exchange { at } => {
            for i in 0..n {
                let to = if i == *at {
                    at + 1
                } else if i == at + 1 {
                    *at
                } else {
                    i
                };
                edges.push(carry(0, i, to));
            }
        }
        Rule::Sub { .. } | Rule::Reset { .. } | Rule::Prune | Rule::Cw { .. } => {
            carry_context(&mut edges, 0, n);
        }
        Rule::Cut { .. } => {
            // The whole conclusion is context in both premises; the cut
            // formula at the end of each premise has no ancestor.
            carry_context(&mut edges, 0, n);
            carry_context(&mut edges, 1, n);
        }
        Rule::And => {
            if n > 0 {
                for p in 0..2 {
                    carry_context(&mut edges, p, n - 1);
                    edges.push(carry(p, n - 1, n - 1));
                }
            }
        }
        Rule::Or => {
            if n > 0 {
                carry_context(&mut edges, 0, n - 1);
                edges.push(carry(0, n - 1, n - 1));
                edges.push(carry(0, n - 1, n));
            }
        }
        Rule::All { .. } | Rule::Ex { .. } => {
            if n > 0 {
                carry_context(&mut edges, 0, n - 1);
                edges.push(carry(0, n - 1, n - 1));
            }
        }
        Rule::EqSub { .. } => {
            // The discharged inequation at position n-1 has no descendant;
            // the rewritten context carries across positionally.
            if n > 0 {
                carry_context(&mut edges, 0, n - 1);
            }
        }
        Rule::Mu => {
            if n > 0 {
                carry_context(&mut edges, 0, n - 1);
                edges.push(TraceEdge {
                    premise: 0,
                    from: n - 1,
                    to: n - 1,
                    kind: unfold_kind(node, false),
                });
            }
        }
        Rule::Nu { fresh } => {
            if n > 0 {
                carry_context(&mut edges, 0, n - 1);
                let kind = if fresh.is_some() {
                    // Attaching an annotation does not unfold the body.
                    EdgeKind::Carry
                } else {
                    unfold_kind(node, true)
                };
                edges.push(TraceEdge {
                    premise: 0,
                    from: n - 1,
                    to: n - 1,
                    kind,
                });
            }
        }
        Rule::NuAnn { .. } => {
            if n > 0 {
                carry_context(&mut edges, 0, n - 1);
                edges.push(TraceEdge {
                    premise: 0,
                    from: n - 1,
                    to: n - 1,
                    kind: unfold_kind(node, true),
                });
            }
        }
        Rule::Ind { .. } => {
            if n > 0 {
                // First premise replaces the principal formula by the
                // instantiated invariant; second premise splits it into the
                // negated invariant and the unfolded body.
                carry_context(&mut edges, 0, n - 1);
                edges.push(carry(0, n - 1, n - 1));
                carry_context(&mut edges, 1, n - 1);
                edges.push(carry(1, n - 1, n - 1));
                edges.push(carry(1, n - 1, n));
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proof::Sequent;
    use crate::sexpr::parse_formula;

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn node(rule: Rule, sequent: Vec<Formula>, premises: Vec<&str>) -> Node {
        Node {
            id: "n".to_string(),
            rule,
            sequent: Sequent(sequent),
            constraint: None,
            premises: premises.into_iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn exchange_maps_the_swapped_pair_crosswise() {
        let c = node(
            Rule::Exchange { at: 1 },
            vec![f("(= 0 0)"), f("(= (s 0) 0)"), f("(= 0 (s 0))"), f("(< 0 0)")],
            vec!["p"],
        );
        let p = node(
            Rule::Id,
            vec![f("(= 0 0)"), f("(= 0 (s 0))"), f("(= (s 0) 0)"), f("(< 0 0)")],
            vec![],
        );
        let edges = trace_edges(&c, &[&p]);
        let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.from, e.to)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 2), (2, 1), (3, 3)]);
        assert!(edges.iter().all(|e| e.kind == EdgeKind::Carry));
    }

    #[test]
    fn cut_carries_the_context_into_both_premises_and_births_the_cut_formula() {
        let c = node(
            Rule::Cut { phi: f("(= 0 0)") },
            vec![f("(< 0 (s 0))"), f("(= 0 0)")],
            vec!["a", "b"],
        );
        let pa = node(Rule::Id, vec![f("(< 0 (s 0))"), f("(= 0 0)"), f("(= 0 0)")], vec![]);
        let pb = node(Rule::Id, vec![f("(< 0 (s 0))"), f("(= 0 0)"), f("(!= 0 0)")], vec![]);
        let edges = trace_edges(&c, &[&pa, &pb]);
        for p in 0..2 {
            let into: Vec<(usize, usize)> = edges
                .iter()
                .filter(|e| e.premise == p)
                .map(|e| (e.from, e.to))
                .collect();
            assert_eq!(into, vec![(0, 0), (1, 1)]);
            // Nothing lands on the premise's final (cut) formula.
            assert!(edges.iter().filter(|e| e.premise == p).all(|e| e.to < 2));
        }
    }

    #[test]
    fn disjunction_fans_the_principal_formula_out_to_both_parts() {
        let c = node(
            Rule::Or,
            vec![f("(= 0 0)"), f("(or (< 0 0) (= 0 0))")],
            vec!["p"],
        );
        let p = node(Rule::Id, vec![f("(= 0 0)"), f("(< 0 0)"), f("(= 0 0)")], vec![]);
        let edges = trace_edges(&c, &[&p]);
        let from_principal: Vec<usize> = edges.iter().filter(|e| e.from == 1).map(|e| e.to).collect();
        assert_eq!(from_principal, vec![1, 2]);
    }

    #[test]
    fn equality_substitution_drops_the_inequation() {
        let c = node(
            Rule::EqSub {
                positions: vec![(0, vec![0])],
            },
            vec![f("(= (s 0) 0)"), f("(!= 0 (s 0))")],
            vec!["p"],
        );
        let p = node(Rule::Id, vec![f("(= 0 0)")], vec![]);
        let edges = trace_edges(&c, &[&p]);
        assert_eq!(edges.len(), 1);
        assert_eq!((edges[0].from, edges[0].to), (0, 0));
        assert!(edges.iter().all(|e| e.from != 1));
    }

    #[test]
    fn weakening_only_carries_the_surviving_prefix() {
        let c = node(
            Rule::Weaken,
            vec![f("(= 0 0)"), f("(< 0 0)"), f("(= 0 (s 0))")],
            vec!["p"],
        );
        let p = node(Rule::Id, vec![f("(= 0 0)")], vec![]);
        let edges = trace_edges(&c, &[&p]);
        assert_eq!(edges.len(), 1);
        assert_eq!((edges[0].from, edges[0].to), (0, 0));
    }

    #[test]
    fn unfold_priorities_order_nu_before_mu_and_small_before_large() {
        let small_mu = node(Rule::Mu, vec![f("(in 0 (mu X x (in x X)))")], vec!["p"]);
        let small_nu = node(Rule::Nu { fresh: None }, vec![f("(in 0 (nu X x (in x X)))")], vec!["p"]);
        let big_nu = node(
            Rule::Nu { fresh: None },
            vec![f("(in 0 (nu X x (or (= x 0) (in x X))))")],
            vec!["p"],
        );
        let p = node(Rule::Id, vec![f("(= 0 0)")], vec![]);
        let prio = |n: &Node| trace_edges(n, &[&p]).last().unwrap().kind.priority().unwrap();
        let (pm, pn, pb) = (prio(&small_mu), prio(&small_nu), prio(&big_nu));
        assert_eq!(pm % 2, 1, "mu unfoldings are odd");
        assert_eq!(pn % 2, 0, "nu unfoldings are even");
        // Equal bodies: the nu step dominates (is smaller than) the mu step.
        assert_eq!(pm, pn + 1);
        assert!(pb > pn, "larger set terms get larger priorities");
    }

    #[test]
    fn annotations_do_not_change_unfold_priorities() {
        let bare = node(Rule::Nu { fresh: None }, vec![f("(in 0 (nu X x (in x X)))")], vec!["p"]);
        let ann = node(
            Rule::NuAnn {
                fresh: "k1".to_string(),
            },
            vec![f("(in 0 (nu^ k0 X x (in x X)))")],
            vec!["p"],
        );
        let p = node(Rule::Id, vec![f("(= 0 0)")], vec![]);
        let pr = |n: &Node| trace_edges(n, &[&p]).last().unwrap().kind.priority().unwrap();
        assert_eq!(pr(&bare), pr(&ann));
    }

    #[test]
    fn annotating_a_fixed_point_is_not_an_unfolding() {
        let c = node(
            Rule::Nu {
                fresh: Some("k0".to_string()),
            },
            vec![f("(in 0 (nu X x (in x X)))")],
            vec!["p"],
        );
        let p = node(Rule::Id, vec![f("(= 0 0)")], vec![]);
        let edges = trace_edges(&c, &[&p]);
        assert_eq!(edges.last().unwrap().kind, EdgeKind::Carry);
    }
}
