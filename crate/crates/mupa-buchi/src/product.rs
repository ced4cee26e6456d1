//! On-the-fly emptiness of `A × complement(B)` with lasso extraction.
//!
//! Instead of materializing the complement and the product, the product
//! graph is explored lazily with the classic nested depth-first search: a
//! blue search visits nodes in postorder, and from every accepting node (at
//! its postorder point) a red search looks for a node on the blue path,
//! which closes an accepting cycle. Red marks persist across red searches,
//! keeping the whole procedure linear in the explored part, and the search
//! stops at the first accepting cycle — failing inclusions usually return
//! after exploring a small fraction of the complement.
//!
//! Product nodes carry the standard two-phase intersection counter: phase 0
//! until the input automaton accepts, phase 1 until the complement accepts
//! (matching `Nba::intersect`); a node is fair iff it is in phase 1 at a
//! complement-accepting state.

use crate::complement::{Explorer, Packed};
use crate::nba::{Lasso, Letter, Nba, State};
use crate::{BuchiError, Inclusion};
use std::collections::HashMap;

type Node = (State, Packed, u8);

const WHITE: u8 = 0;
/// On the blue path.
const CYAN: u8 = 1;
/// Finished by the blue search.
const BLUE: u8 = 2;
/// Visited by some red search (no accepting cycle through it).
const RED: u8 = 3;

struct Frame {
    node: Node,
    /// Letter on the edge into this node from the previous frame.
    in_letter: Option<Letter>,
    succs: Vec<(Letter, Node)>,
    idx: usize,
}

fn is_fair(node: &Node) -> bool {
    node.2 == 1 && Explorer::is_accepting(node.1)
}

fn product_succs(
    a: &Nba,
    ex: &mut Explorer,
    node: Node,
) -> Result<Vec<(Letter, Node)>, BuchiError> {
    let (qa, c, phase) = node;
    let next_phase = if phase == 0 {
        if a.is_accepting(qa) {
            1
        } else {
            0
        }
    } else if Explorer::is_accepting(c) {
        0
    } else {
        1
    };
    let mut out = Vec::new();
    for &(letter, ta) in a.transitions_from(qa) {
        for &c2 in ex.successors(c, letter)?.iter() {
            out.push((letter, (ta, c2, next_phase)));
        }
    }
    Ok(out)
}

/// Stem/cycle letters for a cycle closing from the blue path: the path runs
/// `root → … → stack[i].node = target → … → top`, and `extra` are the
/// letters of the final hop(s) `top → … → target`.
fn close_lasso(stack: &[Frame], target: Node, extra: Vec<Letter>) -> Lasso {
    let i = stack
        .iter()
        .position(|f| f.node == target)
        .expect("cycle target must be on the blue path");
    let stem: Vec<Letter> = stack[1..=i].iter().map(|f| f.in_letter.unwrap()).collect();
    let mut cycle: Vec<Letter> = stack[i + 1..]
        .iter()
        .map(|f| f.in_letter.unwrap())
        .collect();
    cycle.extend(extra);
    Lasso { stem, cycle }
}

/// Red search from `seed` (which is on the blue path): looks for any cyan
/// node among nodes reachable from `seed`, skipping red-marked ones.
/// Returns the hit node and the letters of the path `seed → … → hit`.
fn red_search(
    a: &Nba,
    ex: &mut Explorer,
    colors: &mut HashMap<Node, u8>,
    seed: Node,
) -> Result<Option<(Node, Vec<Letter>)>, BuchiError> {
    let mut stack = vec![Frame {
        node: seed,
        in_letter: None,
        succs: product_succs(a, ex, seed)?,
        idx: 0,
    }];
    while let Some(top) = stack.last_mut() {
        if top.idx >= top.succs.len() {
            stack.pop();
            continue;
        }
        let (letter, w) = top.succs[top.idx];
        top.idx += 1;
        match colors.get(&w).copied().unwrap_or(WHITE) {
            CYAN => {
                let mut letters: Vec<Letter> =
                    stack.iter().filter_map(|f| f.in_letter).collect();
                letters.push(letter);
                return Ok(Some((w, letters)));
            }
            RED => {}
            _ => {
                colors.insert(w, RED);
                let succs = product_succs(a, ex, w)?;
                stack.push(Frame {
                    node: w,
                    in_letter: Some(letter),
                    succs,
                    idx: 0,
                });
            }
        }
    }
    Ok(None)
}

/// `L(A) ⊆ L(B)` by emptiness of `A × complement(B)`, explored on the fly.
/// `cap` bounds the number of distinct complement states generated.
pub(crate) fn rank_inclusion(a: &Nba, b: &Nba, cap: usize) -> Result<Inclusion, BuchiError> {
    let mut ex = Explorer::new(b, cap)?;
    let mut colors: HashMap<Node, u8> = HashMap::new();

    let c_inits = ex.initial_states(b)?;
    let mut roots: Vec<Node> = Vec::new();
    for &qa in a.initial_states() {
        for &c in &c_inits {
            roots.push((qa, c, 0));
        }
    }

    let finish = |lasso: Lasso| -> Inclusion {
        debug_assert!(a.accepts_ultimately_periodic(&lasso.stem, &lasso.cycle));
        debug_assert!(!b.accepts_ultimately_periodic(&lasso.stem, &lasso.cycle));
        Inclusion::Counterexample(lasso)
    };

    for &root in &roots {
        if colors.get(&root).copied().unwrap_or(WHITE) != WHITE {
            continue;
        }
        colors.insert(root, CYAN);
        let succs = product_succs(a, &mut ex, root)?;
        let mut stack = vec![Frame {
            node: root,
            in_letter: None,
            succs,
            idx: 0,
        }];
        while !stack.is_empty() {
            let top = stack.last_mut().unwrap();
            if top.idx < top.succs.len() {
                let (letter, w) = top.succs[top.idx];
                top.idx += 1;
                let top_node = top.node;
                match colors.get(&w).copied().unwrap_or(WHITE) {
                    WHITE => {
                        colors.insert(w, CYAN);
                        let succs = product_succs(a, &mut ex, w)?;
                        stack.push(Frame {
                            node: w,
                            in_letter: Some(letter),
                            succs,
                            idx: 0,
                        });
                    }
                    CYAN => {
                        // Cycle on the blue path; accepting if it passes a
                        // fair node.
                        if is_fair(&w) || is_fair(&top_node) {
                            return Ok(finish(close_lasso(&stack, w, vec![letter])));
                        }
                    }
                    _ => {}
                }
            } else {
                let v = top.node;
                if is_fair(&v) {
                    if let Some((t, letters)) = red_search(a, &mut ex, &mut colors, v)? {
                        return Ok(finish(close_lasso(&stack, t, letters)));
                    }
                    colors.insert(v, RED);
                } else {
                    colors.insert(v, BLUE);
                }
                stack.pop();
            }
        }
    }
    Ok(Inclusion::Holds)
}
