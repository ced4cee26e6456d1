//! Ramsey-style language inclusion.
//!
//! `L(A) ⊆ L(B)` is decided through the finite monoid of joint transition
//! profiles. The profile of a finite word `w` records, for each automaton,
//! the relation `{(q, f, q′)}` with `q →^w q′` and `f = 1` iff some run
//! between them visits an accepting state after the first position (keeping
//! only the best flag per state pair — flags compose by disjunction, so the
//! maximum is a monoid homomorphism and suffices for acceptance questions).
//!
//! Inclusion fails iff the closure of the letter profiles under composition
//! contains a *linked pair* `(g, h)` — `g·h = g` and `h·h = h` — that admits
//! an accepting `A`-lasso (initial `g`-step into a flagged `h`-loop) but no
//! accepting `B`-lasso. Linkage matters: with `g·h = g` the profile of
//! `stem · cycle^i` is `g` for every `i`, so an accepting run of `B` on the
//! witness word would have to show up as a `B`-lasso of the pair itself
//! (pick a recurring block-boundary state with an accepting visit between
//! two of its occurrences); without linkage the test is unsound. Soundness:
//! the stored witness words realize a concrete counterexample `u v^ω`.
//! Completeness: by Ramsey's theorem any word in `L(A) ∖ L(B)` factorizes as
//! `u·v₁·v₂·…` with every block and block-union of one idempotent profile
//! `e`, and `(profile(u)·e, e)` is a linked pair in the closure.
//!
//! Rather than filtering closure pairs by the linkage equation, the search
//! enumerates the normalized pairs `(g·h, h)` for every closure element (or
//! empty stem) `g` and idempotent `h`: such pairs are automatically linked,
//! and every linked pair is of this shape (`g·h = g` means `g` names its own
//! normalization), so the tested set is exactly the linked pairs. The lasso
//! tests for `(g·h, h)` need no composition — an accepting lasso exists iff
//! an initial `g`-row meets the set of sources from which an `h`-step
//! reaches a flagged `h`-diagonal — so each candidate pair costs a few word
//! scans. Pairs are tested as soon as both halves exist, which lets failing
//! inclusions return while the closure is still growing.
//!
//! The closure itself exploits that every monoid element is the profile of
//! a concrete word: right-extending known profiles by single letters
//! already generates everything, so the closure costs `|M|·|Σ|`
//! compositions instead of the quadratic pairwise product.
//!
//! Relations are stored as sparse rows of dense target bitmasks: only
//! reachable sources with at least one successor get a row. Graph-shaped
//! automata (where each letter is usable at one state only) therefore stay
//! cheap even with many states.

use crate::nba::{Lasso, Nba, State};
use crate::{BuchiError, Inclusion};
use std::collections::HashMap;
use std::rc::Rc;

/// Max-flag transition relation of one automaton for one word.
/// `rows` is sorted by source state; each row holds a bitmask of targets
/// (`any`) and the sub-mask of targets reachable with an accepting visit
/// (`flagged`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Rel {
    words: u32,
    rows: Vec<(State, Vec<u64>, Vec<u64>)>,
}

impl Rel {
    fn row(&self, q: State) -> Option<(&[u64], &[u64])> {
        self.rows
            .binary_search_by_key(&q, |r| r.0)
            .ok()
            .map(|i| (self.rows[i].1.as_slice(), self.rows[i].2.as_slice()))
    }

    fn compose(&self, other: &Rel) -> Rel {
        let words = self.words as usize;
        let mut rows = Vec::with_capacity(self.rows.len());
        for (p, any, flagged) in &self.rows {
            let mut out_any = vec![0u64; words];
            let mut out_flag = vec![0u64; words];
            for wi in 0..words {
                let mut bits = any[wi];
                while bits != 0 {
                    let b = bits.trailing_zeros();
                    bits &= bits - 1;
                    let q = (wi as u32) * 64 + b;
                    if let Some((yany, yflag)) = other.row(q) {
                        let via_flag = (flagged[wi] >> b) & 1 == 1;
                        for i in 0..words {
                            out_any[i] |= yany[i];
                            out_flag[i] |= yflag[i];
                            if via_flag {
                                out_flag[i] |= yany[i];
                            }
                        }
                    }
                }
            }
            if out_any.iter().any(|&w| w != 0) {
                rows.push((*p, out_any, out_flag));
            }
        }
        Rel {
            words: self.words,
            rows,
        }
    }

    /// Is there a flagged diagonal entry `(q, 1, q)`?
    fn has_flagged_diagonal(&self) -> bool {
        self.rows.iter().any(|(q, _, flagged)| {
            let q = *q as usize;
            (flagged[q / 64] >> (q % 64)) & 1 == 1
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Profile {
    a: Rel,
    b: Rel,
}

/// Witness words stored as a concatenation tree to keep closure cheap.
#[derive(Debug)]
enum Witness {
    Letter(u32),
    Concat(Rc<Witness>, Rc<Witness>),
}

fn materialize(w: &Witness, out: &mut Vec<u32>) {
    match w {
        Witness::Letter(a) => out.push(*a),
        Witness::Concat(l, r) => {
            materialize(l, out);
            materialize(r, out);
        }
    }
}

/// States that can lie on an accepting lasso: reachable from the initial
/// states *and* able to reach an accepting state that sits on a cycle.
/// Restricting profiles to these states is exact — every state on any
/// accepting run is useful, and usefulness is convex (any state on a path
/// between useful states is itself useful), so the restricted letter
/// profiles still compose homomorphically.
fn useful(m: &Nba) -> Vec<bool> {
    let n = m.num_states();
    let mut reach = vec![false; n];
    let mut stack: Vec<State> = Vec::new();
    for &q in m.initial_states() {
        if !reach[q as usize] {
            reach[q as usize] = true;
            stack.push(q);
        }
    }
    while let Some(q) = stack.pop() {
        for &(_, t) in m.transitions_from(q) {
            if !reach[t as usize] {
                reach[t as usize] = true;
                stack.push(t);
            }
        }
    }
    // Accepting states on a cycle (within the reachable part).
    let sccs = crate::nba::tarjan_sccs(n, |v| m.transitions_from(v as State).iter().map(|&(_, t)| t as usize), &reach);
    let mut scc_of = vec![usize::MAX; n];
    for (i, scc) in sccs.iter().enumerate() {
        for &v in scc {
            scc_of[v] = i;
        }
    }
    let mut live = vec![false; n];
    for (i, scc) in sccs.iter().enumerate() {
        let internal = scc.iter().any(|&v| {
            m.transitions_from(v as State)
                .iter()
                .any(|&(_, t)| scc_of[t as usize] == i)
        });
        if internal {
            for &v in scc {
                if m.is_accepting(v as State) {
                    live[v] = true;
                }
            }
        }
    }
    // Backward closure from live accepting states.
    let mut rev: Vec<Vec<State>> = vec![Vec::new(); n];
    for q in 0..n as State {
        if reach[q as usize] {
            for &(_, t) in m.transitions_from(q) {
                rev[t as usize].push(q);
            }
        }
    }
    let mut out = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| live[v]).collect();
    for &v in &stack {
        out[v] = true;
    }
    while let Some(v) = stack.pop() {
        for &p in &rev[v] {
            if !out[p as usize] {
                out[p as usize] = true;
                stack.push(p as usize);
            }
        }
    }
    for v in 0..n {
        out[v] &= reach[v];
    }
    out
}

/// Letter profile restricted to useful source *and* target states — entries
/// through useless states never contribute to a lasso, and the restriction
/// is closed under composition, which keeps the monoid small.
fn letter_profile(a: &Nba, b: &Nba, letter: u32, useful_a: &[bool], useful_b: &[bool]) -> Profile {
    let rel_of = |m: &Nba, useful: &[bool]| -> Rel {
        let words = m.num_states().div_ceil(64).max(1) as u32;
        let mut rows = Vec::new();
        for q in 0..m.num_states() as State {
            if !useful[q as usize] {
                continue;
            }
            let mut any = vec![0u64; words as usize];
            let mut flagged = vec![0u64; words as usize];
            let mut nonempty = false;
            for t in m.successors(q, letter) {
                if !useful[t as usize] {
                    continue;
                }
                any[t as usize / 64] |= 1 << (t % 64);
                if m.is_accepting(t) {
                    flagged[t as usize / 64] |= 1 << (t % 64);
                }
                nonempty = true;
            }
            if nonempty {
                rows.push((q, any, flagged));
            }
        }
        Rel {
            words,
            rows,
        }
    };
    Profile {
        a: rel_of(a, useful_a),
        b: rel_of(b, useful_b),
    }
}

/// Data cached for each idempotent profile `h`: the sources `r` from which
/// an `h`-step reaches a flagged `h`-diagonal state, per automaton. The pair
/// `(g·h, h)` — which is linked for any `g` because `h` is idempotent — has
/// an accepting lasso from `initial` iff some `g`-row of an initial state
/// intersects that source mask.
struct IdemInfo {
    index: usize,
    hook_a: Vec<u64>,
    hook_b: Vec<u64>,
}

fn hook_mask(rel: &Rel) -> Vec<u64> {
    let words = rel.words as usize;
    // Flagged diagonal targets.
    let mut diag = vec![0u64; words];
    for (q, _, flagged) in &rel.rows {
        let q = *q as usize;
        if (flagged[q / 64] >> (q % 64)) & 1 == 1 {
            diag[q / 64] |= 1 << (q % 64);
        }
    }
    // Sources whose row intersects the flagged diagonal.
    let mut hooks = vec![0u64; words];
    for (r, any, _) in &rel.rows {
        if any.iter().zip(diag.iter()).any(|(&aw, &dw)| aw & dw != 0) {
            let r = *r as usize;
            hooks[r / 64] |= 1 << (r % 64);
        }
    }
    hooks
}

fn rows_hit(rel: &Rel, initial: &[State], hooks: &[u64]) -> bool {
    for &p in initial {
        if let Some((any, _)) = rel.row(p) {
            if any.iter().zip(hooks.iter()).any(|(&aw, &hw)| aw & hw != 0) {
                return true;
            }
        }
    }
    false
}

/// `L(A) ⊆ L(B)` via the profile monoid. `cap` bounds the closure size.
///
/// Pairs are tested incrementally while the closure grows, so failing
/// inclusions usually return long before the monoid is complete.
pub fn includes_ramsey(a: &Nba, b: &Nba, cap: usize) -> Result<Inclusion, BuchiError> {
    if a.alphabet_size() != b.alphabet_size() {
        return Err(BuchiError::AlphabetMismatch);
    }
    struct Elem {
        profile: Profile,
        witness: Rc<Witness>,
    }
    let mut elems: Vec<Elem> = Vec::new();
    let mut seen: HashMap<Profile, usize> = HashMap::new();
    let mut idems: Vec<IdemInfo> = Vec::new();

    let a_init: Vec<State> = a.initial_states().to_vec();
    let b_init: Vec<State> = b.initial_states().to_vec();

    // Tests the normalized linked pair (g·h, h); `g = None` means the empty
    // stem (identity profile). Returns the counterexample word on success.
    let test_pair = |elems: &Vec<Elem>,
                     g: Option<usize>,
                     h: &IdemInfo|
     -> Option<(Vec<u32>, Vec<u32>)> {
        let (a_hit, b_hit) = match g {
            None => {
                let hit = |init: &[State], hooks: &[u64]| {
                    init.iter()
                        .any(|&p| (hooks[p as usize / 64] >> (p % 64)) & 1 == 1)
                };
                (hit(&a_init, &h.hook_a), hit(&b_init, &h.hook_b))
            }
            Some(gi) => (
                rows_hit(&elems[gi].profile.a, &a_init, &h.hook_a),
                rows_hit(&elems[gi].profile.b, &b_init, &h.hook_b),
            ),
        };
        if a_hit && !b_hit {
            let mut stem = Vec::new();
            if let Some(gi) = g {
                materialize(&elems[gi].witness, &mut stem);
            }
            let mut cycle = Vec::new();
            materialize(&elems[h.index].witness, &mut cycle);
            stem.extend_from_slice(&cycle);
            Some((stem, cycle))
        } else {
            None
        }
    };

    // Adds a profile; tests it against known idempotents (as stem) and, if
    // idempotent itself, against all known elements (as cycle).
    enum Added {
        Dup,
        New,
        Cex(Vec<u32>, Vec<u32>),
    }
    let push = |elems: &mut Vec<Elem>,
                seen: &mut HashMap<Profile, usize>,
                idems: &mut Vec<IdemInfo>,
                e: Elem|
     -> Result<Added, BuchiError> {
        if seen.contains_key(&e.profile) {
            return Ok(Added::Dup);
        }
        if elems.len() >= cap {
            return Err(BuchiError::ProfileCapExceeded { cap });
        }
        seen.insert(e.profile.clone(), elems.len());
        elems.push(e);
        let idx = elems.len() - 1;
        let e = &elems[idx];
        // New element as a stem against existing cycles.
        for h in idems.iter() {
            if let Some((stem, cycle)) = test_pair(elems, Some(idx), h) {
                return Ok(Added::Cex(stem, cycle));
            }
        }
        // New element as a cycle if idempotent. Only cycles with a flagged
        // A-diagonal can close an accepting A-lasso, and the factorization
        // behind completeness always yields one, so others are skipped
        // before the (costlier) idempotency compositions.
        if e.profile.a.has_flagged_diagonal()
            && e.profile.a.compose(&e.profile.a) == e.profile.a
            && e.profile.b.compose(&e.profile.b) == e.profile.b
        {
            let info = IdemInfo {
                index: idx,
                hook_a: hook_mask(&e.profile.a),
                hook_b: hook_mask(&e.profile.b),
            };
            if let Some((stem, cycle)) = test_pair(elems, None, &info) {
                return Ok(Added::Cex(stem, cycle));
            }
            for gi in 0..elems.len() {
                if let Some((stem, cycle)) = test_pair(elems, Some(gi), &info) {
                    return Ok(Added::Cex(stem, cycle));
                }
            }
            idems.push(info);
        }
        Ok(Added::New)
    };

    let finish = |a: &Nba, b: &Nba, stem: Vec<u32>, cycle: Vec<u32>| -> Inclusion {
        debug_assert!(a.accepts_ultimately_periodic(&stem, &cycle));
        debug_assert!(!b.accepts_ultimately_periodic(&stem, &cycle));
        Inclusion::Counterexample(Lasso { stem, cycle })
    };

    let useful_a = useful(a);
    let useful_b = useful(b);
    if a.alphabet_size() == 0 || useful_a.iter().all(|&u| !u) {
        // No infinite words in A at all.
        return Ok(Inclusion::Holds);
    }
    let mut letters: Vec<Profile> = Vec::new();
    for letter in 0..a.alphabet_size() {
        let p = letter_profile(a, b, letter, &useful_a, &useful_b);
        letters.push(p.clone());
        let e = Elem {
            profile: p,
            witness: Rc::new(Witness::Letter(letter)),
        };
        match push(&mut elems, &mut seen, &mut idems, e)? {
            Added::Cex(stem, cycle) => return Ok(finish(a, b, stem, cycle)),
            Added::Dup | Added::New => {}
        }
    }

    // Every monoid element is the profile of some word, so the whole monoid
    // is generated by right-extending known word profiles one letter at a
    // time — |M|·|Σ| compositions rather than the |M|² of a naive pairwise
    // closure. The worklist runs in BFS order, keeping witnesses short.
    let mut head = 0usize;
    while head < elems.len() {
        let i = head;
        head += 1;
        for (letter, lp) in letters.iter().enumerate() {
            let p = Profile {
                a: elems[i].profile.a.compose(&lp.a),
                b: elems[i].profile.b.compose(&lp.b),
            };
            let w = Rc::new(Witness::Concat(
                elems[i].witness.clone(),
                Rc::new(Witness::Letter(letter as u32)),
            ));
            match push(&mut elems, &mut seen, &mut idems, Elem { profile: p, witness: w })? {
                Added::Cex(stem, cycle) => return Ok(finish(a, b, stem, cycle)),
                Added::New | Added::Dup => {}
            }
        }
    }
    Ok(Inclusion::Holds)
}
