//! Rank-based Büchi complementation.
//!
//! Standard tight level-ranking construction: the complement guesses a point
//! at which it switches from subset tracking to a tight level ranking
//! `f : S → ℕ` (odd ranks cover an initial segment of the odd numbers,
//! accepting states get even ranks, ranks never increase along transitions)
//! together with a cut-point set `O` of even-ranked states awaiting a rank
//! decrease; a breakpoint (`O = ∅`) is the Büchi acceptance condition.
//!
//! A word is accepted iff the input automaton has no accepting run on it.
//!
//! Supports automata with at most [`MAX_COMPLEMENT_STATES`] states (state
//! encodings are packed into 128-bit keys); larger inclusion problems go
//! through the Ramsey engine instead.

use crate::nba::{Nba, State};
use crate::BuchiError;
use std::collections::{HashMap, HashSet};
use std::rc::Rc;

/// Maximum input size for the rank-based construction.
pub const MAX_COMPLEMENT_STATES: usize = 16;

/// Packed complement state for an `n ≤ 16`-state input:
/// bit 127 = phase (0 subset, 1 ranked), bits 0..16 subset mask,
/// bits 16..32 cut-point mask, bits 32..128 ranks (6 bits per state).
pub(crate) type Packed = u128;

const PHASE_BIT: u128 = 1 << 127;

fn pack_subset(s: u16) -> Packed {
    s as u128
}

fn pack_ranked(s: u16, o: u16, ranks: &[u8; 16]) -> Packed {
    let mut v = PHASE_BIT | (s as u128) | ((o as u128) << 16);
    for (i, &r) in ranks.iter().enumerate() {
        v |= (r as u128) << (32 + 6 * i);
    }
    v
}

fn unpack_ranks(v: Packed) -> [u8; 16] {
    let mut ranks = [0u8; 16];
    for (i, r) in ranks.iter_mut().enumerate() {
        *r = ((v >> (32 + 6 * i)) & 0x3F) as u8;
    }
    ranks
}

struct Ctx {
    n: usize,
    alphabet: u32,
    accepting_mask: u16,
    /// post[q][a] = successor mask.
    post: Vec<Vec<u16>>,
}

impl Ctx {
    fn subset_post(&self, s: u16, a: u32) -> u16 {
        let mut out = 0u16;
        let mut bits = s;
        while bits != 0 {
            let q = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            out |= self.post[q][a as usize];
        }
        out
    }
}

/// Lazily explored complement automaton over packed states. Successor sets
/// are memoized per (state, letter) so shared suffix structure is computed
/// once even when the product pairs one complement state with many input
/// states. The total number of distinct complement states handed out is
/// capped.
pub(crate) struct Explorer {
    ctx: Ctx,
    cap: usize,
    /// Jump targets (all tight rankings with fresh cut-point) per subset.
    jump_memo: HashMap<u16, Rc<Vec<Packed>>>,
    succ_memo: HashMap<(Packed, u32), Rc<Vec<Packed>>>,
    /// Tight rankings per (subset, normalized bound vector) — many ranked
    /// states share the same successor subset and bounds.
    rankings_memo: HashMap<(u16, [u8; 16]), Rc<Vec<([u8; 16], u16)>>>,
    distinct: HashSet<Packed>,
}

impl Explorer {
    pub(crate) fn new(b: &Nba, cap: usize) -> Result<Explorer, BuchiError> {
        let n = b.num_states();
        if n > MAX_COMPLEMENT_STATES {
            return Err(BuchiError::ComplementTooLarge { cap });
        }
        let mut post = vec![vec![0u16; b.alphabet_size() as usize]; n.max(1)];
        for q in 0..n {
            for &(a, t) in b.transitions_from(q as State) {
                post[q][a as usize] |= 1 << t;
            }
        }
        let mut accepting_mask = 0u16;
        for q in 0..n {
            if b.is_accepting(q as State) {
                accepting_mask |= 1 << q;
            }
        }
        Ok(Explorer {
            ctx: Ctx {
                n,
                alphabet: b.alphabet_size(),
                accepting_mask,
                post,
            },
            cap,
            jump_memo: HashMap::new(),
            succ_memo: HashMap::new(),
            rankings_memo: HashMap::new(),
            distinct: HashSet::new(),
        })
    }

    pub(crate) fn alphabet(&self) -> u32 {
        self.ctx.alphabet
    }

    pub(crate) fn is_accepting(c: Packed) -> bool {
        (c & PHASE_BIT) != 0 && ((c >> 16) & 0xFFFF) == 0
    }

    fn note(&mut self, c: Packed) -> Result<(), BuchiError> {
        if self.distinct.insert(c) && self.distinct.len() > self.cap {
            return Err(BuchiError::ComplementTooLarge { cap: self.cap });
        }
        Ok(())
    }

    fn jumps(&mut self, s: u16) -> Rc<Vec<Packed>> {
        let ctx = &self.ctx;
        self.jump_memo
            .entry(s)
            .or_insert_with(|| Rc::new(jump_states(ctx, s)))
            .clone()
    }

    /// Initial states: the subset-phase start plus immediate jumps into the
    /// ranked phase.
    pub(crate) fn initial_states(&mut self, b: &Nba) -> Result<Vec<Packed>, BuchiError> {
        let mut init_mask = 0u16;
        for &q in b.initial_states() {
            init_mask |= 1 << q;
        }
        let mut out = vec![pack_subset(init_mask)];
        out.extend(self.jumps(init_mask).iter().copied());
        for &c in &out {
            self.note(c)?;
        }
        Ok(out)
    }

    pub(crate) fn successors(&mut self, c: Packed, a: u32) -> Result<Rc<Vec<Packed>>, BuchiError> {
        if let Some(v) = self.succ_memo.get(&(c, a)) {
            return Ok(v.clone());
        }
        let mut out: Vec<Packed>;
        if c & PHASE_BIT == 0 {
            let s = (c & 0xFFFF) as u16;
            let s2 = self.ctx.subset_post(s, a);
            out = vec![pack_subset(s2)];
            out.extend(self.jumps(s2).iter().copied());
        } else {
            let s = (c & 0xFFFF) as u16;
            let o = ((c >> 16) & 0xFFFF) as u16;
            let ranks = unpack_ranks(c);
            let s2 = self.ctx.subset_post(s, a);
            // Per-state rank bound: min over predecessors.
            let mut bound = [u8::MAX; 16];
            let mut bits = s;
            while bits != 0 {
                let q = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let mut succ = self.ctx.post[q][a as usize];
                while succ != 0 {
                    let t = succ.trailing_zeros() as usize;
                    succ &= succ - 1;
                    bound[t] = bound[t].min(ranks[q]);
                }
            }
            let o_post = self.ctx.subset_post(o, a) & s2;
            // Normalize the bound key: entries outside the subset are
            // irrelevant, and anything at or above the maximal possible
            // rank acts like "unbounded".
            let mut key = [0u8; 16];
            let cap_rank = (2 * MAX_COMPLEMENT_STATES - 1) as u8;
            for (q, k) in key.iter_mut().enumerate() {
                if s2 & (1 << q) != 0 {
                    *k = bound[q].min(cap_rank);
                }
            }
            let ctx = &self.ctx;
            let rankings = self
                .rankings_memo
                .entry((s2, key))
                .or_insert_with(|| Rc::new(tight_rankings_bounded(ctx, s2, &bound)))
                .clone();
            out = rankings
                .iter()
                .map(|&(f2, evens)| {
                    let o2 = if o == 0 { evens } else { o_post & evens };
                    pack_ranked(s2, o2, &f2)
                })
                .collect();
        }
        for &c2 in &out {
            self.note(c2)?;
        }
        let rc = Rc::new(out);
        self.succ_memo.insert((c, a), rc.clone());
        Ok(rc)
    }
}

/// Complement the automaton. Errors out if the construction would exceed
/// `cap` states or the input has more than [`MAX_COMPLEMENT_STATES`] states.
pub fn complement(b: &Nba, cap: usize) -> Result<Nba, BuchiError> {
    let mut ex = Explorer::new(b, cap)?;
    let mut out = Nba::new(ex.alphabet());
    let mut index: HashMap<Packed, State> = HashMap::new();
    let mut work: Vec<Packed> = Vec::new();

    let intern = |out: &mut Nba,
                  index: &mut HashMap<Packed, State>,
                  work: &mut Vec<Packed>,
                  c: Packed|
     -> State {
        *index.entry(c).or_insert_with(|| {
            let q = out.add_state(Explorer::is_accepting(c));
            work.push(c);
            q
        })
    };

    for c in ex.initial_states(b)? {
        let q = intern(&mut out, &mut index, &mut work, c);
        out.add_initial(q);
    }
    while let Some(c) = work.pop() {
        let from = index[&c];
        for a in 0..ex.alphabet() {
            for &c2 in ex.successors(c, a)?.iter() {
                let q = intern(&mut out, &mut index, &mut work, c2);
                out.add_transition(from, a, q);
            }
        }
    }
    Ok(out)
}

/// All ranked states reachable by jumping on subset `s`: tight rankings with
/// the cut-point set initialized to the even-ranked states.
fn jump_states(ctx: &Ctx, s: u16) -> Vec<Packed> {
    let bound = [u8::MAX; 16];
    tight_rankings_bounded(ctx, s, &bound)
        .into_iter()
        .map(|(f, evens)| pack_ranked(s, evens, &f))
        .collect()
}

/// All tight level rankings `f` on subset `s` with `f(q) ≤ bound[q]`,
/// returned with the mask of even-ranked states.
///
/// Tight: the maximal rank is odd and every odd number up to the maximum is
/// the rank of some state. Accepting states take even ranks only. The empty
/// subset has the single (vacuously tight) empty ranking — it is the
/// "all runs died" accepting sink.
fn tight_rankings_bounded(ctx: &Ctx, s: u16, bound: &[u8; 16]) -> Vec<([u8; 16], u16)> {
    let states: Vec<usize> = (0..ctx.n).filter(|&q| s & (1 << q) != 0).collect();
    if states.is_empty() {
        return vec![([0u8; 16], 0)];
    }
    let non_acc = states
        .iter()
        .filter(|&&q| ctx.accepting_mask & (1 << q) == 0)
        .count();
    if non_acc == 0 {
        // Maximal rank must be odd but accepting states are even-ranked.
        return Vec::new();
    }
    let max_rank: u8 = (2 * non_acc - 1) as u8;
    let mut out = Vec::new();
    let mut current = [0u8; 16];
    let mut m = 1u8;
    while m <= max_rank {
        enumerate(ctx, &states, bound, m, 0, &mut current, &mut out);
        m += 2;
    }
    out
}

fn enumerate(
    ctx: &Ctx,
    states: &[usize],
    bound: &[u8; 16],
    m: u8,
    i: usize,
    current: &mut [u8; 16],
    out: &mut Vec<([u8; 16], u16)>,
) {
    if i == states.len() {
        if missing_odds(states, current, states.len(), m) == 0 {
            let mut evens = 0u16;
            for &q in states {
                if current[q] % 2 == 0 {
                    evens |= 1 << q;
                }
            }
            out.push((*current, evens));
        }
        return;
    }
    let q = states[i];
    let qb = bound[q].min(m);
    let acc = ctx.accepting_mask & (1 << q) != 0;
    for r in 0..=qb {
        if acc && r % 2 == 1 {
            continue;
        }
        current[q] = r;
        // Feasibility prune: the remaining slots must be able to cover the
        // odd values still missing.
        if missing_odds(states, current, i + 1, m) <= states.len() - i - 1 {
            enumerate(ctx, states, bound, m, i + 1, current, out);
        }
    }
    current[q] = 0;
}

/// Number of odd values in `{1,3,…,m}` not yet used among the first
/// `prefix_len` assigned states.
fn missing_odds(states: &[usize], current: &[u8; 16], prefix_len: usize, m: u8) -> usize {
    let mut covered = [false; 16];
    for &q in states.iter().take(prefix_len) {
        let r = current[q];
        if r % 2 == 1 {
            covered[(r as usize - 1) / 2] = true;
        }
    }
    covered
        .iter()
        .take((m as usize + 1) / 2)
        .filter(|&&c| !c)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx_of(b: &Nba) -> Ctx {
        let n = b.num_states();
        let mut post = vec![vec![0u16; b.alphabet_size() as usize]; n.max(1)];
        for q in 0..n {
            for &(a, t) in b.transitions_from(q as State) {
                post[q][a as usize] |= 1 << t;
            }
        }
        let mut accepting_mask = 0u16;
        for q in 0..n {
            if b.is_accepting(q as State) {
                accepting_mask |= 1 << q;
            }
        }
        Ctx {
            n,
            alphabet: b.alphabet_size(),
            accepting_mask,
            post,
        }
    }

    #[test]
    fn tight_rankings_shapes() {
        // Two states, one accepting.
        let mut b = Nba::new(1);
        let q0 = b.add_state(false);
        let q1 = b.add_state(true);
        b.add_initial(q0);
        b.add_transition(q0, 0, q1);
        b.add_transition(q1, 0, q0);
        let ctx = ctx_of(&b);
        let bound = [u8::MAX; 16];
        let fs = tight_rankings_bounded(&ctx, 0b11, &bound);
        for (f, evens) in &fs {
            let max = f[0].max(f[1]);
            assert_eq!(max % 2, 1, "max rank must be odd");
            assert_eq!(f[q1 as usize] % 2, 0, "accepting state must be even");
            for odd in (1..=max).step_by(2) {
                assert!(f[..2].contains(&odd), "odd ranks must be onto");
            }
            for q in 0..2 {
                assert_eq!(evens & (1 << q) != 0, f[q] % 2 == 0);
            }
        }
        assert!(!fs.is_empty());
        // Empty subset: single empty ranking.
        assert_eq!(tight_rankings_bounded(&ctx, 0, &bound).len(), 1);
    }

    #[test]
    fn complement_disjoint_and_covering() {
        // "Infinitely many 0s" over {0,1}.
        let mut b = Nba::new(2);
        let q = b.add_state(false);
        let acc = b.add_state(true);
        b.add_initial(q);
        b.add_transition(q, 1, q);
        b.add_transition(q, 0, acc);
        b.add_transition(acc, 1, q);
        b.add_transition(acc, 0, acc);
        let c = complement(&b, 1_000_000).unwrap();
        let samples: Vec<(Vec<u32>, Vec<u32>)> = vec![
            (vec![], vec![0]),
            (vec![], vec![1]),
            (vec![0, 1], vec![1]),
            (vec![1], vec![0, 1]),
            (vec![0, 0, 1, 1], vec![1, 1, 1]),
            (vec![], vec![0, 1, 1, 1]),
        ];
        for (stem, cyc) in samples {
            let in_b = b.accepts_ultimately_periodic(&stem, &cyc);
            let in_c = c.accepts_ultimately_periodic(&stem, &cyc);
            assert_ne!(in_b, in_c, "stem={stem:?} cycle={cyc:?}");
        }
    }
}
