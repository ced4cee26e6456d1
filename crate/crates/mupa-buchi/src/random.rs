//! Seeded random automaton generation for cross-validation tests.
//!
//! Deliberately dependency-free: a small xorshift generator keeps the crate's
//! public surface free of RNG trait choices while staying reproducible.

use crate::nba::Nba;

/// Minimal xorshift64* PRNG for reproducible test instances.
#[derive(Debug, Clone)]
pub struct XorShift64 {
    state: u64,
}

impl XorShift64 {
    pub fn new(seed: u64) -> Self {
        XorShift64 {
            state: seed.max(1),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform in `[0, bound)` for small bounds.
    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }

    /// Bernoulli with probability `num/den`.
    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.below(den) < num
    }
}

/// Random NBA with `states` states over `alphabet` letters. Each
/// (state, letter, state) transition is present with probability
/// `trans_num/trans_den`; each state is accepting with probability
/// `acc_num/acc_den`. State 0 is always initial.
pub fn random_nba(
    rng: &mut XorShift64,
    states: u32,
    alphabet: u32,
    trans_num: u64,
    trans_den: u64,
    acc_num: u64,
    acc_den: u64,
) -> Nba {
    let mut n = Nba::new(alphabet);
    for _ in 0..states {
        let acc = rng.chance(acc_num, acc_den);
        n.add_state(acc);
    }
    n.add_initial(0);
    for q in 0..states {
        for a in 0..alphabet {
            for t in 0..states {
                if rng.chance(trans_num, trans_den) {
                    n.add_transition(q, a, t);
                }
            }
        }
    }
    n
}
