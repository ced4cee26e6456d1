//! Cross-validation of the two independent language-inclusion engines on
//! seeded random automata, with counterexamples confirmed by direct
//! ultimately-periodic word simulation.

use mupa_buchi::random::{random_nba, XorShift64};
use mupa_buchi::{includes_ramsey, includes_rank_based, Inclusion, DEFAULT_PROFILE_CAP};

#[test]
fn engines_agree_on_random_pairs() {
    let mut rng = XorShift64::new(0x5EED_0001);
    let mut holds = 0usize;
    let mut fails = 0usize;
    for round in 0..250 {
        let na = 1 + rng.below(5) as u32;
        let nb = 1 + rng.below(5) as u32;
        let a = random_nba(&mut rng, na, 2, 1, 3, 1, 2);
        let b = random_nba(&mut rng, nb, 2, 1, 3, 1, 2);
        let r1 = includes_rank_based(&a, &b).expect("rank engine");
        let r2 = includes_ramsey(&a, &b, DEFAULT_PROFILE_CAP).expect("ramsey engine");
        assert_eq!(
            r1.holds(),
            r2.holds(),
            "engines disagree on round {round}: rank={r1:?} ramsey={r2:?}"
        );
        for r in [r1, r2] {
            match r {
                Inclusion::Holds => holds += 1,
                Inclusion::Counterexample(l) => {
                    fails += 1;
                    assert!(
                        a.accepts_ultimately_periodic(&l.stem, &l.cycle),
                        "counterexample not in L(A) on round {round}"
                    );
                    assert!(
                        !b.accepts_ultimately_periodic(&l.stem, &l.cycle),
                        "counterexample in L(B) on round {round}"
                    );
                }
            }
        }
    }
    // The distribution should exercise both outcomes.
    assert!(holds > 0 && fails > 0, "degenerate sample: holds={holds} fails={fails}");
}

#[test]
fn self_inclusion_always_holds() {
    let mut rng = XorShift64::new(0x5EED_0002);
    for _ in 0..60 {
        let n = 1 + rng.below(6) as u32;
        let a = random_nba(&mut rng, n, 2, 1, 3, 1, 2);
        assert!(includes_rank_based(&a, &a).unwrap().holds());
        assert!(includes_ramsey(&a, &a, DEFAULT_PROFILE_CAP).unwrap().holds());
    }
}

#[test]
fn union_superset_inclusion_holds() {
    // L(A) ⊆ L(A ∪ B) where union is by disjoint juxtaposition.
    let mut rng = XorShift64::new(0x5EED_0003);
    for _ in 0..60 {
        let na = 1 + rng.below(4) as u32;
        let nb = 1 + rng.below(3) as u32;
        let a = random_nba(&mut rng, na, 2, 1, 3, 1, 2);
        let b = random_nba(&mut rng, nb, 2, 1, 3, 1, 2);
        // Build the disjoint union.
        let mut u = mupa_buchi::Nba::new(2);
        for q in 0..a.num_states() as u32 {
            u.add_state(a.is_accepting(q));
        }
        for q in 0..b.num_states() as u32 {
            u.add_state(b.is_accepting(q));
        }
        for &q in a.initial_states() {
            u.add_initial(q);
        }
        for &q in b.initial_states() {
            u.add_initial(q + a.num_states() as u32);
        }
        for q in 0..a.num_states() as u32 {
            for &(l, t) in a.transitions_from(q) {
                u.add_transition(q, l, t);
            }
        }
        for q in 0..b.num_states() as u32 {
            for &(l, t) in b.transitions_from(q) {
                u.add_transition(
                    q + a.num_states() as u32,
                    l,
                    t + a.num_states() as u32,
                );
            }
        }
        assert!(includes_ramsey(&a, &u, DEFAULT_PROFILE_CAP).unwrap().holds());
        assert!(includes_rank_based(&a, &u).unwrap().holds());
    }
}
