//! Quick timing probe for the two inclusion engines on random instances.

use mupa_buchi::random::{random_nba, XorShift64};
use mupa_buchi::{includes_ramsey, includes_rank_based};
use std::time::Instant;

fn main() {
    let mut rng = XorShift64::new(0x5EED_0001);
    let mut total_rank = std::time::Duration::ZERO;
    let mut total_ramsey = std::time::Duration::ZERO;
    let mut worst_rank = std::time::Duration::ZERO;
    let mut worst_ramsey = std::time::Duration::ZERO;
    let rounds = 1000;
    for round in 0..rounds {
        let na = 1 + rng.below(6) as u32;
        let nb = 1 + rng.below(6) as u32;
        let a = random_nba(&mut rng, na, 2, 1, 3, 1, 2);
        let b = random_nba(&mut rng, nb, 2, 1, 3, 1, 2);
        let t0 = Instant::now();
        let r1 = includes_rank_based(&a, &b).expect("rank engine");
        let t1 = t0.elapsed();
        let t0 = Instant::now();
        let r2 = includes_ramsey(&a, &b, 1_000_000).expect("ramsey engine");
        let t2 = t0.elapsed();
        total_rank += t1;
        total_ramsey += t2;
        if t1 > worst_rank {
            worst_rank = t1;
            println!("worst rank so far: round {round} na={na} nb={nb}: {t1:?}");
        }
        if t2 > worst_ramsey {
            worst_ramsey = t2;
            println!("worst ramsey so far: round {round} na={na} nb={nb}: {t2:?}");
        }
        assert_eq!(r1.holds(), r2.holds(), "disagreement at round {round}");
    }
    println!("rounds={rounds} total rank={total_rank:?} total ramsey={total_ramsey:?}");
}
