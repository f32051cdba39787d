//! Prints the Ackley entries of `objectives/lipschitz_table.rs`.

use swarm_limit::objectives::{
    ackley, estimate_weighted_lipschitz, LIPSCHITZ_CALIBRATION_PAIRS, LIPSCHITZ_SAFETY,
};

fn main() {
    for dim in 1..=4 {
        let obj = ackley(dim, &vec![0.0; dim]).expect("valid dimension");
        let est = estimate_weighted_lipschitz(&obj, LIPSCHITZ_CALIBRATION_PAIRS, 0x5eed);
        println!("    ({dim}, {:?}),", LIPSCHITZ_SAFETY * est);
    }
}
