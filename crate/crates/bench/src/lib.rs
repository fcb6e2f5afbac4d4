//! Workloads shared by the criterion benches.

use degen_core::counterexamples::{make_degenerate_pair_unchecked, periodize, DegeneratePair};
use degen_core::DegenerateParams;

/// The reference periodic pair, optionally periodized along y and z.
pub fn example_pair(periodic_yz: bool) -> DegeneratePair {
    let pair = make_degenerate_pair_unchecked(&DegenerateParams::example()).expect("valid parameters");
    if periodic_yz {
        periodize(&pair, Some(5.0), Some(6.0)).expect("valid periods")
    } else {
        pair
    }
}
