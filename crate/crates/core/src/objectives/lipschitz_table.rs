//! Weighted Lipschitz constants for the unshifted Ackley function on `[-3, 3]^d`.
//!
//! Regenerate with `cargo run --release --example calibrate_lipschitz`.
//! Each entry is `LIPSCHITZ_SAFETY` times the largest ratio observed over
//! `LIPSCHITZ_CALIBRATION_PAIRS` pairs (seed 0x5eed).

pub const LIPSCHITZ_SAFETY: f64 = 10.0;
pub const LIPSCHITZ_CALIBRATION_PAIRS: usize = 1_000_000;

pub const ACKLEY_LIPSCHITZ: &[(usize, f64)] = &[
    (1, 11318.751723533816),
    (2, 305.95690705934703),
    (3, 80.79206768019064),
    (4, 17.764695247290064),
];

pub(super) fn ackley_lipschitz(dim: usize) -> Option<f64> {
    ACKLEY_LIPSCHITZ
        .iter()
        .find(|&&(d, _)| d == dim)
        .map(|&(_, l)| l)
}
