//! Shared inputs for the criterion benches in `benches/`.

use sigma_mono_core::{CaseParams, CaseStudy, PiecewiseField};

/// Every case study at its default parameters.
pub fn case_systems() -> Vec<(CaseStudy, PiecewiseField)> {
    CaseStudy::ALL.into_iter().map(|c| (c, c.system(&CaseParams::default()))).collect()
}

/// Deterministic coefficients with a leading term well away from zero.
pub fn jet_coeffs(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|k| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (s >> 11) as f64 / (1u64 << 53) as f64;
            if k == 0 {
                1.0 + u
            } else {
                2.0 * u - 1.0
            }
        })
        .collect()
}
