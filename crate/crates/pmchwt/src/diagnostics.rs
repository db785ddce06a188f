//! Scaling-law verification: fitting power laws to quantities measured
//! along frequency or refinement sweeps, and decomposing system matrices
//! into loop/star blocks to see which physical mechanism dominates where.
//!
//! Everything here reports numbers for a human (or an acceptance test) to
//! judge; nothing feeds back into the solver.

/// Least-squares slope of log(y) against log(x): the exponent p of the best
/// power-law fit y ≈ C·xᵖ. Inputs must be positive; a y at the floor of
/// double precision would make the fit meaningless, so zeros are clamped to
/// the smallest positive normal rather than rejected.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "a slope needs at least two samples");
    let lx: Vec<f64> = x.iter().map(|&v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|&v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        num += (a - mx) * (b - my);
        den += (a - mx) * (a - mx);
    }
    num / den
}
