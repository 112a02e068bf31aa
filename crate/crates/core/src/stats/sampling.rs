use statrs::function::erf::erfc_inv;

use crate::rng::RngState;

/// `n` normal draws by inverse-CDF transform of open-interval uniforms:
/// `mean + stddev * Φ⁻¹(u)` with `Φ⁻¹(u) = -√2 · erfc⁻¹(2u)`.
///
/// # Panics
/// If `stddev` is negative or `n` is zero.
pub fn clt_sample(mean: f64, stddev: f64, n: usize, rng: &mut RngState) -> Vec<f64> {
    assert!(stddev >= 0.0, "stddev {stddev} must be >= 0");
    assert!(n >= 1, "need at least one draw");
    (0..n)
        .map(|_| {
            let u = rng.uniform_open();
            mean + stddev * (-std::f64::consts::SQRT_2 * erfc_inv(2.0 * u))
        })
        .collect()
}
