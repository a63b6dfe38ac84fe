//! Modified Bessel function of the first kind, order one.
//!
//! Evaluated by the ascending power series
//! `I₁(z) = Σ_{m≥0} (z/2)^{2m+1} / (m!(m+1)!)`
//! with term-ratio truncation once the running term drops below `1e-16`
//! of the partial sum. For large arguments the raw series overflows f64
//! (`I₁(z)` grows like `e^z/√(2πz)`), so the exponentially scaled form
//! `e^{-z}·I₁(z)` is computed instead, rescaling the accumulator by exact
//! powers of two whenever it grows too large.

const TERM_RATIO_CUTOFF: f64 = 1e-16;
const DIRECT_SERIES_LIMIT: f64 = 30.0;
/// 2^-512, an exact rescaling factor.
const SCALE_DOWN: f64 = 7.458340731200207e-155;
const SCALE_DOWN_LOG2: f64 = -512.0;
const RESCALE_THRESHOLD: f64 = 1e250;

/// `I₁(z)` for `z ≥ 0`. Overflows to infinity for `z ≳ 713`; use
/// [`i1_scaled`] there.
pub fn i1(z: f64) -> f64 {
    assert!(z >= 0.0 && z.is_finite(), "i1 requires finite z >= 0");
    if z <= DIRECT_SERIES_LIMIT {
        direct_series(z)
    } else {
        i1_scaled(z) * z.exp()
    }
}

/// `e^{-z}·I₁(z)` for `z ≥ 0`, stable for arbitrarily large arguments.
pub fn i1_scaled(z: f64) -> f64 {
    assert!(z >= 0.0 && z.is_finite(), "i1_scaled requires finite z >= 0");
    if z <= DIRECT_SERIES_LIMIT {
        return direct_series(z) * (-z).exp();
    }

    // Ascending series with power-of-two rescaling; all terms positive.
    let quarter_z2 = 0.25 * z * z;
    let mut term = 0.5 * z;
    let mut sum = term;
    let mut scale_log2 = 0.0;
    let mut m = 0u64;
    loop {
        term *= quarter_z2 / ((m + 1) as f64 * (m + 2) as f64);
        sum += term;
        if term < TERM_RATIO_CUTOFF * sum {
            break;
        }
        if sum > RESCALE_THRESHOLD {
            sum *= SCALE_DOWN;
            term *= SCALE_DOWN;
            scale_log2 -= SCALE_DOWN_LOG2;
        }
        m += 1;
    }
    (sum.ln() + scale_log2 * std::f64::consts::LN_2 - z).exp()
}

fn direct_series(z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let quarter_z2 = 0.25 * z * z;
    let mut term = 0.5 * z;
    let mut sum = term;
    let mut m = 0u64;
    loop {
        term *= quarter_z2 / ((m + 1) as f64 * (m + 2) as f64);
        sum += term;
        if term < TERM_RATIO_CUTOFF * sum {
            return sum;
        }
        m += 1;
    }
}
