//! Closed-form bound calculators and proof-derived diagnostics.

use crate::error::{Error, Result};

/// Largest index (1-based) of a nonzero coordinate; 0 for the zero vector.
/// Measures coordinate discovery on the worst-case instance.
pub fn prog(x: &[f64]) -> usize {
    x.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1)
}

/// Constants of the hard instance: `C = M√T/(1+√(δT))` and
/// `μ = 2M/(R(1+√(δT)))`. Every consumer evaluates these through this one
/// helper so that derived quantities compare bit-for-bit.
pub fn worst_case_constants(r: f64, m: f64, delta: f64, t: usize) -> (f64, f64) {
    let root = 1.0 + (delta * t as f64).sqrt();
    let c = m * (t as f64).sqrt() / root;
    let mu = 2.0 * m / (r * root);
    (c, mu)
}

/// Optimality gap forced on any output that has not discovered all `T`
/// hard coordinates: `C²/(2μT)`.
pub fn worst_case_lower_gap(r: f64, m: f64, delta: f64, t: usize) -> f64 {
    let (c, mu) = worst_case_constants(r, m, delta, t);
    c * c / (2.0 * mu * t as f64)
}

/// Closed-form bounds for a parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Guaranteed expected gap of Safe-EF with the theoretical step size and
    /// threshold: `32MR/√(δ_s δ T)`.
    pub upper_gap: f64,
    /// Gap any compressed first-order method must suffer on the hard
    /// instance: `C²/(2μT)`, evaluated from the definitions of C and μ.
    pub lower_gap: f64,
    /// Worst-case bound on the averaged error buffer under deterministic
    /// compressors: `4(1−δ)/δ² · M²`.
    pub error_buffer_bound: f64,
    pub r: f64,
    pub m: f64,
    pub delta: f64,
    pub delta_s: f64,
    pub t: usize,
}

/// Evaluate all three closed forms.
pub fn bounds(r: f64, m: f64, delta: f64, delta_s: f64, t: usize) -> BoundReport {
    BoundReport {
        upper_gap: 32.0 * m * r / (delta_s * delta * t as f64).sqrt(),
        lower_gap: worst_case_lower_gap(r, m, delta, t),
        error_buffer_bound: 4.0 * (1.0 - delta) / (delta * delta) * m * m,
        r,
        m,
        delta,
        delta_s,
        t,
    }
}

/// Least-squares slope of `log(gap)` against `log(T)`. All points are used;
/// no endpoint fitting.
pub fn rate_slope(t_values: &[f64], gaps: &[f64]) -> Result<f64> {
    if t_values.len() != gaps.len() || t_values.len() < 3 {
        return Err(Error::InvalidArgument("rate_slope needs at least 3 matched points".into()));
    }
    if t_values.iter().chain(gaps).any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("rate_slope needs positive finite inputs".into()));
    }
    let xs: Vec<f64> = t_values.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = gaps.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prog_examples() {
        assert_eq!(prog(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(prog(&[1.0, 0.0, 0.0]), 1);
        assert_eq!(prog(&[0.0, 3.0, 0.0, -2.0, 0.0]), 4);
        assert_eq!(prog(&[]), 0);
    }

    #[test]
    fn slope_recovers_synthetic_exponents() {
        let ts = [1e3, 4e3, 1.6e4];
        let half: Vec<f64> = ts.iter().map(|t: &f64| 3.0 * t.powf(-0.5)).collect();
        assert!((rate_slope(&ts, &half).unwrap() + 0.5).abs() < 1e-9);

        let flat = [2.0, 2.0, 2.0];
        assert!(rate_slope(&ts, &flat).unwrap().abs() < 1e-9);

        let one: Vec<f64> = ts.iter().map(|t| 5.0 / t).collect();
        assert!((rate_slope(&ts, &one).unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn slope_rejects_bad_inputs() {
        assert!(rate_slope(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(rate_slope(&[1.0, 2.0, 3.0], &[1.0, -2.0, 3.0]).is_err());
    }

    #[test]
    fn bounds_plug_ins() {
        // delta = 1 kills the error-buffer bound.
        let b = bounds(1.0, 1.0, 1.0, 1.0, 100);
        assert_eq!(b.error_buffer_bound, 0.0);
        assert!((b.upper_gap - 3.2).abs() < 1e-12);

        // R = M = 1, delta = 0.25, T = 16: C = 4/3, mu = 2/3, gap = 1/12.
        let (c, mu) = worst_case_constants(1.0, 1.0, 0.25, 16);
        assert!((c - 4.0 / 3.0).abs() < 1e-12);
        assert!((mu - 2.0 / 3.0).abs() < 1e-12);
        let b = bounds(1.0, 1.0, 0.25, 1.0, 16);
        assert!((b.lower_gap - 1.0 / 12.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn prog_is_support_max(x in proptest::collection::vec(-1f64..1.0, 0..32)) {
                let p = prog(&x);
                prop_assert!(x.iter().skip(p).all(|&v| v == 0.0));
                if p > 0 {
                    prop_assert!(x[p - 1] != 0.0);
                }
            }
        }
    }
}
