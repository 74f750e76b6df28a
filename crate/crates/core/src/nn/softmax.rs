use crate::{Error, Result};

/// `softmax(logits / t)` with max subtraction.
pub fn softmax_t(logits: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::param(format!(
            "temperature must be positive, got {t}"
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    Ok(softmax_unchecked(logits, t))
}

pub(crate) fn softmax_unchecked(logits: &[f64], t: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| ((z - max) / t).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// `log softmax(logits)` at temperature 1.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn uniform_logits() {
        let p = softmax_t(&[0.0, 0.0, 0.0], 1.0).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn huge_temperature_flattens() {
        let p = softmax_t(&[1.0, -1.0], 1e6).unwrap();
        assert!(p.iter().all(|v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn matches_direct_formula() {
        // e^2/(e^2+e+1), e/(e^2+e+1), 1/(e^2+e+1), evaluated at 30 digits with mpmath.
        let expected = [
            0.665_240_955_774_821_889_5,
            0.244_728_471_054_797_652_5,
            0.090_030_573_170_380_458,
        ];
        let p = softmax_t(&[2.0, 1.0, 0.0], 1.0).unwrap();
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_temperature() {
        assert!(softmax_t(&[1.0], 0.0).is_err());
        assert!(softmax_t(&[1.0], -1.0).is_err());
        assert!(softmax_t(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.5]), 0);
    }

    proptest! {
        #[test]
        fn sums_to_one_and_keeps_argmax(
            z in prop::collection::vec(-50.0f64..50.0, 1..12),
            t in 1e-3f64..1e3,
        ) {
            let p = softmax_t(&z, t).unwrap();
            let s: f64 = p.iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            // Probabilities can tie after rounding where logits do not; compare values.
            prop_assert_eq!(p[argmax(&p)], p[argmax(&z)]);
        }

        #[test]
        fn log_softmax_matches_log_of_softmax(z in prop::collection::vec(-20.0f64..20.0, 1..8)) {
            let p = softmax_t(&z, 1.0).unwrap();
            for (lp, p) in log_softmax(&z).iter().zip(&p) {
                prop_assert!((lp - p.ln()).abs() < 1e-12);
            }
        }
    }
}
