//! Probability and distance primitives: softmax, KL divergence, Euclidean
//! distance. KL over softmax outputs is the default output-space metric for
//! the Lipschitz ratio; Euclidean distance is the input-space metric.

use crate::error::{Error, Result};

/// Floor applied to the second KL argument before taking logarithms, keeping
/// the divergence and its gradients bounded near the simplex boundary.
pub const KL_FLOOR: f64 = 1e-12;

/// Numerically stable softmax (max-subtraction).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::EmptyInput("softmax"));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("softmax logits"));
    }
    Ok(softmax_unchecked(logits))
}

/// Softmax without the input checks, for hot inner loops on already
/// validated data.
#[inline]
pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// log(sum_i exp(z_i)), stable.
#[inline]
pub(crate) fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

fn check_probability(p: &[f64], name: &str) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotAProbability(format!("{name} sums to {sum}")));
    }
    if p.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
        return Err(Error::NotAProbability(format!("{name} has a negative or non-finite entry")));
    }
    Ok(())
}

/// KL(p || q) with 0 log 0 := 0 and q floored at [`KL_FLOOR`].
///
/// Tiny negative results from rounding are clamped to zero, so the output is
/// always >= 0 for valid inputs.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch { expected: vec![p.len()], got: vec![q.len()] });
    }
    check_probability(p, "p")?;
    check_probability(q, "q")?;
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            sum += pi * (pi.ln() - qi.max(KL_FLOOR).ln());
        }
    }
    if sum < 0.0 && sum > -1e-12 {
        sum = 0.0;
    }
    Ok(sum)
}

/// Euclidean distance between equally shaped vectors.
pub fn l2_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch { expected: vec![a.len()], got: vec![b.len()] });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Shannon entropy of a probability vector, in nats.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;
    use proptest::prelude::*;

    #[test]
    fn softmax_symmetry() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_matches_direct_evaluation() {
        // Frozen from an independent exp/sum script.
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        let expected = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn softmax_errors() {
        assert!(matches!(softmax(&[]), Err(Error::EmptyInput(_))));
        assert!(matches!(softmax(&[1.0, f64::NAN]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn kl_identity_and_analytic() {
        let p = [0.2, 0.3, 0.5];
        assert!(kl_divergence(&p, &p).unwrap() <= 1e-12);
        let v = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        // Frozen from an independent direct evaluation.
        let v = kl_divergence(&[0.3, 0.7], &[0.6, 0.4]).unwrap();
        assert!((v - 0.18378689738681217).abs() < 1e-15);
    }

    #[test]
    fn kl_rejects_mismatch_and_bad_simplex() {
        assert!(matches!(
            kl_divergence(&[1.0], &[0.5, 0.5]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            kl_divergence(&[0.9, 0.2], &[0.5, 0.5]),
            Err(Error::NotAProbability(_))
        ));
    }

    #[test]
    fn l2_basics() {
        assert_eq!(l2_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(l2_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        // Frozen from an independent elementwise computation.
        let v = l2_distance(&[0.25, -1.5, 2.0], &[-0.75, 0.5, 0.125]).unwrap();
        assert!((v - 2.918154382482188).abs() < 1e-15);
        assert!(l2_distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn random_prob(rng: &mut RngState, s: usize) -> Vec<f64> {
        let mut p: Vec<f64> = (0..s).map(|_| rng.next_f64() + 1e-6).collect();
        let sum: f64 = p.iter().sum();
        for v in &mut p {
            *v /= sum;
        }
        p
    }

    #[test]
    fn softmax_is_simplex_valued_for_wide_logits() {
        let mut rng = RngState::new(77);
        for _ in 0..1000 {
            let s = 1 + rng.index(8);
            let z: Vec<f64> = (0..s).map(|_| rng.uniform(-50.0, 50.0)).collect();
            let p = softmax(&z).unwrap();
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn kl_nonnegative_on_random_pairs() {
        let mut rng = RngState::new(78);
        for _ in 0..1000 {
            let s = 2 + rng.index(6);
            let p = random_prob(&mut rng, s);
            let q = random_prob(&mut rng, s);
            assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        }
    }

    proptest! {
        #[test]
        fn softmax_shift_invariance(z in proptest::collection::vec(-20.0f64..20.0, 1..6), c in -10.0f64..10.0) {
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let a = softmax(&z).unwrap();
            let b = softmax(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
