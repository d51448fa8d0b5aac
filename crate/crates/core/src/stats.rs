//! Sample statistics for Monte Carlo estimates.

use crate::scalar::Real;

/// Mean with its standard error; `std_error` is `None` below two samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub mean: T,
    pub std_error: Option<T>,
    pub samples: usize,
}

pub fn mean<T: Real>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().fold(T::zero(), |a, &b| a + b) / T::from_usize_lossy(xs.len()))
}

/// Unbiased sample standard deviation.
pub fn sample_std<T: Real>(xs: &[T]) -> Option<T> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss = xs.iter().fold(T::zero(), |a, &x| a + (x - m) * (x - m));
    Some((ss / T::from_usize_lossy(xs.len() - 1)).sqrt())
}

/// `std/√n`.
pub fn std_error<T: Real>(xs: &[T]) -> Option<T> {
    sample_std(xs).map(|s| s / T::from_usize_lossy(xs.len()).sqrt())
}

/// 95% normal-approximation half-width, `1.96·std/√n`.
pub fn confidence_halfwidth<T: Real>(xs: &[T]) -> Option<T> {
    std_error(xs).map(|se| T::lit(1.96) * se)
}

pub fn estimate<T: Real>(xs: &[T]) -> Estimate<T> {
    Estimate {
        mean: mean(xs).unwrap_or_else(T::zero),
        std_error: std_error(xs),
        samples: xs.len(),
    }
}

/// `sqrt(a² + b²)` of two standard errors.
pub fn combined_std_error<T: Real>(a: T, b: T) -> T {
    (a * a + b * b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn halfwidth_of_constant_is_zero() {
        assert_eq!(confidence_halfwidth(&[3.0, 3.0, 3.0]), Some(0.0));
    }

    #[test]
    fn halfwidth_of_zero_two() {
        // std of (0, 2) is √2, over √2 samples -> 1
        let h = confidence_halfwidth(&[0.0_f64, 2.0]).unwrap();
        assert!((h - 1.96).abs() < 1e-15);
    }

    #[test]
    fn undefined_below_two_samples() {
        assert_eq!(confidence_halfwidth::<f64>(&[1.0]), None);
        assert_eq!(confidence_halfwidth::<f64>(&[]), None);
    }

    #[test]
    fn halfwidth_halves_with_four_times_the_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let draw = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| <f64 as Real>::standard_normal(rng)).collect()
        };
        let a = confidence_halfwidth(&draw(40_000, &mut rng)).unwrap();
        let b = confidence_halfwidth(&draw(160_000, &mut rng)).unwrap();
        assert!((a / b - 2.0).abs() < 0.1, "ratio {}", a / b);
    }
}
