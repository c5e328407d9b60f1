//! Central finite-difference gradient verification.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default number of coordinates sampled by [`grad_check`].
pub const GRAD_CHECK_COORDS: usize = 200;

/// Compares `analytic` against central finite differences of `loss_fn` at
/// `params`, on a seeded subsample of at most `max_coords` coordinates (all
/// coordinates when the vector is small enough). Returns the worst relative
/// error, |a - n| / max(|a| + |n|, 1e-8).
pub fn grad_check<F>(
    mut loss_fn: F,
    params: &[f64],
    analytic: &[f64],
    epsilon: f64,
    max_coords: usize,
    seed: u64,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in (0, 1e-2], got {epsilon}"
        )));
    }
    if params.len() != analytic.len() {
        return Err(Error::InvalidInput(format!(
            "gradient length {} does not match parameter length {}",
            analytic.len(),
            params.len()
        )));
    }
    if max_coords == 0 {
        return Err(Error::InvalidInput("max_coords must be positive".into()));
    }

    let coords: Vec<usize> = if params.len() <= max_coords {
        (0..params.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<usize> = sample(&mut rng, params.len(), max_coords).into_iter().collect();
        picked.sort_unstable();
        picked
    };

    let mut scratch = params.to_vec();
    let mut worst: f64 = 0.0;
    for &i in &coords {
        let orig = scratch[i];
        scratch[i] = orig + epsilon;
        let plus = loss_fn(&scratch);
        scratch[i] = orig - epsilon;
        let minus = loss_fn(&scratch);
        scratch[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let rel = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn linear_model_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let coef: Vec<f64> = (0..30).map(|_| rng.random_range(0.2..2.0)).collect();
        let params: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = coef.clone();
        let loss = move |p: &[f64]| -> f64 { p.iter().zip(&c).map(|(x, a)| x * a).sum() };
        let err = grad_check(loss, &params, &coef, 1e-5, GRAD_CHECK_COORDS, 0).unwrap();
        assert!(err < 1e-8, "linear model error {err}");
    }

    #[test]
    fn quadratic_model_matches() {
        let params = vec![0.3, -1.2, 2.0, 0.0];
        let analytic: Vec<f64> = params.iter().map(|&x| 2.0 * x).collect();
        let loss = |p: &[f64]| -> f64 { p.iter().map(|x| x * x).sum() };
        let err = grad_check(loss, &params, &analytic, 1e-5, GRAD_CHECK_COORDS, 1).unwrap();
        assert!(err < 1e-7, "quadratic error {err}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let params = vec![0.5, -0.75, 1.5];
        let mut analytic: Vec<f64> = params.iter().map(|&x| 2.0 * x).collect();
        analytic[1] *= 2.0;
        let loss = |p: &[f64]| -> f64 { p.iter().map(|x| x * x).sum() };
        let err = grad_check(loss, &params, &analytic, 1e-5, GRAD_CHECK_COORDS, 2).unwrap();
        assert!(err > 0.1, "negative control error {err}");
    }

    #[test]
    fn epsilon_out_of_range_rejected() {
        let loss = |_: &[f64]| 0.0;
        assert!(grad_check(loss, &[0.0], &[0.0], 0.0, 10, 0).is_err());
        let loss = |_: &[f64]| 0.0;
        assert!(grad_check(loss, &[0.0], &[0.0], 0.1, 10, 0).is_err());
    }

    #[test]
    fn subsampling_is_deterministic() {
        let n = 1000;
        let params = vec![0.1; n];
        let analytic = vec![0.2; n];
        let loss = |p: &[f64]| -> f64 { p.iter().map(|x| x * x).sum() };
        let a = grad_check(loss, &params, &analytic, 1e-4, 50, 7).unwrap();
        let loss = |p: &[f64]| -> f64 { p.iter().map(|x| x * x).sum() };
        let b = grad_check(loss, &params, &analytic, 1e-4, 50, 7).unwrap();
        assert_eq!(a, b);
    }
}
