use rand::Rng;

use super::SearchError;

/// Standard Gumbel draw `-ln(-ln U)`.
pub fn sample_gumbel(rng: &mut (impl Rng + ?Sized)) -> f64 {
    let u = crate::env::uniform_open01(rng);
    -(-u.ln()).ln()
}

/// Indices of the `k` largest `g(a) + logit(a)` with the given noise, in
/// descending score order (lowest index on ties).
pub fn top_k_with_noise(logits: &[f64], noise: &[f64], k: usize) -> Result<Vec<usize>, SearchError> {
    let finite: Vec<usize> = (0..logits.len()).filter(|&i| logits[i].is_finite()).collect();
    if k > finite.len() {
        return Err(SearchError::Config(format!("cannot sample {k} of {} finite logits", finite.len())));
    }
    let mut idx = finite;
    idx.sort_by(|&a, &b| (noise[b] + logits[b]).total_cmp(&(noise[a] + logits[a])).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

/// Samples `k` distinct indices without replacement from `softmax(logits)`
/// via the Gumbel-Top-k trick. Returns the indices and the full noise vector.
pub fn gumbel_top_k(
    logits: &[f64],
    k: usize,
    rng: &mut (impl Rng + ?Sized),
) -> Result<(Vec<usize>, Vec<f64>), SearchError> {
    let noise: Vec<f64> = logits.iter().map(|_| sample_gumbel(rng)).collect();
    Ok((top_k_with_noise(logits, &noise, k)?, noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_k_returns_every_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (mut a, _) = gumbel_top_k(&[0.1, 2.0, -1.0, 0.0], 4, &mut rng).unwrap();
        a.sort();
        assert_eq!(a, vec![0, 1, 2, 3]);
    }

    #[test]
    fn injected_noise_decides_under_uniform_logits() {
        let mut a = top_k_with_noise(&[0.0; 3], &[2.0, 0.0, -1.0], 2).unwrap();
        a.sort();
        assert_eq!(a, vec![0, 1]);
    }

    #[test]
    fn too_many_samples_is_an_error() {
        assert!(top_k_with_noise(&[0.0, f64::NEG_INFINITY], &[0.0, 0.0], 2).is_err());
    }
}
