use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded uniform reservoir sample (Algorithm R).
///
/// Returns `min(k, N)` items in their original stream order. The result is a
/// pure function of the sequence, `k` and `seed`.
pub fn reservoir_sample<T, I>(stream: I, k: usize, seed: u64) -> Vec<T>
where
    I: IntoIterator<Item = T>,
{
    if k == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reservoir: Vec<(usize, T)> = Vec::with_capacity(k);
    for (i, item) in stream.into_iter().enumerate() {
        if i < k {
            reservoir.push((i, item));
        } else {
            let j = rng.random_range(0..=i);
            if j < k {
                reservoir[j] = (i, item);
            }
        }
    }
    reservoir.sort_by_key(|(i, _)| *i);
    reservoir.into_iter().map(|(_, t)| t).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn five_of_ten_is_deterministic() {
        let a = reservoir_sample(0..10, 5, 7);
        let b = reservoir_sample(0..10, 5, 7);
        assert_eq!(a.len(), 5);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn k_larger_than_stream_returns_everything() {
        assert_eq!(reservoir_sample(vec!['a', 'b', 'c'], 5, 1), vec!['a', 'b', 'c']);
    }

    #[test]
    fn k_zero_is_empty() {
        assert!(reservoir_sample(0..100, 0, 3).is_empty());
    }

    proptest! {
        #[test]
        fn sample_is_subset_of_size_min_k_n(n in 0usize..200, k in 0usize..50, seed: u64) {
            let s = reservoir_sample(0..n, k, seed);
            prop_assert_eq!(s.len(), k.min(n));
            prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(s.iter().all(|&x| x < n));
        }
    }
}
