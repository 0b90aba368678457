use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the foreground slot of a training sample comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleSource {
    Foreground(usize),
    /// A second background frame; the sample has empty targets.
    Background(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePair {
    pub foreground: SampleSource,
    pub background: usize,
}

/// Pairs each foreground frame with a uniformly drawn background frame and
/// appends `round(background_ratio * fg_count)` pure-background samples
/// (`round(background_ratio * bg_count)` when there is no foreground).
pub fn pair_samples(
    fg_count: usize,
    bg_count: usize,
    background_ratio: f64,
    seed: u64,
) -> Result<Vec<SamplePair>> {
    if !(0.0..=1.0).contains(&background_ratio) {
        return Err(Error::Config(format!(
            "background ratio {background_ratio} outside [0, 1]"
        )));
    }
    let basis = if fg_count > 0 { fg_count } else { bg_count };
    let pure = (background_ratio * basis as f64).round() as usize;
    if bg_count == 0 {
        if fg_count == 0 && pure == 0 {
            return Ok(Vec::new());
        }
        return Err(Error::Config("pairing needs at least one background frame".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(fg_count + pure);
    for i in 0..fg_count {
        pairs.push(SamplePair {
            foreground: SampleSource::Foreground(i),
            background: rng.random_range(0..bg_count),
        });
    }
    for _ in 0..pure {
        let fg = rng.random_range(0..bg_count);
        let mut bg = rng.random_range(0..bg_count);
        if bg_count > 1 && bg == fg {
            bg = (bg + 1 + rng.random_range(0..bg_count - 1)) % bg_count;
        }
        pairs.push(SamplePair {
            foreground: SampleSource::Background(fg),
            background: bg,
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn background_only_when_no_foreground() {
        let pairs = pair_samples(0, 40, 0.25, 1).unwrap();
        assert_eq!(pairs.len(), 10);
        for p in &pairs {
            let SampleSource::Background(fg) = p.foreground else {
                panic!("expected pure background pair");
            };
            assert_ne!(fg, p.background);
        }
    }

    #[test]
    fn one_pair_per_foreground_frame() {
        let pairs = pair_samples(100, 7, 0.25, 2).unwrap();
        assert_eq!(pairs.len(), 125);
        for (i, p) in pairs.iter().take(100).enumerate() {
            assert_eq!(p.foreground, SampleSource::Foreground(i));
            assert!(p.background < 7);
        }
        assert_eq!(pairs, pair_samples(100, 7, 0.25, 2).unwrap());
        assert_ne!(pairs, pair_samples(100, 7, 0.25, 3).unwrap());
    }

    #[test]
    fn background_draws_are_uniform() {
        let bins = 10;
        let draws = 10_000;
        let pairs = pair_samples(draws, bins, 0.0, 4).unwrap();
        let mut hist = vec![0usize; bins];
        for p in &pairs {
            hist[p.background] += 1;
        }
        let expected = draws as f64 / bins as f64;
        let chi2: f64 = hist.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 9 dof, p = 0.001 critical value
        assert!(chi2 < 27.88, "chi2 {chi2}, hist {hist:?}");
    }

    #[test]
    fn rejects_missing_background() {
        assert!(pair_samples(3, 0, 0.25, 0).is_err());
        assert!(pair_samples(3, 2, 1.5, 0).is_err());
        assert!(pair_samples(0, 0, 0.25, 0).unwrap().is_empty());
    }
}
