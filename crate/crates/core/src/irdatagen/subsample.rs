use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::patchmath::{Deviation, Normalized};

use super::samples::LabeledSample;

const LANES: usize = 8;

/// Eight independent partial sums so the loop vectorizes; lengths are
/// padded to a multiple of eight.
fn dot32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; LANES];
    for (x, y) in a.chunks_exact(LANES).zip(b.chunks_exact(LANES)) {
        for k in 0..LANES {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum()
}

/// Unit vectors stored row-major and zero padded. Flat patches get an
/// all-zero row and a flag.
struct Prepared {
    stride: usize,
    rows: Vec<f32>,
    flat: Vec<bool>,
}

impl Prepared {
    fn new(patches: &[Patch]) -> Self {
        let n = patches[0].len();
        let stride = n.div_ceil(LANES) * LANES;
        let mut rows = vec![0.0f32; stride * patches.len()];
        let mut flat = vec![false; patches.len()];
        for (i, p) in patches.iter().enumerate() {
            match Normalized::of(p.values(), Deviation::Std) {
                Ok(u) => {
                    for (dst, &v) in rows[i * stride..].iter_mut().zip(u.values()) {
                        *dst = v as f32;
                    }
                }
                Err(_) => flat[i] = true,
            }
        }
        Self { stride, rows, flat }
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.stride..(i + 1) * self.stride]
    }

    /// Correlation distance `1 − ncc`. Flat patches are all at distance 0
    /// from each other and 1 from everything else. Single precision is
    /// plenty for ranking.
    fn distance(&self, i: usize, j: usize) -> f32 {
        match (self.flat[i], self.flat[j]) {
            (false, false) => (1.0 - dot32(self.row(i), self.row(j))).max(0.0),
            (true, true) => 0.0,
            _ => 1.0,
        }
    }
}

/// Greedy farthest-point selection of `budget` patches under the
/// correlation distance, starting from a seeded random patch. Ties go to the
/// lowest index. Returns the chosen indices in ascending order.
pub fn farthest_point_indices(patches: &[Patch], budget: usize, seed: u64) -> Result<Vec<usize>> {
    if patches.is_empty() {
        return Err(Error::EmptyInput);
    }
    if budget > patches.len() {
        return Err(Error::InvalidConfig(format!(
            "budget {budget} exceeds the {} available patches",
            patches.len()
        )));
    }
    if budget == patches.len() {
        return Ok((0..budget).collect());
    }
    if patches.iter().any(|p| p.len() != patches[0].len()) {
        return Err(Error::SizeMismatch(format!(
            "all patches must have {} pixels",
            patches[0].len()
        )));
    }
    let prepared = Prepared::new(patches);

    let mut chosen = Vec::with_capacity(budget);
    // candidates still unchosen, kept in ascending index order
    let mut remaining: Vec<usize> = (0..patches.len()).collect();
    let mut nearest = vec![f32::INFINITY; patches.len()];
    let mut next = ChaCha8Rng::seed_from_u64(seed).random_range(0..patches.len());
    while chosen.len() < budget {
        chosen.push(next);
        remaining.retain(|&i| i != next);
        let mut best = (f32::NEG_INFINITY, 0);
        for &i in &remaining {
            let d = prepared.distance(i, next);
            if d < nearest[i] {
                nearest[i] = d;
            }
            if nearest[i] > best.0 {
                best = (nearest[i], i);
            }
        }
        next = best.1;
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Keeps `budget` mutually dissimilar negatives (compared on their cores).
pub fn subsample_negatives(
    negatives: &[LabeledSample],
    budget: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    let cores: Vec<Patch> = negatives.iter().map(LabeledSample::core).collect();
    Ok(farthest_point_indices(&cores, budget, seed)?
        .into_iter()
        .map(|i| negatives[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irdatagen::{Label, CONTEXT_SIZE};
    use rand::Rng;

    fn sample(p: Patch) -> LabeledSample {
        LabeledSample::new(Label::Negative, p).unwrap()
    }

    #[test]
    fn full_budget_is_the_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set: Vec<_> = (0..10)
            .map(|_| {
                sample(Patch::from_fn(CONTEXT_SIZE, CONTEXT_SIZE, |_, _| {
                    rng.random_range(0.0..1.0)
                }))
            })
            .collect();
        assert_eq!(subsample_negatives(&set, 10, 3).unwrap(), set);
    }

    #[test]
    fn duplicates_collapse() {
        let p = Patch::from_fn(CONTEXT_SIZE, CONTEXT_SIZE, |r, c| (r * c) as f64);
        let set = vec![sample(p.clone()), sample(p)];
        assert_eq!(subsample_negatives(&set, 1, 0).unwrap().len(), 1);
    }

    #[test]
    fn one_representative_per_cluster() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let centres: Vec<Patch> = (0..3)
            .map(|_| Patch::from_fn(15, 15, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let mut patches = Vec::new();
        let mut cluster = Vec::new();
        for (k, c) in centres.iter().enumerate() {
            for _ in 0..10 {
                patches.push(c.map(|v| v + rng.random_range(-0.05..0.05)));
                cluster.push(k);
            }
        }
        for seed in 0..10 {
            let picked = farthest_point_indices(&patches, 3, seed).unwrap();
            let mut ks: Vec<usize> = picked.iter().map(|&i| cluster[i]).collect();
            ks.sort_unstable();
            assert_eq!(ks, vec![0, 1, 2]);
        }
    }

    #[test]
    fn flat_patches_share_one_bucket() {
        let flat = Patch::filled(15, 15, 3.0);
        let other_flat = Patch::filled(15, 15, 8.0);
        let textured = Patch::from_fn(15, 15, |r, c| ((r * 7 + c * 3) % 5) as f64);
        let picked = farthest_point_indices(&[flat, other_flat, textured], 2, 0).unwrap();
        assert!(picked.contains(&2));
        assert_eq!(picked.len(), 2);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            farthest_point_indices(&[], 0, 0),
            Err(Error::EmptyInput)
        ));
        assert!(farthest_point_indices(&[Patch::filled(3, 3, 1.0)], 2, 0).is_err());
    }
}
