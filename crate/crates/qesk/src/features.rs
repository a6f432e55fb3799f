//! Per-graph feature vectors over the refined labels.
//!
//! The entropic representation weighs each code by the share of the graph's
//! total vertex entropy carried by its member vertices; the count
//! representation is the plain code histogram. Both are stored sparsely,
//! keyed by code: a code absent from a graph has no entry, so pairwise
//! distances over support unions equal distances over the full dense
//! alphabet embedding.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::spectral::EntropyVector;

/// Threshold below which a graph's total entropy counts as zero and the
/// uniform-mass fallback applies.
pub const ZERO_ENTROPY_EPS: f64 = 1e-12;

/// Sparse per-iteration entropy-share vectors; weights at one iteration
/// are nonnegative and sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropicFeature {
    // [iteration - 1] -> (code, weight), ascending by code
    levels: Vec<Vec<(u32, f64)>>,
}

impl EntropicFeature {
    pub fn iterations(&self) -> usize {
        self.levels.len()
    }

    /// `(code, weight)` pairs at 1-based `iteration`, ascending by code.
    pub fn level(&self, iteration: usize) -> &[(u32, f64)] {
        &self.levels[iteration - 1]
    }
}

/// Sparse per-iteration code histograms; counts at one iteration sum to
/// the graph's vertex count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountFeature {
    levels: Vec<Vec<(u32, u64)>>,
}

impl CountFeature {
    pub fn iterations(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, iteration: usize) -> &[(u32, u64)] {
        &self.levels[iteration - 1]
    }
}

/// Entropy-share feature of one graph from its per-iteration codes.
///
/// Per code: weight = (sum of member-vertex entropies) / (total entropy).
/// A graph with (numerically) zero total entropy falls back to uniform
/// vertex mass `1/n`, which keeps the weights summing to 1.
pub fn entropic_representation(
    per_iteration_codes: &[Vec<u32>],
    entropies: &EntropyVector,
) -> Result<EntropicFeature> {
    let n = entropies.len();
    for codes in per_iteration_codes {
        if codes.len() != n {
            return Err(Error::Contract(format!(
                "{} codes for {} entropies",
                codes.len(),
                n
            )));
        }
    }
    let total = entropies.total();
    let uniform = total < ZERO_ENTROPY_EPS;
    let levels = per_iteration_codes
        .iter()
        .map(|codes| {
            let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
            for (v, &code) in codes.iter().enumerate() {
                let mass = if uniform {
                    1.0 / n as f64
                } else {
                    entropies.values()[v] / total
                };
                *acc.entry(code).or_insert(0.0) += mass;
            }
            acc.into_iter().collect()
        })
        .collect();
    Ok(EntropicFeature { levels })
}

/// Code histogram of one graph from its per-iteration codes.
pub fn count_representation(per_iteration_codes: &[Vec<u32>]) -> CountFeature {
    let levels = per_iteration_codes
        .iter()
        .map(|codes| {
            let mut acc: BTreeMap<u32, u64> = BTreeMap::new();
            for &code in codes {
                *acc.entry(code).or_insert(0) += 1;
            }
            acc.into_iter().collect()
        })
        .collect();
    CountFeature { levels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphio::{adjacency, Graph};
    use crate::spectral::{average_mixing_matrix, eigendecompose_symmetric, vertex_entropies};
    use crate::testutil::{self, GROUP_TOL};
    use approx::assert_abs_diff_eq;

    fn entropies_of(g: &Graph) -> EntropyVector {
        let spec = eigendecompose_symmetric(&adjacency(g), GROUP_TOL).unwrap();
        vertex_entropies(&average_mixing_matrix(&spec))
    }

    #[test]
    fn uniform_code_gets_all_mass() {
        let g = Graph::new(3, [(0, 1), (1, 2)], None).unwrap();
        let f = entropic_representation(&[vec![4, 4, 4]], &entropies_of(&g)).unwrap();
        assert_eq!(f.level(1).len(), 1);
        assert_abs_diff_eq!(f.level(1)[0].1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn three_path_weights() {
        let g = Graph::new(3, [(0, 1), (1, 2)], None).unwrap();
        // endpoints share code 0, center has code 1
        let f = entropic_representation(&[vec![0, 1, 0]], &entropies_of(&g)).unwrap();
        let level = f.level(1);
        assert_eq!(level.len(), 2);
        assert_eq!(level[0].0, 0);
        assert_abs_diff_eq!(level[0].1, testutil::PATH3_WEIGHT_END, epsilon = 1e-12);
        assert_abs_diff_eq!(level[1].1, testutil::PATH3_WEIGHT_CENTER, epsilon = 1e-12);
    }

    #[test]
    fn zero_entropy_fallback_is_uniform_mass() {
        let g = Graph::new(3, [], None).unwrap();
        let f = entropic_representation(&[vec![7, 8, 8]], &entropies_of(&g)).unwrap();
        let level = f.level(1);
        assert_abs_diff_eq!(level[0].1, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(level[1].1, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn weights_sum_to_one() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let g = testutil::random_graph(&mut rng, 8, 0.3);
            let codes: Vec<u32> = g.degrees().iter().map(|&d| d as u32).collect();
            let f = entropic_representation(&[codes], &entropies_of(&g)).unwrap();
            let sum: f64 = f.level(1).iter().map(|&(_, w)| w).sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
            assert!(f.level(1).iter().all(|&(_, w)| w >= 0.0));
        }
    }

    #[test]
    fn entropic_weights_invariant_to_entropy_rescaling() {
        // Scaling all entropies by a constant (e.g. a log-base change)
        // leaves the weights unchanged.
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3)], None).unwrap();
        let h = entropies_of(&g);
        let codes = vec![vec![0, 1, 1, 0]];
        let f1 = entropic_representation(&codes, &h).unwrap();
        let scaled = EntropyVector::from_values(h.values().iter().map(|&x| 3.5 * x).collect());
        let f2 = entropic_representation(&codes, &scaled).unwrap();
        for (&(c1, w1), &(c2, w2)) in f1.level(1).iter().zip(f2.level(1)) {
            assert_eq!(c1, c2);
            assert_abs_diff_eq!(w1, w2, epsilon = 1e-12);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let g = Graph::new(2, [(0, 1)], None).unwrap();
        assert!(matches!(
            entropic_representation(&[vec![0, 0, 0]], &entropies_of(&g)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn count_histograms() {
        let f = count_representation(&[vec![0, 0, 1]]);
        assert_eq!(f.level(1), &[(0, 2), (1, 1)]);

        let empty = count_representation(&[vec![]]);
        assert!(empty.level(1).is_empty());

        let triangle = count_representation(&[vec![2, 2, 2]]);
        assert_eq!(triangle.level(1), &[(2, 3)]);
    }
}
