//! Test-support helpers: frozen fixture constants, seeded random graphs,
//! and invariant assertions shared by unit and integration tests. Not part
//! of the public API surface.

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::Rng;

use crate::graphio::Graph;
use crate::spectral::{MixingMatrix, Spectrum};

/// Eigenvalue grouping tolerance used throughout the tests.
pub const GROUP_TOL: f64 = 1e-8;

pub const LN_2: f64 = 0.693_147_180_559_945_3;

// Hand eigendecomposition of the 3-path: Q rows (3/8, 1/4, 3/8) and
// (1/4, 1/2, 1/4), entropies evaluated to 20 digits and frozen.
pub const PATH3_END_ENTROPY: f64 = 1.082_195_530_038_767_3;
pub const PATH3_CENTER_ENTROPY: f64 = 1.039_720_770_839_918;

// Entropic weights of the 3-path under endpoint/center codes:
// E(end) = 2 h_e / (2 h_e + h_c), E(center) = h_c / (2 h_e + h_c).
pub const PATH3_WEIGHT_END: f64 = 0.675_504_219_045_248_3;
pub const PATH3_WEIGHT_CENTER: f64 = 0.324_495_780_954_751_7;

// One QESK level between the 3-path feature and a single-code feature:
// exp(-sqrt(2) * E(center)).
pub const QESK_LEVEL_PATH3_VS_SINGLE_CODE: f64 = 0.631_974_436_417_992_4;

// One QESK level between disjoint single-code features: exp(-sqrt(2)).
pub const EXP_NEG_SQRT_2: f64 = 0.243_116_734_434_214_2;

/// Repository data directory, overridable via `QESK_DATA_DIR`.
pub fn data_dir() -> PathBuf {
    match std::env::var_os("QESK_DATA_DIR") {
        Some(d) => PathBuf::from(d),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

/// Uniform random connected graph with `min_n..=max_n` vertices: a random
/// spanning tree plus each remaining pair independently with probability 0.25.
pub fn random_connected_graph<R: Rng>(rng: &mut R, min_n: usize, max_n: usize) -> Graph {
    let n = rng.gen_range(min_n..=max_n);
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u as u32, v as u32));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(0.25) {
                edges.push((u as u32, v as u32));
            }
        }
    }
    Graph::new(n, edges, None).unwrap()
}

/// Random graph that may be disconnected (edge probability `p`).
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(p) {
                edges.push((u as u32, v as u32));
            }
        }
    }
    Graph::new(n, edges, None).unwrap()
}

/// Random permutation of `0..n`.
pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// Relabel a graph's vertices through `perm` (vertex v becomes perm[v]).
pub fn permute_graph(g: &Graph, perm: &[usize]) -> Graph {
    let edges = g
        .edges()
        .iter()
        .map(|&(u, v)| (perm[u as usize] as u32, perm[v as usize] as u32));
    let attrs = g
        .initial_attributes()
        .map(|a| {
            let mut out = vec![0i64; a.len()];
            for (v, &x) in a.iter().enumerate() {
                out[perm[v]] = x;
            }
            out
        });
    Graph::new(g.vertex_count(), edges, attrs).unwrap()
}

/// Idempotence, pairwise orthogonality, completeness, and reconstruction
/// of the grouped eigendecomposition, all within `tol` per entry.
pub fn assert_spectrum_invariants(spec: &Spectrum, a: &DMatrix<f64>, tol: f64) {
    let n = spec.dim();
    let projectors = spec.projectors();
    let mut completeness = DMatrix::zeros(n, n);
    let mut reconstruction = DMatrix::zeros(n, n);
    for (j, p) in projectors.iter().enumerate() {
        let idem = (p * p - p).abs().max();
        assert!(idem < tol, "projector {j} idempotence defect {idem:.3e}");
        for (k, q) in projectors.iter().enumerate().skip(j + 1) {
            let ortho = (p * q).abs().max();
            assert!(ortho < tol, "projectors {j},{k} orthogonality defect {ortho:.3e}");
        }
        completeness += p;
        reconstruction += p * spec.eigenvalues()[j];
    }
    let comp = (completeness - DMatrix::identity(n, n)).abs().max();
    assert!(comp < tol, "completeness defect {comp:.3e}");
    let rec = (reconstruction - a).abs().max();
    assert!(rec < tol, "reconstruction defect {rec:.3e}");
}

/// Row sums, column sums, nonnegativity, and symmetry of a mixing matrix.
pub fn assert_doubly_stochastic(q: &MixingMatrix, tol: f64) {
    let n = q.dim();
    let m = q.values();
    for v in 0..n {
        let row: f64 = m.row(v).iter().sum();
        let col: f64 = m.column(v).iter().sum();
        assert!((row - 1.0).abs() < tol, "row {v} sums to {row}");
        assert!((col - 1.0).abs() < tol, "column {v} sums to {col}");
    }
    for v in 0..n {
        for u in 0..n {
            assert!(m[(v, u)] >= 0.0);
            assert!(
                (m[(v, u)] - m[(u, v)]).abs() < tol,
                "asymmetry at ({v}, {u})"
            );
        }
    }
}
