//! Average mixing matrix of the continuous-time quantum walk.
//!
//! The walk's Hamiltonian is the graph adjacency matrix. Its Cesàro-mean
//! mixing matrix has the closed form `Q = Σ_j P_j ∘ P_j`, where `P_j` is
//! the orthogonal projector onto the eigenspace of the j-th distinct
//! eigenvalue and `∘` is the entrywise product. All computation here goes
//! through that spectral expression; no time evolution is simulated.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix, grouped by distinct eigenvalue.
///
/// `eigenvalues[j]` is the mean of the j-th cluster of raw eigenvalues and
/// `projectors[j]` the orthogonal projector onto its eigenspace. Projectors
/// are idempotent, mutually orthogonal, and sum to the identity.
#[derive(Debug, Clone)]
pub struct Spectrum {
    dim: usize,
    eigenvalues: Vec<f64>,
    projectors: Vec<DMatrix<f64>>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Distinct eigenvalues, strictly increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn projectors(&self) -> &[DMatrix<f64>] {
        &self.projectors
    }
}

/// Doubly stochastic average mixing matrix. Entry `(v, u)` is the average
/// probability of observing the walk at `u` having started at `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    values: DMatrix<f64>,
}

impl MixingMatrix {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn entry(&self, v: usize, u: usize) -> f64 {
        self.values[(v, u)]
    }

    pub fn row(&self, v: usize) -> Vec<f64> {
        self.values.row(v).iter().copied().collect()
    }
}

/// Per-vertex quantum Shannon entropies, each in `[0, ln n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyVector {
    values: Vec<f64>,
}

impl EntropyVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        EntropyVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Decompose a symmetric matrix and group near-equal eigenvalues.
///
/// Raw eigenvalues are sorted ascending and clustered greedily: consecutive
/// values within `group_tol * max(1, spectral_radius)` of each other join
/// one cluster. Each cluster's projector is `V_c Vᵀ_c` over its orthonormal
/// eigenvectors, which is basis-independent on degenerate eigenspaces.
pub fn eigendecompose_symmetric(a: &DMatrix<f64>, group_tol: f64) -> Result<Spectrum> {
    if a.nrows() != a.ncols() {
        return Err(Error::Contract(format!(
            "matrix is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    if !(group_tol > 0.0) {
        return Err(Error::Contract(format!(
            "group_tol must be positive, got {group_tol}"
        )));
    }
    let n = a.nrows();
    let asymmetry = (a - a.transpose()).abs().max();
    if asymmetry >= 1e-12 {
        return Err(Error::Contract(format!(
            "matrix asymmetry {asymmetry:.3e} exceeds 1e-12"
        )));
    }
    if n == 0 {
        return Ok(Spectrum {
            dim: 0,
            eigenvalues: Vec::new(),
            projectors: Vec::new(),
        });
    }

    let eig = nalgebra::SymmetricEigen::try_new(a.clone(), f64::EPSILON, 200 * n * n + 2000)
        .ok_or_else(|| Error::Numeric(format!("eigensolver did not converge on {n}x{n} matrix")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let radius = sorted[0].abs().max(sorted[n - 1].abs());
    let threshold = group_tol * radius.max(1.0);

    let mut eigenvalues = Vec::new();
    let mut projectors = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && sorted[end] - sorted[end - 1] <= threshold {
            end += 1;
        }
        let mut basis = DMatrix::zeros(n, end - start);
        for (k, &idx) in order[start..end].iter().enumerate() {
            basis.set_column(k, &eig.eigenvectors.column(idx));
        }
        eigenvalues.push(sorted[start..end].iter().sum::<f64>() / (end - start) as f64);
        projectors.push(&basis * basis.transpose());
        start = end;
    }

    Ok(Spectrum {
        dim: n,
        eigenvalues,
        projectors,
    })
}

/// `Q = Σ_j P_j ∘ P_j`, entries clamped to `[0, 1]`.
pub fn average_mixing_matrix(spec: &Spectrum) -> MixingMatrix {
    let n = spec.dim();
    let mut q: DMatrix<f64> = DMatrix::zeros(n, n);
    for p in spec.projectors() {
        for (qe, &pe) in q.iter_mut().zip(p.iter()) {
            *qe += pe * pe;
        }
    }
    for e in q.iter_mut() {
        *e = e.clamp(0.0, 1.0);
    }
    MixingMatrix { values: q }
}

/// Row entropies `H(v) = −Σ_u Q_vu ln Q_vu`, with `0 ln 0 = 0`.
pub fn vertex_entropies(q: &MixingMatrix) -> EntropyVector {
    let values = (0..q.dim())
        .map(|v| {
            -q.values()
                .row(v)
                .iter()
                .map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 })
                .sum::<f64>()
        })
        .collect();
    EntropyVector { values }
}
