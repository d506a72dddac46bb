//! Bias-variation subspace identification and orthogonal projection.
//!
//! Counterfactual pairs differ only in the bias attribute, so the columns of
//! their difference matrix concentrate along the bias directions. The top-k left
//! singular vectors of that matrix span the bias subspace `S`, and
//! `P⊥ = I − U_k U_kᵀ` removes it.

use std::fmt;

use nalgebra::DMatrix;

use crate::embedding::{check_finite, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::io::fnv1a64;
use crate::linalg::orthonormality_residual;

/// Maximum tolerated `‖U_kᵀU_k − I‖_F`.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Trailing singular values below this fraction of σ₁ are flagged as degenerate.
pub const RANK_TOL: f64 = 1e-12;

/// Above this dimension the idempotence check uses probe vectors instead of forming `P²`.
const FULL_IDEMPOTENCE_CHECK_MAX_DIM: usize = 2048;

/// Two aligned embedding sets that differ only in the bias attribute.
#[derive(Debug, Clone)]
pub struct CounterfactualPairSet {
    side_a: EmbeddingMatrix,
    side_b: EmbeddingMatrix,
}

impl CounterfactualPairSet {
    pub fn new(side_a: EmbeddingMatrix, side_b: EmbeddingMatrix) -> Result<Self> {
        if side_a.dim() != side_b.dim() || side_a.len() != side_b.len() {
            return Err(Error::dims(
                format!("side_a {}x{}", side_a.dim(), side_a.len()),
                format!("side_b {}x{}", side_b.dim(), side_b.len()),
            ));
        }
        if side_a.is_empty() {
            return Err(Error::InvalidArgument(
                "a pair set needs at least one pair".into(),
            ));
        }
        for (j, (a, b)) in side_a.labels().iter().zip(side_b.labels()).enumerate() {
            if a.source_id != b.source_id {
                return Err(Error::Validation(format!(
                    "pair {j} is misaligned: source ids {:?} and {:?}",
                    a.source_id, b.source_id
                )));
            }
        }
        Ok(CounterfactualPairSet { side_a, side_b })
    }

    pub fn side_a(&self) -> &EmbeddingMatrix {
        &self.side_a
    }

    pub fn side_b(&self) -> &EmbeddingMatrix {
        &self.side_b
    }

    pub fn len(&self) -> usize {
        self.side_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.side_a.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.side_a.dim()
    }
}

/// Orthonormal basis of the top-k bias directions plus their singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasSubspace {
    basis: DMatrix<f64>,
    singular_values: Vec<f64>,
    degenerate: Vec<usize>,
}

impl BiasSubspace {
    /// Wraps an externally supplied basis (e.g. planted directions).
    pub fn from_basis(basis: DMatrix<f64>, singular_values: Vec<f64>) -> Result<Self> {
        let k = basis.ncols();
        if k == 0 || basis.nrows() == 0 {
            return Err(Error::InvalidArgument("subspace basis must be non-empty".into()));
        }
        if k > basis.nrows() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} exceeds dimension {}",
                basis.nrows()
            )));
        }
        if singular_values.len() != k {
            return Err(Error::dims(
                format!("{k} basis columns"),
                format!("{} singular values", singular_values.len()),
            ));
        }
        check_finite(&basis)?;
        if singular_values.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Validation("singular values must be finite and non-negative".into()));
        }
        if singular_values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Validation("singular values must be non-increasing".into()));
        }
        let residual = orthonormality_residual(&basis);
        if residual > ORTHONORMALITY_TOL {
            return Err(Error::Validation(format!(
                "basis is not orthonormal: residual {residual:e}"
            )));
        }
        let degenerate = flag_degenerate(&singular_values);
        Ok(BiasSubspace {
            basis,
            singular_values,
            degenerate,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Indices (within the top k) whose singular value is numerically zero.
    pub fn degenerate(&self) -> &[usize] {
        &self.degenerate
    }

    pub fn orthonormality_residual(&self) -> f64 {
        orthonormality_residual(&self.basis)
    }

    /// FNV-1a over the little-endian basis bytes followed by the singular values.
    pub fn checksum(&self) -> u64 {
        let mut bytes = Vec::with_capacity(8 * (self.basis.len() + self.k()));
        for v in self.basis.iter().chain(self.singular_values.iter()) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fnv1a64(&bytes)
    }
}

fn flag_degenerate(singular_values: &[f64]) -> Vec<usize> {
    let top = singular_values.first().copied().unwrap_or(0.0);
    singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| top == 0.0 || **s < RANK_TOL * top)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectorKind {
    Orthogonal,
    Calibrated,
}

impl fmt::Display for ProjectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProjectorKind::Orthogonal => "orthogonal",
            ProjectorKind::Calibrated => "calibrated",
        })
    }
}

/// Where a projector came from: the checksum of its subspace and the parameters used.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub source_checksum: u64,
    /// `key=value` pairs separated by `;`.
    pub params: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: DMatrix<f64>,
    kind: ProjectorKind,
    provenance: Provenance,
}

impl Projector {
    /// Builds a projector without the construction-time checks.
    ///
    /// Used when loading from disk or when the caller has verified the matrix already.
    pub fn from_parts(
        matrix: DMatrix<f64>,
        kind: ProjectorKind,
        provenance: Provenance,
    ) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::dims(
                format!("{}x{}", matrix.nrows(), matrix.ncols()),
                "non-empty square matrix",
            ));
        }
        check_finite(&matrix)?;
        Ok(Projector {
            matrix,
            kind,
            provenance,
        })
    }

    pub fn identity(d: usize) -> Self {
        Projector {
            matrix: DMatrix::identity(d, d),
            kind: ProjectorKind::Orthogonal,
            provenance: Provenance::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> ProjectorKind {
        self.kind
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Applies `P` to every column of `h`, keeping labels.
    pub fn apply(&self, h: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        if h.dim() != self.dim() {
            return Err(Error::dims(
                format!("projector {}x{}", self.dim(), self.dim()),
                format!("embeddings {}x{}", h.dim(), h.len()),
            ));
        }
        h.with_values(&self.matrix * h.values())
    }
}

/// `D = side_a − side_b`, no normalization.
pub fn difference_matrix(pairs: &CounterfactualPairSet) -> DMatrix<f64> {
    pairs.side_a.values() - pairs.side_b.values()
}

/// Top-k left singular vectors of `d_matrix`.
///
/// Each basis column is signed so that its largest-magnitude entry is positive.
/// Rank deficiency is not an error; see [`BiasSubspace::degenerate`].
pub fn fit_subspace(d_matrix: &DMatrix<f64>, k: usize) -> Result<BiasSubspace> {
    let (d, n) = d_matrix.shape();
    let max_k = d.min(n);
    if k == 0 || k > max_k {
        return Err(Error::InvalidArgument(format!(
            "k = {k} out of range 1..={max_k} for a {d}x{n} difference matrix"
        )));
    }
    check_finite(d_matrix)?;

    let svd = d_matrix.clone().svd(true, false);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Numeric("SVD did not return left singular vectors".into()))?;
    let sigma = &svd.singular_values;

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    // stable sort: ties keep the decomposition's own order
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let mut basis = DMatrix::<f64>::zeros(d, k);
    let mut singular_values = Vec::with_capacity(k);
    for (out, &src) in order.iter().take(k).enumerate() {
        let mut col = u.column(src).clone_owned();
        let pivot = col
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |best, (i, v)| {
                if v.abs() > best.1 {
                    (i, v.abs())
                } else {
                    best
                }
            })
            .0;
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        basis.set_column(out, &col);
        singular_values.push(sigma[src].max(0.0));
    }

    let residual = orthonormality_residual(&basis);
    if residual > ORTHONORMALITY_TOL {
        return Err(Error::Numeric(format!(
            "SVD basis lost orthonormality: residual {residual:e}"
        )));
    }
    let degenerate = flag_degenerate(&singular_values);
    if !degenerate.is_empty() {
        log::warn!(
            "difference matrix has rank < {k}: singular values {degenerate:?} are below {RANK_TOL:e}·σ₁"
        );
    }
    Ok(BiasSubspace {
        basis,
        singular_values,
        degenerate,
    })
}

/// `P⊥ = I − U_k U_kᵀ`, verified to be a symmetric idempotent that annihilates `U_k`.
pub fn orthogonal_projector(s: &BiasSubspace) -> Result<Projector> {
    let residual = s.orthonormality_residual();
    if residual > ORTHONORMALITY_TOL {
        return Err(Error::Validation(format!(
            "subspace basis is not orthonormal (residual {residual:e}); refit it"
        )));
    }
    let d = s.dim();
    let u = s.basis();
    let mut p = DMatrix::<f64>::identity(d, d) - u * u.transpose();
    let pt = p.transpose();
    p = (&p + pt) * 0.5;

    let scale = d as f64;
    let asym = (&p - p.transpose()).norm();
    if asym > 1e-10 * scale {
        return Err(Error::Numeric(format!("P⊥ is not symmetric: {asym:e}")));
    }
    let annihilation = (&p * u).norm();
    if annihilation > 1e-10 * scale.sqrt().max(1.0) {
        return Err(Error::Numeric(format!("P⊥·U_k is not zero: {annihilation:e}")));
    }
    let idem = idempotence_residual(&p);
    if idem > 1e-9 * scale {
        return Err(Error::Numeric(format!("P⊥ is not idempotent: {idem:e}")));
    }

    Ok(Projector {
        matrix: p,
        kind: ProjectorKind::Orthogonal,
        provenance: Provenance {
            source_checksum: s.checksum(),
            params: format!("k={}", s.k()),
        },
    })
}

fn idempotence_residual(p: &DMatrix<f64>) -> f64 {
    let d = p.nrows();
    if d <= FULL_IDEMPOTENCE_CHECK_MAX_DIM {
        return (p * p - p).norm();
    }
    // deterministic probes: a few dense sign patterns
    let probes = DMatrix::<f64>::from_fn(d, 4, |i, j| {
        if (i * (j + 3) + j) % 3 == 0 {
            1.0
        } else {
            -1.0
        }
    });
    let once = p * &probes;
    let twice = p * &once;
    (twice - once).norm() / probes.norm() * (d as f64).sqrt()
}

/// `H' = P·H`, labels unchanged.
pub fn project(p: &Projector, h: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    p.apply(h)
}

/// Splits `H` into its component inside the subspace and the remainder.
pub fn decompose(
    h: &EmbeddingMatrix,
    s: &BiasSubspace,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    if h.dim() != s.dim() {
        return Err(Error::dims(
            format!("embeddings {}x{}", h.dim(), h.len()),
            format!("subspace {}x{}", s.dim(), s.k()),
        ));
    }
    let u = s.basis();
    let bias = u * (u.transpose() * h.values());
    let sem = h.values() - &bias;
    Ok((h.with_values(bias)?, h.with_values(sem)?))
}
