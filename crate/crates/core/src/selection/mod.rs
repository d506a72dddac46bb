//! Projection-based selection: only samples whose bias score falls below δ_c are projected.
//!
//! Explicitly gendered samples carry a larger component along the bias basis
//! than neutral ones. Scores along one basis direction are modelled as two
//! skew-normal populations and the threshold between them is solved for.

mod skew_normal;
mod threshold;

pub use skew_normal::{
    fit_skew_normal, ln_std_normal_cdf, moment_estimate, owens_t, std_normal_cdf, std_normal_pdf,
    SkewNormalFit, SkewNormalParams, MIN_FIT_SAMPLES,
};
pub use threshold::{
    solve_threshold, LambdaSide, SolveMethod, ThresholdObjective, ThresholdSolution,
    GRID_INTERVALS,
};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::subspace::{BiasSubspace, Projector};

/// Fitted score populations and the threshold solved between them.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPolicy {
    pub neutral: SkewNormalParams,
    pub explicit: SkewNormalParams,
    pub delta_c: f64,
    pub lambda_c: f64,
    pub score_dim: usize,
    pub lambda_side: LambdaSide,
    pub method: SolveMethod,
}

impl SelectionPolicy {
    pub fn objective(&self) -> Result<ThresholdObjective> {
        ThresholdObjective::new(self.neutral, self.explicit, self.lambda_c, self.lambda_side)
    }

    /// Relative stationarity residual at δ_c (zero for an infinite sentinel threshold).
    pub fn stationarity_residual(&self) -> Result<f64> {
        if !self.delta_c.is_finite() {
            return Ok(0.0);
        }
        Ok(self.objective()?.stationarity_residual(self.delta_c))
    }

    /// A policy that projects every column (δ_c = +∞).
    pub fn project_all(&self) -> Self {
        SelectionPolicy {
            delta_c: f64::INFINITY,
            ..self.clone()
        }
    }
}

/// `|u_dimᵀ h_j|` for every column j.
pub fn projection_scores(h: &EmbeddingMatrix, s: &BiasSubspace, dim: usize) -> Result<Vec<f64>> {
    if dim >= s.k() {
        return Err(Error::InvalidArgument(format!(
            "score dimension {dim} out of range for a rank-{} subspace",
            s.k()
        )));
    }
    if h.dim() != s.dim() {
        return Err(Error::dims(
            format!("embeddings {}x{}", h.dim(), h.len()),
            format!("subspace {}x{}", s.dim(), s.k()),
        ));
    }
    let u = s.basis().column(dim);
    Ok(h.values().column_iter().map(|c| u.dot(&c).abs()).collect())
}

/// Fits both score populations from a labeled set and solves for δ_c.
///
/// Neutral columns form one population; `explicit_a` and `explicit_b` together form the other.
pub fn fit_policy(
    h: &EmbeddingMatrix,
    s: &BiasSubspace,
    score_dim: usize,
    lambda_c: f64,
    lambda_side: LambdaSide,
) -> Result<SelectionPolicy> {
    let scores = projection_scores(h, s, score_dim)?;
    let mut neutral = Vec::new();
    let mut explicit = Vec::new();
    for (score, label) in scores.iter().zip(h.labels()) {
        if label.group.is_explicit() {
            explicit.push(*score);
        } else if label.group == crate::embedding::Group::Neutral {
            neutral.push(*score);
        }
    }
    let neutral = fit_skew_normal(&neutral)?.params;
    let explicit = fit_skew_normal(&explicit)?.params;
    let solution = solve_threshold(&neutral, &explicit, lambda_c, lambda_side)?;
    Ok(SelectionPolicy {
        neutral,
        explicit,
        delta_c: solution.delta,
        lambda_c,
        score_dim,
        lambda_side,
        method: solution.method,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveProjection {
    pub embeddings: EmbeddingMatrix,
    /// `true` where the column was projected, `false` where it was kept verbatim.
    pub projected: Vec<bool>,
    pub scores: Vec<f64>,
}

impl SelectiveProjection {
    pub fn projected_count(&self) -> usize {
        self.projected.iter().filter(|p| **p).count()
    }
}

/// Replaces column j by `P·h_j` iff its score is strictly below δ_c; other columns are copied.
pub fn selective_project(
    h: &EmbeddingMatrix,
    p_perp: &Projector,
    policy: &SelectionPolicy,
    s: &BiasSubspace,
) -> Result<SelectiveProjection> {
    if p_perp.dim() != h.dim() {
        return Err(Error::dims(
            format!("projector {}x{}", p_perp.dim(), p_perp.dim()),
            format!("embeddings {}x{}", h.dim(), h.len()),
        ));
    }
    let scores = projection_scores(h, s, policy.score_dim)?;
    let projected: Vec<bool> = scores.iter().map(|&v| v < policy.delta_c).collect();
    let idx: Vec<usize> = (0..h.len()).filter(|&j| projected[j]).collect();

    let mut values = h.values().clone();
    if !idx.is_empty() {
        let chosen = h.values().select_columns(idx.iter());
        let moved = p_perp.matrix() * chosen;
        for (c, &j) in idx.iter().enumerate() {
            values.set_column(j, &moved.column(c));
        }
    }
    Ok(SelectiveProjection {
        embeddings: h.with_values(values)?,
        projected,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::orthogonal_projector;
    use nalgebra::DMatrix;

    fn e1_subspace(d: usize) -> BiasSubspace {
        let mut u = DMatrix::zeros(d, 1);
        u[(0, 0)] = 1.0;
        BiasSubspace::from_basis(u, vec![1.0]).unwrap()
    }

    fn policy(delta_c: f64) -> SelectionPolicy {
        SelectionPolicy {
            neutral: SkewNormalParams::normal(1.0, 1.0).unwrap(),
            explicit: SkewNormalParams::normal(8.0, 1.0).unwrap(),
            delta_c,
            lambda_c: 3.0,
            score_dim: 0,
            lambda_side: LambdaSide::WeightsExplicit,
            method: SolveMethod::Newton,
        }
    }

    #[test]
    fn scores_on_axis() {
        let s = e1_subspace(2);
        let h = EmbeddingMatrix::unlabeled(DMatrix::from_column_slice(2, 2, &[3.0, 4.0, 0.0, 5.0]))
            .unwrap();
        assert_eq!(projection_scores(&h, &s, 0).unwrap(), vec![3.0, 0.0]);
        assert_eq!(projection_scores(&h, &s, 1).unwrap_err().code(), "invalid-argument");
    }

    #[test]
    fn zero_threshold_keeps_everything() {
        let s = e1_subspace(3);
        let p = orthogonal_projector(&s).unwrap();
        let h = EmbeddingMatrix::unlabeled(DMatrix::from_fn(3, 5, |i, j| (i + j) as f64 - 2.0)).unwrap();
        let out = selective_project(&h, &p, &policy(0.0), &s).unwrap();
        assert_eq!(out.embeddings, h);
        assert_eq!(out.projected_count(), 0);
    }

    #[test]
    fn infinite_threshold_is_global_projection() {
        let s = e1_subspace(3);
        let p = orthogonal_projector(&s).unwrap();
        let h = EmbeddingMatrix::unlabeled(DMatrix::from_fn(3, 5, |i, j| (i * j) as f64 + 0.5)).unwrap();
        let out = selective_project(&h, &p, &policy(1.0).project_all(), &s).unwrap();
        assert_eq!(out.embeddings, p.apply(&h).unwrap());
        assert_eq!(out.projected_count(), 5);
    }

    #[test]
    fn mask_follows_strict_inequality() {
        let s = e1_subspace(2);
        let p = orthogonal_projector(&s).unwrap();
        let h = EmbeddingMatrix::unlabeled(DMatrix::from_column_slice(
            2,
            3,
            &[1.0, 1.0, 2.0, 1.0, -3.0, 1.0],
        ))
        .unwrap();
        let out = selective_project(&h, &p, &policy(2.0), &s).unwrap();
        assert_eq!(out.projected, vec![true, false, false]);
        assert_eq!(out.embeddings.values().column(0).as_slice(), &[0.0, 1.0]);
        assert_eq!(out.embeddings.values().column(2).as_slice(), &[-3.0, 1.0]);
    }
}
