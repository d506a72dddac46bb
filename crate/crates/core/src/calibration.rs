//! Calibrated projection for generation-side debiasing.
//!
//! Minimizes `L(P) = ‖P − P⊥‖_F² + λ_g ‖P Z_src − Z_tgt‖_F²`. Setting the
//! gradient `2(P − P⊥) + 2λ_g (P Z_src − Z_tgt) Z_srcᵀ` to zero gives
//! `P (I + λ_g Z_src Z_srcᵀ) = P⊥ + λ_g Z_tgt Z_srcᵀ`; the left factor has every
//! eigenvalue ≥ 1, so it is factored by Cholesky and the system solved directly.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::subspace::{Projector, ProjectorKind, Provenance};

/// Relative stationarity tolerance checked on every constructed projector.
pub const STATIONARITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairPooling {
    /// Every column pair is its own constraint.
    #[default]
    Raw,
    /// Source and target are each replaced by their centroid.
    Centroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AToB,
    BToA,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::AToB => "a2b",
            Direction::BToA => "b2a",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a2b" => Ok(Direction::AToB),
            "b2a" => Ok(Direction::BToA),
            other => Err(Error::InvalidArgument(format!(
                "direction must be a2b or b2a, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    p_perp: Projector,
    z_source: DMatrix<f64>,
    z_target: DMatrix<f64>,
    lambda_g: f64,
}

impl CalibrationProblem {
    pub fn new(
        p_perp: &Projector,
        z_source: &EmbeddingMatrix,
        z_target: &EmbeddingMatrix,
        lambda_g: f64,
    ) -> Result<Self> {
        Self::from_matrices(p_perp, z_source.values(), z_target.values(), lambda_g)
    }

    pub fn from_matrices(
        p_perp: &Projector,
        z_source: &DMatrix<f64>,
        z_target: &DMatrix<f64>,
        lambda_g: f64,
    ) -> Result<Self> {
        if p_perp.kind() != ProjectorKind::Orthogonal {
            return Err(Error::InvalidArgument(
                "calibration starts from an orthogonal projector".into(),
            ));
        }
        let d = p_perp.dim();
        if z_source.nrows() != d || z_target.nrows() != d {
            return Err(Error::dims(
                format!("projector {d}x{d}"),
                format!(
                    "source {}x{}, target {}x{}",
                    z_source.nrows(),
                    z_source.ncols(),
                    z_target.nrows(),
                    z_target.ncols()
                ),
            ));
        }
        if z_source.ncols() != z_target.ncols() || z_source.ncols() == 0 {
            return Err(Error::dims(
                format!("{} source columns", z_source.ncols()),
                format!("{} target columns (need equal and ≥ 1)", z_target.ncols()),
            ));
        }
        if !(lambda_g >= 0.0) || !lambda_g.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda_g must be finite and non-negative, got {lambda_g}"
            )));
        }
        Ok(CalibrationProblem {
            p_perp: p_perp.clone(),
            z_source: z_source.clone(),
            z_target: z_target.clone(),
            lambda_g,
        })
    }

    pub fn pooled(mut self, pooling: PairPooling) -> Self {
        if pooling == PairPooling::Centroid {
            self.z_source = centroid(&self.z_source);
            self.z_target = centroid(&self.z_target);
        }
        self
    }

    /// The same problem with source and target exchanged.
    pub fn reversed(&self) -> Self {
        CalibrationProblem {
            p_perp: self.p_perp.clone(),
            z_source: self.z_target.clone(),
            z_target: self.z_source.clone(),
            lambda_g: self.lambda_g,
        }
    }

    pub fn dim(&self) -> usize {
        self.p_perp.dim()
    }

    pub fn lambda_g(&self) -> f64 {
        self.lambda_g
    }

    pub fn p_perp(&self) -> &Projector {
        &self.p_perp
    }

    pub fn z_source(&self) -> &DMatrix<f64> {
        &self.z_source
    }

    pub fn z_target(&self) -> &DMatrix<f64> {
        &self.z_target
    }

    fn check_square(&self, p: &DMatrix<f64>) -> Result<()> {
        let d = self.dim();
        if p.shape() != (d, d) {
            return Err(Error::dims(
                format!("P {}x{}", p.nrows(), p.ncols()),
                format!("problem dimension {d}"),
            ));
        }
        Ok(())
    }

    /// `I + λ_g Z_src Z_srcᵀ`.
    fn gram(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut a = &self.z_source * self.z_source.transpose() * self.lambda_g;
        for i in 0..d {
            a[(i, i)] += 1.0;
        }
        // exact symmetry for the factorization
        let at = a.transpose();
        (a + at) * 0.5
    }

    /// `P⊥ + λ_g Z_tgt Z_srcᵀ`.
    fn rhs(&self) -> DMatrix<f64> {
        self.p_perp.matrix() + &self.z_target * self.z_source.transpose() * self.lambda_g
    }
}

fn centroid(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mean: DVector<f64> = z.column_mean();
    DMatrix::from_column_slice(z.nrows(), 1, mean.as_slice())
}

/// `‖P − P⊥‖_F² + λ_g ‖P Z_src − Z_tgt‖_F²`.
pub fn calibration_objective(p: &DMatrix<f64>, prob: &CalibrationProblem) -> Result<f64> {
    prob.check_square(p)?;
    let orth = (p - prob.p_perp.matrix()).norm_squared();
    let calib = (p * &prob.z_source - &prob.z_target).norm_squared();
    Ok(orth + prob.lambda_g * calib)
}

/// `2(P − P⊥) + 2λ_g (P Z_src − Z_tgt) Z_srcᵀ`.
pub fn objective_gradient(p: &DMatrix<f64>, prob: &CalibrationProblem) -> Result<DMatrix<f64>> {
    prob.check_square(p)?;
    let residual = p * &prob.z_source - &prob.z_target;
    Ok((p - prob.p_perp.matrix()) * 2.0 + residual * prob.z_source.transpose() * (2.0 * prob.lambda_g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub lambda_g: f64,
    pub objective: f64,
    pub gradient_norm: f64,
    /// `gradient_norm / (1 + ‖P‖_F)`.
    pub relative_gradient: f64,
    pub min_pivot: f64,
    pub pairs: usize,
}

impl CalibrationReport {
    /// `key=value` lines.
    pub fn to_kv(&self) -> String {
        format!(
            "lambda_g={}\nobjective={:e}\ngradient_norm={:e}\nrelative_gradient={:e}\nmin_pivot={:e}\npairs={}\n",
            self.lambda_g,
            self.objective,
            self.gradient_norm,
            self.relative_gradient,
            self.min_pivot,
            self.pairs
        )
    }
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub projector: Projector,
    pub report: CalibrationReport,
}

/// Closed-form minimizer of the calibration objective.
///
/// Solves `(I + λ_g Z_src Z_srcᵀ) Pᵀ = (P⊥ + λ_g Z_tgt Z_srcᵀ)ᵀ` by Cholesky with
/// one round of iterative refinement, then checks stationarity.
pub fn closed_form_calibration(prob: &CalibrationProblem) -> Result<Calibration> {
    let a = prob.gram();
    let b = prob.rhs();
    let chol = Cholesky::factor(&a)?;
    let min_pivot = chol.min_pivot();

    let mut pt = b.transpose();
    chol.solve_in_place(&mut pt);
    let mut p = pt.transpose();

    if prob.lambda_g > 0.0 {
        let mut correction = (&b - &p * &a).transpose();
        chol.solve_in_place(&mut correction);
        p += correction.transpose();
    }

    let gradient_norm = objective_gradient(&p, prob)?.norm();
    let relative_gradient = gradient_norm / (1.0 + p.norm());
    if relative_gradient > STATIONARITY_TOL {
        return Err(Error::Numeric(format!(
            "calibrated projector is not stationary: ‖∇L‖/(1+‖P‖) = {relative_gradient:e}"
        )));
    }
    let objective = calibration_objective(&p, prob)?;
    let pairs = prob.z_source.ncols();
    let provenance = Provenance {
        source_checksum: prob.p_perp.provenance().source_checksum,
        params: format!("lambda_g={};pairs={pairs}", prob.lambda_g),
    };
    let projector = Projector::from_parts(p, ProjectorKind::Calibrated, provenance)?;
    Ok(Calibration {
        projector,
        report: CalibrationReport {
            lambda_g: prob.lambda_g,
            objective,
            gradient_norm,
            relative_gradient,
            min_pivot,
            pairs,
        },
    })
}

/// Calibrations `a→b` (pulls `z_a` toward `z_b`) and `b→a`.
pub fn directional_pair(
    p_perp: &Projector,
    z_a: &EmbeddingMatrix,
    z_b: &EmbeddingMatrix,
    lambda_g: f64,
    pooling: PairPooling,
) -> Result<(Calibration, Calibration)> {
    let forward = CalibrationProblem::new(p_perp, z_a, z_b, lambda_g)?.pooled(pooling);
    let backward = forward.reversed();
    let mut a2b = closed_form_calibration(&forward)?;
    let mut b2a = closed_form_calibration(&backward)?;
    tag_direction(&mut a2b, Direction::AToB);
    tag_direction(&mut b2a, Direction::BToA);
    Ok((a2b, b2a))
}

/// Solves the single requested direction.
pub fn calibrate_direction(
    p_perp: &Projector,
    z_a: &EmbeddingMatrix,
    z_b: &EmbeddingMatrix,
    lambda_g: f64,
    direction: Direction,
    pooling: PairPooling,
) -> Result<Calibration> {
    let (src, tgt) = match direction {
        Direction::AToB => (z_a, z_b),
        Direction::BToA => (z_b, z_a),
    };
    let prob = CalibrationProblem::new(p_perp, src, tgt, lambda_g)?.pooled(pooling);
    let mut out = closed_form_calibration(&prob)?;
    tag_direction(&mut out, direction);
    Ok(out)
}

fn tag_direction(c: &mut Calibration, direction: Direction) {
    let prov = c.projector.provenance().clone();
    let params = format!("{};direction={direction}", prov.params);
    c.projector = Projector::from_parts(
        c.projector.matrix().clone(),
        ProjectorKind::Calibrated,
        Provenance { params, ..prov },
    )
    .expect("projector matrix was already validated");
}

/// `P·H` for a calibrated (or any) projector. No norm guarantee.
pub fn apply_calibrated(p: &Projector, h: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    p.apply(h)
}
