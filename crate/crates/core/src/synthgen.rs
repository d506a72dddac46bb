//! Deterministic synthetic embeddings with planted bias structure.
//!
//! Every generator draws from its own ChaCha8 stream derived from the seed, so
//! pairs, labeled sets and attribute sets can be produced in any order (or
//! concurrently) and stay bit-identical. Base vectors live in the orthogonal
//! complement of every planted direction, so projections onto those directions
//! read back exactly the planted magnitudes.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embedding::{EmbeddingMatrix, Group, LabelRecord};
use crate::error::{Error, Result};
use crate::io::{fnv1a64, read_text, write_atomic};
use crate::linalg::orthonormality_residual;
use crate::selection::SkewNormalParams;
use crate::subspace::CounterfactualPairSet;

const STREAM_DIRECTIONS: u64 = 1;
const STREAM_PAIR_BASES: u64 = 2;
const STREAM_PAIR_NOISE: u64 = 3;
const STREAM_PAIR_GAPS: u64 = 4;
const STREAM_LABELED_BASES: u64 = 5;
const STREAM_LABELED_MAGNITUDES: u64 = 6;
const STREAM_LABELED_NOISE: u64 = 7;
const STREAM_ATTR_BASES: u64 = 8;
const STREAM_ATTR_VALUES: u64 = 9;
const STREAM_ATTR_NOISE: u64 = 10;

const UNIT_TOL: f64 = 1e-10;

/// The RNG for one purpose under one seed.
pub fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasDirection {
    pub direction: DVector<f64>,
    /// Full separation between the two sides of a pair along `direction`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSpec {
    pub direction: DVector<f64>,
    /// Inclusive range the attribute is drawn uniformly from; `lo == hi` gives a constant.
    pub range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub d: usize,
    pub n_pairs: usize,
    pub n_neutral: usize,
    pub n_explicit: usize,
    pub n_attribute: usize,
    /// Orthonormal directions with strictly decreasing gaps.
    pub bias_dirs: Vec<BiasDirection>,
    /// Per-pair gaps are `g · (1 + u)` with `u` uniform in `[−gap_jitter, gap_jitter]`.
    pub gap_jitter: f64,
    pub noise_sigma: f64,
    /// Standard deviation of each base-vector coordinate before projection.
    pub base_scale: f64,
    pub neutral_scores: SkewNormalParams,
    pub explicit_scores: SkewNormalParams,
    pub attribute: Option<AttributeSpec>,
    pub seed: u64,
}

impl SynthConfig {
    /// Random orthonormal planted directions with the given gaps and otherwise default settings.
    pub fn planted(d: usize, gaps: &[f64], seed: u64) -> Result<Self> {
        if gaps.len() > d {
            return Err(Error::InvalidArgument(format!(
                "{} planted directions do not fit in dimension {d}",
                gaps.len()
            )));
        }
        let dirs = random_orthonormal(d, gaps.len(), &mut stream(seed, STREAM_DIRECTIONS))?;
        let cfg = SynthConfig {
            d,
            n_pairs: 500,
            n_neutral: 500,
            n_explicit: 500,
            n_attribute: 500,
            bias_dirs: gaps
                .iter()
                .enumerate()
                .map(|(i, &gap)| BiasDirection {
                    direction: dirs.column(i).into_owned(),
                    gap,
                })
                .collect(),
            gap_jitter: 0.0,
            noise_sigma: 0.1,
            base_scale: 1.0,
            // right-skewed neutral scores near 1, explicit scores near 8
            neutral_scores: SkewNormalParams::new(0.2, 1.2, 3.0)?,
            explicit_scores: SkewNormalParams::new(6.5, 2.0, 2.0)?,
            attribute: None,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if self.bias_dirs.is_empty() {
            return bad("at least one planted bias direction is required".into());
        }
        for (i, b) in self.bias_dirs.iter().enumerate() {
            if b.direction.len() != self.d {
                return bad(format!("bias direction {i} has length {} (d = {})", b.direction.len(), self.d));
            }
            if !(b.gap > 0.0) || !b.gap.is_finite() {
                return bad(format!("gap {i} must be positive and finite, got {}", b.gap));
            }
        }
        if self.bias_dirs.windows(2).any(|w| w[1].gap >= w[0].gap) {
            return bad("gaps must be strictly decreasing".into());
        }
        let residual = orthonormality_residual(&self.directions());
        if residual > UNIT_TOL {
            return bad(format!("bias directions are not orthonormal (residual {residual:e})"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad(format!("noise_sigma must be ≥ 0, got {}", self.noise_sigma));
        }
        if !(0.0..1.0).contains(&self.gap_jitter) {
            return bad(format!("gap_jitter must lie in [0, 1), got {}", self.gap_jitter));
        }
        if !(self.base_scale >= 0.0) || !self.base_scale.is_finite() {
            return bad(format!("base_scale must be ≥ 0, got {}", self.base_scale));
        }
        if let Some(a) = &self.attribute {
            if a.direction.len() != self.d || (a.direction.norm() - 1.0).abs() > UNIT_TOL {
                return bad("attribute direction must be a unit vector of length d".into());
            }
            let (lo, hi) = a.range;
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("attribute range [{lo}, {hi}] is invalid"));
            }
        }
        Ok(())
    }

    /// Planted directions as the columns of a d×k matrix.
    pub fn directions(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.bias_dirs.iter().map(|b| b.direction.clone()).collect();
        DMatrix::from_columns(&cols)
    }

    pub fn with_attribute(mut self, direction: DVector<f64>, range: (f64, f64)) -> Self {
        self.attribute = Some(AttributeSpec { direction, range });
        self
    }
}

/// Orthonormal d×k matrix from Gaussian columns via QR, with the sign of each
/// column fixed so its largest-|entry| is positive.
pub fn random_orthonormal<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if k > d {
        return Err(Error::InvalidArgument(format!("cannot fit {k} orthonormal vectors in dimension {d}")));
    }
    if k == 0 {
        return Ok(DMatrix::zeros(d, 0));
    }
    let g = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = g.qr().q();
    for mut c in q.column_iter_mut() {
        let (imax, _) = c.iter().enumerate().fold((0, 0.0), |acc, (i, v)| {
            if v.abs() > acc.1 { (i, v.abs()) } else { acc }
        });
        if c[imax] < 0.0 {
            c.neg_mut();
        }
    }
    Ok(q)
}

/// One row of the generator log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub column_id: String,
    /// Planted signed magnitude along each bias direction (pairs: the per-pair gap).
    pub magnitudes: Vec<f64>,
    pub attribute: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GeneratorLog {
    pub rows: Vec<LogRow>,
}

const LOG_HEADER: &str = "column_id\tmagnitudes\tattribute";

impl GeneratorLog {
    /// Tab-separated with a header; magnitudes are comma-joined.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{LOG_HEADER}\n");
        for r in &self.rows {
            let mags: Vec<String> = r.magnitudes.iter().map(f64::to_string).collect();
            let attr = r.attribute.map(|a| a.to_string()).unwrap_or_default();
            out.push_str(&format!("{}\t{}\t{attr}\n", r.column_id, mags.join(",")));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(LOG_HEADER) {
            return Err(Error::format("generator log", "missing header"));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|e| Error::format("generator log", format!("{s:?}: {e}")))
        };
        let mut rows = Vec::new();
        for l in lines.filter(|l| !l.is_empty()) {
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::format("generator log", format!("expected 3 fields in {l:?}")));
            }
            let magnitudes = if f[1].is_empty() {
                Vec::new()
            } else {
                f[1].split(',').map(num).collect::<Result<_>>()?
            };
            let attribute = if f[2].is_empty() { None } else { Some(num(f[2])?) };
            rows.push(LogRow {
                column_id: f[0].to_string(),
                magnitudes,
                attribute,
            });
        }
        Ok(GeneratorLog { rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_tsv().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }
}

/// Generated data together with the ground truth that produced it.
#[derive(Debug, Clone)]
pub struct Synthetic<T> {
    pub data: T,
    /// Noise-free base vectors, one column per sample (shared by both sides of a pair).
    pub bases: DMatrix<f64>,
    pub log: GeneratorLog,
}

/// Orthonormal basis for the span of `vectors` (near-dependent vectors are dropped).
fn span_basis(vectors: &[&DVector<f64>]) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let mut r = (*v).clone();
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        let n = r.norm();
        if n > 1e-8 {
            out.push(r / n);
        }
    }
    out
}

fn complement_bases(cfg: &SynthConfig, n: usize, avoid: &[DVector<f64>], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut b = DMatrix::from_fn(cfg.d, n, |_, _| cfg.base_scale * rng.sample::<f64, _>(StandardNormal));
    for mut col in b.column_iter_mut() {
        for _ in 0..2 {
            for q in avoid {
                let c = q.dot(&col);
                col.axpy(-c, q, 1.0);
            }
        }
    }
    b
}

fn noise(cfg: &SynthConfig, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    if cfg.noise_sigma == 0.0 {
        return DMatrix::zeros(cfg.d, n);
    }
    DMatrix::from_fn(cfg.d, n, |_, _| cfg.noise_sigma * rng.sample::<f64, _>(StandardNormal))
}

fn bias_avoid(cfg: &SynthConfig) -> Vec<DVector<f64>> {
    let dirs: Vec<&DVector<f64>> = cfg.bias_dirs.iter().map(|b| &b.direction).collect();
    span_basis(&dirs)
}

/// Pairs sharing a base vector; side a adds `+g/2·v`, side b adds `−g/2·v` per direction.
pub fn generate_counterfactual_pairs(cfg: &SynthConfig) -> Result<Synthetic<CounterfactualPairSet>> {
    cfg.validate()?;
    if cfg.n_pairs == 0 {
        return Err(Error::InvalidArgument("n_pairs must be at least 1".into()));
    }
    let n = cfg.n_pairs;
    let bases = complement_bases(cfg, n, &bias_avoid(cfg), &mut stream(cfg.seed, STREAM_PAIR_BASES));
    let mut gap_rng = stream(cfg.seed, STREAM_PAIR_GAPS);
    let mut a = bases.clone();
    let mut b = bases.clone();
    let mut rows = Vec::with_capacity(n);
    for j in 0..n {
        let mut mags = Vec::with_capacity(cfg.bias_dirs.len());
        for dir in &cfg.bias_dirs {
            let g = if cfg.gap_jitter > 0.0 {
                dir.gap * (1.0 + cfg.gap_jitter * (2.0 * gap_rng.random::<f64>() - 1.0))
            } else {
                dir.gap
            };
            a.column_mut(j).axpy(0.5 * g, &dir.direction, 1.0);
            b.column_mut(j).axpy(-0.5 * g, &dir.direction, 1.0);
            mags.push(g);
        }
        rows.push(LogRow {
            column_id: format!("pair{j}"),
            magnitudes: mags,
            attribute: None,
        });
    }
    // independent noise on each side, side a first
    let mut noise_rng = stream(cfg.seed, STREAM_PAIR_NOISE);
    a += noise(cfg, n, &mut noise_rng);
    b += noise(cfg, n, &mut noise_rng);

    let labels = |side: Group| -> Vec<LabelRecord> {
        (0..n).map(|j| LabelRecord::new(format!("pair{j}"), side)).collect()
    };
    let pairs = CounterfactualPairSet::new(
        EmbeddingMatrix::new(a, labels(Group::ExplicitA))?,
        EmbeddingMatrix::new(b, labels(Group::ExplicitB))?,
    )?;
    Ok(Synthetic {
        data: pairs,
        bases,
        log: GeneratorLog { rows },
    })
}

/// `n_neutral` neutral columns followed by `n_explicit` explicit ones (alternating a, b).
///
/// Each column gets a magnitude `|m|` drawn from its group's score distribution,
/// placed along every bias direction scaled by `g_i / g_0`. Explicit a is positive,
/// explicit b negative, neutral a random sign.
pub fn generate_labeled_set(cfg: &SynthConfig) -> Result<Synthetic<EmbeddingMatrix>> {
    cfg.validate()?;
    let n = cfg.n_neutral + cfg.n_explicit;
    let mut values = complement_bases(cfg, n, &bias_avoid(cfg), &mut stream(cfg.seed, STREAM_LABELED_BASES));
    let bases = values.clone();
    let mut rng = stream(cfg.seed, STREAM_LABELED_MAGNITUDES);
    let g0 = cfg.bias_dirs[0].gap;
    let mut labels = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for j in 0..n {
        let (group, id, dist) = if j < cfg.n_neutral {
            (Group::Neutral, format!("n{j}"), &cfg.neutral_scores)
        } else {
            let e = j - cfg.n_neutral;
            let g = if e.is_multiple_of(2) { Group::ExplicitA } else { Group::ExplicitB };
            (g, format!("e{e}"), &cfg.explicit_scores)
        };
        let m = dist.sample(&mut rng).abs();
        let sign = match group {
            Group::ExplicitA => 1.0,
            Group::ExplicitB => -1.0,
            _ => {
                if rng.random::<bool>() { 1.0 } else { -1.0 }
            }
        };
        let mut mags = Vec::with_capacity(cfg.bias_dirs.len());
        for dir in &cfg.bias_dirs {
            let s = sign * m * dir.gap / g0;
            values.column_mut(j).axpy(s, &dir.direction, 1.0);
            mags.push(s);
        }
        rows.push(LogRow {
            column_id: id.clone(),
            magnitudes: mags,
            attribute: None,
        });
        labels.push(LabelRecord::new(id, group));
    }
    values += noise(cfg, n, &mut stream(cfg.seed, STREAM_LABELED_NOISE));
    Ok(Synthetic {
        data: EmbeddingMatrix::new(values, labels)?,
        bases,
        log: GeneratorLog { rows },
    })
}

/// Column j is `base_j + a_j·dir + noise` with `a_j` uniform over the configured range.
///
/// Bases depend only on the seed, so two calls that differ only in the range
/// (e.g. a light and a dark set) share bases and form counterfactual pairs. The
/// attribute and noise streams also mix in the range, so those sets get
/// independent noise.
pub fn generate_attribute_set(cfg: &SynthConfig) -> Result<Synthetic<EmbeddingMatrix>> {
    cfg.validate()?;
    let spec = cfg
        .attribute
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("attribute set requested but no attribute direction configured".into()))?;
    let n = cfg.n_attribute;
    let mut avoid_src: Vec<&DVector<f64>> = cfg.bias_dirs.iter().map(|b| &b.direction).collect();
    avoid_src.push(&spec.direction);
    let avoid = span_basis(&avoid_src);
    let bases = complement_bases(cfg, n, &avoid, &mut stream(cfg.seed, STREAM_ATTR_BASES));

    let mut range_bytes = spec.range.0.to_le_bytes().to_vec();
    range_bytes.extend_from_slice(&spec.range.1.to_le_bytes());
    let mix = fnv1a64(&range_bytes) << 8;
    let mut value_rng = stream(cfg.seed, STREAM_ATTR_VALUES ^ mix);
    let (lo, hi) = spec.range;
    let mut values = bases.clone();
    let mut labels = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for j in 0..n {
        let a = lo + (hi - lo) * value_rng.random::<f64>();
        values.column_mut(j).axpy(a, &spec.direction, 1.0);
        let id = format!("s{j}");
        labels.push(LabelRecord::new(id.clone(), Group::Unlabeled).with_attribute(a));
        rows.push(LogRow {
            column_id: id,
            magnitudes: Vec::new(),
            attribute: Some(a),
        });
    }
    values += noise(cfg, n, &mut stream(cfg.seed, STREAM_ATTR_NOISE ^ mix));
    Ok(Synthetic {
        data: EmbeddingMatrix::new(values, labels)?,
        bases,
        log: GeneratorLog { rows },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::difference_matrix;

    fn cfg(noise: f64) -> SynthConfig {
        let mut c = SynthConfig::planted(16, &[4.0], 3).unwrap();
        c.noise_sigma = noise;
        c.n_pairs = 20;
        c.n_neutral = 10;
        c.n_explicit = 10;
        c.n_attribute = 30;
        c
    }

    #[test]
    fn noiseless_differences_are_planted() {
        let c = cfg(0.0);
        let s = generate_counterfactual_pairs(&c).unwrap();
        let d = difference_matrix(&s.data);
        let v = &c.bias_dirs[0].direction;
        for col in d.column_iter() {
            assert!((col - v * 4.0).amax() < 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let c = cfg(0.1);
        let a = generate_labeled_set(&c).unwrap();
        let b = generate_labeled_set(&c).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn labels_partition() {
        let s = generate_labeled_set(&cfg(0.1)).unwrap();
        let neutral = s.data.labels().iter().filter(|l| l.group == Group::Neutral).count();
        let explicit = s.data.labels().iter().filter(|l| l.group.is_explicit()).count();
        assert_eq!((neutral, explicit), (10, 10));
    }

    #[test]
    fn attribute_probe_is_exact_without_noise() {
        let c = cfg(0.0);
        let dir = c.bias_dirs[0].direction.clone();
        let c = c.with_attribute(dir.clone(), (0.0, 1.0));
        let s = generate_attribute_set(&c).unwrap();
        for (j, l) in s.data.labels().iter().enumerate() {
            let read = dir.dot(&(s.data.values().column(j) - s.bases.column(j)));
            assert!((read - l.attribute.unwrap()).abs() < 1e-12);
            assert!(dir.dot(&s.bases.column(j)).abs() < 1e-12);
        }
    }

    #[test]
    fn ranges_share_bases() {
        let c = cfg(0.1);
        let dir = c.bias_dirs[0].direction.clone();
        let light = generate_attribute_set(&c.clone().with_attribute(dir.clone(), (0.5, 1.0))).unwrap();
        let dark = generate_attribute_set(&c.with_attribute(dir, (-1.0, -0.5))).unwrap();
        assert_eq!(light.bases, dark.bases);
        assert_ne!(light.data.values(), dark.data.values());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = cfg(0.1);
        c.bias_dirs.push(BiasDirection {
            direction: c.bias_dirs[0].direction.clone(),
            gap: 1.0,
        });
        assert!(c.validate().is_err());
        let mut c = cfg(0.1);
        c.noise_sigma = -1.0;
        assert!(c.validate().is_err());
        assert!(generate_attribute_set(&cfg(0.1)).is_err());
    }

    #[test]
    fn log_round_trip() {
        let s = generate_labeled_set(&cfg(0.1)).unwrap();
        assert_eq!(GeneratorLog::parse(&s.log.to_tsv()).unwrap(), s.log);
    }
}
