//! Skew-normal distribution: density, CDF, exact sampling and maximum-likelihood fitting.
//!
//! The density is `f(x) = (2/ω) φ(z) Φ(αz)` with `z = (x − ξ)/ω`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use libm::erfc;

use crate::error::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Minimum number of samples accepted by [`fit_skew_normal`].
pub const MIN_FIT_SAMPLES: usize = 8;

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// `ln Φ(z)`, accurate far into the lower tail.
pub fn ln_std_normal_cdf(z: f64) -> f64 {
    if z > -37.0 {
        return std_normal_cdf(z).ln();
    }
    let z2 = z * z;
    let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    -0.5 * z2 - (-z).ln() - HALF_LN_2PI + series.ln()
}

/// Owen's T function `T(h, a) = (1/2π) ∫₀ᵃ exp(−h²(1+x²)/2) / (1+x²) dx`.
pub fn owens_t(h: f64, a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    if a < 0.0 {
        return -owens_t(h, -a);
    }
    let h = h.abs();
    if a <= 1.0 {
        let f = |x: f64| (-0.5 * h * h * (1.0 + x * x)).exp() / (1.0 + x * x);
        return adaptive_simpson(&f, 0.0, a, 1e-16) / (2.0 * PI);
    }
    if a.is_infinite() {
        return 0.5 * (1.0 - std_normal_cdf(h));
    }
    let ah = a * h;
    let ph = std_normal_cdf(h);
    let pah = std_normal_cdf(ah);
    0.5 * (ph + pah) - ph * pah - owens_t(ah, 1.0 / a)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Location ξ, scale ω > 0 and shape α of a skew-normal distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormalParams {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
}

impl SkewNormalParams {
    pub fn new(location: f64, scale: f64, shape: f64) -> Result<Self> {
        if !(location.is_finite() && scale.is_finite() && shape.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "skew-normal parameters must be finite: ({location}, {scale}, {shape})"
            )));
        }
        if scale <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "skew-normal scale must be positive, got {scale}"
            )));
        }
        Ok(SkewNormalParams {
            location,
            scale,
            shape,
        })
    }

    /// The normal distribution N(μ, σ²), i.e. α = 0.
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(mean, sd, 0.0)
    }

    fn z(&self, x: f64) -> f64 {
        (x - self.location) / self.scale
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = self.z(x);
        2.0 / self.scale * std_normal_pdf(z) * std_normal_cdf(self.shape * z)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = self.z(x);
        LN_2 - self.scale.ln() - HALF_LN_2PI - 0.5 * z * z + ln_std_normal_cdf(self.shape * z)
    }

    /// `d f / d x`.
    pub fn pdf_derivative(&self, x: f64) -> f64 {
        let z = self.z(x);
        let a = self.shape;
        let w = self.scale;
        2.0 / (w * w)
            * std_normal_pdf(z)
            * (a * std_normal_pdf(a * z) - z * std_normal_cdf(a * z))
    }

    /// `d² f / d x²`.
    pub fn pdf_second_derivative(&self, x: f64) -> f64 {
        let z = self.z(x);
        let a = self.shape;
        let w = self.scale;
        2.0 / (w * w * w)
            * std_normal_pdf(z)
            * ((z * z - 1.0) * std_normal_cdf(a * z) - a * z * (2.0 + a * a) * std_normal_pdf(a * z))
    }

    /// `F(x) = Φ(z) − 2 T(z, α)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let z = self.z(x);
        (std_normal_cdf(z) - 2.0 * owens_t(z, self.shape)).clamp(0.0, 1.0)
    }

    fn delta(&self) -> f64 {
        self.shape / (1.0 + self.shape * self.shape).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.location + self.scale * self.delta() * (2.0 / PI).sqrt()
    }

    pub fn variance(&self) -> f64 {
        let d = self.delta();
        self.scale * self.scale * (1.0 - 2.0 * d * d / PI)
    }

    /// Location of the density peak, by golden-section search (the density is log-concave).
    pub fn mode(&self) -> f64 {
        if self.shape == 0.0 {
            return self.location;
        }
        let (lo, hi) = (self.location - self.scale, self.location + self.scale);
        golden_section_max(|x| self.ln_pdf(x), lo, hi, 1e-13 * self.scale.max(1.0))
    }

    /// Exact draw: `ξ + ω(δ|Z₀| + √(1−δ²) Z₁)` with `δ = α/√(1+α²)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let d = self.delta();
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        self.location + self.scale * (d * z0.abs() + (1.0 - d * d).sqrt() * z1)
    }

    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        samples.iter().map(|&x| self.ln_pdf(x)).sum()
    }
}

pub(crate) fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Result of a maximum-likelihood fit, with the moment-based starting point kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormalFit {
    pub params: SkewNormalParams,
    pub log_likelihood: f64,
    pub initial: SkewNormalParams,
    pub initial_log_likelihood: f64,
    pub evaluations: usize,
}

/// Method-of-moments estimate, with sample skewness clipped inside the attainable range.
pub fn moment_estimate(samples: &[f64]) -> Result<SkewNormalParams> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = samples.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let sd = m2.sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    let gamma = (m3 / (m2 * sd)).clamp(-0.99, 0.99);
    let g23 = gamma.abs().powf(2.0 / 3.0);
    let c = ((4.0 - PI) / 2.0).powf(2.0 / 3.0);
    let delta = gamma.signum() * ((PI / 2.0) * g23 / (g23 + c)).sqrt();
    let delta = delta.clamp(-0.995, 0.995);
    let shape = delta / (1.0 - delta * delta).sqrt();
    let scale = sd / (1.0 - 2.0 * delta * delta / PI).sqrt();
    let location = mean - scale * delta * (2.0 / PI).sqrt();
    SkewNormalParams::new(location, scale, shape)
}

/// Maximum-likelihood skew-normal fit.
///
/// Starts from the moment estimate and runs Nelder–Mead on the negative
/// log-likelihood over `(ξ, ln ω, α)`, restarting the simplex until it stops improving.
pub fn fit_skew_normal(samples: &[f64]) -> Result<SkewNormalFit> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    if samples.iter().all(|&x| x == samples[0]) {
        return Err(Error::Degenerate("all samples are identical".into()));
    }
    let initial = moment_estimate(samples)?;
    let initial_log_likelihood = initial.log_likelihood(samples);

    let nll = |theta: &[f64; 3]| -> f64 {
        let scale = theta[1].exp();
        if !scale.is_finite() || scale <= 0.0 {
            return f64::INFINITY;
        }
        let p = SkewNormalParams {
            location: theta[0],
            scale,
            shape: theta[2],
        };
        let v = -p.log_likelihood(samples);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut theta = [initial.location, initial.scale.ln(), initial.shape];
    let mut best = nll(&theta);
    let mut evaluations = 1;
    let steps = [0.25 * initial.scale, 0.1, 0.5 + 0.25 * initial.shape.abs()];
    for _ in 0..8 {
        let (next, value, evals) = nelder_mead(&nll, theta, steps, 4000);
        evaluations += evals;
        let improved = best - value;
        if value <= best {
            theta = next;
            best = value;
        }
        if improved <= 1e-10 * (1.0 + best.abs()) {
            break;
        }
    }

    let params = SkewNormalParams::new(theta[0], theta[1].exp(), theta[2])?;
    Ok(SkewNormalFit {
        params,
        log_likelihood: -best,
        initial,
        initial_log_likelihood,
        evaluations,
    })
}

fn nelder_mead<F>(f: &F, start: [f64; 3], steps: [f64; 3], max_iter: usize) -> ([f64; 3], f64, usize)
where
    F: Fn(&[f64; 3]) -> f64,
{
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((start, f(&start)));
    for i in 0..3 {
        let mut v = start;
        v[i] += steps[i];
        simplex.push((v, f(&v)));
    }
    let mut evals = 4;

    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[3].1);
        let size = (1..4)
            .map(|i| {
                (0..3)
                    .map(|c| (simplex[i].0[c] - simplex[0].0[c]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (worst - best).abs() <= 1e-12 * (1.0 + best.abs()) && size <= 1e-10 {
            break;
        }

        let mut centroid = [0.0; 3];
        for (v, _) in &simplex[..3] {
            for c in 0..3 {
                centroid[c] += v[c] / 3.0;
            }
        }
        let along = |t: f64| -> [f64; 3] {
            let w = simplex[3].0;
            [
                centroid[0] + t * (w[0] - centroid[0]),
                centroid[1] + t * (w[1] - centroid[1]),
                centroid[2] + t * (w[2] - centroid[2]),
            ]
        };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            evals += 1;
            simplex[3] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[3].1 { along(-0.5) } else { along(0.5) };
            let fc = f(&contracted);
            evals += 1;
            if fc < simplex[3].1.min(fr) {
                simplex[3] = (contracted, fc);
            } else {
                let anchor = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let mut v = entry.0;
                    for c in 0..3 {
                        v[c] = anchor[c] + 0.5 * (v[c] - anchor[c]);
                    }
                    *entry = (v, f(&v));
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0, simplex[0].1, evals)
}
