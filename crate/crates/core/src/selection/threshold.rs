//! Selection threshold between the neutral and explicit score populations.
//!
//! The threshold maximizes
//!
//! ```text
//! J(δ) = w_n ∫₀^δ p_n(x) dx + w_e ∫_δ^∞ p_e(x) dx
//! ```
//!
//! where λ_c sits on the explicit tail (`w_e = λ_c`, `w_n = 1`) or, in the
//! alternative convention, on the neutral mass (`w_n = λ_c`, `w_e = 1`).
//! Interior maxima satisfy `w_n p_n(δ) = w_e p_e(δ)`, which is solved with
//! Newton's method from the midpoint of the two modes.

use std::fmt;
use std::str::FromStr;

use super::skew_normal::{golden_section_max, SkewNormalParams};
use crate::error::{Error, Result};

/// Number of intervals in the bracketing grid.
pub const GRID_INTERVALS: usize = 10_000;

const NEWTON_MAX_ITER: usize = 100;

/// Where the trade-off coefficient λ_c multiplies the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaSide {
    /// `∫₀^δ p_n + λ_c ∫_δ^∞ p_e`.
    #[default]
    WeightsExplicit,
    /// `λ_c ∫₀^δ p_n + ∫_δ^∞ p_e`.
    WeightsNeutral,
}

impl LambdaSide {
    pub fn as_str(self) -> &'static str {
        match self {
            LambdaSide::WeightsExplicit => "weights_explicit",
            LambdaSide::WeightsNeutral => "weights_neutral",
        }
    }

    fn weights(self, lambda: f64) -> (f64, f64) {
        match self {
            LambdaSide::WeightsExplicit => (1.0, lambda),
            LambdaSide::WeightsNeutral => (lambda, 1.0),
        }
    }
}

impl fmt::Display for LambdaSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LambdaSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weights_explicit" | "weights-explicit" | "explicit" => Ok(LambdaSide::WeightsExplicit),
            "weights_neutral" | "weights-neutral" | "neutral" => Ok(LambdaSide::WeightsNeutral),
            other => Err(Error::InvalidArgument(format!("unknown lambda side {other:?}"))),
        }
    }
}

/// How the returned threshold was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Newton's method from the midpoint of the modes.
    Newton,
    /// Safeguarded Newton inside a grid cell where the weighted densities cross.
    Bracketed,
    /// Golden-section search on the objective over the bracketing grid.
    GoldenSection,
    /// A bracket endpoint beats every interior candidate.
    Boundary,
}

impl SolveMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveMethod::Newton => "newton",
            SolveMethod::Bracketed => "bracketed",
            SolveMethod::GoldenSection => "golden_section",
            SolveMethod::Boundary => "boundary",
        }
    }
}

impl FromStr for SolveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "newton" => Ok(SolveMethod::Newton),
            "bracketed" => Ok(SolveMethod::Bracketed),
            "golden_section" => Ok(SolveMethod::GoldenSection),
            "boundary" => Ok(SolveMethod::Boundary),
            other => Err(Error::format("solve method", other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSolution {
    pub delta: f64,
    pub objective: f64,
    pub method: SolveMethod,
    /// False when the weighted densities never cross inside the bracket.
    pub crossing: bool,
    pub bracket: (f64, f64),
}

/// The objective being maximized, with its first two derivatives in δ.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdObjective {
    pub neutral: SkewNormalParams,
    pub explicit: SkewNormalParams,
    pub lambda: f64,
    pub side: LambdaSide,
}

impl ThresholdObjective {
    pub fn new(
        neutral: SkewNormalParams,
        explicit: SkewNormalParams,
        lambda: f64,
        side: LambdaSide,
    ) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda_c must be positive and finite, got {lambda}"
            )));
        }
        Ok(ThresholdObjective {
            neutral,
            explicit,
            lambda,
            side,
        })
    }

    pub fn value(&self, delta: f64) -> f64 {
        let (wn, we) = self.side.weights(self.lambda);
        wn * (self.neutral.cdf(delta) - self.neutral.cdf(0.0)) + we * (1.0 - self.explicit.cdf(delta))
    }

    /// `dJ/dδ = w_n p_n(δ) − w_e p_e(δ)`.
    pub fn derivative(&self, delta: f64) -> f64 {
        let (wn, we) = self.side.weights(self.lambda);
        wn * self.neutral.pdf(delta) - we * self.explicit.pdf(delta)
    }

    pub fn second_derivative(&self, delta: f64) -> f64 {
        let (wn, we) = self.side.weights(self.lambda);
        wn * self.neutral.pdf_derivative(delta) - we * self.explicit.pdf_derivative(delta)
    }

    /// `|dJ/dδ|` relative to the largest weighted density at δ.
    pub fn stationarity_residual(&self, delta: f64) -> f64 {
        let (wn, we) = self.side.weights(self.lambda);
        let scale = (wn * self.neutral.pdf(delta)).max(we * self.explicit.pdf(delta));
        if scale == 0.0 {
            0.0
        } else {
            self.derivative(delta).abs() / scale
        }
    }

    /// `[0, max mode + 10·max ω]`.
    pub fn bracket(&self) -> (f64, f64) {
        let top = self.neutral.mode().max(self.explicit.mode());
        let spread = 10.0 * self.neutral.scale.max(self.explicit.scale);
        let hi = top + spread;
        (0.0, if hi > 0.0 { hi } else { spread })
    }

    fn newton(&self, start: f64, lo: f64, hi: f64) -> Option<f64> {
        let mut x = start;
        for _ in 0..NEWTON_MAX_ITER {
            let g = self.derivative(x);
            let h = self.second_derivative(x);
            if !(h != 0.0) || !h.is_finite() {
                return None;
            }
            let step = g / h;
            x -= step;
            if !x.is_finite() || x < lo || x > hi {
                return None;
            }
            if step.abs() <= 1e-14 * x.abs().max(1.0) {
                return (self.second_derivative(x) < 0.0).then_some(x);
            }
        }
        None
    }

    /// Newton with bisection fallback on `[a, b]` where `g(a) > 0 > g(b)`.
    fn bracketed_root(&self, mut a: f64, mut b: f64) -> f64 {
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let g = self.derivative(x);
            if g == 0.0 {
                return x;
            }
            if g > 0.0 {
                a = x;
            } else {
                b = x;
            }
            let h = self.second_derivative(x);
            let newton = x - g / h;
            x = if h != 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a <= 1e-14 * x.abs().max(1.0) {
                break;
            }
        }
        x
    }
}

/// Solves for the selection threshold δ_c.
///
/// Newton's method on the stationarity condition runs first. If it fails to
/// converge to a maximum inside the bracket, golden-section search over a
/// 10,000-cell grid of the objective takes over. Every other crossing of the
/// weighted densities found on the grid is refined as well, and the candidate
/// with the largest objective wins; the bracket endpoints are candidates too,
/// so a threshold is always returned. Ties within 1e-12 keep the earlier
/// candidate in the order Newton, crossings by increasing δ, endpoint 0,
/// upper endpoint, golden section. With identical densities and λ_c = 1 the
/// objective is flat and the result is δ = 0.
pub fn solve_threshold(
    neutral: &SkewNormalParams,
    explicit: &SkewNormalParams,
    lambda_c: f64,
    side: LambdaSide,
) -> Result<ThresholdSolution> {
    let obj = ThresholdObjective::new(*neutral, *explicit, lambda_c, side)?;
    let (lo, hi) = obj.bracket();

    let start = (0.5 * (neutral.mode() + explicit.mode())).clamp(lo, hi);
    let newton = obj.newton(start, lo, hi);

    let step = (hi - lo) / GRID_INTERVALS as f64;
    let grid: Vec<f64> = (0..=GRID_INTERVALS).map(|i| lo + step * i as f64).collect();
    let slopes: Vec<f64> = grid.iter().map(|&x| obj.derivative(x)).collect();

    let mut crossing = newton.is_some();
    let mut candidates: Vec<(f64, SolveMethod)> = Vec::new();
    if let Some(x) = newton {
        candidates.push((x, SolveMethod::Newton));
    }
    for i in 0..GRID_INTERVALS {
        let (g0, g1) = (slopes[i], slopes[i + 1]);
        if (g0 > 0.0 && g1 < 0.0) || (g0 < 0.0 && g1 > 0.0) {
            crossing = true;
        }
        if g0 > 0.0 && g1 <= 0.0 {
            let x = if g1 == 0.0 {
                grid[i + 1]
            } else {
                obj.bracketed_root(grid[i], grid[i + 1])
            };
            let duplicate = candidates
                .iter()
                .any(|(c, _)| (c - x).abs() <= 1e-9 * x.abs().max(1.0));
            if !duplicate {
                candidates.push((x, SolveMethod::Bracketed));
            }
        }
    }
    candidates.push((lo, SolveMethod::Boundary));
    candidates.push((hi, SolveMethod::Boundary));
    if newton.is_none() {
        let values: Vec<f64> = grid.iter().map(|&x| obj.value(x)).collect();
        let best = values
            .iter()
            .enumerate()
            .fold(0usize, |b, (i, v)| if *v > values[b] { i } else { b });
        let a = grid[best.saturating_sub(1)];
        let b = grid[(best + 1).min(GRID_INTERVALS)];
        let x = golden_section_max(|x| obj.value(x), a, b, 1e-12 * hi.max(1.0));
        candidates.push((x, SolveMethod::GoldenSection));
    }

    let mut best: Option<(f64, SolveMethod, f64)> = None;
    for (x, method) in candidates {
        let v = obj.value(x);
        let better = match best {
            None => true,
            Some((_, _, bv)) => v > bv + 1e-12 * bv.abs().max(1.0),
        };
        if better {
            best = Some((x, method, v));
        }
    }
    let (delta, mut method, objective) = best.expect("candidate list is never empty");
    if method == SolveMethod::GoldenSection && (delta - lo).abs() <= step.min(1e-9) {
        method = SolveMethod::Boundary;
    }
    if !crossing {
        log::warn!("weighted densities never cross in [{lo}, {hi}]; returning the best endpoint");
    }
    Ok(ThresholdSolution {
        delta,
        objective,
        method,
        crossing,
        bracket: (lo, hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal(mu: f64) -> SkewNormalParams {
        SkewNormalParams::normal(mu, 1.0).unwrap()
    }

    #[test]
    fn equal_variance_normals_cross_at_midpoint() {
        let s = solve_threshold(&normal(2.0), &normal(6.0), 1.0, LambdaSide::WeightsExplicit).unwrap();
        assert!((s.delta - 4.0).abs() < 1e-9, "{s:?}");
        assert_eq!(s.method, SolveMethod::Newton);
        assert!(s.crossing);
    }

    #[test]
    fn lambda_side_mirrors_the_shift() {
        let lam = 4f64.exp();
        let e = solve_threshold(&normal(2.0), &normal(6.0), lam, LambdaSide::WeightsExplicit).unwrap();
        let n = solve_threshold(&normal(2.0), &normal(6.0), lam, LambdaSide::WeightsNeutral).unwrap();
        assert!((e.delta - 3.0).abs() < 1e-9);
        assert!((n.delta - 5.0).abs() < 1e-9);
    }

    #[test]
    fn identical_densities_return_zero() {
        let p = SkewNormalParams::new(3.0, 1.0, 2.0).unwrap();
        let s = solve_threshold(&p, &p, 1.0, LambdaSide::WeightsExplicit).unwrap();
        assert_eq!(s.delta, 0.0);
        assert!(!s.crossing);
    }

    #[test]
    fn non_positive_lambda_rejected() {
        assert!(solve_threshold(&normal(0.0), &normal(1.0), 0.0, LambdaSide::WeightsExplicit).is_err());
        assert!(solve_threshold(&normal(0.0), &normal(1.0), -1.0, LambdaSide::WeightsExplicit).is_err());
    }

    #[test]
    fn side_names_parse() {
        assert_eq!("weights_neutral".parse::<LambdaSide>().unwrap(), LambdaSide::WeightsNeutral);
        assert!("both".parse::<LambdaSide>().is_err());
    }
}
