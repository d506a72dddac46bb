//! Independent reference implementations used to check the library.
//!
//! None of these call into the code under test beyond plain data types.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn frob(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Eigenvalues come back in
/// descending order with eigenvectors as the matching columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * frob(&a).max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_columns(&order.iter().map(|&i| v.column(i).into_owned()).collect::<Vec<_>>());
    (values, vectors)
}

/// Top-k left singular vectors and values of `m` via Jacobi on `m mᵀ`.
pub fn top_singular(m: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let (vals, vecs) = jacobi_eigen(&(m * m.transpose()));
    let sv = vals.iter().take(k).map(|v| v.max(0.0).sqrt()).collect();
    (sv, vecs.columns(0, k).into_owned())
}

/// `‖P − P⊥‖² + λ‖P Zs − Zt‖²`, written out directly.
pub fn calib_loss(p: &DMatrix<f64>, p_perp: &DMatrix<f64>, zs: &DMatrix<f64>, zt: &DMatrix<f64>, lambda: f64) -> f64 {
    let a = frob(&(p - p_perp));
    let b = frob(&(p * zs - zt));
    a * a + lambda * b * b
}

/// Central finite-difference gradient of `f` at `p`.
pub fn finite_diff_gradient<F: Fn(&DMatrix<f64>) -> f64>(f: F, p: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(p.nrows(), p.ncols());
    let mut x = p.clone();
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let orig = x[(i, j)];
            x[(i, j)] = orig + h;
            let fp = f(&x);
            x[(i, j)] = orig - h;
            let fm = f(&x);
            x[(i, j)] = orig;
            g[(i, j)] = (fp - fm) / (2.0 * h);
        }
    }
    g
}

/// Gradient descent on the calibration loss with the exact Lipschitz step,
/// using the gradient derived from the loss by hand.
pub fn calib_gradient_descent(
    p_perp: &DMatrix<f64>,
    zs: &DMatrix<f64>,
    zt: &DMatrix<f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> DMatrix<f64> {
    let zzt = zs * zs.transpose();
    let (ev, _) = jacobi_eigen(&zzt);
    let lipschitz = 2.0 * (1.0 + lambda * ev[0].max(0.0));
    let step = 1.0 / lipschitz;
    let mut p = p_perp.clone();
    for _ in 0..max_iter {
        let g = (&p - p_perp) * 2.0 + (&p * zs - zt) * zs.transpose() * (2.0 * lambda);
        if frob(&g) <= tol * (1.0 + frob(&p)) {
            break;
        }
        p -= g * step;
    }
    p
}

/// Standard normal CDF by composite Simpson integration of the density.
pub fn phi_cdf(z: f64) -> f64 {
    if z < -12.0 {
        return 0.0;
    }
    if z > 12.0 {
        return 1.0;
    }
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let half = 0.5;
    let (a, b, sign) = if z >= 0.0 { (0.0, z, 1.0) } else { (z, 0.0, -1.0) };
    half + sign * simpson(density, a, b, 2000)
}

pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Skew-normal density built only from the definition.
pub fn sn_pdf(x: f64, loc: f64, scale: f64, shape: f64) -> f64 {
    let z = (x - loc) / scale;
    let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    2.0 / scale * phi * 0.5 * libm::erfc(-shape * z / std::f64::consts::SQRT_2)
}

/// Golden-section maximizer of `f` on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Threshold oracle: integrate the weighted density difference on a dense
/// grid, take the best grid point, then polish with golden section on a
/// Simpson-integrated objective around it.
pub fn threshold_oracle(
    neutral: (f64, f64, f64),
    explicit: (f64, f64, f64),
    wn: f64,
    we: f64,
    hi: f64,
    grid: usize,
) -> f64 {
    let g = |x: f64| wn * sn_pdf(x, neutral.0, neutral.1, neutral.2) - we * sn_pdf(x, explicit.0, explicit.1, explicit.2);
    let h = hi / grid as f64;
    let mut acc = 0.0;
    let mut best = (0.0, 0.0);
    let mut prev = g(0.0);
    for i in 1..=grid {
        let x = h * i as f64;
        let cur = g(x);
        let mid = g(x - 0.5 * h);
        acc += h / 6.0 * (prev + 4.0 * mid + cur);
        if acc > best.1 {
            best = (x, acc);
        }
        prev = cur;
    }
    let x0 = best.0;
    let lo = (x0 - 2.0 * h).max(0.0);
    let up = (x0 + 2.0 * h).min(hi);
    golden_max(|x| simpson(g, lo, x, 200), lo, up, 1e-10)
}

/// Least-squares linear probe `w` with intercept, fitted by ridge normal equations.
pub fn fit_linear_probe(x: &DMatrix<f64>, y: &[f64], ridge: f64) -> (DVector<f64>, f64) {
    let d = x.nrows();
    let n = x.ncols();
    let mut aug = DMatrix::zeros(d + 1, n);
    aug.rows_mut(0, d).copy_from(x);
    aug.row_mut(d).fill(1.0);
    let mut a = &aug * aug.transpose();
    for i in 0..d {
        a[(i, i)] += ridge;
    }
    let b = &aug * DVector::from_column_slice(y);
    let sol = a.lu().solve(&b).expect("probe system is regular");
    (sol.rows(0, d).into_owned(), sol[d])
}

/// Mean of the columns of `m`.
pub fn centroid(m: &DMatrix<f64>) -> DVector<f64> {
    let mut c = DVector::zeros(m.nrows());
    for col in m.column_iter() {
        c += col;
    }
    c / m.ncols() as f64
}
