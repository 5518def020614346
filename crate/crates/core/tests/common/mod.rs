//! Reference computations for the integration tests, written without the
//! library's own quadrature or estimator code.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// `u − u³/6` on `[−√2, √2]`, clamped to `±2√2/3` outside.
pub fn psi(u: f64) -> f64 {
    let edge = std::f64::consts::SQRT_2;
    if u.abs() >= edge {
        u.signum() * 2.0 * edge / 3.0
    } else {
        u - u * u * u / 6.0
    }
}

/// Golub–Welsch: nodes and weights from a symmetric tridiagonal Jacobi matrix
/// with zero diagonal and the given off-diagonal. Weights are scaled so they
/// sum to `mass`.
fn golub_welsch(off: impl Fn(usize) -> f64, n: usize, mass: f64) -> Vec<(f64, f64)> {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = off(k);
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mass * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// Probabilists' Gauss–Hermite rule: `Σ wᵢ f(xᵢ) ≈ E f(Z)`, `Z ~ N(0, 1)`.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    golub_welsch(|k| (k as f64).sqrt(), n, 1.0)
}

/// Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    golub_welsch(|k| k as f64 / ((4 * k * k - 1) as f64).sqrt(), n, 2.0)
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E ψ(a + bZ)` by an unsplit Gauss–Hermite rule.
pub fn expectation_hermite(rule: &[(f64, f64)], a: f64, b: f64) -> f64 {
    rule.iter().map(|(z, w)| w * psi(a + b * z)).sum()
}

/// `E ψ(a + bZ)` by Gauss–Legendre panels on `[−40, 40]`, broken at the
/// two points where `ψ` changes form so that every panel is smooth.
pub fn expectation_split(rule: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let edge = std::f64::consts::SQRT_2;
    let mut cuts = vec![-40.0, 40.0];
    for k in [(-edge - a) / b, (edge - a) / b] {
        if k > -40.0 && k < 40.0 {
            cuts.push(k);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let panels = ((hi - lo) / 4.0).ceil().max(1.0) as usize;
        let width = (hi - lo) / panels as f64;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * width;
            let half = 0.5 * width;
            total += rule
                .iter()
                .map(|(x, w)| {
                    let z = mid + half * x;
                    w * half * psi(a + b * z) * std_normal_pdf(z)
                })
                .sum::<f64>();
        }
    }
    total
}

/// `Σ ‖y − pᵢ‖`.
pub fn sum_of_distances(points: &[Vec<f64>], y: &[f64]) -> f64 {
    points
        .iter()
        .map(|p| p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .sum()
}

/// Planar geometric median by zooming grid search: a 201 × 201 grid over
/// the bounding box, re-centred on the best cell and narrowed tenfold until
/// the spacing falls below `resolution`.
pub fn grid_median(points: &[Vec<f64>], resolution: f64) -> Vec<f64> {
    let lo = |j: usize| points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
    let hi = |j: usize| points.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
    let mut center = [(lo(0) + hi(0)) / 2.0, (lo(1) + hi(1)) / 2.0];
    let mut half = ((hi(0) - lo(0)).max(hi(1) - lo(1)) / 2.0).max(1e-9);
    let steps = 100;
    loop {
        let spacing = half / steps as f64;
        let mut best = (f64::INFINITY, center);
        for i in -steps..=steps {
            for j in -steps..=steps {
                let y = [center[0] + i as f64 * spacing, center[1] + j as f64 * spacing];
                let f = sum_of_distances(points, &y);
                if f < best.0 {
                    best = (f, y);
                }
            }
        }
        center = best.1;
        if spacing < resolution {
            return center.to_vec();
        }
        half = 10.0 * spacing;
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}
