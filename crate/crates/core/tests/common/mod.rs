//! Reference implementations for integration tests, coded without the
//! library's numerics.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use circularity::data::{generate, GeneratorKind, GeneratorSpec};
use circularity::OrderedDataset;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn circle(n: usize) -> OrderedDataset {
    generate(&GeneratorSpec::new(GeneratorKind::Circle, n)).unwrap()
}

pub fn helix(n: usize) -> OrderedDataset {
    generate(&GeneratorSpec::new(GeneratorKind::ToroidalHelix, n)).unwrap()
}

pub fn uniform_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.random::<f64>())
}

/// Squared distances by explicit loops.
pub fn squared_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..x.ncols() {
                let t = x[(i, j)] - x[(k, j)];
                s += t * t;
            }
            d[(i, k)] = s;
        }
    }
    d
}

/// Kernel Laplacian by explicit loops.
pub fn laplacian(x: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    let d = squared_distances(x);
    let n = x.nrows();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            if i != k {
                let w = (-d[(i, k)] / sigma).exp();
                l[(i, k)] = -w;
                l[(i, i)] += w;
            }
        }
    }
    l
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() < 1e-15 * a.norm().max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
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
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Pseudoinverse from the Jacobi decomposition, dropping eigenvalues below
/// `rel_floor` times the largest magnitude.
pub fn jacobi_pinv(a: &DMatrix<f64>, rel_floor: f64) -> DMatrix<f64> {
    let (vals, v) = jacobi_eigen(a);
    let top = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let n = a.nrows();
    let mut p = DMatrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        if lam.abs() > rel_floor * top {
            for i in 0..n {
                for j in 0..n {
                    p[(i, j)] += v[(i, k)] * v[(j, k)] / lam;
                }
            }
        }
    }
    p
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut a = a.clone();
    let mut b = b.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .unwrap();
        a.swap_rows(col, pivot);
        b.swap_rows(col, pivot);
        for r in col + 1..n {
            let f = a[(r, col)] / a[(col, col)];
            for c in col..n {
                a[(r, c)] -= f * a[(col, c)];
            }
            for c in 0..m {
                b[(r, c)] -= f * b[(col, c)];
            }
        }
    }
    let mut x = DMatrix::zeros(n, m);
    for c in 0..m {
        for r in (0..n).rev() {
            let mut s = b[(r, c)];
            for k in r + 1..n {
                s -= a[(r, k)] * x[(k, c)];
            }
            x[(r, c)] = s / a[(r, r)];
        }
    }
    x
}

/// `(L^2 + delta I)^{-1} L`, the limit definition of the pseudoinverse of a
/// symmetric matrix at finite `delta`.
pub fn delta_limit_pinv(l: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let n = l.nrows();
    let mut m = l * l;
    for i in 0..n {
        m[(i, i)] += delta;
    }
    gauss_solve(&m, l)
}

/// `sum_i |Z_{i+1} - Z_i|^2` over the closed cycle, one edge at a time.
pub fn brute_energy(z: &DMatrix<f64>) -> f64 {
    let n = z.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let j = if i + 1 == n { 0 } else { i + 1 };
        let mut edge = 0.0;
        for c in 0..z.ncols() {
            let d = z[(j, c)] - z[(i, c)];
            edge += d * d;
        }
        total += edge;
    }
    total
}

pub fn brute_perimeter(z: &DMatrix<f64>) -> f64 {
    let n = z.nrows();
    (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            ((z[(j, 0)] - z[(i, 0)]).powi(2) + (z[(j, 1)] - z[(i, 1)]).powi(2)).sqrt()
        })
        .sum()
}

/// Parametric test: solve `p1 + t (p2 - p1) = q1 + u (q2 - q1)` and accept
/// when both parameters lie in `[0, 1]`. Only meaningful for segments in
/// general position.
pub fn parametric_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let r = [p2[0] - p1[0], p2[1] - p1[1]];
    let s = [q2[0] - q1[0], q2[1] - q1[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom == 0.0 {
        return false;
    }
    let qp = [q1[0] - p1[0], q1[1] - p1[1]];
    let t = (qp[0] * s[1] - qp[1] * s[0]) / denom;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / denom;
    (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)
}

/// Every pair of non-adjacent edges checked with [`parametric_intersect`].
pub fn brute_self_intersects(z: &DMatrix<f64>) -> bool {
    let n = z.nrows();
    let v = |i: usize| [z[(i % n, 0)], z[(i % n, 1)]];
    for i in 0..n {
        for j in 0..n {
            let adjacent = i == j || (i + 1) % n == j || (j + 1) % n == i;
            if !adjacent && parametric_intersect(v(i), v(i + 1), v(j), v(j + 1)) {
                return true;
            }
        }
    }
    false
}

/// Smallest magnitude of any orientation determinant between non-adjacent
/// edges, relative to the squared bounding-box diagonal.
pub fn min_relative_orientation(z: &DMatrix<f64>) -> f64 {
    let n = z.nrows();
    let v = |i: usize| [z[(i % n, 0)], z[(i % n, 1)]];
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs()
    };
    let (xs, ys) = (z.column(0), z.column(1));
    let diag2 = (xs.max() - xs.min()).powi(2) + (ys.max() - ys.min()).powi(2);
    let mut m = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let adjacent = i == j || (i + 1) % n == j || (j + 1) % n == i;
            if adjacent {
                continue;
            }
            let (p1, p2, q1, q2) = (v(i), v(i + 1), v(j), v(j + 1));
            for o in [orient(q1, q2, p1), orient(q1, q2, p2), orient(p1, p2, q1), orient(p1, p2, q2)] {
                m = m.min(o);
            }
        }
    }
    m / diag2
}

/// Central difference of a matrix-valued function.
pub fn central_diff<F>(f: F, x: f64, h: f64) -> DMatrix<f64>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Relative error with an absolute floor on the reference scale.
pub fn rel_err(actual: &DMatrix<f64>, expected: &DMatrix<f64>) -> f64 {
    (actual - expected).norm() / expected.norm().max(1e-300)
}
