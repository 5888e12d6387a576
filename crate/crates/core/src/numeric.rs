//! Small numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Thin singular value decomposition `M = U diag(σ) Vᵀ`, σ sorted
/// descending. For a square input `v_t` is a full orthogonal matrix.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

/// One-sided Jacobi SVD. nalgebra's bidiagonal SVD can stop early with
/// reconstruction errors near 1e-7 when singular values are close; Jacobi
/// rotations are accurate to working precision on the small matrices used
/// here.
pub fn svd(m: &DMatrix<f64>) -> Svd {
    if m.nrows() < m.ncols() {
        let t = svd(&m.transpose());
        return Svd {
            u: t.v_t.transpose(),
            singular_values: t.singular_values,
            v_t: t.u.transpose(),
        };
    }
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for target in [&mut a, &mut v] {
                    for i in 0..target.nrows() {
                        let (xp, xq) = (target[(i, p)], target[(i, q)]);
                        target[(i, p)] = c * xp - s * xq;
                        target[(i, q)] = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = DMatrix::zeros(m.nrows(), n);
    let mut v_t = DMatrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        if norms[j] > 0.0 {
            u.set_column(k, &(a.column(j) / norms[j]));
        }
        v_t.set_row(k, &v.column(j).transpose());
    }
    Svd {
        u,
        singular_values: DVector::from_iterator(n, order.iter().map(|&j| norms[j])),
        v_t,
    }
}

/// Canonical float rendering: 17 significant digits in scientific notation.
///
/// Parsing the output yields the original `f64` bit pattern, and rendering
/// that again yields the same text.
pub fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// One classical fourth-order Runge-Kutta step for `y' = f(t, y)`.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Matrix-valued RK4 step for `Y' = f(t, Y)`.
pub fn rk4_step_mat<F>(f: &mut F, t: f64, y: &DMatrix<f64>, h: f64) -> DMatrix<f64>
where
    F: FnMut(f64, &DMatrix<f64>) -> DMatrix<f64>,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Number of uniform steps of size at most `dt` covering `len`.
pub fn step_count(len: f64, dt: f64) -> usize {
    if len <= 0.0 {
        0
    } else {
        ((len / dt) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `x > 0`, false for NaN.
pub fn is_positive(x: f64) -> bool {
    x > 0.0
}

/// Largest singular value (spectral norm).
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    svd(m).singular_values.iter().fold(0.0f64, |acc, s| acc.max(*s))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Parse a comma-separated vector such as `"1,0,-2.5"`.
pub fn parse_vector(text: &str) -> Result<DVector<f64>, String> {
    let values: Result<Vec<f64>, _> = text
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>())
        .collect();
    values
        .map(DVector::from_vec)
        .map_err(|e| format!("bad vector `{text}`: {e}"))
}
