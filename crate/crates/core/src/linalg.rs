//! Small dense linear algebra used by the design pipeline.
//!
//! Everything here targets the desk scale of the library (state dimension up
//! to about 20): a row-major [`Mat`], cyclic Jacobi rotations for symmetric
//! eigenproblems, power iteration for spectral norms, LU with partial
//! pivoting, and a vectorized Lyapunov solver.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("matrix rows have unequal lengths")]
    Ragged,
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::Ragged);
        }
        Ok(Self { rows: r, cols: c, data: rows.concat() })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn column(v: &[f64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn diag(v: &[f64]) -> Self {
        let mut m = Self::zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "vector length must equal column count");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn add(&self, other: &Mat) -> Result<Mat, LinalgError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat, LinalgError> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Result<Mat, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Quadratic form `x'Mx`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        let mx = self.mul_vec(x);
        x.iter().zip(&mx).map(|(a, b)| a * b).sum()
    }

    pub fn symmetrize(&self) -> Mat {
        let t = self.transpose();
        let mut s = self.add(&t).expect("square matrix");
        s.data.iter_mut().for_each(|v| *v *= 0.5);
        s
    }

    /// Largest singular value, by power iteration on the Gram matrix `M'M`.
    ///
    /// Stops when the Rayleigh quotient changes by less than `1e-10`
    /// relative, or after `10_000` iterations.
    pub fn spectral_norm(&self) -> f64 {
        const TOL: f64 = 1e-10;
        const MAX_ITER: usize = 10_000;
        if self.data.iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        let gram = self.transpose().matmul(self).expect("conformant");
        let n = gram.rows;
        // a slightly asymmetric start avoids being orthogonal to the
        // dominant eigenvector for structured matrices
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64 + 1.0).sqrt()).collect();
        normalize(&mut v);
        let mut lambda = 0.0;
        for _ in 0..MAX_ITER {
            let mut w = gram.mul_vec(&v);
            let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            if normalize(&mut w) == 0.0 {
                return 0.0;
            }
            v = w;
            if (next - lambda).abs() <= TOL * next.abs().max(f64::MIN_POSITIVE) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.max(0.0).sqrt()
    }

    /// Solve `M x = b` by LU decomposition with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        Lu::factor(self)?.solve(b)
    }

    pub fn inverse(&self) -> Result<Mat, LinalgError> {
        let lu = Lu::factor(self)?;
        let n = self.rows;
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = lu.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    pub fn powi(&self, k: usize) -> Result<Mat, LinalgError> {
        let mut out = Mat::identity(self.rows);
        for _ in 0..k {
            out = out.matmul(self)?;
        }
        Ok(out)
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Mat::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

struct Lu {
    n: usize,
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(m: &Mat) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::Dimension(format!("LU of {}x{}", m.rows, m.cols)));
        }
        let n = m.rows;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = m.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let tiny = scale * f64::EPSILON * n as f64;
        for col in 0..n {
            let (pivot_row, pivot) = (col..n)
                .map(|r| (r, lu[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= tiny || pivot == 0.0 {
                return Err(LinalgError::Singular { column: col, pivot });
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.data.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
            }
            let d = lu[(col, col)];
            for r in (col + 1)..n {
                let factor = lu[(r, col)] / d;
                lu[(r, col)] = factor;
                if factor != 0.0 {
                    for j in (col + 1)..n {
                        let v = lu[(col, j)];
                        lu[(r, j)] -= factor * v;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::Dimension(format!("rhs of length {} for order {n}", b.len())));
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| self.lu[(i, j)] * y[j]).sum();
            y[i] = (y[i] - s) / self.lu[(i, i)];
        }
        Ok(y)
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, ordered like `values`.
    pub vectors: Mat,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }
}

/// Cyclic Jacobi rotations for a symmetric matrix.
///
/// Sweeps until the off-diagonal Frobenius norm is at most `1e-12` times
/// the Frobenius norm of the input (absolute `1e-300` floor), capped at 100
/// sweeps. Only the upper triangle is read.
pub fn sym_eigen(m: &Mat) -> Result<SymEigen, LinalgError> {
    const TOL: f64 = 1e-12;
    const MAX_SWEEPS: usize = 100;
    if !m.is_square() {
        return Err(LinalgError::Dimension(format!("eigen of {}x{}", m.rows, m.cols)));
    }
    let n = m.rows;
    let mut a = m.symmetrize();
    let mut v = Mat::identity(n);
    let target = (TOL * a.frobenius()).max(1e-300);

    let off = |a: &Mat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        s.sqrt()
    };

    for _ in 0..MAX_SWEEPS {
        if off(&a) <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
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
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, col)] = v[(r, src)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Solve `A'X + XA + Q = 0` for `X` by a dense solve of the `n²`-dimensional
/// vectorized system. The result is symmetrized.
pub fn solve_lyapunov(a: &Mat, q: &Mat) -> Result<Mat, LinalgError> {
    if !a.is_square() || !q.is_square() || a.rows != q.rows {
        return Err(LinalgError::Dimension("lyapunov operands must be square and equal".into()));
    }
    let n = a.rows;
    let nn = n * n;
    let mut op = Mat::zeros(nn, nn);
    // row (i, j) of the operator, column (k, l) holds the coefficient of X[k][l]
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                op[(row, k * n + j)] += a[(k, i)];
            }
            for l in 0..n {
                op[(row, i * n + l)] += a[(l, j)];
            }
        }
    }
    let rhs: Vec<f64> = q.data.iter().map(|v| -v).collect();
    let x = op.solve(&rhs)?;
    Ok(Mat::from_row_major(n, n, x)?.symmetrize())
}

/// Hurwitz test: `A'P + PA = -I` has a symmetric positive definite
/// solution exactly when every eigenvalue of `A` has negative real part.
pub fn is_hurwitz(a: &Mat) -> bool {
    if !a.is_square() {
        return false;
    }
    match solve_lyapunov(a, &Mat::identity(a.rows)) {
        Ok(p) => p.as_slice().iter().all(|v| v.is_finite()) && sym_eigen(&p).is_ok_and(|e| e.min() > 0.0),
        Err(_) => false,
    }
}

/// Coefficients of the characteristic polynomial `det(sI - M)`, highest
/// degree first (leading coefficient 1), by the Faddeev-LeVerrier recursion.
pub fn char_poly(m: &Mat) -> Result<Vec<f64>, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::Dimension("characteristic polynomial of non-square matrix".into()));
    }
    let n = m.rows;
    let mut coeffs = vec![1.0];
    let mut mk = Mat::zeros(n, n);
    let mut c_prev = 1.0;
    for k in 1..=n {
        // M_k = M (M_{k-1} + c_{k-1} I)
        let mut inner = mk.clone();
        for i in 0..n {
            inner[(i, i)] += c_prev;
        }
        mk = m.matmul(&inner)?;
        let trace: f64 = (0..n).map(|i| mk[(i, i)]).sum();
        let ck = -trace / k as f64;
        coeffs.push(ck);
        c_prev = ck;
    }
    Ok(coeffs)
}

/// Monic polynomial with the given real roots, highest degree first.
pub fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut p = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; p.len() + 1];
        for (i, &c) in p.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= r * c;
        }
        p = next;
    }
    p
}

/// Evaluate a matrix polynomial `p(M)` with coefficients highest degree first.
pub fn poly_matrix(coeffs: &[f64], m: &Mat) -> Result<Mat, LinalgError> {
    let n = m.rows;
    let mut acc = Mat::zeros(n, n);
    for &c in coeffs {
        acc = acc.matmul(m)?;
        for i in 0..n {
            acc[(i, i)] += c;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes_two_by_two() {
        let m = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = sym_eigen(&m).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        let v = e.vectors;
        let recon = v.matmul(&Mat::diag(&e.values)).unwrap().matmul(&v.transpose()).unwrap();
        assert!(recon.sub(&m).unwrap().frobenius() < 1e-13);
    }

    #[test]
    fn spectral_norm_matches_jacobi_on_gram() {
        let m = Mat::from_rows(&[vec![1.0, 2.0, 0.0], vec![-1.0, 0.5, 3.0]]).unwrap();
        let gram = m.transpose().matmul(&m).unwrap();
        let expected = sym_eigen(&gram).unwrap().max().sqrt();
        assert!((m.spectral_norm() - expected).abs() < 1e-9 * expected);
        assert_eq!(Mat::zeros(3, 3).spectral_norm(), 0.0);
        assert_eq!(Mat::identity(1).spectral_norm(), 1.0);
    }

    #[test]
    fn lyapunov_residual_is_small() {
        let a = Mat::from_rows(&[vec![-1.0, 2.0], vec![0.0, -3.0]]).unwrap();
        let q = Mat::identity(2);
        let x = solve_lyapunov(&a, &q).unwrap();
        let res = a.transpose().matmul(&x).unwrap().add(&x.matmul(&a).unwrap()).unwrap().add(&q).unwrap();
        assert!(res.frobenius() < 1e-12);
        assert!(sym_eigen(&x).unwrap().min() > 0.0);
    }

    #[test]
    fn hurwitz_test() {
        assert!(is_hurwitz(&Mat::from_rows(&[vec![-1.0]]).unwrap()));
        assert!(!is_hurwitz(&Mat::from_rows(&[vec![0.0]]).unwrap()));
        assert!(is_hurwitz(&Mat::from_rows(&[vec![0.0, 1.0], vec![-2.0, -3.0]]).unwrap()));
        assert!(!is_hurwitz(&Mat::from_rows(&[vec![0.0, 1.0], vec![2.0, -1.0]]).unwrap()));
        // rotation with positive real part
        assert!(!is_hurwitz(&Mat::from_rows(&[vec![0.1, 1.0], vec![-1.0, 0.1]]).unwrap()));
    }

    #[test]
    fn singular_system_is_reported() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(m.solve(&[1.0, 1.0]), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn char_poly_of_companion() {
        // roots -1, -2: s^2 + 3s + 2
        let m = Mat::from_rows(&[vec![0.0, 1.0], vec![-2.0, -3.0]]).unwrap();
        let p = char_poly(&m).unwrap();
        assert_eq!(p, vec![1.0, 3.0, 2.0]);
        assert_eq!(poly_from_roots(&[-1.0, -2.0]), vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn inverse_round_trip() {
        let m = Mat::from_rows(&[vec![4.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let prod = m.matmul(&m.inverse().unwrap()).unwrap();
        assert!(prod.sub(&Mat::identity(2)).unwrap().frobenius() < 1e-14);
    }

    #[test]
    fn serde_is_row_major() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0]]");
        let back: Mat = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
