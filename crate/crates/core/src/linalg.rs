//! Small dense linear algebra: row-major matrices, vector helpers, and a
//! cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Problem sizes here are tens of variables, so everything is plain `Vec<f64>`
//! with explicit loops. Dot products accumulate left to right, which keeps
//! independently written iterations bit-comparable.

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Mat {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Build from row slices; panics if rows are ragged.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n_rows = rows.len();
        let n_cols = if n_rows > 0 { rows[0].len() } else { 0 };
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols);
        Mat {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// (A + A^T)/2; requires square.
    pub fn symmetric_part(&self) -> Mat {
        assert!(self.is_square());
        let n = self.n_rows;
        let mut s = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            y[i] = dot(self.row(i), x);
        }
        y
    }

    /// Rows `[start, start+len)` times x.
    pub fn rows_matvec(&self, start: usize, len: usize, x: &[f64]) -> Vec<f64> {
        assert!(start + len <= self.n_rows);
        let mut y = vec![0.0; len];
        for (out, i) in y.iter_mut().zip(start..start + len) {
            *out = dot(self.row(i), x);
        }
        y
    }

    /// Max absolute entry of A - A^T.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for j in (i + 1)..self.n_cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn scale(&self, c: f64) -> Mat {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= c;
        }
        m
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        m
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a -= *b;
        }
        m
    }

    /// C = A B.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.n_cols, other.n_rows);
        let mut c = Mat::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.n_cols {
                    c[(i, j)] += a * other[(k, j)];
                }
            }
        }
        c
    }

    /// Spectral norm of the symmetric part (max |eigenvalue|).
    pub fn sym_spectral_norm(&self) -> f64 {
        let eigs = jacobi_eigenvalues(&self.symmetric_part()).0;
        eigs.iter().fold(0.0f64, |m, &l| m.max(l.abs()))
    }

    /// Spectral norm of a rectangular block: sqrt(lambda_max(A^T A)).
    pub fn operator_norm(&self) -> f64 {
        let gram = self.transpose().matmul(self);
        let eigs = jacobi_eigenvalues(&gram).0;
        eigs.iter().fold(0.0f64, |m, &l| m.max(l)).max(0.0).sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc.sqrt()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted in descending order and the matching
/// eigenvectors as columns. Input must be symmetric; the strictly lower
/// triangle is ignored in favor of the upper one.
pub fn jacobi_eigenvalues(a: &Mat) -> (Vec<f64>, Mat) {
    assert!(a.is_square());
    let n = a.n_rows;
    if n == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    let mut m = a.symmetric_part();
    let mut v = Mat::identity(n);

    let scale: f64 = {
        let mut s = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                s = s.max(m[(i, j)].abs());
            }
        }
        s.max(1.0)
    };
    let tol = 1e-15 * scale;

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[(p, q)].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                // stable tangent of the rotation angle
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
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
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());

    let eigs: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, new_col)] = v[(k, old_col)];
        }
    }
    (eigs, vecs)
}

/// i-th point of the Halton low-discrepancy sequence in [0,1)^dim.
///
/// Used for reproducible multistart seeding; index 0 maps to the box center
/// when rescaled because halton(0) = origin is skipped (indices start at 1).
pub fn halton_point(index: usize, dim: usize) -> Vec<f64> {
    const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    assert!(dim <= PRIMES.len(), "halton dimension too large");
    (0..dim)
        .map(|d| {
            let base = PRIMES[d];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_identity() {
        let (eigs, _) = jacobi_eigenvalues(&Mat::identity(3));
        for l in eigs {
            assert!((l - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobi_known_2x2() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1
        let m = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let (eigs, vecs) = jacobi_eigenvalues(&m);
        assert!((eigs[0] - 3.0).abs() < 1e-12);
        assert!((eigs[1] - 1.0).abs() < 1e-12);
        // residual check ||Av - lv||
        for (idx, &l) in eigs.iter().enumerate() {
            let v: Vec<f64> = (0..2).map(|k| vecs[(k, idx)]).collect();
            let av = m.matvec(&v);
            let res: f64 = av
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - l * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-12);
        }
    }

    #[test]
    fn jacobi_skew_symmetric_part_vanishes() {
        let m = Mat::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let (eigs, _) = jacobi_eigenvalues(&m);
        assert!(eigs[0].abs() < 1e-14);
        assert!(eigs[1].abs() < 1e-14);
    }

    #[test]
    fn jacobi_trace_matches_eig_sum() {
        let m = Mat::from_rows(&[
            &[4.0, 1.0, 0.5],
            &[1.0, 3.0, -0.25],
            &[0.5, -0.25, 2.0],
        ]);
        let (eigs, _) = jacobi_eigenvalues(&m);
        let trace = 4.0 + 3.0 + 2.0;
        assert!((eigs.iter().sum::<f64>() - trace).abs() < 1e-10);
    }

    #[test]
    fn operator_norm_rectangular() {
        // row vector [3,4]: norm 5
        let m = Mat::from_rows(&[&[3.0, 4.0]]);
        assert!((m.operator_norm() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn halton_in_unit_cube() {
        for i in 1..100 {
            let p = halton_point(i, 5);
            assert!(p.iter().all(|&x| (0.0..1.0).contains(&x)));
        }
    }
}
