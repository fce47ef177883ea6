//! Plain complex vectors, dense Hermitian matrices and the shared operator trait.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Anything that maps a lattice vector to a lattice vector linearly.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[Complex64]) -> Vec<Complex64>;
}

/// `Σ conj(a_i) b_i`.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `‖a - b‖`.
pub fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Gaussian random complex vector, unit Euclidean norm.
pub fn random_unit_vector(dim: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..dim).map(|_| Complex64::new(standard_normal(rng), standard_normal(rng))).collect();
    let n = norm(&v);
    for x in &mut v {
        *x /= n;
    }
    v
}

/// `count` unit vectors from a ChaCha8 stream seeded with `seed`.
pub fn seeded_unit_vectors(dim: usize, count: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_unit_vector(dim, &mut rng)).collect()
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Dense Hermitian matrix in the lattice-point basis.
#[derive(Debug, Clone)]
pub struct DenseHermitian {
    matrix: Mat<c64>,
}

impl PartialEq for DenseHermitian {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

/// Largest dimension handed to the dense eigensolver.
pub const DENSE_CAP: usize = 4096;

impl DenseHermitian {
    /// Wraps `matrix` after checking `|M - M†| ≤ 1e-10·max(1, max|M|)`; the
    /// stored matrix is the exact Hermitian part.
    pub fn new(matrix: Mat<c64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.ncols() });
        }
        let mut scale: f64 = 1.0;
        let mut deviation: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                scale = scale.max(matrix[(i, j)].norm());
                deviation = deviation.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
            }
        }
        if deviation > 1e-10 * scale {
            return Err(Error::NotHermitian { deviation });
        }
        let matrix = Mat::from_fn(n, n, |i, j| (matrix[(i, j)] + matrix[(j, i)].conj()) * 0.5);
        Ok(Self { matrix })
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        Self::new(Mat::from_fn(n, n, f))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            matrix: Mat::from_fn(
                n,
                n,
                |i, j| {
                    if i == j {
                        Complex64::new(values[i], 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                },
            ),
        }
    }

    /// `(A + A†)/2` with i.i.d. standard complex Gaussian entries in `A`.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Mat::from_fn(n, n, |_, _| Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng)));
        Self { matrix: Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    /// Eigenvalues ascending and orthonormal eigenvectors as columns.
    pub fn eigen(&self) -> Result<(Vec<f64>, Mat<c64>)> {
        if self.dim() > DENSE_CAP {
            return Err(Error::CapExceeded { points: self.dim(), cap: DENSE_CAP });
        }
        let evd = self.matrix.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let values: Vec<f64> = evd.S().column_vector().iter().map(|v| v.re).collect();
        let vectors = evd.U().to_owned();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        if order.iter().enumerate().all(|(i, &j)| i == j) {
            return Ok((values, vectors));
        }
        let n = self.dim();
        let sorted = order.iter().map(|&j| values[j]).collect();
        let vecs = Mat::from_fn(n, n, |i, c| vectors[(i, order[c])]);
        Ok((sorted, vecs))
    }

    /// Solves `(M - z) x = b` by LU with partial pivoting.
    pub fn solve_shifted(&self, z: Complex64, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        let shifted = Mat::from_fn(n, n, |i, j| if i == j { self.matrix[(i, j)] - z } else { self.matrix[(i, j)] });
        let lu = shifted.partial_piv_lu();
        let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
        let x = lu.solve(&rhs);
        let out: Vec<Complex64> = (0..n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularShift { z });
        }
        Ok(out)
    }
}

impl LinearOperator for DenseHermitian {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            let vj = v[j];
            if vj == Complex64::new(0.0, 0.0) {
                continue;
            }
            let col = self.matrix.col(j);
            for (o, m) in out.iter_mut().zip(col.iter()) {
                *o += m * vj;
            }
        }
        out
    }
}

/// Restarted GMRES for `(A - z) x = b`.
///
/// Returns the iterate and its true relative residual.
pub fn gmres_shifted(
    op: &dyn LinearOperator,
    z: Complex64,
    b: &[Complex64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<Complex64>, f64)> {
    let n = op.dim();
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        let mut w = op.apply(v);
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi -= z * vi;
        }
        w
    };
    let bnorm = norm(b);
    let zero = Complex64::new(0.0, 0.0);
    if bnorm == 0.0 {
        return Ok((vec![zero; n], 0.0));
    }
    let mut x = vec![zero; n];
    let mut iterations = 0;
    let mut rel = 1.0;
    while iterations < max_iter {
        let ax = apply(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel < tol {
            return Ok((x, rel));
        }
        let m = restart.min(n);
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![zero; m]; m + 1];
        let mut cs = vec![zero; m];
        let mut sn = vec![zero; m];
        let mut g = vec![zero; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            iterations += 1;
            let mut w = apply(&basis[k]);
            // modified Gram-Schmidt, twice for stability
            for _ in 0..2 {
                for (j, q) in basis.iter().enumerate() {
                    let c = dot(q, &w);
                    h[j][k] += c;
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = Complex64::new(wn, 0.0);
            for j in 0..k {
                let t = cs[j].conj() * h[j][k] + sn[j].conj() * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let a = h[k][k];
            let bb = h[k + 1][k];
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = a / denom;
            sn[k] = bb / denom;
            h[k][k] = Complex64::new(denom, 0.0);
            h[k + 1][k] = zero;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            k_used = k + 1;
            let breakdown = wn <= 1e-14 * bnorm;
            if !breakdown {
                basis.push(w.iter().map(|v| v / wn).collect());
            }
            if g[k + 1].norm() / bnorm < tol * 0.5 || breakdown || iterations >= max_iter {
                break;
            }
        }
        // back substitution on the k_used × k_used triangle
        let mut y = vec![zero; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, qi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * qi;
            }
        }
    }
    let ax = apply(&x);
    let r = b.iter().zip(&ax).map(|(b, a)| (b - a).norm_sqr()).sum::<f64>().sqrt();
    rel = rel.min(r / bnorm);
    if r / bnorm < tol {
        return Ok((x, r / bnorm));
    }
    Err(Error::NoConvergence { residual: rel, iterations })
}

/// `|⟨φ,Aψ⟩ - conj⟨ψ,Aφ⟩|` on `trials` random pairs, the largest value seen.
pub fn hermiticity_defect(op: &dyn LinearOperator, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let phi = random_unit_vector(op.dim(), &mut rng);
        let psi = random_unit_vector(op.dim(), &mut rng);
        let a = dot(&phi, &op.apply(&psi));
        let b = dot(&psi, &op.apply(&phi)).conj();
        worst = worst.max((a - b).norm());
    }
    worst
}
