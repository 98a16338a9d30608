//! Symmetric eigendecomposition with ascending eigenvalues.
//!
//! [`symmetric_eigen`] wraps nalgebra's tridiagonal QR solver and is what the
//! decomposition uses. [`jacobi_eigen`] is a slower cyclic Jacobi solver kept
//! as an independent cross-check.

use nalgebra::{DMatrix, DVector};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors
/// stored column-wise.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymmetricEigen {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[j]);
        }
        scaled * v.transpose()
    }
}

/// Diagonalizes the symmetric part of `a`; eigenvalues ascending.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> SymmetricEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    let sym = (a + a.transpose()) * 0.5;
    let e = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| e.eigenvalues[x].total_cmp(&e.eigenvalues[y]));
    SymmetricEigen {
        eigenvalues: DVector::from_iterator(n, order.iter().map(|&i| e.eigenvalues[i])),
        eigenvectors: DMatrix::from_fn(n, n, |r, c| e.eigenvectors[(r, order[c])]),
    }
}

/// Diagonalizes the symmetric part of `a` with cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> SymmetricEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    // row-major working copies
    let mut m: Vec<f64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            0.5 * (a[(i, j)] + a[(j, i)])
        })
        .collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= f64::EPSILON * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[x * n + x].total_cmp(&m[y * n + y]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| m[i * n + i]));
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    SymmetricEigen {
        eigenvalues,
        eigenvectors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a + a.transpose()
    }

    #[test]
    fn reconstructs_and_matches_reference_solver() {
        for (n, seed) in [(1, 0), (2, 1), (5, 2), (37, 3), (40, 4)] {
            let a = random_symmetric(n, seed);
            let e = jacobi_eigen(&a);
            let back = e.reconstruct_with(|l| l);
            assert!((&back - &a).amax() <= 1e-9, "n={n}");
            let vtv = e.eigenvectors.transpose() * &e.eigenvectors;
            assert!((vtv - DMatrix::identity(n, n)).amax() < 1e-12);

            let mut reference: Vec<f64> = nalgebra::SymmetricEigen::new(a.clone())
                .eigenvalues
                .iter()
                .copied()
                .collect();
            reference.sort_by(f64::total_cmp);
            for (x, y) in e.eigenvalues.iter().zip(&reference) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn solvers_agree() {
        for (n, seed) in [(3, 10), (19, 11), (37, 12)] {
            let a = random_symmetric(n, seed);
            let (x, y) = (symmetric_eigen(&a), jacobi_eigen(&a));
            assert!((&x.eigenvalues - &y.eigenvalues).amax() < 1e-10);
            let back = x.reconstruct_with(|l| l);
            assert!((&back - &a).amax() <= 1e-9);
            let f = |l: f64| l.abs().sqrt();
            assert!((x.reconstruct_with(f) - y.reconstruct_with(f)).amax() < 1e-8);
        }
    }

    #[test]
    fn diagonal_input_is_already_solved() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = jacobi_eigen(&a);
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn ones_matrix_spectrum() {
        let e = jacobi_eigen(&DMatrix::from_element(2, 2, 1.0));
        assert!(e.eigenvalues[0].abs() < 1e-15);
        assert!((e.eigenvalues[1] - 2.0).abs() < 1e-15);
    }
}
