use crate::error::{Error, Result};
use crate::Real;

use super::vector::{dot, norm2};
use super::Matrix;

/// Householder reflections applied in place to `a`.
///
/// Returns the reflector vectors (one per step, `None` when the column was
/// already zero below the diagonal) and the column permutation.
fn householder<T: Real>(a: &mut Matrix<T>, pivot: bool) -> (Vec<Option<Vec<T>>>, Vec<usize>) {
    let (m, n) = (a.rows(), a.cols());
    let k = m.min(n);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors = Vec::with_capacity(k);

    for j in 0..k {
        if pivot {
            let col_norm = |a: &Matrix<T>, c: usize| -> T {
                (j..m).map(|i| a[(i, c)] * a[(i, c)]).sum::<T>()
            };
            let mut best = j;
            let mut best_norm = col_norm(a, j);
            for c in j + 1..n {
                let nc = col_norm(a, c);
                if nc > best_norm {
                    best = c;
                    best_norm = nc;
                }
            }
            if best != j {
                for i in 0..m {
                    let tmp = a[(i, j)];
                    a[(i, j)] = a[(i, best)];
                    a[(i, best)] = tmp;
                }
                perm.swap(j, best);
            }
        }

        let x: Vec<T> = (j..m).map(|i| a[(i, j)]).collect();
        let norm_x = norm2(&x);
        if norm_x == T::zero() {
            reflectors.push(None);
            continue;
        }
        let alpha = if x[0] >= T::zero() { -norm_x } else { norm_x };
        let mut v = x;
        v[0] -= alpha;
        let vn = norm2(&v);
        if vn == T::zero() {
            reflectors.push(None);
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= vn;
        }
        for c in j..n {
            let s: T = (j..m).map(|i| v[i - j] * a[(i, c)]).sum();
            let two_s = s + s;
            for i in j..m {
                a[(i, c)] -= two_s * v[i - j];
            }
        }
        for i in j + 1..m {
            a[(i, j)] = T::zero();
        }
        reflectors.push(Some(v));
    }
    (reflectors, perm)
}

/// Forms the thin orthonormal factor `m × k` from the stored reflectors.
fn thin_q<T: Real>(m: usize, k: usize, reflectors: &[Option<Vec<T>>]) -> Matrix<T> {
    let mut q = Matrix::zeros(m, k);
    for i in 0..k {
        q[(i, i)] = T::one();
    }
    for (j, r) in reflectors.iter().enumerate().rev() {
        let Some(v) = r else { continue };
        for c in 0..k {
            let s: T = (j..m).map(|i| v[i - j] * q[(i, c)]).sum();
            let two_s = s + s;
            for i in j..m {
                q[(i, c)] -= two_s * v[i - j];
            }
        }
    }
    q
}

fn upper_part<T: Real>(a: &Matrix<T>, k: usize) -> Matrix<T> {
    let mut r = Matrix::zeros(k, a.cols());
    for i in 0..k {
        for j in i..a.cols() {
            r[(i, j)] = a[(i, j)];
        }
    }
    r
}

/// Thin QR factorization `m = Q·R` with `Q` having orthonormal columns and
/// `R` upper triangular with a nonnegative diagonal.
pub fn qr_factor<T: Real>(m: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let k = m.rows().min(m.cols());
    let mut a = m.clone();
    let (refl, _) = householder(&mut a, false);
    let mut q = thin_q(m.rows(), k, &refl);
    let mut r = upper_part(&a, k);
    for i in 0..k {
        if r[(i, i)] < T::zero() {
            for j in 0..r.cols() {
                r[(i, j)] = -r[(i, j)];
            }
            for row in 0..q.rows() {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    (q, r)
}

/// Column-pivoted QR, `m·P = Q·R`, with the numerical rank already decided.
#[derive(Clone, Debug)]
pub struct PivotedQr<T> {
    pub q: Matrix<T>,
    pub r: Matrix<T>,
    /// `perm[k]` is the original column placed at position `k`.
    pub perm: Vec<usize>,
    pub rank: usize,
}

impl<T: Real> PivotedQr<T> {
    pub fn new(m: &Matrix<T>) -> Self {
        let k = m.rows().min(m.cols());
        let mut a = m.clone();
        let (refl, perm) = householder(&mut a, true);
        let q = thin_q(m.rows(), k, &refl);
        let r = upper_part(&a, k);
        let lead = if k > 0 { r[(0, 0)].abs() } else { T::zero() };
        let threshold = T::rank_tol() * lead;
        let rank = if lead == T::zero() {
            0
        } else {
            (0..k).take_while(|&i| r[(i, i)].abs() > threshold).count()
        };
        Self { q, r, perm, rank }
    }
}

/// Rank of `m` at the relative tolerance of [`Real::rank_tol`].
pub fn numerical_rank<T: Real>(m: &Matrix<T>) -> usize {
    PivotedQr::new(m).rank
}

/// Minimum-norm minimizer of `‖rhs − m·x‖₂`.
///
/// Uses column-pivoted QR followed, when `m` is rank deficient, by a second
/// QR of the leading trapezoid (a complete orthogonal decomposition).
pub fn least_squares<T: Real>(m: &Matrix<T>, rhs: &[T]) -> Result<Vec<T>> {
    if m.rows() != rhs.len() {
        return Err(Error::DimensionMismatch {
            context: "least_squares rhs",
            expected: m.rows(),
            found: rhs.len(),
        });
    }
    let n = m.cols();
    let pqr = PivotedQr::new(m);
    let r = pqr.rank;
    let mut x = vec![T::zero(); n];
    if r == 0 {
        return Ok(x);
    }
    let c: Vec<T> = (0..r)
        .map(|i| dot(&pqr.q.column(i), rhs))
        .collect();

    let y = if r == n {
        back_substitute(&pqr.r, &c)
    } else {
        // [R11 R12]ᵀ = Z·T  ⇒  min-norm y = Z·w with Tᵀ·w = c
        let mut trap_t = Matrix::zeros(n, r);
        for i in 0..r {
            for j in i..n {
                trap_t[(j, i)] = pqr.r[(i, j)];
            }
        }
        let (z, t) = qr_factor(&trap_t);
        let mut w = vec![T::zero(); r];
        for i in 0..r {
            let mut s = c[i];
            for k in 0..i {
                s -= t[(k, i)] * w[k];
            }
            w[i] = s / t[(i, i)];
        }
        z.matvec(&w)
    };
    for (k, &col) in pqr.perm.iter().enumerate() {
        x[col] = y[k];
    }
    Ok(x)
}

/// Solves the leading `c.len() × c.len()` upper-triangular system of `r`.
fn back_substitute<T: Real>(r: &Matrix<T>, c: &[T]) -> Vec<T> {
    let n = c.len();
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = c[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::vector::{norm_inf, sub};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_row_major(rows, cols, data).unwrap()
    }

    fn assert_orthonormal_columns(q: &Matrix<f64>) {
        let g = q.transpose().matmul(q);
        assert!(g.max_abs_diff(&Matrix::identity(q.cols())) < 1e-12);
    }

    #[test]
    fn qr_of_identity_is_identity() {
        let (q, r) = qr_factor(&Matrix::<f64>::identity(3));
        assert!(q.max_abs_diff(&Matrix::identity(3)) < 1e-15);
        assert!(r.max_abs_diff(&Matrix::identity(3)) < 1e-15);
    }

    #[test]
    fn qr_of_single_column_normalizes() {
        let m = Matrix::from_rows(&[vec![3.0f64], vec![4.0]]).unwrap();
        let (q, r) = qr_factor(&m);
        assert!((q[(0, 0)] - 0.6).abs() < 1e-15 && (q[(1, 0)] - 0.8).abs() < 1e-15);
        assert!((r[(0, 0)] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn qr_reconstructs_random_tall_matrix() {
        let m = random_matrix(5, 3, 11);
        let (q, r) = qr_factor(&m);
        assert_orthonormal_columns(&q);
        let back = q.matmul(&r);
        let mut diff = back.clone();
        for i in 0..5 {
            for j in 0..3 {
                diff[(i, j)] = back[(i, j)] - m[(i, j)];
            }
        }
        assert!(diff.frobenius_norm() < 1e-9);
        for i in 0..3 {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn qr_of_wide_and_rank_deficient() {
        let m = Matrix::from_rows(&[vec![1.0f64, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
        let (q, r) = qr_factor(&m);
        assert!(q.matmul(&r).max_abs_diff(&m) < 1e-12);
        assert!(r.row(1).iter().all(|x| x.abs() < 1e-12));
        assert_eq!(numerical_rank(&m), 1);
    }

    #[test]
    fn least_squares_identity_and_projection() {
        let x = least_squares(&Matrix::<f64>::identity(2), &[1.0, 2.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        let col = Matrix::from_rows(&[vec![1.0f64], vec![0.0]]).unwrap();
        let x = least_squares(&col, &[3.0, 4.0]).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn least_squares_two_tilted_atoms() {
        // atoms at +3° and -2°; solve c1·a1 + c2·a2 = e1 by Cramer's rule
        let d = std::f64::consts::PI / 180.0;
        let (a1, a2) = ([(3.0 * d).cos(), (3.0 * d).sin()], [(2.0 * d).cos(), -(2.0 * d).sin()]);
        let det = a1[0] * a2[1] - a2[0] * a1[1];
        let expect = [a2[1] / det, -a1[1] / det];
        assert!((expect[0] - (2.0 * d).sin() / (5.0 * d).sin()).abs() < 1e-14);
        assert!((expect[1] - (3.0 * d).sin() / (5.0 * d).sin()).abs() < 1e-14);
        let m = Matrix::from_columns(2, &[a1.to_vec(), a2.to_vec()]).unwrap();
        let x = least_squares(&m, &[1.0, 0.0]).unwrap();
        assert!((x[0] - expect[0]).abs() < 1e-12);
        assert!((x[1] - expect[1]).abs() < 1e-12);
        assert!((x[0] - 0.40042).abs() < 1e-5 && (x[1] - 0.60049).abs() < 1e-5);
    }

    #[test]
    fn least_squares_minimum_norm_on_duplicate_columns() {
        // x1 + x2 = 2 has min-norm solution (1,1)
        let m = Matrix::from_rows(&[vec![1.0f64, 1.0]]).unwrap();
        let x = least_squares(&m, &[2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);

        let m = Matrix::from_rows(&[vec![1.0f64, 2.0], vec![2.0, 4.0], vec![0.0, 0.0]]).unwrap();
        let x = least_squares(&m, &[1.0, 2.0, 5.0]).unwrap();
        // min-norm solution lies along (1,2)/5
        assert!((x[0] - 0.2).abs() < 1e-12 && (x[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn least_squares_dimension_mismatch() {
        assert!(matches!(
            least_squares(&Matrix::<f64>::identity(2), &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn least_squares_works_in_single_precision() {
        let m = Matrix::<f32>::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0], vec![0.0, 0.0]]).unwrap();
        let x = least_squares(&m, &[1.0, 1.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-6 && (x[1] - 0.25).abs() < 1e-6);
    }

    proptest::proptest! {
        #[test]
        fn residual_is_orthogonal_to_column_space(seed in 0u64..500, rows in 1usize..7, cols in 1usize..7) {
            let m = random_matrix(rows, cols, seed);
            let b: Vec<f64> = random_matrix(rows, 1, seed + 1).column(0);
            let x = least_squares(&m, &b).unwrap();
            let res = sub(&b, &m.matvec(&x));
            proptest::prop_assert!(norm_inf(&m.tr_matvec(&res)) < 1e-9);
        }
    }
}
