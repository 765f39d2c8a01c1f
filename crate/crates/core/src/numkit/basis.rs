use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

use super::qr::PivotedQr;
use super::vector::{axpy, dot, norm2, scale, sub};
use super::Matrix;

/// Orthonormal vectors spanning a subspace of `ℝ^ambient_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalBasis<T> {
    ambient_dim: usize,
    vectors: Vec<Vec<T>>,
}

impl<T: Real> OrthonormalBasis<T> {
    pub fn empty(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            vectors: Vec::new(),
        }
    }

    /// The standard basis of `ℝⁿ`.
    pub fn full(n: usize) -> Self {
        let vectors = (0..n)
            .map(|i| {
                let mut e = vec![T::zero(); n];
                e[i] = T::one();
                e
            })
            .collect();
        Self {
            ambient_dim: n,
            vectors,
        }
    }

    /// Wraps vectors that are already orthonormal (checked at 1e-10 scaled to `T`).
    pub fn from_orthonormal(ambient_dim: usize, vectors: Vec<Vec<T>>) -> Result<Self> {
        for v in &vectors {
            if v.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    context: "basis vector",
                    expected: ambient_dim,
                    found: v.len(),
                });
            }
        }
        let tol = T::rank_tol().max(T::lit(1e-10));
        for i in 0..vectors.len() {
            for j in 0..=i {
                let target = if i == j { T::one() } else { T::zero() };
                if (dot(&vectors[i], &vectors[j]) - target).abs() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "basis vectors {j} and {i} are not orthonormal"
                    )));
                }
            }
        }
        Ok(Self {
            ambient_dim,
            vectors,
        })
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<T>] {
        &self.vectors
    }

    /// `ambient_dim × dim` matrix with the basis vectors as columns.
    pub fn as_matrix(&self) -> Matrix<T> {
        Matrix::from_columns(self.ambient_dim, &self.vectors).expect("consistent basis")
    }

    fn check_dim(&self, v: &[T]) -> Result<()> {
        if v.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                context: "subspace vector",
                expected: self.ambient_dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Coordinates of the projection of `v` in this basis.
    pub fn coordinates(&self, v: &[T]) -> Result<Vec<T>> {
        self.check_dim(v)?;
        Ok(self.vectors.iter().map(|u| dot(u, v)).collect())
    }

    /// Maps coordinates back to the ambient space.
    pub fn from_coordinates(&self, z: &[T]) -> Vec<T> {
        assert_eq!(z.len(), self.dim(), "coordinate length");
        let mut out = vec![T::zero(); self.ambient_dim];
        for (u, &zi) in self.vectors.iter().zip(z) {
            axpy(zi, u, &mut out);
        }
        out
    }

    pub fn project(&self, v: &[T]) -> Result<Vec<T>> {
        let z = self.coordinates(v)?;
        Ok(self.from_coordinates(&z))
    }

    /// `‖v − P v‖₂`
    pub fn distance(&self, v: &[T]) -> Result<T> {
        let p = self.project(v)?;
        Ok(norm2(&sub(v, &p)))
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> Self {
        let n = self.ambient_dim;
        let mut span = self.vectors.clone();
        let mut out = Vec::new();
        let mut used = vec![false; n];
        while span.len() < n {
            // greedy: the unit vector with the largest residual
            let mut best: Option<(usize, Vec<T>, T)> = None;
            for (i, taken) in used.iter().enumerate() {
                if *taken {
                    continue;
                }
                let mut e = vec![T::zero(); n];
                e[i] = T::one();
                let r = orthogonalize(&e, &span);
                let rn = norm2(&r);
                if best.as_ref().is_none_or(|(_, _, b)| rn > *b) {
                    best = Some((i, r, rn));
                }
            }
            let Some((i, r, rn)) = best else { break };
            used[i] = true;
            if rn <= T::lit(1e-3) {
                continue;
            }
            let u = scale(&r, T::one() / rn);
            span.push(u.clone());
            out.push(u);
        }
        Self {
            ambient_dim: n,
            vectors: out,
        }
    }
}

/// Two passes of classical Gram-Schmidt against an orthonormal set.
fn orthogonalize<T: Real>(v: &[T], against: &[Vec<T>]) -> Vec<T> {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for u in against {
            let c = dot(u, &r);
            axpy(-c, u, &mut r);
        }
    }
    r
}

/// Orthonormal basis of the span of `vectors`; its dimension is the numerical rank.
pub fn orthonormal_basis_of_span<T: Real>(vectors: &[Vec<T>]) -> Result<OrthonormalBasis<T>> {
    let dim = vectors.first().ok_or(Error::ZeroInput)?.len();
    let m = Matrix::from_columns(dim, vectors)?;
    let pqr = PivotedQr::new(&m);
    if pqr.rank == 0 {
        return Err(Error::ZeroInput);
    }
    let basis = (0..pqr.rank).map(|j| pqr.q.column(j)).collect();
    Ok(OrthonormalBasis {
        ambient_dim: dim,
        vectors: basis,
    })
}

/// `P_S(v)` for the subspace spanned by `basis`.
pub fn project_onto<T: Real>(basis: &OrthonormalBasis<T>, v: &[T]) -> Result<Vec<T>> {
    basis.project(v)
}

/// Orthonormal basis of `{x : m·x = 0}`.
pub fn null_space_basis<T: Real>(m: &Matrix<T>) -> OrthonormalBasis<T> {
    let n = m.cols();
    let rows: Vec<Vec<T>> = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
    match orthonormal_basis_of_span(&rows) {
        Ok(row_space) => row_space.complement(),
        Err(_) => OrthonormalBasis::full(n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::vector::norm_inf;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vectors(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn span_of_xy_axes() {
        let b = orthonormal_basis_of_span(&[vec![1.0f64, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(b.dim(), 2);
        assert!(b.distance(&[0.3, -0.7, 0.0]).unwrap() < 1e-15);
        assert!((b.distance(&[0.0, 0.0, 2.0]).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn collinear_vectors_give_one_dimension() {
        let b = orthonormal_basis_of_span(&[vec![1.0f64, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(b.dim(), 1);
        assert!((b.vectors()[0][0].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tilted_plane_atoms_span_xy_plane() {
        let d = std::f64::consts::PI / 180.0;
        let atoms = vec![
            vec![(3.0 * d).cos(), (3.0 * d).sin(), 0.0],
            vec![(2.0 * d).cos(), -(2.0 * d).sin(), 0.0],
        ];
        let b = orthonormal_basis_of_span(&atoms).unwrap();
        assert_eq!(b.dim(), 2);
        assert!(b.distance(&[1.0, 0.0, 0.0]).unwrap() < 1e-12);
        assert!(b.distance(&[0.0, 1.0, 0.0]).unwrap() < 1e-12);
    }

    #[test]
    fn all_zero_input_is_rejected() {
        assert!(matches!(
            orthonormal_basis_of_span(&[vec![0.0, 0.0]]),
            Err(Error::ZeroInput)
        ));
        assert!(matches!(
            orthonormal_basis_of_span::<f64>(&[]),
            Err(Error::ZeroInput)
        ));
    }

    #[test]
    fn projection_examples() {
        let b = orthonormal_basis_of_span(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(project_onto(&b, &[0.0, 0.0, 1.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        let d = std::f64::consts::PI / 180.0;
        let p = project_onto(&b, &[d.cos(), 0.0, d.sin()]).unwrap();
        assert!((p[0] - d.cos()).abs() < 1e-15 && p[1].abs() < 1e-15 && p[2].abs() < 1e-15);
        assert!(project_onto(&b, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn null_space_examples() {
        assert_eq!(null_space_basis(&Matrix::<f64>::identity(2)).dim(), 0);
        let ns = null_space_basis(&Matrix::from_rows(&[vec![1.0f64, 1.0]]).unwrap());
        assert_eq!(ns.dim(), 1);
        let q = &ns.vectors()[0];
        let s = 1.0 / 2f64.sqrt();
        assert!((q[0].abs() - s).abs() < 1e-12 && (q[0] + q[1]).abs() < 1e-12);

        let m = Matrix::from_rows(&random_vectors(3, 5, 4)).unwrap();
        let ns = null_space_basis(&m);
        assert_eq!(ns.dim(), 2);
        for q in ns.vectors() {
            assert!(norm_inf(&m.matvec(q)) < 1e-9);
        }
    }

    #[test]
    fn null_space_of_zero_matrix_is_everything() {
        assert_eq!(null_space_basis(&Matrix::<f64>::zeros(2, 3)).dim(), 3);
    }

    #[test]
    fn complement_of_empty_and_full() {
        assert_eq!(OrthonormalBasis::<f64>::empty(3).complement().dim(), 3);
        assert_eq!(OrthonormalBasis::<f64>::full(3).complement().dim(), 0);
    }

    proptest::proptest! {
        #[test]
        fn pythagoras_and_idempotence(seed in 0u64..300, dim in 2usize..7, count in 1usize..5) {
            let vs = random_vectors(count, dim, seed);
            let b = orthonormal_basis_of_span(&vs).unwrap();
            let v = &random_vectors(1, dim, seed + 7)[0];
            let p = b.project(v).unwrap();
            let r = sub(v, &p);
            let lhs = dot(v, v);
            proptest::prop_assert!((lhs - dot(&p, &p) - dot(&r, &r)).abs() < 1e-9);
            for u in b.vectors() {
                proptest::prop_assert!(dot(u, &r).abs() < 1e-10);
            }
            let pp = b.project(&p).unwrap();
            proptest::prop_assert!(norm_inf(&sub(&pp, &p)) < 1e-10);
        }

        #[test]
        fn rank_nullity(seed in 0u64..300, rows in 1usize..6, cols in 1usize..7) {
            let m = Matrix::from_rows(&random_vectors(rows, cols, seed)).unwrap();
            let row_space = orthonormal_basis_of_span(&m.transpose().columns()).unwrap();
            proptest::prop_assert_eq!(row_space.dim() + null_space_basis(&m).dim(), cols);
        }
    }
}
