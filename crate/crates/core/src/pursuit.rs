//! Basis pursuit, orthogonal matching pursuit, and the dual and residual
//! point sets derived from them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dict::{PartitionedDictionary, Representation};
use crate::error::{Error, Result};
use crate::lpsolve::{lexicographic_optimal_face_point_with_tol, solve_lp};
use crate::numkit::vector::{dot, norm1, norm2, norm_inf, sub};
use crate::numkit::{least_squares, numerical_rank};
use crate::{Lp, Mat};

/// Default OMP stopping tolerance, relative to `‖b‖₂`.
pub const OMP_RESIDUAL_TOL: f64 = 1e-9;
/// Selection gaps below this are flagged as marginal.
pub const OMP_MARGINAL_GAP: f64 = 1e-7;
/// Probes used by [`dual_face`] when the caller has no preference.
pub const DEFAULT_FACE_PROBES: usize = 8;
const FACE_PROBE_SEED: u64 = 0x0d0a_f00d;
const FACE_POINT_TOL: f64 = 1e-6;

/// Solution of `min ‖c‖₁ s.t. Ac = b` with its dual certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BpResult {
    pub coefficients: Representation,
    /// `‖c*‖₁`
    pub value: f64,
    /// `v*` with `‖Aᵀv*‖∞ ≤ 1` and `⟨v*, b⟩ = ‖c*‖₁`.
    pub dual: Vec<f64>,
    pub duality_gap: f64,
}

fn check_signal(a: &Mat, b: &[f64]) -> Result<()> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            context: "signal length",
            expected: a.rows(),
            found: b.len(),
        });
    }
    if let Some(i) = b.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// `[A  −A]x = b` over split coefficients `x = (c⁺, c⁻) ≥ 0`.
fn split_lp(a: &Mat, b: &[f64]) -> Lp {
    let n = a.cols();
    let mut lp = Lp::new(2 * n).maximize(vec![-1.0; 2 * n]);
    for (i, &bi) in b.iter().enumerate() {
        let mut row = a.row(i).to_vec();
        row.extend(a.row(i).iter().map(|x| -x));
        lp.add_eq(&row, bi);
    }
    lp
}

fn unsplit(x: &[f64]) -> Vec<f64> {
    let n = x.len() / 2;
    (0..n).map(|j| x[j] - x[j + n]).collect()
}

/// Basis pursuit on the columns of `a`. Errors with [`Error::Infeasible`] when `b ∉ range(A)`.
pub fn solve_bp(a: &Mat, b: &[f64]) -> Result<BpResult> {
    check_signal(a, b)?;
    let sol = solve_lp(&split_lp(a, b))?.optimal()?;
    let c = unsplit(&sol.primal);
    let value = norm1(&c);
    // the LP maximizes −‖c‖₁, so its equality multipliers are −v*
    let dual: Vec<f64> = sol.eq_duals.iter().map(|y| -y).collect();
    let duality_gap = (dot(&dual, b) - value).abs();
    Ok(BpResult {
        coefficients: Representation::new(c),
        value,
        dual,
        duality_gap,
    })
}

/// Basis pursuit over all atoms of `dict`.
pub fn solve_bp_dict(dict: &PartitionedDictionary, b: &[f64]) -> Result<BpResult> {
    solve_bp(&dict.matrix(), b)
}

/// Largest `Σ_{j outside} |c_j|` over all optimal BP solutions.
///
/// Zero (up to rounding) exactly when every BP solution is subspace
/// preserving. The optimal face is pinned by the equality `‖c‖₁ = z*`.
pub fn bp_optimal_face_mass_on_outside(dict: &PartitionedDictionary, b: &[f64]) -> Result<f64> {
    let a = dict.matrix();
    check_signal(&a, b)?;
    let outside = dict.outside_indices();
    if outside.is_empty() {
        solve_bp(&a, b)?;
        return Ok(0.0);
    }
    let n = a.cols();
    let mut secondary = vec![0.0; 2 * n];
    for &j in &outside {
        secondary[j] = 1.0;
        secondary[j + n] = 1.0;
    }
    let sol = lexicographic_optimal_face_point_with_tol(&split_lp(&a, b), &secondary, 0.0)?;
    let c = unsplit(&sol.primal);
    Ok(outside.iter().map(|&j| c[j].abs()).sum())
}

/// One OMP iteration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmpStep {
    /// Atom added in this iteration.
    pub selected: usize,
    /// `|⟨a_selected, v⟩|` minus the runner-up score; infinite with no runner-up.
    pub selection_margin: f64,
    /// Gap below [`OMP_MARGINAL_GAP`].
    pub marginal: bool,
    pub working_set: Vec<usize>,
    /// `c⁽ᵏ⁾` over all atoms.
    pub coefficients: Vec<f64>,
    /// `v⁽ᵏ⁾ = b − A c⁽ᵏ⁾`
    pub residual: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmpTrace {
    pub signal: Vec<f64>,
    pub steps: Vec<OmpStep>,
    pub coefficients: Representation,
    pub residual_norm: f64,
    /// The residual dropped below the tolerance.
    pub converged: bool,
}

impl OmpTrace {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    /// Some selection was decided by less than [`OMP_MARGINAL_GAP`].
    pub fn has_marginal_step(&self) -> bool {
        self.steps.iter().any(|s| s.marginal)
    }

    /// `v⁽⁰⁾ = b` followed by every later residual above `tol·‖b‖₂`.
    pub fn nonzero_residuals(&self, tol: f64) -> Vec<Vec<f64>> {
        let cut = tol * norm2(&self.signal);
        std::iter::once(self.signal.clone())
            .filter(|v| norm2(v) > cut)
            .chain(
                self.steps
                    .iter()
                    .map(|s| s.residual.clone())
                    .filter(|v| norm2(v) > cut),
            )
            .collect()
    }
}

/// Orthogonal matching pursuit with smallest-index tie breaking.
///
/// Stops once `‖v‖₂ ≤ residual_tol·‖b‖₂`, after `max_iters` iterations
/// (default `D`), or when every atom has been selected.
pub fn solve_omp(a: &Mat, b: &[f64], max_iters: Option<usize>, residual_tol: f64) -> Result<OmpTrace> {
    check_signal(a, b)?;
    let bn = norm2(b);
    if bn == 0.0 {
        return Err(Error::ZeroInput);
    }
    let max_iters = max_iters.unwrap_or(a.rows());
    let cols = a.columns();
    let n = cols.len();
    let mut in_set = vec![false; n];
    let mut working = Vec::new();
    let mut c = vec![0.0; n];
    let mut v = b.to_vec();
    let mut steps = Vec::new();
    while norm2(&v) > residual_tol * bn && steps.len() < max_iters && working.len() < n {
        let mut best: Option<(usize, f64)> = None;
        let mut runner_up = f64::NEG_INFINITY;
        for j in 0..n {
            if in_set[j] {
                continue;
            }
            let score = dot(&cols[j], &v).abs();
            match best {
                Some((_, s)) if score <= s => runner_up = runner_up.max(score),
                Some((_, s)) => {
                    runner_up = s;
                    best = Some((j, score));
                }
                None => best = Some((j, score)),
            }
        }
        let (sel, score) = best.expect("an unselected atom remains");
        in_set[sel] = true;
        working.push(sel);
        let sub_cols: Vec<Vec<f64>> = working.iter().map(|&j| cols[j].clone()).collect();
        let coef = least_squares(&Mat::from_columns(a.rows(), &sub_cols)?, b)?;
        c = vec![0.0; n];
        for (&j, &x) in working.iter().zip(&coef) {
            c[j] = x;
        }
        v = sub(b, &a.matvec(&c));
        let selection_margin = score - runner_up;
        let mut ws = working.clone();
        ws.sort_unstable();
        steps.push(OmpStep {
            selected: sel,
            selection_margin,
            marginal: selection_margin < OMP_MARGINAL_GAP,
            working_set: ws,
            coefficients: c.clone(),
            residual: v.clone(),
        });
    }
    let residual_norm = norm2(&v);
    Ok(OmpTrace {
        signal: b.to_vec(),
        steps,
        coefficients: Representation::new(c),
        residual_norm,
        converged: residual_norm <= residual_tol * bn,
    })
}

/// OMP over all atoms of `dict` with the default stopping rule.
pub fn solve_omp_dict(dict: &PartitionedDictionary, b: &[f64]) -> Result<OmpTrace> {
    solve_omp(&dict.matrix(), b, None, OMP_RESIDUAL_TOL)
}

fn require_subspace_signal(dict: &PartitionedDictionary, b: &[f64]) -> Result<()> {
    check_signal(&dict.matrix(), b)?;
    if norm2(b) == 0.0 {
        return Err(Error::ZeroInput);
    }
    dict.require_in_subspace(b)
}

/// OMP trace on the inside atoms only.
pub fn inside_omp_trace(dict: &PartitionedDictionary, b: &[f64]) -> Result<OmpTrace> {
    require_subspace_signal(dict, b)?;
    solve_omp(&dict.inside_matrix(), b, Some(dict.num_inside()), OMP_RESIDUAL_TOL)
}

/// The nonzero residuals of OMP run on the inside atoms, starting with `b`.
pub fn residual_points(dict: &PartitionedDictionary, b: &[f64]) -> Result<Vec<Vec<f64>>> {
    Ok(inside_omp_trace(dict, b)?.nonzero_residuals(OMP_RESIDUAL_TOL))
}

/// Representative points of the face of `K₀°` maximizing `⟨v, b⟩`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualFace {
    /// Distinct face points in ambient coordinates.
    pub points: Vec<Vec<f64>>,
    /// Affine dimension spanned by `points`.
    pub face_dimension: usize,
    /// `max ⟨v, b⟩`, equal to the BP value on the inside atoms.
    pub value: f64,
}

/// `max ⟨Uz, b⟩ s.t. |⟨Uᵀa, z⟩| ≤ 1` over inside atoms, in coordinates `z` of `S₀`.
pub(crate) fn polar_lp(dict: &PartitionedDictionary, b: &[f64]) -> Result<Lp> {
    let basis = dict.subspace();
    let d0 = basis.dim();
    let mut lp = Lp::new(d0).maximize(basis.coordinates(b)?);
    for j in 0..d0 {
        lp.set_free(j);
    }
    for a in dict.inside_atoms() {
        let alpha = basis.coordinates(&a)?;
        let neg: Vec<f64> = alpha.iter().map(|x| -x).collect();
        lp.add_le(&alpha, 1.0);
        lp.add_le(&neg, 1.0);
    }
    Ok(lp)
}

fn affine_dimension(points: &[Vec<f64>]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let diffs: Vec<Vec<f64>> = points[1..].iter().map(|p| sub(p, &points[0])).collect();
    let scale = diffs.iter().map(|d| norm_inf(d)).fold(0.0, f64::max);
    if scale <= FACE_POINT_TOL {
        return 0;
    }
    let m = Mat::from_columns(points[0].len(), &diffs).expect("equal lengths");
    numerical_rank(&m)
}

/// Probes the dual face with random secondary objectives from a fixed internal seed.
pub fn dual_face(dict: &PartitionedDictionary, b: &[f64], num_face_probes: usize) -> Result<DualFace> {
    require_subspace_signal(dict, b)?;
    let lp = polar_lp(dict, b)?;
    let basis = dict.subspace();
    let first = solve_lp(&lp)?.optimal()?;
    let mut points = vec![basis.from_coordinates(&first.primal)];
    let mut rng = ChaCha8Rng::seed_from_u64(FACE_PROBE_SEED);
    for _ in 0..num_face_probes {
        let g: Vec<f64> = (0..basis.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let sol = lexicographic_optimal_face_point_with_tol(&lp, &g, 0.0)?;
        let p = basis.from_coordinates(&sol.primal);
        if !points.iter().any(|q| norm_inf(&sub(q, &p)) <= FACE_POINT_TOL) {
            points.push(p);
        }
    }
    Ok(DualFace {
        face_dimension: affine_dimension(&points),
        points,
        value: first.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dict::fixtures::tilted_plane;
    use crate::dict::{generate_random_instance, random_signal_in_subspace, InstanceParams};
    use crate::geometry::gauge;

    fn mat(cols: &[Vec<f64>]) -> Mat {
        Mat::from_columns(cols[0].len(), cols).unwrap()
    }

    fn s2() -> f64 {
        0.5f64.sqrt()
    }

    #[test]
    fn bp_on_orthonormal_pair() {
        let a = mat(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let r = solve_bp(&a, &[1.0, 0.0]).unwrap();
        assert!((r.coefficients.c[0] - 1.0).abs() < 1e-12 && r.coefficients.c[1].abs() < 1e-12);
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bp_prefers_the_diagonal_atom() {
        let a = mat(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![s2(), s2()]]);
        let r = solve_bp(&a, &[s2(), s2()]).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(r.coefficients.support(), vec![2]);
        assert!(r.duality_gap < 1e-9);
        assert!(norm_inf(&a.tr_matvec(&r.dual)) <= 1.0 + 1e-8);
    }

    #[test]
    fn bp_on_tilted_plane() {
        let d = tilted_plane();
        let r = solve_bp_dict(&d, &[1.0, 0.0, 0.0]).unwrap();
        assert!(r.value <= 0.40042 + 0.60049 + 1e-5);
        assert!(norm_inf(&sub(&d.matrix().matvec(&r.coefficients.c), &[1.0, 0.0, 0.0])) < 1e-8);
        assert!(r.duality_gap < 1e-7);
    }

    #[test]
    fn bp_rejects_signals_outside_the_range() {
        let a = mat(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        assert!(matches!(solve_bp(&a, &[0.0, 0.0, 1.0]), Err(Error::Infeasible)));
        assert!(solve_bp(&a, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn face_mass_without_outside_atoms_is_zero() {
        let d = PartitionedDictionary::from_groups(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[]).unwrap();
        assert_eq!(bp_optimal_face_mass_on_outside(&d, &[0.6, 0.8]).unwrap(), 0.0);
    }

    #[test]
    fn face_mass_of_an_off_plane_copy() {
        // a₋ sits 1e-3 rad above a₁; nothing can cancel its z-component, so BP ignores it
        let t = 1e-3f64;
        let inside = [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let d = PartitionedDictionary::from_groups(&inside, &[vec![t.cos(), 0.0, t.sin()]]).unwrap();
        assert!(bp_optimal_face_mass_on_outside(&d, &[1.0, 0.0, 0.0]).unwrap() < 1e-8);

        // two copies of the diagonal tilted ±1e-3 rad reach b = (1,1,0)/√2 at cost 1/cos t < √2
        let u = [s2() * t.cos(), s2() * t.cos()];
        let outside = [vec![u[0], u[1], t.sin()], vec![u[0], u[1], -t.sin()]];
        let d = PartitionedDictionary::from_groups(&inside, &outside).unwrap();
        let b = [s2(), s2(), 0.0];
        assert!((solve_bp_dict(&d, &b).unwrap().value - 1.0 / t.cos()).abs() < 1e-9);
        let mass = bp_optimal_face_mass_on_outside(&d, &b).unwrap();
        assert!((mass - 1.0 / t.cos()).abs() < 1e-9, "{mass}");
    }

    #[test]
    fn face_mass_when_an_outside_route_is_cheaper() {
        let e = 1e-3;
        let n = (2.0f64 + e * e).sqrt();
        let inside = [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let outside = [vec![1.0 / n, 1.0 / n, e / n], vec![0.0, 0.0, 1.0]];
        let d = PartitionedDictionary::from_groups(&inside, &outside).unwrap();
        let mass = bp_optimal_face_mass_on_outside(&d, &[s2(), s2(), 0.0]).unwrap();
        assert!(mass > 0.5, "{mass}");
    }

    #[test]
    fn omp_on_orthonormal_pair() {
        let a = mat(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let t = solve_omp(&a, &[1.0, 0.0], None, OMP_RESIDUAL_TOL).unwrap();
        assert_eq!(t.iterations(), 1);
        assert_eq!(t.coefficients.c, vec![1.0, 0.0]);
        assert!(t.converged);
    }

    #[test]
    fn omp_on_tilted_plane() {
        let d = tilted_plane();
        let t = solve_omp_dict(&d, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.steps[0].selected, 2);
        assert_eq!(t.iterations(), 3);
        assert_eq!(t.steps[2].working_set, vec![0, 1, 2]);
        assert!(t.coefficients.c[2].abs() < 1e-8);
        assert!(d.is_subspace_preserving(&t.coefficients).unwrap().0);
        assert!(t.converged);
    }

    #[test]
    fn omp_on_an_exact_atom() {
        let d = tilted_plane();
        let t = solve_omp_dict(&d, d.atom(1)).unwrap();
        assert_eq!(t.iterations(), 1);
        assert_eq!(t.steps[0].selected, 1);
    }

    #[test]
    fn omp_ties_go_to_the_smallest_index() {
        let a = mat(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let t = solve_omp(&a, &[s2(), s2()], None, OMP_RESIDUAL_TOL).unwrap();
        assert_eq!(t.steps[0].selected, 0);
        assert!(t.steps[0].marginal);
        assert!(t.has_marginal_step());
        assert!(solve_omp(&a, &[0.0, 0.0], None, OMP_RESIDUAL_TOL).is_err());
    }

    #[test]
    fn residual_point_examples() {
        let d = tilted_plane();
        let a1 = d.atom(0).to_vec();
        assert_eq!(residual_points(&d, &a1).unwrap(), vec![a1]);

        let d = PartitionedDictionary::from_groups(
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            &[vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        let r = residual_points(&d, &[0.6, 0.8, 0.0]).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0], vec![0.6, 0.8, 0.0]);
        assert!(norm_inf(&sub(&r[1], &[0.6, 0.0, 0.0])) < 1e-15);
        assert!(matches!(residual_points(&d, &[0.0, 0.0, 1.0]), Err(Error::NotInSubspace { .. })));
    }

    #[test]
    fn five_planar_atoms_give_two_residual_points() {
        let atoms: Vec<Vec<f64>> = [30.0f64, 57.6, 86.4, 126.0, 150.0]
            .iter()
            .map(|a| vec![a.to_radians().cos(), a.to_radians().sin()])
            .collect();
        let d = PartitionedDictionary::from_groups(&atoms, &[]).unwrap();
        let b = [0.3f64.cos(), 0.3f64.sin()];
        let r = residual_points(&d, &b).unwrap();
        assert_eq!(r.len(), 2);
        let first = inside_omp_trace(&d, &b).unwrap().steps[0].selected;
        assert!(dot(&r[1], d.atom(first)).abs() < 1e-12);
    }

    #[test]
    fn dual_face_of_the_square() {
        let d = PartitionedDictionary::from_groups(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[]).unwrap();
        let f = dual_face(&d, &[1.0, 0.0], DEFAULT_FACE_PROBES).unwrap();
        assert_eq!(f.face_dimension, 1);
        assert!((f.value - 1.0).abs() < 1e-12);
        for p in &f.points {
            assert!((p[0] - 1.0).abs() < 1e-9 && p[1].abs() <= 1.0 + 1e-9);
        }
        let f = dual_face(&d, &[s2(), s2()], DEFAULT_FACE_PROBES).unwrap();
        assert_eq!(f.face_dimension, 0);
        assert_eq!(f.points.len(), 1);
        assert!(norm_inf(&sub(&f.points[0], &[1.0, 1.0])) < 1e-9);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn bp_and_face_invariants(seed in 0u64..10_000, dim in 2usize..7, d0 in 1usize..4, extra in 0usize..4, nm in 0usize..5) {
            let d0 = d0.min(dim - 1);
            let d = generate_random_instance(&InstanceParams {
                ambient_dim: dim, subspace_dim: d0, num_inside: d0 + extra,
                num_outside: nm, min_outside_angle: 0.0, seed,
            }).unwrap();
            let b = random_signal_in_subspace(&d, seed ^ 1).b;

            let bp = solve_bp_dict(&d, &b).unwrap();
            let a = d.matrix();
            proptest::prop_assert!(norm_inf(&sub(&a.matvec(&bp.coefficients.c), &b)) < 1e-8);
            proptest::prop_assert!(norm_inf(&a.tr_matvec(&bp.dual)) <= 1.0 + 1e-8);
            proptest::prop_assert!(bp.duality_gap < 1e-7);

            // projected dual of the inside problem lies on the dual face
            let inner = solve_bp(&d.inside_matrix(), &b).unwrap();
            let pv = d.subspace().project(&inner.dual).unwrap();
            proptest::prop_assert!((dot(&pv, &b) - inner.value).abs() < 1e-7);
            proptest::prop_assert!(gauge(&d.inside_atoms(), d.subspace(), &pv).unwrap() <= 1.0 + 1e-8);

            let face = dual_face(&d, &b, DEFAULT_FACE_PROBES).unwrap();
            proptest::prop_assert!((face.value - inner.value).abs() < 1e-7);
            for p in &face.points {
                let g = gauge(&d.inside_atoms(), d.subspace(), p).unwrap();
                proptest::prop_assert!((g - 1.0).abs() < 1e-7);
                proptest::prop_assert!((dot(p, &b) - inner.value).abs() < 1e-7);
            }
            proptest::prop_assert_eq!(face.face_dimension, 0);
        }

        #[test]
        fn omp_trace_invariants(seed in 0u64..10_000, dim in 2usize..8, n in 1usize..10) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cols: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let s = norm2(&v);
                    v.iter().map(|x| x / s).collect()
                })
                .collect();
            let a = mat(&cols);
            let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t = solve_omp(&a, &b, None, OMP_RESIDUAL_TOL).unwrap();
            let mut prev = norm2(&b);
            let mut prev_len = 0;
            for s in &t.steps {
                proptest::prop_assert!(norm_inf(&sub(&s.residual, &sub(&b, &a.matvec(&s.coefficients)))) < 1e-9);
                for &j in &s.working_set {
                    proptest::prop_assert!(dot(&cols[j], &s.residual).abs() < 1e-8);
                }
                proptest::prop_assert!(s.working_set.len() == prev_len + 1);
                prev_len = s.working_set.len();
                proptest::prop_assert!(norm2(&s.residual) <= prev + 1e-12);
                prev = norm2(&s.residual);
            }
        }
    }
}
