//! Conditions quantified over every signal in `S₀`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::instance::outside_gauge;
use super::{Certificate, Certifier, ConditionId, ConditionReport, ProbeSummary, Verdict};
use crate::dict::{random_unit_in_subspace, PartitionedDictionary};
use crate::error::{Error, Result};
use crate::geometry::{point_coherence, subspace_coherence};
use crate::lpsolve::solve_lp;
use crate::numkit::null_space_basis;
use crate::numkit::vector::{add, norm1};
use crate::pursuit::solve_bp;
use crate::Lp;

/// Samples used by [`Certifier::certify`] for the URC consistency probe.
pub const DEFAULT_URC_SAMPLES: usize = 1000;
const NULLSPACE_MIN_OUTSIDE_MASS: f64 = 1e-8;

/// One of each `±w` pair: the first entry above `1e-12` in magnitude is positive.
fn is_canonical(w: &[f64]) -> bool {
    w.iter().find(|x| x.abs() > 1e-12).is_none_or(|x| *x > 0.0)
}

impl Certifier<'_> {
    /// Largest `|⟨a, w⟩|` over dual vertices `w` and outside atoms `a`, with the maximizing pair.
    fn worst_vertex(&self) -> Result<(f64, Vec<f64>, Option<usize>)> {
        let (poly, _) = self.polar()?;
        let outside = self.dict.outside_atoms();
        let idx = self.dict.outside_indices();
        let mut worst = (0.0, poly.vertices()[0].clone(), None);
        for w in poly.vertices() {
            for (k, a) in outside.iter().enumerate() {
                let s = crate::numkit::vector::dot(a, w).abs();
                if s > worst.0 {
                    worst = (s, w.clone(), Some(idx[k]));
                }
            }
        }
        Ok(worst)
    }

    pub fn udc(&self) -> Result<ConditionReport> {
        let (worst, vertex, atom) = self.worst_vertex()?;
        let report = ConditionReport::new(ConditionId::Udc, 1.0 - worst, self.eps_strict);
        if report.holds() {
            let a0 = self.dict.inside_matrix();
            let mut coefficients = Vec::new();
            for a in self.dict.outside_atoms() {
                let p = self.dict.subspace().project(&a)?;
                coefficients.push(solve_bp(&a0, &p)?.coefficients.c);
            }
            Ok(report.with_certificate(Certificate::InsideRepresentations { coefficients }))
        } else {
            Ok(report.with_certificate(Certificate::ViolatingVertex { vertex, atom }))
        }
    }

    /// URC decided through its equivalence with UDC, plus a sampling probe of
    /// `‖A₀ᵀv‖∞ > ‖A₋ᵀv‖∞` over unit `v ∈ S₀` that flags any contradiction.
    pub fn urc_sampled(&self, num_samples: usize, seed: u64) -> Result<ConditionReport> {
        let udc = self.udc()?;
        let inside = self.dict.inside_atoms();
        let outside = self.dict.outside_atoms();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::INFINITY;
        let mut violations = 0;
        for _ in 0..num_samples {
            let v = random_unit_in_subspace(self.dict, &mut rng);
            let gap = outside_gauge(&inside, &v) - outside_gauge(&outside, &v);
            worst = worst.min(gap);
            if gap <= 0.0 {
                violations += 1;
            }
        }
        let mut report = ConditionReport {
            id: ConditionId::Urc,
            ..udc
        }
        .note("decided by the exact UDC computation");
        report.probe = Some(ProbeSummary {
            samples: num_samples,
            worst,
            violations,
            contradiction: violations > 0 && report.verdict == Verdict::Holds,
        });
        Ok(report)
    }

    pub fn t_udc(&self) -> Result<ConditionReport> {
        let (poly, _) = self.polar()?;
        let outside = self.dict.outside_atoms();
        let q = self.dict.subspace().complement();
        let qd = q.dim();
        let q_outside = outside
            .iter()
            .map(|a| q.coordinates(a))
            .collect::<Result<Vec<_>>>()?;
        let mut vertices = Vec::new();
        let mut lifts = Vec::new();
        let mut worst = (0.0f64, None::<Vec<f64>>);
        for w in poly.vertices().iter().filter(|w| is_canonical(w)) {
            let lift = if outside.is_empty() || qd == 0 {
                w.clone()
            } else {
                let mut obj = vec![0.0; qd + 1];
                obj[qd] = -1.0;
                let mut lp = Lp::new(qd + 1).maximize(obj);
                for j in 0..qd {
                    lp.set_free(j);
                }
                for (a, qa) in outside.iter().zip(&q_outside) {
                    let aw = crate::numkit::vector::dot(a, w);
                    let mut r = qa.clone();
                    r.push(-1.0);
                    lp.add_le(&r, -aw);
                    let mut r: Vec<f64> = qa.iter().map(|x| -x).collect();
                    r.push(-1.0);
                    lp.add_le(&r, aw);
                }
                let sol = solve_lp(&lp)?.optimal()?;
                add(w, &q.from_coordinates(&sol.primal[..qd]))
            };
            let t = outside_gauge(&outside, &lift);
            if t > worst.0 || worst.1.is_none() {
                worst = (t, Some(w.clone()));
            }
            vertices.push(w.clone());
            lifts.push(lift);
        }
        let report = ConditionReport::new(ConditionId::TUdc, 1.0 - worst.0, self.eps_strict);
        if report.holds() {
            Ok(report.with_certificate(Certificate::VertexLifts { vertices, lifts }))
        } else {
            Ok(report.with_certificate(Certificate::ViolatingVertex {
                vertex: worst.1.expect("at least one vertex"),
                atom: None,
            }))
        }
    }

    pub fn g_udc(&self) -> Result<ConditionReport> {
        let (poly, summary) = self.polar()?;
        let outside = self.dict.outside_atoms();
        let idx = self.dict.outside_indices();
        let mut worst = (0.0f64, poly.vertices()[0].clone(), None);
        for w in poly.vertices() {
            for (k, a) in outside.iter().enumerate() {
                let m = point_coherence(w, std::slice::from_ref(a))?;
                if m > worst.0 {
                    worst = (m, w.clone(), Some(idx[k]));
                }
            }
        }
        let theta = worst.0.clamp(0.0, 1.0).acos();
        let report = ConditionReport::new(ConditionId::GUdc, summary.r0 - worst.0, self.eps_strict).note(format!(
            "angular form: gamma0 = {:.6} deg, smallest vertex angle to A- = {:.6} deg",
            summary.gamma0.to_degrees(),
            theta.to_degrees()
        ));
        if report.holds() {
            Ok(report.with_certificate(Certificate::Vertices {
                vertices: poly.vertices().to_vec(),
            }))
        } else {
            Ok(report.with_certificate(Certificate::ViolatingVertex {
                vertex: worst.1,
                atom: worst.2,
            }))
        }
    }

    pub fn g_usc(&self) -> Result<ConditionReport> {
        let (_, summary) = self.polar()?;
        let outside = self.dict.outside_atoms();
        let coherence = subspace_coherence(self.dict.subspace(), &outside)?;
        let theta = coherence.clamp(0.0, 1.0).acos();
        let report = ConditionReport::new(ConditionId::GUsc, summary.r0 - coherence, self.eps_strict).note(format!(
            "angular form: gamma0 = {:.6} deg, smallest angle from A- to the subspace = {:.6} deg",
            summary.gamma0.to_degrees(),
            theta.to_degrees()
        ));
        if report.holds() {
            return Ok(report.with_certificate(Certificate::GeometricBound {
                r0: summary.r0,
                coherence,
            }));
        }
        let mut atom = None;
        let mut best = -1.0;
        for (k, a) in outside.iter().enumerate() {
            let p = crate::numkit::vector::norm2(&self.dict.subspace().project(a)?);
            if p > best {
                best = p;
                atom = Some(self.dict.outside_indices()[k]);
            }
        }
        Ok(report.with_certificate(Certificate::ViolatingAtom {
            atom: atom.expect("a failing dictionary has outside atoms"),
        }))
    }
}

/// `(BP value on A₀, BP value on A₋)`; the second is `None` when `b ∉ range(A₋)`.
pub fn tudc_objective_comparison(dict: &PartitionedDictionary, b: &[f64]) -> Result<(f64, Option<f64>)> {
    dict.require_in_subspace(b)?;
    let inside = solve_bp(&dict.inside_matrix(), b)?.value;
    if dict.num_outside() == 0 {
        return Ok((inside, None));
    }
    let outside = match solve_bp(&dict.outside_matrix(), b) {
        Ok(r) => Some(r.value),
        Err(Error::Infeasible) => None,
        Err(e) => return Err(e),
    };
    Ok((inside, outside))
}

/// Samples `v ∈ null(A)` split as `(v₀, v₋)` and checks
/// `min{‖c‖₁ : A₀c = A₀v₀} < ‖v₋‖₁`, which T-UDC guarantees whenever `v₋ ≠ 0`.
///
/// `contradiction` is left false; callers compare against a T-UDC verdict.
pub fn tudc_nullspace_probe(dict: &PartitionedDictionary, num_samples: usize, seed: u64) -> Result<ProbeSummary> {
    let null = null_space_basis(&dict.matrix());
    let inside_idx = dict.inside_indices();
    let outside_idx = dict.outside_indices();
    let mut summary = ProbeSummary {
        samples: 0,
        worst: f64::INFINITY,
        violations: 0,
        contradiction: false,
    };
    if null.dim() == 0 || outside_idx.is_empty() {
        return Ok(summary);
    }
    let a0 = dict.inside_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    while summary.samples < num_samples && attempts < 20 * num_samples.max(1) {
        attempts += 1;
        let g: Vec<f64> = (0..null.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let v = null.from_coordinates(&g);
        let v0: Vec<f64> = inside_idx.iter().map(|&j| v[j]).collect();
        let vm: Vec<f64> = outside_idx.iter().map(|&j| v[j]).collect();
        let mass = norm1(&vm);
        if mass < NULLSPACE_MIN_OUTSIDE_MASS {
            continue;
        }
        let b = a0.matvec(&v0);
        let best = solve_bp(&a0, &b)?.value;
        let gap = mass - best;
        summary.samples += 1;
        summary.worst = summary.worst.min(gap / mass);
        if gap < -1e-9 * (1.0 + mass) {
            summary.violations += 1;
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use crate::conditions::*;
    use crate::dict::fixtures::{deg, tilted_plane};
    use crate::dict::PartitionedDictionary;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    fn square_with(outside: &[Vec<f64>]) -> PartitionedDictionary {
        PartitionedDictionary::from_groups(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], outside).unwrap()
    }

    /// Narrow inside pair at ±40° and an outside pair at ±5° above the plane.
    fn narrow_pair() -> PartitionedDictionary {
        let (c, s) = (deg(40.0).cos(), deg(40.0).sin());
        let (c5, s5) = (deg(5.0).cos(), deg(5.0).sin());
        PartitionedDictionary::from_groups(&[vec![c, s, 0.0], vec![c, -s, 0.0]], &[vec![c5, 0.0, s5], vec![c5, 0.0, -s5]])
            .unwrap()
    }

    #[test]
    fn orthogonal_outside_atom_satisfies_all_universal_conditions() {
        let d = square_with(&[vec![0.0, 0.0, 1.0]]);
        let c = Certifier::new(&d);
        for r in [c.udc().unwrap(), c.t_udc().unwrap(), c.g_udc().unwrap(), c.g_usc().unwrap(), c.urc_sampled(200, 1).unwrap()] {
            assert!(r.holds(), "{r:?}");
            assert!(verify_certificate(&d, None, &r).unwrap(), "{r:?}");
        }
        assert!((c.udc().unwrap().margin - 1.0).abs() < 1e-12);
        assert!((c.g_usc().unwrap().margin - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn udc_fails_while_t_udc_holds() {
        let out = unit(&[deg(5.0).cos() / 2f64.sqrt(), deg(5.0).cos() / 2f64.sqrt(), deg(5.0).sin()]);
        let d = square_with(&[out]);
        let udc = certify_udc(&d).unwrap();
        assert_eq!(udc.verdict, Verdict::Fails);
        assert!(matches!(udc.certificate, Some(Certificate::ViolatingVertex { atom: Some(2), .. })));
        assert!(verify_certificate(&d, None, &udc).unwrap());
        let tudc = certify_t_udc(&d).unwrap();
        assert_eq!(tudc.verdict, Verdict::Holds, "{tudc:?}");
        assert!(verify_certificate(&d, None, &tudc).unwrap());
        let urc = certify_urc_sampled(&d, 2000, 3).unwrap();
        assert_eq!(urc.verdict, Verdict::Fails);
        let p = urc.probe.unwrap();
        assert!(!p.contradiction && p.violations > 0);
        assert!(tudc_nullspace_probe(&d, 200, 1).unwrap().violations == 0);
    }

    #[test]
    fn narrow_pair_breaks_t_udc_and_the_null_space_inequality() {
        let d = narrow_pair();
        let tudc = certify_t_udc(&d).unwrap();
        assert_eq!(tudc.verdict, Verdict::Fails, "{tudc:?}");
        assert!(verify_certificate(&d, None, &tudc).unwrap());
        let probe = tudc_nullspace_probe(&d, 200, 7).unwrap();
        assert!(probe.violations > 0, "{probe:?}");
        // b = e1 is cheaper through the outside pair than through the inside pair
        let (inside, outside) = tudc_objective_comparison(&d, &[1.0, 0.0, 0.0]).unwrap();
        assert!(outside.unwrap() < inside);
    }

    #[test]
    fn tilted_plane_breaks_the_geometric_conditions() {
        let d = tilted_plane();
        let usc = certify_g_usc(&d).unwrap();
        assert_eq!(usc.verdict, Verdict::Fails);
        assert_eq!(usc.certificate, Some(Certificate::ViolatingAtom { atom: 2 }));
        assert_eq!(certify_g_udc(&d).unwrap().verdict, Verdict::Fails);
        assert_eq!(certify_udc(&d).unwrap().verdict, Verdict::Fails);
    }

    #[test]
    fn universal_ordering_on_random_instances() {
        use crate::dict::{generate_random_instance, InstanceParams};
        for seed in 0..30 {
            let d = generate_random_instance(&InstanceParams {
                ambient_dim: 4,
                subspace_dim: 2,
                num_inside: 4,
                num_outside: 3,
                min_outside_angle: 20.0,
                seed,
            })
            .unwrap();
            let c = Certifier::new(&d);
            let (usc, gudc, udc, tudc) = (c.g_usc().unwrap(), c.g_udc().unwrap(), c.udc().unwrap(), c.t_udc().unwrap());
            assert!(usc.margin <= gudc.margin + 1e-9);
            assert!(udc.margin <= tudc.margin + 1e-9);
            // r₀ − max μ ≤ r₀(1 − max ‖A₋ᵀw‖∞) since ‖w‖ ≤ 1/r₀
            assert!(gudc.margin <= c.polar().unwrap().1.r0 * udc.margin + 1e-9);
            for r in [usc, gudc, udc, tudc] {
                assert!(verify_certificate(&d, None, &r).unwrap(), "{r:?}");
            }
        }
    }

    #[test]
    fn objective_comparison_without_outside_route() {
        let d = square_with(&[vec![0.0, 0.0, 1.0]]);
        let (i, o) = tudc_objective_comparison(&d, &[1.0, 0.0, 0.0]).unwrap();
        assert!((i - 1.0).abs() < 1e-12);
        assert_eq!(o, None);
    }
}
