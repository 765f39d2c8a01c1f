//! Re-checks certificates with plain linear algebra.

use super::instance::outside_gauge;
use super::{Certificate, ConditionId, ConditionReport, Verdict};
use crate::dict::PartitionedDictionary;
use crate::error::{Error, Result};
use crate::geometry::{enumerate_dual_vertices, geometry_summary, point_coherence, subspace_coherence};
use crate::numkit::vector::{norm1, norm2, norm_inf, sub};
use crate::pursuit::inside_omp_trace;

const RESIDUAL_TOL: f64 = 1e-8;
const OPTIMALITY_TOL: f64 = 1e-7;

fn in_subspace(dict: &PartitionedDictionary, v: &[f64]) -> Result<bool> {
    Ok(dict.distance_to_subspace(v)? <= RESIDUAL_TOL * norm2(v).max(1.0))
}

fn unit(b: &[f64]) -> Result<Vec<f64>> {
    let n = norm2(b);
    if n == 0.0 {
        return Err(Error::ZeroInput);
    }
    Ok(b.iter().map(|x| x / n).collect())
}

/// Whether `v` is dual feasible for the inside atoms and optimal against `c0` for `b`.
fn dual_pair_is_optimal(dict: &PartitionedDictionary, b: &[f64], v: &[f64], c0: &[f64]) -> bool {
    let inside = dict.inside_atoms();
    if c0.len() != inside.len() || v.len() != b.len() {
        return false;
    }
    let recon = dict.inside_matrix().matvec(c0);
    let primal_ok = norm_inf(&sub(&recon, b)) <= RESIDUAL_TOL;
    let dual_ok = outside_gauge(&inside, v) <= 1.0 + RESIDUAL_TOL;
    let value = norm1(c0);
    let gap_ok = (crate::numkit::vector::dot(v, b) - value).abs() <= OPTIMALITY_TOL * (1.0 + value);
    primal_ok && dual_ok && gap_ok
}

fn vertex_on_boundary(dict: &PartitionedDictionary, w: &[f64]) -> Result<bool> {
    let g = outside_gauge(&dict.inside_atoms(), w);
    Ok(in_subspace(dict, w)? && (g - 1.0).abs() <= RESIDUAL_TOL)
}

/// Checks that the certificate in `report` supports its verdict.
///
/// Holding verdicts are checked against the strict inequality; failing ones
/// against the violated inequality. Marginal reports and reports without a
/// certificate return `false`.
pub fn verify_certificate(dict: &PartitionedDictionary, b: Option<&[f64]>, report: &ConditionReport) -> Result<bool> {
    let Some(cert) = &report.certificate else {
        return Ok(false);
    };
    if report.verdict == Verdict::Marginal {
        return Ok(false);
    }
    let holds = report.verdict == Verdict::Holds;
    let outside = dict.outside_atoms();
    let need_b = || -> Result<Vec<f64>> {
        unit(b.ok_or_else(|| Error::InvalidParameter(format!("verifying {} needs the signal", report.id)))?)
    };
    let r0 = || -> Result<f64> { Ok(geometry_summary(&dict.inside_atoms(), dict.subspace())?.r0) };

    match (report.id, cert) {
        (ConditionId::TIdc | ConditionId::Idc | ConditionId::GIdc, Certificate::DualWitness { v, c0 }) => {
            let b = need_b()?;
            if !dual_pair_is_optimal(dict, &b, v, c0) {
                return Ok(false);
            }
            if report.id != ConditionId::TIdc && !in_subspace(dict, v)? {
                return Ok(false);
            }
            let ok = if report.id == ConditionId::GIdc {
                let mu = point_coherence(v, &outside)?;
                if holds { mu < r0()? } else { (r0()? - mu - report.margin).abs() <= OPTIMALITY_TOL }
            } else {
                let g = outside_gauge(&outside, v);
                if holds { g < 1.0 } else { (1.0 - g - report.margin).abs() <= OPTIMALITY_TOL }
            };
            Ok(ok)
        }
        (ConditionId::Irc | ConditionId::GIrc, Certificate::ResidualPoints { points }) => {
            let b = need_b()?;
            let trace = inside_omp_trace(dict, &b)?;
            let expected: Vec<Vec<f64>> = trace
                .nonzero_residuals(crate::pursuit::OMP_RESIDUAL_TOL)
                .iter()
                .map(|r| unit(r))
                .collect::<Result<_>>()?;
            if expected.len() != points.len()
                || expected.iter().zip(points).any(|(e, p)| norm_inf(&sub(e, p)) > RESIDUAL_TOL)
                || norm_inf(&sub(&points[0], &b)) > RESIDUAL_TOL
            {
                return Ok(false);
            }
            let bound = if report.id == ConditionId::GIrc { Some(r0()?) } else { None };
            for p in points {
                let lhs = match bound {
                    Some(r) => r,
                    None => outside_gauge(&dict.inside_atoms(), p),
                };
                if lhs <= outside_gauge(&outside, p) {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        (ConditionId::Irc | ConditionId::GIrc, Certificate::ViolatingResidual { point, .. }) => {
            if !in_subspace(dict, point)? {
                return Ok(false);
            }
            let lhs = match report.id {
                ConditionId::GIrc => r0()?,
                _ => outside_gauge(&dict.inside_atoms(), point),
            };
            Ok(lhs - outside_gauge(&outside, point) <= report.margin + OPTIMALITY_TOL)
        }
        (ConditionId::Udc | ConditionId::Urc | ConditionId::Erc, Certificate::InsideRepresentations { coefficients }) => {
            if coefficients.len() != outside.len() {
                return Ok(false);
            }
            let a0 = dict.inside_matrix();
            for (a, c) in outside.iter().zip(coefficients) {
                if c.len() != a0.cols() {
                    return Ok(false);
                }
                let p = dict.subspace().project(a)?;
                if norm_inf(&sub(&a0.matvec(c), &p)) > RESIDUAL_TOL || norm1(c) >= 1.0 {
                    return Ok(false);
                }
            }
            Ok(holds)
        }
        (ConditionId::Udc | ConditionId::Urc | ConditionId::GUdc, Certificate::ViolatingVertex { vertex, atom }) => {
            let Some(j) = *atom else { return Ok(false) };
            if !vertex_on_boundary(dict, vertex)? || dict.labels()[j] != crate::dict::Label::Out {
                return Ok(false);
            }
            let a = dict.atom(j);
            let s = crate::numkit::vector::dot(a, vertex).abs();
            Ok(match report.id {
                ConditionId::GUdc => s / norm2(vertex) >= r0()? - OPTIMALITY_TOL,
                _ => s >= 1.0 - OPTIMALITY_TOL,
            })
        }
        (ConditionId::TUdc, Certificate::VertexLifts { vertices, lifts }) => {
            let all = enumerate_dual_vertices(&dict.inside_atoms(), dict.subspace())?;
            if vertices.len() != lifts.len() || 2 * vertices.len() != all.len() {
                return Ok(false);
            }
            for (w, v) in vertices.iter().zip(lifts) {
                if !vertex_on_boundary(dict, w)? {
                    return Ok(false);
                }
                let shift = dict.subspace().project(&sub(v, w))?;
                if norm_inf(&shift) > RESIDUAL_TOL || outside_gauge(&outside, v) >= 1.0 {
                    return Ok(false);
                }
            }
            Ok(holds)
        }
        (ConditionId::TUdc, Certificate::ViolatingVertex { vertex, .. }) => {
            // the best lift is recomputed from scratch
            if !vertex_on_boundary(dict, vertex)? {
                return Ok(false);
            }
            let fresh = super::Certifier::new(dict).t_udc()?;
            Ok(!fresh.holds() && (fresh.margin - report.margin).abs() <= OPTIMALITY_TOL)
        }
        (ConditionId::GUdc, Certificate::Vertices { vertices }) => {
            let all = enumerate_dual_vertices(&dict.inside_atoms(), dict.subspace())?;
            if vertices.len() != all.len() {
                return Ok(false);
            }
            let mut big_r = 0.0f64;
            for w in vertices {
                if !vertex_on_boundary(dict, w)? {
                    return Ok(false);
                }
                big_r = big_r.max(norm2(w));
            }
            let r = 1.0 / big_r;
            for w in vertices {
                if point_coherence(w, &outside)? >= r {
                    return Ok(false);
                }
            }
            Ok(holds)
        }
        (ConditionId::GUsc, Certificate::GeometricBound { r0: r, coherence }) => {
            let c = subspace_coherence(dict.subspace(), &outside)?;
            Ok(holds && (c - coherence).abs() <= RESIDUAL_TOL && (r0()? - r).abs() <= RESIDUAL_TOL && c < *r)
        }
        (ConditionId::GUsc, Certificate::ViolatingAtom { atom }) => {
            let p = norm2(&dict.subspace().project(dict.atom(*atom))?);
            Ok(dict.labels()[*atom] == crate::dict::Label::Out && p >= r0()? - OPTIMALITY_TOL)
        }
        (ConditionId::Erc, Certificate::ViolatingAtom { atom }) => {
            let p = dict.subspace().project(dict.atom(*atom))?;
            let c = crate::numkit::least_squares(&dict.inside_matrix(), &p)?;
            Ok(dict.labels()[*atom] == crate::dict::Label::Out && norm1(&c) >= 1.0 - OPTIMALITY_TOL)
        }
        _ => Ok(false),
    }
}
