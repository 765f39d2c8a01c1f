//! Conditions attached to a single signal `b ∈ S₀`.

use super::{Certificate, Certifier, ConditionId, ConditionReport};
use crate::error::{Error, Result};
use crate::geometry::point_coherence;
use crate::lpsolve::solve_lp;
use crate::numkit::vector::{dot, normalized};
use crate::pursuit::{dual_face, polar_lp, residual_points, solve_bp, DEFAULT_FACE_PROBES};
use crate::{Lp, LpSol};

/// Refinement rounds of the fractional search for a low-coherence face point.
const GIDC_ROUNDS: usize = 6;

/// `max ‖A₋ᵀv‖∞` for the outside atoms.
pub(super) fn outside_gauge(outside: &[Vec<f64>], v: &[f64]) -> f64 {
    outside.iter().map(|a| dot(a, v).abs()).fold(0.0, f64::max)
}

fn negated(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

/// Solves `lp` with the row `face·x = value` appended; relaxes it slightly if
/// rounding in `value` leaves the equality infeasible.
fn solve_on_face(lp: &Lp, face: &[f64], value: f64) -> Result<LpSol> {
    let mut exact = lp.clone();
    exact.add_eq(face, value);
    match solve_lp(&exact).and_then(|s| s.optimal()) {
        Err(Error::Infeasible) => {
            let mut relaxed = lp.clone();
            relaxed.add_ge(face, value - 1e-9 * (1.0 + value.abs()));
            solve_lp(&relaxed)?.optimal()
        }
        other => other,
    }
}

impl Certifier<'_> {
    /// LP over `(z, t)` with `Uz ∈ K₀°`, `⟨Uz, b⟩` at its maximum and `|⟨a, Uz⟩| ≤ t` for outside `a`.
    fn face_lp(&self, b: &[f64], objective: Vec<f64>) -> Result<(Lp, Vec<f64>, f64)> {
        let basis = self.dict.subspace();
        let d0 = basis.dim();
        let polar = polar_lp(self.dict, b)?;
        let value = solve_lp(&polar)?.optimal()?.objective;
        let mut lp = Lp::new(d0 + 1).maximize(objective);
        for j in 0..d0 {
            lp.set_free(j);
        }
        for (i, rhs) in polar.ub_rhs.iter().enumerate() {
            let mut r = polar.ub_matrix.row(i).to_vec();
            r.push(0.0);
            lp.add_le(&r, *rhs);
        }
        for a in self.dict.outside_atoms() {
            let mut r = basis.coordinates(&a)?;
            r.push(-1.0);
            lp.add_le(&r, 0.0);
            let mut r = negated(&r[..d0]);
            r.push(-1.0);
            lp.add_le(&r, 0.0);
        }
        let mut face = polar.objective.clone();
        face.push(0.0);
        Ok((lp, face, value))
    }

    pub fn t_idc(&self, b: &[f64]) -> Result<ConditionReport> {
        let b = self.unit_signal(b)?;
        let dim = b.len();
        let bp = solve_bp(&self.dict.inside_matrix(), &b)?;
        let c0 = bp.coefficients.c.clone();
        let outside = self.dict.outside_atoms();
        if outside.is_empty() {
            return Ok(ConditionReport::new(ConditionId::TIdc, 1.0, self.eps_strict)
                .with_certificate(Certificate::DualWitness { v: bp.dual, c0 })
                .note("no outside atoms"));
        }
        let mut objective = vec![0.0; dim + 1];
        objective[dim] = -1.0;
        let mut lp = Lp::new(dim + 1).maximize(objective);
        for i in 0..dim {
            lp.set_free(i);
        }
        let push_pair = |lp: &mut Lp, a: &[f64], t: f64, rhs: f64| {
            let mut r = a.to_vec();
            r.push(t);
            lp.add_le(&r, rhs);
            let mut r = negated(a);
            r.push(t);
            lp.add_le(&r, rhs);
        };
        for a in self.dict.inside_atoms() {
            push_pair(&mut lp, &a, 0.0, 1.0);
        }
        for a in &outside {
            push_pair(&mut lp, a, -1.0, 0.0);
        }
        let mut face = b.clone();
        face.push(0.0);
        let sol = solve_on_face(&lp, &face, bp.value)?;
        let v = sol.primal[..dim].to_vec();
        let margin = 1.0 - outside_gauge(&outside, &v);
        Ok(ConditionReport::new(ConditionId::TIdc, margin, self.eps_strict)
            .with_certificate(Certificate::DualWitness { v, c0 }))
    }

    /// Face point of `𝒟(A₀, b)` minimizing `‖A₋ᵀv‖∞`, with that minimum.
    fn idc_witness(&self, b: &[f64]) -> Result<(Vec<f64>, f64)> {
        let d0 = self.dict.subspace_dim();
        let mut objective = vec![0.0; d0 + 1];
        objective[d0] = -1.0;
        let (lp, face, value) = self.face_lp(b, objective)?;
        let sol = solve_on_face(&lp, &face, value)?;
        let v = self.dict.subspace().from_coordinates(&sol.primal[..d0]);
        let g = outside_gauge(&self.dict.outside_atoms(), &v);
        Ok((v, g))
    }

    pub fn idc(&self, b: &[f64]) -> Result<ConditionReport> {
        let b = self.unit_signal(b)?;
        let bp = solve_bp(&self.dict.inside_matrix(), &b)?;
        let (v, g) = self.idc_witness(&b)?;
        Ok(ConditionReport::new(ConditionId::Idc, 1.0 - g, self.eps_strict)
            .with_certificate(Certificate::DualWitness { v, c0: bp.coefficients.c }))
    }

    /// Searches `𝒟(A₀, b)` for a point of small `μ(v, A₋)`.
    ///
    /// Candidates are the IDC witness, probed face vertices and maximizers of
    /// `r₀⟨v, g⟩ − ‖A₋ᵀv‖∞` for directions `g` refined from the best point so
    /// far. The reported margin is `r₀ − min μ` over candidates, so a positive
    /// margin is exact evidence and a negative one is a bound.
    pub fn g_idc(&self, b: &[f64]) -> Result<ConditionReport> {
        let b = self.unit_signal(b)?;
        let (_, summary) = self.polar()?;
        let r0 = summary.r0;
        let outside = self.dict.outside_atoms();
        let bp = solve_bp(&self.dict.inside_matrix(), &b)?;
        let c0 = bp.coefficients.c;
        let basis = self.dict.subspace();
        let d0 = basis.dim();

        let mut candidates: Vec<Vec<f64>> = vec![self.idc_witness(&b)?.0];
        candidates.extend(dual_face(self.dict, &b, DEFAULT_FACE_PROBES)?.points);
        let mu = |v: &[f64]| point_coherence(v, &outside);
        let mut best = (f64::INFINITY, Vec::new());
        for v in &candidates {
            let m = mu(v)?;
            if m < best.0 {
                best = (m, v.clone());
            }
        }
        if !outside.is_empty() {
            let (lp, face, value) = self.face_lp(&b, vec![0.0; d0 + 1])?;
            let mut directions = vec![b.clone()];
            directions.extend(candidates.iter().filter_map(|v| normalized(v)));
            let dinkelbach = |g: &[f64]| -> Result<Vec<f64>> {
                let mut obj: Vec<f64> = basis.coordinates(g)?.into_iter().map(|x| r0 * x).collect();
                obj.push(-1.0);
                let mut l = lp.clone();
                l.objective = obj;
                let sol = solve_on_face(&l, &face, value)?;
                Ok(basis.from_coordinates(&sol.primal[..d0]))
            };
            for g in directions {
                let v = dinkelbach(&g)?;
                let m = mu(&v)?;
                if m < best.0 {
                    best = (m, v);
                }
            }
            for _ in 0..GIDC_ROUNDS {
                let Some(g) = normalized(&best.1) else { break };
                let v = dinkelbach(&g)?;
                let m = mu(&v)?;
                if m < best.0 - 1e-12 {
                    best = (m, v);
                } else {
                    break;
                }
            }
        }
        let (min_mu, v) = best;
        let theta = min_mu.clamp(0.0, 1.0).acos();
        Ok(ConditionReport::new(ConditionId::GIdc, r0 - min_mu, self.eps_strict)
            .with_certificate(Certificate::DualWitness { v, c0 })
            .note(format!(
                "angular form: gamma0 = {:.6} deg, theta(+-v, A-) = {:.6} deg",
                summary.gamma0.to_degrees(),
                theta.to_degrees()
            )))
    }

    /// Residual points of OMP on the inside atoms, scaled to unit length.
    fn unit_residuals(&self, b: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(residual_points(self.dict, b)?
            .into_iter()
            .filter_map(|r| normalized(&r))
            .collect())
    }

    pub fn irc(&self, b: &[f64]) -> Result<ConditionReport> {
        let b = self.unit_signal(b)?;
        let points = self.unit_residuals(&b)?;
        let inside = self.dict.inside_atoms();
        let outside = self.dict.outside_atoms();
        let (mut worst, mut at) = (f64::INFINITY, 0);
        for (k, v) in points.iter().enumerate() {
            let gap = outside_gauge(&inside, v) - outside_gauge(&outside, v);
            if gap < worst {
                worst = gap;
                at = k;
            }
        }
        self.residual_report(ConditionId::Irc, worst, at, points)
    }

    pub fn g_irc(&self, b: &[f64]) -> Result<ConditionReport> {
        let b = self.unit_signal(b)?;
        let (_, summary) = self.polar()?;
        let points = self.unit_residuals(&b)?;
        let outside = self.dict.outside_atoms();
        let (mut worst, mut at) = (f64::INFINITY, 0);
        for (k, v) in points.iter().enumerate() {
            let gap = summary.r0 - outside_gauge(&outside, v);
            if gap < worst {
                worst = gap;
                at = k;
            }
        }
        let report = self.residual_report(ConditionId::GIrc, worst, at, points)?;
        let theta = (summary.r0 - worst).clamp(0.0, 1.0).acos();
        Ok(report.note(format!(
            "angular form: gamma0 = {:.6} deg, smallest residual angle to A- = {:.6} deg",
            summary.gamma0.to_degrees(),
            theta.to_degrees()
        )))
    }

    fn residual_report(
        &self,
        id: ConditionId,
        worst: f64,
        at: usize,
        points: Vec<Vec<f64>>,
    ) -> Result<ConditionReport> {
        let report = ConditionReport::new(id, worst, self.eps_strict);
        let cert = if report.holds() {
            Certificate::ResidualPoints { points }
        } else {
            Certificate::ViolatingResidual {
                index: at,
                point: points[at].clone(),
            }
        };
        Ok(report.with_certificate(cert))
    }
}
