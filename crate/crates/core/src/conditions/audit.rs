//! Cross-checks the implications between conditions and against ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Certifier, ConditionId, ConditionReport, Verdict};
use crate::dict::{random_unit_in_subspace, PartitionedDictionary, Representation};
use crate::error::{Error, Result};
use crate::numkit::vector::norm2;
use crate::pursuit::{bp_optimal_face_mass_on_outside, solve_omp_dict};

/// BP counts as subspace preserving when the outside mass of its optimal face is below this.
pub const BP_MASS_TOL: f64 = 1e-8;
const AUDIT_URC_SAMPLES: usize = 256;

/// Observed behavior of the pursuit algorithms on one signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Every BP solution is subspace preserving.
    pub bp: Verdict,
    pub bp_outside_mass: f64,
    /// OMP terminates with a subspace-preserving representation; marginal when
    /// some selection was a near tie.
    pub omp: Verdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceAudit {
    pub signal: Vec<f64>,
    pub reports: Vec<ConditionReport>,
    pub truth: GroundTruth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeViolation {
    pub edge: String,
    /// Index into [`AuditReport::instances`], or `None` for a dictionary-level edge.
    pub signal: Option<usize>,
    pub premise: Verdict,
    pub conclusion: Verdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub universal: Vec<ConditionReport>,
    pub instances: Vec<InstanceAudit>,
    /// Edges whose premise and conclusion were both decided.
    pub edges_checked: usize,
    pub violations: Vec<EdgeViolation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            None => Ok(self),
            Some(v) => Err(Error::AuditViolation(format!(
                "{} violated{}",
                v.edge,
                v.signal.map(|s| format!(" on signal {s}")).unwrap_or_default()
            ))),
        }
    }
}

struct Ledger {
    checked: usize,
    violations: Vec<EdgeViolation>,
}

impl Ledger {
    fn implies(&mut self, edge: &str, signal: Option<usize>, p: Verdict, q: Verdict) {
        if p == Verdict::Marginal || q == Verdict::Marginal {
            return;
        }
        self.checked += 1;
        if p == Verdict::Holds && q == Verdict::Fails {
            self.violations.push(EdgeViolation {
                edge: edge.to_string(),
                signal,
                premise: p,
                conclusion: q,
            });
        }
    }

    fn equivalent(&mut self, edge: &str, signal: Option<usize>, p: Verdict, q: Verdict) {
        self.implies(edge, signal, p, q);
        if p != Verdict::Marginal && q != Verdict::Marginal && p == Verdict::Fails && q == Verdict::Holds {
            self.violations.push(EdgeViolation {
                edge: edge.to_string(),
                signal,
                premise: p,
                conclusion: q,
            });
        }
    }
}

fn ground_truth(dict: &PartitionedDictionary, b: &[f64]) -> Result<GroundTruth> {
    let mass = bp_optimal_face_mass_on_outside(dict, b)?;
    let trace = solve_omp_dict(dict, b)?;
    let omp = if trace.has_marginal_step() {
        Verdict::Marginal
    } else {
        let (preserving, _) = dict.is_subspace_preserving(&Representation::new(trace.coefficients.c.clone()))?;
        if trace.converged && preserving {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    };
    Ok(GroundTruth {
        bp: if mass < BP_MASS_TOL { Verdict::Holds } else { Verdict::Fails },
        bp_outside_mass: mass,
        omp,
    })
}

/// Evaluates every condition on `dict` and on `signals` plus `num_random_signals`
/// unit signals drawn from `S₀`, then checks each implication edge.
///
/// Edges with a marginal endpoint are skipped.
pub fn audit_implications(
    dict: &PartitionedDictionary,
    signals: &[Vec<f64>],
    num_random_signals: usize,
    seed: u64,
) -> Result<AuditReport> {
    let cert = Certifier::new(dict);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let udc = cert.udc()?;
    let urc = cert.urc_sampled(AUDIT_URC_SAMPLES, rng.random())?;
    let tudc = cert.t_udc()?;
    let gudc = cert.g_udc()?;
    let gusc = cert.g_usc()?;

    let mut all_signals: Vec<Vec<f64>> = Vec::new();
    for b in signals {
        let n = norm2(b);
        if n == 0.0 {
            return Err(Error::ZeroInput);
        }
        all_signals.push(b.iter().map(|x| x / n).collect());
    }
    for _ in 0..num_random_signals {
        all_signals.push(random_unit_in_subspace(dict, &mut rng));
    }

    let mut ledger = Ledger {
        checked: 0,
        violations: Vec::new(),
    };
    ledger.implies("G-USC => G-UDC", None, gusc.verdict, gudc.verdict);
    ledger.implies("G-UDC => UDC", None, gudc.verdict, udc.verdict);
    ledger.equivalent("UDC <=> URC", None, udc.verdict, urc.verdict);
    if urc.probe.as_ref().is_some_and(|p| p.contradiction) {
        ledger.violations.push(EdgeViolation {
            edge: "UDC <=> URC (sampling probe)".into(),
            signal: None,
            premise: udc.verdict,
            conclusion: Verdict::Fails,
        });
    }
    ledger.implies("UDC => T-UDC", None, udc.verdict, tudc.verdict);
    ledger.implies("G-UDC => URC", None, gudc.verdict, urc.verdict);

    let mut instances = Vec::with_capacity(all_signals.len());
    for (k, b) in all_signals.into_iter().enumerate() {
        let s = Some(k);
        let t_idc = cert.t_idc(&b)?;
        let idc = cert.idc(&b)?;
        let g_idc = cert.g_idc(&b)?;
        let irc = cert.irc(&b)?;
        let g_irc = cert.g_irc(&b)?;
        let truth = ground_truth(dict, &b)?;

        ledger.implies("G-IDC => IDC", s, g_idc.verdict, idc.verdict);
        ledger.implies("IDC => T-IDC", s, idc.verdict, t_idc.verdict);
        ledger.equivalent("T-IDC <=> BP subspace preserving", s, t_idc.verdict, truth.bp);
        ledger.implies("G-IRC => IRC", s, g_irc.verdict, irc.verdict);
        ledger.implies("IRC => OMP subspace preserving", s, irc.verdict, truth.omp);
        ledger.implies("T-UDC => BP subspace preserving", s, tudc.verdict, truth.bp);
        ledger.implies("URC => OMP subspace preserving", s, urc.verdict, truth.omp);
        ledger.implies("UDC => IDC", s, udc.verdict, idc.verdict);
        ledger.implies("URC => IRC", s, urc.verdict, irc.verdict);
        ledger.implies("G-USC => G-IRC", s, gusc.verdict, g_irc.verdict);
        ledger.implies("G-UDC => G-IDC", s, gudc.verdict, g_idc.verdict);

        instances.push(InstanceAudit {
            signal: b,
            reports: vec![t_idc, idc, g_idc, irc, g_irc],
            truth,
        });
    }

    Ok(AuditReport {
        universal: vec![tudc, udc, urc, gudc, gusc],
        instances,
        edges_checked: ledger.checked,
        violations: ledger.violations,
    })
}

impl AuditReport {
    /// The report for `id`, on signal `signal` for instance conditions.
    pub fn report(&self, id: ConditionId, signal: Option<usize>) -> Option<&ConditionReport> {
        let pool = match signal {
            Some(k) => &self.instances.get(k)?.reports,
            None => &self.universal,
        };
        pool.iter().find(|r| r.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dict::fixtures::tilted_plane;
    use crate::dict::{generate_random_instance, InstanceParams};

    #[test]
    fn tilted_plane_audit_is_clean() {
        let d = tilted_plane();
        let r = audit_implications(&d, &[vec![1.0, 0.0, 0.0]], 5, 1).unwrap();
        assert!(r.is_clean(), "{:?}", r.violations);
        assert_eq!(r.instances.len(), 6);
        assert_eq!(r.report(ConditionId::Irc, Some(0)).unwrap().verdict, Verdict::Fails);
        assert!(r.edges_checked > 0);
    }

    #[test]
    fn random_instances_audit_cleanly() {
        for seed in 0..15 {
            let d = generate_random_instance(&InstanceParams {
                ambient_dim: 4,
                subspace_dim: 2,
                num_inside: 3,
                num_outside: 4,
                min_outside_angle: 10.0,
                seed,
            })
            .unwrap();
            let r = audit_implications(&d, &[], 3, seed).unwrap();
            assert!(r.is_clean(), "seed {seed}: {:?}", r.violations);
        }
    }

    #[test]
    fn ledger_skips_marginal_and_flags_broken_edges() {
        let mut l = Ledger {
            checked: 0,
            violations: Vec::new(),
        };
        l.implies("p => q", None, Verdict::Holds, Verdict::Marginal);
        assert_eq!(l.checked, 0);
        l.implies("p => q", None, Verdict::Fails, Verdict::Holds);
        assert!(l.violations.is_empty());
        l.equivalent("p <=> q", None, Verdict::Fails, Verdict::Holds);
        l.implies("p => q", Some(3), Verdict::Holds, Verdict::Fails);
        assert_eq!(l.violations.len(), 2);
        let report = AuditReport {
            universal: vec![],
            instances: vec![],
            edges_checked: l.checked,
            violations: l.violations,
        };
        assert!(matches!(report.into_result(), Err(Error::AuditViolation(_))));
    }
}
