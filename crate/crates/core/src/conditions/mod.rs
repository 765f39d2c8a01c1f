//! Recovery-condition checkers.
//!
//! Every checker returns a [`ConditionReport`] with a signed margin (positive
//! means the strict inequality holds), a three-valued verdict at
//! `eps_strict`, and a certificate that [`verify_certificate`] can re-check
//! without the LP that produced it.
//!
//! Instance conditions take a signal `b ∈ S₀` and only depend on its
//! direction, so `b` is normalized on entry.

mod audit;
mod instance;
mod universal;
mod verify;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dict::PartitionedDictionary;
use crate::error::{Error, Result};
use crate::geometry::{GeometrySummary, PolarPolytope};
use crate::numkit::vector::norm2;

pub use audit::{audit_implications, AuditReport, EdgeViolation, GroundTruth, InstanceAudit};
pub use universal::{tudc_nullspace_probe, tudc_objective_comparison};
pub use verify::verify_certificate;

/// Default threshold separating a verdict from a marginal case.
pub const EPS_STRICT: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConditionId {
    #[serde(rename = "T-IDC")]
    TIdc,
    #[serde(rename = "IDC")]
    Idc,
    #[serde(rename = "G-IDC")]
    GIdc,
    #[serde(rename = "IRC")]
    Irc,
    #[serde(rename = "G-IRC")]
    GIrc,
    #[serde(rename = "T-UDC")]
    TUdc,
    #[serde(rename = "UDC")]
    Udc,
    #[serde(rename = "URC")]
    Urc,
    #[serde(rename = "G-UDC")]
    GUdc,
    #[serde(rename = "G-USC")]
    GUsc,
    #[serde(rename = "MC")]
    Mc,
    #[serde(rename = "ERC")]
    Erc,
}

impl ConditionId {
    pub const ALL: [ConditionId; 12] = [
        ConditionId::TIdc,
        ConditionId::Idc,
        ConditionId::GIdc,
        ConditionId::Irc,
        ConditionId::GIrc,
        ConditionId::TUdc,
        ConditionId::Udc,
        ConditionId::Urc,
        ConditionId::GUdc,
        ConditionId::GUsc,
        ConditionId::Mc,
        ConditionId::Erc,
    ];

    /// The ten conditions defined for a general partitioned dictionary.
    pub const GENERAL: [ConditionId; 10] = [
        ConditionId::TIdc,
        ConditionId::Idc,
        ConditionId::GIdc,
        ConditionId::Irc,
        ConditionId::GIrc,
        ConditionId::TUdc,
        ConditionId::Udc,
        ConditionId::Urc,
        ConditionId::GUdc,
        ConditionId::GUsc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConditionId::TIdc => "T-IDC",
            ConditionId::Idc => "IDC",
            ConditionId::GIdc => "G-IDC",
            ConditionId::Irc => "IRC",
            ConditionId::GIrc => "G-IRC",
            ConditionId::TUdc => "T-UDC",
            ConditionId::Udc => "UDC",
            ConditionId::Urc => "URC",
            ConditionId::GUdc => "G-UDC",
            ConditionId::GUsc => "G-USC",
            ConditionId::Mc => "MC",
            ConditionId::Erc => "ERC",
        }
    }

    /// Conditions that depend on a particular signal.
    pub fn is_instance(self) -> bool {
        matches!(
            self,
            ConditionId::TIdc | ConditionId::Idc | ConditionId::GIdc | ConditionId::Irc | ConditionId::GIrc
        )
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConditionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('_', "-");
        ConditionId::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown condition `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Marginal,
}

impl Verdict {
    pub fn from_margin(margin: f64, eps_strict: f64) -> Self {
        if margin.abs() < eps_strict || margin.is_nan() {
            Verdict::Marginal
        } else if margin > 0.0 {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Marginal => "marginal",
        }
    }
}

/// Evidence attached to a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certificate {
    /// `v` with `‖A₀ᵀv‖∞ ≤ 1` and `⟨v, b⟩ = ‖c₀‖₁` for `A₀c₀ = b`, so both are optimal.
    DualWitness { v: Vec<f64>, c0: Vec<f64> },
    /// The points at which a residual inequality was checked.
    ResidualPoints { points: Vec<Vec<f64>> },
    ViolatingResidual { index: usize, point: Vec<f64> },
    /// For each outside atom `a`, inside coefficients with `A₀c = P_S₀ a`.
    InsideRepresentations { coefficients: Vec<Vec<f64>> },
    /// Dual vertices `w` and lifts `v ∈ w + S₀⊥`.
    VertexLifts { vertices: Vec<Vec<f64>>, lifts: Vec<Vec<f64>> },
    /// All dual vertices.
    Vertices { vertices: Vec<Vec<f64>> },
    /// A dual vertex breaking the condition, with the responsible atom.
    ViolatingVertex { vertex: Vec<f64>, atom: Option<usize> },
    /// A dictionary atom breaking the condition.
    ViolatingAtom { atom: usize },
    /// Inradius and the quantity compared against it.
    GeometricBound { r0: f64, coherence: f64 },
}

/// Consistency probe run alongside an exact decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub samples: usize,
    /// Smallest sampled slack of the probed inequality.
    pub worst: f64,
    pub violations: usize,
    /// A sampled violation while the exact verdict holds.
    pub contradiction: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub id: ConditionId,
    pub verdict: Verdict,
    pub margin: f64,
    pub certificate: Option<Certificate>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probe: Option<ProbeSummary>,
}

impl ConditionReport {
    pub(crate) fn new(id: ConditionId, margin: f64, eps_strict: f64) -> Self {
        Self {
            id,
            verdict: Verdict::from_margin(margin, eps_strict),
            margin,
            certificate: None,
            notes: Vec::new(),
            probe: None,
        }
    }

    pub(crate) fn with_certificate(mut self, c: Certificate) -> Self {
        self.certificate = Some(c);
        self
    }

    pub(crate) fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    /// Re-decides the verdict at another threshold.
    pub fn with_tol(mut self, eps_strict: f64) -> Self {
        self.verdict = Verdict::from_margin(self.margin, eps_strict);
        if let Some(p) = &mut self.probe {
            p.contradiction = p.violations > 0 && self.verdict == Verdict::Holds;
        }
        self
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn fails(&self) -> bool {
        self.verdict == Verdict::Fails
    }
}

/// A dictionary with its polar geometry computed on first use.
pub struct Certifier<'a> {
    dict: &'a PartitionedDictionary,
    eps_strict: f64,
    polar: OnceLock<(PolarPolytope, GeometrySummary)>,
}

impl<'a> Certifier<'a> {
    pub fn new(dict: &'a PartitionedDictionary) -> Self {
        Self {
            dict,
            eps_strict: EPS_STRICT,
            polar: OnceLock::new(),
        }
    }

    pub fn with_tol(mut self, eps_strict: f64) -> Self {
        self.eps_strict = eps_strict;
        self
    }

    pub fn dict(&self) -> &PartitionedDictionary {
        self.dict
    }

    pub fn eps_strict(&self) -> f64 {
        self.eps_strict
    }

    pub fn polar(&self) -> Result<&(PolarPolytope, GeometrySummary)> {
        if let Some(p) = self.polar.get() {
            return Ok(p);
        }
        let poly = PolarPolytope::from_dictionary(self.dict)?;
        let summary = poly.summary();
        let _ = self.polar.set((poly, summary));
        Ok(self.polar.get().expect("just set"))
    }

    /// Unit vector along `b` after checking `0 ≠ b ∈ S₀`.
    pub(crate) fn unit_signal(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dict.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "signal length",
                expected: self.dict.ambient_dim(),
                found: b.len(),
            });
        }
        let n = norm2(b);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroInput);
        }
        let u: Vec<f64> = b.iter().map(|x| x / n).collect();
        self.dict.require_in_subspace(&u)?;
        Ok(u)
    }

    /// Runs one condition; instance conditions need `b`.
    pub fn certify(&self, id: ConditionId, b: Option<&[f64]>) -> Result<ConditionReport> {
        let need_b = || {
            b.ok_or_else(|| Error::InvalidParameter(format!("{id} needs a signal")))
        };
        match id {
            ConditionId::TIdc => self.t_idc(need_b()?),
            ConditionId::Idc => self.idc(need_b()?),
            ConditionId::GIdc => self.g_idc(need_b()?),
            ConditionId::Irc => self.irc(need_b()?),
            ConditionId::GIrc => self.g_irc(need_b()?),
            ConditionId::TUdc => self.t_udc(),
            ConditionId::Udc => self.udc(),
            ConditionId::Urc => self.urc_sampled(universal::DEFAULT_URC_SAMPLES, 0),
            ConditionId::GUdc => self.g_udc(),
            ConditionId::GUsc => self.g_usc(),
            ConditionId::Mc => crate::sparse::mutual_coherence_condition(self.dict, self.eps_strict),
            ConditionId::Erc => crate::sparse::exact_recovery_condition(
                &self.dict.inside_atoms(),
                &self.dict.outside_atoms(),
            )
            .map(|r| r.with_tol(self.eps_strict)),
        }
    }
}

pub fn certify_t_idc(dict: &PartitionedDictionary, b: &[f64]) -> Result<ConditionReport> {
    Certifier::new(dict).t_idc(b)
}

pub fn certify_idc(dict: &PartitionedDictionary, b: &[f64]) -> Result<ConditionReport> {
    Certifier::new(dict).idc(b)
}

pub fn certify_g_idc(dict: &PartitionedDictionary, b: &[f64]) -> Result<ConditionReport> {
    Certifier::new(dict).g_idc(b)
}

pub fn certify_irc(dict: &PartitionedDictionary, b: &[f64]) -> Result<ConditionReport> {
    Certifier::new(dict).irc(b)
}

pub fn certify_g_irc(dict: &PartitionedDictionary, b: &[f64]) -> Result<ConditionReport> {
    Certifier::new(dict).g_irc(b)
}

pub fn certify_udc(dict: &PartitionedDictionary) -> Result<ConditionReport> {
    Certifier::new(dict).udc()
}

pub fn certify_urc_sampled(dict: &PartitionedDictionary, num_samples: usize, seed: u64) -> Result<ConditionReport> {
    Certifier::new(dict).urc_sampled(num_samples, seed)
}

pub fn certify_t_udc(dict: &PartitionedDictionary) -> Result<ConditionReport> {
    Certifier::new(dict).t_udc()
}

pub fn certify_g_udc(dict: &PartitionedDictionary) -> Result<ConditionReport> {
    Certifier::new(dict).g_udc()
}

pub fn certify_g_usc(dict: &PartitionedDictionary) -> Result<ConditionReport> {
    Certifier::new(dict).g_usc()
}
