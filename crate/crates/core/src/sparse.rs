//! Sparse recovery: `A₀` has linearly independent columns, so `S₀` is their
//! span and every subspace-preserving representation is a support-recovering one.

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{Certificate, Certifier, ConditionId, ConditionReport, ProbeSummary, Verdict, EPS_STRICT};
use crate::dict::{Label, PartitionedDictionary};
use crate::error::{Error, Result};
use crate::geometry::MAX_ENUM_DIM;
use crate::numkit::vector::{dot, lex_cmp, norm1};
use crate::numkit::{least_squares, null_space_basis, numerical_rank};
use crate::Mat;

/// Partitions examined before switching to seeded sampling.
pub const DEFAULT_PARTITION_BUDGET: usize = 500;
const NSP_MIN_OUTSIDE_MASS: f64 = 1e-8;

/// A sign vector in `{−1, +1}^d₀`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignPattern {
    u: Vec<i8>,
}

impl SignPattern {
    pub fn new(u: Vec<i8>) -> Result<Self> {
        if u.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter("sign entries must be +1 or -1".into()));
        }
        Ok(Self { u })
    }

    /// All `2^d` patterns, ordered by the binary expansion with bit `i` set meaning `u_i = −1`.
    pub fn all(d: usize) -> Vec<SignPattern> {
        (0..1usize << d)
            .map(|m| SignPattern {
                u: (0..d).map(|i| if m >> i & 1 == 1 { -1 } else { 1 }).collect(),
            })
            .collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.u.iter().map(|&s| s as f64).collect()
    }
}

fn independent_matrix(a0: &[Vec<f64>]) -> Result<Mat> {
    let dim = a0.first().map(Vec::len).ok_or(Error::ZeroInput)?;
    let m = Mat::from_columns(dim, a0)?;
    let rank = numerical_rank(&m);
    if rank < a0.len() {
        return Err(Error::RankDeficient {
            expected: a0.len(),
            found: rank,
        });
    }
    Ok(m)
}

/// `{A₀(A₀ᵀA₀)⁻¹u : u ∈ {±1}^d₀}`, sorted lexicographically.
pub fn dual_vertices_closed_form(a0: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let m = independent_matrix(a0)?;
    if a0.len() > MAX_ENUM_DIM {
        return Err(Error::InvalidParameter(format!(
            "{} columns give too many sign patterns (limit {MAX_ENUM_DIM})",
            a0.len()
        )));
    }
    let gram = m.transpose().matmul(&m);
    let mut out = SignPattern::all(a0.len())
        .iter()
        .map(|u| Ok(m.matvec(&least_squares(&gram, &u.as_f64())?)))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|x, y| lex_cmp(x, y));
    Ok(out)
}

/// `1 − max_w ‖A₀†w‖₁` over the outside atoms `w`.
///
/// The certificate indexes atoms as in `PartitionedDictionary::from_groups(a0, a_minus)`.
pub fn exact_recovery_condition(a0: &[Vec<f64>], a_minus: &[Vec<f64>]) -> Result<ConditionReport> {
    let m = independent_matrix(a0)?;
    let mut coefficients = Vec::with_capacity(a_minus.len());
    let (mut worst, mut at) = (0.0f64, None);
    for (k, w) in a_minus.iter().enumerate() {
        let c = least_squares(&m, w)?;
        let s = norm1(&c);
        if s > worst {
            worst = s;
            at = Some(a0.len() + k);
        }
        coefficients.push(c);
    }
    let report = ConditionReport::new(ConditionId::Erc, 1.0 - worst, EPS_STRICT);
    Ok(match (report.verdict, at) {
        (Verdict::Holds, _) | (_, None) => report.with_certificate(Certificate::InsideRepresentations { coefficients }),
        (_, Some(atom)) => report.with_certificate(Certificate::ViolatingAtom { atom }),
    })
}

/// `max_{i≠j} |⟨a_i, a_j⟩|`.
pub fn mutual_coherence(atoms: &[Vec<f64>]) -> Result<f64> {
    if atoms.len() < 2 {
        return Err(Error::InvalidParameter("mutual coherence needs at least two atoms".into()));
    }
    Ok(atoms
        .iter()
        .tuple_combinations()
        .map(|(a, b)| dot(a, b).abs())
        .fold(0.0, f64::max))
}

/// `μ(A) < 1/(2d₀ − 1)` over the whole dictionary with `d₀ = dim S₀`.
pub fn mutual_coherence_condition(dict: &PartitionedDictionary, eps_strict: f64) -> Result<ConditionReport> {
    let d0 = dict.subspace_dim();
    let mu = mutual_coherence(dict.atoms())?;
    let threshold = 1.0 / (2 * d0 - 1) as f64;
    Ok(ConditionReport::new(ConditionId::Mc, threshold - mu, eps_strict)
        .note(format!("mutual coherence {mu:.9}, threshold 1/(2*{d0}-1) = {threshold:.9}")))
}

/// Index sets of size `d0`: all of them when there are at most `budget`,
/// otherwise `budget` distinct ones drawn with `seed`.
fn partitions(n: usize, d0: usize, budget: usize, seed: u64) -> (Vec<Vec<usize>>, bool) {
    let total = binomial(n, d0);
    if total.is_some_and(|t| t <= budget as u128) {
        return ((0..n).combinations(d0).collect(), false);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(budget);
    while out.len() < budget {
        let mut s = rand::seq::index::sample(&mut rng, n, d0).into_vec();
        s.sort_unstable();
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    (out, true)
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let mut acc: u128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

fn check_partition_args(atoms: &[Vec<f64>], d0: usize) -> Result<()> {
    if d0 == 0 || d0 > atoms.len() {
        return Err(Error::InvalidParameter(format!(
            "sparsity {d0} must lie in 1..={}",
            atoms.len()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub mutual_coherence: f64,
    /// `1/(2d₀ − 1)`
    pub threshold: f64,
    /// Whether `μ < 1/(2d₀ − 1)`; otherwise nothing else is checked.
    pub applicable: bool,
    pub partitions_checked: usize,
    pub sampled: bool,
    /// Smallest `r₀ − √(1 − (d₀−1)μ)/√d₀` over the checked partitions.
    pub min_inradius_slack: f64,
    /// Descriptions of every consequence that did not hold.
    pub failures: Vec<String>,
}

impl CoherenceReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks that a small mutual coherence yields, for each `d₀`-subset taken as
/// `A₀`: independent columns, G-USC, G-UDC, UDC and the inradius bound
/// `r₀ ≥ √(1 − (d₀−1)μ)/√d₀`.
pub fn coherence_implies_conditions(
    atoms: &[Vec<f64>],
    d0: usize,
    budget: usize,
    seed: u64,
) -> Result<CoherenceReport> {
    check_partition_args(atoms, d0)?;
    let mu = mutual_coherence(atoms)?;
    let threshold = 1.0 / (2 * d0 - 1) as f64;
    let mut report = CoherenceReport {
        mutual_coherence: mu,
        threshold,
        applicable: mu < threshold,
        partitions_checked: 0,
        sampled: false,
        min_inradius_slack: f64::INFINITY,
        failures: Vec::new(),
    };
    if !report.applicable {
        return Ok(report);
    }
    let bound = (1.0 - (d0 as f64 - 1.0) * mu).sqrt() / (d0 as f64).sqrt();
    let (subsets, sampled) = partitions(atoms.len(), d0, budget, seed);
    let results: Vec<(f64, Vec<String>)> = subsets
        .par_iter()
        .map(|s| {
            let mut fails = Vec::new();
            let dict = match PartitionedDictionary::with_inside_set(atoms, s) {
                Ok(d) if d.subspace_dim() == d0 => d,
                Ok(_) => return (f64::NEG_INFINITY, vec![format!("{s:?}: dependent columns")]),
                Err(e) => return (f64::NEG_INFINITY, vec![format!("{s:?}: {e}")]),
            };
            let c = Certifier::new(&dict);
            let slack = match c.polar() {
                Ok((_, g)) => g.r0 - bound,
                Err(e) => return (f64::NEG_INFINITY, vec![format!("{s:?}: {e}")]),
            };
            if slack < -1e-9 {
                fails.push(format!("{s:?}: inradius below the coherence bound by {}", -slack));
            }
            for (name, r) in [("G-USC", c.g_usc()), ("G-UDC", c.g_udc()), ("UDC", c.udc())] {
                match r {
                    Ok(r) if r.holds() => {}
                    Ok(r) => fails.push(format!("{s:?}: {name} {} (margin {})", r.verdict.as_str(), r.margin)),
                    Err(e) => fails.push(format!("{s:?}: {name}: {e}")),
                }
            }
            (slack, fails)
        })
        .collect();
    report.partitions_checked = subsets.len();
    report.sampled = sampled;
    for (slack, fails) in results {
        report.min_inradius_slack = report.min_inradius_slack.min(slack);
        report.failures.extend(fails);
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionOutcome {
    pub inside: Vec<usize>,
    pub verdict: Verdict,
    pub margin: f64,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UniformRecoveryReport {
    /// Holds when every checked partition satisfies UDC.
    pub verdict: Verdict,
    pub partitions_checked: usize,
    /// True when the partitions were a seeded sample, so a pass is only probabilistic.
    pub sampled: bool,
    pub worst: PartitionOutcome,
}

/// UDC for every `d₀`-subset of `atoms` taken as `A₀` (or a seeded sample of
/// `budget` subsets). Subsets with dependent columns, or whose span contains
/// another atom, fail.
pub fn uniform_recovery_check(
    atoms: &[Vec<f64>],
    d0: usize,
    budget: usize,
    seed: u64,
) -> Result<UniformRecoveryReport> {
    check_partition_args(atoms, d0)?;
    let (subsets, sampled) = partitions(atoms.len(), d0, budget, seed);
    let outcomes: Vec<PartitionOutcome> = subsets
        .par_iter()
        .map(|s| {
            let failed = |note: String| PartitionOutcome {
                inside: s.clone(),
                verdict: Verdict::Fails,
                margin: f64::NEG_INFINITY,
                note: Some(note),
            };
            let dict = match PartitionedDictionary::with_inside_set(atoms, s) {
                Ok(d) if d.subspace_dim() == d0 => d,
                Ok(_) => return failed("dependent columns".into()),
                Err(e) => return failed(e.to_string()),
            };
            match Certifier::new(&dict).udc() {
                Ok(r) => PartitionOutcome {
                    inside: s.clone(),
                    verdict: r.verdict,
                    margin: r.margin,
                    note: None,
                },
                Err(e) => failed(e.to_string()),
            }
        })
        .collect();
    let verdict = if outcomes.iter().any(|o| o.verdict == Verdict::Fails) {
        Verdict::Fails
    } else if outcomes.iter().all(|o| o.verdict == Verdict::Holds) {
        Verdict::Holds
    } else {
        Verdict::Marginal
    };
    let worst = outcomes
        .iter()
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .cloned()
        .expect("at least one partition");
    Ok(UniformRecoveryReport {
        verdict,
        partitions_checked: outcomes.len(),
        sampled,
        worst,
    })
}

/// The null space property `‖v₀‖₁ < ‖v₋‖₁` on `null(A) \ {0}`, decided through
/// T-UDC and probed with `num_samples` random null-space vectors.
pub fn nsp_check_via_tudc(
    a0: &[Vec<f64>],
    a_minus: &[Vec<f64>],
    num_samples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    independent_matrix(a0)?;
    let dict = PartitionedDictionary::from_groups(a0, a_minus)?;
    let mut report = Certifier::new(&dict)
        .t_udc()?
        .note("null space property, decided through the equivalent T-UDC");
    let null = null_space_basis(&dict.matrix());
    let mut probe = ProbeSummary {
        samples: 0,
        worst: f64::INFINITY,
        violations: 0,
        contradiction: false,
    };
    if null.dim() > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut attempts = 0;
        while probe.samples < num_samples && attempts < 20 * num_samples.max(1) {
            attempts += 1;
            let g: Vec<f64> = (0..null.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let v = null.from_coordinates(&g);
            let (mut inside, mut outside) = (0.0, 0.0);
            for (x, l) in v.iter().zip(dict.labels()) {
                match l {
                    Label::In => inside += x.abs(),
                    Label::Out => outside += x.abs(),
                }
            }
            if outside < NSP_MIN_OUTSIDE_MASS {
                continue;
            }
            probe.samples += 1;
            probe.worst = probe.worst.min((outside - inside) / outside);
            if inside >= outside * (1.0 + 1e-9) {
                probe.violations += 1;
            }
        }
    } else {
        report = report.note("null space is trivial");
    }
    probe.contradiction = probe.violations > 0 && report.holds();
    report.probe = Some(probe);
    Ok(report)
}
