//! Partitioned dictionaries, signals and representations.
//!
//! A dictionary keeps its atoms in file order together with a per-atom label.
//! The subspace `S₀` is the span of the atoms labeled [`Label::In`]; its
//! orthonormal basis is computed once at construction.

mod generate;
mod io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::vector::{norm2, sub};
use crate::numkit::{numerical_rank, orthonormal_basis_of_span};
use crate::{Basis, Mat};

pub use generate::{generate_random_instance, random_signal_in_subspace, random_unit_in_subspace, InstanceParams};
pub use io::{
    dictionary_from_csv_str, dictionary_from_json_str, dictionary_to_csv_string,
    dictionary_to_json_string, load_dictionary, load_representation, load_signal,
    save_dictionary, save_representation, save_signal, FileFormat,
};

/// Coefficients with `|c_j| > EPS_SUPPORT` count as nonzero.
pub const EPS_SUPPORT: f64 = 1e-8;
/// Atoms closer than this to `S₀` are inside it; farther atoms are outside.
pub const EPS_OUTSIDE: f64 = 1e-9;
/// Allowed deviation of an atom norm from 1.
pub const EPS_UNIT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "in")]
    In,
    #[serde(rename = "out")]
    Out,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::In => "in",
            Label::Out => "out",
        }
    }
}

/// Unit-norm atoms split into those spanning `S₀` and those outside it.
#[derive(Clone, Debug)]
pub struct PartitionedDictionary {
    ambient_dim: usize,
    atoms: Vec<Vec<f64>>,
    labels: Vec<Label>,
    basis: Basis,
}

impl PartitionedDictionary {
    /// Builds a dictionary and rejects it unless [`validate`](Self::validate) is clean.
    pub fn new(ambient_dim: usize, atoms: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        let d = Self::from_parts(ambient_dim, atoms, labels)?;
        d.validate().into_result()?;
        Ok(d)
    }

    /// Builds a dictionary checking only shapes and finiteness.
    ///
    /// Norm and separation problems are left for [`validate`](Self::validate).
    pub fn from_parts(ambient_dim: usize, atoms: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::InvalidDictionary("ambient dimension is zero".into()));
        }
        if atoms.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "labels",
                expected: atoms.len(),
                found: labels.len(),
            });
        }
        for (j, a) in atoms.iter().enumerate() {
            if a.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    context: "atom length",
                    expected: ambient_dim,
                    found: a.len(),
                });
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidDictionary(format!("atom {j} has a non-finite entry")));
            }
        }
        let inside: Vec<Vec<f64>> = atoms
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == Label::In)
            .map(|(a, _)| a.clone())
            .collect();
        let basis = if inside.is_empty() {
            Basis::empty(ambient_dim)
        } else {
            orthonormal_basis_of_span(&inside).unwrap_or_else(|_| Basis::empty(ambient_dim))
        };
        Ok(Self {
            ambient_dim,
            atoms,
            labels,
            basis,
        })
    }

    /// Builds a dictionary from the two atom groups, inside atoms first.
    pub fn from_groups(inside: &[Vec<f64>], outside: &[Vec<f64>]) -> Result<Self> {
        let dim = inside
            .first()
            .or(outside.first())
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidDictionary("no atoms".into()))?;
        let atoms = inside.iter().chain(outside).cloned().collect();
        let labels = std::iter::repeat_n(Label::In, inside.len())
            .chain(std::iter::repeat_n(Label::Out, outside.len()))
            .collect();
        Self::new(dim, atoms, labels)
    }

    /// `D`
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// `N`
    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// `N₀`
    pub fn num_inside(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Label::In).count()
    }

    /// `N₋`
    pub fn num_outside(&self) -> usize {
        self.num_atoms() - self.num_inside()
    }

    /// `d₀ = dim S₀`
    pub fn subspace_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn subspace(&self) -> &Basis {
        &self.basis
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn inside_indices(&self) -> Vec<usize> {
        (0..self.num_atoms()).filter(|&j| self.labels[j] == Label::In).collect()
    }

    pub fn outside_indices(&self) -> Vec<usize> {
        (0..self.num_atoms()).filter(|&j| self.labels[j] == Label::Out).collect()
    }

    pub fn inside_atoms(&self) -> Vec<Vec<f64>> {
        self.inside_indices().into_iter().map(|j| self.atoms[j].clone()).collect()
    }

    pub fn outside_atoms(&self) -> Vec<Vec<f64>> {
        self.outside_indices().into_iter().map(|j| self.atoms[j].clone()).collect()
    }

    /// `A` as a `D × N` matrix.
    pub fn matrix(&self) -> Mat {
        Mat::from_columns(self.ambient_dim, &self.atoms).expect("validated atoms")
    }

    /// `A₀` as a `D × N₀` matrix.
    pub fn inside_matrix(&self) -> Mat {
        Mat::from_columns(self.ambient_dim, &self.inside_atoms()).expect("validated atoms")
    }

    /// `A₋` as a `D × N₋` matrix.
    pub fn outside_matrix(&self) -> Mat {
        Mat::from_columns(self.ambient_dim, &self.outside_atoms()).expect("validated atoms")
    }

    /// Labels the atoms at positions `inside` as in-subspace and the rest as outside.
    pub fn with_inside_set(atoms: &[Vec<f64>], inside: &[usize]) -> Result<Self> {
        let dim = atoms
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidDictionary("no atoms".into()))?;
        let labels = (0..atoms.len())
            .map(|j| if inside.contains(&j) { Label::In } else { Label::Out })
            .collect();
        Self::new(dim, atoms.to_vec(), labels)
    }

    /// Distance of `v` from `S₀`.
    pub fn distance_to_subspace(&self, v: &[f64]) -> Result<f64> {
        self.basis.distance(v)
    }

    /// Errors with [`Error::NotInSubspace`] unless `v ∈ S₀` within `1e-9·max(1, ‖v‖)`.
    pub fn require_in_subspace(&self, v: &[f64]) -> Result<()> {
        let r = self.distance_to_subspace(v)?;
        if r > EPS_OUTSIDE * norm2(v).max(1.0) {
            return Err(Error::NotInSubspace { residual: r });
        }
        Ok(())
    }

    /// Every violated invariant with its atom index and residual.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.num_inside() == 0 || self.basis.dim() == 0 {
            violations.push(Violation {
                kind: ViolationKind::EmptySubspace,
                index: None,
                residual: 0.0,
            });
        }
        for (j, a) in self.atoms.iter().enumerate() {
            let n = norm2(a);
            if (n - 1.0).abs() > EPS_UNIT {
                violations.push(Violation {
                    kind: ViolationKind::UnitNorm,
                    index: Some(j),
                    residual: n - 1.0,
                });
            }
            let dist = norm2(&sub(a, &self.basis.project(a).expect("atom length checked")));
            match self.labels[j] {
                Label::In if dist >= EPS_OUTSIDE => violations.push(Violation {
                    kind: ViolationKind::InsideResidual,
                    index: Some(j),
                    residual: dist,
                }),
                Label::Out if dist < EPS_OUTSIDE => violations.push(Violation {
                    kind: ViolationKind::OutsideSeparation,
                    index: Some(j),
                    residual: dist,
                }),
                _ => {}
            }
        }
        if self.num_inside() > 0 {
            let rank = numerical_rank(&self.inside_matrix());
            if rank != self.basis.dim() {
                violations.push(Violation {
                    kind: ViolationKind::Rank,
                    index: None,
                    residual: rank as f64 - self.basis.dim() as f64,
                });
            }
        }
        ValidationReport { violations }
    }

    /// Whether every support index of `rep` is an inside atom; also returns the offending indices.
    pub fn is_subspace_preserving(&self, rep: &Representation) -> Result<(bool, Vec<usize>)> {
        if rep.c.len() != self.num_atoms() {
            return Err(Error::DimensionMismatch {
                context: "representation length",
                expected: self.num_atoms(),
                found: rep.c.len(),
            });
        }
        let violators: Vec<usize> = rep
            .support()
            .into_iter()
            .filter(|&j| self.labels[j] == Label::Out)
            .collect();
        Ok((violators.is_empty(), violators))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    UnitNorm,
    InsideResidual,
    OutsideSeparation,
    Rank,
    EmptySubspace,
}

impl std::fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ViolationKind::UnitNorm => "unit norm",
            ViolationKind::InsideResidual => "inside-subspace residual",
            ViolationKind::OutsideSeparation => "outside-subspace separation",
            ViolationKind::Rank => "rank",
            ViolationKind::EmptySubspace => "no inside atoms",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub index: Option<usize>,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let msg: Vec<String> = self
            .violations
            .iter()
            .map(|v| match v.index {
                Some(j) => format!("{} at atom {j} (residual {:.3e})", v.kind, v.residual),
                None => format!("{} (residual {:.3e})", v.kind, v.residual),
            })
            .collect();
        Err(Error::InvalidDictionary(msg.join("; ")))
    }
}

/// A target vector `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub b: Vec<f64>,
}

/// Coefficients `c` over the atoms of a dictionary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub c: Vec<f64>,
}

impl Representation {
    pub fn new(c: Vec<f64>) -> Self {
        Self { c }
    }

    /// Indices with `|c_j| > EPS_SUPPORT`.
    pub fn support(&self) -> Vec<usize> {
        (0..self.c.len()).filter(|&j| self.c[j].abs() > EPS_SUPPORT).collect()
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    /// Two inside atoms at +3° and −2° in the xy-plane and one outside atom tilted 1° out of it.
    pub fn tilted_plane() -> PartitionedDictionary {
        PartitionedDictionary::from_groups(
            &[
                vec![deg(3.0).cos(), deg(3.0).sin(), 0.0],
                vec![deg(2.0).cos(), -deg(2.0).sin(), 0.0],
            ],
            &[vec![deg(1.0).cos(), 0.0, deg(1.0).sin()]],
        )
        .unwrap()
    }
}
