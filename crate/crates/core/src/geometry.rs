//! Geometry of the polar body `K₀° = {v ∈ S₀ : ‖A₀ᵀv‖∞ ≤ 1}`.
//!
//! The vertices of `K₀°` are the dual vertices. Each one is pinned by `d₀`
//! linearly independent active constraints `a_jᵀv = ±1`, so they are found by
//! enumerating `d₀`-subsets of atoms and sign patterns in the coordinates of
//! `S₀`. The circumradius `R₀` is the largest vertex norm, the inradius is
//! `r₀ = 1/R₀`, and the covering radius `γ₀` is the largest angular gap
//! between a vertex direction and `±A₀`.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dict::{PartitionedDictionary, EPS_OUTSIDE};
use crate::error::{Error, Result};
use crate::numkit::vector::{dot, lex_cmp, norm2, norm_inf, sub};
use crate::numkit::{least_squares, PivotedQr};
use crate::{Basis, Mat};

/// Enumeration is exponential in `d₀`; larger subspaces are rejected.
pub const MAX_ENUM_DIM: usize = 12;
/// Slack on `‖A₀ᵀv‖∞ ≤ 1` when accepting a candidate vertex.
pub const VERTEX_FEAS_TOL: f64 = 1e-8;
/// Candidates closer than this are the same vertex.
pub const VERTEX_DEDUP_TOL: f64 = 1e-7;

/// Polar body of the inside atoms with its cached vertex list.
#[derive(Clone, Debug)]
pub struct PolarPolytope {
    atoms: Vec<Vec<f64>>,
    basis: Basis,
    vertices: Vec<Vec<f64>>,
}

impl PolarPolytope {
    pub fn new(atoms: &[Vec<f64>], basis: &Basis) -> Result<Self> {
        let vertices = enumerate_dual_vertices(atoms, basis)?;
        Ok(Self {
            atoms: atoms.to_vec(),
            basis: basis.clone(),
            vertices,
        })
    }

    pub fn from_dictionary(dict: &PartitionedDictionary) -> Result<Self> {
        Self::new(&dict.inside_atoms(), dict.subspace())
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Dual vertices in ambient coordinates, sorted lexicographically.
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn summary(&self) -> GeometrySummary {
        summarize(&self.atoms, &self.vertices)
    }

    /// `‖A₀ᵀv‖∞` for `v ∈ S₀`.
    pub fn gauge(&self, v: &[f64]) -> Result<f64> {
        gauge(&self.atoms, &self.basis, v)
    }
}

/// Inradius, circumradius and covering radius of the inside atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub r0: f64,
    #[serde(rename = "R0")]
    pub big_r0: f64,
    /// Covering radius in radians.
    pub gamma0: f64,
    pub num_dual_vertices: usize,
}

fn check_enumerable(atoms: &[Vec<f64>], basis: &Basis) -> Result<Vec<Vec<f64>>> {
    let d0 = basis.dim();
    if d0 == 0 || atoms.is_empty() {
        return Err(Error::RankDeficient {
            expected: 1,
            found: 0,
        });
    }
    if d0 > MAX_ENUM_DIM {
        return Err(Error::InvalidParameter(format!(
            "vertex enumeration supports subspace dimension up to {MAX_ENUM_DIM}, got {d0}"
        )));
    }
    let coords: Vec<Vec<f64>> = atoms
        .iter()
        .map(|a| basis.coordinates(a))
        .collect::<Result<_>>()?;
    for (a, z) in atoms.iter().zip(&coords) {
        let r = norm2(&sub(a, &basis.from_coordinates(z)));
        if r > EPS_OUTSIDE {
            return Err(Error::NotInSubspace { residual: r });
        }
    }
    let rank = PivotedQr::new(&Mat::from_rows(&coords)?).rank;
    if rank != d0 {
        return Err(Error::RankDeficient {
            expected: d0,
            found: rank,
        });
    }
    Ok(coords)
}

/// Inverse of a square matrix, or `None` when it is numerically singular.
fn inverse(m: &Mat) -> Option<Mat> {
    let n = m.rows();
    if PivotedQr::new(m).rank < n {
        return None;
    }
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            least_squares(m, &e).expect("square system")
        })
        .collect();
    Mat::from_columns(n, &cols).ok()
}

/// All vertices of `{v ∈ S₀ : ‖A₀ᵀv‖∞ ≤ 1}`, deduplicated and sorted lexicographically.
pub fn enumerate_dual_vertices(atoms: &[Vec<f64>], basis: &Basis) -> Result<Vec<Vec<f64>>> {
    let coords = check_enumerable(atoms, basis)?;
    let d0 = basis.dim();
    let subsets: Vec<Vec<usize>> = (0..coords.len()).combinations(d0).collect();
    let candidates: Vec<Vec<Vec<f64>>> = subsets
        .par_iter()
        .map(|subset| {
            let rows: Vec<Vec<f64>> = subset.iter().map(|&j| coords[j].clone()).collect();
            let Some(inv) = inverse(&Mat::from_rows(&rows).expect("square")) else {
                return Vec::new();
            };
            let mut found = Vec::new();
            // half of the sign patterns; the other half are the negations
            for mask in 0..(1usize << (d0 - 1)) {
                let u: Vec<f64> = (0..d0)
                    .map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 })
                    .collect();
                let z = inv.matvec(&u);
                let feasible = coords
                    .iter()
                    .all(|a| dot(a, &z).abs() <= 1.0 + VERTEX_FEAS_TOL);
                if feasible {
                    let neg: Vec<f64> = z.iter().map(|x| -x).collect();
                    found.push(z);
                    found.push(neg);
                }
            }
            found
        })
        .collect();

    let mut kept: Vec<Vec<f64>> = Vec::new();
    for z in candidates.into_iter().flatten() {
        if !kept.iter().any(|k| norm_inf(&sub(k, &z)) <= VERTEX_DEDUP_TOL) {
            kept.push(z);
        }
    }
    let mut vertices: Vec<Vec<f64>> = kept.iter().map(|z| basis.from_coordinates(z)).collect();
    vertices.sort_by(|a, b| lex_cmp(a, b));
    Ok(vertices)
}

fn summarize(atoms: &[Vec<f64>], vertices: &[Vec<f64>]) -> GeometrySummary {
    let big_r0 = vertices.iter().map(|v| norm2(v)).fold(0.0, f64::max);
    let gamma0 = vertices
        .iter()
        .map(|v| angular_distance(std::slice::from_ref(v), &symmetrize(atoms)).expect("nonzero vertices"))
        .fold(0.0, f64::max);
    GeometrySummary {
        r0: 1.0 / big_r0,
        big_r0,
        gamma0,
        num_dual_vertices: vertices.len(),
    }
}

/// `r₀`, `R₀`, `γ₀` and the vertex count of the inside atoms.
pub fn geometry_summary(atoms: &[Vec<f64>], basis: &Basis) -> Result<GeometrySummary> {
    let vertices = enumerate_dual_vertices(atoms, basis)?;
    Ok(summarize(atoms, &vertices))
}

fn symmetrize(atoms: &[Vec<f64>]) -> Vec<Vec<f64>> {
    atoms
        .iter()
        .flat_map(|a| [a.clone(), a.iter().map(|x| -x).collect()])
        .collect()
}

/// Brute-force covering radius: the largest angle between a grid point of
/// the unit sphere of `S₀` and its nearest point of `±A₀`.
///
/// Supports `d₀ ≤ 3`. `resolution` is the grid step in radians.
pub fn covering_radius_grid_oracle(atoms: &[Vec<f64>], basis: &Basis, resolution: f64) -> Result<f64> {
    if resolution.is_nan() || resolution <= 0.0 {
        return Err(Error::InvalidParameter("grid resolution must be positive".into()));
    }
    let d0 = basis.dim();
    let coords: Vec<Vec<f64>> = atoms
        .iter()
        .map(|a| basis.coordinates(a))
        .collect::<Result<_>>()?;
    let worst = |w: &[f64]| {
        let best = coords.iter().map(|a| dot(a, w).abs() / norm2(a)).fold(0.0, f64::max);
        best.clamp(-1.0, 1.0).acos()
    };
    let pi = std::f64::consts::PI;
    let steps = |range: f64| (range / resolution).ceil() as usize;
    match d0 {
        1 => Ok(worst(&[1.0])),
        2 => Ok((0..steps(pi))
            .into_par_iter()
            .map(|k| {
                let phi = k as f64 * resolution;
                worst(&[phi.cos(), phi.sin()])
            })
            .reduce(|| 0.0, f64::max)),
        3 => Ok((0..=steps(pi / 2.0))
            .into_par_iter()
            .map(|i| {
                let theta = (i as f64 * resolution).min(pi / 2.0);
                let ring = ((2.0 * pi * theta.sin()) / resolution).ceil().max(1.0) as usize;
                (0..ring)
                    .map(|k| {
                        let phi = 2.0 * pi * k as f64 / ring as f64;
                        worst(&[theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()])
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)),
        _ => Err(Error::InvalidParameter(format!(
            "grid oracle supports subspace dimension 1 to 3, got {d0}"
        ))),
    }
}

/// Gauge of the polar body at `v ∈ S₀`, which is `‖A₀ᵀv‖∞`.
pub fn gauge(atoms: &[Vec<f64>], basis: &Basis, v: &[f64]) -> Result<f64> {
    let r = basis.distance(v)?;
    if r > EPS_OUTSIDE * norm2(v).max(1.0) {
        return Err(Error::NotInSubspace { residual: r });
    }
    Ok(atoms.iter().map(|a| dot(a, v).abs()).fold(0.0, f64::max))
}

/// Smallest angle between a vector of `vs` and a vector of `ws`.
pub fn angular_distance(vs: &[Vec<f64>], ws: &[Vec<f64>]) -> Result<f64> {
    if vs.is_empty() || ws.is_empty() {
        return Err(Error::InvalidParameter("angular distance of an empty set".into()));
    }
    let mut best = -1.0f64;
    for v in vs {
        let nv = norm2(v);
        for w in ws {
            let nw = norm2(w);
            if nv == 0.0 || nw == 0.0 {
                return Err(Error::ZeroInput);
            }
            best = best.max(dot(v, w) / (nv * nw));
        }
    }
    Ok(best.clamp(-1.0, 1.0).acos())
}

/// `max |⟨w/‖w‖, a⟩|` over `w ∈ ws` and outside atoms `a`; zero when there are no outside atoms.
pub fn coherence(ws: &[Vec<f64>], outside: &[Vec<f64>]) -> Result<f64> {
    let mut best = 0.0f64;
    for w in ws {
        let nw = norm2(w);
        if nw == 0.0 {
            return Err(Error::ZeroInput);
        }
        for a in outside {
            best = best.max(dot(w, a).abs() / nw);
        }
    }
    Ok(best)
}

/// `μ(v, A₋)` for a single direction.
pub fn point_coherence(v: &[f64], outside: &[Vec<f64>]) -> Result<f64> {
    coherence(&[v.to_vec()], outside)
}

/// Coherence between the whole subspace and the outside atoms, `max_a ‖P_S₀ a‖`.
pub fn subspace_coherence(basis: &Basis, outside: &[Vec<f64>]) -> Result<f64> {
    let mut best = 0.0f64;
    for a in outside {
        best = best.max(norm2(&basis.project(a)?));
    }
    Ok(best)
}
