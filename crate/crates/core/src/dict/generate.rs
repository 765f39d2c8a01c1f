//! Synthetic instances.
//!
//! Inside atoms are drawn uniformly from the unit sphere of a uniformly random
//! `d₀`-dimensional subspace; outside atoms are drawn uniformly from the
//! ambient sphere and rejected until they are at least `min_outside_angle`
//! away from that subspace. This random model is a choice of this crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Label, PartitionedDictionary, Signal, EPS_OUTSIDE};
use crate::error::{Error, Result};
use crate::numkit::vector::{norm2, normalized};
use crate::numkit::{numerical_rank, orthonormal_basis_of_span};
use crate::Mat;

const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub ambient_dim: usize,
    pub subspace_dim: usize,
    pub num_inside: usize,
    pub num_outside: usize,
    /// Minimum angle in degrees between every outside atom and `S₀`.
    pub min_outside_angle: f64,
    pub seed: u64,
}

fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        if let Some(u) = normalized(&gaussian_vector(rng, n)) {
            return u;
        }
    }
}

/// Draws a random dictionary; a pure function of `params`.
pub fn generate_random_instance(params: &InstanceParams) -> Result<PartitionedDictionary> {
    let InstanceParams {
        ambient_dim: dim,
        subspace_dim: d0,
        num_inside: n0,
        num_outside: nm,
        min_outside_angle: angle,
        seed,
    } = *params;
    if d0 == 0 || d0 > dim {
        return Err(Error::InvalidParameter(format!(
            "subspace dimension {d0} must lie in 1..={dim}"
        )));
    }
    if n0 < d0 {
        return Err(Error::InvalidParameter(format!(
            "{n0} inside atoms cannot span a {d0}-dimensional subspace"
        )));
    }
    if !(0.0..90.0).contains(&angle) {
        return Err(Error::InvalidParameter(format!(
            "minimum outside angle {angle} must lie in [0, 90) degrees"
        )));
    }
    if d0 == dim && nm > 0 {
        return Err(Error::InvalidParameter(
            "the subspace fills the ambient space, so no atom can lie outside it".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let frame: Vec<Vec<f64>> = loop {
        let cols: Vec<Vec<f64>> = (0..d0).map(|_| gaussian_vector(&mut rng, dim)).collect();
        if let Ok(b) = orthonormal_basis_of_span(&cols) {
            if b.dim() == d0 {
                break b.vectors().to_vec();
            }
        }
    };
    let basis = crate::Basis::from_orthonormal(dim, frame)?;

    let inside = loop {
        let atoms: Vec<Vec<f64>> = (0..n0)
            .map(|_| basis.from_coordinates(&unit_vector(&mut rng, d0)))
            .collect();
        if numerical_rank(&Mat::from_columns(dim, &atoms)?) == d0 {
            break atoms;
        }
    };

    let min_dist = angle.to_radians().sin().max(EPS_OUTSIDE * 10.0);
    let mut outside = Vec::with_capacity(nm);
    let mut tries = 0;
    while outside.len() < nm {
        tries += 1;
        if tries > MAX_REJECTIONS {
            return Err(Error::InvalidParameter(format!(
                "could not place outside atoms at {angle} degrees from the subspace"
            )));
        }
        let a = unit_vector(&mut rng, dim);
        if basis.distance(&a)? >= min_dist {
            outside.push(a);
        }
    }

    let atoms: Vec<Vec<f64>> = inside.into_iter().chain(outside).collect();
    let labels = std::iter::repeat_n(Label::In, n0)
        .chain(std::iter::repeat_n(Label::Out, nm))
        .collect();
    PartitionedDictionary::new(dim, atoms, labels)
}

/// A unit vector drawn uniformly from the sphere of `S₀`.
pub fn random_unit_in_subspace<R: Rng>(dict: &PartitionedDictionary, rng: &mut R) -> Vec<f64> {
    let s = dict.subspace();
    let b = s.from_coordinates(&unit_vector(rng, s.dim()));
    let n = norm2(&b);
    b.into_iter().map(|x| x / n).collect()
}

/// A unit signal drawn uniformly from the sphere of `S₀`; a pure function of `seed`.
pub fn random_signal_in_subspace(dict: &PartitionedDictionary, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Signal {
        b: random_unit_in_subspace(dict, &mut rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dict::dictionary_to_json_string;

    fn params(dim: usize, d0: usize, n0: usize, nm: usize, angle: f64, seed: u64) -> InstanceParams {
        InstanceParams {
            ambient_dim: dim,
            subspace_dim: d0,
            num_inside: n0,
            num_outside: nm,
            min_outside_angle: angle,
            seed,
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let p = params(3, 2, 5, 1, 0.0, 7);
        let a = generate_random_instance(&p).unwrap();
        let b = generate_random_instance(&p).unwrap();
        assert!(a.validate().is_valid());
        assert_eq!(dictionary_to_json_string(&a), dictionary_to_json_string(&b));
        let c = generate_random_instance(&params(3, 2, 5, 1, 0.0, 8)).unwrap();
        assert_ne!(dictionary_to_json_string(&a), dictionary_to_json_string(&c));
    }

    #[test]
    fn full_subspace_rejects_outside_atoms() {
        assert!(generate_random_instance(&params(2, 2, 3, 1, 0.0, 1)).is_err());
        assert!(generate_random_instance(&params(2, 2, 3, 0, 0.0, 1)).is_ok());
    }

    #[test]
    fn infeasible_parameters() {
        assert!(generate_random_instance(&params(3, 2, 3, 1, 90.0, 1)).is_err());
        assert!(generate_random_instance(&params(3, 4, 4, 1, 0.0, 1)).is_err());
        assert!(generate_random_instance(&params(3, 2, 1, 1, 0.0, 1)).is_err());
        assert!(generate_random_instance(&params(3, 0, 1, 1, 0.0, 1)).is_err());
    }

    #[test]
    fn outside_atoms_respect_the_angle() {
        for seed in 0..20 {
            let d = generate_random_instance(&params(4, 2, 4, 6, 30.0, seed)).unwrap();
            for a in d.outside_atoms() {
                let p = d.subspace().project(&a).unwrap();
                let theta = norm2(&p).min(1.0).acos().to_degrees();
                assert!(theta >= 30.0 - 1e-9, "{theta}");
            }
        }
    }

    #[test]
    fn one_dimensional_signal_is_the_basis_vector() {
        let d = generate_random_instance(&params(3, 1, 2, 1, 0.0, 3)).unwrap();
        let u = &d.subspace().vectors()[0];
        let b = random_signal_in_subspace(&d, 11).b;
        let c: f64 = b.iter().zip(u).map(|(x, y)| x * y).sum();
        assert!((c.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planar_signals_stay_in_the_plane() {
        let d = PartitionedDictionary::from_groups(
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            &[vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        for seed in 0..50 {
            let b = random_signal_in_subspace(&d, seed).b;
            assert!(b[2].abs() < 1e-12);
            assert!((norm2(&b) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn planar_signal_mean_is_near_zero() {
        let d = PartitionedDictionary::from_groups(
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            &[vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut mean = [0.0; 3];
        let n = 10_000;
        for _ in 0..n {
            let b = random_unit_in_subspace(&d, &mut rng);
            for i in 0..3 {
                mean[i] += b[i] / n as f64;
            }
        }
        assert!(mean[0].abs() < 0.05 && mean[1].abs() < 0.05);
    }

    proptest::proptest! {
        #[test]
        fn generated_instances_validate(seed in 0u64..1000, dim in 2usize..7, d0 in 1usize..4, extra in 0usize..4, nm in 0usize..5, angle in 0.0f64..60.0) {
            let d0 = d0.min(dim - 1);
            let d = generate_random_instance(&params(dim, d0, d0 + extra, nm, angle, seed)).unwrap();
            proptest::prop_assert!(d.validate().is_valid());
            proptest::prop_assert_eq!(d.subspace_dim(), d0);
        }
    }
}
