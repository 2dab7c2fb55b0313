//! Seeded generators for test inputs: step functions, normalized atoms, and
//! adversarial admissible pairs that no function couple produces.
//!
//! Everything takes the RNG by value reference, so callers control seeding
//! and reproducibility. The pair generator is built so admissibility holds
//! exactly in floating point (tolerance zero), which lets the validators run
//! at their tightest settings against inputs the derived-pair path would
//! never emit: sibling `S` values are written once and shared, increments are
//! non-negative by construction, and children of `M` are scaled to at most
//! 99% of their parent unless they are set to the parent bit for bit.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::haar::{make_atom, StepFunction};
use crate::lattice::{LatticeSpec, NodeId};
use crate::lemma::{AdmissiblePair, NodeFunctional};
use crate::scalar::{pairwise_sum, real, Scalar};

/// Step function with i.i.d. uniform values in `[-1, 1)`.
pub fn random_step_function<T: Scalar, R: Rng + ?Sized>(
    depth: u32,
    rng: &mut R,
) -> Result<StepFunction<T>> {
    let spec = LatticeSpec::new(1, depth)?;
    let values = (0..spec.leaf_count())
        .map(|_| real::<T>(rng.random_range(-1.0..1.0)))
        .collect();
    StepFunction::new(spec, values)
}

/// Random normalized atom supported on `node`: mean zero over the node and
/// `sup |f| = 1 / |node|`, zero elsewhere on `[0, 1)`.
pub fn random_atom<T: Scalar, R: Rng + ?Sized>(
    depth: u32,
    node: NodeId,
    rng: &mut R,
) -> Result<StepFunction<T>> {
    let spec = LatticeSpec::new(1, depth)?;
    spec.validate(node)?;
    if node.generation == depth {
        return Err(Error::InvalidAtom(
            "an atom needs at least two cells to have mean zero".into(),
        ));
    }
    let cells = 1usize << (depth - node.generation);
    let bound = real::<T>(2.0).powi(node.generation as i32);
    for _ in 0..16 {
        let raw: Vec<T> = (0..cells)
            .map(|_| real::<T>(rng.random_range(-1.0..1.0)))
            .collect();
        let mean = pairwise_sum(&raw) / real::<T>(cells as f64);
        let centered: Vec<T> = raw.iter().map(|&v| v - mean).collect();
        let max_abs = centered.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        if max_abs > T::zero() {
            let scale = bound / max_abs;
            let profile: Vec<T> = centered.iter().map(|&v| v * scale).collect();
            return make_atom(node, &profile);
        }
    }
    // All draws collapsed to a constant 16 times in a row; fall back to the
    // two-cell wavelet profile.
    let mut profile = vec![T::zero(); cells];
    profile[0] = bound;
    profile[cells - 1] = -bound;
    make_atom(node, &profile)
}

/// Adversarial admissible pair on `spec`, exactly admissible at tolerance
/// zero and generally not of the derived form.
///
/// `S` grows top-down by per-sibling-set increments that are squared normals
/// (or exactly zero 20% of the time), from a root that itself is nonzero
/// half the time. `M` shrinks top-down: children are either the parent
/// verbatim (15%) or rescaled non-negative draws whose mean lands at a
/// uniform fraction of at most 99% of the parent, leaving a gap that
/// dominates rounding. The cap is the maximum of `M`.
pub fn random_admissible_pair<T: Scalar, R: Rng + ?Sized>(
    spec: LatticeSpec,
    rng: &mut R,
) -> Result<AdmissiblePair<T>> {
    let arity = spec.arity() as usize;

    let root_s = if rng.random_bool(0.5) {
        let g: f64 = rng.sample(StandardNormal);
        real::<T>(g * g)
    } else {
        T::zero()
    };
    let mut s_rows: Vec<Vec<T>> = vec![vec![root_s]];
    for k in 0..spec.depth() {
        let cur = &s_rows[k as usize];
        let mut next = Vec::with_capacity(cur.len() * arity);
        for &sv in cur {
            let delta = if rng.random_bool(0.8) {
                let g: f64 = rng.sample(StandardNormal);
                real::<T>(g * g * 0.5)
            } else {
                T::zero()
            };
            let child = sv + delta;
            for _ in 0..arity {
                next.push(child);
            }
        }
        s_rows.push(next);
    }

    let root_m = real::<T>(rng.random_range(0.0..2.0));
    let mut m_rows: Vec<Vec<T>> = vec![vec![root_m]];
    for k in 0..spec.depth() {
        let cur = &m_rows[k as usize];
        let mut next = Vec::with_capacity(cur.len() * arity);
        for &mv in cur {
            if rng.random_bool(0.15) {
                for _ in 0..arity {
                    next.push(mv);
                }
                continue;
            }
            let raw: Vec<T> = (0..arity)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        T::zero()
                    } else {
                        let g: f64 = rng.sample(StandardNormal);
                        real::<T>(g.abs())
                    }
                })
                .collect();
            let raw_mean = pairwise_sum(&raw) / real::<T>(arity as f64);
            if raw_mean <= T::zero() || mv <= T::zero() {
                for _ in 0..arity {
                    next.push(T::zero());
                }
                continue;
            }
            let target = real::<T>(rng.random_range(0.0..0.99)) * mv;
            let scale = target / raw_mean;
            for v in raw {
                next.push(v * scale);
            }
        }
        m_rows.push(next);
    }

    let s = NodeFunctional::new(spec, s_rows)?;
    let m = NodeFunctional::new(spec, m_rows)?;
    AdmissiblePair::new(s, m, None, T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lemma::check_admissibility;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_are_deterministic_under_a_seed() {
        let mut a = ChaCha8Rng::seed_from_u64(99);
        let mut b = ChaCha8Rng::seed_from_u64(99);
        let fa: StepFunction<f64> = random_step_function(6, &mut a).unwrap();
        let fb: StepFunction<f64> = random_step_function(6, &mut b).unwrap();
        assert_eq!(fa.values(), fb.values());
        let pa: AdmissiblePair<f64> =
            random_admissible_pair(LatticeSpec::new(1, 5).unwrap(), &mut a).unwrap();
        let pb: AdmissiblePair<f64> =
            random_admissible_pair(LatticeSpec::new(1, 5).unwrap(), &mut b).unwrap();
        assert_eq!(pa.s().per_generation(), pb.s().per_generation());
        assert_eq!(pa.m().per_generation(), pb.m().per_generation());
    }

    #[test]
    fn random_functions_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f: StepFunction<f64> = random_step_function(8, &mut rng).unwrap();
        assert_eq!(f.values().len(), 256);
        assert!(f.values().iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn atoms_are_normalized_and_supported_on_their_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let node = NodeId::new(2, 1);
        for _ in 0..10 {
            let atom: StepFunction<f64> = random_atom(6, node, &mut rng).unwrap();
            let spec = *atom.spec();
            let inside = spec.leaf_range(node).unwrap();
            let sup = atom.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(sup <= 4.0 * (1.0 + 1e-12), "sup {sup}");
            assert!((sup - 4.0).abs() <= 4.0 * 1e-9, "atoms saturate the bound");
            for (i, &v) in atom.values().iter().enumerate() {
                if !inside.contains(&(i as u64)) {
                    assert_eq!(v, 0.0);
                }
            }
            let mean_on_node: f64 =
                inside.clone().map(|i| atom.values()[i as usize]).sum::<f64>()
                    / (inside.end - inside.start) as f64;
            assert!(mean_on_node.abs() < 1e-11);
        }
    }

    #[test]
    fn atom_on_a_leaf_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r: Result<StepFunction<f64>> = random_atom(3, NodeId::new(3, 0), &mut rng);
        assert!(matches!(r, Err(Error::InvalidAtom(_))));
    }

    #[test]
    fn adversarial_pairs_are_exactly_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for dim in [1u32, 2] {
            for trial in 0..15 {
                let spec = LatticeSpec::new(dim, 4).unwrap();
                let pair: AdmissiblePair<f64> =
                    random_admissible_pair(spec, &mut rng).unwrap();
                let report =
                    check_admissibility(pair.s(), pair.m(), pair.mbar(), 0.0).unwrap();
                assert!(report.passed, "dim {dim} trial {trial}");
            }
        }
    }

    #[test]
    fn adversarial_pairs_are_not_derived_in_general() {
        // A derived pair always has S_root = 0; the generator produces
        // positive roots about half the time.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = LatticeSpec::new(1, 4).unwrap();
        let mut positives = 0;
        for _ in 0..40 {
            let pair: AdmissiblePair<f64> = random_admissible_pair(spec, &mut rng).unwrap();
            if pair.s().get(NodeId::ROOT).unwrap() > 0.0 {
                positives += 1;
            }
        }
        assert!(positives > 5, "{positives} positive roots out of 40");
    }
}
