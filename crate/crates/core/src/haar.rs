//! Step functions on the dyadic interval and their Haar analysis.
//!
//! A [`StepFunction`] is constant on the finest-generation leaves of a
//! one-dimensional lattice. The Haar function of an internal node `I` is
//! `h_I = +1/sqrt(|I|)` on the left half and `-1/sqrt(|I|)` on the right
//! half, so the coefficient of `f` against `h_I` is
//!
//! ```text
//! (f, h_I) = sqrt(|I|)/2 * (<f>_left - <f>_right)
//! ```
//!
//! where `<f>_J` is the average over `J`. Two norms are computed from the
//! average increments `D_J = <f>_right - <f>_left`:
//!
//! * the dyadic BMO norm, `sup_J (1/|J| * sum_{I inside J} D_I^2 |I|)^(1/2)`,
//!   with the supremum over every node including leaves;
//! * the square-function norm `sum_L |L| * sqrt(sum_{I above L} D_I^2)`,
//!   summing over leaves `L` and their internal ancestors `I`.
//!
//! Both are evaluated in one sweep over the lattice: the BMO sum satisfies
//! `W_J = D_J^2 |J| + W_left + W_right` bottom-up, and the square-function
//! path sums accumulate top-down.

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, NodeId};
use crate::scalar::{pairwise_sum, real, to_f64, Scalar};
use crate::tolerances::ATOM_TOL;

/// Function constant on the leaves of a dimension-one lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction<T: Scalar> {
    spec: LatticeSpec,
    values: Vec<T>,
}

impl<T: Scalar> StepFunction<T> {
    /// `values[i]` is the value on leaf `(depth, i)`. Requires a
    /// one-dimensional spec, a full set of finite values.
    pub fn new(spec: LatticeSpec, values: Vec<T>) -> Result<Self> {
        if spec.dim() != 1 {
            return Err(Error::InvalidLattice(format!(
                "step functions live on dimension-one lattices, got dim {}",
                spec.dim()
            )));
        }
        if values.len() as u64 != spec.leaf_count() {
            return Err(Error::InvalidLattice(format!(
                "expected {} leaf values for depth {}, got {}",
                spec.leaf_count(),
                spec.depth(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("leaf value {v}")));
        }
        Ok(StepFunction { spec, values })
    }

    pub fn constant(depth: u32, value: T) -> Result<Self> {
        let spec = LatticeSpec::new(1, depth)?;
        let n = spec.leaf_count() as usize;
        StepFunction::new(spec, vec![value; n])
    }

    /// The Haar function of `node`, resolved at generation `depth`.
    pub fn haar(depth: u32, node: NodeId) -> Result<Self> {
        let spec = LatticeSpec::new(1, depth)?;
        spec.validate(node)?;
        if node.generation >= depth {
            return Err(Error::LeafNode(node));
        }
        let amp = real::<T>(2.0).powi(node.generation as i32).sqrt();
        let mut values = vec![T::zero(); spec.leaf_count() as usize];
        let left = spec.child(node, 0)?;
        let right = spec.child(node, 1)?;
        for i in spec.leaf_range(left)? {
            values[i as usize] = amp;
        }
        for i in spec.leaf_range(right)? {
            values[i as usize] = -amp;
        }
        StepFunction::new(spec, values)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Average over one node.
    ///
    /// Builds the full average tree; for repeated queries build [`Averages`]
    /// once instead.
    pub fn average(&self, node: NodeId) -> Result<T> {
        self.spec.validate(node)?;
        Ok(Averages::new(self).at(node))
    }

    pub fn mean(&self) -> T {
        Averages::new(self).at(NodeId::ROOT)
    }

    /// `L^2` distance from the mean: `(sum_L |L| (f_L - <f>)^2)^(1/2)`.
    pub fn centered_l2_norm(&self) -> T {
        let mean = self.mean();
        let terms: Vec<T> = self.values.iter().map(|&v| (v - mean) * (v - mean)).collect();
        let leaf = real::<T>(2.0).powi(-(self.spec.depth() as i32));
        (leaf * pairwise_sum(&terms)).sqrt()
    }

    /// Coefficient against the Haar function of an internal `node`.
    pub fn haar_coefficient(&self, node: NodeId) -> Result<T> {
        self.spec.validate(node)?;
        if node.generation >= self.spec.depth() {
            return Err(Error::LeafNode(node));
        }
        let avg = Averages::new(self);
        let half = self.spec.measure::<T>(node)?.sqrt() * real(0.5);
        Ok(half * -avg.increment(node)?)
    }

    /// All Haar coefficients plus the global mean.
    pub fn expand(&self) -> HaarCoefficients<T> {
        let depth = self.spec.depth();
        let avg = Averages::new(self);
        let mut coeffs = Vec::with_capacity(internal_count(depth));
        for k in 0..depth {
            let half = real::<T>(2.0).powi(-(k as i32)).sqrt() * real(0.5);
            for i in 0..(1u64 << k) {
                coeffs.push(half * -avg.increment_at(k, i as usize));
            }
        }
        HaarCoefficients { spec: self.spec, mean: avg.at(NodeId::ROOT), coeffs }
    }

    /// Dyadic BMO norm. Zero exactly for constants.
    pub fn bmo_norm(&self) -> T {
        let depth = self.spec.depth();
        if depth == 0 {
            return T::zero();
        }
        let avg = Averages::new(self);
        // w[i] holds W at generation k+1 while processing generation k.
        let mut w = vec![T::zero(); self.values.len()];
        let mut best = T::zero();
        for k in (0..depth).rev() {
            let size = 1usize << k;
            let meas = real::<T>(2.0).powi(-(k as i32));
            let inv_meas = real::<T>(2.0).powi(k as i32);
            let mut next = Vec::with_capacity(size);
            for i in 0..size {
                let d = avg.increment_at(k, i);
                // Children first: W_J >= W_left + W_right survives rounding.
                let c = w[2 * i] + w[2 * i + 1];
                let wj = d * d * meas + c;
                best = best.max(wj * inv_meas);
                next.push(wj);
            }
            w = next;
        }
        best.sqrt()
    }

    /// Square-function norm. At most `2 * centered_l2_norm()`.
    pub fn tl_norm(&self) -> T {
        let depth = self.spec.depth();
        let avg = Averages::new(self);
        let mut path = vec![T::zero()];
        for k in 0..depth {
            let mut next = Vec::with_capacity(path.len() * 2);
            for (i, &p) in path.iter().enumerate() {
                let d = avg.increment_at(k, i);
                let q = p + d * d;
                next.push(q);
                next.push(q);
            }
            path = next;
        }
        let terms: Vec<T> = path.iter().map(|&p| p.sqrt()).collect();
        let leaf = real::<T>(2.0).powi(-(depth as i32));
        leaf * pairwise_sum(&terms)
    }
}

/// Averages of one step function over every node, generation by generation.
#[derive(Clone, Debug)]
pub struct Averages<T: Scalar> {
    levels: Vec<Vec<T>>,
}

impl<T: Scalar> Averages<T> {
    pub fn new(f: &StepFunction<T>) -> Self {
        let depth = f.spec.depth();
        let mut levels = vec![Vec::new(); depth as usize + 1];
        levels[depth as usize] = f.values.clone();
        for k in (0..depth).rev() {
            let finer = &levels[k as usize + 1];
            let mut level = Vec::with_capacity(finer.len() / 2);
            for i in 0..finer.len() / 2 {
                level.push((finer[2 * i] + finer[2 * i + 1]) * real(0.5));
            }
            levels[k as usize] = level;
        }
        Averages { levels }
    }

    /// Average over `node`; callers pass nodes already validated against the
    /// function's lattice.
    pub fn at(&self, node: NodeId) -> T {
        self.levels[node.generation as usize][node.index as usize]
    }

    /// Average increment `<f>_right - <f>_left` of an internal node.
    pub fn increment(&self, node: NodeId) -> Result<T> {
        if node.generation as usize + 1 >= self.levels.len() {
            return Err(Error::LeafNode(node));
        }
        Ok(self.increment_at(node.generation, node.index as usize))
    }

    #[inline]
    pub(crate) fn increment_at(&self, k: u32, i: usize) -> T {
        let finer = &self.levels[k as usize + 1];
        finer[2 * i + 1] - finer[2 * i]
    }
}

fn internal_count(depth: u32) -> usize {
    (1usize << depth) - 1
}

/// Offset of internal node `(k, i)` in generation-major coefficient order.
#[inline]
pub fn internal_index(k: u32, i: u64) -> usize {
    (1usize << k) - 1 + i as usize
}

/// Haar coefficients of a step function: the global mean plus one
/// coefficient per internal node, in generation-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarCoefficients<T: Scalar> {
    spec: LatticeSpec,
    mean: T,
    coeffs: Vec<T>,
}

impl<T: Scalar> HaarCoefficients<T> {
    pub fn new(spec: LatticeSpec, mean: T, coeffs: Vec<T>) -> Result<Self> {
        if spec.dim() != 1 {
            return Err(Error::InvalidLattice("coefficients require dim 1".into()));
        }
        if coeffs.len() != internal_count(spec.depth()) {
            return Err(Error::InvalidLattice(format!(
                "expected {} coefficients for depth {}, got {}",
                internal_count(spec.depth()),
                spec.depth(),
                coeffs.len()
            )));
        }
        if !mean.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("coefficient".into()));
        }
        Ok(HaarCoefficients { spec, mean, coeffs })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coefficient(&self, node: NodeId) -> Result<T> {
        self.spec.validate(node)?;
        if node.generation >= self.spec.depth() {
            return Err(Error::LeafNode(node));
        }
        Ok(self.coeffs[internal_index(node.generation, node.index)])
    }

    /// Rebuild the step function: mean plus the coefficient expansion.
    pub fn reconstruct(&self) -> StepFunction<T> {
        let depth = self.spec.depth();
        let mut values = vec![self.mean];
        for k in 0..depth {
            let amp = real::<T>(2.0).powi(k as i32).sqrt();
            let mut next = Vec::with_capacity(values.len() * 2);
            for (i, &v) in values.iter().enumerate() {
                let step = self.coeffs[internal_index(k, i as u64)] * amp;
                next.push(v + step);
                next.push(v - step);
            }
            values = next;
        }
        StepFunction { spec: self.spec, values }
    }
}

/// Step function supported on `node`, bounded by `1/|node|`, with mean zero.
///
/// `profile` lists the leaf values inside `node`; its length fixes the
/// lattice depth, `node.generation + log2(profile.len())`. The bound and the
/// mean are validated with slack `ATOM_TOL`.
pub fn make_atom<T: Scalar>(node: NodeId, profile: &[T]) -> Result<StepFunction<T>> {
    if profile.is_empty() || !profile.len().is_power_of_two() {
        return Err(Error::InvalidAtom(format!(
            "profile length {} must be a nonzero power of two",
            profile.len()
        )));
    }
    let extra = profile.len().trailing_zeros();
    let depth = node.generation + extra;
    let spec = LatticeSpec::new(1, depth)?;
    spec.validate(node)?;

    if let Some(v) = profile.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidAtom(format!("non-finite profile value {v}")));
    }
    let bound = real::<T>(2.0).powi(node.generation as i32);
    let tol = real::<T>(ATOM_TOL);
    if let Some(v) = profile.iter().find(|v| v.abs() > bound * (T::one() + tol)) {
        return Err(Error::InvalidAtom(format!(
            "value {v} exceeds the bound 1/|I| = {}",
            to_f64(bound)
        )));
    }
    let leaf = real::<T>(2.0).powi(-(depth as i32));
    let mass: T = leaf * pairwise_sum(profile);
    let abs_terms: Vec<T> = profile.iter().map(|v| v.abs()).collect();
    let abs_mass = leaf * pairwise_sum(&abs_terms);
    if mass.abs() > tol * T::one().max(abs_mass) {
        return Err(Error::InvalidAtom(format!(
            "mean {} is not zero within tolerance",
            to_f64(mass)
        )));
    }

    let mut values = vec![T::zero(); spec.leaf_count() as usize];
    let start = spec.leaf_range(node)?.start as usize;
    values[start..start + profile.len()].copy_from_slice(profile);
    StepFunction::new(spec, values)
}
