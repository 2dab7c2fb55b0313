//! Slow reference implementations, straight from the definitions.
//!
//! Everything here walks leaves explicitly and accumulates left to right,
//! sharing no recurrences with the fast paths: averages are plain sums,
//! oscillation is measured in `L^2` rather than through increment trees, and
//! coefficients integrate against the explicit wavelet profile. The point is
//! independence, not speed; costs are quadratic in the leaf count and worse,
//! so keep depths modest. Tests and certification use these as oracles.

use crate::error::Result;
use crate::haar::StepFunction;
use crate::lattice::NodeId;
use crate::scalar::{real, Scalar};

/// Mean of `f` over `node`, as a flat sum over the leaves below it.
pub fn naive_average<T: Scalar>(f: &StepFunction<T>, node: NodeId) -> Result<T> {
    let range = f.spec().leaf_range(node)?;
    let count = real::<T>((range.end - range.start) as f64);
    let mut sum = T::zero();
    for i in range {
        sum = sum + f.values()[i as usize];
    }
    Ok(sum / count)
}

fn naive_increment<T: Scalar>(f: &StepFunction<T>, node: NodeId) -> Result<T> {
    let kids = f.spec().children(node)?;
    Ok(naive_average(f, kids[1])? - naive_average(f, kids[0])?)
}

/// `(f, h_J)` by integrating against the explicit profile of `h_J`:
/// `+1/sqrt(|J|)` on the left half, `-1/sqrt(|J|)` on the right.
pub fn naive_haar_coefficient<T: Scalar>(f: &StepFunction<T>, node: NodeId) -> Result<T> {
    let spec = f.spec();
    let kids = spec.children(node)?;
    let amp = T::one() / spec.measure::<T>(node)?.sqrt();
    let leaf_meas = real::<T>(2.0).powi(-(spec.depth() as i32));
    let mut sum = T::zero();
    for (sign, child) in [(T::one(), kids[0]), (-T::one(), kids[1])] {
        for i in spec.leaf_range(child)? {
            sum = sum + sign * amp * f.values()[i as usize] * leaf_meas;
        }
    }
    Ok(sum)
}

/// Oscillation norm as a supremum of normalized `L^2` deviations:
/// `sup_J 2 * sqrt( (1/|J|) * sum_{leaves in J} (f - mean_J)^2 |leaf| )`.
///
/// The factor 2 converts the deviation into the increment-tree energy the
/// fast path accumulates (each wavelet term enters that energy as
/// `D_I^2 |I| = 4 (f, h_I)^2`).
pub fn naive_bmo_norm<T: Scalar>(f: &StepFunction<T>) -> Result<T> {
    let spec = f.spec();
    let leaf_meas = real::<T>(2.0).powi(-(spec.depth() as i32));
    let mut best = T::zero();
    for k in 0..=spec.depth() {
        for node in spec.nodes_at_generation(k)? {
            let mean = naive_average(f, node)?;
            let mut osc = T::zero();
            for i in spec.leaf_range(node)? {
                let d = f.values()[i as usize] - mean;
                osc = osc + d * d * leaf_meas;
            }
            let local = real::<T>(2.0) * (osc / spec.measure::<T>(node)?).sqrt();
            best = best.max(local);
        }
    }
    Ok(best)
}

/// Square-function norm by walking each leaf's ancestor chain:
/// `sum_leaves |leaf| * sqrt( sum_{J containing the leaf} D_J(f)^2 )`.
pub fn naive_tl_norm<T: Scalar>(f: &StepFunction<T>) -> Result<T> {
    let spec = f.spec();
    let depth = spec.depth();
    let leaf_meas = real::<T>(2.0).powi(-(depth as i32));
    let mut total = T::zero();
    for leaf in spec.nodes_at_generation(depth)? {
        let mut energy = T::zero();
        let mut cursor = leaf;
        while let Some(parent) = spec.parent(cursor)? {
            let d = naive_increment(f, parent)?;
            energy = energy + d * d;
            cursor = parent;
        }
        total = total + leaf_meas * energy.sqrt();
    }
    Ok(total)
}

/// `sum_J |(f, h_J)| * |(phi, h_J)|` with both coefficients integrated
/// naively.
pub fn naive_duality_sum<T: Scalar>(
    f: &StepFunction<T>,
    phi: &StepFunction<T>,
) -> Result<T> {
    let spec = f.spec();
    let mut sum = T::zero();
    for k in 0..spec.depth() {
        for node in spec.nodes_at_generation(k)? {
            let a = naive_haar_coefficient(f, node)?;
            let b = naive_haar_coefficient(phi, node)?;
            sum = sum + (a * b).abs();
        }
    }
    Ok(sum)
}

pub fn naive_s<T: Scalar>(f: &StepFunction<T>, node: NodeId) -> Result<T> {
    // Sum of squared increments over the strict ancestors of `node`.
    let spec = f.spec();
    let mut total = T::zero();
    let mut cursor = node;
    while let Some(parent) = spec.parent(cursor)? {
        let d = naive_increment(f, parent)?;
        total = total + d * d;
        cursor = parent;
    }
    Ok(total)
}

pub fn naive_m<T: Scalar>(phi: &StepFunction<T>, node: NodeId) -> Result<T> {
    // (1/|J|) * sum over internal I inside J of D_I(phi)^2 |I|.
    let spec = phi.spec();
    let mut total = T::zero();
    let mut stack = vec![node];
    while let Some(cur) = stack.pop() {
        if cur.generation == spec.depth() {
            continue;
        }
        let d = naive_increment(phi, cur)?;
        total = total + d * d * spec.measure::<T>(cur)?;
        stack.extend(spec.children(cur)?);
    }
    Ok(total / spec.measure::<T>(node)?)
}

/// Both sides of the truncated summation bound at level `n`, evaluated from
/// the definitions (increments of `f`, subtree energies of `phi`, cap taken
/// as the maximum of the naive `M`).
pub fn naive_key_lemma_sides<T: Scalar>(
    f: &StepFunction<T>,
    phi: &StepFunction<T>,
    n: u32,
) -> Result<(T, T)> {
    let spec = f.spec();
    let mut mbar = T::zero();
    for k in 0..=spec.depth() {
        for node in spec.nodes_at_generation(k)? {
            mbar = mbar.max(naive_m(phi, node)?);
        }
    }
    let sqrt_2mbar = (real::<T>(2.0) * mbar).sqrt();

    let mut lhs = T::zero();
    for k in 0..n {
        for node in spec.nodes_at_generation(k)? {
            let df = naive_increment(f, node)?;
            let kids = spec.children(node)?;
            let m_mean = (naive_m(phi, kids[0])? + naive_m(phi, kids[1])?) / real::<T>(2.0);
            let dm = (naive_m(phi, node)? - m_mean).max(T::zero());
            lhs = lhs + spec.measure::<T>(node)? * (df * df * dm).sqrt();
        }
    }

    let mut rhs_sum = T::zero();
    for node in spec.nodes_at_generation(n)? {
        rhs_sum = rhs_sum + naive_s(f, node)?.sqrt();
    }
    let rhs = sqrt_2mbar * real::<T>(2.0).powi(-(n as i32)) * rhs_sum;
    Ok((lhs, rhs))
}
