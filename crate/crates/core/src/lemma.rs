//! Induction over scales: admissible node functionals, the per-node chain
//! inequality, and the truncated summation bound.
//!
//! An admissible pair attaches two numbers `(S_J, M_J)` to every node:
//!
//! * `S` is constant across siblings and non-decreasing from parent to
//!   child (for a derived pair, `S_child = S_J + D_J(f)^2` with `S_root = 0`);
//! * `M` lies in `[0, mbar]` and dominates the mean of its children (for a
//!   derived pair, `M_J = (1/|J|) * sum_{I inside J} D_I(phi)^2 |I|`).
//!
//! Derived pairs are evaluated so that both properties hold exactly in
//! floating point, not merely up to rounding: `S_child` stores one value per
//! sibling set, and the `M` recurrence adds the children's contribution
//! before the local increment, which keeps `W_J >= W_left + W_right` under
//! round-to-nearest. External pairs are validated with a tolerance instead.
//!
//! For a conforming candidate `B` and any admissible pair, every internal
//! node obeys the chain inequality
//!
//! ```text
//! mean_v B(S_v, M_v) >= B(S_J, M_J)
//!                     + sqrt(2 * mbar) * sqrt((S_child - S_J) * (M_J - mean_v M_v))
//! ```
//!
//! whose margin is non-negative. Multiplying by `|J|` and telescoping over
//! generations `0..n` gives the summation bound
//!
//! ```text
//! sum_{k < n} sum_{J in gen k} |J| * sqrt((S_child - S_J)(M_J - mean M_v))
//!     <= sqrt(2 * mbar) * a^-n * sum_{J in gen n} sqrt(S_J)
//! ```
//!
//! with `a = 2^dim`. [`verify_key_lemma`] evaluates every node margin, every
//! truncation level, and the telescoping identity that ties them together,
//! and returns the full trace.

use serde::{Deserialize, Serialize};

use crate::bellman::BellmanCandidate;
use crate::error::{Error, Result};
use crate::haar::{Averages, StepFunction};
use crate::lattice::{LatticeSpec, NodeId};
use crate::report::{CheckRecord, Location, VerificationReport};
use crate::scalar::{pairwise_sum, real, Scalar};
use crate::tolerances::{CROSS_CHECK_REL_TOL, TELESCOPE_REL_TOL};

/// One scalar per lattice node, stored as flat per-generation rows.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFunctional<T: Scalar> {
    spec: LatticeSpec,
    values: Vec<Vec<T>>,
}

impl<T: Scalar> NodeFunctional<T> {
    /// `values[k][i]` belongs to node `(k, i)`; row `k` must hold exactly
    /// `arity^k` finite entries for every generation `0..=depth`.
    pub fn new(spec: LatticeSpec, values: Vec<Vec<T>>) -> Result<Self> {
        if values.len() != spec.depth() as usize + 1 {
            return Err(Error::InvalidLattice(format!(
                "expected {} generation rows, got {}",
                spec.depth() + 1,
                values.len()
            )));
        }
        for (k, row) in values.iter().enumerate() {
            let want = spec.generation_size(k as u32)? as usize;
            if row.len() != want {
                return Err(Error::InvalidLattice(format!(
                    "generation {k} needs {want} values, got {}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("value {v} at generation {k}")));
            }
        }
        Ok(NodeFunctional { spec, values })
    }

    pub fn constant(spec: LatticeSpec, value: T) -> Result<Self> {
        let values = (0..=spec.depth())
            .map(|k| vec![value; spec.generation_size(k).unwrap() as usize])
            .collect();
        NodeFunctional::new(spec, values)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn get(&self, node: NodeId) -> Result<T> {
        self.spec.validate(node)?;
        Ok(self.values[node.generation as usize][node.index as usize])
    }

    pub fn set(&mut self, node: NodeId, value: T) -> Result<()> {
        self.spec.validate(node)?;
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("value {value} at node {node}")));
        }
        self.values[node.generation as usize][node.index as usize] = value;
        Ok(())
    }

    pub fn generation(&self, k: u32) -> Result<&[T]> {
        if k > self.spec.depth() {
            return Err(Error::GenerationOutOfRange { generation: k, depth: self.spec.depth() });
        }
        Ok(&self.values[k as usize])
    }

    pub fn per_generation(&self) -> &[Vec<T>] {
        &self.values
    }

    fn max_value(&self) -> T {
        self.values
            .iter()
            .flatten()
            .fold(T::neg_infinity(), |acc, &v| acc.max(v))
    }
}

/// Validated `(S, M)` functionals sharing one lattice, with their cap `mbar`.
#[derive(Clone, Debug)]
pub struct AdmissiblePair<T: Scalar> {
    s: NodeFunctional<T>,
    m: NodeFunctional<T>,
    mbar: T,
}

impl<T: Scalar> AdmissiblePair<T> {
    /// Wrap external functionals, validating admissibility with slack `tol`.
    /// `mbar` defaults to the maximum of `M` and may only be overridden
    /// upward; a smaller cap fails the `m_bounds` check.
    pub fn new(
        s: NodeFunctional<T>,
        m: NodeFunctional<T>,
        mbar: Option<T>,
        tol: T,
    ) -> Result<Self> {
        let mbar = mbar.unwrap_or_else(|| m.max_value().max(T::zero()));
        let report = check_admissibility(&s, &m, mbar, tol)?;
        if let Some(bad) = report.first_violation() {
            return Err(Error::Inadmissible(describe_violation(bad)));
        }
        Ok(AdmissiblePair { s, m, mbar })
    }

    /// Derived pair of a function couple; admissible exactly by construction.
    pub fn from_functions(f: &StepFunction<T>, phi: &StepFunction<T>) -> Result<Self> {
        build_pair(f, phi)
    }

    pub fn spec(&self) -> &LatticeSpec {
        self.s.spec()
    }

    pub fn s(&self) -> &NodeFunctional<T> {
        &self.s
    }

    pub fn m(&self) -> &NodeFunctional<T> {
        &self.m
    }

    pub fn mbar(&self) -> T {
        self.mbar
    }
}

/// Derived pair: `S` accumulates squared increments of `f` down the tree,
/// `M` averages squared increments of `phi` over subtrees, `mbar = max M`.
pub fn build_pair<T: Scalar>(
    f: &StepFunction<T>,
    phi: &StepFunction<T>,
) -> Result<AdmissiblePair<T>> {
    if f.spec() != phi.spec() {
        return Err(Error::LatticeMismatch(format!(
            "f has depth {}, phi has depth {}",
            f.spec().depth(),
            phi.spec().depth()
        )));
    }
    let spec = *f.spec();
    let depth = spec.depth();
    let af = Averages::new(f);
    let ap = Averages::new(phi);

    let mut s_rows: Vec<Vec<T>> = Vec::with_capacity(depth as usize + 1);
    s_rows.push(vec![T::zero()]);
    for k in 0..depth {
        let cur = &s_rows[k as usize];
        let mut next = Vec::with_capacity(cur.len() * 2);
        for (i, &sv) in cur.iter().enumerate() {
            let d = af.increment_at(k, i);
            // One value per sibling set: equality across siblings is exact.
            let child = sv + d * d;
            next.push(child);
            next.push(child);
        }
        s_rows.push(next);
    }

    let mut m_rows: Vec<Vec<T>> = vec![Vec::new(); depth as usize + 1];
    m_rows[depth as usize] = vec![T::zero(); spec.leaf_count() as usize];
    let mut w = vec![T::zero(); spec.leaf_count() as usize];
    for k in (0..depth).rev() {
        let size = 1usize << k;
        let meas = real::<T>(2.0).powi(-(k as i32));
        let inv_meas = real::<T>(2.0).powi(k as i32);
        let mut w_next = Vec::with_capacity(size);
        let mut row = Vec::with_capacity(size);
        for i in 0..size {
            let d = ap.increment_at(k, i);
            // Children first: rounding keeps W_J >= W_left + W_right, hence
            // M_J >= mean of the children's M exactly.
            let c = w[2 * i] + w[2 * i + 1];
            let wj = d * d * meas + c;
            w_next.push(wj);
            row.push(wj * inv_meas);
        }
        m_rows[k as usize] = row;
        w = w_next;
    }

    let s = NodeFunctional::new(spec, s_rows)?;
    let m = NodeFunctional::new(spec, m_rows)?;
    let mbar = m.max_value().max(T::zero());
    debug_assert!(
        check_admissibility(&s, &m, mbar, T::zero())
            .map(|r| r.passed)
            .unwrap_or(false),
        "derived pairs are admissible by construction"
    );
    Ok(AdmissiblePair { s, m, mbar })
}

/// Margin tracker for one admissibility property. Margins are scaled by
/// `max(1, local magnitude)`, so the pass rule is `worst >= -tol`.
struct AdmCheck<T: Scalar> {
    name: &'static str,
    worst: T,
    worst_node: NodeId,
    violations: usize,
    first_bad: Option<NodeId>,
    observed: bool,
}

impl<T: Scalar> AdmCheck<T> {
    fn new(name: &'static str) -> Self {
        AdmCheck {
            name,
            worst: T::infinity(),
            worst_node: NodeId::ROOT,
            violations: 0,
            first_bad: None,
            observed: false,
        }
    }

    fn observe(&mut self, node: NodeId, scaled_margin: T, tol: T) {
        self.observed = true;
        if scaled_margin < self.worst {
            self.worst = scaled_margin;
            self.worst_node = node;
        }
        if scaled_margin < -tol {
            self.violations += 1;
            self.first_bad.get_or_insert(node);
        }
    }

    fn into_record(self, tol: T) -> CheckRecord<T> {
        let worst = if self.observed { self.worst } else { T::zero() };
        CheckRecord {
            name: self.name.to_string(),
            passed: worst >= -tol,
            worst_margin: worst,
            location: Location::Node(self.worst_node),
            violations: self.violations,
            detail: self.first_bad.map(|n| format!("first violation at node {n}")),
        }
    }
}

fn describe_violation<T: Scalar>(record: &CheckRecord<T>) -> String {
    let site = match record.location {
        Location::Node(node) => format!(" at node {node}"),
        _ => String::new(),
    };
    format!(
        "{} fails{site} with scaled margin {}{}",
        record.name,
        record.worst_margin,
        record
            .detail
            .as_deref()
            .map(|d| format!(" ({d})"))
            .unwrap_or_default()
    )
}

/// Validate the admissibility of `(s, m)` under the cap `mbar`.
///
/// Five checks, each reporting its worst scaled margin, worst node, and
/// violation count: `s_nonnegative`, `s_children_equal`, `s_monotone`,
/// `m_super_mean`, and `m_bounds`. Structural mismatches are errors; every
/// mathematical violation lands in the report instead.
pub fn check_admissibility<T: Scalar>(
    s: &NodeFunctional<T>,
    m: &NodeFunctional<T>,
    mbar: T,
    tol: T,
) -> Result<VerificationReport<T>> {
    if s.spec() != m.spec() {
        return Err(Error::LatticeMismatch(
            "S and M must share one lattice".into(),
        ));
    }
    if !mbar.is_finite() || mbar < T::zero() {
        return Err(Error::Domain(format!("mbar must be finite and >= 0, got {mbar}")));
    }
    let spec = *s.spec();
    let arity = spec.arity() as usize;
    let one = T::one();

    let mut nonneg = AdmCheck::new("s_nonnegative");
    let mut equal = AdmCheck::new("s_children_equal");
    let mut mono = AdmCheck::new("s_monotone");
    let mut mean = AdmCheck::new("m_super_mean");
    let mut bounds = AdmCheck::new("m_bounds");

    for k in 0..=spec.depth() {
        let s_row = s.generation(k)?;
        let m_row = m.generation(k)?;
        for i in 0..s_row.len() {
            let node = NodeId::new(k, i as u64);
            let sv = s_row[i];
            nonneg.observe(node, sv / one.max(sv.abs()), tol);
            let mv = m_row[i];
            let bound_margin = mv.min(mbar - mv);
            bounds.observe(node, bound_margin / one.max(mbar), tol);
        }
    }

    for k in 0..spec.depth() {
        let s_row = s.generation(k)?;
        let m_row = m.generation(k)?;
        let s_next = s.generation(k + 1)?;
        let m_next = m.generation(k + 1)?;
        for i in 0..s_row.len() {
            let parent = NodeId::new(k, i as u64);
            let s_parent = s_row[i];
            let s_kids = &s_next[i * arity..(i + 1) * arity];
            let first = s_kids[0];
            for (v, &sv) in s_kids.iter().enumerate() {
                let child = NodeId::new(k + 1, (i * arity + v) as u64);
                equal.observe(child, -(sv - first).abs() / one.max(first.abs()), tol);
                let inc = sv - s_parent;
                mono.observe(parent, inc / one.max(s_parent.abs()).max(sv.abs()), tol);
            }
            let m_parent = m_row[i];
            let m_kids = &m_next[i * arity..(i + 1) * arity];
            let kid_mean = pairwise_sum(m_kids) / real(arity as f64);
            mean.observe(parent, (m_parent - kid_mean) / one.max(mbar), tol);
        }
    }

    let mut report = VerificationReport::new(tol);
    for check in [nonneg, equal, mono, mean, bounds] {
        report.push(check.into_record(tol));
    }
    Ok(report)
}

struct ChainTerms<T: Scalar> {
    children_mean_b: T,
    sqrt_term: T,
    parent_b: T,
    degenerate: bool,
}

fn chain_terms<T: Scalar>(
    b: &BellmanCandidate<T>,
    pair: &AdmissiblePair<T>,
    node: NodeId,
) -> Result<ChainTerms<T>> {
    let spec = pair.spec();
    let children = spec.children(node)?;
    let s_j = pair.s().get(node)?;
    let m_j = pair.m().get(node)?;
    let s_child = pair.s().get(children[0])?;

    let mut b_vals = Vec::with_capacity(children.len());
    let mut m_vals = Vec::with_capacity(children.len());
    for &c in &children {
        let sv = pair.s().get(c)?;
        let mv = pair.m().get(c)?;
        let bv = b.value(sv, mv)?;
        if !bv.is_finite() {
            return Err(Error::NonFinite(format!("B({sv}, {mv}) at node {c}")));
        }
        b_vals.push(bv);
        m_vals.push(mv);
    }
    let inv_arity = real::<T>(1.0) / real::<T>(spec.arity() as f64);
    let children_mean_b = pairwise_sum(&b_vals) * inv_arity;
    let m_mean = pairwise_sum(&m_vals) * inv_arity;

    // Admissibility makes both factors non-negative up to the caller's
    // tolerance; clamping keeps hairline negatives out of the square root.
    let ds = (s_child - s_j).max(T::zero());
    let dm = (m_j - m_mean).max(T::zero());
    let sqrt_term = (ds * dm).sqrt();
    let parent_b = b.value(s_j, m_j)?;
    Ok(ChainTerms {
        children_mean_b,
        sqrt_term,
        parent_b,
        degenerate: s_j == T::zero() && s_child == T::zero(),
    })
}

fn chain_margin<T: Scalar>(terms: &ChainTerms<T>, sqrt_2mbar: T) -> (T, T) {
    if terms.degenerate {
        // B(0, y) = 0 on the whole stencil: the inequality is 0 >= 0.
        return (T::zero(), T::one());
    }
    let rhs = sqrt_2mbar * terms.sqrt_term + terms.parent_b;
    let margin = terms.children_mean_b - rhs;
    let scale = T::one().max(terms.children_mean_b.abs()).max(rhs.abs());
    (margin, scale)
}

/// Margin of the chain inequality at one internal node (non-negative for a
/// conforming candidate, up to rounding in the evaluation).
pub fn verify_node_inequality<T: Scalar>(
    b: &BellmanCandidate<T>,
    pair: &AdmissiblePair<T>,
    node: NodeId,
) -> Result<T> {
    require_cap(b, pair)?;
    let sqrt_2mbar = (real::<T>(2.0) * pair.mbar()).sqrt();
    let terms = chain_terms(b, pair, node)?;
    Ok(chain_margin(&terms, sqrt_2mbar).0)
}

fn require_cap<T: Scalar>(b: &BellmanCandidate<T>, pair: &AdmissiblePair<T>) -> Result<()> {
    if b.mbar() < pair.mbar() {
        return Err(Error::Domain(format!(
            "candidate cap {} is below the pair's mbar {}",
            b.mbar(),
            pair.mbar()
        )));
    }
    Ok(())
}

/// Both sides of one truncation level of the summation bound.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LevelSides<T: Scalar> {
    pub level: u32,
    pub lhs: T,
    pub rhs: T,
    pub passed: bool,
}

/// Full evidence from one induction run. `node_margins[k][i]` is the raw
/// chain margin at node `(k, i)`; the scaled twin divides by
/// `max(1, local magnitude)`. The minimum is taken over scaled margins,
/// ties resolved toward the first node in generation-major order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InductionTrace<T: Scalar> {
    pub depth_n: u32,
    pub mbar: T,
    /// Weighted increment sums per generation: entry `k-1` holds
    /// `sqrt(2 * mbar) * sum_{J in gen k-1} sqrt((S_child - S_J)(M_J - mean M))`.
    pub generation_sums: Vec<T>,
    pub node_margins: Vec<Vec<T>>,
    pub node_margins_scaled: Vec<Vec<T>>,
    pub min_margin: T,
    pub min_scaled_margin: T,
    pub min_margin_node: NodeId,
    pub lhs: T,
    pub rhs: T,
    pub truncations: Vec<LevelSides<T>>,
    /// `a^-n sum_{gen n} B - B(root)`: what the chain gained end to end.
    pub telescope_lhs: T,
    /// `sqrt(2 * mbar)` times the summed increments.
    pub telescope_rhs: T,
    /// Measure-weighted sum of every node margin.
    pub margin_total: T,
    /// `telescope_lhs - telescope_rhs - margin_total`; zero in exact
    /// arithmetic whatever the candidate.
    pub telescope_gap: T,
    pub nodes_passed: bool,
    pub truncations_passed: bool,
    pub telescope_passed: bool,
    pub passed: bool,
    pub tol: T,
}

/// Run the induction down to generation `depth_n`, checking every node
/// margin, every truncation level, and the telescoping identity.
///
/// The candidate's cap must dominate the pair's `mbar` (the chain constant
/// always uses the pair's). The pair is re-validated with `tol` first, so a
/// corrupted pair surfaces as [`Error::Inadmissible`] rather than as a
/// mysterious margin failure.
pub fn verify_key_lemma<T: Scalar>(
    b: &BellmanCandidate<T>,
    pair: &AdmissiblePair<T>,
    depth_n: u32,
    tol: T,
) -> Result<InductionTrace<T>> {
    let spec = *pair.spec();
    if depth_n == 0 || depth_n > spec.depth() {
        return Err(Error::Domain(format!(
            "truncation level {depth_n} must lie in 1..={}",
            spec.depth()
        )));
    }
    require_cap(b, pair)?;
    let adm = check_admissibility(pair.s(), pair.m(), pair.mbar(), tol)?;
    if let Some(bad) = adm.first_violation() {
        return Err(Error::Inadmissible(describe_violation(bad)));
    }

    let mbar = pair.mbar();
    let sqrt_2mbar = (real::<T>(2.0) * mbar).sqrt();
    let dim = spec.dim() as i32;
    let one = T::one();

    let root_b = b.value(pair.s().get(NodeId::ROOT)?, pair.m().get(NodeId::ROOT)?)?;

    let mut generation_sums = Vec::with_capacity(depth_n as usize);
    let mut node_margins = Vec::with_capacity(depth_n as usize);
    let mut node_margins_scaled = Vec::with_capacity(depth_n as usize);
    let mut truncations = Vec::with_capacity(depth_n as usize);
    let mut min_margin = T::infinity();
    let mut min_scaled_margin = T::infinity();
    let mut min_margin_node = NodeId::ROOT;
    let mut lhs = T::zero();
    let mut margin_total = T::zero();

    for k in 0..depth_n {
        let meas = real::<T>(2.0).powi(-(dim * k as i32));
        let size = spec.generation_size(k)? as usize;
        let mut terms = Vec::with_capacity(size);
        let mut margins = Vec::with_capacity(size);
        let mut scaled = Vec::with_capacity(size);
        for i in 0..size {
            let node = NodeId::new(k, i as u64);
            let ct = chain_terms(b, pair, node)?;
            let (margin, scale) = chain_margin(&ct, sqrt_2mbar);
            let sm = margin / scale;
            if sm < min_scaled_margin {
                min_scaled_margin = sm;
                min_margin = margin;
                min_margin_node = node;
            }
            terms.push(ct.sqrt_term);
            margins.push(margin);
            scaled.push(sm);
        }
        let t_k = pairwise_sum(&terms);
        generation_sums.push(sqrt_2mbar * t_k);
        lhs = lhs + meas * t_k;
        margin_total = margin_total + meas * pairwise_sum(&margins);
        node_margins.push(margins);
        node_margins_scaled.push(scaled);

        let level = k + 1;
        let level_meas = real::<T>(2.0).powi(-(dim * level as i32));
        let sqrt_s: Vec<T> = pair
            .s()
            .generation(level)?
            .iter()
            .map(|&v| v.max(T::zero()).sqrt())
            .collect();
        let rhs_level = sqrt_2mbar * level_meas * pairwise_sum(&sqrt_s);
        let passed = lhs <= rhs_level + tol * one.max(rhs_level);
        truncations.push(LevelSides { level, lhs, rhs: rhs_level, passed });
    }

    let final_meas = real::<T>(2.0).powi(-(dim * depth_n as i32));
    let mut b_final = Vec::with_capacity(spec.generation_size(depth_n)? as usize);
    {
        let s_row = pair.s().generation(depth_n)?;
        let m_row = pair.m().generation(depth_n)?;
        for i in 0..s_row.len() {
            b_final.push(b.value(s_row[i], m_row[i])?);
        }
    }
    let telescope_lhs = final_meas * pairwise_sum(&b_final) - root_b;
    let telescope_rhs = sqrt_2mbar * lhs;
    let telescope_gap = telescope_lhs - telescope_rhs - margin_total;
    let telescope_scale = one
        .max(telescope_lhs.abs())
        .max(telescope_rhs.abs())
        .max(margin_total.abs());
    let telescope_passed = telescope_gap.abs() <= real::<T>(TELESCOPE_REL_TOL) * telescope_scale;

    let nodes_passed = min_scaled_margin >= -tol;
    let truncations_passed = truncations.iter().all(|l| l.passed);
    let rhs = truncations.last().map(|l| l.rhs).unwrap_or_else(T::zero);
    if min_margin.is_infinite() {
        min_margin = T::zero();
        min_scaled_margin = T::zero();
    }

    Ok(InductionTrace {
        depth_n,
        mbar,
        generation_sums,
        node_margins,
        node_margins_scaled,
        min_margin,
        min_scaled_margin,
        min_margin_node,
        lhs,
        rhs,
        truncations,
        telescope_lhs,
        telescope_rhs,
        margin_total,
        telescope_gap,
        nodes_passed,
        truncations_passed,
        telescope_passed,
        passed: nodes_passed && truncations_passed && telescope_passed,
        tol,
    })
}

/// The proven cap on `duality_sum / (bmo_norm * tl_norm)`: `sqrt(2) / 4`.
pub fn duality_constant<T: Scalar>() -> T {
    real::<T>(std::f64::consts::SQRT_2) / real::<T>(4.0)
}

/// Absolute pairing sum `sum_I |(f, h_I)| * |(phi, h_I)|` over internal
/// nodes.
///
/// Evaluated two ways, as a product of Haar coefficients and as
/// `(1/4) * sum_I |I| * |D_I(f)| * |D_I(phi)|`; the routes must agree to
/// `CROSS_CHECK_REL_TOL` or the call fails, and the coefficient route is
/// returned.
pub fn duality_sum<T: Scalar>(f: &StepFunction<T>, phi: &StepFunction<T>) -> Result<T> {
    if f.spec() != phi.spec() {
        return Err(Error::LatticeMismatch(format!(
            "f has depth {}, phi has depth {}",
            f.spec().depth(),
            phi.spec().depth()
        )));
    }
    let depth = f.spec().depth();
    let cf = f.expand();
    let cp = phi.expand();
    let coeff_terms: Vec<T> = cf
        .coeffs()
        .iter()
        .zip(cp.coeffs())
        .map(|(&a, &b)| (a * b).abs())
        .collect();
    let via_coeffs = pairwise_sum(&coeff_terms);

    let af = Averages::new(f);
    let ap = Averages::new(phi);
    let quarter = real::<T>(0.25);
    let mut incr_terms = Vec::with_capacity(coeff_terms.len());
    for k in 0..depth {
        let meas = real::<T>(2.0).powi(-(k as i32));
        for i in 0..(1usize << k) {
            let term = quarter * meas * (af.increment_at(k, i) * ap.increment_at(k, i)).abs();
            incr_terms.push(term);
        }
    }
    let via_increments = pairwise_sum(&incr_terms);

    let scale = T::one().max(via_coeffs.abs()).max(via_increments.abs());
    if (via_coeffs - via_increments).abs() > real::<T>(CROSS_CHECK_REL_TOL) * scale {
        return Err(Error::CrossCheck(format!(
            "pairing routes disagree: coefficients {via_coeffs} vs increments {via_increments}"
        )));
    }
    Ok(via_coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn haar_quarter() -> StepFunction<f64> {
        StepFunction::haar(3, NodeId::new(2, 0)).unwrap()
    }

    fn random_function(depth: u32, seed: u64) -> StepFunction<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = LatticeSpec::new(1, depth).unwrap();
        let values = (0..spec.leaf_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        StepFunction::new(spec, values).unwrap()
    }

    #[test]
    fn derived_pair_worked_values() {
        let h = haar_quarter();
        let pair = build_pair(&h, &h).unwrap();
        let node = NodeId::new(2, 0);
        assert_eq!(pair.m().get(node).unwrap(), 16.0);
        assert_eq!(pair.m().get(NodeId::new(1, 0)).unwrap(), 8.0);
        assert_eq!(pair.m().get(NodeId::ROOT).unwrap(), 4.0);
        assert_eq!(pair.mbar(), 16.0);
        assert_eq!(pair.s().get(NodeId::ROOT).unwrap(), 0.0);
        assert_eq!(pair.s().get(NodeId::new(3, 0)).unwrap(), 16.0);
        assert_eq!(pair.s().get(NodeId::new(3, 1)).unwrap(), 16.0);
        assert_eq!(pair.s().get(NodeId::new(3, 4)).unwrap(), 0.0);
    }

    #[test]
    fn derived_pairs_always_validate() {
        for seed in 0..25u64 {
            let f = random_function(6, seed);
            let phi = random_function(6, seed + 1000);
            let pair = build_pair(&f, &phi).unwrap();
            let report =
                check_admissibility(pair.s(), pair.m(), pair.mbar(), 0.0).unwrap();
            assert!(report.passed, "seed {seed}: {:?}", report.first_violation());
        }
    }

    #[test]
    fn derived_pair_recurrences_match_direct_averages() {
        let f = random_function(6, 7);
        let phi = random_function(6, 8);
        let pair = build_pair(&f, &phi).unwrap();
        let af = Averages::new(&f);
        let ap = Averages::new(&phi);
        let spec = *pair.spec();
        for k in 0..spec.depth() {
            for node in spec.nodes_at_generation(k).unwrap() {
                let df = af.increment(node).unwrap();
                let dp = ap.increment(node).unwrap();
                let kids = spec.children(node).unwrap();
                let s_j = pair.s().get(node).unwrap();
                let s_c = pair.s().get(kids[0]).unwrap();
                assert_relative_eq!(s_c, s_j + df * df, max_relative = 1e-10, epsilon = 1e-12);
                let m_j = pair.m().get(node).unwrap();
                let m_mean: f64 =
                    kids.iter().map(|&c| pair.m().get(c).unwrap()).sum::<f64>() / 2.0;
                assert_relative_eq!(
                    m_j,
                    dp * dp + m_mean,
                    max_relative = 1e-10,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn scaling_functions_scales_the_pair_quadratically() {
        let f = random_function(5, 21);
        let phi = random_function(5, 22);
        let lambda = -3.0f64;
        let mu = 0.5f64;
        let f2 = StepFunction::new(*f.spec(), f.values().iter().map(|v| lambda * v).collect())
            .unwrap();
        let p2 = StepFunction::new(*phi.spec(), phi.values().iter().map(|v| mu * v).collect())
            .unwrap();
        let base = build_pair(&f, &phi).unwrap();
        let scaled = build_pair(&f2, &p2).unwrap();
        assert_relative_eq!(scaled.mbar(), mu * mu * base.mbar(), max_relative = 1e-12);
        for k in 0..=5u32 {
            for node in base.spec().nodes_at_generation(k).unwrap() {
                assert_relative_eq!(
                    scaled.s().get(node).unwrap(),
                    lambda * lambda * base.s().get(node).unwrap(),
                    max_relative = 1e-12,
                    epsilon = 1e-15
                );
                assert_relative_eq!(
                    scaled.m().get(node).unwrap(),
                    mu * mu * base.m().get(node).unwrap(),
                    max_relative = 1e-12,
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn corrupted_s_is_caught_by_validation() {
        let h = haar_quarter();
        let pair = build_pair(&h, &h).unwrap();
        let mut s = pair.s().clone();
        // Break sibling equality at one leaf.
        let node = NodeId::new(3, 1);
        s.set(node, s.get(node).unwrap() + 0.5).unwrap();
        let err = AdmissiblePair::new(s, pair.m().clone(), Some(pair.mbar()), 1e-9)
            .expect_err("perturbed pair must be rejected");
        let msg = err.to_string();
        assert!(msg.contains("s_children_equal"), "{msg}");
        assert!(msg.contains("(3,1)"), "{msg}");
    }

    #[test]
    fn mbar_override_must_dominate_m() {
        let h = haar_quarter();
        let pair = build_pair(&h, &h).unwrap();
        // Raising the cap is fine.
        assert!(AdmissiblePair::new(
            pair.s().clone(),
            pair.m().clone(),
            Some(20.0),
            1e-12
        )
        .is_ok());
        // Lowering it below max M fails m_bounds.
        let err =
            AdmissiblePair::new(pair.s().clone(), pair.m().clone(), Some(10.0), 1e-12)
                .expect_err("cap below max M");
        assert!(err.to_string().contains("m_bounds"));
    }

    #[test]
    fn induction_worked_values() {
        let h = haar_quarter();
        let pair = build_pair(&h, &h).unwrap();
        let b = BellmanCandidate::sample(pair.mbar()).unwrap();
        let trace = verify_key_lemma(&b, &pair, 3, 1e-12).unwrap();
        assert!(trace.passed);
        assert_relative_eq!(trace.lhs, 4.0, max_relative = 1e-12);
        assert_relative_eq!(trace.rhs, 32.0f64.sqrt(), max_relative = 1e-12);

        // Margins: zero wherever S vanishes on the whole stencil, one
        // strictly positive node at I itself.
        assert_eq!(trace.node_margins[0], vec![0.0]);
        assert_eq!(trace.node_margins[1], vec![0.0, 0.0]);
        let expected = 128.0 - 32.0f64.sqrt() * 16.0;
        assert_relative_eq!(trace.node_margins[2][0], expected, max_relative = 1e-12);
        assert_eq!(trace.node_margins[2][1..], [0.0, 0.0, 0.0]);

        // Telescoping identity, written out by hand for this pair.
        assert_relative_eq!(trace.telescope_lhs, 32.0, max_relative = 1e-12);
        assert_relative_eq!(
            trace.telescope_rhs,
            32.0f64.sqrt() * 4.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(trace.margin_total, expected / 4.0, max_relative = 1e-12);
        assert!(trace.telescope_gap.abs() < 1e-12);
    }

    #[test]
    fn truncation_levels_are_all_reported() {
        let f = random_function(5, 3);
        let phi = random_function(5, 4);
        let pair = build_pair(&f, &phi).unwrap();
        let b = BellmanCandidate::sample(pair.mbar()).unwrap();
        let trace = verify_key_lemma(&b, &pair, 5, 1e-12).unwrap();
        assert_eq!(trace.truncations.len(), 5);
        for (i, level) in trace.truncations.iter().enumerate() {
            assert_eq!(level.level as usize, i + 1);
            assert!(level.passed, "level {}: {} > {}", level.level, level.lhs, level.rhs);
        }
        assert!(trace.min_scaled_margin >= -1e-12);
        assert_eq!(trace.node_margins.len(), 5);
        assert_eq!(trace.generation_sums.len(), 5);
    }

    #[test]
    fn node_margin_matches_the_trace() {
        let f = random_function(4, 11);
        let phi = random_function(4, 12);
        let pair = build_pair(&f, &phi).unwrap();
        let b = BellmanCandidate::sample(pair.mbar()).unwrap();
        let trace = verify_key_lemma(&b, &pair, 4, 1e-12).unwrap();
        for k in 0..4u32 {
            for i in 0..(1u64 << k) {
                let node = NodeId::new(k, i);
                let margin = verify_node_inequality(&b, &pair, node).unwrap();
                assert_eq!(margin, trace.node_margins[k as usize][i as usize]);
            }
        }
    }

    #[test]
    fn candidate_cap_below_the_pair_is_rejected() {
        let h = haar_quarter();
        let pair = build_pair(&h, &h).unwrap();
        let small = BellmanCandidate::sample(1.0).unwrap();
        assert!(matches!(
            verify_key_lemma(&small, &pair, 3, 1e-12),
            Err(Error::Domain(_))
        ));
        assert!(verify_node_inequality(&small, &pair, NodeId::ROOT).is_err());
    }

    #[test]
    fn truncation_level_bounds_are_enforced() {
        let h = haar_quarter();
        let pair = build_pair(&h, &h).unwrap();
        let b = BellmanCandidate::sample(pair.mbar()).unwrap();
        assert!(verify_key_lemma(&b, &pair, 0, 1e-12).is_err());
        assert!(verify_key_lemma(&b, &pair, 4, 1e-12).is_err());
    }

    #[test]
    fn constant_m_at_the_cap_passes_with_equality() {
        let spec = LatticeSpec::new(1, 4).unwrap();
        let s = NodeFunctional::constant(spec, 0.0).unwrap();
        let m = NodeFunctional::constant(spec, 2.0).unwrap();
        let pair = AdmissiblePair::new(s, m, None, 0.0).unwrap();
        assert_eq!(pair.mbar(), 2.0);
        let b = BellmanCandidate::sample(2.0).unwrap();
        let trace = verify_key_lemma(&b, &pair, 4, 1e-12).unwrap();
        assert!(trace.passed);
        assert_eq!(trace.lhs, 0.0);
        assert_eq!(trace.min_margin, 0.0);
    }

    #[test]
    fn constant_positive_s_gives_zero_margins_and_slack_in_the_bound() {
        let spec = LatticeSpec::new(2, 3).unwrap();
        let s = NodeFunctional::<f64>::constant(spec, 3.0).unwrap();
        let m = NodeFunctional::constant(spec, 1.5).unwrap();
        let pair = AdmissiblePair::new(s, m, None, 0.0).unwrap();
        let b = BellmanCandidate::sample(1.5).unwrap();
        let trace = verify_key_lemma(&b, &pair, 3, 1e-12).unwrap();
        assert!(trace.passed);
        assert_eq!(trace.lhs, 0.0);
        assert!(trace.rhs > 1.0);
        assert!(trace.telescope_gap.abs() < 1e-12);
    }

    #[test]
    fn zero_phi_gives_the_empty_pair() {
        let f = random_function(3, 9);
        let zero = StepFunction::constant(3, 0.0).unwrap();
        let pair = build_pair(&f, &zero).unwrap();
        assert_eq!(pair.mbar(), 0.0);
        let report = check_admissibility(pair.s(), pair.m(), 0.0, 0.0).unwrap();
        assert!(report.passed);
        // A positive-cap candidate still dominates it, and the bound is 0 <= 0.
        let b = BellmanCandidate::sample(1.0).unwrap();
        let trace = verify_key_lemma(&b, &pair, 3, 1e-12).unwrap();
        assert!(trace.passed);
        assert_eq!(trace.lhs, 0.0);
        assert_eq!(trace.rhs, 0.0);
    }

    #[test]
    fn pairing_sum_worked_values() {
        let h = haar_quarter();
        assert_relative_eq!(duality_sum(&h, &h).unwrap(), 1.0, max_relative = 1e-12);
        let g = StepFunction::haar(3, NodeId::new(1, 1)).unwrap();
        // Disjoint Haar supports never share an internal node.
        assert_eq!(duality_sum(&h, &g).unwrap(), 0.0);
        let c = StepFunction::constant(3, 5.0).unwrap();
        assert_eq!(duality_sum(&h, &c).unwrap(), 0.0);
    }

    #[test]
    fn pairing_sum_scales_absolutely_in_each_argument() {
        let f = random_function(6, 31);
        let phi = random_function(6, 32);
        let base = duality_sum(&f, &phi).unwrap();
        let f2 =
            StepFunction::new(*f.spec(), f.values().iter().map(|v| -2.0 * v).collect()).unwrap();
        assert_relative_eq!(duality_sum(&f2, &phi).unwrap(), 2.0 * base, max_relative = 1e-12);
    }

    #[test]
    fn mismatched_lattices_are_errors() {
        let f = random_function(3, 1);
        let g = random_function(4, 2);
        assert!(matches!(duality_sum(&f, &g), Err(Error::LatticeMismatch(_))));
        assert!(matches!(build_pair(&f, &g), Err(Error::LatticeMismatch(_))));
    }

    #[test]
    fn truncated_pairing_matches_the_summation_lhs() {
        // The lhs of the bound is 4x the pairing sum restricted to
        // generations below the truncation, when f pairs with itself
        // (margins aside, this ties the two quantities computed by
        // independent code paths).
        let f = random_function(6, 41);
        let pair = build_pair(&f, &f).unwrap();
        let b = BellmanCandidate::sample(pair.mbar()).unwrap();
        let coeffs = f.expand();
        for n in 1..=6u32 {
            let trace = verify_key_lemma(&b, &pair, n, 1e-12).unwrap();
            let mut truncated = 0.0;
            for k in 0..n {
                for i in 0..(1u64 << k) {
                    let c = coeffs.coefficient(NodeId::new(k, i)).unwrap();
                    truncated += c * c;
                }
            }
            assert_relative_eq!(4.0 * truncated, trace.lhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn node_functional_shape_is_validated() {
        let spec = LatticeSpec::new(1, 2).unwrap();
        assert!(NodeFunctional::new(spec, vec![vec![0.0], vec![0.0, 0.0]]).is_err());
        assert!(NodeFunctional::new(
            spec,
            vec![vec![0.0], vec![0.0, 0.0], vec![0.0; 3]]
        )
        .is_err());
        assert!(NodeFunctional::new(
            spec,
            vec![vec![0.0], vec![0.0, f64::NAN], vec![0.0; 4]]
        )
        .is_err());
        assert!(NodeFunctional::new(
            spec,
            vec![vec![0.0], vec![0.0, 0.0], vec![0.0; 4]]
        )
        .is_ok());
    }
}
