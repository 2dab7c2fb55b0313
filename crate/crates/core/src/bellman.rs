//! Bellman candidates on the domain `x >= 0`, `0 <= y <= mbar`, and the
//! condition checker that certifies them.
//!
//! A conforming candidate `B` must satisfy, everywhere on its domain:
//!
//! * `lower_bound`:      `B(x, y) >= 0`
//! * `upper_bound`:      `B(x, y) <= 2 * mbar * sqrt(x)`
//! * `mixed_derivative`: `-B_x * B_y >= mbar / 2`
//! * `concave_x`:        `B_xx <= 0`
//! * `convex_y`:         `B_yy >= 0`
//! * `boundary_zero`:    `B(0, y) = 0`
//!
//! The closed-form family is `B(x, y) = sqrt(x) * (A - y)` with parameter
//! `A > mbar`; the member `A = 2 * mbar` satisfies everything with the mixed
//! lower bound met exactly at `y = mbar`. Candidates may also be supplied as
//! values on a rectangular grid, in which case derivative conditions are
//! checked by second-order finite differences at the grid's own points, and
//! the checker's resolution is the grid's. Finite differences carry a
//! discretization bias of order `h^2` (relative, with `h` the local spacing)
//! plus rounding noise of order `eps * |B| / h^2`, so conditions that hold
//! with equality somewhere can show hairline negative margins through the
//! grid path; pick the tolerance with the grid's resolution in mind. The
//! analytic path has no such limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::golden::golden_section_min;
use crate::scalar::{real, to_f64, Scalar};

pub const DEFAULT_X_MIN: f64 = 1e-8;
pub const DEFAULT_X_MAX: f64 = 1e4;
pub const DEFAULT_X_COUNT: usize = 200;
pub const DEFAULT_Y_COUNT: usize = 101;

/// Evaluation grid for condition checking: log-spaced in `x`, linear in `y`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSpec<T: Scalar> {
    x_min: T,
    x_max: T,
    x_count: usize,
    y_count: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(x_min: T, x_max: T, x_count: usize, y_count: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min <= T::zero() || x_max <= x_min {
            return Err(Error::Domain(format!(
                "need 0 < x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if x_count < 2 || y_count < 2 {
            return Err(Error::EmptyGrid(format!(
                "need at least 2 points per axis, got {x_count} x {y_count}"
            )));
        }
        Ok(GridSpec { x_min, x_max, x_count, y_count })
    }

    pub fn default_spec() -> Self {
        GridSpec {
            x_min: real(DEFAULT_X_MIN),
            x_max: real(DEFAULT_X_MAX),
            x_count: DEFAULT_X_COUNT,
            y_count: DEFAULT_Y_COUNT,
        }
    }

    pub fn x_points(&self) -> Vec<T> {
        let n = self.x_count;
        let ln_min = self.x_min.ln();
        let step = (self.x_max.ln() - ln_min) / real((n - 1) as f64);
        (0..n)
            .map(|i| match i {
                0 => self.x_min,
                _ if i == n - 1 => self.x_max,
                _ => (ln_min + real::<T>(i as f64) * step).exp(),
            })
            .collect()
    }

    pub fn y_points(&self, mbar: T) -> Vec<T> {
        let n = self.y_count;
        (0..n)
            .map(|j| mbar * real(j as f64) / real((n - 1) as f64))
            .collect()
    }
}

/// The six conditions, in reporting order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    LowerBound,
    UpperBound,
    MixedDerivative,
    ConcaveX,
    ConvexY,
    BoundaryZero,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::LowerBound,
        Condition::UpperBound,
        Condition::MixedDerivative,
        Condition::ConcaveX,
        Condition::ConvexY,
        Condition::BoundaryZero,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::LowerBound => "lower_bound",
            Condition::UpperBound => "upper_bound",
            Condition::MixedDerivative => "mixed_derivative",
            Condition::ConcaveX => "concave_x",
            Condition::ConvexY => "convex_y",
            Condition::BoundaryZero => "boundary_zero",
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One condition's outcome: worst margin over the grid and where it occurred.
/// Ties go to the smallest `(x, y)` in lexicographic order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionRecord<T: Scalar> {
    pub condition: Condition,
    pub passed: bool,
    pub worst_margin: T,
    pub worst_x: T,
    pub worst_y: T,
    pub violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport<T: Scalar> {
    pub mbar: T,
    pub tol: T,
    pub records: Vec<ConditionRecord<T>>,
    pub all_passed: bool,
}

impl<T: Scalar> ConditionReport<T> {
    pub fn record(&self, condition: Condition) -> &ConditionRecord<T> {
        self.records
            .iter()
            .find(|r| r.condition == condition)
            .expect("every report carries all six conditions")
    }

    pub fn failing(&self) -> Vec<Condition> {
        self.records.iter().filter(|r| !r.passed).map(|r| r.condition).collect()
    }
}

#[derive(Clone, Debug)]
enum Form<T: Scalar> {
    Family { a: T },
    Grid(GridData<T>),
}

#[derive(Clone, Debug)]
struct GridData<T: Scalar> {
    xs: Vec<T>,
    ys: Vec<T>,
    /// `values[i][j]` is `B(xs[i], ys[j])`.
    values: Vec<Vec<T>>,
}

/// A candidate function, either the closed-form family member or grid data.
#[derive(Clone, Debug)]
pub struct BellmanCandidate<T: Scalar> {
    mbar: T,
    form: Form<T>,
}

impl<T: Scalar> BellmanCandidate<T> {
    /// Family member `sqrt(x) * (A - y)`. Requires `A > mbar > 0`.
    pub fn family(a: T, mbar: T) -> Result<Self> {
        if !(mbar.is_finite() && a.is_finite()) || mbar <= T::zero() {
            return Err(Error::Domain(format!("need finite a and mbar > 0, got A={a}, mbar={mbar}")));
        }
        if a <= mbar {
            return Err(Error::InfeasibleFamily { a: to_f64(a), mbar: to_f64(mbar) });
        }
        Ok(BellmanCandidate { mbar, form: Form::Family { a } })
    }

    /// The conforming member `A = 2 * mbar`.
    pub fn sample(mbar: T) -> Result<Self> {
        Self::family(real::<T>(2.0) * mbar, mbar)
    }

    /// Candidate from grid samples; `values[i][j] = B(xs[i], ys[j])`.
    ///
    /// Both axes must be strictly increasing with at least three points
    /// (finite differences need a stencil), `xs[0] >= 0`, and `ys` inside
    /// `[0, mbar]`.
    pub fn from_grid(mbar: T, xs: Vec<T>, ys: Vec<T>, values: Vec<Vec<T>>) -> Result<Self> {
        if !mbar.is_finite() || mbar <= T::zero() {
            return Err(Error::Domain(format!("need mbar > 0, got {mbar}")));
        }
        if xs.len() < 3 || ys.len() < 3 {
            return Err(Error::EmptyGrid(format!(
                "grid candidates need at least 3 points per axis, got {} x {}",
                xs.len(),
                ys.len()
            )));
        }
        for axis in [&xs, &ys] {
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("grid axis value".into()));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Domain("grid axes must be strictly increasing".into()));
            }
        }
        if xs[0] < T::zero() {
            return Err(Error::Domain("grid x axis must start at or above 0".into()));
        }
        let slack = real::<T>(1e-12) * T::one().max(mbar);
        if ys[0] < -slack || *ys.last().unwrap() > mbar + slack {
            return Err(Error::Domain(format!(
                "grid y axis must lie inside [0, mbar = {mbar}]"
            )));
        }
        if values.len() != xs.len() || values.iter().any(|row| row.len() != ys.len()) {
            return Err(Error::Domain(format!(
                "values must be {} rows of {} entries",
                xs.len(),
                ys.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid candidate value".into()));
        }
        Ok(BellmanCandidate { mbar, form: Form::Grid(GridData { xs, ys, values }) })
    }

    /// Sample a closure onto `grid` and wrap it as a grid candidate.
    pub fn sample_on(mbar: T, grid: &GridSpec<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        let xs = grid.x_points();
        let ys = grid.y_points(mbar);
        let values = xs
            .iter()
            .map(|&x| ys.iter().map(|&y| f(x, y)).collect())
            .collect();
        Self::from_grid(mbar, xs, ys, values)
    }

    pub fn mbar(&self) -> T {
        self.mbar
    }

    /// Family parameter, if this is a closed-form candidate.
    pub fn family_a(&self) -> Option<T> {
        match self.form {
            Form::Family { a } => Some(a),
            Form::Grid(_) => None,
        }
    }

    /// Smallest `C` with `B <= C * sqrt(x)`: the family parameter `A`.
    pub fn upper_constant(&self) -> Option<T> {
        self.family_a()
    }

    /// Guaranteed lower bound for `-B_x * B_y`: `(A - mbar) / 2`.
    pub fn mixed_constant(&self) -> Option<T> {
        match self.form {
            Form::Family { a } => Some((a - self.mbar) * real(0.5)),
            Form::Grid(_) => None,
        }
    }

    fn check_domain(&self, x: T, y: T) -> Result<()> {
        let slack = real::<T>(1e-9) * T::one().max(self.mbar);
        if !(x.is_finite() && y.is_finite()) || x < T::zero() {
            return Err(Error::Domain(format!("point ({x}, {y}) outside x >= 0")));
        }
        if y < -slack || y > self.mbar + slack {
            return Err(Error::Domain(format!(
                "point ({x}, {y}) outside 0 <= y <= mbar = {}",
                self.mbar
            )));
        }
        Ok(())
    }

    /// Evaluate the candidate. Grid candidates interpolate bilinearly, with
    /// `B(0, y) = 0` extending grids whose x axis starts above zero; `x`
    /// beyond the grid is a domain error.
    pub fn value(&self, x: T, y: T) -> Result<T> {
        self.check_domain(x, y)?;
        match &self.form {
            Form::Family { a } => Ok(x.sqrt() * (*a - y)),
            Form::Grid(data) => data.interpolate(x, y),
        }
    }

    /// Analytic `B_x`; requires `x > 0` and a closed-form candidate.
    pub fn dx(&self, x: T, y: T) -> Result<T> {
        self.check_domain(x, y)?;
        match &self.form {
            Form::Family { a } => {
                if x <= T::zero() {
                    return Err(Error::Domain("B_x needs x > 0".into()));
                }
                Ok((*a - y) / (real::<T>(2.0) * x.sqrt()))
            }
            Form::Grid(_) => Err(grid_derivative_error()),
        }
    }

    /// Analytic `B_y`; requires a closed-form candidate.
    pub fn dy(&self, x: T, y: T) -> Result<T> {
        self.check_domain(x, y)?;
        match &self.form {
            Form::Family { .. } => Ok(-x.sqrt()),
            Form::Grid(_) => Err(grid_derivative_error()),
        }
    }

    /// Analytic `B_xx`; requires `x > 0` and a closed-form candidate.
    pub fn dxx(&self, x: T, y: T) -> Result<T> {
        self.check_domain(x, y)?;
        match &self.form {
            Form::Family { a } => {
                if x <= T::zero() {
                    return Err(Error::Domain("B_xx needs x > 0".into()));
                }
                Ok(-(*a - y) / (real::<T>(4.0) * x * x.sqrt()))
            }
            Form::Grid(_) => Err(grid_derivative_error()),
        }
    }

    /// Analytic `B_yy`; requires a closed-form candidate.
    pub fn dyy(&self, x: T, y: T) -> Result<T> {
        self.check_domain(x, y)?;
        match &self.form {
            Form::Family { .. } => Ok(T::zero()),
            Form::Grid(_) => Err(grid_derivative_error()),
        }
    }

    /// Check all six conditions.
    ///
    /// Closed-form candidates are evaluated analytically on `grid` (the
    /// default grid when `None`). Grid candidates are checked at their own
    /// sample points with finite differences, and `grid` is ignored; the
    /// `boundary_zero` record is exact when the grid carries an `x = 0`
    /// column and otherwise notes that the zero extension was assumed.
    pub fn verify(&self, grid: Option<&GridSpec<T>>, tol: T) -> Result<ConditionReport<T>> {
        match &self.form {
            Form::Family { a } => {
                let default_grid;
                let grid = match grid {
                    Some(g) => g,
                    None => {
                        default_grid = GridSpec::default_spec();
                        &default_grid
                    }
                };
                self.verify_family(*a, grid, tol)
            }
            Form::Grid(data) => self.verify_grid(data, tol),
        }
    }

    fn verify_family(&self, a: T, grid: &GridSpec<T>, tol: T) -> Result<ConditionReport<T>> {
        let xs = grid.x_points();
        let ys = grid.y_points(self.mbar);
        let mut trackers = Trackers::new(self.mbar, tol);
        for &x in &xs {
            let sx = x.sqrt();
            for &y in &ys {
                let b = sx * (a - y);
                let bx = (a - y) / (real::<T>(2.0) * sx);
                let by = -sx;
                let bxx = -(a - y) / (real::<T>(4.0) * x * sx);
                trackers.observe(x, y, b, bx, by, bxx, T::zero())?;
            }
        }
        for &y in &ys {
            trackers.observe_boundary(T::zero(), y, T::zero())?;
        }
        Ok(trackers.finish(None))
    }

    fn verify_grid(&self, data: &GridData<T>, tol: T) -> Result<ConditionReport<T>> {
        let xs = &data.xs;
        let ys = &data.ys;
        let mut trackers = Trackers::new(self.mbar, tol);
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                let b = data.values[i][j];
                if x <= T::zero() {
                    // Derivative stencils stop at the boundary column; it
                    // still feeds the bound and boundary checks.
                    trackers.observe_bounds(x, y, b)?;
                    continue;
                }
                let (i0, ic) = stencil(i, xs.len());
                let (j0, jc) = stencil(j, ys.len());
                let fx = |s: usize| data.values[i0 + s][j];
                let fy = |s: usize| data.values[i][j0 + s];
                let bx = d1_parabola(&xs[i0..i0 + 3], [fx(0), fx(1), fx(2)], ic);
                let by = d1_parabola(&ys[j0..j0 + 3], [fy(0), fy(1), fy(2)], jc);
                let bxx = d2_parabola(&xs[i0..i0 + 3], [fx(0), fx(1), fx(2)]);
                let byy = d2_parabola(&ys[j0..j0 + 3], [fy(0), fy(1), fy(2)]);
                trackers.observe(x, y, b, bx, by, bxx, byy)?;
            }
        }
        let boundary_note = if xs[0] <= T::zero() {
            for (j, &y) in ys.iter().enumerate() {
                trackers.observe_boundary(T::zero(), y, data.values[0][j])?;
            }
            None
        } else {
            trackers.observe_boundary(T::zero(), T::zero(), T::zero())?;
            Some("x = 0 not sampled; the zero extension is assumed".to_string())
        };
        Ok(trackers.finish(boundary_note))
    }
}

fn grid_derivative_error() -> Error {
    Error::Domain(
        "grid candidates expose derivatives only through verification at their grid points"
            .into(),
    )
}

/// Stencil start index and the in-stencil position for point `i` of `n`.
fn stencil(i: usize, n: usize) -> (usize, usize) {
    if i == 0 {
        (0, 0)
    } else if i == n - 1 {
        (n - 3, 2)
    } else {
        (i - 1, 1)
    }
}

/// Derivative at stencil point `at` of the parabola through three samples.
fn d1_parabola<T: Scalar>(x: &[T], f: [T; 3], at: usize) -> T {
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let t = x[at];
    let two = real::<T>(2.0);
    let l0 = (two * t - x1 - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (two * t - x0 - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (two * t - x0 - x1) / ((x2 - x0) * (x2 - x1));
    f[0] * l0 + f[1] * l1 + f[2] * l2
}

/// Second derivative of the parabola through three samples (constant on the
/// stencil).
fn d2_parabola<T: Scalar>(x: &[T], f: [T; 3]) -> T {
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let two = real::<T>(2.0);
    two * (f[0] / ((x0 - x1) * (x0 - x2))
        + f[1] / ((x1 - x0) * (x1 - x2))
        + f[2] / ((x2 - x0) * (x2 - x1)))
}

impl<T: Scalar> GridData<T> {
    /// Bilinear interpolation; `x` below the first column blends toward the
    /// implicit `B(0, y) = 0`, `y` clamps to the sampled range.
    fn interpolate(&self, x: T, y: T) -> Result<T> {
        let last_x = *self.xs.last().unwrap();
        if x > last_x * (T::one() + real(1e-12)) {
            return Err(Error::Domain(format!(
                "x = {x} beyond the sampled range [0, {last_x}]"
            )));
        }
        let x = x.min(last_x);
        let y = y.max(self.ys[0]).min(*self.ys.last().unwrap());

        let j = cell_index(&self.ys, y);
        let (y0, y1) = (self.ys[j], self.ys[j + 1]);
        let ty = (y - y0) / (y1 - y0);
        let col = |i: usize| {
            let row = &self.values[i];
            row[j] + ty * (row[j + 1] - row[j])
        };

        if x < self.xs[0] {
            // xs[0] > 0 here: blend between B(0, y) = 0 and the first column.
            let t = x / self.xs[0];
            return Ok(t * col(0));
        }
        let i = cell_index(&self.xs, x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let tx = (x - x0) / (x1 - x0);
        Ok(col(i) + tx * (col(i + 1) - col(i)))
    }
}

/// Index of the cell `[axis[i], axis[i+1]]` containing `v` (clamped).
fn cell_index<T: Scalar>(axis: &[T], v: T) -> usize {
    let ub = axis.partition_point(|&a| a <= v);
    ub.clamp(1, axis.len() - 1) - 1
}

/// Worst-margin tracking for the six conditions.
struct Trackers<T: Scalar> {
    mbar: T,
    tol: T,
    worst: [Worst<T>; 6],
}

#[derive(Clone, Copy)]
struct Worst<T: Scalar> {
    margin: T,
    x: T,
    y: T,
    violations: usize,
}

impl<T: Scalar> Trackers<T> {
    fn new(mbar: T, tol: T) -> Self {
        let init = Worst { margin: T::infinity(), x: T::zero(), y: T::zero(), violations: 0 };
        Trackers { mbar, tol, worst: [init; 6] }
    }

    fn threshold(&self, c: Condition) -> T {
        match c {
            Condition::MixedDerivative => self.mbar * real(0.5),
            _ => T::zero(),
        }
    }

    fn observe_one(&mut self, c: Condition, x: T, y: T, margin: T) -> Result<()> {
        if !margin.is_finite() {
            return Err(Error::NonFinite(format!("{} margin at ({x}, {y})", c.name())));
        }
        let cut = -self.tol * T::one().max(self.threshold(c).abs());
        let slot = &mut self.worst[c as usize];
        if margin < slot.margin {
            slot.margin = margin;
            slot.x = x;
            slot.y = y;
        }
        if margin < cut {
            slot.violations += 1;
        }
        Ok(())
    }

    fn observe_bounds(&mut self, x: T, y: T, b: T) -> Result<()> {
        self.observe_one(Condition::LowerBound, x, y, b)?;
        let cap = real::<T>(2.0) * self.mbar * x.sqrt();
        self.observe_one(Condition::UpperBound, x, y, cap - b)
    }

    #[allow(clippy::too_many_arguments)]
    fn observe(&mut self, x: T, y: T, b: T, bx: T, by: T, bxx: T, byy: T) -> Result<()> {
        self.observe_bounds(x, y, b)?;
        let mixed = -bx * by - self.mbar * real(0.5);
        self.observe_one(Condition::MixedDerivative, x, y, mixed)?;
        self.observe_one(Condition::ConcaveX, x, y, -bxx)?;
        self.observe_one(Condition::ConvexY, x, y, byy)
    }

    fn observe_boundary(&mut self, x: T, y: T, b: T) -> Result<()> {
        self.observe_one(Condition::BoundaryZero, x, y, -b.abs())
    }

    fn finish(self, boundary_note: Option<String>) -> ConditionReport<T> {
        let mut records = Vec::with_capacity(6);
        for c in Condition::ALL {
            let w = self.worst[c as usize];
            let threshold = self.threshold(c);
            let note = match c {
                Condition::BoundaryZero => boundary_note.clone(),
                _ => None,
            };
            records.push(ConditionRecord {
                condition: c,
                passed: w.margin >= -self.tol * T::one().max(threshold.abs()),
                worst_margin: w.margin,
                worst_x: w.x,
                worst_y: w.y,
                violations: w.violations,
                note,
            });
        }
        let all_passed = records.iter().all(|r| r.passed);
        ConditionReport { mbar: self.mbar, tol: self.tol, records, all_passed }
    }
}

/// Result of minimizing the induction prefactor over the family parameter.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FamilyOptimum<T: Scalar> {
    pub a_star: T,
    pub ratio_star: T,
}

/// Induction prefactor `sqrt(2) * A / sqrt(A - mbar)` of a family member.
pub fn family_ratio<T: Scalar>(a: T, mbar: T) -> Result<T> {
    if a <= mbar {
        return Err(Error::InfeasibleFamily { a: to_f64(a), mbar: to_f64(mbar) });
    }
    Ok(real::<T>(std::f64::consts::SQRT_2) * a / (a - mbar).sqrt())
}

/// Minimize the induction prefactor over `A`.
///
/// The prefactor is strictly unimodal on `(mbar, infinity)` with its minimum
/// at `A = 2 * mbar`, value `2 * sqrt(2 * mbar)`; a golden-section search on
/// `[mbar * (1 + 1e-6), 10 * mbar]` brackets it comfortably.
pub fn optimize_family<T: Scalar>(mbar: T) -> Result<FamilyOptimum<T>> {
    if !mbar.is_finite() || mbar <= T::zero() {
        return Err(Error::Domain(format!("need mbar > 0, got {mbar}")));
    }
    let lo = mbar * (T::one() + real(1e-6));
    let hi = mbar * real(10.0);
    let xtol = real::<T>(1e-9) * T::one().max(mbar);
    let (a_star, ratio_star) = golden_section_min(
        |a| match family_ratio(a, mbar) {
            Ok(r) => r,
            Err(_) => T::infinity(),
        },
        lo,
        hi,
        xtol,
    );
    Ok(FamilyOptimum { a_star, ratio_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sample_candidate_worked_values() {
        let b = BellmanCandidate::sample(1.0f64).unwrap();
        assert_eq!(b.value(1.0, 0.0).unwrap(), 2.0);
        assert_eq!(b.value(0.0, 0.7).unwrap(), 0.0);
        assert_eq!(b.dx(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(b.dy(4.0, 0.5).unwrap(), -2.0);
        assert_eq!(b.dyy(4.0, 0.5).unwrap(), 0.0);
        // -B_x * B_y = (A - y) / 2 = 1/2 at y = mbar, for every x.
        for x in [1e-6, 0.3, 7.0, 1e3] {
            let p = -b.dx(x, 1.0).unwrap() * b.dy(x, 1.0).unwrap();
            assert_relative_eq!(p, 0.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn sample_candidates_pass_all_conditions() {
        for mbar in [0.25f64, 0.5, 1.0, 2.0, 4.0] {
            let report = BellmanCandidate::sample(mbar).unwrap().verify(None, 1e-12).unwrap();
            assert!(report.all_passed, "mbar = {mbar}: {:?}", report.failing());
        }
    }

    #[test]
    fn too_small_parameter_fails_exactly_the_mixed_condition() {
        let b = BellmanCandidate::family(1.2f64, 1.0).unwrap();
        let report = b.verify(None, 1e-12).unwrap();
        assert_eq!(report.failing(), vec![Condition::MixedDerivative]);
        let rec = report.record(Condition::MixedDerivative);
        // Margin (A - y)/2 - 1/2 bottoms out at y = mbar, tied across x, so
        // the reported site is the smallest grid x.
        assert_relative_eq!(rec.worst_margin, -0.4, max_relative = 1e-12);
        assert_relative_eq!(rec.worst_y, 1.0, max_relative = 1e-12);
        assert_relative_eq!(rec.worst_x, DEFAULT_X_MIN, max_relative = 1e-12);
        assert!(rec.violations > 0);
    }

    #[test]
    fn family_constants_are_reported() {
        let b = BellmanCandidate::family(1.5f64, 1.0).unwrap();
        assert_eq!(b.upper_constant().unwrap(), 1.5);
        assert_eq!(b.mixed_constant().unwrap(), 0.25);
        let report = b.verify(None, 1e-12).unwrap();
        assert_eq!(report.failing(), vec![Condition::MixedDerivative]);
    }

    #[test]
    fn infeasible_family_is_rejected() {
        assert!(matches!(
            BellmanCandidate::family(1.0f64, 1.0),
            Err(Error::InfeasibleFamily { .. })
        ));
        assert!(BellmanCandidate::family(0.5f64, 1.0).is_err());
        assert!(BellmanCandidate::sample(0.0f64).is_err());
    }

    #[test]
    fn sampled_family_passes_through_the_finite_difference_path() {
        let mbar = 1.0f64;
        let b = BellmanCandidate::sample(mbar).unwrap();
        // The mixed condition holds with equality at y = mbar, so the pass
        // tolerance must absorb the finite-difference bias, which scales
        // with the squared log-spacing of the x axis: 2001 points over
        // [1e-4, 1e2] put it near 2e-5.
        let grid = GridSpec::new(1e-4, 1e2, 2001, 61).unwrap();
        let sampled =
            BellmanCandidate::sample_on(mbar, &grid, |x, y| b.value(x, y).unwrap()).unwrap();
        let report = sampled.verify(None, 1e-4).unwrap();
        assert!(report.all_passed, "{:?}", report.failing());
        let boundary = report.record(Condition::BoundaryZero);
        assert!(boundary.note.is_some());
    }

    #[test]
    fn perturbed_grid_candidate_fails_mixed_near_the_top_edge() {
        let mbar = 1.0f64;
        let base = BellmanCandidate::sample(mbar).unwrap();
        let grid = GridSpec::default_spec();
        let perturbed = BellmanCandidate::sample_on(mbar, &grid, |x, y| {
            base.value(x, y).unwrap() + 0.01 * y * y
        })
        .unwrap();
        let report = perturbed.verify(None, 1e-9).unwrap();
        assert!(report.record(Condition::ConvexY).passed);
        assert!(report.record(Condition::ConcaveX).passed);
        let mixed = report.record(Condition::MixedDerivative);
        assert!(!mixed.passed);
        assert!(mixed.worst_y > 0.9 * mbar);
    }

    #[test]
    fn explicit_boundary_column_is_checked_exactly() {
        let xs = vec![0.0f64, 1.0, 2.0];
        let ys = vec![0.0, 0.5, 1.0];
        let bad = |x: f64, y: f64| x.sqrt() * (2.0 - y) + 0.01 * y * y;
        let values: Vec<Vec<f64>> =
            xs.iter().map(|&x| ys.iter().map(|&y| bad(x, y)).collect()).collect();
        let cand = BellmanCandidate::from_grid(1.0, xs, ys, values).unwrap();
        let report = cand.verify(None, 1e-9).unwrap();
        let boundary = report.record(Condition::BoundaryZero);
        assert!(!boundary.passed);
        assert_relative_eq!(boundary.worst_margin, -0.01, max_relative = 1e-12);
        assert_relative_eq!(boundary.worst_y, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn grid_construction_rejects_malformed_input() {
        let xs = vec![0.0f64, 1.0, 2.0];
        let ys = vec![0.0, 0.5, 1.0];
        let ok = vec![vec![0.0; 3]; 3];
        assert!(BellmanCandidate::from_grid(1.0, xs.clone(), ys.clone(), ok.clone()).is_ok());
        // Too few points.
        assert!(matches!(
            BellmanCandidate::from_grid(1.0, vec![0.0, 1.0], ys.clone(), ok[..2].to_vec()),
            Err(Error::EmptyGrid(_))
        ));
        // Non-increasing axis.
        assert!(BellmanCandidate::from_grid(1.0, vec![0.0, 1.0, 1.0], ys.clone(), ok.clone())
            .is_err());
        // y outside [0, mbar].
        assert!(BellmanCandidate::from_grid(1.0, xs.clone(), vec![0.0, 0.5, 1.5], ok.clone())
            .is_err());
        // Ragged values.
        let ragged = vec![vec![0.0; 3], vec![0.0; 2], vec![0.0; 3]];
        assert!(BellmanCandidate::from_grid(1.0, xs.clone(), ys.clone(), ragged).is_err());
        // Non-finite value.
        let mut nan = ok;
        nan[1][1] = f64::NAN;
        assert!(matches!(
            BellmanCandidate::from_grid(1.0, xs, ys, nan),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn grid_interpolation_matches_the_sampled_function_between_nodes() {
        let mbar = 1.0f64;
        let base = BellmanCandidate::sample(mbar).unwrap();
        let grid = GridSpec::new(1e-3, 1e2, 400, 201).unwrap();
        let sampled =
            BellmanCandidate::sample_on(mbar, &grid, |x, y| b_eval(&base, x, y)).unwrap();
        for (x, y) in [(0.7, 0.3), (13.0, 0.95), (2.5e-3, 0.01), (99.0, 1.0)] {
            let exact = b_eval(&base, x, y);
            let approx_v = sampled.value(x, y).unwrap();
            assert_relative_eq!(approx_v, exact, max_relative = 1e-3);
        }
        // Below the first column the value blends linearly toward zero.
        let near_zero = sampled.value(1e-6, 0.5).unwrap();
        assert!(near_zero > 0.0 && near_zero < sampled.value(1e-3, 0.5).unwrap());
        // Beyond the sampled range is a domain error.
        assert!(sampled.value(200.0, 0.5).is_err());
    }

    fn b_eval(b: &BellmanCandidate<f64>, x: f64, y: f64) -> f64 {
        b.value(x, y).unwrap()
    }

    #[test]
    fn derivative_queries_on_grid_candidates_are_domain_errors() {
        let cand = BellmanCandidate::from_grid(
            1.0f64,
            vec![0.0, 1.0, 2.0],
            vec![0.0, 0.5, 1.0],
            vec![vec![0.0; 3]; 3],
        )
        .unwrap();
        assert!(cand.dx(1.0, 0.5).is_err());
        assert!(cand.dyy(1.0, 0.5).is_err());
    }

    #[test]
    fn points_outside_the_domain_are_rejected() {
        let b = BellmanCandidate::sample(1.0f64).unwrap();
        assert!(b.value(-0.1, 0.5).is_err());
        assert!(b.value(1.0, 1.5).is_err());
        assert!(b.value(1.0, -0.5).is_err());
    }

    #[test]
    fn optimizer_finds_the_known_minimum() {
        for mbar in [0.25f64, 0.5, 1.0, 2.0, 4.0] {
            let opt = optimize_family(mbar).unwrap();
            assert!((opt.a_star - 2.0 * mbar).abs() <= 1e-6, "mbar = {mbar}");
            assert!(
                (opt.ratio_star - 2.0 * (2.0 * mbar).sqrt()).abs() <= 1e-6,
                "mbar = {mbar}"
            );
        }
    }

    #[test]
    fn optimum_is_first_order_critical() {
        let mbar = 1.0f64;
        let opt = optimize_family(mbar).unwrap();
        let h = 1e-5;
        let d = (family_ratio(opt.a_star + h, mbar).unwrap()
            - family_ratio(opt.a_star - h, mbar).unwrap())
            / (2.0 * h);
        assert!(d.abs() < 1e-4, "slope {d}");
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(0.0f64, 1.0, 10, 10).is_err());
        assert!(GridSpec::new(1.0f64, 1.0, 10, 10).is_err());
        assert!(matches!(
            GridSpec::new(1e-8f64, 1e4, 1, 10),
            Err(Error::EmptyGrid(_))
        ));
        let g = GridSpec::<f64>::default_spec();
        let xs = g.x_points();
        assert_eq!(xs.len(), DEFAULT_X_COUNT);
        assert_eq!(xs[0], DEFAULT_X_MIN);
        assert_eq!(*xs.last().unwrap(), DEFAULT_X_MAX);
        let ys = g.y_points(2.0);
        assert_eq!(ys.len(), DEFAULT_Y_COUNT);
        assert_eq!(ys[0], 0.0);
        assert_eq!(*ys.last().unwrap(), 2.0);
    }

    #[test]
    fn finite_difference_helpers_are_exact_on_parabolas() {
        let xs = [0.5f64, 1.25, 3.0];
        let p = |x: f64| 2.0 * x * x - 3.0 * x + 0.25;
        let f = [p(xs[0]), p(xs[1]), p(xs[2])];
        for at in 0..3 {
            let exact = 4.0 * xs[at] - 3.0;
            assert_relative_eq!(d1_parabola(&xs, f, at), exact, max_relative = 1e-13);
        }
        assert_relative_eq!(d2_parabola(&xs, f), 4.0, max_relative = 1e-13);
    }
}
