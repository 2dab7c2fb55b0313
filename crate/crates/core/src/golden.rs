//! Derivative-free one-dimensional minimization.

use crate::scalar::{real, Scalar};

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Shrinks the bracket by the inverse golden ratio until it is narrower than
/// `xtol`, then returns the best interior point and its value. Finds the
/// global minimum on the bracket when `f` is unimodal there, a local one
/// otherwise. Non-finite function values are treated as worse than any
/// finite value.
pub fn golden_section_min<T, F>(f: F, a: T, b: T, xtol: T) -> (T, T)
where
    T: Scalar,
    F: Fn(T) -> T,
{
    let inv_phi = real::<T>((5.0f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..256 {
        if (b - a).abs() <= xtol {
            break;
        }
        if better(fc, fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if better(fc, fd) {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Strictly-less with non-finite values ranked last.
fn better<T: Scalar>(x: T, y: T) -> bool {
    match (x.is_finite(), y.is_finite()) {
        (true, true) => x < y,
        (true, false) => true,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_the_vertex_of_a_parabola() {
        let (x, fx) = golden_section_min(|x: f64| (x - 1.25) * (x - 1.25) + 3.0, -10.0, 10.0, 1e-9);
        assert!((x - 1.25).abs() < 1e-7);
        assert!((fx - 3.0).abs() < 1e-12);
    }

    #[test]
    fn handles_reversed_brackets_and_asymmetric_minima() {
        let (x, _) = golden_section_min(|x: f64| (x * x - 2.0).abs(), 4.0, 0.0, 1e-10);
        assert!((x - 2.0f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn skips_over_non_finite_regions() {
        let (x, _) = golden_section_min(
            |x: f64| if x <= 0.0 { f64::INFINITY } else { (x.ln()).powi(2) },
            -1.0,
            5.0,
            1e-9,
        );
        assert!((x - 1.0).abs() < 1e-6);
    }

    #[test]
    fn works_in_f32() {
        let (x, _) = golden_section_min(|x: f32| (x - 0.5) * (x - 0.5), 0.0, 2.0, 1e-5);
        assert!((x - 0.5).abs() < 1e-3);
    }
}
