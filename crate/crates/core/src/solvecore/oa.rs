//! Tangent cuts for the convex quadratic epigraph `F >= a P^2 + b P + c`.

use super::lp::{LinearProgram, Sense};

/// Supporting line `F >= slope * P + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OaCut {
    pub slope: f64,
    pub intercept: f64,
}

impl OaCut {
    pub fn eval(&self, p: f64) -> f64 {
        self.slope * p + self.intercept
    }

    /// Appends `F - slope * P >= intercept` and returns the row index.
    pub fn add_to(&self, lp: &mut LinearProgram, epigraph_var: usize, point_var: usize) -> usize {
        lp.add_row(
            [(epigraph_var, 1.0), (point_var, -self.slope)],
            Sense::Ge,
            self.intercept,
        )
    }
}

/// Tangent of `a P^2 + b P + c` at `p_bar`: `F >= (2 a p_bar + b) P - a p_bar^2 + c`.
pub fn oa_refine(a: f64, b: f64, c: f64, p_bar: f64) -> OaCut {
    debug_assert!(
        a > 0.0,
        "outer approximation needs a strictly convex quadratic"
    );
    OaCut {
        slope: 2.0 * a * p_bar + b,
        intercept: c - a * p_bar * p_bar,
    }
}

/// `a P^2 + b P + c - F`, positive when the epigraph point is cut off.
pub fn epigraph_violation(a: f64, b: f64, c: f64, p: f64, f: f64) -> f64 {
    a * p * p + b * p + c - f
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tangent_at_vertex_is_flat() {
        let cut = oa_refine(1.0, 0.0, 0.0, 0.0);
        assert_eq!(
            cut,
            OaCut {
                slope: 0.0,
                intercept: 0.0
            }
        );
    }

    #[test]
    fn tangent_at_two() {
        let cut = oa_refine(1.0, 0.0, 0.0, 2.0);
        assert_eq!(cut.slope, 4.0);
        assert_eq!(cut.intercept, -4.0);
        assert_eq!(cut.eval(2.0), 4.0);
    }

    proptest! {
        #[test]
        fn cut_touches_at_its_point_and_underestimates(
            a in 1e-4f64..10.0, b in -50.0f64..50.0, c in -100.0f64..100.0,
            p_bar in -200.0f64..200.0, p in -200.0f64..200.0,
        ) {
            let cut = oa_refine(a, b, c, p_bar);
            let q = |x: f64| a * x * x + b * x + c;
            prop_assert!((cut.eval(p_bar) - q(p_bar)).abs() <= 1e-9 * (1.0 + q(p_bar).abs()));
            prop_assert!(cut.eval(p) <= q(p) + 1e-9 * (1.0 + q(p).abs()));
        }
    }
}
