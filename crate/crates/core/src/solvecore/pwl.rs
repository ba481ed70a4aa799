//! Incremental ("delta") piecewise-linear encoding of a univariate function.
//!
//! With breakpoints `x_0 < ... < x_K` and values `f_k`, the encoding adds fill
//! variables `d_1..d_K` in `[0, 1]` and ordering binaries `z_1..z_{K-1}`:
//!
//! ```text
//! x = x_0 + sum_k d_k (x_k - x_{k-1})
//! y = f_0 + sum_k d_k (f_k - f_{k-1})
//! d_{k+1} <= z_k <= d_k
//! ```
//!
//! so segment `k+1` can only start filling once segment `k` is full.

use super::lp::Sense;
use super::mip::{IncrementalGroup, MixedIntegerProgram};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PwlError {
    #[error("at least two breakpoints are required, got {0}")]
    TooFewBreakpoints(usize),
    #[error("breakpoints must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("{values} function values for {breakpoints} breakpoints")]
    LengthMismatch { breakpoints: usize, values: usize },
    #[error("non-finite breakpoint or value at index {0}")]
    NonFinite(usize),
}

/// Breakpoint data plus, once attached, the generated columns and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlEncoding {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub deltas: Vec<usize>,
    pub orders: Vec<usize>,
    pub rows: Vec<usize>,
}

impl PwlEncoding {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, PwlError> {
        if breakpoints.len() < 2 {
            return Err(PwlError::TooFewBreakpoints(breakpoints.len()));
        }
        if breakpoints.len() != values.len() {
            return Err(PwlError::LengthMismatch {
                breakpoints: breakpoints.len(),
                values: values.len(),
            });
        }
        for (k, (x, f)) in breakpoints.iter().zip(&values).enumerate() {
            if !x.is_finite() || !f.is_finite() {
                return Err(PwlError::NonFinite(k));
            }
        }
        if let Some(k) = breakpoints.windows(2).position(|w| w[1] <= w[0]) {
            return Err(PwlError::NotIncreasing(k + 1));
        }
        Ok(Self {
            breakpoints,
            values,
            deltas: Vec::new(),
            orders: Vec::new(),
            rows: Vec::new(),
        })
    }

    /// Samples `f` at the given breakpoints.
    pub fn from_fn(breakpoints: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self, PwlError> {
        let values = breakpoints.iter().map(|&x| f(x)).collect();
        Self::new(breakpoints, values)
    }

    /// `segments + 1` equally spaced breakpoints on `[lo, hi]`.
    pub fn uniform(
        lo: f64,
        hi: f64,
        segments: usize,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, PwlError> {
        let segments = segments.max(1);
        let pts = (0..=segments)
            .map(|k| {
                if k == segments {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / segments as f64
                }
            })
            .collect();
        Self::from_fn(pts, f)
    }

    pub fn segments(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    /// Piecewise-linear interpolant; `None` outside the breakpoint range.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let k = match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&x).unwrap())
        {
            Ok(k) => return Some(self.values[k]),
            Err(k) => k,
        };
        let (x0, x1) = (self.breakpoints[k - 1], self.breakpoints[k]);
        let (f0, f1) = (self.values[k - 1], self.values[k]);
        Some(f0 + (f1 - f0) * (x - x0) / (x1 - x0))
    }

    /// Fill assignment `(deltas, orders)` that represents `x`.
    pub fn assignment(&self, x: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let k_seg = self.segments();
        let mut deltas = vec![0.0; k_seg];
        for k in 0..k_seg {
            let (a, b) = (self.breakpoints[k], self.breakpoints[k + 1]);
            deltas[k] = ((x - a) / (b - a)).clamp(0.0, 1.0);
        }
        let orders = (0..k_seg - 1)
            .map(|k| if deltas[k + 1] > 0.0 { 1.0 } else { 0.0 })
            .collect();
        Some((deltas, orders))
    }

    /// Adds the encoding to `mip`, linking `sum(x_terms) = x` and `sum(y_terms) = y`.
    pub fn attach(
        &mut self,
        mip: &mut MixedIntegerProgram,
        x_terms: &[(usize, f64)],
        y_terms: &[(usize, f64)],
    ) -> IncrementalGroup {
        let k_seg = self.segments();
        let lp = &mut mip.lp;
        self.deltas = (0..k_seg).map(|_| lp.add_var(0.0, 0.0, 1.0)).collect();
        self.orders = (0..k_seg - 1).map(|_| lp.add_var(0.0, 0.0, 1.0)).collect();
        self.rows.clear();

        let mut xrow: Vec<(usize, f64)> = x_terms.to_vec();
        let mut yrow: Vec<(usize, f64)> = y_terms.to_vec();
        for k in 0..k_seg {
            xrow.push((
                self.deltas[k],
                -(self.breakpoints[k + 1] - self.breakpoints[k]),
            ));
            yrow.push((self.deltas[k], -(self.values[k + 1] - self.values[k])));
        }
        self.rows
            .push(lp.add_row(xrow, Sense::Eq, self.breakpoints[0]));
        self.rows.push(lp.add_row(yrow, Sense::Eq, self.values[0]));
        for k in 0..k_seg - 1 {
            let z = self.orders[k];
            self.rows
                .push(lp.add_row([(self.deltas[k + 1], 1.0), (z, -1.0)], Sense::Le, 0.0));
            self.rows
                .push(lp.add_row([(z, 1.0), (self.deltas[k], -1.0)], Sense::Le, 0.0));
        }
        mip.binaries.extend(self.orders.iter().copied());
        let group = IncrementalGroup {
            deltas: self.deltas.clone(),
            orders: self.orders.clone(),
            links: self.rows[..2].to_vec(),
        };
        mip.groups.push(group.clone());
        group
    }
}

/// Builds an incremental encoding of `f` sampled at `breakpoints` and attaches it to `mip`.
pub fn encode_pwl(
    mip: &mut MixedIntegerProgram,
    breakpoints: Vec<f64>,
    f: impl Fn(f64) -> f64,
    x_terms: &[(usize, f64)],
    y_terms: &[(usize, f64)],
) -> Result<PwlEncoding, PwlError> {
    let mut enc = PwlEncoding::from_fn(breakpoints, f)?;
    enc.attach(mip, x_terms, y_terms);
    Ok(enc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvecore::{solve_mip, LinearProgram, MipOptions};

    fn signed_square(x: f64) -> f64 {
        x * x.abs()
    }

    fn enc() -> PwlEncoding {
        PwlEncoding::from_fn(vec![-10.0, -5.0, 0.0, 5.0, 10.0], signed_square).unwrap()
    }

    #[test]
    fn exact_at_breakpoints() {
        assert_eq!(enc().interpolate(5.0), Some(25.0));
        assert_eq!(enc().interpolate(-10.0), Some(-100.0));
    }

    #[test]
    fn interpolates_between_breakpoints() {
        let y = enc().interpolate(2.5).unwrap();
        assert_eq!(y, 12.5);
        assert_eq!(y - signed_square(2.5), 6.25);
    }

    #[test]
    fn affine_function_is_reproduced() {
        let e = PwlEncoding::from_fn(vec![-3.0, -1.0, 0.5, 4.0], |x| x).unwrap();
        for x in [-3.0, -2.2, 0.0, 0.7, 3.9] {
            assert!((e.interpolate(x).unwrap() - x).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert_eq!(
            PwlEncoding::from_fn(vec![0.0, 0.0, 1.0], |x| x),
            Err(PwlError::NotIncreasing(1))
        );
        assert_eq!(
            PwlEncoding::from_fn(vec![0.0], |x| x),
            Err(PwlError::TooFewBreakpoints(1))
        );
    }

    #[test]
    fn encoded_mip_pins_value_to_interpolant() {
        for (x_val, sense) in [(2.5, 1.0), (2.5, -1.0), (-7.0, 1.0), (10.0, -1.0)] {
            let mut lp = LinearProgram::new();
            let x = lp.add_var(0.0, x_val, x_val);
            let y = lp.add_var(sense, f64::NEG_INFINITY, f64::INFINITY);
            let mut mip = MixedIntegerProgram::new(lp);
            let e = encode_pwl(
                &mut mip,
                vec![-10.0, -5.0, 0.0, 5.0, 10.0],
                signed_square,
                &[(x, 1.0)],
                &[(y, 1.0)],
            )
            .unwrap();
            let sol = solve_mip(&mip, &MipOptions::default(), None).unwrap();
            let got = sol.solution.unwrap().x[y];
            assert!(
                (got - e.interpolate(x_val).unwrap()).abs() < 1e-7,
                "x={x_val} sense={sense} y={got}"
            );
        }
    }

    #[test]
    fn convex_interpolant_overestimates() {
        let e = PwlEncoding::uniform(0.0, 10.0, 7, |x| x * x).unwrap();
        for i in 0..=1000 {
            let x = i as f64 / 100.0;
            assert!(e.interpolate(x).unwrap() - x * x >= -1e-12);
        }
    }

    #[test]
    fn assignment_is_fill_ordered() {
        let e = enc();
        let (d, z) = e.assignment(2.5).unwrap();
        assert_eq!(d, vec![1.0, 1.0, 0.5, 0.0]);
        assert_eq!(z, vec![1.0, 1.0, 0.0]);
    }
}
