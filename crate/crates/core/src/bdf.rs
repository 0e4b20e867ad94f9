//! Backward-differentiation time discretization.
//!
//! The semi-discretized rod equations replace every time derivative with
//! `x_t = c0 x + x_h`, where `x_h` is a weighted sum of the values at the
//! two previous time steps. Second-order BDF is used in steady operation;
//! the first step after start-up falls back to implicit Euler, which needs
//! a single history value.

use crate::error::{Error, Result};

/// Coefficients of one implicit time-discretization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdfCoeffs {
    /// Weight of the current value (1/s).
    pub c0: f64,
    /// Weights of the previous two values (1/s): `x_h = w1 x^{i-1} + w2 x^{i-2}`.
    pub weights: (f64, f64),
}

impl BdfCoeffs {
    /// Second-order BDF: `x_t = (1.5 x - 2 x^{i-1} + 0.5 x^{i-2}) / dt`.
    pub fn bdf2(dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidStep(dt));
        }
        Ok(Self {
            c0: 1.5 / dt,
            weights: (-2.0 / dt, 0.5 / dt),
        })
    }

    /// Implicit Euler for the start-up step: `x_t = (x - x^{i-1}) / dt`.
    pub fn startup_euler(dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidStep(dt));
        }
        Ok(Self {
            c0: 1.0 / dt,
            weights: (-1.0 / dt, 0.0),
        })
    }

    /// Degenerate scheme for static problems: every reconstructed time
    /// derivative is identically zero.
    pub fn statics() -> Self {
        Self {
            c0: 0.0,
            weights: (0.0, 0.0),
        }
    }

    /// Reconstructs `x_t` from the current value and the stored history.
    #[inline]
    pub fn derivative(&self, x: f64, x_prev1: f64, x_prev2: f64) -> f64 {
        self.c0 * x + self.weights.0 * x_prev1 + self.weights.1 * x_prev2
    }
}

/// Spec-facing alias for the coefficient constructor: returns `(c0, weights)`.
pub fn bdf2_coefficients(dt: f64) -> Result<(f64, (f64, f64))> {
    let c = BdfCoeffs::bdf2(dt)?;
    Ok((c.c0, c.weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn coefficients_for_dt_005() {
        let (c0, _) = bdf2_coefficients(0.05).unwrap();
        assert_relative_eq!(c0, 30.0, epsilon = 1e-12);
    }

    #[test]
    fn coefficients_for_unit_step() {
        let (c0, (w1, w2)) = bdf2_coefficients(1.0).unwrap();
        assert_eq!((c0, w1, w2), (1.5, -2.0, 0.5));
    }

    #[test]
    fn constant_signal_has_zero_derivative() {
        let c = BdfCoeffs::bdf2(0.1).unwrap();
        let k = 4.2;
        assert_relative_eq!(c.derivative(k, k, k), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_nonpositive_step() {
        assert!(matches!(bdf2_coefficients(0.0), Err(Error::InvalidStep(_))));
        assert!(matches!(bdf2_coefficients(-0.5), Err(Error::InvalidStep(_))));
        assert!(BdfCoeffs::startup_euler(0.0).is_err());
    }

    #[test]
    fn startup_euler_is_first_order_difference() {
        let c = BdfCoeffs::startup_euler(0.2).unwrap();
        assert_relative_eq!(c.derivative(1.4, 1.0, 123.0), 2.0, epsilon = 1e-12);
    }

    proptest! {
        // BDF2 differentiates quadratics exactly.
        #[test]
        fn exact_on_quadratics(
            a in -5.0..5.0f64, b in -5.0..5.0f64, cc in -5.0..5.0f64,
            t in 0.2..10.0f64, dt in 1e-3..0.5f64,
        ) {
            let x = |t: f64| a * t * t + b * t + cc;
            let coeffs = BdfCoeffs::bdf2(dt).unwrap();
            let got = coeffs.derivative(x(t), x(t - dt), x(t - 2.0 * dt));
            let want = 2.0 * a * t + b;
            prop_assert!((got - want).abs() < 1e-8 * (1.0 + want.abs()));
        }
    }
}
