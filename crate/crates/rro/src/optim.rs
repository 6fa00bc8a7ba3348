//! ADAM optimizer and the augmented-Lagrangian multiplier controller.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Bias-corrected ADAM state. Descends the supplied gradient.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamParams,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamParams, param_len: usize) -> Self {
        Self {
            config,
            first_moment: vec![0.0; param_len],
            second_moment: vec![0.0; param_len],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One descent step `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() || grad.len() != params.len() {
            return Err(Error::ShapeMismatch {
                what: "adam step",
                expected: self.first_moment.len(),
                got: if params.len() != self.first_moment.len() {
                    params.len()
                } else {
                    grad.len()
                },
            });
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: "gradient",
                index: i,
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.first_moment[i] = c.beta1 * self.first_moment[i] + (1.0 - c.beta1) * g;
            self.second_moment[i] = c.beta2 * self.second_moment[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.first_moment[i] / bias1;
            let v_hat = self.second_moment[i] / bias2;
            params[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
        }
        Ok(())
    }
}

/// Multiplier and penalty weight for the Wasserstein-ball constraint.
///
/// After each update window: `lambda += mu * c` and `mu *= growth`, so the
/// penalty weight grows geometrically until the constraint error vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangeState {
    pub lambda: f64,
    pub mu: f64,
    pub growth: f64,
    /// Multiplier update period in inner iterations.
    pub update_period: usize,
}

impl LagrangeState {
    pub fn new(lambda: f64, mu: f64, growth: f64, update_period: usize) -> Result<Self> {
        if lambda < 0.0 || !(mu > 0.0) || !(growth > 1.0) || update_period == 0 {
            return Err(Error::InvalidSpec {
                what: "Lagrange state",
                why: format!(
                    "need lambda >= 0, mu > 0, growth > 1, period > 0; got \
                     lambda={lambda}, mu={mu}, growth={growth}, period={update_period}"
                ),
            });
        }
        Ok(Self {
            lambda,
            mu,
            growth,
            update_period,
        })
    }

    /// Defaults used by the training loops: lambda 1, mu 10, growth 1.5,
    /// update every 50 iterations.
    pub fn standard() -> Self {
        Self {
            lambda: 1.0,
            mu: 10.0,
            growth: 1.5,
            update_period: 50,
        }
    }

    pub fn update(&mut self, constraint_err: f64) {
        debug_assert!(constraint_err >= 0.0);
        self.lambda += self.mu * constraint_err;
        self.mu *= self.growth;
    }
}

/// `rdeu + lambda * c + (mu / 2) * c^2`.
pub fn lagrangian_value(rdeu_val: f64, constraint_err: f64, state: &LagrangeState) -> f64 {
    rdeu_val + state.lambda * constraint_err + 0.5 * state.mu * constraint_err * constraint_err
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_step_is_signed_learning_rate() {
        let mut adam = AdamState::new(AdamParams::default(), 3);
        let mut params = vec![1.0, 2.0, 3.0];
        adam.step(&mut params, &[5.0, -2.0, 0.5]).unwrap();
        let lr = 1e-3;
        assert!((params[0] - (1.0 - lr)).abs() < 1e-8);
        assert!((params[1] - (2.0 + lr)).abs() < 1e-8);
        assert!((params[2] - (3.0 - lr)).abs() < 1e-8);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut adam = AdamState::new(AdamParams::default(), 2);
        let mut params = vec![0.25, -0.75];
        for _ in 0..50 {
            adam.step(&mut params, &[0.0, 0.0]).unwrap();
        }
        assert_eq!(params, vec![0.25, -0.75]);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut adam = AdamState::new(AdamParams::default(), 2);
            let mut params = vec![0.1, 0.2];
            for k in 0..100 {
                let g = [(k as f64 * 0.1).sin(), (k as f64 * 0.2).cos()];
                adam.step(&mut params, &g).unwrap();
            }
            params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_reports_index() {
        let mut adam = AdamState::new(AdamParams::default(), 3);
        let mut params = vec![0.0; 3];
        let err = adam.step(&mut params, &[0.0, f64::NAN, 0.0]).unwrap_err();
        match err {
            Error::NonFinite { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut adam = AdamState::new(AdamParams::default(), 3);
        let mut params = vec![0.0; 2];
        assert!(adam.step(&mut params, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn multiplier_update_examples() {
        let mut s = LagrangeState::new(1.0, 10.0, 1.5, 50).unwrap();
        s.update(0.0);
        assert_eq!(s.lambda, 1.0);
        assert_eq!(s.mu, 15.0);

        let mut s = LagrangeState::new(1.0, 10.0, 1.5, 50).unwrap();
        s.update(0.2);
        assert!((s.lambda - 3.0).abs() < 1e-15);
        assert_eq!(s.mu, 15.0);

        // repeated zero error: lambda constant, mu geometric
        let mut s = LagrangeState::new(1.0, 10.0, 1.5, 50).unwrap();
        for _ in 0..8 {
            s.update(0.0);
        }
        assert_eq!(s.lambda, 1.0);
        assert!((s.mu - 10.0 * 1.5f64.powi(8)).abs() < 1e-9);
    }

    #[test]
    fn lagrangian_value_examples() {
        let s = LagrangeState::new(1.0, 10.0, 1.5, 50).unwrap();
        assert_eq!(lagrangian_value(-0.37, 0.0, &s), -0.37);
        assert!((lagrangian_value(0.0, 1.0, &s) - 6.0).abs() < 1e-15);
        let s2 = LagrangeState::new(0.0, 2.0, 1.5, 50).unwrap();
        assert!((lagrangian_value(-2.0, 3.0, &s2) - 7.0).abs() < 1e-15);
    }

    #[test]
    fn lagrange_invalid_specs() {
        assert!(LagrangeState::new(-1.0, 10.0, 1.5, 50).is_err());
        assert!(LagrangeState::new(1.0, 0.0, 1.5, 50).is_err());
        assert!(LagrangeState::new(1.0, 10.0, 1.0, 50).is_err());
        assert!(LagrangeState::new(1.0, 10.0, 1.5, 0).is_err());
    }

    #[test]
    fn augmented_lagrangian_drives_constraint_down() {
        // minimize (x - 2)^2 subject to x <= 1; constrained minimizer is 1
        let mut x = 0.0f64;
        let mut lagrange = LagrangeState::new(0.0, 1.0, 2.0, 1).unwrap();
        let mut updates = 0;
        let mut c = f64::INFINITY;
        while updates < 20 {
            let mut adam = AdamState::new(AdamParams::with_learning_rate(0.05), 1);
            for _ in 0..400 {
                let viol = (x - 1.0).max(0.0);
                let grad_obj = 2.0 * (x - 2.0);
                let grad_pen = if viol > 0.0 {
                    lagrange.lambda + lagrange.mu * viol
                } else {
                    0.0
                };
                let mut p = [x];
                adam.step(&mut p, &[grad_obj + grad_pen]).unwrap();
                x = p[0];
            }
            c = (x - 1.0).max(0.0);
            lagrange.update(c);
            updates += 1;
            if c < 1e-4 {
                break;
            }
        }
        assert!(c < 1e-4, "constraint error {c} after {updates} updates");
        assert!((x - 1.0).abs() < 1e-2, "x = {x}");
    }

    proptest! {
        #[test]
        fn lagrangian_monotone_in_constraint(
            r in -10.0f64..10.0,
            c1 in 0.0f64..5.0,
            dc in 0.0f64..5.0,
            lambda in 0.0f64..10.0,
            mu in 0.1f64..10.0,
        ) {
            let s = LagrangeState::new(lambda, mu, 1.5, 50).unwrap();
            prop_assert!(lagrangian_value(r, c1 + dc, &s) >= lagrangian_value(r, c1, &s));
        }

        #[test]
        fn mu_never_decreases(updates in prop::collection::vec(0.0f64..2.0, 1..30)) {
            let mut s = LagrangeState::standard();
            let mut prev_mu = s.mu;
            let mut prev_lambda = s.lambda;
            for c in updates {
                s.update(c);
                prop_assert!(s.mu >= prev_mu);
                prop_assert!(s.lambda >= prev_lambda);
                prev_mu = s.mu;
                prev_lambda = s.lambda;
            }
        }
    }
}
