use serde::{Deserialize, Serialize};

use super::tensor::Scalar;
use super::NnError;

/// Adam hyperparameters; defaults follow the training protocol
/// (lr 1e-4, beta1 0.9, beta2 0.999, eps 1e-8).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators, one pair per parameter group, plus
/// the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub params: AdamParams,
    pub step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Zero-initialized state shaped after the given parameter groups.
    pub fn new(params: AdamParams, group_sizes: &[usize]) -> Self {
        Self {
            params,
            step: 0,
            m: group_sizes.iter().map(|&s| vec![T::zero(); s]).collect(),
            v: group_sizes.iter().map(|&s| vec![T::zero(); s]).collect(),
        }
    }

    pub fn n_groups(&self) -> usize {
        self.m.len()
    }
}

/// One bias-corrected Adam update over named parameter groups. The step
/// counter increments before the update. A non-finite gradient aborts the
/// step with the offending group's name; parameters stay untouched.
pub fn adam_step<T: Scalar>(
    groups: &mut [(&str, &mut [T])],
    grads: &[&[T]],
    state: &mut AdamState<T>,
) -> Result<(), NnError> {
    assert_eq!(groups.len(), grads.len());
    assert_eq!(groups.len(), state.n_groups());
    for ((name, p), g) in groups.iter().zip(grads) {
        assert_eq!(p.len(), g.len(), "group {name} shape mismatch");
        if g.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteGradient(name.to_string()));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let b1 = T::from_f64_(state.params.beta1);
    let b2 = T::from_f64_(state.params.beta2);
    let one = T::one();
    let lr = T::from_f64_(state.params.lr);
    let eps = T::from_f64_(state.params.eps);
    let bc1 = one - b1.powi(t);
    let bc2 = one - b2.powi(t);

    for (gi, ((_, p), g)) in groups.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[gi];
        let v = &mut state.v[gi];
        for i in 0..p.len() {
            let gv = g[i];
            m[i] = b1 * m[i] + (one - b1) * gv;
            v[i] = b2 * v[i] + (one - b2) * gv * gv;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p[i] = p[i] - lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_about_lr() {
        let mut p = vec![1.0f64, -2.0, 0.5];
        let g = vec![0.3f64, -1.7, 4.0];
        let mut state = AdamState::new(AdamParams::default(), &[3]);
        let before = p.clone();
        {
            let mut groups = [("w", p.as_mut_slice())];
            adam_step(&mut groups, &[&g], &mut state).unwrap();
        }
        // Bias correction makes mhat = g, vhat = g^2 on step one, so the
        // update magnitude is lr * |g| / (|g| + eps) which is nearly lr.
        for i in 0..3 {
            let delta = (p[i] - before[i]).abs();
            assert!((delta - 1e-4).abs() < 1e-8, "delta {delta}");
            let expected_sign = -g[i].signum();
            assert_eq!((p[i] - before[i]).signum(), expected_sign);
        }
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_gradients_from_zero_state_are_a_fixed_point() {
        let mut p = vec![0.7f64; 8];
        let g = vec![0.0f64; 8];
        let mut state = AdamState::new(AdamParams::default(), &[8]);
        for _ in 0..5 {
            let mut groups = [("w", p.as_mut_slice())];
            adam_step(&mut groups, &[&g], &mut state).unwrap();
        }
        assert!(p.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn nan_gradient_aborts_without_touching_params() {
        let mut p = vec![1.0f64, 2.0];
        let g = vec![0.1f64, f64::NAN];
        let mut state = AdamState::new(AdamParams::default(), &[2]);
        let err = {
            let mut groups = [("fc1.w", p.as_mut_slice())];
            adam_step(&mut groups, &[&g], &mut state).unwrap_err()
        };
        assert!(matches!(err, NnError::NonFiniteGradient(name) if name == "fc1.w"));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(state.step, 0);
    }

    #[test]
    fn deterministic_across_runs() {
        let run = || {
            let mut p = vec![0.33f64, -0.9, 1.5];
            let mut state = AdamState::new(AdamParams::default(), &[3]);
            for step in 1..=50 {
                let g: Vec<f64> = p.iter().map(|&v| v * 0.1 + step as f64 * 1e-3).collect();
                let mut groups = [("w", p.as_mut_slice())];
                adam_step(&mut groups, &[&g], &mut state).unwrap();
            }
            p
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }
}
