//! Adam with bias correction.

use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-15;

/// Moment buffers for one parameter array.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(Error::contract(format!(
            "adam shapes differ: params {}, grads {}, moments {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        s.m = vec![0.5, 0.5];
        s.v = vec![0.2, 0.2];
        s.step = 3;
        let mut q = p.clone();
        adam_step(&mut q, &[0.0, 0.0], &mut s, 0.1).unwrap();
        assert_eq!(s.m, vec![0.45, 0.45]);
        assert!((s.v[0] - 0.1998).abs() < 1e-15);
        // the update comes from momentum alone
        assert!(q[0] < p[0]);
        p = vec![1.0];
        let mut fresh = AdamState::new(1);
        adam_step(&mut p, &[0.0], &mut fresh, 0.1).unwrap();
        assert_eq!(p, vec![1.0]);
    }

    #[test]
    fn first_step_is_bias_corrected() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, 0.1).unwrap();
        assert!((p[0] + 0.1 / (1.0 + EPSILON)).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let run = || {
            let mut p = vec![0.3, -0.7, 1.1];
            let mut s = AdamState::new(3);
            for k in 0..50 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x + 0.01 * k as f64).collect();
                adam_step(&mut p, &g, &mut s, 0.05).unwrap();
            }
            (p, s)
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(sa, sb);
        let mut s = AdamState::new(2);
        assert!(adam_step(&mut [0.0; 3], &[0.0; 3], &mut s, 0.1).is_err());
    }
}
