//! Adam optimizer over flat parameter tensors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamParams {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamParams {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Optimizer state: first/second moment per tensor plus a shared step count.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub params: AdamParams,
    step: u64,
    slots: Vec<Slot>,
}

impl AdamState {
    pub fn new(tensor_sizes: &[usize], params: AdamParams) -> Result<Self> {
        if params.learning_rate < 0.0 || !params.learning_rate.is_finite() {
            return Err(Error::InvalidInput(format!(
                "learning rate must be finite and >= 0, got {}",
                params.learning_rate
            )));
        }
        Ok(AdamState {
            params,
            step: 0,
            slots: tensor_sizes
                .iter()
                .map(|&n| Slot {
                    m: vec![0.0; n],
                    v: vec![0.0; n],
                })
                .collect(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. Frozen tensors are skipped entirely:
    /// neither their parameters nor their moments move.
    pub fn step(
        &mut self,
        tensors: &mut [&mut [f64]],
        grads: &[&[f64]],
        frozen: &[bool],
    ) -> Result<()> {
        if tensors.len() != self.slots.len()
            || grads.len() != self.slots.len()
            || frozen.len() != self.slots.len()
        {
            return Err(Error::InvalidInput(format!(
                "adam step expects {} tensors, got {} params / {} grads / {} freeze flags",
                self.slots.len(),
                tensors.len(),
                grads.len(),
                frozen.len()
            )));
        }
        for ((t, g), slot) in tensors.iter().zip(grads).zip(&self.slots) {
            if t.len() != slot.m.len() || g.len() != slot.m.len() {
                return Err(Error::InvalidInput(format!(
                    "adam tensor size mismatch: state {}, params {}, grads {}",
                    slot.m.len(),
                    t.len(),
                    g.len()
                )));
            }
        }

        self.step += 1;
        let AdamParams {
            learning_rate: lr,
            beta1,
            beta2,
            epsilon,
        } = self.params;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);

        for ((tensor, grad), (slot, &is_frozen)) in tensors
            .iter_mut()
            .zip(grads)
            .zip(self.slots.iter_mut().zip(frozen))
        {
            if is_frozen {
                continue;
            }
            for (k, (&g, p)) in grad.iter().zip(tensor.iter_mut()).enumerate() {
                let m = &mut slot.m[k];
                let v = &mut slot.v[k];
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                if lr != 0.0 {
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_steps(initial: &[f64], grads: &[Vec<f64>], lr: f64) -> Vec<f64> {
        let mut p = initial.to_vec();
        let mut state = AdamState::new(&[p.len()], AdamParams::with_lr(lr)).unwrap();
        for g in grads {
            let mut refs: Vec<&mut [f64]> = vec![&mut p];
            state.step(&mut refs, &[g.as_slice()], &[false]).unwrap();
        }
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let p0 = vec![0.5, -1.25, 3.0];
        let p = run_steps(&p0, &[vec![0.0; 3], vec![0.0; 3]], 1e-2);
        assert_eq!(p, p0);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let lr = 1e-3;
        let p = run_steps(&[1.0, 1.0], &[vec![0.4, -7.0]], lr);
        // Bias-corrected first step is lr * g / (|g| + eps') ~ lr * sign(g).
        assert!((p[0] - (1.0 - lr)).abs() < 1e-6);
        assert!((p[1] - (1.0 + lr)).abs() < 1e-6);
    }

    #[test]
    fn identical_calls_are_deterministic() {
        let grads = vec![vec![0.3, -0.2], vec![-0.8, 0.05], vec![0.1, 0.1]];
        let a = run_steps(&[0.0, 0.0], &grads, 1e-2);
        let b = run_steps(&[0.0, 0.0], &grads, 1e-2);
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_tensor_is_bit_identical() {
        let mut p1 = vec![0.7; 4];
        let mut p2 = vec![-0.3; 4];
        let snapshot = p2.clone();
        let mut state = AdamState::new(&[4, 4], AdamParams::with_lr(1e-2)).unwrap();
        let g = vec![0.5; 4];
        for _ in 0..10 {
            let mut refs: Vec<&mut [f64]> = vec![&mut p1, &mut p2];
            state
                .step(&mut refs, &[g.as_slice(), g.as_slice()], &[false, true])
                .unwrap();
        }
        assert_eq!(p2, snapshot);
        assert!(p1.iter().all(|&v| v != 0.7));
    }

    #[test]
    fn shape_mismatch_is_invalid_input() {
        let mut p = vec![0.0; 3];
        let mut state = AdamState::new(&[3], AdamParams::with_lr(1e-3)).unwrap();
        let g = vec![0.0; 2];
        let mut refs: Vec<&mut [f64]> = vec![&mut p];
        assert!(state.step(&mut refs, &[g.as_slice()], &[false]).is_err());
    }
}
