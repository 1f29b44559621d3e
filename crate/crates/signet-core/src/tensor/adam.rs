//! Adam optimizer with bias correction, coupled L2 decay, and global norm clipping.

use super::{Tensor, TensorError};

/// Optimizer state: one pair of moment buffers per parameter, in parameter order.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Coupled L2 term: contributes the gradient of `weight_decay * ||θ||²`.
    pub weight_decay: f64,
    /// Global gradient-norm ceiling applied before the moment update.
    pub clip: Option<f64>,
}

impl AdamState {
    pub fn new(param_shapes: &[&[usize]], learning_rate: f64) -> Self {
        AdamState {
            m: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
            clip: None,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update over a flat parameter list.
///
/// `names` is used only for error reporting; it must align with `params`.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    names: &[String],
) -> Result<(), TensorError> {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());

    for (k, g) in grads.iter().enumerate() {
        if !g.is_finite() {
            return Err(TensorError::NonFiniteGradient {
                name: names.get(k).cloned().unwrap_or_else(|| format!("param[{k}]")),
            });
        }
        if g.shape() != params[k].shape() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                lhs: params[k].shape().to_vec(),
                rhs: g.shape().to_vec(),
            });
        }
    }

    let mut scale = 1.0;
    if let Some(clip) = state.clip {
        let norm = grads.iter().map(|g| g.sq_l2()).sum::<f64>().sqrt();
        if norm > clip {
            scale = clip / norm;
        }
    }

    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);

    for (k, param) in params.iter_mut().enumerate() {
        let m = state.m[k].data_mut();
        let v = state.v[k].data_mut();
        let g = grads[k].data();
        let p = param.data_mut();
        for j in 0..p.len() {
            // gradient of weight_decay * ||θ||² is 2λθ
            let gj = g[j] * scale + 2.0 * state.weight_decay * p[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p[j] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut params = vec![Tensor::vector(vec![1.0, -2.0, 3.0])];
        let grads = vec![Tensor::vector(vec![0.0, 0.0, 0.0])];
        let mut state = AdamState::new(&[&[3]], 0.1);
        adam_step(&mut params, &grads, &mut state, &names(1)).unwrap();
        assert_eq!(params[0].data(), &[1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_is_bias_corrected() {
        // constant gradient 1, lr=0.1: bias correction makes the first step ≈ lr
        let mut params = vec![Tensor::scalar(5.0)];
        let grads = vec![Tensor::scalar(1.0)];
        let mut state = AdamState::new(&[&[1]], 0.1);
        adam_step(&mut params, &grads, &mut state, &names(1)).unwrap();
        assert!((params[0].data()[0] - 4.9).abs() < 1e-6);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn clip_matches_prescaled_gradients() {
        let g = vec![6.0, 8.0]; // norm 10
        let mut a = vec![Tensor::vector(vec![1.0, 1.0])];
        let mut sa = AdamState::new(&[&[2]], 0.05);
        sa.clip = Some(1.0);
        adam_step(&mut a, &[Tensor::vector(g.clone())], &mut sa, &names(1)).unwrap();

        let mut b = vec![Tensor::vector(vec![1.0, 1.0])];
        let mut sb = AdamState::new(&[&[2]], 0.05);
        let scaled: Vec<f64> = g.iter().map(|x| x * 0.1).collect();
        adam_step(&mut b, &[Tensor::vector(scaled)], &mut sb, &names(1)).unwrap();

        for (x, y) in a[0].data().iter().zip(b[0].data()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn nonfinite_gradient_names_parameter() {
        let mut params = vec![Tensor::scalar(1.0), Tensor::scalar(2.0)];
        let grads = vec![Tensor::scalar(0.0), Tensor::scalar(f64::NAN)];
        let mut state = AdamState::new(&[&[1], &[1]], 0.1);
        let err = adam_step(&mut params, &grads, &mut state, &names(2)).unwrap_err();
        assert!(err.to_string().contains("p1"));
    }

    #[test]
    fn determinism() {
        let run = || {
            let mut params = vec![Tensor::vector(vec![0.5, -0.5])];
            let mut state = AdamState::new(&[&[2]], 0.01);
            for _ in 0..10 {
                let grads = vec![Tensor::vector(vec![0.3, -0.7])];
                adam_step(&mut params, &grads, &mut state, &names(1)).unwrap();
            }
            params[0].data().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn coupled_decay_pulls_toward_zero() {
        let mut params = vec![Tensor::scalar(1.0)];
        let grads = vec![Tensor::scalar(0.0)];
        let mut state = AdamState::new(&[&[1]], 0.1);
        state.weight_decay = 0.01;
        adam_step(&mut params, &grads, &mut state, &names(1)).unwrap();
        assert!(params[0].data()[0] < 1.0);
    }
}
