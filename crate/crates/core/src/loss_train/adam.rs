use super::TrainError;
use crate::autodiff::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, hyper: &AdamConfig) -> Result<(), TrainError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TrainError::Shape(format!(
            "{} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = (0..params.len()).find(|&i| params[i].shape() != grads[i].shape() || params[i].shape() != state.m[i].shape()) {
        return Err(TrainError::Shape(format!(
            "tensor {i}: param {:?}, grad {:?}",
            params[i].shape(),
            grads[i].shape()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - hyper.beta1.powi(t);
    let c2 = 1.0 - hyper.beta2.powi(t);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let pd = p.data_mut();
        let (md, vd) = (m.data_mut(), v.data_mut());
        for (j, &gj) in g.data().iter().enumerate() {
            md[j] = hyper.beta1 * md[j] + (1.0 - hyper.beta1) * gj;
            vd[j] = hyper.beta2 * vd[j] + (1.0 - hyper.beta2) * gj * gj;
            let m_hat = md[j] / c1;
            let v_hat = vd[j] / c2;
            pd[j] -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![Tensor::vector(vec![1.0, -2.0])];
        let g = vec![Tensor::zeros(&[2])];
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p[0].data(), &[1.0, -2.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![Tensor::scalar(0.0)];
        let g = vec![Tensor::scalar(1.0)];
        let mut s = AdamState::new(&p);
        let hyper = AdamConfig {
            learning_rate: 0.1,
            ..Default::default()
        };
        adam_step(&mut p, &g, &mut s, &hyper).unwrap();
        assert!((p[0].item() + 0.1).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![Tensor::zeros(&[2])];
        let g = vec![Tensor::zeros(&[3])];
        let mut s = AdamState::new(&p);
        assert!(adam_step(&mut p, &g, &mut s, &AdamConfig::default()).is_err());
    }
}
