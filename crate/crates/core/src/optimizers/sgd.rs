/// Momentum buffer for [`sgd_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub velocity: Vec<f64>,
}

impl SgdState {
    pub fn new(len: usize) -> Self {
        SgdState {
            velocity: vec![0.0; len],
        }
    }
}

/// `v ← momentum·v + (grad + wd·params)`, `params ← params − lr·v`.
pub fn sgd_step(params: &mut [f64], grad: &[f64], lr: f64, momentum: f64, wd: f64, state: &mut SgdState) {
    assert_eq!(params.len(), grad.len(), "gradient length");
    assert_eq!(params.len(), state.velocity.len(), "momentum buffer length");
    for ((p, g), v) in params.iter_mut().zip(grad).zip(state.velocity.iter_mut()) {
        *v = momentum * *v + (g + wd * *p);
        *p -= lr * *v;
    }
}
