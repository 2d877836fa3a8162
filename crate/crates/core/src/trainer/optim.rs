use rolemix_tensor::{ParamStore, Scalar, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmsPropConfig {
    pub lr: f64,
    pub alpha: f64,
    pub eps: f64,
    /// Global gradient-norm clip applied before the update.
    pub clip_norm: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            alpha: 0.99,
            eps: 1e-5,
            clip_norm: 10.0,
        }
    }
}

/// What one call to [`RmsProp::step`] did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    /// False when the gradient was not finite and nothing changed.
    pub applied: bool,
}

/// RMSprop without momentum or weight decay:
/// `m ← α m + (1 − α) g²`, `θ ← θ − lr · g / (√m + ε)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsProp<S> {
    pub config: RmsPropConfig,
    square_avg: Vec<Tensor<S>>,
}

impl<S: Scalar> RmsProp<S> {
    pub fn new(config: RmsPropConfig, store: &ParamStore<S>) -> Self {
        Self {
            config,
            square_avg: store
                .ids()
                .map(|id| Tensor::zeros(store.value(id).shape().to_vec()))
                .collect(),
        }
    }

    /// Applies the gradients held in `store`. Non-finite gradients skip the
    /// update entirely (and are logged).
    pub fn step(&mut self, store: &mut ParamStore<S>) -> StepReport {
        if !store.grads_finite() {
            log::warn!("non-finite gradient, optimiser step skipped");
            return StepReport {
                grad_norm: f64::NAN,
                applied: false,
            };
        }
        let norm = store.grad_sq_norm().to_f64_lossy().sqrt();
        let clip = self.config.clip_norm;
        let factor = if clip > 0.0 && norm > clip { clip / norm } else { 1.0 };
        let (lr, alpha, eps) = (S::of(self.config.lr), S::of(self.config.alpha), S::of(self.config.eps));
        let one = S::one();
        let scale = S::of(factor);
        let ids: Vec<_> = store.ids().collect();
        for (id, m) in ids.into_iter().zip(&mut self.square_avg) {
            let (value, grad) = store.value_and_grad_mut(id);
            for ((theta, &g), m) in value.data_mut().iter_mut().zip(grad.data()).zip(m.data_mut()) {
                let g = g * scale;
                *m = alpha * *m + (one - alpha) * g * g;
                *theta = *theta - lr * g / (m.sqrt() + eps);
            }
        }
        StepReport {
            grad_norm: norm,
            applied: true,
        }
    }
}
