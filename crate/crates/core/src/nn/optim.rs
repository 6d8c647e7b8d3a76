use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp, NnError, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Adam,
    /// Adam with decoupled weight decay.
    AdamW,
}

/// Adam / AdamW state for one network. Hyperparameters are kept in `f64`;
/// the moments share the network's precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Optimizer<T = f64> {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
    pub weight_decay: f64,
    pub step_count: u64,
    pub first_moment: Gradients<T>,
    pub second_moment: Gradients<T>,
}

impl<T: Scalar> Optimizer<T> {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS_HAT: f64 = 1e-8;

    pub fn adam(mlp: &Mlp<T>, learning_rate: f64) -> Self {
        Self::build(OptimizerKind::Adam, mlp, learning_rate, 0.0)
    }

    pub fn adamw(mlp: &Mlp<T>, learning_rate: f64, weight_decay: f64) -> Self {
        Self::build(OptimizerKind::AdamW, mlp, learning_rate, weight_decay)
    }

    fn build(kind: OptimizerKind, mlp: &Mlp<T>, learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            kind,
            learning_rate,
            beta1: Self::BETA1,
            beta2: Self::BETA2,
            eps_hat: Self::EPS_HAT,
            weight_decay,
            step_count: 0,
            first_moment: Gradients::zeros_like(mlp),
            second_moment: Gradients::zeros_like(mlp),
        }
    }

    /// Layer sizes of the network these moments track.
    pub fn layer_sizes(&self) -> Vec<usize> {
        self.first_moment.layer_sizes()
    }

    /// Applies one update to `mlp`. Shapes and finiteness are checked before
    /// anything is written, so a failed step leaves both `mlp` and `self`
    /// untouched.
    pub fn step(&mut self, mlp: &mut Mlp<T>, grads: &Gradients<T>) -> Result<(), NnError> {
        let sizes = mlp.layer_sizes();
        if grads.layer_sizes() != sizes
            || self.first_moment.layer_sizes() != sizes
            || self.second_moment.layer_sizes() != sizes
        {
            return Err(NnError::ArchitectureMismatch {
                expected: sizes,
                actual: grads.layer_sizes(),
            });
        }
        for (layer, g) in grads.layers.iter().enumerate() {
            if !g.weight.iter().all(|v| v.is_finite()) {
                return Err(NnError::NonFiniteGradient {
                    layer,
                    tensor: "weight",
                });
            }
            if !g.bias.iter().all(|v| v.is_finite()) {
                return Err(NnError::NonFiniteGradient {
                    layer,
                    tensor: "bias",
                });
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let bc1 = T::cast(1.0 - b1.powi(t));
        let bc2 = T::cast(1.0 - b2.powi(t));
        let decay = T::cast(match self.kind {
            OptimizerKind::Adam => 0.0,
            OptimizerKind::AdamW => self.learning_rate * self.weight_decay,
        });
        let (lr, eps) = (T::cast(self.learning_rate), T::cast(self.eps_hat));
        let (keep1, keep2) = (T::cast(b1), T::cast(b2));
        let (mix1, mix2) = (T::cast(1.0 - b1), T::cast(1.0 - b2));
        // Moments of units whose gradient stays at zero decay geometrically;
        // they are flushed once they leave the normal range, since subnormal
        // arithmetic is far slower than normal on common hardware.
        let tiny = T::min_positive_value();
        let flush = |x: T| if x.abs() < tiny { T::zero() } else { x };
        let update = |p: &mut T, m: &mut T, v: &mut T, g: T| {
            *m = flush(keep1 * *m + mix1 * g);
            *v = flush(keep2 * *v + mix2 * g * g);
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= decay * *p;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (((layer, g), m), v) in mlp
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first_moment.layers)
            .zip(&mut self.second_moment.layers)
        {
            Zip::from(&mut layer.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .and(&g.weight)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Dense, OutputActivation};
    use ndarray::array;

    type Mlp = super::Mlp<f64>;

    fn scalar_net(w: f64) -> Mlp {
        Mlp::from_layers(
            vec![Dense {
                weight: array![[w]],
                bias: array![0.0],
            }],
            OutputActivation::Identity,
        )
        .unwrap()
    }

    fn scalar_grad(g: f64) -> Gradients {
        Gradients {
            layers: vec![Dense {
                weight: array![[g]],
                bias: array![0.0],
            }],
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::adam(&net, 0.001);
        assert_eq!(opt.weight_decay, 0.0);
        opt.step(&mut net, &scalar_grad(0.0)).unwrap();
        assert_eq!(net.layers()[0].weight[[0, 0]], 1.0);
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::adam(&net, 0.001);
        opt.step(&mut net, &scalar_grad(1.0)).unwrap();
        // m_hat = 1, v_hat = 1 after bias correction.
        let want = 1.0 - 0.001 * 1.0 / (1.0 + 1e-8);
        let got = net.layers()[0].weight[[0, 0]];
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        assert!((got - 0.999).abs() < 1e-10);
    }

    #[test]
    fn adamw_decays_with_zero_gradient() {
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::adamw(&net, 0.001, 0.005);
        opt.step(&mut net, &scalar_grad(0.0)).unwrap();
        let got = net.layers()[0].weight[[0, 0]];
        assert!((got - 0.999995).abs() < 1e-15, "{got}");
        // bias is zero so decay leaves it at zero
        assert_eq!(net.layers()[0].bias[0], 0.0);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_mutation() {
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::adam(&net, 0.001);
        let err = opt.step(&mut net, &scalar_grad(f64::NAN)).unwrap_err();
        assert!(matches!(err, NnError::NonFiniteGradient { layer: 0, .. }));
        assert_eq!(net.layers()[0].weight[[0, 0]], 1.0);
        assert_eq!(opt.step_count, 0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::adam(&net, 0.001);
        let other = Mlp::new(&[2, 1], OutputActivation::Identity, 0).unwrap();
        let grads = Gradients::zeros_like(&other);
        assert!(matches!(
            opt.step(&mut net, &grads),
            Err(NnError::ArchitectureMismatch { .. })
        ));
    }

    #[test]
    fn decayed_moments_are_flushed_to_zero() {
        let mut net: super::Mlp<f32> = super::Mlp::from_layers(
            vec![Dense {
                weight: array![[1.0f32]],
                bias: array![0.0f32],
            }],
            OutputActivation::Identity,
        )
        .unwrap();
        let mut opt = Optimizer::adam(&net, 0.001);
        let grad = |g: f32| Gradients {
            layers: vec![Dense {
                weight: array![[g]],
                bias: array![0.0f32],
            }],
        };
        opt.step(&mut net, &grad(1.0)).unwrap();
        for _ in 0..2000 {
            opt.step(&mut net, &grad(0.0)).unwrap();
            let m = opt.first_moment.layers[0].weight[[0, 0]];
            assert!(!m.is_subnormal(), "{m:e}");
        }
        assert_eq!(opt.first_moment.layers[0].weight[[0, 0]], 0.0);
        assert!(opt.second_moment.layers[0].weight[[0, 0]] > 0.0);
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let run = || {
            let mut net = Mlp::new(&[3, 4, 2], OutputActivation::Identity, 9).unwrap();
            let mut opt = Optimizer::adamw(&net, 0.01, 0.005);
            for i in 0..10 {
                let (g, _) = net
                    .backward(&[0.1 * i as f64, -0.2, 0.3], &[1.0, -1.0])
                    .unwrap();
                opt.step(&mut net, &g).unwrap();
            }
            net.fingerprint()
        };
        assert_eq!(run(), run());
    }
}
