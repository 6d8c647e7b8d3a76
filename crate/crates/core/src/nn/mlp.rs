use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Scalar};

/// Activation applied after the last layer. Hidden layers are always ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OutputActivation {
    Identity,
    /// `bound * tanh(z)`, keeping every output in `[-bound, bound]`.
    ScaledTanh(f64),
}

/// One affine layer. `weight` has shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dense<T = f64> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Per-layer tensors shaped like an [`Mlp`]'s parameters. Used for gradients
/// and optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GradientsRepr<T>", bound = "T: Scalar")]
pub struct Gradients<T = f64> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(mlp: &Mlp<T>) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| Dense::zeros(l.in_dim(), l.out_dim()))
                .collect(),
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        sizes_of(&self.layers)
    }

    /// Iterates over every scalar, layer by layer, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
    }
}

/// Activations recorded by [`Mlp::forward_batch`], consumed by
/// [`Mlp::backward_batch`]. `activations[0]` is the input and
/// `activations[k + 1]` is the output of layer `k`.
#[derive(Debug, Clone)]
pub struct ForwardCache<T = f64> {
    pub activations: Vec<Array2<T>>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &Array2<T> {
        self.activations
            .last()
            .expect("cache holds at least the input")
    }
}

/// Multilayer perceptron with ReLU between layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr<T>", bound = "T: Scalar")]
pub struct Mlp<T = f64> {
    layers: Vec<Dense<T>>,
    output: OutputActivation,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct GradientsRepr<T> {
    layers: Vec<Dense<T>>,
}

impl<T: Scalar> TryFrom<GradientsRepr<T>> for Gradients<T> {
    type Error = NnError;

    fn try_from(r: GradientsRepr<T>) -> Result<Self, NnError> {
        check_chain(&r.layers)?;
        Ok(Self { layers: r.layers })
    }
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct MlpRepr<T> {
    layers: Vec<Dense<T>>,
    output: OutputActivation,
}

impl<T: Scalar> TryFrom<MlpRepr<T>> for Mlp<T> {
    type Error = NnError;

    fn try_from(r: MlpRepr<T>) -> Result<Self, NnError> {
        Mlp::from_layers(r.layers, r.output)
    }
}

fn sizes_of<T: Scalar>(layers: &[Dense<T>]) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(layers.len() + 1);
    if let Some(first) = layers.first() {
        sizes.push(first.in_dim());
    }
    sizes.extend(layers.iter().map(Dense::out_dim));
    sizes
}

/// Shapes must chain and every bias must match its layer's output width.
fn check_chain<T: Scalar>(layers: &[Dense<T>]) -> Result<(), NnError> {
    for (k, layer) in layers.iter().enumerate() {
        if layer.in_dim() == 0 || layer.out_dim() == 0 {
            return Err(NnError::InvalidLayerSizes(sizes_of(layers)));
        }
        if layer.bias.len() != layer.out_dim() {
            return Err(NnError::ShapeMismatch {
                what: "bias",
                expected: layer.out_dim(),
                actual: layer.bias.len(),
            });
        }
        if k > 0 && layers[k - 1].out_dim() != layer.in_dim() {
            return Err(NnError::ShapeMismatch {
                what: "layer input",
                expected: layers[k - 1].out_dim(),
                actual: layer.in_dim(),
            });
        }
    }
    Ok(())
}

fn check_output(output: OutputActivation) -> Result<(), NnError> {
    match output {
        OutputActivation::ScaledTanh(b) if !(b.is_finite() && b > 0.0) => {
            Err(NnError::InvalidBound(b))
        }
        _ => Ok(()),
    }
}

impl<T: Scalar> Mlp<T> {
    /// Builds a network with weights drawn uniformly from
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` and zero biases. Draws are made in
    /// `f64` and rounded, so both precisions start from the same weights.
    pub fn new(
        layer_sizes: &[usize],
        output: OutputActivation,
        seed: u64,
    ) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(layer_sizes, output, &mut rng)
    }

    pub fn with_rng<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        output: OutputActivation,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(NnError::InvalidLayerSizes(layer_sizes.to_vec()));
        }
        check_output(output)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = 1.0 / (fan_in as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                Dense {
                    weight: Array2::from_shape_simple_fn((fan_out, fan_in), || {
                        T::cast(dist.sample(rng))
                    }),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self { layers, output })
    }

    /// Assembles a network from explicit layers, checking that shapes chain.
    pub fn from_layers(layers: Vec<Dense<T>>, output: OutputActivation) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::InvalidLayerSizes(Vec::new()));
        }
        check_output(output)?;
        check_chain(&layers)?;
        Ok(Self { layers, output })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        sizes_of(&self.layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Hash of the exact bit patterns of every parameter.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for l in &self.layers {
            l.weight.shape().hash(&mut h);
            for v in l.weight.iter().chain(l.bias.iter()) {
                v.bits().hash(&mut h);
            }
        }
        h.finish()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::ShapeMismatch {
                what: "network input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("contiguous row");
        Ok(self.predict_batch(x).into_raw_vec_and_offset().0)
    }

    /// Batched forward pass without keeping intermediates.
    ///
    /// Panics if `input.ncols()` differs from the input dimension.
    pub fn predict_batch(&self, input: ArrayView2<'_, T>) -> Array2<T> {
        assert_eq!(input.ncols(), self.input_dim(), "network input width");
        let last = self.layers.len() - 1;
        let mut x = self.affine(0, input);
        for k in 0..last {
            x.mapv_inplace(relu);
            x = self.affine(k + 1, x.view());
        }
        self.apply_output(&mut x);
        x
    }

    /// Batched forward pass recording every activation for backpropagation.
    ///
    /// Panics if `input.ncols()` differs from the input dimension.
    pub fn forward_batch(&self, input: ArrayView2<'_, T>) -> ForwardCache<T> {
        assert_eq!(input.ncols(), self.input_dim(), "network input width");
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_owned());
        for k in 0..=last {
            let mut z = self.affine(k, activations[k].view());
            if k == last {
                self.apply_output(&mut z);
            } else {
                z.mapv_inplace(relu);
            }
            activations.push(z);
        }
        ForwardCache { activations }
    }

    /// Gradients of `sum(upstream * output)` with respect to the parameters
    /// and/or the input of the batch recorded in `cache`.
    ///
    /// Panics if `upstream` does not match the cached output shape.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache<T>,
        upstream: ArrayView2<'_, T>,
        want_params: bool,
        want_input: bool,
    ) -> (Option<Gradients<T>>, Option<Array2<T>>) {
        let out = cache.output();
        assert_eq!(upstream.dim(), out.dim(), "upstream gradient shape");
        let mut delta = upstream.to_owned();
        if let OutputActivation::ScaledTanh(b) = self.output {
            let b = T::cast(b);
            Zip::from(&mut delta).and(out).for_each(|d, &y| {
                let t = y / b;
                *d *= b * (T::one() - t * t);
            });
        }
        let mut grads = want_params.then(|| Vec::with_capacity(self.layers.len()));
        let mut input_grad = None;
        for k in (0..self.layers.len()).rev() {
            let a_in = &cache.activations[k];
            if let Some(g) = grads.as_mut() {
                g.push(Dense {
                    weight: delta.t().dot(a_in),
                    bias: delta.sum_axis(Axis(0)),
                });
            }
            if k > 0 {
                let mut d_in = delta.dot(&self.layers[k].weight);
                Zip::from(&mut d_in).and(a_in).for_each(|d, &a| {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                });
                delta = d_in;
            } else if want_input {
                input_grad = Some(delta.dot(&self.layers[0].weight));
            }
        }
        let grads = grads.map(|mut g| {
            g.reverse();
            Gradients { layers: g }
        });
        (grads, input_grad)
    }

    /// Single-sample backward pass. Returns parameter gradients and the input
    /// gradient of `upstream . output`.
    pub fn backward(&self, input: &[T], upstream: &[T]) -> Result<(Gradients<T>, Vec<T>), NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::ShapeMismatch {
                what: "network input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        if upstream.len() != self.output_dim() {
            return Err(NnError::ShapeMismatch {
                what: "upstream gradient",
                expected: self.output_dim(),
                actual: upstream.len(),
            });
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("contiguous row");
        let g = ArrayView2::from_shape((1, upstream.len()), upstream).expect("contiguous row");
        let cache = self.forward_batch(x);
        let (grads, input_grad) = self.backward_batch(&cache, g, true, true);
        Ok((
            grads.expect("requested"),
            input_grad.expect("requested").into_raw_vec_and_offset().0,
        ))
    }

    fn affine(&self, k: usize, x: ArrayView2<'_, T>) -> Array2<T> {
        let layer = &self.layers[k];
        let mut z = x.dot(&layer.weight.t());
        z += &layer.bias;
        z
    }

    fn apply_output(&self, x: &mut Array2<T>) {
        if let OutputActivation::ScaledTanh(b) = self.output {
            let b = T::cast(b);
            x.mapv_inplace(|v| b * v.tanh());
        }
    }
}

#[inline]
fn relu<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

/// Polyak averaging: `target <- tau * online + (1 - tau) * target`.
pub fn soft_update<T: Scalar>(
    target: &mut Mlp<T>,
    online: &Mlp<T>,
    tau: f64,
) -> Result<(), NnError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(NnError::InvalidTau(tau));
    }
    if target.layer_sizes() != online.layer_sizes() || target.output != online.output {
        return Err(NnError::ArchitectureMismatch {
            expected: target.layer_sizes(),
            actual: online.layer_sizes(),
        });
    }
    let keep = T::cast(1.0 - tau);
    let tau = T::cast(tau);
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        Zip::from(&mut t.weight)
            .and(&o.weight)
            .for_each(|t, &o| *t = tau * o + keep * *t);
        Zip::from(&mut t.bias)
            .and(&o.bias)
            .for_each(|t, &o| *t = tau * o + keep * *t);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    type Mlp = super::Mlp<f64>;

    fn naive_forward(mlp: &Mlp, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        let n = mlp.layers().len();
        for (k, layer) in mlp.layers().iter().enumerate() {
            let mut y = vec![0.0; layer.out_dim()];
            for (i, yi) in y.iter_mut().enumerate() {
                let mut acc = layer.bias[i];
                for (j, xj) in x.iter().enumerate() {
                    acc += layer.weight[[i, j]] * xj;
                }
                *yi = if k + 1 < n { acc.max(0.0) } else { acc };
            }
            x = y;
        }
        if let OutputActivation::ScaledTanh(b) = mlp.output_activation() {
            x.iter_mut().for_each(|v| *v = b * v.tanh());
        }
        x
    }

    #[test]
    fn rejects_bad_layer_sizes() {
        assert!(Mlp::new(&[], OutputActivation::Identity, 0).is_err());
        assert!(Mlp::new(&[3], OutputActivation::Identity, 0).is_err());
        assert!(Mlp::new(&[3, 0, 2], OutputActivation::Identity, 0).is_err());
        assert!(Mlp::new(&[3, 2], OutputActivation::ScaledTanh(0.0), 0).is_err());
    }

    #[test]
    fn default_actor_shape() {
        let actor = Mlp::new(&[10, 400, 300, 7], OutputActivation::ScaledTanh(1.0), 3).unwrap();
        assert_eq!(actor.layer_sizes(), vec![10, 400, 300, 7]);
        assert_eq!(actor.layers()[0].weight.dim(), (400, 10));
        assert_eq!(actor.layers()[1].weight.dim(), (300, 400));
        assert_eq!(actor.layers()[2].weight.dim(), (7, 300));
        assert_eq!(actor.layers()[2].bias.len(), 7);
    }

    #[test]
    fn init_is_deterministic() {
        let a = Mlp::new(&[1, 1], OutputActivation::Identity, 0).unwrap();
        let b = Mlp::new(&[1, 1], OutputActivation::Identity, 0).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a, b);
        let c = Mlp::new(&[1, 1], OutputActivation::Identity, 1).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn precisions_share_initial_weights() {
        let wide = Mlp::new(&[4, 8, 2], OutputActivation::ScaledTanh(1.5), 7).unwrap();
        let narrow: super::Mlp<f32> =
            super::Mlp::new(&[4, 8, 2], OutputActivation::ScaledTanh(1.5), 7).unwrap();
        for (w, n) in wide.layers().iter().zip(narrow.layers()) {
            assert!(w.weight.iter().zip(&n.weight).all(|(&a, &b)| a as f32 == b));
        }
        let x = [0.3, -0.1, 0.8, 0.2];
        let y64 = wide.forward(&x).unwrap();
        let y32 = narrow.forward(&x.map(|v| v as f32)).unwrap();
        for (a, b) in y64.iter().zip(&y32) {
            assert!((a - f64::from(*b)).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mlp = Mlp::new(&[3, 5, 2], OutputActivation::Identity, 11).unwrap();
        let bound = 1.0 / 3f64.sqrt();
        assert!(mlp.layers()[0].weight.iter().all(|w| w.abs() <= bound));
        let bound2 = 1.0 / 5f64.sqrt();
        assert!(mlp.layers()[1].weight.iter().all(|w| w.abs() <= bound2));
        assert!(mlp
            .layers()
            .iter()
            .all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mlp = Mlp::from_layers(
            vec![Dense::zeros(3, 4), Dense::zeros(4, 2)],
            OutputActivation::Identity,
        )
        .unwrap();
        assert_eq!(mlp.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_affine_layer() {
        let mlp = Mlp::from_layers(
            vec![Dense {
                weight: array![[2.0]],
                bias: array![1.0],
            }],
            OutputActivation::Identity,
        )
        .unwrap();
        assert_eq!(mlp.forward(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        for seed in 0..5 {
            let mut mlp = Mlp::new(&[3, 4, 2], OutputActivation::Identity, seed).unwrap();
            for l in mlp.layers_mut() {
                l.bias
                    .iter_mut()
                    .enumerate()
                    .for_each(|(i, b)| *b = 0.1 * i as f64 - 0.05);
            }
            let input = [0.3, -1.2, 0.7];
            let got = mlp.forward(&input).unwrap();
            let want = naive_forward(&mlp, &input);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let mlp = Mlp::new(&[3, 2], OutputActivation::Identity, 0).unwrap();
        assert!(matches!(
            mlp.forward(&[1.0]),
            Err(NnError::ShapeMismatch {
                expected: 3,
                actual: 1,
                ..
            })
        ));
        assert!(mlp.backward(&[1.0, 2.0, 3.0], &[1.0]).is_err());
    }

    #[test]
    fn scaled_tanh_output_is_bounded() {
        let mut mlp = Mlp::new(&[2, 8, 3], OutputActivation::ScaledTanh(2.5), 4).unwrap();
        for l in mlp.layers_mut() {
            l.weight.mapv_inplace(|w| w * 50.0);
        }
        for x in [[-10.0, 3.0], [100.0, 100.0], [0.0, 0.0]] {
            assert!(mlp.forward(&x).unwrap().iter().all(|v| v.abs() <= 2.5));
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mlp = Mlp::new(&[4, 6, 3], OutputActivation::ScaledTanh(1.0), 2).unwrap();
        let (g, dx) = mlp.backward(&[0.1, 0.2, -0.3, 0.4], &[0.0; 3]).unwrap();
        assert!(g.iter().all(|v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_input_gradient_is_transpose_product() {
        let w = array![[1.0, 2.0, 3.0], [-1.0, 0.5, 4.0]];
        let mlp = Mlp::from_layers(
            vec![Dense {
                weight: w.clone(),
                bias: array![0.0, 0.0],
            }],
            OutputActivation::Identity,
        )
        .unwrap();
        let up = [0.7, -2.0];
        let (g, dx) = mlp.backward(&[1.0, 1.0, 1.0], &up).unwrap();
        let want: Vec<f64> = (0..3)
            .map(|j| w[[0, j]] * up[0] + w[[1, j]] * up[1])
            .collect();
        assert_eq!(dx, want);
        assert_eq!(g.layers[0].bias.to_vec(), up.to_vec());
    }

    #[test]
    fn soft_update_limits_and_arithmetic() {
        let online = Mlp::new(&[2, 3, 1], OutputActivation::Identity, 1).unwrap();
        let mut target = Mlp::new(&[2, 3, 1], OutputActivation::Identity, 2).unwrap();
        let before = target.clone();
        soft_update(&mut target, &online, 0.0).unwrap();
        assert_eq!(target, before);
        soft_update(&mut target, &online, 1.0).unwrap();
        assert_eq!(target, online);

        let ones = Mlp::from_layers(
            vec![Dense {
                weight: array![[1.0]],
                bias: array![1.0],
            }],
            OutputActivation::Identity,
        )
        .unwrap();
        let mut zeros =
            Mlp::from_layers(vec![Dense::zeros(1, 1)], OutputActivation::Identity).unwrap();
        soft_update(&mut zeros, &ones, 0.005).unwrap();
        assert_eq!(zeros.layers()[0].weight[[0, 0]], 0.005);
        assert_eq!(zeros.layers()[0].bias[0], 0.005);
    }

    #[test]
    fn soft_update_rejects_mismatch() {
        let a = Mlp::new(&[2, 3, 1], OutputActivation::Identity, 1).unwrap();
        let mut b = Mlp::new(&[2, 4, 1], OutputActivation::Identity, 1).unwrap();
        assert!(matches!(
            soft_update(&mut b, &a, 0.5),
            Err(NnError::ArchitectureMismatch { .. })
        ));
        let mut c = a.clone();
        assert!(matches!(
            soft_update(&mut c, &a, 1.5),
            Err(NnError::InvalidTau(_))
        ));
    }
}
