//! Dense layers and ReLU stacks with reverse-mode gradients.

use super::init::he_normal;
use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;

/// Fully connected layer computing `x * W^T + b`, with accumulated gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearLayer<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
    pub grad_weight: Matrix<T>,
    pub grad_bias: Vec<T>,
}

impl<T: Scalar> LinearLayer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![T::zero(); outputs],
            grad_weight: Matrix::zeros(outputs, inputs),
            grad_bias: vec![T::zero(); outputs],
        }
    }

    /// He-normal weights, zero bias.
    pub fn he<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(inputs, outputs);
        layer.weight = he_normal(outputs, inputs, rng);
        layer
    }

    pub fn from_parts(weight: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape(
                "LinearLayer::from_parts",
                format!("bias of length {}", weight.rows()),
                format!("bias of length {}", bias.len()),
            ));
        }
        let (o, i) = weight.shape();
        Ok(Self {
            weight,
            grad_weight: Matrix::zeros(o, i),
            grad_bias: vec![T::zero(); o],
            bias,
        })
    }

    #[inline]
    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.inputs() {
            return Err(Error::shape(
                "linear_forward",
                format!("{} input columns", self.inputs()),
                format!("{} input columns", x.cols()),
            ));
        }
        let mut out = x.matmul_nt(&self.weight)?;
        for r in 0..out.rows() {
            for (o, &b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients for upstream gradient `dy` at input
    /// `x` and returns the gradient with respect to `x`.
    pub fn backward(&mut self, x: &Matrix<T>, dy: &Matrix<T>) -> Result<Matrix<T>> {
        if dy.cols() != self.outputs() || dy.rows() != x.rows() || x.cols() != self.inputs() {
            return Err(Error::shape(
                "linear_backward",
                format!("{}x{} upstream", x.rows(), self.outputs()),
                format!("{}x{} upstream", dy.rows(), dy.cols()),
            ));
        }
        let gw = dy.matmul_tn(x)?;
        self.grad_weight.add_assign(&gw)?;
        for r in 0..dy.rows() {
            for (g, &d) in self.grad_bias.iter_mut().zip(dy.row(r)) {
                *g += d;
            }
        }
        dy.matmul(&self.weight)
    }

    pub fn zero_grad(&mut self) {
        self.grad_weight.fill(T::zero());
        self.grad_bias.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// Elementwise `max(0, x)`.
pub fn relu<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Masks `grad` by the ReLU subgradient at `pre`; the subgradient at 0 is 0.
pub fn relu_backward<T: Scalar>(pre: &Matrix<T>, grad: &Matrix<T>) -> Matrix<T> {
    let data = pre
        .data()
        .iter()
        .zip(grad.data())
        .map(|(&p, &g)| if p > T::zero() { g } else { T::zero() })
        .collect();
    Matrix::new(grad.rows(), grad.cols(), data).expect("congruent shapes")
}

#[derive(Clone, Debug)]
struct MlpCache<T> {
    input: Matrix<T>,
    layer_inputs: Vec<Matrix<T>>,
    pre_activations: Vec<Matrix<T>>,
}

/// Linear layers joined by ReLU, with an optional residual connection that
/// adds the network input to the output of one hidden layer before its ReLU.
#[derive(Clone, Debug)]
pub struct Mlp<T> {
    layers: Vec<LinearLayer<T>>,
    skip_into: Option<usize>,
    cache: Option<MlpCache<T>>,
}

impl<T: Scalar> Mlp<T> {
    pub fn new(layers: Vec<LinearLayer<T>>, skip_into: Option<usize>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::Config(format!(
                    "layer widths do not chain: {} -> {}",
                    w[0].outputs(),
                    w[1].inputs()
                )));
            }
        }
        if let Some(s) = skip_into {
            if s + 1 >= layers.len() {
                return Err(Error::Config(format!(
                    "skip target {s} must be a hidden layer (followed by a ReLU)"
                )));
            }
            if layers[s].outputs() != layers[0].inputs() {
                return Err(Error::Config(format!(
                    "skip connection width mismatch: input {} vs layer output {}",
                    layers[0].inputs(),
                    layers[s].outputs()
                )));
            }
        }
        Ok(Self {
            layers,
            skip_into,
            cache: None,
        })
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn layers(&self) -> &[LinearLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LinearLayer<T>] {
        &mut self.layers
    }

    pub fn skip_into(&self) -> Option<usize> {
        self.skip_into
    }

    /// Forward pass without recording activations.
    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.run(x, None)
    }

    /// Forward pass that records the activations needed by [`Mlp::backward`].
    pub fn forward_train(&mut self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut cache = MlpCache {
            input: x.clone(),
            layer_inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
        };
        let out = self.run(x, Some(&mut cache))?;
        self.cache = Some(cache);
        Ok(out)
    }

    fn run(&self, x: &Matrix<T>, mut cache: Option<&mut MlpCache<T>>) -> Result<Matrix<T>> {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(&h)?;
            if self.skip_into == Some(l) {
                z.add_assign(x)?;
            }
            if l < last {
                let next = relu(&z);
                if let Some(c) = cache.as_deref_mut() {
                    c.layer_inputs.push(std::mem::replace(&mut h, next));
                    c.pre_activations.push(z);
                } else {
                    h = next;
                }
            } else {
                if let Some(c) = cache.as_deref_mut() {
                    c.layer_inputs.push(h);
                }
                return Ok(z);
            }
        }
        unreachable!("loop returns at the last layer")
    }

    /// Consumes the recorded forward pass, accumulates parameter gradients and
    /// returns the gradient with respect to the network input.
    pub fn backward(&mut self, upstream: &Matrix<T>) -> Result<Matrix<T>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a preceding forward pass".into()))?;
        let last = self.layers.len() - 1;
        if upstream.shape() != (cache.input.rows(), self.outputs()) {
            return Err(Error::shape(
                "Mlp::backward",
                format!("{}x{}", cache.input.rows(), self.outputs()),
                format!("{}x{}", upstream.rows(), upstream.cols()),
            ));
        }
        let mut grad = upstream.clone();
        let mut skip_grad = None;
        for l in (0..=last).rev() {
            if l < last {
                grad = relu_backward(&cache.pre_activations[l], &grad);
            }
            if self.skip_into == Some(l) {
                skip_grad = Some(grad.clone());
            }
            grad = self.layers[l].backward(&cache.layer_inputs[l], &grad)?;
        }
        if let Some(s) = skip_grad {
            grad.add_assign(&s)?;
        }
        Ok(grad)
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(LinearLayer::zero_grad);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn linear_forward_hand_product() {
        let layer = LinearLayer::from_parts(m(&[&[1.0, 2.0], &[3.0, 4.0]]), vec![1.0, -1.0]).unwrap();
        let out = layer.forward(&m(&[&[1.0, 1.0]])).unwrap();
        assert_eq!(out, m(&[&[4.0, 6.0]]));
    }

    #[test]
    fn linear_forward_zero_and_identity() {
        let x = m(&[&[0.3, -1.2, 5.0], &[2.0, 0.0, -0.5]]);
        let zero = LinearLayer::<f64>::zeros(3, 4);
        assert!(zero.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));
        let id = LinearLayer::from_parts(Matrix::identity(3), vec![0.0; 3]).unwrap();
        assert_eq!(id.forward(&x).unwrap(), x);
    }

    #[test]
    fn linear_forward_rejects_wrong_width() {
        let layer = LinearLayer::<f64>::zeros(3, 2);
        assert!(matches!(
            layer.forward(&Matrix::zeros(1, 4)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn relu_cases() {
        assert_eq!(relu(&m(&[&[-1.0, 0.0, 2.0]])), m(&[&[0.0, 0.0, 2.0]]));
        let neg = m(&[&[-1.0, -3.0], &[-0.1, -7.0]]);
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Matrix<f64> = Matrix::from_fn(4, 5, |_, _| rng.random_range(-1.0..1.0));
        assert_eq!(relu(&relu(&x)), relu(&x));
    }

    #[test]
    fn single_layer_sum_loss_gradient() {
        // loss = sum(out): grad_bias = N * 1, grad_weight[o] = sum_n x[n]
        let x = m(&[&[1.0, 2.0, 3.0], &[-1.0, 0.5, 4.0]]);
        let mut net = Mlp::new(vec![LinearLayer::<f64>::zeros(3, 2)], None).unwrap();
        net.forward_train(&x).unwrap();
        net.backward(&Matrix::from_fn(2, 2, |_, _| 1.0)).unwrap();
        let layer = &net.layers()[0];
        assert_eq!(layer.grad_bias, vec![2.0, 2.0]);
        for o in 0..2 {
            assert_eq!(layer.grad_weight.row(o), &[0.0, 2.5, 7.0]);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layers = vec![LinearLayer::he(4, 6, &mut rng), LinearLayer::he(6, 3, &mut rng)];
        let mut net = Mlp::<f64>::new(layers, None).unwrap();
        let x = Matrix::from_fn(5, 4, |i, j| (i + j) as f64 * 0.1 - 0.3);
        net.forward_train(&x).unwrap();
        let dx = net.backward(&Matrix::zeros(5, 3)).unwrap();
        assert!(dx.data().iter().all(|&v| v == 0.0));
        for l in net.layers() {
            assert!(l.grad_weight.data().iter().all(|&v| v == 0.0));
            assert!(l.grad_bias.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let mut net = Mlp::new(vec![LinearLayer::<f64>::zeros(2, 2)], None).unwrap();
        assert!(matches!(net.backward(&Matrix::zeros(1, 2)), Err(Error::State(_))));
        net.forward_train(&Matrix::zeros(1, 2)).unwrap();
        net.backward(&Matrix::zeros(1, 2)).unwrap();
        // the cache is consumed by exactly one backward pass
        assert!(matches!(net.backward(&Matrix::zeros(1, 2)), Err(Error::State(_))));
    }

    #[test]
    fn skip_width_mismatch_rejected() {
        let layers = vec![
            LinearLayer::<f64>::zeros(4, 3),
            LinearLayer::zeros(3, 5),
            LinearLayer::zeros(5, 2),
        ];
        assert!(matches!(Mlp::new(layers, Some(1)), Err(Error::Config(_))));
    }
}
