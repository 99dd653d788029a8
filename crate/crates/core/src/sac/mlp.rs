use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::SacError;

/// Dense layer computing `x W + b`; `w` is `(inputs, outputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }
}

/// Fully connected network with ReLU hidden layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations kept by [`Mlp::forward_trace`] for backpropagation.
pub struct Trace {
    /// Input of every layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
}

fn relu_inplace(x: &mut Array2<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}

impl Mlp {
    /// Uniform `+-1/sqrt(fan_in)` initialisation.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|io| {
                let bound = 1.0 / (io[0] as f64).sqrt();
                let mut layer = Layer::zeros(io[0], io[1]);
                layer.w.mapv_inplace(|_| rng.random_range(-bound..bound));
                layer.b.mapv_inplace(|_| rng.random_range(-bound..bound));
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, SacError> {
        if layers.is_empty() {
            return Err(SacError::ShapeMismatch {
                expected: "at least one layer".into(),
                got: "none".into(),
            });
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].w.ncols() != pair[1].w.nrows() {
                return Err(SacError::ShapeMismatch {
                    expected: format!("layer {} with {} inputs", k + 1, pair[0].w.ncols()),
                    got: format!("{} inputs", pair[1].w.nrows()),
                });
            }
        }
        for (k, l) in layers.iter().enumerate() {
            if l.b.len() != l.w.ncols() {
                return Err(SacError::ShapeMismatch {
                    expected: format!("layer {k} bias of length {}", l.w.ncols()),
                    got: l.b.len().to_string(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].w.nrows()];
        s.extend(self.layers.iter().map(|l| l.w.ncols()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].w.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Zeroes the output layer so the network starts at exactly zero output.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().expect("non-empty");
        last.w.fill(0.0);
        last.b.fill(0.0);
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<(), SacError> {
        if x.ncols() != self.input_dim() {
            return Err(SacError::ShapeMismatch {
                expected: format!("{} input columns", self.input_dim()),
                got: x.ncols().to_string(),
            });
        }
        Ok(())
    }

    /// Batched forward pass, one sample per row.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, SacError> {
        self.check_input(&x)?;
        let mut h = x.dot(&self.layers[0].w) + &self.layers[0].b;
        for layer in &self.layers[1..] {
            relu_inplace(&mut h);
            h = h.dot(&layer.w) + &layer.b;
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Trace), SacError> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            if k > 0 {
                relu_inplace(&mut h);
            }
            let next = h.dot(&layer.w) + &layer.b;
            inputs.push(h);
            h = next;
        }
        Ok((h, Trace { inputs }))
    }

    /// Backpropagates `grad_out` (gradient of the loss with respect to the
    /// outputs of the traced pass). Returns parameter gradients and the
    /// gradient with respect to the input.
    pub fn backward(&self, trace: &Trace, grad_out: ArrayView2<f64>) -> (Vec<Layer>, Array2<f64>) {
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.to_owned();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[k];
            grads.push(Layer {
                w: input.t().dot(&g),
                b: g.sum_axis(Axis(0)),
            });
            g = g.dot(&layer.w.t());
            if k > 0 {
                // Inputs of hidden layers are ReLU outputs; zero where inactive.
                Zip::from(&mut g).and(input).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0
                    }
                });
            }
        }
        grads.reverse();
        (grads, g)
    }

    /// Gradient with respect to the input only.
    pub fn backward_input(&self, trace: &Trace, grad_out: ArrayView2<f64>) -> Array2<f64> {
        let mut g = grad_out.to_owned();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            g = g.dot(&layer.w.t());
            if k > 0 {
                Zip::from(&mut g).and(&trace.inputs[k]).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0
                    }
                });
            }
        }
        g
    }

    /// All parameters in layer order, weights (row-major) before biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.params().copied().collect()
    }

    pub fn assign(&mut self, values: &[f64]) -> Result<(), SacError> {
        if values.len() != self.param_count() {
            return Err(SacError::ShapeMismatch {
                expected: format!("{} parameters", self.param_count()),
                got: values.len().to_string(),
            });
        }
        for (p, v) in self.params_mut().zip(values) {
            *p = *v;
        }
        Ok(())
    }

    /// `self = polyak * self + (1 - polyak) * online`.
    pub fn polyak_update(&mut self, online: &Mlp, polyak: f64) {
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            Zip::from(&mut t.w)
                .and(&o.w)
                .for_each(|t, &o| *t = polyak * *t + (1.0 - polyak) * o);
            Zip::from(&mut t.b)
                .and(&o.b)
                .for_each(|t, &o| *t = polyak * *t + (1.0 - polyak) * o);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }
}

/// Flattens gradients in the same order as [`Mlp::params`].
pub fn flatten_grads(grads: &[Layer]) -> Vec<f64> {
    grads
        .iter()
        .flat_map(|l| l.w.iter().chain(l.b.iter()))
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Mlp {
        // 2-2-2-1 fixture.
        Mlp::from_layers(vec![
            Layer {
                w: array![[0.5, -1.0], [0.25, 2.0]],
                b: array![0.1, -0.2],
            },
            Layer {
                w: array![[1.0, -0.5], [0.3, 0.7]],
                b: array![0.0, 0.05],
            },
            Layer {
                w: array![[2.0], [-1.5]],
                b: array![0.3],
            },
        ])
        .unwrap()
    }

    #[test]
    fn hand_computed_forward() {
        // x = (1, 2): h1 = relu(0.5 + 0.5 + 0.1, -1 + 4 - 0.2) = (1.1, 2.8)
        // h2 = relu(1.1 + 0.84, -0.55 + 1.96 + 0.05) = (1.94, 1.46)
        // y = 3.88 - 2.19 + 0.3 = 1.99
        let y = tiny().forward(array![[1.0, 2.0]].view()).unwrap();
        assert!((y[[0, 0]] - 1.99).abs() < 1e-12);
        // x = (-1, 0): h1 = relu(-0.4, 0.8) = (0, 0.8); h2 = relu(0.24, 0.61) ; y = 0.48 - 0.915 + 0.3
        let y = tiny().forward(array![[-1.0, 0.0]].view()).unwrap();
        assert!((y[[0, 0]] + 0.135).abs() < 1e-12);
    }

    #[test]
    fn batch_matches_single_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[5, 8, 8, 3], &mut rng);
        let x = Array2::from_shape_fn((7, 5), |(i, j)| (i as f64 - 3.0) * 0.3 + j as f64 * 0.1);
        let batch = net.forward(x.view()).unwrap();
        for i in 0..7 {
            let row = net.forward(x.slice(ndarray::s![i..i + 1, ..])).unwrap();
            for j in 0..3 {
                assert!((row[[0, j]] - batch[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_output_layer_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::new(&[4, 6, 6, 6], &mut rng);
        net.zero_output_layer();
        let y = net.forward(Array2::from_elem((3, 4), 0.7).view()).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_wrong_input_width() {
        let net = tiny();
        assert!(matches!(
            net.forward(Array2::zeros((1, 3)).view()),
            Err(SacError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[3, 5, 4, 2], &mut rng);
        let x = Array2::from_shape_fn((4, 3), |(i, j)| ((i * 3 + j) as f64 * 0.7).sin());
        let weights = array![[1.0, -2.0], [0.5, 0.25], [-1.0, 1.0], [0.3, 0.9]];
        let loss = |n: &Mlp, x: &Array2<f64>| (n.forward(x.view()).unwrap() * &weights).sum();
        let (_, trace) = net.forward_trace(x.view()).unwrap();
        let (grads, gx) = net.backward(&trace, weights.view());
        let analytic = flatten_grads(&grads);
        let base = net.flatten();
        let h = 1e-6;
        for (i, a) in analytic.iter().enumerate() {
            let mut p = base.clone();
            p[i] += h;
            let mut plus = net.clone();
            plus.assign(&p).unwrap();
            p[i] -= 2.0 * h;
            let mut minus = net.clone();
            minus.assign(&p).unwrap();
            let numeric = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
            assert!(
                (a - numeric).abs() < 1e-6 * (1.0 + a.abs()),
                "param {i}: {a} vs {numeric}"
            );
        }
        let gx_only = net.backward_input(&trace, weights.view());
        assert_eq!(gx, gx_only);
        for i in 0..4 {
            for j in 0..3 {
                let mut xp = x.clone();
                xp[[i, j]] += h;
                let mut xm = x.clone();
                xm[[i, j]] -= h;
                let numeric = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
                assert!((gx[[i, j]] - numeric).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn polyak_is_elementwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let online = Mlp::new(&[2, 3, 1], &mut rng);
        let mut target = Mlp::new(&[2, 3, 1], &mut rng);
        let before = target.flatten();
        target.polyak_update(&online, 0.995);
        for ((t, b), o) in target.params().zip(&before).zip(online.params()) {
            assert_eq!(*t, 0.995 * b + 0.005 * o);
        }
    }
}
