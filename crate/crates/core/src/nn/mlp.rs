use rand::Rng;

use super::NnError;

/// Placement of one dense layer inside the flat parameter vector. Weights
/// are stored row-major as `outputs x inputs`, followed by the bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

/// Fully connected network: ReLU on every hidden layer, identity output.
///
/// All parameters live in one contiguous `Vec<f64>` so that the optimizer,
/// Polyak averaging and checkpointing can treat a network as a flat tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

/// Per-layer outputs of a batched forward pass. `values[0]` is the input and
/// `values[l + 1]` the (post-activation) output of layer `l`, each stored
/// row-major with one row per sample.
#[derive(Debug, Clone)]
pub struct Activations {
    pub batch: usize,
    pub values: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("activations are never empty")
    }
}

/// Thin checked wrapper over `matrixmultiply::dgemm`:
/// `c = a(m x k) * b(k x n) + beta * c`, with explicit strides on `a` and `b`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
        assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    }
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    /// Zero-initialized network with the given layer widths, input first.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an mlp needs at least input and output widths");
        assert!(sizes.iter().all(|&s| s > 0), "layer widths must be positive");
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            layers.push(LayerShape {
                inputs,
                outputs,
                weight_offset: offset,
                bias_offset: offset + inputs * outputs,
            });
            offset += inputs * outputs + outputs;
        }
        Self {
            layers,
            params: vec![0.0; offset],
        }
    }

    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn init_uniform<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for l in 0..net.layers.len() {
            let shape = net.layers[l];
            let bound = 1.0 / (shape.inputs as f64).sqrt();
            let end = shape.bias_offset + shape.outputs;
            for p in &mut net.params[shape.weight_offset..end] {
                *p = rng.gen_range(-bound..=bound);
            }
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, NnError> {
        let mut net = Self::zeros(sizes);
        if params.len() != net.params.len() {
            return Err(NnError::Shape {
                what: "parameter vector",
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let s = self.layers[layer];
        &self.params[s.weight_offset..s.bias_offset]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let s = self.layers[layer];
        &mut self.params[s.weight_offset..s.bias_offset]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let s = self.layers[layer];
        &self.params[s.bias_offset..s.bias_offset + s.outputs]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let s = self.layers[layer];
        &mut self.params[s.bias_offset..s.bias_offset + s.outputs]
    }

    fn check_len(&self, what: &'static str, expected: usize, got: usize) -> Result<(), NnError> {
        if expected == got {
            Ok(())
        } else {
            Err(NnError::Shape { what, expected, got })
        }
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_len("input", self.input_dim(), input.len())?;
        // one row per output unit: dot products beat repacking W for gemm
        let last = self.layers.len() - 1;
        let mut x = input.to_vec();
        for (l, s) in self.layers.iter().enumerate() {
            let w = self.weights(l);
            let mut out = self.bias(l).to_vec();
            for (o, v) in out.iter_mut().enumerate() {
                let row = &w[o * s.inputs..(o + 1) * s.inputs];
                *v += row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
                if l != last && *v < 0.0 {
                    *v = 0.0;
                }
            }
            x = out;
        }
        Ok(x)
    }

    /// Batched forward pass over `batch` row-major samples.
    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Activations {
        assert_eq!(input.len(), batch * self.input_dim(), "forward_batch: input shape");
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (l, s) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(batch * s.outputs);
            let bias = self.bias(l);
            for _ in 0..batch {
                out.extend_from_slice(bias);
            }
            // out(B x o) += x(B x i) * W^T(i x o)
            gemm(
                batch,
                s.inputs,
                s.outputs,
                &values[l],
                (s.inputs, 1),
                self.weights(l),
                (1, s.inputs),
                1.0,
                &mut out,
            );
            if l != last {
                for v in &mut out {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            values.push(out);
        }
        Activations { batch, values }
    }

    /// Reverse pass for a batch. Parameter gradients are *added* into
    /// `param_grads` when given. Returns the gradient with respect to the
    /// input when `want_input_grad` is set.
    pub fn backward_batch(
        &self,
        acts: &Activations,
        d_output: &[f64],
        mut param_grads: Option<&mut [f64]>,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let batch = acts.batch;
        assert_eq!(d_output.len(), batch * self.output_dim(), "backward_batch: upstream shape");
        if let Some(g) = param_grads.as_deref() {
            assert_eq!(g.len(), self.params.len(), "backward_batch: gradient buffer shape");
        }
        let mut delta = d_output.to_vec();
        for l in (0..self.layers.len()).rev() {
            let s = self.layers[l];
            let x = &acts.values[l];
            if let Some(g) = param_grads.as_deref_mut() {
                // dW(o x i) += delta^T(o x B) * x(B x i)
                gemm(
                    s.outputs,
                    batch,
                    s.inputs,
                    &delta,
                    (1, s.outputs),
                    x,
                    (s.inputs, 1),
                    1.0,
                    &mut g[s.weight_offset..s.bias_offset],
                );
                let gb = &mut g[s.bias_offset..s.bias_offset + s.outputs];
                for row in delta.chunks_exact(s.outputs) {
                    for (b, d) in gb.iter_mut().zip(row) {
                        *b += d;
                    }
                }
            }
            if l == 0 && !want_input_grad {
                return None;
            }
            // dx(B x i) = delta(B x o) * W(o x i)
            let mut dx = vec![0.0; batch * s.inputs];
            gemm(
                batch,
                s.outputs,
                s.inputs,
                &delta,
                (s.outputs, 1),
                self.weights(l),
                (s.inputs, 1),
                0.0,
                &mut dx,
            );
            if l > 0 {
                // ReLU mask: the layer below emitted x > 0 exactly where its
                // pre-activation was positive.
                for (d, &xv) in dx.iter_mut().zip(x) {
                    if xv <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = dx;
        }
        Some(delta)
    }

    /// Gradients of `upstream · forward(input)` for a single sample:
    /// `(parameter gradients, input gradient)`.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NnError> {
        self.check_len("input", self.input_dim(), input.len())?;
        self.check_len("upstream gradient", self.output_dim(), upstream.len())?;
        let acts = self.forward_batch(input, 1);
        let mut grads = vec![0.0; self.params.len()];
        let dx = self.backward_batch(&acts, upstream, Some(&mut grads), true).unwrap();
        Ok((grads, dx))
    }
}
