//! Dense ReLU networks with hand-written backpropagation.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;

/// Fully connected layer. `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// He-normal weights, zero bias.
    pub fn he(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let std = (2.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

/// Multi-layer perceptron: ReLU after every hidden layer, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Per-layer inputs and pre-activations recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.preacts.last().expect("at least one layer")
    }
}

impl Mlp {
    /// `widths` lists every layer width from input to output (at least two).
    pub fn he(widths: &[usize], rng: &mut Rng) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        Self {
            layers: widths
                .windows(2)
                .map(|w| Dense::he(w[0], w[1], rng))
                .collect(),
        }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        Self {
            layers: widths
                .windows(2)
                .map(|w| Dense::zeros(w[0], w[1]))
                .collect(),
        }
    }

    /// Builds from explicit layers; `None` if consecutive shapes do not chain.
    pub fn from_layers(layers: Vec<Dense>) -> Option<Self> {
        let ok = !layers.is_empty()
            && layers.iter().all(|l| {
                l.inputs > 0
                    && l.outputs > 0
                    && l.weights.len() == l.inputs * l.outputs
                    && l.bias.len() == l.outputs
            })
            && layers.windows(2).all(|w| w[0].outputs == w[1].inputs);
        ok.then_some(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.outputs));
        w
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Parameters in layer order: weights then bias per layer.
    pub fn params(&self) -> impl Iterator<Item = &f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if i != last {
                relu(&mut next);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.apply(&cur, &mut z);
            let next = if i != last {
                let mut a = z.clone();
                relu(&mut a);
                a
            } else {
                Vec::new()
            };
            inputs.push(std::mem::replace(&mut cur, next));
            preacts.push(z);
        }
        ForwardCache { inputs, preacts }
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the network input.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], grads: &mut Mlp) -> Vec<f64> {
        let mut delta = grad_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let g = &mut grads.layers[i];
            let input = &cache.inputs[i];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, &x) in row.iter_mut().zip(input) {
                    *w += d * x;
                }
            }
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            if i > 0 {
                for (p, &z) in prev.iter_mut().zip(&cache.preacts[i - 1]) {
                    if z <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        delta
    }
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[4, 8, 3]);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]), vec![0.0; 3]);
    }

    #[test]
    fn cached_forward_matches_plain() {
        let net = Mlp::he(&[3, 5, 4, 2], &mut rng::seeded(3));
        let x = [0.3, -1.2, 0.7];
        assert_eq!(net.forward_cached(&x).output(), net.forward(&x).as_slice());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng::seeded(11);
        let net = Mlp::he(&[3, 6, 2], &mut r);
        let x = [0.4, -0.9, 1.3];
        // scalar objective: sum of squared outputs / 2
        let f = |m: &Mlp| m.forward(&x).iter().map(|v| 0.5 * v * v).sum::<f64>();
        let cache = net.forward_cached(&x);
        let mut grads = net.zeros_like();
        let gin = net.backward(&cache, cache.output(), &mut grads);
        let analytic: Vec<f64> = grads.params().copied().collect();
        let h = 1e-6;
        for (i, a) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            *plus.params_mut().nth(i).unwrap() += h;
            let mut minus = net.clone();
            *minus.params_mut().nth(i).unwrap() -= h;
            let num = (f(&plus) - f(&minus)) / (2.0 * h);
            assert!(
                (a - num).abs() < 1e-6 * (1.0 + num.abs()),
                "param {i}: {a} vs {num}"
            );
        }
        for k in 0..3 {
            let mut xp = x;
            xp[k] += h;
            let mut xm = x;
            xm[k] -= h;
            let fp = net.forward(&xp).iter().map(|v| 0.5 * v * v).sum::<f64>();
            let fm = net.forward(&xm).iter().map(|v| 0.5 * v * v).sum::<f64>();
            assert!((gin[k] - (fp - fm) / (2.0 * h)).abs() < 1e-6);
        }
    }

    #[test]
    fn from_layers_checks_chaining() {
        assert!(Mlp::from_layers(vec![Dense::zeros(2, 3), Dense::zeros(3, 1)]).is_some());
        assert!(Mlp::from_layers(vec![Dense::zeros(2, 3), Dense::zeros(4, 1)]).is_none());
        assert!(Mlp::from_layers(vec![]).is_none());
    }
}
