//! Minimal feed-forward network with reverse-mode gradient accumulation.
//!
//! Hidden layers use ReLU; the output head is configurable. Parameters live
//! in one flat vector laid out layer by layer as `[W row-major, b]`, which
//! keeps optimizer state and save/load trivial. A forward pass can record a
//! [`Tape`] of intermediates; [`Mlp::backward`] replays it to accumulate the
//! parameter gradient of `cotangent . output` and returns the input
//! cotangent for chaining through upstream computations.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputActivation {
    Identity,
    /// Strictly positive outputs summing to one.
    Softmax,
    /// `scale * tanh(z)`, outputs in `(-scale, scale)`.
    ScaledTanh(f64),
    Sigmoid,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    sizes: Vec<usize>,
    output_activation: OutputActivation,
    params: Vec<f64>,
}

/// Forward intermediates for one input: the input itself plus every
/// post-activation layer output.
#[derive(Debug, Clone)]
pub struct Tape {
    activations: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("tape has layers")
    }
}

fn param_count_for(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl Mlp {
    /// He-uniform initialization: weights uniform in `(-sqrt(6/fan_in), sqrt(6/fan_in))`,
    /// biases zero. Deterministic in the seed.
    pub fn init(sizes: &[usize], output_activation: OutputActivation, seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidSpec {
                what: "network shape",
                why: format!("need at least two positive layer sizes, got {sizes:?}"),
            });
        }
        if let OutputActivation::ScaledTanh(s) = output_activation {
            if !(s > 0.0) {
                return Err(Error::InvalidSpec {
                    what: "scaled tanh head",
                    why: format!("scale must be positive, got {s}"),
                });
            }
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count_for(sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.random_range(-limit..limit));
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            output_activation,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.params.len() {
            return Err(Error::ShapeMismatch {
                what: "parameter vector",
                expected: self.params.len(),
                got: p.len(),
            });
        }
        self.params.copy_from_slice(p);
        Ok(())
    }

    /// Zero the final layer's weights and bias, so the network output starts
    /// at exactly zero while earlier layers keep their random features.
    pub fn zero_output_layer(&mut self) {
        self.scale_output_layer(0.0);
    }

    /// Scale the final layer's weights and bias. Small factors keep bounded
    /// heads away from saturation at initialization.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let layers = self.sizes.len() - 1;
        let last = (self.sizes[layers - 1] + 1) * self.sizes[layers];
        let start = self.params.len() - last;
        self.params[start..].iter_mut().for_each(|p| *p *= factor);
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_tape(input)?.0)
    }

    /// Forward pass recording post-activation values per layer.
    pub fn forward_tape(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        if input.len() != self.sizes[0] {
            return Err(Error::ShapeMismatch {
                what: "network input",
                expected: self.sizes[0],
                got: input.len(),
            });
        }
        let layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(input.to_vec());
        let mut offset = 0usize;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            offset += (n_in + 1) * n_out;
            let prev = &activations[l];
            let mut z = vec![0.0; n_out];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *zo = b[o] + row.iter().zip(prev.iter()).map(|(wi, xi)| wi * xi).sum::<f64>();
            }
            let a = if l + 1 < layers {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
                z
            } else {
                apply_head(self.output_activation, z)
            };
            activations.push(a);
        }
        let out = activations.last().unwrap().clone();
        Ok((out, Tape { activations }))
    }

    /// Accumulate `d(cotangent . output)/d(params)` into `grad` and return
    /// the input cotangent. `grad` must have `param_count` entries.
    ///
    /// ReLU uses subgradient 0 at exactly 0.
    pub fn backward(&self, tape: &Tape, cotangent: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        let layers = self.sizes.len() - 1;
        if cotangent.len() != self.output_dim() {
            return Err(Error::ShapeMismatch {
                what: "output cotangent",
                expected: self.output_dim(),
                got: cotangent.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::ShapeMismatch {
                what: "gradient accumulator",
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        if tape.activations.len() != layers + 1 || tape.activations[0].len() != self.sizes[0] {
            return Err(Error::MissingTape("tape does not match network shape"));
        }

        // pull the cotangent through the output head
        let out = tape.output();
        let mut delta = head_backward(self.output_activation, out, cotangent);

        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0usize;
        for l in 0..layers {
            offsets.push(off);
            off += (self.sizes[l] + 1) * self.sizes[l + 1];
        }

        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let offset = offsets[l];
            let prev = &tape.activations[l];
            let w = &self.params[offset..offset + n_in * n_out];
            {
                let gw = &mut grad[offset..offset + n_in * n_out];
                for o in 0..n_out {
                    let d = delta[o];
                    if d != 0.0 {
                        let row = &mut gw[o * n_in..(o + 1) * n_in];
                        for (gi, xi) in row.iter_mut().zip(prev.iter()) {
                            *gi += d * xi;
                        }
                    }
                }
            }
            {
                let gb = &mut grad[offset + n_in * n_out..offset + (n_in + 1) * n_out];
                for (gi, d) in gb.iter_mut().zip(delta.iter()) {
                    *gi += d;
                }
            }
            let mut prev_cot = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for (ci, wi) in prev_cot.iter_mut().zip(row.iter()) {
                        *ci += d * wi;
                    }
                }
            }
            if l > 0 {
                // ReLU mask: post-activation > 0 iff pre-activation > 0
                for (c, a) in prev_cot.iter_mut().zip(prev.iter()) {
                    if *a <= 0.0 {
                        *c = 0.0;
                    }
                }
            }
            delta = prev_cot;
        }
        Ok(delta)
    }

    /// Batch of forward passes with tapes, in parallel, output order fixed.
    pub fn forward_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<(Vec<f64>, Tape)>> {
        inputs
            .par_iter()
            .map(|x| self.forward_tape(x))
            .collect::<Result<Vec<_>>>()
    }

    /// For scalar-output networks: accumulate the parameter gradient
    /// `sum_j cot[j] * d out_j / d params` over a batch and return the
    /// per-sample input cotangents. Reduction runs over fixed-size chunks
    /// folded in index order, so the result does not depend on scheduling.
    pub fn pullback_scalar_batch(
        &self,
        tapes: &[Tape],
        cotangents: &[f64],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if self.output_dim() != 1 {
            return Err(Error::ShapeMismatch {
                what: "scalar pullback output dim",
                expected: 1,
                got: self.output_dim(),
            });
        }
        if tapes.len() != cotangents.len() {
            return Err(Error::LengthMismatch {
                what: "pullback batch",
                left: tapes.len(),
                right: cotangents.len(),
            });
        }
        const CHUNK: usize = 256;
        let pieces: Vec<(Vec<f64>, Vec<Vec<f64>>)> = tapes
            .par_chunks(CHUNK)
            .zip(cotangents.par_chunks(CHUNK))
            .map(|(ts, cs)| {
                let mut grad = vec![0.0; self.param_count()];
                let mut input_cots = Vec::with_capacity(ts.len());
                for (t, &c) in ts.iter().zip(cs.iter()) {
                    let ic = self.backward(t, &[c], &mut grad)?;
                    input_cots.push(ic);
                }
                Ok((grad, input_cots))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![0.0; self.param_count()];
        let mut input_cots = Vec::with_capacity(tapes.len());
        for (g, ics) in pieces {
            for (acc, v) in grad.iter_mut().zip(g.iter()) {
                *acc += v;
            }
            input_cots.extend(ics);
        }
        Ok((grad, input_cots))
    }

    /// Write parameters as text: a shape header, the head tag, then one
    /// parameter per line (shortest round-trip formatting, so reload is exact).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        let sizes: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        writeln!(f, "sizes,{}", sizes.join(","))?;
        let head = match self.output_activation {
            OutputActivation::Identity => "identity".to_string(),
            OutputActivation::Softmax => "softmax".to_string(),
            OutputActivation::ScaledTanh(s) => format!("scaled_tanh,{s}"),
            OutputActivation::Sigmoid => "sigmoid".to_string(),
        };
        writeln!(f, "activation,{head}")?;
        for p in &self.params {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut lines = BufReader::new(f).lines();
        let parse_err = |why: &str| Error::Parse {
            what: format!("network file {}", path.display()),
            why: why.to_string(),
        };
        let header = lines.next().ok_or_else(|| parse_err("missing header"))??;
        let mut parts = header.split(',');
        if parts.next() != Some("sizes") {
            return Err(parse_err("first line must start with 'sizes'"));
        }
        let sizes: Vec<usize> = parts
            .map(|s| s.parse().map_err(|_| parse_err("bad layer size")))
            .collect::<Result<_>>()?;
        let act_line = lines.next().ok_or_else(|| parse_err("missing activation"))??;
        let mut parts = act_line.split(',');
        if parts.next() != Some("activation") {
            return Err(parse_err("second line must start with 'activation'"));
        }
        let output_activation = match parts.next() {
            Some("identity") => OutputActivation::Identity,
            Some("softmax") => OutputActivation::Softmax,
            Some("sigmoid") => OutputActivation::Sigmoid,
            Some("scaled_tanh") => {
                let s: f64 = parts
                    .next()
                    .ok_or_else(|| parse_err("scaled_tanh needs a scale"))?
                    .parse()
                    .map_err(|_| parse_err("bad tanh scale"))?;
                OutputActivation::ScaledTanh(s)
            }
            _ => return Err(parse_err("unknown activation tag")),
        };
        let mut params = Vec::with_capacity(param_count_for(&sizes));
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            params.push(line.trim().parse().map_err(|_| parse_err("bad parameter"))?);
        }
        if params.len() != param_count_for(&sizes) {
            return Err(parse_err("parameter count does not match shape"));
        }
        Ok(Self {
            sizes,
            output_activation,
            params,
        })
    }
}

fn apply_head(act: OutputActivation, mut z: Vec<f64>) -> Vec<f64> {
    match act {
        OutputActivation::Identity => z,
        OutputActivation::Softmax => {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in z.iter_mut() {
                *v = (*v - m).exp();
                total += *v;
            }
            for v in z.iter_mut() {
                *v /= total;
            }
            z
        }
        OutputActivation::ScaledTanh(s) => {
            z.iter_mut().for_each(|v| *v = s * v.tanh());
            z
        }
        OutputActivation::Sigmoid => {
            z.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp()));
            z
        }
    }
}

fn head_backward(act: OutputActivation, out: &[f64], cot: &[f64]) -> Vec<f64> {
    match act {
        OutputActivation::Identity => cot.to_vec(),
        OutputActivation::Softmax => {
            let dot: f64 = out.iter().zip(cot.iter()).map(|(y, c)| y * c).sum();
            out.iter().zip(cot.iter()).map(|(y, c)| y * (c - dot)).collect()
        }
        OutputActivation::ScaledTanh(s) => out
            .iter()
            .zip(cot.iter())
            .map(|(y, c)| c * (s - y * y / s))
            .collect(),
        OutputActivation::Sigmoid => out
            .iter()
            .zip(cot.iter())
            .map(|(y, c)| c * y * (1.0 - y))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn finite_diff_grad(net: &Mlp, input: &[f64], cot: &[f64]) -> Vec<f64> {
        let mut net = net.clone();
        let scalar = |n: &Mlp| -> f64 {
            n.forward(input)
                .unwrap()
                .iter()
                .zip(cot.iter())
                .map(|(y, c)| y * c)
                .sum()
        };
        let d = 1e-5;
        (0..net.param_count())
            .map(|k| {
                let orig = net.params()[k];
                net.params_mut()[k] = orig + d;
                let up = scalar(&net);
                net.params_mut()[k] = orig - d;
                let dn = scalar(&net);
                net.params_mut()[k] = orig;
                (up - dn) / (2.0 * d)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        let norm: f64 = b.iter().map(|y| y * y).sum::<f64>();
        (diff / norm.max(1e-16)).sqrt()
    }

    #[test]
    fn forward_examples() {
        let mut net = Mlp::init(&[3, 2], OutputActivation::Identity, 0).unwrap();
        net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);

        // identity weights reproduce the input
        let mut net = Mlp::init(&[2, 2], OutputActivation::Identity, 0).unwrap();
        net.set_params(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(net.forward(&[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);

        // softmax of equal logits is uniform
        let mut net = Mlp::init(&[1, 4], OutputActivation::Softmax, 0).unwrap();
        net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        let out = net.forward(&[0.0]).unwrap();
        for v in out {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_shape_errors() {
        let net = Mlp::init(&[3, 2], OutputActivation::Identity, 0).unwrap();
        assert!(net.forward(&[1.0, 2.0]).is_err());
        assert!(Mlp::init(&[3], OutputActivation::Identity, 0).is_err());
        assert!(Mlp::init(&[3, 0, 2], OutputActivation::Identity, 0).is_err());
    }

    #[test]
    fn linear_layer_jacobian_row() {
        let mut net = Mlp::init(&[3, 2], OutputActivation::Identity, 7).unwrap();
        net.params_mut().iter_mut().for_each(|p| *p = 0.5);
        let input = [1.0, -2.0, 3.0];
        let (_, tape) = net.forward_tape(&input).unwrap();
        let mut grad = vec![0.0; net.param_count()];
        net.backward(&tape, &[1.0, 0.0], &mut grad).unwrap();
        // W row 0 gets the input, row 1 zero, bias = cotangent
        assert_eq!(&grad[0..3], &input);
        assert_eq!(&grad[3..6], &[0.0, 0.0, 0.0]);
        assert_eq!(&grad[6..8], &[1.0, 0.0]);
    }

    #[test]
    fn zero_cotangent_zero_gradient() {
        let net = Mlp::init(&[2, 5, 1], OutputActivation::Identity, 3).unwrap();
        let (_, tape) = net.forward_tape(&[0.4, -0.1]).unwrap();
        let mut grad = vec![0.0; net.param_count()];
        net.backward(&tape, &[0.0], &mut grad).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_check_random_probes() {
        // the module's defining property: backprop matches central
        // finite differences on random networks
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        let heads = [
            OutputActivation::Identity,
            OutputActivation::Softmax,
            OutputActivation::ScaledTanh(5.0),
            OutputActivation::Sigmoid,
        ];
        let mut checked = 0usize;
        while checked < 100 {
            let n_in = rng.random_range(1..4usize);
            let n_hidden = rng.random_range(2..7usize);
            let n_out = rng.random_range(1..4usize);
            let head = heads[checked % heads.len()];
            let head = if matches!(head, OutputActivation::Softmax) && n_out == 1 {
                OutputActivation::Identity
            } else {
                head
            };
            let net = Mlp::init(&[n_in, n_hidden, n_out], head, rng.random()).unwrap();
            let input: Vec<f64> = (0..n_in).map(|_| rng.random_range(-2.0..2.0)).collect();
            // keep pre-activations away from the ReLU kink so the finite
            // difference stays on one smooth piece
            let (_, tape) = net.forward_tape(&input).unwrap();
            if tape.activations[1].iter().any(|&a| a.abs() < 1e-3) {
                continue;
            }
            let cot: Vec<f64> = (0..n_out).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut grad = vec![0.0; net.param_count()];
            net.backward(&tape, &cot, &mut grad).unwrap();
            let fd = finite_diff_grad(&net, &input, &cot);
            assert!(
                rel_err(&grad, &fd) < 1e-5,
                "probe {checked}: rel err {}",
                rel_err(&grad, &fd)
            );
            checked += 1;
        }
    }

    #[test]
    fn input_cotangent_matches_finite_differences() {
        let net = Mlp::init(&[2, 6, 1], OutputActivation::ScaledTanh(2.0), 11).unwrap();
        let input = [0.7, -0.4];
        let (_, tape) = net.forward_tape(&input).unwrap();
        let mut grad = vec![0.0; net.param_count()];
        let in_cot = net.backward(&tape, &[1.0], &mut grad).unwrap();
        let d = 1e-6;
        for k in 0..2 {
            let mut up = input;
            up[k] += d;
            let mut dn = input;
            dn[k] -= d;
            let fd = (net.forward(&up).unwrap()[0] - net.forward(&dn).unwrap()[0]) / (2.0 * d);
            assert!((fd - in_cot[k]).abs() < 1e-6, "k={k}: {fd} vs {}", in_cot[k]);
        }
    }

    #[test]
    fn init_determinism_and_bounds() {
        let a = Mlp::init(&[4, 8, 2], OutputActivation::Identity, 99).unwrap();
        let b = Mlp::init(&[4, 8, 2], OutputActivation::Identity, 99).unwrap();
        assert_eq!(a.params(), b.params());

        let c = Mlp::init(&[4, 8, 2], OutputActivation::Identity, 100).unwrap();
        assert_ne!(a.params(), c.params());

        // weights within the He-uniform bound per layer, biases zero
        let limit0 = (6.0f64 / 4.0).sqrt();
        for &w in &a.params()[0..32] {
            assert!(w.abs() < limit0);
        }
        assert!(a.params()[32..40].iter().all(|&b| b == 0.0));
        let limit1 = (6.0f64 / 8.0).sqrt();
        for &w in &a.params()[40..56] {
            assert!(w.abs() < limit1);
        }
    }

    #[test]
    fn softmax_head_jacobian_rows_sum_to_zero() {
        let net = Mlp::init(&[2, 3], OutputActivation::Softmax, 5).unwrap();
        let (_, tape) = net.forward_tape(&[0.3, 0.9]).unwrap();
        for i in 0..3 {
            let mut cot = vec![0.0; 3];
            cot[i] = 1.0;
            let mut grad = vec![0.0; net.param_count()];
            net.backward(&tape, &cot, &mut grad).unwrap();
            // bias gradient equals the pre-activation cotangent, whose sum
            // is the row sum of the softmax Jacobian
            let bias_sum: f64 = grad[6..9].iter().sum();
            assert!(bias_sum.abs() < 1e-14);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join("rro_nn_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.csv");
        let net = Mlp::init(&[3, 5, 2], OutputActivation::ScaledTanh(5.0), 17).unwrap();
        net.save(&path).unwrap();
        let loaded = Mlp::load(&path).unwrap();
        assert_eq!(net.params(), loaded.params());
        assert_eq!(net.sizes(), loaded.sizes());
        assert_eq!(net.output_activation(), loaded.output_activation());
    }

    #[test]
    fn scaled_tanh_bounds() {
        // tanh saturates to +-1 in floating point, so the closed bound is
        // what downstream inventory constraints rely on
        let net = Mlp::init(&[1, 8, 1], OutputActivation::ScaledTanh(5.0), 23).unwrap();
        for k in -50..=50 {
            let y = net.forward(&[k as f64]).unwrap()[0];
            assert!(y.abs() <= 5.0);
        }
        let y = net.forward(&[0.1]).unwrap()[0];
        assert!(y.abs() < 5.0);
    }

    #[test]
    fn batch_pullback_matches_sequential() {
        let net = Mlp::init(&[2, 6, 1], OutputActivation::Identity, 31).unwrap();
        let inputs: Vec<Vec<f64>> = (0..600)
            .map(|k| vec![(k as f64) * 0.01 - 3.0, ((k * 7) % 13) as f64 * 0.1])
            .collect();
        let fwd = net.forward_batch(&inputs).unwrap();
        let tapes: Vec<Tape> = fwd.iter().map(|(_, t)| t.clone()).collect();
        let cots: Vec<f64> = (0..600).map(|k| (k as f64 * 0.37).sin()).collect();
        let (grad, in_cots) = net.pullback_scalar_batch(&tapes, &cots).unwrap();

        let mut seq = vec![0.0; net.param_count()];
        let mut seq_in = Vec::new();
        for (t, &c) in tapes.iter().zip(cots.iter()) {
            seq_in.push(net.backward(t, &[c], &mut seq).unwrap());
        }
        for (a, b) in grad.iter().zip(seq.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(in_cots.len(), seq_in.len());
    }
}
