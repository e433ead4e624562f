//! The fully-convolutional dilated residual trunk shared by all three
//! heads, parameter initialization and the heightmap input encoding.

use rand::Rng;

use super::scalar::Scalar;
use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::config::NetworkConfig;
use crate::render::Heightmap;
use crate::rng::stream;

/// Height normalization scale: heights up to ~5 cm map into [0, 1].
const HEIGHT_SCALE: f64 = 20.0;

/// Network description: trunk from config plus a 1x1 head projection.
#[derive(Debug, Clone)]
pub struct Network {
    pub config: NetworkConfig,
    pub head_channels: usize,
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(config: &NetworkConfig, head_channels: usize) -> Self {
        let mut names = Vec::new();
        let mut shapes = Vec::new();
        let mut cin = config.in_channels;
        for (i, b) in config.blocks.iter().enumerate() {
            names.push(format!("block{i}.weight"));
            shapes.push(vec![b.channels, cin * b.kernel * b.kernel]);
            names.push(format!("block{i}.bias"));
            shapes.push(vec![b.channels]);
            cin = b.channels;
        }
        names.push("head.weight".to_string());
        shapes.push(vec![head_channels, cin]);
        names.push("head.bias".to_string());
        shapes.push(vec![head_channels]);
        Network {
            config: config.clone(),
            head_channels,
            names,
            shapes,
        }
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    /// He-uniform weights, zero biases; deterministic in `seed`.
    pub fn init_params<S: Scalar>(&self, seed: u64) -> Vec<Tensor<S>> {
        self.shapes
            .iter()
            .enumerate()
            .map(|(i, shape)| {
                if shape.len() == 1 {
                    Tensor::zeros(shape)
                } else {
                    let fan_in = shape[1] as f64;
                    let limit = (6.0 / fan_in).sqrt();
                    let mut rng = stream(seed, "init", i as u64);
                    let n: usize = shape.iter().product();
                    Tensor::from_vec(
                        shape,
                        (0..n)
                            .map(|_| S::from_f64(rng.gen_range(-limit..limit)))
                            .collect(),
                    )
                }
            })
            .collect()
    }

    /// Trunk + head forward; returns raw head output (logits/descriptors).
    pub fn forward<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        params: &[Tensor<S>],
        input: NodeId,
    ) -> NodeId {
        assert_eq!(
            params.len(),
            self.shapes.len(),
            "parameter count mismatches the architecture"
        );
        let mut x = input;
        let mut pi = 0;
        for b in &self.config.blocks {
            let c = tape.conv(x, params, pi, b.kernel, b.dilation);
            let t = tape.bias(c, params, pi + 1);
            let t = if b.residual { tape.add(t, x) } else { t };
            x = tape.leaky_relu(t);
            pi += 2;
        }
        let h = tape.conv(x, params, pi, 1, 1);
        tape.bias(h, params, pi + 1)
    }

    /// Inference forward on a heightmap; affordance heads squash to (0,1).
    pub fn infer<S: Scalar>(
        &self,
        params: &[Tensor<S>],
        hm: &Heightmap,
        squash: bool,
    ) -> Tensor<S> {
        let mut tape = Tape::new();
        let input = tape.input(heightmap_to_input(hm));
        let out = self.forward(&mut tape, params, input);
        let out = if squash { tape.sigmoid(out) } else { out };
        tape.value(out).clone()
    }
}

/// Encode a heightmap as the 2-channel network input.
pub fn heightmap_to_input<S: Scalar>(hm: &Heightmap) -> Tensor<S> {
    let n = hm.h * hm.w;
    let mut data = Vec::with_capacity(2 * n);
    data.extend(
        hm.gray
            .iter()
            .map(|g| S::from_f64((*g as f64 - 0.5) * 2.0)),
    );
    data.extend(
        hm.height
            .iter()
            .map(|h| S::from_f64(*h as f64 * HEIGHT_SCALE - 0.5)),
    );
    Tensor::from_vec(&[2, hm.h, hm.w], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    #[test]
    fn output_dims_match_input_dims() {
        let cfg = RunConfig::desk();
        let net = Network::new(&cfg.network, 1);
        let params: Vec<Tensor<f32>> = net.init_params(3);
        for (h, w) in [(32usize, 32usize), (40, 24)] {
            let hm = Heightmap::filled(h, w, (0.0, 0.0), 0.004, 0.3, 0.0);
            let out = net.infer(&params, &hm, true);
            assert_eq!(out.dims, vec![1, h, w]);
        }
    }

    #[test]
    fn zeroed_head_gives_half_everywhere() {
        let cfg = RunConfig::desk();
        let net = Network::new(&cfg.network, 1);
        let mut params: Vec<Tensor<f32>> = net.init_params(3);
        let n = params.len();
        params[n - 2] = Tensor::zeros(&net.param_shapes()[n - 2]);
        params[n - 1] = Tensor::zeros(&net.param_shapes()[n - 1]);
        let hm = Heightmap::filled(16, 16, (0.0, 0.0), 0.004, 0.4, 0.01);
        let out = net.infer(&params, &hm, true);
        assert!(out.data.iter().all(|v| (*v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn translation_equivariance_in_the_interior() {
        let cfg = RunConfig::desk();
        let net = Network::new(&cfg.network, 1);
        let params: Vec<Tensor<f32>> = net.init_params(5);
        // a small bump far from borders
        let mut hm = Heightmap::filled(64, 64, (0.0, 0.0), 0.004, 0.25, 0.0);
        for r in 28..33 {
            for c in 28..33 {
                let i = hm.idx(r, c);
                hm.height[i] = 0.02;
                hm.gray[i] = 0.8;
            }
        }
        let out_a = net.infer(&params, &hm, true);
        // shift the bump by (6, 4)
        let mut hm2 = Heightmap::filled(64, 64, (0.0, 0.0), 0.004, 0.25, 0.0);
        for r in 28..33 {
            for c in 28..33 {
                let i = hm2.idx(r + 6, c + 4);
                hm2.height[i] = 0.02;
                hm2.gray[i] = 0.8;
            }
        }
        let out_b = net.infer(&params, &hm2, true);
        let argmax = |t: &Tensor<f32>| {
            let mut best = (0usize, f32::MIN);
            for (i, v) in t.data.iter().enumerate() {
                if *v > best.1 {
                    best = (i, *v);
                }
            }
            (best.0 / 64, best.0 % 64)
        };
        let (ra, ca) = argmax(&out_a);
        let (rb, cb) = argmax(&out_b);
        assert_eq!((rb, cb), (ra + 6, ca + 4));
    }

    #[test]
    fn deterministic_init_and_forward() {
        let cfg = RunConfig::desk();
        let net = Network::new(&cfg.network, 4);
        let a: Vec<Tensor<f32>> = net.init_params(11);
        let b: Vec<Tensor<f32>> = net.init_params(11);
        assert_eq!(a, b);
        let hm = Heightmap::filled(24, 24, (0.0, 0.0), 0.004, 0.3, 0.005);
        assert_eq!(net.infer(&a, &hm, false), net.infer(&b, &hm, false));
    }
}
