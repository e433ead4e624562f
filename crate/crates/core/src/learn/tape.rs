//! A minimal reverse-mode tape over the five layer operators the heads
//! use: dilated 3x3 / 1x1 convolution, bias, leaky ReLU, residual add and
//! the logistic squash. Losses are differentiated outside the tape and fed
//! back in as seed gradients.

use super::scalar::Scalar;
use super::tensor::Tensor;

pub const LEAKY_ALPHA: f64 = 0.1;

pub type NodeId = usize;

enum Op {
    Input,
    Conv {
        x: NodeId,
        w: usize,
        kernel: usize,
        dilation: usize,
    },
    Bias {
        x: NodeId,
        b: usize,
    },
    LeakyRelu {
        x: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Sigmoid {
        x: NodeId,
    },
}

struct Node<S: Scalar> {
    value: Tensor<S>,
    op: Op,
    /// im2col matrix kept for the conv backward pass.
    cache: Option<Tensor<S>>,
}

pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id].value
    }

    pub fn input(&mut self, value: Tensor<S>) -> NodeId {
        self.push(value, Op::Input, None)
    }

    fn push(&mut self, value: Tensor<S>, op: Op, cache: Option<Tensor<S>>) -> NodeId {
        value.assert_finite("tape op");
        self.nodes.push(Node { value, op, cache });
        self.nodes.len() - 1
    }

    /// Stride-1 zero-padded convolution keeping spatial dims. `weights`
    /// has shape [Cout, Cin*k*k]; `kernel` is 1 or odd with `dilation`.
    pub fn conv(
        &mut self,
        x: NodeId,
        params: &[Tensor<S>],
        w: usize,
        kernel: usize,
        dilation: usize,
    ) -> NodeId {
        let xv = &self.nodes[x].value;
        let (cin, h, wd) = chw(xv);
        let wt = &params[w];
        let cout = wt.dims[0];
        assert_eq!(
            wt.dims[1],
            cin * kernel * kernel,
            "weight shape mismatches input channels"
        );
        let p = h * wd;
        let mut y = Tensor::zeros(&[cout, h, wd]);
        if kernel == 1 {
            unsafe {
                S::gemm(
                    cout,
                    cin,
                    p,
                    S::ONE,
                    wt.data.as_ptr(),
                    cin as isize,
                    1,
                    xv.data.as_ptr(),
                    p as isize,
                    1,
                    S::ZERO,
                    y.data.as_mut_ptr(),
                    p as isize,
                    1,
                );
            }
            self.push(
                y,
                Op::Conv {
                    x,
                    w,
                    kernel,
                    dilation,
                },
                None,
            )
        } else {
            let col = im2col(xv, kernel, dilation);
            let k = cin * kernel * kernel;
            unsafe {
                S::gemm(
                    cout,
                    k,
                    p,
                    S::ONE,
                    wt.data.as_ptr(),
                    k as isize,
                    1,
                    col.data.as_ptr(),
                    1,
                    k as isize,
                    S::ZERO,
                    y.data.as_mut_ptr(),
                    p as isize,
                    1,
                );
            }
            self.push(
                y,
                Op::Conv {
                    x,
                    w,
                    kernel,
                    dilation,
                },
                Some(col),
            )
        }
    }

    pub fn bias(&mut self, x: NodeId, params: &[Tensor<S>], b: usize) -> NodeId {
        let xv = &self.nodes[x].value;
        let (c, h, w) = chw(xv);
        let bv = &params[b];
        assert_eq!(bv.numel(), c);
        let mut y = xv.clone();
        for ci in 0..c {
            let add = bv.data[ci];
            for v in &mut y.data[ci * h * w..(ci + 1) * h * w] {
                *v += add;
            }
        }
        self.push(y, Op::Bias { x, b }, None)
    }

    pub fn leaky_relu(&mut self, x: NodeId) -> NodeId {
        let alpha = S::from_f64(LEAKY_ALPHA);
        let mut y = self.nodes[x].value.clone();
        for v in &mut y.data {
            if *v < S::ZERO {
                *v = *v * alpha;
            }
        }
        self.push(y, Op::LeakyRelu { x }, None)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
        assert!(av.same_shape(bv));
        let mut y = av.clone();
        for (o, v) in y.data.iter_mut().zip(&bv.data) {
            *o += *v;
        }
        self.push(y, Op::Add { a, b }, None)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let mut y = self.nodes[x].value.clone();
        for v in &mut y.data {
            *v = S::ONE / (S::ONE + (-*v).exp());
        }
        self.push(y, Op::Sigmoid { x }, None)
    }

    /// Reverse pass from `output` seeded with dL/d(output). Returns dL/dp
    /// for every parameter; untouched parameters get explicit zeros.
    pub fn backward(
        &self,
        output: NodeId,
        seed: Tensor<S>,
        params: &[Tensor<S>],
    ) -> Vec<Tensor<S>> {
        assert!(seed.same_shape(&self.nodes[output].value));
        let mut param_grads: Vec<Tensor<S>> = params
            .iter()
            .map(|p| Tensor::zeros(&p.dims))
            .collect();
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output] = Some(seed);

        for id in (0..=output).rev() {
            let Some(gy) = grads[id].take() else {
                continue;
            };
            match &self.nodes[id].op {
                Op::Input => {}
                Op::Conv {
                    x,
                    w,
                    kernel,
                    dilation,
                } => {
                    let xv = &self.nodes[*x].value;
                    let (cin, h, wd) = chw(xv);
                    let p = h * wd;
                    let cout = params[*w].dims[0];
                    if *kernel == 1 {
                        // dW[co,ci] = sum_p gy[co,p] x[ci,p]
                        unsafe {
                            S::gemm(
                                cout,
                                p,
                                cin,
                                S::ONE,
                                gy.data.as_ptr(),
                                p as isize,
                                1,
                                xv.data.as_ptr(),
                                1,
                                p as isize,
                                S::ONE,
                                param_grads[*w].data.as_mut_ptr(),
                                cin as isize,
                                1,
                            );
                        }
                        // dX[ci,p] = sum_co W[co,ci] gy[co,p]
                        let mut dx = Tensor::zeros(&xv.dims);
                        unsafe {
                            S::gemm(
                                cin,
                                cout,
                                p,
                                S::ONE,
                                params[*w].data.as_ptr(),
                                1,
                                cin as isize,
                                gy.data.as_ptr(),
                                p as isize,
                                1,
                                S::ZERO,
                                dx.data.as_mut_ptr(),
                                p as isize,
                                1,
                            );
                        }
                        accumulate(&mut grads[*x], dx);
                    } else {
                        let col = self.nodes[id]
                            .cache
                            .as_ref()
                            .expect("conv node retains its col buffer");
                        let k = cin * kernel * kernel;
                        // dW[co,kk] += sum_p gy[co,p] col[p,kk]
                        unsafe {
                            S::gemm(
                                cout,
                                p,
                                k,
                                S::ONE,
                                gy.data.as_ptr(),
                                p as isize,
                                1,
                                col.data.as_ptr(),
                                k as isize,
                                1,
                                S::ONE,
                                param_grads[*w].data.as_mut_ptr(),
                                k as isize,
                                1,
                            );
                        }
                        // dcol[p,kk] = sum_co gy[co,p] W[co,kk]
                        let mut dcol = Tensor::zeros(&[p, k]);
                        unsafe {
                            S::gemm(
                                p,
                                cout,
                                k,
                                S::ONE,
                                gy.data.as_ptr(),
                                1,
                                p as isize,
                                params[*w].data.as_ptr(),
                                k as isize,
                                1,
                                S::ZERO,
                                dcol.data.as_mut_ptr(),
                                k as isize,
                                1,
                            );
                        }
                        let dx = col2im(&dcol, cin, h, wd, *kernel, *dilation);
                        accumulate(&mut grads[*x], dx);
                    }
                }
                Op::Bias { x, b } => {
                    let (c, h, w) = chw(&self.nodes[*x].value);
                    for ci in 0..c {
                        let mut s = S::ZERO;
                        for v in &gy.data[ci * h * w..(ci + 1) * h * w] {
                            s += *v;
                        }
                        param_grads[*b].data[ci] += s;
                    }
                    accumulate(&mut grads[*x], gy);
                }
                Op::LeakyRelu { x } => {
                    let alpha = S::from_f64(LEAKY_ALPHA);
                    let xv = &self.nodes[*x].value;
                    let mut dx = gy;
                    for (g, v) in dx.data.iter_mut().zip(&xv.data) {
                        if *v < S::ZERO {
                            *g = *g * alpha;
                        }
                    }
                    accumulate(&mut grads[*x], dx);
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads[*a], gy.clone());
                    accumulate(&mut grads[*b], gy);
                }
                Op::Sigmoid { x } => {
                    let yv = &self.nodes[id].value;
                    let mut dx = gy;
                    for (g, y) in dx.data.iter_mut().zip(&yv.data) {
                        *g = *g * *y * (S::ONE - *y);
                    }
                    accumulate(&mut grads[*x], dx);
                }
            }
        }
        param_grads
    }
}

fn chw<S: Scalar>(t: &Tensor<S>) -> (usize, usize, usize) {
    assert_eq!(t.dims.len(), 3, "expected [C, H, W] tensor");
    (t.dims[0], t.dims[1], t.dims[2])
}

fn accumulate<S: Scalar>(slot: &mut Option<Tensor<S>>, g: Tensor<S>) {
    match slot {
        None => *slot = Some(g),
        Some(acc) => {
            for (a, v) in acc.data.iter_mut().zip(&g.data) {
                *a += *v;
            }
        }
    }
}

/// col[p, (ci, kr, kc)] = x[ci, y + (kr-off)*d, x + (kc-off)*d], zero pad.
fn im2col<S: Scalar>(x: &Tensor<S>, kernel: usize, dilation: usize) -> Tensor<S> {
    let (cin, h, w) = chw(x);
    let k = cin * kernel * kernel;
    let off = (kernel as isize - 1) / 2;
    let mut col = Tensor::zeros(&[h * w, k]);
    for ci in 0..cin {
        let plane = &x.data[ci * h * w..(ci + 1) * h * w];
        for kr in 0..kernel {
            let dy = (kr as isize - off) * dilation as isize;
            for kc in 0..kernel {
                let dx = (kc as isize - off) * dilation as isize;
                let kk = ci * kernel * kernel + kr * kernel + kc;
                for y in 0..h as isize {
                    let sy = y + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let row_base = (y as usize * w) * k + kk;
                    let src_base = sy as usize * w;
                    let x_lo = (-dx).max(0);
                    let x_hi = (w as isize - dx).min(w as isize);
                    for xx in x_lo..x_hi {
                        col.data[row_base + xx as usize * k] =
                            plane[src_base + (xx + dx) as usize];
                    }
                }
            }
        }
    }
    col
}

fn col2im<S: Scalar>(
    dcol: &Tensor<S>,
    cin: usize,
    h: usize,
    w: usize,
    kernel: usize,
    dilation: usize,
) -> Tensor<S> {
    let k = cin * kernel * kernel;
    let off = (kernel as isize - 1) / 2;
    let mut dx = Tensor::zeros(&[cin, h, w]);
    for ci in 0..cin {
        let plane_base = ci * h * w;
        for kr in 0..kernel {
            let dy = (kr as isize - off) * dilation as isize;
            for kc in 0..kernel {
                let dxo = (kc as isize - off) * dilation as isize;
                let kk = ci * kernel * kernel + kr * kernel + kc;
                for y in 0..h as isize {
                    let sy = y + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src_base = sy as usize * w;
                    let x_lo = (-dxo).max(0);
                    let x_hi = (w as isize - dxo).min(w as isize);
                    for xx in x_lo..x_hi {
                        dx.data[plane_base + src_base + (xx + dxo) as usize] +=
                            dcol.data[(y as usize * w + xx as usize) * k + kk];
                    }
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rand_tensor(dims: &[usize], rng: &mut impl Rng) -> Tensor<f64> {
        let n: usize = dims.iter().product();
        Tensor::from_vec(dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    /// FD check of d(sum(out * probe))/d(param) for one op pipeline.
    fn fd_check<F>(params: Vec<Tensor<f64>>, input: Tensor<f64>, forward: F)
    where
        F: Fn(&mut Tape<f64>, NodeId, &[Tensor<f64>]) -> NodeId,
    {
        let mut rng = crate::rng::stream(7, "fd-probe", 0);
        let mut tape = Tape::new();
        let x = tape.input(input.clone());
        let out = forward(&mut tape, x, &params);
        let probe = rand_tensor(&tape.value(out).dims, &mut rng);
        let grads = tape.backward(out, probe.clone(), &params);

        let loss = |ps: &[Tensor<f64>]| -> f64 {
            let mut t = Tape::new();
            let x = t.input(input.clone());
            let o = forward(&mut t, x, ps);
            t.value(o)
                .data
                .iter()
                .zip(&probe.data)
                .map(|(a, b)| a * b)
                .sum()
        };

        let h = 1e-3;
        for (pi, p) in params.iter().enumerate() {
            for _ in 0..8.min(p.numel()) {
                let ci = rng.gen_range(0..p.numel());
                let mut plus = params.clone();
                plus[pi].data[ci] += h;
                let mut minus = params.clone();
                minus[pi].data[ci] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let an = grads[pi].data[ci];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel < 1e-4, "param {pi}[{ci}]: fd {fd} vs autodiff {an}");
            }
        }
    }

    #[test]
    fn conv3x3_dilated_gradients() {
        let mut rng = crate::rng::stream(1, "t", 0);
        for dilation in [1usize, 2] {
            let params = vec![rand_tensor(&[3, 2 * 9], &mut rng)];
            let input = rand_tensor(&[2, 7, 8], &mut rng);
            fd_check(params, input, |t, x, ps| t.conv(x, ps, 0, 3, dilation));
        }
    }

    #[test]
    fn conv1x1_gradients() {
        let mut rng = crate::rng::stream(2, "t", 0);
        let params = vec![rand_tensor(&[4, 3], &mut rng)];
        let input = rand_tensor(&[3, 5, 6], &mut rng);
        fd_check(params, input, |t, x, ps| t.conv(x, ps, 0, 1, 1));
    }

    #[test]
    fn bias_relu_add_sigmoid_gradients() {
        let mut rng = crate::rng::stream(3, "t", 0);
        let params = vec![
            rand_tensor(&[3, 2 * 9], &mut rng),
            rand_tensor(&[3], &mut rng),
            rand_tensor(&[3, 3 * 9], &mut rng),
        ];
        let input = rand_tensor(&[2, 6, 6], &mut rng);
        fd_check(params, input, |t, x, ps| {
            let c1 = t.conv(x, ps, 0, 3, 1);
            let b1 = t.bias(c1, ps, 1);
            let r1 = t.leaky_relu(b1);
            let c2 = t.conv(r1, ps, 2, 3, 2);
            let res = t.add(c2, r1); // residual
            t.sigmoid(res)
        });
    }

    #[test]
    fn single_1x1_conv_quadratic_closed_form() {
        // one pixel, one channel: y = w*x + b, L = (y - t)^2
        // dL/dw = 2 (wx + b - t) x
        let (wv, bv, xv, tv) = (0.7, -0.2, 0.3, 0.9);
        let params = vec![
            Tensor::from_vec(&[1, 1], vec![wv]),
            Tensor::from_vec(&[1], vec![bv]),
        ];
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.input(Tensor::from_vec(&[1, 1, 1], vec![xv]));
        let c = tape.conv(x, &params, 0, 1, 1);
        let y = tape.bias(c, &params, 1);
        let yv = tape.value(y).data[0];
        // seed with dL/dy = 2 (y - t)
        let grads = tape.backward(y, Tensor::from_vec(&[1, 1, 1], vec![2.0 * (yv - tv)]), &params);
        let expect_w = 2.0 * (wv * xv + bv - tv) * xv;
        let expect_b = 2.0 * (wv * xv + bv - tv);
        assert!((grads[0].data[0] - expect_w).abs() < 1e-12);
        assert!((grads[1].data[0] - expect_b).abs() < 1e-12);
    }

    #[test]
    fn zero_seed_gives_zero_gradients_for_all_params() {
        let mut rng = crate::rng::stream(4, "t", 0);
        let params = vec![
            rand_tensor(&[3, 2 * 9], &mut rng),
            rand_tensor(&[3], &mut rng),
            rand_tensor(&[5, 4], &mut rng), // unused parameter
        ];
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.input(rand_tensor(&[2, 5, 5], &mut rng));
        let c = tape.conv(x, &params, 0, 3, 1);
        let y = tape.bias(c, &params, 1);
        let grads = tape.backward(y, Tensor::zeros(&[3, 5, 5]), &params);
        assert_eq!(grads.len(), 3);
        for g in &grads {
            assert!(g.data.iter().all(|v| *v == 0.0));
        }
        // unused parameter still has an explicit (zero) gradient entry
        assert_eq!(grads[2].dims, vec![5, 4]);
    }
}
