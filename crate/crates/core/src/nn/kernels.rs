use rand::Rng;

use super::{Architecture, LayerKind, ModelParams, Shape};
use crate::error::{Error, Result};
use crate::seed;
use crate::subword::SubwordImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active; masks are drawn from a stream keyed by this seed.
    Train {
        dropout_seed: u64,
    },
}

#[derive(Debug, Clone)]
enum Cache {
    Conv { col: Vec<f64>, out: Vec<f64> },
    Pool { argmax: Vec<u32> },
    Dense { input: Vec<f64>, out: Vec<f64> },
    Dropout { mask: Option<Vec<f64>> },
}

/// Activations cached by [`forward`] for the matching [`backward`] call.
#[derive(Debug, Clone)]
pub struct Tape {
    caches: Vec<Cache>,
    embedding_len: usize,
}

/// Runs one image through the chain, returning the embedding and the tape.
pub fn forward(
    params: &ModelParams,
    arch: &Architecture,
    img: &SubwordImage,
    mode: Mode,
) -> Result<(Vec<f64>, Tape)> {
    arch.check_image(img)?;
    params.check(arch)?;
    let mut act = img.pixels().to_vec();
    let mut caches = Vec::with_capacity(arch.specs().len());
    for (idx, spec) in arch.specs().iter().enumerate() {
        let input = arch.input_shape_of(idx);
        let output = arch.output_shapes()[idx];
        let layer = &params.layers[idx];
        let (next, cache) = match spec.kind {
            LayerKind::Conv => {
                let (kh, kw) = spec.kernel;
                let col = im2col(&act, input, kh, kw, output);
                let k = input.channels * kh * kw;
                let p = output.height * output.width;
                let mut out = vec![0.0; output.channels * p];
                for (f, row) in out.chunks_mut(p).enumerate() {
                    row.fill(layer.bias[f]);
                }
                gemm(
                    output.channels,
                    k,
                    p,
                    &layer.weights,
                    false,
                    &col,
                    false,
                    &mut out,
                    1.0,
                );
                relu(&mut out);
                (out.clone(), Cache::Conv { col, out })
            }
            LayerKind::MaxPool => {
                let (out, argmax) = maxpool(&act, input, spec.kernel, output);
                (out, Cache::Pool { argmax })
            }
            LayerKind::Dense => {
                let n = input.len();
                let mut out = layer.bias.clone();
                for (u, o) in out.iter_mut().enumerate() {
                    *o += dot(&layer.weights[u * n..(u + 1) * n], &act);
                }
                relu(&mut out);
                (out.clone(), Cache::Dense { input: act, out })
            }
            LayerKind::Dropout => match mode {
                Mode::Train { dropout_seed } if spec.rate > 0.0 => {
                    let mut rng = seed::rng(seed::derive_n(dropout_seed, &[idx as u64]));
                    let keep = 1.0 / (1.0 - spec.rate);
                    let mask: Vec<f64> = (0..act.len())
                        .map(|_| {
                            if rng.random::<f64>() < spec.rate {
                                0.0
                            } else {
                                keep
                            }
                        })
                        .collect();
                    let out = act.iter().zip(&mask).map(|(a, m)| a * m).collect();
                    (out, Cache::Dropout { mask: Some(mask) })
                }
                _ => (act, Cache::Dropout { mask: None }),
            },
        };
        act = next;
        caches.push(cache);
    }
    let embedding_len = act.len();
    Ok((
        act,
        Tape {
            caches,
            embedding_len,
        },
    ))
}

/// Backpropagates `upstream` (d loss / d embedding) through the tape and
/// returns the parameter gradients.
pub fn backward(
    params: &ModelParams,
    arch: &Architecture,
    tape: &Tape,
    upstream: &[f64],
) -> Result<ModelParams> {
    if tape.caches.len() != arch.specs().len() || upstream.len() != tape.embedding_len {
        return Err(Error::Internal(
            "tape does not match this architecture".into(),
        ));
    }
    let mut grads = ModelParams::zeros(arch);
    let mut grad = upstream.to_vec();
    for idx in (0..arch.specs().len()).rev() {
        let spec = &arch.specs()[idx];
        let input = arch.input_shape_of(idx);
        let output = arch.output_shapes()[idx];
        let need_input_grad = idx > 0;
        grad = match (&tape.caches[idx], spec.kind) {
            (Cache::Conv { col, out }, LayerKind::Conv) => {
                let (kh, kw) = spec.kernel;
                let k = input.channels * kh * kw;
                let p = output.height * output.width;
                relu_backward(&mut grad, out);
                let g = &mut grads.layers[idx];
                for (f, row) in grad.chunks(p).enumerate() {
                    g.bias[f] = row.iter().sum();
                }
                gemm(
                    output.channels,
                    p,
                    k,
                    &grad,
                    false,
                    col,
                    true,
                    &mut g.weights,
                    0.0,
                );
                if need_input_grad {
                    let mut dcol = vec![0.0; k * p];
                    gemm(
                        k,
                        output.channels,
                        p,
                        &params.layers[idx].weights,
                        true,
                        &grad,
                        false,
                        &mut dcol,
                        0.0,
                    );
                    col2im(&dcol, input, kh, kw, output)
                } else {
                    Vec::new()
                }
            }
            (Cache::Pool { argmax }, LayerKind::MaxPool) => {
                let mut dx = vec![0.0; input.len()];
                for (o, &src) in argmax.iter().enumerate() {
                    dx[src as usize] += grad[o];
                }
                dx
            }
            (Cache::Dense { input: x, out }, LayerKind::Dense) => {
                relu_backward(&mut grad, out);
                let n = x.len();
                let w = &params.layers[idx].weights;
                let g = &mut grads.layers[idx];
                g.bias.copy_from_slice(&grad);
                let mut dx = vec![0.0; if need_input_grad { n } else { 0 }];
                for (u, &gu) in grad.iter().enumerate() {
                    if gu == 0.0 {
                        continue;
                    }
                    let gw = &mut g.weights[u * n..(u + 1) * n];
                    for (d, &xi) in gw.iter_mut().zip(x) {
                        *d = gu * xi;
                    }
                    if need_input_grad {
                        for (d, &wi) in dx.iter_mut().zip(&w[u * n..(u + 1) * n]) {
                            *d += gu * wi;
                        }
                    }
                }
                dx
            }
            (Cache::Dropout { mask }, LayerKind::Dropout) => {
                if let Some(mask) = mask {
                    for (g, m) in grad.iter_mut().zip(mask) {
                        *g *= m;
                    }
                }
                grad
            }
            _ => {
                return Err(Error::Internal(format!(
                    "tape entry {idx} has the wrong layer kind"
                )))
            }
        };
    }
    Ok(grads)
}

fn relu(xs: &mut [f64]) {
    for x in xs {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn relu_backward(grad: &mut [f64], out: &[f64]) {
    for (g, &o) in grad.iter_mut().zip(out) {
        if o <= 0.0 {
            *g = 0.0;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[c * 4 + l] * b[c * 4 + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Unrolls every `kh x kw` patch into a `(C*kh*kw) x (oh*ow)` matrix.
fn im2col(x: &[f64], input: Shape, kh: usize, kw: usize, output: Shape) -> Vec<f64> {
    let (oh, ow) = (output.height, output.width);
    let p = oh * ow;
    let mut col = vec![0.0; input.channels * kh * kw * p];
    let plane = input.height * input.width;
    for c in 0..input.channels {
        let src = &x[c * plane..(c + 1) * plane];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((c * kh + ky) * kw + kx) * p;
                for oy in 0..oh {
                    let s = (oy + ky) * input.width + kx;
                    col[row + oy * ow..row + (oy + 1) * ow].copy_from_slice(&src[s..s + ow]);
                }
            }
        }
    }
    col
}

fn col2im(col: &[f64], input: Shape, kh: usize, kw: usize, output: Shape) -> Vec<f64> {
    let (oh, ow) = (output.height, output.width);
    let p = oh * ow;
    let plane = input.height * input.width;
    let mut x = vec![0.0; input.len()];
    for c in 0..input.channels {
        let dst = &mut x[c * plane..(c + 1) * plane];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((c * kh + ky) * kw + kx) * p;
                for oy in 0..oh {
                    let d = (oy + ky) * input.width + kx;
                    for (t, &v) in dst[d..d + ow]
                        .iter_mut()
                        .zip(&col[row + oy * ow..row + (oy + 1) * ow])
                    {
                        *t += v;
                    }
                }
            }
        }
    }
    x
}

fn maxpool(
    x: &[f64],
    input: Shape,
    (ph, pw): (usize, usize),
    output: Shape,
) -> (Vec<f64>, Vec<u32>) {
    let mut out = Vec::with_capacity(output.len());
    let mut argmax = Vec::with_capacity(output.len());
    let plane = input.height * input.width;
    for c in 0..input.channels {
        for oy in 0..output.height {
            for ox in 0..output.width {
                let mut best = f64::NEG_INFINITY;
                let mut at = 0usize;
                for dy in 0..ph {
                    for dx in 0..pw {
                        let i = c * plane + (oy * ph + dy) * input.width + ox * pw + dx;
                        if x[i] > best {
                            best = x[i];
                            at = i;
                        }
                    }
                }
                out.push(best);
                argmax.push(at as u32);
            }
        }
    }
    (out, argmax)
}

/// `C = op(A) * op(B) + beta * C` for row-major buffers. `A` is logically
/// `m x k` (stored `k x m` when `a_t`), `B` is `k x n` (stored `n x k` when `b_t`).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if b_t {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    // SAFETY: the asserts above bound every index the kernel touches given
    // these strides, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
