//! Layer primitives with hand-written backward passes.

use crate::error::{shape_err, Error, Result};

use super::scalar::Scalar;
use super::tensor::Tensor4;

/// Zero padding and stride of a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub pad: usize,
    pub stride: usize,
}

impl ConvGeometry {
    pub const SAME_3X3: ConvGeometry = ConvGeometry { pad: 1, stride: 1 };
    pub const POINTWISE: ConvGeometry = ConvGeometry { pad: 0, stride: 1 };

    pub fn output_dims(&self, h: usize, w: usize, kh: usize, kw: usize) -> Result<(usize, usize)> {
        if self.stride == 0 {
            return Err(shape_err("stride must be positive"));
        }
        let (ph, pw) = (h + 2 * self.pad, w + 2 * self.pad);
        if ph < kh || pw < kw {
            return Err(shape_err(format!("kernel {kh}x{kw} larger than padded input {ph}x{pw}")));
        }
        Ok(((ph - kh) / self.stride + 1, (pw - kw) / self.stride + 1))
    }

    fn is_identity(&self, kh: usize, kw: usize) -> bool {
        kh == 1 && kw == 1 && self.pad == 0 && self.stride == 1
    }
}

struct ConvDims {
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
}

impl ConvDims {
    fn patch(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn out_plane(&self) -> usize {
        self.ho * self.wo
    }
}

fn conv_dims<T: Scalar>(
    input: &Tensor4<T>,
    weight: &Tensor4<T>,
    bias_len: usize,
    geom: ConvGeometry,
) -> Result<ConvDims> {
    let [_, cin, h, w] = input.shape();
    let [cout, wcin, kh, kw] = weight.shape();
    if wcin != cin {
        return Err(shape_err(format!(
            "conv weight expects {wcin} input channels, input has {cin}"
        )));
    }
    if bias_len != cout {
        return Err(shape_err(format!("conv bias has {bias_len} entries for {cout} outputs")));
    }
    let (ho, wo) = geom.output_dims(h, w, kh, kw)?;
    Ok(ConvDims {
        cin,
        cout,
        h,
        w,
        kh,
        kw,
        ho,
        wo,
    })
}

/// Unfolds one sample into a `(cin * kh * kw) x (ho * wo)` patch matrix.
fn im2col<T: Scalar>(src: &[T], d: &ConvDims, geom: ConvGeometry, col: &mut [T]) {
    let plane = d.out_plane();
    for c in 0..d.cin {
        let chan = &src[c * d.h * d.w..(c + 1) * d.h * d.w];
        for dy in 0..d.kh {
            for dx in 0..d.kw {
                let row = ((c * d.kh + dy) * d.kw + dx) * plane;
                let out = &mut col[row..row + plane];
                for oy in 0..d.ho {
                    let iy = (oy * geom.stride + dy) as isize - geom.pad as isize;
                    let line = &mut out[oy * d.wo..(oy + 1) * d.wo];
                    if iy < 0 || iy >= d.h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src_row = &chan[iy as usize * d.w..(iy as usize + 1) * d.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * geom.stride + dx) as isize - geom.pad as isize;
                        *v = if ix < 0 || ix >= d.w as isize {
                            T::zero()
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Folds a patch-gradient matrix back onto one input sample (accumulating).
fn col2im<T: Scalar>(col: &[T], d: &ConvDims, geom: ConvGeometry, dst: &mut [T]) {
    let plane = d.out_plane();
    for c in 0..d.cin {
        let chan = &mut dst[c * d.h * d.w..(c + 1) * d.h * d.w];
        for dy in 0..d.kh {
            for dx in 0..d.kw {
                let row = ((c * d.kh + dy) * d.kw + dx) * plane;
                let src = &col[row..row + plane];
                for oy in 0..d.ho {
                    let iy = (oy * geom.stride + dy) as isize - geom.pad as isize;
                    if iy < 0 || iy >= d.h as isize {
                        continue;
                    }
                    let base = iy as usize * d.w;
                    for ox in 0..d.wo {
                        let ix = (ox * geom.stride + dx) as isize - geom.pad as isize;
                        if ix >= 0 && ix < d.w as isize {
                            chan[base + ix as usize] += src[oy * d.wo + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation `out[b,o,y,x] = bias[o] + sum in[b,i,y*s+dy-p,x*s+dx-p] * w[o,i,dy,dx]`.
///
/// `weight` has shape (out_channels, in_channels, kh, kw).
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor4<T>,
    weight: &Tensor4<T>,
    bias: &[T],
    geom: ConvGeometry,
) -> Result<Tensor4<T>> {
    let d = conv_dims(input, weight, bias.len(), geom)?;
    let batch = input.batch();
    let mut out = Tensor4::zeros([batch, d.cout, d.ho, d.wo]);
    let plane = d.out_plane();
    let identity = geom.is_identity(d.kh, d.kw);
    let mut col = if identity {
        Vec::new()
    } else {
        vec![T::zero(); d.patch() * plane]
    };
    for b in 0..batch {
        let dst = out.sample_mut(b);
        for (o, chunk) in dst.chunks_mut(plane).enumerate() {
            chunk.fill(bias[o]);
        }
        let patches: &[T] = if identity {
            input.sample(b)
        } else {
            im2col(input.sample(b), &d, geom, &mut col);
            &col
        };
        T::gemm(
            d.cout,
            d.patch(),
            plane,
            T::one(),
            weight.data(),
            false,
            patches,
            false,
            T::one(),
            dst,
        );
    }
    Ok(out)
}

/// Gradients of a convolution with respect to its input, weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Tensor4<T>,
    pub weight: Tensor4<T>,
    pub bias: Vec<T>,
}

/// Accumulates weight/bias gradients into `grad_weight` / `grad_bias` and,
/// when requested, writes the input gradient.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward_into<T: Scalar>(
    input: &Tensor4<T>,
    weight: &Tensor4<T>,
    geom: ConvGeometry,
    grad_out: &Tensor4<T>,
    grad_weight: &mut [T],
    grad_bias: &mut [T],
    mut grad_input: Option<&mut Tensor4<T>>,
) -> Result<()> {
    let d = conv_dims(input, weight, grad_bias.len(), geom)?;
    let batch = input.batch();
    if grad_out.shape() != [batch, d.cout, d.ho, d.wo] {
        return Err(shape_err(format!(
            "conv grad_out {:?}, expected {:?}",
            grad_out.shape(),
            [batch, d.cout, d.ho, d.wo]
        )));
    }
    if grad_weight.len() != weight.len() {
        return Err(shape_err("conv weight-gradient buffer has the wrong length"));
    }
    if let Some(gi) = grad_input.as_deref() {
        if gi.shape() != input.shape() {
            return Err(shape_err("conv input-gradient buffer has the wrong shape"));
        }
    }
    let plane = d.out_plane();
    let identity = geom.is_identity(d.kh, d.kw);
    let mut col = if identity {
        Vec::new()
    } else {
        vec![T::zero(); d.patch() * plane]
    };
    let mut dcol = vec![T::zero(); d.patch() * plane];
    for b in 0..batch {
        let g = grad_out.sample(b);
        for (o, chunk) in g.chunks(plane).enumerate() {
            grad_bias[o] += chunk.iter().copied().sum::<T>();
        }
        let patches: &[T] = if identity {
            input.sample(b)
        } else {
            im2col(input.sample(b), &d, geom, &mut col);
            &col
        };
        // dW[cout, patch] += dOut[cout, plane] * patches^T
        T::gemm(
            d.cout,
            plane,
            d.patch(),
            T::one(),
            g,
            false,
            patches,
            true,
            T::one(),
            grad_weight,
        );
        if let Some(gi) = grad_input.as_deref_mut() {
            let dst = gi.sample_mut(b);
            if identity {
                T::gemm(
                    d.patch(),
                    d.cout,
                    plane,
                    T::one(),
                    weight.data(),
                    true,
                    g,
                    false,
                    T::zero(),
                    dst,
                );
            } else {
                T::gemm(
                    d.patch(),
                    d.cout,
                    plane,
                    T::one(),
                    weight.data(),
                    true,
                    g,
                    false,
                    T::zero(),
                    &mut dcol,
                );
                dst.fill(T::zero());
                col2im(&dcol, &d, geom, dst);
            }
        }
    }
    Ok(())
}

/// Exact gradients of [`conv2d_forward`].
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor4<T>,
    weight: &Tensor4<T>,
    geom: ConvGeometry,
    grad_out: &Tensor4<T>,
) -> Result<ConvGrads<T>> {
    let mut grads = ConvGrads {
        input: Tensor4::zeros(input.shape()),
        weight: Tensor4::zeros(weight.shape()),
        bias: vec![T::zero(); weight.shape()[0]],
    };
    conv2d_backward_into(
        input,
        weight,
        geom,
        grad_out,
        grads.weight.data_mut(),
        &mut grads.bias,
        Some(&mut grads.input),
    )?;
    Ok(grads)
}

/// 2x2 max-pooling with stride 2. Returns the output and, per output element,
/// the flat index of the selected input element. Ties go to the first
/// element in row-major order.
pub fn maxpool2x2_forward<T: Scalar>(input: &Tensor4<T>) -> Result<(Tensor4<T>, Vec<u32>)> {
    let [b_len, c_len, h, w] = input.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(shape_err(format!("max-pool needs even spatial dims, got {h}x{w}")));
    }
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Tensor4::zeros([b_len, c_len, ho, wo]);
    let mut argmax = Vec::with_capacity(out.len());
    let src = input.data();
    let dst = out.data_mut();
    let mut o = 0;
    for bc in 0..b_len * c_len {
        let base = bc * h * w;
        for y in 0..ho {
            for x in 0..wo {
                let mut best = base + 2 * y * w + 2 * x;
                for idx in [
                    best + 1,
                    base + (2 * y + 1) * w + 2 * x,
                    base + (2 * y + 1) * w + 2 * x + 1,
                ] {
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                dst[o] = src[best];
                argmax.push(best as u32);
                o += 1;
            }
        }
    }
    Ok((out, argmax))
}

/// Routes each output gradient to the input element selected in the forward pass.
pub fn maxpool2x2_backward<T: Scalar>(
    argmax: &[u32],
    grad_out: &Tensor4<T>,
    input_shape: [usize; 4],
) -> Result<Tensor4<T>> {
    if argmax.len() != grad_out.len() {
        return Err(shape_err("max-pool argmax does not match grad_out"));
    }
    let mut gi = Tensor4::zeros(input_shape);
    let dst = gi.data_mut();
    for (g, &idx) in grad_out.data().iter().zip(argmax) {
        let idx = idx as usize;
        if idx >= dst.len() {
            return Err(shape_err("max-pool argmax out of range"));
        }
        dst[idx] += *g;
    }
    Ok(gi)
}

fn upconv_check<T: Scalar>(input: &Tensor4<T>, weight: &Tensor4<T>, bias_len: usize) -> Result<usize> {
    let [wcin, cout, kh, kw] = weight.shape();
    if wcin != input.channels() || kh != 2 || kw != 2 {
        return Err(shape_err(format!(
            "up-conv weight {:?} incompatible with input {:?}",
            weight.shape(),
            input.shape()
        )));
    }
    if bias_len != cout {
        return Err(shape_err("up-conv bias length mismatch"));
    }
    Ok(cout)
}

/// Stride-2 2x2 transposed convolution; `weight` has shape (in, out, 2, 2).
pub fn upconv2x2_forward<T: Scalar>(
    input: &Tensor4<T>,
    weight: &Tensor4<T>,
    bias: &[T],
) -> Result<Tensor4<T>> {
    let cout = upconv_check(input, weight, bias.len())?;
    let [b_len, cin, h, w] = input.shape();
    let plane = h * w;
    let mut out = Tensor4::zeros([b_len, cout, 2 * h, 2 * w]);
    let mut cols = vec![T::zero(); cout * 4 * plane];
    for b in 0..b_len {
        T::gemm(
            cout * 4,
            cin,
            plane,
            T::one(),
            weight.data(),
            true,
            input.sample(b),
            false,
            T::zero(),
            &mut cols,
        );
        let dst = out.sample_mut(b);
        for o in 0..cout {
            for q in 0..4 {
                let (dy, dx) = (q / 2, q % 2);
                let src = &cols[(o * 4 + q) * plane..(o * 4 + q + 1) * plane];
                for y in 0..h {
                    let row = (o * 2 * h + 2 * y + dy) * 2 * w;
                    for x in 0..w {
                        dst[row + 2 * x + dx] = src[y * w + x] + bias[o];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Accumulating backward pass of [`upconv2x2_forward`]; returns the input gradient.
pub fn upconv2x2_backward_into<T: Scalar>(
    input: &Tensor4<T>,
    weight: &Tensor4<T>,
    grad_out: &Tensor4<T>,
    grad_weight: &mut [T],
    grad_bias: &mut [T],
) -> Result<Tensor4<T>> {
    let cout = upconv_check(input, weight, grad_bias.len())?;
    let [b_len, cin, h, w] = input.shape();
    if grad_out.shape() != [b_len, cout, 2 * h, 2 * w] {
        return Err(shape_err("up-conv grad_out shape mismatch"));
    }
    if grad_weight.len() != weight.len() {
        return Err(shape_err("up-conv weight-gradient buffer has the wrong length"));
    }
    let plane = h * w;
    let mut dcols = vec![T::zero(); cout * 4 * plane];
    let mut gi = Tensor4::zeros(input.shape());
    for b in 0..b_len {
        let g = grad_out.sample(b);
        for o in 0..cout {
            let mut acc = T::zero();
            for q in 0..4 {
                let (dy, dx) = (q / 2, q % 2);
                let dst = &mut dcols[(o * 4 + q) * plane..(o * 4 + q + 1) * plane];
                for y in 0..h {
                    let row = (o * 2 * h + 2 * y + dy) * 2 * w;
                    for x in 0..w {
                        let v = g[row + 2 * x + dx];
                        dst[y * w + x] = v;
                        acc += v;
                    }
                }
            }
            grad_bias[o] += acc;
        }
        // dW[cin, cout*4] += X[cin, plane] * dcols^T
        T::gemm(
            cin,
            plane,
            cout * 4,
            T::one(),
            input.sample(b),
            false,
            &dcols,
            true,
            T::one(),
            grad_weight,
        );
        // dX[cin, plane] = W[cin, cout*4] * dcols
        T::gemm(
            cin,
            cout * 4,
            plane,
            T::one(),
            weight.data(),
            false,
            &dcols,
            false,
            T::zero(),
            gi.sample_mut(b),
        );
    }
    Ok(gi)
}

/// Gradients of [`upconv2x2_forward`] as (input, weight, bias).
pub fn upconv2x2_backward<T: Scalar>(
    input: &Tensor4<T>,
    weight: &Tensor4<T>,
    grad_out: &Tensor4<T>,
) -> Result<ConvGrads<T>> {
    let mut gw = Tensor4::zeros(weight.shape());
    let mut gb = vec![T::zero(); weight.shape()[1]];
    let gi = upconv2x2_backward_into(input, weight, grad_out, gw.data_mut(), &mut gb)?;
    Ok(ConvGrads {
        input: gi,
        weight: gw,
        bias: gb,
    })
}

pub fn relu_forward<T: Scalar>(input: &Tensor4<T>) -> Tensor4<T> {
    let mut out = input.clone();
    relu_inplace(&mut out);
    out
}

pub(crate) fn relu_inplace<T: Scalar>(t: &mut Tensor4<T>) {
    for v in t.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// ReLU gradient given the forward *output*.
pub fn relu_backward<T: Scalar>(output: &Tensor4<T>, grad_out: &Tensor4<T>) -> Result<Tensor4<T>> {
    let mut g = grad_out.clone();
    relu_backward_inplace(output, &mut g)?;
    Ok(g)
}

pub(crate) fn relu_backward_inplace<T: Scalar>(output: &Tensor4<T>, grad: &mut Tensor4<T>) -> Result<()> {
    if output.shape() != grad.shape() {
        return Err(shape_err("relu gradient shape mismatch"));
    }
    for (g, y) in grad.data_mut().iter_mut().zip(output.data()) {
        if *y <= T::zero() {
            *g = T::zero();
        }
    }
    Ok(())
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid_forward<T: Scalar>(input: &Tensor4<T>) -> Tensor4<T> {
    let mut out = input.clone();
    for v in out.data_mut() {
        *v = sigmoid(*v);
    }
    out
}

/// Sigmoid gradient given the forward *output*.
pub fn sigmoid_backward<T: Scalar>(output: &Tensor4<T>, grad_out: &Tensor4<T>) -> Result<Tensor4<T>> {
    if output.shape() != grad_out.shape() {
        return Err(shape_err("sigmoid gradient shape mismatch"));
    }
    let mut g = grad_out.clone();
    for (g, y) in g.data_mut().iter_mut().zip(output.data()) {
        *g *= *y * (T::one() - *y);
    }
    Ok(g)
}

/// Concatenates along the channel axis.
pub fn concat_channels<T: Scalar>(a: &Tensor4<T>, b: &Tensor4<T>) -> Result<Tensor4<T>> {
    let [ba, ca, h, w] = a.shape();
    let [bb, cb, hb, wb] = b.shape();
    if ba != bb || h != hb || w != wb {
        return Err(shape_err(format!("concat {:?} with {:?}", a.shape(), b.shape())));
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    for s in 0..ba {
        data.extend_from_slice(a.sample(s));
        data.extend_from_slice(b.sample(s));
    }
    Tensor4::from_vec([ba, ca + cb, h, w], data)
}

/// Splits a channel-concatenated gradient back into its two parts.
pub fn split_channels<T: Scalar>(t: &Tensor4<T>, first: usize) -> Result<(Tensor4<T>, Tensor4<T>)> {
    let [b_len, c, h, w] = t.shape();
    if first > c {
        return Err(Error::Shape(format!("cannot split {c} channels at {first}")));
    }
    let cut = first * h * w;
    let mut a = Vec::with_capacity(b_len * cut);
    let mut b = Vec::with_capacity(t.len() - b_len * cut);
    for s in 0..b_len {
        let sample = t.sample(s);
        a.extend_from_slice(&sample[..cut]);
        b.extend_from_slice(&sample[cut..]);
    }
    Ok((
        Tensor4::from_vec([b_len, first, h, w], a)?,
        Tensor4::from_vec([b_len, c - first, h, w], b)?,
    ))
}
