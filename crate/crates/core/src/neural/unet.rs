use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

use super::ops::{
    concat_channels, conv2d_backward_into, conv2d_forward, maxpool2x2_backward,
    maxpool2x2_forward, relu_backward_inplace, relu_inplace, sigmoid, split_channels,
    upconv2x2_backward_into, upconv2x2_forward, ConvGeometry,
};
use super::scalar::Scalar;
use super::tensor::Tensor4;

/// Encoder depth of the network.
pub const LEVELS: usize = 5;
/// Number of output maps: presence, x coordinate, y coordinate.
pub const HEADS: usize = 3;
/// Spatial dims must be divisible by this (four 2x poolings).
pub const SPATIAL_MULTIPLE: usize = 1 << (LEVELS - 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv3x3,
    UpConv2x2,
    Conv1x1,
}

impl LayerKind {
    pub fn code(self) -> u8 {
        match self {
            LayerKind::Conv3x3 => 0,
            LayerKind::UpConv2x2 => 1,
            LayerKind::Conv1x1 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(LayerKind::Conv3x3),
            1 => Some(LayerKind::UpConv2x2),
            2 => Some(LayerKind::Conv1x1),
            _ => None,
        }
    }
}

/// One learnable layer of the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDef {
    pub name: String,
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl LayerDef {
    fn new(name: impl Into<String>, kind: LayerKind, in_channels: usize, out_channels: usize) -> Self {
        Self {
            name: name.into(),
            kind,
            in_channels,
            out_channels,
        }
    }

    /// Conv: (out, in, k, k). Up-conv: (in, out, 2, 2).
    pub fn weight_shape(&self) -> [usize; 4] {
        match self.kind {
            LayerKind::Conv3x3 => [self.out_channels, self.in_channels, 3, 3],
            LayerKind::Conv1x1 => [self.out_channels, self.in_channels, 1, 1],
            LayerKind::UpConv2x2 => [self.in_channels, self.out_channels, 2, 2],
        }
    }

    /// Inputs feeding one output element.
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv3x3 => self.in_channels * 9,
            LayerKind::Conv1x1 => self.in_channels,
            LayerKind::UpConv2x2 => self.in_channels,
        }
    }
}

/// Hidden-layer counts of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCensus {
    pub conv: usize,
    pub max_pool: usize,
    pub up_conv: usize,
}

impl LayerCensus {
    pub const EXPECTED: LayerCensus = LayerCensus {
        conv: 20,
        max_pool: 4,
        up_conv: 4,
    };

    pub fn hidden(&self) -> usize {
        self.conv + self.max_pool + self.up_conv
    }
}

/// Topology of the three-headed U-Net variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub in_channels: usize,
    /// Channel width of each encoder level.
    pub widths: Vec<usize>,
}

impl NetworkSpec {
    pub const DEFAULT_WIDTHS: [usize; LEVELS] = [16, 32, 64, 128, 256];

    /// Builds a spec, refusing any topology whose hidden-layer census is
    /// not 20 conv + 4 max-pool + 4 up-conv.
    pub fn new(in_channels: usize, widths: &[usize]) -> Result<Self> {
        if in_channels == 0 || widths.iter().any(|w| *w == 0) {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        let spec = Self {
            in_channels,
            widths: widths.to_vec(),
        };
        let census = spec.census();
        if census != LayerCensus::EXPECTED || census.hidden() != 28 {
            return Err(Error::Config(format!(
                "hidden-layer census {census:?} ({} layers) does not match 20 conv / 4 max-pool / 4 up-conv",
                census.hidden()
            )));
        }
        Ok(spec)
    }

    pub fn with_default_widths(in_channels: usize) -> Result<Self> {
        Self::new(in_channels, &Self::DEFAULT_WIDTHS)
    }

    pub fn census(&self) -> LayerCensus {
        let levels = self.widths.len();
        let steps = levels.saturating_sub(1);
        LayerCensus {
            conv: 2 * levels + 2 * steps + 2,
            max_pool: steps,
            up_conv: steps,
        }
    }

    /// Layers in execution order: encoder, decoder, shared, heads.
    pub fn layers(&self) -> Vec<LayerDef> {
        let w = &self.widths;
        let mut out = Vec::new();
        let mut prev = self.in_channels;
        for (l, &width) in w.iter().enumerate() {
            out.push(LayerDef::new(format!("enc{l}.conv1"), LayerKind::Conv3x3, prev, width));
            out.push(LayerDef::new(format!("enc{l}.conv2"), LayerKind::Conv3x3, width, width));
            prev = width;
        }
        for l in (0..w.len() - 1).rev() {
            out.push(LayerDef::new(format!("dec{l}.up"), LayerKind::UpConv2x2, w[l + 1], w[l]));
            out.push(LayerDef::new(format!("dec{l}.conv1"), LayerKind::Conv3x3, 2 * w[l], w[l]));
            out.push(LayerDef::new(format!("dec{l}.conv2"), LayerKind::Conv3x3, w[l], w[l]));
        }
        out.push(LayerDef::new("shared.conv1", LayerKind::Conv3x3, w[0], w[0]));
        out.push(LayerDef::new("shared.conv2", LayerKind::Conv3x3, w[0], w[0]));
        for head in ["head.presence", "head.x", "head.y"] {
            out.push(LayerDef::new(head, LayerKind::Conv1x1, w[0], 1));
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.layers()
            .iter()
            .map(|l| l.weight_shape().iter().product::<usize>() + l.out_channels)
            .sum()
    }
}

// Layer indices in `NetworkSpec::layers` order.
fn enc_idx(level: usize, j: usize) -> usize {
    2 * level + j
}
fn dec_idx(level: usize, j: usize) -> usize {
    // decoder levels run 3, 2, 1, 0
    2 * LEVELS + 3 * (LEVELS - 2 - level) + j
}
const SHARED: usize = 2 * LEVELS + 3 * (LEVELS - 1);
const HEAD: usize = SHARED + 2;

/// Weight and bias of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub def: LayerDef,
    pub weight: Tensor4<T>,
    pub bias: Vec<T>,
}

/// All learnable tensors of a network; also used for gradients and momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    pub spec: NetworkSpec,
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Scalar> NetworkParams<T> {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layers()
            .into_iter()
            .map(|def| LayerParams {
                weight: Tensor4::zeros(def.weight_shape()),
                bias: vec![T::zero(); def.out_channels],
                def,
            })
            .collect();
        Self {
            spec: spec.clone(),
            layers,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.spec)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Visits every scalar of `self` together with the matching scalar of `other`.
    pub fn zip_mut(&mut self, other: &Self, mut f: impl FnMut(&mut T, T)) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.data_mut().iter_mut().zip(b.weight.data()) {
                f(x, *y);
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                f(x, *y);
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Self, factor: T) {
        self.zip_mut(other, |a, b| *a += b * factor);
    }

    pub fn scale(&mut self, factor: T) {
        for l in &mut self.layers {
            l.weight.scale(factor);
            for b in &mut l.bias {
                *b *= factor;
            }
        }
    }

    pub fn flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Mutable access to the `i`th scalar in [`NetworkParams::flat`] order.
    pub fn flat_mut(&mut self, mut i: usize) -> Option<&mut T> {
        for l in &mut self.layers {
            let w = l.weight.len();
            if i < w {
                return Some(&mut l.weight.data_mut()[i]);
            }
            i -= w;
            if i < l.bias.len() {
                return Some(&mut l.bias[i]);
            }
            i -= l.bias.len();
        }
        None
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> NetworkParams<U> {
        NetworkParams {
            spec: self.spec.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    def: l.def.clone(),
                    weight: l.weight.cast(),
                    bias: l.bias.iter().map(|b| U::from_f64(b.as_f64())).collect(),
                })
                .collect(),
        }
    }
}

/// He-normal weights (std sqrt(2 / fan_in)) and zero biases.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, seed: u64) -> NetworkParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = NetworkParams::zeros(spec);
    for layer in &mut params.layers {
        let std = (2.0 / layer.def.fan_in() as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite positive std");
        for w in layer.weight.data_mut() {
            *w = T::from_f64(normal.sample(&mut rng));
        }
    }
    params
}

/// The three sigmoid output maps, each (batch, 1, K, M).
#[derive(Debug, Clone, PartialEq)]
pub struct UNetOutputs<T> {
    pub presence: Tensor4<T>,
    pub coord_x: Tensor4<T>,
    pub coord_y: Tensor4<T>,
}

impl<T: Scalar> UNetOutputs<T> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            presence: Tensor4::zeros(shape),
            coord_x: Tensor4::zeros(shape),
            coord_y: Tensor4::zeros(shape),
        }
    }

    pub fn maps(&self) -> [&Tensor4<T>; HEADS] {
        [&self.presence, &self.coord_x, &self.coord_y]
    }
}

/// Activations kept from a forward pass for the backward pass.
pub struct ForwardTrace<T> {
    /// Input of every layer, in layer order.
    inputs: Vec<Tensor4<T>>,
    /// Post-activation output of every layer.
    outputs: Vec<Tensor4<T>>,
    pool_argmax: Vec<Vec<u32>>,
    pool_shapes: Vec<[usize; 4]>,
}

struct Runner<'a, T: Scalar> {
    params: &'a NetworkParams<T>,
    trace: Option<ForwardTrace<T>>,
}

impl<T: Scalar> Runner<'_, T> {
    fn layer(&mut self, idx: usize, x: Tensor4<T>, relu: bool) -> Result<Tensor4<T>> {
        let p = &self.params.layers[idx];
        let mut y = match p.def.kind {
            LayerKind::Conv3x3 => conv2d_forward(&x, &p.weight, &p.bias, ConvGeometry::SAME_3X3)?,
            LayerKind::Conv1x1 => conv2d_forward(&x, &p.weight, &p.bias, ConvGeometry::POINTWISE)?,
            LayerKind::UpConv2x2 => upconv2x2_forward(&x, &p.weight, &p.bias)?,
        };
        if relu {
            relu_inplace(&mut y);
        }
        if let Some(trace) = self.trace.as_mut() {
            trace.inputs[idx] = x;
            trace.outputs[idx] = y.clone();
        }
        Ok(y)
    }

    fn pool(&mut self, level: usize, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let (y, argmax) = maxpool2x2_forward(x)?;
        if let Some(trace) = self.trace.as_mut() {
            trace.pool_argmax[level] = argmax;
            trace.pool_shapes[level] = x.shape();
        }
        Ok(y)
    }

    fn run(&mut self, input: &Tensor4<T>) -> Result<UNetOutputs<T>> {
        let spec = &self.params.spec;
        let [_, c, h, w] = input.shape();
        if c != spec.in_channels {
            return Err(shape_err(format!(
                "network expects {} input channels, got {c}",
                spec.in_channels
            )));
        }
        if h % SPATIAL_MULTIPLE != 0 || w % SPATIAL_MULTIPLE != 0 || h == 0 || w == 0 {
            return Err(shape_err(format!(
                "spatial dims {h}x{w} must be positive multiples of {SPATIAL_MULTIPLE}"
            )));
        }
        let levels = spec.widths.len();
        let mut skips = Vec::with_capacity(levels);
        let mut x = input.clone();
        for l in 0..levels {
            let a = self.layer(enc_idx(l, 0), x, true)?;
            let b = self.layer(enc_idx(l, 1), a, true)?;
            if l + 1 < levels {
                x = self.pool(l, &b)?;
                skips.push(b);
            } else {
                x = b;
            }
        }
        for l in (0..levels - 1).rev() {
            let up = self.layer(dec_idx(l, 0), x, false)?;
            let joined = concat_channels(&up, &skips[l])?;
            let a = self.layer(dec_idx(l, 1), joined, true)?;
            x = self.layer(dec_idx(l, 2), a, true)?;
        }
        x = self.layer(SHARED, x, true)?;
        x = self.layer(SHARED + 1, x, true)?;
        let mut heads = Vec::with_capacity(HEADS);
        for h in 0..HEADS {
            let mut logits = self.layer(HEAD + h, x.clone(), false)?;
            for v in logits.data_mut() {
                *v = sigmoid(*v);
            }
            if let Some(trace) = self.trace.as_mut() {
                trace.outputs[HEAD + h] = logits.clone();
            }
            heads.push(logits);
        }
        let coord_y = heads.pop().expect("three heads");
        let coord_x = heads.pop().expect("three heads");
        let presence = heads.pop().expect("three heads");
        Ok(UNetOutputs {
            presence,
            coord_x,
            coord_y,
        })
    }
}

/// Inference-only forward pass.
pub fn unet_forward<T: Scalar>(params: &NetworkParams<T>, input: &Tensor4<T>) -> Result<UNetOutputs<T>> {
    Runner {
        params,
        trace: None,
    }
    .run(input)
}

/// Forward pass that keeps the activations needed by [`unet_backward`].
pub fn unet_forward_trace<T: Scalar>(
    params: &NetworkParams<T>,
    input: &Tensor4<T>,
) -> Result<(UNetOutputs<T>, ForwardTrace<T>)> {
    let n = params.layers.len();
    let levels = params.spec.widths.len();
    let empty = Tensor4::zeros([0, 0, 0, 0]);
    let mut runner = Runner {
        params,
        trace: Some(ForwardTrace {
            inputs: vec![empty.clone(); n],
            outputs: vec![empty; n],
            pool_argmax: vec![Vec::new(); levels - 1],
            pool_shapes: vec![[0; 4]; levels - 1],
        }),
    };
    let out = runner.run(input)?;
    Ok((out, runner.trace.expect("trace enabled")))
}

fn layer_backward<T: Scalar>(
    params: &NetworkParams<T>,
    trace: &ForwardTrace<T>,
    grads: &mut NetworkParams<T>,
    idx: usize,
    grad_out: &Tensor4<T>,
    want_input: bool,
) -> Result<Option<Tensor4<T>>> {
    let p = &params.layers[idx];
    let g = &mut grads.layers[idx];
    let input = &trace.inputs[idx];
    match p.def.kind {
        LayerKind::UpConv2x2 => {
            let gi = upconv2x2_backward_into(input, &p.weight, grad_out, g.weight.data_mut(), &mut g.bias)?;
            Ok(Some(gi))
        }
        kind => {
            let geom = if kind == LayerKind::Conv3x3 {
                ConvGeometry::SAME_3X3
            } else {
                ConvGeometry::POINTWISE
            };
            let mut gi = want_input.then(|| Tensor4::zeros(input.shape()));
            conv2d_backward_into(
                input,
                &p.weight,
                geom,
                grad_out,
                g.weight.data_mut(),
                &mut g.bias,
                gi.as_mut(),
            )?;
            Ok(gi)
        }
    }
}

fn relu_layer_backward<T: Scalar>(
    params: &NetworkParams<T>,
    trace: &ForwardTrace<T>,
    grads: &mut NetworkParams<T>,
    idx: usize,
    mut grad_out: Tensor4<T>,
    want_input: bool,
) -> Result<Option<Tensor4<T>>> {
    relu_backward_inplace(&trace.outputs[idx], &mut grad_out)?;
    layer_backward(params, trace, grads, idx, &grad_out, want_input)
}

/// Backpropagates loss gradients with respect to the three (post-sigmoid)
/// output maps and accumulates parameter gradients into `grads`.
pub fn unet_backward<T: Scalar>(
    params: &NetworkParams<T>,
    trace: &ForwardTrace<T>,
    grad_outputs: &UNetOutputs<T>,
    grads: &mut NetworkParams<T>,
) -> Result<()> {
    let levels = params.spec.widths.len();
    let mut g: Option<Tensor4<T>> = None;
    for (h, go) in grad_outputs.maps().into_iter().enumerate() {
        let y = &trace.outputs[HEAD + h];
        if go.shape() != y.shape() {
            return Err(shape_err(format!(
                "output gradient {:?} vs output {:?}",
                go.shape(),
                y.shape()
            )));
        }
        let mut dz = go.clone();
        for (d, s) in dz.data_mut().iter_mut().zip(y.data()) {
            *d *= *s * (T::one() - *s);
        }
        let gi = layer_backward(params, trace, grads, HEAD + h, &dz, true)?.expect("input grad");
        match g.as_mut() {
            Some(acc) => acc.add_assign(&gi)?,
            None => g = Some(gi),
        }
    }
    let mut g = g.expect("three heads");
    g = relu_layer_backward(params, trace, grads, SHARED + 1, g, true)?.expect("input grad");
    g = relu_layer_backward(params, trace, grads, SHARED, g, true)?.expect("input grad");

    let mut skip_grads = Vec::with_capacity(levels - 1);
    for l in 0..levels - 1 {
        g = relu_layer_backward(params, trace, grads, dec_idx(l, 2), g, true)?.expect("input grad");
        let joined = relu_layer_backward(params, trace, grads, dec_idx(l, 1), g, true)?.expect("input grad");
        let (g_up, g_skip) = split_channels(&joined, params.spec.widths[l])?;
        skip_grads.push(g_skip);
        g = layer_backward(params, trace, grads, dec_idx(l, 0), &g_up, true)?.expect("input grad");
    }
    for l in (0..levels).rev() {
        if l + 1 < levels {
            let mut gb = maxpool2x2_backward(&trace.pool_argmax[l], &g, trace.pool_shapes[l])?;
            gb.add_assign(&skip_grads[l])?;
            g = gb;
        }
        g = relu_layer_backward(params, trace, grads, enc_idx(l, 1), g, true)?.expect("input grad");
        match relu_layer_backward(params, trace, grads, enc_idx(l, 0), g, l > 0)? {
            Some(next) => g = next,
            None => break,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn census_holds_for_default_spec() {
        let spec = NetworkSpec::with_default_widths(32).unwrap();
        assert_eq!(spec.census(), LayerCensus::EXPECTED);
        assert_eq!(spec.census().hidden(), 28);
        let convs = spec
            .layers()
            .iter()
            .filter(|l| l.kind == LayerKind::Conv3x3)
            .count();
        let ups = spec
            .layers()
            .iter()
            .filter(|l| l.kind == LayerKind::UpConv2x2)
            .count();
        assert_eq!((convs, ups), (20, 4));
        assert_eq!(spec.layers().len(), 27);
    }

    #[test]
    fn wrong_depth_fails_loudly() {
        assert!(NetworkSpec::new(32, &[8, 16, 32, 64]).is_err());
        assert!(NetworkSpec::new(32, &[8, 16, 32, 64, 128, 256]).is_err());
        assert!(NetworkSpec::new(32, &[8, 16, 0, 64, 128]).is_err());
    }

    #[test]
    fn layer_indices_line_up_with_names() {
        let spec = NetworkSpec::new(4, &[2, 3, 4, 5, 6]).unwrap();
        let layers = spec.layers();
        assert_eq!(layers[enc_idx(4, 1)].name, "enc4.conv2");
        assert_eq!(layers[dec_idx(3, 0)].name, "dec3.up");
        assert_eq!(layers[dec_idx(0, 2)].name, "dec0.conv2");
        assert_eq!(layers[SHARED].name, "shared.conv1");
        assert_eq!(layers[HEAD + 2].name, "head.y");
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let spec = NetworkSpec::new(4, &[2, 2, 2, 2, 2]).unwrap();
        let a: NetworkParams<f32> = init_params(&spec, 11);
        let b: NetworkParams<f32> = init_params(&spec, 11);
        let c: NetworkParams<f32> = init_params(&spec, 12);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn rejects_indivisible_input() {
        let spec = NetworkSpec::new(2, &[2, 2, 2, 2, 2]).unwrap();
        let params: NetworkParams<f64> = init_params(&spec, 0);
        let x = Tensor4::zeros([1, 2, 24, 16]);
        assert!(unet_forward(&params, &x).is_err());
        let x = Tensor4::zeros([1, 3, 16, 16]);
        assert!(unet_forward(&params, &x).is_err());
    }
}
