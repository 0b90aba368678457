//! A small fixed-topology tensor engine: convolution, pooling,
//! up-convolution and pointwise nonlinearities with exact backward passes,
//! assembled into a three-headed U-Net variant.

mod ops;
mod scalar;
mod tensor;
mod unet;


pub use ops::{
    concat_channels, conv2d_backward, conv2d_backward_into, conv2d_forward, maxpool2x2_backward,
    maxpool2x2_forward, relu_backward, relu_forward, sigmoid, sigmoid_backward, sigmoid_forward,
    split_channels, upconv2x2_backward, upconv2x2_backward_into, upconv2x2_forward, ConvGeometry,
    ConvGrads,
};
pub use scalar::Scalar;
pub use tensor::Tensor4;
pub use unet::{
    init_params, unet_backward, unet_forward, unet_forward_trace, ForwardTrace, LayerCensus,
    LayerDef, LayerKind, LayerParams, NetworkParams, NetworkSpec, UNetOutputs, HEADS, LEVELS,
    SPATIAL_MULTIPLE,
};
