//! Tensor container and layer kernels.

mod batchnorm;
mod conv;
mod ops;
mod tensor;

pub use batchnorm::{
    batchnorm_backward, batchnorm_forward, batchnorm_forward_infer, batchnorm_forward_train, BnCache, BnGrads,
    BnParams, Mode, BN_EPS, BN_MOMENTUM,
};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvParams};
pub(crate) use conv::conv2d_backward_params;
pub use ops::{add, add_backward, mse_loss, relu_backward, relu_forward};
pub use tensor::{Shape, Tensor};
