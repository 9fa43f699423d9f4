//! Dense and CSR-sparse direct convolution, Conv-Relu-Maxpool fusion and
//! the density sweep.

mod conv;
mod csr;
pub mod io;
pub mod ir;
mod sweep;
mod tensor;

pub use conv::{
    dense_conv, fused_conv_relu_maxpool, maxpool2x2, relu, sparse_conv, unfused_conv_relu_maxpool, Weights,
};
pub use csr::CsrWeights;
pub use sweep::{
    crossover, default_densities, density_sweep, random_input, random_weights, sparse_time_inversions, SweepRow,
    LAYER_DENSITIES,
};
pub use tensor::{ConvShape, DenseTensor4};
