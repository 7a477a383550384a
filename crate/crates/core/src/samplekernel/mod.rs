//! Count transforms and sample-level kernel matrices.

mod kernels;
mod transform;
mod unifrac;

pub use kernels::{linear_kernel, rbf_median_kernel, stringphylo_kernel, KernelKind, KernelMatrix};
pub use transform::{transform, AbundanceMatrix, Transform, DEFAULT_PSEUDOCOUNT};
pub use unifrac::{distance_to_kernel, unifrac_distance, unifrac_kernel, CenteringOptions, UnifracMode};
