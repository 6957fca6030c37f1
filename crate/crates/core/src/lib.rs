//! Spectral graph fractional wavelet transforms.
//!
//! The pipeline is: build a [`Graph`], eigendecompose its Laplacian
//! ([`eig_decompose`]), raise the eigenvector basis to a fractional order
//! ([`fractional_basis`]), then analyse signals with a [`FilterBank`] either
//! exactly ([`forward_exact`]) or through truncated Fourier series of the
//! fractional Laplacian ([`forward_fast`]).

extern crate blas_src;
extern crate openblas_src;

pub mod atoms;
pub mod config;
pub mod data;
pub mod error;
pub mod exact;
pub mod fast;
pub mod graph;
pub mod kernels;
pub mod linalg;
pub mod spectral;

pub use atoms::{theta_grid, write_atom_grid};
pub use config::KeyValues;
pub use data::{augment_dataset, swiss_roll, AugmentConfig, AugmentPlan, ImageDataset, PointCloud};
pub use error::{Error, Result};
pub use exact::{atom, forward_exact, inverse_exact, CoefficientPyramid};
pub use fast::{
    adjoint, build_propagators, error_bound, forward_fast, fourier_coefficients, product_coefficients, reconstruct_cg,
    series_apply, wtw_apply, CgReport, FourierApprox, FourierOptions, PropagatorPair,
};
pub use graph::{build_graph, gaussian_point_cloud_graph, image_grid_graph, laplacian, Edge, Graph, LaplacianMatrix, Sparsify};
pub use kernels::{
    admissibility_integral, eval_kernel, frame_bounds, make_scaling_kernel, make_spline_kernel, select_scales, BankParams,
    FilterBank, ScalingKernel, SpectralKernel, SplineKernel,
};
pub use linalg::{CMatrix, RMatrix, C64};
pub use spectral::{eig_decompose, fractional_basis, gfrft, igfrft, FractionalOperator, SpectralDecomposition};
