//! Samplers and densities: continuous and discrete Gaussians, the
//! homogeneous CLWE ("Gaussian pancake") distribution, the unit sphere and
//! Haar-random rotations.

mod discrete;
mod gaussian;
mod pancake;
mod sphere;

pub use discrete::{sample_discrete_gaussian, DiscreteGaussianParams};
pub use gaussian::sample_std_gaussian_vec;
pub use pancake::{
    hclwe_component_weight, hclwe_pdf_1d, sample_hclwe, sample_hclwe_projection, PancakeDensity1d,
    PancakeParams, PancakeShape,
};
pub use sphere::{sample_rotation, sample_uniform_sphere, sphere_coord_density};
