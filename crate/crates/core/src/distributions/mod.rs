//! Densities and samplers: scalar GIG and Gamma, Wishart, and matrix GIG.

pub mod gamma;
pub mod gig;
pub mod mcmc;
pub mod mgig;
pub mod rng;
pub mod scalar;
pub mod wishart;

pub use gamma::{gamma_logpdf_unnorm, gamma_sample, GammaParams};
pub use gig::{gig_log_kernel, gig_logpdf_unnorm, gig_sample, GigParams};
pub use mcmc::{mgig_mh_chains, mgig_mh_sample, ChainConfig, ChainOutput};
pub use mgig::{invert_law, mgig_log_kernel, mgig_logpdf_unnorm, MgigParams, MgigParamsRecord};
pub use rng::{RngStream, StreamRng};
pub use scalar::ScalarLaw;
pub use wishart::{random_spd, wishart_sample, WishartDraw, WishartParams};
