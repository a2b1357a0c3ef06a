//! Phase preprocessing: Laplacian unwrapping and V-SHARP background removal.

mod unwrap;
mod vsharp;

pub use unwrap::laplacian_unwrap;
pub use vsharp::{smv_kernel, vsharp, VSharpConfig};
