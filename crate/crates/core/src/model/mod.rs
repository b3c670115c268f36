//! State space, heavy-tailed Markov renewal kernels and their stationary law.

mod grid;
mod kernel;
mod law;
mod stationary;

pub use grid::StateGrid;
pub use kernel::{build_test_kernel, Family, HeavyTailKernelFamily, KernelSpec, HEAD};
pub use law::{InterarrivalLaw, SlowlyVarying};
pub use stationary::{pi2_expectation, stationary_distribution, StationaryMeasure};
