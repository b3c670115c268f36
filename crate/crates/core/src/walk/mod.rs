//! Random-walk fluctuation theory and the kernel of the walk killed below the strip.

mod ladder;
mod model;
mod tensor;

pub use ladder::{
    doney_local_check, duality_check, ladder_tail_probs, ladder_tails_quadrature, renewal_function_estimate,
    sample_ladder, DoneyReport, DualityRow, LadderSample, LadderTailTable, RenewalFunctionEstimate,
};
pub use model::{WalkKind, WalkModel};
pub use tensor::{
    constrained_kernel, constrained_kernel_mc, phi_from_tails, thm_pr_check, ConstrainedKernelTensor, HalfLine,
    KernelMc, PhiSource, TensorParams, ThmPrReport,
};
