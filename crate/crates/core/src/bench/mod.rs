//! Built-in kernels and the op-count/timing experiments driven by the CLI.

mod inverse_compose;
mod localization;
mod matmul;
mod registry;
mod report;
mod singularity;
mod timing;

pub use inverse_compose::{
    inverse_compose_functions, run_inverse_compose, validate_inverse_compose, InverseComposeKernels, CHAIN_TOLERANCE,
    DENSE_3X6_6X6_OPS, FINITE_DIFFERENCE_TOLERANCE,
};
pub use localization::{
    assembly_difference, build_localization, pose_key, run_localization, LocalizationConfig, LocalizationOutcome,
    LocalizationProblem, AGREEMENT_TOLERANCE,
};
pub use matmul::{
    dense_product_ops, example_matrices, product_transpose, random_entry, random_matrix, run_matmul, MatmulOutcome,
    SparsityPattern, SPARSITY_PATTERNS,
};
pub use registry::{build_kernel, sample_inputs, tree_outputs, RegisteredKernel, KERNEL_NAMES};
pub use report::{relative_error, BenchMeta, BenchReport, BenchRow};
pub use singularity::{singularity_case, SingularityCase, SINGULARITY_NAMES};
pub use timing::median_ns;
