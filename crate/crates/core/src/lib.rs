//! Quantile-binned polynomial and spline regression ("binscatter") with
//! semi-linear covariate adjustment, IMSE-optimal bin selection, and
//! uniform inference.

pub mod basis;
pub mod binselect;
pub mod dataset;
pub mod error;
pub mod fit;
pub mod inference;
pub mod linalg;
pub mod partition;
pub mod rng;
pub mod simharness;
pub mod variance;

pub use basis::{BasisSpec, ExtendedKnots, SparseBasisRow, TransformMatrix};
pub use binselect::{dpi_select, rot_select, select, DpiOptions, ImseConstants, Method, Selection};
pub use dataset::{sort_index, Dataset, LoadReport, SortIndex};
pub use error::{Error, ErrorClass, Result};
pub use partition::QuantilePartition;
pub use inference::{
    confidence_band, pointwise_ci, test_shape, test_specification, BandResult, Direction, EvalGrid, InferenceConfig,
    ParamModel, RbcSetup, TestResult,
};
pub use fit::{fit_binscatter, fit_residualized, Dot, FitResult};
pub use variance::{sandwich, sandwich_clustered, VarianceModel, VceMode};
pub use simharness::{generate, run_experiment, DgpSpec, ExperimentConfig, ExperimentKind, Summary, WMode};
