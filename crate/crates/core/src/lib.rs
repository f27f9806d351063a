//! Best linear unbiased prediction for Gaussian processes with trend.

pub mod continuous;
pub mod design;
pub mod discrete;
pub mod error;
pub mod kernels;
pub mod measures;
pub mod numerics;
pub mod tables;
pub mod product;
pub mod trend;
pub mod verify;

pub use continuous::{ClosedFormSolution, ContinuousModel, TargetMeasure, TrendSystem, ZetaPath};
pub use design::{Design, DesignFamily, Observation};
pub use discrete::{
    blue_discrete, discrete_blup, discrete_blup_average, discrete_blup_derivs, BlupSolution,
    DiscreteModel, Target,
};
pub use error::{Error, Result};
pub use kernels::{Kernel, MarkovFns, Pattern, Point};
pub use measures::{ProductMeasure2D, SignedMeasure, VectorMeasure};
pub use product::{
    design_family, mse_grid, product_blup, product_blup_derivs, GridSource, MseGrid, ProductModel,
    ProductSolution, Region, TensorGridModel,
};
pub use trend::Trend;
