//! Model training: data splitting, scaling, linear solvers and gradient
//! boosting.

pub mod gbm;
pub mod linear;
pub mod pipeline;
pub mod scaler;
pub mod split;
pub mod tree;

pub use gbm::{feature_importance, GbmEnsemble, GbmHyper, Loss};
pub use linear::{lasso_fit, ols_fit, LassoConfig, LinearFit};
pub use scaler::MinMaxScaler;
pub use split::{sorted_stratified_split, Partition, SplitAssignment, SplitRatios};
pub use tree::{MaxFeatures, TreeNode, TreeParams};
