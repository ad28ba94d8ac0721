//! Quality-of-experience modelling for adaptive streaming sessions.
//!
//! The crate is organised as a pipeline:
//!
//! * [`session`] parses and validates client-side session logs.
//! * [`features`] turns a session plus per-video metadata into the canonical
//!   feature vector and its one-hot encoded form.
//! * [`curve`] holds the sigmoid QoE curve, its logit inverse and the
//!   composite logarithmic curve.
//! * [`pretrained`] ships three ready-to-use linear QoE models.
//! * [`learn`] trains new models: sorted-stratified splits, min-max scaling,
//!   OLS, Lasso and a Huber gradient-boosting regressor.
//! * [`stats`] provides Spearman correlation, its p-value, MAE and the
//!   median baseline.

pub mod curve;
pub mod error;
pub mod features;
pub mod learn;
pub mod pretrained;
pub mod session;
pub mod stats;

pub use error::{Error, Result};
pub use features::{EncodedFeatures, FeatureVector};
pub use pretrained::LinearModel;
pub use session::{StreamingSession, VideoMeta};
