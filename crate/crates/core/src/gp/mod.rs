//! Gaussian-process host-trait prediction on precomputed kernels: exact
//! regression, variational probit classification and model selection by
//! training objective.

mod classification;
pub mod probit;
mod regression;
mod select;

pub use classification::{
    elbo, expected_log_lik, fit_classifier, fit_classifier_with_scale, lpd_classification,
    predict_proba, probit_predictive, signed_labels, ClassificationSummary, GpClassifier,
    SCALE_GRID,
};
pub use regression::{
    fit_regression, gaussian_lpd, lml, lml_with_grad, lpd_regression, predict_regression,
    GpRegressor, RegressionSummary, GRID_POINTS, HYPER_MAX, HYPER_MIN,
};
pub use select::{model_select, ModelScore};
