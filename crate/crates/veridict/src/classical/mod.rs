//! Logistic regression and random forest baselines.

mod forest;
mod logreg;

pub use forest::{gini, rf_fit, DecisionTree, ForestHyper, RandomForest, Vote};
pub use logreg::{logreg_fit, LogRegHyper, LogRegModel};
