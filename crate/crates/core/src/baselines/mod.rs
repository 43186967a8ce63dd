//! Conventional privacy evaluations for comparison with the geometric attacks.

mod learner;
mod metrics;
mod mia;

pub use learner::{train_learner, Classifier, FeatureRule, LearnerConfig, LearnerKind};
pub use metrics::{
    auc, dcr, groundhog_features, linkability, linkability_mean, naive_distinguish, DistinguishScore, FeatureSplit,
};
pub use mia::{mia_game, select_target, MiaConfig, MiaMode, MiaResult, TargetSelection};
