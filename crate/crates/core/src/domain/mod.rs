//! Cross-agent domain alignment: observability maps, frame transforms, void
//! completion, observability weighting and the adversarial domain loss.

pub mod adversarial;
pub mod estimator;
pub mod observability;
pub mod pose;
pub mod transform;

pub use adversarial::{
    discriminator_forward, domain_loss_and_grads, grl_backward, grl_forward, DiscriminatorSpec, DomainLoss,
    GRL_GAMMA,
};
pub use estimator::{foreground_estimate, ForegroundEstimator};
pub use observability::{observability_weighting, pair_weight, ObservabilityMap};
pub use pose::Pose2;
pub use transform::{complete_voids, transform_to_ego};
