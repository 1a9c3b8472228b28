//! Discriminator, weighted domain loss and gradient reversal.

use crate::error::{Error, Result};
use crate::numerics::init::he_conv;
use crate::numerics::{conv2d, sigmoid, Activation, ConvSpec, NamedTensors, Tensor3};

/// Backward scaling applied by the gradient reversal layer.
pub const GRL_GAMMA: f64 = -0.1;

pub const DISC_HIDDEN: usize = 256;

/// Two 1×1 convolutions: `C → 256` with ReLU, then `256 → 1` logit.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorSpec {
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
}

impl DiscriminatorSpec {
    pub fn zeros(channels: usize) -> Self {
        Self {
            conv1: ConvSpec::new(DISC_HIDDEN, channels, 1, 1).with_activation(Activation::Relu),
            conv2: ConvSpec::new(1, DISC_HIDDEN, 1, 1),
        }
    }

    pub fn seeded(channels: usize, seed: u64) -> Self {
        let mut d = Self::zeros(channels);
        he_conv(&mut d.conv1, seed, 0x6469_0001);
        he_conv(&mut d.conv2, seed, 0x6469_0002);
        d
    }

    pub fn from_weights(channels: usize, named: &NamedTensors) -> Result<Self> {
        let mut d = Self::zeros(channels);
        let mut missing = Vec::new();
        d.conv1.import("disc.conv1", named, &mut missing)?;
        d.conv2.import("disc.conv2", named, &mut missing)?;
        if !missing.is_empty() {
            return Err(Error::MissingWeights(missing));
        }
        Ok(d)
    }

    pub fn export(&self, named: &mut NamedTensors) {
        self.conv1.export("disc.conv1", named);
        self.conv2.export("disc.conv2", named);
    }
}

/// Per-location domain logits (no sigmoid).
pub fn discriminator_forward(features: &Tensor3, spec: &DiscriminatorSpec) -> Result<Tensor3> {
    conv2d(&conv2d(features, &spec.conv1)?, &spec.conv2)
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Binary cross-entropy of `sigmoid(logit)` against `label`.
#[inline]
pub fn bce_with_logit(logit: f64, label: f64) -> f64 {
    label * softplus(-logit) + (1.0 - label) * softplus(logit)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainLoss {
    pub loss: f64,
    /// Gradient of the loss with respect to each logit.
    pub grad_logits: Tensor3,
    /// The same gradient after gradient reversal, as delivered to the
    /// feature extractor.
    pub grad_features: Tensor3,
}

/// Identity in the forward direction.
pub fn grl_forward(x: &Tensor3) -> Tensor3 {
    x.clone()
}

/// Scales an incoming gradient by [`GRL_GAMMA`].
pub fn grl_backward(grad: &Tensor3) -> Tensor3 {
    grad.map(|g| g * GRL_GAMMA)
}

/// `Σ W·BCE(σ(logit), Z) / Σ W` with its logit gradient `W(σ − Z)/ΣW`.
pub fn domain_loss_and_grads(logits: &Tensor3, label: u8, weights: &Tensor3) -> Result<DomainLoss> {
    if label > 1 {
        return Err(Error::OutOfRange(format!("domain label {label} is not 0 or 1")));
    }
    logits.ensure_same_shape(weights, "domain loss weights")?;
    if let Some(w) = weights.data().iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::OutOfRange(format!("domain weight {w} must be finite and non-negative")));
    }
    let total: f64 = weights.sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("domain loss weights sum to zero".into()));
    }
    let z = label as f64;
    let loss = logits
        .data()
        .iter()
        .zip(weights.data())
        .map(|(&x, &w)| w * bce_with_logit(x, z))
        .sum::<f64>()
        / total;
    let grad_logits = logits.zip_map(weights, |x, w| w * (sigmoid(x) - z) / total)?;
    let grad_features = grl_backward(&grad_logits);
    Ok(DomainLoss {
        loss,
        grad_logits,
        grad_features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_logits_give_ln2() {
        let logits = Tensor3::zeros(1, 3, 3);
        let w = Tensor3::filled(1, 3, 3, 0.4);
        for label in [0, 1] {
            let l = domain_loss_and_grads(&logits, label, &w).unwrap();
            assert!((l.loss - 2f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn concentrated_weight_selects_one_cell() {
        let logits = Tensor3::from_vec(1, 1, 3, vec![-1.0, 2.0, 0.5]).unwrap();
        let w = Tensor3::from_vec(1, 1, 3, vec![0.0, 3.0, 0.0]).unwrap();
        let l = domain_loss_and_grads(&logits, 1, &w).unwrap();
        assert!((l.loss - bce_with_logit(2.0, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_sum_is_degenerate() {
        let r = domain_loss_and_grads(&Tensor3::zeros(1, 2, 2), 0, &Tensor3::zeros(1, 2, 2));
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn discriminator_shape_and_locality() {
        let d = DiscriminatorSpec::seeded(5, 9);
        let x = Tensor3::from_fn(5, 4, 6, |c, y, x| (c + y * x) as f64 * 0.1);
        let base = discriminator_forward(&x, &d).unwrap();
        assert_eq!(base.shape(), (1, 4, 6));
        let mut bumped = x.clone();
        bumped.set(2, 1, 3, 5.0);
        let moved = discriminator_forward(&bumped, &d).unwrap();
        for y in 0..4 {
            for xx in 0..6 {
                if (y, xx) != (1, 3) {
                    assert_eq!(base.get(0, y, xx), moved.get(0, y, xx));
                }
            }
        }
        assert_eq!(
            discriminator_forward(&x, &DiscriminatorSpec::zeros(5)).unwrap().max_abs(),
            0.0
        );
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }
}
