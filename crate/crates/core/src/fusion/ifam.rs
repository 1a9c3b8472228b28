//! Per-agent refinement and multi-agent fusion, bundled.

use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_instance, fuse_agents, split_foreground, AggregationSpec, CombineMode, FusionSpec, EPS_INIT};
use super::kernels::{struct_conv, StructKernels};
use super::verify::{verification_weights, VerificationSpec, VerifyOutput};
use crate::domain::ObservabilityMap;
use crate::error::{Error, Result};
use crate::numerics::init::he_conv;
use crate::numerics::{ConvSpec, NamedTensors, Tensor3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IfamConfig {
    /// Groups of the structural 3×3 banks (`0` means depthwise).
    pub struct_groups: usize,
    pub conv_groups: usize,
    pub shuffle_groups: usize,
    pub reduction: usize,
    pub combine: CombineMode,
    pub verify_output: VerifyOutput,
    pub eps: f64,
}

impl Default for IfamConfig {
    fn default() -> Self {
        Self {
            struct_groups: 0,
            conv_groups: 4,
            shuffle_groups: 4,
            reduction: 16,
            combine: CombineMode::Add,
            verify_output: VerifyOutput::PerChannel,
            eps: EPS_INIT,
        }
    }
}

impl IfamConfig {
    fn struct_groups_for(&self, channels: usize) -> Result<usize> {
        let g = if self.struct_groups == 0 { channels } else { self.struct_groups };
        if g == 0 || channels % g != 0 {
            return Err(Error::config(
                "ifam.struct_groups",
                format!("{g} groups do not divide {channels} channels"),
            ));
        }
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ifam {
    pub channels: usize,
    pub kernels: StructKernels,
    pub verify: VerificationSpec,
    pub aggregate: AggregationSpec,
    pub fusion: FusionSpec,
}

/// Intermediate tensors of one agent's refinement.
#[derive(Clone, Debug, PartialEq)]
pub struct Refinement {
    pub fore: Tensor3,
    pub back: Tensor3,
    pub enhanced: Tensor3,
    pub verification: Tensor3,
    pub refined: Tensor3,
}

impl Ifam {
    fn skeleton(channels: usize, cfg: &IfamConfig) -> Result<(ConvSpec, VerificationSpec, AggregationSpec)> {
        let g = cfg.struct_groups_for(channels)?;
        let base = ConvSpec::new(channels, channels, 3, 3).with_padding(1).with_groups(g);
        let mut verify = VerificationSpec::zeros(channels, cfg.reduction, cfg.conv_groups, cfg.shuffle_groups)?;
        verify.output = cfg.verify_output;
        let mut aggregate = AggregationSpec::zeros(channels, cfg.combine);
        aggregate.eps = cfg.eps;
        Ok((base, verify, aggregate))
    }

    /// Hand-set weights: identity structural base (so every derived bank
    /// vanishes), zero verification weights (W = 0.5), averaging
    /// aggregation and summing fusion.
    pub fn analytic(channels: usize, cfg: &IfamConfig) -> Result<Self> {
        let (mut base, verify, _) = Self::skeleton(channels, cfg)?;
        let per = base.in_per_group();
        for c in 0..channels {
            base.set_weight(c, c % per, 1, 1, 1.0);
        }
        let mut aggregate = AggregationSpec::averaging(channels, cfg.combine);
        aggregate.eps = cfg.eps;
        Ok(Self {
            channels,
            kernels: StructKernels::from_base(base)?,
            verify,
            aggregate,
            fusion: FusionSpec::summing(channels),
        })
    }

    pub fn seeded(channels: usize, cfg: &IfamConfig, seed: u64) -> Result<Self> {
        let (mut base, verify, mut aggregate) = Self::skeleton(channels, cfg)?;
        he_conv(&mut base, seed, 0x6966_0001);
        he_conv(&mut aggregate.conv, seed, 0x6966_0002);
        let mut fusion = FusionSpec::zeros(channels);
        he_conv(&mut fusion.conv, seed, 0x6966_0003);
        Ok(Self {
            channels,
            kernels: StructKernels::from_base(base)?,
            verify: verify.seeded(seed),
            aggregate,
            fusion,
        })
    }

    pub fn from_weights(channels: usize, cfg: &IfamConfig, named: &NamedTensors) -> Result<Self> {
        let (mut base, mut verify, mut aggregate) = Self::skeleton(channels, cfg)?;
        let mut fusion = FusionSpec::zeros(channels);
        let mut missing = Vec::new();
        base.import("ifam.struct.base", named, &mut missing)?;
        verify.import("ifam.verify", named, &mut missing)?;
        aggregate.conv.import("ifam.agg", named, &mut missing)?;
        fusion.conv.import("ifam.fuse", named, &mut missing)?;
        match named.get_f64("ifam.eps", 1)? {
            Some(v) => aggregate.eps = v[0],
            None => missing.push("ifam.eps".into()),
        }
        if !missing.is_empty() {
            return Err(Error::MissingWeights(missing));
        }
        Ok(Self {
            channels,
            kernels: StructKernels::from_base(base)?,
            verify,
            aggregate,
            fusion,
        })
    }

    pub fn export(&self, named: &mut NamedTensors) {
        self.kernels.base.export("ifam.struct.base", named);
        self.verify.export("ifam.verify", named);
        self.aggregate.conv.export("ifam.agg", named);
        self.fusion.conv.export("ifam.fuse", named);
        named.insert_f64("ifam.eps", vec![1], &[self.aggregate.eps]);
    }

    pub fn refine(&self, h: &Tensor3, m: &ObservabilityMap) -> Result<Refinement> {
        let (fore, back) = split_foreground(h, m)?;
        let enhanced = struct_conv(&fore, &self.kernels)?;
        let verification = verification_weights(&fore, &enhanced, &self.verify)?;
        let refined = aggregate_instance(&fore, &enhanced, &back, &verification, &self.aggregate)?;
        Ok(Refinement {
            fore,
            back,
            enhanced,
            verification,
            refined,
        })
    }

    pub fn fuse(&self, refined: &[Tensor3]) -> Result<Tensor3> {
        fuse_agents(refined, &self.fusion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_refinement_keeps_foreground() {
        let cfg = IfamConfig {
            conv_groups: 2,
            shuffle_groups: 2,
            reduction: 2,
            ..Default::default()
        };
        let ifam = Ifam::analytic(4, &cfg).unwrap();
        let h = Tensor3::from_fn(4, 5, 5, |c, y, x| (c + y * 5 + x) as f64);
        let m = ObservabilityMap::filled(5, 5, 1.0).unwrap();
        let r = ifam.refine(&h, &m).unwrap();
        assert_eq!(r.enhanced, r.fore);
        assert!(r.verification.data().iter().all(|&v| v == 0.5));
        assert!(r.refined.max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn archive_roundtrip() {
        let cfg = IfamConfig {
            conv_groups: 2,
            shuffle_groups: 2,
            reduction: 2,
            ..Default::default()
        };
        let ifam = Ifam::seeded(4, &cfg, 5).unwrap();
        let mut named = NamedTensors::new();
        ifam.export(&mut named);
        let back = Ifam::from_weights(4, &cfg, &named).unwrap();
        assert_eq!(back.kernels, ifam.kernels);
        assert_eq!(back.fusion, ifam.fusion);
        assert!((back.aggregate.eps - 0.1).abs() < 1e-7);
    }
}
