//! Foreground split, instance aggregation and multi-agent fusion.

use serde::{Deserialize, Serialize};

use crate::domain::ObservabilityMap;
use crate::error::{Error, Result};
use crate::numerics::{conv2d, ConvSpec, Tensor3};

/// `(f, b)` with `f ≈ h·m` and `f + b == h` exactly in floating point.
///
/// Rounding ties can make the naive `h − f` miss by one unit in the last
/// place, and for some `f` no complement exists at all, so both parts may
/// move by an ulp.
fn exact_split(h: f64, m: f64) -> (f64, f64) {
    let f0 = h * m;
    for f in [f0, f0.next_up(), f0.next_down()] {
        let b0 = h - f;
        for b in [b0, b0.next_up(), b0.next_down()] {
            if f + b == h {
                return (f, b);
            }
        }
    }
    if m >= 0.5 {
        (h, 0.0)
    } else {
        (0.0, h)
    }
}

/// `H ⊙ M` and `H ⊙ (1 − M)`, adjusted so `fore + back` reproduces `H`
/// exactly.
pub fn split_foreground(h: &Tensor3, m: &ObservabilityMap) -> Result<(Tensor3, Tensor3)> {
    h.ensure_plane_of(m.tensor(), "foreground map")?;
    let plane = m.tensor().data();
    let n = h.plane_len();
    let mut fore = h.clone();
    let mut back = h.clone();
    for (i, &v) in h.data().iter().enumerate() {
        let (f, b) = exact_split(v, plane[i % n]);
        fore.data_mut()[i] = f;
        back.data_mut()[i] = b;
    }
    Ok((fore, back))
}

/// How the blended, foreground and enhanced features are combined before
/// the 1×1 convolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineMode {
    /// Elementwise sum, `C → C` conv.
    #[default]
    Add,
    /// Channel concatenation, `3C → C` conv.
    Concat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregationSpec {
    pub mode: CombineMode,
    pub conv: ConvSpec,
    pub eps: f64,
}

pub const EPS_INIT: f64 = 0.1;

impl AggregationSpec {
    pub fn zeros(channels: usize, mode: CombineMode) -> Self {
        let inputs = match mode {
            CombineMode::Add => channels,
            CombineMode::Concat => 3 * channels,
        };
        Self {
            mode,
            conv: ConvSpec::new(channels, inputs, 1, 1),
            eps: EPS_INIT,
        }
    }

    /// Conv that averages the three combined terms channel by channel.
    pub fn averaging(channels: usize, mode: CombineMode) -> Self {
        let mut s = Self::zeros(channels, mode);
        for c in 0..channels {
            match mode {
                CombineMode::Add => s.conv.set_weight(c, c, 0, 0, 1.0 / 3.0),
                CombineMode::Concat => {
                    for k in 0..3 {
                        s.conv.set_weight(c, k * channels + c, 0, 0, 1.0 / 3.0);
                    }
                }
            }
        }
        s
    }
}

/// `B = W⊙H_fore + (1−W)⊙H_enh`, `H_verif = conv(B ⊕ H_fore ⊕ H_enh)`,
/// `H_refined = H_verif + ε·H_back`.
pub fn aggregate_instance(
    h_fore: &Tensor3,
    h_enh: &Tensor3,
    h_back: &Tensor3,
    w_verif: &Tensor3,
    spec: &AggregationSpec,
) -> Result<Tensor3> {
    for (t, what) in [(h_enh, "enhanced"), (h_back, "background"), (w_verif, "verification weights")] {
        h_fore.ensure_same_shape(t, what)?;
    }
    if !spec.eps.is_finite() {
        return Err(Error::OutOfRange("background scale must be finite".into()));
    }
    let blend = blend(h_fore, h_enh, w_verif)?;
    let combined = match spec.mode {
        CombineMode::Add => {
            let mut s = blend;
            s.add_assign(h_fore)?;
            s.add_assign(h_enh)?;
            s
        }
        CombineMode::Concat => Tensor3::concat_channels(&[&blend, h_fore, h_enh])?,
    };
    let verified = conv2d(&combined, &spec.conv)?;
    verified.zip_map(h_back, |v, b| v + spec.eps * b)
}

/// `W⊙a + (1−W)⊙b`; exact at `W ∈ {0, 1}`.
pub fn blend(a: &Tensor3, b: &Tensor3, w: &Tensor3) -> Result<Tensor3> {
    a.ensure_same_shape(b, "blend")?;
    a.ensure_same_shape(w, "blend weights")?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .zip(w.data())
        .map(|((&x, &y), &k)| {
            if k == 1.0 {
                x
            } else if k == 0.0 {
                y
            } else {
                k * x + (1.0 - k) * y
            }
        })
        .collect();
    Tensor3::from_vec(a.channels(), a.height(), a.width(), data)
}

/// Shared `2C → C` 1×1 convolution used at every fold step.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionSpec {
    pub conv: ConvSpec,
}

impl FusionSpec {
    pub fn zeros(channels: usize) -> Self {
        Self {
            conv: ConvSpec::new(channels, 2 * channels, 1, 1),
        }
    }

    /// `out = a + b` per channel.
    pub fn summing(channels: usize) -> Self {
        Self::with_pair_weights(channels, 1.0, 1.0)
    }

    /// `out = (a + b) / 2` per channel.
    pub fn averaging(channels: usize) -> Self {
        Self::with_pair_weights(channels, 0.5, 0.5)
    }

    fn with_pair_weights(channels: usize, wa: f64, wb: f64) -> Self {
        let mut s = Self::zeros(channels);
        for c in 0..channels {
            s.conv.set_weight(c, c, 0, 0, wa);
            s.conv.set_weight(c, channels + c, 0, 0, wb);
        }
        s
    }
}

/// Left fold `state = conv(concat(state, next))` over agents in the given
/// order (ego first). A single agent passes through unchanged.
pub fn fuse_agents(agents: &[Tensor3], spec: &FusionSpec) -> Result<Tensor3> {
    let (first, rest) = agents
        .split_first()
        .ok_or_else(|| Error::Degenerate("no agents to fuse".into()))?;
    let mut state = first.clone();
    for next in rest {
        state.ensure_same_shape(next, "agent features")?;
        state = conv2d(&Tensor3::concat_channels(&[&state, next])?, &spec.conv)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(seed: f64) -> Tensor3 {
        Tensor3::from_fn(3, 4, 4, |c, y, x| ((c as f64 + 1.0) * seed + (y * 4 + x) as f64).sin() * 10.0)
    }

    #[test]
    fn split_reconstructs_exactly() {
        let h = sample(0.37);
        let m = ObservabilityMap::new(Tensor3::from_fn(1, 4, 4, |_, y, x| ((y * 4 + x) as f64 * 0.731).fract()))
            .unwrap();
        let (f, b) = split_foreground(&h, &m).unwrap();
        assert_eq!(f.add(&b).unwrap(), h);
        let (f, b) = split_foreground(&h, &ObservabilityMap::filled(4, 4, 1.0).unwrap()).unwrap();
        assert_eq!(f, h);
        assert_eq!(b.max_abs(), 0.0);
    }

    #[test]
    fn blend_endpoints() {
        let (a, b) = (sample(0.1), sample(0.9));
        assert_eq!(blend(&a, &b, &Tensor3::filled(3, 4, 4, 1.0)).unwrap(), a);
        assert_eq!(blend(&a, &b, &Tensor3::zeros(3, 4, 4)).unwrap(), b);
    }

    #[test]
    fn zero_eps_drops_background() {
        let (f, e) = (sample(0.2), sample(0.3));
        let w = Tensor3::filled(3, 4, 4, 0.25);
        let mut spec = AggregationSpec::averaging(3, CombineMode::Add);
        spec.eps = 0.0;
        let a = aggregate_instance(&f, &e, &sample(0.4), &w, &spec).unwrap();
        let b = aggregate_instance(&f, &e, &sample(0.5), &w, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn concat_and_add_agree_for_averaging() {
        let (f, e, bk) = (sample(0.2), sample(0.3), sample(0.6));
        let w = Tensor3::filled(3, 4, 4, 0.7);
        let a = aggregate_instance(&f, &e, &bk, &w, &AggregationSpec::averaging(3, CombineMode::Add)).unwrap();
        let c = aggregate_instance(&f, &e, &bk, &w, &AggregationSpec::averaging(3, CombineMode::Concat)).unwrap();
        assert!(a.max_abs_diff(&c) < 1e-12);
    }

    #[test]
    fn fusion_fold() {
        let x = sample(0.5);
        assert_eq!(fuse_agents(std::slice::from_ref(&x), &FusionSpec::zeros(3)).unwrap(), x);
        let avg = fuse_agents(&[x.clone(), x.clone()], &FusionSpec::averaging(3)).unwrap();
        assert!(avg.max_abs_diff(&x) < 1e-12);
        assert!(fuse_agents(&[], &FusionSpec::zeros(3)).is_err());
    }
}
