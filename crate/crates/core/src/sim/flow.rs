//! Ground-truth motion fields from scene kinematics.

use super::scenario::{box_to_local, Scenario};
use crate::error::Result;
use crate::featurizer::BevSpec;
use crate::numerics::Tensor3;
use crate::pointcloud::OrientedBox;
use crate::temporal::MotionField;

/// BEV geometry of scale `s` (stride `2^s`).
pub fn scale_spec(spec: &BevSpec, s: usize) -> BevSpec {
    BevSpec {
        cell_size: spec.cell_size * (1u32 << s) as f64,
        ..spec.clone()
    }
}

/// Object displacements from `t_from` to `t_to` in the agent's frame at
/// `t_from`, with the boxes at both ends.
pub fn object_motion(
    scenario: &Scenario,
    agent: u32,
    t_from: f64,
    t_to: f64,
) -> Result<Vec<(OrientedBox, OrientedBox)>> {
    let pose = scenario.pose_at(agent, t_from)?;
    scenario.check_time(t_to)?;
    Ok(scenario
        .objects
        .iter()
        .map(|o| (box_to_local(&o.box_at(t_from), &pose), box_to_local(&o.box_at(t_to), &pose)))
        .collect())
}

/// Largest object displacement from `t_from` to `t_to`, in cells of `spec`.
pub fn max_displacement_cells(scenario: &Scenario, agent: u32, t_from: f64, t_to: f64, spec: &BevSpec) -> Result<f64> {
    Ok(object_motion(scenario, agent, t_from, t_to)?
        .iter()
        .map(|(a, b)| (b.center[0] - a.center[0]).hypot(b.center[1] - a.center[1]) / spec.cell_size)
        .fold(0.0, f64::max))
}

/// Displacement fields that, scaled by `xi`, carry each object from its
/// position at `t_from` to its position at `t_to`.
///
/// Cells swept by an object's footprint (dilated by `dilation` cells) get
/// that object's displacement divided by `xi`; all other cells stay still.
/// Rotation is ignored. Weights are one everywhere. With `xi = 0` the
/// fields are zero.
pub fn ideal_fields(
    scenario: &Scenario,
    agent: u32,
    t_from: f64,
    t_to: f64,
    xi: f64,
    spec: &BevSpec,
    scales: usize,
    dilation: usize,
) -> Result<Vec<MotionField>> {
    let motion = object_motion(scenario, agent, t_from, t_to)?;
    let mut out = Vec::with_capacity(scales);
    for s in 0..scales {
        let ss = scale_spec(spec, s);
        let (h, w) = (spec.height() >> s, spec.width() >> s);
        let mut dp = Tensor3::zeros(2, h, w);
        if xi > 0.0 {
            let pad = dilation as f64 * ss.cell_size;
            for (a, b) in &motion {
                let d = [b.center[0] - a.center[0], b.center[1] - a.center[1]];
                let cells = [d[0] / ss.cell_size / xi, d[1] / ss.cell_size / xi];
                let steps = ((d[0].hypot(d[1]) / (0.5 * ss.cell_size)).ceil() as usize).max(1);
                let grown = OrientedBox {
                    length: a.length + 2.0 * pad,
                    width: a.width + 2.0 * pad,
                    ..*a
                };
                for r in 0..h {
                    for c in 0..w {
                        let [x, y] = ss.cell_center(r, c);
                        let swept = (0..=steps).any(|k| {
                            let f = k as f64 / steps as f64;
                            let probe = OrientedBox {
                                center: [a.center[0] + f * d[0], a.center[1] + f * d[1], a.center[2]],
                                ..grown
                            };
                            probe.contains_planar(x, y)
                        });
                        if swept {
                            dp.set(0, r, c, cells[0]);
                            dp.set(1, r, c, cells[1]);
                        }
                    }
                }
            }
        }
        out.push(MotionField::new(dp, Tensor3::filled(1, h, w, 1.0))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{generate_scenario, ScenarioConfig};

    #[test]
    fn crossing_fields_move_one_cell_per_frame() {
        let s = generate_scenario(&ScenarioConfig::default()).unwrap();
        let spec = BevSpec::default();
        // ego frame, 3 frames of delay at 4 m/s and 0.4 m cells
        let f = ideal_fields(&s, 0, 1.0, 1.3, 3.0, &spec, 3, 1).unwrap();
        let dp = &f[0].dp;
        let vals: Vec<(f64, f64)> = (0..dp.plane_len())
            .map(|i| (dp.channel(0)[i], dp.channel(1)[i]))
            .filter(|&(x, y)| x != 0.0 || y != 0.0)
            .collect();
        assert!(!vals.is_empty());
        for (x, y) in vals {
            let n = x.hypot(y);
            assert!((n - 1.0).abs() < 1e-9, "{x} {y}");
        }
        assert!((max_displacement_cells(&s, 0, 1.0, 1.3, &spec).unwrap() - 3.0).abs() < 1e-9);
        // coarser scales halve the displacement
        let m = f[1].dp.channel(0).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((m - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_delay_is_still() {
        let s = generate_scenario(&ScenarioConfig::default()).unwrap();
        let f = ideal_fields(&s, 1, 1.0, 1.0, 0.0, &BevSpec::default(), 3, 1).unwrap();
        assert!(f.iter().all(|m| m.dp.max_abs() == 0.0));
    }
}
