use proptest::prelude::*;

use cpalign::numerics::{conv2d, transposed_conv2d, ConvSpec, NamedTensors, Tensor3};

fn tensor(c: usize, h: usize, w: usize, vals: &[f64]) -> Tensor3 {
    Tensor3::from_fn(c, h, w, |k, y, x| vals[(k * h * w + y * w + x) % vals.len()])
}

fn spec(out: usize, inp: usize, k: usize, stride: usize, pad: usize, groups: usize, vals: &[f64]) -> ConvSpec {
    let mut s = ConvSpec::new(out, inp, k, k).with_stride(stride).with_padding(pad).with_groups(groups);
    for (i, w) in s.weights.iter_mut().enumerate() {
        *w = vals[(i * 7 + 3) % vals.len()];
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_is_linear(
        vals in prop::collection::vec(-2.0f64..2.0, 16..64),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        k in 1usize..4,
        stride in 1usize..3,
    ) {
        let s = spec(3, 2, k, stride, k / 2, 1, &vals);
        let x = tensor(2, 7, 6, &vals);
        let y = tensor(2, 7, 6, &vals[1..]);
        let lhs = conv2d(&x.scale(a).add(&y.scale(b)).unwrap(), &s).unwrap();
        let rhs = conv2d(&x, &s).unwrap().scale(a).add(&conv2d(&y, &s).unwrap().scale(b)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
    }

    #[test]
    fn transposed_conv_is_adjoint(
        vals in prop::collection::vec(-2.0f64..2.0, 16..64),
        k in 1usize..4,
        stride in 1usize..3,
    ) {
        let s = spec(3, 2, k, stride, 0, 1, &vals);
        let x = tensor(2, 9, 8, &vals);
        let ax = conv2d(&x, &s).unwrap();
        let y = tensor(ax.channels(), ax.height(), ax.width(), &vals[2..]);
        let aty = transposed_conv2d(&y, &s.adjoint()).unwrap();
        // <Ax, y> = <x, Aᵀy> over the region the transposed output covers
        let mut rhs = 0.0;
        for c in 0..2 {
            for r in 0..aty.height().min(9) {
                for q in 0..aty.width().min(8) {
                    rhs += x.get(c, r, q) * aty.get(c, r, q);
                }
            }
        }
        prop_assert!((ax.dot(&y) - rhs).abs() < 1e-8 * (1.0 + rhs.abs()));
    }

    #[test]
    fn groups_are_independent(vals in prop::collection::vec(-2.0f64..2.0, 16..64), bump in 0.5f64..4.0) {
        let s = spec(4, 4, 3, 1, 1, 2, &vals);
        let x = tensor(4, 6, 6, &vals);
        let mut x2 = x.clone();
        for v in x2.channel_mut(3) {
            *v += bump;
        }
        let (a, b) = (conv2d(&x, &s).unwrap(), conv2d(&x2, &s).unwrap());
        // the second input group feeds only the second output group
        prop_assert_eq!(a.channel(0), b.channel(0));
        prop_assert_eq!(a.channel(1), b.channel(1));
    }
}

#[test]
fn archive_roundtrip_is_f32_exact() {
    let mut named = NamedTensors::new();
    named.insert_f64("a.weight", vec![2, 3], &[0.5, -1.25, 3.0, 1e-3, 7.0, -0.0]);
    let back = NamedTensors::from_bytes(&named.to_bytes().unwrap()).unwrap();
    assert_eq!(back, named);
    assert!(NamedTensors::from_bytes(b"NOPE").is_err());
}
