use cpalign::temporal::window_partition;

/// The offset tiling catches blocks centred on the seams of the full one.
#[test]
fn offset_tiling_covers_blocks_on_seams() {
    for (h, w, l) in [(64, 32, 8), (48, 48, 16), (256, 128, 16)] {
        let (_, w2) = window_partition(h, w, l).unwrap();
        for r in (l..h).step_by(l) {
            for c in (l..w).step_by(l) {
                let (r0, c0) = (r - l / 2, c - l / 2);
                assert!(w2.iter().any(|win| win.covers(r0, c0, l, l)), "seam block at ({r0}, {c0})");
            }
        }
    }
}

/// Two diagonal-offset tilings cannot cover every placement: a block that
/// straddles a row seam of one tiling and a column seam of the other
/// escapes both. Even a 2×2 block does.
#[test]
fn dual_tiling_is_not_a_full_cover() {
    let (h, w, l) = (64, 64, 16);
    let (w1, w2) = window_partition(h, w, l).unwrap();
    let covered = |r: usize, c: usize, s: usize| w1.iter().chain(&w2).any(|win| win.covers(r, c, s, s));
    assert!(!covered(15, 7, 2));
    assert!(!covered(4, 4, l));
    // single cells are always covered
    assert!((0..h).all(|r| (0..w).all(|c| covered(r, c, 1))));
}

#[test]
fn single_tiling_misses_straddling_objects() {
    let (w1, _) = window_partition(32, 32, 8).unwrap();
    let (r, c) = (4, 4);
    assert!(!w1.iter().any(|win| win.covers(r, c, 8, 8)));
}

#[test]
fn full_tiling_partitions_the_grid() {
    let (w1, _) = window_partition(32, 16, 8).unwrap();
    for r in 0..32 {
        for c in 0..16 {
            assert_eq!(w1.iter().filter(|win| win.contains(r, c)).count(), 1);
        }
    }
}
