use std::collections::{HashMap, HashSet};

use estc_core::lattice::LatticePoint;
use estc_core::schedule::*;
use proptest::prelude::*;

fn pt(n: [i64; 4]) -> LatticePoint {
    LatticePoint::new(n[0], n[1], n[2], n[3]).unwrap()
}

fn schedule() -> Schedule {
    Schedule::build_cycle1().unwrap()
}

#[test]
fn stage_counts_and_last_lattice() {
    let s = schedule();
    let counts: Vec<usize> = s.stage_counts().iter().map(|(_, n)| *n).collect();
    assert_eq!(counts, [8, 6, 14, 14, 30, 30, 150, 150, 910, 910]);
    assert_eq!(s.lattices().len(), 2222);
    assert_eq!(s.lattices().last().unwrap().u, 2222);
    let stages: Vec<(u8, u8)> = s.stage_counts().iter().map(|(sp, _)| *sp).collect();
    assert_eq!(stages, [(0, 1), (0, 2), (1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (3, 2), (4, 1), (4, 2)]);
}

#[test]
fn known_centers() {
    let s = schedule();
    assert_eq!(s.center(43), Some(pt([-1, 2, 1, 4])));
    assert_eq!(s.center(44), Some(pt([-1, 2, 1, 0])));
    assert_eq!(s.center(48), Some(pt([-1, 1, 2, 4])));
    assert_eq!(s.center(37), Some(pt([0, 0, -1, 1])));
    assert_eq!(s.center(1), Some(LatticePoint::ORIGIN));
}

#[test]
fn stage_one_doubles_the_first_fourteen_along_n4() {
    let s = schedule();
    let down = pt([0, 0, 0, 2]);
    for u in 1..=14 {
        let c = s.center(u).unwrap();
        assert_eq!(s.center(14 + u), Some(c - down));
        assert_eq!(s.center(28 + u), Some(c + down));
    }
}

#[test]
fn periods_change_only_at_stage_boundaries() {
    let s = schedule();
    for l in s.lattices() {
        let expected = match l.u {
            1..=14 => [4, 4, 4, 4],
            15..=42 => [4, 4, 4, 12],
            43..=102 => [12, 4, 4, 12],
            103..=402 => [12, 12, 4, 12],
            _ => [12, 12, 12, 12],
        };
        assert_eq!(l.periods, expected, "u = {}", l.u);
        assert!(l.center.is_even());
    }
}

#[test]
fn five_center_blocks_share_projection_and_n4_pattern() {
    let s = schedule();
    let shift = [pt([4, 0, 0, 0]), pt([0, 4, 0, 0]), pt([0, 0, 4, 0])];
    for (stage_index, stage) in [2u8, 3, 4].into_iter().enumerate() {
        let phase1: Vec<&PointLattice> =
            s.lattices().iter().filter(|l| l.stage == stage && l.phase == 1).collect();
        let phase2: Vec<&PointLattice> =
            s.lattices().iter().filter(|l| l.stage == stage && l.phase == 2).collect();
        assert_eq!(phase1.len() % 5, 0);
        for block in phase1.chunks(5) {
            let proj = &block[0].center.0[..3];
            assert!(block.iter().all(|l| &l.center.0[..3] == proj));
            let g3d: i64 = proj.iter().map(|x| x.abs()).sum();
            let n4: Vec<i64> = block.iter().map(|l| l.center.n4()).collect();
            let expected = if g3d % 2 == 0 { [4, 0, -4, 2, -2] } else { [3, -1, -5, 1, -3] };
            assert_eq!(n4, expected, "stage {stage}, projection {proj:?}");
        }
        for (a, b) in phase1.iter().zip(&phase2) {
            assert_eq!(b.center, a.center + shift[stage_index]);
            assert_eq!(a.periods, b.periods);
        }
    }
}

#[test]
fn stage_zero_lattices_are_separated() {
    let s = schedule();
    let limit = Region::new([-9; 4], [10; 4]).unwrap();
    let report = verify_separation(&s.lattices()[..14], &limit);
    assert!(report.is_clean(), "{:?}", report.violations.first());
    assert!(report.points_checked > 0);

    let f0: Vec<LatticePoint> = s.family(0).iter().flat_map(|l| points_in_region(l, &limit)).collect();
    for (i, a) in f0.iter().enumerate() {
        for b in &f0[i + 1..] {
            assert!((*a - *b).g4d() > 2, "{a} {b}");
        }
    }
}

#[test]
fn lattices_are_pairwise_disjoint() {
    let s = schedule();
    let region = Region::new([-11; 4], [12; 4]).unwrap();
    let mut owner: HashMap<LatticePoint, usize> = HashMap::new();
    for l in s.lattices() {
        for p in points_in_region(l, &region) {
            if let Some(prev) = owner.insert(p, l.u) {
                panic!("{p} on lattices {prev} and {}", l.u);
            }
        }
    }
}

#[test]
fn each_stage_zero_subset_has_128_points_one_per_early_lattice() {
    let s = schedule();
    let central = Region::central_subset(0, 1).unwrap();
    for k in [[0, 0, 0, 0], [1, 0, 0, 0], [-1, 2, 0, 1], [3, -2, 1, -1]] {
        let lo: [i64; 4] = std::array::from_fn(|i| central.lower[i] + 4 * k[i]);
        let hi: [i64; 4] = std::array::from_fn(|i| central.upper[i] + 4 * k[i]);
        let region = Region::new(lo, hi).unwrap();
        assert_eq!(region.even_points().len(), 128);
        for l in &s.lattices()[..14] {
            assert_eq!(points_in_region(l, &region).len(), 1, "u = {}", l.u);
        }
    }
}

#[test]
fn full_model_sizes() {
    let s = schedule();
    let full = full_model(&s);
    assert_eq!(full.equation_count(), 5150);
    assert_eq!(full.points[&0].len(), 648);

    let sites: HashSet<LatticePoint> = full.equations().into_iter().map(|(_, p)| p).collect();
    assert_eq!(sites.len(), 5150);
    let block = Region::new([-3; 4], [4; 4]).unwrap();
    let inner = block.even_points();
    assert_eq!(inner.len(), 2048);
    assert!(inner.iter().all(|p| sites.contains(p)));

    let class = |u: usize| match u {
        1..=8 => 0,
        9..=14 => 1,
        15..=42 => 2,
        43..=102 => 3,
        103..=402 => 4,
        _ => 5,
    };
    let mut per_class = [0usize; 6];
    for l in s.lattices() {
        per_class[class(l.u)] += points_in_region(l, &full.region).len();
    }
    assert_eq!(per_class, [648, 486, 756, 540, 900, 1820]);
}

#[test]
fn first_cycle_does_not_cover_the_whole_model_region() {
    // The region holds 10368 even points; the first cycle reaches 5150 of them.
    let s = schedule();
    let region = Region::model_region();
    assert_eq!(region.even_points().len(), 10368);
    let covered: usize = s.lattices().iter().map(|l| points_in_region(l, &region).len()).sum();
    assert_eq!(covered, 5150);
}

#[test]
fn p_models() {
    let s = schedule();
    let m1 = model_spec(&s, 1).unwrap();
    assert_eq!(m1.k_list, [0, 1, 2, 3, 29, 30, 31, 86, 88, 331, 333, 1751, 1753]);
    assert_eq!(m1.equation_count(), 998);
    let m2 = model_spec(&s, 2).unwrap();
    assert_eq!((m2.k_list.len(), m2.equation_count()), (69, 1520));
    let m3 = model_spec(&s, 3).unwrap();
    assert_eq!((m3.k_list.len(), m3.equation_count()), (210, 2199));
    let m0 = model_spec(&s, 0).unwrap();
    assert_eq!(m0.equations(), [(0, LatticePoint::ORIGIN)]);
    assert!(model_spec(&s, 4).is_err());

    for m in [&m1, &m2, &m3] {
        for (k, p) in m.equations() {
            assert!(m.region.contains(&p));
            assert!(s.family(k).iter().any(|l| l.contains(&p)), "k = {k}, {p}");
        }
    }
}

#[test]
fn stencil_has_thirteen_shifts() {
    let st = stencil_13();
    assert_eq!(st.len(), 13);
    assert!(st.contains(&LatticePoint::ORIGIN));
    assert!(st.contains(&pt([1, 0, 0, 1])) && st.contains(&pt([-1, 0, 0, -1])));
    assert!(st.iter().all(|s| s.g4d() <= 1));
}

proptest! {
    #[test]
    fn a_point_lies_on_at_most_one_lattice(v in prop::array::uniform4(-40i64..40)) {
        let mut v = v;
        v[3] += v.iter().sum::<i64>().rem_euclid(2);
        let p = pt(v);
        let s = schedule();
        let owners = s.lattices().iter().filter(|l| l.contains(&p)).count();
        prop_assert!(owners <= 1);
    }
}
