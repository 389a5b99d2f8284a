mod common;

use std::cmp::Ordering;

use common::S69;
use estc_core::lattice::*;
use proptest::prelude::*;

fn pt(n: [i64; 4]) -> LatticePoint {
    LatticePoint::new(n[0], n[1], n[2], n[3]).unwrap()
}


#[test]
fn first_69_matches_reference_list() {
    let got = first_69();
    for (i, expected) in S69.iter().enumerate() {
        assert_eq!(got[i], pt(*expected), "entry {i}");
        assert_eq!(index_of(pt(*expected)).unwrap(), i as i64);
    }
}

#[test]
fn round_trip_first_million() {
    for i in 0..1_000_000i64 {
        let p = point_of(i).unwrap();
        assert!(p.is_even());
        assert_eq!(index_of(p).unwrap(), i, "{p}");
    }
}

/// Ordering key built only from the case definitions of `i4` and `j4`.
fn brute_key(n: &LatticePoint) -> (i64, i64, i64, i64, i64) {
    let [n1, n2, n3, n4] = n.0;
    let r = n1.abs() + n2.abs() + n3.abs();
    let p = r.max(n4.abs());
    let ring = r - n3.abs();
    let i4 = if n1 == 0 && n2 <= 0 {
        1
    } else if n1 < 0 {
        2 * (ring + n2)
    } else if n1 > 0 {
        2 * (ring + n2) + 1
    } else {
        4 * n2
    };
    let j4 = if r < p {
        if n4 < 0 { 1 } else { 2 }
    } else if n4 < 0 {
        -n4
    } else {
        1 + n4
    };
    (p, r, j4, n3, i4)
}

#[test]
fn order_oracle_up_to_g4d_12() {
    let m: i64 = 12;
    let mut pts = Vec::new();
    for a in -m..=m {
        for b in -m..=m {
            for c in -m..=m {
                for d in -m..=m {
                    if (a + b + c + d) % 2 == 0 && a.abs() + b.abs() + c.abs() <= m {
                        pts.push(LatticePoint::from_array_unchecked([a, b, c, d]));
                    }
                }
            }
        }
    }
    pts.sort_by(|x, y| brute_key(x).cmp(&brute_key(y)));
    assert_eq!(pts.len() as i64, cumulative_generation_count(m).unwrap() + 1);
    for (i, p) in pts.iter().enumerate() {
        assert_eq!(index_of(*p).unwrap(), i as i64, "{p}");
    }
    // The brute-force key never ties.
    assert!(pts.windows(2).all(|w| brute_key(&w[0]).cmp(&brute_key(&w[1])) == Ordering::Less));
}

/// Number of `(n1, n2, n3)` per value of `|n1| + |n2| + |n3|`, and per `n3` inside it.
fn shell_table(max_r: i64) -> Vec<Vec<i64>> {
    let mut t = vec![vec![0i64; (2 * max_r + 1) as usize]; (max_r + 1) as usize];
    for a in -max_r..=max_r {
        for b in -max_r..=max_r {
            for c in -max_r..=max_r {
                let r = a.abs() + b.abs() + c.abs();
                if r <= max_r {
                    t[r as usize][(c + max_r) as usize] += 1;
                }
            }
        }
    }
    t
}

/// Points with `g4d = p` and `g3d <= r`, counted by direct enumeration of `n4`.
fn brute_generation(shells: &[Vec<i64>], p: i64, r_max: i64) -> i64 {
    let mut count = 0;
    for r in 0..=p.min(r_max) {
        let n3d: i64 = shells[r as usize].iter().sum();
        for n4 in -p..=p {
            if (r + n4) % 2 == 0 && r.max(n4.abs()) == p {
                count += n3d;
            }
        }
    }
    count
}

#[test]
fn closed_form_counts_match_enumeration() {
    let max = 40;
    let shells = shell_table(max);
    let mut total = 0;
    for p in 0..=max {
        let n1 = brute_generation(&shells, p, p);
        if p > 0 {
            total += n1;
            assert_eq!(cumulative_generation_count(p).unwrap(), total, "M1({p})");
        }
        if p > 20 {
            continue;
        }
        assert_eq!(generation_count(p).unwrap(), n1, "N1({p})");
        for r in (p % 2..=p).step_by(2) {
            assert_eq!(
                cumulative_shell_count(p, r).unwrap(),
                brute_generation(&shells, p, r),
                "M2({p},{r})"
            );
        }
        let r = p;
        let row = &shells[r as usize];
        assert_eq!(shell_count(r).unwrap(), row.iter().sum::<i64>(), "N3({r})");
        let mut acc = 0;
        for n3 in -r..=r {
            acc += row[(n3 + max) as usize];
            assert_eq!(cumulative_ring_count(r, n3).unwrap(), acc, "M4({r},{n3})");
        }
        assert_eq!(cumulative_ring_count(r, r).unwrap(), shell_count(r).unwrap());
    }
}

#[test]
fn generation_count_equals_last_shell_block() {
    for p in 0..60 {
        assert_eq!(cumulative_shell_count(p, p).unwrap(), generation_count(p).unwrap());
    }
}

proptest! {
    #[test]
    fn index_round_trip(a in -400i64..400, b in -400i64..400, c in -400i64..400, d in -400i64..400) {
        let d = if (a + b + c + d) % 2 == 0 { d } else { d + 1 };
        let p = pt([a, b, c, d]);
        let i = index_of(p).unwrap();
        prop_assert_eq!(point_of(i).unwrap(), p);
    }

    #[test]
    fn index_order_matches_brute_key(x in prop::array::uniform4(-30i64..30), y in prop::array::uniform4(-30i64..30)) {
        let mut x = x; let mut y = y;
        x[3] += x.iter().sum::<i64>().rem_euclid(2);
        y[3] += y.iter().sum::<i64>().rem_euclid(2);
        let (px, py) = (pt(x), pt(y));
        prop_assert_eq!(index_of(px).unwrap().cmp(&index_of(py).unwrap()), brute_key(&px).cmp(&brute_key(&py)));
    }

    #[test]
    fn generated_points_sit_on_their_shell(i in 0i64..50_000_000) {
        let p = point_of(i).unwrap();
        let g = generation_coords(p).unwrap();
        prop_assert_eq!(p.g3d(), g.r);
        prop_assert_eq!(p.g4d(), g.p);
        prop_assert_eq!(p.g3d() % 2, p.g4d() % 2);
        prop_assert!(1 <= g.i4 && g.i4 <= ring_count(g.r - p.n3().abs()).unwrap());
        prop_assert!(1 <= g.i3 && g.i3 <= shell_count(g.r).unwrap());
        prop_assert!(1 <= g.i2 && g.i2 <= shell_block_count(g.p, g.r).unwrap());
        prop_assert!(1 <= g.i1 && g.i1 <= generation_count(g.p).unwrap());
    }

    #[test]
    fn odd_tuples_are_rejected(a in -50i64..50, b in -50i64..50, c in -50i64..50, d in -50i64..50) {
        prop_assume!((a + b + c + d) % 2 != 0);
        prop_assert!(LatticePoint::new(a, b, c, d).is_err());
    }
}
