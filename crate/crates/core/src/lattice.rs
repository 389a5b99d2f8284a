//! Sequential numbering of the even-sum integer lattice.
//!
//! Points are ordered by generation `p = g4d(n)`, then by the octahedral
//! shell `r = g3d(n)` (same parity as `p`), then by the `n4` slice, then by
//! `n3`, and finally by position on the ring `|n1| + |n2| = r - |n3|`.
//! Index 0 is the origin; the generation `p` occupies the indices
//! `M1(p-1)+1 ..= M1(p)`.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the integer lattice, used as a harmonic index and as a shift.
///
/// Points of the even lattice have an even component sum; [`LatticePoint::new`]
/// enforces this. Sums and differences of even points stay even.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint(pub [i64; 4]);

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint([0; 4]);

    pub fn new(n1: i64, n2: i64, n3: i64, n4: i64) -> Result<Self> {
        let p = LatticePoint([n1, n2, n3, n4]);
        if p.is_even() {
            Ok(p)
        } else {
            Err(Error::OddSum(p))
        }
    }

    pub const fn from_array_unchecked(n: [i64; 4]) -> Self {
        LatticePoint(n)
    }

    pub fn is_even(&self) -> bool {
        self.0.iter().sum::<i64>().rem_euclid(2) == 0
    }

    pub fn n1(&self) -> i64 {
        self.0[0]
    }
    pub fn n2(&self) -> i64 {
        self.0[1]
    }
    pub fn n3(&self) -> i64 {
        self.0[2]
    }
    pub fn n4(&self) -> i64 {
        self.0[3]
    }

    /// Spatial 1-norm `|n1| + |n2| + |n3|`.
    pub fn g3d(&self) -> i64 {
        self.0[0].abs() + self.0[1].abs() + self.0[2].abs()
    }

    /// `max(g3d, |n4|)`; two equations couple only when their sites are within 2.
    pub fn g4d(&self) -> i64 {
        self.g3d().max(self.0[3].abs())
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "({a},{b},{c},{d})")
    }
}

impl std::str::FromStr for LatticePoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::InvalidArgument(format!("expected 4 components, got '{s}'")));
        }
        let mut n = [0i64; 4];
        for (slot, part) in n.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad integer '{part}' in '{s}'")))?;
        }
        LatticePoint::new(n[0], n[1], n[2], n[3])
    }
}

impl Add for LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: Self) -> Self {
        let mut n = self.0;
        for (a, b) in n.iter_mut().zip(rhs.0) {
            *a += b;
        }
        LatticePoint(n)
    }
}

impl Sub for LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: Self) -> Self {
        let mut n = self.0;
        for (a, b) in n.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        LatticePoint(n)
    }
}

impl Neg for LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> Self {
        LatticePoint(self.0.map(|x| -x))
    }
}

/// Local coordinates of a point inside its generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenerationCoords {
    pub p: i64,
    pub r: i64,
    /// Position of the `n4` slice inside the shell (1-based).
    pub j4: i64,
    pub i1: i64,
    pub i2: i64,
    pub i3: i64,
    pub i4: i64,
}

fn non_negative(what: &'static str, value: i64) -> Result<()> {
    if value < 0 {
        Err(Error::Negative { what, value })
    } else {
        Ok(())
    }
}

fn narrow(value: i128, what: &'static str) -> Result<i64> {
    i64::try_from(value).map_err(|_| Error::Overflow(what))
}

/// `N4(R)`: number of points on the ring `|n1| + |n2| = R`.
pub fn ring_count(ring: i64) -> Result<i64> {
    non_negative("R", ring)?;
    Ok(if ring == 0 { 1 } else { 4 * ring })
}

/// `M4(r, n3)`: points of the octahedral shell `r` with third component `<= n3`.
pub fn cumulative_ring_count(r: i64, n3: i64) -> Result<i64> {
    non_negative("r", r)?;
    let (r, n3) = (r as i128, n3 as i128);
    let v = if n3 < -r {
        0
    } else if n3 <= 0 {
        1 + 2 * (n3 + r) * (n3 + r + 1)
    } else if n3 < r {
        1 + 2 * r * (r + 1) - 2 * n3 * (n3 + 1 - 2 * r)
    } else if r == 0 {
        1
    } else {
        2 + 4 * r * r
    };
    narrow(v, "M4")
}

/// `N3(r)`: number of points on the octahedral shell `g3d = r` (fixed `n4`).
pub fn shell_count(r: i64) -> Result<i64> {
    non_negative("r", r)?;
    let r = r as i128;
    narrow(if r == 0 { 1 } else { 2 + 4 * r * r }, "N3")
}

/// `j4max(p, r)`: number of admissible `n4` slices for a shell of generation `p`.
pub fn slice_count(p: i64, r: i64) -> Result<i64> {
    check_shell(p, r)?;
    Ok(if r < p { 2 } else { 1 + p })
}

/// `N2(p, r)`: number of generation-`p` points with `g3d = r`.
pub fn shell_block_count(p: i64, r: i64) -> Result<i64> {
    let slices = slice_count(p, r)? as i128;
    narrow(slices * shell_count(r)? as i128, "N2")
}

/// `kmax(p)`: number of shells `r` (same parity as `p`, `r <= p`) in generation `p`.
pub fn shells_in_generation(p: i64) -> Result<i64> {
    non_negative("p", p)?;
    Ok(if p % 2 == 0 { p / 2 + 1 } else { (p + 1) / 2 })
}

/// `M2(p, r)`: generation-`p` points with `g3d <= r`.
///
/// Zero below the smallest admissible shell; `r >= p` gives the whole generation.
pub fn cumulative_shell_count(p: i64, r: i64) -> Result<i64> {
    non_negative("p", p)?;
    let r_min = p & 1;
    if r < r_min {
        return Ok(0);
    }
    let (p, r) = (p as i128, r as i128);
    let v = if r < p {
        // r has the parity of p here only when called with admissible shells;
        // round down to the nearest admissible shell otherwise.
        let r = if (r - p).rem_euclid(2) == 0 { r } else { r - 1 };
        2 * (r + 1) * (2 * r * r + 4 * r + 3) / 3
    } else if p == 0 {
        1
    } else {
        4 * p * (4 * p * p + 5) / 3
    };
    narrow(v, "M2")
}

/// `N1(p)`: number of lattice points with `g4d = p`.
pub fn generation_count(p: i64) -> Result<i64> {
    cumulative_shell_count(p, p)
}

/// `M1(p)`: global index of the last point of generation `p`.
pub fn cumulative_generation_count(p: i64) -> Result<i64> {
    non_negative("p", p)?;
    let p = p as i128;
    let v = 2 * p * (p + 1) * (2 * p * p + 2 * p + 5) / 3;
    narrow(v, "M1")
}

fn check_shell(p: i64, r: i64) -> Result<()> {
    non_negative("p", p)?;
    non_negative("r", r)?;
    if r > p || (p - r) % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "shell r={r} is not admissible for generation p={p}"
        )));
    }
    Ok(())
}

fn ring_position(n1: i64, n2: i64, ring: i64) -> i64 {
    if n1 == 0 && n2 <= 0 {
        1
    } else if n1 < 0 {
        2 * (ring + n2)
    } else if n1 > 0 {
        2 * (ring + n2) + 1
    } else {
        4 * n2
    }
}

fn slice_position(p: i64, r: i64, n4: i64) -> i64 {
    if r < p {
        if n4 < 0 {
            1
        } else {
            2
        }
    } else if n4 < 0 {
        -n4
    } else {
        1 + n4
    }
}

/// Local coordinates of `point` within its generation.
pub fn generation_coords(point: LatticePoint) -> Result<GenerationCoords> {
    if !point.is_even() {
        return Err(Error::OddSum(point));
    }
    let [n1, n2, n3, n4] = point.0;
    let p = point.g4d();
    let r = point.g3d();
    let ring = r - n3.abs();
    let i4 = ring_position(n1, n2, ring);
    let i3 = cumulative_ring_count(r, n3 - 1)? + i4;
    let j4 = slice_position(p, r, n4);
    let i2 = (j4 - 1)
        .checked_mul(shell_count(r)?)
        .and_then(|v| v.checked_add(i3))
        .ok_or(Error::Overflow("i2"))?;
    let i1 = cumulative_shell_count(p, r - 2)?
        .checked_add(i2)
        .ok_or(Error::Overflow("i1"))?;
    Ok(GenerationCoords { p, r, j4, i1, i2, i3, i4 })
}

/// Global sequential index of an even-lattice point.
pub fn index_of(point: LatticePoint) -> Result<i64> {
    if !point.is_even() {
        return Err(Error::OddSum(point));
    }
    if point == LatticePoint::ORIGIN {
        return Ok(0);
    }
    let coords = generation_coords(point)?;
    cumulative_generation_count(coords.p - 1)?
        .checked_add(coords.i1)
        .ok_or(Error::Overflow("index"))
}

/// Inverse of [`index_of`].
pub fn point_of(index: i64) -> Result<LatticePoint> {
    non_negative("index", index)?;
    if index == 0 {
        return Ok(LatticePoint::ORIGIN);
    }

    // M1 grows like 4p^4/3; start from the quartic estimate and walk to the
    // generation satisfying M1(p-1) < i <= M1(p).
    let mut p = ((0.75 * index as f64).powf(0.25).floor() as i64).max(1);
    while cumulative_generation_count(p)? < index {
        p += 1;
    }
    while p > 1 && cumulative_generation_count(p - 1)? >= index {
        p -= 1;
    }
    let i1 = index - cumulative_generation_count(p - 1)?;

    let mut r = p & 1;
    while cumulative_shell_count(p, r)? < i1 {
        r += 2;
    }
    let i2 = i1 - cumulative_shell_count(p, r - 2)?;

    let per_slice = shell_count(r)?;
    let j4 = (i2 + per_slice - 1) / per_slice;
    let n4 = if r < p {
        if j4 % 2 == 0 {
            p
        } else {
            -p
        }
    } else {
        let sign = if (p + j4 + 1) % 2 == 0 { 1 } else { -1 };
        let shift = if (p + j4) % 2 == 0 { 0 } else { -1 };
        sign * j4 + shift
    };
    let i3 = i2 - (j4 - 1) * per_slice;

    let mut n3 = -r;
    while cumulative_ring_count(r, n3)? < i3 {
        n3 += 1;
    }
    let i4 = i3 - cumulative_ring_count(r, n3 - 1)?;
    let ring = r - n3.abs();
    let n2 = -ring + i4 / 2;
    let n1 = if i4 % 2 == 0 {
        n2.abs() - ring
    } else {
        ring - n2.abs()
    };
    Ok(LatticePoint([n1, n2, n3, n4]))
}

/// The first 69 points of the numbering: every point with `g4d <= 2`.
pub fn first_69() -> Vec<LatticePoint> {
    (0..69)
        .map(|i| point_of(i).expect("small indices never overflow"))
        .collect()
}
