//! Fractal family of point lattices and the finite models built from it.
//!
//! Lattice `u` is the set `c0(u) + sum_i k_i * periods_i * e_i`. Family
//! `F_0` is the union of lattices `u = 1..=8`; for `k >= 1` family `F_k` is the
//! single lattice `u = 8 + k`. The first cycle ends at `u = 2222` (`k = 2214`).

pub mod centers;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{first_69, index_of, LatticePoint};

pub const CYCLE1_LAST_LATTICE: usize = 2222;
pub const CYCLE1_LAST_FAMILY: usize = CYCLE1_LAST_LATTICE - 8;

/// Lattices added per (stage, phase) in the first cycle.
pub const STAGE_SIZES: [((u8, u8), usize); 10] = [
    ((0, 1), 8),
    ((0, 2), 6),
    ((1, 1), 14),
    ((1, 2), 14),
    ((2, 1), 30),
    ((2, 2), 30),
    ((3, 1), 150),
    ((3, 2), 150),
    ((4, 1), 910),
    ((4, 2), 910),
];

/// A known lattice of the second cycle. The second cycle is not generated;
/// these anchors only document where it starts and ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CycleAnchor {
    pub u: usize,
    pub center: [i64; 4],
    pub periods: [i64; 4],
}

pub const CYCLE2_FIRST: CycleAnchor = CycleAnchor {
    u: 2223,
    center: [4, 4, 4, -6],
    periods: [12, 12, 12, 36],
};

pub const CYCLE2_LAST: CycleAnchor = CycleAnchor {
    u: 108_526,
    center: [-15, -15, 5, -7],
    periods: [36, 36, 36, 36],
};

/// `n4` offsets assigned to the five centers sharing one 3D projection.
const N4_EVEN: [i64; 5] = [4, 0, -4, 2, -2];
const N4_ODD: [i64; 5] = [3, -1, -5, 1, -3];

/// Raw tables from which the first cycle is generated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleData {
    pub stage0_phase1: Vec<[i64; 4]>,
    pub stage0_phase2: Vec<[i64; 4]>,
    pub stage2_projections: Vec<[i64; 3]>,
    pub stage3_projections: Vec<[i64; 3]>,
    pub stage4_projections: Vec<[i64; 3]>,
    /// Period lists of stages 0..=4.
    pub periods: [[i64; 4]; 5],
}

/// FNV-1a digest of the embedded tables.
pub const EMBEDDED_CHECKSUM: u64 = 0x78cc_f1a8_880c_6de9;

impl CycleData {
    pub fn embedded() -> Self {
        CycleData {
            stage0_phase1: centers::STAGE0_PHASE1.to_vec(),
            stage0_phase2: centers::STAGE0_PHASE2.to_vec(),
            stage2_projections: centers::STAGE2_PROJECTIONS.to_vec(),
            stage3_projections: centers::STAGE3_PROJECTIONS.to_vec(),
            stage4_projections: centers::STAGE4_PROJECTIONS.to_vec(),
            periods: [
                [4, 4, 4, 4],
                [4, 4, 4, 12],
                [12, 4, 4, 12],
                [12, 12, 4, 12],
                [12, 12, 12, 12],
            ],
        }
    }

    pub fn checksum(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: i64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        let tables4 = [&self.stage0_phase1, &self.stage0_phase2];
        for t in tables4 {
            feed(t.len() as i64);
            t.iter().flatten().for_each(|&v| feed(v));
        }
        let tables3 = [
            &self.stage2_projections,
            &self.stage3_projections,
            &self.stage4_projections,
        ];
        for t in tables3 {
            feed(t.len() as i64);
            t.iter().flatten().for_each(|&v| feed(v));
        }
        self.periods.iter().flatten().for_each(|&v| feed(v));
        h
    }

    /// Checks table lengths, then the digest.
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("stage (0,1) centers", self.stage0_phase1.len(), 8),
            ("stage (0,2) centers", self.stage0_phase2.len(), 6),
            ("stage 2 projections", self.stage2_projections.len(), 6),
            ("stage 3 projections", self.stage3_projections.len(), 30),
            ("stage 4 projections", self.stage4_projections.len(), 182),
        ];
        for (name, got, want) in lengths {
            if got != want {
                return Err(Error::CorruptData(format!("{name}: {got} entries, expected {want}")));
            }
        }
        let sum = self.checksum();
        if sum != EMBEDDED_CHECKSUM {
            return Err(Error::CorruptData(format!(
                "checksum {sum:#018x} does not match {EMBEDDED_CHECKSUM:#018x}"
            )));
        }
        Ok(())
    }
}

/// One translation lattice of the fractal family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointLattice {
    pub u: usize,
    pub center: LatticePoint,
    pub periods: [i64; 4],
    pub stage: u8,
    pub phase: u8,
}

impl PointLattice {
    /// Family index `k`: 0 for `u <= 8`, otherwise `u - 8`.
    pub fn family(&self) -> usize {
        if self.u <= 8 {
            0
        } else {
            self.u - 8
        }
    }

    pub fn contains(&self, n: &LatticePoint) -> bool {
        (0..4).all(|i| (n.0[i] - self.center.0[i]).rem_euclid(self.periods[i]) == 0)
    }
}

/// Inclusive axis-aligned box of lattice points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub lower: [i64; 4],
    pub upper: [i64; 4],
}

impl Region {
    pub fn new(lower: [i64; 4], upper: [i64; 4]) -> Result<Self> {
        if (0..4).any(|i| lower[i] > upper[i]) {
            return Err(Error::InvalidArgument(format!(
                "region lower {lower:?} exceeds upper {upper:?}"
            )));
        }
        Ok(Region { lower, upper })
    }

    pub const fn cube(lo: i64, hi: i64) -> Self {
        Region { lower: [lo; 4], upper: [hi; 4] }
    }

    /// Central subset of stage (4,2); every finite model lives inside it.
    pub const fn model_region() -> Self {
        Region::cube(-5, 6)
    }

    /// Central subset of the given (stage, phase) of the first cycle.
    pub fn central_subset(stage: u8, phase: u8) -> Result<Self> {
        let (lower, upper) = match (stage, phase) {
            (0, 1) | (0, 2) => ([-1, -1, -1, -1], [2, 2, 2, 2]),
            (1, 1) => ([-1, -1, -1, -5], [2, 2, 2, 2]),
            (1, 2) => ([-1, -1, -1, -5], [2, 2, 2, 6]),
            (2, 1) => ([-5, -1, -1, -5], [2, 2, 2, 6]),
            (2, 2) => ([-5, -1, -1, -5], [6, 2, 2, 6]),
            (3, 1) => ([-5, -5, -1, -5], [6, 2, 2, 6]),
            (3, 2) => ([-5, -5, -1, -5], [6, 6, 2, 6]),
            (4, 1) => ([-5, -5, -5, -5], [6, 6, 2, 6]),
            (4, 2) => ([-5, -5, -5, -5], [6, 6, 6, 6]),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "no central subset for stage ({stage},{phase})"
                )))
            }
        };
        Region::new(lower, upper)
    }

    pub fn contains(&self, n: &LatticePoint) -> bool {
        (0..4).all(|i| self.lower[i] <= n.0[i] && n.0[i] <= self.upper[i])
    }

    /// All even-lattice points of the region, in global index order.
    pub fn even_points(&self) -> Vec<LatticePoint> {
        let mut out = Vec::new();
        for a in self.lower[0]..=self.upper[0] {
            for b in self.lower[1]..=self.upper[1] {
                for c in self.lower[2]..=self.upper[2] {
                    for d in self.lower[3]..=self.upper[3] {
                        let p = LatticePoint([a, b, c, d]);
                        if p.is_even() {
                            out.push(p);
                        }
                    }
                }
            }
        }
        sort_by_index(&mut out);
        out
    }
}

pub(crate) fn sort_by_index(points: &mut [LatticePoint]) {
    points.sort_by_cached_key(|p| index_of(*p).expect("region points are small"));
}

/// The generated first cycle, `u = 1..=2222`.
#[derive(Clone, Debug)]
pub struct Schedule {
    lattices: Vec<PointLattice>,
}

impl Schedule {
    pub fn build_cycle1() -> Result<Self> {
        Self::from_data(&CycleData::embedded())
    }

    pub fn from_data(data: &CycleData) -> Result<Self> {
        data.validate()?;
        let mut lattices: Vec<PointLattice> = Vec::with_capacity(CYCLE1_LAST_LATTICE);
        let mut push = |center: LatticePoint, periods: [i64; 4], stage: u8, phase: u8| {
            let u = lattices.len() + 1;
            lattices.push(PointLattice { u, center, periods, stage, phase });
        };

        for c in &data.stage0_phase1 {
            push(LatticePoint(*c), data.periods[0], 0, 1);
        }
        for c in &data.stage0_phase2 {
            push(LatticePoint(*c), data.periods[0], 0, 2);
        }

        // Stage 1: the 14 stage-0 centers moved by -(0,0,0,2), then +(0,0,0,2).
        let stage0: Vec<LatticePoint> = data
            .stage0_phase1
            .iter()
            .chain(&data.stage0_phase2)
            .map(|c| LatticePoint(*c))
            .collect();
        for (phase, dn4) in [(1u8, -2i64), (2, 2)] {
            for c in &stage0 {
                push(*c + LatticePoint([0, 0, 0, dn4]), data.periods[1], 1, phase);
            }
        }

        let later = [
            (2u8, &data.stage2_projections, [4, 0, 0, 0]),
            (3, &data.stage3_projections, [0, 4, 0, 0]),
            (4, &data.stage4_projections, [0, 0, 4, 0]),
        ];
        for (stage, projections, shift) in later {
            let phase1: Vec<LatticePoint> = projections
                .iter()
                .flat_map(|&[a, b, c]| {
                    let offsets = if (a.abs() + b.abs() + c.abs()) % 2 == 0 {
                        N4_EVEN
                    } else {
                        N4_ODD
                    };
                    offsets.map(|n4| LatticePoint([a, b, c, n4]))
                })
                .collect();
            let periods = data.periods[stage as usize];
            for c in &phase1 {
                push(*c, periods, stage, 1);
            }
            for c in &phase1 {
                push(*c + LatticePoint(shift), periods, stage, 2);
            }
        }

        if lattices.len() != CYCLE1_LAST_LATTICE {
            return Err(Error::CorruptData(format!(
                "generated {} lattices, expected {CYCLE1_LAST_LATTICE}",
                lattices.len()
            )));
        }
        if let Some(bad) = lattices.iter().find(|l| !l.center.is_even()) {
            return Err(Error::CorruptData(format!(
                "center {} of lattice {} has an odd sum",
                bad.center, bad.u
            )));
        }
        Ok(Schedule { lattices })
    }

    pub fn lattices(&self) -> &[PointLattice] {
        &self.lattices
    }

    /// Lattice number `u` (1-based).
    pub fn lattice(&self, u: usize) -> Option<&PointLattice> {
        u.checked_sub(1).and_then(|i| self.lattices.get(i))
    }

    pub fn center(&self, u: usize) -> Option<LatticePoint> {
        self.lattice(u).map(|l| l.center)
    }

    /// The lattices composing family `F_k`.
    pub fn family(&self, k: usize) -> &[PointLattice] {
        if k == 0 {
            &self.lattices[..8]
        } else if k <= CYCLE1_LAST_FAMILY {
            &self.lattices[k + 7..k + 8]
        } else {
            &[]
        }
    }

    /// Points of `F_k` inside `region`, in global index order.
    pub fn family_points(&self, k: usize, region: &Region) -> Vec<LatticePoint> {
        let mut pts: Vec<LatticePoint> = self
            .family(k)
            .iter()
            .flat_map(|l| points_in_region(l, region))
            .collect();
        sort_by_index(&mut pts);
        pts
    }

    /// Number of lattices per (stage, phase), in generation order.
    pub fn stage_counts(&self) -> Vec<((u8, u8), usize)> {
        let mut out: Vec<((u8, u8), usize)> = Vec::new();
        for l in &self.lattices {
            match out.last_mut() {
                Some((sp, n)) if *sp == (l.stage, l.phase) => *n += 1,
                _ => out.push(((l.stage, l.phase), 1)),
            }
        }
        out
    }
}

/// Points of `lat` inside `region`, in global index order.
///
/// Uses per-axis residues, so the cost is proportional to the output size.
pub fn points_in_region(lat: &PointLattice, region: &Region) -> Vec<LatticePoint> {
    let axes: Vec<Vec<i64>> = (0..4)
        .map(|i| {
            let period = lat.periods[i];
            let first = region.lower[i] + (lat.center.0[i] - region.lower[i]).rem_euclid(period);
            (0..)
                .map(|j| first + j * period)
                .take_while(|&v| v <= region.upper[i])
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(axes.iter().map(Vec::len).product());
    for &a in &axes[0] {
        for &b in &axes[1] {
            for &c in &axes[2] {
                for &d in &axes[3] {
                    out.push(LatticePoint([a, b, c, d]));
                }
            }
        }
    }
    sort_by_index(&mut out);
    out
}

/// The 13 shifts with `g4d <= 1`: the coupling stencil of one equation.
pub fn stencil_13() -> Vec<LatticePoint> {
    first_69().into_iter().take(13).collect()
}

/// One finite truncation: which equations are kept and in what order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub k_list: Vec<usize>,
    pub points: BTreeMap<usize, Vec<LatticePoint>>,
    pub region: Region,
}

impl ModelSpec {
    pub fn equation_count(&self) -> usize {
        self.points.values().map(Vec::len).sum()
    }

    /// `(k, site)` pairs in processing order: `k` ascending, then global index.
    pub fn equations(&self) -> Vec<(usize, LatticePoint)> {
        self.k_list
            .iter()
            .flat_map(|k| {
                self.points
                    .get(k)
                    .into_iter()
                    .flatten()
                    .map(move |p| (*k, *p))
            })
            .collect()
    }

    pub fn contains_site(&self, n: &LatticePoint) -> bool {
        self.points.values().any(|v| v.contains(n))
    }
}

/// The `p`-model: family 0 plus every family whose center has `g4d <= p`.
pub fn model_spec(schedule: &Schedule, p: u8) -> Result<ModelSpec> {
    let region = Region::model_region();
    match p {
        0 => {
            let mut points = BTreeMap::new();
            points.insert(0, vec![LatticePoint::ORIGIN]);
            Ok(ModelSpec { name: "0-model".into(), k_list: vec![0], points, region })
        }
        1..=3 => {
            let k_list: Vec<usize> = std::iter::once(0)
                .chain((1..=CYCLE1_LAST_FAMILY).filter(|&k| {
                    schedule.lattice(8 + k).is_some_and(|l| l.center.g4d() <= p as i64)
                }))
                .collect();
            custom_model(schedule, &format!("{p}-model"), &k_list, region)
        }
        _ => Err(Error::InvalidArgument(format!("p-model level must be 0..=3, got {p}"))),
    }
}

/// All families of the first cycle, restricted to the stage (4,2) region.
pub fn full_model(schedule: &Schedule) -> ModelSpec {
    let k_list: Vec<usize> = (0..=CYCLE1_LAST_FAMILY).collect();
    custom_model(schedule, "full-4-2", &k_list, Region::model_region())
        .expect("first-cycle families are always valid")
}

/// A model with an explicit family list.
pub fn custom_model(
    schedule: &Schedule,
    name: &str,
    k_list: &[usize],
    region: Region,
) -> Result<ModelSpec> {
    if k_list.first() != Some(&0) {
        return Err(Error::InvalidArgument("family list must start with 0".into()));
    }
    if k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("family list must be strictly increasing".into()));
    }
    if let Some(k) = k_list.iter().find(|&&k| k > CYCLE1_LAST_FAMILY) {
        return Err(Error::InvalidArgument(format!(
            "family {k} is beyond the first cycle (max {CYCLE1_LAST_FAMILY})"
        )));
    }
    let points = k_list
        .iter()
        .map(|&k| (k, schedule.family_points(k, &region)))
        .collect();
    Ok(ModelSpec { name: name.to_string(), k_list: k_list.to_vec(), points, region })
}

/// A pair of lattice points closer than the separation rule allows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SeparationViolation {
    pub a: LatticePoint,
    pub lattice_a: usize,
    pub b: LatticePoint,
    pub lattice_b: usize,
    pub g4d: i64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SeparationReport {
    pub points_checked: usize,
    pub pairs_within_2: usize,
    pub violations: Vec<SeparationViolation>,
}

impl SeparationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the separation rules inside `limit`:
///
/// * two distinct points of `F_0` (lattices with `u <= 8`) are farther than 2 apart;
/// * two points whose difference is not the difference of their lattice
///   centers (a nonzero period combination is involved) are farther than 2 apart.
pub fn verify_separation(lattices: &[PointLattice], limit: &Region) -> SeparationReport {
    let mut owner: HashMap<LatticePoint, usize> = HashMap::new();
    let mut report = SeparationReport::default();
    for (slot, lat) in lattices.iter().enumerate() {
        for p in points_in_region(lat, limit) {
            if let Some(&other) = owner.get(&p) {
                report.violations.push(SeparationViolation {
                    a: p,
                    lattice_a: lattices[other].u,
                    b: p,
                    lattice_b: lat.u,
                    g4d: 0,
                });
            } else {
                owner.insert(p, slot);
            }
        }
    }
    report.points_checked = owner.len();

    let near: Vec<LatticePoint> = first_69().into_iter().skip(1).collect();
    let mut sites: Vec<(&LatticePoint, &usize)> = owner.iter().collect();
    sites.sort_by_key(|(p, _)| **p);
    for (&a, &sa) in sites {
        for s in &near {
            let b = a + *s;
            if b <= a {
                continue;
            }
            let Some(&sb) = owner.get(&b) else { continue };
            report.pairs_within_2 += 1;
            let (la, lb) = (&lattices[sa], &lattices[sb]);
            let both_f0 = la.u <= 8 && lb.u <= 8;
            let period_combination = b - a != lb.center - la.center;
            if both_f0 || period_combination {
                report.violations.push(SeparationViolation {
                    a,
                    lattice_a: la.u,
                    b,
                    lattice_b: lb.u,
                    g4d: s.g4d(),
                });
            }
        }
    }
    report
}
