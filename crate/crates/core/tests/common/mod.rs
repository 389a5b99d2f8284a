#![allow(dead_code)]

use std::collections::BTreeMap;

use estc_core::coupling::CouplingStencil;
use estc_core::engine::Solution;
use estc_core::schedule::{custom_model, ModelSpec, Region, Schedule};
use estc_core::{FieldConfig, LatticePoint, SpinorBlock, C64};
use nalgebra::DMatrix;

/// The first 69 values of the inverse numbering (frozen reference list).
pub const S69: [[i64; 4]; 69] = [
    [0, 0, 0, 0],
    [0, 0, -1, -1], [0, -1, 0, -1], [-1, 0, 0, -1],
    [1, 0, 0, -1], [0, 1, 0, -1], [0, 0, 1, -1],
    [0, 0, -1, 1], [0, -1, 0, 1], [-1, 0, 0, 1],
    [1, 0, 0, 1], [0, 1, 0, 1], [0, 0, 1, 1],
    [0, 0, 0, -2], [0, 0, 0, 2],
    [0, 0, -2, 0], [0, -1, -1, 0], [-1, 0, -1, 0],
    [1, 0, -1, 0], [0, 1, -1, 0], [0, -2, 0, 0],
    [-1, -1, 0, 0], [1, -1, 0, 0], [-2, 0, 0, 0],
    [2, 0, 0, 0], [-1, 1, 0, 0], [1, 1, 0, 0],
    [0, 2, 0, 0], [0, -1, 1, 0], [-1, 0, 1, 0],
    [1, 0, 1, 0], [0, 1, 1, 0], [0, 0, 2, 0],
    [0, 0, -2, -2], [0, -1, -1, -2], [-1, 0, -1, -2],
    [1, 0, -1, -2], [0, 1, -1, -2], [0, -2, 0, -2],
    [-1, -1, 0, -2], [1, -1, 0, -2], [-2, 0, 0, -2],
    [2, 0, 0, -2], [-1, 1, 0, -2], [1, 1, 0, -2],
    [0, 2, 0, -2], [0, -1, 1, -2], [-1, 0, 1, -2],
    [1, 0, 1, -2], [0, 1, 1, -2], [0, 0, 2, -2],
    [0, 0, -2, 2], [0, -1, -1, 2], [-1, 0, -1, 2],
    [1, 0, -1, 2], [0, 1, -1, 2], [0, -2, 0, 2],
    [-1, -1, 0, 2], [1, -1, 0, 2], [-2, 0, 0, 2],
    [2, 0, 0, 2], [-1, 1, 0, 2], [1, 1, 0, 2],
    [0, 2, 0, 2], [0, -1, 1, 2], [-1, 0, 1, 2],
    [1, 0, 1, 2], [0, 1, 1, 2], [0, 0, 2, 2],
];

/// A generic weak field: all six harmonics populated, complex, no symmetry.
pub fn sample_field() -> FieldConfig {
    FieldConfig::from_json(
        r#"{"omega": 0.7, "q": [0.1, 0.05, 0.2], "q4": 0.37,
            "amplitudes": [
              [[0.02, 0.01], [0.0, 0.03], [0.01, 0.0]],
              [[0.0, 0.0], [0.02, 0.0], [0.0, -0.01]],
              [[0.01, 0.01], [0.0, 0.0], [0.03, 0.0]],
              [[0.02, 0.0], [0.0, 0.01], [0.0, 0.0]],
              [[0.0, 0.02], [0.01, 0.0], [0.0, 0.0]],
              [[0.0, 0.0], [0.0, 0.0], [0.02, 0.02]]]}"#,
    )
    .unwrap()
}

/// Same field shape at a different overall strength.
pub fn scaled_field(scale: f64) -> FieldConfig {
    let mut cfg = sample_field();
    for a in cfg.amplitudes.iter_mut() {
        for z in a.iter_mut() {
            *z *= scale;
        }
    }
    cfg
}

/// The on-shell free electron with a small momentum along the third axis.
pub fn free_on_shell() -> FieldConfig {
    let q3: f64 = 0.04;
    FieldConfig::free([0.0, 0.0, q3], (1.0 + q3 * q3).sqrt(), 1.0).unwrap()
}

/// Families 0..=6 inside the stage (1,1) central subset: 28 equations.
pub fn toy_model() -> ModelSpec {
    let schedule = Schedule::build_cycle1().unwrap();
    let region = Region::new([-1, -1, -1, -5], [2, 2, 2, 2]).unwrap();
    custom_model(&schedule, "toy", &[0, 1, 2, 3, 4, 5, 6], region).unwrap()
}

/// Dense coordinates: one slot per (point, spinor component).
pub struct DenseIndex {
    pub points: Vec<LatticePoint>,
    slot: BTreeMap<LatticePoint, usize>,
}

impl DenseIndex {
    pub fn dim(&self) -> usize {
        4 * self.points.len()
    }

    pub fn col(&self, p: &LatticePoint, b: usize) -> usize {
        4 * self.slot[p] + b
    }
}

/// Orthogonal projector onto the span of all equation rows, by dense SVD.
pub fn dense_row_projector(cfg: &FieldConfig, equations: &[(usize, LatticePoint)]) -> (DenseIndex, DMatrix<C64>) {
    let stencil = CouplingStencil::new(cfg);
    let mut slot = BTreeMap::new();
    for (_, n) in equations {
        for (s, _) in stencil.blocks(n) {
            let len = slot.len();
            slot.entry(*n + s).or_insert(len);
        }
    }
    let mut points = vec![LatticePoint::ORIGIN; slot.len()];
    for (p, i) in &slot {
        points[*i] = *p;
    }
    let index = DenseIndex { points, slot };

    // Row a of equation n acting on C: sum_s V(n, s)_{a, b} c(n + s)_b.
    let mut a = DMatrix::<C64>::zeros(4 * equations.len(), index.dim());
    for (e, (_, n)) in equations.iter().enumerate() {
        for (s, v) in stencil.blocks(n) {
            for r in 0..4 {
                for b in 0..4 {
                    a[(4 * e + r, index.col(&(*n + s), b))] = v.0[r][b];
                }
            }
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let smax = svd.singular_values.max();
    let mut p = DMatrix::<C64>::zeros(index.dim(), index.dim());
    for (k, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma > 1e-10 * smax {
            let row = v_t.row(k);
            // v_t rows are conj(v)^T; the projector is sum v v^dagger.
            p += row.adjoint() * row;
        }
    }
    (index, p)
}

/// `sum_k rho_k` of an engine run, in the dense coordinates.
pub fn engine_projector(solution: &Solution, index: &DenseIndex) -> DMatrix<C64> {
    let mut p = DMatrix::<C64>::zeros(index.dim(), index.dim());
    for rec in &solution.records {
        for v in solution.record_vectors(rec).unwrap() {
            for (pi, bi) in v.entries() {
                for (pj, bj) in v.entries() {
                    for x in 0..4 {
                        for y in 0..4 {
                            p[(index.col(pi, x), index.col(pj, y))] += bi[x] * bj[y].conj();
                        }
                    }
                }
            }
        }
    }
    p
}

/// The `S(n)` blocks implied by a dense projector: columns of `1 - P` at the origin.
pub fn dense_solution(index: &DenseIndex, p: &DMatrix<C64>) -> Vec<(LatticePoint, SpinorBlock)> {
    index
        .points
        .iter()
        .map(|n| {
            let block = SpinorBlock::from_fn(|a, b| {
                let delta = if *n == LatticePoint::ORIGIN && a == b { 1.0 } else { 0.0 };
                C64::new(delta, 0.0) - p[(index.col(n, a), index.col(&LatticePoint::ORIGIN, b))]
            });
            (*n, block)
        })
        .collect()
}
