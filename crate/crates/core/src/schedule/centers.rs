//! Center tables for the first fractal cycle.
//!
//! The phase-1 tables of stages 2, 3 and 4 hold 3D projections; each entry
//! expands to five consecutive centers that differ only in `n4`.

/// Centers of the eight sublattices forming `F_0`.
pub const STAGE0_PHASE1: [[i64; 4]; 8] = [
    [0, 0, 0, 0],
    [-1, -1, -1, -1],
    [1, 1, -1, -1],
    [1, -1, 1, -1],
    [-1, 1, 1, -1],
    [0, 2, 2, 0],
    [2, 0, 2, 0],
    [2, 2, 0, 0],
];

/// Centers of `F_1 .. F_6`.
pub const STAGE0_PHASE2: [[i64; 4]; 6] = [
    [0, 0, -1, -1],
    [0, -1, 0, -1],
    [-1, 0, 0, -1],
    [0, 1, 1, 0],
    [1, 0, 1, 0],
    [1, 1, 0, 0],
];

/// 3D projections of the stage 2, phase 1 centers.
#[rustfmt::skip]
pub const STAGE2_PROJECTIONS: [[i64; 3]; 6] = [
    [-1, 2, 1], [-1, 1, 2], [-2, 1, 1], [-2, 0, 1],
    [-3, 0, 0], [-2, 1, 0],
];

/// 3D projections of the stage 3, phase 1 centers.
#[rustfmt::skip]
pub const STAGE3_PROJECTIONS: [[i64; 3]; 30] = [
    [6, -1, 1], [3, -1, 0], [3, 0, 1], [5, -2, 1],
    [5, -1, 2], [4, -1, 1], [4, -2, 1], [4, -3, 0],
    [5, -2, 0], [3, -2, 0], [2, -1, 1], [-1, -1, 0],
    [-1, 0, 1], [1, -2, 1], [1, -1, 2], [0, -1, 1],
    [0, -2, 1], [0, -3, 0], [1, -2, 0], [2, -2, -1],
    [-1, -2, 0], [2, -1, 0], [-2, -1, 1], [-3, -2, 1],
    [-3, -1, 2], [-4, -2, 1], [-4, -3, 0], [-3, -2, 0],
    [-2, -2, -1], [-2, -1, 0],
];

/// 3D projections of the stage 4, phase 1 centers.
#[rustfmt::skip]
pub const STAGE4_PROJECTIONS: [[i64; 3]; 182] = [
    [3, 5, 0], [5, 3, 0], [3, 4, -1], [5, 4, -1],
    [6, 5, -1], [4, 3, -1], [4, 5, -1], [5, 5, -2],
    [5, 6, -1], [4, 5, -2], [5, 4, -2], [4, 4, -3],
    [3, 3, -2], [3, 4, -2], [4, 3, -2], [4, 4, -2],
    [3, 3, -3], [-1, 5, 0], [1, 3, 0], [-1, 4, -1],
    [1, 4, -1], [2, 5, -1], [0, 3, -1], [0, 5, -1],
    [1, 5, -2], [1, 6, -1], [0, 5, -2], [1, 4, -2],
    [2, 3, -2], [0, 4, -3], [2, 3, -1], [-1, 3, -2],
    [-1, 4, -2], [2, 4, -1], [0, 3, -2], [2, 4, 0],
    [0, 4, -2], [-1, 3, -3], [1, 3, -1], [-3, 3, 0],
    [-3, 4, -1], [-2, 5, -1], [-4, 3, -1], [-3, 5, -2],
    [-3, 6, -1], [-4, 5, -2], [-3, 4, -2], [-2, 3, -2],
    [-4, 4, -3], [-2, 3, -1], [-2, 4, -1], [-4, 3, -2],
    [-2, 4, 0], [-3, 3, -1], [3, 1, 0], [5, -1, 0],
    [3, 0, -1], [5, 0, -1], [6, 1, -1], [4, -1, -1],
    [4, 1, -1], [5, 1, -2], [5, 2, -1], [3, 2, -2],
    [4, 1, -2], [5, 0, -2], [4, 0, -3], [3, 2, -1],
    [3, -1, -2], [3, 0, -2], [4, -1, -2], [4, 2, -1],
    [4, 2, 0], [4, 0, -2], [3, -1, -3], [3, 1, -1],
    [-1, 1, 0], [1, -1, 0], [-1, 0, -1], [1, 0, -1],
    [2, 1, -1], [0, -1, -1], [0, 1, -1], [1, 1, -2],
    [1, 2, -1], [-1, 2, -2], [0, 1, -2], [1, 0, -2],
    [2, -1, -2], [0, 0, -3], [2, -1, -1], [-1, 2, -1],
    [2, 2, -3], [-1, -1, -2], [-1, 0, -2], [2, 1, -2],
    [2, 0, -1], [0, -1, -2], [1, 2, -2], [0, 2, -1],
    [2, 2, -2], [2, 0, 0], [0, 2, 0], [0, 0, -2],
    [-1, -1, -3], [1, 1, -3], [-1, 1, -1], [1, -1, -1],
    [-3, -1, 0], [-3, 0, -1], [-2, 1, -1], [-4, -1, -1],
    [-3, 1, -2], [-3, 2, -1], [-5, 2, -2], [-4, 1, -2],
    [-3, 0, -2], [-2, -1, -2], [-4, 0, -3], [-2, -1, -1],
    [-2, 2, -3], [-2, 1, -2], [-2, 0, -1], [-4, -1, -2],
    [-3, 2, -2], [-4, 2, -1], [-2, 2, -2], [-2, 0, 0],
    [-3, 1, -3], [-3, -1, -1], [3, -3, 0], [3, -4, -1],
    [6, -3, -1], [4, -3, -1], [5, -3, -2], [5, -2, -1],
    [3, -2, -2], [4, -3, -2], [5, -4, -2], [4, -4, -3],
    [3, -2, -1], [3, -4, -2], [4, -2, -1], [4, -2, 0],
    [3, -3, -1], [-1, -3, 0], [-1, -4, -1], [2, -3, -1],
    [0, -3, -1], [1, -3, -2], [1, -2, -1], [-1, -2, -2],
    [0, -3, -2], [1, -4, -2], [2, -5, -2], [0, -4, -3],
    [-1, -2, -1], [2, -2, -3], [-1, -4, -2], [2, -3, -2],
    [2, -4, -1], [1, -2, -2], [0, -2, -1], [2, -2, -2],
    [0, -2, 0], [1, -3, -3], [-1, -3, -1], [-2, -3, -1],
    [-3, -3, -2], [-3, -2, -1], [-5, -2, -2], [-4, -3, -2],
    [-3, -4, -2], [-2, -5, -2], [-4, -4, -3], [-2, -2, -3],
    [-2, -3, -2], [-2, -4, -1], [-3, -2, -2], [-4, -2, -1],
    [-2, -2, -2], [-3, -3, -3],
];
