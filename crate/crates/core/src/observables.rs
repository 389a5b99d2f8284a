//! Wave function, quadrature matrices and the residual functional `R`.
//!
//! With `Psi(x) = E(x) a0` and `E(x) = sum_n exp(i phi_n(x)) S(n)`, harmonic
//! orthogonality on the unit 4-cube turns every quadrature into a finite sum
//! over the table. The residual `D(x) a0` has two independent assemblies: the
//! closed form in terms of `D_n`, `A_1` and `A_2`, and the sum of
//! `V_S(n)^dagger V_S(n)` over the residual map. Both are provided so they can
//! be compared.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{d_n, FieldConfig, PotentialTerms};
use crate::engine::{residual_map, SolutionTable};
use crate::error::{Error, Result};
use crate::lattice::LatticePoint;
use crate::spinor::{bispinor_norm_sqr, hermitian_eigen, Bispinor, SpinorBlock, C64, ZERO};

/// Work items per parallel chunk. Chunk sums are combined in order, so the
/// result does not depend on the thread count.
const CHUNK: usize = 64;

fn chunked_sum<T: Sync>(items: &[T], f: impl Fn(&T) -> SpinorBlock + Sync) -> SpinorBlock {
    let partial: Vec<SpinorBlock> = items
        .par_chunks(CHUNK)
        .map(|c| {
            let mut acc = SpinorBlock::zero();
            for item in c {
                acc += f(item);
            }
            acc
        })
        .collect();
    let mut out = SpinorBlock::zero();
    for p in partial {
        out += p;
    }
    out
}

/// `phi_n(x) = 2 pi [(n + q / Omega) . r' - (n4 + q4 / Omega) X4]`.
pub fn phase(cfg: &FieldConfig, n: &LatticePoint, x: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for k in 0..3 {
        s += (n.0[k] as f64 + cfg.q[k] / cfg.omega) * x[k];
    }
    s -= (n.0[3] as f64 + cfg.q4 / cfg.omega) * x[3];
    2.0 * PI * s
}

/// `E(x) = sum_n exp(i phi_n(x)) S(n)`.
pub fn evolution(table: &SolutionTable, x: &[f64; 4]) -> SpinorBlock {
    let mut e = SpinorBlock::zero();
    for (_, n, s) in table.iter() {
        e += s.scale(C64::from_polar(1.0, phase(&table.field, n, x)));
    }
    e
}

/// `Psi(x) = E(x) a0`.
pub fn wavefunction(table: &SolutionTable, x: &[f64; 4], a0: &Bispinor) -> Bispinor {
    evolution(table, x).mul_vec(a0)
}

/// `U_E = sum_n S(n)^dagger S(n)`.
pub fn u_e(table: &SolutionTable) -> SpinorBlock {
    let blocks: Vec<&SpinorBlock> = table.iter().map(|(_, _, s)| s).collect();
    chunked_sum(&blocks, |s| s.adjoint() * **s)
}

/// `A_E = sum_n S(n)^dagger A(n) S(n)` for a harmonic-diagonal operator `A`.
pub fn a_e<F>(table: &SolutionTable, op: F) -> SpinorBlock
where
    F: Fn(&LatticePoint) -> SpinorBlock + Sync,
{
    let items: Vec<(&LatticePoint, &SpinorBlock)> = table.iter().map(|(_, p, s)| (p, s)).collect();
    chunked_sum(&items, |(n, s)| s.adjoint() * op(n) * **s)
}

/// The energy multiplier `(q4 + n4 Omega) U`.
pub fn energy_operator(cfg: &FieldConfig) -> impl Fn(&LatticePoint) -> SpinorBlock + Sync + '_ {
    move |n| SpinorBlock::identity().scale_real(cfg.q4 + n.0[3] as f64 * cfg.omega)
}

/// The momentum multiplier `(q_k + n_k Omega) U` for axis `k` in `0..3`.
pub fn momentum_operator(
    cfg: &FieldConfig,
    k: usize,
) -> impl Fn(&LatticePoint) -> SpinorBlock + Sync + '_ {
    move |n| SpinorBlock::identity().scale_real(cfg.q[k] + n.0[k] as f64 * cfg.omega)
}

/// `U_D` from the closed form with `D_m D_n`, `A_1` and `A_2` couplings.
pub fn u_d(table: &SolutionTable) -> SpinorBlock {
    let cfg = &table.field;
    let terms = PotentialTerms::new(cfg);
    let a1_offsets: Vec<LatticePoint> = terms.a1_offsets().copied().collect();
    let a2_offsets: Vec<LatticePoint> = terms.a2_offsets().copied().collect();
    let items: Vec<(&LatticePoint, &SpinorBlock)> = table.iter().map(|(_, p, s)| (p, s)).collect();

    chunked_sum(&items, |(m, sm)| {
        let dm = d_n(cfg, m);
        // K(m, n) S(n) summed over n, then left-multiplied by S(m)^dagger.
        let mut row = dm * dm * **sm;
        for off in &a1_offsets {
            let n = **m + *off;
            if let Some(sn) = table.get(&n) {
                let a1 = terms.a1(m, &n);
                row -= (a1 * d_n(cfg, &n) + dm * a1) * *sn;
            }
        }
        for off in &a2_offsets {
            let n = **m + *off;
            if let Some(sn) = table.get(&n) {
                row += sn.scale(terms.a2(m, &n));
            }
        }
        sm.adjoint() * row
    })
}

/// `U_D = sum_n V_S(n)^dagger V_S(n)` over the residual map.
pub fn u_d_from_residuals(table: &SolutionTable) -> Result<SpinorBlock> {
    Ok(residual_map(&table.field, table)?.gram())
}

/// Mean value `<A> = a0^dagger A_E a0 / a0^dagger U_E a0`.
pub fn a_mean<F>(table: &SolutionTable, op: F, a0: &Bispinor) -> Result<C64>
where
    F: Fn(&LatticePoint) -> SpinorBlock + Sync,
{
    let ue = u_e(table);
    let denom = denominator(&ue, a0)?;
    Ok(a_e(table, op).quadratic_form(a0) / denom)
}

fn denominator(ue: &SpinorBlock, a0: &Bispinor) -> Result<f64> {
    let a2 = bispinor_norm_sqr(a0);
    if a2 == 0.0 {
        return Err(Error::InvalidArgument("amplitude a0 is zero".into()));
    }
    let d = ue.quadratic_form(a0).re;
    let scale = ue.trace().re.abs() * a2;
    if !(d > 1e-14 * scale) || d <= 0.0 {
        return Err(Error::Degenerate(format!(
            "a0^dagger U_E a0 = {d:e} vanishes; the wave function is zero for this amplitude"
        )));
    }
    Ok(d)
}

/// The pair `(U_E, U_D)` of one table; `R` for any amplitude follows from it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Quadratures {
    pub u_e: SpinorBlock,
    pub u_d: SpinorBlock,
}

impl Quadratures {
    pub fn of(table: &SolutionTable) -> Self {
        Quadratures { u_e: u_e(table), u_d: u_d(table) }
    }

    /// `R = sqrt(a0^dagger U_D a0 / a0^dagger U_E a0)`.
    pub fn accuracy(&self, a0: &Bispinor) -> Result<f64> {
        let denom = denominator(&self.u_e, a0)?;
        let num = self.u_d.quadratic_form(a0).re.max(0.0);
        Ok((num / denom).sqrt())
    }

    pub fn best_amplitude(&self) -> Result<BestAmplitude> {
        best_amplitude(&self.u_e, &self.u_d)
    }
}

pub fn accuracy(table: &SolutionTable, a0: &Bispinor) -> Result<f64> {
    Quadratures::of(table).accuracy(a0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BestAmplitude {
    /// Minimizer, normalized so that `a0^dagger U_E a0 = 1`.
    pub a0: Bispinor,
    pub r_min: f64,
    /// Rank of `U_E` retained by the whitening; below 4 the search ran on its range.
    pub u_e_rank: usize,
}

/// Minimizes `a0^dagger U_D a0 / a0^dagger U_E a0` by whitening with `U_E`.
pub fn best_amplitude(ue: &SpinorBlock, ud: &SpinorBlock) -> Result<BestAmplitude> {
    let (vals, vecs) = hermitian_eigen(ue);
    let trace: f64 = vals.iter().sum();
    if !(trace > 0.0) {
        return Err(Error::Degenerate("U_E has no positive eigenvalue".into()));
    }
    let keep: Vec<usize> = (0..4).filter(|&i| vals[i] > 1e-12 * trace).collect();

    // W: columns v_i / sqrt(lambda_i) on the retained range, zero elsewhere.
    let mut w = SpinorBlock::zero();
    for &i in &keep {
        let inv = 1.0 / vals[i].sqrt();
        for r in 0..4 {
            w.0[r][i] = vecs.0[r][i] * inv;
        }
    }
    let mut m = w.adjoint() * *ud * w;
    // Push the discarded directions above the spectrum of interest.
    let lift = m.trace().re.abs() + 1.0;
    for i in 0..4 {
        if !keep.contains(&i) {
            m.0[i][i] = C64::new(lift, 0.0);
        }
    }
    let (mu, y) = hermitian_eigen(&m);
    let a0 = w.mul_vec(&y.column(0));
    Ok(BestAmplitude { a0, r_min: mu[0].max(0.0).sqrt(), u_e_rank: keep.len() })
}

/// Default grid size per axis: `2 max|n_i| + 3`.
pub fn default_grid(table: &SolutionTable) -> usize {
    let m = table.max_abs_harmonic().into_iter().max().unwrap_or(0);
    (2 * m + 3) as usize
}

/// `U_E` by the trapezoid rule on an `n^4` periodic grid of the unit cube.
pub fn grid_u_e(table: &SolutionTable, n: usize) -> Result<SpinorBlock> {
    grid_quadrature(table, n, |e| e.adjoint() * *e)
}

/// `int ||E(x)||_F^2` by the same grid rule.
pub fn grid_norm(table: &SolutionTable, n: usize) -> Result<f64> {
    Ok(grid_u_e(table, n)?.trace().re)
}

/// `int E(x)^dagger A E(x)` for a constant matrix `A`.
pub fn grid_a_e(table: &SolutionTable, a: &SpinorBlock, n: usize) -> Result<SpinorBlock> {
    grid_quadrature(table, n, |e| e.adjoint() * *a * *e)
}

fn grid_quadrature(
    table: &SolutionTable,
    n: usize,
    integrand: impl Fn(&SpinorBlock) -> SpinorBlock + Sync,
) -> Result<SpinorBlock> {
    if n == 0 {
        return Err(Error::InvalidArgument("grid size must be positive".into()));
    }
    let max = table.max_abs_harmonic();
    // Per-axis factors exp(+-2 pi i n_k X_k) for every harmonic and grid node.
    let sign = [1.0, 1.0, 1.0, -1.0];
    let factors: Vec<Vec<Vec<C64>>> = (0..4)
        .map(|axis| {
            (0..n)
                .map(|g| {
                    let x = g as f64 / n as f64;
                    (-max[axis]..=max[axis])
                        .map(|h| C64::from_polar(1.0, sign[axis] * 2.0 * PI * h as f64 * x))
                        .collect()
                })
                .collect()
        })
        .collect();
    let blocks: Vec<([usize; 4], SpinorBlock)> = table
        .iter()
        .map(|(_, p, s)| {
            let off = [0, 1, 2, 3].map(|a| (p.0[a] + max[a]) as usize);
            (off, *s)
        })
        .collect();
    let cfg = &table.field;
    let nodes: Vec<usize> = (0..n.pow(4)).collect();
    let weight = 1.0 / nodes.len() as f64;

    let total = chunked_sum(&nodes, |&idx| {
        let g = [idx % n, (idx / n) % n, (idx / n / n) % n, idx / n / n / n];
        let x = g.map(|v| v as f64 / n as f64);
        let bloch = C64::from_polar(1.0, phase(cfg, &LatticePoint::ORIGIN, &x));
        let mut e = SpinorBlock::zero();
        for (off, s) in &blocks {
            let mut f = bloch;
            for a in 0..4 {
                f *= factors[a][g[a]][off[a]];
            }
            e += s.scale(f);
        }
        integrand(&e)
    });
    Ok(total.scale_real(weight))
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_eigenvalue(m: &SpinorBlock) -> f64 {
    hermitian_eigen(m).0[0]
}

/// Zero bispinor, for callers building amplitudes.
pub const ZERO_BISPINOR: Bispinor = [ZERO; 4];
