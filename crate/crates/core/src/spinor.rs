//! 4x4 complex matrices and bispinors.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

/// A four-component complex column (one harmonic of a Dirac wave function).
pub type Bispinor = [C64; 4];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn bispinor_dot(a: &Bispinor, b: &Bispinor) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn bispinor_norm_sqr(a: &Bispinor) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Dense 4x4 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinorBlock(pub [[C64; 4]; 4]);

impl Default for SpinorBlock {
    fn default() -> Self {
        Self::zero()
    }
}

impl SpinorBlock {
    pub const fn zero() -> Self {
        SpinorBlock([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        Self::from_fn(|i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn from_real(rows: [[f64; 4]; 4]) -> Self {
        Self::from_fn(|i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diagonal(d: [f64; 4]) -> Self {
        Self::from_fn(|i, j| if i == j { C64::new(d[i], 0.0) } else { ZERO })
    }

    /// `u v^dagger`.
    pub fn outer(u: &Bispinor, v: &Bispinor) -> Self {
        Self::from_fn(|i, j| u[i] * v[j].conj())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }

    pub fn mul_vec(&self, v: &Bispinor) -> Bispinor {
        let mut out = [ZERO; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|j| self.0[i][j] * v[j]).sum();
        }
        out
    }

    /// `a^dagger M a`.
    pub fn quadratic_form(&self, a: &Bispinor) -> C64 {
        bispinor_dot(a, &self.mul_vec(a))
    }

    pub fn column(&self, j: usize) -> Bispinor {
        [self.0[0][j], self.0[1][j], self.0[2][j], self.0[3][j]]
    }

    pub fn row(&self, i: usize) -> Bispinor {
        self.0[i]
    }

    /// Frobenius norm of `M - M^dagger`.
    pub fn hermiticity_defect(&self) -> f64 {
        (*self - self.adjoint()).frobenius_norm()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(|z| *z == ZERO)
    }

    /// Row-major interleaved `(re, im)` pairs, 32 reals.
    pub fn to_reals(&self) -> [f64; 32] {
        let mut out = [0.0; 32];
        for (k, z) in self.0.iter().flatten().enumerate() {
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
        out
    }

    pub fn from_reals(r: &[f64; 32]) -> Self {
        Self::from_fn(|i, j| {
            let k = 4 * i + j;
            C64::new(r[2 * k], r[2 * k + 1])
        })
    }
}

impl Index<(usize, usize)> for SpinorBlock {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for SpinorBlock {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Mul for SpinorBlock {
    type Output = SpinorBlock;
    fn mul(self, rhs: Self) -> Self {
        let mut out = SpinorBlock::zero();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..4 {
                    out.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        out
    }
}

impl Add for SpinorBlock {
    type Output = SpinorBlock;
    fn add(self, rhs: Self) -> Self {
        SpinorBlock::from_fn(|i, j| self.0[i][j] + rhs.0[i][j])
    }
}

impl AddAssign for SpinorBlock {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..4 {
            for j in 0..4 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl Sub for SpinorBlock {
    type Output = SpinorBlock;
    fn sub(self, rhs: Self) -> Self {
        SpinorBlock::from_fn(|i, j| self.0[i][j] - rhs.0[i][j])
    }
}

impl SubAssign for SpinorBlock {
    fn sub_assign(&mut self, rhs: Self) {
        for i in 0..4 {
            for j in 0..4 {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
    }
}

impl Neg for SpinorBlock {
    type Output = SpinorBlock;
    fn neg(self) -> Self {
        SpinorBlock::from_fn(|i, j| -self.0[i][j])
    }
}

/// Eigen-decomposition of a Hermitian 4x4 matrix by cyclic complex Jacobi sweeps.
///
/// Returns eigenvalues in ascending order and the unitary matrix whose columns
/// are the matching eigenvectors. Only the Hermitian part of `m` is used.
pub fn hermitian_eigen(m: &SpinorBlock) -> ([f64; 4], SpinorBlock) {
    let mut a = (*m + m.adjoint()).scale_real(0.5);
    let mut v = SpinorBlock::identity();
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.0[i][j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-17 * scale {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                let apq = a.0[p][q];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                // Phase out a_pq so the 2x2 pivot block is real symmetric,
                // then apply the classical real rotation.
                let phase = apq / mag;
                let tau = (a.0[q][q].re - a.0[p][p].re) / (2.0 * mag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                let mut g = SpinorBlock::identity();
                g.0[p][p] = C64::new(c, 0.0);
                g.0[p][q] = C64::new(s, 0.0);
                g.0[q][p] = -phase.conj() * s;
                g.0[q][q] = phase.conj() * c;
                a = g.adjoint() * a * g;
                a.0[p][q] = ZERO;
                a.0[q][p] = ZERO;
                v = v * g;
            }
        }
    }

    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| a.0[i][i].re.total_cmp(&a.0[j][j].re));
    let values = order.map(|i| a.0[i][i].re);
    let vectors = SpinorBlock::from_fn(|i, j| v.0[i][order[j]]);
    (values, vectors)
}
