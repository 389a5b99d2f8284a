//! Field configuration, Dirac matrices and the per-equation coupling blocks.
//!
//! The equation attached to site `n` reads
//!
//! ```text
//! D_n c(n) - sum_j [ (alpha . A_j) c(n - s_j) + (alpha . A_j^*) c(n + s_j) ] = 0
//! ```
//!
//! where `D_n = sum_k alpha_k (q_k + n_k Omega) - (q4 + n4 Omega) U + alpha_4`
//! and the real potential is
//! `A'(x) = sum_j [A_j e^{i phi_{s_j}(x)} + A_j^* e^{-i phi_{s_j}(x)}]`.
//! All quantities are dimensionless.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticePoint;
use crate::schedule::stencil_13;
use crate::spinor::{SpinorBlock, C64, I, ONE, ZERO};

/// The six upward shifts `s_1 .. s_6` of the field harmonics.
pub const SHIFTS: [LatticePoint; 6] = [
    LatticePoint::from_array_unchecked([1, 0, 0, 1]),
    LatticePoint::from_array_unchecked([0, 1, 0, 1]),
    LatticePoint::from_array_unchecked([0, 0, 1, 1]),
    LatticePoint::from_array_unchecked([-1, 0, 0, 1]),
    LatticePoint::from_array_unchecked([0, -1, 0, 1]),
    LatticePoint::from_array_unchecked([0, 0, -1, 1]),
];

/// Three standing waves, one along each spatial axis.
///
/// Wave `a` has complex amplitude `amplitudes[a]` and a real polarization
/// orthogonal to axis `a`. It contributes `amplitude/2 * e_pol` to both the
/// `+e_a` and `-e_a` harmonics, so its potential is
/// `|amplitude| e_pol cos(2 pi X_a) cos(2 pi X_4 - arg amplitude)` up to a factor 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandingWavePreset {
    pub amplitudes: [[f64; 2]; 3],
    #[serde(default)]
    pub polarizations: Option<[[f64; 3]; 3]>,
}

impl StandingWavePreset {
    pub const DEFAULT_POLARIZATIONS: [[f64; 3]; 3] =
        [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];

    pub fn amplitudes(&self) -> Result<[[C64; 3]; 6]> {
        let pols = self.polarizations.unwrap_or(Self::DEFAULT_POLARIZATIONS);
        let mut out = [[ZERO; 3]; 6];
        for axis in 0..3 {
            let pol = pols[axis];
            let norm = pol.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::Config(format!("polarization {axis} must be a nonzero vector")));
            }
            if (pol[axis] / norm).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "polarization {axis} must be orthogonal to its propagation axis"
                )));
            }
            let [re, im] = self.amplitudes[axis];
            let half = C64::new(re, im) * 0.5;
            for k in 0..3 {
                let comp = half * (pol[k] / norm);
                out[axis][k] = comp;
                out[axis + 3][k] = comp;
            }
        }
        Ok(out)
    }
}

/// Field amplitudes and dimensionless kinematic parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldConfigFile", into = "FieldConfigFile")]
pub struct FieldConfig {
    /// Complex amplitude vectors `A_1 .. A_6`, paired with `SHIFTS`.
    pub amplitudes: [[C64; 3]; 6],
    pub q: [f64; 3],
    pub q4: f64,
    pub omega: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FieldConfigFile {
    omega: f64,
    #[serde(default)]
    q: [f64; 3],
    #[serde(default)]
    q4: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitudes: Option<Vec<[[f64; 2]; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    standing_wave_preset: Option<StandingWavePreset>,
}

impl TryFrom<FieldConfigFile> for FieldConfig {
    type Error = Error;

    fn try_from(f: FieldConfigFile) -> Result<Self> {
        let amplitudes = match (f.amplitudes, f.standing_wave_preset) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `amplitudes` or `standing_wave_preset`, not both".into(),
                ))
            }
            (Some(raw), None) => {
                if raw.len() != 6 {
                    return Err(Error::Config(format!(
                        "`amplitudes` needs 6 entries, got {}",
                        raw.len()
                    )));
                }
                let mut a = [[ZERO; 3]; 6];
                for (j, vec) in raw.iter().enumerate() {
                    for k in 0..3 {
                        a[j][k] = C64::new(vec[k][0], vec[k][1]);
                    }
                }
                a
            }
            (None, Some(preset)) => preset.amplitudes()?,
            (None, None) => [[ZERO; 3]; 6],
        };
        let cfg = FieldConfig { amplitudes, q: f.q, q4: f.q4, omega: f.omega };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<FieldConfig> for FieldConfigFile {
    fn from(c: FieldConfig) -> Self {
        FieldConfigFile {
            omega: c.omega,
            q: c.q,
            q4: c.q4,
            amplitudes: Some(
                c.amplitudes
                    .iter()
                    .map(|v| v.map(|z| [z.re, z.im]))
                    .collect(),
            ),
            standing_wave_preset: None,
        }
    }
}

impl FieldConfig {
    pub fn free(q: [f64; 3], q4: f64, omega: f64) -> Result<Self> {
        let cfg = FieldConfig { amplitudes: [[ZERO; 3]; 6], q, q4, omega };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::Config(format!("omega must be positive, got {}", self.omega)));
        }
        let finite = self.q.iter().all(|x| x.is_finite())
            && self.q4.is_finite()
            && self.amplitudes.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(Error::Config("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("field config always serializes")
    }

    pub fn is_field_free(&self) -> bool {
        self.amplitudes.iter().flatten().all(|z| *z == ZERO)
    }

    pub fn with_q4(&self, q4: f64) -> Self {
        FieldConfig { q4, ..self.clone() }
    }
}

/// `alpha_1 .. alpha_3 = offdiag(sigma_k, sigma_k)` and `alpha_4 = diag(1, 1, -1, -1)`.
pub fn dirac_matrices() -> [SpinorBlock; 4] {
    let sigma = [
        [[ZERO, ONE], [ONE, ZERO]],
        [[ZERO, -I], [I, ZERO]],
        [[ONE, ZERO], [ZERO, -ONE]],
    ];
    let mut alphas = [SpinorBlock::zero(); 4];
    for (k, s) in sigma.iter().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                alphas[k].0[i][j + 2] = s[i][j];
                alphas[k].0[i + 2][j] = s[i][j];
            }
        }
    }
    alphas[3] = SpinorBlock::diagonal([1.0, 1.0, -1.0, -1.0]);
    alphas
}

/// `sum_k alpha_k v_k` for a complex 3-vector.
pub fn alpha_dot(v: &[C64; 3]) -> SpinorBlock {
    let alphas = dirac_matrices();
    let mut out = SpinorBlock::zero();
    for k in 0..3 {
        out += alphas[k].scale(v[k]);
    }
    out
}

/// The free Dirac block of harmonic `n`.
pub fn d_n(cfg: &FieldConfig, n: &LatticePoint) -> SpinorBlock {
    let alphas = dirac_matrices();
    let mut d = alphas[3];
    for k in 0..3 {
        d += alphas[k].scale_real(cfg.q[k] + n.0[k] as f64 * cfg.omega);
    }
    d - SpinorBlock::identity().scale_real(cfg.q4 + n.0[3] as f64 * cfg.omega)
}

/// Precomputed off-center blocks of the 13-point stencil for one field.
#[derive(Clone, Debug)]
pub struct CouplingStencil {
    cfg: FieldConfig,
    shifts: Vec<LatticePoint>,
    /// `V(n, s)` for every `s != 0` of the stencil, aligned with `shifts`; slot 0 unused.
    off_center: Vec<SpinorBlock>,
}

impl CouplingStencil {
    pub fn new(cfg: &FieldConfig) -> Self {
        let shifts = stencil_13();
        let off_center = shifts
            .iter()
            .map(|s| {
                if let Some(j) = SHIFTS.iter().position(|t| t == s) {
                    -alpha_dot(&cfg.amplitudes[j].map(|z| z.conj()))
                } else if let Some(j) = SHIFTS.iter().position(|t| -*t == *s) {
                    -alpha_dot(&cfg.amplitudes[j])
                } else {
                    SpinorBlock::zero()
                }
            })
            .collect();
        CouplingStencil { cfg: cfg.clone(), shifts, off_center }
    }

    pub fn config(&self) -> &FieldConfig {
        &self.cfg
    }

    pub fn shifts(&self) -> &[LatticePoint] {
        &self.shifts
    }

    /// `V(n, s)`: the block multiplying `c(n + s)` in the equation at `n`.
    pub fn block(&self, n: &LatticePoint, s: &LatticePoint) -> Result<SpinorBlock> {
        match self.shifts.iter().position(|t| t == s) {
            Some(0) => Ok(d_n(&self.cfg, n)),
            Some(i) => Ok(self.off_center[i]),
            None => Err(Error::ShiftOutsideStencil(*s)),
        }
    }

    /// All 13 `(s, V(n, s))` pairs of the equation at `n`, in stencil order.
    pub fn blocks(&self, n: &LatticePoint) -> Vec<(LatticePoint, SpinorBlock)> {
        self.shifts
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let b = if i == 0 { d_n(&self.cfg, n) } else { self.off_center[i] };
                (*s, b)
            })
            .collect()
    }
}

/// `V(n, s)` for a single shift.
pub fn coupling(cfg: &FieldConfig, n: &LatticePoint, s: &LatticePoint) -> Result<SpinorBlock> {
    CouplingStencil::new(cfg).block(n, s)
}

/// Harmonic-space pieces of the potential used by the quadrature of `U_D`.
#[derive(Clone, Debug)]
pub struct PotentialTerms {
    a1: BTreeMap<LatticePoint, SpinorBlock>,
    a2: BTreeMap<LatticePoint, C64>,
    amplitudes: [[C64; 3]; 6],
}

fn bilinear(a: &[C64; 3], b: &[C64; 3]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl PotentialTerms {
    pub fn new(cfg: &FieldConfig) -> Self {
        let a = cfg.amplitudes;
        let conj = a.map(|v| v.map(|z| z.conj()));

        let mut a1: BTreeMap<LatticePoint, SpinorBlock> = BTreeMap::new();
        for j in 0..6 {
            // n - m = -s_j carries A_j, n - m = +s_j carries A_j^*.
            *a1.entry(-SHIFTS[j]).or_default() += alpha_dot(&a[j]);
            *a1.entry(SHIFTS[j]).or_default() += alpha_dot(&conj[j]);
        }

        let mut a2: BTreeMap<LatticePoint, C64> = BTreeMap::new();
        for j in 0..6 {
            for l in 0..6 {
                let (sj, sl) = (SHIFTS[j], SHIFTS[l]);
                *a2.entry(-(sj + sl)).or_insert(ZERO) += bilinear(&a[j], &a[l]);
                *a2.entry(sl - sj).or_insert(ZERO) += bilinear(&a[j], &conj[l]);
                *a2.entry(sj - sl).or_insert(ZERO) += bilinear(&conj[j], &a[l]);
                *a2.entry(sj + sl).or_insert(ZERO) += bilinear(&conj[j], &conj[l]);
            }
        }
        a1.retain(|_, b| !b.is_zero());
        a2.retain(|_, z| *z != ZERO);
        PotentialTerms { a1, a2, amplitudes: a }
    }

    /// `A_1(m, n)`: the `D_A` matrix element between harmonics `m` and `n`.
    pub fn a1(&self, m: &LatticePoint, n: &LatticePoint) -> SpinorBlock {
        self.a1.get(&(*n - *m)).copied().unwrap_or_default()
    }

    /// `A_2(m, n)`: the `A' . A'` matrix element between harmonics `m` and `n`.
    pub fn a2(&self, m: &LatticePoint, n: &LatticePoint) -> C64 {
        self.a2.get(&(*n - *m)).copied().unwrap_or(ZERO)
    }

    /// Offsets `n - m` where `A_1` is nonzero.
    pub fn a1_offsets(&self) -> impl Iterator<Item = &LatticePoint> {
        self.a1.keys()
    }

    /// Offsets `n - m` where `A_2` is nonzero.
    pub fn a2_offsets(&self) -> impl Iterator<Item = &LatticePoint> {
        self.a2.keys()
    }

    /// The real potential `A'(x)` at dimensionless coordinates `x = (X1, X2, X3, X4)`.
    pub fn potential(&self, x: &[f64; 4]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (j, s) in SHIFTS.iter().enumerate() {
            let phase = 2.0
                * PI
                * (s.0[0] as f64 * x[0] + s.0[1] as f64 * x[1] + s.0[2] as f64 * x[2]
                    - s.0[3] as f64 * x[3]);
            let e = C64::from_polar(1.0, phase);
            for k in 0..3 {
                out[k] += 2.0 * (self.amplitudes[j][k] * e).re;
            }
        }
        out
    }
}
