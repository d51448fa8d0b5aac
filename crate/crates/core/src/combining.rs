//! Linear receive combining (MRC, ZF, MMSE), per-user SINR and achievable SE.
//!
//! Combiners are built from the estimated channel `Ĥ`; the SINR is then
//! evaluated against the true channel `H`, so imperfect CSI shows up as
//! residual interference and signal mismatch.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;
use nalgebra::Complex;
use std::fmt;
use std::str::FromStr;

/// Smallest-to-largest singular value ratio below which ZF is refused.
pub const ZF_RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CombinerKind {
    Mrc,
    Zf,
    Mmse,
}

impl CombinerKind {
    pub const ALL: [CombinerKind; 3] = [CombinerKind::Mrc, CombinerKind::Zf, CombinerKind::Mmse];

    pub fn as_str(&self) -> &'static str {
        match self {
            CombinerKind::Mrc => "mrc",
            CombinerKind::Zf => "zf",
            CombinerKind::Mmse => "mmse",
        }
    }
}

impl fmt::Display for CombinerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CombinerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mrc" => Ok(CombinerKind::Mrc),
            "zf" => Ok(CombinerKind::Zf),
            "mmse" => Ok(CombinerKind::Mmse),
            other => Err(Error::Config(format!("unknown combiner '{other}'"))),
        }
    }
}

/// Build the combining matrix `V` (`M × K`) from the estimate.
///
/// * MRC: `Ĥ`
/// * ZF: `Ĥ(ĤᴴĤ)⁻¹`
/// * MMSE: `(ĤĤᴴ + (σ_n²/p)·I_M)⁻¹Ĥ`
///
/// ZF goes through a thin QR of `Ĥ`, MMSE through a Cholesky solve.
pub fn combiner_matrix<T: Real>(
    estimated: &CMatrix<T>,
    kind: CombinerKind,
    tx_power_w: T,
    noise_power_w: T,
) -> Result<CMatrix<T>> {
    let (m, k) = estimated.shape();
    if m == 0 || k == 0 {
        return Err(Error::Shape(format!("empty channel estimate {m}x{k}")));
    }
    match kind {
        CombinerKind::Mrc => Ok(estimated.clone()),
        CombinerKind::Zf => zero_forcing(estimated),
        CombinerKind::Mmse => {
            if !(tx_power_w > T::zero() && noise_power_w > T::zero()) {
                return Err(Error::Domain("MMSE needs positive power and noise".into()));
            }
            let reg = Complex::new(noise_power_w / tx_power_w, T::zero());
            let mut a = estimated * estimated.adjoint();
            for i in 0..m {
                a[(i, i)] += reg;
            }
            let chol = a
                .cholesky()
                .ok_or_else(|| Error::Singular("MMSE system is not positive definite".into()))?;
            Ok(chol.solve(estimated))
        }
    }
}

fn zero_forcing<T: Real>(estimated: &CMatrix<T>) -> Result<CMatrix<T>> {
    let (m, k) = estimated.shape();
    if m < k {
        return Err(Error::Singular(format!("ZF needs M >= K, got {m}x{k}")));
    }
    let (hi, lo) = crate::linalg::extreme_singular_values(estimated);
    if !(lo >= T::lit(ZF_RANK_TOLERANCE) * hi) || hi == T::zero() {
        return Err(Error::Singular(format!(
            "estimate is rank deficient (σ_min/σ_max = {:e})",
            lo / hi
        )));
    }
    // Ĥ = QR  =>  V = Ĥ(ĤᴴĤ)⁻¹ = Q·R⁻ᴴ, i.e. Vᴴ solves R·Vᴴ = Qᴴ
    let qr = estimated.clone().qr();
    let vh = qr
        .r()
        .solve_upper_triangular(&qr.q().adjoint())
        .ok_or_else(|| Error::Singular("triangular factor is singular".into()))?;
    Ok(vh.adjoint())
}

/// `γ_k = p|v_kᴴh_k|² / (p·Σ_{j≠k}|v_kᴴh_j|² + σ_n²‖v_k‖²)`.
pub fn sinr_per_user<T: Real>(
    true_matrix: &CMatrix<T>,
    combiner: &CMatrix<T>,
    tx_power_w: T,
    noise_power_w: T,
) -> Result<Vec<T>> {
    if true_matrix.shape() != combiner.shape() {
        return Err(Error::Shape(format!(
            "channel {:?} vs combiner {:?}",
            true_matrix.shape(),
            combiner.shape()
        )));
    }
    let k = true_matrix.ncols();
    let gains = combiner.ad_mul(true_matrix);
    let mut out = Vec::with_capacity(k);
    for user in 0..k {
        let v_norm_sq = combiner.column(user).norm_squared();
        if v_norm_sq == T::zero() {
            return Err(Error::Domain(format!("combiner column {user} is zero")));
        }
        let mut interference = T::zero();
        for other in 0..k {
            if other != user {
                interference += gains[(user, other)].norm_sqr();
            }
        }
        let signal = tx_power_w * gains[(user, user)].norm_sqr();
        out.push(signal / (tx_power_w * interference + noise_power_w * v_norm_sq));
    }
    Ok(out)
}

/// `log2(1 + γ)` per user.
pub fn se_from_sinr<T: Real>(sinr: &[T]) -> Result<Vec<T>> {
    sinr.iter()
        .map(|&g| {
            if g >= T::zero() {
                Ok((T::one() + g).log2())
            } else {
                Err(Error::Domain(format!("negative SINR {g}")))
            }
        })
        .collect()
}

/// Arithmetic mean over users.
pub fn mean_per_user_se<T: Real>(values: &[T]) -> Result<T> {
    if values.is_empty() {
        return Err(Error::Domain("mean over zero users".into()));
    }
    let sum = values.iter().fold(T::zero(), |a, &b| a + b);
    Ok(sum / T::from_usize_lossy(values.len()))
}

/// Per-user SINR and SE for one realization and combiner.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport<T> {
    pub combiner: CombinerKind,
    pub per_user_sinr: Vec<T>,
    pub per_user_se: Vec<T>,
}

impl<T: Real> SinrReport<T> {
    /// Combiner from `estimated`, SINR against `true_matrix`.
    pub fn evaluate(
        true_matrix: &CMatrix<T>,
        estimated: &CMatrix<T>,
        kind: CombinerKind,
        tx_power_w: T,
        noise_power_w: T,
    ) -> Result<Self> {
        let v = combiner_matrix(estimated, kind, tx_power_w, noise_power_w)?;
        let per_user_sinr = sinr_per_user(true_matrix, &v, tx_power_w, noise_power_w)?;
        let per_user_se = se_from_sinr(&per_user_sinr)?;
        Ok(Self {
            combiner: kind,
            per_user_sinr,
            per_user_se,
        })
    }

    pub fn mean_se(&self) -> T {
        mean_per_user_se(&self.per_user_se).unwrap_or_else(|_| T::zero())
    }
}
