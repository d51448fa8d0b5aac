//! Channel diagnostics: the generalized correlation coefficient between two
//! devices' channel vectors and the condition number of the channel matrix.
//!
//! Covariances are evaluated analytically from the geometry; sample
//! covariances only appear in tests as an oracle.

use crate::channel::{pathloss_gain, ChannelParams, LinkTable, RicianFactor, ScaledIdentity, SpatialCovariance};
use crate::error::{Error, Result};
use crate::geometry::{link_between, Deployment, NetworkGeometry, Point3};
use crate::linalg::{eigenvalue_floor, extreme_singular_values, hermitian_psd_sqrt, trace, CMatrix};
use crate::scalar::Real;
use crate::stats::{self, Estimate};
use crate::streams::{check_index_range, Purpose, Streams};
use nalgebra::Complex;
use rand::Rng;
use rayon::prelude::*;
use std::sync::atomic::{AtomicBool, Ordering};

/// `C_1 = E[h_1 h_1ᴴ]`, `C_2 = E[h_2 h_2ᴴ]`, `C_12 = E[h_1 h_2ᴴ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair<T: Real> {
    pub c1: CMatrix<T>,
    pub c2: CMatrix<T>,
    pub c12: CMatrix<T>,
}

fn stacked_los<T: Real>(device: &Point3<T>, geometry: &NetworkGeometry<T>, params: &ChannelParams<T>) -> Result<crate::linalg::CVector<T>> {
    let s = geometry.antennas_per_ap();
    let mut v = crate::linalg::CVector::zeros(geometry.total_antennas());
    for (qq, ap) in geometry.aps().iter().enumerate() {
        let link = link_between(device, ap);
        let beta = pathloss_gain(link.distance_m, params)?;
        let los = crate::channel::los_vector(beta, link.azimuth_rad, s, params.antenna_spacing);
        v.rows_mut(qq * s, s).copy_from(&los);
    }
    Ok(v)
}

fn block_nlos<T: Real, C: SpatialCovariance<T> + ?Sized>(
    device: &Point3<T>,
    geometry: &NetworkGeometry<T>,
    params: &ChannelParams<T>,
    covariance: &C,
) -> Result<CMatrix<T>> {
    let s = geometry.antennas_per_ap();
    let m = geometry.total_antennas();
    let mut r = CMatrix::zeros(m, m);
    for (qq, ap) in geometry.aps().iter().enumerate() {
        let link = link_between(device, ap);
        let beta = pathloss_gain(link.distance_m, params)?;
        let block = covariance.covariance(beta, link.azimuth_rad, s).to_matrix(s);
        r.view_mut((qq * s, qq * s), (s, s)).copy_from(&block);
    }
    Ok(r)
}

/// Population covariances of two devices' stacked channels with `R = β·I_S`.
pub fn analytic_covariances<T: Real>(
    device_a: &Point3<T>,
    device_b: &Point3<T>,
    geometry: &NetworkGeometry<T>,
    params: &ChannelParams<T>,
) -> Result<CovariancePair<T>> {
    analytic_covariances_with(&ScaledIdentity, device_a, device_b, geometry, params)
}

/// As [`analytic_covariances`] with a caller-supplied NLoS covariance model.
///
/// NLoS parts of distinct devices are independent and zero-mean, so only the
/// LoS terms contribute to `C_12`.
pub fn analytic_covariances_with<T: Real, C: SpatialCovariance<T> + ?Sized>(
    covariance: &C,
    device_a: &Point3<T>,
    device_b: &Point3<T>,
    geometry: &NetworkGeometry<T>,
    params: &ChannelParams<T>,
) -> Result<CovariancePair<T>> {
    let (w_los, w_nlos) = params.rician.weights();
    let los_w = Complex::new(w_los * w_los, T::zero());
    let a = stacked_los(device_a, geometry, params)?;
    let b = stacked_los(device_b, geometry, params)?;
    let mut c1 = &a * a.adjoint() * los_w;
    let mut c2 = &b * b.adjoint() * los_w;
    let c12 = &a * b.adjoint() * los_w;
    if params.rician != RicianFactor::PureLos {
        let nlos_w = Complex::new(w_nlos * w_nlos, T::zero());
        c1 += block_nlos(device_a, geometry, params, covariance)? * nlos_w;
        c2 += block_nlos(device_b, geometry, params, covariance)? * nlos_w;
    }
    Ok(CovariancePair { c1, c2, c12 })
}

/// `Tr((C_1·C_2)^{1/2})`, via the similar Hermitian matrix `C_1^{1/2} C_2 C_1^{1/2}`.
pub fn trace_sqrt_product<T: Real>(c1: &CMatrix<T>, c2: &CMatrix<T>) -> T {
    let r1 = hermitian_psd_sqrt(c1);
    let mid = &r1 * c2 * &r1;
    // symmetrize before the Hermitian eigensolver
    let mid = (&mid + mid.adjoint()) * Complex::new(T::lit(0.5), T::zero());
    let eig = mid.symmetric_eigen().eigenvalues;
    let floor = eigenvalue_floor(eig.as_slice(), c1.nrows());
    eig.iter()
        .fold(T::zero(), |acc, &l| if l > floor { acc + l.sqrt() } else { acc })
}

static IMAGINARY_TRACE_WARNED: AtomicBool = AtomicBool::new(false);

/// `r = Re{Tr(C_12)} / Tr((C_1 C_2)^{1/2})`.
pub fn correlation_coefficient<T: Real>(pair: &CovariancePair<T>) -> Result<T> {
    let denom = trace_sqrt_product(&pair.c1, &pair.c2);
    if !(denom > T::zero()) {
        return Err(Error::Domain("correlation undefined for zero covariances".into()));
    }
    let tr = trace(&pair.c12);
    if tr.im.abs() > T::lit(1e-6) * tr.norm_sqr().sqrt() && !IMAGINARY_TRACE_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!(
            "cross-correlation trace has a non-negligible imaginary part ({:e}); using its real part",
            tr.im.as_f64()
        );
    }
    Ok(tr.re / denom)
}

/// Draws network layouts whose first two devices form a correlation pair.
pub trait GeometrySampler<T: Real>: Sync {
    fn sample(&self, rng: &mut dyn rand::RngCore) -> Result<NetworkGeometry<T>>;
}

/// Grid APs with two uniformly dropped devices.
#[derive(Debug, Clone, Copy)]
pub struct UniformPairs<T> {
    pub deployment: Deployment<T>,
    pub aps: usize,
    pub antennas_per_ap: usize,
}

impl<T: Real> GeometrySampler<T> for UniformPairs<T> {
    fn sample(&self, rng: &mut dyn rand::RngCore) -> Result<NetworkGeometry<T>> {
        NetworkGeometry::sample(&self.deployment, self.aps, self.antennas_per_ap, 2, rng)
    }
}

/// Mean of `|r|` over `n_pairs` independent device pairs. Pair `i` always
/// uses the same substream, so estimates at different κ share positions.
pub fn average_correlation<T: Real, G: GeometrySampler<T> + ?Sized>(
    sampler: &G,
    params: &ChannelParams<T>,
    n_pairs: usize,
    streams: &Streams,
) -> Result<Estimate<T>> {
    check_index_range("n_pairs", n_pairs as u64)?;
    params.validate()?;
    let values: Vec<T> = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.rng(Purpose::CorrelationPair, i as u64, 0);
            let g = sampler.sample(&mut rng)?;
            let devs = g.devices();
            if devs.len() < 2 {
                return Err(Error::Config("correlation sampler must yield two devices".into()));
            }
            let pair = analytic_covariances(&devs[0], &devs[1], &g, params)?;
            Ok(correlation_coefficient(&pair)?.abs())
        })
        .collect::<Result<_>>()?;
    Ok(stats::estimate(&values))
}

/// `σ_max/σ_min`, with its dB form `20·log10`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionNumber<T> {
    pub ratio: T,
    pub db: T,
}

/// Singular values closer to zero than this, relative to `σ_max`, count as a
/// rank deficiency (scaled by the larger dimension and machine epsilon).
fn rank_floor<T: Real>(sigma_max: T, dim: usize) -> T {
    let relative = T::epsilon() * T::from_usize_lossy(dim) * sigma_max;
    relative.max(T::lit(1e-300))
}

pub fn condition_number<T: Real>(matrix: &CMatrix<T>) -> Result<ConditionNumber<T>> {
    if matrix.is_empty() || matrix.iter().all(|z| z.norm_sqr() == T::zero()) {
        return Err(Error::Domain("condition number of a zero matrix".into()));
    }
    let (hi, lo) = extreme_singular_values(matrix);
    let dim = matrix.nrows().max(matrix.ncols());
    if lo <= rank_floor(hi, dim) {
        return Ok(ConditionNumber {
            ratio: T::infinity(),
            db: T::infinity(),
        });
    }
    let ratio = (hi / lo).max(T::one());
    Ok(ConditionNumber {
        ratio,
        db: T::lit(20.0) * ratio.log10(),
    })
}

/// How condition numbers are averaged over realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConditionAveraging {
    /// Average the dB values.
    #[default]
    Decibel,
    /// Average linear ratios, report the mean in dB.
    Linear,
}

/// One condition-number experiment point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSetup<T: Real> {
    pub deployment: Deployment<T>,
    pub params: ChannelParams<T>,
    pub aps: usize,
    pub antennas_per_ap: usize,
    pub devices: usize,
    pub n_net: usize,
    pub n_ch: usize,
    pub averaging: ConditionAveraging,
}

/// Mean condition number of the true channel matrix in dB over `n_net`
/// layouts × `n_ch` draws; the standard error is taken over per-layout means.
///
/// Devices and fading come from the same substreams as the spectral-efficiency
/// sweep, so both experiments see identical channels for a given seed.
pub fn mean_condition_number<T: Real>(setup: &ConditionSetup<T>, streams: &Streams) -> Result<Estimate<T>> {
    check_index_range("n_net", setup.n_net as u64)?;
    check_index_range("n_ch", setup.n_ch as u64)?;
    setup.params.validate()?;
    let per_net: Vec<T> = (0..setup.n_net)
        .into_par_iter()
        .map(|net| {
            let mut rng = streams.rng(Purpose::Devices, net as u64, 0);
            let g = NetworkGeometry::sample(&setup.deployment, setup.aps, setup.antennas_per_ap, setup.devices, &mut rng)?;
            let links = LinkTable::new(&g, &setup.params)?;
            let mut acc = T::zero();
            for ch in 0..setup.n_ch {
                let mut frng = streams.rng(Purpose::Fading, net as u64, ch as u64);
                let h = links.draw(setup.params.rician, &mut frng);
                let c = condition_number(&h)?;
                acc += match setup.averaging {
                    ConditionAveraging::Decibel => c.db,
                    ConditionAveraging::Linear => c.ratio,
                };
            }
            Ok(acc / T::from_usize_lossy(setup.n_ch))
        })
        .collect::<Result<_>>()?;
    let est = stats::estimate(&per_net);
    Ok(match setup.averaging {
        ConditionAveraging::Decibel => est,
        ConditionAveraging::Linear => {
            let to_db = T::lit(20.0) / T::ln_10();
            Estimate {
                mean: T::lit(20.0) * est.mean.log10(),
                std_error: est.std_error.map(|se| to_db * se / est.mean),
                samples: est.samples,
            }
        }
    })
}

/// Empirical second moments from samples, for checks against the analytic path.
pub fn empirical_covariance<T: Real, R: Rng + ?Sized>(
    links: &LinkTable<T>,
    rician: RicianFactor<T>,
    device: usize,
    draws: usize,
    rng: &mut R,
) -> CMatrix<T> {
    let m = links.total_antennas();
    let mut acc = CMatrix::zeros(m, m);
    for _ in 0..draws {
        let h = links.draw(rician, rng);
        let col = h.column(device);
        acc += &col * col.adjoint();
    }
    acc / Complex::new(T::from_usize_lossy(draws), T::zero())
}
