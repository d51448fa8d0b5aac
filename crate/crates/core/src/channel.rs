//! Rician channel synthesis, log-distance path loss and the statistical
//! CSI-error model.
//!
//! Each device/AP link is
//!
//! ```text
//! h = sqrt(κ/(1+κ)) · h_los + sqrt(1/(1+κ)) · h_nlos,   h_nlos ~ CN(0, R)
//! h_los[m] = sqrt(β) · exp(-j·2π·m·Δ·sin φ)
//! ```
//!
//! The shipped NLoS covariance is `R = β·I_S`, so that the LoS/NLoS power
//! ratio equals κ for every link and `E‖h‖² = S·β` regardless of κ. Other
//! covariance models plug in through [`SpatialCovariance`].
//!
//! Complex Gaussian entries are drawn as two independent real normals, each
//! carrying half the variance. NLoS entries are consumed device by device,
//! AP by AP, antenna by antenna, so the same random stream yields the same
//! fading sequence for every `(Q, S)` split of a fixed `M`.

use crate::error::{Error, Result};
use crate::geometry::{link_between, NetworkGeometry};
use crate::linalg::{hermitian_psd_sqrt, CMatrix, CVector};
use crate::scalar::{complex_normal, db_to_linear, Real};
use nalgebra::{Complex, DMatrix};
use rand::Rng;

/// Speed of light used for the wavelength, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 2.998e8;

/// Rician factor in linear scale, or the pure line-of-sight limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RicianFactor<T> {
    Linear(T),
    PureLos,
}

impl<T: Real> RicianFactor<T> {
    pub fn from_db(db: T) -> Self {
        RicianFactor::Linear(db_to_linear(db))
    }

    /// `(sqrt(κ/(1+κ)), sqrt(1/(1+κ)))`.
    pub fn weights(&self) -> (T, T) {
        match *self {
            RicianFactor::Linear(k) => {
                let denom = T::one() + k;
                ((k / denom).sqrt(), (T::one() / denom).sqrt())
            }
            RicianFactor::PureLos => (T::one(), T::zero()),
        }
    }

    /// Fraction of the link power carried by the LoS part.
    pub fn los_share(&self) -> T {
        let (w, _) = self.weights();
        w * w
    }

    pub fn is_pure_nlos(&self) -> bool {
        matches!(*self, RicianFactor::Linear(k) if k == T::zero())
    }
}

/// How the receiver's channel knowledge is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsiMode {
    /// `Ĥ = H + E`, `E` i.i.d. `CN(0, 1/(K·ρ))`.
    #[default]
    Modeled,
    /// `Ĥ = H`.
    Perfect,
}

/// Physical constants and channel-model knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams<T> {
    pub rician: RicianFactor<T>,
    /// Inter-element spacing in wavelengths.
    pub antenna_spacing: T,
    pub pathloss_exponent: T,
    pub reference_distance_m: T,
    pub carrier_hz: T,
    pub tx_power_w: T,
    pub noise_psd_w_per_hz: T,
    pub bandwidth_hz: T,
    pub noise_figure_linear: T,
    pub csi: CsiMode,
}

impl<T: Real> Default for ChannelParams<T> {
    fn default() -> Self {
        Self {
            rician: RicianFactor::Linear(T::one()),
            antenna_spacing: T::lit(0.5),
            pathloss_exponent: T::lit(2.0),
            reference_distance_m: T::one(),
            carrier_hz: T::lit(3.5e9),
            tx_power_w: T::lit(0.1),
            noise_psd_w_per_hz: T::lit(4e-21),
            bandwidth_hz: T::lit(2e7),
            noise_figure_linear: db_to_linear(T::lit(9.0)),
            csi: CsiMode::Modeled,
        }
    }
}

impl<T: Real> ChannelParams<T> {
    pub fn with_rician(mut self, rician: RicianFactor<T>) -> Self {
        self.rician = rician;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T, name: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if let RicianFactor::Linear(k) = self.rician {
            if !(k >= T::zero()) || !k.is_finite() {
                return Err(Error::Config(format!("Rician factor must be >= 0, got {k}")));
            }
        }
        positive(self.antenna_spacing, "antenna spacing")?;
        positive(self.reference_distance_m, "reference distance")?;
        positive(self.carrier_hz, "carrier frequency")?;
        positive(self.tx_power_w, "transmit power")?;
        positive(self.noise_psd_w_per_hz, "noise PSD")?;
        positive(self.bandwidth_hz, "bandwidth")?;
        positive(self.noise_figure_linear, "noise figure")?;
        if !self.pathloss_exponent.is_finite() {
            return Err(Error::Config("path-loss exponent must be finite".into()));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> T {
        T::lit(SPEED_OF_LIGHT_M_S) / self.carrier_hz
    }

    /// `σ_n² = N0·B·N_F`, watts.
    pub fn noise_power_w(&self) -> T {
        self.noise_psd_w_per_hz * self.bandwidth_hz * self.noise_figure_linear
    }

    /// Transmit SNR `ρ = p/σ_n²`.
    pub fn snr(&self) -> T {
        self.tx_power_w / self.noise_power_w()
    }

    /// Per-entry CSI error variance for `k` devices; zero under perfect CSI.
    pub fn csi_error_variance(&self, k: usize) -> T {
        match self.csi {
            CsiMode::Perfect => T::zero(),
            CsiMode::Modeled => T::one() / (T::from_usize_lossy(k) * self.snr()),
        }
    }

    pub fn reference_loss_db(&self) -> T {
        reference_loss_db(self)
    }

    pub fn pathloss_gain(&self, distance_m: T) -> Result<T> {
        pathloss_gain(distance_m, self)
    }
}

/// Free-space loss at the reference distance, `20·log10(4π·d0/λ)`.
pub fn reference_loss_db<T: Real>(params: &ChannelParams<T>) -> T {
    let arg = T::lit(4.0) * T::pi() * params.reference_distance_m / params.wavelength_m();
    T::lit(20.0) * arg.log10()
}

/// Linear large-scale gain `β` from the log-distance model. Distances below
/// the reference distance are clamped to it.
pub fn pathloss_gain<T: Real>(distance_m: T, params: &ChannelParams<T>) -> Result<T> {
    if !(distance_m > T::zero()) {
        return Err(Error::Domain(format!("distance must be positive, got {distance_m}")));
    }
    let d = distance_m.max(params.reference_distance_m);
    let beta_db = -reference_loss_db(params)
        - T::lit(10.0) * params.pathloss_exponent * (d / params.reference_distance_m).log10();
    Ok(db_to_linear(beta_db))
}

/// ULA steering vector scaled by `sqrt(β)`.
pub fn los_vector<T: Real>(beta: T, azimuth_rad: T, s: usize, spacing: T) -> CVector<T> {
    let amp = beta.sqrt();
    let step = -T::two_pi() * spacing * azimuth_rad.sin();
    CVector::from_fn(s, |m, _| {
        let phase = step * T::from_usize_lossy(m);
        Complex::new(amp * phase.cos(), amp * phase.sin())
    })
}

/// NLoS covariance of a single `S`-element link.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance<T: Real> {
    /// `c·I_S`.
    ScaledIdentity(T),
    /// Arbitrary Hermitian PSD matrix.
    Full(CMatrix<T>),
}

impl<T: Real> Covariance<T> {
    pub fn to_matrix(&self, s: usize) -> CMatrix<T> {
        match self {
            Covariance::ScaledIdentity(c) => {
                CMatrix::from_diagonal_element(s, s, Complex::new(*c, T::zero()))
            }
            Covariance::Full(m) => m.clone(),
        }
    }

    fn factor(&self) -> NlosFactor<T> {
        match self {
            Covariance::ScaledIdentity(c) => NlosFactor::Scalar(c.max(T::zero()).sqrt()),
            Covariance::Full(m) => NlosFactor::Matrix(hermitian_psd_sqrt(m)),
        }
    }
}

/// Factory for per-link NLoS covariance matrices.
pub trait SpatialCovariance<T: Real>: Send + Sync {
    fn covariance(&self, beta: T, azimuth_rad: T, antennas: usize) -> Covariance<T>;
}

/// `R = β·I_S`, uncorrelated fading at the link's path-loss level.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScaledIdentity;

impl<T: Real> SpatialCovariance<T> for ScaledIdentity {
    fn covariance(&self, beta: T, _azimuth_rad: T, _antennas: usize) -> Covariance<T> {
        Covariance::ScaledIdentity(beta)
    }
}

#[derive(Debug, Clone)]
enum NlosFactor<T: Real> {
    Scalar(T),
    Matrix(CMatrix<T>),
}

/// Draws `S` unit-variance complex normals and colors them by the factor.
fn draw_nlos<T: Real, R: Rng + ?Sized>(factor: &NlosFactor<T>, s: usize, rng: &mut R) -> CVector<T> {
    let z = CVector::from_fn(s, |_, _| complex_normal(rng, T::one()));
    match factor {
        NlosFactor::Scalar(a) => z * Complex::new(*a, T::zero()),
        NlosFactor::Matrix(l) => l * z,
    }
}

/// One Rician link draw with `R = β·I_S`.
pub fn draw_channel_vector<T: Real, R: Rng + ?Sized>(
    beta: T,
    azimuth_rad: T,
    params: &ChannelParams<T>,
    s: usize,
    rng: &mut R,
) -> CVector<T> {
    draw_channel_vector_with(&ScaledIdentity, beta, azimuth_rad, params, s, rng)
}

/// One Rician link draw with a caller-supplied NLoS covariance model.
pub fn draw_channel_vector_with<T: Real, R: Rng + ?Sized, C: SpatialCovariance<T> + ?Sized>(
    covariance: &C,
    beta: T,
    azimuth_rad: T,
    params: &ChannelParams<T>,
    s: usize,
    rng: &mut R,
) -> CVector<T> {
    let (w_los, w_nlos) = params.rician.weights();
    let los = los_vector(beta, azimuth_rad, s, params.antenna_spacing);
    if params.rician == RicianFactor::PureLos {
        return los;
    }
    let nlos = draw_nlos(&covariance.covariance(beta, azimuth_rad, s).factor(), s, rng);
    los * Complex::new(w_los, T::zero()) + nlos * Complex::new(w_nlos, T::zero())
}

/// Large-scale quantities of every link in one network realization.
///
/// Built once per geometry; each channel draw then only samples the NLoS part.
#[derive(Debug, Clone)]
pub struct LinkTable<T: Real> {
    /// `β_kq`, `Q × K`.
    gains: DMatrix<T>,
    azimuths: DMatrix<T>,
    /// Stacked LoS vectors, `M × K`, unweighted by κ.
    los: CMatrix<T>,
    factors: Vec<NlosFactor<T>>,
    antennas_per_ap: usize,
}

impl<T: Real> LinkTable<T> {
    pub fn new(geometry: &NetworkGeometry<T>, params: &ChannelParams<T>) -> Result<Self> {
        Self::with_covariance(geometry, params, &ScaledIdentity)
    }

    pub fn with_covariance<C: SpatialCovariance<T> + ?Sized>(
        geometry: &NetworkGeometry<T>,
        params: &ChannelParams<T>,
        covariance: &C,
    ) -> Result<Self> {
        params.validate()?;
        let q = geometry.num_aps();
        let k = geometry.num_devices();
        let s = geometry.antennas_per_ap();
        let mut gains = DMatrix::zeros(q, k);
        let mut azimuths = DMatrix::zeros(q, k);
        let mut los = CMatrix::zeros(q * s, k);
        let mut factors = Vec::with_capacity(q * k);
        for (kk, dev) in geometry.devices().iter().enumerate() {
            for (qq, ap) in geometry.aps().iter().enumerate() {
                let link = link_between(dev, ap);
                let beta = pathloss_gain(link.distance_m, params)?;
                gains[(qq, kk)] = beta;
                azimuths[(qq, kk)] = link.azimuth_rad;
                let v = los_vector(beta, link.azimuth_rad, s, params.antenna_spacing);
                los.view_mut((qq * s, kk), (s, 1)).copy_from(&v);
                factors.push(covariance.covariance(beta, link.azimuth_rad, s).factor());
            }
        }
        Ok(Self {
            gains,
            azimuths,
            los,
            factors,
            antennas_per_ap: s,
        })
    }

    pub fn gains(&self) -> &DMatrix<T> {
        &self.gains
    }

    pub fn azimuths(&self) -> &DMatrix<T> {
        &self.azimuths
    }

    /// Stacked LoS matrix without the κ weight.
    pub fn los_matrix(&self) -> &CMatrix<T> {
        &self.los
    }

    pub fn total_antennas(&self) -> usize {
        self.los.nrows()
    }

    pub fn num_devices(&self) -> usize {
        self.los.ncols()
    }

    /// One draw of the true channel matrix `H`.
    pub fn draw<R: Rng + ?Sized>(&self, rician: RicianFactor<T>, rng: &mut R) -> CMatrix<T> {
        let (w_los, w_nlos) = rician.weights();
        let mut h = &self.los * Complex::new(w_los, T::zero());
        if rician == RicianFactor::PureLos {
            return h;
        }
        let s = self.antennas_per_ap;
        let q = self.gains.nrows();
        let wn = Complex::new(w_nlos, T::zero());
        for kk in 0..self.num_devices() {
            for qq in 0..q {
                let nlos = draw_nlos(&self.factors[kk * q + qq], s, rng);
                for m in 0..s {
                    h[(qq * s + m, kk)] += nlos[m] * wn;
                }
            }
        }
        h
    }
}

/// True channel plus the receiver's estimate for one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T: Real> {
    pub true_matrix: CMatrix<T>,
    pub estimated_matrix: CMatrix<T>,
    /// `β_kq`, `Q × K`.
    pub gains: DMatrix<T>,
}

/// Draw `H` for the geometry. The returned realization carries `Ĥ = H`; apply
/// [`corrupt_csi`] (or [`ChannelRealization::with_csi_error`]) for imperfect CSI.
pub fn assemble_channel_matrix<T: Real, R: Rng + ?Sized>(
    geometry: &NetworkGeometry<T>,
    params: &ChannelParams<T>,
    rng: &mut R,
) -> Result<ChannelRealization<T>> {
    let links = LinkTable::new(geometry, params)?;
    let h = links.draw(params.rician, rng);
    Ok(ChannelRealization {
        estimated_matrix: h.clone(),
        true_matrix: h,
        gains: links.gains,
    })
}

/// `Ĥ = H + E` with `E` i.i.d. `CN(0, σ_csi²)`, `σ_csi² = 1/(K·ρ)`.
pub fn corrupt_csi<T: Real, R: Rng + ?Sized>(
    true_matrix: &CMatrix<T>,
    params: &ChannelParams<T>,
    k: usize,
    rng: &mut R,
) -> Result<CMatrix<T>> {
    if k == 0 {
        return Err(Error::Config("number of devices must be positive".into()));
    }
    let var = params.csi_error_variance(k);
    if var == T::zero() {
        return Ok(true_matrix.clone());
    }
    if !(params.snr() > T::zero()) {
        return Err(Error::Domain("SNR must be positive".into()));
    }
    let mut est = true_matrix.clone();
    // column-major, same order as the channel draw
    for z in est.iter_mut() {
        *z += complex_normal(rng, var);
    }
    Ok(est)
}

impl<T: Real> ChannelRealization<T> {
    pub fn with_csi_error<R: Rng + ?Sized>(mut self, params: &ChannelParams<T>, rng: &mut R) -> Result<Self> {
        let k = self.true_matrix.ncols();
        self.estimated_matrix = corrupt_csi(&self.true_matrix, params, k, rng)?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{place_aps, Deployment, Point3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> ChannelParams<f64> {
        ChannelParams::default()
    }

    #[test]
    fn reference_loss_at_3p5_ghz() {
        // hand evaluation: 20·log10(4π·3.5e9/2.998e8) = 20·log10(146.7048...) = 43.3292
        let l0 = reference_loss_db(&params());
        assert!((l0 - 43.3292).abs() < 1e-3, "L0 = {l0}");
    }

    #[test]
    fn reference_loss_zero_when_d0_is_lambda_over_4pi() {
        let mut p = params();
        p.reference_distance_m = p.wavelength_m() / (4.0 * std::f64::consts::PI);
        assert!(reference_loss_db(&p).abs() < 1e-12);
    }

    #[test]
    fn doubling_d0_adds_6db() {
        let mut p = params();
        let a = reference_loss_db(&p);
        p.reference_distance_m *= 2.0;
        let b = reference_loss_db(&p);
        assert!((b - a - 20.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn gain_at_reference_and_50m() {
        let p = params();
        let l0 = reference_loss_db(&p);
        let at_d0 = 10.0 * pathloss_gain(1.0, &p).unwrap().log10();
        assert!((at_d0 + l0).abs() < 1e-12);
        let at_50 = 10.0 * pathloss_gain(50.0, &p).unwrap().log10();
        assert!((at_50 - (-43.3292 - 20.0 * 50f64.log10())).abs() < 1e-3);
        assert!((at_50 + 77.30).abs() < 0.01);
    }

    #[test]
    fn decade_costs_20db_at_exponent_2() {
        let p = params();
        let a = pathloss_gain(7.0, &p).unwrap();
        let b = pathloss_gain(70.0, &p).unwrap();
        assert!((10.0 * (a / b).log10() - 20.0).abs() < 1e-10);
    }

    #[test]
    fn sub_reference_distance_clamps() {
        let p = params();
        assert_eq!(pathloss_gain(0.5, &p).unwrap(), pathloss_gain(1.0, &p).unwrap());
        assert!(pathloss_gain(0.0, &p).is_err());
        assert!(pathloss_gain(-3.0, &p).is_err());
    }

    #[test]
    fn noise_budget_table_values() {
        let p = params();
        // 4e-21 · 2e7 · 10^0.9
        assert!((p.noise_power_w() / 6.3546e-13 - 1.0).abs() < 1e-4);
        assert!((p.snr() / 1.5737e11 - 1.0).abs() < 1e-4);
        // 1/(16·ρ)
        assert!((p.csi_error_variance(16) / 3.9716e-13 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn los_vector_broadside_is_flat() {
        let v = los_vector(4.0_f64, 0.0, 5, 0.5);
        for z in v.iter() {
            assert!((z.re - 2.0).abs() < 1e-15 && z.im.abs() < 1e-15);
        }
    }

    #[test]
    fn los_vector_endfire_alternates() {
        let v = los_vector(1.0, std::f64::consts::FRAC_PI_2, 4, 0.5);
        let expected = [1.0, -1.0, 1.0, -1.0];
        for (z, e) in v.iter().zip(expected) {
            assert!((z.re - e).abs() < 1e-12 && z.im.abs() < 1e-12);
        }
    }

    #[test]
    fn pure_los_draw_is_deterministic() {
        let p = params().with_rician(RicianFactor::PureLos);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = draw_channel_vector(2e-7, 0.3, &p, 8, &mut rng);
        assert_eq!(h, los_vector(2e-7, 0.3, 8, 0.5));
    }

    #[test]
    fn rayleigh_draw_has_zero_mean() {
        let p = params().with_rician(RicianFactor::Linear(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut sum = CVector::<f64>::zeros(2);
        for _ in 0..n {
            sum += draw_channel_vector(1.0, 0.7, &p, 2, &mut rng);
        }
        // per-component std error of the mean is sqrt(1/2 / n)
        let se = (0.5 / n as f64).sqrt();
        for z in (sum / Complex::new(n as f64, 0.0)).iter() {
            assert!(z.re.abs() < 3.0 * se && z.im.abs() < 3.0 * se, "{z}");
        }
    }

    #[test]
    fn power_normalization_holds_for_any_kappa() {
        let beta = 3e-7;
        let s = 4;
        for (i, k) in [0.0, 0.1, 1.0, 10.0, 1000.0].into_iter().enumerate() {
            let p = params().with_rician(RicianFactor::Linear(k));
            let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
            let n = 100_000;
            let e: f64 = (0..n)
                .map(|_| draw_channel_vector(beta, -1.1, &p, s, &mut rng).norm_squared())
                .sum::<f64>()
                / n as f64;
            let ratio = e / (s as f64 * beta);
            assert!((ratio - 1.0).abs() < 0.02, "κ={k}: ratio {ratio}");
        }
    }

    #[test]
    fn los_share_is_kappa_over_one_plus_kappa() {
        for k in [0.0_f64, 0.5, 3.0, 100.0] {
            let r = RicianFactor::Linear(k);
            let (wl, wn) = r.weights();
            assert!((r.los_share() - k / (1.0 + k)).abs() < 1e-15);
            assert!((wl * wl + wn * wn - 1.0).abs() < 1e-15);
            // deterministic part's norm carries exactly that share
            let los = los_vector(2.0, 0.4, 6, 0.5) * Complex::new(wl, 0.0);
            assert!((los.norm_squared() - 12.0 * k / (1.0 + k)).abs() < 1e-12);
        }
        assert_eq!(RicianFactor::<f64>::PureLos.weights(), (1.0, 0.0));
    }

    fn fixed_geometry(devices: Vec<Point3<f64>>, q: usize, s: usize) -> NetworkGeometry<f64> {
        let d = Deployment::default();
        NetworkGeometry::new(&d, place_aps(q, &d).unwrap(), devices, s).unwrap()
    }

    #[test]
    fn single_link_matrix_matches_vector_draw() {
        let dev = Point3::new(20.0, 70.0, 1.5);
        let g = fixed_geometry(vec![dev], 1, 4);
        let p = params();
        let real = assemble_channel_matrix(&g, &p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let link = crate::geometry::link_geometry(&dev, 0, &g).unwrap();
        let beta = pathloss_gain(link.distance_m, &p).unwrap();
        let v = draw_channel_vector(beta, link.azimuth_rad, &p, 4, &mut ChaCha8Rng::seed_from_u64(9));
        let diff = (real.true_matrix.column(0) - v).norm();
        assert!(diff < 1e-18, "diff {diff}");
        assert_eq!(real.true_matrix, real.estimated_matrix);
    }

    #[test]
    fn table_shape_is_16_by_16() {
        let d = Deployment::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = NetworkGeometry::sample(&d, 4, 4, 16, &mut rng).unwrap();
        let r = assemble_channel_matrix(&g, &params(), &mut rng).unwrap();
        assert_eq!(r.true_matrix.shape(), (16, 16));
        assert_eq!(r.gains.shape(), (4, 16));
    }

    #[test]
    fn colocated_devices_identical_under_pure_los() {
        let dev = Point3::new(33.0, 12.0, 1.5);
        let g = fixed_geometry(vec![dev, dev], 4, 2);
        let p = params().with_rician(RicianFactor::PureLos);
        let r = assemble_channel_matrix(&g, &p, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.true_matrix.column(0), r.true_matrix.column(1));
    }

    #[test]
    fn perfect_csi_is_bitwise_copy() {
        let mut p = params();
        p.csi = CsiMode::Perfect;
        let h = crate::linalg::testing::random_matrix(4, 3, &mut ChaCha8Rng::seed_from_u64(1));
        let est = corrupt_csi(&h, &p, 3, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(est, h);
    }

    #[test]
    fn csi_error_variance_and_independence() {
        let p = params();
        let var = p.csi_error_variance(16);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let h = crate::linalg::testing::random_matrix(10, 10, &mut rng) * Complex::new(1e-4, 0.0);
        let mut sum_sq = 0.0;
        let mut cross = Complex::new(0.0, 0.0);
        let mut n = 0usize;
        while n < 100_000 {
            let est = corrupt_csi(&h, &p, 16, &mut rng).unwrap();
            for (e, t) in est.iter().zip(h.iter()) {
                let err = e - t;
                sum_sq += err.norm_sqr();
                cross += t.conj() * err;
                n += 1;
            }
        }
        let empirical = sum_sq / n as f64;
        assert!((empirical / var - 1.0).abs() < 0.02, "{empirical} vs {var}");
        // normalized correlation between H entries and errors
        let h_pow = h.iter().map(|z| z.norm_sqr()).sum::<f64>() / h.len() as f64;
        let corr = cross.norm() / n as f64 / (h_pow * var).sqrt();
        assert!(corr < 3.0 / (n as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn nlos_draws_of_distinct_devices_uncorrelated() {
        let g = fixed_geometry(vec![Point3::new(10.0, 10.0, 1.5), Point3::new(90.0, 80.0, 1.5)], 1, 2);
        let p = params().with_rician(RicianFactor::Linear(0.0));
        let links = LinkTable::new(&g, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let mut cross = Complex::new(0.0, 0.0);
        for _ in 0..n {
            let h = links.draw(p.rician, &mut rng);
            cross += h[(0, 0)] * h[(0, 1)].conj();
        }
        let b0 = links.gains()[(0, 0)];
        let b1 = links.gains()[(0, 1)];
        let corr = cross.norm() / n as f64 / (b0 * b1).sqrt();
        assert!(corr < 3.0 / (n as f64).sqrt() * 1.5, "corr {corr}");
    }

    #[test]
    fn full_covariance_hook_is_used() {
        struct Rank1;
        impl SpatialCovariance<f64> for Rank1 {
            fn covariance(&self, beta: f64, _az: f64, s: usize) -> Covariance<f64> {
                Covariance::Full(CMatrix::from_element(s, s, Complex::new(beta, 0.0)))
            }
        }
        let p = params().with_rician(RicianFactor::Linear(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = draw_channel_vector_with(&Rank1, 1.0, 0.0, &p, 3, &mut rng);
        // rank-one all-ones covariance: all entries equal
        assert!((v[0] - v[1]).norm() < 1e-12 && (v[1] - v[2]).norm() < 1e-12);
        assert!(v[0].norm() > 0.0);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = params();
        p.carrier_hz = 0.0;
        assert!(p.validate().is_err());
        let p2 = params().with_rician(RicianFactor::Linear(-1.0));
        assert!(p2.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn los_entries_have_modulus_sqrt_beta(beta in 1e-12f64..1.0, az in -3.14f64..3.14, s in 1usize..33, delta in 0.1f64..2.0) {
            let v = los_vector(beta, az, s, delta);
            let sq = beta.sqrt();
            for z in v.iter() {
                proptest::prop_assert!((z.norm() - sq).abs() <= 1e-12 * sq);
            }
            proptest::prop_assert!((v.norm_squared() - s as f64 * beta).abs() <= 1e-12 * s as f64 * beta);
        }
    }
}
