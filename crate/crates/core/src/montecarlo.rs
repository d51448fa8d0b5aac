//! Two-level Monte Carlo engine: network realizations (device drops) ×
//! channel realizations, swept over the Rician factor, the `(Q, S)` split of
//! the antenna budget and the combiner.
//!
//! Random numbers follow a common-random-numbers discipline. Device positions
//! depend only on the network index, fading and CSI errors only on
//! `(network, channel)`; every split, combiner and κ of a sweep therefore sees
//! the same underlying draws. Each network realization is processed
//! independently and the reduction runs in index order, so results are a pure
//! function of the configuration and seed, whatever the worker count.

use crate::channel::{corrupt_csi, ChannelParams, ChannelRealization, LinkTable, RicianFactor};
use crate::combining::{CombinerKind, SinrReport};
use crate::error::{Error, Result};
use crate::geometry::{place_aps, place_devices, Deployment, NetworkGeometry, Point3};
use crate::scalar::Real;
use crate::stats;
use crate::streams::{check_index_range, Purpose, Streams};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

pub use crate::stats::confidence_halfwidth;

pub const DEFAULT_N_NET: usize = 200;
pub const DEFAULT_N_CH: usize = 100;

/// Rician factor as configured: a dB value or the pure-LoS limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaDb<T> {
    Db(T),
    PureLos,
}

impl<T: Real> KappaDb<T> {
    pub fn to_rician(self) -> RicianFactor<T> {
        match self {
            KappaDb::Db(db) => RicianFactor::from_db(db),
            KappaDb::PureLos => RicianFactor::PureLos,
        }
    }

    /// Finite values ascending, pure LoS last.
    pub fn sort_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (KappaDb::Db(a), KappaDb::Db(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
            (KappaDb::Db(_), KappaDb::PureLos) => Ordering::Less,
            (KappaDb::PureLos, KappaDb::Db(_)) => Ordering::Greater,
            (KappaDb::PureLos, KappaDb::PureLos) => Ordering::Equal,
        }
    }

    /// `−20, −15, …, 30` dB.
    pub fn default_grid() -> Vec<Self> {
        (-4..=6).map(|i| KappaDb::Db(T::lit(5.0 * i as f64))).collect()
    }
}

impl<T: Real> fmt::Display for KappaDb<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KappaDb::Db(v) => write!(f, "{v}"),
            KappaDb::PureLos => f.write_str("inf"),
        }
    }
}

impl<T: Real> FromStr for KappaDb<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "los" => Ok(KappaDb::PureLos),
            _ => t
                .parse::<T>()
                .ok()
                .filter(|v| v.is_finite())
                .map(KappaDb::Db)
                .ok_or_else(|| Error::Config(format!("invalid Rician factor '{t}' (dB or 'inf')"))),
        }
    }
}

/// `Q` APs with `S` antennas each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Split {
    pub aps: usize,
    pub antennas_per_ap: usize,
}

impl Split {
    /// Checked against the antenna budget `m`.
    pub fn new(q: usize, s: usize, m: usize) -> Result<Self> {
        if q == 0 || s == 0 || q.checked_mul(s) != Some(m) {
            return Err(Error::SplitMismatch { q, s, m });
        }
        Ok(Self {
            aps: q,
            antennas_per_ap: s,
        })
    }

    /// Every `(Q, M/Q)` with `Q | M`, by increasing `Q`.
    pub fn all_for(m: usize) -> Vec<Self> {
        (1..=m)
            .filter(|q| m % q == 0)
            .map(|q| Self {
                aps: q,
                antennas_per_ap: m / q,
            })
            .collect()
    }

    pub fn total_antennas(&self) -> usize {
        self.aps * self.antennas_per_ap
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.aps, self.antennas_per_ap)
    }
}

/// Full description of a spectral-efficiency sweep. The Rician factor inside
/// `params` is ignored; the grid sets it per point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig<T: Real> {
    pub deployment: Deployment<T>,
    pub params: ChannelParams<T>,
    pub total_antennas: usize,
    pub splits: Vec<Split>,
    pub devices: usize,
    pub kappa_grid: Vec<KappaDb<T>>,
    pub combiners: Vec<CombinerKind>,
    pub n_net: usize,
    pub n_ch: usize,
    /// First channel-realization index; lets separate runs cover disjoint draws.
    pub channel_offset: usize,
    pub seed: u64,
}

impl<T: Real> Default for SimulationConfig<T> {
    fn default() -> Self {
        Self {
            deployment: Deployment::default(),
            params: ChannelParams::default(),
            total_antennas: 16,
            splits: Split::all_for(16),
            devices: 16,
            kappa_grid: KappaDb::default_grid(),
            combiners: CombinerKind::ALL.to_vec(),
            n_net: DEFAULT_N_NET,
            n_ch: DEFAULT_N_CH,
            channel_offset: 0,
            seed: 0,
        }
    }
}

impl<T: Real> SimulationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.deployment.validate()?;
        self.params.validate()?;
        if self.total_antennas == 0 {
            return Err(Error::Config("total antennas must be positive".into()));
        }
        if self.devices == 0 {
            return Err(Error::Config("number of devices must be positive".into()));
        }
        if self.splits.is_empty() {
            return Err(Error::Config("split list is empty".into()));
        }
        for sp in &self.splits {
            Split::new(sp.aps, sp.antennas_per_ap, self.total_antennas)?;
        }
        if self.kappa_grid.is_empty() {
            return Err(Error::Config("Rician factor grid is empty".into()));
        }
        check_index_range("n_net", self.n_net as u64)?;
        check_index_range("n_ch", self.n_ch as u64)?;
        check_index_range("channel_offset + n_ch", (self.channel_offset + self.n_ch) as u64)?;
        Ok(())
    }

    fn streams(&self) -> Streams {
        Streams::new(self.seed)
    }
}

/// Aggregate for one `(κ, split, combiner)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<T> {
    pub kappa: KappaDb<T>,
    pub split: Split,
    pub combiner: CombinerKind,
    /// Mean over network realizations of the per-network mean per-user SE.
    pub mean_se: T,
    /// Standard error across per-network means; `None` with fewer than two.
    pub se_std_error: Option<T>,
    /// `R_k` per device index, averaged over network realizations.
    pub per_user_se_mean: Vec<T>,
    pub n_effective: usize,
    pub n_skipped_singular: usize,
    pub n_net: usize,
    pub n_ch: usize,
    pub seed: u64,
    /// Fingerprint of every channel estimate consumed at this `(κ, split)`.
    pub realization_digest: u64,
}

/// Run `f` on a dedicated pool of `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn device_drop<T: Real>(config: &SimulationConfig<T>, streams: &Streams, net: usize) -> Result<Vec<Point3<T>>> {
    let mut rng = streams.rng(Purpose::Devices, net as u64, 0);
    place_devices(config.devices, &config.deployment, &mut rng)
}

fn split_geometry<T: Real>(config: &SimulationConfig<T>, split: Split, devices: Vec<Point3<T>>) -> Result<NetworkGeometry<T>> {
    let aps = place_aps(split.aps, &config.deployment)?;
    NetworkGeometry::new(&config.deployment, aps, devices, split.antennas_per_ap)
}

fn draw_realization<T: Real>(
    links: &LinkTable<T>,
    params: &ChannelParams<T>,
    streams: &Streams,
    net: usize,
    ch: usize,
) -> Result<ChannelRealization<T>> {
    let mut fading = streams.rng(Purpose::Fading, net as u64, ch as u64);
    let h = links.draw(params.rician, &mut fading);
    let mut csi = streams.rng(Purpose::CsiError, net as u64, ch as u64);
    let est = corrupt_csi(&h, params, links.num_devices(), &mut csi)?;
    Ok(ChannelRealization {
        true_matrix: h,
        estimated_matrix: est,
        gains: links.gains().clone(),
    })
}

/// The exact channel realization the engine uses at `(κ, split, net, ch)`.
pub fn realization<T: Real>(
    config: &SimulationConfig<T>,
    kappa: KappaDb<T>,
    split: Split,
    net: usize,
    ch: usize,
) -> Result<ChannelRealization<T>> {
    let streams = config.streams();
    let params = config.params.with_rician(kappa.to_rician());
    let g = split_geometry(config, split, device_drop(config, &streams, net)?)?;
    let links = LinkTable::new(&g, &params)?;
    draw_realization(&links, &params, &streams, net, ch)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_mix(mut h: u64, word: u64) -> u64 {
    for b in word.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn digest_matrix<T: Real>(h: u64, m: &crate::linalg::CMatrix<T>) -> u64 {
    m.iter()
        .fold(h, |acc, z| fnv_mix(fnv_mix(acc, z.re.as_f64().to_bits()), z.im.as_f64().to_bits()))
}

#[derive(Debug, Clone)]
struct CellAccumulator<T> {
    per_user_sum: Vec<T>,
    effective: usize,
    skipped: usize,
}

struct NetworkOutcome<T> {
    /// `[split][combiner]`
    cells: Vec<Vec<CellAccumulator<T>>>,
    digests: Vec<u64>,
}

fn evaluate_network<T: Real>(
    config: &SimulationConfig<T>,
    params: &ChannelParams<T>,
    splits: &[Split],
    combiners: &[CombinerKind],
    streams: &Streams,
    net: usize,
) -> Result<NetworkOutcome<T>> {
    let devices = device_drop(config, streams, net)?;
    let k = config.devices;
    let p = params.tx_power_w;
    let noise = params.noise_power_w();
    let mut cells = Vec::with_capacity(splits.len());
    let mut digests = Vec::with_capacity(splits.len());
    for &split in splits {
        let g = split_geometry(config, split, devices.clone())?;
        let links = LinkTable::new(&g, params)?;
        let mut row = vec![
            CellAccumulator {
                per_user_sum: vec![T::zero(); k],
                effective: 0,
                skipped: 0,
            };
            combiners.len()
        ];
        let mut digest = FNV_OFFSET;
        for ch in config.channel_offset..config.channel_offset + config.n_ch {
            let r = draw_realization(&links, params, streams, net, ch)?;
            digest = digest_matrix(digest, &r.estimated_matrix);
            for (cell, &kind) in row.iter_mut().zip(combiners) {
                match SinrReport::evaluate(&r.true_matrix, &r.estimated_matrix, kind, p, noise) {
                    Ok(rep) => {
                        for (acc, se) in cell.per_user_sum.iter_mut().zip(&rep.per_user_se) {
                            *acc += *se;
                        }
                        cell.effective += 1;
                    }
                    Err(Error::Singular(msg)) => {
                        log::debug!("skipping singular {kind} realization (net {net}, ch {ch}): {msg}");
                        cell.skipped += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        cells.push(row);
        digests.push(digest);
    }
    Ok(NetworkOutcome { cells, digests })
}

fn run_kappa<T: Real>(
    config: &SimulationConfig<T>,
    kappa: KappaDb<T>,
    splits: &[Split],
    combiners: &[CombinerKind],
) -> Result<Vec<SweepResult<T>>> {
    if combiners.is_empty() || splits.is_empty() {
        return Ok(Vec::new());
    }
    let streams = config.streams();
    let params = config.params.with_rician(kappa.to_rician());
    let outcomes: Vec<NetworkOutcome<T>> = (0..config.n_net)
        .into_par_iter()
        .map(|net| evaluate_network(config, &params, splits, combiners, &streams, net))
        .collect::<Result<_>>()?;

    let k = config.devices;
    let mut results = Vec::with_capacity(splits.len() * combiners.len());
    for (si, &split) in splits.iter().enumerate() {
        let digest = outcomes
            .iter()
            .fold(FNV_OFFSET, |acc, o| fnv_mix(acc, o.digests[si]));
        for (ci, &combiner) in combiners.iter().enumerate() {
            let mut net_means = Vec::with_capacity(config.n_net);
            let mut per_user = vec![T::zero(); k];
            let mut effective = 0;
            let mut skipped = 0;
            for o in &outcomes {
                let cell = &o.cells[si][ci];
                effective += cell.effective;
                skipped += cell.skipped;
                if cell.effective == 0 {
                    continue;
                }
                let draws = T::from_usize_lossy(cell.effective);
                let mut user_mean_sum = T::zero();
                for (acc, s) in per_user.iter_mut().zip(&cell.per_user_sum) {
                    let r_k = *s / draws;
                    *acc += r_k;
                    user_mean_sum += r_k;
                }
                net_means.push(user_mean_sum / T::from_usize_lossy(k));
            }
            let used = T::from_usize_lossy(net_means.len().max(1));
            let est = stats::estimate(&net_means);
            results.push(SweepResult {
                kappa,
                split,
                combiner,
                mean_se: if net_means.is_empty() { T::nan() } else { est.mean },
                se_std_error: est.std_error,
                per_user_se_mean: per_user.into_iter().map(|s| s / used).collect(),
                n_effective: effective,
                n_skipped_singular: skipped,
                n_net: config.n_net,
                n_ch: config.n_ch,
                seed: config.seed,
                realization_digest: digest,
            });
        }
    }
    Ok(results)
}

/// One sweep point.
pub fn run_point<T: Real>(
    config: &SimulationConfig<T>,
    kappa: KappaDb<T>,
    split: Split,
    combiner: CombinerKind,
) -> Result<SweepResult<T>> {
    config.validate()?;
    Split::new(split.aps, split.antennas_per_ap, config.total_antennas)?;
    let mut out = run_kappa(config, kappa, &[split], &[combiner])?;
    Ok(out.remove(0))
}

/// Every `(κ, split, combiner)` of the configuration, in grid order.
pub fn run_sweep<T: Real>(config: &SimulationConfig<T>) -> Result<Vec<SweepResult<T>>> {
    config.validate()?;
    let mut all = Vec::new();
    for &kappa in &config.kappa_grid {
        all.extend(run_kappa(config, kappa, &config.splits, &config.combiners)?);
    }
    Ok(all)
}
