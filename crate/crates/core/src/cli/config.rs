//! Plain-text `key = value` recipe files.
//!
//! Units are fixed by the key: powers in watts, frequencies in hertz,
//! distances in meters, the noise figure and the Rician factor in dB. Blank
//! lines and `#` comments are ignored; a repeated key keeps its last value,
//! which is how command-line overrides are applied.
//!
//! List values are comma separated. Rician-factor lists also accept
//! `start:step:stop` ranges and `inf` for the pure line-of-sight limit.
//! Splits are written `QxS`; alternatively `q` and `s` lists are paired
//! element by element (a single value is broadcast). For the correlation
//! experiment `q` and `s` form a Cartesian product instead, since no antenna
//! budget ties them together.

use super::CliError;
use crate::channel::{ChannelParams, CsiMode, RicianFactor};
use crate::combining::CombinerKind;
use crate::geometry::Deployment;
use crate::metrics::ConditionAveraging;
use crate::montecarlo::{KappaDb, SimulationConfig, Split, DEFAULT_N_CH, DEFAULT_N_NET};
use crate::scalar::db_to_linear;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SeSweep,
    Correlation,
    ConditionNumber,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::SeSweep => "se-sweep",
            ExperimentKind::Correlation => "correlation",
            ExperimentKind::ConditionNumber => "condition-number",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "se-sweep" => Ok(ExperimentKind::SeSweep),
            "correlation" => Ok(ExperimentKind::Correlation),
            "condition-number" => Ok(ExperimentKind::ConditionNumber),
            other => Err(format!(
                "unknown experiment '{other}' (expected se-sweep, correlation or condition-number)"
            )),
        }
    }
}

/// Physical parameters and sweep controls shared by every experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonConfig {
    pub seed: u64,
    pub kappa_db: Vec<KappaDb<f64>>,
    pub side_length_m: f64,
    pub ap_height_m: f64,
    pub ue_height_m: f64,
    pub tx_power_w: f64,
    pub noise_psd_w_per_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub carrier_hz: f64,
    pub antenna_spacing: f64,
    pub pathloss_exponent: f64,
    pub reference_distance_m: f64,
}

impl Default for CommonConfig {
    fn default() -> Self {
        let p = ChannelParams::<f64>::default();
        let d = Deployment::<f64>::default();
        Self {
            seed: 0,
            kappa_db: KappaDb::default_grid(),
            side_length_m: d.side_length_m,
            ap_height_m: d.ap_height_m,
            ue_height_m: d.ue_height_m,
            tx_power_w: p.tx_power_w,
            noise_psd_w_per_hz: p.noise_psd_w_per_hz,
            bandwidth_hz: p.bandwidth_hz,
            noise_figure_db: 9.0,
            carrier_hz: p.carrier_hz,
            antenna_spacing: p.antenna_spacing,
            pathloss_exponent: p.pathloss_exponent,
            reference_distance_m: p.reference_distance_m,
        }
    }
}

impl CommonConfig {
    pub fn deployment(&self) -> Deployment<f64> {
        Deployment {
            side_length_m: self.side_length_m,
            ap_height_m: self.ap_height_m,
            ue_height_m: self.ue_height_m,
        }
    }

    /// Channel parameters with κ = 0 dB; experiments set κ per grid point.
    pub fn channel_params(&self, csi: CsiMode) -> ChannelParams<f64> {
        ChannelParams {
            rician: RicianFactor::Linear(1.0),
            antenna_spacing: self.antenna_spacing,
            pathloss_exponent: self.pathloss_exponent,
            reference_distance_m: self.reference_distance_m,
            carrier_hz: self.carrier_hz,
            tx_power_w: self.tx_power_w,
            noise_psd_w_per_hz: self.noise_psd_w_per_hz,
            bandwidth_hz: self.bandwidth_hz,
            noise_figure_linear: db_to_linear(self.noise_figure_db),
            csi,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeSweepConfig {
    pub total_antennas: usize,
    pub splits: Vec<Split>,
    pub devices: usize,
    pub combiners: Vec<CombinerKind>,
    pub n_net: usize,
    pub n_ch: usize,
    pub channel_offset: usize,
    pub csi: CsiMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationConfig {
    pub splits: Vec<Split>,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionConfig {
    pub total_antennas: usize,
    pub splits: Vec<Split>,
    pub devices: usize,
    pub n_net: usize,
    pub n_ch: usize,
    pub averaging: ConditionAveraging,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    SeSweep(SeSweepConfig),
    Correlation(CorrelationConfig),
    ConditionNumber(ConditionConfig),
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Experiment::SeSweep(_) => ExperimentKind::SeSweep,
            Experiment::Correlation(_) => ExperimentKind::Correlation,
            Experiment::ConditionNumber(_) => ExperimentKind::ConditionNumber,
        }
    }
}

/// A parsed recipe file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecipe {
    pub common: CommonConfig,
    pub experiment: Experiment,
    pub output: Option<PathBuf>,
}

impl ExperimentRecipe {
    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind()
    }

    /// Engine configuration for an SE sweep recipe.
    pub fn simulation_config(&self) -> Option<SimulationConfig<f64>> {
        let Experiment::SeSweep(se) = &self.experiment else {
            return None;
        };
        Some(SimulationConfig {
            deployment: self.common.deployment(),
            params: self.common.channel_params(se.csi),
            total_antennas: se.total_antennas,
            splits: se.splits.clone(),
            devices: se.devices,
            kappa_grid: self.common.kappa_db.clone(),
            combiners: se.combiners.clone(),
            n_net: se.n_net,
            n_ch: se.n_ch,
            channel_offset: se.channel_offset,
            seed: self.common.seed,
        })
    }

    /// Canonical `key = value` text listing every effective parameter.
    /// Parsing it back yields an equal recipe.
    pub fn to_config_text(&self) -> String {
        let real = |v: f64| {
            if v != 0.0 && !(1e-3..1e12).contains(&v.abs()) {
                format!("{v:e}")
            } else {
                v.to_string()
            }
        };
        let c = &self.common;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("name", self.kind().as_str().to_string());
        kv("seed", c.seed.to_string());
        kv("kappa_db", join(&c.kappa_db));
        kv("side_length_m", real(c.side_length_m));
        kv("ap_height_m", real(c.ap_height_m));
        kv("ue_height_m", real(c.ue_height_m));
        kv("tx_power_w", real(c.tx_power_w));
        kv("noise_psd_w_per_hz", real(c.noise_psd_w_per_hz));
        kv("bandwidth_hz", real(c.bandwidth_hz));
        kv("noise_figure_db", real(c.noise_figure_db));
        kv("carrier_hz", real(c.carrier_hz));
        kv("antenna_spacing", real(c.antenna_spacing));
        kv("pathloss_exponent", real(c.pathloss_exponent));
        kv("reference_distance_m", real(c.reference_distance_m));
        match &self.experiment {
            Experiment::SeSweep(se) => {
                kv("total_antennas", se.total_antennas.to_string());
                kv("splits", join(&se.splits));
                kv("devices", se.devices.to_string());
                kv("combiners", join(&se.combiners));
                kv("n_net", se.n_net.to_string());
                kv("n_ch", se.n_ch.to_string());
                kv("channel_offset", se.channel_offset.to_string());
                kv(
                    "csi",
                    match se.csi {
                        CsiMode::Modeled => "modeled",
                        CsiMode::Perfect => "perfect",
                    }
                    .to_string(),
                );
            }
            Experiment::Correlation(co) => {
                kv("splits", join(&co.splits));
                kv("n_pairs", co.n_pairs.to_string());
            }
            Experiment::ConditionNumber(cn) => {
                kv("total_antennas", cn.total_antennas.to_string());
                kv("splits", join(&cn.splits));
                kv("devices", cn.devices.to_string());
                kv("n_net", cn.n_net.to_string());
                kv("n_ch", cn.n_ch.to_string());
                kv(
                    "averaging",
                    match cn.averaging {
                        ConditionAveraging::Decibel => "db",
                        ConditionAveraging::Linear => "linear",
                    }
                    .to_string(),
                );
            }
        }
        if let Some(p) = &self.output {
            kv("output", p.display().to_string());
        }
        out
    }
}

fn join<D: std::fmt::Display>(items: &[D]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

/// Where a value came from, for error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line { line: usize, column: usize },
    Override { index: usize },
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Line { line, column } => write!(f, "line {line}, column {column}"),
            Location::Override { index } => write!(f, "override #{}", index + 1),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    loc: Location,
}

fn tokenize(text: &str, overrides: &[String]) -> Result<BTreeMap<String, Entry>, CliError> {
    let mut map = BTreeMap::new();
    let mut insert = |raw: &str, loc_of: &dyn Fn(usize) -> Location| -> Result<(), CliError> {
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            return Ok(());
        }
        let Some(eq) = content.find('=') else {
            return Err(CliError::config(loc_of(1), "expected 'key = value'"));
        };
        let key = content[..eq].trim().to_ascii_lowercase();
        if key.is_empty() {
            return Err(CliError::config(loc_of(1), "missing key before '='"));
        }
        let rest = &content[eq + 1..];
        let lead = rest.len() - rest.trim_start().len();
        let column = eq + 2 + lead;
        map.insert(
            key,
            Entry {
                value: rest.trim().to_string(),
                loc: loc_of(column),
            },
        );
        Ok(())
    };
    for (i, line) in text.lines().enumerate() {
        insert(line, &|column| Location::Line { line: i + 1, column })?;
    }
    for (index, o) in overrides.iter().enumerate() {
        insert(o, &|_| Location::Override { index })?;
    }
    Ok(map)
}

struct Fields {
    map: BTreeMap<String, Entry>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.map.remove(key)
    }

    fn parse<V>(&mut self, key: &str, default: V, f: impl Fn(&str) -> Result<V, String>) -> Result<V, CliError> {
        match self.take(key) {
            None => Ok(default),
            Some(e) => f(&e.value).map_err(|msg| CliError::config(e.loc, format!("{key}: {msg}"))),
        }
    }

    fn parse_opt<V>(&mut self, key: &str, f: impl Fn(&str) -> Result<V, String>) -> Result<Option<(V, Location)>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => f(&e.value)
                .map(|v| Some((v, e.loc)))
                .map_err(|msg| CliError::config(e.loc, format!("{key}: {msg}"))),
        }
    }

    fn reject_leftovers(self) -> Result<(), CliError> {
        let first = self.map.into_iter().min_by_key(|(_, e)| match e.loc {
            Location::Line { line, .. } => (0, line),
            Location::Override { index } => (1, index),
        });
        match first {
            None => Ok(()),
            Some((k, e)) => Err(CliError::config(e.loc, format!("unknown key '{k}'"))),
        }
    }
}

fn real(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("'{s}' is not a finite number"))
}

fn positive_real(s: &str) -> Result<f64, String> {
    let v = real(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("'{s}' must be positive"))
    }
}

fn count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("'{s}' is not a positive integer")),
    }
}

fn index(s: &str) -> Result<usize, String> {
    s.parse::<usize>().map_err(|_| format!("'{s}' is not a nonnegative integer"))
}

fn list<V>(s: &str, f: impl Fn(&str) -> Result<V, String>) -> Result<Vec<V>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| f(t.trim())).collect()
}

fn kappa_list(s: &str) -> Result<Vec<KappaDb<f64>>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [single] => out.push(single.parse::<KappaDb<f64>>().map_err(|e| e.to_string())?),
            [start, step, stop] => {
                let (a, h, b) = (real(start)?, real(step)?, real(stop)?);
                if !(h > 0.0) || b < a {
                    return Err(format!("range '{item}' needs start <= stop and a positive step"));
                }
                let n = ((b - a) / h + 1e-9).floor() as usize;
                if n > 100_000 {
                    return Err(format!("range '{item}' is too long"));
                }
                out.extend((0..=n).map(|i| KappaDb::Db(a + h * i as f64)));
            }
            _ => return Err(format!("'{item}' is neither a value nor start:step:stop")),
        }
    }
    if out.is_empty() {
        return Err("empty Rician factor grid".into());
    }
    Ok(out)
}

fn split_token(s: &str) -> Result<(usize, usize), String> {
    let lower = s.to_ascii_lowercase();
    let (q, sv) = lower
        .split_once('x')
        .ok_or_else(|| format!("split '{s}' must look like QxS"))?;
    Ok((count(q.trim())?, count(sv.trim())?))
}

/// `(Q, S)` pairs from `splits`, or from the `q`/`s` lists.
fn raw_splits(fields: &mut Fields, cartesian: bool) -> Result<Option<(Vec<(usize, usize)>, Location)>, CliError> {
    let explicit = fields.parse_opt("splits", |v| list(v, split_token))?;
    let qs = fields.parse_opt("q", |v| list(v, count))?;
    let ss = fields.parse_opt("s", |v| list(v, count))?;
    if let Some((pairs, loc)) = explicit {
        if let Some((_, l)) = qs.as_ref().or(ss.as_ref()) {
            return Err(CliError::config(*l, "give either 'splits' or 'q'/'s', not both"));
        }
        return Ok(Some((pairs, loc)));
    }
    match (qs, ss) {
        (None, None) => Ok(None),
        (Some((q, loc)), None) => Ok(Some((q.into_iter().map(|q| (q, 0)).collect(), loc))),
        (None, Some((s, loc))) => Ok(Some((s.into_iter().map(|s| (if cartesian { 1 } else { 0 }, s)).collect(), loc))),
        (Some((q, loc)), Some((s, _))) => {
            let pairs = if cartesian {
                q.iter().flat_map(|&qq| s.iter().map(move |&ss| (qq, ss))).collect()
            } else if q.len() == s.len() {
                q.into_iter().zip(s).collect()
            } else if q.len() == 1 {
                s.into_iter().map(|ss| (q[0], ss)).collect()
            } else if s.len() == 1 {
                q.into_iter().map(|qq| (qq, s[0])).collect()
            } else {
                return Err(CliError::config(loc, "'q' and 's' lists differ in length"));
            };
            Ok(Some((pairs, loc)))
        }
    }
}

/// Pairs checked against the antenna budget; a zero `Q` or `S` is derived from `M`.
fn budget_splits(raw: Option<(Vec<(usize, usize)>, Location)>, m: usize) -> Result<Vec<Split>, CliError> {
    let Some((pairs, loc)) = raw else {
        return Ok(Split::all_for(m));
    };
    if pairs.is_empty() {
        return Err(CliError::config(loc, "split list is empty"));
    }
    pairs
        .into_iter()
        .map(|(q, s)| {
            let q = if q == 0 {
                if m % s != 0 {
                    return Err(CliError::config(loc, format!("S = {s} does not divide M = {m}")));
                }
                m / s
            } else {
                q
            };
            let s = if s == 0 {
                if m % q != 0 {
                    return Err(CliError::config(loc, format!("Q = {q} does not divide M = {m}")));
                }
                m / q
            } else {
                s
            };
            Split::new(q, s, m).map_err(|e| CliError::config(loc, e.to_string()))
        })
        .collect()
}

fn parse_common(fields: &mut Fields) -> Result<CommonConfig, CliError> {
    let d = CommonConfig::default();
    Ok(CommonConfig {
        seed: fields.parse("seed", d.seed, |v| v.parse::<u64>().map_err(|_| format!("'{v}' is not a u64")))?,
        kappa_db: fields.parse("kappa_db", d.kappa_db.clone(), kappa_list)?,
        side_length_m: fields.parse("side_length_m", d.side_length_m, |v| {
            let x = real(v)?;
            if x >= 0.0 { Ok(x) } else { Err("must be nonnegative".into()) }
        })?,
        ap_height_m: fields.parse("ap_height_m", d.ap_height_m, real)?,
        ue_height_m: fields.parse("ue_height_m", d.ue_height_m, real)?,
        tx_power_w: fields.parse("tx_power_w", d.tx_power_w, positive_real)?,
        noise_psd_w_per_hz: fields.parse("noise_psd_w_per_hz", d.noise_psd_w_per_hz, positive_real)?,
        bandwidth_hz: fields.parse("bandwidth_hz", d.bandwidth_hz, positive_real)?,
        noise_figure_db: fields.parse("noise_figure_db", d.noise_figure_db, real)?,
        carrier_hz: fields.parse("carrier_hz", d.carrier_hz, positive_real)?,
        antenna_spacing: fields.parse("antenna_spacing", d.antenna_spacing, positive_real)?,
        pathloss_exponent: fields.parse("pathloss_exponent", d.pathloss_exponent, real)?,
        reference_distance_m: fields.parse("reference_distance_m", d.reference_distance_m, positive_real)?,
    })
}

/// Parse a recipe. Unspecified keys take the default deployment values
/// (`M = K = 16`, `l = 100 m`, `p = 0.1 W`, `N0 = 4e-21 W/Hz`, `B = 20 MHz`,
/// `N_F = 9 dB`, `h_AP = 12 m`, `h_UE = 1.5 m`, `f_c = 3.5 GHz`, `Δ = 0.5`,
/// `η = 2`, `d0 = 1 m`).
pub fn parse_config(text: &str) -> Result<ExperimentRecipe, CliError> {
    parse_config_with_overrides(text, &[])
}

/// As [`parse_config`], with `key=value` overrides applied after the file.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<ExperimentRecipe, CliError> {
    let mut fields = Fields {
        map: tokenize(text, overrides)?,
    };
    let Some(name) = fields.take("name") else {
        return Err(CliError::Config {
            location: None,
            message: "missing 'name' (se-sweep, correlation or condition-number)".into(),
        });
    };
    let kind: ExperimentKind = name
        .value
        .parse()
        .map_err(|m: String| CliError::config(name.loc, m))?;
    let output = fields.take("output").map(|e| PathBuf::from(e.value));
    let common = parse_common(&mut fields)?;
    let experiment = match kind {
        ExperimentKind::SeSweep => {
            let m = fields.parse("total_antennas", 16, count)?;
            let raw = raw_splits(&mut fields, false)?;
            Experiment::SeSweep(SeSweepConfig {
                total_antennas: m,
                splits: budget_splits(raw, m)?,
                devices: fields.parse("devices", 16, count)?,
                combiners: fields.parse("combiners", CombinerKind::ALL.to_vec(), |v| {
                    list(v, |t| t.parse::<CombinerKind>().map_err(|e| e.to_string()))
                })?,
                n_net: fields.parse("n_net", DEFAULT_N_NET, count)?,
                n_ch: fields.parse("n_ch", DEFAULT_N_CH, count)?,
                channel_offset: fields.parse("channel_offset", 0, index)?,
                csi: fields.parse("csi", CsiMode::Modeled, |v| match v.to_ascii_lowercase().as_str() {
                    "modeled" => Ok(CsiMode::Modeled),
                    "perfect" => Ok(CsiMode::Perfect),
                    _ => Err(format!("'{v}' is not 'modeled' or 'perfect'")),
                })?,
            })
        }
        ExperimentKind::Correlation => {
            let splits = match raw_splits(&mut fields, true)? {
                None => [2, 4, 8, 16]
                    .into_iter()
                    .map(|s| Split {
                        aps: 1,
                        antennas_per_ap: s,
                    })
                    .collect(),
                Some((pairs, loc)) => {
                    if pairs.is_empty() {
                        return Err(CliError::config(loc, "split list is empty"));
                    }
                    pairs
                        .into_iter()
                        .map(|(q, s)| {
                            if s == 0 {
                                Err(CliError::config(loc, "correlation splits need S (use 's' or QxS)"))
                            } else {
                                Ok(Split {
                                    aps: q,
                                    antennas_per_ap: s,
                                })
                            }
                        })
                        .collect::<Result<_, _>>()?
                }
            };
            Experiment::Correlation(CorrelationConfig {
                splits,
                n_pairs: fields.parse("n_pairs", 10_000, count)?,
            })
        }
        ExperimentKind::ConditionNumber => {
            let m = fields.parse("total_antennas", 16, count)?;
            let raw = raw_splits(&mut fields, false)?;
            Experiment::ConditionNumber(ConditionConfig {
                total_antennas: m,
                splits: budget_splits(raw, m)?,
                devices: fields.parse("devices", 16, count)?,
                n_net: fields.parse("n_net", DEFAULT_N_NET, count)?,
                n_ch: fields.parse("n_ch", DEFAULT_N_CH, count)?,
                averaging: fields.parse("averaging", ConditionAveraging::Decibel, |v| {
                    match v.to_ascii_lowercase().as_str() {
                        "db" => Ok(ConditionAveraging::Decibel),
                        "linear" => Ok(ConditionAveraging::Linear),
                        _ => Err(format!("'{v}' is not 'db' or 'linear'")),
                    }
                })?,
            })
        }
    };
    fields.reject_leftovers()?;
    Ok(ExperimentRecipe {
        common,
        experiment,
        output,
    })
}
