use super::config::{Experiment, ExperimentRecipe};
use super::CliError;
use crate::channel::CsiMode;
use crate::metrics::{average_correlation, mean_condition_number, ConditionSetup, UniformPairs};
use crate::montecarlo::{run_sweep, with_workers, KappaDb, Split};
use crate::streams::Streams;
use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

pub const SE_SWEEP_HEADER: &str = "kappa_db,q,s,combiner,mean_se_bps_hz,se_stderr,n_net,n_ch,n_skipped,seed";
pub const CORRELATION_HEADER: &str = "kappa_db,q,s,avg_corr,corr_stderr,n_pairs,seed";
pub const CONDITION_HEADER: &str = "kappa_db,q,s,k,mean_cond_db,cond_stderr,n_net,n_ch,seed";

fn fmt_opt(v: Option<f64>) -> String {
    v.unwrap_or(f64::NAN).to_string()
}

fn sort_key_cmp(a: &(KappaDb<f64>, Split), b: &(KappaDb<f64>, Split)) -> Ordering {
    a.0.sort_cmp(&b.0).then(a.1.cmp(&b.1))
}

struct Row {
    kappa: KappaDb<f64>,
    split: Split,
    combiner: Option<crate::combining::CombinerKind>,
    text: String,
}

fn metadata(recipe: &ExperimentRecipe) -> String {
    let mut out = format!("# {} {}\n", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    for line in recipe.to_config_text().lines() {
        let _ = writeln!(out, "# {line}");
    }
    out
}

fn finish(recipe: &ExperimentRecipe, header: &str, mut rows: Vec<Row>) -> String {
    rows.sort_by(|a, b| {
        sort_key_cmp(&(a.kappa, a.split), &(b.kappa, b.split)).then(a.combiner.cmp(&b.combiner))
    });
    let mut out = metadata(recipe);
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.text);
        out.push('\n');
    }
    out
}

/// Run the recipe on the current thread pool and render its CSV.
pub fn render_csv(recipe: &ExperimentRecipe) -> Result<String, CliError> {
    let c = &recipe.common;
    let seed = c.seed;
    match &recipe.experiment {
        Experiment::SeSweep(_) => {
            let cfg = recipe.simulation_config().expect("se-sweep recipe");
            log::info!(
                "se-sweep: {} kappa x {} splits x {} combiners, {} x {} realizations",
                cfg.kappa_grid.len(),
                cfg.splits.len(),
                cfg.combiners.len(),
                cfg.n_net,
                cfg.n_ch
            );
            let results = run_sweep(&cfg)?;
            let mut rows = Vec::with_capacity(results.len());
            for r in results {
                if r.n_effective == 0 {
                    return Err(CliError::Numerical(format!(
                        "every {} realization was singular at kappa_db={} split {}",
                        r.combiner, r.kappa, r.split
                    )));
                }
                rows.push(Row {
                    kappa: r.kappa,
                    split: r.split,
                    combiner: Some(r.combiner),
                    text: format!(
                        "{},{},{},{},{},{},{},{},{},{}",
                        r.kappa,
                        r.split.aps,
                        r.split.antennas_per_ap,
                        r.combiner,
                        r.mean_se,
                        fmt_opt(r.se_std_error),
                        r.n_net,
                        r.n_ch,
                        r.n_skipped_singular,
                        r.seed
                    ),
                });
            }
            Ok(finish(recipe, SE_SWEEP_HEADER, rows))
        }
        Experiment::Correlation(co) => {
            let streams = Streams::new(seed);
            let mut rows = Vec::new();
            for &kappa in &c.kappa_db {
                let params = c.channel_params(CsiMode::Perfect).with_rician(kappa.to_rician());
                for &split in &co.splits {
                    let sampler = UniformPairs {
                        deployment: c.deployment(),
                        aps: split.aps,
                        antennas_per_ap: split.antennas_per_ap,
                    };
                    let e = average_correlation(&sampler, &params, co.n_pairs, &streams)?;
                    log::info!("correlation kappa_db={kappa} split {split}: {}", e.mean);
                    rows.push(Row {
                        kappa,
                        split,
                        combiner: None,
                        text: format!(
                            "{},{},{},{},{},{},{}",
                            kappa,
                            split.aps,
                            split.antennas_per_ap,
                            e.mean,
                            fmt_opt(e.std_error),
                            co.n_pairs,
                            seed
                        ),
                    });
                }
            }
            Ok(finish(recipe, CORRELATION_HEADER, rows))
        }
        Experiment::ConditionNumber(cn) => {
            let streams = Streams::new(seed);
            let mut rows = Vec::new();
            for &kappa in &c.kappa_db {
                for &split in &cn.splits {
                    let setup = ConditionSetup {
                        deployment: c.deployment(),
                        params: c.channel_params(CsiMode::Perfect).with_rician(kappa.to_rician()),
                        aps: split.aps,
                        antennas_per_ap: split.antennas_per_ap,
                        devices: cn.devices,
                        n_net: cn.n_net,
                        n_ch: cn.n_ch,
                        averaging: cn.averaging,
                    };
                    let e = mean_condition_number(&setup, &streams)?;
                    log::info!("condition number kappa_db={kappa} split {split}: {} dB", e.mean);
                    rows.push(Row {
                        kappa,
                        split,
                        combiner: None,
                        text: format!(
                            "{},{},{},{},{},{},{},{},{}",
                            kappa,
                            split.aps,
                            split.antennas_per_ap,
                            cn.devices,
                            e.mean,
                            fmt_opt(e.std_error),
                            cn.n_net,
                            cn.n_ch,
                            seed
                        ),
                    });
                }
            }
            Ok(finish(recipe, CONDITION_HEADER, rows))
        }
    }
}

/// Render the recipe with `workers` threads.
pub fn run_recipe(recipe: &ExperimentRecipe, workers: usize) -> Result<String, CliError> {
    with_workers(workers, || render_csv(recipe))?
}

pub fn write_output(path: &Path, csv: &str) -> Result<(), CliError> {
    std::fs::write(path, csv).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::parse_config;

    #[test]
    fn se_rows_are_sorted_and_counted() {
        let r = parse_config(
            "name = se-sweep\ntotal_antennas = 4\ndevices = 2\nsplits = 4x1, 1x4\nkappa_db = 10, -10\nn_net = 3\nn_ch = 2\ncombiners = mmse, mrc\n",
        )
        .unwrap();
        let csv = run_recipe(&r, 1).unwrap();
        let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], SE_SWEEP_HEADER);
        assert_eq!(data.len(), 1 + 2 * 2 * 2);
        let keys: Vec<(String, String, String)> = data[1..]
            .iter()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[0].into(), f[1].into(), f[3].into())
            })
            .collect();
        assert_eq!(keys[0], ("-10".into(), "1".into(), "mrc".into()));
        assert_eq!(keys[1], ("-10".into(), "1".into(), "mmse".into()));
        assert_eq!(keys[2].1, "4");
        assert_eq!(keys[4].0, "10");
    }

    #[test]
    fn metadata_is_a_recipe() {
        let r = parse_config("name = correlation\nq = 1\ns = 2\nkappa_db = 0\nn_pairs = 5\nseed = 3\n").unwrap();
        let csv = run_recipe(&r, 1).unwrap();
        let meta: String = csv
            .lines()
            .skip(1)
            .take_while(|l| l.starts_with('#'))
            .map(|l| format!("{}\n", l.trim_start_matches('#').trim()))
            .collect();
        assert_eq!(parse_config(&meta).unwrap(), r);
        assert!(csv.lines().next().unwrap().starts_with("# dmimo "));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let e = write_output(Path::new("/nonexistent-dir/x/y.csv"), "a").unwrap_err();
        assert_eq!(e.exit_code(), 4);
    }
}
