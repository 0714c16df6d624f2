use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use hdal_core::ensemble::PriorMode;
use hdal_core::harness::{
    ood_entropy_experiment, run_learning_curve, synth_ood_generator, EntropyConfig, EntropyHistogram, RunConfig,
    RunOptions, RunOutcome, RunStatus,
};

/// Directory that relative paths inside a config resolve against.
pub fn config_base_dir(config_path: &Path) -> PathBuf {
    match config_path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Runs a benchmark config. Fails if any run failed.
pub fn run(config_path: &Path, options: &RunOptions) -> Result<RunOutcome> {
    let config = RunConfig::from_path(config_path)?;
    let outcome = run_learning_curve(&config, &config_base_dir(config_path), options)?;
    let failed: Vec<String> = outcome
        .manifest
        .runs
        .iter()
        .filter(|r| r.status == RunStatus::Failed)
        .map(|r| format!("{} seed {}: {}", r.strategy, r.seed, r.error.as_deref().unwrap_or("unknown error")))
        .collect();
    if !failed.is_empty() {
        anyhow::bail!("{} run(s) failed:\n  {}", failed.len(), failed.join("\n  "));
    }
    Ok(outcome)
}

/// Entropy histograms of one prior mode, summed over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeHistogram {
    pub mode: PriorMode,
    pub mean_in_dist_accuracy: f64,
    pub histogram: EntropyHistogram,
}

pub fn load_entropy_config(config_path: &Path) -> Result<EntropyConfig> {
    let text = fs::read_to_string(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    EntropyConfig::from_toml(&text).with_context(|| format!("{}", config_path.display()))
}

pub fn entropy_histograms(config: &EntropyConfig) -> Result<Vec<ModeHistogram>> {
    let fixtures: Vec<_> = config.seeds.iter().map(|&s| (s, synth_ood_generator(s))).collect();
    let mut out = Vec::new();
    for mode in PriorMode::ALL {
        let mut total: Option<EntropyHistogram> = None;
        let mut accuracy = 0.0;
        for (seed, (in_dist, ood)) in &fixtures {
            let o = ood_entropy_experiment(in_dist, ood, *seed, mode, &config.ensemble, &config.train, config.bins)?;
            accuracy += o.in_dist_accuracy;
            total = Some(match total {
                None => o.histogram,
                Some(mut t) => {
                    add_counts(&mut t.in_dist_counts, &o.histogram.in_dist_counts);
                    add_counts(&mut t.ood_counts, &o.histogram.ood_counts);
                    t.in_dist_mean += o.histogram.in_dist_mean;
                    t.ood_mean += o.histogram.ood_mean;
                    t
                }
            });
        }
        let n = fixtures.len() as f64;
        let mut histogram = total.expect("at least one seed");
        histogram.in_dist_mean /= n;
        histogram.ood_mean /= n;
        out.push(ModeHistogram {
            mode,
            mean_in_dist_accuracy: accuracy / n,
            histogram,
        });
    }
    Ok(out)
}

fn add_counts(total: &mut [usize], add: &[usize]) {
    for (t, a) in total.iter_mut().zip(add) {
        *t += a;
    }
}

/// One table per mode, each preceded by a `#` summary line.
pub fn render_histograms(tables: &[ModeHistogram]) -> String {
    let mut out = String::new();
    for t in tables {
        let h = &t.histogram;
        writeln!(
            out,
            "# prior_mode={} in_dist_accuracy={:.4} in_dist_mean_entropy={:.4} ood_mean_entropy={:.4} gap={:.4}",
            t.mode,
            t.mean_in_dist_accuracy,
            h.in_dist_mean,
            h.ood_mean,
            h.gap()
        )
        .unwrap();
        out.push_str(&h.to_csv(t.mode.as_str()));
        out.push('\n');
    }
    out
}

/// Computes the histograms, writes them to the configured output directory
/// if any, and returns the rendered tables.
pub fn entropy_hist(config_path: &Path) -> Result<String> {
    let config = load_entropy_config(config_path)?;
    let tables = entropy_histograms(&config)?;
    let text = render_histograms(&tables);
    if let Some(output) = &config.output {
        let dir = config_base_dir(config_path).join(output);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for t in &tables {
            let path = dir.join(format!("entropy_{}.csv", t.mode));
            fs::write(&path, t.histogram.to_csv(t.mode.as_str())).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(text)
}
