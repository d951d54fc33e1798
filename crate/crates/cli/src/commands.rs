use std::fs;
use std::path::{Path, PathBuf};

use autobid_core::harness::{
    regret_vs_t_csv, run_episode, run_sweep, sweep_csv, trajectory_csv, ExperimentConfig,
    SlopesReport,
};

use crate::config::{apply_overrides, load, parse_seeds, to_toml_string};
use crate::{Common, Failure, ReportArgs, RunArgs, SweepArgs};

const SLOPES_JSON: &str = "slopes.json";
const SWEEP_CSV: &str = "sweep.csv";
const REGRET_VS_T_CSV: &str = "regret_vs_T.csv";
const CONFIG_TOML: &str = "config.toml";

fn resolve(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut config = apply_overrides(load(&common.config)?, &common.overrides)?;
    if let Some(raw) = &common.seeds {
        config.seeds = parse_seeds(raw)?;
    }
    if let Some(s) = common.scoring {
        config.scoring = s.into();
    }
    Ok(config)
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| {
        Failure::io(
            format!("cannot create output directory `{}`", dir.display()),
            e,
        )
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Failure::io(format!("cannot write `{}`", path.display()), e))?;
    Ok(path)
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Failure::runtime(format!("cannot serialize results: {e}")))
}

pub fn run(args: &RunArgs, verbose: u8) -> Result<(), Failure> {
    let config = resolve(&args.common)?;
    config.validate()?;
    if config.seeds.is_empty() {
        return Err(Failure::usage("seeds: need at least one seed"));
    }
    let out = &args.common.out;
    prepare_out(out)?;
    let materialized = crate::config::materialize(&config)?;
    let (mut regret, mut violation, mut opt) = (0.0, 0.0, 0.0);
    for &seed in &config.seeds {
        let result = run_episode(&config, seed)?;
        let doc = serde_json::json!({ "config": materialized, "result": result });
        write(out, &format!("episode_{seed}.json"), &json(&doc)?)?;
        write(
            out,
            &format!("trajectory_{seed}.csv"),
            &trajectory_csv(&result)?,
        )?;
        if verbose > 0 {
            println!(
                "seed={seed} reward={:.4} payment={:.4} regret={:.4} violation={:.4} opt_reward={:.4}",
                result.metrics.reward,
                result.metrics.payment,
                result.metrics.regret,
                result.metrics.roi_violation,
                result.opt_reward
            );
        }
        regret += result.metrics.regret;
        violation += result.metrics.roi_violation;
        opt += result.opt_reward;
    }
    let n = config.seeds.len() as f64;
    println!(
        "algorithm={} T={} seeds={} mean_regret={:.4} mean_violation={:.4} opt_reward={:.4}",
        config.algorithm.name(),
        config.horizon,
        config.seeds.len(),
        regret / n,
        violation / n,
        opt / n
    );
    Ok(())
}

pub fn sweep(args: &SweepArgs, verbose: u8) -> Result<(), Failure> {
    let config = resolve(&args.common)?;
    config.validate_sweep()?;
    if args.threads == Some(0) {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    let out = &args.common.out;
    prepare_out(out)?;
    let result = run_sweep(&config, args.threads)?;
    write(out, CONFIG_TOML, &to_toml_string(&config)?)?;
    write(out, SWEEP_CSV, &sweep_csv(&result)?)?;
    write(out, REGRET_VS_T_CSV, &regret_vs_t_csv(&result)?)?;
    write(out, SLOPES_JSON, &json(&SlopesReport::of(&result))?)?;
    write(out, "sweep.json", &json(&result)?)?;
    if verbose > 0 {
        for h in &result.per_horizon {
            println!(
                "T={} mean_regret={:.4} mean_violation={:.4}",
                h.horizon, h.mean_regret, h.mean_violation
            );
        }
    }
    println!(
        "algorithm={} horizons={:?} seeds={} regret_slope={:.4} violation_slope={:.4}",
        config.algorithm.name(),
        result.horizons,
        result.seeds.len(),
        result.regret_fit.slope,
        result.violation_fit.slope
    );
    if !result.all_checks_hold() {
        return Err(Failure::runtime(
            "dual multiplier or g-bound checks failed in at least one episode; see sweep.json",
        ));
    }
    Ok(())
}

/// Row of `regret_vs_T.csv`.
struct HorizonRow {
    horizon: String,
    mean_regret: f64,
    stderr_regret: f64,
    mean_violation: f64,
    stderr_violation: f64,
}

fn read_rows(path: &Path) -> Result<Vec<HorizonRow>, Failure> {
    let bad = |e: &dyn std::fmt::Display| Failure::usage(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(&e))?;
    let headers = reader.headers().map_err(|e| bad(&e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(&format!("missing column `{name}`")))
    };
    let idx = [
        col("T")?,
        col("mean_regret")?,
        col("stderr_regret")?,
        col("mean_violation")?,
        col("stderr_violation")?,
    ];
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(&e))?;
        let num = |i: usize| -> Result<f64, Failure> {
            record[idx[i]]
                .parse()
                .map_err(|_| bad(&format!("non-numeric `{}`", &record[idx[i]])))
        };
        rows.push(HorizonRow {
            horizon: record[idx[0]].to_string(),
            mean_regret: num(1)?,
            stderr_regret: num(2)?,
            mean_violation: num(3)?,
            stderr_violation: num(4)?,
        });
    }
    Ok(rows)
}

pub fn report(args: &ReportArgs) -> Result<(), Failure> {
    let dir = &args.out;
    let required = [SLOPES_JSON, REGRET_VS_T_CSV, SWEEP_CSV];
    let missing: Vec<&str> = required
        .iter()
        .copied()
        .filter(|f| !dir.join(f).is_file())
        .collect();
    if !missing.is_empty() {
        return Err(Failure::usage(format!(
            "`{}` is missing sweep artifacts {missing:?}; expected {required:?}",
            dir.display()
        )));
    }
    let slopes_path = dir.join(SLOPES_JSON);
    let text = fs::read_to_string(&slopes_path)
        .map_err(|e| Failure::io(format!("cannot read `{}`", slopes_path.display()), e))?;
    let slopes: SlopesReport = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("{}: {e}", slopes_path.display())))?;
    let rows = read_rows(&dir.join(REGRET_VS_T_CSV))?;

    // Thresholds: flags, then the sweep's own config, then built-in defaults.
    let stored = fs::read_to_string(dir.join(CONFIG_TOML))
        .ok()
        .and_then(|t| toml::from_str::<ExperimentConfig>(&t).ok())
        .map(|c| c.sweep)
        .unwrap_or_default();
    let regret_max = args.regret_slope_max.unwrap_or(stored.regret_slope_max);
    let violation_max = args
        .violation_slope_max
        .unwrap_or(stored.violation_slope_max);

    println!(
        "algorithm: {}  seeds: {}",
        slopes.algorithm.name(),
        slopes.n_seeds
    );
    println!(
        "{:>10}  {:>24}  {:>24}",
        "T", "regret (mean ± stderr)", "violation (mean ± stderr)"
    );
    for r in &rows {
        println!(
            "{:>10}  {:>24}  {:>24}",
            r.horizon,
            format!("{:.3} ± {:.3}", r.mean_regret, r.stderr_regret),
            format!("{:.3} ± {:.3}", r.mean_violation, r.stderr_violation)
        );
    }
    let regret_ok = slopes.regret_slope <= regret_max;
    let violation_ok = slopes.violation_slope <= violation_max;
    let verdict = |ok: bool| if ok { "pass" } else { "fail" };
    println!(
        "regret slope {:.4} (max {regret_max}): {}",
        slopes.regret_slope,
        verdict(regret_ok)
    );
    println!(
        "violation slope {:.4} (max {violation_max}): {}",
        slopes.violation_slope,
        verdict(violation_ok)
    );
    println!(
        "{}",
        if regret_ok && violation_ok {
            "PASS"
        } else {
            "FAIL"
        }
    );
    Ok(())
}
