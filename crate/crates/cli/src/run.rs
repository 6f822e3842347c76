//! Experiment orchestration: builds module inputs from the config, runs the
//! requested experiment inside a dedicated thread pool, and persists a JSON
//! summary plus flat CSV tables. Every stochastic row carries the per-trial
//! seed so a single trial can be re-run in isolation.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use qmeter_core::cosmo::{InflationParams, ReheatingParams};
use qmeter_core::epr::{self, EprConfig};
use qmeter_core::measurement::{self, Readout};
use qmeter_core::quantum::make_pure_spin;
use qmeter_core::{astro, cosmo, engine};

use crate::config::{Config, Kind};
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeasureSummary {
    pub kind: String,
    pub master_seed: u64,
    pub n: usize,
    pub n_plus: usize,
    pub n_minus: usize,
    pub n_undecided: usize,
    pub p_plus: f64,
    pub p_plus_stderr: f64,
    pub median_decision_time: Option<f64>,
    pub mean_final_phi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EprSummary {
    pub kind: String,
    pub master_seed: u64,
    pub n: usize,
    pub angle1: f64,
    pub angle2: f64,
    pub c: f64,
    pub stderr: f64,
    pub n_decided: usize,
    pub n_undecided: usize,
    pub oracle_c: f64,
    pub quality_warning: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChshRow {
    pub config_label: String,
    pub c: f64,
    pub stderr: f64,
    pub n_decided: usize,
    pub n_undecided: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChshSummary {
    pub kind: String,
    pub master_seed: u64,
    pub n_per_config: usize,
    pub statistic: f64,
    pub stderr: f64,
    pub violation_3sigma: bool,
    pub ideal_statistic: f64,
    pub oracle_statistic: f64,
    pub correlations: Vec<ChshRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CosmoSummary {
    pub kind: String,
    pub master_seed: u64,
    pub n_per_k: usize,
    pub reference: f64,
    pub k: Vec<f64>,
    pub power: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AstroSummary {
    pub kind: String,
    pub planet_mass: f64,
    pub planet_radius: f64,
    pub star_mass: f64,
    pub star_radius: f64,
    pub fusion_temperature: f64,
}

/// In-memory result of one experiment: the summary plus named CSV tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub summary_json: String,
    /// (file name, CSV text) pairs.
    pub tables: Vec<(String, String)>,
    pub quality_warning: bool,
}

fn readout_label(r: Readout) -> &'static str {
    match r {
        Readout::Plus => "+1",
        Readout::Minus => "-1",
        Readout::Undecided => "undecided",
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
    s.push('\n');
    s
}

fn run_measure(cfg: &Config) -> Result<Bundle, CliError> {
    let p = cfg.apparatus.to_params();
    let rho0 = make_pure_spin(cfg.measure.polar, cfg.measure.azimuth);
    let outcomes = measurement::measure_trials(
        &rho0,
        &p,
        cfg.measure.t_end,
        cfg.measure.dt,
        cfg.n,
        cfg.master_seed,
    )?;
    let stats = measurement::stats_from_outcomes(&outcomes);
    let mut table = String::from("index,seed,readout,final_phi,decision_time\n");
    for (i, o) in outcomes.iter().enumerate() {
        let seed = engine::derive_seed(cfg.master_seed, i as u64);
        let t = o
            .decision_time
            .map(|t| t.to_string())
            .unwrap_or_default();
        writeln!(table, "{i},{seed},{},{},{t}", readout_label(o.readout), o.final_phi).unwrap();
    }
    let summary = MeasureSummary {
        kind: Kind::Measure.to_string(),
        master_seed: cfg.master_seed,
        n: stats.n,
        n_plus: stats.n_plus,
        n_minus: stats.n_minus,
        n_undecided: stats.n_undecided,
        p_plus: stats.p_plus,
        p_plus_stderr: stats.p_plus_stderr,
        median_decision_time: stats.median_decision_time,
        mean_final_phi: stats.mean_final_phi,
    };
    let warn = stats.n_undecided as f64 > 0.1 * stats.n as f64;
    Ok(Bundle {
        summary_json: json(&summary),
        tables: vec![("trials.csv".into(), table)],
        quality_warning: warn,
    })
}

fn epr_config(cfg: &Config) -> EprConfig {
    let base = cfg.apparatus.to_params();
    let mut ec = EprConfig::singlet_with_angles(&base, cfg.epr.angle1, cfg.epr.angle2);
    if cfg.epr.t_end > 0.0 {
        ec.t_end = cfg.epr.t_end;
    }
    ec.dt = cfg.epr.dt;
    ec
}

fn run_epr(cfg: &Config) -> Result<Bundle, CliError> {
    let ec = epr_config(cfg);
    let outcomes = epr::run_epr_trials(&ec, cfg.n, cfg.master_seed)?;
    let estimate = epr::correlation_from_outcomes(&outcomes)?;
    let oracle = epr::correlation_quadrature_oracle(&ec)?;
    let mut table = String::from("index,seed,readout1,readout2\n");
    for (i, o) in outcomes.iter().enumerate() {
        writeln!(
            table,
            "{i},{},{},{}",
            o.seed,
            readout_label(o.readout1),
            readout_label(o.readout2)
        )
        .unwrap();
    }
    let summary = EprSummary {
        kind: Kind::Epr.to_string(),
        master_seed: cfg.master_seed,
        n: cfg.n,
        angle1: cfg.epr.angle1,
        angle2: cfg.epr.angle2,
        c: estimate.c,
        stderr: estimate.stderr,
        n_decided: estimate.n_decided,
        n_undecided: estimate.n_undecided,
        oracle_c: oracle,
        quality_warning: estimate.quality_warning,
    };
    Ok(Bundle {
        summary_json: json(&summary),
        tables: vec![("pairs.csv".into(), table)],
        quality_warning: estimate.quality_warning,
    })
}

fn run_chsh(cfg: &Config) -> Result<Bundle, CliError> {
    let base = cfg.apparatus.to_params();
    let mut configs = epr::chsh_configs(&base);
    for c in &mut configs {
        if cfg.epr.t_end > 0.0 {
            c.t_end = cfg.epr.t_end;
        }
        c.dt = cfg.epr.dt;
    }
    let result = epr::chsh_statistic(&configs, cfg.n, cfg.master_seed)?;
    let labels = ["B1,B2", "B1',B2", "B1,B2'", "B1',B2'"];
    let ideal = epr::chsh_ideal(
        [45f64, 45.0, 135.0, 45.0].map(f64::to_radians),
    );
    let oracle = epr::chsh_oracle(&configs)?;
    let mut rows = Vec::new();
    let mut table = String::from("config_label,C,stderr,n_decided,n_undecided\n");
    for (label, est) in labels.iter().zip(&result.correlations) {
        writeln!(
            table,
            "\"{label}\",{},{},{},{}",
            est.c, est.stderr, est.n_decided, est.n_undecided
        )
        .unwrap();
        rows.push(ChshRow {
            config_label: label.to_string(),
            c: est.c,
            stderr: est.stderr,
            n_decided: est.n_decided,
            n_undecided: est.n_undecided,
        });
    }
    let warn = result.correlations.iter().any(|e| e.quality_warning);
    let summary = ChshSummary {
        kind: Kind::Chsh.to_string(),
        master_seed: cfg.master_seed,
        n_per_config: cfg.n,
        statistic: result.statistic,
        stderr: result.stderr,
        violation_3sigma: result.violation_3sigma,
        ideal_statistic: ideal,
        oracle_statistic: oracle,
        correlations: rows,
    };
    Ok(Bundle {
        summary_json: json(&summary),
        tables: vec![("chsh.csv".into(), table)],
        quality_warning: warn,
    })
}

fn run_cosmo(cfg: &Config) -> Result<Bundle, CliError> {
    let c = &cfg.cosmo;
    let ip = InflationParams {
        hubble: c.hubble,
        eta_start: c.eta_start,
        eta_end: c.eta_end,
    };
    let rp = ReheatingParams {
        n_steps: c.n_steps,
        ..ReheatingParams::new(c.lambda, c.phi0, c.delta_t)
    };
    if c.n_k < 1 || !(c.k_min > 0.0) || !(c.k_max > c.k_min) {
        return Err(CliError::Config(
            "cosmo grid needs 0 < k_min < k_max and n_k >= 1".into(),
        ));
    }
    let k_grid: Vec<f64> = (0..c.n_k)
        .map(|i| {
            if c.n_k == 1 {
                c.k_min
            } else {
                let f = i as f64 / (c.n_k - 1) as f64;
                c.k_min * (c.k_max / c.k_min).powf(f)
            }
        })
        .collect();
    let spec = cosmo::power_spectrum(&k_grid, &rp, &ip, cfg.n, cfg.master_seed)?;
    let mut table = String::from("k,P,stderr,reference\n");
    for i in 0..spec.k.len() {
        writeln!(
            table,
            "{},{},{},{}",
            spec.k[i], spec.power[i], spec.stderr[i], spec.reference
        )
        .unwrap();
    }
    let summary = CosmoSummary {
        kind: Kind::CosmoSpectrum.to_string(),
        master_seed: cfg.master_seed,
        n_per_k: cfg.n,
        reference: spec.reference,
        k: spec.k.clone(),
        power: spec.power.clone(),
        stderr: spec.stderr.clone(),
    };
    Ok(Bundle {
        summary_json: json(&summary),
        tables: vec![("spectrum.csv".into(), table)],
        quality_warning: false,
    })
}

fn run_astro() -> Bundle {
    let a = astro::astro_estimates();
    let summary = AstroSummary {
        kind: Kind::AstroConstants.to_string(),
        planet_mass: a.planet_mass,
        planet_radius: a.planet_radius,
        star_mass: a.star_mass,
        star_radius: a.star_radius,
        fusion_temperature: a.fusion_temperature,
    };
    Bundle {
        summary_json: json(&summary),
        tables: vec![],
        quality_warning: false,
    }
}

/// Runs one experiment. Parallelism is confined to a local thread pool sized
/// by `workers` (0 = library default); results are identical either way.
pub fn run_experiment(kind: Kind, cfg: &Config) -> Result<Bundle, CliError> {
    if let Some(k) = cfg.kind {
        if k != kind {
            return Err(CliError::Config(format!(
                "config kind '{k}' does not match subcommand '{kind}'"
            )));
        }
    }
    let body = || match kind {
        Kind::Measure => run_measure(cfg),
        Kind::Epr => run_epr(cfg),
        Kind::Chsh => run_chsh(cfg),
        Kind::CosmoSpectrum => run_cosmo(cfg),
        Kind::AstroConstants => Ok(run_astro()),
    };
    if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
        pool.install(body)
    } else {
        body()
    }
}

/// Writes summary.json and the tables into `out_dir`, creating it if needed.
pub fn write_bundle(bundle: &Bundle, out_dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let summary_path = out_dir.join("summary.json");
    std::fs::write(&summary_path, &bundle.summary_json)
        .map_err(|e| CliError::Io(format!("{}: {e}", summary_path.display())))?;
    for (name, text) in &bundle.tables {
        let path = out_dir.join(name);
        std::fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
