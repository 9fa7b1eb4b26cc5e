use std::fmt;

use anyhow::{Context, Result};
use toml::{Table, Value};

use udts_core::baselines::Scheme;
use udts_core::exec::Execution;
use udts_core::link::evaluate_network;
use udts_core::marl::{train_maa2c, train_mad3qn, Algorithm, TrainingReport};
use udts_core::montecarlo::{analytic_curve, compare_by_distance, simulate_replications, FadeCoupling};
use udts_core::scenario::sample_deployment;
use udts_core::{Assignment, EndDevice, ScenarioConfig, Settings, SpreadingFactor};

use crate::output::{curve_csv, metrics_csv, sf_hist_csv, sf_trace_csv, trace_csv, OutDir};
use crate::{AllocateArgs, Common, Fade, SchemeName, SweepArgs, TrainArgs, ValidateArgs};

#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

struct Run {
    settings: Settings,
    out: OutDir,
    summary: Table,
}

impl Run {
    fn start(common: &Common, command: &str, tweak: impl FnOnce(&mut Settings)) -> Result<Self> {
        set_threads(common.threads)?;
        let mut settings = match &common.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        tweak(&mut settings);
        settings.validate()?;
        let out = OutDir::create(&common.out_dir)?;
        let mut run = Table::new();
        run.insert("command".into(), command.into());
        run.insert("seed".into(), Value::Integer(common.seed as i64));
        run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        let mut summary = Table::new();
        summary.insert("run".into(), Value::Table(run));
        Ok(Self { settings, out, summary })
    }

    fn scenario(&self) -> ScenarioConfig {
        self.settings.scenario()
    }

    fn finish(mut self, results: Table) -> Result<()> {
        self.summary.insert("results".into(), Value::Table(results));
        self.summary.insert("config".into(), Value::try_from(&self.settings)?);
        self.out.write("summary.toml", &toml::to_string(&self.summary)?)?;
        self.out.write("config.toml", &self.settings.to_toml()?)?;
        eprintln!("wrote results to {}", self.out.path().display());
        Ok(())
    }
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(UsageError("--threads must be at least 1".into()).into());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot configure the thread pool")?;
    Ok(())
}

fn sf_arg(value: u8) -> Result<SpreadingFactor> {
    SpreadingFactor::from_value(value).map_err(|_| UsageError(format!("invalid spreading factor {value} (expected 7..=12)")).into())
}

fn float_array(xs: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(xs.into_iter().map(Value::Float).collect())
}

fn int(x: usize) -> Value {
    Value::Integer(x as i64)
}

pub fn validate(common: &Common, args: &ValidateArgs) -> Result<()> {
    let run = Run::start(common, "validate", |s| {
        if let Some(n) = args.devices {
            s.network.n_devices = n;
        }
    })?;
    if args.bins == 0 || args.points < 2 || args.periods == 0 || args.replications == 0 {
        return Err(UsageError("bins, periods and replications must be >= 1 and points >= 2".into()).into());
    }
    let cfg = run.scenario();
    let devices = sample_deployment(&cfg, common.seed)?;
    let coupling = match args.fade {
        Fade::Shared => FadeCoupling::Shared,
        Fade::Independent => FadeCoupling::Independent,
    };
    let duration = args.periods as f64 * cfg.network.report_period_s;
    let mut results = Table::new();
    let mut overall: f64 = 0.0;
    for &value in &args.sf {
        let sf = sf_arg(value)?;
        let assignment = Assignment::uniform(devices.len(), sf);
        let outcome = simulate_replications(
            &devices,
            &assignment,
            &cfg,
            duration,
            common.seed,
            args.replications,
            coupling,
            Execution::default(),
        )?;
        let bins = compare_by_distance(&devices, &assignment, &cfg, &outcome, args.bins)?;
        let curve = analytic_curve(&cfg, sf, devices.len(), args.points)?;
        let empirical: Vec<(f64, f64)> =
            bins.iter().filter(|b| b.packets > 0).map(|b| (0.5 * (b.lo_m + b.hi_m), b.empirical_p_s)).collect();
        let mut detail = String::from("lo_m,hi_m,devices,packets,successes,empirical_p_s,half_width,analytic_p_s\n");
        for b in &bins {
            detail += &format!(
                "{},{},{},{},{},{},{},{}\n",
                b.lo_m, b.hi_m, b.devices, b.packets, b.successes, b.empirical_p_s, b.half_width, b.analytic_p_s
            );
        }
        let gap = bins
            .iter()
            .filter(|b| b.packets > 0)
            .map(|b| (b.empirical_p_s - b.analytic_p_s).abs())
            .fold(0.0, f64::max);
        overall = overall.max(gap);
        run.out.write(&format!("analytic_sf{value}.csv"), &curve_csv(&curve))?;
        run.out.write(&format!("empirical_sf{value}.csv"), &curve_csv(&empirical))?;
        run.out.write(&format!("bins_sf{value}.csv"), &detail)?;
        let total = outcome.total();
        println!("{sf}: max |analytic - empirical| = {gap:.4} over {} bins, {} packets", bins.len(), total.attempts);
        let mut entry = Table::new();
        entry.insert("max_abs_gap".into(), Value::Float(gap));
        entry.insert("packets".into(), Value::Integer(total.attempts as i64));
        entry.insert("successes".into(), Value::Integer(total.successes as i64));
        entry.insert("snr_failures".into(), Value::Integer(total.snr_failures as i64));
        entry.insert("collision_failures".into(), Value::Integer(total.collision_failures as i64));
        results.insert(format!("sf{value}"), Value::Table(entry));
    }
    println!("overall max |analytic - empirical| = {overall:.4}");
    results.insert("max_abs_gap".into(), Value::Float(overall));
    results.insert("fade".into(), format!("{:?}", args.fade).to_lowercase().into());
    run.finish(results)
}

fn scheme(name: SchemeName, sf: u8) -> Result<Scheme> {
    Ok(match name {
        SchemeName::SameSf => Scheme::SameSf(sf_arg(sf)?),
        SchemeName::Eib => Scheme::Eib,
        SchemeName::Eab => Scheme::Eab,
        SchemeName::Plb => Scheme::Plb,
    })
}

pub fn allocate(common: &Common, args: &AllocateArgs) -> Result<()> {
    let run = Run::start(common, "allocate", |s| {
        if let Some(n) = args.devices {
            s.network.n_devices = n;
        }
    })?;
    let scheme = scheme(args.scheme, args.sf)?;
    let cfg = run.scenario();
    let devices = sample_deployment(&cfg, common.seed)?;
    let assignment = scheme.allocate(&devices, &cfg)?;
    let eval = evaluate_network(&devices, &assignment, &cfg)?;
    run.out.write("metrics.csv", &metrics_csv(&devices, &assignment, &eval))?;
    run.out.write("sf_hist.csv", &sf_hist_csv(&assignment))?;
    println!("{scheme}: average EPP {} J over {} devices", eval.avg_epp_j, devices.len());
    let mut results = Table::new();
    results.insert("scheme".into(), scheme.to_string().into());
    results.insert("devices".into(), int(devices.len()));
    results.insert("avg_epp_j".into(), Value::Float(eval.avg_epp_j));
    results.insert("sf_shares".into(), float_array(assignment.shares()));
    run.finish(results)
}

fn train_once(
    algo: Algorithm,
    devices: &[EndDevice],
    cfg: &ScenarioConfig,
    settings: &Settings,
    seed: u64,
) -> Result<TrainingReport> {
    let report = match algo {
        Algorithm::Mad3qn => train_mad3qn(devices, cfg, &settings.marl, seed),
        Algorithm::Maa2c => train_maa2c(devices, cfg, &settings.marl, seed),
    };
    report.with_context(|| format!("{algo} training failed"))
}

pub fn train(common: &Common, args: &TrainArgs) -> Result<()> {
    let run = Run::start(common, "train", |s| {
        if let Some(n) = args.devices {
            s.network.n_devices = n;
        }
        if let Some(t) = args.episodes {
            s.marl.t_max = t as usize;
        }
    })?;
    let algo = Algorithm::from(args.algo);
    let cfg = run.scenario();
    let devices = sample_deployment(&cfg, common.seed)?;
    let report = train_once(algo, &devices, &cfg, &run.settings, common.seed)?;
    let assignment = &report.final_assignment;
    run.out.write("metrics.csv", &metrics_csv(&devices, assignment, &report.final_evaluation))?;
    run.out.write("trace.csv", &trace_csv(&report.avg_epp))?;
    run.out.write("behavior_trace.csv", &trace_csv(&report.behavior_epp))?;
    run.out.write("sf_trace.csv", &sf_trace_csv(&report.sf_histograms))?;
    run.out.write("sf_hist.csv", &sf_hist_csv(assignment))?;
    println!(
        "{algo}: final average EPP {} J after {} episodes",
        report.final_avg_epp(),
        report.episodes()
    );
    let mut results = Table::new();
    results.insert("algorithm".into(), algo.to_string().into());
    results.insert("devices".into(), int(devices.len()));
    results.insert("episodes".into(), int(report.episodes()));
    results.insert("final_avg_epp_j".into(), Value::Float(report.final_avg_epp()));
    if let Some(c) = report.convergence_episode {
        results.insert("convergence_episode".into(), int(c + 1));
    }
    results.insert("sf_shares".into(), float_array(assignment.shares()));
    let mut baselines = Table::new();
    for s in Scheme::ALL_DEFAULT {
        let eval = evaluate_network(&devices, &s.allocate(&devices, &cfg)?, &cfg)?;
        baselines.insert(s.to_string(), Value::Float(eval.avg_epp_j));
    }
    results.insert("baseline_avg_epp_j".into(), Value::Table(baselines));
    run.finish(results)
}

pub fn sweep(common: &Common, args: &SweepArgs) -> Result<()> {
    let run = Run::start(common, "sweep", |s| {
        if let Some(t) = args.episodes {
            s.marl.t_max = t as usize;
        }
    })?;
    let mut csv = String::from("n_devices,method,avg_epp_j,share_sf7,share_sf8,share_sf9,share_sf10,share_sf11,share_sf12\n");
    let mut rows = Vec::new();
    for &n in &args.n_devices {
        let cfg = run.scenario().with_devices(n as usize);
        let devices = sample_deployment(&cfg, common.seed)?;
        let mut results: Vec<(String, f64, [f64; 6])> = Vec::new();
        for s in Scheme::ALL_DEFAULT {
            let a = s.allocate(&devices, &cfg)?;
            results.push((s.to_string(), evaluate_network(&devices, &a, &cfg)?.avg_epp_j, a.shares()));
        }
        for &algo in &args.algos {
            let algo = Algorithm::from(algo);
            let r = train_once(algo, &devices, &cfg, &run.settings, common.seed)?;
            results.push((algo.to_string(), r.final_avg_epp(), r.final_assignment.shares()));
        }
        for (method, epp, shares) in results {
            csv += &format!("{n},{method},{epp}");
            for s in shares {
                csv += &format!(",{s}");
            }
            csv.push('\n');
            println!("N={n:>6} {method:>8}: {epp:.4} J");
            let mut row = Table::new();
            row.insert("n_devices".into(), Value::Integer(n as i64));
            row.insert("method".into(), method.into());
            row.insert("avg_epp_j".into(), Value::Float(epp));
            rows.push(Value::Table(row));
        }
    }
    run.out.write("sweep.csv", &csv)?;
    let mut results = Table::new();
    results.insert("rows".into(), Value::Array(rows));
    run.finish(results)
}
