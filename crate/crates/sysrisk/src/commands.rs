//! Subcommands: each validates its inputs before computing, writes its CSV
//! artifacts into the output directory and returns a one-line summary.

use std::path::PathBuf;

use log::info;
use sysrisk_core::evaluation::{dm_test, identification_backtest};
use sysrisk_core::scoring::elementary_from_membership;
use sysrisk_core::simharness::{run_murphy_experiment, ScenarioConfig, Setting};
use sysrisk_core::{EarQuery, EmpiricalDistribution, SystemicMeasure};

use crate::config::ConfigFile;
use crate::output::{fmt_f64, read_matrix, Matrix, Table};
use crate::runner;
use crate::{Error, Result};

/// Options shared by all subcommands.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Options {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub level: Option<f64>,
}

fn with_overrides(mut cfg: ScenarioConfig, opts: &Options) -> Result<ScenarioConfig> {
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(l) = opts.level {
        cfg.level = l;
    }
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(cfg)
}

fn level(cfg: &ConfigFile, opts: &Options) -> Result<f64> {
    let l = opts.level.or(cfg.experiment.level).unwrap_or(sysrisk_core::evaluation::DEFAULT_LEVEL);
    if l > 0.0 && l < 1.0 {
        Ok(l)
    } else {
        Err(Error::Config(format!("level must lie in (0, 1), got {l}")))
    }
}

fn distribution(m: &Matrix) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::new(m.flat(), m.cols).map_err(|e| Error::Input { path: m.path.clone(), msg: e.to_string() })
}

fn check_measure_dim(m: &SystemicMeasure, data: &Matrix) -> Result<()> {
    match m.lambda.dim() {
        Some(d) => data.expect_cols(d),
        None => Ok(()),
    }
}

/// Rejection-rate table of the forecast comparison study.
pub fn table1(cfg: &ConfigFile, opts: &Options) -> Result<String> {
    let sc = with_overrides(cfg.scenario(ScenarioConfig::setting_a())?, opts)?;
    let res = runner::run_table1(&sc, opts.workers)?;
    let mut t = Table::new(["setting", "lambda", "risk", "level", "hypothesis", "rate", "replications"]);
    for r in &res.rows {
        t.push(vec![
            sc.setting.tag().into(),
            r.lambda.into(),
            r.risk.kind.tag().into(),
            fmt_f64(r.risk.level),
            r.hypothesis.into(),
            fmt_f64(r.rate),
            res.replications.len().to_string(),
        ]);
    }
    let mut reps = Table::new([
        "replication",
        "risk",
        "level",
        "mean_diff",
        "std_err",
        "statistic",
        "p_h0_a_ge_b",
        "p_h0_a_le_b",
        "reject_a_ge_b",
        "reject_a_le_b",
    ]);
    for o in &res.replications {
        for (r, x) in sc.risks.iter().zip(&o.risks) {
            reps.push(vec![
                o.replication.to_string(),
                r.kind.tag().into(),
                fmt_f64(r.level),
                fmt_f64(x.dm.mean_diff),
                fmt_f64(x.dm.std_err),
                fmt_f64(x.dm.statistic),
                fmt_f64(x.dm.p_value_f1_ge_f2()),
                fmt_f64(x.dm.p_value_f1_le_f2()),
                x.reject_a_ge_b.to_string(),
                x.reject_a_le_b.to_string(),
            ]);
        }
    }
    t.write_atomic(&opts.out.join("table1.csv"))?;
    reps.write_atomic(&opts.out.join("table1_replications.csv"))?;
    let summary: Vec<String> =
        res.rows.iter().map(|r| format!("{}{} {} {:.3}", r.risk.kind.tag(), r.risk.level, r.hypothesis, r.rate)).collect();
    Ok(format!("setting {}: {}", sc.setting.tag(), summary.join(", ")))
}

/// Murphy diagrams with traffic-light zones, one CSV per forecaster pair.
pub fn murphy(cfg: &ConfigFile, opts: &Options) -> Result<String> {
    let sc = with_overrides(cfg.scenario(ScenarioConfig::murphy())?, opts)?;
    if sc.setting != Setting::A {
        return Err(Error::Config("the Murphy study runs in setting A".into()));
    }
    let pairs = run_murphy_experiment(&sc)?;
    let mut lines = Vec::new();
    for p in &pairs {
        let d = sc.d;
        let mut header: Vec<String> = (1..=d).map(|i| format!("k{i}")).collect();
        header.extend(["s_f1", "s_f2", "diff", "zone"].map(String::from));
        let mut t = Table::new(header);
        let g = &p.grid;
        for j in 0..g.points.len() {
            let mut row: Vec<String> = g.points[j].iter().map(|&x| fmt_f64(x)).collect();
            row.extend([fmt_f64(g.s_f1[j]), fmt_f64(g.s_f2[j]), fmt_f64(g.diff[j]), g.zones[j].tag().into()]);
            t.push(row);
        }
        t.write_atomic(&opts.out.join(format!("murphy_{}_{}.csv", p.f1.name(), p.f2.name())))?;
        lines.push(format!("{}-{} max diff {:.4}", p.f1.name(), p.f2.name(), g.max_diff()));
    }
    Ok(lines.join(", "))
}

/// Eisenberg-Noe clearing of every endowment row.
pub fn clearing(cfg: &ConfigFile, opts: &Options) -> Result<String> {
    let net = cfg.network()?;
    let e = read_matrix(&cfg.data_path("endowments")?)?;
    e.expect_cols(net.dim())?;
    let d = net.dim();
    let mut header = vec!["row".to_string()];
    header.extend((1..=d).map(|i| format!("p{i}")));
    header.extend(["society_payment", "iterations", "residual"].map(String::from));
    let mut t = Table::new(header);
    let mut total = 0.0;
    for (i, row) in e.rows.iter().enumerate() {
        let r = net.clear(row)?;
        total += r.society_payment;
        let mut out = vec![(i + 1).to_string()];
        out.extend(r.payments.iter().map(|&x| fmt_f64(x)));
        out.extend([fmt_f64(r.society_payment), r.iterations.to_string(), fmt_f64(r.residual)]);
        t.push(out);
    }
    t.write_atomic(&opts.out.join("clearing.csv"))?;
    Ok(format!("{} rows cleared, mean society payment {:.6}", e.rows.len(), total / e.rows.len() as f64))
}

/// Mixture scores of two constant forecast sets and their comparison.
pub fn score(cfg: &ConfigFile, opts: &Options) -> Result<String> {
    let m = cfg.measure()?;
    let obs = read_matrix(&cfg.data_path("observations")?)?;
    check_measure_dim(&m, &obs)?;
    let d = obs.cols;
    let fa = read_matrix(&cfg.data_path("forecast_a")?)?;
    let fb = read_matrix(&cfg.data_path("forecast_b")?)?;
    fa.expect_cols(d)?;
    fb.expect_cols(d)?;
    let pi_spec = cfg.pi_spec()?;
    let seed = opts.seed.or(cfg.experiment.seed).unwrap_or(ScenarioConfig::setting_a().seed);
    let pi = pi_spec.build(d, seed).map_err(|e| Error::Config(format!("pi: {e}")))?;
    let a = m.forecast_set(distribution(&fa)?)?;
    let b = m.forecast_set(distribution(&fb)?)?;
    let (mem_a, mem_b) = (pi.memberships(&a)?, pi.memberships(&b)?);
    let mut t = Table::new(["t", "score_a", "score_b", "diff"]);
    let mut diffs = Vec::with_capacity(obs.rows.len());
    let (mut sa_tot, mut sb_tot) = (0.0, 0.0);
    for (i, y) in obs.rows.iter().enumerate() {
        let (mut sa, mut sb) = (0.0, 0.0);
        for (j, (k, w)) in pi.iter().enumerate() {
            sa += w * elementary_from_membership(&m, k, mem_a[j], y)?;
            sb += w * elementary_from_membership(&m, k, mem_b[j], y)?;
        }
        sa_tot += sa;
        sb_tot += sb;
        diffs.push(sa - sb);
        t.push(vec![(i + 1).to_string(), fmt_f64(sa), fmt_f64(sb), fmt_f64(sa - sb)]);
    }
    let n = obs.rows.len() as f64;
    let mut s = Table::new(["n", "mean_a", "mean_b", "mean_diff", "statistic", "p_h0_a_ge_b", "p_h0_a_le_b"]);
    let mut row = vec![obs.rows.len().to_string(), fmt_f64(sa_tot / n), fmt_f64(sb_tot / n), fmt_f64((sa_tot - sb_tot) / n)];
    match dm_test(&diffs) {
        Ok(dm) => row.extend([fmt_f64(dm.statistic), fmt_f64(dm.p_value_f1_ge_f2()), fmt_f64(dm.p_value_f1_le_f2())]),
        Err(_) => row.extend(["NaN", "NaN", "NaN"].map(String::from)),
    }
    s.push(row);
    t.write_atomic(&opts.out.join("score.csv"))?;
    s.write_atomic(&opts.out.join("score_summary.csv"))?;
    info!("scored {} periods against {} atoms", obs.rows.len(), pi.len());
    Ok(format!("mean score A {:.6}, B {:.6}", sa_tot / n, sb_tot / n))
}

/// Efficient allocations of the forecast set of a predictive sample.
pub fn ear(cfg: &ConfigFile, opts: &Options) -> Result<String> {
    let m = cfg.measure()?;
    let e = cfg.ear.as_ref().ok_or_else(|| Error::Config("missing section [ear]".into()))?;
    let pred = read_matrix(&cfg.data_path("predictive")?)?;
    check_measure_dim(&m, &pred)?;
    pred.expect_cols(e.w.len())?;
    let mut q = EarQuery::grid(e.w.clone(), e.extent, e.resolution, e.tol).map_err(|x| Error::Config(format!("ear: {x}")))?;
    if let Some(s) = &e.probe_shifts {
        q = q.with_probe_shifts(s.clone());
    }
    if let Some(k) = &e.check {
        if k.len() != e.w.len() {
            return Err(Error::Config(format!("ear.check has {} entries, expected {}", k.len(), e.w.len())));
        }
    }
    let dist = distribution(&pred)?;
    let res = m.ear(dist.clone(), &q)?;
    let d = e.w.len();
    let mut header: Vec<String> = (1..=d).map(|i| format!("k{i}")).collect();
    header.extend(["cost", "minimizer"].map(String::from));
    let mut t = Table::new(header);
    for (k, c) in &res.boundary {
        let mut row: Vec<String> = k.iter().map(|&x| fmt_f64(x)).collect();
        row.extend([fmt_f64(*c), res.minimizers.contains(k).to_string()]);
        t.push(row);
    }
    let verdict = match &e.check {
        Some(k) => m.ear_identification_check(&dist, k, &q)?.tag(),
        None => "",
    };
    let mut s = Table::new(["min_cost", "minimizers", "singleton", "failed_rays", "check_verdict"]);
    s.push(vec![
        res.min_cost.map(fmt_f64).unwrap_or_else(|| "NaN".into()),
        res.minimizers.len().to_string(),
        res.is_singleton().to_string(),
        res.failed_rays.to_string(),
        verdict.into(),
    ]);
    t.write_atomic(&opts.out.join("ear.csv"))?;
    s.write_atomic(&opts.out.join("ear_summary.csv"))?;
    Ok(match res.min_cost {
        Some(c) => format!("min cost {c:.6} at {} grid points{}", res.minimizers.len(), tagged(verdict)),
        None => format!("no boundary point found{}", tagged(verdict)),
    })
}

fn tagged(verdict: &str) -> String {
    if verdict.is_empty() {
        String::new()
    } else {
        format!(", check: {verdict}")
    }
}

/// One-sided identification backtest of reported allocations.
pub fn backtest(cfg: &ConfigFile, opts: &Options) -> Result<String> {
    let m = cfg.measure()?;
    let lvl = level(cfg, opts)?;
    let obs = read_matrix(&cfg.data_path("observations")?)?;
    let ks = read_matrix(&cfg.data_path("allocations")?)?;
    check_measure_dim(&m, &obs)?;
    ks.expect_cols(obs.cols)?;
    if ks.rows.len() != obs.rows.len() {
        return Err(Error::Input {
            path: ks.path.clone(),
            msg: format!("{} allocation rows for {} observations", ks.rows.len(), obs.rows.len()),
        });
    }
    let dm = identification_backtest(&m, &ks.rows, &obs.rows)?;
    let reject = dm.p_high <= lvl;
    let verdict = if reject { "reject" } else { "no_reject" };
    let mut t = Table::new(["n", "mean_v", "std_err", "statistic", "p_value", "level", "verdict"]);
    t.push(vec![
        dm.n.to_string(),
        fmt_f64(dm.mean_diff),
        fmt_f64(dm.std_err),
        fmt_f64(dm.statistic),
        fmt_f64(dm.p_high),
        fmt_f64(lvl),
        verdict.into(),
    ]);
    t.write_atomic(&opts.out.join("backtest.csv"))?;
    Ok(format!("mean V {:.6}, p-value {:.4}: {verdict} H0: E V <= 0", dm.mean_diff, dm.p_high))
}
