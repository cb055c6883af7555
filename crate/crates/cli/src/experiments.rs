//! The named experiments. Each produces a table with the experiment's fixed
//! columns plus run-level extras for `meta.json`.

use kpnn_core::geometry::PointConfig;
use kpnn_core::mc::stats::ols;
use kpnn_core::mc::{
    bias_from_predictions, concentration_check, estimate_l_moments, lower_bound_exponent_fit, run_replications,
    summarize, variance_floor_check,
};
use kpnn_core::rng::mix;
use kpnn_core::stabilization::{check_assumptions, region_of, TailParams};
use kpnn_core::{sample_poisson_config, SeedSpec};
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
    Bool(bool),
    Text(String),
    Missing,
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    /// CSV rendering: integers in decimal, reals with 17 significant digits.
    pub fn render(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Float(v) if v.is_nan() => "NaN".into(),
            Value::Float(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Value::Float(v) => format!("{v:.16e}"),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) => s.clone(),
            Value::Missing => String::new(),
        }
    }
}

fn int(v: usize) -> Value {
    Value::Int(v as u64)
}

fn float(v: f64) -> Value {
    Value::Float(v)
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Missing, Value::Float)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub experiment: Experiment,
    pub rows: Vec<Vec<Value>>,
    /// Run-level results that do not fit the row schema.
    pub extra: serde_json::Value,
    pub notes: Vec<String>,
}

impl Table {
    pub fn columns(&self) -> &'static [&'static str] {
        self.experiment.columns()
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let i = self.columns().iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        self.column(name).map(|c| c.into_iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect())
    }
}

/// Runs the experiment on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table {
        experiment: cfg.experiment,
        rows: Vec::new(),
        extra: serde_json::Value::Null,
        notes: Vec::new(),
    };
    match cfg.experiment {
        Experiment::CltRate => clt_rate(cfg, &mut table)?,
        Experiment::PnnCount => pnn_count(cfg, &mut table)?,
        Experiment::BiasDecay => bias_decay(cfg, &mut table)?,
        Experiment::TailCalibration => tail_calibration(cfg, &mut table)?,
        Experiment::Concentration => concentration(cfg, &mut table)?,
        Experiment::LowerBoundFit => lower_bound(cfg, &mut table)?,
        Experiment::AssumptionAudit => assumption_audit(cfg, &mut table)?,
    }
    Ok(table)
}

fn clt_rate(cfg: &ExperimentConfig, table: &mut Table) -> Result<()> {
    let plan = cfg.replication_plan()?;
    let raw = run_replications(&plan)?;
    let report = summarize(&plan, &raw, &cfg.summary_options())?;
    for c in &report.cells {
        table.rows.push(vec![
            float(c.n),
            int(c.k),
            int(c.m),
            int(c.reps),
            opt(c.d_k.map(|d| d.value)),
            opt(c.d_k.map(|d| d.std_error)),
            opt(c.d_rect),
            float(c.sigma_min_eig),
            float(c.mean_l()),
        ]);
        for note in &c.notes {
            table.notes.push(format!("n = {}, k = {}: {note}", c.n, c.k));
        }
        if let Some(r) = c.ridge {
            table.notes.push(format!("n = {}, k = {}: covariance ridge {r:e} applied", c.n, c.k));
        }
        if c.empty_samples > 0 {
            table.notes.push(format!("n = {}, k = {}: {} empty samples", c.n, c.k, c.empty_samples));
        }
    }
    Ok(())
}

fn pnn_count(cfg: &ExperimentConfig, table: &mut Table) -> Result<()> {
    let plan = cfg.replication_plan()?;
    let d = plan.model.dim();
    let raw = run_replications(&plan)?;
    for c in &raw.cells {
        for i in 0..plan.m() {
            let m = estimate_l_moments(&c.sizes_of(i), c.n, c.k, d)?;
            table.rows.push(vec![
                float(c.n),
                int(c.k),
                int(i),
                int(d),
                float(m.mean),
                float(m.se),
                float(m.ratio),
                float(m.recip_mean),
            ]);
        }
    }
    // E L against k log^{d-1} n; the limit slope is 2^d / (d-1)!.
    let reference = 2f64.powi(d as i32) / (1..d).map(|j| j as f64).product::<f64>();
    let mut fits = Vec::new();
    if d >= 2 && plan.ns.len() >= 2 {
        for &k in &plan.ks {
            for i in 0..plan.m() {
                let xs: Vec<f64> = plan.ns.iter().map(|n| k as f64 * n.ln().powi(d as i32 - 1)).collect();
                let ys: Vec<f64> = plan
                    .ns
                    .iter()
                    .map(|&n| raw.cell(n, k).expect("cell per grid point").sizes_of(i))
                    .map(|s| s.iter().sum::<usize>() as f64 / s.len() as f64)
                    .collect();
                let fit = ols(&xs, &ys)?;
                fits.push(json!({
                    "k": k,
                    "x0_index": i,
                    "slope": fit.slope,
                    "slope_se": fit.slope_se,
                    "intercept": fit.intercept,
                    "reference_slope": reference,
                }));
            }
        }
    }
    table.extra = json!({ "fits": fits });
    Ok(())
}

fn bias_decay(cfg: &ExperimentConfig, table: &mut Table) -> Result<()> {
    let plan = cfg.replication_plan()?;
    let raw = run_replications(&plan)?;
    for c in &raw.cells {
        for (i, x0) in plan.x0s.iter().enumerate() {
            let preds = c.predictions_of(i);
            let r0 = plan.model.regression.r0.eval(x0);
            let (bias, se) = bias_from_predictions(&preds, r0);
            let floor = variance_floor_check(&preds, &plan.model, &c.sizes_of(i))?;
            table.rows.push(vec![
                float(c.n),
                int(c.k),
                int(i),
                int(c.reps()),
                float(r0),
                float(bias + r0),
                float(bias),
                float(bias.abs()),
                float(se),
                float(floor.var),
                float(floor.floor),
                Value::Bool(floor.pass),
            ]);
        }
    }
    Ok(())
}

fn tail_calibration(cfg: &ExperimentConfig, table: &mut Table) -> Result<()> {
    let g = &cfg.model.density;
    let d = g.dim();
    let (cases, draws) = (cfg.tail.cases, cfg.tail.draws);
    let mut within = 0usize;
    for case in 0..cases {
        let mut rng = SeedSpec::new(mix(cfg.seed, 0x7a11_ca5e), case as u64).rng();
        let n = cfg.grid.n[case % cfg.grid.n.len()];
        let k = cfg.grid.k[rng.random_range(0..cfg.grid.k.len())];
        let mut x0 = vec![0.0; d];
        let mut x = vec![0.0; d];
        g.sample_into(&mut rng, &mut x0);
        g.sample_into(&mut rng, &mut x);
        let y: Vec<f64> = x0.iter().zip(&x).map(|(a, b)| a + rng.random::<f64>() * (b - a)).collect();
        let params = TailParams::new(g, n, &x0, &x, k)?;
        let p = params.psi();
        let master = mix(cfg.seed, 0x7a11_0000 + case as u64);
        let hits: usize = (0..draws)
            .into_par_iter()
            .map(|r| -> Result<usize> {
                let mut c: PointConfig = sample_poisson_config(n, g, SeedSpec::new(master, r as u64))?;
                c.push(&x)?;
                Ok(usize::from(region_of(&c, &x0, &x, k)?.contains(&y)))
            })
            .sum::<Result<usize>>()?;
        let freq = hits as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let z = if se > 0.0 { (freq - p) / se } else if freq == p { 0.0 } else { f64::INFINITY };
        if z.abs() <= 3.0 {
            within += 1;
        }
        table.rows.push(vec![
            int(case),
            float(n),
            int(k),
            float(params.lambda()),
            float(p),
            float(params.bound()),
            float(freq),
            float(se),
            float(z),
        ]);
    }
    table.extra = json!({ "cases": cases, "within_3se": within });
    Ok(())
}

fn concentration(cfg: &ExperimentConfig, table: &mut Table) -> Result<()> {
    let plan = cfg.replication_plan()?;
    let raw = run_replications(&plan)?;
    for c in &raw.cells {
        for i in 0..plan.m() {
            let r = concentration_check(&c.sizes_of(i), c.k)?;
            table.rows.push(vec![
                float(c.n),
                int(c.k),
                int(i),
                int(c.reps()),
                float(r.mean_l),
                float(r.fraction),
                float(r.se),
                r.skipped.map_or(Value::Missing, Value::Text),
            ]);
        }
    }
    Ok(())
}

fn lower_bound(cfg: &ExperimentConfig, table: &mut Table) -> Result<()> {
    let plan = cfg.lower_bound_plan();
    let fit = lower_bound_exponent_fit(&plan)?;
    for (i, &k) in fit.ks.iter().enumerate() {
        table.rows.push(vec![
            float(plan.t),
            float(plan.alpha),
            float(plan.n),
            int(k),
            float(fit.estimates[i]),
            float(fit.std_errors[i]),
            float(fit.exponent),
            float(fit.exponent_se),
        ]);
    }
    table.extra = json!({
        "exponent": fit.exponent,
        "exponent_se": fit.exponent_se,
        "reference_exponent": plan.t + 1.0,
    });
    Ok(())
}

fn assumption_audit(cfg: &ExperimentConfig, table: &mut Table) -> Result<()> {
    let g = &cfg.model.density;
    let d = g.dim();
    let rows: Vec<Vec<Value>> = (0..cfg.audit.instances)
        .into_par_iter()
        .map(|i| -> Result<Vec<Value>> {
            let mut rng = SeedSpec::new(mix(cfg.seed, 0xa0d1_7000), i as u64).rng();
            let n = cfg.grid.n[i % cfg.grid.n.len()];
            let k = cfg.grid.k[rng.random_range(0..cfg.grid.k.len())];
            let config = sample_poisson_config(n, g, SeedSpec::new(mix(cfg.seed, 0xa0d1_7001), i as u64))?;
            let mut x0 = vec![0.0; d];
            g.sample_into(&mut rng, &mut x0);
            let mut probe = vec![0.0; d];
            g.sample_into(&mut rng, &mut probe);
            // Half the probes land inside the rectangle of a random point.
            if !config.is_empty() && rng.random::<bool>() {
                let x = config.point(rng.random_range(0..config.len()));
                for j in 0..d {
                    probe[j] = x0[j] + rng.random::<f64>() * (x[j] - x0[j]);
                }
            }
            let r = check_assumptions(&config, &x0, k, &probe)?;
            Ok(vec![
                int(i),
                int(d),
                int(config.len()),
                int(k),
                int(r.points_checked),
                int(r.r1_violations.len()),
                int(r.r3_violations.len()),
                int(r.r4_violations.len()),
                int(r.collapsed),
            ])
        })
        .collect::<Result<_>>()?;
    let violations: u64 = rows
        .iter()
        .map(|r| r[5..8].iter().map(|v| if let Value::Int(c) = v { *c } else { 0 }).sum::<u64>())
        .sum();
    table.rows = rows;
    table.extra = json!({ "instances": cfg.audit.instances, "violations": violations });
    Ok(())
}
