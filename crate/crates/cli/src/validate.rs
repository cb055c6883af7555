//! Static checks on a config, without running anything.

use std::fmt;

use kpnn_core::mc::{MAX_GRID, MAX_RECT_DIM, MIN_CONCENTRATION_K, MIN_MOMENT_REPS, MIN_SAMPLES};
use kpnn_core::DensitySpec;

use crate::config::{Experiment, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

/// Expected work of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cost {
    /// Independent units of work: replications, Monte Carlo draws or audit
    /// instances.
    pub units: f64,
    /// Points sampled over the whole run, in expectation, or integrand
    /// evaluations for the lower-bound fit.
    pub points: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    pub cost: Cost,
}

impl ValidationReport {
    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            writeln!(f, "findings: none")?;
        }
        for x in &self.findings {
            let tag = match x.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "{tag}: {}", x.message)?;
        }
        write!(
            f,
            "estimated cost: {:.0} work units, {:.3e} sampled points or evaluations",
            self.cost.units, self.cost.points
        )
    }
}

struct Findings(Vec<Finding>);

impl Findings {
    fn error(&mut self, message: impl Into<String>) {
        self.0.push(Finding {
            severity: Severity::Error,
            message: message.into(),
        });
    }

    fn warn(&mut self, message: impl Into<String>) {
        self.0.push(Finding {
            severity: Severity::Warning,
            message: message.into(),
        });
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn validate(cfg: &ExperimentConfig) -> ValidationReport {
    let mut out = Findings(Vec::new());
    let model = cfg.model();
    let dim = model.dim();
    if let Err(e) = model.validate() {
        out.error(format!("model: {e}"));
    }
    if let Err(e) = cfg.scheme.validate() {
        out.error(format!("scheme: {e}"));
    }
    if cfg.grid.n.is_empty() && cfg.experiment != Experiment::LowerBoundFit {
        out.error("grid.n must list at least one intensity");
    }
    if let Some(n) = cfg.grid.n.iter().find(|n| !(n.is_finite() && **n > 0.0)) {
        out.error(format!("grid.n: intensity must be positive, got {n}"));
    }
    if cfg.grid.k.is_empty() {
        out.error("grid.k must list at least one k");
    }
    if cfg.grid.k.contains(&0) {
        out.error("grid.k: k must be at least 1");
    }
    for (i, p) in cfg.grid.x0.iter().enumerate() {
        if p.dim() != dim {
            out.error(format!("grid.x0[{i}] has dimension {}, the model has {dim}", p.dim()));
        }
    }
    let m = cfg.grid.x0.len().max(1);
    let replicated = matches!(
        cfg.experiment,
        Experiment::CltRate | Experiment::PnnCount | Experiment::BiasDecay | Experiment::Concentration
    );
    if replicated && cfg.reps < 2 {
        out.error(format!("reps must be at least 2, got {}", cfg.reps));
    }

    match cfg.experiment {
        Experiment::CltRate => {
            if m > MAX_RECT_DIM {
                out.error(format!(
                    "{m} test points requested; the multivariate rectangle distance supports at most \
                     {MAX_RECT_DIM} (its grid has g^m corners)"
                ));
            }
            if cfg.reps < MIN_SAMPLES {
                out.error(format!("distances need at least {MIN_SAMPLES} replications, got {}", cfg.reps));
            }
            if cfg.summary.grid > MAX_GRID || cfg.summary.grid < 2 {
                out.error(format!("summary.grid must lie in [2, {MAX_GRID}], got {}", cfg.summary.grid));
            }
        }
        Experiment::PnnCount => {
            if cfg.reps < MIN_MOMENT_REPS {
                out.error(format!("moments of L need at least {MIN_MOMENT_REPS} replications, got {}", cfg.reps));
            }
        }
        Experiment::BiasDecay => {
            if !cfg.scheme.is_uniform() {
                out.warn("the variance-floor columns assume uniform weights");
            }
        }
        Experiment::Concentration => {
            if let Some(k) = cfg.grid.k.iter().find(|&&k| k < MIN_CONCENTRATION_K) {
                out.error(format!(
                    "concentration check needs k >= {MIN_CONCENTRATION_K}, got k = {k}"
                ));
            }
        }
        Experiment::TailCalibration => {
            if cfg.tail.cases == 0 || cfg.tail.draws < 2 {
                out.error("tail.cases must be positive and tail.draws at least 2");
            }
        }
        Experiment::AssumptionAudit => {
            if cfg.audit.instances == 0 {
                out.error("audit.instances must be positive");
            }
            if let Some(n) = cfg.grid.n.iter().find(|&&n| n > 200.0) {
                out.warn(format!(
                    "audit intensity {n} exceeds 200; the exhaustive check is quadratic in the configuration size"
                ));
            }
        }
        Experiment::LowerBoundFit => {
            let lb = &cfg.lower_bound;
            for (name, v) in [("t", lb.t), ("alpha", lb.alpha), ("n", lb.n)] {
                if !(v.is_finite() && v > 0.0) {
                    out.error(format!("lower_bound.{name} must be positive, got {v}"));
                }
            }
            if lb.outer < 20 || lb.inner == 0 {
                out.error("lower_bound.outer must be at least 20 and lower_bound.inner positive");
            }
            for &k in &cfg.grid.k {
                let k = k as f64;
                if k > 2.0 * lb.n {
                    out.error(format!("k = {k} exceeds 2n = {}; the lower bound holds only when k <= 2n", 2.0 * lb.n));
                } else if k >= lb.n / 2.0 {
                    out.warn(format!(
                        "k = {k} is at least n/2 = {}; close to the k <= 2n limit of the lower bound",
                        lb.n / 2.0
                    ));
                }
            }
            if cfg.grid.k.len() < 2 {
                out.warn("a single k gives no exponent fit");
            }
            let unit = DensitySpec::unit_cube(dim);
            if cfg.model.density != unit {
                out.warn("the lower-bound integral is evaluated for the uniform density on the unit cube");
            }
        }
    }

    let reps = cfg.reps as f64;
    let n_sum: f64 = cfg.grid.n.iter().sum();
    let cost = match cfg.experiment {
        Experiment::CltRate | Experiment::PnnCount | Experiment::BiasDecay | Experiment::Concentration => Cost {
            units: reps * cfg.grid.n.len() as f64,
            points: reps * n_sum,
        },
        Experiment::TailCalibration => {
            let draws = (cfg.tail.cases * cfg.tail.draws) as f64;
            Cost {
                units: draws,
                points: draws * mean(&cfg.grid.n),
            }
        }
        Experiment::AssumptionAudit => {
            let inst = cfg.audit.instances as f64;
            Cost {
                units: inst,
                points: inst * mean(&cfg.grid.n),
            }
        }
        Experiment::LowerBoundFit => Cost {
            units: cfg.lower_bound.outer as f64,
            points: (cfg.lower_bound.outer * cfg.lower_bound.inner * cfg.grid.k.len()) as f64,
        },
    };
    ValidationReport {
        findings: out.0,
        cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(text, &[]).unwrap()
    }

    #[test]
    fn well_formed_has_no_findings() {
        let r = validate(&cfg("experiment = \"clt-rate\"\nreps = 200"));
        assert!(r.findings.is_empty(), "{r}");
        assert_eq!(r.cost.units, 400.0);
    }

    #[test]
    fn too_many_components_rejected() {
        let x0 = (0..6).map(|i| format!("[0.{i}, 0.5]")).collect::<Vec<_>>().join(", ");
        let r = validate(&cfg(&format!("experiment = \"clt-rate\"\n[grid]\nx0 = [{x0}]")));
        assert!(r.has_errors());
        assert!(r.errors().any(|f| f.message.contains("at most 4")));
    }

    #[test]
    fn lower_bound_k_limits() {
        let base = "experiment = \"lower-bound-fit\"\n[lower_bound]\nn = 20.0\n[grid]\n";
        let warn = validate(&cfg(&format!("{base}k = [2, 12]")));
        assert!(!warn.has_errors());
        assert!(warn.warnings().any(|f| f.message.contains("k <= 2n")));
        let err = validate(&cfg(&format!("{base}k = [2, 41]")));
        assert!(err.has_errors());
    }

    #[test]
    fn concentration_needs_k_eleven() {
        assert!(validate(&cfg("experiment = \"concentration\"\n[grid]\nk = [4, 11]")).has_errors());
        assert!(!validate(&cfg("experiment = \"concentration\"\n[grid]\nk = [11]")).has_errors());
    }

    #[test]
    fn dimension_mismatch_reported() {
        assert!(validate(&cfg("experiment = \"pnn-count\"\n[grid]\nx0 = [[0.5]]")).has_errors());
    }
}
