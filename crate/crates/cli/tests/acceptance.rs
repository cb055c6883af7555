//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. `KPNN_ACCEPTANCE=1,5` runs a subset.

use std::time::Instant;

use kpnn_cli::{execute, run_to_dir, ExperimentConfig, Table};
use kpnn_core::geometry::{count_in_rect_excl, kpnn_set, kpnn_set_fast, pnn_counts_with, PointConfig, Strategy};
use kpnn_core::mc::stats::{mean, std_error};
use kpnn_core::mc::{ecdf_kolmogorov, run_replications, summarize, z_scores, ReplicationPlan, SummaryOptions};
use kpnn_core::process::{MeanFunction, NoiseScale, NoiseSpec, RegressionSpec};
use kpnn_core::stabilization::{poisson_cdf_psi, tail_bound_from_lambda};
use kpnn_core::{DensitySpec, Model, Point, SeedSpec, WeightScheme};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn workers() -> usize {
    std::env::var("KPNN_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run(toml: &str) -> Table {
    let cfg = ExperimentConfig::from_toml_str(toml, &[]).expect("acceptance config parses");
    execute(&cfg, workers()).expect("acceptance experiment runs").0
}

/// Calls `f` on every nondecreasing sequence of cell indices of length up to `max_len`.
fn multisets(cells: usize, max_len: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(cells: usize, max_len: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        f(cur);
        if cur.len() == max_len {
            return;
        }
        for c in start..cells {
            cur.push(c);
            rec(cells, max_len, c, cur, f);
            cur.pop();
        }
    }
    rec(cells, max_len, 0, &mut Vec::new(), f);
}

fn lattice_point(mut cell: usize, side: usize, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let v = cell % side;
            cell /= side;
            v as f64
        })
        .collect()
}

/// Checks every k up to `kmax` against the definition, with all strategies.
fn agree(c: &PointConfig, x0: &[f64], kmax: usize) -> bool {
    let counts: Vec<usize> = c.iter().map(|p| count_in_rect_excl(c, x0, p).unwrap()).collect();
    let strategies = [Strategy::Auto, Strategy::Sweep, Strategy::Grid];
    let fast: Vec<_> = strategies.iter().map(|&s| pnn_counts_with(c, x0, kmax, s).unwrap()).collect();
    (1..=kmax).all(|k| {
        let want: Vec<usize> = (0..c.len()).filter(|&i| counts[i] < k).collect();
        fast.iter().all(|f| f.voters(k) == want)
            && (![1, 2, 3, 5, kmax].contains(&k) || kpnn_set_fast(c, x0, k).unwrap() == want)
    })
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut bad = 0usize;
    // Exhaustive: every multiset of n <= 12 lattice points, several test points, all k <= 13.
    let lattices: [(usize, usize, Vec<Vec<f64>>); 3] = [
        (1, 5, vec![vec![2.0], vec![0.0], vec![1.5], vec![-1.0]]),
        (2, 3, vec![vec![1.0, 1.0], vec![0.0, 0.0], vec![0.5, 1.5], vec![2.0, 1.0]]),
        (3, 2, vec![vec![0.5, 0.5, 0.5], vec![0.0, 0.0, 0.0], vec![1.0, 0.5, 0.0]]),
    ];
    for (d, side, x0s) in &lattices {
        let cells = side.pow(*d as u32);
        multisets(cells, 12, &mut |ms| {
            let c = PointConfig::from_points(*d, ms.iter().map(|&cell| lattice_point(cell, *side, *d))).unwrap();
            for x0 in x0s {
                checked += 1;
                if !agree(&c, x0, 13) {
                    bad += 1;
                }
            }
        });
    }
    let exhaustive = checked;
    // Randomized: 1000 configurations, n <= 500, d <= 4, k <= 12.
    let mut rng = SeedSpec::new(0xacce_0001, 0).rng();
    for _ in 0..1000 {
        let d = rng.random_range(1..=4);
        let n = rng.random_range(0..=500);
        let k = rng.random_range(1..=12);
        let lattice = rng.random_bool(0.25);
        let coord = |rng: &mut kpnn_core::rng::StreamRng| {
            if lattice {
                rng.random_range(0..6) as f64 / 5.0
            } else {
                rng.random::<f64>()
            }
        };
        let flat: Vec<f64> = (0..n * d).map(|_| coord(&mut rng)).collect();
        let c = PointConfig::from_flat(d, flat).unwrap();
        let x0: Vec<f64> = (0..d).map(|_| coord(&mut rng)).collect();
        let want = kpnn_set(&c, &x0, k).unwrap();
        let same = kpnn_set_fast(&c, &x0, k).unwrap() == want
            && [Strategy::Sweep, Strategy::Grid]
                .iter()
                .all(|&s| pnn_counts_with(&c, &x0, k, s).unwrap().voters(k) == want);
        if !same {
            bad += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        bad == 0 && secs < 60.0,
        format!("{exhaustive} exhaustive + 1000 random instances, {bad} mismatches, {secs:.1} s"),
    )
}

fn criterion_2() -> Outcome {
    let t = run(r#"
        experiment = "pnn-count"
        seed = 2002
        reps = 300
        [grid]
        n = [1e3, 1e4, 1e5, 1e6]
        k = [1]
        x0 = [[0.5, 0.5]]
    "#);
    let fit = &t.extra["fits"][0];
    let slope = fit["slope"].as_f64().unwrap();
    let se = fit["slope_se"].as_f64().unwrap();
    let means = t.column_f64("mean_L").unwrap();
    outcome(
        (slope - 4.0).abs() <= 0.15 * 4.0,
        format!("slope {slope:.3} (se {se:.3}) vs 4 +/- 15%; E L = {means:.2?}"),
    )
}

fn criterion_3() -> Outcome {
    let t = run(r#"
        experiment = "tail-calibration"
        seed = 3003
        [grid]
        n = [50.0]
        k = [1, 2, 3, 4, 5]
        [tail]
        cases = 20
        draws = 20000
    "#);
    let within = t.extra["within_3se"].as_u64().unwrap();
    let z: Vec<f64> = t.column_f64("z").unwrap();
    let worst = z.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    outcome(within >= 18, format!("{within}/20 cases within 3 SE, max |z| {worst:.2}"))
}

fn criterion_4() -> Outcome {
    let mut violations = 0;
    let mut cells = 0;
    for k in 1..=50 {
        for i in 0..=5000 {
            let lambda = i as f64 * 0.01;
            cells += 1;
            if tail_bound_from_lambda(lambda, k) < poisson_cdf_psi(lambda, k) {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations on {cells} (lambda, k) cells"))
}

fn gaussian_model(r0: MeanFunction, sigma: f64) -> Model {
    Model::new(
        DensitySpec::unit_cube(2),
        NoiseSpec::Gaussian,
        RegressionSpec::new(r0, NoiseScale::Constant { value: sigma }),
    )
}

fn criterion_5() -> Outcome {
    let mut votes = [0; 3];
    let mut lines = Vec::new();
    for b in 0..3u64 {
        let plan = ReplicationPlan {
            model: gaussian_model(MeanFunction::Constant { value: 0.0 }, 1.0),
            ns: vec![1e3, 1e5],
            ks: vec![1],
            x0s: vec![Point::from([0.001, 0.001]), Point::from([0.5, 0.5])],
            reps: 5000,
            scheme: WeightScheme::uniform(),
            seed: 5005 + b,
        };
        let raw = run_replications(&plan).unwrap();
        let report = summarize(&plan, &raw, &SummaryOptions { grid: 41, bootstrap: 0 }).unwrap();
        let dk: Vec<f64> = raw
            .cells
            .iter()
            .map(|c| ecdf_kolmogorov(&z_scores(&c.predictions_of(0))).unwrap())
            .collect();
        let rect = report.cells[1].d_rect.unwrap_or(f64::INFINITY);
        let clauses = [dk[1] < dk[0], dk[1] < 0.05, rect < 0.08];
        for (v, c) in votes.iter_mut().zip(clauses) {
            *v += usize::from(c);
        }
        lines.push(format!("batch {b}: d_K {:.4} -> {:.4}, d_rect {rect:.4}", dk[0], dk[1]));
    }
    outcome(
        votes.iter().all(|&v| v >= 2),
        format!("clauses passed {votes:?}/3; {}", lines.join("; ")),
    )
}

fn criterion_6() -> Outcome {
    let peaked = MeanFunction::SmoothSine {
        amplitude: 1.0,
        frequency: std::f64::consts::FRAC_PI_2,
    };
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut majority = 0;
    for b in 0..5u64 {
        let plan = ReplicationPlan {
            model: gaussian_model(peaked.clone(), 0.5),
            ns: vec![1e3, 1e5],
            ks: vec![1],
            x0s: vec![Point::from([0.5, 0.5])],
            reps: 400,
            scheme: WeightScheme::uniform(),
            seed: 6006 + b,
        };
        let raw = run_replications(&plan).unwrap();
        let target = plan.model.regression.r0.eval(&plan.x0s[0]);
        let p0 = raw.cells[0].predictions_of(0);
        let p1 = raw.cells[1].predictions_of(0);
        if (mean(&p1) - target).abs() < (mean(&p0) - target).abs() {
            majority += 1;
        }
        small.extend(p0);
        large.extend(p1);
    }
    let target = peaked.eval(&[0.5, 0.5]);
    let (b0, s0) = (mean(&small) - target, std_error(&small));
    let (b1, s1) = (mean(&large) - target, std_error(&large));
    let separated = b0.abs() - b1.abs() > 3.0 * s0.hypot(s1);
    let decay = separated || majority >= 3;

    let plan = ReplicationPlan {
        model: gaussian_model(MeanFunction::Constant { value: 1.5 }, 1.0),
        ns: vec![1e3],
        ks: vec![1],
        x0s: vec![Point::from([0.5, 0.5])],
        reps: 2000,
        scheme: WeightScheme::uniform(),
        seed: 6106,
    };
    let p = run_replications(&plan).unwrap().cells[0].predictions_of(0);
    let (bc, sc) = (mean(&p) - 1.5, std_error(&p));
    outcome(
        decay && bc.abs() <= 3.0 * sc,
        format!(
            "sine bias {b0:.4} (se {s0:.4}) at 1e3 vs {b1:.4} (se {s1:.4}) at 1e5, batches {majority}/5; \
             constant bias {bc:.4} (se {sc:.4})"
        ),
    )
}

/// Criteria 7 and 8 share one set of runs.
fn criteria_7_8() -> (Outcome, Outcome) {
    let model = gaussian_model(MeanFunction::Constant { value: 0.0 }, 1.0);
    let mut cells = Vec::new();
    for (n, reps, seed) in [(1e4, 5000, 7007), (1e5, 2000, 7008)] {
        let plan = ReplicationPlan {
            model: model.clone(),
            ns: vec![n],
            ks: vec![1, 4, 11],
            x0s: vec![Point::from([0.5, 0.5])],
            reps,
            scheme: WeightScheme::uniform(),
            seed,
        };
        cells.extend(run_replications(&plan).unwrap().cells);
    }
    let mut fails = 0;
    let mut margins = Vec::new();
    for c in &cells {
        let f = kpnn_core::mc::variance_floor_check(&c.predictions_of(0), &model, &c.sizes_of(0)).unwrap();
        fails += usize::from(!f.pass);
        margins.push(format!("({:.0e},{}) {:.3}", c.n, c.k, f.margin));
    }
    let seven = outcome(fails == 0, format!("var / floor: {}", margins.join(", ")));
    let c = cells.iter().find(|c| c.n == 1e5 && c.k == 11).unwrap();
    let conc = kpnn_core::mc::concentration_check(&c.sizes_of(0), 11).unwrap();
    let eight = outcome(
        conc.skipped.is_none() && conc.fraction < 0.01,
        format!("P(L <= E L/2) = {:.4} with E L = {:.1} over {} reps", conc.fraction, conc.mean_l, c.reps()),
    );
    (seven, eight)
}

fn criterion_9() -> Outcome {
    let t = run(r#"
        experiment = "lower-bound-fit"
        seed = 9009
        [model]
        density = { kind = "uniform-box", lo = [0.0, 0.0], hi = [1.0, 1.0] }
        [grid]
        k = [4, 8, 16, 32, 64]
        [lower_bound]
        t = 1.0
        alpha = 1.0
        n = 1e4
        outer = 20000
        inner = 8
    "#);
    let e = t.extra["exponent"].as_f64().unwrap();
    let se = t.extra["exponent_se"].as_f64().unwrap();
    outcome((e - 2.0).abs() <= 0.3, format!("exponent {e:.3} (se {se:.3}) vs 2 +/- 0.3"))
}

fn criterion_10() -> Outcome {
    let mut total = 0;
    let mut instances = 0;
    for (d, seed, count) in [(2, 10010, 300), (1, 10011, 100), (3, 10012, 100)] {
        let lo = vec!["0.0"; d].join(", ");
        let hi = vec!["1.0"; d].join(", ");
        let t = run(&format!(
            r#"
            experiment = "assumption-audit"
            seed = {seed}
            [model]
            density = {{ kind = "uniform-box", lo = [{lo}], hi = [{hi}] }}
            [grid]
            n = [10.0, 40.0, 120.0, 200.0]
            k = [1, 2, 3, 5, 8]
            [audit]
            instances = {count}
            "#
        ));
        total += t.extra["violations"].as_u64().unwrap();
        instances += t.rows.len();
    }
    outcome(total == 0, format!("{total} counterexamples over {instances} instances"))
}

fn criterion_11() -> Outcome {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        experiment = "clt-rate"
        seed = 11011
        reps = 400
        [grid]
        n = [1e3, 1e4]
        k = [1, 3]
        x0 = [[0.4, 0.5], [0.7, 0.2]]
        [model]
        r0 = { kind = "smooth-sine", amplitude = 1.0, frequency = 3.0 }
        [scheme]
        kind = "dirichlet"
        alpha = 2.0
        seed = 5
        "#,
        &[],
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let read = |name: &str, w: usize| -> Vec<u8> {
        let out = dir.path().join(name);
        run_to_dir(&cfg, w, &out).unwrap();
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let base = read("first", 1);
    let again = read("second", 1);
    let others: Vec<bool> = [4, 16].iter().map(|&w| read(&format!("w{w}"), w) == base).collect();
    let ok = base == again && others.iter().all(|&s| s);
    outcome(
        ok,
        format!(
            "rerun identical: {}, workers 4/16 identical: {others:?}, {} bytes",
            base == again,
            base.len()
        ),
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("KPNN_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |i: usize| only.as_ref().is_none_or(|o| o.contains(&i));
    let names = [
        "oracle equivalence",
        "L-moment scaling",
        "membership calibration",
        "tail-bound dominance",
        "CLT decay",
        "bias decay",
        "variance floor",
        "concentration",
        "lower-bound exponent",
        "assumption audit",
        "determinism",
    ];
    let singles: [(usize, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    for (i, f) in singles {
        if wanted(i) {
            let t = Instant::now();
            let o = f();
            results.push((i, o, t.elapsed().as_secs_f64()));
        }
    }
    if wanted(7) || wanted(8) {
        let t = Instant::now();
        let (seven, eight) = criteria_7_8();
        let secs = t.elapsed().as_secs_f64();
        if wanted(7) {
            results.push((7, seven, secs));
        }
        if wanted(8) {
            results.push((8, eight, secs));
        }
    }
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (i, o, secs) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("{tag} {i:>2} {:<24} {} [{secs:.1} s]", names[i - 1], o.detail);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
