use kpnn_core::geometry::{is_kpnn, PointConfig};
use kpnn_core::mc::stats::{mean, std_error};
use kpnn_core::stabilization::{
    check_assumptions, membership_prob, poisson_cdf_psi, region_of, tail_bound, tail_bound_from_lambda,
};
use kpnn_core::{sample_poisson_config, DensitySpec, SeedSpec};
use rand::Rng;

#[test]
fn membership_frequency_matches_probability() {
    let g = DensitySpec::unit_cube(2);
    let mut rng = SeedSpec::new(77, 0).rng();
    let mut hits = 0;
    let cases = 8;
    for case in 0..cases {
        let x0 = [rng.random::<f64>(), rng.random::<f64>()];
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let t: f64 = rng.random();
        let y = [x0[0] + t * (x[0] - x0[0]), x0[1] + rng.random::<f64>() * (x[1] - x0[1])];
        let k = rng.random_range(1..5);
        let n = 50.0;
        let p = membership_prob(&g, n, &x0, &x, &y, k).unwrap();
        let freq: Vec<f64> = (0..5000)
            .map(|r| {
                let mut c = sample_poisson_config(n, &g, SeedSpec::new(case, r)).unwrap();
                c.push(&x).unwrap();
                f64::from(u8::from(region_of(&c, &x0, &x, k).unwrap().contains(&y)))
            })
            .collect();
        let se = std_error(&freq).max((p * (1.0 - p) / 5000.0).sqrt());
        if (mean(&freq) - p).abs() <= 3.0 * se {
            hits += 1;
        }
    }
    assert!(hits >= cases - 1, "{hits}/{cases}");
}

#[test]
fn outside_rect_never_a_member() {
    let g = DensitySpec::unit_cube(2);
    assert_eq!(membership_prob(&g, 100.0, &[0.5, 0.5], &[0.6, 0.6], &[0.7, 0.55], 3).unwrap(), 0.0);
}

#[test]
fn tail_bound_dominates_psi_on_grid() {
    for k in 1..=50 {
        for i in 0..=500 {
            let lambda = 0.1 * i as f64;
            assert!(tail_bound_from_lambda(lambda, k) >= poisson_cdf_psi(lambda, k), "lambda {lambda}, k {k}");
        }
    }
    let g = DensitySpec::unit_cube(2);
    let b = tail_bound(&g, 1e3, &[0.2, 0.2], &[0.3, 0.25], 4).unwrap();
    assert!(b >= membership_prob(&g, 1e3, &[0.2, 0.2], &[0.3, 0.25], &[0.25, 0.21], 4).unwrap());
}

#[test]
fn region_nonempty_iff_potential_neighbour() {
    let g = DensitySpec::unit_cube(3);
    let mut rng = SeedSpec::new(8, 0).rng();
    for r in 0..200 {
        let c = sample_poisson_config(60.0, &g, SeedSpec::new(9, r)).unwrap();
        if c.is_empty() {
            continue;
        }
        let x0 = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        let k = rng.random_range(1..6);
        for x in c.iter() {
            assert_eq!(!region_of(&c, &x0, x, k).unwrap().is_empty(), is_kpnn(&c, &x0, x, k).unwrap());
        }
    }
}

#[test]
fn assumptions_hold_on_random_instances() {
    let mut rng = SeedSpec::new(10, 0).rng();
    for r in 0..150 {
        let d = rng.random_range(1..=3);
        let g = DensitySpec::unit_cube(d);
        let c: PointConfig = sample_poisson_config(rng.random_range(5.0..120.0), &g, SeedSpec::new(11, r)).unwrap();
        let x0: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let probe: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let report = check_assumptions(&c, &x0, rng.random_range(1..6), &probe).unwrap();
        assert!(report.all_hold(), "{report:?}");
    }
}
