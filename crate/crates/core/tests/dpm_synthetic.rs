use cdp_core::dpm::{
    cluster_summary, gibbs_chains, gibbs_run, predictive_density, ClusterState, ClusterStats, DpmSpec, GibbsSettings,
    Kernel,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn two_clusters(seed: u64) -> Vec<Vec<f64>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    (0..200)
        .map(|i| vec![if i < 100 { -10.0 } else { 10.0 } + unit.sample(&mut r)])
        .collect()
}

fn nig_spec() -> DpmSpec {
    DpmSpec {
        alpha: 1.0,
        kernel: Kernel::GaussianNig {
            m0: vec![0.0],
            kappa0: vec![0.01],
            a0: vec![2.0],
            b0: vec![2.0],
        },
        dims: 1,
    }
}

#[test]
fn coclustering_separates_the_groups() {
    let data = two_clusters(1);
    let settings = GibbsSettings {
        burn_in: 100,
        samples: 300,
        thin: 1,
    };
    let run = gibbs_run(&data, &nig_spec(), &settings, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let s = cluster_summary(&run.states).unwrap();
    // block averages of the co-clustering matrix
    let (mut within, mut across) = (0.0, 0.0);
    for i in 0..200 {
        for j in 0..200 {
            if i / 100 == j / 100 {
                within += s.coclustering[i][j] / 20_000.0;
            } else {
                across += s.coclustering[i][j] / 20_000.0;
            }
        }
    }
    assert!(within > 0.9, "within {within}");
    assert!(across < 0.1, "across {across}");
}

#[test]
fn one_state_one_cluster_gives_the_lomax_predictive() {
    let spec = DpmSpec {
        alpha: 2.0,
        kernel: Kernel::ExponentialGamma { shape: 1.5, rate: 4.0 },
        dims: 1,
    };
    let data = [1.0, 3.0, 0.5];
    let stats = ClusterStats {
        count: 3,
        sum: vec![4.5],
        sum_sq: vec![10.25],
    };
    let state = ClusterState {
        assignments: vec![0, 0, 0],
        clusters: vec![stats],
        iteration: 1,
    };
    let grid = [0.0, 0.7, 2.0, 9.0];
    let curve = predictive_density(&[state], &spec, &grid).unwrap();
    let lomax = |x: f64, a: f64, b: f64| a * b.powf(a) / (b + x).powf(a + 1.0);
    for (k, &x) in grid.iter().enumerate() {
        let want = 3.0 / 5.0 * lomax(x, 4.5, 8.5) + 2.0 / 5.0 * lomax(x, 1.5, 4.0);
        assert!((curve.mean[k] - want).abs() < 1e-12);
    }
    assert!(!curve.band_reliable);
    assert_eq!(data.len(), 3);
}

#[test]
fn chains_do_not_depend_on_scheduling() {
    let data = two_clusters(3);
    let settings = GibbsSettings {
        burn_in: 10,
        samples: 20,
        thin: 1,
    };
    let chains = gibbs_chains(&data, &nig_spec(), &settings, &[5, 6]).unwrap();
    let alone = gibbs_run(&data, &nig_spec(), &settings, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    assert_eq!(chains[1], alone);
}

#[test]
fn two_dimensional_curves_are_refused() {
    let spec = DpmSpec {
        alpha: 1.0,
        kernel: Kernel::GaussianNig {
            m0: vec![0.0; 2],
            kappa0: vec![1.0; 2],
            a0: vec![2.0; 2],
            b0: vec![1.0; 2],
        },
        dims: 2,
    };
    let data = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let run = gibbs_run(&data, &spec, &GibbsSettings { burn_in: 1, samples: 2, thin: 1 }, &mut ChaCha8Rng::seed_from_u64(1))
        .unwrap();
    let e = predictive_density(&run.states, &spec, &[0.0]).unwrap_err();
    assert_eq!(e.exit_code(), 4);
}
