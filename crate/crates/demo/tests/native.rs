use cdp_demo::{linspace, sample_paths, sn_density_curve, st_cdf_curve};

#[test]
fn sn_density_integrates_to_one() {
    let c = sn_density_curve(5, 0.7, 1.0, 1.0, -25.0, 35.0, 3001).unwrap();
    let (x, y) = (c.x(), c.y());
    let h = x[1] - x[0];
    let area: f64 = y.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
    assert!((area - 1.0).abs() < 1e-4, "{area}");
}

#[test]
fn one_summand_is_the_base_density() {
    let c = sn_density_curve(1, 2.0, 0.5, 4.0, -3.0, 3.0, 7).unwrap();
    for (x, y) in c.x().iter().zip(c.y()) {
        let z = (x - 0.5) / 2.0;
        let exact = (-0.5 * z * z).exp() / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((y - exact).abs() < 1e-12);
    }
}

#[test]
fn st_cdf_jumps_by_the_atom_at_zero() {
    let c = st_cdf_curve(1.0, 1.0, 1.0, 0.5, 1.0, 1.75, -1.0, 1.0, 3).unwrap();
    let y = c.y();
    // with Exp(1) times no event falls before 1.75 with probability e^-1.75
    assert!((c.atom() - (-1.75f64).exp()).abs() < 1e-9);
    assert!(y[1] - y[0] > c.atom());
    assert!(y.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn paths_are_step_functions_below_the_horizon() {
    let p = sample_paths(1.0, 1.0, 1.0, 0.5, 1.0, 5.0, 20, 9).unwrap();
    let (t, off) = (p.times(), p.offsets());
    assert_eq!(off.len(), 21);
    for w in off.windows(2) {
        let seg = &t[w[0] as usize..w[1] as usize];
        assert!(seg.windows(2).all(|s| s[1] >= s[0]));
        assert!(seg.iter().all(|&s| s < 5.0));
    }
    let again = sample_paths(1.0, 1.0, 1.0, 0.5, 1.0, 5.0, 20, 9).unwrap();
    assert_eq!(again.sums(), p.sums());
}

#[test]
fn bad_ranges_are_reported() {
    assert!(linspace(1.0, 0.0, 5).is_err());
    assert!(sn_density_curve(0, 1.0, 0.0, 1.0, 0.0, 1.0, 5).is_err());
    assert!(st_cdf_curve(1.0, -1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 5).is_err());
}
