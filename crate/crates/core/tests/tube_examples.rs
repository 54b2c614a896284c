use fractube::waveguide::{
    bound_state_search, conjecture_probe, BoundStateConfig, Bump, ProbeConfig, Verdict,
};

fn bump(depth: f64) -> Option<Bump> {
    Some(Bump {
        depth,
        half_length: 2.0,
    })
}

#[test]
fn enlarged_tube_traps_a_state() {
    let cfg = BoundStateConfig::new(0.75, bump(1.0), vec![4.0, 6.0, 8.0], [0.25, 0.125]);
    let rep = bound_state_search(&cfg).unwrap();
    assert_eq!(rep.verdict, Verdict::BoundState, "{rep:?}");
    assert!(rep.monotone_in_truncation);
    assert!(rep.certificate.as_ref().unwrap().holds);
    assert_eq!(rep.to_table().len(), 6);
}

#[test]
fn straight_tube_stays_above_threshold() {
    let cfg = BoundStateConfig::new(0.5, None, vec![4.0, 8.0, 16.0], [0.25, 0.125]);
    let rep = bound_state_search(&cfg).unwrap();
    assert_ne!(rep.verdict, Verdict::BoundState);
    for (lambdas, threshold) in [
        (rep.lambdas(0), rep.threshold[0]),
        (rep.lambdas(1), rep.threshold[1]),
    ] {
        assert!(lambdas.windows(2).all(|w| w[1] <= w[0] + 1e-8));
        assert!(lambdas.iter().all(|&l| l >= threshold - 1e-8));
    }
}

#[test]
fn invalid_configs_are_named() {
    let mut cfg = BoundStateConfig::new(0.5, bump(1.0), vec![1.0, 8.0, 16.0], [0.25, 0.125]);
    let err = bound_state_search(&cfg).unwrap_err().to_string();
    assert!(err.contains("truncation inside bump"), "{err}");
    cfg.truncations = vec![3.0, 8.0, 16.0];
    assert!(bound_state_search(&cfg).is_err());
    cfg.truncations = vec![8.0, 16.0];
    assert!(bound_state_search(&cfg).is_err());
    cfg.truncations = vec![4.0, 8.0, 16.0];
    cfg.spacings = [0.25, 0.1];
    assert!(bound_state_search(&cfg).is_err());
}

#[test]
fn probe_gap_grows_with_bump() {
    let probe = conjecture_probe(&ProbeConfig {
        half_width: 1.0,
        s: 0.25,
        bump_depths: vec![0.25, 0.5, 1.0],
        bump_half_length: 2.0,
        truncation: 8.0,
        spacings: [0.25, 0.125],
        x_half_length: 4.0,
        tol: 1e-8,
        seed: 0,
    })
    .unwrap();
    assert_eq!(probe.rows.len(), 3);
    assert!(probe.gap_monotone(1e-8));
    assert!(probe.rows[2].gap > probe.rows[0].gap);
    let bad = ProbeConfig {
        s: 0.5,
        ..probe_config()
    };
    assert!(conjecture_probe(&bad).is_err());
}

fn probe_config() -> ProbeConfig {
    ProbeConfig {
        half_width: 1.0,
        s: 0.25,
        bump_depths: vec![0.25],
        bump_half_length: 2.0,
        truncation: 8.0,
        spacings: [0.25, 0.125],
        x_half_length: 4.0,
        tol: 1e-8,
        seed: 0,
    }
}
