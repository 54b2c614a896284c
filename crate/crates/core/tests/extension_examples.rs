use fractube::csextension::{
    conormal_limit, energy_identity_check, extend_with, sample_profile, Profile, QuadratureConfig,
};
use fractube::{FracOperator, SpectralParams};

fn light() -> QuadratureConfig {
    QuadratureConfig {
        spacing: 1.0 / 32.0,
        box_half_length: 32.0,
        levels: 64,
        y_max: 16.0,
    }
}

#[test]
fn getoor_conormal_is_one_at_half() {
    let cfg = light();
    let u = sample_profile(&Profile::Getoor, 0.5, &cfg).unwrap();
    let field = extend_with(&u, 0.5, &cfg).unwrap();
    let c = conormal_limit(&field, [0.0, 0.0]).unwrap();
    assert!((c.value - 1.0).abs() < 0.05, "{c:?}");
}

#[test]
fn conormal_agrees_with_operator_at_five_points() {
    let cfg = light();
    for s in [0.25, 0.5, 0.75] {
        for profile in Profile::shipped() {
            let u = sample_profile(&profile, s, &cfg).unwrap();
            let au = FracOperator::new(SpectralParams::laplacian(s).unwrap(), u.mask().clone())
                .apply(&u)
                .unwrap();
            let field = extend_with(&u, s, &cfg).unwrap();
            let mask = u.mask();
            let mid = mask.len() / 2;
            for k in [mid - 16, mid - 8, mid, mid + 8, mid + 16] {
                let c = conormal_limit(&field, mask.position(k)).unwrap();
                let want = au.values()[k].re;
                assert!(
                    (c.value - want).abs() <= 0.05 * want.abs().max(1e-3),
                    "s={s}: {} vs {want}",
                    c.value
                );
            }
        }
    }
}

#[test]
fn identity_improves_under_refinement() {
    let cfg = light();
    let profile = &Profile::shipped()[0];
    let coarse = energy_identity_check(profile, 0.5, &cfg).unwrap();
    let fine = energy_identity_check(profile, 0.5, &cfg.refined()).unwrap();
    assert!(fine.relative_error < coarse.relative_error);
    assert!(fine.relative_error <= 0.02);
    assert!(coarse.tail_estimate < 0.01 * coarse.form);
}
