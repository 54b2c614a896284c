use std::f64::consts::PI;

use fractube::crosssection::{
    band_sweep, default_kappa_grid, eigen_table, laplacian_power, Discretization, IntervalSetup,
};
use fractube::weyl::{decay_fit, WeylConfig};
use fractube::SpectralParams;

#[test]
fn near_one_ground_state_approaches_dirichlet_value() {
    let setup = IntervalSetup::new(1.0, vec![1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0]);
    let t = eigen_table(
        &setup,
        SpectralParams::laplacian(0.999).unwrap(),
        1,
        Discretization::Fourier,
        1e-9,
    )
    .unwrap();
    let want = (PI / 2.0).powi(2);
    assert!((t.best()[0] - want).abs() < 0.01 * want, "{}", t.best()[0]);
}

#[test]
fn eigenvalues_sit_below_laplacian_powers() {
    let setup = IntervalSetup::new(1.0, vec![1.0 / 64.0, 1.0 / 128.0]);
    for s in [0.25, 0.75] {
        let t = eigen_table(
            &setup,
            SpectralParams::laplacian(s).unwrap(),
            6,
            Discretization::Fourier,
            1e-9,
        )
        .unwrap();
        for (k, v) in t.best().iter().enumerate() {
            assert!(*v < laplacian_power(k + 1, s, 1.0));
        }
    }
}

#[test]
fn band_is_squeezed_and_increasing() {
    let setup = IntervalSetup::new(1.0, vec![1.0 / 64.0]);
    let s = 0.5;
    let t = eigen_table(
        &setup,
        SpectralParams::laplacian(s).unwrap(),
        1,
        Discretization::Fourier,
        1e-9,
    )
    .unwrap();
    let band = band_sweep(
        &setup,
        1.0 / 64.0,
        s,
        &default_kappa_grid(t.values[0][0], s),
        1e-9,
    )
    .unwrap();
    assert_eq!(band.samples.len(), 33);
    assert!(band.strictly_increasing());
    assert!(band.squeeze_margin() > 0.0);
    let last = band.samples.last().unwrap();
    assert!((last.value - last.lower) / last.value < 0.2);
}

#[test]
fn weyl_residual_halves_at_the_predicted_rate() {
    for (s, kappa) in [(0.5, 0.0), (0.5, 1.0), (0.75, 0.0)] {
        let d = decay_fit(&WeylConfig::new(s, kappa, vec![4, 8, 16, 32])).unwrap();
        assert!(d.monotone);
        assert_eq!(d.doubling.len(), 3);
        for (m, ratio) in &d.doubling {
            assert!(
                *ratio <= 2f64.powf(-s) * 1.25,
                "s={s} kappa={kappa} m={m}: {ratio}"
            );
        }
        for row in &d.rows {
            if kappa == 0.0 {
                assert!(row.rayleigh >= d.lambda);
            }
        }
    }
}

#[test]
fn weyl_slope_steepens_with_s() {
    let steep = decay_fit(&WeylConfig::new(0.75, 0.0, vec![4, 8, 16, 32])).unwrap();
    let shallow = decay_fit(&WeylConfig::new(0.25, 0.0, vec![4, 8, 16, 32])).unwrap();
    assert!(steep.slope < shallow.slope);
    assert!((shallow.rows[1].norm_sq / shallow.rows[0].norm_sq - 2.0).abs() < 0.04);
}
