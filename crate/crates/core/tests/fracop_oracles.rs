use std::f64::consts::PI;
use std::sync::Arc;

use fractube::extrapolate::log_log_slope;
use fractube::{make_mask, FracOperator, Geometry, Grid, GridFunction, SpectralParams};
use statrs::function::gamma::gamma;

/// Tanh-sinh rule on `[a, b]`; tolerates integrable endpoint singularities.
fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let step = 1.0 / 64.0;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for k in -320..=320 {
        let t = k as f64 * step;
        let u = 0.5 * PI * t.sinh();
        let x = u.tanh();
        let w = 0.5 * PI * t.cosh() / u.cosh().powi(2);
        let p = mid + half * x;
        if p > a && p < b && w > 1e-300 {
            sum += w * f(p);
        }
    }
    sum * half * step
}

fn getoor_profile(x: f64) -> f64 {
    (1.0 - x * x).max(0.0).sqrt()
}

/// `(−Δ)^{1/2} u(x) = (1/π) ∫_0^∞ (2u(x) − u(x+t) − u(x−t)) / t² dt`.
fn half_laplacian_by_quadrature(x: f64) -> f64 {
    let u = getoor_profile;
    let second = -1.0 / (1.0 - x * x).powf(1.5);
    let near = |t: f64| {
        if t < 1e-4 {
            -second
        } else {
            (2.0 * u(x) - u(x + t) - u(x - t)) / (t * t)
        }
    };
    let a = 1.0 - x.abs();
    let b = 1.0 + x.abs();
    let first = tanh_sinh(near, 0.0, a);
    let middle = tanh_sinh(|t| (2.0 * u(x) - u(x - x.signum() * t)) / (t * t), a, b);
    let tail = 2.0 * u(x) / b;
    (first + middle + tail) / PI
}

#[test]
fn singular_integral_oracle_reproduces_closed_form() {
    for x in [0.0, 0.3, 0.6] {
        let v = half_laplacian_by_quadrature(x);
        assert!((v - 1.0).abs() < 1e-6, "x={x}: {v}");
    }
}

#[test]
fn half_laplacian_of_getoor_profile() {
    let h = 1.0 / 512.0;
    let grid = Grid::new(h, &[(128.0 / h) as usize]).unwrap();
    let mask = Arc::new(make_mask(Geometry::Interval { half_width: 1.0 }, grid).unwrap());
    let u = GridFunction::from_real_fn(mask.clone(), |p| getoor_profile(p[0]));
    let op = FracOperator::new(SpectralParams::laplacian(0.5).unwrap(), mask.clone());
    let au = op.apply(&u).unwrap();
    for x in [0.0, 0.3, 0.6] {
        let k = (0..mask.len())
            .min_by(|&a, &b| {
                (mask.position(a)[0] - x)
                    .abs()
                    .total_cmp(&(mask.position(b)[0] - x).abs())
            })
            .unwrap();
        let oracle = half_laplacian_by_quadrature(mask.position(k)[0]);
        let got = au.values()[k].re;
        assert!((got - oracle).abs() < 0.01, "x={x}: {got} vs {oracle}");
    }
}

#[test]
fn getoor_profiles_map_to_constants() {
    let h = 1.0 / 512.0;
    let grid = Grid::new(h, &[(128.0 / h) as usize]).unwrap();
    let mask = Arc::new(make_mask(Geometry::Interval { half_width: 1.0 }, grid).unwrap());
    for s in [0.25, 0.75] {
        let u = GridFunction::from_real_fn(mask.clone(), |p| (1.0 - p[0] * p[0]).max(0.0).powf(s));
        let au = FracOperator::new(SpectralParams::laplacian(s).unwrap(), mask.clone())
            .apply(&u)
            .unwrap();
        let want = gamma(2.0 * s + 1.0);
        for (k, v) in au.values().iter().enumerate() {
            if mask.position(k)[0].abs() <= 0.5 {
                assert!(
                    (v.re - want).abs() < 0.03 * want,
                    "s={s}: {} vs {want}",
                    v.re
                );
            }
        }
    }
}

/// `(−Δ)^s e^{−x²}` from `(1/√π) ∫_0^∞ ξ^{2s} e^{−ξ²/4} cos(ξx) dξ`,
/// with `ξ = t²` and Simpson's rule.
fn gaussian_oracle(s: f64, x: f64) -> f64 {
    let n = 20000;
    let top = 5.0;
    let dt = top / n as f64;
    let f = |t: f64| {
        let xi = t * t;
        2.0 * t * xi.powf(2.0 * s) * (-xi * xi / 4.0).exp() * (xi * x).cos()
    };
    let mut sum = f(0.0) + f(top);
    for i in 1..n {
        sum += f(i as f64 * dt) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * dt / 3.0 / PI.sqrt()
}

#[test]
fn gaussian_matches_fourier_integral() {
    let h = 1.0 / 32.0;
    let grid = Grid::new(h, &[(1024.0 / h) as usize]).unwrap();
    let mask = Arc::new(make_mask(Geometry::Interval { half_width: 6.0 }, grid).unwrap());
    let u = GridFunction::from_real_fn(mask.clone(), |p| (-p[0] * p[0]).exp());
    for s in [0.25, 0.5, 0.75] {
        let au = FracOperator::new(SpectralParams::laplacian(s).unwrap(), mask.clone())
            .apply(&u)
            .unwrap();
        for x in [0.0, 0.5, 1.25, 2.5] {
            let k = mask.indices().len() / 2 + (x / h).round() as usize;
            let got = au.values()[k].re;
            let want = gaussian_oracle(s, mask.position(k)[0]);
            assert!(
                (got - want).abs() < 1e-3 * want.abs().max(0.1),
                "s={s} x={x}: {got} vs {want}"
            );
        }
    }
}

fn bump(r: f64) -> f64 {
    if r < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

fn form_on_box(s: f64, h: f64, half_length: f64, dim: usize) -> f64 {
    let n = (2.0 * half_length / h).round() as usize;
    let points = vec![n; dim];
    let grid = Grid::new(h, &points).unwrap();
    let geometry = if dim == 1 {
        Geometry::Interval { half_width: 1.0 }
    } else {
        Geometry::Disk { radius: 1.0 }
    };
    let mask = Arc::new(make_mask(geometry, grid).unwrap());
    let u = GridFunction::from_real_fn(mask.clone(), |p| bump((p[0] * p[0] + p[1] * p[1]).sqrt()));
    FracOperator::new(SpectralParams::laplacian(s).unwrap(), mask)
        .form(&u)
        .unwrap()
}

#[test]
fn box_size_convergence_rate() {
    for (dim, h, lengths) in [
        (1usize, 1.0 / 32.0, vec![2.0, 4.0, 8.0, 16.0, 32.0]),
        (2, 1.0 / 8.0, vec![2.0, 4.0, 8.0, 16.0]),
    ] {
        for s in [0.25, 0.5, 0.75] {
            let forms: Vec<f64> = lengths.iter().map(|&l| form_on_box(s, h, l, dim)).collect();
            let diffs: Vec<f64> = forms.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            let ls = &lengths[..diffs.len()];
            let exponent = -log_log_slope(ls, &diffs);
            assert!(
                exponent >= dim as f64 + 2.0 * s - 0.3,
                "n={dim} s={s}: exponent {exponent} from {diffs:?}"
            );
        }
    }
}

#[test]
fn near_one_recovers_dirichlet_integral() {
    let h = 1.0 / 64.0;
    let grid = Grid::new(h, &[(64.0 / h) as usize]).unwrap();
    let mask = Arc::new(make_mask(Geometry::Interval { half_width: 1.0 }, grid).unwrap());
    let u = GridFunction::from_real_fn(mask.clone(), |p| bump(p[0]));
    let form = FracOperator::new(SpectralParams::laplacian(0.999).unwrap(), mask)
        .form(&u)
        .unwrap();
    let fine = 100_000;
    let dx = 2.0 / fine as f64;
    let dirichlet: f64 = (0..fine)
        .map(|i| {
            let x = -1.0 + (i as f64 + 0.5) * dx;
            let d = bump(x) * (-2.0 * x / (1.0 - x * x).powi(2));
            d * d * dx
        })
        .sum();
    assert!(
        (form - dirichlet).abs() < 0.05 * dirichlet,
        "{form} vs {dirichlet}"
    );
}
