//! Caffarelli–Silvestre extension on the padded box.
//!
//! The extension `U(x, y)` of a trace `u` solves `div(y^{1−2s}∇U) = 0` in the
//! upper half-space. In Fourier variables it is the multiplier
//! `ψ(|ξ|y)` with `ψ(t) = 2^{1−s}/Γ(s)·t^s·K_s(t)`, which is what
//! [`extend`] applies level by level; the Poisson kernel itself is exposed
//! for pointwise checks. The weighted energy `∫∫ y^{1−2s}|∇U|²` then ties
//! back to the quadratic form through the constant `C_s`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::boxfft::BoxTransform;
use crate::error::{Error, Result};
use crate::extrapolate::richardson_known;
use crate::fracop::{FracOperator, SpectralParams};
use crate::grid::{make_mask, Geometry, Grid, GridFunction};
use crate::report::{num, Table};

/// `C_s = 4^s Γ(s+1) / (2s Γ(1−s)) = 4^s Γ(s) / (2 Γ(1−s))`.
pub fn c_constant(s: f64) -> f64 {
    4f64.powf(s) * gamma(s) / (2.0 * gamma(1.0 - s))
}

/// `P_s(x, y) = Γ((n+2s)/2)/(π^{n/2}Γ(s)) · y^{2s}/(|x|²+y²)^{n/2+s}`,
/// with `n = x.len()`.
pub fn poisson_kernel(x: &[f64], y: f64, s: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::param("y", format!("y = {y} must be positive")));
    }
    let n = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let c = gamma((n + 2.0 * s) / 2.0) / (PI.powf(n / 2.0) * gamma(s));
    Ok(c * y.powf(2.0 * s) / (r2 + y * y).powf(n / 2.0 + s))
}

/// Modified Bessel function `K_ν(t)`, `t > 0`, from
/// `∫_0^∞ e^{−t cosh u} cosh(νu) du` by the trapezoid rule.
pub fn bessel_k(nu: f64, t: f64) -> f64 {
    let step = 0.25f64.min(0.6 / t.sqrt());
    let mut sum = 0.5 * (-t).exp();
    let mut k = 1;
    loop {
        let u = k as f64 * step;
        let excess = t * (u.cosh() - 1.0);
        if excess > 40.0 {
            break;
        }
        sum += (-t - excess).exp() * (nu * u).cosh();
        k += 1;
    }
    sum * step
}

/// Fourier multiplier of the extension, `ψ(0) = 1`, decreasing to 0.
pub fn extension_multiplier(s: f64, t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t > 700.0 {
        0.0
    } else {
        2f64.powf(1.0 - s) / gamma(s) * t.powf(s) * bessel_k(s, t)
    }
}

/// `∫_0^∞ f` by the exp-sinh rule `x = exp(π/2·sinh t)`, halving the
/// step until two successive values agree to `tol` relative.
pub fn half_line_quadrature(f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let eval = |step: f64| -> f64 {
        let mut sum = 0.0;
        let kmax = (4.5 / step).ceil() as i64;
        for k in -kmax..=kmax {
            let t = k as f64 * step;
            let x = (0.5 * PI * t.sinh()).exp();
            let w = x * 0.5 * PI * t.cosh();
            if x.is_finite() && w.is_finite() && x > 0.0 {
                let v = f(x) * w;
                if v.is_finite() {
                    sum += v;
                }
            }
        }
        sum * step
    };
    let mut step = 0.5;
    let mut prev = eval(step);
    for _ in 0..10 {
        step /= 2.0;
        let cur = eval(step);
        if (cur - prev).abs() <= tol * cur.abs() {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// `∫_ℝ P_s(x, y) dx` in one dimension.
pub fn kernel_mass(s: f64, y: f64) -> Result<f64> {
    poisson_kernel(&[0.0], y, s)?;
    Ok(2.0 * half_line_quadrature(|x| poisson_kernel(&[x], y, s).unwrap_or(0.0), 1e-13))
}

/// Grading exponent of the y-mesh: `max(2, 1/s, 2/(2−2s))`.
pub fn grading_exponent(s: f64) -> f64 {
    2f64.max(1.0 / s).max(2.0 / (2.0 - 2.0 * s))
}

/// Levels `y_j = Y·(j/M)^γ`, `j = 0..=M`.
pub fn graded_mesh(y_max: f64, levels: usize, grading: f64) -> Vec<f64> {
    (0..=levels)
        .map(|j| y_max * (j as f64 / levels as f64).powf(grading))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExtensionField {
    pub s: f64,
    pub base: GridFunction,
    pub grading: f64,
    pub y_mesh: Vec<f64>,
    /// `slices[j]`: `U(·, y_j)` on the whole box (row-major).
    pub slices: Vec<Vec<f64>>,
}

/// Extension of a real trace `u` at the levels of `y_mesh` (starting at 0).
pub fn extend(u: &GridFunction, s: f64, y_mesh: &[f64], grading: f64) -> Result<ExtensionField> {
    SpectralParams::laplacian(s)?;
    if y_mesh.first() != Some(&0.0) || y_mesh.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "y_mesh",
            "levels must start at 0 and increase",
        ));
    }
    if u.values().iter().any(|v| v.im != 0.0) {
        return Err(Error::Unsupported(
            "the extension is implemented for real traces".into(),
        ));
    }
    let grid = *u.mask().grid();
    let transform = BoxTransform::new(grid);
    let base_box = u.to_box();
    let mut spectrum = base_box.clone();
    transform.forward(&mut spectrum);
    let xi: Vec<f64> = (0..grid.len())
        .map(|f| {
            let [a, b] = grid.unflatten(f);
            let x0 = grid.frequency(0, a);
            let x1 = if grid.dim() == 2 {
                grid.frequency(1, b)
            } else {
                0.0
            };
            (x0 * x0 + x1 * x1).sqrt()
        })
        .collect();
    let slices = y_mesh
        .par_iter()
        .map(|&y| {
            if y == 0.0 {
                return base_box.iter().map(|c| c.re).collect();
            }
            let mut data: Vec<Complex64> = spectrum
                .iter()
                .zip(&xi)
                .map(|(c, &k)| c * extension_multiplier(s, k * y))
                .collect();
            transform.inverse(&mut data);
            data.into_iter().map(|c| c.re).collect()
        })
        .collect();
    Ok(ExtensionField {
        s,
        base: u.clone(),
        grading,
        y_mesh: y_mesh.to_vec(),
        slices,
    })
}

impl ExtensionField {
    pub fn grid(&self) -> &Grid {
        self.base.mask().grid()
    }

    pub fn sup_norm(&self, level: usize) -> f64 {
        self.slices[level].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(x, y, value)` rows for box points with `|x_i| <= x_limit`.
    pub fn to_table(&self, x_limit: f64) -> Table {
        let grid = *self.grid();
        let mut header = vec!["x"];
        if grid.dim() == 2 {
            header.push("x2");
        }
        header.extend(["y", "value"]);
        let mut t = Table::new(&header);
        for (j, slice) in self.slices.iter().enumerate() {
            for (f, v) in slice.iter().enumerate() {
                let p = grid.position(f);
                if p[..grid.dim()].iter().any(|c| c.abs() > x_limit) {
                    continue;
                }
                let mut row = vec![num(p[0])];
                if grid.dim() == 2 {
                    row.push(num(p[1]));
                }
                row.push(num(self.y_mesh[j]));
                row.push(num(*v));
                t.push(row);
            }
        }
        t
    }
}

fn gradient_sq(grid: &Grid, slice: &[f64]) -> f64 {
    let h = grid.spacing();
    let n0 = grid.points_along(0);
    let n1 = grid.points_along(1);
    let mut sum = 0.0;
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            let at = |a: usize, b: usize| slice[a * n1 + b];
            let d0 = (at((i0 + 1) % n0, i1) - at((i0 + n0 - 1) % n0, i1)) / (2.0 * h);
            sum += d0 * d0;
            if grid.dim() == 2 {
                let d1 = (at(i0, (i1 + 1) % n1) - at(i0, (i1 + n1 - 1) % n1)) / (2.0 * h);
                sum += d1 * d1;
            }
        }
    }
    sum
}

/// `∫∫ y^{1−2s}|∇W|²` for a field given by its slices: piecewise linear in
/// `y` with the weight integrated exactly per cell, centered differences in
/// `x`, and the x-gradient averaged over the two levels of a cell.
pub fn weighted_energy(grid: &Grid, s: f64, y_mesh: &[f64], slices: &[Vec<f64>]) -> Result<f64> {
    if y_mesh.len() < 3 {
        return Err(Error::param(
            "y_mesh",
            "the energy needs at least three levels",
        ));
    }
    let vol = grid.cell_volume();
    let p = 2.0 - 2.0 * s;
    let grads: Vec<f64> = slices.par_iter().map(|sl| gradient_sq(grid, sl)).collect();
    let mut energy = 0.0;
    for j in 0..y_mesh.len() - 1 {
        let (y0, y1) = (y_mesh[j], y_mesh[j + 1]);
        let weight = (y1.powf(p) - y0.powf(p)) / p;
        let dy = y1 - y0;
        let vertical: f64 = slices[j + 1]
            .iter()
            .zip(&slices[j])
            .map(|(a, b)| ((a - b) / dy).powi(2))
            .sum();
        energy += weight * vol * (vertical + 0.5 * (grads[j] + grads[j + 1]));
    }
    Ok(energy)
}

pub fn dirichlet_energy(field: &ExtensionField) -> Result<f64> {
    weighted_energy(field.grid(), field.s, &field.y_mesh, &field.slices)
}

/// Trace profiles with compact support in `(c − r, c + r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `exp(−1/(1−t²))`, `t = (x−c)/r`.
    MollifiedBump { center: f64, radius: f64 },
    /// Sum of two mollified bumps.
    DoubleBump {
        centers: [f64; 2],
        radius: f64,
        weights: [f64; 2],
    },
    /// `(1 − x²)_+^s`, whose image is the constant `Γ(2s+1)` on `(−1, 1)`.
    Getoor,
}

fn mollified(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

impl Profile {
    pub fn eval(&self, x: f64, s: f64) -> f64 {
        match self {
            Profile::MollifiedBump { center, radius } => mollified((x - center) / radius),
            Profile::DoubleBump {
                centers,
                radius,
                weights,
            } => {
                weights[0] * mollified((x - centers[0]) / radius)
                    + weights[1] * mollified((x - centers[1]) / radius)
            }
            Profile::Getoor => (1.0 - x * x).max(0.0).powf(s),
        }
    }

    /// Half-width of an interval centred at 0 containing the support.
    pub fn reach(&self) -> f64 {
        match self {
            Profile::MollifiedBump { center, radius } => center.abs() + radius,
            Profile::DoubleBump {
                centers, radius, ..
            } => centers[0].abs().max(centers[1].abs()) + radius,
            Profile::Getoor => 1.0,
        }
    }

    /// The shipped smooth profiles.
    pub fn shipped() -> Vec<Profile> {
        vec![
            Profile::MollifiedBump {
                center: 0.0,
                radius: 1.0,
            },
            Profile::DoubleBump {
                centers: [-0.4, 0.5],
                radius: 0.5,
                weights: [1.0, 0.6],
            },
        ]
    }
}

/// Discretization of the trace and the y-direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub spacing: f64,
    pub box_half_length: f64,
    pub levels: usize,
    pub y_max: f64,
}

impl QuadratureConfig {
    pub const REFERENCE: QuadratureConfig = QuadratureConfig {
        spacing: 1.0 / 32.0,
        box_half_length: 64.0,
        levels: 64,
        y_max: 16.0,
    };

    /// Half the spacing and twice the levels.
    pub fn refined(&self) -> QuadratureConfig {
        QuadratureConfig {
            spacing: self.spacing / 2.0,
            levels: 2 * self.levels,
            ..*self
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        let n = 2.0 * self.box_half_length / self.spacing;
        if (n - n.round()).abs() > 1e-6 {
            return Err(Error::InvalidGrid(
                "box half-length is not a multiple of h".into(),
            ));
        }
        Grid::new(self.spacing, &[n.round() as usize])
    }
}

/// Samples `profile` on the interval mask `(−r, r)` of the config grid.
pub fn sample_profile(profile: &Profile, s: f64, cfg: &QuadratureConfig) -> Result<GridFunction> {
    let mask = make_mask(
        Geometry::Interval {
            half_width: profile.reach(),
        },
        cfg.grid()?,
    )?;
    Ok(GridFunction::from_real_fn(mask.into(), |p| {
        profile.eval(p[0], s)
    }))
}

pub fn extend_with(u: &GridFunction, s: f64, cfg: &QuadratureConfig) -> Result<ExtensionField> {
    let grading = grading_exponent(s);
    extend(u, s, &graded_mesh(cfg.y_max, cfg.levels, grading), grading)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyIdentity {
    pub s: f64,
    pub form: f64,
    pub extension_energy: f64,
    /// `C_s·E_s(U)`.
    pub scaled_energy: f64,
    pub relative_error: f64,
    /// Estimated energy beyond `Y_max` (not included).
    pub tail_estimate: f64,
    pub grading: f64,
}

/// `|a_s[u] − C_s E_s(U)| / a_s[u]` for a trace `u`.
pub fn energy_identity(u: &GridFunction, s: f64, cfg: &QuadratureConfig) -> Result<EnergyIdentity> {
    let op = FracOperator::new(SpectralParams::laplacian(s)?, u.mask().clone());
    let form = op.form(u)?;
    let field = extend_with(u, s, cfg)?;
    let energy = dirichlet_energy(&field)?;
    let grid = field.grid();
    let last = field.slices.len() - 1;
    let y = cfg.y_max;
    // energy density at Y decays like y^{-n-1-2s}
    let density =
        y.powf(1.0 - 2.0 * s) * grid.cell_volume() * gradient_sq(grid, &field.slices[last]);
    let tail_estimate = density * y / (grid.dim() as f64 + 2.0 * s);
    let scaled = c_constant(s) * energy;
    Ok(EnergyIdentity {
        s,
        form,
        extension_energy: energy,
        scaled_energy: scaled,
        relative_error: (form - scaled).abs() / form,
        tail_estimate,
        grading: field.grading,
    })
}

/// Energy identity for one of the profiles.
pub fn energy_identity_check(
    profile: &Profile,
    s: f64,
    cfg: &QuadratureConfig,
) -> Result<EnergyIdentity> {
    energy_identity(&sample_profile(profile, s, cfg)?, s, cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimalityReport {
    pub amplitudes: Vec<f64>,
    pub energies: Vec<f64>,
    /// Least-squares `E(t) ≈ c0 + c1 t + c2 t²`.
    pub fit: [f64; 3],
}

impl MinimalityReport {
    pub fn energy_at_zero(&self) -> Option<f64> {
        self.amplitudes
            .iter()
            .position(|&t| t == 0.0)
            .map(|i| self.energies[i])
    }
}

/// Energies of `U + t·v` where `v` vanishes at `y = 0`; `perturbation`
/// maps `(x, y)` to the value of `v` (its value at `y = 0` is ignored).
pub fn minimality_check(
    field: &ExtensionField,
    perturbation: impl Fn([f64; 2], f64) -> f64 + Sync,
    amplitudes: &[f64],
) -> Result<MinimalityReport> {
    let grid = *field.grid();
    let v: Vec<Vec<f64>> = field
        .y_mesh
        .iter()
        .map(|&y| {
            (0..grid.len())
                .map(|f| {
                    if y == 0.0 {
                        0.0
                    } else {
                        perturbation(grid.position(f), y)
                    }
                })
                .collect()
        })
        .collect();
    let energies = amplitudes
        .iter()
        .map(|&t| {
            let slices: Vec<Vec<f64>> = field
                .slices
                .iter()
                .zip(&v)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + t * y).collect())
                .collect();
            weighted_energy(&grid, field.s, &field.y_mesh, &slices)
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = quadratic_fit(amplitudes, &energies);
    Ok(MinimalityReport {
        amplitudes: amplitudes.to_vec(),
        energies,
        fit,
    })
}

fn quadratic_fit(t: &[f64], e: &[f64]) -> [f64; 3] {
    let a = nalgebra::DMatrix::from_fn(t.len(), 3, |i, j| t[i].powi(j as i32));
    let b = nalgebra::DVector::from_column_slice(e);
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .expect("least squares solve");
    [sol[0], sol[1], sol[2]]
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConormalEstimate {
    pub value: f64,
    /// Estimates from the two lowest level pairs.
    pub pair_estimates: [f64; 2],
    /// The two estimates disagree by more than 0.1%.
    pub flagged: bool,
}

/// `−C_s lim_{y→0} y^{1−2s} ∂_y U(x, y)` at the grid point nearest `x`.
/// The extension is evaluated at the levels `ε, 2ε, 4ε` with `ε = h/1000`
/// and extrapolated in `y` with the known correction order `2 − 2s`.
pub fn conormal_limit(field: &ExtensionField, x: [f64; 2]) -> Result<ConormalEstimate> {
    let grid = field.grid();
    let mut idx = [0usize; 2];
    for (axis, slot) in idx.iter_mut().enumerate().take(grid.dim()) {
        let t = ((x[axis] + grid.half_length(axis)) / grid.spacing()).round();
        if t < 0.0 || t >= grid.points_along(axis) as f64 {
            return Err(Error::param("x", "point outside the box"));
        }
        *slot = t as usize;
    }
    let f = grid.flatten(idx);
    let s = field.s;
    let eps = 1e-3 * grid.spacing();
    let levels = [0.0, eps, 2.0 * eps, 4.0 * eps];
    let near = extend(&field.base, s, &levels, field.grading)?;
    let c = c_constant(s);
    let u0 = near.slices[0][f];
    let g = |j: usize| -c * 2.0 * s * (near.slices[j][f] - u0) / levels[j].powf(2.0 * s);
    let order = 2.0 - 2.0 * s;
    let first = richardson_known(g(2), g(1), 2.0, order).value;
    let second = richardson_known(g(3), g(2), 2.0, order).value;
    let flagged = (first - second).abs() > 1e-3 * first.abs().max(1e-12);
    Ok(ConormalEstimate {
        value: first,
        pair_estimates: [first, second],
        flagged,
    })
}
