//! Weyl quasimodes on the straight tube `ω × ℝ`, `ω = (-a, a)`:
//! `v_m(x, z) = φ_{s,κ}(x)·e^{iκz}·χ((z − z₀)/m)` with `φ_{s,κ}` the ground
//! state of the cross-section operator at frequency `κ`, and the decay of
//! `‖A v_m − Λ_{s,κ} v_m‖/‖v_m‖` in `m`.
//!
//! The cross mode and `Λ_{s,κ}` are computed on the x-axis grid of the
//! tube, and the residual is the Galerkin residual on a truncated tube that
//! contains every support.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigensolve::smallest_eigs;
use crate::error::{Error, Result};
use crate::extrapolate::log_log_slope;
use crate::fracop::{FracOperator, SpectralParams};
use crate::grid::{inner, make_mask, DomainMask, Geometry, Grid, GridFunction};
use crate::report::{num, Table};
use crate::waveguide::{tube_grid, x_box_ratio};

fn ramp(r: f64) -> f64 {
    if r > 0.0 {
        (-1.0 / r).exp()
    } else {
        0.0
    }
}

/// Smooth even cutoff: 1 on `[-1, 1]`, 0 outside `(-2, 2)`,
/// `f(2−|t|)/(f(2−|t|) + f(|t|−1))` in between with `f(r) = e^{−1/r}`.
///
/// | t    | χ(t)    |
/// |------|---------|
/// | 1.0  | 1       |
/// | 1.25 | 0.9351  |
/// | 1.5  | 0.5     |
/// | 1.75 | 0.0649  |
/// | 2.0  | 0       |
pub fn cutoff(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let a = ramp(2.0 - t);
        a / (a + ramp(t - 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylConfig {
    pub half_width: f64,
    pub s: f64,
    pub kappa: f64,
    pub spacing: f64,
    pub x_half_length: f64,
    pub widths: Vec<usize>,
    #[serde(default)]
    pub center: f64,
}

impl WeylConfig {
    /// `a = 1`, `h = 1/16`, default x-box, centred at 0.
    pub fn new(s: f64, kappa: f64, widths: Vec<usize>) -> Self {
        WeylConfig {
            half_width: 1.0,
            s,
            kappa,
            spacing: 1.0 / 16.0,
            x_half_length: x_box_ratio(s),
            widths,
            center: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        SpectralParams::new(self.s, self.kappa)?;
        if !(self.half_width > 0.0) {
            return Err(Error::param("half_width", "must be positive"));
        }
        if self.spacing > 1.0 / (8.0 * self.kappa + 8.0) {
            return Err(Error::param(
                "spacing",
                format!("h = {} exceeds 1/(8κ+8)", self.spacing),
            ));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::param("widths", "need positive widths"));
        }
        if !self.center.is_finite() {
            return Err(Error::param("center", "must be finite"));
        }
        Ok(())
    }

    pub fn max_width(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(0)
    }

    /// Truncation containing every support with a margin of 2.
    pub fn truncation(&self) -> f64 {
        self.center.abs() + 2.0 * self.max_width() as f64 + 2.0
    }

    pub fn grid(&self) -> Result<Grid> {
        tube_grid(self.spacing, self.x_half_length, self.truncation())
    }
}

/// Ground state of the cross-section operator at frequency `κ` on a
/// one-dimensional grid: positive, `h·Σφ² = 1`, stored on the whole box.
#[derive(Debug, Clone)]
pub struct CrossMode {
    pub s: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub grid: Grid,
    pub values: Vec<f64>,
}

pub fn cross_mode(half_width: f64, s: f64, kappa: f64, grid: Grid) -> Result<CrossMode> {
    let mask = Arc::new(make_mask(Geometry::Interval { half_width }, grid)?);
    let op = FracOperator::new(SpectralParams::new(s, kappa)?, mask);
    let r = smallest_eigs(&op, 1, 1e-10, 0)?;
    let phi = r
        .eigenvectors
        .into_iter()
        .next()
        .expect("one pair")
        .to_box();
    let values = phi.iter().map(|c| c.re).collect();
    Ok(CrossMode {
        s,
        kappa,
        lambda: r.eigenvalues[0],
        grid,
        values,
    })
}

#[derive(Debug, Clone)]
pub struct Quasimode {
    pub m: usize,
    pub kappa: f64,
    pub center: f64,
    pub v: GridFunction,
}

/// `v_m` on a truncated tube mask whose x-axis grid is the grid of `mode`.
pub fn build_quasimode(
    mode: &CrossMode,
    mask: Arc<DomainMask>,
    m: usize,
    center: f64,
) -> Result<Quasimode> {
    let truncation = match mask.geometry() {
        Geometry::TruncatedTube { truncation, .. } => *truncation,
        _ => {
            return Err(Error::Unsupported(
                "quasimodes live on truncated tubes".into(),
            ))
        }
    };
    if m == 0 {
        return Err(Error::param("m", "width must be positive"));
    }
    if truncation < center.abs() + 2.0 * m as f64 {
        return Err(Error::Geometry(format!(
            "truncation {truncation} does not contain the support of width {m} at {center}"
        )));
    }
    let grid = *mask.grid();
    if grid.dim() != 2
        || grid.points_along(0) != mode.grid.points_along(0)
        || grid.spacing() != mode.grid.spacing()
    {
        return Err(Error::MaskMismatch);
    }
    let h = grid.spacing();
    let lx = grid.half_length(0);
    let width = m as f64;
    let v = GridFunction::from_fn(mask, |p| {
        let i = ((p[0] + lx) / h).round() as usize;
        let z = p[1];
        mode.values[i] * cutoff((z - center) / width) * Complex64::from_polar(1.0, mode.kappa * z)
    });
    Ok(Quasimode {
        m,
        kappa: mode.kappa,
        center,
        v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylRow {
    pub m: usize,
    pub norm_sq: f64,
    pub residual: f64,
    pub rayleigh: f64,
}

/// `(‖A v − Λ v‖/‖v‖, ⟨A v, v⟩/‖v‖²)` for `A` on the mask of `q`.
pub fn residual_ratio(q: &Quasimode, op: &FracOperator, lambda: f64) -> Result<(f64, f64)> {
    let av = op.apply(&q.v)?;
    let norm_sq = q.v.norm_sq();
    if norm_sq == 0.0 {
        return Err(Error::ZeroVector);
    }
    let r = av.sub(&q.v.scaled(Complex64::new(lambda, 0.0)))?;
    Ok((
        (r.norm_sq() / norm_sq).sqrt(),
        inner(&av, &q.v)?.re / norm_sq,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub s: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub spacing: f64,
    pub truncation: f64,
    pub rows: Vec<WeylRow>,
    pub slope: f64,
    /// Residuals decrease in `m`; a failure points at a too-coarse grid.
    pub monotone: bool,
    /// `max |(‖v_m‖²/m) / (‖v_{m₀}‖²/m₀) − 1|` over the widths.
    pub norm_linearity: f64,
    /// `(m, r_{2m}/r_m)` for each width whose double is also present.
    pub doubling: Vec<(usize, f64)>,
}

impl DecayReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["m", "norm_sq", "residual", "rayleigh"]);
        for r in &self.rows {
            t.push(vec![
                r.m.to_string(),
                num(r.norm_sq),
                num(r.residual),
                num(r.rayleigh),
            ]);
        }
        t
    }
}

/// Residual table and least-squares slope of `log r_m` against `log m`.
pub fn decay_fit(cfg: &WeylConfig) -> Result<DecayReport> {
    cfg.validate()?;
    let mut widths = cfg.widths.clone();
    widths.sort_unstable();
    widths.dedup();
    if widths.len() < 4 {
        return Err(Error::param(
            "widths",
            "the decay fit needs four distinct widths",
        ));
    }
    let grid = cfg.grid()?;
    let mode = cross_mode(cfg.half_width, cfg.s, cfg.kappa, grid.axis_grid(0)?)?;
    let truncation = cfg.truncation();
    let mask = Arc::new(make_mask(
        Geometry::TruncatedTube {
            half_width: cfg.half_width,
            truncation,
        },
        grid,
    )?);
    let op = FracOperator::new(SpectralParams::laplacian(cfg.s)?, mask.clone());
    let rows = widths
        .iter()
        .map(|&m| {
            let q = build_quasimode(&mode, mask.clone(), m, cfg.center)?;
            let (residual, rayleigh) = residual_ratio(&q, &op, mode.lambda)?;
            Ok(WeylRow {
                m,
                norm_sq: q.v.norm_sq(),
                residual,
                rayleigh,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ms: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let rs: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    let per_width = rows[0].norm_sq / rows[0].m as f64;
    let norm_linearity = rows
        .iter()
        .map(|r| (r.norm_sq / r.m as f64 / per_width - 1.0).abs())
        .fold(0.0, f64::max);
    let doubling = rows
        .iter()
        .filter_map(|a| {
            rows.iter()
                .find(|b| b.m == 2 * a.m)
                .map(|b| (a.m, b.residual / a.residual))
        })
        .collect();
    Ok(DecayReport {
        s: cfg.s,
        kappa: cfg.kappa,
        lambda: mode.lambda,
        spacing: cfg.spacing,
        truncation,
        slope: log_log_slope(&ms, &rs),
        monotone: rs.windows(2).all(|w| w[1] < w[0]),
        norm_linearity,
        doubling,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_table() {
        assert_eq!(cutoff(0.3), 1.0);
        assert_eq!(cutoff(-1.0), 1.0);
        assert_eq!(cutoff(2.0), 0.0);
        assert_eq!(cutoff(-7.0), 0.0);
        assert!((cutoff(1.5) - 0.5).abs() < 1e-15);
        assert!((cutoff(1.25) - 0.9351).abs() < 1e-4);
        assert!((cutoff(1.75) - 0.0649).abs() < 1e-4);
        for i in 0..100 {
            let t = 1.0 + i as f64 / 100.0;
            assert!(cutoff(t + 0.01) <= cutoff(t));
            assert!((cutoff(t) + cutoff(3.0 - t) - 1.0).abs() < 1e-14);
        }
    }

    fn small(kappa: f64) -> (CrossMode, Arc<DomainMask>) {
        let cfg = WeylConfig {
            spacing: 1.0 / 8.0,
            kappa,
            ..WeylConfig::new(0.5, kappa, vec![4])
        };
        let grid = cfg.grid().unwrap();
        let mode = cross_mode(1.0, 0.5, kappa, grid.axis_grid(0).unwrap()).unwrap();
        let mask = make_mask(
            Geometry::TruncatedTube {
                half_width: 1.0,
                truncation: cfg.truncation(),
            },
            grid,
        )
        .unwrap();
        (mode, Arc::new(mask))
    }

    #[test]
    fn quasimode_shape() {
        let (mode, mask) = small(0.0);
        let q = build_quasimode(&mode, mask.clone(), 4, 0.0).unwrap();
        assert!(q.v.values().iter().all(|c| c.im == 0.0 && c.re >= 0.0));
        let (mode1, mask1) = small(0.5);
        let q1 = build_quasimode(&mode1, mask1.clone(), 4, 0.0).unwrap();
        let lx = mask1.grid().half_length(0);
        let h = mask1.grid().spacing();
        for (k, c) in q1.v.values().iter().enumerate() {
            let p = mask1.position(k);
            if p[1].abs() <= 4.0 {
                let i = ((p[0] + lx) / h).round() as usize;
                let want = mode1.values[i] * Complex64::from_polar(1.0, 0.5 * p[1]);
                assert!((c - want).norm() == 0.0);
            }
            if p[1].abs() >= 8.0 {
                assert_eq!(*c, Complex64::new(0.0, 0.0));
            }
        }
        assert!(build_quasimode(&mode, mask, 6, 0.0).is_err());
    }

    #[test]
    fn disjoint_supports_are_orthogonal() {
        let (mode, _) = small(0.0);
        let grid = tube_grid(1.0 / 8.0, 4.0, 20.0).unwrap();
        let mask = Arc::new(
            make_mask(
                Geometry::TruncatedTube {
                    half_width: 1.0,
                    truncation: 20.0,
                },
                grid,
            )
            .unwrap(),
        );
        let a = build_quasimode(&mode, mask.clone(), 4, -10.0).unwrap();
        let b = build_quasimode(&mode, mask, 4, 10.0).unwrap();
        assert_eq!(inner(&a.v, &b.v).unwrap().norm(), 0.0);
        assert!((a.v.norm_sq() - b.v.norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_above_threshold() {
        let (mode, mask) = small(0.0);
        let op = FracOperator::new(SpectralParams::laplacian(0.5).unwrap(), mask.clone());
        let q = build_quasimode(&mode, mask, 4, 0.0).unwrap();
        let (r, rq) = residual_ratio(&q, &op, mode.lambda).unwrap();
        assert!(r > 0.0);
        assert!(rq >= mode.lambda);
    }

    #[test]
    fn config_validation() {
        assert!(WeylConfig::new(1.0, 0.0, vec![4, 8, 16, 32])
            .validate()
            .is_err());
        assert!(WeylConfig::new(0.5, 2.0, vec![4, 8, 16, 32])
            .validate()
            .is_err());
        assert!(WeylConfig::new(0.5, 0.0, vec![]).validate().is_err());
        assert!(decay_fit(&WeylConfig::new(0.5, 0.0, vec![4, 8, 8])).is_err());
        assert_eq!(WeylConfig::new(0.5, 0.0, vec![4, 32]).truncation(), 66.0);
    }
}
