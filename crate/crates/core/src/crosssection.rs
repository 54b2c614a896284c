//! Experiments on the interval cross-section `ω = (-a, a)`: eigenvalue
//! tables under refinement, the two-term large-`k` asymptote, and the
//! Helmholtz band function `κ ↦ Λ_{s,κ}`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{dense_lowest, smallest_eigs};
use crate::error::{Error, Result};
use crate::extrapolate::{log_log_slope, richardson, Extrapolation};
use crate::fracop::{fcd_matrix_1d, FracOperator, SpectralParams};
use crate::grid::{make_mask, DomainMask, Geometry, Grid};
use crate::report::{num, Table};

/// Box half-length per unit cross-section half-width used by default.
pub const DEFAULT_BOX_RATIO: f64 = 64.0;

/// Interval `(-a, a)` on a box `[-L, L)`, at a sequence of halving spacings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSetup {
    pub half_width: f64,
    pub box_half_length: f64,
    pub spacings: Vec<f64>,
}

impl IntervalSetup {
    pub fn new(half_width: f64, spacings: Vec<f64>) -> Self {
        Self {
            half_width,
            box_half_length: DEFAULT_BOX_RATIO * half_width,
            spacings,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spacings.is_empty() {
            return Err(Error::param("spacings", "at least one spacing is required"));
        }
        for w in self.spacings.windows(2) {
            if ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
                return Err(Error::param(
                    "spacings",
                    format!("spacings must halve at each step ({} -> {})", w[0], w[1]),
                ));
            }
        }
        for &h in &self.spacings {
            self.grid(h)?;
        }
        Ok(())
    }

    pub fn grid(&self, h: f64) -> Result<Grid> {
        let points = 2.0 * self.box_half_length / h;
        if (points - points.round()).abs() > 1e-6 {
            return Err(Error::InvalidGrid(format!(
                "box half-length {} is not a multiple of h = {h}",
                self.box_half_length
            )));
        }
        Grid::new(h, &[points.round() as usize])
    }

    pub fn mask(&self, h: f64) -> Result<Arc<DomainMask>> {
        let geometry = Geometry::Interval {
            half_width: self.half_width,
        };
        Ok(Arc::new(make_mask(geometry, self.grid(h)?)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// Fourier symbol on the padded box.
    Fourier,
    /// Fractional centered differences (κ = 0 only).
    CenteredDifferences,
}

/// Lowest `k` eigenvalues and residuals on one interval grid.
pub fn interval_lowest(
    setup: &IntervalSetup,
    h: f64,
    params: SpectralParams,
    k: usize,
    discretization: Discretization,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mask = setup.mask(h)?;
    let (values, residuals, converged) = match discretization {
        Discretization::Fourier => {
            let op = FracOperator::new(params, mask);
            let r = smallest_eigs(&op, k, tol, 0)?;
            (r.eigenvalues, r.residuals, r.converged)
        }
        Discretization::CenteredDifferences => {
            let m = fcd_matrix_1d(&params, &mask)?;
            if k > m.nrows() {
                return Err(Error::param("k", "k exceeds the mask size"));
            }
            let r = dense_lowest(&m, k, tol)?;
            (r.values, r.residuals, r.converged)
        }
    };
    if let Some(i) = converged.iter().position(|&c| !c) {
        return Err(Error::NotConverged {
            stage: format!("interval eigenpairs at h = {h}"),
            detail: format!("pair {} residual {:e} > {tol:e}", i + 1, residuals[i]),
        });
    }
    Ok((values, residuals))
}

/// `λ_1..λ_k` per resolution plus their extrapolated limits.
#[derive(Debug, Clone, Serialize)]
pub struct EigenTable {
    pub s: f64,
    pub half_width: f64,
    pub discretization: Discretization,
    pub spacings: Vec<f64>,
    /// `values[r][k]`: eigenvalue `k+1` at resolution `r`.
    pub values: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
    /// Per eigenvalue; empty with a single resolution.
    pub extrapolated: Vec<Extrapolation>,
}

impl EigenTable {
    /// Extrapolated values, or the finest resolution when only one exists.
    pub fn best(&self) -> Vec<f64> {
        if self.extrapolated.is_empty() {
            self.values.last().cloned().unwrap_or_default()
        } else {
            self.extrapolated.iter().map(|e| e.value).collect()
        }
    }

    pub fn k_max(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Long format: one row per (resolution, k) and one per extrapolated k.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["k", "value", "residual", "resolution", "extrapolated"]);
        for (r, h) in self.spacings.iter().enumerate() {
            for k in 0..self.k_max() {
                t.push(vec![
                    (k + 1).to_string(),
                    num(self.values[r][k]),
                    num(self.residuals[r][k]),
                    num(*h),
                    "false".into(),
                ]);
            }
        }
        for (k, e) in self.extrapolated.iter().enumerate() {
            t.push(vec![
                (k + 1).to_string(),
                num(e.value),
                num(e.error_estimate),
                "0".into(),
                "true".into(),
            ]);
        }
        t
    }
}

/// Eigenvalue table on the interval across the configured resolutions.
pub fn eigen_table(
    setup: &IntervalSetup,
    params: SpectralParams,
    k_max: usize,
    discretization: Discretization,
    tol: f64,
) -> Result<EigenTable> {
    if k_max == 0 {
        return Err(Error::param("k_max", "k_max must be at least 1"));
    }
    setup.validate()?;
    let mut values = Vec::new();
    let mut residuals = Vec::new();
    for &h in &setup.spacings {
        let (v, r) = interval_lowest(setup, h, params, k_max, discretization, tol)?;
        values.push(v);
        residuals.push(r);
    }
    let extrapolated = if values.len() >= 2 {
        (0..k_max)
            .map(|k| richardson(&values.iter().map(|v| v[k]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(EigenTable {
        s: params.s,
        half_width: setup.half_width,
        discretization,
        spacings: setup.spacings.clone(),
        values,
        residuals,
        extrapolated,
    })
}

/// Two-term large-`k` estimate `(kπ/2 − (1−s)π/4)^{2s}` on `(-1, 1)`.
pub fn kwasnicki_estimate(k: usize, s: f64) -> f64 {
    (k as f64 * PI / 2.0 - (1.0 - s) * PI / 4.0).powf(2.0 * s)
}

/// `(kπ/(2a))^{2s}`, the `s`-th power of the `k`-th Dirichlet Laplacian
/// eigenvalue on `(-a, a)`.
pub fn laplacian_power(k: usize, s: f64, half_width: f64) -> f64 {
    (k as f64 * PI / (2.0 * half_width)).powf(2.0 * s)
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoteRow {
    pub k: usize,
    pub lambda: f64,
    pub estimate: f64,
    pub deviation: f64,
    /// `(kπ/2)^{2s} − λ_k`.
    pub spectral_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoteReport {
    pub s: f64,
    pub rows: Vec<AsymptoteRow>,
    /// Least-squares slope of `log|deviation|` against `log k` over the
    /// fit window.
    pub fit_exponent: f64,
    pub fit_window: (usize, usize),
}

impl AsymptoteReport {
    pub fn max_abs_deviation(&self, k_lo: usize, k_hi: usize) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.k >= k_lo && r.k <= k_hi)
            .map(|r| r.deviation.abs())
            .fold(0.0, f64::max)
    }

    pub fn min_spectral_margin(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.spectral_margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["k", "lambda", "estimate", "deviation", "spectral_margin"]);
        for r in &self.rows {
            t.push(vec![
                r.k.to_string(),
                num(r.lambda),
                num(r.estimate),
                num(r.deviation),
                num(r.spectral_margin),
            ]);
        }
        t
    }
}

/// Deviations of the table's best values from [`kwasnicki_estimate`] for
/// `k ∈ [k_lo, k_hi]`, with the decay fitted over `k ≥ max(k_lo, 3)`.
pub fn asymptote_report(table: &EigenTable, k_lo: usize, k_hi: usize) -> Result<AsymptoteReport> {
    if table.half_width != 1.0 {
        return Err(Error::Unsupported(
            "the two-term estimate is stated on (-1, 1)".into(),
        ));
    }
    if k_lo == 0 || k_hi < k_lo || k_hi > table.k_max() {
        return Err(Error::param(
            "k range",
            format!(
                "[{k_lo}, {k_hi}] is not inside the table (k_max = {})",
                table.k_max()
            ),
        ));
    }
    let best = table.best();
    let rows: Vec<AsymptoteRow> = (k_lo..=k_hi)
        .map(|k| {
            let lambda = best[k - 1];
            let estimate = kwasnicki_estimate(k, table.s);
            AsymptoteRow {
                k,
                lambda,
                estimate,
                deviation: lambda - estimate,
                spectral_margin: laplacian_power(k, table.s, 1.0) - lambda,
            }
        })
        .collect();
    let window = (k_lo.max(3), k_hi);
    let fit: Vec<&AsymptoteRow> = rows.iter().filter(|r| r.k >= window.0).collect();
    let fit_exponent = if fit.len() >= 2 {
        let ks: Vec<f64> = fit.iter().map(|r| r.k as f64).collect();
        let ds: Vec<f64> = fit.iter().map(|r| r.deviation.abs().max(1e-300)).collect();
        log_log_slope(&ks, &ds)
    } else {
        f64::NAN
    };
    Ok(AsymptoteReport {
        s: table.s,
        rows,
        fit_exponent,
        fit_window: window,
    })
}

/// Default sweep: `κ = 0` followed by 32 geometric points from
/// `κ_max/100` to `κ_max = 8·Λ_s^{1/(2s)}`.
pub fn default_kappa_grid(lambda_s: f64, s: f64) -> Vec<f64> {
    let kmax = 8.0 * lambda_s.powf(1.0 / (2.0 * s));
    let kmin = kmax / 100.0;
    let mut grid = vec![0.0];
    grid.extend((0..32).map(|i| kmin * (kmax / kmin).powf(i as f64 / 31.0)));
    grid
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BandSample {
    pub kappa: f64,
    pub value: f64,
    pub residual: f64,
    /// `κ^{2s}`.
    pub lower: f64,
    /// `(λ₁(−Δ_ω) + κ²)^s`.
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BandFunction {
    pub s: f64,
    pub half_width: f64,
    pub spacing: f64,
    pub box_half_length: f64,
    pub samples: Vec<BandSample>,
}

impl BandFunction {
    pub fn strictly_increasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].value > w[0].value)
    }

    /// Smallest of `Λ_{s,κ} − κ^{2s}` and `upper − Λ_{s,κ}` over the sweep.
    pub fn squeeze_margin(&self) -> f64 {
        self.samples
            .iter()
            .map(|b| (b.value - b.lower).min(b.upper - b.value))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["kappa", "value", "residual", "resolution", "lower", "upper"]);
        for b in &self.samples {
            t.push(vec![
                num(b.kappa),
                num(b.value),
                num(b.residual),
                num(self.spacing),
                num(b.lower),
                num(b.upper),
            ]);
        }
        t
    }
}

/// `Λ_{s,κ}` at every `κ` of a sorted grid starting at 0, on one
/// resolution `h`.
pub fn band_sweep(
    setup: &IntervalSetup,
    h: f64,
    s: f64,
    kappas: &[f64],
    tol: f64,
) -> Result<BandFunction> {
    if kappas.first() != Some(&0.0) {
        return Err(Error::param("kappas", "the sweep must start at kappa = 0"));
    }
    if kappas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "kappas",
            "the sweep must be strictly increasing",
        ));
    }
    let dirichlet = (PI / (2.0 * setup.half_width)).powi(2);
    let samples = kappas
        .par_iter()
        .map(|&kappa| {
            let params = SpectralParams::new(s, kappa)?;
            let (v, r) = interval_lowest(setup, h, params, 1, Discretization::Fourier, tol)?;
            Ok(BandSample {
                kappa,
                value: v[0],
                residual: r[0],
                lower: kappa.powf(2.0 * s),
                upper: (dirichlet + kappa * kappa).powf(s),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for w in samples.windows(2) {
        if w[1].value < w[0].value - tol {
            return Err(Error::Discretization(format!(
                "band decreases between kappa = {} and {} ({} -> {})",
                w[0].kappa, w[1].kappa, w[0].value, w[1].value
            )));
        }
    }
    Ok(BandFunction {
        s,
        half_width: setup.half_width,
        spacing: h,
        box_half_length: setup.box_half_length,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kwasnicki_values() {
        assert!((kwasnicki_estimate(1, 0.5) - 3.0 * PI / 8.0).abs() < 1e-14);
        assert!((kwasnicki_estimate(10, 0.5) - (5.0 * PI - PI / 8.0)).abs() < 1e-12);
        let near_one = kwasnicki_estimate(1, 0.999);
        assert!((near_one / (PI / 2.0).powi(2) - 1.0).abs() < 0.01);
    }

    #[test]
    fn setup_validation() {
        let bad = IntervalSetup::new(1.0, vec![0.1, 0.04]);
        assert!(bad.validate().is_err());
        let odd = IntervalSetup {
            half_width: 1.0,
            box_half_length: 3.0,
            spacings: vec![0.125],
        };
        assert!(odd.validate().is_err());
        assert!(IntervalSetup::new(1.0, vec![1.0 / 32.0, 1.0 / 64.0])
            .validate()
            .is_ok());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_kappa_grid(1.0, 0.5);
        assert_eq!(g.len(), 33);
        assert_eq!(g[0], 0.0);
        assert!((g[32] - 8.0).abs() < 1e-12);
        assert!((g[1] - 0.08).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn small_table_is_consistent_between_paths() {
        let setup = IntervalSetup::new(1.0, vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]);
        let p = SpectralParams::laplacian(0.5).unwrap();
        let a = eigen_table(&setup, p, 2, Discretization::Fourier, 1e-8).unwrap();
        let b = eigen_table(&setup, p, 2, Discretization::CenteredDifferences, 1e-8).unwrap();
        for k in 0..2 {
            let (x, y) = (a.extrapolated[k].value, b.extrapolated[k].value);
            assert!((x - y).abs() < 0.02 * x, "k={k}: {x} vs {y}");
        }
        assert_eq!(a.to_table().len(), 3 * 2 + 2);
    }

    #[test]
    fn band_rejects_bad_grids() {
        let setup = IntervalSetup::new(1.0, vec![1.0 / 16.0]);
        assert!(band_sweep(&setup, 1.0 / 16.0, 0.5, &[0.5, 1.0], 1e-8).is_err());
        assert!(band_sweep(&setup, 1.0 / 16.0, 0.5, &[0.0, 1.0, 1.0], 1e-8).is_err());
    }

    #[test]
    fn small_band_is_squeezed() {
        let setup = IntervalSetup::new(1.0, vec![1.0 / 32.0]);
        let band = band_sweep(&setup, 1.0 / 32.0, 0.5, &[0.0, 0.5, 2.0, 8.0], 1e-8).unwrap();
        assert!(band.strictly_increasing());
        assert!(band.squeeze_margin() > 0.0);
    }
}
