//! Tube experiments in two dimensions (cross-section `ω = (-a, a)`):
//! the threshold `Λ_s`, Dirichlet truncations of straight and locally
//! enlarged tubes, bound-state detection below the threshold, the small-`s`
//! probe, and truncated multi-tubes.
//!
//! Every truncation schedule is solved on one common grid sized for the
//! largest truncation, so that the masks are nested and `λ₁(T)` is
//! monotone exactly. The threshold is computed on the x-axis grid of the
//! tube itself; the z-fibres of the tube symbol dominate the
//! one-dimensional symbol, which makes `λ₁(tube) ≥ Λ_s` hold discretely.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::crosssection::{eigen_table, Discretization, IntervalSetup};
use crate::eigensolve::{rayleigh, smallest_eigs};
use crate::error::{Error, Result};
use crate::extrapolate::Extrapolation;
use crate::fracop::{FracOperator, SpectralParams};
use crate::grid::{interpolate, make_mask, Arm, DomainMask, Geometry, Grid, GridFunction};
use crate::report::{num, Table};

/// Default box half-length across the tube, per unit half-width: 4 for
/// `s >= 1/2` and 16 below, where the periodic images of the slowly
/// decaying kernel shift `Λ_s` visibly on the smaller box.
pub fn x_box_ratio(s: f64) -> f64 {
    if s < 0.5 {
        16.0
    } else {
        4.0
    }
}

/// Rectangular enlargement `[a, a + b) × (-ℓ, ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub depth: f64,
    pub half_length: f64,
}

/// Grid for a tube of half-width `a` truncated at `t_max`: the x-axis box
/// has half-length `x_half_length`, the z-axis box is the smallest padded
/// one.
pub fn tube_grid(h: f64, x_half_length: f64, t_max: f64) -> Result<Grid> {
    let nx = 2.0 * x_half_length / h;
    if (nx - nx.round()).abs() > 1e-6 {
        return Err(Error::InvalidGrid(format!(
            "x box half-length {x_half_length} is not a multiple of h = {h}"
        )));
    }
    let z = Grid::covering(h, &[t_max])?;
    Grid::new(h, &[nx.round() as usize, z.points_along(0)])
}

/// `Λ_s` of `(-a, a)` on a one-dimensional grid (dense).
pub fn threshold_on(half_width: f64, s: f64, grid: Grid) -> Result<f64> {
    let mask = make_mask(Geometry::Interval { half_width }, grid)?;
    let op = FracOperator::new(SpectralParams::laplacian(s)?, Arc::new(mask));
    let r = smallest_eigs(&op, 1, 1e-9, 0)?;
    Ok(r.eigenvalues[0])
}

/// Extrapolated `Λ_s` with its error estimate.
pub fn threshold(setup: &IntervalSetup, s: f64) -> Result<Extrapolation> {
    let t = eigen_table(
        setup,
        SpectralParams::laplacian(s)?,
        1,
        Discretization::Fourier,
        1e-9,
    )?;
    t.extrapolated.first().copied().ok_or_else(|| {
        Error::param(
            "spacings",
            "threshold extrapolation needs two or more spacings",
        )
    })
}

fn tube_geometry(half_width: f64, truncation: f64, bump: Option<Bump>) -> Result<Geometry> {
    Ok(match bump {
        None => Geometry::TruncatedTube {
            half_width,
            truncation,
        },
        Some(b) => {
            if truncation > b.half_length && truncation < b.half_length + 2.0 {
                return Err(Error::Geometry(format!(
                    "truncation {truncation} must exceed the bump half-length {} by 2",
                    b.half_length
                )));
            }
            Geometry::EnlargedTube {
                half_width,
                truncation,
                bump_depth: b.depth,
                bump_half_length: b.half_length,
            }
        }
    })
}

#[derive(Debug, Clone)]
pub struct TubeEigen {
    pub truncation: f64,
    pub lambda: f64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub mask_size: usize,
    pub ground_state: GridFunction,
}

/// Lowest eigenpair of the truncated (optionally enlarged) tube on `grid`.
pub fn truncated_tube_lowest(
    half_width: f64,
    s: f64,
    truncation: f64,
    bump: Option<Bump>,
    grid: Grid,
    tol: f64,
    seed: u64,
) -> Result<TubeEigen> {
    let geometry = tube_geometry(half_width, truncation, bump)?;
    let mask = Arc::new(make_mask(geometry, grid)?);
    let op = FracOperator::new(SpectralParams::laplacian(s)?, mask);
    let r = smallest_eigs(&op, 1, tol, seed)?;
    Ok(TubeEigen {
        truncation,
        lambda: r.eigenvalues[0],
        residual: r.residuals[0],
        converged: r.converged[0],
        iterations: r.iterations,
        mask_size: op.len(),
        ground_state: r.eigenvectors.into_iter().next().expect("one pair"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    BoundState,
    NoBoundStateDetected,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::BoundState => "bound_state",
            Verdict::NoBoundStateDetected => "no_bound_state_detected",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Verdict rule: a bound state needs `gap > 3·err`, its absence
/// `|gap| <= err`.
pub fn verdict(gap: f64, error_estimate: f64, converged: bool) -> Verdict {
    if !converged || !gap.is_finite() || !error_estimate.is_finite() {
        Verdict::Inconclusive
    } else if gap > 3.0 * error_estimate {
        Verdict::BoundState
    } else if gap.abs() <= error_estimate {
        Verdict::NoBoundStateDetected
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundStateConfig {
    pub half_width: f64,
    pub s: f64,
    pub bump: Option<Bump>,
    pub truncations: Vec<f64>,
    /// Coarse then fine; the fine spacing is half the coarse one.
    pub spacings: [f64; 2],
    pub x_half_length: f64,
    pub tol: f64,
    pub seed: u64,
}

impl BoundStateConfig {
    pub fn new(s: f64, bump: Option<Bump>, truncations: Vec<f64>, spacings: [f64; 2]) -> Self {
        Self {
            half_width: 1.0,
            s,
            bump,
            truncations,
            spacings,
            x_half_length: x_box_ratio(s),
            tol: 1e-8,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        SpectralParams::laplacian(self.s)?;
        if self.truncations.len() < 2 {
            return Err(Error::param(
                "truncations",
                "at least two truncations are required",
            ));
        }
        if self.truncations.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("truncations", "truncations must increase"));
        }
        if ((self.spacings[0] / self.spacings[1]) - 2.0).abs() > 1e-9 {
            return Err(Error::param(
                "spacings",
                "the fine spacing must be half the coarse one",
            ));
        }
        let reach = self.half_width + self.bump.map_or(0.0, |b| b.depth);
        if self.x_half_length < 2.0 * reach - 1e-12 {
            return Err(Error::InsufficientPadding(format!(
                "x box half-length {} below twice the cross-section reach {reach}",
                self.x_half_length
            )));
        }
        for &t in &self.truncations {
            tube_geometry(self.half_width, t, self.bump)?;
        }
        if let Some(b) = self.bump {
            if !(b.depth > 0.0 && b.half_length > 0.0) {
                return Err(Error::Geometry(
                    "bump depth and half-length must be positive".into(),
                ));
            }
            if self.truncations[0] <= b.half_length {
                return Err(Error::Geometry(format!(
                    "truncation inside bump (T = {} <= l = {})",
                    self.truncations[0], b.half_length
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationRow {
    pub spacing: f64,
    pub truncation: f64,
    pub lambda: f64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub mask_size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    /// Rayleigh quotient of the fine ground state interpolated onto the
    /// grid of half its spacing.
    pub refined_rayleigh: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundStateReport {
    pub s: f64,
    pub half_width: f64,
    pub bump_depth: f64,
    pub bump_half_length: f64,
    pub truncations: Vec<f64>,
    pub spacings: [f64; 2],
    /// `Λ_s` on the x-axis grid of each resolution.
    pub threshold: [f64; 2],
    pub threshold_error: f64,
    pub rows: Vec<TruncationRow>,
    /// `Λ_s − λ₁(T_max)` at the fine resolution.
    pub gap: f64,
    /// Two-resolution difference of the gap.
    pub discretization_error: f64,
    /// `|λ₁(T_{max−1}) − λ₁(T_max)|` at the fine resolution.
    pub truncation_error: f64,
    pub error_estimate: f64,
    /// `λ₁(T)` non-increasing in `T` at every resolution.
    pub monotone_in_truncation: bool,
    pub verdict: Verdict,
    pub certificate: Option<Certificate>,
}

impl BoundStateReport {
    pub fn lambdas(&self, spacing_index: usize) -> Vec<f64> {
        let h = self.spacings[spacing_index];
        self.rows
            .iter()
            .filter(|r| r.spacing == h)
            .map(|r| r.lambda)
            .collect()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&[
            "resolution",
            "truncation",
            "lambda",
            "residual",
            "converged",
            "threshold",
            "gap",
        ]);
        for r in &self.rows {
            let idx = usize::from(r.spacing != self.spacings[0]);
            t.push(vec![
                num(r.spacing),
                num(r.truncation),
                num(r.lambda),
                num(r.residual),
                r.converged.to_string(),
                num(self.threshold[idx]),
                num(self.threshold[idx] - r.lambda),
            ]);
        }
        t
    }
}

struct Resolution {
    threshold: f64,
    rows: Vec<TubeEigen>,
}

fn solve_schedule(cfg: &BoundStateConfig, h: f64) -> Result<Resolution> {
    let t_max = *cfg.truncations.last().expect("validated");
    let grid = tube_grid(h, cfg.x_half_length, t_max)?;
    let threshold = threshold_on(cfg.half_width, cfg.s, grid.axis_grid(0)?)?;
    let rows = cfg
        .truncations
        .iter()
        .map(|&t| {
            truncated_tube_lowest(cfg.half_width, cfg.s, t, cfg.bump, grid, cfg.tol, cfg.seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Resolution { threshold, rows })
}

fn certify(cfg: &BoundStateConfig, ground_state: &GridFunction, bound: f64) -> Result<Certificate> {
    let h = cfg.spacings[1] / 2.0;
    let t_max = *cfg.truncations.last().expect("validated");
    let grid = tube_grid(h, cfg.x_half_length, t_max)?;
    let geometry = tube_geometry(cfg.half_width, t_max, cfg.bump)?;
    let mask = Arc::new(make_mask(geometry, grid)?);
    let u = interpolate(ground_state, mask.clone())?;
    let op = FracOperator::new(SpectralParams::laplacian(cfg.s)?, mask);
    let refined_rayleigh = rayleigh(&op, &u)?;
    Ok(Certificate {
        refined_rayleigh,
        bound,
        holds: refined_rayleigh < bound,
    })
}

fn analyze(cfg: &BoundStateConfig) -> Result<BoundStateReport> {
    cfg.validate()?;
    let coarse = solve_schedule(cfg, cfg.spacings[0])?;
    let fine = solve_schedule(cfg, cfg.spacings[1])?;
    let last = cfg.truncations.len() - 1;
    let gap_of = |r: &Resolution| r.threshold - r.rows[last].lambda;
    let gap = gap_of(&fine);
    let discretization_error = (gap - gap_of(&coarse)).abs();
    let truncation_error = (fine.rows[last - 1].lambda - fine.rows[last].lambda).abs();
    let error_estimate = discretization_error + truncation_error;
    let converged = coarse.rows.iter().chain(&fine.rows).all(|r| r.converged);
    let monotone = [&coarse, &fine].iter().all(|r| {
        r.rows
            .windows(2)
            .all(|w| w[1].lambda <= w[0].lambda + cfg.tol)
    });
    let verdict = verdict(gap, error_estimate, converged);
    let certificate = if verdict == Verdict::BoundState {
        Some(certify(
            cfg,
            &fine.rows[last].ground_state,
            fine.threshold + error_estimate,
        )?)
    } else {
        None
    };
    let rows = [(cfg.spacings[0], &coarse), (cfg.spacings[1], &fine)]
        .iter()
        .flat_map(|(h, r)| {
            r.rows.iter().map(move |e| TruncationRow {
                spacing: *h,
                truncation: e.truncation,
                lambda: e.lambda,
                residual: e.residual,
                converged: e.converged,
                iterations: e.iterations,
                mask_size: e.mask_size,
            })
        })
        .collect();
    Ok(BoundStateReport {
        s: cfg.s,
        half_width: cfg.half_width,
        bump_depth: cfg.bump.map_or(0.0, |b| b.depth),
        bump_half_length: cfg.bump.map_or(0.0, |b| b.half_length),
        truncations: cfg.truncations.clone(),
        spacings: cfg.spacings,
        threshold: [coarse.threshold, fine.threshold],
        threshold_error: (fine.threshold - coarse.threshold).abs(),
        rows,
        gap,
        discretization_error,
        truncation_error,
        error_estimate,
        monotone_in_truncation: monotone,
        verdict,
        certificate,
    })
}

/// Bound-state search over a truncation schedule of at least three
/// values at two resolutions.
pub fn bound_state_search(cfg: &BoundStateConfig) -> Result<BoundStateReport> {
    if cfg.truncations.len() < 3 {
        return Err(Error::param(
            "truncations",
            "at least three truncations are required",
        ));
    }
    analyze(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub half_width: f64,
    pub s: f64,
    pub bump_depths: Vec<f64>,
    pub bump_half_length: f64,
    pub truncation: f64,
    pub spacings: [f64; 2],
    pub x_half_length: f64,
    pub tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub bump_depth: f64,
    pub gap: f64,
    pub error_estimate: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub s: f64,
    pub rows: Vec<ProbeRow>,
    pub reports: Vec<BoundStateReport>,
}

impl ProbeReport {
    /// The gap column is non-decreasing in the bump depth.
    pub fn gap_monotone(&self, tol: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].gap >= w[0].gap - tol)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["bump_depth", "gap", "error_estimate", "verdict"]);
        for r in &self.rows {
            t.push(vec![
                num(r.bump_depth),
                num(r.gap),
                num(r.error_estimate),
                r.verdict.to_string(),
            ]);
        }
        t
    }
}

/// Report-only sweep over bump depths for `s < 1/2`. Each row follows the
/// bound-state rules, with the truncation error taken from `T/2` and `T`.
pub fn conjecture_probe(cfg: &ProbeConfig) -> Result<ProbeReport> {
    if !(cfg.s > 0.0 && cfg.s < 0.5) {
        return Err(Error::param(
            "s",
            format!("s = {} must lie in (0, 1/2)", cfg.s),
        ));
    }
    if cfg.bump_depths.is_empty() || cfg.bump_depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "bump_depths",
            "bump depths must be increasing",
        ));
    }
    let reports = cfg
        .bump_depths
        .iter()
        .map(|&b| {
            analyze(&BoundStateConfig {
                half_width: cfg.half_width,
                s: cfg.s,
                bump: Some(Bump {
                    depth: b,
                    half_length: cfg.bump_half_length,
                }),
                truncations: vec![cfg.truncation / 2.0, cfg.truncation],
                spacings: cfg.spacings,
                x_half_length: cfg.x_half_length,
                tol: cfg.tol,
                seed: cfg.seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = reports
        .iter()
        .map(|r| ProbeRow {
            bump_depth: r.bump_depth,
            gap: r.gap,
            error_estimate: r.error_estimate,
            verdict: r.verdict,
        })
        .collect();
    Ok(ProbeReport {
        s: cfg.s,
        rows,
        reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultitubeConfig {
    pub half_width: f64,
    pub s: f64,
    /// Arm directions in degrees from +z towards +x'.
    pub directions: Vec<i32>,
    /// Increasing arm lengths; all arms share the length.
    pub lengths: Vec<f64>,
    pub spacing: f64,
    pub tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultitubeRow {
    pub length: f64,
    pub lambda: f64,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultitubeReport {
    pub s: f64,
    pub directions: Vec<i32>,
    pub threshold: f64,
    pub rows: Vec<MultitubeRow>,
    pub monotone: bool,
    /// `|λ₁(len_{max−1}) − λ₁(len_max)|`.
    pub error_estimate: f64,
    /// Whether the longest-arm value sits below `Λ_s − error`.
    pub below_threshold: bool,
}

impl MultitubeReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["length", "lambda", "residual", "converged", "threshold"]);
        for r in &self.rows {
            t.push(vec![
                num(r.length),
                num(r.lambda),
                num(r.residual),
                r.converged.to_string(),
                num(self.threshold),
            ]);
        }
        t
    }
}

fn multitube_geometry(cfg: &MultitubeConfig, length: f64) -> Geometry {
    Geometry::Multitube {
        half_width: cfg.half_width,
        arms: cfg
            .directions
            .iter()
            .map(|&direction| Arm { direction, length })
            .collect(),
    }
}

/// `λ₁` of the truncated multi-tube per arm length, on one common grid.
pub fn multitube_lowest(cfg: &MultitubeConfig) -> Result<MultitubeReport> {
    SpectralParams::laplacian(cfg.s)?;
    if cfg.lengths.is_empty() || cfg.lengths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("lengths", "arm lengths must be increasing"));
    }
    let longest = multitube_geometry(cfg, *cfg.lengths.last().expect("nonempty"));
    let grid = Grid::covering(cfg.spacing, &longest.reach())?;
    let threshold = threshold_on(cfg.half_width, cfg.s, grid.axis_grid(0)?)?;
    let params = SpectralParams::laplacian(cfg.s)?;
    let rows = cfg
        .lengths
        .iter()
        .map(|&len| {
            let mask: Arc<DomainMask> = Arc::new(make_mask(multitube_geometry(cfg, len), grid)?);
            let op = FracOperator::new(params, mask);
            let r = smallest_eigs(&op, 1, cfg.tol, cfg.seed)?;
            Ok(MultitubeRow {
                length: len,
                lambda: r.eigenvalues[0],
                residual: r.residuals[0],
                converged: r.converged[0],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = rows
        .windows(2)
        .all(|w| w[1].lambda <= w[0].lambda + cfg.tol);
    let n = rows.len();
    let error_estimate = if n >= 2 {
        (rows[n - 2].lambda - rows[n - 1].lambda).abs()
    } else {
        f64::NAN
    };
    let below_threshold = rows[n - 1].lambda < threshold - error_estimate;
    Ok(MultitubeReport {
        s: cfg.s,
        directions: cfg.directions.clone(),
        threshold,
        rows,
        monotone,
        error_estimate,
        below_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rules() {
        assert_eq!(verdict(1.0, 0.1, true), Verdict::BoundState);
        assert_eq!(verdict(0.05, 0.1, true), Verdict::NoBoundStateDetected);
        assert_eq!(verdict(-0.05, 0.1, true), Verdict::NoBoundStateDetected);
        assert_eq!(verdict(0.2, 0.1, true), Verdict::Inconclusive);
        assert_eq!(verdict(1.0, 0.1, false), Verdict::Inconclusive);
        assert_eq!(Verdict::BoundState.to_string(), "bound_state");
    }

    #[test]
    fn tube_grid_shape() {
        let g = tube_grid(0.125, 4.0, 8.0).unwrap();
        assert_eq!(g.points(), &[64, 256]);
        assert!(tube_grid(0.3, 4.0, 8.0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = BoundStateConfig::new(
            0.5,
            Some(Bump {
                depth: 1.0,
                half_length: 2.0,
            }),
            vec![2.0, 4.0, 8.0],
            [0.25, 0.125],
        );
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("truncation inside bump"), "{err}");
        cfg.truncations = vec![4.0, 8.0, 16.0];
        assert!(cfg.validate().is_ok());
        cfg.spacings = [0.25, 0.1];
        assert!(cfg.validate().is_err());
        cfg.spacings = [0.25, 0.125];
        cfg.x_half_length = 2.0;
        assert!(matches!(
            cfg.validate().unwrap_err(),
            Error::InsufficientPadding(_)
        ));
    }

    #[test]
    fn bigger_bump_lowers_the_ground_state() {
        let grid = tube_grid(0.25, 8.0, 8.0).unwrap();
        let lam = |b: f64| {
            truncated_tube_lowest(
                1.0,
                0.5,
                8.0,
                Some(Bump {
                    depth: b,
                    half_length: 2.0,
                }),
                grid,
                1e-8,
                0,
            )
            .unwrap()
            .lambda
        };
        assert!(lam(2.0) < lam(1.0));
    }

    #[test]
    fn straight_tube_sits_above_the_matched_threshold() {
        let grid = tube_grid(0.25, 4.0, 8.0).unwrap();
        let lam = threshold_on(1.0, 0.5, grid.axis_grid(0).unwrap()).unwrap();
        let mut prev = f64::INFINITY;
        for t in [2.0, 4.0, 8.0] {
            let e = truncated_tube_lowest(1.0, 0.5, t, None, grid, 1e-9, 0).unwrap();
            assert!(e.converged);
            assert!(e.lambda >= lam);
            assert!(e.lambda <= prev);
            prev = e.lambda;
        }
    }

    #[test]
    fn opposite_arms_match_the_straight_tube() {
        let cfg = MultitubeConfig {
            half_width: 1.0,
            s: 0.5,
            directions: vec![0, 180],
            lengths: vec![4.0],
            spacing: 0.25,
            tol: 1e-9,
            seed: 0,
        };
        let report = multitube_lowest(&cfg).unwrap();
        let grid = Grid::covering(0.25, &[1.0, 4.0]).unwrap();
        let tube = truncated_tube_lowest(1.0, 0.5, 4.0, None, grid, 1e-9, 0).unwrap();
        assert!((report.rows[0].lambda - tube.lambda).abs() < 1e-8);
    }
}
