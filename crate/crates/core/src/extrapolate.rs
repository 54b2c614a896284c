//! Richardson extrapolation on sequences computed at halving spacings.

use serde::Serialize;

use crate::error::{Error, Result};

/// Order assumed when it cannot be measured.
pub const FALLBACK_ORDER: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolation {
    pub value: f64,
    pub order: f64,
    /// False when the fallback order was used.
    pub order_measured: bool,
    /// Size of the extrapolation correction.
    pub error_estimate: f64,
}

/// Extrapolates `values` computed at spacings `h, h/2, h/4, …` (coarse
/// first). With three or more values the order is measured from the last
/// three; with two, or when the measured order is not meaningful, the
/// fallback order is used.
pub fn richardson(values: &[f64]) -> Result<Extrapolation> {
    if values.len() < 2 {
        return Err(Error::param(
            "values",
            "extrapolation needs at least two resolutions",
        ));
    }
    let n = values.len();
    let (b, c) = (values[n - 2], values[n - 1]);
    let measured = if n >= 3 {
        let a = values[n - 3];
        let ratio = (a - b) / (b - c);
        let p = ratio.log2();
        (ratio.is_finite() && p > 0.1 && p < 8.0).then_some(p)
    } else {
        None
    };
    let order = measured.unwrap_or(FALLBACK_ORDER);
    Ok(with_order(b, c, 2.0, order, measured.is_some()))
}

/// Two-point extrapolation with a known order `p` for values at spacings
/// `r·h` (`coarse`) and `h` (`fine`).
pub fn richardson_known(coarse: f64, fine: f64, ratio: f64, order: f64) -> Extrapolation {
    with_order(coarse, fine, ratio, order, true)
}

fn with_order(coarse: f64, fine: f64, ratio: f64, order: f64, measured: bool) -> Extrapolation {
    let correction = (fine - coarse) / (ratio.powf(order) - 1.0);
    Extrapolation {
        value: fine + correction,
        order,
        order_measured: measured,
        error_estimate: correction.abs(),
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
