//! Matrix-free restricted fractional Laplacian / Helmholtz operator.
//!
//! The operator with symbol `(|ξ|² + κ²)^s` acts on a zero-extended grid
//! function through the DFT of the padded periodic box: transform, multiply
//! by the symbol sampled on the lattice `ξ_j = π·j/L`, `j ∈ [-N/2, N/2)`
//! (Nyquist bin at full weight), transform back and restrict to the mask.
//! Restricting to the mask is the Galerkin projection that encodes the
//! Dirichlet condition.
//!
//! The one-dimensional fractional centered difference matrix is an
//! independent discretization of `(-Δ)^s` on an interval; it shares no code
//! with the Fourier path and is used to cross-check it.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::boxfft::BoxTransform;
use crate::error::{Error, Result};
use crate::grid::{DomainMask, GridFunction, MaskKind};

/// Exponent `s ∈ (0, 1)` and Helmholtz shift `κ >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub s: f64,
    pub kappa: f64,
}

impl SpectralParams {
    pub fn new(s: f64, kappa: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::param("s", format!("s = {s} out of (0,1)")));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::param(
                "kappa",
                format!("kappa = {kappa} must be >= 0"),
            ));
        }
        Ok(Self { s, kappa })
    }

    /// Pure fractional Laplacian, `κ = 0`.
    pub fn laplacian(s: f64) -> Result<Self> {
        Self::new(s, 0.0)
    }

    pub fn with_kappa(self, kappa: f64) -> Result<Self> {
        Self::new(self.s, kappa)
    }
}

/// `(ξ² + κ²)^s` for a squared frequency magnitude `xi_sq`.
pub fn symbol(xi_sq: f64, params: &SpectralParams) -> f64 {
    (xi_sq + params.kappa * params.kappa).powf(params.s)
}

/// Masked operator with symbol `(|ξ|² + κ²)^s` on the periodic box.
#[derive(Debug, Clone)]
pub struct FracOperator {
    params: SpectralParams,
    mask: Arc<DomainMask>,
    symbol_table: Vec<f64>,
    transform: BoxTransform,
}

impl FracOperator {
    pub fn new(params: SpectralParams, mask: Arc<DomainMask>) -> Self {
        let grid = *mask.grid();
        let mut symbol_table = Vec::with_capacity(grid.len());
        for i0 in 0..grid.points_along(0) {
            let x0 = grid.frequency(0, i0);
            for i1 in 0..grid.points_along(1) {
                let x1 = if grid.dim() == 2 {
                    grid.frequency(1, i1)
                } else {
                    0.0
                };
                symbol_table.push(symbol(x0 * x0 + x1 * x1, &params));
            }
        }
        Self {
            params,
            mask,
            symbol_table,
            transform: BoxTransform::new(grid),
        }
    }

    pub fn params(&self) -> &SpectralParams {
        &self.params
    }

    pub fn mask(&self) -> &Arc<DomainMask> {
        &self.mask
    }

    /// Symbol sampled on the DFT lattice, row-major in bin order.
    pub fn symbol_table(&self) -> &[f64] {
        &self.symbol_table
    }

    /// Number of unknowns (masked points).
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    fn check_mask(&self, u: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(u.mask(), &self.mask) || **u.mask() == *self.mask {
            Ok(())
        } else {
            Err(Error::MaskMismatch)
        }
    }

    /// Galerkin action of the periodic-box operator on `u`.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check_mask(u)?;
        let mut data = u.to_box();
        self.transform
            .apply_multiplier(&mut data, &self.symbol_table);
        let values = self.mask.indices().iter().map(|&f| data[f]).collect();
        GridFunction::from_values(self.mask.clone(), values)
    }

    /// Real version of [`apply`](Self::apply) on mask-ordered values.
    pub fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.mask.len());
        let mut data = vec![Complex64::new(0.0, 0.0); self.mask.grid().len()];
        for (&f, &v) in self.mask.indices().iter().zip(x) {
            data[f] = Complex64::new(v, 0.0);
        }
        self.transform
            .apply_multiplier(&mut data, &self.symbol_table);
        for (&f, out) in self.mask.indices().iter().zip(y.iter_mut()) {
            *out = data[f].re;
        }
    }

    /// Quadratic form `Σ_ξ symbol(ξ)·|û(ξ)|²·(π/L)^n`, evaluated on the
    /// spectrum of the zero-extended `u`.
    pub fn form(&self, u: &GridFunction) -> Result<f64> {
        self.check_mask(u)?;
        let grid = self.mask.grid();
        let mut data = u.to_box();
        self.transform.forward(&mut data);
        let sum: f64 = data
            .iter()
            .zip(&self.symbol_table)
            .map(|(d, s)| s * d.norm_sqr())
            .sum();
        Ok(sum * grid.cell_volume() / grid.len() as f64)
    }

    /// Periodic convolution kernel: inverse DFT of the symbol table. Real
    /// and even because the symbol is.
    pub fn kernel(&self) -> Vec<f64> {
        let mut data: Vec<Complex64> = self
            .symbol_table
            .iter()
            .map(|&s| Complex64::new(s, 0.0))
            .collect();
        self.transform.inverse(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Dense mask-restricted matrix of the operator.
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let grid = self.mask.grid();
        let kernel = self.kernel();
        let n0 = grid.points_along(0) as isize;
        let n1 = grid.points_along(1) as isize;
        let idx: Vec<[isize; 2]> = self
            .mask
            .indices()
            .iter()
            .map(|&f| {
                let [a, b] = grid.unflatten(f);
                [a as isize, b as isize]
            })
            .collect();
        let n = idx.len();
        let mut m = DMatrix::zeros(n, n);
        for (p, ip) in idx.iter().enumerate() {
            for (q, iq) in idx.iter().enumerate().skip(p) {
                let d0 = (ip[0] - iq[0]).rem_euclid(n0);
                let d1 = (ip[1] - iq[1]).rem_euclid(n1);
                let v = kernel[(d0 * n1 + d1) as usize];
                m[(p, q)] = v;
                m[(q, p)] = v;
            }
        }
        m
    }
}

/// Fractional centered difference weights `g_0 .. g_{count-1}`:
/// `g_k = (-1)^k Γ(2s+1) / (Γ(s+k+1) Γ(s-k+1))`, generated by the ratio
/// `g_{k+1}/g_k = (k - s)/(k + s + 1)`.
pub fn fcd_weights(s: f64, count: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(count);
    if count == 0 {
        return g;
    }
    g.push(gamma(2.0 * s + 1.0) / gamma(s + 1.0).powi(2));
    for k in 1..count {
        let prev = g[k - 1];
        let kf = (k - 1) as f64;
        g.push(prev * (kf - s) / (kf + s + 1.0));
    }
    g
}

/// Symmetric Toeplitz matrix `h^{-2s}·g_{|i-j|}` on the points of a 1D
/// interval mask.
pub fn fcd_matrix_1d(params: &SpectralParams, mask: &DomainMask) -> Result<DMatrix<f64>> {
    if params.kappa != 0.0 {
        return Err(Error::Unsupported(
            "fractional centered differences discretize the Laplacian only (kappa must be 0)"
                .into(),
        ));
    }
    if mask.kind() != MaskKind::Interval {
        return Err(Error::Unsupported(format!(
            "fractional centered differences need an interval mask, got {:?}",
            mask.kind()
        )));
    }
    let n = mask.len();
    let h = mask.grid().spacing();
    let scale = h.powf(-2.0 * params.s);
    let g = fcd_weights(params.s, n);
    Ok(DMatrix::from_fn(n, n, |i, j| scale * g[i.abs_diff(j)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner, make_mask, Geometry, Grid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn interval_op(s: f64, kappa: f64, h: f64, l: f64) -> FracOperator {
        let grid = Grid::new(h, &[(2.0 * l / h).round() as usize]).unwrap();
        let mask = make_mask(Geometry::Interval { half_width: 1.0 }, grid).unwrap();
        FracOperator::new(SpectralParams::new(s, kappa).unwrap(), Arc::new(mask))
    }

    fn random_fn(mask: &Arc<DomainMask>, seed: u64) -> GridFunction {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..mask.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        GridFunction::from_real(mask.clone(), &vals).unwrap()
    }

    #[test]
    fn symbol_values() {
        let p = |s, k| SpectralParams::new(s, k).unwrap();
        assert_eq!(symbol(0.0, &p(0.3, 0.0)), 0.0);
        assert!((symbol(4.0, &p(0.5, 0.0)) - 2.0).abs() < 1e-15);
        assert!((symbol(1.0, &p(0.5, 1.0)) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(SpectralParams::new(1.5, 0.0)
            .unwrap_err()
            .to_string()
            .contains("s = 1.5 out of (0,1)"));
        assert!(SpectralParams::new(0.0, 0.0).is_err());
        assert!(SpectralParams::new(0.5, -1.0).is_err());
    }

    #[test]
    fn symbol_table_invariants() {
        let op = interval_op(0.4, 0.7, 0.125, 4.0);
        let floor = 0.7f64.powf(0.8);
        assert!((op.symbol_table()[0] - floor).abs() < 1e-15);
        assert!(op.symbol_table().iter().all(|&v| v >= floor - 1e-15));
        let n = op.symbol_table().len();
        for j in 1..n {
            assert_eq!(op.symbol_table()[j], op.symbol_table()[n - j]);
        }
    }

    #[test]
    fn plane_wave_is_an_eigenfunction_on_the_full_box() {
        let op_grid = Grid::new(0.25, &[16, 32]).unwrap();
        let s = 0.35;
        let params = SpectralParams::laplacian(s).unwrap();
        let k = [3usize, 5usize];
        let xi = [op_grid.frequency(0, k[0]), op_grid.frequency(1, k[1])];
        let mut data: Vec<Complex64> = (0..op_grid.len())
            .map(|f| {
                let p = op_grid.position(f);
                Complex64::from_polar(1.0, xi[0] * p[0] + xi[1] * p[1])
            })
            .collect();
        let table: Vec<f64> = (0..op_grid.len())
            .map(|f| {
                let [a, b] = op_grid.unflatten(f);
                let (x0, x1) = (op_grid.frequency(0, a), op_grid.frequency(1, b));
                symbol(x0 * x0 + x1 * x1, &params)
            })
            .collect();
        let orig = data.clone();
        BoxTransform::new(op_grid).apply_multiplier(&mut data, &table);
        let expected = (xi[0] * xi[0] + xi[1] * xi[1]).powf(s);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b * expected).norm() < 1e-11);
        }
    }

    #[test]
    fn form_matches_apply_pairing() {
        let op = interval_op(0.6, 0.0, 1.0 / 32.0, 8.0);
        let u = random_fn(op.mask(), 11);
        let f = op.form(&u).unwrap();
        let g = inner(&op.apply(&u).unwrap(), &u).unwrap().re;
        assert!((f - g).abs() <= 1e-10 * f);
        assert!(f > 0.0);
    }

    #[test]
    fn zero_form() {
        let op = interval_op(0.6, 0.0, 1.0 / 16.0, 4.0);
        let u = GridFunction::zeros(op.mask().clone());
        assert_eq!(op.form(&u).unwrap(), 0.0);
    }

    #[test]
    fn form_increases_with_kappa() {
        let a = interval_op(0.45, 0.0, 1.0 / 16.0, 4.0);
        let b = FracOperator::new(SpectralParams::new(0.45, 1.0).unwrap(), a.mask().clone());
        for seed in 0..5 {
            let u = random_fn(a.mask(), seed);
            assert!(a.form(&u).unwrap() <= b.form(&u).unwrap());
        }
    }

    #[test]
    fn dense_matrix_matches_apply() {
        let op = interval_op(0.3, 0.5, 1.0 / 8.0, 4.0);
        let m = op.dense_matrix();
        let u = random_fn(op.mask(), 5);
        let x: Vec<f64> = u.real_parts();
        let mut y = vec![0.0; x.len()];
        op.apply_real(&x, &mut y);
        let xm = nalgebra::DVector::from_vec(x);
        let ym = &m * xm;
        for (a, b) in y.iter().zip(ym.iter()) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn mask_mismatch_is_an_error() {
        let op = interval_op(0.3, 0.0, 1.0 / 8.0, 4.0);
        let other = interval_op(0.3, 0.0, 1.0 / 8.0, 8.0);
        let u = GridFunction::zeros(other.mask().clone());
        assert_eq!(op.apply(&u).unwrap_err(), Error::MaskMismatch);
        assert_eq!(op.form(&u).unwrap_err(), Error::MaskMismatch);
    }

    #[test]
    fn fcd_weights_exact_values() {
        let g = fcd_weights(0.5, 4);
        assert!((g[0] - 4.0 / std::f64::consts::PI).abs() < 1e-14);
        assert!((g[1] / g[0] + 1.0 / 3.0).abs() < 1e-14);
        for s in [0.2, 0.5, 0.9] {
            let g = fcd_weights(s, 50);
            assert!(g[0] > 0.0);
            assert!(g[1..].iter().all(|&w| w < 0.0));
            assert!((g[1] / g[0] + s / (s + 1.0)).abs() < 1e-14);
            // weights of a consistent difference operator annihilate constants
            let total: f64 = g[0] + 2.0 * g[1..].iter().sum::<f64>();
            assert!(total > 0.0 && total < 0.2, "row sum {total}");
        }
    }

    #[test]
    fn fcd_approaches_three_point_laplacian() {
        let g = fcd_weights(0.9999, 4);
        assert!((g[0] - 2.0).abs() < 1e-3);
        assert!((g[1] + 1.0).abs() < 1e-3);
        assert!(g[2].abs() < 1e-3 && g[3].abs() < 1e-3);
    }

    #[test]
    fn fcd_matrix_rejects_kappa_and_non_intervals() {
        let op = interval_op(0.3, 0.0, 1.0 / 8.0, 4.0);
        let p = SpectralParams::new(0.3, 1.0).unwrap();
        assert!(matches!(
            fcd_matrix_1d(&p, op.mask()).unwrap_err(),
            Error::Unsupported(_)
        ));
        let m = fcd_matrix_1d(op.params(), op.mask()).unwrap();
        assert_eq!(m.nrows(), op.len());
        assert!((m.clone() - m.transpose()).norm() == 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn apply_is_symmetric(seed in 0u64..10_000, s in 0.05f64..0.95, kappa in 0.0f64..3.0) {
            let grid = Grid::new(0.25, &[16, 32]).unwrap();
            let mask = Arc::new(make_mask(Geometry::Disk { radius: 0.9 }, grid).unwrap());
            let op = FracOperator::new(SpectralParams::new(s, kappa).unwrap(), mask.clone());
            let u = random_fn(&mask, seed);
            let v = random_fn(&mask, seed + 1);
            let a = inner(&op.apply(&u).unwrap(), &v).unwrap();
            let b = inner(&u, &op.apply(&v).unwrap()).unwrap();
            prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-300));
        }

        #[test]
        fn form_positive_and_above_kappa_floor(seed in 0u64..10_000, s in 0.05f64..0.95, kappa in 0.0f64..3.0) {
            let op = interval_op(s, kappa, 1.0 / 16.0, 4.0);
            let u = random_fn(op.mask(), seed);
            let f = op.form(&u).unwrap();
            prop_assert!(f > 0.0);
            prop_assert!(f >= kappa.powf(2.0 * s) * u.norm_sq() * (1.0 - 1e-12));
            let big = FracOperator::new(SpectralParams::new(s, kappa + 0.5).unwrap(), op.mask().clone());
            prop_assert!(f <= big.form(&u).unwrap());
        }
    }
}
