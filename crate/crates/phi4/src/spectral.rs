//! Torus geometry and Fourier representation.
//!
//! Fields live on the 3-torus Λ = (ℝ/2πℤ)³ and are represented either by
//! spectral coefficients with respect to the orthonormal basis
//! e_k(x) = (2π)^{−3/2} e^{ik·x}, k ∈ [−K,K]³ ([`FourierField`]), or by point
//! samples on a uniform M³ grid with spacing h = 2π/M ([`RealField`]).
//!
//! Conventions used throughout the crate:
//!
//! * coefficient of e_k:  ⟨f, e_k⟩ = (2π)^{−3/2} ∫ f(x) e^{−ik·x} dx,
//!   computed by exact quadrature h³ Σ_j f(x_j)(2π)^{−3/2} e^{−ik·x_j}
//!   (exact for band-limited f when M ≥ 2K+1);
//! * a constant field c has coefficient c·(2π)^{3/2} at k = 0;
//! * real fields satisfy coeff(−k) = conj(coeff(k)).
//!
//! Coefficients are stored as a dense (2K+1)³ cube in lexicographic
//! (k₁,k₂,k₃) order, which is also the on-disk order used by the snapshot
//! format.

use crate::error::{Error, Result};
use crate::fft;
use num_complex::Complex64;

/// 2π, the side length of the torus.
pub const TAU: f64 = std::f64::consts::TAU;

/// Scale factor (2π)^{3/2} relating constants to their k = 0 coefficient.
pub(crate) fn two_pi_3_2() -> f64 {
    TAU.powf(1.5)
}

/// Uniform discretization of the torus: retained modes k ∈ [−K,K]³ and an
/// M³ physical grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    k_max: usize,
    m: usize,
}

impl TorusGrid {
    /// Builds a grid retaining modes `[−k_max, k_max]³` with `m` physical
    /// points per axis. Requires `k_max ≥ 1` and `m ≥ 2·k_max + 1` so that
    /// every retained mode is resolved without aliasing.
    pub fn new(k_max: usize, m: usize) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::Config(format!(
                "grid needs k_max >= 1, got {k_max}"
            )));
        }
        let min = 2 * k_max + 1;
        if m < min {
            return Err(Error::GridTooCoarse { k_max, m, min });
        }
        Ok(Self { k_max, m })
    }

    /// Largest retained wavenumber per axis.
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Physical grid points per axis.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Modes per axis, 2K+1.
    pub fn side(&self) -> usize {
        2 * self.k_max + 1
    }

    /// Total number of retained modes, (2K+1)³.
    pub fn n_modes(&self) -> usize {
        self.side().pow(3)
    }

    /// Total number of physical grid points, M³.
    pub fn n_points(&self) -> usize {
        self.m.pow(3)
    }

    /// Grid spacing h = 2π/M.
    pub fn spacing(&self) -> f64 {
        TAU / self.m as f64
    }

    /// Whether pointwise cubic products of band-limited fields are alias-free
    /// on the physical grid (M ≥ 4K+1).
    pub fn is_cubic_safe(&self) -> bool {
        self.m >= 4 * self.k_max + 1
    }

    /// Errors unless [`Self::is_cubic_safe`].
    pub fn require_cubic_safe(&self) -> Result<()> {
        if self.is_cubic_safe() {
            Ok(())
        } else {
            Err(Error::AliasUnsafe {
                m: self.m,
                min: 4 * self.k_max + 1,
            })
        }
    }

    /// Flat index of mode `k` in the lexicographic coefficient layout.
    /// Panics if any |k_i| > K.
    pub fn index_of(&self, k: [i64; 3]) -> usize {
        let kk = self.k_max as i64;
        let s = self.side() as i64;
        debug_assert!(k.iter().all(|&ki| ki.abs() <= kk), "mode {k:?} out of range");
        (((k[0] + kk) * s + (k[1] + kk)) * s + (k[2] + kk)) as usize
    }

    /// All retained modes in lexicographic order, matching the coefficient
    /// layout.
    pub fn iter_modes(&self) -> impl Iterator<Item = [i64; 3]> {
        let kk = self.k_max as i64;
        let s = self.side() as i64;
        (0..s * s * s).map(move |i| [i / (s * s) - kk, (i / s) % s - kk, i % s - kk])
    }

    pub(crate) fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                k_a: self.k_max,
                m_a: self.m,
                k_b: other.k_max,
                m_b: other.m,
            })
        }
    }
}

/// |k|² as a float.
pub fn k_sq(k: [i64; 3]) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
}

/// Spectral representation of a field: coefficients ⟨f, e_k⟩ for all
/// retained modes, dense, in the grid's lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    grid: TorusGrid,
    coeff: Vec<Complex64>,
}

impl FourierField {
    /// The zero field.
    pub fn zero(grid: TorusGrid) -> Self {
        Self {
            grid,
            coeff: vec![Complex64::default(); grid.n_modes()],
        }
    }

    /// Field with coefficients given by `f(k)`.
    pub fn from_fn(grid: TorusGrid, mut f: impl FnMut([i64; 3]) -> Complex64) -> Self {
        let coeff = grid.iter_modes().map(|k| f(k)).collect();
        Self { grid, coeff }
    }

    /// Constant field of value `c` (coefficient c·(2π)^{3/2} at k = 0).
    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        let mut out = Self::zero(grid);
        out.coeff[grid.index_of([0, 0, 0])] = Complex64::new(c * two_pi_3_2(), 0.0);
        out
    }

    /// Wraps an existing coefficient vector. Length must be `grid.n_modes()`.
    pub fn from_coeff(grid: TorusGrid, coeff: Vec<Complex64>) -> Result<Self> {
        if coeff.len() != grid.n_modes() {
            return Err(Error::Config(format!(
                "coefficient vector length {} does not match grid with {} modes",
                coeff.len(),
                grid.n_modes()
            )));
        }
        Ok(Self { grid, coeff })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coeff(&self) -> &[Complex64] {
        &self.coeff
    }

    pub fn coeff_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeff
    }

    /// Coefficient of mode `k`.
    pub fn get(&self, k: [i64; 3]) -> Complex64 {
        self.coeff[self.grid.index_of(k)]
    }

    pub fn set(&mut self, k: [i64; 3], v: Complex64) {
        let i = self.grid.index_of(k);
        self.coeff[i] = v;
    }

    /// self ← self + c·other. Panics on grid mismatch (programming error:
    /// all internal callers hold fields from one grid).
    pub fn add_scaled(&mut self, other: &FourierField, c: f64) {
        assert_eq!(self.grid, other.grid, "grid mismatch in add_scaled");
        for (a, b) in self.coeff.iter_mut().zip(&other.coeff) {
            *a += c * b;
        }
    }

    /// self ← c·self.
    pub fn scale(&mut self, c: f64) {
        for a in &mut self.coeff {
            *a *= c;
        }
    }

    /// Applies a real multiplier w(k) coefficient-wise: coeff(k) ← w(k)·coeff(k).
    pub fn apply_multiplier(&mut self, mut w: impl FnMut([i64; 3]) -> f64) {
        for (c, k) in self.coeff.iter_mut().zip(self.grid.iter_modes()) {
            *c *= w(k);
        }
    }

    /// Largest |k_i| over modes with nonzero coefficient (0 for the zero
    /// field). Diagnostic; hot paths track bands analytically instead.
    pub fn occupied_band(&self) -> usize {
        let mut band = 0i64;
        for (c, k) in self.coeff.iter().zip(self.grid.iter_modes()) {
            if c.norm_sqr() != 0.0 {
                band = band.max(k[0].abs()).max(k[1].abs()).max(k[2].abs());
            }
        }
        band as usize
    }

    /// Max over modes of |coeff(k) − conj(coeff(−k))|; zero for the spectrum
    /// of a real field.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in self.grid.iter_modes() {
            let d = (self.get(k) - self.get([-k[0], -k[1], -k[2]]).conj()).norm();
            worst = worst.max(d);
        }
        worst
    }

    /// Projects onto the Hermitian-symmetric subspace:
    /// coeff(k) ← (coeff(k) + conj(coeff(−k)))/2.
    pub fn enforce_hermitian(&mut self) {
        for k in self.grid.iter_modes() {
            if k > [0, 0, 0] {
                let neg = [-k[0], -k[1], -k[2]];
                let a = self.get(k);
                let b = self.get(neg);
                let avg = 0.5 * (a + b.conj());
                self.set(k, avg);
                self.set(neg, avg.conj());
            }
        }
        let zero = self.grid.index_of([0, 0, 0]);
        self.coeff[zero] = Complex64::new(self.coeff[zero].re, 0.0);
    }

    /// ℓ² norm of the coefficient vector; equals the L² norm of the field.
    pub fn l2_norm(&self) -> f64 {
        self.coeff.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Σ_k |k|²·|coeff(k)|² = ‖∇f‖²_{L²}.
    pub fn gradient_l2_sq(&self) -> f64 {
        self.coeff
            .iter()
            .zip(self.grid.iter_modes())
            .map(|(c, k)| k_sq(k) * c.norm_sqr())
            .sum()
    }

    /// Field value at x = 0: (2π)^{−3/2} Σ_k coeff(k), real part.
    pub fn value_at_origin(&self) -> f64 {
        let s: Complex64 = self.coeff.iter().sum();
        s.re / two_pi_3_2()
    }

    /// True if all coefficients are finite.
    pub fn is_finite(&self) -> bool {
        self.coeff.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Point samples of a real field at x_j = j·h, stored row-major (last axis
/// contiguous), j ∈ {0,…,M−1}³.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl RealField {
    pub fn zero(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_points()],
        }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n_points()],
        }
    }

    /// Wraps existing samples. Length must be `grid.n_points()`.
    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Config(format!(
                "sample vector length {} does not match grid with {} points",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples of `f(x)` at the grid points.
    pub fn from_fn(grid: TorusGrid, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let m = grid.m();
        let h = grid.spacing();
        let mut values = Vec::with_capacity(grid.n_points());
        for jx in 0..m {
            for jy in 0..m {
                for jz in 0..m {
                    values.push(f([jx as f64 * h, jy as f64 * h, jz as f64 * h]));
                }
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Exact quadrature of ⟨f, e_k⟩ for every retained mode.
pub fn forward_transform(f: &RealField) -> FourierField {
    let grid = f.grid;
    let m = grid.m();
    let mut cube: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::fft3(&mut cube, m, true);
    let scale = two_pi_3_2() / grid.n_points() as f64;
    let mut out = FourierField::zero(grid);
    gather(&cube, m, &mut out, grid.k_max(), scale);
    out
}

/// Reconstructs point samples from spectral coefficients.
pub fn inverse_transform(f: &FourierField) -> RealField {
    let grid = f.grid();
    let values = phys_samples(f, grid.k_max(), grid.m());
    RealField { grid, values }
}

/// Quadrature Lᵖ norm (h³ Σ_j |f(x_j)|ᵖ)^{1/p}; max |f| for p = ∞.
/// Panics unless p ≥ 1 (finite or +∞).
pub fn lp_norm(f: &RealField, p: f64) -> f64 {
    assert!(p >= 1.0, "lp_norm requires p >= 1, got {p}");
    if p.is_infinite() {
        return f.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    }
    let h3 = f.grid.spacing().powi(3);
    if p == 2.0 {
        return (h3 * f.values.iter().map(|v| v * v).sum::<f64>()).sqrt();
    }
    (h3 * f.values.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// Spectral inner product Σ_k coeff_f(k)·conj(coeff_g(k)) = ⟨f, g⟩_{L²}.
pub fn inner_product(f: &FourierField, g: &FourierField) -> Result<Complex64> {
    f.grid.check_same(&g.grid)?;
    Ok(f.coeff
        .iter()
        .zip(&g.coeff)
        .map(|(a, b)| a * b.conj())
        .sum())
}

// ---------------------------------------------------------------------------
// Internal scatter/gather machinery shared with the product engine.
//
// Nonlinear terms are evaluated on auxiliary physical grids sized to the
// analytic bands of their factors (alias-free yet much smaller than the main
// grid). These helpers move band-limited data between a coefficient cube and
// an arbitrary physical cube of side `m_aux`.
// ---------------------------------------------------------------------------

/// Physical samples of `f` on an auxiliary `m_aux`³ grid, using only the
/// modes with |k_i| ≤ `band`. Exact when `band` covers the analytic support
/// of `f` and `m_aux ≥ 2·band + 1` (asserted).
pub(crate) fn phys_samples(f: &FourierField, band: usize, m_aux: usize) -> Vec<f64> {
    let band = band.min(f.grid().k_max());
    assert!(
        m_aux >= 2 * band + 1,
        "auxiliary grid {m_aux} too coarse for band {band}"
    );
    let mut cube = vec![Complex64::default(); m_aux.pow(3)];
    scatter(f, band, &mut cube, m_aux);
    fft::fft3(&mut cube, m_aux, false);
    let scale = two_pi_3_2().recip();
    cube.into_iter().map(|c| c.re * scale).collect()
}

/// Forward transform of auxiliary-grid samples, keeping modes
/// |k_i| ≤ min(keep, K) and zeroing the rest. Exact for data whose true band
/// fits the kept window without aliasing on `m_aux` (callers guarantee this
/// by sizing `m_aux` from the analytic bands).
pub(crate) fn spectral_from_samples(
    vals: &[f64],
    m_aux: usize,
    grid: TorusGrid,
    keep: usize,
) -> FourierField {
    assert_eq!(vals.len(), m_aux.pow(3), "sample cube size mismatch");
    let keep = keep.min(grid.k_max());
    assert!(
        m_aux >= 2 * keep + 1,
        "auxiliary grid {m_aux} cannot resolve kept band {keep}"
    );
    let mut cube: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::fft3(&mut cube, m_aux, true);
    let scale = two_pi_3_2() / m_aux.pow(3) as f64;
    let mut out = FourierField::zero(grid);
    gather(&cube, m_aux, &mut out, keep, scale);
    out
}

/// Pointwise product of two band-limited fields, evaluated alias-free on an
/// internal grid sized from the factors' analytic bands, truncated back to
/// `keep` modes. `band_f`/`band_g` must cover the true supports.
pub(crate) fn product_truncated(
    f: &FourierField,
    band_f: usize,
    g: &FourierField,
    band_g: usize,
    keep: usize,
) -> FourierField {
    let grid = f.grid();
    debug_assert_eq!(grid, g.grid());
    let band_f = band_f.min(grid.k_max());
    let band_g = band_g.min(grid.k_max());
    // The product cannot reach beyond the band sum.
    let keep = keep.min(grid.k_max()).min(band_f + band_g);
    // Alias safety: images of k + m·e differ from kept modes when
    // m ≥ band_f + band_g + keep + 1.
    let m_aux = fft::good_fft_size(band_f + band_g + keep + 1);
    let fa = phys_samples(f, band_f, m_aux);
    let mut ga = phys_samples(g, band_g, m_aux);
    for (b, a) in ga.iter_mut().zip(&fa) {
        *b *= a;
    }
    spectral_from_samples(&ga, m_aux, grid, keep)
}

/// [`product_truncated`] with the bands read off the occupied coefficients
/// and the result truncated to their sum (clamped to the grid).
pub(crate) fn mul_auto(f: &FourierField, g: &FourierField) -> FourierField {
    let (bf, bg) = (f.occupied_band(), g.occupied_band());
    let keep = (bf + bg).min(f.grid().k_max());
    product_truncated(f, bf, g, bg, keep)
}

fn scatter(f: &FourierField, band: usize, cube: &mut [Complex64], m_aux: usize) {
    let b = band as i64;
    let m = m_aux as i64;
    for k1 in -b..=b {
        let x = k1.rem_euclid(m) as usize;
        for k2 in -b..=b {
            let y = k2.rem_euclid(m) as usize;
            let row_out = (x * m_aux + y) * m_aux;
            for k3 in -b..=b {
                let z = k3.rem_euclid(m) as usize;
                cube[row_out + z] = f.get([k1, k2, k3]);
            }
        }
    }
}

fn gather(cube: &[Complex64], m_aux: usize, out: &mut FourierField, keep: usize, scale: f64) {
    let b = keep as i64;
    let m = m_aux as i64;
    for k1 in -b..=b {
        let x = k1.rem_euclid(m) as usize;
        for k2 in -b..=b {
            let y = k2.rem_euclid(m) as usize;
            let row_in = (x * m_aux + y) * m_aux;
            for k3 in -b..=b {
                let z = k3.rem_euclid(m) as usize;
                out.set([k1, k2, k3], scale * cube[row_in + z]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_hermitian;
    use proptest::prelude::*;

    #[test]
    fn grid_validation() {
        let g = TorusGrid::new(1, 8).unwrap();
        assert!((g.spacing() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!(TorusGrid::new(16, 65).unwrap().is_cubic_safe());
        assert!(matches!(
            TorusGrid::new(4, 8),
            Err(Error::GridTooCoarse { min: 9, .. })
        ));
        assert!(TorusGrid::new(0, 8).is_err());
        // 2K+1 exactly is accepted but not cubic-safe.
        let tight = TorusGrid::new(4, 9).unwrap();
        assert!(!tight.is_cubic_safe());
        assert!(tight.require_cubic_safe().is_err());
    }

    #[test]
    fn mode_indexing_round_trips() {
        let g = TorusGrid::new(3, 7).unwrap();
        for (i, k) in g.iter_modes().enumerate() {
            assert_eq!(g.index_of(k), i);
        }
        assert_eq!(g.iter_modes().count(), g.n_modes());
        assert_eq!(g.iter_modes().next().unwrap(), [-3, -3, -3]);
        assert_eq!(g.iter_modes().last().unwrap(), [3, 3, 3]);
    }

    #[test]
    fn transform_of_zero_and_constant() {
        let g = TorusGrid::new(4, 18).unwrap();
        let zeros = forward_transform(&RealField::zero(g));
        assert!(zeros.coeff().iter().all(|c| c.norm() == 0.0));

        let c = 2.5;
        let hat = forward_transform(&RealField::constant(g, c));
        let expect = c * two_pi_3_2();
        assert!((hat.get([0, 0, 0]).re - expect).abs() < 1e-12 * expect);
        for k in g.iter_modes() {
            if k != [0, 0, 0] {
                assert!(hat.get(k).norm() < 1e-12);
            }
        }
        // And back: a pure k = 0 coefficient reconstructs the constant.
        let back = inverse_transform(&FourierField::constant(g, c));
        for v in back.values() {
            assert!((v - c).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_mode_has_half_coefficients() {
        // f = Re e_k = (2π)^{−3/2} cos(k·x) has coefficients 1/2 at ±k.
        let g = TorusGrid::new(2, 12).unwrap();
        let k = [1i64, 0, 0];
        let f = RealField::from_fn(g, |x| (x[0]).cos() / two_pi_3_2());
        let hat = forward_transform(&f);
        assert!((hat.get(k) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert!((hat.get([-1, 0, 0]) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        for mode in g.iter_modes() {
            if mode != k && mode != [-1, 0, 0] {
                assert!(hat.get(mode).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_at_minimal_and_comfortable_resolution() {
        for (k_max, m) in [(5usize, 11usize), (5, 21), (8, 36)] {
            let g = TorusGrid::new(k_max, m).unwrap();
            let f = random_hermitian(g, k_max, 42);
            let back = forward_transform(&inverse_transform(&f));
            let num: f64 = back
                .coeff()
                .iter()
                .zip(f.coeff())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let den = f.l2_norm();
            assert!(num <= 1e-12 * den, "round-trip error {} at M={m}", num / den);
        }
    }

    #[test]
    fn parseval_ties_spectral_and_quadrature_norms() {
        let g = TorusGrid::new(6, 16).unwrap();
        let f = random_hermitian(g, 6, 7);
        let spectral = inner_product(&f, &f).unwrap().re;
        let quad = lp_norm(&inverse_transform(&f), 2.0).powi(2);
        assert!((spectral - quad).abs() <= 1e-10 * spectral);
        assert!((f.l2_norm().powi(2) - spectral).abs() <= 1e-12 * spectral);
    }

    #[test]
    fn lp_norm_closed_forms() {
        let g = TorusGrid::new(2, 10).unwrap();
        let c = -1.7;
        let f = RealField::constant(g, c);
        for p in [1.0, 4.0 / 3.0, 2.0, 4.0] {
            let expect = c.abs() * TAU.powf(3.0 / p);
            assert!((lp_norm(&f, p) - expect).abs() < 1e-12 * expect);
        }
        assert!((lp_norm(&f, f64::INFINITY) - c.abs()).abs() < 1e-15);

        // Samples of e₀ are the constant (2π)^{−3/2}: ‖e₀‖_p = (2π)^{3/p − 3/2}.
        let e0 = inverse_transform(&FourierField::from_fn(g, |k| {
            if k == [0, 0, 0] {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        }));
        for p in [1.0, 2.0, 4.0] {
            let expect = TAU.powf(3.0 / p - 1.5);
            assert!((lp_norm(&e0, p) - expect).abs() < 1e-12 * expect);
        }
        assert!((lp_norm(&e0, 2.0) - 1.0).abs() < 1e-12);

        let mut spike = RealField::zero(g);
        spike.values_mut()[17] = 7.0;
        assert_eq!(lp_norm(&spike, f64::INFINITY), 7.0);
    }

    #[test]
    fn inner_product_is_orthonormal_on_basis_modes() {
        let g = TorusGrid::new(2, 8).unwrap();
        let mk = |k: [i64; 3]| {
            let mut f = FourierField::zero(g);
            f.set(k, Complex64::new(1.0, 0.0));
            f
        };
        let a = mk([1, -2, 0]);
        let b = mk([0, 1, 1]);
        assert_eq!(inner_product(&a, &a).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(inner_product(&a, &b).unwrap(), Complex64::default());
        assert_eq!(
            inner_product(&FourierField::zero(g), &b).unwrap(),
            Complex64::default()
        );

        let other = TorusGrid::new(3, 8).unwrap();
        assert!(matches!(
            inner_product(&a, &FourierField::zero(other)),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn hermitian_utilities() {
        let g = TorusGrid::new(3, 8).unwrap();
        let f = random_hermitian(g, 3, 3);
        assert!(f.hermitian_defect() < 1e-15);

        // Forward transforms of real samples are Hermitian to rounding.
        let hat = forward_transform(&inverse_transform(&f));
        assert!(hat.hermitian_defect() < 1e-12);

        let mut broken = f.clone();
        broken.set([1, 2, 3], Complex64::new(0.3, 0.9));
        broken.set([-1, -2, -3], Complex64::new(0.1, 0.4));
        assert!(broken.hermitian_defect() > 0.1);
        broken.enforce_hermitian();
        assert!(broken.hermitian_defect() < 1e-15);
    }

    #[test]
    fn value_at_origin_matches_grid_sample() {
        let g = TorusGrid::new(4, 12).unwrap();
        let f = random_hermitian(g, 4, 11);
        let phys = inverse_transform(&f);
        assert!((f.value_at_origin() - phys.values()[0]).abs() < 1e-12);
    }

    #[test]
    fn gradient_l2_matches_quadrature_of_derivative() {
        // f = cos(k·x) with k = (1,2,0): ‖∇f‖² = |k|²·‖f‖² for a single
        // Hermitian pair.
        let g = TorusGrid::new(3, 12).unwrap();
        let mut f = FourierField::zero(g);
        f.set([1, 2, 0], Complex64::new(0.5, 0.0));
        f.set([-1, -2, 0], Complex64::new(0.5, 0.0));
        let expect = 5.0 * inner_product(&f, &f).unwrap().re;
        assert!((f.gradient_l2_sq() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn truncated_products_match_full_grid_products() {
        // Product of band-2 fields on an internal grid vs. the dedicated
        // cubic-safe main grid; retained modes must agree to rounding.
        let g = TorusGrid::new(5, 24).unwrap();
        let f = random_hermitian(g, 2, 5);
        let h = random_hermitian(g, 2, 6);
        let small = product_truncated(&f, 2, &h, 2, 4);

        let fa = inverse_transform(&f);
        let mut ha = inverse_transform(&h);
        for (b, a) in ha.values_mut().iter_mut().zip(fa.values()) {
            *b *= a;
        }
        let full = forward_transform(&ha);
        for k in g.iter_modes() {
            let want = if k.iter().all(|&ki| ki.abs() <= 4) {
                full.get(k)
            } else {
                Complex64::default()
            };
            assert!(
                (small.get(k) - want).norm() < 1e-12,
                "mode {k:?}: {} vs {}",
                small.get(k),
                want
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn round_trip_and_parseval_hold_for_random_fields(seed in 0u64..1000) {
            let g = TorusGrid::new(3, 9).unwrap();
            let f = random_hermitian(g, 3, seed);
            let phys = inverse_transform(&f);
            let back = forward_transform(&phys);
            let err: f64 = back
                .coeff()
                .iter()
                .zip(f.coeff())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            prop_assert!(err <= 1e-12 * (1.0 + f.l2_norm()));
            let quad = lp_norm(&phys, 2.0).powi(2);
            let spec = inner_product(&f, &f).unwrap().re;
            prop_assert!((quad - spec).abs() <= 1e-10 * (1.0 + spec));
        }

        #[test]
        fn transforms_are_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = TorusGrid::new(2, 8).unwrap();
            let f = random_hermitian(g, 2, seed);
            let h = random_hermitian(g, 2, seed.wrapping_add(1));
            let mut combo = f.clone();
            combo.scale(a);
            combo.add_scaled(&h, b);
            let lhs = inverse_transform(&combo);
            let fa = inverse_transform(&f);
            let ha = inverse_transform(&h);
            for ((l, x), y) in lhs.values().iter().zip(fa.values()).zip(ha.values()) {
                prop_assert!((l - (a * x + b * y)).abs() < 1e-12);
            }
        }
    }
}
