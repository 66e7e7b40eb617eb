//! The Ornstein–Uhlenbeck driving process and its renormalized polynomial
//! enhancement.
//!
//! One trajectory carries, besides Z itself,
//!
//! * the Wick powers Z1 = P_N Z, Z2 = (P_N Z)² − C₁, Z3 = (P_N Z)³ − 3C₁·P_N Z,
//! * the convolved objects Z02 = ∫_{−∞}^t e^{(t−s)(Δ−m₀²)} P_N Z2_s ds and
//!   Z03 (same with Z3), realized by exponential-Euler steps from a burn-in
//!   start,
//! * the auxiliary history J = ∫ e^{(t−s)(Δ−m₀²)} P_N² Z2_s ds,
//! * the resonance objects Z22 = Z2 ⊘= P_N Z02 − C₂ and
//!   Z23 = Z2 ⊘= P_N Z03 − 3C₂·Z1.
//!
//! The OU update is distributionally exact per mode (not Euler):
//! z ← e^{−ωΔt} z + σ ξ with σ² = (1 − e^{−2ωΔt})/(2ω) and ξ the
//! unit-variance normalization of the increment, so a μ₀ start stays exactly
//! stationary. The identical noise term drives the full SPDE state, which is
//! what makes the rough parts cancel in derived differences.

use crate::besov::{res_from_blocks, BlockSet};
use crate::cutoff::{apply_pn, duhamel_step, pn_weight, Profile};
use crate::error::Result;
use crate::fft;
use crate::renorm::{sample_mu0, ModelParams, RenormConstants};
use crate::spectral::{
    k_sq, phys_samples, spectral_from_samples, two_pi_3_2, FourierField, TorusGrid,
};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// One step's worth of spectral white-noise increments: Hermitian-symmetric,
/// E|ΔW(k)|² = Δt for every mode.
#[derive(Debug, Clone)]
pub struct NoiseIncrement {
    dt: f64,
    field: FourierField,
}

impl NoiseIncrement {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn field(&self) -> &FourierField {
        &self.field
    }

    /// The zero increment carrying a step size — deterministic stepping.
    pub fn silent(grid: TorusGrid, dt: f64) -> Self {
        assert!(dt >= 0.0, "silent increment needs dt >= 0, got {dt}");
        Self {
            dt,
            field: FourierField::zero(grid),
        }
    }

    /// Aggregates consecutive increments into a single increment spanning
    /// their combined step, W(t+Δ₁+…+Δₙ) − W(t). This is the coarsening used
    /// when a refined and an unrefined run must share one noise path.
    pub fn combine(parts: &[NoiseIncrement]) -> NoiseIncrement {
        assert!(!parts.is_empty(), "combine needs at least one increment");
        let grid = parts[0].field.grid();
        let mut dt = 0.0;
        let mut field = FourierField::zero(grid);
        for part in parts {
            assert!(
                part.field.grid() == grid,
                "combine needs increments on one grid"
            );
            dt += part.dt;
            for (acc, c) in field.coeff_mut().iter_mut().zip(part.field.coeff()) {
                *acc += c;
            }
        }
        NoiseIncrement { dt, field }
    }
}

/// Draws one Hermitian white-noise increment. `dt = 0` yields the zero
/// increment.
pub fn draw_noise<R: Rng + ?Sized>(grid: TorusGrid, dt: f64, rng: &mut R) -> NoiseIncrement {
    assert!(dt >= 0.0, "draw_noise needs dt >= 0, got {dt}");
    let mut field = FourierField::zero(grid);
    if dt > 0.0 {
        let sd_zero = dt.sqrt();
        let sd_half = (dt / 2.0).sqrt();
        for k in grid.iter_modes() {
            if k < [0, 0, 0] {
                continue;
            }
            if k == [0, 0, 0] {
                let x: f64 = StandardNormal.sample(rng);
                field.set(k, Complex64::new(sd_zero * x, 0.0));
            } else {
                let x: f64 = StandardNormal.sample(rng);
                let y: f64 = StandardNormal.sample(rng);
                let c = Complex64::new(sd_half * x, sd_half * y);
                field.set(k, c);
                field.set([-k[0], -k[1], -k[2]], c.conj());
            }
        }
    }
    NoiseIncrement { dt, field }
}

/// The stochastic-convolution term σ_k·ξ_k of one exact OU step, where
/// ξ = ΔW/√Δt and σ_k² = (1 − e^{−2ωΔt})/(2ω). Shared verbatim by the OU
/// update and the full SPDE update (the shared-noise contract).
pub(crate) fn ou_noise_term(dw: &NoiseIncrement, m0: f64) -> FourierField {
    let mut out = dw.field.clone();
    if dw.dt == 0.0 {
        return out; // already zero
    }
    let m0_sq = m0 * m0;
    let inv_sqrt_dt = dw.dt.sqrt().recip();
    out.apply_multiplier(|k| {
        let omega = k_sq(k) + m0_sq;
        let a = (-dw.dt * omega).exp();
        (((1.0 - a * a) / (2.0 * omega)).sqrt()) * inv_sqrt_dt
    });
    out
}

/// Exact-in-law OU update z ← e^{−ωΔt} z + σ ξ (see module docs). The decay
/// factor is the heat multiplier, so a zero increment reproduces
/// `heat_semigroup` bitwise.
pub fn step_z(z: &FourierField, dw: &NoiseIncrement, m0: f64) -> FourierField {
    assert_eq!(z.grid(), dw.field.grid(), "step_z: grid mismatch");
    let mut out = crate::cutoff::heat_semigroup(z, dw.dt, m0);
    out.add_scaled(&ou_noise_term(dw, m0), 1.0);
    out
}

/// Per-axis band retained by P_N⁽¹⁾ on this grid.
pub(crate) fn band1(n: u32, grid: TorusGrid) -> usize {
    Profile::Smooth1.band(n).min(grid.k_max())
}

/// Wick powers of the cutoff field: Z1 = P_N Z, Z2 = Z1² − C₁,
/// Z3 = Z1³ − 3C₁·Z1 (squares and cubes pointwise, alias-free, constants on
/// the k = 0 coefficient with the (2π)^{3/2} normalization).
pub fn wick_powers(
    z: &FourierField,
    n: u32,
    c1: f64,
) -> Result<(FourierField, FourierField, FourierField)> {
    let grid = z.grid();
    grid.require_cubic_safe()?;
    let z1 = apply_pn(z, n, Profile::Smooth1)?;
    let band = band1(n, grid);
    let keep2 = (2 * band).min(grid.k_max());
    let keep3 = (3 * band).min(grid.k_max());
    // Alias-free for every retained mode of the cube (the square is weaker).
    let m_aux = fft::good_fft_size(3 * band + keep3 + 1);
    let u = phys_samples(&z1, band, m_aux);
    let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
    let cu: Vec<f64> = u.iter().map(|v| v * v * v).collect();
    let mut z2 = spectral_from_samples(&sq, m_aux, grid, keep2);
    let mut z3 = spectral_from_samples(&cu, m_aux, grid, keep3);

    let zero_idx = grid.index_of([0, 0, 0]);
    z2.coeff_mut()[zero_idx] -= c1 * two_pi_3_2();
    z3.add_scaled(&z1, -3.0 * c1);
    Ok((z1, z2, z3))
}

/// Z plus its full enhancement at one time point.
#[derive(Debug, Clone)]
pub struct EnhancedState {
    pub t: f64,
    pub consts: RenormConstants,
    pub z: FourierField,
    pub z1: FourierField,
    pub z2: FourierField,
    pub z3: FourierField,
    pub z02: FourierField,
    pub z03: FourierField,
    pub j: FourierField,
    pub z22: FourierField,
    pub z23: FourierField,
}

impl EnhancedState {
    /// Fresh state at time `t` with the given Z and zero convolution
    /// history; Wick and resonance objects are made current.
    pub fn new(z: FourierField, t: f64, n: u32, consts: RenormConstants) -> Result<Self> {
        let grid = z.grid();
        let zero = FourierField::zero(grid);
        let mut state = Self {
            t,
            consts,
            z,
            z1: zero.clone(),
            z2: zero.clone(),
            z3: zero.clone(),
            z02: zero.clone(),
            z03: zero.clone(),
            j: zero.clone(),
            z22: zero.clone(),
            z23: zero,
        };
        state.refresh_wick(n)?;
        state.refresh_resonance(n);
        Ok(state)
    }

    fn refresh_wick(&mut self, n: u32) -> Result<()> {
        let (z1, z2, z3) = wick_powers(&self.z, n, self.consts.c1)?;
        self.z1 = z1;
        self.z2 = z2;
        self.z3 = z3;
        Ok(())
    }

    /// Recomputes Z22 and Z23 from the current Z2, Z02, Z03.
    fn refresh_resonance(&mut self, n: u32) {
        let grid = self.z.grid();
        let band = band1(n, grid);
        let band2 = (2 * band).min(grid.k_max());
        let keep = (3 * band).min(grid.k_max());
        let m_aux = fft::good_fft_size(band2 + band + keep + 1);

        let z2_blocks = BlockSet::decompose(&self.z2, band2, m_aux);
        let pn_z02 = pn_of(&self.z02, n);
        let pn_z03 = pn_of(&self.z03, n);

        let mut z22 = res_from_blocks(
            &z2_blocks,
            &BlockSet::decompose(&pn_z02, band, m_aux),
            keep,
        );
        let zero_idx = grid.index_of([0, 0, 0]);
        z22.coeff_mut()[zero_idx] -= self.consts.c2 * two_pi_3_2();

        let mut z23 = res_from_blocks(
            &z2_blocks,
            &BlockSet::decompose(&pn_z03, band, m_aux),
            keep,
        );
        z23.add_scaled(&self.z1, -3.0 * self.consts.c2);

        self.z22 = z22;
        self.z23 = z23;
    }

    /// Advances the convolution history by one exponential-Euler step with
    /// the current (frozen) Wick forcings, then the OU field by the shared
    /// increment, then refreshes the Wick and resonance objects at the new
    /// time. The same increment must also be fed to the SPDE state.
    pub fn advance(&mut self, n: u32, dw: &NoiseIncrement) -> Result<()> {
        let dt = dw.dt();
        let m0 = self.consts.m0;
        let pn_z2 = pn_of(&self.z2, n);
        self.z02 = duhamel_step(&self.z02, &pn_z2, dt, m0);
        self.z03 = duhamel_step(&self.z03, &pn_of(&self.z3, n), dt, m0);
        self.j = duhamel_step(&self.j, &pn_of(&pn_z2, n), dt, m0);
        self.z = step_z(&self.z, dw, m0);
        self.t += dt;
        self.refresh_wick(n)?;
        self.refresh_resonance(n);
        Ok(())
    }
}

/// Multiplier application of P_N⁽¹⁾ without the resolution re-check (the
/// state was validated at construction).
pub(crate) fn pn_of(f: &FourierField, n: u32) -> FourierField {
    let mut out = f.clone();
    out.apply_multiplier(|k| pn_weight(k, n, Profile::Smooth1));
    out
}

/// Draws Z ~ μ₀ at t = −burn_in_t with empty convolution history and evolves
/// the enhancement to t = 0 with steps of size `burn_in_dt`, realizing the
/// ∫_{−∞} limits with per-mode error ≤ e^{−m₀²·burn_in_t}. With
/// `burn_in_t = 0` the history starts empty at t = 0.
pub fn init_enhanced<R: Rng + ?Sized>(
    params: &ModelParams,
    consts: &RenormConstants,
    burn_in_t: f64,
    burn_in_dt: f64,
    rng: &mut R,
) -> Result<EnhancedState> {
    params.validate()?;
    let z = sample_mu0(params.grid, params.m0, rng);
    let mut state = EnhancedState::new(z, -burn_in_t, params.n, *consts)?;
    if burn_in_t > 0.0 {
        let steps = (burn_in_t / burn_in_dt).round().max(1.0) as u64;
        let dt = burn_in_t / steps as f64;
        for _ in 0..steps {
            let dw = draw_noise(params.grid, dt, rng);
            state.advance(params.n, &dw)?;
        }
    }
    state.t = 0.0; // clear accumulated rounding in the time variable
    Ok(state)
}
