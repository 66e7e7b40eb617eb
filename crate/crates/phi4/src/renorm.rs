//! Renormalization constants, the cutoff energy, and samplers for the
//! Gaussian reference measure and its quartic perturbation.
//!
//! The mass constant is the exact lattice sum
//!
//! ```text
//! C₁ = 1/(2(2π)³) · Σ_k ψ_N(k)² / (k² + m₀²),
//! ```
//!
//! and the energy (sunset) constant the exact double sum
//!
//! ```text
//! C₂ = 1/(2(2π)⁶) · Σ_{l₁,l₂} ψ_N(l₁)²ψ_N(l₂)²ψ_N(l₁+l₂)²
//!        / [(l₁²+m₀²)(l₂²+m₀²)(l₁²+l₂²+(l₁+l₂)²+3m₀²)],
//! ```
//!
//! with ψ_N(k) = Πᵢ ψ⁽¹⁾(2^{−N}|kᵢ|). Both sums run over the multiplier's
//! exact support, so the values are cutoff-exact, not quadratures. The
//! double sum exploits the per-axis joint sign-flip symmetry
//! (l₁ᵢ, l₂ᵢ) ↦ (−l₁ᵢ, −l₂ᵢ) for an 8× reduction, parallelizes over l₁ with
//! a deterministic pairwise reduction, and refuses budgets beyond N = 5.
//!
//! The quartic energy U, the Gaussian sampler (covariance [2(−Δ+m₀²)]^{−1}),
//! and a preconditioned Crank–Nicolson chain targeting
//! exp(−U(φ)) μ₀(dφ) complete the module.

use crate::cutoff::{psi1, Profile};
use crate::error::{Error, Result};
use crate::fft;
use crate::spectral::{phys_samples, FourierField, TorusGrid, TAU};
use num_complex::Complex64;
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Model parameters shared by samplers, solvers and reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Cutoff order N.
    pub n: u32,
    /// Mass m₀ > 0.
    pub m0: f64,
    /// Coupling λ ∈ (0, λ₀].
    pub lambda: f64,
    /// Coupling ceiling λ₀.
    pub lambda0: f64,
    /// Time horizon T.
    pub t_final: f64,
    /// Step size Δt.
    pub dt: f64,
    /// Master RNG seed.
    pub seed: u64,
    /// Spatial discretization.
    pub grid: TorusGrid,
}

impl ModelParams {
    /// Checks every named invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.m0 <= 0.0 {
            return Err(Error::Config(format!("m0 must be > 0, got {}", self.m0)));
        }
        if !(self.lambda > 0.0 && self.lambda <= self.lambda0) {
            return Err(Error::Config(format!(
                "need 0 < lambda <= lambda0, got lambda = {}, lambda0 = {}",
                self.lambda, self.lambda0
            )));
        }
        // T = 0 is the degenerate "initial data only" run; otherwise the
        // step must fit the horizon.
        if !(self.dt > 0.0 && (self.t_final == 0.0 || self.dt <= self.t_final)) {
            return Err(Error::Config(format!(
                "need 0 < dt <= T (or T = 0), got dt = {}, T = {}",
                self.dt, self.t_final
            )));
        }
        let ramp_support = 1usize << (self.n + 2);
        if self.grid.k_max() < ramp_support {
            return Err(Error::InsufficientResolution {
                n: self.n,
                which: 2,
                required: ramp_support,
                k_max: self.grid.k_max(),
            });
        }
        self.grid.require_cubic_safe()?;
        Ok(())
    }
}

/// The two renormalization constants for one (N, m₀).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormConstants {
    pub n: u32,
    pub m0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl RenormConstants {
    pub fn compute(n: u32, m0: f64) -> Result<Self> {
        Ok(Self {
            n,
            m0,
            c1: compute_c1(n, m0),
            c2: compute_c2(n, m0)?,
        })
    }

    /// The effective mass counterterm C₁ − 3λC₂ appearing in the energy and
    /// the renormalized drift.
    pub fn mass_counterterm(&self, lambda: f64) -> f64 {
        self.c1 - 3.0 * lambda * self.c2
    }
}

/// Squared separable cutoff weights ψ(2^{−N}|l|)² for |l| ≤ L, one axis.
fn axis_weight_sq_table(n: u32) -> Vec<f64> {
    let l_top = (1usize << (n + 1)) - 1;
    let scale = (1u64 << n) as f64;
    (0..=l_top)
        .map(|l| {
            let w = psi1(l as f64 / scale);
            w * w
        })
        .collect()
}

/// Exact mass-renormalization sum C₁ = 1/(2(2π)³)·Σ ψ_N(k)²/(k²+m₀²).
pub fn compute_c1(n: u32, m0: f64) -> f64 {
    assert!(m0 > 0.0, "compute_c1 needs m0 > 0");
    let wsq = axis_weight_sq_table(n);
    let l_top = (wsq.len() - 1) as i64;
    let m0_sq = m0 * m0;
    let mut sum = 0.0;
    for k1 in -l_top..=l_top {
        let w1 = wsq[k1.unsigned_abs() as usize];
        for k2 in -l_top..=l_top {
            let w12 = w1 * wsq[k2.unsigned_abs() as usize];
            for k3 in -l_top..=l_top {
                let w = w12 * wsq[k3.unsigned_abs() as usize];
                let k_sq = (k1 * k1 + k2 * k2 + k3 * k3) as f64;
                sum += w / (k_sq + m0_sq);
            }
        }
    }
    sum / (2.0 * TAU.powi(3))
}

/// Number of kernel evaluations the C₂ double sum would take at order `n`,
/// after the 8× symmetry reduction, as log₁₀.
fn c2_cost_log10(n: u32) -> f64 {
    let side = 2.0 * (1u64 << (n + 1)) as f64 - 1.0;
    (side.powi(3) / 8.0 * side.powi(3)).log10()
}

const C2_N_MAX: u32 = 5;

/// Exact energy-renormalization double sum C₂ (see module docs). Guarded:
/// orders above N = 5 are refused with a cost estimate.
pub fn compute_c2(n: u32, m0: f64) -> Result<f64> {
    assert!(m0 > 0.0, "compute_c2 needs m0 > 0");
    if n > C2_N_MAX {
        return Err(Error::BudgetExceeded {
            n,
            cost_log10: c2_cost_log10(n),
            n_max: C2_N_MAX,
        });
    }
    let wsq = axis_weight_sq_table(n);
    let l_top = (wsq.len() - 1) as i64;
    let m0_sq = m0 * m0;

    // Fundamental domain of the per-axis joint sign flip: l₁ᵢ ≥ 0, and
    // l₂ᵢ ≥ 0 on axes where l₁ᵢ = 0. Each term re-enters with multiplicity
    // 2^{#axes with (l₁ᵢ,l₂ᵢ) ≠ (0,0)}.
    let side = (l_top + 1) as usize;
    let l1_points: Vec<[i64; 3]> = (0..side.pow(3))
        .map(|i| {
            let s = side;
            [(i / (s * s)) as i64, ((i / s) % s) as i64, (i % s) as i64]
        })
        .collect();

    let partials: Vec<f64> = l1_points
        .par_iter()
        .map(|&l1| {
            let w1 = wsq[l1[0] as usize] * wsq[l1[1] as usize] * wsq[l1[2] as usize];
            if w1 == 0.0 {
                return 0.0;
            }
            let l1_sq = (l1[0] * l1[0] + l1[1] * l1[1] + l1[2] * l1[2]) as f64;
            let d1 = l1_sq + m0_sq;
            let lo = |i: usize| if l1[i] == 0 { 0 } else { -l_top };
            let mut acc = 0.0;
            for l2x in lo(0)..=l_top {
                let sx = l1[0] + l2x;
                if sx.abs() > l_top {
                    continue;
                }
                let wx = wsq[l2x.unsigned_abs() as usize] * wsq[sx.unsigned_abs() as usize];
                let mx = if l1[0] == 0 && l2x == 0 { 1.0 } else { 2.0 };
                for l2y in lo(1)..=l_top {
                    let sy = l1[1] + l2y;
                    if sy.abs() > l_top {
                        continue;
                    }
                    let wy = wx * wsq[l2y.unsigned_abs() as usize] * wsq[sy.unsigned_abs() as usize];
                    let mxy = mx * if l1[1] == 0 && l2y == 0 { 1.0 } else { 2.0 };
                    for l2z in lo(2)..=l_top {
                        let sz = l1[2] + l2z;
                        if sz.abs() > l_top {
                            continue;
                        }
                        let w = wy * wsq[l2z.unsigned_abs() as usize] * wsq[sz.unsigned_abs() as usize];
                        if w == 0.0 {
                            continue;
                        }
                        let mult = mxy * if l1[2] == 0 && l2z == 0 { 1.0 } else { 2.0 };
                        let l2_sq = (l2x * l2x + l2y * l2y + l2z * l2z) as f64;
                        let s_sq = (sx * sx + sy * sy + sz * sz) as f64;
                        let denom = d1 * (l2_sq + m0_sq) * (l1_sq + l2_sq + s_sq + 3.0 * m0_sq);
                        acc += mult * w1 * w / denom;
                    }
                }
            }
            acc
        })
        .collect();

    Ok(tree_sum(&partials) / (2.0 * TAU.powi(6)))
}

/// Pairwise summation: deterministic result independent of how the partials
/// were produced (thread count, chunking).
fn tree_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            tree_sum(a) + tree_sum(b)
        }
    }
}

/// Cutoff quartic energy
/// U(φ) = ∫ (λ/4)·u⁴ − (3λ/2)(C₁−3λC₂)·u² dx with u = P_N⁽¹⁾φ.
///
/// The quartic integral is evaluated alias-free on an internal grid sized to
/// u's band, so the value is exact for the retained modes; the quadratic
/// part is spectral (Parseval). Requires a cubic-safe grid.
pub fn energy_un(phi: &FourierField, params: &ModelParams, consts: &RenormConstants) -> f64 {
    let grid = phi.grid();
    assert!(grid.is_cubic_safe(), "energy_un requires a cubic-safe grid");
    let band = Profile::Smooth1.band(params.n).min(grid.k_max());
    let mut u = phi.clone();
    u.apply_multiplier(|k| crate::cutoff::pn_weight(k, params.n, Profile::Smooth1));

    let quad: f64 = u.coeff().iter().map(|c| c.norm_sqr()).sum();

    let m_aux = fft::good_fft_size(4 * band + 1);
    let h3 = (TAU / m_aux as f64).powi(3);
    let quart: f64 = phys_samples(&u, band, m_aux)
        .iter()
        .map(|v| v * v * v * v)
        .sum::<f64>()
        * h3;

    let lambda = params.lambda;
    0.25 * lambda * quart - 1.5 * lambda * consts.mass_counterterm(lambda) * quad
}

/// One draw from the centered Gaussian with covariance [2(−Δ+m₀²)]^{−1}:
/// independent per conjugate pair, E|⟨φ,e_k⟩|² = 1/(2(k²+m₀²)), mode 0 real.
pub fn sample_mu0<R: Rng + ?Sized>(grid: TorusGrid, m0: f64, rng: &mut R) -> FourierField {
    let m0_sq = m0 * m0;
    let mut out = FourierField::zero(grid);
    for k in grid.iter_modes() {
        if k < [0, 0, 0] {
            continue;
        }
        let omega = crate::spectral::k_sq(k) + m0_sq;
        if k == [0, 0, 0] {
            let sd = (2.0 * omega).recip().sqrt();
            let x: f64 = StandardNormal.sample(rng);
            out.set(k, Complex64::new(sd * x, 0.0));
        } else {
            // Re and Im each N(0, 1/(4ω)) so that E|c|² = 1/(2ω).
            let sd = (4.0 * omega).recip().sqrt();
            let x: f64 = StandardNormal.sample(rng);
            let y: f64 = StandardNormal.sample(rng);
            let c = Complex64::new(sd * x, sd * y);
            out.set(k, c);
            out.set([-k[0], -k[1], -k[2]], c.conj());
        }
    }
    out
}

/// Outcome of a Metropolis run: the final state and chain diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcnStats {
    pub steps: u64,
    pub accepted: u64,
}

impl PcnStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            1.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }
}

/// Default pCN proposal size.
pub const PCN_BETA: f64 = 0.2;

/// Preconditioned Crank–Nicolson chain targeting exp(−U(φ))·μ₀(dφ):
/// propose φ' = √(1−β²)·φ + β·ξ with ξ ~ μ₀, accept with probability
/// min(1, exp(U(φ) − U(φ'))). The normalizing constant never enters.
///
/// Runs `n_steps` updates from a fresh μ₀ draw and returns the final state
/// with diagnostics. The energy of the current state is cached, so each step
/// costs one μ₀ draw and one energy evaluation.
pub fn metropolis_mun<R: Rng + ?Sized>(
    params: &ModelParams,
    consts: &RenormConstants,
    n_steps: u64,
    beta: f64,
    rng: &mut R,
) -> Result<(FourierField, PcnStats)> {
    params.validate()?;
    if !(0.0 < beta && beta <= 1.0) {
        return Err(Error::Config(format!("pCN beta must be in (0,1], got {beta}")));
    }
    let grid = params.grid;
    let keep = (1.0 - beta * beta).sqrt();
    let mut state = sample_mu0(grid, params.m0, rng);
    let mut energy = energy_un(&state, params, consts);
    let mut accepted = 0u64;
    for _ in 0..n_steps {
        let xi = sample_mu0(grid, params.m0, rng);
        let mut proposal = state.clone();
        proposal.scale(keep);
        proposal.add_scaled(&xi, beta);
        let proposal_energy = energy_un(&proposal, params, consts);
        // Accept iff u < exp(energy − proposal_energy).
        let u: f64 = rng.random();
        if u.ln() < energy - proposal_energy {
            state = proposal;
            energy = proposal_energy;
            accepted += 1;
        }
    }
    Ok((
        state,
        PcnStats {
            steps: n_steps,
            accepted,
        },
    ))
}
