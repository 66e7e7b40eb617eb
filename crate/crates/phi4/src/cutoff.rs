//! Spectral cutoff multipliers and diagonal propagators.
//!
//! Two cutoff profiles drive the approximation operators:
//!
//! * the smooth profile ("profile 1"): 1 on [0,1], 0 on [2,∞), C^∞
//!   nonincreasing in between, built from the standard exp(−1/x) bump;
//! * the ramp profile ("profile 2"): 1 on [0,2], linear down to 0 on [2,4].
//!
//! The order-N projector applies the separable weight
//! ψ(2^{−N}|k₁|)·ψ(2^{−N}|k₂|)·ψ(2^{−N}|k₃|) coefficient-wise. Because the
//! ramp profile equals 1 exactly on [0,2] ⊇ supp ψ⁽¹⁾(·), the profile-2
//! projector acts as the identity on the range of the profile-1 projector.
//!
//! The heat semigroup e^{t(Δ−m₀²)} and the exponential-Euler primitive
//! (`duhamel_step`) are diagonal in the same basis and live here too.

use crate::error::{Error, Result};
use crate::spectral::FourierField;

/// exp(−1/x) for x > 0, else 0 — the smooth bump generator.
fn bump(x: f64) -> f64 {
    if x > 0.0 {
        (-x.recip()).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff profile: 1 on [0,1], 0 on [2,∞), strictly decreasing on
/// (1,2) via the bump quotient h(2−r)/(h(2−r)+h(r−1)).
pub fn psi1(r: f64) -> f64 {
    debug_assert!(r >= 0.0);
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let a = bump(2.0 - r);
        let b = bump(r - 1.0);
        a / (a + b)
    }
}

/// Ramp cutoff profile: 1 on [0,2], linear on [2,4], 0 on [4,∞).
pub fn psi2(r: f64) -> f64 {
    debug_assert!(r >= 0.0);
    if r <= 2.0 {
        1.0
    } else if r >= 4.0 {
        0.0
    } else {
        (4.0 - r) / 2.0
    }
}

/// Which cutoff profile an operator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Smooth profile, support [0,2).
    Smooth1,
    /// Ramp profile, support [0,4).
    Ramp2,
}

impl Profile {
    pub fn eval(self, r: f64) -> f64 {
        match self {
            Profile::Smooth1 => psi1(r),
            Profile::Ramp2 => psi2(r),
        }
    }

    fn tag(self) -> u8 {
        match self {
            Profile::Smooth1 => 1,
            Profile::Ramp2 => 2,
        }
    }

    /// Support radius of the scaled profile ψ(2^{−N}·): weights vanish for
    /// arguments ≥ this.
    fn support_radius(self, n: u32) -> usize {
        match self {
            Profile::Smooth1 => 1usize << (n + 1),
            Profile::Ramp2 => 1usize << (n + 2),
        }
    }

    /// Largest |k_i| an order-`n` projector with this profile can pass
    /// (per axis): one below the support radius.
    pub fn band(self, n: u32) -> usize {
        self.support_radius(n) - 1
    }
}

/// Separable weight ψ(2^{−N}|k₁|)ψ(2^{−N}|k₂|)ψ(2^{−N}|k₃|).
pub fn pn_weight(k: [i64; 3], n: u32, which: Profile) -> f64 {
    let scale = (1u64 << n) as f64;
    let mut w = 1.0;
    for ki in k {
        w *= which.eval(ki.abs() as f64 / scale);
        if w == 0.0 {
            return 0.0;
        }
    }
    w
}

/// Order-N spectral cutoff projector. Requires the grid to retain the full
/// multiplier support: K ≥ 2^{N+1} for the smooth profile, K ≥ 2^{N+2} for
/// the ramp profile.
pub fn apply_pn(f: &FourierField, n: u32, which: Profile) -> Result<FourierField> {
    let required = which.support_radius(n);
    let k_max = f.grid().k_max();
    if k_max < required {
        return Err(Error::InsufficientResolution {
            n,
            which: which.tag(),
            required,
            k_max,
        });
    }
    let mut out = f.clone();
    out.apply_multiplier(|k| pn_weight(k, n, which));
    Ok(out)
}

/// Default simulation grid for cutoff order `n`: K = 2^{N+2} retains the
/// ramp profile's full support exactly, and M is the smallest FFT-friendly
/// size that makes the grid cubic-safe (M ≥ 4K+1).
pub fn default_grid(n: u32) -> crate::spectral::TorusGrid {
    let k_max = 1usize << (n + 2);
    let m = crate::fft::good_fft_size(4 * k_max + 1);
    crate::spectral::TorusGrid::new(k_max, m).expect("default grid is always valid")
}

/// Per-mode decay factor e^{−t(k²+m₀²)}. Shared by [`heat_semigroup`] and
/// [`duhamel_step`] so that the two agree bitwise when forcing vanishes.
#[inline]
fn decay(omega: f64, t: f64) -> f64 {
    (-t * omega).exp()
}

/// Heat propagator: coeff(k) ↦ e^{−t(k²+m₀²)}·coeff(k), t ≥ 0.
pub fn heat_semigroup(f: &FourierField, t: f64, m0: f64) -> FourierField {
    assert!(t >= 0.0, "heat_semigroup needs t >= 0, got {t}");
    assert!(m0 > 0.0, "heat_semigroup needs m0 > 0, got {m0}");
    let m0_sq = m0 * m0;
    let mut out = f.clone();
    out.apply_multiplier(|k| decay(crate::spectral::k_sq(k) + m0_sq, t));
    out
}

/// One exponential-Euler step for ∂_t u = (Δ − m₀²)u + forcing with the
/// forcing frozen over the interval: per mode with ω = k²+m₀²,
/// out = e^{−ωΔt}·state + ((1−e^{−ωΔt})/ω)·forcing.
pub fn duhamel_step(
    state: &FourierField,
    forcing: &FourierField,
    dt: f64,
    m0: f64,
) -> FourierField {
    assert!(dt > 0.0, "duhamel_step needs dt > 0, got {dt}");
    assert_eq!(
        state.grid(),
        forcing.grid(),
        "duhamel_step: state and forcing on different grids"
    );
    let m0_sq = m0 * m0;
    let mut out = state.clone();
    for ((c, f), k) in out
        .coeff_mut()
        .iter_mut()
        .zip(forcing.coeff())
        .zip(state.grid().iter_modes())
    {
        let omega = crate::spectral::k_sq(k) + m0_sq;
        let a = decay(omega, dt);
        *c = a * *c + ((1.0 - a) / omega) * f;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{inner_product, FourierField, TorusGrid};
    use crate::testutil::random_hermitian;
    use num_complex::Complex64;

    #[test]
    fn psi1_profile_values() {
        assert_eq!(psi1(0.0), 1.0);
        assert_eq!(psi1(0.5), 1.0);
        assert_eq!(psi1(1.0), 1.0);
        assert_eq!(psi1(2.0), 0.0);
        assert_eq!(psi1(3.0), 0.0);
        // Midpoint of the transition is exactly 1/2 by symmetry of the bump
        // quotient.
        assert_eq!(psi1(1.5), 0.5);
    }

    #[test]
    fn psi2_profile_values() {
        assert_eq!(psi2(0.0), 1.0);
        assert_eq!(psi2(2.0), 1.0);
        assert_eq!(psi2(3.0), 0.5);
        assert_eq!(psi2(4.0), 0.0);
        assert_eq!(psi2(5.0), 0.0);
    }

    #[test]
    fn profiles_are_nonincreasing_and_bounded() {
        let n = 10_000;
        for profile in [Profile::Smooth1, Profile::Ramp2] {
            let mut prev = f64::INFINITY;
            for i in 0..=n {
                let r = 5.0 * i as f64 / n as f64;
                let v = profile.eval(r);
                assert!((0.0..=1.0).contains(&v));
                assert!(v <= prev + 1e-12, "{profile:?} increases at r={r}");
                prev = v;
            }
        }
    }

    #[test]
    fn pn_weights_match_hand_values() {
        let g = TorusGrid::new(8, 20).unwrap();
        let mut f = FourierField::zero(g);
        let one = Complex64::new(1.0, 0.0);
        f.set([1, 1, 1], one);
        f.set([2, 0, 0], one);
        f.set([3, 0, 0], one);

        let p0 = apply_pn(&f, 0, Profile::Smooth1).unwrap();
        assert_eq!(p0.get([1, 1, 1]), one); // ψ(1)³ = 1
        assert_eq!(p0.get([2, 0, 0]).re, 0.0); // ψ(2) = 0

        let p1 = apply_pn(&f, 1, Profile::Smooth1).unwrap();
        assert_eq!(p1.get([3, 0, 0]).re, 0.5); // ψ(1.5) on one axis only
        assert_eq!(p1.get([1, 1, 1]), one);
    }

    #[test]
    fn pn_rejects_coarse_grids() {
        let g = TorusGrid::new(3, 8).unwrap();
        let f = FourierField::zero(g);
        assert!(matches!(
            apply_pn(&f, 1, Profile::Smooth1),
            Err(Error::InsufficientResolution {
                required: 4,
                which: 1,
                ..
            })
        ));
        assert!(matches!(
            apply_pn(&f, 0, Profile::Ramp2),
            Err(Error::InsufficientResolution {
                required: 4,
                which: 2,
                ..
            })
        ));
        // Boundary: K exactly equal to the support radius is accepted.
        let g4 = TorusGrid::new(4, 10).unwrap();
        assert!(apply_pn(&FourierField::zero(g4), 1, Profile::Smooth1).is_ok());
        assert!(apply_pn(&FourierField::zero(g4), 0, Profile::Ramp2).is_ok());
    }

    #[test]
    fn pn_is_self_adjoint_and_commutes_with_heat() {
        let g = TorusGrid::new(8, 18).unwrap();
        let f = random_hermitian(g, 8, 1);
        let h = random_hermitian(g, 8, 2);
        let pf = apply_pn(&f, 0, Profile::Smooth1).unwrap();
        let ph = apply_pn(&h, 0, Profile::Smooth1).unwrap();
        let lhs = inner_product(&pf, &h).unwrap();
        let rhs = inner_product(&f, &ph).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));

        let a = heat_semigroup(&pf, 0.3, 1.0);
        let b = apply_pn(&heat_semigroup(&f, 0.3, 1.0), 0, Profile::Smooth1).unwrap();
        for (x, y) in a.coeff().iter().zip(b.coeff()) {
            assert!((x - y).norm() <= 1e-12);
        }
    }

    #[test]
    fn ramp_projector_is_identity_on_smooth_projector_range() {
        let g = TorusGrid::new(8, 18).unwrap();
        let f = random_hermitian(g, 8, 3);
        let p1 = apply_pn(&f, 0, Profile::Smooth1).unwrap();
        let p21 = apply_pn(&p1, 0, Profile::Ramp2).unwrap();
        // Exact equality: ψ⁽²⁾ is exactly 1 on the support of ψ⁽¹⁾.
        assert_eq!(p1.coeff(), p21.coeff());
    }

    #[test]
    fn pn_output_vanishes_outside_band_and_stays_hermitian() {
        let g = TorusGrid::new(8, 18).unwrap();
        let f = random_hermitian(g, 8, 4);
        let p = apply_pn(&f, 1, Profile::Smooth1).unwrap();
        assert_eq!(Profile::Smooth1.band(1), 3);
        for k in g.iter_modes() {
            if k.iter().any(|&ki| ki.abs() > 3) {
                assert_eq!(p.get(k), Complex64::default());
            }
        }
        assert!(p.hermitian_defect() < 1e-15);
        assert_eq!(p.occupied_band(), 3);
    }

    #[test]
    fn heat_semigroup_examples() {
        let g = TorusGrid::new(2, 6).unwrap();
        let f = random_hermitian(g, 2, 5);

        // t = 0 is the identity.
        let id = heat_semigroup(&f, 0.0, 1.0);
        assert_eq!(id.coeff(), f.coeff());

        // Single mode decays by e^{−(k²+m₀²)t}.
        let mut ek = FourierField::zero(g);
        ek.set([1, 0, 0], Complex64::new(1.0, 0.0));
        let h = heat_semigroup(&ek, 1.0, 1.0);
        assert!((h.get([1, 0, 0]).re - (-2.0f64).exp()).abs() < 1e-14);

        // Semigroup property.
        let ab = heat_semigroup(&heat_semigroup(&f, 0.4, 1.3), 0.6, 1.3);
        let once = heat_semigroup(&f, 1.0, 1.3);
        for (x, y) in ab.coeff().iter().zip(once.coeff()) {
            assert!((x - y).norm() <= 1e-14 * (1.0 + y.norm()));
        }

        // Monotone contraction in t.
        let early = heat_semigroup(&f, 1.0, 1.0);
        let later = heat_semigroup(&f, 2.0, 1.0);
        for (x, y) in later.coeff().iter().zip(early.coeff()) {
            assert!(x.norm() <= y.norm());
        }
    }

    #[test]
    fn duhamel_matches_heat_and_scalar_ode() {
        let g = TorusGrid::new(2, 6).unwrap();
        let f = random_hermitian(g, 2, 6);
        let zero = FourierField::zero(g);
        let d = duhamel_step(&f, &zero, 0.7, 1.1);
        let h = heat_semigroup(&f, 0.7, 1.1);
        assert_eq!(d.coeff(), h.coeff());

        // Scalar closed form on mode (1,0,0), ω = 2, Δt = 0.5.
        let mut state = FourierField::zero(g);
        state.set([1, 0, 0], Complex64::new(1.0, 0.0));
        let mut forcing = FourierField::zero(g);
        forcing.set([1, 0, 0], Complex64::new(1.0, 0.0));
        let out = duhamel_step(&state, &forcing, 0.5, 1.0);
        let expect = (-1.0f64).exp() + (1.0 - (-1.0f64).exp()) / 2.0;
        assert!((out.get([1, 0, 0]).re - expect).abs() < 1e-15);
        assert!((expect - 0.6839).abs() < 5e-5);

        // Constant forcing held forever drives each mode to forcing(k)/ω.
        let forcing = random_hermitian(g, 2, 7);
        let mut state = FourierField::zero(g);
        for _ in 0..2000 {
            state = duhamel_step(&state, &forcing, 0.05, 1.0);
        }
        for (k, (s, fc)) in g
            .iter_modes()
            .zip(state.coeff().iter().zip(forcing.coeff()))
        {
            let omega = crate::spectral::k_sq(k) + 1.0;
            assert!((s - fc / omega).norm() < 1e-12 * (1.0 + (fc / omega).norm()));
        }
    }
}
