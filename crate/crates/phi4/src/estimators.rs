//! Trajectory functionals and ensemble uniformity reports.
//!
//! From stored snapshots of one trajectory this module evaluates
//!
//! * the energy functional
//!   𝔛(t) = ∫₀ᵗ(‖∇X≥‖²_{L²} + ‖X²‖²_{L²} + λ‖P_N X²‖⁴_{L⁴}) ds
//!   + sup_{s<t'} s^η ‖X²_{t'} − X²_s‖_{L^{4/3}} / (t'−s)^γ,
//! * the regularity functional
//!   𝔜(t) = ∫₀ᵗ ‖X<‖³_{B₄^{1−ε}} ds + ∫₀ᵗ ‖X≥‖_{B_{4/3}^{1+ε}} ds,
//! * weighted Hölder seminorms over snapshot pairs, and
//! * the ten sup-in-time norms of the enhancement objects.
//!
//! Time integrals use the trapezoid rule on the snapshot times; suprema are
//! maxima over stored snapshots. The discrete maximum is one-sided: it is a
//! lower bound for the continuum supremum, and refining the snapshot set
//! never decreases it. Every estimator is a deterministic function of the
//! snapshot series.

use crate::besov::{besov_from_profile, besov_norm, block_lp_profile, BesovSpec};
use crate::cutoff::{apply_pn, Profile};
use crate::enhancement::{pn_of, EnhancedState};
use crate::error::{Error, Result};
use crate::renorm::ModelParams;
use crate::solver::{derive_x2, SqeState};
use crate::spectral::{inverse_transform, lp_norm, mul_auto, FourierField, RealField};

/// Exponents for the functionals; the default is one admissible point of the
/// constraint region. Construction validates every range and coupling
/// constraint by name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentSet {
    pub alpha: f64,
    pub eps: f64,
    pub gamma: f64,
    pub eta: f64,
    pub q: f64,
    pub eps_tilde: f64,
}

impl Default for ExponentSet {
    fn default() -> Self {
        Self {
            alpha: 0.45,
            eps: 0.005,
            gamma: 0.02,
            eta: 0.55,
            q: 1.1,
            eps_tilde: 0.05,
        }
    }
}

impl ExponentSet {
    pub fn new(
        alpha: f64,
        eps: f64,
        gamma: f64,
        eta: f64,
        q: f64,
        eps_tilde: f64,
    ) -> Result<Self> {
        let set = Self {
            alpha,
            eps,
            gamma,
            eta,
            q,
            eps_tilde,
        };
        set.validate()?;
        Ok(set)
    }

    /// Checks every range and coupling constraint, naming the violated one.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..0.5).contains(&self.alpha) {
            return fail(format!("α in [0, 1/2) violated: α={}", self.alpha));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0 / 16.0) {
            return fail(format!("ε in (0, 1/16] violated: ε={}", self.eps));
        }
        if !(self.gamma > 0.0 && self.gamma < 0.125) {
            return fail(format!("γ in (0, 1/8) violated: γ={}", self.gamma));
        }
        if !(self.eta > 0.5 && self.eta < 1.0) {
            return fail(format!("η in (1/2, 1) violated: η={}", self.eta));
        }
        if !(self.q > 1.0 && self.q < 8.0 / 7.0) {
            return fail(format!("q in (1, 8/7) violated: q={}", self.q));
        }
        if !(self.eps_tilde > 0.0 && self.eps_tilde <= 1.0 / 16.0) {
            return fail(format!("ε̃ in (0, 1/16] violated: ε̃={}", self.eps_tilde));
        }
        if !(2.0 * self.eps < self.gamma) {
            return fail(format!(
                "2ε < γ violated: ε={}, γ={}",
                self.eps, self.gamma
            ));
        }
        if !(self.eta > self.alpha + 2.0 * self.gamma) {
            return fail(format!(
                "η > α + 2γ violated: η={}, α={}, γ={}",
                self.eta, self.alpha, self.gamma
            ));
        }
        if !(2.0 * self.alpha + 4.0 * self.gamma + self.eps < 1.0) {
            return fail(format!(
                "2α + 4γ + ε < 1 violated: α={}, γ={}, ε={}",
                self.alpha, self.gamma, self.eps
            ));
        }
        Ok(())
    }
}

/// One stored snapshot of the decomposed trajectory.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub x2: FourierField,
    pub xlt: FourierField,
    pub xgeq: FourierField,
}

impl TrajectorySample {
    /// Captures the current decomposition together with the derived X².
    pub fn capture(state: &SqeState, enhanced: &EnhancedState) -> Result<Self> {
        Ok(Self {
            t: state.t,
            x2: derive_x2(state, enhanced)?,
            xlt: state.xlt.clone(),
            xgeq: state.xgeq.clone(),
        })
    }
}

/// Which norm a Hölder seminorm measures differences in.
#[derive(Debug, Clone, Copy)]
pub enum NormKind {
    Lp(f64),
    Besov(BesovSpec),
}

fn need_snapshots(len: usize, need: usize) -> Result<()> {
    if len < need {
        return Err(Error::InsufficientSnapshots { need, got: len });
    }
    Ok(())
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Weighted discrete Hölder seminorm max_{s<t} s^η ‖f_t − f_s‖ / (t−s)^γ of
/// the X² series over all ordered snapshot pairs.
pub fn holder_seminorm(
    samples: &[TrajectorySample],
    eta: f64,
    gamma: f64,
    norm: NormKind,
) -> Result<f64> {
    need_snapshots(samples.len(), 2)?;
    assert!(gamma > 0.0 && gamma < 1.0, "γ in (0,1)");
    // For the L^p case, difference norms come from cached physical samples
    // (one transform per snapshot instead of one per pair).
    let phys: Vec<RealField> = match norm {
        NormKind::Lp(_) => samples.iter().map(|s| inverse_transform(&s.x2)).collect(),
        NormKind::Besov(_) => Vec::new(),
    };
    let mut sup = 0.0f64;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let dt = samples[j].t - samples[i].t;
            if dt <= 0.0 {
                continue;
            }
            let dist = match norm {
                NormKind::Lp(p) => {
                    let diff: Vec<f64> = phys[i]
                        .values()
                        .iter()
                        .zip(phys[j].values())
                        .map(|(x, y)| y - x)
                        .collect();
                    let diff = RealField::from_values(samples[i].x2.grid(), diff)
                        .expect("same grid as the source fields");
                    lp_norm(&diff, p)
                }
                NormKind::Besov(spec) => {
                    let mut diff = samples[j].x2.clone();
                    diff.add_scaled(&samples[i].x2, -1.0);
                    besov_norm(&diff, spec)
                }
            };
            sup = sup.max(samples[i].t.powf(eta) * dist / dt.powf(gamma));
        }
    }
    Ok(sup)
}

/// The energy functional 𝔛 (see module docs) over the stored snapshots.
pub fn functional_x(
    samples: &[TrajectorySample],
    expo: &ExponentSet,
    lambda: f64,
    n: u32,
) -> Result<f64> {
    need_snapshots(samples.len(), 2)?;
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let values: Vec<f64> = samples
        .iter()
        .map(|s| {
            s.xgeq.gradient_l2_sq()
                + s.x2.l2_norm().powi(2)
                + lambda * lp_norm(&inverse_transform(&pn_of(&s.x2, n)), 4.0).powi(4)
        })
        .collect();
    let holder = holder_seminorm(samples, expo.eta, expo.gamma, NormKind::Lp(4.0 / 3.0))?;
    Ok(trapezoid(&times, &values) + holder)
}

/// The regularity functional 𝔜 (see module docs) over the stored snapshots.
pub fn functional_y(samples: &[TrajectorySample], eps: f64) -> Result<f64> {
    need_snapshots(samples.len(), 2)?;
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let lt_spec = BesovSpec::new(1.0 - eps, 4.0);
    let geq_spec = BesovSpec::new(1.0 + eps, 4.0 / 3.0);
    let lt: Vec<f64> = samples
        .iter()
        .map(|s| besov_norm(&s.xlt, lt_spec).powi(3))
        .collect();
    let geq: Vec<f64> = samples
        .iter()
        .map(|s| besov_norm(&s.xgeq, geq_spec))
        .collect();
    Ok(trapezoid(&times, &lt) + trapezoid(&times, &geq))
}

/// Names of the ten enhancement sup-quantities, in report order.
pub const ZS_NAMES: [&str; 10] = [
    "z1",
    "pn2_z",
    "z2",
    "z22",
    "z02",
    "z03",
    "z23",
    "z1_pnz03",
    "z1_pnz03_sq",
    "z03_holder",
];

/// The ten sup-in-time norms of the enhancement objects: sup-Besov norms of
/// Z1, P⁽²⁾Z, Z2, Z22, Z02, Z03, Z23 and the two pointwise products
/// Z1·P_N Z03 and Z1·(P_N Z03)², plus the L^∞ Hölder quotient of Z03 over
/// snapshot pairs. For fields with dyadic content above block j = 0, every
/// Besov entry is nonincreasing in ε (all regularity indices decrease);
/// content in block j = −1 carries an ε-increasing weight for the
/// negative-index entries, so no global monotonicity is claimed.
pub fn zs_sups(snaps: &[EnhancedState], expo: &ExponentSet) -> Vec<(&'static str, f64)> {
    let eps = expo.eps;
    let s_rough = -(1.0 + eps) / 2.0;
    let mut sups = [0.0f64; 10];
    let mut z03_phys: Vec<(f64, RealField)> = Vec::with_capacity(snaps.len());
    for snap in snaps {
        let n = snap.consts.n;
        let binf = |f: &FourierField, s: f64| besov_norm(f, BesovSpec::new(s, f64::INFINITY));
        let pn_z03 = pn_of(&snap.z03, n);
        let z1q = mul_auto(&snap.z1, &pn_z03);
        let z1qq = mul_auto(&z1q, &pn_z03);
        let p2z = apply_pn(&snap.z, n, Profile::Ramp2).expect("state grid fits its own order");
        let entries = [
            binf(&snap.z1, s_rough),
            binf(&p2z, s_rough),
            binf(&snap.z2, -1.0 - eps / 24.0),
            binf(&snap.z22, -eps / 4.0),
            binf(&snap.z02, 1.0 - eps / 2.0),
            binf(&snap.z03, 0.5 - eps / 4.0),
            binf(&snap.z23, s_rough),
            binf(&z1q, s_rough),
            binf(&z1qq, s_rough),
        ];
        for (acc, v) in sups.iter_mut().zip(entries) {
            *acc = acc.max(v);
        }
        z03_phys.push((snap.t, inverse_transform(&snap.z03)));
    }
    for (i, (s, a)) in z03_phys.iter().enumerate() {
        for (t, b) in &z03_phys[i + 1..] {
            let dt = t - s;
            if dt <= 0.0 {
                continue;
            }
            let diff = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (y - x).abs())
                .fold(0.0f64, f64::max);
            sups[9] = sups[9].max(diff / dt.powf(expo.gamma));
        }
    }
    ZS_NAMES.iter().copied().zip(sups).collect()
}

/// Everything measured on one trajectory, with the run metadata needed to
/// reproduce it.
#[derive(Debug, Clone)]
pub struct EstimatorReport {
    pub x_functional: f64,
    pub y_functional: f64,
    /// Weighted Hölder seminorm of X² in B_{4/3}^α.
    pub holder_seminorm: f64,
    /// sup over snapshots of t^η ‖X<‖³ in B₄^{α+2γ}.
    pub sup_lt: f64,
    /// sup over snapshots of t^η ‖X≥‖ in B_{4/3}^{α+2γ}.
    pub sup_geq: f64,
    /// ‖X(0)‖² in B_∞^{−1/2−ε̃} of the initial full field.
    pub x0_binf_sq: f64,
    pub zs_sups: Vec<(&'static str, f64)>,
    pub exponents: ExponentSet,
    pub n: u32,
    pub seed: u64,
    pub dt: f64,
    pub ensemble: usize,
}

impl EstimatorReport {
    /// All scalar entries finite and nonnegative.
    pub fn check(&self) -> Result<()> {
        let mut entries = vec![
            ("X", self.x_functional),
            ("Y", self.y_functional),
            ("holder", self.holder_seminorm),
            ("sup_lt", self.sup_lt),
            ("sup_geq", self.sup_geq),
            ("x0_binf_sq", self.x0_binf_sq),
        ];
        entries.extend(self.zs_sups.iter().copied());
        for (name, v) in entries {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "estimator entry {name} is not a finite nonnegative number: {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Evaluates the full per-trajectory report. `x0_full` is the trajectory's
/// initial full field. Block L^p profiles are computed once per (field, p)
/// and reused across the Besov indices that share them, matching the
/// one-norm-at-a-time operations bitwise.
pub fn compute_report(
    samples: &[TrajectorySample],
    enhanced_snaps: &[EnhancedState],
    x0_full: &FourierField,
    expo: &ExponentSet,
    params: &ModelParams,
    ensemble: usize,
) -> Result<EstimatorReport> {
    expo.validate()?;
    let n = params.n;
    let x_functional = functional_x(samples, expo, params.lambda, n)?;

    // 𝔜 and the two weighted sups share block profiles per snapshot.
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let s_mid = expo.alpha + 2.0 * expo.gamma;
    let mut y_lt = Vec::with_capacity(samples.len());
    let mut y_geq = Vec::with_capacity(samples.len());
    let (mut sup_lt, mut sup_geq) = (0.0f64, 0.0f64);
    for s in samples {
        let lt_profile = block_lp_profile(&s.xlt, 4.0);
        let geq_profile = block_lp_profile(&s.xgeq, 4.0 / 3.0);
        y_lt.push(besov_from_profile(&lt_profile, 1.0 - expo.eps, f64::INFINITY).powi(3));
        y_geq.push(besov_from_profile(&geq_profile, 1.0 + expo.eps, f64::INFINITY));
        let weight = s.t.powf(expo.eta);
        sup_lt =
            sup_lt.max(weight * besov_from_profile(&lt_profile, s_mid, f64::INFINITY).powi(3));
        sup_geq = sup_geq.max(weight * besov_from_profile(&geq_profile, s_mid, f64::INFINITY));
    }
    let y_functional = trapezoid(&times, &y_lt) + trapezoid(&times, &y_geq);

    let holder = holder_seminorm(
        samples,
        expo.eta,
        expo.gamma,
        NormKind::Besov(BesovSpec::new(expo.alpha, 4.0 / 3.0)),
    )?;

    let x0_binf_sq = besov_norm(
        x0_full,
        BesovSpec::new(-0.5 - expo.eps_tilde, f64::INFINITY),
    )
    .powi(2);

    let report = EstimatorReport {
        x_functional,
        y_functional,
        holder_seminorm: holder,
        sup_lt,
        sup_geq,
        x0_binf_sq,
        zs_sups: zs_sups(enhanced_snaps, expo),
        exponents: *expo,
        n,
        seed: params.seed,
        dt: params.dt,
        ensemble,
    };
    report.check()?;
    Ok(report)
}

/// The six ensemble quantities the uniformity table tracks.
pub const TIGHTNESS_QUANTITIES: [&str; 6] = [
    "mean_holder",
    "mean_X",
    "mean_Y_pow_q",
    "mean_sup_lt",
    "mean_sup_geq",
    "mean_x0_binf_sq",
];

/// Minimum ensemble size per cutoff level for the uniformity table.
pub const MIN_TIGHTNESS_ENSEMBLE: usize = 30;

/// One row of the uniformity table: ensemble mean and standard error of one
/// quantity at one cutoff level.
#[derive(Debug, Clone)]
pub struct TightnessRow {
    pub n: u32,
    pub quantity: &'static str,
    pub mean: f64,
    pub std_err: f64,
    pub ensemble: usize,
}

/// Ensemble means across cutoff levels with monotone-growth red flags.
#[derive(Debug, Clone)]
pub struct TightnessReport {
    pub rows: Vec<TightnessRow>,
    pub red_flags: Vec<String>,
    pub growth_factor: f64,
}

pub(crate) fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates per-trajectory reports into the per-(N, quantity) table of
/// ensemble means and standard errors, and flags any quantity whose mean
/// grows monotonically across the whole N range by more than
/// `growth_factor`. Uniform boundedness in N predicts no flags; a flag
/// signals a suspect run setup, not a certified divergence.
pub fn tightness_report(
    per_n: &[(u32, Vec<EstimatorReport>)],
    growth_factor: f64,
) -> Result<TightnessReport> {
    if per_n.len() < 2 {
        return Err(Error::Config(format!(
            "uniformity table needs at least 2 cutoff levels, got {}",
            per_n.len()
        )));
    }
    for (n, reports) in per_n {
        if reports.len() < MIN_TIGHTNESS_ENSEMBLE {
            return Err(Error::Config(format!(
                "ensemble for N = {n} has {} trajectories, need at least {MIN_TIGHTNESS_ENSEMBLE}",
                reports.len()
            )));
        }
    }
    let extract = |r: &EstimatorReport, q: &str| -> f64 {
        match q {
            "mean_holder" => r.holder_seminorm,
            "mean_X" => r.x_functional,
            "mean_Y_pow_q" => r.y_functional.powf(r.exponents.q),
            "mean_sup_lt" => r.sup_lt,
            "mean_sup_geq" => r.sup_geq,
            "mean_x0_binf_sq" => r.x0_binf_sq,
            _ => unreachable!(),
        }
    };
    let mut rows = Vec::new();
    let mut red_flags = Vec::new();
    for quantity in TIGHTNESS_QUANTITIES {
        let mut means = Vec::new();
        for (n, reports) in per_n {
            let values: Vec<f64> = reports.iter().map(|r| extract(r, quantity)).collect();
            let (mean, std_err) = mean_se(&values);
            rows.push(TightnessRow {
                n: *n,
                quantity,
                mean,
                std_err,
                ensemble: values.len(),
            });
            means.push(mean);
        }
        let monotone = means.windows(2).all(|w| w[1] > w[0]);
        let first = means.first().copied().unwrap_or(0.0);
        let last = means.last().copied().unwrap_or(0.0);
        if monotone && first > 0.0 && last / first > growth_factor {
            red_flags.push(format!(
                "{quantity} grows monotonically by {:.2}x across the N range (threshold {growth_factor}x)",
                last / first
            ));
        }
    }
    Ok(TightnessReport {
        rows,
        red_flags,
        growth_factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoff::default_grid;
    use crate::renorm::RenormConstants;
    use crate::spectral::{two_pi_3_2, TorusGrid, TAU};
    use num_complex::Complex64;

    fn sample_at(t: f64, x2: FourierField) -> TrajectorySample {
        TrajectorySample {
            t,
            xlt: FourierField::zero(x2.grid()),
            xgeq: x2.clone(),
            x2,
        }
    }

    #[test]
    fn exponent_constraints_are_named() {
        assert!(ExponentSet::default().validate().is_ok());
        let cases = [
            (
                ExponentSet::new(0.45, 0.02, 0.03, 0.55, 1.1, 0.05),
                "2ε < γ",
            ),
            (
                ExponentSet::new(0.45, 0.005, 0.02, 0.48, 1.1, 0.05),
                "η in (1/2, 1)",
            ),
            (
                ExponentSet::new(0.45, 0.005, 0.03, 0.505, 1.1, 0.05),
                "η > α + 2γ",
            ),
            (
                ExponentSet::new(0.49, 0.005, 0.02, 0.99, 1.1, 0.05),
                "2α + 4γ + ε < 1",
            ),
            (
                ExponentSet::new(0.45, 0.005, 0.02, 0.55, 1.2, 0.05),
                "q in (1, 8/7)",
            ),
            (
                ExponentSet::new(0.45, 0.005, 0.02, 0.55, 1.1, 0.07),
                "ε̃ in (0, 1/16]",
            ),
        ];
        for (result, needle) in cases {
            match result {
                Err(Error::Config(msg)) => {
                    assert!(msg.contains(needle), "expected '{needle}' in: {msg}")
                }
                other => panic!("expected named constraint error for {needle}, got {other:?}"),
            }
        }
    }

    #[test]
    fn zero_trajectory_gives_zero_functionals() {
        let grid = default_grid(0);
        let samples: Vec<TrajectorySample> = [0.0, 0.1, 0.2]
            .into_iter()
            .map(|t| sample_at(t, FourierField::zero(grid)))
            .collect();
        let expo = ExponentSet::default();
        assert_eq!(functional_x(&samples, &expo, 0.3, 0).unwrap(), 0.0);
        assert_eq!(functional_y(&samples, expo.eps).unwrap(), 0.0);
        assert_eq!(
            holder_seminorm(&samples, expo.eta, expo.gamma, NormKind::Lp(2.0)).unwrap(),
            0.0
        );
        assert!(matches!(
            functional_x(&samples[..1], &expo, 0.3, 0),
            Err(Error::InsufficientSnapshots { need: 2, got: 1 })
        ));
    }

    #[test]
    fn single_mode_trajectory_matches_scalar_quadrature() {
        // X²(t) = c(t)(e_k + e_{−k}) at k = (1,0,0), N = 1 (the window
        // weight there is exactly 1): every 𝔛 ingredient has a scalar
        // formula, and the time integrand is g(t) = 4c² + 6λc⁴/(2π)³.
        let n = 1;
        let grid = default_grid(n);
        let c = |t: f64| 0.7 + 0.5 * t;
        let expo = ExponentSet::default();
        let lambda = 0.8;
        let make_samples = |times: &[f64]| -> Vec<TrajectorySample> {
            times
                .iter()
                .map(|&t| {
                    let mut f = FourierField::zero(grid);
                    f.set([1, 0, 0], Complex64::new(c(t), 0.0));
                    f.set([-1, 0, 0], Complex64::new(c(t), 0.0));
                    sample_at(t, f)
                })
                .collect()
        };
        let base = {
            let mut f = FourierField::zero(grid);
            f.set([1, 0, 0], Complex64::new(1.0, 0.0));
            f.set([-1, 0, 0], Complex64::new(1.0, 0.0));
            f
        };
        // The L^{4/3} Hölder distances all rescale one base-field norm.
        let base_l43 = lp_norm(&inverse_transform(&base), 4.0 / 3.0);
        let g = |t: f64| {
            let cc = c(t);
            // ‖∇X‖² = 2c², ‖X‖² = 2c², and the L⁴ norm of the cosine wave
            // A·cos(x₁) with A = 2c(2π)^{−3/2} integrates to A⁴(2π)³·3/8.
            let amp = 2.0 * cc / two_pi_3_2();
            4.0 * cc * cc + lambda * amp.powi(4) * TAU.powi(3) * 3.0 / 8.0
        };
        let scalar_holder = |times: &[f64]| {
            let mut sup = 0.0f64;
            for (i, &s) in times.iter().enumerate() {
                for &t in &times[i + 1..] {
                    let dist = (c(t) - c(s)).abs() * base_l43;
                    sup = sup.max(s.powf(expo.eta) * dist / (t - s).powf(expo.gamma));
                }
            }
            sup
        };

        // Trapezoid-level agreement on one snapshot grid.
        let times: Vec<f64> = (0..=6).map(|i| i as f64 * 0.05).collect();
        let integrand: Vec<f64> = times.iter().map(|&t| g(t)).collect();
        let oracle = trapezoid(&times, &integrand) + scalar_holder(&times);
        let got = functional_x(&make_samples(&times), &expo, lambda, n).unwrap();
        assert!(
            (got - oracle).abs() <= 1e-12 * oracle,
            "functional mismatch: {got} vs {oracle}"
        );

        // Against the exact time integral the quadrature error is O(Δt²):
        // halving the spacing divides it by ~4. Here ∫c^m dt has the closed
        // form Δ(c^{m+1})/(0.5(m+1)).
        let exact = {
            let (c0, ct) = (c(0.0), c(0.3));
            4.0 * (ct.powi(3) - c0.powi(3)) / 1.5
                + (6.0 * lambda / TAU.powi(3)) * (ct.powi(5) - c0.powi(5)) / 2.5
        };
        let quad_err = |step: f64, count: usize| {
            let times: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
            let f = functional_x(&make_samples(&times), &expo, lambda, n).unwrap();
            (f - scalar_holder(&times) - exact).abs()
        };
        let ratio = quad_err(0.05, 6) / quad_err(0.025, 12);
        assert!(
            (3.8..4.2).contains(&ratio),
            "quadrature not second order: ratio {ratio}"
        );

        // Affine λ dependence with everything else fixed.
        let samples = make_samples(&times);
        let x0 = functional_x(&samples, &expo, 0.0, n).unwrap();
        let x1 = functional_x(&samples, &expo, 1.0, n).unwrap();
        let x2 = functional_x(&samples, &expo, 2.0, n).unwrap();
        assert!(((x2 - x1) - (x1 - x0)).abs() <= 1e-12 * (1.0 + x1.abs()));
    }

    #[test]
    fn holder_refinement_is_monotone() {
        let grid = TorusGrid::new(4, 18).unwrap();
        let make =
            |t: f64, seed: u64| sample_at(t, crate::testutil::random_hermitian(grid, 3, seed));
        let coarse = vec![make(0.1, 1), make(0.3, 2)];
        let mut fine = coarse.clone();
        fine.insert(1, make(0.2, 3));
        for norm in [
            NormKind::Lp(4.0 / 3.0),
            NormKind::Besov(BesovSpec::new(0.45, 4.0 / 3.0)),
        ] {
            let lo = holder_seminorm(&coarse, 0.55, 0.02, norm).unwrap();
            let hi = holder_seminorm(&fine, 0.55, 0.02, norm).unwrap();
            assert!(hi >= lo, "refinement decreased the sup: {hi} < {lo}");
        }

        // Constant-in-time trajectory: zero seminorm.
        let steady = vec![make(0.1, 7), {
            let mut s = make(0.4, 7);
            s.t = 0.4;
            s
        }];
        assert_eq!(
            holder_seminorm(&steady, 0.55, 0.02, NormKind::Lp(2.0)).unwrap(),
            0.0
        );

        // Two snapshots: single hand-computable ratio.
        let a = make(0.2, 11);
        let b = make(0.5, 12);
        let mut diff = b.x2.clone();
        diff.add_scaled(&a.x2, -1.0);
        let expect =
            0.2f64.powf(0.55) * lp_norm(&inverse_transform(&diff), 2.0) / 0.3f64.powf(0.02);
        let got = holder_seminorm(&[a, b], 0.55, 0.02, NormKind::Lp(2.0)).unwrap();
        assert!((got - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn regularity_functional_splits_and_orders() {
        let grid = default_grid(1);
        let f = crate::testutil::random_hermitian(grid, 6, 21);
        let g = crate::testutil::random_hermitian(grid, 6, 22);
        let geq_only = |a: &FourierField, b: &FourierField| {
            vec![
                TrajectorySample {
                    t: 0.0,
                    x2: a.clone(),
                    xlt: FourierField::zero(grid),
                    xgeq: a.clone(),
                },
                TrajectorySample {
                    t: 0.2,
                    x2: b.clone(),
                    xlt: FourierField::zero(grid),
                    xgeq: b.clone(),
                },
            ]
        };
        // X< ≡ 0: only the second integral contributes.
        let y = functional_y(&geq_only(&f, &g), 0.01).unwrap();
        let spec = BesovSpec::new(1.01, 4.0 / 3.0);
        let oracle = 0.5 * 0.2 * (besov_norm(&f, spec) + besov_norm(&g, spec));
        assert!((y - oracle).abs() <= 1e-12 * oracle);

        // ε direction, tested one integral at a time on a field whose
        // dyadic content sits above block j = 0 (per-block weights 2^{js}
        // are then strictly monotone in s). The first integral carries
        // s = 1 − ε (shrinks as ε grows), the second s = 1 + ε (grows).
        let mut high = FourierField::zero(grid);
        high.set([4, 1, 0], Complex64::new(0.4, 0.2));
        high.set([-4, -1, 0], Complex64::new(0.4, -0.2));
        let lt_only: Vec<TrajectorySample> = [0.0, 0.1]
            .into_iter()
            .map(|t| TrajectorySample {
                t,
                x2: high.clone(),
                xlt: high.clone(),
                xgeq: FourierField::zero(grid),
            })
            .collect();
        let y_lt_small = functional_y(&lt_only, 0.004).unwrap();
        let y_lt_large = functional_y(&lt_only, 0.05).unwrap();
        assert!(
            y_lt_large < y_lt_small,
            "X< integral should shrink with ε: {y_lt_large} !< {y_lt_small}"
        );
        let hs = geq_only(&high, &high);
        let y_geq_small = functional_y(&hs, 0.004).unwrap();
        let y_geq_large = functional_y(&hs, 0.05).unwrap();
        assert!(
            y_geq_large > y_geq_small,
            "X≥ integral should grow with ε: {y_geq_large} !> {y_geq_small}"
        );
    }

    #[test]
    fn enhancement_sups_on_crafted_states() {
        let n = 1;
        let grid = default_grid(n);
        let consts = RenormConstants {
            n,
            m0: 1.0,
            c1: 0.1,
            c2: 0.01,
        };
        // All-zero enhancement: zero vector. The Wick-constant offsets that
        // a zero noise path still carries are zeroed by hand so that every
        // stored object vanishes.
        let zero = FourierField::zero(grid);
        let mut dead = EnhancedState::new(zero.clone(), 0.0, n, consts).unwrap();
        dead.z1 = zero.clone();
        dead.z2 = zero.clone();
        dead.z3 = zero.clone();
        dead.z22 = zero.clone();
        dead.z23 = zero.clone();
        let mut dead2 = dead.clone();
        dead2.t = 0.3;
        let expo = ExponentSet::default();
        let sups = zs_sups(&[dead.clone(), dead2], &expo);
        assert_eq!(sups.len(), 10);
        for (name, v) in &sups {
            assert_eq!(*v, 0.0, "{name} should vanish");
        }

        // Content in a single dyadic range above block j = 0: every entry
        // with an ε-dependent index is strictly decreasing in ε there.
        let mut live = dead;
        let mut f = FourierField::zero(grid);
        f.set([4, 1, 0], Complex64::new(0.3, 0.1));
        f.set([-4, -1, 0], Complex64::new(0.3, -0.1));
        live.z = f.clone();
        live.z1 = f.clone();
        live.z2 = f.clone();
        live.z22 = f.clone();
        live.z02 = f.clone();
        live.z23 = f;
        let small = zs_sups(&[live.clone()], &ExponentSet { eps: 0.004, ..expo });
        let large = zs_sups(&[live.clone()], &ExponentSet { eps: 0.05, ..expo });
        for idx in [0usize, 1, 2, 3, 4, 6] {
            assert!(
                large[idx].1 < small[idx].1,
                "{}: {} !< {}",
                ZS_NAMES[idx],
                large[idx].1,
                small[idx].1
            );
        }
        // Z03 and the product entries are zero while Z03 ≡ 0.
        for idx in [5usize, 7, 8, 9] {
            assert_eq!(small[idx].1, 0.0, "{}", ZS_NAMES[idx]);
        }

        // Hölder entry: two snapshots of a spatially constant Z03 path with
        // values 0.2 and 0.9 give sup = 0.7/Δt^γ.
        let mut a = live.clone();
        let mut b = live;
        a.t = 0.1;
        b.t = 0.35;
        a.z03 = FourierField::constant(grid, 0.2);
        b.z03 = FourierField::constant(grid, 0.9);
        let sups = zs_sups(&[a, b], &expo);
        let expect = 0.7 / 0.25f64.powf(expo.gamma);
        let got = sups[9].1;
        assert!((got - expect).abs() <= 1e-12 * expect, "{got} vs {expect}");
    }

    #[test]
    fn uniformity_table_flags_growth() {
        let expo = ExponentSet::default();
        let report = |x: f64| EstimatorReport {
            x_functional: x,
            y_functional: 1.0,
            holder_seminorm: 0.5,
            sup_lt: 0.1,
            sup_geq: 0.2,
            x0_binf_sq: 1.0,
            zs_sups: vec![],
            exponents: expo,
            n: 0,
            seed: 0,
            dt: 0.05,
            ensemble: MIN_TIGHTNESS_ENSEMBLE,
        };
        let ensemble = |x: f64| -> Vec<EstimatorReport> {
            (0..MIN_TIGHTNESS_ENSEMBLE)
                .map(|i| report(x + 0.01 * i as f64))
                .collect()
        };
        let per_n = vec![
            (0u32, ensemble(1.0)),
            (1u32, ensemble(2.0)),
            (2u32, ensemble(8.0)),
        ];
        let table = tightness_report(&per_n, 3.0).unwrap();
        assert_eq!(table.rows.len(), 6 * 3);
        assert!(
            table.red_flags.iter().any(|f| f.contains("mean_X")),
            "expected a mean_X growth flag, got {:?}",
            table.red_flags
        );
        // Flat quantities are not flagged.
        assert!(!table.red_flags.iter().any(|f| f.contains("mean_holder")));
        let x_row = table
            .rows
            .iter()
            .find(|r| r.quantity == "mean_X" && r.n == 0)
            .unwrap();
        assert_eq!(x_row.ensemble, MIN_TIGHTNESS_ENSEMBLE);
        assert!((x_row.mean - 1.145).abs() < 1e-12);
        assert!(x_row.std_err > 0.0);

        // Insufficient ensemble and too few levels are named errors.
        let short = vec![(0u32, ensemble(1.0)), (1u32, vec![report(2.0); 29])];
        match tightness_report(&short, 3.0) {
            Err(Error::Config(msg)) => assert!(msg.contains("N = 1"), "got: {msg}"),
            other => panic!("expected ensemble error, got {other:?}"),
        }
        assert!(matches!(
            tightness_report(&per_n[..1], 3.0),
            Err(Error::Config(_))
        ));

        // Determinism: same input, same table.
        let again = tightness_report(&per_n, 3.0).unwrap();
        for (a, b) in table.rows.iter().zip(&again.rows) {
            assert_eq!(a.mean.to_bits(), b.mean.to_bits());
            assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
        }
    }
}
