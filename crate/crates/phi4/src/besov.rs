//! Littlewood–Paley blocks, Besov norms, and Bony paraproducts.
//!
//! The dyadic partition of unity is built by telescoping a single smooth
//! profile θ (1 on [0,1], 0 on [4/3,∞)): the low-frequency weight is χ = θ
//! and the annular weight is φ(r) = θ(r/2) − θ(r). Because scaling by powers
//! of two is exact in binary floating point, the partition identity
//! χ(r) + Σ_j φ(2^{−j} r) = 1 telescopes *exactly*, so block reconstruction
//! is accurate to machine rounding rather than to a quadrature tolerance.
//!
//! Blocks: Δ_{−1} multiplies coefficients by χ(|k|), Δ_j (j ≥ 0) by
//! φ(2^{−j}|k|), and S_j = Σ_{i ≤ j−1} Δ_i (S_{−1} := 0, Δ_{−2} := 0).
//! Paraproducts follow the convention
//!
//! ```text
//! f ⊘< g = Σ_{j≥0} (S_j f)(Δ_{j+1} g),      f ⊘> g = g ⊘< f,
//! f ⊘= g = Σ_{j≥−1} (Δ_j f)(Δ_{j−1} + Δ_j + Δ_{j+1}) g,
//! ```
//!
//! which partition the pairs (i, j) of the double block sum exactly, so
//! ⊘< + ⊘= + ⊘> recovers the pointwise product on retained modes.
//!
//! Products are evaluated pseudo-spectrally on internal grids sized from the
//! factors' occupied bands (alias-free by construction and usually much
//! smaller than the field's own grid). Block *norms*, by contrast, are
//! always quadratures on the field's own grid, since for p ∉ {2} they are
//! Riemann sums whose value is pinned to that grid.

use crate::error::{Error, Result};
use crate::fft;
use crate::spectral::{
    inverse_transform, k_sq, lp_norm, phys_samples, spectral_from_samples, FourierField,
    TorusGrid,
};

/// exp(−1/x) for x > 0, else 0.
fn bump(x: f64) -> f64 {
    if x > 0.0 {
        (-x.recip()).exp()
    } else {
        0.0
    }
}

/// Smooth profile θ: 1 on [0,1], 0 on [4/3,∞), strictly decreasing between.
fn theta(r: f64) -> f64 {
    const UPPER: f64 = 4.0 / 3.0;
    if r <= 1.0 {
        1.0
    } else if r >= UPPER {
        0.0
    } else {
        let a = bump(UPPER - r);
        let b = bump(r - 1.0);
        a / (a + b)
    }
}

/// Low-frequency partition weight, supported in [0, 4/3).
pub fn chi(r: f64) -> f64 {
    theta(r)
}

/// Annular partition weight φ(r) = θ(r/2) − θ(r), supported in (1, 8/3)
/// ⊂ [3/4, 8/3].
pub fn phi_dyadic(r: f64) -> f64 {
    theta(0.5 * r) - theta(r)
}

/// Multiplier weight of block Δ_j at radius `r` = |k|.
pub fn block_weight(j: i32, r: f64) -> f64 {
    if j == -1 {
        chi(r)
    } else {
        // Scaling by 2^{−j} is exact, which keeps the telescoping exact.
        phi_dyadic(r / f64::powi(2.0, j))
    }
}

/// Largest block index carried by a grid: blocks above this vanish on every
/// field the grid can represent.
pub fn j_max(grid: TorusGrid) -> i32 {
    let top_radius = 3.0f64.sqrt() * grid.k_max() as f64;
    (top_radius / 0.75).log2().ceil() as i32 + 1
}

/// Largest j for which Δ_j can be nonzero on a field of per-axis band
/// `band` (radius √3·band); −1 when only the k = 0 mode can be present.
fn live_top(band: usize) -> i32 {
    if band == 0 {
        -1
    } else {
        let top_radius = 3.0f64.sqrt() * band as f64;
        (top_radius / 0.75).log2().floor() as i32
    }
}

/// Littlewood–Paley block Δ_j of `f` (j ≥ −1), as a multiplier on the
/// field's own grid.
pub fn dyadic_block(f: &FourierField, j: i32) -> FourierField {
    assert!(j >= -1, "dyadic_block needs j >= -1, got {j}");
    let mut out = f.clone();
    out.apply_multiplier(|k| block_weight(j, k_sq(k).sqrt()));
    out
}

/// Besov space parameters for ‖f‖ = ℓʳ-norm over j of 2^{js}‖Δ_j f‖_{Lᵖ}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovSpec {
    pub s: f64,
    pub p: f64,
    pub r: f64,
}

impl BesovSpec {
    /// The common r = ∞ case, written B_p^s.
    pub fn new(s: f64, p: f64) -> Self {
        Self {
            s,
            p,
            r: f64::INFINITY,
        }
    }

    pub fn with_r(s: f64, p: f64, r: f64) -> Self {
        assert!(p >= 1.0 && r >= 1.0, "Besov indices need p, r >= 1");
        Self { s, p, r }
    }
}

/// Lᵖ norms of all blocks Δ_{−1}, …, Δ_{j_max} of `f`, quadratures on the
/// field's own grid. Index 0 corresponds to j = −1. Computing the profile
/// once lets callers evaluate several Besov norms of the same field (same p,
/// different s or r) for one set of transforms.
pub fn block_lp_profile(f: &FourierField, p: f64) -> Vec<f64> {
    let top = j_max(f.grid());
    let live = live_top(f.occupied_band()).min(top);
    let mut profile = vec![0.0; (top + 2) as usize];
    for j in -1..=live {
        let block = dyadic_block(f, j);
        profile[(j + 1) as usize] = lp_norm(&inverse_transform(&block), p);
    }
    profile
}

/// Besov norm from a precomputed block profile (index 0 ↔ j = −1):
/// ℓʳ-norm of (2^{js}·profile[j]).
pub fn besov_from_profile(profile: &[f64], s: f64, r: f64) -> f64 {
    let weighted = profile
        .iter()
        .enumerate()
        .map(|(i, &b)| f64::powi(2.0, i as i32 - 1).powf(s) * b);
    if r.is_infinite() {
        weighted.fold(0.0, f64::max)
    } else {
        weighted.map(|w| w.powf(r)).sum::<f64>().powf(r.recip())
    }
}

/// Besov norm ‖f‖_{B_{p,r}^s}.
pub fn besov_norm(f: &FourierField, spec: BesovSpec) -> f64 {
    assert!(spec.p >= 1.0 && spec.r >= 1.0, "Besov indices need p, r >= 1");
    besov_from_profile(&block_lp_profile(f, spec.p), spec.s, spec.r)
}

// ---------------------------------------------------------------------------
// Paraproduct engine.
//
// A `BlockSet` holds the physical samples of every live block of one field
// on one internal grid. The solver decomposes each operand once per step and
// assembles all the paraproducts it needs from the shared sets; the public
// one-shot operations below do the same for a single pair.
// ---------------------------------------------------------------------------

/// Physical samples of the live Littlewood–Paley blocks of one field on an
/// internal grid of side `m_aux`.
pub(crate) struct BlockSet {
    grid: TorusGrid,
    m_aux: usize,
    band: usize,
    /// blocks[(j+1)] = samples of Δ_j; `None` for blocks that vanish by
    /// support arithmetic.
    blocks: Vec<Option<Vec<f64>>>,
    top: i32,
}

impl BlockSet {
    /// Decomposes `f` (occupied band ≤ `band`) into block samples on an
    /// `m_aux`³ grid. `m_aux` must resolve the band; alias safety of later
    /// products is the caller's charge.
    pub(crate) fn decompose(f: &FourierField, band: usize, m_aux: usize) -> Self {
        let band = band.min(f.grid().k_max());
        let top = live_top(band);
        let mut blocks = Vec::with_capacity((top + 2) as usize);
        for j in -1..=top {
            // Per-axis band of Δ_j f: the annulus tops out at radius
            // (8/3)·2^j, and is itself capped by the field band.
            let block_band = if j == -1 {
                1usize.min(band)
            } else {
                (((8.0 / 3.0) * f64::powi(2.0, j)).floor() as usize).min(band)
            };
            let mut g = f.clone();
            g.apply_multiplier(|k| block_weight(j, k_sq(k).sqrt()));
            blocks.push(Some(phys_samples(&g, block_band, m_aux)));
        }
        Self {
            grid: f.grid(),
            m_aux,
            band,
            blocks,
            top,
        }
    }

    fn get(&self, j: i32) -> Option<&[f64]> {
        if j < -1 || j > self.top {
            return None;
        }
        self.blocks[(j + 1) as usize].as_deref()
    }
}

fn check_compatible(a: &BlockSet, b: &BlockSet) {
    assert_eq!(a.grid, b.grid, "paraproduct operands on different grids");
    assert_eq!(
        a.m_aux, b.m_aux,
        "paraproduct operands decomposed on different internal grids"
    );
}

/// Σ_{j≥0} (S_j f)(Δ_{j+1} g) assembled from precomputed blocks, truncated
/// to modes |k_i| ≤ keep.
pub(crate) fn lt_from_blocks(fb: &BlockSet, gb: &BlockSet, keep: usize) -> FourierField {
    check_compatible(fb, gb);
    // The product of band-limited factors cannot reach beyond the band sum.
    let keep = keep.min(fb.band + gb.band);
    let n = fb.m_aux.pow(3);
    let mut partial = vec![0.0; n]; // S_j f, running
    let mut acc = vec![0.0; n];
    let mut partial_live = false;
    for j in 0..=gb.top - 1 {
        // S_j f accumulates blocks up to j − 1.
        if let Some(fj) = fb.get(j - 1) {
            for (s, v) in partial.iter_mut().zip(fj) {
                *s += v;
            }
            partial_live = true;
        }
        if !partial_live {
            continue;
        }
        if let Some(gj) = gb.get(j + 1) {
            for ((a, s), v) in acc.iter_mut().zip(&partial).zip(gj) {
                *a += s * v;
            }
        }
    }
    spectral_from_samples(&acc, fb.m_aux, fb.grid, keep)
}

/// Σ_{j≥−1} (Δ_j f)(Δ_{j−1} + Δ_j + Δ_{j+1}) g from precomputed blocks,
/// truncated to modes |k_i| ≤ keep.
pub(crate) fn res_from_blocks(fb: &BlockSet, gb: &BlockSet, keep: usize) -> FourierField {
    check_compatible(fb, gb);
    let keep = keep.min(fb.band + gb.band);
    let n = fb.m_aux.pow(3);
    let mut tri = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for j in -1..=fb.top {
        let fj = match fb.get(j) {
            Some(fj) => fj,
            None => continue,
        };
        tri.fill(0.0);
        let mut any = false;
        for l in [j - 1, j, j + 1] {
            if let Some(gl) = gb.get(l) {
                for (t, v) in tri.iter_mut().zip(gl) {
                    *t += v;
                }
                any = true;
            }
        }
        if !any {
            continue;
        }
        for ((a, f), t) in acc.iter_mut().zip(fj).zip(&tri) {
            *a += f * t;
        }
    }
    spectral_from_samples(&acc, fb.m_aux, fb.grid, keep)
}

/// Validates operands and decomposes both on a shared alias-free internal
/// grid sized from the occupied bands, keeping all grid modes.
fn prepare(f: &FourierField, g: &FourierField) -> Result<(BlockSet, BlockSet, usize)> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch {
            k_a: f.grid().k_max(),
            m_a: f.grid().m(),
            k_b: g.grid().k_max(),
            m_b: g.grid().m(),
        });
    }
    f.grid().require_cubic_safe()?;
    let keep = f.grid().k_max();
    let (bf, bg) = (f.occupied_band(), g.occupied_band());
    let m_aux = fft::good_fft_size(bf + bg + keep + 1);
    Ok((
        BlockSet::decompose(f, bf, m_aux),
        BlockSet::decompose(g, bg, m_aux),
        keep,
    ))
}

/// Low-high paraproduct f ⊘< g.
pub fn para_lt(f: &FourierField, g: &FourierField) -> Result<FourierField> {
    let (fb, gb, keep) = prepare(f, g)?;
    Ok(lt_from_blocks(&fb, &gb, keep))
}

/// High-low paraproduct f ⊘> g = g ⊘< f.
pub fn para_gt(f: &FourierField, g: &FourierField) -> Result<FourierField> {
    let (fb, gb, keep) = prepare(f, g)?;
    Ok(lt_from_blocks(&gb, &fb, keep))
}

/// Resonant part f ⊘= g.
pub fn resonance(f: &FourierField, g: &FourierField) -> Result<FourierField> {
    let (fb, gb, keep) = prepare(f, g)?;
    Ok(res_from_blocks(&fb, &gb, keep))
}

/// f ⊘≤ g = f ⊘< g + f ⊘= g (shared block decomposition, exact sum).
pub fn para_leq(f: &FourierField, g: &FourierField) -> Result<FourierField> {
    let (fb, gb, keep) = prepare(f, g)?;
    let mut out = lt_from_blocks(&fb, &gb, keep);
    out.add_scaled(&res_from_blocks(&fb, &gb, keep), 1.0);
    Ok(out)
}

/// f ⊘≥ g = f ⊘> g + f ⊘= g (shared block decomposition, exact sum).
pub fn para_geq(f: &FourierField, g: &FourierField) -> Result<FourierField> {
    let (fb, gb, keep) = prepare(f, g)?;
    let mut out = lt_from_blocks(&gb, &fb, keep);
    out.add_scaled(&res_from_blocks(&fb, &gb, keep), 1.0);
    Ok(out)
}

/// Max partition-of-unity residual |χ(r) + Σ_j φ(2^{−j}r) − 1| sampled on
/// `samples` radii spanning [0, √3·K]. Diagnostic used by the self-check.
pub fn partition_residual(grid: TorusGrid, samples: usize) -> f64 {
    let top_radius = 3.0f64.sqrt() * grid.k_max() as f64;
    let jm = j_max(grid);
    let mut worst = 0.0f64;
    for i in 0..=samples {
        let r = top_radius * i as f64 / samples as f64;
        let mut total = chi(r);
        for j in 0..=jm {
            total += block_weight(j, r);
        }
        worst = worst.max((total - 1.0).abs());
    }
    worst
}
