//! Pseudo-spectral simulator and analysis toolkit for the dynamical Φ⁴ model
//! on the 3-torus with spectral cutoffs.
//!
//! The crate is organized bottom-up:
//!
//! * [`spectral`] — torus grids, Fourier/physical representations, transforms,
//!   norms and inner products;
//! * [`cutoff`] — smooth and ramp spectral cutoff multipliers, heat and
//!   Duhamel propagators;
//! * [`besov`] — Littlewood–Paley blocks, Besov norms and paraproducts;
//! * [`renorm`] — mass and energy renormalization constants, the cutoff
//!   potential, Gaussian reference measure sampling and pCN equilibration;
//! * [`enhancement`] — Ornstein–Uhlenbeck driving process and its Wick
//!   polynomials and iterated-integral objects;
//! * [`solver`] — exponential (Duhamel) integrators for the full cubic SPDE
//!   and its para-controlled decomposition;
//! * [`estimators`] — Besov/Hölder moment functionals over trajectories;
//! * [`config`], [`io`], [`run`] — TOML configuration, binary/CSV/JSON
//!   artifacts and the CLI drivers.

pub mod besov;
pub mod config;
pub mod cutoff;
pub mod enhancement;
pub mod error;
pub mod estimators;
mod fft;
pub mod io;
pub mod renorm;
pub mod run;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil {
    use crate::spectral::{FourierField, TorusGrid};
    use num_complex::Complex64;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Random Hermitian-symmetric field supported on |k_i| ≤ band, with
    /// coefficients uniform in the unit square. Deterministic in `seed`.
    pub fn random_hermitian(grid: TorusGrid, band: usize, seed: u64) -> FourierField {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let b = band.min(grid.k_max()) as i64;
        let mut f = FourierField::zero(grid);
        for k in grid.iter_modes() {
            if k.iter().any(|&ki| ki.abs() > b) || k < [0, 0, 0] {
                continue;
            }
            if k == [0, 0, 0] {
                f.set(k, Complex64::new(rng.random_range(-1.0..1.0), 0.0));
            } else {
                let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                f.set(k, v);
                f.set([-k[0], -k[1], -k[2]], v.conj());
            }
        }
        f
    }
}
