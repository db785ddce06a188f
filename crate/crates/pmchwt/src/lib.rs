//! Boundary-element solver for time-harmonic electromagnetic scattering by a
//! single closed penetrable body, built on the PMCHWT surface integral
//! equation and stabilized against low-frequency breakdown.
//!
//! The solver discretizes the coupled exterior/interior electric and magnetic
//! field integral operators with Rao-Wilton-Glisson (RWG) functions, tested in
//! rotated form, and couples them to Buffa-Christiansen (BC) dual functions
//! through mixed Gram matrices. Surface current unknowns are the equivalent
//! electric and magnetic densities `j_s = n × H` and `m_s = -n × E` on the
//! body surface.
//!
//! A plain PMCHWT matrix becomes catastrophically ill-conditioned as the
//! frequency decreases: depending on the conductivity of the body, the
//! condition number grows like `ω⁻¹` or `ω⁻²` and, for conducting bodies,
//! solenoidal and non-solenoidal current components drift apart by many more
//! orders of magnitude than a fixed-precision solve can resolve. This crate
//! implements the cure as a left/right preconditioner assembled from
//! quasi-Helmholtz projectors: idempotent maps that split the RWG coefficient
//! space into solenoidal (loop + harmonic) and non-solenoidal (star) parts
//! without ever constructing global loops, combined with regime-dependent
//! scalar weights. Three low-frequency regimes are distinguished by the
//! dimensionless coordinates `χ = k₀L`, `γ = √(ωε₀/σ)` and `ξ = √(2/μᵣ)·L/δ`
//! (with `δ` the skin depth and the identity `χ = γξ`):
//!
//! * **QSR** - quasi-static regime (`γ ≥ 1`, includes lossless dielectrics);
//! * **ECFR** - eddy-current-free regime (`γ < 1`, skin depth larger than
//!   the body, `ξ < 1`);
//! * **SEDR** - skin-effect-dominated regime (`γ < 1`, `ξ ≥ 1`).
//!
//! In each regime, and separately for inductive and capacitive excitations,
//! a set of eight scalar coefficients weights the projectors on the left and
//! right of the system matrix so that every block of the preconditioned
//! operator stays bounded as `ω → 0` while the physically dominant current
//! components remain resolvable in finite precision.
//!
//! # Module map
//!
//! * [`mesh`] - closed triangle meshes: loading (OFF, Gmsh MSH v2 ASCII),
//!   validation, orientation repair, connectivity, genus, barycentric
//!   refinement.
//! * [`basis`] - RWG primal space, BC dual space, mixed Gram matrices.
//! * [`projectors`] - loop/star incidence matrices and the four
//!   quasi-Helmholtz projectors applied through sparse Laplacian solves.
//! * [`quadrature`] - Gauss rules on triangles, analytic singular integrals,
//!   Sauter-Schwab tensor rules, adaptive subdivision.
//! * [`operators`] - Galerkin assembly of the vector/scalar-potential and
//!   double-layer operator blocks for arbitrary complex wavenumber.
//! * [`system`] - regime classification, rescaled PMCHWT assembly,
//!   preconditioner construction, direct and iterative solves.
//! * [`excitation`] - plane waves and magnetic-frill voltage sources.
//! * [`fields`] - near/far field evaluation, lumped R/L/C extraction,
//!   skin-depth profiles.
//! * [`diagnostics`] - scaling-law verification: block norms, condition
//!   sweeps, h-refinement studies, dominant-component recovery.
//! * [`linalg`] - dense and sparse linear-algebra services shared by the
//!   other modules (LU, SVD, GMRES, graph-Laplacian pseudoinverse).
//!
//! Dense matrices are `faer::Mat<c64>` (`c64` is `num_complex::Complex64`);
//! geometry uses `nalgebra` 3-vectors. With the default `parallel` feature,
//! assembly and sweeps distribute over rayon while remaining bit-reproducible
//! for any thread count: work is chunked in a fixed order and merged
//! sequentially.

pub mod basis;
pub mod constants;
pub mod diagnostics;
pub mod excitation;
pub mod fields;
pub mod linalg;
pub mod mesh;
pub mod operators;
pub mod projectors;
pub mod quadrature;
pub mod system;

pub use constants::{C0, EPS0, ETA0, MU0};

/// Complex scalar used throughout: `num_complex::Complex64`, which is the
/// same type as `faer::c64`, so matrices and scalar math share one type.
pub type C64 = num_complex::Complex64;

/// Execution strategy for assembly loops and sweeps.
///
/// `Rayon` uses the global rayon pool when the `parallel` feature is
/// enabled and silently degrades to sequential execution otherwise. Both
/// paths produce bit-identical matrices: parallel assembly only reorders
/// independent work items, never the order of floating-point accumulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parallelism {
    /// Single-threaded, in index order.
    Sequential,
    /// Data-parallel over the rayon pool (if compiled in).
    Rayon,
}

impl Default for Parallelism {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Parallelism::Rayon
        }
        #[cfg(not(feature = "parallel"))]
        {
            Parallelism::Sequential
        }
    }
}

/// Map `f` over `0..n` and collect the results in index order, using the
/// rayon pool when asked for (and compiled in) and a plain loop otherwise.
/// Each item must be computed independently of the others; under that
/// contract the output is identical for any thread count, which is what
/// makes parallel assembly bit-reproducible.
pub fn par_map<T, F>(par: Parallelism, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    if par == Parallelism::Rayon {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(&f).collect();
    }
    let _ = par;
    (0..n).map(f).collect()
}
