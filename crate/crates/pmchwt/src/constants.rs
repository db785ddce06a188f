//! Physical constants and the numerical tolerances used across the crate.
//!
//! Every tolerance that a test or an internal consistency check relies on is
//! defined here, once, with a written justification. Modules must not bury
//! magic thresholds in their own code: if an invariant needs a band, the band
//! lives here where its provenance can be audited.

/// Speed of light in vacuum (m/s), exact by SI definition.
pub const C0: f64 = 299_792_458.0;

/// Vacuum permeability μ₀ (H/m). The classical 4π×10⁻⁷ value; the post-2019
/// SI correction is ~1e-10 relative, far below every tolerance in this crate.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Vacuum permittivity ε₀ = 1/(μ₀c²) (F/m).
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);

/// Free-space wave impedance η₀ = √(μ₀/ε₀) ≈ 376.73 Ω.
pub const ETA0: f64 = 376.730_313_412_109_3;

/// Exact-identity tolerance: relations that hold by construction up to
/// floating-point roundoff (complementarity by subtraction, stored
/// antisymmetry, linearity in a source amplitude). A handful of ulps,
/// scaled generously.
pub const TOL_EXACT: f64 = 1e-14;

/// Algebraic-identity tolerance for quantities that pass through a
/// factorization or a well-conditioned solve: projector idempotence,
/// loop annihilation of the scalar-potential block, Gram antisymmetry
/// recomputed by quadrature. Direct sparse/dense solves with one step of
/// iterative refinement reach 1e-12 residuals; composing a few of them
/// loses at most two more digits.
pub const TOL_IDENTITY: f64 = 1e-10;

/// Target relative residual for graph-Laplacian pseudoinverse solves
/// (direct Cholesky + one refinement step, or deflated CG).
pub const TOL_LAPLACIAN_RESIDUAL: f64 = 1e-12;

/// Relative target for adaptive quadrature of singular/near-singular
/// operator entries. Chosen two digits above machine precision so that the
/// Galerkin symmetry of the vector/scalar-potential blocks (an invariant the
/// assembly does not enforce by construction) is met honestly.
pub const TOL_QUADRATURE: f64 = 1e-8;

/// Quadrature-limited identity tolerance: identities that cancellation-test
/// the quadrature itself (static double-layer annihilation on loops). These
/// are exact in exact arithmetic but dominated by the 1e-8 integration
/// target, relative to the full matrix norm.
pub const TOL_QUADRATURE_IDENTITY: f64 = 1e-6;

/// Relative residual demanded of the restarted GMRES solver. The paper-level
/// experiments compare currents from direct and iterative solves; 1e-10
/// keeps the iterative error far below physical tolerances.
pub const TOL_GMRES: f64 = 1e-10;

/// Default half-width for measured log-log slopes of operator/block norms
/// against a regime coordinate. Absorbs pre-asymptotic mesh effects on
/// desk-scale meshes.
pub const SLOPE_TOL_NORM: f64 = 0.2;

/// Default half-width for measured log-log slopes of solution-component and
/// right-hand-side norms. Slightly looser than [`SLOPE_TOL_NORM`]: component
/// norms ride on a solve and an excitation model.
pub const SLOPE_TOL_COMPONENT: f64 = 0.25;

/// Degenerate-triangle threshold: triangle area must exceed this times L²
/// (L = bounding-box diameter) or the mesh is rejected.
pub const DEGENERATE_AREA_FRACTION: f64 = 1e-14;

/// Magnitude below which a screened kernel contribution is treated as an
/// exact zero. In the skin-effect regime entries decay like e^(-R/δ); once
/// the bound e^(Im k · R_min) falls under this, the contribution is dropped.
/// The matrix scale is set by undecayed self/near interactions, so dropping
/// a pair (or sub-panel) decayed to 1e-12 of that scale perturbs entries two
/// decades below the tightest structural tolerance (1e-10) and four below
/// the quadrature target.
pub const SCREENING_FLOOR: f64 = 1e-12;

/// Maximum recursion depth of the adaptive outer integration during operator
/// assembly (4-way splits: depth 6 resolves features 64× smaller than the
/// triangle). Deeper refinement signals an integrand the inner rules cannot
/// represent, which is reported instead of silently burned CPU.
pub const QUAD_MAX_DEPTH: usize = 6;

/// Assembly aborts with a quadrature-failure error when a depth-limited pair
/// integral still carries an error estimate above this relative level. Depth
/// limiting alone is tolerated (the estimate may just converge slowly); an
/// estimate four orders above the 1e-8 target means the entry is untrusted.
pub const QUAD_FAILURE_REL: f64 = 1e-4;

/// Branch point of the two-branch singular quadrature: pairs with
/// |k|·max(centroid distance, diameter) at or below this use singularity
/// extraction (analytic 1/R and R moments plus a smooth remainder); beyond
/// it the remainder loses its meaning (the kernel oscillates or decays
/// within the pair) and graded Duffy quadrature of the full kernel takes
/// over. Two radians keeps the extraction remainder's phase budget small
/// while leaving the Duffy branch its asymptotic screening advantages.
pub const EXTRACTION_PHASE_LIMIT: f64 = 2.0;

/// A source triangle closer than this multiple of the larger pair diameter
/// to the test triangle is integrated with the singular-aware near path;
/// beyond it a fixed degree-6 tensor rule is accurate to ~1e-8 relative
/// (measured on skewed pairs at exactly this separation ratio).
pub const NEAR_PAIR_FACTOR: f64 = 2.0;

/// Per-panel phase budget |k|·diam of the composite degree-6 rules used for
/// oscillatory/lossy disjoint pairs. Panels quarter-split until under it;
/// every split halves the panel phase. Calibrated so a composite rule at
/// exactly this budget integrates an undecayed pair to the 1e-8 quadrature
/// target; decay relaxes the budget through [`PANEL_DOWNGRADE_ORDER`].
pub const PANEL_PHASE_BUDGET: f64 = 2.0;

/// Effective convergence order of the composite degree-6 panel rules in
/// their per-panel phase: halving the phase budget divides the error by
/// roughly 2^order. Used to relax the budget on decayed pairs — a pair whose
/// kernel bound is down by e^(Im k · gap) tolerates that much more relative
/// error, so its budget grows by decay^(−1/order) without moving any matrix
/// entry past the quadrature target.
pub const PANEL_DOWNGRADE_ORDER: f64 = 7.0;

/// Geometric grading ratio of the panel quadtrees: a panel closer to the
/// observation point than this many of its own diameters splits. Grading
/// multiplies panels only logarithmically in the standoff while keeping the
/// per-panel 1/R variation (and thus the degree-6 error) bounded.
pub const PANEL_GRADE_RATIO: f64 = 1.0;

/// Hard cap on panel-quadtree depth: 4^12 panels would resolve standoffs
/// ~2^-12 of a triangle diameter, far below what a valid disjoint pair on an
/// admissible mesh can produce.
pub const PANEL_DEPTH_MAX: usize = 12;
