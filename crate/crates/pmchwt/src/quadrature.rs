//! Numerical integration on triangles: symmetric Gauss rules, analytic
//! integrals of the static kernels 1/R and R, a Duffy-type engine for
//! near-singular complex-wavenumber kernels, and adaptive subdivision.
//!
//! The operator assembly combines these pieces per triangle pair:
//!
//! * regular (well-separated) pairs use tensor products of the symmetric
//!   rules on both triangles;
//! * close pairs at moderate `|k|·diameter` split the kernel as
//!   `e^{-jkR}/R = 1/R - jk - (k²/2)R + remainder`, integrate `1/R` and `R`
//!   analytically (see [`static_triangle_moments`]) and the C² remainder by
//!   Gauss rules;
//! * close pairs at large `|k|·diameter` (deep skin effect, where the above
//!   split cancels catastrophically) integrate the full kernel with
//!   [`kernel_moments_near`]: a fan of Duffy-transformed sub-triangles
//!   around the nearest point, with radial panels graded to resolve both the
//!   `1/R` singularity and the `e^{Im(k)·R}` boundary layer.
//!
//! All rules are given in barycentric coordinates with weights summing to 1;
//! physical integrals multiply by the triangle area.

use nalgebra::Vector3;

use crate::constants::{
    PANEL_DEPTH_MAX, PANEL_DOWNGRADE_ORDER, PANEL_GRADE_RATIO, PANEL_PHASE_BUDGET, SCREENING_FLOOR,
};
use crate::C64;

// ---------------------------------------------------------------------------
// symmetric Gauss rules on the reference triangle
// ---------------------------------------------------------------------------

/// A quadrature rule in barycentric coordinates. `points[i] = [b0, b1, b2]`,
/// weights sum to 1 (multiply by triangle area for physical integrals).
#[derive(Debug)]
pub struct TriRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
}

const DEG1_PTS: [[f64; 3]; 1] = [[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]];
const DEG1_WTS: [f64; 1] = [1.0];

const DEG2_PTS: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];
const DEG2_WTS: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

// Degree-4, 6-point symmetric rule (two 3-orbits).
const D4A: f64 = 0.108_103_018_168_070;
const D4B: f64 = 0.445_948_490_915_965;
const D4WA: f64 = 0.223_381_589_678_011;
const D4C: f64 = 0.816_847_572_980_459;
const D4D: f64 = 0.091_576_213_509_771;
const D4WC: f64 = 0.109_951_743_655_322;
const DEG4_PTS: [[f64; 3]; 6] = [
    [D4A, D4B, D4B],
    [D4B, D4A, D4B],
    [D4B, D4B, D4A],
    [D4C, D4D, D4D],
    [D4D, D4C, D4D],
    [D4D, D4D, D4C],
];
const DEG4_WTS: [f64; 6] = [D4WA, D4WA, D4WA, D4WC, D4WC, D4WC];

// Degree-6, 12-point symmetric rule (two 3-orbits and one 6-orbit).
const D6A: f64 = 0.873_821_971_016_996;
const D6B: f64 = 0.063_089_014_491_502;
const D6WA: f64 = 0.050_844_906_370_207;
const D6C: f64 = 0.501_426_509_658_179;
const D6D: f64 = 0.249_286_745_170_910;
const D6WC: f64 = 0.116_786_275_726_379;
const D6E: f64 = 0.636_502_499_121_399;
const D6F: f64 = 0.310_352_451_033_785;
const D6G: f64 = 0.053_145_049_844_816;
const D6WE: f64 = 0.082_851_075_618_374;
const DEG6_PTS: [[f64; 3]; 12] = [
    [D6A, D6B, D6B],
    [D6B, D6A, D6B],
    [D6B, D6B, D6A],
    [D6C, D6D, D6D],
    [D6D, D6C, D6D],
    [D6D, D6D, D6C],
    [D6E, D6F, D6G],
    [D6E, D6G, D6F],
    [D6F, D6E, D6G],
    [D6F, D6G, D6E],
    [D6G, D6E, D6F],
    [D6G, D6F, D6E],
];
const DEG6_WTS: [f64; 12] = [
    D6WA, D6WA, D6WA, D6WC, D6WC, D6WC, D6WE, D6WE, D6WE, D6WE, D6WE, D6WE,
];

/// Symmetric Gauss rule exact for polynomials up to the requested degree.
/// Supported degrees: 1, 2, 4, 6. Panics on anything else: the degree is a
/// compile-time-known policy everywhere in this crate.
pub fn tri_rule(degree: usize) -> TriRule {
    match degree {
        1 => TriRule { points: &DEG1_PTS, weights: &DEG1_WTS },
        2 => TriRule { points: &DEG2_PTS, weights: &DEG2_WTS },
        4 => TriRule { points: &DEG4_PTS, weights: &DEG4_WTS },
        6 => TriRule { points: &DEG6_PTS, weights: &DEG6_WTS },
        _ => panic!("unsupported triangle quadrature degree {degree}"),
    }
}

/// Map a barycentric point to a physical point on a triangle.
#[inline]
pub fn bary_to_point(tri: &[Vector3<f64>; 3], b: &[f64; 3]) -> Vector3<f64> {
    tri[0] * b[0] + tri[1] * b[1] + tri[2] * b[2]
}

/// Area of a triangle.
#[inline]
pub fn triangle_area(tri: &[Vector3<f64>; 3]) -> f64 {
    0.5 * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm()
}

/// Diameter (longest edge) of a triangle.
#[inline]
pub fn triangle_diameter(tri: &[Vector3<f64>; 3]) -> f64 {
    let a = (tri[1] - tri[0]).norm();
    let b = (tri[2] - tri[1]).norm();
    let c = (tri[0] - tri[2]).norm();
    a.max(b).max(c)
}

/// Gauss-Legendre nodes/weights on [0, 1], 6 points (exact to degree 11).
pub const GL6: [(f64, f64); 6] = [
    (0.033_765_242_898_423_99, 0.085_662_246_189_585),
    (0.169_395_306_766_867_74, 0.180_380_786_524_069_5),
    (0.380_690_406_958_401_5, 0.233_956_967_286_345_6),
    (0.619_309_593_041_598_5, 0.233_956_967_286_345_6),
    (0.830_604_693_233_132_3, 0.180_380_786_524_069_5),
    (0.966_234_757_101_576, 0.085_662_246_189_585),
];

/// Gauss-Legendre nodes/weights on [0, 1], 2 points (exact to degree 3).
pub const GL2: [(f64, f64); 2] = [
    (0.211_324_865_405_187_1, 0.5),
    (0.788_675_134_594_812_9, 0.5),
];

// ---------------------------------------------------------------------------
// analytic static integrals over a triangle
// ---------------------------------------------------------------------------

/// Closed-form integrals of the static kernels over a flat triangle for an
/// arbitrary observation point:
///
/// * `inv_r`  = ∫ 1/R dA′
/// * `r`      = ∫ R dA′
/// * `vec_inv_r` = ∫ (r′ − ρ)/R dA′
/// * `vec_r`     = ∫ (r′ − ρ)·R dA′
///
/// where `R = |obs − r′|` and `ρ` is the projection of the observation point
/// onto the triangle plane (`rho` in the struct). These supply every moment
/// needed to integrate RWG functions and their divergences against `1/R` and
/// `R`: a local basis function `±l/(2A)(r′ − q)` splits as
/// `(r′ − ρ) + (ρ − q)` with the second term a constant vector.
///
/// The edge-wise quantities also yield the gradients of the static
/// potentials in closed form, via the in-plane divergence theorem and the
/// solid angle Ω subtended by the triangle:
///
/// * ∫ (ρ − r′)/R³ dA′ = Σᵢ m̂ᵢ f₋₁,ᵢ   (`sum_m_inv_r`)
/// * ∫ ∇_r (1/R) dA′  = −sign(h)·Ω·n̂ − Σᵢ m̂ᵢ f₋₁,ᵢ
///
/// with m̂ᵢ the outward in-plane edge normals, f₋₁,ᵢ the 1/R line integrals
/// along the edges, and h the signed height of the observation point over
/// the plane. The signed factor sign(h)·Ω is stored as `solid_angle`, which
/// vanishes (correctly) for observation points in the triangle plane but
/// outside the triangle. These forms hold for observation points off the
/// closed triangle; gradients on the triangle itself exist only as principal
/// values and are not produced here.
#[derive(Debug, Clone)]
pub struct StaticMoments {
    pub inv_r: f64,
    pub r: f64,
    pub vec_inv_r: Vector3<f64>,
    pub vec_r: Vector3<f64>,
    /// In-plane projection of the observation point (expansion origin of the
    /// vector moments).
    pub rho: Vector3<f64>,
    /// Σᵢ m̂ᵢ f₋₁,ᵢ = ∫ (ρ − r′)/R³ dA′.
    pub sum_m_inv_r: Vector3<f64>,
    /// sign(h)·Ω, the signed solid angle factor of the 1/R³ moments.
    pub solid_angle: f64,
    /// Unit normal of the triangle plane (orientation as derived from the
    /// vertex winding; all stored quantities are consistent with it and
    /// their combinations are invariant under flipping it).
    pub normal: Vector3<f64>,
    /// Signed height of the observation point over the plane, `(obs−v₀)·n̂`.
    pub height: f64,
}

/// Evaluate [`StaticMoments`] by the edge-wise closed forms. Valid for any
/// observation point, including points on the triangle itself (the
/// logarithmically divergent edge terms only ever appear multiplied by their
/// vanishing perpendicular distances and are dropped explicitly).
pub fn static_triangle_moments(tri: &[Vector3<f64>; 3], obs: Vector3<f64>) -> StaticMoments {
    let diam = triangle_diameter(tri);
    let n = {
        let raw = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
        raw / raw.norm()
    };
    let d = (obs - tri[0]).dot(&n);
    let rho = obs - n * d;
    let abs_d = d.abs();

    let mut k_m1 = 0.0; // ∫ 1/R
    let mut sum_p0_f1 = 0.0;
    let mut beta_sum = 0.0;
    let mut vec_m1 = Vector3::zeros(); // Σ m̂ f₁ = ∫(r′−ρ)/R
    let mut vec_f3 = Vector3::zeros(); // Σ m̂ f₃
    let mut sum_m_fm1 = Vector3::zeros(); // Σ m̂ f₋₁ = ∫(ρ−r′)/R³

    let edges = [(0usize, 1usize), (1, 2), (2, 0)];
    for (ia, ib) in edges {
        let a = tri[ia];
        let b = tri[ib];
        let s = b - a;
        let ls = s.norm();
        let sh = s / ls;
        let mh = sh.cross(&n); // outward in-plane edge normal (CCW w.r.t. n)
        let l_minus = (a - rho).dot(&sh);
        let l_plus = (b - rho).dot(&sh);
        let p0 = (a - rho).dot(&mh);
        let r0_sq = p0 * p0 + d * d;
        let r_minus = (l_minus * l_minus + r0_sq).sqrt();
        let r_plus = (l_plus * l_plus + r0_sq).sqrt();

        // f₋₁ = ∫_edge dl/R, in the numerically stable branch. When the
        // observation point sits on the edge's carrier line inside the
        // segment the integral diverges, but every use below multiplies it
        // by P⁰ (= 0 there) or R⁰² (= 0 there): drop it.
        let on_line = r0_sq.sqrt() < 1e-12 * diam;
        let f_m1 = if on_line && l_minus < 0.0 && l_plus > 0.0 {
            0.0
        } else if l_plus + l_minus > 0.0 {
            ((r_plus + l_plus) / (r_minus + l_minus)).ln()
        } else {
            ((r_minus - l_minus) / (r_plus - l_plus)).ln()
        };
        let f_1 = 0.5 * (l_plus * r_plus - l_minus * r_minus + r0_sq * f_m1);
        let f_3 = 0.25 * (l_plus * r_plus.powi(3) - l_minus * r_minus.powi(3) + 3.0 * r0_sq * f_1);

        k_m1 += p0 * f_m1;
        sum_p0_f1 += p0 * f_1;
        vec_m1 += mh * f_1;
        vec_f3 += mh * f_3;
        sum_m_fm1 += mh * f_m1;

        if abs_d > 1e-14 * diam {
            let beta = (p0 * l_plus / (r0_sq + abs_d * r_plus)).atan()
                - (p0 * l_minus / (r0_sq + abs_d * r_minus)).atan();
            beta_sum += beta;
        }
    }
    k_m1 -= abs_d * beta_sum;
    let k_1 = (d * d * k_m1 + sum_p0_f1) / 3.0;

    StaticMoments {
        inv_r: k_m1,
        r: k_1,
        vec_inv_r: vec_m1,
        vec_r: vec_f3 / 3.0,
        rho,
        // beta_sum is left at zero for in-plane observation points (the
        // per-edge accumulation is guarded), so this is 0 there as required
        sum_m_inv_r: sum_m_fm1,
        solid_angle: d.signum() * beta_sum,
        normal: n,
        height: d,
    }
}

// ---------------------------------------------------------------------------
// Helmholtz kernel and its moments over a source triangle
// ---------------------------------------------------------------------------

/// Scalar Helmholtz kernel G_k(r, r′) = e^{−jkR}/(4πR), decaying convention
/// Im(k) ≤ 0.
#[inline]
pub fn greens(k: C64, r: Vector3<f64>, rp: Vector3<f64>) -> C64 {
    let rr = (r - rp).norm();
    let jkr = C64::new(0.0, 1.0) * k * rr;
    (-jkr).exp() / (4.0 * std::f64::consts::PI * rr)
}

/// Gradient of the kernel with respect to the observation point:
/// ∇_r G = −(1 + jkR)·G/R · (r−r′)/R.
#[inline]
pub fn greens_gradient(k: C64, r: Vector3<f64>, rp: Vector3<f64>) -> Vector3<C64> {
    let diff = r - rp;
    let rr = diff.norm();
    let jkr = C64::new(0.0, 1.0) * k * rr;
    let g = (-jkr).exp() / (4.0 * std::f64::consts::PI * rr);
    let factor = -(C64::new(1.0, 0.0) + jkr) * g / (rr * rr);
    Vector3::new(
        factor * C64::new(diff.x, 0.0),
        factor * C64::new(diff.y, 0.0),
        factor * C64::new(diff.z, 0.0),
    )
}

/// Moments of the full Helmholtz kernel over one source triangle, observed
/// from a fixed point. Everything an RWG function needs is linear in these:
///
/// * `s0`  = ∫ G dA′
/// * `s1c` = ∫ G (r′ − c) dA′   (c = source centroid, cancellation-free)
/// * `d0`  = ∫ ∇_r G dA′
/// * `d1c` = ∫ ∇_r G × (r′ − c) dA′
#[derive(Debug, Clone)]
pub struct KernelMoments {
    pub s0: C64,
    pub s1c: Vector3<C64>,
    pub d0: Vector3<C64>,
    pub d1c: Vector3<C64>,
    /// Centroid used as the expansion origin for `s1c`, `d1c`.
    pub centroid: Vector3<f64>,
}

impl KernelMoments {
    fn zero(centroid: Vector3<f64>) -> Self {
        let z = C64::new(0.0, 0.0);
        KernelMoments {
            s0: z,
            s1c: Vector3::new(z, z, z),
            d0: Vector3::new(z, z, z),
            d1c: Vector3::new(z, z, z),
            centroid,
        }
    }

    fn accumulate(&mut self, w: f64, k: C64, obs: Vector3<f64>, rp: Vector3<f64>, with_gradient: bool) {
        let g = greens(k, obs, rp) * w;
        let rel = rp - self.centroid;
        self.s0 += g;
        self.s1c += Vector3::new(
            g * C64::new(rel.x, 0.0),
            g * C64::new(rel.y, 0.0),
            g * C64::new(rel.z, 0.0),
        );
        if with_gradient {
            let mut dg = greens_gradient(k, obs, rp);
            dg *= C64::new(w, 0.0);
            self.d0 += dg;
            self.d1c += cross_cv(&dg, &rel);
        }
    }
}

/// Cross product of a complex vector with a real vector.
#[inline]
pub fn cross_cv(a: &Vector3<C64>, b: &Vector3<f64>) -> Vector3<C64> {
    Vector3::new(
        a.y * C64::new(b.z, 0.0) - a.z * C64::new(b.y, 0.0),
        a.z * C64::new(b.x, 0.0) - a.x * C64::new(b.z, 0.0),
        a.x * C64::new(b.y, 0.0) - a.y * C64::new(b.x, 0.0),
    )
}

/// Promote a real 3-vector to complex.
#[inline]
pub fn cv(v: Vector3<f64>) -> Vector3<C64> {
    Vector3::new(C64::new(v.x, 0.0), C64::new(v.y, 0.0), C64::new(v.z, 0.0))
}

/// Cross product of a real vector with a complex vector.
#[inline]
pub fn cross_rc(a: &Vector3<f64>, b: &Vector3<C64>) -> Vector3<C64> {
    -cross_cv(b, a)
}

/// Dot product of a complex vector with a real vector.
#[inline]
pub fn dot_cr(a: &Vector3<C64>, b: &Vector3<f64>) -> C64 {
    a.x * b.x + a.y * b.y + a.z * b.z
}

/// Plain tensor-Gauss kernel moments: valid when the observation point is
/// well separated from the source triangle (no singularity, no steep
/// boundary layer variation across the panel).
pub fn kernel_moments_gauss(
    tri: &[Vector3<f64>; 3],
    obs: Vector3<f64>,
    k: C64,
    degree: usize,
    with_gradient: bool,
) -> KernelMoments {
    let rule = tri_rule(degree);
    let area = triangle_area(tri);
    let centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
    let mut m = KernelMoments::zero(centroid);
    for (p, w) in rule.points.iter().zip(rule.weights) {
        let rp = bary_to_point(tri, p);
        m.accumulate(w * area, k, obs, rp, with_gradient);
    }
    m
}

/// Kernel moments by a quadtree of degree-6 panels over the source triangle.
/// A panel splits four ways while it is electrically large (|k|·diam over
/// its local phase budget, see [`panel_phase_budget`]) or geometrically
/// close to the observation point (nearest approach under
/// [`PANEL_GRADE_RATIO`] diameters), so oscillation is resolved where it
/// matters and the 1/R variation is resolved by geometric grading whose
/// panel count only grows logarithmically as `obs` approaches the triangle.
/// Decaying kernels skip panels whose nearest-approach bound puts them under
/// [`SCREENING_FLOOR`]. Moments are expanded about the full triangle's
/// centroid regardless of subdivision.
pub fn kernel_moments_quadtree(
    tri: &[Vector3<f64>; 3],
    obs: Vector3<f64>,
    k: C64,
    with_gradient: bool,
) -> KernelMoments {
    let centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
    let mut m = KernelMoments::zero(centroid);
    quadtree_accumulate(tri, obs, k, with_gradient, PANEL_DEPTH_MAX, &mut m);
    m
}

/// Local per-panel phase budget of the composite degree-6 rules: the strict
/// [`PANEL_PHASE_BUDGET`] relaxed by the kernel decay a panel at nearest
/// distance `r_near` has already suffered. The rules converge at order
/// [`PANEL_DOWNGRADE_ORDER`] in the budget, so a panel whose contribution is
/// down by e^(Im k · r) tolerates a budget larger by the order-th root of
/// that factor without moving anything past the quadrature target — this is
/// what makes deeply lossy assemblies cheap: distant panels stay coarse,
/// only the decay-surviving core is refined.
pub fn panel_phase_budget(k: C64, r_near: f64) -> f64 {
    PANEL_PHASE_BUDGET * (-k.im * r_near / PANEL_DOWNGRADE_ORDER).exp()
}

fn quadtree_accumulate(
    tri: &[Vector3<f64>; 3],
    obs: Vector3<f64>,
    k: C64,
    with_gradient: bool,
    depth_left: usize,
    m: &mut KernelMoments,
) {
    let c = (tri[0] + tri[1] + tri[2]) / 3.0;
    let reach = tri.iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
    let r_near = ((obs - c).norm() - reach).max(0.0);
    if k.im < 0.0 && (k.im * r_near).exp() < SCREENING_FLOOR {
        return;
    }
    let diam = triangle_diameter(tri);
    let split =
        k.norm() * diam > panel_phase_budget(k, r_near) || r_near < PANEL_GRADE_RATIO * diam;
    if !split || depth_left == 0 {
        let rule = tri_rule(6);
        let area = triangle_area(tri);
        for (p, w) in rule.points.iter().zip(rule.weights) {
            let rp = bary_to_point(tri, p);
            m.accumulate(w * area, k, obs, rp, with_gradient);
        }
        return;
    }
    let m01 = (tri[0] + tri[1]) / 2.0;
    let m12 = (tri[1] + tri[2]) / 2.0;
    let m20 = (tri[2] + tri[0]) / 2.0;
    for child in [
        [tri[0], m01, m20],
        [m01, tri[1], m12],
        [m20, m12, tri[2]],
        [m01, m12, m20],
    ] {
        quadtree_accumulate(&child, obs, k, with_gradient, depth_left - 1, m);
    }
}

/// The smooth remainder ρ(R) = (e^{−jkR} − 1 + jkR + k²R²/2)/R = O(k³R²) of
/// the kernel after peeling off its 1/R, constant, and R terms. Evaluated by
/// a truncated series when |kR| is small — the direct formula cancels its
/// three leading digits there — and directly otherwise. Well defined at
/// R = 0 (value 0).
fn smooth_remainder(k: C64, rr: f64) -> C64 {
    let jk = C64::new(0.0, 1.0) * k;
    if k.norm() * rr < 0.5 {
        // Σ_{n=3..12} (−jk)^n R^{n−1}/n!; truncation ≤ 1e-11 relative at
        // |kR| = 0.5, far below the quadrature targets.
        let z = -jk * rr;
        let mut term = -jk * jk * jk * (rr * rr) / 6.0;
        let mut sum = term;
        for n in 4..=12 {
            term = term * z / n as f64;
            sum += term;
        }
        sum
    } else {
        let jkr = jk * rr;
        ((-jkr).exp() - 1.0 + jkr + k * k * (rr * rr) * 0.5) / rr
    }
}

/// Gradient companion of [`smooth_remainder`]: ∇_r ρ(R) = M(z)·(r−r′)/R³
/// with z = −jkR and M(z) = (z−1)eᶻ + 1 − z²/2 = Σ_{n≥3} (n−1)zⁿ/n!. This
/// returns M; the series branch avoids the cancellation of the closed form
/// for small |z|.
fn smooth_remainder_grad(k: C64, rr: f64) -> C64 {
    let z = -C64::new(0.0, 1.0) * k * rr;
    if z.norm() < 0.5 {
        // Σ_{n=3..12} (n−1)·zⁿ/n!
        let mut zn_fact = z * z * z / 6.0; // zⁿ/n! at n = 3
        let mut sum = zn_fact * 2.0;
        for n in 4..=12 {
            zn_fact = zn_fact * z / n as f64;
            sum += zn_fact * (n - 1) as f64;
        }
        sum
    } else {
        (z - 1.0) * z.exp() + 1.0 - z * z * 0.5
    }
}

/// Kernel moments by singularity extraction: with the small-R split
/// G = (1/4π)·[1/R − jk − k²R/2 + ρ(R)], the 1/R and R terms integrate by
/// the closed forms of [`static_triangle_moments`], the constant exactly
/// (its first moment about the centroid vanishes), and the smooth remainder
/// ρ = O(k³R²) by a degree-6 Gauss rule on uniformly subdivided panels,
/// keeping the remainder's phase variation per panel small. Valid for any
/// observation point as long as |k|·R stays moderate (a few units) over the
/// triangle; with `with_gradient` the ∇_r moments are produced from the
/// closed-form 1/R³ and 1/R statics plus the smooth gradient remainder, and
/// the observation point must then lie off the closed triangle (the gradient
/// exists only as a principal value on it). No cancellation occurs anywhere:
/// the analytic terms are separate, and the remainders are series-evaluated
/// where their direct forms would cancel.
pub fn kernel_moments_extracted(
    tri: &[Vector3<f64>; 3],
    obs: Vector3<f64>,
    k: C64,
    with_gradient: bool,
) -> KernelMoments {
    const INV_4PI: f64 = 1.0 / (4.0 * std::f64::consts::PI);
    let centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
    let area = triangle_area(tri);
    let stat = static_triangle_moments(tri, obs);
    let c_off = stat.rho - centroid;
    let jk = C64::new(0.0, 1.0) * k;
    let k2h = k * k * 0.5;

    let mut m = KernelMoments::zero(centroid);
    // ∫(1/R)·(1, r′−c): vector moments recentered from the in-plane
    // projection ρ to the centroid
    m.s0 = C64::new(stat.inv_r, 0.0) - jk * area - k2h * stat.r;
    let vec_inv_r_c = stat.vec_inv_r + c_off * stat.inv_r;
    let vec_r_c = stat.vec_r + c_off * stat.r;
    m.s1c = cv(vec_inv_r_c) - cv(vec_r_c) * k2h;
    m.s1c *= C64::new(INV_4PI, 0.0);
    m.s0 *= INV_4PI;

    if with_gradient {
        // statics of the gradient: with Σm̂f₋₁ = ∫(ρ−r′)/R³ and the signed
        // solid angle g = sign(h)·Ω,
        //   ∫∇(1/R)        = −g·n̂ − Σm̂f₋₁
        //   ∫∇(1/R)×(r′−c) = (r−c)×Σm̂f₋₁ − g·(n̂×(ρ−c))
        //   ∫∇R            = h·n̂·∫1/R − ∫(r′−ρ)/R
        //   ∫∇R×(r′−c)     = (r−c)×∫(r′−c)/R
        // (the 1/R³ parts are regrouped so the solid angle never divides by
        // the height, which keeps the coplanar limit exact)
        let n = stat.normal;
        let g = stat.solid_angle;
        let r_c = obs - centroid;
        let rho_c = stat.rho - centroid;
        let grad_inv_r = -n * g - stat.sum_m_inv_r;
        let cross_inv_r = r_c.cross(&stat.sum_m_inv_r) - n.cross(&rho_c) * g;
        let grad_r = n * (stat.height * stat.inv_r) - stat.vec_inv_r;
        let cross_r = r_c.cross(&vec_inv_r_c);
        m.d0 = (cv(grad_inv_r) - cv(grad_r) * k2h) * C64::new(INV_4PI, 0.0);
        m.d1c = (cv(cross_inv_r) - cv(cross_r) * k2h) * C64::new(INV_4PI, 0.0);
    }

    // smooth remainder by fixed Gauss on uniformly subdivided panels; the
    // remainder is O(k³R²) but only C² at R = 0, so the panel size tracks
    // both the phase budget |k|·diam and — when the observer is close to the
    // surface — the kink at its foot point
    let rule = tri_rule(6);
    let diam = triangle_diameter(tri);
    let phase = k.norm() * diam;
    let standoff = (obs - closest_point_on_triangle(tri, obs)).norm();
    let mut levels = if phase <= 0.6 {
        0
    } else if phase <= 1.2 {
        1
    } else {
        2
    };
    if phase > 0.3 && standoff < 0.3 * diam {
        levels = levels.max(2);
    }
    let mut panels: Vec<[Vector3<f64>; 3]> = vec![*tri];
    for _ in 0..levels {
        let mut next = Vec::with_capacity(panels.len() * 4);
        for t in &panels {
            let m01 = (t[0] + t[1]) * 0.5;
            let m12 = (t[1] + t[2]) * 0.5;
            let m20 = (t[2] + t[0]) * 0.5;
            next.push([t[0], m01, m20]);
            next.push([m01, t[1], m12]);
            next.push([m20, m12, t[2]]);
            next.push([m01, m12, m20]);
        }
        panels = next;
    }
    for panel in &panels {
        let pa = triangle_area(panel);
        for (p, w) in rule.points.iter().zip(rule.weights) {
            let rp = bary_to_point(panel, p);
            let diff = obs - rp;
            let rr = diff.norm();
            let rho = smooth_remainder(k, rr) * (w * pa * INV_4PI);
            let rel = rp - centroid;
            m.s0 += rho;
            m.s1c += Vector3::new(rho * rel.x, rho * rel.y, rho * rel.z);
            if with_gradient {
                // ∇ρ(R) = M·(r−r′)/R³; at a panel node rr > 0 always (the
                // gradient path requires obs off the closed triangle)
                let mg = smooth_remainder_grad(k, rr) * (w * pa * INV_4PI / (rr * rr * rr));
                m.d0 += cv(diff) * mg;
                m.d1c += cv(diff.cross(&rel)) * mg;
            }
        }
    }
    m
}

/// Nearest point to `p` on a triangle (standard clamped-barycentric search).
pub fn closest_point_on_triangle(tri: &[Vector3<f64>; 3], p: Vector3<f64>) -> Vector3<f64> {
    let ab = tri[1] - tri[0];
    let ac = tri[2] - tri[0];
    let ap = p - tri[0];
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return tri[0];
    }
    let bp = p - tri[1];
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return tri[1];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return tri[0] + ab * v;
    }
    let cp = p - tri[2];
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return tri[2];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return tri[0] + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return tri[1] + (tri[2] - tri[1]) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    tri[0] + ab * v + ac * w
}

/// Kernel moments for an observation point close to (or on) the source
/// triangle. The triangle is fanned into sub-triangles around the in-plane
/// point nearest the observation point; each fan triangle is integrated in
/// Duffy coordinates (radial × angular), which removes the 1/R singularity.
/// The radial direction uses geometrically graded panels starting at the
/// scale `max(offplane distance, 1/|Im k|)` so the e^{Im k·R} boundary layer
/// of lossy media is resolved; panels whose entire range is screened below
/// [`SCREENING_FLOOR`] are skipped.
///
/// `with_gradient` must be false when the observation point lies on the
/// triangle itself: the gradient moments are then strongly singular and the
/// caller is expected to use their analytic value instead (the assembled
/// double-layer self-contribution vanishes for coplanar observation).
pub fn kernel_moments_near(
    tri: &[Vector3<f64>; 3],
    obs: Vector3<f64>,
    k: C64,
    with_gradient: bool,
) -> KernelMoments {
    let centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
    let mut m = KernelMoments::zero(centroid);
    let diam = triangle_diameter(tri);
    let nearest = closest_point_on_triangle(tri, obs);
    let offplane = (obs - nearest).norm();

    let im_k = k.im.min(0.0);
    let re_k = k.re.abs();
    // The whole triangle is at least `offplane` away: if that alone screens
    // the kernel below the floor, nothing here can contribute.
    if im_k < 0.0 && (im_k * offplane).exp() < SCREENING_FLOOR {
        return m;
    }
    // Radial grading starts at the smallest structural scale of the
    // integrand: the off-plane standoff (which smooths the 1/R peak) or the
    // e^{Im k·R} boundary layer, whichever is finer.
    let layer = if im_k < 0.0 { 1.0 / (-im_k) } else { f64::INFINITY };
    let s_off = if offplane > 1e-9 * diam {
        offplane
    } else {
        f64::INFINITY
    };
    let scale = s_off.min(layer).min(diam).max(1e-3 * diam);

    // Fan the triangle around the nearest point, bisecting fan bases until
    // the apex angle is modest; wide fans make the angular integrand vary
    // too much for a fixed-order rule. Degenerate fans (apex on the base
    // edge) have zero area and are skipped.
    let mut fans: Vec<(Vector3<f64>, Vector3<f64>, usize)> = vec![
        (tri[0], tri[1], 0),
        (tri[1], tri[2], 0),
        (tri[2], tri[0], 0),
    ];
    while let Some((a, b, depth)) = fans.pop() {
        let ea = a - nearest;
        let eb = b - nearest;
        let area2 = ea.cross(&eb).norm(); // 2 × fan-triangle area
        if area2 < 1e-14 * diam * diam {
            continue;
        }
        let na = ea.norm();
        let nb = eb.norm();
        let apex_angle = area2.atan2(ea.dot(&eb));
        if apex_angle > 0.9 && depth < 4 {
            let mid = (a + b) * 0.5;
            fans.push((a, mid, depth + 1));
            fans.push((mid, b, depth + 1));
            continue;
        }
        // Duffy map: r′(u, t) = p + u·[(1−t)·ea + t·eb], Jacobian = u·area2.
        let dirmax = na.max(nb);
        // smallest |dir(t)|: distance from the apex to the base line,
        // unless an endpoint is closer
        let base_len = (b - a).norm();
        let dirmin = (area2 / base_len).min(na).min(nb);
        let u_scale = (scale / dirmax).min(1.0);
        let mut breaks = vec![0.0f64];
        let mut edge_pos = u_scale;
        while edge_pos < 1.0 {
            breaks.push(edge_pos);
            edge_pos *= 2.0;
        }
        breaks.push(1.0);
        for w in breaks.windows(2) {
            let (u0, u1) = (w[0], w[1]);
            // Projection onto a convex set gives (obs−p)·(r′−p) ≤ 0 for all
            // r′ in the triangle, so R² ≥ offplane² + u²·dirmin² is a valid
            // screening bound; panels only move outward, so stop at the
            // first fully screened one.
            let r_near = (offplane * offplane + (u0 * dirmin).powi(2)).sqrt();
            if im_k < 0.0 && (im_k * r_near).exp() < SCREENING_FLOOR {
                break;
            }
            // Refine against phase oscillation: radially, the phase
            // advances by ≈ |Re k|·Δu·|dir|; angularly, by the variation of
            // |dir(t)| at the panel's radius.
            let n_rad = (1.0 + re_k * (u1 - u0) * dirmax / 6.0).floor() as usize;
            let n_rad = n_rad.clamp(1, 4);
            let u_mid = 0.5 * (u0 + u1);
            let n_ang = (1.0 + re_k * u_mid * (dirmax - dirmin) / 3.0).floor() as usize;
            let n_ang = n_ang.clamp(1, 8);
            for ir in 0..n_rad {
                let uu0 = u0 + (u1 - u0) * ir as f64 / n_rad as f64;
                let uu1 = u0 + (u1 - u0) * (ir + 1) as f64 / n_rad as f64;
                for &(ug, wu) in GL6.iter() {
                    let u = uu0 + (uu1 - uu0) * ug;
                    for ia in 0..n_ang {
                        let t0 = ia as f64 / n_ang as f64;
                        let dt = 1.0 / n_ang as f64;
                        for &(tg, wt) in GL6.iter() {
                            let t = t0 + dt * tg;
                            let dir = ea * (1.0 - t) + eb * t;
                            let rp = nearest + dir * u;
                            let w_total = wu * (uu1 - uu0) * wt * dt * u * area2;
                            m.accumulate(w_total, k, obs, rp, with_gradient);
                        }
                    }
                }
            }
        }
    }
    m
}

// ---------------------------------------------------------------------------
// adaptive triangle integration
// ---------------------------------------------------------------------------

/// Result of [`adaptive_triangle`].
#[derive(Debug, Clone)]
pub struct AdaptiveResult<const W: usize> {
    /// Integral estimates (degree-6 rule on the accepted leaves).
    pub values: [C64; W],
    /// Accumulated error estimate (degree-6 minus degree-4 discrepancies).
    pub error: f64,
    /// True if any leaf hit the depth limit before meeting its tolerance.
    pub depth_limited: bool,
}

/// Adaptive integration of a vector-valued integrand over a triangle by
/// recursive 4-way midpoint subdivision. Each panel is accepted when the
/// degree-6 and degree-4 estimates agree to the panel's share of the
/// tolerance; the tolerance is interpreted relative to the running magnitude
/// of the whole integral (plus `floor` as an absolute anchor, so integrals
/// that are genuinely zero terminate immediately).
pub fn adaptive_triangle<const W: usize, F>(
    tri: &[Vector3<f64>; 3],
    f: &F,
    tol_rel: f64,
    floor: f64,
    max_depth: usize,
) -> AdaptiveResult<W>
where
    F: Fn(Vector3<f64>) -> [C64; W],
{
    fn eval<const W: usize, F: Fn(Vector3<f64>) -> [C64; W]>(
        tri: &[Vector3<f64>; 3],
        f: &F,
        degree: usize,
    ) -> [C64; W] {
        let rule = tri_rule(degree);
        let area = triangle_area(tri);
        let mut out = [C64::new(0.0, 0.0); W];
        for (p, w) in rule.points.iter().zip(rule.weights) {
            let x = bary_to_point(tri, p);
            let v = f(x);
            for (o, vi) in out.iter_mut().zip(&v) {
                *o += vi * (w * area);
            }
        }
        out
    }

    fn norm<const W: usize>(v: &[C64; W]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    struct Ctx<'a, const W: usize, F> {
        f: &'a F,
        tol_rel: f64,
        floor: f64,
        max_depth: usize,
        total: [C64; W],
        err: f64,
        depth_limited: bool,
        scale: f64,
    }

    fn descend<const W: usize, F: Fn(Vector3<f64>) -> [C64; W]>(
        ctx: &mut Ctx<'_, W, F>,
        tri: &[Vector3<f64>; 3],
        coarse: [C64; W],
        depth: usize,
        share: f64,
    ) {
        let fine = eval(tri, ctx.f, 6);
        let diff: f64 = fine
            .iter()
            .zip(&coarse)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let tol_abs = ctx.tol_rel * ctx.scale.max(ctx.floor) * share;
        if diff <= tol_abs || depth >= ctx.max_depth {
            if diff > tol_abs {
                ctx.depth_limited = true;
            }
            for (t, v) in ctx.total.iter_mut().zip(&fine) {
                *t += *v;
            }
            ctx.err += diff;
            ctx.scale = ctx.scale.max(norm(&ctx.total));
            return;
        }
        let m01 = (tri[0] + tri[1]) * 0.5;
        let m12 = (tri[1] + tri[2]) * 0.5;
        let m20 = (tri[2] + tri[0]) * 0.5;
        let children = [
            [tri[0], m01, m20],
            [m01, tri[1], m12],
            [m20, m12, tri[2]],
            [m01, m12, m20],
        ];
        for child in &children {
            let c4 = eval(child, ctx.f, 4);
            descend(ctx, child, c4, depth + 1, share * 0.25);
        }
    }

    let coarse = eval(tri, f, 4);
    let first = eval(tri, f, 6);
    let mut ctx = Ctx {
        f,
        tol_rel,
        floor,
        max_depth,
        total: [C64::new(0.0, 0.0); W],
        err: 0.0,
        depth_limited: false,
        scale: norm(&first),
    };
    descend(&mut ctx, tri, coarse, 0, 1.0);
    AdaptiveResult {
        values: ctx.total,
        error: ctx.err,
        depth_limited: ctx.depth_limited,
    }
}
