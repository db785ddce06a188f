//! Galerkin assembly of the boundary integral operator blocks for an
//! arbitrary complex wavenumber: the vector-potential block `T_A`, the
//! scalar-potential block `T_Φ` (both stored without their ∓jk prefactors,
//! which are applied at system assembly so scaling analyses can weigh them
//! separately), and the double-layer block `K` in Cauchy principal value.
//!
//! With rotated-RWG testing the matrix elements reduce to double surface
//! integrals of the scalar kernel and its gradient against per-triangle
//! linear factors:
//!
//! ```text
//! (T_A)_mn = ∬ f_m(r)·f_n(r′) G_k(r,r′) dA′ dA
//! (T_Φ)_mn = −∬ (∇·f_m)(∇′·f_n) G_k(r,r′) dA′ dA
//! (K)_mn   = ∬ ∇_r G_k(r,r′)·(f_n(r′) × f_m(r)) dA′ dA
//! ```
//!
//! Every pair of triangles contributes a 3×3 block to each matrix, and all
//! nine entries of a block are linear in a fixed set of eighteen pair
//! moments (kernel and gradient integrals against `1`, `r−c`, `r′−c′` and
//! their products). The assembly therefore computes moments once per pair
//! and scatters them; this also makes the structural identities exact in
//! floating point: the nine `T_Φ` entries of a pair share one common
//! integral, so ±1 loop combinations cancel to round-off regardless of
//! quadrature error.
//!
//! Pair integration is tiered by how the pair touches. Pairs sharing a
//! triangle, edge, or vertex integrate over a 4-D domain whose integrand
//! blows up along the shared simplex; no outer/inner splitting converges
//! there (the outer integrand keeps a kink along a shared edge), so these
//! pairs use Sauter–Schwab tensor rules, which change variables so the
//! 1/R singularity is flattened and plain tensor Gauss applies. Disjoint
//! pairs split into an outer rule over the test triangle against inner
//! kernel moments. When `|k|` times the pair scale is small the inner
//! moments come from singularity extraction (`G = (1/4π)[1/R − jk − k²R/2 +
//! ρ(R)]`, closed forms for the 1/R and R terms and their gradients, Gauss
//! for the smooth remainder) under an adaptive outer rule for near pairs or
//! a fixed degree-6 tensor rule beyond two diameters. When the kernel
//! oscillates or decays within the pair — electrically large panels, deep
//! skin-effect conductors, where extraction would subtract almost-equal
//! numbers — both triangles switch to composite degree-6 rules on
//! quarter-panels sized so each panel spans a bounded phase, with a graded
//! Duffy inner taking over on near pairs where the 1/R concentration still
//! matters. Exponential screening bounds skip disjoint pairs (and panels)
//! that cannot move any matrix entry at double precision.
//!
//! The coincident-triangle `K` block is exactly zero: the gradient lies in
//! the triangle plane there, so the triple product with two in-plane basis
//! factors vanishes pointwise. It is set to zero analytically rather than
//! integrated.
//!
//! Assembly parallelizes over test triangles. Each work item produces the
//! three matrix rows of one triangle as an independent strip; strips are
//! merged in triangle order, so the result is bit-identical for any thread
//! count, including a sequential run.

use std::collections::{HashMap, HashSet};

use bempp_quadrature::duffy::triangle_duffy;
use bempp_quadrature::types::{CellToCellConnectivity, TestTrialNumericalQuadratureDefinition};
use faer::Mat;
use nalgebra::Vector3;
use thiserror::Error;

use crate::basis::RwgSpace;
use crate::constants::{
    C0, EPS0, ETA0, EXTRACTION_PHASE_LIMIT, NEAR_PAIR_FACTOR, PANEL_DEPTH_MAX, PANEL_GRADE_RATIO,
    QUAD_FAILURE_REL, QUAD_MAX_DEPTH, SCREENING_FLOOR, TOL_QUADRATURE,
};
use crate::mesh::{MeshConnectivity, TriangleMesh};
use crate::quadrature::{
    adaptive_triangle, bary_to_point, cross_cv, cross_rc, cv, dot_cr, greens, greens_gradient,
    kernel_moments_extracted, kernel_moments_gauss, kernel_moments_quadtree, panel_phase_budget,
    tri_rule, triangle_area, triangle_diameter, AdaptiveResult, KernelMoments,
};
use crate::{par_map, C64, Parallelism};

/// Test triangles per parallel batch. Strips of a batch are computed
/// concurrently and merged in index order before the next batch starts,
/// bounding peak memory at `CHUNK × 3 rows` of scratch per operator.
const ASSEMBLY_CHUNK: usize = 64;

/// Bulk material of a homogeneous penetrable body: real relative
/// permittivity, conductivity, and relative permeability. Losses enter
/// through the complex permittivity ε̂_r(ω) = ε_r′ − jσ/(ωε₀), whose
/// imaginary part is nonpositive for σ ≥ 0, matching the e^{−jkR} decaying
/// kernel convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    /// Real part of the relative permittivity ε_r′ (dimensionless).
    pub eps_r_prime: f64,
    /// Conductivity σ (S/m), ≥ 0.
    pub sigma: f64,
    /// Relative permeability μ_r (dimensionless), > 0.
    pub mu_r: f64,
}

impl MaterialParams {
    /// Lossless nonmagnetic dielectric.
    pub fn dielectric(eps_r: f64) -> Self {
        MaterialParams { eps_r_prime: eps_r, sigma: 0.0, mu_r: 1.0 }
    }

    /// Nonmagnetic conductor with unit background permittivity.
    pub fn conductor(sigma: f64) -> Self {
        MaterialParams { eps_r_prime: 1.0, sigma, mu_r: 1.0 }
    }

    /// Complex relative permittivity ε̂_r(ω) = ε_r′ − jσ/(ωε₀).
    pub fn eps_hat(&self, omega: f64) -> C64 {
        C64::new(self.eps_r_prime, -self.sigma / (omega * EPS0))
    }

    /// Skin depth δ = √(2/(ωσμ)) (m); infinite for σ = 0.
    pub fn skin_depth(&self, omega: f64) -> f64 {
        if self.sigma == 0.0 {
            f64::INFINITY
        } else {
            (2.0 / (omega * self.sigma * self.mu_r * crate::MU0)).sqrt()
        }
    }
}

/// Which side of the surface a propagation constant describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Medium {
    /// Free space outside the body.
    Exterior,
    /// The penetrable body.
    Interior,
}

/// A propagation constant together with the wave impedance of its medium.
/// The branch conventions are pinned here once: Im(k) ≤ 0 (fields decay
/// under the e^{−jkR} kernel) and Re(η) ≥ 0 (passive medium).
#[derive(Clone, Copy, Debug)]
pub struct Wavenumber {
    /// Complex wavenumber (1/m).
    pub k: C64,
    /// Wave impedance η = √(μ/ε) of the medium (Ω).
    pub eta: C64,
    /// Medium tag.
    pub medium: Medium,
}

impl Wavenumber {
    /// Free-space k₀ = ω/c and η₀.
    pub fn exterior(omega: f64) -> Self {
        Wavenumber {
            k: C64::new(omega / C0, 0.0),
            eta: C64::new(ETA0, 0.0),
            medium: Medium::Exterior,
        }
    }

    /// Interior k₁ = k₀√(ε̂_r μ_r) and η₁ = η₀√(μ_r/ε̂_r). For σ ≥ 0 the
    /// argument of the first root lies in the closed lower half plane and
    /// the principal square root lands on Im(k₁) ≤ 0 directly; likewise
    /// Re(η₁) ≥ 0.
    pub fn interior(omega: f64, mat: &MaterialParams) -> Self {
        let eps_hat = mat.eps_hat(omega);
        let k0 = omega / C0;
        let k = (eps_hat * mat.mu_r).sqrt() * k0;
        let eta = (C64::new(mat.mu_r, 0.0) / eps_hat).sqrt() * ETA0;
        debug_assert!(k.im <= 1e-12 * k.norm().max(1e-300));
        debug_assert!(eta.re >= 0.0);
        Wavenumber { k, eta, medium: Medium::Interior }
    }
}

/// Assembly failure modes.
#[derive(Debug, Error)]
pub enum OperatorError {
    /// The adaptive outer integration hit its depth limit on some pair while
    /// its error estimate was still far above the integration target, so the
    /// affected entries cannot be trusted.
    #[error(
        "pair quadrature hit the depth limit with relative error estimate {worst:.3e} \
         (acceptable up to {limit:.0e}) on {pairs} triangle pair(s)"
    )]
    QuadratureFailure {
        /// Number of depth-limited pairs.
        pairs: usize,
        /// Worst relative error estimate among them.
        worst: f64,
        /// The failure threshold that was exceeded.
        limit: f64,
    },
}

/// Bookkeeping from one assembly, surfaced into run metadata.
#[derive(Clone, Copy, Debug, Default)]
pub struct AssemblyStats {
    /// Pairs whose adaptive integration hit the depth limit (their error
    /// estimates stayed below the failure threshold, or assembly would have
    /// errored).
    pub depth_limited_pairs: usize,
    /// Worst relative error estimate among depth-limited pairs.
    pub worst_depth_limited_rel: f64,
    /// Pairs skipped entirely because the lossy kernel bound over their
    /// separation falls below the screening floor.
    pub screened_pairs: usize,
}

impl AssemblyStats {
    fn absorb(&mut self, other: &AssemblyStats) {
        self.depth_limited_pairs += other.depth_limited_pairs;
        self.worst_depth_limited_rel = self.worst_depth_limited_rel.max(other.worst_depth_limited_rel);
        self.screened_pairs += other.screened_pairs;
    }

    fn note<const W: usize>(&mut self, res: &AdaptiveResult<W>, floor: f64) {
        if res.depth_limited {
            self.depth_limited_pairs += 1;
            let scale = res
                .values
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                .sqrt()
                .max(floor);
            if scale > 0.0 {
                self.worst_depth_limited_rel = self.worst_depth_limited_rel.max(res.error / scale);
            }
        }
    }
}

/// The three Galerkin operator blocks at one wavenumber, unweighted:
/// `T_k = −jk·TA + (1/jk)·TPhi` is formed downstream.
#[derive(Debug)]
pub struct OperatorMatrices {
    /// Vector-potential block ∬ f_m·f_n G.
    pub ta: Mat<C64>,
    /// Scalar-potential block −∬ (∇·f_m)(∇′·f_n) G.
    pub tphi: Mat<C64>,
    /// Double-layer block ∬ ∇G·(f_n×f_m), principal value, exact-zero
    /// coincident self blocks.
    pub k: Mat<C64>,
    /// The wavenumber the blocks were assembled at.
    pub wavenumber: C64,
    /// Quadrature bookkeeping.
    pub stats: AssemblyStats,
}

impl OperatorMatrices {
    /// Number of RWG unknowns.
    pub fn dimension(&self) -> usize {
        self.ta.nrows()
    }

    /// The combined EFIO block T_k = −jk·T_A + (1/(jk))·T_Φ.
    ///
    /// Panics for k = 0, where the prefactor split is the whole point:
    /// callers doing static analysis work with the blocks directly.
    pub fn t_matrix(&self) -> Mat<C64> {
        assert!(
            self.wavenumber.norm() > 0.0,
            "T_k is singular at k = 0; use the TA/TPhi blocks directly"
        );
        let jk = C64::new(0.0, 1.0) * self.wavenumber;
        let n = self.ta.nrows();
        let mut t = Mat::<C64>::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                t[(i, j)] = -jk * self.ta[(i, j)] + self.tphi[(i, j)] / jk;
            }
        }
        t
    }
}

// ---------------------------------------------------------------------------
// pair moments and their scatter into matrix blocks
// ---------------------------------------------------------------------------

/// The eighteen double integrals a triangle pair contributes. With
/// `a = r − c_t` (test) and `b = r′ − c′` (source), these are the moments of
/// `G` against {1, b, a, a·b} and of `∇G` against {1, ×b, a·(×b), a×}; every
/// entry of the pair's three 3×3 blocks is an affine combination of them.
#[derive(Clone, Copy, Debug)]
struct PairMoments {
    s00: C64,
    s01: Vector3<C64>,
    s10: Vector3<C64>,
    t11: C64,
    d0: Vector3<C64>,
    d1: Vector3<C64>,
    td1: C64,
    x1: Vector3<C64>,
}

impl PairMoments {
    fn from_scalar(v: &[C64; 8]) -> Self {
        let z = C64::new(0.0, 0.0);
        let zv = Vector3::new(z, z, z);
        PairMoments {
            s00: v[0],
            s01: Vector3::new(v[1], v[2], v[3]),
            s10: Vector3::new(v[4], v[5], v[6]),
            t11: v[7],
            d0: zv,
            d1: zv,
            td1: z,
            x1: zv,
        }
    }

    fn set_gradient(&mut self, v: &[C64; 10]) {
        self.d0 = Vector3::new(v[0], v[1], v[2]);
        self.d1 = Vector3::new(v[3], v[4], v[5]);
        self.td1 = v[6];
        self.x1 = Vector3::new(v[7], v[8], v[9]);
    }

    fn from_full(v: &[C64; 18]) -> Self {
        let mut m = PairMoments::from_scalar(&[v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]]);
        m.set_gradient(&[v[8], v[9], v[10], v[11], v[12], v[13], v[14], v[15], v[16], v[17]]);
        m
    }
}

fn pack_scalar(m: &KernelMoments, r: Vector3<f64>, ct: Vector3<f64>) -> [C64; 8] {
    let rc = r - ct;
    [
        m.s0,
        m.s1c.x,
        m.s1c.y,
        m.s1c.z,
        m.s0 * rc.x,
        m.s0 * rc.y,
        m.s0 * rc.z,
        dot_cr(&m.s1c, &rc),
    ]
}

fn pack_gradient(m: &KernelMoments, r: Vector3<f64>, ct: Vector3<f64>) -> [C64; 10] {
    let rc = r - ct;
    let x = cross_rc(&rc, &m.d0);
    [
        m.d0.x,
        m.d0.y,
        m.d0.z,
        m.d1c.x,
        m.d1c.y,
        m.d1c.z,
        dot_cr(&m.d1c, &rc),
        x.x,
        x.y,
        x.z,
    ]
}

fn pack_full(m: &KernelMoments, r: Vector3<f64>, ct: Vector3<f64>) -> [C64; 18] {
    let s = pack_scalar(m, r, ct);
    let g = pack_gradient(m, r, ct);
    let mut out = [C64::new(0.0, 0.0); 18];
    out[..8].copy_from_slice(&s);
    out[8..].copy_from_slice(&g);
    out
}

// ---------------------------------------------------------------------------
// per-triangle geometry cache
// ---------------------------------------------------------------------------

/// One edge of a triangle as seen by its RWG function: the matrix row or
/// column it addresses, the signed strength s/(2A) of the linear factor, the
/// signed constant charge s/A, and the offset from the free vertex to the
/// centroid so that f(x) = alpha·[(x − centroid) + w].
#[derive(Clone, Copy, Debug)]
struct LocalEdge {
    edge: usize,
    alpha: f64,
    charge: f64,
    w: Vector3<f64>,
}

/// Geometry of one triangle, precomputed once per assembly.
#[derive(Clone, Debug)]
struct TriGeom {
    verts: [usize; 3],
    pts: [Vector3<f64>; 3],
    centroid: Vector3<f64>,
    area: f64,
    diam: f64,
    /// Max distance from the centroid to a vertex; d_c − reach_t − reach_s
    /// lower-bounds the distance between any two points of a pair.
    reach: f64,
    edges: [LocalEdge; 3],
}

impl TriGeom {
    fn build(mesh: &TriangleMesh, conn: &MeshConnectivity, rwg: &RwgSpace, t: usize) -> Self {
        let pts = mesh.triangle_points(t);
        let centroid = mesh.triangle_centroid(t);
        let area = mesh.triangle_area(t);
        let reach = pts
            .iter()
            .map(|p| (p - centroid).norm())
            .fold(0.0, f64::max);
        let edges = conn.triangle_edges[t].map(|(e, is_plus)| {
            let sign = if is_plus { 1.0 } else { -1.0 };
            let free = if is_plus { rwg.plus_free[e] } else { rwg.minus_free[e] };
            LocalEdge {
                edge: e,
                alpha: sign / (2.0 * area),
                charge: sign / area,
                w: centroid - mesh.vertices()[free],
            }
        });
        TriGeom {
            verts: mesh.triangles()[t],
            pts,
            centroid,
            area,
            diam: triangle_diameter(&pts),
            reach,
            edges,
        }
    }
}

fn shared_vertices(a: &[usize; 3], b: &[usize; 3]) -> usize {
    a.iter().filter(|v| b.contains(v)).count()
}

// ---------------------------------------------------------------------------
// touching pairs: tensor singular rules
// ---------------------------------------------------------------------------

/// Identifies the tensor singular rule a touching pair needs: how the pair
/// touches, which local vertices are matched, and the 1-D Gauss order. Only
/// the local-index pattern matters, not the triangles themselves, so a
/// handful of rules (a few dozen point sets) serve every touching pair of a
/// mesh and are built once per assembly.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum TouchKey {
    /// Same triangle on both sides.
    Identical { n: usize },
    /// Shared edge: the two matched (test_local, source_local) vertex pairs,
    /// ordered by test index.
    Edge { pairs: [(u8, u8); 2], n: usize },
    /// Shared vertex as (test_local, source_local).
    Vertex { pair: (u8, u8), n: usize },
}

fn touch_key(ta: &[usize; 3], tb: &[usize; 3], n: usize) -> Option<TouchKey> {
    let mut pairs = [(0u8, 0u8); 3];
    let mut cnt = 0;
    for (i, va) in ta.iter().enumerate() {
        for (j, vb) in tb.iter().enumerate() {
            if va == vb {
                pairs[cnt] = (i as u8, j as u8);
                cnt += 1;
            }
        }
    }
    match cnt {
        0 => None,
        1 => Some(TouchKey::Vertex { pair: pairs[0], n }),
        2 => Some(TouchKey::Edge { pairs: [pairs[0], pairs[1]], n }),
        _ => Some(TouchKey::Identical { n }),
    }
}

/// 1-D Gauss order of the tensor singular rules as a function of the pair
/// phase |k|·diam. The singularity transform leaves a smooth integrand whose
/// difficulty grows only with the kernel's oscillation/decay across the
/// pair, so the order ramps with phase. Measured worst-moment accuracy
/// (`calibrate_touching_rules`, asserted in
/// `touching_pair_rules_meet_accuracy_targets`): ≤ 7e-10 at phase ≤ 2 with
/// n = 8, ≤ 1e-9 at phase 4 and ≤ 3e-9 at phase 8 at their table orders.
/// Past the table's end the order saturates: such pairs are entered by
/// kernels decaying within a fraction of a triangle, their entries are
/// negligible against screened-out disjoint entries, and only finiteness
/// and order of magnitude matter.
fn ss_npoints(phase: f64) -> usize {
    if phase <= 2.0 {
        8
    } else if phase <= 5.0 {
        10
    } else {
        12
    }
}

fn duffy_rule(key: &TouchKey) -> TestTrialNumericalQuadratureDefinition {
    let (conn, n) = match *key {
        TouchKey::Identical { n } => (
            CellToCellConnectivity { connectivity_dimension: 2, local_indices: Vec::new() },
            n,
        ),
        TouchKey::Edge { pairs, n } => (
            CellToCellConnectivity {
                connectivity_dimension: 1,
                local_indices: pairs.iter().map(|&(i, j)| (i as usize, j as usize)).collect(),
            },
            n,
        ),
        TouchKey::Vertex { pair, n } => (
            CellToCellConnectivity {
                connectivity_dimension: 0,
                local_indices: vec![(pair.0 as usize, pair.1 as usize)],
            },
            n,
        ),
    };
    triangle_duffy(&conn, n).expect("tensor Gauss rules exist at every order used")
}

/// Build the singular-rule cache for one assembly: enumerate touching pairs
/// through per-vertex triangle fans (linear in mesh size, no all-pairs scan)
/// and materialize one rule per distinct [`TouchKey`].
fn singular_rules(
    mesh: &TriangleMesh,
    geos: &[TriGeom],
    k: C64,
) -> HashMap<TouchKey, TestTrialNumericalQuadratureDefinition> {
    let mut vert_tris: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            vert_tris[v].push(t);
        }
    }
    let mut pairs: HashSet<(usize, usize)> = HashSet::new();
    for ring in &vert_tris {
        for &a in ring {
            for &b in ring {
                pairs.insert((a, b));
            }
        }
    }
    let mut rules = HashMap::new();
    for (a, b) in pairs {
        let n = ss_npoints(k.norm() * geos[a].diam.max(geos[b].diam));
        let key = touch_key(&geos[a].verts, &geos[b].verts, n)
            .expect("fan pairs share at least one vertex");
        rules.entry(key).or_insert_with(|| duffy_rule(&key));
    }
    rules
}

/// Touching-pair moments by a tensor singular rule: the rule supplies paired
/// (test, source) reference points whose joint density resolves the R → 0
/// region, so the full kernel is sampled directly — no inner moments, no
/// splitting, valid at any wavenumber. Reference coordinates map affinely
/// through each triangle's own vertex order, which is exactly the order the
/// matched local indices in the rule's key refer to. `with_gradient` is off
/// for coincident pairs, whose K block is exact zero.
fn ss_pair_moments(
    gt: &TriGeom,
    gs: &TriGeom,
    k: C64,
    rule: &TestTrialNumericalQuadratureDefinition,
    with_gradient: bool,
) -> PairMoments {
    let jac = 4.0 * gt.area * gs.area;
    let (ta, tu, tv) = (gt.pts[0], gt.pts[1] - gt.pts[0], gt.pts[2] - gt.pts[0]);
    let (sa, su, sv) = (gs.pts[0], gs.pts[1] - gs.pts[0], gs.pts[2] - gs.pts[0]);
    let z = C64::new(0.0, 0.0);
    let zv = Vector3::new(z, z, z);
    let mut m =
        PairMoments { s00: z, s01: zv, s10: zv, t11: z, d0: zv, d1: zv, td1: z, x1: zv };
    for q in 0..rule.npoints {
        let w = rule.weights[q] * jac;
        let r = ta + tu * rule.test_points[2 * q] + tv * rule.test_points[2 * q + 1];
        let rp = sa + su * rule.trial_points[2 * q] + sv * rule.trial_points[2 * q + 1];
        let a = r - gt.centroid;
        let b = rp - gs.centroid;
        let g = greens(k, r, rp) * w;
        m.s00 += g;
        m.s01 += cv(b) * g;
        m.s10 += cv(a) * g;
        m.t11 += g * a.dot(&b);
        if with_gradient {
            let dg = greens_gradient(k, r, rp) * C64::new(w, 0.0);
            m.d0 += dg;
            let dx = cross_cv(&dg, &b);
            m.d1 += dx;
            m.td1 += dot_cr(&dx, &a);
            m.x1 += cross_rc(&a, &dg);
        }
    }
    m
}

// ---------------------------------------------------------------------------
// assembly
// ---------------------------------------------------------------------------

struct RowStrip {
    t: usize,
    ta: Vec<C64>,
    tphi: Vec<C64>,
    kk: Vec<C64>,
    stats: AssemblyStats,
}

fn scatter(strip: &mut RowStrip, gt: &TriGeom, gs: &TriGeom, mom: &PairMoments, ne: usize, skip_k: bool) {
    for (i, et) in gt.edges.iter().enumerate() {
        for es in gs.edges.iter() {
            let idx = i * ne + es.edge;
            let aa = et.alpha * es.alpha;
            strip.ta[idx] += (mom.t11
                + dot_cr(&mom.s10, &es.w)
                + dot_cr(&mom.s01, &et.w)
                + mom.s00 * et.w.dot(&es.w))
                * aa;
            strip.tphi[idx] -= mom.s00 * (et.charge * es.charge);
            if !skip_k {
                let d0xu = cross_cv(&mom.d0, &es.w);
                strip.kk[idx] += (mom.td1
                    + dot_cr(&mom.x1, &es.w)
                    + dot_cr(&mom.d1, &et.w)
                    + dot_cr(&d0xu, &et.w))
                    * aa;
            }
        }
    }
}

/// Far-pair moments: fixed degree-6 tensor Gauss, accurate to ~1e-8 relative
/// at the 2-diameter cutoff and improving steeply with separation.
fn fixed_far_moments(gt: &TriGeom, gs: &TriGeom, k: C64) -> PairMoments {
    let rule = tri_rule(6);
    let mut acc = [C64::new(0.0, 0.0); 18];
    for (p, w) in rule.points.iter().zip(rule.weights) {
        let r = bary_to_point(&gt.pts, p);
        let m = kernel_moments_gauss(&gs.pts, r, k, 6, true);
        let pv = pack_full(&m, r, gt.centroid);
        for (a, v) in acc.iter_mut().zip(&pv) {
            *a += v * (w * gt.area);
        }
    }
    PairMoments::from_full(&acc)
}

/// Enumerate degree-6 outer panels of the test triangle for an
/// oscillatory/lossy disjoint pair: quarter-split while a panel is
/// electrically large for the phase budget or within the grading ratio of
/// the source hull, mirroring the inner quadtree's criterion so both axes of
/// the pair integral resolve oscillation and the near-approach variation.
/// Panels decayed under the screening floor are dropped outright.
fn graded_panels(
    tri: &[Vector3<f64>; 3],
    src_c: Vector3<f64>,
    src_reach: f64,
    k: C64,
    depth_left: usize,
    out: &mut Vec<[Vector3<f64>; 3]>,
) {
    let c = (tri[0] + tri[1] + tri[2]) / 3.0;
    let reach = tri.iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
    let r_near = ((c - src_c).norm() - reach - src_reach).max(0.0);
    if k.im < 0.0 && (k.im * r_near).exp() < SCREENING_FLOOR {
        return;
    }
    let diam = triangle_diameter(tri);
    let split =
        k.norm() * diam > panel_phase_budget(k, r_near) || r_near < PANEL_GRADE_RATIO * diam;
    if !split || depth_left == 0 {
        out.push(*tri);
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
        graded_panels(&child, src_c, src_reach, k, depth_left - 1, out);
    }
}

/// Moments of a disjoint pair whose kernel oscillates or decays within the
/// pair (phase beyond the extraction budget): graded degree-6 outer panels
/// crossed with the graded quadtree inner, both under the same decay-relaxed
/// local phase budget. Decay screening on panels of both axes makes deeply
/// lossy pairs nearly free.
fn subdivided_pair_moments(gt: &TriGeom, gs: &TriGeom, k: C64) -> PairMoments {
    let rule = tri_rule(6);
    let mut panels = Vec::new();
    graded_panels(&gt.pts, gs.centroid, gs.reach, k, PANEL_DEPTH_MAX, &mut panels);
    let mut acc = [C64::new(0.0, 0.0); 18];
    for panel in &panels {
        let area = triangle_area(panel);
        for (p, w) in rule.points.iter().zip(rule.weights) {
            let r = bary_to_point(panel, p);
            let m = kernel_moments_quadtree(&gs.pts, r, k, true);
            let pv = pack_full(&m, r, gt.centroid);
            for (a, v) in acc.iter_mut().zip(&pv) {
                *a += v * (w * area);
            }
        }
    }
    PairMoments::from_full(&acc)
}

fn row_strip(
    t: usize,
    geos: &[TriGeom],
    k: C64,
    ne: usize,
    rules: &HashMap<TouchKey, TestTrialNumericalQuadratureDefinition>,
) -> RowStrip {
    let z = C64::new(0.0, 0.0);
    let mut strip = RowStrip {
        t,
        ta: vec![z; 3 * ne],
        tphi: vec![z; 3 * ne],
        kk: vec![z; 3 * ne],
        stats: AssemblyStats::default(),
    };
    let gt = &geos[t];
    let four_pi = 4.0 * std::f64::consts::PI;

    for gs in geos {
        let share = shared_vertices(&gt.verts, &gs.verts);
        let diam = gt.diam.max(gs.diam);

        if share > 0 {
            // touching pair: tensor singular rule through the rule cache.
            // Coincident K is exact zero (in-plane gradient), so its
            // gradient moments are skipped outright.
            debug_assert!(share < 3 || gt.verts == gs.verts);
            let n = ss_npoints(k.norm() * diam);
            let key = touch_key(&gt.verts, &gs.verts, n).expect("share > 0");
            let mom = ss_pair_moments(gt, gs, k, &rules[&key], share < 3);
            scatter(&mut strip, gt, gs, &mom, ne, share == 3);
            continue;
        }

        let d_c = (gt.centroid - gs.centroid).norm();
        let extraction = k.norm() * d_c.max(diam) <= EXTRACTION_PHASE_LIMIT;
        let near = d_c < NEAR_PAIR_FACTOR * diam;

        // lossy screening: if even the closest possible approach of the two
        // triangles leaves the kernel bound under the floor, the pair block
        // is zero at double precision
        if k.im < 0.0 {
            let r_min = d_c - gt.reach - gs.reach;
            if r_min > 0.0 && (k.im * r_min).exp() < SCREENING_FLOOR {
                strip.stats.screened_pairs += 1;
                continue;
            }
        }

        let mom = if !extraction {
            // the kernel oscillates or decays within the pair: composite
            // phase-subdivided rules with decay-relaxed local budgets
            subdivided_pair_moments(gt, gs, k)
        } else if near {
            // smooth-kernel near pair: adaptive outer rule over the test
            // triangle against extracted inner moments. Outer points are
            // interior to the test triangle and off the source triangle, so
            // the inner gradients are well defined. The magnitude anchor for
            // the adaptive tolerance is a static estimate of ∬G and ∬∇G
            // over the pair.
            let d_ref = d_c.max(0.5 * diam);
            let floor_s = gt.area * gs.area / (four_pi * d_ref);
            let floor = floor_s.max(floor_s / d_ref);
            let rc = adaptive_triangle::<18, _>(
                &gt.pts,
                &|r| pack_full(&kernel_moments_extracted(&gs.pts, r, k, true), r, gt.centroid),
                TOL_QUADRATURE,
                floor,
                QUAD_MAX_DEPTH,
            );
            strip.stats.note(&rc, floor);
            PairMoments::from_full(&rc.values)
        } else {
            fixed_far_moments(gt, gs, k)
        };

        scatter(&mut strip, gt, gs, &mom, ne, false);
    }
    strip
}

/// Assemble the three operator blocks at wavenumber `k` (Im(k) ≤ 0).
///
/// Deterministic for any [`Parallelism`]: triangle strips are merged in
/// index order. Fails only when some pair integral could not be driven to
/// a trustworthy error level within the subdivision depth limit.
pub fn assemble_operators(
    mesh: &TriangleMesh,
    conn: &MeshConnectivity,
    rwg: &RwgSpace,
    k: C64,
    par: Parallelism,
) -> Result<OperatorMatrices, OperatorError> {
    let nt = mesh.num_triangles();
    let ne = conn.num_edges;
    let geos: Vec<TriGeom> = (0..nt)
        .map(|t| TriGeom::build(mesh, conn, rwg, t))
        .collect();
    let rules = singular_rules(mesh, &geos, k);

    let mut ta = Mat::<C64>::zeros(ne, ne);
    let mut tphi = Mat::<C64>::zeros(ne, ne);
    let mut kk = Mat::<C64>::zeros(ne, ne);
    let mut stats = AssemblyStats::default();

    let mut t0 = 0;
    while t0 < nt {
        let t1 = (t0 + ASSEMBLY_CHUNK).min(nt);
        let strips = par_map(par, t1 - t0, |i| row_strip(t0 + i, &geos, k, ne, &rules));
        for strip in &strips {
            let gt = &geos[strip.t];
            for (i, le) in gt.edges.iter().enumerate() {
                let row = le.edge;
                for col in 0..ne {
                    let idx = i * ne + col;
                    ta[(row, col)] += strip.ta[idx];
                    tphi[(row, col)] += strip.tphi[idx];
                    kk[(row, col)] += strip.kk[idx];
                }
            }
            stats.absorb(&strip.stats);
        }
        t0 = t1;
    }

    if stats.worst_depth_limited_rel > QUAD_FAILURE_REL {
        return Err(OperatorError::QuadratureFailure {
            pairs: stats.depth_limited_pairs,
            worst: stats.worst_depth_limited_rel,
            limit: QUAD_FAILURE_REL,
        });
    }
    Ok(OperatorMatrices { ta, tphi, k: kk, wavenumber: k, stats })
}

// ---------------------------------------------------------------------------
// norm trends along a wavenumber sweep
// ---------------------------------------------------------------------------

/// Spectral norms of the operator blocks along a wavenumber sweep, for
/// verifying the asymptotic trends that the preconditioner coefficients are
/// built on. `k_ext_norm` is ‖K_k − K_0‖₂, the dynamic part of the double
/// layer, whose decay rate separates the regimes.
#[derive(Clone, Debug)]
pub struct ScalingProbe {
    /// The sweep, as assembled.
    pub k_values: Vec<C64>,
    /// ‖T_A‖₂ / L (L = characteristic length of the mesh).
    pub ta_over_l: Vec<f64>,
    /// ‖T_Φ‖₂ · L.
    pub tphi_times_l: Vec<f64>,
    /// ‖K‖₂.
    pub k_norm: Vec<f64>,
    /// ‖K_k − K_0‖₂.
    pub k_ext_norm: Vec<f64>,
}

/// Assemble the blocks at each wavenumber of a sweep plus the static limit,
/// and collect the block norms a scaling analysis compares against.
pub fn scaling_probe(
    mesh: &TriangleMesh,
    conn: &MeshConnectivity,
    rwg: &RwgSpace,
    ks: &[C64],
    par: Parallelism,
) -> Result<ScalingProbe, OperatorError> {
    let l = mesh.characteristic_length();
    let k0 = assemble_operators(mesh, conn, rwg, C64::new(0.0, 0.0), par)?;
    let mut probe = ScalingProbe {
        k_values: ks.to_vec(),
        ta_over_l: Vec::with_capacity(ks.len()),
        tphi_times_l: Vec::with_capacity(ks.len()),
        k_norm: Vec::with_capacity(ks.len()),
        k_ext_norm: Vec::with_capacity(ks.len()),
    };
    for &k in ks {
        let ops = assemble_operators(mesh, conn, rwg, k, par)?;
        let n = ops.k.nrows();
        let mut k_ext = Mat::<C64>::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                k_ext[(i, j)] = ops.k[(i, j)] - k0.k[(i, j)];
            }
        }
        probe.ta_over_l.push(crate::linalg::spectral_norm(ops.ta.as_ref()) / l);
        probe
            .tphi_times_l
            .push(crate::linalg::spectral_norm(ops.tphi.as_ref()) * l);
        probe.k_norm.push(crate::linalg::spectral_norm(ops.k.as_ref()));
        probe
            .k_ext_norm
            .push(crate::linalg::spectral_norm(k_ext.as_ref()));
    }
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::log_log_slope;
    use crate::linalg::frobenius_norm;
    use crate::mesh::build_connectivity;
    use crate::quadrature::{greens, greens_gradient, triangle_area};
    use crate::constants::{TOL_IDENTITY, TOL_QUADRATURE_IDENTITY};
    use proptest::prelude::*;

    fn sphere_fixture(subdiv: u32) -> (TriangleMesh, MeshConnectivity, RwgSpace) {
        let (v, t) = meshgen::icosphere(subdiv, 1.0);
        let mesh = TriangleMesh::from_raw(v, t).unwrap();
        let conn = build_connectivity(&mesh);
        let rwg = RwgSpace::build(&mesh, &conn);
        (mesh, conn, rwg)
    }

    fn rel_fro_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
        let n = a.nrows();
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..n {
            for i in 0..n {
                num += (a[(i, j)] - b[(i, j)]).norm_sqr();
                den += a[(i, j)].norm_sqr();
            }
        }
        (num / den).sqrt()
    }

    fn transpose(a: &Mat<C64>) -> Mat<C64> {
        let n = a.nrows();
        let mut t = Mat::<C64>::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                t[(i, j)] = a[(j, i)];
            }
        }
        t
    }

    /// Deep independent reference for the pair moments of a touching pair:
    /// adaptive outer refinement of the closed-form inner moments, driven
    /// far past the production depth limit. The outer integrand's kink along
    /// shared edges limits convergence to O(h²) per depth, hence the large
    /// depth. Valid in the extraction regime (|k|·scale ≤ 2); gradients only
    /// for distinct triangles.
    fn deep_touching_reference(gt: &TriGeom, gs: &TriGeom, k: C64, grad: bool) -> PairMoments {
        if grad {
            let r = adaptive_triangle::<18, _>(
                &gt.pts,
                &|r| pack_full(&kernel_moments_extracted(&gs.pts, r, k, true), r, gt.centroid),
                1e-11,
                0.0,
                14,
            );
            PairMoments::from_full(&r.values)
        } else {
            let r = adaptive_triangle::<8, _>(
                &gt.pts,
                &|r| pack_scalar(&kernel_moments_extracted(&gs.pts, r, k, false), r, gt.centroid),
                1e-11,
                0.0,
                14,
            );
            PairMoments::from_scalar(&r.values)
        }
    }

    /// Worst relative disagreement across the moment set, each moment scaled
    /// by its natural magnitude (powers of the pair diameter).
    fn mom_rel_diff(a: &PairMoments, b: &PairMoments, diam: f64, grad: bool) -> f64 {
        let cnorm = |v: &Vector3<C64>| {
            (v.x.norm_sqr() + v.y.norm_sqr() + v.z.norm_sqr()).sqrt()
        };
        let s_scale = b.s00.norm().max(1e-300);
        let mut worst = (a.s00 - b.s00).norm() / s_scale;
        worst = worst.max(cnorm(&(a.s01 - b.s01)) / (s_scale * diam));
        worst = worst.max(cnorm(&(a.s10 - b.s10)) / (s_scale * diam));
        worst = worst.max((a.t11 - b.t11).norm() / (s_scale * diam * diam));
        if grad {
            let g_scale = cnorm(&b.d0).max(s_scale / diam);
            worst = worst.max(cnorm(&(a.d0 - b.d0)) / g_scale);
            worst = worst.max(cnorm(&(a.d1 - b.d1)) / (g_scale * diam));
            worst = worst.max((a.td1 - b.td1).norm() / (g_scale * diam * diam));
            worst = worst.max(cnorm(&(a.x1 - b.x1)) / (g_scale * diam));
        }
        worst
    }

    /// Pick the coincident pair and the first edge- and vertex-touching
    /// partners of triangle 0 on the coarse icosahedron.
    fn touching_fixture() -> (Vec<TriGeom>, usize, usize) {
        let (mesh, conn, rwg) = sphere_fixture(0);
        let geos: Vec<TriGeom> = (0..mesh.num_triangles())
            .map(|t| TriGeom::build(&mesh, &conn, &rwg, t))
            .collect();
        let mut edge_pair = None;
        let mut vert_pair = None;
        for s in 1..geos.len() {
            match shared_vertices(&geos[0].verts, &geos[s].verts) {
                2 => edge_pair = edge_pair.or(Some(s)),
                1 => vert_pair = vert_pair.or(Some(s)),
                _ => {}
            }
        }
        (geos, edge_pair.unwrap(), vert_pair.unwrap())
    }

    /// A TriGeom for a bare triangle outside any mesh: enough for the moment
    /// paths (`pts`, `centroid`, `area`, `diam`), with inert edge bookkeeping.
    fn bare_geom(verts: [usize; 3], pts: [Vector3<f64>; 3]) -> TriGeom {
        let centroid = (pts[0] + pts[1] + pts[2]) / 3.0;
        let area = triangle_area(&pts);
        let reach = pts.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
        let dummy = LocalEdge { edge: 0, alpha: 0.0, charge: 0.0, w: Vector3::zeros() };
        TriGeom {
            verts,
            pts,
            centroid,
            area,
            diam: triangle_diameter(&pts),
            reach,
            edges: [dummy; 3],
        }
    }

    fn ss_s00(gt: &TriGeom, gs: &TriGeom, k: C64, n: usize) -> C64 {
        let key = touch_key(&gt.verts, &gs.verts, n).unwrap();
        ss_pair_moments(gt, gs, k, &duffy_rule(&key), false).s00
    }

    #[test]
    fn touching_pair_rules_meet_accuracy_targets() {
        // Absolute anchors: decompose unit squares into right triangles, so
        // the identical- and edge-touching rules must jointly reproduce the
        // closed-form square self-integral ∬∬ 1/R = (4/3)(3·asinh 1 + 1 − √2)
        // and the corner-touching rules the corner-squares cross integral
        // (computed to 30 digits by reducing to the 2-D correlation form
        // ∫∫ w(u)w(v)/√(u²+v²) du dv). This pins the rules, their reference-
        // coordinate mapping, and the local-index matching against values
        // that owe nothing to this crate's quadrature.
        let p = |x: f64, y: f64| Vector3::new(x, y, 0.0);
        let a = bare_geom([0, 1, 2], [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0)]);
        let b = bare_geom([0, 2, 3], [p(0.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]);
        let c = bare_geom([0, 4, 5], [p(0.0, 0.0), p(-1.0, 0.0), p(-1.0, -1.0)]);
        let d = bare_geom([0, 5, 6], [p(0.0, 0.0), p(-1.0, -1.0), p(0.0, -1.0)]);
        let inv4pi = 0.25 / std::f64::consts::PI;
        let sq_self = 2.973_209_598_247_378_7 * inv4pi;
        let sq_corner = 0.748_952_218_549_366_1 * inv4pi;
        let k0 = C64::new(0.0, 0.0);
        // right triangles (worst realistic shape) converge slower than the
        // near-equilateral mesh triangles below: the production order sits
        // at ~1e-7 on them, and the closed forms must be reached to ~1e-9
        // two orders later, showing it is convergence, not a plateau
        for (n, tol_edge, tol_vert) in
            [(ss_npoints(0.0), 3e-7, 1e-10), (12, 1e-9, 1e-10)]
        {
            let edge_sum = (ss_s00(&a, &a, k0, n)
                + ss_s00(&b, &b, k0, n)
                + ss_s00(&a, &b, k0, n)
                + ss_s00(&b, &a, k0, n))
            .re;
            let rel_edge = (edge_sum - sq_self).abs() / sq_self;
            assert!(rel_edge < tol_edge, "square edge identity at n={n} off by {rel_edge:.2e}");
            let vert_sum = (ss_s00(&a, &c, k0, n)
                + ss_s00(&a, &d, k0, n)
                + ss_s00(&b, &c, k0, n)
                + ss_s00(&b, &d, k0, n))
            .re;
            let rel_vert = (vert_sum - sq_corner).abs() / sq_corner;
            assert!(rel_vert < tol_vert, "square corner identity at n={n} off by {rel_vert:.2e}");
        }

        // Frozen dual-path consensus for one identical pair: the tensor rule
        // at order 16 and a depth-14 adaptive refinement of the closed-form
        // inner integral agree on the unit right triangle's 4π·∬∬ G₀ to
        // 1e-11 (`calibrate_touching_rules` recomputes both).
        let tri_self = 1.003_065_884_773_180_1 * inv4pi;
        for (n, tol) in [(ss_npoints(0.0), 3e-7), (12, 1e-9)] {
            let rel_self = (ss_s00(&a, &a, k0, n).re - tri_self).abs() / tri_self;
            assert!(rel_self < tol, "triangle self integral at n={n} off by {rel_self:.2e}");
        }

        // Self-convergence guard at the table orders across the phase range
        // production assemblies visit, on realistic mesh triangles: the full
        // moment set at ss_npoints(phase) must sit on the converged value
        // (order 16) to ~1e-8, lossless and 45°-lossy alike.
        let (geos, edge_pair, vert_pair) = touching_fixture();
        let cases =
            [("identical", 0usize, false), ("edge", edge_pair, true), ("vertex", vert_pair, true)];
        let f = std::f64::consts::FRAC_1_SQRT_2;
        for (name, s, grad) in cases {
            let gt = &geos[0];
            let gs = &geos[s];
            let diam = gt.diam.max(gs.diam);
            for phase in [0.25, 1.0, 2.0, 4.0, 8.0] {
                for k in [
                    C64::new(phase / diam, 0.0),
                    C64::new(phase * f / diam, -phase * f / diam),
                ] {
                    let n = ss_npoints(k.norm() * diam);
                    let key = touch_key(&gt.verts, &gs.verts, n).unwrap();
                    let m = ss_pair_moments(gt, gs, k, &duffy_rule(&key), grad);
                    let key = touch_key(&gt.verts, &gs.verts, 16).unwrap();
                    let refm = ss_pair_moments(gt, gs, k, &duffy_rule(&key), grad);
                    let rel = mom_rel_diff(&m, &refm, diam, grad);
                    assert!(
                        rel < 2e-8,
                        "{name} pair at phase {phase} ({k}): moments off converged by {rel:.2e}"
                    );
                }
            }
        }
    }

    #[test]
    #[ignore = "order-table calibration harness; run with --ignored --nocapture"]
    fn calibrate_touching_rules() {
        // absolute anchors at k = 0: decompose squares into triangles so the
        // touching rules must reproduce closed-form square integrals
        let p = |x: f64, y: f64| Vector3::new(x, y, 0.0);
        let a = bare_geom([0, 1, 2], [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0)]);
        let b = bare_geom([0, 2, 3], [p(0.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]);
        let c = bare_geom([0, 4, 5], [p(0.0, 0.0), p(-1.0, 0.0), p(-1.0, -1.0)]);
        let d = bare_geom([0, 5, 6], [p(0.0, 0.0), p(-1.0, -1.0), p(0.0, -1.0)]);
        let inv4pi = 0.25 / std::f64::consts::PI;
        let sq_self = 2.973_209_598_247_378_7 * inv4pi;
        let sq_corner = 0.748_952_218_549_366_1 * inv4pi;
        let k0 = C64::new(0.0, 0.0);
        for n in [4usize, 6, 8, 10, 12] {
            let edge_sum = (ss_s00(&a, &a, k0, n)
                + ss_s00(&b, &b, k0, n)
                + ss_s00(&a, &b, k0, n)
                + ss_s00(&b, &a, k0, n))
            .re;
            let vert_sum = (ss_s00(&a, &c, k0, n)
                + ss_s00(&a, &d, k0, n)
                + ss_s00(&b, &c, k0, n)
                + ss_s00(&b, &d, k0, n))
            .re;
            println!(
                "square identities n{n}: edge {:.2e}  corner {:.2e}",
                (edge_sum - sq_self).abs() / sq_self,
                (vert_sum - sq_corner).abs() / sq_corner
            );
        }
        // deep-adaptive self value of the unit right triangle, for freezing
        let deep = deep_touching_reference(&a, &a, k0, false);
        println!("unit right triangle self s00·4π = {:.16e}", deep.s00.re / inv4pi);
        println!("S-S n16 same                   = {:.16e}", ss_s00(&a, &a, k0, 16).re / inv4pi);

        // self-convergence sweep on realistic (icosahedron) triangles
        let (geos, edge_pair, vert_pair) = touching_fixture();
        let cases = [
            ("identical", 0usize, false),
            ("edge", edge_pair, true),
            ("vertex", vert_pair, true),
        ];
        let f = std::f64::consts::FRAC_1_SQRT_2;
        for (name, s, grad) in cases {
            let gt = &geos[0];
            let gs = &geos[s];
            let diam = gt.diam.max(gs.diam);
            for (kname, k) in [
                ("k=0", C64::new(0.0, 0.0)),
                ("ph.25", C64::new(0.25 / diam, 0.0)),
                ("ph1", C64::new(1.0 / diam, 0.0)),
                ("ph2", C64::new(2.0 / diam, 0.0)),
                ("ph2lossy", C64::new(2.0 * f / diam, -2.0 * f / diam)),
                ("ph4lossy", C64::new(4.0 * f / diam, -4.0 * f / diam)),
                ("ph8lossy", C64::new(8.0 * f / diam, -8.0 * f / diam)),
            ] {
                let key = touch_key(&gt.verts, &gs.verts, 16).unwrap();
                let refm = ss_pair_moments(gt, gs, k, &duffy_rule(&key), grad);
                print!("{name:9} {kname:9}:");
                for n in [3usize, 4, 5, 6, 8, 10, 12] {
                    let key = touch_key(&gt.verts, &gs.verts, n).unwrap();
                    let m = ss_pair_moments(gt, gs, k, &duffy_rule(&key), grad);
                    print!(" n{n}:{:.1e}", mom_rel_diff(&m, &refm, diam, grad));
                }
                println!();
            }
        }
    }

    /// ΛᵀM (vertex × cols of M): rows combined with the ±1 vertex incidence.
    fn lambda_t_mul(conn: &MeshConnectivity, m: &Mat<C64>) -> Mat<C64> {
        let nv = conn.num_vertices;
        let mut out = Mat::<C64>::zeros(nv, m.ncols());
        for (e, &[lo, hi]) in conn.edges.iter().enumerate() {
            for col in 0..m.ncols() {
                let v = m[(e, col)];
                out[(lo, col)] += v;
                out[(hi, col)] -= v;
            }
        }
        out
    }

    /// MΛ (rows of M × vertex).
    fn mul_lambda(conn: &MeshConnectivity, m: &Mat<C64>) -> Mat<C64> {
        let nv = conn.num_vertices;
        let mut out = Mat::<C64>::zeros(m.nrows(), nv);
        for (e, &[lo, hi]) in conn.edges.iter().enumerate() {
            for row in 0..m.nrows() {
                let v = m[(row, e)];
                out[(row, lo)] += v;
                out[(row, hi)] -= v;
            }
        }
        out
    }

    #[test]
    fn greens_matches_pinned_values() {
        let o = Vector3::new(0.0, 0.0, 0.0);
        // static kernel at R = 1
        let g = greens(C64::new(0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), o);
        assert!((g.re - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert_eq!(g.im, 0.0);
        // real k: unimodular phase factor
        let r = 0.37;
        let g = greens(C64::new(3.1, 0.0), Vector3::new(r, 0.0, 0.0), o);
        assert!((g.norm() - 1.0 / (4.0 * std::f64::consts::PI * r)).abs() < 1e-15);
        // skin-effect k = (1−j)/δ at R = 3δ: modulus e^{−3}/(4πR)
        let delta = 0.2;
        let k = C64::new(1.0 / delta, -1.0 / delta);
        let r = 3.0 * delta;
        let g = greens(k, Vector3::new(r, 0.0, 0.0), o);
        let expect = (-3.0f64).exp() / (4.0 * std::f64::consts::PI * r);
        assert!((g.norm() - expect).abs() < 1e-15 * expect.recip().min(1e15));
    }

    #[test]
    fn galerkin_blocks_have_pinned_symmetry() {
        // TA and TPhi are symmetric; K is symmetric too, which follows from
        // relabeling r ↔ r′ in its kernel (∇G flips sign, the cross product
        // reorders, and the two flips cancel). All are quadrature-limited.
        let (mesh, conn, rwg) = sphere_fixture(0);
        let ops =
            assemble_operators(&mesh, &conn, &rwg, C64::new(0.25, 0.0), Parallelism::default())
                .unwrap();
        let ta_t = transpose(&ops.ta);
        let tphi_t = transpose(&ops.tphi);
        let k_t = transpose(&ops.k);
        assert!(rel_fro_diff(&ops.ta, &ta_t) < 1e-8, "TA asymmetry");
        assert!(rel_fro_diff(&ops.tphi, &tphi_t) < 1e-8, "TPhi asymmetry");
        assert!(
            rel_fro_diff(&ops.k, &k_t) < TOL_QUADRATURE_IDENTITY,
            "K asymmetry {}",
            rel_fro_diff(&ops.k, &k_t)
        );
    }

    #[test]
    fn loop_combinations_annihilate_scalar_potential() {
        // ±1 vertex-loop combinations have zero divergence on every
        // triangle, so they must kill TPhi from either side to round-off —
        // independent of quadrature accuracy, because all nine entries of a
        // pair block share one integral. Checked on an irregular mesh and a
        // lossy wavenumber to rule out accidental symmetry.
        let (mesh, conn, rwg) = sphere_fixture(1);
        let ops =
            assemble_operators(&mesh, &conn, &rwg, C64::new(0.8, -0.4), Parallelism::default())
                .unwrap();
        let norm = frobenius_norm(ops.tphi.as_ref());
        let left = lambda_t_mul(&conn, &ops.tphi);
        let right = mul_lambda(&conn, &ops.tphi);
        assert!(
            frobenius_norm(left.as_ref()) <= TOL_IDENTITY * norm,
            "Λᵀ·TPhi = {:e} vs norm {:e}",
            frobenius_norm(left.as_ref()),
            norm
        );
        assert!(
            frobenius_norm(right.as_ref()) <= TOL_IDENTITY * norm,
            "TPhi·Λ = {:e} vs norm {:e}",
            frobenius_norm(right.as_ref()),
            norm
        );
    }

    #[test]
    fn static_double_layer_annihilates_on_loops() {
        // Λᵀ K₀ Λ ≈ 0 is a property of the static kernel (not structural in
        // the matrix entries), so it holds only to quadrature accuracy.
        for subdiv in [0u32, 1] {
            let (mesh, conn, rwg) = sphere_fixture(subdiv);
            let ops =
                assemble_operators(&mesh, &conn, &rwg, C64::new(0.0, 0.0), Parallelism::default())
                    .unwrap();
            let norm = frobenius_norm(ops.k.as_ref());
            let sandwich = lambda_t_mul(&conn, &mul_lambda(&conn, &ops.k));
            let rel = frobenius_norm(sandwich.as_ref()) / norm;
            assert!(
                rel <= TOL_QUADRATURE_IDENTITY,
                "subdiv {subdiv}: ΛᵀK₀Λ relative {rel:e}"
            );
        }
    }

    #[test]
    fn static_limit_continuity() {
        let (mesh, conn, rwg) = sphere_fixture(0);
        let k = C64::new(0.3, 0.0);
        let a = assemble_operators(&mesh, &conn, &rwg, k, Parallelism::default()).unwrap();
        let b = assemble_operators(&mesh, &conn, &rwg, k * (1.0 + 1e-8), Parallelism::default())
            .unwrap();
        for (ma, mb, name) in [(&a.ta, &b.ta, "TA"), (&a.tphi, &b.tphi, "TPhi"), (&a.k, &b.k, "K")]
        {
            let n = ma.nrows();
            let mut maxabs = 0.0f64;
            for j in 0..n {
                for i in 0..n {
                    maxabs = maxabs.max(ma[(i, j)].norm());
                }
            }
            for j in 0..n {
                for i in 0..n {
                    let va = ma[(i, j)];
                    // entrywise on significant entries; below 1e-6 of the
                    // peak, relative comparison against near-zeros (e.g.
                    // coplanar K blocks) is meaningless
                    if va.norm() > 1e-6 * maxabs {
                        let rel = (va - mb[(i, j)]).norm() / va.norm();
                        assert!(rel <= 1e-6, "{name}[{i},{j}] moved by {rel:e}");
                    }
                }
            }
        }
    }

    #[test]
    fn lossy_far_entries_match_brute_force() {
        // Skin-effect wavenumber with δ ≈ h/3: far entries are exponentially
        // small but must still match a directly integrated reference. This
        // exercises the Duffy branch end to end, including its screening.
        let (mesh, conn, rwg) = sphere_fixture(1);
        let k = C64::new(6.0, -6.0);
        let ops = assemble_operators(&mesh, &conn, &rwg, k, Parallelism::default()).unwrap();

        // entries must be finite everywhere, however lossy the kernel
        let ne = conn.num_edges;
        for j in 0..ne {
            for i in 0..ne {
                assert!(ops.ta[(i, j)].is_finite(), "TA[{i},{j}] not finite");
                assert!(ops.tphi[(i, j)].is_finite(), "TPhi[{i},{j}] not finite");
                assert!(ops.k[(i, j)].is_finite(), "K[{i},{j}] not finite");
            }
        }

        // pick the most separated edge pair: all four support triangles are
        // pairwise far
        let centroid_of_edge = |e: usize| -> Vector3<f64> {
            let et = conn.edge_triangles[e];
            (mesh.triangle_centroid(et.plus) + mesh.triangle_centroid(et.minus)) * 0.5
        };
        let mut best = (0usize, 1usize, 0.0f64);
        for m in 0..ne {
            for n in 0..ne {
                let d = (centroid_of_edge(m) - centroid_of_edge(n)).norm();
                if d > best.2 {
                    best = (m, n, d);
                }
            }
        }
        let (m, n, _) = best;

        // brute-force reference: level-3 subdivision on both sides, deg-6
        // Gauss, kernel evaluated directly
        let mut ta_ref = C64::new(0.0, 0.0);
        let mut tphi_ref = C64::new(0.0, 0.0);
        let mut k_ref = C64::new(0.0, 0.0);
        // absolute mass of each integrand, to anchor tolerances where the
        // value itself cancels (the icosahedron is centrally symmetric, so
        // the antipodal pair's K nearly vanishes by symmetry)
        let mut ta_abs = 0.0f64;
        let mut tphi_abs = 0.0f64;
        let mut k_abs = 0.0f64;
        let rule = tri_rule(6);
        let subdivide = |tri: &[Vector3<f64>; 3]| -> Vec<[Vector3<f64>; 3]> {
            let mut acc = vec![*tri];
            for _ in 0..3 {
                let mut next = Vec::with_capacity(acc.len() * 4);
                for t in &acc {
                    let m01 = (t[0] + t[1]) * 0.5;
                    let m12 = (t[1] + t[2]) * 0.5;
                    let m20 = (t[2] + t[0]) * 0.5;
                    next.push([t[0], m01, m20]);
                    next.push([m01, t[1], m12]);
                    next.push([m20, m12, t[2]]);
                    next.push([m01, m12, m20]);
                }
                acc = next;
            }
            acc
        };
        for &(tm, sm) in &[
            (rwg.plus_tri[m], 1.0),
            (rwg.minus_tri[m], -1.0),
        ] {
            let free_m = if sm > 0.0 { rwg.plus_free[m] } else { rwg.minus_free[m] };
            let vm = mesh.vertices()[free_m];
            let am = mesh.triangle_area(tm);
            for &(tn, sn) in &[
                (rwg.plus_tri[n], 1.0),
                (rwg.minus_tri[n], -1.0),
            ] {
                let free_n = if sn > 0.0 { rwg.plus_free[n] } else { rwg.minus_free[n] };
                let vn = mesh.vertices()[free_n];
                let an = mesh.triangle_area(tn);
                for ct in subdivide(&mesh.triangle_points(tm)) {
                    let cta = triangle_area(&ct);
                    for (pt, wt) in rule.points.iter().zip(rule.weights) {
                        let r = bary_to_point(&ct, pt);
                        let fm = (r - vm) * (sm / (2.0 * am));
                        for cs in subdivide(&mesh.triangle_points(tn)) {
                            let csa = triangle_area(&cs);
                            for (ps, ws) in rule.points.iter().zip(rule.weights) {
                                let rp = bary_to_point(&cs, ps);
                                let fn_ = (rp - vn) * (sn / (2.0 * an));
                                let w = wt * cta * ws * csa;
                                let g = greens(k, r, rp) * w;
                                ta_ref += g * fm.dot(&fn_);
                                ta_abs += g.norm() * fm.dot(&fn_).abs();
                                tphi_ref -= g * (sm / am) * (sn / an);
                                tphi_abs += g.norm() * (1.0 / am) * (1.0 / an);
                                let dg = greens_gradient(k, r, rp);
                                let kc = dot_cr(&dg, &fn_.cross(&fm)) * w;
                                k_ref += kc;
                                k_abs += kc.norm();
                            }
                        }
                    }
                }
            }
        }
        let pairs = [
            (ops.ta[(m, n)], ta_ref, ta_abs, "TA"),
            (ops.tphi[(m, n)], tphi_ref, tphi_abs, "TPhi"),
            (ops.k[(m, n)], k_ref, k_abs, "K"),
        ];
        for (got, want, mass, name) in pairs {
            // the adaptive tolerance is anchored to an undecayed static
            // floor, so integration of a pair attenuated by e^{−12} stops
            // once its ABSOLUTE error is negligible at matrix scale; 1e-5
            // relative on the attenuated entry corresponds to ~1e-11 of the
            // matrix norm. The absolute term covers entries that cancel past
            // quadrature accuracy (antipodal K).
            assert!(
                (got - want).norm() <= 1e-5 * want.norm() + 1e-6 * mass,
                "{name}[{m},{n}] = {got:?} vs reference {want:?} (mass {mass:.2e})"
            );
        }
    }

    #[test]
    fn deep_screening_keeps_entries_finite_and_skips_pairs() {
        let (mesh, conn, rwg) = sphere_fixture(0);
        let k = C64::new(200.0, -200.0);
        let ops = assemble_operators(&mesh, &conn, &rwg, k, Parallelism::default()).unwrap();
        assert!(ops.stats.screened_pairs > 0, "no pair was screened");
        let ne = conn.num_edges;
        let mut tphi_diag_min = f64::INFINITY;
        for j in 0..ne {
            for i in 0..ne {
                assert!(ops.ta[(i, j)].is_finite());
                assert!(ops.tphi[(i, j)].is_finite());
                assert!(ops.k[(i, j)].is_finite());
            }
            tphi_diag_min = tphi_diag_min.min(ops.tphi[(j, j)].norm());
        }
        // self terms survive screening
        assert!(tphi_diag_min > 0.0);
    }

    #[test]
    fn quasistatic_norm_trends() {
        // exterior-style sweep (real k): the dynamic double layer shrinks
        // as the phase squared while TA/L and TPhi·L plateau
        let (mesh, conn, rwg) = sphere_fixture(0);
        let l = mesh.characteristic_length();
        let ks: Vec<C64> = [5e-4, 5e-3, 5e-2].iter().map(|&k| C64::new(k, 0.0)).collect();
        let probe = scaling_probe(&mesh, &conn, &rwg, &ks, Parallelism::default()).unwrap();
        let chi: Vec<f64> = ks.iter().map(|k| k.norm() * l).collect();
        let s_kext = log_log_slope(&chi, &probe.k_ext_norm);
        let s_ta = log_log_slope(&chi, &probe.ta_over_l);
        let s_tphi = log_log_slope(&chi, &probe.tphi_times_l);
        assert!((s_kext - 2.0).abs() <= 0.2, "K_ext slope {s_kext}");
        assert!(s_ta.abs() <= 0.1, "TA slope {s_ta}");
        assert!(s_tphi.abs() <= 0.1, "TPhi slope {s_tphi}");

        // interior-style sweep at fixed conductivity: k ∝ (1−j)·√ω, x-axis
        // the interior phase |k|L, same quadratic trend of the dynamic part
        let ks: Vec<C64> = [5e-4, 5e-3, 5e-2]
            .iter()
            .map(|&q| C64::new(q, -q))
            .collect();
        let probe = scaling_probe(&mesh, &conn, &rwg, &ks, Parallelism::default()).unwrap();
        let xi: Vec<f64> = ks.iter().map(|k| k.norm() * l).collect();
        let s_kext = log_log_slope(&xi, &probe.k_ext_norm);
        assert!((s_kext - 2.0).abs() <= 0.2, "lossy K_ext slope {s_kext}");
    }

    #[test]
    fn skin_effect_vector_potential_norm_trend() {
        // k = (1−j)/δ with δ below the mesh length h: ‖TA‖/L decays like
        // δ ∝ 1/ξ because only a skin-depth-deep neighborhood of each
        // triangle still contributes
        let (mesh, conn, rwg) = sphere_fixture(0);
        let l = mesh.characteristic_length();
        let h = mesh.average_edge_length();
        let deltas: Vec<f64> = [0.7, 0.45, 0.3, 0.2].iter().map(|&f| f * h).collect();
        let ks: Vec<C64> = deltas.iter().map(|&d| C64::new(1.0 / d, -1.0 / d)).collect();
        let probe = scaling_probe(&mesh, &conn, &rwg, &ks, Parallelism::default()).unwrap();
        let xi: Vec<f64> = deltas.iter().map(|&d| l / d).collect();
        let slope = log_log_slope(&xi, &probe.ta_over_l);
        assert!((slope + 1.0).abs() <= 0.15, "SEDR TA slope {slope}");
    }

    #[test]
    fn parallel_and_sequential_assembly_are_bit_identical() {
        let (mesh, conn, rwg) = sphere_fixture(0);
        let k = C64::new(1.3, -0.7);
        let a = assemble_operators(&mesh, &conn, &rwg, k, Parallelism::Rayon).unwrap();
        let b = assemble_operators(&mesh, &conn, &rwg, k, Parallelism::Sequential).unwrap();
        let ne = conn.num_edges;
        for j in 0..ne {
            for i in 0..ne {
                assert_eq!(a.ta[(i, j)], b.ta[(i, j)]);
                assert_eq!(a.tphi[(i, j)], b.tphi[(i, j)]);
                assert_eq!(a.k[(i, j)], b.k[(i, j)]);
            }
        }
    }

    #[test]
    fn wavenumber_branches() {
        let mat = MaterialParams { eps_r_prime: 2.0, sigma: 50.0, mu_r: 3.0 };
        let omega = 2.0 * std::f64::consts::PI * 1e5;
        let kw = Wavenumber::interior(omega, &mat);
        assert!(kw.k.im <= 0.0, "decaying branch");
        assert!(kw.eta.re >= 0.0, "passive impedance branch");
        // lossless: k real
        let kd = Wavenumber::interior(omega, &MaterialParams::dielectric(4.0));
        assert!(kd.k.im.abs() < 1e-15 * kd.k.re);
        assert!((kd.k.re - 2.0 * omega / C0).abs() < 1e-9 * kd.k.re);
        // strong conductor: k ≈ (1−j)/δ
        let mc = MaterialParams::conductor(1e7);
        let kc = Wavenumber::interior(omega, &mc);
        let delta = mc.skin_depth(omega);
        assert!((kc.k.re - 1.0 / delta).abs() < 1e-3 * kc.k.re);
        assert!((kc.k.im + 1.0 / delta).abs() < 1e-3 * kc.k.re);
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 4, ..ProptestConfig::default() })]

        #[test]
        fn rigid_motion_invariance(
            ux in -1.0f64..1.0,
            uy in -1.0f64..1.0,
            uz in 0.1f64..1.0,
            angle in 0.1f64..3.0,
            shift in -5.0f64..5.0,
        ) {
            let (mesh, conn, rwg) = sphere_fixture(0);
            let k = C64::new(0.5, -0.2);
            let base = assemble_operators(&mesh, &conn, &rwg, k, Parallelism::default()).unwrap();

            let axis = Vector3::new(ux, uy, uz).normalize();
            let (s, c) = angle.sin_cos();
            let rotate = |v: Vector3<f64>| -> Vector3<f64> {
                // Rodrigues rotation
                v * c + axis.cross(&v) * s + axis * (axis.dot(&v)) * (1.0 - c)
            };
            let t = Vector3::new(shift, -0.3 * shift, 0.7 + shift);
            let moved = TriangleMesh::from_raw(
                mesh.vertices().iter().map(|&v| rotate(v) + t).collect(),
                mesh.triangles().to_vec(),
            )
            .unwrap();
            let conn2 = build_connectivity(&moved);
            let rwg2 = RwgSpace::build(&moved, &conn2);
            let ops = assemble_operators(&moved, &conn2, &rwg2, k, Parallelism::default()).unwrap();

            for (a, b, name) in [
                (&base.ta, &ops.ta, "TA"),
                (&base.tphi, &ops.tphi, "TPhi"),
                (&base.k, &ops.k, "K"),
            ] {
                let rel = rel_fro_diff(a, b);
                prop_assert!(rel <= TOL_IDENTITY, "{} moved by {:e}", name, rel);
            }
        }
    }
}
