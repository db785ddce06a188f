//! Parametric triangle-mesh generators for the scatterer geometries used in
//! the solver's experiments and tests, plus OFF and Gmsh MSH v2 writers.
//!
//! Generators return raw `(vertices, triangles)` arrays wound consistently
//! (outward normals); the solver's mesh-validation pipeline re-checks and, if
//! necessary, repairs orientation on load, so these arrays carry no hidden
//! invariants beyond describing a closed surface.
//!
//! Geometries:
//! - [`icosphere`]: subdivided icosahedron, the standard near-uniform sphere
//!   triangulation (30·4ⁿ edges).
//! - [`torus_grid`]: structured grid on a ring torus, genus 1, the smallest
//!   geometry with a nontrivial harmonic (global-loop) subspace.
//! - [`capacitor_spool`]: two coaxial discs joined by a center stem — a
//!   parallel-plate capacitor with its feed, genus 0, revolved profile.
//! - [`rect_frame`]: square loop with rectangular cross-section, genus 1,
//!   the classic skin-effect specimen.

use std::io::Write as _;
use std::path::Path;

use nalgebra::Vector3;

/// Raw mesh arrays: vertex positions and triangle vertex indices.
pub type RawMesh = (Vec<Vector3<f64>>, Vec<[usize; 3]>);

/// Sphere of the given radius centered at the origin: icosahedron subdivided
/// `subdivisions` times with all vertices projected onto the sphere.
/// Edge count is 30·4^subdivisions (30, 120, 480, 1920, ...).
pub fn icosphere(subdivisions: u32, radius: f64) -> RawMesh {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vector3<f64>> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|&[x, y, z]| Vector3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let m = ((vertices[a] + vertices[b]) * 0.5).normalize();
                vertices.push(m);
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for &[a, b, c] in &triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        triangles = next;
    }

    for v in &mut vertices {
        *v *= radius;
    }
    (vertices, triangles)
}

/// Ring torus with major radius `r_major` (center of tube to axis) and minor
/// radius `r_minor` (tube radius), as a structured `n_major × n_minor` grid
/// of quads split into triangles. Genus 1; edge count 3·n_major·n_minor.
pub fn torus_grid(r_major: f64, r_minor: f64, n_major: usize, n_minor: usize) -> RawMesh {
    assert!(n_major >= 3 && n_minor >= 3, "need at least 3×3 grid");
    let mut vertices = Vec::with_capacity(n_major * n_minor);
    for i in 0..n_major {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / n_major as f64;
        for j in 0..n_minor {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n_minor as f64;
            let rho = r_major + r_minor * theta.cos();
            vertices.push(Vector3::new(
                rho * phi.cos(),
                rho * phi.sin(),
                r_minor * theta.sin(),
            ));
        }
    }
    let idx = |i: usize, j: usize| (i % n_major) * n_minor + (j % n_minor);
    let mut triangles = Vec::with_capacity(2 * n_major * n_minor);
    for i in 0..n_major {
        for j in 0..n_minor {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            // outward winding: increasing φ × increasing θ follows the
            // outward normal of the parametrization above
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    (vertices, triangles)
}

/// Parallel-plate capacitor with its feed stem: two coaxial discs of radius
/// `plate_radius` and thickness `plate_thickness`, inner faces separated by
/// `gap`, joined by a coaxial stem of radius `stem_radius`. Genus 0.
///
/// The surface is a revolved 7-segment profile; the inner plate faces use
/// geometric radial grading toward the stem, where the feed su­rface charge
/// concentrates. `n_angular` sectors around the axis.
pub fn capacitor_spool(
    plate_radius: f64,
    gap: f64,
    stem_radius: f64,
    plate_thickness: f64,
    n_angular: usize,
) -> RawMesh {
    assert!(stem_radius < plate_radius && gap > 0.0 && plate_thickness > 0.0);
    assert!(n_angular >= 8);

    // Profile in the (r, z) half-plane from the bottom pole to the top pole;
    // revolution closes it. r = 0 entries are poles (single vertices).
    let zb = -gap / 2.0 - plate_thickness; // bottom outer face
    let zi_b = -gap / 2.0; // bottom inner face
    let zi_t = gap / 2.0;
    let zt = gap / 2.0 + plate_thickness;

    // geometric grading from stem_radius to plate_radius (finer near stem)
    let graded = |n: usize| -> Vec<f64> {
        let ratio = (plate_radius / stem_radius).powf(1.0 / n as f64);
        (0..=n).map(|k| stem_radius * ratio.powi(k as i32)).collect()
    };
    let n_rad = ((plate_radius / stem_radius).ln() / 0.45).ceil() as usize;
    let radii = graded(n_rad.max(4));

    let mut profile: Vec<(f64, f64)> = Vec::new();
    // bottom outer face: axis → rim (uniform is fine; no field concentration)
    let n_face = radii.len();
    for k in 0..=n_face {
        profile.push((plate_radius * k as f64 / n_face as f64, zb));
    }
    // bottom rim
    profile.push((plate_radius, zi_b));
    // bottom inner face: rim → stem (graded)
    for r in radii.iter().rev().skip(1) {
        profile.push((*r, zi_b));
    }
    // stem wall
    let n_stem = (gap / (0.8 * stem_radius)).ceil().max(1.0) as usize;
    for k in 1..n_stem {
        profile.push((stem_radius, zi_b + gap * k as f64 / n_stem as f64));
    }
    // top inner face: stem → rim (graded)
    for r in &radii {
        profile.push((*r, zi_t));
    }
    // top rim
    profile.push((plate_radius, zt));
    // top outer face: rim → axis
    for k in 1..=n_face {
        profile.push((plate_radius * (n_face - k) as f64 / n_face as f64, zt));
    }

    revolve_profile(&profile, n_angular)
}

/// Revolve a profile polyline in the (r, z) half-plane around the z-axis.
/// Endpoints with r = 0 become poles. The profile must be traversed so the
/// enclosed solid lies to its left, which makes the revolved normals outward
/// (bottom → top along the outer boundary does this).
fn revolve_profile(profile: &[(f64, f64)], n_angular: usize) -> RawMesh {
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    // station -> either a pole vertex index or the first of n_angular ring indices
    enum Station {
        Pole(usize),
        Ring(usize),
    }
    let mut stations = Vec::with_capacity(profile.len());
    for &(r, z) in profile {
        if r == 0.0 {
            vertices.push(Vector3::new(0.0, 0.0, z));
            stations.push(Station::Pole(vertices.len() - 1));
        } else {
            let first = vertices.len();
            for s in 0..n_angular {
                let phi = 2.0 * std::f64::consts::PI * s as f64 / n_angular as f64;
                vertices.push(Vector3::new(r * phi.cos(), r * phi.sin(), z));
            }
            stations.push(Station::Ring(first));
        }
    }
    let mut triangles = Vec::new();
    for w in stations.windows(2) {
        match (&w[0], &w[1]) {
            (Station::Ring(a0), Station::Ring(b0)) => {
                for s in 0..n_angular {
                    let s1 = (s + 1) % n_angular;
                    let (a, a1, b, b1) = (a0 + s, a0 + s1, b0 + s, b0 + s1);
                    triangles.push([a, a1, b1]);
                    triangles.push([a, b1, b]);
                }
            }
            (Station::Pole(p), Station::Ring(b0)) => {
                for s in 0..n_angular {
                    let s1 = (s + 1) % n_angular;
                    triangles.push([*p, b0 + s1, b0 + s]);
                }
            }
            (Station::Ring(a0), Station::Pole(p)) => {
                for s in 0..n_angular {
                    let s1 = (s + 1) % n_angular;
                    triangles.push([a0 + s, a0 + s1, *p]);
                }
            }
            (Station::Pole(_), Station::Pole(_)) => {
                panic!("profile has two consecutive axis points");
            }
        }
    }
    (vertices, triangles)
}

/// Square loop (frame) with rectangular cross-section, swept around a square
/// centerline with mitered corners. Genus 1.
///
/// `outer_side` is the outer edge length of the frame, `bar_width` the
/// in-plane width of the bar, `bar_height` its height (z-extent).
/// `n_along` stations per straight side (≥ 1) between corner stations;
/// `n_width`/`n_height` subdivisions of the cross-section edges.
pub fn rect_frame(
    outer_side: f64,
    bar_width: f64,
    bar_height: f64,
    n_along: usize,
    n_width: usize,
    n_height: usize,
) -> RawMesh {
    assert!(bar_width * 2.0 < outer_side, "bars would overlap");
    assert!(n_along >= 1 && n_width >= 1 && n_height >= 1);
    let half = (outer_side - bar_width) / 2.0; // centerline half-side

    // cross-section perimeter nodes (u across width, v across height),
    // counterclockwise in the (u, v) plane starting at (-w/2, -h/2)
    let (w2, h2) = (bar_width / 2.0, bar_height / 2.0);
    let mut ring: Vec<(f64, f64)> = Vec::new();
    for k in 0..n_width {
        ring.push((-w2 + bar_width * k as f64 / n_width as f64, -h2));
    }
    for k in 0..n_height {
        ring.push((w2, -h2 + bar_height * k as f64 / n_height as f64));
    }
    for k in 0..n_width {
        ring.push((w2 - bar_width * k as f64 / n_width as f64, h2));
    }
    for k in 0..n_height {
        ring.push((-w2, h2 - bar_height * k as f64 / n_height as f64));
    }
    let n_ring = ring.len();

    // centerline corners, counterclockwise in the xy-plane
    let corners = [
        Vector3::new(half, -half, 0.0),
        Vector3::new(half, half, 0.0),
        Vector3::new(-half, half, 0.0),
        Vector3::new(-half, -half, 0.0),
    ];

    // stations: at each corner, the cross-section lies in the miter plane
    // (the corner's angle bisector) stretched by √2 in-plane; between
    // corners it is perpendicular to the side
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut station_first: Vec<usize> = Vec::new();
    for side in 0..4 {
        let p0 = corners[side];
        let p1 = corners[(side + 1) % 4];
        let tangent = (p1 - p0).normalize();
        // outward in-plane normal for a counterclockwise path
        let normal = Vector3::new(tangent.y, -tangent.x, 0.0);
        // corner station at p0: miter direction bisects this side's normal
        // and the previous side's normal, stretched to keep the bar width
        let prev_tangent = (p0 - corners[(side + 3) % 4]).normalize();
        let prev_normal = Vector3::new(prev_tangent.y, -prev_tangent.x, 0.0);
        let miter = (normal + prev_normal).normalize() * std::f64::consts::SQRT_2;
        station_first.push(vertices.len());
        for &(u, v) in &ring {
            vertices.push(p0 + miter * u + Vector3::new(0.0, 0.0, v));
        }
        for k in 1..=n_along {
            let p = p0 + (p1 - p0) * (k as f64 / (n_along + 1) as f64);
            station_first.push(vertices.len());
            for &(u, v) in &ring {
                vertices.push(p + normal * u + Vector3::new(0.0, 0.0, v));
            }
        }
    }
    let n_stations = station_first.len();

    let mut triangles = Vec::new();
    for s in 0..n_stations {
        let a0 = station_first[s];
        let b0 = station_first[(s + 1) % n_stations];
        for r in 0..n_ring {
            let r1 = (r + 1) % n_ring;
            let (a, a1, b, b1) = (a0 + r, a0 + r1, b0 + r, b0 + r1);
            // winding chosen so normals point out of the bar: the ring is
            // counterclockwise seen against the sweep direction
            triangles.push([a, b1, a1]);
            triangles.push([a, b, b1]);
        }
    }
    (vertices, triangles)
}

/// Write a mesh in OFF format.
pub fn write_off(path: impl AsRef<Path>, mesh: &RawMesh) -> std::io::Result<()> {
    let (vertices, triangles) = mesh;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "OFF")?;
    writeln!(f, "{} {} 0", vertices.len(), triangles.len())?;
    for v in vertices {
        writeln!(f, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
    }
    for t in triangles {
        writeln!(f, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    f.flush()
}

/// Write a mesh in Gmsh MSH v2 ASCII format (3-node triangles, 1-based ids).
pub fn write_msh2(path: impl AsRef<Path>, mesh: &RawMesh) -> std::io::Result<()> {
    let (vertices, triangles) = mesh;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "$MeshFormat\n2.2 0 8\n$EndMeshFormat")?;
    writeln!(f, "$Nodes\n{}", vertices.len())?;
    for (i, v) in vertices.iter().enumerate() {
        writeln!(f, "{} {:.17e} {:.17e} {:.17e}", i + 1, v.x, v.y, v.z)?;
    }
    writeln!(f, "$EndNodes")?;
    writeln!(f, "$Elements\n{}", triangles.len())?;
    for (i, t) in triangles.iter().enumerate() {
        writeln!(
            f,
            "{} 2 2 0 1 {} {} {}",
            i + 1,
            t[0] + 1,
            t[1] + 1,
            t[2] + 1
        )?;
    }
    writeln!(f, "$EndElements")?;
    f.flush()
}
