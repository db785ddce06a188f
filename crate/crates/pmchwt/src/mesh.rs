//! Closed triangle meshes: loading, validation, orientation repair,
//! edge connectivity, genus, and barycentric refinement.
//!
//! Every surface accepted by this module is a single closed orientable
//! 2-manifold with consistently outward-pointing triangle normals. The
//! guarantees established here are load-bearing for everything downstream:
//! RWG functions need exactly two triangles per edge, the loop/star
//! incidence matrices need a globally consistent orientation to make their
//! exact integer identities hold, and the genus (from the Euler formula)
//! decides the dimension of the harmonic subspace that the quasi-Helmholtz
//! projectors must capture.

use std::collections::VecDeque;
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use crate::constants::DEGENERATE_AREA_FRACTION;

/// Supported mesh file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    /// Gmsh MSH version 2 ASCII (`$MeshFormat` 2.x). Only 3-node triangle
    /// elements are accepted; points and lines are skipped; quads and
    /// higher-order elements are rejected.
    GmshMshAscii,
    /// Object File Format: `OFF` header, vertex lines, triangle face lines.
    Off,
}

/// Errors from mesh loading and validation.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("could not read mesh file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported element: {0}")]
    UnsupportedElement(String),
    #[error("open surface: edge ({a}, {b}) belongs to {count} triangle(s), need exactly 2")]
    OpenSurface { a: usize, b: usize, count: usize },
    #[error("non-orientable surface: triangles {t0} and {t1} cannot be consistently oriented")]
    NonOrientable { t0: usize, t1: usize },
    #[error("mesh has {0} connected components; exactly one closed body is supported")]
    MultiComponent(usize),
    #[error("degenerate triangle {index}: area {area:.3e} below {threshold:.3e}")]
    Degenerate {
        index: usize,
        area: f64,
        threshold: f64,
    },
    #[error("triangle {tri} references vertex {vertex}, but only {count} vertices exist")]
    IndexOutOfRange {
        tri: usize,
        vertex: usize,
        count: usize,
    },
    #[error("mesh is too small: {0}")]
    TooSmall(String),
}

/// A validated closed triangle mesh with consistent outward orientation.
///
/// `characteristic_length` is the diameter of the axis-aligned bounding box;
/// it is the length `L` entering the dimensionless regime coordinates, and
/// any fixed convention works because those coordinates enter the analysis
/// monotonically.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[usize; 3]>,
    characteristic_length: f64,
}

impl TriangleMesh {
    /// Build and validate a mesh from raw arrays.
    ///
    /// Validation enforces: index bounds, every edge shared by exactly two
    /// triangles, a single connected component, orientability, no degenerate
    /// triangles. Orientation is repaired, not just checked: a flood fill
    /// from the triangle with the largest +z-facing area makes adjacent
    /// triangles traverse shared edges oppositely, and the whole mesh is
    /// flipped afterwards if its signed volume is negative, so the final
    /// normals point outward.
    pub fn from_raw(
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        if vertices.len() < 4 || triangles.len() < 4 {
            return Err(MeshError::TooSmall(format!(
                "{} vertices, {} triangles",
                vertices.len(),
                triangles.len()
            )));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        tri: t,
                        vertex: v,
                        count: vertices.len(),
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[2] == tri[0] {
                return Err(MeshError::Degenerate {
                    index: t,
                    area: 0.0,
                    threshold: 0.0,
                });
            }
        }

        let mut triangles = triangles;

        // edge map on unordered vertex pairs
        let edge_key = |a: usize, b: usize| (a.min(b), a.max(b));
        let mut edge_map: std::collections::HashMap<(usize, usize), Vec<usize>> =
            std::collections::HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for e in 0..3 {
                let key = edge_key(tri[e], tri[(e + 1) % 3]);
                edge_map.entry(key).or_default().push(t);
            }
        }
        for (&(a, b), tris) in &edge_map {
            if tris.len() != 2 {
                return Err(MeshError::OpenSurface {
                    a,
                    b,
                    count: tris.len(),
                });
            }
        }

        // connectivity across shared edges
        let neighbors: Vec<Vec<usize>> = {
            let mut nb = vec![Vec::new(); triangles.len()];
            for tris in edge_map.values() {
                nb[tris[0]].push(tris[1]);
                nb[tris[1]].push(tris[0]);
            }
            nb
        };
        {
            let mut seen = vec![false; triangles.len()];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            let mut reached = 1usize;
            while let Some(t) = queue.pop_front() {
                for &u in &neighbors[t] {
                    if !seen[u] {
                        seen[u] = true;
                        reached += 1;
                        queue.push_back(u);
                    }
                }
            }
            if reached != triangles.len() {
                // count components for the error message
                let mut comp = 1usize;
                let mut seen2 = seen;
                for start in 0..triangles.len() {
                    if !seen2[start] {
                        comp += 1;
                        let mut q = VecDeque::from([start]);
                        seen2[start] = true;
                        while let Some(t) = q.pop_front() {
                            for &u in &neighbors[t] {
                                if !seen2[u] {
                                    seen2[u] = true;
                                    q.push_back(u);
                                }
                            }
                        }
                    }
                }
                return Err(MeshError::MultiComponent(comp));
            }
        }

        // orientation flood fill, seeded at the triangle with the largest
        // +z-facing area (a deterministic convention; the subsequent signed
        // volume check fixes inward/outward globally)
        let seed = {
            let mut best = 0usize;
            let mut best_z = f64::NEG_INFINITY;
            for (t, tri) in triangles.iter().enumerate() {
                let cross = (vertices[tri[1]] - vertices[tri[0]])
                    .cross(&(vertices[tri[2]] - vertices[tri[0]]));
                if cross.z > best_z {
                    best_z = cross.z;
                    best = t;
                }
            }
            best
        };
        {
            // directed-edge set of each triangle under its current winding
            let directed = |tri: &[usize; 3]| [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])];
            let mut state = vec![0u8; triangles.len()]; // 0 unvisited, 1 keep, 2 flipped
            let mut queue = VecDeque::from([seed]);
            state[seed] = 1;
            while let Some(t) = queue.pop_front() {
                let t_edges = directed(&triangles[t]);
                for &u in &neighbors[t] {
                    // find the shared undirected edge and compare traversal
                    let u_edges = directed(&triangles[u]);
                    let mut same_direction = false;
                    let mut shares = false;
                    for &(a, b) in &t_edges {
                        for &(c, d) in &u_edges {
                            if (a, b) == (c, d) {
                                shares = true;
                                same_direction = true;
                            } else if (a, b) == (d, c) {
                                shares = true;
                            }
                        }
                    }
                    debug_assert!(shares, "neighbor without shared edge");
                    // consistent orientation ⇔ opposite traversal
                    if state[u] == 0 {
                        if same_direction {
                            triangles[u].swap(1, 2);
                            state[u] = 2;
                        } else {
                            state[u] = 1;
                        }
                        queue.push_back(u);
                    } else if same_direction {
                        return Err(MeshError::NonOrientable { t0: t, t1: u });
                    }
                }
            }
        }

        // outward = positive signed volume (divergence theorem on x/3·n̂)
        let signed_volume = |verts: &[Vector3<f64>], tris: &[[usize; 3]]| -> f64 {
            tris.iter()
                .map(|t| verts[t[0]].dot(&verts[t[1]].cross(&verts[t[2]])) / 6.0)
                .sum()
        };
        if signed_volume(&vertices, &triangles) < 0.0 {
            for tri in triangles.iter_mut() {
                tri.swap(1, 2);
            }
        }

        // characteristic length and degeneracy threshold
        let (mut lo, mut hi) = (vertices[0], vertices[0]);
        for v in &vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        let characteristic_length = (hi - lo).norm();
        if characteristic_length == 0.0 {
            return Err(MeshError::TooSmall("all vertices coincide".into()));
        }
        let threshold = DEGENERATE_AREA_FRACTION * characteristic_length * characteristic_length;
        for (t, tri) in triangles.iter().enumerate() {
            let area = 0.5
                * (vertices[tri[1]] - vertices[tri[0]])
                    .cross(&(vertices[tri[2]] - vertices[tri[0]]))
                    .norm();
            if area <= threshold {
                return Err(MeshError::Degenerate {
                    index: t,
                    area,
                    threshold,
                });
            }
        }

        Ok(TriangleMesh {
            vertices,
            triangles,
            characteristic_length,
        })
    }

    /// Load a mesh from a file in the given format and validate it.
    pub fn load(path: impl AsRef<Path>, format: MeshFormat) -> Result<Self, MeshError> {
        let text = std::fs::read_to_string(path)?;
        let (vertices, triangles) = match format {
            MeshFormat::Off => parse_off(&text)?,
            MeshFormat::GmshMshAscii => parse_msh(&text)?,
        };
        Self::from_raw(vertices, triangles)
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Bounding-box diameter, the length scale `L` of the body.
    pub fn characteristic_length(&self) -> f64 {
        self.characteristic_length
    }

    /// The three corner points of a triangle.
    pub fn triangle_points(&self, t: usize) -> [Vector3<f64>; 3] {
        let tri = self.triangles[t];
        [
            self.vertices[tri[0]],
            self.vertices[tri[1]],
            self.vertices[tri[2]],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let p = self.triangle_points(t);
        0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm()
    }

    /// Outward unit normal of a triangle.
    pub fn triangle_normal(&self, t: usize) -> Vector3<f64> {
        let p = self.triangle_points(t);
        let c = (p[1] - p[0]).cross(&(p[2] - p[0]));
        c / c.norm()
    }

    pub fn triangle_centroid(&self, t: usize) -> Vector3<f64> {
        let p = self.triangle_points(t);
        (p[0] + p[1] + p[2]) / 3.0
    }

    /// Enclosed volume (positive by the outward-orientation invariant).
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                self.vertices[t[0]]
                    .dot(&self.vertices[t[1]].cross(&self.vertices[t[2]]))
                    / 6.0
            })
            .sum()
    }

    /// Average edge length (the mesh parameter h).
    pub fn average_edge_length(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for tri in &self.triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                if a < b {
                    sum += (self.vertices[a] - self.vertices[b]).norm();
                    count += 1;
                }
            }
        }
        sum / count as f64
    }
}

/// Per-edge plus/minus triangle assignment.
#[derive(Debug, Clone, Copy)]
pub struct EdgeTriangles {
    /// Triangle traversing the edge in canonical (low → high index) order.
    pub plus: usize,
    /// Triangle traversing it in the opposite order.
    pub minus: usize,
}

/// Edge list, incidence, and genus of a validated mesh.
///
/// Edges are canonically oriented from the lower to the higher vertex index;
/// the triangle traversing an edge in canonical order under its outward
/// winding is that edge's *plus* triangle. This single convention fixes all
/// RWG and incidence-matrix signs in the crate.
#[derive(Debug, Clone)]
pub struct MeshConnectivity {
    /// Canonical edges `[lo, hi]`, sorted lexicographically.
    pub edges: Vec<[usize; 2]>,
    /// Plus/minus triangle of each edge.
    pub edge_triangles: Vec<EdgeTriangles>,
    /// For each triangle, its three edges with `true` if the triangle is
    /// the plus side (traverses the edge canonically).
    pub triangle_edges: Vec<[(usize, bool); 3]>,
    pub num_vertices: usize,
    pub num_edges: usize,
    pub num_triangles: usize,
    /// Genus from the Euler formula `V − E + F = 2 − 2g`.
    pub genus: usize,
}

/// Build edge connectivity and genus. Infallible on a validated mesh.
pub fn build_connectivity(mesh: &TriangleMesh) -> MeshConnectivity {
    let mut edge_index: std::collections::HashMap<(usize, usize), usize> =
        std::collections::HashMap::new();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    for tri in mesh.triangles() {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let key = (a.min(b), a.max(b));
            edge_index.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                edges.len() - 1
            });
        }
    }
    // canonical deterministic order
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&i| edges[i]);
    let mut rank = vec![0usize; edges.len()];
    for (new_rank, &old) in order.iter().enumerate() {
        rank[old] = new_rank;
    }
    let mut sorted_edges = vec![[0usize; 2]; edges.len()];
    for (old, &[a, b]) in edges.iter().enumerate() {
        sorted_edges[rank[old]] = [a, b];
    }
    for v in edge_index.values_mut() {
        *v = rank[*v];
    }

    let mut plus = vec![usize::MAX; sorted_edges.len()];
    let mut minus = vec![usize::MAX; sorted_edges.len()];
    let mut triangle_edges = vec![[(0usize, false); 3]; mesh.num_triangles()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let idx = edge_index[&(a.min(b), a.max(b))];
            let canonical = a < b;
            triangle_edges[t][e] = (idx, canonical);
            if canonical {
                debug_assert_eq!(plus[idx], usize::MAX, "two plus triangles on edge {idx}");
                plus[idx] = t;
            } else {
                debug_assert_eq!(minus[idx], usize::MAX, "two minus triangles on edge {idx}");
                minus[idx] = t;
            }
        }
    }
    let edge_triangles: Vec<EdgeTriangles> = plus
        .into_iter()
        .zip(minus)
        .map(|(p, m)| {
            debug_assert!(p != usize::MAX && m != usize::MAX);
            EdgeTriangles { plus: p, minus: m }
        })
        .collect();

    let num_vertices = mesh.num_vertices();
    let num_edges = sorted_edges.len();
    let num_triangles = mesh.num_triangles();
    let euler = num_vertices as i64 - num_edges as i64 + num_triangles as i64;
    debug_assert!(euler <= 2 && euler % 2 == 0, "Euler characteristic {euler}");
    let genus = ((2 - euler) / 2) as usize;

    MeshConnectivity {
        edges: sorted_edges,
        edge_triangles,
        triangle_edges,
        num_vertices,
        num_edges,
        num_triangles,
        genus,
    }
}

/// Where a refined vertex comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexOrigin {
    /// Coincides with parent vertex `i`.
    ParentVertex(usize),
    /// Midpoint of parent edge `i`.
    EdgeMidpoint(usize),
    /// Centroid of parent triangle `i`.
    FaceCenter(usize),
}

/// Barycentric refinement: each parent triangle is split into 6 children by
/// its centroid and edge midpoints. Needed to host the dual (BC) functions.
#[derive(Debug, Clone)]
pub struct BarycentricRefinement {
    /// The refined mesh (validated; orientation matches the parent).
    pub mesh: TriangleMesh,
    /// Child triangle → parent triangle.
    pub parent_triangle: Vec<usize>,
    /// Refined vertex → origin in the parent mesh.
    pub vertex_origin: Vec<VertexOrigin>,
    /// Parent edge → refined vertex at its midpoint.
    pub edge_midpoint_vertex: Vec<usize>,
    /// Parent triangle → refined vertex at its centroid.
    pub face_center_vertex: Vec<usize>,
}

/// Construct the 6-way barycentric refinement. Children are wound like their
/// parent, so orientation is inherited rather than re-derived.
pub fn barycentric_refine(mesh: &TriangleMesh, conn: &MeshConnectivity) -> BarycentricRefinement {
    let nv = mesh.num_vertices();
    let ne = conn.num_edges;
    let nf = mesh.num_triangles();

    let mut vertices = Vec::with_capacity(nv + ne + nf);
    let mut vertex_origin = Vec::with_capacity(nv + ne + nf);
    vertices.extend_from_slice(mesh.vertices());
    vertex_origin.extend((0..nv).map(VertexOrigin::ParentVertex));
    let edge_midpoint_vertex: Vec<usize> = (0..ne)
        .map(|e| {
            let [a, b] = conn.edges[e];
            vertices.push((mesh.vertices()[a] + mesh.vertices()[b]) * 0.5);
            vertex_origin.push(VertexOrigin::EdgeMidpoint(e));
            nv + e
        })
        .collect();
    let face_center_vertex: Vec<usize> = (0..nf)
        .map(|f| {
            vertices.push(mesh.triangle_centroid(f));
            vertex_origin.push(VertexOrigin::FaceCenter(f));
            nv + ne + f
        })
        .collect();

    let mut triangles = Vec::with_capacity(6 * nf);
    let mut parent_triangle = Vec::with_capacity(6 * nf);
    for (f, tri) in mesh.triangles().iter().enumerate() {
        let center = face_center_vertex[f];
        for e in 0..3 {
            let a = tri[e];
            let b = tri[(e + 1) % 3];
            let (edge_idx, _) = conn.triangle_edges[f][e];
            let mid = edge_midpoint_vertex[edge_idx];
            // two children per parent edge, both wound like the parent
            triangles.push([a, mid, center]);
            triangles.push([mid, b, center]);
            parent_triangle.push(f);
            parent_triangle.push(f);
        }
    }

    let refined =
        TriangleMesh::from_raw(vertices, triangles).expect("barycentric refinement must validate");
    BarycentricRefinement {
        mesh: refined,
        parent_triangle,
        vertex_origin,
        edge_midpoint_vertex,
        face_center_vertex,
    }
}

// ---------------------------------------------------------------------------
// file format parsers
// ---------------------------------------------------------------------------

type RawMesh = (Vec<Vector3<f64>>, Vec<[usize; 3]>);

fn parse_off(text: &str) -> Result<RawMesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, header) = lines.next().ok_or(MeshError::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    if header != "OFF" {
        return Err(MeshError::Parse {
            line,
            message: format!("expected OFF header, found {header:?}"),
        });
    }
    let (line, counts) = lines.next().ok_or(MeshError::Parse {
        line,
        message: "missing count line".into(),
    })?;
    let mut it = counts.split_whitespace();
    let nv: usize = parse_field(it.next(), line, "vertex count")?;
    let nf: usize = parse_field(it.next(), line, "face count")?;
    let _ne: usize = parse_field(it.next(), line, "edge count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = lines.next().ok_or(MeshError::Parse {
            line: 0,
            message: "unexpected end of file in vertex block".into(),
        })?;
        let mut it = l.split_whitespace();
        let x: f64 = parse_field(it.next(), line, "x")?;
        let y: f64 = parse_field(it.next(), line, "y")?;
        let z: f64 = parse_field(it.next(), line, "z")?;
        vertices.push(Vector3::new(x, y, z));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, l) = lines.next().ok_or(MeshError::Parse {
            line: 0,
            message: "unexpected end of file in face block".into(),
        })?;
        let mut it = l.split_whitespace();
        let k: usize = parse_field(it.next(), line, "face vertex count")?;
        if k != 3 {
            return Err(MeshError::UnsupportedElement(format!(
                "face with {k} vertices at line {line}; only triangles are supported"
            )));
        }
        let a: usize = parse_field(it.next(), line, "face index")?;
        let b: usize = parse_field(it.next(), line, "face index")?;
        let c: usize = parse_field(it.next(), line, "face index")?;
        triangles.push([a, b, c]);
    }
    Ok((vertices, triangles))
}

fn parse_field<T: std::str::FromStr>(
    field: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, MeshError> {
    field
        .ok_or_else(|| MeshError::Parse {
            line,
            message: format!("missing {what}"),
        })?
        .parse()
        .map_err(|_| MeshError::Parse {
            line,
            message: format!("invalid {what}"),
        })
}

fn parse_msh(text: &str) -> Result<RawMesh, MeshError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .collect();
    let mut i = 0usize;
    let mut id_to_index: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut saw_nodes = false;
    let mut saw_elements = false;

    while i < lines.len() {
        let (line, l) = lines[i];
        match l {
            "$MeshFormat" => {
                let (line2, fmt) = *lines.get(i + 1).ok_or(MeshError::Parse {
                    line,
                    message: "truncated $MeshFormat".into(),
                })?;
                let version = fmt.split_whitespace().next().unwrap_or("");
                if !version.starts_with("2.") {
                    return Err(MeshError::Parse {
                        line: line2,
                        message: format!("unsupported MSH version {version:?}; need 2.x ASCII"),
                    });
                }
                let is_ascii = fmt.split_whitespace().nth(1) == Some("0");
                if !is_ascii {
                    return Err(MeshError::Parse {
                        line: line2,
                        message: "binary MSH is not supported".into(),
                    });
                }
                i += 1;
            }
            "$Nodes" => {
                saw_nodes = true;
                let (line2, cnt) = *lines.get(i + 1).ok_or(MeshError::Parse {
                    line,
                    message: "truncated $Nodes".into(),
                })?;
                let n: usize = parse_field(Some(cnt), line2, "node count")?;
                for j in 0..n {
                    let (line3, l3) = *lines.get(i + 2 + j).ok_or(MeshError::Parse {
                        line: line2,
                        message: "truncated node block".into(),
                    })?;
                    let mut it = l3.split_whitespace();
                    let id: u64 = parse_field(it.next(), line3, "node id")?;
                    let x: f64 = parse_field(it.next(), line3, "x")?;
                    let y: f64 = parse_field(it.next(), line3, "y")?;
                    let z: f64 = parse_field(it.next(), line3, "z")?;
                    id_to_index.insert(id, vertices.len());
                    vertices.push(Vector3::new(x, y, z));
                }
                i += 1 + n;
            }
            "$Elements" => {
                saw_elements = true;
                let (line2, cnt) = *lines.get(i + 1).ok_or(MeshError::Parse {
                    line,
                    message: "truncated $Elements".into(),
                })?;
                let n: usize = parse_field(Some(cnt), line2, "element count")?;
                for j in 0..n {
                    let (line3, l3) = *lines.get(i + 2 + j).ok_or(MeshError::Parse {
                        line: line2,
                        message: "truncated element block".into(),
                    })?;
                    let fields: Vec<&str> = l3.split_whitespace().collect();
                    if fields.len() < 3 {
                        return Err(MeshError::Parse {
                            line: line3,
                            message: "short element line".into(),
                        });
                    }
                    let etype: u32 = parse_field(Some(fields[1]), line3, "element type")?;
                    let ntags: usize = parse_field(Some(fields[2]), line3, "tag count")?;
                    match etype {
                        2 => {
                            let need = 3 + ntags + 3;
                            if fields.len() < need {
                                return Err(MeshError::Parse {
                                    line: line3,
                                    message: "triangle element with missing nodes".into(),
                                });
                            }
                            let mut idx = [0usize; 3];
                            for (slot, f) in idx.iter_mut().zip(&fields[3 + ntags..need]) {
                                let id: u64 = parse_field(Some(f), line3, "node reference")?;
                                *slot = *id_to_index.get(&id).ok_or(MeshError::Parse {
                                    line: line3,
                                    message: format!("element references unknown node {id}"),
                                })?;
                            }
                            triangles.push(idx);
                        }
                        // points and lines are harmless artifacts of CAD
                        // exports; skip them
                        15 | 1 => {}
                        3 => {
                            return Err(MeshError::UnsupportedElement(format!(
                                "quadrangle element at line {line3}; only 3-node triangles are supported"
                            )))
                        }
                        other => {
                            return Err(MeshError::UnsupportedElement(format!(
                                "element type {other} at line {line3}; only 3-node triangles are supported"
                            )))
                        }
                    }
                }
                i += 1 + n;
            }
            _ => {}
        }
        i += 1;
    }
    if !saw_nodes || !saw_elements {
        return Err(MeshError::Parse {
            line: 0,
            message: "missing $Nodes or $Elements section".into(),
        });
    }
    Ok((vertices, triangles))
}
