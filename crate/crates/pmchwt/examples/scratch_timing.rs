use pmchwt::basis::RwgSpace;
use pmchwt::mesh::{build_connectivity, TriangleMesh};
use pmchwt::operators::assemble_operators;
use pmchwt::{C64, Parallelism};
use std::time::Instant;

fn main() {
    let (v, t) = meshgen::icosphere(1, 1.0);
    let mesh = TriangleMesh::from_raw(v, t).unwrap();
    let conn = build_connectivity(&mesh);
    let rwg = RwgSpace::build(&mesh, &conn);
    for (name, k) in [
        ("static", C64::new(0.0, 0.0)),
        ("lossy 6-6j", C64::new(6.0, -6.0)),
        ("skin 16-16j", C64::new(16.0, -16.0)),
    ] {
        let t0 = Instant::now();
        let ops = assemble_operators(&mesh, &conn, &rwg, k, Parallelism::Sequential).unwrap();
        println!(
            "{name}: {:.2?}  depth_limited={} worst={:.2e} screened={}",
            t0.elapsed(),
            ops.stats.depth_limited_pairs,
            ops.stats.worst_depth_limited_rel,
            ops.stats.screened_pairs
        );
    }
}
