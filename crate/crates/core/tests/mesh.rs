use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_3, PI};

use dmp_core::generators::{defect_mesh, gk_patch, rhombus_mesh, three_line_mesh, Cut, DefectSpec, RhombusConvention, RhombusSpec};
use dmp_core::io::{mesh_from_json, mesh_to_json};
use dmp_core::mesh::{
    boundary_adjacent_to_interior, classify_boundary, covers_interior, extract_subdomain, interior_graph_connected, ring, star,
    MeshError, TriMesh,
};
use dmp_core::Mesh;

/// Boundary vertices by counting, for each edge, the triangles containing both endpoints.
fn boundary_by_counting(mesh: &Mesh) -> Vec<bool> {
    let mut out = vec![false; mesh.num_vertices()];
    for tri in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let count = mesh.triangles().iter().filter(|t| t.contains(&a) && t.contains(&b)).count();
            if count == 1 {
                out[a] = true;
                out[b] = true;
            }
        }
    }
    out
}

#[test]
fn three_line_interior_counts() {
    for (n, expected) in [(2, 1), (5, 16), (7, 36)] {
        let m = three_line_mesh::<f64>(n).unwrap();
        let p = classify_boundary(&m);
        assert_eq!(p.interior.len(), expected);
        assert_eq!(p.is_boundary, boundary_by_counting(&m));
    }
    let m = three_line_mesh::<f64>(2).unwrap();
    assert_eq!(classify_boundary(&m).interior, vec![4]);
}

#[test]
fn gk_interior_counts() {
    for k in 1..=4 {
        for theta in [0.3 * PI, FRAC_PI_3, 0.5 * PI] {
            let m = gk_patch::<f64>(k, theta).unwrap();
            let p = classify_boundary(&m);
            assert_eq!(p.interior.len(), (k + 1) * (k + 1));
            assert_eq!(p.is_boundary, boundary_by_counting(&m));
            assert!(interior_graph_connected(&m, &p));
        }
    }
}

#[test]
fn two_squares_touching_at_a_vertex_are_disconnected() {
    let a = three_line_mesh::<f64>(2).unwrap();
    let mut vertices = a.vertices().to_vec();
    let mut triangles = a.triangles().to_vec();
    let shared = 8; // (1, 1)
    let mut map = Vec::new();
    for (k, v) in a.vertices().iter().enumerate() {
        if k == 0 {
            map.push(shared);
        } else {
            map.push(vertices.len());
            vertices.push([v[0] + 1.0, v[1] + 1.0]);
        }
    }
    triangles.extend(a.triangles().iter().map(|t| t.map(|v| map[v])));
    let joined = TriMesh::new(vertices, triangles).unwrap();
    let p = classify_boundary(&joined);
    assert_eq!(p.interior.len(), 2);
    assert!(!interior_graph_connected(&joined, &p));
}

#[test]
fn isolated_boundary_vertices() {
    let sheared = RhombusSpec::uniform(2.0 * PI / 3.0, 5, Cut::Short, RhombusConvention::Sheared);
    let m = rhombus_mesh(&sheared).unwrap();
    assert_eq!(boundary_adjacent_to_interior(&m, &classify_boundary(&m)), vec![5, 30]);
    assert!(boundary_adjacent_to_interior(&rhombus_mesh(&sheared.clone().trimmed()).unwrap(), &classify_boundary(&rhombus_mesh(&sheared.trimmed()).unwrap())).is_empty());

    // single-triangle corners (0,0) and (1,1) of the three-line mesh
    let t = three_line_mesh::<f64>(5).unwrap();
    assert_eq!(boundary_adjacent_to_interior(&t, &classify_boundary(&t)), vec![0, 35]);
    assert_eq!(t.vertex(35), [1.0, 1.0]);

    let centered = RhombusSpec::uniform(FRAC_PI_3, 6, Cut::Short, RhombusConvention::Centered);
    let c = rhombus_mesh(&centered).unwrap();
    assert_eq!(boundary_adjacent_to_interior(&c, &classify_boundary(&c)).len(), 2);
    let ct = rhombus_mesh(&centered.trimmed()).unwrap();
    assert!(boundary_adjacent_to_interior(&ct, &classify_boundary(&ct)).is_empty());
}

#[test]
fn star_sizes() {
    let t = three_line_mesh::<f64>(4).unwrap();
    for v in classify_boundary(&t).interior {
        assert_eq!(star(&t, v).unwrap().mesh.num_triangles(), 6);
    }
    let r = rhombus_mesh(&RhombusSpec::uniform(FRAC_PI_3, 5, Cut::Short, RhombusConvention::Centered)).unwrap();
    for v in classify_boundary(&r).interior {
        let s = star(&r, v).unwrap();
        assert_eq!(s.mesh.num_triangles(), 6);
        assert_eq!(s.interior_parent(), vec![v]);
    }
    // G_1: the two ends of the long diagonal see 7 triangles, the other two see 5
    let g = gk_patch::<f64>(1, FRAC_PI_3).unwrap();
    let sizes: BTreeMap<usize, usize> = classify_boundary(&g).interior.iter().map(|&v| (v, star(&g, v).unwrap().mesh.num_triangles())).collect();
    let mut counts: Vec<usize> = sizes.values().copied().collect();
    counts.sort_unstable();
    assert_eq!(counts, vec![5, 5, 7, 7]);
}

#[test]
fn embedded_blocks_are_copies_of_gk() {
    let spec = DefectSpec::four_g1();
    let d = defect_mesh(&spec).unwrap();
    let reference = gk_patch::<f64>(1, spec.theta).unwrap();
    let scale = 3.0 / spec.n as f64;
    let key = |p: [f64; 2]| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
    let tri_set = |m: &Mesh, f: &dyn Fn([f64; 2]) -> [f64; 2]| {
        let mut s: Vec<Vec<(i64, i64)>> = m
            .triangles()
            .iter()
            .map(|t| {
                let mut v: Vec<(i64, i64)> = t.iter().map(|&i| key(f(m.vertex(i)))).collect();
                v.sort_unstable();
                v
            })
            .collect();
        s.sort();
        s
    };
    let expected = tri_set(&reference, &|p| p);
    for patch in d.block_patches().unwrap() {
        // translate so the leftmost vertex sits where G_1's leftmost does, then rescale
        let left = |m: &Mesh| m.vertices().iter().copied().fold([f64::INFINITY, 0.0], |a, v| if v[0] < a[0] { v } else { a });
        let (lp, lr) = (left(&patch.mesh), left(&reference));
        let map = |p: [f64; 2]| [(p[0] - lp[0]) / scale + lr[0], (p[1] - lp[1]) / scale + lr[1]];
        assert_eq!(tri_set(&patch.mesh, &map), expected);
        assert_eq!(patch.partition.interior.len(), 4);
    }
}

#[test]
fn cover_completeness() {
    let t = three_line_mesh::<f64>(4).unwrap();
    let p = classify_boundary(&t);
    let stars: Vec<_> = p.interior.iter().map(|&v| star(&t, v).unwrap()).collect();
    assert!(covers_interior(&t, &p, &stars).is_empty());
    let missing = p.interior[3];
    let partial: Vec<_> = stars.iter().filter(|s| s.interior_parent() != vec![missing]).cloned().collect();
    assert_eq!(covers_interior(&t, &p, &partial), vec![missing]);
    let r2 = ring(&t, p.interior[4], 2).unwrap();
    assert!(r2.interior_parent().len() > 1);
    assert!(r2.interior_parent().contains(&p.interior[4]));
}

#[test]
fn construction_errors() {
    let sq = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
    assert_eq!(TriMesh::<f64>::new(sq.clone(), vec![]).unwrap_err(), MeshError::Empty);
    assert!(matches!(TriMesh::new(sq.clone(), vec![[0, 1, 4]]), Err(MeshError::VertexIndexOutOfRange { vertex: 4, .. })));
    assert_eq!(TriMesh::new(sq.clone(), vec![[0, 1, 1], [1, 3, 2]]).unwrap_err(), MeshError::RepeatedVertex(0));
    assert_eq!(TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![[0, 1, 2]]).unwrap_err(), MeshError::DegenerateTriangle(0));
    assert_eq!(TriMesh::new(sq.clone(), vec![[0, 1, 2]]).unwrap_err(), MeshError::UnusedVertex(3));
    let dup = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1e-14]];
    assert_eq!(TriMesh::new(dup, vec![[0, 1, 2], [3, 2, 0]]).unwrap_err(), MeshError::DuplicateVertex(1, 3));
    let fan = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, -1.0], [0.5, 2.0]];
    assert_eq!(TriMesh::new(fan, vec![[0, 1, 2], [0, 3, 1], [0, 1, 4]]).unwrap_err(), MeshError::NonManifoldEdge(0, 1, 3));
    assert!(matches!(TriMesh::new(vec![[f64::NAN, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]), Err(MeshError::NonFinite(0))));
}

#[test]
fn clockwise_triangles_are_reoriented() {
    let m = TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 2, 1]]).unwrap();
    assert!(m.area(0) > 0.0);
    assert_eq!(m.triangles()[0], [0, 1, 2]);
}

#[test]
fn subdomain_errors_and_numbering() {
    let t = three_line_mesh::<f64>(3).unwrap();
    assert_eq!(extract_subdomain(&t, &[]).unwrap_err(), MeshError::EmptySelection);
    assert_eq!(extract_subdomain(&t, &[99]).unwrap_err(), MeshError::TriangleIndexOutOfRange(99));
    let s = extract_subdomain(&t, &[5, 4, 5]).unwrap();
    assert_eq!(s.parent_triangles, vec![4, 5]);
    assert!(s.local_to_parent.windows(2).all(|w| w[0] < w[1]));
    for (l, &p) in s.local_to_parent.iter().enumerate() {
        assert_eq!(s.to_local(p), Some(l));
        assert_eq!(s.mesh.vertex(l), t.vertex(p));
    }
}

#[test]
fn json_round_trip_is_bit_exact() {
    let r = rhombus_mesh(&RhombusSpec::uniform(0.37 * PI, 4, Cut::Long, RhombusConvention::Centered).trimmed()).unwrap();
    let text = mesh_to_json(&r);
    assert!(text.contains("e-1") || text.contains("e0"));
    let back = mesh_from_json(&text).unwrap();
    assert_eq!(back.vertices(), r.vertices());
    assert_eq!(back.triangles(), r.triangles());
    assert_eq!(mesh_to_json(&back), text);
    assert!(matches!(mesh_from_json("{\"vertices\": 3}"), Err(MeshError::Format(_))));
}

#[test]
fn f32_meshes_are_supported() {
    let m = three_line_mesh::<f32>(3).unwrap();
    assert_eq!(classify_boundary(&m).interior.len(), 4);
    let g = gk_patch::<f32>(2, std::f32::consts::FRAC_PI_3).unwrap();
    assert_eq!(classify_boundary(&g).interior.len(), 9);
}
