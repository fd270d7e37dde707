use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

use dmp_core::assembly::{
    edge_entry_from_angles, element_stiffness_angles, element_stiffness_gradient, load_vector, mass_matrix, relative_discrepancy,
    stiffness_cotangent, stiffness_gradient, AssembledSystem, AssemblyError, Load,
};
use dmp_core::generators::{gk_patch, three_line_mesh};
use dmp_core::mesh::{classify_boundary, TriMesh};
use proptest::prelude::*;

fn equilateral() -> [[f64; 2]; 3] {
    [[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]]
}

#[test]
fn equilateral_element() {
    let k = element_stiffness_gradient(equilateral());
    let off = -3f64.sqrt() / 6.0;
    for i in 0..3 {
        assert!((k[i][i] - 3f64.sqrt() / 3.0).abs() < 1e-15);
        for j in 0..3 {
            if i != j {
                assert!((k[i][j] - off).abs() < 1e-15);
            }
        }
    }
    let ka = element_stiffness_angles([FRAC_PI_3; 3]);
    for i in 0..3 {
        for j in 0..3 {
            assert!((k[i][j] - ka[i][j]).abs() < 1e-15);
        }
    }
}

#[test]
fn edge_entries_from_angles() {
    assert!((edge_entry_from_angles(FRAC_PI_3, FRAC_PI_3).unwrap() + 3f64.sqrt() / 3.0).abs() < 1e-15);
    assert!((edge_entry_from_angles(FRAC_PI_4, FRAC_PI_4).unwrap() + 1.0).abs() < 1e-15);
    assert!((edge_entry_from_angles(FRAC_PI_2, FRAC_PI_4).unwrap() + 0.5).abs() < 1e-15);
    // supplementary angles give a zero entry, obtuse pairs a positive one
    assert!(edge_entry_from_angles(0.6 * PI, 0.4 * PI).unwrap().abs() < 1e-15);
    assert!(edge_entry_from_angles(0.7 * PI, 0.4 * PI).unwrap() > 0.0);
    assert!(matches!(edge_entry_from_angles(0.0, 1.0), Err(AssemblyError::InvalidInput(_))));
    assert!(edge_entry_from_angles(1.0, PI).is_err());
}

#[test]
fn right_triangle_mass() {
    let m = TriMesh::<f64>::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
    let mass = mass_matrix(&m).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let expect: f64 = if i == j { 1.0 / 12.0 } else { 1.0 / 24.0 };
            assert!((mass[(i, j)] - expect).abs() < 1e-16);
        }
    }
    let total: f64 = mass.to_rows().iter().flatten().sum();
    assert!((total - 0.5).abs() < 1e-15);
}

#[test]
fn three_line_interior_rows_are_five_point() {
    let n = 4;
    let m = three_line_mesh::<f64>(n).unwrap();
    let a = stiffness_gradient(&m).unwrap();
    let p = classify_boundary(&m);
    for &v in &p.interior {
        let (i, j) = (v % (n + 1), v / (n + 1));
        for w in 0..m.num_vertices() {
            let (k, l) = (w % (n + 1), w / (n + 1));
            let expect = match (k as i64 - i as i64, l as i64 - j as i64) {
                (0, 0) => 4.0,
                (1, 0) | (-1, 0) | (0, 1) | (0, -1) => -1.0,
                _ => 0.0,
            };
            assert!((a[(v, w)] - expect).abs() < 1e-13, "entry ({v},{w})");
        }
    }
}

#[test]
fn gk_right_angle_boundary_diagonals() {
    let g = gk_patch::<f64>(2, FRAC_PI_2).unwrap();
    let a = stiffness_gradient(&g).unwrap();
    let p = classify_boundary(&g);
    let mut diag: Vec<i64> = p.boundary.iter().map(|&v| (a[(v, v)] * 1e9).round() as i64).collect();
    diag.sort_unstable();
    diag.dedup();
    // 2 on straight sides, 1 at right-angle corners, 3/2 next to the trimmed corners
    assert_eq!(diag, vec![1_000_000_000, 1_500_000_000, 2_000_000_000]);
    for &v in &p.interior {
        assert!((a[(v, v)] - 4.0).abs() < 1e-13);
    }
}

#[test]
fn degenerate_triangle_is_rejected() {
    let m = TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1e-15]], vec![[0, 1, 2]]).unwrap();
    assert!(matches!(stiffness_gradient(&m), Err(AssemblyError::DegenerateTriangle { triangle: 0, .. })));
    assert!(mass_matrix(&m).is_err());
}

#[test]
fn reaction_and_loads() {
    let m = three_line_mesh::<f64>(3).unwrap();
    let s = AssembledSystem::new(&m, 2.5).unwrap();
    assert!(s.reaction.max_abs_diff(&s.mass.scale(2.5)).unwrap() < 1e-16);
    assert!(s.stiffness_row_sum_defect() < 1e-13);
    assert!(!s.has_negative_reaction());
    assert!(AssembledSystem::new(&m, -1.0).unwrap().has_negative_reaction());
    assert!(AssembledSystem::new(&m, f64::NAN).is_err());
    assert_eq!(s.interior_block().rows(), 4);
    assert_eq!(s.coupling_block().cols(), 12);

    let ones = vec![1.0; m.num_vertices()];
    let f = load_vector(&s.mass, &Load::Nodal(ones.clone())).unwrap();
    assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    assert_eq!(load_vector(&s.mass, &Load::Dual(ones.clone())).unwrap(), ones);
    assert!(load_vector(&s.mass, &Load::Nodal(vec![1.0])).is_err());
}

#[test]
fn f32_assembly_tracks_f64() {
    let m64 = gk_patch::<f64>(1, FRAC_PI_3).unwrap();
    let m32 = m64.cast::<f32>().unwrap();
    let a64 = stiffness_gradient(&m64).unwrap();
    let a32 = stiffness_gradient(&m32).unwrap();
    assert!(a32.to_f64().max_abs_diff(&a64).unwrap() < 1e-5);
}

fn jittered(n: usize, offsets: &[f64]) -> TriMesh<f64> {
    let base = three_line_mesh::<f64>(n).unwrap();
    let p = classify_boundary(&base);
    let h = 1.0 / n as f64;
    let mut vs = base.vertices().to_vec();
    for (k, &v) in p.interior.iter().enumerate() {
        vs[v][0] += 0.2 * h * offsets[(2 * k) % offsets.len()];
        vs[v][1] += 0.2 * h * offsets[(2 * k + 1) % offsets.len()];
    }
    TriMesh::new(vs, base.triangles().to_vec()).unwrap()
}

proptest! {
    #[test]
    fn both_paths_agree(n in 2usize..7, offsets in prop::collection::vec(-1.0f64..1.0, 2..40)) {
        let m = jittered(n, &offsets);
        let a = stiffness_gradient(&m).unwrap();
        let b = stiffness_cotangent(&m).unwrap();
        prop_assert!(relative_discrepancy(&a, &b).unwrap() < 1e-12);
        prop_assert!(a.is_symmetric(1e-14));
        let s = AssembledSystem::new(&m, 0.0).unwrap();
        prop_assert!(s.stiffness_row_sum_defect() < 1e-12);
    }

    #[test]
    fn mass_sums_to_area(n in 2usize..7, offsets in prop::collection::vec(-1.0f64..1.0, 2..40)) {
        let m = jittered(n, &offsets);
        let total: f64 = mass_matrix(&m).unwrap().to_rows().iter().flatten().sum();
        prop_assert!((total - 1.0).abs() < 1e-13);
    }
}
