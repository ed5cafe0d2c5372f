//! Mesh validation, classification, shape metrics, file I/O, and the two
//! built-in geometry generators.

use proptest::prelude::*;
use stokes_hp::mesh::{gen_moffatt_wedge, gen_tshape, Mesh, VertexClass};
use stokes_hp::polyquad::BarycentricPoint;
use stokes_hp::Error;

/// Unit square with a center vertex, split into four triangles.
fn center_split_square() -> Mesh {
    Mesh::from_raw(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
        vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
    )
    .expect("valid mesh")
}

fn euler_characteristic(m: &Mesh) -> i64 {
    m.num_vertices() as i64 - m.edges.len() as i64 + m.num_triangles() as i64
}

fn check_structure_invariants(m: &Mesh) {
    // Simply connected: V - E + T = 1.
    assert_eq!(euler_characteristic(m), 1);
    // Every edge has one or two incident triangles; interior edges two.
    for e in &m.edges {
        assert!(matches!(e.triangles.len(), 1 | 2));
    }
    // Affine maps reproduce triangle vertices.
    for (t, tri) in m.triangles.iter().enumerate() {
        for i in 0..3 {
            let p = m.maps[t].apply(BarycentricPoint::vertex(i));
            let v = m.vertices[tri[i]];
            assert!((p[0] - v[0]).abs() < 1e-12 && (p[1] - v[1]).abs() < 1e-12);
        }
        assert!(m.maps[t].det > 0.0, "triangle {t} not counterclockwise");
    }
    // triangle_edges slot e holds the edge spanned by the other two local
    // vertices, and an interior edge is traversed in opposite directions by
    // its two triangles.
    for (t, te) in m.triangle_edges.iter().enumerate() {
        for e in 0..3 {
            let edge = &m.edges[te[e]];
            let mut local = [
                m.triangles[t][stokes_hp::refelem::EDGE_VERTICES[e][0]],
                m.triangles[t][stokes_hp::refelem::EDGE_VERTICES[e][1]],
            ];
            local.sort_unstable();
            assert_eq!(local, edge.vertices);
        }
    }
    for (ei, edge) in m.edges.iter().enumerate() {
        if edge.triangles.len() == 2 {
            let mut flips = Vec::new();
            for &t in &edge.triangles {
                let e = m.triangle_edges[t].iter().position(|&x| x == ei).unwrap();
                flips.push(m.edge_flipped(t, e));
            }
            assert_ne!(flips[0], flips[1], "edge {ei} traversed twice in the same direction");
        }
    }
    // Interior vertices have at least three incident triangles.
    for (v, class) in m.vertex_class.iter().enumerate() {
        if *class == VertexClass::Interior {
            assert!(m.vertex_triangles[v].len() >= 3, "interior vertex {v} under-connected");
        }
    }
}

#[test]
fn center_split_square_classifies_corners() {
    let m = center_split_square();
    let classes = &m.vertex_class;
    assert_eq!(classes.iter().filter(|c| **c == VertexClass::Corner).count(), 4);
    assert_eq!(classes[4], VertexClass::Interior);
    check_structure_invariants(&m);
}

#[test]
fn center_split_square_passes_corner_split() {
    let (ok, offenders) = center_split_square().corner_split_check();
    assert!(ok);
    assert!(offenders.is_empty());
}

#[test]
fn single_triangle_fails_corner_split() {
    let m = Mesh::from_raw(
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        vec![[0, 1, 2]],
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
    )
    .expect("valid mesh");
    let (ok, offenders) = m.corner_split_check();
    assert!(!ok);
    assert_eq!(offenders, vec![0]);
}

#[test]
fn equilateral_triangle_shape_ratio() {
    let m = Mesh::from_raw(
        vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.75f64.sqrt()]],
        vec![[0, 1, 2]],
        vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.75f64.sqrt()]],
    )
    .expect("valid mesh");
    let report = m.shape_report().expect("shape report");
    // Inscribed-circle diameter over side length for an equilateral
    // triangle is 1/sqrt(3).
    let expected = 1.0 / 3.0f64.sqrt();
    assert!((report.kappa - expected).abs() < 1e-14);
    assert!((report.h - 1.0).abs() < 1e-14);
    assert!(report.kappa > 0.0 && report.kappa <= 1.0);
}

#[test]
fn clockwise_triangles_are_reoriented() {
    let m = Mesh::from_raw(
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        vec![[0, 2, 1]],
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
    )
    .expect("valid mesh");
    assert_eq!(m.reoriented, vec![0]);
    assert_eq!(m.triangles[0], [0, 1, 2]);
    assert!(m.maps[0].det > 0.0);
}

#[test]
fn duplicate_vertices_rejected() {
    let r = Mesh::from_raw(
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]],
        vec![[0, 1, 2]],
        vec![],
    );
    assert!(matches!(r, Err(Error::MeshStructure(_))));
}

#[test]
fn duplicate_triangles_rejected() {
    let r = Mesh::from_raw(
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        vec![[0, 1, 2], [1, 2, 0]],
        vec![],
    );
    assert!(matches!(r, Err(Error::MeshStructure(_))));
}

#[test]
fn degenerate_triangle_rejected() {
    let r = Mesh::from_raw(
        vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
        vec![[0, 1, 2]],
        vec![],
    );
    assert!(matches!(r, Err(Error::MeshStructure(_))));
}

#[test]
fn out_of_range_vertex_index_rejected() {
    let r = Mesh::from_raw(vec![[0.0, 0.0], [1.0, 0.0]], vec![[0, 1, 5]], vec![]);
    assert!(matches!(r, Err(Error::MeshStructure(_))));
}

#[test]
fn overshared_edge_rejected() {
    // Three triangles on the same edge (0, 1).
    let r = Mesh::from_raw(
        vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, -1.0], [0.5, 2.0]],
        vec![[0, 1, 2], [0, 3, 1], [0, 1, 4]],
        vec![],
    );
    assert!(matches!(r, Err(Error::MeshStructure(_))));
}

#[test]
fn disconnected_mesh_rejected() {
    let r = Mesh::from_raw(
        vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [5.0, 5.0],
            [6.0, 5.0],
            [5.0, 6.0],
        ],
        vec![[0, 1, 2], [3, 4, 5]],
        vec![],
    );
    assert!(matches!(r, Err(Error::MeshStructure(_))));
}

#[test]
fn hanging_vertex_rejected() {
    // Vertex 3 lies on the open interior of edge (0, 1) of triangle 0.
    let r = Mesh::from_raw(
        vec![[0.0, 0.0], [2.0, 0.0], [1.0, 1.0], [1.0, 0.0], [-1.0, 1.0]],
        vec![[0, 1, 2], [0, 2, 4], [0, 3, 4]],
        vec![],
    );
    assert!(matches!(r, Err(Error::MeshStructure(_))));
}

#[test]
fn undeclared_boundary_kink_rejected() {
    // Square mesh with only three of the four corners declared.
    let r = Mesh::from_raw(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
        vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]],
    );
    assert!(matches!(r, Err(Error::MeshStructure(_))));
}

#[test]
fn corner_must_match_boundary_vertex() {
    // A corner point off every vertex is rejected.
    let r = Mesh::from_raw(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
        vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.3, 0.9]],
    );
    assert!(matches!(r, Err(Error::MeshStructure(_))));
    // A corner matching an interior vertex is rejected.
    let r = Mesh::from_raw(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
        vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.5, 0.5]],
    );
    assert!(matches!(r, Err(Error::MeshStructure(_))));
}

#[test]
fn wedge_mesh_structure() {
    let m = gen_moffatt_wedge();
    assert_eq!(m.num_triangles(), 18);
    assert_eq!(m.corners.len(), 3);
    assert!(m.reoriented.is_empty());
    check_structure_invariants(&m);
    let (ok, offenders) = m.corner_split_check();
    assert!(ok, "wedge elements with several boundary edges: {offenders:?}");

    // The lid spans (-1, 1) x {0}; its interior vertices are
    // boundary-noncorner points.
    let lid_mid = m
        .vertices
        .iter()
        .position(|v| v[0].abs() < 1e-12 && v[1].abs() < 1e-12)
        .expect("lid midpoint vertex");
    assert_eq!(m.vertex_class[lid_mid], VertexClass::BoundaryNoncorner);
    assert_eq!(
        m.vertex_class.iter().filter(|c| **c == VertexClass::Corner).count(),
        3
    );
}

#[test]
fn wedge_mesh_shape_regularity() {
    let report = gen_moffatt_wedge().shape_report().expect("shape report");
    let target = 0.1508;
    assert!(
        (report.kappa - target).abs() <= 0.15 * target,
        "wedge kappa {} outside 15% of {target}",
        report.kappa
    );
}

#[test]
fn tshape_corner_count_and_structure() {
    for n in 1..=3 {
        let m = gen_tshape(n, 0.08).expect("t-shape mesh");
        assert_eq!(
            m.vertex_class.iter().filter(|c| **c == VertexClass::Corner).count(),
            8,
            "layer count {n}"
        );
        assert!(m.reoriented.is_empty());
        check_structure_invariants(&m);
        let (ok, offenders) = m.corner_split_check();
        assert!(ok, "t-shape n={n} offenders: {offenders:?}");
    }
}

#[test]
fn tshape_shape_regularity_by_depth() {
    let k1 = gen_tshape(1, 0.08).unwrap().shape_report().unwrap().kappa;
    let k2 = gen_tshape(2, 0.08).unwrap().shape_report().unwrap().kappa;
    let k3 = gen_tshape(3, 0.08).unwrap().shape_report().unwrap().kappa;
    let t1 = 0.1695;
    let t23 = 0.0829;
    assert!((k1 - t1).abs() <= 0.15 * t1, "kappa(1) = {k1}");
    assert!((k2 - t23).abs() <= 0.15 * t23, "kappa(2) = {k2}");
    assert!((k3 - t23).abs() <= 0.15 * t23, "kappa(3) = {k3}");
    assert!(k1 > k2);
    assert!((k2 - k3).abs() <= 0.05 * k2, "grading is self-similar");
}

/// Diameter of the smallest element incident to a re-entrant corner vertex.
fn innermost_diameter(n: usize, sigma: f64) -> f64 {
    let m = gen_tshape(n, sigma).expect("t-shape mesh");
    let report = m.shape_report().expect("shape report");
    let corner = m
        .vertices
        .iter()
        .position(|v| (v[0] + 0.5).abs() < 1e-12 && v[1].abs() < 1e-12)
        .expect("re-entrant corner vertex");
    m.vertex_triangles[corner]
        .iter()
        .map(|&t| report.element_h[t])
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn tshape_innermost_layer_scales_by_sigma() {
    let sigma = 0.08;
    let mut prev = innermost_diameter(1, sigma);
    for n in 2..=4 {
        let curr = innermost_diameter(n, sigma);
        let ratio = curr / prev;
        assert!(
            (ratio - sigma).abs() <= 0.1 * sigma,
            "diameter ratio {ratio} at n = {n} should be within 10% of {sigma}"
        );
        prev = curr;
    }
}

#[test]
fn tshape_rejects_bad_parameters() {
    assert!(matches!(gen_tshape(0, 0.08), Err(Error::InvalidInput(_))));
    assert!(matches!(gen_tshape(9, 0.08), Err(Error::InvalidInput(_))));
    assert!(matches!(gen_tshape(2, 0.0), Err(Error::InvalidInput(_))));
    assert!(matches!(gen_tshape(2, 0.6), Err(Error::InvalidInput(_))));
}

#[test]
fn text_round_trip_is_identity() {
    for mesh in [gen_moffatt_wedge(), gen_tshape(2, 0.08).unwrap()] {
        let text = mesh.write_text();
        let back = Mesh::read_text(&text).expect("round-trip parse");
        assert_eq!(back.vertices, mesh.vertices);
        assert_eq!(back.triangles, mesh.triangles);
        assert_eq!(back.corners, mesh.corners);
        assert!(back.reoriented.is_empty());
    }
}

#[test]
fn file_round_trip_is_identity() {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("mesh.txt");
    let mesh = gen_tshape(1, 0.08).unwrap();
    mesh.write_file(&path).expect("write mesh file");
    let back = Mesh::read_file(&path).expect("read mesh file");
    assert_eq!(back.vertices, mesh.vertices);
    assert_eq!(back.triangles, mesh.triangles);
}

#[test]
fn parser_accepts_comments_and_blank_lines() {
    let text = "\
# a full-line comment
tris2d v1

vertices 5  # trailing comment
0 0
1 0
1 1
0 1
0.5 0.5
triangles 4
0 1 4
1 2 4
2 3 4
3 0 4
corners 4
0 0
1 0
1 1
0 1
";
    let m = Mesh::read_text(text).expect("parse with comments");
    assert_eq!(m.num_vertices(), 5);
    assert_eq!(m.num_triangles(), 4);
}

#[test]
fn parser_reports_missing_vertex_with_line_number() {
    let text = "tris2d v1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 7\ncorners 0\n";
    match Mesh::read_text(text) {
        Err(Error::Parse { line, msg }) => {
            assert_eq!(line, 7);
            assert!(msg.contains("out of range"), "message: {msg}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn parser_rejects_bad_header() {
    assert!(matches!(
        Mesh::read_text("tris3d v2\nvertices 0\ntriangles 0\ncorners 0\n"),
        Err(Error::Parse { line: 1, .. })
    ));
}

#[test]
fn parser_rejects_truncated_input() {
    let text = "tris2d v1\nvertices 3\n0 0\n1 0\n";
    assert!(matches!(Mesh::read_text(text), Err(Error::Parse { .. })));
}

#[test]
fn parser_rejects_trailing_content() {
    let text = "tris2d v1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\ncorners 3\n0 0\n1 0\n0 1\nextra stuff\n";
    assert!(matches!(Mesh::read_text(text), Err(Error::Parse { .. })));
}

#[test]
fn parser_rejects_malformed_numbers() {
    let text = "tris2d v1\nvertices 1\n0 zero\ntriangles 0\ncorners 0\n";
    match Mesh::read_text(text) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tshape_invariants_hold_across_parameters(
        n in 1usize..=4,
        sigma in 0.05f64..0.2,
    ) {
        let m = gen_tshape(n, sigma).expect("t-shape mesh");
        check_structure_invariants(&m);
        let (ok, _) = m.corner_split_check();
        prop_assert!(ok);
        let report = m.shape_report().expect("shape report");
        prop_assert!(report.kappa > 0.0 && report.kappa <= 1.0);
        // Innermost elements scale like sigma per added layer.
        if n >= 2 {
            let ratio = innermost_diameter(n, sigma) / innermost_diameter(n - 1, sigma);
            prop_assert!((ratio - sigma).abs() <= 0.1 * sigma);
        }
    }
}
