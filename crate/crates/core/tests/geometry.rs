use nalgebra::{Point3, Vector3};
use proptest::prelude::*;

use twinkit::decimate::{decimate, default_grid, DecimationParams};
use twinkit::fixtures;
use twinkit::mesh::{
    edge_face_counts, find_duplicates, load_model, parse_obj, save_model, stored_mesh_count, to_obj_string,
    TriangleMesh,
};
use twinkit::metrics::{compute_shape_metrics, compute_similarity, measure, shape_ratios_flagged, SimilarityConfig};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

fn fixture(k: usize) -> TriangleMesh {
    match k % 5 {
        0 => fixtures::cube(1.0),
        1 => fixtures::icosphere(2, 1.0),
        2 => fixtures::torus(1.0, 0.3, 24, 12),
        3 => fixtures::cylinder(0.5, 2.0, 16, 3, 2),
        _ => fixtures::mechanical_part(k),
    }
}

fn sim() -> SimilarityConfig {
    SimilarityConfig { samples: 500, seed: 3 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metrics_ignore_rigid_motion(k in 0usize..5, angle in 0.0f64..360.0, ax in -1.0f64..1.0, ay in -1.0f64..1.0, t in -50.0f64..50.0) {
        let m = fixture(k);
        let axis = Vector3::new(ax, ay, 1.0);
        let moved = fixtures::rotated(&m, axis, angle).map_vertices(|p| p + Vector3::new(t, -t, 2.0 * t));
        let a = compute_shape_metrics(&m).unwrap().to_array();
        let b = compute_shape_metrics(&moved).unwrap().to_array();
        // Bounding-box ratios depend on orientation; the rest must not.
        for i in 2..9 {
            if i == 3 { continue; }
            prop_assert!(close(a[i], b[i], 1e-6) || (a[i] - b[i]).abs() < 1e-9, "metric {i}: {} vs {}", a[i], b[i]);
        }
    }

    #[test]
    fn metrics_ignore_uniform_scale(k in 0usize..5, s in 0.01f64..100.0) {
        let m = fixture(k);
        let a = compute_shape_metrics(&m).unwrap().to_array();
        let b = compute_shape_metrics(&m.scaled(s)).unwrap().to_array();
        for i in 0..9 {
            prop_assert!(close(a[i], b[i], 1e-6) || (a[i] - b[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn self_comparison_is_identity(k in 0usize..5) {
        let m = fixture(k);
        let h = measure(&m).unwrap();
        let (r, _) = shape_ratios_flagged(&h, &h);
        for (i, v) in r.to_array().iter().enumerate() {
            // Uniform-area meshes report zero skewness and the ratio falls back to 1.
            prop_assert!((v - 1.0).abs() < 1e-12 || (i >= 6 && *v == 1.0), "ratio {i} = {v}");
        }
        let s = compute_similarity(&m, &m, &sim()).unwrap();
        prop_assert!(s.mean_distance < 1e-9);
        prop_assert!(s.normal_deviation_deg < 1e-6);
        prop_assert!(s.dihedral_deviation_deg < 1e-9);
    }

    #[test]
    fn obj_round_trip(k in 0usize..5) {
        let m = fixture(k);
        let back = parse_obj(&to_obj_string(&m)).unwrap();
        prop_assert_eq!(back.canonical_hash(), m.canonical_hash());
    }

    #[test]
    fn decimation_monotone_and_valid(k in 0usize..5, w in prop::sample::select(vec![0.0, 0.5, 1.0]), nl in prop::sample::select(vec![15.0, 45.0, 90.0]), pb in any::<bool>()) {
        let m = fixture(k);
        let mut last = usize::MAX;
        for r in [0.8, 0.5, 0.3, 0.1] {
            let p = DecimationParams { target_ratio: r, edge_weight: w, normal_limit_deg: nl, preserve_boundary: pb };
            let d = decimate(&m, &p).unwrap();
            let f = d.mesh.face_count();
            prop_assert!(f <= last, "faces grew from {last} to {f} at ratio {r}");
            prop_assert!(f >= 4 && f <= m.face_count());
            prop_assert_eq!(f, d.report.final_faces);
            prop_assert!(d.report.infeasible || f <= d.report.target_faces);
            for face in 0..f {
                prop_assert!(d.mesh.face_area(face) > 0.0);
            }
            // Closed input stays closed and manifold.
            prop_assert!(edge_face_counts(d.mesh.faces()).values().all(|&c| c == 2));
            last = f;
        }
    }
}

#[test]
fn grid_combos_are_distinct_and_valid() {
    let combos = default_grid().combos();
    assert_eq!(combos.len(), 108);
    for (i, a) in combos.iter().enumerate() {
        a.validate().unwrap();
        for b in &combos[i + 1..] {
            assert_ne!(a, b);
        }
    }
    assert_eq!(combos[0].target_ratio, 0.05);
    assert_eq!(combos[107].target_ratio, 0.75);
}

#[test]
fn decimation_is_deterministic() {
    let m = fixtures::mechanical_part(3);
    let p = DecimationParams::default();
    assert_eq!(decimate(&m, &p).unwrap().mesh, decimate(&m, &p).unwrap().mesh);
}

#[test]
fn model_round_trip_keeps_sharing() {
    let model = fixtures::duplicate_model(12, 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(stored_mesh_count(&back), 4);
    assert_eq!(find_duplicates(&back).len(), 4);
    assert_eq!(std::fs::read_dir(dir.path().join("meshes")).unwrap().count(), 4);
}

#[test]
fn cube_distance_to_inset_cube() {
    // Points on a cube of half-size 0.4 lie 0.1 from a cube of half-size 0.5.
    let high = fixtures::cube(1.0);
    let c = Vector3::new(0.5, 0.5, 0.5);
    let low = high.map_vertices(|p| Point3::from((p.coords - c) * 0.8 + c));
    let s = compute_similarity(&high, &low, &sim()).unwrap();
    let diag = 3f64.sqrt();
    assert!((s.mean_distance - 0.1 / diag).abs() < 1e-9, "{}", s.mean_distance);
}
