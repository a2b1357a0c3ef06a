use qsm_core::phantom::{brain_like, render_phantom, roi_name, Ellipsoid, PhantomSpec, Primitive, Shape};
use qsm_core::Error;

const VS: [f64; 3] = [1.0; 3];

#[test]
fn empty_spec_renders_nothing() {
    let ph = render_phantom::<f64>(&PhantomSpec::default(), [32; 3], VS).unwrap();
    assert_eq!(ph.chi.max_abs(), 0.0);
    assert_eq!(ph.labels.max_abs(), 0.0);
    // default head still gives a usable mask
    assert!(ph.mask.count() > 0);
}

#[test]
fn sphere_voxel_count_near_analytic_volume() {
    let r = 8.0;
    let spec = PhantomSpec { primitives: vec![Primitive::sphere([32.0; 3], r, 0.1)], head: None };
    let ph = render_phantom::<f64>(&spec, [64; 3], VS).unwrap();
    let count = ph.chi.data().iter().filter(|&&v| v == 0.1).count() as f64;
    let want = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
    assert!((count - want).abs() / want < 0.02, "{count} vs {want}");
    assert!(ph.chi.data().iter().all(|&v| v == 0.0 || v == 0.1));
}

#[test]
fn disjoint_spheres_have_disjoint_labels() {
    let spec = PhantomSpec {
        primitives: vec![
            Primitive::sphere([12.0, 16.0, 16.0], 4.0, 0.1).labeled(1),
            Primitive::sphere([22.0, 16.0, 16.0], 4.0, 0.2).labeled(2),
        ],
        head: None,
    };
    let ph = render_phantom::<f64>(&spec, [32; 3], VS).unwrap();
    let ones = ph.labels.data().iter().filter(|&&l| l == 1.0).count();
    let twos = ph.labels.data().iter().filter(|&&l| l == 2.0).count();
    assert_eq!(ones, twos);
    assert!(ones > 200);
    for (l, c) in ph.labels.data().iter().zip(ph.chi.data()) {
        match *l as u32 {
            1 => assert_eq!(*c, 0.1),
            2 => assert_eq!(*c, 0.2),
            _ => assert_eq!(*c, 0.0),
        }
    }
}

#[test]
fn later_primitives_overwrite() {
    let spec = PhantomSpec {
        primitives: vec![
            Primitive::cuboid([16.0; 3], [6.0; 3], 0.1).labeled(1),
            Primitive::sphere([16.0; 3], 3.0, 0.3).labeled(2),
        ],
        head: None,
    };
    let ph = render_phantom::<f64>(&spec, [32; 3], VS).unwrap();
    assert_eq!(ph.chi.get(16, 16, 16), 0.3);
    assert_eq!(ph.labels.get(16, 16, 16), 2.0);
    assert_eq!(ph.chi.get(21, 16, 16), 0.1);
}

#[test]
fn mask_contains_dilated_primitives_and_head() {
    let head = Ellipsoid { center_mm: [16.0; 3], semi_axes_mm: [10.0, 8.0, 6.0] };
    let spec = PhantomSpec { primitives: vec![Primitive::sphere([16.0; 3], 3.0, 0.1)], head: Some(head.clone()) };
    let ph = render_phantom::<f64>(&spec, [32; 3], VS).unwrap();
    assert!(ph.mask.data()[ph.chi.index(16, 16, 21)]);
    assert!(ph.mask.data()[ph.chi.index(25, 16, 16)]);
    assert!(!ph.mask.data()[ph.chi.index(16, 16, 24)]);
}

#[test]
fn validation_errors() {
    let dims = [32; 3];
    let near_edge = PhantomSpec { primitives: vec![Primitive::sphere([5.0, 16.0, 16.0], 3.0, 0.1)], head: None };
    assert!(matches!(near_edge.validate(dims, VS), Err(Error::OutsideFov { index: 0, .. })));
    let dup = PhantomSpec {
        primitives: vec![
            Primitive::sphere([10.0, 16.0, 16.0], 2.0, 0.1).labeled(3),
            Primitive::sphere([20.0, 16.0, 16.0], 2.0, 0.1).labeled(3),
        ],
        head: None,
    };
    assert!(dup.validate(dims, VS).is_err());
    let zero_label = PhantomSpec { primitives: vec![Primitive::sphere([16.0; 3], 2.0, 0.1).labeled(0)], head: None };
    assert!(zero_label.validate(dims, VS).is_err());
    let bad_radius = PhantomSpec { primitives: vec![Primitive::sphere([16.0; 3], -2.0, 0.1)], head: None };
    assert!(bad_radius.validate(dims, VS).is_err());
    // cylinders may span the whole FOV along z
    let cyl = PhantomSpec { primitives: vec![Primitive::cylinder_z([16.0; 3], 4.0, 31.0, 0.1)], head: None };
    assert!(cyl.validate(dims, VS).is_ok());
}

#[test]
fn json_roundtrip_and_schema() {
    let spec = brain_like([64; 3], VS).unwrap();
    let text = spec.to_json().unwrap();
    assert_eq!(PhantomSpec::from_json(&text).unwrap(), spec);

    let doc = r#"{
        "primitives": [
            {"shape": "sphere", "radius_mm": 5, "center_mm": [20, 20, 20], "chi_ppm": 0.1, "label": 1},
            {"shape": "cylinder_z", "radius_mm": 3, "length_mm": 20, "center_mm": [20, 20, 20], "chi_ppm": -0.05},
            {"shape": "box", "half_extent_mm": [2, 3, 4], "center_mm": [12, 12, 12], "chi_ppm": 0.2}
        ]
    }"#;
    let s = PhantomSpec::from_json(doc).unwrap();
    assert_eq!(s.primitives.len(), 3);
    assert_eq!(s.primitives[1].shape, Shape::CylinderZ { radius_mm: 3.0, length_mm: 20.0 });
    assert!(s.head.is_none());
    assert!(PhantomSpec::from_json(r#"{"primitives": [{"shape": "cone"}]}"#).is_err());
}

#[test]
fn brain_like_has_five_named_rois() {
    let dims = [48; 3];
    let ph = render_phantom::<f64>(&brain_like(dims, VS).unwrap(), dims, VS).unwrap();
    let mut chis = Vec::new();
    for label in 1..=5u32 {
        let idx: Vec<usize> = (0..ph.labels.len()).filter(|&i| ph.labels.data()[i] == label as f64).collect();
        assert!(idx.len() > 10, "label {label}");
        assert!(idx.iter().all(|&i| ph.mask.data()[i]));
        chis.push(ph.chi.data()[idx[0]]);
        assert!(roi_name(label).is_some());
    }
    assert_eq!(chis, vec![0.04, 0.13, 0.05, 0.10, 0.12]);
    assert!(brain_like([24; 3], VS).is_err());
}

#[test]
fn magnitude_is_nonnegative_and_masked() {
    let dims = [32; 3];
    let ph = render_phantom::<f64>(&brain_like(dims, VS).unwrap(), dims, VS).unwrap();
    let m = ph.magnitude();
    for (i, &v) in m.data().iter().enumerate() {
        assert!(v >= 0.0);
        if !ph.mask.data()[i] {
            assert_eq!(v, 0.0);
        }
    }
}
