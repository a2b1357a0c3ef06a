use proptest::prelude::*;
use qsm_core::dipole::{
    dipole_kernel, field_from_phase, forward_field, phase_from_field, radians_per_ppm, rotated_kernel, wrap,
};
use qsm_core::kspace::make_kgrid;
use qsm_core::phantom::{analytic_cylinder_field, analytic_sphere_field, render_phantom, PhantomSpec, Primitive};
use qsm_core::resample::resample_rotated;
use qsm_core::volume::linear_index;
use qsm_core::{Error, Mask, Rotation, Unit, Volume3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const Z: [f64; 3] = [0.0, 0.0, 1.0];

fn random_volume(n: usize, seed: u64) -> Volume3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Volume3::from_fn([n; 3], [1.0; 3], Unit::Ppm, |_, _, _| rng.random_range(-1.0..1.0)).unwrap()
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|x| x / n)
}

#[test]
fn kernel_limits() {
    let dims = [16; 3];
    let d = dipole_kernel::<f64>(dims, [1.0; 3], Z).unwrap();
    let v = d.values();
    assert!((v[linear_index(dims, 0, 0, 3)] + 2.0 / 3.0).abs() < 1e-15);
    assert!((v[linear_index(dims, 5, 2, 0)] - 1.0 / 3.0).abs() < 1e-15);
    assert!(v[linear_index(dims, 2, 2, 2)].abs() < 1e-15);
    assert_eq!(d.dc_value(), 0.0);
    assert!(matches!(dipole_kernel::<f64>(dims, [1.0; 3], [0.0; 3]), Err(Error::ZeroDirection)));
}

#[test]
fn rotated_kernel_cases() {
    let dims = [16; 3];
    let kz = dipole_kernel::<f64>(dims, [1.0; 3], Z).unwrap();
    assert_eq!(rotated_kernel::<f64>(dims, [1.0; 3], &Rotation::IDENTITY).unwrap(), kz);

    // 90° about x puts the field along ±y: the zero cone is about ŷ
    let k = rotated_kernel::<f64>(dims, [1.0; 3], &Rotation::about_x(90.0)).unwrap();
    let v = k.values();
    assert!((v[linear_index(dims, 0, 3, 0)] + 2.0 / 3.0).abs() < 1e-12);
    assert!((v[linear_index(dims, 0, 0, 3)] - 1.0 / 3.0).abs() < 1e-12);
    let grid = make_kgrid(dims, [1.0; 3]).unwrap();
    let mut zeros = 0;
    for kk in 0..16 {
        for j in 0..16 {
            for i in 0..16 {
                let q = grid.k(i, j, kk);
                let q2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
                if q2 > 0.0 && (3.0 * q[1] * q[1] - q2).abs() < 1e-12 && [i, j, kk].iter().all(|&x| x != 8) {
                    assert!(v[linear_index(dims, i, j, kk)].abs() < 1e-12);
                    zeros += 1;
                }
            }
        }
    }
    assert!(zeros > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kernel_range_and_symmetry(bx in -1.0f64..1.0, by in -1.0f64..1.0, bz in 0.1f64..1.0) {
        let dims = [12, 10, 8];
        let k = dipole_kernel::<f64>(dims, [1.0, 1.2, 0.9], [bx, by, bz]).unwrap();
        let grid = make_kgrid(dims, [1.0, 1.2, 0.9]).unwrap();
        let v = k.values();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo >= -2.0 / 3.0 - 1e-12 && hi <= 1.0 / 3.0 + 1e-12);
        for kk in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    prop_assert_eq!(v[linear_index(dims, i, j, kk)], v[grid.conjugate(i, j, kk)]);
                }
            }
        }
    }

    #[test]
    fn kernel_depends_on_direction_only(bx in -1.0f64..1.0, by in -1.0f64..1.0, i in 1usize..8, j in 0usize..8, k in 0usize..8) {
        let dims = [32; 3];
        let d = dipole_kernel::<f64>(dims, [1.0; 3], [bx, by, 1.0]).unwrap();
        let v = d.values();
        let a = v[linear_index(dims, i, j, k)];
        let b = v[linear_index(dims, 2 * i, 2 * j, 2 * k)];
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn oblique_kernel_hits_range(ax in -60.0f64..60.0, ay in -60.0f64..60.0) {
        let dims = [32; 3];
        let r = Rotation::about_x(ax).compose(&Rotation::about_y(ay));
        let v = rotated_kernel::<f64>(dims, [1.0; 3], &r).unwrap();
        let lo = v.values().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo > -2.0 / 3.0 - 1e-12 && lo < -2.0 / 3.0 + 0.02, "{lo}");
        prop_assert!(hi < 1.0 / 3.0 + 1e-12 && hi > 1.0 / 3.0 - 0.02, "{hi}");
    }

    #[test]
    fn forward_is_linear_and_mean_free(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let k = dipole_kernel::<f64>([12; 3], [1.0; 3], unit([0.2, -0.1, 1.0])).unwrap();
        let x1 = random_volume(12, seed);
        let x2 = random_volume(12, seed.wrapping_add(1));
        let lhs = forward_field(&x1.axpby(a, &x2, b).unwrap(), &k).unwrap();
        let rhs = forward_field(&x1, &k).unwrap().axpby(a, &forward_field(&x2, &k).unwrap(), b).unwrap();
        let scale = rhs.max_abs().max(1e-12);
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() / scale < 1e-9);
        prop_assert!(lhs.mean().abs() < 1e-9);
    }
}

#[test]
fn zero_susceptibility_gives_zero_field() {
    let k = dipole_kernel::<f64>([8; 3], [1.0; 3], Z).unwrap();
    let f = forward_field(&Volume3::zeros([8; 3], [1.0; 3], Unit::Ppm).unwrap(), &k).unwrap();
    assert_eq!(f.max_abs(), 0.0);
    assert_eq!(f.unit(), Unit::Ppm);
}

#[test]
fn rotation_equivariance() {
    let n = 64;
    let c = (n as f64 - 1.0) / 2.0;
    let chi = Volume3::from_fn([n; 3], [1.0; 3], Unit::Ppm, |i, j, k| {
        let d = [i as f64 - c - 3.0, j as f64 - c + 2.0, k as f64 - c];
        (-(d[0] * d[0] + 1.4 * d[1] * d[1] + 0.7 * d[2] * d[2]) / 40.0).exp()
    })
    .unwrap();
    let kz = dipole_kernel::<f64>([n; 3], [1.0; 3], Z).unwrap();
    for r in [Rotation::about_x(20.0), Rotation::about_y(-25.0), Rotation::about_x(15.0).compose(&Rotation::about_y(10.0))] {
        let lhs = forward_field(&resample_rotated(&chi, &r, 0.0).unwrap(), &kz).unwrap();
        let kr = rotated_kernel::<f64>([n; 3], [1.0; 3], &r.transpose()).unwrap();
        let rhs = resample_rotated(&forward_field(&chi, &kr).unwrap(), &r, 0.0).unwrap();
        // away from the FOV edge, where rotation pulls in fill values and
        // the periodic images differ between the two sides
        let d = lhs.sub(&rhs).unwrap();
        let central = Mask::from_fn([n; 3], |i, j, k| {
            (i as f64 - c).powi(2) + (j as f64 - c).powi(2) + (k as f64 - c).powi(2) < 144.0
        })
        .unwrap();
        let err = central.indices().map(|i| d.data()[i].abs()).fold(0.0, f64::max);
        assert!(err < 0.05 * lhs.max_abs(), "{err} vs {}", lhs.max_abs());
    }
}

fn sphere(radius: f64, chi: f64) -> Volume3<f64> {
    let spec = PhantomSpec { primitives: vec![Primitive::sphere([32.0; 3], radius, chi)], head: None };
    render_phantom(&spec, [64; 3], [1.0; 3]).unwrap().chi
}

#[test]
fn sphere_field_at_two_radii() {
    let k = dipole_kernel::<f64>([64; 3], [1.0; 3], Z).unwrap();
    let chi = sphere(8.0, 1.0);
    let f = forward_field(&chi, &k).unwrap();
    let on_axis = f.get(32, 32, 48);
    assert!((on_axis - 1.0 / 12.0).abs() < 0.05 / 12.0, "{on_axis}");
    let equator = f.get(48, 32, 32);
    assert!((equator + 1.0 / 24.0).abs() < 0.05 / 24.0, "{equator}");
    let interior: Vec<f64> = (0..f.len()).filter(|&i| chi.data()[i] > 0.5).map(|i| f.data()[i]).collect();
    assert!((interior.iter().sum::<f64>() / interior.len() as f64).abs() < 0.01);
}

#[test]
fn sphere_field_matches_closed_form_in_band() {
    // R = 6: points from 1.5R to 2.5R along the axes
    let r = 6.0;
    let k = dipole_kernel::<f64>([64; 3], [1.0; 3], Z).unwrap();
    let f = forward_field(&sphere(r, 1.0), &k).unwrap();
    for dist in [9isize, 12, 15] {
        for off in [[0, 0, dist], [0, 0, -dist], [dist, 0, 0], [0, -dist, 0]] {
            let want = analytic_sphere_field(1.0, r, off.map(|o| o as f64), Z).unwrap();
            let got = f.get((32 + off[0]) as usize, (32 + off[1]) as usize, (32 + off[2]) as usize);
            assert!(((got - want) / want).abs() < 0.05, "{off:?}: {got} vs {want}");
        }
    }
}

#[test]
fn analytic_sphere_cases() {
    assert!((analytic_sphere_field(1.0, 8.0, [0.0, 0.0, 16.0], Z).unwrap() - 1.0 / 12.0).abs() < 1e-15);
    assert!((analytic_sphere_field(1.0, 8.0, [16.0, 0.0, 0.0], Z).unwrap() + 1.0 / 24.0).abs() < 1e-15);
    let t = (1.0f64 / 3.0).sqrt().acos();
    for r in [9.0, 20.0, 100.0] {
        let v = analytic_sphere_field(1.0, 8.0, [r * t.sin(), 0.0, r * t.cos()], Z).unwrap();
        assert!(v.abs() < 1e-15);
    }
    assert!(matches!(analytic_sphere_field(1.0, 8.0, [0.0; 3], Z), Err(Error::ZeroRadius)));
}

#[test]
fn analytic_cylinder_cases() {
    let half_pi = std::f64::consts::FRAC_PI_2;
    for r in [3.0, 10.0] {
        assert_eq!(analytic_cylinder_field(1.0, 2.0, r, 0.3, 0.0).unwrap(), 0.0);
    }
    assert!((analytic_cylinder_field(1.0, 2.0, 1.0, 0.0, half_pi).unwrap() + 1.0 / 6.0).abs() < 1e-15);
    assert!((analytic_cylinder_field(1.0, 2.0, 4.0, 0.0, half_pi).unwrap() - 0.125).abs() < 1e-15);
}

#[test]
fn long_cylinder_matches_infinite_closed_form() {
    let r = 6.0;
    let spec = PhantomSpec { primitives: vec![Primitive::cylinder_z([32.0; 3], r, 62.0, 1.0)], head: None };
    let chi = render_phantom::<f64>(&spec, [64; 3], [1.0; 3]).unwrap().chi;
    // main field along x: axis perpendicular, azimuth measured from x
    let k = dipole_kernel::<f64>([64; 3], [1.0; 3], [1.0, 0.0, 0.0]).unwrap();
    let f = forward_field(&chi, &k).unwrap();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let checks = [
        ((32, 32), analytic_cylinder_field(1.0, r, 0.0, 0.0, half_pi).unwrap()),
        ((44, 32), analytic_cylinder_field(1.0, r, 12.0, 0.0, half_pi).unwrap()),
        ((20, 32), analytic_cylinder_field(1.0, r, 12.0, std::f64::consts::PI, half_pi).unwrap()),
        ((32, 44), analytic_cylinder_field(1.0, r, 12.0, half_pi, half_pi).unwrap()),
    ];
    for ((i, j), want) in checks {
        let got = f.get(i, j, 32);
        assert!(((got - want) / want).abs() < 0.08, "({i},{j}): {got} vs {want}");
    }
}

#[test]
fn phase_field_conversion() {
    let s = radians_per_ppm(0.025, 3.0).unwrap();
    assert!((s - 20.064).abs() < 1e-3, "{s}");
    let one = Volume3::<f64>::new([2; 3], [1.0; 3], Unit::Ppm, vec![1.0; 8]).unwrap();
    let phase = phase_from_field(&one, 0.025, 3.0).unwrap();
    assert_eq!(phase.unit(), Unit::Radians);
    assert!((phase.data()[0] - 20.06).abs() < 0.01);
    assert_eq!(field_from_phase(&phase, 0.025, 3.0).unwrap().data()[0], 1.0);
    let half = field_from_phase(&phase, 0.05, 3.0).unwrap();
    assert!((half.data()[0] - 0.5).abs() < 1e-15);
    let zero = Volume3::<f64>::zeros([2; 3], [1.0; 3], Unit::Radians).unwrap();
    assert_eq!(field_from_phase(&zero, 0.025, 3.0).unwrap().max_abs(), 0.0);
    assert!(radians_per_ppm(0.0, 3.0).is_err());
    assert!(radians_per_ppm(0.025, -1.0).is_err());
}

proptest! {
    #[test]
    fn wrap_lands_in_half_open_interval(x in -100.0f64..100.0) {
        let w = wrap(x);
        prop_assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&w));
        let turns = (x - w) / std::f64::consts::TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }
}
