mod common;

use common::rel_diff;
use rgsvd::linalg;
use rgsvd::testmatrices::*;
use rgsvd::DenseMatrix;

fn spec(kind: TestMatrixKind, n: usize) -> TestMatrixSpec {
    TestMatrixSpec::new(kind, n, 5)
}

#[test]
fn decay_spectrum() {
    let mut s = spec(TestMatrixKind::Decay, 40);
    s.base = 0.5;
    let sv = linalg::singular_values(&make_test_matrix(&s).unwrap());
    for (j, x) in sv.iter().enumerate() {
        assert!(rel_diff(*x, 0.5f64.powi(j as i32 + 1)) <= 1e-14, "j = {j}");
    }
}

#[test]
fn lowrank_decay_spectrum() {
    let mut s = spec(TestMatrixKind::LowRankDecay, 30);
    s.r = 4;
    s.d = 2.0;
    let sv = linalg::singular_values(&make_test_matrix(&s).unwrap());
    for (j, x) in sv.iter().enumerate() {
        let want = if j < 4 { 1.0 } else { ((j - 2) as f64).powi(-2) };
        assert!(rel_diff(*x, want) <= 1e-14, "j = {j}: {x} vs {want}");
    }
}

#[test]
fn lowrank_noise_is_symmetric_with_requested_level() {
    let s = spec(TestMatrixKind::LowRankNoise, 100);
    let a = make_test_matrix(&s).unwrap();
    assert_eq!(a, a.transpose());
    let mut noise = a.clone();
    for i in 0..s.r {
        noise.set(i, i, noise.get(i, i) - 1.0);
    }
    // E‖noise‖_F² = noise · r · (n² + n)/n²; loose check on one draw.
    let ratio = noise.frobenius_norm().powi(2) / (s.noise * s.r as f64);
    assert!((0.9..1.1).contains(&ratio), "{ratio}");
}

#[test]
fn controlled_gap_has_a_gap() {
    let a = make_test_matrix(&spec(TestMatrixKind::ControlledGap, 128)).unwrap();
    let sv = linalg::singular_values(&a);
    assert!(sv[0] > 5.0 * sv[20], "{} vs {}", sv[0], sv[20]);
}

#[test]
fn minij_closed_form_spectrum() {
    for n in [1, 3, 64] {
        let mut eig = linalg::sym_eigenvalues(&make_minij(n));
        eig.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = (1..=n)
            .map(|j| {
                let t = (2 * j - 1) as f64 * std::f64::consts::PI / (2 * n + 1) as f64;
                0.5 / (1.0 - t.cos())
            })
            .collect();
        want.sort_by(f64::total_cmp);
        for (x, y) in eig.iter().zip(&want) {
            assert!(rel_diff(*x, *y) <= 1e-10, "n = {n}: {x} vs {y}");
        }
        assert!(eig[0] > 0.0);
    }
}

#[test]
fn randsvd_modes_hit_the_condition_number() {
    let modes = [
        SpectrumMode::OneLarge,
        SpectrumMode::OneSmall,
        SpectrumMode::Geometric,
        SpectrumMode::Arithmetic,
        SpectrumMode::LogUniform,
    ];
    for (i, mode) in modes.into_iter().enumerate() {
        let w = make_randsvd_spd(48, 1e6, mode, 3).unwrap();
        assert_eq!(w, w.transpose());
        let eig = linalg::sym_eigenvalues(&w);
        assert!(rel_diff(eig[0], 1.0) <= 1e-9, "{mode:?}");
        assert!(rel_diff(eig[47], 1e-6) <= 1e-3, "{mode:?}: {}", eig[47]);
        assert_eq!(format!("{}", i + 1).parse::<SpectrumMode>().unwrap(), mode);
    }
    assert!("6".parse::<SpectrumMode>().is_err());
    assert!(make_randsvd_spd(4, f64::INFINITY, SpectrumMode::Geometric, 1).is_err());
    assert_eq!(make_randsvd_spd(1, 1e3, SpectrumMode::Geometric, 1).unwrap(), DenseMatrix::identity(1));
}

#[test]
fn generators_are_seeded() {
    for kind in [TestMatrixKind::ControlledGap, TestMatrixKind::LowRankNoise] {
        let a = make_test_matrix(&TestMatrixSpec::new(kind, 64, 1)).unwrap();
        let b = make_test_matrix(&TestMatrixSpec::new(kind, 64, 1)).unwrap();
        let c = make_test_matrix(&TestMatrixSpec::new(kind, 64, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
    let (s1, t1) = default_weights(32, DEFAULT_WEIGHT_KAPPA, DEFAULT_WEIGHT_SEED).unwrap();
    let (s2, t2) = default_weights(32, DEFAULT_WEIGHT_KAPPA, DEFAULT_WEIGHT_SEED).unwrap();
    assert_eq!((s1, t1.clone()), (s2, t2));
    assert!(rel_diff(linalg::spd_condition_number(&t1), DEFAULT_WEIGHT_KAPPA) <= 1e-6);
}

#[test]
fn rank_parameter_larger_than_size_is_rejected() {
    for kind in TestMatrixKind::ALL {
        let mut s = TestMatrixSpec::new(kind, 8, 0);
        s.r = 9;
        assert!(make_test_matrix(&s).is_err(), "{kind}");
        s.n = 0;
        s.r = 0;
        assert!(make_test_matrix(&s).is_err(), "{kind}");
    }
}

#[test]
fn numerical_rank_of_known_matrices() {
    assert_eq!(numerical_rank(&DenseMatrix::identity(5)), 5);
    assert_eq!(numerical_rank(&common::with_singular_values(10, 8, &[1.0, 0.5, 1e-3], 2)), 3);
    assert_eq!(numerical_rank(&DenseMatrix::zeros(3, 3)), 0);
}
