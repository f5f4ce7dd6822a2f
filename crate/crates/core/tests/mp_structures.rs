use mpqc::linalg::{self, Mat, ONE, ZERO};
use mpqc::mp::{self, MpdoTensor, SiteChain};
use mpqc::oracle::{self, BrickParams, FixtureSpec};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: &Mat, b: &Mat) -> f64 {
    linalg::frob(&linalg::sub(a, b))
}

#[test]
fn ident_isometry_is_identity() {
    let v = oracle::ident(2).unwrap();
    let vn = mp::build_isometry_homogeneous(&v, 3).unwrap();
    assert!(close(&vn, &linalg::eye(8)) < 1e-14);
}

#[test]
fn ghz2_gram_is_twice_identity() {
    let v = oracle::ghz2();
    for n in 1..=4 {
        let vn = mp::build_isometry_homogeneous(&v, n).unwrap();
        let g = linalg::matmul(&linalg::adjoint(&vn), &vn);
        let dim = g.nrows();
        let bound = 1e-10 * 2f64.powf(n as f64 / 2.0) * 2f64.powf(n as f64 / 2.0);
        assert!(close(&g, &linalg::scale(&linalg::eye(dim), C64::new(2.0, 0.0))) <= bound);
    }
}

#[test]
fn shift_isometry_is_cyclic_permutation() {
    let v = oracle::shift(2).unwrap();
    let vn = mp::build_isometry_homogeneous(&v, 3).unwrap();
    assert!(close(&vn, &oracle::shift_permutation(2, 3)) < 1e-14);
}

#[test]
fn random_brickwork_fixtures_are_isometries() {
    for (s, p) in oracle::BRICK_FAMILY.iter().enumerate() {
        let f = oracle::make_fixture(&FixtureSpec::RandomBrickworkHmpi { params: *p }, s as u64).unwrap();
        assert_eq!(f.tensor.d_left, p.bond());
        for n in 1..=3 {
            let vn = mp::build_isometry_homogeneous(&f.tensor, n).unwrap();
            let g = linalg::matmul(&linalg::adjoint(&vn), &vn);
            let d = (g.nrows() as f64).sqrt();
            assert!(close(&g, &linalg::eye(g.nrows())) <= 1e-10 * d, "params {p:?} n {n}");
        }
    }
}

#[test]
fn blocking_commutes_with_regrouping() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = BrickParams { d_in: 2, d_out: 2, chi: 2, r: 2, l: 1, a: 2, b: 2 };
    let v = oracle::random_brickwork(&p, &mut rng).unwrap();
    for q in 1..=3 {
        let b = mp::block(&v, q).unwrap();
        for n in 1..=2 {
            let vb = mp::build_isometry_homogeneous(&b, n).unwrap();
            let vq = mp::build_isometry_homogeneous(&v, q * n).unwrap();
            let reg = mp::regroup_blocked(&vb, v.d_out, v.chi, q, n);
            assert!(close(&reg, &vq) < 1e-12, "q {q} n {n}");
        }
    }
}

#[test]
fn channel_matches_dilation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 1..=3 {
        let v = oracle::random_mpi(2, 2, 2, 2, &mut rng).unwrap();
        assert!(oracle::lp_consistency(&v, n).unwrap() < 1e-10);
    }
}

#[test]
fn ghz_channel_outputs_ghz() {
    let a = mp::mpqc_from_mpi(&oracle::ghz2());
    let s = mp::build_channel_dense(&SiteChain::homogeneous(a), 3).unwrap();
    let s = linalg::scale(&s, C64::new(0.5, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rho = oracle::random_density(8, &mut rng);
    let out = mp::apply_superop(&s, &rho);
    let ghz = oracle::ghz_state(2, 3);
    assert!(close(&out, &oracle::outer(&ghz, &ghz)) < 1e-12);
}

#[test]
fn mpdo_application_matches_dense() {
    let a = mp::mpqc_from_mpi(&oracle::ghz2());
    let zero = MpdoTensor::product(&[ONE, ZERO]).unwrap();
    let out = mp::apply_channel_mpdo(&SiteChain::homogeneous(a), &SiteChain::homogeneous(zero)).unwrap();
    let dense = linalg::scale(&mp::build_mpdo_dense(&out, 3).unwrap(), C64::new(0.5, 0.0));
    let ghz = oracle::ghz_state(2, 3);
    assert!(close(&dense, &oracle::outer(&ghz, &ghz)) < 1e-12);
}
