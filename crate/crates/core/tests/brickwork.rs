use mpqc::brickwork::{self, BrickworkCircuit};
use mpqc::linalg::{self, Mat};
use mpqc::mp::MpiTensor;
use num_complex::Complex64 as C64;
use mpqc::oracle::{self, BRICK_FAMILY};
use mpqc::transfer::Verdict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check_circuit(c: &BrickworkCircuit) {
    assert!(c.u_defect < 1e-9, "u defect {}", c.u_defect);
    assert!(c.v_defect < 1e-9, "v defect {}", c.v_defect);
    assert!(c.reconstruction_defect < 1e-9, "reconstruction {}", c.reconstruction_defect);
}

#[test]
fn ident_and_shift_are_simple() {
    for d in [2, 3] {
        let v = oracle::ident(d).unwrap();
        let rep = brickwork::simplicity_test(&v, 1e-9).unwrap();
        assert_eq!(rep.verdict, Verdict::Yes, "{rep:?}");
        let c = brickwork::extract_gates(&v, 1, 1e-10).unwrap();
        check_circuit(&c);

        let s = oracle::shift(d).unwrap();
        let rep = brickwork::simplicity_test(&s, 1e-9).unwrap();
        assert_eq!(rep.verdict, Verdict::Yes, "{rep:?}");
        let c = brickwork::extract_gates(&s, 1, 1e-10).unwrap();
        assert_eq!(c.r * c.l, d * d);
        check_circuit(&c);
    }
}

#[test]
fn random_brickwork_family() {
    for (i, p) in BRICK_FAMILY.iter().enumerate() {
        for seed in 0..3u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 * i as u64 + seed);
            let v = oracle::random_brickwork(p, &mut rng).unwrap();
            let c = brickwork::brickwork_pipeline(&v, 1e-9, 1e-10)
                .unwrap_or_else(|e| panic!("family {i} seed {seed}: {e}"));
            eprintln!("family {i} seed {seed}: q = {} r = {} l = {}", c.q, c.r, c.l);
            assert!(c.q <= 2);
            check_circuit(&c);
        }
    }
}

/// o_k = i_{k+2}: two stacked shifts, bond (m₁, m₂).
fn shift2(d: usize) -> MpiTensor {
    MpiTensor::from_fn(d * d, d * d, d, d, 1, |m, n, i, o, _| {
        let (m1, m2) = (m / d, m % d);
        let (n1, n2) = (n / d, n % d);
        if m1 == i && n1 == m2 && n2 == o {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
    .unwrap()
}

#[test]
fn double_shift_needs_blocking() {
    let v = shift2(2);
    let rep = brickwork::simplicity_test(&v, 1e-9).unwrap();
    assert_eq!(rep.verdict, Verdict::No, "{rep:?}");
    let c = brickwork::brickwork_pipeline(&v, 1e-9, 1e-10).unwrap();
    assert_eq!(c.q, 2);
    check_circuit(&c);
}

fn pauli_z(d: usize) -> Mat {
    linalg::diag_real(&(0..d).map(|k| if k == 0 { 1.0 } else { -1.0 }).collect::<Vec<_>>())
}

#[test]
fn ghz_has_long_range_order() {
    let v = oracle::ghz2();
    let plus = vec![C64::new(0.5f64.sqrt(), 0.0); 2];
    let z = pauli_z(2);
    let c = brickwork::correlation_lightcone_check(&v, &plus, &z, &z, 5).unwrap();
    assert!((c - 1.0).abs() < 1e-10, "{c}");
}

#[test]
fn transfer_correlator_matches_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for p in BRICK_FAMILY.iter().take(3) {
        let v = oracle::random_brickwork(p, &mut rng).unwrap();
        let phi = oracle::random_state(p.d_in, &mut rng);
        let a = linalg::random_hermitian(p.d_out, &mut rng);
        let b = linalg::random_hermitian(p.d_out, &mut rng);
        for sep in 1..3 {
            let t = brickwork::ring_correlator(&v, &phi, &a, &b, sep, 4).unwrap();
            let d = brickwork::dense_correlator(&v, &phi, &a, &b, sep, 4).unwrap();
            assert!((t - d).norm() < 1e-10, "{t} vs {d}");
        }
    }
}

#[test]
fn correlations_vanish_outside_lightcone() {
    for (i, p) in BRICK_FAMILY.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + i as u64);
        let v = oracle::random_brickwork(p, &mut rng).unwrap();
        let phi = oracle::random_state(p.d_in, &mut rng);
        let a = linalg::random_hermitian(p.d_out, &mut rng);
        let b = linalg::random_hermitian(p.d_out, &mut rng);
        let near = brickwork::correlation_lightcone_check(&v, &phi, &a, &b, 1).unwrap();
        let far = brickwork::correlation_lightcone_check(&v, &phi, &a, &b, 5).unwrap();
        assert!(far < 1e-9, "family {i}: {far}");
        eprintln!("family {i}: near {near:.3e} far {far:.3e}");
    }
}
