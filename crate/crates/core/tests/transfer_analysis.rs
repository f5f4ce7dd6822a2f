use mpqc::linalg::{self, ONE};
use mpqc::oracle::{self, BrickParams, FixtureSpec};
use mpqc::transfer::{self, Verdict};
use num_complex::Complex64 as C64;

fn sorted_moduli(v: &[C64]) -> Vec<f64> {
    v.iter().map(|z| z.norm()).collect()
}

#[test]
fn transfer_spectra_of_fixtures() {
    let e = transfer::transfer_matrix(&oracle::ident(2).unwrap());
    assert_eq!((e.nrows(), e.ncols()), (1, 1));
    assert!((e[(0, 0)] - ONE).norm() < 1e-15);

    let s = transfer::spectrum(&oracle::shift(2).unwrap(), 1e-8).unwrap();
    assert_eq!(s.unit_count, 1);
    let m = sorted_moduli(&s.eigenvalues);
    assert!((m[0] - 1.0).abs() < 1e-12 && m[1..].iter().all(|&x| x < 1e-12));
    let c = s.cfii.expect("cfii");
    for (k, r) in c.rho_diag.iter().enumerate() {
        assert!((r - 0.5).abs() < 1e-12, "rho[{k}] = {r}");
    }

    let g = transfer::spectrum(&oracle::ghz2(), 1e-8).unwrap();
    assert_eq!(g.unit_count, 2);
    let e = transfer::transfer_matrix(&oracle::ghz2());
    for n in 2..=6 {
        assert!((transfer::trace_power(&e, n) - C64::new(2.0, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn hmpi_verdicts() {
    assert_eq!(transfer::is_hmpi(&oracle::ident(2).unwrap(), 3, 1e-9).unwrap().verdict, Verdict::Yes);
    assert_eq!(transfer::is_hmpi(&oracle::shift(2).unwrap(), 3, 1e-9).unwrap().verdict, Verdict::Yes);
    let r = transfer::is_hmpi(&oracle::ghz2(), 3, 1e-9).unwrap();
    assert_eq!(r.verdict, Verdict::No);
    assert!(r.isometry_defects.iter().all(|&d| (d - 1.0).abs() < 1e-12));
}

#[test]
fn random_brickwork_spectral_law() {
    for seed in 0..12u64 {
        let p = oracle::BRICK_FAMILY[seed as usize % oracle::BRICK_FAMILY.len()];
        let f = oracle::make_fixture(&FixtureSpec::RandomBrickworkHmpi { params: p }, seed).unwrap();
        let ev = transfer::clean_eigenvalues(&transfer::transfer_matrix(&f.tensor)).unwrap();
        assert!((ev[0] - ONE).norm() < 1e-8, "seed {seed}: {:?}", ev);
        assert!(ev[1..].iter().all(|z| z.norm() < 1e-8), "seed {seed}: {:?}", ev);
        let rep = transfer::is_hmpi(&f.tensor, 3, 1e-9).unwrap();
        assert_eq!(rep.verdict, Verdict::Yes, "seed {seed} {rep:?}");
        let sp = transfer::spectrum(&f.tensor, 1e-8).unwrap();
        assert!(sp.cfii.is_some(), "seed {seed} {:?}", sp.cfii_failure);
    }
}

#[test]
fn canonical_decompositions() {
    let d = transfer::canonical_decompose(&oracle::ident(2).unwrap(), 1e-9).unwrap();
    assert_eq!((d.g, d.c), (1, 1));
    let d = transfer::canonical_decompose(&oracle::ghz2(), 1e-9).unwrap();
    assert_eq!((d.g, d.c, d.multiplicities.clone()), (2, 2, vec![1, 1]));
    for (j, b) in d.blocks.iter().enumerate() {
        assert_eq!(b.d_left, 1);
        for i in 0..2 {
            for o in 0..2 {
                for k in 0..2 {
                    let want = if o == j && i == k { 1.0 } else { 0.0 };
                    assert!((b.entry(0, 0, i, o, k) - C64::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }
    }
    let sh = oracle::shift(2).unwrap();
    let ss = oracle::direct_sum(&[(sh.clone(), ONE), (sh, ONE)]).unwrap();
    let d = transfer::canonical_decompose(&ss, 1e-9).unwrap();
    assert_eq!((d.g, d.c, d.multiplicities.clone()), (1, 4, vec![2]));
    assert!(d.residual < 1e-8, "{}", d.residual);
}

#[test]
fn random_smpi_recovered() {
    let block = BrickParams { d_in: 2, d_out: 2, chi: 2, r: 2, l: 1, a: 2, b: 2 };
    for (seed, m) in [(7u64, vec![1, 2]), (8, vec![2]), (9, vec![1, 1, 1]), (10, vec![3, 1])] {
        let f = oracle::make_fixture(&FixtureSpec::RandomSmpi { multiplicities: m.clone(), block, scramble: true }, seed).unwrap();
        let d = transfer::canonical_decompose(&f.tensor, 1e-9).unwrap();
        let mut got = d.multiplicities.clone();
        got.sort();
        let mut want = m.clone();
        want.sort();
        assert_eq!(got, want, "seed {seed}");
        assert_eq!(d.c, f.expected.c);
        assert!(d.residual < 1e-8, "seed {seed}: residual {}", d.residual);
        assert!(d.normal.iter().all(|&x| x));
    }
}

#[test]
fn normality() {
    assert!(transfer::normality_test(&oracle::ident(2).unwrap(), 1e-9).unwrap().normal);
    let r = transfer::normality_test(&oracle::ghz2(), 1e-9).unwrap();
    assert!(!r.normal);
    let w = r.witness.unwrap();
    assert!(transfer::invariance_defect(&oracle::ghz2(), &w) < 1e-12);
    assert!((w[(0, 0)] - ONE).norm() < 1e-12 && w[(1, 1)].norm() < 1e-12);
    let _ = linalg::eye(1);
}
