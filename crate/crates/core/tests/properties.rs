use mpqc::io::TensorFile;
use mpqc::linalg::{self, Mat};
use mpqc::mp::{self, SiteChain};
use mpqc::oracle::{self, BrickParams, FixtureSpec, BRICK_FAMILY};
use mpqc::protocol::mpo::{self, OpTensor};
use mpqc::tensor::naive_contract;
use mpqc::transfer;
use mpqc::DenseTensor;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_tensor(dims: &[usize], labels: &[String], rng: &mut ChaCha8Rng) -> DenseTensor {
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| linalg::random_normal(rng)).collect();
    DenseTensor::from_parts(dims.to_vec(), labels.to_vec(), data).unwrap()
}

/// Two tensors sharing `k` axes: a has free axes fa then shared, b has a
/// rotated ordering so pairings are not positional.
fn pair(fa: &[usize], fb: &[usize], shared: &[usize], seed: u64) -> (DenseTensor, DenseTensor, Vec<(String, String)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adims = fa.to_vec();
    adims.extend_from_slice(shared);
    let alab: Vec<String> = (0..adims.len()).map(|k| format!("a{k}")).collect();
    let mut bdims: Vec<usize> = shared.iter().rev().copied().collect();
    bdims.extend_from_slice(fb);
    let blab: Vec<String> = (0..bdims.len()).map(|k| format!("b{k}")).collect();
    let pairs = (0..shared.len()).map(|k| (alab[fa.len() + k].clone(), blab[shared.len() - 1 - k].clone())).collect();
    (random_tensor(&adims, &alab, &mut rng), random_tensor(&bdims, &blab, &mut rng), pairs)
}

fn max_diff(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn dims(max_rank: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 0..=max_rank)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn contract_matches_naive(fa in dims(2), fb in dims(2), shared in dims(3), seed in any::<u64>()) {
        let (a, b, pairs) = pair(&fa, &fb, &shared, seed);
        let p: Vec<(&str, &str)> = pairs.iter().map(|(x, y)| (x.as_str(), y.as_str())).collect();
        let fast = DenseTensor::contract(&a, &b, &p).unwrap();
        let slow = naive_contract(&a, &b, &p).unwrap();
        prop_assert_eq!(fast.dims(), slow.dims());
        prop_assert!(max_diff(&fast, &slow) <= 1e-12);
    }

    #[test]
    fn contract_is_bilinear(fa in dims(2), fb in dims(2), shared in dims(2), seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let (a1, b, pairs) = pair(&fa, &fb, &shared, seed);
        let (a2, _, _) = pair(&fa, &fb, &shared, seed.wrapping_add(1));
        let p: Vec<(&str, &str)> = pairs.iter().map(|(x, y)| (x.as_str(), y.as_str())).collect();
        let s = C64::new(re, im);
        let comb_data: Vec<C64> = a1.data().iter().zip(a2.data()).map(|(x, y)| s * x + y).collect();
        let comb = DenseTensor::from_parts(a1.dims().to_vec(), a1.labels().to_vec(), comb_data).unwrap();
        let lhs = DenseTensor::contract(&comb, &b, &p).unwrap();
        let r1 = DenseTensor::contract(&a1, &b, &p).unwrap();
        let r2 = DenseTensor::contract(&a2, &b, &p).unwrap();
        let rhs_data: Vec<C64> = r1.data().iter().zip(r2.data()).map(|(x, y)| s * x + y).collect();
        let rhs = DenseTensor::from_parts(r1.dims().to_vec(), r1.labels().to_vec(), rhs_data).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-11);
    }

    #[test]
    fn svd_split_reconstructs(d in prop::collection::vec(1usize..5, 2..5), rows in 1usize..4, seed in any::<u64>()) {
        let rows = rows.min(d.len() - 1);
        let labels: Vec<String> = (0..d.len()).map(|k| format!("x{k}")).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&d, &labels, &mut rng);
        let r: Vec<&str> = labels[..rows].iter().map(String::as_str).collect();
        let s = t.svd_split(&r, 1e-10).unwrap();
        let back = s.reconstruct().unwrap();
        let err: f64 = t.data().iter().zip(back.data()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-10 * t.norm());
    }

    #[test]
    fn eig_residuals(n in 1usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = linalg::random_gaussian(n, n, &mut rng);
        let e = linalg::eig(&m).unwrap();
        let norm = linalg::frob(&m);
        for (k, &lam) in e.values.iter().enumerate() {
            let v = linalg::column(&e.right, k);
            let mv = linalg::mat_vec(&m, &v);
            let res: Vec<C64> = mv.iter().zip(&v).map(|(a, b)| a - lam * b).collect();
            prop_assert!(linalg::vnorm(&res) <= 1e-9 * norm * linalg::vnorm(&v).max(1e-300));
        }
    }

    #[test]
    fn completion_is_unitary(rows in 1usize..9, cols in 1usize..9, seed in any::<u64>()) {
        let cols = cols.min(rows);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let iso = linalg::haar_isometry(rows, cols, &mut rng);
        let u = linalg::complete_to_unitary(&iso).unwrap();
        prop_assert!(linalg::isometry_defect(&u) <= 1e-10);
        for r in 0..rows {
            for c in 0..cols {
                prop_assert!((u[(r, c)] - iso[(r, c)]).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn tensor_file_round_trip(family in 0usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = oracle::random_brickwork(&BRICK_FAMILY[family], &mut rng).unwrap();
        let f = TensorFile::from_mpi(&v);
        let text = f.to_json().unwrap();
        let back = TensorFile::from_json(&text).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(back.to_json().unwrap(), text);
        prop_assert_eq!(back.to_mpi().unwrap(), v);
    }

    #[test]
    fn linear_combinations_match_dense(n in 1usize..5, terms in 1usize..4, bond in 1usize..3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut list = Vec::new();
        let mut want = linalg::zeros(1 << n, 1 << n);
        for _ in 0..terms {
            let site = OpTensor { dl: bond, dr: bond, rows: 2, cols: 2, a: linalg::random_gaussian(bond, 4 * bond, &mut rng) };
            let chain = SiteChain::homogeneous(site);
            let w = linalg::random_normal(&mut rng);
            want = linalg::add(&want, &linalg::scale(&mpo::mpo_dense(&chain, n).unwrap(), w));
            list.push((w, chain));
        }
        let comb = mpo::mpo_linear_combination(&list, n).unwrap();
        let got = mpo::mpo_dense(&comb, n).unwrap();
        prop_assert!(linalg::frob(&linalg::sub(&got, &want)) <= 1e-10 * linalg::frob(&want).max(1.0));
        let v = oracle::random_state(1 << n, &mut rng);
        let a = mpo::apply_mpo(&comb, n, &v).unwrap();
        let b = linalg::mat_vec(&want, &v);
        let d: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        prop_assert!(linalg::vnorm(&d) <= 1e-10 * linalg::vnorm(&b).max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn brickwork_hmpi_invariants(family in 0usize..6, seed in any::<u64>()) {
        let p: BrickParams = BRICK_FAMILY[family];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = oracle::random_brickwork(&p, &mut rng).unwrap();
        let e = transfer::transfer_matrix(&v);
        for n in 2..=6 {
            prop_assert!((transfer::trace_power(&e, n) - 1.0).norm() <= 1e-9);
        }
        for n in 1..=3 {
            let vn = mp::build_isometry_homogeneous(&v, n).unwrap();
            prop_assert!(linalg::isometry_defect(&vn) <= 1e-10 * (p.d_in as f64).powf(n as f64 / 2.0));
        }
        prop_assert!(oracle::lp_consistency(&v, 2).unwrap() <= 1e-10);
    }

    #[test]
    fn fixtures_are_deterministic(seed in any::<u64>(), family in 0usize..6) {
        let spec = FixtureSpec::RandomBrickworkHmpi { params: BRICK_FAMILY[family] };
        let a = oracle::make_fixture(&spec, seed).unwrap().tensor;
        let b = oracle::make_fixture(&spec, seed).unwrap().tensor;
        prop_assert_eq!(a.tensor().data(), b.tensor().data());
    }
}

#[test]
fn unitary_completion_of_a_column() {
    let iso = Mat::from_fn(3, 1, |r, _| C64::new(if r == 1 { 1.0 } else { 0.0 }, 0.0));
    let u = linalg::complete_to_unitary(&iso).unwrap();
    assert!(linalg::isometry_defect(&u) < 1e-12);
}
