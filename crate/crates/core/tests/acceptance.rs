//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero on failure.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use mpqc::brickwork;
use mpqc::linalg::{self, Mat, ONE};
use mpqc::mp::{self, MpdoTensor, MpiTensor, SiteChain};
use mpqc::oracle::{self, ChoiTolerances, BRICK_FAMILY};
use mpqc::path;
use mpqc::protocol::amplify;
use mpqc::protocol::feedforward::{self, Outcomes};
use mpqc::protocol::gates;
use mpqc::protocol::mpo;
use mpqc::smpi;
use mpqc::tensor::naive_contract;
use mpqc::transfer::{self, Verdict};
use mpqc::DenseTensor;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<T>(r: mpqc::Result<T>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

fn diff(a: &Mat, b: &Mat) -> f64 {
    linalg::frob(&linalg::sub(a, b))
}

/// The 50 seeded brickwork hMPIs shared by the first three criteria.
fn hmpi_fixtures() -> Vec<(String, MpiTensor)> {
    (0..50u64)
        .map(|s| {
            let fam = (s % BRICK_FAMILY.len() as u64) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(5000 + s);
            let v = oracle::random_brickwork(&BRICK_FAMILY[fam], &mut rng).unwrap();
            (format!("family {fam} seed {s}"), v)
        })
        .collect()
}

fn spectral_law() -> Outcome {
    let mut worst_tr: f64 = 0.0;
    let mut worst_sub: f64 = 0.0;
    let fixtures = hmpi_fixtures();
    for (name, v) in &fixtures {
        ensure(v.d_left <= 4 && v.d_in <= 3 && v.chi <= 2, || format!("{name}: extents out of range"))?;
        let e = transfer::transfer_matrix(v);
        let ev = e2s(transfer::clean_eigenvalues(&e), name)?;
        let unit = ev.iter().filter(|z| (*z - ONE).norm() <= 1e-8).count();
        let rest = ev.iter().filter(|z| (*z - ONE).norm() > 1e-8).map(|z| z.norm()).fold(0.0, f64::max);
        ensure(unit == 1, || format!("{name}: {unit} eigenvalues at 1"))?;
        ensure(rest <= 1e-8, || format!("{name}: subleading modulus {rest:.2e}"))?;
        worst_sub = worst_sub.max(rest);
        for n in 2..=6 {
            let t = (transfer::trace_power(&e, n) - ONE).norm();
            ensure(t <= 1e-9, || format!("{name}: |Tr E^{n} - 1| = {t:.2e}"))?;
            worst_tr = worst_tr.max(t);
        }
    }
    Ok(format!("{} tensors, max |Tr E^N - 1| {worst_tr:.1e}, max subleading {worst_sub:.1e}", fixtures.len()))
}

fn brickwork_pipeline() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut qs = Vec::new();
    let fixtures = hmpi_fixtures();
    for (name, v) in &fixtures {
        let c = e2s(brickwork::brickwork_pipeline(v, 1e-9, 1e-10), name)?;
        let d = v.d_left;
        ensure(c.q <= d.pow(4), || format!("{name}: q = {} > D^4", c.q))?;
        ensure(c.u_defect <= 1e-9 && c.v_defect <= 1e-9, || {
            format!("{name}: gate defects {:.2e} {:.2e}", c.u_defect, c.v_defect)
        })?;
        let (din, dx, rl) = (c.d_in(), c.d_x(), c.r * c.l);
        ensure(din * din <= rl && rl <= dx * dx, || format!("{name}: r·l = {rl} outside [{}, {}]", din * din, dx * dx))?;
        for pairs in [2, 3] {
            let r = e2s(brickwork::reconstruct_and_compare(&c, &c.tensor, pairs), name)?;
            ensure(r <= 1e-9, || format!("{name}: reconstruction at {} sites {r:.2e}", 2 * pairs))?;
            worst = worst.max(r);
        }
        qs.push(c.q);
    }
    for d in [2, 3] {
        let c = e2s(brickwork::brickwork_pipeline(&oracle::shift(d).unwrap(), 1e-9, 1e-10), "shift")?;
        ensure(c.r * c.l == d * d, || format!("shift({d}): r·l = {}", c.r * c.l))?;
    }
    let qmax = qs.iter().copied().max().unwrap_or(0);
    Ok(format!("{} tensors, max q {qmax}, max reconstruction {worst:.1e}, shift r·l = d²", fixtures.len()))
}

fn light_cone() -> Outcome {
    let mut fixtures = hmpi_fixtures();
    for d in [2, 3] {
        fixtures.push((format!("ident({d})"), oracle::ident(d).unwrap()));
        fixtures.push((format!("shift({d})"), oracle::shift(d).unwrap()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let (rep, _) = oracle::replacement(2, 2, 2, &mut rng).unwrap();
    fixtures.push(("replacement".into(), rep));
    let mut worst: f64 = 0.0;
    for (name, v) in &fixtures {
        let (b, _) = e2s(brickwork::block_until_simple(v, None, 1e-9), name)?;
        let phi = oracle::random_state(b.d_in, &mut rng);
        let a = linalg::random_hermitian(b.d_out, &mut rng);
        let o = linalg::random_hermitian(b.d_out, &mut rng);
        for sep in [5, 6] {
            let c = e2s(brickwork::correlation_lightcone_check(&b, &phi, &a, &o, sep), name)?;
            ensure(c <= 1e-9, || format!("{name}: correlator {c:.2e} at distance {sep}"))?;
            worst = worst.max(c);
        }
    }
    let h = 1.0 / 2f64.sqrt();
    let plus = [C64::new(h, 0.0), C64::new(h, 0.0)];
    let z = linalg::diag_real(&[1.0, -1.0]);
    let g = brickwork::correlation_lightcone_check(&oracle::ghz2(), &plus, &z, &z, 5).map_err(|e| e.to_string())?;
    ensure((g - 1.0).abs() <= 1e-10, || format!("GHZ2 correlator {g}"))?;
    Ok(format!("{} hMPIs, max far correlator {worst:.1e}; GHZ2 at distance 5: {g:.12}", fixtures.len()))
}

fn smpi_structure() -> Outcome {
    let cert = e2s(smpi::smpi_decompose(&oracle::ghz2(), 1e-9), "ghz2")?;
    ensure((cert.c, cert.g) == (2, 2) && cert.multiplicities == vec![1, 1], || {
        format!("GHZ2 certified as c={} g={} m={:?}", cert.c, cert.g, cert.multiplicities)
    })?;
    let cases: [&[usize]; 5] = [&[1, 1], &[1, 2], &[2], &[1, 1, 1], &[2, 1]];
    let fams = [2usize, 0, 3];
    let mut worst_strong: f64 = 0.0;
    let mut worst_re: f64 = 0.0;
    for t in 0..20u64 {
        let m = cases[t as usize % cases.len()];
        let fam = fams[t as usize % fams.len()];
        let name = format!("smpi {m:?} family {fam} seed {t}");
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + t);
        let fx = e2s(oracle::random_smpi(m, &BRICK_FAMILY[fam], t % 2 == 0, &mut rng), &name)?;
        let cert = e2s(smpi::smpi_decompose(&fx.tensor, 1e-8), &name)?;
        let mut got = cert.multiplicities.clone();
        got.sort();
        let mut want = fx.expected.m.clone();
        want.sort();
        ensure(cert.g == fx.expected.g && cert.c == fx.expected.c && got == want, || {
            format!("{name}: recovered c={} g={} m={:?}", cert.c, cert.g, cert.multiplicities)
        })?;
        ensure(cert.multiplicities.iter().map(|x| x * x).sum::<usize>() == cert.c, || format!("{name}: Σm² ≠ c"))?;
        for (j, r) in cert.block_reports.iter().enumerate() {
            ensure(r.hmpi == Verdict::Yes, || format!("{name}: block {j} verdict {}", r.hmpi.as_str()))?;
        }
        for (j, row) in cert.strong.iter().enumerate() {
            for (k, &s) in row.iter().enumerate() {
                if j != k {
                    ensure(s <= 1e-9, || format!("{name}: strong orthogonality ({j},{k}) {s:.2e}"))?;
                    worst_strong = worst_strong.max(s);
                }
            }
        }
        for n in 1..=4 {
            let vn = e2s(mp::build_isometry_homogeneous(&fx.tensor, n), &name)?;
            let re = diff(&vn, &e2s(cert.reassemble_dense(n), &name)?) / (cert.c as f64).sqrt();
            ensure(re <= 1e-9, || format!("{name}: reassembly at N={n} {re:.2e}"))?;
            worst_re = worst_re.max(re);
        }
    }
    Ok(format!("GHZ2 c=2 g=2 m=(1,1); 20 planted sMPIs recovered, strong {worst_strong:.1e}, reassembly {worst_re:.1e}"))
}

fn feedforward_protocol() -> Outcome {
    let mut runs = 0usize;
    let mut worst: f64 = 0.0;
    let mut check = |name: &str, tr: &feedforward::ProtocolTrace| -> Result<(), String> {
        runs += 1;
        worst = worst.max(1.0 - tr.fidelity);
        ensure(tr.fidelity >= 1.0 - 1e-10, || format!("{name}: fidelity {}", tr.fidelity))?;
        ensure(tr.correction_defect <= 1e-10, || format!("{name}: correction defect {:.2e}", tr.correction_defect))
    };
    let ghz = e2s(smpi::smpi_decompose(&oracle::ghz2(), 1e-9), "ghz2")?;
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    for n in [3usize, 4, 5] {
        let gs = e2s(gates::build_gateset(&ghz, n, None), "gates")?;
        for inp in 0..5 {
            let psi = oracle::random_state(1 << n, &mut rng);
            let outcomes: Vec<Outcomes> = if n == 3 {
                e2s(feedforward::enumerate_branches(2, 3), "branches")?.into_iter().map(Outcomes::Branch).collect()
            } else {
                (0..64).map(|s| Outcomes::Sample(1000 * inp + s)).collect()
            };
            let mut total = 0.0;
            for o in outcomes {
                let (_, tr) = e2s(feedforward::run_feedforward_protocol(&gs, &ghz, &psi, o), "ghz2")?;
                total += tr.branch_probability;
                check(&format!("GHZ2 N={n}"), &tr)?;
            }
            if n == 3 {
                ensure((total - 1.0).abs() <= 1e-10, || format!("branch probabilities sum to {total}"))?;
            }
        }
    }
    let cases: [&[usize]; 5] = [&[1, 1], &[1, 2], &[2], &[1, 1, 1], &[2, 1]];
    for (t, m) in cases.iter().enumerate() {
        let name = format!("smpi {m:?}");
        let mut frng = ChaCha8Rng::seed_from_u64(8000 + t as u64);
        let fx = e2s(oracle::random_smpi(m, &BRICK_FAMILY[2], true, &mut frng), &name)?;
        let cert = e2s(smpi::smpi_decompose(&fx.tensor, 1e-8), &name)?;
        let gs = e2s(gates::build_gateset(&cert, 3, None), &name)?;
        let branches = e2s(feedforward::enumerate_branches(cert.g, 3), &name)?;
        for _ in 0..5 {
            let psi = oracle::random_state(gs.d_in.pow(3), &mut rng);
            for b in &branches {
                let (_, tr) =
                    e2s(feedforward::run_feedforward_protocol(&gs, &cert, &psi, Outcomes::Branch(b.clone())), &name)?;
                if tr.branch_probability > 0.0 {
                    check(&name, &tr)?;
                }
            }
        }
    }
    Ok(format!("{runs} branches/shots, max infidelity {worst:.1e}"))
}

fn amplitude_amplification() -> Outcome {
    let ghz = e2s(smpi::smpi_decompose(&oracle::ghz2(), 1e-9), "ghz2")?;
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let mut log = Vec::new();
    for n in 2..=4 {
        let gs = e2s(gates::build_gateset(&ghz, n, None), "gates")?;
        let psi = oracle::random_state(1 << n, &mut rng);
        let (_, rep) = e2s(amplify::run_amplitude_amplification(&gs, &ghz, &psi, None), "amplify")?;
        let [r_cg, r_cgn, r_pow] = rep.candidate_residuals;
        log.push(format!(
            "N={n} sinθ={:.6} |·−1/√(cg)|={r_cg:.2e} |·−√(c/g^N)|={r_cgn:.2e} |·−g^(−N/2)|={r_pow:.2e}",
            rep.sin_theta
        ));
    }
    // θ = π/6 at N = 2: one round, no retuning
    let n = 2;
    let gs = e2s(gates::build_gateset(&ghz, n, None), "gates")?;
    let mut worst_anc: f64 = 0.0;
    let mut worst_fid: f64 = 0.0;
    let mut last = None;
    for _ in 0..5 {
        let psi = oracle::random_state(1 << n, &mut rng);
        let (_, rep) = e2s(amplify::run_amplitude_amplification(&gs, &ghz, &psi, None), "amplify")?;
        ensure(rep.rounds == 1 && rep.phi == 0.0, || format!("expected one exact round, got {} φ={}", rep.rounds, rep.phi))?;
        ensure(rep.ancilla_defect <= 1e-9, || format!("ancilla defect {:.2e}", rep.ancilla_defect))?;
        ensure(rep.fidelity >= 1.0 - 1e-9, || format!("fidelity {}", rep.fidelity))?;
        worst_anc = worst_anc.max(rep.ancilla_defect);
        worst_fid = worst_fid.max(1.0 - rep.fidelity);
        last = Some(rep);
    }
    let (_, mpu) = e2s(mpo::boundary_mpu_representation(&gs, &ghz, last.as_ref()), "boundary MPU")?;
    ensure(mpu.defect <= 1e-8, || format!("boundary MPU defect {:.2e}", mpu.defect))?;
    for l in &log {
        println!("    {l}");
    }
    Ok(format!(
        "N=2: ancilla {worst_anc:.1e}, infidelity {worst_fid:.1e}, boundary MPU {} factors defect {:.1e}",
        mpu.factors, mpu.defect
    ))
}

fn classification_paths() -> Outcome {
    let mut pairs = vec![("shift↔ident".to_string(), oracle::shift(2).unwrap(), oracle::ident(2).unwrap())];
    for t in 0..10u64 {
        let (fa, fb) = ((t % 4) as usize, ((t + 1 + t / 4) % 4) as usize);
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + t);
        let a = oracle::random_brickwork(&BRICK_FAMILY[fa], &mut rng).unwrap();
        let b = oracle::random_brickwork(&BRICK_FAMILY[fb], &mut rng).unwrap();
        pairs.push((format!("family {fa}↔{fb} seed {t}"), a, b));
    }
    let mut worst_iso: f64 = 0.0;
    let mut worst_end: f64 = 0.0;
    let mut min_n = usize::MAX;
    for (name, a, b) in &pairs {
        let mut p = e2s(path::build_path(a, b, 11), name)?;
        ensure(p.samples.len() == 11, || format!("{name}: {} samples", p.samples.len()))?;
        for r in &p.reports {
            min_n = min_n.min(r.isometry_defects.len());
            for (k, d) in r.isometry_defects.iter().enumerate() {
                ensure(*d <= 1e-9, || format!("{name}: s={} N={} isometry defect {d:.2e}", r.s, k + 1))?;
                worst_iso = worst_iso.max(*d);
            }
        }
        for n in [2, 3] {
            let (d0, d1) = e2s(path::verify_endpoints(&mut p, n), name)?;
            ensure(d0 <= 1e-9 && d1 <= 1e-9, || format!("{name}: endpoint defects at N={n}: {d0:.2e} {d1:.2e}"))?;
            worst_end = worst_end.max(d0).max(d1);
        }
    }
    ensure(min_n >= 3, || format!("isometry only checked up to N={min_n}"))?;
    Ok(format!("{} paths × 11 samples, isometry {worst_iso:.1e} (N=1..3), endpoints {worst_end:.1e}", pairs.len()))
}

fn channel_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut fixtures: Vec<(String, MpiTensor, usize)> = Vec::new();
    for d in [2, 3] {
        fixtures.push((format!("ident({d})"), oracle::ident(d).unwrap(), 1));
        fixtures.push((format!("shift({d})"), oracle::shift(d).unwrap(), 1));
    }
    fixtures.push(("ghz2".into(), oracle::ghz2(), 2));
    for (i, p) in BRICK_FAMILY.iter().enumerate() {
        fixtures.push((format!("brickwork family {i}"), oracle::random_brickwork(p, &mut rng).unwrap(), 1));
    }
    for m in [&[1usize, 1][..], &[1, 2]] {
        let fx = oracle::random_smpi(m, &BRICK_FAMILY[2], true, &mut rng).unwrap();
        fixtures.push((format!("smpi {m:?}"), fx.tensor, fx.expected.c));
    }
    let (rep, rho) = oracle::replacement(2, 2, 2, &mut rng).unwrap();
    fixtures.push(("replacement".into(), rep.clone(), 1));

    let mut worst_lp: f64 = 0.0;
    let mut min_ev: f64 = 0.0;
    let mut worst_tp: f64 = 0.0;
    for (name, v, c) in &fixtures {
        let lp = e2s(oracle::lp_consistency(v, 2), name)?;
        ensure(lp <= 1e-10, || format!("{name}: lp consistency {lp:.2e}"))?;
        worst_lp = worst_lp.max(lp);
        let chain = SiteChain::homogeneous(mp::mpqc_from_mpi(v));
        let reps = e2s(oracle::cp_tp_check(&chain, 3, ChoiTolerances::default(), 1.0 / *c as f64), name)?;
        for r in reps {
            ensure(r.min_eigenvalue >= -1e-9 && r.tp_defect <= 1e-9, || {
                format!("{name}: N={} min eigenvalue {:.2e} TP defect {:.2e}", r.n, r.min_eigenvalue, r.tp_defect)
            })?;
            min_ev = min_ev.min(r.min_eigenvalue);
            worst_tp = worst_tp.max(r.tp_defect);
        }
    }

    // the GHZ2 channel prepares the GHZ state from anything
    let chain = SiteChain::homogeneous(mp::mpqc_from_mpi(&oracle::ghz2()));
    let mut worst_ghz: f64 = 0.0;
    for n in [3, 4] {
        let s = linalg::scale(&e2s(mp::build_channel_dense(&chain, n), "ghz2")?, C64::new(0.5, 0.0));
        let g = oracle::ghz_state(2, n);
        let target = oracle::outer(&g, &g);
        for _ in 0..3 {
            let x = oracle::random_density(1 << n, &mut rng);
            let t = e2s(oracle::trace_distance(&mp::apply_superop(&s, &x), &target), "trace distance")?;
            ensure(t <= 1e-10, || format!("GHZ2 N={n}: trace distance {t:.2e}"))?;
            worst_ghz = worst_ghz.max(t);
        }
    }

    let rchain = SiteChain::homogeneous(mp::mpqc_from_mpi(&rep));
    let mut worst_rep: f64 = 0.0;
    let mut rho_n = linalg::eye(1);
    for n in 1..=2 {
        rho_n = linalg::kron(&rho_n, &rho);
        let want = linalg::kron(&rho_n, &linalg::eye(2usize.pow(n as u32)));
        let r = diff(&e2s(oracle::choi_state(&rchain, n), "replacement")?, &want);
        ensure(r <= 1e-10, || format!("replacement Choi at N={n}: {r:.2e}"))?;
        worst_rep = worst_rep.max(r);
    }
    Ok(format!(
        "{} fixtures, lp {worst_lp:.1e}, min eigenvalue {min_ev:.1e}, TP {worst_tp:.1e}, GHZ {worst_ghz:.1e}, replacement {worst_rep:.1e}",
        fixtures.len()
    ))
}

fn random_tensor(dims: &[usize], labels: &[String], rng: &mut ChaCha8Rng) -> DenseTensor {
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| linalg::random_normal(rng)).collect();
    DenseTensor::from_parts(dims.to_vec(), labels.to_vec(), data).unwrap()
}

fn oracle_cross_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut worst_ch: f64 = 0.0;
    for t in 0..20 {
        let (d, din, dout, chi) = (rng.random_range(1..=2), rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=2));
        let v = e2s(oracle::random_mpi(d, din, dout, chi, &mut rng), "random mpi")?;
        let chain = SiteChain::homogeneous(mp::mpqc_from_mpi(&v));
        let db = rng.random_range(1..=2);
        let site = e2s(MpdoTensor::from_fn(db, db, din, |_, _, _, _| linalg::random_normal(&mut rng)), "mpdo")?;
        let rho = SiteChain::homogeneous(site);
        let out = e2s(mp::apply_channel_mpdo(&chain, &rho), "apply_channel_mpdo")?;
        let fast = e2s(mp::build_mpdo_dense(&out, 3), "mpdo dense")?;
        let s = e2s(mp::build_channel_dense(&chain, 3), "channel dense")?;
        let slow = mp::apply_superop(&s, &e2s(mp::build_mpdo_dense(&rho, 3), "mpdo dense")?);
        let r = diff(&fast, &slow) / linalg::frob(&slow).max(1.0);
        ensure(r <= 1e-10, || format!("pair {t}: relative difference {r:.2e}"))?;
        worst_ch = worst_ch.max(r);
    }
    let mut worst_c: f64 = 0.0;
    for t in 0..100 {
        let rank = |rng: &mut ChaCha8Rng, hi: usize| -> Vec<usize> {
            let k = rng.random_range(0..=hi);
            (0..k).map(|_| rng.random_range(1..5)).collect()
        };
        let (fa, fb, shared) = (rank(&mut rng, 2), rank(&mut rng, 2), rank(&mut rng, 3));
        let mut adims = fa.clone();
        adims.extend_from_slice(&shared);
        let alab: Vec<String> = (0..adims.len()).map(|k| format!("a{k}")).collect();
        let mut bdims: Vec<usize> = shared.iter().rev().copied().collect();
        bdims.extend_from_slice(&fb);
        let blab: Vec<String> = (0..bdims.len()).map(|k| format!("b{k}")).collect();
        let a = random_tensor(&adims, &alab, &mut rng);
        let b = random_tensor(&bdims, &blab, &mut rng);
        let pairs: Vec<(&str, &str)> =
            (0..shared.len()).map(|k| (alab[fa.len() + k].as_str(), blab[shared.len() - 1 - k].as_str())).collect();
        let x = e2s(DenseTensor::contract(&a, &b, &pairs), "contract")?;
        let y = e2s(naive_contract(&a, &b, &pairs), "naive contract")?;
        ensure(x.dims() == y.dims(), || format!("instance {t}: shapes differ"))?;
        let m = x.data().iter().zip(y.data()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        ensure(m <= 1e-12, || format!("instance {t}: max difference {m:.2e}"))?;
        worst_c = worst_c.max(m);
    }
    Ok(format!("20 channel/MPDO pairs at N=3 {worst_ch:.1e}; 100 contractions {worst_c:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("hMPI spectral law", spectral_law),
        ("brickwork pipeline", brickwork_pipeline),
        ("light cone", light_cone),
        ("sMPI structure", smpi_structure),
        ("feedforward protocol", feedforward_protocol),
        ("amplitude amplification", amplitude_amplification),
        ("classification paths", classification_paths),
        ("channel consistency", channel_consistency),
        ("oracle cross-checks", oracle_cross_checks),
    ];
    // keep panic messages out of the report lines
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let res = match panic::catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into())),
        };
        let secs = t0.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("criterion {} {name}: PASS ({msg}) [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({msg}) [{secs:.1}s]", i + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
