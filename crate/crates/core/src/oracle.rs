//! Dense brute-force ground truth: fixtures, Choi matrices, CP/TP checks and
//! local-purification consistency.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ONE, ZERO};
use crate::mp::{self, MpiTensor, MpqcTensor, SiteChain};

/// Certificate every fixture ships with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedCertificate {
    pub hmpi: bool,
    pub c: usize,
    pub g: usize,
    pub m: Vec<usize>,
}

impl ExpectedCertificate {
    fn hmpi() -> Self {
        Self { hmpi: true, c: 1, g: 1, m: vec![1] }
    }
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub tensor: MpiTensor,
    pub expected: ExpectedCertificate,
}

/// Shape of a random two-layer circuit: a single-site isometry u: d_in → (r, ℓ)
/// followed by two-site isometries v: (r, ℓ) → (a, b) straddling each bond,
/// with a·b = d_out·χ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrickParams {
    pub d_in: usize,
    pub d_out: usize,
    pub chi: usize,
    pub r: usize,
    pub l: usize,
    pub a: usize,
    pub b: usize,
}

impl BrickParams {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        if [p.d_in, p.d_out, p.chi, p.r, p.l, p.a, p.b].contains(&0) {
            return Err(Error::InvalidParams("brickwork extents must be positive".into()));
        }
        if p.a * p.b != p.d_out * p.chi {
            return Err(Error::InvalidParams(format!("a·b = {} must equal d_out·χ = {}", p.a * p.b, p.d_out * p.chi)));
        }
        if p.r * p.l < p.d_in {
            return Err(Error::InvalidParams("r·ℓ must be at least d_in".into()));
        }
        if p.r * p.l > p.a * p.b {
            return Err(Error::InvalidParams("r·ℓ must not exceed d_out·χ".into()));
        }
        Ok(())
    }

    /// Bond dimension of the generated tensor (generic rank of the split v).
    pub fn bond(&self) -> usize {
        (self.r * self.a).min(self.l * self.b)
    }
}

/// Parameter sets with D ≤ 4, d ≤ 3, χ ≤ 2 used by the randomized suites.
pub const BRICK_FAMILY: [BrickParams; 6] = [
    BrickParams { d_in: 2, d_out: 2, chi: 2, r: 2, l: 1, a: 2, b: 2 },
    BrickParams { d_in: 2, d_out: 2, chi: 2, r: 2, l: 2, a: 2, b: 2 },
    BrickParams { d_in: 2, d_out: 2, chi: 1, r: 2, l: 1, a: 1, b: 2 },
    BrickParams { d_in: 2, d_out: 2, chi: 2, r: 1, l: 2, a: 2, b: 2 },
    BrickParams { d_in: 3, d_out: 3, chi: 1, r: 3, l: 1, a: 1, b: 3 },
    BrickParams { d_in: 3, d_out: 3, chi: 2, r: 2, l: 2, a: 2, b: 3 },
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FixtureSpec {
    Ident { d: usize },
    Shift { d: usize },
    Ghz2,
    RandomBrickworkHmpi { params: BrickParams },
    RandomSmpi { multiplicities: Vec<usize>, block: BrickParams, scramble: bool },
    Replacement { d_in: usize, d_out: usize, rank: usize },
}

pub fn make_fixture(spec: &FixtureSpec, seed: u64) -> Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec {
        FixtureSpec::Ident { d } => Ok(Fixture { tensor: ident(*d)?, expected: ExpectedCertificate::hmpi() }),
        FixtureSpec::Shift { d } => Ok(Fixture { tensor: shift(*d)?, expected: ExpectedCertificate::hmpi() }),
        FixtureSpec::Ghz2 => Ok(Fixture {
            tensor: ghz2(),
            expected: ExpectedCertificate { hmpi: false, c: 2, g: 2, m: vec![1, 1] },
        }),
        FixtureSpec::RandomBrickworkHmpi { params } => {
            Ok(Fixture { tensor: random_brickwork(params, &mut rng)?, expected: ExpectedCertificate::hmpi() })
        }
        FixtureSpec::RandomSmpi { multiplicities, block, scramble } => {
            random_smpi(multiplicities, block, *scramble, &mut rng)
        }
        FixtureSpec::Replacement { d_in, d_out, rank } => {
            let (t, _) = replacement(*d_in, *d_out, *rank, &mut rng)?;
            Ok(Fixture { tensor: t, expected: ExpectedCertificate::hmpi() })
        }
    }
}

fn kd(a: usize, b: usize) -> C64 {
    if a == b {
        ONE
    } else {
        ZERO
    }
}

/// D = 1, χ = 1, 𝒱[i][o] = δ_io.
pub fn ident(d: usize) -> Result<MpiTensor> {
    MpiTensor::from_fn(1, 1, d, d, 1, |_, _, i, o, _| kd(i, o))
}

/// D = d, 𝒱[m][n][i][o] = δ_mi δ_no: output o_k = i_{k+1 mod N}.
pub fn shift(d: usize) -> Result<MpiTensor> {
    MpiTensor::from_fn(d, d, d, d, 1, |m, n, i, o, _| kd(m, i) * kd(n, o))
}

/// 𝒱[m][n][i][o][k] = δ_{m=n=o} δ_ik with D = d = χ = 2.
pub fn ghz2() -> MpiTensor {
    MpiTensor::from_fn(2, 2, 2, 2, 2, |m, n, i, o, k| {
        if m == n && n == o && i == k {
            ONE
        } else {
            ZERO
        }
    })
    .expect("static shape")
}

/// The permutation matrix of the cyclic shift o_k = i_{k+1 mod N} on d^N.
pub fn shift_permutation(d: usize, n: usize) -> Mat {
    let dim = d.pow(n as u32);
    let mut p = linalg::zeros(dim, dim);
    for col in 0..dim {
        let digits: Vec<usize> = (0..n).map(|s| (col / d.pow((n - 1 - s) as u32)) % d).collect();
        let row = (0..n).fold(0, |acc, s| acc * d + digits[(s + 1) % n]);
        p[(row, col)] = ONE;
    }
    p
}

/// Random circuit-generated hMPI tensor (see [`BrickParams`]).
pub fn random_brickwork<R: Rng + ?Sized>(p: &BrickParams, rng: &mut R) -> Result<MpiTensor> {
    p.validate()?;
    let rl = p.r * p.l;
    let ab = p.a * p.b;
    let u = linalg::haar_isometry(rl, p.d_in, rng); // u[(r, ℓ), j]
    let v = linalg::haar_isometry(ab, rl, rng); // v[(a, b), (r, ℓ)]
    // M[(a, r), (b, ℓ)] = v[(a, b), (r, ℓ)] split into v_L[(a, r), β] v_R[β, (b, ℓ)]
    let m = Mat::from_fn(p.a * p.r, p.b * p.l, |row, col| {
        let (a, r) = (row / p.r, row % p.r);
        let (b, l) = (col / p.l, col % p.l);
        v[(a * p.b + b, r * p.l + l)]
    });
    let d = linalg::svd(&m)?;
    let bond = d.rank(1e-12);
    let vl = Mat::from_fn(p.a * p.r, bond, |i, j| d.u[(i, j)] * d.s[j].sqrt());
    let vr = Mat::from_fn(bond, p.b * p.l, |i, j| d.v[(j, i)].conj() * d.s[i].sqrt());
    // site: 𝒱[βl][βr][j][y = b·a_dim + a] = Σ_{r,ℓ} u[(r,ℓ), j] v_R[βl, (b, ℓ)] v_L[(a, r), βr]
    MpiTensor::from_fn(bond, bond, p.d_in, p.d_out, p.chi, |bl, br, j, o, k| {
        let y = o * p.chi + k;
        let (b, a) = (y / p.a, y % p.a);
        let mut s = ZERO;
        for r in 0..p.r {
            for l in 0..p.l {
                s += u[(r * p.l + l, j)] * vr[(bl, b * p.l + l)] * vl[(a * p.r + r, br)];
            }
        }
        s
    })
}

/// Block-diagonal embedding ⊕_j μ_j 𝒱_j with shared physical extents.
pub fn direct_sum(parts: &[(MpiTensor, C64)]) -> Result<MpiTensor> {
    let first = &parts[0].0;
    if parts.iter().any(|(t, _)| t.d_in != first.d_in || t.d_out != first.d_out || t.chi != first.chi) {
        return Err(Error::InvalidParams("direct_sum needs equal physical extents".into()));
    }
    let dims: Vec<usize> = parts.iter().map(|(t, _)| t.d_left).collect();
    let total: usize = dims.iter().sum();
    let mut offs = vec![0];
    for d in &dims {
        offs.push(offs.last().unwrap() + d);
    }
    let mats: Vec<Vec<Vec<Mat>>> = parts.iter().map(|(t, _)| t.mats()).collect();
    MpiTensor::from_fn(total, total, first.d_in, first.d_out, first.chi, |m, n, i, o, k| {
        let bm = offs.iter().rposition(|&x| x <= m).unwrap();
        let bn = offs.iter().rposition(|&x| x <= n).unwrap();
        if bm != bn || bm >= parts.len() {
            return ZERO;
        }
        mats[bm][i][o * first.chi + k][(m - offs[bm], n - offs[bm])] * parts[bm].1
    })
}

/// Direct sum where block `j` writes its outputs into sector
/// `o = j·d_out' + o'`, making distinct blocks locally orthogonal.
pub fn sector_sum(blocks: &[MpiTensor], multiplicities: &[usize], phases: &[C64]) -> Result<MpiTensor> {
    let g = blocks.len();
    let b0 = &blocks[0];
    let dop = b0.d_out;
    let mut parts = Vec::new();
    for (j, b) in blocks.iter().enumerate() {
        if b.d_in != b0.d_in || b.d_out != dop || b.chi != b0.chi {
            return Err(Error::InvalidParams("sector_sum needs equal block extents".into()));
        }
        let flagged = MpiTensor::from_fn(b.d_left, b.d_right, b.d_in, g * dop, b.chi, |m, n, i, o, k| {
            if o / dop == j {
                b.entry(m, n, i, o % dop, k)
            } else {
                ZERO
            }
        })?;
        for _ in 0..multiplicities[j] {
            parts.push((flagged.clone(), phases[j]));
        }
    }
    direct_sum(&parts)
}

/// Random invertible G = U₁ diag(s) U₂ with s ∈ [0.5, 2].
pub fn random_gauge<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Mat, Mat) {
    let u1 = linalg::haar_unitary(n, rng);
    let u2 = linalg::haar_unitary(n, rng);
    let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let sinv: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
    let g = linalg::matmul(&linalg::matmul(&u1, &linalg::diag_real(&s)), &u2);
    let gi = linalg::matmul(&linalg::matmul(&linalg::adjoint(&u2), &linalg::diag_real(&sinv)), &linalg::adjoint(&u1));
    (g, gi)
}

/// Random sMPI: independent circuit-generated blocks in separate output
/// sectors, repeated with the given multiplicities and random block phases.
pub fn random_smpi<R: Rng + ?Sized>(
    multiplicities: &[usize],
    block: &BrickParams,
    scramble: bool,
    rng: &mut R,
) -> Result<Fixture> {
    if multiplicities.is_empty() || multiplicities.contains(&0) {
        return Err(Error::InvalidParams("multiplicities must be positive".into()));
    }
    let blocks: Vec<MpiTensor> =
        multiplicities.iter().map(|_| random_brickwork(block, rng)).collect::<Result<_>>()?;
    let phases: Vec<C64> = multiplicities
        .iter()
        .map(|_| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    let mut t = sector_sum(&blocks, multiplicities, &phases)?;
    if scramble {
        let (g, gi) = random_gauge(t.d_left, rng);
        t = t.gauge(&g, &gi)?;
    }
    let c: usize = multiplicities.iter().map(|m| m * m).sum();
    Ok(Fixture {
        tensor: t,
        expected: ExpectedCertificate { hmpi: c == 1, c, g: multiplicities.len(), m: multiplicities.to_vec() },
    })
}

/// Replacement channel X ↦ Tr(X) ρ^{⊗N} with a random single-site ρ of the
/// given rank: 𝒱^{(i, o, (k, k'))} = δ_ik w_{o k'} with χ = d_in · rank.
/// Returns the tensor and ρ.
pub fn replacement<R: Rng + ?Sized>(d_in: usize, d_out: usize, rank: usize, rng: &mut R) -> Result<(MpiTensor, Mat)> {
    if rank == 0 || rank > d_out {
        return Err(Error::InvalidParams("replacement rank must be in 1..=d_out".into()));
    }
    let w = linalg::random_gaussian(d_out, rank, rng);
    let nrm = linalg::frob(&w);
    let w = linalg::scale(&w, C64::new(1.0 / nrm, 0.0));
    let rho = linalg::matmul(&w, &linalg::adjoint(&w));
    let chi = d_in * rank;
    let t = MpiTensor::from_fn(1, 1, d_in, d_out, chi, |_, _, i, o, k| {
        let (ki, kp) = (k / rank, k % rank);
        if ki == i {
            w[(o, kp)]
        } else {
            ZERO
        }
    })?;
    Ok((t, rho))
}

/// Random MPI site with Gaussian entries, not isometric in general.
pub fn random_mpi<R: Rng + ?Sized>(d: usize, d_in: usize, d_out: usize, chi: usize, rng: &mut R) -> Result<MpiTensor> {
    MpiTensor::from_fn(d, d, d_in, d_out, chi, |_, _, _, _, _| linalg::random_normal(rng))
}

/// Choi matrix with the unnormalized Bell convention:
/// C[(o, i), (p, j)] = S[(o, p), (i, j)].
pub fn choi_from_superop(s: &Mat, d_out_n: usize, d_in_n: usize) -> Mat {
    Mat::from_fn(d_out_n * d_in_n, d_out_n * d_in_n, |row, col| {
        let (o, i) = (row / d_in_n, row % d_in_n);
        let (p, j) = (col / d_in_n, col % d_in_n);
        s[(o * d_out_n + p, i * d_in_n + j)]
    })
}

pub fn choi_state(chain: &SiteChain<MpqcTensor>, n: usize) -> Result<Mat> {
    let s = mp::build_channel_dense(chain, n)?;
    let dout = chain.sites[0].d_out.pow(n as u32);
    let din = chain.sites[0].d_in.pow(n as u32);
    Ok(choi_from_superop(&s, dout, din))
}

#[derive(Clone, Debug, Serialize)]
pub struct ChoiReport {
    pub n: usize,
    pub min_eigenvalue: f64,
    pub tp_defect: f64,
    pub hermiticity_defect: f64,
    pub cp: bool,
    pub tp: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct ChoiTolerances {
    /// Relative to ‖C‖_F.
    pub cp_tol: f64,
    pub tp_tol: f64,
}

impl Default for ChoiTolerances {
    fn default() -> Self {
        Self { cp_tol: 1e-9, tp_tol: 1e-9 }
    }
}

/// CP/TP report for a dense Choi matrix with output-major row index `(o, i)`.
pub fn choi_report(c: &Mat, d_out_n: usize, d_in_n: usize, n: usize, tol: ChoiTolerances) -> Result<ChoiReport> {
    let herm = Mat::from_fn(c.nrows(), c.ncols(), |i, j| (c[(i, j)] + c[(j, i)].conj()) * 0.5);
    let hermiticity_defect = linalg::frob(&linalg::sub(c, &herm));
    let ev = linalg::herm_eigenvalues(&herm)?;
    let min_eigenvalue = ev.iter().copied().reduce(f64::min).unwrap_or(0.0);
    let cnorm = linalg::frob(c);
    // Tr_out C = I_in
    let mut tr = linalg::zeros(d_in_n, d_in_n);
    for o in 0..d_out_n {
        for i in 0..d_in_n {
            for j in 0..d_in_n {
                tr[(i, j)] += c[(o * d_in_n + i, o * d_in_n + j)];
            }
        }
    }
    let tp_defect = linalg::frob(&linalg::sub(&tr, &linalg::eye(d_in_n)));
    Ok(ChoiReport {
        n,
        min_eigenvalue,
        tp_defect,
        hermiticity_defect,
        cp: min_eigenvalue >= -tol.cp_tol * cnorm.max(1.0),
        tp: tp_defect <= tol.tp_tol,
    })
}

/// Reports for N = 1..=n_max. Passing at finite N does not certify the
/// channel for all system sizes.
pub fn cp_tp_check(chain: &SiteChain<MpqcTensor>, n_max: usize, tol: ChoiTolerances, scale: f64) -> Result<Vec<ChoiReport>> {
    (1..=n_max)
        .map(|n| {
            let c = linalg::scale(&choi_state(chain, n)?, C64::new(scale, 0.0));
            let dout = chain.sites[0].d_out.pow(n as u32);
            let din = chain.sites[0].d_in.pow(n as u32);
            choi_report(&c, dout, din, n, tol)
        })
        .collect()
}

/// ‖channel(mpqc_from_mpi(v)) − Tr_pur[V_N (·) V_N†]‖_F as superoperators.
pub fn lp_consistency(v: &MpiTensor, n: usize) -> Result<f64> {
    let a = mp::mpqc_from_mpi(v);
    let s1 = mp::build_channel_dense(&SiteChain::homogeneous(a), n)?;
    let vn = mp::build_isometry_homogeneous(v, n)?;
    let s2 = mp::dilation_superop(&vn, v.d_in, v.d_out, v.chi, n)?;
    Ok(linalg::frob(&linalg::sub(&s1, &s2)))
}

/// Trace norm of a Hermitian (or nearly Hermitian) matrix.
pub fn trace_norm(a: &Mat) -> Result<f64> {
    let d = linalg::svd(a)?;
    Ok(d.s.iter().sum())
}

/// Trace distance ½‖a − b‖₁.
pub fn trace_distance(a: &Mat, b: &Mat) -> Result<f64> {
    Ok(0.5 * trace_norm(&linalg::sub(a, b))?)
}

/// Random density matrix (Ginibre).
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Mat {
    let g = linalg::random_gaussian(d, d, rng);
    let r = linalg::matmul(&g, &linalg::adjoint(&g));
    let t = linalg::trace(&r);
    linalg::scale(&r, t.inv())
}

pub fn random_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..d).map(|_| linalg::random_normal(rng)).collect();
    let n = linalg::vnorm(&v);
    v.into_iter().map(|z| z / n).collect()
}

/// |GHZ_N⟩ on qudits of dimension `d`: (1/√d) Σ_j |j⟩^{⊗N}.
pub fn ghz_state(d: usize, n: usize) -> Vec<C64> {
    let dim = d.pow(n as u32);
    let mut v = vec![ZERO; dim];
    let rep: usize = (0..n).fold(0, |acc, _| acc * d + 1);
    for j in 0..d {
        v[j * rep] = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    }
    v
}

pub fn outer(a: &[C64], b: &[C64]) -> Mat {
    Mat::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
}
