//! Transfer matrices, spectral tests, fixed points, CFII gauge fixing and the
//! canonical (block) decomposition.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ONE, ZERO};
use crate::mp::{MpiTensor, MpoSite};

/// E = (1/d_in) Σ_x 𝒱^x ⊗ conj 𝒱^x. Acting on row-major `vec(X)` it is the
/// map X ↦ (1/d_in) Σ_x 𝒱^x X 𝒱^{x†}.
pub fn transfer_matrix(v: &MpiTensor) -> Mat {
    mixed_transfer_mats(&v.kraus(), &v.kraus(), v.d_in)
}

/// Mixed transfer matrix (1/d) Σ_x A^x ⊗ conj B^x.
pub fn mixed_transfer_mats(a: &[Mat], b: &[Mat], d_in: usize) -> Mat {
    let (ra, ca) = (a[0].nrows(), a[0].ncols());
    let (rb, cb) = (b[0].nrows(), b[0].ncols());
    let mut e = linalg::zeros(ra * rb, ca * cb);
    let w = 1.0 / d_in as f64;
    for (x, y) in a.iter().zip(b) {
        let k = linalg::kron(x, &linalg::conj(y));
        for j in 0..e.ncols() {
            for i in 0..e.nrows() {
                e[(i, j)] += k[(i, j)] * w;
            }
        }
    }
    e
}

pub fn mixed_transfer(a: &MpiTensor, b: &MpiTensor) -> Result<Mat> {
    if a.d_in != b.d_in || a.d_outpur() != b.d_outpur() {
        return Err(Error::Shape("mixed transfer needs matching physical extents".into()));
    }
    Ok(mixed_transfer_mats(&a.kraus(), &b.kraus(), a.d_in))
}

/// Generalized Gell-Mann matrices in the order symmetric (j<k), antisymmetric
/// (j<k), diagonal; normalized to Tr(σ_α σ_β) = d δ_αβ so that d = 2 gives the
/// Pauli matrices X, Y, Z.
pub fn gell_mann(d: usize) -> Vec<Mat> {
    let s = (d as f64 / 2.0).sqrt();
    let mut out = Vec::new();
    for j in 0..d {
        for k in j + 1..d {
            let mut m = linalg::zeros(d, d);
            m[(j, k)] = C64::new(s, 0.0);
            m[(k, j)] = C64::new(s, 0.0);
            out.push(m);
        }
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut m = linalg::zeros(d, d);
            m[(j, k)] = C64::new(0.0, -s);
            m[(k, j)] = C64::new(0.0, s);
            out.push(m);
        }
    }
    for l in 1..d {
        let f = s * (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = linalg::zeros(d, d);
        for t in 0..l {
            m[(t, t)] = C64::new(f, 0.0);
        }
        m[(l, l)] = C64::new(-f * l as f64, 0.0);
        out.push(m);
    }
    out
}

/// Doubled site blocks T^{ij} = Σ_y 𝒱^{(i,y)} ⊗ conj 𝒱^{(j,y)}, outputs traced.
pub fn doubled_blocks(v: &MpiTensor) -> Vec<Vec<Mat>> {
    mixed_doubled_blocks(v, v)
}

pub fn mixed_doubled_blocks(a: &MpiTensor, b: &MpiTensor) -> Vec<Vec<Mat>> {
    let ma = a.mats();
    let mb = b.mats();
    let d = a.d_in;
    let mut t = vec![vec![linalg::zeros(a.d_left * b.d_left, a.d_right * b.d_right); d]; d];
    for i in 0..d {
        for j in 0..d {
            for y in 0..a.d_outpur() {
                let k = linalg::kron(&ma[i][y], &linalg::conj(&mb[j][y]));
                t[i][j] = linalg::add(&t[i][j], &k);
            }
        }
    }
    t
}

/// S^α = (1/d) Σ_ij T^{ij} (σ_α)_{ji}, so that T^{ij} = E δ_ij + Σ_α S^α (σ_α)_{ij}.
pub fn sigma_operators(v: &MpiTensor) -> Vec<Mat> {
    sigma_from_blocks(&doubled_blocks(v), v.d_in)
}

pub fn sigma_from_blocks(t: &[Vec<Mat>], d: usize) -> Vec<Mat> {
    let basis = gell_mann(d);
    let (r, c) = (t[0][0].nrows(), t[0][0].ncols());
    basis
        .iter()
        .map(|s| {
            let mut acc = linalg::zeros(r, c);
            for i in 0..d {
                for j in 0..d {
                    let w = s[(j, i)] / d as f64;
                    if w != ZERO {
                        acc = linalg::add(&acc, &linalg::scale(&t[i][j], w));
                    }
                }
            }
            acc
        })
        .collect()
}

/// Largest deviation of T^{ij} from E δ_ij + Σ_α S^α (σ_α)_{ij}.
pub fn sigma_reconstruction_defect(v: &MpiTensor) -> f64 {
    let t = doubled_blocks(v);
    let e = transfer_matrix(v);
    let s = sigma_operators(v);
    let basis = gell_mann(v.d_in);
    let mut worst: f64 = 0.0;
    for i in 0..v.d_in {
        for j in 0..v.d_in {
            let mut rec = if i == j { e.clone() } else { linalg::zeros(e.nrows(), e.ncols()) };
            for (sa, sig) in s.iter().zip(&basis) {
                rec = linalg::add(&rec, &linalg::scale(sa, sig[(i, j)]));
            }
            worst = worst.max(linalg::frob(&linalg::sub(&rec, &t[i][j])));
        }
    }
    worst
}

/// Tr(E^n).
pub fn trace_power(e: &Mat, n: usize) -> C64 {
    let mut p = linalg::eye(e.nrows());
    for _ in 0..n {
        p = linalg::matmul(&p, e);
    }
    linalg::trace(&p)
}

/// Eigenvalues with the nilpotent part set exactly to zero.
///
/// A defective zero eigenvalue makes a dense eigensolver return spurious
/// values of size ε^{1/k}. The smallest k with rank(E^k) = rank(E^{k+1}) splits
/// the space into the invariant core range(E^k), on which E is invertible,
/// and a nilpotent remainder.
pub fn clean_eigenvalues(e: &Mat) -> Result<Vec<C64>> {
    let n = e.nrows();
    if n == 0 {
        return Ok(vec![]);
    }
    let scale = linalg::frob(e);
    if scale == 0.0 {
        return Ok(vec![ZERO; n]);
    }
    let rank_of = |m: &Mat| -> Result<usize> { Ok(linalg::svd(m)?.rank(1e-10)) };
    let mut pk = e.clone();
    let mut rk = rank_of(&pk)?;
    let mut steps = 1;
    loop {
        if rk == 0 {
            return Ok(vec![ZERO; n]);
        }
        let next = linalg::matmul(&pk, e);
        let rn = rank_of(&next)?;
        if rn == rk || steps >= n {
            break;
        }
        pk = next;
        rk = rn;
        steps += 1;
    }
    if rk == n {
        return linalg::eigenvalues(e);
    }
    let q = linalg::range(&pk, 1e-10)?;
    let q = if q.ncols() > rk { Mat::from_fn(n, rk, |i, j| q[(i, j)]) } else { q };
    let core = linalg::matmul(&linalg::matmul(&linalg::adjoint(&q), e), &q);
    let mut vals = linalg::eigenvalues(&core)?;
    vals.extend(std::iter::repeat_n(ZERO, n - q.ncols()));
    Ok(vals)
}

/// Fixed points and CFII data of a tensor's transfer matrix.
#[derive(Clone, Debug)]
pub struct TransferSpectrum {
    pub eigenvalues: Vec<C64>,
    pub unit_count: usize,
    pub spectral_radius: f64,
    /// Left fixed point Φ (bond matrix) in the input gauge.
    pub left_fixed: Option<Mat>,
    /// Right fixed point ρ (bond matrix) in the input gauge, ⟨Φ|ρ⟩ = 1.
    pub right_fixed: Option<Mat>,
    pub cfii: Option<Cfii>,
    /// Why CFII normalization was not possible, if it was attempted.
    pub cfii_failure: Option<String>,
}

/// Gauge `g` with 𝒱_cfii = g 𝒱 g⁻¹, Φ = I and ρ diagonal positive, Tr ρ = 1.
#[derive(Clone, Debug)]
pub struct Cfii {
    pub gauge: Mat,
    pub gauge_inv: Mat,
    pub rho_diag: Vec<f64>,
    pub tensor: MpiTensor,
}

fn apply_right(kraus: &[Mat], x: &Mat, w: f64) -> Mat {
    let mut acc = linalg::zeros(kraus[0].nrows(), kraus[0].nrows());
    for a in kraus {
        acc = linalg::add(&acc, &linalg::matmul(&linalg::matmul(a, x), &linalg::adjoint(a)));
    }
    linalg::scale(&acc, C64::new(w, 0.0))
}

fn apply_left(kraus: &[Mat], y: &Mat, w: f64) -> Mat {
    let mut acc = linalg::zeros(kraus[0].ncols(), kraus[0].ncols());
    for a in kraus {
        acc = linalg::add(&acc, &linalg::matmul(&linalg::matmul(&linalg::adjoint(a), y), a));
    }
    linalg::scale(&acc, C64::new(w, 0.0))
}

fn power_fixed(kraus: &[Mat], seed: Mat, w: f64, left: bool) -> Option<Mat> {
    let mut x = seed;
    for _ in 0..10_000 {
        let y = if left { apply_left(kraus, &x, w) } else { apply_right(kraus, &x, w) };
        let tr = linalg::trace(&y);
        if tr.norm() < 1e-300 {
            return None;
        }
        let y = linalg::scale(&y, tr.inv() * linalg::trace(&x));
        let diff = linalg::frob(&linalg::sub(&y, &x));
        x = y;
        if diff < 1e-12 {
            return Some(x);
        }
    }
    None
}

fn hermitize(a: &Mat) -> Mat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

fn mat_of_vec(v: &[C64], n: usize) -> Mat {
    linalg::from_vec(n, n, v)
}

/// Right and left eigenspaces of `e` at `lam` and the spectral projector
/// `R (L†R)⁻¹ L†` when the eigenvalue is semisimple.
pub(crate) fn spectral_projector(e: &Mat, lam: C64, tol: f64) -> Result<Option<Mat>> {
    let n = e.nrows();
    let shifted = linalg::sub(e, &linalg::scale(&linalg::eye(n), lam));
    let r = linalg::null_space(&shifted, tol)?;
    let l = linalg::null_space(&linalg::adjoint(&shifted), tol)?;
    if r.ncols() == 0 || r.ncols() != l.ncols() {
        return Ok(None);
    }
    let g = linalg::matmul(&linalg::adjoint(&l), &r);
    let sv = linalg::svd(&g)?;
    if sv.s.last().copied().unwrap_or(0.0) < 1e-10 * sv.s[0] {
        return Ok(None);
    }
    let gi = linalg::inverse(&g)?;
    Ok(Some(linalg::matmul(&linalg::matmul(&r, &gi), &linalg::adjoint(&l))))
}

/// Transfer spectrum with fixed points and, when the unit eigenvalue is
/// unique, CFII normalization.
pub fn spectrum(v: &MpiTensor, spec_tol: f64) -> Result<TransferSpectrum> {
    if !v.is_square() {
        return Err(Error::Shape("spectrum needs equal left and right bonds".into()));
    }
    let e = transfer_matrix(v);
    let eigenvalues = clean_eigenvalues(&e)?;
    let spectral_radius = eigenvalues.first().map(|z| z.norm()).unwrap_or(0.0);
    let unit_count = eigenvalues.iter().filter(|z| (z.norm() - 1.0).abs() <= spec_tol).count();
    let dd = v.d_left;
    let kraus = v.kraus();
    let w = 1.0 / v.d_in as f64;

    let mut left_fixed = None;
    let mut right_fixed = None;
    if unit_count >= 1 && spectral_radius <= 1.0 + spec_tol {
        let maxmixed = linalg::scale(&linalg::eye(dd), C64::new(1.0 / dd as f64, 0.0));
        let mut rho = power_fixed(&kraus, maxmixed.clone(), w, false);
        let mut phi = power_fixed(&kraus, linalg::eye(dd), w, true);
        if rho.is_none() || phi.is_none() {
            if let Some(p) = spectral_projector(&e, ONE, 1e-8)? {
                let vec_i = linalg::to_vec(&linalg::eye(dd));
                let rv = linalg::mat_vec(&p, &vec_i);
                let lv = linalg::mat_vec(&linalg::adjoint(&p), &vec_i);
                rho = Some(mat_of_vec(&rv, dd));
                phi = Some(mat_of_vec(&lv, dd));
            }
        }
        if let (Some(r), Some(l)) = (rho, phi) {
            let r = hermitize(&r);
            let l = hermitize(&l);
            let l = linalg::scale(&l, C64::new(dd as f64 / linalg::trace(&l).re, 0.0));
            let ov = linalg::trace(&linalg::matmul(&linalg::adjoint(&l), &r));
            let r = linalg::scale(&r, ov.inv());
            right_fixed = Some(hermitize(&r));
            left_fixed = Some(l);
        }
    }

    let mut cfii = None;
    let mut cfii_failure = None;
    if unit_count == 1 {
        match (&left_fixed, &right_fixed) {
            (Some(phi), Some(rho)) => match cfii_gauge(v, phi, rho) {
                Ok(c) => cfii = Some(c),
                Err(e) => cfii_failure = Some(e.to_string()),
            },
            _ => cfii_failure = Some("fixed points not found".into()),
        }
    }
    Ok(TransferSpectrum { eigenvalues, unit_count, spectral_radius, left_fixed, right_fixed, cfii, cfii_failure })
}

/// Gauge to Φ = I, ρ diagonal positive with unit trace.
pub fn cfii_gauge(v: &MpiTensor, phi: &Mat, rho: &Mat) -> Result<Cfii> {
    let (pe, _) = linalg::herm_eig(phi)?;
    let pmax = pe.last().copied().unwrap_or(0.0);
    if pe.first().copied().unwrap_or(0.0) <= 1e-12 * pmax.max(1e-300) {
        return Err(Error::Numerical("left fixed point is not positive definite".into()));
    }
    let x = linalg::sqrt_psd(phi)?;
    let xi = linalg::inv_sqrt_pd(phi, 1e-14)?;
    let rho1 = linalg::matmul(&linalg::matmul(&x, rho), &x);
    let (re, rv) = linalg::herm_eig(&rho1)?;
    // descending order for ρ
    let n = re.len();
    let order: Vec<usize> = (0..n).rev().collect();
    let u = Mat::from_fn(n, n, |i, j| rv[(i, order[j])]);
    let vals: Vec<f64> = order.iter().map(|&k| re[k]).collect();
    let tr: f64 = vals.iter().sum();
    if vals.last().copied().unwrap_or(0.0) <= 1e-12 * vals[0].abs().max(1e-300) || tr <= 0.0 {
        return Err(Error::Numerical(format!(
            "right fixed point not positive definite in CFII gauge (smallest eigenvalue {:.3e})",
            vals.last().copied().unwrap_or(0.0)
        )));
    }
    let rho_diag: Vec<f64> = vals.iter().map(|x| x / tr).collect();
    let gauge = linalg::matmul(&linalg::adjoint(&u), &x);
    let gauge_inv = linalg::matmul(&xi, &u);
    let tensor = v.gauge(&gauge, &gauge_inv)?;
    Ok(Cfii { gauge, gauge_inv, rho_diag, tensor })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Undetermined,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Clone, Debug)]
pub struct HmpiReport {
    pub verdict: Verdict,
    /// ‖V_N†V_N − I‖_F / √(d_in^N) for N = 1..N_max.
    pub isometry_defects: Vec<f64>,
    /// max(|ν₁ − 1|, |ν₂|) over the cleaned transfer spectrum.
    pub spectral_defect: f64,
    pub eigenvalues: Vec<C64>,
}

/// Dense V_N†V_N built as an MPO with doubled bond, cheaper than V_N itself.
pub fn gram_dense(v: &MpiTensor, n: usize) -> Result<Mat> {
    let blocks = doubled_blocks_conj_first(v);
    let dd = v.d_left * v.d_left;
    let d = v.d_in;
    // A_cat[a, (j, i, b)] = W^{(j,i)}_{ab}
    let a = Mat::from_fn(dd, d * d * dd, |r, col| {
        let b = col % dd;
        let ji = col / dd;
        blocks[ji / d][ji % d][(r, b)]
    });
    let site = MpoSite { dl: dd, dr: dd, rows: d, cols: d, a };
    let sites = vec![site; n];
    crate::mp::dense_mpo(&sites, &crate::mp::Boundary::Periodic)
}

// W^{(j,i)} = Σ_y conj 𝒱^{(j,y)} ⊗ 𝒱^{(i,y)}
fn doubled_blocks_conj_first(v: &MpiTensor) -> Vec<Vec<Mat>> {
    let m = v.mats();
    let d = v.d_in;
    let mut t = vec![vec![linalg::zeros(v.d_left * v.d_left, v.d_right * v.d_right); d]; d];
    for j in 0..d {
        for i in 0..d {
            for y in 0..v.d_outpur() {
                t[j][i] = linalg::add(&t[j][i], &linalg::kron(&linalg::conj(&m[j][y]), &m[i][y]));
            }
        }
    }
    t
}

/// Normalized defects ‖V_N†V_N − c·I‖_F / √(d_in^N), N = 1..n_max.
pub fn gram_defects(v: &MpiTensor, n_max: usize, c: f64) -> Result<Vec<f64>> {
    (1..=n_max)
        .map(|n| {
            let g = gram_dense(v, n)?;
            let dim = g.nrows();
            let diff = linalg::sub(&g, &linalg::scale(&linalg::eye(dim), C64::new(c, 0.0)));
            Ok(linalg::frob(&diff) / (dim as f64).sqrt())
        })
        .collect()
}

pub fn is_hmpi(v: &MpiTensor, n_max: usize, tol: f64) -> Result<HmpiReport> {
    let isometry_defects = gram_defects(v, n_max, 1.0)?;
    let eigenvalues = clean_eigenvalues(&transfer_matrix(v))?;
    let nu1 = eigenvalues.first().copied().unwrap_or(ZERO);
    let nu2 = eigenvalues.get(1).map(|z| z.norm()).unwrap_or(0.0);
    let spectral_defect = (nu1 - ONE).norm().max(nu2);
    let finite_ok = isometry_defects.iter().all(|&d| d <= tol);
    let verdict = if !finite_ok {
        Verdict::No
    } else if spectral_defect <= tol {
        Verdict::Yes
    } else if spectral_defect <= 10.0 * tol {
        Verdict::Undetermined
    } else {
        Verdict::No
    };
    Ok(HmpiReport { verdict, isometry_defects, spectral_defect, eigenvalues })
}

/// Canonical-form decomposition into normal blocks.
#[derive(Clone, Debug)]
pub struct BlockDecomposition {
    pub g: usize,
    /// Representative block per class with the class phase absorbed: μ_j R_j.
    pub blocks: Vec<MpiTensor>,
    pub multiplicities: Vec<usize>,
    pub phases: Vec<C64>,
    /// Phase of every copy, relative to the CFII representative R_j.
    pub copy_phases: Vec<Vec<C64>>,
    pub c: usize,
    /// gauge⁻¹ · 𝒱^x · gauge = ⊕_j ⊕_q (μ_{j,q}/μ_j) · blocks_j (plus any
    /// discarded nilpotent part).
    pub gauge: Mat,
    pub gauge_inv: Mat,
    pub radii: Vec<f64>,
    pub normal: Vec<bool>,
    /// Bond dimension carried by nilpotent pieces that do not contribute to V_N.
    pub discarded_dim: usize,
    /// Largest off-block-diagonal entry of gauge⁻¹ 𝒱 gauge that could not be
    /// removed (triangular splits).
    pub off_diagonal: f64,
    /// Largest elementwise deviation between the input and the reassembled
    /// direct sum.
    pub residual: f64,
}

impl BlockDecomposition {
    /// Whether the block-diagonal form is exact (within `tol`).
    pub fn is_block_diagonal(&self, tol: f64) -> bool {
        self.off_diagonal <= tol && self.discarded_dim == 0
    }
}

struct Leaf {
    q: Mat,
    qinv: Mat,
    mats: Vec<Mat>,
    nilpotent: bool,
}

struct Ctx {
    d_in: usize,
    tol: f64,
    rng: ChaCha8Rng,
    off_diagonal: f64,
}

fn sub_mats(mats: &[Mat], t1: &Mat, s1: &Mat) -> Vec<Mat> {
    mats.iter().map(|a| linalg::matmul(&linalg::matmul(s1, a), t1)).collect()
}

fn cols(a: &Mat, from: usize, to: usize) -> Mat {
    Mat::from_fn(a.nrows(), to - from, |i, j| a[(i, from + j)])
}

fn rows(a: &Mat, from: usize, to: usize) -> Mat {
    Mat::from_fn(to - from, a.ncols(), |i, j| a[(from + i, j)])
}

fn hstack(a: &Mat, b: &Mat) -> Mat {
    Mat::from_fn(a.nrows(), a.ncols() + b.ncols(), |i, j| if j < a.ncols() { a[(i, j)] } else { b[(i, j - a.ncols())] })
}

fn vstack(a: &Mat, b: &Mat) -> Mat {
    Mat::from_fn(a.nrows() + b.nrows(), a.ncols(), |i, j| if i < a.nrows() { a[(i, j)] } else { b[(i - a.nrows(), j)] })
}

/// Split along an invariant subspace spanned by the orthonormal columns `k`
/// (first block). Tries to find an invariant complement so the split is block
/// diagonal; otherwise keeps the orthogonal complement and records the
/// off-diagonal residue.
fn split_invariant(mats: &[Mat], k: &Mat, ctx: &mut Ctx) -> Result<(Mat, Mat, Mat, Mat)> {
    let n = k.nrows();
    let full = linalg::complete_to_unitary(k)?;
    let kp = cols(&full, k.ncols(), n);
    let a = k.ncols();
    let b = n - a;
    // in the unitary basis: B = [[B11, B12], [0, B22]]
    let mut sys_rows: Vec<Vec<C64>> = Vec::new();
    let mut rhs: Vec<C64> = Vec::new();
    let mut off = 0.0f64;
    for m in mats {
        let b11 = linalg::matmul(&linalg::matmul(&linalg::adjoint(k), m), k);
        let b12 = linalg::matmul(&linalg::matmul(&linalg::adjoint(k), m), &kp);
        let b22 = linalg::matmul(&linalg::matmul(&linalg::adjoint(&kp), m), &kp);
        off = off.max(linalg::max_abs(&b12));
        // B11 X − X B22 = −B12, vec row-major: (B11 ⊗ I − I ⊗ B22ᵀ) vec X
        let lhs = linalg::sub(&linalg::kron(&b11, &linalg::eye(b)), &linalg::kron(&linalg::eye(a), &linalg::transpose(&b22)));
        for i in 0..lhs.nrows() {
            sys_rows.push((0..lhs.ncols()).map(|j| lhs[(i, j)]).collect());
            rhs.push(-linalg::to_vec(&b12)[i]);
        }
    }
    let scale = mats.iter().map(linalg::frob).fold(0.0, f64::max).max(1e-300);
    if off <= ctx.tol * scale {
        let ti = linalg::adjoint(&full);
        return Ok((k.clone(), rows(&ti, 0, a), kp, rows(&ti, a, n)));
    }
    let sys = linalg::from_rows(&sys_rows);
    let pinv = linalg::pinv(&sys, 1e-12)?;
    let x = linalg::mat_vec(&pinv, &rhs);
    let res: Vec<C64> = linalg::mat_vec(&sys, &x).iter().zip(&rhs).map(|(p, q)| p - q).collect();
    let resn = linalg::vnorm(&res);
    let xm = linalg::from_vec(a, b, &x);
    if resn <= ctx.tol * scale * 10.0 {
        // complement columns kp + k X; inverse rows from the block triangular inverse
        let t2 = linalg::add(&kp, &linalg::matmul(k, &xm));
        let t = hstack(k, &t2);
        let ti = linalg::inverse(&t)?;
        return Ok((k.clone(), rows(&ti, 0, a), t2, rows(&ti, a, n)));
    }
    ctx.off_diagonal = ctx.off_diagonal.max(off);
    let ti = linalg::adjoint(&full);
    Ok((k.clone(), rows(&ti, 0, a), kp, rows(&ti, a, n)))
}

fn spectral_radius_of(e: &Mat) -> Result<f64> {
    Ok(clean_eigenvalues(e)?.first().map(|z| z.norm()).unwrap_or(0.0))
}

fn decompose_rec(q: Mat, qinv: Mat, mats: Vec<Mat>, ctx: &mut Ctx, out: &mut Vec<Leaf>) -> Result<()> {
    let n = q.ncols();
    let e = mixed_transfer_mats(&mats, &mats, ctx.d_in);
    let r = spectral_radius_of(&e)?;
    let escale = linalg::frob(&e).max(1e-300);
    if r <= 1e-9 * escale.max(1.0) {
        out.push(Leaf { q, qinv, mats, nilpotent: true });
        return Ok(());
    }
    if n == 1 {
        out.push(Leaf { q, qinv, mats, nilpotent: false });
        return Ok(());
    }
    let lam = C64::new(r, 0.0);
    let proj = spectral_projector(&e, lam, 1e-8)?.ok_or_else(|| {
        Error::Numerical(format!(
            "peripheral eigenvalue {r:.6} is not semisimple; block structure undetermined"
        ))
    })?;
    let vec_i = linalg::to_vec(&linalg::eye(n));
    let rho = hermitize(&mat_of_vec(&linalg::mat_vec(&proj, &vec_i), n));
    let phi = hermitize(&mat_of_vec(&linalg::mat_vec(&linalg::adjoint(&proj), &vec_i), n));

    let (pe, pv) = linalg::herm_eig(&phi)?;
    let pmax = pe.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let kdim = pe.iter().filter(|&&x| x.abs() <= 1e-9 * pmax).count();
    if kdim > 0 && kdim < n {
        let kcols: Vec<usize> = (0..n).filter(|&i| pe[i].abs() <= 1e-9 * pmax).collect();
        let kmat = Mat::from_fn(n, kdim, |i, j| pv[(i, kcols[j])]);
        return split_and_recurse(q, qinv, &mats, &kmat, ctx, out);
    }
    let (re, rv) = linalg::herm_eig(&rho)?;
    let rmax = re.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let sdim = re.iter().filter(|&&x| x.abs() > 1e-9 * rmax).count();
    if sdim > 0 && sdim < n {
        let scols: Vec<usize> = (0..n).filter(|&i| re[i].abs() > 1e-9 * rmax).collect();
        let smat = Mat::from_fn(n, sdim, |i, j| rv[(i, scols[j])]);
        return split_and_recurse(q, qinv, &mats, &smat, ctx, out);
    }
    // Φ, ρ > 0: gauge Φ to the identity; fixed points of the dual map then form
    // the commutant and its eigenspaces reduce every bond matrix.
    let x = linalg::sqrt_psd(&phi)?;
    let xi = linalg::inv_sqrt_pd(&phi, 1e-300)?;
    let gm: Vec<Mat> = mats.iter().map(|a| linalg::matmul(&linalg::matmul(&x, a), &xi)).collect();
    let eg = mixed_transfer_mats(&gm, &gm, ctx.d_in);
    let shifted = linalg::sub(&linalg::adjoint(&eg), &linalg::scale(&linalg::eye(n * n), lam));
    let fixed = linalg::null_space(&shifted, 1e-8)?;
    if fixed.ncols() <= 1 {
        out.push(Leaf { q, qinv, mats, nilpotent: false });
        return Ok(());
    }
    let mut h = linalg::zeros(n, n);
    for k in 0..fixed.ncols() {
        let y = mat_of_vec(&linalg::column(&fixed, k), n);
        let w: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut ctx.rng);
        h = linalg::add(&h, &linalg::scale(&hermitize(&y), C64::new(w, 0.0)));
    }
    let (hv, hvec) = linalg::herm_eig(&h)?;
    let hscale = hv.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut groups: Vec<Vec<usize>> = vec![vec![0]];
    for k in 1..n {
        if hv[k] - hv[k - 1] > 1e-6 * hscale {
            groups.push(vec![k]);
        } else {
            groups.last_mut().unwrap().push(k);
        }
    }
    if groups.len() == 1 {
        out.push(Leaf { q, qinv, mats, nilpotent: false });
        return Ok(());
    }
    // columns of x⁻¹ U_g and rows of U_g† x are the reducing pieces
    let base = linalg::matmul(&q, &xi);
    let base_inv = linalg::matmul(&x, &qinv);
    for grp in groups {
        let u = Mat::from_fn(n, grp.len(), |i, j| hvec[(i, grp[j])]);
        let ud = linalg::adjoint(&u);
        let sub = sub_mats(&gm, &u, &ud);
        decompose_rec(linalg::matmul(&base, &u), linalg::matmul(&ud, &base_inv), sub, ctx, out)?;
    }
    Ok(())
}

fn split_and_recurse(q: Mat, qinv: Mat, mats: &[Mat], kmat: &Mat, ctx: &mut Ctx, out: &mut Vec<Leaf>) -> Result<()> {
    let (t1, s1, t2, s2) = split_invariant(mats, kmat, ctx)?;
    let m1 = sub_mats(mats, &t1, &s1);
    let m2 = sub_mats(mats, &t2, &s2);
    decompose_rec(linalg::matmul(&q, &t1), linalg::matmul(&s1, &qinv), m1, ctx, out)?;
    decompose_rec(linalg::matmul(&q, &t2), linalg::matmul(&s2, &qinv), m2, ctx, out)?;
    Ok(())
}

/// Solve B_b^x W = μ W B_a^x for all x; returns (W, residual) for the best of
/// the candidate phases.
fn intertwiner(a: &[Mat], b: &[Mat], mu: C64) -> Result<Option<Mat>> {
    let n = a[0].nrows();
    let mut sys = linalg::zeros(a.len() * n * n, n * n);
    for (x, (ma, mb)) in a.iter().zip(b).enumerate() {
        let blk = linalg::sub(&linalg::kron(mb, &linalg::eye(n)), &linalg::scale(&linalg::kron(&linalg::eye(n), &linalg::transpose(ma)), mu));
        for i in 0..n * n {
            for j in 0..n * n {
                sys[(x * n * n + i, j)] = blk[(i, j)];
            }
        }
    }
    let ns = linalg::null_space(&sys, 1e-8)?;
    if ns.ncols() == 0 {
        return Ok(None);
    }
    let w = mat_of_vec(&linalg::column(&ns, 0), n);
    let sv = linalg::svd(&w)?;
    if sv.s.last().copied().unwrap_or(0.0) < 1e-8 * sv.s[0] {
        return Ok(None);
    }
    Ok(Some(w))
}

fn first_nonzero_phase(t: &MpiTensor) -> C64 {
    let scale = t.tensor().norm().max(1e-300);
    for z in t.tensor().data() {
        if z.norm() > 1e-8 * scale {
            return linalg::phase_of(*z);
        }
    }
    ONE
}

// Live blocks ordered by first significant basis index, nilpotent ones last.
fn sorted_leaves(v: &MpiTensor, ctx: &mut Ctx) -> Result<Vec<Leaf>> {
    let dd = v.d_left;
    let mut leaves = Vec::new();
    decompose_rec(linalg::eye(dd), linalg::eye(dd), v.kraus(), ctx, &mut leaves)?;
    let first_idx = |q: &Mat| -> usize {
        let mx = linalg::max_abs(q).max(1e-300);
        (0..q.nrows())
            .find(|&i| (0..q.ncols()).any(|j| q[(i, j)].norm() > 1e-6 * mx))
            .unwrap_or(usize::MAX)
    };
    let mut keyed: Vec<((bool, usize), Leaf)> =
        leaves.into_iter().map(|l| ((l.nilpotent, first_idx(&l.q)), l)).collect();
    keyed.sort_by_key(|(k, _)| *k);
    Ok(keyed.into_iter().map(|(_, l)| l).collect())
}

/// Decompose into normal blocks grouped by gauge-and-phase equivalence.
pub fn canonical_decompose(v: &MpiTensor, tol: f64) -> Result<BlockDecomposition> {
    if !v.is_square() {
        return Err(Error::Shape("canonical_decompose needs equal left and right bonds".into()));
    }
    let dd = v.d_left;
    let mut ctx = Ctx { d_in: v.d_in, tol, rng: ChaCha8Rng::seed_from_u64(0x5eed_b10c), off_diagonal: 0.0 };
    let leaves = sorted_leaves(v, &mut ctx)?;

    let live: Vec<usize> = (0..leaves.len()).filter(|&k| !leaves[k].nilpotent).collect();
    let discarded_dim: usize = leaves.iter().filter(|l| l.nilpotent).map(|l| l.q.ncols()).sum();
    let radii_leaf: Vec<f64> = live
        .iter()
        .map(|&k| spectral_radius_of(&mixed_transfer_mats(&leaves[k].mats, &leaves[k].mats, v.d_in)))
        .collect::<Result<_>>()?;

    // representative of each class in CFII with first nonzero entry real positive
    struct Class {
        rep: Vec<Mat>,
        members: Vec<(usize, C64, Mat)>, // leaf, phase, W with leaf = μ W rep W⁻¹
        radius: f64,
    }
    let mut classes: Vec<Class> = Vec::new();
    for (li, &k) in live.iter().enumerate() {
        let mats = &leaves[k].mats;
        let n = mats[0].nrows();
        let r = radii_leaf[li];
        let mut placed = false;
        for cl in classes.iter_mut() {
            if cl.rep[0].nrows() != n || (cl.radius - r).abs() > 1e-6 * r.max(1e-300) {
                continue;
            }
            let em = mixed_transfer_mats(&cl.rep, mats, v.d_in);
            let ev = linalg::eigenvalues(&em)?;
            let top = ev[0];
            if top.norm() <= (1.0 - 1e-6) * r {
                continue;
            }
            let ph = linalg::phase_of(top);
            for mu in [ph.conj(), ph] {
                if let Some(w) = intertwiner(&cl.rep, mats, mu)? {
                    cl.members.push((k, mu, w));
                    placed = true;
                    break;
                }
            }
            if placed {
                break;
            }
        }
        if !placed {
            let t = MpiTensor::from_mats(v.d_out, v.chi, &reshape_mats(mats, v.d_in, v.d_outpur()))?;
            let (rep, g, gi) = normalize_rep(&t)?;
            let ph = first_nonzero_phase(&rep);
            let rep = rep.scale(ph.conj());
            // leaf = ph · gi · rep · g
            let rep_mats = rep.kraus();
            classes.push(Class { rep: rep_mats, members: vec![(k, ph, gi)], radius: r });
            let _ = g;
        }
    }

    let mut blocks = Vec::new();
    let mut multiplicities = Vec::new();
    let mut phases = Vec::new();
    let mut copy_phases = Vec::new();
    let mut radii = Vec::new();
    let mut normal = Vec::new();
    let mut gauge_cols: Vec<Mat> = Vec::new();
    let mut gauge_rows: Vec<Mat> = Vec::new();
    for cl in &classes {
        let mu = cl.members[0].1;
        let rep_t = MpiTensor::from_mats(v.d_out, v.chi, &reshape_mats(&cl.rep, v.d_in, v.d_outpur()))?;
        let blk = rep_t.scale(mu);
        normal.push(normality_of_block(&rep_t)?);
        blocks.push(blk);
        multiplicities.push(cl.members.len());
        phases.push(mu);
        copy_phases.push(cl.members.iter().map(|m| m.1).collect());
        radii.push(cl.radius);
        for (k, _, w) in &cl.members {
            let wi = linalg::inverse(w)?;
            gauge_cols.push(linalg::matmul(&leaves[*k].q, w));
            gauge_rows.push(linalg::matmul(&wi, &leaves[*k].qinv));
        }
    }
    for l in leaves.iter().filter(|l| l.nilpotent) {
        gauge_cols.push(l.q.clone());
        gauge_rows.push(l.qinv.clone());
    }
    let mut gauge = Mat::zeros(dd, 0);
    for c in &gauge_cols {
        gauge = hstack(&gauge, c);
    }
    let mut gauge_inv = Mat::zeros(0, dd);
    for r in &gauge_rows {
        gauge_inv = vstack(&gauge_inv, r);
    }
    let c = multiplicities.iter().map(|m| m * m).sum();

    let mut dec = BlockDecomposition {
        g: classes.len(),
        blocks,
        multiplicities,
        phases,
        copy_phases,
        c,
        gauge,
        gauge_inv,
        radii,
        normal,
        discarded_dim,
        off_diagonal: ctx.off_diagonal,
        residual: 0.0,
    };
    dec.residual = reassembly_residual(v, &dec)?;
    Ok(dec)
}

fn reshape_mats(flat: &[Mat], d_in: usize, dy: usize) -> Vec<Vec<Mat>> {
    (0..d_in).map(|i| (0..dy).map(|y| flat[i * dy + y].clone()).collect()).collect()
}

/// CFII representative when the block is normal, otherwise Φ = I gauge only.
/// Returns (rep, g, g⁻¹) with rep = g · t · g⁻¹.
fn normalize_rep(t: &MpiTensor) -> Result<(MpiTensor, Mat, Mat)> {
    let n = t.d_left;
    let e = transfer_matrix(t);
    let r = spectral_radius_of(&e)?;
    let scaled = t.scale(C64::new(1.0 / r.sqrt(), 0.0));
    let sp = spectrum(&scaled, 1e-8)?;
    if let Some(c) = sp.cfii {
        let rep = t.gauge(&c.gauge, &c.gauge_inv)?;
        return Ok((rep, c.gauge, c.gauge_inv));
    }
    if let Some(p) = spectral_projector(&e, C64::new(r, 0.0), 1e-8)? {
        let vec_i = linalg::to_vec(&linalg::eye(n));
        let phi = hermitize(&mat_of_vec(&linalg::mat_vec(&linalg::adjoint(&p), &vec_i), n));
        if let (Ok(x), Ok(xi)) = (linalg::sqrt_psd(&phi), linalg::inv_sqrt_pd(&phi, 1e-300)) {
            let rep = t.gauge(&x, &xi)?;
            return Ok((rep, x, xi));
        }
    }
    Ok((t.clone(), linalg::eye(n), linalg::eye(n)))
}

fn normality_of_block(t: &MpiTensor) -> Result<bool> {
    let ev = clean_eigenvalues(&transfer_matrix(t))?;
    let r = ev.first().map(|z| z.norm()).unwrap_or(0.0);
    if r <= 0.0 {
        return Ok(false);
    }
    let peripheral = ev.iter().filter(|z| (z.norm() - r).abs() <= 1e-8 * r).count();
    Ok(peripheral == 1)
}

/// Direct sum ⊕_j ⊕_q μ_{j,q} R_j (R_j = blocks_j / μ_j), zero-padded for
/// discarded dimensions.
pub fn block_sum_mats(dec: &BlockDecomposition) -> Vec<Mat> {
    let total = dec.gauge.ncols();
    let nx = dec.blocks[0].kraus().len();
    let mut out = vec![linalg::zeros(total, total); nx];
    let mut off = 0;
    for (j, b) in dec.blocks.iter().enumerate() {
        let kr = b.kraus();
        let n = b.d_left;
        for &ph in &dec.copy_phases[j] {
            let rel = ph / dec.phases[j];
            for (x, m) in kr.iter().enumerate() {
                for r in 0..n {
                    for c in 0..n {
                        out[x][(off + r, off + c)] = m[(r, c)] * rel;
                    }
                }
            }
            off += n;
        }
    }
    out
}

/// max_x,entries |𝒱^x − gauge · (⊕ blocks) · gauge⁻¹|.
pub fn reassembly_residual(v: &MpiTensor, dec: &BlockDecomposition) -> Result<f64> {
    if dec.blocks.is_empty() {
        return Ok(v.kraus().iter().map(linalg::max_abs).fold(0.0, f64::max));
    }
    let sum = block_sum_mats(dec);
    let mut worst: f64 = 0.0;
    for (a, s) in v.kraus().iter().zip(&sum) {
        let rec = linalg::matmul(&linalg::matmul(&dec.gauge, s), &dec.gauge_inv);
        worst = worst.max(linalg::max_abs(&linalg::sub(a, &rec)));
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct NormalityReport {
    pub normal: bool,
    pub irreducible: bool,
    pub peripheral_count: usize,
    pub spectral_radius: f64,
    /// Projector onto an invariant subspace when reducible.
    pub witness: Option<Mat>,
}

pub fn normality_test(v: &MpiTensor, tol: f64) -> Result<NormalityReport> {
    let ev = clean_eigenvalues(&transfer_matrix(v))?;
    let r = ev.first().map(|z| z.norm()).unwrap_or(0.0);
    let peripheral_count = if r > 0.0 { ev.iter().filter(|z| (z.norm() - r).abs() <= tol.max(1e-12) * r).count() } else { ev.len() };
    let mut ctx = Ctx { d_in: v.d_in, tol, rng: ChaCha8Rng::seed_from_u64(0x5eed_b10c), off_diagonal: 0.0 };
    let irreducible;
    let mut witness = None;
    if r == 0.0 {
        irreducible = false;
    } else {
        let leaves = sorted_leaves(v, &mut ctx)?;
        irreducible = leaves.len() == 1 && !leaves[0].nilpotent;
        if !irreducible {
            // orthogonal projector onto the span of the first piece
            let q = linalg::orthonormalize(&leaves[0].q);
            witness = Some(linalg::matmul(&q, &linalg::adjoint(&q)));
        }
    }
    Ok(NormalityReport { normal: irreducible && peripheral_count == 1, irreducible, peripheral_count, spectral_radius: r, witness })
}

/// Whether `p` is invariant for every bond matrix: ‖(I − P) 𝒱^x P‖ summed.
pub fn invariance_defect(v: &MpiTensor, p: &Mat) -> f64 {
    let n = p.nrows();
    let ip = linalg::sub(&linalg::eye(n), p);
    v.kraus()
        .iter()
        .map(|a| linalg::frob(&linalg::matmul(&linalg::matmul(&ip, a), p)))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gell_mann_normalization() {
        for d in 2..5 {
            let b = gell_mann(d);
            assert_eq!(b.len(), d * d - 1);
            for (a, x) in b.iter().enumerate() {
                assert!(linalg::trace(x).norm() < 1e-14);
                for (c, y) in b.iter().enumerate() {
                    let t = linalg::trace(&linalg::matmul(x, y));
                    let want = if a == c { d as f64 } else { 0.0 };
                    assert!((t - C64::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cleaned_spectrum_of_jordan_block() {
        let mut j = linalg::zeros(3, 3);
        j[(0, 1)] = ONE;
        j[(1, 2)] = ONE;
        let ev = clean_eigenvalues(&j).unwrap();
        assert!(ev.iter().all(|z| *z == ZERO));
    }
}
