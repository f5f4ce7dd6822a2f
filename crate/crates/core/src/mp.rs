//! Site tensors (MPI, MPQC, MPDO), chains and dense network builders.
//!
//! Axis conventions:
//! - MPI: `(bond_l, bond_r, in, out, pur)`; per site the output index of the
//!   dense isometry is `o·χ + k`.
//! - MPQC: `(bond_l, bond_r, in_ket, in_bra, out_ket, out_bra)`.
//! - MPDO: `(bond_l, bond_r, ket, bra)`.
//!
//! Dense operators group sites with site 1 most significant. Superoperators
//! act on row-major `vec(ρ)`, so entry `[(o, p), (i, j)]` is the coefficient of
//! `ρ_ij` in `E(ρ)_op`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ONE, ZERO};
use crate::tensor::{permuted_copy, DenseTensor};

pub const MPI_AXES: [&str; 5] = ["bond_l", "bond_r", "in", "out", "pur"];
pub const MPQC_AXES: [&str; 6] = ["bond_l", "bond_r", "in_ket", "in_bra", "out_ket", "out_bra"];
pub const MPDO_AXES: [&str; 4] = ["bond_l", "bond_r", "ket", "bra"];

const DEFAULT_MEM_CAP: usize = 1 << 26;

/// Largest number of complex entries a dense builder may allocate.
/// `MPQC_MEM_CAP` overrides the default of 2^26.
pub fn mem_cap() -> usize {
    std::env::var("MPQC_MEM_CAP")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_MEM_CAP)
}

pub(crate) fn check_cap(needed: usize) -> Result<()> {
    let cap = mem_cap();
    if needed > cap {
        return Err(Error::MemoryCap { needed, cap });
    }
    Ok(())
}

fn checked_pow(base: usize, exp: usize) -> Result<usize> {
    base.checked_pow(exp as u32)
        .ok_or(Error::MemoryCap { needed: usize::MAX, cap: mem_cap() })
}

/// Local purification tensor 𝒱 generating the isometry V_N.
#[derive(Clone, Debug, PartialEq)]
pub struct MpiTensor {
    pub d_left: usize,
    pub d_right: usize,
    pub d_in: usize,
    pub d_out: usize,
    pub chi: usize,
    data: DenseTensor,
}

impl MpiTensor {
    pub fn new(data: DenseTensor) -> Result<Self> {
        if data.labels().iter().map(String::as_str).ne(MPI_AXES) {
            return Err(Error::Shape(format!("MPI axes must be {MPI_AXES:?}, got {:?}", data.labels())));
        }
        if data.data().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Shape("MPI tensor has non-finite entries".into()));
        }
        let d = data.dims().to_vec();
        Ok(Self { d_left: d[0], d_right: d[1], d_in: d[2], d_out: d[3], chi: d[4], data })
    }

    /// Build from `f(m, n, i, o, k)`.
    pub fn from_fn(
        d_left: usize,
        d_right: usize,
        d_in: usize,
        d_out: usize,
        chi: usize,
        mut f: impl FnMut(usize, usize, usize, usize, usize) -> C64,
    ) -> Result<Self> {
        let t = DenseTensor::from_fn(vec![d_left, d_right, d_in, d_out, chi], MPI_AXES.to_vec(), |x| {
            f(x[0], x[1], x[2], x[3], x[4])
        })?;
        Self::new(t)
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.data
    }

    pub fn bond(&self) -> usize {
        self.d_left
    }

    pub fn is_square(&self) -> bool {
        self.d_left == self.d_right
    }

    /// Output extent per site including purification, `d_out · χ`.
    pub fn d_outpur(&self) -> usize {
        self.d_out * self.chi
    }

    pub fn entry(&self, m: usize, n: usize, i: usize, o: usize, k: usize) -> C64 {
        self.data.get(&[m, n, i, o, k])
    }

    /// Bond matrix 𝒱^{(i, y)} with `y = o·χ + k`.
    pub fn mat(&self, i: usize, y: usize) -> Mat {
        let (o, k) = (y / self.chi, y % self.chi);
        Mat::from_fn(self.d_left, self.d_right, |m, n| self.entry(m, n, i, o, k))
    }

    /// All bond matrices, indexed `[i][y]`.
    pub fn mats(&self) -> Vec<Vec<Mat>> {
        (0..self.d_in).map(|i| (0..self.d_outpur()).map(|y| self.mat(i, y)).collect()).collect()
    }

    /// All bond matrices flattened over `x = i·(d_out χ) + y`.
    pub fn kraus(&self) -> Vec<Mat> {
        self.mats().into_iter().flatten().collect()
    }

    pub fn from_mats(d_out: usize, chi: usize, mats: &[Vec<Mat>]) -> Result<Self> {
        let d_in = mats.len();
        let dl = mats[0][0].nrows();
        let dr = mats[0][0].ncols();
        if mats.iter().any(|row| row.len() != d_out * chi) {
            return Err(Error::Shape("from_mats: wrong number of output matrices".into()));
        }
        Self::from_fn(dl, dr, d_in, d_out, chi, |m, n, i, o, k| mats[i][o * chi + k][(m, n)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { data: self.data.scale(s), ..self.clone() }
    }

    /// Conjugate every bond matrix by an invertible `g`: 𝒱 ↦ g 𝒱 g⁻¹.
    pub fn gauge(&self, g: &Mat, g_inv: &Mat) -> Result<Self> {
        let mats: Vec<Vec<Mat>> = self
            .mats()
            .into_iter()
            .map(|row| row.into_iter().map(|a| linalg::matmul(&linalg::matmul(g, &a), g_inv)).collect())
            .collect();
        Self::from_mats(self.d_out, self.chi, &mats)
    }

    pub(crate) fn as_mpo_site(&self) -> MpoSite {
        // A_cat[m, (y, i, n)]
        let perm = self.data.permute(&["bond_l", "out", "pur", "in", "bond_r"]).unwrap();
        MpoSite {
            dl: self.d_left,
            dr: self.d_right,
            rows: self.d_outpur(),
            cols: self.d_in,
            a: linalg::from_vec(self.d_left, self.d_outpur() * self.d_in * self.d_right, perm.data()),
        }
    }
}

/// Site tensor A^{ij,op}_{mn} of a matrix product channel.
#[derive(Clone, Debug, PartialEq)]
pub struct MpqcTensor {
    pub d_left: usize,
    pub d_right: usize,
    pub d_in: usize,
    pub d_out: usize,
    data: DenseTensor,
}

impl MpqcTensor {
    pub fn new(data: DenseTensor) -> Result<Self> {
        if data.labels().iter().map(String::as_str).ne(MPQC_AXES) {
            return Err(Error::Shape(format!("MPQC axes must be {MPQC_AXES:?}, got {:?}", data.labels())));
        }
        let d = data.dims().to_vec();
        if d[2] != d[3] || d[4] != d[5] {
            return Err(Error::Shape("MPQC ket and bra extents differ".into()));
        }
        Ok(Self { d_left: d[0], d_right: d[1], d_in: d[2], d_out: d[4], data })
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.data
    }

    pub(crate) fn as_mpo_site(&self) -> MpoSite {
        let perm = self
            .data
            .permute(&["bond_l", "out_ket", "out_bra", "in_ket", "in_bra", "bond_r"])
            .unwrap();
        MpoSite {
            dl: self.d_left,
            dr: self.d_right,
            rows: self.d_out * self.d_out,
            cols: self.d_in * self.d_in,
            a: linalg::from_vec(self.d_left, self.d_out * self.d_out * self.d_in * self.d_in * self.d_right, perm.data()),
        }
    }
}

/// Matrix product density operator site G^{ij}_{mn}.
#[derive(Clone, Debug, PartialEq)]
pub struct MpdoTensor {
    pub d_left: usize,
    pub d_right: usize,
    pub d: usize,
    data: DenseTensor,
}

impl MpdoTensor {
    pub fn new(data: DenseTensor) -> Result<Self> {
        if data.labels().iter().map(String::as_str).ne(MPDO_AXES) {
            return Err(Error::Shape(format!("MPDO axes must be {MPDO_AXES:?}, got {:?}", data.labels())));
        }
        let d = data.dims().to_vec();
        if d[2] != d[3] {
            return Err(Error::Shape("MPDO ket and bra extents differ".into()));
        }
        Ok(Self { d_left: d[0], d_right: d[1], d: d[2], data })
    }

    pub fn from_fn(
        d_left: usize,
        d_right: usize,
        d: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> C64,
    ) -> Result<Self> {
        Self::new(DenseTensor::from_fn(vec![d_left, d_right, d, d], MPDO_AXES.to_vec(), |x| {
            f(x[0], x[1], x[2], x[3])
        })?)
    }

    /// Product-state site |ψ⟩⟨ψ| with trivial bond.
    pub fn product(psi: &[C64]) -> Result<Self> {
        Self::from_fn(1, 1, psi.len(), |_, _, i, j| psi[i] * psi[j].conj())
    }

    /// Pure MPS site `a[m, n, i]` doubled into A ⊗ A*.
    pub fn from_mps(a: &DenseTensor) -> Result<Self> {
        let d = a.dims();
        if d.len() != 3 {
            return Err(Error::Shape("MPS site must have axes (bond_l, bond_r, phys)".into()));
        }
        let (dl, dr, p) = (d[0], d[1], d[2]);
        Self::from_fn(dl * dl, dr * dr, p, |m, n, i, j| {
            a.get(&[m / dl, n / dr, i]) * a.get(&[m % dl, n % dr, j]).conj()
        })
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.data
    }

    pub(crate) fn as_mpo_site(&self) -> MpoSite {
        let perm = self.data.permute(&["bond_l", "ket", "bra", "bond_r"]).unwrap();
        MpoSite {
            dl: self.d_left,
            dr: self.d_right,
            rows: self.d * self.d,
            cols: 1,
            a: linalg::from_vec(self.d_left, self.d * self.d * self.d_right, perm.data()),
        }
    }
}

/// Boundary condition closing a chain.
#[derive(Clone, Debug, PartialEq)]
pub enum Boundary {
    /// Trace over the bond.
    Periodic,
    /// `Tr(Λ · A_1 ⋯ A_N)` with Λ mapping the last right bond to the first left bond.
    Matrix(Mat),
}

/// Ordered site tensors plus boundary. A single site stands for a
/// homogeneous chain of any length.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteChain<T> {
    pub sites: Vec<T>,
    pub boundary: Boundary,
}

impl<T: Clone> SiteChain<T> {
    pub fn homogeneous(site: T) -> Self {
        Self { sites: vec![site], boundary: Boundary::Periodic }
    }

    pub fn with_boundary(sites: Vec<T>, boundary: Boundary) -> Self {
        Self { sites, boundary }
    }

    /// Site tensors for a chain of length `n`.
    pub fn expand(&self, n: usize) -> Result<Vec<T>> {
        if n == 0 {
            return Err(Error::InvalidParams("chain length must be at least 1".into()));
        }
        match self.sites.len() {
            0 => Err(Error::Shape("empty chain".into())),
            1 => Ok(vec![self.sites[0].clone(); n]),
            l if l == n => Ok(self.sites.clone()),
            l => Err(Error::Shape(format!("chain has {l} sites but length {n} requested"))),
        }
    }
}

/// Generic MPO site: A_cat[a, (r, c, b)] = A^{(r, c)}_{ab}.
#[derive(Clone, Debug)]
pub(crate) struct MpoSite {
    pub dl: usize,
    pub dr: usize,
    pub rows: usize,
    pub cols: usize,
    pub a: Mat,
}

/// Dense operator M[R, C] = Tr(Λ · Π_k A_k^{(r_k, c_k)}), site 1 most
/// significant in both R and C.
pub(crate) fn dense_mpo(sites: &[MpoSite], boundary: &Boundary) -> Result<Mat> {
    let (rows, cols, data) = dense_mpo_flat(sites, boundary)?;
    Ok(linalg::from_vec(rows, cols, &data))
}

/// Row-major buffer of the same operator with its shape.
pub(crate) fn dense_mpo_flat(sites: &[MpoSite], boundary: &Boundary) -> Result<(usize, usize, Vec<C64>)> {
    let n = sites.len();
    for k in 0..n {
        let next = &sites[(k + 1) % n];
        if k + 1 < n && sites[k].dr != next.dl {
            return Err(Error::Shape(format!("bond mismatch between sites {k} and {}", k + 1)));
        }
    }
    let d0 = sites[0].dl;
    let dlast = sites[n - 1].dr;
    match boundary {
        Boundary::Periodic if d0 != dlast => {
            return Err(Error::Shape("periodic chain needs matching first and last bonds".into()))
        }
        Boundary::Matrix(l) if l.nrows() != dlast || l.ncols() != d0 => {
            return Err(Error::Shape(format!(
                "boundary matrix is {}x{}, expected {dlast}x{d0}",
                l.nrows(),
                l.ncols()
            )))
        }
        _ => {}
    }
    let rtot = sites.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.rows));
    let ctot = sites.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.cols));
    let (rtot, ctot) = match (rtot, ctot) {
        (Some(r), Some(c)) => (r, c),
        _ => return Err(Error::MemoryCap { needed: usize::MAX, cap: mem_cap() }),
    };
    let total = rtot.checked_mul(ctot).ok_or(Error::MemoryCap { needed: usize::MAX, cap: mem_cap() })?;
    check_cap(total)?;

    // Cut the ring in two, contract each half with both bonds open, and join
    // them with one product: O(total·D²) instead of a sweep per bond index.
    let h = n.div_ceil(2);
    let (left, right) = (&sites[..h], &sites[h..]);
    let (a, r1, c1) = open_segment(left)?;
    let dm = left[h - 1].dr;
    // a rows (a0, R1, C1), cols b
    let (b, r2, c2) = match right.is_empty() {
        true => (linalg::eye(dm), 1, 1),
        false => open_segment(right)?,
    };
    // b rows (b, R2, C2), cols c; fold the boundary so cols become a0
    let b = match boundary {
        Boundary::Periodic => b,
        Boundary::Matrix(l) => linalg::matmul(&b, l),
    };
    let (t1, t2) = (r1 * c1, r2 * c2);
    check_cap(t1.saturating_mul(d0 * dm))?;
    check_cap(t2.saturating_mul(d0 * dm))?;
    // Ã[T1, (a0, b)] and B̃[(a0, b), T2]
    let at = permuted_copy(&linalg::to_vec(&a), &[t1, d0, dm], &[dm, t1 * dm, 1]);
    let bt = permuted_copy(&linalg::to_vec(&b), &[d0, dm, t2], &[1, t2 * d0, d0]);
    let joined = linalg::matmul(&linalg::from_vec(t1, d0 * dm, &at), &linalg::from_vec(d0 * dm, t2, &bt));
    // [R1, C1, R2, C2] -> [R1, R2, C1, C2]
    let data = permuted_copy(&linalg::to_vec(&joined), &[r1, r2, c1, c2], &[c1 * t2, c2, t2, 1]);
    Ok((rtot, ctot, data))
}

/// Open-bond product of a segment: rows (a0, R, C), columns the last bond.
fn open_segment(sites: &[MpoSite]) -> Result<(Mat, usize, usize)> {
    let d0 = sites[0].dl;
    let mut p = linalg::eye(d0);
    let (mut rk, mut ck) = (d0, 1usize);
    for s in sites {
        check_cap(rk.saturating_mul(ck).saturating_mul(s.rows * s.cols).saturating_mul(s.dr))?;
        let prod = &p * &s.a; // (rk·ck) × (rows·cols·dr)
        let flat = linalg::to_vec(&prod);
        // [rk, ck, rows, cols, dr] -> [rk, rows, ck, cols, dr]
        let src_dims = [rk, ck, s.rows, s.cols, s.dr];
        let mut st = [1usize; 5];
        for k in (0..4).rev() {
            st[k] = st[k + 1] * src_dims[k + 1];
        }
        let dims = [rk, s.rows, ck, s.cols, s.dr];
        let src_strides = [st[0], st[2], st[1], st[3], st[4]];
        let data = permuted_copy(&flat, &dims, &src_strides);
        rk *= s.rows;
        ck *= s.cols;
        p = linalg::from_vec(rk * ck, s.dr, &data);
    }
    Ok((p, rk / d0, ck))
}

/// Regroup a dense matrix whose rows are `N` interleaved pairs `(a_1 b_1 a_2 b_2 …)`
/// into `(a_1 … a_N, b_1 … b_N)`; likewise for columns.
pub(crate) fn deinterleave(m: &Mat, da: usize, db: usize, ca: usize, cb: usize, n: usize) -> Mat {
    let mut dims = Vec::new();
    for _ in 0..n {
        dims.push(da);
        dims.push(db);
    }
    for _ in 0..n {
        dims.push(ca);
        dims.push(cb);
    }
    let r = dims.len();
    let mut st = vec![1usize; r];
    for k in (0..r - 1).rev() {
        st[k] = st[k + 1] * dims[k + 1];
    }
    let mut perm = Vec::new();
    for k in 0..n {
        perm.push(2 * k);
    }
    for k in 0..n {
        perm.push(2 * k + 1);
    }
    for k in 0..n {
        perm.push(2 * n + 2 * k);
    }
    for k in 0..n {
        perm.push(2 * n + 2 * k + 1);
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let src: Vec<usize> = perm.iter().map(|&p| st[p]).collect();
    let data = permuted_copy(&linalg::to_vec(m), &new_dims, &src);
    linalg::from_vec(m.nrows(), m.ncols(), &data)
}

/// Dense V_N: rows are per-site `(o, k)` outputs, columns per-site inputs.
pub fn build_isometry(chain: &SiteChain<MpiTensor>, n: usize) -> Result<Mat> {
    let sites = chain.expand(n)?;
    check_uniform_mpi(&sites)?;
    let rows = checked_pow(sites[0].d_outpur(), n)?;
    let cols = checked_pow(sites[0].d_in, n)?;
    check_cap(rows.saturating_mul(cols))?;
    let mpo: Vec<MpoSite> = sites.iter().map(MpiTensor::as_mpo_site).collect();
    dense_mpo(&mpo, &chain.boundary)
}

fn check_uniform_mpi(sites: &[MpiTensor]) -> Result<()> {
    let s0 = &sites[0];
    if sites.iter().any(|s| s.d_in != s0.d_in || s.d_out != s0.d_out || s.chi != s0.chi) {
        return Err(Error::Shape("physical extents must be uniform along the chain".into()));
    }
    Ok(())
}

pub fn build_isometry_homogeneous(v: &MpiTensor, n: usize) -> Result<Mat> {
    build_isometry(&SiteChain::homogeneous(v.clone()), n)
}

/// Dense superoperator S[(o, p), (i, j)] of a channel chain.
pub fn build_channel_dense(chain: &SiteChain<MpqcTensor>, n: usize) -> Result<Mat> {
    let sites = chain.expand(n)?;
    let (din, dout) = (sites[0].d_in, sites[0].d_out);
    if sites.iter().any(|s| s.d_in != din || s.d_out != dout) {
        return Err(Error::Shape("physical extents must be uniform along the chain".into()));
    }
    let rows = checked_pow(dout * dout, n)?;
    let cols = checked_pow(din * din, n)?;
    check_cap(rows.saturating_mul(cols))?;
    let mpo: Vec<MpoSite> = sites.iter().map(MpqcTensor::as_mpo_site).collect();
    let m = dense_mpo(&mpo, &chain.boundary)?;
    Ok(deinterleave(&m, dout, dout, din, din, n))
}

/// Dense density matrix of an MPDO chain.
pub fn build_mpdo_dense(chain: &SiteChain<MpdoTensor>, n: usize) -> Result<Mat> {
    let sites = chain.expand(n)?;
    let d = sites[0].d;
    if sites.iter().any(|s| s.d != d) {
        return Err(Error::Shape("physical extents must be uniform along the chain".into()));
    }
    check_cap(checked_pow(d * d, n)?)?;
    let mpo: Vec<MpoSite> = sites.iter().map(MpdoTensor::as_mpo_site).collect();
    let m = dense_mpo(&mpo, &chain.boundary)?; // d^{2N} × 1, interleaved (i1 j1 i2 j2 …)
    let r = deinterleave(&m, d, d, 1, 1, n);
    let dn = checked_pow(d, n)?;
    Ok(linalg::from_vec(dn, dn, &linalg::to_vec(&r)))
}

/// Doubled tensor of Def. 1: A^{ij,op}_{(m m'),(n n')} = Σ_k 𝒱^{(i,o,k)}_{mn} conj 𝒱^{(j,p,k)}_{m'n'}.
pub fn mpqc_from_mpi(v: &MpiTensor) -> MpqcTensor {
    let (dl, dr, di, dout, chi) = (v.d_left, v.d_right, v.d_in, v.d_out, v.chi);
    let t = DenseTensor::from_fn(vec![dl * dl, dr * dr, di, di, dout, dout], MPQC_AXES.to_vec(), |x| {
        let (m, mp) = (x[0] / dl, x[0] % dl);
        let (n, np) = (x[1] / dr, x[1] % dr);
        let mut s = ZERO;
        for k in 0..chi {
            s += v.entry(m, n, x[2], x[4], k) * v.entry(mp, np, x[3], x[5], k).conj();
        }
        s
    })
    .expect("valid MPQC shape");
    MpqcTensor::new(t).expect("valid MPQC axes")
}

/// Group `q` consecutive sites: 𝒱'^{(I,O,K)} = Π_s 𝒱^{(i_s,o_s,k_s)} with
/// mixed-radix I, O, K (first site most significant).
pub fn block(v: &MpiTensor, q: usize) -> Result<MpiTensor> {
    if q == 0 {
        return Err(Error::InvalidParams("blocking factor must be at least 1".into()));
    }
    if q == 1 {
        return Ok(v.clone());
    }
    if !v.is_square() {
        return Err(Error::Shape("blocking needs equal left and right bonds".into()));
    }
    let (din, dout, chi) = (v.d_in, v.d_out, v.chi);
    let din_q = checked_pow(din, q)?;
    let dout_q = checked_pow(dout, q)?;
    let chi_q = checked_pow(chi, q)?;
    let dd = v.d_left;
    check_cap(din_q.saturating_mul(dout_q).saturating_mul(chi_q).saturating_mul(dd * dd))?;
    let mats = v.mats();
    let mut out: Vec<Vec<Mat>> = vec![vec![linalg::zeros(dd, dd); dout_q * chi_q]; din_q];
    for (ii, row) in out.iter_mut().enumerate() {
        for oo in 0..dout_q {
            for kk in 0..chi_q {
                let mut acc = linalg::eye(dd);
                for s in 0..q {
                    let sh = q - 1 - s;
                    let i = (ii / din.pow(sh as u32)) % din;
                    let o = (oo / dout.pow(sh as u32)) % dout;
                    let k = (kk / chi.pow(sh as u32)) % chi;
                    acc = linalg::matmul(&acc, &mats[i][o * chi + k]);
                }
                row[oo * chi_q + kk] = acc;
            }
        }
    }
    MpiTensor::from_mats(dout_q, chi_q, &out)
}

/// Row permutation taking the dense isometry of a `q`-blocked tensor on `n`
/// sites (per blocked site `(O, K)`) to the unblocked ordering on `q·n` sites
/// (per site `(o, k)`). Returns `perm` with `unblocked_row = perm[blocked_row]`.
pub fn blocked_row_order(d_out: usize, chi: usize, q: usize, n: usize) -> Vec<usize> {
    let per_block = (d_out * chi).pow(q as u32);
    let total = per_block.pow(n as u32);
    let mut perm = Vec::with_capacity(total);
    for row in 0..total {
        let mut dst = 0usize;
        for b in 0..n {
            let y = (row / per_block.pow((n - 1 - b) as u32)) % per_block;
            let (oo, kk) = (y / chi.pow(q as u32), y % chi.pow(q as u32));
            for s in 0..q {
                let sh = (q - 1 - s) as u32;
                let o = (oo / d_out.pow(sh)) % d_out;
                let k = (kk / chi.pow(sh)) % chi;
                dst = dst * (d_out * chi) + o * chi + k;
            }
        }
        perm.push(dst);
    }
    perm
}

/// Reorder the rows of a blocked dense isometry into unblocked order.
pub fn regroup_blocked(m: &Mat, d_out: usize, chi: usize, q: usize, n: usize) -> Mat {
    let perm = blocked_row_order(d_out, chi, q, n);
    let mut out = linalg::zeros(m.nrows(), m.ncols());
    for (src, &dst) in perm.iter().enumerate() {
        for c in 0..m.ncols() {
            out[(dst, c)] = m[(src, c)];
        }
    }
    out
}

/// Site-wise action of a channel on an MPDO:
/// G'^{op}_{(a m),(b n)} = Σ_ij A^{ij,op}_{ab} G^{ij}_{mn}.
pub fn apply_channel_mpdo(a: &SiteChain<MpqcTensor>, rho: &SiteChain<MpdoTensor>) -> Result<SiteChain<MpdoTensor>> {
    let n = match (a.sites.len(), rho.sites.len()) {
        (1, l) | (l, 1) => l,
        (x, y) if x == y => x,
        (x, y) => return Err(Error::Shape(format!("chain lengths {x} and {y} differ"))),
    };
    let asites = a.expand(n)?;
    let rsites = rho.expand(n)?;
    let mut out = Vec::with_capacity(n);
    for (at, gt) in asites.iter().zip(&rsites) {
        if at.d_in != gt.d {
            return Err(Error::ExtentMismatch {
                a: "in_ket".into(),
                ea: at.d_in,
                b: "ket".into(),
                eb: gt.d,
            });
        }
        let g = gt.tensor().clone().relabel("bond_l", "g_l")?.relabel("bond_r", "g_r")?;
        let c = DenseTensor::contract(at.tensor(), &g, &[("in_ket", "ket"), ("in_bra", "bra")])?;
        // c axes: A.bond_l, A.bond_r, out_ket, out_bra, G.bond_l, G.bond_r
        let p = c.permute_axes(&[0, 4, 1, 5, 2, 3]);
        let d = p.dims().to_vec();
        let t = DenseTensor::new(vec![d[0] * d[1], d[2] * d[3], d[4], d[5]], MPDO_AXES.to_vec(), p.into_data())?;
        out.push(MpdoTensor::new(t)?);
    }
    let boundary = match (&a.boundary, &rho.boundary) {
        (Boundary::Periodic, Boundary::Periodic) => Boundary::Periodic,
        (ba, br) => {
            let la = boundary_matrix(ba, asites[n - 1].d_right, asites[0].d_left);
            let lr = boundary_matrix(br, rsites[n - 1].d_right, rsites[0].d_left);
            Boundary::Matrix(linalg::kron(&la, &lr))
        }
    };
    Ok(SiteChain { sites: out, boundary })
}

fn boundary_matrix(b: &Boundary, rows: usize, cols: usize) -> Mat {
    match b {
        Boundary::Periodic => Mat::from_fn(rows, cols, |i, j| if i == j { ONE } else { ZERO }),
        Boundary::Matrix(l) => l.clone(),
    }
}

/// Apply a dense superoperator to a dense density matrix.
pub fn apply_superop(s: &Mat, rho: &Mat) -> Mat {
    let vec_in = linalg::to_vec(rho);
    let out = linalg::mat_vec(s, &vec_in);
    let d = (out.len() as f64).sqrt().round() as usize;
    linalg::from_vec(d, d, &out)
}

/// Superoperator of ρ ↦ Tr_pur[V ρ V†] for a dense isometry on `n` sites with
/// rows `(o, k)` per site.
pub fn dilation_superop(v: &Mat, d_in: usize, d_out: usize, chi: usize, n: usize) -> Result<Mat> {
    let dout_n = checked_pow(d_out, n)?;
    let chi_n = checked_pow(chi, n)?;
    let din_n = checked_pow(d_in, n)?;
    if v.ncols() != din_n || v.nrows() != dout_n * chi_n {
        return Err(Error::Shape("dilation_superop: isometry shape does not match extents".into()));
    }
    check_cap((dout_n * dout_n).saturating_mul(din_n * din_n))?;
    // rows regrouped to (o_1..o_N, k_1..k_N)
    let vr = deinterleave(v, d_out, chi, d_in, 1, n);
    let mut s = linalg::zeros(dout_n * dout_n, din_n * din_n);
    for o in 0..dout_n {
        for p in 0..dout_n {
            for i in 0..din_n {
                for j in 0..din_n {
                    let mut acc = ZERO;
                    for k in 0..chi_n {
                        acc += vr[(o * chi_n + k, i)] * vr[(p * chi_n + k, j)].conj();
                    }
                    s[(o * dout_n + p, i * din_n + j)] = acc;
                }
            }
        }
    }
    Ok(s)
}

pub fn c_real(x: f64) -> C64 {
    C64::new(x, 0.0)
}
