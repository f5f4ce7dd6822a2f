//! Dense complex matrix kernels on top of `faer`.
//!
//! Everything here works on [`Mat`] (`faer::Mat<C64>`). Higher layers use the
//! labelled [`crate::tensor::DenseTensor`] and drop down to matrices only for
//! factorizations.

use faer::Side;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Mat = faer::Mat<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Relative singular-value cutoff used when no other tolerance is given.
pub const RANK_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(r: usize, c: usize) -> Mat {
    Mat::zeros(r, c)
}

pub fn eye(n: usize) -> Mat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn diag_real(d: &[f64]) -> Mat {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| if i == j { C64::new(d[i], 0.0) } else { ZERO })
}

pub fn diag(d: &[C64]) -> Mat {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| if i == j { d[i] } else { ZERO })
}

pub fn adjoint(a: &Mat) -> Mat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn transpose(a: &Mat) -> Mat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)])
}

pub fn conj(a: &Mat) -> Mat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj())
}

pub fn scale(a: &Mat, s: C64) -> Mat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)])
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    a * b
}

pub fn frob(a: &Mat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn trace(a: &Mat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Distance of `a†a` from the identity, Frobenius norm.
pub fn isometry_defect(a: &Mat) -> f64 {
    let g = matmul(&adjoint(a), a);
    frob(&sub(&g, &eye(a.ncols())))
}

pub fn from_rows(rows: &[Vec<C64>]) -> Mat {
    let r = rows.len();
    let c = if r == 0 { 0 } else { rows[0].len() };
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

pub fn column(a: &Mat, j: usize) -> Vec<C64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn from_columns(rows: usize, cols: &[Vec<C64>]) -> Mat {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Row-major flattening.
pub fn to_vec(a: &Mat) -> Vec<C64> {
    let mut v = Vec::with_capacity(a.nrows() * a.ncols());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            v.push(a[(i, j)]);
        }
    }
    v
}

/// Row-major reshape of a flat buffer.
pub fn from_vec(r: usize, c: usize, v: &[C64]) -> Mat {
    assert_eq!(v.len(), r * c);
    Mat::from_fn(r, c, |i, j| v[i * c + j])
}

pub fn mat_vec(a: &Mat, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![ZERO; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == ZERO {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Thin singular value decomposition `a = u · diag(s) · v†`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

impl Svd {
    /// Count of singular values above `tol · σ_max`.
    pub fn rank(&self, tol: f64) -> usize {
        let smax = self.s.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&x| x > tol * smax).count()
    }
}

pub fn svd(a: &Mat) -> Result<Svd> {
    let (r, cdim) = (a.nrows(), a.ncols());
    if r == 0 || cdim == 0 {
        return Ok(Svd { u: zeros(r, 0), s: vec![], v: zeros(cdim, 0) });
    }
    let dec = a.thin_svd().map_err(|e| Error::Numerical(format!("svd: {e:?}")))?;
    let k = r.min(cdim);
    let sv = dec.S().column_vector();
    let s: Vec<f64> = (0..k).map(|i| sv[i].re.max(0.0)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| s[y].partial_cmp(&s[x]).unwrap());
    let u = Mat::from_fn(r, k, |i, j| dec.U()[(i, order[j])]);
    let v = Mat::from_fn(cdim, k, |i, j| dec.V()[(i, order[j])]);
    let s = order.iter().map(|&i| s[i]).collect();
    Ok(Svd { u, s, v })
}

/// Full SVD: `v` is square (all right singular vectors).
pub fn svd_full(a: &Mat) -> Result<Svd> {
    let (r, cdim) = (a.nrows(), a.ncols());
    if r == 0 || cdim == 0 {
        return Ok(Svd { u: eye(r), s: vec![], v: eye(cdim) });
    }
    let dec = a.svd().map_err(|e| Error::Numerical(format!("svd: {e:?}")))?;
    let k = r.min(cdim);
    let sv = dec.S().column_vector();
    let mut s: Vec<f64> = (0..k).map(|i| sv[i].re.max(0.0)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| s[y].partial_cmp(&s[x]).unwrap());
    let mut uo: Vec<usize> = order.clone();
    uo.extend(k..r);
    let mut vo: Vec<usize> = order.clone();
    vo.extend(k..cdim);
    let u = Mat::from_fn(r, r, |i, j| dec.U()[(i, uo[j])]);
    let v = Mat::from_fn(cdim, cdim, |i, j| dec.V()[(i, vo[j])]);
    s = order.iter().map(|&i| s[i]).collect();
    Ok(Svd { u, s, v })
}

/// Orthonormal basis of `{x : a x = 0}` using singular values `≤ tol · σ_max`.
pub fn null_space(a: &Mat, tol: f64) -> Result<Mat> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Ok(eye(n));
    }
    let d = svd_full(a)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    let keep = d.s.iter().filter(|&&x| x > tol * smax.max(f64::MIN_POSITIVE)).count();
    let keep = if smax == 0.0 { 0 } else { keep };
    Ok(Mat::from_fn(n, n - keep, |i, j| d.v[(i, keep + j)]))
}

/// Orthonormal basis of the column space, rank decided relative to `σ_max`.
pub fn range(a: &Mat, tol: f64) -> Result<Mat> {
    let d = svd(a)?;
    let k = d.rank(tol);
    Ok(Mat::from_fn(a.nrows(), k, |i, j| d.u[(i, j)]))
}

/// Moore–Penrose pseudoinverse with relative cutoff `rank_tol`.
pub fn pinv(a: &Mat, rank_tol: f64) -> Result<Mat> {
    let d = svd(a)?;
    let k = d.rank(rank_tol);
    let mut out = zeros(a.ncols(), a.nrows());
    for t in 0..k {
        let inv = 1.0 / d.s[t];
        for i in 0..a.ncols() {
            let vi = d.v[(i, t)] * inv;
            for j in 0..a.nrows() {
                out[(i, j)] += vi * d.u[(j, t)].conj();
            }
        }
    }
    Ok(out)
}

/// Eigenvalues sorted by descending modulus with right and left eigenvectors.
///
/// Left vectors satisfy `w_k† m = λ_k w_k†`; for simple eigenvalues they are
/// scaled so that `w_k† v_k = 1`.
#[derive(Clone, Debug)]
pub struct Eig {
    pub values: Vec<C64>,
    pub right: Mat,
    pub left: Mat,
}

fn eig_raw(a: &Mat) -> Result<(Vec<C64>, Mat)> {
    let n = a.nrows();
    let dec = a.eigen().map_err(|e| Error::Numerical(format!("eigensolver: {e:?}")))?;
    let s = dec.S().column_vector();
    let vals: Vec<C64> = (0..n).map(|i| s[i]).collect();
    let vecs = Mat::from_fn(n, n, |i, j| dec.U()[(i, j)]);
    Ok((vals, vecs))
}

fn sort_desc_modulus(vals: &[C64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&x, &y| {
        let (a, b) = (vals[x], vals[y]);
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
    order
}

pub fn eigenvalues(a: &Mat) -> Result<Vec<C64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!("eig of {}x{} matrix", a.nrows(), a.ncols())));
    }
    if a.nrows() == 0 {
        return Ok(vec![]);
    }
    let vals = a.eigenvalues().map_err(|e| Error::Numerical(format!("eigensolver: {e:?}")))?;
    let order = sort_desc_modulus(&vals);
    Ok(order.iter().map(|&i| vals[i]).collect())
}

pub fn eig(a: &Mat) -> Result<Eig> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!("eig of {}x{} matrix", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    let (vals, vecs) = eig_raw(a)?;
    let order = sort_desc_modulus(&vals);
    let values: Vec<C64> = order.iter().map(|&i| vals[i]).collect();
    let mut right = Mat::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    for j in 0..n {
        let nrm = (0..n).map(|i| right[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            for i in 0..n {
                right[(i, j)] /= nrm;
            }
        }
    }
    let (lvals, lvecs) = eig_raw(&adjoint(a))?;
    // pair each eigenvalue with the closest unused conjugate eigenvalue of a†
    let mut used = vec![false; n];
    let mut left = zeros(n, n);
    for (j, &lam) in values.iter().enumerate() {
        let mut best = usize::MAX;
        let mut bd = f64::INFINITY;
        for k in 0..n {
            if used[k] {
                continue;
            }
            let dist = (lvals[k].conj() - lam).norm();
            if dist < bd {
                bd = dist;
                best = k;
            }
        }
        used[best] = true;
        for i in 0..n {
            left[(i, j)] = lvecs[(i, best)];
        }
    }
    let scale_ref = values.first().map(|v| v.norm()).unwrap_or(1.0).max(1e-300);
    for j in 0..n {
        let simple = values
            .iter()
            .enumerate()
            .all(|(k, v)| k == j || (v - values[j]).norm() > 1e-8 * scale_ref);
        let ov: C64 = (0..n).map(|i| left[(i, j)].conj() * right[(i, j)]).sum();
        if simple && ov.norm() > 1e-12 {
            let f = ov.conj().inv();
            for i in 0..n {
                left[(i, j)] *= f;
            }
        } else {
            let nrm = (0..n).map(|i| left[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            if nrm > 0.0 {
                for i in 0..n {
                    left[(i, j)] /= nrm;
                }
            }
        }
    }
    Ok(Eig { values, right, left })
}

/// Hermitian eigendecomposition, eigenvalues ascending. The input is
/// symmetrized first.
pub fn herm_eig(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((vec![], zeros(0, 0)));
    }
    let h = Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    match h.self_adjoint_eigen(Side::Lower) {
        Ok(dec) => {
            let s = dec.S().column_vector();
            let vals = (0..n).map(|i| s[i].re).collect();
            Ok((vals, Mat::from_fn(n, n, |i, j| dec.U()[(i, j)])))
        }
        Err(first) => {
            // Large, exactly sparse and highly degenerate inputs (rank-one
            // Choi matrices) can stall the QR sweeps; a fixed random
            // rotation breaks the structure without changing the spectrum.
            let q = haar_unitary(n, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed));
            let hr = matmul(&matmul(&q, &h), &adjoint(&q));
            let hr = Mat::from_fn(n, n, |i, j| (hr[(i, j)] + hr[(j, i)].conj()) * 0.5);
            let dec = hr
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Numerical(format!("hermitian eigensolver: {first:?}, then {e:?}")))?;
            let s = dec.S().column_vector();
            let vals = (0..n).map(|i| s[i].re).collect();
            let u = Mat::from_fn(n, n, |i, j| dec.U()[(i, j)]);
            Ok((vals, matmul(&adjoint(&q), &u)))
        }
    }
}

/// Eigenvalues only of a Hermitian matrix, ascending.
pub fn herm_eigenvalues(a: &Mat) -> Result<Vec<f64>> {
    let n = a.nrows();
    let h = Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    match h.self_adjoint_eigenvalues(Side::Lower) {
        Ok(v) => Ok(v),
        Err(_) => Ok(herm_eig(&h)?.0),
    }
}

/// Σ_k w_k v_k v_k† for the columns v_k of `vecs`.
fn spectral_sum(vecs: &Mat, w: &[C64]) -> Mat {
    let scaled = Mat::from_fn(vecs.nrows(), vecs.ncols(), |i, k| vecs[(i, k)] * w[k]);
    matmul(&scaled, &adjoint(vecs))
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn herm_fn(a: &Mat, f: impl Fn(f64) -> C64) -> Result<Mat> {
    let (vals, vecs) = herm_eig(a)?;
    let fv: Vec<C64> = vals.iter().map(|&l| f(l)).collect();
    Ok(spectral_sum(&vecs, &fv))
}

pub fn sqrt_psd(a: &Mat) -> Result<Mat> {
    herm_fn(a, |x| C64::new(x.max(0.0).sqrt(), 0.0))
}

/// `a^{-1/2}` for a positive definite `a`; fails when an eigenvalue drops
/// below `floor`.
pub fn inv_sqrt_pd(a: &Mat, floor: f64) -> Result<Mat> {
    let (vals, _) = herm_eig(a)?;
    if let Some(&m) = vals.first() {
        if m < floor {
            return Err(Error::Numerical(format!(
                "matrix not positive definite: smallest eigenvalue {m:.3e}"
            )));
        }
    }
    herm_fn(a, |x| C64::new(1.0 / x.sqrt(), 0.0))
}

/// `exp(i · s · h)` for Hermitian `h`.
pub fn expm_i_herm(h: &Mat, s: f64) -> Result<Mat> {
    herm_fn(h, |x| C64::from_polar(1.0, s * x))
}

/// Hermitian `h` with `exp(i h) = u` and eigenphases in `(−π, π]`.
///
/// The eigenbasis of the normal matrix `u` is taken from a generic real
/// combination of its Hermitian and anti-Hermitian parts, so degenerate
/// eigenspaces come out orthonormal.
pub fn unitary_log(u: &Mat) -> Result<Mat> {
    let n = u.nrows();
    let defect = isometry_defect(u);
    if defect > 1e-8 {
        return Err(Error::Precondition(format!("unitary_log: input not unitary (defect {defect:.2e})")));
    }
    let ud = adjoint(u);
    let gamma = std::f64::consts::SQRT_2 - 0.271;
    let k = Mat::from_fn(n, n, |i, j| {
        let re = (u[(i, j)] + ud[(i, j)]) * 0.5;
        let im = (u[(i, j)] - ud[(i, j)]) * C64::new(0.0, -0.5);
        re + im * gamma
    });
    let (_, vecs) = herm_eig(&k)?;
    let mut phases = Vec::with_capacity(n);
    for j in 0..n {
        let v = column(&vecs, j);
        let uv = mat_vec(u, &v);
        let lam = vdot(&v, &uv);
        let mut ph = lam.arg();
        if ph <= -std::f64::consts::PI + 1e-12 {
            ph = std::f64::consts::PI;
        }
        phases.push(ph);
    }
    let ph: Vec<C64> = phases.iter().map(|&p| C64::new(p, 0.0)).collect();
    Ok(spectral_sum(&vecs, &ph))
}

/// Extend a matrix with orthonormal columns to a square unitary whose
/// leading columns are the input. Candidates are standard basis vectors in
/// index order; near-dependent ones (residual norm ≤ 1e-8) are skipped.
pub fn complete_to_unitary(iso: &Mat) -> Result<Mat> {
    let (r, k) = (iso.nrows(), iso.ncols());
    if k > r {
        return Err(Error::Precondition(format!("complete_to_unitary: {r}x{k} has more columns than rows")));
    }
    let defect = isometry_defect(iso);
    if defect > 1e-8 {
        return Err(Error::Precondition(format!(
            "complete_to_unitary: input not isometric (defect {defect:.2e})"
        )));
    }
    let mut cols: Vec<Vec<C64>> = (0..k).map(|j| column(iso, j)).collect();
    let mut e = 0;
    while cols.len() < r && e < r {
        let mut v = vec![ZERO; r];
        v[e] = ONE;
        e += 1;
        for _ in 0..2 {
            for q in &cols {
                let p = vdot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= p * qi;
                }
            }
        }
        let nrm = vnorm(&v);
        if nrm <= 1e-8 {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= nrm;
        }
        cols.push(v);
    }
    if cols.len() < r {
        return Err(Error::Numerical("complete_to_unitary: candidate basis exhausted".into()));
    }
    Ok(from_columns(r, &cols))
}

/// Orthonormalize columns (two-pass modified Gram–Schmidt).
pub fn orthonormalize(a: &Mat) -> Mat {
    let r = a.nrows();
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for j in 0..a.ncols() {
        let mut v = column(a, j);
        for _ in 0..2 {
            for q in &cols {
                let p = vdot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= p * qi;
                }
            }
        }
        let nrm = vnorm(&v);
        for vi in v.iter_mut() {
            *vi /= nrm;
        }
        cols.push(v);
    }
    from_columns(r, &cols)
}

pub fn random_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_gaussian<R: Rng + ?Sized>(r: usize, c: usize, rng: &mut R) -> Mat {
    let mut m = zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            m[(i, j)] = random_normal(rng);
        }
    }
    m
}

/// Haar-distributed isometry with `cols ≤ rows`.
pub fn haar_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    assert!(cols <= rows, "haar_isometry needs cols <= rows");
    orthonormalize(&random_gaussian(rows, cols, rng))
}

pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    haar_isometry(n, n, rng)
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    let g = random_gaussian(n, n, rng);
    Mat::from_fn(n, n, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5)
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Shape("inverse of non-square matrix".into()));
    }
    let d = svd(a)?;
    if d.rank(1e-13) < n {
        return Err(Error::Numerical("inverse: matrix is singular".into()));
    }
    pinv(a, 0.0)
}

/// Nearest-unitary-free phase of a complex number, `1` for zero.
pub fn phase_of(z: C64) -> C64 {
    let n = z.norm();
    if n == 0.0 {
        ONE
    } else {
        z / n
    }
}

pub fn max_abs(a: &Mat) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svd_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_gaussian(5, 3, &mut rng);
        let d = svd(&a).unwrap();
        let rec = matmul(&matmul(&d.u, &diag_real(&d.s)), &adjoint(&d.v));
        assert!(frob(&sub(&rec, &a)) < 1e-12);
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pinv_of_diag() {
        let a = diag_real(&[2.0, 0.0]);
        let p = pinv(&a, RANK_TOL).unwrap();
        assert!((p[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!(p[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn eig_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_gaussian(6, 6, &mut rng);
        let e = eig(&a).unwrap();
        for k in 0..6 {
            let v = column(&e.right, k);
            let av = mat_vec(&a, &v);
            let r: f64 = av.iter().zip(&v).map(|(x, y)| (x - e.values[k] * y).norm_sqr()).sum::<f64>().sqrt();
            assert!(r < 1e-9 * frob(&a));
            let w = column(&e.left, k);
            assert!((vdot(&w, &v) - ONE).norm() < 1e-8);
        }
    }

    #[test]
    fn completion_of_single_column() {
        let iso = from_rows(&[vec![ONE], vec![ZERO]]);
        let u = complete_to_unitary(&iso).unwrap();
        assert!(isometry_defect(&u) < 1e-12);
        assert_eq!(u[(0, 0)], ONE);
    }

    #[test]
    fn unitary_log_of_swap() {
        let mut s = zeros(4, 4);
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            s[(i, j)] = ONE;
        }
        let h = unitary_log(&s).unwrap();
        let back = expm_i_herm(&h, 1.0).unwrap();
        assert!(frob(&sub(&back, &s)) < 1e-12);
    }
}
