//! Continuous deformation between two homogeneous purifiable channels.
//!
//! Both tensors are first brought to common input/output extents (extra
//! inputs routed into the purification, extra outputs fixed to |0⟩) and a
//! common purification extent. The path tensor is
//! 𝒱(s) = U(s) · (𝒱̃₁ ⊗ 𝒱̃₂) · W(s) (· ⊗ |0⟩), where U and W interpolate from
//! the identity to the block swaps of the two output and input factors.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ZERO};
use crate::mp::{self, MpiTensor};
use crate::oracle;
use crate::transfer::{self, Verdict};

/// Extents above this are refused (per-site output extent of the path tensor).
const PAD_CAP: usize = 1 << 12;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Coprime (p₁, p₂) with a·p₁ = b·p₂.
fn coprime_padding(a: usize, b: usize) -> (usize, usize) {
    let g = gcd(a, b);
    (b / g, a / g)
}

#[derive(Clone, Debug, Serialize)]
pub struct PathSample {
    pub s: f64,
    /// ‖V_N(s)†V_N(s) − I‖_F for N = 1..3.
    pub isometry_defects: Vec<f64>,
    pub spectral_defect: f64,
    /// ‖𝒱(s) − 𝒱(s_prev)‖_F (0 for the first sample).
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct DeformationPath {
    pub v1: MpiTensor,
    pub v2: MpiTensor,
    /// Endpoints after the input/output extension.
    pub ext1: MpiTensor,
    pub ext2: MpiTensor,
    pub chi1: usize,
    pub chi2: usize,
    /// Purification padding: χ̃₁ p₁'' = χ̃₂ p₂''.
    pub pur_pad: (usize, usize),
    /// Input padding (p₁, p₂) and output padding (p₁', p₂').
    pub in_pad: (usize, usize),
    pub out_pad: (usize, usize),
    pub samples: Vec<f64>,
    pub tensors: Vec<MpiTensor>,
    pub reports: Vec<PathSample>,
    pub endpoint_defects: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathReport {
    pub chi: (usize, usize),
    pub pur_pad: (usize, usize),
    pub in_pad: (usize, usize),
    pub out_pad: (usize, usize),
    pub samples: Vec<PathSample>,
    pub max_isometry_defect: f64,
    pub max_step: f64,
    pub length: f64,
    pub endpoint_defects: Option<(f64, f64)>,
}

impl DeformationPath {
    pub fn report(&self) -> PathReport {
        let max_isometry_defect =
            self.reports.iter().flat_map(|r| r.isometry_defects.iter().copied()).fold(0.0, f64::max);
        PathReport {
            chi: (self.chi1, self.chi2),
            pur_pad: self.pur_pad,
            in_pad: self.in_pad,
            out_pad: self.out_pad,
            samples: self.reports.clone(),
            max_isometry_defect,
            max_step: self.reports.iter().map(|r| r.step).fold(0.0, f64::max),
            length: self.reports.iter().map(|r| r.step).sum(),
            endpoint_defects: self.endpoint_defects,
        }
    }
}

/// Extra input of extent `p` goes straight to the purification; extra
/// output of extent `p_out` is fixed to |0⟩.
/// Purification index is (k, e), physical output (o, f).
pub fn extend_tensor(v: &MpiTensor, p: usize, p_out: usize) -> Result<MpiTensor> {
    let (d_out, chi) = (v.d_out * p_out, v.chi * p);
    let mats = v.mats();
    MpiTensor::from_fn(v.d_left, v.d_right, v.d_in * p, d_out, chi, |m, n, ie, of, ke| {
        let (i, e) = (ie / p, ie % p);
        let (o, f) = (of / p_out, of % p_out);
        let (k, e2) = (ke / p, ke % p);
        if f != 0 || e != e2 {
            return ZERO;
        }
        mats[i][o * v.chi + k][(m, n)]
    })
}

/// Permutation matrix swapping the two factors of a `d ⊗ d` space.
fn swap(d: usize) -> Mat {
    Mat::from_fn(d * d, d * d, |r, c| if r == (c % d) * d + c / d { linalg::ONE } else { ZERO })
}

/// Build the path with `n_samples` equally spaced points in [0, 1].
pub fn build_path(v1: &MpiTensor, v2: &MpiTensor, n_samples: usize) -> Result<DeformationPath> {
    if n_samples < 2 {
        return Err(Error::InvalidParams("a path needs at least two samples".into()));
    }
    for (name, v) in [("first", v1), ("second", v2)] {
        let r = transfer::is_hmpi(v, 3, 1e-9)?;
        if r.verdict != Verdict::Yes {
            return Err(Error::Precondition(format!("{name} tensor is not hMPI-generating")));
        }
    }
    let in_pad = coprime_padding(v1.d_in, v2.d_in);
    let out_pad = coprime_padding(v1.d_out, v2.d_out);
    let ext1 = extend_tensor(v1, in_pad.0, out_pad.0)?;
    let ext2 = extend_tensor(v2, in_pad.1, out_pad.1)?;
    let pur_pad = coprime_padding(ext1.chi, ext2.chi);
    let chi = ext1.chi * pur_pad.0;
    let (d_in, d_out) = (ext1.d_in, ext1.d_out);
    let block = d_out * chi;
    if block * block > PAD_CAP || d_in * d_in > PAD_CAP {
        return Err(Error::InvalidParams(format!(
            "common extents (output block {block}, input {d_in}) exceed the padding cap"
        )));
    }
    // bond matrices of each padded factor on the common block (o, k̃)
    let padded = |v: &MpiTensor, pp: usize| -> Vec<Vec<Option<Mat>>> {
        (0..d_in)
            .map(|i| {
                (0..block)
                    .map(|b| {
                        let (o, kt) = (b / chi, b % chi);
                        (kt % pp == 0).then(|| v.mat(i, o * v.chi + kt / pp))
                    })
                    .collect()
            })
            .collect()
    };
    let a1 = padded(&ext1, pur_pad.0);
    let a2 = padded(&ext2, pur_pad.1);
    let (dl1, dr1, dl2, dr2) = (ext1.d_left, ext1.d_right, ext2.d_left, ext2.d_right);
    // T^{(i1 i2),(b1 b2)} = A1^{i1 b1} ⊗ A2^{i2 b2}
    let t = |i1: usize, i2: usize, b1: usize, b2: usize| -> Option<Mat> {
        match (&a1[i1][b1], &a2[i2][b2]) {
            (Some(x), Some(y)) => Some(linalg::kron(x, y)),
            _ => None,
        }
    };
    let hu = linalg::unitary_log(&swap(block))?;
    let hw = linalg::unitary_log(&swap(d_in))?;
    let (dl, dr) = (dl1 * dl2, dr1 * dr2);
    let nx = block * block;

    let samples: Vec<f64> = (0..n_samples).map(|k| k as f64 / (n_samples - 1) as f64).collect();
    let mut tensors = Vec::with_capacity(n_samples);
    let mut reports: Vec<PathSample> = Vec::with_capacity(n_samples);
    for &s in &samples {
        let u = linalg::expm_i_herm(&hu, s)?;
        let w = linalg::expm_i_herm(&hw, s)?;
        // input stage: B^{i, y'} = Σ_{i'} T^{i', y'} w[i', (i, 0)]
        let mut stage: Vec<Vec<Mat>> = vec![vec![linalg::zeros(dl, dr); nx]; d_in];
        for i in 0..d_in {
            let col = i * d_in;
            for ip in 0..d_in * d_in {
                let wv = w[(ip, col)];
                if wv.norm() < 1e-15 {
                    continue;
                }
                let (i1, i2) = (ip / d_in, ip % d_in);
                for y in 0..nx {
                    if let Some(m) = t(i1, i2, y / block, y % block) {
                        stage[i][y] = linalg::add(&stage[i][y], &linalg::scale(&m, wv));
                    }
                }
            }
        }
        // output stage: A^{i, y} = Σ_{y'} U[y, y'] B^{i, y'}, as one product per input
        let bd = dl * dr;
        let mats: Vec<Vec<Mat>> = stage
            .iter()
            .map(|row| {
                let b = Mat::from_fn(nx, bd, |y, x| row[y][(x / dr, x % dr)]);
                let a = linalg::matmul(&u, &b);
                (0..nx).map(|y| Mat::from_fn(dl, dr, |m, n| a[(y, m * dr + n)])).collect()
            })
            .collect();
        // physical output is the o of the first block; the rest is purification
        let v = MpiTensor::from_mats(d_out, nx / d_out, &mats)?;
        let hr = transfer::is_hmpi(&v, gram_sites(&v), 1e-9)?;
        let isometry_defects: Vec<f64> = hr
            .isometry_defects
            .iter()
            .enumerate()
            .map(|(k, d)| d * (d_in.pow(k as u32 + 1) as f64).sqrt())
            .collect();
        if hr.verdict != Verdict::Yes || isometry_defects.iter().any(|&d| d > 1e-9) {
            return Err(Error::Numerical(format!(
                "path tensor at s = {s:.3} is not hMPI-generating (spectral {:.2e}, isometry {:.2e})",
                hr.spectral_defect,
                isometry_defects.iter().fold(0.0f64, |a, &b| a.max(b))
            )));
        }
        let step = match tensors.last() {
            Some(prev) => tensor_distance(prev, &v),
            None => 0.0,
        };
        reports.push(PathSample { s, isometry_defects, spectral_defect: hr.spectral_defect, step });
        tensors.push(v);
    }
    Ok(DeformationPath {
        v1: v1.clone(),
        v2: v2.clone(),
        ext1,
        ext2,
        chi1: v1.chi,
        chi2: v2.chi,
        pur_pad,
        in_pad,
        out_pad,
        samples,
        tensors,
        reports,
        endpoint_defects: None,
    })
}

/// Largest N ≤ 3 whose dense Gram check stays small.
fn gram_sites(v: &MpiTensor) -> usize {
    (1..=3).take_while(|&n| (v.d_outpur() * v.d_in).saturating_pow(n as u32) <= 1 << 22).last().unwrap_or(1)
}

fn tensor_distance(a: &MpiTensor, b: &MpiTensor) -> f64 {
    a.kraus().iter().zip(b.kraus().iter()).map(|(x, y)| linalg::frob(&linalg::sub(x, y)).powi(2)).sum::<f64>().sqrt()
}

/// Choi state of Tr_pur[V_N (·) V_N†], built from the dense isometry (the
/// doubled-bond channel route is far costlier for the product bonds here).
fn normalized_choi(v: &MpiTensor, n: usize) -> Result<Mat> {
    let vn = mp::build_isometry_homogeneous(v, n)?;
    let s = mp::dilation_superop(&vn, v.d_in, v.d_out, v.chi, n)?;
    let c = oracle::choi_from_superop(&s, v.d_out.pow(n as u32), v.d_in.pow(n as u32));
    Ok(linalg::scale(&c, C64::new(1.0 / (v.d_in.pow(n as u32)) as f64, 0.0)))
}

/// Trace distance between the normalized Choi states of the path endpoints
/// and of the extended input channels.
pub fn verify_endpoints(path: &mut DeformationPath, n: usize) -> Result<(f64, f64)> {
    let first = path.tensors.first().ok_or(Error::Shape("empty path".into()))?;
    let last = path.tensors.last().ok_or(Error::Shape("empty path".into()))?;
    let d0 = oracle::trace_distance(&normalized_choi(first, n)?, &normalized_choi(&path.ext1, n)?)?;
    let d1 = oracle::trace_distance(&normalized_choi(last, n)?, &normalized_choi(&path.ext2, n)?)?;
    path.endpoint_defects = Some((d0, d1));
    Ok((d0, d1))
}
