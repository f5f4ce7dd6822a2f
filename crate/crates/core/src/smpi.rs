//! Scaled isometries: V_N†V_N = c·I with N-independent integer c, their
//! splitting into strongly orthogonal hMPI-generating blocks, and the
//! orthogonality and nilpotency machinery behind it.

use num_complex::Complex64 as C64;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ONE, ZERO};
use crate::mp::{self, MpiTensor};
use crate::transfer::{self, Verdict};

#[derive(Clone, Debug)]
pub struct SmpiReport {
    pub verdict: Verdict,
    /// Rounded c when the fit is within 1e-6 of a positive integer.
    pub c: Option<usize>,
    /// Minimizer of max_N ‖V_N†V_N − c·I‖.
    pub c_fit: f64,
    /// Normalized defects ‖V_N†V_N − c_fit·I‖_F / √(d_in^N).
    pub defects: Vec<f64>,
}

pub fn is_smpi(v: &MpiTensor, n_max: usize, tol: f64) -> Result<SmpiReport> {
    if n_max < 1 {
        return Err(Error::InvalidParams("N_max must be at least 1".into()));
    }
    // per N: ‖G − cI‖² / dim = var + (c − b)², b = Tr G / dim
    let mut quad = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let g = transfer::gram_dense(v, n)?;
        let dim = g.nrows();
        let b = linalg::trace(&g).re / dim as f64;
        let centered = linalg::sub(&g, &linalg::scale(&linalg::eye(dim), C64::new(b, 0.0)));
        let var = linalg::frob(&centered).powi(2) / dim as f64;
        quad.push((var, b));
    }
    let err = |c: f64, &(var, b): &(f64, f64)| var + (c - b) * (c - b);
    let worst = |c: f64| quad.iter().map(|q| err(c, q)).fold(0.0, f64::max);
    let mut lo = quad.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
    let mut hi = quad.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if worst(m1) <= worst(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let c_fit = 0.5 * (lo + hi);
    let defects: Vec<f64> = quad.iter().map(|q| err(c_fit, q).sqrt()).collect();
    let rounded = c_fit.round();
    let c = ((c_fit - rounded).abs() <= 1e-6 && rounded >= 1.0).then_some(rounded as usize);
    let ok = defects.iter().all(|&d| d <= tol);
    let verdict = if ok && c.is_some() { Verdict::Yes } else { Verdict::No };
    Ok(SmpiReport { verdict, c: if ok { c } else { None }, c_fit, defects })
}

/// Largest N with d_in^{2N} entries under the memory cap, at most `limit`.
pub fn feasible_n(d_in: usize, limit: usize) -> usize {
    let cap = mp::mem_cap();
    let mut n = 1;
    while n < limit {
        match d_in.checked_pow(2 * (n as u32 + 1)) {
            Some(sz) if sz <= cap => n += 1,
            _ => break,
        }
    }
    n
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrthoMode {
    Weak,
    Strong,
}

/// weak: spectral radius of the mixed transfer E_ab; strong: Frobenius norm
/// of Σ_y a^{(i,y)} ⊗ conj b^{(j,y)} over all i, j after blocking `q`.
pub fn orthogonality_check(a: &MpiTensor, b: &MpiTensor, mode: OrthoMode, q: usize) -> Result<f64> {
    if (a.d_in, a.d_out, a.chi) != (b.d_in, b.d_out, b.chi) {
        return Err(Error::ExtentMismatch {
            a: "a physical".into(),
            ea: a.d_in * a.d_outpur(),
            b: "b physical".into(),
            eb: b.d_in * b.d_outpur(),
        });
    }
    match mode {
        OrthoMode::Weak => {
            let e = transfer::mixed_transfer(a, b)?;
            let ev = linalg::eigenvalues(&e)?;
            Ok(ev.first().map(|z| z.norm()).unwrap_or(0.0))
        }
        OrthoMode::Strong => {
            let (aq, bq) = (mp::block(a, q)?, mp::block(b, q)?);
            let t = transfer::mixed_doubled_blocks(&aq, &bq);
            Ok(t.iter().flatten().map(|m| linalg::frob(m).powi(2)).sum::<f64>().sqrt())
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockCertificate {
    pub hmpi: Verdict,
    pub isometry_defects: Vec<f64>,
    pub spectral_defect: f64,
}

#[derive(Clone, Debug)]
pub struct SmpiCertificate {
    pub c: usize,
    pub g: usize,
    pub multiplicities: Vec<usize>,
    /// Block tensors with their phases absorbed.
    pub blocks: Vec<MpiTensor>,
    pub phases: Vec<C64>,
    pub q_orth: usize,
    /// weak[j][k]: spectral radius of E_{jk} (j ≠ k).
    pub weak: Vec<Vec<f64>>,
    /// strong[j][k] at blocking q_orth.
    pub strong: Vec<Vec<f64>>,
    pub block_reports: Vec<BlockCertificate>,
    /// Largest spread of copy phases within a class.
    pub phase_spread: f64,
}

impl SmpiCertificate {
    /// Σ_j m_j V_{j,N} (not divided by √c).
    pub fn reassemble_dense(&self, n: usize) -> Result<Mat> {
        let mut acc: Option<Mat> = None;
        for (b, &m) in self.blocks.iter().zip(&self.multiplicities) {
            let vj = linalg::scale(&mp::build_isometry_homogeneous(b, n)?, C64::new(m as f64, 0.0));
            acc = Some(match acc {
                None => vj,
                Some(a) => linalg::add(&a, &vj),
            });
        }
        acc.ok_or_else(|| Error::Precondition("empty certificate".into()))
    }
}

pub fn smpi_decompose(v: &MpiTensor, tol: f64) -> Result<SmpiCertificate> {
    let n_max = feasible_n(v.d_in, 4);
    let rep = is_smpi(v, n_max, tol)?;
    let c = rep.c.ok_or_else(|| {
        Error::Precondition(format!(
            "not a scaled isometry: best c = {:.6}, defects {:?}",
            rep.c_fit, rep.defects
        ))
    })?;
    let dec = transfer::canonical_decompose(v, tol)?;
    if dec.c != c {
        return Err(Error::Numerical(format!(
            "multiplicities give Σ m² = {} but V†V = {c}·I (multiplicity lemma violated)",
            dec.c
        )));
    }
    if !dec.is_block_diagonal(1e-8) {
        return Err(Error::Numerical(format!(
            "canonical form not block diagonal: off-diagonal {:.3e}, residual {:.3e}",
            dec.off_diagonal, dec.residual
        )));
    }
    let mut phase_spread: f64 = 0.0;
    for (j, cp) in dec.copy_phases.iter().enumerate() {
        for p in cp {
            phase_spread = phase_spread.max((p - dec.phases[j]).norm());
        }
    }
    if phase_spread > 1e-8 {
        return Err(Error::Numerical(format!(
            "copy phases within a class differ by {phase_spread:.3e}; phase uniformity across copies fails"
        )));
    }
    let g = dec.g;
    let blocks = dec.blocks.clone();

    let mut block_reports = Vec::with_capacity(g);
    for (j, b) in blocks.iter().enumerate() {
        let r = transfer::is_hmpi(b, n_max.max(2).min(feasible_n(b.d_in, 4)), tol)?;
        if r.verdict != Verdict::Yes {
            return Err(Error::Numerical(format!(
                "block {j} does not generate an isometry after its phase fix: defects {:?}, spectral {:.3e}",
                r.isometry_defects, r.spectral_defect
            )));
        }
        block_reports.push(BlockCertificate {
            hmpi: r.verdict,
            isometry_defects: r.isometry_defects,
            spectral_defect: r.spectral_defect,
        });
    }

    let mut weak = vec![vec![0.0; g]; g];
    for j in 0..g {
        for k in 0..g {
            if j != k {
                weak[j][k] = orthogonality_check(&blocks[j], &blocks[k], OrthoMode::Weak, 1)?;
                if weak[j][k] >= 1.0 - 1e-8 {
                    return Err(Error::Numerical(format!(
                        "blocks {j} and {k} are not weakly orthogonal: mixed spectral radius {:.6}",
                        weak[j][k]
                    )));
                }
            }
        }
    }

    let dmax = blocks.iter().map(|b| b.d_left).max().unwrap_or(1);
    let q_cap = dmax.pow(6).max(1);
    let mut q_orth = None;
    let mut strong = vec![vec![0.0; g]; g];
    'scan: for q in 1..=q_cap {
        let mut all = true;
        for j in 0..g {
            for k in 0..g {
                if j == k {
                    continue;
                }
                let s = match orthogonality_check(&blocks[j], &blocks[k], OrthoMode::Strong, q) {
                    Ok(s) => s,
                    Err(Error::MemoryCap { .. }) => break 'scan,
                    Err(e) => return Err(e),
                };
                strong[j][k] = s;
                all &= s <= tol;
            }
        }
        if all {
            q_orth = Some(q);
            break;
        }
    }
    let q_orth = q_orth.ok_or_else(|| {
        Error::Numerical("blocks never become strongly orthogonal within the blocking cap".into())
    })?;
    Ok(SmpiCertificate {
        c,
        g,
        multiplicities: dec.multiplicities.clone(),
        blocks,
        phases: dec.phases.clone(),
        q_orth,
        weak,
        strong,
        block_reports,
        phase_spread,
    })
}

#[derive(Clone, Debug)]
pub struct NilpotencyReport {
    /// Nilpotency index of the algebra generated by the raw S_α (None when
    /// above L_max or not nilpotent).
    pub raw_index: Option<usize>,
    /// Dimension of the algebra spanned by all nonempty S-words.
    pub algebra_dim: usize,
    /// Largest index over cross-block algebras S_{jk} (j ≠ k) when the
    /// tensor has several blocks.
    pub cross_block_index: Option<usize>,
    /// For L = 1..L_max, max over words of ‖P S^{α₁}⋯S^{α_L} P‖_F where P
    /// projects onto the peripheral transfer eigenspace.
    pub sandwich_defects: Vec<f64>,
}

const ALGEBRA_CAP: usize = 4096;
const WORD_SAMPLES: usize = 2048;

/// Nilpotency index of the (non-unital) algebra generated by `gens`:
/// smallest L with every word of length L vanishing.
fn nilpotency_index(gens: &[Mat], l_max: usize, tol: f64) -> Result<(Option<usize>, usize)> {
    if gens.is_empty() {
        return Ok((Some(0), 0));
    }
    let scale = gens.iter().map(linalg::frob).fold(0.0, f64::max).max(1e-300);
    let (r, c) = (gens[0].nrows(), gens[0].ncols());
    if r != c {
        return Err(Error::Shape("algebra generators must be square".into()));
    }
    let basis_of = |mats: &[Mat]| -> Result<Vec<Mat>> {
        if mats.is_empty() {
            return Ok(vec![]);
        }
        let cols: Vec<Vec<C64>> = mats.iter().map(linalg::to_vec).collect();
        let m = linalg::from_columns(r * c, &cols);
        let sv = linalg::svd(&m)?;
        let keep = sv.s.iter().filter(|&&s| s > tol * scale).count();
        Ok((0..keep).map(|k| linalg::from_vec(r, c, &linalg::column(&sv.u, k))).collect())
    };
    let mut words = basis_of(gens)?;
    let mut all: Vec<Mat> = words.clone();
    let mut algebra_dim = basis_of(&all)?.len();
    let mut index = None;
    for l in 1..=l_max {
        if words.is_empty() {
            index = Some(l);
            break;
        }
        let mut next = Vec::new();
        for w in &words {
            for gm in gens {
                next.push(linalg::matmul(w, gm));
            }
        }
        if next.len() > ALGEBRA_CAP {
            return Err(Error::Numerical(format!("algebra word span exceeds cap {ALGEBRA_CAP}")));
        }
        // max word norm relative to generators decides vanishing
        words = basis_of(&next)?;
        if next.iter().all(|m| linalg::frob(m) <= tol * scale) {
            words.clear();
        }
        all.extend(words.iter().cloned());
        let b = basis_of(&all)?;
        algebra_dim = b.len();
        all = b;
    }
    Ok((index, algebra_dim))
}

fn peripheral_projector(e: &Mat) -> Result<Option<Mat>> {
    let ev = transfer::clean_eigenvalues(e)?;
    let r = ev.first().map(|z| z.norm()).unwrap_or(0.0);
    if r == 0.0 {
        return Ok(None);
    }
    let mut distinct: Vec<C64> = Vec::new();
    for z in ev.iter().filter(|z| (z.norm() - r).abs() <= 1e-8 * r) {
        if distinct.iter().all(|w| (w - z).norm() > 1e-6 * r) {
            distinct.push(*z);
        }
    }
    let mut p = linalg::zeros(e.nrows(), e.ncols());
    for z in distinct {
        match transfer::spectral_projector(e, z, 1e-8)? {
            Some(pz) => p = linalg::add(&p, &pz),
            None => return Ok(None),
        }
    }
    Ok(Some(p))
}

pub fn nilpotency_probe(v: &MpiTensor, l_max: usize) -> Result<NilpotencyReport> {
    if l_max < 1 {
        return Err(Error::InvalidParams("L_max must be at least 1".into()));
    }
    let tol = 1e-10;
    if v.d_in == 1 {
        return Ok(NilpotencyReport { raw_index: Some(0), algebra_dim: 0, cross_block_index: None, sandwich_defects: vec![] });
    }
    let s = transfer::sigma_operators(v);
    let (raw_index, algebra_dim) = nilpotency_index(&s, l_max, tol)?;

    let mut cross_block_index = None;
    if let Ok(dec) = transfer::canonical_decompose(v, 1e-9) {
        if dec.g > 1 {
            let mut worst = Some(0);
            for j in 0..dec.g {
                for k in 0..dec.g {
                    if j == k {
                        continue;
                    }
                    let t = transfer::mixed_doubled_blocks(&dec.blocks[j], &dec.blocks[k]);
                    let sjk = transfer::sigma_from_blocks(&t, v.d_in);
                    // cross terms include the E part as well
                    let mut gens = sjk;
                    let mut ejk = linalg::zeros(t[0][0].nrows(), t[0][0].ncols());
                    for (i, row) in t.iter().enumerate() {
                        ejk = linalg::add(&ejk, &row[i]);
                    }
                    gens.push(linalg::scale(&ejk, C64::new(1.0 / v.d_in as f64, 0.0)));
                    let (idx, _) = nilpotency_index(&gens, l_max, tol)?;
                    worst = match (worst, idx) {
                        (Some(a), Some(b)) => Some(a.max(b)),
                        _ => None,
                    };
                }
            }
            cross_block_index = worst;
        }
    }

    let e = transfer::transfer_matrix(v);
    let mut sandwich_defects = Vec::new();
    if let Some(p) = peripheral_projector(&e)? {
        let mut rng = ChaCha8Rng::seed_from_u64(0x51ab);
        let na = s.len();
        let idx: Vec<usize> = (0..na).collect();
        for l in 1..=l_max {
            let total = (na as f64).powi(l as i32);
            let words: Vec<Vec<usize>> = if total <= WORD_SAMPLES as f64 {
                let mut all = vec![vec![]];
                for _ in 0..l {
                    all = all
                        .into_iter()
                        .flat_map(|w: Vec<usize>| {
                            (0..na).map(move |a| {
                                let mut w2 = w.clone();
                                w2.push(a);
                                w2
                            })
                        })
                        .collect();
                }
                all
            } else {
                (0..WORD_SAMPLES).map(|_| (0..l).map(|_| *idx.choose(&mut rng).unwrap()).collect()).collect()
            };
            let mut worst: f64 = 0.0;
            for w in words {
                let mut m = p.clone();
                for &a in &w {
                    m = linalg::matmul(&m, &s[a]);
                }
                m = linalg::matmul(&m, &p);
                worst = worst.max(linalg::frob(&m));
            }
            sandwich_defects.push(worst);
        }
    }
    Ok(NilpotencyReport { raw_index, algebra_dim, cross_block_index, sandwich_defects })
}

#[derive(Clone, Debug)]
pub struct AdjointSupport {
    /// Smallest ring radius w reproducing E†(O) from sites within w of the
    /// operator site; None if even the full ring does not (cannot happen) or
    /// E†(O) is not supported anywhere smaller.
    pub radius: Option<usize>,
    /// Residual per tried radius.
    pub residuals: Vec<f64>,
    /// E†(O) itself (d_in^N square).
    pub heisenberg: Mat,
}

/// E†(O) = (1/c)·V_N†(O_site ⊗ I_pur)V_N and its support radius around `site`.
pub fn adjoint_support(v: &MpiTensor, c: f64, op: &Mat, site: usize, n: usize) -> Result<AdjointSupport> {
    if op.nrows() != v.d_out || op.ncols() != v.d_out {
        return Err(Error::Shape(format!("local operator must be {0}x{0}", v.d_out)));
    }
    if site >= n {
        return Err(Error::InvalidParams(format!("site {site} outside ring of {n}")));
    }
    let vn = mp::build_isometry_homogeneous(v, n)?;
    let dy = v.d_outpur();
    let chi = v.chi;
    let stride = dy.pow((n - 1 - site) as u32);
    // (O_site ⊗ I) V_N, row by row
    let ov = Mat::from_fn(vn.nrows(), vn.ncols(), |row, col| {
        let y = (row / stride) % dy;
        let (o, k) = (y / chi, y % chi);
        let base = row - y * stride;
        let mut s = ZERO;
        for op_col in 0..v.d_out {
            let w = op[(o, op_col)];
            if w != ZERO {
                s += w * vn[(base + (op_col * chi + k) * stride, col)];
            }
        }
        s
    });
    let h = linalg::scale(&linalg::matmul(&linalg::adjoint(&vn), &ov), C64::new(1.0 / c, 0.0));
    let d = v.d_in;
    let mut residuals = Vec::new();
    let mut radius = None;
    for w in 0..=n / 2 {
        let keep: Vec<bool> = (0..n)
            .map(|s| {
                let dist = (s as isize - site as isize).unsigned_abs();
                dist.min(n - dist) <= w
            })
            .collect();
        let approx = local_projection(&h, d, n, &keep);
        let res = linalg::max_abs(&linalg::sub(&h, &approx));
        residuals.push(res);
        if res <= 1e-9 {
            radius = Some(w);
            break;
        }
    }
    Ok(AdjointSupport { radius, residuals, heisenberg: h })
}

/// Tr over discarded sites (normalized) re-tensored with identity.
fn local_projection(m: &Mat, d: usize, n: usize, keep: &[bool]) -> Mat {
    let dim = m.nrows();
    let digits = |x: usize| -> Vec<usize> { (0..n).map(|s| (x / d.pow((n - 1 - s) as u32)) % d).collect() };
    let traced = keep.iter().filter(|&&k| !k).count();
    let norm = 1.0 / (d.pow(traced as u32) as f64);
    let kept_sites: Vec<usize> = (0..n).filter(|&s| keep[s]).collect();
    let tr_sites: Vec<usize> = (0..n).filter(|&s| !keep[s]).collect();
    let compose = |kd: &[usize], td: &[usize]| -> usize {
        let mut full = vec![0; n];
        for (s, &x) in kept_sites.iter().zip(kd) {
            full[*s] = x;
        }
        for (s, &x) in tr_sites.iter().zip(td) {
            full[*s] = x;
        }
        full.iter().fold(0, |acc, &x| acc * d + x)
    };
    let dk = d.pow(kept_sites.len() as u32);
    let dt = d.pow(traced as u32);
    let split = |x: usize, len: usize| -> Vec<usize> { (0..len).map(|s| (x / d.pow((len - 1 - s) as u32)) % d).collect() };
    let mut red = linalg::zeros(dk, dk);
    for a in 0..dk {
        let ad = split(a, kept_sites.len());
        for b in 0..dk {
            let bd = split(b, kept_sites.len());
            let mut s = ZERO;
            for t in 0..dt {
                let td = split(t, traced);
                s += m[(compose(&ad, &td), compose(&bd, &td))];
            }
            red[(a, b)] = s * norm;
        }
    }
    Mat::from_fn(dim, dim, |row, col| {
        let (rd, cd) = (digits(row), digits(col));
        if tr_sites.iter().any(|&s| rd[s] != cd[s]) {
            return ZERO;
        }
        let a = kept_sites.iter().fold(0, |acc, &s| acc * d + rd[s]);
        let b = kept_sites.iter().fold(0, |acc, &s| acc * d + cd[s]);
        red[(a, b)] * ONE
    })
}
