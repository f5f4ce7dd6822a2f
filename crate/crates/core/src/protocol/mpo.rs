//! Operators as matrix product operators and the boundary-MPU form of the
//! amplified circuit.

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::amplify::{plan_rounds, AmplifyReport};
use super::feedforward::fourier_basis;
use super::gates::{CuMode, GateSet};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ONE, ZERO};
use crate::mp::{self, Boundary, MpoSite, SiteChain};
use crate::smpi::SmpiCertificate;

/// Operator site tensor A^{(r, c)}_{ab}, stored as a[a, (r, c, b)].
#[derive(Clone, Debug, PartialEq)]
pub struct OpTensor {
    pub dl: usize,
    pub dr: usize,
    pub rows: usize,
    pub cols: usize,
    pub a: Mat,
}

impl OpTensor {
    pub fn from_fn(dl: usize, dr: usize, rows: usize, cols: usize, f: impl Fn(usize, usize, usize, usize) -> C64) -> Self {
        let a = Mat::from_fn(dl, rows * cols * dr, |l, idx| {
            let b = idx % dr;
            let rc = idx / dr;
            f(l, b, rc / cols, rc % cols)
        });
        Self { dl, dr, rows, cols, a }
    }

    /// Bond dimension one.
    pub fn product(op: &Mat) -> Self {
        Self::from_fn(1, 1, op.nrows(), op.ncols(), |_, _, r, c| op[(r, c)])
    }

    pub fn entry(&self, l: usize, b: usize, r: usize, c: usize) -> C64 {
        self.a[(l, (r * self.cols + c) * self.dr + b)]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dl, self.dr, self.cols, self.rows, |l, b, r, c| self.entry(l, b, c, r).conj())
    }

    fn site(&self) -> MpoSite {
        MpoSite { dl: self.dl, dr: self.dr, rows: self.rows, cols: self.cols, a: self.a.clone() }
    }
}

pub fn adjoint_chain(chain: &SiteChain<OpTensor>) -> SiteChain<OpTensor> {
    SiteChain {
        sites: chain.sites.iter().map(OpTensor::adjoint).collect(),
        boundary: match &chain.boundary {
            Boundary::Periodic => Boundary::Periodic,
            Boundary::Matrix(l) => Boundary::Matrix(linalg::conj(l)),
        },
    }
}

/// Dense operator on `n` sites, site 1 most significant.
pub fn mpo_dense(chain: &SiteChain<OpTensor>, n: usize) -> Result<Mat> {
    let sites: Vec<MpoSite> = chain.expand(n)?.iter().map(OpTensor::site).collect();
    mp::dense_mpo(&sites, &chain.boundary)
}

fn boundary_block(chain: &SiteChain<OpTensor>, first: usize, last: usize) -> Result<Mat> {
    match &chain.boundary {
        Boundary::Periodic if first == last => Ok(linalg::eye(first)),
        Boundary::Periodic => Err(Error::Shape("periodic chain needs matching end bonds".into())),
        Boundary::Matrix(l) => Ok(l.clone()),
    }
}

/// Σ_i λ_i O_i as one MPO: site tensors are block diagonal over the bond
/// and the boundary is ⊕ λ_i Λ_i.
pub fn mpo_linear_combination(terms: &[(C64, SiteChain<OpTensor>)], n: usize) -> Result<SiteChain<OpTensor>> {
    if terms.is_empty() {
        return Err(Error::InvalidParams("empty linear combination".into()));
    }
    let expanded: Vec<Vec<OpTensor>> = terms.iter().map(|(_, c)| c.expand(n)).collect::<Result<_>>()?;
    for e in &expanded[1..] {
        for (a, b) in e.iter().zip(&expanded[0]) {
            if a.rows != b.rows || a.cols != b.cols {
                return Err(Error::Shape("terms act on different local spaces".into()));
            }
        }
    }
    let mut sites = Vec::with_capacity(n);
    for k in 0..n {
        let dl: usize = expanded.iter().map(|e| e[k].dl).sum();
        let dr: usize = expanded.iter().map(|e| e[k].dr).sum();
        let (rows, cols) = (expanded[0][k].rows, expanded[0][k].cols);
        let mut a = linalg::zeros(dl, rows * cols * dr);
        let (mut ol, mut or) = (0, 0);
        for e in &expanded {
            let t = &e[k];
            for l in 0..t.dl {
                for rc in 0..rows * cols {
                    for b in 0..t.dr {
                        a[(ol + l, rc * dr + or + b)] = t.a[(l, rc * t.dr + b)];
                    }
                }
            }
            ol += t.dl;
            or += t.dr;
        }
        sites.push(OpTensor { dl, dr, rows, cols, a });
    }
    let first: usize = sites[0].dl;
    let last: usize = sites[n - 1].dr;
    let mut lam = linalg::zeros(last, first);
    let (mut or, mut oc) = (0, 0);
    for ((w, chain), e) in terms.iter().zip(&expanded) {
        let (f, l) = (e[0].dl, e[n - 1].dr);
        let blk = boundary_block(chain, f, l)?;
        for r in 0..l {
            for c in 0..f {
                lam[(or + r, oc + c)] = *w * blk[(r, c)];
            }
        }
        or += l;
        oc += f;
    }
    Ok(SiteChain { sites, boundary: Boundary::Matrix(lam) })
}

/// O|v⟩ by a left-to-right sweep, never forming O densely.
pub fn apply_mpo(chain: &SiteChain<OpTensor>, n: usize, v: &[C64]) -> Result<Vec<C64>> {
    let sites = chain.expand(n)?;
    let ctot: usize = sites.iter().map(|s| s.cols).product();
    if v.len() != ctot {
        return Err(Error::Shape(format!("vector has {} entries, operator expects {ctot}", v.len())));
    }
    let d0 = sites[0].dl;
    // x[((a0·B + b)·R + y)·C + rest]
    let mut bond = d0;
    let mut rdone = 1usize;
    let mut crest = ctot;
    let mut x = vec![ZERO; d0 * d0 * ctot];
    for a0 in 0..d0 {
        x[(a0 * d0 + a0) * ctot..(a0 * d0 + a0 + 1) * ctot].copy_from_slice(v);
    }
    for s in &sites {
        if s.dl != bond {
            return Err(Error::Shape("bond mismatch in operator chain".into()));
        }
        let cr = crest / s.cols;
        let rnew = rdone * s.rows;
        mp::check_cap(d0 * s.dr * rnew * cr)?;
        let mut y = vec![ZERO; d0 * s.dr * rnew * cr];
        for b in 0..s.dl {
            for r in 0..s.rows {
                for c in 0..s.cols {
                    for b2 in 0..s.dr {
                        let w = s.a[(b, (r * s.cols + c) * s.dr + b2)];
                        if w == ZERO {
                            continue;
                        }
                        for a0 in 0..d0 {
                            for yy in 0..rdone {
                                let src = ((a0 * bond + b) * rdone + yy) * crest + c * cr;
                                let dst = ((a0 * s.dr + b2) * rnew + yy * s.rows + r) * cr;
                                for t in 0..cr {
                                    y[dst + t] += w * x[src + t];
                                }
                            }
                        }
                    }
                }
            }
        }
        x = y;
        bond = s.dr;
        rdone = rnew;
        crest = cr;
    }
    let mut out = vec![ZERO; rdone];
    for a0 in 0..d0 {
        for b in 0..bond {
            let w = match &chain.boundary {
                Boundary::Periodic => {
                    if a0 == b {
                        ONE
                    } else {
                        ZERO
                    }
                }
                Boundary::Matrix(l) => l[(b, a0)],
            };
            if w == ZERO {
                continue;
            }
            for yy in 0..rdone {
                out[yy] += w * x[(a0 * bond + b) * rdone + yy];
            }
        }
    }
    Ok(out)
}

/// One factor of the boundary-MPU decomposition.
#[derive(Clone, Debug)]
pub struct MpuFactor {
    pub label: String,
    pub chain: SiteChain<OpTensor>,
}

impl MpuFactor {
    pub fn bond_dim(&self) -> usize {
        self.chain.sites.iter().map(|s| s.dl.max(s.dr)).max().unwrap_or(1)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryMpuReport {
    pub factors: usize,
    pub labels: Vec<String>,
    pub bond_dims: Vec<usize>,
    /// Π of the factor bond dimensions: a bound on the bond of the product.
    pub bond_product: f64,
    /// ‖W − V_N/√c‖ where W is the circuit restricted to S and ancillas |0⟩.
    pub defect: f64,
    /// Largest norm left outside the ancilla-zero sector.
    pub ancilla_defect: f64,
}

/// Local space at site t: sys(s) ⊗ anc(g), plus the retuning qubit at site 0.
struct Layout {
    s: usize,
    g: usize,
    n: usize,
}

impl Layout {
    fn local(&self, t: usize) -> usize {
        self.s * self.g * if t == 0 { 2 } else { 1 }
    }

    fn op(&self, t: usize, sys: &Mat, anc: &Mat, q: &Mat) -> Mat {
        let m = linalg::kron(sys, anc);
        if t == 0 {
            linalg::kron(&m, q)
        } else {
            m
        }
    }

    fn product(&self, f: impl Fn(usize) -> Mat) -> SiteChain<OpTensor> {
        SiteChain::with_boundary((0..self.n).map(|t| OpTensor::product(&f(t))).collect(), Boundary::Periodic)
    }

    fn identity(&self) -> SiteChain<OpTensor> {
        self.product(|t| linalg::eye(self.local(t)))
    }

    /// Register order (sys…, anc…, q) → interleaved (sys_0 anc_0 q, sys_1 anc_1, …).
    fn interleave(&self, x: usize) -> usize {
        let (s, g, n) = (self.s, self.g, self.n);
        let q = x % 2;
        let mut rest = x / 2;
        let mut anc = vec![0; n];
        for t in (0..n).rev() {
            anc[t] = rest % g;
            rest /= g;
        }
        let mut sys = vec![0; n];
        for t in (0..n).rev() {
            sys[t] = rest % s;
            rest /= s;
        }
        (0..n).fold(0, |acc, t| {
            let a = (acc * s + sys[t]) * g + anc[t];
            if t == 0 {
                a * 2 + q
            } else {
                a
            }
        })
    }

    /// Controlled two-site gate on (a, b), control ancilla at a, split by
    /// operator Schmidt decomposition into (left, right) site tensors.
    fn controlled_pair(&self, a: usize, b: usize, ops: &[Mat]) -> Result<(OpTensor, OpTensor)> {
        let (s, g) = (self.s, self.g);
        let (la, lb) = (self.local(a), self.local(b));
        let (qa, qb) = (la / (s * g), lb / (s * g));
        // M[(ra, ca), (rb, cb)]
        let m = Mat::from_fn(la * la, lb * lb, |ia, ib| {
            let (ra, ca) = (ia / la, ia % la);
            let (rb, cb) = (ib / lb, ib % lb);
            let split = |x: usize, qd: usize| (x / (g * qd), (x / qd) % g, x % qd);
            let (sa, aa, xa) = split(ra, qa);
            let (sa2, aa2, xa2) = split(ca, qa);
            let (sb, ab, xb) = split(rb, qb);
            let (sb2, ab2, xb2) = split(cb, qb);
            if aa != aa2 || xa != xa2 || ab != ab2 || xb != xb2 {
                return ZERO;
            }
            ops[aa][(sa * s + sb, sa2 * s + sb2)]
        });
        let svd = linalg::svd(&m)?;
        let keep: Vec<usize> = (0..svd.s.len()).filter(|&k| svd.s[k] > 1e-12 * svd.s[0].max(1e-300)).collect();
        let kdim = keep.len();
        let left = OpTensor::from_fn(1, kdim, la, la, |_, k, r, c| svd.u[(r * la + c, keep[k])] * svd.s[keep[k]].sqrt());
        let right = OpTensor::from_fn(kdim, 1, lb, lb, |k, _, r, c| svd.v[(r * lb + c, keep[k])].conj() * svd.s[keep[k]].sqrt());
        Ok((left, right))
    }

    fn cu_factors(&self, gs: &GateSet) -> Result<Vec<MpuFactor>> {
        let (s, g, n) = (self.s, self.g, self.n);
        let q_id = linalg::eye(2);
        match gs.mode {
            CuMode::Product => {
                let chain = self.product(|t| {
                    let mut m = linalg::zeros(s * g, s * g);
                    for (j, u) in gs.bottom.iter().enumerate() {
                        let pj = Mat::from_fn(g, g, |r, c| if r == j && c == j { ONE } else { ZERO });
                        m = linalg::add(&m, &linalg::kron(u, &pj));
                    }
                    if t == 0 {
                        linalg::kron(&m, &q_id)
                    } else {
                        m
                    }
                });
                Ok(vec![MpuFactor { label: "cu".into(), chain }])
            }
            CuMode::Brickwork => {
                let mut out = Vec::new();
                for (label, ops, off) in [("cu-bottom", &gs.bottom, 0usize), ("cu-top", &gs.top, 1usize)] {
                    let mut sites: Vec<Option<OpTensor>> = vec![None; n];
                    for p in 0..n / 2 {
                        let (a, b) = ((2 * p + off) % n, (2 * p + off + 1) % n);
                        let (l, r) = self.controlled_pair(a, b, ops)?;
                        sites[a] = Some(l);
                        sites[b] = Some(r);
                    }
                    let sites = sites.into_iter().map(|x| x.expect("every site is covered")).collect();
                    out.push(MpuFactor { label: label.into(), chain: SiteChain::with_boundary(sites, Boundary::Periodic) });
                }
                Ok(out)
            }
            CuMode::Dense => Err(Error::Precondition(
                "the dense controlled gate has no boundary-MPU form; use product or brickwork blocks".into(),
            )),
        }
    }
}

/// Factor list for G^k U on the interleaved local spaces, applied in order.
pub fn boundary_mpu_factors(gs: &GateSet, cert: &SmpiCertificate, phi: f64, rounds: usize) -> Result<Vec<MpuFactor>> {
    let lay = Layout { s: gs.s, g: gs.g, n: gs.n };
    let (s, g, n) = (gs.s, gs.g, gs.n);
    let fd = linalg::adjoint(&fourier_basis(g));
    let (sp, cp) = phi.sin_cos();
    let ry = linalg::from_rows(&[vec![C64::new(cp, 0.0), C64::new(-sp, 0.0)], vec![C64::new(sp, 0.0), C64::new(cp, 0.0)]]);

    let mut u = lay.cu_factors(gs)?;
    u.push(MpuFactor { label: "fourier".into(), chain: lay.product(|t| lay.op(t, &linalg::eye(s), &fd, &linalg::eye(2))) });
    u.push(MpuFactor {
        label: "retune".into(),
        chain: lay.product(|t| lay.op(t, &linalg::eye(s), &linalg::eye(g), &if t == 0 { ry.clone() } else { linalg::eye(2) })),
    });
    let u_inv: Vec<MpuFactor> = u
        .iter()
        .rev()
        .map(|f| MpuFactor { label: format!("{}-inv", f.label), chain: adjoint_chain(&f.chain) })
        .collect();

    let e00 = Mat::from_fn(2, 2, |r, c| if r == 0 && c == 0 { ONE } else { ZERO });
    let p0 = Mat::from_fn(g, g, |r, c| if r == 0 && c == 0 { ONE } else { ZERO });
    let id = lay.identity();
    // −R_Φ = I − 2 Π_0 (the overall sign of G is folded in here)
    let pi0 = lay.product(|t| lay.op(t, &linalg::eye(s), &p0, &e00));
    let neg_r_phi = mpo_linear_combination(&[(C64::new(-2.0, 0.0), pi0), (ONE, id.clone())], n)?;
    // R_Ψ = 2 P_S ⊗ |GHZ⟩⟨GHZ| ⊗ |0⟩⟨0| − I, GHZ projector with bond (j, k)
    let ps = Mat::from_fn(s, s, |r, c| if r == c && r < gs.d_in { ONE } else { ZERO });
    let ghz = SiteChain::with_boundary(
        (0..n)
            .map(|t| {
                let loc = lay.local(t);
                let qd = loc / (s * g);
                OpTensor::from_fn(g * g, g * g, loc, loc, |l, b, r, c| {
                    if l != b {
                        return ZERO;
                    }
                    let (j, k) = (l / g, l % g);
                    let (rs, ra, rq) = (r / (g * qd), (r / qd) % g, r % qd);
                    let (cs, ca, cq) = (c / (g * qd), (c / qd) % g, c % qd);
                    if ra != j || ca != k || rq != 0 || cq != 0 {
                        return ZERO;
                    }
                    ps[(rs, cs)]
                })
            })
            .collect(),
        Boundary::Matrix({
            let csum: usize = cert.multiplicities.iter().map(|m| m * m).sum();
            let amp = |j: usize| cert.multiplicities.get(j).copied().unwrap_or(0) as f64 / (csum as f64).sqrt();
            Mat::from_fn(g * g, g * g, |r, c| if r == c { C64::new(amp(r / g) * amp(r % g), 0.0) } else { ZERO })
        }),
    );
    let r_psi = mpo_linear_combination(&[(C64::new(2.0, 0.0), ghz), (-ONE, id)], n)?;

    let mut factors = u.clone();
    for _ in 0..rounds {
        factors.push(MpuFactor { label: "reflect-target".into(), chain: neg_r_phi.clone() });
        factors.extend(u_inv.iter().cloned());
        factors.push(MpuFactor { label: "reflect-initial".into(), chain: r_psi.clone() });
        factors.extend(u.iter().cloned());
    }
    Ok(factors)
}

/// Build the factors for the amplified circuit and check them against V_N
/// column by column on S.
pub fn boundary_mpu_representation(
    gs: &GateSet,
    cert: &SmpiCertificate,
    report: Option<&AmplifyReport>,
) -> Result<(Vec<MpuFactor>, BoundaryMpuReport)> {
    let (phi, rounds) = match report {
        Some(r) => (r.phi, r.rounds),
        None => {
            let sin = (gs.g as f64).powf(-(gs.n as f64) / 2.0);
            let theta = sin.asin();
            let (k, tt) = plan_rounds(theta)?;
            ((tt.sin() / sin).min(1.0).acos(), k)
        }
    };
    let factors = boundary_mpu_factors(gs, cert, phi, rounds)?;
    let lay = Layout { s: gs.s, g: gs.g, n: gs.n };
    let (s, g, n) = (gs.s, gs.g, gs.n);
    let ga = g.pow(n as u32);
    let total = s.pow(n as u32) * ga * 2;
    let perm: Vec<usize> = (0..total).map(|x| lay.interleave(x)).collect();
    let ghz = super::feedforward::ghz_register(g, n, &cert.multiplicities);
    let din_n = gs.d_in.pow(n as u32);
    let vn = cert.reassemble_dense(n)?;
    let scale = 1.0 / (cert.c as f64).sqrt();
    let mut defect2 = 0.0;
    let mut anc_def: f64 = 0.0;
    for i in 0..din_n {
        let sys_idx = crate::protocol::statevector::reindex(i, gs.d_in, s, n);
        let mut v = vec![ZERO; total];
        for a in 0..ga {
            v[perm[(sys_idx * ga + a) * 2]] = ghz[a];
        }
        for f in &factors {
            v = apply_mpo(&f.chain, n, &v)?;
        }
        let mut good_idx = vec![false; total];
        for sys in 0..s.pow(n as u32) {
            good_idx[perm[sys * ga * 2]] = true;
        }
        let bad: f64 = v.iter().zip(&good_idx).filter(|(_, g)| !**g).map(|(z, _)| z.norm_sqr()).sum();
        anc_def = anc_def.max(bad.sqrt());
        for sys in 0..s.pow(n as u32) {
            let z = v[perm[sys * ga * 2]];
            let want = {
                let mut x = sys;
                let mut inside = true;
                let mut r = 0;
                let mut mul = 1;
                for _ in 0..n {
                    let d = x % s;
                    if d >= gs.d_x {
                        inside = false;
                    }
                    r += d * mul;
                    mul *= gs.d_x;
                    x /= s;
                }
                if inside {
                    vn[(r, i)] * scale
                } else {
                    ZERO
                }
            };
            defect2 += (z - want).norm_sqr();
        }
    }
    let bond_dims: Vec<usize> = factors.iter().map(MpuFactor::bond_dim).collect();
    let rep = BoundaryMpuReport {
        factors: factors.len(),
        labels: factors.iter().map(|f| f.label.clone()).collect(),
        bond_product: bond_dims.iter().map(|&b| b as f64).product(),
        bond_dims,
        defect: defect2.sqrt(),
        ancilla_defect: anc_def,
    };
    Ok((factors, rep))
}
