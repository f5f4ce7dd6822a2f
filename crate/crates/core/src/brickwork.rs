//! Depth-two brickwork circuits from simple hMPI tensors.
//!
//! With the tensor in CFII gauge (Φ = I, ρ diagonal) the two SVD groupings
//!
//! - M₁[(n, x), (m, j)] = 𝒱^{(j,x)}_{mn} = X₁ Y₁, rank r, X₁†(ρ ⊗ I)X₁ = I
//! - M₂[(m, x), (n, j)] = 𝒱^{(j,x)}_{mn} = X₂ Y₂, rank ℓ, X₂†X₂ = I
//!
//! give u[(ℓ, r), (j₁, j₂)] = Σ_β Y₂[ℓ, (β, j₁)] Y₁[r, (β, j₂)] on site pairs
//! (2p, 2p+1) and v[(x₁, x₂), (r, ℓ)] = Σ_β X₁[(β, x₁), r] X₂[(β, x₂), ℓ] on
//! pairs (2p+1, 2p+2), wrapping around the ring.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ZERO};
use crate::mp::{self, MpiTensor};
use crate::tensor::DenseTensor;
use crate::transfer::{self, Verdict};

#[derive(Clone, Debug)]
pub struct SimplicityReport {
    pub verdict: Verdict,
    /// ‖W₂ − A ⊗ B‖_F for the two-site doubled tensor.
    pub defect1: f64,
    /// ‖Σ B·A − δδ‖_F.
    pub defect2: f64,
}

/// Fixed-point data in CFII gauge.
fn cfii_of(v: &MpiTensor) -> Result<(MpiTensor, Vec<f64>)> {
    let sp = transfer::spectrum(v, 1e-8)?;
    if sp.unit_count != 1 {
        return Err(Error::Precondition(format!(
            "simplicity needs a single unit transfer eigenvalue, found {}",
            sp.unit_count
        )));
    }
    let c = sp.cfii.ok_or_else(|| {
        Error::Precondition(format!(
            "CFII gauge unavailable: {}",
            sp.cfii_failure.unwrap_or_else(|| "unknown".into())
        ))
    })?;
    Ok((c.tensor, c.rho_diag))
}

/// A[(m,m'),(j,j')] = Σ_{x,n,n'} 𝒱^{jx}_{mn} ρ_{nn'} conj 𝒱^{j'x}_{m'n'} and
/// B[(n,n'),(j,j')] = Σ_{x,m} 𝒱^{jx}_{mn} conj 𝒱^{j'x}_{mn'}.
fn ab_tensors(v: &MpiTensor, rho: &[f64]) -> (Mat, Mat) {
    let d = v.d_left;
    let di = v.d_in;
    let mats = v.mats();
    let mut a = linalg::zeros(d * d, di * di);
    let mut b = linalg::zeros(d * d, di * di);
    for j in 0..di {
        for jp in 0..di {
            for x in 0..v.d_outpur() {
                let vj = &mats[j][x];
                let vjp = &mats[jp][x];
                for m in 0..d {
                    for mp_ in 0..d {
                        let mut s = ZERO;
                        for n in 0..d {
                            s += vj[(m, n)] * rho[n] * vjp[(mp_, n)].conj();
                        }
                        a[(m * d + mp_, j * di + jp)] += s;
                    }
                }
                for n in 0..d {
                    for np in 0..d {
                        let mut s = ZERO;
                        for m in 0..d {
                            s += vj[(m, n)] * vjp[(m, np)].conj();
                        }
                        b[(n * d + np, j * di + jp)] += s;
                    }
                }
            }
        }
    }
    (a, b)
}

/// Evaluate both simplicity identities with a = Φ = I and b = ρ.
pub fn simplicity_test(v: &MpiTensor, tol: f64) -> Result<SimplicityReport> {
    let (c, rho) = cfii_of(v)?;
    simplicity_in_cfii(&c, &rho, tol)
}

fn simplicity_in_cfii(c: &MpiTensor, rho: &[f64], tol: f64) -> Result<SimplicityReport> {
    let d = c.d_left;
    let di = c.d_in;
    let (a, b) = ab_tensors(c, rho);
    // W[(m,m'),(n,n'),(j1,j1'),(j2,j2')] from doubled blocks T^{j j'}
    let t = transfer::doubled_blocks(c);
    let mut defect1_sq = 0.0;
    for j1 in 0..di {
        for j1p in 0..di {
            for j2 in 0..di {
                for j2p in 0..di {
                    let w = linalg::matmul(&t[j1][j1p], &t[j2][j2p]);
                    for mm in 0..d * d {
                        for nn in 0..d * d {
                            let f = a[(mm, j1 * di + j1p)] * b[(nn, j2 * di + j2p)];
                            defect1_sq += (w[(mm, nn)] - f).norm_sqr();
                        }
                    }
                }
            }
        }
    }
    // Σ_{nn'} B[(n,n'),(j1,j1')] A[(n,n'),(j2,j2')] against δ_{j1 j1'} δ_{j2 j2'}
    let mut defect2_sq = 0.0;
    for j1 in 0..di {
        for j1p in 0..di {
            for j2 in 0..di {
                for j2p in 0..di {
                    let mut s = ZERO;
                    for nn in 0..d * d {
                        s += b[(nn, j1 * di + j1p)] * a[(nn, j2 * di + j2p)];
                    }
                    let want = if j1 == j1p && j2 == j2p { 1.0 } else { 0.0 };
                    defect2_sq += (s - C64::new(want, 0.0)).norm_sqr();
                }
            }
        }
    }
    let (defect1, defect2) = (defect1_sq.sqrt(), defect2_sq.sqrt());
    let verdict = if defect1 <= tol && defect2 <= tol { Verdict::Yes } else { Verdict::No };
    Ok(SimplicityReport { verdict, defect1, defect2 })
}

/// Smallest q ≤ q_cap (default D⁴) whose blocked tensor is simple.
pub fn block_until_simple(v: &MpiTensor, q_cap: Option<usize>, tol: f64) -> Result<(MpiTensor, usize)> {
    let cap = q_cap.unwrap_or_else(|| v.d_left.pow(4).max(1));
    for q in 1..=cap {
        let b = match mp::block(v, q) {
            Ok(b) => b,
            Err(Error::MemoryCap { needed, cap: mc }) => {
                return Err(Error::Numerical(format!(
                    "no simple blocking found up to q = {}; q = {q} exceeds the memory cap ({needed} > {mc})",
                    q - 1
                )))
            }
            Err(e) => return Err(e),
        };
        if simplicity_test(&b, tol)?.verdict == Verdict::Yes {
            return Ok((b, q));
        }
    }
    Err(Error::Numerical(format!("no simple blocking found up to q = {cap}")))
}

#[derive(Clone, Debug)]
pub struct XyFactors {
    pub x1: Mat,
    pub y1: Mat,
    pub x2: Mat,
    pub y2: Mat,
    pub r: usize,
    pub l: usize,
    /// Defects of X₁†(ρ⊗I)X₁ = I and X₂†X₂ = I.
    pub norm_defects: (f64, f64),
    /// ‖M_i − X_i Y_i‖_F.
    pub reconstruction: (f64, f64),
}

/// Both groupings of a CFII-gauged tensor with diagonal ρ.
pub fn decompose_xy(c: &MpiTensor, rho: &[f64], rank_tol: f64) -> Result<XyFactors> {
    let d = c.d_left;
    let di = c.d_in;
    let dx = c.d_outpur();
    let mats = c.mats();
    let m1 = Mat::from_fn(d * dx, d * di, |row, col| {
        let (n, x) = (row / dx, row % dx);
        let (m, j) = (col / di, col % di);
        mats[j][x][(m, n)]
    });
    let m2 = Mat::from_fn(d * dx, d * di, |row, col| {
        let (m, x) = (row / dx, row % dx);
        let (n, j) = (col / di, col % di);
        mats[j][x][(m, n)]
    });
    let s1 = linalg::svd(&m1)?;
    let r = s1.rank(rank_tol);
    let l1 = Mat::from_fn(m1.nrows(), r, |i, j| s1.u[(i, j)]);
    let sr1 = Mat::from_fn(r, m1.ncols(), |i, j| s1.v[(j, i)].conj() * s1.s[i]);
    let rho_i = Mat::from_fn(d * dx, d * dx, |i, j| if i == j { C64::new(rho[i / dx], 0.0) } else { ZERO });
    let gram = linalg::matmul(&linalg::matmul(&linalg::adjoint(&l1), &rho_i), &l1);
    let k1 = linalg::inv_sqrt_pd(&gram, 1e-12).map_err(|e| {
        Error::Numerical(format!("[V₁(I⊗ρ)V₁†] is singular: {e}"))
    })?;
    let k1_inv = linalg::sqrt_psd(&gram)?;
    let x1 = linalg::matmul(&l1, &k1);
    let y1 = linalg::matmul(&k1_inv, &sr1);

    let s2 = linalg::svd(&m2)?;
    let l = s2.rank(rank_tol);
    let x2 = Mat::from_fn(m2.nrows(), l, |i, j| s2.u[(i, j)]);
    let y2 = Mat::from_fn(l, m2.ncols(), |i, j| s2.v[(j, i)].conj() * s2.s[i]);

    let nd1 = linalg::frob(&linalg::sub(
        &linalg::matmul(&linalg::matmul(&linalg::adjoint(&x1), &rho_i), &x1),
        &linalg::eye(r),
    ));
    let nd2 = linalg::isometry_defect(&x2);
    let rc1 = linalg::frob(&linalg::sub(&m1, &linalg::matmul(&x1, &y1)));
    let rc2 = linalg::frob(&linalg::sub(&m2, &linalg::matmul(&x2, &y2)));
    Ok(XyFactors { x1, y1, x2, y2, r, l, norm_defects: (nd1, nd2), reconstruction: (rc1, rc2) })
}

#[derive(Clone, Debug)]
pub struct BrickworkCircuit {
    pub q: usize,
    /// u: d_in² → ℓ·r, rows (ℓ, r), columns (j₁, j₂).
    pub u: Mat,
    /// v: r·ℓ → (d_out χ)², rows (x₁, x₂), columns (r, ℓ).
    pub v: Mat,
    pub r: usize,
    pub l: usize,
    pub rho: Vec<f64>,
    pub factors: XyFactors,
    /// The blocked tensor in CFII gauge the gates were extracted from.
    pub tensor: MpiTensor,
    pub u_defect: f64,
    pub v_defect: f64,
    pub reconstruction_defect: f64,
}

impl BrickworkCircuit {
    pub fn d_in(&self) -> usize {
        self.tensor.d_in
    }

    pub fn d_x(&self) -> usize {
        self.tensor.d_outpur()
    }
}

/// Extract u, v from a simple tensor (already blocked; `q` is recorded) and
/// verify them against the dense isometry.
pub fn extract_gates(v: &MpiTensor, q: usize, rank_tol: f64) -> Result<BrickworkCircuit> {
    let (c, rho) = cfii_of(v)?;
    let f = decompose_xy(&c, &rho, rank_tol)?;
    let d = c.d_left;
    let di = c.d_in;
    let dx = c.d_outpur();
    let (r, l) = (f.r, f.l);
    let u = Mat::from_fn(l * r, di * di, |row, col| {
        let (ll, rr) = (row / r, row % r);
        let (j1, j2) = (col / di, col % di);
        let mut s = ZERO;
        for b in 0..d {
            s += f.y2[(ll, b * di + j1)] * f.y1[(rr, b * di + j2)];
        }
        s
    });
    let vg = Mat::from_fn(dx * dx, r * l, |row, col| {
        let (x1, x2) = (row / dx, row % dx);
        let (rr, ll) = (col / l, col % l);
        let mut s = ZERO;
        for b in 0..d {
            s += f.x1[(b * dx + x1, rr)] * f.x2[(b * dx + x2, ll)];
        }
        s
    });
    let u_defect = linalg::isometry_defect(&u);
    let v_defect = linalg::isometry_defect(&vg);
    let mut circ = BrickworkCircuit {
        q,
        u,
        v: vg,
        r,
        l,
        rho,
        factors: f,
        tensor: c.clone(),
        u_defect,
        v_defect,
        reconstruction_defect: f64::NAN,
    };
    let pairs = if reconstruct_fits(&circ, 2) { 2 } else { 1 };
    circ.reconstruction_defect = reconstruct_and_compare(&circ, &c, pairs)?;
    if !(circ.reconstruction_defect <= 1e-8) {
        return Err(Error::Numerical(format!(
            "brickwork reconstruction failed: relative defect {:.3e} (u defect {:.2e}, v defect {:.2e}, r = {r}, ℓ = {l})",
            circ.reconstruction_defect, u_defect, v_defect
        )));
    }
    Ok(circ)
}

fn reconstruct_fits(circ: &BrickworkCircuit, pairs: usize) -> bool {
    let m = 2 * pairs as u32;
    let n = circ.d_x().checked_pow(m).and_then(|a| a.checked_mul(circ.d_in().checked_pow(m)?));
    matches!(n, Some(n) if n <= mp::mem_cap())
}

/// Dense operator of the brickwork on `2·pairs` sites: u on (2p, 2p+1), then
/// v on (2p+1, 2p+2 mod M). Rows are per-site outputs, columns per-site
/// inputs, site 0 most significant.
pub fn brickwork_dense(circ: &BrickworkCircuit, pairs: usize) -> Result<Mat> {
    if pairs == 0 {
        return Err(Error::InvalidParams("at least one pair of sites is needed".into()));
    }
    if !reconstruct_fits(circ, pairs) {
        let m = 2 * pairs as u32;
        return Err(Error::MemoryCap {
            needed: circ.d_x().saturating_pow(m).saturating_mul(circ.d_in().saturating_pow(m)),
            cap: mp::mem_cap(),
        });
    }
    let data = brickwork_contract(circ, pairs, &[])?;
    Ok(linalg::from_vec(circ.d_x().pow(2 * pairs as u32), circ.d_in().pow(2 * pairs as u32), &data))
}

/// Shared contraction, row-major. `prefix` fixes the inputs of the leading
/// sites (an even count), leaving a block of columns over the rest.
fn brickwork_contract(circ: &BrickworkCircuit, pairs: usize, prefix: &[usize]) -> Result<Vec<C64>> {
    let (r, l, di, dx) = (circ.r, circ.l, circ.d_in(), circ.d_x());
    let m = 2 * pairs;
    let lab = |p: &str, k: usize| format!("{p}{k}");
    let u_t = |p: usize| -> Result<DenseTensor> {
        if 2 * p + 1 < prefix.len() {
            DenseTensor::from_parts(
                vec![l, r],
                vec![lab("l", p), lab("r", p)],
                linalg::column(&circ.u, prefix[2 * p] * di + prefix[2 * p + 1]),
            )
        } else {
            DenseTensor::from_parts(
                vec![l, r, di, di],
                vec![lab("l", p), lab("r", p), lab("j", 2 * p), lab("j", 2 * p + 1)],
                linalg::to_vec(&circ.u),
            )
        }
    };
    let v_t = |p: usize| -> Result<DenseTensor> {
        DenseTensor::from_parts(
            vec![dx, dx, r, l],
            vec![lab("x", 2 * p + 1), lab("x", (2 * p + 2) % m), lab("rr", p), lab("ll", (p + 1) % pairs)],
            linalg::to_vec(&circ.v),
        )
    };
    // walk the ring u₀ v₀ u₁ v₁ …, closing on ℓ₀ with the last v
    let mut acc = u_t(0)?;
    for p in 0..pairs {
        let (rr, ra) = (lab("rr", p), lab("r", p));
        let (ll, la) = (lab("ll", (p + 1) % pairs), lab("l", (p + 1) % pairs));
        let mut bonds = vec![(rr.as_str(), ra.as_str())];
        if p + 1 == pairs {
            bonds.push((ll.as_str(), la.as_str()));
        }
        acc = DenseTensor::contract(&v_t(p)?, &acc, &bonds)?;
        if p + 1 < pairs {
            acc = DenseTensor::contract(&u_t(p + 1)?, &acc, &[(la.as_str(), ll.as_str())])?;
        }
    }
    let mut order: Vec<String> = (0..m).map(|k| lab("x", k)).collect();
    order.extend((prefix.len()..m).map(|k| lab("j", k)));
    let refs: Vec<&str> = order.iter().map(String::as_str).collect();
    Ok(acc.permute(&refs)?.into_data())
}

/// Columns of V_M with the leading inputs fixed to `prefix`.
fn isometry_block(v: &MpiTensor, m: usize, prefix: &[usize]) -> Result<Vec<C64>> {
    let site = v.as_mpo_site();
    let (dl, dy, di, dr) = (site.dl, site.rows, site.cols, site.dr);
    // A_cat[m, (y, i, n)] restricted to one input
    let slice = |i: usize| mp::MpoSite {
        dl,
        dr,
        rows: dy,
        cols: 1,
        a: Mat::from_fn(dl, dy * dr, |m, c| site.a[(m, ((c / dr) * di + i) * dr + c % dr)]),
    };
    let chain: Vec<mp::MpoSite> =
        (0..m).map(|k| if k < prefix.len() { slice(prefix[k]) } else { site.clone() }).collect();
    Ok(mp::dense_mpo_flat(&chain, &mp::Boundary::Periodic)?.2)
}

/// ‖brickwork − V_{2·pairs}‖_F / ‖V‖_F on blocked sites of `v` (which must be
/// the tensor the gates were taken from, up to gauge). Falls back to a
/// column-by-column comparison when the dense operators do not fit.
pub fn reconstruct_and_compare(circ: &BrickworkCircuit, v: &MpiTensor, pairs: usize) -> Result<f64> {
    if pairs == 0 {
        return Err(Error::InvalidParams("at least one pair of sites is needed".into()));
    }
    let m = 2 * pairs;
    let dense_ok = reconstruct_fits(circ, pairs)
        && v.d_outpur()
            .checked_pow(m as u32)
            .and_then(|a| a.checked_mul(v.d_in.checked_pow(m as u32)?))
            .and_then(|a| a.checked_mul(v.d_left))
            .is_some_and(|n| n <= mp::mem_cap());
    if dense_ok {
        let b = brickwork_dense(circ, pairs)?;
        let vn = mp::build_isometry_homogeneous(v, m)?;
        return Ok(linalg::frob(&linalg::sub(&b, &vn)) / linalg::frob(&vn).max(1e-300));
    }
    if v.d_in != circ.d_in() || v.d_outpur() != circ.d_x() || v.d_left != v.d_right {
        return Err(Error::Shape("tensor does not match the circuit's site extents".into()));
    }
    let block = circ.d_x().saturating_pow(m as u32).saturating_mul(v.d_in.saturating_pow(m as u32 - 2));
    if block > mp::mem_cap() {
        return Err(Error::MemoryCap { needed: block, cap: mp::mem_cap() });
    }
    let (mut err2, mut norm2) = (0.0, 0.0);
    for j in 0..v.d_in * v.d_in {
        let prefix = [j / v.d_in, j % v.d_in];
        let b = brickwork_contract(circ, pairs, &prefix)?;
        let w = isometry_block(v, m, &prefix)?;
        for (x, y) in b.iter().zip(&w) {
            err2 += (x - y).norm_sqr();
            norm2 += y.norm_sqr();
        }
    }
    Ok(err2.sqrt() / norm2.sqrt().max(1e-300))
}

/// Full pipeline: block until simple, then extract gates.
pub fn brickwork_pipeline(v: &MpiTensor, tol: f64, rank_tol: f64) -> Result<BrickworkCircuit> {
    let (b, q) = block_until_simple(v, None, tol)?;
    extract_gates(&b, q, rank_tol)
}

/// Per-site MPS tensor W^{y}_{mn} = Σ_i 𝒱^{(i,y)}_{mn} φ_i for a product input.
fn contract_input(v: &MpiTensor, phi: &[C64]) -> Vec<Mat> {
    let mats = v.mats();
    (0..v.d_outpur())
        .map(|y| {
            let mut acc = linalg::zeros(v.d_left, v.d_right);
            for (i, &p) in phi.iter().enumerate() {
                acc = linalg::add(&acc, &linalg::scale(&mats[i][y], p));
            }
            acc
        })
        .collect()
}

/// Transfer matrix with an output operator: Σ_{y,y'} (O ⊗ I_χ)_{y' y} W^y ⊗ conj W^{y'}.
fn op_transfer(w: &[Mat], op: Option<&Mat>, chi: usize) -> Mat {
    let n = w[0].nrows();
    let mut t = linalg::zeros(n * n, n * n);
    let dy = w.len();
    for y in 0..dy {
        for yp in 0..dy {
            let coef = match op {
                None => {
                    if y == yp {
                        C64::new(1.0, 0.0)
                    } else {
                        ZERO
                    }
                }
                Some(o) => {
                    if y % chi == yp % chi {
                        o[(yp / chi, y / chi)]
                    } else {
                        ZERO
                    }
                }
            };
            if coef == ZERO {
                continue;
            }
            t = linalg::add(&t, &linalg::scale(&linalg::kron(&w[y], &linalg::conj(&w[yp])), coef));
        }
    }
    t
}

/// Connected correlator ⟨A_0 B_sep⟩ − ⟨A_0⟩⟨B_sep⟩ of the output state
/// V_N |φ⟩^{⊗N} (normalized) on a periodic ring of N = 2·sep + 2 sites,
/// evaluated exactly with transfer matrices. Observables act on the
/// physical output of one (blocked) site.
pub fn correlation_lightcone_check(v: &MpiTensor, phi: &[C64], a: &Mat, b: &Mat, separation: usize) -> Result<f64> {
    let n = 2 * separation + 2;
    Ok(ring_correlator(v, phi, a, b, separation, n)?.norm())
}

/// Connected correlator on a ring of `n` sites via transfer matrices.
pub fn ring_correlator(v: &MpiTensor, phi: &[C64], a: &Mat, b: &Mat, separation: usize, n: usize) -> Result<C64> {
    if phi.len() != v.d_in || a.nrows() != v.d_out || b.nrows() != v.d_out {
        return Err(Error::Shape("correlator: input state or observables do not match extents".into()));
    }
    if separation == 0 || separation >= n {
        return Err(Error::InvalidParams("separation must lie in 1..N".into()));
    }
    let w = contract_input(v, phi);
    let t = op_transfer(&w, None, v.chi);
    let ta = op_transfer(&w, Some(a), v.chi);
    let tb = op_transfer(&w, Some(b), v.chi);
    let pow = |m: &Mat, k: usize| -> Mat {
        let mut p = linalg::eye(m.nrows());
        for _ in 0..k {
            p = linalg::matmul(&p, m);
        }
        p
    };
    let z = linalg::trace(&pow(&t, n));
    let ea = linalg::trace(&linalg::matmul(&ta, &pow(&t, n - 1))) / z;
    let eb = linalg::trace(&linalg::matmul(&tb, &pow(&t, n - 1))) / z;
    let eab = linalg::trace(&linalg::matmul(
        &linalg::matmul(&linalg::matmul(&ta, &pow(&t, separation - 1)), &tb),
        &pow(&t, n - separation - 1),
    )) / z;
    Ok(eab - ea * eb)
}

/// The same correlator from the dense output state (small rings only).
pub fn dense_correlator(v: &MpiTensor, phi: &[C64], a: &Mat, b: &Mat, separation: usize, n: usize) -> Result<C64> {
    let vn = mp::build_isometry_homogeneous(v, n)?;
    let mut input = vec![C64::new(1.0, 0.0)];
    for _ in 0..n {
        input = input.iter().flat_map(|x| phi.iter().map(move |p| x * p)).collect();
    }
    let psi = linalg::mat_vec(&vn, &input);
    let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let dy = v.d_outpur();
    let chi = v.chi;
    let apply = |op: &Mat, site: usize, s: &[C64]| -> Vec<C64> {
        let stride = dy.pow((n - 1 - site) as u32);
        let mut out = vec![ZERO; s.len()];
        for (idx, &amp) in s.iter().enumerate() {
            if amp == ZERO {
                continue;
            }
            let y = (idx / stride) % dy;
            let (o, k) = (y / chi, y % chi);
            for op_row in 0..op.nrows() {
                let c = op[(op_row, o)];
                if c != ZERO {
                    let ny = op_row * chi + k;
                    let nidx = idx - y * stride + ny * stride;
                    out[nidx] += c * amp;
                }
            }
        }
        out
    };
    let ea = linalg::vdot(&psi, &apply(a, 0, &psi)) / norm2;
    let eb = linalg::vdot(&psi, &apply(b, separation, &psi)) / norm2;
    let eab = linalg::vdot(&psi, &apply(a, 0, &apply(b, separation, &psi))) / norm2;
    Ok(eab - ea * eb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{self, BRICK_FAMILY};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn streamed_blocks_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = oracle::random_brickwork(&BRICK_FAMILY[1], &mut rng).unwrap();
        let circ = brickwork_pipeline(&v, 1e-9, 1e-10).unwrap();
        let t = &circ.tensor;
        let (di, m) = (t.d_in, 4);
        let b = brickwork_dense(&circ, 2).unwrap();
        let vn = mp::build_isometry_homogeneous(t, m).unwrap();
        let block = di.pow((m - 2) as u32);
        for j in [0, 1, di * di - 1] {
            let prefix = [j / di, j % di];
            let bc = brickwork_contract(&circ, 2, &prefix).unwrap();
            let vc = isometry_block(t, m, &prefix).unwrap();
            for r in 0..vn.nrows() {
                for c in 0..block {
                    assert!((bc[r * block + c] - b[(r, j * block + c)]).norm() < 1e-12);
                    assert!((vc[r * block + c] - vn[(r, j * block + c)]).norm() < 1e-12);
                }
            }
        }
    }
}
