//! Unitarized block gates and the ancilla-controlled composite CU.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::statevector::{self, Register, StateVector};
use crate::brickwork;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ONE, ZERO};
use crate::mp::{self, MpiTensor};
use crate::smpi::SmpiCertificate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CuMode {
    /// D = 1 blocks: one controlled single-site gate per site.
    Product,
    /// Controlled u on (2p, 2p+1), then controlled v on (2p+1, 2p+2).
    Brickwork,
    /// Whole V_{j,N} unitarized as one gate, controlled by ancilla 0.
    Dense,
}

#[derive(Clone, Debug)]
pub struct GateSet {
    pub mode: CuMode,
    pub n: usize,
    pub g: usize,
    /// Common local system extent.
    pub s: usize,
    pub d_in: usize,
    /// d_out·χ of the blocks.
    pub d_x: usize,
    /// Product: s×s; brickwork: (B̃_j, T̃_j) on s²; dense: s^N square.
    pub bottom: Vec<Mat>,
    pub top: Vec<Mat>,
    /// P_loc^j embedded in s×s.
    pub proj_loc: Vec<Mat>,
    pub unitarity_defect: f64,
    pub masked_defect: f64,
}

/// Unitary on `dim` whose columns at `positions` are those of `iso`.
pub fn extend_isometry(iso: &Mat, positions: &[usize]) -> Result<Mat> {
    let dim = iso.nrows();
    let full = linalg::complete_to_unitary(iso)?;
    let mut used = vec![false; dim];
    for &p in positions {
        used[p] = true;
    }
    let free: Vec<usize> = (0..dim).filter(|p| !used[*p]).collect();
    let mut colmap = vec![0usize; dim];
    for (k, &p) in positions.iter().enumerate() {
        colmap[p] = k;
    }
    for (k, &p) in free.iter().enumerate() {
        colmap[p] = positions.len() + k;
    }
    Ok(Mat::from_fn(dim, dim, |r, c| full[(r, colmap[c])]))
}

fn local_projector(b: &MpiTensor, s: usize) -> Result<Mat> {
    let dx = b.d_outpur();
    let mats = b.mats();
    let cols = b.d_in * b.d_left * b.d_right;
    let m = Mat::from_fn(dx, cols, |y, col| {
        let i = col / (b.d_left * b.d_right);
        let mn = col % (b.d_left * b.d_right);
        mats[i][y][(mn / b.d_right, mn % b.d_right)]
    });
    let q = linalg::range(&m, 1e-10)?;
    let p = linalg::matmul(&q, &linalg::adjoint(&q));
    Ok(Mat::from_fn(s, s, |r, c| if r < dx && c < dx { p[(r, c)] } else { ZERO }))
}

fn unitarity(u: &Mat) -> f64 {
    linalg::frob(&linalg::sub(&linalg::matmul(&linalg::adjoint(u), u), &linalg::eye(u.ncols())))
}

/// Build the gate set for `n` sites. `mode = None` picks product when all
/// blocks have D = 1, brickwork for even `n` when every block is simple,
/// and the dense fallback otherwise.
pub fn build_gateset(cert: &SmpiCertificate, n: usize, mode: Option<CuMode>) -> Result<GateSet> {
    let b0 = &cert.blocks[0];
    let (d_in, d_x) = (b0.d_in, b0.d_outpur());
    if cert.q_orth != 1 {
        return Err(Error::Precondition(format!(
            "blocks are strongly orthogonal only after blocking {}; block the tensor first",
            cert.q_orth
        )));
    }
    let all_product = cert.blocks.iter().all(|b| b.d_left == 1 && b.d_right == 1);
    let mode = match mode {
        Some(m) => m,
        None if all_product => CuMode::Product,
        None if n.is_multiple_of(2) && n >= 2 => {
            let ok = cert.blocks.iter().all(|b| brickwork::extract_gates(b, 1, 1e-10).is_ok());
            if ok {
                CuMode::Brickwork
            } else {
                CuMode::Dense
            }
        }
        None => CuMode::Dense,
    };
    let mut s = d_in.max(d_x);
    let mut bottom = Vec::new();
    let mut top = Vec::new();
    match mode {
        CuMode::Product => {
            if !all_product {
                return Err(Error::Precondition("product mode needs D = 1 blocks".into()));
            }
            for b in &cert.blocks {
                let iso = Mat::from_fn(s, d_in, |y, i| if y < d_x { b.mat(i, y)[(0, 0)] } else { ZERO });
                bottom.push(extend_isometry(&iso, &(0..d_in).collect::<Vec<_>>())?);
            }
        }
        CuMode::Brickwork => {
            if !n.is_multiple_of(2) {
                return Err(Error::Precondition("brickwork mode needs an even number of sites".into()));
            }
            let circs: Vec<_> = cert
                .blocks
                .iter()
                .map(|b| brickwork::extract_gates(b, 1, 1e-10))
                .collect::<Result<_>>()?;
            for c in &circs {
                s = s.max(c.r).max(c.l);
            }
            let inputs: Vec<usize> = (0..d_in * d_in).map(|x| (x / d_in) * s + x % d_in).collect();
            for c in &circs {
                // u: (j1, j2) → (ℓ at the left site, r at the right site)
                let u = Mat::from_fn(s * s, d_in * d_in, |row, col| {
                    let (a, b) = (row / s, row % s);
                    if a < c.l && b < c.r {
                        c.u[(a * c.r + b, col)]
                    } else {
                        ZERO
                    }
                });
                bottom.push(extend_isometry(&u, &inputs)?);
                // v: (r at the left site, ℓ at the right site) → (x1, x2)
                let v = Mat::from_fn(s * s, c.r * c.l, |row, col| {
                    let (a, b) = (row / s, row % s);
                    if a < d_x && b < d_x {
                        c.v[(a * d_x + b, col)]
                    } else {
                        ZERO
                    }
                });
                let vin: Vec<usize> = (0..c.r * c.l).map(|x| (x / c.l) * s + x % c.l).collect();
                top.push(extend_isometry(&v, &vin)?);
            }
        }
        CuMode::Dense => {
            let big = s.checked_pow(n as u32).filter(|x| x.saturating_mul(*x) <= mp::mem_cap());
            let big = big.ok_or(Error::MemoryCap { needed: usize::MAX, cap: mp::mem_cap() })?;
            let inputs: Vec<usize> = (0..d_in.pow(n as u32)).map(|x| statevector::reindex(x, d_in, s, n)).collect();
            for b in &cert.blocks {
                let vn = mp::build_isometry_homogeneous(b, n)?;
                let mut iso = linalg::zeros(big, vn.ncols());
                for r in 0..vn.nrows() {
                    let rr = statevector::reindex(r, d_x, s, n);
                    for c in 0..vn.ncols() {
                        iso[(rr, c)] = vn[(r, c)];
                    }
                }
                bottom.push(extend_isometry(&iso, &inputs)?);
            }
        }
    }
    let proj_loc = cert.blocks.iter().map(|b| local_projector(b, s)).collect::<Result<Vec<_>>>()?;
    let unitarity_defect = bottom.iter().chain(top.iter()).map(unitarity).fold(0.0, f64::max);
    let mut gs = GateSet {
        mode,
        n,
        g: cert.g,
        s,
        d_in,
        d_x,
        bottom,
        top,
        proj_loc,
        unitarity_defect,
        masked_defect: f64::NAN,
    };
    gs.masked_defect = masked_action_defect(&gs, cert)?;
    if gs.unitarity_defect > 1e-10 || gs.masked_defect > 1e-9 {
        return Err(Error::Numerical(format!(
            "gate set check failed: unitarity {:.2e}, masked action {:.2e}",
            gs.unitarity_defect, gs.masked_defect
        )));
    }
    Ok(gs)
}

/// Registers (sys, anc) used by the protocols.
pub fn registers(gs: &GateSet) -> Vec<Register> {
    vec![Register::new("sys", gs.s, gs.n), Register::new("anc", gs.g, gs.n)]
}

/// Apply CU (or CU† when `inverse`) to a state holding "sys" and "anc".
pub fn apply_cu(gs: &GateSet, st: &mut StateVector, inverse: bool) -> Result<()> {
    let n = gs.n;
    let sys: Vec<usize> = (0..n).map(|k| st.wire("sys", k)).collect::<Result<_>>()?;
    let anc: Vec<usize> = (0..n).map(|k| st.wire("anc", k)).collect::<Result<_>>()?;
    let adj = |ms: &[Mat]| -> Vec<Mat> { ms.iter().map(|m| if inverse { linalg::adjoint(m) } else { m.clone() }).collect() };
    match gs.mode {
        CuMode::Product => {
            let ops = adj(&gs.bottom);
            for k in 0..n {
                st.apply_controlled(anc[k], &ops, &[sys[k]])?;
            }
        }
        CuMode::Brickwork => {
            let (ub, ut) = (adj(&gs.bottom), adj(&gs.top));
            let u_layer = |st: &mut StateVector| -> Result<()> {
                for p in 0..n / 2 {
                    let (a, b, c) = (st.wire("sys", 2 * p)?, st.wire("sys", 2 * p + 1)?, st.wire("anc", 2 * p)?);
                    st.apply_controlled(c, &ub, &[a, b])?;
                }
                Ok(())
            };
            let v_layer = |st: &mut StateVector| -> Result<()> {
                for p in 0..n / 2 {
                    let (a, b, c) = (
                        st.wire("sys", 2 * p + 1)?,
                        st.wire("sys", (2 * p + 2) % n)?,
                        st.wire("anc", 2 * p + 1)?,
                    );
                    st.apply_controlled(c, &ut, &[a, b])?;
                }
                Ok(())
            };
            if inverse {
                v_layer(st)?;
                u_layer(st)?;
            } else {
                u_layer(st)?;
                v_layer(st)?;
            }
        }
        CuMode::Dense => {
            let ops = adj(&gs.bottom);
            st.apply_controlled(anc[0], &ops, &sys)?;
        }
    }
    Ok(())
}

/// max_j ‖(sys part of CU |ψ⟩|j…j⟩) − V_{j,N}|ψ⟩‖ over a few random inputs.
fn masked_action_defect(gs: &GateSet, cert: &SmpiCertificate) -> Result<f64> {
    let n = gs.n;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut worst: f64 = 0.0;
    for (j, b) in cert.blocks.iter().enumerate() {
        let vn = mp::build_isometry_homogeneous(b, n)?;
        for _ in 0..3 {
            let psi = crate::oracle::random_state(gs.d_in.pow(n as u32), &mut rng);
            let mut anc = vec![ZERO; gs.g.pow(n as u32)];
            anc[(0..n).fold(0, |acc, _| acc * gs.g + j)] = ONE;
            let regs = registers(gs);
            let mut st = StateVector::product(&[
                (regs[0].clone(), statevector::embed_sites(&psi, gs.d_in, gs.s, n)),
                (regs[1].clone(), anc.clone()),
            ])?;
            apply_cu(gs, &mut st, false)?;
            let bra: Vec<Vec<C64>> = (0..n)
                .map(|_| (0..gs.g).map(|k| if k == j { ONE } else { ZERO }).collect())
                .collect();
            let sys = st.contract_register("anc", &bra)?;
            let (out, leak) = statevector::restrict_sites(&sys.amplitudes, gs.d_x, gs.s, n);
            let want = linalg::mat_vec(&vn, &psi);
            let diff: Vec<C64> = out.iter().zip(&want).map(|(a, b)| a - b).collect();
            worst = worst.max(linalg::vnorm(&diff)).max(leak);
        }
    }
    Ok(worst)
}
