//! Measurement-and-feedforward implementation: GHZ control register,
//! controlled brickwork, Fourier-basis measurement of every ancilla and a
//! single-site phase correction.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gates::{self, GateSet};
use super::statevector::{self, StateVector};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ZERO};
use crate::smpi::SmpiCertificate;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolTrace {
    pub seed: Option<u64>,
    pub outcomes: Vec<usize>,
    /// Σ z_α mod g.
    pub z: usize,
    pub branch_probability: f64,
    /// Phase exponent e in O = Σ_j ω^{e·j} P_loc^j + I − P.
    pub correction_exponent: usize,
    pub correction_defect: f64,
    pub factorization_defect: f64,
    pub leakage: f64,
    pub fidelity: f64,
}

/// Columns |F(x)⟩ = g^{-1/2} Σ_k ω^{-kx} |k⟩, ω = e^{2πi/g}.
pub fn fourier_basis(g: usize) -> Mat {
    let w = std::f64::consts::TAU / g as f64;
    Mat::from_fn(g, g, |k, x| C64::from_polar(1.0 / (g as f64).sqrt(), -w * ((k * x) % g) as f64))
}

/// (1/√c) Σ_j m_j |j⟩^{⊗N}.
pub fn ghz_register(g: usize, n: usize, multiplicities: &[usize]) -> Vec<C64> {
    let c: usize = multiplicities.iter().map(|m| m * m).sum();
    let mut v = vec![ZERO; g.pow(n as u32)];
    for (j, &m) in multiplicities.iter().enumerate() {
        let idx = (0..n).fold(0, |acc, _| acc * g + j);
        v[idx] = C64::new(m as f64 / (c as f64).sqrt(), 0.0);
    }
    v
}

/// Σ_j ω^{e·j} P_loc^j + I − P on one site.
pub fn correction(gs: &GateSet, exponent: usize) -> Mat {
    let g = gs.g;
    let w = std::f64::consts::TAU / g as f64;
    let mut o = linalg::eye(gs.s);
    for (j, p) in gs.proj_loc.iter().enumerate() {
        let ph = C64::from_polar(1.0, w * ((exponent * j) % g) as f64);
        o = linalg::add(&o, &linalg::scale(p, ph - 1.0));
    }
    o
}

/// How measurement outcomes are chosen.
#[derive(Clone, Debug)]
pub enum Outcomes {
    /// Born-rule sampling with a seeded generator.
    Sample(u64),
    /// A fixed branch (exhaustive enumeration).
    Branch(Vec<usize>),
}

/// Run one shot on input |ψ⟩ (d_in^N). Returns the output state on
/// (d_out χ)^N and the trace; fidelity is against (1/√c) Σ m_j V_{j,N}|ψ⟩.
pub fn run_feedforward_protocol(
    gs: &GateSet,
    cert: &SmpiCertificate,
    input: &[C64],
    outcomes: Outcomes,
) -> Result<(Vec<C64>, ProtocolTrace)> {
    let n = gs.n;
    let g = gs.g;
    if input.len() != gs.d_in.pow(n as u32) {
        return Err(Error::Shape(format!("input must have {} amplitudes", gs.d_in.pow(n as u32))));
    }
    let regs = gates::registers(gs);
    // (i) GHZ control register, (ii) CU with masked inputs
    let mut st = StateVector::product(&[
        (regs[0].clone(), statevector::embed_sites(input, gs.d_in, gs.s, n)),
        (regs[1].clone(), ghz_register(g, n, &cert.multiplicities)),
    ])?;
    st.normalize();
    gates::apply_cu(gs, &mut st, false)?;

    // (iii) Fourier-basis measurement of every ancilla
    let f = fourier_basis(g);
    let (seed, mut rng) = match &outcomes {
        Outcomes::Sample(s) => (Some(*s), Some(ChaCha8Rng::seed_from_u64(*s))),
        Outcomes::Branch(b) => {
            if b.len() != n || b.iter().any(|&x| x >= g) {
                return Err(Error::InvalidParams(format!("branch must list {n} outcomes below {g}")));
            }
            (None, None)
        }
    };
    let mut cur = st.clone();
    let mut zs = Vec::with_capacity(n);
    let mut prob = 1.0;
    for alpha in 0..n {
        let w = cur.wire("anc", 0)?;
        let probs = cur.outcome_probabilities(w, &f)?;
        let total: f64 = probs.iter().sum();
        let x = match (&outcomes, rng.as_mut()) {
            (Outcomes::Branch(b), _) => b[alpha],
            (_, Some(r)) => {
                let u: f64 = r.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = g - 1;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                pick
            }
            _ => unreachable!(),
        };
        prob *= probs[x] / total;
        cur = cur.contract_wire(w, &linalg::column(&f, x))?;
        cur.normalize();
        zs.push(x);
    }
    if prob <= 1e-300 {
        return Err(Error::Numerical("measured branch has zero probability".into()));
    }
    // the projected state is sys ⊗ ⊗_α |F(z_α)⟩; compare against the full projection
    let factorization_defect = {
        let mut proj = st.clone();
        let mut ket = vec![ZERO; 1];
        ket[0] = C64::new(1.0, 0.0);
        for &x in &zs {
            let fx = linalg::column(&f, x);
            ket = ket.iter().flat_map(|a| fx.iter().map(move |b| a * b)).collect();
        }
        let p = crate::oracle::outer(&ket, &ket);
        let w: Vec<usize> = (0..n).map(|k| proj.wire("anc", k)).collect::<Result<_>>()?;
        proj.apply(&p, &w)?;
        proj.normalize();
        let prod: Vec<C64> = cur.amplitudes.iter().flat_map(|a| ket.iter().map(move |b| a * b)).collect();
        let ov = linalg::vdot(&prod, &proj.amplitudes).norm();
        (1.0 - ov).abs()
    };

    // (iv) correction on site 0: branch j carries ω^{+j z}, undo it
    let z = zs.iter().sum::<usize>() % g;
    let exponent = (g - z) % g;
    let o = correction(gs, exponent);
    let correction_defect = linalg::frob(&linalg::sub(&linalg::matmul(&linalg::adjoint(&o), &o), &linalg::eye(gs.s)));
    if correction_defect > 1e-8 {
        return Err(Error::Numerical(format!(
            "correction is not unitary ({correction_defect:.2e}): local block images are not orthogonal"
        )));
    }
    let w0 = cur.wire("sys", 0)?;
    cur.apply(&o, &[w0])?;
    let (out, leakage) = statevector::restrict_sites(&cur.amplitudes, gs.d_x, gs.s, n);
    let target = target_state(cert, n, input)?;
    let fidelity = statevector::fidelity(&target, &out);
    Ok((
        out,
        ProtocolTrace {
            seed,
            outcomes: zs,
            z,
            branch_probability: prob,
            correction_exponent: exponent,
            correction_defect,
            factorization_defect,
            leakage,
            fidelity,
        },
    ))
}

/// (1/√c) Σ_j m_j V_{j,N} |ψ⟩.
pub fn target_state(cert: &SmpiCertificate, n: usize, input: &[C64]) -> Result<Vec<C64>> {
    let v = cert.reassemble_dense(n)?;
    let s = 1.0 / (cert.c as f64).sqrt();
    Ok(linalg::mat_vec(&v, input).into_iter().map(|z| z * s).collect())
}

/// Every outcome string when N·log₂ g ≤ 12.
pub fn enumerate_branches(g: usize, n: usize) -> Result<Vec<Vec<usize>>> {
    if (n as f64) * (g as f64).log2() > 12.0 {
        return Err(Error::InvalidParams(format!("{} branches are too many to enumerate", (g as f64).powi(n as i32))));
    }
    Ok((0..g.pow(n as u32))
        .map(|mut x| {
            let mut b = vec![0; n];
            for k in (0..n).rev() {
                b[k] = x % g;
                x /= g;
            }
            b
        })
        .collect())
}
