//! Measurement-free variant: U = (I ⊗ F†^{⊗N})·CU on |ψ⟩|GHZ⟩ followed by
//! oblivious amplitude amplification inside the input subspace S.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::feedforward::{fourier_basis, ghz_register, target_state};
use super::gates::{self, GateSet};
use super::statevector::{self, Register, StateVector};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ONE, ZERO};
use crate::smpi::SmpiCertificate;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SinThetaCandidates {
    /// 1/√(c·g).
    pub inv_sqrt_cg: f64,
    /// √(c / g^N).
    pub sqrt_c_over_gn: f64,
    /// g^{-N/2}.
    pub g_pow: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmplifyReport {
    /// sinθ measured from the ancilla-zero component of U|ψ⟩|GHZ⟩.
    pub sin_theta: f64,
    pub theta: f64,
    pub candidates: SinThetaCandidates,
    /// |sinθ − candidate| in the same order.
    pub candidate_residuals: [f64; 3],
    /// Rotation of the extra qubit (0 when no retuning was needed).
    pub phi: f64,
    /// sinθ after retuning.
    pub sin_theta_tuned: f64,
    pub rounds: usize,
    /// ‖K†K/sin²θ − I‖ for K = (⟨0|·U·|GHZ⟩) on S.
    pub isometry_defect: f64,
    /// (expected, measured) ancilla-zero amplitude after each round.
    pub angle_track: Vec<(f64, f64)>,
    pub ancilla_defect: f64,
    pub leakage: f64,
    pub fidelity: f64,
}

/// Registers for amplification: sys, anc and the retuning qubit.
fn amp_registers(gs: &GateSet) -> Vec<Register> {
    let mut r = gates::registers(gs);
    r.push(Register::new("q", 2, 1));
    r
}

fn ry(phi: f64) -> Mat {
    let (s, c) = phi.sin_cos();
    linalg::from_rows(&[vec![C64::new(c, 0.0), C64::new(-s, 0.0)], vec![C64::new(s, 0.0), C64::new(c, 0.0)]])
}

/// U' = (I ⊗ F†^{⊗N} ⊗ R_y(φ))·CU, or its inverse.
pub fn apply_u(gs: &GateSet, st: &mut StateVector, phi: f64, inverse: bool) -> Result<()> {
    let f = fourier_basis(gs.g);
    let fd = linalg::adjoint(&f);
    let q = st.wire("q", 0)?;
    if inverse {
        st.apply(&ry(-phi), &[q])?;
        for k in 0..gs.n {
            let w = st.wire("anc", k)?;
            st.apply(&f, &[w])?;
        }
        gates::apply_cu(gs, st, true)?;
    } else {
        gates::apply_cu(gs, st, false)?;
        for k in 0..gs.n {
            let w = st.wire("anc", k)?;
            st.apply(&fd, &[w])?;
        }
        st.apply(&ry(phi), &[q])?;
    }
    Ok(())
}

fn anc_dim(gs: &GateSet) -> usize {
    gs.g.pow(gs.n as u32)
}

/// Norm of the component with all ancillas and the qubit in |0⟩.
fn good_norm(gs: &GateSet, st: &StateVector) -> f64 {
    let ga = anc_dim(gs);
    st.amplitudes.iter().enumerate().filter(|(x, _)| (x / 2) % ga == 0 && x % 2 == 0).map(|(_, z)| z.norm_sqr()).sum::<f64>().sqrt()
}

/// R_Φ = 2·(I ⊗ |0⟩⟨0|^{⊗N} ⊗ |0⟩⟨0|) − I.
fn reflect_target(gs: &GateSet, st: &mut StateVector) {
    let ga = anc_dim(gs);
    for (x, z) in st.amplitudes.iter_mut().enumerate() {
        if !((x / 2) % ga == 0 && x % 2 == 0) {
            *z = -*z;
        }
    }
}

fn in_subspace(gs: &GateSet, sys: usize) -> bool {
    let mut x = sys;
    for _ in 0..gs.n {
        if x % gs.s >= gs.d_in {
            return false;
        }
        x /= gs.s;
    }
    true
}

/// R_Ψ = 2·(P_S ⊗ |GHZ⟩⟨GHZ| ⊗ |0⟩⟨0|) − I.
fn reflect_initial(gs: &GateSet, st: &mut StateVector, ghz: &[C64]) {
    let ga = anc_dim(gs);
    let nsys = st.amplitudes.len() / (2 * ga);
    for sys in 0..nsys {
        let ok = in_subspace(gs, sys);
        let base = sys * ga * 2;
        let ov: C64 = if ok { (0..ga).map(|a| ghz[a].conj() * st.amplitudes[base + 2 * a]).sum() } else { ZERO };
        for a in 0..ga {
            let i0 = base + 2 * a;
            st.amplitudes[i0] = ov * ghz[a] * 2.0 - st.amplitudes[i0];
            st.amplitudes[i0 + 1] = -st.amplitudes[i0 + 1];
        }
    }
}

/// G = −U R_Ψ U† R_Φ.
pub fn grover_step(gs: &GateSet, st: &mut StateVector, ghz: &[C64], phi: f64) -> Result<()> {
    reflect_target(gs, st);
    apply_u(gs, st, phi, true)?;
    reflect_initial(gs, st, ghz);
    apply_u(gs, st, phi, false)?;
    for z in &mut st.amplitudes {
        *z = -*z;
    }
    Ok(())
}

fn initial_state(gs: &GateSet, input: &[C64], ghz: &[C64]) -> Result<StateVector> {
    let regs = amp_registers(gs);
    StateVector::product(&[
        (regs[0].clone(), statevector::embed_sites(input, gs.d_in, gs.s, gs.n)),
        (regs[1].clone(), ghz.to_vec()),
        (regs[2].clone(), vec![ONE, ZERO]),
    ])
}

/// Ancilla-zero component K|e_i⟩ for basis inputs of S (all of them, or
/// the first 64).
fn measure_k(gs: &GateSet, ghz: &[C64], phi: f64) -> Result<(f64, f64)> {
    let din_n = gs.d_in.pow(gs.n as u32);
    let count = din_n.min(64);
    let mut cols = Vec::with_capacity(count);
    for i in 0..count {
        let mut e = vec![ZERO; din_n];
        e[i] = ONE;
        let mut st = initial_state(gs, &e, ghz)?;
        apply_u(gs, &mut st, phi, false)?;
        let ga = anc_dim(gs);
        let col: Vec<C64> = (0..st.amplitudes.len() / (2 * ga)).map(|sys| st.amplitudes[sys * ga * 2]).collect();
        cols.push(col);
    }
    let k = linalg::from_columns(cols[0].len(), &cols);
    let kk = linalg::matmul(&linalg::adjoint(&k), &k);
    let s2 = (0..count).map(|i| kk[(i, i)].re).sum::<f64>() / count as f64;
    let defect = if s2 > 0.0 {
        linalg::frob(&linalg::sub(&linalg::scale(&kk, C64::new(1.0 / s2, 0.0)), &linalg::eye(count)))
    } else {
        f64::INFINITY
    };
    Ok((s2.sqrt(), defect))
}

/// Round count and retuning: k rounds with (2k+1)θ' = π/2, θ' ≤ θ.
pub fn plan_rounds(theta: f64) -> Result<(usize, f64)> {
    if theta <= 1e-12 {
        return Err(Error::Numerical("θ = 0: the target component is absent".into()));
    }
    let exact = (FRAC_PI_2 / theta - 1.0) / 2.0;
    if (exact - exact.round()).abs() <= 1e-9 {
        return Ok((exact.round() as usize, theta));
    }
    let k = exact.ceil() as usize;
    Ok((k, FRAC_PI_2 / (2 * k + 1) as f64))
}

/// Run with `rounds = None` (auto) or a forced round count (no retuning).
pub fn run_amplitude_amplification(
    gs: &GateSet,
    cert: &SmpiCertificate,
    input: &[C64],
    rounds: Option<usize>,
) -> Result<(Vec<C64>, AmplifyReport)> {
    let n = gs.n;
    if input.len() != gs.d_in.pow(n as u32) {
        return Err(Error::Shape(format!("input must have {} amplitudes", gs.d_in.pow(n as u32))));
    }
    let ghz = ghz_register(gs.g, n, &cert.multiplicities);
    let (sin_theta, isometry_defect) = measure_k(gs, &ghz, 0.0)?;
    if isometry_defect > 1e-8 {
        return Err(Error::Precondition(format!(
            "amplitude amplification conditions fail: K†K is not proportional to I on S (defect {isometry_defect:.2e})"
        )));
    }
    let theta = sin_theta.clamp(-1.0, 1.0).asin();
    let c = cert.c as f64;
    let g = gs.g as f64;
    let candidates = SinThetaCandidates {
        inv_sqrt_cg: 1.0 / (c * g).sqrt(),
        sqrt_c_over_gn: (c / g.powi(n as i32)).sqrt(),
        g_pow: g.powf(-(n as f64) / 2.0),
    };
    let candidate_residuals = [
        (sin_theta - candidates.inv_sqrt_cg).abs(),
        (sin_theta - candidates.sqrt_c_over_gn).abs(),
        (sin_theta - candidates.g_pow).abs(),
    ];
    let (k, theta_t) = match rounds {
        Some(k) => (k, theta),
        None => plan_rounds(theta)?,
    };
    let phi = if (theta_t - theta).abs() > 0.0 {
        let cphi = theta_t.sin() / sin_theta;
        if !(0.0..=1.0 + 1e-12).contains(&cphi) {
            return Err(Error::Numerical(format!("no retuning angle for sinθ' = {:.6}", theta_t.sin())));
        }
        cphi.min(1.0).acos()
    } else {
        0.0
    };
    let (sin_theta_tuned, _) = measure_k(gs, &ghz, phi)?;
    let theta_t = sin_theta_tuned.clamp(-1.0, 1.0).asin();

    let mut st = initial_state(gs, input, &ghz)?;
    st.normalize();
    apply_u(gs, &mut st, phi, false)?;
    let mut angle_track = vec![(theta_t.sin(), good_norm(gs, &st))];
    for l in 1..=k {
        grover_step(gs, &mut st, &ghz, phi)?;
        angle_track.push((((2 * l + 1) as f64 * theta_t).sin(), good_norm(gs, &st)));
    }
    let ga = anc_dim(gs);
    let ancilla_defect = st
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(x, _)| !((x / 2) % ga == 0 && x % 2 == 0))
        .map(|(_, z)| z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    // system part with ancillas and qubit in |0⟩
    let e0 = |d: usize| -> Vec<C64> { (0..d).map(|x| if x == 0 { ONE } else { ZERO }).collect() };
    let bras: Vec<Vec<C64>> = (0..n).map(|_| e0(gs.g)).collect();
    let sys = st.contract_register("anc", &bras)?.contract_register("q", &[e0(2)])?;
    let (out, leakage) = statevector::restrict_sites(&sys.amplitudes, gs.d_x, gs.s, n);
    let target = target_state(cert, n, input)?;
    let fidelity = statevector::fidelity(&target, &out);
    Ok((
        out,
        AmplifyReport {
            sin_theta,
            theta,
            candidates,
            candidate_residuals,
            phi,
            sin_theta_tuned,
            rounds: k,
            isometry_defect,
            angle_track,
            ancilla_defect,
            leakage,
            fidelity,
        },
    ))
}
