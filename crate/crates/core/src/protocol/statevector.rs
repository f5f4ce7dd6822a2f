//! Dense statevector over named registers of equal-extent sites.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ZERO};

/// Default cap on the total Hilbert-space dimension.
pub const SV_CAP: usize = 1 << 24;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub dim: usize,
    pub sites: usize,
}

impl Register {
    pub fn new(name: &str, dim: usize, sites: usize) -> Self {
        Self { name: name.to_string(), dim, sites }
    }
}

/// Amplitudes are row-major over all wires, registers in order and sites in
/// order within a register (first wire most significant).
#[derive(Clone, Debug)]
pub struct StateVector {
    pub registers: Vec<Register>,
    pub amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(registers: Vec<Register>, amplitudes: Vec<C64>) -> Result<Self> {
        let total = total_dim(&registers)?;
        if amplitudes.len() != total {
            return Err(Error::Shape(format!("{} amplitudes for dimension {total}", amplitudes.len())));
        }
        Ok(Self { registers, amplitudes })
    }

    pub fn zero(registers: Vec<Register>) -> Result<Self> {
        let total = total_dim(&registers)?;
        let mut amplitudes = vec![ZERO; total];
        amplitudes[0] = C64::new(1.0, 0.0);
        Ok(Self { registers, amplitudes })
    }

    /// Product state of independent register states, in order.
    pub fn product(parts: &[(Register, Vec<C64>)]) -> Result<Self> {
        let registers: Vec<Register> = parts.iter().map(|p| p.0.clone()).collect();
        total_dim(&registers)?;
        let mut amps = vec![C64::new(1.0, 0.0)];
        for (r, v) in parts {
            if v.len() != r.dim.pow(r.sites as u32) {
                return Err(Error::Shape(format!("register {} expects {} amplitudes", r.name, r.dim.pow(r.sites as u32))));
            }
            amps = amps.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        }
        Self::new(registers, amps)
    }

    pub fn wire_dims(&self) -> Vec<usize> {
        self.registers.iter().flat_map(|r| std::iter::repeat_n(r.dim, r.sites)).collect()
    }

    /// Flat wire index of `site` in register `name`.
    pub fn wire(&self, name: &str, site: usize) -> Result<usize> {
        let mut off = 0;
        for r in &self.registers {
            if r.name == name {
                if site >= r.sites {
                    return Err(Error::InvalidParams(format!("register {name} has {} sites", r.sites)));
                }
                return Ok(off + site);
            }
            off += r.sites;
        }
        Err(Error::UnknownLabel(name.to_string()))
    }

    pub fn norm(&self) -> f64 {
        linalg::vnorm(&self.amplitudes)
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amplitudes {
                *a /= n;
            }
        }
        n
    }

    fn strides(&self) -> Vec<usize> {
        let dims = self.wire_dims();
        let mut st = vec![1usize; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            st[k] = st[k + 1] * dims[k + 1];
        }
        st
    }

    /// Apply `op` to the listed wires (first listed wire most significant in
    /// the operator's index).
    pub fn apply(&mut self, op: &Mat, wires: &[usize]) -> Result<()> {
        let dims = self.wire_dims();
        let st = self.strides();
        let sub: usize = wires.iter().map(|&w| dims[w]).product();
        if op.nrows() != sub || op.ncols() != sub {
            return Err(Error::Shape(format!("operator is {}x{}, wires span {sub}", op.nrows(), op.ncols())));
        }
        let mut seen = vec![false; dims.len()];
        for &w in wires {
            if w >= dims.len() || seen[w] {
                return Err(Error::InvalidParams("bad or repeated wire".into()));
            }
            seen[w] = true;
        }
        // offsets of each sub-index
        let offs: Vec<usize> = (0..sub)
            .map(|mut x| {
                let mut o = 0;
                for &w in wires.iter().rev() {
                    o += (x % dims[w]) * st[w];
                    x /= dims[w];
                }
                o
            })
            .collect();
        let rest: Vec<usize> = (0..dims.len()).filter(|w| !seen[*w]).collect();
        let nrest: usize = rest.iter().map(|&w| dims[w]).product();
        let mut buf = vec![ZERO; sub];
        for mut x in 0..nrest {
            let mut base = 0;
            for &w in rest.iter().rev() {
                base += (x % dims[w]) * st[w];
                x /= dims[w];
            }
            for (b, &o) in buf.iter_mut().zip(&offs) {
                *b = self.amplitudes[base + o];
            }
            for (r, &o) in offs.iter().enumerate() {
                let mut s = ZERO;
                for (c, b) in buf.iter().enumerate() {
                    if *b != ZERO {
                        s += op[(r, c)] * b;
                    }
                }
                self.amplitudes[base + o] = s;
            }
        }
        Ok(())
    }

    /// Apply `ops[k]` to `wires` on the branch where `control` holds value k.
    pub fn apply_controlled(&mut self, control: usize, ops: &[Mat], wires: &[usize]) -> Result<()> {
        let dims = self.wire_dims();
        if ops.len() != dims[control] {
            return Err(Error::Shape(format!("{} controlled operators for control extent {}", ops.len(), dims[control])));
        }
        let sub = ops[0].nrows();
        let full = Mat::from_fn(ops.len() * sub, ops.len() * sub, |r, c| {
            if r / sub == c / sub {
                ops[r / sub][(r % sub, c % sub)]
            } else {
                ZERO
            }
        });
        let mut w = vec![control];
        w.extend_from_slice(wires);
        self.apply(&full, &w)
    }

    /// Contract `wire` with the bra ⟨φ| and drop it (unnormalized).
    pub fn contract_wire(&self, wire: usize, phi: &[C64]) -> Result<StateVector> {
        let dims = self.wire_dims();
        if phi.len() != dims[wire] {
            return Err(Error::Shape("bra extent does not match the wire".into()));
        }
        let st = self.strides();
        let outer: usize = dims[..wire].iter().product();
        let inner = st[wire];
        let d = dims[wire];
        let mut out = vec![ZERO; outer * inner];
        for a in 0..outer {
            for k in 0..d {
                let w = phi[k].conj();
                if w == ZERO {
                    continue;
                }
                let src = a * d * inner + k * inner;
                for b in 0..inner {
                    out[a * inner + b] += w * self.amplitudes[src + b];
                }
            }
        }
        // drop the site from its register
        let mut registers = self.registers.clone();
        let mut off = 0;
        for r in registers.iter_mut() {
            if wire < off + r.sites {
                r.sites -= 1;
                break;
            }
            off += r.sites;
        }
        registers.retain(|r| r.sites > 0);
        StateVector::new(registers, out)
    }

    /// Probability of each value of `wire` after projecting onto the basis
    /// given by the columns of `basis`.
    pub fn outcome_probabilities(&self, wire: usize, basis: &Mat) -> Result<Vec<f64>> {
        (0..basis.ncols())
            .map(|x| {
                let phi = linalg::column(basis, x);
                Ok(self.contract_wire(wire, &phi)?.norm().powi(2))
            })
            .collect()
    }

    /// Contract a whole register with a product of bras, one per site.
    pub fn contract_register(&self, name: &str, bras: &[Vec<C64>]) -> Result<StateVector> {
        let mut s = self.clone();
        for b in bras {
            let w = s.wire(name, 0)?;
            s = s.contract_wire(w, b)?;
        }
        Ok(s)
    }
}

fn total_dim(registers: &[Register]) -> Result<usize> {
    let mut total = 1usize;
    for r in registers {
        let d = r.dim.checked_pow(r.sites as u32).ok_or(Error::MemoryCap { needed: usize::MAX, cap: SV_CAP })?;
        total = total.checked_mul(d).ok_or(Error::MemoryCap { needed: usize::MAX, cap: SV_CAP })?;
    }
    if total > SV_CAP {
        return Err(Error::MemoryCap { needed: total, cap: SV_CAP });
    }
    Ok(total)
}

/// Phase-invariant fidelity |⟨a|b⟩|² / (‖a‖²‖b‖²).
pub fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    let na = linalg::vnorm(a);
    let nb = linalg::vnorm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (linalg::vdot(a, b).norm() / (na * nb)).powi(2)
}

/// Embed a vector on d_small^n into d_big^n (levels below d_small).
pub fn embed_sites(v: &[C64], d_small: usize, d_big: usize, n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; d_big.pow(n as u32)];
    for (x, &a) in v.iter().enumerate() {
        out[reindex(x, d_small, d_big, n)] = a;
    }
    out
}

/// Restrict a vector on d_big^n to d_small^n; also returns the norm of the
/// discarded part.
pub fn restrict_sites(v: &[C64], d_small: usize, d_big: usize, n: usize) -> (Vec<C64>, f64) {
    let mut out = vec![ZERO; d_small.pow(n as u32)];
    let mut kept = 0.0;
    for (x, o) in out.iter_mut().enumerate() {
        *o = v[reindex(x, d_small, d_big, n)];
        kept += o.norm_sqr();
    }
    let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    (out, (total - kept).max(0.0).sqrt())
}

/// Index of the mixed-radix digits of `x` (base `from`) in base `to`.
pub fn reindex(mut x: usize, from: usize, to: usize, n: usize) -> usize {
    let mut out = 0;
    let mut place = 1;
    for _ in 0..n {
        out += (x % from) * place;
        x /= from;
        place *= to;
    }
    out
}
