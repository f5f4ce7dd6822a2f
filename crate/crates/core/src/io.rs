//! Text tensor files: JSON with explicit `[re, im]` pairs, row-major data.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::mp::{MpdoTensor, MpiTensor, MpqcTensor, MPDO_AXES, MPI_AXES, MPQC_AXES};
use crate::smpi::SmpiCertificate;
use crate::tensor::DenseTensor;

pub const FORMAT: &str = "mpqc-tensor/v1";
pub const MPS_AXES: [&str; 3] = ["bond_l", "bond_r", "phys"];
pub const GATE_AXES: [&str; 2] = ["row", "col"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Mpi,
    Mpqc,
    Mpdo,
    Mps,
    Gate,
    /// MPI data plus its block-structure record in `metadata`.
    Certificate,
}

impl Kind {
    fn axes(self) -> &'static [&'static str] {
        match self {
            Kind::Mpi | Kind::Certificate => &MPI_AXES,
            Kind::Mpqc => &MPQC_AXES,
            Kind::Mpdo => &MPDO_AXES,
            Kind::Mps => &MPS_AXES,
            Kind::Gate => &GATE_AXES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorFile {
    pub format: String,
    pub kind: Kind,
    /// Named extents, e.g. `d_left`, `d_in`, `chi`.
    pub dims: BTreeMap<String, usize>,
    pub axes: Vec<String>,
    pub shape: Vec<usize>,
    pub data: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Value>,
}

fn dims_of(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl TensorFile {
    fn from_dense(kind: Kind, t: &DenseTensor, dims: BTreeMap<String, usize>) -> Self {
        Self {
            format: FORMAT.into(),
            kind,
            dims,
            axes: t.labels().to_vec(),
            shape: t.dims().to_vec(),
            data: t.data().iter().map(|z| [z.re, z.im]).collect(),
            metadata: None,
        }
    }

    pub fn from_mpi(v: &MpiTensor) -> Self {
        let dims = dims_of(&[
            ("d_left", v.d_left),
            ("d_right", v.d_right),
            ("d_in", v.d_in),
            ("d_out", v.d_out),
            ("chi", v.chi),
        ]);
        Self::from_dense(Kind::Mpi, v.tensor(), dims)
    }

    pub fn from_mpqc(a: &MpqcTensor) -> Self {
        let dims = dims_of(&[("d_left", a.d_left), ("d_right", a.d_right), ("d_in", a.d_in), ("d_out", a.d_out)]);
        Self::from_dense(Kind::Mpqc, a.tensor(), dims)
    }

    pub fn from_mpdo(r: &MpdoTensor) -> Self {
        let dims = dims_of(&[("d_left", r.d_left), ("d_right", r.d_right), ("d", r.d)]);
        Self::from_dense(Kind::Mpdo, r.tensor(), dims)
    }

    pub fn from_mps(a: &DenseTensor) -> Result<Self> {
        let d = a.dims();
        if d.len() != 3 {
            return Err(Error::Shape("MPS site must have three axes".into()));
        }
        let t = DenseTensor::new(d.to_vec(), MPS_AXES.to_vec(), a.data().to_vec())?;
        Ok(Self::from_dense(Kind::Mps, &t, dims_of(&[("d_left", d[0]), ("d_right", d[1]), ("d", d[2])])))
    }

    pub fn from_gate(m: &Mat, metadata: Value) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push([m[(r, c)].re, m[(r, c)].im]);
            }
        }
        Self {
            format: FORMAT.into(),
            kind: Kind::Gate,
            dims: dims_of(&[("rows", m.nrows()), ("cols", m.ncols())]),
            axes: GATE_AXES.iter().map(|s| s.to_string()).collect(),
            shape: vec![m.nrows(), m.ncols()],
            data,
            metadata: Some(metadata),
        }
    }

    /// The analysed tensor plus its certificate record.
    pub fn certificate(v: &MpiTensor, cert: &SmpiCertificate) -> Self {
        let mut f = Self::from_mpi(v);
        f.kind = Kind::Certificate;
        f.metadata = Some(json!({
            "c": cert.c,
            "g": cert.g,
            "multiplicities": cert.multiplicities,
            "phases": cert.phases.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "q_orth": cert.q_orth,
        }));
        f
    }

    /// Structural checks: format tag, axis order, shape/data agreement,
    /// finite entries, named extents matching the shape.
    pub fn validate(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(Error::Parse(format!("unknown format tag `{}`", self.format)));
        }
        let want = self.kind.axes();
        if self.axes.iter().map(String::as_str).ne(want.iter().copied()) {
            return Err(Error::Parse(format!("{:?} files need axes {want:?}, got {:?}", self.kind, self.axes)));
        }
        if self.shape.len() != self.axes.len() {
            return Err(Error::Parse("shape and axes have different lengths".into()));
        }
        let n = self.shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        if n != Some(self.data.len()) {
            return Err(Error::Parse(format!("data has {} entries, shape {:?}", self.data.len(), self.shape)));
        }
        if self.data.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Parse("non-finite entry".into()));
        }
        let expect: Vec<(&str, usize)> = match self.kind {
            Kind::Mpi | Kind::Certificate => vec![
                ("d_left", self.shape[0]),
                ("d_right", self.shape[1]),
                ("d_in", self.shape[2]),
                ("d_out", self.shape[3]),
                ("chi", self.shape[4]),
            ],
            Kind::Mpqc => vec![
                ("d_left", self.shape[0]),
                ("d_right", self.shape[1]),
                ("d_in", self.shape[2]),
                ("d_out", self.shape[4]),
            ],
            Kind::Mpdo | Kind::Mps => vec![("d_left", self.shape[0]), ("d_right", self.shape[1]), ("d", self.shape[2])],
            Kind::Gate => vec![("rows", self.shape[0]), ("cols", self.shape[1])],
        };
        for (k, v) in expect {
            if self.dims.get(k) != Some(&v) {
                return Err(Error::Parse(format!("dims record `{k}` disagrees with the shape")));
            }
        }
        if self.kind == Kind::Certificate && self.metadata.is_none() {
            return Err(Error::Parse("certificate file without metadata".into()));
        }
        Ok(())
    }

    fn dense(&self) -> Result<DenseTensor> {
        self.validate()?;
        let data = self.data.iter().map(|p| C64::new(p[0], p[1])).collect();
        DenseTensor::from_parts(self.shape.clone(), self.axes.clone(), data)
    }

    pub fn to_mpi(&self) -> Result<MpiTensor> {
        match self.kind {
            Kind::Mpi | Kind::Certificate => MpiTensor::new(self.dense()?),
            k => Err(Error::Parse(format!("expected an MPI tensor, found {k:?}"))),
        }
    }

    pub fn to_mpqc(&self) -> Result<MpqcTensor> {
        match self.kind {
            Kind::Mpqc => MpqcTensor::new(self.dense()?),
            Kind::Mpi | Kind::Certificate => Ok(crate::mp::mpqc_from_mpi(&self.to_mpi()?)),
            k => Err(Error::Parse(format!("expected a channel tensor, found {k:?}"))),
        }
    }

    pub fn to_mpdo(&self) -> Result<MpdoTensor> {
        match self.kind {
            Kind::Mpdo => MpdoTensor::new(self.dense()?),
            Kind::Mps => MpdoTensor::from_mps(&self.dense()?),
            k => Err(Error::Parse(format!("expected a state tensor, found {k:?}"))),
        }
    }

    pub fn to_gate(&self) -> Result<Mat> {
        if self.kind != Kind::Gate {
            return Err(Error::Parse(format!("expected a gate, found {:?}", self.kind)));
        }
        self.validate()?;
        let (r, c) = (self.shape[0], self.shape[1]);
        Ok(Mat::from_fn(r, c, |i, j| {
            let p = self.data[i * c + j];
            C64::new(p[0], p[1])
        }))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}
