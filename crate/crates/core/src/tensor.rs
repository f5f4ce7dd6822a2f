//! Labelled dense complex tensors.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, ZERO};

/// Row-major complex array with one unique label per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    labels: Vec<String>,
    data: Vec<C64>,
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, labels: Vec<&str>, data: Vec<C64>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(String::from).collect();
        Self::from_parts(dims, labels, data)
    }

    pub fn from_parts(dims: Vec<usize>, labels: Vec<String>, data: Vec<C64>) -> Result<Self> {
        if dims.len() != labels.len() {
            return Err(Error::Shape(format!("{} dims but {} labels", dims.len(), labels.len())));
        }
        if dims.contains(&0) {
            return Err(Error::Shape(format!("zero extent in {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!("dims {dims:?} need {n} values, got {}", data.len())));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::Shape(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { dims, labels, data })
    }

    pub fn zeros(dims: Vec<usize>, labels: Vec<&str>) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, labels, vec![ZERO; n])
    }

    /// Build from a function of the multi-index.
    pub fn from_fn(dims: Vec<usize>, labels: Vec<&str>, mut f: impl FnMut(&[usize]) -> C64) -> Result<Self> {
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0; dims.len()];
        for _ in 0..n {
            data.push(f(&idx));
            for k in (0..dims.len()).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::new(dims, labels, data)
    }

    pub fn scalar(x: C64) -> Self {
        Self { dims: vec![], labels: vec![], data: vec![x] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn axis(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn extent(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.axis(label)?])
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| {
            debug_assert!(i < d);
            acc * d + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: C64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn relabel(mut self, from: &str, to: &str) -> Result<Self> {
        let a = self.axis(from)?;
        if from != to && self.labels.iter().any(|l| l == to) {
            return Err(Error::Shape(format!("label `{to}` already present")));
        }
        self.labels[a] = to.to_string();
        Ok(self)
    }

    pub fn conj(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            labels: self.labels.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dims: self.dims.clone(),
            labels: self.labels.clone(),
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Reorder axes to the given label order.
    pub fn permute(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.rank() {
            return Err(Error::Shape(format!("permute needs {} labels, got {}", self.rank(), order.len())));
        }
        let mut perm = Vec::with_capacity(order.len());
        for l in order {
            let a = self.axis(l)?;
            if perm.contains(&a) {
                return Err(Error::Shape(format!("label `{l}` repeated in permutation")));
            }
            perm.push(a);
        }
        Ok(self.permute_axes(&perm))
    }

    /// New axis `k` is old axis `perm[k]`.
    pub fn permute_axes(&self, perm: &[usize]) -> Self {
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let labels = perm.iter().map(|&p| self.labels[p].clone()).collect();
        let old_strides = strides(&self.dims);
        let src_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let data = permuted_copy(&self.data, &dims, &src_strides);
        Self { dims, labels, data }
    }

    /// Matrix with `rows` grouped (in the given order) against the remaining
    /// axes in their current order.
    pub fn to_matrix(&self, rows: &[&str]) -> Result<(Mat, Vec<String>)> {
        let mut order: Vec<&str> = rows.to_vec();
        let rest: Vec<String> = self
            .labels
            .iter()
            .filter(|l| !rows.contains(&l.as_str()))
            .cloned()
            .collect();
        for l in &rest {
            order.push(l);
        }
        let p = self.permute(&order)?;
        let nr: usize = rows.iter().map(|l| self.extent(l).unwrap()).product();
        let nc = p.len() / nr;
        Ok((linalg::from_vec(nr, nc, &p.data), rest))
    }

    /// Interpret a rank-2 tensor as a matrix.
    pub fn as_matrix(&self) -> Result<Mat> {
        if self.rank() != 2 {
            return Err(Error::Shape(format!("expected a rank-2 tensor, got rank {}", self.rank())));
        }
        Ok(linalg::from_vec(self.dims[0], self.dims[1], &self.data))
    }

    pub fn from_matrix(m: &Mat, row: &str, col: &str) -> Result<Self> {
        Self::new(vec![m.nrows(), m.ncols()], vec![row, col], linalg::to_vec(m))
    }

    /// Pairwise contraction. The result carries the unpaired axes of `a`
    /// followed by those of `b`, each in original order.
    pub fn contract(a: &Self, b: &Self, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut pa = Vec::with_capacity(pairs.len());
        let mut pb = Vec::with_capacity(pairs.len());
        for &(la, lb) in pairs {
            let ia = a.axis(la)?;
            let ib = b.axis(lb)?;
            if pa.contains(&ia) {
                return Err(Error::DuplicatePairing(la.to_string()));
            }
            if pb.contains(&ib) {
                return Err(Error::DuplicatePairing(lb.to_string()));
            }
            if a.dims[ia] != b.dims[ib] {
                return Err(Error::ExtentMismatch {
                    a: la.to_string(),
                    ea: a.dims[ia],
                    b: lb.to_string(),
                    eb: b.dims[ib],
                });
            }
            pa.push(ia);
            pb.push(ib);
        }
        let fa: Vec<usize> = (0..a.rank()).filter(|k| !pa.contains(k)).collect();
        let fb: Vec<usize> = (0..b.rank()).filter(|k| !pb.contains(k)).collect();
        let mut labels: Vec<String> = fa.iter().map(|&k| a.labels[k].clone()).collect();
        for &k in &fb {
            if labels.contains(&b.labels[k]) {
                return Err(Error::Shape(format!("result label `{}` appears twice", b.labels[k])));
            }
            labels.push(b.labels[k].clone());
        }
        let dims: Vec<usize> = fa.iter().map(|&k| a.dims[k]).chain(fb.iter().map(|&k| b.dims[k])).collect();
        let m: usize = fa.iter().map(|&k| a.dims[k]).product();
        let n: usize = fb.iter().map(|&k| b.dims[k]).product();
        let kk: usize = pa.iter().map(|&k| a.dims[k]).product();

        let perm_a: Vec<usize> = fa.iter().chain(pa.iter()).copied().collect();
        let perm_b: Vec<usize> = pb.iter().chain(fb.iter()).copied().collect();
        let ap = a.permute_axes(&perm_a);
        let bp = b.permute_axes(&perm_b);
        // row-major buffers read as column-major transposes: Cᵀ = Bᵀ·Aᵀ
        let at = faer::MatRef::from_column_major_slice(&ap.data, kk, m);
        let bt = faer::MatRef::from_column_major_slice(&bp.data, n, kk);
        let ct = bt * at;
        let mut data = Vec::with_capacity(m * n);
        for j in 0..m {
            data.extend_from_slice(ct.col_as_slice(j));
        }
        Ok(Self { dims, labels, data })
    }

    /// SVD with `row_axes` grouped as rows. Factors are truncated to the
    /// numerical rank (at least one component is kept).
    pub fn svd_split(&self, row_axes: &[&str], rank_tol: f64) -> Result<SvdResult> {
        if row_axes.is_empty() || row_axes.len() >= self.rank() {
            return Err(Error::Shape("svd_split needs a nonempty proper subset of axes as rows".into()));
        }
        let (m, rest) = self.to_matrix(row_axes)?;
        let d = linalg::svd(&m)?;
        let rank = d.rank(rank_tol);
        let keep = rank.max(1);
        let mut ldims: Vec<usize> = row_axes.iter().map(|l| self.extent(l).unwrap()).collect();
        ldims.push(keep);
        let mut llabels: Vec<String> = row_axes.iter().map(|s| s.to_string()).collect();
        llabels.push("svd".into());
        let u = Mat::from_fn(m.nrows(), keep, |i, j| d.u[(i, j)]);
        let left = Self::from_parts(ldims, llabels, linalg::to_vec(&u))?;
        let mut rdims = vec![keep];
        rdims.extend(rest.iter().map(|l| self.extent(l).unwrap()));
        let mut rlabels = vec!["svd".to_string()];
        rlabels.extend(rest.iter().cloned());
        let vh = Mat::from_fn(keep, m.ncols(), |i, j| d.v[(j, i)].conj());
        let right = Self::from_parts(rdims, rlabels, linalg::to_vec(&vh))?;
        Ok(SvdResult { left_isometry: left, singular_values: d.s, right_isometry: right, numerical_rank: rank })
    }

    pub fn eig(&self) -> Result<linalg::Eig> {
        let m = self.as_matrix()?;
        linalg::eig(&m)
    }

    pub fn pseudoinverse(&self, rank_tol: f64) -> Result<Self> {
        let m = self.as_matrix()?;
        let p = linalg::pinv(&m, rank_tol)?;
        Self::from_matrix(&p, &self.labels[1], &self.labels[0])
    }

    pub fn complete_to_unitary(&self) -> Result<Self> {
        let m = self.as_matrix()?;
        let u = linalg::complete_to_unitary(&m)?;
        Self::from_matrix(&u, &self.labels[0], &self.labels[1])
    }
}

/// Copy `src` into a new buffer of shape `dims`, reading element `idx` at
/// `Σ idx_k · src_strides_k`.
pub(crate) fn permuted_copy(src: &[C64], dims: &[usize], src_strides: &[usize]) -> Vec<C64> {
    let n: usize = dims.iter().product();
    let mut out = Vec::with_capacity(n);
    if dims.is_empty() {
        out.push(src[0]);
        return out;
    }
    let r = dims.len();
    let last = dims[r - 1];
    let ls = src_strides[r - 1];
    let mut idx = vec![0usize; r];
    let mut base = 0usize;
    let outer = n / last;
    for _ in 0..outer {
        for t in 0..last {
            out.push(src[base + t * ls]);
        }
        // advance the outer multi-index (all axes but the last)
        let mut k = r - 1;
        while k > 0 {
            k -= 1;
            idx[k] += 1;
            base += src_strides[k];
            if idx[k] < dims[k] {
                break;
            }
            base -= src_strides[k] * dims[k];
            idx[k] = 0;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct SvdResult {
    pub left_isometry: DenseTensor,
    pub singular_values: Vec<f64>,
    pub right_isometry: DenseTensor,
    pub numerical_rank: usize,
}

impl SvdResult {
    /// `L · diag(σ) · R` with the kept components.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        let k = self.left_isometry.extent("svd")?;
        // "svd" is the last axis of the left factor
        let mut l = self.left_isometry.clone();
        for (n, z) in l.data.iter_mut().enumerate() {
            *z *= self.singular_values[n % k];
        }
        DenseTensor::contract(&l, &self.right_isometry, &[("svd", "svd")])
    }
}

/// Reference contraction by explicit nested loops over all index values.
pub fn naive_contract(a: &DenseTensor, b: &DenseTensor, pairs: &[(&str, &str)]) -> Result<DenseTensor> {
    let pa: Vec<usize> = pairs.iter().map(|(l, _)| a.axis(l)).collect::<Result<_>>()?;
    let pb: Vec<usize> = pairs.iter().map(|(_, l)| b.axis(l)).collect::<Result<_>>()?;
    let fa: Vec<usize> = (0..a.rank()).filter(|k| !pa.contains(k)).collect();
    let fb: Vec<usize> = (0..b.rank()).filter(|k| !pb.contains(k)).collect();
    let dims: Vec<usize> = fa.iter().map(|&k| a.dims[k]).chain(fb.iter().map(|&k| b.dims[k])).collect();
    let labels: Vec<String> = fa.iter().map(|&k| a.labels[k].clone()).chain(fb.iter().map(|&k| b.labels[k].clone())).collect();
    let sum_dims: Vec<usize> = pa.iter().map(|&k| a.dims[k]).collect();
    let nsum: usize = sum_dims.iter().product();
    let nout: usize = dims.iter().product();
    let mut data = vec![ZERO; nout];
    let mut ia = vec![0; a.rank()];
    let mut ib = vec![0; b.rank()];
    for (o, slot) in data.iter_mut().enumerate() {
        let mut rem = o;
        for k in (0..dims.len()).rev() {
            let v = rem % dims[k];
            rem /= dims[k];
            if k < fa.len() {
                ia[fa[k]] = v;
            } else {
                ib[fb[k - fa.len()]] = v;
            }
        }
        for s in 0..nsum {
            let mut rem = s;
            for k in (0..sum_dims.len()).rev() {
                let v = rem % sum_dims[k];
                rem /= sum_dims[k];
                ia[pa[k]] = v;
                ib[pb[k]] = v;
            }
            *slot += a.get(&ia) * b.get(&ib);
        }
    }
    DenseTensor::from_parts(dims, labels, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ONE};

    #[test]
    fn identity_contraction() {
        let id = DenseTensor::from_fn(vec![2, 2], vec!["a", "b"], |i| if i[0] == i[1] { ONE } else { ZERO }).unwrap();
        let id2 = id.clone().relabel("a", "c").unwrap();
        let r = DenseTensor::contract(&id, &id2, &[("b", "b")]).unwrap();
        assert_eq!(r.labels(), &["a".to_string(), "c".to_string()]);
        assert_eq!(r.data(), id.data());
    }

    #[test]
    fn dot_product() {
        let v = DenseTensor::new(vec![2], vec!["x"], vec![c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let r = DenseTensor::contract(&v, &v, &[("x", "x")]).unwrap();
        assert_eq!(r.rank(), 0);
        assert_eq!(r.data()[0], c(5.0, 0.0));
    }

    #[test]
    fn contraction_errors() {
        let v = DenseTensor::new(vec![2], vec!["x"], vec![ONE, ONE]).unwrap();
        let w = DenseTensor::new(vec![3], vec!["y"], vec![ONE, ONE, ONE]).unwrap();
        assert!(matches!(DenseTensor::contract(&v, &w, &[("x", "y")]), Err(Error::ExtentMismatch { .. })));
        assert!(matches!(DenseTensor::contract(&v, &w, &[("z", "y")]), Err(Error::UnknownLabel(_))));
        assert!(matches!(
            DenseTensor::contract(&v, &v, &[("x", "x"), ("x", "x")]),
            Err(Error::DuplicatePairing(_))
        ));
    }

    #[test]
    fn svd_split_rank_one() {
        let t = DenseTensor::from_fn(vec![2, 3], vec!["a", "b"], |i| c((i[0] + 1) as f64, 0.0) * c(1.0, i[1] as f64))
            .unwrap();
        let s = t.svd_split(&["a"], 1e-10).unwrap();
        assert_eq!(s.numerical_rank, 1);
        let rec = s.reconstruct().unwrap();
        let diff: f64 = rec.data().iter().zip(t.data()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(diff < 1e-12);
    }

    #[test]
    fn svd_split_rejects_bad_rows() {
        let t = DenseTensor::zeros(vec![2, 2], vec!["a", "b"]).unwrap();
        assert!(t.svd_split(&[], 1e-10).is_err());
        assert!(t.svd_split(&["a", "b"], 1e-10).is_err());
    }

    #[test]
    fn permute_roundtrip() {
        let t = DenseTensor::from_fn(vec![2, 3, 4], vec!["a", "b", "c"], |i| c((i[0] * 12 + i[1] * 4 + i[2]) as f64, 0.0))
            .unwrap();
        let p = t.permute(&["c", "a", "b"]).unwrap();
        assert_eq!(p.get(&[3, 1, 2]), t.get(&[1, 2, 3]));
        let back = p.permute(&["a", "b", "c"]).unwrap();
        assert_eq!(back, t);
    }
}
