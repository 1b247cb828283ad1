//! Dense complex tensors.
//!
//! A [`ComplexTensor`] stores its values in row-major order: the last index
//! varies fastest. Every other module in the crate builds on the small set of
//! operations here (index permutation, pairwise contraction and truncated
//! SVD), and the MPS code reaches for the matrix helpers directly.

use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Default relative singular-value cutoff.
pub const DEFAULT_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl ComplexTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Dimension(format!("zero extent in shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} holds {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![ZERO; n] }
    }

    pub fn scalar(v: C64) -> Self {
        Self { shape: vec![], data: vec![v] }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { shape: shape.to_vec(), data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(&[n, n], |ix| if ix[0] == ix[1] { ONE } else { ZERO })
    }

    /// Builds a rank-2 tensor from nested rows.
    pub fn matrix(rows: &[&[C64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Self::new(vec![r, c], rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn strides(shape: &[usize]) -> Vec<usize> {
        let mut st = vec![1usize; shape.len()];
        for ax in (0..shape.len().saturating_sub(1)).rev() {
            st[ax] = st[ax + 1] * shape[ax + 1];
        }
        st
    }

    fn offset(&self, idx: &[usize]) -> usize {
        let st = Self::strides(&self.shape);
        idx.iter().zip(st).map(|(i, s)| i * s).sum()
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: C64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, a: C64) {
        self.data.iter_mut().for_each(|z| *z *= a);
    }

    pub fn scaled(mut self, a: C64) -> Self {
        self.scale(a);
        self
    }

    pub fn conj(&self) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Reorders indices so that new index `k` is old index `axes[k]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if axes.len() != r || axes.iter().any(|&a| a >= r || std::mem::replace(&mut seen[a], true))
        {
            return Err(Error::Dimension(format!("invalid permutation {axes:?} for rank {r}")));
        }
        if axes.iter().enumerate().all(|(k, &a)| k == a) {
            return Ok(self.clone());
        }
        let old_st = Self::strides(&self.shape);
        let new_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let src_st: Vec<usize> = axes.iter().map(|&a| old_st[a]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; r];
        let mut off = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[off]);
            for ax in (0..r).rev() {
                idx[ax] += 1;
                off += src_st[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                off -= src_st[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self { shape: new_shape, data })
    }

    /// Kronecker-style outer product; result indices are those of `self` then `other`.
    pub fn outer(&self, other: &Self) -> Self {
        let mut data = Vec::with_capacity(self.len() * other.len());
        for a in &self.data {
            data.extend(other.data.iter().map(|b| a * b));
        }
        let mut shape = self.shape.clone();
        shape.extend_from_slice(&other.shape);
        Self { shape, data }
    }
}

/// Row-major `m x k` times `k x n`.
pub(crate) fn matmul_raw(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    // Row-major data read as column-major is the transpose, so C^T = B^T A^T.
    let at = MatRef::from_column_major_slice(a, k, m);
    let bt = MatRef::from_column_major_slice(b, n, k);
    let ct: Mat<C64> = bt * at;
    let mut out = Vec::with_capacity(m * n);
    for j in 0..m {
        out.extend_from_slice(ct.col_as_slice(j));
    }
    out
}

/// Thin QR of a row-major `m x n` matrix: `q` is `m x k`, `r` is `k x n`,
/// both row-major, with `k = min(m, n)`.
pub(crate) fn qr_raw(data: &[C64], m: usize, n: usize) -> (Vec<C64>, Vec<C64>, usize) {
    let a = MatRef::from_row_major_slice(data, m, n);
    let qr = a.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    let k = m.min(n);
    let mut qd = Vec::with_capacity(m * k);
    for i in 0..m {
        for a in 0..k {
            qd.push(q[(i, a)]);
        }
    }
    let mut rd = Vec::with_capacity(k * n);
    for a in 0..k {
        for j in 0..n {
            rd.push(if j < a { ZERO } else { r[(a, j)] });
        }
    }
    (qd, rd, k)
}

/// Contracts index pairs `(i in a, j in b)`; free indices of `a` come first, then those of `b`.
pub fn contract(a: &ComplexTensor, b: &ComplexTensor, pairs: &[(usize, usize)]) -> Result<ComplexTensor> {
    for &(i, j) in pairs {
        if i >= a.rank() || j >= b.rank() {
            return Err(Error::Dimension(format!("pair ({i},{j}) out of range")));
        }
        if a.shape[i] != b.shape[j] {
            return Err(Error::Dimension(format!(
                "extent mismatch on pair ({i},{j}): {} vs {}",
                a.shape[i], b.shape[j]
            )));
        }
    }
    let a_c: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let b_c: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let a_free: Vec<usize> = (0..a.rank()).filter(|x| !a_c.contains(x)).collect();
    let b_free: Vec<usize> = (0..b.rank()).filter(|x| !b_c.contains(x)).collect();
    let ap: Vec<usize> = a_free.iter().chain(a_c.iter()).copied().collect();
    let bp: Vec<usize> = b_c.iter().chain(b_free.iter()).copied().collect();
    let at = a.permute(&ap)?;
    let bt = b.permute(&bp)?;
    let m: usize = a_free.iter().map(|&x| a.shape[x]).product();
    let k: usize = a_c.iter().map(|&x| a.shape[x]).product();
    let n: usize = b_free.iter().map(|&x| b.shape[x]).product();
    let data = matmul_raw(&at.data, &bt.data, m, k, n);
    let shape: Vec<usize> = a_free
        .iter()
        .map(|&x| a.shape[x])
        .chain(b_free.iter().map(|&x| b.shape[x]))
        .collect();
    Ok(ComplexTensor { shape, data })
}

#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Row indices followed by the kept bond.
    pub u: ComplexTensor,
    /// Kept singular values, descending.
    pub s: Vec<f64>,
    /// Kept bond followed by the column indices.
    pub v: ComplexTensor,
    /// Discarded squared singular values over the total squared norm.
    pub discarded_weight: f64,
}

/// Raw truncated SVD of a row-major `m x n` matrix.
pub(crate) struct RawSvd {
    pub u: Vec<C64>,
    pub s: Vec<f64>,
    pub v: Vec<C64>,
    pub k: usize,
    pub discarded_weight: f64,
}

pub(crate) fn svd_raw(data: &[C64], m: usize, n: usize, chi_max: usize, tol: f64) -> Result<RawSvd> {
    let total: f64 = data.iter().map(|z| z.norm_sqr()).sum();
    if !total.is_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    if total == 0.0 {
        let mut u = vec![ZERO; m];
        u[0] = ONE;
        let mut v = vec![ZERO; n];
        v[0] = ONE;
        return Ok(RawSvd { u, s: vec![0.0], v, k: 1, discarded_weight: 0.0 });
    }
    let (s_all, uf, vf) = thin_svd(MatRef::from_row_major_slice(data, m, n))?;
    let r = s_all.len();
    let s1 = s_all[0];
    let mut k = s_all.iter().take_while(|&&x| x > 0.0 && x >= tol * s1).count();
    k = k.clamp(1, chi_max.max(1)).min(r);
    let kept: f64 = s_all[..k].iter().map(|x| x * x).sum();
    let dropped: f64 = s_all[k..].iter().map(|x| x * x).sum();
    let discarded_weight = dropped / (kept + dropped);
    let mut u = Vec::with_capacity(m * k);
    for i in 0..m {
        for a in 0..k {
            u.push(uf[(i, a)]);
        }
    }
    let mut v = Vec::with_capacity(k * n);
    for a in 0..k {
        for j in 0..n {
            v.push(vf[(j, a)].conj());
        }
    }
    Ok(RawSvd { u, s: s_all[..k].to_vec(), v, k, discarded_weight })
}

/// Thin SVD `a = U diag(s) V^H`. faer occasionally fails to converge on
/// nearly degenerate spectra; the adjoint and the R factor of a QR are tried next.
fn thin_svd(a: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>, Mat<C64>)> {
    let values = |s: faer::diag::DiagRef<'_, C64>| s.column_vector().iter().map(|z| z.re).collect::<Vec<f64>>();
    let first = match a.thin_svd() {
        Ok(d) => return Ok((values(d.S()), d.U().to_owned(), d.V().to_owned())),
        Err(e) => e,
    };
    if let Ok(d) = a.adjoint().thin_svd() {
        return Ok((values(d.S()), d.V().to_owned(), d.U().to_owned()));
    }
    let qr = a.qr();
    if let Ok(d) = qr.thin_R().thin_svd() {
        return Ok((values(d.S()), qr.compute_thin_Q() * d.U(), d.V().to_owned()));
    }
    Err(Error::Numerical(format!("svd did not converge: {first:?}")))
}

/// Truncated SVD across the partition `row_axes | remaining axes`.
///
/// Keeps at most `chi_max` singular values and drops trailing ones below
/// `tol * s_max`. Remaining axes keep their original relative order.
pub fn svd_truncate(t: &ComplexTensor, row_axes: &[usize], chi_max: usize, tol: f64) -> Result<SvdResult> {
    if chi_max == 0 {
        return Err(Error::Invalid("chi_max must be at least 1".into()));
    }
    if tol < 0.0 {
        return Err(Error::Invalid("tol must be nonnegative".into()));
    }
    let cols: Vec<usize> = (0..t.rank()).filter(|x| !row_axes.contains(x)).collect();
    let perm: Vec<usize> = row_axes.iter().chain(cols.iter()).copied().collect();
    let p = t.permute(&perm)?;
    let row_shape: Vec<usize> = row_axes.iter().map(|&x| t.shape[x]).collect();
    let col_shape: Vec<usize> = cols.iter().map(|&x| t.shape[x]).collect();
    let m: usize = row_shape.iter().product();
    let n: usize = col_shape.iter().product();
    let raw = svd_raw(&p.data, m, n, chi_max, tol)?;
    let mut us = row_shape;
    us.push(raw.k);
    let mut vs = vec![raw.k];
    vs.extend(col_shape);
    Ok(SvdResult {
        u: ComplexTensor::new(us, raw.u)?,
        s: raw.s,
        v: ComplexTensor::new(vs, raw.v)?,
        discarded_weight: raw.discarded_weight,
    })
}

/// Von Neumann entropy (natural log) of the normalized squared spectrum.
pub fn entropy_from_spectrum(s: &[f64]) -> Result<f64> {
    let tot: f64 = s.iter().map(|x| x * x).sum();
    if !(tot > 0.0) || !tot.is_finite() {
        return Err(Error::Invalid("spectrum is zero or non-finite".into()));
    }
    Ok(s.iter()
        .map(|x| x * x / tot)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}
