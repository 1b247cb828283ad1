//! Matrix product states in mixed-canonical form.
//!
//! Site tensors have shape `[left bond, physical, right bond]`. Tensors left
//! of the orthogonality center are left isometries, those right of it are
//! right isometries, and the center tensor is kept at unit norm. Every scalar
//! pulled out of the state (normalizations, non-unitary gate factors) goes
//! into `log_norm`, so the represented vector is `exp(log_norm) * |network>`.
//! Partition functions of a few hundred layers easily leave the range of
//! `f64`; the log accumulator keeps them exact.

use crate::error::{Error, Result};
use crate::tensors::{entropy_from_spectrum, matmul_raw, qr_raw, svd_raw, ComplexTensor, C64, ONE, ZERO};

/// Singular values across one bond.
#[derive(Clone, Debug)]
pub struct CutSpectrum {
    /// Bond index: the cut between sites `position` and `position + 1`.
    pub position: usize,
    pub s: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Mps {
    sites: Vec<ComplexTensor>,
    center: usize,
    log_norm: C64,
}

fn dims3(t: &ComplexTensor) -> (usize, usize, usize) {
    let s = t.shape();
    (s[0], s[1], s[2])
}

fn tensor3(l: usize, d: usize, r: usize, data: Vec<C64>) -> ComplexTensor {
    ComplexTensor::new(vec![l, d, r], data).expect("site shape matches data")
}

fn norm_of(data: &[C64]) -> f64 {
    data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl Mps {
    /// Product state from per-site vectors. Vectors are normalized and their
    /// norms recorded in `log_norm`.
    pub fn product_state(values: &[Vec<C64>]) -> Result<Self> {
        let mut sites = Vec::with_capacity(values.len());
        let mut log_norm = ZERO;
        for v in values {
            let n = norm_of(v);
            if v.is_empty() || n == 0.0 || !n.is_finite() {
                return Err(Error::Invalid("product state needs nonzero finite site vectors".into()));
            }
            log_norm += C64::new(n.ln(), 0.0);
            sites.push(tensor3(1, v.len(), 1, v.iter().map(|z| z / n).collect()));
        }
        Ok(Self { sites, center: 0, log_norm })
    }

    /// An MPS with no sites representing the scalar `exp(log_norm)`.
    pub fn empty() -> Self {
        Self { sites: Vec::new(), center: 0, log_norm: ZERO }
    }

    /// Decomposes a dense vector (first site slowest) by successive SVDs.
    pub fn from_dense(amps: &[C64], dims: &[usize], chi_max: usize, tol: f64) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total != amps.len() || dims.is_empty() {
            return Err(Error::Dimension(format!("{} amplitudes for dims {dims:?}", amps.len())));
        }
        let n = norm_of(amps);
        if n == 0.0 {
            return Err(Error::ZeroProbability(0.0));
        }
        let mut rest: Vec<C64> = amps.iter().map(|z| z / n).collect();
        let mut sites = Vec::with_capacity(dims.len());
        let mut l = 1usize;
        for (k, &d) in dims.iter().enumerate() {
            if k + 1 == dims.len() {
                sites.push(tensor3(l, d, 1, rest.clone()));
                break;
            }
            let cols = rest.len() / (l * d);
            let svd = svd_raw(&rest, l * d, cols, chi_max, tol)?;
            sites.push(tensor3(l, d, svd.k, svd.u));
            let mut next = svd.v;
            for a in 0..svd.k {
                for x in &mut next[a * cols..(a + 1) * cols] {
                    *x *= svd.s[a];
                }
            }
            l = svd.k;
            rest = next;
        }
        let mut m = Self { sites, center: dims.len() - 1, log_norm: C64::new(n.ln(), 0.0) };
        m.normalize_center()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn log_norm(&self) -> C64 {
        self.log_norm
    }

    pub fn add_log_norm(&mut self, z: C64) {
        self.log_norm += z;
    }

    pub fn sites(&self) -> &[ComplexTensor] {
        &self.sites
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|t| t.shape()[1]).collect()
    }

    /// Extents of the `len - 1` internal bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites.iter().skip(1).map(|t| t.shape()[0]).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn check_site(&self, i: usize) -> Result<()> {
        if i >= self.sites.len() {
            return Err(Error::Invalid(format!("site {i} out of range for {} sites", self.sites.len())));
        }
        Ok(())
    }

    fn normalize_center(&mut self) -> Result<f64> {
        let c = &mut self.sites[self.center];
        let n = c.norm();
        if !n.is_finite() {
            return Err(Error::NonFinite("mps center".into()));
        }
        if n == 0.0 {
            return Err(Error::ZeroProbability(0.0));
        }
        c.scale(C64::new(1.0 / n, 0.0));
        self.log_norm += C64::new(n.ln(), 0.0);
        Ok(n)
    }

    fn shift_right(&mut self) {
        let i = self.center;
        let (l, d, r) = dims3(&self.sites[i]);
        let (q, rm, k) = qr_raw(self.sites[i].data(), l * d, r);
        self.sites[i] = tensor3(l, d, k, q);
        let (_, d2, r2) = dims3(&self.sites[i + 1]);
        let next = matmul_raw(&rm, self.sites[i + 1].data(), k, r, d2 * r2);
        self.sites[i + 1] = tensor3(k, d2, r2, next);
        self.center = i + 1;
    }

    fn shift_left(&mut self) {
        let i = self.center;
        let (l, d, r) = dims3(&self.sites[i]);
        let data = self.sites[i].data();
        // QR of the adjoint: A^H = Q R  =>  A = R^H Q^H.
        let mut mh = vec![ZERO; d * r * l];
        for a in 0..l {
            for x in 0..d * r {
                mh[x * l + a] = data[a * d * r + x].conj();
            }
        }
        let (q, rm, k) = qr_raw(&mh, d * r, l);
        let mut qd = vec![ZERO; k * d * r];
        for x in 0..d * r {
            for a in 0..k {
                qd[a * d * r + x] = q[x * k + a].conj();
            }
        }
        self.sites[i] = tensor3(k, d, r, qd);
        let mut rh = vec![ZERO; l * k];
        for b in 0..k {
            for a in 0..l {
                rh[a * k + b] = rm[b * l + a].conj();
            }
        }
        let (l0, d0, _) = dims3(&self.sites[i - 1]);
        let prev = matmul_raw(self.sites[i - 1].data(), &rh, l0 * d0, l, k);
        self.sites[i - 1] = tensor3(l0, d0, k, prev);
        self.center = i - 1;
    }

    /// Moves the orthogonality center with QR steps.
    pub fn move_center(&mut self, to: usize) -> Result<()> {
        self.check_site(to)?;
        while self.center < to {
            self.shift_right();
        }
        while self.center > to {
            self.shift_left();
        }
        Ok(())
    }

    /// Applies a `[d_out, d_in]` operator to site `i`. Never truncates.
    pub fn apply_one_site(&mut self, i: usize, g: &ComplexTensor) -> Result<()> {
        self.check_site(i)?;
        let (l, d, r) = dims3(&self.sites[i]);
        if g.rank() != 2 || g.shape()[1] != d {
            return Err(Error::Dimension(format!("one-site operator {:?} on site of extent {d}", g.shape())));
        }
        self.move_center(i)?;
        let dout = g.shape()[0];
        let a = self.sites[i].data();
        let mut out = vec![ZERO; l * dout * r];
        for x in 0..l {
            for p in 0..dout {
                for q in 0..d {
                    let gv = g.data()[p * d + q];
                    if gv == ZERO {
                        continue;
                    }
                    let src = &a[(x * d + q) * r..(x * d + q + 1) * r];
                    let dst = &mut out[(x * dout + p) * r..(x * dout + p + 1) * r];
                    for (o, s) in dst.iter_mut().zip(src) {
                        *o += gv * s;
                    }
                }
            }
        }
        self.sites[i] = tensor3(l, dout, r, out);
        self.normalize_center()?;
        Ok(())
    }

    /// Applies a `[d1_out, d2_out, d1_in, d2_in]` gate to sites `i, i+1`.
    /// The center ends on `i + 1`. Returns the discarded weight.
    pub fn apply_two_site(&mut self, i: usize, g: &ComplexTensor, chi_max: usize, tol: f64) -> Result<f64> {
        self.check_site(i + 1)?;
        let (l, d1, _) = dims3(&self.sites[i]);
        let (_, d2, r) = dims3(&self.sites[i + 1]);
        let gs = g.shape();
        if g.rank() != 4 || gs[2] != d1 || gs[3] != d2 {
            return Err(Error::Dimension(format!("two-site gate {gs:?} on extents ({d1},{d2})")));
        }
        self.move_center(i)?;
        let (o1, o2) = (gs[0], gs[1]);
        let m = self.sites[i].shape()[2];
        // theta[l, d1, d2, r]
        let theta = matmul_raw(self.sites[i].data(), self.sites[i + 1].data(), l * d1, m, d2 * r);
        let mut out = vec![ZERO; l * o1 * o2 * r];
        let gd = g.data();
        for x in 0..l {
            for p1 in 0..o1 {
                for p2 in 0..o2 {
                    let dst_off = ((x * o1 + p1) * o2 + p2) * r;
                    for q1 in 0..d1 {
                        for q2 in 0..d2 {
                            let gv = gd[((p1 * o2 + p2) * d1 + q1) * d2 + q2];
                            if gv == ZERO {
                                continue;
                            }
                            let src_off = ((x * d1 + q1) * d2 + q2) * r;
                            for y in 0..r {
                                out[dst_off + y] += gv * theta[src_off + y];
                            }
                        }
                    }
                }
            }
        }
        let svd = svd_raw(&out, l * o1, o2 * r, chi_max, tol)?;
        self.sites[i] = tensor3(l, o1, svd.k, svd.u);
        let mut v = svd.v;
        for a in 0..svd.k {
            for z in &mut v[a * o2 * r..(a + 1) * o2 * r] {
                *z *= svd.s[a];
            }
        }
        self.sites[i + 1] = tensor3(svd.k, o2, r, v);
        self.center = i + 1;
        self.normalize_center()?;
        Ok(svd.discarded_weight)
    }

    /// Contracts an MPO exactly onto sites `start..start+mpo.len()` and
    /// recompresses. Leaves the center (at the last touched site)
    /// unnormalized and returns its norm with the summed discarded weight.
    fn apply_mpo_raw(&mut self, start: usize, mpo: &[ComplexTensor], chi_max: usize, tol: f64) -> Result<(f64, f64)> {
        if mpo.is_empty() {
            return Ok((1.0, 0.0));
        }
        let end = start + mpo.len() - 1;
        self.check_site(end)?;
        if mpo[0].shape()[0] != 1 || mpo[mpo.len() - 1].shape()[3] != 1 {
            return Err(Error::Dimension("MPO boundary bonds must have extent 1".into()));
        }
        for (j, w) in mpo.iter().enumerate() {
            let ws = w.shape();
            if w.rank() != 4 || ws[2] != self.sites[start + j].shape()[1] {
                return Err(Error::Dimension(format!("MPO tensor {ws:?} on site {}", start + j)));
            }
            if j + 1 < mpo.len() && ws[3] != mpo[j + 1].shape()[0] {
                return Err(Error::Dimension("MPO bond mismatch".into()));
            }
        }
        self.move_center(start)?;
        for (j, w) in mpo.iter().enumerate() {
            let i = start + j;
            let (l, d, r) = dims3(&self.sites[i]);
            let ws = w.shape();
            let (wl, dout, wr) = (ws[0], ws[1], ws[3]);
            let a = self.sites[i].data();
            let wd = w.data();
            let (nl, nr) = (l * wl, r * wr);
            let mut out = vec![ZERO; nl * dout * nr];
            for x in 0..wl {
                for p in 0..dout {
                    for q in 0..d {
                        for y in 0..wr {
                            let wv = wd[((x * dout + p) * d + q) * wr + y];
                            if wv == ZERO {
                                continue;
                            }
                            for al in 0..l {
                                let src = &a[(al * d + q) * r..(al * d + q + 1) * r];
                                let row = ((al * wl + x) * dout + p) * nr;
                                for (b, s) in src.iter().enumerate() {
                                    out[row + b * wr + y] += wv * s;
                                }
                            }
                        }
                    }
                }
            }
            self.sites[i] = tensor3(nl, dout, nr, out);
        }
        // Right-orthonormalize the touched block, then truncate left to right.
        self.center = end;
        while self.center > start {
            self.shift_left();
        }
        let mut discarded = 0.0;
        for i in start..end {
            let (l, d, r) = dims3(&self.sites[i]);
            let svd = svd_raw(self.sites[i].data(), l * d, r, chi_max, tol)?;
            discarded += svd.discarded_weight;
            let mut sv = svd.v;
            for a in 0..svd.k {
                for z in &mut sv[a * r..(a + 1) * r] {
                    *z *= svd.s[a];
                }
            }
            self.sites[i] = tensor3(l, d, svd.k, svd.u);
            let (_, d2, r2) = dims3(&self.sites[i + 1]);
            let next = matmul_raw(&sv, self.sites[i + 1].data(), svd.k, r, d2 * r2);
            self.sites[i + 1] = tensor3(svd.k, d2, r2, next);
        }
        self.center = end;
        let n = self.sites[end].norm();
        if !n.is_finite() {
            return Err(Error::NonFinite("mpo application".into()));
        }
        Ok((n, discarded))
    }

    /// Applies an MPO (tensors `[w_left, d_out, d_in, w_right]`) starting at
    /// `start`, absorbing the norm change into `log_norm`. Returns the
    /// discarded weight.
    pub fn apply_mpo(&mut self, start: usize, mpo: &[ComplexTensor], chi_max: usize, tol: f64) -> Result<f64> {
        let (_, disc) = self.apply_mpo_raw(start, mpo, chi_max, tol)?;
        self.normalize_center()?;
        Ok(disc)
    }

    /// Applies a projector given as an MPO and renormalizes to unit norm.
    /// Returns `ln <psi|P|psi>` for the normalized pre-projection state and
    /// the discarded weight; `log_norm` is left untouched.
    pub fn project_and_renormalize(
        &mut self,
        start: usize,
        projector: &[ComplexTensor],
        chi_max: usize,
        tol: f64,
    ) -> Result<(f64, f64)> {
        let (n, disc) = self.apply_mpo_raw(start, projector, chi_max, tol)?;
        if n * n < 1e-14 {
            return Err(Error::ZeroProbability(n));
        }
        let c = self.center;
        self.sites[c].scale(C64::new(1.0 / n, 0.0));
        Ok((2.0 * n.ln(), disc))
    }

    /// `<psi|O|psi>` for the normalized state with `O` a product of one-site
    /// operators (identity elsewhere).
    pub fn expectation_product(&mut self, ops: &[(usize, ComplexTensor)]) -> Result<C64> {
        if ops.is_empty() {
            return Ok(ONE);
        }
        let lo = ops.iter().map(|o| o.0).min().unwrap();
        let hi = ops.iter().map(|o| o.0).max().unwrap();
        self.check_site(hi)?;
        self.move_center(lo)?;
        let l0 = self.sites[lo].shape()[0];
        // env[a, a'] over ket/bra bonds
        let mut env = vec![ZERO; l0 * l0];
        for a in 0..l0 {
            env[a * l0 + a] = ONE;
        }
        let mut dim = l0;
        for i in lo..=hi {
            let (l, d, r) = dims3(&self.sites[i]);
            debug_assert_eq!(l, dim);
            let a = self.sites[i].data();
            let op = ops.iter().find(|o| o.0 == i).map(|o| &o.1);
            // ket' = O applied on physical index
            let ket: Vec<C64> = match op {
                None => a.to_vec(),
                Some(g) => {
                    let mut k = vec![ZERO; l * d * r];
                    for x in 0..l {
                        for p in 0..d {
                            for q in 0..d {
                                let gv = g.data()[p * d + q];
                                if gv == ZERO {
                                    continue;
                                }
                                for y in 0..r {
                                    k[(x * d + p) * r + y] += gv * a[(x * d + q) * r + y];
                                }
                            }
                        }
                    }
                    k
                }
            };
            // tmp[a', p, b] = sum_a env[a, a'] ket[a, p, b]  (env transposed)
            let mut envt = vec![ZERO; l * l];
            for x in 0..l {
                for y in 0..l {
                    envt[y * l + x] = env[x * l + y];
                }
            }
            let tmp = matmul_raw(&envt, &ket, l, l, d * r);
            // new[b, b'] = sum_{a', p} tmp[a', p, b] conj(a[a', p, b'])
            let mut new = vec![ZERO; r * r];
            for xp in 0..l * d {
                for b in 0..r {
                    let t = tmp[xp * r + b];
                    if t == ZERO {
                        continue;
                    }
                    for bp in 0..r {
                        new[b * r + bp] += t * a[xp * r + bp].conj();
                    }
                }
            }
            env = new;
            dim = r;
        }
        Ok((0..dim).map(|a| env[a * dim + a]).sum())
    }

    /// Samples site `i` in the basis given by the columns of the unitary
    /// `basis`, using the uniform variate `u`, and removes the site.
    /// Returns the outcome index and its probability.
    pub fn measure_out(&mut self, i: usize, basis: &ComplexTensor, u: f64) -> Result<(usize, f64)> {
        self.check_site(i)?;
        self.move_center(i)?;
        let (l, d, r) = dims3(&self.sites[i]);
        if basis.shape() != [d, d] {
            return Err(Error::Dimension("measurement basis extent".into()));
        }
        let a = self.sites[i].data().to_vec();
        let b = basis.data();
        // projected[k][x, y] = sum_p conj(B[p,k]) A[x,p,y]
        let mut probs = vec![0.0; d];
        let mut proj = vec![vec![ZERO; l * r]; d];
        for (k, pk) in proj.iter_mut().enumerate() {
            for x in 0..l {
                for p in 0..d {
                    let c = b[p * d + k].conj();
                    if c == ZERO {
                        continue;
                    }
                    for y in 0..r {
                        pk[x * r + y] += c * a[(x * d + p) * r + y];
                    }
                }
            }
            probs[k] = pk.iter().map(|z| z.norm_sqr()).sum();
        }
        let tot: f64 = probs.iter().sum();
        if !(tot > 0.0) {
            return Err(Error::ZeroProbability(tot));
        }
        probs.iter_mut().for_each(|p| *p /= tot);
        let mut outcome = d - 1;
        let mut acc = 0.0;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                outcome = k;
                break;
            }
        }
        while probs[outcome] < 1e-14 {
            outcome = (outcome + 1) % d;
        }
        let scale = 1.0 / (probs[outcome] * tot).sqrt();
        let m: Vec<C64> = proj[outcome].iter().map(|z| z * scale).collect();
        self.sites.remove(i);
        if i > 0 {
            let (l0, d0, _) = dims3(&self.sites[i - 1]);
            let prev = matmul_raw(self.sites[i - 1].data(), &m, l0 * d0, l, r);
            self.sites[i - 1] = tensor3(l0, d0, r, prev);
            self.center = i - 1;
        } else if !self.sites.is_empty() {
            let (_, d1, r1) = dims3(&self.sites[0]);
            let next = matmul_raw(&m, self.sites[0].data(), l, r, d1 * r1);
            self.sites[0] = tensor3(l, d1, r1, next);
            self.center = 0;
        } else {
            self.center = 0;
        }
        Ok((outcome, probs[outcome]))
    }

    /// Replaces the `n_in` contiguous sites starting at `start` by new sites
    /// of extents `out_dims`, acting with `op` (a `[prod(out_dims), prod(in dims)]`
    /// matrix, first site slowest on both sides). With `n_in == 0` the op is a
    /// state inserted before `start`. The center ends on the last new site.
    pub fn replace_window(
        &mut self,
        start: usize,
        n_in: usize,
        op: &ComplexTensor,
        out_dims: &[usize],
        chi_max: usize,
        tol: f64,
    ) -> Result<f64> {
        if out_dims.is_empty() {
            return Err(Error::Invalid("replacement must produce at least one site".into()));
        }
        let d_out: usize = out_dims.iter().product();
        if n_in == 0 {
            if op.len() != d_out {
                return Err(Error::Dimension("inserted state size".into()));
            }
            if self.sites.is_empty() {
                let mut fresh = Self::from_dense(op.data(), out_dims, chi_max, tol)?;
                fresh.log_norm += self.log_norm;
                *self = fresh;
                return Ok(0.0);
            }
            // Fold the insertion into a neighbouring site.
            let (host, before) = if start > 0 { (start - 1, false) } else { (0, true) };
            self.check_site(host)?;
            let dh = self.sites[host].shape()[1];
            let id = ComplexTensor::identity(dh);
            let state = op.clone().reshape(&[d_out, 1])?;
            let (full, dims): (ComplexTensor, Vec<usize>) = if before {
                let mut dims = out_dims.to_vec();
                dims.push(dh);
                (state.outer(&id), dims)
            } else {
                let mut dims = vec![dh];
                dims.extend_from_slice(out_dims);
                (id.outer(&state), dims)
            };
            // outer gives [.., ..] indices in (row, col) blocks; regroup to matrix
            let full = full.permute(&[0, 2, 1, 3])?.reshape(&[d_out * dh, dh])?;
            return self.replace_window(host, 1, &full, &dims, chi_max, tol);
        }
        let end = start + n_in - 1;
        self.check_site(end)?;
        let d_in: usize = (start..=end).map(|i| self.sites[i].shape()[1]).product();
        if op.shape() != [d_out, d_in] {
            return Err(Error::Dimension(format!(
                "window op {:?} for in {d_in} out {d_out}",
                op.shape()
            )));
        }
        self.move_center(start)?;
        // Contract the window into block[l, D_in, r].
        let l = self.sites[start].shape()[0];
        let mut block = self.sites[start].data().to_vec();
        let mut din_acc = self.sites[start].shape()[1];
        let mut r = self.sites[start].shape()[2];
        for i in start + 1..=end {
            let (_, d, r2) = dims3(&self.sites[i]);
            block = matmul_raw(&block, self.sites[i].data(), l * din_acc, r, d * r2);
            din_acc *= d;
            r = r2;
        }
        // new[l, D_out, r] = sum_in op[out, in] block[l, in, r]
        let mut newb = vec![ZERO; l * d_out * r];
        let od = op.data();
        for x in 0..l {
            let bx = &block[x * d_in * r..(x + 1) * d_in * r];
            let res = matmul_raw(od, bx, d_out, d_in, r);
            newb[x * d_out * r..(x + 1) * d_out * r].copy_from_slice(&res);
        }
        // Split into out sites left to right.
        let mut new_sites = Vec::with_capacity(out_dims.len());
        let mut rest = newb;
        let mut lcur = l;
        let mut discarded = 0.0;
        for (k, &d) in out_dims.iter().enumerate() {
            if k + 1 == out_dims.len() {
                new_sites.push(tensor3(lcur, d, r, rest));
                break;
            }
            let cols = rest.len() / (lcur * d);
            let svd = svd_raw(&rest, lcur * d, cols, chi_max, tol)?;
            discarded += svd.discarded_weight;
            new_sites.push(tensor3(lcur, d, svd.k, svd.u));
            let mut v = svd.v;
            for a in 0..svd.k {
                for z in &mut v[a * cols..(a + 1) * cols] {
                    *z *= svd.s[a];
                }
            }
            lcur = svd.k;
            rest = v;
        }
        let n_out = new_sites.len();
        self.sites.splice(start..=end, new_sites);
        self.center = start + n_out - 1;
        self.normalize_center()?;
        Ok(discarded)
    }

    /// Singular values at every internal bond, sweeping the center across.
    pub fn cut_spectra(&mut self) -> Result<Vec<CutSpectrum>> {
        let n = self.sites.len();
        if n < 2 {
            return Ok(Vec::new());
        }
        self.move_center(0)?;
        let mut out = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let (l, d, r) = dims3(&self.sites[i]);
            let svd = svd_raw(self.sites[i].data(), l * d, r, usize::MAX, 0.0)?;
            let mut v = svd.v;
            for a in 0..svd.k {
                for z in &mut v[a * r..(a + 1) * r] {
                    *z *= svd.s[a];
                }
            }
            self.sites[i] = tensor3(l, d, svd.k, svd.u);
            let (_, d2, r2) = dims3(&self.sites[i + 1]);
            let next = matmul_raw(&v, self.sites[i + 1].data(), svd.k, r, d2 * r2);
            self.sites[i + 1] = tensor3(svd.k, d2, r2, next);
            self.center = i + 1;
            out.push(CutSpectrum { position: i, s: svd.s });
        }
        Ok(out)
    }

    /// Entanglement entropy at every internal cut.
    pub fn cut_entropies(&mut self) -> Result<Vec<(usize, f64)>> {
        self.cut_spectra()?
            .into_iter()
            .map(|c| Ok((c.position, entropy_from_spectrum(&c.s)?)))
            .collect()
    }

    /// Spectrum of the bond right of site `cut`, leaving the center at `cut + 1`.
    pub fn spectrum_at(&mut self, cut: usize) -> Result<Vec<f64>> {
        self.check_site(cut + 1)?;
        self.move_center(cut)?;
        let (l, d, r) = dims3(&self.sites[cut]);
        let svd = svd_raw(self.sites[cut].data(), l * d, r, usize::MAX, 0.0)?;
        Ok(svd.s)
    }

    /// Entropy across the middle bond (left part holds `len / 2` sites).
    pub fn half_cut_entropy(&mut self) -> Result<f64> {
        let n = self.sites.len();
        if n < 2 {
            return Ok(0.0);
        }
        let s = self.spectrum_at(n / 2 - 1)?;
        entropy_from_spectrum(&s)
    }

    /// Overlap `<v_1 ⊗ ... ⊗ v_n | network>` without conjugating `v` and
    /// without `exp(log_norm)`.
    pub fn overlap_product(&self, values: &[Vec<C64>]) -> Result<C64> {
        if values.len() != self.sites.len() {
            return Err(Error::Dimension("overlap vector count".into()));
        }
        let mut env = vec![ONE];
        for (t, v) in self.sites.iter().zip(values) {
            let (l, d, r) = dims3(t);
            if v.len() != d {
                return Err(Error::Dimension("overlap vector extent".into()));
            }
            let mut m = vec![ZERO; l * r];
            for x in 0..l {
                for p in 0..d {
                    let c = v[p];
                    if c == ZERO {
                        continue;
                    }
                    for y in 0..r {
                        m[x * r + y] += c * t.data()[(x * d + p) * r + y];
                    }
                }
            }
            env = matmul_raw(&env, &m, 1, l, r);
        }
        Ok(env[0])
    }

    /// Dense amplitudes including `exp(log_norm)`; first site slowest.
    pub fn to_dense(&self) -> Vec<C64> {
        let scale = self.log_norm.exp();
        if self.sites.is_empty() {
            return vec![scale];
        }
        let mut acc = self.sites[0].data().to_vec();
        let mut d_acc = self.sites[0].shape()[1];
        let mut r = self.sites[0].shape()[2];
        for t in &self.sites[1..] {
            let (_, d, r2) = dims3(t);
            acc = matmul_raw(&acc, t.data(), d_acc, r, d * r2);
            d_acc *= d;
            r = r2;
        }
        acc.into_iter().map(|z| z * scale).collect()
    }

    /// Largest deviation of the canonical-form isometry conditions.
    pub fn canonical_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, t) in self.sites.iter().enumerate() {
            let (l, d, r) = dims3(t);
            let a = t.data();
            if i < self.center {
                for b in 0..r {
                    for bp in 0..r {
                        let mut z = ZERO;
                        for xp in 0..l * d {
                            z += a[xp * r + b].conj() * a[xp * r + bp];
                        }
                        let want = if b == bp { ONE } else { ZERO };
                        worst = worst.max((z - want).norm());
                    }
                }
            } else if i > self.center {
                for x in 0..l {
                    for xp in 0..l {
                        let mut z = ZERO;
                        for k in 0..d * r {
                            z += a[x * d * r + k] * a[xp * d * r + k].conj();
                        }
                        let want = if x == xp { ONE } else { ZERO };
                        worst = worst.max((z - want).norm());
                    }
                }
            } else {
                worst = worst.max((t.norm() - 1.0).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensors::I;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
        fn c(&mut self) -> C64 {
            c(self.next() - 0.5, self.next() - 0.5)
        }
    }

    fn random_state(n: usize, rng: &mut Lcg) -> Vec<C64> {
        (0..1usize << n).map(|_| rng.c()).collect()
    }

    fn random_tensor(shape: &[usize], rng: &mut Lcg) -> ComplexTensor {
        ComplexTensor::from_fn(shape, |_| rng.c())
    }

    /// Dense oracle: apply a k-site operator on consecutive qubits starting at `i`.
    fn dense_apply(psi: &[C64], n: usize, i: usize, k: usize, g: &[C64]) -> Vec<C64> {
        let dk = 1usize << k;
        let right = 1usize << (n - i - k);
        let left = 1usize << i;
        let mut out = vec![ZERO; psi.len()];
        for a in 0..left {
            for b in 0..right {
                for p in 0..dk {
                    let mut acc = ZERO;
                    for q in 0..dk {
                        acc += g[p * dk + q] * psi[(a * dk + q) * right + b];
                    }
                    out[(a * dk + p) * right + b] = acc;
                }
            }
        }
        out
    }

    fn fidelity(a: &[C64], b: &[C64]) -> f64 {
        let ov: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        ov.norm_sqr() / (norm_of(a).powi(2) * norm_of(b).powi(2))
    }

    fn assert_close(a: &[C64], b: &[C64], tol: f64) {
        let err = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= tol * norm_of(b).max(1e-300), "error {err}");
    }

    fn pauli_x() -> ComplexTensor {
        ComplexTensor::matrix(&[&[ZERO, ONE], &[ONE, ZERO]]).unwrap()
    }

    #[test]
    fn product_state_basics() {
        let h = 1.0 / 2f64.sqrt();
        let mut m = Mps::product_state(&vec![vec![c(h, 0.0), c(h, 0.0)]; 3]).unwrap();
        assert!(m.log_norm().norm() < 1e-15);
        assert!(m.cut_entropies().unwrap().iter().all(|&(_, s)| s.abs() < 1e-14));
        let one = Mps::product_state(&[vec![ONE, ZERO]]).unwrap();
        assert_eq!(one.to_dense(), vec![ONE, ZERO]);
        assert!(Mps::product_state(&[vec![ZERO, ZERO]]).is_err());
    }

    #[test]
    fn product_state_matches_kronecker() {
        let vs = vec![
            vec![c(1.0, 0.5), c(-0.3, 0.2)],
            vec![c(0.0, 1.0), c(2.0, 0.0)],
            vec![c(0.7, 0.0), c(0.1, -0.4)],
            vec![c(1.0, 1.0), c(0.0, 0.0)],
        ];
        let m = Mps::product_state(&vs).unwrap();
        let mut kron = vec![ONE];
        for v in &vs {
            kron = kron.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        }
        assert_close(&m.to_dense(), &kron, 1e-14);
    }

    #[test]
    fn identity_gate_leaves_state_unchanged() {
        let mut rng = Lcg(3);
        let psi = random_state(4, &mut rng);
        let mut m = Mps::from_dense(&psi, &[2; 4], 64, 0.0).unwrap();
        let id = ComplexTensor::identity(4).reshape(&[2, 2, 2, 2]).unwrap();
        let disc = m.apply_two_site(1, &id, 64, 0.0).unwrap();
        assert_eq!(disc, 0.0);
        assert_close(&m.to_dense(), &psi, 1e-12);
        m.apply_one_site(2, &ComplexTensor::identity(2)).unwrap();
        assert_close(&m.to_dense(), &psi, 1e-12);
    }

    #[test]
    fn swap_gate_exchanges_components() {
        let a = vec![c(0.6, 0.0), c(0.8, 0.0)];
        let b = vec![c(0.0, 1.0), ZERO];
        let mut m = Mps::product_state(&[a.clone(), b.clone()]).unwrap();
        let swap = ComplexTensor::from_fn(&[2, 2, 2, 2], |ix| {
            if ix[0] == ix[3] && ix[1] == ix[2] { ONE } else { ZERO }
        });
        m.apply_two_site(0, &swap, 4, 0.0).unwrap();
        let want = Mps::product_state(&[b, a]).unwrap().to_dense();
        assert_close(&m.to_dense(), &want, 1e-14);
    }

    #[test]
    fn pauli_x_flips_one_site() {
        let mut m = Mps::product_state(&vec![vec![ONE, ZERO]; 3]).unwrap();
        m.apply_one_site(1, &pauli_x()).unwrap();
        let d = m.to_dense();
        assert!((d[0b010] - ONE).norm() < 1e-15);
        assert!((d.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gates_match_dense_oracle() {
        let mut rng = Lcg(17);
        let n = 6;
        let mut psi = random_state(n, &mut rng);
        let mut m = Mps::from_dense(&psi, &[2; 6], 64, 0.0).unwrap();
        for step in 0..25 {
            if step % 3 == 0 {
                let i = (step * 7) % n;
                let g = random_tensor(&[2, 2], &mut rng);
                psi = dense_apply(&psi, n, i, 1, g.data());
                m.apply_one_site(i, &g).unwrap();
            } else {
                let i = (step * 5) % (n - 1);
                let g = random_tensor(&[2, 2, 2, 2], &mut rng);
                psi = dense_apply(&psi, n, i, 2, g.data());
                m.apply_two_site(i, &g, 64, 0.0).unwrap();
            }
            assert!(m.canonical_error() < 1e-10);
        }
        assert_close(&m.to_dense(), &psi, 1e-10);
    }

    #[test]
    fn twelve_site_gate_sequence_keeps_fidelity() {
        let mut rng = Lcg(99);
        let n = 12;
        let mut psi = vec![ZERO; 1 << n];
        psi[0] = ONE;
        let mut m = Mps::product_state(&vec![vec![ONE, ZERO]; n]).unwrap();
        for step in 0..40 {
            let i = (step * 5 + 3) % (n - 1);
            let g = random_tensor(&[2, 2, 2, 2], &mut rng);
            psi = dense_apply(&psi, n, i, 2, g.data());
            m.apply_two_site(i, &g, 64, 0.0).unwrap();
        }
        assert!(1.0 - fidelity(&m.to_dense(), &psi) < 1e-10);
        assert_close(&m.to_dense(), &psi, 1e-9);
    }

    #[test]
    fn mpo_application_matches_dense() {
        let mut rng = Lcg(5);
        let n = 5;
        let psi = random_state(n, &mut rng);
        let mut m = Mps::from_dense(&psi, &[2; 5], 64, 0.0).unwrap();
        let mpo = vec![
            random_tensor(&[1, 2, 2, 3], &mut rng),
            random_tensor(&[3, 2, 2, 2], &mut rng),
            random_tensor(&[2, 2, 2, 1], &mut rng),
        ];
        // dense operator on sites 1..=3
        let mut op = vec![ZERO; 64];
        for po in 0..8usize {
            for pi in 0..8usize {
                let (o0, o1, o2) = (po >> 2, (po >> 1) & 1, po & 1);
                let (i0, i1, i2) = (pi >> 2, (pi >> 1) & 1, pi & 1);
                let mut acc = ZERO;
                for a in 0..3 {
                    for b in 0..2 {
                        acc += mpo[0].get(&[0, o0, i0, a]) * mpo[1].get(&[a, o1, i1, b]) * mpo[2].get(&[b, o2, i2, 0]);
                    }
                }
                op[po * 8 + pi] = acc;
            }
        }
        let want = dense_apply(&psi, n, 1, 3, &op);
        m.apply_mpo(1, &mpo, 64, 0.0).unwrap();
        assert!(m.canonical_error() < 1e-10);
        assert_close(&m.to_dense(), &want, 1e-11);
    }

    #[test]
    fn projector_weights() {
        let h = 1.0 / 2f64.sqrt();
        let mut m = Mps::product_state(&[vec![c(h, 0.0), c(h, 0.0)]]).unwrap();
        let id = vec![ComplexTensor::identity(2).reshape(&[1, 2, 2, 1]).unwrap()];
        let (lw, _) = m.project_and_renormalize(0, &id, 4, 0.0).unwrap();
        assert!(lw.abs() < 1e-14);
        let p0 = vec![ComplexTensor::matrix(&[&[ONE, ZERO], &[ZERO, ZERO]]).unwrap().reshape(&[1, 2, 2, 1]).unwrap()];
        let (lw, _) = m.project_and_renormalize(0, &p0, 4, 0.0).unwrap();
        assert!((lw.exp() - 0.5).abs() < 1e-14);
        let p1 = vec![ComplexTensor::matrix(&[&[ZERO, ZERO], &[ZERO, ONE]]).unwrap().reshape(&[1, 2, 2, 1]).unwrap()];
        assert!(matches!(m.project_and_renormalize(0, &p1, 4, 0.0), Err(Error::ZeroProbability(_))));
    }

    /// (1 + s Z_a Z_b Z_c Z_d)/2 over four consecutive sites as a bond-2 MPO.
    fn zzzz_projector(sign: f64) -> Vec<ComplexTensor> {
        let z = |p: usize| if p == 0 { 1.0 } else { -1.0 };
        let mut out = Vec::new();
        for k in 0..4 {
            let (wl, wr) = (if k == 0 { 1 } else { 2 }, if k == 3 { 1 } else { 2 });
            out.push(ComplexTensor::from_fn(&[wl, 2, 2, wr], |ix| {
                if ix[1] != ix[2] {
                    return ZERO;
                }
                let branch_l = if k == 0 { ix[3] } else { ix[0] };
                let branch_r = if k == 3 { branch_l } else { ix[3] };
                if branch_l != branch_r {
                    return ZERO;
                }
                let mut v = if branch_l == 1 { z(ix[1]) } else { 1.0 };
                if k == 3 {
                    v *= if branch_l == 1 { sign * 0.5 } else { 0.5 };
                }
                c(v, 0.0)
            }));
        }
        out
    }

    #[test]
    fn stabilizer_projector_weight_matches_dense() {
        let mut rng = Lcg(23);
        let psi = random_state(4, &mut rng);
        let n2 = norm_of(&psi).powi(2);
        let mut total = 0.0;
        for sign in [1.0, -1.0] {
            let mut m = Mps::from_dense(&psi, &[2; 4], 64, 0.0).unwrap();
            let (lw, _) = m.project_and_renormalize(0, &zzzz_projector(sign), 64, 0.0).unwrap();
            let want: f64 = psi
                .iter()
                .enumerate()
                .filter(|(k, _)| {
                    let par = (k.count_ones() % 2) as f64;
                    (1.0 - 2.0 * par) == sign
                })
                .map(|(_, z)| z.norm_sqr())
                .sum::<f64>()
                / n2;
            assert!((lw.exp() - want).abs() < 1e-12);
            total += lw.exp();
        }
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn measuring_plus_in_x_basis_is_deterministic() {
        let h = 1.0 / 2f64.sqrt();
        let xb = ComplexTensor::matrix(&[&[c(h, 0.0), c(h, 0.0)], &[c(h, 0.0), c(-h, 0.0)]]).unwrap();
        for u in [0.0, 0.5, 0.999] {
            let mut m = Mps::product_state(&[vec![c(h, 0.0), c(h, 0.0)], vec![ONE, ZERO]]).unwrap();
            let (k, p) = m.measure_out(0, &xb, u).unwrap();
            assert_eq!(k, 0);
            assert!((p - 1.0).abs() < 1e-14);
            assert_eq!(m.len(), 1);
        }
        let mut m = Mps::product_state(&[vec![ONE, ZERO]]).unwrap();
        let (k, p) = m.measure_out(0, &xb, 0.7).unwrap();
        assert_eq!(k, 1);
        assert!((p - 0.5).abs() < 1e-14);
        assert!(m.is_empty());
    }

    #[test]
    fn measuring_zero_state_in_x_basis_is_fair() {
        let h = 1.0 / 2f64.sqrt();
        let xb = ComplexTensor::matrix(&[&[c(h, 0.0), c(h, 0.0)], &[c(h, 0.0), c(-h, 0.0)]]).unwrap();
        let mut rng = Lcg(8);
        let trials = 20000;
        let mut ones = 0;
        for _ in 0..trials {
            let mut m = Mps::product_state(&[vec![ONE, ZERO], vec![ONE, ZERO]]).unwrap();
            let (k, _) = m.measure_out(1, &xb, rng.next()).unwrap();
            ones += k;
        }
        let frac = ones as f64 / trials as f64;
        // 4 sigma of a fair binomial
        assert!((frac - 0.5).abs() < 4.0 * (0.25 / trials as f64).sqrt());
    }

    #[test]
    fn bell_pair_measurement_collapses_partner() {
        let h = 1.0 / 2f64.sqrt();
        let bell = vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)];
        let zb = ComplexTensor::identity(2);
        for u in [0.2, 0.8] {
            let mut m = Mps::from_dense(&bell, &[2, 2], 4, 0.0).unwrap();
            let (k, p) = m.measure_out(0, &zb, u).unwrap();
            assert!((p - 0.5).abs() < 1e-14);
            let rest = m.to_dense();
            assert!((rest[k].norm() - 1.0).abs() < 1e-14);
            assert!(rest[1 - k].norm() < 1e-14);
        }
        // Measuring the second qubit in the X basis leaves the first in the matching X state.
        let xb = ComplexTensor::matrix(&[&[c(h, 0.0), c(h, 0.0)], &[c(h, 0.0), c(-h, 0.0)]]).unwrap();
        let mut m = Mps::from_dense(&bell, &[2, 2], 4, 0.0).unwrap();
        let (k, _) = m.measure_out(1, &xb, 0.9).unwrap();
        let rest = m.to_dense();
        let sign = if k == 0 { 1.0 } else { -1.0 };
        assert_close(&rest, &[c(h, 0.0), c(sign * h, 0.0)], 1e-13);
    }

    #[test]
    fn bell_pair_has_ln2_at_middle_cut() {
        let h = 1.0 / 2f64.sqrt();
        let mut m = Mps::from_dense(&[c(h, 0.0), ZERO, ZERO, c(0.0, h)], &[2, 2], 4, 0.0).unwrap();
        let e = m.cut_entropies().unwrap();
        assert_eq!(e.len(), 1);
        assert!((e[0].1 - 2f64.ln()).abs() < 1e-13);
    }

    fn dense_entropy(psi: &[C64], n: usize, cut: usize) -> f64 {
        let rows = 1usize << cut;
        let cols = 1usize << (n - cut);
        let m = faer::Mat::<C64>::from_fn(rows, cols, |i, j| psi[i * cols + j]);
        let rho = &m * m.adjoint();
        let tr: f64 = (0..rows).map(|i| rho[(i, i)].re).sum();
        let eig = rho.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        eig.iter()
            .map(|&x| x / tr)
            .filter(|&p| p > 1e-300)
            .map(|p| -p * p.ln())
            .sum()
    }

    #[test]
    fn cut_entropies_match_reduced_density_matrix() {
        let mut rng = Lcg(41);
        let psi = random_state(6, &mut rng);
        let mut m = Mps::from_dense(&psi, &[2; 6], 64, 0.0).unwrap();
        for (cut, s) in m.cut_entropies().unwrap() {
            assert!((s - dense_entropy(&psi, 6, cut + 1)).abs() < 1e-10);
        }
    }

    #[test]
    fn window_replacement_matches_dense() {
        let mut rng = Lcg(77);
        let psi = random_state(4, &mut rng);
        let mut m = Mps::from_dense(&psi, &[2; 4], 64, 0.0).unwrap();
        // map sites 1,2 (dim 4) to three sites (dim 8)
        let op = random_tensor(&[8, 4], &mut rng);
        m.replace_window(1, 2, &op, &[2, 2, 2], 64, 0.0).unwrap();
        let mut want = vec![ZERO; 32];
        for a in 0..2 {
            for b in 0..2 {
                for o in 0..8 {
                    let mut acc = ZERO;
                    for q in 0..4 {
                        acc += op.data()[o * 4 + q] * psi[(a * 4 + q) * 2 + b];
                    }
                    want[(a * 8 + o) * 2 + b] = acc;
                }
            }
        }
        assert_eq!(m.len(), 5);
        assert!(m.canonical_error() < 1e-10);
        assert_close(&m.to_dense(), &want, 1e-12);
    }

    #[test]
    fn window_insertion_of_a_state() {
        let v = vec![c(0.6, 0.0), c(0.0, 0.8)];
        let w = vec![ONE, ZERO];
        let ins = ComplexTensor::new(vec![2], vec![c(0.0, 1.0), c(1.0, 0.0)]).unwrap();
        for pos in 0..=2 {
            let mut m = Mps::product_state(&[v.clone(), w.clone()]).unwrap();
            m.replace_window(pos, 0, &ins, &[2], 4, 0.0).unwrap();
            let mut parts = vec![v.clone(), w.clone()];
            parts.insert(pos, ins.data().to_vec());
            let want = Mps::product_state(&parts).unwrap().to_dense();
            assert_close(&m.to_dense(), &want, 1e-13);
        }
        let mut e = Mps::empty();
        e.replace_window(0, 0, &ins, &[2], 4, 0.0).unwrap();
        assert_close(&e.to_dense(), ins.data(), 1e-14);
    }

    #[test]
    fn expectation_of_pauli_string() {
        let mut rng = Lcg(12);
        let psi = random_state(5, &mut rng);
        let mut m = Mps::from_dense(&psi, &[2; 5], 64, 0.0).unwrap();
        let z = ComplexTensor::matrix(&[&[ONE, ZERO], &[ZERO, -ONE]]).unwrap();
        let y = ComplexTensor::matrix(&[&[ZERO, -I], &[I, ZERO]]).unwrap();
        let got = m.expectation_product(&[(1, z.clone()), (3, y.clone())]).unwrap();
        let mut op = vec![ZERO; 64];
        for a in 0..8usize {
            for b in 0..8usize {
                let (a1, a2, a3) = (a >> 2, (a >> 1) & 1, a & 1);
                let (b1, b2, b3) = (b >> 2, (b >> 1) & 1, b & 1);
                if a2 != b2 {
                    continue;
                }
                op[a * 8 + b] = z.get(&[a1, b1]) * y.get(&[a3, b3]);
            }
        }
        let phi = dense_apply(&psi, 5, 1, 3, &op);
        let want: C64 = psi.iter().zip(&phi).map(|(x, y)| x.conj() * y).sum::<C64>() / norm_of(&psi).powi(2);
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn log_norm_tracks_scalars() {
        let mut m = Mps::product_state(&[vec![c(3.0, 0.0), ZERO], vec![ONE, ONE]]).unwrap();
        let g = ComplexTensor::identity(2).scaled(c(0.0, 2.0));
        m.apply_one_site(0, &g).unwrap();
        let d = m.to_dense();
        assert!((d[0] - c(0.0, 6.0)).norm() < 1e-13);
        assert!((d[1] - c(0.0, 6.0)).norm() < 1e-13);
        // ket boundary of unnormalized ones: overlap reproduces the sum
        let ov = m.overlap_product(&[vec![ONE, ONE], vec![ONE, ONE]]).unwrap();
        let total = ov * m.log_norm().exp();
        assert!((total - c(0.0, 12.0)).norm() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn entropies_ignore_global_scalars(seed in any::<u64>(), re in 0.1f64..5.0, ph in 0.0f64..std::f64::consts::TAU) {
                let mut rng = Lcg(seed);
                let psi = random_state(5, &mut rng);
                let scaled: Vec<C64> = psi.iter().map(|z| z * C64::from_polar(re, ph)).collect();
                let mut a = Mps::from_dense(&psi, &[2; 5], 64, 0.0).unwrap();
                let mut b = Mps::from_dense(&scaled, &[2; 5], 64, 0.0).unwrap();
                for ((_, x), (_, y)) in a.cut_entropies().unwrap().iter().zip(b.cut_entropies().unwrap()) {
                    prop_assert!((x - y).abs() < 1e-10);
                }
            }

            #[test]
            fn complete_projector_weights_sum_to_one(seed in any::<u64>()) {
                let mut rng = Lcg(seed);
                let psi = random_state(4, &mut rng);
                let mut total = 0.0;
                for sign in [1.0, -1.0] {
                    let mut m = Mps::from_dense(&psi, &[2; 4], 64, 0.0).unwrap();
                    if let Ok((lw, _)) = m.project_and_renormalize(0, &zzzz_projector(sign), 64, 0.0) {
                        total += lw.exp();
                    }
                }
                prop_assert!((total - 1.0).abs() < 1e-10);
            }

            #[test]
            fn canonical_form_survives_random_operations(seed in any::<u64>()) {
                let mut rng = Lcg(seed);
                let mut m = Mps::from_dense(&random_state(6, &mut rng), &[2; 6], 64, 0.0).unwrap();
                for step in 0..8 {
                    let i = (rng.next() * 5.0) as usize;
                    if step % 2 == 0 {
                        m.apply_two_site(i, &random_tensor(&[2, 2, 2, 2], &mut rng), 64, 0.0).unwrap();
                    } else {
                        m.apply_one_site(i, &random_tensor(&[2, 2], &mut rng)).unwrap();
                    }
                    prop_assert!(m.canonical_error() < 1e-10);
                }
            }
        }
    }
}
