//! Isometric tensor network for `|Psi_+>`, error absorption and row-by-row
//! syndrome sampling.
//!
//! Every site tensor has legs `[physical, upper..., lower...]` and is an
//! isometry from the physical and upper legs onto the lower legs. Read
//! against its arrows the network is a sequential circuit: the bottom row
//! creates qubits and upward legs from nothing, every later tensor consumes
//! the legs below it and emits its qubit and the legs above. The sampler runs
//! that circuit on a live MPS of emitted qubits and pending legs, measures
//! each stabilizer as soon as its qubits exist and retires qubits that no
//! remaining stabilizer touches.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use crate::code::{ErrorModel, Lattice, StateVector, Syndrome};
use crate::error::{Error, Result};
use crate::mps::Mps;
use crate::rng::{RngKey, SampleRng};
use crate::tensors::{ComplexTensor, C64, I, ONE, ZERO};

/// Upper or lower leg direction relative to the tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// The ten tensor shapes of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    TopLeft,
    TopCenter,
    RowLeft,
    RowRight,
    Row,
    Vertical,
    VerticalLeft,
    BottomLeft,
    BottomRight,
    BottomCenter,
}

impl Role {
    pub const ALL: [Role; 10] = [
        Role::TopLeft,
        Role::TopCenter,
        Role::RowLeft,
        Role::RowRight,
        Role::Row,
        Role::Vertical,
        Role::VerticalLeft,
        Role::BottomLeft,
        Role::BottomRight,
        Role::BottomCenter,
    ];

    pub fn upper(&self) -> &'static [Side] {
        match self {
            Role::TopLeft | Role::TopCenter => &[],
            Role::RowLeft | Role::BottomLeft | Role::Vertical => &[Side::Right],
            Role::RowRight | Role::BottomRight => &[Side::Left],
            Role::Row | Role::BottomCenter | Role::VerticalLeft => &[Side::Left, Side::Right],
        }
    }

    pub fn lower(&self) -> &'static [Side] {
        match self {
            Role::TopLeft | Role::RowLeft => &[Side::Right],
            Role::TopCenter | Role::RowRight | Role::Row => &[Side::Left],
            Role::Vertical | Role::VerticalLeft => &[Side::Left, Side::Right],
            Role::BottomLeft | Role::BottomRight | Role::BottomCenter => &[],
        }
    }

    /// Closed-form entry for the physical bit, upper bits and lower bits.
    fn entry(&self, p: usize, up: &[usize], low: &[usize]) -> f64 {
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        match self {
            Role::TopLeft | Role::TopCenter => d(p, low[0]),
            Role::RowLeft | Role::RowRight => d(p, up[0]) * d(p, low[0]),
            Role::Row => FRAC_1_SQRT_2 * d(p, up[0] ^ up[1]) * d(p, low[0]),
            Role::Vertical => d(p, low[0]) * d(p ^ up[0], low[1]),
            Role::VerticalLeft => FRAC_1_SQRT_2 * d(up[0] ^ p, low[0]) * d(p ^ up[1], low[1]),
            Role::BottomLeft | Role::BottomRight => FRAC_1_SQRT_2 * d(p, up[0]),
            Role::BottomCenter => 0.5 * d(p, up[0] ^ up[1]),
        }
    }

    /// Dense tensor with legs `[physical, upper..., lower...]`, all of extent 2.
    pub fn tensor(&self) -> ComplexTensor {
        let nu = self.upper().len();
        let nl = self.lower().len();
        let shape = vec![2; 1 + nu + nl];
        ComplexTensor::from_fn(&shape, |ix| C64::new(self.entry(ix[0], &ix[1..1 + nu], &ix[1 + nu..]), 0.0))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::TopLeft => "top-left",
            Role::TopCenter => "top-center",
            Role::RowLeft => "row-left",
            Role::RowRight => "row-right",
            Role::Row => "row",
            Role::Vertical => "vertical",
            Role::VerticalLeft => "vertical-left",
            Role::BottomLeft => "bottom-left",
            Role::BottomRight => "bottom-right",
            Role::BottomCenter => "bottom-center",
        };
        f.write_str(s)
    }
}

/// Largest deviation of `sum_{p,up} T T* ` from the identity on the lower legs.
pub fn isometry_error(t: &ComplexTensor, n_lower: usize) -> f64 {
    let dl = 1usize << n_lower;
    let rows = t.len() / dl;
    let a = t.data();
    let mut worst: f64 = 0.0;
    for l in 0..dl {
        for m in 0..dl {
            let g: C64 = (0..rows).map(|k| a[k * dl + l] * a[k * dl + m].conj()).sum();
            let want = if l == m { ONE } else { ZERO };
            worst = worst.max((g - want).norm());
        }
    }
    worst
}

/// Site tensors of the four-body parity projector MPO, `[w_left, out, in, w_right]`.
pub fn plaquette_projector_mpo() -> Vec<ComplexTensor> {
    let d = |a: usize, b: usize| if a == b { ONE } else { ZERO };
    vec![
        ComplexTensor::from_fn(&[1, 2, 2, 2], |ix| d(ix[1], ix[2]) * d(ix[1], ix[3])),
        ComplexTensor::from_fn(&[2, 2, 2, 2], |ix| d(ix[1], ix[2]) * d(ix[3], ix[0] ^ ix[1])),
        ComplexTensor::from_fn(&[2, 2, 2, 2], |ix| d(ix[1], ix[2]) * d(ix[0] ^ ix[3], ix[1])),
        ComplexTensor::from_fn(&[2, 2, 2, 1], |ix| d(ix[1], ix[2]) * d(ix[1], ix[0])),
    ]
}

/// Three-body parity projector MPO for the rough-boundary plaquettes.
pub fn boundary_projector_mpo() -> Vec<ComplexTensor> {
    let d = |a: usize, b: usize| if a == b { ONE } else { ZERO };
    vec![
        ComplexTensor::from_fn(&[1, 2, 2, 2], |ix| d(ix[1], ix[2]) * d(ix[1], ix[3])),
        ComplexTensor::from_fn(&[2, 2, 2, 2], |ix| d(ix[1], ix[2]) * d(ix[3], ix[0] ^ ix[1])),
        ComplexTensor::from_fn(&[2, 2, 2, 1], |ix| d(ix[1], ix[2]) * d(ix[0], ix[1])),
    ]
}

#[derive(Clone, Debug)]
pub struct IsoSite {
    pub edge: usize,
    pub role: Role,
    /// `[physical, upper..., lower...]`.
    pub tensor: ComplexTensor,
}

#[derive(Clone, Debug)]
pub struct IsoTns {
    lat: Lattice,
    /// Indexed by qubit edge.
    sites: Vec<IsoSite>,
    /// XX rotation angle applied along each horizontal row.
    pair_angle: f64,
}

fn role_of(lat: &Lattice, edge: usize) -> Role {
    let (lx, ly) = (lat.lx(), lat.ly());
    match lat.edge(edge) {
        crate::code::Edge::Horizontal { row, col } => {
            if row == 0 {
                if col == 0 {
                    Role::BottomLeft
                } else if col + 1 == lx {
                    Role::BottomRight
                } else {
                    Role::BottomCenter
                }
            } else if row == ly {
                if col == 0 {
                    Role::TopLeft
                } else {
                    Role::TopCenter
                }
            } else if col == 0 {
                Role::RowLeft
            } else if col + 1 == lx {
                Role::RowRight
            } else {
                Role::Row
            }
        }
        crate::code::Edge::Vertical { col, .. } => {
            if col == 0 {
                Role::VerticalLeft
            } else {
                Role::Vertical
            }
        }
    }
}

/// The error-free network for `|Psi_+>`.
pub fn build_isotns(lat: &Lattice) -> IsoTns {
    let sites = (0..lat.num_qubits())
        .map(|e| {
            let role = role_of(lat, e);
            IsoSite { edge: e, role, tensor: role.tensor() }
        })
        .collect();
    IsoTns { lat: lat.clone(), sites, pair_angle: 0.0 }
}

/// Absorbs the single-qubit rotation into every physical leg and records the
/// XX angle for the sampler.
pub fn apply_errors(tns: &IsoTns, model: &ErrorModel) -> IsoTns {
    let m = model.single_qubit_matrix();
    let mut out = tns.clone();
    for site in &mut out.sites {
        let rest = site.tensor.len() / 2;
        let old = site.tensor.data().to_vec();
        let data = site.tensor.data_mut();
        for p in 0..2 {
            for k in 0..rest {
                data[p * rest + k] = m[p][0] * old[k] + m[p][1] * old[rest + k];
            }
        }
    }
    if model.has_pair_rotation() {
        out.pair_angle = tns.pair_angle + model.phi;
    }
    out
}

impl IsoTns {
    pub fn lattice(&self) -> &Lattice {
        &self.lat
    }

    pub fn sites(&self) -> &[IsoSite] {
        &self.sites
    }

    pub fn pair_angle(&self) -> f64 {
        self.pair_angle
    }

    /// Worst isometry deviation over all site tensors.
    pub fn isometry_error(&self) -> f64 {
        self.sites
            .iter()
            .map(|s| isometry_error(&s.tensor, s.role.lower().len()))
            .fold(0.0, f64::max)
    }

    pub fn max_bond(&self) -> usize {
        self.sites.iter().flat_map(|s| s.tensor.shape()[1..].to_vec()).max().unwrap_or(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Label {
    Qubit(usize),
    Leg { owner: usize, side: Side },
}

/// Live MPS of emitted qubits and pending legs.
struct Live {
    mps: Mps,
    labels: Vec<Label>,
    keys: Vec<i64>,
    chi_max: usize,
    tol: f64,
    max_discarded: f64,
    max_bond: usize,
}

impl Live {
    fn new(chi_max: usize, tol: f64) -> Self {
        Self { mps: Mps::empty(), labels: Vec::new(), keys: Vec::new(), chi_max, tol, max_discarded: 0.0, max_bond: 1 }
    }

    fn position(&self, label: Label) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| *l == label)
            .ok_or_else(|| Error::Inconsistent(format!("site {label:?} is not live")))
    }

    fn note(&mut self, disc: f64) {
        self.max_discarded = self.max_discarded.max(disc);
        self.max_bond = self.max_bond.max(self.mps.max_bond());
    }

    /// Runs one site tensor: consumes its lower legs and emits its qubit and
    /// upper legs, ordered by horizontal key among the window's spectators.
    fn emit(&mut self, lat: &Lattice, site: &IsoSite) -> Result<()> {
        let (lx_key, _) = keys_of(lat, site.edge);
        let upper = site.role.upper();
        let lower = site.role.lower();
        let consumed: Vec<Label> = lower.iter().map(|&s| lower_partner(lat, site.edge, s)).collect::<Result<_>>()?;
        let mut outputs: Vec<(Label, i64)> = vec![(Label::Qubit(site.edge), lx_key)];
        for &s in upper {
            outputs.push((Label::Leg { owner: site.edge, side: s }, lx_key + if s == Side::Left { -1 } else { 1 }));
        }
        if consumed.is_empty() {
            outputs.sort_by_key(|o| o.1);
            let dims = vec![2; outputs.len()];
            let n_out = outputs.len();
            let state = ComplexTensor::from_fn(&dims, |ix| {
                let mut p = 0;
                let mut up = vec![0; upper.len()];
                for (k, (l, _)) in outputs.iter().enumerate() {
                    match l {
                        Label::Qubit(_) => p = ix[k],
                        Label::Leg { side, .. } => up[upper.iter().position(|s| s == side).unwrap()] = ix[k],
                    }
                }
                tensor_value(site, p, &up, &[])
            });
            let state = state.reshape(&[1 << n_out])?;
            let start = self.labels.len();
            let disc = self.mps.replace_window(start, 0, &state, &dims, self.chi_max, self.tol)?;
            for (l, k) in outputs {
                self.labels.push(l);
                self.keys.push(k);
            }
            self.note(disc);
            return Ok(());
        }
        let pos: Vec<usize> = consumed.iter().map(|l| self.position(*l)).collect::<Result<_>>()?;
        let lo = *pos.iter().min().unwrap();
        let hi = *pos.iter().max().unwrap();
        let window: Vec<Label> = self.labels[lo..=hi].to_vec();
        let wkeys: Vec<i64> = self.keys[lo..=hi].to_vec();
        // spectators keep their place; new sites merge in by key
        let mut merged: Vec<(Label, i64, bool)> = window
            .iter()
            .zip(&wkeys)
            .filter(|(l, _)| !consumed.contains(l))
            .map(|(l, k)| (*l, *k, false))
            .collect();
        for (l, k) in &outputs {
            let at = merged.iter().position(|m| m.1 > *k).unwrap_or(merged.len());
            merged.insert(at, (*l, *k, true));
        }
        let n_in = window.len();
        let n_out = merged.len();
        let mut op = ComplexTensor::zeros(&[1 << n_out, 1 << n_in]);
        for inc in 0..1usize << n_in {
            let in_bit = |k: usize| (inc >> (n_in - 1 - k)) & 1;
            let low: Vec<usize> = consumed
                .iter()
                .map(|c| in_bit(window.iter().position(|w| w == c).unwrap()))
                .collect();
            // spectator bits carried over
            let mut base = 0usize;
            let mut free = Vec::new();
            let mut si = window.iter().enumerate().filter(|(_, l)| !consumed.contains(l)).map(|(k, _)| in_bit(k));
            for (k, m) in merged.iter().enumerate() {
                if m.2 {
                    free.push((k, m.0));
                } else {
                    base |= si.next().unwrap() << (n_out - 1 - k);
                }
            }
            for oc in 0..1usize << free.len() {
                let mut out = base;
                let mut p = 0;
                let mut up = vec![0; upper.len()];
                for (j, (k, l)) in free.iter().enumerate() {
                    let b = (oc >> (free.len() - 1 - j)) & 1;
                    out |= b << (n_out - 1 - k);
                    match l {
                        Label::Qubit(_) => p = b,
                        Label::Leg { side, .. } => up[upper.iter().position(|s| s == side).unwrap()] = b,
                    }
                }
                let v = tensor_value(site, p, &up, &low);
                if v != ZERO {
                    op.set(&[out, inc], v);
                }
            }
        }
        let dims = vec![2; n_out];
        let disc = self.mps.replace_window(lo, n_in, &op, &dims, self.chi_max, self.tol)?;
        self.labels.splice(lo..=hi, merged.iter().map(|m| m.0));
        self.keys.splice(lo..=hi, merged.iter().map(|m| m.1));
        self.note(disc);
        Ok(())
    }

    /// Product of `cos phi + i sin phi X X` over neighbouring qubits of a
    /// horizontal row.
    fn apply_row_pairs(&mut self, lat: &Lattice, row: usize, phi: f64) -> Result<()> {
        if phi == 0.0 {
            return Ok(());
        }
        let pos: Vec<usize> = (0..lat.lx()).map(|c| self.position(Label::Qubit(lat.horizontal(row, c)))).collect::<Result<_>>()?;
        if pos.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Inconsistent("row qubits out of chain order".into()));
        }
        let (lo, hi) = (pos[0], pos[pos.len() - 1]);
        let (s, c) = phi.sin_cos();
        let weight = [C64::new(c, 0.0), I * s];
        let x = [[ZERO, ONE], [ONE, ZERO]];
        let id = [[ONE, ZERO], [ZERO, ONE]];
        let op = |k: usize, o: usize, i: usize| if k == 0 { id[o][i] } else { x[o][i] };
        let mut mpo = Vec::with_capacity(hi - lo + 1);
        for site in lo..=hi {
            let member = pos.iter().position(|&p| p == site);
            let (wl, wr) = (if site == lo { 1 } else { 2 }, if site == hi { 1 } else { 2 });
            mpo.push(ComplexTensor::from_fn(&[wl, 2, 2, wr], |ix| {
                let (a, b) = (ix[0], ix[3]);
                match member {
                    None => {
                        if a == b {
                            id[ix[1]][ix[2]]
                        } else {
                            ZERO
                        }
                    }
                    Some(0) => weight[b] * op(b, ix[1], ix[2]),
                    Some(k) if k + 1 == pos.len() => op(a, ix[1], ix[2]),
                    Some(_) => weight[b] * op(a ^ b, ix[1], ix[2]),
                }
            }));
        }
        let disc = self.mps.apply_mpo(lo, &mpo, self.chi_max, self.tol)?;
        self.note(disc);
        Ok(())
    }

    /// Born-samples a Pauli product (`z_type` selects Z, else X) and projects.
    /// Returns `(outcome is -1, ln probability)`.
    fn measure(&mut self, qubits: &[usize], z_type: bool, u: f64) -> Result<(bool, f64)> {
        let mut pos: Vec<usize> = qubits.iter().map(|&q| self.position(Label::Qubit(q))).collect::<Result<_>>()?;
        pos.sort_unstable();
        let pauli = if z_type {
            ComplexTensor::from_fn(&[2, 2], |ix| if ix[0] != ix[1] { ZERO } else if ix[0] == 0 { ONE } else { -ONE })
        } else {
            ComplexTensor::from_fn(&[2, 2], |ix| if ix[0] != ix[1] { ONE } else { ZERO })
        };
        let ops: Vec<(usize, ComplexTensor)> = pos.iter().map(|&p| (p, pauli.clone())).collect();
        let ev = self.mps.expectation_product(&ops)?.re.clamp(-1.0, 1.0);
        let p_plus = 0.5 * (1.0 + ev);
        let flipped = u >= p_plus;
        let sign = if flipped { -1.0 } else { 1.0 };
        let (lo, hi) = (pos[0], pos[pos.len() - 1]);
        let ident = ComplexTensor::identity(2);
        // (1 + sign P) / 2 with a two-channel bond: channel 1 carries P
        let gate = |site: usize, ch: usize, o: usize, i: usize| {
            if ch == 1 && pos.contains(&site) {
                pauli.get(&[o, i])
            } else {
                ident.get(&[o, i])
            }
        };
        let tail = [C64::new(0.5, 0.0), C64::new(0.5 * sign, 0.0)];
        let mut mpo = Vec::with_capacity(hi - lo + 1);
        for site in lo..=hi {
            let (wl, wr) = (if site == lo { 1 } else { 2 }, if site == hi { 1 } else { 2 });
            mpo.push(ComplexTensor::from_fn(&[wl, 2, 2, wr], |ix| {
                let (o, i) = (ix[1], ix[2]);
                if site == lo && site == hi {
                    (0..2).map(|ch| gate(site, ch, o, i) * tail[ch]).sum()
                } else if site == lo {
                    gate(site, ix[3], o, i)
                } else if site == hi {
                    gate(site, ix[0], o, i) * tail[ix[0]]
                } else if ix[0] == ix[3] {
                    gate(site, ix[0], o, i)
                } else {
                    ZERO
                }
            }));
        }
        let (lw, disc) = self.mps.project_and_renormalize(lo, &mpo, self.chi_max, self.tol)?;
        self.note(disc);
        Ok((flipped, lw))
    }

    fn retire(&mut self, qubit: usize, basis: &ComplexTensor, u: f64) -> Result<()> {
        let p = self.position(Label::Qubit(qubit))?;
        self.mps.measure_out(p, basis, u)?;
        self.labels.remove(p);
        self.keys.remove(p);
        Ok(())
    }
}

/// Horizontal ordering key of an edge's qubit and its row.
fn keys_of(lat: &Lattice, edge: usize) -> (i64, usize) {
    match lat.edge(edge) {
        crate::code::Edge::Horizontal { row, col } => (4 * col as i64, row),
        crate::code::Edge::Vertical { row, col } => (4 * col as i64 + 2, row),
    }
}

/// The leg below `edge` on side `side`, as emitted by the tensor beneath.
fn lower_partner(lat: &Lattice, edge: usize, side: Side) -> Result<Label> {
    match lat.edge(edge) {
        crate::code::Edge::Vertical { row, col } => Ok(match side {
            Side::Left => Label::Leg { owner: lat.horizontal(row, col), side: Side::Right },
            Side::Right => Label::Leg { owner: lat.horizontal(row, col + 1), side: Side::Left },
        }),
        crate::code::Edge::Horizontal { row, col } => {
            if row == 0 {
                return Err(Error::Inconsistent("bottom row has no lower legs".into()));
            }
            Ok(match side {
                Side::Right => Label::Leg { owner: lat.vertical(row - 1, 0), side: Side::Left },
                Side::Left => Label::Leg { owner: lat.vertical(row - 1, col - 1), side: Side::Right },
            })
        }
    }
}

fn tensor_value(site: &IsoSite, p: usize, up: &[usize], low: &[usize]) -> C64 {
    let mut idx = Vec::with_capacity(1 + up.len() + low.len());
    idx.push(p);
    idx.extend_from_slice(up);
    idx.extend_from_slice(low);
    site.tensor.get(&idx)
}

/// Basis in which finished qubits are measured out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RetireBasis {
    X,
    Z,
}

impl RetireBasis {
    fn matrix(&self) -> ComplexTensor {
        match self {
            RetireBasis::Z => ComplexTensor::identity(2),
            RetireBasis::X => {
                let h = C64::new(FRAC_1_SQRT_2, 0.0);
                ComplexTensor::from_fn(&[2, 2], |ix| if ix[0] == 1 && ix[1] == 1 { -h } else { h })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub syndrome: Syndrome,
    /// Sum of the log Born weights of the stabilizer outcomes.
    pub log_prob: f64,
    pub max_discarded_weight: f64,
    pub chi_max_reached: usize,
    /// Redraws after a numerically empty branch.
    pub retries: u32,
    pub rng_key: RngKey,
}

#[derive(Clone, Copy, Debug)]
pub struct SamplerOptions {
    pub chi_max: usize,
    pub tol: f64,
    pub retire_basis: RetireBasis,
    pub max_retries: u32,
}

impl SamplerOptions {
    pub fn new(chi_max: usize, tol: f64) -> Self {
        Self { chi_max, tol, retire_basis: RetireBasis::X, max_retries: 8 }
    }
}

/// Emits one full row of horizontal qubits then applies the row's XX errors.
fn emit_horizontal_row(live: &mut Live, tns: &IsoTns, row: usize) -> Result<()> {
    let lat = &tns.lat;
    for c in 0..lat.lx() {
        live.emit(lat, &tns.sites[lat.horizontal(row, c)])?;
    }
    live.apply_row_pairs(lat, row, tns.pair_angle)
}

fn emit_vertical_row(live: &mut Live, tns: &IsoTns, row: usize) -> Result<()> {
    let lat = &tns.lat;
    for j in 0..lat.lx() - 1 {
        live.emit(lat, &tns.sites[lat.vertical(row, j)])?;
    }
    Ok(())
}

/// Contracts the whole network into a dense state (small codes only).
pub fn contract_dense(tns: &IsoTns, chi_max: usize, tol: f64) -> Result<StateVector> {
    let lat = &tns.lat;
    let n = lat.num_qubits();
    if n > crate::code::MAX_DENSE_QUBITS {
        return Err(Error::TooLarge(format!("{n} qubits for a dense state")));
    }
    let mut live = Live::new(chi_max, tol);
    emit_horizontal_row(&mut live, tns, 0)?;
    for r in 0..lat.ly() {
        emit_vertical_row(&mut live, tns, r)?;
        emit_horizontal_row(&mut live, tns, r + 1)?;
    }
    let qubits: Vec<usize> = live
        .labels
        .iter()
        .map(|l| match l {
            Label::Qubit(q) => Ok(*q),
            Label::Leg { .. } => Err(Error::Inconsistent("dangling leg after contraction".into())),
        })
        .collect::<Result<_>>()?;
    let dense = live.mps.to_dense();
    let mut amps = vec![ZERO; 1 << n];
    for (k, v) in dense.iter().enumerate() {
        let mut idx = 0;
        for (pos, q) in qubits.iter().enumerate() {
            if (k >> (n - 1 - pos)) & 1 == 1 {
                idx |= 1 << q;
            }
        }
        amps[idx] = *v;
    }
    Ok(StateVector { num_qubits: n, amps })
}

/// Samples one full syndrome of the corrupted network.
pub fn sample_syndrome(tns: &IsoTns, opts: &SamplerOptions, key: RngKey) -> Result<SampleRecord> {
    if opts.chi_max < 2 {
        return Err(Error::Invalid("sampler needs chi_max >= 2".into()));
    }
    let mut key = key;
    let mut retries = 0;
    loop {
        match sample_once(tns, opts, &mut key.stream()) {
            Ok((syndrome, log_prob, disc, chi)) => {
                return Ok(SampleRecord {
                    syndrome,
                    log_prob: log_prob.min(0.0),
                    max_discarded_weight: disc,
                    chi_max_reached: chi,
                    retries,
                    rng_key: key,
                })
            }
            Err(Error::ZeroProbability(_)) if retries < opts.max_retries => {
                retries += 1;
                key = key.retry();
            }
            Err(e) => return Err(e),
        }
    }
}

fn sample_once(tns: &IsoTns, opts: &SamplerOptions, rng: &mut SampleRng) -> Result<(Syndrome, f64, f64, usize)> {
    let lat = &tns.lat;
    let (lx, ly) = (lat.lx(), lat.ly());
    let basis = opts.retire_basis.matrix();
    let mut live = Live::new(opts.chi_max, opts.tol);
    let mut bits = Syndrome::trivial(lat);
    let mut log_prob = 0.0;
    emit_horizontal_row(&mut live, tns, 0)?;
    for r in 0..ly {
        emit_vertical_row(&mut live, tns, r)?;
        emit_horizontal_row(&mut live, tns, r + 1)?;
        for c in 0..lx {
            let (b, lp) = live.measure(&lat.plaquette_edges(r, c), true, rng.uniform())?;
            bits.plaquette_bits[r * lx + c] = b;
            log_prob += lp;
        }
        let star_rows = if r + 1 == ly { vec![r, r + 1] } else { vec![r] };
        for sr in star_rows {
            for j in 0..lx - 1 {
                let (b, lp) = live.measure(&lat.star_edges(sr, j), false, rng.uniform())?;
                bits.star_bits[sr * (lx - 1) + j] = b;
                log_prob += lp;
            }
        }
        if r + 1 == ly {
            break;
        }
        for c in 0..lx {
            live.retire(lat.horizontal(r, c), &basis, rng.uniform())?;
        }
        if r >= 1 {
            for j in 0..lx - 1 {
                live.retire(lat.vertical(r - 1, j), &basis, rng.uniform())?;
            }
        }
    }
    Ok((bits, log_prob, live.max_discarded, live.max_bond))
}
