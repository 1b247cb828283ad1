//! Planar surface-code geometry, Pauli algebra and dense-statevector oracles.
//!
//! The lattice has `lx x ly` plaquettes with rough left/right boundaries and
//! smooth top/bottom boundaries. Horizontal edge `(row r, col c)` with
//! `r in 0..=ly`, `c in 0..lx` has index `r * lx + c`; vertical edge
//! `(row r, col j)` with `r in 0..ly`, `j in 0..lx-1` follows after all
//! horizontal edges. Vertex `(r, j)` sits between horizontal edges `(r, j)`
//! and `(r, j+1)`; vertical edge `(r, j)` joins vertices `(r, j)` and
//! `(r+1, j)`.
//!
//! Dense states store qubit `q` in bit `q` of the basis index.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt;

use crate::error::{Error, Result};
use crate::tensors::{C64, I, ONE, ZERO};

/// Largest code for which dense states are built.
pub const MAX_DENSE_QUBITS: usize = 22;
/// Largest code for which the full syndrome distribution is enumerated.
pub const MAX_ENUM_QUBITS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Horizontal { row: usize, col: usize },
    Vertical { row: usize, col: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    lx: usize,
    ly: usize,
}

pub fn build_lattice(lx: usize, ly: usize) -> Result<Lattice> {
    Lattice::new(lx, ly)
}

impl Lattice {
    pub fn new(lx: usize, ly: usize) -> Result<Self> {
        if lx < 2 || ly < 1 {
            return Err(Error::Invalid(format!("lattice needs lx >= 2 and ly >= 1, got ({lx}, {ly})")));
        }
        Ok(Self { lx, ly })
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn num_horizontal(&self) -> usize {
        self.lx * (self.ly + 1)
    }

    pub fn num_qubits(&self) -> usize {
        self.lx * (self.ly + 1) + (self.lx - 1) * self.ly
    }

    pub fn num_plaquettes(&self) -> usize {
        self.lx * self.ly
    }

    pub fn num_stars(&self) -> usize {
        (self.lx - 1) * (self.ly + 1)
    }

    pub fn horizontal(&self, row: usize, col: usize) -> usize {
        debug_assert!(row <= self.ly && col < self.lx);
        row * self.lx + col
    }

    pub fn vertical(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.ly && col + 1 < self.lx);
        self.num_horizontal() + row * (self.lx - 1) + col
    }

    pub fn edge(&self, index: usize) -> Edge {
        let nh = self.num_horizontal();
        if index < nh {
            Edge::Horizontal { row: index / self.lx, col: index % self.lx }
        } else {
            let k = index - nh;
            Edge::Vertical { row: k / (self.lx - 1), col: k % (self.lx - 1) }
        }
    }

    /// Edges of plaquette `(row, col)`; 3 on the rough columns, else 4.
    pub fn plaquette_edges(&self, row: usize, col: usize) -> Vec<usize> {
        let mut e = vec![self.horizontal(row, col), self.horizontal(row + 1, col)];
        if col >= 1 {
            e.push(self.vertical(row, col - 1));
        }
        if col + 2 <= self.lx {
            e.push(self.vertical(row, col));
        }
        e
    }

    /// Edges of the star at vertex `(row, col)`; 3 on the smooth rows, else 4.
    pub fn star_edges(&self, row: usize, col: usize) -> Vec<usize> {
        let mut e = vec![self.horizontal(row, col), self.horizontal(row, col + 1)];
        if row >= 1 {
            e.push(self.vertical(row - 1, col));
        }
        if row < self.ly {
            e.push(self.vertical(row, col));
        }
        e
    }
}

/// `i^phase * prod_q X_q^{x_q} Z_q^{z_q}`, with `Z` acting first on each qubit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub x: Vec<bool>,
    pub z: Vec<bool>,
    pub phase: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self { x: vec![false; n], z: vec![false; n], phase: 0 }
    }

    pub fn x_on(n: usize, qubits: &[usize]) -> Self {
        let mut p = Self::identity(n);
        for &q in qubits {
            p.x[q] ^= true;
        }
        p
    }

    pub fn z_on(n: usize, qubits: &[usize]) -> Self {
        let mut p = Self::identity(n);
        for &q in qubits {
            p.z[q] ^= true;
        }
        p
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).filter(|(a, b)| **a || **b).count()
    }

    pub fn x_support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&q| self.x[q]).collect()
    }

    pub fn z_support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&q| self.z[q]).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.weight() == 0
    }

    /// Number of qubits where one string has X and the other Z, mod 2.
    pub fn symplectic(&self, other: &Self) -> bool {
        let mut s = false;
        for q in 0..self.len() {
            s ^= (self.x[q] && other.z[q]) ^ (self.z[q] && other.x[q]);
        }
        s
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        !self.symplectic(other)
    }

    /// Operator product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        let mut phase = u32::from(self.phase) + u32::from(other.phase);
        // Z^{z1} X^{x2} = (-1)^{|z1 & x2|} X^{x2} Z^{z1}
        let swaps = (0..self.len()).filter(|&q| self.z[q] && other.x[q]).count() as u32;
        phase += 2 * swaps;
        Self {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect(),
            z: self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect(),
            phase: (phase % 4) as u8,
        }
    }

    fn masks(&self) -> Result<(u64, u64)> {
        if self.len() > 64 {
            return Err(Error::TooLarge(format!("{} qubits for a dense mask", self.len())));
        }
        let mut xm = 0u64;
        let mut zm = 0u64;
        for q in 0..self.len() {
            if self.x[q] {
                xm |= 1 << q;
            }
            if self.z[q] {
                zm |= 1 << q;
            }
        }
        Ok((xm, zm))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ph = ["+", "+i", "-", "-i"][usize::from(self.phase % 4)];
        write!(f, "{ph}")?;
        for q in 0..self.len() {
            let c = match (self.x[q], self.z[q]) {
                (false, false) => 'I',
                (true, false) => 'X',
                (false, true) => 'Z',
                (true, true) => 'W',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Plaquette operators row-major, then star operators row-major.
pub fn stabilizers(lat: &Lattice) -> Vec<PauliString> {
    let n = lat.num_qubits();
    let mut out = Vec::with_capacity(n - 1);
    for r in 0..lat.ly {
        for c in 0..lat.lx {
            out.push(PauliString::z_on(n, &lat.plaquette_edges(r, c)));
        }
    }
    for r in 0..=lat.ly {
        for j in 0..lat.lx - 1 {
            out.push(PauliString::x_on(n, &lat.star_edges(r, j)));
        }
    }
    out
}

/// Logical X on the leftmost column of horizontal edges and logical Z on
/// the bottom row.
pub fn logicals(lat: &Lattice) -> (PauliString, PauliString) {
    let n = lat.num_qubits();
    let xs: Vec<usize> = (0..=lat.ly).map(|r| lat.horizontal(r, 0)).collect();
    let zs: Vec<usize> = (0..lat.lx).map(|c| lat.horizontal(0, c)).collect();
    (PauliString::x_on(n, &xs), PauliString::z_on(n, &zs))
}

/// Rank over GF(2) of the symplectic matrix of a set of Pauli strings.
pub fn symplectic_rank(ops: &[PauliString]) -> usize {
    let mut rows: Vec<Vec<bool>> = ops.iter().map(|p| p.x.iter().chain(&p.z).copied().collect()).collect();
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(piv) = (rank..rows.len()).find(|&r| rows[r][col]) else { continue };
        rows.swap(rank, piv);
        for r in 0..rows.len() {
            if r != rank && rows[r][col] {
                let pivot = rows[rank].clone();
                for (a, b) in rows[r].iter_mut().zip(pivot) {
                    *a ^= b;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Measured stabilizer outcomes; `true` means eigenvalue -1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Syndrome {
    /// `ly x lx`, row-major.
    pub plaquette_bits: Vec<bool>,
    /// `(ly + 1) x (lx - 1)`, row-major.
    pub star_bits: Vec<bool>,
}

impl Syndrome {
    pub fn trivial(lat: &Lattice) -> Self {
        Self { plaquette_bits: vec![false; lat.num_plaquettes()], star_bits: vec![false; lat.num_stars()] }
    }

    pub fn from_bits(lat: &Lattice, bits: &[bool]) -> Result<Self> {
        let np = lat.num_plaquettes();
        if bits.len() != np + lat.num_stars() {
            return Err(Error::Dimension(format!("{} syndrome bits for {np} plaquettes", bits.len())));
        }
        Ok(Self { plaquette_bits: bits[..np].to_vec(), star_bits: bits[np..].to_vec() })
    }

    /// Plaquettes row-major, then stars row-major.
    pub fn bits(&self) -> Vec<bool> {
        self.plaquette_bits.iter().chain(&self.star_bits).copied().collect()
    }

    pub fn plaquette(&self, lat: &Lattice, row: usize, col: usize) -> bool {
        self.plaquette_bits[row * lat.lx + col]
    }

    pub fn star(&self, lat: &Lattice, row: usize, col: usize) -> bool {
        self.star_bits[row * (lat.lx - 1) + col]
    }

    pub fn is_trivial(&self) -> bool {
        !self.plaquette_bits.iter().chain(&self.star_bits).any(|&b| b)
    }

    pub fn weight(&self) -> usize {
        self.plaquette_bits.iter().chain(&self.star_bits).filter(|&&b| b).count()
    }

    /// Flat bit string rendered as hex: each digit packs four consecutive
    /// bits, first bit most significant, zero-padded at the end.
    pub fn to_hex(&self) -> String {
        let bits = self.bits();
        bits.chunks(4)
            .map(|ch| {
                let mut v = 0u32;
                for k in 0..4 {
                    v = (v << 1) | u32::from(ch.get(k).copied().unwrap_or(false));
                }
                char::from_digit(v, 16).expect("nibble")
            })
            .collect()
    }

    pub fn from_hex(lat: &Lattice, hex: &str) -> Result<Self> {
        let total = lat.num_plaquettes() + lat.num_stars();
        if hex.len() != total.div_ceil(4) {
            return Err(Error::Invalid(format!("hex syndrome of length {} for {total} bits", hex.len())));
        }
        let mut bits = Vec::with_capacity(hex.len() * 4);
        for ch in hex.chars() {
            let v = ch.to_digit(16).ok_or_else(|| Error::Invalid(format!("bad hex digit {ch:?}")))?;
            for k in (0..4).rev() {
                bits.push((v >> k) & 1 == 1);
            }
        }
        if bits[total..].iter().any(|&b| b) {
            return Err(Error::Invalid("nonzero padding in hex syndrome".into()));
        }
        bits.truncate(total);
        Self::from_bits(lat, &bits)
    }

    /// Syndrome of a Pauli error: which generators it anticommutes with.
    pub fn of_pauli(lat: &Lattice, p: &PauliString) -> Self {
        let stabs = stabilizers(lat);
        let bits: Vec<bool> = stabs.iter().map(|s| s.symplectic(p)).collect();
        Self::from_bits(lat, &bits).expect("generator count matches")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Single-qubit X rotations.
    XOnly,
    /// X rotations plus XX rotations on neighbouring horizontal edges.
    XXx,
    /// Rotations about an arbitrary axis plus XX rotations.
    GeneralXx,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::XOnly => "x",
            ModelKind::XXx => "x-xx",
            ModelKind::GeneralXx => "xyz-xx",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(ModelKind::XOnly),
            "x-xx" => Ok(ModelKind::XXx),
            "xyz-xx" => Ok(ModelKind::GeneralXx),
            _ => Err(Error::Invalid(format!("unknown model {s:?} (expected x, x-xx or xyz-xx)"))),
        }
    }

    /// Number of logical classes the decoder distinguishes.
    pub fn num_classes(&self) -> usize {
        match self {
            ModelKind::GeneralXx => 4,
            _ => 2,
        }
    }
}

/// `prod_pairs (cos phi + i sin phi X X) prod_q (cos theta + i sin theta n.sigma)`,
/// single-qubit factors acting first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorModel {
    pub kind: ModelKind,
    pub theta: f64,
    pub phi: f64,
    pub axis: [f64; 3],
}

impl ErrorModel {
    pub fn x_only(theta: f64) -> Result<Self> {
        Self::new(ModelKind::XOnly, theta, 0.0, [1.0, 0.0, 0.0])
    }

    pub fn x_xx(theta: f64, phi: f64) -> Result<Self> {
        Self::new(ModelKind::XXx, theta, phi, [1.0, 0.0, 0.0])
    }

    pub fn general(theta: f64, phi: f64, axis: [f64; 3]) -> Result<Self> {
        Self::new(ModelKind::GeneralXx, theta, phi, axis)
    }

    /// Rotation by `theta_x` about X composed into a single axis with `theta_y` about Y.
    pub fn from_components(theta_x: f64, theta_y: f64, phi: f64) -> Result<Self> {
        let theta = theta_x.hypot(theta_y);
        let axis = if theta == 0.0 { [1.0, 0.0, 0.0] } else { [theta_x / theta, theta_y / theta, 0.0] };
        Self::general(theta, phi, axis)
    }

    pub fn new(kind: ModelKind, theta: f64, phi: f64, axis: [f64; 3]) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() || axis.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("error model parameters".into()));
        }
        let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("rotation axis must be a unit vector, |n| = {norm}")));
        }
        match kind {
            ModelKind::XOnly if phi != 0.0 => {
                return Err(Error::Invalid("the X-only model has no XX rotation".into()));
            }
            ModelKind::XOnly | ModelKind::XXx if axis != [1.0, 0.0, 0.0] => {
                return Err(Error::Invalid("X-type models rotate about the X axis".into()));
            }
            _ => {}
        }
        Ok(Self { kind, theta, phi, axis })
    }

    /// Human-readable notes for angles outside `[0, pi/4]`.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        for (name, v) in [("theta", self.theta), ("phi", self.phi)] {
            if !(0.0..=FRAC_PI_4 + 1e-15).contains(&v) {
                w.push(format!("{name} = {v} lies outside [0, pi/4]"));
            }
        }
        w
    }

    /// Single-qubit factor expanded as `sum c[x][z] X^x Z^z`.
    pub fn single_qubit_coeffs(&self) -> [[C64; 2]; 2] {
        let (s, c) = self.theta.sin_cos();
        let [nx, ny, nz] = self.axis;
        [
            [C64::new(c, 0.0), C64::new(0.0, nz * s)],
            [C64::new(0.0, nx * s), C64::new(-ny * s, 0.0)],
        ]
    }

    /// Single-qubit factor as a `2 x 2` matrix `[out][in]`.
    pub fn single_qubit_matrix(&self) -> [[C64; 2]; 2] {
        let (s, c) = self.theta.sin_cos();
        let [nx, ny, nz] = self.axis;
        let is = I * s;
        [
            [C64::new(c, 0.0) + is * nz, is * C64::new(nx, -ny)],
            [is * C64::new(nx, ny), C64::new(c, 0.0) - is * nz],
        ]
    }

    pub fn has_pair_rotation(&self) -> bool {
        self.kind != ModelKind::XOnly && self.phi != 0.0
    }
}

/// Neighbouring horizontal-edge pairs carrying an XX rotation.
pub fn pair_edges(lat: &Lattice) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..=lat.ly {
        for c in 0..lat.lx - 1 {
            out.push((lat.horizontal(r, c), lat.horizontal(r, c + 1)));
        }
    }
    out
}

/// Dense state vector on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub num_qubits: usize,
    pub amps: Vec<C64>,
}

impl StateVector {
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        if num_qubits > MAX_DENSE_QUBITS {
            return Err(Error::TooLarge(format!("{num_qubits} qubits exceeds the dense limit {MAX_DENSE_QUBITS}")));
        }
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[index] = ONE;
        Ok(Self { num_qubits, amps })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroProbability(0.0));
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Ok(n)
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn apply_pauli(&self, p: &PauliString) -> Result<Self> {
        let (xm, zm) = p.masks()?;
        let ph = [ONE, I, -ONE, -I][usize::from(p.phase % 4)];
        let mut out = vec![ZERO; self.amps.len()];
        for (b, a) in self.amps.iter().enumerate() {
            let sign = if ((b as u64) & zm).count_ones() % 2 == 1 { -ph } else { ph };
            out[b ^ xm as usize] = sign * a;
        }
        Ok(Self { num_qubits: self.num_qubits, amps: out })
    }

    /// `(1 + sign * P) / 2` applied to the state.
    pub fn project(&self, p: &PauliString, sign: f64) -> Result<Self> {
        let pp = self.apply_pauli(p)?;
        let amps = self.amps.iter().zip(&pp.amps).map(|(a, b)| (a + b * sign) * 0.5).collect();
        Ok(Self { num_qubits: self.num_qubits, amps })
    }

    pub fn expectation(&self, p: &PauliString) -> Result<C64> {
        Ok(self.inner(&self.apply_pauli(p)?) / self.norm_sqr())
    }

    /// Applies a `2 x 2` matrix (`[out][in]`) to qubit `q`.
    pub fn apply_one_qubit(&mut self, q: usize, m: &[[C64; 2]; 2]) {
        let bit = 1usize << q;
        for b in 0..self.amps.len() {
            if b & bit == 0 {
                let (a0, a1) = (self.amps[b], self.amps[b | bit]);
                self.amps[b] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[b | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    /// `cos phi + i sin phi X_a X_b`.
    pub fn apply_xx_rotation(&mut self, a: usize, b: usize, phi: f64) {
        let (s, c) = phi.sin_cos();
        let mask = (1usize << a) | (1usize << b);
        let old = self.amps.clone();
        for (k, v) in self.amps.iter_mut().enumerate() {
            *v = old[k] * c + old[k ^ mask] * (I * s);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogicalInit {
    /// Logical Z eigenstate `|Psi_0>`.
    Zero,
    /// Logical X eigenstate `|Psi_+>`.
    Plus,
}

impl LogicalInit {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(LogicalInit::Zero),
            "plus" => Ok(LogicalInit::Plus),
            _ => Err(Error::Invalid(format!("unknown initial state {s:?} (expected plus or zero)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LogicalInit::Zero => "zero",
            LogicalInit::Plus => "plus",
        }
    }
}

/// Code state: `|Psi_+>` projects `|+>^N` onto the plaquette eigenspace,
/// `|Psi_0>` projects `|0>^N` onto the star eigenspace.
pub fn exact_logical_state(lat: &Lattice, which: LogicalInit) -> Result<StateVector> {
    let n = lat.num_qubits();
    let mut psi = StateVector::basis(n, 0)?;
    let stabs = stabilizers(lat);
    let np = lat.num_plaquettes();
    match which {
        LogicalInit::Plus => {
            let v = C64::new((0.5f64).powf(n as f64 / 2.0), 0.0);
            psi.amps.iter_mut().for_each(|a| *a = v);
            for s in &stabs[..np] {
                psi = psi.project(s, 1.0)?;
            }
        }
        LogicalInit::Zero => {
            for s in &stabs[np..] {
                psi = psi.project(s, 1.0)?;
            }
        }
    }
    psi.normalize()?;
    Ok(psi)
}

/// Applies the unitary error model to a dense state.
pub fn exact_corrupt(lat: &Lattice, state: &StateVector, model: &ErrorModel) -> Result<StateVector> {
    if state.num_qubits != lat.num_qubits() {
        return Err(Error::Dimension("state size does not match lattice".into()));
    }
    let mut out = state.clone();
    let m = model.single_qubit_matrix();
    for q in 0..lat.num_qubits() {
        out.apply_one_qubit(q, &m);
    }
    if model.has_pair_rotation() {
        for (a, b) in pair_edges(lat) {
            out.apply_xx_rotation(a, b, model.phi);
        }
    }
    Ok(out)
}

/// Applies the syndrome projector `prod (1 +- S) / 2`.
pub fn project_syndrome(lat: &Lattice, state: &StateVector, s: &Syndrome) -> Result<StateVector> {
    let mut out = state.clone();
    for (g, bit) in stabilizers(lat).iter().zip(s.bits()) {
        out = out.project(g, if bit { -1.0 } else { 1.0 })?;
    }
    Ok(out)
}

/// Born distribution over full syndromes, by branching projection with
/// pruning of empty branches.
pub fn exact_syndrome_distribution(lat: &Lattice, state: &StateVector) -> Result<BTreeMap<Syndrome, f64>> {
    let n = lat.num_qubits();
    if n > MAX_ENUM_QUBITS {
        return Err(Error::TooLarge(format!("{n} qubits exceeds the enumeration limit {MAX_ENUM_QUBITS}")));
    }
    let stabs = stabilizers(lat);
    let total = state.norm_sqr();
    let mut out = BTreeMap::new();
    let mut stack = vec![(state.clone(), Vec::<bool>::new())];
    while let Some((psi, bits)) = stack.pop() {
        if bits.len() == stabs.len() {
            out.insert(Syndrome::from_bits(lat, &bits)?, psi.norm_sqr() / total);
            continue;
        }
        let g = &stabs[bits.len()];
        for bit in [false, true] {
            let branch = psi.project(g, if bit { -1.0 } else { 1.0 })?;
            if branch.norm_sqr() > 1e-15 * total {
                let mut b = bits.clone();
                b.push(bit);
                stack.push((branch, b));
            }
        }
    }
    Ok(out)
}

/// Sign `(-1)^{|Rx ∩ Rz|}` separating `Z^Rz X^Rx` from `X^Rx Z^Rz`.
pub fn crossing_sign(rx: &PauliString, rz: &PauliString) -> f64 {
    let k = (0..rx.len()).filter(|&q| rx.x[q] && rz.z[q]).count();
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_references(lat: &Lattice, s: &Syndrome, rx: &PauliString, rz: &PauliString) -> Result<()> {
    let n = lat.num_qubits();
    if rx.len() != n || rz.len() != n {
        return Err(Error::Dimension("reference string length".into()));
    }
    if rx.z.iter().any(|&b| b) || rz.x.iter().any(|&b| b) || rx.phase != 0 || rz.phase != 0 {
        return Err(Error::Inconsistent("Rx must be X-type and Rz Z-type".into()));
    }
    let from_x = Syndrome::of_pauli(lat, rx);
    let from_z = Syndrome::of_pauli(lat, rz);
    if from_x.plaquette_bits != s.plaquette_bits || from_z.star_bits != s.star_bits {
        return Err(Error::Inconsistent("reference strings do not reproduce the syndrome".into()));
    }
    Ok(())
}

/// Class amplitudes `Z[a][b]` from the dense oracle.
///
/// With `M = Z^Rz X^Rx Pi_s U` restricted to the code space,
/// `M = (-1)^{|Rx ∩ Rz|} sum_ab Z[a][b] Xbar^a Zbar^b`; the matrix elements of
/// `M` in the `|Psi_0>, |Psi_1>` basis determine all four entries.
pub fn exact_class_amplitudes(
    lat: &Lattice,
    model: &ErrorModel,
    s: &Syndrome,
    rx: &PauliString,
    rz: &PauliString,
) -> Result<[[C64; 2]; 2]> {
    check_references(lat, s, rx, rz)?;
    let psi0 = exact_logical_state(lat, LogicalInit::Zero)?;
    let (xbar, _) = logicals(lat);
    let psi1 = psi0.apply_pauli(&xbar)?;
    let fix = rz.mul(rx);
    let run = |init: &StateVector| -> Result<StateVector> {
        let corrupted = exact_corrupt(lat, init, model)?;
        project_syndrome(lat, &corrupted, s)?.apply_pauli(&fix)
    };
    let m0 = run(&psi0)?;
    let m1 = run(&psi1)?;
    let m00 = psi0.inner(&m0);
    let m10 = psi1.inner(&m0);
    let m11 = psi1.inner(&m1);
    let m01 = psi0.inner(&m1);
    let sc = crossing_sign(rx, rz);
    Ok([
        [(m00 + m11) * 0.5 * sc, (m00 - m11) * 0.5 * sc],
        [(m10 + m01) * 0.5 * sc, (m10 - m01) * 0.5 * sc],
    ])
}

pub fn exact_class_amplitude(
    lat: &Lattice,
    model: &ErrorModel,
    s: &Syndrome,
    rx: &PauliString,
    rz: &PauliString,
    a: usize,
    b: usize,
) -> Result<C64> {
    if a > 1 || b > 1 {
        return Err(Error::Invalid("class labels are 0 or 1".into()));
    }
    Ok(exact_class_amplitudes(lat, model, s, rx, rz)?[a][b])
}

/// Logical-basis coefficients of `Z^Rz X^Rx Pi_s U |init>`, in the basis
/// `(|Psi_0>, |Psi_1>)` for `Zero` or `(|Psi_+>, |Psi_->)` for `Plus`.
pub fn exact_corrected_coeffs(
    lat: &Lattice,
    model: &ErrorModel,
    init: LogicalInit,
    s: &Syndrome,
    rx: &PauliString,
    rz: &PauliString,
) -> Result<(C64, C64)> {
    check_references(lat, s, rx, rz)?;
    let psi0 = exact_logical_state(lat, LogicalInit::Zero)?;
    let (xbar, _) = logicals(lat);
    let psi1 = psi0.apply_pauli(&xbar)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (b0, b1) = match init {
        LogicalInit::Zero => (psi0, psi1),
        LogicalInit::Plus => {
            let plus = psi0.amps.iter().zip(&psi1.amps).map(|(a, b)| (a + b) * h).collect();
            let minus = psi0.amps.iter().zip(&psi1.amps).map(|(a, b)| (a - b) * h).collect();
            (StateVector { num_qubits: psi0.num_qubits, amps: plus }, StateVector { num_qubits: psi0.num_qubits, amps: minus })
        }
    };
    let corrupted = exact_corrupt(lat, &b0, model)?;
    let out = project_syndrome(lat, &corrupted, s)?.apply_pauli(&rz.mul(rx))?;
    Ok((b0.inner(&out), b1.inner(&out)))
}
