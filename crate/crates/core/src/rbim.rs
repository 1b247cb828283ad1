//! Complex-weight random-bond Ising networks for the class amplitudes.
//!
//! X-type error strings are parametrized by vertex spins `sigma` (one per
//! star, boundary spins pinned to +1) and Z-type strings by plaquette spins
//! `tau` (fictitious rows below and above pinned to up). XX rotations
//! introduce an auxiliary spin `alpha` per vertex that the horizontal edges
//! see instead of `sigma`. Every qubit edge contributes one factor
//!
//! ```text
//! c[x][z] * (-1)^{[xi = -1] k},
//! x = [eta zeta_x a a' = -1],  k = [eta zeta_x s s' = -1],  z = [xi zeta_z t t' = -1]
//! ```
//!
//! where `c` is the Pauli expansion of the single-qubit rotation, `s, s'`
//! the vertex spins at the edge's endpoints, `a, a'` the spins the
//! single-qubit factor sees (`alpha` on horizontal edges when XX rotations
//! are present, otherwise `sigma`), and `t, t'` the plaquette spins on
//! either side. `x` is the single-qubit X flip and `k` the full X error on
//! the edge; the sign counts crossings of the error with the Z reference.
//! Bond variables are indexed by qubit edge.
//!
//! The network is read as a transfer matrix in the upward direction:
//! `W_y` holds horizontal-edge row `y - 1` and `V_y` the vertical edges
//! between vertex rows `y - 1` and `y`. Spin value +1 is basis index 0.

use std::fmt;

use crate::code::{ErrorModel, Lattice, ModelKind, PauliString, Syndrome};
use crate::error::{Error, Result};
use crate::tensors::{ComplexTensor, C64, I, ONE, ZERO};

/// Bond variables, each indexed by qubit edge.
#[derive(Clone, Debug, PartialEq)]
pub struct BondConfig {
    pub eta: Vec<i8>,
    pub xi: Vec<i8>,
    pub zeta_x: Vec<i8>,
    pub zeta_z: Vec<i8>,
    pub x_defect: bool,
    pub z_defect: bool,
}

impl BondConfig {
    pub fn trivial(lat: &Lattice) -> Self {
        let n = lat.num_qubits();
        Self {
            eta: vec![1; n],
            xi: vec![1; n],
            zeta_x: vec![1; n],
            zeta_z: vec![1; n],
            x_defect: false,
            z_defect: false,
        }
    }

    /// Bond variables for arbitrary reference strings.
    pub fn from_references(lat: &Lattice, rx: &PauliString, rz: &PauliString) -> Self {
        let mut b = Self::trivial(lat);
        for q in rx.x_support() {
            b.eta[q] = -1;
        }
        for q in rz.z_support() {
            b.xi[q] = -1;
        }
        b
    }
}

/// Straight-gauge reference strings: X strings run up the column above each
/// flipped plaquette, Z strings run right along the row from each flipped
/// star, both on horizontal edges.
pub fn straight_gauge(lat: &Lattice, s: &Syndrome) -> Result<(PauliString, PauliString, BondConfig)> {
    let n = lat.num_qubits();
    let mut rx = PauliString::identity(n);
    let mut rz = PauliString::identity(n);
    for r in 0..lat.ly() {
        for c in 0..lat.lx() {
            if s.plaquette(lat, r, c) {
                for rr in r + 1..=lat.ly() {
                    rx.x[lat.horizontal(rr, c)] ^= true;
                }
            }
        }
    }
    for r in 0..=lat.ly() {
        for j in 0..lat.lx() - 1 {
            if s.star(lat, r, j) {
                for c in j + 1..lat.lx() {
                    rz.z[lat.horizontal(r, c)] ^= true;
                }
            }
        }
    }
    let got_x = Syndrome::of_pauli(lat, &rx);
    let got_z = Syndrome::of_pauli(lat, &rz);
    if got_x.plaquette_bits != s.plaquette_bits || got_z.star_bits != s.star_bits {
        return Err(Error::Inconsistent("straight-gauge strings do not reproduce the syndrome".into()));
    }
    let bonds = BondConfig::from_references(lat, &rx, &rz);
    Ok((rx, rz, bonds))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefectKind {
    X,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefectPath {
    /// X: leftmost column of horizontal edges. Z: bottom row.
    Canonical,
    /// X: rightmost column of horizontal edges. Z: top row.
    Alternative,
}

pub fn defect_edges(lat: &Lattice, which: DefectKind, path: DefectPath) -> Vec<usize> {
    match (which, path) {
        (DefectKind::X, DefectPath::Canonical) => (0..=lat.ly()).map(|r| lat.horizontal(r, 0)).collect(),
        (DefectKind::X, DefectPath::Alternative) => (0..=lat.ly()).map(|r| lat.horizontal(r, lat.lx() - 1)).collect(),
        (DefectKind::Z, DefectPath::Canonical) => (0..lat.lx()).map(|c| lat.horizontal(0, c)).collect(),
        (DefectKind::Z, DefectPath::Alternative) => (0..lat.lx()).map(|c| lat.horizontal(lat.ly(), c)).collect(),
    }
}

/// Flips `zeta_x` (or `zeta_z`) along a non-contractible path.
pub fn insert_defect(bonds: &BondConfig, lat: &Lattice, which: DefectKind) -> Result<BondConfig> {
    insert_defect_along(bonds, lat, which, DefectPath::Canonical)
}

pub fn insert_defect_along(bonds: &BondConfig, lat: &Lattice, which: DefectKind, path: DefectPath) -> Result<BondConfig> {
    let mut out = bonds.clone();
    let flag = match which {
        DefectKind::X => &mut out.x_defect,
        DefectKind::Z => &mut out.z_defect,
    };
    if *flag {
        return Err(Error::Invalid(format!("{which:?} defect already inserted")));
    }
    *flag = true;
    let target = match which {
        DefectKind::X => &mut out.zeta_x,
        DefectKind::Z => &mut out.zeta_z,
    };
    for q in defect_edges(lat, which, path) {
        target[q] = -target[q];
    }
    Ok(out)
}

/// Site of a gauge transformation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GaugeSite {
    /// Star at vertex `(row, col)`: flips the X-sector bonds around it.
    Vertex { row: usize, col: usize },
    /// Plaquette `(row, col)`: flips `zeta_z` around it.
    Plaquette { row: usize, col: usize },
}

/// Flips bond variables around a vertex or plaquette. For single-copy
/// models the vertex flip acts on `eta`; for the two-copy model it acts on
/// the logical strings `zeta_x` / `zeta_z`.
pub fn gauge_transform(bonds: &BondConfig, lat: &Lattice, kind: ModelKind, site: GaugeSite) -> Result<BondConfig> {
    let mut out = bonds.clone();
    match site {
        GaugeSite::Vertex { row, col } => {
            if row > lat.ly() || col + 1 >= lat.lx() {
                return Err(Error::Invalid(format!("no vertex at ({row}, {col})")));
            }
            let target = if kind == ModelKind::GeneralXx { &mut out.zeta_x } else { &mut out.eta };
            for q in lat.star_edges(row, col) {
                target[q] = -target[q];
            }
        }
        GaugeSite::Plaquette { row, col } => {
            if row >= lat.ly() || col >= lat.lx() {
                return Err(Error::Invalid(format!("no plaquette at ({row}, {col})")));
            }
            if kind != ModelKind::GeneralXx {
                return Err(Error::Invalid("plaquette gauge needs the two-copy model".into()));
            }
            for q in lat.plaquette_edges(row, col) {
                out.zeta_z[q] = -out.zeta_z[q];
            }
        }
    }
    Ok(out)
}

/// `J = ln(1 / tan theta) / 2`; the X-rotation edge weight is proportional
/// to `exp((J - i pi/4) s)` for aligned (`s = 1`) or anti-aligned spins.
pub fn coupling_constant(theta: f64) -> Result<C64> {
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Invalid(format!("coupling needs 0 < theta < pi/2, got {theta}")));
    }
    Ok(C64::new(0.5 * (1.0 / theta.tan()).ln(), 0.0))
}

/// Edge weight for the single-qubit flip `sx`, full X error `sk` and Z
/// sector `sz`, each given as a spin product.
pub fn edge_weight(coeffs: &[[C64; 2]; 2], xi: i8, sx: i8, sk: i8, sz: i8) -> C64 {
    let x = usize::from(sx < 0);
    let z = usize::from(sz < 0);
    let w = coeffs[x][z];
    if xi < 0 && sk < 0 {
        -w
    } else {
        w
    }
}

/// XX-rotation weight tying vertex spin `sigma` to its horizontal copy `alpha`.
pub fn pair_weight(phi: f64, sigma: i8, alpha: i8) -> C64 {
    if sigma == alpha {
        C64::new(phi.cos(), 0.0)
    } else {
        I * phi.sin()
    }
}

fn spin(index: usize) -> i8 {
    if index == 0 {
        1
    } else {
        -1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// Horizontal edges of a row.
    W,
    /// Vertical edges between two vertex rows.
    V,
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::W => "W",
            LayerKind::V => "V",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Layer {
    pub kind: LayerKind,
    /// 1-based layer label as in `W_y` / `V_y`.
    pub y: usize,
    /// MPO over the whole chain, tensors `[w_left, out, in, w_right]`.
    pub mpo: Vec<ComplexTensor>,
    pub tags: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct LayeredNetwork {
    pub kind: ModelKind,
    /// Per-site ket boundary vectors (applied first).
    pub ket: Vec<Vec<C64>>,
    /// Per-site bra boundary vectors (contracted last, not conjugated).
    pub bra: Vec<Vec<C64>>,
    /// `W_1, V_1, W_2, ..., V_ly, W_{ly+1}` in application order.
    pub layers: Vec<Layer>,
    pub site_labels: Vec<String>,
}

impl LayeredNetwork {
    pub fn num_sites(&self) -> usize {
        self.ket.len()
    }
}

impl fmt::Display for LayeredNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model {} sites [{}]", self.kind.name(), self.site_labels.join(" "))?;
        for layer in &self.layers {
            let k = match layer.kind {
                LayerKind::W => "W",
                LayerKind::V => "V",
            };
            let bonds: Vec<String> = layer.mpo.iter().map(|t| format!("{:?}", t.shape())).collect();
            writeln!(f, "{k}_{}: {}", layer.y, bonds.join(" "))?;
            for t in &layer.tags {
                writeln!(f, "    {t}")?;
            }
        }
        Ok(())
    }
}

fn check_bonds(model: &ErrorModel, bonds: &BondConfig, lat: &Lattice) -> Result<()> {
    let n = lat.num_qubits();
    for v in [&bonds.eta, &bonds.xi, &bonds.zeta_x, &bonds.zeta_z] {
        if v.len() != n || v.iter().any(|&b| b != 1 && b != -1) {
            return Err(Error::Dimension("bond variables must be +-1 per qubit".into()));
        }
    }
    if model.kind != ModelKind::GeneralXx && (bonds.xi.iter().any(|&b| b < 0) || bonds.zeta_z.iter().any(|&b| b < 0)) {
        return Err(Error::Invalid(format!("model {} has no Z sector", model.kind.name())));
    }
    Ok(())
}

/// Builds the transfer-matrix layers for one homology class.
pub fn build_network(model: &ErrorModel, bonds: &BondConfig, lat: &Lattice) -> Result<LayeredNetwork> {
    check_bonds(model, bonds, lat)?;
    match model.kind {
        ModelKind::XOnly | ModelKind::XXx => Ok(single_copy(model, bonds, lat)),
        ModelKind::GeneralXx => Ok(two_copy(model, bonds, lat)),
    }
}

fn single_copy(model: &ErrorModel, bonds: &BondConfig, lat: &Lattice) -> LayeredNetwork {
    let (lx, ly) = (lat.lx(), lat.ly());
    let m = lx - 1;
    let coeffs = model.single_qubit_coeffs();
    let phi = if model.kind == ModelKind::XOnly { 0.0 } else { model.phi };
    let h = C64::new(1.0, 0.0);
    let mut layers = Vec::with_capacity(2 * ly + 1);
    for y in 1..=ly + 1 {
        let r = y - 1;
        let mut mpo = Vec::with_capacity(m);
        let mut tags = Vec::new();
        for j in 0..m {
            let wl = if j == 0 { 1 } else { 2 };
            let last = j + 1 == m;
            let wr = if last { 1 } else { 2 };
            let e_left = lat.horizontal(r, j);
            let e_right = lat.horizontal(r, j + 1);
            let b_left = bonds.eta[e_left] * bonds.zeta_x[e_left];
            let b_right = bonds.eta[e_right] * bonds.zeta_x[e_right];
            let t = ComplexTensor::from_fn(&[wl, 2, 2, wr], |ix| {
                if ix[1] != ix[2] {
                    return ZERO;
                }
                let s = spin(ix[1]);
                let a_prev = if j == 0 { 1 } else { spin(ix[0]) };
                let mut acc = ZERO;
                for ai in 0..2 {
                    if !last && ai != ix[3] {
                        continue;
                    }
                    let a = spin(ai);
                    let mut w = pair_weight(phi, s, a) * edge_weight(&coeffs, 1, b_left * a_prev * a, 1, 1);
                    if last {
                        w *= edge_weight(&coeffs, 1, b_right * a, 1, 1);
                    }
                    acc += w;
                }
                acc
            });
            tags.push(format!("site {j}: purple(sigma,alpha) teal(H{r},{j}){}", if last { format!(" teal(H{r},{})", j + 1) } else { String::new() }));
            mpo.push(t);
        }
        layers.push(Layer { kind: LayerKind::W, y, mpo, tags });
        if y <= ly {
            let mut mpo = Vec::with_capacity(m);
            let mut tags = Vec::new();
            for j in 0..m {
                let e = lat.vertical(r, j);
                let b = bonds.eta[e] * bonds.zeta_x[e];
                mpo.push(ComplexTensor::from_fn(&[1, 2, 2, 1], |ix| {
                    edge_weight(&coeffs, 1, b * spin(ix[1]) * spin(ix[2]), 1, 1)
                }));
                tags.push(format!("site {j}: teal(V{r},{j})"));
            }
            layers.push(Layer { kind: LayerKind::V, y, mpo, tags });
        }
    }
    LayeredNetwork {
        kind: model.kind,
        ket: vec![vec![h, h]; m],
        bra: vec![vec![h, h]; m],
        layers,
        site_labels: (0..m).map(|j| format!("s{j}")).collect(),
    }
}

fn two_copy(model: &ErrorModel, bonds: &BondConfig, lat: &Lattice) -> LayeredNetwork {
    let (lx, ly) = (lat.lx(), lat.ly());
    let n_sites = 2 * lx - 1;
    let coeffs = model.single_qubit_coeffs();
    let phi = model.phi;
    let mut layers = Vec::with_capacity(2 * ly + 1);
    for y in 1..=ly + 1 {
        let r = y - 1;
        // W: tau_c handles edge H(r,c) between vertices c-1 and c; sigma_j
        // passes the pair (alpha_j, sigma_j) to both neighbours on a
        // bond of extent 4 (index 2 * alpha + sigma).
        let mut mpo = Vec::with_capacity(n_sites);
        let mut tags = Vec::new();
        for pos in 0..n_sites {
            if pos % 2 == 0 {
                let c = pos / 2;
                let e = lat.horizontal(r, c);
                let bx = bonds.eta[e] * bonds.zeta_x[e];
                let bz = bonds.xi[e] * bonds.zeta_z[e];
                let xi = bonds.xi[e];
                let wl = if c == 0 { 1 } else { 4 };
                let wr = if c + 1 == lx { 1 } else { 4 };
                mpo.push(ComplexTensor::from_fn(&[wl, 2, 2, wr], |ix| {
                    let (a_l, s_l) = if c == 0 { (1, 1) } else { (spin(ix[0] / 2), spin(ix[0] % 2)) };
                    let (a_r, s_r) = if c + 1 == lx { (1, 1) } else { (spin(ix[3] / 2), spin(ix[3] % 2)) };
                    edge_weight(&coeffs, xi, bx * a_l * a_r, bx * s_l * s_r, bz * spin(ix[1]) * spin(ix[2]))
                }));
                tags.push(format!("tau{c}: teal(H{r},{c}) green(xi={xi})"));
            } else {
                mpo.push(ComplexTensor::from_fn(&[4, 2, 2, 4], |ix| {
                    if ix[1] != ix[2] || ix[0] != ix[3] || ix[0] % 2 != ix[1] {
                        return ZERO;
                    }
                    pair_weight(phi, spin(ix[1]), spin(ix[0] / 2))
                }));
                tags.push(format!("sigma{}: purple(sigma,alpha) delta", pos / 2));
            }
        }
        layers.push(Layer { kind: LayerKind::W, y, mpo, tags });
        if y <= ly {
            // V: tau sites are diagonal and broadcast their value; sigma_j
            // handles edge V(r,j) between tau_j and tau_{j+1}.
            let mut mpo = Vec::with_capacity(n_sites);
            let mut tags = Vec::new();
            for pos in 0..n_sites {
                if pos % 2 == 0 {
                    let c = pos / 2;
                    let wl = if c == 0 { 1 } else { 2 };
                    let wr = if c + 1 == lx { 1 } else { 2 };
                    mpo.push(ComplexTensor::from_fn(&[wl, 2, 2, wr], |ix| {
                        let ok = ix[1] == ix[2] && (c == 0 || ix[0] == ix[1]) && (c + 1 == lx || ix[3] == ix[1]);
                        if ok {
                            ONE
                        } else {
                            ZERO
                        }
                    }));
                    tags.push(format!("tau{c}: delta"));
                } else {
                    let j = pos / 2;
                    let e = lat.vertical(r, j);
                    let bx = bonds.eta[e] * bonds.zeta_x[e];
                    let bz = bonds.xi[e] * bonds.zeta_z[e];
                    let xi = bonds.xi[e];
                    mpo.push(ComplexTensor::from_fn(&[2, 2, 2, 2], |ix| {
                        {
                            let sx = bx * spin(ix[1]) * spin(ix[2]);
                            edge_weight(&coeffs, xi, sx, sx, bz * spin(ix[0]) * spin(ix[3]))
                        }
                    }));
                    tags.push(format!("sigma{j}: teal(V{r},{j}) green(xi={xi})"));
                }
            }
            layers.push(Layer { kind: LayerKind::V, y, mpo, tags });
        }
    }
    let up = vec![ONE, ZERO];
    let plus = vec![ONE, ONE];
    let boundary: Vec<Vec<C64>> = (0..n_sites).map(|p| if p % 2 == 0 { up.clone() } else { plus.clone() }).collect();
    LayeredNetwork {
        kind: model.kind,
        ket: boundary.clone(),
        bra: boundary,
        layers,
        site_labels: (0..n_sites)
            .map(|p| if p % 2 == 0 { format!("t{}", p / 2) } else { format!("s{}", p / 2) })
            .collect(),
    }
}

/// Brute-force spin sum of the class amplitude, for small lattices.
pub fn brute_force_amplitude(model: &ErrorModel, bonds: &BondConfig, lat: &Lattice) -> Result<C64> {
    check_bonds(model, bonds, lat)?;
    let (lx, ly) = (lat.lx(), lat.ly());
    let nv = (lx - 1) * (ly + 1);
    let np = if model.kind == ModelKind::GeneralXx { lx * ly } else { 0 };
    let pairs = model.has_pair_rotation();
    let na = if pairs { nv } else { 0 };
    let total = nv + na + np;
    if total > 24 {
        return Err(Error::TooLarge(format!("{total} spins for brute force")));
    }
    let coeffs = model.single_qubit_coeffs();
    let mut z = ZERO;
    for cfg in 0u64..(1u64 << total) {
        let bit = |k: usize| if (cfg >> k) & 1 == 1 { -1i8 } else { 1 };
        let sigma = |r: usize, j: isize| -> i8 {
            if j < 0 || j as usize >= lx - 1 {
                1
            } else {
                bit(r * (lx - 1) + j as usize)
            }
        };
        let alpha = |r: usize, j: isize| -> i8 {
            if !pairs {
                sigma(r, j)
            } else if j < 0 || j as usize >= lx - 1 {
                1
            } else {
                bit(nv + r * (lx - 1) + j as usize)
            }
        };
        let tau = |r: isize, c: usize| -> i8 {
            if np == 0 || r < 0 || r as usize >= ly {
                1
            } else {
                bit(nv + na + r as usize * lx + c)
            }
        };
        let mut w = ONE;
        if pairs {
            for r in 0..=ly {
                for j in 0..lx - 1 {
                    w *= pair_weight(model.phi, sigma(r, j as isize), alpha(r, j as isize));
                }
            }
        }
        for r in 0..=ly {
            for c in 0..lx {
                let e = lat.horizontal(r, c);
                let b = bonds.eta[e] * bonds.zeta_x[e];
                let sx = b * alpha(r, c as isize - 1) * alpha(r, c as isize);
                let sk = b * sigma(r, c as isize - 1) * sigma(r, c as isize);
                let sz = bonds.xi[e] * bonds.zeta_z[e] * tau(r as isize - 1, c) * tau(r as isize, c);
                w *= edge_weight(&coeffs, bonds.xi[e], sx, sk, sz);
            }
        }
        for r in 0..ly {
            for j in 0..lx - 1 {
                let e = lat.vertical(r, j);
                let sx = bonds.eta[e] * bonds.zeta_x[e] * sigma(r, j as isize) * sigma(r + 1, j as isize);
                let sz = bonds.xi[e] * bonds.zeta_z[e] * tau(r as isize, j) * tau(r as isize, j + 1);
                w *= edge_weight(&coeffs, bonds.xi[e], sx, sx, sz);
            }
        }
        z += w;
    }
    Ok(z)
}

/// Dense contraction of a layered network, for small chains.
pub fn dense_contract(net: &LayeredNetwork) -> Result<C64> {
    let n = net.num_sites();
    if n > 14 {
        return Err(Error::TooLarge(format!("{n} sites for dense contraction")));
    }
    let dim = 1usize << n;
    let mut v: Vec<C64> = (0..dim)
        .map(|k| (0..n).map(|p| net.ket[p][(k >> (n - 1 - p)) & 1]).product())
        .collect();
    for layer in &net.layers {
        let mut out = vec![ZERO; dim];
        for ko in 0..dim {
            for (ki, vi) in v.iter().enumerate() {
                if *vi == ZERO {
                    continue;
                }
                // contract the MPO as a chain of bond vectors
                let mut env = vec![ONE];
                for (p, t) in layer.mpo.iter().enumerate() {
                    let s = t.shape();
                    let (po, pi) = ((ko >> (n - 1 - p)) & 1, (ki >> (n - 1 - p)) & 1);
                    let mut next = vec![ZERO; s[3]];
                    for (a, ea) in env.iter().enumerate() {
                        for (b, nb) in next.iter_mut().enumerate() {
                            *nb += ea * t.get(&[a, po, pi, b]);
                        }
                    }
                    env = next;
                }
                out[ko] += env[0] * vi;
            }
        }
        v = out;
    }
    Ok((0..dim)
        .map(|k| v[k] * (0..n).map(|p| net.bra[p][(k >> (n - 1 - p)) & 1]).product::<C64>())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::{build_lattice, exact_class_amplitudes};
    use std::f64::consts::PI;

    fn close_rel(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * a.norm().max(b.norm()).max(1e-300)
    }

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn random_model(kind: ModelKind, rng: &mut Lcg) -> ErrorModel {
        let theta = 0.05 + 0.7 * rng.next();
        let phi = 0.05 + 0.7 * rng.next();
        match kind {
            ModelKind::XOnly => ErrorModel::x_only(theta).unwrap(),
            ModelKind::XXx => ErrorModel::x_xx(theta, phi).unwrap(),
            ModelKind::GeneralXx => {
                let v = [rng.next() - 0.5, rng.next() - 0.5, rng.next() - 0.5];
                let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                ErrorModel::general(theta, phi, [v[0] / nrm, v[1] / nrm, v[2] / nrm]).unwrap()
            }
        }
    }

    fn random_syndrome(lat: &Lattice, kind: ModelKind, rng: &mut Lcg) -> Syndrome {
        let mut s = Syndrome::trivial(lat);
        for b in &mut s.plaquette_bits {
            *b = rng.next() < 0.4;
        }
        if kind == ModelKind::GeneralXx {
            for b in &mut s.star_bits {
                *b = rng.next() < 0.4;
            }
        }
        s
    }

    fn class_bonds(lat: &Lattice, base: &BondConfig, a: usize, b: usize) -> BondConfig {
        let mut out = base.clone();
        if a == 1 {
            out = insert_defect(&out, lat, DefectKind::X).unwrap();
        }
        if b == 1 {
            out = insert_defect(&out, lat, DefectKind::Z).unwrap();
        }
        out
    }

    #[test]
    fn straight_gauge_examples() {
        let lat = build_lattice(3, 3).unwrap();
        let (rx, rz, b) = straight_gauge(&lat, &Syndrome::trivial(&lat)).unwrap();
        assert!(rx.is_identity() && rz.is_identity());
        assert!(b.eta.iter().chain(&b.xi).all(|&v| v == 1));
        let mut s = Syndrome::trivial(&lat);
        s.plaquette_bits[1 * 3 + 2] = true;
        let (rx, _, _) = straight_gauge(&lat, &s).unwrap();
        assert_eq!(rx.x_support(), vec![lat.horizontal(2, 2), lat.horizontal(3, 2)]);
        let mut rng = Lcg(5);
        for _ in 0..50 {
            let s = random_syndrome(&lat, ModelKind::GeneralXx, &mut rng);
            let (rx, rz, _) = straight_gauge(&lat, &s).unwrap();
            let sx = Syndrome::of_pauli(&lat, &rx);
            let sz = Syndrome::of_pauli(&lat, &rz);
            assert_eq!(sx.plaquette_bits, s.plaquette_bits);
            assert_eq!(sz.star_bits, s.star_bits);
            assert!(sx.star_bits.iter().all(|&b| !b) && sz.plaquette_bits.iter().all(|&b| !b));
        }
    }

    #[test]
    fn defect_insertion() {
        let lat = build_lattice(3, 4).unwrap();
        let b = BondConfig::trivial(&lat);
        let d = insert_defect(&b, &lat, DefectKind::X).unwrap();
        assert_eq!(d.zeta_x.iter().filter(|&&v| v < 0).count(), 5);
        assert!(insert_defect(&d, &lat, DefectKind::X).is_err());
        let dz = insert_defect(&b, &lat, DefectKind::Z).unwrap();
        assert_eq!(dz.zeta_z.iter().filter(|&&v| v < 0).count(), 3);
    }

    #[test]
    fn tensor_values() {
        let c = ErrorModel::x_only(0.0).unwrap().single_qubit_coeffs();
        assert_eq!(edge_weight(&c, 1, 1, 1, 1), ONE);
        assert_eq!(edge_weight(&c, 1, -1, -1, 1), ZERO);
        let c = ErrorModel::x_only(PI / 4.0).unwrap().single_qubit_coeffs();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close_rel(edge_weight(&c, 1, 1, 1, 1), C64::new(h, 0.0), 1e-15));
        assert!(close_rel(edge_weight(&c, 1, -1, -1, 1), C64::new(0.0, h), 1e-15));
        // crossing sign: only xi = -1 with an X flip
        let g = ErrorModel::general(0.3, 0.0, [0.6, 0.8, 0.0]).unwrap().single_qubit_coeffs();
        for sx in [1i8, -1] {
            for sk in [1i8, -1] {
                for sz in [1i8, -1] {
                    let plain = edge_weight(&g, 1, sx, sk, sz);
                    let crossed = edge_weight(&g, -1, sx, sk, sz);
                    let want = if sk < 0 { -plain } else { plain };
                    assert_eq!(crossed, want);
                }
            }
        }
    }

    #[test]
    fn coupling_identity() {
        assert!(coupling_constant(PI / 4.0).unwrap().norm() < 1e-15);
        assert!(coupling_constant(0.0).is_err());
        assert!(coupling_constant(1e-300).unwrap().re > 300.0);
        let theta = 0.1 * PI;
        let j = coupling_constant(theta).unwrap();
        let c = ErrorModel::x_only(theta).unwrap().single_qubit_coeffs();
        let k = j - I * (PI / 4.0);
        let ratio = edge_weight(&c, 1, 1, 1, 1) / (k).exp();
        for s in [1i8, -1] {
            for eta in [1i8, -1] {
                let w = edge_weight(&c, 1, eta * s, eta * s, 1);
                let e = (k * f64::from(eta * s)).exp() * ratio;
                assert!(close_rel(w, e, 1e-13));
            }
        }
    }

    #[test]
    fn network_matches_brute_force_spin_sum() {
        let mut rng = Lcg(11);
        for kind in [ModelKind::XOnly, ModelKind::XXx, ModelKind::GeneralXx] {
            for (lx, ly) in [(2, 1), (2, 2), (3, 2), (3, 3)] {
                let lat = build_lattice(lx, ly).unwrap();
                let model = random_model(kind, &mut rng);
                let s = random_syndrome(&lat, kind, &mut rng);
                let (_, _, base) = straight_gauge(&lat, &s).unwrap();
                for a in 0..2 {
                    for b in 0..if kind == ModelKind::GeneralXx { 2 } else { 1 } {
                        let bonds = class_bonds(&lat, &base, a, b);
                        let Ok(bf) = brute_force_amplitude(&model, &bonds, &lat) else { continue };
                        let net = build_network(&model, &bonds, &lat).unwrap();
                        let dn = dense_contract(&net).unwrap();
                        assert!(close_rel(bf, dn, 1e-10), "{kind:?} ({lx},{ly}) class ({a},{b}): {bf} vs {dn}");
                    }
                }
            }
        }
    }

    #[test]
    fn brute_force_matches_dense_oracle() {
        let mut rng = Lcg(29);
        for kind in [ModelKind::XOnly, ModelKind::XXx, ModelKind::GeneralXx] {
            for (lx, ly) in [(2, 1), (2, 2), (3, 2)] {
                for _ in 0..3 {
                    let lat = build_lattice(lx, ly).unwrap();
                    let model = random_model(kind, &mut rng);
                    let s = random_syndrome(&lat, kind, &mut rng);
                    let (rx, rz, base) = straight_gauge(&lat, &s).unwrap();
                    let exact = exact_class_amplitudes(&lat, &model, &s, &rx, &rz).unwrap();
                    for a in 0..2 {
                        for b in 0..2 {
                            if kind != ModelKind::GeneralXx && b == 1 {
                                assert!(exact[a][1].norm() < 1e-12);
                                continue;
                            }
                            let bonds = class_bonds(&lat, &base, a, b);
                            let bf = brute_force_amplitude(&model, &bonds, &lat).unwrap();
                            assert!(
                                close_rel(bf, exact[a][b], 1e-10),
                                "{kind:?} ({lx},{ly}) {} class ({a},{b}): {bf} vs {}",
                                s.to_hex(),
                                exact[a][b]
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn single_copy_rejects_z_sector_bonds() {
        let lat = build_lattice(2, 2).unwrap();
        let b = insert_defect(&BondConfig::trivial(&lat), &lat, DefectKind::Z).unwrap();
        assert!(build_network(&ErrorModel::x_only(0.2).unwrap(), &b, &lat).is_err());
    }

    #[test]
    fn gauge_transform_is_an_involution() {
        let lat = build_lattice(3, 3).unwrap();
        let b = BondConfig::trivial(&lat);
        for kind in [ModelKind::XOnly, ModelKind::GeneralXx] {
            let site = GaugeSite::Vertex { row: 1, col: 1 };
            let once = gauge_transform(&b, &lat, kind, site).unwrap();
            assert_ne!(once, b);
            assert_eq!(gauge_transform(&once, &lat, kind, site).unwrap(), b);
        }
        let edge = gauge_transform(&b, &lat, ModelKind::XOnly, GaugeSite::Vertex { row: 0, col: 0 }).unwrap();
        assert_eq!(edge.eta.iter().filter(|&&v| v < 0).count(), 3);
    }
}
