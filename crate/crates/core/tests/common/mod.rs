//! Dense statevector reference, written separately from the library's own
//! simulator. Qubit `q` is bit `q` of the amplitude index.
#![allow(dead_code)]

use std::collections::BTreeMap;

use cohdec::code::{pair_edges, Lattice, PauliString, Syndrome};
use cohdec::C64;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Debug)]
pub struct Dense {
    pub n: usize,
    pub amps: Vec<C64>,
}

impl Dense {
    pub fn zeros_state(n: usize) -> Self {
        let mut amps = vec![c(0.0, 0.0); 1 << n];
        amps[0] = c(1.0, 0.0);
        Self { n, amps }
    }

    pub fn plus_state(n: usize) -> Self {
        let a = (0.5f64).powf(n as f64 / 2.0);
        Self { n, amps: vec![c(a, 0.0); 1 << n] }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr().sqrt();
        for z in &mut self.amps {
            *z /= n;
        }
        self
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn mask(qs: &[usize]) -> usize {
        qs.iter().fold(0, |m, q| m | (1 << q))
    }

    pub fn x_string(&self, qs: &[usize]) -> Self {
        let m = Self::mask(qs);
        let mut amps = vec![c(0.0, 0.0); self.amps.len()];
        for (k, z) in self.amps.iter().enumerate() {
            amps[k ^ m] = *z;
        }
        Self { n: self.n, amps }
    }

    pub fn z_string(&self, qs: &[usize]) -> Self {
        let m = Self::mask(qs);
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(k, z)| if (k & m).count_ones() % 2 == 1 { -z } else { *z })
            .collect();
        Self { n: self.n, amps }
    }

    /// `(1 + sign S) / 2` for a Z-type or X-type string `S`.
    pub fn project(&self, qs: &[usize], z_type: bool, sign: f64) -> Self {
        let s = if z_type { self.z_string(qs) } else { self.x_string(qs) };
        let amps = self.amps.iter().zip(&s.amps).map(|(a, b)| (a + b * sign) * 0.5).collect();
        Self { n: self.n, amps }
    }

    /// `m` acting on qubit `q`, `m[out][in]`.
    pub fn one_qubit(&self, q: usize, m: [[C64; 2]; 2]) -> Self {
        let mut amps = self.amps.clone();
        for k in 0..self.amps.len() {
            if k & (1 << q) == 0 {
                let (a0, a1) = (self.amps[k], self.amps[k | (1 << q)]);
                amps[k] = m[0][0] * a0 + m[0][1] * a1;
                amps[k | (1 << q)] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Self { n: self.n, amps }
    }

    /// `cos(phi) + i sin(phi) X_a X_b`.
    pub fn xx_rotation(&self, a: usize, b: usize, phi: f64) -> Self {
        let flipped = self.x_string(&[a, b]);
        let amps = self.amps.iter().zip(&flipped.amps).map(|(x, y)| x * phi.cos() + y * c(0.0, phi.sin())).collect();
        Self { n: self.n, amps }
    }
}

/// `cos(theta) + i sin(theta) (n . sigma)`.
pub fn rotation(theta: f64, axis: [f64; 3]) -> [[C64; 2]; 2] {
    let (co, si) = (theta.cos(), theta.sin());
    let [nx, ny, nz] = axis;
    let i = c(0.0, 1.0);
    [
        [c(co, 0.0) + i * si * nz, i * si * c(nx, -ny)],
        [i * si * c(nx, ny), c(co, 0.0) - i * si * nz],
    ]
}

/// Stabilizer supports in syndrome order, with `true` for Z type.
pub fn generators(lat: &Lattice) -> Vec<(Vec<usize>, bool)> {
    let mut g = Vec::new();
    for r in 0..lat.ly() {
        for col in 0..lat.lx() {
            g.push((lat.plaquette_edges(r, col), true));
        }
    }
    for r in 0..=lat.ly() {
        for j in 0..lat.lx() - 1 {
            g.push((lat.star_edges(r, j), false));
        }
    }
    g
}

pub fn logical_x(lat: &Lattice) -> Vec<usize> {
    (0..=lat.ly()).map(|r| lat.horizontal(r, 0)).collect()
}

pub fn logical_z(lat: &Lattice) -> Vec<usize> {
    (0..lat.lx()).map(|col| lat.horizontal(0, col)).collect()
}

pub fn logical_zero(lat: &Lattice) -> Dense {
    let mut psi = Dense::zeros_state(lat.num_qubits());
    for (qs, z) in generators(lat) {
        if !z {
            psi = psi.project(&qs, false, 1.0);
        }
    }
    psi.normalized()
}

pub fn logical_one(lat: &Lattice) -> Dense {
    logical_zero(lat).x_string(&logical_x(lat))
}

/// Code state stabilized by the logical X: `|+>` on every qubit projected onto the plaquettes.
pub fn logical_plus(lat: &Lattice) -> Dense {
    let mut psi = Dense::plus_state(lat.num_qubits());
    for (qs, z) in generators(lat) {
        if z {
            psi = psi.project(&qs, true, 1.0);
        }
    }
    psi.normalized()
}

/// Single-qubit rotations on every qubit, then XX rotations on the model's pairs.
pub fn corrupt(lat: &Lattice, psi: &Dense, theta: f64, phi: f64, axis: [f64; 3]) -> Dense {
    let m = rotation(theta, axis);
    let mut out = psi.clone();
    for q in 0..lat.num_qubits() {
        out = out.one_qubit(q, m);
    }
    if phi != 0.0 {
        for (a, b) in pair_edges(lat) {
            out = out.xx_rotation(a, b, phi);
        }
    }
    out
}

pub fn project_syndrome(lat: &Lattice, psi: &Dense, bits: &[bool]) -> Dense {
    let mut out = psi.clone();
    for ((qs, z), &b) in generators(lat).iter().zip(bits) {
        out = out.project(qs, *z, if b { -1.0 } else { 1.0 });
    }
    out
}

/// Every syndrome with nonzero probability for a normalized state.
pub fn syndrome_law(lat: &Lattice, psi: &Dense) -> BTreeMap<Vec<bool>, f64> {
    let gens = generators(lat);
    let mut out = BTreeMap::new();
    let mut stack = vec![(psi.clone(), Vec::new())];
    while let Some((state, bits)) = stack.pop() {
        if bits.len() == gens.len() {
            out.insert(bits, state.norm_sqr());
            continue;
        }
        let (qs, z) = &gens[bits.len()];
        for b in [false, true] {
            let next = state.project(qs, *z, if b { -1.0 } else { 1.0 });
            if next.norm_sqr() > 1e-28 {
                let mut nb = bits.clone();
                nb.push(b);
                stack.push((next, nb));
            }
        }
    }
    out
}

/// Born-samples a syndrome stabilizer by stabilizer with the given uniforms.
pub fn born_sample(lat: &Lattice, psi: &Dense, uniforms: &mut impl FnMut() -> f64) -> Vec<bool> {
    let mut state = psi.clone();
    let mut bits = Vec::new();
    for (qs, z) in generators(lat) {
        let total = state.norm_sqr();
        let plus = state.project(&qs, z, 1.0);
        let p_plus = plus.norm_sqr() / total;
        let b = uniforms() >= p_plus;
        state = if b { state.project(&qs, z, -1.0) } else { plus };
        bits.push(b);
    }
    bits
}

/// Class amplitudes `Z[a][b]` defined by
/// `Z^{Rz} X^{Rx} Pi_s U |_code = (-1)^{|Rx ∩ Rz|} sum_ab Z_ab Xbar^a Zbar^b`.
pub fn class_amplitudes(
    lat: &Lattice,
    theta: f64,
    phi: f64,
    axis: [f64; 3],
    bits: &[bool],
    rx: &PauliString,
    rz: &PauliString,
) -> [[C64; 2]; 2] {
    let zero = logical_zero(lat);
    let one = logical_one(lat);
    let (xs, zs) = (rx.x_support(), rz.z_support());
    let crossing = xs.iter().filter(|q| zs.contains(q)).count();
    let sc = if crossing % 2 == 0 { 1.0 } else { -1.0 };
    let run = |psi: &Dense| project_syndrome(lat, &corrupt(lat, psi, theta, phi, axis), bits).x_string(&xs).z_string(&zs);
    let (m0, m1) = (run(&zero), run(&one));
    let (m00, m10) = (zero.inner(&m0), one.inner(&m0));
    let (m01, m11) = (zero.inner(&m1), one.inner(&m1));
    let h = 0.5 * sc;
    [[(m00 + m11) * h, (m00 - m11) * h], [(m10 + m01) * h, (m10 - m01) * h]]
}

/// Syndrome probability averaged over the logical basis states.
pub fn average_probability(lat: &Lattice, theta: f64, phi: f64, axis: [f64; 3], bits: &[bool]) -> f64 {
    let p = |psi: &Dense| project_syndrome(lat, &corrupt(lat, psi, theta, phi, axis), bits).norm_sqr();
    0.5 * (p(&logical_zero(lat)) + p(&logical_one(lat)))
}

pub fn syndrome(lat: &Lattice, bits: &[bool]) -> Syndrome {
    Syndrome::from_bits(lat, bits).expect("bit count matches the lattice")
}
