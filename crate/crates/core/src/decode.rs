//! Boundary-MPS contraction of the class networks and the decoding
//! diagnostics built on the resulting amplitudes.

use std::f64::consts::PI;

use crate::code::{ErrorModel, Lattice, LogicalInit, ModelKind, Syndrome};
use crate::error::{Error, Result};
use crate::mps::Mps;
use crate::rbim::{build_network, insert_defect, straight_gauge, BondConfig, DefectKind, LayerKind, LayeredNetwork};
use crate::tensors::{entropy_from_spectrum, C64, ZERO};

/// Value reported for a free energy whose competing amplitude vanishes.
pub const DF_SENTINEL: f64 = 1e6;

/// Amplitudes below `exp(MAGNITUDE_FLOOR)` count as zero when deciding
/// whether a free energy is degenerate.
const MAGNITUDE_FLOOR: f64 = -700.0 * std::f64::consts::LN_10;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub kind: LayerKind,
    pub y: usize,
    /// Half-cut entropy after the layer.
    pub entropy: f64,
    pub max_bond: usize,
    pub discarded: f64,
    /// Half-cut singular values after the layer, normalized.
    pub spectrum: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContractionTrace {
    pub steps: Vec<TraceStep>,
    /// The contraction hit an exactly vanishing state before the last layer.
    pub vanished: bool,
}

impl ContractionTrace {
    pub fn total_discarded(&self) -> f64 {
        self.steps.iter().map(|s| s.discarded).sum()
    }

    pub fn max_discarded(&self) -> f64 {
        self.steps.iter().map(|s| s.discarded).fold(0.0, f64::max)
    }

    pub fn max_bond(&self) -> usize {
        self.steps.iter().map(|s| s.max_bond).max().unwrap_or(1)
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.entropy).collect()
    }

    /// Mean half-cut entropy over the last `ceil(num_w / 4)` W layers.
    pub fn steady_entropy(&self) -> f64 {
        let w: Vec<f64> = self.steps.iter().filter(|s| s.kind == LayerKind::W).map(|s| s.entropy).collect();
        if w.is_empty() {
            return 0.0;
        }
        let k = w.len().div_ceil(4);
        w[w.len() - k..].iter().sum::<f64>() / k as f64
    }
}

/// Natural log of zero, as produced by a vanishing contraction.
pub fn log_zero() -> C64 {
    C64::new(f64::NEG_INFINITY, 0.0)
}

fn wrap_phase(x: f64) -> f64 {
    let mut t = x % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

fn record(mps: &mut Mps, kind: LayerKind, y: usize, discarded: f64) -> Result<TraceStep> {
    let n = mps.len();
    let spectrum = if n < 2 {
        vec![1.0]
    } else {
        let s = mps.spectrum_at(n / 2 - 1)?;
        let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        s.into_iter().map(|v| v / norm).collect()
    };
    Ok(TraceStep {
        kind,
        y,
        entropy: entropy_from_spectrum(&spectrum)?,
        max_bond: mps.max_bond(),
        discarded,
        spectrum,
    })
}

/// Contracts a layered network with a boundary MPS of bond dimension at most
/// `chi_max`. Returns the complex log-amplitude (`-inf` real part for an
/// exactly vanishing network) and the per-layer trace.
pub fn contract(net: &LayeredNetwork, chi_max: usize, tol: f64) -> Result<(C64, ContractionTrace)> {
    if chi_max == 0 {
        return Err(Error::Invalid("chi_max must be positive".into()));
    }
    let mut mps = Mps::product_state(&net.ket)?;
    let mut trace = ContractionTrace::default();
    for layer in &net.layers {
        match mps.apply_mpo(0, &layer.mpo, chi_max, tol) {
            Ok(disc) => trace.steps.push(record(&mut mps, layer.kind, layer.y, disc)?),
            Err(Error::ZeroProbability(_)) => {
                trace.vanished = true;
                return Ok((log_zero(), trace));
            }
            Err(e) => return Err(e),
        }
    }
    let overlap = mps.overlap_product(&net.bra)?;
    if !overlap.is_finite() {
        return Err(Error::NonFinite("boundary overlap".into()));
    }
    if overlap == ZERO {
        return Ok((log_zero(), trace));
    }
    let lz = mps.log_norm() + overlap.ln();
    Ok((C64::new(lz.re, wrap_phase(lz.im)), trace))
}

/// Homology class label: `x` counts the X-logical defect, `z` the Z one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassLabel {
    pub x: u8,
    pub z: u8,
}

impl ClassLabel {
    pub fn all(kind: ModelKind) -> Vec<ClassLabel> {
        match kind {
            ModelKind::GeneralXx => vec![
                ClassLabel { x: 0, z: 0 },
                ClassLabel { x: 0, z: 1 },
                ClassLabel { x: 1, z: 0 },
                ClassLabel { x: 1, z: 1 },
            ],
            _ => vec![ClassLabel { x: 0, z: 0 }, ClassLabel { x: 1, z: 0 }],
        }
    }

    pub fn name(&self, kind: ModelKind) -> String {
        match kind {
            ModelKind::GeneralXx => format!("{}{}", self.x, self.z),
            _ => format!("{}", self.x),
        }
    }
}

/// Bond variables for a class on top of the straight-gauge references.
pub fn class_bonds(lat: &Lattice, base: &BondConfig, label: ClassLabel) -> Result<BondConfig> {
    let mut b = base.clone();
    if label.x == 1 {
        b = insert_defect(&b, lat, DefectKind::X)?;
    }
    if label.z == 1 {
        b = insert_defect(&b, lat, DefectKind::Z)?;
    }
    Ok(b)
}

#[derive(Clone, Debug)]
pub struct ClassAmplitudes {
    pub kind: ModelKind,
    pub labels: Vec<ClassLabel>,
    pub log_z: Vec<C64>,
    pub traces: Vec<ContractionTrace>,
}

impl ClassAmplitudes {
    pub fn get(&self, label: ClassLabel) -> Option<C64> {
        self.labels.iter().position(|l| *l == label).map(|i| self.log_z[i])
    }

    /// `Z[a][b]` as plain complex numbers, zero where the class is absent.
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        let mut m = [[ZERO; 2]; 2];
        for (l, lz) in self.labels.iter().zip(&self.log_z) {
            m[l.x as usize][l.z as usize] = lz.exp();
        }
        m
    }

    /// `ln sum |Z|^2` over classes.
    pub fn log_total_weight(&self) -> f64 {
        let m = self.log_z.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m * 2.0 + self.log_z.iter().map(|z| (2.0 * (z.re - m)).exp()).sum::<f64>().ln()
    }

    /// Index of the largest-magnitude class, ties resolved by label order.
    pub fn leading(&self) -> usize {
        let mut best = 0;
        for i in 1..self.log_z.len() {
            if self.log_z[i].re > self.log_z[best].re {
                best = i;
            }
        }
        best
    }

    fn finite_check(&self) -> Result<()> {
        if self.log_z.iter().all(|z| z.re == f64::NEG_INFINITY) {
            return Err(Error::ZeroProbability(0.0));
        }
        Ok(())
    }
}

/// Contracts every class network for syndrome `s` in the straight gauge.
pub fn class_amplitudes(model: &ErrorModel, lat: &Lattice, s: &Syndrome, chi_max: usize, tol: f64) -> Result<ClassAmplitudes> {
    let (_, _, base) = straight_gauge(lat, s)?;
    class_amplitudes_with_bonds(model, lat, &base, chi_max, tol)
}

/// As [`class_amplitudes`] with explicit base bond variables.
pub fn class_amplitudes_with_bonds(
    model: &ErrorModel,
    lat: &Lattice,
    base: &BondConfig,
    chi_max: usize,
    tol: f64,
) -> Result<ClassAmplitudes> {
    let labels = ClassLabel::all(model.kind);
    let mut log_z = Vec::with_capacity(labels.len());
    let mut traces = Vec::with_capacity(labels.len());
    for &l in &labels {
        let net = build_network(model, &class_bonds(lat, base, l)?, lat)?;
        let (lz, tr) = contract(&net, chi_max, tol)?;
        log_z.push(lz);
        traces.push(tr);
    }
    let amps = ClassAmplitudes { kind: model.kind, labels, log_z, traces };
    amps.finite_check()?;
    Ok(amps)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeEnergy {
    /// `|log(Z_other / Z_leading)|`, or [`DF_SENTINEL`].
    pub modulus: f64,
    /// `Re log(Z_leading / Z_other)`, or [`DF_SENTINEL`].
    pub real: f64,
    /// Competing amplitude vanished.
    pub capped: bool,
}

impl FreeEnergy {
    fn between(leading: C64, other: C64) -> Self {
        if other.re <= MAGNITUDE_FLOOR || other.re == f64::NEG_INFINITY {
            return Self { modulus: DF_SENTINEL, real: DF_SENTINEL, capped: true };
        }
        let d = C64::new(leading.re - other.re, wrap_phase(leading.im - other.im));
        Self { modulus: d.norm().min(DF_SENTINEL), real: d.re.min(DF_SENTINEL), capped: false }
    }
}

/// `(dF_X, dF_Z)`; `dF_Z` is `None` for single-copy models.
pub fn defect_free_energies(amps: &ClassAmplitudes) -> Result<(FreeEnergy, Option<FreeEnergy>)> {
    amps.finite_check()?;
    let lead = amps.labels[amps.leading()];
    let lz = |l: ClassLabel| amps.get(l).unwrap_or_else(log_zero);
    let z0 = lz(lead);
    let fx = FreeEnergy::between(z0, lz(ClassLabel { x: 1 - lead.x, z: lead.z }));
    let fz = (amps.kind == ModelKind::GeneralXx).then(|| FreeEnergy::between(z0, lz(ClassLabel { x: lead.x, z: 1 - lead.z })));
    Ok((fx, fz))
}

/// Normalized logical coefficients of `Z^Rz X^Rx Pi_s U |init>` up to the
/// crossing sign: basis `(Psi_0, Psi_1)` for `Zero`, `(Psi_+, Psi_-)` for
/// `Plus`.
pub fn post_correction_coeffs(amps: &ClassAmplitudes, init: LogicalInit) -> Result<(C64, C64)> {
    amps.finite_check()?;
    let shift = amps.log_z.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let mut m = [[ZERO; 2]; 2];
    for (l, lz) in amps.labels.iter().zip(&amps.log_z) {
        if lz.re > f64::NEG_INFINITY {
            m[l.x as usize][l.z as usize] = (lz - shift).exp();
        }
    }
    let (c0, c1) = match init {
        LogicalInit::Zero => (m[0][0] + m[0][1], m[1][0] + m[1][1]),
        LogicalInit::Plus => (m[0][0] + m[1][0], m[0][1] - m[1][1]),
    };
    let n = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroProbability(n));
    }
    Ok((c0 / n, c1 / n))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub chosen_class: ClassLabel,
    pub df_x: FreeEnergy,
    pub df_z: Option<FreeEnergy>,
    /// `|Z_leading|^2 / sum |Z|^2`.
    pub success_prob_contrib: f64,
    pub post_coeffs: (C64, C64),
    pub steady_entropy: f64,
}

impl DecodeResult {
    /// Free energy of the single-copy models (the X defect).
    pub fn df(&self) -> FreeEnergy {
        self.df_x
    }
}

pub fn decode_amplitudes(amps: &ClassAmplitudes, init: LogicalInit) -> Result<DecodeResult> {
    let lead = amps.leading();
    let (df_x, df_z) = defect_free_energies(amps)?;
    let total = amps.log_total_weight();
    Ok(DecodeResult {
        chosen_class: amps.labels[lead],
        df_x,
        df_z,
        success_prob_contrib: (2.0 * amps.log_z[lead].re - total).exp().min(1.0),
        post_coeffs: post_correction_coeffs(amps, init)?,
        steady_entropy: amps.traces[lead].steady_entropy(),
    })
}

/// Class amplitudes and decoding outcome for one syndrome.
pub fn decode_syndrome(
    model: &ErrorModel,
    lat: &Lattice,
    s: &Syndrome,
    chi_max: usize,
    tol: f64,
    init: LogicalInit,
) -> Result<(ClassAmplitudes, DecodeResult)> {
    let amps = class_amplitudes(model, lat, s, chi_max, tol)?;
    let res = decode_amplitudes(&amps, init)?;
    Ok((amps, res))
}

/// Sample mean and standard error of the success probabilities.
pub fn fidelity_estimate(samples: &[DecodeResult]) -> Result<(f64, f64)> {
    mean_stderr(&samples.iter().map(|r| r.success_prob_contrib).collect::<Vec<_>>())
}

/// Mean and standard error of the mean (zero error for one sample).
pub fn mean_stderr(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::Invalid("no samples".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::{build_lattice, exact_class_amplitudes, exact_corrected_coeffs, exact_logical_state, exact_corrupt, exact_syndrome_distribution, crossing_sign};
    use crate::rbim::{gauge_transform, insert_defect_along, DefectPath, GaugeSite};

    fn pattern(lat: &Lattice, step: usize) -> Syndrome {
        let n = lat.num_plaquettes() + lat.num_stars();
        let bits: Vec<bool> = (0..n).map(|i| (i * step + 1).is_multiple_of(4)).collect();
        Syndrome::from_bits(lat, &bits).unwrap()
    }

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn trivial_limit() {
        let lat = build_lattice(3, 3).unwrap();
        for model in [
            ErrorModel::x_only(0.0).unwrap(),
            ErrorModel::x_xx(0.0, 0.0).unwrap(),
            ErrorModel::general(0.0, 0.0, [0.0, 0.6, 0.8]).unwrap(),
        ] {
            let s = Syndrome::trivial(&lat);
            let (amps, res) = decode_syndrome(&model, &lat, &s, 16, 0.0, LogicalInit::Plus).unwrap();
            assert!(amps.log_z[0].norm() < 1e-15);
            assert!(amps.log_z[1..].iter().all(|z| z.re == f64::NEG_INFINITY));
            assert!(res.df_x.capped && res.df_x.modulus == DF_SENTINEL);
            assert_eq!(res.success_prob_contrib, 1.0);
            assert!(amps.traces[0].steps.iter().all(|s| s.entropy == 0.0));
            assert_eq!(res.post_coeffs.1, ZERO);
        }
    }

    #[test]
    fn contraction_matches_oracle_on_small_codes() {
        let models = [
            ErrorModel::x_only(0.31).unwrap(),
            ErrorModel::x_xx(0.27, 0.19).unwrap(),
            ErrorModel::general(0.33, 0.21, [0.48, 0.6, 0.64]).unwrap(),
        ];
        for model in &models {
            for (lx, ly) in [(2, 2), (3, 2)] {
                let lat = build_lattice(lx, ly).unwrap();
                let psi = exact_corrupt(&lat, &exact_logical_state(&lat, LogicalInit::Plus).unwrap(), model).unwrap();
                let dist = exact_syndrome_distribution(&lat, &psi).unwrap();
                for (s, _) in dist.iter().take(6) {
                    let (rx, rz, _) = straight_gauge(&lat, s).unwrap();
                    let exact = exact_class_amplitudes(&lat, model, s, &rx, &rz).unwrap();
                    let amps = class_amplitudes(model, &lat, s, 1 << 12, 0.0).unwrap();
                    let got = amps.matrix();
                    let mut weight = 0.0;
                    for l in &amps.labels {
                        let (a, b) = (l.x as usize, l.z as usize);
                        weight += exact[a][b].norm_sqr();
                        assert!(rel(got[a][b], exact[a][b]) < 1e-10, "{} {} {l:?}", model.kind.name(), s.to_hex());
                    }
                    assert!((amps.log_total_weight().exp() - weight).abs() < 1e-10 * weight);
                    for init in [LogicalInit::Zero, LogicalInit::Plus] {
                        let (e0, e1) = exact_corrected_coeffs(&lat, model, init, s, &rx, &rz).unwrap();
                        let n = (e0.norm_sqr() + e1.norm_sqr()).sqrt();
                        let sc = crossing_sign(&rx, &rz);
                        let (c0, c1) = post_correction_coeffs(&amps, init).unwrap();
                        assert!((c0 * sc - e0 / n).norm() < 1e-9);
                        assert!((c1 * sc - e1 / n).norm() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn free_energy_uses_principal_log() {
        let amps = ClassAmplitudes {
            kind: ModelKind::XOnly,
            labels: ClassLabel::all(ModelKind::XOnly),
            log_z: vec![C64::new(-1.0, 3.0), C64::new(-1.5, -3.0)],
            traces: vec![ContractionTrace::default(); 2],
        };
        let (fx, fz) = defect_free_energies(&amps).unwrap();
        assert!(fz.is_none());
        let want = C64::new(0.5, 6.0 - 2.0 * PI);
        assert!((fx.modulus - want.norm()).abs() < 1e-12);
        assert!((fx.real - 0.5).abs() < 1e-12);
    }

    #[test]
    fn leading_class_tie_goes_to_first_label() {
        let amps = ClassAmplitudes {
            kind: ModelKind::GeneralXx,
            labels: ClassLabel::all(ModelKind::GeneralXx),
            log_z: vec![C64::new(-2.0, 0.0), C64::new(-1.0, 0.4), C64::new(-1.0, -0.3), C64::new(-3.0, 0.0)],
            traces: vec![ContractionTrace::default(); 4],
        };
        assert_eq!(amps.labels[amps.leading()], ClassLabel { x: 0, z: 1 });
    }

    #[test]
    fn defect_path_independence() {
        let lat = build_lattice(3, 3).unwrap();
        let model = ErrorModel::general(0.3, 0.2, [0.6, 0.0, 0.8]).unwrap();
        let s = pattern(&lat, 3);
        let (_, _, base) = straight_gauge(&lat, &s).unwrap();
        for (which, path) in [(DefectKind::X, DefectPath::Alternative), (DefectKind::Z, DefectPath::Alternative)] {
            let a = contract(&build_network(&model, &insert_defect(&base, &lat, which).unwrap(), &lat).unwrap(), 256, 0.0).unwrap().0;
            let b = contract(&build_network(&model, &insert_defect_along(&base, &lat, which, path).unwrap(), &lat).unwrap(), 256, 0.0)
                .unwrap()
                .0;
            assert!(rel(b.exp(), a.exp()) < 1e-10);
        }
    }

    #[test]
    fn gauge_invariance_of_spectra() {
        let lat = build_lattice(4, 3).unwrap();
        let model = ErrorModel::general(0.3, 0.2, [0.6, 0.0, 0.8]).unwrap();
        let s = pattern(&lat, 5);
        let (_, _, base) = straight_gauge(&lat, &s).unwrap();
        let mut g = base.clone();
        for site in [
            GaugeSite::Vertex { row: 1, col: 2 },
            GaugeSite::Plaquette { row: 0, col: 3 },
            GaugeSite::Vertex { row: 3, col: 0 },
            GaugeSite::Plaquette { row: 2, col: 1 },
        ] {
            g = gauge_transform(&g, &lat, model.kind, site).unwrap();
        }
        let (za, ta) = contract(&build_network(&model, &base, &lat).unwrap(), 256, 0.0).unwrap();
        let (zb, tb) = contract(&build_network(&model, &g, &lat).unwrap(), 256, 0.0).unwrap();
        assert!(rel(zb.exp(), za.exp()) < 1e-10);
        for (x, y) in ta.steps.iter().zip(&tb.steps) {
            for (p, q) in x.spectrum.iter().zip(&y.spectrum) {
                assert!((p - q).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn larger_chi_never_discards_more() {
        let lat = build_lattice(6, 4).unwrap();
        let model = ErrorModel::general(0.35, 0.25, [0.6, 0.0, 0.8]).unwrap();
        let s = pattern(&lat, 7);
        let (_, _, base) = straight_gauge(&lat, &s).unwrap();
        let net = build_network(&model, &base, &lat).unwrap();
        let mut last = f64::INFINITY;
        for chi in [2, 4, 8, 16, 64] {
            let (_, t) = contract(&net, chi, 0.0).unwrap();
            assert!(t.total_discarded() <= last + 1e-15);
            last = t.total_discarded();
        }
        assert!(last < 1e-20);
    }

    #[test]
    fn steady_entropy_window() {
        let step = |kind, e| TraceStep { kind, y: 1, entropy: e, max_bond: 1, discarded: 0.0, spectrum: vec![1.0] };
        let t = ContractionTrace {
            steps: vec![
                step(LayerKind::W, 1.0),
                step(LayerKind::V, 9.0),
                step(LayerKind::W, 2.0),
                step(LayerKind::V, 9.0),
                step(LayerKind::W, 3.0),
                step(LayerKind::V, 9.0),
                step(LayerKind::W, 4.0),
                step(LayerKind::V, 9.0),
                step(LayerKind::W, 5.0),
            ],
            vanished: false,
        };
        assert!((t.steady_entropy() - 4.5).abs() < 1e-15);
    }

    #[test]
    fn fidelity_of_paramagnet_is_half() {
        let r = DecodeResult {
            chosen_class: ClassLabel { x: 0, z: 0 },
            df_x: FreeEnergy { modulus: 0.0, real: 0.0, capped: false },
            df_z: None,
            success_prob_contrib: 0.5,
            post_coeffs: (ZERO, ZERO),
            steady_entropy: 0.0,
        };
        let (m, e) = fidelity_estimate(&[r.clone(), r]).unwrap();
        assert_eq!((m, e), (0.5, 0.0));
    }
}
