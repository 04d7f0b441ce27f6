//! The heralded GHZ source: a low-gain type-II downconverter seeding two
//! type-I crystals, a wave plate and a polarizing beam splitter on the idler
//! modes, a click at D2 and no click at D1.
//!
//! [`herald`] runs the whole chain operationally on a sparse ket; the
//! [`closed_form`] module holds the analytic results it must reproduce.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{apply_pair_unitary, exp_series, project_mode_count, MixedEnsemble, ModeLayout, ModeMatrix, PureKet};

/// Couplings, phases and heralding efficiencies of the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalParams {
    /// Effective type-II coupling γ.
    pub gamma: f64,
    /// Type-II relative phase φ₁ (rad).
    pub phi1: f64,
    /// Type-I coupling χ shared by crystals A and B.
    pub chi: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    /// Quantum efficiency of D1.
    pub eta1: f64,
    /// Quantum efficiency of D2.
    pub eta2: f64,
}

impl CrystalParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.gamma, self.phi1, self.chi, self.phi_a, self.phi_b, self.eta1, self.eta2,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("crystal parameters must be finite".into()));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParameter(format!("gamma = {} < 0", self.gamma)));
        }
        for eta in [self.eta1, self.eta2] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidEfficiency { eta, range: "[0, 1]" });
            }
        }
        Ok(())
    }

    /// φ₁ + φ_A + φ_B.
    pub fn ghz_phase(&self) -> f64 {
        self.phi1 + self.phi_a + self.phi_b
    }
}

/// Which output port of the polarizing beam splitter carries D2.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum D2Port {
    /// Output mode `d_o`; reproduces the heralded state with the sign
    /// convention `|ooo⟩ − e^{iϕ}|eee⟩`.
    #[default]
    Ordinary,
    /// Output mode `d_e`; same state with the relative sign flipped.
    Extraordinary,
}

impl D2Port {
    pub fn mode(self) -> &'static str {
        match self {
            D2Port::Ordinary => "d_o",
            D2Port::Extraordinary => "d_e",
        }
    }

    fn other_mode(self) -> &'static str {
        match self {
            D2Port::Ordinary => "d_e",
            D2Port::Extraordinary => "d_o",
        }
    }

    /// Extra relative phase between the `ooo` and `eee` branches.
    pub fn phase_offset(self) -> f64 {
        match self {
            D2Port::Ordinary => 0.0,
            D2Port::Extraordinary => PI,
        }
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Output of the type-II crystal on the modes `f_e f_o g_o g_e`:
/// (1+2γ²)^{-1/2}[|0⟩ + γ(|1f_e,1g_o⟩ + e^{iφ₁}|1f_o,1g_e⟩)].
pub fn type2_state(gamma: f64, phi1: f64, n_max: u8) -> Result<PureKet> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must be >= 0")));
    }
    let layout = Arc::new(ModeLayout::pump(n_max));
    let norm = (1.0 + 2.0 * gamma * gamma).sqrt().recip();
    let vac = PureKet::vacuum(layout.clone());
    let pair1 = PureKet::basis(layout.clone(), &[("f_e", 1), ("g_o", 1)])?;
    let pair2 = PureKet::basis(layout, &[("f_o", 1), ("g_e", 1)])?;
    vac.plus(&pair1.scaled(real(gamma)))?
        .plus(&pair2.scaled(Complex64::from_polar(gamma, phi1)))?
        .scaled(real(norm))
        .normalized()
}

/// The four single-photon conversions of the type-I crystals:
/// (pump mode, first daughter, second daughter, which phase applies).
const CONVERSIONS: [(&str, &str, &str, CrystalPhase); 4] = [
    ("f_e", "a_o", "b_o", CrystalPhase::None),
    ("f_o", "a_e", "b_e", CrystalPhase::A),
    ("g_o", "c_e", "d_e", CrystalPhase::None),
    ("g_e", "c_o", "d_o", CrystalPhase::B),
];

#[derive(Debug, Clone, Copy)]
enum CrystalPhase {
    None,
    A,
    B,
}

impl CrystalPhase {
    fn value(self, phi_a: f64, phi_b: f64) -> f64 {
        match self {
            CrystalPhase::None => 0.0,
            CrystalPhase::A => phi_a,
            CrystalPhase::B => phi_b,
        }
    }
}

/// Type-I crystals A and B in closed form: each pump photon becomes
/// cos χ |pump⟩ + e^{iφ} sin χ |daughters⟩. The result lives on
/// [`ModeLayout::full_scheme`].
///
/// The closed form is exact only when every pump mode holds at most one
/// photon and the daughter modes start empty.
pub fn apply_type1_crystals(state: &PureKet, chi: f64, phi_a: f64, phi_b: f64) -> Result<PureKet> {
    let layout = Arc::new(ModeLayout::full_scheme(state.layout().n_max()));
    let state = state.embed(layout.clone())?;
    let idx = |label: &str| layout.index(label);
    let conversions: Vec<(usize, usize, usize, Complex64)> = CONVERSIONS
        .iter()
        .map(|&(p, d1, d2, phase)| {
            Ok((
                idx(p)?,
                idx(d1)?,
                idx(d2)?,
                Complex64::from_polar(chi.sin(), phase.value(phi_a, phi_b)),
            ))
        })
        .collect::<Result<_>>()?;
    let (cos, mut out) = (chi.cos(), PureKet::zero(layout.clone()));
    for (occ, amp) in state.iter() {
        let mut branches = vec![(occ, amp)];
        for &(pump, d1, d2, converted) in &conversions {
            match occ.get(pump) {
                0 => continue,
                1 => {}
                n => {
                    return Err(Error::PumpOccupation {
                        mode: layout.label(pump).to_owned(),
                        count: n,
                    })
                }
            }
            if occ.get(d1) != 0 || occ.get(d2) != 0 {
                return Err(Error::InvalidParameter(format!(
                    "daughter modes of `{}` must start empty",
                    layout.label(pump)
                )));
            }
            branches = branches
                .into_iter()
                .flat_map(|(o, a)| [(o, a * cos), (o.with(pump, 0).with(d1, 1).with(d2, 1), a * converted)])
                .collect();
        }
        for (o, a) in branches {
            out.add(o, a);
        }
    }
    out.prune();
    Ok(out)
}

/// Type-I crystals as the operator exponential
/// exp[χ(c₁†c₂†p e^{iφ} − h.c.)] applied term by term in a Taylor series.
/// Independent of the closed form; valid for any input within the cutoff.
pub fn type1_crystals_exact(state: &PureKet, chi: f64, phi_a: f64, phi_b: f64) -> Result<PureKet> {
    let layout = Arc::new(ModeLayout::full_scheme(state.layout().n_max()));
    let state = state.embed(layout.clone())?;
    let terms: Vec<(usize, usize, usize, f64)> = CONVERSIONS
        .iter()
        .map(|&(p, d1, d2, phase)| {
            Ok((
                layout.index(p)?,
                layout.index(d1)?,
                layout.index(d2)?,
                phase.value(phi_a, phi_b),
            ))
        })
        .collect::<Result<_>>()?;
    exp_series(
        &state,
        |ket| {
            let mut acc = PureKet::zero(ket.layout().clone());
            for &(p, d1, d2, phase) in &terms {
                let up = ket.annihilate(p).create(d2)?.create(d1)?;
                let down = ket.annihilate(d1).annihilate(d2).create(p)?;
                acc = acc
                    .plus(&up.scaled(Complex64::from_polar(chi, phase)))?
                    .plus(&down.scaled(Complex64::from_polar(-chi, -phase)))?;
            }
            Ok(acc)
        },
        1e-17,
        400,
    )
}

/// Wave plate on `(c_e, c_o)`: c_e → c_o, c_o → −c_e.
pub fn wave_plate() -> ModeMatrix {
    ModeMatrix::pair(real(0.0), real(-1.0), real(1.0), real(0.0))
}

/// Polarizing beam splitter on `(d_e, d_o)`:
/// d_e → (d_e + d_o)/√2, d_o → (d_o − d_e)/√2.
pub fn polarizing_beam_splitter() -> ModeMatrix {
    let s = FRAC_1_SQRT_2;
    ModeMatrix::pair(real(s), real(-s), real(s), real(s))
}

/// Wave plate on the `c` modes followed by the beam splitter on the `d` modes.
pub fn apply_mode_optics(state: &PureKet) -> Result<PureKet> {
    let s = apply_pair_unitary(state, ("c_e", "c_o"), &wave_plate())?;
    apply_pair_unitary(&s, ("d_e", "d_o"), &polarizing_beam_splitter())
}

/// Whether the wave plate and beam splitter have already acted on a ket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpticsStage {
    Pending,
    Applied,
}

const VACUUM_TOLERANCE: f64 = 1e-12;

/// Conditions on a D2 click: exactly one photon in the monitored beam
/// splitter port, detected with efficiency `eta2`.
///
/// Returns the click probability P_Φ and the heralded ket with the `d` and
/// `g` modes removed (they must then be empty; otherwise tracing them would
/// leave a mixed state).
pub fn condition_on_d2(state: &PureKet, eta2: f64, port: D2Port, stage: OpticsStage) -> Result<(f64, PureKet)> {
    if !(0.0..=1.0).contains(&eta2) {
        return Err(Error::InvalidEfficiency {
            eta: eta2,
            range: "[0, 1]",
        });
    }
    let optics_done;
    let state = match stage {
        OpticsStage::Pending => {
            optics_done = apply_mode_optics(state)?;
            &optics_done
        }
        OpticsStage::Applied => state,
    };
    let (p_one, heralded) = project_mode_count(state, port.mode(), 1)?;
    let p_click = eta2 * p_one;
    if p_click == 0.0 {
        return Err(Error::ZeroProbability("D2 never clicks".into()));
    }
    let mut reduced = heralded;
    for mode in [port.other_mode(), "g_o", "g_e"] {
        let (p_vac, next) = project_mode_count(&reduced, mode, 0)?;
        if (p_vac - 1.0).abs() > VACUUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "unmonitored mode `{mode}` is occupied after the D2 click"
            )));
        }
        reduced = next;
    }
    Ok((p_click, reduced))
}

/// Mixture left after a D2 click and no click at D1, with its heralding
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedOutput {
    /// Components on [`ModeLayout::signal`] in the order GHZ, |1c_o⟩, |1c_e⟩;
    /// zero-weight components are omitted.
    pub state: MixedEnsemble,
    /// Probability of the D2 click.
    pub p_phi: f64,
    /// Overall heralding probability.
    pub p_rho: f64,
    /// Weight of the GHZ component.
    pub p1: f64,
    /// Weight of |1c_o⟩.
    pub p2: f64,
    /// Weight of |1c_e⟩.
    pub p3: f64,
    /// Relative phase ϕ of the GHZ component `|ooo⟩ − e^{iϕ}|eee⟩`,
    /// including the D2 port offset.
    pub ghz_phase: f64,
}

/// Conditions the D2-heralded ket on D1 *not* clicking.
///
/// D1 watches the `f` modes with efficiency `eta1`; a photon that is present
/// escapes detection with probability 1 − η₁, so each `f` occupation pattern
/// survives with weight (1 − η₁)^n and the `f` modes are traced out.
pub fn condition_on_d1_no_click(phi: &PureKet, eta1: f64, p_phi: f64, ghz_phase: f64) -> Result<HeraldedOutput> {
    if !(0.0..=1.0).contains(&eta1) {
        return Err(Error::InvalidEfficiency {
            eta: eta1,
            range: "[0, 1]",
        });
    }
    let layout = phi.layout();
    let (fe, fo) = (layout.index("f_e")?, layout.index("f_o")?);
    if let Some((occ, _)) = phi.iter().find(|(o, _)| o.get(fe) + o.get(fo) > 1) {
        return Err(Error::InvalidParameter(format!(
            "f modes carry {} photons",
            occ.get(fe) + occ.get(fo)
        )));
    }
    // (photons in f_e, photons in f_o) for the GHZ, c_o and c_e branches.
    let patterns = [(0u8, 0u8), (1, 0), (0, 1)];
    let mut branches = Vec::with_capacity(3);
    for (n_fe, n_fo) in patterns {
        let (p_e, after_e) = project_mode_count(phi, "f_e", n_fe)?;
        let (weight, ket) = if p_e == 0.0 {
            (0.0, None)
        } else {
            let (p_o, after_o) = project_mode_count(&after_e, "f_o", n_fo)?;
            let survive = (1.0 - eta1).powi(i32::from(n_fe + n_fo));
            (p_e * p_o * survive, (p_o > 0.0).then_some(after_o))
        };
        branches.push((weight, ket));
    }
    let total: f64 = branches.iter().map(|(w, _)| w).sum();
    if total == 0.0 {
        return Err(Error::ZeroProbability("D1 always clicks".into()));
    }
    let weights: Vec<f64> = branches.iter().map(|(w, _)| w / total).collect();
    let components: Vec<(f64, PureKet)> = branches
        .into_iter()
        .zip(&weights)
        .filter(|((w, _), _)| *w > 0.0)
        .filter_map(|((_, ket), &p)| ket.map(|k| (p, k)))
        .collect();
    // Renormalize after dropping empty branches so the sum is exactly one.
    let kept: f64 = components.iter().map(|(w, _)| w).sum();
    let components = components.into_iter().map(|(w, k)| (w / kept, k)).collect();
    Ok(HeraldedOutput {
        state: MixedEnsemble::new(components)?,
        p_phi,
        p_rho: p_phi * total,
        p1: weights[0],
        p2: weights[1],
        p3: weights[2],
        ghz_phase,
    })
}

/// Runs the whole source: type-II state, type-I crystals, optics, D2 click,
/// D1 no-click.
pub fn herald(params: &CrystalParams, port: D2Port, n_max: u8) -> Result<HeraldedOutput> {
    params.validate()?;
    let seed = type2_state(params.gamma, params.phi1, n_max)?;
    let converted = apply_type1_crystals(&seed, params.chi, params.phi_a, params.phi_b)?;
    let (p_phi, phi) = condition_on_d2(&converted, params.eta2, port, OpticsStage::Pending)?;
    condition_on_d1_no_click(&phi, params.eta1, p_phi, params.ghz_phase() + port.phase_offset())
}

/// Analytic heralding results.
pub mod closed_form {
    use super::*;

    /// η₂ γ² sin²χ / (1 + 2γ²)
    pub fn p_phi(params: &CrystalParams) -> f64 {
        let g2 = params.gamma * params.gamma;
        params.eta2 * g2 * params.chi.sin().powi(2) / (1.0 + 2.0 * g2)
    }

    /// `[p₁, p₂, p₃]` of the heralded mixture.
    pub fn weights(chi: f64, eta1: f64) -> [f64; 3] {
        let (s2, c2) = (chi.sin().powi(2), chi.cos().powi(2));
        let denom = 1.0 - eta1 * c2;
        let p2 = (1.0 - eta1) * c2 / (2.0 * denom);
        [s2 / denom, p2, p2]
    }

    /// P_Φ (1 − η₁ cos²χ)
    pub fn p_rho(params: &CrystalParams) -> f64 {
        p_phi(params) * (1.0 - params.eta1 * params.chi.cos().powi(2))
    }

    /// Layout of the D2-heralded state: signal modes followed by `f_e f_o`.
    pub fn heralded_layout(n_max: u8) -> ModeLayout {
        ModeLayout::new(&["a_o", "a_e", "b_o", "b_e", "c_o", "c_e", "f_e", "f_o"], n_max)
            .and_then(|l| l.with_pairs(&[("a_o", "a_e"), ("b_o", "b_e"), ("c_o", "c_e")]))
            .expect("static layout")
    }

    /// (|1a_o,1b_o,1c_o⟩ − e^{iϕ}|1a_e,1b_e,1c_e⟩)/√2
    pub fn ghz_ket(layout: Arc<ModeLayout>, phase: f64) -> Result<PureKet> {
        let ooo = PureKet::basis(layout.clone(), &[("a_o", 1), ("b_o", 1), ("c_o", 1)])?;
        let eee = PureKet::basis(layout, &[("a_e", 1), ("b_e", 1), ("c_e", 1)])?;
        ooo.plus(&eee.scaled(-Complex64::from_polar(1.0, phase)))
            .map(|k| k.scaled(real(FRAC_1_SQRT_2)))
    }

    /// The D2-heralded ket
    /// (1/√2)[cos χ(|1f_e 1c_o⟩ − e^{i(φ₁+φ_B)}|1f_o 1c_e⟩)
    ///      + sin χ(|1a_o 1b_o 1c_o⟩ − e^{i(φ₁+φ_A+φ_B)}|1a_e 1b_e 1c_e⟩)],
    /// with the sign of both `e`-branches flipped for the `d_e` port.
    pub fn phi_ket(params: &CrystalParams, port: D2Port, n_max: u8) -> Result<PureKet> {
        let layout = Arc::new(heralded_layout(n_max));
        let offset = port.phase_offset();
        let (c, s) = (params.chi.cos(), params.chi.sin());
        let fc_o = PureKet::basis(layout.clone(), &[("f_e", 1), ("c_o", 1)])?;
        let fc_e = PureKet::basis(layout.clone(), &[("f_o", 1), ("c_e", 1)])?;
        let ooo = PureKet::basis(layout.clone(), &[("a_o", 1), ("b_o", 1), ("c_o", 1)])?;
        let eee = PureKet::basis(layout, &[("a_e", 1), ("b_e", 1), ("c_e", 1)])?;
        let lost = fc_o.plus(&fc_e.scaled(-Complex64::from_polar(1.0, params.phi1 + params.phi_b + offset)))?;
        let split = ooo.plus(&eee.scaled(-Complex64::from_polar(1.0, params.ghz_phase() + offset)))?;
        lost.scaled(real(c * FRAC_1_SQRT_2))
            .plus(&split.scaled(real(s * FRAC_1_SQRT_2)))
    }

    /// The heralded mixture built directly from the analytic weights.
    pub fn heralded_ensemble(params: &CrystalParams, port: D2Port, n_max: u8) -> Result<MixedEnsemble> {
        let layout = Arc::new(ModeLayout::signal(n_max));
        let [p1, p2, p3] = weights(params.chi, params.eta1);
        let ghz = ghz_ket(layout.clone(), params.ghz_phase() + port.phase_offset())?;
        let co = PureKet::basis(layout.clone(), &[("c_o", 1)])?;
        let ce = PureKet::basis(layout, &[("c_e", 1)])?;
        MixedEnsemble::new(
            [(p1, ghz), (p2, co), (p3, ce)]
                .into_iter()
                .filter(|(w, _)| *w > 0.0)
                .collect(),
        )
    }
}

/// `true` if the two kets are equal up to a global phase, within `tol` on
/// 1 − |⟨a|b⟩|.
pub fn same_ray(a: &PureKet, b: &PureKet, tol: f64) -> Result<bool> {
    let overlap = crate::fock::inner_product(a, b)?.norm();
    Ok((1.0 - overlap).abs() <= tol && (a.norm_sqr() - 1.0).abs() <= tol && (b.norm_sqr() - 1.0).abs() <= tol)
}
