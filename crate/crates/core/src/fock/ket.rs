use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use super::layout::{ModeLayout, Occupation};
use crate::error::{Error, Result};

/// Tolerance on ‖ψ‖² for a ket to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Sparse state vector over a truncated multimode Fock basis.
///
/// Terms are kept in a `BTreeMap` so that every sum over the ket runs in a
/// fixed order; this is what makes the Monte-Carlo output bit-reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct PureKet {
    layout: Arc<ModeLayout>,
    amplitudes: BTreeMap<Occupation, Complex64>,
    prune_threshold: f64,
}

impl PureKet {
    /// The zero vector.
    pub fn zero(layout: Arc<ModeLayout>) -> Self {
        Self {
            layout,
            amplitudes: BTreeMap::new(),
            prune_threshold: 0.0,
        }
    }

    pub fn vacuum(layout: Arc<ModeLayout>) -> Self {
        let mut ket = Self::zero(layout);
        ket.amplitudes.insert(Occupation::VACUUM, Complex64::new(1.0, 0.0));
        ket
    }

    /// Fock basis state with the listed `(mode, photons)` entries and vacuum
    /// elsewhere.
    pub fn basis(layout: Arc<ModeLayout>, photons: &[(&str, u8)]) -> Result<Self> {
        let mut occ = Occupation::VACUUM;
        for &(label, n) in photons {
            let idx = layout.index(label)?;
            check_cutoff(&layout, idx, u32::from(n))?;
            occ = occ.with(idx, n);
        }
        let mut ket = Self::zero(layout);
        ket.amplitudes.insert(occ, Complex64::new(1.0, 0.0));
        Ok(ket)
    }

    /// Builds a ket from `(occupation, amplitude)` terms, summing repeats.
    pub fn from_terms<I>(layout: Arc<ModeLayout>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Occupation, Complex64)>,
    {
        let mut ket = Self::zero(layout);
        for (occ, amp) in terms {
            for mode in 0..ket.layout.len() {
                check_cutoff(&ket.layout, mode, u32::from(occ.get(mode)))?;
            }
            if (ket.layout.len()..super::layout::MAX_MODES).any(|m| occ.get(m) != 0) {
                return Err(Error::InvalidParameter(
                    "occupation addresses modes outside the layout".into(),
                ));
            }
            ket.add(occ, amp);
        }
        ket.prune();
        Ok(ket)
    }

    /// Drops every stored amplitude whose magnitude is at or below `threshold`.
    /// The default threshold 0 only removes exact zeros.
    pub fn with_prune_threshold(mut self, threshold: f64) -> Self {
        self.prune_threshold = threshold.max(0.0);
        self.prune();
        self
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold
    }

    pub(crate) fn add(&mut self, occ: Occupation, amp: Complex64) {
        *self.amplitudes.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += amp;
    }

    pub(crate) fn prune(&mut self) {
        let threshold = self.prune_threshold;
        self.amplitudes.retain(|_, a| a.norm() > threshold);
    }

    pub fn layout(&self) -> &Arc<ModeLayout> {
        &self.layout
    }

    pub fn amplitude(&self, occ: Occupation) -> Complex64 {
        self.amplitudes.get(&occ).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Occupation, Complex64)> + '_ {
        self.amplitudes.iter().map(|(o, a)| (*o, *a))
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(Complex64::norm_sqr).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn normalized(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2 == 0.0 || !n2.is_finite() {
            return Err(Error::ZeroProbability("cannot normalize a zero ket".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / n2.sqrt(), 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = Self::zero(self.layout.clone());
        out.prune_threshold = self.prune_threshold;
        for (occ, amp) in self.iter() {
            out.add(occ, amp * factor);
        }
        out.prune();
        out
    }

    pub fn plus(&self, other: &PureKet) -> Result<Self> {
        same_layout(self, other)?;
        let mut out = self.clone();
        for (occ, amp) in other.iter() {
            out.add(occ, amp);
        }
        out.prune();
        Ok(out)
    }

    /// Re-expresses the ket on a layout containing all of its modes (modes
    /// absent from this ket's layout start in vacuum).
    pub fn embed(&self, target: Arc<ModeLayout>) -> Result<Self> {
        if *target == *self.layout {
            return Ok(self.clone());
        }
        let map: Vec<usize> = self
            .layout
            .labels()
            .iter()
            .map(|l| target.index(l))
            .collect::<Result<_>>()?;
        let mut out = Self::zero(target);
        out.prune_threshold = self.prune_threshold;
        for (occ, amp) in self.iter() {
            let mut moved = Occupation::VACUUM;
            for (src, &dst) in map.iter().enumerate() {
                let n = occ.get(src);
                check_cutoff(&out.layout, dst, u32::from(n))?;
                moved = moved.with(dst, n);
            }
            out.add(moved, amp);
        }
        Ok(out)
    }

    /// a†_mode |ψ⟩. Fails if the cutoff would be exceeded.
    pub fn create(&self, mode: usize) -> Result<Self> {
        let mut out = Self::zero(self.layout.clone());
        for (occ, amp) in self.iter() {
            let n = occ.get(mode);
            check_cutoff(&self.layout, mode, u32::from(n) + 1)?;
            out.add(occ.with(mode, n + 1), amp * f64::from(n + 1).sqrt());
        }
        out.prune();
        Ok(out)
    }

    /// a_mode |ψ⟩.
    pub fn annihilate(&self, mode: usize) -> Self {
        let mut out = Self::zero(self.layout.clone());
        for (occ, amp) in self.iter() {
            let n = occ.get(mode);
            if n > 0 {
                out.add(occ.with(mode, n - 1), amp * f64::from(n).sqrt());
            }
        }
        out.prune();
        out
    }
}

pub(crate) fn check_cutoff(layout: &ModeLayout, mode: usize, count: u32) -> Result<()> {
    if count > u32::from(layout.n_max()) {
        return Err(Error::CutoffOverflow {
            mode: layout.label(mode).to_owned(),
            count,
            n_max: layout.n_max(),
        });
    }
    Ok(())
}

fn same_layout(a: &PureKet, b: &PureKet) -> Result<()> {
    if Arc::ptr_eq(&a.layout, &b.layout) || *a.layout == *b.layout {
        Ok(())
    } else {
        Err(Error::LayoutMismatch)
    }
}

/// ⟨bra|ket⟩, antilinear in the first argument.
pub fn inner_product(bra: &PureKet, ket: &PureKet) -> Result<Complex64> {
    same_layout(bra, ket)?;
    let (small, large, conj_small) = if bra.len() <= ket.len() {
        (bra, ket, true)
    } else {
        (ket, bra, false)
    };
    Ok(small
        .iter()
        .map(|(occ, a)| {
            let b = large.amplitude(occ);
            if conj_small {
                a.conj() * b
            } else {
                b.conj() * a
            }
        })
        .sum())
}

/// Projects `mode` onto photon number `n` and removes it from the layout.
///
/// Returns the branch probability relative to ‖ψ‖² and the renormalized
/// reduced ket. A zero-probability branch gives `(0, empty ket)`.
pub fn project_mode_count(state: &PureKet, mode: &str, n: u8) -> Result<(f64, PureKet)> {
    let idx = state.layout.index(mode)?;
    let reduced_layout = Arc::new(state.layout.without(idx));
    let total = state.norm_sqr();
    if total == 0.0 {
        return Err(Error::ZeroProbability("projecting a zero ket".into()));
    }
    let mut branch = PureKet::zero(reduced_layout);
    branch.prune_threshold = state.prune_threshold;
    for (occ, amp) in state.iter() {
        if occ.get(idx) == n {
            branch.add(occ.remove(idx), amp);
        }
    }
    let weight = branch.norm_sqr();
    if weight == 0.0 {
        return Ok((0.0, branch));
    }
    let probability = (weight / total).clamp(0.0, 1.0);
    let reduced = branch.scaled(Complex64::new(1.0 / weight.sqrt(), 0.0));
    Ok((probability, reduced))
}

/// Probability-weighted list of normalized pure kets on one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedEnsemble {
    components: Vec<(f64, PureKet)>,
}

impl MixedEnsemble {
    pub fn new(components: Vec<(f64, PureKet)>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidEnsemble("no components".into()))?;
        let layout = first.1.layout.clone();
        let mut total = 0.0;
        for (w, ket) in &components {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidEnsemble(format!("weight {w} is not a probability")));
            }
            if *ket.layout != *layout {
                return Err(Error::LayoutMismatch);
            }
            if !ket.is_normalized() {
                return Err(Error::InvalidEnsemble(format!(
                    "component norm² {} is not 1",
                    ket.norm_sqr()
                )));
            }
            total += w;
        }
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidEnsemble(format!("weights sum to {total}")));
        }
        Ok(Self { components })
    }

    pub fn pure(ket: PureKet) -> Result<Self> {
        Self::new(vec![(1.0, ket)])
    }

    pub fn components(&self) -> &[(f64, PureKet)] {
        &self.components
    }

    pub fn layout(&self) -> &Arc<ModeLayout> {
        self.components[0].1.layout()
    }

    /// ⟨row|ρ|col⟩.
    pub fn matrix_element(&self, row: &PureKet, col: &PureKet) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, ket) in &self.components {
            acc += inner_product(row, ket)? * inner_product(ket, col)? * *w;
        }
        Ok(acc)
    }
}
