use std::collections::BTreeMap;
use std::ops::Mul;

use num_complex::Complex64;

use super::ket::{check_cutoff, PureKet};
use super::layout::Occupation;
use crate::error::{Error, Result};

/// Tolerance on ‖U†U − 1‖_max accepted for a passive transform.
pub const UNITARY_TOLERANCE: f64 = 1e-12;

/// Small dense complex matrix acting on creation operators:
/// `a_i† → Σ_j U[j][i] a_j†`, so column `i` is the image of mode `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl ModeMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("mode matrix must be square".into()));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn pair(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Self {
            n: 2,
            data: vec![m00, m01, m10, m11],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.n + col]
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                data[c * n + r] = self.get(r, c).conj();
            }
        }
        Self { n, data }
    }

    /// max |(U†U − 1)_ij|
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = &self.adjoint() * self;
        let id = Self::identity(self.n);
        prod.data
            .iter()
            .zip(&id.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn ensure_unitary(&self) -> Result<()> {
        let deviation = self.unitarity_deviation();
        if deviation > UNITARY_TOLERANCE || !deviation.is_finite() {
            return Err(Error::NonUnitary { deviation });
        }
        Ok(())
    }
}

impl Mul for &ModeMatrix {
    type Output = ModeMatrix;

    fn mul(self, rhs: &ModeMatrix) -> ModeMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let n = self.n;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                data[r * n + c] = (0..n).map(|k| self.get(r, k) * rhs.get(k, c)).sum();
            }
        }
        ModeMatrix { n, data }
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Image of the Fock state `|counts⟩` on `u.dim()` modes under the passive
/// transform `u`, as `(local occupation, amplitude)` terms. Terms with an
/// exactly zero amplitude are dropped.
pub fn expand_photons(counts: &[u8], u: &ModeMatrix) -> Vec<(Occupation, Complex64)> {
    debug_assert_eq!(counts.len(), u.dim());
    let mut poly: BTreeMap<Occupation, Complex64> = BTreeMap::new();
    poly.insert(Occupation::VACUUM, Complex64::new(1.0, 0.0));
    let mut input_norm = 1.0;
    for (i, &n) in counts.iter().enumerate() {
        input_norm *= factorial(u32::from(n));
        for _ in 0..n {
            let mut next = BTreeMap::new();
            for (occ, c) in &poly {
                for j in 0..u.dim() {
                    let uji = u.get(j, i);
                    if uji == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let grown = occ.with(j, occ.get(j) + 1);
                    *next.entry(grown).or_insert(Complex64::new(0.0, 0.0)) += c * uji;
                }
            }
            poly = next;
        }
    }
    // (a†)^p |0⟩ = √p! |p⟩, and the input carries 1/√(Π n!).
    poly.into_iter()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(occ, c)| {
            let out_norm: f64 = (0..u.dim()).map(|j| factorial(u32::from(occ.get(j)))).product();
            (occ, c * (out_norm / input_norm).sqrt())
        })
        .collect()
}

/// Applies the passive linear transform `u` to the listed modes (by index).
pub fn apply_mode_unitary(state: &PureKet, modes: &[usize], u: &ModeMatrix) -> Result<PureKet> {
    if modes.len() != u.dim() {
        return Err(Error::InvalidParameter(format!(
            "{} modes given for a {}-mode transform",
            modes.len(),
            u.dim()
        )));
    }
    for (i, m) in modes.iter().enumerate() {
        if *m >= state.layout().len() || modes[..i].contains(m) {
            return Err(Error::InvalidParameter("bad mode list".into()));
        }
    }
    u.ensure_unitary()?;
    let layout = state.layout().clone();
    let mut out = PureKet::zero(layout.clone()).with_prune_threshold(state.prune_threshold());
    let mut counts = vec![0u8; modes.len()];
    for (occ, amp) in state.iter() {
        for (slot, &m) in counts.iter_mut().zip(modes) {
            *slot = occ.get(m);
        }
        for (local, c) in expand_photons(&counts, u) {
            let mut target = occ;
            for (k, &m) in modes.iter().enumerate() {
                let n = local.get(k);
                check_cutoff(&layout, m, u32::from(n))?;
                target = target.with(m, n);
            }
            out.add(target, amp * c);
        }
    }
    out.prune();
    Ok(out)
}

/// Applies a 2×2 passive transform to the named pair `(first, second)`.
pub fn apply_pair_unitary(state: &PureKet, pair: (&str, &str), u: &ModeMatrix) -> Result<PureKet> {
    if u.dim() != 2 {
        return Err(Error::InvalidParameter("pair transform must be 2x2".into()));
    }
    let layout = state.layout();
    let modes = [layout.index(pair.0)?, layout.index(pair.1)?];
    apply_mode_unitary(state, &modes, u)
}

/// exp(G)|ψ⟩ by its Taylor series, for a linear map `G` supplied as a closure.
///
/// Stops once a term's norm falls below `tol`; fails after `max_terms`.
pub fn exp_series<G>(state: &PureKet, mut generator: G, tol: f64, max_terms: usize) -> Result<PureKet>
where
    G: FnMut(&PureKet) -> Result<PureKet>,
{
    let mut sum = state.clone();
    let mut term = state.clone();
    for k in 1..=max_terms {
        term = generator(&term)?.scaled(Complex64::new(1.0 / k as f64, 0.0));
        if term.is_empty() {
            return Ok(sum);
        }
        sum = sum.plus(&term)?;
        if term.norm_sqr().sqrt() < tol {
            return Ok(sum);
        }
    }
    Err(Error::QuadratureNonConvergence {
        context: "operator exponential series".into(),
        error: term.norm_sqr().sqrt(),
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{inner_product, ModeLayout};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_unitary(a: f64, b: f64, phi: f64, chi: f64, delta: f64) -> ModeMatrix {
        // General U(2): e^{iδ} [[e^{iφ}cos a, e^{iχ} sin a], [−e^{−iχ} sin a, e^{−iφ} cos a]] with
        // an extra phase b on the second column.
        let g = Complex64::from_polar(1.0, delta);
        let col = Complex64::from_polar(1.0, b);
        ModeMatrix::pair(
            g * Complex64::from_polar(a.cos(), phi),
            g * Complex64::from_polar(a.sin(), chi) * col,
            -g * Complex64::from_polar(a.sin(), -chi),
            g * Complex64::from_polar(a.cos(), -phi) * col,
        )
    }

    fn pair_layout() -> Arc<ModeLayout> {
        Arc::new(ModeLayout::new(&["x", "y", "z"], 3).unwrap())
    }

    #[test]
    fn single_photon_maps_to_matrix_column() {
        let l = pair_layout();
        let u = ModeMatrix::pair(c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let x = PureKet::basis(l.clone(), &[("x", 1)]).unwrap();
        let out = apply_pair_unitary(&x, ("x", "y"), &u).unwrap();
        assert_eq!(out, PureKet::basis(l.clone(), &[("y", 1)]).unwrap());
        let y = PureKet::basis(l.clone(), &[("y", 1)]).unwrap();
        let out = apply_pair_unitary(&y, ("x", "y"), &u).unwrap();
        assert_eq!(out, PureKet::basis(l, &[("x", 1)]).unwrap().scaled(c(-1.0, 0.0)));
    }

    #[test]
    fn hong_ou_mandel_bunching() {
        let l = pair_layout();
        let s = FRAC_1_SQRT_2;
        let bs = ModeMatrix::pair(c(s, 0.0), c(-s, 0.0), c(s, 0.0), c(s, 0.0));
        let both = PureKet::basis(l.clone(), &[("x", 1), ("y", 1)]).unwrap();
        let out = apply_pair_unitary(&both, ("x", "y"), &bs).unwrap();
        assert!(out.amplitude(Occupation::from_counts(&[1, 1])).norm() < 1e-15);
        assert!((out.amplitude(Occupation::from_counts(&[2, 0])).norm_sqr() - 0.5).abs() < 1e-15);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_unitary_and_overflow_are_rejected() {
        let l = Arc::new(ModeLayout::new(&["x", "y"], 1).unwrap());
        let bad = ModeMatrix::pair(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let k = PureKet::basis(l.clone(), &[("x", 1), ("y", 1)]).unwrap();
        assert!(matches!(
            apply_pair_unitary(&k, ("x", "y"), &bad),
            Err(Error::NonUnitary { .. })
        ));
        let s = FRAC_1_SQRT_2;
        let bs = ModeMatrix::pair(c(s, 0.0), c(-s, 0.0), c(s, 0.0), c(s, 0.0));
        assert!(matches!(
            apply_pair_unitary(&k, ("x", "y"), &bs),
            Err(Error::CutoffOverflow { .. })
        ));
    }

    #[test]
    fn exp_series_rotates_a_photon_between_two_modes() {
        let l = Arc::new(ModeLayout::new(&["x", "y"], 2).unwrap());
        let x = PureKet::basis(l.clone(), &[("x", 1)]).unwrap();
        let theta = 0.7;
        // G = θ (a_y† a_x − a_x† a_y)
        let out = exp_series(
            &x,
            |k| {
                let fwd = k.annihilate(0).create(1)?;
                let back = k.annihilate(1).create(0)?;
                Ok(fwd.plus(&back.scaled(c(-1.0, 0.0)))?.scaled(c(theta, 0.0)))
            },
            1e-17,
            200,
        )
        .unwrap();
        let expect = PureKet::from_terms(
            l,
            [
                (Occupation::from_counts(&[1, 0]), c(theta.cos(), 0.0)),
                (Occupation::from_counts(&[0, 1]), c(theta.sin(), 0.0)),
            ],
        )
        .unwrap();
        assert!((inner_product(&expect, &out).unwrap().re - 1.0).abs() < 1e-14);
    }

    fn arb_ket() -> impl Strategy<Value = PureKet> {
        proptest::collection::vec((0u8..=1, 0u8..=1, 0u8..=1, -1.0f64..1.0, -1.0f64..1.0), 1..6).prop_filter_map(
            "nonzero",
            |terms| {
                let ket = PureKet::from_terms(
                    pair_layout(),
                    terms
                        .into_iter()
                        .map(|(x, y, z, re, im)| (Occupation::from_counts(&[x, y, z]), c(re, im))),
                )
                .ok()?;
                ket.normalized().ok()
            },
        )
    }

    fn arb_unitary() -> impl Strategy<Value = ModeMatrix> {
        (0.0..3.2f64, 0.0..6.3f64, 0.0..6.3f64, 0.0..6.3f64, 0.0..6.3f64)
            .prop_map(|(a, b, p, q, d)| random_unitary(a, b, p, q, d))
    }

    fn photon_number(k: &PureKet) -> f64 {
        k.iter().map(|(o, a)| f64::from(o.total()) * a.norm_sqr()).sum()
    }

    proptest! {
        #[test]
        fn pair_unitary_preserves_norm_and_photon_number(k in arb_ket(), u in arb_unitary()) {
            let out = apply_pair_unitary(&k, ("x", "y"), &u).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert!((photon_number(&out) - photon_number(&k)).abs() < 1e-12);
            // Passive transforms never mix different total photon numbers.
            for (occ, _) in out.iter() {
                let n = occ.total();
                prop_assert!(k.iter().any(|(o, _)| o.total() == n));
            }
        }

        #[test]
        fn pair_unitary_composes(k in arb_ket(), u1 in arb_unitary(), u2 in arb_unitary()) {
            let seq = apply_pair_unitary(&apply_pair_unitary(&k, ("x", "y"), &u1).unwrap(), ("x", "y"), &u2).unwrap();
            let joint = apply_pair_unitary(&k, ("x", "y"), &(&u2 * &u1)).unwrap();
            for (occ, a) in seq.iter().chain(joint.iter()) {
                prop_assert!((seq.amplitude(occ) - joint.amplitude(occ)).norm() < 1e-12, "{occ:?} {a}");
            }
        }

        #[test]
        fn identity_is_a_no_op(k in arb_ket()) {
            let out = apply_pair_unitary(&k, ("y", "z"), &ModeMatrix::identity(2)).unwrap();
            prop_assert_eq!(out, k);
        }
    }
}
