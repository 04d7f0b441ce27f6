use std::fmt;

use crate::error::{Error, Result};

/// Hard limit imposed by the packed [`Occupation`] representation.
pub const MAX_MODES: usize = 16;
/// Largest representable per-mode photon number.
pub const MAX_CUTOFF: u8 = 15;
pub const DEFAULT_N_MAX: u8 = 2;

/// Indices of the ordinary and extraordinary polarization modes of one
/// spatial mode (one homodyne detector).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolarizationPair {
    pub ordinary: usize,
    pub extraordinary: usize,
}

/// Ordered list of named modes with a per-mode photon cutoff.
///
/// The ordering is fixed at construction; every ket and every dump carries
/// its layout so that mode indices never get silently permuted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeLayout {
    labels: Vec<String>,
    pairs: Vec<PolarizationPair>,
    n_max: u8,
}

impl ModeLayout {
    pub fn new<S: AsRef<str>>(labels: &[S], n_max: u8) -> Result<Self> {
        if labels.len() > MAX_MODES {
            return Err(Error::InvalidLayout(format!(
                "{} modes exceed the limit of {MAX_MODES}",
                labels.len()
            )));
        }
        if n_max == 0 || n_max > MAX_CUTOFF {
            return Err(Error::InvalidLayout(format!("cutoff {n_max} outside 1..={MAX_CUTOFF}")));
        }
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_owned()).collect();
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() || label.chars().any(char::is_whitespace) {
                return Err(Error::InvalidLayout(format!("bad mode label `{label}`")));
            }
            if labels[..i].contains(label) {
                return Err(Error::InvalidLayout(format!("duplicate mode label `{label}`")));
            }
        }
        Ok(Self {
            labels,
            pairs: Vec::new(),
            n_max,
        })
    }

    /// Groups modes into polarization pairs given as `(ordinary, extraordinary)`.
    pub fn with_pairs(mut self, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut used = Vec::new();
        for &(o, e) in pairs {
            let pair = PolarizationPair {
                ordinary: self.index(o)?,
                extraordinary: self.index(e)?,
            };
            if pair.ordinary == pair.extraordinary {
                return Err(Error::InvalidLayout(format!("pair ({o}, {e}) repeats a mode")));
            }
            for idx in [pair.ordinary, pair.extraordinary] {
                if used.contains(&idx) {
                    return Err(Error::InvalidLayout(format!(
                        "mode `{}` belongs to two pairs",
                        self.labels[idx]
                    )));
                }
                used.push(idx);
            }
            self.pairs.push(pair);
        }
        Ok(self)
    }

    /// The six signal modes `a_o a_e b_o b_e c_o c_e`, paired per detector.
    pub fn signal(n_max: u8) -> Self {
        Self::new(&["a_o", "a_e", "b_o", "b_e", "c_o", "c_e"], n_max)
            .and_then(|l| l.with_pairs(&[("a_o", "a_e"), ("b_o", "b_e"), ("c_o", "c_e")]))
            .expect("static layout")
    }

    /// The four type-II output modes feeding the type-I crystals.
    pub fn pump(n_max: u8) -> Self {
        Self::new(&["f_e", "f_o", "g_o", "g_e"], n_max).expect("static layout")
    }

    /// Every mode of the source: signal modes, the heralding modes `d`, and
    /// the type-II modes `f`, `g`.
    pub fn full_scheme(n_max: u8) -> Self {
        Self::new(
            &[
                "a_o", "a_e", "b_o", "b_e", "c_o", "c_e", "d_o", "d_e", "f_e", "f_o", "g_o", "g_e",
            ],
            n_max,
        )
        .and_then(|l| l.with_pairs(&[("a_o", "a_e"), ("b_o", "b_e"), ("c_o", "c_e")]))
        .expect("static layout")
    }

    /// A single detector pair `o`, `e`.
    pub fn single_pair(n_max: u8) -> Self {
        Self::new(&["o", "e"], n_max)
            .and_then(|l| l.with_pairs(&[("o", "e")]))
            .expect("static layout")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_max(&self) -> u8 {
        self.n_max
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn pairs(&self) -> &[PolarizationPair] {
        &self.pairs
    }

    pub fn index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownMode(label.to_owned()))
    }

    /// Layout with one mode deleted. Pairs touching the mode are dropped.
    pub fn without(&self, index: usize) -> Self {
        let shift = |i: usize| if i > index { i - 1 } else { i };
        let mut labels = self.labels.clone();
        labels.remove(index);
        let pairs = self
            .pairs
            .iter()
            .filter(|p| p.ordinary != index && p.extraordinary != index)
            .map(|p| PolarizationPair {
                ordinary: shift(p.ordinary),
                extraordinary: shift(p.extraordinary),
            })
            .collect();
        Self {
            labels,
            pairs,
            n_max: self.n_max,
        }
    }
}

impl fmt::Display for ModeLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.labels.join(" "))
    }
}

/// Photon numbers of up to [`MAX_MODES`] modes packed four bits per mode,
/// mode 0 in the lowest nibble.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occupation(u64);

impl Occupation {
    pub const VACUUM: Occupation = Occupation(0);

    /// Panics if a count exceeds [`MAX_CUTOFF`] or more than [`MAX_MODES`]
    /// counts are given.
    pub fn from_counts(counts: &[u8]) -> Self {
        assert!(counts.len() <= MAX_MODES, "too many modes");
        counts
            .iter()
            .enumerate()
            .fold(Self::VACUUM, |acc, (i, &n)| acc.with(i, n))
    }

    #[inline]
    pub fn get(self, mode: usize) -> u8 {
        ((self.0 >> (4 * mode)) & 0xF) as u8
    }

    #[inline]
    pub fn with(self, mode: usize, n: u8) -> Self {
        assert!(n <= MAX_CUTOFF, "photon number {n} not representable");
        let shift = 4 * mode;
        Self((self.0 & !(0xF << shift)) | (u64::from(n) << shift))
    }

    pub fn total(self) -> u32 {
        (0..MAX_MODES).map(|i| u32::from(self.get(i))).sum()
    }

    pub fn counts(self, len: usize) -> Vec<u8> {
        (0..len).map(|i| self.get(i)).collect()
    }

    /// Deletes a mode, shifting the higher modes down by one slot.
    pub fn remove(self, mode: usize) -> Self {
        let low_mask = (1u64 << (4 * mode)) - 1;
        let low = self.0 & low_mask;
        let high = if mode + 1 >= MAX_MODES {
            0
        } else {
            (self.0 >> (4 * (mode + 1))) << (4 * mode)
        };
        Self(low | high)
    }

    pub fn fmt_tuple(self, len: usize) -> String {
        let parts: Vec<String> = self.counts(len).iter().map(u8::to_string).collect();
        format!("({})", parts.join(","))
    }
}
