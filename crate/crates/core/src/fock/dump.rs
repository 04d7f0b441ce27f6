//! Plain-text state dumps.
//!
//! ```text
//! # modes: a_o a_e b_o b_e c_o c_e
//! # n_max: 2
//! (1,0,1,0,1,0)<TAB>+7.0710678118654746e-1<TAB>+0.0000000000000000e0
//! ```
//!
//! One line per stored amplitude: the occupation tuple in layout order, the
//! real part and the imaginary part, tab separated. Lines starting with `#`
//! other than the two header lines are comments. Ensemble dumps prefix each
//! component with `# component <k> weight <w>`.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;

use super::ket::{MixedEnsemble, PureKet};
use super::layout::{ModeLayout, Occupation};
use crate::error::{Error, Result};

fn write_header(out: &mut String, layout: &ModeLayout) {
    let _ = writeln!(out, "# modes: {layout}");
    let _ = writeln!(out, "# n_max: {}", layout.n_max());
}

fn write_terms(out: &mut String, ket: &PureKet) {
    let len = ket.layout().len();
    for (occ, amp) in ket.iter() {
        let _ = writeln!(out, "{}\t{:+.16e}\t{:+.16e}", occ.fmt_tuple(len), amp.re, amp.im);
    }
}

pub fn format_state_dump(ket: &PureKet) -> String {
    let mut out = String::new();
    write_header(&mut out, ket.layout());
    write_terms(&mut out, ket);
    out
}

pub fn format_ensemble_dump(ensemble: &MixedEnsemble) -> String {
    let mut out = String::new();
    write_header(&mut out, ensemble.layout());
    for (k, (w, ket)) in ensemble.components().iter().enumerate() {
        let _ = writeln!(out, "# component {k} weight {w:.16e}");
        write_terms(&mut out, ket);
    }
    out
}

type Component = (Option<f64>, Vec<(Occupation, Complex64)>);

struct Parsed {
    layout: Arc<ModeLayout>,
    // (weight, terms) per component; a plain state dump yields one component
    // with no weight.
    components: Vec<Component>,
}

fn dump_err(line: usize, message: impl Into<String>) -> Error {
    Error::StateDump {
        line,
        message: message.into(),
    }
}

fn parse(text: &str) -> Result<Parsed> {
    let mut labels: Option<Vec<String>> = None;
    let mut n_max: Option<u8> = None;
    let mut components: Vec<Component> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("modes:") {
                labels = Some(rest.split_whitespace().map(str::to_owned).collect());
            } else if let Some(rest) = comment.strip_prefix("n_max:") {
                n_max = Some(rest.trim().parse().map_err(|_| dump_err(line_no, "bad n_max"))?);
            } else if let Some(rest) = comment.strip_prefix("component") {
                let mut it = rest.split_whitespace();
                let _index = it.next();
                let weight = match (it.next(), it.next()) {
                    (Some("weight"), Some(w)) => w.parse().map_err(|_| dump_err(line_no, "bad weight"))?,
                    _ => return Err(dump_err(line_no, "expected `component <k> weight <w>`")),
                };
                components.push((Some(weight), Vec::new()));
            }
            continue;
        }
        let len = labels
            .as_ref()
            .ok_or_else(|| dump_err(line_no, "amplitude before `# modes:` header"))?
            .len();
        let mut fields = line.split('\t');
        let (tuple, re, im) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(r), Some(m), None) => (t, r, m),
            _ => return Err(dump_err(line_no, "expected three tab-separated fields")),
        };
        let inner = tuple
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| dump_err(line_no, "occupation tuple must be parenthesized"))?;
        let counts: Vec<u8> = inner
            .split(',')
            .map(|c| c.trim().parse::<u8>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| dump_err(line_no, "bad photon number"))?;
        if counts.len() != len {
            return Err(dump_err(
                line_no,
                format!("tuple has {} entries for {len} modes", counts.len()),
            ));
        }
        if counts.iter().any(|&c| c > super::layout::MAX_CUTOFF) {
            return Err(dump_err(line_no, "photon number out of range"));
        }
        let re: f64 = re.trim().parse().map_err(|_| dump_err(line_no, "bad real part"))?;
        let im: f64 = im.trim().parse().map_err(|_| dump_err(line_no, "bad imaginary part"))?;
        if components.is_empty() {
            components.push((None, Vec::new()));
        }
        components
            .last_mut()
            .expect("non-empty")
            .1
            .push((Occupation::from_counts(&counts), Complex64::new(re, im)));
    }
    let labels = labels.ok_or_else(|| dump_err(0, "missing `# modes:` header"))?;
    let n_max = n_max.ok_or_else(|| dump_err(0, "missing `# n_max:` header"))?;
    let layout = Arc::new(ModeLayout::new(&labels, n_max)?);
    Ok(Parsed { layout, components })
}

/// Reads a single-ket dump. Pair groupings are not serialized; the returned
/// layout has none.
pub fn parse_state_dump(text: &str) -> Result<PureKet> {
    let parsed = parse(text)?;
    match parsed.components.len() {
        0 => Ok(PureKet::zero(parsed.layout)),
        1 => PureKet::from_terms(parsed.layout, parsed.components.into_iter().next().unwrap().1),
        n => Err(dump_err(0, format!("expected one ket, found {n} components"))),
    }
}

pub fn parse_ensemble_dump(text: &str) -> Result<Vec<(f64, PureKet)>> {
    let parsed = parse(text)?;
    parsed
        .components
        .into_iter()
        .map(|(w, terms)| {
            let w = w.ok_or_else(|| dump_err(0, "component without weight header"))?;
            Ok((w, PureKet::from_terms(parsed.layout.clone(), terms)?))
        })
        .collect()
}
