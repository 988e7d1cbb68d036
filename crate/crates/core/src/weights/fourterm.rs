use std::fmt;

use num::{BigRational, Zero};

use super::WeightSystem;
use crate::diagrams::{enumerate_chord_diagrams, ChordDiagram};
use crate::error::Result;

/// One 4T relation. A degree-(k-1) base diagram gets a new point `P` in gap
/// `gap` and a partner `N` placed just after or just before an endpoint of
/// base chord `chord`; the four placements carry signs `+ - - +`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FourTermInstance {
    pub base: ChordDiagram,
    pub gap: usize,
    pub chord: usize,
    pub terms: [(ChordDiagram, i32); 4],
    /// Signed sum of the weight system over `terms`; zero unless violated.
    pub residual: BigRational,
}

impl fmt::Display for FourTermInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "base {} gap {} chord {}:", self.base, self.gap, self.chord)?;
        for (d, s) in &self.terms {
            write!(f, " {}{}", if *s > 0 { '+' } else { '-' }, d)?;
        }
        write!(f, " = {}", self.residual)
    }
}

/// Every 4T instance in degree `k` (none for `k < 2`), with zero residuals.
pub fn four_term_instances(k: usize) -> Result<Vec<FourTermInstance>> {
    if k < 2 {
        enumerate_chord_diagrams(k.max(1))?;
        return Ok(Vec::new());
    }
    let n = 2 * k - 2;
    let mut out = Vec::new();
    for base in enumerate_chord_diagrams(k - 1)? {
        for gap in 0..n {
            for (ci, &(x, y)) in base.chords().iter().enumerate() {
                let terms = [(x, 1usize, 1i32), (x, 0, -1), (y, 0, -1), (y, 1, 1)].map(|(pt, side, sign)| {
                    // Token i < n is base point i, n is P, n + 1 is N.
                    let mut toks: Vec<usize> = (0..n).collect();
                    toks.insert(gap, n);
                    let idx = toks.iter().position(|&t| t == pt).unwrap();
                    toks.insert(idx + side, n + 1);
                    let mut pos = vec![0; n + 2];
                    for (i, &t) in toks.iter().enumerate() {
                        pos[t] = i;
                    }
                    let mut chords: Vec<(usize, usize)> = base.chords().iter().map(|&(a, b)| (pos[a], pos[b])).collect();
                    chords.push((pos[n], pos[n + 1]));
                    (ChordDiagram::new(chords).expect("perfect matching").canonical(), sign)
                });
                out.push(FourTermInstance { base: base.clone(), gap, chord: ci, terms, residual: BigRational::zero() });
            }
        }
    }
    Ok(out)
}

/// The 4T instances on which `w` does not sum to zero.
pub fn check_4t(w: &WeightSystem) -> Result<Vec<FourTermInstance>> {
    let mut bad = Vec::new();
    for mut inst in four_term_instances(w.degree())? {
        let mut sum = BigRational::zero();
        for (d, s) in &inst.terms {
            sum += w.value(d)? * BigRational::from_integer((*s).into());
        }
        if !sum.is_zero() {
            inst.residual = sum;
            bad.push(inst);
        }
    }
    Ok(bad)
}
