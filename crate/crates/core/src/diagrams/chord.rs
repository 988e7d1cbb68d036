use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A perfect matching on `2k` points placed in order around an oriented circle.
///
/// Chords are stored as `(a, b)` with `a < b`, sorted. The stored
/// representative need not be canonical; use [`ChordDiagram::canonical`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChordDiagram {
    chords: Vec<(usize, usize)>,
}

impl ChordDiagram {
    pub fn new(chords: Vec<(usize, usize)>) -> Result<Self> {
        let n = 2 * chords.len();
        let mut seen = vec![false; n];
        let mut out = Vec::with_capacity(chords.len());
        for (a, b) in chords {
            if a >= n || b >= n || a == b {
                return Err(Error::Structure(format!("chord ({a},{b}) out of range for {n} points")));
            }
            for p in [a, b] {
                if seen[p] {
                    return Err(Error::Structure(format!("point {p} used twice")));
                }
                seen[p] = true;
            }
            out.push((a.min(b), a.max(b)));
        }
        out.sort_unstable();
        Ok(ChordDiagram { chords: out })
    }

    pub fn empty() -> Self {
        ChordDiagram { chords: Vec::new() }
    }

    pub fn degree(&self) -> usize {
        self.chords.len()
    }

    pub fn chords(&self) -> &[(usize, usize)] {
        &self.chords
    }

    /// Partner of each point.
    pub fn partners(&self) -> Vec<usize> {
        let mut p = vec![0; 2 * self.degree()];
        for &(a, b) in &self.chords {
            p[a] = b;
            p[b] = a;
        }
        p
    }

    /// Relabel every point `p` as `(p + r) mod 2k`.
    pub fn rotate(&self, r: usize) -> Self {
        let n = 2 * self.degree();
        if n == 0 {
            return self.clone();
        }
        self.map_points(|p| (p + r) % n)
    }

    /// Mirror the circle: point `p` becomes `2k - 1 - p`.
    pub fn reverse(&self) -> Self {
        let n = 2 * self.degree();
        self.map_points(|p| n - 1 - p)
    }

    fn map_points(&self, f: impl Fn(usize) -> usize) -> Self {
        let mut chords: Vec<_> = self
            .chords
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (f(a), f(b));
                (x.min(y), x.max(y))
            })
            .collect();
        chords.sort_unstable();
        ChordDiagram { chords }
    }

    /// Lexicographically least rotation.
    pub fn canonical(&self) -> Self {
        let n = 2 * self.degree();
        (0..n.max(1)).map(|r| self.rotate(r)).min().unwrap()
    }

    pub fn is_canonical(&self) -> bool {
        *self == self.canonical()
    }

    /// Number of rotations fixing the diagram.
    pub fn rotational_symmetry(&self) -> usize {
        let n = 2 * self.degree();
        if n == 0 {
            return 1;
        }
        (0..n).filter(|&r| self.rotate(r) == *self).count()
    }
}

impl fmt::Display for ChordDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:[", self.degree())?;
        for (i, (a, b)) in self.chords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "({a},{b})")?;
        }
        write!(f, "]")
    }
}

impl FromStr for ChordDiagram {
    type Err = Error;

    /// Parses `k:[(a,b),(c,d),...]`; whitespace is ignored.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Parse(format!("expected k:[(a,b),...], got {s:?}"));
        let (k, rest) = s.split_once(':').ok_or_else(bad)?;
        let k: usize = k.parse().map_err(|_| bad())?;
        let body = rest.strip_prefix('[').and_then(|r| r.strip_suffix(']')).ok_or_else(bad)?;
        let mut chords = Vec::new();
        if !body.is_empty() {
            let inner = body.strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
            for pair in inner.split("),(") {
                let (a, b) = pair.split_once(',').ok_or_else(bad)?;
                chords.push((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?));
            }
        }
        if chords.len() != k {
            return Err(Error::Parse(format!("degree {k} but {} chords", chords.len())));
        }
        ChordDiagram::new(chords)
    }
}

/// Every perfect matching of `0..n`, in lexicographic generation order.
pub fn perfect_matchings(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(free: &mut Vec<usize>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let a = free.remove(0);
        for i in 0..free.len() {
            let b = free.remove(i);
            cur.push((a, b));
            rec(free, cur, out);
            cur.pop();
            free.insert(i, b);
        }
        free.insert(0, a);
    }
    let mut out = Vec::new();
    if n % 2 == 0 {
        rec(&mut (0..n).collect(), &mut Vec::new(), &mut out);
    }
    out
}

/// One canonical representative per rotation class of degree-`k` diagrams, sorted.
pub fn enumerate_chord_diagrams(k: usize) -> Result<Vec<ChordDiagram>> {
    if !(1..=6).contains(&k) {
        return Err(Error::Parameter(format!("chord diagram degree must be in 1..=6, got {k}")));
    }
    let set: BTreeSet<ChordDiagram> = perfect_matchings(2 * k)
        .into_iter()
        .map(|m| ChordDiagram::new(m).expect("matching").canonical())
        .collect();
    Ok(set.into_iter().collect())
}
