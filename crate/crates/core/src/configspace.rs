//! Combinatorics of the compactified configuration space: nested families of
//! colliding subsets (strata) and the classification of the boundary faces of
//! the space attached to a graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::diagrams::TrivalentGraph;
use crate::error::{Error, Result};

/// A stratum of the compactification of `n` labelled points, given by the
/// family of subsets that collide. Points are labelled `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StratumDescriptor {
    pub n: usize,
    pub family: Vec<BTreeSet<usize>>,
}

fn compatible(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> bool {
    a.is_disjoint(b) || a.is_subset(b) || b.is_subset(a)
}

impl StratumDescriptor {
    pub fn new(n: usize, family: Vec<BTreeSet<usize>>) -> Result<Self> {
        let mut family = family;
        family.sort();
        for (i, s) in family.iter().enumerate() {
            if s.len() < 2 || s.iter().any(|&p| p == 0 || p > n) {
                return Err(Error::Structure(format!("subset {s:?} is not a set of at least two points in 1..={n}")));
            }
            if family[..i].contains(s) {
                return Err(Error::Structure(format!("subset {s:?} repeated")));
            }
            if let Some(t) = family[..i].iter().find(|t| !compatible(s, t)) {
                return Err(Error::Structure(format!("subsets {t:?} and {s:?} overlap without nesting")));
            }
        }
        Ok(StratumDescriptor { n, family })
    }

    pub fn codimension(&self) -> usize {
        self.family.len()
    }
}

/// `3n - |fS|`.
pub fn stratum_dimension(n: usize, s: &StratumDescriptor) -> usize {
    3 * n - s.codimension()
}

/// Every nested family on `n` points with between 1 and `max_codim` subsets.
pub fn enumerate_strata(n: usize, max_codim: usize) -> Result<Vec<StratumDescriptor>> {
    if !(1..=7).contains(&n) || !(1..=4).contains(&max_codim) {
        return Err(Error::Parameter(format!("strata need 1 <= n <= 7 and 1 <= max_codim <= 4, got ({n}, {max_codim})")));
    }
    let subsets: Vec<BTreeSet<usize>> = (1u32..1 << n)
        .filter(|m| m.count_ones() >= 2)
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).map(|i| i + 1).collect())
        .collect();
    let mut out = Vec::new();
    let mut cur = Vec::new();
    grow(&subsets, 0, max_codim, &mut cur, &mut |fam| {
        out.push(StratumDescriptor { n, family: fam.to_vec() });
    });
    out.sort();
    Ok(out)
}

fn grow(
    subsets: &[BTreeSet<usize>],
    start: usize,
    left: usize,
    cur: &mut Vec<BTreeSet<usize>>,
    emit: &mut impl FnMut(&[BTreeSet<usize>]),
) {
    if left == 0 {
        return;
    }
    for i in start..subsets.len() {
        if cur.iter().all(|t| compatible(t, &subsets[i])) {
            cur.push(subsets[i].clone());
            let mut sorted = cur.clone();
            sorted.sort();
            emit(&sorted);
            grow(subsets, i + 1, left - 1, cur, emit);
            cur.pop();
        }
    }
}

/// Reserved vertex label for the point at infinity in [`classify_face`].
pub const INFINITY: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaceClass {
    PrincipalKnotPair,
    PrincipalPropagatorPair,
    PrincipalDisconnected,
    HiddenDegenerate,
    HiddenSymmetryVanishing,
    Anomalous,
    Infinity,
    Unresolved,
}

/// Classify the face where the vertices in `collapsing` come together (or,
/// when it contains [`INFINITY`], run off to infinity).
pub fn classify_face(g: &TrivalentGraph, collapsing: &BTreeSet<usize>) -> Result<FaceClass> {
    let n = g.n_vertices();
    let pos = g.cycle_positions();
    if collapsing.contains(&INFINITY) {
        let rest: Vec<usize> = collapsing.iter().copied().filter(|&v| v != INFINITY).collect();
        if rest.is_empty() || rest.iter().any(|&v| v >= n || pos[v].is_some()) {
            return Err(Error::Parameter("only a nonempty set of internal vertices can go to infinity".into()));
        }
        return Ok(FaceClass::Infinity);
    }
    if collapsing.len() < 2 || collapsing.iter().any(|&v| v >= n) {
        return Err(Error::Parameter(format!("{collapsing:?} is not a set of at least two vertices")));
    }
    let inside = |v: usize| collapsing.contains(&v);
    let internal_edges: Vec<[usize; 2]> = g.edges().iter().copied().filter(|&[u, v]| inside(u) && inside(v)).collect();
    if collapsing.len() == 2 {
        if !internal_edges.is_empty() {
            return Ok(FaceClass::PrincipalPropagatorPair);
        }
        check_contiguous(g, collapsing)?;
        let both_knot = collapsing.iter().all(|&v| pos[v].is_some());
        return Ok(if both_knot { FaceClass::PrincipalKnotPair } else { FaceClass::PrincipalDisconnected });
    }
    check_contiguous(g, collapsing)?;
    if !connected(collapsing, &internal_edges) {
        return Ok(FaceClass::HiddenDegenerate);
    }
    let external: Vec<usize> = (0..g.edges().len()).filter(|&e| inside(g.edges()[e][0]) != inside(g.edges()[e][1])).collect();
    if external.is_empty() {
        return Ok(FaceClass::Anomalous);
    }
    if collapsing.iter().all(|&v| pos[v].is_none()) && external.len() <= 3 {
        return Ok(FaceClass::HiddenDegenerate);
    }
    let inc = g.incidence();
    let ext_count = |v: usize| inc[v].iter().filter(|&&e| external.contains(&e)).count();
    for &a in collapsing.iter().filter(|&&v| pos[v].is_none()) {
        match ext_count(a) {
            1 => return Ok(FaceClass::HiddenSymmetryVanishing),
            2 => {
                let e = *inc[a].iter().find(|e| !external.contains(e)).unwrap();
                let b = g.other_end(e, a);
                if pos[b].is_none() && ext_count(b) == 0 {
                    return Ok(FaceClass::HiddenSymmetryVanishing);
                }
            }
            _ => {}
        }
    }
    Ok(FaceClass::Unresolved)
}

/// Knot vertices in `set` must form one block of consecutive cycle positions.
fn check_contiguous(g: &TrivalentGraph, set: &BTreeSet<usize>) -> Result<()> {
    let c = g.n_cycle();
    let on: Vec<bool> = g.cycle().iter().map(|v| set.contains(v)).collect();
    let starts = (0..c).filter(|&i| on[i] && !on[(i + c - 1) % c]).count();
    if starts > 1 {
        return Err(Error::Structure(format!("knot vertices of {set:?} are not contiguous along the knot")));
    }
    Ok(())
}

fn connected(set: &BTreeSet<usize>, edges: &[[usize; 2]]) -> bool {
    let Some(&first) = set.iter().next() else { return true };
    let mut seen = BTreeSet::from([first]);
    let mut stack = vec![first];
    while let Some(v) = stack.pop() {
        for &[a, b] in edges {
            let w = if a == v { b } else if b == v { a } else { continue };
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.len() == set.len()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceCensus {
    pub all_vanish: bool,
    pub counts: BTreeMap<FaceClass, usize>,
}

/// Classify every face: each vertex set whose knot vertices are contiguous,
/// and each nonempty set of internal vertices sent to infinity. The census
/// vanishes when no face with at least three vertices is Unresolved.
pub fn hidden_faces_all_vanish(g: &TrivalentGraph) -> Result<FaceCensus> {
    let n = g.n_vertices();
    if n > 16 {
        return Err(Error::Parameter(format!("face census limited to 16 vertices, got {n}")));
    }
    let mut counts = BTreeMap::new();
    let mut all_vanish = true;
    for mask in 1u32..1 << n {
        let set: BTreeSet<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        if set.len() < 2 {
            continue;
        }
        let class = match classify_face(g, &set) {
            Ok(c) => c,
            Err(Error::Structure(_)) => continue,
            Err(e) => return Err(e),
        };
        if set.len() >= 3 && class == FaceClass::Unresolved {
            all_vanish = false;
        }
        *counts.entry(class).or_insert(0) += 1;
    }
    let internal = g.internal();
    for mask in 1u32..1 << internal.len() {
        let mut set: BTreeSet<usize> = (0..internal.len()).filter(|&i| mask >> i & 1 == 1).map(|i| internal[i]).collect();
        set.insert(INFINITY);
        let class = classify_face(g, &set)?;
        *counts.entry(class).or_insert(0) += 1;
    }
    Ok(FaceCensus { all_vanish, counts })
}
