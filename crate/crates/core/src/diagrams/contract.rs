use std::collections::BTreeMap;

use super::graph::TrivalentGraph;
use crate::error::{Error, Result};

/// An edge of a graph based on a circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRef {
    /// Propagator by index into [`TrivalentGraph::edges`].
    Propagator(usize),
    /// The knot segment from `cycle[p]` to `cycle[p + 1]`.
    CycleSegment(usize),
}

/// The vertex produced by contracting one edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Merge {
    /// A knot vertex carrying two propagators; `legs[0]` is met first along the knot
    /// in the T resolution.
    Knot { vertex: usize, legs: [usize; 2] },
    /// An internal vertex of valence four; `legs` in cyclic order.
    Internal { vertex: usize, legs: [usize; 4] },
}

/// A graph with one contracted edge: all vertices trivalent (or on the knot
/// with one propagator) except the merged vertex, which is listed in `cycle`
/// for a knot merge and in neither list for an internal merge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contracted {
    pub cycle: Vec<usize>,
    pub internal: Vec<usize>,
    pub edges: Vec<[usize; 2]>,
    pub orders: BTreeMap<usize, [usize; 3]>,
    pub merge: Merge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ResolutionKind {
    S,
    T,
    U,
    I,
    H,
    X,
}

impl ResolutionKind {
    /// Coefficient in the relation `S - T + U = 0` or `I - H + X = 0`.
    pub fn coefficient(self) -> i32 {
        match self {
            ResolutionKind::S | ResolutionKind::U | ResolutionKind::I | ResolutionKind::X => 1,
            ResolutionKind::T | ResolutionKind::H => -1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Resolution {
    pub kind: ResolutionKind,
    /// 0: the merged vertex keeps its id in the first role; 1: the ids of the
    /// two new vertices are swapped.
    pub labelling: usize,
    pub graph: TrivalentGraph,
}

fn rotate_to(o: [usize; 3], e: usize) -> [usize; 3] {
    let r = o.iter().position(|&x| x == e).expect("edge in order");
    [o[r], o[(r + 1) % 3], o[(r + 2) % 3]]
}

fn renumber(v: usize, removed: usize) -> usize {
    if v > removed {
        v - 1
    } else {
        v
    }
}

/// Contract a propagator or a knot segment. The merged vertex keeps the id of
/// the knot endpoint (or of the first endpoint); the other endpoint is removed
/// and higher ids shift down by one.
pub fn contract_edge(g: &TrivalentGraph, e: EdgeRef) -> Result<Contracted> {
    let pos = g.cycle_positions();
    let inc = g.incidence();
    let (keep, drop, removed_edge, merge_legs): (usize, usize, Option<usize>, Vec<usize>) = match e {
        EdgeRef::Propagator(i) => {
            let &[u, v] = g.edges().get(i).ok_or_else(|| Error::Parameter(format!("no propagator {i}")))?;
            let parallel = g.edges().iter().enumerate().any(|(j, &[a, b])| j != i && ((a, b) == (u, v) || (a, b) == (v, u)));
            if parallel {
                return Err(Error::Structure(format!("contracting propagator {i} leaves a self-loop")));
            }
            match (pos[u].is_some(), pos[v].is_some()) {
                (true, true) => {
                    return Err(Error::Structure(format!("propagator {i} joins two knot points; contracting it pinches the knot")))
                }
                (true, false) | (false, true) => {
                    let (b, w) = if pos[u].is_some() { (u, v) } else { (v, u) };
                    let o = rotate_to(g.order(w).unwrap(), i);
                    (b, w, Some(i), vec![o[1], o[2]])
                }
                (false, false) => {
                    let ou = rotate_to(g.order(u).unwrap(), i);
                    let ov = rotate_to(g.order(v).unwrap(), i);
                    (u, v, Some(i), vec![ou[1], ou[2], ov[1], ov[2]])
                }
            }
        }
        EdgeRef::CycleSegment(p) => {
            let c = g.n_cycle();
            if p >= c {
                return Err(Error::Parameter(format!("no knot segment {p}")));
            }
            if c == 1 {
                return Err(Error::Structure("the only knot segment is a self-loop".into()));
            }
            let (b1, b2) = (g.cycle()[p], g.cycle()[(p + 1) % c]);
            let (e1, e2) = (inc[b1][0], inc[b2][0]);
            if e1 == e2 {
                return Err(Error::Structure(format!("segment {p} is spanned by a chord; contracting it pinches the knot")));
            }
            (b1, b2, None, vec![e1, e2])
        }
    };
    let emap = |x: usize| match removed_edge {
        Some(r) if x > r => x - 1,
        _ => x,
    };
    let vmap = |v: usize| renumber(if v == drop { keep } else { v }, drop);
    let edges: Vec<[usize; 2]> = g
        .edges()
        .iter()
        .enumerate()
        .filter(|&(j, _)| Some(j) != removed_edge)
        .map(|(_, &[a, b])| [vmap(a), vmap(b)])
        .collect();
    let mut orders = BTreeMap::new();
    for (&v, o) in g.orders() {
        if v != keep && v != drop {
            orders.insert(vmap(v), [emap(o[0]), emap(o[1]), emap(o[2])]);
        }
    }
    let cycle: Vec<usize> = g.cycle().iter().filter(|&&v| v != drop).map(|&v| vmap(v)).collect();
    let internal: Vec<usize> = g.internal().iter().filter(|&&v| v != drop).map(|&v| vmap(v)).collect();
    let vertex = vmap(keep);
    let legs: Vec<usize> = merge_legs.into_iter().map(emap).collect();
    let merge = if pos[keep].is_some() {
        Merge::Knot { vertex, legs: [legs[0], legs[1]] }
    } else {
        Merge::Internal { vertex, legs: [legs[0], legs[1], legs[2], legs[3]] }
    };
    let internal = internal.into_iter().filter(|&v| v != vertex).collect();
    Ok(Contracted { cycle, internal, edges, orders, merge })
}

fn reattach(edges: &mut [[usize; 2]], leg: usize, from: usize, to: usize) {
    let e = &mut edges[leg];
    if e[0] == from {
        e[0] = to;
    } else {
        debug_assert_eq!(e[1], from);
        e[1] = to;
    }
}

/// The six labelled graphs contracting to `c`: the relation triple (S, T, U)
/// for a knot merge or (I, H, X) for an internal merge, each in two labellings.
pub fn uncontract_partners(c: &Contracted) -> Result<Vec<Resolution>> {
    let merged_internal = usize::from(matches!(c.merge, Merge::Internal { .. }));
    let fresh = c.cycle.len() + c.internal.len() + merged_internal;
    let mut out = Vec::with_capacity(6);
    for labelling in 0..2 {
        match c.merge {
            Merge::Knot { vertex: m, legs: [x, y] } => {
                let (a, b) = if labelling == 0 { (m, fresh) } else { (fresh, m) };
                let p = c.cycle.iter().position(|&v| v == m).expect("merge on cycle");
                // S: knot vertex a, internal vertex b with order (new, x, y).
                {
                    let mut edges = c.edges.clone();
                    reattach(&mut edges, x, m, b);
                    reattach(&mut edges, y, m, b);
                    let ne = edges.len();
                    edges.push([a, b]);
                    let mut cycle = c.cycle.clone();
                    cycle[p] = a;
                    let mut internal = c.internal.clone();
                    internal.push(b);
                    let mut orders = c.orders.clone();
                    orders.insert(b, [ne, x, y]);
                    let graph = TrivalentGraph::new(cycle, internal, edges, orders)?;
                    out.push(Resolution { kind: ResolutionKind::S, labelling, graph });
                }
                for (kind, first, second) in [(ResolutionKind::T, x, y), (ResolutionKind::U, y, x)] {
                    let mut edges = c.edges.clone();
                    reattach(&mut edges, first, m, a);
                    reattach(&mut edges, second, m, b);
                    let mut cycle = c.cycle.clone();
                    cycle[p] = a;
                    cycle.insert(p + 1, b);
                    let graph = TrivalentGraph::new(cycle, c.internal.clone(), edges, c.orders.clone())?;
                    out.push(Resolution { kind, labelling, graph });
                }
            }
            Merge::Internal { vertex: m, legs: [la, lb, lc, ld] } => {
                let (v1, v2) = if labelling == 0 { (m, fresh) } else { (fresh, m) };
                let specs = [
                    (ResolutionKind::I, [la, lb], [lc, ld]),
                    (ResolutionKind::H, [ld, la], [lb, lc]),
                    (ResolutionKind::X, [lc, la], [lb, ld]),
                ];
                for (kind, s1, s2) in specs {
                    let mut edges = c.edges.clone();
                    for &l in &s1 {
                        reattach(&mut edges, l, m, v1);
                    }
                    for &l in &s2 {
                        reattach(&mut edges, l, m, v2);
                    }
                    let ne = edges.len();
                    edges.push([v1, v2]);
                    let mut internal = c.internal.clone();
                    internal.push(v1);
                    internal.push(v2);
                    let mut orders = c.orders.clone();
                    orders.insert(v1, [s1[0], s1[1], ne]);
                    orders.insert(v2, [ne, s2[0], s2[1]]);
                    let graph = TrivalentGraph::new(c.cycle.clone(), internal, edges, orders)?;
                    out.push(Resolution { kind, labelling, graph });
                }
            }
        }
    }
    out.sort_by_key(|r| (r.kind, r.labelling));
    Ok(out)
}

/// Labelling-0 members of the relation triple, in relation order.
pub(crate) fn relation_triple(c: &Contracted) -> Result<Vec<Resolution>> {
    Ok(uncontract_partners(c)?.into_iter().filter(|r| r.labelling == 0).collect())
}
