use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::chord::ChordDiagram;
use crate::error::{Error, Result};

/// A trivalent graph based on a directed circle.
///
/// Vertex ids are `0..n`. `cycle` lists the knot vertices in the direction of
/// the knot, starting at an arbitrary base point. Each internal vertex carries a
/// cyclic order of its three incident propagators, given as edge indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct TrivalentGraph {
    cycle: Vec<usize>,
    internal: Vec<usize>,
    edges: Vec<[usize; 2]>,
    orders: BTreeMap<usize, [usize; 3]>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    cycle: Vec<usize>,
    internal: Vec<usize>,
    edges: Vec<[usize; 2]>,
    orders: BTreeMap<usize, [usize; 3]>,
}

impl TryFrom<GraphJson> for TrivalentGraph {
    type Error = Error;
    fn try_from(j: GraphJson) -> Result<Self> {
        TrivalentGraph::new(j.cycle, j.internal, j.edges, j.orders)
    }
}

impl From<TrivalentGraph> for GraphJson {
    fn from(g: TrivalentGraph) -> Self {
        GraphJson { cycle: g.cycle, internal: g.internal, edges: g.edges, orders: g.orders }
    }
}

/// Canonical comparison key: relabelled edge list and rotated vertex orders.
type Key = (Vec<[usize; 2]>, Vec<[usize; 3]>);

impl TrivalentGraph {
    pub fn new(
        cycle: Vec<usize>,
        internal: Vec<usize>,
        edges: Vec<[usize; 2]>,
        orders: BTreeMap<usize, [usize; 3]>,
    ) -> Result<Self> {
        let g = TrivalentGraph { cycle, internal, edges, orders };
        g.validate()?;
        Ok(g)
    }

    /// The degree-0 graph with no vertices.
    pub fn empty() -> Self {
        TrivalentGraph { cycle: vec![], internal: vec![], edges: vec![], orders: BTreeMap::new() }
    }

    pub fn from_chord_diagram(d: &ChordDiagram) -> Self {
        let n = 2 * d.degree();
        let edges = d.chords().iter().map(|&(a, b)| [a, b]).collect();
        TrivalentGraph { cycle: (0..n).collect(), internal: vec![], edges, orders: BTreeMap::new() }
    }

    fn validate(&self) -> Result<()> {
        let n = self.cycle.len() + self.internal.len();
        let bad = |m: String| Err(Error::Structure(m));
        let mut seen = vec![false; n];
        for &v in self.cycle.iter().chain(&self.internal) {
            if v >= n || seen[v] {
                return bad(format!("vertex ids must be a permutation of 0..{n}"));
            }
            seen[v] = true;
        }
        if self.cycle.is_empty() && !self.internal.is_empty() {
            return bad("internal vertices without a knot cycle".into());
        }
        let internal: BTreeSet<usize> = self.internal.iter().copied().collect();
        let mut inc: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, &[u, v]) in self.edges.iter().enumerate() {
            if u >= n || v >= n {
                return bad(format!("edge {i} has an endpoint out of range"));
            }
            if u == v {
                return bad(format!("edge {i} is a self-loop at vertex {u}"));
            }
            inc[u].push(i);
            inc[v].push(i);
        }
        for &v in &self.cycle {
            if inc[v].len() != 1 {
                return bad(format!("knot vertex {v} meets {} propagators", inc[v].len()));
            }
        }
        for &v in &self.internal {
            if inc[v].len() != 3 {
                return bad(format!("internal vertex {v} meets {} propagators", inc[v].len()));
            }
            let Some(ord) = self.orders.get(&v) else {
                return bad(format!("internal vertex {v} has no cyclic order"));
            };
            let mut a = *ord;
            a.sort_unstable();
            if a.to_vec() != inc[v] {
                return bad(format!("cyclic order at {v} is not its incident edge set"));
            }
        }
        if self.orders.keys().any(|v| !internal.contains(v)) {
            return bad("cyclic order given for a non-internal vertex".into());
        }
        if !self.is_connected() {
            return bad("graph is not connected".into());
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let n = self.n_vertices();
        if n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for &[u, v] in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let c = self.cycle.len();
        for i in 0..c {
            let (u, v) = (self.cycle[i], self.cycle[(i + 1) % c]);
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn cycle(&self) -> &[usize] {
        &self.cycle
    }

    pub fn internal(&self) -> &[usize] {
        &self.internal
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn orders(&self) -> &BTreeMap<usize, [usize; 3]> {
        &self.orders
    }

    pub fn order(&self, v: usize) -> Option<[usize; 3]> {
        self.orders.get(&v).copied()
    }

    pub fn n_vertices(&self) -> usize {
        self.cycle.len() + self.internal.len()
    }

    pub fn n_cycle(&self) -> usize {
        self.cycle.len()
    }

    pub fn n_internal(&self) -> usize {
        self.internal.len()
    }

    pub fn degree(&self) -> usize {
        self.n_vertices() / 2
    }

    pub fn is_knot_vertex(&self, v: usize) -> bool {
        self.cycle.contains(&v)
    }

    /// Position of each vertex on the cycle, `None` for internal vertices.
    pub fn cycle_positions(&self) -> Vec<Option<usize>> {
        let mut pos = vec![None; self.n_vertices()];
        for (i, &v) in self.cycle.iter().enumerate() {
            pos[v] = Some(i);
        }
        pos
    }

    /// Incident propagator indices per vertex, in increasing order.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n_vertices()];
        for (i, &[u, v]) in self.edges.iter().enumerate() {
            inc[u].push(i);
            inc[v].push(i);
        }
        inc
    }

    pub fn other_end(&self, e: usize, v: usize) -> usize {
        let [a, b] = self.edges[e];
        if a == v {
            b
        } else {
            a
        }
    }

    /// The chord diagram of a graph without internal vertices, points numbered
    /// by position along the cycle.
    pub fn to_chord_diagram(&self) -> Option<ChordDiagram> {
        if !self.internal.is_empty() {
            return None;
        }
        let pos = self.cycle_positions();
        let chords = self.edges.iter().map(|&[u, v]| (pos[u].unwrap(), pos[v].unwrap())).collect();
        ChordDiagram::new(chords).ok()
    }

    /// Copy with the cyclic order at internal vertex `v` reversed.
    pub fn with_reversed_order(&self, v: usize) -> Self {
        let mut g = self.clone();
        if let Some(o) = g.orders.get_mut(&v) {
            o.swap(1, 2);
        }
        g
    }

    /// Copy with vertex `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let mut orders = BTreeMap::new();
        for (&v, &o) in &self.orders {
            orders.insert(perm[v], o);
        }
        TrivalentGraph {
            cycle: self.cycle.iter().map(|&v| perm[v]).collect(),
            internal: self.internal.iter().map(|&v| perm[v]).collect(),
            edges: self.edges.iter().map(|&[u, v]| [perm[u], perm[v]]).collect(),
            orders,
        }
    }

    /// Vertex maps onto the normal-form id range: knot vertices by cycle
    /// position after rotation `r`, internal vertices permuted by `pi`.
    fn vertex_map(&self, r: usize, pi: &[usize]) -> Vec<usize> {
        let c = self.cycle.len();
        let mut map = vec![0; self.n_vertices()];
        for (j, &v) in self.cycle.iter().enumerate() {
            map[v] = (j + c - r) % c;
        }
        for (q, &v) in self.internal.iter().enumerate() {
            map[v] = c + pi[q];
        }
        map
    }

    /// All keys of the graph relabelled by `map`, one per way of numbering
    /// parallel edges.
    fn keys_under(&self, map: &[usize], with_orders: bool) -> Vec<(Key, Vec<usize>)> {
        let mut idx: Vec<(usize, [usize; 2])> = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, &[u, v])| {
                let (a, b) = (map[u], map[v]);
                (i, [a.min(b), a.max(b)])
            })
            .collect();
        idx.sort_by_key(|&(i, p)| (p, i));
        let sorted: Vec<[usize; 2]> = idx.iter().map(|&(_, p)| p).collect();
        if !with_orders {
            return vec![((sorted, Vec::new()), Vec::new())];
        }
        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut s = 0;
        for i in 1..=sorted.len() {
            if i == sorted.len() || sorted[i] != sorted[s] {
                if i - s > 1 {
                    groups.push((s, i));
                }
                s = i;
            }
        }
        let base: Vec<usize> = idx.iter().map(|&(i, _)| i).collect();
        let mut variants = vec![base];
        for &(a, b) in &groups {
            let mut next = Vec::new();
            for v in &variants {
                for p in permutations(b - a) {
                    let mut w = v.clone();
                    for (t, &pt) in p.iter().enumerate() {
                        w[a + t] = v[a + pt];
                    }
                    next.push(w);
                }
            }
            variants = next;
        }
        variants
            .into_iter()
            .map(|order_of_new| {
                // order_of_new[new index] = old edge index
                let mut new_of_old = vec![0; order_of_new.len()];
                for (ni_, &old) in order_of_new.iter().enumerate() {
                    new_of_old[old] = ni_;
                }
                let mut ords: Vec<(usize, [usize; 3])> = self
                    .orders
                    .iter()
                    .map(|(&v, o)| (map[v], rotate_min([new_of_old[o[0]], new_of_old[o[1]], new_of_old[o[2]]])))
                    .collect();
                ords.sort_unstable();
                ((sorted.clone(), ords.into_iter().map(|(_, o)| o).collect()), new_of_old)
            })
            .collect()
    }

    fn for_each_vertex_map(&self, mut f: impl FnMut(Vec<usize>)) {
        let c = self.cycle.len();
        for r in 0..c.max(1) {
            for pi in permutations(self.internal.len()) {
                f(self.vertex_map(r, &pi));
            }
        }
    }

    fn min_key(&self, with_orders: bool) -> (Key, Vec<usize>, Vec<usize>) {
        let mut best: Option<(Key, Vec<usize>, Vec<usize>)> = None;
        self.for_each_vertex_map(|map| {
            for (k, e) in self.keys_under(&map, with_orders) {
                if best.as_ref().is_none_or(|b| k < b.0) {
                    best = Some((k, map.clone(), e));
                }
            }
        });
        best.unwrap()
    }

    /// Normal form: knot vertices `0..c` in cycle order, internal vertices
    /// `c..n`, edges sorted, cyclic orders rotated to start at their least edge.
    /// Two graphs are isomorphic (preserving the knot direction and all cyclic
    /// orders) iff their canonical forms are equal.
    pub fn canonical(&self) -> Self {
        let ((edges, ords), _, _) = self.min_key(true);
        let c = self.cycle.len();
        let n = self.n_vertices();
        let orders = ords.into_iter().enumerate().map(|(q, o)| (c + q, o)).collect();
        TrivalentGraph { cycle: (0..c).collect(), internal: (c..n).collect(), edges, orders }
    }

    pub fn is_canonical(&self) -> bool {
        *self == self.canonical()
    }

    /// Canonical form of the underlying graph with cyclic orders forgotten.
    pub fn unoriented_key(&self) -> Vec<[usize; 2]> {
        self.min_key(false).0 .0
    }

    fn count_maps_to_min(&self, with_orders: bool) -> usize {
        let (best, _, _) = self.min_key(with_orders);
        let mut count = 0;
        self.for_each_vertex_map(|map| {
            if self.keys_under(&map, with_orders).iter().any(|(k, _)| *k == best) {
                count += 1;
            }
        });
        count
    }

    /// Number of vertex permutations preserving the directed cycle, the
    /// propagators and every cyclic order.
    pub fn automorphism_count(&self) -> usize {
        self.count_maps_to_min(true)
    }

    /// Number of vertex permutations preserving the directed cycle and the
    /// propagators, ignoring cyclic orders.
    pub fn unoriented_automorphism_count(&self) -> usize {
        self.count_maps_to_min(false)
    }
}

impl fmt::Display for TrivalentGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serde_json::to_string(self).map_err(|_| fmt::Error)?)
    }
}

fn rotate_min(o: [usize; 3]) -> [usize; 3] {
    let r = (0..3).min_by_key(|&i| o[i]).unwrap();
    [o[r], o[(r + 1) % 3], o[(r + 2) % 3]]
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// Sign of a permutation given as a list of images.
pub fn permutation_sign(p: &[usize]) -> i32 {
    let mut seen = vec![false; p.len()];
    let mut sign = 1;
    for i in 0..p.len() {
        if seen[i] {
            continue;
        }
        let mut len = 0;
        let mut j = i;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// All canonical trivalent graphs of degree `k` with at most `max_internal`
/// internal vertices, one per isomorphism class of oriented graphs, sorted.
pub fn enumerate_trivalent_graphs(k: usize, max_internal: usize) -> Result<Vec<TrivalentGraph>> {
    if !(1..=4).contains(&k) || max_internal > 4 {
        return Err(Error::Parameter(format!(
            "graph enumeration needs 1 <= degree <= 4 and at most 4 internal vertices, got ({k}, {max_internal})"
        )));
    }
    let mut out = BTreeSet::new();
    for i in 0..=max_internal.min(2 * k - 1) {
        let c = 2 * k - i;
        let n = c + i;
        let mut valence: Vec<usize> = (0..n).map(|v| if v < c { 1 } else { 3 }).collect();
        let mut multigraphs = Vec::new();
        multigraph_rec(&mut valence, &mut Vec::new(), &mut multigraphs);
        for edges in multigraphs {
            let mut inc = vec![Vec::new(); n];
            for (e, &[u, v]) in edges.iter().enumerate() {
                inc[u].push(e);
                inc[v].push(e);
            }
            for mask in 0..(1usize << i) {
                let orders = (0..i)
                    .map(|q| {
                        let a = &inc[c + q];
                        let o = if mask >> q & 1 == 0 { [a[0], a[1], a[2]] } else { [a[0], a[2], a[1]] };
                        (c + q, o)
                    })
                    .collect();
                if let Ok(g) = TrivalentGraph::new((0..c).collect(), (c..n).collect(), edges.clone(), orders) {
                    out.insert(g.canonical());
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

fn multigraph_rec(valence: &mut [usize], cur: &mut Vec<[usize; 2]>, out: &mut Vec<Vec<[usize; 2]>>) {
    let Some(u) = valence.iter().position(|&d| d > 0) else {
        out.push(cur.clone());
        return;
    };
    let lo = match cur.last() {
        Some(&[a, b]) if a == u => b,
        _ => u + 1,
    };
    for v in lo.max(u + 1)..valence.len() {
        if valence[v] == 0 {
            continue;
        }
        valence[u] -= 1;
        valence[v] -= 1;
        cur.push([u, v]);
        multigraph_rec(valence, cur, out);
        cur.pop();
        valence[u] += 1;
        valence[v] += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagrams::enumerate_chord_diagrams;

    pub(crate) fn tripod() -> TrivalentGraph {
        TrivalentGraph::new(
            vec![0, 1, 2],
            vec![3],
            vec![[0, 3], [1, 3], [2, 3]],
            [(3, [0, 1, 2])].into_iter().collect(),
        )
        .unwrap()
    }

    fn chord(s: &str) -> TrivalentGraph {
        TrivalentGraph::from_chord_diagram(&s.parse().unwrap())
    }

    /// Distinct labelled graphs over all n! relabellings, compared by exact
    /// structure up to rotation of the cycle list and of each cyclic order.
    fn labelled_count(g: &TrivalentGraph) -> usize {
        let n = g.n_vertices();
        let mut seen = BTreeSet::new();
        for p in permutations(n) {
            let h = g.relabel(&p);
            let c = h.cycle.len();
            let rot = (0..c).min_by_key(|&r| h.cycle[r]).unwrap_or(0);
            let cyc: Vec<usize> = (0..c).map(|j| h.cycle[(rot + j) % c]).collect();
            // Cyclic orders written as neighbour sequences; a parallel pair is
            // disambiguated by trying both numberings.
            let ident: Vec<usize> = (0..n).collect();
            let keys = h.keys_under(&ident, true);
            let best = keys.into_iter().map(|(k, _)| k).min().unwrap();
            let mut internal = h.internal.clone();
            internal.sort();
            seen.insert((cyc, internal, best));
        }
        seen.len()
    }

    #[test]
    fn automorphism_examples() {
        assert_eq!(chord("1:[(0,1)]").automorphism_count(), 2);
        assert_eq!(chord("2:[(0,2),(1,3)]").automorphism_count(), 4);
        assert_eq!(chord("2:[(0,1),(2,3)]").automorphism_count(), 2);
        assert_eq!(tripod().automorphism_count(), 3);
        assert_eq!(tripod().with_reversed_order(3).automorphism_count(), 3);
    }

    #[test]
    fn labellings_times_aut_is_factorial() {
        for k in 1..=2 {
            for g in enumerate_trivalent_graphs(k, 4).unwrap() {
                let n = g.n_vertices();
                let fact: usize = (1..=n).product();
                assert_eq!(labelled_count(&g) * g.automorphism_count(), fact, "{g}");
            }
        }
    }

    #[test]
    fn enumeration_counts() {
        let g1 = enumerate_trivalent_graphs(1, 4).unwrap();
        assert_eq!(g1.len(), 1);
        let g2 = enumerate_trivalent_graphs(2, 4).unwrap();
        let chords = g2.iter().filter(|g| g.n_internal() == 0).count();
        assert_eq!(chords, enumerate_chord_diagrams(2).unwrap().len());
        // Two orientations of the tripod are distinct oriented graphs.
        assert_eq!(g2.iter().filter(|g| g.n_internal() == 1).count(), 2);
        let g3 = enumerate_trivalent_graphs(3, 4).unwrap();
        assert_eq!(g3.iter().filter(|g| g.n_internal() == 0).count(), 5);
        for g in &g3 {
            assert!(g.is_canonical());
        }
    }

    #[test]
    fn canonical_idempotent_and_invariant_under_relabel() {
        for g in enumerate_trivalent_graphs(3, 4).unwrap() {
            let n = g.n_vertices();
            let p: Vec<usize> = (0..n).map(|v| (v * 5 + 3) % n).collect();
            let p = if permutation_is_valid(&p) { p } else { (0..n).rev().collect() };
            assert_eq!(g.relabel(&p).canonical(), g);
            assert_eq!(g.canonical().canonical(), g);
        }
    }

    fn permutation_is_valid(p: &[usize]) -> bool {
        let mut s = p.to_vec();
        s.sort();
        s == (0..p.len()).collect::<Vec<_>>()
    }

    #[test]
    fn rejects_invalid() {
        let loops = TrivalentGraph::new(vec![0, 1], vec![], vec![[0, 0], [1, 1]], BTreeMap::new());
        assert!(loops.is_err());
        let disconnected = TrivalentGraph::new(
            vec![0, 1],
            vec![2, 3],
            vec![[0, 1], [2, 3], [2, 3], [2, 3]],
            [(2, [1, 2, 3]), (3, [1, 2, 3])].into_iter().collect(),
        );
        assert!(disconnected.is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = tripod();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"cycle":[0,1,2],"internal":[3],"edges":[[0,3],[1,3],[2,3]],"orders":{"3":[0,1,2]}}"#);
        let h: TrivalentGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(h, g);
        assert!(serde_json::from_str::<TrivalentGraph>(r#"{"cycle":[0],"internal":[],"edges":[[0,0]],"orders":{}}"#).is_err());
    }

    #[test]
    fn sign_and_permutations() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutation_sign(&[1, 0, 2]), -1);
        assert_eq!(permutation_sign(&[1, 2, 0]), 1);
    }
}
