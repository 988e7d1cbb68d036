//! Orientation signs of trivalent graphs.
//!
//! A graph is oriented by the cyclic orders at its internal vertices; the knot
//! vertices carry the orientation of the circle. A [`Labelling`] numbers the
//! vertices and propagators and directs each propagator, which fixes an
//! ordering of the integration variables and of the wedge product of
//! propagator forms. [`epsilon_sign`] compares the two.
//!
//! Conventions: vertices are labelled knot vertices first, in cycle order, then
//! internal vertices; the reference labelling directs every propagator from
//! its lower to its higher label and numbers propagators lexicographically.
//! The reference labelling of the X diagram has sign +1. Cycle edges are
//! oriented by the knot and are never part of a labelling.

use crate::diagrams::{permutation_sign, TrivalentGraph};
use crate::error::{Error, Result};

/// `(-1)^(dim_v * dim_w)`: the sign of swapping two blocks of those sizes.
pub fn det_merge_sign(dim_v: usize, dim_w: usize) -> i32 {
    if dim_v * dim_w % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sign of a permutation of `{1..k}` (or `{0..k-1}`).
pub fn odd_collection_sign(permutation: &[usize]) -> Result<i32> {
    let base = permutation.iter().copied().min().unwrap_or(0);
    if base > 1 {
        return Err(Error::Parameter("permutation must start at 0 or 1".into()));
    }
    let p: Vec<usize> = permutation.iter().map(|&x| x - base).collect();
    let mut seen = vec![false; p.len()];
    for &x in &p {
        if x >= p.len() || seen[x] {
            return Err(Error::Parameter(format!("{permutation:?} is not a permutation")));
        }
        seen[x] = true;
    }
    Ok(permutation_sign(&p))
}

/// Vertex labels, an ordering of the propagators and a direction for each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labelling {
    /// `vertex_labels[v]` is the label of vertex `v`, a permutation of `0..n`.
    pub vertex_labels: Vec<usize>,
    /// `edge_order[j]` is the propagator carrying label `j`.
    pub edge_order: Vec<usize>,
    /// `directions[j] = [s, d]`: propagator `edge_order[j]` runs from `s` to `d`.
    pub directions: Vec<[usize; 2]>,
}

impl Labelling {
    pub fn reference(g: &TrivalentGraph) -> Self {
        let n = g.n_vertices();
        let mut vertex_labels = vec![0; n];
        for (i, &v) in g.cycle().iter().chain(g.internal()).enumerate() {
            vertex_labels[v] = i;
        }
        let mut edges: Vec<(usize, usize, usize)> = g
            .edges()
            .iter()
            .enumerate()
            .map(|(i, &[u, v])| {
                let (a, b) = (vertex_labels[u], vertex_labels[v]);
                (a.min(b), a.max(b), i)
            })
            .collect();
        edges.sort_unstable();
        let edge_order = edges.iter().map(|&(_, _, i)| i).collect();
        let directions = edges
            .iter()
            .map(|&(_, _, i)| {
                let [u, v] = g.edges()[i];
                if vertex_labels[u] < vertex_labels[v] {
                    [u, v]
                } else {
                    [v, u]
                }
            })
            .collect();
        Labelling { vertex_labels, edge_order, directions }
    }

    pub fn validate(&self, g: &TrivalentGraph) -> Result<()> {
        let n = g.n_vertices();
        let m = g.edges().len();
        let incomplete = |what: &str| Err(Error::Parameter(format!("incomplete labelling: {what}")));
        if self.vertex_labels.len() != n || !is_permutation(&self.vertex_labels) {
            return incomplete("vertex labels are not a bijection");
        }
        if self.edge_order.len() != m || !is_permutation(&self.edge_order) || self.directions.len() != m {
            return incomplete("edge labels are not a bijection");
        }
        for (j, &e) in self.edge_order.iter().enumerate() {
            let [u, v] = g.edges()[e];
            let [s, d] = self.directions[j];
            if !((s, d) == (u, v) || (s, d) == (v, u)) {
                return incomplete("edge direction does not match its endpoints");
            }
        }
        Ok(())
    }

    /// Copy with the labels of vertices `a` and `b` exchanged.
    pub fn swap_vertices(&self, a: usize, b: usize) -> Self {
        let mut l = self.clone();
        l.vertex_labels.swap(a, b);
        l
    }

    /// Copy with the propagator labelled `j` reversed.
    pub fn flip_edge(&self, j: usize) -> Self {
        let mut l = self.clone();
        l.directions[j].reverse();
        l
    }

    /// Copy with propagator labels `i` and `j` exchanged.
    pub fn swap_edges(&self, i: usize, j: usize) -> Self {
        let mut l = self.clone();
        l.edge_order.swap(i, j);
        l.directions.swap(i, j);
        l
    }
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&x| x < p.len() && !std::mem::replace(&mut seen[x], true))
}

fn inversion_sign(keys: &[usize]) -> i32 {
    let mut inv = 0usize;
    for i in 0..keys.len() {
        for j in i + 1..keys.len() {
            if keys[i] > keys[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sign of the permutation taking `reference` to `seen` (both lists of the
/// same distinct items).
fn relative_sign(seen: &[usize], reference: &[usize]) -> i32 {
    let p: Vec<usize> = seen.iter().map(|x| reference.iter().position(|y| y == x).unwrap()).collect();
    permutation_sign(&p)
}

/// Sign of regrouping a half-edge sequence `(vertex, half-edge id)` by vertex
/// label, times the sign of each vertex's appearance order against its local
/// reference order.
fn regroup_sign(
    seq: &[(usize, usize)],
    labels: &[usize],
    local: impl Fn(usize) -> Option<Vec<usize>>,
) -> i32 {
    let keys: Vec<usize> = seq.iter().map(|&(v, _)| labels[v]).collect();
    let mut sign = inversion_sign(&keys);
    for v in 0..labels.len() {
        if let Some(reference) = local(v) {
            let seen: Vec<usize> = seq.iter().filter(|&&(w, _)| w == v).map(|&(_, h)| h).collect();
            sign *= relative_sign(&seen, &reference);
        }
    }
    sign
}

fn propagator_sequence(lab: &Labelling) -> Vec<(usize, usize)> {
    lab.edge_order
        .iter()
        .zip(&lab.directions)
        .flat_map(|(&e, &[s, d])| [(s, e), (d, e)])
        .collect()
}

/// Sign of the labelled frame relative to the orientation of `g`.
///
/// The product of [`epsilon_sign`] with the coefficient of the wedge of
/// propagator forms (in label order, coordinates in vertex-label order) is the
/// labelling-independent integrand of the graph.
pub fn epsilon_sign(g: &TrivalentGraph, lab: &Labelling) -> Result<i32> {
    lab.validate(g)?;
    let m = g.edges().len();
    let seq = propagator_sequence(lab);
    let s = regroup_sign(&seq, &lab.vertex_labels, |v| g.order(v).map(|o| o.to_vec()));
    let parity = if m % 2 == 0 { 1 } else { -1 };
    Ok(-parity * s)
}

/// Definition (1): `det RV` tensored with the direction line of every edge.
pub fn definition1_sign(g: &TrivalentGraph, lab: &Labelling) -> Result<i32> {
    lab.validate(g)?;
    let reference = Labelling::reference(g);
    let n = g.n_vertices();
    let mut p = vec![0; n];
    for v in 0..n {
        p[reference.vertex_labels[v]] = lab.vertex_labels[v];
    }
    let mut sign = permutation_sign(&p);
    for (j, &e) in lab.edge_order.iter().enumerate() {
        let k = reference.edge_order.iter().position(|&x| x == e).unwrap();
        if lab.directions[j] != reference.directions[k] {
            sign = -sign;
        }
    }
    Ok(sign)
}

/// Definition (2): vertex-edge pairs grouped by vertex, with the knot edges
/// included and oriented along the knot.
pub fn definition2_sign(g: &TrivalentGraph, lab: &Labelling) -> Result<i32> {
    lab.validate(g)?;
    let m = g.edges().len();
    let c = g.n_cycle();
    let mut seq = propagator_sequence(lab);
    // Cycle edge i has half-edge id m + i.
    for i in 0..c {
        seq.push((g.cycle()[i], m + i));
        seq.push((g.cycle()[(i + 1) % c], m + i));
    }
    let pos = g.cycle_positions();
    let inc = g.incidence();
    Ok(regroup_sign(&seq, &lab.vertex_labels, |v| match pos[v] {
        Some(i) => {
            let incoming = m + (i + c - 1) % c;
            let outgoing = m + i;
            if c == 1 {
                // One knot edge meets the vertex at both ends; the pair is symmetric.
                None
            } else {
                Some(vec![incoming, outgoing, inc[v][0]])
            }
        }
        None => g.order(v).map(|o| o.to_vec()),
    }))
}

/// Exact determinant of a small integer matrix (Bareiss elimination).
fn det(mut a: Vec<Vec<i128>>) -> i128 {
    let n = a.len();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            let Some(r) = (k + 1..n).find(|&r| a[r][k] != 0) else { return 0 };
            a.swap(k, r);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    if n == 0 {
        1
    } else {
        sign * a[n - 1][n - 1]
    }
}

/// Definition (3): `det RE` with `det H1` and `det H0`, evaluated through the
/// exact sequence of the graph chain complex with a spanning-tree basis.
pub fn definition3_sign(g: &TrivalentGraph, lab: &Labelling) -> Result<i32> {
    lab.validate(g)?;
    let n = g.n_vertices();
    let m = g.edges().len();
    let c = g.n_cycle();
    // All edges in a fixed order: propagators by index, then knot edges.
    let mut all: Vec<[usize; 2]> = g.edges().to_vec();
    for i in 0..c {
        all.push([g.cycle()[i], g.cycle()[(i + 1) % c]]);
    }
    let ne = all.len();
    // Spanning tree by depth-first search from the first knot vertex.
    let mut in_tree = vec![false; ne];
    let mut parent_edge: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let root = g.cycle()[0];
    seen[root] = true;
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        for (e, &[a, b]) in all.iter().enumerate() {
            let w = if a == u { b } else if b == u { a } else { continue };
            if !seen[w] {
                seen[w] = true;
                in_tree[e] = true;
                parent_edge[w] = Some(e);
                stack.push(w);
            }
        }
    }
    let depth_path = |mut v: usize| {
        let mut path = Vec::new();
        while let Some(e) = parent_edge[v] {
            path.push(e);
            let [a, b] = all[e];
            v = if a == v { b } else { a };
        }
        path
    };
    // Signed tree path from the root to v, in edge coordinates.
    let root_to = |v: usize| {
        let mut vec = vec![0i128; ne];
        let mut cur = v;
        for e in depth_path(v) {
            let [a, b] = all[e];
            let up = if a == cur { b } else { a };
            // Traversal up -> cur.
            vec[e] += if all[e] == [up, cur] { 1 } else { -1 };
            cur = up;
        }
        vec
    };
    let mut columns: Vec<Vec<i128>> = Vec::new();
    for e in 0..ne {
        if !in_tree[e] {
            let [a, b] = all[e];
            let mut h = root_to(a);
            h[e] += 1;
            for (x, y) in h.iter_mut().zip(root_to(b)) {
                *x -= y;
            }
            columns.push(h);
        }
    }
    let tree: Vec<usize> = (0..ne).filter(|&e| in_tree[e]).collect();
    for &e in &tree {
        let mut f = vec![0i128; ne];
        f[e] = 1;
        columns.push(f);
    }
    // Express columns in the labelled basis: propagator rows in label order
    // with labelled directions, knot edges after them.
    let mut row_of = vec![(0usize, 1i128); ne];
    for (j, &e) in lab.edge_order.iter().enumerate() {
        let s = if lab.directions[j] == g.edges()[e] { 1 } else { -1 };
        row_of[e] = (j, s);
    }
    for i in 0..c {
        row_of[m + i] = (m + i, 1);
    }
    let mut c1 = vec![vec![0i128; ne]; ne];
    for (col, v) in columns.iter().enumerate() {
        for (e, &x) in v.iter().enumerate() {
            let (r, s) = row_of[e];
            c1[r][col] += s * x;
        }
    }
    let s1 = det(c1).signum() as i32;
    // Boundaries of tree edges and the root class, in vertex-label order.
    let mut c0 = vec![vec![0i128; n]; n];
    for (col, &e) in tree.iter().enumerate() {
        let [a, b] = all[e];
        c0[lab.vertex_labels[b]][col] += 1;
        c0[lab.vertex_labels[a]][col] -= 1;
    }
    c0[lab.vertex_labels[root]][n - 1] = 1;
    let s0 = det(c0).signum() as i32;
    // det RE: the order of the propagator labels.
    let reference = Labelling::reference(g);
    let p: Vec<usize> = reference
        .edge_order
        .iter()
        .map(|e| lab.edge_order.iter().position(|x| x == e).unwrap())
        .collect();
    Ok(permutation_sign(&p) * s1 * s0)
}

/// All four signs (epsilon and definitions 1 to 3) of one labelling.
pub fn signs(g: &TrivalentGraph, lab: &Labelling) -> Result<[i32; 4]> {
    Ok([epsilon_sign(g, lab)?, definition1_sign(g, lab)?, definition2_sign(g, lab)?, definition3_sign(g, lab)?])
}

/// Every labelling reachable from the reference by one move: a transposition
/// of vertex labels, a reversed propagator, or a transposition of propagator
/// labels.
pub fn single_step_relabelings(g: &TrivalentGraph) -> Vec<Labelling> {
    let r = Labelling::reference(g);
    let n = g.n_vertices();
    let m = g.edges().len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            out.push(r.swap_vertices(a, b));
        }
    }
    for j in 0..m {
        out.push(r.flip_edge(j));
        for k in j + 1..m {
            out.push(r.swap_edges(j, k));
        }
    }
    out
}

/// True iff epsilon and the three orientation definitions change sign
/// together on every single-step relabelling of the reference.
pub fn orientation_equivalence(g: &TrivalentGraph) -> bool {
    let Ok(base) = signs(g, &Labelling::reference(g)) else { return false };
    single_step_relabelings(g).iter().all(|lab| match signs(g, lab) {
        Ok(s) => (0..4).all(|i| s[i] * base[i] == s[0] * base[0]),
        Err(_) => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagrams::{enumerate_trivalent_graphs, permutations};

    fn x_diagram() -> TrivalentGraph {
        TrivalentGraph::from_chord_diagram(&"2:[(0,2),(1,3)]".parse().unwrap())
    }

    fn tripod() -> TrivalentGraph {
        TrivalentGraph::new(vec![0, 1, 2], vec![3], vec![[0, 3], [1, 3], [2, 3]], [(3, [0, 1, 2])].into_iter().collect())
            .unwrap()
    }

    #[test]
    fn small_lemmas() {
        assert_eq!(det_merge_sign(2, 3), 1);
        assert_eq!(det_merge_sign(1, 1), -1);
        assert_eq!(det_merge_sign(0, 5), 1);
        assert_eq!(odd_collection_sign(&[1, 2, 3]).unwrap(), 1);
        assert_eq!(odd_collection_sign(&[2, 1, 3]).unwrap(), -1);
        assert_eq!(odd_collection_sign(&[2, 3, 1]).unwrap(), 1);
        assert!(odd_collection_sign(&[1, 1, 3]).is_err());
    }

    #[test]
    fn epsilon_anchors() {
        let x = x_diagram();
        let r = Labelling::reference(&x);
        assert_eq!(epsilon_sign(&x, &r).unwrap(), 1);
        assert_eq!(epsilon_sign(&x, &r.flip_edge(0)).unwrap(), -1);
        assert_eq!(epsilon_sign(&x, &r.swap_vertices(0, 1)).unwrap(), -1);
        let t = tripod();
        assert_eq!(epsilon_sign(&t, &Labelling::reference(&t)).unwrap(), -1);
        let mut bad = r.clone();
        bad.vertex_labels.pop();
        assert!(epsilon_sign(&x, &bad).is_err());
    }

    #[test]
    fn rotating_a_cyclic_order_fixes_all_signs() {
        let t = tripod();
        let rotated =
            TrivalentGraph::new(vec![0, 1, 2], vec![3], t.edges().to_vec(), [(3, [1, 2, 0])].into_iter().collect()).unwrap();
        let r = Labelling::reference(&t);
        assert_eq!(signs(&t, &r).unwrap(), signs(&rotated, &r).unwrap());
        let flipped = t.with_reversed_order(3);
        assert_eq!(epsilon_sign(&flipped, &r).unwrap(), -epsilon_sign(&t, &r).unwrap());
        assert_eq!(definition2_sign(&flipped, &r).unwrap(), -definition2_sign(&t, &r).unwrap());
    }

    #[test]
    fn equivalence_on_graphs_up_to_degree_three() {
        for k in 1..=3 {
            for g in enumerate_trivalent_graphs(k, 4).unwrap() {
                assert!(orientation_equivalence(&g), "{g}");
            }
        }
    }

    #[test]
    fn every_labelling_of_small_graphs_is_consistent() {
        for k in 1..=2 {
            for g in enumerate_trivalent_graphs(k, 4).unwrap() {
                let base = signs(&g, &Labelling::reference(&g)).unwrap();
                let r = Labelling::reference(&g);
                let n = g.n_vertices();
                let m = g.edges().len();
                for vp in permutations(n) {
                    for ep in permutations(m) {
                        for mask in 0..(1usize << m) {
                            let mut lab = r.clone();
                            lab.vertex_labels = vp.clone();
                            lab.edge_order = ep.iter().map(|&j| r.edge_order[j]).collect();
                            lab.directions = ep
                                .iter()
                                .enumerate()
                                .map(|(t, &j)| {
                                    let mut d = r.directions[j];
                                    if mask >> t & 1 == 1 {
                                        d.reverse();
                                    }
                                    d
                                })
                                .collect();
                            let s = signs(&g, &lab).unwrap();
                            for i in 1..4 {
                                assert_eq!(s[i] * base[i], s[0] * base[0], "{g} definition {i}");
                            }
                        }
                    }
                }
            }
        }
    }
}
