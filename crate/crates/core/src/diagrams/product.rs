use std::collections::BTreeMap;

use num::{BigRational, Zero};

use super::graph::TrivalentGraph;

/// Formal rational combination of canonical graphs. Zero terms are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraphSum {
    terms: BTreeMap<TrivalentGraph, BigRational>,
}

impl GraphSum {
    pub fn new() -> Self {
        GraphSum::default()
    }

    pub fn single(g: &TrivalentGraph) -> Self {
        let mut s = GraphSum::new();
        s.add(g, BigRational::from_integer(1.into()));
        s
    }

    /// Add `coeff * g`, canonicalizing `g` first.
    pub fn add(&mut self, g: &TrivalentGraph, coeff: BigRational) {
        let key = g.canonical();
        let entry = self.terms.entry(key.clone()).or_insert_with(BigRational::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add_sum(&mut self, other: &GraphSum, scale: &BigRational) {
        for (g, c) in &other.terms {
            self.add(g, c * scale);
        }
    }

    pub fn coefficient(&self, g: &TrivalentGraph) -> BigRational {
        self.terms.get(&g.canonical()).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TrivalentGraph, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Bilinear extension of [`graph_product`].
    pub fn product(&self, other: &GraphSum) -> GraphSum {
        let mut out = GraphSum::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_sum(&graph_product(a, b), &(ca * cb));
            }
        }
        out
    }
}

/// Sum over every interleaving of the two knot-vertex sequences (read from
/// each graph's base point) that keeps both orders; each shuffle counts once.
pub fn graph_product(g1: &TrivalentGraph, g2: &TrivalentGraph) -> GraphSum {
    let (p, q) = (g1.n_cycle(), g2.n_cycle());
    let n1 = g1.n_vertices();
    let shift = |v: usize| v + n1;
    let m1 = g1.edges().len();
    let mut edges: Vec<[usize; 2]> = g1.edges().to_vec();
    edges.extend(g2.edges().iter().map(|&[u, v]| [shift(u), shift(v)]));
    let mut orders = g1.orders().clone();
    for (&v, o) in g2.orders() {
        orders.insert(shift(v), [o[0] + m1, o[1] + m1, o[2] + m1]);
    }
    let mut internal = g1.internal().to_vec();
    internal.extend(g2.internal().iter().map(|&v| shift(v)));
    let mut out = GraphSum::new();
    for mask in 0u64..(1u64 << (p + q)) {
        if mask.count_ones() as usize != p {
            continue;
        }
        let (mut i, mut j) = (0, 0);
        let cycle: Vec<usize> = (0..p + q)
            .map(|t| {
                if mask >> t & 1 == 1 {
                    i += 1;
                    g1.cycle()[i - 1]
                } else {
                    j += 1;
                    shift(g2.cycle()[j - 1])
                }
            })
            .collect();
        let g = TrivalentGraph::new(cycle, internal.clone(), edges.clone(), orders.clone())
            .expect("shuffle of valid graphs is valid");
        out.add(&g, BigRational::from_integer(1.into()));
    }
    out
}

/// A graph is split (a connected sum) when some proper arc of knot vertices,
/// together with everything attached to it through propagators, meets the rest
/// of the graph only along the knot.
pub fn is_split(g: &TrivalentGraph) -> bool {
    let n = g.n_vertices();
    let c = g.n_cycle();
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(c: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while c[r] != r {
            r = c[r];
        }
        c[x] = r;
        r
    }
    for &[u, v] in g.edges() {
        let (a, b) = (find(&mut comp, u), find(&mut comp, v));
        comp[a] = b;
    }
    let roots: Vec<usize> = (0..n).map(|v| find(&mut comp, v)).collect();
    for start in 0..c {
        for len in 1..c {
            let arc: Vec<usize> = (0..len).map(|t| g.cycle()[(start + t) % c]).collect();
            let inside = |v: usize| arc.iter().any(|&a| roots[a] == roots[v]);
            if g.cycle().iter().filter(|&&v| inside(v)).count() == len {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chord(s: &str) -> TrivalentGraph {
        TrivalentGraph::from_chord_diagram(&s.parse().unwrap())
    }

    fn tripod() -> TrivalentGraph {
        TrivalentGraph::new(vec![0, 1, 2], vec![3], vec![[0, 3], [1, 3], [2, 3]], [(3, [0, 1, 2])].into_iter().collect())
            .unwrap()
    }

    fn int(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn product_of_two_chords() {
        let a = chord("1:[(0,1)]");
        let p = graph_product(&a, &a);
        assert_eq!(p.coefficient(&chord("2:[(0,2),(1,3)]")), int(2));
        assert_eq!(p.coefficient(&chord("2:[(0,1),(2,3)]")), int(4));
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn product_identity_and_commutativity() {
        let t = tripod();
        assert_eq!(graph_product(&t, &TrivalentGraph::empty()), GraphSum::single(&t));
        let a = chord("1:[(0,1)]");
        assert_eq!(graph_product(&t, &a), graph_product(&a, &t));
    }

    #[test]
    fn product_associative_on_chords() {
        let a = GraphSum::single(&chord("1:[(0,1)]"));
        assert_eq!(a.product(&a).product(&a), a.product(&a.product(&a)));
    }

    #[test]
    fn split_examples() {
        assert!(!is_split(&chord("2:[(0,2),(1,3)]")));
        assert!(is_split(&chord("2:[(0,1),(2,3)]")));
        assert!(!is_split(&tripod()));
        assert!(!is_split(&chord("1:[(0,1)]")));
        assert!(graph_product(&tripod(), &chord("1:[(0,1)]")).terms().any(|(g, _)| is_split(g)));
    }
}
