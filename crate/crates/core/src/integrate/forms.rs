use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::diagrams::TrivalentGraph;
use crate::error::{Error, Result};
use crate::knots::{Curve, V3};
use crate::orientation::{epsilon_sign, Labelling};

/// Unit vector from `x` to `y`.
pub fn gauss_direction(x: &V3, y: &V3) -> Result<V3> {
    let d = y - x;
    let r = d.norm();
    if !(r > 0.0) {
        return Err(Error::Numerical(format!("coincident points at {x:?}")));
    }
    Ok(d / r)
}

/// `Delta_{mu nu}(x) = eps_{mu nu sigma} x^sigma / (4 pi |x|^3)`.
pub fn propagator(x: &V3) -> Result<Matrix3<f64>> {
    let r = x.norm();
    if !(r > 0.0) {
        return Err(Error::Numerical("propagator at the zero vector".into()));
    }
    Ok(propagator_unchecked(x, r))
}

fn propagator_unchecked(x: &V3, r: f64) -> Matrix3<f64> {
    let y = x / (4.0 * PI * r * r * r);
    Matrix3::new(0.0, y.z, -y.y, -y.z, 0.0, y.x, y.y, -y.x, 0.0)
}

/// The pulled-back area form `y . (a x b) / (4 pi |y|^3)`, normalized to total
/// area 1, evaluated on the tangent vectors `a`, `b` of `y`.
pub fn area_form(y: &V3, a: &V3, b: &V3) -> f64 {
    let r = y.norm();
    y.dot(&a.cross(b)) / (4.0 * PI * r * r * r)
}

/// A point of the configuration space of a graph: one knot parameter per
/// cycle vertex, in cycle order, and one point per internal vertex, in the
/// order of `TrivalentGraph::internal`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub knot_params: Vec<f64>,
    pub free: Vec<V3>,
}

impl Configuration {
    /// Positions and tangents indexed by vertex id; free points have no tangent.
    pub(crate) fn realize(&self, g: &TrivalentGraph, k: &dyn Curve) -> Result<(Vec<V3>, Vec<V3>)> {
        if self.knot_params.len() != g.n_cycle() || self.free.len() != g.n_internal() {
            return Err(Error::Parameter(format!(
                "configuration has {} knot and {} free points, graph needs {} and {}",
                self.knot_params.len(),
                self.free.len(),
                g.n_cycle(),
                g.n_internal()
            )));
        }
        let n = g.n_vertices();
        let mut pos = vec![V3::zeros(); n];
        let mut tan = vec![V3::zeros(); n];
        for (&v, &s) in g.cycle().iter().zip(&self.knot_params) {
            pos[v] = k.point(s);
            tan[v] = k.tangent(s);
        }
        for (&v, x) in g.internal().iter().zip(&self.free) {
            pos[v] = *x;
        }
        Ok((pos, tan))
    }

    /// True when the knot parameters are strictly increasing around the circle.
    pub fn is_cyclically_ordered(&self) -> bool {
        let p = &self.knot_params;
        if p.iter().any(|s| !(0.0..1.0).contains(s)) {
            return false;
        }
        let descents = (0..p.len()).filter(|&i| p[(i + 1) % p.len()] <= p[i]).count();
        p.len() <= 1 || descents == 1
    }
}

/// Per-graph data for evaluating the contraction quickly.
#[derive(Clone, Debug)]
pub(crate) struct Contraction {
    edges: Vec<[usize; 2]>,
    knot: Vec<bool>,
    /// `half[e]`: (internal vertex index, slot in its cyclic order) at each end
    /// of edge `e`; `usize::MAX` at knot ends.
    half: Vec<[(usize, usize); 2]>,
    assignments: Vec<(Vec<[usize; 3]>, f64)>,
}

const S3: [([usize; 3], f64); 6] =
    [([0, 1, 2], 1.0), ([1, 2, 0], 1.0), ([2, 0, 1], 1.0), ([0, 2, 1], -1.0), ([2, 1, 0], -1.0), ([1, 0, 2], -1.0)];

impl Contraction {
    pub(crate) fn new(g: &TrivalentGraph) -> Self {
        let n = g.n_vertices();
        let knot: Vec<bool> = (0..n).map(|v| g.is_knot_vertex(v)).collect();
        let slots: Vec<[usize; 3]> = g.internal().iter().map(|&v| g.order(v).expect("internal vertex order")).collect();
        let mut qpos = vec![usize::MAX; n];
        for (q, &v) in g.internal().iter().enumerate() {
            qpos[v] = q;
        }
        let none = (usize::MAX, usize::MAX);
        let half = g
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &[u, v])| {
                let at = |w: usize| {
                    if knot[w] {
                        none
                    } else {
                        (qpos[w], slots[qpos[w]].iter().position(|&f| f == e).unwrap())
                    }
                };
                [at(u), at(v)]
            })
            .collect();
        let mut assignments = vec![(Vec::new(), 1.0)];
        for _ in 0..slots.len() {
            assignments = assignments
                .into_iter()
                .flat_map(|(a, s)| {
                    S3.iter().map(move |(p, t)| {
                        let mut a = a.clone();
                        a.push(*p);
                        (a, s * t)
                    })
                })
                .collect();
        }
        Contraction { edges: g.edges().to_vec(), knot, half, assignments }
    }

    /// Tensor contraction with propagators, tangents and epsilon tensors.
    pub(crate) fn evaluate(&self, pos: &[V3], tan: &[V3]) -> f64 {
        let mut scalar = 1.0;
        let mut factors: Vec<(usize, [(usize, usize); 2], Matrix3<f64>)> = Vec::with_capacity(self.edges.len());
        for (e, &[u, v]) in self.edges.iter().enumerate() {
            let x = pos[v] - pos[u];
            let d = propagator_unchecked(&x, x.norm());
            match (self.knot[u], self.knot[v]) {
                (true, true) => scalar *= tan[u].dot(&(d * tan[v])),
                _ => factors.push((e, self.half[e], d)),
            }
        }
        if factors.is_empty() {
            return scalar;
        }
        let mut total = 0.0;
        for (perm, sign) in &self.assignments {
            let mut prod = *sign;
            for &(e, [hu, hv], ref d) in &factors {
                let [u, v] = self.edges[e];
                let idx = |h: (usize, usize)| perm[h.0][h.1];
                let val = match (self.knot[u], self.knot[v]) {
                    (true, false) => tan[u].dot(&d.column(idx(hv))),
                    (false, true) => d.row(idx(hu)).transpose().dot(&tan[v]),
                    _ => d[(idx(hu), idx(hv))],
                };
                prod *= val;
                if prod == 0.0 {
                    break;
                }
            }
            total += prod;
        }
        scalar * total
    }
}

/// The labelling-independent integrand: a propagator per edge, the tangent
/// at each knot vertex and an epsilon tensor at each internal vertex in its
/// cyclic order, fully contracted.
pub fn canonical_integrand(g: &TrivalentGraph, c: &Configuration, k: &dyn Curve) -> Result<f64> {
    let (pos, tan) = c.realize(g, k)?;
    check_distinct(&pos)?;
    Ok(Contraction::new(g).evaluate(&pos, &tan))
}

/// Density of the canonical part of the wedge of the propagator forms, taken
/// in label order and directed by the labelling.
///
/// The canonical part keeps the terms in which every propagator form
/// contributes one differential from each of its ends; for chord diagrams and
/// tripods it is the whole wedge. The density is taken against the
/// orientation of the labelled configuration space, which is opposite to the
/// coordinate frame listing one parameter per knot vertex and `x, y, z` per
/// internal vertex in label order.
pub fn labelled_integrand(g: &TrivalentGraph, lab: &Labelling, c: &Configuration, k: &dyn Curve) -> Result<f64> {
    let eps = epsilon_sign(g, lab)?;
    Ok(f64::from(eps) * canonical_integrand(g, c, k)?)
}

/// The labelled integrand times [`epsilon_sign`]; independent of the labelling.
pub fn graph_integrand(g: &TrivalentGraph, lab: &Labelling, c: &Configuration, k: &dyn Curve) -> Result<f64> {
    Ok(f64::from(epsilon_sign(g, lab)?) * labelled_integrand(g, lab, c, k)?)
}

fn check_distinct(pos: &[V3]) -> Result<()> {
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            if (pos[i] - pos[j]).norm() == 0.0 {
                return Err(Error::Numerical(format!("coincident points at {:?}", pos[i])));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagrams::{enumerate_trivalent_graphs, permutations};
    use crate::knots::ParametricKnot;
    use approx::assert_relative_eq;

    fn x_diagram() -> TrivalentGraph {
        TrivalentGraph::from_chord_diagram(&"2:[(0,2),(1,3)]".parse().unwrap())
    }

    fn tripod() -> TrivalentGraph {
        TrivalentGraph::new(vec![0, 1, 2], vec![3], vec![[0, 3], [1, 3], [2, 3]], [(3, [0, 1, 2])].into_iter().collect())
            .unwrap()
    }

    fn g_form(k: &dyn Curve, a: f64, b: f64) -> f64 {
        let y = k.point(a) - k.point(b);
        k.tangent(a).cross(&k.tangent(b)).dot(&y) / (4.0 * PI * y.norm().powi(3))
    }

    /// Brute-force wedge of the edge 2-forms over ordered coordinate pairs;
    /// with `canonical`, pairs from the same end of a propagator are dropped.
    fn wedge_oracle(g: &TrivalentGraph, lab: &Labelling, c: &Configuration, k: &dyn Curve, canonical: bool) -> f64 {
        let (pos, tan) = c.realize(g, k).unwrap();
        let mut by_label: Vec<usize> = (0..g.n_vertices()).collect();
        by_label.sort_by_key(|&v| lab.vertex_labels[v]);
        // basis[i] = (vertex, derivative of that vertex's position)
        let mut basis: Vec<(usize, V3)> = Vec::new();
        for &v in &by_label {
            if g.is_knot_vertex(v) {
                basis.push((v, tan[v]));
            } else {
                basis.extend([V3::x(), V3::y(), V3::z()].map(|e| (v, e)));
            }
        }
        let forms: Vec<Box<dyn Fn(usize, usize) -> f64>> = lab
            .directions
            .iter()
            .map(|&[s, d]| {
                let y = pos[d] - pos[s];
                let dy = |i: usize| {
                    let (w, t) = basis[i];
                    if w == d {
                        t
                    } else if w == s {
                        -t
                    } else {
                        V3::zeros()
                    }
                };
                let dys: Vec<V3> = (0..basis.len()).map(dy).collect();
                let owner: Vec<usize> = basis.iter().map(|b| b.0).collect();
                Box::new(move |i: usize, j: usize| {
                    if canonical && owner[i] == owner[j] {
                        0.0
                    } else {
                        area_form(&y, &dys[i], &dys[j])
                    }
                }) as Box<dyn Fn(usize, usize) -> f64>
            })
            .collect();
        fn rec(forms: &[Box<dyn Fn(usize, usize) -> f64>], left: &[usize], seq: &mut Vec<usize>) -> f64 {
            if forms.is_empty() {
                let p: Vec<usize> = seq.clone();
                return f64::from(crate::diagrams::permutation_sign(&p));
            }
            let mut total = 0.0;
            for a in 0..left.len() {
                for b in a + 1..left.len() {
                    let w = forms[0](left[a], left[b]);
                    if w == 0.0 {
                        continue;
                    }
                    let rest: Vec<usize> = left.iter().enumerate().filter(|&(i, _)| i != a && i != b).map(|(_, &x)| x).collect();
                    seq.extend([left[a], left[b]]);
                    total += w * rec(&forms[1..], &rest, seq);
                    seq.truncate(seq.len() - 2);
                }
            }
            total
        }
        let all: Vec<usize> = (0..basis.len()).collect();
        rec(&forms, &all, &mut Vec::new())
    }

    fn generic_config(g: &TrivalentGraph, shift: f64) -> Configuration {
        let c = g.n_cycle();
        let knot_params = (0..c).map(|j| (0.07 + shift + (j as f64 + 0.3 * (j as f64).sin()) / c as f64).rem_euclid(1.0)).collect();
        let spots = [V3::new(0.3, -0.2, 0.5), V3::new(0.9, 0.1, 0.2), V3::new(-0.4, 0.6, -0.1), V3::new(0.2, 0.8, 0.9)];
        let free = spots[..g.n_internal()].to_vec();
        Configuration { knot_params, free }
    }

    #[test]
    fn gauss_and_propagator() {
        let o = V3::zeros();
        assert_eq!(gauss_direction(&o, &V3::new(0.0, 0.0, 2.0)).unwrap(), V3::z());
        assert_relative_eq!(gauss_direction(&o, &V3::new(3.0, 4.0, 0.0)).unwrap(), V3::new(0.6, 0.8, 0.0), epsilon = 1e-15);
        let x = V3::new(0.3, -1.2, 0.7);
        assert_eq!(gauss_direction(&x, &o).unwrap(), -gauss_direction(&o, &x).unwrap());
        assert!(gauss_direction(&x, &x).is_err());
        let d = propagator(&V3::z()).unwrap();
        assert_relative_eq!(d[(0, 1)], 1.0 / (4.0 * PI), epsilon = 1e-15);
        assert_relative_eq!(d[(1, 0)], -1.0 / (4.0 * PI), epsilon = 1e-15);
        for (i, j) in [(0, 0), (1, 1), (2, 2), (0, 2), (2, 0), (1, 2), (2, 1)] {
            assert_eq!(d[(i, j)], 0.0);
        }
        let d = propagator(&x).unwrap();
        assert_relative_eq!(d, -d.transpose(), epsilon = 1e-15);
        assert_relative_eq!(propagator(&-x).unwrap(), -d, epsilon = 1e-15);
        assert_relative_eq!(propagator(&(2.0 * x)).unwrap(), d / 4.0, epsilon = 1e-15);
        assert!(propagator(&o).is_err());
    }

    #[test]
    fn closed_forms_for_x_and_tripod() {
        let k = ParametricKnot::trefoil();
        let c = Configuration { knot_params: vec![0.1, 0.3, 0.55, 0.8], free: vec![] };
        let v = canonical_integrand(&x_diagram(), &c, &k).unwrap();
        assert_relative_eq!(v, g_form(&k, 0.1, 0.55) * g_form(&k, 0.3, 0.8), max_relative = 1e-12);
        let s = [0.05, 0.4, 0.7];
        let x = V3::new(0.4, -0.3, 0.9);
        let c = Configuration { knot_params: s.to_vec(), free: vec![x] };
        let vs: Vec<V3> = s
            .iter()
            .map(|&t| {
                let y = x - k.point(t);
                y.cross(&k.tangent(t)) / (4.0 * PI * y.norm().powi(3))
            })
            .collect();
        let det = Matrix3::from_columns(&vs).determinant();
        assert_relative_eq!(canonical_integrand(&tripod(), &c, &k).unwrap(), det, max_relative = 1e-12);
    }

    #[test]
    fn planar_circle_kills_the_x_diagram() {
        let c = Configuration { knot_params: vec![0.0, 0.25, 0.5, 0.75], free: vec![] };
        assert_eq!(canonical_integrand(&x_diagram(), &c, &ParametricKnot::unknot()).unwrap(), 0.0);
    }

    #[test]
    fn labelled_matches_wedge_oracle() {
        let k = ParametricKnot::figure8();
        let mut graphs = enumerate_trivalent_graphs(2, 3).unwrap();
        graphs.extend(enumerate_trivalent_graphs(3, 2).unwrap());
        for g in &graphs {
            let c = generic_config(g, 0.0);
            let n = g.n_vertices();
            let reference = Labelling::reference(g);
            let mut labs = vec![reference.clone()];
            for p in permutations(n).iter().step_by(7).take(6) {
                let mut l = reference.clone();
                l.vertex_labels = p.clone();
                labs.push(l.flip_edge(0));
            }
            if g.edges().len() > 1 {
                labs.push(reference.swap_edges(0, 1));
            }
            let canon = canonical_integrand(g, &c, &k).unwrap();
            for lab in &labs {
                let w = wedge_oracle(g, lab, &c, &k, true);
                let l = labelled_integrand(g, lab, &c, &k).unwrap();
                assert_relative_eq!(l, -w, epsilon = 1e-12, max_relative = 1e-9);
                if g.n_internal() <= 1 {
                    assert_relative_eq!(wedge_oracle(g, lab, &c, &k, false), w, epsilon = 1e-12, max_relative = 1e-9);
                }
                assert_relative_eq!(graph_integrand(g, lab, &c, &k).unwrap(), canon, epsilon = 1e-14, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn edge_flips_leave_the_integrand_unchanged() {
        let k = ParametricKnot::trefoil();
        for g in enumerate_trivalent_graphs(3, 2).unwrap() {
            let c = generic_config(&g, 0.11);
            let lab = Labelling::reference(&g);
            let v = graph_integrand(&g, &lab, &c, &k).unwrap();
            for j in 0..g.edges().len() {
                let w = graph_integrand(&g, &lab.flip_edge(j), &c, &k).unwrap();
                assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0));
                assert_relative_eq!(wedge_oracle(&g, &lab.flip_edge(j), &c, &k, false), -wedge_oracle(&g, &lab, &c, &k, false), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn configuration_checks() {
        let g = x_diagram();
        let k = ParametricKnot::unknot();
        let bad = Configuration { knot_params: vec![0.1, 0.2], free: vec![] };
        assert!(canonical_integrand(&g, &bad, &k).is_err());
        let coincident = Configuration { knot_params: vec![0.1, 0.1, 0.5, 0.7], free: vec![] };
        assert!(canonical_integrand(&g, &coincident, &k).is_err());
        assert!(Configuration { knot_params: vec![0.9, 0.1, 0.5], free: vec![] }.is_cyclically_ordered());
        assert!(!Configuration { knot_params: vec![0.1, 0.5, 0.3], free: vec![] }.is_cyclically_ordered());
    }
}
