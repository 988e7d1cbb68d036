use std::collections::BTreeSet;

use num::{BigRational, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::mc::{mc_integrate_with, IntegralEstimate, McOptions, SUBSTREAMS};
use crate::diagrams::{enumerate_trivalent_graphs, TrivalentGraph};
use crate::error::{Error, Result};
use crate::knots::{almost_planar_with, check_embedding, Curve, CrossingState, ParametricKnot, PlaneDiagram};
use crate::weights::{anomaly_case, is_sillycase, AnomalyCase, ExtendedWeightSystem, WeightSystem};

/// One graph of the invariant's graph sum: `weight / automorphisms` times the
/// integral of the graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphTerm {
    pub graph: TrivalentGraph,
    pub weight: BigRational,
    pub automorphisms: usize,
}

impl GraphTerm {
    pub fn coefficient(&self) -> f64 {
        self.weight.to_f64().unwrap_or(f64::NAN) / self.automorphisms as f64
    }
}

/// The graphs of degree `w.degree()` that contribute to the invariant of `w`,
/// one per unoriented isomorphism class.
///
/// Graphs with zero weight are dropped. So are graphs with two propagators
/// joining the same pair of vertices, whose form contains the square of a
/// 2-form pulled back from one sphere and vanishes; graphs with an
/// orientation-reversing automorphism, whose integral vanishes; and the
/// shapes on which the STU extension is undetermined, whose value does not
/// enter the invariant.
pub fn graph_terms(w: &WeightSystem) -> Result<Vec<GraphTerm>> {
    let k = w.degree();
    if k == 0 {
        return Ok(Vec::new());
    }
    let ext = ExtendedWeightSystem::new(w.clone());
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for g in enumerate_trivalent_graphs(k, (2 * k - 1).min(4))? {
        if !seen.insert(g.unoriented_key()) || is_sillycase(&g) || has_parallel_edges(&g) {
            continue;
        }
        let automorphisms = g.unoriented_automorphism_count();
        if g.automorphism_count() != automorphisms {
            continue;
        }
        let weight = ext.extend_stu(&g)?;
        if !weight.is_zero() {
            out.push(GraphTerm { graph: g, weight, automorphisms });
        }
    }
    Ok(out)
}

fn has_parallel_edges(g: &TrivalentGraph) -> bool {
    let mut ends: Vec<[usize; 2]> = g.edges().iter().map(|&[u, v]| [u.min(v), u.max(v)]).collect();
    ends.sort_unstable();
    ends.windows(2).any(|w| w[0] == w[1])
}

/// An invariant estimate with its per-graph integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantEstimate {
    pub estimate: IntegralEstimate,
    /// `(graph, coefficient, integral)` for every contributing graph.
    pub terms: Vec<(String, f64, IntegralEstimate)>,
    pub warnings: Vec<String>,
}

/// `sum w(G) I(G) / |Aut G|` over the graphs of [`graph_terms`], each
/// integral estimated with `n` samples on its own block of sub-streams.
pub fn invariant_from_weight(w: &WeightSystem, k: &dyn Curve, n: u64, seed: u64) -> Result<InvariantEstimate> {
    invariant_from_weight_with(w, k, n, seed, &McOptions::default())
}

pub fn invariant_from_weight_with(
    w: &WeightSystem,
    k: &dyn Curve,
    n: u64,
    seed: u64,
    opts: &McOptions,
) -> Result<InvariantEstimate> {
    if !w.is_verified() {
        return Err(Error::Parameter("weight system has not been checked against 4T".into()));
    }
    if w.degree() > 3 {
        return Err(Error::Unsupported(format!("numerical invariants stop at degree 3, got {}", w.degree())));
    }
    if n == 0 {
        return Err(Error::Parameter("at least one sample is required".into()));
    }
    let mut warnings = Vec::new();
    match anomaly_case(w)? {
        AnomalyCase::Vanishes => {}
        AnomalyCase::WritheCorrectionClass => warnings.push(
            "WARN: the anomaly correction (a multiple of the writhe) is omitted; it vanishes only if its coefficient is 0"
                .to_string(),
        ),
        AnomalyCase::OneFormCorrectionClass => {
            return Err(Error::Unsupported("the anomaly correction of this system is not implemented".into()))
        }
    }
    let terms = graph_terms(w)?;
    let mut value = 0.0;
    let mut var = 0.0;
    let mut rows = Vec::new();
    for (i, t) in terms.iter().enumerate() {
        let sub = McOptions { stream_offset: opts.stream_offset + (i * SUBSTREAMS) as u64, ..opts.clone() };
        let e = mc_integrate_with(&t.graph, k, n, seed, &sub)?;
        let c = t.coefficient();
        value += c * e.value;
        var += (c * e.std_error).powi(2);
        rows.push((t.graph.to_string(), c, e));
    }
    let n_samples = n * terms.len() as u64;
    Ok(InvariantEstimate {
        estimate: IntegralEstimate { value, std_error: var.sqrt(), n_samples, seed },
        terms: rows,
        warnings,
    })
}

/// The degree-2 invariant: the graph sum of the degree-2 weight system,
/// `(1/4) I(X) + (1/3) I(tripod)`.
pub fn v2(k: &dyn Curve, n: u64, seed: u64) -> Result<IntegralEstimate> {
    v2_with(k, n, seed, &McOptions::default())
}

pub fn v2_with(k: &dyn Curve, n: u64, seed: u64, opts: &McOptions) -> Result<IntegralEstimate> {
    Ok(invariant_from_weight_with(&WeightSystem::c2(), k, n, seed, opts)?.estimate)
}

/// A knot with transverse double points: a plane diagram of `base` realized
/// almost flat, with every crossing kept, switched or left as a double point.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularKnot {
    base: ParametricKnot,
    diagram: PlaneDiagram,
    states: Vec<CrossingState>,
    height: f64,
}

impl SingularKnot {
    pub fn new(base: ParametricKnot, diagram: PlaneDiagram, states: Vec<CrossingState>, height: f64) -> Result<Self> {
        let s = SingularKnot { base, diagram, states, height };
        s.realize(&s.states)?;
        if s.double_points().len() > 3 {
            return Err(Error::Parameter(format!("{} double points; at most 3 are supported", s.double_points().len())));
        }
        Ok(s)
    }

    /// Indices of the crossings left as double points.
    pub fn double_points(&self) -> Vec<usize> {
        (0..self.states.len()).filter(|&i| self.states[i] == CrossingState::Flat).collect()
    }

    fn realize(&self, states: &[CrossingState]) -> Result<ParametricKnot> {
        almost_planar_with(&self.base, &self.diagram, states, self.height)
    }

    /// The `2^j` resolutions with their signs: each double point is pushed
    /// off to the positive crossing (sign +1) or the negative one (sign -1).
    pub fn resolutions(&self) -> Result<Vec<(i32, ParametricKnot)>> {
        let flat = self.double_points();
        let mut out = Vec::new();
        for mask in 0..1usize << flat.len() {
            let mut states = self.states.clone();
            let mut sign = 1;
            for (b, &i) in flat.iter().enumerate() {
                let positive = mask >> b & 1 == 0;
                let keep_is_positive = self.diagram.crossings[i].sign > 0;
                states[i] = if positive == keep_is_positive { CrossingState::Keep } else { CrossingState::Switch };
                if !positive {
                    sign = -sign;
                }
            }
            let k = self.realize(&states)?;
            check_embedding(&k, 4096, 0.1 * self.height).map_err(|e| match e {
                Error::Structure(m) => Error::Numerical(format!("resolution is not embedded: {m}")),
                e => e,
            })?;
            out.push((sign, k));
        }
        Ok(out)
    }
}

/// Alternating sum of `inv` over the resolutions of `singular`; errors add
/// in quadrature.
pub fn vassiliev_finite_difference(
    inv: &dyn Fn(&ParametricKnot) -> Result<IntegralEstimate>,
    singular: &SingularKnot,
) -> Result<IntegralEstimate> {
    let mut value = 0.0;
    let mut var = 0.0;
    let mut n_samples = 0;
    let mut seed = 0;
    for (sign, k) in singular.resolutions()? {
        let e = inv(&k)?;
        value += f64::from(sign) * e.value;
        var += e.std_error * e.std_error;
        n_samples += e.n_samples;
        seed = e.seed;
    }
    Ok(IntegralEstimate { value, std_error: var.sqrt(), n_samples, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knots::{extract_crossings, perturb, V3};
    use crate::weights::chord_evaluation;

    #[test]
    fn degree_two_terms() {
        let terms = graph_terms(&WeightSystem::c2()).unwrap();
        assert_eq!(terms.len(), 2, "{:?}", terms.iter().map(|t| (t.graph.to_string(), t.weight.to_string(), t.automorphisms)).collect::<Vec<_>>());
        let coeffs: Vec<f64> = terms.iter().map(|t| t.coefficient().abs()).collect();
        assert!(coeffs.contains(&0.25) && coeffs.contains(&(1.0 / 3.0)));
        assert!(graph_terms(&WeightSystem::zero(3).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn zero_system_gives_zero() {
        let e = invariant_from_weight(&WeightSystem::zero(2).unwrap(), &ParametricKnot::trefoil(), 100, 1).unwrap();
        assert_eq!((e.estimate.value, e.estimate.std_error), (0.0, 0.0));
    }

    #[test]
    fn rejects_unverified_and_high_degree() {
        let w = WeightSystem::new_unverified(2, WeightSystem::c2().values().clone()).unwrap();
        assert!(invariant_from_weight(&w, &ParametricKnot::unknot(), 10, 1).is_err());
        let k = ParametricKnot::unknot();
        assert!(matches!(invariant_from_weight(&WeightSystem::zero(4).unwrap(), &k, 10, 1), Err(Error::Unsupported(_))));
        assert!(invariant_from_weight(&WeightSystem::c2(), &k, 0, 1).is_err());
    }

    #[test]
    fn degree_three_warns_about_the_writhe_term() {
        let e = invariant_from_weight(&WeightSystem::degree3(), &ParametricKnot::unknot(), 64, 1).unwrap();
        assert!(e.warnings.iter().any(|w| w.starts_with("WARN")));
        assert!(!e.terms.is_empty());
    }

    #[test]
    fn c2_matches_v2() {
        let k = ParametricKnot::trefoil();
        let a = invariant_from_weight(&WeightSystem::c2(), &k, 20_000, 3).unwrap().estimate;
        let b = v2(&k, 20_000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknot_baseline() {
        let e = v2(&ParametricKnot::unknot(), 400_000, 5).unwrap();
        assert!(e.within(-1.0 / 24.0, 4.0), "{e:?}");
    }

    #[test]
    fn degree_three_on_perturbed_unknot() {
        let w = WeightSystem::degree3();
        let u = ParametricKnot::unknot();
        let p = perturb(&u, 0.15, 9).unwrap();
        let a = invariant_from_weight(&w, &u, 20_000, 1).unwrap().estimate;
        let b = invariant_from_weight(&w, &p, 20_000, 2).unwrap().estimate;
        let d = a.minus(&b);
        assert!(d.within(0.0, 3.0), "{a:?} {b:?}");
    }

    #[test]
    fn resolutions_of_the_trefoil() {
        let k = ParametricKnot::trefoil();
        let d = extract_crossings(&k, &V3::z()).unwrap();
        let states = vec![CrossingState::Flat, CrossingState::Flat, CrossingState::Keep];
        let s = SingularKnot::new(k.clone(), d.clone(), states, 0.3).unwrap();
        let r = s.resolutions().unwrap();
        assert_eq!(r.len(), 4);
        assert_eq!(r.iter().map(|x| x.0).sum::<i32>(), 0);
        let j0 = SingularKnot::new(k, d, vec![CrossingState::Keep; 3], 0.3).unwrap();
        let e = vassiliev_finite_difference(&|k: &ParametricKnot| Ok(IntegralEstimate::exact(k.point(0.1).x, 0)), &j0).unwrap();
        assert_eq!(e.value, almost_planar_with(&j0.base, &j0.diagram, &j0.states, 0.3).unwrap().point(0.1).x);
        let x = TrivalentGraph::from_chord_diagram(&"2:[(0,2),(1,3)]".parse().unwrap());
        assert_eq!(chord_evaluation(&x, &"2:[(0,2),(1,3)]".parse().unwrap()).unwrap(), 4);
    }
}
