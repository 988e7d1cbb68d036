use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Mutex;

use num::{BigRational, Zero};

use super::WeightSystem;
use crate::diagrams::{
    contract_edge, enumerate_trivalent_graphs, relation_triple, EdgeRef, GraphSum, ResolutionKind, TrivalentGraph,
};
use crate::error::{Error, Result};

/// Graphs with at least two internal vertices whose knot-attached
/// propagators all end at one internal vertex. STU cannot reach them from a
/// different vertex, so their value is left undetermined.
pub fn is_sillycase(g: &TrivalentGraph) -> bool {
    if g.n_internal() < 2 {
        return false;
    }
    let pos = g.cycle_positions();
    let ends: BTreeSet<usize> = g
        .edges()
        .iter()
        .filter_map(|&[u, v]| match (pos[u].is_some(), pos[v].is_some()) {
            (true, false) => Some(v),
            (false, true) => Some(u),
            _ => None,
        })
        .collect();
    ends.len() == 1
}

/// A weight system together with its memoized STU extension.
#[derive(Debug)]
pub struct ExtendedWeightSystem {
    base: WeightSystem,
    cache: Mutex<BTreeMap<TrivalentGraph, BigRational>>,
}

impl ExtendedWeightSystem {
    pub fn new(base: WeightSystem) -> Self {
        ExtendedWeightSystem { base, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn base(&self) -> &WeightSystem {
        &self.base
    }

    fn check(&self, g: &TrivalentGraph) -> Result<()> {
        if g.degree() != self.base.degree() {
            return Err(Error::Parameter(format!("graph of degree {} for a degree {} system", g.degree(), self.base.degree())));
        }
        if is_sillycase(g) {
            return Err(Error::Unsupported("every knot-attached propagator ends at one internal vertex".into()));
        }
        Ok(())
    }

    /// The value of the STU extension on `g`.
    pub fn extend_stu(&self, g: &TrivalentGraph) -> Result<BigRational> {
        self.check(g)?;
        self.eval(g)
    }

    /// `w(T) - w(U)` for the STU step at propagator `e`, which must join a
    /// knot point to an internal vertex.
    pub fn expand_at(&self, g: &TrivalentGraph, e: usize) -> Result<BigRational> {
        self.check(g)?;
        self.step(g, e)
    }

    /// One value per knot-attached propagator of an internal vertex, each
    /// obtained by expanding there first.
    pub fn stu_expansions(&self, g: &TrivalentGraph) -> Result<Vec<(usize, BigRational)>> {
        self.check(g)?;
        knot_legs(g).into_iter().map(|e| Ok((e, self.step(g, e)?))).collect()
    }

    pub fn evaluate_sum(&self, s: &GraphSum) -> Result<BigRational> {
        let mut total = BigRational::zero();
        for (g, c) in s.terms() {
            total += self.extend_stu(g)? * c;
        }
        Ok(total)
    }

    fn step(&self, g: &TrivalentGraph, e: usize) -> Result<BigRational> {
        let c = contract_edge(g, EdgeRef::Propagator(e))?;
        let triple = relation_triple(&c)?;
        if triple[0].kind != ResolutionKind::S {
            return Err(Error::Parameter(format!("propagator {e} does not touch the knot")));
        }
        debug_assert_eq!(triple[0].graph.canonical(), g.canonical());
        Ok(self.eval(&triple[1].graph)? - self.eval(&triple[2].graph)?)
    }

    fn eval(&self, g: &TrivalentGraph) -> Result<BigRational> {
        let g = g.canonical();
        if let Some(v) = self.cache.lock().unwrap().get(&g) {
            return Ok(v.clone());
        }
        let v = if g.n_internal() == 0 {
            self.base.value(&g.to_chord_diagram().expect("no internal vertices"))?
        } else {
            self.step(&g, knot_legs(&g)[0])?
        };
        self.cache.lock().unwrap().insert(g, v.clone());
        Ok(v)
    }
}

fn knot_legs(g: &TrivalentGraph) -> Vec<usize> {
    let pos = g.cycle_positions();
    g.edges().iter().enumerate().filter(|(_, &[u, v])| pos[u].is_some() != pos[v].is_some()).map(|(i, _)| i).collect()
}

/// A graph and internal edge where `I - H + X` does not vanish.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IhxViolation {
    pub graph: TrivalentGraph,
    pub edge: usize,
    pub values: [BigRational; 3],
}

impl fmt::Display for IhxViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [i, h, x] = &self.values;
        write!(f, "{} edge {}: I={} H={} X={}", self.graph, self.edge, i, h, x)
    }
}

/// IHX instances that fail, over every internal edge of every graph of the
/// system's degree with at most four internal vertices. Each of I, H and X is
/// evaluated through every choice of first STU step, and an instance fails if
/// any combination of choices gives a nonzero `I - H + X`. Instances touching
/// a graph rejected by [`is_sillycase`] are skipped.
pub fn check_ihx(w: &ExtendedWeightSystem) -> Result<Vec<IhxViolation>> {
    let mut bad = Vec::new();
    for g in enumerate_trivalent_graphs(w.base.degree(), 4)? {
        if g.n_internal() < 2 {
            continue;
        }
        let pos = g.cycle_positions();
        for (e, &[u, v]) in g.edges().iter().enumerate() {
            if pos[u].is_some() || pos[v].is_some() {
                continue;
            }
            let Ok(c) = contract_edge(&g, EdgeRef::Propagator(e)) else { continue };
            let triple = relation_triple(&c)?;
            if triple.iter().any(|r| is_sillycase(&r.graph)) {
                continue;
            }
            let mut choices = Vec::with_capacity(3);
            for r in &triple {
                let vals: BTreeSet<BigRational> =
                    knot_legs(&r.graph).into_iter().map(|l| w.step(&r.graph, l)).collect::<Result<_>>()?;
                choices.push(vals);
            }
            let failing = choices[0].iter().find_map(|i| {
                choices[1].iter().find_map(|h| {
                    choices[2].iter().find(|&x| !(i - h + x).is_zero()).map(|x| [i.clone(), h.clone(), x.clone()])
                })
            });
            if let Some(values) = failing {
                bad.push(IhxViolation { graph: g.clone(), edge: e, values });
            }
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagrams::{enumerate_chord_diagrams, graph_product};
    use crate::weights::check_4t;

    fn int(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn tripod() -> TrivalentGraph {
        TrivalentGraph::new(vec![0, 1, 2], vec![3], vec![[0, 3], [1, 3], [2, 3]], [(3, [0, 1, 2])].into_iter().collect())
            .unwrap()
    }

    fn unverified(k: usize, vals: &[i64]) -> WeightSystem {
        let values = enumerate_chord_diagrams(k).unwrap().into_iter().zip(vals).map(|(d, &v)| (d, int(v))).collect();
        WeightSystem::new_unverified(k, values).unwrap()
    }

    #[test]
    fn tripod_under_c2() {
        let w = ExtendedWeightSystem::new(WeightSystem::c2());
        assert_eq!(w.extend_stu(&tripod()).unwrap(), int(1));
        let rev = tripod().with_reversed_order(3);
        assert_eq!(w.extend_stu(&rev).unwrap(), int(-1));
        for e in 0..3 {
            assert_eq!(w.expand_at(&tripod(), e).unwrap(), int(1));
        }
    }

    #[test]
    fn chords_read_directly() {
        let w = ExtendedWeightSystem::new(WeightSystem::degree3());
        for (d, v) in WeightSystem::degree3().values() {
            assert_eq!(&w.extend_stu(&TrivalentGraph::from_chord_diagram(d)).unwrap(), v);
        }
    }

    #[test]
    fn expansion_order_independent() {
        for base in [WeightSystem::c2(), WeightSystem::degree3()] {
            let k = base.degree();
            let w = ExtendedWeightSystem::new(base);
            let mut checked = 0;
            for g in enumerate_trivalent_graphs(k, 4).unwrap() {
                if g.n_internal() == 0 || is_sillycase(&g) {
                    continue;
                }
                let vals = w.stu_expansions(&g).unwrap();
                assert!(vals.iter().all(|(_, v)| *v == vals[0].1), "{g}: {vals:?}");
                checked += 1;
            }
            assert!(checked > 0);
        }
    }

    #[test]
    fn four_term_failure_breaks_order_independence() {
        let w = ExtendedWeightSystem::new(unverified(3, &[0, 0, 0, 1, 0]));
        let disagree = enumerate_trivalent_graphs(3, 1).unwrap().into_iter().filter(|g| g.n_internal() == 1).any(|g| {
            let vals = w.stu_expansions(&g).unwrap();
            vals.iter().any(|(_, v)| *v != vals[0].1)
        });
        assert!(disagree);
    }

    #[test]
    fn ihx_holds_for_four_term_systems() {
        assert!(check_ihx(&ExtendedWeightSystem::new(WeightSystem::c2())).unwrap().is_empty());
        assert!(check_ihx(&ExtendedWeightSystem::new(WeightSystem::degree3())).unwrap().is_empty());
        assert!(check_ihx(&ExtendedWeightSystem::new(WeightSystem::zero(3).unwrap())).unwrap().is_empty());
    }

    #[test]
    fn ihx_fails_without_four_term() {
        // In degree 3 every IHX instance already holds in the free span of
        // chord diagrams, so the counterexample lives in degree 4.
        let mut vals = vec![0; 18];
        vals[1] = 1;
        let w = unverified(4, &vals);
        assert!(!check_4t(&w).unwrap().is_empty());
        assert_eq!(check_ihx(&ExtendedWeightSystem::new(w)).unwrap().len(), 36);
        let w3 = unverified(3, &[0, 0, 0, 1, 0]);
        assert!(!check_4t(&w3).unwrap().is_empty());
        assert!(check_ihx(&ExtendedWeightSystem::new(w3)).unwrap().is_empty());
    }

    #[test]
    fn sillycase_rejected() {
        let silly = enumerate_trivalent_graphs(3, 4).unwrap().into_iter().find(is_sillycase);
        if let Some(g) = silly {
            let w = ExtendedWeightSystem::new(WeightSystem::degree3());
            assert!(matches!(w.extend_stu(&g), Err(Error::Unsupported(_))));
        }
        assert!(!is_sillycase(&tripod()));
    }

    #[test]
    fn products() {
        let chord = TrivalentGraph::from_chord_diagram(&"1:[(0,1)]".parse().unwrap());
        let c2 = ExtendedWeightSystem::new(WeightSystem::c2());
        assert_eq!(c2.evaluate_sum(&graph_product(&chord, &chord)).unwrap(), int(2));
        let w = ExtendedWeightSystem::new(WeightSystem::degree3());
        for g in enumerate_trivalent_graphs(2, 4).unwrap() {
            let p = graph_product(&chord, &g);
            if p.terms().any(|(t, _)| is_sillycase(t)) {
                continue;
            }
            let termwise: BigRational = p.terms().map(|(t, c)| w.extend_stu(t).unwrap() * c).sum();
            assert_eq!(w.evaluate_sum(&p).unwrap(), termwise);
        }
    }

    #[test]
    fn concurrent_calls_agree() {
        let w = ExtendedWeightSystem::new(WeightSystem::degree3());
        let graphs: Vec<_> = enumerate_trivalent_graphs(3, 4).unwrap().into_iter().filter(|g| !is_sillycase(g)).collect();
        let serial: Vec<_> = graphs.iter().map(|g| ExtendedWeightSystem::new(WeightSystem::degree3()).extend_stu(g).unwrap()).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..4)
                .map(|t| {
                    let (w, graphs) = (&w, &graphs);
                    s.spawn(move || graphs.iter().cycle().skip(t).take(graphs.len()).map(|g| w.extend_stu(g).unwrap()).collect::<Vec<_>>())
                })
                .collect();
            for (t, h) in handles.into_iter().enumerate() {
                let got = h.join().unwrap();
                for (i, v) in got.iter().enumerate() {
                    assert_eq!(*v, serial[(i + t) % graphs.len()]);
                }
            }
        });
    }
}
