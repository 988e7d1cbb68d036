//! Weight systems on chord diagrams, their extension to trivalent graphs
//! through the STU relation, and the parity data that decide which anomaly
//! correction an invariant can need.
//!
//! STU convention. Let an internal vertex `v` have cyclic order `(e, x, y)`
//! where `e` runs to the knot point `b`. Then `w(S) = w(T) - w(U)`, where `T`
//! replaces `b` and `v` by two knot points carrying `x` then `y` in the
//! direction of the knot, and `U` carries `y` then `x`:
//!
//! ```text
//!        x   y            x     y          y     x
//!         \ /             |     |          |     |
//!          v       =      |     |    -     |     |
//!          |              |     |          |     |
//!   -------b------>   ----+-----+--->  ----+-----+--->
//! ```

mod extend;
mod fourterm;

use std::collections::BTreeMap;

use num::{BigRational, Zero};
use serde::{Deserialize, Serialize};

use crate::diagrams::{enumerate_chord_diagrams, ChordDiagram, TrivalentGraph};
use crate::error::{Error, Result};
use crate::orientation::{epsilon_sign, Labelling};

pub use extend::{check_ihx, is_sillycase, ExtendedWeightSystem, IhxViolation};
pub use fourterm::{check_4t, four_term_instances, FourTermInstance};

/// A rational function on the canonical chord diagrams of one degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightSystem {
    degree: usize,
    values: BTreeMap<ChordDiagram, BigRational>,
    verified: bool,
}

#[derive(Serialize, Deserialize)]
struct WeightJson {
    degree: usize,
    values: Vec<(String, String)>,
}

pub(crate) fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let q: num::BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p.trim().parse().map_err(|_| bad())?, q))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

impl WeightSystem {
    /// Build a system and require that it satisfies every 4T relation.
    pub fn new(degree: usize, values: BTreeMap<ChordDiagram, BigRational>) -> Result<Self> {
        let w = Self::new_unverified(degree, values)?;
        let bad = check_4t(&w)?;
        if !bad.is_empty() {
            return Err(Error::Structure(format!("{} violated 4T relations, first: {}", bad.len(), bad[0])));
        }
        Ok(WeightSystem { verified: true, ..w })
    }

    /// Build a system without the 4T check; it must still be total.
    pub fn new_unverified(degree: usize, values: BTreeMap<ChordDiagram, BigRational>) -> Result<Self> {
        let mut canon = BTreeMap::new();
        for (d, v) in values {
            if d.degree() != degree {
                return Err(Error::Structure(format!("diagram {d} is not of degree {degree}")));
            }
            let c = d.canonical();
            if let Some(prev) = canon.get(&c) {
                if *prev != v {
                    return Err(Error::Structure(format!("conflicting values for {c}")));
                }
            }
            canon.insert(c, v);
        }
        for d in enumerate_chord_diagrams(degree)? {
            if !canon.contains_key(&d) {
                return Err(Error::Totality(d.to_string()));
            }
        }
        Ok(WeightSystem { degree, values: canon, verified: false })
    }

    pub fn zero(degree: usize) -> Result<Self> {
        let values = enumerate_chord_diagrams(degree)?.into_iter().map(|d| (d, BigRational::zero())).collect();
        Self::new(degree, values)
    }

    /// The degree-2 system: 1 on the crossed diagram, 0 on the other.
    pub fn c2() -> Self {
        let values = [("2:[(0,2),(1,3)]", 1), ("2:[(0,1),(2,3)]", 0)]
            .into_iter()
            .map(|(d, v)| (d.parse().unwrap(), int(v)))
            .collect();
        Self::new(2, values).expect("c2 satisfies 4T")
    }

    /// The primitive degree-3 system: 2 on the triangle `(0,3),(1,4),(2,5)`,
    /// 1 on `(0,2),(1,4),(3,5)`, and 0 on the three split diagrams.
    pub fn degree3() -> Self {
        let values = [
            ("3:[(0,1),(2,3),(4,5)]", 0),
            ("3:[(0,1),(2,4),(3,5)]", 0),
            ("3:[(0,1),(2,5),(3,4)]", 0),
            ("3:[(0,2),(1,4),(3,5)]", 1),
            ("3:[(0,3),(1,4),(2,5)]", 2),
        ]
        .into_iter()
        .map(|(d, v)| (d.parse().unwrap(), int(v)))
        .collect();
        Self::new(3, values).expect("degree-3 system satisfies 4T")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    pub fn values(&self) -> &BTreeMap<ChordDiagram, BigRational> {
        &self.values
    }

    pub fn value(&self, d: &ChordDiagram) -> Result<BigRational> {
        self.values.get(&d.canonical()).cloned().ok_or_else(|| Error::Totality(d.to_string()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.values().all(|v| v.is_zero())
    }

    /// The system `d -> w(reverse(d))`.
    pub fn reversed(&self) -> Self {
        let values = self.values.iter().map(|(d, v)| (d.reverse().canonical(), v.clone())).collect();
        WeightSystem { degree: self.degree, values, verified: self.verified }
    }

    /// Split into parts even and odd under reversal of the circle.
    pub fn decompose_by_reversal(&self) -> (Self, Self) {
        let r = self.reversed();
        let half = BigRational::new(1.into(), 2.into());
        let even = self.values.iter().map(|(d, v)| (d.clone(), (v + &r.values[d]) * &half)).collect();
        let odd = self.values.iter().map(|(d, v)| (d.clone(), (v - &r.values[d]) * &half)).collect();
        (
            WeightSystem { degree: self.degree, values: even, verified: self.verified },
            WeightSystem { degree: self.degree, values: odd, verified: self.verified },
        )
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let (degree, values) = Self::parse_json(s)?;
        Self::new(degree, values)
    }

    /// Like [`WeightSystem::from_json`] without the 4T check.
    pub fn from_json_unverified(s: &str) -> Result<Self> {
        let (degree, values) = Self::parse_json(s)?;
        Self::new_unverified(degree, values)
    }

    fn parse_json(s: &str) -> Result<(usize, BTreeMap<ChordDiagram, BigRational>)> {
        let j: WeightJson = serde_json::from_str(s)?;
        let mut values = BTreeMap::new();
        for (d, v) in j.values {
            values.insert(d.parse()?, parse_rational(&v)?);
        }
        Ok((j.degree, values))
    }

    pub fn to_json(&self) -> String {
        let j = WeightJson {
            degree: self.degree,
            values: self.values.iter().map(|(d, v)| (d.to_string(), v.to_string())).collect(),
        };
        serde_json::to_string_pretty(&j).expect("serializable")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum S1Parity {
    Even,
    Odd,
    Mixed,
}

/// Parity under the antipodal map of R^3 (`(-1)^degree`) and under reversal of
/// the circle. The zero system counts as even for both.
pub fn parity(w: &WeightSystem) -> (Parity, S1Parity) {
    if w.is_zero() {
        return (Parity::Even, S1Parity::Even);
    }
    let r3 = if w.degree % 2 == 0 { Parity::Even } else { Parity::Odd };
    let r = w.reversed();
    let s1 = if r.values == w.values {
        S1Parity::Even
    } else if w.values.iter().all(|(d, v)| r.values[d] == -v.clone()) {
        S1Parity::Odd
    } else {
        S1Parity::Mixed
    };
    (r3, s1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnomalyCase {
    Vanishes,
    WritheCorrectionClass,
    OneFormCorrectionClass,
}

pub fn anomaly_case(w: &WeightSystem) -> Result<AnomalyCase> {
    Ok(match parity(w) {
        (_, S1Parity::Mixed) => {
            return Err(Error::Parameter("mixed circle parity; decompose the system by reversal first".into()))
        }
        (Parity::Even, S1Parity::Even) | (Parity::Odd, S1Parity::Odd) => AnomalyCase::Vanishes,
        (Parity::Odd, S1Parity::Even) => AnomalyCase::WritheCorrectionClass,
        (Parity::Even, S1Parity::Odd) => AnomalyCase::OneFormCorrectionClass,
    })
}

/// Signed number of isomorphisms from the chord graph `g` onto `d` that
/// preserve the direction of the circle. Each isomorphism is weighted by
/// whether it carries the orientation of `g` to that of `d`.
pub fn chord_evaluation(g: &TrivalentGraph, d: &ChordDiagram) -> Result<i64> {
    if g.n_internal() != 0 {
        return Err(Error::Parameter("chord evaluation needs a graph without internal vertices".into()));
    }
    if g.degree() != d.degree() {
        return Err(Error::Parameter(format!("degree {} graph against degree {} diagram", g.degree(), d.degree())));
    }
    let dg = TrivalentGraph::from_chord_diagram(d);
    let n = g.n_cycle();
    let reference = Labelling::reference(g);
    let base = epsilon_sign(g, &reference)?;
    let mut total = 0i64;
    for r in 0..n.max(1) {
        let mut phi = vec![0; n];
        for (p, &v) in g.cycle().iter().enumerate() {
            phi[v] = (p + r) % n;
        }
        let image: Option<Vec<usize>> = g
            .edges()
            .iter()
            .map(|&[u, v]| dg.edges().iter().position(|&[a, b]| (a, b) == (phi[u], phi[v]) || (a, b) == (phi[v], phi[u])))
            .collect();
        let Some(image) = image else { continue };
        let mut lab = reference.clone();
        for v in 0..n {
            lab.vertex_labels[phi[v]] = reference.vertex_labels[v];
        }
        lab.edge_order = reference.edge_order.iter().map(|&e| image[e]).collect();
        lab.directions = reference.directions.iter().map(|&[s, t]| [phi[s], phi[t]]).collect();
        total += (epsilon_sign(&dg, &lab)? * base) as i64;
    }
    Ok(total)
}

impl std::fmt::Display for WeightSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (d, v) in &self.values {
            writeln!(f, "{d} -> {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chord(s: &str) -> TrivalentGraph {
        TrivalentGraph::from_chord_diagram(&s.parse().unwrap())
    }

    #[test]
    fn json_round_trip() {
        let w = WeightSystem::degree3();
        let back = WeightSystem::from_json(&w.to_json()).unwrap();
        assert_eq!(back, w);
        let partial = r#"{"degree":2,"values":[["2:[(0,2),(1,3)]","1"]]}"#;
        assert!(matches!(WeightSystem::from_json(partial), Err(Error::Totality(_))));
        let frac = r#"{"degree":2,"values":[["2:[(0,2),(1,3)]","1/2"],["2:[(0,1),(2,3)]","0"]]}"#;
        assert_eq!(WeightSystem::from_json(frac).unwrap().value(&"2:[(1,3),(0,2)]".parse().unwrap()).unwrap(), BigRational::new(1.into(), 2.into()));
    }

    #[test]
    fn parities() {
        assert_eq!(parity(&WeightSystem::c2()), (Parity::Even, S1Parity::Even));
        assert_eq!(parity(&WeightSystem::degree3()), (Parity::Odd, S1Parity::Even));
        assert_eq!(parity(&WeightSystem::zero(3).unwrap()), (Parity::Even, S1Parity::Even));
        assert_eq!(anomaly_case(&WeightSystem::c2()).unwrap(), AnomalyCase::Vanishes);
        assert_eq!(anomaly_case(&WeightSystem::degree3()).unwrap(), AnomalyCase::WritheCorrectionClass);
    }

    #[test]
    fn anomaly_table_and_mixed() {
        // An unverified degree-4 system odd under reversal.
        let ds = enumerate_chord_diagrams(4).unwrap();
        let d = ds.iter().find(|d| d.reverse().canonical() != **d).unwrap().clone();
        let mut values: BTreeMap<_, _> = ds.iter().map(|x| (x.clone(), BigRational::zero())).collect();
        values.insert(d.clone(), int(1));
        values.insert(d.reverse().canonical(), int(-1));
        let odd = WeightSystem::new_unverified(4, values.clone()).unwrap();
        assert_eq!(parity(&odd), (Parity::Even, S1Parity::Odd));
        assert_eq!(anomaly_case(&odd).unwrap(), AnomalyCase::OneFormCorrectionClass);
        values.insert(d.reverse().canonical(), int(0));
        let mixed = WeightSystem::new_unverified(4, values).unwrap();
        assert_eq!(parity(&mixed).1, S1Parity::Mixed);
        assert!(anomaly_case(&mixed).is_err());
        let (e, o) = mixed.decompose_by_reversal();
        assert_eq!(parity(&e).1, S1Parity::Even);
        assert_eq!(parity(&o).1, S1Parity::Odd);
    }

    #[test]
    fn chord_evaluations() {
        let x = chord("2:[(0,2),(1,3)]");
        let cross: ChordDiagram = "2:[(0,2),(1,3)]".parse().unwrap();
        let nested: ChordDiagram = "2:[(0,1),(2,3)]".parse().unwrap();
        assert_eq!(chord_evaluation(&x, &cross).unwrap(), 4);
        assert_eq!(chord_evaluation(&x, &nested).unwrap(), 0);
        assert_eq!(chord_evaluation(&chord("2:[(0,1),(2,3)]"), &nested).unwrap(), 2);
        for d in enumerate_chord_diagrams(3).unwrap() {
            let g = TrivalentGraph::from_chord_diagram(&d);
            assert_eq!(chord_evaluation(&g, &d).unwrap() as usize, g.automorphism_count());
        }
    }
}
