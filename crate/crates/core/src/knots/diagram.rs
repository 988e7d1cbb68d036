use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{circle_offset, Curve, ParametricKnot, Shape, V3};
use crate::error::{Error, Result};

const MAX_RETRIES: u64 = 20;
const GENERIC_TOL: f64 = 1e-6;

/// One crossing seen from `+dir`: the over strand has the larger coordinate
/// along `dir`, and the sign is that of `(T_over x T_under) . dir`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub s_under: f64,
    pub s_over: f64,
    pub sign: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneDiagram {
    /// The projection direction actually used, after any jitter.
    pub dir: [f64; 3],
    pub crossings: Vec<Crossing>,
}

impl PlaneDiagram {
    pub fn direction(&self) -> V3 {
        V3::from(self.dir)
    }
}

/// Orthonormal `(e1, e2)` with `e1 x e2 = dir`.
pub fn projection_basis(dir: &V3) -> (V3, V3) {
    let d = dir.normalize();
    let seed = if d.x.abs() < 0.9 { V3::x() } else { V3::y() };
    let e1 = (seed - d * d.dot(&seed)).normalize();
    (e1, d.cross(&e1))
}

pub fn writhe(d: &PlaneDiagram) -> i64 {
    d.crossings.iter().map(|c| c.sign as i64).sum()
}

struct Raw {
    s_a: f64,
    s_b: f64,
    a_over: bool,
    sign: i32,
}

fn samples(k: &dyn Curve) -> Vec<f64> {
    let n = match k.segments() {
        Some(m) => m * 2048usize.div_ceil(m),
        None => 2048,
    };
    (0..n).map(|i| i as f64 / n as f64).collect()
}

/// Crossings between `a` and `b` (or of `a` with itself) for one direction.
fn crossings_once(a: &dyn Curve, b: Option<&dyn Curve>, dir: &V3) -> Result<Vec<Raw>> {
    let (e1, e2) = projection_basis(dir);
    let proj = |x: &V3| [x.dot(&e1), x.dot(&e2)];
    let same = b.is_none();
    let b = b.unwrap_or(a);
    let (sa, sb) = (samples(a), samples(b));
    let pa: Vec<[f64; 2]> = sa.iter().map(|&s| proj(&a.point(s))).collect();
    let pb: Vec<[f64; 2]> = sb.iter().map(|&s| proj(&b.point(s))).collect();
    for (k, ss) in [(a, &sa), (b, &sb)] {
        for &s in ss.iter() {
            let t = k.tangent(s);
            let p = proj(&t);
            if p[0].hypot(p[1]) < GENERIC_TOL * t.norm() {
                return Err(Error::Genericity(format!("the curve runs along the projection direction near s = {s}")));
            }
        }
    }
    let (na, nb) = (sa.len(), sb.len());
    let scale = a.radius().max(b.radius()).max(1e-300);
    let mut found: Vec<Raw> = Vec::new();
    for i in 0..na {
        let (p0, p1) = (pa[i], pa[(i + 1) % na]);
        let (lo_x, hi_x) = (p0[0].min(p1[0]), p0[0].max(p1[0]));
        let (lo_y, hi_y) = (p0[1].min(p1[1]), p0[1].max(p1[1]));
        let start = if same { i + 2 } else { 0 };
        for j in start..nb {
            if same && (j + 1) % na == i {
                continue;
            }
            let (q0, q1) = (pb[j], pb[(j + 1) % nb]);
            if q0[0].max(q1[0]) < lo_x || q0[0].min(q1[0]) > hi_x || q0[1].max(q1[1]) < lo_y || q0[1].min(q1[1]) > hi_y {
                continue;
            }
            let m = Matrix2::new(p1[0] - p0[0], q0[0] - q1[0], p1[1] - p0[1], q0[1] - q1[1]);
            let Some(inv) = m.try_inverse() else { continue };
            let uv = inv * nalgebra::Vector2::new(q0[0] - p0[0], q0[1] - p0[1]);
            if !(0.0..=1.0).contains(&uv[0]) || !(0.0..=1.0).contains(&uv[1]) {
                continue;
            }
            let mut s1 = sa[i] + uv[0] / na as f64;
            let mut s2 = sb[j] + uv[1] / nb as f64;
            // Newton on the true curves.
            for _ in 0..30 {
                let f = proj(&(a.point(s1) - b.point(s2)));
                let (t1, t2) = (proj(&a.tangent(s1)), proj(&b.tangent(s2)));
                let jm = Matrix2::new(t1[0], -t2[0], t1[1], -t2[1]);
                let Some(ji) = jm.try_inverse() else { break };
                let step = ji * nalgebra::Vector2::new(f[0], f[1]);
                s1 -= step[0];
                s2 -= step[1];
                if step.norm() < 1e-15 {
                    break;
                }
            }
            let (s1, s2) = (s1.rem_euclid(1.0), s2.rem_euclid(1.0));
            let f = proj(&(a.point(s1) - b.point(s2)));
            if f[0].hypot(f[1]) > 1e-9 * scale {
                return Err(Error::Genericity("crossing refinement did not converge".into()));
            }
            let (ta, tb) = (a.tangent(s1), b.tangent(s2));
            let (t1, t2) = (proj(&ta), proj(&tb));
            let cross = t1[0] * t2[1] - t1[1] * t2[0];
            if cross.abs() < GENERIC_TOL * t1[0].hypot(t1[1]) * t2[0].hypot(t2[1]) {
                return Err(Error::Genericity("projection has a tangency".into()));
            }
            if let Some(m) = a.segments() {
                let corner = |s: f64| ((s * m as f64).round() - s * m as f64).abs() < 1e-9;
                if corner(s1) || b.segments().is_some_and(|mb| ((s2 * mb as f64).round() - s2 * mb as f64).abs() < 1e-9) {
                    return Err(Error::Genericity("a polygon corner projects onto another segment".into()));
                }
            }
            let dh = (a.point(s1) - b.point(s2)).dot(dir);
            if dh.abs() < 1e-9 * scale {
                return Err(Error::Genericity("the curves meet along the projection direction".into()));
            }
            let a_over = dh > 0.0;
            let (to, tu) = if a_over { (ta, tb) } else { (tb, ta) };
            let sign = if to.cross(&tu).dot(dir) > 0.0 { 1 } else { -1 };
            let dup = found.iter().find(|r| {
                circle_offset(r.s_a, s1).abs() < GENERIC_TOL && circle_offset(r.s_b, s2).abs() < GENERIC_TOL
            });
            match dup {
                Some(r) if circle_offset(r.s_a, s1).abs() < 1e-9 && circle_offset(r.s_b, s2).abs() < 1e-9 => continue,
                Some(_) => return Err(Error::Genericity("two crossings nearly coincide".into())),
                None => found.push(Raw { s_a: s1, s_b: s2, a_over, sign }),
            }
        }
    }
    let all: Vec<f64> = found.iter().flat_map(|r| [r.s_a, r.s_b]).collect();
    if same {
        for (i, x) in all.iter().enumerate() {
            if all[i + 1..].iter().any(|y| circle_offset(*x, *y).abs() < GENERIC_TOL) {
                return Err(Error::Genericity("crossing parameters nearly coincide".into()));
            }
        }
    }
    Ok(found)
}

fn jittered(dir: &V3, attempt: u64) -> V3 {
    if attempt == 0 {
        return dir.normalize();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(attempt);
    let j = V3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    (dir.normalize() + j * 1e-3).normalize()
}

fn with_retries<T>(dir: &V3, mut f: impl FnMut(&V3) -> Result<T>) -> Result<T> {
    if dir.norm() == 0.0 || !dir.iter().all(|x| x.is_finite()) {
        return Err(Error::Parameter("projection direction must be a nonzero vector".into()));
    }
    let mut last = None;
    for attempt in 0..=MAX_RETRIES {
        match f(&jittered(dir, attempt)) {
            Err(Error::Genericity(m)) => last = Some(m),
            other => return other,
        }
    }
    Err(Error::Genericity(format!("no generic direction near the requested one: {}", last.unwrap_or_default())))
}

/// The plane diagram of `k` seen from `+dir`, jittering `dir` if it is not generic.
pub fn extract_crossings(k: &dyn Curve, dir: &V3) -> Result<PlaneDiagram> {
    with_retries(dir, |d| {
        let mut crossings: Vec<Crossing> = crossings_once(k, None, d)?
            .into_iter()
            .map(|r| {
                let (s_over, s_under) = if r.a_over { (r.s_a, r.s_b) } else { (r.s_b, r.s_a) };
                Crossing { s_under, s_over, sign: r.sign }
            })
            .collect();
        crossings.sort_by(|x, y| x.s_over.min(x.s_under).total_cmp(&y.s_over.min(y.s_under)));
        Ok(PlaneDiagram { dir: [d.x, d.y, d.z], crossings })
    })
}

/// Signed count of the crossings where `b` passes over `a`; the count of `a`
/// over `b` is computed too and must agree.
pub fn combinatorial_linking(a: &dyn Curve, b: &dyn Curve, dir: &V3) -> Result<i64> {
    with_retries(dir, |d| {
        let raw = crossings_once(a, Some(b), d)?;
        let b_over: i64 = raw.iter().filter(|r| !r.a_over).map(|r| r.sign as i64).sum();
        let a_over: i64 = raw.iter().filter(|r| r.a_over).map(|r| r.sign as i64).sum();
        if a_over != b_over {
            return Err(Error::Genericity(format!("over/under counts disagree ({a_over} vs {b_over})")));
        }
        Ok(b_over)
    })
}

/// How a crossing of a template diagram is realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingState {
    Keep,
    Switch,
    /// Both strands in the plane: a transverse double point.
    Flat,
}

/// Flatten `base` onto the plane normal to the diagram direction, keeping each
/// crossing by small bumps of height `height`.
pub fn almost_planar(base: &ParametricKnot, dir: &V3, height: f64) -> Result<ParametricKnot> {
    let d = extract_crossings(base, dir)?;
    almost_planar_with(base, &d, &vec![CrossingState::Keep; d.crossings.len()], height)
}

/// Flatten `base` along `diagram.dir`, realizing crossing `i` as `states[i]`.
pub fn almost_planar_with(
    base: &ParametricKnot,
    diagram: &PlaneDiagram,
    states: &[CrossingState],
    height: f64,
) -> Result<ParametricKnot> {
    if states.len() != diagram.crossings.len() {
        return Err(Error::Parameter(format!("{} states for {} crossings", states.len(), diagram.crossings.len())));
    }
    if !(height > 0.0) {
        return Err(Error::Parameter("bump height must be positive".into()));
    }
    let dir = diagram.direction().normalize();
    let scale = base.radius();
    for c in &diagram.crossings {
        let gap = base.point(c.s_over) - base.point(c.s_under);
        if (gap - dir * gap.dot(&dir)).norm() > 1e-6 * scale {
            return Err(Error::Structure(format!("crossing at ({}, {}) does not lie on the curve", c.s_under, c.s_over)));
        }
    }
    let params: Vec<f64> = diagram.crossings.iter().flat_map(|c| [c.s_over, c.s_under]).collect();
    let mut sep = 0.5f64;
    for (i, x) in params.iter().enumerate() {
        for y in &params[i + 1..] {
            sep = sep.min(circle_offset(*x, *y).abs());
        }
    }
    let width = (sep / 3.0).min(0.05);
    let mut bumps = Vec::new();
    for (c, st) in diagram.crossings.iter().zip(states) {
        match st {
            CrossingState::Keep => bumps.extend([(c.s_over, height), (c.s_under, -height)]),
            CrossingState::Switch => bumps.extend([(c.s_over, -height), (c.s_under, height)]),
            CrossingState::Flat => {}
        }
    }
    Ok(ParametricKnot {
        name: format!("almost_planar({})", base.name),
        shape: Shape::AlmostPlanar { base: Box::new(base.clone()), dir, bumps, width },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knots::{perturb, PolygonalKnot};

    /// Independent oracle: dense grid over parameter pairs, counting sign
    /// changes of the two projected coordinate differences.
    fn grid_crossings(k: &dyn Curve, dir: &V3, n: usize) -> usize {
        let (e1, e2) = projection_basis(dir);
        let pts: Vec<[f64; 2]> = (0..n).map(|i| k.point(i as f64 / n as f64)).map(|x| [x.dot(&e1), x.dot(&e2)]).collect();
        let mut count = 0;
        for i in 0..n {
            for j in i + 2..n {
                if (j + 1) % n == i {
                    continue;
                }
                let (p0, p1, q0, q1) = (pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]);
                let o = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                if o(p0, p1, q0) * o(p0, p1, q1) < 0.0 && o(q0, q1, p0) * o(q0, q1, p1) < 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn standard_diagrams() {
        let z = V3::z();
        assert!(extract_crossings(&ParametricKnot::unknot(), &z).unwrap().crossings.is_empty());
        let t = extract_crossings(&ParametricKnot::trefoil(), &z).unwrap();
        assert_eq!(t.crossings.len(), 3);
        assert_eq!(grid_crossings(&ParametricKnot::trefoil(), &t.direction(), 3000), 3);
        assert_eq!(writhe(&t).abs(), 3);
        let f = extract_crossings(&ParametricKnot::figure8(), &z).unwrap();
        assert_eq!(f.crossings.len(), grid_crossings(&ParametricKnot::figure8(), &f.direction(), 3000));
        assert_eq!(f.crossings.len(), 4);
        assert_eq!(writhe(&f), 0);
        assert_eq!(writhe(&PlaneDiagram { dir: [0.0, 0.0, 1.0], crossings: vec![] }), 0);
    }

    #[test]
    fn writhe_depends_on_direction() {
        let k = ParametricKnot::trefoil();
        let ws: Vec<i64> = [V3::z(), V3::x(), V3::new(1.0, 2.0, 0.3), V3::new(0.2, -1.0, 0.7)]
            .iter()
            .map(|d| writhe(&extract_crossings(&k, d).unwrap()))
            .collect();
        assert!(ws.iter().any(|&w| w != ws[0]), "{ws:?}");
    }

    #[test]
    fn linking_numbers() {
        let (a, b) = ParametricKnot::hopf();
        let dirs = [V3::z(), V3::new(0.3, 0.5, 0.8), V3::new(-1.0, 0.2, 0.1), V3::new(0.1, 1.0, -0.4), V3::new(0.7, -0.7, 0.2)];
        for d in &dirs {
            assert_eq!(combinatorial_linking(&a, &b, d).unwrap(), 1);
            assert_eq!(combinatorial_linking(&b, &a, d).unwrap(), 1);
            let far = ParametricKnot::circle(V3::new(5.0, 0.0, 0.0), 1.0, V3::new(0.2, 0.3, 1.0)).unwrap();
            assert_eq!(combinatorial_linking(&a, &far, d).unwrap(), 0);
            let t0 = ParametricKnot::torus_link(2, 4, 0).unwrap();
            let t1 = ParametricKnot::torus_link(2, 4, 1).unwrap();
            assert_eq!(combinatorial_linking(&t0, &t1, d).unwrap().abs(), 2);
        }
        // Reversing one component negates the linking number.
        assert_eq!(combinatorial_linking(&a, &b.reparametrized(0.0, true), &V3::z()).unwrap(), -1);
    }

    #[test]
    fn polygon_diagram_matches_smooth() {
        let poly = ParametricKnot::trefoil().to_polygon(90).unwrap();
        let d = extract_crossings(&poly, &V3::new(0.01, 0.02, 1.0)).unwrap();
        assert_eq!(d.crossings.len(), 3);
        let bad = PolygonalKnot::new(vec![V3::zeros(), V3::x(), V3::new(1.0, 1.0, 0.0), V3::y()]).unwrap();
        assert!(extract_crossings(&bad, &V3::z()).unwrap().crossings.is_empty());
    }

    #[test]
    fn almost_planar_knots() {
        let t = ParametricKnot::trefoil();
        let ap = almost_planar(&t, &V3::z(), 0.05).unwrap();
        let d = extract_crossings(&ap, &V3::z()).unwrap();
        assert_eq!(d.crossings.len(), 3);
        assert_eq!(writhe(&d).abs(), 3);
        for i in 0..200 {
            let x = ap.point(i as f64 / 200.0);
            assert!(x.z.abs() <= 0.05 + 1e-12);
        }
        let u = almost_planar(&ParametricKnot::unknot(), &V3::z(), 0.05).unwrap();
        assert!((0..50).all(|i| u.point(i as f64 / 50.0).z.abs() < 1e-15));
        let f = almost_planar(&ParametricKnot::figure8(), &V3::z(), 0.05).unwrap();
        assert_eq!(writhe(&extract_crossings(&f, &V3::z()).unwrap()), 0);
        let td = extract_crossings(&t, &V3::z()).unwrap();
        let sw = almost_planar_with(&t, &td, &[CrossingState::Switch; 3], 0.05).unwrap();
        assert_eq!(writhe(&extract_crossings(&sw, &V3::z()).unwrap()), -writhe(&td));
        assert!(almost_planar_with(&t, &td, &[CrossingState::Keep; 2], 0.05).is_err());
        let other = extract_crossings(&ParametricKnot::figure8(), &V3::z()).unwrap();
        assert!(almost_planar_with(&t, &other, &vec![CrossingState::Keep; other.crossings.len()], 0.05).is_err());
        let _ = perturb(&t, 0.05, 1).unwrap();
    }

    #[test]
    fn non_generic_direction_is_jittered() {
        // Seen along x the xz-circle projects to a segment: every point is a tangency.
        let c = ParametricKnot::circle(V3::zeros(), 1.0, V3::y()).unwrap();
        let d = extract_crossings(&c, &V3::z()).unwrap();
        assert!(d.crossings.is_empty());
        assert_ne!(d.dir, [0.0, 0.0, 1.0]);
    }
}
