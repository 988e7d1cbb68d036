//! Exact signed counts of rod configurations on polygonal knots.
//!
//! Replacing the area form of every propagator by the average of point
//! masses at `d` and `-d` turns each graph integral into a signed count of
//! configurations whose rods point in prescribed directions. With three
//! directions and every assignment of them to the rods, the degree-2
//! invariant becomes
//!
//! ```text
//! v2 = (sum over chord pairs) / 24 + (sum over tripods) / 48
//! ```
//!
//! where a chord pair is two interleaved chords parallel to two different
//! directions, a tripod is three knot points joined to one free point by rods
//! parallel to the three directions, and each solution counts with the sign
//! of the graph integrand there. On polygons every constraint is linear.

use nalgebra::{Matrix3, Matrix6, Vector2, Vector3, Vector6};
use num::{BigInt, BigRational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knots::{Curve, PolygonalKnot, V3};

/// Smallest angle between two directions, or between a direction and a segment.
pub const ANGLE_TOL: f64 = 1e-6;

/// Parameters closer than this to a polygon vertex make a solution non-generic.
const CORNER_TOL: f64 = 1e-10;

/// Unit rod directions, pairwise non-parallel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct DirectionSet {
    dirs: Vec<V3>,
}

impl TryFrom<Vec<[f64; 3]>> for DirectionSet {
    type Error = Error;
    fn try_from(v: Vec<[f64; 3]>) -> Result<Self> {
        DirectionSet::new(v.into_iter().map(V3::from).collect())
    }
}

impl From<DirectionSet> for Vec<[f64; 3]> {
    fn from(d: DirectionSet) -> Self {
        d.dirs.iter().map(|v| [v.x, v.y, v.z]).collect()
    }
}

impl DirectionSet {
    /// Normalizes each vector; rejects zero vectors and parallel pairs.
    pub fn new(dirs: Vec<V3>) -> Result<Self> {
        let mut out = Vec::with_capacity(dirs.len());
        for d in dirs {
            let n = d.norm();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::Parameter("direction vectors must be nonzero".into()));
            }
            out.push(d / n);
        }
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                if out[i].cross(&out[j]).norm() < ANGLE_TOL {
                    return Err(Error::Genericity(format!("directions {i} and {j} are parallel")));
                }
            }
        }
        Ok(DirectionSet { dirs: out })
    }

    /// `n` directions uniform on the sphere.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dirs = (0..n)
            .map(|_| {
                let z: f64 = rng.gen_range(-1.0..1.0);
                let phi = std::f64::consts::TAU * rng.gen::<f64>();
                let r = (1.0 - z * z).sqrt();
                V3::new(r * phi.cos(), r * phi.sin(), z)
            })
            .collect();
        Self::new(dirs)
    }

    pub fn dirs(&self) -> &[V3] {
        &self.dirs
    }

    pub fn rotated(&self, r: &Matrix3<f64>) -> Self {
        DirectionSet { dirs: self.dirs.iter().map(|d| r * d).collect() }
    }
}

/// A rod configuration: knot parameters, the free node of a tripod, the
/// direction index of each rod (rod `i` starts at knot parameter `i`) and the
/// sign of the solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TinkertoySolution {
    pub knot_params: Vec<f64>,
    pub node: Option<[f64; 3]>,
    pub directions: Vec<usize>,
    pub sign: i32,
    /// Set for a tripod shrunk into the polygon vertex of this index; the knot
    /// parameters and node are then that vertex.
    pub corner: Option<usize>,
}

/// A chord `K(s1) -> K(s2)` pointing along `+d`, with the local degree of the
/// direction map `(s1, s2) -> S^2` there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chord {
    pub s1: f64,
    pub s2: f64,
    pub sign: i32,
}

fn scale_of(k: &PolygonalKnot) -> f64 {
    k.vertices().iter().map(|v| v.norm()).fold(1.0, f64::max)
}

fn check_segments(k: &PolygonalKnot, d: &V3) -> Result<()> {
    for i in 0..k.n_segments() {
        let (a, b) = k.segment(i);
        if (b - a).normalize().cross(d).norm() < ANGLE_TOL {
            return Err(Error::Genericity(format!("segment {i} is parallel to {d:?}")));
        }
    }
    Ok(())
}

fn corner(u: f64) -> bool {
    u.abs() < CORNER_TOL || (u - 1.0).abs() < CORNER_TOL
}

fn param(k: &PolygonalKnot, seg: usize, u: f64) -> f64 {
    (seg as f64 + u) / k.n_segments() as f64
}

/// `sign(G(s1, s2))`, the sign of the chord integrand.
fn chord_sign(k: &PolygonalKnot, s1: f64, s2: f64) -> i32 {
    let g = k.tangent(s1).cross(&k.tangent(s2)).dot(&(k.point(s1) - k.point(s2)));
    if g > 0.0 {
        1
    } else {
        -1
    }
}

/// All chords of `k` parallel to `+d`, as ordered pairs `(s1, s2)` with
/// `K(s2) - K(s1)` a positive multiple of `d`; the chords parallel to `-d`
/// are the same pairs reversed. Sorted by `(s1, s2)`.
pub fn find_chords(k: &PolygonalKnot, d: &V3) -> Result<Vec<Chord>> {
    let d = d.normalize();
    check_segments(k, &d)?;
    let m = k.n_segments();
    let scale = scale_of(k);
    let mut out = Vec::new();
    for i in 0..m {
        let (pi, qi) = k.segment(i);
        let ui = qi - pi;
        for j in 0..m {
            // Two segments sharing a vertex only meet the direction there.
            if i == j || (i + 1) % m == j || (j + 1) % m == i {
                continue;
            }
            let (pj, qj) = k.segment(j);
            let uj = qj - pj;
            let a = Matrix3::from_columns(&[ui, -uj, -d]);
            let rhs = pj - pi;
            let Some(sol) = solve3(&a, &rhs, scale)? else { continue };
            let (u, v, t) = (sol.x, sol.y, sol.z);
            if t <= 0.0 || !(-CORNER_TOL..=1.0 + CORNER_TOL).contains(&u) || !(-CORNER_TOL..=1.0 + CORNER_TOL).contains(&v) {
                continue;
            }
            if corner(u) || corner(v) {
                return Err(Error::Genericity(format!("a chord along {d:?} ends at a vertex (segments {i}, {j})")));
            }
            if t < 1e-9 * scale {
                return Err(Error::Genericity(format!("a chord along {d:?} has zero length")));
            }
            let (s1, s2) = (param(k, i, u), param(k, j, v));
            out.push(Chord { s1, s2, sign: chord_sign(k, s1, s2) });
        }
    }
    out.sort_by(|a, b| (a.s1, a.s2).partial_cmp(&(b.s1, b.s2)).unwrap());
    Ok(out)
}

/// Solve a 3x3 system; `None` when it is singular and inconsistent, an error
/// when singular with solutions.
fn solve3(a: &Matrix3<f64>, rhs: &V3, scale: f64) -> Result<Option<Vector3<f64>>> {
    let cols = [a.column(0).norm(), a.column(1).norm(), a.column(2).norm()];
    let det = a.determinant();
    if det.abs() > 1e-12 * cols.iter().product::<f64>() {
        return Ok(a.lu().solve(rhs));
    }
    let (c0, c1, c2) = (a.column(0).into_owned(), a.column(1).into_owned(), a.column(2).into_owned());
    let n = if c0.cross(&c1).norm() > 1e-12 * cols[0] * cols[1] {
        c0.cross(&c1)
    } else if c0.cross(&c2).norm() > 1e-12 * cols[0] * cols[2] {
        c0.cross(&c2)
    } else {
        c1.cross(&c2)
    };
    if n.norm() == 0.0 || (n.normalize().dot(rhs)).abs() > 1e-9 * scale {
        return Ok(None);
    }
    Err(Error::Genericity("a degenerate family of rod positions".into()))
}

/// Tripods: knot points `K(s_i)` and a node `x` with `x - K(s_i)` parallel
/// to `dirs[i]` (either sign), one solution per geometric configuration,
/// listed with rod `i` on direction `i`.
///
/// The sign is that of the tripod integrand with legs taken in the cyclic
/// order of their knot points.
pub fn find_tripods(k: &PolygonalKnot, dirs: &DirectionSet) -> Result<Vec<TinkertoySolution>> {
    if dirs.dirs.len() != 3 {
        return Err(Error::Parameter(format!("a tripod needs 3 directions, got {}", dirs.dirs.len())));
    }
    let d = &dirs.dirs;
    for di in d {
        check_segments(k, di)?;
    }
    let m = k.n_segments();
    let scale = scale_of(k);
    let per_first: Vec<Result<Vec<TinkertoySolution>>> = (0..m)
        .into_par_iter()
        .map(|i0| {
            let mut out = Vec::new();
            for i1 in 0..m {
                for i2 in 0..m {
                    // Two feet on one segment force the node onto that segment.
                    if i0 == i1 || i1 == i2 || i0 == i2 {
                        continue;
                    }
                    if let Some(s) = tripod_on(k, [i0, i1, i2], d, scale)? {
                        out.push(s);
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::new();
    for r in per_first {
        out.extend(r?);
    }
    for v in 0..m {
        for sign in corner_tripods(k, v, d)? {
            let s = v as f64 / m as f64;
            let x = k.vertices()[v];
            out.push(TinkertoySolution {
                knot_params: vec![s; 3],
                node: Some(x.into()),
                directions: vec![0, 1, 2],
                sign,
                corner: Some(v),
            });
        }
    }
    Ok(out)
}

/// Signs of the tripods that live at vertex `v` once the corner is rounded off.
///
/// A polygon is the limit of curves whose corners are arcs of radius going to
/// zero. Tripods with all three feet near the arc persist at every radius and
/// are counted here on a model corner: the unit circle arc turning from the
/// incoming to the outgoing direction, with the two tangent rays attached.
/// Projecting the rods along the corner normal `n` makes the feet a homothetic
/// copy `P + k c_i` of the triangle `c_i = (d_i - (d_i.n) n) / (d_i.n)`.
fn corner_tripods(k: &PolygonalKnot, v: usize, d: &[V3]) -> Result<Vec<i32>> {
    let m = k.n_segments();
    let verts = k.vertices();
    let a = (verts[v] - verts[(v + m - 1) % m]).normalize();
    let b = (verts[(v + 1) % m] - verts[v]).normalize();
    let cross = a.cross(&b);
    if cross.norm() < ANGLE_TOL {
        return Ok(Vec::new());
    }
    let n = cross.normalize();
    let e2 = n.cross(&a);
    let theta = cross.norm().atan2(a.dot(&b));
    let mut c = [Vector2::zeros(); 3];
    for q in 0..3 {
        let dn = d[q].dot(&n);
        if dn.abs() < ANGLE_TOL {
            return Err(Error::Genericity(format!("direction {q} lies in the plane of the corner at vertex {v}")));
        }
        let t = (d[q] - n * dn) / dn;
        c[q] = Vector2::new(t.dot(&a), t.dot(&e2));
    }
    let model = CornerModel::new(theta);
    let mut signs = Vec::new();
    for (kappa, q) in model.homothets(&c) {
        let feet: Vec<(f64, Vector2<f64>, Vector2<f64>)> = (0..3)
            .map(|i| {
                let f = q * kappa + c[i] * kappa;
                let (key, tan) = model.locate(&f);
                (key, f, tan)
            })
            .collect();
        let lift = |w: &Vector2<f64>| a * w.x + e2 * w.y;
        let node = lift(&(q * kappa)) - n * kappa;
        let mut legs = feet.clone();
        legs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let cols: Vec<V3> = legs
            .iter()
            .map(|(_, f, t)| {
                let y = node - lift(f);
                y.cross(&lift(t)) / y.norm().powi(3)
            })
            .collect();
        signs.push(if Matrix3::from_columns(&cols).determinant() > 0.0 { 1 } else { -1 });
    }
    Ok(signs)
}

/// Unit circle arc `(sin psi, -cos psi)` for `psi` in `[0, theta]`, continued
/// by the tangent rays at both ends.
struct CornerModel {
    theta: f64,
    normal_b: Vector2<f64>,
    tangent_b: Vector2<f64>,
}

#[derive(Clone, Copy, PartialEq)]
enum Piece {
    In,
    Arc,
    Out,
}

impl CornerModel {
    fn new(theta: f64) -> Self {
        CornerModel {
            theta,
            normal_b: Vector2::new(theta.sin(), -theta.cos()),
            tangent_b: Vector2::new(theta.cos(), theta.sin()),
        }
    }

    /// Order along the curve and unit tangent at a point of the curve.
    fn locate(&self, f: &Vector2<f64>) -> (f64, Vector2<f64>) {
        match self.piece_of(f) {
            Some(Piece::In) => (f.x - 1e3, Vector2::new(1.0, 0.0)),
            Some(Piece::Out) => (self.theta + 1e3 + (f - self.tangent_point_b()).dot(&self.tangent_b), self.tangent_b),
            _ => {
                let psi = f.x.atan2(-f.y);
                (psi, Vector2::new(psi.cos(), psi.sin()))
            }
        }
    }

    fn tangent_point_b(&self) -> Vector2<f64> {
        self.normal_b
    }

    fn piece_of(&self, f: &Vector2<f64>) -> Option<Piece> {
        let on_line = |nrm: &Vector2<f64>| (f.dot(nrm) - 1.0).abs() < 1e-9;
        if on_line(&Vector2::new(0.0, -1.0)) && f.x < 0.0 {
            return Some(Piece::In);
        }
        if on_line(&self.normal_b) && (f - self.normal_b).dot(&self.tangent_b) > 0.0 {
            return Some(Piece::Out);
        }
        if (f.norm() - 1.0).abs() < 1e-9 {
            let psi = f.x.atan2(-f.y);
            if (0.0..=self.theta).contains(&psi) {
                return Some(Piece::Arc);
            }
        }
        None
    }

    /// All `(k, Q)` with `k (Q + c_i)` on the curve for every `i`, `k != 0`.
    fn homothets(&self, c: &[Vector2<f64>; 3]) -> Vec<(f64, Vector2<f64>)> {
        let na = Vector2::new(0.0, -1.0);
        let nb = self.normal_b;
        let mut cand: Vec<(f64, Vector2<f64>, [Piece; 3])> = Vec::new();
        // All three on the circle: Q is minus the circumcenter.
        if let Some(o) = circumcenter(c) {
            let r = (c[0] - o).norm();
            for kappa in [1.0 / r, -1.0 / r] {
                cand.push((kappa, -o, [Piece::Arc; 3]));
            }
        }
        for i in 0..3 {
            let (j, l) = ((i + 1) % 3, (i + 2) % 3);
            // Vertex i on one tangent line, j and l on the circle.
            for (nrm, piece) in [(na, Piece::In), (nb, Piece::Out)] {
                let m0 = -(c[j] + c[l]) / 2.0;
                let dj = c[j] - c[l];
                let e = Vector2::new(-dj.y, dj.x);
                for q in solve_line_circle(m0, e, c[i], nrm, c[j]) {
                    let mut pieces = [Piece::Arc; 3];
                    pieces[i] = piece;
                    if let Some(kappa) = line_scale(&q, &c[i], &nrm) {
                        cand.push((kappa, q, pieces));
                    }
                }
            }
            // Vertex i on the incoming line, j on the outgoing one, l on the circle.
            for j in [(i + 1) % 3, (i + 2) % 3] {
                let l = 3 - i - j;
                // (Q + c_i).na = (Q + c_j).nb is a line in Q.
                let g = na - nb;
                let rhs = c[j].dot(&nb) - c[i].dot(&na);
                if g.norm() < 1e-15 {
                    continue;
                }
                let m0 = g * (rhs / g.norm_squared());
                let e = Vector2::new(-g.y, g.x);
                for q in solve_line_circle(m0, e, c[i], na, c[l]) {
                    let mut pieces = [Piece::Arc; 3];
                    pieces[i] = Piece::In;
                    pieces[j] = Piece::Out;
                    if let Some(kappa) = line_scale(&q, &c[i], &na) {
                        cand.push((kappa, q, pieces));
                    }
                }
            }
        }
        let mut out: Vec<(f64, Vector2<f64>)> = Vec::new();
        for (kappa, q, pieces) in cand {
            let ok = (0..3).all(|i| self.piece_of(&((q + c[i]) * kappa)) == Some(pieces[i]));
            if ok && !out.iter().any(|(k2, q2)| (k2 - kappa).abs() < 1e-9 * kappa.abs() && (q2 - q).norm() < 1e-9 * (1.0 + q.norm())) {
                out.push((kappa, q));
            }
        }
        out
    }
}

/// `k` with `k (Q + c) . nrm = 1`.
fn line_scale(q: &Vector2<f64>, c: &Vector2<f64>, nrm: &Vector2<f64>) -> Option<f64> {
    let t = (q + c).dot(nrm);
    (t.abs() > 1e-300).then(|| 1.0 / t)
}

/// Points `Q = m0 + tau e` with `((Q + ci).nrm)^2 = |Q + cj|^2`.
fn solve_line_circle(m0: Vector2<f64>, e: Vector2<f64>, ci: Vector2<f64>, nrm: Vector2<f64>, cj: Vector2<f64>) -> Vec<Vector2<f64>> {
    let (p0, p1) = ((m0 + ci).dot(&nrm), e.dot(&nrm));
    let (w0, w1) = (m0 + cj, e);
    // (p0 + p1 tau)^2 - |w0 + w1 tau|^2 = 0
    let qa = p1 * p1 - w1.norm_squared();
    let qb = 2.0 * (p0 * p1 - w0.dot(&w1));
    let qc = p0 * p0 - w0.norm_squared();
    let roots: Vec<f64> = if qa.abs() < 1e-14 * (qb.abs() + qc.abs()) {
        if qb == 0.0 {
            Vec::new()
        } else {
            vec![-qc / qb]
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            Vec::new()
        } else {
            let sq = disc.sqrt();
            let r = -0.5 * (qb + qb.signum() * sq);
            let mut v = vec![r / qa];
            if r != 0.0 {
                v.push(qc / r);
            }
            v
        }
    };
    roots.into_iter().map(|t| m0 + e * t).collect()
}

fn circumcenter(c: &[Vector2<f64>; 3]) -> Option<Vector2<f64>> {
    let (b, d) = (c[1] - c[0], c[2] - c[0]);
    let den = 2.0 * (b.x * d.y - b.y * d.x);
    if den.abs() < 1e-300 {
        return None;
    }
    let (bb, dd) = (b.norm_squared(), d.norm_squared());
    Some(c[0] + Vector2::new(d.y * bb - b.y * dd, b.x * dd - d.x * bb) / den)
}

fn tripod_on(k: &PolygonalKnot, segs: [usize; 3], d: &[V3], scale: f64) -> Result<Option<TinkertoySolution>> {
    let mut p = [V3::zeros(); 3];
    let mut u = [V3::zeros(); 3];
    for (q, &s) in segs.iter().enumerate() {
        let (a, b) = k.segment(s);
        p[q] = a;
        u[q] = b - a;
    }
    // Unknowns (a0, a1, a2, t0, t1, t2): P_q + a_q u_q + t_q d_q is the same point for all q.
    let mut a = Matrix6::zeros();
    let mut rhs = Vector6::zeros();
    for (row, q) in [(0, 1), (3, 2)] {
        for r in 0..3 {
            a[(row + r, 0)] = u[0][r];
            a[(row + r, q)] = -u[q][r];
            a[(row + r, 3)] = d[0][r];
            a[(row + r, 3 + q)] = -d[q][r];
            rhs[row + r] = p[q][r] - p[0][r];
        }
    }
    let lu = a.lu();
    let det = lu.determinant();
    let norm: f64 = (0..6).map(|c| a.column(c).norm()).product();
    if det.abs() <= 1e-15 * norm {
        return degenerate_tripod(&a, &rhs, scale);
    }
    let Some(x) = lu.solve(&rhs) else { return Ok(None) };
    let inside = |v: f64| (-CORNER_TOL..=1.0 + CORNER_TOL).contains(&v);
    if !(inside(x[0]) && inside(x[1]) && inside(x[2])) {
        return Ok(None);
    }
    if corner(x[0]) || corner(x[1]) || corner(x[2]) {
        return Err(Error::Genericity(format!("a tripod rod ends at a polygon vertex (segments {segs:?})")));
    }
    if (0..3).any(|q| x[3 + q].abs() < 1e-9 * scale) {
        return Err(Error::Genericity(format!("a tripod node lies on the knot (segments {segs:?})")));
    }
    let node = p[0] + u[0] * x[0] + d[0] * x[3];
    for q in 0..3 {
        let foot = p[q] + u[q] * x[q];
        if (node - foot).normalize().cross(&d[q]).norm() > 1e-9 {
            return Err(Error::Numerical(format!("tripod rod {q} misses its direction (segments {segs:?})")));
        }
    }
    let params: Vec<f64> = (0..3).map(|q| param(k, segs[q], x[q])).collect();
    if (0..3).any(|q| (params[q] - params[(q + 1) % 3]).abs() < 1e-12) {
        return Err(Error::Genericity(format!("two tripod feet coincide (segments {segs:?})")));
    }
    Ok(Some(TinkertoySolution { sign: tripod_sign(k, &params, &node), knot_params: params, node: Some(node.into()), directions: vec![0, 1, 2], corner: None }))
}

fn degenerate_tripod(a: &Matrix6<f64>, rhs: &Vector6<f64>, scale: f64) -> Result<Option<TinkertoySolution>> {
    let svd = a.svd(true, true);
    let Some(x) = svd.solve(rhs, 1e-12).ok() else { return Ok(None) };
    if (a * x - rhs).norm() > 1e-9 * scale {
        return Ok(None);
    }
    if (0..3).all(|q| (-1.0..=2.0).contains(&x[q])) {
        return Err(Error::Genericity("a degenerate family of tripods".into()));
    }
    Ok(None)
}

/// Sign of the tripod integrand `det[V_0, V_1, V_2]` with legs in cyclic order.
fn tripod_sign(k: &PolygonalKnot, params: &[f64], node: &V3) -> i32 {
    let mut legs: Vec<f64> = params.to_vec();
    legs.sort_by(f64::total_cmp);
    let v: Vec<V3> = legs
        .iter()
        .map(|&s| {
            let y = node - k.point(s);
            y.cross(&k.tangent(s)) / y.norm().powi(3)
        })
        .collect();
    if Matrix3::from_columns(&v).determinant() > 0.0 {
        1
    } else {
        -1
    }
}

/// True when exactly one endpoint of chord `b` lies on the arc from `a.s1` to `a.s2`.
fn interleaved(a: &Chord, b: &Chord) -> bool {
    let on_arc = |x: f64| {
        let (lo, hi) = (a.s1.min(a.s2), a.s1.max(a.s2));
        x > lo && x < hi
    };
    on_arc(b.s1) != on_arc(b.s2)
}

/// Signed chord-pair and tripod counts for one direction set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TinkertoyCount {
    pub chord_pairs: i64,
    pub tripods: i64,
    pub positive_chord_pairs: usize,
    pub negative_chord_pairs: usize,
    pub positive_tripods: usize,
    pub negative_tripods: usize,
    /// Signed count of the tripods at polygon vertices, included in `tripods`.
    pub corner_tripods: i64,
}

impl TinkertoyCount {
    /// `chord_pairs / 24 + tripods / 48`.
    pub fn value(&self) -> BigRational {
        BigRational::new(BigInt::from(2 * self.chord_pairs + self.tripods), BigInt::from(48))
    }
}

/// Count chord pairs and tripods for one set of three directions.
pub fn count_v2(k: &PolygonalKnot, dirs: &DirectionSet) -> Result<TinkertoyCount> {
    if dirs.dirs.len() != 3 {
        return Err(Error::Parameter(format!("the degree-2 count needs 3 directions, got {}", dirs.dirs.len())));
    }
    let chords: Vec<Vec<Chord>> = dirs.dirs.iter().map(|d| find_chords(k, d)).collect::<Result<_>>()?;
    let (mut pos, mut neg) = (0usize, 0usize);
    for a in 0..3 {
        for b in a + 1..3 {
            for ca in &chords[a] {
                for cb in &chords[b] {
                    if interleaved(ca, cb) {
                        if ca.sign * cb.sign > 0 {
                            pos += 1;
                        } else {
                            neg += 1;
                        }
                    }
                }
            }
        }
    }
    let tripods = find_tripods(k, dirs)?;
    let tp = tripods.iter().filter(|t| t.sign > 0).count();
    let tn = tripods.len() - tp;
    Ok(TinkertoyCount {
        chord_pairs: pos as i64 - neg as i64,
        tripods: tp as i64 - tn as i64,
        positive_chord_pairs: pos,
        negative_chord_pairs: neg,
        positive_tripods: tp,
        negative_tripods: tn,
        corner_tripods: tripods.iter().filter(|t| t.corner.is_some()).map(|t| i64::from(t.sign)).sum(),
    })
}

/// Per-trial counts and their common value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TinkertoyReport {
    #[serde(serialize_with = "ser_rational")]
    pub value: BigRational,
    pub trials: Vec<(DirectionSet, TinkertoyCount)>,
}

fn ser_rational<S: serde::Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// The degree-2 invariant as an exact rational. Trial 0 uses `dirs`; the
/// other `trials - 1` use fixed pseudo-random rotations of it. All trials
/// must agree.
pub fn signed_count_v2(k: &PolygonalKnot, dirs: &DirectionSet, trials: usize) -> Result<TinkertoyReport> {
    if trials == 0 {
        return Err(Error::Parameter("at least one trial is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x7417_4e70);
    let mut sets = vec![dirs.clone()];
    while sets.len() < trials {
        let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ));
        sets.push(dirs.rotated(q.to_rotation_matrix().matrix()));
    }
    let counts: Vec<TinkertoyCount> = sets.iter().map(|s| count_v2(k, s)).collect::<Result<_>>()?;
    let value = counts[0].value();
    for (i, c) in counts.iter().enumerate().skip(1) {
        if c.value() != value {
            return Err(Error::Genericity(format!("trial {i} gives {}, trial 0 gives {value}", c.value())));
        }
    }
    Ok(TinkertoyReport { value, trials: sets.into_iter().zip(counts).collect() })
}

/// A planar convex polygon: `m` points of an ellipse in the xy-plane.
pub fn convex_unknot(m: usize) -> Result<PolygonalKnot> {
    PolygonalKnot::new(
        (0..m)
            .map(|i| {
                let t = std::f64::consts::TAU * (i as f64 + 0.1 * (i % 3) as f64) / m as f64;
                V3::new(1.3 * t.cos(), t.sin(), 0.0)
            })
            .collect(),
    )
}

/// The standard trefoil sampled at `m` points.
pub fn polygonal_trefoil(m: usize) -> Result<PolygonalKnot> {
    crate::knots::ParametricKnot::trefoil().to_polygon(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;
    use rand::Rng;

    /// Preimages of `d` under the direction map, found by mapping a fine
    /// triangulation of each segment pair to the sphere: (count, signed count).
    fn grid_chords(k: &PolygonalKnot, d: &V3, n: usize) -> (usize, i32) {
        let m = k.n_segments();
        let (mut count, mut signed) = (0, 0);
        for i in 0..m {
            for j in 0..m {
                if i == j || (i + 1) % m == j || (j + 1) % m == i {
                    continue;
                }
                let phi = |a: usize, b: usize| {
                    let s1 = (i as f64 + a as f64 / n as f64) / m as f64;
                    let s2 = (j as f64 + b as f64 / n as f64) / m as f64;
                    (k.point(s2) - k.point(s1)).normalize()
                };
                for a in 0..n {
                    for b in 0..n {
                        for t in [[phi(a, b), phi(a + 1, b), phi(a + 1, b + 1)], [phi(a, b), phi(a + 1, b + 1), phi(a, b + 1)]] {
                            let o = t[0].dot(&t[1].cross(&t[2]));
                            let w = [t[0].cross(&t[1]).dot(d), t[1].cross(&t[2]).dot(d), t[2].cross(&t[0]).dot(d)];
                            if t[0].dot(d) > 0.0 && w.iter().all(|x| x * o > 0.0) {
                                count += 1;
                                signed += if o > 0.0 { 1 } else { -1 };
                            }
                        }
                    }
                }
            }
        }
        (count, signed)
    }

    /// Tripods of a planar polygon in the xy-plane: the feet form a triangle of
    /// fixed shape scaled by the node height `h`. For each first foot on a
    /// fine grid and each sign of `h`, the second foot fixes `h`; count sign
    /// changes of the third foot's side of the curve.
    fn grid_planar_tripods(k: &PolygonalKnot, d: &DirectionSet, n: usize) -> usize {
        let flat = |v: &V3| nalgebra::Vector2::new(v.x / v.z, v.y / v.z);
        let w1 = flat(&d.dirs()[0]) - flat(&d.dirs()[1]);
        let w2 = flat(&d.dirs()[0]) - flat(&d.dirs()[2]);
        let poly: Vec<nalgebra::Vector2<f64>> = k.vertices().iter().map(|v| v.xy()).collect();
        let side = |p: nalgebra::Vector2<f64>| {
            let mut inside = false;
            for e in 0..poly.len() {
                let (a, b) = (poly[e], poly[(e + 1) % poly.len()]);
                if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y) {
                    inside = !inside;
                }
            }
            if inside {
                1.0
            } else {
                -1.0
            }
        };
        let ray_hit = |p: nalgebra::Vector2<f64>, w: nalgebra::Vector2<f64>| -> Option<f64> {
            let mut best: Option<f64> = None;
            for e in 0..poly.len() {
                let (a, b) = (poly[e], poly[(e + 1) % poly.len()]);
                let m = nalgebra::Matrix2::from_columns(&[w, a - b]);
                if let Some(x) = m.try_inverse().map(|inv| inv * (a - p)) {
                    if x[0] > 1e-9 && (0.0..1.0).contains(&x[1]) && best.map_or(true, |h| x[0] < h) {
                        best = Some(x[0]);
                    }
                }
            }
            best
        };
        let mut count = 0;
        for sgn in [1.0, -1.0] {
            let g = |i: usize| {
                let p = k.point(i as f64 / n as f64).xy();
                ray_hit(p, w1 * sgn).map(|h| side(p + w2 * sgn * h))
            };
            for i in 0..n {
                if let (Some(a), Some(b)) = (g(i), g(i + 1)) {
                    if a != b {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    /// Finite-difference Jacobian sign of the direction map at a chord.
    fn fd_sign(k: &PolygonalKnot, c: &Chord) -> i32 {
        let phi = |a: f64, b: f64| (k.point(b) - k.point(a)).normalize();
        let h = 1e-7;
        let d1 = (phi(c.s1 + h, c.s2) - phi(c.s1 - h, c.s2)) / (2.0 * h);
        let d2 = (phi(c.s1, c.s2 + h) - phi(c.s1, c.s2 - h)) / (2.0 * h);
        if phi(c.s1, c.s2).dot(&d1.cross(&d2)) > 0.0 {
            1
        } else {
            -1
        }
    }

    #[test]
    fn direction_sets() {
        assert!(DirectionSet::new(vec![V3::x(), V3::x() * 2.0]).is_err());
        assert!(DirectionSet::new(vec![V3::zeros()]).is_err());
        let d = DirectionSet::random(3, 1).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let back: DirectionSet = serde_json::from_str(&json).unwrap();
        assert!(back.dirs().iter().zip(d.dirs()).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn planar_chords() {
        let k = convex_unknot(9).unwrap();
        assert!(find_chords(&k, &V3::new(0.01, 0.02, 1.0)).unwrap().is_empty());
        assert!(matches!(find_chords(&k, &V3::new(0.83, 0.31, 0.0)), Err(Error::Genericity(_))));
    }

    #[test]
    fn chords_match_grid_oracle() {
        let k = polygonal_trefoil(24).unwrap();
        for d in [V3::new(0.3, -0.5, 0.8), V3::new(-0.7, 0.2, 0.1)] {
            let d = d.normalize();
            let chords = find_chords(&k, &d).unwrap();
            let signed: i32 = chords.iter().map(|c| c.sign).sum();
            assert_eq!((chords.len(), signed), grid_chords(&k, &d, 40));
        }
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn unknot_and_trefoil_values() {
        let d = DirectionSet::random(3, 0).unwrap();
        let u = signed_count_v2(&convex_unknot(9).unwrap(), &d, 5).unwrap();
        assert_eq!(u.value, r(-1, 24));
        assert_eq!(u.trials.len(), 5);
        assert!(u.trials.iter().all(|(_, c)| c.chord_pairs == 0 && c.tripods == -2));
        let t = signed_count_v2(&polygonal_trefoil(60).unwrap(), &d, 5).unwrap();
        assert_eq!(t.value - u.value, r(1, 1));
        for seed in 1..5 {
            let d = DirectionSet::random(3, seed).unwrap();
            assert_eq!(count_v2(&polygonal_trefoil(60).unwrap(), &d).unwrap().value(), r(23, 24));
        }
    }

    #[test]
    fn perturbed_trefoil_has_the_same_count() {
        let k = polygonal_trefoil(48).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let moved: Vec<V3> = k
            .vertices()
            .iter()
            .map(|v| v + V3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 0.01)
            .collect();
        let d = DirectionSet::random(3, 11).unwrap();
        let a = signed_count_v2(&k, &d, 2).unwrap().value;
        let b = signed_count_v2(&PolygonalKnot::new(moved).unwrap(), &d, 2).unwrap().value;
        assert_eq!(a, b);
        assert_eq!(a, r(23, 24));
    }

    #[test]
    fn figure_eight_value() {
        let k = crate::knots::ParametricKnot::figure8().to_polygon(80).unwrap();
        let d = DirectionSet::random(3, 2).unwrap();
        let v = signed_count_v2(&k, &d, 3).unwrap().value;
        assert_eq!(v - r(-1, 24), r(-1, 1));
    }

    #[test]
    fn chord_signs_match_finite_differences() {
        let k = polygonal_trefoil(40).unwrap();
        let d = V3::new(0.3, -0.5, 0.8);
        let chords = find_chords(&k, &d).unwrap();
        assert!(!chords.is_empty());
        for c in &chords {
            assert_eq!(c.sign, fd_sign(&k, c));
            let y = k.point(c.s2) - k.point(c.s1);
            assert!(y.normalize().cross(&d.normalize()).norm() < 1e-9);
        }
        let total: i32 = chords.iter().map(|c| c.sign).sum();
        let back: i32 = find_chords(&k, &-d).unwrap().iter().map(|c| c.sign).sum();
        assert_eq!(total, back);
    }

    #[test]
    fn segment_parallel_to_direction() {
        let k = convex_unknot(7).unwrap();
        let (a, b) = k.segment(2);
        assert!(matches!(find_chords(&k, &(b - a)), Err(Error::Genericity(_))));
    }

    #[test]
    fn planar_tripods() {
        let k = convex_unknot(9).unwrap();
        let flat = DirectionSet::new(vec![V3::new(0.3, 0.1, 0.0), V3::new(-0.2, 0.5, 0.0), V3::new(0.7, -0.4, 0.0)]).unwrap();
        assert!(matches!(find_tripods(&k, &flat), Err(Error::Genericity(_))));
        let k = convex_unknot(23).unwrap();
        for seed in 0..4 {
            let d = DirectionSet::random(3, seed).unwrap();
            let sols = find_tripods(&k, &d).unwrap();
            assert_eq!(sols.iter().filter(|s| s.corner.is_none()).count(), grid_planar_tripods(&k, &d, 20000));
            for s in sols.iter().filter(|s| s.corner.is_none()) {
                let x = V3::from(s.node.unwrap());
                for (q, &t) in s.knot_params.iter().enumerate() {
                    assert!((x - k.point(t)).normalize().cross(&d.dirs()[q]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn corners_complete_the_planar_count() {
        // A smooth convex curve inscribes one homothetic copy of a triangle per
        // sign of the ratio; the polygon alone misses some of them.
        let k = convex_unknot(9).unwrap();
        let mut with_corners = 0;
        for seed in 0..30 {
            let sols = find_tripods(&k, &DirectionSet::random(3, seed).unwrap()).unwrap();
            assert_eq!(sols.len(), 2);
            assert!(sols.iter().all(|s| s.sign == -1));
            with_corners += usize::from(sols.iter().any(|s| s.corner.is_some()));
        }
        assert!(with_corners > 0);
    }

    #[test]
    fn rotation_equivariance() {
        let k = polygonal_trefoil(30).unwrap();
        let d = DirectionSet::random(3, 8).unwrap();
        let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(V3::new(0.2, 0.9, -0.3)), 0.77).into_inner();
        let a = find_tripods(&k, &d).unwrap();
        let b = find_tripods(&k.transformed(&r, &V3::new(0.5, -1.0, 2.0)), &d.rotated(&r)).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.sign, y.sign);
            assert!(x.knot_params.iter().zip(&y.knot_params).all(|(p, q)| (p - q).abs() < 1e-9));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn count_is_independent_of_directions(seed in any::<u64>()) {
            let k = polygonal_trefoil(36).unwrap();
            let d = DirectionSet::random(3, seed).unwrap();
            prop_assert_eq!(count_v2(&k, &d).unwrap().value(), r(23, 24));
        }
    }
}
