use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forms::{area_form, Contraction};
use crate::diagrams::TrivalentGraph;
use crate::error::{Error, Result};
use crate::knots::{segment_distance, Curve, V3};

/// Number of independent sub-streams; also the number of batches for the
/// batch-means error.
pub const SUBSTREAMS: usize = 32;

/// Samples with two points closer than this are redrawn.
pub const MIN_DISTANCE: f64 = 1e-9;

const MAX_REDRAWS: usize = 10_000;

/// A Monte Carlo estimate with its batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl IntegralEstimate {
    pub fn exact(value: f64, seed: u64) -> Self {
        IntegralEstimate { value, std_error: 0.0, n_samples: 0, seed }
    }

    /// `self - other`, treating the two estimates as independent.
    pub fn minus(&self, other: &IntegralEstimate) -> IntegralEstimate {
        IntegralEstimate {
            value: self.value - other.value,
            std_error: self.std_error.hypot(other.std_error),
            n_samples: self.n_samples + other.n_samples,
            seed: self.seed,
        }
    }

    /// True when `|self - target| <= sigmas * std_error`.
    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.std_error
    }
}

/// Sampler settings shared by all estimators.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct McOptions {
    /// Worker threads; `None` uses the global rayon pool. Results do not
    /// depend on this.
    pub threads: Option<usize>,
    /// First sub-stream id, so that several estimates from one seed use
    /// disjoint streams.
    pub stream_offset: u64,
    /// Length scale of the free-point proposal; defaults to a tenth of the knot radius.
    pub scale: Option<f64>,
}

/// One point of a convergence trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub n_samples: u64,
    pub value: f64,
    pub std_error: f64,
}

/// Render a trace as CSV with a header row.
pub fn trace_to_csv(trace: &[TracePoint]) -> String {
    let mut out = String::from("n_samples,value,std_error\n");
    for p in trace {
        out.push_str(&format!("{},{},{}\n", p.n_samples, p.value, p.std_error));
    }
    out
}

#[derive(Clone, Copy, Default)]
struct Moments {
    count: u64,
    sum: f64,
    sum_sq: f64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Parameter("thread count must be positive".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Parameter(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Run `n` samples split over the sub-streams, recording the moments of each
/// stream after each fraction in `checkpoints` (the last must be 1).
fn run_streams<F>(n: u64, seed: u64, opts: &McOptions, checkpoints: &[f64], sample: F) -> Result<Vec<Vec<Moments>>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    if n == 0 {
        return Err(Error::Parameter("at least one sample is required".into()));
    }
    let b = SUBSTREAMS as u64;
    let per_stream = |i: u64| n / b + u64::from(i < n % b);
    let run = || {
        (0..b)
            .into_par_iter()
            .map(|i| {
                let total = per_stream(i);
                let mut rng = stream_rng(seed, opts.stream_offset + i);
                let mut m = Moments::default();
                let mut out = Vec::with_capacity(checkpoints.len());
                for &f in checkpoints {
                    let stop = ((total as f64 * f).round() as u64).min(total);
                    while m.count < stop {
                        let y = sample(&mut rng)?;
                        m.count += 1;
                        m.sum += y;
                        m.sum_sq += y * y;
                    }
                    out.push(m);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    };
    in_pool(opts.threads, run)?
}

/// Combine per-stream moments in stream order.
fn reduce(streams: &[Moments], seed: u64) -> IntegralEstimate {
    let n: u64 = streams.iter().map(|m| m.count).sum();
    let total: f64 = streams.iter().map(|m| m.sum).sum();
    let value = if n > 0 { total / n as f64 } else { 0.0 };
    let nonempty: Vec<&Moments> = streams.iter().filter(|m| m.count > 0).collect();
    let std_error = if nonempty.len() == streams.len() && streams.len() > 1 {
        let nf = n as f64;
        let b = streams.len() as f64;
        let ss: f64 = nonempty
            .iter()
            .map(|m| {
                let d = m.sum / m.count as f64 - value;
                (m.count as f64 / nf).powi(2) * d * d
            })
            .sum();
        (ss * b / (b - 1.0)).sqrt()
    } else if n > 1 {
        let sum_sq: f64 = streams.iter().map(|m| m.sum_sq).sum();
        let nf = n as f64;
        let var = ((sum_sq / nf - value * value) * nf / (nf - 1.0)).max(0.0);
        (var / nf).sqrt()
    } else {
        f64::INFINITY
    };
    IntegralEstimate { value, std_error, n_samples: n, seed }
}

fn estimate<F>(n: u64, seed: u64, opts: &McOptions, sample: F) -> Result<IntegralEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    let runs = run_streams(n, seed, opts, &[1.0], sample)?;
    let last: Vec<Moments> = runs.iter().map(|r| r[0]).collect();
    Ok(reduce(&last, seed))
}

fn trace<F>(n: u64, seed: u64, opts: &McOptions, points: usize, sample: F) -> Result<Vec<TracePoint>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    if points == 0 {
        return Err(Error::Parameter("a trace needs at least one point".into()));
    }
    let fractions: Vec<f64> = (1..=points).map(|i| i as f64 / points as f64).collect();
    let runs = run_streams(n, seed, opts, &fractions, sample)?;
    Ok((0..points)
        .map(|p| {
            let at: Vec<Moments> = runs.iter().map(|r| r[p]).collect();
            let e = reduce(&at, seed);
            TracePoint { n_samples: e.n_samples, value: e.value, std_error: e.std_error }
        })
        .collect())
}

fn uniform_direction(rng: &mut ChaCha8Rng) -> V3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi = TAU * rng.gen::<f64>();
    let r = (1.0 - z * z).sqrt();
    V3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Density of the radial proposal `L / (r + L)^2` spread over the sphere of radius `r`.
fn radial_density(r: f64, l: f64) -> f64 {
    l / ((r + l) * (r + l) * 4.0 * PI * r * r)
}

/// Importance sampler for the configuration space of one graph.
///
/// Knot parameters are uniform on the cyclically ordered simplex (volume
/// `1/(c-1)!`). Internal vertices are placed in breadth-first order from the
/// knot; each is drawn around a uniformly chosen neighbour already placed, at
/// distance `r` with density `L/(r+L)^2` and a uniform direction, and the
/// exact mixture density is divided out.
struct GraphSampler<'a> {
    knot: &'a dyn Curve,
    contraction: Contraction,
    cycle: Vec<usize>,
    /// Internal vertices in placement order with their earlier neighbours.
    placement: Vec<(usize, Vec<usize>)>,
    n: usize,
    scale: f64,
    volume: f64,
}

impl<'a> GraphSampler<'a> {
    fn new(g: &TrivalentGraph, knot: &'a dyn Curve, opts: &McOptions) -> Result<Self> {
        if g.n_cycle() == 0 {
            return Err(Error::Parameter("graph has no knot vertices".into()));
        }
        let scale = opts.scale.unwrap_or_else(|| 0.1 * knot.radius());
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Parameter(format!("proposal scale must be positive, got {scale}")));
        }
        let n = g.n_vertices();
        let mut adj = vec![Vec::new(); n];
        for &[u, v] in g.edges() {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut placed = vec![false; n];
        let mut queue: VecDeque<usize> = g.cycle().iter().copied().collect();
        for &v in g.cycle() {
            placed[v] = true;
        }
        let mut placement = Vec::new();
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !placed[v] {
                    placed[v] = true;
                    let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| placed[w] && w != v).collect();
                    nbrs.sort_unstable();
                    nbrs.dedup();
                    placement.push((v, nbrs));
                    queue.push_back(v);
                }
            }
        }
        let c = g.n_cycle();
        let volume = 1.0 / (1..c).map(|i| i as f64).product::<f64>();
        Ok(GraphSampler { knot, contraction: Contraction::new(g), cycle: g.cycle().to_vec(), placement, n, scale, volume })
    }

    fn draw(&self, rng: &mut ChaCha8Rng, pos: &mut [V3], tan: &mut [V3], params: &mut Vec<f64>) -> f64 {
        let c = self.cycle.len();
        let s0: f64 = rng.gen();
        params.clear();
        params.push(0.0);
        params.extend((1..c).map(|_| rng.gen::<f64>()));
        params[1..].sort_unstable_by(f64::total_cmp);
        for (j, &v) in self.cycle.iter().enumerate() {
            let s = (s0 + params[j]).rem_euclid(1.0);
            params[j] = s;
            pos[v] = self.knot.point(s);
            tan[v] = self.knot.tangent(s);
        }
        let l = self.scale;
        let mut density = 1.0;
        for (v, nbrs) in &self.placement {
            let centre = pos[nbrs[rng.gen_range(0..nbrs.len())]];
            let u: f64 = rng.gen();
            let r = l * u / (1.0 - u);
            let x = centre + uniform_direction(rng) * r;
            pos[*v] = x;
            let q: f64 = nbrs.iter().map(|&w| radial_density((x - pos[w]).norm(), l)).sum::<f64>() / nbrs.len() as f64;
            density *= q;
        }
        self.volume / density
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<f64> {
        let mut pos = vec![V3::zeros(); self.n];
        let mut tan = vec![V3::zeros(); self.n];
        let mut params = Vec::with_capacity(self.cycle.len());
        for _ in 0..MAX_REDRAWS {
            let weight = self.draw(rng, &mut pos, &mut tan, &mut params);
            if !min_distance_ok(&pos) || !weight.is_finite() {
                continue;
            }
            let y = self.contraction.evaluate(&pos, &tan) * weight;
            if !y.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite integrand at knot parameters {params:?}, points {:?}",
                    self.placement.iter().map(|(v, _)| pos[*v]).collect::<Vec<_>>()
                )));
            }
            return Ok(y);
        }
        Err(Error::Numerical(format!("{MAX_REDRAWS} consecutive samples fell within {MIN_DISTANCE} of a diagonal")))
    }
}

fn min_distance_ok(pos: &[V3]) -> bool {
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            if (pos[i] - pos[j]).norm() < MIN_DISTANCE {
                return false;
            }
        }
    }
    true
}

/// Estimate the integral of the canonical integrand of `g` over its
/// configuration space on `k`, with `n` samples over [`SUBSTREAMS`] streams.
pub fn mc_integrate(g: &TrivalentGraph, k: &dyn Curve, n: u64, seed: u64) -> Result<IntegralEstimate> {
    mc_integrate_with(g, k, n, seed, &McOptions::default())
}

pub fn mc_integrate_with(g: &TrivalentGraph, k: &dyn Curve, n: u64, seed: u64, opts: &McOptions) -> Result<IntegralEstimate> {
    let sampler = GraphSampler::new(g, k, opts)?;
    estimate(n, seed, opts, |rng| sampler.sample(rng))
}

/// Running estimate of [`mc_integrate_with`] at `points` evenly spaced sample counts.
pub fn mc_trace(g: &TrivalentGraph, k: &dyn Curve, n: u64, seed: u64, points: usize, opts: &McOptions) -> Result<Vec<TracePoint>> {
    let sampler = GraphSampler::new(g, k, opts)?;
    trace(n, seed, opts, points, |rng| sampler.sample(rng))
}

/// Gauss linking integral of two disjoint closed curves.
pub fn linking_integral(a: &dyn Curve, b: &dyn Curve, n: u64, seed: u64) -> Result<IntegralEstimate> {
    linking_integral_with(a, b, n, seed, &McOptions::default())
}

pub fn linking_integral_with(a: &dyn Curve, b: &dyn Curve, n: u64, seed: u64, opts: &McOptions) -> Result<IntegralEstimate> {
    let m = 512;
    let poly = |k: &dyn Curve| -> (Vec<V3>, f64) {
        let pts: Vec<V3> = (0..m).map(|i| k.point(i as f64 / m as f64)).collect();
        let sag = (0..m)
            .map(|i| (k.point((i as f64 + 0.5) / m as f64) - (pts[i] + pts[(i + 1) % m]) / 2.0).norm())
            .fold(0.0, f64::max);
        (pts, sag)
    };
    let ((pa, sa), (pb, sb)) = (poly(a), poly(b));
    let tol = 2.0 * (sa + sb) + 1e-6 * a.radius().max(b.radius());
    for i in 0..m {
        for j in 0..m {
            if segment_distance(&pa[i], &pa[(i + 1) % m], &pb[j], &pb[(j + 1) % m]) < tol {
                return Err(Error::Numerical(format!("curves meet near {:?}", pa[i])));
            }
        }
    }
    estimate(n, seed, opts, |rng| {
        let (s, t): (f64, f64) = (rng.gen(), rng.gen());
        let y = a.point(s) - b.point(t);
        let v = area_form(&y, &a.tangent(s), &b.tangent(t));
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical(format!("curves meet at parameters ({s}, {t})")))
        }
    })
}

/// Integral of the normalized area form over a sphere of radius 2, pulled
/// back through spherical coordinates on the unit square; the exact value is 1.
pub fn omega_normalization(n: u64, seed: u64, opts: &McOptions) -> Result<IntegralEstimate> {
    estimate(n, seed, opts, |rng| {
        let (th, ph) = (PI * rng.gen::<f64>(), TAU * rng.gen::<f64>());
        let y = 2.0 * V3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
        let dth = 2.0 * PI * V3::new(th.cos() * ph.cos(), th.cos() * ph.sin(), -th.sin());
        let dph = 2.0 * TAU * V3::new(-th.sin() * ph.sin(), th.sin() * ph.cos(), 0.0);
        Ok(area_form(&y, &dth, &dph))
    })
}
