use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use vassiliev::configspace::{enumerate_strata, hidden_faces_all_vanish};
use vassiliev::diagrams::{enumerate_chord_diagrams, enumerate_trivalent_graphs};
use vassiliev::integrate::{invariant_from_weight_with, linking_integral_with, v2_with, IntegralEstimate, McOptions};
use vassiliev::knots::{combinatorial_linking, data_file, load_knot, Knot, PolygonalKnot, V3};
use vassiliev::orientation::orientation_equivalence;
use vassiliev::tinkertoy::{signed_count_v2, DirectionSet, TinkertoyReport};
use vassiliev::weights::{check_4t, check_ihx, ExtendedWeightSystem, WeightSystem};
use vassiliev::{Error, Result};

/// Vassiliev knot invariants by configuration-space integrals and by
/// signed counting.
///
/// Knots are given as a JSON file path, as a file name in the directory named
/// by VASSILIEV_DATA_DIR, or as a built-in name (unknot, trefoil, figure8,
/// torus(p,q), hopf_a, hopf_b). Results are written as JSON to stdout or to
/// --out, with a short summary on stderr.
///
/// Exit codes: 0 success, 1 a verified relation fails, 2 invalid input,
/// 3 numerical or genericity failure.
#[derive(Parser, Debug)]
#[command(name = "vassiliev", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Linking number of two closed curves: Gauss integral and crossing count.
    Link(LinkArgs),
    /// Degree-2 invariant by Monte Carlo integration.
    V2(McArgs),
    /// Invariant of a weight system by Monte Carlo integration (degree <= 3).
    Invariant(InvariantArgs),
    /// Degree-2 invariant as an exact rational by signed counting.
    Tinkertoy(TinkertoyArgs),
    /// List chord diagrams, trivalent graphs or configuration-space strata.
    Enumerate(EnumerateArgs),
    /// Check 4T and IHX for a weight system, orientation definitions and face censuses.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct Output {
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Sampling {
    /// Number of Monte Carlo samples per integral.
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    /// Random seed (required: no implicit entropy).
    #[arg(long)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl Sampling {
    fn options(&self) -> McOptions {
        McOptions { threads: self.threads, ..McOptions::default() }
    }
}

#[derive(Args, Debug)]
struct LinkArgs {
    /// First component.
    #[arg(long)]
    a: String,
    /// Second component.
    #[arg(long)]
    b: String,
    #[command(flatten)]
    sampling: Sampling,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct McArgs {
    /// Knot.
    #[arg(long)]
    knot: String,
    /// Knot whose value is subtracted.
    #[arg(long)]
    baseline: Option<String>,
    #[command(flatten)]
    sampling: Sampling,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct InvariantArgs {
    /// Weight system: JSON file, file in VASSILIEV_DATA_DIR, or c2 / deg3.
    #[arg(long)]
    weights: String,
    #[command(flatten)]
    mc: McArgs,
}

#[derive(Args, Debug)]
struct TinkertoyArgs {
    /// Knot; parametric knots are sampled at --segments points.
    #[arg(long)]
    knot: String,
    /// Knot whose value is subtracted.
    #[arg(long)]
    baseline: Option<String>,
    /// Segments for sampling parametric knots.
    #[arg(long, default_value_t = 60)]
    segments: usize,
    /// JSON file with three direction vectors.
    #[arg(long)]
    dirs: Option<String>,
    /// Seed for random directions when --dirs is absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of direction sets that must agree.
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// Include every rod configuration in the output.
    #[arg(long)]
    solutions: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    /// Chord diagrams of this degree, up to rotation.
    #[arg(long, group = "what")]
    chords: Option<usize>,
    /// Trivalent graphs of this degree.
    #[arg(long, group = "what")]
    graphs: Option<usize>,
    /// Bound on internal vertices for --graphs.
    #[arg(long, default_value_t = 2)]
    max_internal: usize,
    /// Strata of the configuration space of this many points.
    #[arg(long, group = "what")]
    strata: Option<usize>,
    /// Largest codimension for --strata.
    #[arg(long, default_value_t = 2)]
    codim: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Weight system to check against 4T and IHX.
    #[arg(long)]
    weights: Option<String>,
    /// Check that the orientation definitions agree on graphs of this degree.
    #[arg(long)]
    orientation: Option<usize>,
    /// Run the hidden-face census on graphs of this degree.
    #[arg(long)]
    faces: Option<usize>,
    /// Bound on internal vertices for --orientation and --faces.
    #[arg(long, default_value_t = 2)]
    max_internal: usize,
    #[command(flatten)]
    output: Output,
}

/// A command result: JSON, CSV rows, a summary and whether every check passed.
struct Report {
    json: Value,
    csv: String,
    summary: Vec<String>,
    passed: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (output, result) = match &cli.command {
        Command::Link(a) => (&a.output, cmd_link(a)),
        Command::V2(a) => (&a.output, cmd_v2(a)),
        Command::Invariant(a) => (&a.mc.output, cmd_invariant(a)),
        Command::Tinkertoy(a) => (&a.output, cmd_tinkertoy(a)),
        Command::Enumerate(a) => (&a.output, cmd_enumerate(a)),
        Command::Verify(a) => (&a.output, cmd_verify(a)),
    };
    match result.and_then(|r| emit(output, &r).map(|()| r.passed)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn emit(output: &Output, r: &Report) -> Result<()> {
    let body = match output.format {
        Format::Json => serde_json::to_string_pretty(&r.json)? + "\n",
        Format::Csv => r.csv.clone(),
    };
    match &output.out {
        Some(p) => std::fs::write(p, body)?,
        None => print!("{body}"),
    }
    for line in &r.summary {
        eprintln!("{line}");
    }
    Ok(())
}

fn estimate_rows(rows: &[(&str, &IntegralEstimate)]) -> String {
    let mut s = String::from("quantity,value,std_error,n_samples,seed\n");
    for (name, e) in rows {
        s += &format!("{name},{},{},{},{}\n", e.value, e.std_error, e.n_samples, e.seed);
    }
    s
}

fn show(e: &IntegralEstimate) -> String {
    format!("{:.6} +- {:.6}", e.value, e.std_error)
}

/// A generic projection direction for crossing counts.
fn view() -> V3 {
    V3::new(0.1234, 0.3417, 0.9316)
}

fn cmd_link(a: &LinkArgs) -> Result<Report> {
    let (ka, kb) = (load_knot(&a.a)?, load_knot(&a.b)?);
    let s = &a.sampling;
    let integral = linking_integral_with(&ka, &kb, s.n, s.seed, &s.options())?;
    let crossings = combinatorial_linking(&ka, &kb, &view())?;
    Ok(Report {
        json: json!({ "command": "link", "a": a.a, "b": a.b, "integral": integral, "crossing_count": crossings }),
        csv: estimate_rows(&[("integral", &integral)]) + &format!("crossing_count,{crossings},0,0,0\n"),
        summary: vec![format!("linking integral {}, crossing count {crossings}", show(&integral))],
        passed: true,
    })
}

/// Runs `f` on the knot and optional baseline with disjoint stream blocks.
fn with_baseline(
    m: &McArgs,
    f: &dyn Fn(&Knot, &McOptions) -> Result<IntegralEstimate>,
) -> Result<(IntegralEstimate, Option<(IntegralEstimate, IntegralEstimate)>)> {
    let opts = m.sampling.options();
    let value = f(&load_knot(&m.knot)?, &opts)?;
    let base = match &m.baseline {
        Some(b) => {
            let o = McOptions { stream_offset: 1 << 20, ..opts };
            let bv = f(&load_knot(b)?, &o)?;
            let diff = value.minus(&bv);
            Some((bv, diff))
        }
        None => None,
    };
    Ok((value, base))
}

fn mc_report(command: &str, m: &McArgs, value: IntegralEstimate, base: Option<(IntegralEstimate, IntegralEstimate)>, mut extra: Value) -> Report {
    let mut json = json!({ "command": command, "knot": m.knot, "value": value });
    let mut rows = vec![("value", &value)];
    let mut summary = vec![format!("{command}({}) = {}", m.knot, show(&value))];
    if let Some((bv, diff)) = &base {
        json["baseline"] = json!({ "knot": m.baseline, "value": bv });
        json["difference"] = json!(diff);
        rows.push(("baseline", bv));
        rows.push(("difference", diff));
        summary.push(format!("{command}({}) = {}", m.baseline.as_deref().unwrap_or(""), show(bv)));
        summary.push(format!("difference = {}", show(diff)));
    }
    if let Some(obj) = extra.as_object_mut() {
        for (k, v) in std::mem::take(obj) {
            json[k] = v;
        }
    }
    Report { json, csv: estimate_rows(&rows), summary, passed: true }
}

fn cmd_v2(m: &McArgs) -> Result<Report> {
    let s = &m.sampling;
    let (value, base) = with_baseline(m, &|k, o| v2_with(k, s.n, s.seed, o))?;
    Ok(mc_report("v2", m, value, base, json!({})))
}

fn load_weights(src: &str, verified: bool) -> Result<WeightSystem> {
    match data_file(src) {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            if verified {
                WeightSystem::from_json(&text)
            } else {
                WeightSystem::from_json_unverified(&text)
            }
        }
        None => match src {
            "c2" => Ok(WeightSystem::c2()),
            "deg3" => Ok(WeightSystem::degree3()),
            other => Err(Error::Parameter(format!("no weight system file or built-in named {other:?}"))),
        },
    }
}

fn cmd_invariant(a: &InvariantArgs) -> Result<Report> {
    let w = load_weights(&a.weights, true)?;
    let m = &a.mc;
    let s = &m.sampling;
    let first = invariant_from_weight_with(&w, &load_knot(&m.knot)?, s.n, s.seed, &s.options())?;
    let (value, base) = with_baseline(m, &|k, o| Ok(invariant_from_weight_with(&w, k, s.n, s.seed, o)?.estimate))?;
    let mut r = mc_report("invariant", m, value, base, json!({ "weights": a.weights, "terms": first.terms, "warnings": first.warnings }));
    r.summary.extend(first.warnings.iter().cloned());
    Ok(r)
}

fn polygon(src: &str, segments: usize) -> Result<PolygonalKnot> {
    match load_knot(src)? {
        Knot::Polygonal(p) => Ok(p),
        Knot::Parametric(k) => k.to_polygon(segments),
    }
}

fn cmd_tinkertoy(a: &TinkertoyArgs) -> Result<Report> {
    let dirs = match (&a.dirs, a.seed) {
        (Some(path), _) => {
            let p = data_file(path).ok_or_else(|| Error::Parameter(format!("no direction file {path:?}")))?;
            serde_json::from_str::<DirectionSet>(&std::fs::read_to_string(p)?)?
        }
        (None, Some(seed)) => DirectionSet::random(3, seed)?,
        (None, None) => return Err(Error::Parameter("give --dirs or --seed".into())),
    };
    let k = polygon(&a.knot, a.segments)?;
    let report = signed_count_v2(&k, &dirs, a.trials)?;
    let mut json = json!({ "command": "tinkertoy", "knot": a.knot, "segments": k.n_segments(), "report": report });
    let mut csv = String::from("knot,trial,value,chord_pairs,tripods,corner_tripods\n");
    let rows = |name: &str, r: &TinkertoyReport| -> String {
        r.trials
            .iter()
            .enumerate()
            .map(|(i, (_, c))| format!("{name},{i},{},{},{},{}\n", c.value(), c.chord_pairs, c.tripods, c.corner_tripods))
            .collect()
    };
    csv += &rows(&a.knot, &report);
    let mut summary = vec![format!("tinkertoy v2({}) = {} on {} direction sets", a.knot, report.value, report.trials.len())];
    if a.solutions {
        json["solutions"] = json!(vassiliev::tinkertoy::find_tripods(&k, &dirs)?);
        let chords: Vec<_> = dirs.dirs().iter().map(|d| vassiliev::tinkertoy::find_chords(&k, d)).collect::<Result<_>>()?;
        json["chords"] = json!(chords);
    }
    if let Some(b) = &a.baseline {
        let base = signed_count_v2(&polygon(b, a.segments)?, &dirs, a.trials)?;
        let diff = &report.value - &base.value;
        csv += &rows(b, &base);
        summary.push(format!("tinkertoy v2({b}) = {}", base.value));
        summary.push(format!("difference = {diff}"));
        json["baseline"] = json!({ "knot": b, "report": base });
        json["difference"] = json!(diff.to_string());
    }
    Ok(Report { json, csv, summary, passed: true })
}

fn cmd_enumerate(a: &EnumerateArgs) -> Result<Report> {
    if let Some(k) = a.chords {
        let ds = enumerate_chord_diagrams(k)?;
        let names: Vec<String> = ds.iter().map(|d| d.to_string()).collect();
        return Ok(Report {
            json: json!({ "command": "enumerate", "chords": k, "count": names.len(), "diagrams": names }),
            csv: std::iter::once("diagram".to_string()).chain(names.iter().map(|n| format!("\"{n}\""))).collect::<Vec<_>>().join("\n") + "\n",
            summary: vec![format!("{} chord diagrams of degree {k}", names.len())],
            passed: true,
        });
    }
    if let Some(k) = a.graphs {
        let gs = enumerate_trivalent_graphs(k, a.max_internal)?;
        let rows: Vec<Value> = gs
            .iter()
            .map(|g| json!({ "graph": g.to_string(), "internal": g.n_internal(), "automorphisms": g.automorphism_count() }))
            .collect();
        let csv = std::iter::once("graph,internal,automorphisms".to_string())
            .chain(gs.iter().map(|g| format!("\"{g}\",{},{}", g.n_internal(), g.automorphism_count())))
            .collect::<Vec<_>>()
            .join("\n")
            + "\n";
        return Ok(Report {
            json: json!({ "command": "enumerate", "graphs": k, "max_internal": a.max_internal, "count": gs.len(), "list": rows }),
            csv,
            summary: vec![format!("{} trivalent graphs of degree {k} with at most {} internal vertices", gs.len(), a.max_internal)],
            passed: true,
        });
    }
    if let Some(n) = a.strata {
        let st = enumerate_strata(n, a.codim)?;
        let csv = std::iter::once("codimension,family".to_string())
            .chain(st.iter().map(|s| format!("{},\"{}\"", s.codimension(), serde_json::to_string(&s.family).unwrap_or_default())))
            .collect::<Vec<_>>()
            .join("\n")
            + "\n";
        return Ok(Report {
            json: json!({ "command": "enumerate", "strata": n, "max_codim": a.codim, "count": st.len(), "list": st }),
            csv,
            summary: vec![format!("{} strata of {n} points up to codimension {}", st.len(), a.codim)],
            passed: true,
        });
    }
    Err(Error::Parameter("give one of --chords, --graphs, --strata".into()))
}

fn cmd_verify(a: &VerifyArgs) -> Result<Report> {
    let mut checks: Vec<(String, bool, Value)> = Vec::new();
    if let Some(src) = &a.weights {
        let w = load_weights(src, false)?;
        let bad = check_4t(&w)?;
        let four_t: Vec<String> = bad.iter().map(|b| b.to_string()).collect();
        checks.push(("4T".into(), bad.is_empty(), json!({ "violations": four_t })));
        if bad.is_empty() {
            let ext = ExtendedWeightSystem::new(WeightSystem::new(w.degree(), w.values().clone())?);
            let ihx = check_ihx(&ext)?;
            let v: Vec<String> = ihx.iter().map(|b| b.to_string()).collect();
            checks.push(("IHX".into(), ihx.is_empty(), json!({ "violations": v })));
        } else {
            checks.push(("IHX".into(), false, json!({ "skipped": "the system fails 4T" })));
        }
    }
    if let Some(k) = a.orientation {
        let gs = enumerate_trivalent_graphs(k, a.max_internal)?;
        let bad: Vec<String> = gs.iter().filter(|g| !orientation_equivalence(g)).map(|g| g.to_string()).collect();
        checks.push(("orientation".into(), bad.is_empty(), json!({ "graphs": gs.len(), "failures": bad })));
    }
    if let Some(k) = a.faces {
        let gs = enumerate_trivalent_graphs(k, a.max_internal)?;
        let mut rows = Vec::new();
        let mut ok = true;
        for g in &gs {
            let c = hidden_faces_all_vanish(g)?;
            ok &= c.all_vanish;
            let counts: serde_json::Map<String, Value> = c.counts.iter().map(|(f, n)| (format!("{f:?}"), json!(n))).collect();
            rows.push(json!({ "graph": g.to_string(), "all_vanish": c.all_vanish, "counts": counts }));
        }
        checks.push(("faces".into(), ok, json!({ "census": rows })));
    }
    if checks.is_empty() {
        return Err(Error::Parameter("give at least one of --weights, --orientation, --faces".into()));
    }
    let word = |p: bool| if p { "pass" } else { "fail" };
    let passed = checks.iter().all(|c| c.1);
    let mut json = json!({ "command": "verify", "passed": passed });
    let mut csv = String::from("check,result\n");
    let mut summary = Vec::new();
    for (name, ok, detail) in checks {
        csv += &format!("{name},{}\n", word(ok));
        summary.push(format!("{name}: {}", word(ok)));
        json[name] = json!({ "result": word(ok), "detail": detail });
    }
    Ok(Report { json, csv, summary, passed })
}
