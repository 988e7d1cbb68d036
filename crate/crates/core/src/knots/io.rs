use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{perturb, Knot, ParametricKnot, PolygonalKnot, V3};
use crate::error::{Error, Result};

/// Knot file contents: `{"type": "polyline", "vertices": [[x, y, z], ...]}` or
/// `{"type": "named", "name": ..., "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KnotSpec {
    Polyline {
        vertices: Vec<[f64; 3]>,
    },
    Named {
        name: String,
        #[serde(default)]
        params: Map<String, Value>,
    },
}

impl KnotSpec {
    pub fn build(&self) -> Result<Knot> {
        match self {
            KnotSpec::Polyline { vertices } => {
                Ok(Knot::Polygonal(PolygonalKnot::new(vertices.iter().map(|&v| V3::from(v)).collect())?))
            }
            KnotSpec::Named { name, params } => named_knot(name, params),
        }
    }
}

impl From<&PolygonalKnot> for KnotSpec {
    fn from(k: &PolygonalKnot) -> Self {
        KnotSpec::Polyline { vertices: k.vertices().iter().map(|v| [v.x, v.y, v.z]).collect() }
    }
}

fn num(params: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    match params.get(key) {
        None => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| Error::Parse(format!("parameter {key:?} must be a number"))),
    }
}

fn int(params: &Map<String, Value>, key: &str, default: Option<i64>) -> Result<i64> {
    match params.get(key) {
        None => default.ok_or_else(|| Error::Parse(format!("missing parameter {key:?}"))),
        Some(v) => v.as_i64().ok_or_else(|| Error::Parse(format!("parameter {key:?} must be an integer"))),
    }
}

fn vec3(params: &Map<String, Value>, key: &str, default: V3) -> Result<V3> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => {
            let a: [f64; 3] = serde_json::from_value(v.clone())?;
            Ok(V3::from(a))
        }
    }
}

/// A built-in knot by name. Recognized names: `unknot`, `trefoil`, `figure8`,
/// `torus` (`p`, `q`), `torus_link` (`p`, `q`, `component`), `circle`
/// (`center`, `radius`, `normal`), `hopf_a`, `hopf_b`. Any of them accepts
/// `amplitude` and `seed` for a perturbation and `reversed` for the opposite
/// direction.
pub fn named_knot(name: &str, params: &Map<String, Value>) -> Result<Knot> {
    let base = match name {
        "unknot" => ParametricKnot::unknot(),
        "trefoil" => ParametricKnot::trefoil(),
        "figure8" => ParametricKnot::figure8(),
        "torus" => ParametricKnot::torus(int(params, "p", None)?, int(params, "q", None)?)?,
        "torus_link" => {
            ParametricKnot::torus_link(int(params, "p", None)?, int(params, "q", None)?, int(params, "component", Some(0))?)?
        }
        "circle" => ParametricKnot::circle(
            vec3(params, "center", V3::zeros())?,
            num(params, "radius")?.unwrap_or(1.0),
            vec3(params, "normal", V3::z())?,
        )?,
        "hopf_a" => ParametricKnot::hopf().0,
        "hopf_b" => ParametricKnot::hopf().1,
        other => return super::standard_knot(other).map(Knot::Parametric),
    };
    let mut k = base;
    if let Some(amp) = num(params, "amplitude")? {
        k = perturb(&k, amp, int(params, "seed", Some(0))? as u64)?;
    }
    if params.get("reversed").and_then(Value::as_bool) == Some(true) {
        k = k.reparametrized(0.0, true);
    }
    Ok(Knot::Parametric(k))
}

/// Resolve a knot argument: a JSON file path, a file `<src>` or `<src>.json`
/// in the directory named by `VASSILIEV_DATA_DIR`, or a built-in name.
pub fn load_knot(src: &str) -> Result<Knot> {
    match data_file(src) {
        Some(p) => {
            let spec: KnotSpec = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            spec.build()
        }
        None => named_knot(src, &Map::new()),
    }
}

/// `src` as a path, else `src` or `src.json` under `VASSILIEV_DATA_DIR`.
pub fn data_file(src: &str) -> Option<PathBuf> {
    let path = Path::new(src);
    if path.is_file() {
        return Some(path.to_path_buf());
    }
    let dir = std::env::var("VASSILIEV_DATA_DIR").ok()?;
    [src.to_string(), format!("{src}.json")].into_iter().map(|f| Path::new(&dir).join(f)).find(|p| p.is_file())
}
