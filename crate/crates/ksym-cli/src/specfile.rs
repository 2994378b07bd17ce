//! The JSON spec-file format and its conversion to a [`ManifoldSpec`].
//!
//! ```json
//! {
//!   "n": 1,
//!   "k": 1,
//!   "t": { "t[1][1][1]": "y1^2/2" },
//!   "metric": "identity",
//!   "base_point": [0.0, 0.0],
//!   "region": { "min": [-1.0, -1.0], "max": [1.0, 1.0] }
//! }
//! ```
//!
//! Missing `t` entries are zero; `metric` is `"identity"` or a symmetric
//! matrix of expressions over adapted-frame indices; `base_point` defaults
//! to the origin and `region` to the unit box. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use serde::Deserialize;
use thiserror::Error;

use ksym_core::chart::{ManifoldSpec, MetricSpec};
use ksym_core::expr::parse_scalar_field;
use ksym_core::normalform::Region;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Spec(String),
}

fn spec_err(message: impl Into<String>) -> SpecError {
    SpecError::Spec(message.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    n: Option<u64>,
    k: Option<u64>,
    t: Option<BTreeMap<String, String>>,
    metric: Option<RawMetric>,
    base_point: Option<Vec<f64>>,
    region: Option<RawRegion>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawMetric {
    Name(String),
    Matrix(Vec<Vec<String>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    min: Vec<f64>,
    max: Vec<f64>,
}

/// A loaded spec plus the file-level extras the CLI needs.
#[derive(Debug)]
pub struct LoadedSpec {
    pub spec: ManifoldSpec,
    pub region: Region,
    /// Raw bytes of the file, for the report digest.
    pub raw_bytes: Vec<u8>,
}

/// Parse a key of the form `t[i][alpha][j]`.
fn parse_t_key(key: &str) -> Result<(usize, usize, usize), SpecError> {
    let body = key
        .strip_prefix('t')
        .ok_or_else(|| spec_err(format!("bad t key `{key}`: expected t[i][alpha][j]")))?;
    let mut indices = Vec::with_capacity(3);
    let mut rest = body;
    while !rest.is_empty() {
        let inner = rest
            .strip_prefix('[')
            .ok_or_else(|| spec_err(format!("bad t key `{key}`: expected `[`")))?;
        let close = inner
            .find(']')
            .ok_or_else(|| spec_err(format!("bad t key `{key}`: missing `]`")))?;
        let number: usize = inner[..close]
            .parse()
            .map_err(|_| spec_err(format!("bad t key `{key}`: `{}` is not an index", &inner[..close])))?;
        indices.push(number);
        rest = &inner[close + 1..];
    }
    if indices.len() != 3 {
        return Err(spec_err(format!(
            "bad t key `{key}`: expected exactly three indices"
        )));
    }
    Ok((indices[0], indices[1], indices[2]))
}

/// Load and index-check a spec file.
pub fn load_spec(path: &Path) -> Result<LoadedSpec, SpecError> {
    let raw_bytes = std::fs::read(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: RawSpec = serde_json::from_slice(&raw_bytes).map_err(|e| SpecError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let n = raw.n.ok_or_else(|| spec_err("n required"))? as usize;
    let k = raw.k.ok_or_else(|| spec_err("k required"))? as usize;
    if n == 0 || k == 0 {
        return Err(spec_err("n and k must be positive"));
    }
    let mut spec = ManifoldSpec::flat(n, k);
    let dim = spec.dim();

    if let Some(table) = raw.t {
        for (key, src) in table {
            let (i, alpha, j) = parse_t_key(&key)?;
            if !(1..=n).contains(&i) || !(1..=k).contains(&alpha) || !(1..=n).contains(&j) {
                return Err(spec_err(format!(
                    "t key `{key}` out of range for n = {n}, k = {k}"
                )));
            }
            let field = parse_scalar_field(&src, n, k)
                .map_err(|e| spec_err(format!("t entry `{key}`: {e}")))?;
            spec.set_t(i, alpha, j, field);
        }
    }

    match raw.metric {
        None => {}
        Some(RawMetric::Name(name)) if name == "identity" => {}
        Some(RawMetric::Name(name)) => {
            return Err(spec_err(format!(
                "unknown metric `{name}`: expected \"identity\" or a matrix of expressions"
            )));
        }
        Some(RawMetric::Matrix(rows)) => {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(spec_err(format!("metric must be a {dim} x {dim} matrix")));
            }
            for a in 0..dim {
                for b in (a + 1)..dim {
                    if rows[a][b] != rows[b][a] {
                        return Err(spec_err(format!(
                            "metric entries ({a},{b}) and ({b},{a}) differ: the matrix must be symmetric"
                        )));
                    }
                }
            }
            let mut fields = Vec::with_capacity(dim * dim);
            for row in &rows {
                for src in row {
                    let field = parse_scalar_field(src, n, k)
                        .map_err(|e| spec_err(format!("metric entry `{src}`: {e}")))?;
                    fields.push(field);
                }
            }
            spec.metric = MetricSpec::FrameMatrix(fields);
        }
    }

    if let Some(base) = raw.base_point {
        if base.len() != dim {
            return Err(spec_err(format!(
                "base_point has length {}, expected {dim}",
                base.len()
            )));
        }
        spec.base_point = DVector::from_vec(base);
    }

    let region = match raw.region {
        None => Region::symmetric(dim, 1.0),
        Some(r) => {
            if r.min.len() != dim || r.max.len() != dim {
                return Err(spec_err(format!("region bounds must have length {dim}")));
            }
            if r.min.iter().zip(&r.max).any(|(lo, hi)| lo >= hi) {
                return Err(spec_err("region min must be strictly below max"));
            }
            Region {
                min: DVector::from_vec(r.min),
                max: DVector::from_vec(r.max),
            }
        }
    };

    Ok(LoadedSpec {
        spec,
        region,
        raw_bytes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_well_formed_spec() {
        let f = write_temp(
            r#"{"n": 1, "k": 1, "t": {"t[1][1][1]": "y1^2/2"}, "base_point": [0.0, 0.0]}"#,
        );
        let loaded = load_spec(f.path()).unwrap();
        assert_eq!(loaded.spec.dim(), 2);
        assert_eq!(
            loaded.spec.t_value(1, 1, 1, &nalgebra::dvector![0.0, 2.0]).unwrap(),
            2.0
        );
    }

    #[test]
    fn missing_k_is_rejected() {
        let f = write_temp(r#"{"n": 1}"#);
        let err = load_spec(f.path()).unwrap_err();
        assert!(matches!(err, SpecError::Spec(ref m) if m == "k required"), "{err}");
    }

    #[test]
    fn out_of_range_t_key_is_rejected() {
        let f = write_temp(r#"{"n": 1, "k": 1, "t": {"t[2][1][1]": "0"}}"#);
        let err = load_spec(f.path()).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let f = write_temp(r#"{"n": 1, "k": 1, "frobnicate": 3}"#);
        let err = load_spec(f.path()).unwrap_err();
        assert!(matches!(err, SpecError::Json { .. }), "{err}");
    }

    #[test]
    fn asymmetric_metric_is_rejected() {
        let f = write_temp(
            r#"{"n": 1, "k": 1, "metric": [["1", "x1"], ["0", "1"]]}"#,
        );
        let err = load_spec(f.path()).unwrap_err();
        assert!(err.to_string().contains("symmetric"), "{err}");
    }

    #[test]
    fn bad_base_point_length_is_rejected() {
        let f = write_temp(r#"{"n": 1, "k": 1, "base_point": [0.0]}"#);
        let err = load_spec(f.path()).unwrap_err();
        assert!(err.to_string().contains("base_point"), "{err}");
    }
}
