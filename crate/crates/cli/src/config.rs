//! Experiment configuration: flags, environment and an optional JSON file.

use std::path::{Path, PathBuf};

use p2dyn::greenfn::DEFAULT_TOL;
use p2dyn::projspace::mapfile::{parse_map, read_map};
use p2dyn::{maps, HomPoint, HomPolyMap, C64};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult, Common};

/// Fields of a `--config` file. Every field is optional; flags override.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bundled name, file path or inline map object.
    pub map: Option<serde_json::Value>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub tol: Option<f64>,
    pub depth: Option<usize>,
    pub count: Option<usize>,
    pub n: Option<usize>,
    pub res: Option<usize>,
    pub orbits: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed config {}: {e}", path.display())))
    }
}

/// A map together with the label used in records and file names.
#[derive(Clone, Debug)]
pub struct LoadedMap {
    pub label: String,
    pub map: HomPolyMap,
}

/// Resolved settings shared by all commands.
#[derive(Clone, Debug)]
pub struct Settings {
    pub map_spec: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub tol: f64,
    pub file: ExperimentConfig,
}

pub const MAX_WORKERS: usize = 1024;

impl Settings {
    pub fn resolve(common: &Common) -> CliResult<Self> {
        let file = match &common.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let map_spec = match (&common.map, &file.map) {
            (Some(m), _) => Some(m.clone()),
            (None, Some(serde_json::Value::String(s))) => Some(s.clone()),
            (None, Some(v)) => Some(v.to_string()),
            (None, None) => None,
        };
        let workers = common
            .workers
            .or(file.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        check_range("workers", workers, 1, MAX_WORKERS)?;
        let tol = common.tol.or(file.tol).unwrap_or(DEFAULT_TOL);
        if !(tol.is_finite() && (1e-15..=1e-3).contains(&tol)) {
            return Err(CliError::Usage(format!("tol {tol} outside [1e-15, 1e-3]")));
        }
        Ok(Self {
            map_spec,
            seed: common.seed.or(file.seed),
            out: common.out.clone().or_else(|| file.out.clone()),
            workers,
            tol,
            file,
        })
    }

    /// Seed of a stochastic command; missing seeds are a usage error.
    pub fn require_seed(&self, command: &str) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::Usage(format!("{command} is stochastic and needs --seed")))
    }

    pub fn require_map(&self, command: &str) -> CliResult<LoadedMap> {
        let spec = self
            .map_spec
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("{command} needs --map")))?;
        load_map(spec)
    }
}

/// Resolves a bundled name, an inline JSON map or a map file path.
pub fn load_map(spec: &str) -> CliResult<LoadedMap> {
    let trimmed = spec.trim();
    if trimmed.starts_with('{') {
        let map = parse_map(trimmed).map_err(|e| CliError::Usage(format!("inline map: {e}")))?;
        return Ok(LoadedMap {
            label: "inline".into(),
            map,
        });
    }
    let path = Path::new(trimmed);
    if path.is_file() {
        let map = read_map(path).map_err(|e| CliError::Usage(e.to_string()))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "map".into());
        return Ok(LoadedMap { label, map });
    }
    let name = trimmed.strip_suffix(".map").unwrap_or(trimmed);
    let name = Path::new(name)
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match maps::bundled(&name) {
        Some(Ok(map)) => Ok(LoadedMap { label: name, map }),
        Some(Err(e)) => Err(CliError::Usage(format!("bundled map {name}: {e}"))),
        None => Err(CliError::Usage(format!(
            "unknown map {spec:?}: not a file, inline map or one of {}",
            maps::BUNDLED.join(", ")
        ))),
    }
}

pub fn check_range(name: &str, value: usize, lo: usize, hi: usize) -> CliResult<usize> {
    if (lo..=hi).contains(&value) {
        Ok(value)
    } else {
        Err(CliError::Usage(format!("{name} = {value} outside [{lo}, {hi}]")))
    }
}

/// Comma-separated reals with an exact count.
pub fn parse_reals(text: &str, what: &str, count: usize) -> CliResult<Vec<f64>> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if v.len() == count && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(CliError::Usage(format!("{what}: expected {count} comma-separated finite numbers, got {text:?}"))),
    }
}

/// `re0,im0,re1,im1,re2,im2` as a homogeneous vector.
pub fn parse_vector(text: &str, what: &str) -> CliResult<[C64; 3]> {
    let v = parse_reals(text, what, 6)?;
    Ok([C64::new(v[0], v[1]), C64::new(v[2], v[3]), C64::new(v[4], v[5])])
}

pub fn parse_point(text: &str, what: &str) -> CliResult<HomPoint> {
    let [a, b, c] = parse_vector(text, what)?;
    HomPoint::new(a, b, c).map_err(|e| CliError::Usage(format!("{what}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_specs_resolve() {
        assert_eq!(load_map("power2").unwrap().label, "power2");
        assert_eq!(load_map("lattes4susp.map").unwrap().label, "lattes4susp");
        assert_eq!(load_map("maps/power4.map").unwrap().map, maps::power(4));
        let inline = r#"{"degree": 2, "components": [[{"exps": [2, 0, 0], "re": 1.0, "im": 0.0}],
            [{"exps": [0, 2, 0], "re": 1.0, "im": 0.0}], [{"exps": [0, 0, 2], "re": 1.0, "im": 0.0}]]}"#;
        assert_eq!(load_map(inline).unwrap().map.degree(), 2);
        assert!(matches!(load_map("nope"), Err(CliError::Usage(_))));
        assert!(matches!(load_map("{"), Err(CliError::Usage(_))));
    }

    #[test]
    fn number_lists() {
        assert_eq!(parse_reals("1, 2.5,-3", "x", 3).unwrap(), vec![1.0, 2.5, -3.0]);
        assert!(parse_reals("1,2", "x", 3).is_err());
        assert!(parse_reals("1,nan,2", "x", 3).is_err());
        assert!(parse_point("0,0,0,0,0,0", "p").is_err());
        let v = parse_vector("2,0,0,0,0,0", "p").unwrap();
        assert_eq!(v[0], C64::new(2.0, 0.0));
    }

    #[test]
    fn config_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"map": "power4", "seed": 3, "tol": 1e-8, "depth": 12}"#).unwrap();
        let common = Common {
            seed: Some(9),
            config: Some(path.clone()),
            ..Common::default()
        };
        let s = Settings::resolve(&common).unwrap();
        assert_eq!(s.seed, Some(9));
        assert_eq!(s.tol, 1e-8);
        assert_eq!(s.file.depth, Some(12));
        assert_eq!(s.require_map("x").unwrap().label, "power4");

        std::fs::write(&path, r#"{"sed": 3}"#).unwrap();
        assert!(matches!(Settings::resolve(&common), Err(CliError::Usage(_))));
        let bad = Common {
            tol: Some(0.5),
            ..Common::default()
        };
        assert!(Settings::resolve(&bad).is_err());
    }
}
