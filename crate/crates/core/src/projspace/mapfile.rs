//! Map description files.
//!
//! ```json
//! {"degree": 2,
//!  "components": [[{"exps": [2,0,0], "re": 1.0, "im": 0.0}], ...],
//!  "fibered": true}
//! ```
//!
//! Three components with exponent triples describe a map of the plane. Two
//! components with exponent pairs describe a map `[P:Q]` of the line, which is
//! loaded as its suspension `[P:Q:tᵈ]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{monomial_count, monomial_index, monomials, BaseMap, HomPolyMap, ProjError};
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub exps: Vec<usize>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub degree: usize,
    pub components: Vec<Vec<Term>>,
    #[serde(default)]
    pub fibered: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum MapFileError {
    #[error("cannot read map file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed map file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Map(#[from] ProjError),
}

impl MapFile {
    pub fn from_map(f: &HomPolyMap, name: Option<&str>) -> Self {
        let d = f.degree();
        let components = f
            .components()
            .iter()
            .map(|cs| {
                monomials(d)
                    .into_iter()
                    .zip(cs)
                    .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
                    .map(|(e, c)| Term {
                        exps: e.to_vec(),
                        re: c.re,
                        im: c.im,
                    })
                    .collect()
            })
            .collect();
        Self {
            name: name.map(str::to_owned),
            degree: d,
            components,
            fibered: f.is_fibered(),
        }
    }

    pub fn into_map(self) -> Result<HomPolyMap, ProjError> {
        let d = self.degree;
        if !(2..=super::MAX_DEGREE).contains(&d) {
            return Err(ProjError::UnsupportedDegree(d));
        }
        match self.components.len() {
            2 => {
                let mut tables = [vec![C64::new(0.0, 0.0); d + 1], vec![C64::new(0.0, 0.0); d + 1]];
                for (c, terms) in self.components.iter().enumerate() {
                    for t in terms {
                        let [i, j] = t.exps[..] else {
                            return Err(ProjError::InvalidMap(
                                "line maps use exponent pairs".into(),
                            ));
                        };
                        if i + j != d {
                            return Err(ProjError::InvalidMap(format!(
                                "term z^{i} w^{j} is not of degree {d}"
                            )));
                        }
                        tables[c][i] += C64::new(t.re, t.im);
                    }
                }
                let [p, q] = tables;
                Ok(BaseMap::new(d, p, q)?.suspension())
            }
            3 => {
                let n = monomial_count(d);
                let mut tables = [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]];
                for (c, terms) in self.components.iter().enumerate() {
                    for t in terms {
                        let [i, j, k] = t.exps[..] else {
                            return Err(ProjError::InvalidMap(
                                "plane maps use exponent triples".into(),
                            ));
                        };
                        if i + j + k != d {
                            return Err(ProjError::InvalidMap(format!(
                                "term z^{i} w^{j} t^{k} is not homogeneous of degree {d}"
                            )));
                        }
                        tables[c][monomial_index(d, i, j)] += C64::new(t.re, t.im);
                    }
                }
                let f = HomPolyMap::new(d, tables)?;
                if self.fibered {
                    f.into_fibered()
                } else {
                    Ok(f)
                }
            }
            n => Err(ProjError::InvalidMap(format!(
                "expected 2 or 3 components, found {n}"
            ))),
        }
    }
}

pub fn parse_map(text: &str) -> Result<HomPolyMap, MapFileError> {
    let file: MapFile = serde_json::from_str(text)?;
    Ok(file.into_map()?)
}

pub fn read_map(path: &Path) -> Result<HomPolyMap, MapFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| MapFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_map(&text)
}

pub fn write_map(path: &Path, f: &HomPolyMap, name: Option<&str>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(&MapFile::from_map(f, name))
        .expect("map file serializes");
    std::fs::write(path, text + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;

    #[test]
    fn round_trip_through_text() {
        let f = maps::lattes4_suspension();
        let text = serde_json::to_string(&MapFile::from_map(&f, Some("x"))).unwrap();
        let g = parse_map(&text).unwrap();
        assert_eq!(f, g);
        assert!(g.is_fibered());
    }

    #[test]
    fn rejects_inhomogeneous_terms() {
        let text = r#"{"degree":2,"components":[[{"exps":[2,0,0],"re":1,"im":0}],
            [{"exps":[1,0,0],"re":1,"im":0}],[{"exps":[0,0,2],"re":1,"im":0}]],"fibered":false}"#;
        assert!(matches!(parse_map(text), Err(MapFileError::Map(ProjError::InvalidMap(_)))));
    }

    #[test]
    fn line_map_loads_as_suspension() {
        let text = r#"{"degree":2,"components":[[{"exps":[2,0],"re":1,"im":0}],
            [{"exps":[0,2],"re":1,"im":0}]]}"#;
        let f = parse_map(text).unwrap();
        assert_eq!(f, maps::power(2).into_fibered().unwrap());
    }
}
