//! JSON and CSV persistence.
//!
//! Dictionary JSON is `{"ambient_dim": D, "atoms": [[...], ...], "labels": ["in"|"out", ...]}`.
//! The CSV form starts with a `# ambient_dim=D` line followed by one atom per
//! line whose last field is the label.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Label, PartitionedDictionary, Representation, Signal, EPS_UNIT};
use crate::error::{Error, Result};
use crate::numkit::vector::norm2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileFormat {
    Json,
    Csv,
}

impl FileFormat {
    /// `.csv` selects CSV; anything else is JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => FileFormat::Csv,
            _ => FileFormat::Json,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DictionaryFile {
    ambient_dim: usize,
    atoms: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            location: format!("line {} column {}, field `{path}`", inner.line(), inner.column()),
            message: inner.to_string(),
        }
    })
}

/// Rescales atoms whose norm is off by less than `EPS_UNIT`; larger deviations are errors.
fn build(ambient_dim: usize, atoms: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<PartitionedDictionary> {
    let mut atoms = atoms;
    for (j, a) in atoms.iter_mut().enumerate() {
        let n = norm2(a);
        if (n - 1.0).abs() >= EPS_UNIT {
            return Err(Error::InvalidDictionary(format!(
                "atom {j} has norm {n} instead of 1"
            )));
        }
        if n != 1.0 {
            a.iter_mut().for_each(|x| *x /= n);
        }
    }
    PartitionedDictionary::new(ambient_dim, atoms, labels)
}

pub fn dictionary_from_json_str(text: &str) -> Result<PartitionedDictionary> {
    let f: DictionaryFile = parse_json(text)?;
    build(f.ambient_dim, f.atoms, f.labels)
}

pub fn dictionary_to_json_string(dict: &PartitionedDictionary) -> String {
    let f = DictionaryFile {
        ambient_dim: dict.ambient_dim(),
        atoms: dict.atoms().to_vec(),
        labels: dict.labels().to_vec(),
    };
    serde_json::to_string_pretty(&f).expect("plain data serializes")
}

pub fn dictionary_from_csv_str(text: &str) -> Result<PartitionedDictionary> {
    let parse_err = |line: usize, message: String| Error::Parse {
        location: format!("line {line}"),
        message,
    };
    let mut ambient_dim = None;
    let mut atoms = Vec::new();
    let mut labels = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = k + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("ambient_dim=") {
                let d = v
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| parse_err(lineno, format!("ambient_dim: {e}")))?;
                ambient_dim = Some(d);
            }
            continue;
        }
        let dim = ambient_dim.ok_or_else(|| parse_err(lineno, "missing `# ambient_dim=D` header".into()))?;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(parse_err(
                lineno,
                format!("expected {} fields, found {}", dim + 1, fields.len()),
            ));
        }
        let atom = fields[..dim]
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse::<f64>()
                    .map_err(|e| parse_err(lineno, format!("field {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = match fields[dim] {
            "in" => Label::In,
            "out" => Label::Out,
            other => return Err(parse_err(lineno, format!("label must be `in` or `out`, found `{other}`"))),
        };
        atoms.push(atom);
        labels.push(label);
    }
    let dim = ambient_dim.ok_or_else(|| parse_err(1, "missing `# ambient_dim=D` header".into()))?;
    build(dim, atoms, labels)
}

pub fn dictionary_to_csv_string(dict: &PartitionedDictionary) -> String {
    let mut out = format!("# ambient_dim={}\n", dict.ambient_dim());
    for (a, l) in dict.atoms().iter().zip(dict.labels()) {
        for x in a {
            out.push_str(&format!("{x},"));
        }
        out.push_str(l.as_str());
        out.push('\n');
    }
    out
}

/// Loads a dictionary, picking the format from the extension.
pub fn load_dictionary(path: &Path) -> Result<PartitionedDictionary> {
    let text = std::fs::read_to_string(path)?;
    match FileFormat::from_path(path) {
        FileFormat::Json => dictionary_from_json_str(&text),
        FileFormat::Csv => dictionary_from_csv_str(&text),
    }
}

pub fn save_dictionary(dict: &PartitionedDictionary, path: &Path) -> Result<()> {
    let text = match FileFormat::from_path(path) {
        FileFormat::Json => dictionary_to_json_string(dict),
        FileFormat::Csv => dictionary_to_csv_string(dict),
    };
    std::fs::write(path, text)?;
    Ok(())
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

pub fn load_signal(path: &Path) -> Result<Signal> {
    let s: Signal = parse_json(&std::fs::read_to_string(path)?)?;
    check_finite(&s.b)?;
    Ok(s)
}

pub fn save_signal(signal: &Signal, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(signal)?)?;
    Ok(())
}

pub fn load_representation(path: &Path) -> Result<Representation> {
    let r: Representation = parse_json(&std::fs::read_to_string(path)?)?;
    check_finite(&r.c)?;
    Ok(r)
}

pub fn save_representation(rep: &Representation, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(rep)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dict::fixtures::tilted_plane;

    fn max_diff(a: &PartitionedDictionary, b: &PartitionedDictionary) -> f64 {
        assert_eq!(a.labels(), b.labels());
        a.atoms()
            .iter()
            .flatten()
            .zip(b.atoms().iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        let d = tilted_plane();
        save_dictionary(&d, &path).unwrap();
        let back = load_dictionary(&path).unwrap();
        assert!(max_diff(&d, &back) <= 1e-15);
    }

    #[test]
    fn csv_round_trip_and_cross_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = tilted_plane();
        save_dictionary(&d, &path).unwrap();
        let back = load_dictionary(&path).unwrap();
        assert!(max_diff(&d, &back) <= 1e-15);

        let json = r#"{"ambient_dim": 2, "atoms": [[1, 0], [0.6, 0.8]], "labels": ["in", "out"]}"#;
        let csv = "# ambient_dim=2\n1,0,in\n0.6,0.8,out\n";
        let (a, b) = (dictionary_from_json_str(json), dictionary_from_csv_str(csv));
        assert_eq!(max_diff(&a.unwrap(), &b.unwrap()), 0.0);
    }

    #[test]
    fn malformed_json_names_the_field() {
        let err = dictionary_from_json_str(r#"{"ambient_dim": 2, "atoms": [[1, 0]]}"#).unwrap_err();
        assert!(err.to_string().contains("labels"), "{err}");
        let err = dictionary_from_json_str(r#"{"ambient_dim": 2, "atoms": [[1, "x"]], "labels": ["in"]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("atoms[0][1]"), "{err}");
        let err = dictionary_from_json_str(r#"{"ambient_dim": 2, "atoms": [[1, 0]], "labels": ["maybe"]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("labels[0]"), "{err}");
    }

    #[test]
    fn malformed_csv_names_the_line() {
        let err = dictionary_from_csv_str("# ambient_dim=2\n1,0,in\n1,in\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(dictionary_from_csv_str("1,0,in\n").is_err());
    }

    #[test]
    fn near_unit_atoms_are_renormalized_and_far_ones_rejected() {
        let json = r#"{"ambient_dim": 2, "atoms": [[1.00000000001, 0], [0, 1]], "labels": ["in", "in"]}"#;
        let d = dictionary_from_json_str(json).unwrap();
        assert_eq!(d.atom(0)[0], 1.0);
        let json = r#"{"ambient_dim": 2, "atoms": [[1.001, 0], [0, 1]], "labels": ["in", "in"]}"#;
        assert!(dictionary_from_json_str(json).is_err());
    }

    #[test]
    fn signal_and_representation_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = Signal { b: vec![1.0, 0.0, 0.0] };
        let r = Representation::new(vec![0.40042, 0.60049, 0.0]);
        save_signal(&s, &dir.path().join("s.json")).unwrap();
        save_representation(&r, &dir.path().join("r.json")).unwrap();
        assert_eq!(load_signal(&dir.path().join("s.json")).unwrap(), s);
        assert_eq!(load_representation(&dir.path().join("r.json")).unwrap(), r);
        std::fs::write(dir.path().join("bad.json"), r#"{"c": [1.0]}"#).unwrap();
        let err = load_signal(&dir.path().join("bad.json")).unwrap_err();
        assert!(err.to_string().contains('b'), "{err}");
    }
}
