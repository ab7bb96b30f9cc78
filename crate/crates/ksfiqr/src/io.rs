//! Dataset CSV and truth sidecar.
//!
//! A dataset file has the header `env,y,x1,...,xp` and one row per
//! observation; `env` is a 1-based environment label. The intercept is not
//! stored and is prepended on load. Rows are written grouped by environment
//! in label order, and floats use the shortest representation that parses
//! back to the same value, so load → save reproduces an emitted file byte for
//! byte.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ksfiqr_core::scm::{ModelId, ScmTruth};
use ksfiqr_core::{EnvironmentData, MultiEnvDataset};
use serde::{Deserialize, Serialize};

use crate::{format_err, Error, Result};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })
}

/// Parses a dataset; environments get uniform weights.
pub fn parse_dataset<R: Read>(reader: R) -> Result<MultiEnvDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || &header[0] != "env" || &header[1] != "y" {
        return Err(format_err("dataset header must start with `env,y`"));
    }
    for (k, name) in header.iter().skip(2).enumerate() {
        if name != format!("x{}", k + 1) {
            return Err(format_err(format!(
                "column {} is `{name}`, expected `x{}`",
                k + 3,
                k + 1
            )));
        }
    }
    let q = header.len() - 2;
    // per label: (design rows with intercept, responses)
    let mut groups: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = line + 2;
        let label: usize = record[0].trim().parse().map_err(|_| {
            format_err(format!(
                "row {row}: environment label `{}` is not a positive integer",
                &record[0]
            ))
        })?;
        if label == 0 {
            return Err(format_err(format!(
                "row {row}: environment labels start at 1"
            )));
        }
        let value = |k: usize| -> Result<f64> {
            record[k].trim().parse().map_err(|_| {
                format_err(format!(
                    "row {row}, column {}: `{}` is not a number",
                    k + 1,
                    &record[k]
                ))
            })
        };
        if groups.len() < label {
            groups.resize_with(label, Default::default);
        }
        let (x, y) = &mut groups[label - 1];
        y.push(value(1)?);
        x.push(1.0);
        for k in 0..q {
            x.push(value(k + 2)?);
        }
    }
    if groups.is_empty() {
        return Err(format_err("dataset has no rows"));
    }
    if let Some(missing) = groups.iter().position(|(_, y)| y.is_empty()) {
        return Err(format_err(format!(
            "environment {} has no rows; labels must be 1..E",
            missing + 1
        )));
    }
    let envs = groups
        .into_iter()
        .map(|(x, y)| EnvironmentData::new(x, y, q + 1))
        .collect::<ksfiqr_core::Result<Vec<_>>>()?;
    Ok(MultiEnvDataset::uniform(envs)?)
}

pub fn read_dataset(path: &Path) -> Result<MultiEnvDataset> {
    parse_dataset(open(path)?)
}

pub fn write_dataset<W: Write>(ds: &MultiEnvDataset, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    let q = ds.p() - 1;
    let mut header = vec!["env".to_string(), "y".to_string()];
    header.extend((1..=q).map(|j| format!("x{j}")));
    wtr.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(q + 2);
    for (e, env) in ds.envs().iter().enumerate() {
        let label = (e + 1).to_string();
        for (x, y) in env.rows().zip(env.y()) {
            record.clear();
            record.push(label.clone());
            record.push(y.to_string());
            record.extend(x[1..].iter().map(f64::to_string));
            wtr.write_record(&record)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_dataset(ds: &MultiEnvDataset, path: &Path) -> Result<()> {
    write_dataset(ds, create(path)?)
}

/// JSON sidecar describing how a simulated dataset was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q: Option<f64>,
    pub n: usize,
    pub seed: u64,
    /// Includes the (zero) intercept coordinate.
    pub beta_star: Vec<f64>,
    pub s_star: Vec<usize>,
    pub g_set: Vec<usize>,
}

impl TruthFile {
    pub fn new(truth: &ScmTruth, n: usize, seed: u64) -> Self {
        Self {
            model: truth.model_id.label().to_string(),
            q: match truth.model_id {
                ModelId::Model3 { q } => Some(q),
                _ => None,
            },
            n,
            seed,
            beta_star: truth.beta_star.clone(),
            s_star: truth.s_star.indices().to_vec(),
            g_set: truth.g_set.indices().to_vec(),
        }
    }
}

/// `FILE.csv` → `FILE.truth.json`.
pub fn truth_path(data: &Path) -> PathBuf {
    data.with_extension("truth.json")
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(open(
        path,
    )?))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_may_be_interleaved() {
        let text = "env,y,x1\n2,1.5,0.25\n1,-1,3\n2,2,1e-3\n";
        let ds = parse_dataset(text.as_bytes()).unwrap();
        assert_eq!(ds.n_envs(), 2);
        assert_eq!(ds.envs()[0].y(), &[-1.0]);
        assert_eq!(ds.envs()[1].row(1), &[1.0, 0.001]);
        let mut out = Vec::new();
        write_dataset(&ds, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "env,y,x1\n1,-1,3\n2,1.5,0.25\n2,2,0.001\n"
        );
    }

    #[test]
    fn malformed_files_are_rejected() {
        for text in [
            "y,env,x1\n1,1,1\n",
            "env,y,x2\n1,1,1\n",
            "env,y,x1\n0,1,1\n",
            "env,y,x1\n2,1,1\n",
            "env,y,x1\n1,1,abc\n",
            "env,y,x1\n1,1\n",
            "env,y,x1\n",
            "env,y,x1\n1,NaN,1\n",
        ] {
            assert!(parse_dataset(text.as_bytes()).is_err(), "{text:?}");
        }
    }

    #[test]
    fn truth_path_replaces_the_extension() {
        assert_eq!(
            truth_path(Path::new("out/data.csv")),
            PathBuf::from("out/data.truth.json")
        );
    }
}
