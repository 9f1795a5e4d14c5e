//! Input loading and staged output. Commands render every file into memory
//! first, so a failing command leaves the output directory untouched.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use patchdim::grd;
use patchdim::{ImageGrid, ImagePair, Modality, Region, RegionMask};
use serde::Serialize;

use crate::error::CliError;

pub struct PairInput {
    pub id: String,
    pub pair: ImagePair<f64>,
    pub mask: RegionMask,
}

fn source_id(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Reads `cont.grd`, `mag.grd` and, if present, `mask.grd` from `dir`.
/// Without a mask every pixel is background.
pub fn load_pair(dir: &Path) -> Result<PairInput, CliError> {
    let need = |name: &str| -> Result<PathBuf, CliError> {
        let p = dir.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::Input(format!("missing {}", p.display())))
        }
    };
    let cont: ImageGrid<f64> = grd::read_image(need("cont.grd")?, Modality::Continuum)?;
    let mag: ImageGrid<f64> = grd::read_image(need("mag.grd")?, Modality::Magnetogram)?;
    let pair = ImagePair::new(cont, mag)?;
    let mask_path = dir.join("mask.grd");
    let mask = if mask_path.is_file() {
        let m = grd::read_mask(&mask_path)?;
        m.check_shape(pair.shape())?;
        m
    } else {
        RegionMask::uniform(pair.shape().0, pair.shape().1, Region::Background)?
    };
    Ok(PairInput {
        id: source_id(dir),
        pair,
        mask,
    })
}

/// Loads several pairs and checks their ids are distinct.
pub fn load_pairs(dirs: &[PathBuf]) -> Result<Vec<PairInput>, CliError> {
    if dirs.is_empty() {
        return Err(CliError::Usage("at least one --pair is required".into()));
    }
    let pairs: Vec<PairInput> = dirs
        .iter()
        .map(|d| load_pair(d))
        .collect::<Result<_, _>>()?;
    let mut seen = BTreeSet::new();
    for p in &pairs {
        if !seen.insert(p.id.as_str()) {
            return Err(CliError::Usage(format!("duplicate pair name {:?}", p.id)));
        }
    }
    Ok(pairs)
}

#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes =
            serde_json::to_vec_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn grid(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        values: &[f64],
    ) -> Result<(), CliError> {
        let mut bytes = Vec::new();
        grd::write_f64(&mut bytes, rows, cols, values)?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn image(&mut self, name: impl Into<String>, img: &ImageGrid<f64>) -> Result<(), CliError> {
        self.grid(name, img.rows(), img.cols(), img.values())
    }

    pub fn mask(&mut self, name: impl Into<String>, mask: &RegionMask) -> Result<(), CliError> {
        let mut bytes = Vec::new();
        grd::write_u8(&mut bytes, mask.rows(), mask.cols(), &mask.codes())?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn csv<S: AsRef<[u8]>>(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<S>],
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Output(e.to_string());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Output(e.to_string()))?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn commit(self, dir: &Path) -> Result<(), CliError> {
        let err = |p: &Path, e: std::io::Error| CliError::Output(format!("{}: {e}", p.display()));
        fs::create_dir_all(dir).map_err(|e| err(dir, e))?;
        for (name, bytes) in self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| err(&path, e))?;
        }
        Ok(())
    }
}

/// Reads a `source_id,label` CSV.
pub fn read_labels(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let bad = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(bad)?;
    let headers = r.headers().map_err(bad)?.clone();
    if headers.len() != 2 || &headers[0] != "source_id" || &headers[1] != "label" {
        return Err(CliError::Input(format!(
            "{}: expected header source_id,label",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(bad)?;
        out.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(out)
}

/// Reads a `group,value` CSV into groups ordered by first appearance.
pub fn read_groups(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let bad = |msg: String| CliError::Input(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut names: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 2 {
            return Err(bad("expected two columns group,value".into()));
        }
        let v: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad value {:?}", &rec[1])))?;
        let i = match names.iter().position(|n| n == &rec[0]) {
            Some(i) => i,
            None => {
                names.push(rec[0].to_string());
                groups.push(Vec::new());
                names.len() - 1
            }
        };
        groups[i].push(v);
    }
    Ok((names, groups))
}
