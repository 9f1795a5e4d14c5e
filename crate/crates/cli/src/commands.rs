use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use patchdim::cca::region_cca_report;
use patchdim::clustering::{eac_dc_similarity, laplacian_mds, spectral_cluster};
use patchdim::dictionary::{
    crop_around_spot, learn_dictionary, learn_dictionary_cca, DictionaryRecord, ImageDictionary,
};
use patchdim::dimension::{estimate_local_dimension, region_dimension_report, Method};
use patchdim::metrics::{ari, jtrend, nmi};
use patchdim::mra::{dimension_by_scale, pair_layers};
use patchdim::phantom::{synthesize, PhantomKind};
use patchdim::{extract_patches, Region};
use serde::Serialize;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::io::{load_pair, load_pairs, read_groups, read_labels, Outputs};

const TIDY_HEADER: [&str; 5] = ["scale", "region", "method", "estimate", "spread"];

fn method_name(method: Method, threshold: Option<f64>) -> String {
    match (method, threshold) {
        (Method::Pca, Some(t)) => format!("pca_{t}"),
        (Method::Pca, None) => "pca".into(),
        (Method::Knn, _) => "knn".into(),
    }
}

fn tidy_row(
    scale: usize,
    region: Region,
    method: Method,
    threshold: Option<f64>,
    estimate: f64,
    spread: Option<f64>,
) -> Vec<String> {
    vec![
        scale.to_string(),
        region.name().to_string(),
        method_name(method, threshold),
        estimate.to_string(),
        spread.map(|s| s.to_string()).unwrap_or_default(),
    ]
}

pub fn synth(kind: PhantomKind, size: usize, cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let p = synthesize(kind, size, cfg.seed)?;
    let mut out = Outputs::default();
    out.image("cont.grd", p.pair.cont())?;
    out.image("mag.grd", p.pair.mag())?;
    out.mask("mask.grd", &p.mask)?;
    Ok(out)
}

pub fn dim(pair: &Path, cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let input = load_pair(pair)?;
    let rows = region_dimension_report(&input.pair, &input.mask, &cfg.dimension)?;
    let mut out = Outputs::default();
    out.json(
        "dim.json",
        &json!({ "source_id": input.id, "estimates": rows }),
    )?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| tidy_row(0, r.region, r.method, r.threshold, r.estimate, r.spread))
        .collect();
    out.csv("dim.csv", &TIDY_HEADER, &table)?;
    Ok(out)
}

pub fn dimmap(pair: &Path, cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let input = load_pair(pair)?;
    let d = &cfg.dimension;
    let patches = extract_patches(&input.pair, d.patch_side, d.padding, d.standardize)?;
    let map = estimate_local_dimension(&patches, &d.graph, &d.local)?;
    let mut out = Outputs::default();
    out.grid("dimmap.mean.grd", map.rows, map.cols, &map.mean_dim)?;
    out.grid("dimmap.std.grd", map.rows, map.cols, &map.std_dim)?;
    Ok(out)
}

pub fn mra(
    pairs: &[PathBuf],
    layers_only: bool,
    cfg: &PipelineConfig,
) -> Result<Outputs, CliError> {
    let inputs = load_pairs(pairs)?;
    let levels = cfg.mra.levels;
    let mut out = Outputs::default();
    for input in &inputs {
        for (j, layer) in pair_layers(&input.pair, levels)?.iter().enumerate() {
            out.image(format!("{}.cont.L{j}.grd", input.id), layer.cont())?;
            out.image(format!("{}.mag.L{j}.grd", input.id), layer.mag())?;
        }
    }
    if !layers_only {
        let images: Vec<_> = inputs.iter().map(|i| i.pair.clone()).collect();
        let masks: Vec<_> = inputs.iter().map(|i| i.mask.clone()).collect();
        let rows = dimension_by_scale(&images, &masks, levels, &cfg.dimension)?;
        let ids: Vec<&str> = inputs.iter().map(|i| i.id.as_str()).collect();
        out.json(
            "mra.json",
            &json!({ "source_ids": ids, "levels": levels, "estimates": rows }),
        )?;
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                tidy_row(
                    r.layer,
                    r.region,
                    r.method,
                    r.threshold,
                    r.estimate,
                    r.spread,
                )
            })
            .collect();
        out.csv("mra.csv", &TIDY_HEADER, &table)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct CcaRow {
    region: Region,
    patch_side: usize,
    count: usize,
    correlations: Vec<f64>,
}

pub fn cca(pair: &Path, cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let input = load_pair(pair)?;
    let report = region_cca_report(
        &input.pair,
        &input.mask,
        &cfg.cca.patch_sides,
        cfg.cca.ridge,
    )?;
    let (rows, cols) = input.pair.shape();
    let mut out = Outputs::default();
    let mut json_rows = Vec::new();
    let mut table = Vec::new();
    let mut images = BTreeMap::new();
    for r in &report {
        for (i, rho) in r.result.correlations.iter().enumerate() {
            table.push(vec![
                r.region.name().to_string(),
                r.patch_side.to_string(),
                (i + 1).to_string(),
                rho.to_string(),
            ]);
        }
        json_rows.push(CcaRow {
            region: r.region,
            patch_side: r.patch_side,
            count: r.count,
            correlations: r.result.correlations.clone(),
        });
        let (u, v) = r.first_images();
        let entry = images.entry(r.patch_side).or_insert_with(|| {
            (
                patchdim::cca::CanonicalImage::empty(rows, cols),
                patchdim::cca::CanonicalImage::empty(rows, cols),
            )
        });
        entry.0.merge(&u);
        entry.1.merge(&v);
    }
    out.json(
        "cca.json",
        &json!({ "source_id": input.id, "regions": json_rows }),
    )?;
    out.csv("cca.csv", &["region", "patch_side", "index", "rho"], &table)?;
    for (side, (u, v)) in images {
        out.grid(format!("u.p{side}.grd"), rows, cols, &u.to_file_values())?;
        out.grid(format!("v.p{side}.grd"), rows, cols, &v.to_file_values())?;
    }
    Ok(out)
}

pub fn dict(pairs: &[PathBuf], cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let inputs = load_pairs(pairs)?;
    let d = &cfg.dictionary;
    let mut out = Outputs::default();
    for input in inputs {
        let (pair, mask) = match d.crop {
            Some(size) => crop_around_spot(&input.pair, &input.mask, size)?,
            None => (input.pair, input.mask),
        };
        let dictionary = if d.use_cca {
            learn_dictionary_cca(&pair, &mask, d.atom_count, &d.cca, &input.id)?
        } else {
            let patches = extract_patches(&pair, d.patch_side, d.padding, d.standardize)?;
            learn_dictionary(&patches, d.atom_count, &input.id)?
        };
        out.json(&format!("{}.dict.json", input.id), &dictionary.to_record())?;
    }
    Ok(out)
}

/// Dictionary files named directly, or every `*.dict.json` inside a named
/// directory, in sorted order.
fn dictionary_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.to_string_lossy().ends_with(".dict.json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn read_dictionary(path: &Path) -> Result<ImageDictionary<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let rec: DictionaryRecord = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(ImageDictionary::from_record(&rec)?)
}

pub fn cluster(paths: &[PathBuf], cfg: &PipelineConfig) -> Result<Outputs, CliError> {
    let files = dictionary_files(paths)?;
    if files.len() < 2 {
        return Err(CliError::Usage(format!(
            "clustering needs at least two dictionaries, got {}",
            files.len()
        )));
    }
    let dicts: Vec<ImageDictionary<f64>> = files
        .iter()
        .map(|f| read_dictionary(f))
        .collect::<Result<_, _>>()?;
    let len = dicts[0].flattened.len();
    if let Some(bad) = dicts.iter().find(|d| d.flattened.len() != len) {
        return Err(CliError::Input(format!(
            "dictionary {:?} has {} values, expected {len}",
            bad.source_id,
            bad.flattened.len()
        )));
    }
    let ids: Vec<&str> = dicts.iter().map(|d| d.source_id.as_str()).collect();
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
        return Err(CliError::Input(format!("duplicate source_id {dup:?}")));
    }
    let points = DMatrix::from_fn(len, dicts.len(), |i, j| dicts[j].flattened[i]);
    let c = &cfg.clustering;
    let sim = eac_dc_similarity(&points, c.ensemble_size, cfg.seed)?;
    let assignment = spectral_cluster(&sim, c.k, cfg.seed)?;
    let q = c.embedding_dims.min(dicts.len() - 1);
    let embedding = laplacian_mds(&sim, q)?;

    let mut out = Outputs::default();
    let rows: Vec<Vec<String>> = ids
        .iter()
        .zip(&assignment.labels)
        .map(|(id, l)| vec![id.to_string(), l.to_string()])
        .collect();
    out.csv("labels.csv", &["source_id", "label"], &rows)?;
    out.json(
        "similarity.json",
        &json!({ "source_ids": ids, "values": sim.to_rows() }),
    )?;
    let eigenvalues: Vec<f64> = embedding.eigenvalues.clone();
    out.json(
        "embedding.json",
        &json!({ "source_ids": ids, "coordinates": embedding.to_rows(), "eigenvalues": eigenvalues }),
    )?;
    Ok(out)
}

pub fn metrics(labels: &[PathBuf], trend: Option<&Path>) -> Result<Outputs, CliError> {
    if labels.is_empty() && trend.is_none() {
        return Err(CliError::Usage(
            "give two --labels files, a --trend file, or both".into(),
        ));
    }
    let mut report = serde_json::Map::new();
    if !labels.is_empty() {
        let [a, b] = labels else {
            return Err(CliError::Usage(format!(
                "--labels needs exactly two files, got {}",
                labels.len()
            )));
        };
        let a = read_labels(a)?;
        let b: BTreeMap<String, String> = read_labels(b)?.into_iter().collect();
        let mut la = Vec::new();
        let mut lb = Vec::new();
        for (id, label) in &a {
            let other = b.get(id).ok_or_else(|| {
                CliError::Input(format!(
                    "source_id {id:?} missing from the second labelling"
                ))
            })?;
            la.push(label.as_str());
            lb.push(other.as_str());
        }
        if la.len() != b.len() {
            return Err(CliError::Input(
                "label files list different source ids".into(),
            ));
        }
        report.insert("n".into(), json!(la.len()));
        report.insert("nmi".into(), json!(nmi(&la, &lb)?));
        report.insert("ari".into(), json!(ari(&la, &lb)?));
    }
    if let Some(path) = trend {
        let (names, groups) = read_groups(path)?;
        let t = jtrend(&groups)?;
        report.insert("trend".into(), json!({ "groups": names, "test": t }));
    }
    let mut out = Outputs::default();
    out.json("metrics.json", &report)?;
    Ok(out)
}
