use std::fs;
use std::path::Path;

use serde::Serialize;

use super::stats::{rate_cdf, rate_pdf, Histogram, DEFAULT_BIN_WIDTH};
use super::{serde_plain, ExperimentResult, ExperimentSpec, ScalingStudy};
use crate::association::AssociationMatrix;
use crate::error::{Error, Result};

#[derive(Serialize)]
struct Cdf {
    grid: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct Summary<'a> {
    spec: &'a ExperimentSpec,
    num_ue: usize,
    num_bs: usize,
    slots: usize,
    mean_spectral_efficiency: f64,
    mean_min_rate: f64,
    per_user_throughput: &'a [f64],
    association: &'a AssociationMatrix,
    dropped: usize,
    ill_conditioned: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_iterations: Option<f64>,
    rate_pdf: Histogram,
    rate_cdf: Cdf,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `summary.json`, `rates.csv`, `association.csv` and `trace.csv`.
pub fn export_results(result: &ExperimentResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    let samples = result.rate_samples();
    let top = samples.iter().copied().fold(0.0, f64::max);
    let grid: Vec<f64> = (0..=((top / DEFAULT_BIN_WIDTH).ceil() as usize))
        .map(|i| i as f64 * DEFAULT_BIN_WIDTH)
        .collect();
    let summary = Summary {
        spec: &result.spec,
        num_ue: result.num_ue,
        num_bs: result.num_bs,
        slots: result.slots.len(),
        mean_spectral_efficiency: result.mean_spectral_efficiency,
        mean_min_rate: result.mean_min_rate,
        per_user_throughput: &result.per_user_throughput,
        association: &result.association,
        dropped: result.dropped,
        ill_conditioned: result.ill_conditioned,
        mean_iterations: result.mean_iterations(),
        rate_pdf: rate_pdf(&samples, DEFAULT_BIN_WIDTH)?,
        rate_cdf: Cdf {
            values: rate_cdf(&samples, &grid)?,
            grid,
        },
    };
    write_json(&dir.join("summary.json"), &summary)?;

    write_rows(
        &dir.join("rates.csv"),
        &header(&["slot", "ue", "bs", "rate_bps_hz"]),
        result.slots.iter().flat_map(|s| {
            s.per_user_rate.iter().enumerate().map(move |(k, r)| {
                vec![
                    s.slot.to_string(),
                    (k + 1).to_string(),
                    s.activation.serving(k).map_or(String::new(), |j| (j + 1).to_string()),
                    r.to_string(),
                ]
            })
        }),
    )?;

    let mut assoc_header = vec!["ue".to_string()];
    assoc_header.extend((1..=result.num_bs).map(|j| format!("bs{j}")));
    write_rows(
        &dir.join("association.csv"),
        &assoc_header,
        result.association.rows.iter().enumerate().map(|(k, row)| {
            std::iter::once((k + 1).to_string()).chain(row.iter().map(|a| a.to_string()))
        }),
    )?;

    write_rows(
        &dir.join("trace.csv"),
        &header(&["slot", "iteration", "utility"]),
        result.slots.iter().flat_map(|s| {
            s.solve
                .iter()
                .flat_map(|x| x.utility_trace.iter().enumerate())
                .map(move |(i, u)| vec![s.slot.to_string(), i.to_string(), u.to_string()])
        }),
    )
}

/// One sub-directory per spec plus `comparison.csv`.
pub fn export_comparison(results: &[ExperimentResult], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    for r in results {
        export_results(r, dir.join(r.spec.label().replace('/', "_")))?;
    }
    write_rows(
        &dir.join("comparison.csv"),
        &header(&[
            "scheme",
            "csi_mode",
            "interference_mode",
            "utility",
            "mean_spectral_efficiency",
            "mean_min_rate",
            "fraction_below_1",
            "dropped",
        ]),
        results.iter().map(|r| {
            vec![
                r.spec.scheme.to_string(),
                serde_plain(&r.spec.csi_mode),
                serde_plain(&r.spec.interference_mode),
                serde_plain(&r.spec.utility),
                r.mean_spectral_efficiency.to_string(),
                r.mean_min_rate.to_string(),
                r.fraction_below(1.0).to_string(),
                r.dropped.to_string(),
            ]
        }),
    )
}

/// `scaling.json` (table, raw points, fits), `scaling.csv` and `points.csv`.
pub fn export_scaling(study: &ScalingStudy, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    write_json(&dir.join("scaling.json"), study)?;
    write_rows(
        &dir.join("scaling.csv"),
        &header(&[
            "size",
            "label",
            "mean_iterations",
            "min_iterations",
            "max_iterations",
            "mean_wall_time_s",
            "mean_spectral_efficiency",
        ]),
        study.rows.iter().map(|r| {
            vec![
                r.size.to_string(),
                r.label.clone(),
                r.mean_iterations.to_string(),
                r.min_iterations.to_string(),
                r.max_iterations.to_string(),
                r.mean_wall_time.to_string(),
                r.mean_spectral_efficiency.to_string(),
            ]
        }),
    )?;
    write_rows(
        &dir.join("points.csv"),
        &header(&["size", "repetition", "iterations", "wall_time_s", "spectral_efficiency"]),
        study.points.iter().map(|p| {
            vec![
                p.size.to_string(),
                p.repetition.to_string(),
                p.iterations.to_string(),
                p.wall_time.to_string(),
                p.spectral_efficiency.to_string(),
            ]
        }),
    )
}
