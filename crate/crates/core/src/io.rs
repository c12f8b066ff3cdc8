//! CSV ingestion, irregular-grid regularisation and model files.
//!
//! Two curve layouts are recognised from the header:
//!
//! - wide: one row per curve, one column per grid point, and an optional final
//!   column named `y` holding the responses;
//! - long: columns `curve_id,time,value`, one row per observation, with the
//!   responses in a separate `curve_id,y` file.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so values
//! read back from any file produced here are bitwise identical.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{FittedModel, FunctionalSample};
use crate::selection::GcvPoint;
use crate::spline::{Grid, NaturalSplineSpace, PenaltyOperator};

/// Version written by [`save_model`] and accepted by [`load_model`].
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Curves in wide layout; `y` is present when the file has a `y` column.
#[derive(Debug, Clone, PartialEq)]
pub struct WideCurves {
    pub x: DMatrix<f64>,
    pub y: Option<DVector<f64>>,
}

impl WideCurves {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Sample on the equidistant grid with `p` columns.
    pub fn into_sample(self) -> Result<FunctionalSample> {
        let y = self
            .y
            .ok_or_else(|| Error::InvalidInput("curves file has no `y` column".into()))?;
        FunctionalSample::new(Grid::new(self.x.ncols())?, self.x, y)
    }
}

/// One irregularly observed curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCurve {
    pub id: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl RawCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Curves observed at their own times, with optional responses in curve order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawObservationSet {
    pub curves: Vec<RawCurve>,
    pub responses: Option<Vec<f64>>,
}

impl RawObservationSet {
    pub fn new(curves: Vec<RawCurve>, responses: Option<Vec<f64>>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::InvalidInput("no curves".into()));
        }
        for c in &curves {
            if c.times.len() != c.values.len() {
                return Err(Error::InvalidInput(format!("curve {}: times and values differ in length", c.id)));
            }
            if c.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "curve {} has {} observation(s); at least 2 are needed",
                    c.id,
                    c.len()
                )));
            }
            if c.times.iter().chain(&c.values).any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("curve {} has non-finite entries", c.id)));
            }
        }
        if let Some(y) = &responses {
            if y.len() != curves.len() {
                return Err(Error::DimensionMismatch {
                    expected: curves.len(),
                    found: y.len(),
                });
            }
        }
        Ok(Self { curves, responses })
    }

    pub fn n(&self) -> usize {
        self.curves.len()
    }

    pub fn max_points(&self) -> usize {
        self.curves.iter().map(RawCurve::len).max().unwrap_or(0)
    }

    pub fn min_points(&self) -> usize {
        self.curves.iter().map(RawCurve::len).min().unwrap_or(0)
    }

    /// Smallest and largest observation time over all curves.
    pub fn time_span(&self) -> (f64, f64) {
        self.curves
            .iter()
            .flat_map(|c| c.times.iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)))
    }

    /// Map times affinely from `range` (or the observed span when `None`)
    /// onto `[0, 1]`. Returns a warning when the range had to be inferred.
    pub fn rescale_times(&mut self, range: Option<(f64, f64)>) -> Result<Option<String>> {
        let (lo, hi) = match range {
            Some(r) => r,
            None => self.time_span(),
        };
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidArgument(format!("invalid time range [{lo}, {hi}]")));
        }
        if range.is_some() {
            let (a, b) = self.time_span();
            if a < lo || b > hi {
                return Err(Error::InvalidInput(format!(
                    "observation times [{a}, {b}] fall outside the declared range [{lo}, {hi}]"
                )));
            }
        }
        for c in &mut self.curves {
            for t in &mut c.times {
                *t = ((*t - lo) / (hi - lo)).clamp(0.0, 1.0);
            }
        }
        Ok(range
            .is_none()
            .then(|| format!("time range inferred from data as [{lo}, {hi}]")))
    }
}

/// Contents of a curves file.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveData {
    Wide(WideCurves),
    Long(RawObservationSet),
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => parse_err(line, format!("{kind:?}")),
    }
}

fn parse_number(cell: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("column `{column}`: cannot parse {cell:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("column `{column}`: non-finite value {cell:?}")));
    }
    Ok(v)
}

struct Table {
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(reader: impl Read) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(parse_err(1, "empty file")),
        Some(r) => r.map_err(csv_err)?.iter().map(str::to_string).collect::<Vec<_>>(),
    };
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(parse_err(2, "no data rows"));
    }
    Ok(Table { header, rows })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Read a curves file, detecting the layout from its header. Long-layout
/// files take their responses from `responses` when given.
pub fn load_curves_csv(path: &Path, responses: Option<&Path>) -> Result<CurveData> {
    let table = read_table(open(path)?)?;
    if table.header.first().map(String::as_str) == Some("curve_id") {
        let y = responses.map(|r| read_table(open(r)?)).transpose()?;
        Ok(CurveData::Long(parse_long(table, y)?))
    } else {
        if responses.is_some() {
            return Err(Error::InvalidArgument(
                "a separate responses file is only used with long-format curves".into(),
            ));
        }
        Ok(CurveData::Wide(parse_wide(table)?))
    }
}

/// Parse wide-layout CSV text.
pub fn parse_wide_csv(reader: impl Read) -> Result<WideCurves> {
    parse_wide(read_table(reader)?)
}

fn parse_wide(table: Table) -> Result<WideCurves> {
    let has_y = table.header.last().map(String::as_str) == Some("y");
    let p = table.header.len() - usize::from(has_y);
    if p == 0 {
        return Err(parse_err(1, "header has no curve columns"));
    }
    let n = table.rows.len();
    let mut x = DMatrix::zeros(n, p);
    let mut y = has_y.then(|| DVector::zeros(n));
    for (i, (line, row)) in table.rows.iter().enumerate() {
        for j in 0..p {
            x[(i, j)] = parse_number(&row[j], *line, &table.header[j])?;
        }
        if let Some(y) = y.as_mut() {
            y[i] = parse_number(&row[p], *line, "y")?;
        }
    }
    Ok(WideCurves { x, y })
}

fn parse_long(table: Table, responses: Option<Table>) -> Result<RawObservationSet> {
    if table.header != ["curve_id", "time", "value"] {
        return Err(parse_err(1, "long format expects the header `curve_id,time,value`"));
    }
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut curves: Vec<RawCurve> = Vec::new();
    for (line, row) in &table.rows {
        let t = parse_number(&row[1], *line, "time")?;
        let v = parse_number(&row[2], *line, "value")?;
        let k = *index.entry(row[0].clone()).or_insert_with(|| {
            order.push((row[0].clone(), *line));
            curves.push(RawCurve {
                id: row[0].clone(),
                times: Vec::new(),
                values: Vec::new(),
            });
            curves.len() - 1
        });
        curves[k].times.push(t);
        curves[k].values.push(v);
    }
    for (c, (_, line)) in curves.iter().zip(&order) {
        if c.len() < 2 {
            return Err(parse_err(*line, format!("curve {} has fewer than 2 observations", c.id)));
        }
    }
    let y = match responses {
        None => None,
        Some(rt) => {
            if rt.header != ["curve_id", "y"] {
                return Err(parse_err(1, "responses file expects the header `curve_id,y`"));
            }
            let mut by_id = HashMap::new();
            for (line, row) in &rt.rows {
                let v = parse_number(&row[1], *line, "y")?;
                if by_id.insert(row[0].clone(), v).is_some() {
                    return Err(parse_err(*line, format!("duplicate response for curve {}", row[0])));
                }
            }
            let mut y = Vec::with_capacity(curves.len());
            for (id, line) in &order {
                match by_id.get(id) {
                    Some(&v) => y.push(v),
                    None => return Err(parse_err(*line, format!("no response for curve {id}"))),
                }
            }
            Some(y)
        }
    };
    RawObservationSet::new(curves, y)
}

/// Curves evaluated on the equidistant grid.
#[derive(Debug, Clone)]
pub struct RegularizedCurves {
    pub x: DMatrix<f64>,
    /// Smallest number of observations of any curve.
    pub min_points: usize,
    /// Indices of curves whose span does not cover the whole grid; their
    /// values outside the span come from the natural spline's linear extension.
    pub extrapolated: Vec<usize>,
}

/// Interpolate every curve by the natural spline of order `2m` on its own
/// observation times and evaluate it at the `p`-point grid. Times must
/// already lie in `[0, 1]`.
pub fn regularize_curves(raw: &RawObservationSet, p: usize, m: usize) -> Result<RegularizedCurves> {
    let max_points = raw.max_points();
    if p <= max_points {
        return Err(Error::GridTooCoarse { p, max_points });
    }
    let grid = Grid::new(p)?;
    let pts = grid.points();
    let mut x = DMatrix::zeros(raw.n(), p);
    let mut extrapolated = Vec::new();
    for (i, c) in raw.curves.iter().enumerate() {
        if c.times.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidInput(format!("curve {}: times must lie in [0, 1]", c.id)));
        }
        let mut obs: Vec<(f64, f64)> = c.times.iter().copied().zip(c.values.iter().copied()).collect();
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if obs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput(format!("curve {}: duplicate observation times", c.id)));
        }
        let (times, values): (Vec<f64>, Vec<f64>) = obs.into_iter().unzip();
        let spline = NaturalSplineSpace::new(&times, m)?.interpolate(&values)?;
        for (j, &t) in pts.iter().enumerate() {
            x[(i, j)] = spline.eval(t);
        }
        if pts[0] < times[0] || pts[p - 1] > times[times.len() - 1] {
            extrapolated.push(i);
        }
    }
    Ok(RegularizedCurves {
        x,
        min_points: raw.min_points(),
        extrapolated,
    })
}

/// A regularised sample with its diagnostics.
#[derive(Debug, Clone)]
pub struct Regularized {
    pub sample: FunctionalSample,
    pub min_points: usize,
    pub extrapolated: Vec<usize>,
}

/// [`regularize_curves`] followed by attaching the responses unchanged.
pub fn regularize(raw: &RawObservationSet, p: usize, m: usize) -> Result<Regularized> {
    let y = raw
        .responses
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("regularization needs responses".into()))?;
    let curves = regularize_curves(raw, p, m)?;
    let sample = FunctionalSample::new(Grid::new(p)?, curves.x, DVector::from_column_slice(y))?;
    Ok(Regularized {
        sample,
        min_points: curves.min_points,
        extrapolated: curves.extrapolated,
    })
}

/// Where a saved model came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gcv_trace: Vec<GcvPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_digest: Option<String>,
    /// Smallest per-curve observation count when the input was regularised.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Versioned JSON representation of a [`FittedModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub m: usize,
    pub rho: f64,
    pub p: usize,
    pub alpha_hat: Vec<f64>,
    pub alpha0_hat: f64,
    pub x_mean: Vec<f64>,
    pub y_mean: f64,
    pub sigma_eps_hat_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_delta_hat_sq: Option<f64>,
    #[serde(default)]
    pub corrected: bool,
    #[serde(default)]
    pub provenance: Provenance,
}

impl ModelFile {
    pub fn from_model(model: &FittedModel) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            m: model.m,
            rho: model.rho,
            p: model.p(),
            alpha_hat: model.alpha_hat.iter().copied().collect(),
            alpha0_hat: model.alpha0_hat,
            x_mean: model.x_mean.iter().copied().collect(),
            y_mean: model.y_mean,
            sigma_eps_hat_sq: model.sigma_eps_hat_sq,
            sigma_delta_hat_sq: None,
            corrected: false,
            provenance: Provenance::default(),
        }
    }

    /// Rebuild the model, including its spline representation.
    pub fn to_model(&self) -> Result<FittedModel> {
        if self.alpha_hat.len() != self.p || self.x_mean.len() != self.p {
            return Err(Error::InvalidInput(format!(
                "model file declares p = {} but stores {} coefficients and {} means",
                self.p,
                self.alpha_hat.len(),
                self.x_mean.len()
            )));
        }
        let op = PenaltyOperator::new(&Grid::new(self.p)?, self.m)?;
        let mut model = FittedModel::from_parts(
            &op,
            DVector::from_column_slice(&self.alpha_hat),
            self.rho,
            DVector::from_column_slice(&self.x_mean),
            self.y_mean,
        )?;
        model.alpha0_hat = self.alpha0_hat;
        model.sigma_eps_hat_sq = self.sigma_eps_hat_sq;
        Ok(model)
    }
}

fn json_err(e: serde_json::Error) -> Error {
    if e.is_io() {
        Error::Json(e)
    } else {
        parse_err(e.line() as u64, e.to_string())
    }
}

/// Serialise a model file as pretty-printed JSON.
pub fn write_model(file: &ModelFile, mut writer: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, file)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Parse a model file, checking its version before its fields.
pub fn read_model(reader: impl Read) -> Result<ModelFile> {
    let value: serde_json::Value = serde_json::from_reader(reader).map_err(json_err)?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| parse_err(1, "missing `format_version`"))?;
    if version != u64::from(MODEL_FORMAT_VERSION) {
        return Err(Error::UnsupportedVersion {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            supported: MODEL_FORMAT_VERSION,
        });
    }
    serde_json::from_value(value).map_err(json_err)
}

pub fn save_model(file: &ModelFile, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    write_model(file, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    read_model(std::io::BufReader::new(open(path)?))
}

/// Write a CSV table of numbers.
pub fn write_csv<W: Write>(writer: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(f64::to_string)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a CSV table whose first column is a label.
pub fn write_labeled_csv<W: Write>(
    writer: W,
    header: &[&str],
    rows: impl IntoIterator<Item = (String, Vec<f64>)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header).map_err(csv_err)?;
    for (label, row) in rows {
        let mut rec = vec![label];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Write `sample` in wide layout with a `y` column.
pub fn write_wide_csv<W: Write>(writer: W, sample: &FunctionalSample) -> Result<()> {
    let mut header: Vec<String> = (1..=sample.p()).map(|j| format!("t_{j}")).collect();
    header.push("y".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..sample.n()).map(|i| {
        let mut r: Vec<f64> = sample.x().row(i).iter().copied().collect();
        r.push(sample.y()[i]);
        r
    });
    write_csv(writer, &header, rows)
}
