//! On-disk formats. Reals are written with 17 significant digits so every
//! `f64` reads back bit-identical.

use std::fs;
use std::io;
use std::path::Path;

use condmode::{Bandwidth, Dataset, JointKernelModel, Mixture, Point};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

/// Decimal text for `v` with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON whose floats use [`fmt_real`].
struct RealFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for RealFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_real(value).as_bytes())
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<S: Serialize>(value: &S) -> String {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, RealFormatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<D> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::format(path, Some(e.line() as u64), e.to_string()))
}

/// How the bandwidth of a fitted model was chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub bandwidth: Vec<f64>,
    /// `"fixed"` or `"loo"`.
    pub selection: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loo_grid: Option<Vec<f64>>,
    /// Leave-one-out log-likelihood per grid entry; `null` for `-inf`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loo_scores: Option<Vec<Option<f64>>>,
}

/// JSON document for a joint kernel model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub dx: usize,
    pub dy: usize,
    pub weights: Vec<f64>,
    pub x_centers: Vec<Vec<f64>>,
    pub y_centers: Vec<Vec<f64>>,
    pub x_bandwidths: Vec<Vec<f64>>,
    pub y_bandwidths: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<FitMetadata>,
}

impl ModelFile {
    pub fn from_model(model: &JointKernelModel<f64>, metadata: Option<FitMetadata>) -> Self {
        type Row = for<'m> fn(&'m JointKernelModel<f64>, usize) -> &'m [f64];
        let rows = |f: Row| (0..model.len()).map(|i| f(model, i).to_vec()).collect();
        ModelFile {
            version: FORMAT_VERSION,
            dx: model.dx(),
            dy: model.dy(),
            weights: model.weights().to_vec(),
            x_centers: rows(JointKernelModel::x_center),
            y_centers: rows(JointKernelModel::y_center),
            x_bandwidths: rows(JointKernelModel::x_bandwidth),
            y_bandwidths: rows(JointKernelModel::y_bandwidth),
            metadata,
        }
    }

    pub fn to_model(&self) -> condmode::Result<JointKernelModel<f64>> {
        let points = |rows: &[Vec<f64>]| {
            rows.iter()
                .map(|r| Point::new(r.clone()))
                .collect::<condmode::Result<Vec<_>>>()
        };
        let bws = |rows: &[Vec<f64>]| {
            rows.iter()
                .map(|r| Bandwidth::new(r.clone()))
                .collect::<condmode::Result<Vec<_>>>()
        };
        let model = JointKernelModel::new(
            self.weights.clone(),
            points(&self.x_centers)?,
            points(&self.y_centers)?,
            bws(&self.x_bandwidths)?,
            bws(&self.y_bandwidths)?,
        )?;
        if model.dx() != self.dx || model.dy() != self.dy {
            return Err(condmode::Error::DimensionMismatch {
                expected: self.dx + self.dy,
                found: model.dx() + model.dy(),
            });
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> CliResult<(Self, JointKernelModel<f64>)> {
        let file: ModelFile = read_json(path)?;
        check_version(path, file.version)?;
        let model = file
            .to_model()
            .map_err(|e| CliError::format(path, None, format!("invalid model: {e}")))?;
        Ok((file, model))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_text(path, &to_json(self))
    }
}

/// JSON document for a plain mixture over `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureFile {
    pub version: u32,
    pub d: usize,
    pub weights: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    pub bandwidths: Vec<Vec<f64>>,
}

impl MixtureFile {
    pub fn from_mixture(mix: &Mixture<f64>) -> Self {
        MixtureFile {
            version: FORMAT_VERSION,
            d: mix.dim(),
            weights: mix.weights().to_vec(),
            centers: (0..mix.len()).map(|i| mix.center(i).to_vec()).collect(),
            bandwidths: (0..mix.len()).map(|i| mix.bandwidth(i).to_vec()).collect(),
        }
    }

    pub fn to_mixture(&self) -> condmode::Result<Mixture<f64>> {
        let mix = Mixture::new(
            self.weights.clone(),
            self.centers
                .iter()
                .map(|r| Point::new(r.clone()))
                .collect::<condmode::Result<_>>()?,
            self.bandwidths
                .iter()
                .map(|r| Bandwidth::new(r.clone()))
                .collect::<condmode::Result<_>>()?,
        )?;
        if mix.dim() != self.d {
            return Err(condmode::Error::DimensionMismatch {
                expected: self.d,
                found: mix.dim(),
            });
        }
        Ok(mix)
    }

    pub fn load(path: &Path) -> CliResult<Mixture<f64>> {
        let file: MixtureFile = read_json(path)?;
        check_version(path, file.version)?;
        file.to_mixture()
            .map_err(|e| CliError::format(path, None, format!("invalid mixture: {e}")))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_text(path, &to_json(self))
    }
}

fn check_version(path: &Path, version: u32) -> CliResult<()> {
    if version != FORMAT_VERSION {
        return Err(CliError::format(
            path,
            None,
            format!("unsupported format version {version}"),
        ));
    }
    Ok(())
}

/// Column names `prefix1..prefixN`.
pub fn column_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

/// Serializes rows of cells into CSV text.
pub fn csv_text(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV write");
    for row in rows {
        w.write_record(&row).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV output is UTF-8")
}

/// Parses a CSV of reals. Returns the header and the rows.
pub fn read_real_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::format(path, Some(1), e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line());
            CliError::format(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line());
        let row = record
            .iter()
            .map(|cell| match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::format(
                    path,
                    line,
                    format!("not a finite real: {cell:?}"),
                )),
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads a dataset CSV with header `x1,..,x<dx>,y1,..,y<dy>`.
pub fn load_dataset(path: &Path) -> CliResult<Dataset<f64>> {
    let (header, rows) = read_real_csv(path)?;
    let dx = header.iter().take_while(|h| h.starts_with('x')).count();
    let dy = header.len() - dx;
    let mut expected = column_names("x", dx);
    expected.extend(column_names("y", dy));
    if dx == 0 || dy == 0 || header != expected {
        return Err(CliError::format(
            path,
            Some(1),
            format!(
                "header must be x1..x<dx>,y1..y<dy>, found {}",
                header.join(",")
            ),
        ));
    }
    if rows.is_empty() {
        return Err(CliError::format(path, None, "dataset has no rows"));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for row in &rows {
        xs.extend_from_slice(&row[..dx]);
        ys.extend_from_slice(&row[dx..]);
    }
    Dataset::from_flat(dx, dy, xs, ys).map_err(|e| CliError::format(path, None, e.to_string()))
}

pub fn dataset_csv(data: &Dataset<f64>) -> String {
    let mut header = column_names("x", data.dx());
    header.extend(column_names("y", data.dy()));
    csv_text(
        &header,
        data.rows()
            .map(|(x, y)| x.iter().chain(y).map(|&v| fmt_real(v)).collect()),
    )
}

pub fn save_dataset(data: &Dataset<f64>, path: &Path) -> CliResult<()> {
    write_text(path, &dataset_csv(data))
}
