//! Ground-truth fields on evaluation meshes, their CSV form, and the
//! relative error metric used to score predictions.

pub mod barry_mercer_series;
pub mod fdtd;
pub mod poisson_series;

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::net::MsSirenNet;
use crate::tensor::Tensor;

pub const FIELD_FORMAT_LINE: &str = "# deltapinn-field v1";

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceField {
    /// `[N × dim]`
    pub points: Tensor,
    /// `[N × out_dim]`
    pub values: Tensor,
    /// Points where the value is not meaningful (e.g. the source itself).
    pub singular: Vec<bool>,
    pub coord_names: Vec<String>,
    pub value_names: Vec<String>,
    /// Generator id and parameters, written as CSV comments.
    pub meta: Vec<(String, String)>,
}

impl ReferenceField {
    pub fn new(points: Tensor, values: Tensor, coord_names: &[&str], value_names: &[&str]) -> Result<Self> {
        if points.rows() != values.rows()
            || points.row_len() != coord_names.len()
            || values.row_len() != value_names.len()
        {
            return Err(Error::contract("field points, values and names disagree in shape"));
        }
        let n = points.rows();
        Ok(Self {
            points,
            values,
            singular: vec![false; n],
            coord_names: coord_names.iter().map(|s| s.to_string()).collect(),
            value_names: value_names.iter().map(|s| s.to_string()).collect(),
            meta: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Same points with values replaced.
    pub fn with_values(&self, values: Tensor) -> Result<Self> {
        if values.shape() != self.values.shape() {
            return Err(Error::contract("replacement values have a different shape"));
        }
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    /// Network prediction on this field's points.
    pub fn predict(&self, net: &MsSirenNet) -> Result<Self> {
        let values = net.forward(&self.points)?;
        let mut out = self.with_values(values)?;
        out.meta = vec![("generator".into(), "prediction".into())];
        Ok(out)
    }

    /// Concatenates fields with matching names (e.g. snapshots at several times).
    pub fn concat(fields: &[ReferenceField]) -> Result<Self> {
        let first = fields.first().ok_or_else(|| Error::contract("no fields to concatenate"))?;
        let mut pts = Vec::new();
        let mut vals = Vec::new();
        let mut singular = Vec::new();
        for f in fields {
            if f.coord_names != first.coord_names || f.value_names != first.value_names {
                return Err(Error::contract("fields have different columns"));
            }
            pts.extend_from_slice(f.points.data());
            vals.extend_from_slice(f.values.data());
            singular.extend_from_slice(&f.singular);
        }
        let n = singular.len();
        Ok(Self {
            points: Tensor::new(vec![n, first.coord_names.len()], pts)?,
            values: Tensor::new(vec![n, first.value_names.len()], vals)?,
            singular,
            coord_names: first.coord_names.clone(),
            value_names: first.value_names.clone(),
            meta: first.meta.clone(),
        })
    }

    /// Writes non-singular rows as CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{FIELD_FORMAT_LINE}")?;
        for (k, v) in &self.meta {
            writeln!(w, "# {k} = {v}")?;
        }
        let header: Vec<&str> = self
            .coord_names
            .iter()
            .chain(&self.value_names)
            .map(String::as_str)
            .collect();
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for i in 0..self.len() {
            if self.singular[i] {
                continue;
            }
            line.clear();
            for (k, v) in self.points.row(i).iter().chain(self.values.row(i)).enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads a field written by [`write_csv`](Self::write_csv); the first
    /// `coord_count` columns are coordinates.
    pub fn read_csv<R: Read>(r: R, coord_count: usize) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let first = lines.next().transpose()?.unwrap_or_default();
        if first.trim_end() != FIELD_FORMAT_LINE {
            return Err(Error::Format(format!("unknown field file version line `{first}`")));
        }
        let mut meta = Vec::new();
        let mut header = None;
        let (mut pts, mut vals) = (Vec::new(), Vec::new());
        for (no, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.split_once('=') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            let Some(names) = &header else {
                let names: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
                if names.len() <= coord_count {
                    return Err(Error::Format("field header has no value columns".into()));
                }
                header = Some(names);
                continue;
            };
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", no + 2)))?;
            if row.len() != names.len() {
                return Err(Error::Format(format!("line {}: expected {} columns", no + 2, names.len())));
            }
            pts.extend_from_slice(&row[..coord_count]);
            vals.extend_from_slice(&row[coord_count..]);
        }
        let names = header.ok_or_else(|| Error::Format("field file has no header".into()))?;
        let coords: Vec<&str> = names[..coord_count].iter().map(String::as_str).collect();
        let values: Vec<&str> = names[coord_count..].iter().map(String::as_str).collect();
        let n = pts.len() / coord_count;
        let mut field = Self::new(
            Tensor::new(vec![n, coord_count], pts)?,
            Tensor::new(vec![n, values.len()], vals)?,
            &coords,
            &values,
        )?;
        field.meta = meta;
        Ok(field)
    }

    pub fn write_file(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<std::path::Path>, coord_count: usize) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, coord_count)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct L2Error {
    pub components: Vec<f64>,
    pub mean: f64,
}

/// Per component, `Σ_j |ref_j − pred_j| / Σ_j |ref_j|` over non-excluded
/// rows, plus the mean over components.
pub fn relative_l2_values(prediction: &Tensor, reference: &Tensor, excluded: &[bool]) -> Result<L2Error> {
    if prediction.shape() != reference.shape() || reference.shape().len() != 2 {
        return Err(Error::contract("prediction and reference shapes differ"));
    }
    if excluded.len() != reference.rows() {
        return Err(Error::contract("exclusion mask has the wrong length"));
    }
    let m = reference.row_len();
    let mut num = vec![0.0; m];
    let mut den = vec![0.0; m];
    for j in 0..reference.rows() {
        if excluded[j] {
            continue;
        }
        for (c, (p, r)) in prediction.row(j).iter().zip(reference.row(j)).enumerate() {
            num[c] += (r - p).abs();
            den[c] += r.abs();
        }
    }
    let mut components = Vec::with_capacity(m);
    for c in 0..m {
        if !(den[c] > 0.0) {
            return Err(Error::UndefinedMetric(format!("reference component {c} is identically zero")));
        }
        components.push(num[c] / den[c]);
    }
    let mean = components.iter().sum::<f64>() / m as f64;
    Ok(L2Error { components, mean })
}

pub fn relative_l2(prediction: &ReferenceField, reference: &ReferenceField) -> Result<L2Error> {
    if prediction.points != reference.points {
        return Err(Error::contract("prediction and reference are on different points"));
    }
    let excluded: Vec<bool> = prediction
        .singular
        .iter()
        .zip(&reference.singular)
        .map(|(a, b)| *a || *b)
        .collect();
    relative_l2_values(&prediction.values, &reference.values, &excluded)
}

/// `n × n` grid over a rectangle, row-major in `y` then `x`.
pub fn grid_2d(lo: [f64; 2], hi: [f64; 2], n: usize, interior_only: bool) -> Vec<[f64; 2]> {
    let step = [(hi[0] - lo[0]) / (n - 1) as f64, (hi[1] - lo[1]) / (n - 1) as f64];
    let range = if interior_only { 1..n - 1 } else { 0..n };
    let mut out = Vec::new();
    for j in range.clone() {
        for i in range.clone() {
            out.push([lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1]]);
        }
    }
    out
}
