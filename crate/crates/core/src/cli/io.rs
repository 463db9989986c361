use std::path::Path;

use crate::error::{Error, Result};
use crate::matcalc::{Matrix, Vector};
use crate::model::rows::MomentDoc;
use crate::model::{MatchedSample, MomentSet};
use crate::policy::NumericPolicy;

/// Column layout implied by a sample header `x1..xm,y1..yn[,tau]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleLayout {
    pub m: usize,
    pub n: usize,
    pub transfers: bool,
}

pub fn parse_header(header: &[&str]) -> Result<SampleLayout> {
    let mismatch = |why: String| Error::HeaderMismatch(format!("{why} (header: {})", header.join(",")));
    let mut k = 0;
    let mut m = 0;
    while k < header.len() && header[k].trim() == format!("x{}", m + 1) {
        m += 1;
        k += 1;
    }
    let mut n = 0;
    while k < header.len() && header[k].trim() == format!("y{}", n + 1) {
        n += 1;
        k += 1;
    }
    let transfers = k < header.len() && header[k].trim() == "tau";
    if transfers {
        k += 1;
    }
    if m == 0 {
        return Err(mismatch("expected leading columns x1..xm".into()));
    }
    if n == 0 {
        return Err(mismatch(format!("expected y1..yn after x1..x{m}")));
    }
    if k != header.len() {
        return Err(mismatch(format!("unexpected column {:?} at position {}", header[k], k + 1)));
    }
    Ok(SampleLayout { m, n, transfers })
}

/// Read matched pairs from CSV; dimensions come from the header.
pub fn read_sample(path: &Path) -> Result<MatchedSample> {
    let file = std::fs::File::open(path)?;
    read_sample_from(file)
}

pub fn read_sample_from<R: std::io::Read>(reader: R) -> Result<MatchedSample> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::HeaderMismatch(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let layout = parse_header(&refs)?;
    let width = layout.m + layout.n + usize::from(layout.transfers);
    let mut flat = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| Error::Parse {
            location: format!("sample row {row}"),
            message: e.to_string(),
        })?;
        if rec.len() != width {
            return Err(Error::Parse {
                location: format!("sample row {row}"),
                message: format!("expected {width} cells, found {}", rec.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                row,
                col: c + 1,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericCell {
                    row,
                    col: c + 1,
                    value: cell.to_string(),
                });
            }
            flat.push(v);
        }
    }
    let rows = flat.len() / width;
    let all = Matrix::from_row_slice(rows, width, &flat);
    let x = all.columns(0, layout.m).into_owned();
    let y = all.columns(layout.m, layout.n).into_owned();
    let tau = layout
        .transfers
        .then(|| Vector::from_iterator(rows, all.column(width - 1).iter().copied()));
    log::info!("read {rows} matched pairs (m = {}, n = {})", layout.m, layout.n);
    MatchedSample::new(x, y, tau)
}

/// Write a sample in the layout [`read_sample`] accepts. Numbers use shortest round-trip formatting.
pub fn write_sample(path: &Path, sample: &MatchedSample) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_sample_to(file, sample)
}

pub fn write_sample_to<W: std::io::Write>(writer: W, sample: &MatchedSample) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=sample.m()).map(|i| format!("x{i}")).collect();
    header.extend((1..=sample.n()).map(|j| format!("y{j}")));
    if sample.transfers.is_some() {
        header.push("tau".into());
    }
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(csv_err)?;
    for k in 0..sample.n_obs() {
        let mut rec: Vec<String> = sample.x.row(k).iter().chain(sample.y.row(k).iter()).map(|v| format!("{v:?}")).collect();
        if let Some(t) = &sample.transfers {
            rec.push(format!("{:?}", t[k]));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a moments document `{"Sigma_X", "Sigma_Y", "Sigma_XY", "n_obs"}`.
pub fn read_moments(path: &Path, policy: &NumericPolicy) -> Result<MomentSet> {
    let text = std::fs::read_to_string(path)?;
    let doc: MomentDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })?;
    doc.into_moments(policy)
}
