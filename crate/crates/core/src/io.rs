//! CSV formats: fields, trajectories, convergence traces, sweep tables,
//! M-curves and fit summaries.
//!
//! Every float is written with 15 significant digits in scientific notation
//! and every table has a fixed header.

use std::io::{Read, Write};

use thiserror::Error;

use crate::algebra::{hilbert_schmidt_distance, trace_distance, AlgebraError, DensityMatrix};
use crate::controls::{ControlError, ControlField};
use crate::dynamics::{NoiseKind, TimeGrid, Trajectory};
use crate::krotov::IterationRecord;
use crate::protocols::{EffectiveTimeFit, MCurve, Protocol, SweepRow};

/// Relative mismatch tolerated between stored midpoints and a grid.
pub const GRID_TOLERANCE: f64 = 1e-9;

pub const FIELD_HEADER: [&str; 2] = ["t_midpoint", "value"];
pub const TRAJECTORY_HEADER: [&str; 11] =
    ["t", "bloch1_x", "bloch1_y", "bloch1_z", "bloch2_x", "bloch2_y", "bloch2_z", "d_hs", "d_tr", "purity1", "purity2"];
pub const CONVERGENCE_HEADER: [&str; 4] = ["iteration", "j_t", "g", "fluence"];
pub const SWEEP_HEADER: [&str; 8] = ["delta_b", "T", "protocol", "d_hs", "d_tr", "purity1", "purity2", "qfi_over_t"];
pub const M_HEADER: [&str; 2] = ["delta_b", "m"];
pub const FIT_HEADER: [&str; 4] = ["noise_kind", "gamma_eff", "ratio", "residual"];
pub const FINAL_STATE_HEADER: [&str; 5] = ["state", "bloch_x", "bloch_y", "bloch_z", "purity"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

fn format_error(line: u64, message: impl Into<String>) -> IoError {
    IoError::Format { line, message: message.into() }
}

/// Fifteen significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.14e}")
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>, IoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_f64(record: &csv::StringRecord, index: usize, name: &str) -> Result<f64, IoError> {
    let line = record_line(record);
    let raw = record.get(index).ok_or_else(|| format_error(line, format!("missing column {name}")))?;
    let value: f64 = raw.parse().map_err(|_| format_error(line, format!("{name}: cannot parse {raw:?}")))?;
    if !value.is_finite() {
        return Err(format_error(line, format!("{name}: non-finite value {raw:?}")));
    }
    Ok(value)
}

fn expect_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), IoError> {
    let header = rdr.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(format_error(
            1,
            format!("expected header {}, found {}", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

/// Column indices of `names` in the header, which may contain further columns.
fn locate_columns<R: Read>(rdr: &mut csv::Reader<R>, names: &[&str]) -> Result<Vec<usize>, IoError> {
    let header = rdr.headers()?.clone();
    names
        .iter()
        .map(|name| {
            header.iter().position(|h| h == *name).ok_or_else(|| format_error(1, format!("missing column {name}")))
        })
        .collect()
}

pub fn write_field<W: Write>(w: W, grid: &TimeGrid, field: &ControlField) -> Result<(), IoError> {
    let mut out = writer(w, &FIELD_HEADER)?;
    for (j, &value) in field.samples().iter().enumerate() {
        out.write_record([fmt_f64(grid.midpoint(j)), fmt_f64(value)])?;
    }
    out.flush()?;
    Ok(())
}

/// Samples read from a field file, before they are matched to a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSamples {
    pub midpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl FieldSamples {
    /// Grid implied by uniformly spaced midpoints starting at `dt/2`.
    pub fn grid(&self) -> Result<TimeGrid, IoError> {
        let n = self.midpoints.len();
        let dt = 2.0 * self.midpoints[0];
        for (j, &t) in self.midpoints.iter().enumerate() {
            let want = (j as f64 + 0.5) * dt;
            if (t - want).abs() > GRID_TOLERANCE * want.abs().max(dt) {
                return Err(format_error(
                    j as u64 + 2,
                    format!("midpoint {t} breaks uniform spacing (expected {want})"),
                ));
            }
        }
        TimeGrid::new(n as f64 * dt, n).map_err(|e| format_error(2, e.to_string()))
    }

    /// The field on `grid`, whose intervals must match the stored midpoints.
    pub fn into_field(self, grid: &TimeGrid) -> Result<ControlField, IoError> {
        let stored = self.grid()?;
        let scale = grid.t_final();
        if stored.n_steps() != grid.n_steps() || (stored.t_final() - scale).abs() > GRID_TOLERANCE * scale {
            return Err(format_error(
                0,
                format!(
                    "field covers {} intervals up to T = {}, grid has {} up to T = {}",
                    stored.n_steps(),
                    stored.t_final(),
                    grid.n_steps(),
                    grid.t_final()
                ),
            ));
        }
        Ok(ControlField::from_samples(grid, self.values)?)
    }
}

pub fn read_field<R: Read>(r: R) -> Result<FieldSamples, IoError> {
    let mut rdr = reader(r);
    expect_header(&mut rdr, &FIELD_HEADER)?;
    let mut samples = FieldSamples { midpoints: Vec::new(), values: Vec::new() };
    for record in rdr.records() {
        let record = record?;
        if record.len() != 2 {
            return Err(format_error(record_line(&record), format!("expected 2 columns, found {}", record.len())));
        }
        let t = parse_f64(&record, 0, "t_midpoint")?;
        if t <= 0.0 {
            return Err(format_error(record_line(&record), format!("midpoint {t} must be positive")));
        }
        samples.midpoints.push(t);
        samples.values.push(parse_f64(&record, 1, "value")?);
    }
    if samples.midpoints.is_empty() {
        return Err(format_error(1, "no samples"));
    }
    Ok(samples)
}

pub fn write_trajectory<W: Write>(w: W, grid: &TimeGrid, pair: &[Trajectory; 2]) -> Result<(), IoError> {
    let mut out = writer(w, &TRAJECTORY_HEADER)?;
    for j in 0..pair[0].len() {
        let (a, b) = (pair[0].state(j)?, pair[1].state(j)?);
        let (ra, rb) = (a.to_bloch().components(), b.to_bloch().components());
        let mut row = vec![fmt_f64(grid.time(j))];
        row.extend(ra.iter().chain(&rb).map(|&x| fmt_f64(x)));
        row.extend([hilbert_schmidt_distance(&a, &b), trace_distance(&a, &b), a.purity(), b.purity()].map(fmt_f64));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_convergence<W: Write>(w: W, records: &[IterationRecord]) -> Result<(), IoError> {
    let mut out = writer(w, &CONVERGENCE_HEADER)?;
    for r in records {
        out.write_record([r.iteration.to_string(), fmt_f64(r.jt), fmt_f64(r.g), fmt_f64(r.fluence)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_final_states<W: Write>(w: W, states: &[DensityMatrix; 2]) -> Result<(), IoError> {
    let mut out = writer(w, &FINAL_STATE_HEADER)?;
    for (i, rho) in states.iter().enumerate() {
        let r = rho.to_bloch().components();
        out.write_record([(i + 1).to_string(), fmt_f64(r[0]), fmt_f64(r[1]), fmt_f64(r[2]), fmt_f64(rho.purity())])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> Result<(), IoError> {
    let mut out = writer(w, &SWEEP_HEADER)?;
    for r in rows {
        out.write_record([
            fmt_f64(r.delta_b),
            fmt_f64(r.t_final),
            r.protocol.as_str().to_string(),
            fmt_f64(r.d_hs),
            fmt_f64(r.d_tr),
            fmt_f64(r.purity1),
            fmt_f64(r.purity2),
            fmt_f64(r.qfi_over_t),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep<R: Read>(r: R) -> Result<Vec<SweepRow>, IoError> {
    let mut rdr = reader(r);
    expect_header(&mut rdr, &SWEEP_HEADER)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != SWEEP_HEADER.len() {
            return Err(format_error(line, format!("expected {} columns, found {}", SWEEP_HEADER.len(), record.len())));
        }
        let protocol = Protocol::parse(&record[2])
            .ok_or_else(|| format_error(line, format!("unknown protocol {:?}", &record[2])))?;
        rows.push(SweepRow {
            delta_b: parse_f64(&record, 0, "delta_b")?,
            t_final: parse_f64(&record, 1, "T")?,
            protocol,
            d_hs: parse_f64(&record, 3, "d_hs")?,
            d_tr: parse_f64(&record, 4, "d_tr")?,
            purity1: parse_f64(&record, 5, "purity1")?,
            purity2: parse_f64(&record, 6, "purity2")?,
            qfi_over_t: parse_f64(&record, 7, "qfi_over_t")?,
        });
    }
    Ok(rows)
}

pub fn write_m_curve<W: Write>(w: W, curve: &MCurve) -> Result<(), IoError> {
    let mut out = writer(w, &M_HEADER)?;
    for (&d, &m) in curve.delta_b_values.iter().zip(&curve.m_values) {
        out.write_record([fmt_f64(d), fmt_f64(m)])?;
    }
    out.flush()?;
    Ok(())
}

/// `(delta_b, m)` pairs from any table carrying those two columns.
pub fn read_m_table<R: Read>(r: R) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    let mut rdr = reader(r);
    let cols = locate_columns(&mut rdr, &M_HEADER)?;
    let (mut deltas, mut ms) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let d = parse_f64(&record, cols[0], "delta_b")?;
        let m = parse_f64(&record, cols[1], "m")?;
        if d <= 0.0 {
            return Err(format_error(line, format!("delta_b {d} must be positive")));
        }
        if !(0.0..=1.0).contains(&m) {
            return Err(format_error(line, format!("m {m} outside [0, 1]")));
        }
        deltas.push(d);
        ms.push(m);
    }
    Ok((deltas, ms))
}

pub fn write_fits<W: Write>(w: W, fits: &[EffectiveTimeFit]) -> Result<(), IoError> {
    let mut out = writer(w, &FIT_HEADER)?;
    for f in fits {
        out.write_record([
            f.noise_kind.as_str().to_string(),
            fmt_f64(f.gamma_eff),
            fmt_f64(f.ratio),
            fmt_f64(f.residual),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_fits<R: Read>(r: R) -> Result<Vec<EffectiveTimeFit>, IoError> {
    let mut rdr = reader(r);
    expect_header(&mut rdr, &FIT_HEADER)?;
    let mut fits = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let noise_kind = NoiseKind::parse(&record[0])
            .ok_or_else(|| format_error(line, format!("unknown noise kind {:?}", &record[0])))?;
        fits.push(EffectiveTimeFit {
            noise_kind,
            gamma_eff: parse_f64(&record, 1, "gamma_eff")?,
            ratio: parse_f64(&record, 2, "ratio")?,
            residual: parse_f64(&record, 3, "residual")?,
        });
    }
    Ok(fits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.00000000000000e-1");
        assert_eq!(fmt_f64(-2511.0), "-2.51100000000000e3");
        let x = std::f64::consts::PI;
        let back: f64 = fmt_f64(x).parse().unwrap();
        assert!((back - x).abs() < 1e-14);
    }

    #[test]
    fn field_round_trip() {
        let grid = TimeGrid::new(12.5, 50).unwrap();
        let field = ControlField::from_fn(&grid, |t| (0.3 * t).sin());
        let mut buf = Vec::new();
        write_field(&mut buf, &grid, &field).unwrap();
        let samples = read_field(buf.as_slice()).unwrap();
        assert_eq!(samples.grid().unwrap().n_steps(), 50);
        let back = samples.into_field(&grid).unwrap();
        for (a, b) in back.samples().iter().zip(field.samples()) {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn field_rejects_bad_input() {
        assert!(read_field("t,value\n0.5,1\n".as_bytes()).is_err());
        assert!(read_field("t_midpoint,value\n".as_bytes()).is_err());
        assert!(read_field("t_midpoint,value\n0.5,nan\n".as_bytes()).is_err());
        assert!(read_field("t_midpoint,value\n0.5,abc\n".as_bytes()).is_err());
        let uneven = read_field("t_midpoint,value\n0.5,1\n1.5,1\n2.7,1\n".as_bytes()).unwrap();
        assert!(matches!(uneven.grid(), Err(IoError::Format { line: 4, .. })));
        let other = TimeGrid::new(4.0, 4).unwrap();
        let three = read_field("t_midpoint,value\n0.5,1\n1.5,1\n2.5,1\n".as_bytes()).unwrap();
        assert!(three.into_field(&other).is_err());
    }

    #[test]
    fn sweep_round_trip_and_m_columns() {
        let row = SweepRow {
            delta_b: 0.011,
            t_final: 2511.0,
            protocol: Protocol::Optimized,
            d_hs: 0.89,
            d_tr: 0.89f64.sqrt(),
            purity1: 0.97,
            purity2: 0.97,
            qfi_over_t: 312.5,
        };
        let mut buf = Vec::new();
        write_sweep(&mut buf, &[row]).unwrap();
        let back = read_sweep(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].protocol, Protocol::Optimized);
        assert!((back[0].d_tr - row.d_tr).abs() < 1e-14);

        let (d, m) = read_m_table("x,delta_b,m\n1,0.01,0.25\n2,0.02,0.125\n".as_bytes()).unwrap();
        assert_eq!(d, vec![0.01, 0.02]);
        assert_eq!(m, vec![0.25, 0.125]);
        assert!(read_m_table("delta_b,m\n0.01,1.5\n".as_bytes()).is_err());
        assert!(read_m_table("delta_b\n0.01\n".as_bytes()).is_err());
    }

    #[test]
    fn fit_summary_round_trip() {
        let fit =
            EffectiveTimeFit { gamma_eff: 4.2e-4, residual: 2e-3, ratio: 2.38, noise_kind: NoiseKind::Relaxation };
        let mut buf = Vec::new();
        write_fits(&mut buf, &[fit]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("noise_kind,gamma_eff,ratio,residual\nrelaxation,"));
        let back = read_fits(buf.as_slice()).unwrap();
        assert_eq!(back[0].noise_kind, NoiseKind::Relaxation);
        assert!((back[0].ratio - 2.38).abs() < 1e-14);
    }
}
