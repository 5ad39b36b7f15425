//! File formats: trace matrices (CSV and the `IPTRC1` binary) and small
//! self-describing CSV tables.
//!
//! Binary trace layout, all little-endian:
//!
//! ```text
//! b"IPTRC1"            6-byte magic
//! u32 n_trials
//! u32 n_samples
//! f64 dt               sample interval, µs
//! f64 x n_trials*n_samples, row-major (one row per trial)
//! ```
//!
//! CSV trace files have one row per trial; the header names each column
//! `v(t=<time>us)`. Floats are written in their shortest round-trip form,
//! so every reader here returns exactly what was written.

use std::io::{BufRead, Read, Seek, SeekFrom, Write};

use crate::error::{Error, Result};
use crate::simulator::{DephasingPoint, SweepPoint};
use crate::temporal_mode::{TraceGrid, VoltageTrace};

pub const TRACE_MAGIC: &[u8; 6] = b"IPTRC1";

/// Traces stored row-major, without the pulse-time metadata of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMatrix {
    pub dt: f64,
    pub n_samples: usize,
    pub data: Vec<f64>,
}

impl TraceMatrix {
    pub fn from_traces(traces: &[VoltageTrace]) -> Result<Self> {
        let first = traces.first().ok_or(Error::EmptyDataset)?;
        let mut data = Vec::with_capacity(traces.len() * first.samples.len());
        for t in traces {
            if !t.grid.same_as(&first.grid) {
                return Err(Error::GridMismatch("traces in one matrix must share a grid".into()));
            }
            data.extend_from_slice(&t.samples);
        }
        Ok(Self { dt: first.grid.dt, n_samples: first.grid.n_samples, data })
    }

    pub fn n_trials(&self) -> usize {
        if self.n_samples == 0 {
            0
        } else {
            self.data.len() / self.n_samples
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_samples..(i + 1) * self.n_samples]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_samples.max(1))
    }

    /// Checks the stored sampling against `grid`.
    pub fn check_grid(&self, grid: &TraceGrid) -> Result<()> {
        if self.n_samples != grid.n_samples || (self.dt - grid.dt).abs() > 1e-12 * grid.dt {
            return Err(Error::GridMismatch(format!(
                "file holds {} samples at dt = {} µs, expected {} at dt = {} µs",
                self.n_samples, self.dt, grid.n_samples, grid.dt
            )));
        }
        Ok(())
    }

    pub fn to_traces(&self, grid: &TraceGrid) -> Result<Vec<VoltageTrace>> {
        self.check_grid(grid)?;
        Ok(self.rows().map(|r| VoltageTrace { grid: *grid, samples: r.to_vec() }).collect())
    }
}

/// Streaming `IPTRC1` writer; the trial count is patched in on `finish`.
pub struct BinaryTraceWriter<W: Write + Seek> {
    out: W,
    n_samples: usize,
    n_trials: u32,
}

impl<W: Write + Seek> BinaryTraceWriter<W> {
    pub fn new(mut out: W, dt: f64, n_samples: usize) -> Result<Self> {
        let n = u32::try_from(n_samples).map_err(|_| Error::Format("too many samples per trace".into()))?;
        out.write_all(TRACE_MAGIC)?;
        out.write_all(&0u32.to_le_bytes())?;
        out.write_all(&n.to_le_bytes())?;
        out.write_all(&dt.to_le_bytes())?;
        Ok(Self { out, n_samples, n_trials: 0 })
    }

    pub fn push(&mut self, samples: &[f64]) -> Result<()> {
        if samples.len() != self.n_samples {
            return Err(Error::GridMismatch(format!(
                "trace has {} samples, file rows have {}",
                samples.len(),
                self.n_samples
            )));
        }
        let mut buf = Vec::with_capacity(8 * samples.len());
        samples.iter().for_each(|s| buf.extend_from_slice(&s.to_le_bytes()));
        self.out.write_all(&buf)?;
        self.n_trials = self.n_trials.checked_add(1).ok_or_else(|| Error::Format("too many trials".into()))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.seek(SeekFrom::Start(TRACE_MAGIC.len() as u64))?;
        self.out.write_all(&self.n_trials.to_le_bytes())?;
        self.out.seek(SeekFrom::End(0))?;
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_traces_binary<W: Write + Seek>(out: W, matrix: &TraceMatrix) -> Result<()> {
    let mut w = BinaryTraceWriter::new(out, matrix.dt, matrix.n_samples)?;
    for row in matrix.rows() {
        w.push(row)?;
    }
    w.finish()?;
    Ok(())
}

pub fn read_traces_binary<R: Read>(mut input: R) -> Result<TraceMatrix> {
    let mut magic = [0u8; 6];
    input.read_exact(&mut magic).map_err(|_| Error::Format("file too short for an IPTRC1 header".into()))?;
    if &magic != TRACE_MAGIC {
        return Err(Error::Format("missing IPTRC1 magic".into()));
    }
    let mut u = [0u8; 4];
    let mut f = [0u8; 8];
    input.read_exact(&mut u).map_err(|_| Error::Format("truncated header".into()))?;
    let n_trials = u32::from_le_bytes(u) as usize;
    input.read_exact(&mut u).map_err(|_| Error::Format("truncated header".into()))?;
    let n_samples = u32::from_le_bytes(u) as usize;
    input.read_exact(&mut f).map_err(|_| Error::Format("truncated header".into()))?;
    let dt = f64::from_le_bytes(f);
    if !(dt > 0.0) {
        return Err(Error::Format(format!("non-positive sample interval {dt}")));
    }
    let total = n_trials
        .checked_mul(n_samples)
        .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * total {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header promises {}",
            bytes.len(),
            8 * total
        )));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok(TraceMatrix { dt, n_samples, data })
}

fn trace_header(dt: f64, n_samples: usize) -> Vec<String> {
    (0..n_samples).map(|i| format!("v(t={}us)", i as f64 * dt)).collect()
}

/// Streaming CSV trace writer.
pub struct CsvTraceWriter<W: Write> {
    out: csv::Writer<W>,
    n_samples: usize,
}

impl<W: Write> CsvTraceWriter<W> {
    pub fn new(out: W, dt: f64, n_samples: usize) -> Result<Self> {
        let mut out = csv::Writer::from_writer(out);
        out.write_record(trace_header(dt, n_samples)).map_err(csv_error)?;
        Ok(Self { out, n_samples })
    }

    pub fn push(&mut self, samples: &[f64]) -> Result<()> {
        if samples.len() != self.n_samples {
            return Err(Error::GridMismatch(format!(
                "trace has {} samples, file rows have {}",
                samples.len(),
                self.n_samples
            )));
        }
        self.out.write_record(samples.iter().map(|s| s.to_string())).map_err(csv_error)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_traces_csv<W: Write>(out: W, matrix: &TraceMatrix) -> Result<()> {
    let mut w = CsvTraceWriter::new(out, matrix.dt, matrix.n_samples)?;
    for row in matrix.rows() {
        w.push(row)?;
    }
    w.finish()
}

fn parse_time_header(cell: &str) -> Result<f64> {
    cell.strip_prefix("v(t=")
        .and_then(|s| s.strip_suffix("us)"))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad trace column header '{cell}'")))
}

pub fn read_traces_csv<R: Read>(input: R) -> Result<TraceMatrix> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let times = header.iter().map(parse_time_header).collect::<Result<Vec<_>>>()?;
    let dt = match times.as_slice() {
        [t0, t1, ..] => t1 - t0,
        _ => return Err(Error::Format("trace CSV needs at least two samples".into())),
    };
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        for cell in rec.iter() {
            data.push(parse_f64(cell)?);
        }
    }
    Ok(TraceMatrix { dt, n_samples: times.len(), data })
}

/// Reads either format, choosing by the leading magic bytes.
pub fn read_traces(path: &std::path::Path) -> Result<TraceMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut reader = std::io::BufReader::new(file);
    let head = reader.fill_buf()?;
    if head.starts_with(TRACE_MAGIC) {
        read_traces_binary(reader)
    } else {
        read_traces_csv(reader)
    }
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        Error::Io(e.to_string())
    } else {
        Error::Format(e.to_string())
    }
}

fn parse_f64(cell: &str) -> Result<f64> {
    cell.trim().parse().map_err(|_| Error::Format(format!("'{cell}' is not a number")))
}

/// A numeric table with named columns (units in the names).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let columns: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            rows.push(rec.iter().map(parse_f64).collect::<Result<Vec<_>>>()?);
        }
        Ok(Self { columns, rows })
    }

    /// Fails unless the header matches `expected` exactly.
    pub fn expect_columns(&self, expected: &[&str]) -> Result<()> {
        if self.columns.iter().map(String::as_str).eq(expected.iter().copied()) {
            Ok(())
        } else {
            Err(Error::Format(format!("expected columns {expected:?}, found {:?}", self.columns)))
        }
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::read(std::io::BufReader::new(file))
    }
}

pub const SWEEP_COLUMNS: [&str; 5] =
    ["gain_db", "temperature_mk", "s_in_quanta", "s_out_quanta", "s_out_err_quanta"];
pub const DEPHASING_COLUMNS: [&str; 3] = ["gain_db", "gamma_over_2pi_khz", "gamma_err_over_2pi_khz"];
pub const HISTOGRAM_COLUMNS: [&str; 3] = ["bin_center_quadrature", "density_per_quadrature", "model_density_per_quadrature"];
pub const WAVEFORM_COLUMNS: [&str; 2] = ["time_us", "value_per_sqrt_us"];

pub fn sweep_table(points: &[SweepPoint]) -> Table {
    let mut t = Table::new(&SWEEP_COLUMNS);
    for p in points {
        t.push(vec![p.gain_db, p.temperature_mk, p.s_in, p.s_out, p.s_out_err]);
    }
    t
}

pub fn sweep_points(table: &Table) -> Result<Vec<SweepPoint>> {
    table.expect_columns(&SWEEP_COLUMNS)?;
    Ok(table
        .rows
        .iter()
        .map(|r| SweepPoint { gain_db: r[0], temperature_mk: r[1], s_in: r[2], s_out: r[3], s_out_err: r[4] })
        .collect())
}

pub fn dephasing_table(points: &[DephasingPoint]) -> Table {
    let mut t = Table::new(&DEPHASING_COLUMNS);
    for p in points {
        t.push(vec![p.gain_db, p.gamma, p.gamma_err]);
    }
    t
}

pub fn dephasing_points(table: &Table) -> Result<Vec<DephasingPoint>> {
    table.expect_columns(&DEPHASING_COLUMNS)?;
    Ok(table.rows.iter().map(|r| DephasingPoint { gain_db: r[0], gamma: r[1], gamma_err: r[2] }).collect())
}

/// Mode or window samples against time.
pub fn waveform_table(grid: &TraceGrid, samples: &[f64]) -> Table {
    let mut t = Table::new(&WAVEFORM_COLUMNS);
    for (i, v) in samples.iter().enumerate() {
        t.push(vec![grid.time(i), *v]);
    }
    t
}

pub fn histogram_table(rows: &[(f64, f64, f64)]) -> Table {
    let mut t = Table::new(&HISTOGRAM_COLUMNS);
    for &(c, d, m) in rows {
        t.push(vec![c, d, m]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn matrix() -> TraceMatrix {
        TraceMatrix { dt: 0.01, n_samples: 3, data: vec![0.1, -2.5e-7, 1.0 / 3.0, 4.0, f64::MIN_POSITIVE, -0.0] }
    }

    #[test]
    fn binary_round_trip_and_layout() {
        let m = matrix();
        let mut buf = Cursor::new(Vec::new());
        write_traces_binary(&mut buf, &m).unwrap();
        let bytes = buf.into_inner();
        assert_eq!(&bytes[..6], b"IPTRC1");
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(bytes[14..22].try_into().unwrap()), 0.01);
        assert_eq!(bytes.len(), 22 + 6 * 8);
        let back = read_traces_binary(Cursor::new(bytes)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn binary_rejects_truncation_and_bad_magic() {
        let mut buf = Cursor::new(Vec::new());
        write_traces_binary(&mut buf, &matrix()).unwrap();
        let mut bytes = buf.into_inner();
        bytes.pop();
        assert!(matches!(read_traces_binary(Cursor::new(bytes.clone())), Err(Error::Format(_))));
        bytes[0] = b'X';
        assert!(matches!(read_traces_binary(Cursor::new(bytes)), Err(Error::Format(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = matrix();
        let mut buf = Vec::new();
        write_traces_csv(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("v(t=0us),v(t=0.01us),v(t=0.02us)\n"));
        let back = read_traces_csv(Cursor::new(buf)).unwrap();
        assert_eq!(back.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), m.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(back.n_samples, 3);
        assert!((back.dt - 0.01).abs() < 1e-15);
    }

    #[test]
    fn grid_check() {
        let m = matrix();
        assert!(m.to_traces(&TraceGrid::new(0.01, 3, 0.0).unwrap()).is_ok());
        assert!(matches!(m.to_traces(&TraceGrid::new(0.01, 4, 0.0).unwrap()), Err(Error::GridMismatch(_))));
        assert!(matches!(m.to_traces(&TraceGrid::new(0.02, 3, 0.0).unwrap()), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn tables_round_trip() {
        let pts = vec![
            SweepPoint { gain_db: 20.0, temperature_mk: 79.0, s_in: 0.53, s_out: 93.1, s_out_err: 1.9 },
            SweepPoint { gain_db: 25.0, temperature_mk: 900.0, s_in: 3.26, s_out: 1.0 / 7.0, s_out_err: 0.0 },
        ];
        let mut buf = Vec::new();
        sweep_table(&pts).write(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("gain_db,temperature_mk,s_in_quanta"));
        assert_eq!(sweep_points(&Table::read(Cursor::new(buf)).unwrap()).unwrap(), pts);

        let d = vec![DephasingPoint { gain_db: 17.0, gamma: 40.123456789, gamma_err: 2.0 }];
        let mut buf = Vec::new();
        dephasing_table(&d).write(&mut buf).unwrap();
        let t = Table::read(Cursor::new(buf)).unwrap();
        assert_eq!(dephasing_points(&t).unwrap(), d);
        assert!(sweep_points(&t).is_err());
    }
}
