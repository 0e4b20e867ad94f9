//! Trajectory log: one row per (time step, segment, node), serialized as
//! CSV with a fixed header and column order.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

/// Fixed CSV header; the column order is part of the file contract.
pub const CSV_HEADER: &str = "t,seg,node,ux,uy,uz,vx,vy,vz,ux_ref,uy_ref,uz_ref,vx_ref,vy_ref,vz_ref,px,py,pz,qw,qx,qy,qz,pd1,pd2,pd3,pd4,pm1,pm2,pm3,pm4,iters,residual";

/// One logged cross-section sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    /// Segment label, 1-based (1 = distal segment).
    pub seg: usize,
    /// Node index local to the segment, 0 (base) ..= nodes_per_segment (tip).
    pub node: usize,
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
    pub u_ref: Vector3<f64>,
    pub v_ref: Vector3<f64>,
    /// Node position, global frame.
    pub pos: Vector3<f64>,
    /// Node orientation as a unit quaternion `(w, x, y, z)`.
    pub quat: [f64; 4],
    /// Desired chamber pressures of the segment.
    pub p_d: [f64; 4],
    /// Measured (regulator) chamber pressures of the segment.
    pub p_m: [f64; 4],
    /// Newton iterations of the model solve at this step.
    pub iters: usize,
    /// Normalized shooting residual at this step.
    pub residual: f64,
}

/// In-memory trajectory log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
}

/// CSV read errors with row/field diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("cannot access log {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("log write error: {0}")]
    Write(#[from] std::io::Error),
    #[error("log row {row}: malformed field `{field}`: {message}")]
    Field {
        row: usize,
        field: &'static str,
        message: String,
    },
    #[error("unexpected header `{found}`")]
    Header { found: String },
    #[error("log row {row}: expected {expected} columns, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },
}

const COLUMNS: [&str; 32] = [
    "t", "seg", "node", "ux", "uy", "uz", "vx", "vy", "vz", "ux_ref", "uy_ref", "uz_ref",
    "vx_ref", "vy_ref", "vz_ref", "px", "py", "pz", "qw", "qx", "qy", "qz", "pd1", "pd2", "pd3",
    "pd4", "pm1", "pm2", "pm3", "pm4", "iters", "residual",
];

impl TrajectoryLog {
    /// Writes the log as CSV, header first.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), LogError> {
        writeln!(out, "{CSV_HEADER}")?;
        let mut line = String::with_capacity(256);
        for r in &self.rows {
            line.clear();
            use std::fmt::Write as _;
            let _ = write!(
                line,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t, r.seg, r.node,
                r.u.x, r.u.y, r.u.z, r.v.x, r.v.y, r.v.z,
                r.u_ref.x, r.u_ref.y, r.u_ref.z, r.v_ref.x, r.v_ref.y, r.v_ref.z,
                r.pos.x, r.pos.y, r.pos.z,
                r.quat[0], r.quat[1], r.quat[2], r.quat[3],
                r.p_d[0], r.p_d[1], r.p_d[2], r.p_d[3],
                r.p_m[0], r.p_m[1], r.p_m[2], r.p_m[3],
                r.iters, r.residual,
            );
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Writes the log to a file path.
    pub fn write_to_path(&self, path: &Path) -> Result<(), LogError> {
        let file = std::fs::File::create(path).map_err(|source| LogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Parses a CSV log, reporting row and field on the first malformed entry.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, LogError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        {
            let headers = reader.headers().map_err(|e| LogError::Header {
                found: e.to_string(),
            })?;
            let found = headers.iter().collect::<Vec<_>>().join(",");
            if found != CSV_HEADER {
                return Err(LogError::Header { found });
            }
        }
        let mut rows = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let row_no = idx + 1;
            let record = record.map_err(|e| LogError::Field {
                row: row_no,
                field: "<record>",
                message: e.to_string(),
            })?;
            if record.len() != COLUMNS.len() {
                return Err(LogError::ColumnCount {
                    row: row_no,
                    expected: COLUMNS.len(),
                    found: record.len(),
                });
            }
            let f = |i: usize| -> Result<f64, LogError> {
                record[i].trim().parse::<f64>().map_err(|e| LogError::Field {
                    row: row_no,
                    field: COLUMNS[i],
                    message: e.to_string(),
                })
            };
            let n = |i: usize| -> Result<usize, LogError> {
                record[i]
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| LogError::Field {
                        row: row_no,
                        field: COLUMNS[i],
                        message: e.to_string(),
                    })
            };
            rows.push(LogRow {
                t: f(0)?,
                seg: n(1)?,
                node: n(2)?,
                u: Vector3::new(f(3)?, f(4)?, f(5)?),
                v: Vector3::new(f(6)?, f(7)?, f(8)?),
                u_ref: Vector3::new(f(9)?, f(10)?, f(11)?),
                v_ref: Vector3::new(f(12)?, f(13)?, f(14)?),
                pos: Vector3::new(f(15)?, f(16)?, f(17)?),
                quat: [f(18)?, f(19)?, f(20)?, f(21)?],
                p_d: [f(22)?, f(23)?, f(24)?, f(25)?],
                p_m: [f(26)?, f(27)?, f(28)?, f(29)?],
                iters: n(30)?,
                residual: f(31)?,
            });
        }
        Ok(Self { rows })
    }

    /// Reads a CSV log from a file path.
    pub fn read_from_path(path: &Path) -> Result<Self, LogError> {
        let file = std::fs::File::open(path).map_err(|source| LogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> LogRow {
        LogRow {
            t: 0.05,
            seg: 1,
            node: 3,
            u: Vector3::new(0.1, -0.2, 0.0),
            v: Vector3::new(0.0, 0.0, 1.05),
            u_ref: Vector3::new(0.15, 0.0, 0.0),
            v_ref: Vector3::new(0.0, 0.0, 1.0),
            pos: Vector3::new(0.01, 0.02, 0.3),
            quat: [1.0, 0.0, 0.0, 0.0],
            p_d: [6894.757293168, 7000.0, 7100.0, 7200.0],
            p_m: [6894.757293168, 7000.0, 7100.0, 7200.0],
            iters: 2,
            residual: 3.4e-9,
        }
    }

    #[test]
    fn header_and_row_counts() {
        let log = TrajectoryLog {
            rows: vec![sample_row()],
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let log = TrajectoryLog {
            rows: vec![sample_row()],
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let back = TrajectoryLog::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn malformed_field_is_reported_with_row_and_name() {
        let text = format!("{CSV_HEADER}\n0.05,1,0,bad,0,0,0,0,1,0,0,0,0,0,1,0,0,0,1,0,0,0,0,0,0,0,0,0,0,0,0,1e-9\n");
        let err = TrajectoryLog::read_csv(text.as_bytes()).unwrap_err();
        match err {
            LogError::Field { row, field, .. } => {
                assert_eq!(row, 1);
                assert_eq!(field, "ux");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = TrajectoryLog::read_csv("a,b,c\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LogError::Header { .. }));
    }
}
