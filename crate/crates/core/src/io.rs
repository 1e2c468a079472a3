//! CSV import/export. Numbers use Rust's shortest round-trip formatting, so
//! reading a file back reproduces every value bit for bit.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::barrier::BarrierProfile;
use crate::diagnostics::{DiagnosticsSeries, CSV_HEADER};
use crate::flow::RadialState;
use crate::soliton::SolitonProfile;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}, line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn write_rows<W: Write>(out: &mut W, header: &str, columns: &[&[f64]]) -> io::Result<()> {
    writeln!(out, "{header}")?;
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| fmt_f64(c[i])).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

fn to_file(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>) -> Result<(), IoError> {
    let wrap = |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(wrap)?;
    let mut out = BufWriter::new(file);
    body(&mut out).and_then(|_| out.flush()).map_err(wrap)
}

pub fn write_profile_csv<W: Write>(out: &mut W, p: &SolitonProfile) -> io::Result<()> {
    write_rows(out, "s,phi,dphi,d2phi,d3phi", &[&p.grid, &p.phi, &p.dphi, &p.d2phi, &p.d3phi])
}

pub fn write_barrier_csv<W: Write>(out: &mut W, b: &BarrierProfile) -> io::Result<()> {
    write_rows(
        out,
        "s,phib,dphib,d2phib,d3phib,bhat",
        &[b.grid(), &b.phib, &b.dphib, &b.d2phib, &b.d3phib, &b.bhat],
    )
}

pub fn write_state_csv<W: Write>(out: &mut W, st: &RadialState) -> io::Result<()> {
    write_rows(out, "s,b,db,d2b", &[st.grid(), &st.b, &st.db, &st.d2b])
}

pub fn write_diagnostics_csv<W: Write>(out: &mut W, series: &DiagnosticsSeries) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in &series.samples {
        let nums = [s.t, s.sup, s.inf, s.osc, s.lp, s.eq_rr_min, s.eq_rr_max, s.eq_tt_min, s.eq_tt_max];
        let mut line: Vec<String> = nums.iter().map(|&v| fmt_f64(v)).collect();
        line.push(s.monotone.to_string());
        line.push(s.sign_changes.to_string());
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn save_profile(path: &Path, p: &SolitonProfile) -> Result<(), IoError> {
    to_file(path, |w| write_profile_csv(w, p))
}

pub fn save_barrier(path: &Path, b: &BarrierProfile) -> Result<(), IoError> {
    to_file(path, |w| write_barrier_csv(w, b))
}

pub fn save_state(path: &Path, st: &RadialState) -> Result<(), IoError> {
    to_file(path, |w| write_state_csv(w, st))
}

pub fn save_diagnostics(path: &Path, series: &DiagnosticsSeries) -> Result<(), IoError> {
    to_file(path, |w| write_diagnostics_csv(w, series))
}

/// `state_t<time>.csv`, with the time in shortest round-trip form.
pub fn state_file_name(t: f64) -> String {
    format!("state_t{}.csv", fmt_f64(t))
}

/// Columns of a state snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot {
    pub s: Vec<f64>,
    pub b: Vec<f64>,
    pub db: Vec<f64>,
    pub d2b: Vec<f64>,
}

pub fn parse_state_csv(text: &str, path: &Path) -> Result<StateSnapshot, IoError> {
    let err = |line: usize, msg: String| IoError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "s,b,db,d2b" => {}
        Some((_, h)) => return Err(err(1, format!("expected header s,b,db,d2b, found {h:?}"))),
        None => return Err(err(1, "empty file".into())),
    }
    let mut snap = StateSnapshot {
        s: Vec::new(),
        b: Vec::new(),
        db: Vec::new(),
        d2b: Vec::new(),
    };
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(err(i + 1, format!("expected 4 fields, found {}", fields.len())));
        }
        let mut vals = [0.0; 4];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.trim().parse().map_err(|e| err(i + 1, format!("{f:?}: {e}")))?;
        }
        snap.s.push(vals[0]);
        snap.b.push(vals[1]);
        snap.db.push(vals[2]);
        snap.d2b.push(vals[3]);
    }
    Ok(snap)
}

pub fn read_state_csv(path: &Path) -> Result<StateSnapshot, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_state_csv(&text, path)
}
