//! CSV and JSON file formats.
//!
//! Floats are written in the shortest form that parses back to the same
//! `f64`, so values survive a write/read cycle bit for bit. Missing values
//! are empty CSV fields and JSON `null`.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use postsel_core::estimation::SweepPoint;
use postsel_core::oracle::VerifyRow;
use postsel_core::sampler::EventBatch;
use serde::{Deserialize, Serialize};

use crate::config::{parse_observable, Units};
use crate::error::CliError;

/// Shortest round-trip decimal; scientific notation outside `[1e−5, 1e16)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Opens `path` for writing, or standard output.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Events as `index,channel,space,value`.
pub fn write_events<W: Write>(mut out: W, batch: &EventBatch, units: &Units) -> Result<(), CliError> {
    writeln!(out, "{}", units.comment())?;
    writeln!(out, "# seed = {}, stream = {}, eta = {}", batch.rng.seed, batch.rng.stream, fmt_f64(batch.setup.eta()))?;
    let mut w = csv_writer(out);
    w.write_record(["index", "channel", "space", "value"])?;
    for (i, e) in batch.events.iter().enumerate() {
        let scale = match e.space {
            postsel_core::sampler::Space::Position => units.z_scale(),
            postsel_core::sampler::Space::Momentum => units.p_scale(),
        };
        w.write_record([i.to_string(), e.channel.as_str().into(), e.space.as_str().into(), fmt_f64(e.value * scale)])?;
    }
    w.flush()?;
    Ok(())
}

pub const VERIFY_COLUMNS: [&str; 8] =
    ["epsilon", "delta", "eta", "observable", "exact", "paper_expansion", "oracle", "ratio_expansion_to_exact"];

/// Comparison table; values are dimensionless.
pub fn write_verify<W: Write>(mut out: W, rows: &[VerifyRow]) -> Result<(), CliError> {
    writeln!(out, "# units: MeanZ in w, MeanPz in w_p; blank exact/oracle = zero post-selection probability")?;
    let mut w = csv_writer(out);
    w.write_record(VERIFY_COLUMNS)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.epsilon),
            fmt_f64(r.delta),
            fmt_f64(r.eta),
            r.observable.as_str().to_string(),
            fmt_opt(r.exact),
            fmt_f64(r.paper_expansion),
            fmt_opt(r.oracle),
            fmt_opt(r.ratio_expansion_to_exact),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the `means` table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeansRow {
    pub eta: f64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub mean_z_exact: Option<f64>,
    pub mean_pz_exact: Option<f64>,
    pub mean_z_expansion: Option<f64>,
    pub mean_pz_expansion: Option<f64>,
    pub weak_limit_z: Option<f64>,
    pub weak_limit_p: Option<f64>,
    pub post_prob: f64,
    /// `None` when unbounded.
    pub margin: Option<f64>,
    pub flag: &'static str,
}

pub const MEANS_COLUMNS: [&str; 12] = [
    "eta",
    "epsilon",
    "delta",
    "mean_z_exact",
    "mean_pz_exact",
    "mean_z_expansion",
    "mean_pz_expansion",
    "weak_limit_z",
    "weak_limit_p",
    "post_prob",
    "margin",
    "flag",
];

pub fn write_means<W: Write>(mut out: W, rows: &[MeansRow], units: &Units) -> Result<(), CliError> {
    writeln!(out, "{}", units.comment())?;
    let mut w = csv_writer(out);
    w.write_record(MEANS_COLUMNS)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.eta),
            fmt_opt(r.epsilon),
            fmt_opt(r.delta),
            fmt_opt(r.mean_z_exact),
            fmt_opt(r.mean_pz_exact),
            fmt_opt(r.mean_z_expansion),
            fmt_opt(r.mean_pz_expansion),
            fmt_opt(r.weak_limit_z),
            fmt_opt(r.weak_limit_p),
            fmt_f64(r.post_prob),
            fmt_opt(r.margin),
            r.flag.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const SWEEP_COLUMNS: [&str; 5] = ["delta", "observable", "measured", "stderr", "n_events"];

pub fn write_sweep<W: Write>(mut out: W, points: &[SweepPoint], comment: &str) -> Result<(), CliError> {
    writeln!(out, "# units: MeanZ in w, MeanPz in w_p")?;
    if !comment.is_empty() {
        writeln!(out, "# {comment}")?;
    }
    let mut w = csv_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for p in points {
        w.write_record([
            fmt_f64(p.delta),
            p.observable.as_str().to_string(),
            fmt_f64(p.measured),
            fmt_f64(p.stderr),
            p.n_events.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct SweepRecord {
    delta: f64,
    observable: String,
    measured: f64,
    stderr: f64,
    n_events: u64,
}

/// Reads `delta,observable,measured,stderr,n_events` rows; `#` lines are
/// comments.
pub fn read_sweep<R: Read>(input: R) -> Result<Vec<SweepPoint>, CliError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(SWEEP_COLUMNS) {
        return Err(CliError::config(format!("sweep header must be {}", SWEEP_COLUMNS.join(","))));
    }
    let mut points = Vec::new();
    for (i, rec) in reader.deserialize::<SweepRecord>().enumerate() {
        let line = i + 1;
        let r = rec.map_err(|e| CliError::config(format!("sweep row {line}: {e}")))?;
        let observable = parse_observable(&r.observable)?;
        let p = SweepPoint::new(r.delta, observable, r.measured, r.stderr, r.n_events)
            .map_err(|e| CliError::config(format!("sweep row {line}: {e}")))?;
        points.push(p);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use postsel_core::Observable;

    #[test]
    fn floats_round_trip() {
        for x in [0.0, 1.0, -0.1, 0.797_103_157_803_706_9, 1e-20, -3.3e-300, 1e17, 12345.678, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(1e-20), "1e-20");
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn sweep_round_trip() {
        let pts = vec![
            SweepPoint::new(-0.02, Observable::MeanPz, 0.123_456_789_012_345_67, 1e-3, 100_000).unwrap(),
            SweepPoint::new(0.04, Observable::MeanZ, -7e-7, 2.5e-4, 12).unwrap(),
        ];
        let mut buf = Vec::new();
        write_sweep(&mut buf, &pts, "seed 1").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# units"));
        assert_eq!(read_sweep(buf.as_slice()).unwrap(), pts);
    }

    #[test]
    fn sweep_rejects_malformed_input() {
        let bad_header = "delta,measured\n0.1,0.2\n";
        assert!(read_sweep(bad_header.as_bytes()).is_err());
        let bad_value = "delta,observable,measured,stderr,n_events\n0.1,MeanPz,x,0.1,10\n";
        assert!(read_sweep(bad_value.as_bytes()).is_err());
        let zero_err = "delta,observable,measured,stderr,n_events\n0.1,MeanPz,0.2,0,10\n";
        assert!(read_sweep(zero_err.as_bytes()).is_err());
        let ok = "# c\ndelta,observable,measured,stderr,n_events\n0.1, mean_pz ,0.2,0.01,10\n";
        assert_eq!(read_sweep(ok.as_bytes()).unwrap().len(), 1);
    }
}
