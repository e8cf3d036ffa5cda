//! File formats: point-cloud CSV, MST edge CSV, collapse-scan CSV and the
//! optimization-run artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a written cloud back reproduces it bit for bit.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::descent::OptimRun;
use crate::error::{Result, TregError};
use crate::mst::Mst;
use crate::point_cloud::PointCloud;
use crate::uniformity::CollapseScan;

pub fn cloud_header(d: usize) -> Vec<String> {
    (0..d).map(|k| format!("x{k}")).collect()
}

pub fn read_cloud_csv<R: Read>(reader: R) -> Result<PointCloud> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let d = header.len();
    if d == 0 || header.iter().ne(cloud_header(d).iter().map(String::as_str)) {
        return Err(TregError::Parse(format!(
            "expected header `x0,...,x{{d-1}}`, got `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut data = Vec::new();
    let mut n = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| TregError::Parse(format!("row {}: {e}", row + 1)))?;
        for (k, field) in record.iter().enumerate() {
            let x: f64 = field
                .parse()
                .map_err(|_| TregError::Parse(format!("row {}, column x{k}: `{field}` is not a number", row + 1)))?;
            if !x.is_finite() {
                return Err(TregError::Parse(format!("row {}, column x{k}: non-finite value", row + 1)));
            }
            data.push(x);
        }
        n += 1;
    }
    if n == 0 {
        return Err(TregError::Parse("point cloud CSV has no data rows".into()));
    }
    PointCloud::from_flat(n, d, data)
}

pub fn write_cloud_csv<W: Write>(writer: W, cloud: &PointCloud) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(cloud_header(cloud.dim()))?;
    for p in cloud.points() {
        w.write_record(p.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Header `i,j,length`; rows in `(length, i, j)` order.
pub fn write_edges_csv<W: Write>(writer: W, mst: &Mst) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(["i", "j", "length"])?;
    for e in &mst.edges {
        w.write_record([e.i.to_string(), e.j.to_string(), e.length.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Header `eta,neg_l_e`.
pub fn write_collapse_csv<W: Write>(writer: W, scan: &CollapseScan) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(["eta", "neg_l_e"])?;
    for (eta, s) in scan.etas.iter().zip(&scan.scores) {
        w.write_record([eta.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cloud_file(path: &Path) -> Result<PointCloud> {
    read_cloud_csv(File::open(path)?)
}

pub fn write_cloud_file(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_cloud_csv(BufWriter::new(File::create(path)?), cloud)
}

pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes `points_initial.csv`, `points_final.csv`, `history.jsonl` and
/// `summary.json` into `dir`.
pub fn write_optim_run<S: Serialize>(dir: &Path, run: &OptimRun, summary: &S) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_cloud_file(&dir.join("points_initial.csv"), &run.initial)?;
    write_cloud_file(&dir.join("points_final.csv"), &run.final_cloud)?;
    let mut w = BufWriter::new(File::create(dir.join("history.jsonl"))?);
    for entry in &run.history {
        serde_json::to_writer(&mut w, entry)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    write_json_file(&dir.join("summary.json"), summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate, GeneratorKind, GeneratorSpec};
    use crate::mst::prim_mst;
    use proptest::prelude::*;

    #[test]
    fn reads_unit_square() {
        let text = "x0,x1\n0,0\n1,0\n1,1\n0,1\n";
        let c = read_cloud_csv(text.as_bytes()).unwrap();
        assert_eq!((c.n(), c.dim()), (4, 2));
        assert_eq!(c.point(2), &[1.0, 1.0]);
    }

    #[test]
    fn rejects_malformed_input() {
        for text in ["a,b\n1,2\n", "x0,x1\n1,abc\n", "x0,x1\n1\n", "x0\n", "x1,x0\n1,2\n", "x0\nNaN\n"] {
            assert!(matches!(read_cloud_csv(text.as_bytes()), Err(TregError::Parse(_))), "{text:?}");
        }
    }

    #[test]
    fn edge_csv_layout() {
        let c = PointCloud::from_rows(&[[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]]).unwrap();
        let mut out = Vec::new();
        write_edges_csv(&mut out, &prim_mst(&c)).unwrap();
        let text = String::from_utf8(out).unwrap();
        let expected_second = format!("1,2,{}", 18f64.sqrt());
        assert_eq!(text, format!("i,j,length\n0,2,1\n{expected_second}\n"));
    }

    proptest! {
        #[test]
        fn cloud_csv_round_trips_bitwise(seed in any::<u64>(), n in 1usize..20, d in 1usize..6, scale in -30i32..30) {
            let c = generate(&GeneratorSpec::new(GeneratorKind::IsotropicGaussian, n, d, seed)).unwrap()
                .scaled(10f64.powi(scale));
            let mut buf = Vec::new();
            write_cloud_csv(&mut buf, &c).unwrap();
            prop_assert_eq!(read_cloud_csv(buf.as_slice()).unwrap(), c);
        }
    }
}
