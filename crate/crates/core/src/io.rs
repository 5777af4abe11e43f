//! Text and CSV formats. Every writer takes free-form header lines, which are
//! emitted as `#` comments ahead of the data; readers skip them.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::FitReport;
use crate::jsa::{FrequencyGrid, JointAmplitude};
use crate::twinstats::{CountRecord, VisibilityPoint};
use crate::Complex64;

pub fn write_header<W: Write>(w: &mut W, lines: &[String]) -> Result<()> {
    for block in lines {
        for line in block.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn csv_reader<R: std::io::Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

/// Grid dump: comment header, a `grid` line with shape and half-spans, then
/// one `re im` pair per line in row-major order (signal index slow).
pub fn write_grid_dump<W: Write>(mut w: W, jsa: &JointAmplitude, header: &[String]) -> Result<()> {
    let g = jsa.grid();
    write_header(&mut w, header)?;
    writeln!(w, "# axes: signal detuning (rows), idler detuning (columns), rad/ps")?;
    writeln!(w, "# amplitude units: ps; normalization: sum |f|^2 * dnu_s * dnu_i = {:.12}", jsa.norm_sq())?;
    writeln!(w, "grid {} {} {:.17e} {:.17e}", g.n_s, g.n_i, g.span_s, g.span_i)?;
    for v in jsa.values() {
        writeln!(w, "{:.17e} {:.17e}", v.re, v.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_dump<R: BufRead>(r: R) -> Result<JointAmplitude> {
    let mut grid = None;
    let mut values = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("grid dump line {}: {what}", k + 1));
        let fields: Vec<&str> = t.split_whitespace().collect();
        if grid.is_none() {
            if fields.len() != 5 || fields[0] != "grid" {
                return Err(bad("expected `grid n_s n_i span_s span_i`"));
            }
            let n_s = fields[1].parse().map_err(|_| bad("bad n_s"))?;
            let n_i = fields[2].parse().map_err(|_| bad("bad n_i"))?;
            let span_s = fields[3].parse().map_err(|_| bad("bad span_s"))?;
            let span_i = fields[4].parse().map_err(|_| bad("bad span_i"))?;
            let g = FrequencyGrid::new(n_s, n_i, span_s, span_i)?;
            values.reserve(n_s * n_i);
            grid = Some(g);
            continue;
        }
        if fields.len() != 2 {
            return Err(bad("expected `re im`"));
        }
        let re: f64 = fields[0].parse().map_err(|_| bad("bad real part"))?;
        let im: f64 = fields[1].parse().map_err(|_| bad("bad imaginary part"))?;
        values.push(Complex64::new(re, im));
    }
    let grid = grid.ok_or_else(|| Error::Format("grid dump has no grid line".into()))?;
    JointAmplitude::from_values(grid, values)
}

/// `arm,nu_rad_per_ps,density` rows for both marginals.
pub fn write_marginals_csv<W: Write>(mut w: W, jsa: &JointAmplitude, header: &[String]) -> Result<()> {
    let m = crate::jsa::marginals(jsa);
    let g = jsa.grid();
    write_header(&mut w, header)?;
    writeln!(w, "# density: marginal probability per grid cell (each arm sums to 1)")?;
    let mut out = csv_writer(w);
    out.write_record(["arm", "nu_rad_per_ps", "density"])?;
    for (arm, axis, density) in [("signal", g.axis_s(), &m.signal), ("idler", g.axis_i(), &m.idler)] {
        for (nu, p) in axis.iter().zip(density.iter()) {
            out.write_record([arm.to_string(), format!("{nu:.10e}"), format!("{p:.10e}")])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_cut_csv<W: Write>(mut w: W, distance: &[f64], intensity: &[f64], header: &[String]) -> Result<()> {
    write_header(&mut w, header)?;
    writeln!(w, "# distance along the cut in rad/ps; intensity |f|^2 in ps^2")?;
    let mut out = csv_writer(w);
    out.write_record(["distance_rad_per_ps", "intensity"])?;
    for (t, y) in distance.iter().zip(intensity) {
        out.write_record([format!("{t:.10e}"), format!("{y:.10e}")])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_schmidt_csv<W: Write>(mut w: W, coefficients: &[f64], header: &[String]) -> Result<()> {
    write_header(&mut w, header)?;
    writeln!(w, "# lambda_k: Schmidt coefficients, sum lambda_k^2 = 1 before truncation")?;
    let mut out = csv_writer(w);
    out.write_record(["k", "lambda"])?;
    for (k, l) in coefficients.iter().enumerate() {
        out.write_record([k.to_string(), format!("{l:.15e}")])?;
    }
    out.flush()?;
    Ok(())
}

/// One mode function on its detuning axis: `nu_rad_per_ps,re,im`.
pub fn write_mode_csv<W: Write>(mut w: W, axis: &[f64], mode: &[Complex64], header: &[String]) -> Result<()> {
    if axis.len() != mode.len() {
        return Err(Error::Shape(format!("axis has {} points, mode has {}", axis.len(), mode.len())));
    }
    write_header(&mut w, header)?;
    writeln!(w, "# mode amplitude in ps^(1/2), normalized to sum |phi|^2 dnu = 1")?;
    let mut out = csv_writer(w);
    out.write_record(["nu_rad_per_ps", "re", "im"])?;
    for (nu, v) in axis.iter().zip(mode) {
        out.write_record([format!("{nu:.10e}"), format!("{:.15e}", v.re), format!("{:.15e}", v.im)])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CountRow {
    gates: u64,
    #[serde(rename = "S_s")]
    singles_s: u64,
    #[serde(rename = "S_i")]
    singles_i: u64,
    #[serde(rename = "C")]
    coincidences: u64,
    #[serde(rename = "R")]
    gate_rate: f64,
}

pub fn write_count_records<W: Write>(mut w: W, records: &[CountRecord], header: &[String]) -> Result<()> {
    write_header(&mut w, header)?;
    writeln!(w, "# gates: count; S_s, S_i, C: counts; R: gate rate in Hz")?;
    let mut out = csv_writer(w);
    for r in records {
        out.serialize(CountRow {
            gates: r.gates,
            singles_s: r.singles_s,
            singles_i: r.singles_i,
            coincidences: r.coincidences,
            gate_rate: r.gate_rate,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_count_records<R: std::io::Read>(r: R) -> Result<Vec<CountRecord>> {
    csv_reader(r)
        .deserialize::<CountRow>()
        .map(|row| {
            let row = row?;
            let rec = CountRecord {
                gates: row.gates,
                singles_s: row.singles_s,
                singles_i: row.singles_i,
                coincidences: row.coincidences,
                gate_rate: row.gate_rate,
            };
            rec.validate()?;
            Ok(rec)
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PointRow {
    mean_n: f64,
    #[serde(rename = "V")]
    visibility: f64,
    #[serde(rename = "sigma_V")]
    sigma: f64,
}

pub fn write_visibility_points<W: Write>(mut w: W, points: &[VisibilityPoint], header: &[String]) -> Result<()> {
    write_header(&mut w, header)?;
    writeln!(w, "# mean_n: mean photon number per beam; V, sigma_V: dimensionless")?;
    let mut out = csv_writer(w);
    for p in points {
        out.serialize(PointRow { mean_n: p.mean_n, visibility: p.visibility, sigma: p.sigma })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_visibility_points<R: std::io::Read>(r: R) -> Result<Vec<VisibilityPoint>> {
    csv_reader(r)
        .deserialize::<PointRow>()
        .map(|row| {
            let row = row?;
            Ok(VisibilityPoint { mean_n: row.mean_n, visibility: row.visibility, sigma: row.sigma })
        })
        .collect()
}

/// Fit summary as comments followed by the residual table.
pub fn write_fit_report<W: Write>(
    mut w: W,
    report: &FitReport,
    points: &[VisibilityPoint],
    header: &[String],
) -> Result<()> {
    write_header(&mut w, header)?;
    write_header(&mut w, &[report.summary()])?;
    writeln!(w, "# overlap,{:.10},{:.10}", report.overlap, report.overlap_stderr)?;
    if let Some(r) = report.eta_ratio {
        writeln!(w, "# eta_ratio,{r:.10}")?;
    }
    writeln!(w, "# chi2,{:.10},{}", report.chi2, report.dof)?;
    let mut out = csv_writer(w);
    out.write_record(["mean_n", "V", "sigma_V", "residual", "pull"])?;
    for (p, r) in points.iter().zip(&report.residuals) {
        out.write_record([
            format!("{:.10}", p.mean_n),
            format!("{:.10}", p.visibility),
            format!("{:.10}", p.sigma),
            format!("{r:.10e}"),
            format!("{:.6}", r / p.sigma),
        ])?;
    }
    out.flush()?;
    Ok(())
}
