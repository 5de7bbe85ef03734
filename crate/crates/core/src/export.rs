//! Plain-text artifacts: CSV tables with a header row and a small SVG plot.
//!
//! Every writer goes through a temporary file in the destination directory
//! that is renamed into place once complete. Floats are written in Rust's
//! shortest round-trip form, so the readers recover them exactly.
//!
//! | artifact | columns |
//! |---|---|
//! | sample tensor | `j,m,p,wall_time_s,bit` |
//! | probability waveform | `j,p,waveform_time_s,value` |
//! | reconstructed waveform | `waveform_time_s,value,saturated` |
//! | IIP | `round_trip_time_s,distance_m,magnitude,polarity,saturated` |

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::analysis::{IipReport, ReconstructedWaveform, WaveformSample};
use crate::denoise::{ProbabilityWaveform, Units};
use crate::error::{Error, Result};
use crate::sampler::{MeasurementConfig, SampleTensor};

pub const TENSOR_HEADER: &str = "j,m,p,wall_time_s,bit";
pub const PROBABILITY_HEADER: &str = "j,p,waveform_time_s,value";
pub const RECONSTRUCTED_HEADER: &str = "waveform_time_s,value,saturated";
pub const IIP_HEADER: &str = "round_trip_time_s,distance_m,magnitude,polarity,saturated";

/// Write a file through a temporary sibling and rename it into place.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Data rows of a CSV file, after checking the header. Yields
/// `(line_number, fields)`.
fn read_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 {
            if line.trim() != header {
                return Err(parse_err(path, 1, format!("expected header {header:?}, found {line:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        rows.push((i + 1, line.split(',').map(|s| s.trim().to_owned()).collect()));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, fields: &[String], i: usize, name: &str) -> Result<T> {
    fields
        .get(i)
        .ok_or_else(|| parse_err(path, line, format!("missing column {name}")))?
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad value for {name}: {:?}", fields[i])))
}

pub fn write_tensor_csv(tensor: &SampleTensor, path: &Path) -> Result<()> {
    let cfg = &tensor.config;
    write_atomic(path, |w| {
        writeln!(w, "{TENSOR_HEADER}")?;
        for (j, m, p, bit) in tensor.iter() {
            writeln!(w, "{j},{m},{p},{},{}", cfg.wall_time(j, m, p), u8::from(bit))?;
        }
        Ok(())
    })
}

/// Read a tensor written by [`write_tensor_csv`]. The schedule and bias are
/// not part of the file and must be supplied.
pub fn read_tensor_csv(path: &Path, config: MeasurementConfig, calibrated_bias: f64) -> Result<SampleTensor> {
    let mut tensor = SampleTensor::new(config, calibrated_bias);
    let (jj, mm, pp) = (tensor.config.phases, tensor.config.repetitions, tensor.config.sets);
    let mut seen = 0usize;
    for (line, f) in read_rows(path, TENSOR_HEADER)? {
        let j: usize = field(path, line, &f, 0, "j")?;
        let m: usize = field(path, line, &f, 1, "m")?;
        let p: usize = field(path, line, &f, 2, "p")?;
        let bit: u8 = field(path, line, &f, 4, "bit")?;
        if j >= jj || m >= mm || p >= pp || bit > 1 {
            return Err(parse_err(path, line, format!("row ({j}, {m}, {p}, {bit}) outside the schedule")));
        }
        tensor.set(j, m, p, bit == 1);
        seen += 1;
    }
    if seen != jj * mm * pp {
        return Err(Error::Dimension(format!(
            "{}: {seen} rows for a {}-sample schedule",
            path.display(),
            jj * mm * pp
        )));
    }
    Ok(tensor)
}

pub fn write_probability_csv(w: &ProbabilityWaveform, path: &Path) -> Result<()> {
    write_atomic(path, |out| {
        writeln!(out, "{PROBABILITY_HEADER}")?;
        for j in 0..w.phases() {
            for p in 0..w.sets() {
                writeln!(out, "{j},{p},{},{}", w.waveform_time(j, p), w.get(j, p))?;
            }
        }
        Ok(())
    })
}

/// Read a waveform written by [`write_probability_csv`] onto `config`'s grid.
/// The result is marked absolute; set `relative` for differences.
pub fn read_probability_csv(path: &Path, config: MeasurementConfig, units: Units) -> Result<ProbabilityWaveform> {
    let mut w = ProbabilityWaveform::zeros(config, units);
    let n = w.phases() * w.sets();
    let mut seen = 0usize;
    for (line, f) in read_rows(path, PROBABILITY_HEADER)? {
        let j: usize = field(path, line, &f, 0, "j")?;
        let p: usize = field(path, line, &f, 1, "p")?;
        let v: f64 = field(path, line, &f, 3, "value")?;
        if j >= w.phases() || p >= w.sets() {
            return Err(parse_err(path, line, format!("({j}, {p}) outside the grid")));
        }
        w.set(j, p, v);
        seen += 1;
    }
    if seen != n {
        return Err(Error::Dimension(format!("{}: {seen} rows for {n} grid points", path.display())));
    }
    if units == Units::Probability {
        w.mark_clipped();
    }
    Ok(w)
}

pub fn write_reconstructed_csv(w: &ReconstructedWaveform, path: &Path) -> Result<()> {
    write_atomic(path, |out| {
        writeln!(out, "{RECONSTRUCTED_HEADER}")?;
        for s in &w.samples {
            writeln!(out, "{},{},{}", s.waveform_time, s.value, u8::from(s.saturated))?;
        }
        Ok(())
    })
}

pub fn read_reconstructed_csv(path: &Path) -> Result<Vec<WaveformSample>> {
    read_rows(path, RECONSTRUCTED_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(WaveformSample {
                waveform_time: field(path, line, &f, 0, "waveform_time_s")?,
                value: field(path, line, &f, 1, "value")?,
                saturated: field::<u8>(path, line, &f, 2, "saturated")? == 1,
            })
        })
        .collect()
}

pub fn write_iip_csv(report: &IipReport, path: &Path) -> Result<()> {
    write_atomic(path, |out| {
        writeln!(out, "{IIP_HEADER}")?;
        for d in &report.discontinuities {
            writeln!(
                out,
                "{},{},{},{},{}",
                d.round_trip_time,
                d.distance,
                d.magnitude,
                d.polarity,
                u8::from(d.saturated)
            )?;
        }
        Ok(())
    })
}

/// Human-readable IIP listing.
pub fn iip_table(report: &IipReport, units: Units) -> String {
    let unit = match units {
        Units::Probability => "",
        Units::Volts => " V",
    };
    let mut s = String::new();
    let _ = writeln!(s, "{:>4}  {:>12}  {:>10}  {:>12}  {:>3}  saturated", "#", "round trip", "distance", "magnitude", "pol");
    for (i, d) in report.discontinuities.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:>4}  {:>9.3} ns  {:>8.4} m  {:>10.5}{unit:<2}  {:>3}  {}",
            i,
            d.round_trip_time * 1e9,
            d.distance,
            d.magnitude,
            d.polarity,
            if d.saturated { "yes" } else { "no" }
        );
    }
    if report.discontinuities.is_empty() {
        s.push_str("(no discontinuities above threshold)\n");
    }
    s.push_str("velocity map:\n");
    for (from, v) in &report.velocity_map.sections {
        let _ = writeln!(s, "  from {from:.4} m at {v:.4e} m/s");
    }
    s
}

/// Line plot of a reconstructed waveform with saturated samples marked.
pub fn render_svg(w: &ReconstructedWaveform, title: &str) -> String {
    const W: f64 = 900.0;
    const H: f64 = 360.0;
    const M: f64 = 50.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{M}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
        xml_escape(title)
    );
    if w.samples.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let t0 = w.samples.first().map_or(0.0, |x| x.waveform_time);
    let t1 = w.samples.last().map_or(1.0, |x| x.waveform_time).max(t0 + f64::MIN_POSITIVE);
    let (lo, hi) = w
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let x = |t: f64| M + (t - t0) / (t1 - t0) * (W - 2.0 * M);
    let y = |v: f64| H - M - (v - lo) / (hi - lo) * (H - 2.0 * M);

    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let unit = if w.units == Units::Volts { " V" } else { "" };
    let _ = writeln!(
        s,
        r#"<text x="4" y="{:.1}" font-family="sans-serif" font-size="10">{hi:.4}{unit}</text>"#,
        M + 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="4" y="{:.1}" font-family="sans-serif" font-size="10">{lo:.4}{unit}</text>"#,
        H - M
    );
    let _ = writeln!(
        s,
        r#"<text x="{M}" y="{:.1}" font-family="sans-serif" font-size="10">{:.2} ns</text>"#,
        H - M + 16.0,
        t0 * 1e9
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{:.2} ns</text>"#,
        W - M,
        H - M + 16.0,
        t1 * 1e9
    );
    s.push_str(r#"<polyline fill="none" stroke="steelblue" stroke-width="1" points=""#);
    for p in &w.samples {
        let _ = write!(s, "{:.2},{:.2} ", x(p.waveform_time), y(p.value));
    }
    s.push_str("\"/>\n");
    for p in w.samples.iter().filter(|p| p.saturated) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="crimson"/>"#,
            x(p.waveform_time),
            y(p.value)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Remove files written so far; used when a later stage fails.
pub(crate) fn remove_all(paths: &[PathBuf]) {
    for p in paths {
        let _ = fs::remove_file(p);
    }
}
