//! Manifold archives (JSON) and plot-ready CSV tables.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::continuation::Eigenmanifold;
use crate::error::{Error, Result};
use crate::metrics::{Component, ComparisonReport, EnergyFrequency, StrobeFrame};

/// Pretty JSON with every float written to 17 significant digits.
struct ArchiveFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for ArchiveFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

fn to_archive_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ArchiveFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("JSON output is UTF-8"))
}

pub fn archive_to_string(manifold: &Eigenmanifold) -> Result<String> {
    to_archive_json(manifold)
}

/// Parses and validates an archive.
pub fn parse_archive(text: &str) -> Result<Eigenmanifold> {
    let manifold: Eigenmanifold = serde_json::from_str(text)?;
    let n = manifold.equilibrium.len();
    if manifold.linear_seed.eigvec.len() != n {
        return Err(Error::Spec("linear seed and equilibrium differ in length".into()));
    }
    for (k, p) in manifold.points.iter().enumerate() {
        if p.q0.len() != n {
            return Err(Error::Spec(format!("point {k} has {} coordinates, expected {n}", p.q0.len())));
        }
        if !(p.period > 0.0) {
            return Err(Error::Spec(format!("point {k} has non-positive period")));
        }
    }
    if manifold.points.windows(2).any(|w| w[1].energy <= w[0].energy) {
        return Err(Error::Spec("archive energies are not strictly increasing".into()));
    }
    Ok(manifold)
}

pub fn write_archive(path: impl AsRef<Path>, manifold: &Eigenmanifold) -> Result<()> {
    write_atomic(path.as_ref(), archive_to_string(manifold)?.as_bytes())
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<Eigenmanifold> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
    parse_archive(&text)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Nine significant digits.
fn num(v: f64) -> String {
    format!("{v:.8e}")
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    fill(&mut w)?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub const REPORT_HEADER: [&str; 8] = ["model_a", "model_b", "mode", "component", "energy_J", "s_m", "metric", "value"];

/// Report rows ordered by report, component and energy. Each component
/// closes with `F_E` and `G_E` rows whose energy column reads `integrated`.
pub fn report_csv(reports: &[ComparisonReport]) -> Result<Vec<u8>> {
    csv_bytes(&REPORT_HEADER, |w| {
        for r in reports {
            let mode = if r.mode_a == r.mode_b {
                r.mode_a.to_string()
            } else {
                format!("{}/{}", r.mode_a, r.mode_b)
            };
            let s_star = num(r.s_star);
            for c in Component::ALL {
                let i = c.index();
                let mut row = |energy: &str, s: &str, metric: &str, value: f64| {
                    w.write_record([&r.model_a, &r.model_b, &mode, c.name(), energy, s, metric, &num(value)])
                };
                for e in &r.rows {
                    let energy = num(e.energy);
                    row(&energy, &s_star, "frechet", e.frechet[i])?;
                    row(&energy, "integral", "frechet", e.frechet_integral[i])?;
                    row(&energy, &s_star, "coherence", e.coherence[i])?;
                    row(&energy, "integral", "coherence", e.coherence_integral[i])?;
                }
                row("integrated", "integral", "frechet", r.frechet_energy[i])?;
                row("integrated", "integral", "coherence", r.coherence_energy[i])?;
            }
        }
        Ok(())
    })
}

pub fn write_report_csv(path: impl AsRef<Path>, reports: &[ComparisonReport]) -> Result<()> {
    write_atomic(path.as_ref(), &report_csv(reports)?)
}

pub const ENERGY_FREQUENCY_HEADER: [&str; 5] = ["model", "mode", "energy_J", "omega_rad_s", "freq_hz"];

pub fn energy_frequency_csv(model: &str, mode: usize, rows: &[EnergyFrequency]) -> Result<Vec<u8>> {
    csv_bytes(&ENERGY_FREQUENCY_HEADER, |w| {
        let mode = mode.to_string();
        for r in rows {
            w.write_record([model, &mode, &num(r.energy), &num(r.omega), &num(r.freq_hz)])?;
        }
        Ok(())
    })
}

pub fn write_energy_frequency_csv(path: impl AsRef<Path>, model: &str, mode: usize, rows: &[EnergyFrequency]) -> Result<()> {
    write_atomic(path.as_ref(), &energy_frequency_csv(model, mode, rows)?)
}

pub const STROBE_HEADER: [&str; 9] = ["model", "mode", "energy_J", "fraction", "time_s", "s_m", "x_m", "y_m", "z_m"];

pub fn strobe_csv(model: &str, mode: usize, energy: f64, frames: &[StrobeFrame]) -> Result<Vec<u8>> {
    csv_bytes(&STROBE_HEADER, |w| {
        let (mode, energy) = (mode.to_string(), num(energy));
        for f in frames {
            let (fraction, time) = (num(f.fraction), num(f.time));
            for [s, x, y, z] in &f.shape {
                w.write_record([model, &mode, &energy, &fraction, &time, &num(*s), &num(*x), &num(*y), &num(*z)])?;
            }
        }
        Ok(())
    })
}

pub fn write_strobe_csv(path: impl AsRef<Path>, model: &str, mode: usize, energy: f64, frames: &[StrobeFrame]) -> Result<()> {
    write_atomic(path.as_ref(), &strobe_csv(model, mode, energy, frames)?)
}
