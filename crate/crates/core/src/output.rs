//! CSV output. Numbers use a fixed, locale-free 9-significant-digit format so
//! equal inputs always produce identical bytes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::netsim::TraceRecord;

pub const TRACE_HEADER: &str =
    "period,mean_activity,mean_battery,sun,cloud,e_tx,e_rx,e_idle,e_active,e_app";

/// `%.9g`-style formatting: 9 significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-5, 1e9)`.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("`e` format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let mantissa = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn trace_line(r: &TraceRecord) -> String {
    let e = &r.energy;
    let fields = [
        r.mean_activity,
        r.mean_battery,
        r.sun,
        r.cloud,
        e.tx,
        e.rx,
        e.idle,
        e.active,
        e.app,
    ];
    let mut line = r.period.to_string();
    for v in fields {
        line.push(',');
        line.push_str(&format_real(v));
    }
    line
}

pub fn write_trace_to<W: Write>(mut w: W, records: &[TraceRecord]) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(w, "{}", trace_line(r))?;
    }
    w.flush()
}

/// Write `contents` via a temporary file in the same directory, then rename.
/// A failed write leaves no file at `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(64 * (records.len() + 1));
    write_trace_to(&mut buf, records)?;
    write_atomic(path, &buf)
}

/// One parsed trace row: period and the nine real columns in header order.
pub type TraceRow = (u64, [f64; 9]);

/// Parse a trace CSV produced by [`write_trace`].
pub fn read_trace(text: &str) -> Result<Vec<TraceRow>, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != TRACE_HEADER {
        return Err(format!("unexpected header: {:?}", header));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| e.to_string())?;
            let period = rec[0].parse::<u64>().map_err(|e| e.to_string())?;
            let mut vals = [0.0; 9];
            for (slot, field) in vals.iter_mut().zip(rec.iter().skip(1)) {
                *slot = field.parse::<f64>().map_err(|e| e.to_string())?;
            }
            Ok((period, vals))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyBuckets;

    fn record(period: u64) -> TraceRecord {
        TraceRecord {
            period,
            mean_activity: 0.591_666_666_666_7,
            mean_battery: 0.812_345_678_9,
            sun: 1.0,
            cloud: 0.0,
            energy: EnergyBuckets {
                tx: 1.2e-5,
                rx: 3.456_789_012_3e-3,
                idle: 8.4e-12,
                active: 0.25,
                app: 12.5,
            },
            messages_sent: 0,
            messages_received: 0,
        }
    }

    #[test]
    fn real_formatting() {
        assert_eq!(format_real(0.0), "0");
        assert_eq!(format_real(1.0), "1");
        assert_eq!(format_real(0.5), "0.5");
        assert_eq!(format_real(0.591_666_666_666_7), "0.591666667");
        assert_eq!(format_real(123_456_789.4), "123456789");
        assert_eq!(format_real(1.5e9), "1.5e+09");
        assert_eq!(format_real(8.4e-12), "8.4e-12");
        assert_eq!(format_real(1.2e-5), "0.000012");
        assert_eq!(format_real(-0.25), "-0.25");
    }

    #[test]
    fn empty_trace_is_header_only() {
        let mut buf = Vec::new();
        write_trace_to(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{TRACE_HEADER}\n"));
    }

    #[test]
    fn one_record_is_two_lines() {
        let mut buf = Vec::new();
        write_trace_to(&mut buf, &[record(3)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }

    #[test]
    fn parse_back_within_nine_digits() {
        let rec = record(7);
        let mut buf = Vec::new();
        write_trace_to(&mut buf, &[rec]).unwrap();
        let rows = read_trace(std::str::from_utf8(&buf).unwrap()).unwrap();
        let (period, vals) = rows[0];
        assert_eq!(period, 7);
        let want = [
            rec.mean_activity,
            rec.mean_battery,
            rec.sun,
            rec.cloud,
            rec.energy.tx,
            rec.energy.rx,
            rec.energy.idle,
            rec.energy.active,
            rec.energy.app,
        ];
        for (got, want) in vals.iter().zip(want) {
            assert!((got - want).abs() <= 1e-9 * want.abs(), "{got} vs {want}");
        }
    }

    #[test]
    fn atomic_write_creates_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/trace.csv");
        write_trace(&path, &[record(0)]).unwrap();
        assert!(fs::read_to_string(&path).unwrap().starts_with(TRACE_HEADER));
    }
}
