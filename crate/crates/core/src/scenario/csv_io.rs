use std::io::{Read, Write};
use std::path::Path;

use super::run::Sample;
use crate::error::ScenarioError;

/// Column names of the exported series, in order.
pub const CSV_COLUMNS: [&str; 16] = [
    "t_s", "p_turb", "n", "T_dev_C", "AO_pct", "AO_dev_pct", "C_B_ppm", "z_steps", "q_kgps", "m_eff_kg", "i_t", "i_b",
    "x_t", "x_b", "dI_ax", "dX_ax",
];

/// Significant digits of every exported number.
pub const CSV_DIGITS: usize = 9;

/// Format `x` with [`CSV_DIGITS`] significant digits, in fixed notation for
/// moderate exponents and scientific notation otherwise, without trailing
/// zeros.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let sci = format!("{:.*e}", CSV_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..CSV_DIGITS as i32).contains(&exp) {
        let decimals = (CSV_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn row(s: &Sample) -> [f64; 16] {
    [
        s.t, s.p_turb, s.n, s.t_dev, s.ao, s.ao_dev, s.c_b, s.z, s.q, s.m_eff, s.i_t, s.i_b, s.x_t, s.x_b, s.d_i, s.d_x,
    ]
}

/// Write the header and one row per sample.
pub fn write_csv<W: Write>(samples: &[Sample], out: W) -> Result<(), ScenarioError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| ScenarioError::Csv {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for s in samples {
        w.write_record(row(s).iter().map(|&v| format_sig(v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Export a run's series to `path`.
pub fn export_csv(samples: &[Sample], path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let file = std::fs::File::create(path)?;
    write_csv(samples, std::io::BufWriter::new(file))
}

/// Parse an exported series. The header must match [`CSV_COLUMNS`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<Sample>, ScenarioError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(|e| ScenarioError::Csv {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(CSV_COLUMNS) {
        return Err(ScenarioError::Csv {
            line: 1,
            message: format!("expected columns {}", CSV_COLUMNS.join(",")),
        });
    }
    let mut samples = Vec::new();
    for (i, record) in r.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| ScenarioError::Csv {
            line,
            message: e.to_string(),
        })?;
        if record.len() != CSV_COLUMNS.len() {
            return Err(ScenarioError::Csv {
                line,
                message: format!("expected {} fields, found {}", CSV_COLUMNS.len(), record.len()),
            });
        }
        let mut v = [0.0; 16];
        for (j, field) in record.iter().enumerate() {
            v[j] = field.trim().parse().map_err(|_| ScenarioError::Csv {
                line,
                message: format!("column {}: `{field}` is not a number", CSV_COLUMNS[j]),
            })?;
        }
        let [t, p_turb, n, t_dev, ao, ao_dev, c_b, z, q, m_eff, i_t, i_b, x_t, x_b, d_i, d_x] = v;
        samples.push(Sample {
            t,
            p_turb,
            n,
            t_dev,
            ao,
            ao_dev,
            c_b,
            z,
            q,
            m_eff,
            i_t,
            i_b,
            x_t,
            x_b,
            d_i,
            d_x,
        });
    }
    Ok(samples)
}

/// Read an exported series from `path`.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<Sample>, ScenarioError> {
    read_csv(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(-2.5), "-2.5");
        assert_eq!(format_sig(86400.0), "86400");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig(1234.56789012), "1234.56789");
        assert_eq!(format_sig(9.999999999), "10");
        assert_eq!(format_sig(1.5e-7), "1.5e-7");
        assert_eq!(format_sig(123456789012.0), "1.23456789e11");
    }
}
