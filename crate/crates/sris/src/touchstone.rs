//! Touchstone 1.x `.sNp` reader and writer.
//!
//! The reader accepts S, Y or Z data in RI, MA or DB form with any frequency unit. Network
//! data is read as a flat token stream, so line breaks inside a frequency point are free.
//! Two-port files use the column-major order `11 21 12 22`; all others are row-major.
//! Y and Z data in version 1 files are normalized to the reference resistance.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use sris_core::linalg::CMatrix;
use sris_core::network::{s_to_z, z_to_s, PortRole};

use crate::error::{Result, SrisError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    S,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    RealImag,
    MagAngle,
    DbAngle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionLine {
    /// Multiplier from file frequency units to Hz.
    pub unit: f64,
    pub parameter: Parameter,
    pub format: DataFormat,
    pub reference: f64,
}

impl Default for OptionLine {
    fn default() -> Self {
        Self {
            unit: 1e9,
            parameter: Parameter::S,
            format: DataFormat::MagAngle,
            reference: 50.0,
        }
    }
}

/// One frequency point, converted to unnormalized values of `parameter`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPoint {
    pub frequency: f64,
    pub matrix: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Touchstone {
    pub ports: usize,
    pub options: OptionLine,
    pub points: Vec<FrequencyPoint>,
}

impl Touchstone {
    /// Impedance matrix at the single frequency point of the file, or at `frequency` when
    /// several are present (matched to 1e-9 relative).
    pub fn impedance_at(&self, frequency: Option<f64>) -> Result<(f64, CMatrix)> {
        let point = match (frequency, self.points.as_slice()) {
            (_, [only]) => only,
            (Some(f), points) => points
                .iter()
                .find(|p| (p.frequency - f).abs() <= 1e-9 * f.abs())
                .ok_or_else(|| SrisError::Usage(format!("no frequency point at {f} Hz")))?,
            (None, points) => {
                return Err(SrisError::Usage(format!(
                    "file has {} frequency points; select one",
                    points.len()
                )))
            }
        };
        let z = match self.options.parameter {
            Parameter::Z => point.matrix.clone(),
            Parameter::S => s_to_z(&point.matrix, self.options.reference)?,
            Parameter::Y => point
                .matrix
                .clone()
                .try_inverse()
                .ok_or(SrisError::Numerical("singular Y matrix".into()))?,
        };
        Ok((point.frequency, z))
    }
}

/// Port count from an `.sNp` extension.
pub fn ports_from_extension(path: &Path) -> Option<usize> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    let digits = ext.strip_prefix('s')?.strip_suffix('p')?;
    digits.parse().ok().filter(|&n| n > 0)
}

pub fn read(path: &Path) -> Result<Touchstone> {
    let ports = ports_from_extension(path)
        .ok_or_else(|| SrisError::parse(path, 0, "expected a .sNp file extension"))?;
    let text = std::fs::read_to_string(path).map_err(|e| SrisError::io(path, e))?;
    parse(&text, ports, path)
}

/// Parses file contents; `origin` only labels error messages.
pub fn parse(text: &str, ports: usize, origin: &Path) -> Result<Touchstone> {
    let per_point = 1 + 2 * ports * ports;
    let mut options: Option<OptionLine> = None;
    let mut tokens: Vec<f64> = Vec::with_capacity(per_point);
    let mut points = Vec::new();
    let mut point_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if options.is_some() {
                return Err(SrisError::parse(origin, line_no, "second option line"));
            }
            if !points.is_empty() || !tokens.is_empty() {
                return Err(SrisError::parse(origin, line_no, "option line after network data"));
            }
            options = Some(parse_options(rest, origin, line_no)?);
            continue;
        }
        if line.starts_with('[') {
            return Err(SrisError::parse(origin, line_no, "Touchstone 2 keywords are not supported"));
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| SrisError::parse(origin, line_no, format!("invalid number '{tok}'")))?;
            if tokens.is_empty() {
                point_line = line_no;
            }
            tokens.push(v);
            if tokens.len() == per_point {
                let opts = options.get_or_insert_with(OptionLine::default);
                points.push(to_point(&tokens, ports, opts, origin, point_line)?);
                tokens.clear();
            }
        }
    }
    if !tokens.is_empty() {
        return Err(SrisError::parse(
            origin,
            point_line,
            format!("incomplete frequency point: {} of {per_point} values", tokens.len()),
        ));
    }
    if points.is_empty() {
        return Err(SrisError::parse(origin, 0, "no network data"));
    }
    for w in points.windows(2) {
        if !(w[1].frequency > w[0].frequency) {
            return Err(SrisError::parse(origin, 0, "frequencies must increase"));
        }
    }
    Ok(Touchstone {
        ports,
        options: options.unwrap_or_default(),
        points,
    })
}

fn parse_options(rest: &str, origin: &Path, line_no: usize) -> Result<OptionLine> {
    let mut opts = OptionLine::default();
    let mut words = rest.split_whitespace();
    while let Some(w) = words.next() {
        match w.to_ascii_uppercase().as_str() {
            "HZ" => opts.unit = 1.0,
            "KHZ" => opts.unit = 1e3,
            "MHZ" => opts.unit = 1e6,
            "GHZ" => opts.unit = 1e9,
            "S" => opts.parameter = Parameter::S,
            "Y" => opts.parameter = Parameter::Y,
            "Z" => opts.parameter = Parameter::Z,
            "RI" => opts.format = DataFormat::RealImag,
            "MA" => opts.format = DataFormat::MagAngle,
            "DB" => opts.format = DataFormat::DbAngle,
            "R" => {
                let v = words
                    .next()
                    .ok_or_else(|| SrisError::parse(origin, line_no, "missing reference resistance after R"))?;
                opts.reference = v
                    .parse()
                    .ok()
                    .filter(|r: &f64| *r > 0.0 && r.is_finite())
                    .ok_or_else(|| SrisError::parse(origin, line_no, format!("invalid reference resistance '{v}'")))?;
            }
            "G" | "H" => {
                return Err(SrisError::parse(origin, line_no, format!("{w} parameters are not supported")))
            }
            _ => return Err(SrisError::parse(origin, line_no, format!("unknown option '{w}'"))),
        }
    }
    Ok(opts)
}

fn to_point(tokens: &[f64], ports: usize, opts: &OptionLine, origin: &Path, line: usize) -> Result<FrequencyPoint> {
    let frequency = tokens[0] * opts.unit;
    if !(frequency >= 0.0) || !frequency.is_finite() {
        return Err(SrisError::parse(origin, line, format!("invalid frequency {}", tokens[0])));
    }
    let mut m = CMatrix::zeros(ports, ports);
    for (k, pair) in tokens[1..].chunks_exact(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let v = match opts.format {
            DataFormat::RealImag => Complex64::new(a, b),
            DataFormat::MagAngle => Complex64::from_polar(a, b.to_radians()),
            DataFormat::DbAngle => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        };
        let (row, col) = if ports == 2 { (k % 2, k / 2) } else { (k / ports, k % ports) };
        m[(row, col)] = match opts.parameter {
            Parameter::S => v,
            Parameter::Z => v * opts.reference,
            Parameter::Y => v / opts.reference,
        };
    }
    Ok(FrequencyPoint { frequency, matrix: m })
}

/// Writes one frequency point in RI form with shortest round-trip numbers. `Z` data is
/// normalized to `reference`, so `reference = 1` stores the matrix exactly.
pub fn write(matrix: &CMatrix, frequency: f64, parameter: Parameter, reference: f64, comments: &[String]) -> Result<String> {
    let n = matrix.nrows();
    let data = match parameter {
        Parameter::S => z_to_s(matrix, reference)?,
        Parameter::Z => matrix / Complex64::new(reference, 0.0),
        Parameter::Y => {
            return Err(SrisError::Usage("writing Y parameters is not supported".into()));
        }
    };
    let mut out = String::new();
    for c in comments {
        writeln!(out, "! {c}").unwrap();
    }
    let p = match parameter {
        Parameter::S => "S",
        Parameter::Z => "Z",
        Parameter::Y => "Y",
    };
    writeln!(out, "# Hz {p} RI R {reference:e}").unwrap();
    let entries: Vec<Complex64> = if n == 2 {
        vec![data[(0, 0)], data[(1, 0)], data[(0, 1)], data[(1, 1)]]
    } else {
        (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|rc| data[rc]).collect()
    };
    write!(out, "{frequency:e}").unwrap();
    for (k, v) in entries.iter().enumerate() {
        // at most four pairs per line, rows start on a fresh line
        if k > 0 && (k % 4 == 0 || (n > 2 && k % n == 0)) {
            out.push_str("\n ");
        }
        write!(out, " {:e} {:e}", v.re, v.im).unwrap();
    }
    out.push('\n');
    Ok(out)
}

/// Parses `tx=1,rx=102` (1-based port numbers). Remaining ports become surface elements
/// `0, 1, …` in port order.
pub fn parse_roles(spec: &str, ports: usize) -> Result<Vec<PortRole>> {
    let mut tx = None;
    let mut rx = None;
    for part in spec.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| SrisError::Usage(format!("role '{part}' is not key=port")))?;
        let port: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&p| p >= 1 && p <= ports)
            .ok_or_else(|| SrisError::Usage(format!("port '{value}' outside 1..={ports}")))?;
        match key.trim() {
            "tx" => tx = Some(port - 1),
            "rx" => rx = Some(port - 1),
            other => return Err(SrisError::Usage(format!("unknown role '{other}'"))),
        }
    }
    let (Some(tx), Some(rx)) = (tx, rx) else {
        return Err(SrisError::Usage("roles need both tx and rx".into()));
    };
    if tx == rx {
        return Err(SrisError::Usage("tx and rx must be different ports".into()));
    }
    let mut next = 0;
    Ok((0..ports)
        .map(|p| {
            if p == tx {
                PortRole::Transmitter
            } else if p == rx {
                PortRole::Receiver
            } else {
                next += 1;
                PortRole::Surface(next - 1)
            }
        })
        .collect())
}
