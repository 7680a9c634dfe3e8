//! Flat `key = value` scenario files and the value syntaxes shared with
//! the command line.

use crate::error::CliError;
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Ordered key/value pairs; later entries override earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    /// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::scenario(format!("line {}: expected key = value, got {raw:?}", n + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(CliError::scenario(format!("line {}: empty key", n + 1)));
            }
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn number(s: &str, what: &str) -> Result<f64, CliError> {
    let v: f64 = s.trim().parse().map_err(|_| CliError::scenario(format!("{what}: not a number: {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::scenario(format!("{what}: must be finite, got {s:?}")))
    }
}

/// `hz:<ν>` or `rad_s:<ω>`, returned in rad/s.
pub fn parse_frequency(s: &str) -> Result<f64, CliError> {
    let s = s.trim();
    if let Some(v) = s.strip_prefix("hz:") {
        Ok(TAU * number(v, "frequency")?)
    } else if let Some(v) = s.strip_prefix("rad_s:") {
        number(v, "frequency")
    } else {
        Err(CliError::scenario(format!("frequency {s:?} needs a unit prefix, hz: or rad_s:")))
    }
}

/// `deg:<a>` or `rad:<a>`, returned in radians.
pub fn parse_angle(s: &str) -> Result<f64, CliError> {
    let s = s.trim();
    if let Some(v) = s.strip_prefix("deg:") {
        Ok(number(v, "angle")?.to_radians())
    } else if let Some(v) = s.strip_prefix("rad:") {
        number(v, "angle")
    } else {
        Err(CliError::scenario(format!("angle {s:?} needs a unit prefix, deg: or rad:")))
    }
}

/// Plain seconds.
pub fn parse_seconds(s: &str) -> Result<f64, CliError> {
    let v = number(s, "time")?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::scenario(format!("time must be positive, got {s:?}")))
    }
}

pub fn parse_count(s: &str, what: &str) -> Result<usize, CliError> {
    s.trim().parse().map_err(|_| CliError::scenario(format!("{what}: not a non-negative integer: {s:?}")))
}

pub fn parse_bool(s: &str) -> Result<bool, CliError> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(CliError::scenario(format!("not a boolean: {other:?}"))),
    }
}

/// Fidelity targets as `lo:hi:count` (inclusive, evenly spaced), a comma
/// list, or empty. Values must lie in `[0, 1]` and be strictly monotone.
pub fn parse_fidelity_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let s = s.trim();
    let grid = if s.is_empty() {
        Vec::new()
    } else if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, count] = parts[..] else {
            return Err(CliError::scenario(format!("fidelity grid {s:?}: expected lo:hi:count")));
        };
        let (lo, hi) = (number(lo, "fidelity grid")?, number(hi, "fidelity grid")?);
        let count = parse_count(count, "fidelity grid count")?;
        match count {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..count)
                .map(|k| if k + 1 == count { hi } else { lo + (hi - lo) * k as f64 / (count - 1) as f64 })
                .collect(),
        }
    } else {
        s.split(',').map(|v| number(v, "fidelity grid")).collect::<Result<_, _>>()?
    };
    check_fidelity_grid(&grid)?;
    Ok(grid)
}

pub fn check_fidelity_grid(grid: &[f64]) -> Result<(), CliError> {
    if let Some(f) = grid.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(CliError::scenario(format!("fidelity {f} outside [0, 1]")));
    }
    let increasing = grid.windows(2).all(|w| w[0] < w[1]);
    let decreasing = grid.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(CliError::scenario("fidelity grid must be strictly monotone"));
    }
    Ok(())
}

/// `matrix:<row>;<row>;…` with comma-separated complex entries such as
/// `1`, `-0.5i` or `2+3i`, in rad/s.
pub fn parse_matrix(s: &str) -> Result<(usize, Vec<Complex64>), CliError> {
    let body = s
        .trim()
        .strip_prefix("matrix:")
        .ok_or_else(|| CliError::scenario(format!("{s:?} is not a matrix: spec")))?;
    let rows: Vec<Vec<Complex64>> = body
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|e| {
                    e.trim().parse::<Complex64>().map_err(|_| CliError::scenario(format!("bad matrix entry {e:?}")))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let dim = rows.len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(CliError::scenario(format!("matrix {s:?} is not square")));
    }
    Ok((dim, rows.into_iter().flatten().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_values_with_comments() {
        let c = ConfigFile::parse("# header\nomega0 = hz:10 # inline\n\nhorizon=1e-3\nomega0 = rad_s:4\n").unwrap();
        assert_eq!(c.entries.len(), 3);
        assert_eq!(c.get("omega0"), Some("rad_s:4"));
        assert_eq!(c.get("horizon"), Some("1e-3"));
        assert!(ConfigFile::parse("no equals sign").is_err());
        assert!(ConfigFile::parse(" = 3").is_err());
    }

    #[test]
    fn units() {
        assert!((parse_frequency("hz:1").unwrap() - TAU).abs() < 1e-15);
        assert_eq!(parse_frequency("rad_s:2.5").unwrap(), 2.5);
        assert!(parse_frequency("2.5").is_err());
        assert!(parse_frequency("hz:nan").is_err());
        assert!((parse_angle("deg:180").unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(parse_angle("rad:0.5").unwrap(), 0.5);
        assert!(parse_angle("30").is_err());
        assert!(parse_seconds("-1").is_err());
    }

    #[test]
    fn fidelity_grids() {
        let g = parse_fidelity_grid("0.05:0.95:19").unwrap();
        assert_eq!(g.len(), 19);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[18], 0.95);
        assert!((g[9] - 0.5).abs() < 1e-15);
        assert_eq!(parse_fidelity_grid("0.9,0.5,0.1").unwrap(), vec![0.9, 0.5, 0.1]);
        assert!(parse_fidelity_grid("").unwrap().is_empty());
        assert!(parse_fidelity_grid("0:1:0").unwrap().is_empty());
        assert!(parse_fidelity_grid("0.1,0.5,0.3").is_err());
        assert!(parse_fidelity_grid("0.5,1.2").is_err());
        assert!(parse_fidelity_grid("0.5,0.5").is_err());
        assert!(parse_fidelity_grid("0:1").is_err());
    }

    #[test]
    fn matrices() {
        let (dim, m) = parse_matrix("matrix:1, 1-2i; 1+2i, -1").unwrap();
        assert_eq!(dim, 2);
        assert_eq!(m[1], Complex64::new(1.0, -2.0));
        assert_eq!(m[3], Complex64::new(-1.0, 0.0));
        assert!(parse_matrix("matrix:1,2;3").is_err());
        assert!(parse_matrix("1,2;3,4").is_err());
        assert!(parse_matrix("matrix:1,x;3,4").is_err());
    }
}
