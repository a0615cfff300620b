//! Grid specifications: `start:stop:step` (inclusive) or a comma list.
//!
//! Range values are snapped to the decimal precision written in the spec,
//! so `0.05:4:0.05` yields exactly `2.5` rather than `2.5000000000000004`.

use crate::error::{Error, Result};

/// Upper bound on the number of points a range may expand to.
pub const MAX_GRID_POINTS: usize = 1_000_000;

fn decimals(s: &str) -> usize {
    let mantissa = s.split(['e', 'E']).next().unwrap_or(s);
    mantissa.split_once('.').map_or(0, |(_, frac)| frac.len())
}

fn number(s: &str) -> Result<f64> {
    let s = s.trim();
    let v: f64 = s.parse().map_err(|_| Error::Parse(format!("invalid number `{s}`")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite grid value `{s}`")));
    }
    Ok(v)
}

pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(Error::Parse("empty grid".into()));
    }
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [_] => spec.split(',').map(number).collect(),
        [start, stop, step] => {
            let (a, b, h) = (number(start)?, number(stop)?, number(step)?);
            if !(h > 0.0) {
                return Err(Error::Parse(format!("grid step must be > 0, got {h}")));
            }
            if b < a {
                return Err(Error::Parse(format!("grid stop {b} is below start {a}")));
            }
            let span = (b - a) / h;
            let count = (span + 1e-9).floor() + 1.0;
            if !(count <= MAX_GRID_POINTS as f64) {
                return Err(Error::Parse(format!("grid has more than {MAX_GRID_POINTS} points")));
            }
            let places = decimals(start).max(decimals(stop)).max(decimals(step)).min(15) as i32;
            let scale = 10f64.powi(places);
            Ok((0..count as usize)
                .map(|i| {
                    let v = a + i as f64 * h;
                    let snapped = (v * scale).round() / scale;
                    if snapped.is_finite() {
                        snapped
                    } else {
                        v
                    }
                })
                .collect())
        }
        _ => Err(Error::Parse(format!("grid `{spec}` is neither a list nor start:stop:step"))),
    }
}

/// A comma list of non-negative integers, or an integer range `a:b:step`.
pub fn parse_int_list(spec: &str) -> Result<Vec<u64>> {
    let spec = spec.trim();
    let int = |s: &str| -> Result<u64> {
        s.trim().parse().map_err(|_| Error::Parse(format!("invalid integer `{}`", s.trim())))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [_] => spec.split(',').map(int).collect(),
        [a, b, h] => {
            let (a, b, h) = (int(a)?, int(b)?, int(h)?);
            if h == 0 || b < a {
                return Err(Error::Parse(format!("invalid integer range `{spec}`")));
            }
            if (b - a) / h >= MAX_GRID_POINTS as u64 {
                return Err(Error::Parse(format!("range has more than {MAX_GRID_POINTS} points")));
            }
            Ok((a..=b).step_by(h as usize).collect())
        }
        _ => Err(Error::Parse(format!("`{spec}` is neither a list nor start:stop:step"))),
    }
}
