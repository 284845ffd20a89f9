//! Piecewise-linear payoff curves over percentile space.
//!
//! Both the per-point attack effect `E(p)` and the genuine-removal cost
//! `Γ(θ)` travel as [`PayoffCurve`]s. A curve is a list of knots with
//! strictly increasing percentiles in `[0, 1]`; evaluation interpolates
//! linearly between knots and clamps outside them.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn check_percentile(p: f64, what: &str) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{what} {p} is not a percentile in [0, 1]"
        )))
    }
}

/// `n` equally spaced percentiles covering `[0, 1]`, endpoints included.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffCurve {
    knots: Vec<(f64, f64)>,
}

impl PayoffCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::invalid("payoff curve needs at least one knot"));
        }
        for &(p, v) in &knots {
            check_percentile(p, "curve knot")?;
            if !v.is_finite() {
                return Err(Error::invalid(format!("curve value at {p} is not finite")));
            }
        }
        if let Some(w) = knots.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid(format!(
                "curve percentiles must be strictly increasing ({} then {})",
                w[0].0, w[1].0
            )));
        }
        Ok(Self { knots })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            knots: vec![(0.0, value), (1.0, value)],
        }
    }

    /// Tabulates `f` on `grid`.
    pub fn from_fn(grid: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid.iter().map(|&p| (p, f(p))).collect())
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn percentiles(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(|k| k.0)
    }

    /// Index of the segment `[k, k+1]` containing `p`, for `p` strictly
    /// inside the knot range. A knot belongs to the segment on its right.
    fn segment(&self, p: f64) -> usize {
        let idx = self.knots.partition_point(|k| k.0 <= p);
        idx.saturating_sub(1).min(self.knots.len() - 2)
    }

    pub fn eval(&self, p: f64) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if p <= first.0 {
            return first.1;
        }
        if p >= last.0 {
            return last.1;
        }
        let k = self.segment(p);
        let (p0, v0) = self.knots[k];
        let (p1, v1) = self.knots[k + 1];
        let t = (p - p0) / (p1 - p0);
        v0 + t * (v1 - v0)
    }

    /// Derivative of the interpolant. At a knot the right-hand slope is used;
    /// outside the knot range the curve is flat.
    pub fn slope(&self, p: f64) -> f64 {
        let first = self.knots[0].0;
        let last = self.knots[self.knots.len() - 1].0;
        if self.knots.len() < 2 || p < first || p >= last {
            return 0.0;
        }
        let k = self.segment(p);
        let (p0, v0) = self.knots[k];
        let (p1, v1) = self.knots[k + 1];
        (v1 - v0) / (p1 - p0)
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.knots.windows(2).all(|w| w[0].1 <= w[1].1)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.knots.windows(2).all(|w| w[0].1 >= w[1].1)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            knots: self.knots.iter().map(|&(p, v)| (p, v * factor)).collect(),
        }
    }

    /// Two-column CSV: a `percentile,value` header, then one knot per row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let to_err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["percentile", "value"]).map_err(to_err)?;
        for &(p, v) in &self.knots {
            w.write_record([p.to_string(), v.to_string()])
                .map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }

    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = r
            .headers()
            .map_err(|e| parse_err(origin, 1, e.to_string()))?;
        if headers.len() != 2 || &headers[0] != "percentile" || &headers[1] != "value" {
            return Err(parse_err(origin, 1, "expected header `percentile,value`"));
        }
        let mut knots = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec.map_err(|e| parse_err(origin, line, e.to_string()))?;
            if rec.len() != 2 {
                return Err(parse_err(origin, line, "expected two columns"));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| parse_err(origin, line, format!("`{s}` is not a number")))
            };
            knots.push((num(&rec[0])?, num(&rec[1])?));
        }
        Self::new(knots)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), path)
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}
