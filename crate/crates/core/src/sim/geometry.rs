use serde::{Deserialize, Serialize};

use super::dataset::{Class, LabeledDataset, Origin};
use crate::curve::check_percentile;
use crate::error::{Error, Result};

/// Relative slack when comparing a distance against a filter radius, so a
/// point placed exactly on the sphere survives despite rounding.
pub const RADIUS_SLACK: f64 = 1e-9;

/// Which rows the defender uses to locate the class centroids.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryMode {
    /// Genuine rows only.
    #[default]
    Clean,
    /// Every row, poison included, as a defender without provenance would.
    Blind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassShape {
    pub centroid: Vec<f64>,
    /// Distances of the reference rows to `centroid`, ascending.
    pub distances: Vec<f64>,
}

impl ClassShape {
    fn radius_at(&self, p: f64) -> f64 {
        let d = &self.distances;
        let pos = p * (d.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(d.len() - 1);
        d[lo] + (pos - lo as f64) * (d[hi] - d[lo])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassGeometry {
    pos: ClassShape,
    neg: ClassShape,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    values.sort_by(f64::total_cmp);
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn shape(data: &LabeledDataset, class: Class, mode: GeometryMode) -> Result<ClassShape> {
    let rows: Vec<&[f64]> = data
        .rows()
        .zip(data.labels().iter().zip(data.origin()))
        .filter(|(_, (&c, &o))| c == class && (mode == GeometryMode::Blind || o == Origin::Genuine))
        .map(|(r, _)| r)
        .collect();
    if rows.is_empty() {
        return Err(Error::invalid(format!(
            "class {} has no rows to locate its centroid",
            class.name()
        )));
    }
    let mut column = vec![0.0; rows.len()];
    let centroid: Vec<f64> = (0..data.dim())
        .map(|j| {
            for (slot, r) in column.iter_mut().zip(&rows) {
                *slot = r[j];
            }
            median(&mut column)
        })
        .collect();
    let mut distances: Vec<f64> = rows.iter().map(|r| euclidean(r, &centroid)).collect();
    distances.sort_by(f64::total_cmp);
    Ok(ClassShape {
        centroid,
        distances,
    })
}

impl ClassGeometry {
    /// Coordinate-wise median centroid and sorted distances per class.
    pub fn fit(data: &LabeledDataset, mode: GeometryMode) -> Result<Self> {
        Ok(Self {
            pos: shape(data, Class::Pos, mode)?,
            neg: shape(data, Class::Neg, mode)?,
        })
    }

    pub fn class(&self, class: Class) -> &ClassShape {
        match class {
            Class::Pos => &self.pos,
            Class::Neg => &self.neg,
        }
    }

    pub fn centroid(&self, class: Class) -> &[f64] {
        &self.class(class).centroid
    }

    /// Linear-interpolated quantile of the class's distance list. Percentile
    /// 1 is the largest distance.
    pub fn radius_at(&self, class: Class, percentile: f64) -> Result<f64> {
        check_percentile(percentile, "radius percentile")?;
        Ok(self.class(class).radius_at(percentile))
    }

    pub fn distance(&self, row: &[f64], class: Class) -> f64 {
        euclidean(row, self.centroid(class))
    }
}

/// Keeps rows within the `theta`-quantile radius of their labeled class.
pub fn filter(data: &LabeledDataset, geom: &ClassGeometry, theta: f64) -> Result<LabeledDataset> {
    let limit = |c: Class| geom.radius_at(c, theta).map(|r| r * (1.0 + RADIUS_SLACK));
    let (lp, ln) = (limit(Class::Pos)?, limit(Class::Neg)?);
    let keep: Vec<usize> = (0..data.len())
        .filter(|&i| {
            let c = data.labels()[i];
            let lim = if c == Class::Pos { lp } else { ln };
            geom.distance(data.row(i), c) <= lim
        })
        .collect();
    let out = data.select(&keep);
    for c in Class::BOTH {
        if out.count(c, None) == 0 {
            return Err(Error::EmptyClass {
                theta,
                class: c.name(),
            });
        }
    }
    Ok(out)
}
