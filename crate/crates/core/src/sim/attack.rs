use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::{Class, LabeledDataset, Origin};
use super::geometry::ClassGeometry;
use crate::error::{Error, Result};
use crate::game::AttackPlan;

/// Default weight of the random tangential component relative to the unit
/// direction toward the opposite centroid.
pub const DEFAULT_SPREAD: f64 = 1.0;

fn unit(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Poison rows for `plan`, without the training data.
///
/// Point `k` (counted across all plan entries) is labeled `+1` when `k` is
/// even and `−1` otherwise. It sits on the sphere of radius
/// `radius_at(label, r)` around its label's centroid, in the direction of the
/// opposite centroid tilted by a random tangent scaled by `spread`.
pub fn craft_points(
    geom: &ClassGeometry,
    plan: &AttackPlan,
    seed: u64,
    spread: f64,
) -> Result<LabeledDataset> {
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::invalid(format!(
            "spread {spread} must be finite and non-negative"
        )));
    }
    let dim = geom.centroid(Class::Pos).len();
    let towards = |c: Class| -> Result<Vec<f64>> {
        let mut u: Vec<f64> = geom
            .centroid(c.opposite())
            .iter()
            .zip(geom.centroid(c))
            .map(|(a, b)| a - b)
            .collect();
        if unit(&mut u) == 0.0 {
            return Err(Error::invalid(
                "class centroids coincide; attack direction is undefined",
            ));
        }
        Ok(u)
    };
    let dirs = [towards(Class::Pos)?, towards(Class::Neg)?];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = LabeledDataset::empty(dim);
    let mut k = 0usize;
    let mut v = vec![0.0; dim];
    let mut row = vec![0.0; dim];
    for &(r, n) in plan.entries() {
        for _ in 0..n {
            let class = if k % 2 == 0 { Class::Pos } else { Class::Neg };
            k += 1;
            let u = &dirs[(class == Class::Neg) as usize];
            for x in v.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            let along: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, b)| *x -= along * b);
            if unit(&mut v) == 0.0 {
                v.iter_mut().for_each(|x| *x = 0.0);
            }
            v.iter_mut().zip(u).for_each(|(x, b)| *x = b + spread * *x);
            unit(&mut v);
            let radius = geom.radius_at(class, r)?;
            let c = geom.centroid(class);
            row.iter_mut()
                .zip(c.iter().zip(&v))
                .for_each(|(o, (ci, vi))| *o = ci + radius * vi);
            out.push(&row, class, Origin::Poison)?;
        }
    }
    Ok(out)
}

/// `train` followed by the crafted poison rows.
pub fn craft_attack(
    train: &LabeledDataset,
    geom: &ClassGeometry,
    plan: &AttackPlan,
    seed: u64,
    spread: f64,
) -> Result<LabeledDataset> {
    train.concat(&craft_points(geom, plan, seed, spread)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::geometry::{filter, GeometryMode};
    use rand::Rng;

    fn blobs(seed: u64, n: usize, dim: usize) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = LabeledDataset::empty(dim);
        for i in 0..n {
            let c = if i % 2 == 0 { Class::Pos } else { Class::Neg };
            let row: Vec<f64> = (0..dim)
                .map(|j| c.sign() * if j == 0 { 3.0 } else { 0.0 } + rng.random_range(-1.0..1.0))
                .collect();
            d.push(&row, c, Origin::Genuine).unwrap();
        }
        d
    }

    #[test]
    fn points_lie_on_the_requested_sphere() {
        let d = blobs(1, 200, 5);
        let g = ClassGeometry::fit(&d, GeometryMode::Clean).unwrap();
        let plan = AttackPlan::new(vec![(0.5, 10), (0.9, 7)]).unwrap();
        let p = craft_points(&g, &plan, 3, DEFAULT_SPREAD).unwrap();
        assert_eq!(p.len(), 17);
        for (i, row) in p.rows().enumerate() {
            let c = p.labels()[i];
            assert_eq!(c, if i % 2 == 0 { Class::Pos } else { Class::Neg });
            let r = if i < 10 { 0.5 } else { 0.9 };
            let want = g.radius_at(c, r).unwrap();
            assert!((g.distance(row, c) - want).abs() <= 1e-9 * want);
        }
        assert!(p.origin().iter().all(|&o| o == Origin::Poison));
    }

    #[test]
    fn points_lean_toward_the_other_class() {
        let d = blobs(2, 200, 4);
        let g = ClassGeometry::fit(&d, GeometryMode::Clean).unwrap();
        let p = craft_points(&g, &AttackPlan::single(0.8, 20).unwrap(), 0, DEFAULT_SPREAD).unwrap();
        for (i, row) in p.rows().enumerate() {
            let c = p.labels()[i];
            assert!(g.distance(row, c.opposite()) < euclidean_centroids(&g));
        }
        let tight = craft_points(&g, &AttackPlan::single(0.8, 20).unwrap(), 0, 0.0).unwrap();
        assert_eq!(tight.row(0), tight.row(2));
    }

    fn euclidean_centroids(g: &ClassGeometry) -> f64 {
        crate::sim::geometry::euclidean(g.centroid(Class::Pos), g.centroid(Class::Neg))
    }

    #[test]
    fn survival_matches_percentile_order() {
        let d = blobs(4, 300, 6);
        let g = ClassGeometry::fit(&d, GeometryMode::Clean).unwrap();
        let r = 0.5;
        let attacked = craft_attack(&d, &g, &AttackPlan::single(r, 30).unwrap(), 7, 1.0).unwrap();
        for theta in [0.3, 0.49, 0.5, 0.51, 0.8, 1.0] {
            let f = filter(&attacked, &g, theta).unwrap();
            let poison = f.origin().iter().filter(|&&o| o == Origin::Poison).count();
            assert_eq!(poison, if theta >= r { 30 } else { 0 }, "theta {theta}");
        }
    }

    #[test]
    fn deterministic_and_rejects_coincident_centroids() {
        let d = blobs(5, 100, 3);
        let g = ClassGeometry::fit(&d, GeometryMode::Clean).unwrap();
        let plan = AttackPlan::single(0.7, 9).unwrap();
        assert_eq!(
            craft_points(&g, &plan, 1, 1.0).unwrap(),
            craft_points(&g, &plan, 1, 1.0).unwrap()
        );
        assert_ne!(
            craft_points(&g, &plan, 1, 1.0).unwrap(),
            craft_points(&g, &plan, 2, 1.0).unwrap()
        );

        let mut same = LabeledDataset::empty(2);
        same.push(&[1.0, 1.0], Class::Pos, Origin::Genuine).unwrap();
        same.push(&[1.0, 1.0], Class::Neg, Origin::Genuine).unwrap();
        let g = ClassGeometry::fit(&same, GeometryMode::Clean).unwrap();
        assert!(craft_points(&g, &plan, 0, 1.0).is_err());
    }
}
