use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::preimage::random_preimage;
use super::MeasureError;
use crate::numeric::{batch_means, par_sum};
use crate::projspace::{line_distance, HomPoint, HomPolyMap};
use crate::{rng, C64};

pub const MIN_DEPTH: usize = 10;
pub const MIN_COUNT: usize = 1000;

/// Maximum fraction of walks allowed to hit a degenerate fiber.
const MAX_FAILED_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudMeta {
    pub map: String,
    pub depth: usize,
    pub count: usize,
    pub seed: u64,
    /// Walks discarded after hitting a degenerate fiber.
    pub dropped: usize,
}

/// Weighted point cloud approximating a probability measure on the plane.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloudMeasure {
    pub points: Vec<HomPoint>,
    pub weights: Vec<f64>,
    pub meta: CloudMeta,
}

impl PointCloudMeasure {
    /// Cloud with uniform weights.
    pub fn uniform(points: Vec<HomPoint>, meta: CloudMeta) -> Self {
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        Self {
            points,
            weights,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn labeled(mut self, map: &str) -> Self {
        self.meta.map = map.to_owned();
        self
    }

    /// CSV with columns `re0,im0,re1,im1,re2,im2,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "re0,im0,re1,im1,re2,im2,weight")?;
        for (p, w) in self.points.iter().zip(&self.weights) {
            let c = p.coords();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c[0].re, c[0].im, c[1].re, c[1].im, c[2].re, c[2].im, w
            )?;
        }
        Ok(())
    }

    pub fn meta_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("metadata serializes")
    }
}

/// Whether `[z:w]` is a superattracting fixed point of the base map.
fn superattracting_base(f: &HomPolyMap, b: [C64; 2]) -> bool {
    let base = f.base().expect("fibered");
    let img = base.eval(b[0], b[1]);
    if line_distance(img, b) > 1e-12 {
        return false;
    }
    // Multiplier in the affine chart of the larger coordinate.
    let (i, j) = if b[0].norm() >= b[1].norm() { (0, 1) } else { (1, 0) };
    let chart = |x: C64| {
        let mut v = [C64::new(0.0, 0.0); 2];
        v[i] = C64::new(1.0, 0.0);
        v[j] = x;
        let y = base.eval(v[0], v[1]);
        y[j] / y[i]
    };
    let x = b[j] / b[i];
    let h = 1e-6;
    let deriv = (chart(x + h) - chart(x - h)) / (2.0 * h);
    deriv.norm() < 1e-6
}

/// Endpoints of `count` independent uniformly random backward walks of
/// length `depth` started at `start`.
pub fn sample_equilibrium(
    f: &HomPolyMap,
    start: &HomPoint,
    depth: usize,
    count: usize,
    seed: u64,
) -> Result<PointCloudMeasure, MeasureError> {
    if !f.is_fibered() {
        return Err(MeasureError::NotFibered);
    }
    if depth < MIN_DEPTH {
        return Err(MeasureError::InvalidParameter(format!("depth {depth} < {MIN_DEPTH}")));
    }
    if count < MIN_COUNT {
        return Err(MeasureError::InvalidParameter(format!("count {count} < {MIN_COUNT}")));
    }
    let [a, b, _] = start.coords();
    if (a.norm() < 1e-300 && b.norm() < 1e-300) || superattracting_base(f, [a, b]) {
        return Err(MeasureError::ExceptionalStart { failed: count, count });
    }
    let walks: Vec<Result<Option<HomPoint>, MeasureError>> = (0..count)
        .into_par_iter()
        .map(|walk| {
            let mut x = *start;
            for step in 0..depth {
                let mut r = rng::stream(seed, walk as u64, step as u64);
                match random_preimage(f, &x, &mut r) {
                    Ok(p) => x = p.point,
                    Err(MeasureError::DegenerateFiber) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            Ok(Some(x))
        })
        .collect();
    let mut points = Vec::with_capacity(count);
    let mut failed = 0;
    for w in walks {
        match w? {
            Some(p) => points.push(p),
            None => failed += 1,
        }
    }
    if failed as f64 > MAX_FAILED_FRACTION * count as f64 {
        return Err(MeasureError::ExceptionalStart { failed, count });
    }
    Ok(PointCloudMeasure::uniform(
        points,
        CloudMeta {
            map: String::new(),
            depth,
            count,
            seed,
            dropped: failed,
        },
    ))
}

/// `Σ wᵢ φ(pᵢ)`, summed in a fixed order.
pub fn pair_cloud<F>(cloud: &PointCloudMeasure, phi: F) -> f64
where
    F: Fn(&HomPoint) -> f64 + Sync,
{
    par_sum(cloud.len(), |i| cloud.weights[i] * phi(&cloud.points[i]))
}

/// Weighted mean of `φ` together with its batch-means standard error.
pub fn pair_cloud_with_error<F>(cloud: &PointCloudMeasure, phi: F) -> (f64, f64)
where
    F: Fn(&HomPoint) -> f64 + Sync,
{
    let n = cloud.len() as f64;
    let values: Vec<f64> = cloud
        .points
        .par_iter()
        .zip(&cloud.weights)
        .map(|(p, w)| w * n * phi(p))
        .collect();
    batch_means(&values)
}
