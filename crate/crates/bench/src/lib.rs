//! Fixtures shared by the benchmarks.

use p2dyn::measures::sample_equilibrium;
use p2dyn::{maps, HomPoint, HomPolyMap, PointCloudMeasure, C64};

/// Generic start off the exceptional sets of the bundled maps.
pub fn start() -> HomPoint {
    HomPoint::new(C64::new(0.37, -0.21), C64::new(-0.52, 0.64), C64::new(1.0, 0.0)).expect("valid point")
}

/// Degree-4 Lattès suspension with a small equilibrium cloud.
pub fn lattes_cloud(count: usize) -> (HomPolyMap, PointCloudMeasure) {
    let f = maps::lattes4_suspension();
    let cloud = sample_equilibrium(&f, &start(), 20, count, 1).expect("sampling succeeds");
    (f, cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_cloud_has_the_requested_size() {
        let (_, cloud) = lattes_cloud(1000);
        assert_eq!(cloud.len(), 1000);
    }
}
