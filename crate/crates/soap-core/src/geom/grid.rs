//! BEV hash-grid over a point cloud for repeated interior-count queries.

use std::collections::HashMap;

use super::{Box3d, Point, PointCloud};

/// Points bucketed by 2D cell so that box queries only touch nearby points.
/// Counting agrees with [`super::points_in_box`] per point.
pub struct PointGrid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<Point>>,
}

impl PointGrid {
    pub fn new(cloud: &PointCloud, cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let mut cells: HashMap<(i64, i64), Vec<Point>> = HashMap::new();
        for p in &cloud.points {
            let key = ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
            cells.entry(key).or_default().push(*p);
        }
        Self { cell, cells }
    }

    /// Number of points inside the box, boundary-inclusive.
    pub fn count_in_box(&self, b: &Box3d) -> usize {
        let r = b.size.x.hypot(b.size.y) / 2.0;
        let lo_x = ((b.center.x - r) / self.cell).floor() as i64;
        let hi_x = ((b.center.x + r) / self.cell).floor() as i64;
        let lo_y = ((b.center.y - r) / self.cell).floor() as i64;
        let hi_y = ((b.center.y + r) / self.cell).floor() as i64;
        let (s, c) = b.yaw.sin_cos();
        let (hw, hl, hh) = (b.size.x / 2.0, b.size.y / 2.0, b.size.z / 2.0);
        let mut count = 0;
        for kx in lo_x..=hi_x {
            for ky in lo_y..=hi_y {
                let Some(points) = self.cells.get(&(kx, ky)) else { continue };
                for p in points {
                    let dx = p.x - b.center.x;
                    let dy = p.y - b.center.y;
                    let dz = p.z - b.center.z;
                    let u = c * dx + s * dy;
                    let v = -s * dx + c * dy;
                    if u.abs() <= hw && v.abs() <= hl && dz.abs() <= hh {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::points_in_box;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};

    #[test]
    fn grid_count_matches_linear_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let cloud = PointCloud::new(
            (0..5000)
                .map(|_| {
                    Point::xyz(
                        rng.random_range(-40.0..40.0),
                        rng.random_range(-40.0..40.0),
                        rng.random_range(-1.0..3.0),
                    )
                })
                .collect(),
        );
        let grid = PointGrid::new(&cloud, 3.0);
        for _ in 0..50 {
            let b = Box3d::new(
                Vector3::new(rng.random_range(-35.0..35.0), rng.random_range(-35.0..35.0), 0.85),
                Vector3::new(1.9, 4.6, 1.7),
                rng.random_range(-3.0..3.0),
                None,
                1.0,
                "vehicle",
            )
            .unwrap();
            assert_eq!(grid.count_in_box(&b), points_in_box(&cloud, &b));
        }
    }
}
