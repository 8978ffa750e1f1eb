//! Rotated-footprint intersection-over-union.
//!
//! The intersection of two yaw-rotated rectangles is computed by
//! Sutherland-Hodgman polygon clipping followed by the shoelace area formula.
//! Degenerate clips (area < [`DEGENERATE_AREA`]) count as empty.

use super::{Box3d, DEGENERATE_AREA};

/// BEV footprint corners in counter-clockwise order.
pub fn footprint_corners(b: &Box3d) -> [[f64; 2]; 4] {
    let (s, c) = b.yaw.sin_cos();
    let (hw, hl) = (b.size.x / 2.0, b.size.y / 2.0);
    let corner = |u: f64, v: f64| [b.center.x + c * u - s * v, b.center.y + s * u + c * v];
    [corner(hw, hl), corner(-hw, hl), corner(-hw, -hl), corner(hw, -hl)]
}

/// Signed polygon area via the shoelace formula (positive for CCW order).
fn shoelace(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % poly.len()];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

/// Footprint area of a box (w * l).
pub fn footprint_area(b: &Box3d) -> f64 {
    b.size.x * b.size.y
}

/// Clip `subject` by the half-plane on the left of the directed edge a->b.
fn clip_edge(subject: &[[f64; 2]], a: [f64; 2], b: [f64; 2], out: &mut Vec<[f64; 2]>) {
    out.clear();
    let inside = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0;
    let n = subject.len();
    for i in 0..n {
        let cur = subject[i];
        let prev = subject[(i + n - 1) % n];
        let cur_in = inside(cur);
        let prev_in = inside(prev);
        if cur_in != prev_in {
            // Edge crosses the clip line; emit the intersection point.
            let dx = cur[0] - prev[0];
            let dy = cur[1] - prev[1];
            let denom = (b[0] - a[0]) * dy - (b[1] - a[1]) * dx;
            if denom.abs() > 0.0 {
                let t = ((b[0] - a[0]) * (a[1] - prev[1]) - (b[1] - a[1]) * (a[0] - prev[0]))
                    / denom;
                out.push([prev[0] + t * dx, prev[1] + t * dy]);
            }
        }
        if cur_in {
            out.push(cur);
        }
    }
}

/// Area of intersection of two convex CCW polygons.
fn convex_intersection_area(subject: &[[f64; 2]; 4], clip: &[[f64; 2]; 4]) -> f64 {
    let mut poly: Vec<[f64; 2]> = subject.to_vec();
    let mut scratch: Vec<[f64; 2]> = Vec::with_capacity(8);
    for i in 0..4 {
        if poly.is_empty() {
            return 0.0;
        }
        clip_edge(&poly, clip[i], clip[(i + 1) % 4], &mut scratch);
        std::mem::swap(&mut poly, &mut scratch);
    }
    let area = shoelace(&poly);
    if area < DEGENERATE_AREA {
        0.0
    } else {
        area
    }
}

fn aabb_disjoint(a: &Box3d, b: &Box3d) -> bool {
    // Footprint circumradius bound: rectangles cannot overlap when centers are
    // farther apart than the sum of half-diagonals.
    let ra = a.size.x.hypot(a.size.y) / 2.0;
    let rb = b.size.x.hypot(b.size.y) / 2.0;
    let dx = a.center.x - b.center.x;
    let dy = a.center.y - b.center.y;
    dx * dx + dy * dy > (ra + rb) * (ra + rb)
}

/// BEV (footprint) intersection-over-union of two boxes. Symmetric, in [0, 1],
/// and 0 for disjoint footprints.
pub fn bev_iou(a: &Box3d, b: &Box3d) -> f64 {
    if aabb_disjoint(a, b) {
        return 0.0;
    }
    let inter = convex_intersection_area(&footprint_corners(a), &footprint_corners(b));
    if inter <= 0.0 {
        return 0.0;
    }
    let union = footprint_area(a) + footprint_area(b) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// 3D intersection-over-union: BEV intersection area times vertical overlap,
/// divided by the union of volumes.
pub fn iou_3d(a: &Box3d, b: &Box3d) -> f64 {
    let (alo, ahi) = a.z_range();
    let (blo, bhi) = b.z_range();
    let dz = ahi.min(bhi) - alo.max(blo);
    if dz <= 0.0 || aabb_disjoint(a, b) {
        return 0.0;
    }
    let inter_area = convex_intersection_area(&footprint_corners(a), &footprint_corners(b));
    let inter = inter_area * dz;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;
    use std::f64::consts::FRAC_PI_4;

    fn boxed(center: (f64, f64, f64), size: (f64, f64, f64), yaw: f64) -> Box3d {
        Box3d::new(
            Vector3::new(center.0, center.1, center.2),
            Vector3::new(size.0, size.1, size.2),
            yaw,
            None,
            1.0,
            "vehicle",
        )
        .unwrap()
    }

    #[test]
    fn identical_boxes_have_unit_iou() {
        let b = boxed((1.0, -2.0, 0.5), (1.8, 4.2, 1.6), 0.4);
        assert_abs_diff_eq!(bev_iou(&b, &b), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(iou_3d(&b, &b), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_footprints_have_zero_iou() {
        let a = boxed((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 0.0);
        let b = boxed((2.0, 0.0, 0.0), (1.0, 1.0, 1.0), 0.0);
        assert_eq!(bev_iou(&a, &b), 0.0);
        assert_eq!(iou_3d(&a, &b), 0.0);
    }

    #[test]
    fn axis_aligned_half_overlap_is_one_third() {
        // Analytic: intersection 0.5, union 1.5.
        let a = boxed((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 0.0);
        let b = boxed((0.5, 0.0, 0.0), (1.0, 1.0, 1.0), 0.0);
        assert_abs_diff_eq!(bev_iou(&a, &b), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn vertical_offset_is_one_third_in_3d() {
        // Same footprint, z extents [0,2] vs [1,3]: intersection A*1, union A*3.
        let a = boxed((0.0, 0.0, 1.0), (1.0, 1.0, 2.0), 0.0);
        let b = boxed((0.0, 0.0, 2.0), (1.0, 1.0, 2.0), 0.0);
        assert_abs_diff_eq!(iou_3d(&a, &b), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bev_iou(&a, &b), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_in_z_only_is_zero() {
        let a = boxed((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 0.0);
        let b = boxed((0.0, 0.0, 5.0), (1.0, 1.0, 1.0), 0.0);
        assert_eq!(iou_3d(&a, &b), 0.0);
    }

    #[test]
    fn rotated_square_overlap_matches_analytic_octagon() {
        // Unit square vs the same square rotated 45°: intersection is a regular
        // octagon with area 2*(sqrt(2)-1).
        let a = boxed((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 0.0);
        let b = boxed((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), FRAC_PI_4);
        let inter = 2.0 * (2.0f64.sqrt() - 1.0);
        let expected = inter / (2.0 - inter);
        assert_abs_diff_eq!(bev_iou(&a, &b), expected, epsilon = 1e-12);
    }

    #[test]
    fn iou_is_symmetric() {
        let a = boxed((0.3, 0.1, 0.0), (2.0, 4.5, 1.7), 0.7);
        let b = boxed((1.1, -0.4, 0.2), (1.9, 4.3, 1.5), -0.4);
        assert_abs_diff_eq!(bev_iou(&a, &b), bev_iou(&b, &a), epsilon = 1e-14);
        assert_abs_diff_eq!(iou_3d(&a, &b), iou_3d(&b, &a), epsilon = 1e-14);
    }

    #[test]
    fn contained_box_ratio() {
        let a = boxed((0.0, 0.0, 0.0), (2.0, 2.0, 2.0), 0.0);
        let b = boxed((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 0.3);
        assert_abs_diff_eq!(bev_iou(&a, &b), 1.0 / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(iou_3d(&a, &b), 1.0 / 8.0, epsilon = 1e-12);
    }
}
