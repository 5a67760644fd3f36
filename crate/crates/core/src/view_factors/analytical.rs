use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{ViewFactorError, ViewFactorMatrix};
use crate::geometry::Scene;

/// Shared geometric term `√(Y²−1) + asin(1/Y) − Y` with `Y = 1 + c/d`: the
/// fraction of a cylinder's view (times π) blocked by one parallel
/// neighbour of equal diameter.
fn neighbour_term(c: f64, d: f64) -> f64 {
    let y = 1.0 + c / d;
    (y * y - 1.0).sqrt() + (1.0 / y).asin() - y
}

/// View factor from either vial of an isolated pair to the surroundings.
pub fn two_vial_wall_view(c: f64, d: f64) -> f64 {
    1.0 - neighbour_term(c, d) / PI
}

/// View factor from the middle vial of three in a row to the surroundings.
pub fn middle_of_three_wall_view(c: f64, d: f64) -> f64 {
    1.0 - 2.0 * neighbour_term(c, d) / PI
}

/// Closed-form matrix for one, two or three equally spaced vials in a row
/// with no occluders. Wall row is left for completion.
pub fn analytical_matrix(scene: &Scene) -> Result<ViewFactorMatrix, ViewFactorError> {
    if !scene.occluders.is_empty() {
        return Err(ViewFactorError::Unsupported(
            "closed forms do not cover occluders".into(),
        ));
    }
    let layout = &scene.layout;
    let n = layout.len();
    let d = layout.diameter;
    let k = scene.surface_count();
    let w = scene.wall_index();
    let mut f = DMatrix::zeros(k, k);

    // Sort along the row so "middle" is well defined.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (layout.centers[a], layout.centers[b]);
        (pa.x, pa.y).partial_cmp(&(pb.x, pb.y)).unwrap()
    });

    let gap_between = |a: usize, b: usize| layout.centers[a].dist(layout.centers[b]) - d;
    match n {
        1 => f[(0, w)] = 1.0,
        2 => {
            let fw = two_vial_wall_view(gap_between(0, 1), d);
            f[(0, w)] = fw;
            f[(1, w)] = fw;
            f[(0, 1)] = 1.0 - fw;
            f[(1, 0)] = 1.0 - fw;
        }
        3 => {
            let (l, m, r) = (order[0], order[1], order[2]);
            let c = gap_between(l, m);
            let collinear = {
                let (a, b, e) = (layout.centers[l], layout.centers[m], layout.centers[r]);
                ((b.x - a.x) * (e.y - a.y) - (b.y - a.y) * (e.x - a.x)).abs() < 1e-12
            };
            if !collinear || (gap_between(m, r) - c).abs() > 1e-12 {
                return Err(ViewFactorError::Unsupported(
                    "three vials must be collinear and equally spaced".into(),
                ));
            }
            let outer = two_vial_wall_view(c, d);
            let middle = middle_of_three_wall_view(c, d);
            // The middle vial hides the outer pair from each other entirely.
            f[(l, w)] = outer;
            f[(r, w)] = outer;
            f[(l, m)] = 1.0 - outer;
            f[(r, m)] = 1.0 - outer;
            f[(m, w)] = middle;
            f[(m, l)] = 0.5 * (1.0 - middle);
            f[(m, r)] = 0.5 * (1.0 - middle);
        }
        _ => {
            return Err(ViewFactorError::Unsupported(format!(
                "closed forms cover 1 to 3 vials, scene has {n}"
            )))
        }
    }
    Ok(ViewFactorMatrix::new(scene.surface_ids(), scene.surface_areas(), f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tabulated_benchmarks() {
        assert_abs_diff_eq!(two_vial_wall_view(0.005, 0.01), 0.8893, epsilon = 5e-5);
        assert_abs_diff_eq!(middle_of_three_wall_view(0.005, 0.01), 0.7786, epsilon = 5e-5);
    }

    #[test]
    fn touching_pair() {
        // Y = 1: 1 − (π/2 − 1)/π.
        let expected = 1.0 - (PI / 2.0 - 1.0) / PI;
        assert_abs_diff_eq!(two_vial_wall_view(0.0, 0.01), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.8183, epsilon = 5e-5);
    }

    #[test]
    fn isolated_vials_see_only_the_wall() {
        assert_abs_diff_eq!(two_vial_wall_view(1e3, 0.01), 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(middle_of_three_wall_view(1e3, 0.01), 1.0, epsilon = 1e-5);
    }

    #[test]
    fn middle_blocks_twice_as_much() {
        for c in [0.0, 0.001, 0.005, 0.02] {
            let pair = two_vial_wall_view(c, 0.01);
            let mid = middle_of_three_wall_view(c, 0.01);
            assert_abs_diff_eq!(1.0 - mid, 2.0 * (1.0 - pair), epsilon = 1e-14);
        }
    }
}
