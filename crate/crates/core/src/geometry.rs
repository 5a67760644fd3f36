//! 2D cross-section scenes: vial circles inside a square chamber, plus
//! optional opaque full-height occluders such as a tray frame.
//!
//! The chamber is centred on the origin and spans `[-side/2, side/2]²`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack for containment and overlap predicates (m).
pub const GEOM_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("array extent {extent} m does not fit in a chamber of side {side} m")]
    LayoutTooLarge { extent: f64, side: f64 },
    #[error("vials {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("vial {0} lies outside the chamber")]
    OutsideChamber(usize),
    #[error("occluder {occluder} conflicts with {what}")]
    GeometryConflict { occluder: usize, what: String },
    #[error("invalid geometry: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arrangement {
    Rectangular,
    Hexagonal,
    Custom,
}

/// Reporting category of a vial within its array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VialLabel {
    Corner,
    Edge,
    Inner,
}

impl std::fmt::Display for VialLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VialLabel::Corner => "corner",
            VialLabel::Edge => "edge",
            VialLabel::Inner => "inner",
        })
    }
}

/// Vial centres of one array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub centers: Vec<Point>,
    /// Vial diameter (m).
    pub diameter: f64,
    /// Gap between adjacent vial surfaces (m).
    pub gap: f64,
    pub arrangement: Arrangement,
    /// `(row, col)` of each vial for structured arrays; empty for custom.
    pub grid: Vec<(usize, usize)>,
    pub rows: usize,
    pub cols: usize,
}

impl Layout {
    /// `nx` columns by `ny` rows on a square grid of pitch `d + c`, centred
    /// on the origin. Vial `row * nx + col` sits at column `col` from the
    /// left and row `row` from the bottom.
    pub fn rectangular(
        nx: usize,
        ny: usize,
        diameter: f64,
        gap: f64,
        chamber_side: f64,
    ) -> Result<Self, GeometryError> {
        check_array_args(nx, ny, diameter, gap)?;
        let pitch = diameter + gap;
        let extent = (nx.max(ny) - 1) as f64 * pitch + diameter;
        if extent >= chamber_side {
            return Err(GeometryError::LayoutTooLarge {
                extent,
                side: chamber_side,
            });
        }
        let x0 = -0.5 * (nx - 1) as f64 * pitch;
        let y0 = -0.5 * (ny - 1) as f64 * pitch;
        let mut centers = Vec::with_capacity(nx * ny);
        let mut grid = Vec::with_capacity(nx * ny);
        for row in 0..ny {
            for col in 0..nx {
                centers.push(Point::new(x0 + col as f64 * pitch, y0 + row as f64 * pitch));
                grid.push((row, col));
            }
        }
        Ok(Self {
            centers,
            diameter,
            gap,
            arrangement: Arrangement::Rectangular,
            grid,
            rows: ny,
            cols: nx,
        })
    }

    /// Offset-row close packing: odd rows shift right by half a pitch and
    /// rows are `pitch·√3/2` apart, so nearest neighbours sit `d + c` apart.
    pub fn hexagonal(
        rows: usize,
        cols: usize,
        diameter: f64,
        gap: f64,
        chamber_side: f64,
    ) -> Result<Self, GeometryError> {
        check_array_args(cols, rows, diameter, gap)?;
        let pitch = diameter + gap;
        let row_step = if rows > 1 { pitch * 3f64.sqrt() / 2.0 } else { 0.0 };
        let shift = if rows > 1 { 0.5 * pitch } else { 0.0 };
        let width = (cols - 1) as f64 * pitch + shift + diameter;
        let height = (rows - 1) as f64 * row_step + diameter;
        let extent = width.max(height);
        if extent >= chamber_side {
            return Err(GeometryError::LayoutTooLarge {
                extent,
                side: chamber_side,
            });
        }
        let mut centers = Vec::with_capacity(rows * cols);
        let mut grid = Vec::with_capacity(rows * cols);
        for row in 0..rows {
            let offset = if row % 2 == 1 { shift } else { 0.0 };
            for col in 0..cols {
                centers.push(Point::new(col as f64 * pitch + offset, row as f64 * row_step));
                grid.push((row, col));
            }
        }
        recenter(&mut centers);
        Ok(Self {
            centers,
            diameter,
            gap,
            arrangement: Arrangement::Hexagonal,
            grid,
            rows,
            cols,
        })
    }

    /// Arbitrary centres; validity is checked when placed in a [`Scene`].
    pub fn custom(centers: Vec<Point>, diameter: f64) -> Self {
        Self {
            centers,
            diameter,
            gap: 0.0,
            arrangement: Arrangement::Custom,
            grid: Vec::new(),
            rows: 0,
            cols: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.diameter
    }

    /// `(row, col)` of vial `i`, or `(0, i)` for custom layouts.
    pub fn position(&self, i: usize) -> (usize, usize) {
        self.grid.get(i).copied().unwrap_or((0, i))
    }

    /// Index of the vial at `(row, col)` for structured layouts.
    pub fn index_of(&self, row: usize, col: usize) -> Option<usize> {
        (self.arrangement != Arrangement::Custom && row < self.rows && col < self.cols)
            .then(|| row * self.cols + col)
    }

    /// Smallest centre-to-centre distance, or infinity for fewer than two
    /// vials.
    pub fn min_center_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.centers.iter().enumerate() {
            for b in &self.centers[i + 1..] {
                best = best.min(a.dist(*b));
            }
        }
        best
    }

    /// Permutations of the vial indices induced by the isometries that map
    /// the set of centres onto itself: mirrors about both axes, the 180°
    /// rotation, and for square arrays the diagonal mirrors and quarter
    /// turns. The identity comes first.
    pub fn symmetry_permutations(&self) -> Vec<Vec<usize>> {
        self.symmetries().into_iter().map(|(_, p)| p).collect()
    }

    /// Isometries (as functions of the offset from the centroid) paired with
    /// the vial permutations they induce.
    fn symmetries(&self) -> Vec<(Isometry, Vec<usize>)> {
        let c = centroid(&self.centers);
        let tol = 1e-9 * self.diameter.max(1e-3);
        let mut out: Vec<(Isometry, Vec<usize>)> = Vec::new();
        'maps: for map in ISOMETRIES {
            let mut perm = Vec::with_capacity(self.len());
            for p in &self.centers {
                let target = apply_about(map, c, *p);
                match self.centers.iter().position(|q| q.dist(target) <= tol) {
                    Some(j) => perm.push(j),
                    None => continue 'maps,
                }
            }
            if !out.iter().any(|(_, q)| *q == perm) {
                out.push((map, perm));
            }
        }
        out
    }
}

type Isometry = fn(f64, f64) -> (f64, f64);

const ISOMETRIES: [Isometry; 8] = [
    |x, y| (x, y),
    |x, y| (-x, y),
    |x, y| (x, -y),
    |x, y| (-x, -y),
    |x, y| (y, x),
    |x, y| (-y, -x),
    |x, y| (-y, x),
    |x, y| (y, -x),
];

fn apply_about(map: Isometry, c: Point, p: Point) -> Point {
    let (x, y) = map(p.x - c.x, p.y - c.y);
    Point::new(x + c.x, y + c.y)
}

fn check_array_args(nx: usize, ny: usize, d: f64, c: f64) -> Result<(), GeometryError> {
    if nx == 0 || ny == 0 {
        return Err(GeometryError::Invalid("array needs at least one row and column".into()));
    }
    if !(d > 0.0) || !(c >= 0.0) {
        return Err(GeometryError::Invalid(format!(
            "diameter must be positive and gap non-negative (d = {d}, c = {c})"
        )));
    }
    Ok(())
}

fn centroid(points: &[Point]) -> Point {
    let n = points.len().max(1) as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point::new(sx / n, sy / n)
}

fn recenter(points: &mut [Point]) {
    let c = centroid(points);
    for p in points.iter_mut() {
        p.x -= c.x;
        p.y -= c.y;
    }
}

/// Rectangular/hexagonal labelling result.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub labels: Vec<VialLabel>,
    /// Set when the layout has no row/column structure and every vial was
    /// labelled inner by default.
    pub unstructured: bool,
}

impl Classification {
    pub fn count(&self, label: VialLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Corner = first/last row and first/last column; edge = other boundary
/// vials; inner = the rest.
pub fn classify_vials(layout: &Layout) -> Classification {
    if layout.arrangement == Arrangement::Custom {
        return Classification {
            labels: vec![VialLabel::Inner; layout.len()],
            unstructured: true,
        };
    }
    let labels = layout
        .grid
        .iter()
        .map(|&(row, col)| {
            let row_end = row == 0 || row + 1 == layout.rows;
            let col_end = col == 0 || col + 1 == layout.cols;
            match (row_end, col_end) {
                (true, true) => VialLabel::Corner,
                (true, false) | (false, true) => VialLabel::Edge,
                (false, false) => VialLabel::Inner,
            }
        })
        .collect();
    Classification {
        labels,
        unstructured: false,
    }
}

/// Square chamber cross-section with a single isothermal wall surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chamber {
    /// Side of the square cross-section (m).
    pub side: f64,
    /// Wall area used in the radiation resistances (m²).
    pub wall_area: f64,
    pub wall_emissivity: f64,
    /// Wall temperature (K).
    pub wall_temperature: f64,
}

impl Default for Chamber {
    /// 30 cm cube: six faces of 0.09 m².
    fn default() -> Self {
        Self {
            side: 0.30,
            wall_area: 0.54,
            wall_emissivity: 0.3,
            wall_temperature: 293.15,
        }
    }
}

impl Chamber {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.side > 0.0 && self.wall_area > 0.0 && self.wall_temperature > 0.0) {
            return Err(GeometryError::Invalid(
                "chamber side, wall area and temperature must be positive".into(),
            ));
        }
        if !(self.wall_emissivity > 0.0 && self.wall_emissivity <= 1.0) {
            return Err(GeometryError::Invalid(format!(
                "wall emissivity {} outside (0, 1]",
                self.wall_emissivity
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: Point, margin: f64) -> bool {
        let h = 0.5 * self.side - margin + GEOM_EPS;
        p.x.abs() <= h && p.y.abs() <= h
    }
}

/// Thermal behaviour of an occluder face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccluderTemperature {
    /// Held at a fixed temperature (K).
    Fixed(f64),
    /// No net exchange; temperature floats to re-radiate what arrives.
    Reradiating,
}

/// Opaque full-height obstruction described by a polyline. Each occluder
/// contributes two radiating faces: the side to the left of the direction
/// of travel (`a`) and the side to the right (`b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub vertices: Vec<Point>,
    /// Joins the last vertex back to the first.
    pub closed: bool,
    pub emissivity: f64,
    pub temperature: OccluderTemperature,
    /// Physical height of the obstruction (m). Must cover the product.
    pub height: f64,
}

impl Occluder {
    /// Rectangular frame around the array, `margin` beyond the outermost
    /// vial surfaces, traversed counter-clockwise so face `a` looks inward.
    pub fn tray_frame(
        layout: &Layout,
        margin: f64,
        emissivity: f64,
        temperature: OccluderTemperature,
        height: f64,
    ) -> Self {
        let r = layout.radius();
        let (mut x0, mut y0, mut x1, mut y1) = (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        );
        for p in &layout.centers {
            x0 = x0.min(p.x - r);
            y0 = y0.min(p.y - r);
            x1 = x1.max(p.x + r);
            y1 = y1.max(p.y + r);
        }
        let (x0, y0, x1, y1) = (x0 - margin, y0 - margin, x1 + margin, y1 + margin);
        Self {
            vertices: vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
            closed: true,
            emissivity,
            temperature,
            height,
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        let count = if self.closed && n > 2 { n } else { n.saturating_sub(1) };
        (0..count).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| a.dist(b)).sum()
    }

    /// Area of one face (m²) for a given radiating height.
    pub fn face_area(&self, height: f64) -> f64 {
        self.length() * height
    }
}

/// Distance from `p` to segment `ab`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

/// A validated cross-section: vials, chamber and occluders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub layout: Layout,
    pub chamber: Chamber,
    pub occluders: Vec<Occluder>,
    /// Radiating lateral area of one vial (m²).
    pub vial_area: f64,
}

impl Scene {
    pub fn new(layout: Layout, chamber: Chamber, vial_area: f64) -> Result<Self, GeometryError> {
        chamber.validate()?;
        if !(vial_area > 0.0) {
            return Err(GeometryError::Invalid("vial area must be positive".into()));
        }
        let r = layout.radius();
        for (i, p) in layout.centers.iter().enumerate() {
            if !chamber.contains(*p, r) {
                return Err(GeometryError::OutsideChamber(i));
            }
        }
        for i in 0..layout.len() {
            for j in i + 1..layout.len() {
                if layout.centers[i].dist(layout.centers[j]) < layout.diameter - GEOM_EPS {
                    return Err(GeometryError::Overlap(i, j));
                }
            }
        }
        Ok(Self {
            layout,
            chamber,
            occluders: Vec::new(),
            vial_area,
        })
    }

    /// Adds an occluder after checking it clears every vial and stays
    /// inside the chamber.
    pub fn add_occluder(mut self, occluder: Occluder) -> Result<Self, GeometryError> {
        let index = self.occluders.len();
        if occluder.vertices.len() < 2 {
            return Err(GeometryError::GeometryConflict {
                occluder: index,
                what: "fewer than two vertices".into(),
            });
        }
        if !(occluder.emissivity > 0.0 && occluder.emissivity <= 1.0 && occluder.height > 0.0) {
            return Err(GeometryError::GeometryConflict {
                occluder: index,
                what: "emissivity outside (0, 1] or non-positive height".into(),
            });
        }
        for v in &occluder.vertices {
            if !self.chamber.contains(*v, 0.0) {
                return Err(GeometryError::GeometryConflict {
                    occluder: index,
                    what: "the chamber wall (vertex outside)".into(),
                });
            }
        }
        let r = self.layout.radius();
        for (i, c) in self.layout.centers.iter().enumerate() {
            for (a, b) in occluder.segments() {
                if point_segment_distance(*c, a, b) < r - GEOM_EPS {
                    return Err(GeometryError::GeometryConflict {
                        occluder: index,
                        what: format!("vial {i}"),
                    });
                }
            }
        }
        self.occluders.push(occluder);
        Ok(self)
    }

    pub fn vial_count(&self) -> usize {
        self.layout.len()
    }

    /// Total surfaces in the radiation roster: vials, two faces per
    /// occluder, then the wall.
    pub fn surface_count(&self) -> usize {
        self.layout.len() + 2 * self.occluders.len() + 1
    }

    pub fn wall_index(&self) -> usize {
        self.surface_count() - 1
    }

    /// Roster index of face `a` (side = 0) or `b` (side = 1) of an occluder.
    pub fn occluder_face_index(&self, occluder: usize, side: usize) -> usize {
        self.layout.len() + 2 * occluder + side
    }

    /// Layout symmetries that also map every occluder onto itself, as
    /// permutations of the full surface roster. Only closed occluders are
    /// considered invariant candidates; an open polyline disables symmetry.
    pub fn symmetry_permutations(&self) -> Vec<Vec<usize>> {
        let c = centroid(&self.layout.centers);
        let tol = 1e-9 * self.layout.diameter.max(1e-3);
        let k = self.surface_count();
        self.layout
            .symmetries()
            .into_iter()
            .filter(|(map, _)| {
                self.occluders.iter().all(|occ| {
                    occ.closed
                        && occ.vertices.iter().all(|v| {
                            let t = apply_about(*map, c, *v);
                            occ.vertices.iter().any(|w| w.dist(t) <= tol)
                        })
                })
            })
            .map(|(_, mut perm)| {
                perm.extend(self.vial_count()..k);
                perm
            })
            .collect()
    }

    /// Stable identifiers in roster order.
    pub fn surface_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = (0..self.layout.len()).map(|i| format!("vial_{i}")).collect();
        for k in 0..self.occluders.len() {
            ids.push(format!("occluder_{k}_a"));
            ids.push(format!("occluder_{k}_b"));
        }
        ids.push("wall".into());
        ids
    }

    /// Height that turns a vial's cross-section perimeter into its area.
    /// Occluder faces use it too, so areas stay proportional to lengths in
    /// the cross-section and reciprocity holds for 2D view factors.
    pub fn radiating_height(&self) -> f64 {
        self.vial_area / (std::f64::consts::PI * self.layout.diameter)
    }

    /// Areas in roster order (m²).
    pub fn surface_areas(&self) -> Vec<f64> {
        let mut areas = vec![self.vial_area; self.layout.len()];
        let h = self.radiating_height();
        for o in &self.occluders {
            let a = o.face_area(h);
            areas.push(a);
            areas.push(a);
        }
        areas.push(self.chamber.wall_area);
        areas
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SIDE: f64 = 0.30;

    #[test]
    fn single_vial_is_centred() {
        let l = Layout::rectangular(1, 1, 0.01, 0.005, SIDE).unwrap();
        assert_eq!(l.centers, vec![Point::new(0.0, 0.0)]);
        let c = classify_vials(&l);
        assert_eq!(c.labels, vec![VialLabel::Corner]);
    }

    #[test]
    fn pitch_is_diameter_plus_gap() {
        let l = Layout::rectangular(2, 1, 0.01, 0.005, SIDE).unwrap();
        assert!((l.centers[0].dist(l.centers[1]) - 0.015).abs() < 1e-15);
    }

    #[test]
    fn ten_by_ten_extent_and_classes() {
        let l = Layout::rectangular(10, 10, 0.01, 0.005, SIDE).unwrap();
        assert_eq!(l.len(), 100);
        let xs: Vec<f64> = l.centers.iter().map(|p| p.x).collect();
        let extent = xs.iter().cloned().fold(f64::MIN, f64::max)
            - xs.iter().cloned().fold(f64::MAX, f64::min)
            + 0.01;
        assert!((extent - 0.145).abs() < 1e-12);
        let c = classify_vials(&l);
        assert_eq!(c.count(VialLabel::Corner), 4);
        assert_eq!(c.count(VialLabel::Edge), 32);
        assert_eq!(c.count(VialLabel::Inner), 64);
    }

    #[test]
    fn two_by_two_is_all_corners() {
        let l = Layout::rectangular(2, 2, 0.01, 0.005, SIDE).unwrap();
        let c = classify_vials(&l);
        assert_eq!(c.count(VialLabel::Corner), 4);
        assert_eq!(c.count(VialLabel::Edge), 0);
    }

    #[test]
    fn oversized_array_is_rejected() {
        let err = Layout::rectangular(30, 30, 0.01, 0.0, SIDE).unwrap_err();
        assert!(matches!(err, GeometryError::LayoutTooLarge { .. }));
    }

    #[test]
    fn hexagonal_neighbours_sit_one_pitch_apart() {
        let l = Layout::hexagonal(10, 10, 0.01, 0.0, SIDE).unwrap();
        assert!((l.min_center_distance() - 0.01).abs() < 1e-12);
        let l = Layout::hexagonal(4, 5, 0.01, 0.003, SIDE).unwrap();
        assert!((l.min_center_distance() - 0.013).abs() < 1e-12);
    }

    #[test]
    fn single_hexagonal_row_is_a_rectangular_row() {
        let h = Layout::hexagonal(1, 6, 0.01, 0.005, SIDE).unwrap();
        let r = Layout::rectangular(6, 1, 0.01, 0.005, SIDE).unwrap();
        for (a, b) in h.centers.iter().zip(&r.centers) {
            assert!(a.dist(*b) < 1e-12);
        }
    }

    #[test]
    fn custom_layout_classifies_as_unstructured() {
        let l = Layout::custom(vec![Point::new(0.0, 0.0), Point::new(0.03, 0.0)], 0.01);
        let c = classify_vials(&l);
        assert!(c.unstructured);
        assert_eq!(c.count(VialLabel::Inner), 2);
    }

    #[test]
    fn overlapping_custom_vials_are_rejected() {
        let l = Layout::custom(vec![Point::new(0.0, 0.0), Point::new(0.009, 0.0)], 0.01);
        assert_eq!(
            Scene::new(l, Chamber::default(), 1e-3).unwrap_err(),
            GeometryError::Overlap(0, 1)
        );
    }

    #[test]
    fn occluder_through_a_vial_conflicts() {
        let l = Layout::rectangular(2, 2, 0.01, 0.005, SIDE).unwrap();
        let scene = Scene::new(l, Chamber::default(), 1.3e-3).unwrap();
        let bad = Occluder {
            vertices: vec![Point::new(-0.1, 0.0075), Point::new(0.1, 0.0075)],
            closed: false,
            emissivity: 0.3,
            temperature: OccluderTemperature::Reradiating,
            height: 0.042,
        };
        assert!(matches!(
            scene.add_occluder(bad),
            Err(GeometryError::GeometryConflict { .. })
        ));
    }

    #[test]
    fn tray_frame_clears_the_array() {
        let l = Layout::rectangular(10, 10, 0.01, 0.005, SIDE).unwrap();
        let frame = Occluder::tray_frame(&l, 0.005, 0.3, OccluderTemperature::Fixed(293.15), 0.042);
        assert!((frame.length() - 4.0 * 0.155).abs() < 1e-12);
        let scene = Scene::new(l, Chamber::default(), 1.3e-3)
            .unwrap()
            .add_occluder(frame)
            .unwrap();
        assert_eq!(scene.surface_count(), 103);
        assert_eq!(scene.surface_ids()[101], "occluder_0_b");
        let perms = scene.symmetry_permutations();
        assert_eq!(perms.len(), 8);
        assert!(perms.iter().all(|p| p[100..] == [100, 101, 102]));
    }

    #[test]
    fn open_occluder_breaks_symmetry() {
        let l = Layout::rectangular(4, 4, 0.01, 0.005, SIDE).unwrap();
        let wall = Occluder {
            vertices: vec![Point::new(-0.08, -0.1), Point::new(0.08, -0.1)],
            closed: false,
            emissivity: 0.3,
            temperature: OccluderTemperature::Reradiating,
            height: 0.042,
        };
        let scene = Scene::new(l, Chamber::default(), 1.3e-3)
            .unwrap()
            .add_occluder(wall)
            .unwrap();
        assert!(scene.symmetry_permutations().is_empty());
    }

    #[test]
    fn square_array_has_eight_symmetries() {
        let l = Layout::rectangular(5, 5, 0.01, 0.005, SIDE).unwrap();
        assert_eq!(l.symmetry_permutations().len(), 8);
        let l = Layout::rectangular(5, 3, 0.01, 0.005, SIDE).unwrap();
        assert_eq!(l.symmetry_permutations().len(), 4);
        // Even row count: only the half turn survives the row offset.
        let h = Layout::hexagonal(4, 4, 0.01, 0.0, SIDE).unwrap();
        assert_eq!(h.symmetry_permutations().len(), 2);
    }

    proptest! {
        #[test]
        fn rectangular_layouts_are_centred_and_symmetric(
            nx in 1usize..12, ny in 1usize..12, gap_mm in 0.0f64..5.0
        ) {
            let l = Layout::rectangular(nx, ny, 0.01, gap_mm * 1e-3, SIDE).unwrap();
            let c = centroid(&l.centers);
            prop_assert!(c.x.abs() < 1e-12 && c.y.abs() < 1e-12);
            // Distinct permutations only: a 1×n row has two, a lone vial one.
            let expected = match (nx > 1, ny > 1) {
                (true, true) => 4,
                (false, false) => 1,
                _ => 2,
            };
            prop_assert!(l.symmetry_permutations().len() >= expected);
            if nx * ny > 1 {
                let pitch = 0.01 + gap_mm * 1e-3;
                prop_assert!((l.min_center_distance() - pitch).abs() < 1e-12);
            }
        }
    }
}
