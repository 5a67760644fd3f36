//! Monte Carlo view factors by 2D ray casting.
//!
//! Each emitting surface shoots `n_rays` rays from uniformly distributed
//! boundary points with diffuse directions (angle θ from the outward normal
//! drawn with density ∝ cos θ, i.e. θ = asin(2u − 1)). A ray counts toward
//! the first surface it meets. Vials are infinite cylinders in this
//! cross-section, occluders are segments with two faces and the chamber is
//! the enclosing square.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ViewFactorError, ViewFactorMatrix};
use crate::geometry::{Point, Scene};

/// Rays per work unit. Fixed so results do not depend on the worker count.
pub const CHUNK_RAYS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    /// Rays per emitting surface.
    pub n_rays: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_rays: 100_000,
            seed: 0x5EED_F00D,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Ray {
    origin: Point,
    dir: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: Point,
    b: Point,
    occluder: usize,
    /// Unit normal on face `a` (left of a→b).
    normal: (f64, f64),
}

/// Uniform grid over the chamber holding the circles that touch each cell.
struct CircleGrid {
    min: f64,
    cell: f64,
    dim: usize,
    cells: Vec<Vec<usize>>,
}

impl CircleGrid {
    fn new(scene: &Scene) -> Self {
        let side = scene.chamber.side;
        let min = -0.5 * side;
        let cell = scene.layout.diameter.max(side / 256.0);
        let dim = ((side / cell).ceil() as usize).max(1);
        let mut cells = vec![Vec::new(); dim * dim];
        let r = scene.layout.radius();
        let clamp = |v: f64| ((v - min) / cell).floor().clamp(0.0, (dim - 1) as f64) as usize;
        for (i, c) in scene.layout.centers.iter().enumerate() {
            for iy in clamp(c.y - r)..=clamp(c.y + r) {
                for ix in clamp(c.x - r)..=clamp(c.x + r) {
                    cells[iy * dim + ix].push(i);
                }
            }
        }
        Self {
            min,
            cell,
            dim,
            cells,
        }
    }
}

/// Ray caster for one scene.
pub struct Tracer<'a> {
    scene: &'a Scene,
    grid: CircleGrid,
    segments: Vec<Segment>,
    half: f64,
}

/// What a ray hit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hit {
    Vial(usize),
    /// Occluder index and face (0 = `a`, 1 = `b`).
    Occluder(usize, usize),
    Wall,
}

impl<'a> Tracer<'a> {
    pub fn new(scene: &'a Scene) -> Self {
        let mut segments = Vec::new();
        for (k, occ) in scene.occluders.iter().enumerate() {
            for (a, b) in occ.segments() {
                let (dx, dy) = (b.x - a.x, b.y - a.y);
                let len = dx.hypot(dy);
                if len > 0.0 {
                    segments.push(Segment {
                        a,
                        b,
                        occluder: k,
                        normal: (-dy / len, dx / len),
                    });
                }
            }
        }
        Self {
            scene,
            grid: CircleGrid::new(scene),
            segments,
            half: 0.5 * scene.chamber.side,
        }
    }

    fn circle_hit(&self, ray: &Ray, i: usize, skip: Option<usize>) -> Option<f64> {
        if skip == Some(i) {
            return None;
        }
        let c = self.scene.layout.centers[i];
        let r = self.scene.layout.radius();
        let (ox, oy) = (ray.origin.x - c.x, ray.origin.y - c.y);
        let (dx, dy) = ray.dir;
        let b = ox * dx + oy * dy;
        let cc = ox * ox + oy * oy - r * r;
        let disc = b * b - cc;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let t0 = -b - sq;
        if t0 > 1e-12 {
            Some(t0)
        } else {
            None
        }
    }

    fn nearest_circle(&self, ray: &Ray, skip: Option<usize>) -> Option<(f64, usize)> {
        let g = &self.grid;
        let (dx, dy) = ray.dir;
        let to_cell = |v: f64| ((v - g.min) / g.cell).floor().clamp(0.0, (g.dim - 1) as f64) as i64;
        let (mut ix, mut iy) = (to_cell(ray.origin.x), to_cell(ray.origin.y));
        let (step_x, step_y) = (dx.signum() as i64, dy.signum() as i64);
        let next_boundary = |i: i64, step: i64, o: f64, d: f64| {
            if d == 0.0 {
                f64::INFINITY
            } else {
                let edge = g.min + (i + i64::from(step > 0)) as f64 * g.cell;
                (edge - o) / d
            }
        };
        let mut t_max_x = next_boundary(ix, step_x, ray.origin.x, dx);
        let mut t_max_y = next_boundary(iy, step_y, ray.origin.y, dy);
        let t_delta_x = if dx == 0.0 { f64::INFINITY } else { g.cell / dx.abs() };
        let t_delta_y = if dy == 0.0 { f64::INFINITY } else { g.cell / dy.abs() };

        let mut best: Option<(f64, usize)> = None;
        let dim = g.dim as i64;
        while (0..dim).contains(&ix) && (0..dim).contains(&iy) {
            for &i in &g.cells[(iy * dim + ix) as usize] {
                if let Some(t) = self.circle_hit(ray, i, skip) {
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, i));
                    }
                }
            }
            let exit = t_max_x.min(t_max_y);
            if let Some((bt, _)) = best {
                if bt <= exit {
                    break;
                }
            }
            if t_max_x < t_max_y {
                ix += step_x;
                t_max_x += t_delta_x;
            } else {
                iy += step_y;
                t_max_y += t_delta_y;
            }
        }
        best
    }

    fn nearest_segment(&self, ray: &Ray, skip: Option<(usize, usize)>) -> Option<(f64, usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        let (dx, dy) = ray.dir;
        for (idx, s) in self.segments.iter().enumerate() {
            if skip.is_some_and(|(seg, _)| seg == idx) {
                continue;
            }
            let (ex, ey) = (s.b.x - s.a.x, s.b.y - s.a.y);
            let denom = dx * ey - dy * ex;
            if denom.abs() < 1e-300 {
                continue;
            }
            let (wx, wy) = (s.a.x - ray.origin.x, s.a.y - ray.origin.y);
            let t = (wx * ey - wy * ex) / denom;
            let u = (wx * dy - wy * dx) / denom;
            if t > 1e-12 && (0.0..=1.0).contains(&u) && best.map_or(true, |(bt, _, _)| t < bt) {
                // Approaching against face a's normal means face a is hit.
                let face = if dx * s.normal.0 + dy * s.normal.1 < 0.0 { 0 } else { 1 };
                best = Some((t, s.occluder, face));
            }
        }
        best
    }

    fn wall_hit(&self, ray: &Ray) -> Option<f64> {
        let h = self.half + 1e-12;
        let o = ray.origin;
        if o.x.abs() > h || o.y.abs() > h {
            return None;
        }
        let (dx, dy) = ray.dir;
        let tx = if dx > 0.0 {
            (self.half - o.x) / dx
        } else if dx < 0.0 {
            (-self.half - o.x) / dx
        } else {
            f64::INFINITY
        };
        let ty = if dy > 0.0 {
            (self.half - o.y) / dy
        } else if dy < 0.0 {
            (-self.half - o.y) / dy
        } else {
            f64::INFINITY
        };
        let t = tx.min(ty);
        t.is_finite().then_some(t.max(0.0))
    }

    /// First surface met by a ray, or `None` if the ray leaves the chamber
    /// without meeting anything.
    fn cast(&self, ray: &Ray, skip_vial: Option<usize>, skip_segment: Option<(usize, usize)>) -> Option<Hit> {
        let wall = self.wall_hit(ray)?;
        let mut best = (wall, Hit::Wall);
        if let Some((t, i)) = self.nearest_circle(ray, skip_vial) {
            if t < best.0 {
                best = (t, Hit::Vial(i));
            }
        }
        if let Some((t, k, face)) = self.nearest_segment(ray, skip_segment) {
            if t < best.0 {
                best = (t, Hit::Occluder(k, face));
            }
        }
        Some(best.1)
    }

    fn hit_index(&self, hit: Hit) -> usize {
        match hit {
            Hit::Vial(i) => i,
            Hit::Occluder(k, face) => self.scene.occluder_face_index(k, face),
            Hit::Wall => self.scene.wall_index(),
        }
    }
}

/// Draws θ ∈ (−π/2, π/2) with density cos(θ)/2, rejecting the tangential
/// endpoint.
fn diffuse_angle<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        let theta = (2.0 * u - 1.0).asin();
        if theta.abs() < 0.5 * PI {
            return theta;
        }
    }
}

fn rotate(n: (f64, f64), theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (n.0 * c - n.1 * s, n.0 * s + n.1 * c)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn chunk_seed(seed: u64, surface: usize, chunk: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ surface as u64) ^ chunk as u64)
}

/// Emission site on an occluder face: which segment, where, and the normal.
fn occluder_emission<R: Rng>(
    tracer: &Tracer<'_>,
    occluder: usize,
    face: usize,
    rng: &mut R,
) -> (usize, Point, (f64, f64)) {
    let segs: Vec<(usize, &Segment)> = tracer
        .segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.occluder == occluder)
        .collect();
    let total: f64 = segs.iter().map(|(_, s)| s.a.dist(s.b)).sum();
    let mut target = rng.random::<f64>() * total;
    let mut chosen = segs[segs.len() - 1];
    for &(idx, s) in &segs {
        let len = s.a.dist(s.b);
        if target < len {
            chosen = (idx, s);
            break;
        }
        target -= len;
    }
    let (idx, s) = chosen;
    let len = s.a.dist(s.b);
    let u = (target / len).clamp(0.0, 1.0);
    let p = Point::new(s.a.x + u * (s.b.x - s.a.x), s.a.y + u * (s.b.y - s.a.y));
    let n = if face == 0 { s.normal } else { (-s.normal.0, -s.normal.1) };
    (idx, p, n)
}

fn trace_chunk(
    tracer: &Tracer<'_>,
    surface: usize,
    rays: usize,
    seed: u64,
) -> Result<Vec<u64>, ViewFactorError> {
    let scene = tracer.scene;
    let mut counts = vec![0u64; scene.surface_count()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_vials = scene.vial_count();
    let r = scene.layout.radius();
    for _ in 0..rays {
        let (ray, skip_vial, skip_segment) = if surface < n_vials {
            let phi = 2.0 * PI * rng.random::<f64>();
            let normal = (phi.cos(), phi.sin());
            let c = scene.layout.centers[surface];
            let origin = Point::new(c.x + r * normal.0, c.y + r * normal.1);
            let dir = rotate(normal, diffuse_angle(&mut rng));
            (Ray { origin, dir }, Some(surface), None)
        } else {
            let rel = surface - n_vials;
            let (occluder, face) = (rel / 2, rel % 2);
            let (seg, origin, normal) = occluder_emission(tracer, occluder, face, &mut rng);
            let dir = rotate(normal, diffuse_angle(&mut rng));
            (Ray { origin, dir }, None, Some((seg, face)))
        };
        match tracer.cast(&ray, skip_vial, skip_segment) {
            Some(hit) => counts[tracer.hit_index(hit)] += 1,
            None => return Err(ViewFactorError::RayEscape { surface }),
        }
    }
    Ok(counts)
}

/// Raw Monte Carlo matrix: rows for every vial and occluder face, wall row
/// left empty for [`super::complete_and_validate`].
pub fn monte_carlo_view_factors(
    scene: &Scene,
    cfg: &McConfig,
) -> Result<ViewFactorMatrix, ViewFactorError> {
    if cfg.n_rays == 0 {
        return Err(ViewFactorError::Unsupported("n_rays must be at least 1".into()));
    }
    let tracer = Tracer::new(scene);
    let k = scene.surface_count();
    let emitters = k - 1;
    let chunks_per_surface = cfg.n_rays.div_ceil(CHUNK_RAYS);
    let jobs: Vec<(usize, usize)> = (0..emitters)
        .flat_map(|s| (0..chunks_per_surface).map(move |c| (s, c)))
        .collect();
    let results: Vec<Result<(usize, Vec<u64>), ViewFactorError>> = jobs
        .par_iter()
        .map(|&(surface, chunk)| {
            let start = chunk * CHUNK_RAYS;
            let rays = CHUNK_RAYS.min(cfg.n_rays - start);
            trace_chunk(&tracer, surface, rays, chunk_seed(cfg.seed, surface, chunk))
                .map(|c| (surface, c))
        })
        .collect();

    let mut f = DMatrix::zeros(k, k);
    let mut totals = vec![vec![0u64; k]; emitters];
    for res in results {
        let (surface, counts) = res?;
        for (t, c) in totals[surface].iter_mut().zip(counts) {
            *t += c;
        }
    }
    for (i, row) in totals.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            f[(i, j)] = c as f64 / cfg.n_rays as f64;
        }
    }
    Ok(ViewFactorMatrix::new(scene.surface_ids(), scene.surface_areas(), f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Chamber, Layout, Occluder, OccluderTemperature};

    fn scene(nx: usize, ny: usize) -> Scene {
        let l = Layout::rectangular(nx, ny, 0.01, 0.005, 0.30).unwrap();
        Scene::new(l, Chamber::default(), 1.3e-3).unwrap()
    }

    #[test]
    fn lone_vial_sees_only_the_wall() {
        let s = scene(1, 1);
        let m = monte_carlo_view_factors(&s, &McConfig { n_rays: 5000, seed: 1 }).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
    }

    #[test]
    fn diffuse_angles_have_cosine_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        // E[cos θ] = π/4 for density cos(θ)/2.
        let mean: f64 = (0..n).map(|_| diffuse_angle(&mut rng).cos()).sum::<f64>() / n as f64;
        assert!((mean - PI / 4.0).abs() < 3e-3, "mean cos = {mean}");
    }

    #[test]
    fn grid_traversal_agrees_with_brute_force() {
        let s = scene(7, 5);
        let tracer = Tracer::new(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20_000 {
            let origin = Point::new(rng.random_range(-0.14..0.14), rng.random_range(-0.14..0.14));
            if s.layout.centers.iter().any(|c| c.dist(origin) <= s.layout.radius()) {
                continue;
            }
            let phi = rng.random_range(0.0..2.0 * PI);
            let ray = Ray { origin, dir: (phi.cos(), phi.sin()) };
            let fast = tracer.nearest_circle(&ray, None).map(|(_, i)| i);
            let slow = (0..s.vial_count())
                .filter_map(|i| tracer.circle_hit(&ray, i, None).map(|t| (t, i)))
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .map(|(_, i)| i);
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn closed_frame_hides_the_wall() {
        let l = Layout::rectangular(3, 3, 0.01, 0.005, 0.30).unwrap();
        let frame = Occluder::tray_frame(&l, 0.005, 0.3, OccluderTemperature::Reradiating, 0.042);
        let s = Scene::new(l, Chamber::default(), 1.3e-3)
            .unwrap()
            .add_occluder(frame)
            .unwrap();
        let m = monte_carlo_view_factors(&s, &McConfig { n_rays: 4000, seed: 2 }).unwrap();
        let w = s.wall_index();
        for i in 0..9 {
            assert_eq!(m.get(i, w), 0.0);
            // Nothing reaches the outward face from inside.
            assert_eq!(m.get(i, s.occluder_face_index(0, 1)), 0.0);
        }
        // The outer face sees only the wall.
        assert_eq!(m.get(s.occluder_face_index(0, 1), w), 1.0);
    }

    #[test]
    fn escape_is_reported() {
        let l = Layout::rectangular(1, 1, 0.01, 0.0, 0.30).unwrap();
        let mut s = Scene::new(l, Chamber::default(), 1.3e-3).unwrap();
        s.layout.centers[0] = Point::new(1.0, 1.0);
        assert!(matches!(
            monte_carlo_view_factors(&s, &McConfig { n_rays: 10, seed: 0 }),
            Err(ViewFactorError::RayEscape { .. })
        ));
    }
}
