//! Procedural narrow terrains: flat paths, slopes and stairs bordered by a
//! drop, plus unbounded planar ground, with a 20-level difficulty curriculum.
//!
//! Height lookups are cell-constant (no interpolation) so stair edges stay
//! sharp. The path runs along +x; the robot spawns near x = 0 on a flat
//! lead-in section.

use rand::Rng;
use serde::{Deserialize, Serialize};

pub const NUM_LEVELS: u32 = 20;
/// Fixed stair tread depth (m).
pub const STEP_WIDTH: f64 = 0.4;
/// Drop below the local path elevation beyond the path edge (m).
pub const OFF_PATH_DROP: f64 = 1.0;
/// Height-field cell size (m).
pub const CELL_SIZE: f64 = 0.05;

/// Curriculum endpoints: level 0 -> level 19.
const WIDTH_RANGE: (f64, f64) = (1.0, 0.2);
const GRADIENT_RANGE: (f64, f64) = (0.0, 0.3);
const STEP_HEIGHT_RANGE: (f64, f64) = (0.0, 0.12);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainKind {
    NarrowFlat,
    NarrowSlope,
    NarrowStairs,
    Plane,
}

impl TerrainKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerrainKind::NarrowFlat => "narrow_flat",
            TerrainKind::NarrowSlope => "narrow_slope",
            TerrainKind::NarrowStairs => "narrow_stairs",
            TerrainKind::Plane => "plane",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TerrainSpec {
    pub kind: TerrainKind,
    pub level: u32,
    /// Path width (m).
    pub width: f64,
    /// Slope gradient (rise/run).
    pub gradient: f64,
    /// Stair riser height (m).
    pub step_height: f64,
    /// Stair tread depth (m), fixed.
    pub step_width: f64,
    /// Length of the featured path section (m).
    pub path_length: f64,
    pub friction: f64,
}

impl TerrainSpec {
    /// Difficulty parameters for `level`, linearly interpolated between the
    /// level-0 and level-19 endpoints (exact at both ends).
    pub fn from_level(kind: TerrainKind, level: u32) -> TerrainSpec {
        assert!(level < NUM_LEVELS, "terrain level must be in [0, 19]");
        let t = level as f64 / (NUM_LEVELS - 1) as f64;
        // Convex form hits both endpoints exactly.
        let lerp = |(a, b): (f64, f64)| a * (1.0 - t) + b * t;
        let narrow = kind != TerrainKind::Plane;
        TerrainSpec {
            kind,
            level,
            width: if narrow { lerp(WIDTH_RANGE) } else { 1.0 },
            gradient: if kind == TerrainKind::NarrowSlope {
                lerp(GRADIENT_RANGE)
            } else {
                0.0
            },
            step_height: if kind == TerrainKind::NarrowStairs {
                lerp(STEP_HEIGHT_RANGE)
            } else {
                0.0
            },
            step_width: STEP_WIDTH,
            path_length: 12.0,
            friction: 1.0,
        }
    }

    /// Path surface elevation at longitudinal position `x`.
    fn profile(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self.kind {
            TerrainKind::NarrowFlat | TerrainKind::Plane => 0.0,
            TerrainKind::NarrowSlope => self.gradient * x,
            TerrainKind::NarrowStairs => {
                // Quantized to whole steps; first tread is at ground level.
                self.step_height * ((x / self.step_width) + 1e-9).floor()
            }
        }
    }
}

/// Sampled elevation grid with cell-constant lookup.
#[derive(Debug, Clone)]
pub struct HeightField {
    origin: (f64, f64),
    cell: f64,
    nx: usize,
    ny: usize,
    data: Vec<f64>,
    /// Half-width of the walkable path; `None` for unbounded planar ground.
    half_width: Option<f64>,
    /// Elevation reported beyond the grid (already includes the drop).
    off_grid: f64,
    pub friction: f64,
    pub spec: TerrainSpec,
}

impl HeightField {
    pub fn from_spec(spec: &TerrainSpec) -> HeightField {
        let x0 = -6.0;
        let x1 = spec.path_length + 1.0;
        let y0 = -1.5;
        let y1 = 1.5;
        let nx = ((x1 - x0) / CELL_SIZE).round() as usize + 1;
        let ny = ((y1 - y0) / CELL_SIZE).round() as usize + 1;
        let half_width = match spec.kind {
            TerrainKind::Plane => None,
            _ => Some(spec.width / 2.0),
        };
        let mut data = vec![0.0; nx * ny];
        for ix in 0..nx {
            let x = x0 + ix as f64 * CELL_SIZE;
            let surface = spec.profile(x);
            for iy in 0..ny {
                let y = y0 + iy as f64 * CELL_SIZE;
                let on_path = half_width.map_or(true, |hw| y.abs() <= hw);
                data[ix * ny + iy] = if on_path {
                    surface
                } else {
                    surface - OFF_PATH_DROP
                };
            }
        }
        HeightField {
            origin: (x0, y0),
            cell: CELL_SIZE,
            nx,
            ny,
            data,
            half_width,
            off_grid: -OFF_PATH_DROP,
            friction: spec.friction,
            spec: spec.clone(),
        }
    }

    /// Unbounded flat ground at elevation zero.
    pub fn plane(friction: f64) -> HeightField {
        let mut spec = TerrainSpec::from_level(TerrainKind::Plane, 0);
        spec.friction = friction;
        HeightField::from_spec(&spec)
    }

    /// Elevation and on-path flag at `(x, y)`. Total: queries beyond the grid
    /// return the off-grid drop (planar ground extends forever instead).
    pub fn height_at(&self, x: f64, y: f64) -> (f64, bool) {
        let fx = (x - self.origin.0) / self.cell + 1e-9;
        let fy = (y - self.origin.1) / self.cell + 1e-9;
        if self.half_width.is_none() {
            // Planar ground: flat and walkable everywhere.
            if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
                return (0.0, true);
            }
        } else if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return (self.off_grid, false);
        }
        let ix = (fx.floor() as usize).min(self.nx - 1);
        let iy = (fy.floor() as usize).min(self.ny - 1);
        let on_path = self.half_width.map_or(true, |hw| y.abs() <= hw + 1e-12);
        (self.data[ix * self.ny + iy], on_path)
    }

    /// Signed lateral clearance from the path edge (positive inside the path).
    /// Unbounded ground reports a large clearance.
    pub fn edge_clearance(&self, y: f64) -> f64 {
        match self.half_width {
            Some(hw) => hw - y.abs(),
            None => f64::INFINITY,
        }
    }

    /// Dump the grid as `x,y,elevation` CSV rows.
    pub fn dump_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "x,y,elevation")?;
        for ix in 0..self.nx {
            let x = self.origin.0 + ix as f64 * self.cell;
            for iy in 0..self.ny {
                let y = self.origin.1 + iy as f64 * self.cell;
                writeln!(w, "{x},{y},{}", self.data[ix * self.ny + iy])?;
            }
        }
        Ok(())
    }
}

/// Generate the terrain for a curriculum level. Deterministic in
/// `(kind, level)`; the rng parameter is part of the interface for terrain
/// families that draw shape noise (none of the built-in kinds do).
pub fn generate_terrain(
    kind: TerrainKind,
    level: u32,
    _rng: &mut impl Rng,
) -> (TerrainSpec, HeightField) {
    let spec = TerrainSpec::from_level(kind, level);
    let hf = HeightField::from_spec(&spec);
    (spec, hf)
}

/// Draw a terrain kind: 30% flat / 30% slope / 30% stairs / 10% plane.
pub fn mix_terrains(rng: &mut impl Rng) -> TerrainKind {
    let u: f64 = rng.gen();
    if u < 0.3 {
        TerrainKind::NarrowFlat
    } else if u < 0.6 {
        TerrainKind::NarrowSlope
    } else if u < 0.9 {
        TerrainKind::NarrowStairs
    } else {
        TerrainKind::Plane
    }
}

/// Height-window geometry: a 1.6 m x 1.0 m grid at 0.1 m spacing, yaw-aligned
/// with the robot and centered on its base -> 17 x 11 = 187 points.
pub const WINDOW_NX: usize = 17;
pub const WINDOW_NY: usize = 11;
pub const WINDOW_POINTS: usize = WINDOW_NX * WINDOW_NY;

/// Sample the critic height window: terrain elevation minus base height at
/// each grid point. Layout is x-major: index = ix * 11 + iy, with ix running
/// front-to-back offsets [-0.8, 0.8] and iy lateral offsets [-0.5, 0.5].
pub fn sample_height_window(
    hf: &HeightField,
    base_xy: (f64, f64),
    base_z: f64,
    yaw: f64,
    out: &mut [f64],
) {
    assert_eq!(out.len(), WINDOW_POINTS);
    let (cy, sy) = (yaw.cos(), yaw.sin());
    for ix in 0..WINDOW_NX {
        let dx = -0.8 + ix as f64 * 0.1;
        for iy in 0..WINDOW_NY {
            let dy = -0.5 + iy as f64 * 0.1;
            let wx = base_xy.0 + cy * dx - sy * dy;
            let wy = base_xy.1 + sy * dx + cy * dy;
            let (elev, _) = hf.height_at(wx, wy);
            out[ix * WINDOW_NY + iy] = elev - base_z;
        }
    }
}
