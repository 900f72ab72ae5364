//! Preset lattice, subarea tiling and the fixed layouts used as baselines.
//!
//! Presets sit on a regular lattice with pitch `(d_H, d_V)`: preset `(row, col)`
//! is at `(col·d_H, row·d_V)` and has row-major index `row·n_h + col`. Every
//! preset owns a `d_H × d_V` cell centred on it, so the aperture is the union
//! of the cells and has area `N·A`. Subareas are rectangular blocks of cells
//! tiled `M_v × M_h`, also numbered row-major.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Relative slack used when comparing distances against the minimum spacing,
/// so lattice neighbours exactly `D` apart are not rejected by rounding.
const SPACING_SLACK: f64 = 1e-9;

pub(crate) fn spacing_ok(distance: f64, min_distance: f64) -> bool {
    distance >= min_distance * (1.0 - SPACING_SLACK)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceConfig {
    pub wavelength_m: f64,
    pub spacing_h_m: f64,
    pub spacing_v_m: f64,
    pub n_h: usize,
    pub n_v: usize,
    /// Number of active elements `M`.
    pub num_active: usize,
    pub min_distance_m: f64,
}

impl SurfaceConfig {
    /// Configuration with `D = max(d_H, d_V)`.
    pub fn new(
        wavelength_m: f64,
        spacing_h_m: f64,
        spacing_v_m: f64,
        n_h: usize,
        n_v: usize,
        num_active: usize,
    ) -> Self {
        SurfaceConfig {
            wavelength_m,
            spacing_h_m,
            spacing_v_m,
            n_h,
            n_v,
            num_active,
            min_distance_m: spacing_h_m.max(spacing_v_m),
        }
    }

    pub fn num_presets(&self) -> usize {
        self.n_h * self.n_v
    }

    /// Area `A = d_H·d_V` of one preset cell.
    pub fn element_area(&self) -> f64 {
        self.spacing_h_m * self.spacing_v_m
    }

    pub fn total_area(&self) -> f64 {
        self.num_presets() as f64 * self.element_area()
    }

    /// `(M_h, M_v)`: selected elements per row and per column.
    pub fn active_grid(&self) -> (usize, usize) {
        near_square_factors(self.num_active)
    }

    /// Presets per subarea along each axis.
    pub fn subarea_shape(&self) -> (usize, usize) {
        let (m_h, m_v) = self.active_grid();
        (self.n_h / m_h, self.n_v / m_v)
    }

    pub fn subarea_size_m(&self) -> (f64, f64) {
        let (w, h) = self.subarea_shape();
        (w as f64 * self.spacing_h_m, h as f64 * self.spacing_v_m)
    }

    /// Geometric centre of the aperture.
    pub fn aperture_center(&self) -> Point {
        Point::new(
            0.5 * (self.n_h as f64 - 1.0) * self.spacing_h_m,
            0.5 * (self.n_v as f64 - 1.0) * self.spacing_v_m,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config {
                    field,
                    reason: format!("must be positive, got {v}"),
                })
            }
        };
        positive("wavelength_m", self.wavelength_m)?;
        positive("spacing_h_m", self.spacing_h_m)?;
        positive("spacing_v_m", self.spacing_v_m)?;
        for (field, v) in [
            ("n_h", self.n_h),
            ("n_v", self.n_v),
            ("num_active", self.num_active),
        ] {
            if v == 0 {
                return Err(Error::Config {
                    field,
                    reason: "must be at least 1".into(),
                });
            }
        }
        if self.num_presets() % self.num_active != 0 {
            return Err(Error::Config {
                field: "num_active",
                reason: format!(
                    "{} presets cannot be split evenly into {} subareas",
                    self.num_presets(),
                    self.num_active
                ),
            });
        }
        let (m_h, m_v) = self.active_grid();
        if self.n_h % m_h != 0 {
            return Err(Error::Config {
                field: "n_h",
                reason: format!("{} columns cannot be tiled by {m_h} subarea columns", self.n_h),
            });
        }
        if self.n_v % m_v != 0 {
            return Err(Error::Config {
                field: "n_v",
                reason: format!("{} rows cannot be tiled by {m_v} subarea rows", self.n_v),
            });
        }
        if !(self.min_distance_m >= 0.0) {
            return Err(Error::Config {
                field: "min_distance_m",
                reason: format!("must be nonnegative, got {}", self.min_distance_m),
            });
        }
        let (w, h) = self.subarea_size_m();
        if self.min_distance_m >= w.min(h) {
            return Err(Error::Config {
                field: "min_distance_m",
                reason: format!(
                    "{} m is not below the subarea size {w} m x {h} m",
                    self.min_distance_m
                ),
            });
        }
        Ok(())
    }
}

/// `(a, b)` with `a·b = n` and `a` the largest divisor not exceeding `√n`.
pub fn near_square_factors(n: usize) -> (usize, usize) {
    if n == 0 {
        return (0, 0);
    }
    let mut a = (n as f64).sqrt() as usize;
    while a * a > n {
        a -= 1;
    }
    while (a + 1) * (a + 1) <= n {
        a += 1;
    }
    while n % a != 0 {
        a -= 1;
    }
    (a, n / a)
}

/// Axis-aligned subarea rectangle, half-open on the upper edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x < self.max.x && p.y >= self.min.y && p.y < self.max.y
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.min.x + self.max.x), 0.5 * (self.min.y + self.max.y))
    }
}

/// Inclusive lattice index ranges of one subarea.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Block {
    pub cols: (usize, usize),
    pub rows: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct PresetGrid {
    coords: Vec<Point>,
    subarea_of: Vec<usize>,
    bounds: Vec<Rect>,
    blocks: Vec<Block>,
    members: Vec<Vec<usize>>,
    n_h: usize,
    spacing: (f64, f64),
}

impl PresetGrid {
    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn num_subareas(&self) -> usize {
        self.bounds.len()
    }

    /// Subarea (0-based) owning `preset`.
    pub fn subarea_of(&self, preset: usize) -> usize {
        self.subarea_of[preset]
    }

    pub fn subarea_bounds(&self) -> &[Rect] {
        &self.bounds
    }

    /// Presets of subarea `m` in row-major order.
    pub fn subarea_members(&self, m: usize) -> &[usize] {
        &self.members[m]
    }

    pub fn spacing(&self) -> (f64, f64) {
        self.spacing
    }

    pub(crate) fn block(&self, m: usize) -> Block {
        self.blocks[m]
    }

    pub(crate) fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_h + col
    }

    /// Nearest preset to `p` inside subarea `m`, lowest row-major index on ties.
    pub fn nearest_in_subarea(&self, m: usize, p: Point) -> usize {
        let b = self.blocks[m];
        let col = nearest_lattice(p.x / self.spacing.0, b.cols);
        let row = nearest_lattice(p.y / self.spacing.1, b.rows);
        self.index(row, col)
    }
}

// Nearest integer to `t` within `[lo, hi]`; the lower one wins a tie.
fn nearest_lattice(t: f64, (lo, hi): (usize, usize)) -> usize {
    if !(t > lo as f64) {
        return lo;
    }
    if t >= hi as f64 {
        return hi;
    }
    let below = t.floor();
    let k = below as usize;
    if t - below <= below + 1.0 - t {
        k
    } else {
        k + 1
    }
}

pub fn build_preset_grid(config: &SurfaceConfig) -> Result<PresetGrid> {
    config.validate()?;
    let (dh, dv) = (config.spacing_h_m, config.spacing_v_m);
    let (m_h, m_v) = config.active_grid();
    let (sub_w, sub_h) = config.subarea_shape();

    let mut coords = Vec::with_capacity(config.num_presets());
    let mut subarea_of = Vec::with_capacity(config.num_presets());
    for row in 0..config.n_v {
        for col in 0..config.n_h {
            coords.push(Point::new(col as f64 * dh, row as f64 * dv));
            subarea_of.push((row / sub_h) * m_h + col / sub_w);
        }
    }

    let mut bounds = Vec::with_capacity(config.num_active);
    let mut blocks = Vec::with_capacity(config.num_active);
    for sr in 0..m_v {
        for sc in 0..m_h {
            let cols = (sc * sub_w, (sc + 1) * sub_w - 1);
            let rows = (sr * sub_h, (sr + 1) * sub_h - 1);
            blocks.push(Block { cols, rows });
            bounds.push(Rect {
                min: Point::new((cols.0 as f64 - 0.5) * dh, (rows.0 as f64 - 0.5) * dv),
                max: Point::new((cols.1 as f64 + 0.5) * dh, (rows.1 as f64 + 0.5) * dv),
            });
        }
    }

    let mut members = vec![Vec::with_capacity(sub_w * sub_h); config.num_active];
    for (n, &m) in subarea_of.iter().enumerate() {
        members[m].push(n);
    }

    Ok(PresetGrid {
        coords,
        subarea_of,
        bounds,
        blocks,
        members,
        n_h: config.n_h,
        spacing: (dh, dv),
    })
}

/// A FRIS configuration: one preset per subarea, element `m` in subarea `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub preset_indices: Vec<usize>,
    pub positions: Vec<Point>,
}

impl Selection {
    pub fn from_indices(grid: &PresetGrid, indices: Vec<usize>) -> Self {
        let positions = indices.iter().map(|&n| grid.coords[n]).collect();
        Selection {
            preset_indices: indices,
            positions,
        }
    }

    pub fn len(&self) -> usize {
        self.preset_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preset_indices.is_empty()
    }
}

/// Fixed elements at the preset closest to each subarea centre.
pub fn conventional_ris_layout(grid: &PresetGrid) -> Selection {
    let (dh, dv) = grid.spacing;
    let indices = (0..grid.num_subareas())
        .map(|m| {
            let b = grid.blocks[m];
            // Doubled lattice offsets keep symmetric ties exactly equal.
            let two_cx = (b.cols.0 + b.cols.1) as i64;
            let two_cy = (b.rows.0 + b.rows.1) as i64;
            let mut best = (f64::INFINITY, 0);
            for &n in &grid.members[m] {
                let (row, col) = ((n / grid.n_h) as i64, (n % grid.n_h) as i64);
                let ex = (2 * col - two_cx) as f64 * dh;
                let ey = (2 * row - two_cy) as f64 * dv;
                let d2 = ex * ex + ey * ey;
                if d2 < best.0 {
                    best = (d2, n);
                }
            }
            best.1
        })
        .collect();
    Selection::from_indices(grid, indices)
}

/// Contiguous `M_h × M_v` array with pitch `spacing_m`, centred on the aperture.
pub fn compact_ris_layout(config: &SurfaceConfig, spacing_m: f64) -> Result<Vec<Point>> {
    if !(spacing_m > 0.0) {
        return Err(Error::Constraint(format!(
            "compact spacing must be positive, got {spacing_m}"
        )));
    }
    if spacing_m > 0.5 * config.wavelength_m * (1.0 + 1e-12) {
        return Err(Error::Constraint(format!(
            "compact spacing {spacing_m} m exceeds half a wavelength ({} m)",
            0.5 * config.wavelength_m
        )));
    }
    let (m_h, m_v) = config.active_grid();
    let c = config.aperture_center();
    let x0 = c.x - 0.5 * (m_h as f64 - 1.0) * spacing_m;
    let y0 = c.y - 0.5 * (m_v as f64 - 1.0) * spacing_m;
    let mut out = Vec::with_capacity(config.num_active);
    for row in 0..m_v {
        for col in 0..m_h {
            out.push(Point::new(
                x0 + col as f64 * spacing_m,
                y0 + row as f64 * spacing_m,
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    WrongCount { expected: usize, got: usize },
    IndexOutOfRange { element: usize, index: usize },
    PositionMismatch { element: usize },
    /// Element `element` sits in `actual` instead of its own subarea.
    OutsideSubarea {
        element: usize,
        index: usize,
        actual: usize,
    },
    /// Several elements share one subarea.
    SharedSubarea { subarea: usize, elements: Vec<usize> },
    DuplicateIndex { index: usize, elements: Vec<usize> },
    TooClose { a: usize, b: usize, distance: f64 },
}

/// Checks the subarea and spacing constraints, reporting every violation.
pub fn validate_selection(
    sel: &Selection,
    grid: &PresetGrid,
    config: &SurfaceConfig,
) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let m = grid.num_subareas();
    if sel.preset_indices.len() != m || sel.positions.len() != sel.preset_indices.len() {
        out.push(Violation::WrongCount {
            expected: m,
            got: sel.preset_indices.len(),
        });
    }

    let mut by_subarea: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (e, &n) in sel.preset_indices.iter().enumerate() {
        if n >= grid.len() {
            out.push(Violation::IndexOutOfRange { element: e, index: n });
            continue;
        }
        if sel.positions.get(e) != Some(&grid.coords[n]) {
            out.push(Violation::PositionMismatch { element: e });
        }
        let s = grid.subarea_of[n];
        by_subarea[s].push(e);
        if s != e {
            out.push(Violation::OutsideSubarea {
                element: e,
                index: n,
                actual: s,
            });
        }
    }
    for (s, elements) in by_subarea.into_iter().enumerate() {
        if elements.len() > 1 {
            out.push(Violation::SharedSubarea { subarea: s, elements });
        }
    }

    let idx = &sel.preset_indices;
    for a in 0..idx.len() {
        let dups: Vec<usize> = (a + 1..idx.len()).filter(|&b| idx[b] == idx[a]).collect();
        if !dups.is_empty() && !idx[..a].contains(&idx[a]) {
            let mut elements = vec![a];
            elements.extend(dups);
            out.push(Violation::DuplicateIndex {
                index: idx[a],
                elements,
            });
        }
    }

    for a in 0..sel.positions.len() {
        for b in a + 1..sel.positions.len() {
            let d = sel.positions[a].distance(sel.positions[b]);
            if !spacing_ok(d, config.min_distance_m) {
                out.push(Violation::TooClose { a, b, distance: d });
            }
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
