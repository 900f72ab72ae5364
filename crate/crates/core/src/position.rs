//! Element position selection: an evolutionary particle swarm over the
//! whole `M`-element configuration, plus a brute-force oracle for small grids.
//!
//! Each particle carries continuous coordinates for all `M` elements. After
//! every move the coordinates are mutated with isotropic Gaussian noise and
//! projected back onto the feasible set: element `m` snaps to the nearest
//! preset of subarea `m`, and an element that lands closer than `D` to an
//! element placed before it is moved to the nearest preset of its subarea
//! that keeps the spacing.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{spacing_ok, Point, PresetGrid, Selection, SurfaceConfig};

pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EpsoParams {
    pub swarm_size: usize,
    pub max_iter: usize,
    /// Inertia weight `δ`.
    pub inertia: f64,
    /// Cognitive acceleration.
    pub c1: f64,
    /// Social acceleration.
    pub c2: f64,
    pub mutation_std_m: f64,
    pub rng_seed: u64,
}

impl EpsoParams {
    /// `S = 150, T = 20, δ = 0.6, c1 = c2 = 1.8`, mutation of one lattice pitch.
    pub fn with_pitch(pitch_m: f64) -> Self {
        EpsoParams {
            swarm_size: 150,
            max_iter: 20,
            inertia: 0.6,
            c1: 1.8,
            c2: 1.8,
            mutation_std_m: pitch_m,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: String| Err(Error::Config { field, reason });
        if self.swarm_size == 0 {
            return bad("swarm_size", "must be at least 1".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be at least 1".into());
        }
        if !(self.inertia > 0.0 && self.inertia <= 1.0) {
            return bad("inertia", format!("must lie in (0, 1], got {}", self.inertia));
        }
        if !(self.c1 >= 0.0) {
            return bad("c1", format!("must be nonnegative, got {}", self.c1));
        }
        if !(self.c2 >= 0.0) {
            return bad("c2", format!("must be nonnegative, got {}", self.c2));
        }
        if !(self.mutation_std_m >= 0.0) {
            return bad(
                "mutation_std_m",
                format!("must be nonnegative, got {}", self.mutation_std_m),
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<Point>,
    pub velocity: Vec<Point>,
    pub selection: Selection,
    pub best_position: Vec<Point>,
    pub best_fitness: f64,
}

impl Particle {
    pub fn new(selection: Selection, velocity: Vec<Point>) -> Self {
        Particle {
            position: selection.positions.clone(),
            best_position: selection.positions.clone(),
            velocity,
            selection,
            best_fitness: f64::NEG_INFINITY,
        }
    }
}

/// `v ← δv + c1·r1·(p_best − p) + c2·r2·(g_best − p)` for given `r1`, `r2`.
pub fn velocity_step(
    p: &Particle,
    global_best: &[Point],
    params: &EpsoParams,
    r1: f64,
    r2: f64,
) -> Vec<Point> {
    assert_eq!(p.position.len(), global_best.len(), "dimension mismatch");
    let a = params.c1 * r1;
    let b = params.c2 * r2;
    p.velocity
        .iter()
        .zip(&p.position)
        .zip(p.best_position.iter().zip(global_best))
        .map(|((v, x), (pb, gb))| {
            Point::new(
                params.inertia * v.x + a * (pb.x - x.x) + b * (gb.x - x.x),
                params.inertia * v.y + a * (pb.y - x.y) + b * (gb.y - x.y),
            )
        })
        .collect()
}

/// Velocity update with fresh `r1, r2 ~ U[0, 1)` (drawn in that order).
pub fn velocity_update<R: Rng + ?Sized>(
    p: &Particle,
    global_best: &[Point],
    params: &EpsoParams,
    rng: &mut R,
) -> Vec<Point> {
    let r1: f64 = rng.random();
    let r2: f64 = rng.random();
    velocity_step(p, global_best, params, r1, r2)
}

/// Move, mutate and project. Mutation draws `ξ_x, ξ_y` per element in order,
/// and draws nothing when `σ_mut = 0`.
pub fn position_update<R: Rng + ?Sized>(
    p: &Particle,
    velocity: Vec<Point>,
    projector: &Projector<'_>,
    params: &EpsoParams,
    rng: &mut R,
) -> Result<Particle> {
    let mut raw: Vec<Point> = p
        .position
        .iter()
        .zip(&velocity)
        .map(|(x, v)| Point::new(x.x + v.x, x.y + v.y))
        .collect();
    if params.mutation_std_m > 0.0 {
        let normal = Normal::new(0.0, params.mutation_std_m).expect("finite std");
        for q in raw.iter_mut() {
            q.x += normal.sample(rng);
            q.y += normal.sample(rng);
        }
    }
    let selection = projector.project(&raw)?;
    Ok(Particle {
        position: selection.positions.clone(),
        velocity,
        selection,
        best_position: p.best_position.clone(),
        best_fitness: p.best_fitness,
    })
}

/// Projection onto the feasible selections of one grid, with the subarea
/// neighbourhoods that can violate the spacing precomputed.
#[derive(Debug, Clone)]
pub struct Projector<'a> {
    grid: &'a PresetGrid,
    min_distance: f64,
    /// Lower-numbered subareas close enough to conflict with each subarea.
    conflicts: Vec<Vec<usize>>,
}

impl<'a> Projector<'a> {
    pub fn new(grid: &'a PresetGrid, config: &SurfaceConfig) -> Self {
        let (dh, dv) = grid.spacing();
        let d = config.min_distance_m;
        let m = grid.num_subareas();
        let conflicts = (0..m)
            .map(|a| {
                let ba = grid.block(a);
                (0..a)
                    .filter(|&b| {
                        if d <= 0.0 {
                            return false;
                        }
                        let bb = grid.block(b);
                        let gap = |lo_a: usize, hi_a: usize, lo_b: usize, hi_b: usize| {
                            if lo_a > hi_b {
                                lo_a - hi_b
                            } else if lo_b > hi_a {
                                lo_b - hi_a
                            } else {
                                0
                            }
                        };
                        let gx = gap(ba.cols.0, ba.cols.1, bb.cols.0, bb.cols.1) as f64 * dh;
                        let gy = gap(ba.rows.0, ba.rows.1, bb.rows.0, bb.rows.1) as f64 * dv;
                        !spacing_ok(gx.hypot(gy), d)
                    })
                    .collect()
            })
            .collect();
        Projector {
            grid,
            min_distance: d,
            conflicts,
        }
    }

    pub fn grid(&self) -> &PresetGrid {
        self.grid
    }

    pub fn project(&self, raw: &[Point]) -> Result<Selection> {
        let grid = self.grid;
        let m = grid.num_subareas();
        assert_eq!(raw.len(), m, "expected one coordinate per subarea");
        let coords = grid.coords();
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        for (e, &target) in raw.iter().enumerate() {
            let clear = |n: usize, chosen: &[usize]| {
                self.conflicts[e]
                    .iter()
                    .all(|&o| spacing_ok(coords[n].distance(coords[chosen[o]]), self.min_distance))
            };
            let snap = grid.nearest_in_subarea(e, target);
            let pick = if clear(snap, &chosen) {
                snap
            } else {
                let mut best: Option<(f64, usize)> = None;
                for &n in grid.subarea_members(e) {
                    if !clear(n, &chosen) {
                        continue;
                    }
                    let dx = coords[n].x - target.x;
                    let dy = coords[n].y - target.y;
                    let d2 = dx * dx + dy * dy;
                    if best.is_none_or(|(bd, _)| d2 < bd) {
                        best = Some((d2, n));
                    }
                }
                best.ok_or(Error::Infeasible { subarea: e })?.1
            };
            chosen.push(pick);
        }
        Ok(Selection::from_indices(grid, chosen))
    }
}

/// Maps raw coordinates (one per subarea) to a feasible selection.
pub fn project_feasible(raw: &[Point], grid: &PresetGrid, config: &SurfaceConfig) -> Result<Selection> {
    Projector::new(grid, config).project(raw)
}

#[derive(Debug, Clone)]
pub struct EpsoOutcome {
    pub selection: Selection,
    pub fitness: f64,
    /// Global-best fitness after each evaluation pass (`max_iter + 1` entries).
    pub trace: Vec<f64>,
}

fn finite_or_floor(f: f64) -> f64 {
    if f.is_nan() {
        f64::NEG_INFINITY
    } else {
        f
    }
}

/// Swarm search maximizing `fitness` over feasible selections.
///
/// Particles start uniformly inside their subareas with per-axis velocities
/// uniform in `[−d_H, d_H] × [−d_V, d_V]`. Every iteration evaluates the
/// swarm, refreshes personal and global bests, then moves each particle; a
/// last evaluation pass scores the final moves.
pub fn epso_optimize<F>(
    grid: &PresetGrid,
    config: &SurfaceConfig,
    params: &EpsoParams,
    mut fitness: F,
) -> Result<EpsoOutcome>
where
    F: FnMut(&Selection) -> f64,
{
    params.validate()?;
    let projector = Projector::new(grid, config);
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let (dh, dv) = grid.spacing();
    let bounds = grid.subarea_bounds();

    let mut swarm = Vec::with_capacity(params.swarm_size);
    for _ in 0..params.swarm_size {
        let raw: Vec<Point> = bounds
            .iter()
            .map(|r| {
                Point::new(
                    rng.random_range(r.min.x..r.max.x),
                    rng.random_range(r.min.y..r.max.y),
                )
            })
            .collect();
        let velocity = (0..raw.len())
            .map(|_| Point::new(rng.random_range(-dh..=dh), rng.random_range(-dv..=dv)))
            .collect();
        swarm.push(Particle::new(projector.project(&raw)?, velocity));
    }

    let mut best: Option<(Selection, f64)> = None;
    let mut trace = Vec::with_capacity(params.max_iter + 1);
    let mut evaluate = |swarm: &mut [Particle], best: &mut Option<(Selection, f64)>| {
        for p in swarm.iter_mut() {
            let f = finite_or_floor(fitness(&p.selection));
            if f > p.best_fitness {
                p.best_fitness = f;
                p.best_position = p.position.clone();
            }
            if best.as_ref().is_none_or(|(_, bf)| f > *bf) {
                *best = Some((p.selection.clone(), f));
            }
        }
    };

    for _ in 0..params.max_iter {
        evaluate(&mut swarm, &mut best);
        trace.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1));
        let global = best.as_ref().expect("swarm is nonempty").0.positions.clone();
        for p in swarm.iter_mut() {
            let v = velocity_update(p, &global, params, &mut rng);
            *p = position_update(p, v, &projector, params, &mut rng)?;
        }
    }
    evaluate(&mut swarm, &mut best);
    let (selection, fitness) = best.expect("swarm is nonempty");
    trace.push(fitness);
    Ok(EpsoOutcome {
        selection,
        fitness,
        trace,
    })
}

/// Memoizes a deterministic fitness by preset indices.
pub struct CachedFitness<F> {
    inner: F,
    cache: HashMap<Vec<usize>, f64>,
}

impl<F: FnMut(&Selection) -> f64> CachedFitness<F> {
    pub fn new(inner: F) -> Self {
        CachedFitness {
            inner,
            cache: HashMap::new(),
        }
    }

    pub fn eval(&mut self, sel: &Selection) -> f64 {
        if let Some(&f) = self.cache.get(&sel.preset_indices) {
            return f;
        }
        let f = (self.inner)(sel);
        self.cache.insert(sel.preset_indices.clone(), f);
        f
    }

    pub fn distinct_evaluations(&self) -> usize {
        self.cache.len()
    }
}

/// Number of one-preset-per-subarea combinations, before spacing filtering.
pub fn combination_count(grid: &PresetGrid) -> u128 {
    (0..grid.num_subareas())
        .map(|m| grid.subarea_members(m).len() as u128)
        .try_fold(1u128, |acc, k| acc.checked_mul(k))
        .unwrap_or(u128::MAX)
}

/// Brute-force argmax over every feasible selection; the lexicographically
/// smallest index tuple wins ties.
pub fn exhaustive_select<F>(
    grid: &PresetGrid,
    config: &SurfaceConfig,
    cap: u128,
    mut fitness: F,
) -> Result<(Selection, f64)>
where
    F: FnMut(&Selection) -> f64,
{
    let combinations = combination_count(grid);
    if combinations > cap {
        return Err(Error::SearchTooLarge { combinations, cap });
    }
    let m = grid.num_subareas();
    let coords = grid.coords();
    let mut digits = vec![0usize; m];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let idx: Vec<usize> = (0..m).map(|s| grid.subarea_members(s)[digits[s]]).collect();
        let feasible = (0..m).all(|a| {
            (a + 1..m).all(|b| spacing_ok(coords[idx[a]].distance(coords[idx[b]]), config.min_distance_m))
        });
        if feasible {
            let sel = Selection::from_indices(grid, idx);
            let f = finite_or_floor(fitness(&sel));
            if best.as_ref().is_none_or(|(_, bf)| f > *bf) {
                best = Some((sel.preset_indices, f));
            }
        }
        // odometer, last subarea fastest
        let mut s = m;
        loop {
            if s == 0 {
                let (idx, f) = best.ok_or(Error::Infeasible { subarea: 0 })?;
                return Ok((Selection::from_indices(grid, idx), f));
            }
            s -= 1;
            digits[s] += 1;
            if digits[s] < grid.subarea_members(s).len() {
                break;
            }
            digits[s] = 0;
        }
    }
}
