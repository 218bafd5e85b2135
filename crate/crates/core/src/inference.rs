//! MAP inference: minimize Σ w·max(0, c·x + b)^p over the unit box with
//! consensus ADMM, plus an exhaustive grid search used as a test oracle.
//!
//! Every potential keeps local copies of its atoms. One iteration solves each
//! potential's proximal problem in closed form, averages copies into the
//! consensus vector (clamped to [0,1]) and updates the scaled duals. Work is
//! split into fixed-size groups of potentials and fixed per-atom copy lists,
//! so results do not depend on the number of worker threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grounding::HingePotential;
use crate::par;
use crate::rules::Exponent;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rho: f64,
    pub max_iterations: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub initial_value: f64,
    /// Record objective and residuals after every iteration.
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1.0,
            max_iterations: 25_000,
            primal_tol: 1e-5,
            dual_tol: 1e-5,
            initial_value: 0.5,
            trace: false,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max iterations must be positive".into()));
        }
        if !(self.primal_tol > 0.0 && self.dual_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_value) {
            return Err(Error::Config(format!(
                "initial value {} outside [0,1]",
                self.initial_value
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub trace: Vec<TraceRow>,
}

fn check_dims(potentials: &[HingePotential], n: usize) -> Result<()> {
    for p in potentials {
        if let Some(&(a, _)) = p.coeffs.iter().find(|(a, _)| *a >= n) {
            return Err(Error::Dimension {
                expected: n,
                actual: a + 1,
            });
        }
    }
    Ok(())
}

const OBJECTIVE_CHUNK: usize = 4096;

/// Σ w·distance^p. Summed in fixed chunks for reproducibility.
pub fn objective(potentials: &[HingePotential], x: &[f64]) -> Result<f64> {
    check_dims(potentials, x.len())?;
    Ok(objective_unchecked(potentials, x))
}

fn objective_unchecked(potentials: &[HingePotential], x: &[f64]) -> f64 {
    let chunks: Vec<&[HingePotential]> = potentials.chunks(OBJECTIVE_CHUNK).collect();
    par::map(&chunks, |c| c.iter().map(|p| p.value(x)).sum::<f64>())
        .into_iter()
        .sum()
}

#[derive(Clone, Copy, Debug, Default)]
struct Slot {
    y: f64,
    u: f64,
}

/// Potentials flattened into contiguous arrays.
struct Flat {
    offsets: Vec<usize>,
    atoms: Vec<usize>,
    coeffs: Vec<f64>,
    constant: Vec<f64>,
    weight: Vec<f64>,
    squared: Vec<bool>,
    norm2: Vec<f64>,
}

impl Flat {
    fn new(potentials: &[HingePotential]) -> Self {
        let mut f = Flat {
            offsets: vec![0],
            atoms: Vec::new(),
            coeffs: Vec::new(),
            constant: Vec::new(),
            weight: Vec::new(),
            squared: Vec::new(),
            norm2: Vec::new(),
        };
        for p in potentials {
            for &(a, c) in &p.coeffs {
                f.atoms.push(a);
                f.coeffs.push(c);
            }
            f.offsets.push(f.atoms.len());
            f.constant.push(p.constant);
            f.weight.push(p.weight);
            f.squared.push(p.exponent == Exponent::Squared);
            f.norm2.push(p.coeffs.iter().map(|(_, c)| c * c).sum());
        }
        f
    }

    /// Proximal step of potential `j` at v = z − u, writing y into `slots`.
    fn prox(&self, j: usize, rho: f64, z: &[f64], slots: &mut [Slot]) {
        let (lo, hi) = (self.offsets[j], self.offsets[j + 1]);
        let coeffs = &self.coeffs[lo..hi];
        let atoms = &self.atoms[lo..hi];
        let mut cv = self.constant[j];
        for k in 0..coeffs.len() {
            let v = z[atoms[k]] - slots[k].u;
            slots[k].y = v;
            cv += coeffs[k] * v;
        }
        if cv <= 0.0 || self.norm2[j] == 0.0 {
            return;
        }
        let (w, n2) = (self.weight[j], self.norm2[j]);
        let step = if self.squared[j] {
            2.0 * w * cv / (rho + 2.0 * w * n2)
        } else {
            // Full step w/ρ unless it would cross the hinge, then project onto it.
            (w / rho).min(cv / n2)
        };
        for k in 0..coeffs.len() {
            slots[k].y -= step * coeffs[k];
        }
    }
}

const GROUP: usize = 512;

/// Consensus ADMM. Deterministic for a fixed potential order.
pub fn map_inference(potentials: &[HingePotential], n: usize, cfg: &SolverConfig) -> Result<Assignment> {
    cfg.check()?;
    check_dims(potentials, n)?;
    let flat = Flat::new(potentials);
    let m = potentials.len();
    let total = flat.atoms.len();

    // Per-atom copy lists, in potential order.
    let mut counts = vec![0usize; n + 1];
    for &a in &flat.atoms {
        counts[a + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let atom_start = counts.clone();
    let mut fill = counts;
    let mut copy_ix = vec![0usize; total];
    for (c, &a) in flat.atoms.iter().enumerate() {
        copy_ix[fill[a]] = c;
        fill[a] += 1;
    }

    let mut z = vec![cfg.initial_value; n];
    let mut slots: Vec<Slot> = flat
        .atoms
        .iter()
        .map(|&a| Slot { y: z[a], u: 0.0 })
        .collect();
    let group_bounds: Vec<(usize, usize)> = (0..m.div_ceil(GROUP))
        .map(|g| (g * GROUP, ((g + 1) * GROUP).min(m)))
        .collect();

    let scale = (total.max(1) as f64).sqrt();
    let mut best_values = z.clone();
    let mut best_objective = objective_unchecked(potentials, &z);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = total == 0;
    let (mut primal, mut dual) = (0.0, 0.0);

    while !converged && iterations < cfg.max_iterations {
        iterations += 1;

        {
            let mut groups = split_groups(&mut slots, &group_bounds, &flat.offsets);
            let z_ref = &z;
            par::for_each_chunk_mut(&mut groups, 1, |_, gs| {
                for (start, end, s) in gs.iter_mut() {
                    let base = flat.offsets[*start];
                    for j in *start..*end {
                        let (lo, hi) = (flat.offsets[j] - base, flat.offsets[j + 1] - base);
                        flat.prox(j, cfg.rho, z_ref, &mut s[lo..hi]);
                    }
                }
            });
        }

        let z_old = std::mem::take(&mut z);
        z = z_old.clone();
        {
            let slots_ref = &slots;
            let z_old_ref = &z_old;
            par::for_each_chunk_mut(&mut z, 4096, |offset, chunk| {
                for (k, zi) in chunk.iter_mut().enumerate() {
                    let i = offset + k;
                    let (lo, hi) = (atom_start[i], atom_start[i + 1]);
                    if lo == hi {
                        *zi = z_old_ref[i];
                        continue;
                    }
                    let mut sum = 0.0;
                    for &c in &copy_ix[lo..hi] {
                        sum += slots_ref[c].y + slots_ref[c].u;
                    }
                    *zi = (sum / (hi - lo) as f64).clamp(0.0, 1.0);
                }
            });
        }

        let primal_sq: f64 = {
            let mut groups = split_groups(&mut slots, &group_bounds, &flat.offsets);
            let z_ref = &z;
            let mut partial = vec![0.0f64; groups.len()];
            {
                let mut zipped: Vec<(&mut (usize, usize, &mut [Slot]), &mut f64)> =
                    groups.iter_mut().zip(partial.iter_mut()).collect();
                par::for_each_chunk_mut(&mut zipped, 1, |_, items| {
                    for (g, acc) in items.iter_mut() {
                        let base = flat.offsets[g.0];
                        let atoms = &flat.atoms[base..flat.offsets[g.1]];
                        let mut r = 0.0;
                        for (s, &a) in g.2.iter_mut().zip(atoms) {
                            let d = s.y - z_ref[a];
                            s.u += d;
                            r += d * d;
                        }
                        **acc = r;
                    }
                });
            }
            partial.into_iter().sum()
        };
        let dual_sq: f64 = (0..n)
            .map(|i| {
                let d = z[i] - z_old[i];
                (atom_start[i + 1] - atom_start[i]) as f64 * d * d
            })
            .sum();
        primal = primal_sq.sqrt() / scale;
        dual = cfg.rho * dual_sq.sqrt() / scale;
        if !primal.is_finite() || !dual.is_finite() || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                iteration: iterations,
            });
        }
        converged = primal <= cfg.primal_tol && dual <= cfg.dual_tol;

        let evaluate = cfg.trace || converged || iterations % 25 == 0 || iterations == cfg.max_iterations;
        if evaluate {
            let obj = objective_unchecked(potentials, &z);
            if cfg.trace {
                trace.push(TraceRow {
                    iteration: iterations,
                    objective: obj,
                    primal_residual: primal,
                    dual_residual: dual,
                });
            }
            if obj < best_objective {
                best_objective = obj;
                best_values.clone_from(&z);
            }
        }
    }

    Ok(Assignment {
        objective: objective_unchecked(potentials, &best_values),
        values: best_values,
        iterations,
        converged,
        primal_residual: primal,
        dual_residual: dual,
        trace,
    })
}

fn split_groups<'s>(
    slots: &'s mut [Slot],
    bounds: &[(usize, usize)],
    offsets: &[usize],
) -> Vec<(usize, usize, &'s mut [Slot])> {
    let mut out = Vec::with_capacity(bounds.len());
    let mut rest = slots;
    for &(start, end) in bounds {
        let len = offsets[end] - offsets[start];
        let (head, tail) = rest.split_at_mut(len);
        out.push((start, end, head));
        rest = tail;
    }
    out
}

/// Largest grid the exhaustive oracle will evaluate.
pub const MAX_GRID_POINTS: u64 = 200_000_000;

/// Exhaustive minimisation over {0, h, 2h, …, 1}ⁿ.
pub fn brute_force_map(potentials: &[HingePotential], n: usize, grid_step: f64) -> Result<Assignment> {
    brute_force_map_in(potentials, &vec![0.0; n], &vec![1.0; n], grid_step)
}

/// Exhaustive minimisation over the grid points k·h lying in the box
/// [lower, upper]; ties go to the lexicographically smallest point.
pub fn brute_force_map_in(
    potentials: &[HingePotential],
    lower: &[f64],
    upper: &[f64],
    grid_step: f64,
) -> Result<Assignment> {
    let n = lower.len();
    if n > 5 || upper.len() != n {
        return Err(Error::Capacity(format!(
            "exhaustive search handles at most 5 atoms, got {n}"
        )));
    }
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::Config(format!("grid step {grid_step} outside (0, 0.5]")));
    }
    check_dims(potentials, n)?;
    let steps = (1.0 / grid_step).round() as i64;
    let h = 1.0 / steps as f64;
    let axis: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let lo = (lower[i].max(0.0) / h - 1e-9).ceil() as i64;
            let hi = (upper[i].min(1.0) / h + 1e-9).floor() as i64;
            (lo..=hi).map(|k| k as f64 / steps as f64).collect()
        })
        .collect();
    let points: u64 = axis.iter().map(|a| a.len() as u64).product();
    if points > MAX_GRID_POINTS {
        return Err(Error::Capacity(format!(
            "grid of {points} points exceeds the limit of {MAX_GRID_POINTS}"
        )));
    }
    if axis.iter().any(|a| a.is_empty()) {
        return Err(Error::Precondition("search box contains no grid point".into()));
    }

    let mut idx = vec![0usize; n];
    let mut x: Vec<f64> = axis.iter().map(|a| a[0]).collect();
    let mut best = x.clone();
    let mut best_obj = f64::INFINITY;
    loop {
        let obj: f64 = potentials.iter().map(|p| p.value(&x)).sum();
        if obj < best_obj {
            best_obj = obj;
            best.clone_from(&x);
        }
        // Odometer increment, last coordinate fastest (lexicographic order).
        let mut d = n;
        loop {
            if d == 0 {
                return Ok(Assignment {
                    objective: objective_unchecked(potentials, &best),
                    values: best,
                    iterations: points as usize,
                    converged: true,
                    primal_residual: 0.0,
                    dual_residual: 0.0,
                    trace: Vec::new(),
                });
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axis[d].len() {
                x[d] = axis[d][idx[d]];
                break;
            }
            idx[d] = 0;
            x[d] = axis[d][0];
        }
    }
}
