use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::coherence::{min_msc_coherence, Coherence, WelchOptions};
use super::frechet::discrete_frechet;
use crate::continuation::{correct, mode_trajectory, Eigenmanifold, GeneratorPoint, ShootingOptions};
use crate::dynamics::{integrate, MechanicalModel, State, Trajectory};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Stored energies closer than this are treated as equal.
pub const ENERGY_MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
    Z,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::X, Component::Y, Component::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::X => "x",
            Component::Y => "y",
            Component::Z => "z",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetricOptions {
    /// Time samples per period of each task curve.
    pub samples: usize,
    /// Gauss–Legendre nodes for integrals over arc length.
    pub quadrature_points: usize,
    /// Coherence signals span this many periods of the slower mode.
    pub tiling_periods: f64,
    pub coherence_samples: usize,
    pub welch: WelchOptions,
    pub shooting: ShootingOptions,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            samples: 512,
            quadrature_points: 10,
            tiling_periods: 8.0,
            coherence_samples: 4096,
            welch: WelchOptions::default(),
            shooting: ShootingOptions::default(),
        }
    }
}

/// One task-space coordinate of a backbone point over one period.
#[derive(Debug, Clone)]
pub struct TaskCurve {
    pub component: Component,
    pub s: f64,
    pub energy: f64,
    pub period: f64,
    pub values: Vec<f64>,
}

/// A model together with one of its eigenmanifolds.
#[derive(Clone, Copy)]
pub struct ModeBranch<'a> {
    pub model: &'a dyn MechanicalModel,
    pub manifold: &'a Eigenmanifold,
}

/// A generator point and one period of the orbit through it.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub point: GeneratorPoint,
    pub trajectory: Trajectory,
}

impl<'a> ModeBranch<'a> {
    pub fn new(model: &'a dyn MechanicalModel, manifold: &'a Eigenmanifold) -> Self {
        Self { model, manifold }
    }

    /// Generator point at `energy`: a stored point if one matches, otherwise
    /// a linear interpolation between the bracketing points corrected back
    /// onto the branch.
    pub fn generator_at(&self, energy: f64, shooting: &ShootingOptions) -> Result<GeneratorPoint> {
        let points = &self.manifold.points;
        if let Some(p) = points
            .iter()
            .find(|p| (p.energy - energy).abs() <= ENERGY_MATCH_TOLERANCE)
        {
            return Ok(p.clone());
        }
        let k = points
            .windows(2)
            .position(|w| w[0].energy < energy && energy < w[1].energy)
            .ok_or_else(|| {
                Error::Range(format!(
                    "energy {energy} outside the {} mode-{} branch",
                    self.manifold.model, self.manifold.mode_index
                ))
            })?;
        let (p, r) = (&points[k], &points[k + 1]);
        let w = (energy - p.energy) / (r.energy - p.energy);
        let q0 = p.configuration() * (1.0 - w) + r.configuration() * w;
        let period = p.period * (1.0 - w) + r.period * w;
        Ok(correct(self.model, &q0, period, energy, shooting)?.point)
    }

    pub fn orbit_at(&self, energy: f64, options: &MetricOptions) -> Result<Orbit> {
        let point = self.generator_at(energy, &options.shooting)?;
        let trajectory = mode_trajectory(self.model, &point, options.samples, &options.shooting.control)?.trajectory;
        Ok(Orbit { point, trajectory })
    }

    pub fn rest_length(&self) -> f64 {
        self.model.rest_length()
    }
}

impl Orbit {
    /// Task curves of the backbone point at `s`, one per component.
    pub fn task_curves(&self, model: &dyn MechanicalModel, s: f64) -> [TaskCurve; 3] {
        let mut values = [Vec::new(), Vec::new(), Vec::new()];
        for state in &self.trajectory.states {
            let p = model.backbone_point(&state.q, s);
            for c in 0..3 {
                values[c].push(p[c]);
            }
        }
        let [x, y, z] = values;
        let curve = |component, values| TaskCurve {
            component,
            s,
            energy: self.point.energy,
            period: self.point.period,
            values,
        };
        [curve(Component::X, x), curve(Component::Y, y), curve(Component::Z, z)]
    }
}

/// Periodic Catmull–Rom interpolation of one period sampled at `n` uniform
/// instants (the closing sample excluded).
fn periodic_interpolate(values: &[f64], period: f64, t: f64) -> f64 {
    let n = values.len();
    let u = (t / period).rem_euclid(1.0) * n as f64;
    let k = (u.floor() as usize).min(n - 1);
    let x = u - k as f64;
    let at = |i: isize| values[(k as isize + i).rem_euclid(n as isize) as usize];
    let (p0, p1, p2, p3) = (at(-1), at(0), at(1), at(2));
    0.5 * (2.0 * p1
        + (-p0 + p2) * x
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * x * x
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * x * x * x)
}

/// Tiles both one-period curves over a common duration and resamples them at
/// a common rate.
pub fn coherence_signals(a: &TaskCurve, b: &TaskCurve, periods: f64, samples: usize) -> (Vec<f64>, Vec<f64>) {
    let duration = periods * a.period.max(b.period);
    let dt = duration / samples as f64;
    let resample = |c: &TaskCurve| {
        let unique = &c.values[..c.values.len() - 1];
        (0..samples)
            .map(|k| periodic_interpolate(unique, c.period, k as f64 * dt))
            .collect::<Vec<_>>()
    };
    (resample(a), resample(b))
}

fn curve_coherence(a: &TaskCurve, b: &TaskCurve, options: &MetricOptions) -> Result<Coherence> {
    let (sa, sb) = coherence_signals(a, b, options.tiling_periods, options.coherence_samples);
    min_msc_coherence(&sa, &sb, &options.welch)
}

fn check_arc_length(a: &ModeBranch, b: &ModeBranch, s: f64) -> Result<()> {
    let l = a.rest_length().min(b.rest_length());
    if !(0.0..=l).contains(&s) {
        return Err(Error::Domain(format!("arc length {s} outside [0, {l}]")));
    }
    Ok(())
}

/// Componentwise discrete Fréchet distance `f(E, s)` of the two modes.
pub fn modal_frechet(a: &ModeBranch, b: &ModeBranch, energy: f64, s: f64, options: &MetricOptions) -> Result<[f64; 3]> {
    check_arc_length(a, b, s)?;
    let (oa, ob) = (a.orbit_at(energy, options)?, b.orbit_at(energy, options)?);
    frechet_at(a, &oa, b, &ob, s)
}

fn frechet_at(a: &ModeBranch, oa: &Orbit, b: &ModeBranch, ob: &Orbit, s: f64) -> Result<[f64; 3]> {
    let (ca, cb) = (oa.task_curves(a.model, s), ob.task_curves(b.model, s));
    let mut out = [0.0; 3];
    for c in 0..3 {
        out[c] = discrete_frechet(&ca[c].values, &cb[c].values)?;
    }
    Ok(out)
}

fn coherence_at(a: &ModeBranch, oa: &Orbit, b: &ModeBranch, ob: &Orbit, s: f64, options: &MetricOptions) -> Result<[Coherence; 3]> {
    let (ca, cb) = (oa.task_curves(a.model, s), ob.task_curves(b.model, s));
    Ok([
        curve_coherence(&ca[0], &cb[0], options)?,
        curve_coherence(&ca[1], &cb[1], options)?,
        curve_coherence(&ca[2], &cb[2], options)?,
    ])
}

/// `F(E) = ∫₀^L f(E, s) ds` by Gauss–Legendre quadrature.
pub fn modal_integral_frechet(a: &ModeBranch, b: &ModeBranch, energy: f64, options: &MetricOptions) -> Result<[f64; 3]> {
    let (oa, ob) = (a.orbit_at(energy, options)?, b.orbit_at(energy, options)?);
    let l = a.rest_length().min(b.rest_length());
    let rule = GaussLegendre::new(options.quadrature_points);
    let mut out = [0.0; 3];
    for (s, w) in rule.on_interval(0.0, l) {
        let f = frechet_at(a, &oa, b, &ob, s)?;
        for c in 0..3 {
            out[c] += w * f[c];
        }
    }
    Ok(out)
}

/// Componentwise minimum magnitude-squared coherence `g(E, s)`.
pub fn modal_coherence(a: &ModeBranch, b: &ModeBranch, energy: f64, s: f64, options: &MetricOptions) -> Result<[Coherence; 3]> {
    check_arc_length(a, b, s)?;
    let (oa, ob) = (a.orbit_at(energy, options)?, b.orbit_at(energy, options)?);
    coherence_at(a, &oa, b, &ob, s, options)
}

/// `G(E) = ∫₀^L g(E, s) ds` by Gauss–Legendre quadrature.
pub fn modal_integral_coherence(a: &ModeBranch, b: &ModeBranch, energy: f64, options: &MetricOptions) -> Result<[f64; 3]> {
    let (oa, ob) = (a.orbit_at(energy, options)?, b.orbit_at(energy, options)?);
    let l = a.rest_length().min(b.rest_length());
    let rule = GaussLegendre::new(options.quadrature_points);
    let mut out = [0.0; 3];
    for (s, w) in rule.on_interval(0.0, l) {
        let g = coherence_at(a, &oa, b, &ob, s, options)?;
        for c in 0..3 {
            out[c] += w * g[c].value;
        }
    }
    Ok(out)
}

/// All metrics of both modes at one energy.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyRow {
    pub energy: f64,
    /// `f(E, s*)` per component.
    pub frechet: [f64; 3],
    /// `F(E)` per component.
    pub frechet_integral: [f64; 3],
    /// `g(E, s*)` per component.
    pub coherence: [f64; 3],
    /// `G(E)` per component.
    pub coherence_integral: [f64; 3],
    /// Set where both signals are silent at `s*`.
    pub degenerate: [bool; 3],
}

fn energy_row(a: &ModeBranch, b: &ModeBranch, energy: f64, s_star: f64, options: &MetricOptions) -> Result<EnergyRow> {
    let (oa, ob) = (a.orbit_at(energy, options)?, b.orbit_at(energy, options)?);
    let l = a.rest_length().min(b.rest_length());
    let frechet = frechet_at(a, &oa, b, &ob, s_star)?;
    let coh = coherence_at(a, &oa, b, &ob, s_star, options)?;
    let rule = GaussLegendre::new(options.quadrature_points);
    let mut frechet_integral = [0.0; 3];
    let mut coherence_integral = [0.0; 3];
    for (s, w) in rule.on_interval(0.0, l) {
        let f = frechet_at(a, &oa, b, &ob, s)?;
        let g = coherence_at(a, &oa, b, &ob, s, options)?;
        for c in 0..3 {
            frechet_integral[c] += w * f[c];
            coherence_integral[c] += w * g[c].value;
        }
    }
    Ok(EnergyRow {
        energy,
        frechet,
        frechet_integral,
        coherence: coh.map(|c| c.value),
        coherence_integral,
        degenerate: coh.map(|c| c.degenerate),
    })
}

/// Energies at which both branches can be compared: the stored energies of
/// either branch that lie in the overlap of the two ranges, ascending and
/// without duplicates.
pub fn shared_energy_grid(a: &Eigenmanifold, b: &Eigenmanifold) -> Result<Vec<f64>> {
    let (Some((a0, a1)), Some((b0, b1))) = (a.energy_range(), b.energy_range()) else {
        return Err(Error::Range("empty manifold".into()));
    };
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if lo > hi + ENERGY_MATCH_TOLERANCE {
        return Err(Error::Range("no energy overlap".into()));
    }
    let mut grid: Vec<f64> = a
        .points
        .iter()
        .chain(&b.points)
        .map(|p| p.energy)
        .filter(|&e| e >= lo - ENERGY_MATCH_TOLERANCE && e <= hi + ENERGY_MATCH_TOLERANCE)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|x, y| (*x - *y).abs() <= ENERGY_MATCH_TOLERANCE);
    Ok(grid)
}

/// Trapezoid rule over `(e_eq, anchor)` followed by the given samples.
pub fn trapezoid_from(e_eq: f64, anchor: f64, energies: &[f64], values: &[f64]) -> f64 {
    let mut total = 0.0;
    let (mut e_prev, mut v_prev) = (e_eq, anchor);
    for (&e, &v) in energies.iter().zip(values) {
        total += 0.5 * (v + v_prev) * (e - e_prev);
        e_prev = e;
        v_prev = v;
    }
    total
}

/// Metrics of two modes tabulated over their shared energies.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub model_a: String,
    pub model_b: String,
    pub mode_a: usize,
    pub mode_b: usize,
    /// Arc length of the pointwise metrics, the shorter rest length.
    pub s_star: f64,
    pub energy_eq: f64,
    pub rows: Vec<EnergyRow>,
    /// `F_E` per component.
    pub frechet_energy: [f64; 3],
    /// `G_E` per component.
    pub coherence_energy: [f64; 3],
    pub samples: usize,
    pub quadrature_points: usize,
    pub welch_segment: usize,
}

impl ComparisonReport {
    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy).collect()
    }
}

/// Evaluates `f, F, g, G` on the shared energy grid and integrates `F` and
/// `G` over energy from the equilibrium, where `F = 0` and `G = L`.
pub fn compare(a: &ModeBranch, b: &ModeBranch, options: &MetricOptions) -> Result<ComparisonReport> {
    let grid = shared_energy_grid(a.manifold, b.manifold)?;
    let s_star = a.rest_length().min(b.rest_length());
    let rows = grid
        .par_iter()
        .map(|&e| energy_row(a, b, e, s_star, options))
        .collect::<Result<Vec<_>>>()?;
    let e_eq = equilibrium_energy(a).max(equilibrium_energy(b));
    let mut frechet_energy = [0.0; 3];
    let mut coherence_energy = [0.0; 3];
    for c in 0..3 {
        let f: Vec<f64> = rows.iter().map(|r| r.frechet_integral[c]).collect();
        let g: Vec<f64> = rows.iter().map(|r| r.coherence_integral[c]).collect();
        frechet_energy[c] = trapezoid_from(e_eq, 0.0, &grid, &f);
        coherence_energy[c] = trapezoid_from(e_eq, s_star, &grid, &g);
    }
    Ok(ComparisonReport {
        model_a: a.manifold.model.clone(),
        model_b: b.manifold.model.clone(),
        mode_a: a.manifold.mode_index,
        mode_b: b.manifold.mode_index,
        s_star,
        energy_eq: e_eq,
        rows,
        frechet_energy,
        coherence_energy,
        samples: options.samples,
        quadrature_points: options.quadrature_points,
        welch_segment: options.welch.segment,
    })
}

fn equilibrium_energy(b: &ModeBranch) -> f64 {
    b.model.potential(&DVector::from_column_slice(&b.manifold.equilibrium))
}

/// `(F_E, G_E)` per component.
pub fn energy_integrated(a: &ModeBranch, b: &ModeBranch, options: &MetricOptions) -> Result<([f64; 3], [f64; 3])> {
    let report = compare(a, b, options)?;
    Ok((report.frechet_energy, report.coherence_energy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyFrequency {
    pub energy: f64,
    pub omega: f64,
    pub freq_hz: f64,
}

/// One row per generator point: energy, angular frequency and frequency.
pub fn energy_frequency_table(manifold: &Eigenmanifold) -> Vec<EnergyFrequency> {
    manifold
        .points
        .iter()
        .map(|p| EnergyFrequency {
            energy: p.energy,
            omega: p.frequency(),
            freq_hz: 1.0 / p.period,
        })
        .collect()
}

/// Backbone shape at one instant of a mode.
#[derive(Debug, Clone)]
pub struct StrobeFrame {
    pub fraction: f64,
    pub time: f64,
    /// `(s, x, y, z)` rows.
    pub shape: Vec<[f64; 4]>,
}

/// Backbone shapes at the given fractions of the period of the orbit at
/// `energy`, each sampled at `stations` evenly spaced arc lengths.
pub fn strobe(branch: &ModeBranch, energy: f64, fractions: &[f64], stations: usize, options: &MetricOptions) -> Result<Vec<StrobeFrame>> {
    if stations < 2 {
        return Err(Error::Domain("at least two arc-length stations are required".into()));
    }
    let point = branch.generator_at(energy, &options.shooting)?;
    let start = State::at_rest(point.configuration());
    let l = branch.rest_length();
    fractions
        .iter()
        .map(|&fraction| {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::Domain(format!("time fraction {fraction} outside [0, 1]")));
            }
            let time = fraction * point.period;
            let q = if time > 0.0 {
                integrate(branch.model, &start, time, &options.shooting.control, 2)?
                    .last_state()
                    .q
                    .clone()
            } else {
                start.q.clone()
            };
            let shape = (0..stations)
                .map(|k| {
                    let s = if k + 1 == stations { l } else { l * k as f64 / (stations - 1) as f64 };
                    let p = branch.model.backbone_point(&q, s);
                    [s, p.x, p.y, p.z]
                })
                .collect();
            Ok(StrobeFrame { fraction, time, shape })
        })
        .collect()
}
