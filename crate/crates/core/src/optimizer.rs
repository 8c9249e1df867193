//! Reduced gradient descent with adaptive subspace enrichment.
//!
//! Starting from the single constant mode (a global affine map), the
//! optimizer descends on the SDF-matching energy until the per-iteration
//! vertex displacement falls below a stage threshold, then adds the next
//! skinning mode and continues from the same shape.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::{invalid, RegError, Result};
use crate::mesh::{joint_bounding_box, FlatCoords, TriMesh};
use crate::operators::{cotan_laplacian, lumped_mass};
use crate::scalar::{norm, Real};
use crate::sdf::{make_quadrature, QuadratureSet, SignMode};
use crate::subspace::{compute_modes, ReducedCoords, SubspaceBasis};
use crate::energy::RegistrationObjective;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams<T> {
    /// Sufficient decrease constant.
    pub armijo: T,
    /// Step multiplier after a rejected trial.
    pub shrink: T,
    pub max_halvings: usize,
    /// Growth applied to the previous accepted step to seed the next search.
    pub growth: T,
    pub max_step: T,
}

impl<T: Real> Default for LineSearchParams<T> {
    fn default() -> Self {
        Self {
            armijo: T::lit(1e-4),
            shrink: T::lit(0.5),
            max_halvings: 40,
            growth: T::lit(2.0),
            max_step: T::one(),
        }
    }
}

/// Quadrature grid settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions<T> {
    pub resolution: [usize; 3],
    pub pad_fraction: T,
    /// Sign rule for the target; the deforming source always uses pseudonormals.
    pub target_sign: SignMode,
}

impl<T: Real> Default for QuadratureOptions<T> {
    fn default() -> Self {
        Self {
            resolution: [32, 32, 32],
            pad_fraction: T::lit(0.05),
            target_sign: SignMode::Pseudonormal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig<T> {
    pub max_modes: usize,
    /// Stall threshold of the first stage, in units of the joint bounding box diagonal.
    pub stall_start: T,
    /// Stall threshold of the last stage.
    pub stall_end: T,
    pub max_stage_iterations: usize,
    pub max_total_iterations: usize,
    pub line_search: LineSearchParams<T>,
    /// Dirichlet regularization weight; zero disables it.
    pub reg_lambda: T,
    pub quadrature: QuadratureOptions<T>,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            max_modes: 30,
            stall_start: T::lit(0.1),
            stall_end: T::lit(1e-3),
            max_stage_iterations: 500,
            max_total_iterations: 20000,
            line_search: LineSearchParams::default(),
            reg_lambda: T::zero(),
            quadrature: QuadratureOptions::default(),
        }
    }
}

impl<T: Real> OptimizerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_modes < 1 {
            return Err(invalid("max modes must be >= 1"));
        }
        if !(self.stall_end > T::zero() && self.stall_end <= self.stall_start) {
            return Err(invalid(format!(
                "stall thresholds must satisfy 0 < end <= start, got start {} end {}",
                self.stall_start, self.stall_end
            )));
        }
        if !(self.reg_lambda >= T::zero()) {
            return Err(invalid("regularization weight must be >= 0"));
        }
        let ls = &self.line_search;
        if !(ls.armijo > T::zero() && ls.armijo < T::one())
            || !(ls.shrink > T::zero() && ls.shrink < T::one())
            || !(ls.max_step > T::zero())
            || !(ls.growth >= T::one())
        {
            return Err(invalid("line search parameters out of range"));
        }
        Ok(())
    }
}

/// Geometric interpolation between `start` (stage 1) and `end` (last stage).
pub fn stall_schedule<T: Real>(stage: usize, max_modes: usize, start: T, end: T) -> T {
    if max_modes <= 1 {
        return end;
    }
    let stage = stage.clamp(1, max_modes);
    let t = T::from_count(stage - 1) / T::from_count(max_modes - 1);
    start * (end / start).powf(t)
}

/// True when the last step moved the vertices less than `threshold`.
pub fn stall_check<T: Real>(dx: &[T], threshold: T) -> bool {
    norm(dx) < threshold
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome<T> {
    /// Accepted step, zero on failure.
    pub alpha: T,
    /// Energy at the accepted point (the starting energy on failure).
    pub energy: T,
    pub stalled: bool,
    pub evaluations: usize,
}

/// Backtracking search along `direction` for the first step in
/// `initial, initial*shrink, ...` meeting the Armijo condition
/// `E(z + a d) <= E(z) - c a |g|^2`.
pub fn line_search<T: Real, F>(
    z: &[T],
    direction: &[T],
    energy_at_z: T,
    initial_step: T,
    params: &LineSearchParams<T>,
    mut energy_fn: F,
) -> Result<LineSearchOutcome<T>>
where
    F: FnMut(&[T]) -> Result<T>,
{
    if z.len() != direction.len() {
        return Err(invalid("direction length does not match coordinates"));
    }
    let g2: T = direction.iter().map(|&d| d * d).sum();
    if !(g2 > T::zero()) {
        return Err(invalid("line search needs a nonzero descent direction"));
    }
    let mut alpha = initial_step;
    let mut trial = vec![T::zero(); z.len()];
    for k in 0..=params.max_halvings {
        for ((t, &zi), &di) in trial.iter_mut().zip(z).zip(direction) {
            *t = zi + alpha * di;
        }
        let e = energy_fn(&trial)?;
        if e <= energy_at_z - params.armijo * alpha * g2 {
            return Ok(LineSearchOutcome {
                alpha,
                energy: e,
                stalled: false,
                evaluations: k + 1,
            });
        }
        alpha *= params.shrink;
    }
    Ok(LineSearchOutcome {
        alpha: T::zero(),
        energy: energy_at_z,
        stalled: true,
        evaluations: params.max_halvings + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    /// Energy of the rest shape.
    Init,
    /// Accepted step.
    Step,
    /// Accepted step whose displacement fell under the stage threshold.
    Stall,
    /// No step satisfied the Armijo condition.
    LineSearchFailure,
    ZeroGradient,
    StageIterationCap,
    /// A mode was added; energy is unchanged.
    Enrich,
    Done,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Init => "init",
            Self::Step => "step",
            Self::Stall => "stall",
            Self::LineSearchFailure => "linesearch_fail",
            Self::ZeroGradient => "zero_gradient",
            Self::StageIterationCap => "stage_cap",
            Self::Enrich => "enrich",
            Self::Done => "done",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<T> {
    pub stage: usize,
    pub iteration: usize,
    pub energy: T,
    pub grad_norm: T,
    pub alpha: T,
    pub dx_norm: T,
    pub event: TraceEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The last stage stalled under the final threshold.
    Converged,
    /// The last stage could not find a descent step.
    LineSearchFailure,
    /// The last stage hit its iteration cap.
    StageIterationCap,
    TotalIterationCap,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::LineSearchFailure => "linesearch_failure",
            Self::StageIterationCap => "stage_iteration_cap",
            Self::TotalIterationCap => "total_iteration_cap",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerTrace<T> {
    pub records: Vec<TraceRecord<T>>,
    /// `(new stage, iteration)` of each enrichment.
    pub enrichments: Vec<(usize, usize)>,
    pub termination: Termination,
}

impl<T: Real> OptimizerTrace<T> {
    /// Energies after each accepted step, preceded by the initial energy.
    pub fn accepted_energies(&self) -> Vec<T> {
        self.records
            .iter()
            .filter(|r| matches!(r.event, TraceEvent::Init | TraceEvent::Step | TraceEvent::Stall))
            .map(|r| r.energy)
            .collect()
    }

    /// `(stage, accepted steps, energy at stage end)` per stage reached.
    pub fn stage_summaries(&self) -> Vec<(usize, usize, T)> {
        let mut out: Vec<(usize, usize, T)> = Vec::new();
        for r in &self.records {
            if out.last().is_none_or(|s| s.0 != r.stage) {
                out.push((r.stage, 0, r.energy));
            }
            let s = out.last_mut().unwrap();
            if matches!(r.event, TraceEvent::Step | TraceEvent::Stall) {
                s.1 += 1;
            }
            s.2 = r.energy;
        }
        out
    }

    /// `stage,iter,energy,grad_norm,alpha,dx_norm,event` rows.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "stage,iter,energy,grad_norm,alpha,dx_norm,event")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                r.stage, r.iteration, r.energy, r.grad_norm, r.alpha, r.dx_norm, r.event
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|source| RegError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Result of a registration run.
#[derive(Debug, Clone)]
pub struct Registration<T> {
    pub mesh: TriMesh<T>,
    pub coords: ReducedCoords<T>,
    pub trace: OptimizerTrace<T>,
    /// Total objective at the returned shape.
    pub energy: T,
    /// SDF-matching term at the returned shape.
    pub sdf_energy: T,
    pub dirichlet: T,
}

/// Shape after an accepted step, passed to observers.
#[derive(Debug)]
pub struct IterationView<'a, T> {
    pub stage: usize,
    pub iteration: usize,
    pub positions: &'a FlatCoords<T>,
    pub triangles: &'a [[usize; 3]],
}

/// Registers `source` onto `target` with quadrature built from `config`.
pub fn register<T: Real>(
    source: &TriMesh<T>,
    target: &TriMesh<T>,
    config: &OptimizerConfig<T>,
) -> Result<Registration<T>> {
    register_with_observer(source, target, config, |_| {})
}

pub fn register_with_observer<T: Real, F>(
    source: &TriMesh<T>,
    target: &TriMesh<T>,
    config: &OptimizerConfig<T>,
    observer: F,
) -> Result<Registration<T>>
where
    F: FnMut(&IterationView<'_, T>),
{
    config.validate()?;
    let q = &config.quadrature;
    let quad = make_quadrature(source, target, q.resolution, q.pad_fraction, q.target_sign)?;
    let scale = joint_bounding_box(source, target, T::zero())?.diagonal();
    register_on_quadrature(source, &quad, scale, config, observer)
}

/// Core loop on a prebuilt quadrature set. Stall thresholds are multiplied
/// by `threshold_scale` (the joint bounding box diagonal in [`register`]).
pub fn register_on_quadrature<T: Real, F>(
    source: &TriMesh<T>,
    quad: &QuadratureSet<T>,
    threshold_scale: T,
    config: &OptimizerConfig<T>,
    mut observer: F,
) -> Result<Registration<T>>
where
    F: FnMut(&IterationView<'_, T>),
{
    config.validate()?;
    let n = source.vertex_count();
    if config.max_modes > n {
        return Err(invalid(format!(
            "{} modes requested for a mesh with {n} vertices",
            config.max_modes
        )));
    }
    let laplacian = cotan_laplacian(source)?;
    let mass = lumped_mass(source)?;
    let modes = compute_modes(&laplacian, &mass, config.max_modes)?;
    let basis = SubspaceBasis::new(modes, source)?;
    let x0 = source.vectorize();
    let triangles = source.triangles();
    let mut objective = RegistrationObjective::new(triangles, quad, config.reg_lambda, &laplacian, &x0)?;
    let ls = &config.line_search;

    let mut z = ReducedCoords::<T>(Vec::new());
    let mut records = Vec::new();
    let mut enrichments = Vec::new();
    let mut total = 0usize;
    let mut termination = Termination::Converged;
    let mut x = x0.clone();
    let mut report = objective.energy_gradient(&x)?;
    let zero = T::zero();

    'stages: for stage in 1..=config.max_modes {
        z.enrich();
        if stage == 1 {
            records.push(TraceRecord {
                stage,
                iteration: 0,
                energy: report.energy,
                grad_norm: zero,
                alpha: zero,
                dx_norm: zero,
                event: TraceEvent::Init,
            });
        } else {
            x = basis.reconstruct(&z, &x0)?;
            report = objective.energy_gradient(&x)?;
            enrichments.push((stage, total));
            records.push(TraceRecord {
                stage,
                iteration: total,
                energy: report.energy,
                grad_norm: zero,
                alpha: zero,
                dx_norm: zero,
                event: TraceEvent::Enrich,
            });
        }
        let last_stage = stage == config.max_modes;
        let threshold = stall_schedule(stage, config.max_modes, config.stall_start, config.stall_end) * threshold_scale;
        let mut prev_alpha: Option<T> = None;
        let mut stage_iters = 0usize;
        loop {
            if total >= config.max_total_iterations {
                termination = Termination::TotalIterationCap;
                break 'stages;
            }
            if stage_iters >= config.max_stage_iterations {
                records.push(event_row(stage, total, report.energy, TraceEvent::StageIterationCap));
                if last_stage {
                    termination = Termination::StageIterationCap;
                }
                break;
            }
            let grad_x = report.grad_x.as_ref().expect("gradient requested");
            let gz = basis.project_gradient(grad_x, stage)?;
            let gnorm = norm(&gz);
            if !(gnorm > zero) {
                records.push(event_row(stage, total, report.energy, TraceEvent::ZeroGradient));
                break;
            }
            let direction: Vec<T> = gz.iter().map(|&g| -g).collect();
            let initial = match prev_alpha {
                None => ls.max_step / gnorm.max(T::one()),
                Some(a) => (a * ls.growth).min(ls.max_step),
            };
            let outcome = line_search(&z, &direction, report.energy, initial, ls, |trial| {
                let xt = basis.reconstruct(&ReducedCoords(trial.to_vec()), &x0)?;
                Ok(objective.energy(&xt)?.energy)
            })?;
            total += 1;
            stage_iters += 1;
            if outcome.stalled {
                let mut row = event_row(stage, total, report.energy, TraceEvent::LineSearchFailure);
                row.grad_norm = gnorm;
                records.push(row);
                if last_stage {
                    termination = Termination::LineSearchFailure;
                }
                break;
            }
            let dz: Vec<T> = direction.iter().map(|&d| outcome.alpha * d).collect();
            for (zi, &d) in z.iter_mut().zip(&direction) {
                *zi += outcome.alpha * d;
            }
            let dx = basis.apply(&dz)?;
            let dx_norm = norm(&dx);
            x = basis.reconstruct(&z, &x0)?;
            report = objective.energy_gradient(&x)?;
            let stalled = stall_check(&dx, threshold);
            records.push(TraceRecord {
                stage,
                iteration: total,
                energy: report.energy,
                grad_norm: gnorm,
                alpha: outcome.alpha,
                dx_norm,
                event: if stalled { TraceEvent::Stall } else { TraceEvent::Step },
            });
            observer(&IterationView {
                stage,
                iteration: total,
                positions: &x,
                triangles,
            });
            prev_alpha = Some(outcome.alpha);
            if stalled {
                break;
            }
        }
    }
    records.push(event_row(z.mode_count(), total, report.energy, TraceEvent::Done));
    log::info!(
        "registration finished: {termination}, {total} iterations, {} modes, energy {:e}",
        z.mode_count(),
        report.energy
    );
    let mesh = TriMesh::unvectorize(&x, triangles)?;
    Ok(Registration {
        mesh,
        coords: z,
        trace: OptimizerTrace {
            records,
            enrichments,
            termination,
        },
        energy: report.energy,
        sdf_energy: report.sdf_energy,
        dirichlet: report.dirichlet,
    })
}

fn event_row<T: Real>(stage: usize, iteration: usize, energy: T, event: TraceEvent) -> TraceRecord<T> {
    TraceRecord {
        stage,
        iteration,
        energy,
        grad_norm: T::zero(),
        alpha: T::zero(),
        dx_norm: T::zero(),
        event,
    }
}
