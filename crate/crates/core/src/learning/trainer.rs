use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{ImageFeatures, PyramidParams, RasterImage, SegmentMap};
use crate::inference::loss_augmented_detect;
use crate::learning::loss::loss;
use crate::learning::qp::{Cone, QpReport, QpState, SparseRow};
use crate::model::{assemble_features, JointFeature, Label, ModelLayout, ViewpointShape, WeightVector};
use crate::scalar::Scalar;

/// One annotated image prepared for training.
#[derive(Clone, Debug)]
pub struct TrainingSample<T> {
    pub features: ImageFeatures<T>,
    pub y_gt: Label,
}

impl<T: Scalar> TrainingSample<T> {
    pub fn new(image: &RasterImage<T>, segments: &SegmentMap, y_gt: Label, params: &PyramidParams) -> Result<Self> {
        Ok(Self {
            features: ImageFeatures::compute(image, segments, params)?,
            y_gt,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub c_reg: f64,
    pub k: usize,
    /// A constraint is added only if it is violated by more than this beyond the slack.
    pub epsilon: f64,
    pub max_iters: usize,
    pub shapes: Vec<ViewpointShape>,
    /// Hold the clique weights at zero (model without higher-order terms).
    pub freeze_hop: bool,
    pub qp_tolerance: f64,
    pub qp_max_sweeps: usize,
}

impl TrainConfig {
    pub fn new(shapes: Vec<ViewpointShape>) -> Self {
        Self {
            c_reg: 25.0,
            k: 4,
            epsilon: 1e-3,
            max_iters: 200,
            shapes,
            freeze_hop: false,
            qp_tolerance: 1e-6,
            qp_max_sweeps: 200_000,
        }
    }
}

/// Most violated constraint of one sample.
#[derive(Clone, Debug)]
pub struct Mvc<T> {
    pub label: Label,
    /// `Ψ(x, ŷ) − Ψ(x, y)`.
    pub row: SparseRow<T>,
    pub loss: f64,
    /// `Δ(y, ŷ) − w·(Ψ(x, ŷ) − Ψ(x, y))`.
    pub violation: f64,
}

/// Runs loss-augmented inference for `sample` under `w`.
pub fn find_mvc<T: Scalar>(w: &WeightVector<T>, sample: &TrainingSample<T>, psi_gt: &JointFeature<T>) -> Result<Mvc<T>> {
    let det = loss_augmented_detect(&sample.features, w, &sample.y_gt)?;
    let layout = w.layout();
    let psi_hat = assemble_features(&sample.features, layout, &det.label)?;
    let delta = loss(
        &sample.y_gt,
        layout.shape(sample.y_gt.viewpoint),
        &det.label,
        layout.shape(det.label.viewpoint),
        &sample.features.pyramid.geometry(),
    )
    .total;
    let row = SparseRow::difference(&psi_hat, psi_gt);
    let violation = delta - row.dot(w.as_slice()).as_f64();
    Ok(Mvc {
        label: det.label,
        row,
        loss: delta,
        violation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub constraints: usize,
    /// Dual objective of the QP after this iteration's solve.
    pub objective: f64,
    pub primal: f64,
    /// Largest violation beyond the slack found in this iteration.
    pub max_violation: f64,
}

/// Working sets, slacks and weights of a cutting-plane run.
#[derive(Clone, Debug)]
pub struct TrainerState<T> {
    pub layout: ModelLayout,
    pub qp: QpState<T>,
    pub working: Vec<Vec<Label>>,
    pub log: Vec<IterationLog>,
    pub converged: bool,
}

impl<T: Scalar> TrainerState<T> {
    pub fn new(layout: ModelLayout, num_samples: usize, config: &TrainConfig) -> Self {
        let cone = Cone::for_layout(&layout, config.freeze_hop);
        Self {
            qp: QpState::new(layout.total_len(), num_samples, T::of(config.c_reg), cone),
            layout,
            working: vec![Vec::new(); num_samples],
            log: Vec::new(),
            converged: false,
        }
    }

    pub fn weights(&self) -> WeightVector<T> {
        crate::model::unpack_weights(self.layout.clone(), self.qp.weights().to_vec()).expect("QP dimension matches layout")
    }

    pub fn slack(&self, sample: usize) -> f64 {
        self.qp.slack(sample).as_f64()
    }

    /// Writes the iteration log as CSV.
    pub fn write_log(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "iteration,constraints,objective,max_violation,primal")?;
        for l in &self.log {
            writeln!(
                out,
                "{},{},{:.12e},{:.12e},{:.12e}",
                l.iteration, l.constraints, l.objective, l.max_violation, l.primal
            )?;
        }
        Ok(())
    }
}

/// n-slack cutting-plane training.
///
/// Each iteration finds every sample's most violated label, adds those
/// violated by more than `epsilon` beyond the sample's slack, and re-solves
/// the QP from the previous multipliers. Stops when nothing is added.
pub fn train<T: Scalar>(samples: &[TrainingSample<T>], config: &TrainConfig) -> Result<TrainerState<T>> {
    let layout = ModelLayout::new(config.shapes.clone(), config.k)?;
    if samples.is_empty() {
        return Err(Error::argument("no training samples"));
    }
    for (i, s) in samples.iter().enumerate() {
        layout.check_viewpoint(s.y_gt.viewpoint)?;
        if s.y_gt.visibility.len() != layout.shape(s.y_gt.viewpoint).cells() {
            return Err(Error::argument(format!("sample {i}: visibility length does not match its viewpoint")));
        }
    }
    let psi_gt = samples
        .iter()
        .map(|s| assemble_features(&s.features, &layout, &s.y_gt))
        .collect::<Result<Vec<_>>>()?;
    let mut state = TrainerState::new(layout, samples.len(), config);

    for iteration in 1..=config.max_iters {
        let w = state.weights();
        let mvcs = samples
            .par_iter()
            .zip(&psi_gt)
            .map(|(s, g)| find_mvc(&w, s, g))
            .collect::<Result<Vec<_>>>()?;
        let mut added = 0;
        let mut max_violation = f64::NEG_INFINITY;
        for (i, mvc) in mvcs.into_iter().enumerate() {
            let excess = mvc.violation - state.slack(i);
            max_violation = max_violation.max(excess);
            if excess > config.epsilon && !state.working[i].contains(&mvc.label) {
                state.qp.add_row(i, mvc.row, T::of(mvc.loss));
                state.working[i].push(mvc.label);
                added += 1;
            }
        }
        let report = if added > 0 {
            state.qp.solve(T::of(config.qp_tolerance), config.qp_max_sweeps)?
        } else {
            QpReport {
                dual: state.qp.dual_objective().as_f64(),
                primal: state.qp.primal_objective().as_f64(),
                sweeps: 0,
                residual: 0.0,
            }
        };
        state.log.push(IterationLog {
            iteration,
            constraints: state.qp.num_constraints(),
            objective: report.dual,
            primal: report.primal,
            max_violation,
        });
        log::info!(
            "iteration {iteration}: {} constraints (+{added}), objective {:.6}, max violation {:.3e}, {} QP sweeps",
            state.qp.num_constraints(),
            report.dual,
            max_violation,
            report.sweeps
        );
        if added == 0 {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

/// Trains several objects as viewpoint components of one model and returns
/// each object's slice of the weights, plus the joint training state.
pub fn joint_train_multi<T: Scalar>(
    datasets: &[Vec<TrainingSample<T>>],
    shapes: &[Vec<ViewpointShape>],
    config: &TrainConfig,
) -> Result<(Vec<WeightVector<T>>, TrainerState<T>)> {
    if datasets.len() != shapes.len() || datasets.is_empty() {
        return Err(Error::argument("need one shape list per object dataset"));
    }
    let mut samples = Vec::new();
    let mut starts = Vec::new();
    let mut all_shapes = Vec::new();
    for (data, sh) in datasets.iter().zip(shapes) {
        if sh.is_empty() {
            return Err(Error::argument("object without viewpoint shapes"));
        }
        starts.push(all_shapes.len());
        for s in data {
            let mut s = s.clone();
            s.y_gt.viewpoint += all_shapes.len();
            samples.push(s);
        }
        all_shapes.extend(sh.iter().copied());
    }
    let joint_config = TrainConfig {
        shapes: all_shapes,
        ..config.clone()
    };
    let state = train(&samples, &joint_config)?;
    let w = state.weights();
    let slices = starts
        .iter()
        .zip(shapes)
        .map(|(&start, sh)| w.slice_viewpoints(start..start + sh.len()))
        .collect::<Result<Vec<_>>>()?;
    Ok((slices, state))
}
