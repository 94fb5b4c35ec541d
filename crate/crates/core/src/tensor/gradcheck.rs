//! Gradient verification against central finite differences.

use rand::seq::index::sample;

use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

use super::{Graph, NodeRef, Tensor};

/// Step used for central differences.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Elements checked per tensor before sampling kicks in.
const SUBSAMPLE: usize = 128;

/// Relative error with a `max(1, ...)` denominator so values near zero do
/// not blow the ratio up.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / 1.0_f64.max(a.abs()).max(n.abs()))
        .fold(0.0, f64::max)
}

/// Checks the tape gradients of a scalar-rooted graph.
///
/// `build` must construct the same graph for any perturbation of `inputs`;
/// the root it returns is evaluated with each differentiable input element
/// shifted by ±[`GRAD_CHECK_STEP`]. Tensors larger than 128 elements are
/// checked on a seeded random subsample. Returns the worst relative error
/// seen, or an error when no input is differentiable.
pub fn grad_check<F>(inputs: &[Tensor], build: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeRef]) -> Result<NodeRef>,
{
    if !inputs.iter().any(|t| t.requires_grad()) {
        return Err(Error::NoParameters);
    }

    // Analytic pass.
    let mut graph = Graph::new();
    let leaves: Vec<NodeRef> = inputs.iter().map(|t| graph.tensor(t)).collect();
    let root = build(&mut graph, &leaves)?;
    if graph.value(root).len() != 1 {
        return Err(Error::NonScalarRoot {
            shape: graph.shape(root).to_vec(),
        });
    }
    graph.backward(root)?;

    let mut rng = stream_rng(SUBSAMPLE_SEED, Stream::GradCheck);
    let mut worst = 0.0_f64;
    let mut work = inputs.to_vec();

    for (ti, t) in inputs.iter().enumerate() {
        if !t.requires_grad() {
            continue;
        }
        let analytic = graph
            .grad(leaves[ti])
            .expect("differentiable leaf must have a gradient after backward")
            .to_vec();
        let numel = t.numel();
        let picks: Vec<usize> = if numel <= SUBSAMPLE {
            (0..numel).collect()
        } else {
            sample(&mut rng, numel, SUBSAMPLE).into_vec()
        };
        for ei in picks {
            let orig = work[ti].values()[ei];
            work[ti].values_mut()[ei] = orig + GRAD_CHECK_STEP;
            let plus = eval(&work, &build)?;
            work[ti].values_mut()[ei] = orig - GRAD_CHECK_STEP;
            let minus = eval(&work, &build)?;
            work[ti].values_mut()[ei] = orig;
            let numeric = (plus - minus) / (2.0 * GRAD_CHECK_STEP);
            let err = max_relative_error(&[analytic[ei]], &[numeric]);
            if err > worst {
                worst = err;
            }
        }
    }
    Ok(worst)
}

fn eval<F>(inputs: &[Tensor], build: &F) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeRef]) -> Result<NodeRef>,
{
    let mut graph = Graph::new();
    let leaves: Vec<NodeRef> = inputs.iter().map(|t| graph.tensor(t)).collect();
    let root = build(&mut graph, leaves.as_slice())?;
    Ok(graph.value(root)[0])
}

/// Fixed seed for the element subsample stream.
const SUBSAMPLE_SEED: u64 = 0x6772_6164;
