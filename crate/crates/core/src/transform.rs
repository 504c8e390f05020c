//! Path transformations taking the signed inverse-temperature process to the
//! process that converges to skew Brownian motion.
//!
//! * `X`: `±beta` at the Poisson clock times, `+` in mode 1.
//! * `H = sign(X) (1 + h(|X|) / h(beta_max))`, time sped up by `h(beta_max)^2`.
//! * `Z = 2 sign(H) - H`, so the top rung sits at 0.
//! * `W = Z / s(Z)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ladder::{h_inverse, Ladder, SkewConstants};
use crate::sim::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    X,
    H,
    Z,
    W,
}

/// Right-continuous step function: `values[i]` holds on `[times[i], times[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedPath {
    pub stage: Stage,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Number of discrete iterations per unit of this path's time, on average.
    pub time_scale: f64,
}

impl TransformedPath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at time `t` (the last jump at or before `t`).
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s <= t);
        self.values[idx.saturating_sub(1)]
    }

    /// Time spent by the step function in each of `{< 0}`, `{= 0}`, `{> 0}`
    /// on `[times[0], end]`.
    pub fn sign_occupation(&self, end: f64) -> [f64; 3] {
        let mut occ = [0.0; 3];
        for i in 0..self.values.len() {
            let start = self.times[i];
            if start >= end {
                break;
            }
            let stop = self.times.get(i + 1).copied().unwrap_or(end).min(end);
            let v = self.values[i];
            let slot = if v < 0.0 {
                0
            } else if v == 0.0 {
                1
            } else {
                2
            };
            occ[slot] += stop - start;
        }
        occ
    }

    /// CSV with columns `t,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }
}

/// Signed inverse-temperature path of a trace on its Poisson clock.
pub fn poissonize(trace: &Trace) -> Result<TransformedPath> {
    if trace.records.is_empty() {
        return domain("cannot poissonize an empty trace");
    }
    let times = trace.records.iter().map(|r| r.time).collect();
    let values = trace
        .records
        .iter()
        .map(|r| if r.mode == 0 { r.beta } else { -r.beta })
        .collect();
    Ok(TransformedPath {
        stage: Stage::X,
        times,
        values,
        time_scale: trace.dimension as f64,
    })
}

fn expect_stage(path: &TransformedPath, stage: Stage) -> Result<()> {
    if path.stage != stage {
        return domain(format!(
            "expected a {stage:?}-stage path, got {:?}",
            path.stage
        ));
    }
    Ok(())
}

pub fn to_h(path: &TransformedPath, ladder: &Ladder) -> Result<TransformedPath> {
    expect_stage(path, Stage::X)?;
    let hmax = ladder.h_betamax();
    if hmax <= 0.0 {
        return domain("the H transform needs a ladder with at least two rungs");
    }
    let values = path
        .values
        .iter()
        .map(|&x| {
            if x.abs() < 1.0 {
                return Err(Error::Invariant(format!("X value {x} has |x| < 1")));
            }
            Ok(x.signum() * (1.0 + ladder.h(x)? / hmax))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = hmax * hmax;
    Ok(TransformedPath {
        stage: Stage::H,
        times: path.times.iter().map(|t| t / scale).collect(),
        values,
        time_scale: path.time_scale * scale,
    })
}

pub fn to_z(path: &TransformedPath) -> Result<TransformedPath> {
    expect_stage(path, Stage::H)?;
    Ok(TransformedPath {
        stage: Stage::Z,
        times: path.times.clone(),
        values: path.values.iter().map(|&v| 2.0 * v.signum() - v).collect(),
        time_scale: path.time_scale,
    })
}

/// `z / s(z)`, with the junction `z = 0` mapped to 0.
pub fn w_of_z(z: f64, constants: &SkewConstants) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        z / constants.s_of(z)
    }
}

pub fn to_w(path: &TransformedPath, constants: &SkewConstants) -> Result<TransformedPath> {
    expect_stage(path, Stage::Z)?;
    Ok(TransformedPath {
        stage: Stage::W,
        times: path.times.clone(),
        values: path.values.iter().map(|&z| w_of_z(z, constants)).collect(),
        time_scale: path.time_scale,
    })
}

/// Full pipeline from a trace to the W-stage path.
pub fn trace_to_w(
    trace: &Trace,
    ladder: &Ladder,
    constants: &SkewConstants,
) -> Result<TransformedPath> {
    to_w(&to_z(&to_h(&poissonize(trace)?, ladder)?)?, constants)
}

/// W value of a (mode, rung) pair without building a path.
pub fn w_of_state(mode: usize, beta: f64, ladder: &Ladder, constants: &SkewConstants) -> f64 {
    let hmax = ladder.h_betamax();
    let hv = ladder.h(beta).expect("rungs are >= 1");
    let z = 1.0 - hv / hmax;
    if mode == 0 {
        w_of_z(z, constants)
    } else {
        w_of_z(-z, constants)
    }
}

/// Inverse of the pointwise X -> W map.
pub fn x_of_w(w: f64, ladder: &Ladder, constants: &SkewConstants) -> Result<f64> {
    let z = if w > 0.0 {
        w * constants.s1
    } else if w < 0.0 {
        w * constants.s2
    } else {
        return Ok(ladder.betamax());
    };
    let hv = 2.0 * z.signum() - z;
    let frac = hv.abs() - 1.0;
    let x = h_inverse(frac * ladder.h_betamax(), ladder.ell0(), ladder.spacing())?;
    Ok(hv.signum() * x)
}
