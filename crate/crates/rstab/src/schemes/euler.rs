//! The Milstein-type scheme on a uniform grid `Π = {kΔ}`:
//!
//! ```text
//! y_{k+1} = y_k + f(y_k) Δ + g(y_k) x_{t_k,t_{k+1}} + Dg(y_k) g(y_k) X_{t_k,t_{k+1}}
//! ```

use crate::error::{Error, Result};
use crate::fields::SystemModel;
use crate::flow::DiffusionStepper;
use crate::linalg::dist;
use crate::noise::wiener_shift_index;
use crate::rough::path::{GridPath, RoughPathGrid};

/// One scheme step from `y` with increment `x` and area `xx` (row-major `m × m`).
pub fn step(model: &SystemModel, y: &[f64], x: &[f64], xx: &[f64], delta: f64) -> Vec<f64> {
    let mut st = DiffusionStepper::new(model.dim(), model.noise_dim());
    let mut out = vec![0.0; model.dim()];
    step_into(model, &mut st, y, x, xx, delta, &mut out);
    out
}

fn step_into(
    model: &SystemModel,
    st: &mut DiffusionStepper,
    y: &[f64],
    x: &[f64],
    xx: &[f64],
    delta: f64,
    out: &mut [f64],
) {
    let d = y.len();
    let mut f = vec![0.0; d];
    model.drift.eval(y, &mut f);
    if model.diffusion.is_zero() {
        for i in 0..d {
            out[i] = y[i] + f[i] * delta;
        }
        return;
    }
    st.increment(model.diffusion.as_ref(), y, x, xx, out);
    for i in 0..d {
        out[i] += y[i] + f[i] * delta;
    }
}

/// A scheme trajectory together with the grid driver that produced it.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub trajectory: GridPath,
    pub driver: RoughPathGrid,
    pub delta: f64,
}

impl SchemeRun {
    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        self.trajectory.value(k)
    }
}

/// Iterates the scheme on the driver's grid from `y0`, up to `horizon` (time since the start) or
/// the end of the driver.
pub fn simulate(model: &SystemModel, rp: &RoughPathGrid, y0: &[f64], horizon: Option<f64>) -> Result<SchemeRun> {
    let (d, m) = (model.dim(), model.noise_dim());
    if y0.len() != d || rp.dim() != m {
        return Err(Error::domain(format!(
            "state has {} components and driver {}; model expects {d} and {m}",
            y0.len(),
            rp.dim()
        )));
    }
    let delta = rp.path().step();
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!("grid step {delta} outside (0, 1]")));
    }
    let steps = match horizon {
        Some(h) => {
            let k = (h / delta).round() as usize;
            if k == 0 || k >= rp.len() || ((k as f64) * delta - h).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::domain(format!("horizon {h} is not a grid instant of the driver")));
            }
            k
        }
        None => rp.len() - 1,
    };
    let mut st = DiffusionStepper::new(d, m);
    let mut values = Vec::with_capacity((steps + 1) * d);
    values.extend_from_slice(y0);
    let (mut x, mut xx, mut next) = (vec![0.0; m], vec![0.0; m * m], vec![0.0; d]);
    for k in 0..steps {
        rp.path().increment_into(k, k + 1, &mut x);
        rp.area_into(k, k + 1, &mut xx);
        step_into(model, &mut st, &values[k * d..(k + 1) * d], &x, &xx, delta, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("scheme state is not finite after step {}", k + 1)));
        }
        values.extend_from_slice(&next);
    }
    let times = rp.path().times()[..=steps].to_vec();
    let driver = if steps + 1 == rp.len() {
        rp.clone()
    } else {
        rp.restrict(crate::rough::Window::new(0, steps)?)?
    };
    Ok(SchemeRun {
        trajectory: GridPath::new(times, values, d)?,
        driver,
        delta,
    })
}

/// Reference trajectory obtained by pullback: several starts are run over `burn_steps`, must agree
/// to `tol` at the end of the burn-in, and the first run is returned from there on, re-timed to
/// start at 0 and driven by the shifted driver.
#[derive(Debug, Clone)]
pub struct BurnIn {
    pub reference: SchemeRun,
    /// Largest distance between the starts' states at the end of the burn-in.
    pub spread: f64,
}

pub fn burn_in(
    model: &SystemModel,
    rp: &RoughPathGrid,
    burn_steps: usize,
    starts: &[Vec<f64>],
    tol: f64,
) -> Result<BurnIn> {
    if starts.is_empty() {
        return Err(Error::domain("burn-in needs at least one start"));
    }
    if burn_steps + 1 >= rp.len() {
        return Err(Error::domain("burn-in leaves no trajectory"));
    }
    let runs: Vec<SchemeRun> = starts
        .iter()
        .map(|s| simulate(model, rp, s, None))
        .collect::<Result<_>>()?;
    let mut spread = 0.0f64;
    for a in &runs {
        for b in &runs {
            spread = spread.max(dist(a.state(burn_steps), b.state(burn_steps)));
        }
    }
    if spread > tol {
        return Err(Error::numeric(format!(
            "burn-in starts still {spread:.3e} apart after {burn_steps} steps (tolerance {tol:.1e})"
        )));
    }
    let d = model.dim();
    let first = &runs[0];
    let values = first.trajectory.values()[burn_steps * d..].to_vec();
    let delta = first.delta;
    Ok(BurnIn {
        reference: SchemeRun {
            trajectory: GridPath::uniform(0.0, delta, values, d)?,
            driver: wiener_shift_index(rp, burn_steps)?,
            delta,
        },
        spread,
    })
}
