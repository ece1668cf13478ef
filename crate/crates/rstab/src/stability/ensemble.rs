//! Samples of a stationary solution: the value `a(ω)` and, when available, the trajectory
//! `a(θ_t ω)` together with the driver that produced it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::SystemModel;
use crate::linalg::{dist, norm};
use crate::mc::{estimate, Estimate};
use crate::noise::{sample_lift, NoiseSpec};
use crate::rough::{GridPath, RoughPathGrid};
use crate::schemes::{burn_in, step, SchemeRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    BurnIn,
}

#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub seed: u64,
    pub initial: Vec<f64>,
    /// `a(θ_t ω)` on the driver's grid, starting at `t = 0`.
    pub trajectory: Option<GridPath>,
    pub driver: Option<RoughPathGrid>,
}

impl EnsembleMember {
    /// The member as a scheme run, when it carries a trajectory and a driver.
    pub fn scheme_run(&self) -> Option<SchemeRun> {
        let (trajectory, driver) = (self.trajectory.as_ref()?, self.driver.as_ref()?);
        Some(SchemeRun {
            trajectory: trajectory.clone(),
            driver: driver.clone(),
            delta: driver.path().step(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct StationaryEnsemble {
    pub members: Vec<EnsembleMember>,
    pub provenance: Provenance,
}

impl StationaryEnsemble {
    pub fn closed_form(members: Vec<EnsembleMember>) -> Result<Self> {
        Self::checked(members, Provenance::ClosedForm)
    }

    /// `n` copies of a deterministic point, e.g. an equilibrium of the drift where `g` vanishes.
    pub fn constant(point: &[f64], n: usize) -> Result<Self> {
        let members = (0..n as u64)
            .map(|seed| EnsembleMember {
                seed,
                initial: point.to_vec(),
                trajectory: None,
                driver: None,
            })
            .collect();
        Self::checked(members, Provenance::ClosedForm)
    }

    /// Pullback burn-in of the scheme on `n` independent drivers from `noise`. Each driver covers
    /// the burn-in followed by the kept horizon; the starts must merge to `tol`.
    pub fn burn_in(
        model: &SystemModel,
        noise: &NoiseSpec,
        n: usize,
        burn_time: f64,
        starts: &[Vec<f64>],
        tol: f64,
    ) -> Result<Self> {
        noise.validate()?;
        let burn_steps = (burn_time / noise.step()).round() as usize;
        if burn_steps == 0 || burn_steps >= noise.fine_steps {
            return Err(Error::config("burn_time", "must lie strictly inside the noise horizon"));
        }
        let members = (0..n)
            .into_par_iter()
            .map(|i| {
                let spec = noise.replicate(i);
                let rp = sample_lift(&spec)?;
                let b = burn_in(model, &rp, burn_steps, starts, tol)?;
                Ok(EnsembleMember {
                    seed: spec.seed,
                    initial: b.reference.state(0).to_vec(),
                    trajectory: Some(b.reference.trajectory),
                    driver: Some(b.reference.driver),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::checked(members, Provenance::BurnIn)
    }

    fn checked(members: Vec<EnsembleMember>, provenance: Provenance) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::domain("empty ensemble"));
        }
        let d = members[0].initial.len();
        for m in &members {
            if m.initial.len() != d || m.initial.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("ensemble member {} is malformed", m.seed)));
            }
            if let (Some(t), Some(rp)) = (&m.trajectory, &m.driver) {
                if t.len() != rp.len() || t.dim() != d || t.value(0) != m.initial.as_slice() {
                    return Err(Error::domain(format!(
                        "ensemble member {} trajectory does not match its driver or start",
                        m.seed
                    )));
                }
            }
        }
        Ok(StationaryEnsemble { members, provenance })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].initial.len()
    }

    /// `Ê ‖a‖^ρ`.
    pub fn moment(&self, rho: f64) -> Estimate {
        let xs: Vec<f64> = self.members.iter().map(|m| norm(&m.initial).powf(rho)).collect();
        estimate(&xs)
    }

    /// Ensemble mean of `h(a(ω))`.
    pub fn mean_of(&self, h: impl Fn(&[f64]) -> Result<f64> + Sync) -> Result<Estimate> {
        let xs = self
            .members
            .par_iter()
            .map(|m| h(&m.initial))
            .collect::<Result<Vec<f64>>>()?;
        Ok(estimate(&xs))
    }

    /// Largest one-step defect `‖a_{k+1} − S(a_k)‖` of the scheme map `S` along the stored
    /// trajectories, or `None` when no member carries one.
    pub fn scheme_defect(&self, model: &SystemModel) -> Option<f64> {
        let m = model.noise_dim();
        let mut worst: Option<f64> = None;
        for mem in &self.members {
            let (Some(t), Some(rp)) = (&mem.trajectory, &mem.driver) else {
                continue;
            };
            let (mut x, mut xx) = (vec![0.0; m], vec![0.0; m * m]);
            let delta = rp.path().step();
            let mut w = 0.0f64;
            for k in 0..t.len() - 1 {
                rp.path().increment_into(k, k + 1, &mut x);
                rp.area_into(k, k + 1, &mut xx);
                w = w.max(dist(t.value(k + 1), &step(model, t.value(k), &x, &xx, delta)));
            }
            worst = Some(worst.map_or(w, |v| v.max(w)));
        }
        worst
    }
}
