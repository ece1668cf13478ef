//! FitzHugh–Nagumo neuron `v̇ = v − v³/3 − w + I`, `ẇ = ε(v − μw + J)` with a bounded
//! tanh-saturated diffusion whose size is a single dial.

use nalgebra::{DMatrix, Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    cg_constant, ell, optimal_coordinate_change, CoordinateChange, DiffusionSpec, DriftSpec, ModelConfig,
    SystemModel,
};
use crate::linalg::dist;
use crate::mc::{derive_seed, spearman};
use crate::noise::NoiseSpec;
use crate::rough::GridPath;
use crate::schemes::simulate;
use crate::stability::{
    criterion_continuous, fit_decay, CriterionParams, EnsembleMember, Frame, StabilityReport, StationaryEnsemble,
    Verdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FhnParams {
    pub i_ext: f64,
    pub mu: f64,
    pub j: f64,
    pub eps: f64,
}

impl Default for FhnParams {
    fn default() -> Self {
        FhnParams {
            i_ext: 0.265,
            mu: 0.75,
            j: 0.7,
            eps: 0.08,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub v: f64,
    pub w: f64,
    /// Max-norm of the drift at `(v, w)`.
    pub residual: f64,
    pub iterations: usize,
    /// Discriminant of the cubic in `v` left after eliminating `w`; negative means one real root.
    pub discriminant: f64,
    /// Eigenvalues of `Df` as `(re, im)`.
    pub eigenvalues: [(f64, f64); 2],
}

impl FixedPoint {
    pub fn point(&self) -> [f64; 2] {
        [self.v, self.w]
    }
}

/// Newton from `(−1, −0.4)` on the nullcline system.
pub fn fhn_fixed_point(params: &FhnParams) -> Result<FixedPoint> {
    let FhnParams { i_ext, mu, j, eps } = *params;
    if mu == 0.0 || eps == 0.0 {
        return Err(Error::domain("μ and ε must be nonzero"));
    }
    let f = |x: &Vector2<f64>| Vector2::new(x[0] - x[0].powi(3) / 3.0 - x[1] + i_ext, x[0] - mu * x[1] + j);
    let mut x = Vector2::new(-1.0, -0.4);
    let mut iterations = 0;
    while f(&x).amax() > 1e-14 {
        if iterations == 50 {
            return Err(Error::numeric("Newton did not converge to the fixed point"));
        }
        let jac = Matrix2::new(1.0 - x[0] * x[0], -1.0, 1.0, -mu);
        let dx = jac
            .lu()
            .solve(&f(&x))
            .ok_or_else(|| Error::numeric("singular Jacobian in Newton"))?;
        x -= dx;
        iterations += 1;
    }
    let residual = f(&x).amax().max((eps * (x[0] - mu * x[1] + j)).abs());
    if residual > 1e-12 {
        return Err(Error::numeric(format!("fixed point residual {residual:e} above 1e-12")));
    }
    // w = (v + J)/μ turns the first equation into v³ + a v + b = 0
    let a = 3.0 / mu - 3.0;
    let b = 3.0 * j / mu - 3.0 * i_ext;
    let discriminant = -(4.0 * a.powi(3) + 27.0 * b * b);
    let tr = 1.0 - x[0] * x[0] - eps * mu;
    let det = -(1.0 - x[0] * x[0]) * eps * mu + eps;
    let disc = tr * tr / 4.0 - det;
    let eigenvalues = if disc >= 0.0 {
        [(tr / 2.0 + disc.sqrt(), 0.0), (tr / 2.0 - disc.sqrt(), 0.0)]
    } else {
        [(tr / 2.0, (-disc).sqrt()), (tr / 2.0, -(-disc).sqrt())]
    };
    Ok(FixedPoint {
        v: x[0],
        w: x[1],
        residual,
        iterations,
        discriminant,
        eigenvalues,
    })
}

/// The system with `g(y) = c (diag(tanh v, tanh w) + I)`, driven by two noise components.
pub fn fhn_model(params: &FhnParams, c: f64) -> Result<SystemModel> {
    ModelConfig {
        drift: DriftSpec::Fhn {
            i_ext: params.i_ext,
            mu: params.mu,
            j: params.j,
            eps: params.eps,
        },
        diffusion: DiffusionSpec::Tanh {
            scale: c,
            weights: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            offset: Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            center: None,
        },
        bounds: None,
        domain: None,
        lipschitz: None,
        growth: None,
        dissipativity: None,
    }
    .build()
}

/// The ensemble written in the coordinates `z = P y`; drivers are unchanged.
pub fn transform_ensemble(ensemble: &StationaryEnsemble, cc: &CoordinateChange) -> Result<StationaryEnsemble> {
    let members = ensemble
        .members
        .iter()
        .map(|m| {
            Ok(EnsembleMember {
                seed: m.seed,
                initial: cc.to_z(&m.initial),
                trajectory: m.trajectory.as_ref().map(|t| transform_path(t, cc)).transpose()?,
                driver: m.driver.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StationaryEnsemble {
        members,
        provenance: ensemble.provenance,
    })
}

fn transform_path(path: &GridPath, cc: &CoordinateChange) -> Result<GridPath> {
    let values = (0..path.len()).flat_map(|k| cc.to_z(path.value(k))).collect();
    GridPath::new(path.times().to_vec(), values, path.dim())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FhnConfig {
    pub params: FhnParams,
    /// Target values of `C_g` in the original coordinates.
    pub levels: Vec<f64>,
    pub hurst: f64,
    pub delta: f64,
    pub burn_time: f64,
    /// Length of the stored stationary trajectories.
    pub horizon: f64,
    /// Burn-in starts are the fixed point shifted by this much along each axis.
    pub start_offset: f64,
    pub tol: f64,
    pub n_ensemble: usize,
    pub n_paths: usize,
    /// Size of the perturbation of `a(ω)` in the transformed coordinates.
    pub perturbation: f64,
    pub seed: u64,
    pub criterion: CriterionParams,
}

impl Default for FhnConfig {
    fn default() -> Self {
        FhnConfig {
            params: FhnParams::default(),
            levels: vec![1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2],
            hurst: 0.45,
            delta: 1.0 / 64.0,
            burn_time: 400.0,
            horizon: 100.0,
            start_offset: 0.01,
            tol: 1e-5,
            n_ensemble: 40,
            n_paths: 100,
            perturbation: 1e-3,
            seed: 0,
            criterion: CriterionParams {
                frame: Frame::LyapunovTransformed,
                ..CriterionParams::default()
            },
        }
    }
}

impl FhnConfig {
    pub fn noise(&self) -> NoiseSpec {
        let horizon = self.burn_time + self.horizon;
        NoiseSpec::fbm(self.hurst, 2, horizon, (horizon / self.delta).round() as usize, self.seed)
    }

    fn starts(&self, a: [f64; 2]) -> Vec<Vec<f64>> {
        let e = self.start_offset;
        vec![vec![a[0] + e, a[1]], vec![a[0], a[1] - e], vec![a[0] - e, a[1] + e]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FhnLevel {
    pub c_g: f64,
    pub scale: f64,
    /// `C_g` of the transformed diffusion, which the criterion uses.
    pub c_g_transformed: f64,
    pub report: StabilityReport,
    /// `max_ω ‖a(ω) − a*‖`.
    pub distance: f64,
    pub mean_distance: f64,
    /// Fraction of perturbed trajectories with a positive fitted rate in the transformed frame.
    pub decay_fraction: f64,
    /// `(t, mean log‖z_t − a_t‖)` over the perturbed trajectories.
    pub log_distance: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FhnReport {
    pub config: FhnConfig,
    pub fixed_point: FixedPoint,
    pub ell_raw: f64,
    pub ell_transformed: f64,
    pub lyapunov_residual: f64,
    /// Distance to `a*` of the noise-free burn-in from the shifted starts.
    pub noise_free_distance: f64,
    pub levels: Vec<FhnLevel>,
    /// Rank correlation between `C_g` and the distance to `a*` across levels.
    pub spearman: f64,
    /// Largest passing level below the smallest failing one, when both exist.
    pub boundary: (Option<f64>, Option<f64>),
}

/// Fixed point and frames, then per `C_g` level: burn-in ensemble, the criterion in the
/// transformed frame, distance to the fixed point and decay of perturbed trajectories.
pub fn run_fhn(cfg: &FhnConfig) -> Result<FhnReport> {
    if cfg.levels.is_empty() || cfg.levels.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::config("levels", "need at least one positive C_g level"));
    }
    let fp = fhn_fixed_point(&cfg.params)?;
    let a_star = fp.point();
    let unit_model = fhn_model(&cfg.params, 1.0)?;
    let unit_cg = cg_constant(&unit_model.bounds)?;
    let cc = optimal_coordinate_change(&unit_model, &a_star)?;
    let ell_raw = ell(&unit_model, &a_star)?;
    let z_star = cc.to_z(&a_star);
    let ell_transformed = ell(&cc.model, &z_star)?;
    let lyapunov_residual = cc.residual(&DMatrix::from(unit_model.df(&a_star)));

    let noise = cfg.noise();
    let starts = cfg.starts(a_star);
    let quiet = StationaryEnsemble::burn_in(
        &unit_model.without_noise(),
        &noise.with_horizon(cfg.burn_time + 1.0, ((cfg.burn_time + 1.0) / cfg.delta).round() as usize),
        1,
        cfg.burn_time,
        &starts,
        cfg.tol,
    )?;
    let noise_free_distance = dist(&quiet.members[0].initial, &a_star);

    let mut levels = Vec::with_capacity(cfg.levels.len());
    for (idx, &c_g) in cfg.levels.iter().enumerate() {
        let scale = c_g / unit_cg;
        let model = unit_model.scale_diffusion(scale);
        let level_noise = noise.with_seed(derive_seed(cfg.seed, idx as u64));
        let ensemble = StationaryEnsemble::burn_in(&model, &level_noise, cfg.n_ensemble, cfg.burn_time, &starts, cfg.tol)?;
        let zc = optimal_coordinate_change(&model, &a_star)?;
        let z_ensemble = transform_ensemble(&ensemble, &zc)?;
        let unit = NoiseSpec::fbm(
            cfg.hurst,
            2,
            1.0,
            (1.0 / cfg.delta).round() as usize,
            derive_seed(cfg.seed, 1000 + idx as u64),
        );
        let report = criterion_continuous(&zc.model, &cfg.criterion, &z_ensemble, &unit, cfg.n_paths)?;
        let ds: Vec<f64> = ensemble.members.iter().map(|m| dist(&m.initial, &a_star)).collect();
        let perturbed = ensemble
            .members
            .par_iter()
            .map(|m| {
                let run = m.scheme_run().expect("burn-in members carry trajectories");
                let mut z0 = zc.to_z(&m.initial);
                z0[0] += cfg.perturbation;
                let y = simulate(&model, &run.driver, &zc.to_y(&z0), None)?;
                let (zy, za) = (transform_path(&y.trajectory, &zc)?, transform_path(&run.trajectory, &zc)?);
                let fit = fit_decay(&zy, &za)?;
                Ok((!fit.inconclusive && fit.mu > 0.0, zy, za))
            })
            .collect::<Result<Vec<_>>>()?;
        let decaying = perturbed.iter().filter(|p| p.0).count();
        levels.push(FhnLevel {
            c_g,
            scale,
            c_g_transformed: cg_constant(&zc.model.bounds)?,
            report,
            distance: ds.iter().copied().fold(0.0, f64::max),
            mean_distance: ds.iter().sum::<f64>() / ds.len() as f64,
            decay_fraction: decaying as f64 / perturbed.len() as f64,
            log_distance: super::pitchfork::mean_log_distance(perturbed.iter().map(|p| (&p.1, &p.2))),
        });
    }
    let cgs: Vec<f64> = levels.iter().map(|l| l.c_g).collect();
    let dists: Vec<f64> = levels.iter().map(|l| l.distance).collect();
    let spearman = if levels.len() > 1 { spearman(&cgs, &dists) } else { f64::NAN };
    Ok(FhnReport {
        config: cfg.clone(),
        fixed_point: fp,
        ell_raw,
        ell_transformed,
        lyapunov_residual,
        noise_free_distance,
        boundary: boundary(&levels),
        levels,
        spearman,
    })
}

fn boundary(levels: &[FhnLevel]) -> (Option<f64>, Option<f64>) {
    let mut sorted: Vec<&FhnLevel> = levels.iter().collect();
    sorted.sort_by(|a, b| a.c_g.total_cmp(&b.c_g));
    let first_fail = sorted.iter().find(|l| l.report.verdict == Verdict::Fail).map(|l| l.c_g);
    let last_pass = sorted
        .iter()
        .filter(|l| l.report.verdict == Verdict::Pass && first_fail.map_or(true, |f| l.c_g < f))
        .map(|l| l.c_g)
        .last();
    (last_pass, first_fail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_of_the_default_parameters() {
        let fp = fhn_fixed_point(&FhnParams::default()).unwrap();
        // v³ + v + 2.005 = 0
        assert!((fp.v.powi(3) + fp.v + 2.005).abs() < 1e-12);
        // real root of the cubic from a companion-matrix eigensolve
        assert!((fp.v + 1.001_248_829_831_128).abs() < 1e-12);
        assert!((fp.w + 0.401_665_106_441_504_6).abs() < 1e-12);
        assert!(fp.residual <= 1e-12);
        assert!(fp.discriminant < 0.0);
        assert!(fp.eigenvalues.iter().all(|e| e.0 < 0.0));
        let m = fhn_model(&FhnParams::default(), 0.0).unwrap();
        assert!(m.f(&fp.point()).iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn lyapunov_frame_flips_the_sign_of_ell() {
        let fp = fhn_fixed_point(&FhnParams::default()).unwrap();
        let m = fhn_model(&FhnParams::default(), 1.0).unwrap();
        let cc = optimal_coordinate_change(&m, &fp.point()).unwrap();
        assert!(ell(&m, &fp.point()).unwrap() > 0.0);
        let z = ell(&cc.model, &cc.to_z(&fp.point())).unwrap();
        let lmax = cc.q.symmetric_eigen().eigenvalues.max();
        assert!(z < 0.0);
        assert!((z + 0.5 / lmax).abs() < 1e-9, "{z} vs {}", -0.5 / lmax);
    }

    #[test]
    fn diffusion_constant_is_linear_in_the_scale() {
        let p = FhnParams::default();
        let one = cg_constant(&fhn_model(&p, 1.0).unwrap().bounds).unwrap();
        let half = cg_constant(&fhn_model(&p, 0.5).unwrap().bounds).unwrap();
        assert!((half - 0.5 * one).abs() < 1e-15);
        let g = fhn_model(&p, 0.5).unwrap().g(&[0.0, 0.0]);
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let p = FhnParams {
            mu: 0.0,
            ..FhnParams::default()
        };
        assert!(fhn_fixed_point(&p).is_err());
    }
}
