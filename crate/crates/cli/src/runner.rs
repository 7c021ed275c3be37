//! Experiment dispatch: builds inputs from the config, runs the library,
//! writes records/summary CSVs and the manifest, and maps verdicts to exit
//! status.

use crate::config::{Config, ConfigError};
use crate::emit::{config_hash, fmt_f, run_dir, Csv, Manifest};
use fractint_core::construct::Construction;
use fractint_core::diffeo::Diffeo;
use fractint_core::dimension::minkowski_dim;
use fractint_core::energy::{energy_fourier, energy_spatial};
use fractint_core::fourier::{beta_estimate, fourier_decay, DirectionSampling};
use fractint_core::grid::{CellSet, GridSpec};
use fractint_core::hyperplane::hyperplane_exponent;
use fractint_core::lab::{
    default_t_grid, dilation_experiment, exceptional_set_dim, inverse_experiment,
    level_set_experiment, maximal_experiment, rotation_experiment, translation_experiment,
    unit_directions, CoveringRecord, ExperimentParams, ExperimentResult, InverseParams,
    RotationSource, Verdict, XSource,
};
use fractint_core::mapspec::{MapSpec, PhiFamily};
use fractint_core::measure::{dyadic_radii, DiscreteMeasure};
use fractint_core::predict::{predict, BoundInputs, BoundKind, Thresholds};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Library(String),
    Io(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Library(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

fn lib<E: fmt::Display>(e: E) -> RunError {
    RunError::Library(e.to_string())
}

/// Exit-status relevant outcome of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Clean,
    BoundViolated,
}

pub struct RunRequest<'a> {
    pub experiment: String,
    pub config: &'a Config,
    pub seed: u64,
    pub out: PathBuf,
    pub force: bool,
}

struct Ctx<'a> {
    cfg: &'a Config,
    grid: GridSpec,
    seed: u64,
}

impl<'a> Ctx<'a> {
    fn construction(&self, section: &str) -> Result<Construction, RunError> {
        Ok(self.cfg.parse_construction(section)?)
    }

    fn set(&self, section: &str) -> Result<(Construction, CellSet), RunError> {
        let c = self.construction(section)?;
        let set = c.build(&self.grid).map_err(lib)?;
        Ok((c, set))
    }

    fn measure(&self, section: &str) -> Result<(Construction, DiscreteMeasure), RunError> {
        let c = if self.cfg.has_section(section) {
            self.construction(section)?
        } else {
            Construction::Box
        };
        let mu = c.build_measure(&self.grid).map_err(lib)?;
        Ok((c, mu))
    }

    fn ladder(&self) -> Result<Vec<u32>, RunError> {
        Ok(self.cfg.parse_u32_list("params", "ladder")?)
    }

    fn params(&self) -> Result<ExperimentParams, RunError> {
        let mut p = ExperimentParams::new(
            self.ladder()?,
            self.cfg.parse_num_or("params", "samples", 128usize)?,
            self.seed,
        );
        p.margin = self.cfg.parse_num_or("params", "margin", 0.15f64)?;
        Ok(p)
    }

    fn x_source<'m>(&self, mu: &'m DiscreteMeasure) -> Result<XSource<'m>, RunError> {
        let mode = self.cfg.get("params", "sampling").unwrap_or("tent");
        Ok(match mode {
            "tent" => {
                let per_axis = self.cfg.parse_num_or("params", "tent-n", 12usize)?;
                let side = self.grid.box_side() as f64;
                XSource::TentGrid { per_axis, lo: [0.0; 3], hi: [side, side, side] }
            }
            "grid" => XSource::DyadicGrid {
                kx: self.cfg.parse_num_or("params", "kx", 5u32)?,
                jitter: true,
            },
            "measure" => XSource::FromMeasure { mu, jitter: true },
            other => {
                return Err(RunError::Config(ConfigError {
                    line: None,
                    message: format!("unknown sampling mode `{other}`"),
                }))
            }
        })
    }

    /// Design-dimension defaults with config overrides.
    fn bound_inputs(
        &self,
        a: Option<&Construction>,
        b: Option<&Construction>,
        mu: Option<&Construction>,
    ) -> Result<BoundInputs, RunError> {
        let d = self.grid.d();
        let mut i = BoundInputs { d, ..Default::default() };
        if let Some(a) = a {
            i.s_a = Some(self.cfg.parse_num_or("params", "s-a", a.design_dimension(d))?);
        }
        if let Some(b) = b {
            i.s_b = Some(self.cfg.parse_num_or("params", "s-b", b.design_dimension(d))?);
        }
        if let Some(mu) = mu {
            i.alpha = Some(self.cfg.parse_num_or("params", "alpha", mu.design_dimension(d))?);
        }
        Ok(i)
    }
}

pub fn run(req: &RunRequest) -> Result<RunOutcome, RunError> {
    let hash = config_hash(&req.config.canonical(), req.seed, VERSION);
    let dir = run_dir(&req.out, &req.experiment, &hash);
    if !req.force && dir.join("manifest.txt").exists() {
        let entries = crate::emit::read_manifest(&dir.join("manifest.txt"))?;
        let verdict = entries
            .iter()
            .find(|(k, _)| k == "verdict")
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| "informational".into());
        println!("cached: {} ({})", dir.display(), verdict);
        return Ok(if verdict == "bound-violated" {
            RunOutcome::BoundViolated
        } else {
            RunOutcome::Clean
        });
    }
    fs::create_dir_all(&dir)?;
    let start = Instant::now();

    let grid = GridSpec::new(
        req.config.parse_num_or("grid", "d", 2usize)?,
        req.config.parse_num("grid", "k")?,
        req.config.parse_num_or("grid", "box", 1u32)?,
    )
    .map_err(lib)?;
    let ctx = Ctx { cfg: req.config, grid, seed: req.seed };
    let mut manifest = Manifest::new(&hash, &req.experiment, req.seed, VERSION);

    let outcome = match req.experiment.as_str() {
        "construct" => run_construct(&ctx, &dir, &mut manifest)?,
        "dims" => run_dims(&ctx, &dir, &mut manifest)?,
        "energy" => run_energy(&ctx, &dir, &mut manifest)?,
        "fourier" => run_fourier(&ctx, &dir, &mut manifest)?,
        "hyperplane" => run_hyperplane(&ctx, &dir, &mut manifest)?,
        "intersect-translate" | "intersect-rotate" | "intersect-dilate" => {
            run_intersect(&ctx, &req.experiment, &dir, &mut manifest)?
        }
        "levelset" | "maximal" | "two-surface" => {
            run_levelset(&ctx, &req.experiment, &dir, &mut manifest)?
        }
        "inverse" => run_inverse(&ctx, &dir, &mut manifest)?,
        "count" => run_count(&ctx, &dir, &mut manifest)?,
        "average-slope" => run_average_slope(&ctx, &dir, &mut manifest)?,
        other => {
            return Err(RunError::Config(ConfigError {
                line: None,
                message: format!("unknown experiment `{other}`"),
            }))
        }
    };
    manifest.write_to(&dir, start.elapsed().as_millis())?;
    println!("wrote {}", dir.display());
    Ok(outcome)
}

fn run_construct(ctx: &Ctx, dir: &Path, manifest: &mut Manifest) -> Result<RunOutcome, RunError> {
    let (c, set) = ctx.set("a")?;
    let text = fs::File::create(dir.join("set.txt"))?;
    set.write_text(text).map_err(lib)?;
    let bin = fs::File::create(dir.join("set.bin"))?;
    set.write_binary(bin).map_err(lib)?;
    manifest.add_file("set.txt");
    manifest.add_file("set.bin");
    manifest.set("label", &c.label());
    manifest.set("cells", &set.len().to_string());
    manifest.set_f("design_dimension", c.design_dimension(ctx.grid.d()));
    manifest.set("verdict", "informational");
    Ok(RunOutcome::Clean)
}

fn run_dims(ctx: &Ctx, dir: &Path, manifest: &mut Manifest) -> Result<RunOutcome, RunError> {
    let (c, set) = ctx.set("a")?;
    let ladder = ctx.ladder()?;
    let fit = minkowski_dim(&set, &ladder).map_err(lib)?;
    let mut summary = Csv::new("summary.csv", "j,epsilon,count");
    for &j in &ladder {
        let n = fractint_core::dimension::box_count(&set, j).map_err(lib)?;
        summary.row(&[j.to_string(), fmt_f((-(j as f64)).exp2()), n.to_string()]);
    }
    summary.write_to(dir)?;
    manifest.add_file(summary.name());
    let mut est = Csv::new("estimator.csv", "estimator,label,slope,residual,scale_lo,scale_hi");
    est.row(&[
        "minkowski-dim".into(),
        c.label(),
        fmt_f(fit.slope),
        fmt_f(fit.residual),
        fmt_f(fit.scale_range.0),
        fmt_f(fit.scale_range.1),
    ]);
    est.write_to(dir)?;
    manifest.add_file(est.name());
    manifest.set("label", &c.label());
    manifest.set_f("slope", fit.slope);
    manifest.set_f("residual", fit.residual);
    manifest.set_f("design_dimension", c.design_dimension(ctx.grid.d()));
    manifest.set("verdict", "informational");
    Ok(RunOutcome::Clean)
}

fn run_energy(ctx: &Ctx, dir: &Path, manifest: &mut Manifest) -> Result<RunOutcome, RunError> {
    let (c, mu) = ctx.measure("a")?;
    let s: f64 = ctx.cfg.parse_num("params", "s")?;
    let cap = ctx
        .cfg
        .parse_num_or("params", "xi-max", 1u32 << (ctx.grid.k().saturating_sub(1)).min(10))?;
    let spatial = energy_spatial(&mu, s).map_err(lib)?;
    let fourier = energy_fourier(&mu, s, cap).map_err(lib)?;
    let ratio = spatial.value / fourier.value.max(f64::MIN_POSITIVE);
    let mut est = Csv::new("estimator.csv", "estimator,label,s,value");
    est.row(&["energy-spatial".into(), c.label(), fmt_f(s), fmt_f(spatial.value)]);
    est.row(&["energy-fourier".into(), c.label(), fmt_f(s), fmt_f(fourier.value)]);
    est.write_to(dir)?;
    manifest.add_file(est.name());
    manifest.set("label", &c.label());
    manifest.set_f("spatial", spatial.value);
    manifest.set_f("fourier", fourier.value);
    manifest.set_f("ratio", ratio);
    manifest.set("verdict", "informational");
    Ok(RunOutcome::Clean)
}

fn run_fourier(ctx: &Ctx, dir: &Path, manifest: &mut Manifest) -> Result<RunOutcome, RunError> {
    let (c, mu) = ctx.measure("a")?;
    let shells = ctx.cfg.parse_u32_list("params", "shells")?;
    let (lo, hi) = (shells[0], *shells.last().unwrap());
    let count = ctx.cfg.parse_num_or("params", "directions", 64usize)?;
    let mode = match ctx.cfg.get("params", "directions-mode").unwrap_or("sphere-axes") {
        "axes" => DirectionSampling::Axes,
        "sphere" => DirectionSampling::Sphere { count },
        _ => DirectionSampling::SphereAndAxes { count },
    };
    let radii = ctx.cfg.parse_num_or("params", "radii-per-shell", 4usize)?;
    let fit = fourier_decay(&mu, lo, hi, mode, radii, ctx.seed).map_err(lib)?;
    let beta = beta_estimate(&fit);
    let mut est = Csv::new("estimator.csv", "estimator,label,slope,beta,residual,scale_lo,scale_hi");
    est.row(&[
        "fourier-decay".into(),
        c.label(),
        fmt_f(fit.slope),
        fmt_f(beta),
        fmt_f(fit.residual),
        fmt_f(fit.scale_range.0),
        fmt_f(fit.scale_range.1),
    ]);
    est.write_to(dir)?;
    manifest.add_file(est.name());
    manifest.set("label", &c.label());
    manifest.set_f("slope", fit.slope);
    manifest.set_f("beta", beta);
    manifest.set_f("residual", fit.residual);
    manifest.set("verdict", "informational");
    Ok(RunOutcome::Clean)
}

fn run_hyperplane(ctx: &Ctx, dir: &Path, manifest: &mut Manifest) -> Result<RunOutcome, RunError> {
    let (c, mu) = ctx.measure("a")?;
    let exps = ctx.cfg.parse_u32_list("params", "deltas")?;
    let deltas = dyadic_radii(exps[0], *exps.last().unwrap());
    let n_dirs = ctx.cfg.parse_num_or("params", "directions", 32usize)?;
    let origin = match ctx.cfg.get("params", "origin") {
        None | Some("box-center") => None,
        Some(raw) => {
            let v = ctx.cfg.parse_f64_list("params", "origin")?;
            let _ = raw;
            let mut p = [0.0; 3];
            for (slot, value) in p.iter_mut().zip(&v) {
                *slot = *value;
            }
            Some(p)
        }
    };
    let profile = hyperplane_exponent(&mu, n_dirs, &deltas, origin, ctx.seed).map_err(lib)?;
    let mut summary = Csv::new("summary.csv", "delta,sup_mass,w1,w2,w3");
    for (delta, sup, w) in &profile.per_delta {
        summary.row(&[fmt_f(*delta), fmt_f(*sup), fmt_f(w[0]), fmt_f(w[1]), fmt_f(w[2])]);
    }
    summary.write_to(dir)?;
    manifest.add_file(summary.name());
    manifest.set("label", &c.label());
    manifest.set_f("slope", profile.fit.slope);
    manifest.set_f("residual", profile.fit.residual);
    manifest.set("verdict", "informational");
    Ok(RunOutcome::Clean)
}

fn write_records(dir: &Path, records: &[CoveringRecord]) -> std::io::Result<String> {
    let mut csv = Csv::new(
        "records.csv",
        "sample,rotation,t,x1,x2,x3,y1,y2,y3,j,count",
    );
    for r in records {
        let rot = r.params.rotation.map(|g| g.to_string()).unwrap_or_default();
        let t = r.params.t.map(fmt_f).unwrap_or_default();
        let x2 = r.params.x2.unwrap_or([f64::NAN; 3]);
        let x2s: Vec<String> = if r.params.x2.is_some() {
            x2.iter().map(|v| fmt_f(*v)).collect()
        } else {
            vec![String::new(), String::new(), String::new()]
        };
        for &(j, n) in &r.counts {
            csv.row(&[
                r.params.index.to_string(),
                rot.clone(),
                t.clone(),
                fmt_f(r.params.x[0]),
                fmt_f(r.params.x[1]),
                fmt_f(r.params.x[2]),
                x2s[0].clone(),
                x2s[1].clone(),
                x2s[2].clone(),
                j.to_string(),
                n.to_string(),
            ]);
        }
    }
    csv.write_to(dir)?;
    Ok(csv.name().to_string())
}

fn write_summary(
    dir: &Path,
    result: &ExperimentResult,
) -> std::io::Result<String> {
    let predicted = result.threshold.intersection_dim.unwrap_or(f64::NAN);
    let mut csv = Csv::new("summary.csv", "j,epsilon,average,predicted_exponent");
    for &(j, avg) in &result.averaged {
        csv.row(&[j.to_string(), fmt_f((-(j as f64)).exp2()), fmt_f(avg), fmt_f(predicted)]);
    }
    csv.write_to(dir)?;
    Ok(csv.name().to_string())
}

fn finish_experiment(
    ctx: &Ctx,
    dir: &Path,
    manifest: &mut Manifest,
    result: &ExperimentResult,
    theorem: &str,
    label: &str,
) -> Result<RunOutcome, RunError> {
    manifest.add_file(&write_records(dir, &result.records)?);
    manifest.add_file(&write_summary(dir, result)?);
    manifest.set("theorem", theorem);
    manifest.set("label", label);
    if let Some(p) = result.threshold.intersection_dim {
        manifest.set_f("predicted", p);
    }
    if let Some(e) = result.threshold.exceptional_dim {
        manifest.set_f("predicted_exceptional", e);
    }
    if let Some(fit) = &result.fit {
        manifest.set_f("fitted_slope", fit.slope);
        manifest.set_f("residual", fit.residual);
    }
    manifest.set_f("exceptional_fraction", result.exceptional_fraction);
    manifest.set(
        "hypothesis",
        if result.threshold.hypothesis_ok { "ok" } else { "violated" },
    );
    for w in &result.threshold.warnings {
        manifest.set("warning", w);
    }
    manifest.set("verdict", result.verdict.label());

    // optional exceptional-set analysis on grid sampling
    if ctx.cfg.get("params", "exceptional").map(|v| v == "true").unwrap_or(false) {
        let kx = ctx.cfg.parse_num_or("params", "kx", 5u32)?;
        let margin = ctx.cfg.parse_num_or("params", "exc-margin", result.margin)?;
        let report = exceptional_set_dim(result, kx, margin, ctx.grid.box_side(), ctx.grid.d())
            .map_err(lib)?;
        manifest.set_f("exceptional_measured_fraction", report.fraction);
        match &report.fit {
            Some(fit) => manifest.set_f("exceptional_dim", fit.slope),
            None => manifest.set("exceptional_dim", "empty"),
        }
    }
    Ok(if result.verdict == Verdict::BoundViolated {
        RunOutcome::BoundViolated
    } else {
        RunOutcome::Clean
    })
}

fn run_intersect(
    ctx: &Ctx,
    experiment: &str,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<RunOutcome, RunError> {
    let (ca, a) = ctx.set("a")?;
    let (cb, b) = ctx.set("b")?;
    let (cmu, mu) = ctx.measure("mu")?;
    let params = ctx.params()?;
    let src = ctx.x_source(&mu)?;
    let label = format!("{}|{}", ca.label(), cb.label());
    let mut inputs = ctx.bound_inputs(Some(&ca), Some(&cb), Some(&cmu))?;
    let (theorem, result) = match experiment {
        "intersect-translate" => {
            let bound = ctx.cfg.get("params", "bound").unwrap_or("translation");
            let (kind, name) = if bound == "fourier" {
                let default_beta = surface_beta(&cb, ctx.grid.d());
                inputs.beta = Some(ctx.cfg.parse_num_or("params", "beta", default_beta)?);
                (BoundKind::FourierTranslation, "fourier-translation")
            } else {
                (BoundKind::Translation, "translation")
            };
            let thr = predict(kind, &inputs).map_err(lib)?;
            let map = parse_diffeo(ctx)?;
            (name, translation_experiment(&a, &b, &map, &src, &params, thr).map_err(lib)?)
        }
        "intersect-rotate" => {
            let thr = predict(BoundKind::Rotation, &inputs).map_err(lib)?;
            let n_rot = ctx.cfg.parse_num_or("params", "rotations", 64usize)?;
            let rotations = if ctx.cfg.get("params", "rotations").map(|v| v == "identity").unwrap_or(false)
            {
                RotationSource::Explicit(vec![nalgebra_identity()])
            } else {
                RotationSource::Haar { count: n_rot }
            };
            (
                "rotation",
                rotation_experiment(&a, &b, &rotations, &src, &params, thr).map_err(lib)?,
            )
        }
        _ => {
            // measure the slab exponent of B first; it feeds the hypothesis
            let (_, mu_b) = ctx.measure("b")?;
            let exps = [ctx.grid.k().saturating_sub(6).max(2), ctx.grid.k().saturating_sub(2)];
            let deltas = dyadic_radii(exps[0], exps[1]);
            let profile =
                hyperplane_exponent(&mu_b, 32, &deltas, None, ctx.seed).map_err(lib)?;
            let s_b = inputs.s_b.unwrap_or(1.0);
            let h = (s_b - profile.fit.slope).max(0.0);
            inputs.h = Some(ctx.cfg.parse_num_or("params", "h", h)?);
            manifest.set_f("measured_h", h);
            let thr = predict(BoundKind::Dilation, &inputs).map_err(lib)?;
            let t_grid = match ctx.cfg.get("params", "t-grid") {
                Some(_) => {
                    let n: usize = ctx.cfg.parse_num("params", "t-grid")?;
                    if n <= 1 {
                        vec![1.0]
                    } else {
                        default_t_grid(n)
                    }
                }
                None => default_t_grid(16),
            };
            (
                "dilation",
                dilation_experiment(&a, &b, &t_grid, &src, &params, thr).map_err(lib)?,
            )
        }
    };
    finish_experiment(ctx, dir, manifest, &result, theorem, &label)
}

fn nalgebra_identity() -> fractint_core::nalgebra::Matrix3<f64> {
    fractint_core::nalgebra::Matrix3::identity()
}

fn surface_beta(c: &Construction, d: usize) -> f64 {
    use fractint_core::construct::SurfaceKind;
    match c {
        Construction::Surface(SurfaceKind::Superellipsoid(m)) => {
            2.0 * (d as f64 - 1.0) / *m as f64
        }
        Construction::Surface(_) => d as f64 - 1.0,
        _ => d as f64 - 1.0,
    }
}

fn parse_diffeo(ctx: &Ctx) -> Result<Diffeo, RunError> {
    match ctx.cfg.get("params", "map") {
        None | Some("identity") => Ok(Diffeo::Identity),
        Some("translate") => {
            let v = ctx.cfg.parse_f64_list("params", "map-offset")?;
            let mut p = [0.0; 3];
            for (slot, value) in p.iter_mut().zip(&v) {
                *slot = *value;
            }
            Ok(Diffeo::translation(p))
        }
        Some("polynomial") => {
            let mut coeffs = Diffeo::identity_coeffs();
            for (axis, slot) in coeffs.iter_mut().enumerate() {
                let key = format!("map-poly-axis{axis}");
                if ctx.cfg.get("params", &key).is_some() {
                    let v = ctx.cfg.parse_f64_list("params", &key)?;
                    for (c, value) in slot.iter_mut().zip(&v) {
                        *c = *value;
                    }
                }
            }
            Ok(Diffeo::Polynomial { coeffs })
        }
        Some(other) => Err(RunError::Config(ConfigError {
            line: None,
            message: format!("unknown map `{other}`"),
        })),
    }
}

fn run_levelset(
    ctx: &Ctx,
    experiment: &str,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<RunOutcome, RunError> {
    let (ca, a) = ctx.set("a")?;
    let params = ctx.params()?;
    let phi = ctx.cfg.parse_phi("phi")?;
    let t: f64 = ctx.cfg.parse_num_or("params", "t", 1.0)?;
    let (cmu, mu) = ctx.measure("mu")?;
    let mut inputs = ctx.bound_inputs(Some(&ca), None, Some(&cmu))?;
    let label = format!("{}|{}", ca.label(), phi.label());
    let (theorem, result) = match experiment {
        "two-surface" => {
            let phi2 = ctx.cfg.parse_phi("phi2")?;
            let t2: f64 = ctx.cfg.parse_num_or("params", "t2", t)?;
            let (cmu2, mu2) = ctx.measure("mu2")?;
            inputs.alpha2 =
                Some(ctx.cfg.parse_num_or("params", "alpha2", cmu2.design_dimension(ctx.grid.d()))?);
            let thr = predict(BoundKind::TwoSurface, &inputs).map_err(lib)?;
            let spec = MapSpec::pair(phi, phi2, [t, t2]);
            (
                "two-surface",
                level_set_experiment(&a, &spec, &[&mu, &mu2], &params, thr).map_err(lib)?,
            )
        }
        "maximal" => {
            let thr = predict(BoundKind::MaximalLevelSet, &inputs).map_err(lib)?;
            let n: usize = ctx.cfg.parse_num_or("params", "t-grid", 16usize)?;
            let t_grid = if n <= 1 { vec![1.0] } else { default_t_grid(n) };
            let spec = MapSpec::single(phi, t);
            (
                "maximal",
                maximal_experiment(&a, &spec, &mu, &t_grid, &params, thr).map_err(lib)?,
            )
        }
        _ => {
            let bound = ctx.cfg.get("params", "bound").unwrap_or("curved");
            let (kind, name) = if bound == "system" {
                inputs.sobolev_gain = Some(ctx.cfg.parse_num("params", "gain")?);
                inputs.m_equations = Some(1);
                (BoundKind::LevelSetSystem, "levelset-system")
            } else {
                (BoundKind::LevelSet, "levelset")
            };
            let thr = predict(kind, &inputs).map_err(lib)?;
            let spec = MapSpec::single(phi, t);
            (name, level_set_experiment(&a, &spec, &[&mu], &params, thr).map_err(lib)?)
        }
    };
    finish_experiment(ctx, dir, manifest, &result, theorem, &label)
}

fn run_inverse(ctx: &Ctx, dir: &Path, manifest: &mut Manifest) -> Result<RunOutcome, RunError> {
    let (ca, e) = ctx.set("a")?;
    let phi = ctx.cfg.parse_phi("phi")?;
    let ladder = ctx.ladder()?;
    let t_min: f64 = ctx.cfg.parse_num_or("params", "t-min", 0.1)?;
    let t_max: f64 = ctx.cfg.parse_num_or("params", "t-max", 1.5)?;
    let t_count: usize = ctx.cfg.parse_num_or("params", "t-count", 32usize)?;
    let mirror = ctx.cfg.get("params", "t-mirror").map(|v| v == "true").unwrap_or(true);
    let mut t_grid: Vec<f64> = (0..t_count)
        .map(|i| t_min + (t_max - t_min) * i as f64 / (t_count.max(2) - 1) as f64)
        .collect();
    if mirror {
        let negs: Vec<f64> = t_grid.iter().map(|t| -t).collect();
        t_grid.extend(negs);
    }
    let n_dirs: usize = ctx.cfg.parse_num_or("params", "directions", 64usize)?;
    let xs = unit_directions(ctx.grid.d(), n_dirs, ctx.seed);
    let params = InverseParams {
        ladder,
        t_grid,
        seed: ctx.seed,
        margin: ctx.cfg.parse_num_or("params", "margin", 0.1)?,
    };
    let report = inverse_experiment(&e, &phi, &xs, &params).map_err(lib)?;
    let mut csv = Csv::new("records.csv", "x1,x2,x3,gamma,best_t");
    for (x, g, t) in &report.per_x {
        csv.row(&[fmt_f(x[0]), fmt_f(x[1]), fmt_f(x[2]), fmt_f(*g), fmt_f(*t)]);
    }
    csv.write_to(dir)?;
    manifest.add_file(csv.name());
    let d = ctx.grid.d() as f64;
    manifest.set("theorem", "inverse");
    manifest.set("label", &format!("{}|{}", ca.label(), phi.label()));
    manifest.set_f("gamma_uniform", report.gamma_uniform);
    manifest.set_f("lower_bound", report.lower_bound);
    manifest.set_f("minkowski", report.minkowski.slope);
    manifest.set_f("witness_x1", report.witness_x[0]);
    manifest.set_f("witness_x2", report.witness_x[1]);
    manifest.set_f("witness_t", report.witness_t);
    let _ = d;
    manifest.set(
        "verdict",
        if report.satisfied { "bound-respected" } else { "bound-violated" },
    );
    Ok(if report.satisfied { RunOutcome::Clean } else { RunOutcome::BoundViolated })
}

fn lattice_phi(ctx: &Ctx, key: &str) -> Result<PhiFamily, RunError> {
    Ok(ctx.cfg.parse_phi(key)?)
}

fn run_count(ctx: &Ctx, dir: &Path, manifest: &mut Manifest) -> Result<RunOutcome, RunError> {
    use fractint_core::dioph::{count_bruteforce, count_fast, LatticeConfig, PairMode};
    let d: usize = ctx.cfg.parse_num_or("params", "d", 2usize)?;
    let q: u32 = ctx.cfg.parse_num("params", "q")?;
    let s: f64 = ctx.cfg.parse_num("params", "lattice-s")?;
    let mut cfg =
        LatticeConfig::new(d, q, s, lattice_phi(ctx, "phi")?, lattice_phi(ctx, "phi2")?).map_err(lib)?;
    if ctx.cfg.get("params", "lambda").is_some() {
        let v = ctx.cfg.parse_f64_list("params", "lambda")?;
        if v.len() == 2 {
            cfg.lambda = [v[0], v[1]];
        }
    }
    let mode = match ctx.cfg.get("params", "pairs").unwrap_or("exhaustive") {
        "exhaustive" => PairMode::Exhaustive,
        spec => match spec.strip_prefix("sampled:") {
            Some(n) => PairMode::Sampled {
                n_pairs: n.parse().map_err(|e| {
                    RunError::Config(ConfigError {
                        line: None,
                        message: format!("pairs: {e}"),
                    })
                })?,
                seed: ctx.seed,
            },
            None => {
                return Err(RunError::Config(ConfigError {
                    line: None,
                    message: format!("unknown pairs mode `{spec}`"),
                }))
            }
        },
    };
    let table = count_fast(&cfg, mode).map_err(lib)?;
    // oracle spot check in exhaustive mode stays cheap for small q
    if matches!(mode, PairMode::Exhaustive) && q <= 12 {
        let brute = count_bruteforce(&cfg, mode).map_err(lib)?;
        if brute.entries != table.entries {
            return Err(RunError::Library("fast path diverged from brute force".into()));
        }
        manifest.set("oracle_checked", "true");
    }
    let mut csv = Csv::new("records.csv", "n1x,n1y,n1z,n2x,n2y,n2z,count");
    for (n1, n2, c) in &table.entries {
        if *c == 0 && matches!(mode, PairMode::Exhaustive) {
            continue; // zero rows are implied by the pair universe
        }
        csv.row(&[
            n1[0].to_string(),
            n1[1].to_string(),
            n1[2].to_string(),
            n2[0].to_string(),
            n2[1].to_string(),
            n2[2].to_string(),
            c.to_string(),
        ]);
    }
    csv.write_to(dir)?;
    manifest.add_file(csv.name());
    manifest.set("pairs", &table.entries.len().to_string());
    manifest.set("total", &table.total.to_string());
    manifest.set_f("aggregate", table.aggregate);
    manifest.set_f("delta", cfg.delta());
    manifest.set("verdict", "informational");
    Ok(RunOutcome::Clean)
}

fn run_average_slope(ctx: &Ctx, dir: &Path, manifest: &mut Manifest) -> Result<RunOutcome, RunError> {
    use fractint_core::dioph::average_slope;
    let d: usize = ctx.cfg.parse_num_or("params", "d", 2usize)?;
    let s: f64 = ctx.cfg.parse_num("params", "lattice-s")?;
    let q_list = ctx.cfg.parse_u32_list("params", "q-list")?;
    let pairs: usize = ctx.cfg.parse_num_or("params", "pairs-per-q", 4096usize)?;
    let phi = lattice_phi(ctx, "phi")?;
    let slope = average_slope(d, s, &q_list, pairs, ctx.seed, phi).map_err(lib)?;
    let mut csv = Csv::new("summary.csv", "q,aggregate");
    for (q, agg) in &slope.per_q {
        csv.row(&[q.to_string(), fmt_f(*agg)]);
    }
    csv.write_to(dir)?;
    manifest.add_file(csv.name());
    let mut inputs = BoundInputs { d, ..Default::default() };
    inputs.lattice_s = Some(s);
    let thr: Thresholds = predict(BoundKind::LatticeCount, &inputs).map_err(lib)?;
    manifest.set("theorem", "lattice-count");
    manifest.set("label", &format!("d{d}-s{s}"));
    manifest.set_f("fitted_slope", slope.fit.slope);
    manifest.set_f("residual", slope.fit.residual);
    manifest.set_f("predicted", slope.predicted);
    manifest.set(
        "hypothesis",
        if thr.hypothesis_ok { "ok" } else { "violated" },
    );
    let verdict = if !thr.hypothesis_ok {
        "informational"
    } else if slope.bound_respected {
        "bound-respected"
    } else {
        "bound-violated"
    };
    manifest.set("verdict", verdict);
    Ok(if verdict == "bound-violated" { RunOutcome::BoundViolated } else { RunOutcome::Clean })
}
