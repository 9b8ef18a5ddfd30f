use latwalk::coarse::{
    irreducible_decompose, overshoot, piece_weight_identity, q_measure_mass, q_tail_stats, skeleton_attractive,
    skeleton_repulsive, skeleton_stats, verify_P1_P2, Skeleton, SkeletonReport, SkeletonStats,
};
use latwalk::enumerate::{endpoint_law, enumeration_result, fekete_bracket, gf_result, EnumCaps, PathCensus};
use latwalk::geometry::{default_height, free_walk_table, k_lambda0, ConeSpec, NormTable, ShapeLimit, WulffShape};
use latwalk::path::{LatticePath, Pattern, Site};
use latwalk::phase::{
    classify_phase, free_energy_with, perturbed_correction_f, product_grid, rate_function_with,
    speed_from_free_energy_with, PhaseEvidence,
};
use latwalk::potential::{GCParams, PhiSpec};
use latwalk::sampler::{estimate_pattern_frequency, estimate_speed, mcmc_sample, ChainConfig, ChainStats};
use serde::Serialize;

use crate::config::{ExperimentConfig, NormSource};
use crate::error::CliError;
use crate::output::Outputs;

/// Full records kept in JSON outputs; summaries cover every path.
const KEEP_RECORDS: usize = 10;

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub spec: PhiSpec,
    pub seed: u64,
}

impl Context<'_> {
    fn census_n(&self) -> usize {
        let cap = EnumCaps::default_for(self.cfg.dim).cap_for(&self.spec);
        self.cfg.census_n.unwrap_or(cap.min(10))
    }

    fn census(&self, n: usize) -> Result<PathCensus, CliError> {
        Ok(PathCensus::build(&self.spec, self.cfg.dim, n)?)
    }

    fn norm_table(&self, lambda: f64) -> Result<NormTable, CliError> {
        let height = default_height(self.cfg.dim);
        Ok(match self.cfg.norm {
            NormSource::FreeWalk => free_walk_table(self.cfg.dim, lambda, height)?,
            NormSource::Estimated => NormTable::estimate(&self.census(self.census_n())?, lambda, height)?,
        })
    }

    fn shape(&self, lambda: f64) -> Result<WulffShape, CliError> {
        Ok(WulffShape::from_table(self.norm_table(lambda)?, self.cfg.phase.tolerance)?)
    }

    /// Cone around the drift rescaled onto `∂K_λ`.
    fn cone(&self, shape: &WulffShape) -> Result<ConeSpec, CliError> {
        let h = self.cfg.drift();
        let Some(p) = shape.polar_norm(&h).filter(|&p| p > 0.0) else {
            return Err(CliError::Config("h: a nonzero drift is needed to orient the cone".into()));
        };
        let hb: Vec<f64> = h.iter().map(|x| x / p).collect();
        Ok(ConeSpec::new(shape, hb, self.cfg.delta, 1)?)
    }

    fn chain(&self, n: usize, keep_paths: bool) -> Result<ChainStats, CliError> {
        let s = &self.cfg.sampler;
        let mut c = ChainConfig::new(n, self.cfg.drift(), s.sweeps, s.burn_in, self.seed);
        c.thinning = s.thinning;
        c.chains = s.chains;
        c.mix = s.mix;
        c.keep_paths = keep_paths;
        Ok(mcmc_sample(&self.spec, &c)?)
    }

    fn skeleton(&self, path: &LatticePath, k: f64, shape: &WulffShape) -> Result<Skeleton, CliError> {
        Ok(if self.spec.is_repulsive() {
            skeleton_repulsive(path, k, shape)?
        } else {
            skeleton_attractive(path, k, shape)?
        })
    }
}

fn f(x: f64) -> String {
    format!("{x:?}")
}

pub fn enumerate(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let lengths = ctx.cfg.lengths();
    let n_max = *lengths.iter().max().unwrap();
    let census = ctx.census(n_max)?;
    let h = ctx.cfg.drift();
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &n in &lengths {
        results.push(enumeration_result(&census, &h, n)?);
        for e in endpoint_law(&census, &h, n)? {
            let mut r = vec![n.to_string()];
            r.extend(e.x.iter().map(i32::to_string));
            r.push(f(e.p));
            rows.push(r);
        }
    }
    out.json("enumeration.json", &results)?;
    let mut header = vec!["n".to_string()];
    header.extend((0..ctx.cfg.dim).map(|i| format!("x{i}")));
    header.push("p".into());
    out.csv("endpoint_law.csv", &header, &rows)
}

pub fn gf(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let lambda = ctx.cfg.require_lambda()?;
    let census = ctx.census(ctx.cfg.n)?;
    let target = Site::from_slice(&ctx.cfg.target());
    let r = gf_result(&census, target, lambda, ctx.cfg.n, None)?;
    out.json("gf.json", &r)
}

pub fn lyapunov(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let lambda = ctx.cfg.require_lambda()?;
    out.json("norm_table.json", &ctx.norm_table(lambda)?)?;
    if !ctx.cfg.lambdas.is_empty() {
        let census = ctx.census(ctx.census_n())?;
        let report = k_lambda0(&ctx.spec, &census, &ctx.cfg.lambdas, default_height(ctx.cfg.dim))?;
        out.json("shape_limit.json", &report)?;
    }
    Ok(())
}

pub fn wulff(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let lambda = ctx.cfg.require_lambda()?;
    let shape = ctx.shape(lambda)?;
    #[derive(Serialize)]
    struct Wulff<'a> {
        shape: &'a WulffShape,
        h: Vec<f64>,
        polar_norm: Option<f64>,
    }
    let h = ctx.cfg.drift();
    out.json(
        "wulff.json",
        &Wulff {
            shape: &shape,
            polar_norm: shape.polar_norm(&h),
            h,
        },
    )
}

#[derive(Serialize)]
struct SkeletonSummary {
    k: f64,
    overshoot: f64,
    paths: usize,
    clean: usize,
    violations: Vec<(usize, SkeletonReport)>,
    stats: Vec<SkeletonStats>,
    skeletons: Vec<Skeleton>,
}

pub fn skeleton(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let lambda = ctx.cfg.require_lambda()?;
    let shape = ctx.shape(lambda)?;
    let c = overshoot(&shape);
    let k = ctx.cfg.skeleton_k.unwrap_or(5.0_f64.max(c));
    let chain = ctx.chain(ctx.cfg.n, true)?;
    let mut summary = SkeletonSummary {
        k,
        overshoot: c,
        paths: chain.paths.len(),
        clean: 0,
        violations: Vec::new(),
        stats: Vec::new(),
        skeletons: Vec::new(),
    };
    for (i, p) in chain.paths.iter().enumerate() {
        let s = ctx.skeleton(p, k, &shape)?;
        let report = verify_P1_P2(p, &s, &shape);
        if report.is_clean() {
            summary.clean += 1;
        } else {
            summary.violations.push((i, report));
        }
        summary.stats.push(skeleton_stats(&s));
        if summary.skeletons.len() < KEEP_RECORDS {
            summary.skeletons.push(s);
        }
    }
    out.json("skeleton.json", &summary)?;
    if !summary.violations.is_empty() {
        return Err(CliError::Invariant(format!(
            "{} of {} skeletons violate P1/P2",
            summary.violations.len(),
            summary.paths
        )));
    }
    Ok(())
}

pub fn decompose(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let lambda = ctx.cfg.require_lambda()?;
    let shape = ctx.shape(lambda)?;
    let cone = ctx.cone(&shape)?;
    let params = GCParams::new(cone.h.clone(), lambda);
    let chain = ctx.chain(ctx.cfg.n, true)?;
    #[derive(Serialize)]
    struct Summary {
        cone: ConeSpec,
        paths: usize,
        flagged: usize,
        pieces: Vec<usize>,
        max_residual: f64,
        decompositions: Vec<latwalk::coarse::IrreducibleDecomposition>,
    }
    let mut s = Summary {
        cone: cone.clone(),
        paths: chain.paths.len(),
        flagged: 0,
        pieces: Vec::new(),
        max_residual: 0.0,
        decompositions: Vec::new(),
    };
    for p in &chain.paths {
        let d = irreducible_decompose(p, &shape, &cone);
        if d.reassemble()? != *p {
            return Err(CliError::Invariant("decomposition does not reassemble the path".into()));
        }
        if let Some(r) = piece_weight_identity(&ctx.spec, &d, &params)? {
            s.max_residual = s.max_residual.max(r.abs());
        }
        s.flagged += d.flagged as usize;
        s.pieces.push(d.pieces.len());
        if s.decompositions.len() < KEEP_RECORDS {
            s.decompositions.push(d);
        }
    }
    out.json("decomposition.json", &s)?;
    let q = q_measure_mass(&ctx.spec, lambda, ctx.census_n(), &shape, &cone)?;
    #[derive(Serialize)]
    struct Q {
        mass: latwalk::coarse::QMass,
        tails: latwalk::coarse::QTailStats,
    }
    let tails = q_tail_stats(&q);
    out.json("qmass.json", &Q { mass: q, tails })?;
    if let Some(p) = &ctx.cfg.perturbation {
        let r = perturbed_correction_f(&ctx.spec, &p.build(), &cone.h, &shape, &cone, ctx.census_n())?;
        out.json("perturbation.json", &r)?;
    }
    Ok(())
}

pub fn sample(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let mut speeds = Vec::new();
    for n in ctx.cfg.lengths() {
        let chain = ctx.chain(n, false)?;
        speeds.push(estimate_speed(&chain));
        out.json(&format!("chain_n{n}.json"), &chain)?;
    }
    out.json("speed.json", &speeds)
}

pub fn patterns(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    if ctx.cfg.patterns.is_empty() {
        return Err(CliError::Config("patterns: at least one pattern is required".into()));
    }
    let chain = ctx.chain(ctx.cfg.n, true)?;
    #[derive(Serialize)]
    struct Row {
        pattern: Vec<Vec<i32>>,
        frequency: latwalk::sampler::PatternFrequency,
    }
    let mut rows = Vec::new();
    for coords in &ctx.cfg.patterns {
        let pattern = Pattern::new(&LatticePath::from_coords(ctx.cfg.dim, coords)?)?;
        rows.push(Row {
            pattern: coords.clone(),
            frequency: estimate_pattern_frequency(&chain, &pattern)?,
        });
    }
    out.json("patterns.json", &rows)
}

pub fn phase(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let n_max = ctx.census_n();
    let census = ctx.census(n_max)?;
    let h = cfg.drift();
    let fe = free_energy_with(&census, &ctx.spec, &h, n_max)?;
    let base = free_energy_with(&census, &ctx.spec, &vec![0.0; cfg.dim], n_max)?;
    let p = &cfg.phase;
    let g_grid = product_grid(cfg.dim, -p.g_max, p.g_max, p.g_points);
    let u_grid = product_grid(cfg.dim, -p.u_max, p.u_max, p.u_points);
    let rate = rate_function_with(&census, &ctx.spec, &h, &u_grid, &g_grid, n_max)?;
    let gradient = speed_from_free_energy_with(&census, &ctx.spec, &h, p.step, n_max)?;
    let shape = if ctx.spec.is_repulsive() {
        ShapeLimit::Point
    } else if ctx.spec.is_attractive() {
        ShapeLimit::attractive_lower_bound(cfg.dim, ctx.spec.phi1())?
    } else {
        return Err(CliError::Config("model: neither repulsive nor attractive".into()));
    };
    let mut speeds = Vec::new();
    for n in cfg.lengths() {
        speeds.push(estimate_speed(&ctx.chain(n, false)?));
    }
    let evidence = PhaseEvidence {
        shape,
        tolerance: p.tolerance,
        speeds,
        free_energy: Some(fe.clone()),
        lambda0: Some((base.lo, base.hi)),
        rate: Some(rate.clone()),
    };
    let report = classify_phase(&ctx.spec, &h, &evidence)?;
    out.json("free_energy.json", &fe)?;
    out.json("rate_function.json", &rate)?;
    out.json("speed_from_free_energy.json", &gradient)?;
    out.json("phase_report.json", &report)?;
    if !p.ray.is_empty() {
        let mut rows = Vec::new();
        for &t in &p.ray {
            let x: Vec<f64> = h.iter().map(|c| c * t).collect();
            let g = speed_from_free_energy_with(&census, &ctx.spec, &x, p.step, n_max)?;
            let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            let mut r = vec![f(t), f(norm)];
            r.extend(g.v.iter().map(|&v| f(v)));
            r.push(g.underresolved.to_string());
            rows.push(r);
        }
        let mut header = vec!["t".to_string(), "h_norm".into()];
        header.extend((0..cfg.dim).map(|i| format!("v{i}")));
        header.push("underresolved".into());
        out.csv("phase_scan.csv", &header, &rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn item(name: &str, passed: bool, detail: String) -> CheckItem {
    CheckItem {
        name: name.into(),
        passed,
        detail,
    }
}

/// Invariants that hold for every admissible configuration.
pub fn check(ctx: &Context, out: &mut Outputs) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let dim = cfg.dim;
    let n = ctx.census_n().min(cfg.n);
    let census = ctx.census(n)?;
    let zero = vec![0.0; dim];
    let h = cfg.drift();
    let phi1 = ctx.spec.phi1();
    let mut items = Vec::new();

    let mut worst = f64::NEG_INFINITY;
    for k in 1..=n {
        let lz = census.log_z(k, &zero)?.unwrap_or(f64::NEG_INFINITY);
        let lo = -phi1 * k as f64;
        let hi = k as f64 * ((2 * dim) as f64).ln();
        worst = worst.max((lo - lz).max(lz - hi));
    }
    items.push(item("z-bounds", worst <= 1e-9, format!("worst excess {worst:e}")));

    let (rep, att) = (ctx.spec.is_repulsive(), ctx.spec.is_attractive());
    let mut worst = 0.0f64;
    for a in 1..n {
        for b in 1..=n - a {
            let get = |k: usize| census.log_z(k, &h).map(|v| v.unwrap_or(f64::NEG_INFINITY));
            let d = get(a + b)? - get(a)? - get(b)?;
            if rep {
                worst = worst.max(d);
            }
            if att {
                worst = worst.max(-d);
            }
        }
    }
    items.push(item(
        "multiplicativity",
        worst <= 1e-10,
        format!("repulsive {rep}, attractive {att}, worst defect {worst:e}"),
    ));

    let fe = free_energy_with(&census, &ctx.spec, &h, n)?;
    let bracket = fekete_bracket(&census, &ctx.spec, &zero, n)?;
    items.push(item(
        "free-energy-bracket",
        fe.lo <= fe.lambda_hat && fe.lambda_hat <= fe.hi && fe.lambda_hat >= bracket.lo - 1e-9,
        format!("{} in [{}, {}], lambda0 lo {}", fe.lambda_hat, fe.lo, fe.hi, bracket.lo),
    ));

    let total: f64 = endpoint_law(&census, &h, n)?.iter().map(|e| e.p).sum();
    items.push(item(
        "endpoint-law-normalized",
        (total - 1.0).abs() < 1e-9,
        format!("total {total}"),
    ));

    if ctx.spec.is_zero() && dim == 1 {
        let exact = (2.0 * h[0].cosh()).ln();
        let g = speed_from_free_energy_with(&census, &ctx.spec, &h, 1e-4, n)?;
        items.push(item(
            "closed-form-free-energy",
            (fe.lambda_hat - exact).abs() < 1e-9,
            format!("{} vs {exact}", fe.lambda_hat),
        ));
        items.push(item(
            "closed-form-speed",
            (g.v[0] - h[0].tanh()).abs() < 1e-6,
            format!("{} vs {}", g.v[0], h[0].tanh()),
        ));
    }

    if let Some(lambda) = cfg.lambda {
        let shape = ctx.shape(lambda)?;
        let k = cfg.skeleton_k.unwrap_or(5.0_f64.max(overshoot(&shape)));
        let chain = ctx.chain(cfg.n, true)?;
        let mut bad = 0;
        for p in &chain.paths {
            if !verify_P1_P2(p, &ctx.skeleton(p, k, &shape)?, &shape).is_clean() {
                bad += 1;
            }
        }
        items.push(item(
            "skeleton-p1-p2",
            bad == 0,
            format!("{bad} of {} sampled paths", chain.paths.len()),
        ));
        if h.iter().any(|&c| c != 0.0) {
            let cone = ctx.cone(&shape)?;
            let mut broken = 0;
            for p in &chain.paths {
                if irreducible_decompose(p, &shape, &cone).reassemble()? != *p {
                    broken += 1;
                }
            }
            items.push(item(
                "decomposition-round-trip",
                broken == 0,
                format!("{broken} of {} sampled paths", chain.paths.len()),
            ));
        }
    }

    out.json("check.json", &items)?;
    let failed: Vec<&str> = items.iter().filter(|i| !i.passed).map(|i| i.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(failed.join(", ")))
    }
}
