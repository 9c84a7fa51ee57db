use nbcount::approx::{approx_cdf, pivot_limit, quantile_discrete, quantile_smooth};
use nbcount::detection::{
    background_cdf_curve, background_sd, detection_limit_dl, lod_nb, lod_normal, DetectionConfig,
    NormalSignalModel,
};
use nbcount::intervals::{
    confidence_table, interval, ogden_ci, pivot_interval, two_sided, Method, PivotLimits,
    DEFAULT_TABLE_COUNTS,
};
use nbcount::negbin::{nb_cdf, nb_quantile_exact, pivot, CountModel};
use nbcount::simulate::{coarse_grid, default_grid, run_coverage, SimulationPlan};
use nbcount::{Probability, Result};

use crate::output::{sig6, Cell, Table};
use crate::{
    value_name, CiArgs, Command, CurveKind, CurvesArgs, DetectionArgs, DlArgs, GridPreset,
    LimitRounding, LodArgs, LodMethod, QuantileArgs, QuantileKind, SimulateArgs, TableArgs,
};

const DENSITY_UNITS: &str = "densities mm^-2, areas mm^2, counts dimensionless";

pub fn run(command: &Command) -> Result<Table> {
    match command {
        Command::Quantile(a) => quantile(a),
        Command::Ci(a) => ci(a),
        Command::Table(a) => table(a),
        Command::Lod(a) => lod(a),
        Command::Dl(a) => dl(a),
        Command::Simulate(a) => simulate(a),
        Command::Curves(a) => curves(a),
    }
}

fn prob(v: f64) -> Result<Probability> {
    Probability::open(v)
}

fn quantile(a: &QuantileArgs) -> Result<Table> {
    let model = CountModel::new(a.mean, a.trsd)?;
    let b = prob(a.level)?;
    let exact = nb_quantile_exact(b, &model)?;
    let discrete = quantile_discrete(b, &model)?;
    let smooth = quantile_smooth(b, &model)?;
    let value = match a.kind {
        QuantileKind::Exact => Cell::from(exact),
        QuantileKind::Discrete => Cell::from(discrete.value),
        QuantileKind::Smooth => Cell::from(smooth.value),
    };
    let mut t = Table::new(
        "quantile",
        vec![
            "mean", "trsd", "level", "kind", "quantile", "exact", "discrete", "smooth", "floored",
        ],
    );
    t.meta("kind", value_name(&a.kind)).meta("units", "counts");
    t.push(vec![
        a.mean.into(),
        a.trsd.into(),
        a.level.into(),
        value_name(&a.kind).into(),
        value,
        exact.into(),
        discrete.value.into(),
        smooth.value.into(),
        (discrete.floored || smooth.floored).into(),
    ]);
    Ok(t)
}

fn ci(a: &CiArgs) -> Result<Table> {
    let level = prob(a.level)?;
    let mut t = Table::new(
        "ci",
        vec![
            "count",
            "method",
            "level",
            "lower",
            "upper",
            "small_count",
            "lower_floored",
        ],
    );
    t.meta("trsd", a.trsd)
        .meta("requested_method", value_name(&a.method))
        .meta("units", "mean counts");
    if a.method.method() == Some(Method::Ogden) {
        t.meta(
            "ogden_constants",
            format!("{} {}", a.ogden_lower, a.ogden_upper),
        );
    }
    for &n in &a.counts {
        let r = match a.method.method() {
            None => two_sided(n, a.trsd, level)?,
            Some(Method::Ogden) => ogden_ci(n, a.trsd, a.ogden_lower, a.ogden_upper)?,
            Some(m) => interval(n, a.trsd, level, m)?,
        };
        t.push(vec![
            n.into(),
            r.method.name().into(),
            r.level.value().into(),
            r.lower.into(),
            r.upper.into(),
            r.flags.small_count.into(),
            r.flags.lower_floored.into(),
        ]);
    }
    Ok(t)
}

fn table(a: &TableArgs) -> Result<Table> {
    let counts = a
        .counts
        .clone()
        .unwrap_or_else(|| DEFAULT_TABLE_COUNTS.to_vec());
    let mode = match a.limits {
        LimitRounding::OneDecimal => PivotLimits::OneDecimal,
        LimitRounding::Exact => PivotLimits::Exact,
    };
    let rows = confidence_table(a.trsd, prob(a.level)?, &counts, mode)?;
    let mut t = Table::new(
        "table",
        vec![
            "count",
            "rsd_pct",
            "rsd_pct_rounded",
            "lower",
            "upper",
            "lower_rounded",
            "upper_rounded",
            "small_count",
        ],
    );
    t.meta("method", "pivot")
        .meta("trsd", a.trsd)
        .meta("level", a.level)
        .meta("pivot_limits", value_name(&a.limits))
        .meta("rounding", "nearest integer")
        .meta("units", "mean counts; rsd in percent");
    for r in rows {
        t.push(vec![
            r.count.into(),
            r.rsd_percent.into(),
            r.rsd_rounded().map(|v| v as u64).into(),
            r.lower.into(),
            r.upper.into(),
            (r.lower_rounded() as u64).into(),
            (r.upper_rounded() as u64).into(),
            r.small_count.into(),
        ]);
    }
    Ok(t)
}

fn detection_config(d: &DetectionArgs, power: f64) -> Result<DetectionConfig> {
    let cfg = DetectionConfig {
        area: d.area,
        background_density: d.background,
        trsd: d.trsd,
        alpha: Probability::new(d.alpha)?,
        beta_power: Probability::new(power)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn detection_meta(t: &mut Table, d: &DetectionArgs) {
    t.meta("area", d.area)
        .meta("background_density", d.background)
        .meta("trsd", d.trsd)
        .meta("alpha", d.alpha)
        .meta("units", DENSITY_UNITS);
}

fn lod(a: &LodArgs) -> Result<Table> {
    let cfg = detection_config(&a.detection, DetectionConfig::default().beta_power.value())?;
    let normal = NormalSignalModel::new(a.sigma0, a.detection.trsd)?;
    let nb = lod_nb(&cfg)?;
    let sd = background_sd(&cfg)?;
    if a.curve {
        let mut t = Table::new("lod", vec!["count", "density", "cdf_nb", "cdf_normal"]);
        detection_meta(&mut t, &a.detection);
        t.meta("lod_nb", sig6(nb.lod))
            .meta("lod_normal", sig6(lod_normal(&normal)))
            .meta("background_sd", sig6(sd))
            .meta("density_scale", "bias-corrected (background subtracted)");
        for p in background_cdf_curve(&cfg)? {
            t.push(vec![
                p.count.into(),
                p.density.into(),
                p.cdf_nb.into(),
                p.cdf_normal.into(),
            ]);
        }
        return Ok(t);
    }
    let mut t = Table::new(
        "lod",
        vec![
            "method",
            "lod",
            "count_quantile",
            "background_sd",
            "uncorrected",
        ],
    );
    detection_meta(&mut t, &a.detection);
    t.meta("sigma0", a.sigma0);
    let bg = a.detection.background;
    if matches!(a.method, LodMethod::Nb | LodMethod::Both) {
        t.push(vec![
            "nb".into(),
            nb.lod.into(),
            nb.count_quantile.into(),
            sd.into(),
            (nb.lod + bg).into(),
        ]);
    }
    if matches!(a.method, LodMethod::Normal | LodMethod::Both) {
        let v = lod_normal(&normal);
        t.push(vec![
            "normal".into(),
            v.into(),
            Cell::Empty,
            a.sigma0.into(),
            (v + bg).into(),
        ]);
    }
    Ok(t)
}

fn dl(a: &DlArgs) -> Result<Table> {
    let cfg = detection_config(&a.detection, a.power)?;
    let lod = lod_nb(&cfg)?;
    let r = detection_limit_dl(&cfg)?;
    let mut t = Table::new(
        "dl",
        vec!["dl", "mean_count", "count_threshold", "power", "lod"],
    );
    detection_meta(&mut t, &a.detection);
    t.meta("target_power", a.power);
    t.push(vec![
        r.dl.into(),
        r.mean_count.into(),
        r.count_threshold.into(),
        r.power.into(),
        lod.lod.into(),
    ]);
    Ok(t)
}

fn grid(a: &SimulateArgs) -> Vec<f64> {
    if let (Some(start), Some(end), Some(step)) = (a.grid_start, a.grid_end, a.grid_step) {
        let n = ((end - start) / step + 1e-9).floor().max(0.0) as usize;
        return (0..=n).map(|i| start + i as f64 * step).collect();
    }
    match a.grid {
        GridPreset::Fine => default_grid(),
        GridPreset::Coarse => coarse_grid(),
    }
}

fn band_cells(band: Option<nbcount::intervals::EnvelopeBand>) -> [Cell; 2] {
    match band {
        Some(b) => [b.lower().into(), b.upper().into()],
        None => [Cell::Empty, Cell::Empty],
    }
}

fn simulate(a: &SimulateArgs) -> Result<Table> {
    let plan = SimulationPlan {
        grid: grid(a),
        trsd: a.trsd,
        reps: a.reps as usize,
        level: prob(a.level)?,
        methods: a.methods.iter().map(|&m| m.into()).collect(),
        seed: a.seed,
    };
    let report = run_coverage(&plan)?;
    let mut t = Table::new(
        "simulate",
        vec![
            "mean",
            "method",
            "lower_miss",
            "upper_miss",
            "two_sided_miss",
            "lower_band_lo",
            "lower_band_hi",
            "upper_band_lo",
            "upper_band_hi",
            "two_sided_band_lo",
            "two_sided_band_hi",
            "lower_inside",
            "upper_inside",
            "two_sided_inside",
            "error",
        ],
    );
    t.meta("trsd", a.trsd)
        .meta("level", a.level)
        .meta("reps", a.reps)
        .meta("seed", a.seed)
        .meta("grid_points", plan.grid.len())
        .meta("rng", "ChaCha8, one stream per grid point")
        .meta(
            "bands",
            "approximate discreteness envelopes; two-sided band sums the one-sided half-widths",
        );
    for &m in &plan.methods {
        let s = report.summary(m);
        t.meta(
            &format!("summary_{}", m.name()),
            format!(
                "mean_lower_miss={} mean_upper_miss={} frac_inside_lower={} frac_inside_upper={} frac_inside_two_sided={} frac_two_sided_conservative={} failed_points={}",
                sig6(s.mean_lower_miss), sig6(s.mean_upper_miss), sig6(s.frac_lower_inside),
                sig6(s.frac_upper_inside), sig6(s.frac_two_sided_inside),
                sig6(s.frac_two_sided_conservative), s.failed_points
            ),
        );
    }
    for p in &report.points {
        let [llo, lhi] = band_cells(p.lower_band);
        let [ulo, uhi] = band_cells(p.upper_band);
        let [tlo, thi] = band_cells(p.two_sided_band);
        let ok = p.is_ok();
        t.push(vec![
            p.mean_count.into(),
            p.method.name().into(),
            if ok { p.lower_miss.into() } else { Cell::Empty },
            if ok { p.upper_miss.into() } else { Cell::Empty },
            if ok {
                p.two_sided_miss.into()
            } else {
                Cell::Empty
            },
            llo,
            lhi,
            ulo,
            uhi,
            tlo,
            thi,
            p.lower_inside().into(),
            p.upper_inside().into(),
            p.two_sided_inside().into(),
            p.error.clone().into(),
        ]);
    }
    Ok(t)
}

fn curves(a: &CurvesArgs) -> Result<Table> {
    match a.kind {
        CurveKind::PivotQuantile => pivot_quantile_curve(a),
        CurveKind::RelativeCi => relative_ci_curve(a),
        CurveKind::PivotCdf => pivot_cdf_curve(a),
    }
}

fn mean_grid(a: &CurvesArgs) -> Vec<f64> {
    let n = ((a.mean_max - a.mean_min) / a.mean_step + 1e-9)
        .floor()
        .max(0.0) as usize;
    (0..=n)
        .map(|i| a.mean_min + i as f64 * a.mean_step)
        .collect()
}

fn pivot_quantile_curve(a: &CurvesArgs) -> Result<Table> {
    let b = prob(a.level)?;
    let mut t = Table::new(
        "curves",
        vec!["trsd", "mean", "exact", "discrete", "smooth", "asymptote"],
    );
    t.meta("kind", "pivot_quantile")
        .meta("level", a.level)
        .meta("y", "(quantile - mean)/sqrt(mean + trsd^2 mean^2)");
    for &s in &a.trsd {
        let asymptote = pivot_limit(b, s)?;
        for n in mean_grid(a) {
            let model = CountModel::new(n, s)?;
            let sd = model.sd();
            let norm = |q: f64| (q - n) / sd;
            t.push(vec![
                s.into(),
                n.into(),
                norm(nb_quantile_exact(b, &model)? as f64).into(),
                norm(quantile_discrete(b, &model)?.value as f64).into(),
                norm(quantile_smooth(b, &model)?.value).into(),
                asymptote.into(),
            ]);
        }
    }
    Ok(t)
}

fn relative_ci_curve(a: &CurvesArgs) -> Result<Table> {
    let level = prob(a.level)?;
    let counts = a.counts.clone().unwrap_or_else(|| (1..=200).collect());
    let mut t = Table::new(
        "curves",
        vec!["trsd", "count", "lower_pct", "upper_pct", "lower", "upper"],
    );
    t.meta("kind", "relative_ci")
        .meta("method", "pivot")
        .meta("pivot_limits", "exact")
        .meta("level", a.level)
        .meta("y", "(limit - count)/count * 100");
    for &s in &a.trsd {
        for &n in counts.iter().filter(|&&n| n > 0) {
            let r = pivot_interval(n, s, level, PivotLimits::Exact)?;
            let rel = |x: f64| (x - n as f64) / n as f64 * 100.0;
            t.push(vec![
                s.into(),
                n.into(),
                rel(r.lower).into(),
                rel(r.upper).into(),
                r.lower.into(),
                r.upper.into(),
            ]);
        }
    }
    Ok(t)
}

fn pivot_cdf_curve(a: &CurvesArgs) -> Result<Table> {
    let s = a.trsd[0];
    let mut t = Table::new("curves", vec!["series", "mean", "count", "pivot", "cdf"]);
    t.meta("kind", "pivot_cdf")
        .meta("trsd", s)
        .meta("pivot", "(count - mean)/sqrt(mean + trsd^2 mean^2)");
    for &n in &a.means {
        let model = CountModel::new(n, s)?;
        let last = nb_quantile_exact(prob(0.9999)?, &model)?;
        for k in 0..=last {
            t.push(vec![
                "exact".into(),
                n.into(),
                k.into(),
                pivot(k as f64, n, s)?.into(),
                nb_cdf(k, &model).into(),
            ]);
        }
    }
    // One approximate curve at the middle mean.
    let mut sorted = a.means.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted[sorted.len() / 2];
    let model = CountModel::new(mid, s)?;
    let (lo, hi) = (-3.0, 4.0);
    for i in 0..a.points {
        let x = lo + (hi - lo) * i as f64 / (a.points - 1) as f64;
        t.push(vec![
            "approx".into(),
            mid.into(),
            Cell::Empty,
            x.into(),
            approx_cdf(mid + x * model.sd(), &model).into(),
        ]);
    }
    Ok(t)
}
