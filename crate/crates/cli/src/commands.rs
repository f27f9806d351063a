use std::fmt::Write as _;

use blup_core::continuous::ContinuousModel;
use blup_core::product::{significant, Region, DEFAULT_RESOLUTION};
use blup_core::verify::{self, McConfig};
use blup_core::{
    mse_grid, tables, BlupSolution, ClosedFormSolution, Design, DesignFamily, DiscreteModel, GridSource, Kernel,
    Pattern, Point, ProductModel, ProductSolution, Target, Trend,
};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::{CliError, VERSION};

fn num(x: f64) -> String {
    significant(x, 10)
}

fn header(config: &RunConfig) -> String {
    format!(
        "blup {VERSION}\nconfig: {}\n",
        serde_json::to_string(config).unwrap_or_default()
    )
}

fn write_output(config: &RunConfig, body: &str) -> Result<Option<String>, CliError> {
    match &config.output.path {
        Some(path) => {
            std::fs::write(path, body).map_err(|e| CliError::Config(format!("cannot write {path}: {e}")))?;
            Ok(Some(path.clone()))
        }
        None => Ok(None),
    }
}

fn envelope(config: &RunConfig, body: Value) -> Value {
    json!({ "version": VERSION, "config": config, "result": body })
}

fn design_1d(config: &RunConfig) -> Result<Design, CliError> {
    let (a, b) = config.interval();
    match (&config.design.family, &config.design.sites) {
        (Some(tag), _) => {
            let family: DesignFamily = tag.parse()?;
            if family.dim() != 1 {
                return Err(CliError::Config(format!("{family} is a 2D design; give a two-coordinate --t0")));
            }
            let n = config
                .design
                .n
                .ok_or_else(|| CliError::Config("design family needs --N".into()))?;
            Ok(family.expand_on(n, (a, b), (a, b))?)
        }
        (None, Some(sites)) => Ok(Design::values(sites.iter().map(|&s| Point::Line(s)).collect())?),
        (None, None) => Err(CliError::Config(
            "no observations: give --continuous, --design with --N, or --sites".into(),
        )),
    }
}

fn product_model(config: &RunConfig, kernel: Kernel) -> Result<ProductModel, CliError> {
    if !config.trend()?.is_constant() {
        return Err(CliError::Config("2D prediction supports the constant trend only".into()));
    }
    let (a, b) = config.interval();
    Ok(ProductModel::new(kernel.clone(), kernel, [(a, b), (a, b)])?)
}

fn two_d_family(config: &RunConfig) -> Result<Option<(DesignFamily, usize)>, CliError> {
    let Some(tag) = &config.design.family else {
        return Ok(None);
    };
    let family: DesignFamily = tag.parse()?;
    if family.dim() != 2 {
        return Ok(None);
    }
    let n = config
        .design
        .n
        .ok_or_else(|| CliError::Config("design family needs --N".into()))?;
    Ok(Some((family, n)))
}

pub fn predict(config: &RunConfig) -> Result<(), CliError> {
    let kernel = config.kernel()?;
    let point = config.target.point.clone().unwrap_or_default();
    let planar = point.len() == 2 || two_d_family(config)?.is_some();
    let continuous = config.continuous.unwrap_or(false);
    let mut text = header(config);
    let (result, csv) = if planar {
        let [x, y] = match point.as_slice() {
            [x, y] => [*x, *y],
            _ => return Err(CliError::Config("2D prediction needs --t0 X Y".into())),
        };
        if config.target.p.unwrap_or(0) != 0 || config.target.nu.is_some() {
            return Err(CliError::Config("derivative and average targets are 1D only".into()));
        }
        let model = product_model(config, kernel)?;
        if continuous {
            let s = model.blup((x, y))?;
            product_report(&s, &mut text)
        } else {
            let (family, n) = two_d_family(config)?
                .ok_or_else(|| CliError::Config("2D discrete prediction needs a 2D --design and --N".into()))?;
            let s = model.discrete(family, n)?.predict(&Point::Plane(x, y), Pattern::VALUE)?;
            discrete_report(&s, &mut text)
        }
    } else {
        let trend = config.trend()?;
        let p = config.target.p.unwrap_or(0);
        let nu = config.target.nu.clone();
        let t0 = match (point.as_slice(), &nu) {
            ([t], _) => Some(*t),
            ([], Some(_)) => None,
            _ => return Err(CliError::Config("give --t0 or at least one --nu atom".into())),
        };
        if continuous {
            let (a, b) = config.interval();
            let model = ContinuousModel::new(kernel, trend, a, b)?;
            let s = match (&nu, t0) {
                (Some(atoms), _) => model.blup_average(&atoms.iter().map(|a| (a[0], a[1])).collect::<Vec<_>>())?,
                (None, Some(t)) => model.blup(t, p)?,
                (None, None) => unreachable!(),
            };
            continuous_report(&s, &mut text)
        } else {
            let model = DiscreteModel::new(kernel, trend, design_1d(config)?)?;
            let s = match (&nu, t0) {
                (Some(atoms), _) => {
                    model.predict_average(&atoms.iter().map(|a| (Point::Line(a[0]), a[1])).collect::<Vec<_>>())?
                }
                (None, Some(t)) => model.predict(&Point::Line(t), Pattern::order(p))?,
                (None, None) => unreachable!(),
            };
            discrete_report(&s, &mut text)
        }
    };
    let body = match config.format("json")?.as_str() {
        "csv" => csv,
        _ => serde_json::to_string_pretty(&envelope(config, result)).unwrap_or_default() + "\n",
    };
    if let Some(path) = write_output(config, &body)? {
        let _ = writeln!(text, "wrote {path}");
    }
    print!("{text}");
    Ok(())
}

fn pattern_label(p: Pattern) -> String {
    p.to_string()
}

fn observation_point(p: &Point) -> String {
    match p {
        Point::Line(t) => num(*t),
        Point::Plane(x, y) => format!("({};{})", num(*x), num(*y)),
    }
}

fn summary(text: &mut String, c: &[f64], d: &[f64], mse: f64) {
    let list = |v: &[f64]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ");
    let _ = writeln!(text, "c = [{}]", list(c));
    let _ = writeln!(text, "D = [{}]", list(d));
    let _ = writeln!(text, "mse = {}", num(mse));
    let _ = writeln!(text, "rmse = {}", num(mse.max(0.0).sqrt()));
}

fn discrete_report(s: &BlupSolution, text: &mut String) -> (Value, String) {
    let _ = writeln!(text, "weights ({} observations):", s.weights.len());
    let mut csv = String::from("site,pattern,weight\n");
    let mut rows = Vec::new();
    for (o, w) in s.observations.iter().zip(s.weights.iter()) {
        let site = observation_point(&o.point);
        let _ = writeln!(text, "  {site} {} {}", pattern_label(o.pattern), num(*w));
        let _ = writeln!(csv, "{site},{},{}", pattern_label(o.pattern), num(*w));
        rows.push(json!({ "site": o.point.coords(), "pattern": [o.pattern.0, o.pattern.1], "weight": w }));
    }
    let c: Vec<f64> = s.c.iter().copied().collect();
    let d: Vec<f64> = s.d.iter().copied().collect();
    summary(text, &c, &d, s.mse);
    let value = json!({
        "kind": "discrete",
        "weights": rows,
        "c": c,
        "D": d,
        "mse": s.mse,
        "rmse": s.rmse(),
        "interpolated": s.interpolated,
    });
    (value, csv)
}

fn continuous_report(s: &ClosedFormSolution, text: &mut String) -> (Value, String) {
    let _ = writeln!(text, "target measure path: {:?}", s.path);
    let _ = writeln!(text, "Q*:");
    let mut csv = String::from("component,location,weight\n");
    for (i, m) in s.q_star.components().iter().enumerate() {
        let atoms: Vec<String> = m.atoms().iter().map(|(x, w)| format!("{}@{}", num(*w), num(*x))).collect();
        let density = if m.has_density() { " + density" } else { "" };
        let _ = writeln!(text, "  component {i}: [{}]{density}", atoms.join(", "));
    }
    for (t, i, w) in s.q_star.discretize() {
        let _ = writeln!(csv, "{i},{},{}", num(t), num(w));
    }
    let c: Vec<f64> = s.c.iter().copied().collect();
    let d: Vec<f64> = s.d.iter().copied().collect();
    summary(text, &c, &d, s.mse);
    let value = json!({
        "kind": "continuous",
        "path": s.path,
        "residual": s.target_residual,
        "closed_form_residual": s.closed_form_residual,
        "q_star": s.q_star.record(),
        "c": c,
        "D": d,
        "mse": s.mse,
        "rmse": s.rmse(),
    });
    (value, csv)
}

fn product_report(s: &ProductSolution, text: &mut String) -> (Value, String) {
    let _ = writeln!(text, "target measure paths: {:?}", s.paths);
    let _ = writeln!(text, "Q*:");
    let mut terms = Vec::new();
    for p in s.q_star.patterns() {
        for t in s.q_star.terms(p) {
            let describe = |m: &blup_core::SignedMeasure| {
                let atoms: Vec<String> = m.atoms().iter().map(|(x, w)| format!("{}@{}", num(*w), num(*x))).collect();
                format!("[{}]{}", atoms.join(", "), if m.has_density() { " + density" } else { "" })
            };
            let _ = writeln!(
                text,
                "  {p}: {} * {} x {}",
                num(t.weight),
                describe(&t.first),
                describe(&t.second)
            );
            terms.push(json!({
                "pattern": [p.0, p.1],
                "weight": t.weight,
                "first": t.first.record(),
                "second": t.second.record(),
            }));
        }
    }
    let mut csv = String::from("t1,t2,pattern,weight\n");
    for (x, y, p, w) in s.q_star.discretize() {
        let _ = writeln!(csv, "{},{},{p},{}", num(x), num(y), num(w));
    }
    summary(text, &[s.c], &[s.d], s.mse);
    let value = json!({
        "kind": "continuous-product",
        "paths": s.paths,
        "q_star": terms,
        "c": [s.c],
        "D": [s.d],
        "mse": s.mse,
        "rmse": s.rmse(),
    });
    (value, csv)
}

pub fn table(id: u8, config: &RunConfig) -> Result<(), CliError> {
    let report = tables::reproduce(id)?;
    let csv = report.to_csv();
    let mut text = header(config);
    let _ = writeln!(text, "table {id}: {}", report.title);
    let body = match config.format("csv")?.as_str() {
        "json" => serde_json::to_string_pretty(&envelope(config, serde_json::to_value(&report).unwrap_or_default()))
            .unwrap_or_default(),
        _ => csv.clone(),
    };
    match write_output(config, &body)? {
        Some(path) => {
            let _ = writeln!(text, "wrote {path}");
        }
        None => text.push_str(&csv),
    }
    for i in &report.identities {
        let _ = writeln!(
            text,
            "{} {}: gap {:.3e}",
            if i.passed() { "PASS" } else { "FAIL" },
            i.label,
            i.gap
        );
    }
    print!("{text}");
    let failures = report.failures();
    if failures.is_empty() {
        println!("all {} cells within tolerance", report.cells.len());
        Ok(())
    } else {
        Err(CliError::Tolerance(failures.join("; ")))
    }
}

pub fn grid(config: &RunConfig) -> Result<(), CliError> {
    let kernel = config.kernel()?;
    let model = product_model(config, kernel)?;
    let source = if config.continuous.unwrap_or(false) {
        GridSource::Continuous
    } else {
        let (family, n) = two_d_family(config)?
            .ok_or_else(|| CliError::Config("grid needs --continuous or a 2D --design with --N".into()))?;
        GridSource::Family(family, n)
    };
    let region = match config.grid.region {
        Some([a, b, c, d]) => Region { t1: (a, b), t2: (c, d) },
        None => Region::default(),
    };
    let r = config.grid.resolution.unwrap_or(DEFAULT_RESOLUTION);
    let grid = mse_grid(&model, &source, region, (r, r))?;
    let csv = grid.to_csv();
    let mut text = header(config);
    match write_output(config, &csv)? {
        Some(path) => {
            let _ = writeln!(text, "wrote {} grid points to {path}", grid.rmse.len());
            print!("{text}");
        }
        None => {
            for line in text.lines() {
                println!("# {line}");
            }
            print!("{csv}");
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct Selection {
    pub residuals: bool,
    pub mc: bool,
    pub perturb: bool,
}

struct Check {
    name: String,
    passed: bool,
    detail: String,
}

pub fn verify(config: &RunConfig, selection: Selection) -> Result<(), CliError> {
    let mut checks = Vec::new();
    if selection.residuals {
        for c in verify::residual_suite()? {
            checks.push(Check {
                passed: c.passed(),
                detail: format!(
                    "residual {:.3e} ({} {:.0e})",
                    c.residual,
                    if c.expect_failure { "must exceed" } else { "tolerance" },
                    c.tolerance
                ),
                name: format!("residual {}", c.name),
            });
        }
        let r = verify::ibm_mse_report(0.5, 1.0, 2.0)?;
        checks.push(Check {
            name: "ibm location-scale mse".into(),
            passed: r.generic_mse >= 0.0,
            detail: format!(
                "generic {} vs tabulated {}{}",
                num(r.generic_mse),
                num(r.printed_mse),
                if r.disagree { " -- DISAGREES with the tabulated formula" } else { "" }
            ),
        });
    }
    if selection.mc {
        let cfg = McConfig {
            sample_count: config.verify.mc_samples.unwrap_or(100_000),
            seed: config.verify.seed.unwrap_or(42),
            ..McConfig::default()
        };
        for (name, kernel) in [("ou", Kernel::exponential(2.0)), ("matern32", Kernel::matern32(2.0))] {
            let model = ContinuousModel::new(kernel, Trend::constant(), 0.0, 1.0)?;
            let s = model.blup(2.0, 0)?;
            let est = verify::mc_mse(
                model.kernel(),
                model.trend(),
                &[1.0],
                &verify::measure_predictor(&s.q_star),
                (Point::Line(2.0), Pattern::VALUE),
                &cfg,
            )?;
            let z = (est.mse - s.mse) / est.standard_error;
            checks.push(Check {
                name: format!("monte carlo {name} t0=2"),
                passed: z.abs() <= 3.0,
                detail: format!(
                    "empirical {} vs analytic {} ({z:+.2} SE, {} draws, seed {})",
                    num(est.mse),
                    num(s.mse),
                    est.samples,
                    cfg.seed
                ),
            });
        }
    }
    if selection.perturb {
        let seed = config.verify.seed.unwrap_or(42);
        let instances = [
            ("ou N=5 const1", Kernel::exponential(2.0), Trend::constant(), vec![0.0, 0.25, 0.5, 0.75, 1.0], 2.0),
            ("matern32 t", Kernel::matern32(1.5), Trend::linear(), vec![0.0, 0.3, 0.7, 1.0], 1.4),
            ("bm t2", Kernel::BrownianMotion, Trend::quadratic(), vec![0.2, 0.5, 0.9], 1.5),
        ];
        for (name, kernel, trend, sites, t0) in instances {
            let design = Design::values(sites.into_iter().map(Point::Line).collect())?;
            let model = DiscreteModel::new(kernel, trend, design)?;
            let v = verify::perturbation_violations(&model, &Target::value(t0), 100, seed)?;
            checks.push(Check {
                name: format!("perturbation {name}"),
                passed: v == 0,
                detail: format!("{v} violations over 100 perturbations"),
            });
        }
    }
    let mut text = header(config);
    for c in &checks {
        let _ = writeln!(text, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let json_checks: Vec<Value> = checks
        .iter()
        .map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail }))
        .collect();
    let body = serde_json::to_string_pretty(&envelope(config, json!({ "checks": json_checks }))).unwrap_or_default();
    if let Some(path) = write_output(config, &body)? {
        let _ = writeln!(text, "wrote {path}");
    }
    print!("{text}");
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(failed.join(", ")))
    }
}
