//! Command implementations behind the `qscatter` binary: parse seed and
//! diagram files, run the scatter / canonical / theta / relations / check
//! pipelines, and emit JSON or text reports.
//!
//! Exit codes: 0 success, 1 check failure, 2 input or usage error.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::affine::{ChartVector, SurfaceSpec, TropicalSurface};
use crate::brokenlines::{consistency_check_on_b, weight_check, ConsistencyReport};
use crate::canonical::{build_seed_diagram, canonical_diagram, Seed};
use crate::error::{QError, QResult};
use crate::fixtures;
use crate::mirror::{derive_relations, nice_representative, scalar_text, ThetaAlgebra};
use crate::qcoeff::QLaurent;
use crate::scattering::{check_loop_identity, complete, ScatteringDiagram};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub input: String,
    pub order: usize,
    pub charges: Option<String>,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub retry_seed: usize,
    /// Display-only rational evaluation point for q^(1/2).
    pub q_eval: Option<(i64, i64)>,
}

/// Outcome of one command: exit code, JSON report, human-readable text.
#[derive(Debug)]
pub struct Outcome {
    pub exit: i32,
    pub json: Value,
    pub text: String,
}

fn order_cap() -> usize {
    std::env::var("QSCATTER_MAX_DEGREE")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(8)
}

fn check_order(order: usize) -> QResult<()> {
    if order == 0 {
        return Err(QError::Parse("order must be at least 1".into()));
    }
    let cap = order_cap();
    if order > cap {
        return Err(QError::Parse(format!(
            "order {order} exceeds the safety cap {cap} (override with QSCATTER_MAX_DEGREE)"
        )));
    }
    Ok(())
}

fn fixture_name(input: &str) -> Option<&str> {
    input.strip_prefix("fixture:")
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &str) -> QResult<T> {
    let data = std::fs::read_to_string(path)
        .map_err(|e| QError::Parse(format!("cannot read {path}: {e}")))?;
    serde_json::from_str(&data).map_err(|e| {
        QError::Parse(format!("{path}:{}:{}: {e}", e.line(), e.column()))
    })
}

fn load_diagram(input: &str, order: usize) -> QResult<ScatteringDiagram> {
    if let Some(name) = fixture_name(input) {
        return fixtures::diagram_by_name(name, order);
    }
    let spec: crate::scattering::DiagramSpec = read_json(input)?;
    ScatteringDiagram::from_spec(&spec)
}

/// Parse a charge list: `v1,v3` for ray points, `0` for the origin, or
/// `chart:a:b` triples.
pub fn parse_charges(s: &str, surface: &TropicalSurface) -> QResult<Vec<ChartVector>> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        if item == "0" {
            out.push(ChartVector::new(0, 0, 0));
            continue;
        }
        if let Some(n) = item.strip_prefix('v') {
            let j: usize = n
                .parse()
                .map_err(|_| QError::Parse(format!("bad charge {item}")))?;
            if j == 0 || j > surface.ray_count() {
                return Err(QError::Parse(format!(
                    "charge {item} out of range (1..={})",
                    surface.ray_count()
                )));
            }
            out.push(ChartVector::new(j - 1, 1, 0));
            continue;
        }
        let parts: Vec<&str> = item.split(':').collect();
        if parts.len() == 3 {
            let chart: usize =
                parts[0].parse().map_err(|_| QError::Parse(format!("bad charge {item}")))?;
            let a: i64 =
                parts[1].parse().map_err(|_| QError::Parse(format!("bad charge {item}")))?;
            let b: i64 =
                parts[2].parse().map_err(|_| QError::Parse(format!("bad charge {item}")))?;
            out.push(ChartVector::new(chart, a, b));
            continue;
        }
        return Err(QError::Parse(format!("bad charge {item}")));
    }
    Ok(out)
}

fn charge_json(p: &ChartVector) -> Value {
    json!({"chart": p.chart, "coords": [p.coords.0, p.coords.1]})
}

fn class_json(surface: &TropicalSurface, class: &crate::affine::CurveClass) -> Value {
    let shown = nice_representative(surface, class);
    let map: BTreeMap<String, i64> = surface
        .labels()
        .iter()
        .zip(&shown.0)
        .filter(|(_, m)| **m != 0)
        .map(|(l, m)| (l.clone(), *m))
        .collect();
    serde_json::to_value(map).unwrap()
}

/// `scatter`: read a seed, complete it on the plane, report the added walls
/// and the loop identity.
pub fn cmd_scatter(config: &RunConfig) -> QResult<Outcome> {
    check_order(config.order)?;
    let seed: Seed = if let Some(name) = fixture_name(&config.input) {
        match name {
            "pentagon" => fixtures::pentagon_seed(),
            other => return Err(QError::Parse(format!("fixture {other} is not a seed"))),
        }
    } else {
        read_json(&config.input)?
    };
    let seeded = build_seed_diagram(&seed, config.order)?;
    let completed = complete(&seeded)?;
    let report = check_loop_identity(&completed)?;
    let added: Vec<&crate::scattering::Wall> =
        completed.walls.iter().filter(|w| !w.incoming).collect();
    let json = json!({
        "diagram": serde_json::to_value(completed.to_spec()).map_err(to_parse)?,
        "added_walls": added.len(),
        "loop_identity": report.passed(),
    });
    let mut text = String::new();
    text.push_str(&format!(
        "completed diagram: {} walls ({} added), loop identity: {}\n",
        completed.walls.len(),
        added.len(),
        if report.passed() { "pass" } else { "FAIL" }
    ));
    text.push_str(&ascii_walls(&completed));
    Ok(Outcome { exit: 0, json, text })
}

/// `canonical`: seed plus surface, pulled-back canonical diagram.
pub fn cmd_canonical(config: &RunConfig) -> QResult<Outcome> {
    check_order(config.order)?;
    let diagram = if let Some(name) = fixture_name(&config.input) {
        match name {
            "pentagon-canonical" => fixtures::pentagon_canonical_diagram(config.order)?,
            "dp5" => fixtures::dp5_diagram(config.order),
            other => {
                return Err(QError::Parse(format!("fixture {other} has no canonical model")))
            }
        }
    } else {
        #[derive(Deserialize)]
        struct CanonicalInput {
            seed: Seed,
            surface: SurfaceSpec,
        }
        let input: CanonicalInput = read_json(&config.input)?;
        let surface = TropicalSurface::from_spec(&input.surface)?;
        canonical_diagram(&input.seed, &surface, config.order)?
    };
    let json = json!({
        "diagram": serde_json::to_value(diagram.to_spec()).map_err(to_parse)?,
        "walls": diagram.walls.len(),
    });
    let text = format!("canonical diagram: {} walls\n{}", diagram.walls.len(), ascii_walls(&diagram));
    Ok(Outcome { exit: 0, json, text })
}

fn to_parse(e: serde_json::Error) -> QError {
    QError::Parse(e.to_string())
}

/// One structure-constant row as JSON, with coefficients as Laurent data.
fn row_json(
    surface: &TropicalSurface,
    row: &crate::brokenlines::ProductRow,
) -> QResult<Value> {
    let mut terms = Vec::new();
    for (p, coeff) in &row.terms {
        for (class, scalar) in &coeff.terms {
            let laurent: QLaurent = scalar.as_laurent()?;
            terms.push(json!({
                "p": charge_json(p),
                "class": class_json(surface, class),
                "q": serde_json::to_value(&laurent).map_err(to_parse)?,
            }));
        }
    }
    Ok(json!({
        "p1": charge_json(&row.p1),
        "p2": charge_json(&row.p2),
        "terms": terms,
    }))
}

fn q_eval_text(config: &RunConfig, scalar: &crate::qcoeff::QScalar) -> String {
    let Some((n, d)) = config.q_eval else { return String::new() };
    let s = num_rational::BigRational::new(n.into(), d.into());
    match scalar.eval_rational(&s) {
        Some(v) => format!(" [= {v} at q^(1/2) = {n}/{d}]"),
        None => " [pole at the evaluation point]".to_string(),
    }
}

fn row_text(surface: &TropicalSurface, row: &crate::brokenlines::ProductRow) -> String {
    let name = |p: &ChartVector| {
        if p.coords == (0, 0) {
            "theta_0".to_string()
        } else if p.coords == (1, 0) {
            format!("theta_v{}", p.chart + 1)
        } else {
            format!("theta_({}:{}:{})", p.chart, p.coords.0, p.coords.1)
        }
    };
    let mut rhs = Vec::new();
    for (p, coeff) in &row.terms {
        for (class, scalar) in &coeff.terms {
            let mut factors = Vec::new();
            let st = scalar_text(scalar);
            if st != "1" {
                factors.push(format!("({st})"));
            }
            let shown = nice_representative(surface, class);
            for (l, m) in surface.labels().iter().zip(&shown.0) {
                if *m == 1 {
                    factors.push(format!("z^{l}"));
                } else if *m != 0 {
                    factors.push(format!("z^({m}{l})"));
                }
            }
            factors.push(name(p));
            rhs.push(factors.join("*"));
        }
    }
    if rhs.is_empty() {
        rhs.push("0".to_string());
    }
    format!("{}*{} = {}", name(&row.p1), name(&row.p2), rhs.join(" + "))
}

/// `theta`: structure-constant rows for all ordered pairs from the charge
/// list.
pub fn cmd_theta(config: &RunConfig) -> QResult<Outcome> {
    check_order(config.order)?;
    let diagram = load_diagram(&config.input, config.order)?;
    let surface = diagram.base.surface()?.clone();
    let charges = match &config.charges {
        Some(s) => parse_charges(s, &surface)?,
        None => fixture_name(&config.input)
            .and_then(|n| fixtures::generators_by_name(n).ok())
            .map(|(g, _)| g)
            .ok_or_else(|| QError::Parse("--charges required for file inputs".into()))?,
    };
    let mut algebra = ThetaAlgebra::lazy(&diagram, charges.clone())?;
    algebra.retry_base = config.retry_seed;
    let mut rows_json = Vec::new();
    let mut text = String::new();
    for p1 in &charges {
        for p2 in &charges {
            let row = algebra.row(p1, p2)?.clone();
            rows_json.push(row_json(&surface, &row)?);
            text.push_str(&row_text(&surface, &row));
            if config.q_eval.is_some() {
                for coeff in row.terms.values() {
                    for scalar in coeff.terms.values() {
                        text.push_str(&q_eval_text(config, scalar));
                    }
                }
            }
            text.push('\n');
        }
    }
    Ok(Outcome { exit: 0, json: json!({"rows": rows_json}), text })
}

/// `relations`: generators-and-relations presentation.
pub fn cmd_relations(config: &RunConfig) -> QResult<Outcome> {
    check_order(config.order)?;
    let (diagram, generators, names) = if let Some(name) = fixture_name(&config.input) {
        let d = fixtures::diagram_by_name(name, config.order)?;
        let (g, n) = fixtures::generators_by_name(name)?;
        (d, g, n)
    } else {
        #[derive(Deserialize)]
        struct RelInput {
            diagram: crate::scattering::DiagramSpec,
            generators: Vec<(usize, i64, i64)>,
            #[serde(default)]
            names: Vec<String>,
        }
        let input: RelInput = read_json(&config.input)?;
        let d = ScatteringDiagram::from_spec(&input.diagram)?;
        let g: Vec<ChartVector> = input
            .generators
            .iter()
            .map(|(c, a, b)| ChartVector::new(*c, *a, *b))
            .collect();
        let n = if input.names.is_empty() {
            crate::mirror::default_generator_names(g.len())
        } else {
            input.names
        };
        (d, g, n)
    };
    let mut algebra = ThetaAlgebra::lazy(&diagram, generators.clone())?;
    let relations = derive_relations(&mut algebra, &generators, &names)?;
    let mut verified = true;
    for r in &relations {
        verified &= crate::mirror::verify_relation(&mut algebra, &generators, r)?;
    }
    let json = json!({
        "generators": generators.iter().map(charge_json).collect::<Vec<_>>(),
        "names": names,
        "relations": relations.iter().map(|r| json!({
            "text": r.text,
            "lhs": words_json(&r.lhs),
            "rhs": words_json(&r.rhs),
        })).collect::<Vec<_>>(),
        "verified": verified,
    });
    let mut text = String::new();
    for r in &relations {
        text.push_str(&r.text);
        text.push('\n');
    }
    text.push_str(&format!("verified: {verified}\n"));
    Ok(Outcome { exit: if verified { 0 } else { 1 }, json, text })
}

fn words_json(ws: &crate::mirror::WordSum) -> Value {
    let terms: Vec<Value> = ws
        .terms
        .iter()
        .map(|(coeff, word)| {
            let classes: Vec<Value> = coeff
                .terms
                .iter()
                .map(|(cl, v)| {
                    json!({
                        "class": cl.0,
                        "coeff": scalar_text(v),
                    })
                })
                .collect();
            json!({"coefficient": classes, "word": word})
        })
        .collect();
    json!(terms)
}

/// `check`: consistency on the surface plus the torus-weight grading and
/// the Laurent-polynomiality sweep over all pair products of the charges.
pub fn cmd_check(config: &RunConfig) -> QResult<Outcome> {
    check_order(config.order)?;
    let diagram = load_diagram(&config.input, config.order)?;
    // Plane diagrams are checked through the loop identity.
    if diagram.base.surface().is_err() {
        let report = check_loop_identity(&diagram)?;
        let pass = report.passed();
        let json = json!({
            "loop_identity": pass,
            "detail": format!("{report:?}"),
        });
        let text = format!("loop identity: {}\n", if pass { "pass" } else { "FAIL" });
        return Ok(Outcome { exit: if pass { 0 } else { 1 }, json, text });
    }
    let surface = diagram.base.surface()?.clone();
    let charges = match &config.charges {
        Some(s) => parse_charges(s, &surface)?,
        None => (0..surface.ray_count()).map(|j| ChartVector::new(j, 1, 0)).collect(),
    };

    let mut failures: Vec<String> = Vec::new();
    let consistency = if surface.all_kinks_positive() && surface.ray_count() >= 3 {
        match consistency_check_on_b(&diagram, &charges)? {
            ConsistencyReport::Pass => true,
            ConsistencyReport::Fail { context } => {
                failures.push(format!("consistency: {context}"));
                false
            }
        }
    } else {
        true
    };

    let mut algebra = ThetaAlgebra::lazy(&diagram, charges.clone())?;
    algebra.retry_base = config.retry_seed;
    let mut integral = true;
    let mut graded = true;
    for p1 in &charges {
        for p2 in &charges {
            let row = algebra.row(p1, p2)?.clone();
            for (p, coeff) in &row.terms {
                for (class, scalar) in &coeff.terms {
                    if scalar.as_laurent().is_err() {
                        integral = false;
                        failures.push(format!(
                            "non-Laurent coefficient at θ_{:?} of θ_{:?}·θ_{:?} (class {:?})",
                            p, p1, p2, class.0
                        ));
                    }
                }
            }
            if surface.has_pairing() {
                let bad = weight_check(&surface, &row)?;
                if !bad.is_empty() {
                    graded = false;
                    failures.extend(bad);
                }
            }
        }
    }

    let ok = consistency && integral && graded;
    let json = json!({
        "consistency": consistency,
        "q_integrality": integral,
        "torus_grading": graded,
        "failures": failures,
    });
    let mut text = format!(
        "consistency: {}\nq-integrality: {}\ntorus grading: {}\n",
        if consistency { "pass" } else { "FAIL" },
        if integral { "pass" } else { "FAIL" },
        if graded { "pass" } else { "FAIL" },
    );
    for f in &failures {
        text.push_str(&format!("  {f}\n"));
    }
    Ok(Outcome { exit: if ok { 0 } else { 1 }, json, text })
}

/// Minimal ASCII dump of wall supports, one line per wall.
fn ascii_walls(diagram: &ScatteringDiagram) -> String {
    let mut out = String::new();
    for w in &diagram.walls {
        let kind = if w.incoming { "line" } else { "ray " };
        out.push_str(&format!(
            "  {} chart {} dir ({}, {})  [{} terms]\n",
            kind,
            w.chart,
            w.dir.0,
            w.dir.1,
            w.f.len() - 1
        ));
    }
    out
}

/// Render and deliver an outcome per the configuration; returns the exit
/// code.
pub fn deliver(config: &RunConfig, outcome: &Outcome) -> i32 {
    let body = match config.format {
        OutputFormat::Json => serde_json::to_string_pretty(&outcome.json).unwrap(),
        OutputFormat::Text => outcome.text.clone(),
    };
    match &config.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, body) {
                eprintln!("cannot write {}: {e}", path.display());
                return 2;
            }
        }
        None => println!("{body}"),
    }
    outcome.exit
}

#[derive(Serialize)]
struct ErrorReport {
    error: String,
}

/// Map an error to its report and exit code 2.
pub fn error_outcome(e: &QError) -> Outcome {
    Outcome {
        exit: 2,
        json: serde_json::to_value(ErrorReport { error: e.to_string() }).unwrap(),
        text: format!("error: {e}\n"),
    }
}
