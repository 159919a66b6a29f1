//! End-to-end acceptance criteria. Runs as a plain binary so every
//! criterion prints its own PASS/FAIL line even when captured.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use prefpcp_core::embed::radar_profile;
use prefpcp_core::frontfit::{fit_front, FrontModel};
use prefpcp_core::ingest::{generate_synthetic, parse_csv, Dataset, EvaluationRecord, SyntheticSpec};
use prefpcp_core::pareto::{metric_extrema, pareto_front, MetricExtrema};
use prefpcp_core::pcpmodel::{color_param, colormap, Rgb};
use prefpcp_core::pipeline::Analysis;
use prefpcp_core::preference::{
    bi_metric_weights, normal_angle, optimal_weights, project_to_front, PreferencePoint, WeightVector,
};
use prefpcp_core::EmbedOptions;
use prefpcp_service::{router, AppState, ServiceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(id: &str, title: &str, limit: Option<Duration>, check: fn() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let outcome = match (outcome, limit) {
        (Ok(_), Some(max)) if elapsed > max => Err(format!("took {elapsed:.2?}, limit {max:.0?}")),
        (other, _) => other,
    };
    let secs = elapsed.as_secs_f64();
    match &outcome {
        Ok(detail) => println!("PASS {id} {title} ({secs:.3} s): {detail}"),
        Err(detail) => println!("FAIL {id} {title} ({secs:.3} s): {detail}"),
    }
    outcome.is_ok()
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        run("A1", "two-metric closed form matches general weights", Some(secs(1)), dual_path_weights),
        run("A2", "preferred point minimizes its weighted metric", Some(secs(30)), tangency),
        run("A3", "noise-free fronts are recovered", Some(secs(60)), fit_recovery),
        run("A4", "projection is the nearest front point", Some(secs(60)), projection_optimality),
        run("A5", "Pareto extraction matches brute force", Some(secs(30)), pareto_oracle),
        run("A6", "upload to colored plot through the service", Some(secs(30)), end_to_end),
        run("A7", "radar anchors", None, radar_anchors),
        run("A8", "CLI pipeline is byte-for-byte repeatable", None, cli_determinism),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn random_model(rng: &mut ChaCha8Rng, m: usize) -> FrontModel {
    let a = (0..m).map(|_| rng.random_range(-1.0..=0.0)).collect();
    FrontModel::new(a, rng.random_range(0.1..=10.0)).unwrap()
}

/// A point on the surrogate with the given log-gaps for the first `M - 1`
/// metrics.
fn surface_point(model: &FrontModel, log_gaps: &[f64]) -> Vec<f64> {
    let a = model.a();
    let mut f: Vec<f64> = log_gaps.iter().zip(a).map(|(t, a)| a + t.exp()).collect();
    let partial: f64 = log_gaps.iter().map(|t| t.exp()).product();
    f.push(a[a.len() - 1] + model.b() / partial);
    f
}

/// Log-gaps drawn around the whole front and tightly around `center`.
fn dense_samples(rng: &mut ChaCha8Rng, model: &FrontModel, center: &[f64], count: usize) -> Vec<Vec<f64>> {
    let m = model.n_metrics();
    let base: Vec<f64> = center[..m - 1].iter().zip(model.a()).map(|(f, a)| (f - a).ln()).collect();
    (0..count)
        .map(|k| {
            let spread = if k % 2 == 0 { 4.0 } else { 0.02 };
            let t: Vec<f64> = base.iter().map(|c| c + rng.random_range(-spread..=spread)).collect();
            surface_point(model, &t)
        })
        .collect()
}

fn phi(w: &WeightVector, f: &[f64]) -> f64 {
    w.as_slice().iter().zip(f).map(|(w, f)| w * f).sum()
}

fn dual_path_weights() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let model = random_model(&mut rng, 2);
        let center = model.b().ln() / 2.0;
        for _ in 0..100 {
            let f = surface_point(&model, &[center + rng.random_range(-3.0..=3.0)]);
            let closed = bi_metric_weights(model.bi_metric_slope(f[0]).unwrap()).unwrap();
            let general = optimal_weights(&model, &PreferencePoint::direct(&model, f).unwrap()).unwrap();
            for (x, y) in closed.as_slice().iter().zip(general.as_slice()) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    ensure(worst <= 1e-10, || format!("component deviation {worst:e} > 1e-10"))?;
    Ok(format!("10000 points, max deviation {worst:.1e}"))
}

fn tangency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::NEG_INFINITY;
    for front in 0..20u64 {
        let m = [2, 3, 4][front as usize % 3];
        let offsets: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=0.0)).collect();
        let level = rng.random_range(0.1..=10.0);
        let spec = SyntheticSpec {
            n_params: 3,
            n_metrics: m,
            n_records: 300,
            offsets,
            level,
            noise: 0.2 * level.powf(1.0 / m as f64),
            seed: front,
        };
        let pareto = pareto_front(&generate_synthetic(&spec).unwrap());
        let model = fit_front(&pareto).map_err(|e| format!("front {front}: {e}"))?;
        for _ in 0..10 {
            let f_r = &pareto.points[rng.random_range(0..pareto.len())];
            let point = project_to_front(&model, f_r).map_err(|e| format!("front {front}: {e}"))?;
            let w = optimal_weights(&model, &point).unwrap();
            let at_u = phi(&w, point.f_u());
            let best = dense_samples(&mut rng, &model, point.f_u(), 10_000)
                .iter()
                .map(|s| phi(&w, s))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(at_u - best);
            ensure(at_u <= best + 1e-9, || format!("front {front} (M={m}): phi(f_u) - min = {:e}", at_u - best))?;
        }
    }
    Ok(format!("200 points, max phi(f_u) - sample min {worst:.1e}"))
}

fn fit_recovery() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_param, mut worst_rms) = (0.0f64, 0.0f64);
    for draw in 0..50u64 {
        let m = 2 + draw as usize % 2;
        let truth = random_model(&mut rng, m);
        let spec = SyntheticSpec {
            n_params: 2,
            n_metrics: m,
            n_records: 200,
            offsets: truth.a().to_vec(),
            level: truth.b(),
            noise: 0.0,
            seed: draw,
        };
        let model = fit_front(&pareto_front(&generate_synthetic(&spec).unwrap()))
            .map_err(|e| format!("draw {draw}: {e}"))?;
        let err = model
            .a()
            .iter()
            .zip(truth.a())
            .map(|(x, y)| (x - y).abs())
            .fold((model.b() - truth.b()).abs(), f64::max);
        worst_param = worst_param.max(err);
        worst_rms = worst_rms.max(model.fit_rms());
        ensure(err <= 1e-6, || format!("draw {draw} (M={m}): parameter error {err:e}"))?;
        ensure(model.fit_rms() <= 1e-8, || format!("draw {draw} (M={m}): fit_rms {:e}", model.fit_rms()))?;
    }
    Ok(format!("50 fronts, max parameter error {worst_param:.1e}, max fit_rms {worst_rms:.1e}"))
}

fn projection_optimality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_gap, mut worst_feas, mut worst_angle) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for pair in 0..100 {
        let m = 2 + pair % 3;
        let model = random_model(&mut rng, m);
        let center = model.b().ln() / m as f64;
        let f_r: Vec<f64> = model.a().iter().map(|a| a + (center + rng.random_range(-2.0..=2.0)).exp()).collect();
        let point = project_to_front(&model, &f_r).map_err(|e| format!("pair {pair}: {e}"))?;
        let best = dense_samples(&mut rng, &model, point.f_u(), 10_000)
            .iter()
            .map(|s| s.iter().zip(&f_r).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        let feas = model.eval(point.f_u()).unwrap().abs() / model.b();
        let angle = normal_angle(&model, &f_r, point.f_u()).unwrap();
        worst_gap = worst_gap.max(point.distance() - best);
        worst_feas = worst_feas.max(feas);
        worst_angle = worst_angle.max(angle);
        ensure(point.distance() <= best + 1e-6, || {
            format!("pair {pair}: distance {} > sample best {best}", point.distance())
        })?;
        ensure(feas <= 1e-8, || format!("pair {pair}: relative feasibility {feas:e}"))?;
        ensure(angle < 1e-4, || format!("pair {pair}: stationarity angle {angle:e}"))?;
    }
    Ok(format!(
        "100 pairs, max distance - sample best {worst_gap:.1e}, max |g-b|/b {worst_feas:.1e}, max angle {worst_angle:.1e}"
    ))
}

fn brute_force_front(points: &[Vec<f64>]) -> Vec<usize> {
    let dominates = |p: &[f64], q: &[f64]| p.iter().zip(q).all(|(x, y)| x <= y) && p.iter().zip(q).any(|(x, y)| x < y);
    (0..points.len())
        .filter(|&i| !(0..points.len()).any(|j| j != i && dominates(&points[j], &points[i])))
        .collect()
}

fn pareto_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut total = 0;
    for set in 0..200 {
        let n = rng.random_range(1..=500);
        let m = rng.random_range(1..=5);
        let discrete = set % 2 == 0;
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| if discrete { f64::from(rng.random_range(0..6u8)) } else { rng.random::<f64>() })
                    .collect()
            })
            .collect();
        let records = points
            .iter()
            .map(|f| EvaluationRecord { params: vec![0.0], metrics: f.clone() })
            .collect();
        let names = (0..m).map(|k| format!("f{k}")).collect();
        let ds = Dataset::new(vec!["x".into()], names, records, None).unwrap();
        let expected = brute_force_front(&points);
        let got = pareto_front(&ds).indices;
        ensure(got == expected, || format!("dataset {set} (N={n}, M={m}): {} vs {} members", got.len(), expected.len()))?;
        total += n;
    }
    Ok(format!("200 datasets, {total} records"))
}

async fn send(app: &Router, method: Method, uri: &str, content_type: &str, body: String) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, content_type)
        .body(Body::from(body))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn end_to_end() -> Check {
    let runtime = tokio::runtime::Runtime::new().unwrap();
    runtime.block_on(async {
        let csv = generate_synthetic(&SyntheticSpec::experiment_shape(0)).unwrap().to_csv();
        let app = router(Arc::new(AppState::new(ServiceConfig::default())));
        let (status, summary) = send(&app, Method::POST, "/datasets", "text/csv", csv.clone()).await;
        ensure(status == StatusCode::CREATED, || format!("upload returned {status}: {summary}"))?;
        let id = summary["id"].as_str().unwrap().to_string();
        ensure((summary["n"].as_u64(), summary["d"].as_u64(), summary["m"].as_u64()) == (Some(1000), Some(5), Some(3)), || {
            format!("unexpected shape {summary}")
        })?;

        let (status, grid) = send(&app, Method::GET, &format!("/datasets/{id}/radar-grid"), "", String::new()).await;
        ensure(status == StatusCode::OK, || format!("radar grid returned {status}"))?;
        let cells = grid["cells"].as_array().unwrap();
        ensure(cells.len() >= 3, || format!("only {} occupied cells", cells.len()))?;
        let picks = [&cells[0], &cells[cells.len() / 2], &cells[cells.len() - 1]];

        let offsets = Analysis::build(parse_csv(&csv).unwrap(), EmbedOptions::default())
            .map_err(|e| e.to_string())?
            .front()
            .a()
            .to_vec();
        let mut weight_sets: Vec<Vec<f64>> = Vec::new();
        let mut min_lines = usize::MAX;
        for cell in picks {
            let body = serde_json::json!({"cell": [cell["i"], cell["j"]]}).to_string();
            let uri = format!("/datasets/{id}/preference?top_k=30");
            let (status, out) = send(&app, Method::POST, &uri, "application/json", body).await;
            ensure(status == StatusCode::OK, || format!("preference returned {status}: {out}"))?;

            let pcp = &out["pcp"];
            let axes = pcp["axes"].as_array().unwrap().len();
            ensure(axes == 8, || format!("{axes} axes"))?;
            let lines = pcp["polylines"].as_array().unwrap();
            ensure(lines.len() >= 30, || format!("{} polylines", lines.len()))?;
            min_lines = min_lines.min(lines.len());
            check_color_order(lines)?;

            let w = floats(&out["weights"]);
            let f_u = floats(&out["f_u"]);
            for i in 0..w.len() {
                for j in 0..w.len() {
                    let heavier = w[i] > w[j];
                    let closer = f_u[i] - offsets[i] < f_u[j] - offsets[j];
                    ensure(heavier == closer, || format!("ordering law fails for metrics {i},{j}: w={w:?}"))?;
                }
            }
            weight_sets.push(w);
        }
        for i in 0..weight_sets.len() {
            for j in i + 1..weight_sets.len() {
                ensure(weight_sets[i] != weight_sets[j], || format!("selections {i} and {j} share weights"))?;
            }
        }
        Ok(format!("{} cells, 3 selections, at least {min_lines} polylines, weights {weight_sets:.3?}", cells.len()))
    })
}

/// Sorted by phi, each color sits strictly further from the first stop
/// whenever phi strictly increases, and is the colormap at that position.
fn check_color_order(lines: &[Value]) -> Result<(), String> {
    let mut entries: Vec<(f64, Rgb)> = lines
        .iter()
        .map(|l| {
            let c = l["color"].as_array().unwrap();
            let rgb = Rgb([0, 1, 2].map(|k| c[k].as_u64().unwrap() as u8));
            (l["phi"].as_f64().unwrap(), rgb)
        })
        .collect();
    entries.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (lo, hi) = (entries[0].0, entries[entries.len() - 1].0);
    let mut prev: Option<(f64, f64)> = None;
    for &(phi, rgb) in &entries {
        let t = color_param(phi, lo, hi).map_err(|e| e.to_string())?;
        ensure(colormap(t) == rgb, || format!("color {rgb:?} is not the colormap at {t}"))?;
        if let Some((p, s)) = prev {
            ensure(phi == p || t > s, || format!("phi {p} -> {phi} maps to {s} -> {t}"))?;
        }
        prev = Some((phi, t));
    }
    Ok(())
}

fn radar_anchors() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut check = |extrema: &MetricExtrema| -> Result<(), String> {
        let mid: Vec<f64> = extrema.f_min.iter().zip(&extrema.f_max).map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        for (probe, want) in [(&extrema.f_min, 1.0), (&extrema.f_max, 0.0), (&mid, 0.5)] {
            for (m, r) in radar_profile(probe, extrema).iter().enumerate() {
                worst = worst.max((r - want).abs());
                ensure((r - want).abs() <= 1e-12, || format!("metric {m}: radar {r}, expected {want}"))?;
            }
        }
        Ok(())
    };
    for _ in 0..100 {
        let m = rng.random_range(1..=6);
        let f_min: Vec<f64> = (0..m).map(|_| rng.random_range(-100.0..100.0)).collect();
        let f_max = f_min.iter().map(|lo| lo + rng.random_range(1e-3..1e3)).collect();
        check(&MetricExtrema { f_min, f_max })?;
    }
    let pareto = pareto_front(&generate_synthetic(&SyntheticSpec::experiment_shape(7)).unwrap());
    check(&metric_extrema(&pareto.points).unwrap())?;
    Ok(format!("101 extrema sets, max deviation {worst:.1e}"))
}

fn prefpcp(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_prefpcp"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("`prefpcp {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(out.stdout)
}

fn cli_pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    prefpcp(dir, &["synth", "--seed", "3", "--out", "data.csv"])?;
    let mut outputs = vec![
        ("fit stdout".to_string(), prefpcp(dir, &["fit", "data.csv", "--out", "model.json"])?),
        ("radar stdout".to_string(), prefpcp(dir, &["radar", "data.csv", "--out", "grid.json"])?),
    ];
    let grid: Value = serde_json::from_slice(&std::fs::read(dir.join("grid.json")).unwrap()).unwrap();
    let cell = &grid["cells"][0];
    let cell = format!("{},{}", cell["i"], cell["j"]);
    let render = ["render", "data.csv", "--cell", &cell, "--json", "pcp.json", "--svg", "pcp.svg"];
    outputs.push(("render stdout".to_string(), prefpcp(dir, &render)?));
    for file in ["model.json", "grid.json", "pcp.json", "pcp.svg"] {
        outputs.push((file.to_string(), std::fs::read(dir.join(file)).map_err(|e| e.to_string())?));
    }
    Ok(outputs)
}

fn cli_determinism() -> Check {
    let (first, second) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = cli_pipeline(first.path())?;
    let b = cli_pipeline(second.path())?;
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        ensure(x == y, || format!("{name} differs between runs"))?;
        ensure(!x.is_empty(), || format!("{name} is empty"))?;
    }
    Ok(format!("{} outputs identical across two runs", a.len()))
}
