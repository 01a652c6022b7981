use costroute::estimator::{oracle_estimates, predict_split};
use costroute::eval::{curve_from_estimates, default_lambda_grid, DeferralCurve};
use costroute::imgmetrics::{convolve, gaussian_kernel, sharpness, Image};
use costroute::pool::RoutingPool;
use costroute::router::{route, RouterConfig};
use costroute::synth::{self, assignment_point};
use costroute::{KnnIndex, LabelScaler, QualityEstimate, Split};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub cost: f64,
    pub quality: f64,
    /// Share of prompts sent to the cheap model.
    pub cheap_rate: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepResult {
    pub knn: Vec<CurvePoint>,
    pub oracle: Vec<CurvePoint>,
    /// `(cost, quality)` of sending everything to one model, in pool order.
    pub fixed: Vec<(String, f64, f64)>,
}

fn points(curve: DeferralCurve) -> Vec<CurvePoint> {
    curve
        .points
        .into_iter()
        .map(|p| CurvePoint { lambda: p.lambda, cost: p.avg_cost, quality: p.avg_quality, cheap_rate: p.rates[0].1 })
        .collect()
}

pub fn sweep_two_cluster(jitter: f64, sigma_q: f64, k: usize, seed: u64) -> Result<SweepResult, String> {
    let mut spec = synth::two_cluster_spec();
    spec.jitter = jitter;
    spec.sigma_q = sigma_q;
    spec.seed = seed;
    let (ds, _) = synth::generate(&spec).map_err(|e| e.to_string())?;
    let train = ds.split(Split::Train);
    let test = ds.split(Split::Test);
    let scaler = LabelScaler::fit_dataset(&train).map_err(|e| e.to_string())?;
    let knn = KnnIndex::build(&train, k, scaler).map_err(|e| e.to_string())?;
    let grid = default_lambda_grid(1e-4, 1.0, 60);
    let est = predict_split(&knn, &test).map_err(|e| e.to_string())?;
    let knn_curve = curve_from_estimates(&est, &test, &grid).map_err(|e| e.to_string())?;
    let oracle_curve =
        curve_from_estimates(&oracle_estimates(&test, &scaler), &test, &grid).map_err(|e| e.to_string())?;
    let fixed = test
        .pool
        .models()
        .iter()
        .enumerate()
        .map(|(m, model)| {
            let p = assignment_point(&test, &vec![m; test.len()]);
            (model.id.clone(), p.cost, p.quality)
        })
        .collect();
    Ok(SweepResult { knn: points(knn_curve), oracle: points(oracle_curve), fixed })
}

#[derive(Debug, Serialize)]
pub struct PatternResult {
    pub size: usize,
    /// Row-major gray levels in [0, 1] after blurring.
    pub pixels: Vec<f64>,
    pub sharpness: f64,
    /// Sharpness after 0, 1, ..., `passes` blurs.
    pub history: Vec<f64>,
}

fn pattern(kind: &str, size: usize) -> Result<Image, String> {
    let n = size as f64;
    let f: Box<dyn Fn(usize, usize) -> f64> = match kind {
        "checkerboard" => Box::new(|x, y| ((x / 2 + y / 2) % 2) as f64),
        "stripes" => Box::new(|x, _| ((x / 3) % 2) as f64),
        "impulse" => Box::new(move |x, y| if x == size / 2 && y == size / 2 { 1.0 } else { 0.0 }),
        "ramp" => Box::new(move |x, y| (x + y) as f64 / (2.0 * (n - 1.0)).max(1.0)),
        "disc" => Box::new(move |x, y| {
            let (dx, dy) = (x as f64 - n / 2.0, y as f64 - n / 2.0);
            if dx * dx + dy * dy < n * n / 9.0 {
                1.0
            } else {
                0.15
            }
        }),
        other => return Err(format!("unknown pattern \"{other}\"")),
    };
    Image::from_fn(size, size, f).map_err(|e| e.to_string())
}

pub fn sharpness_pattern(kind: &str, size: usize, passes: usize) -> Result<PatternResult, String> {
    if !(2..=256).contains(&size) {
        return Err("size must be between 2 and 256".into());
    }
    let kernel = gaussian_kernel(1.0).map_err(|e| e.to_string())?;
    let mut img = pattern(kind, size)?;
    let mut history = vec![sharpness(&img)];
    for _ in 0..passes.min(20) {
        img = convolve(&img, &kernel);
        history.push(sharpness(&img));
    }
    Ok(PatternResult { size, pixels: img.data().to_vec(), sharpness: *history.last().unwrap(), history })
}

#[derive(Debug, Serialize)]
pub struct RouteResult {
    /// 0-based index of the chosen model.
    pub chosen: usize,
    pub adjusted: Vec<f64>,
}

pub fn route_one(estimates: &[f64], costs: &[f64], lambda: f64) -> Result<RouteResult, String> {
    let pool = RoutingPool::from_costs(costs.iter().enumerate().map(|(i, &c)| (format!("m{i}"), c)))
        .map_err(|e| e.to_string())?;
    let cfg = RouterConfig::new(lambda).map_err(|e| e.to_string())?;
    let d = route(&QualityEstimate(estimates.to_vec()), &pool, &cfg).map_err(|e| e.to_string())?;
    Ok(RouteResult { chosen: d.chosen, adjusted: d.adjusted })
}
