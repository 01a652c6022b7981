use std::path::Path;

use costroute::estimator::{oracle_estimates, predict_split, TrainConfig};
use costroute::eval::{self, curve_from_estimates, log_grid, Qnc};
use costroute::imgmetrics::{decode_pnm, sharpness};
use costroute::pool::{featurize_prompt, load_dataset, load_pool};
use costroute::router::{average_cost, calibrate_lambda, route_estimates};
use costroute::synth::{self, brute_force_frontier, SynthSpec};
use costroute::{
    fmt_real, Dataset, KnnIndex, LabelScaler, MlpModel, QualityEstimate, RouteDecision, RouterConfig, RoutingPool,
    SavedEstimator, Split,
};
use serde::Deserialize;
use serde_json::json;

use crate::args::*;
use crate::output::{emit, read, write_atomic, Staged};
use crate::{CmdResult, Failure};

pub(crate) fn dispatch(cmd: Command, out: &mut Vec<u8>) -> CmdResult {
    match cmd {
        Command::Pool(PoolCommand::Validate { pool, data }) => pool_validate(&pool, data.as_deref(), out),
        Command::Featurize(a) => featurize(&a),
        Command::Train(TrainCommand::Knn(a)) => train_knn(&a, out),
        Command::Train(TrainCommand::Mlp(a)) => train_mlp(&a, out),
        Command::Route(a) => route(&a, out),
        Command::Calibrate(a) => calibrate(&a, out),
        Command::Sweep(a) => sweep(&a, out),
        Command::Eval(EvalCommand::Qnc { curve, ref_cost, ref_quality }) => {
            eval_qnc(&curve, ref_cost, ref_quality, out)
        }
        Command::Eval(EvalCommand::Rates { pool, decisions }) => eval_rates(&pool, &decisions, out),
        Command::Eval(EvalCommand::Ttest { a, b }) => eval_ttest(&a, &b, out),
        Command::Sharpness(a) => sharpness_cmd(&a, out),
        Command::Synth(SynthCommand::Gen { spec, seed, out_dir }) => synth_gen(spec.as_deref(), seed, &out_dir, out),
        Command::Synth(SynthCommand::Frontier { data, out: path }) => synth_frontier(&data, path.as_deref(), out),
    }
}

fn with_path(path: &Path) -> impl Fn(costroute::Error) -> Failure + '_ {
    move |e| {
        let f = Failure::from(e);
        Failure { msg: format!("{}: {}", path.display(), f.msg), ..f }
    }
}

fn read_pool(path: &Path) -> Result<RoutingPool, Failure> {
    load_pool(&read(path)?).map_err(with_path(path))
}

fn read_dataset(pool: &RoutingPool, path: &Path) -> Result<Dataset, Failure> {
    load_dataset(&read(path)?, pool).map_err(with_path(path))
}

/// The full dataset and the records selected by `--split`.
fn read_data(a: &DataArgs) -> Result<(Dataset, Dataset), Failure> {
    let pool = read_pool(&a.pool)?;
    let full = read_dataset(&pool, &a.data)?;
    let selected = match a.split {
        Some(s) => full.split(s),
        None => full.clone(),
    };
    if selected.is_empty() {
        return Err(Failure::data(format!("{}: no records in the selected split", a.data.display())));
    }
    Ok((full, selected))
}

fn read_estimator(path: &Path) -> Result<SavedEstimator, Failure> {
    SavedEstimator::from_json(&read(path)?).map_err(with_path(path))
}

/// Scaled estimates for `selected`, from a saved estimator or the true labels.
///
/// The oracle scaler is fit on the training split when there is one.
fn estimates(source: &EstimatorArgs, full: &Dataset, selected: &Dataset) -> Result<Vec<QualityEstimate>, Failure> {
    match &source.estimator {
        Some(path) => Ok(predict_split(&read_estimator(path)?, selected).map_err(with_path(path))?),
        None => {
            let train = full.split(Split::Train);
            let scaler = LabelScaler::fit_dataset(if train.is_empty() { selected } else { &train })?;
            Ok(oracle_estimates(selected, &scaler))
        }
    }
}

fn json_line(v: serde_json::Value) -> Vec<u8> {
    let mut s = v.to_string();
    s.push('\n');
    s.into_bytes()
}

fn pool_validate(pool_path: &Path, data: Option<&Path>, out: &mut Vec<u8>) -> CmdResult {
    let pool = read_pool(pool_path)?;
    let mut summary = json!({
        "models": pool.len(),
        "min_cost": pool.min_cost(),
        "max_cost": pool.max_cost(),
    });
    if let Some(path) = data {
        let ds = read_dataset(&pool, path)?;
        summary["records"] = json!(ds.len());
        summary["dim"] = json!(ds.dim);
        for s in [Split::Train, Split::Val, Split::Test] {
            summary[s.to_string()] = json!(ds.records.iter().filter(|r| r.split == s).count());
        }
    }
    out.extend(json_line(summary));
    Ok(())
}

fn featurize(a: &FeaturizeArgs) -> CmdResult {
    if a.dim == 0 {
        return Err(Failure::data("--dim must be positive"));
    }
    let pool = read_pool(&a.pool)?;
    let ds = read_dataset(&pool, &a.data)?;
    let mut records = ds.records;
    for r in &mut records {
        let text = r
            .text
            .as_deref()
            .ok_or_else(|| Failure::data(format!("prompt \"{}\" has no text to featurize", r.prompt_id)))?;
        r.features = featurize_prompt(text, a.dim);
    }
    let ds = Dataset::new(pool, records)?;
    write_atomic(&a.out, ds.to_jsonl().as_bytes())
}

fn train_split(a: &TrainDataArgs) -> Result<Dataset, Failure> {
    let pool = read_pool(&a.pool)?;
    let train = read_dataset(&pool, &a.data)?.split(a.split);
    if train.is_empty() {
        return Err(Failure::data(format!("{}: no {} records", a.data.display(), a.split)));
    }
    Ok(train)
}

fn train_knn(a: &TrainKnnArgs, out: &mut Vec<u8>) -> CmdResult {
    let train = train_split(&a.data)?;
    let scaler = LabelScaler::fit_dataset(&train)?;
    let knn = KnnIndex::build(&train, a.k, scaler)?;
    write_atomic(&a.out, SavedEstimator::Knn(knn).to_json().as_bytes())?;
    out.extend(json_line(json!({"kind": "knn", "n": train.len(), "k": a.k})));
    Ok(())
}

fn train_mlp(a: &TrainMlpArgs, out: &mut Vec<u8>) -> CmdResult {
    let train = train_split(&a.data)?;
    let scaler = LabelScaler::fit_dataset(&train)?;
    let cfg = TrainConfig { epochs: a.epochs, lr: a.lr, batch_size: a.batch, seed: a.seed };
    let init = MlpModel::init(train.dim, a.hidden, train.pool.len(), a.seed)?;
    let (model, report) = init.train(&train, scaler, &cfg)?;
    let params = model.param_count();
    write_atomic(&a.out, SavedEstimator::Mlp(model).to_json().as_bytes())?;
    let final_loss = report.epoch_losses.last().copied().unwrap_or(report.initial_loss);
    out.extend(json_line(json!({
        "kind": "mlp",
        "n": train.len(),
        "params": params,
        "initial_loss": report.initial_loss,
        "final_loss": final_loss,
    })));
    Ok(())
}

fn route(a: &RouteArgs, out: &mut Vec<u8>) -> CmdResult {
    let cfg = RouterConfig::new(a.lambda)?;
    let (full, selected) = read_data(&a.data)?;
    let est = estimates(&a.source, &full, &selected)?;
    let decisions = route_estimates(&est, &selected, &cfg)?;
    let mut text = String::new();
    for d in &decisions {
        text.push_str(&d.to_json_line(cfg.lambda()));
        text.push('\n');
    }
    emit(a.out.as_deref(), text.as_bytes(), out)
}

fn calibrate(a: &CalibrateArgs, out: &mut Vec<u8>) -> CmdResult {
    if !a.budget.is_finite() {
        return Err(Failure::data("--budget must be finite"));
    }
    let (full, selected) = read_data(&a.data)?;
    let est = estimates(&a.source, &full, &selected)?;
    let lambda = calibrate_lambda(&est, &selected.pool, a.budget, a.tol)?;
    let cost = average_cost(&est, &selected.pool.costs(), lambda);
    out.extend(
        format!(
            "{{\"lambda\":{},\"avg_cost\":{},\"budget\":{}}}\n",
            fmt_real(lambda),
            fmt_real(cost),
            fmt_real(a.budget)
        )
        .into_bytes(),
    );
    Ok(())
}

/// Parses `log:<lo>:<hi>:<n>` or a comma list, then prepends 0 unless told not to.
pub(crate) fn parse_lambdas(spec: &str, zero: bool) -> Result<Vec<f64>, Failure> {
    let bad = |msg: &str| Failure::usage(format!("invalid --lambdas \"{spec}\": {msg}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("\"{s}\" is not a number")));
    let mut grid = if let Some(rest) = spec.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(bad("expected log:<lo>:<hi>:<n>"));
        };
        let (lo, hi) = (num(lo)?, num(hi)?);
        let n: usize = n.trim().parse().map_err(|_| bad("point count must be a positive integer"))?;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) || n == 0 {
            return Err(bad("need 0 < lo < hi and n >= 1"));
        }
        log_grid(lo, hi, n)
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(bad("values must be finite and nonnegative"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("values must be strictly increasing"));
    }
    if zero && grid.first() != Some(&0.0) {
        grid.insert(0, 0.0);
    }
    Ok(grid)
}

fn sweep(a: &SweepArgs, out: &mut Vec<u8>) -> CmdResult {
    let lambdas = parse_lambdas(&a.lambdas, !a.no_zero)?;
    let (full, selected) = read_data(&a.data)?;
    let est = estimates(&a.source, &full, &selected)?;
    let curve = curve_from_estimates(&est, &selected, &lambdas)?;
    emit(a.out.as_deref(), curve.to_csv(&selected.pool).as_bytes(), out)
}

fn eval_qnc(path: &Path, ref_cost: f64, ref_quality: f64, out: &mut Vec<u8>) -> CmdResult {
    let text = String::from_utf8(read(path)?).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let curve = costroute::DeferralCurve::from_csv(&text).map_err(with_path(path))?;
    let line = match eval::qnc(&curve, ref_cost, ref_quality)? {
        Qnc::Percent(p) => format!("{{\"qnc_percent\":{}}}\n", fmt_real(p)),
        Qnc::Unreachable => "{\"qnc_percent\":null,\"unreachable\":true}\n".to_string(),
    };
    out.extend(line.into_bytes());
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionLine {
    prompt_id: String,
    chosen: String,
    #[allow(dead_code)]
    lambda: f64,
    adjusted: Vec<f64>,
}

fn eval_rates(pool_path: &Path, path: &Path, out: &mut Vec<u8>) -> CmdResult {
    let pool = read_pool(pool_path)?;
    let text = String::from_utf8(read(path)?).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let mut decisions = Vec::new();
    for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let at = |msg: String| Failure::data(format!("{}: line {}: {msg}", path.display(), i + 1));
        let d: DecisionLine = serde_json::from_str(raw).map_err(|e| at(e.to_string()))?;
        let chosen = pool.index_of(&d.chosen).ok_or_else(|| at(format!("unknown model \"{}\"", d.chosen)))?;
        decisions.push(RouteDecision {
            prompt_id: d.prompt_id,
            chosen,
            chosen_id: d.chosen,
            estimates: QualityEstimate(Vec::new()),
            adjusted: d.adjusted,
        });
    }
    let rates = eval::selection_rates(&decisions, &pool).map_err(with_path(path))?;
    let mut csv = String::from("model,rate\n");
    for (id, r) in rates {
        csv.push_str(&format!("{id},{}\n", fmt_real(r)));
    }
    out.extend(csv.into_bytes());
    Ok(())
}

fn read_numbers(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = String::from_utf8(read(path)?).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Failure::data(format!("{}: \"{t}\" is not a number", path.display()))))
        .collect()
}

fn eval_ttest(a: &Path, b: &Path, out: &mut Vec<u8>) -> CmdResult {
    let r = eval::welch_ttest(&read_numbers(a)?, &read_numbers(b)?)?;
    out.extend(
        format!("{{\"t\":{},\"dof\":{},\"p\":{}}}\n", fmt_real(r.t), fmt_real(r.dof), fmt_real(r.p)).into_bytes(),
    );
    Ok(())
}

fn sharpness_cmd(a: &SharpnessArgs, out: &mut Vec<u8>) -> CmdResult {
    let mut csv = String::from("file,sharpness\n");
    for path in &a.images {
        let img = decode_pnm(&read(path)?).map_err(with_path(path))?;
        csv.push_str(&format!("{},{}\n", path.display(), fmt_real(sharpness(&img))));
    }
    out.extend(csv.into_bytes());
    Ok(())
}

fn synth_gen(spec_path: Option<&Path>, seed: Option<u64>, dir: &Path, out: &mut Vec<u8>) -> CmdResult {
    let mut spec = match spec_path {
        Some(p) => SynthSpec::from_json(&read(p)?).map_err(with_path(p))?,
        None => synth::two_cluster_spec(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (ds, truth) = synth::generate(&spec)?;
    std::fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
    let mut truth_json = serde_json::to_string(&truth).expect("truth serializes");
    truth_json.push('\n');
    let mut staged = Staged::default();
    staged.add(&dir.join("pool.json"), ds.pool.to_json().as_bytes())?;
    staged.add(&dir.join("data.jsonl"), ds.to_jsonl().as_bytes())?;
    staged.add(&dir.join("truth.json"), truth_json.as_bytes())?;
    staged.commit()?;
    out.extend(json_line(json!({"records": ds.len(), "models": ds.pool.len(), "seed": spec.seed})));
    Ok(())
}

fn synth_frontier(a: &DataArgs, path: Option<&Path>, out: &mut Vec<u8>) -> CmdResult {
    let (_, selected) = read_data(a)?;
    let frontier = brute_force_frontier(&selected)?;
    let mut csv = String::from("avg_cost,avg_quality\n");
    for p in frontier {
        csv.push_str(&format!("{},{}\n", fmt_real(p.cost), fmt_real(p.quality)));
    }
    emit(path, csv.as_bytes(), out)
}

#[cfg(test)]
mod tests {
    use super::parse_lambdas;

    #[test]
    fn lambda_grids() {
        assert_eq!(parse_lambdas("0.1,1", true).unwrap(), vec![0.0, 0.1, 1.0]);
        assert_eq!(parse_lambdas("0,1", true).unwrap(), vec![0.0, 1.0]);
        assert_eq!(parse_lambdas("0.1,1", false).unwrap(), vec![0.1, 1.0]);
        let g = parse_lambdas("log:1e-6:1:7", true).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1e-6).abs() < 1e-18 && (g[7] - 1.0).abs() < 1e-12);
        for bad in ["", "a", "1,0.5", "-1", "log:1:0.1:5", "log:0:1:5", "log:1e-3:1", "log:1e-3:1:0", "inf"] {
            assert!(parse_lambdas(bad, true).is_err(), "{bad}");
        }
    }
}
