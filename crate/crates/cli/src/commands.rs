use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bridgenet::bridge::{
    compose_ensemble, composition_flops, train_bridge, BridgeKind, BridgeModel, BridgeSpec, Endpoint, Member,
};
use bridgenet::dataio::{
    gen_blobs, gen_spirals, load_checkpoint, load_csv, save_checkpoint, save_csv, split, write_atomic, Checkpoint,
    Dataset, Role,
};
use bridgenet::metrics::{
    correspondence_report, evaluate_calibrated, nll, DEEBaseline, ProbMatrix, DEFAULT_BINS, MATCH_BRIDGE, OTHER_BEZIER,
    OTHER_BRIDGE,
};
use bridgenet::nn::{count_flops, train_network, ArchSpec, FlopsReport, Network, StepLog};
use bridgenet::subspace::{init_pinpoint, scan_curve, scan_to_csv, train_pinpoint, BezierCurve};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::members::{parse_member, split_position, MemberSpec};
use crate::svg::{line_chart, Series};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(write_atomic(path, text.as_bytes())?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn load_data(path: &Path) -> CliResult<Dataset> {
    Ok(load_csv(path)?)
}

fn load_mode(path: &Path) -> CliResult<Network> {
    Ok(load_checkpoint(path)?.to_network()?)
}

fn load_curve(path: &Path) -> CliResult<BezierCurve> {
    Ok(load_checkpoint(path)?.to_curve()?)
}

fn run_seed(flag: Option<u64>, cfg: &RunConfig) -> u64 {
    flag.unwrap_or(cfg.seed)
}

fn metadata(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn log_csv(log: &[StepLog]) -> String {
    let with_r = log.iter().any(|s| s.r.is_some());
    let mut out = String::from(if with_r { "step,lr,loss,r\n" } else { "step,lr,loss\n" });
    for s in log {
        let _ = write!(out, "{},{},{}", s.step, s.lr, s.loss);
        if with_r {
            let _ = write!(out, ",{}", s.r.map_or(String::new(), |r| r.to_string()));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub enum DataKind {
    Spirals,
    Blobs,
}

pub struct GenData {
    pub kind: DataKind,
    pub n: usize,
    pub classes: usize,
    pub noise: f64,
    pub seed: u64,
    pub dim: usize,
    pub separation: f64,
    pub out: PathBuf,
}

pub fn gen_data(a: GenData) -> CliResult<()> {
    if a.n == 0 {
        return Err(usage("--n must be >= 1"));
    }
    if a.classes < 2 {
        return Err(usage("--classes must be >= 2"));
    }
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(usage("--noise must be >= 0"));
    }
    let data = match a.kind {
        DataKind::Spirals => gen_spirals(a.n, a.classes, a.noise, a.seed),
        DataKind::Blobs => {
            if a.dim == 0 || !(a.separation >= 0.0 && a.separation.is_finite()) {
                return Err(usage("--dim must be >= 1 and --separation >= 0"));
            }
            gen_blobs(a.n, a.classes, a.dim, a.separation, a.noise, a.seed)
        }
    }
    .map_err(|e| usage(e.to_string()))?;
    Ok(save_csv(&data, &a.out)?)
}

pub fn split_data(data: &Path, ratios: &str, seed: u64, out_dir: &Path) -> CliResult<()> {
    let parts: Vec<f64> = ratios
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--ratios {ratios:?} must be three comma-separated numbers")))?;
    let [tr, va, te] = parts[..] else {
        return Err(usage(format!("--ratios {ratios:?} must have three parts")));
    };
    let data = load_data(data)?;
    let (train, val, test) = split(&data, (tr, va, te), seed).map_err(|e| usage(e.to_string()))?;
    for (name, d) in [("train.csv", &train), ("val.csv", &val), ("test.csv", &test)] {
        save_csv(d, &out_dir.join(name))?;
    }
    Ok(())
}

pub fn train_mode(
    config: &Path,
    train: &Path,
    val: &Path,
    seed: u64,
    out: &Path,
    log: Option<PathBuf>,
) -> CliResult<()> {
    let cfg = RunConfig::load(config)?;
    let train = load_data(train)?;
    let val = load_data(val)?;
    let arch = cfg.arch(train.dim(), train.k)?;
    if val.dim() != train.dim() || val.k > train.k {
        return Err(usage("validation set does not match the training set's shape"));
    }
    let opt = cfg.optimizer.mode.with_seed(seed)?;
    let (net, steps) = train_network(&arch, &train, &opt)?;
    let probs = net.predict(&val.x)?;
    let report = evaluate_calibrated(&probs, &val.y, &probs, &val.y, cfg.eval.n_bins, None)?;

    let ck = Checkpoint::from_network(&net, metadata(&[("seed", seed.to_string())]));
    save_checkpoint(&ck, out)?;
    write_text(&log.unwrap_or_else(|| sibling(out, ".log.csv")), &log_csv(&steps))?;
    write_json(&sibling(out, ".val.json"), &report)
}

pub fn train_curve(
    mode_a: &Path,
    mode_b: &Path,
    config: &Path,
    train: &Path,
    seed: Option<u64>,
    out: &Path,
    log: Option<PathBuf>,
) -> CliResult<()> {
    let cfg = RunConfig::load(config)?;
    let train = load_data(train)?;
    let a = load_mode(mode_a)?;
    let b = load_mode(mode_b)?;
    if a.arch != b.arch {
        return Err(usage("--mode-a and --mode-b have different architectures"));
    }
    let seed = run_seed(seed, &cfg);
    let opt = cfg.optimizer.curve.with_seed(seed)?;
    let start = init_pinpoint(&a.arch, &a.params, &b.params)?;
    let (curve, steps) = train_pinpoint(&start, &train, &opt)?;
    let ck = Checkpoint::from_curve(&curve, metadata(&[("seed", seed.to_string())]));
    save_checkpoint(&ck, out)?;
    write_text(&log.unwrap_or_else(|| sibling(out, ".log.csv")), &log_csv(&steps))
}

pub fn scan(curve: &Path, data: &Path, grid: usize, out: &Path, plot: Option<PathBuf>) -> CliResult<()> {
    if grid < 2 {
        return Err(usage("--grid must be >= 2"));
    }
    let curve = load_curve(curve)?;
    let data = load_data(data)?;
    let rows = scan_curve(&curve, &data, grid)?;
    write_text(out, &scan_to_csv(&rows)?)?;
    if let Some(plot) = plot {
        let single = Series {
            label: "model at r",
            points: rows.iter().map(|r| (r.r, r.loss)).collect(),
        };
        let ens = Series {
            label: "3-member ensemble",
            points: rows.iter().filter_map(|r| r.ensemble.map(|e| (r.r, e.nll))).collect(),
        };
        write_text(
            &plot,
            &line_chart("Loss along the Bezier curve", "r", "NLL", &[single, ens]),
        )?;
    }
    Ok(())
}

pub struct TrainBridge {
    pub kind: Option<u8>,
    pub curve: PathBuf,
    pub r: Option<f64>,
    pub width: Option<usize>,
    pub alpha: Option<f64>,
    pub config: PathBuf,
    pub train: PathBuf,
    pub bases: Vec<PathBuf>,
    pub feed: Endpoint,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub log: Option<PathBuf>,
}

pub fn train_bridge_cmd(a: TrainBridge) -> CliResult<()> {
    let cfg = RunConfig::load(&a.config)?;
    let kind = match a.kind {
        None => cfg.bridge.kind,
        Some(1) => BridgeKind::TypeI,
        Some(2) => BridgeKind::TypeII,
        Some(k) => return Err(usage(format!("--type must be 1 or 2, got {k}"))),
    };
    let curve = load_curve(&a.curve)?;
    let (base_i, base_j) = resolve_endpoints(kind, a.feed, &curve, &a.bases)?;
    let train = load_data(&a.train)?;

    let seed = run_seed(a.seed, &cfg);
    let target_r = a.r.unwrap_or(cfg.bridge.target_r);
    let width = a.width.unwrap_or(cfg.bridge.width);
    let mut mix = cfg.mixup.clone();
    if let Some(alpha) = a.alpha {
        mix.alpha = alpha;
    }
    let spec = BridgeSpec::new(
        kind,
        curve.arch.feature_dim(),
        width,
        curve.arch.class_count(),
        target_r,
    )
    .map_err(|e| usage(e.to_string()))?;
    let opt = cfg.optimizer.bridge.with_seed(seed.wrapping_add(1))?;
    let mix = mix.with_seed(seed.wrapping_add(2))?;
    let feed = (kind == BridgeKind::TypeI).then_some(a.feed);
    let init = BridgeModel::init(spec, curve.identity(), feed, seed)?;
    let (bridge, steps) = train_bridge(&init, &base_i, base_j.as_ref(), &curve, &train, &opt, &mix)?;

    let ck = Checkpoint::from_bridge(&bridge, metadata(&[("seed", seed.to_string())]))?;
    save_checkpoint(&ck, &a.out)?;
    write_text(&a.log.unwrap_or_else(|| sibling(&a.out, ".log.csv")), &log_csv(&steps))
}

/// Base networks feeding the bridge: the curve's own endpoints unless
/// `--base` checkpoints are given, in which case there must be exactly one
/// per bridge input and each must be the matching endpoint.
fn resolve_endpoints(
    kind: BridgeKind,
    feed: Endpoint,
    curve: &BezierCurve,
    bases: &[PathBuf],
) -> CliResult<(Network, Option<Network>)> {
    let expected = match (kind, feed) {
        (BridgeKind::TypeI, Endpoint::A) => vec![curve.endpoint_i()],
        (BridgeKind::TypeI, Endpoint::B) => vec![curve.endpoint_j()],
        (BridgeKind::TypeII, _) => vec![curve.endpoint_i(), curve.endpoint_j()],
    };
    if !bases.is_empty() {
        if bases.len() != expected.len() {
            return Err(usage(format!(
                "a type {} bridge needs {} base network(s), got {}",
                if kind == BridgeKind::TypeI { "I" } else { "II" },
                expected.len(),
                bases.len()
            )));
        }
        for (path, want) in bases.iter().zip(&expected) {
            let got = load_mode(path)?;
            if !got.params.bit_eq(&want.params) {
                return Err(usage(format!("{} is not the matching curve endpoint", path.display())));
            }
        }
    }
    let mut it = expected.into_iter();
    let first = it.next().expect("at least one endpoint");
    Ok((first, it.next()))
}

/// Loaded ensemble members plus the declared base networks.
struct Composition {
    members: Vec<Member>,
    declared: Vec<Network>,
}

fn load_members(specs: &[String]) -> CliResult<Composition> {
    if specs.is_empty() {
        return Err(usage("--members needs at least one member"));
    }
    let mut members = Vec::new();
    let mut declared = Vec::new();
    for s in specs {
        match parse_member(s)? {
            MemberSpec::Mode(p) => members.push(Member::Mode(load_mode(&p)?)),
            MemberSpec::Bezier { curve, r } => members.push(Member::Bezier {
                curve: load_curve(&curve)?,
                r,
            }),
            MemberSpec::Bridge { path, bases } => {
                members.push(Member::Bridge(load_checkpoint(&path)?.to_bridge()?));
                for b in bases {
                    declared.push(load_mode(&b)?);
                }
            }
        }
    }
    let mut available: Vec<String> = declared.iter().map(Network::id).collect();
    available.extend(members.iter().filter_map(|m| match m {
        Member::Mode(n) => Some(n.id()),
        _ => None,
    }));
    for m in &members {
        if let Member::Bridge(b) = m {
            if let Some(id) = b
                .required_modes()
                .into_iter()
                .find(|id| !available.iter().any(|a| a == id))
            {
                return Err(usage(format!(
                    "bridge needs base mode {id}; add it as a mode: member or a base= attribute"
                )));
            }
        }
    }
    Ok(Composition { members, declared })
}

/// Architecture whose cost defines relative FLOPs: the first base network.
fn reference_arch(c: &Composition) -> Option<ArchSpec> {
    c.members
        .iter()
        .find_map(|m| match m {
            Member::Mode(n) => Some(n.arch.clone()),
            Member::Bezier { curve, .. } => Some(curve.arch.clone()),
            Member::Bridge(_) => None,
        })
        .or_else(|| c.declared.first().map(|n| n.arch.clone()))
}

pub struct Eval {
    pub members: Vec<String>,
    pub test: PathBuf,
    pub val: PathBuf,
    pub dee_baseline: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub n_bins: Option<usize>,
    pub out: PathBuf,
}

/// Writes the calibrated report and returns the FLOPs report JSON.
pub fn eval(a: Eval) -> CliResult<String> {
    let cfg = a.config.as_deref().map(RunConfig::load).transpose()?;
    let n_bins = a.n_bins.or(cfg.as_ref().map(|c| c.eval.n_bins)).unwrap_or(DEFAULT_BINS);
    if n_bins == 0 {
        return Err(usage("--n-bins must be >= 1"));
    }
    let baseline_path = a
        .dee_baseline
        .or_else(|| cfg.as_ref().and_then(|c| c.eval.dee_baseline.clone()));
    let comp = load_members(&a.members)?;
    let test = load_data(&a.test)?;
    let val = load_data(&a.val)?;
    let baseline = baseline_path
        .map(|p| -> CliResult<DEEBaseline> {
            let file = std::fs::File::open(&p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
            Ok(DEEBaseline::from_csv(file)?)
        })
        .transpose()?;

    let p_test = compose_ensemble(&comp.members, &comp.declared, &test.x)?;
    let p_val = compose_ensemble(&comp.members, &comp.declared, &val.x)?;
    let report = evaluate_calibrated(&p_test, &test.y, &p_val, &val.y, n_bins, baseline.as_ref())?;
    write_json(&a.out, &report)?;

    let mut flops = composition_flops(&comp.members, &comp.declared)?;
    if let Some(arch) = reference_arch(&comp) {
        flops = flops.relative_to(&count_flops(&arch, None));
    }
    Ok(serde_json::to_string(&flops)?)
}

pub fn dee_baseline(modes: &[PathBuf], test: &Path, val: Option<&Path>, n_bins: usize, out: &Path) -> CliResult<()> {
    if modes.len() < 2 {
        return Err(usage("a DEE baseline needs at least two modes"));
    }
    let nets = modes.iter().map(|p| load_mode(p)).collect::<CliResult<Vec<_>>>()?;
    let test = load_data(test)?;
    let val = val.map(load_data).transpose()?;
    let p_test = nets.iter().map(|n| n.predict(&test.x)).collect::<Result<Vec<_>, _>>()?;
    let p_val = match &val {
        Some(v) => Some(nets.iter().map(|n| n.predict(&v.x)).collect::<Result<Vec<_>, _>>()?),
        None => None,
    };
    let mut points = Vec::with_capacity(nets.len());
    for m in 1..=nets.len() {
        let t = ProbMatrix::average(&p_test[..m].iter().collect::<Vec<_>>())?;
        let value = match (&val, &p_val) {
            (Some(v), Some(pv)) => {
                let vp = ProbMatrix::average(&pv[..m].iter().collect::<Vec<_>>())?;
                evaluate_calibrated(&t, &test.y, &vp, &v.y, n_bins, None)?.nll
            }
            _ => nll(&t, &test.y)?,
        };
        points.push((m, value));
    }
    write_text(out, &DEEBaseline::new(points)?.to_csv()?)
}

pub struct Correspondence {
    pub target_curve: String,
    pub bridge: PathBuf,
    pub others: Vec<String>,
    pub modes: Vec<PathBuf>,
    pub test: PathBuf,
    pub out: PathBuf,
}

/// Predictions of a bridge whose base networks come from `pool`.
fn bridge_probs(bridge: &BridgeModel, pool: &[Network], x: &bridgenet::Matrix) -> CliResult<ProbMatrix> {
    let members = [Member::Bridge(bridge.clone())];
    let ids = bridge.required_modes();
    if let Some(id) = ids.iter().find(|id| !pool.iter().any(|n| n.id() == **id)) {
        return Err(usage(format!(
            "no base network with id {id}; pass its curve in --others or its checkpoint in --modes"
        )));
    }
    Ok(compose_ensemble(&members, pool, x)?)
}

pub fn correspondence(a: Correspondence) -> CliResult<()> {
    let (target_path, r) = split_position(&a.target_curve)?;
    let target_curve = load_curve(&target_path)?;
    let r = r.unwrap_or(0.5);
    let test = load_data(&a.test)?;
    let target = target_curve.network_at(r)?.predict(&test.x)?;

    let mut pool = vec![target_curve.endpoint_i(), target_curve.endpoint_j()];
    for p in &a.modes {
        pool.push(load_mode(p)?);
    }
    enum Other {
        Bridge(BridgeModel),
        Curve(BezierCurve, f64),
    }
    let mut others = Vec::new();
    for s in &a.others {
        let (path, pos) = split_position(s)?;
        let ck = load_checkpoint(&path)?;
        match ck.header.role {
            Role::Bridge => others.push(Other::Bridge(ck.to_bridge()?)),
            Role::CurvePinpoint => {
                let c = ck.to_curve()?;
                pool.push(c.endpoint_i());
                pool.push(c.endpoint_j());
                others.push(Other::Curve(c, pos.unwrap_or(r)));
            }
            Role::Mode => {
                return Err(usage(format!(
                    "{} is a mode checkpoint, not a bridge or curve",
                    path.display()
                )))
            }
        }
    }

    let matching = load_checkpoint(&a.bridge)?.to_bridge()?;
    let mut candidates = vec![(MATCH_BRIDGE.to_string(), bridge_probs(&matching, &pool, &test.x)?)];
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut label = |base: &'static str| {
        let c = counts.entry(base).or_insert(0);
        *c += 1;
        if *c == 1 {
            base.to_string()
        } else {
            format!("{base} {c}")
        }
    };
    for o in &others {
        match o {
            Other::Bridge(b) => candidates.push((label(OTHER_BRIDGE), bridge_probs(b, &pool, &test.x)?)),
            Other::Curve(c, pos) => candidates.push((label(OTHER_BEZIER), c.network_at(*pos)?.predict(&test.x)?)),
        }
    }
    write_text(&a.out, &correspondence_report(&target, &candidates)?.to_csv()?)
}

fn ckpt_arch(path: &Path) -> CliResult<ArchSpec> {
    let ck = load_checkpoint(path)?;
    Ok(match ck.header.role {
        Role::Bridge => ck.to_bridge()?.spec.arch()?,
        _ => ck.header.arch.clone(),
    })
}

pub fn flops(ckpt: &Path, relative: Option<&Path>) -> CliResult<String> {
    let mut report: FlopsReport = count_flops(&ckpt_arch(ckpt)?, None);
    if let Some(rel) = relative {
        report = report.relative_to(&count_flops(&ckpt_arch(rel)?, None));
    }
    Ok(serde_json::to_string(&report)?)
}
