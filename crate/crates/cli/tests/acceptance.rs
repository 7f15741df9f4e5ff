//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hybrid_assoc::game::{
    assemble_system, expected_service_time, find_equilibrium, staircase_sweep, threshold_curve,
};
use hybrid_assoc::linalg::norm2;
use hybrid_assoc::sim::{simulate_discounted_reward, simulate_tagged_service_time};
use hybrid_assoc::smdp::{action_value, policy_structure_report, value_iterate};
use hybrid_assoc::umts::pole_capacity;
use hybrid_assoc::{
    Action, ApServer, GameConfig, HybridCell, HybridState, NodebServer, ServerModel, Setup, SimConfig, SmdpConfig, Stream,
    StreamConfig, ThresholdPolicy, UmtsModel, UmtsParams, UmtsTable, WlanModel, WlanParams,
};
use hybrid_assoc_cli::commands::sample_states;
use hybrid_assoc_cli::RunConfig;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// `(eta, N, theta_kbps)` transcribed from the published NodeB table.
const TABLE: [(f64, usize, f64); 18] = [
    (0.9, 1, 572.0),
    (0.45, 2, 465.0),
    (0.3, 3, 405.0),
    (0.225, 4, 360.0),
    (0.18, 5, 322.0),
    (0.15, 6, 285.0),
    (0.1286, 7, 242.0),
    (0.1125, 8, 191.0),
    (0.1, 9, 144.0),
    (0.09, 10, 115.0),
    (0.0818, 11, 96.0),
    (0.0750, 12, 83.0),
    (0.0692, 13, 73.0),
    (0.0643, 14, 65.0),
    (0.06, 15, 60.0),
    (0.0563, 16, 55.0),
    (0.0529, 17, 51.0),
    (0.05, 18, 47.0),
];

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn umts() -> UmtsModel {
    UmtsModel::new(UmtsParams::default(), UmtsTable::builtin()).unwrap()
}

fn cell(setup: Setup) -> HybridCell {
    let wlan = WlanModel::new(WlanParams::default());
    let ap = || ApServer::new(&wlan, 18).unwrap();
    match setup {
        Setup::ApAp => HybridCell::new(ap(), ap()),
        Setup::ApNodeb => HybridCell::new(ap(), NodebServer::new(&umts())),
        Setup::NodebNodeb => HybridCell::new(NodebServer::new(&umts()), NodebServer::new(&umts())),
    }
}

fn fig9(lambda_ap3g: f64) -> GameConfig {
    GameConfig::from_wlan(&WlanModel::new(WlanParams::default()), 1e-5, 10, 3.0, lambda_ap3g, 2.5).unwrap()
}

fn table_fidelity() -> Outcome {
    let start = Instant::now();
    let model = umts();
    let params = UmtsParams::default();
    for &(eta, n, kbps) in &TABLE {
        let theta = model.theta_3g(eta).map_err(|e| e.to_string())?;
        ensure(theta == kbps * 1e3, || format!("N = {n}: theta {theta} != {kbps} kbps"))?;
        ensure(model.n_of_eta(eta).map_err(|e| e.to_string())? == n, || format!("N(eta = {eta}) != {n}"))?;
        ensure((eta * n as f64 - 0.9).abs() <= 1e-3, || format!("eta * N = {} at N = {n}", eta * n as f64))?;
    }
    let violations = model.table().consistency_violations(&params, 0.75);
    ensure(violations.is_empty(), || format!("Eb/N0 off by more than 0.75 dB at N = {violations:?}"))?;
    let worst = model
        .table()
        .rows()
        .iter()
        .map(|r| (hybrid_assoc::umts::ebno_from(r.theta_bps(), r.sinr_db, &params) - r.ebno_db).abs())
        .fold(0.0, f64::max);
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "18 rows exact, worst Eb/N0 gap {worst:.3} dB, pole capacity at the last row {}",
        pole_capacity(&params, hybrid_assoc::umts::db_to_linear(model.table().rows()[17].ebno_db))
    ))
}

fn nodeb_curve() -> Outcome {
    let agg: Vec<f64> = TABLE.iter().map(|&(_, n, kbps)| n as f64 * kbps).collect();
    let server = NodebServer::new(&umts());
    let model_agg: Vec<f64> = (0..server.num_states()).map(|s| server.aggregate_throughput(s)).collect();
    ensure(
        model_agg.iter().zip(&agg).all(|(a, b)| (a - b * 1e3).abs() <= 1e-6),
        || "server aggregate differs from N * theta".into(),
    )?;
    let peak = agg.iter().enumerate().fold(0, |best, (i, &v)| if v > agg[best] { i } else { best });
    ensure(peak + 1 == 6 && agg[peak] == 1710.0, || format!("peak at N = {} ({})", peak + 1, agg[peak]))?;
    ensure(agg[..6].windows(2).all(|w| w[1] > w[0]), || "not increasing up to N = 6".into())?;
    ensure(agg[5..].windows(2).all(|w| w[1] < w[0]), || "not strictly decreasing from N = 6".into())?;
    Ok("unimodal, peak 1710 kbps at N = 6".into())
}

fn ap_curve() -> Outcome {
    let wlan = WlanModel::new(WlanParams::default());
    let agg: Vec<f64> = (1..=18).map(|m| wlan.aggregate(m).unwrap()).collect();
    ensure(agg.windows(2).all(|w| w[1] < w[0]), || format!("not strictly decreasing: {agg:?}"))?;
    Ok(format!("aggregate {:.0} -> {:.0} bit/s over m_c = 1..18", agg[0], agg[17]))
}

fn smdp_oracle() -> Outcome {
    let start = Instant::now();
    let cell = cell(Setup::ApNodeb);
    let streams = Setup::ApNodeb.default_streams();
    let smdp = SmdpConfig::default();
    let sol = value_iterate(&cell, &streams, &smdp).map_err(|e| e.to_string())?;
    let states = sample_states(&cell);
    let sim = SimConfig::default();
    let est = simulate_discounted_reward(&cell, &sol.policy, &streams, &smdp, &sim, &states).map_err(|e| e.to_string())?;
    ensure(est.len() >= 5, || "fewer than five start states".into())?;
    let mut worst: f64 = 0.0;
    for e in &est {
        let z = e.estimate.z_score(sol.value.get(e.state));
        worst = worst.max(z.abs());
        ensure(z.abs() <= 3.0, || format!("state {}: z = {z}", e.state))?;
        ensure(e.truncation_bound < 1e-6 * e.estimate.mean.abs(), || {
            format!("state {}: truncation bound {} too large", e.state, e.truncation_bound)
        })?;
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{} states, {} replications, max |z| = {worst:.2}", est.len(), sim.replications))
}

fn smdp_structure() -> Outcome {
    let smdp = SmdpConfig::default();

    let ap_ap = cell(Setup::ApAp);
    let sol = value_iterate(&ap_ap, &Setup::ApAp.default_streams(), &smdp).map_err(|e| e.to_string())?;
    let report = policy_structure_report(&sol.policy, &ap_ap, Setup::ApAp);
    ensure(report.is_mobile_balancing(), || format!("(a) greedy states {:?}", report.greedy))?;
    for (s, v) in sol.value.iter() {
        let w = sol.value.get(s.swapped());
        ensure((v - w).abs() <= 1e-9 * v.abs().max(1.0), || format!("(a) V{s} = {v} vs mirrored {w}"))?;
    }

    let ap_nb = cell(Setup::ApNodeb);
    let no_fees = StreamConfig { f_common_to_first: 0.0, f_common_to_second: 0.0, ..Setup::ApNodeb.default_streams() };
    let sol = value_iterate(&ap_nb, &no_fees, &smdp).map_err(|e| e.to_string())?;
    let report = policy_structure_report(&sol.policy, &ap_nb, Setup::ApNodeb);
    ensure(report.uniform_first_threshold() == Some(1), || {
        format!("(b) dedicated AP thresholds {:?}", report.first_dedicated_thresholds)
    })?;
    ensure(report.uniform_second_threshold() == Some(5), || {
        format!("(b) dedicated NodeB thresholds {:?}", report.second_dedicated_thresholds)
    })?;

    let nb_nb = cell(Setup::NodebNodeb);
    let streams = Setup::NodebNodeb.default_streams();
    let sol = value_iterate(&nb_nb, &streams, &smdp).map_err(|e| e.to_string())?;
    let s = HybridState::new(1, 3);
    let values: Vec<String> = Stream::Common
        .legal_actions()
        .iter()
        .map(|&a| {
            let v = action_value(&nb_nb, s, Stream::Common, a, &sol.value, &streams, &smdp).unwrap();
            format!("{}: {v:.6}", a.code())
        })
        .collect();
    let chosen = sol.policy.action(s, Stream::Common);
    let corner = sol.policy.action(nb_nb.full_state(), Stream::Common);
    ensure(chosen == Action::RouteSecond, || {
        format!("(c) deviation: (0.45, 0.225) takes action {} with values [{}]", chosen.code(), values.join(", "))
    })?;
    ensure(corner == Action::Reject, || format!("(c) both-full corner takes action {}", corner.code()))?;
    Ok(format!("(a) balancing + symmetric, (b) thresholds m_c < 1 and N < 6, (c) route 2 with values [{}]", values.join(", ")))
}

/// Max residual of the service-time equations in their printed form: rows
/// below `L - 1` see every arrival, row `L - 1` thins the common stream,
/// rows above see only dedicated arrivals and the last row only service.
fn printed_residual(l: usize, q: f64, c: &GameConfig, v: &[f64]) -> f64 {
    let n = c.m_ap();
    let (la, lc) = (c.lambda_ap, c.lambda_ap3g);
    let frac = |m: usize| m as f64 / (m + 1) as f64;
    let below = |m: usize| if m > 0 { c.mu(m) * frac(m) * v[m - 1] } else { 0.0 };
    (0..n)
        .map(|m| {
            let rhs = if m == n - 1 {
                1.0 / c.mu(m) + frac(m) * if m > 0 { v[m - 1] } else { 0.0 }
            } else if m + 1 < l {
                let alpha = la + lc + c.mu(m);
                (1.0 + below(m) + (la + lc) * v[m + 1]) / alpha
            } else if m + 1 == l {
                let alpha = la + lc + c.mu(m);
                (1.0 + below(m) + (la + q * lc) * v[m + 1] + lc * (1.0 - q) * v[m]) / alpha
            } else {
                (1.0 + below(m) + la * v[m + 1]) / (la + c.mu(m))
            };
            (v[m] - rhs).abs()
        })
        .fold(0.0, f64::max)
}

fn game_linear_system() -> Outcome {
    let two = GameConfig::new(1.0, 1.0, vec![1.0, 1.0], 10.0).unwrap();
    let v = expected_service_time(&ThresholdPolicy::new(1, 0.0).unwrap(), &two).map_err(|e| e.to_string())?;
    ensure((v.get(0) - 4.0 / 3.0).abs() <= 1e-12 && (v.get(1) - 5.0 / 3.0).abs() <= 1e-12, || {
        format!("2x2 gave {:?}", v.as_slice())
    })?;

    let c = fig9(2.0);
    let mut worst: f64 = 0.0;
    for l in 0..10 {
        for k in 0..=10 {
            let q = k as f64 / 10.0;
            let policy = ThresholdPolicy::new(l, q).unwrap();
            let v = expected_service_time(&policy, &c).map_err(|e| e.to_string())?;
            let scale = 1.0 + norm2(v.as_slice());
            // Canonical [L, 1] is [L + 1, 0]: check it against its own rows.
            let r = printed_residual(policy.level(), policy.prob(), &c, v.as_slice()) / scale;
            let (a, b) = assemble_system(&policy, &c).unwrap();
            let r2 = norm2(&a.mul_vec(v.as_slice()).iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>()) / scale;
            worst = worst.max(r).max(r2);
        }
    }
    ensure(worst <= 1e-9, || format!("residual {worst:e} on the 10 x 11 grid"))?;

    for l in 0..9 {
        let a = expected_service_time(&ThresholdPolicy::new(l, 1.0).unwrap(), &c).unwrap();
        let b = expected_service_time(&ThresholdPolicy::new(l + 1, 0.0).unwrap(), &c).unwrap();
        ensure(a == b, || format!("[{l}, 1] and [{}, 0] differ", l + 1))?;
    }
    Ok(format!("2x2 exact, worst relative residual {worst:.1e}, identity exact"))
}

fn game_vs_simulation() -> Outcome {
    let start = Instant::now();
    let c = fig9(2.0);
    let sim = SimConfig::default();
    let mut worst: f64 = 0.0;
    for (l, q) in [(5, 0.0), (5, 0.5), (9, 1.0)] {
        let policy = ThresholdPolicy::new(l, q).unwrap();
        let v = expected_service_time(&policy, &c).map_err(|e| e.to_string())?;
        for m in 0..c.m_ap() {
            let est = simulate_tagged_service_time(&policy, m, &c, &sim).map_err(|e| e.to_string())?;
            let z = est.z_score(v.get(m));
            worst = worst.max(z.abs());
            ensure(z.abs() <= 3.0, || format!("[{l}, {q}] m_c = {m}: z = {z}"))?;
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("3 policies x 10 states, {} replications, max |z| = {worst:.2}", sim.replications))
}

fn best_response_violation(g: f64, c: &GameConfig) -> f64 {
    let policy = ThresholdPolicy::from_g(g).unwrap();
    let v = expected_service_time(&policy, c).unwrap();
    (0..c.m_ap())
        .map(|m| {
            let join = policy.join_probability(m);
            let over = if join > 0.0 { v.get(m) - c.tau } else { 0.0 };
            let under = if join < 1.0 { c.tau - v.get(m) } else { 0.0 };
            over.max(under).max(0.0)
        })
        .fold(0.0, f64::max)
}

fn equilibrium() -> Outcome {
    let start = Instant::now();
    let grid: Vec<f64> = (0..=40).map(|k| k as f64 * 0.5).collect();
    let points = staircase_sweep(&fig9(0.0), &grid).map_err(|e| e.to_string())?;
    for w in points.windows(2) {
        let (a, b) = (w[0].policy, w[1].policy);
        ensure(b.g() <= a.g(), || format!("g rises from {a} to {b} at lambda {}", w[1].lambda_ap3g))?;
        ensure(a.level() <= b.level() + 1, || format!("L jumps from {a} to {b}"))?;
    }
    let plateaus = points.windows(2).filter(|w| w[0].policy == w[1].policy).count();
    ensure(plateaus > 0, || "staircase has no flat steps".into())?;

    let curve = threshold_curve(&fig9(1.0)).map_err(|e| e.to_string())?;
    ensure(curve.windows(2).all(|w| w[1] >= w[0]), || format!("V(L, [L, 1]) not monotone: {curve:?}"))?;

    let small = GameConfig::new(1.0, 2.0, vec![1.5, 1.5, 1.2, 1.0], 2.5).unwrap();
    let eq = find_equilibrium(&small).map_err(|e| e.to_string())?;
    let scan: Vec<(f64, f64)> =
        (0..=4000).map(|k| k as f64 * 1e-3).map(|g| (g, best_response_violation(g, &small))).collect();
    let best = scan.iter().fold((f64::NAN, f64::INFINITY), |acc, &(g, s)| if s < acc.1 { (g, s) } else { acc });
    ensure(best_response_violation(eq.g(), &small) <= 1e-9 * small.tau, || format!("{eq} is not a best response"))?;
    ensure((best.0 - eq.g()).abs() <= 1e-3 + 1e-12, || format!("scan minimum at g = {}, solver g* = {}", best.0, eq.g()))?;
    ensure(scan.iter().all(|&(g, s)| (g - eq.g()).abs() <= 2e-3 || s > 0.0), || "second fixed point on the grid".into())?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "g* from {} to {} over lambda_ap3g in [0, 20], {plateaus} flat steps; M_AP = 4 scan agrees with {eq}",
        points[0].policy.g(),
        points.last().unwrap().policy.g()
    ))
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config_path = dir.path().join("run.toml");
    fs::write(&config_path, "sim.replications = 20000\nsim.seed = 7\n").map_err(|e| e.to_string())?;
    let exe = env!("CARGO_BIN_EXE_hybrid-assoc");
    let commands: [&[&str]; 6] = [
        &["throughput-curves"],
        &["solve-smdp"],
        &["equilibrium"],
        &["staircase"],
        &["simulate", "--target", "smdp"],
        &["simulate", "--target", "game"],
    ];
    let mut compared = 0;
    for args in commands {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{}-{run}", args.join("-")));
            let status = Command::new(exe)
                .args(args)
                .arg("--config")
                .arg(&config_path)
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), || {
                format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr))
            })?;
            outputs.push(out);
        }
        compared += compare_dirs(&outputs[0], &outputs[1])?;
    }
    Ok(format!("{compared} output files byte-identical across reruns"))
}

fn compare_dirs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in &names {
        let x = fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join(name)).map_err(|e| format!("{}: {e}", name.to_string_lossy()))?;
        ensure(x == y, || format!("{} differs between runs", name.to_string_lossy()))?;
    }
    Ok(names.len())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 table fidelity", table_fidelity),
        ("2 NodeB aggregate curve", nodeb_curve),
        ("3 AP aggregate curve", ap_curve),
        ("4 SMDP vs Monte Carlo", smdp_oracle),
        ("5 SMDP structure", smdp_structure),
        ("6 game linear system", game_linear_system),
        ("7 game vs simulation", game_vs_simulation),
        ("8 equilibrium", equilibrium),
        ("9 reproducibility", reproducibility),
    ];
    // Sanity check that the default run configuration is the one exercised above.
    assert_eq!(RunConfig::default().streams(), Setup::ApNodeb.default_streams());

    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name} ({elapsed:.2?}): {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  criterion {name} ({elapsed:.2?}): {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
