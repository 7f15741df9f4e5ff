use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hybrid_assoc::game::{expected_service_time, find_equilibrium, staircase_sweep, threshold_curve};
use hybrid_assoc::sim::{simulate_discounted_reward, simulate_tagged_service_time};
use hybrid_assoc::smdp::{policy_structure_report, value_iterate};
use hybrid_assoc::{HybridCell, HybridState, Stream};

use crate::config::RunConfig;
use crate::CliError;

/// Files written by a command and a human-readable summary.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Output<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Output<'a> {
    fn new(dir: &'a Path, config: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_owned(), source })?;
        let mut out = Self { dir, files: Vec::new() };
        out.text("effective_config.toml", &config.effective().to_toml())?;
        Ok(out)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.dir.join(name);
        let wrap = |source| CliError::Csv { path: path.clone(), source };
        let mut w = csv::Writer::from_path(&path).map_err(wrap)?;
        w.write_record(header).map_err(wrap)?;
        for row in rows {
            w.write_record(&row).map_err(wrap)?;
        }
        w.flush().map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.files.push(path);
        Ok(())
    }

    fn finish(self, summary: String) -> Outcome {
        Outcome { files: self.files, summary }
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn occupancy_label(cell: &HybridCell, s: HybridState) -> String {
    format!("{}:{}", cell.first.occupancy(s.first), cell.second.occupancy(s.second))
}

pub fn throughput_curves(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let mut output = Output::new(out, config)?;
    let wlan = config.wlan_model();
    let mut ap_rows = Vec::new();
    for m in 0..=config.m_ap {
        let per_mobile = if m == 0 { 0.0 } else { wlan.theta(m)? };
        ap_rows.push(vec![m.to_string(), num(per_mobile), num(wlan.aggregate(m)?)]);
    }
    output.csv("ap_curve.csv", &["m_c", "theta_per_mobile_bps", "aggregate_bps"], ap_rows)?;

    let umts = config.umts_model()?;
    let rows = &umts.table().rows()[..config.umts.m_3g];
    let nodeb_rows = rows.iter().map(|r| {
        vec![r.n.to_string(), num(r.eta), num(r.log_eta), num(r.theta_bps()), num(r.n as f64 * r.theta_bps())]
    });
    output.csv("nodeb_curve.csv", &["N", "eta", "log_eta", "theta_bps", "aggregate_bps"], nodeb_rows)?;
    Ok(output.finish(format!("AP curve 0..={} and NodeB curve 1..={}", config.m_ap, config.umts.m_3g)))
}

pub fn solve_smdp(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let mut output = Output::new(out, config)?;
    let cell = config.cell()?;
    let sol = value_iterate(&cell, &config.streams(), &config.smdp)?;

    let occ = |s: HybridState| (cell.first.occupancy(s.first).to_string(), cell.second.occupancy(s.second).to_string());
    let values = sol.value.iter().map(|(s, v)| {
        let (a, b) = occ(s);
        vec![a, b, num(v)]
    });
    output.csv("value.csv", &["s1", "s2", "value"], values)?;
    let mut policy_rows = Vec::new();
    for (s, actions) in sol.policy.iter() {
        let (a, b) = occ(s);
        for stream in Stream::ALL {
            let code = actions[stream.index()].code();
            policy_rows.push(vec![a.clone(), b.clone(), stream.as_str().to_string(), code.to_string()]);
        }
    }
    output.csv("policy.csv", &["s1", "s2", "stream", "action"], policy_rows)?;

    let report = policy_structure_report(&sol.policy, &cell, config.setup);
    let mut summary = String::new();
    writeln!(summary, "setup {}: converged in {} iterations, Lambda = {}", config.setup.as_str(), sol.iterations, sol.uniformization_rate)?;
    writeln!(summary, "mobile-balancing: {} ({} greedy states)", report.is_mobile_balancing(), report.greedy.len())?;
    writeln!(summary, "both-full common action: {}", report.corner_action.code())?;
    Ok(output.finish(summary))
}

pub fn equilibrium(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let mut output = Output::new(out, config)?;
    let game = config.game_config()?;
    let eq = find_equilibrium(&game)?;
    let curve = threshold_curve(&game)?;
    let at_eq = expected_service_time(&eq, &game)?;

    output.csv(
        "equilibrium.csv",
        &["L", "q", "g", "tau"],
        [vec![eq.level().to_string(), num(eq.prob()), num(eq.g()), num(game.tau)]],
    )?;
    output.csv(
        "threshold_curve.csv",
        &["L", "service_time_s"],
        curve.iter().enumerate().map(|(l, v)| vec![l.to_string(), num(*v)]),
    )?;

    let mut summary = String::new();
    writeln!(summary, "equilibrium [L, q] = [{}, {}], g = {}", eq.level(), eq.prob(), eq.g())?;
    writeln!(summary, "tau = {}", game.tau)?;
    if eq.level() < game.m_ap() {
        writeln!(summary, "V(L*) under the equilibrium profile = {}", at_eq.get(eq.level()))?;
    }
    writeln!(summary, "V(L, [L, 1]):")?;
    for (l, v) in curve.iter().enumerate() {
        writeln!(summary, "  L = {l:2}  {v}")?;
    }
    Ok(output.finish(summary))
}

pub fn staircase(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let mut output = Output::new(out, config)?;
    let game = config.game_config()?;
    let points = staircase_sweep(&game, &config.game.grid())?;
    let rows = points.iter().map(|p| {
        vec![num(p.lambda_ap3g), p.policy.level().to_string(), num(p.policy.prob()), num(p.policy.g())]
    });
    output.csv("staircase.csv", &["lambda_ap3g", "L", "q", "g"], rows)?;
    Ok(output.finish(format!("{} equilibria, tau = {}", points.len(), game.tau)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    Smdp,
    Game,
}

/// Start states for the decision-model check: the diagonal quartiles and the
/// two off-diagonal corners.
pub fn sample_states(cell: &HybridCell) -> Vec<HybridState> {
    let (n1, n2) = cell.dims();
    let mut states: Vec<HybridState> =
        (0..=4).map(|k| HybridState::new(k * (n1 - 1) / 4, k * (n2 - 1) / 4)).collect();
    states.push(HybridState::new(0, n2 - 1));
    states.push(HybridState::new(n1 - 1, 0));
    states.dedup();
    states
}

const SIM_HEADER: [&str; 5] = ["state", "solver_value", "sim_mean", "sim_stderr", "z_score"];

pub fn simulate(config: &RunConfig, target: Target, out: &Path) -> Result<Outcome> {
    let mut output = Output::new(out, config)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let name = match target {
        Target::Smdp => {
            let cell = config.cell()?;
            let streams = config.streams();
            let sol = value_iterate(&cell, &streams, &config.smdp)?;
            let starts = sample_states(&cell);
            let estimates = simulate_discounted_reward(&cell, &sol.policy, &streams, &config.smdp, &config.sim, &starts)?;
            for e in estimates {
                let solver = sol.value.get(e.state);
                let z = e.estimate.z_score(solver);
                worst = worst.max(z.abs());
                rows.push(vec![
                    occupancy_label(&cell, e.state),
                    num(solver),
                    num(e.estimate.mean),
                    num(e.estimate.std_error),
                    num(z),
                ]);
            }
            "simulate_smdp.csv"
        }
        Target::Game => {
            let game = config.game_config()?;
            let eq = find_equilibrium(&game)?;
            let v = expected_service_time(&eq, &game).context("solving the service-time system")?;
            for m in 0..game.m_ap() {
                let est = simulate_tagged_service_time(&eq, m, &game, &config.sim)?;
                let z = est.z_score(v.get(m));
                worst = worst.max(z.abs());
                rows.push(vec![m.to_string(), num(v.get(m)), num(est.mean), num(est.std_error), num(z)]);
            }
            "simulate_game.csv"
        }
    };
    let count = rows.len();
    output.csv(name, &SIM_HEADER, rows)?;
    Ok(output.finish(format!(
        "{count} states, {} replications each, max |z| = {worst}",
        config.sim.replications
    )))
}
