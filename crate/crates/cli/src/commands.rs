//! One function per subcommand. Each validates everything first, computes,
//! then writes its CSVs and a manifest next to them.

use crate::config::{RunConfig, Validated};
use crate::error::CliError;
use crate::Units;
use rarehmm::entropy::{estimate_entropies, exact_brackets, EntropyKind};
use rarehmm::experiments::{
    run_sweep, scaling_fit, sweep_table, ExperimentError, SweepBudget, SweepRow,
};
use rarehmm::model::{channel_entropy, check_distinguishing, HmmModel};
use rarehmm::output::{fmt_float, CsvTable, Manifest, ARTIFACT_VERSION};
use rarehmm::reconstruction::{
    block_table, filter_path, hamming, smooth_path, BlockParams, Smoothing,
};
use rarehmm::sampling::{sample_path, write_path_dump, RngStream};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Shared context: effective config, validated models, output settings.
pub struct Run<'a> {
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub valid: Validated,
    pub out: PathBuf,
    pub units: Units,
    pub started: Instant,
}

impl Run<'_> {
    fn write_csv(&self, name: &str, table: &CsvTable) -> Result<String, CliError> {
        let path = self.out.join(name);
        table
            .write(&path)
            .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        Ok(name.to_owned())
    }

    fn write_manifest(
        &self,
        outputs: Vec<String>,
        budgets: serde_json::Value,
    ) -> Result<(), CliError> {
        let manifest = Manifest {
            artifact_version: ARTIFACT_VERSION,
            command: self.command.to_owned(),
            config_hash: self.config.hash(),
            master_seed: self.config.seed(),
            units: self.units.name(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            outputs,
            model: json!({
                "states": self.config.states,
                "outputs": self.config.outputs,
                "generator": self.config.generator,
                "channel": self.config.channel,
                "p": self.valid.p_values,
            }),
            budgets,
        };
        let path = self.out.join(format!("{}.manifest.json", self.command));
        manifest
            .write(&path)
            .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
    }

    fn h(&self, nats: f64) -> f64 {
        self.units.convert(nats)
    }
}

fn label(labels: &[String], i: usize) -> String {
    labels.get(i).cloned().unwrap_or_else(|| i.to_string())
}

pub fn model_info(run: &Run) -> Result<(), CliError> {
    let u = run.units.name();
    for m in &run.valid.models {
        let pi = m.stationary().weights();
        println!("p = {} (p_max = {})", m.p(), m.generator().p_max());
        println!("states = {}, outputs = {}", m.n_states(), m.n_outputs());
        for (i, w) in pi.iter().enumerate() {
            let hc = channel_entropy(m.channel(), i)?;
            println!(
                "  state {}: pi = {w:.6}, H_chan = {:.6} {u}",
                label(&run.config.states, i),
                run.h(hc)
            );
        }
        println!("h(P) = {:.6} {u}", run.h(m.entropy_markov()));
        println!("sum pi H_chan = {:.6} {u}", run.h(m.entropy_channel_avg()));
        println!("h(X,Y) = {:.6} {u}", run.h(m.entropy_joint()));
        let d = check_distinguishing(m.channel());
        println!(
            "distinguishing = {} (min KL = {:.6} {u})",
            d.distinguishing,
            run.h(d.min_divergence())
        );
    }
    Ok(())
}

pub fn sample(run: &Run) -> Result<(), CliError> {
    let m = run.valid.single("sample")?;
    let n = run.config.n_or(100_000);
    if n == 0 {
        return Err(CliError::Invalid("n must be positive".into()));
    }
    let path = sample_path(m, n, RngStream::new(run.config.seed(), 0));
    let sidecar = write_path_dump(&path, m, &run.out, "path")?;
    println!("wrote {n} symbols to {}", sidecar.display());
    run.write_manifest(
        vec![
            "path.hidden.bin".into(),
            "path.observed.bin".into(),
            "path.json".into(),
        ],
        json!({ "n": n }),
    )
}

pub fn entropy(run: &Run) -> Result<(), CliError> {
    let n = run.config.n_or(1_000_000);
    let reps = run.config.reps_or(10);
    let mut t = CsvTable::new(["p", "kind", "estimate", "stderr", "n", "reps"]);
    for m in &run.valid.models {
        let est = estimate_entropies(m, n, reps, run.config.seed())?;
        for kind in [
            EntropyKind::Marginal,
            EntropyKind::Conditional,
            EntropyKind::Joint,
        ] {
            let e = est.get(kind);
            println!(
                "p = {}: {} = {:.6} ± {:.2e} {}",
                m.p(),
                kind.as_str(),
                run.h(e.mean),
                run.h(e.stderr),
                run.units.name()
            );
            t.push(vec![
                fmt_float(m.p()),
                kind.as_str().into(),
                fmt_float(run.h(e.mean)),
                fmt_float(run.h(e.stderr)),
                n.to_string(),
                reps.to_string(),
            ]);
        }
    }
    let name = run.write_csv("entropy.csv", &t)?;
    run.write_manifest(vec![name], json!({ "n": n, "reps": reps }))
}

pub fn bracket(run: &Run) -> Result<(), CliError> {
    let depth = run.config.n_or(12);
    let budget = run.config.budgets.bracket_budget;
    let mut t = CsvTable::new(["p", "n", "lower", "upper", "width"]);
    for m in &run.valid.models {
        for b in exact_brackets(m, depth, budget)? {
            t.push(vec![
                fmt_float(m.p()),
                b.n.to_string(),
                fmt_float(run.h(b.lower)),
                fmt_float(run.h(b.upper)),
                fmt_float(run.h(b.width())),
            ]);
            if b.n == depth {
                println!(
                    "p = {}: {:.6} ≤ h(Y) ≤ {:.6} {} at n = {depth}",
                    m.p(),
                    run.h(b.lower),
                    run.h(b.upper),
                    run.units.name()
                );
            }
        }
    }
    let name = run.write_csv("bracket.csv", &t)?;
    run.write_manifest(
        vec![name],
        json!({ "depth": depth, "bracket_budget": budget }),
    )
}

const RECONSTRUCT_COLUMNS: [&str; 14] = [
    "p",
    "L",
    "K",
    "n",
    "blocks",
    "trailing",
    "smoothing_error_rate",
    "filtering_error_rate",
    "freq_em",
    "freq_eb",
    "freq_eg1",
    "freq_eg2",
    "good1_constant_errors",
    "impossible_blocks",
];

fn summary_row(m: &HmmModel, n: usize, sm: &Smoothing, filtering_rate: f64) -> Vec<String> {
    let t = sm.tallies.expect("hidden path supplied");
    let [em, eb, g1, g2] = t.frequencies();
    vec![
        fmt_float(m.p()),
        sm.params.len().to_string(),
        sm.params.margin().to_string(),
        n.to_string(),
        sm.blocks.len().to_string(),
        sm.trailing.to_string(),
        fmt_float(sm.error_rate().unwrap_or(0.0)),
        fmt_float(filtering_rate),
        fmt_float(em),
        fmt_float(eb),
        fmt_float(g1),
        fmt_float(g2),
        t.good1_constant_errors.to_string(),
        sm.blocks
            .iter()
            .filter(|b| b.impossible)
            .count()
            .to_string(),
    ]
}

pub fn reconstruct(run: &Run) -> Result<(), CliError> {
    let m = run.valid.single("reconstruct")?;
    let params = BlockParams::from_p(m.p(), run.config.overrides)?;
    let n = run.config.n_or(1_000_000);
    if n < params.len() {
        return Err(CliError::Invalid(format!(
            "PathTooShort: n = {n} is shorter than one block (L = {})",
            params.len()
        )));
    }
    let path = sample_path(m, n, RngStream::new(run.config.seed(), 0));
    let sm = smooth_path(m, &path.y, params, Some(&path.x))?;
    let covered = sm.reconstruction.len();
    let filtered = filter_path(m, &path.y[..covered]);
    let filtering_rate = hamming(&filtered, &path.x[..covered])? as f64 / covered as f64;
    println!(
        "p = {}, L = {}, K = {}: smoothing error {:.4e}, filtering error {:.4e} over {covered} symbols",
        m.p(),
        params.len(),
        params.margin(),
        sm.error_rate().unwrap_or(0.0),
        filtering_rate
    );
    let mut summary = CsvTable::new(RECONSTRUCT_COLUMNS);
    summary.push(summary_row(m, n, &sm, filtering_rate));
    let outputs = vec![
        run.write_csv("reconstruct.csv", &summary)?,
        run.write_csv("blocks.csv", &block_table(&sm))?,
    ];
    run.write_manifest(
        outputs,
        json!({ "n": n, "L": params.len(), "K": params.margin() }),
    )
}

fn scale_row(r: &SweepRow, units: Units) -> SweepRow {
    let c = |x: f64| units.convert(x);
    let mut s = r.clone();
    for v in [
        &mut s.h_markov,
        &mut s.h_chan_avg,
        &mut s.h_joint,
        &mut s.h_y_est,
        &mut s.h_y_stderr,
        &mut s.h_xy_cond_est,
        &mut s.h_xy_cond_stderr,
        &mut s.defect,
        &mut s.h_n_empirical,
    ] {
        *v = c(*v);
    }
    if let Some(b) = s.now.as_mut() {
        b.lower = c(b.lower);
        b.upper = c(b.upper);
    }
    s
}

pub fn sweep(run: &Run) -> Result<(), CliError> {
    let budget = SweepBudget {
        n_entropy: run.config.n_or(10_000_000),
        reps: run.config.reps_or(10),
        n_decode: run.config.budgets.n_decode,
        policy: run.config.sweep_policy(),
    };
    let rows = run_sweep(
        &run.valid.family,
        &run.valid.p_values,
        &budget,
        run.config.seed(),
    )?;
    let rows: Vec<SweepRow> = rows.iter().map(|r| scale_row(r, run.units)).collect();
    for r in &rows {
        println!(
            "p = {}: h(X|Y) = {:.6e} ± {:.1e}, h(Y) = {:.6} ± {:.1e} {}, smoothing {:.3e}, filtering {:.3e}",
            r.p,
            r.h_xy_cond_est,
            r.h_xy_cond_stderr,
            r.h_y_est,
            r.h_y_stderr,
            run.units.name(),
            r.smoothing_error_rate,
            r.filtering_error_rate
        );
    }
    let mut outputs = vec![run.write_csv("sweep.csv", &sweep_table(&rows))?];
    let fit = match scaling_fit(&rows) {
        Ok(fit) => {
            println!("{}", fit.summary_line());
            serde_json::to_value(&fit).expect("fit serializes")
        }
        Err(e @ ExperimentError::InsufficientResolution { .. }) => {
            println!("InsufficientResolution: {e}");
            json!({ "error": "InsufficientResolution", "message": e.to_string() })
        }
        Err(e) => return Err(e.into()),
    };
    let fit_path = run.out.join("fit.json");
    std::fs::write(
        &fit_path,
        serde_json::to_string_pretty(&fit).expect("json") + "\n",
    )
    .map_err(|e| CliError::Output(format!("{}: {e}", fit_path.display())))?;
    outputs.push("fit.json".into());
    run.write_manifest(
        outputs,
        serde_json::to_value(budget).expect("budget serializes"),
    )
}

pub fn ensure_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Output(format!("{}: {e}", out.display())))
}
