use std::path::{Path, PathBuf};

use ccfrontier_core::mdp_solver::TailRule;
use ccfrontier_core::trace_io::{self, read_capacity_csv, write_capacity_csv};
use ccfrontier_core::{
    approx_c_smf, fit_mif, fit_smf, gen_mif, gen_predictions, gen_smf, lost_throughput_frontier,
    mif_frontier, pmif_frontier, smf_frontier, solve_mif, solve_pmif, CapacityTrace, LawConfig,
    MdpConfig, MifModel, PmifModel, RatioDist, RunOptions, SmfModel,
};
use serde_json::json;

use crate::error::{usage, Result};
use crate::manifest::{sha256_hex, sibling, Manifest};
use crate::parse;
use crate::{
    BoundArgs, IngestArgs, LawArgs, ModelSource, RunInputs, SimulateArgs, SolveArgs, SweepArgs,
    SynthArgs,
};

const DEFAULT_T: f64 = 0.1;

fn require<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| usage(format!("missing required flag {flag}")))
}

/// Distribution spec; `atoms:@path` and a bare `@path` read the JSON from
/// a file.
fn load_dist(spec: &str, m: &mut Manifest) -> Result<RatioDist> {
    let spec = spec.trim();
    if let Some(path) = spec.strip_prefix('@') {
        return Ok(RatioDist::from_json(&m.read_text(Path::new(path))?)?);
    }
    if let Some(path) = spec.strip_prefix("atoms:@") {
        let text = m.read_text(Path::new(path))?;
        return parse::dist(&format!("atoms:{text}"));
    }
    parse::dist(spec)
}

fn load_trace(path: &Path, m: &mut Manifest) -> Result<(CapacityTrace, String)> {
    let bytes = m.read(path)?;
    let digest = sha256_hex(&bytes);
    let text = String::from_utf8_lossy(&bytes);
    Ok((read_capacity_csv(&text)?, digest))
}

fn load_smf(path: &Path, m: &mut Manifest) -> Result<SmfModel> {
    Ok(SmfModel::from_json(&m.read_text(path)?)?)
}

/// Resolved `--input` / `--dist` / `--smf-model` plus the round duration.
struct Source {
    trace: Option<CapacityTrace>,
    dist: Option<RatioDist>,
    smf: Option<SmfModel>,
    t: f64,
}

fn resolve_source(src: &ModelSource, m: &mut Manifest) -> Result<Source> {
    let given = [src.input.is_some(), src.dist.is_some(), src.smf_model.is_some()];
    match given.iter().filter(|g| **g).count() {
        1 => {}
        0 => return Err(usage("give one of --input, --dist or --smf-model")),
        _ => return Err(usage("--input, --dist and --smf-model are mutually exclusive")),
    }
    let trace = match &src.input {
        Some(p) => Some(load_trace(p, m)?.0),
        None => None,
    };
    let t = match (&trace, src.t) {
        (Some(tr), Some(t)) if t != tr.round_duration() => {
            return Err(usage(format!(
                "--T {t} differs from the trace's round duration {}; re-ingest with --T {t}",
                tr.round_duration()
            )))
        }
        (Some(tr), _) => tr.round_duration(),
        (None, t) => t.unwrap_or(DEFAULT_T),
    };
    let dist = match &src.dist {
        Some(s) => Some(load_dist(s, m)?),
        None => None,
    };
    let smf = match &src.smf_model {
        Some(p) => Some(load_smf(p, m)?),
        None => None,
    };
    Ok(Source { trace, dist, smf, t })
}

impl Source {
    fn ratio(&self) -> Result<RatioDist> {
        if let Some(d) = &self.dist {
            return Ok(d.clone());
        }
        if let Some(tr) = &self.trace {
            return Ok(fit_mif(tr)?.ratio);
        }
        Err(usage("this model needs --input or --dist, not --smf-model"))
    }

    fn smf(&self, bins: usize, min_samples: usize) -> Result<SmfModel> {
        if let Some(s) = &self.smf {
            return Ok(s.clone());
        }
        if let Some(tr) = &self.trace {
            return Ok(fit_smf(tr, bins, min_samples)?);
        }
        let d = self.dist.clone().expect("one source is set");
        Ok(SmfModel::single(d))
    }
}

pub fn ingest(a: &IngestArgs, mut m: Manifest) -> Result<()> {
    let path = require(&a.trace, "--trace")?;
    let out = require(&a.out, "--out")?;
    let text = m.read_text(path)?;
    let sched = trace_io::parse_mahimahi(&text, a.mtu)?;
    let report = trace_io::to_capacity_trace(&sched, a.t, a.floor_bps)?;
    let trace = report.trace()?;
    eprintln!("warnings: {} (rounds raised to the capacity floor)", report.floored_rounds);
    if report.floored_rounds > 0 {
        m.notes.push(format!("{} rounds raised to the capacity floor", report.floored_rounds));
    }
    m.write(out, write_capacity_csv(&trace).as_bytes())?;
    m.finish(out)?;
    Ok(())
}

pub fn synth(a: &SynthArgs, mut m: Manifest) -> Result<()> {
    let out = require(&a.out, "--out")?;
    let rounds = *require(&a.rounds, "--rounds")?;
    m.seeds.push(a.seed);
    let trace = match (&a.dist, &a.smf_model) {
        (Some(spec), None) => {
            let model = MifModel {
                ratio: load_dist(spec, &mut m)?,
            };
            gen_mif(&model, a.mu0, rounds, a.t, a.seed)?
        }
        (None, Some(p)) => {
            let model = load_smf(p, &mut m)?;
            let st = gen_smf(&model, a.mu0, rounds, a.t, a.seed)?;
            if st.clamped_lookups > 0 {
                m.note(format!(
                    "{} state lookups fell outside the model's bins and used the edge state",
                    st.clamped_lookups
                ));
            }
            st.trace
        }
        (None, None) => return Err(usage("give --dist or --smf-model")),
        (Some(_), Some(_)) => return Err(usage("--dist and --smf-model are mutually exclusive")),
    };
    m.write(out, write_capacity_csv(&trace).as_bytes())?;
    m.finish(out)?;
    Ok(())
}

pub fn bound(a: &BoundArgs, mut m: Manifest) -> Result<()> {
    let out = require(&a.out, "--out")?;
    let src = resolve_source(&a.src, &mut m)?;
    let curve = match a.model.as_str() {
        "mif" => mif_frontier(&src.ratio()?, src.t, a.points)?,
        "smf" => smf_frontier(&src.smf(a.src.bins, a.src.min_samples)?, src.t, a.points)?,
        "lost" => lost_throughput_frontier(&src.smf(a.src.bins, a.src.min_samples)?, src.t, a.points)?,
        "pmif" => {
            let err = load_dist(require(&a.pred_error, "--pred-error")?, &mut m)?;
            pmif_frontier(&err, src.t, a.points)?
        }
        other => unreachable!("clap restricts --model, got {other}"),
    };
    let clamped = curve.clamped_points();
    if clamped > 0 {
        m.note(format!("{clamped} curve points have a state load clamped to its support edge"));
    }
    m.write(out, curve.to_csv().as_bytes())?;
    m.finish(out)?;
    Ok(())
}

pub fn solve(a: &SolveArgs, mut m: Manifest) -> Result<()> {
    let out = require(&a.out, "--out")?;
    let w = *require(&a.w, "--w")?;
    let src = resolve_source(&a.src, &mut m)?;

    if a.law == "smf-approx" {
        let model = src.smf(a.src.bins, a.src.min_samples)?;
        let consts = approx_c_smf(&model, w, src.t)?;
        let c_map: serde_json::Map<String, serde_json::Value> = consts
            .iter()
            .enumerate()
            .map(|(i, c)| (i.to_string(), json!(c.c)))
            .collect();
        let doc = json!({
            "law": "smf-approx",
            "w": w,
            "T": src.t,
            "constants": consts,
            "law_config": {"law": "optimal-smf", "C_map": c_map},
        });
        m.write(out, serde_json::to_string_pretty(&doc).expect("json").as_bytes())?;
        m.finish(out)?;
        return Ok(());
    }

    let mut cfg = MdpConfig::new(w, a.gamma, src.t);
    cfg.q_max = a.q_max.or(cfg.q_max);
    cfg.n_q = a.n_q.unwrap_or(cfg.n_q);
    cfg.rho_min = a.rho_min.unwrap_or(cfg.rho_min);
    cfg.rho_max = a.rho_max.or(cfg.rho_max);
    cfg.n_rho = a.n_rho.unwrap_or(cfg.n_rho);
    cfg.tol = a.tol.unwrap_or(cfg.tol);
    cfg.max_iters = a.max_iters.unwrap_or(cfg.max_iters);
    if let Some(t) = &a.tail {
        cfg.tail = if t == "linear" { TailRule::Linear } else { TailRule::Clamp };
    }

    let sol = if a.law == "mif" {
        solve_mif(&src.ratio()?, &cfg)?
    } else {
        let err = load_dist(require(&a.pred_error, "--pred-error")?, &mut m)?;
        let drift = match (&a.pred_drift, &src.trace) {
            (Some(spec), _) => load_dist(spec, &mut m)?,
            (None, Some(tr)) => {
                m.seeds.push(a.seed);
                let preds = gen_predictions(tr, &err, a.seed)?;
                PmifModel::with_fitted_drift(err.clone(), &preds)?.pred_drift
            }
            (None, None) => return Err(usage("pmif needs --pred-drift or an --input trace to fit it from")),
        };
        solve_pmif(&err, &drift, &cfg)?
    };
    if !sol.converged {
        m.note(format!("value iteration stopped after {} iterations without converging", sol.iters));
    }
    if sol.unreliable {
        m.note(format!(
            "{:.3} of the transition mass leaves the queue grid; raise --q-max",
            sol.clamp_mass
        ));
    }
    if let Some(p) = &a.dump_v {
        m.write(p, sol.v_csv().as_bytes())?;
    }
    if let Some(p) = &a.dump_w {
        m.write(p, sol.w_csv().as_bytes())?;
    }
    m.write(out, sol.to_json().as_bytes())?;
    m.finish(out)?;
    Ok(())
}

/// Expand the law flags into configs. Numeric flags take lists and the
/// result is their cartesian product.
fn laws_from_flags(a: &LawArgs) -> Result<Vec<LawConfig>> {
    if let Some(text) = &a.law_json {
        if a.law.is_some() {
            return Err(usage("--law and --law-json are mutually exclusive"));
        }
        let law: LawConfig = serde_json::from_str(text)
            .map_err(|e| usage(format!("--law-json: {e}")))?;
        return Ok(vec![law]);
    }
    let name = require(&a.law, "--law")?.as_str();
    let flags = [
        ("--c", &a.c),
        ("--cp", &a.cp),
        ("--c-map", &a.c_map),
        ("--alpha", &a.alpha),
        ("--beta", &a.beta),
        ("--eta", &a.eta),
    ];
    let used: &[&str] = match name {
        "optimal-mif" => &["--c"],
        "optimal-pmif" => &["--cp"],
        "optimal-smf" => &["--c-map"],
        "xcp" => &["--alpha", "--beta"],
        "abc" => &["--eta", "--beta"],
        other => unreachable!("clap restricts --law, got {other}"),
    };
    for (flag, v) in flags {
        if v.is_some() && !used.contains(&flag) {
            return Err(usage(format!("{flag} does not apply to {name}")));
        }
    }
    let list = |flag: &str, v: &Option<String>| -> Result<Vec<f64>> { parse::list(require(v, flag)?) };
    let mut laws = Vec::new();
    match name {
        "optimal-mif" => laws.extend(list("--c", &a.c)?.into_iter().map(|c| LawConfig::OptimalMif { c })),
        "optimal-pmif" => laws.extend(list("--cp", &a.cp)?.into_iter().map(|cp| LawConfig::OptimalPmif { cp })),
        "optimal-smf" => laws.push(LawConfig::OptimalSmf {
            c_map: parse::state_map(require(&a.c_map, "--c-map")?)?,
        }),
        "xcp" => {
            for alpha in list("--alpha", &a.alpha)? {
                for beta in list("--beta", &a.beta)? {
                    laws.push(LawConfig::Xcp { alpha, beta });
                }
            }
        }
        _ => {
            for eta in list("--eta", &a.eta)? {
                for beta in list("--beta", &a.beta)? {
                    laws.push(LawConfig::Abc { eta, beta });
                }
            }
        }
    }
    Ok(laws)
}

/// Predictions and SMF bins, built only when some law needs them.
fn run_options(
    inp: &RunInputs,
    trace: &CapacityTrace,
    laws: &[LawConfig],
    m: &mut Manifest,
) -> Result<RunOptions> {
    let mut opts = RunOptions {
        q0: inp.q0,
        xcp_initial_rate: inp.xcp_initial_rate,
        ..RunOptions::default()
    };
    if laws.iter().any(LawConfig::needs_prediction) {
        let err = load_dist(require(&inp.pred_error, "--pred-error")?, m)?;
        m.seeds.push(inp.seed);
        opts.preds = Some(gen_predictions(trace, &err, inp.seed)?);
    }
    if laws.iter().any(LawConfig::needs_state) {
        let model = match &inp.smf_model {
            Some(p) => load_smf(p, m)?,
            None => fit_smf(trace, inp.bins, inp.min_samples)?,
        };
        opts.smf_bins = Some(model.bin_edges().to_vec());
    }
    Ok(opts)
}

pub fn simulate(a: &SimulateArgs, mut m: Manifest) -> Result<()> {
    let out = require(&a.out, "--out")?;
    let laws = laws_from_flags(&a.law)?;
    let [law] = laws.as_slice() else {
        return Err(usage("simulate runs one law; use sweep for lists"));
    };
    let (trace, digest) = load_trace(require(&a.inputs.input, "--input")?, &mut m)?;
    let opts = run_options(&a.inputs, &trace, &laws, &mut m)?;
    let run = ccfrontier_core::run(&trace, law, &opts)?;
    if run.summary.clamp_count > 0 {
        m.note(format!("{} rounds clamped a negative rate to zero", run.summary.clamp_count));
    }
    let summary_path: PathBuf = a.summary.clone().unwrap_or_else(|| sibling(out, "summary.json"));
    let doc = json!({
        "law": law,
        "trace_sha256": digest,
        "round_duration": trace.round_duration(),
        "summary": run.summary,
    });
    m.write(out, run.to_csv().as_bytes())?;
    m.write(&summary_path, serde_json::to_string_pretty(&doc).expect("json").as_bytes())?;
    m.finish(out)?;
    Ok(())
}

pub fn sweep(a: &SweepArgs, mut m: Manifest) -> Result<()> {
    let out = require(&a.out, "--out")?;
    let laws = match &a.laws_file {
        Some(p) => {
            if a.law.law.is_some() || a.law.law_json.is_some() {
                return Err(usage("--laws-file replaces --law and --law-json"));
            }
            let text = m.read_text(p)?;
            serde_json::from_str::<Vec<LawConfig>>(&text)
                .map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => laws_from_flags(&a.law)?,
    };
    let (trace, _) = load_trace(require(&a.inputs.input, "--input")?, &mut m)?;
    let opts = run_options(&a.inputs, &trace, &laws, &mut m)?;
    let mut curve = ccfrontier_core::sweep(&trace, &laws, &opts)?;
    for (i, law, e) in &curve.errors {
        m.note(format!("config {i} ({}) failed: {e}", law.label()));
    }
    if curve.entries.is_empty() {
        let (_, _, e) = curve.errors.swap_remove(0);
        return Err(e.into());
    }
    m.write(out, curve.to_csv().as_bytes())?;
    m.finish(out)?;
    Ok(())
}
