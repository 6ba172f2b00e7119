use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use trajvault_core::coverage::{coverage_report, CoverageReport};
use trajvault_core::lint::{lint_vault, render_text, Attachments, Severity};
use trajvault_core::report::{
    density_csv, density_plot, histogram_csv, histogram_plot, histogram_svg, spectrum_csv,
    spectrum_plot, structure_listing, structure_text, summary_table, SummaryRow,
};
use trajvault_core::resample::{
    combine, construct_mean_std, match_distributions, replay, subsample_to_target,
    subsample_transitions, MeanStdTarget, SelectionPlan, TargetDistribution,
};
use trajvault_core::stats::{
    density, episode_returns, histogram, summarize_dataset, DensityCurve, EpisodeReturnSummary,
    Histogram,
};
use trajvault_core::synth::{generate, generate_return_pool, BehaviourKnob, DecPomdpSpec};
use trajvault_core::vault::{
    fetch_vault, import_foreign, pack_vault, read_vault, registry, write_vault, ImportSchema,
    METADATA_FILE,
};
use trajvault_core::TrajectoryDataset;

use crate::config::{Format, Settings};
use crate::error::{CliError, CliResult};
use crate::Command;

pub const PLAN_FILE: &str = "selection_plan.json";
pub const SUMMARY_JSON: &str = "returns_summary.json";
pub const HISTOGRAM_JSON: &str = "returns_histogram.json";
pub const DENSITY_JSON: &str = "returns_density.json";
pub const COVERAGE_JSON: &str = "coverage.json";

pub fn execute(command: Command, s: &Settings) -> CliResult<String> {
    match command {
        Command::DescribeStructure { vault } => describe_structure(&vault, s),
        Command::DescribeReturns { vault, out, .. } => describe_returns(&vault, out.as_deref(), s),
        Command::DescribeCoverage { vault, exact, out } => {
            describe_coverage(&vault, exact, out.as_deref(), s)
        }
        Command::Summary { vaults, out, .. } => summary(&vaults, out.as_deref(), s),
        Command::Subsample {
            vault,
            transitions,
            seed,
            target,
            out,
            force,
        } => cmd_subsample(&vault, transitions, seed, target.as_deref(), &out, force, s),
        Command::Combine { vaults, out, force } => cmd_combine(&vaults, &out, force, s),
        Command::Match {
            first,
            second,
            budget,
            seed,
            out,
            force,
            ..
        } => cmd_match(&first, &second, budget, seed, &out, force, s),
        Command::Construct {
            pool,
            mean,
            std,
            episodes,
            tol,
            seed,
            max_iters,
            out,
            force,
        } => {
            let (tol_m, tol_s) = parse_pair(&tol, "--tol")?;
            let target = MeanStdTarget {
                mean,
                std,
                n_episodes: episodes,
                mean_tolerance: tol_m,
                std_tolerance: tol_s,
            };
            cmd_construct(&pool, &target, seed, max_iters, &out, force, s)
        }
        Command::Replay {
            source,
            plan,
            out,
            force,
        } => cmd_replay(&source, &plan, &out, force, s),
        Command::Fetch {
            url, dest, list, ..
        } => cmd_fetch(url.as_deref(), dest, list, s),
        Command::Pack { vault, archive } => {
            pack_vault(&vault, &archive)?;
            emit(s, &json!({"archive": archive}), || {
                format!("packed {} into {}\n", vault.display(), archive.display())
            })
        }
        Command::Import {
            input,
            schema,
            out,
            force,
        } => cmd_import(&input, &schema, &out, force, s),
        Command::Lint {
            vault,
            attach,
            compute,
            strict,
        } => cmd_lint(&vault, attach.as_deref(), compute, strict, s),
        Command::Synth {
            spec,
            quality,
            noise,
            episodes,
            seed,
            pool,
            length,
            out,
            force,
        } => {
            let d = match pool {
                Some(p) => {
                    let (lo, hi) = parse_pair(&p, "--pool")?;
                    generate_return_pool((lo, hi), episodes, length, seed)?
                }
                None => {
                    let spec: DecPomdpSpec = match spec {
                        Some(p) => serde_json::from_str(&read_text(&p)?)
                            .map_err(|e| CliError::user(format!("{}: {e}", p.display())))?,
                        None => DecPomdpSpec::default(),
                    };
                    let knob = BehaviourKnob {
                        quality,
                        exploration_noise: noise,
                    };
                    generate(&spec, &knob, episodes, seed)?
                }
            };
            prepare_out(&out, force, &[])?;
            write_vault(&d, &out)?;
            wrote(&out, &d, None, s)
        }
    }
}

fn emit<T: Serialize>(s: &Settings, value: &T, text: impl FnOnce() -> String) -> CliResult<String> {
    match s.format {
        Format::Json => Ok(format!("{}\n", serde_json::to_string_pretty(value)?)),
        Format::Text => Ok(text()),
    }
}

fn read_text(p: &Path) -> CliResult<String> {
    fs::read_to_string(p).map_err(|e| CliError::io(format!("cannot read {}: {e}", p.display())))
}

fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
    let p = dir.join(name);
    fs::write(&p, contents).map_err(|e| CliError::io(format!("cannot write {}: {e}", p.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    write_file(dir, name, serde_json::to_string_pretty(value)? + "\n")
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

fn parse_pair(s: &str, flag: &str) -> CliResult<(f64, f64)> {
    let parsed = s
        .split_once(',')
        .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
    parsed.ok_or_else(|| CliError::user(format!("{flag} expects two comma-separated numbers")))
}

/// Refuses to write over an input vault, or over an existing directory
/// unless `force` is set and the directory holds a vault.
fn prepare_out(out: &Path, force: bool, inputs: &[&Path]) -> CliResult<()> {
    if let Ok(o) = out.canonicalize() {
        for i in inputs {
            if i.canonicalize().is_ok_and(|c| c == o) {
                return Err(CliError::user(format!(
                    "output {} is one of the inputs",
                    out.display()
                )));
            }
        }
    }
    let occupied = out.is_dir()
        && fs::read_dir(out)
            .map_err(|e| CliError::io(e.to_string()))?
            .next()
            .is_some();
    if !occupied {
        return Ok(());
    }
    if !force {
        return Err(CliError::user(format!(
            "{} already exists; pass --force to replace it",
            out.display()
        )));
    }
    if !out.join(METADATA_FILE).is_file() {
        return Err(CliError::user(format!(
            "{} is not a vault; refusing to replace it",
            out.display()
        )));
    }
    fs::remove_dir_all(out)
        .map_err(|e| CliError::io(format!("cannot remove {}: {e}", out.display())))
}

fn load(p: &Path) -> CliResult<TrajectoryDataset> {
    Ok(read_vault(p)?)
}

fn wrote(
    out: &Path,
    d: &TrajectoryDataset,
    plan: Option<&SelectionPlan>,
    s: &Settings,
) -> CliResult<String> {
    let value = json!({
        "vault": out,
        "transitions": d.n_transitions(),
        "episodes": d.n_episodes(),
        "plan": plan,
    });
    emit(s, &value, || {
        let mut t = format!(
            "wrote {}: {} transitions, {} episodes\n",
            out.display(),
            d.n_transitions(),
            d.n_episodes()
        );
        if let Some(p) = plan {
            t.push_str(&format!(
                "achieved mean {:.2}, std {:.2}; plan in {}\n",
                p.achieved.mean,
                p.achieved.std,
                out.join(PLAN_FILE).display()
            ));
        }
        t
    })
}

fn write_with_plan(out: &Path, d: &TrajectoryDataset, plan: &SelectionPlan) -> CliResult<()> {
    write_vault(d, out)?;
    write_file(out, PLAN_FILE, plan.to_json()? + "\n")
}

fn describe_structure(vault: &Path, s: &Settings) -> CliResult<String> {
    let listing = structure_listing(&load(vault)?);
    emit(s, &listing, || structure_text(&listing))
}

struct ReturnAnalysis {
    summary: EpisodeReturnSummary,
    histogram: Histogram,
    density: Option<DensityCurve>,
}

fn analyse_returns(d: &TrajectoryDataset, bins: usize) -> CliResult<ReturnAnalysis> {
    let summary = summarize_dataset(d)?;
    let returns = episode_returns(d, 1.0);
    let histogram = histogram(&returns, bins, None)?;
    // Constant or single-episode returns have no density.
    let density = density(&returns, None).ok();
    Ok(ReturnAnalysis {
        summary,
        histogram,
        density,
    })
}

fn describe_returns(vault: &Path, out: Option<&Path>, s: &Settings) -> CliResult<String> {
    let d = load(vault)?;
    let a = analyse_returns(&d, s.bins)?;
    let name = d.meta.name.clone();
    let row = SummaryRow::new(&name, &a.summary, None);
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(dir, SUMMARY_JSON, &a.summary)?;
        write_file(
            dir,
            "returns_summary.txt",
            summary_table(std::slice::from_ref(&row)),
        )?;
        write_json(dir, HISTOGRAM_JSON, &a.histogram)?;
        write_file(dir, "returns_histogram.csv", histogram_csv(&a.histogram))?;
        write_json(
            dir,
            "returns_histogram.plot.json",
            &histogram_plot(&a.histogram, &name),
        )?;
        write_file(
            dir,
            "returns_histogram.svg",
            histogram_svg(&a.histogram, &name),
        )?;
        if let Some(k) = &a.density {
            write_json(dir, DENSITY_JSON, k)?;
            write_file(dir, "returns_density.csv", density_csv(k))?;
            write_json(dir, "returns_density.plot.json", &density_plot(k, &name))?;
        }
    }
    let value = json!({
        "name": name,
        "gamma": 1.0,
        "reward_reduction": "mean over agents",
        "summary": a.summary,
        "histogram": a.histogram,
        "density": a.density,
    });
    emit(s, &value, || {
        let mut t = summary_table(std::slice::from_ref(&row));
        t.push_str(&format!(
            "histogram: {} bins over [{:.2}, {:.2}]\n",
            a.histogram.bins(),
            a.histogram.bin_edges[0],
            a.histogram.bin_edges[a.histogram.bins()]
        ));
        if a.density.is_none() {
            t.push_str("density: not defined for these returns\n");
        }
        t
    })
}

fn describe_coverage(
    vault: &Path,
    exact: bool,
    out: Option<&Path>,
    s: &Settings,
) -> CliResult<String> {
    let d = load(vault)?;
    let r = coverage_report(&d, exact)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(dir, COVERAGE_JSON, &r)?;
        write_file(dir, "coverage_spectrum.csv", spectrum_csv(&r))?;
        write_json(
            dir,
            "coverage_spectrum.plot.json",
            &spectrum_plot(&r, &d.meta.name)?,
        )?;
    }
    emit(s, &r, || coverage_text(&d.meta.name, &r))
}

fn coverage_text(name: &str, r: &CoverageReport) -> String {
    let mut t = format!("{name}\n  transitions: {}\n", r.total_transitions);
    match (r.joint_saco, r.unique_state_action) {
        (Some(v), Some(u)) => t.push_str(&format!("  Joint-SACo: {v:.4} ({u} unique)\n")),
        _ => t.push_str("  Joint-SACo: n/a (no state column)\n"),
    }
    t.push_str(&format!(
        "  JOJACo: {:.4} ({} unique)\n",
        r.jojaco, r.unique_joint_obs_action
    ));
    for (agent, v) in &r.decoaco {
        t.push_str(&format!("  DecOACo[{agent}]: {v:.4}\n"));
    }
    t.push_str(&format!(
        "  spectrum: {} distinct multiplicities\n",
        r.count_frequency.len()
    ));
    t
}

fn summary(vaults: &[PathBuf], out: Option<&Path>, s: &Settings) -> CliResult<String> {
    let mut rows = Vec::new();
    if let Some(dir) = out {
        ensure_dir(dir)?;
    }
    for (i, v) in vaults.iter().enumerate() {
        let d = load(v)?;
        let a = analyse_returns(&d, s.bins)?;
        let c = coverage_report(&d, false)?;
        let row = SummaryRow::new(&d.meta.name, &a.summary, Some(&c));
        if let Some(dir) = out {
            let stem = format!("{i:02}_{}", sanitize(&d.meta.name));
            write_file(
                dir,
                &format!("{stem}_histogram.csv"),
                histogram_csv(&a.histogram),
            )?;
            write_file(
                dir,
                &format!("{stem}_histogram.svg"),
                histogram_svg(&a.histogram, &d.meta.name),
            )?;
        }
        rows.push(row);
    }
    if let Some(dir) = out {
        write_json(dir, "summary.json", &rows)?;
        write_file(dir, "summary.txt", summary_table(&rows))?;
    }
    emit(s, &rows, || summary_table(&rows))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn cmd_subsample(
    vault: &Path,
    transitions: usize,
    seed: u64,
    target: Option<&Path>,
    out: &Path,
    force: bool,
    s: &Settings,
) -> CliResult<String> {
    let d = load(vault)?;
    let (sub, plan) = match target {
        None => subsample_transitions(&d, transitions, seed)?,
        Some(t) => {
            let target: TargetDistribution = serde_json::from_str(&read_text(t)?)
                .map_err(|e| CliError::user(format!("{}: {e}", t.display())))?;
            subsample_to_target(&d, &target, transitions, seed)?
        }
    };
    prepare_out(out, force, &[vault])?;
    write_with_plan(out, &sub, &plan)?;
    wrote(out, &sub, Some(&plan), s)
}

fn cmd_combine(vaults: &[PathBuf], out: &Path, force: bool, s: &Settings) -> CliResult<String> {
    let ds = vaults
        .iter()
        .map(|v| load(v))
        .collect::<CliResult<Vec<_>>>()?;
    let c = combine(&ds)?;
    let inputs: Vec<&Path> = vaults.iter().map(PathBuf::as_path).collect();
    prepare_out(out, force, &inputs)?;
    write_vault(&c, out)?;
    wrote(out, &c, None, s)
}

fn cmd_match(
    first: &Path,
    second: &Path,
    budget: Option<usize>,
    seed: u64,
    out: &Path,
    force: bool,
    s: &Settings,
) -> CliResult<String> {
    let a = load(first)?;
    let b = load(second)?;
    let budget = budget.unwrap_or_else(|| a.n_transitions().max(b.n_transitions()));
    let ((da, db), (pa, pb)) = match_distributions(&a, &b, s.bins, budget, seed)?;
    prepare_out(out, force, &[first, second])?;
    ensure_dir(out)?;
    let (oa, ob) = (out.join("first"), out.join("second"));
    write_with_plan(&oa, &da, &pa)?;
    write_with_plan(&ob, &db, &pb)?;
    let value = json!({
        "first": {"vault": oa, "transitions": da.n_transitions(), "episodes": da.n_episodes(), "plan": pa},
        "second": {"vault": ob, "transitions": db.n_transitions(), "episodes": db.n_episodes(), "plan": pb},
    });
    emit(s, &value, || {
        format!(
            "wrote {}: {} transitions, {} episodes, mean {:.2}, std {:.2}\n\
             wrote {}: {} transitions, {} episodes, mean {:.2}, std {:.2}\n",
            oa.display(),
            da.n_transitions(),
            da.n_episodes(),
            pa.achieved.mean,
            pa.achieved.std,
            ob.display(),
            db.n_transitions(),
            db.n_episodes(),
            pb.achieved.mean,
            pb.achieved.std
        )
    })
}

fn cmd_construct(
    pool: &Path,
    target: &MeanStdTarget,
    seed: u64,
    max_iters: usize,
    out: &Path,
    force: bool,
    s: &Settings,
) -> CliResult<String> {
    let d = load(pool)?;
    let (c, plan) = construct_mean_std(&d, target, seed, max_iters)?;
    prepare_out(out, force, &[pool])?;
    write_with_plan(out, &c, &plan)?;
    wrote(out, &c, Some(&plan), s)
}

fn cmd_replay(
    source: &Path,
    plan: &Path,
    out: &Path,
    force: bool,
    s: &Settings,
) -> CliResult<String> {
    let d = load(source)?;
    let p = SelectionPlan::from_json(&read_text(plan)?)?;
    let r = replay(&d, &p)?;
    prepare_out(out, force, &[source])?;
    write_with_plan(out, &r, &p)?;
    wrote(out, &r, Some(&p), s)
}

fn cmd_fetch(
    url: Option<&str>,
    dest: Option<PathBuf>,
    list: bool,
    s: &Settings,
) -> CliResult<String> {
    if list {
        let entries = registry();
        return emit(s, &entries, || {
            let mut t = String::new();
            for e in &entries {
                t.push_str(&format!(
                    "{:<10} {:<9} {:<14} {}\n",
                    e.source, e.environment, e.scenario, e.quality_label
                ));
            }
            t.push_str(&format!("{} datasets\n", entries.len()));
            t
        });
    }
    let url = url.ok_or_else(|| CliError::user("fetch needs a URL or --list"))?;
    let dest = match dest {
        Some(d) => d,
        None => {
            let last = url
                .trim_end_matches('/')
                .rsplit('/')
                .next()
                .unwrap_or("vault");
            let stem = last.trim_end_matches(".tar.gz").trim_end_matches(".tgz");
            s.cache_dir
                .join(if stem.is_empty() { "vault" } else { stem })
        }
    };
    let d = fetch_vault(url, &dest)?;
    let listing = structure_listing(&d);
    emit(s, &json!({"vault": dest, "structure": listing}), || {
        format!("fetched {}\n{}", dest.display(), structure_text(&listing))
    })
}

fn cmd_import(
    input: &Path,
    schema: &Path,
    out: &Path,
    force: bool,
    s: &Settings,
) -> CliResult<String> {
    let schema: ImportSchema = serde_json::from_str(&read_text(schema)?)
        .map_err(|e| CliError::user(format!("{}: {e}", schema.display())))?;
    let d = import_foreign(input, &schema)?;
    prepare_out(out, force, &[])?;
    write_vault(&d, out)?;
    wrote(out, &d, None, s)
}

fn read_attachment<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> CliResult<Option<T>> {
    let p = dir.join(name);
    if !p.is_file() {
        return Ok(None);
    }
    serde_json::from_str(&read_text(&p)?)
        .map(Some)
        .map_err(|e| CliError::data(format!("{}: {e}", p.display())))
}

fn cmd_lint(
    vault: &Path,
    attach: Option<&Path>,
    compute: bool,
    strict: bool,
    s: &Settings,
) -> CliResult<String> {
    let d = load(vault)?;
    let (mut summary, mut hist, mut dens, mut cov) = (None, None, None, None);
    if let Some(dir) = attach {
        summary = read_attachment::<EpisodeReturnSummary>(dir, SUMMARY_JSON)?;
        hist = read_attachment::<Histogram>(dir, HISTOGRAM_JSON)?;
        dens = read_attachment::<DensityCurve>(dir, DENSITY_JSON)?;
        cov = read_attachment::<CoverageReport>(dir, COVERAGE_JSON)?;
    } else if compute && !d.is_empty() {
        let a = analyse_returns(&d, s.bins)?;
        summary = Some(a.summary);
        hist = Some(a.histogram);
        dens = a.density;
        cov = Some(coverage_report(&d, false)?);
    }
    let findings = lint_vault(
        &d,
        &Attachments {
            summary: summary.as_ref(),
            histogram: hist.as_ref(),
            density: dens.as_ref(),
            coverage: cov.as_ref(),
        },
    );
    if strict && findings.iter().any(|f| f.severity == Severity::Error) {
        let detail = render_text(&findings);
        return Err(CliError::data(format!("datasheet has errors:\n{detail}")));
    }
    emit(s, &findings, || render_text(&findings))
}
