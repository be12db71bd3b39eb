//! Offline subcommands: pipeline tools, simulation, analysis, replay, chat.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use argchat_core::analysis::{
    chi_square_with, format_p, intention_change_significance, change_report, intention_report, render_table,
    significance_report, summarize_outcomes, ContingencyTable, GroupBy, ReportRecord, SessionOutcome, StudyCounts,
};
use argchat_core::corpus::{cluster, label_concern, tally, top_k, Corpus, Normalizer, RankBy};
use argchat_core::dialogue::{BotMove, DialogueEngine, InputSpec, Prompt, Session, Variant};
use argchat_core::records::{read_jsonl, write_jsonl, PipelineRecord};
use argchat_core::simulation::{all_arms, arm_label, run_experiment, PopulationSpec};
use argchat_core::store::{replay, SessionLog, SessionStore, StoreError};
use argchat_core::{fixtures, ConcernLabel, Policy};

pub fn parse_variant(s: &str) -> Result<Variant, String> {
    match s.trim().to_ascii_uppercase().as_str() {
        "I" | "1" => Ok(Variant::I),
        "II" | "2" => Ok(Variant::II),
        _ => Err(format!("unknown variant `{s}` (expected I or II)")),
    }
}

pub fn parse_policy(s: &str) -> Result<Policy, String> {
    Policy::ALL
        .into_iter()
        .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| format!("unknown policy `{s}` (expected baseline or strategic)"))
}

/// Writes JSON lines to `out`, or stdout when unset.
fn emit<T: serde::Serialize>(out: Option<&Path>, items: impl IntoIterator<Item = T>) -> Result<()> {
    match out {
        Some(p) => {
            let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_jsonl(std::io::BufWriter::new(f), items)?;
        }
        None => write_jsonl(std::io::stdout().lock(), items)?,
    }
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<PipelineRecord>> {
    read_jsonl(path).with_context(|| format!("reading {}", path.display()))
}

pub fn cluster_cmd(input: &Path, threshold: f64, seed: u64, stem: bool, out: Option<&Path>) -> Result<()> {
    let args: Vec<_> = read_records(input)?
        .into_iter()
        .filter_map(|r| match r {
            PipelineRecord::RawArgument(a) => Some(a),
            _ => None,
        })
        .collect();
    if args.is_empty() {
        bail!("{} contains no raw_argument records", input.display());
    }
    let corpus = Corpus::with_normalizer(args, Normalizer { stem })?;
    let result = cluster(&corpus, threshold, seed)?;
    eprintln!(
        "{} arguments: {} clusters, {} unclustered",
        corpus.len(),
        result.clusters.len(),
        result.unclustered.len()
    );
    let records = result
        .clusters
        .into_iter()
        .map(PipelineRecord::Cluster)
        .chain(result.unclustered.into_iter().map(|id| PipelineRecord::Unclustered { id }));
    emit(out, records)
}

pub fn rank_cmd(votes: &Path, k: usize, rank_by: RankBy, out: Option<&Path>) -> Result<()> {
    let mut candidates = Vec::new();
    let mut sheets = Vec::new();
    for r in read_records(votes)? {
        match r {
            PipelineRecord::Candidate(c) => candidates.push(c),
            PipelineRecord::VoteSheet(s) => sheets.push(s),
            _ => {}
        }
    }
    if candidates.is_empty() {
        bail!("{} contains no candidate records", votes.display());
    }
    let t = tally(&sheets, &candidates)?;
    let header = ["type".to_owned(), "meat eater votes".into(), "vegetarian votes".into()];
    let rows: Vec<Vec<String>> = t
        .per_type
        .iter()
        .map(|(ty, v)| vec![ty.to_string(), v.meat_eater.to_string(), v.vegetarian.to_string()])
        .collect();
    eprint!("{}", render_table(&header, &rows));
    let ranking = top_k(&t, &candidates, k, rank_by)?;
    for w in ranking.warnings() {
        eprintln!("warning: {w}");
    }
    let lines: Vec<serde_json::Value> = ranking
        .counters()
        .map(|c| {
            let mut v = serde_json::to_value(c).expect("counter serializes");
            v.as_object_mut().expect("object").insert("kind".into(), "counter_argument".into());
            v
        })
        .collect();
    emit(out, lines)
}

pub fn label_cmd(input: &Path, out: Option<&Path>) -> Result<()> {
    let mut counts: BTreeMap<ConcernLabel, usize> = BTreeMap::new();
    let labels: Vec<PipelineRecord> = read_records(input)?
        .into_iter()
        .filter_map(|r| match r {
            PipelineRecord::Explanation { id, text } => {
                let label = label_concern(&text);
                *counts.entry(label).or_default() += 1;
                Some(PipelineRecord::ConcernLabel { id, label })
            }
            _ => None,
        })
        .collect();
    let summary: Vec<String> = counts.iter().map(|(l, n)| format!("{}={n}", l.as_str())).collect();
    eprintln!("{}", summary.join(" "));
    emit(out, labels)
}

pub fn parse_arms(spec: &str) -> Result<Vec<argchat_core::dialogue::DialogueConfig>> {
    let all = all_arms();
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(all);
    }
    spec.split(',')
        .map(|label| {
            let label = label.trim();
            all.iter()
                .find(|c| arm_label(c).eq_ignore_ascii_case(label))
                .copied()
                .with_context(|| {
                    let known: Vec<String> = all.iter().map(arm_label).collect();
                    format!("unknown arm `{label}`; known arms: all, {}", known.join(", "))
                })
        })
        .collect()
}

pub fn load_population(path: Option<&Path>) -> Result<PopulationSpec> {
    let Some(path) = path else { return Ok(PopulationSpec::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let body = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    // Accept either a single JSON line or a whole pretty-printed document.
    serde_json::from_str(body)
        .or_else(|_| serde_json::from_str(&text))
        .with_context(|| format!("parsing persuadee population in {}", path.display()))
}

pub struct SimulateArgs<'a> {
    pub arms: &'a str,
    pub n: usize,
    pub model: Option<&'a Path>,
    pub seed: u64,
    pub out: Option<&'a Path>,
}

pub fn simulate_cmd(kb_id: &str, engine: &DialogueEngine, args: SimulateArgs<'_>) -> Result<()> {
    let arms = parse_arms(args.arms)?;
    let population = load_population(args.model)?;
    let exp = run_experiment(args.n, &population, &arms, engine, args.seed)?;
    if let Some(dir) = args.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for s in exp.sessions() {
            let log = SessionLog::from_session(kb_id, s);
            fs::write(dir.join(format!("{}.jsonl", s.id)), log.to_jsonl())?;
        }
        eprintln!("wrote {} session logs to {}", exp.sessions().count(), dir.display());
    }
    let outcomes = exp
        .sessions()
        .map(SessionOutcome::from_session)
        .collect::<Result<Vec<_>, _>>()?;
    print!("{}", intention_report(&outcomes).0);
    Ok(())
}

/// Session logs from files or directories of `*.jsonl` files.
pub fn collect_logs(paths: &[PathBuf]) -> Result<Vec<(PathBuf, SessionLog)>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    files
        .into_iter()
        .map(|f| {
            let log = SessionLog::load(&f).with_context(|| format!("reading {}", f.display()))?;
            Ok((f, log))
        })
        .collect()
}

fn replay_all(
    logs: &[(PathBuf, SessionLog)],
    engines: &BTreeMap<String, DialogueEngine>,
) -> Vec<(PathBuf, Result<Session, String>)> {
    logs.iter()
        .map(|(path, log)| {
            let res = match engines.get(&log.header.kb_id) {
                None => Err(format!("unknown knowledge base `{}`", log.header.kb_id)),
                Some(e) => replay(log, e).map(|o| o.session).map_err(|e| e.to_string()),
            };
            (path.clone(), res)
        })
        .collect()
}

pub fn replay_cmd(paths: &[PathBuf], engines: &BTreeMap<String, DialogueEngine>) -> Result<()> {
    let logs = collect_logs(paths)?;
    let mut failed = 0;
    for (path, res) in replay_all(&logs, engines) {
        match res {
            Ok(s) => {
                let status = match s.done_summary() {
                    Some(d) => format!("done, {:+} intention points", d.intention_points),
                    None => format!("active in {}", s.state),
                };
                println!("ok       {} ({} events, {status})", s.id, s.events.len());
            }
            Err(e) => {
                failed += 1;
                println!("diverged {}: {e}", path.display());
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} logs failed to replay", logs.len());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Report {
    /// Per-group summary using `--group-by`.
    Summary,
    /// Participants, intention points, harvest and disagreement per arm.
    Intention,
    /// Participants whose intention got better or worse.
    Change,
    /// Chi-square test of baseline against strategic.
    Significance,
}

fn summary_report(outcomes: &[SessionOutcome], by: GroupBy) -> (String, Vec<ReportRecord>) {
    let header: Vec<String> = [
        "group",
        "participants",
        "intention points",
        "harvested",
        "avg disagreed",
        "better",
        "worse",
    ]
    .map(str::to_owned)
    .to_vec();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (key, s) in summarize_outcomes(outcomes, by) {
        rows.push(vec![
            key.to_string(),
            s.n_participants.to_string(),
            s.points_cell(),
            s.n_harvested.to_string(),
            format!("{:.2}", s.avg_disagreed),
            s.n_better.to_string(),
            s.n_worse.to_string(),
        ]);
        let mut values = BTreeMap::new();
        values.insert("summary".into(), serde_json::to_value(&s).expect("serializable"));
        records.push(ReportRecord {
            report: "summary".into(),
            variant: key.variant,
            policy: key.policy,
            group: key.concern.map(ConcernLabel::from),
            values,
        });
    }
    (render_table(&header, &rows), records)
}

fn counts_reports(counts: &StudyCounts, reports: &[Report]) -> Result<(String, Vec<ReportRecord>)> {
    let mut text = String::new();
    let mut records = Vec::new();
    for r in reports {
        let (t, recs) = match r {
            Report::Change => change_report(counts),
            Report::Significance => significance_report(&intention_change_significance(counts)?),
            Report::Summary | Report::Intention => continue,
        };
        text.push_str(&t);
        text.push('\n');
        records.extend(recs);
    }
    Ok((text, records))
}

pub struct AnalyzeArgs<'a> {
    pub sessions: &'a [PathBuf],
    pub group_by: &'a str,
    pub reports: &'a [Report],
    pub out: Option<&'a Path>,
}

pub fn analyze_sessions_cmd(engines: &BTreeMap<String, DialogueEngine>, args: AnalyzeArgs<'_>) -> Result<()> {
    if args.sessions.is_empty() {
        bail!("no session logs given (use --sessions)");
    }
    let by = GroupBy::parse(args.group_by)?;
    let logs = collect_logs(args.sessions)?;
    let mut outcomes = Vec::new();
    let mut skipped = 0;
    for (path, res) in replay_all(&logs, engines) {
        let s = res.map_err(anyhow::Error::msg).with_context(|| format!("replaying {}", path.display()))?;
        match SessionOutcome::from_session(&s) {
            Ok(o) => outcomes.push(o),
            Err(_) => skipped += 1,
        }
    }
    if skipped > 0 {
        eprintln!("skipped {skipped} unfinished sessions");
    }
    let mut text = String::new();
    let mut records = Vec::new();
    for r in args.reports {
        let (t, recs) = match r {
            Report::Summary => summary_report(&outcomes, by),
            Report::Intention => intention_report(&outcomes),
            Report::Change | Report::Significance => {
                counts_reports(&StudyCounts::from_outcomes(&outcomes), std::slice::from_ref(r))?
            }
        };
        text.push_str(&t);
        if !t.ends_with("\n\n") {
            text.push('\n');
        }
        records.extend(recs);
    }
    print!("{text}");
    if let Some(out) = args.out {
        emit(Some(out), records)?;
    }
    Ok(())
}

pub fn analyze_counts_cmd(input: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let counts: StudyCounts = match input {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => fixtures::study_counts(),
    };
    let (text, records) = counts_reports(&counts, &[Report::Change, Report::Significance])?;
    print!("{text}");
    if let Some(out) = out {
        emit(Some(out), records)?;
    }
    Ok(())
}

pub fn chi2_cmd(table: &str, yates: bool, json: bool) -> Result<()> {
    let t = ContingencyTable::parse(table)?;
    let r = chi_square_with(&t, yates)?;
    if json {
        println!("{}", serde_json::to_string(&r)?);
    } else {
        println!("chi-square = {:.4}, df = {}, p = {:.6} ({})", r.statistic, r.df, r.p_value, format_p(r.p_value));
    }
    Ok(())
}

fn render_prompt(p: &Prompt, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "bot: {}", p.text)?;
    if let InputSpec::Choice { options } = &p.input {
        for (i, o) in options.iter().enumerate() {
            writeln!(out, "  {}) {}", i + 1, o.label)?;
        }
    }
    write!(out, "> ")?;
    out.flush()
}

/// Numbers pick an option of the current prompt; anything else is sent as typed.
fn resolve_number(p: &Prompt, line: &str) -> String {
    if let (InputSpec::Choice { options }, Ok(n)) = (&p.input, line.trim().parse::<usize>()) {
        if (1..=options.len()).contains(&n) {
            return options[n - 1].value.clone();
        }
    }
    line.trim().to_owned()
}

/// Runs one interactive session over the given reader and writer.
pub fn chat(
    store: &SessionStore,
    kb_id: &str,
    variant: Variant,
    policy: Policy,
    input: impl BufRead,
    mut out: impl Write,
) -> Result<Option<argchat_core::dialogue::DoneSummary>> {
    let (id, mut prompt) = store.create_session(kb_id, variant, policy)?;
    writeln!(out, "session {id} (variant {variant}, {policy})")?;
    render_prompt(&prompt, &mut out)?;
    let mut seq = 0;
    for line in input.lines() {
        let line = line?;
        let value = resolve_number(&prompt, &line);
        match store.post_input(&id, seq, &value) {
            Ok(BotMove::Prompt(p)) => {
                seq += 1;
                prompt = p;
                render_prompt(&prompt, &mut out)?;
            }
            Ok(BotMove::Done(d)) => {
                writeln!(out)?;
                writeln!(
                    out,
                    "Thank you. Intention before: {}, after: {}, change: {:+} points.",
                    d.initial_intention.label(),
                    d.final_intention.label(),
                    d.intention_points
                )?;
                return Ok(Some(d));
            }
            Err(e @ StoreError::Dialogue(_)) => {
                writeln!(out, "error: {e}")?;
                render_prompt(&prompt, &mut out)?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    writeln!(out)?;
    writeln!(out, "input ended; session {id} left unfinished")?;
    Ok(None)
}
