#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use argchat_core::analysis::ConcernTypeTable;
use argchat_core::corpus::{Candidate, Corpus, RankBy, RawArgument, Tally};
use argchat_core::dialogue::{DialogueConfig, DialogueEngine, Session, Variant, COUNTERS_TOTAL};
use argchat_core::{fixtures, ArgumentType, AuthorGroup, Concern, ConcernLabel, Policy};

pub fn engine() -> DialogueEngine {
    DialogueEngine::new(Arc::new(fixtures::reference_kb()))
}

/// Γ(k/2) for positive integer k, from Γ(1/2) = √π, Γ(1) = 1 and Γ(x+1) = xΓ(x).
pub fn gamma_half(k: u32) -> f64 {
    let mut x = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    let mut g = if k.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    while x < f64::from(k) / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Chi-square upper tail by direct quadrature of the density.
///
/// With t = u² the integrand 2u·f(u²) = 2u^(k-1)·e^(-u²/2) / (2^(k/2)Γ(k/2))
/// is smooth even for k = 1, so composite Simpson on [√x, √x + 40] suffices.
pub fn chi_square_tail_quadrature(x: f64, k: u32) -> f64 {
    let norm = 2.0 / (2f64.powf(f64::from(k) / 2.0) * gamma_half(k));
    let f = |u: f64| norm * u.powi(k as i32 - 1) * (-u * u / 2.0).exp();
    let (a, b) = (x.sqrt(), x.sqrt() + 40.0);
    let n = 40_000;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Pearson statistic straight from the definition.
pub fn pearson_by_hand(rows: &[Vec<u64>]) -> f64 {
    let total: f64 = rows.iter().flatten().map(|&x| x as f64).sum();
    let cols = rows[0].len();
    let row_sums: Vec<f64> = rows.iter().map(|r| r.iter().map(|&x| x as f64).sum()).collect();
    let col_sums: Vec<f64> = (0..cols).map(|j| rows.iter().map(|r| r[j] as f64).sum()).collect();
    let mut stat = 0.0;
    for (i, r) in rows.iter().enumerate() {
        for (j, &o) in r.iter().enumerate() {
            let e = row_sums[i] * col_sums[j] / total;
            stat += (o as f64 - e).powi(2) / e;
        }
    }
    stat
}

/// Twelve short arguments on two themes, interleaved.
pub fn two_theme_corpus() -> Corpus {
    let taste = [
        "Steak tastes delicious",
        "Delicious steak tastes amazing",
        "Steak tastes really delicious",
        "Grilled steak tastes delicious",
        "Delicious juicy steak",
        "Steak tastes delicious every time",
    ];
    let protein = [
        "Protein keeps muscles strong",
        "I need protein for strong muscles",
        "Muscles need protein",
        "Protein builds strong muscles",
        "Strong muscles need protein daily",
        "Protein for muscles",
    ];
    let args = taste
        .iter()
        .zip(protein.iter())
        .enumerate()
        .flat_map(|(i, (t, p))| {
            [
                RawArgument::new(format!("t{i}"), *t, AuthorGroup::MeatEater),
                RawArgument::new(format!("p{i}"), *p, AuthorGroup::MeatEater),
            ]
        })
        .collect();
    Corpus::new(args).unwrap()
}

/// Connected components of the graph joining arguments whose pairwise
/// similarity reaches the threshold; each component sorted, components
/// sorted by first member.
pub fn similarity_components(corpus: &Corpus, threshold: f64) -> Vec<Vec<String>> {
    let ids: Vec<&str> = corpus.args().iter().map(|a| a.id.as_str()).collect();
    let n = ids.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    for i in 0..n {
        for j in i + 1..n {
            let s = argchat_core::corpus::similarity(corpus.tokens(ids[i]).unwrap(), corpus.tokens(ids[j]).unwrap());
            if s >= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<String>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(ids[i].to_owned());
    }
    let mut out: Vec<Vec<String>> = groups
        .into_values()
        .map(|mut g| {
            g.sort();
            g
        })
        .collect();
    out.sort();
    out
}

/// Top-k per group by repeated selection of the best remaining candidate,
/// earliest input position winning ties.
pub fn top_k_by_selection(tally: &Tally, candidates: &[Candidate], k: usize, rank_by: RankBy) -> Vec<Vec<String>> {
    let mut keys: Vec<(ArgumentType, Option<String>)> = Vec::new();
    for c in candidates {
        let key = (c.arg_type, c.target_cluster.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let score = |c: &Candidate| tally.per_argument.get(&c.id).map_or(0, |v| rank_by.score(v));
    keys.iter()
        .map(|key| {
            let mut remaining: Vec<&Candidate> = candidates
                .iter()
                .filter(|c| c.arg_type == key.0 && c.target_cluster == key.1)
                .collect();
            let mut out = Vec::new();
            while out.len() < k && !remaining.is_empty() {
                let mut best = 0;
                for (i, c) in remaining.iter().enumerate() {
                    if score(c) > score(remaining[best]) {
                        best = i;
                    }
                }
                out.push(remaining.remove(best).id.clone());
            }
            out
        })
        .collect()
}

pub fn label_by_regex(text: &str) -> ConcernLabel {
    let health = regex::Regex::new("(?i)health").unwrap();
    let env = regex::Regex::new("(?i)animal|environment|planet").unwrap();
    match (health.is_match(text), env.is_match(text)) {
        (true, true) => ConcernLabel::Both,
        (true, false) => ConcernLabel::Health,
        (false, true) => ConcernLabel::Environment,
        (false, false) => ConcernLabel::Unlabeled,
    }
}

/// 200 explanations mixing keyword variants, casing and filler.
pub fn explanation_fixture() -> Vec<String> {
    let health = ["health", "healthy", "HEALTH", "unhealthy", "Healthier", "my health"];
    let env = ["animals", "Animal", "environment", "ENVIRONMENTAL", "planet", "the Planet", "animal welfare"];
    let filler = [
        "I just don't like the taste",
        "it is cheaper",
        "because of my family",
        "meat production",
        "hurts",
        "I worry about",
        "",
        "heal th is split",
        "plan et",
    ];
    let mut out = Vec::with_capacity(200);
    for i in 0..200usize {
        let f1 = filler[i % filler.len()];
        let f2 = filler[(i * 7 + 3) % filler.len()];
        let text = match i % 4 {
            0 => format!("{f1} {} {f2}", health[i % health.len()]),
            1 => format!("{f1} {} {f2}", env[i % env.len()]),
            2 => format!("{} and {f1} {}", env[(i / 4) % env.len()], health[(i / 4) % health.len()]),
            _ => format!("{f1} {f2}"),
        };
        out.push(text);
    }
    out
}

/// Reference rows of the argument-type evaluation: selections per type in
/// the order DIR, SUG, NIC, NPC, PIC, PPC, and the group size.
pub fn type_evaluation_table() -> ConcernTypeTable {
    use ArgumentType::*;
    let row = |v: [u64; 6]| {
        [
            (Direct, v[0]),
            (Suggestion, v[1]),
            (NegativeImpersonal, v[2]),
            (NegativePersonal, v[3]),
            (PositiveImpersonal, v[4]),
            (PositivePersonal, v[5]),
        ]
    };
    ConcernTypeTable::from_counts(&[
        (ConcernLabel::Health, row([7, 26, 22, 65, 15, 55]), 28),
        (ConcernLabel::Environment, row([2, 25, 59, 31, 59, 22]), 31),
        (ConcernLabel::Both, row([3, 17, 39, 40, 39, 42]), 18),
    ])
}

/// Drives a session with a fixed stance script (true = agree) and a reply
/// used for every free-text prompt.
pub fn scripted_session(
    engine: &DialogueEngine,
    variant: Variant,
    policy: Policy,
    concern: Concern,
    stances: &[bool],
    reply: &str,
) -> Session {
    assert_eq!(stances.len(), COUNTERS_TOTAL);
    let cfg = DialogueConfig::new(variant, policy);
    let mut s = engine.new_session(format!("{variant}-{policy}-{}", concern.as_str()), cfg).unwrap();
    engine.apply(&mut s, "probably_wouldnt").unwrap();
    engine.apply(&mut s, concern.as_str()).unwrap();
    engine.apply(&mut s, "taste").unwrap();
    let mut i = 0;
    while let Some(p) = engine.current_prompt(&s) {
        use argchat_core::dialogue::DialogueState::*;
        let input = match p.state {
            AwaitStance(_) => {
                let v = if stances[i] { "agree" } else { "disagree" };
                i += 1;
                v.to_owned()
            }
            AwaitWhy(_) | AwaitWhyEatMeat(_) | AwaitExpand(_) => reply.to_owned(),
            AwaitFinalIntention => "might".to_owned(),
            other => panic!("unexpected state {other}"),
        };
        engine.apply(&mut s, &input).unwrap();
    }
    s
}

/// A deterministic mix of agree/disagree patterns.
pub fn stance_patterns() -> Vec<Vec<bool>> {
    vec![
        vec![true; 12],
        vec![false; 12],
        (0..12).map(|i| i % 2 == 0).collect(),
        (0..12).map(|i| i % 3 == 1).collect(),
        (0..12).map(|i| i < 5).collect(),
    ]
}
