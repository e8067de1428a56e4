//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{basis_oracle, cost_matrix, data_dir, random_doc, scan_oracle_2x2, vocab, weights};
use companion_core::sim::config_with_overrides;
use companion_core::templates::{TemplateConfig, TemplateKind};
use companion_core::{
    available_engines, load_templates, read_transcript, realize, relaxed_wmd, schedule_next, simulate, synthetic_store,
    wmd, write_transcript, Cause, EngineId, EntryKind, FeedEvent, Mode, PreparedScenario, ResourcePaths, Resources,
    Scenario, ScriptStep, Session, Speaker, SystemEvent, TranscriptEntry, Trigger, TurnStats,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn resources() -> Arc<Resources> {
    Arc::new(Resources::load(&ResourcePaths::in_dir(data_dir()), &TemplateConfig::default()).unwrap())
}

fn scenario(feed: Vec<FeedEvent>, duration_s: f64, seed: u64, config: serde_json::Value) -> (Scenario, Vec<FeedEvent>) {
    let scenario = Scenario {
        feed: PathBuf::from("inline"),
        resources: PathBuf::from(".."),
        duration_s,
        seed,
        config: config.as_object().cloned().unwrap_or_default(),
        user_script: Vec::new(),
    };
    (scenario, feed)
}

fn ended_causes(transcript: &[TranscriptEntry]) -> Vec<(u32, Cause)> {
    transcript
        .iter()
        .filter_map(|e| match e.event {
            Some(SystemEvent::ConversationEnded { turns, cause }) => Some((turns, cause)),
            _ => None,
        })
        .collect()
}

fn wmd_metric() -> Check {
    let words = vocab(100);
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    let store = synthetic_store(11, &refs, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = random_doc(&mut rng, &store, 10);
        let b = random_doc(&mut rng, &store, 10);
        let c = random_doc(&mut rng, &store, 10);
        let (ab, _) = wmd(&a, &b, &store);
        let (ba, _) = wmd(&b, &a, &store);
        let (bc, _) = wmd(&b, &c, &store);
        let (ac, _) = wmd(&a, &c, &store);
        let (aa, _) = wmd(&a, &a, &store);
        if ab < 0.0 {
            return Err(format!("negative distance {ab}"));
        }
        worst = worst.max(aa.abs()).max((ab - ba).abs()).max(ac - ab - bc);
    }
    let elapsed = start.elapsed();
    ensure(
        worst <= 1e-9 && elapsed < Duration::from_secs(10),
        format!("100 triples, worst axiom violation {worst:.2e}, {elapsed:.2?}"),
    )
}

fn wmd_oracle() -> Check {
    let words = vocab(30);
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    let store = synthetic_store(3, &refs, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let a = random_doc(&mut rng, &store, 3);
        let b = random_doc(&mut rng, &store, 3);
        let (d, _) = wmd(&a, &b, &store);
        let oracle = basis_oracle(&weights(&a), &weights(&b), &cost_matrix(&a, &b, &store));
        worst = worst.max((d - oracle).abs());
    }
    let mut worst_scan = 0.0f64;
    for _ in 0..20 {
        let (a, b) = loop {
            let a = random_doc(&mut rng, &store, 2);
            let b = random_doc(&mut rng, &store, 2);
            if a.len() == 2 && b.len() == 2 {
                break (a, b);
            }
        };
        let c = cost_matrix(&a, &b, &store);
        let (wa, wb) = (weights(&a), weights(&b));
        let scan = scan_oracle_2x2([wa[0], wa[1]], [wb[0], wb[1]], [[c[0][0], c[0][1]], [c[1][0], c[1][1]]], 1e-6);
        // Scanning on a grid can only overshoot the optimum, by at most step × slope.
        let (d, _) = wmd(&a, &b, &store);
        worst_scan = worst_scan.max((d - scan).abs());
    }
    let mut relaxed_violations = 0;
    for _ in 0..1000 {
        let a = random_doc(&mut rng, &store, 6);
        let b = random_doc(&mut rng, &store, 6);
        if relaxed_wmd(&a, &b, &store) > wmd(&a, &b, &store).0 + 1e-9 {
            relaxed_violations += 1;
        }
    }
    ensure(
        worst <= 1e-6 && worst_scan <= 1e-5 && relaxed_violations == 0,
        format!(
            "basis oracle max err {worst:.2e} (200 pairs), 2x2 scan max err {worst_scan:.2e}, \
             relaxed > exact in {relaxed_violations}/1000"
        ),
    )
}

fn scheduler() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut now = 0.0;
    let mut total = 0.0;
    for _ in 0..10_000 {
        let next = schedule_next(now, 80.0, &mut rng).unwrap();
        total += next - now;
        now = next;
    }
    let mean = total / 10_000.0;

    // Disclosure share over 10k keyword utterances of a silent session.
    let (s, feed) = scenario(
        vec![FeedEvent::caption(0.0, "the internet")],
        1_200_000.0,
        1,
        serde_json::json!({"cooldown_utterances": 0}),
    );
    let result = simulate(&s, &feed, resources()).map_err(|e| e.to_string())?;
    let opening: Vec<&TranscriptEntry> = result
        .transcript
        .iter()
        .filter(|e| e.speaker == Speaker::Robot && e.seq.is_some() && !e.repeat)
        .take(10_000)
        .collect();
    let disclosures = opening.iter().filter(|e| e.kind == EntryKind::Disclosure).count();
    let share = disclosures as f64 / opening.len() as f64;
    ensure(
        (mean - 80.0).abs() <= 0.03 * 80.0 && opening.len() == 10_000 && (share - 0.75).abs() <= 0.02,
        format!("mean interval {mean:.2} s, disclosure share {share:.4} over {} utterances", opening.len()),
    )
}

fn engine_unlock() -> Check {
    let schedule_ok = available_engines(1).unwrap() == [EngineId::TvProgram]
        && available_engines(2).unwrap() == [EngineId::TvProgram, EngineId::DailyLife]
        && available_engines(3).unwrap() == EngineId::RETRIEVAL
        && available_engines(0).is_err();
    let prepared = PreparedScenario::load(&data_dir().join("scenarios/internet_special.json")).unwrap();
    let result = simulate(&prepared.scenario, &prepared.feed, prepared.resources.clone()).map_err(|e| e.to_string())?;
    let replies: Vec<EngineId> = result
        .transcript
        .iter()
        .filter(|e| e.speaker == Speaker::Robot && e.kind == EntryKind::Response && e.conversation_id == Some(1))
        .filter_map(|e| e.engine)
        .collect();
    let expected = [EngineId::TvProgram, EngineId::DailyLife, EngineId::NewsSns, EngineId::NewsSns];
    let legal = replies
        .iter()
        .enumerate()
        .all(|(i, e)| *e == EngineId::Generative || available_engines(i as u32 + 1).unwrap().contains(e));
    let names: Vec<&str> = replies.iter().map(|e| e.as_str()).collect();
    ensure(
        schedule_ok && legal && replies.starts_with(&expected),
        format!("reply engines by turn: {}", names.join(", ")),
    )
}

fn end_conditions() -> Check {
    let res = resources();
    let feed = vec![FeedEvent::caption(0.0, "the internet")];
    let config = serde_json::json!({"disclosure_ratio": 0.0});

    let (mut s, _) = scenario(feed.clone(), 600.0, 2, config.clone());
    s.user_script = vec![
        ScriptStep { trigger: Trigger::AfterRobotQuestion, at: None, say: Some("Yes, I have.".into()), delay_s: 2.0 },
        ScriptStep { trigger: Trigger::AfterRobotReply, at: None, say: Some("OK, bye!".into()), delay_s: 2.0 },
    ];
    let by_intent = ended_causes(&simulate(&s, &feed, res.clone()).map_err(|e| e.to_string())?.transcript);

    let (s, _) = scenario(feed.clone(), 600.0, 2, config.clone());
    let silent = simulate(&s, &feed, res.clone()).map_err(|e| e.to_string())?;
    let by_silence = ended_causes(&silent.transcript);
    let question_t = silent.transcript.iter().find(|e| e.kind == EntryKind::Question).map(|e| e.t);
    let ended_t =
        silent.transcript.iter().find(|e| matches!(e.event, Some(SystemEvent::ConversationEnded { .. }))).map(|e| e.t);

    let mut session = Session::new(res, config_with_overrides(config.as_object().unwrap()).unwrap()).unwrap();
    session.ingest_feed(&feed[0]);
    let mut t = 0.0;
    while session.state().mode != Mode::Conversing && t < 10_000.0 {
        t += 1.0;
        session.tick(t);
    }
    let cancelled = session.cancel();
    let again = session.cancel();
    let by_cancel = ended_causes(&cancelled);

    let ok = by_intent.first() == Some(&(4, Cause::EndIntent))
        && by_silence.iter().all(|&(turns, cause)| turns == 3 && cause == Cause::NoAnswer)
        && !by_silence.is_empty()
        && matches!((question_t, ended_t), (Some(q), Some(e)) if (e - q - 45.0).abs() < 1e-9)
        && cancelled.first().and_then(|e| e.event.clone()) == Some(SystemEvent::Cancelled)
        && by_cancel.first().map(|c| c.1) == Some(Cause::Cancel)
        && again.is_empty()
        && session.state().mode == Mode::TvWatching;
    ensure(ok, format!("end_intent {by_intent:?}; no_answer {:?}; cancel {by_cancel:?}", by_silence.first()))
}

fn keyword_cooldown() -> Check {
    let feed = vec![
        FeedEvent::caption(0.0, "An elephant at the zoo."),
        FeedEvent::caption(1.0, "Fresh ramen."),
        FeedEvent::caption(2.0, "Autumn in Kyoto."),
    ];
    let (s, _) = scenario(feed.clone(), 200_000.0, 4, serde_json::json!({}));
    let result = simulate(&s, &feed, resources()).map_err(|e| e.to_string())?;
    let used: Vec<(&str, u64)> = result
        .transcript
        .iter()
        .filter(|e| e.speaker == Speaker::Robot && !e.repeat)
        .filter_map(|e| Some((e.keyword.as_deref()?, e.seq?)))
        .take(100)
        .collect();
    let mut min_gap = u64::MAX;
    for kw in ["elephant", "ramen", "kyoto"] {
        let seqs: Vec<u64> = used.iter().filter(|u| u.0 == kw).map(|u| u.1).collect();
        min_gap = seqs.windows(2).map(|w| w[1] - w[0]).fold(min_gap, u64::min);
    }
    ensure(
        used.len() == 100 && min_gap >= 10,
        format!("{} utterances, smallest same-keyword slot gap {min_gap}", used.len()),
    )
}

/// First keyword utterance after a single "elephant" detection.
fn first_utterance_from_detection(res: &Arc<Resources>, disclosure_ratio: f64) -> Option<String> {
    let overrides = serde_json::json!({"disclosure_ratio": disclosure_ratio});
    let mut session = Session::new(res.clone(), config_with_overrides(overrides.as_object()?).ok()?).ok()?;
    session.ingest_feed(&FeedEvent::detection(0.0, "elephant", 0.9));
    let mut t = 0.0;
    while t < 10_000.0 {
        t += 1.0;
        if let Some(e) = session.tick(t).into_iter().find(|e| e.speaker == Speaker::Robot) {
            return Some(e.text);
        }
    }
    None
}

fn template_pipeline() -> Check {
    let res = resources();
    let disclosure =
        res.templates.select("elephant", TemplateKind::Disclosure, &res.store).map_err(|e| e.to_string())?;
    let question = res.templates.select("elephant", TemplateKind::Question, &res.store).map_err(|e| e.to_string())?;
    let said = realize(question, "elephant", 0.0).text;
    let spoken_disclosure = first_utterance_from_detection(&res, 1.0);
    let spoken_question = first_utterance_from_detection(&res, 0.0);
    let long = "disclosure\tlike\tI am really curious: ***\nquestion\tlike\tDo you like ***\n";
    let loaded = load_templates(long.as_bytes(), &res.store, &TemplateConfig::default()).map_err(|e| e.to_string())?;
    ensure(
        disclosure.pattern == "I like ***"
            && said == "Do you like elephant?"
            && spoken_disclosure.as_deref() == Some("I like elephant")
            && spoken_question.as_deref() == Some("Do you like elephant?")
            && loaded.rejected == 1,
        format!(
            "detection 'elephant' -> {spoken_disclosure:?} / {spoken_question:?} (template {:?}), \
             over-length rejected {}",
            disclosure.pattern, loaded.rejected
        ),
    )
}

fn determinism() -> Check {
    let mut details = Vec::new();
    let mut ok = true;
    for name in ["internet_special.json", "travel_variety.json"] {
        let prepared = PreparedScenario::load(&data_dir().join("scenarios").join(name)).unwrap();
        let render = |scenario: &Scenario| {
            let result = simulate(scenario, &prepared.feed, prepared.resources.clone()).unwrap();
            let mut out = Vec::new();
            write_transcript(&result.transcript, &mut out).unwrap();
            out
        };
        let first = render(&prepared.scenario);
        let second = render(&prepared.scenario);
        ok &= first == second;
        details.push(format!("{name}: {} bytes, identical {}", first.len(), first == second));
    }
    ensure(ok, details.join("; "))
}

fn stats() -> Check {
    let mut text = String::new();
    for (id, n) in [(1, 3), (2, 5)] {
        for k in 0..n {
            let speaker = if k % 2 == 0 { "robot" } else { "user" };
            text += &format!(
                "{{\"t\":{k},\"speaker\":\"{speaker}\",\"text\":\"x\",\"kind\":\"user\",\"conversation_id\":{id}}}\n"
            );
        }
    }
    let (entries, errors) = read_transcript(text.as_bytes()).map_err(|e| e.to_string())?;
    let fixed = TurnStats::from_entries(&entries);

    let prepared = PreparedScenario::load(&data_dir().join("scenarios/travel_variety.json")).unwrap();
    let demo = simulate(&prepared.scenario, &prepared.feed, prepared.resources.clone()).unwrap();
    let demo_stats = TurnStats::from_entries(&demo.transcript);
    let demo_mean = demo_stats.mean.unwrap_or(0.0);
    let smoke = if (3.0..=9.0).contains(&demo_mean) { "within" } else { "outside" };
    ensure(
        errors.is_empty() && fixed.mean == Some(4.0) && fixed.max == Some(5),
        format!(
            "fixture mean {:?} max {:?}; demo mean {demo_mean:.2} over {} conversations ({smoke} 3-9, smoke only)",
            fixed.mean, fixed.max, demo_stats.conversation_count
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Check);
    let checks: [Criterion; 9] = [
        ("wmd-metric", wmd_metric),
        ("wmd-oracle", wmd_oracle),
        ("scheduler", scheduler),
        ("engine-unlock", engine_unlock),
        ("end-conditions", end_conditions),
        ("keyword-cooldown", keyword_cooldown),
        ("template-pipeline", template_pipeline),
        ("determinism", determinism),
        ("turn-stats", stats),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
