mod common;

use common::{pool_config, shaped_answers, source_of};
use std::io::Write;
use teegen_core::metrics::{round1, Generator, Role, Verdict};
use teegen_quiz::session::sample_order;
use teegen_quiz::{export_results, ItemKey, QuizCounts, QuizError, QuizService, SessionState};

fn answer_all(svc: &QuizService, id: &str, answers: &[Verdict]) {
    for (i, a) in answers.iter().enumerate() {
        svc.respond(id, &ItemKey::Index(i), *a).unwrap();
    }
}

#[test]
fn expert_shaped_session() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pool_config(dir.path());
    let svc = QuizService::open(cfg.clone(), None).unwrap();
    let v = svc.create_session("e1", Role::Expert).unwrap();
    assert_eq!(v.total, 120);
    let order = sample_order(&cfg, "e1");
    let count = |g: Generator| order.iter().filter(|id| source_of(&cfg, id) == g).count();
    assert_eq!((count(Generator::None), count(Generator::Cut), count(Generator::Cyclegan)), (60, 30, 30));

    answer_all(&svc, &v.session_id, &shaped_answers(&cfg, &order, [55, 5, 1, 59]));
    assert_eq!(svc.view(&v.session_id).unwrap().state, SessionState::Complete);
    let r = svc.results(&v.session_id).unwrap();
    assert_eq!(r.responses.len(), 120);
    assert_eq!((r.summary.r_as_r, r.summary.r_as_s, r.summary.s_as_r, r.summary.s_as_s), (55, 5, 1, 59));
    assert_eq!((round1(r.summary.accuracy), round1(r.summary.f1)), (95.0, 94.8));
}

#[test]
fn all_correct_participant_scores_100() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pool_config(dir.path());
    let svc = QuizService::open(cfg.clone(), None).unwrap();
    let v = svc.create_session("perfect", Role::Researcher).unwrap();
    let order = sample_order(&cfg, "perfect");
    let answers: Vec<Verdict> = order.iter().map(|id| source_of(&cfg, id).truth()).collect();
    answer_all(&svc, &v.session_id, &answers);
    let report = svc.analytics().unwrap();
    let s = report.by_participant["perfect"];
    assert_eq!((s.accuracy, s.f1), (100.0, 100.0));
    let cut = report
        .generator_accuracy
        .iter()
        .find(|g| g.generator == Generator::Cut && g.role.is_none())
        .unwrap();
    assert_eq!(cut.accuracy, 100.0);
    assert_eq!(cut.responses, 30);
}

#[test]
fn same_participant_same_order_distinct_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let svc = QuizService::open(pool_config(dir.path()), None).unwrap();
    let a = svc.create_session("x", Role::Expert).unwrap();
    let b = svc.create_session("x", Role::Expert).unwrap();
    assert_ne!(a.session_id, b.session_id);
    // Tokens are opaque and per session.
    assert_ne!(a.items[0].token, b.items[0].token);
    let pa = svc.image(&a.session_id, &ItemKey::Index(7)).unwrap();
    let pb = svc.image(&b.session_id, &ItemKey::Index(7)).unwrap();
    assert_eq!(pa, pb);
}

#[test]
fn insufficient_pool_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = pool_config(dir.path());
    cfg.counts = QuizCounts { real: 66, cut: 30, cyclegan: 30 };
    // 70 real minus 5 familiarization leaves 65, but the default draw shrinks
    // to keep scoring possible; an explicit list does not.
    cfg.familiarization = Some((0..5).map(|i| format!("img_a{i:03}")).collect());
    assert!(matches!(QuizService::open(cfg, None), Err(QuizError::InsufficientPool { .. })));
}

#[test]
fn sessions_survive_restart() {
    let pool_dir = tempfile::tempdir().unwrap();
    let data = tempfile::tempdir().unwrap();
    let cfg = pool_config(pool_dir.path());
    let order = sample_order(&cfg, "r1");
    let answers = shaped_answers(&cfg, &order, [39, 21, 15, 45]);

    let id = {
        let svc = QuizService::open(cfg.clone(), Some(data.path().to_path_buf())).unwrap();
        let v = svc.create_session("r1", Role::Researcher).unwrap();
        svc.start(&v.session_id).unwrap();
        answer_all(&svc, &v.session_id, &answers[..50]);
        svc.respond(&v.session_id, &ItemKey::Index(0), Verdict::Real).unwrap();
        v.session_id
    };
    let before = {
        let svc = QuizService::open(cfg.clone(), Some(data.path().to_path_buf())).unwrap();
        svc.view(&id).unwrap()
    };
    assert_eq!(before.answered, 50);
    assert_eq!(before.state, SessionState::Active);
    assert_eq!(before.items[0].answer, Some(Verdict::Real));

    // A torn final write is dropped on replay.
    let log = data.path().join("sessions").join(format!("{id}.jsonl"));
    std::fs::OpenOptions::new().append(true).open(&log).unwrap().write_all(b"{\"event\":\"answ").unwrap();
    let svc = QuizService::open(cfg.clone(), Some(data.path().to_path_buf())).unwrap();
    assert_eq!(svc.view(&id).unwrap(), before);

    // Restore the original first answer and finish.
    let _ = std::fs::read_to_string(&log).map(|t| std::fs::write(&log, &t[..t.rfind('\n').unwrap() + 1]));
    let svc = QuizService::open(cfg.clone(), Some(data.path().to_path_buf())).unwrap();
    svc.respond(&id, &ItemKey::Index(0), answers[0]).unwrap();
    for (i, a) in answers.iter().enumerate().skip(50) {
        svc.respond(&id, &ItemKey::Index(i), *a).unwrap();
    }
    let live = svc.results(&id).unwrap();
    let replayed = QuizService::open(cfg, Some(data.path().to_path_buf())).unwrap().results(&id).unwrap();
    assert_eq!(live, replayed);
    assert_eq!(round1(live.summary.f1), 68.4);
}

#[test]
fn corrupt_log_is_an_error() {
    let pool_dir = tempfile::tempdir().unwrap();
    let data = tempfile::tempdir().unwrap();
    let cfg = pool_config(pool_dir.path());
    let svc = QuizService::open(cfg.clone(), Some(data.path().to_path_buf())).unwrap();
    let v = svc.create_session("q", Role::Expert).unwrap();
    let log = data.path().join("sessions").join(format!("{}.jsonl", v.session_id));
    std::fs::OpenOptions::new().append(true).open(&log).unwrap().write_all(b"garbage\n{\"event\":\"started\",\"at\":\"t\"}\n").unwrap();
    assert!(matches!(QuizService::open(cfg, Some(data.path().to_path_buf())), Err(QuizError::Log(_))));
}

#[test]
fn export_is_idempotent_and_requires_completion() {
    let pool_dir = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let cfg = pool_config(pool_dir.path());
    let svc = QuizService::open(cfg.clone(), None).unwrap();
    let (n, responses) = svc.completed_responses();
    assert!(matches!(export_results(out.path(), &responses, n), Err(QuizError::NoneCompleted)));

    let v = svc.create_session("e2", Role::Expert).unwrap();
    let order = sample_order(&cfg, "e2");
    answer_all(&svc, &v.session_id, &shaped_answers(&cfg, &order, [60, 0, 25, 35]));
    let (n, responses) = svc.completed_responses();
    let a = export_results(out.path(), &responses, n).unwrap();
    let first = std::fs::read(out.path().join("analytics.json")).unwrap();
    let b = export_results(out.path(), &responses, n).unwrap();
    assert_eq!(a, b);
    assert_eq!(first, std::fs::read(out.path().join("analytics.json")).unwrap());
    let s = a.by_participant["e2"];
    assert_eq!((round1(s.accuracy), round1(s.f1)), (79.2, 82.8));
    let csv = std::fs::read_to_string(out.path().join("responses.csv")).unwrap();
    assert_eq!(csv.lines().count(), 121);
}
