use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use ratingrl::agent::segment_from_window;
use ratingrl::env::{GridNavTask, Transition};
use ratingrl::teacher::mock::{MockReply, MockVlmServer};
use ratingrl::teacher::{default_class_names, RatingTeacher, Segment, VlmConfig, VlmTeacher};
use ratingrl::Error;

fn segment(task: &GridNavTask, start: usize, len: usize) -> Segment {
    let mut s = start;
    let window: Vec<Transition> = (0..len)
        .map(|i| {
            let out = task.step(s, 3).unwrap();
            let t = Transition {
                state: s,
                action: 3,
                next_state: out.next_state,
                env_reward: out.env_reward,
                learned_reward: 0.0,
                done: out.done,
                terminal: out.done,
                episode_id: 0,
                step_index: i,
            };
            s = out.next_state;
            t
        })
        .collect();
    segment_from_window(&window, task)
}

fn config(url: String, budget: usize) -> VlmConfig {
    let mut c = VlmConfig::new(url, budget);
    c.backoff_base = Duration::from_millis(1);
    c.request_timeout = Duration::from_secs(10);
    c
}

fn reply_rating(
    rating: &'static str,
) -> impl Fn(&ratingrl::teacher::mock::MockRequest) -> MockReply {
    move |req| {
        if req.is_rating_stage() {
            MockReply::text(rating)
        } else {
            MockReply::text("The agent moves one cell to the right.")
        }
    }
}

#[test]
fn fixture_response_is_parsed() {
    let server = MockVlmServer::start(reply_rating("Analysis done. [Good]")).unwrap();
    let task = GridNavTask::builtin("open8").unwrap();
    let teacher = VlmTeacher::new(config(server.url(), 5), default_class_names(3)).unwrap();
    let r = teacher.vlm_rate(&segment(&task, 0, 1)).unwrap();
    assert_eq!(
        r.labels.iter().map(|l| l.index()).collect::<Vec<_>>(),
        vec![2]
    );
    assert!(!r.cached);
    assert_eq!(server.request_count(), 2);
    assert_eq!(teacher.budget_spent(), 1);

    let bodies = server.request_bodies();
    assert_eq!(bodies[0]["temperature"], 0.0);
    assert_eq!(bodies[0]["messages"][0]["role"], "user");
    let parts = bodies[0]["messages"][0]["content"].as_array().unwrap();
    // Observation before and after the step, then the analysis prompt.
    assert_eq!(parts.len(), 3);
    assert!(parts[0]["text"].as_str().unwrap().contains('A'));
    let rating_prompt = bodies[1]["messages"][0]["content"][0]["text"]
        .as_str()
        .unwrap();
    assert!(rating_prompt.starts_with("The agent moves one cell to the right."));
}

#[test]
fn multi_step_segment_gets_one_label_per_transition() {
    let server = MockVlmServer::start(reply_rating("[Bad, Average, Good]")).unwrap();
    let task = GridNavTask::builtin("open8").unwrap();
    let teacher = VlmTeacher::new(config(server.url(), 5), default_class_names(3)).unwrap();
    let r = teacher.vlm_rate(&segment(&task, 0, 3)).unwrap();
    assert_eq!(
        r.labels.iter().map(|l| l.index()).collect::<Vec<_>>(),
        vec![0, 1, 2]
    );
}

#[test]
fn cache_hit_costs_nothing() {
    let server = MockVlmServer::start(reply_rating("[Average]")).unwrap();
    let task = GridNavTask::builtin("open8").unwrap();
    let teacher = VlmTeacher::new(config(server.url(), 5), default_class_names(3)).unwrap();
    let seg = segment(&task, 9, 1);
    let first = teacher.vlm_rate(&seg).unwrap();
    let second = teacher.vlm_rate(&seg).unwrap();
    assert_eq!(first.labels, second.labels);
    assert!(second.cached);
    assert_eq!(teacher.budget_spent(), 1);
    assert_eq!(server.request_count(), 2);
}

#[test]
fn persistent_cache_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let server = MockVlmServer::start(reply_rating("[Bad]")).unwrap();
    let task = GridNavTask::builtin("open8").unwrap();
    let seg = segment(&task, 3, 1);
    let mut cfg = config(server.url(), 5);
    cfg.cache_path = Some(dir.path().join("vlm_cache.jsonl"));
    {
        let teacher = VlmTeacher::new(cfg.clone(), default_class_names(3)).unwrap();
        teacher.vlm_rate(&seg).unwrap();
    }
    let teacher = VlmTeacher::new(cfg, default_class_names(3)).unwrap();
    let r = teacher.vlm_rate(&seg).unwrap();
    assert!(r.cached);
    assert_eq!(teacher.budget_spent(), 0);
    assert_eq!(server.request_count(), 2);
}

#[test]
fn garbage_exhausts_retries() {
    let server = MockVlmServer::start(reply_rating("I cannot decide.")).unwrap();
    let task = GridNavTask::builtin("open8").unwrap();
    let cfg = config(server.url(), 5);
    let m = cfg.max_retries;
    let teacher = VlmTeacher::new(cfg, default_class_names(3)).unwrap();
    match teacher.vlm_rate(&segment(&task, 0, 1)) {
        Err(Error::TeacherUnavailable {
            attempts,
            last_response,
        }) => {
            assert_eq!(attempts, m);
            assert_eq!(last_response.as_deref(), Some("I cannot decide."));
        }
        other => panic!("expected teacher unavailable, got {other:?}"),
    }
    assert_eq!(server.request_count(), 2 * m);
    // One charge per segment regardless of retries.
    assert_eq!(teacher.budget_spent(), 1);
    assert_eq!(teacher.failures(), 1);
    assert!(teacher.cache().is_empty());
}

#[test]
fn transport_error_then_success() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = Arc::clone(&calls);
    let server = MockVlmServer::start(move |req| {
        if c.fetch_add(1, Ordering::SeqCst) == 0 {
            return MockReply::status(503, "overloaded");
        }
        if req.is_rating_stage() {
            MockReply::text("[Good]")
        } else {
            MockReply::text("analysis")
        }
    })
    .unwrap();
    let task = GridNavTask::builtin("open8").unwrap();
    let teacher = VlmTeacher::new(config(server.url(), 5), default_class_names(3)).unwrap();
    let r = teacher.vlm_rate(&segment(&task, 0, 1)).unwrap();
    assert_eq!(r.attempts, 2);
    assert_eq!(teacher.budget_spent(), 1);
}

#[test]
fn openai_style_reply_is_accepted() {
    let server = MockVlmServer::start(|_| MockReply {
        status: 200,
        body: r#"{"choices":[{"message":{"content":"[Bad]"}}]}"#.into(),
    })
    .unwrap();
    let task = GridNavTask::builtin("open8").unwrap();
    let teacher = VlmTeacher::new(config(server.url(), 1), default_class_names(3)).unwrap();
    assert_eq!(
        teacher.vlm_rate(&segment(&task, 0, 1)).unwrap().labels[0].index(),
        0
    );
}

#[test]
fn concurrent_queries_never_exceed_budget() {
    let server = MockVlmServer::start(reply_rating("[Good]")).unwrap();
    let task = GridNavTask::builtin("open8").unwrap();
    let mut cfg = config(server.url(), 4);
    cfg.max_in_flight = 8;
    let mut teacher = VlmTeacher::new(cfg, default_class_names(3)).unwrap();
    let segments: Vec<Segment> = (0..10).map(|s| segment(&task, s * 6, 1)).collect();
    let outcomes = teacher.rate(&segments);
    let ok = outcomes.iter().filter(|o| o.labels.is_ok()).count();
    let exhausted = outcomes
        .iter()
        .filter(|o| matches!(o.labels, Err(Error::BudgetExhausted)))
        .count();
    assert_eq!(ok, 4);
    assert_eq!(exhausted, 6);
    assert_eq!(outcomes.iter().filter(|o| o.charged).count(), 4);
    assert_eq!(teacher.budget_spent(), 4);
    assert_eq!(teacher.budget_remaining(), 0);
    assert_eq!(server.request_count(), 8);
}

#[test]
fn single_class_is_rejected() {
    let cfg = VlmConfig::new("http://127.0.0.1:9", 1);
    assert!(matches!(
        VlmTeacher::new(cfg, default_class_names(1)),
        Err(Error::Config(_))
    ));
}
