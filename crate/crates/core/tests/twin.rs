use std::collections::BTreeSet;
use std::io::BufReader;

use proptest::prelude::*;

use twinkit::data::{evaluate_expression, BinOp, DataEngine, DerivedSpec, Expr, Update};
use twinkit::fixtures::case_study;
use twinkit::player::{create_session, read_script, run_script, ScriptLine, Session, UserEvent};
use twinkit::process::{
    check_scenario, next_step, parse_process, print_process, Condition, Instruction, NextStep, ProcessModel, Procedure,
    StateTerm, Step,
};
use twinkit::scenario::{load_scenario, save_scenario};

// ---- expressions and data ----

fn expr_tree() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| Expr::Num(n as f64 / 8.0)),
        prop::sample::select(vec!["a", "b", "c"]).prop_map(|s| Expr::Var(s.to_string())),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                inner.clone(),
                inner
            )
                .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expression_display_round_trips(e in expr_tree()) {
        let text = e.to_string();
        let back = Expr::parse(&text).unwrap();
        prop_assert_eq!(back, e);
    }
}

#[test]
fn expression_precedence_oracles() {
    let none = |_: &str| None;
    let cases = [
        ("2 + 3 * 4", 14.0),
        ("(2 + 3) * 4", 20.0),
        ("-2^2", -4.0),
        ("2^3^2", 512.0),
        ("2^-1", 0.5),
        ("10 − 4 ÷ 2 × 3", 4.0),
        ("8 / 4 / 2", 1.0),
        ("1 - 2 - 3", -4.0),
    ];
    for (src, want) in cases {
        assert_eq!(evaluate_expression(src, &none).unwrap(), want, "{src}");
    }
    assert!(evaluate_expression("2 3", &none).is_err());
    assert!(evaluate_expression("1 / 0", &none).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn tick_is_idempotent(values in prop::collection::vec(-100.0f64..100.0, 1..20), t in 0.0f64..30.0) {
        let mut e = DataEngine::new();
        e.set_constant("k", 3.0).unwrap();
        for (i, v) in values.iter().enumerate() {
            e.schedule(i as f64, Update { time: i as f64, channel: "x".into(), value: *v });
        }
        e.bind_derived(&[DerivedSpec { name: "y".into(), expr: "x * k + 1".into(), unit: String::new() }]).unwrap();
        e.tick(t).unwrap();
        let first = e.snapshot();
        let again = e.tick(t).unwrap();
        prop_assert!(again.changed.is_empty());
        prop_assert_eq!(e.snapshot(), first.clone());
        if let (Some(x), Some(y)) = (first["x"], first["y"]) {
            prop_assert_eq!(y, x * 3.0 + 1.0);
        }
    }
}

// ---- process documents ----

fn condition() -> impl Strategy<Value = Condition> {
    let term = ("[a-z]{1,5}", "[a-z]{1,5}", prop_oneof!["[a-z_]{1,6}", "[a-z =#\"\\\\]{0,8}"]).prop_map(|(i, x, s)| StateTerm {
        interaction: format!("{i}.{x}"),
        state: s,
    });
    prop_oneof![
        prop::sample::select(vec![0.5, 1.0, 10.0, 2.25, 1e-3]).prop_map(|seconds| Condition::Wait { seconds }),
        prop::collection::vec(term, 1..4).prop_map(|terms| Condition::StateConjunction { terms }),
    ]
}

fn instruction() -> impl Strategy<Value = Step> {
    let path = prop::option::of("[a-z]{1,6}(/[a-z]{1,6})?");
    ("[ -~]{0,24}", path.clone(), path.clone(), path, condition()).prop_map(|(d, a, t, t2, c)| {
        Step::Instruction(Instruction {
            id: String::new(),
            description: d,
            action_object: a,
            target_object: t,
            target_object2: t2,
            monitored: c.monitored(),
            completion: c,
            next: None,
        })
    })
}

fn step_tree() -> impl Strategy<Value = Step> {
    instruction().prop_recursive(3, 24, 4, |inner| {
        ("[ -~]{0,24}", any::<bool>(), prop::collection::vec(inner, 1..4)).prop_map(|(d, ordered, children)| {
            Step::Procedure(Procedure {
                id: String::new(),
                description: d,
                ordered,
                children,
                next: None,
            })
        })
    })
}

fn process_model() -> impl Strategy<Value = ProcessModel> {
    prop::collection::vec(step_tree(), 0..4).prop_map(|mut steps| {
        fn number(steps: &mut [Step], prefix: &str) {
            for (k, s) in steps.iter_mut().enumerate() {
                let id = if prefix.is_empty() { format!("{}", k + 1) } else { format!("{prefix}.{}", k + 1) };
                match s {
                    Step::Procedure(p) => {
                        p.id = id.clone();
                        number(&mut p.children, &id);
                    }
                    Step::Instruction(i) => i.id = id,
                }
            }
        }
        number(&mut steps, "");
        let mut m = ProcessModel { steps, entry: None };
        m.link();
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_parse_round_trip(m in process_model()) {
        let text = print_process(&m);
        let back = parse_process(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(print_process(&back), text);
    }

    #[test]
    fn ordered_visits_each_child_once(n in 1usize..8, order in prop::collection::vec(0usize..8, 0..40)) {
        let mut doc = String::from("PROCEDURE p \"p\" ORDERED\n");
        for k in 0..n {
            doc += &format!("  INSTRUCTION s{k} \"s\"\n    COMPLETE AFTER 1 SECONDS\n");
        }
        let m = parse_process(&doc).unwrap();
        let mut completed = BTreeSet::new();
        let mut cur = m.eligible(&completed).into_iter().next();
        let mut visited = Vec::new();
        // Notifications arrive in arbitrary order; only the current step's counts.
        let mut notifications: Vec<String> = order.iter().map(|k| format!("s{}", k % n)).collect();
        notifications.extend((0..n).map(|k| format!("s{k}")));
        for note in notifications {
            let Some(c) = cur.clone() else { break };
            if note != c {
                continue;
            }
            visited.push(c.clone());
            cur = match next_step(&m, &c, &completed).unwrap() {
                NextStep::Step(s) => Some(s),
                NextStep::Done => None,
            };
            completed.insert(c);
        }
        let want: Vec<String> = (0..n).map(|k| format!("s{k}")).collect();
        prop_assert_eq!(visited, want);
        prop_assert!(cur.is_none());
    }
}

// ---- case study ----

fn script() -> Vec<ScriptLine> {
    read_script(BufReader::new(std::fs::File::open(case_study::script_path()).unwrap())).unwrap()
}

fn session() -> Session {
    let (s, p) = case_study::load().unwrap();
    create_session(s, p).unwrap()
}

#[test]
fn case_study_is_clean() {
    let (s, p) = case_study::load().unwrap();
    assert!(s.validate().is_empty(), "{:?}", s.validate());
    assert!(check_scenario(&p, &s).is_empty(), "{:?}", check_scenario(&p, &s));
    let sess = create_session(s, p).unwrap();
    assert_eq!(sess.current().as_deref(), Some("1.1"));
    let r = sess.progress_report();
    assert!(r.completed.is_empty());
    assert_eq!(r.pending.first().map(String::as_str), Some("1.1"));
}

#[test]
fn case_study_playthrough() {
    let mut s = session();
    run_script(&mut s, &script()).unwrap();
    let r = s.progress_report();
    assert!(r.done);
    assert_eq!(r.completed.len(), 10);
    assert!(r.completed.iter().all(|c| !c.pre_satisfied));
    assert_eq!(r.readings.len(), 8);
    for (k, row) in r.readings.iter().enumerate() {
        let v = 5.0 * (k + 1) as f64;
        assert_eq!(row.values["voltage"], v);
        assert_eq!(row.values["current"], v / 2.0);
    }
}

#[test]
fn replay_is_deterministic() {
    let mut a = session();
    let mut b = session();
    run_script(&mut a, &script()).unwrap();
    run_script(&mut b, &script()).unwrap();
    let ja = serde_json::to_string(&a.progress_report()).unwrap();
    let jb = serde_json::to_string(&b.progress_report()).unwrap();
    assert_eq!(ja, jb);
}

#[test]
fn progress_is_monotone() {
    let mut s = session();
    let mut before = BTreeSet::new();
    for line in script() {
        run_script(&mut s, std::slice::from_ref(&line)).unwrap();
        let now = s.completed().clone();
        assert!(now.is_superset(&before));
        before = now;
    }
}

#[test]
fn mid_run_pending_is_headed_by_current() {
    let mut s = session();
    let lines = script();
    run_script(&mut s, &lines[..5]).unwrap();
    let r = s.progress_report();
    assert_eq!(r.current.as_deref(), Some("1.3"));
    assert_eq!(r.pending[0], "1.3");
    assert_eq!(r.completed.len(), 2);
}

fn later_events() -> Vec<UserEvent> {
    script()
        .into_iter()
        .filter_map(|l| l.event)
        .filter(|e| match e {
            UserEvent::Connect { connector, .. } => !connector.starts_with("connect1"),
            UserEvent::RecordReading { .. } => false,
            _ => true,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn events_for_other_steps_do_not_advance(events in Just(later_events()).prop_shuffle()) {
        let mut s = session();
        for e in events {
            s.apply_event(e).unwrap();
            prop_assert_eq!(s.current(), Some("1.1".to_string()));
        }
    }
}

#[test]
fn early_actions_complete_on_arrival() {
    let mut s = session();
    for e in later_events() {
        s.apply_event(e).unwrap();
    }
    for e in script().into_iter().filter_map(|l| l.event).take(2) {
        s.apply_event(e).unwrap();
    }
    let r = s.progress_report();
    // Everything up to the wait was pre-satisfied.
    assert_eq!(r.current.as_deref(), Some("2.2"));
    assert!(r.completed.iter().skip(1).all(|c| c.pre_satisfied));
}

#[test]
fn incompatible_and_invalid_events() {
    let mut s = session();
    let err = s
        .apply_event(UserEvent::Connect {
            connector: "connect1.a".into(),
            peer: "motor.coupling".into(),
        })
        .unwrap_err();
    assert!(err.to_string().contains("share no snap tags"));
    assert!(s
        .apply_event(UserEvent::SetState {
            interaction: "source.power".into(),
            state: "medium".into()
        })
        .is_err());
    assert!(s.apply_event(UserEvent::Press { button: "source.power".into() }).is_err());
    assert_eq!(s.log().len(), 0);
}

#[test]
fn motor_turns_with_current() {
    let angle = |s: &Session| match s.state("motor.spin") {
        Some(twinkit::scenario::InteractionState::Angle { degrees }) => *degrees,
        other => panic!("{other:?}"),
    };
    let mut s = session();
    s.tick(10.0).unwrap();
    // No voltage yet, so no current and no speed.
    assert_eq!(angle(&s), 0.0);
    s.advance_to(30.0).unwrap();
    let before = angle(&s);
    // At t = 32 the supply reads 15 V: 7.5 A at 18 deg/s per amp, sampled after the data tick.
    s.tick(2.0).unwrap();
    assert_eq!((angle(&s) - before).rem_euclid(360.0), 270.0);
}

#[test]
fn scenario_file_round_trip() {
    let loaded = load_scenario(&case_study::scenario_path()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.json");
    save_scenario(&loaded.scenario, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let again = twinkit::scenario::Scenario::from_json(&text).unwrap();
    assert_eq!(again, loaded.scenario);
}

#[test]
fn checker_catches_every_seeded_defect() {
    let (s, p) = case_study::load().unwrap();
    for seed in [1, 2, 3] {
        for m in case_study::mutation_corpus(&s, &p, 10, seed) {
            let (ms, mp) = m.apply(&s, &p);
            let d = check_scenario(&mp, &ms);
            assert!(!d.is_empty(), "{m:?} undetected");
            assert!(
                d.iter().all(|x| x.path.contains(m.key()) || x.message.contains(m.key())),
                "{m:?}: {d:?}"
            );
        }
    }
}
