use elliptic_bsde::solver::LrSchedule;
use elliptic_bsde::ExitRule;
use elliptic_bsde_cli::config::{default_filter, parse_raw, ConfigError, Point};
use elliptic_bsde_cli::{emit_config, parse_config, PointSpec, ProblemConfig, ProblemKind, RunConfig};

#[test]
fn minimal_poisson_config_gets_table_defaults() {
    let c = parse_config("problem = \"poisson\"\ndim = 2\n").unwrap();
    assert_eq!(c.problem, ProblemConfig::Poisson { dim: 2, r: 0.5, b: 0.75 });
    let t = &c.training;
    assert_eq!((t.steps, t.horizon, t.epochs, t.batch_size, t.validation_size), (500, 0.5, 200, 64, 256));
    assert_eq!((t.runs, t.tail), (5, 3));
    assert_eq!(t.gamma, 2.0);
    assert_eq!(t.optimizer.learning_rate, 5e-3);
    assert!(t.shared_subnet);
    assert_eq!(c.concurrency, 8);
    assert_eq!(c.points.points(2).unwrap().len(), 15);
}

#[test]
fn high_dimensional_poisson_shortens_horizon() {
    let c = parse_config("problem = \"poisson\"\ndim = 100\n").unwrap();
    assert!((c.training.horizon - 0.01).abs() < 1e-15);
}

#[test]
fn quadratic_and_dividend_defaults() {
    let q = parse_config("problem = \"quadratic\"\ndim = 2\n").unwrap();
    assert_eq!(q.problem, ProblemConfig::Quadratic { dim: 2, r: 1.0 });
    assert_eq!((q.training.steps, q.training.horizon, q.training.epochs), (100, 5.0, 500));
    let q100 = parse_config("problem = \"quadratic\"\ndim = 100\n").unwrap();
    assert!((q100.training.horizon - 0.1).abs() < 1e-15);

    let d = parse_config("problem = \"dividend\"\ndim = 2\n").unwrap();
    let ProblemConfig::Dividend(p) = &d.problem else { panic!("not a dividend config") };
    assert_eq!((p.r, p.k, p.delta, p.rho), (5.0, 1.8, 0.5, 1.0));
    assert_eq!((d.training.steps, d.training.horizon, d.training.epochs), (100, 5.0, 500));
    let points = d.points.points(2).unwrap();
    assert_eq!(points.first().unwrap().x, vec![0.5, 0.0]);
    assert_eq!(points.last().unwrap().x, vec![0.5, 5.0]);
}

#[test]
fn quadratic_diagonal_endpoint_reference() {
    for d in [2usize, 10, 100] {
        let c = parse_config(&format!("problem = \"quadratic\"\ndim = {d}\n")).unwrap();
        let problem = c.problem.build().unwrap();
        let points = c.points.points(d).unwrap();
        let last = points.last().unwrap();
        assert!((last.coordinate - 1.0 / (d as f64).sqrt()).abs() < 1e-15);
        let expected = ((1.0f64 + 1.0) / d as f64).ln();
        let reference = problem.reference(&last.x).unwrap();
        assert!((reference - expected).abs() < 1e-12, "d={d}: {reference} vs {expected}");
    }
}

#[test]
fn overrides_are_applied() {
    let text = r#"
problem = "poisson"
dim = 3
seed = 11
concurrency = 2
deterministic = true

[params]
r = 1.0
b = 0.5

[grid]
horizon = 0.25
steps = 40
gamma = 1.0
exit_rule = "discrete"

[training]
epochs = 7
batch_size = 8
learning_rate = 0.01
schedule = "constant"
runs = 2
tail = 1
hidden = [4, 4]
shared_subnet = true
fixed_paths = true

[points]
list = [[0.1, 0.2, 0.3], [0.0, 0.0, 0.0]]
"#;
    let c = parse_config(text).unwrap();
    assert_eq!(c.problem, ProblemConfig::Poisson { dim: 3, r: 1.0, b: 0.5 });
    assert_eq!((c.seed, c.concurrency, c.deterministic), (11, 2, true));
    let t = &c.training;
    assert_eq!((t.horizon, t.steps, t.gamma, t.exit_rule), (0.25, 40, 1.0, ExitRule::Discrete));
    assert_eq!((t.epochs, t.batch_size, t.runs, t.tail), (7, 8, 2, 1));
    assert_eq!(t.schedule, LrSchedule::Constant);
    assert_eq!(t.hidden, Some(vec![4, 4]));
    assert!(t.shared_subnet && t.fixed_paths);
    assert_eq!(c.points, PointSpec::List(vec![vec![0.1, 0.2, 0.3], vec![0.0; 3]]));
}

#[test]
fn radius_change_moves_derived_defaults() {
    let c = parse_config("problem = \"poisson\"\ndim = 4\n[params]\nr = 1.0\n").unwrap();
    assert!((c.training.horizon - 1.0).abs() < 1e-15);
    let PointSpec::Diagonal { to, .. } = c.points else { panic!() };
    assert!((to - 0.5).abs() < 1e-15);
}

#[test]
fn defaults_round_trip() {
    for kind in [ProblemKind::Poisson, ProblemKind::Quadratic, ProblemKind::Dividend] {
        for d in [2usize, 5, 100] {
            let c = RunConfig::defaults(kind, d).unwrap();
            let text = emit_config(&c);
            assert_eq!(parse_config(&text).unwrap(), c, "{kind:?} d={d}\n{text}");
        }
    }
}

#[test]
fn edited_configs_round_trip() {
    let mut c = RunConfig::defaults(ProblemKind::Dividend, 3).unwrap();
    if let ProblemConfig::Dividend(p) = &mut c.problem {
        p.a = vec![0.5, 0.5, 0.25];
        p.q[0][1] += 0.25;
        p.q[0][0] -= 0.25;
    }
    c.training.hidden = Some(vec![7]);
    c.training.schedule = LrSchedule::Constant;
    c.points = PointSpec::List(vec![vec![0.3, 0.3, 1.0]]);
    c.output = Some("somewhere".into());
    c.seed = i64::MAX as u64;
    assert_eq!(parse_config(&emit_config(&c)).unwrap(), c);
}

#[test]
fn point_of_wrong_length_is_rejected() {
    let err = parse_config("problem = \"poisson\"\ndim = 2\n[points]\nlist = [[0.1, 0.2, 0.3]]\n").unwrap_err();
    assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "points.list"), "{err}");
    let err = parse_config(
        "problem = \"dividend\"\ndim = 2\n[points.sweep]\ncount = 3\naxis = 2\nfrom = 0.0\nto = 1.0\nbase = [0.5]\n",
    )
    .unwrap_err();
    assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "points.sweep.base"), "{err}");
}

#[test]
fn unknown_key_reports_its_line() {
    let err = parse_config("problem = \"poisson\"\ndim = 2\n\n[training]\nepochz = 3\n").unwrap_err();
    match err {
        ConfigError::Parse { line, message, .. } => {
            assert_eq!(line, Some(5));
            assert!(message.contains("epochz"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn parameters_of_other_problems_are_rejected() {
    let err = parse_config("problem = \"quadratic\"\ndim = 2\n[params]\nb = 1.0\n").unwrap_err();
    assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "params.b"), "{err}");
    let err = parse_config("problem = \"poisson\"\ndim = 2\n[params]\nK = 1.0\n").unwrap_err();
    assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "params.K"), "{err}");
}

#[test]
fn semantic_errors_name_the_key() {
    let cases = [
        ("problem = \"heat\"\ndim = 2\n", "problem"),
        ("dim = 2\n", "problem"),
        ("problem = \"poisson\"\n", "dim"),
        ("problem = \"poisson\"\ndim = 0\n", "dim"),
        ("problem = \"poisson\"\ndim = 2\nconcurrency = 0\n", "concurrency"),
        ("problem = \"poisson\"\ndim = 2\n[points.diagonal]\ncount = 0\nfrom = 0.0\nto = 1.0\n", "points.diagonal.count"),
        ("problem = \"poisson\"\ndim = 2\n[training]\nschedule = \"constant\"\ndecay_factor = 0.5\n", "training.decay_factor"),
        ("problem = \"poisson\"\ndim = 2\n[training]\nbatch_size = 0\n", "training"),
        ("problem = \"poisson\"\ndim = 2\n[params]\nr = -1.0\n", "params"),
        ("problem = \"poisson\"\ndim = 2\nseed = 1\n[grid]\nsteps = 0\n", "training"),
    ];
    for (text, key) in cases {
        match parse_config(text) {
            Err(ConfigError::Invalid { key: k, .. }) => assert_eq!(k, key, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn type_errors_are_parse_errors() {
    let err = parse_config("problem = \"poisson\"\ndim = \"two\"\n").unwrap_err();
    assert!(matches!(err, ConfigError::Parse { line: Some(2), .. }), "{err:?}");
    assert!(parse_raw("problem = \n").is_err());
}

#[test]
fn cli_point_specs() {
    let default = PointSpec::Diagonal { count: 15, from: -1.0, to: 1.0 };
    assert_eq!(
        PointSpec::parse_cli("diagonal:4", &default).unwrap(),
        PointSpec::Diagonal { count: 4, from: -1.0, to: 1.0 }
    );
    assert_eq!(
        PointSpec::parse_cli("diagonal:3:-0.5:0.5", &default).unwrap(),
        PointSpec::Diagonal { count: 3, from: -0.5, to: 0.5 }
    );
    assert_eq!(
        PointSpec::parse_cli("0.1,0.2;-1,3", &default).unwrap(),
        PointSpec::List(vec![vec![0.1, 0.2], vec![-1.0, 3.0]])
    );
    let sweep_default = PointSpec::Sweep { count: 15, axis: 2, from: 0.0, to: 5.0, base: vec![0.5, 0.0] };
    assert_eq!(
        PointSpec::parse_cli("sweep:2:3:1:2", &sweep_default).unwrap(),
        PointSpec::Sweep { count: 3, axis: 2, from: 1.0, to: 2.0, base: vec![0.5, 0.0] }
    );
    assert!(PointSpec::parse_cli("diagonal:x", &default).is_err());
    assert!(PointSpec::parse_cli("sweep:1:2", &default).is_err());
}

#[test]
fn point_generation() {
    let diag = PointSpec::Diagonal { count: 3, from: -1.0, to: 1.0 }.points(2).unwrap();
    assert_eq!(
        diag,
        vec![
            Point { coordinate: -1.0, x: vec![-1.0, -1.0] },
            Point { coordinate: 0.0, x: vec![0.0, 0.0] },
            Point { coordinate: 1.0, x: vec![1.0, 1.0] },
        ]
    );
    let single = PointSpec::Diagonal { count: 1, from: 0.2, to: 0.9 }.points(1).unwrap();
    assert_eq!(single, vec![Point { coordinate: 0.2, x: vec![0.2] }]);
    let sweep = PointSpec::Sweep { count: 2, axis: 1, from: 0.0, to: 1.0, base: vec![9.0, 8.0] }.points(2).unwrap();
    assert_eq!(sweep[1].x, vec![1.0, 8.0]);
}

#[test]
fn dividend_initial_filter() {
    assert_eq!(default_filter(2), vec![0.5]);
    assert_eq!(default_filter(4), vec![0.25; 3]);
}
