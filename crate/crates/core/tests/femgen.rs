use nalgebra::DVector;
use proptest::prelude::*;
use qsurrogate::femgen::{
    assemble_stiffness, build_frame, conditioning_diagnostic, load_vector, sample_dataset,
    FrameConfig, LoadConfig, LoadScenario, SensorSpec, StaticSolver,
};
use qsurrogate::seed::{self, Stream};
use rand::Rng;

fn desk() -> (qsurrogate::femgen::FrameModel, StaticSolver) {
    let model = build_frame(&FrameConfig::default()).unwrap();
    let solver = StaticSolver::new(&model).unwrap();
    (model, solver)
}

fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

#[test]
fn betti_reciprocity() {
    let (model, solver) = desk();
    let free = model.free_dofs();
    let mut rng = seed::rng(8, Stream::Data);
    for _ in 0..20 {
        let i = free[rng.random_range(0..free.len())];
        let j = free[rng.random_range(0..free.len())];
        let mut fi = DVector::zeros(model.n_dofs());
        fi[i] = 1.0;
        let mut fj = DVector::zeros(model.n_dofs());
        fj[j] = 1.0;
        let (ui, uj) = (solver.solve(&fi).unwrap(), solver.solve(&fj).unwrap());
        let scale = ui[i].abs().max(uj[j].abs());
        assert!((ui[j] - uj[i]).abs() <= 1e-10 * scale, "dofs {i},{j}");
    }
}

#[test]
fn zero_loads_give_zero_displacements() {
    let (model, solver) = desk();
    let f = load_vector(&model, &LoadScenario::zero(), &LoadConfig::default());
    assert!(solver.solve(&f).unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn desk_conditioning_rank_is_seven() {
    let model = build_frame(&FrameConfig::default()).unwrap();
    let rep = conditioning_diagnostic(&model, &SensorSpec::default_for_bays(10)).unwrap();
    let outputs = model.translational_dofs().len();
    assert_eq!(rep.rank, 7);
    assert_eq!(rep.null_space_dim, outputs - 7);
}

#[test]
fn full_size_dataset_has_requested_rows() {
    let model = build_frame(&FrameConfig::default()).unwrap();
    let spec = SensorSpec::default_for_bays(10);
    let ds = sample_dataset(&model, &spec, &LoadConfig::default(), 10_000, 1).unwrap();
    assert_eq!(ds.len(), 10_000);
    assert!(ds.pairs.iter().all(|p| p.sensors.len() == 7));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn superposition(seed in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let (model, solver) = desk();
        let mut rng = seed::rng(seed, Stream::Data);
        let n = model.n_dofs();
        let f1 = DVector::from_fn(n, |_, _| rng.random_range(-1e3..1e3));
        let f2 = DVector::from_fn(n, |_, _| rng.random_range(-1e3..1e3));
        let lhs = solver.solve(&(&f1 * alpha + &f2 * beta)).unwrap();
        let rhs = solver.solve(&f1).unwrap() * alpha + solver.solve(&f2).unwrap() * beta;
        prop_assert!(rel_err(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn doubling_loads_doubles_response(load in 1.2f64..6.5, speed in 0.0f64..19.0, angle in 0.0f64..std::f64::consts::TAU) {
        let (model, solver) = desk();
        let cfg = LoadConfig::default();
        let s = LoadScenario { material_load: load, wind_speed: speed, wind_direction: [angle.cos(), angle.sin()] };
        let f = load_vector(&model, &s, &cfg);
        let u = solver.solve(&f).unwrap();
        let u2 = solver.solve(&(&f * 2.0)).unwrap();
        prop_assert!(rel_err(&u2, &(&u * 2.0)) < 1e-12);
    }

    #[test]
    fn constrained_stiffness_is_positive(seed in 0u64..1000) {
        let model = build_frame(&FrameConfig { bays: 3, ..FrameConfig::default() }).unwrap();
        let k = assemble_stiffness(&model);
        let free = model.free_dofs();
        let kff = k.select_rows(&free).select_columns(&free);
        let mut rng = seed::rng(seed, Stream::Data);
        let x = DVector::from_fn(free.len(), |_, _| rng.random_range(-1.0..1.0));
        prop_assert!(x.dot(&(&kff * &x)) > 0.0);
    }
}
