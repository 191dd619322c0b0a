use fjr_core::friction::FrictionModel;
use fjr_core::observer::ObserverKind;
use fjr_core::sim::{
    diagnose, presets, run_scenario, BristleUpdate, ObserverConfig, ScenarioConfig, Signal,
    SimTrace, Simulator,
};
use nalgebra::{DMatrix, DVector};

fn short(name: &str, duration: f64) -> ScenarioConfig {
    let mut cfg = presets::preset(name).unwrap();
    cfg.duration = duration;
    cfg
}

fn friction_free(observer: ObserverConfig) -> ScenarioConfig {
    let mut cfg = short("fig4a", 1.0);
    cfg.plant = cfg.plant.without_friction();
    cfg.observer = observer;
    cfg.ideal_reference = false;
    cfg
}

fn at(trace: &SimTrace, s: Signal, t: f64) -> f64 {
    trace.joint(0).get(s)[trace.index_at(t)]
}

#[test]
fn linear_plant_matches_matrix_exponential() {
    let cfg = friction_free(ObserverConfig::none());
    let tr = run_scenario(&cfg).unwrap();
    // x = [q, q', theta, theta', theta_d] with theta_d held constant
    let (b, m, k, kp, kd, td) = (1.0, 1.0, 3000.0, 50.0, 5.0, presets::STEP_TARGET);
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(5, 5, &[
        0.0,    1.0, 0.0,             0.0,     0.0,
        -k / m, 0.0, k / m,           0.0,     0.0,
        0.0,    0.0, 0.0,             1.0,     0.0,
        k / b,  0.0, -(k + kp) / b,   -kd / b, kp / b,
        0.0,    0.0, 0.0,             0.0,     0.0,
    ]);
    let x0 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, td]);
    for t in [0.1, 0.5, 1.0] {
        let x = (a.clone() * t).exp() * &x0;
        assert!((at(&tr, Signal::Q, t) - x[0]).abs() <= 1e-6, "q at {t}");
        assert!(
            (at(&tr, Signal::Theta, t) - x[2]).abs() <= 1e-6,
            "theta at {t}"
        );
        assert!(
            (at(&tr, Signal::ThetaDot, t) - x[3]).abs() <= 1e-5,
            "theta' at {t}"
        );
    }
}

#[test]
fn nominal_motor_tracks_real_one_without_friction() {
    for kind in [ObserverKind::Pid, ObserverKind::Pd] {
        let mut obs = presets::fig4("fig4d").unwrap().observer;
        obs.kind = kind;
        if kind == ObserverKind::Pd {
            obs.gains.l_i = 0.0;
        }
        let tr = run_scenario(&friction_free(obs)).unwrap();
        let jt = tr.joint(0);
        for (n, m) in jt.get(Signal::ThetaN).iter().zip(jt.get(Signal::Theta)) {
            assert!((n - m).abs() <= 1e-8);
        }
        assert!(
            jt.get(Signal::TauFHat).iter().all(|f| f.abs() <= 1e-6),
            "{kind:?}"
        );
    }
}

#[test]
fn friction_free_regulation_reaches_target() {
    let mut cfg = friction_free(ObserverConfig::none());
    cfg.duration = 10.0;
    let tr = run_scenario(&cfg).unwrap();
    let end = *tr.joint(0).get(Signal::Theta).last().unwrap();
    assert!((end - presets::STEP_TARGET).abs() <= 1e-6, "{end}");
}

#[test]
fn pid_estimate_matches_friction_at_rest() {
    let mut cfg = presets::fig4("fig4d").unwrap();
    cfg.duration = 200.0;
    cfg.stride = 1000;
    cfg.ideal_reference = false;
    let tr = run_scenario(&cfg).unwrap();
    let d = diagnose(&cfg, &tr).unwrap();
    let jt = tr.joint(0);
    let start = tr.window_start(cfg.analysis.steady_window).unwrap();
    let window = &jt.get(Signal::TauFTrue)[start..];
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let fh = *jt.get(Signal::TauFHat).last().unwrap();
    assert!((fh - mean).abs() <= 1e-3, "{fh} vs {mean}");
    // estimate decomposes exactly into its error, rate and integral parts
    let g = cfg.observer.gains;
    for k in (0..tr.len()).step_by(97) {
        let (e, ie) = (jt.get(Signal::ENr)[k], jt.get(Signal::IEnr)[k]);
        let ed = jt.get(Signal::ThetaNDot)[k] - jt.get(Signal::ThetaDot)[k];
        let want = -g.l * (ed + g.l_p * e + g.l_i * ie);
        let got = jt.get(Signal::TauFHat)[k];
        assert!(
            (got - want).abs() <= 1e-12 * (1.0 + want.abs()),
            "{k}: {got} vs {want}"
        );
    }
    let eq = d.equilibrium.unwrap()[0];
    assert!(eq.i_enr_relative_error.unwrap() <= 0.05);
}

#[test]
fn rest_point_predictions_hold_for_pd() {
    for name in ["fig4b", "fig4e"] {
        let cfg = presets::fig4(name).unwrap();
        let d = diagnose(&cfg, &run_scenario(&cfg).unwrap()).unwrap();
        let eq = d.equilibrium.unwrap()[0];
        assert!(eq.offset_relative_error <= 1e-3, "{name}: {eq:?}");
        assert!(!d.oscillation.flag);
    }
}

#[test]
fn identical_configs_are_bit_identical() {
    let cfg = short("fig4c", 2.0);
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    let bits = |tr: &SimTrace| {
        (0..tr.len())
            .flat_map(|k| tr.row(k))
            .map(f64::to_bits)
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn semi_implicit_bristle_update_agrees_with_coupled() {
    let cfg = presets::fig4("fig4e").unwrap();
    let mut semi = cfg.clone();
    semi.bristle_update = BristleUpdate::SemiImplicit;
    let a = diagnose(&cfg, &run_scenario(&cfg).unwrap()).unwrap();
    let b = diagnose(&semi, &run_scenario(&semi).unwrap()).unwrap();
    let (x, y) = (a.steady_state_error[0], b.steady_state_error[0]);
    assert!((x - y).abs() <= 0.05 * x.abs(), "{x} vs {y}");
    assert_eq!(a.oscillation.flag, b.oscillation.flag);
}

#[test]
fn planar_arm_settles_with_pid_observer() {
    let cfg = presets::preset("planar2r").unwrap();
    let tr = run_scenario(&cfg).unwrap();
    let d = diagnose(&cfg, &tr).unwrap();
    assert_eq!(tr.dof(), 2);
    assert!(!d.oscillation.flag, "{:?}", d.oscillation);
    assert!(d.bookkeeping_residual <= 1e-9);
    for (j, target) in [0.1, -0.1].iter().enumerate() {
        let q = *tr.joint(j).get(Signal::Q).last().unwrap();
        assert!((q - target).abs() <= 1e-3, "joint {j}: {q}");
    }
}

#[test]
fn lugre_states_respect_bounds_along_runs() {
    for name in ["fig4a", "fig4c"] {
        let cfg = short(name, 4.0);
        let tr = run_scenario(&cfg).unwrap();
        let p = match cfg.plant.friction[0] {
            FrictionModel::LuGre(p) => p,
            FrictionModel::FrictionFree => unreachable!(),
        };
        let zmax = tr
            .joint(0)
            .get(Signal::Z)
            .iter()
            .fold(0.0_f64, |a, z| a.max(z.abs()));
        assert!(zmax <= p.max_deflection() * (1.0 + 1e-9), "{name}: {zmax}");
        let d = diagnose(&cfg, &tr).unwrap();
        assert!(d.bristle_bound_ratio.unwrap() <= 1.01, "{name}");
    }
}

#[test]
fn torque_pulse_moves_the_link() {
    let mut cfg = friction_free(ObserverConfig::none());
    cfg.controller.reference = fjr_core::control::Reference::Hold { target: vec![0.0] };
    cfg.external = vec![fjr_core::sim::TorquePulse {
        joint: 0,
        start: 0.1,
        end: 0.2,
        torque: 1.0,
    }];
    let tr = Simulator::new(cfg).unwrap().run().unwrap();
    assert_eq!(at(&tr, Signal::Q, 0.09), 0.0);
    assert!(at(&tr, Signal::Q, 0.25) > 1e-4);
    assert_eq!(at(&tr, Signal::TauExt, 0.15), 1.0);
}

#[test]
fn short_runs_are_diagnosed_over_the_whole_trace() {
    for name in ["fig4a", "fig4b", "fig4c"] {
        let cfg = short(name, 0.5);
        let d = diagnose(&cfg, &run_scenario(&cfg).unwrap()).unwrap();
        assert!((d.oscillation.window - 0.5).abs() <= 1e-9);
        assert!(d.tracking_error.is_some());
    }
}
