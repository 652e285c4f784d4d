//! Built-in experiment configurations.

use cpdsym::{Method, ProblemId};

use crate::config::{ExperimentConfig, ExperimentKind, FixedPointSettings, MetricConfig};
use crate::error::{HarnessError, Result};

pub const PRESET_NAMES: [&str; 7] = [
    "p1-converge",
    "p1-energy",
    "p1-symplectic",
    "p1-sweep",
    "p2-converge",
    "p3-converge",
    "p3-sweep",
];

fn dyadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 0.5f64.powi(k)).collect()
}

const SG_COMPARISON: [Method; 7] = [
    Method::Sg1o1,
    Method::Sg1o2,
    Method::Sg1o4,
    Method::ImplicitEuler,
    Method::Boris,
    Method::Rko2,
    Method::Rko4,
];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    use Method::*;
    let sc_and_reference = [Sc1o2, Sc2o2, Sc1o4, Sc2o4, Boris, Rko2, Rko4];
    let mut cfg = match name {
        "p1-converge" => ExperimentConfig::new(ProblemId::P1, &sc_and_reference, dyadic(3, 7), vec![1.0], 1.0),
        "p1-energy" => {
            let mut c = ExperimentConfig::new(ProblemId::P1, &sc_and_reference, vec![0.01], vec![1.0], 1000.0);
            c.experiment = ExperimentKind::Energy;
            c.thinning = 100;
            c
        }
        "p1-symplectic" => {
            let mut c = ExperimentConfig::new(
                ProblemId::P1,
                &[Sc1o2, Sc2o2, Sc1o4, Sc2o4, Rko2, Rko4, ImplicitEuler],
                vec![0.1, 0.01],
                vec![1.0, 0.01],
                1.0,
            );
            c.experiment = ExperimentKind::Symplectic;
            c.fixed_point = Some(FixedPointSettings::tight());
            c
        }
        "p1-sweep" => {
            let mut c = ExperimentConfig::new(ProblemId::P1, &[Sc2o2], vec![1e-3], vec![1e-1, 1e-2, 1e-3], 1.0);
            c.experiment = ExperimentKind::SweepEps;
            c.metric = MetricConfig::Position;
            c
        }
        "p2-converge" | "p3-converge" => {
            let id = if name == "p2-converge" { ProblemId::P2 } else { ProblemId::P3 };
            let mut c = ExperimentConfig::new(id, &SG_COMPARISON, dyadic(2, 6), vec![0.5], 1.0);
            c.metric = MetricConfig::Weighted { x_pow: 1, v_pow: 2 };
            c
        }
        "p3-sweep" => {
            let mut c = ExperimentConfig::new(ProblemId::P3, &[Sg1o2], vec![1e-3], vec![1e-1, 1e-2, 1e-3], 1.0);
            c.experiment = ExperimentKind::SweepEps;
            c.metric = MetricConfig::Position;
            c
        }
        _ => return Err(HarnessError::UnknownPreset(name.to_string())),
    };
    cfg.name = Some(name.to_string());
    cfg.validate()?;
    Ok(cfg)
}
