//! Desk-scale default configuration of each experiment.

use super::{Experiment, ExperimentName, Options};
use crate::domain::Domain;
use crate::kernels::Part;
use crate::minimize::MinimizeConfig;
use crate::set::GeometricSet;
use crate::well::DoubleWell;

fn s_sweep() -> Vec<f64> {
    (0..10).map(|i| 0.30 + 0.02 * i as f64).collect()
}

fn positive_axis() -> GeometricSet {
    GeometricSet::half_space(&[-1.0], 0.0)
}

fn interval(lo: f64, hi: f64, cells: usize, margin: f64) -> Domain {
    Domain::interval(lo, hi, cells).and_then(|d| d.with_margin(margin)).expect("valid preset domain")
}

fn descent() -> MinimizeConfig {
    MinimizeConfig {
        max_iterations: 20000,
        tolerance: 1e-7,
        ..MinimizeConfig::default()
    }
}

pub fn preset(name: ExperimentName) -> Experiment {
    let base = Experiment {
        name,
        target: None,
        provenance: String::new(),
        parameters: s_sweep(),
        tolerance: 0.05,
        set: positive_axis(),
        omega: interval(-1.0, 1.0, 256, 0.5),
        well: DoubleWell::quartic(),
        options: Options::default(),
    };
    match name {
        ExperimentName::PointwiseSLimit => Experiment {
            target: Some(1.0),
            provenance: "ω₀·Per(E,Ω) = 1 for E = (0,∞), Ω = (−1,1)".into(),
            ..base
        },
        ExperimentName::ExtVanishing => Experiment {
            target: Some(1.0),
            provenance: "ω₀·ℋ⁰(∂E∩∂Ω) = 1 for E = (0,∞), Ω = (0,1)".into(),
            tolerance: 0.5,
            omega: interval(0.0, 1.0, 128, 0.5),
            options: Options {
                part: Part::Exterior,
                row_tolerance: 0.1,
                ..Options::default()
            },
            ..base
        },
        ExperimentName::BbmLimit => Experiment {
            target: Some(1.0),
            provenance: "|Du|(0,1) = 1 for u(x) = x; rows (1/2−s)|u|_{W^{2s,1}} = 1/(2−2s)".into(),
            tolerance: 0.02,
            set: GeometricSet::Full,
            omega: interval(0.0, 1.0, 1024, 0.0),
            ..base
        },
        ExperimentName::GammaEpsLimit => Experiment {
            target: Some(64.0 * std::f64::consts::SQRT_2 / 2.0),
            provenance: "8·Per_{1/4}(E,Ω) = 8·2^{1−2s}/(2s(1−2s)) = 32√2 for E = (0,∞), Ω = (−1,1)".into(),
            parameters: vec![0.2, 0.1, 0.05, 0.025],
            omega: interval(-1.0, 1.0, 128, 1.0),
            options: Options {
                minimize: descent(),
                ..Options::default()
            },
            ..base
        },
        ExperimentName::LevelsetConv => Experiment {
            target: Some(0.0),
            provenance: "limit interface ∂E∩Ω = {0}".into(),
            parameters: vec![0.2, 0.1, 0.05, 0.025],
            tolerance: 2.0,
            omega: interval(-1.0, 1.0, 128, 1.0),
            options: Options {
                minimize: descent(),
                ..Options::default()
            },
            ..base
        },
        ExperimentName::DensityEstimate => Experiment {
            target: Some(0.25),
            provenance: "derived floor for |{u>θ₂}∩B_R| / |B_R|; tolerance is the drift under grid doubling".into(),
            parameters: vec![0.2, 0.1, 0.05, 0.025],
            tolerance: 0.2,
            omega: interval(-1.0, 1.0, 128, 1.0),
            options: Options {
                minimize: descent(),
                ..Options::default()
            },
            ..base
        },
        ExperimentName::EnergyGrowth => Experiment {
            target: Some(0.5),
            provenance: "exponent n−2s of the energy in B_R for s = 1/4, n = 1".into(),
            parameters: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            tolerance: 0.1,
            omega: interval(-1.0, 1.0, 16, 1.0),
            ..base
        },
        ExperimentName::Abs1dLimit => Experiment {
            target: Some(8.0),
            provenance: "8k for one jump with λ_ε = e^{k/ε}, k = 1".into(),
            parameters: vec![0.1, 0.07, 0.05],
            tolerance: 1.0,
            omega: interval(-1.0, 1.0, 512, 0.0),
            options: Options {
                minimize: descent(),
                ..Options::default()
            },
            ..base
        },
        ExperimentName::MultiplierAsymptotics => Experiment {
            target: Some(1.0),
            provenance: "S_s(ξ)/|ξ|^{2s} → 1 as |ξ| → ∞; S_{1/2}(ξ) = |ξ| tanh|ξ|".into(),
            parameters: vec![0.25, 0.5, 0.75],
            tolerance: 0.01,
            set: GeometricSet::Full,
            omega: Domain::boxed(&[0.0, 0.0], &[1.0, 1.0], &[32, 32]).expect("valid preset domain"),
            ..base
        },
    }
}
