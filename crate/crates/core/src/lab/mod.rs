//! Experiment harness: parameter sweeps, limit extrapolation and rate fits,
//! with one named experiment per limit statement.

mod minimizers;
mod perimeters;
mod presets;
mod spectral;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::kernels::Part;
use crate::minimize::MinimizeConfig;
use crate::set::GeometricSet;
use crate::well::DoubleWell;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExperimentName {
    PointwiseSLimit,
    GammaEpsLimit,
    ExtVanishing,
    EnergyGrowth,
    DensityEstimate,
    LevelsetConv,
    BbmLimit,
    #[serde(rename = "ABS1D_LIMIT")]
    Abs1dLimit,
    MultiplierAsymptotics,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 9] = [
        ExperimentName::PointwiseSLimit,
        ExperimentName::GammaEpsLimit,
        ExperimentName::ExtVanishing,
        ExperimentName::EnergyGrowth,
        ExperimentName::DensityEstimate,
        ExperimentName::LevelsetConv,
        ExperimentName::BbmLimit,
        ExperimentName::Abs1dLimit,
        ExperimentName::MultiplierAsymptotics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentName::PointwiseSLimit => "POINTWISE_S_LIMIT",
            ExperimentName::GammaEpsLimit => "GAMMA_EPS_LIMIT",
            ExperimentName::ExtVanishing => "EXT_VANISHING",
            ExperimentName::EnergyGrowth => "ENERGY_GROWTH",
            ExperimentName::DensityEstimate => "DENSITY_ESTIMATE",
            ExperimentName::LevelsetConv => "LEVELSET_CONV",
            ExperimentName::BbmLimit => "BBM_LIMIT",
            ExperimentName::Abs1dLimit => "ABS1D_LIMIT",
            ExperimentName::MultiplierAsymptotics => "MULTIPLIER_ASYMPTOTICS",
        }
    }

    /// Small parameter of the sweep, in which limits are extrapolated.
    pub fn small_parameter(self, p: f64) -> f64 {
        match self {
            ExperimentName::PointwiseSLimit | ExperimentName::ExtVanishing | ExperimentName::BbmLimit => 0.5 - p,
            _ => p,
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentName::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Unsupported(format!("experiment `{s}`")))
    }
}

/// Experiment-specific settings; each experiment reads the ones it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    /// Fixed fractional parameter of ε- and R-sweeps.
    pub s: f64,
    pub part: Part,
    /// Tolerance on individual rows where the experiment has row references.
    pub row_tolerance: f64,
    /// Retraction distances in cells (EXT_VANISHING).
    pub retractions: Vec<f64>,
    /// `(1/2−s)` at which retracted sets are compared (EXT_VANISHING).
    pub retraction_gap: f64,
    /// Threshold for the level set `{|u| < θ}` (LEVELSET_CONV).
    pub level: f64,
    /// `θ₁, θ₂` of the density estimate.
    pub theta: (f64, f64),
    /// Cell width of ENERGY_GROWTH profiles.
    pub profile_h: f64,
    /// Half-width of the line used for the self-consistent profile constant (s ≥ 1/2).
    pub profile_extent: f64,
    /// Schedule constant `k` of ABS1D_LIMIT.
    pub k: f64,
    /// Frequency range of MULTIPLIER_ASYMPTOTICS.
    pub xi_range: (f64, f64),
    pub minimize: MinimizeConfig,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            s: 0.25,
            part: Part::Interior,
            row_tolerance: 0.01,
            retractions: vec![4.0, 2.0, 1.0],
            retraction_gap: 0.02,
            level: 0.5,
            theta: (0.5, 0.0),
            profile_h: 0.125,
            profile_extent: 32.0,
            k: 1.0,
            xi_range: (0.01, 50.0),
            minimize: MinimizeConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: ExperimentName,
    /// `None` asks for the self-consistent reference where one is defined.
    #[serde(default)]
    pub target: Option<f64>,
    #[serde(default)]
    pub provenance: String,
    /// Sweep values: `s` for s-sweeps, `ε` for ε-sweeps, `R` for growth.
    pub parameters: Vec<f64>,
    pub tolerance: f64,
    pub set: GeometricSet,
    pub omega: Domain,
    #[serde(default)]
    pub well: DoubleWell,
    #[serde(default)]
    pub options: Options,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::OutOfRange {
                name: "tolerance",
                value: self.tolerance,
                expected: "> 0",
            });
        }
        let p = &self.parameters;
        let up = p.windows(2).all(|w| w[1] > w[0]);
        let down = p.windows(2).all(|w| w[1] < w[0]);
        if p.is_empty() || !(up || down) || p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Unsupported(format!("{}: parameter grid must be strictly monotone", self.name)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    /// Which sub-sweep the row belongs to.
    pub series: String,
    pub parameter: f64,
    pub measured: Vec<f64>,
    pub reference: f64,
    pub relative_error: f64,
    /// Set when the row could not be computed.
    pub flag: Option<String>,
}

impl Row {
    pub fn new(series: &str, parameter: f64, measured: Vec<f64>, reference: f64) -> Row {
        let m = measured.first().copied().unwrap_or(f64::NAN);
        Row {
            series: series.to_string(),
            parameter,
            measured,
            reference,
            relative_error: relative_error(m, reference),
            flag: None,
        }
    }

    pub fn failed(series: &str, parameter: f64, width: usize, err: &Error) -> Row {
        Row {
            series: series.to_string(),
            parameter,
            measured: vec![f64::NAN; width],
            reference: f64::NAN,
            relative_error: f64::NAN,
            flag: Some(err.to_string()),
        }
    }
}

/// `|m − r| / |r|`, or `|m|` when the reference is zero.
pub fn relative_error(m: f64, r: f64) -> f64 {
    if r == 0.0 {
        m.abs()
    } else {
        (m - r).abs() / r.abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    /// `log y = slope · log x + intercept`
    Loglog,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual in the fitted coordinates.
    pub residual: f64,
}

/// Least-squares line through `rows`.
pub fn fit_rate(rows: &[(f64, f64)], model: FitModel) -> Result<Fit> {
    if rows.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} rows, need at least 3", rows.len())));
    }
    let pts: Vec<(f64, f64)> = match model {
        FitModel::Linear => rows.to_vec(),
        FitModel::Loglog => {
            if rows.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
                return Err(Error::DegenerateFit("log-log fit needs positive data".into()));
            }
            rows.iter().map(|&(x, y)| (x.ln(), y.ln())).collect()
        }
    };
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 1e-24 * (1.0 + mx * mx)) || !sxx.is_finite() {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Ok(Fit {
        slope,
        intercept,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Extrapolation {
    /// Affine through the two points with the smallest `t`.
    pub affine: f64,
    /// Quadratic through the three smallest `t`, when available.
    pub richardson: Option<f64>,
}

impl Extrapolation {
    pub fn disagreement(&self) -> f64 {
        self.richardson.map(|r| (r - self.affine).abs()).unwrap_or(0.0)
    }
}

/// Limit at `t → 0` of samples `(t, y)`.
pub fn extrapolate(rows: &[(f64, f64)]) -> Result<Extrapolation> {
    let mut pts: Vec<(f64, f64)> = rows.iter().copied().filter(|p| p.1.is_finite()).collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit("extrapolation needs two finite rows".into()));
    }
    pts.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    let (t0, y0) = pts[0];
    let (t1, y1) = pts[1];
    if t0 == t1 {
        return Err(Error::DegenerateFit("coinciding small parameters".into()));
    }
    let affine = y0 - t0 * (y1 - y0) / (t1 - t0);
    let richardson = pts.get(2).map(|&(t2, y2)| {
        // Lagrange basis at 0.
        y0 * t1 * t2 / ((t0 - t1) * (t0 - t2)) + y1 * t0 * t2 / ((t1 - t0) * (t1 - t2)) + y2 * t0 * t1 / ((t2 - t0) * (t2 - t1))
    });
    Ok(Extrapolation { affine, richardson })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Internal consistency rather than a target; failing it makes the
    /// verdict INCONCLUSIVE.
    pub consistency: bool,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Check {
        Check {
            name: name.to_string(),
            passed,
            detail,
            consistency: false,
        }
    }

    pub fn consistency(name: &str, passed: bool, detail: String) -> Check {
        Check {
            consistency: true,
            ..Check::new(name, passed, detail)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub experiment: ExperimentName,
    pub target: f64,
    /// Names of the `measured` entries of each row.
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub fit: Option<Fit>,
    pub extrapolation: Option<Extrapolation>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
}

impl SweepReport {
    fn assemble(
        exp: &Experiment,
        target: f64,
        columns: &[&str],
        rows: Vec<Row>,
        fit: Option<Fit>,
        extrapolation: Option<Extrapolation>,
        checks: Vec<Check>,
    ) -> SweepReport {
        let verdict = if rows.iter().any(|r| r.flag.is_some()) || checks.iter().any(|c| c.consistency && !c.passed) {
            Verdict::Inconclusive
        } else if checks.iter().all(|c| c.passed) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        SweepReport {
            experiment: exp.name,
            target,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
            fit,
            extrapolation,
            checks,
            verdict,
        }
    }

    /// One row per sweep point: `series,parameter,<columns>,reference,relative_error,flag`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "series,parameter,{},reference,relative_error,flag", self.columns.join(","))?;
        for r in &self.rows {
            let vals: Vec<String> = r.measured.iter().map(|v| v.to_string()).collect();
            let flag = r.flag.as_deref().unwrap_or("").replace([',', '\n'], ";");
            writeln!(w, "{},{},{},{},{},{}", r.series, r.parameter, vals.join(","), r.reference, r.relative_error, flag)?;
        }
        Ok(())
    }

    pub fn verdict_line(&self) -> String {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        let mut line = format!("{}: {}", self.experiment, self.verdict);
        if let Some(e) = self.extrapolation {
            line += &format!(" limit={:.6} target={:.6}", e.affine, self.target);
        }
        if let Some(f) = self.fit {
            line += &format!(" slope={:.4}", f.slope);
        }
        if !failed.is_empty() {
            line += &format!(" failed=[{}]", failed.join(","));
        }
        line
    }
}

/// Executes the sweep of `exp`. Failure at a sweep point flags the row and
/// makes the verdict INCONCLUSIVE; malformed experiments are errors.
pub fn run(exp: &Experiment) -> Result<SweepReport> {
    exp.validate()?;
    match exp.name {
        ExperimentName::PointwiseSLimit => perimeters::pointwise(exp),
        ExperimentName::ExtVanishing => perimeters::ext_vanishing(exp),
        ExperimentName::BbmLimit => perimeters::bbm(exp),
        ExperimentName::GammaEpsLimit => minimizers::gamma(exp),
        ExperimentName::LevelsetConv => minimizers::levelset(exp),
        ExperimentName::DensityEstimate => minimizers::density(exp),
        ExperimentName::EnergyGrowth => minimizers::growth(exp),
        ExperimentName::Abs1dLimit => minimizers::abs1d(exp),
        ExperimentName::MultiplierAsymptotics => spectral::multiplier(exp),
    }
}

pub use presets::preset;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use proptest::prelude::*;

    #[test]
    fn fit_exact_power_and_constant() {
        let rows: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 9.0].iter().map(|&x| (x, x * x)).collect();
        let f = fit_rate(&rows, FitModel::Loglog).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-10 && f.residual < 1e-12);
        let rows: Vec<(f64, f64)> = [1.0, 2.0, 5.0].iter().map(|&x| (x, 3.0)).collect();
        assert!(fit_rate(&rows, FitModel::Loglog).unwrap().slope.abs() < 1e-12);
        assert!(fit_rate(&rows, FitModel::Linear).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(matches!(fit_rate(&[(1.0, 1.0), (2.0, 2.0)], FitModel::Linear), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_rate(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)], FitModel::Linear), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_rate(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)], FitModel::Loglog), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn names_round_trip() {
        for e in ExperimentName::ALL {
            assert_eq!(e.name().parse::<ExperimentName>().unwrap(), e);
            let t = toml::to_string(&preset(e)).unwrap();
            let back: Experiment = toml::from_str(&t).unwrap();
            assert_eq!(back, preset(e));
        }
    }

    #[test]
    fn verdict_follows_checks_and_flags() {
        let exp = preset(ExperimentName::BbmLimit);
        let ok = SweepReport::assemble(&exp, 1.0, &["m"], vec![Row::new("a", 0.3, vec![1.0], 1.0)], None, None, vec![]);
        assert_eq!(ok.verdict, Verdict::Pass);
        let bad = Check::new("x", false, String::new());
        let fail = SweepReport::assemble(&exp, 1.0, &["m"], ok.rows.clone(), None, None, vec![bad]);
        assert_eq!(fail.verdict, Verdict::Fail);
        let flagged = vec![Row::failed("a", 0.3, 1, &Error::DegenerateFit("x".into()))];
        let inc = SweepReport::assemble(&exp, 1.0, &["m"], flagged, None, None, vec![]);
        assert_eq!(inc.verdict, Verdict::Inconclusive);
        let mut buf = Vec::new();
        inc.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("series,parameter,m,reference,relative_error,flag\n"));
    }

    #[test]
    fn non_monotone_grid_rejected() {
        let mut exp = preset(ExperimentName::BbmLimit);
        exp.parameters = vec![0.3, 0.4, 0.35];
        assert!(run(&exp).is_err());
        exp.parameters = vec![0.3, 0.4];
        exp.tolerance = 0.0;
        assert!(run(&exp).is_err());
    }

    #[test]
    fn bbm_preset_passes_and_is_deterministic() {
        let mut exp = preset(ExperimentName::BbmLimit);
        exp.omega = exp.omega.clone().with_margin(0.0).unwrap();
        let a = run(&exp).unwrap();
        assert_eq!(a.verdict, Verdict::Pass, "{}", a.verdict_line());
        let b = run(&exp).unwrap();
        assert_eq!(a, b);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.measured[0].to_bits(), rb.measured[0].to_bits());
        }
    }

    #[test]
    fn pointwise_exterior_of_interior_interface_vanishes() {
        let mut exp = preset(ExperimentName::PointwiseSLimit);
        exp.options.part = Part::Exterior;
        exp.target = None;
        exp.omega = Domain::interval(-1.0, 1.0, 64).unwrap().with_margin(0.5).unwrap();
        let r = run(&exp).unwrap();
        assert_eq!(r.target, 0.0);
        assert!(r.extrapolation.unwrap().affine.abs() < 0.05, "{}", r.verdict_line());
    }

    proptest! {
        #[test]
        fn extrapolation_exact_on_linear_models(a in -5.0f64..5.0, b in -5.0f64..5.0, t0 in 0.01f64..0.1) {
            let rows: Vec<(f64, f64)> = (0..5).map(|i| {
                let t = t0 * (1.0 + i as f64);
                (t, a + b * t)
            }).collect();
            let e = extrapolate(&rows).unwrap();
            prop_assert!((e.affine - a).abs() < 1e-10);
            prop_assert!((e.richardson.unwrap() - a).abs() < 1e-10);
        }

        #[test]
        fn loglog_slope_recovered(p in -3.0f64..3.0, c in 0.1f64..10.0) {
            let rows: Vec<(f64, f64)> = [1.0, 3.0, 7.0, 20.0].iter().map(|&x: &f64| (x, c * x.powf(p))).collect();
            let f = fit_rate(&rows, FitModel::Loglog).unwrap();
            prop_assert!((f.slope - p).abs() < 1e-10);
        }
    }
}
