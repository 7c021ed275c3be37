//! Predicted exponents for every bound the experiments test, as pure
//! arithmetic in the design parameters, with hypothesis checking attached as
//! warnings rather than hard failures.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PredictError {
    #[error("missing input `{0}` for this bound")]
    MissingInput(&'static str),
}

/// Which bound family a prediction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    /// Translated intersections averaged with a smooth weight.
    Translation,
    /// Rotation-averaged intersections with an exceptional-set estimate.
    Rotation,
    /// Translations against a set with a Fourier decay exponent.
    FourierTranslation,
    /// Dilated intersections under a hyperplane slab exponent.
    Dilation,
    /// Level-set systems of `m` equations with a smoothing gain `s`.
    LevelSetSystem,
    /// Single-equation level sets under the rotational curvature condition.
    LevelSet,
    /// Supremum over dilations of level-set counts.
    MaximalLevelSet,
    /// Two independent single-equation constraints.
    TwoSurface,
    /// Lower bound on a set from the size of its slices.
    InverseSlice,
    /// Average lattice proximity counts.
    LatticeCount,
}

impl BoundKind {
    pub fn label(&self) -> &'static str {
        match self {
            BoundKind::Translation => "translation",
            BoundKind::Rotation => "rotation",
            BoundKind::FourierTranslation => "fourier-translation",
            BoundKind::Dilation => "dilation",
            BoundKind::LevelSetSystem => "levelset-system",
            BoundKind::LevelSet => "levelset",
            BoundKind::MaximalLevelSet => "maximal",
            BoundKind::TwoSurface => "two-surface",
            BoundKind::InverseSlice => "inverse",
            BoundKind::LatticeCount => "lattice-count",
        }
    }
}

/// Design parameters feeding the formulas; unused fields stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundInputs {
    pub d: usize,
    pub s_a: Option<f64>,
    pub s_b: Option<f64>,
    /// Energy exponent of the sampling measure.
    pub alpha: Option<f64>,
    /// Energy exponent of the second sampling measure (two-surface case).
    pub alpha2: Option<f64>,
    /// Fourier decay exponent of the structured set.
    pub beta: Option<f64>,
    /// Hyperplane slab order.
    pub h: Option<f64>,
    /// Number of equations in a level-set system.
    pub m_equations: Option<usize>,
    /// Smoothing gain of the averaging operator.
    pub sobolev_gain: Option<f64>,
    /// Slice dimension threshold for the inverse bound.
    pub gamma: Option<f64>,
    /// Lattice exponent.
    pub lattice_s: Option<f64>,
}

/// Evaluated bounds: the generic intersection exponent, the dimension budget
/// of the exceptional set when the family provides one, the lattice count
/// exponent, or the inverse lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub kind: BoundKind,
    pub intersection_dim: Option<f64>,
    pub exceptional_dim: Option<f64>,
    pub count_exponent: Option<f64>,
    pub lower_bound: Option<f64>,
    pub hypothesis_ok: bool,
    pub warnings: Vec<String>,
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64, PredictError> {
    v.ok_or(PredictError::MissingInput(name))
}

/// Evaluates the bound formulas. Hypothesis violations are reported in
/// `warnings` and `hypothesis_ok`, never silently accepted; the arithmetic
/// still runs so experiments can document what happens outside the
/// hypotheses.
pub fn predict(kind: BoundKind, inputs: &BoundInputs) -> Result<Thresholds, PredictError> {
    let d = inputs.d as f64;
    let mut warnings = Vec::new();
    let mut hyp = |ok: bool, msg: &str| {
        if !ok {
            warnings.push(msg.to_string());
        }
    };
    let mut out = Thresholds {
        kind,
        intersection_dim: None,
        exceptional_dim: None,
        count_exponent: None,
        lower_bound: None,
        hypothesis_ok: true,
        warnings: Vec::new(),
    };
    match kind {
        BoundKind::Translation => {
            let s_a = need(inputs.s_a, "s_a")?;
            let s_b = need(inputs.s_b, "s_b")?;
            hyp(s_a + s_b > d, "requires s_a + s_b > d");
            out.intersection_dim = Some(s_a + s_b - d);
        }
        BoundKind::Rotation => {
            let s_a = need(inputs.s_a, "s_a")?;
            let s_b = need(inputs.s_b, "s_b")?;
            let alpha = need(inputs.alpha, "alpha")?;
            hyp(s_a + s_b > d, "requires s_a + s_b > d");
            hyp(alpha + s_a > d + 1.0, "requires alpha + s_a > d + 1");
            out.intersection_dim = Some(s_a + s_b - d);
            out.exceptional_dim = Some(d + 1.0 - s_a);
        }
        BoundKind::FourierTranslation => {
            let s_a = need(inputs.s_a, "s_a")?;
            let s_b = need(inputs.s_b, "s_b")?;
            let alpha = need(inputs.alpha, "alpha")?;
            let beta = need(inputs.beta, "beta")?;
            hyp(
                (alpha + s_a) / 2.0 > d - beta / 2.0,
                "requires (alpha + s_a)/2 > d - beta/2",
            );
            out.intersection_dim = Some(s_a + s_b - d);
            out.exceptional_dim = Some(2.0 * d - beta - s_a);
        }
        BoundKind::Dilation => {
            let s_a = need(inputs.s_a, "s_a")?;
            let s_b = need(inputs.s_b, "s_b")?;
            let alpha = need(inputs.alpha, "alpha")?;
            let h = need(inputs.h, "h")?;
            hyp(
                (alpha + s_a) / 2.0 > d - (s_b - h),
                "requires (alpha + s_a)/2 > d - (s_b - h)",
            );
            out.intersection_dim = Some(s_a + s_b - d);
            out.exceptional_dim = Some(2.0 * (d - (s_b - h)) - s_a);
        }
        BoundKind::LevelSetSystem => {
            let s_a = need(inputs.s_a, "s_a")?;
            let alpha = need(inputs.alpha, "alpha")?;
            let gain = need(inputs.sobolev_gain, "sobolev_gain")?;
            let m = inputs.m_equations.ok_or(PredictError::MissingInput("m_equations"))?;
            hyp((alpha + s_a) / 2.0 > d - gain, "requires (alpha + s_a)/2 > d - s");
            hyp(s_a > m as f64, "requires s_a > m");
            out.intersection_dim = Some(s_a - m as f64);
            out.exceptional_dim = Some(2.0 * d - 2.0 * gain - s_a);
        }
        BoundKind::LevelSet => {
            let s_a = need(inputs.s_a, "s_a")?;
            let alpha = need(inputs.alpha, "alpha")?;
            hyp(alpha + s_a > d + 1.0, "requires alpha + s_a > d + 1");
            out.intersection_dim = Some(s_a - 1.0);
            out.exceptional_dim = Some(d + 1.0 - s_a);
        }
        BoundKind::MaximalLevelSet => {
            let s_a = need(inputs.s_a, "s_a")?;
            let alpha = need(inputs.alpha, "alpha")?;
            hyp(alpha + s_a > d + 2.0, "requires alpha + s_a > d + 2");
            out.intersection_dim = Some(s_a - 1.0);
            out.exceptional_dim = Some(d + 2.0 - s_a);
        }
        BoundKind::TwoSurface => {
            let s_a = need(inputs.s_a, "s_a")?;
            let a1 = need(inputs.alpha, "alpha")?;
            let a2 = need(inputs.alpha2, "alpha2")?;
            hyp(s_a > 2.0, "requires s_a > 2");
            hyp(a1 + s_a > d + 1.0, "requires alpha_1 + s_a > d + 1");
            hyp(a2 + s_a > d + 1.0, "requires alpha_2 + s_a > d + 1");
            out.intersection_dim = Some(s_a - 2.0);
        }
        BoundKind::InverseSlice => {
            let gamma = need(inputs.gamma, "gamma")?;
            hyp(gamma > 0.0, "requires gamma > 0");
            out.lower_bound = Some(d * gamma / (d - 1.0));
        }
        BoundKind::LatticeCount => {
            let s = need(inputs.lattice_s, "lattice_s")?;
            hyp(s > (d + 1.0) / 2.0, "requires s > (d+1)/2");
            out.count_exponent = Some(d - 2.0 * d / s);
        }
    }
    out.hypothesis_ok = warnings.is_empty();
    out.warnings = warnings;
    Ok(out)
}
