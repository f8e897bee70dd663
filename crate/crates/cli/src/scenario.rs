//! Scenario files: JSON parsing, validation and model construction.

use std::fmt;
use std::str::FromStr;

use igmanova::linalg::{self, c64, hermitian_eigen, hermitian_sqrt_inv, schur_complement, ComplexMatrix};
use igmanova::model::{canonicalize, random_nuisance, CanonicalParams};
use igmanova::{BlockPartition, CanonicalModel, Hypothesis, ProblemSpec, TrueParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Complex matrix as rows of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub t: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SubspaceMode {
    Canonical,
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedNuisance {
    #[serde(rename = "R_star")]
    pub r_star: MatrixJson,
    #[serde(rename = "B_t")]
    pub b_t: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NuisanceMode {
    Fixed(FixedNuisance),
    Random { seed: u64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum SignalSpec {
    /// Raw signal coordinates `B_r` (`r x M`).
    #[serde(rename = "b_r")]
    BR(MatrixJson),
    /// Target induced invariant `T_p` (`M x M`, rank at most `r`).
    #[serde(rename = "t_p")]
    TP(MatrixJson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum HypothesisSpec {
    H0,
    H1(SignalSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Invariance,
    Maximality,
    CfarKs,
    RepresentationKs,
    Independence,
    Ancillarity,
    ParameterReduction,
    WishartMoments,
    SpecialCases,
    EigenLinks,
    Rank,
    ActionDistribution,
}

impl CheckName {
    pub const ALL: [CheckName; 12] = [
        CheckName::Invariance,
        CheckName::Maximality,
        CheckName::CfarKs,
        CheckName::RepresentationKs,
        CheckName::Independence,
        CheckName::Ancillarity,
        CheckName::ParameterReduction,
        CheckName::WishartMoments,
        CheckName::SpecialCases,
        CheckName::EigenLinks,
        CheckName::Rank,
        CheckName::ActionDistribution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Invariance => "invariance",
            CheckName::Maximality => "maximality",
            CheckName::CfarKs => "cfar_ks",
            CheckName::RepresentationKs => "representation_ks",
            CheckName::Independence => "independence",
            CheckName::Ancillarity => "ancillarity",
            CheckName::ParameterReduction => "parameter_reduction",
            CheckName::WishartMoments => "wishart_moments",
            CheckName::SpecialCases => "special_cases",
            CheckName::EigenLinks => "eigen_links",
            CheckName::Rank => "rank",
            CheckName::ActionDistribution => "action_distribution",
        }
    }

    /// Stable stream index, so filtering checks never changes their draws.
    pub fn stream(self) -> u64 {
        CheckName::ALL.iter().position(|&c| c == self).unwrap() as u64 + 1
    }

    /// Short description of the property the check exercises.
    pub fn property(self) -> &'static str {
        match self {
            CheckName::Invariance => "MIS unchanged under the group action",
            CheckName::Maximality => "equal MIS implies a connecting group element",
            CheckName::CfarKs => "H0 law of the MIS free of the nuisance parameters",
            CheckName::RepresentationKs => "stochastic representation matches the data pipeline",
            CheckName::Independence => "T_1a and T_1b uncorrelated under H0",
            CheckName::Ancillarity => "T_b law identical under H0 and H1",
            CheckName::ParameterReduction => "H1 law depends on the parameters only through T_p",
            CheckName::WishartMoments => "whitened scatter blocks have complex Wishart means",
            CheckName::SpecialCases => "closed-form special cases equal the general MIS",
            CheckName::EigenLinks => "eigenvalue links and the rank-one secular update",
            CheckName::Rank => "numerical ranks of T_a and T_b",
            CheckName::ActionDistribution => "group action maps the model onto itself",
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckName::ALL.iter().copied().find(|c| c.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = CheckName::ALL.iter().map(|c| c.as_str()).collect();
            format!("unknown check `{s}`, expected one of: {}", names.join(", "))
        })
    }
}

fn default_significance() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dims: Dims,
    pub subspace_mode: SubspaceMode,
    pub nuisance_mode: NuisanceMode,
    pub hypothesis: HypothesisSpec,
    pub trials: usize,
    pub checks: Vec<CheckName>,
    pub master_seed: u64,
    #[serde(default = "default_significance")]
    pub significance: f64,
}

impl Scenario {
    /// Parses JSON; errors carry serde's line and column.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    /// Checks everything that can be checked without running trials.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |field: &str, msg: String| Err(CliError::Validation { field: field.to_string(), message: msg });
        if self.trials < 1 {
            return fail("trials", "must be at least 1".into());
        }
        if self.checks.is_empty() {
            return fail("checks", "must name at least one check".into());
        }
        for (i, c) in self.checks.iter().enumerate() {
            if self.checks[..i].contains(c) {
                return fail("checks", format!("`{c}` is listed twice"));
            }
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return fail("significance", format!("{} is outside (0, 1)", self.significance));
        }
        let d = self.dims;
        if let Err(e) = BlockPartition::from_dims(d.n, d.k, d.m, d.t, d.r) {
            return fail("dims", e.to_string());
        }
        if d.k < d.m + d.n {
            return fail("dims", format!("K - M = {} must be at least N = {}", d.k - d.m, d.n));
        }
        if let NuisanceMode::Random { scale, .. } = self.nuisance_mode {
            if !(scale > 0.0 && scale.is_finite()) {
                return fail("nuisance_mode.random.scale", format!("{scale} must be positive"));
            }
        }
        let full = d.t + d.r == d.n;
        for &c in &self.checks {
            let needs_pair = matches!(
                c,
                CheckName::RepresentationKs
                    | CheckName::Independence
                    | CheckName::Ancillarity
                    | CheckName::WishartMoments
            );
            if needs_pair && full {
                return fail("checks", format!("`{c}` needs t + r < N"));
            }
            let needs_signal = matches!(c, CheckName::Ancillarity | CheckName::ParameterReduction);
            if needs_signal && self.hypothesis == HypothesisSpec::H0 {
                return fail("checks", format!("`{c}` needs an H1 hypothesis"));
            }
        }
        Setup::build(self).map(|_| ())
    }
}

fn matrix_from_json(value: &MatrixJson, rows: usize, cols: usize, field: &str) -> Result<ComplexMatrix, CliError> {
    let bad = |message: String| CliError::Validation { field: field.to_string(), message };
    if value.len() != rows || value.iter().any(|row| row.len() != cols) {
        return Err(bad(format!("expected a {rows}x{cols} matrix")));
    }
    let mut m = linalg::zeros(rows, cols);
    for (i, row) in value.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            if !(re.is_finite() && im.is_finite()) {
                return Err(bad(format!("entry ({i}, {j}) is not finite")));
            }
            m[(i, j)] = c64(re, im);
        }
    }
    Ok(m)
}

/// A square root factor `W` (`r x M`) with `W^H W = T_p`.
pub fn factor_target(t_p: &ComplexMatrix, r: usize) -> Result<ComplexMatrix, String> {
    let m = t_p.nrows();
    if !linalg::is_hermitian(t_p, 1e-12 * linalg::frobenius(t_p).max(1.0)) {
        return Err("T_p must be Hermitian".into());
    }
    let eig = hermitian_eigen(&linalg::hermitize(t_p)).map_err(|e| e.to_string())?;
    let scale = eig.eigenvalues.first().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&x| x < -1e-10 * scale) {
        return Err("T_p must be positive semidefinite".into());
    }
    if eig.eigenvalues.iter().skip(r).any(|&x| x > 1e-10 * scale) {
        return Err(format!("T_p has rank above r = {r}"));
    }
    let mut w = linalg::zeros(r, m);
    for i in 0..r.min(m) {
        let s = eig.eigenvalues[i].max(0.0).sqrt();
        for j in 0..m {
            w[(i, j)] = eig.eigenvectors[(j, i)].conj() * s;
        }
    }
    Ok(w)
}

/// `R_{2.3}^{1/2}` for a canonical covariance.
pub fn conditional_root(r: &ComplexMatrix, p: &BlockPartition) -> igmanova::Result<ComplexMatrix> {
    let r2 = linalg::block(r, p.rows23(), p.rows23());
    let r_23 = if p.is_full() { r2 } else { schur_complement(&r2, p.r())?.0 };
    Ok(hermitian_sqrt_inv(&r_23)?.0)
}

/// Everything a check needs, derived once from the scenario.
#[derive(Debug, Clone)]
pub struct Setup {
    pub scenario: Scenario,
    pub partition: BlockPartition,
    pub spec: ProblemSpec,
    pub model: CanonicalModel,
    /// Nuisance plus the scenario's signal.
    pub params: TrueParams,
    pub hypothesis: Hypothesis,
    pub canonical: CanonicalParams,
    /// Canonical parameters with the signal removed.
    pub null_canonical: CanonicalParams,
}

impl Setup {
    pub fn build(scenario: &Scenario) -> Result<Setup, CliError> {
        let d = scenario.dims;
        let numeric = |field: &str| {
            let field = field.to_string();
            move |e: igmanova::Error| CliError::Validation { field: field.clone(), message: e.to_string() }
        };
        let spec = match scenario.subspace_mode {
            SubspaceMode::Canonical => ProblemSpec::canonical(d.n, d.k, d.m, d.t, d.r),
            SubspaceMode::Random { seed } => ProblemSpec::random(d.n, d.k, d.m, d.t, d.r, seed),
        }
        .map_err(numeric("subspace_mode"))?;
        let p = spec.partition();
        let model = canonicalize(&spec).map_err(numeric("subspace_mode"))?;
        let nuisance = match &scenario.nuisance_mode {
            NuisanceMode::Random { seed, scale } => random_nuisance(&p, *scale, *seed).map_err(numeric("nuisance_mode"))?,
            NuisanceMode::Fixed(f) => {
                let params = TrueParams {
                    r_star: matrix_from_json(&f.r_star, d.n, d.n, "nuisance_mode.fixed.R_star")?,
                    b_t: matrix_from_json(&f.b_t, d.t, d.m, "nuisance_mode.fixed.B_t")?,
                    b_r: linalg::zeros(d.r, d.m),
                };
                params.validate(&p).map_err(numeric("nuisance_mode.fixed"))?;
                params
            }
        };
        let null_canonical = model.canonical_params(&nuisance).map_err(numeric("nuisance_mode"))?;
        let (params, hypothesis) = match &scenario.hypothesis {
            HypothesisSpec::H0 => (nuisance, Hypothesis::H0),
            HypothesisSpec::H1(SignalSpec::BR(b)) => {
                let b_r = matrix_from_json(b, d.r, d.m, "hypothesis.H1.b_r")?;
                if linalg::frobenius(&b_r) == 0.0 {
                    return Err(CliError::Validation {
                        field: "hypothesis.H1.b_r".into(),
                        message: "H1 needs a nonzero signal".into(),
                    });
                }
                (nuisance.with_signal(b_r), Hypothesis::H1)
            }
            HypothesisSpec::H1(SignalSpec::TP(t)) => {
                let field = "hypothesis.H1.t_p";
                let t_p = matrix_from_json(t, d.m, d.m, field)?;
                if linalg::frobenius(&t_p) == 0.0 {
                    return Err(CliError::Validation { field: field.into(), message: "H1 needs a nonzero T_p".into() });
                }
                let w = factor_target(&t_p, d.r)
                    .map_err(|message| CliError::Validation { field: field.into(), message })?;
                let root = conditional_root(&null_canonical.r, &p).map_err(numeric(field))?;
                let b_r = model.raw_signal(&(root * w)).map_err(numeric(field))?;
                (nuisance.with_signal(b_r), Hypothesis::H1)
            }
        };
        let canonical = model.canonical_params(&params).map_err(numeric("hypothesis"))?;
        Ok(Setup {
            scenario: scenario.clone(),
            partition: p,
            spec,
            model,
            params,
            hypothesis,
            canonical,
            null_canonical,
        })
    }

    pub fn null_params(&self) -> TrueParams {
        self.params.with_signal(linalg::zeros(self.partition.r(), self.partition.m()))
    }
}
