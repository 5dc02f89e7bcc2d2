//! Reaction-network domain types, the `.crn` text format and rate-law
//! evaluation.

mod dsl;
pub mod expr;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sample_box;
pub use dsl::parse_network;
pub use expr::Expr;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Species {
    pub name: String,
    pub index: usize,
}

/// Macroscopic flux law of one reaction direction.
#[derive(Debug, Clone, PartialEq)]
pub enum RateLaw {
    MassAction { rate_constant: f64 },
    Expression(Expr),
}

impl RateLaw {
    pub fn is_mass_action(&self) -> bool {
        matches!(self, RateLaw::MassAction { .. })
    }

    pub fn rate_constant(&self) -> Option<f64> {
        match self {
            RateLaw::MassAction { rate_constant } => Some(*rate_constant),
            RateLaw::Expression(_) => None,
        }
    }
}

/// Reaction direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dir {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub label: String,
    /// Reactant coefficients.
    pub nu_plus: Vec<u32>,
    /// Product coefficients.
    pub nu_minus: Vec<u32>,
    pub forward: RateLaw,
    pub backward: Option<RateLaw>,
}

impl Reaction {
    /// Net change `nu_minus - nu_plus`.
    pub fn net_change(&self) -> Vec<i64> {
        self.nu_minus
            .iter()
            .zip(&self.nu_plus)
            .map(|(&m, &p)| m as i64 - p as i64)
            .collect()
    }

    pub fn is_reversible(&self) -> bool {
        self.backward.is_some()
    }

    pub fn law(&self, dir: Dir) -> Option<&RateLaw> {
        match dir {
            Dir::Forward => Some(&self.forward),
            Dir::Backward => self.backward.as_ref(),
        }
    }

    /// Coefficients consumed by the given direction.
    pub fn source(&self, dir: Dir) -> &[u32] {
        match dir {
            Dir::Forward => &self.nu_plus,
            Dir::Backward => &self.nu_minus,
        }
    }
}

/// Concentration vector at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroState {
    pub x: Vec<f64>,
    pub t: f64,
}

impl MacroState {
    pub fn new(x: Vec<f64>) -> Self {
        Self { x, t: 0.0 }
    }
}

/// Copy-number vector at volume `volume` and time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MesoState {
    pub n: Vec<u64>,
    pub volume: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
    params: BTreeMap<String, f64>,
    default_volume: Option<f64>,
    initial_conc: Option<Vec<f64>>,
}

impl ReactionNetwork {
    /// Build and validate a network. Parameter values referenced by
    /// expressions are resolved already.
    pub fn new(
        species: Vec<String>,
        reactions: Vec<Reaction>,
        params: BTreeMap<String, f64>,
        default_volume: Option<f64>,
        initial_conc: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = species.len();
        for (i, s) in species.iter().enumerate() {
            if species[..i].contains(s) {
                return Err(Error::Invalid(format!("duplicate species '{s}'")));
            }
            if params.contains_key(s) {
                return Err(Error::Invalid(format!(
                    "parameter '{s}' has the same name as a species"
                )));
            }
        }
        for (i, r) in reactions.iter().enumerate() {
            if r.nu_plus.len() != n || r.nu_minus.len() != n {
                return Err(Error::Invalid(format!(
                    "reaction {}: stoichiometry length differs from species count",
                    r.label
                )));
            }
            if r.nu_plus == r.nu_minus {
                return Err(Error::Invalid(format!("zero net-change reaction {}", r.label)));
            }
            if reactions[..i].iter().any(|o| o.label == r.label) {
                return Err(Error::Invalid(format!("duplicate reaction label '{}'", r.label)));
            }
            for law in std::iter::once(&r.forward).chain(r.backward.as_ref()) {
                match law {
                    RateLaw::MassAction { rate_constant } => {
                        if !(*rate_constant > 0.0 && rate_constant.is_finite()) {
                            return Err(Error::Invalid(format!(
                                "nonpositive mass-action constant {rate_constant} in reaction {}",
                                r.label
                            )));
                        }
                    }
                    RateLaw::Expression(e) => {
                        let mut refs = Vec::new();
                        e.species_refs(&mut refs);
                        if refs.iter().any(|&j| j >= n) {
                            return Err(Error::Invalid(format!(
                                "reaction {} references an undeclared species",
                                r.label
                            )));
                        }
                    }
                }
            }
        }
        if let Some(v) = default_volume {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("volume must be positive, got {v}")));
            }
        }
        if let Some(c) = &initial_conc {
            if c.len() != n || c.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::Invalid(
                    "initial concentrations must be positive for every species".into(),
                ));
            }
        }
        Ok(Self {
            species: species
                .into_iter()
                .enumerate()
                .map(|(index, name)| Species { name, index })
                .collect(),
            reactions,
            params,
            default_volume,
            initial_conc,
        })
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn species_names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.name.clone()).collect()
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn default_volume(&self) -> Option<f64> {
        self.default_volume
    }

    pub fn initial_conc(&self) -> Option<&[f64]> {
        self.initial_conc.as_deref()
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn num_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn is_mass_action(&self) -> bool {
        self.reactions
            .iter()
            .all(|r| r.forward.is_mass_action() && r.backward.as_ref().is_none_or(RateLaw::is_mass_action))
    }

    pub fn is_reversible(&self) -> bool {
        self.reactions.iter().all(Reaction::is_reversible)
    }

    /// Net change vectors, one per reaction.
    pub fn net_changes(&self) -> Vec<Vec<i64>> {
        self.reactions.iter().map(Reaction::net_change).collect()
    }

    /// Flux `R±ℓ(x)`. An absent backward law evaluates to 0.
    pub fn eval_rate(&self, ell: usize, dir: Dir, x: &[f64]) -> Result<f64> {
        let r = &self.reactions[ell];
        let Some(law) = r.law(dir) else {
            return Ok(0.0);
        };
        let v = match law {
            RateLaw::MassAction { rate_constant } => mass_action_monomial(*rate_constant, r.source(dir), x),
            RateLaw::Expression(e) => e.eval(x),
        };
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain {
                reaction: r.label.clone(),
                message: format!(
                    "{} rate evaluates to {v} at x = {x:?}",
                    match dir {
                        Dir::Forward => "forward",
                        Dir::Backward => "backward",
                    }
                ),
            });
        }
        Ok(v)
    }

    /// `(R+ℓ(x), R-ℓ(x))` for every reaction.
    pub fn fluxes(&self, x: &[f64]) -> Result<Vec<(f64, f64)>> {
        (0..self.reactions.len())
            .map(|l| {
                Ok((
                    self.eval_rate(l, Dir::Forward, x)?,
                    self.eval_rate(l, Dir::Backward, x)?,
                ))
            })
            .collect()
    }

    /// Sample every rate law at quasi-random points of `(0, 10]^N` and
    /// report irreversible reactions and negative or non-finite rates.
    pub fn validate(&self, samples: usize) -> Vec<String> {
        let mut warnings = Vec::new();
        let points = sample_box(samples, self.num_species(), 10.0);
        for r in &self.reactions {
            if !r.is_reversible() {
                warnings.push(format!("{} irreversible: entropy production undefined", r.label));
            }
            for dir in [Dir::Forward, Dir::Backward] {
                let Some(RateLaw::Expression(e)) = r.law(dir) else {
                    continue;
                };
                let mut negative = false;
                let mut nonfinite = false;
                for x in &points {
                    let v = e.eval(x);
                    if !v.is_finite() {
                        nonfinite = true;
                    } else if v < 0.0 {
                        negative = true;
                    }
                }
                if negative {
                    warnings.push(format!("{} rate negative at sampled point", r.label));
                }
                if nonfinite {
                    warnings.push(format!("{} rate not finite at sampled point", r.label));
                }
            }
        }
        warnings
    }

    /// Canonical `.crn` text. Parsing it yields an equal network.
    pub fn to_dsl(&self) -> String {
        dsl::write_network(self)
    }
}

pub(crate) fn mass_action_monomial(k: f64, coeffs: &[u32], x: &[f64]) -> f64 {
    coeffs
        .iter()
        .zip(x)
        .fold(k, |acc, (&c, &xj)| if c == 0 { acc } else { acc * xj.powi(c as i32) })
}

// JSON form: expressions travel as canonical text and are re-resolved on load.

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RateLawDoc {
    MassAction(f64),
    Expression(String),
}

#[derive(Serialize, Deserialize)]
struct ReactionDoc {
    label: String,
    nu_plus: Vec<u32>,
    nu_minus: Vec<u32>,
    forward: RateLawDoc,
    backward: Option<RateLawDoc>,
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    species: Vec<String>,
    reactions: Vec<ReactionDoc>,
    params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    volume: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_conc: Option<Vec<f64>>,
}

impl Serialize for ReactionNetwork {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let doc_law = |l: &RateLaw| match l {
            RateLaw::MassAction { rate_constant } => RateLawDoc::MassAction(*rate_constant),
            RateLaw::Expression(e) => RateLawDoc::Expression(e.to_string()),
        };
        NetworkDoc {
            species: self.species_names(),
            reactions: self
                .reactions
                .iter()
                .map(|r| ReactionDoc {
                    label: r.label.clone(),
                    nu_plus: r.nu_plus.clone(),
                    nu_minus: r.nu_minus.clone(),
                    forward: doc_law(&r.forward),
                    backward: r.backward.as_ref().map(doc_law),
                })
                .collect(),
            params: self.params.clone(),
            volume: self.default_volume,
            initial_conc: self.initial_conc.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ReactionNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = NetworkDoc::deserialize(d)?;
        let scope = expr::Scope {
            species: &doc.species,
            params: &doc.params,
        };
        let law = |l: RateLawDoc| -> Result<RateLaw> {
            Ok(match l {
                RateLawDoc::MassAction(k) => RateLaw::MassAction { rate_constant: k },
                RateLawDoc::Expression(src) => RateLaw::Expression(expr::parse_expr(&src, &scope, 1, 1)?),
            })
        };
        let mut reactions = Vec::new();
        for r in doc.reactions {
            reactions.push(Reaction {
                label: r.label,
                nu_plus: r.nu_plus,
                nu_minus: r.nu_minus,
                forward: law(r.forward).map_err(D::Error::custom)?,
                backward: r.backward.map(law).transpose().map_err(D::Error::custom)?,
            });
        }
        ReactionNetwork::new(
            doc.species.clone(),
            reactions,
            doc.params.clone(),
            doc.volume,
            doc.initial_conc,
        )
        .map_err(D::Error::custom)
    }
}
