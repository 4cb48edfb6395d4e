use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{check_surface, Domain, SurfaceFamily};
use crate::error::{Error, Result};

/// Parameters of the stochastic SIR epidemic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SirParams {
    pub population: u32,
    /// Contact rate without intervention.
    pub beta_no_action: f64,
    /// Lowered contact rate under intervention.
    pub beta_action: f64,
    pub recovery: f64,
    /// Cost per remaining susceptible of intervening.
    pub intervention_cost: f64,
}

impl Default for SirParams {
    fn default() -> Self {
        SirParams { population: 2000, beta_no_action: 0.75, beta_action: 0.5, recovery: 0.5, intervention_cost: 0.25 }
    }
}

impl SirParams {
    pub fn validate(&self) -> Result<()> {
        let rates_ok = self.beta_no_action > 0.0 && self.beta_action > 0.0 && self.recovery > 0.0;
        if self.population == 0 || !rates_ok || !(self.intervention_cost >= 0.0) {
            return Err(Error::invalid("SIR rates must be positive and the intervention cost nonnegative"));
        }
        if self.beta_action >= self.beta_no_action {
            return Err(Error::invalid("intervention must lower the contact rate"));
        }
        Ok(())
    }

    fn beta(&self, regime: Regime) -> f64 {
        match regime {
            Regime::NoAction => self.beta_no_action,
            Regime::Action => self.beta_action,
        }
    }
}

/// Control regime; also the surface index of the SIR ranking problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NoAction,
    Action,
}

impl Regime {
    pub fn from_surface(surface: usize) -> Result<Self> {
        match surface {
            0 => Ok(Regime::NoAction),
            1 => Ok(Regime::Action),
            _ => Err(Error::invalid(format!("SIR has two regimes, got surface {surface}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryOutcome {
    pub final_susceptibles: u32,
    pub events: u64,
}

/// Runs the Gillespie simulation from `(s0, i0)` until no infecteds remain.
///
/// Each event consumes two uniforms: one for the exponential sojourn (kept
/// for fidelity although costs ignore time) and one for the channel.
pub fn sir_trajectory(
    params: &SirParams,
    regime: Regime,
    s0: u32,
    i0: u32,
    rng: &mut dyn RngCore,
) -> Result<TrajectoryOutcome> {
    if u64::from(s0) + u64::from(i0) > u64::from(params.population) {
        return Err(Error::invalid(format!("initial state ({s0}, {i0}) exceeds the population {}", params.population)));
    }
    let infection_coef = params.beta(regime) / f64::from(params.population);
    let (mut s, mut i) = (s0, i0);
    let mut events = 0u64;
    let mut _elapsed = 0.0;
    while i > 0 {
        let infection = infection_coef * f64::from(s) * f64::from(i);
        let total = infection + params.recovery * f64::from(i);
        let u: f64 = rng.random();
        _elapsed += -(1.0 - u).ln() / total;
        if rng.random::<f64>() * total < infection {
            s -= 1;
            i += 1;
        } else {
            i -= 1;
        }
        events += 1;
    }
    Ok(TrajectoryOutcome { final_susceptibles: s, events })
}

/// Restricted lattice of initial states `(s, i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SirDomain {
    pub s_min: u32,
    pub s_max: u32,
    pub i_min: u32,
    pub i_max: u32,
}

impl Default for SirDomain {
    fn default() -> Self {
        SirDomain { s_min: 1200, s_max: 1800, i_min: 0, i_max: 200 }
    }
}

/// Ranking of the expected cost of no action (surface 0) against immediate
/// action (surface 1) over initial states `x = (s, i)`.
#[derive(Debug, Clone)]
pub struct SirProblem {
    params: SirParams,
    domain: Domain,
}

impl SirProblem {
    pub fn new(params: SirParams, restriction: SirDomain) -> Result<Self> {
        params.validate()?;
        if restriction.s_min > restriction.s_max || restriction.i_min > restriction.i_max {
            return Err(Error::invalid("SIR domain bounds are reversed"));
        }
        if u64::from(restriction.s_max) + u64::from(restriction.i_max) > u64::from(params.population) {
            return Err(Error::invalid("SIR domain exceeds the population"));
        }
        let domain = Domain::new(
            vec![f64::from(restriction.s_min), f64::from(restriction.i_min)],
            vec![f64::from(restriction.s_max), f64::from(restriction.i_max)],
            true,
        )?;
        Ok(SirProblem { params, domain })
    }

    pub fn params(&self) -> &SirParams {
        &self.params
    }

    /// One pathwise cost: new infections, plus the intervention cost under action.
    pub fn cost(&self, regime: Regime, s: u32, i: u32, rng: &mut dyn RngCore) -> Result<f64> {
        let outcome = sir_trajectory(&self.params, regime, s, i, rng)?;
        let infections = f64::from(s - outcome.final_susceptibles);
        Ok(match regime {
            Regime::NoAction => infections,
            Regime::Action => infections + self.params.intervention_cost * f64::from(s),
        })
    }
}

impl SurfaceFamily for SirProblem {
    fn surfaces(&self) -> usize {
        2
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn surface_names(&self) -> Vec<String> {
        vec!["no_action".into(), "action".into()]
    }

    fn sample(&self, surface: usize, x: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        check_surface(surface, 2)?;
        self.domain.check(x)?;
        self.cost(Regime::from_surface(surface)?, x[0] as u32, x[1] as u32, rng)
    }
}
