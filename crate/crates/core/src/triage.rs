//! Multi-patient transport planning.
//!
//! A scenario places patients, transport assets and treatment facilities on
//! a set of locations linked by uncertain travel times. Plans assign every
//! patient to one trip of one asset and to a facility; a plan's cost is the
//! sum over patients of the expected cost of delay until facility arrival.
//!
//! Assets carry one patient per trip. A trip runs from the asset's current
//! location to the patient, then to the facility, where the asset stays
//! until its next trip. Legs are independent, so arrival-time distributions
//! are convolutions of the legs driven so far.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::Posterior;
use crate::ecda::{ecda_transport, DecisionError, DecisionProblem};
use crate::tdutility::{TimeDistribution, UtilityError, UtilityModel};

pub const MAX_PATIENTS: usize = 6;
pub const MAX_ASSETS: usize = 3;
pub const MAX_FACILITIES: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("no travel time declared for {origin} -> {destination} in band `{band}`")]
    MissingLeg {
        origin: String,
        destination: String,
        band: String,
    },
    #[error(
        "scenario has {patients} patients, {assets} assets and {facilities} facilities; \
         exhaustive planning is limited to {MAX_PATIENTS}/{MAX_ASSETS}/{MAX_FACILITIES}, \
         decompose the scenario into smaller groups"
    )]
    TooLarge {
        patients: usize,
        assets: usize,
        facilities: usize,
    },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),
    #[error("infeasible scenario: no plan satisfies the facility capacities and capabilities")]
    InfeasibleScenario,
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
}

/// Travel-time distributions keyed by origin, destination and time-of-day
/// band.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransportModel {
    legs: BTreeMap<(String, String, String), TimeDistribution>,
}

impl TransportModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        origin: impl Into<String>,
        destination: impl Into<String>,
        band: impl Into<String>,
        travel: TimeDistribution,
    ) -> Option<TimeDistribution> {
        self.legs
            .insert((origin.into(), destination.into(), band.into()), travel)
    }

    pub fn with(
        mut self,
        origin: impl Into<String>,
        destination: impl Into<String>,
        band: impl Into<String>,
        travel: TimeDistribution,
    ) -> Self {
        self.insert(origin, destination, band, travel);
        self
    }

    /// Legs as `((origin, destination, band), distribution)`.
    pub fn iter(&self) -> impl Iterator<Item = (&(String, String, String), &TimeDistribution)> {
        self.legs.iter()
    }

    fn get(&self, origin: &str, destination: &str, band: &str) -> Result<&TimeDistribution, PlanError> {
        self.legs
            .get(&(origin.to_string(), destination.to_string(), band.to_string()))
            .ok_or_else(|| PlanError::MissingLeg {
                origin: origin.to_string(),
                destination: destination.to_string(),
                band: band.to_string(),
            })
    }
}

/// The declared travel-time distribution for a route.
pub fn travel_time(
    model: &TransportModel,
    origin: &str,
    destination: &str,
    band: &str,
) -> Result<TimeDistribution, PlanError> {
    model.get(origin, destination, band).cloned()
}

/// Distribution of the sum of two independent times.
pub fn convolve(a: &TimeDistribution, b: &TimeDistribution) -> TimeDistribution {
    let atoms = a
        .support()
        .iter()
        .flat_map(|&(ta, wa)| b.support().iter().map(move |&(tb, wb)| (ta + tb, wa * wb)));
    TimeDistribution::from_atoms(atoms).expect("sum of two valid distributions is valid")
}

#[derive(Debug, Clone)]
pub struct Patient {
    pub id: String,
    pub location: String,
    pub posterior: Posterior,
    pub model: Arc<UtilityModel>,
    pub context: Option<String>,
    /// Process duration already elapsed at the scenario clock.
    pub onset: TimeDistribution,
    /// Capability tags a receiving facility must offer.
    pub requires: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asset {
    pub id: String,
    pub start: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facility {
    pub id: String,
    pub location: String,
    #[serde(default)]
    pub capabilities: Vec<String>,
    pub capacity: usize,
}

impl Facility {
    fn accepts(&self, patient: &Patient) -> bool {
        patient.requires.iter().all(|tag| self.capabilities.contains(tag))
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    patients: Vec<Patient>,
    assets: Vec<Asset>,
    facilities: Vec<Facility>,
    transport: TransportModel,
    band: String,
    clock: f64,
}

impl Scenario {
    pub fn new(
        patients: Vec<Patient>,
        assets: Vec<Asset>,
        facilities: Vec<Facility>,
        transport: TransportModel,
        band: impl Into<String>,
        clock: f64,
    ) -> Result<Self, PlanError> {
        if patients.is_empty() {
            return Err(PlanError::InvalidScenario("no patients".into()));
        }
        if !(clock >= 0.0) || !clock.is_finite() {
            return Err(PlanError::InvalidScenario(format!("clock {clock} must be >= 0")));
        }
        for (kind, ids) in [
            ("patient", patients.iter().map(|p| p.id.as_str()).collect::<Vec<_>>()),
            ("asset", assets.iter().map(|a| a.id.as_str()).collect()),
            ("facility", facilities.iter().map(|f| f.id.as_str()).collect()),
        ] {
            if let Some(dup) = ids.iter().duplicates().next() {
                return Err(PlanError::InvalidScenario(format!("duplicate {kind} id `{dup}`")));
            }
        }
        for p in &patients {
            DecisionProblem::new(&p.posterior, &p.model)?.with_context(p.context.as_deref())?;
        }
        Ok(Scenario {
            patients,
            assets,
            facilities,
            transport,
            band: band.into(),
            clock,
        })
    }

    pub fn patients(&self) -> &[Patient] {
        &self.patients
    }

    pub fn assets(&self) -> &[Asset] {
        &self.assets
    }

    pub fn facilities(&self) -> &[Facility] {
        &self.facilities
    }

    pub fn transport(&self) -> &TransportModel {
        &self.transport
    }

    pub fn band(&self) -> &str {
        &self.band
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// The same scenario without the given patient.
    pub fn without_patient(&self, id: &str) -> Result<Scenario, PlanError> {
        Scenario::new(
            self.patients.iter().filter(|p| p.id != id).cloned().collect(),
            self.assets.clone(),
            self.facilities.clone(),
            self.transport.clone(),
            self.band.clone(),
            self.clock,
        )
    }

    fn leg(&self, from: &str, to: &str) -> Result<TimeDistribution, PlanError> {
        if from == to {
            return Ok(TimeDistribution::point_mass(0.0)?);
        }
        Ok(self.transport.get(from, to, &self.band)?.clone())
    }

    /// Expected cost for a patient arriving after `travel` minutes.
    fn patient_cost(&self, patient: &Patient, travel: &TimeDistribution) -> Result<f64, PlanError> {
        let base = DecisionProblem::new(&patient.posterior, &patient.model)?
            .with_context(patient.context.as_deref())?;
        patient.onset.try_expect(|elapsed| {
            let start = self.clock + elapsed;
            let dp = base.with_reference_time(start)?;
            Ok(ecda_transport(&dp, &travel.shifted(start)?)?)
        })
    }

    /// Arrival distribution and cost of each trip of one asset's route.
    fn route_costs(
        &self,
        asset: usize,
        trips: &[(usize, usize)],
    ) -> Result<Vec<(TimeDistribution, f64)>, PlanError> {
        let mut location = self.assets[asset].start.as_str();
        let mut elapsed = TimeDistribution::point_mass(0.0)?;
        let mut out = Vec::with_capacity(trips.len());
        for &(p, f) in trips {
            let patient = &self.patients[p];
            let facility = &self.facilities[f];
            let pickup = convolve(&elapsed, &self.leg(location, &patient.location)?);
            let arrival = convolve(&pickup, &self.leg(&patient.location, &facility.location)?);
            let cost = self.patient_cost(patient, &arrival)?;
            location = &facility.location;
            elapsed = arrival.clone();
            out.push((arrival, cost));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trip {
    pub patient: String,
    pub facility: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRoute {
    pub asset: String,
    pub trips: Vec<Trip>,
}

/// Ordered trips per asset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub routes: Vec<AssetRoute>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientCost {
    pub patient: String,
    pub asset: String,
    pub facility: String,
    /// Arrival time on the scenario clock.
    pub arrival: TimeDistribution,
    pub expected_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEvaluation {
    pub plan: TransportPlan,
    /// In scenario patient order.
    pub patients: Vec<PatientCost>,
    pub total: f64,
}

/// Index form of a plan: per asset, the `(patient, facility)` trips in order.
type RouteIndex = Vec<Vec<(usize, usize)>>;

fn check_bounds(s: &Scenario) -> Result<(), PlanError> {
    let (patients, assets, facilities) = (s.patients.len(), s.assets.len(), s.facilities.len());
    if patients > MAX_PATIENTS || assets > MAX_ASSETS || facilities > MAX_FACILITIES {
        return Err(PlanError::TooLarge {
            patients,
            assets,
            facilities,
        });
    }
    Ok(())
}

/// Visits every feasible plan in enumeration order: asset assignment
/// (first patient most significant), then trip order per asset, then
/// facility assignment (first patient most significant).
fn for_each_plan<F>(s: &Scenario, mut visit: F) -> Result<(), PlanError>
where
    F: FnMut(&RouteIndex) -> Result<(), PlanError>,
{
    check_bounds(s)?;
    let n = s.patients.len();
    if s.assets.is_empty() || s.facilities.is_empty() {
        return Ok(());
    }
    let eligible: Vec<Vec<usize>> = s
        .patients
        .iter()
        .map(|p| (0..s.facilities.len()).filter(|&f| s.facilities[f].accepts(p)).collect())
        .collect();
    if eligible.iter().any(Vec::is_empty) {
        return Ok(());
    }
    let facility_choices: Vec<Vec<usize>> = eligible
        .iter()
        .cloned()
        .multi_cartesian_product()
        .filter(|choice| {
            let mut load = vec![0usize; s.facilities.len()];
            for &f in choice {
                load[f] += 1;
            }
            load.iter().zip(&s.facilities).all(|(&l, f)| l <= f.capacity)
        })
        .collect();
    if facility_choices.is_empty() {
        return Ok(());
    }

    for assignment in (0..n).map(|_| 0..s.assets.len()).multi_cartesian_product() {
        let per_asset: Vec<Vec<Vec<usize>>> = (0..s.assets.len())
            .map(|a| {
                let members: Vec<usize> = (0..n).filter(|&p| assignment[p] == a).collect();
                let k = members.len();
                members.into_iter().permutations(k).collect()
            })
            .collect();
        for orders in per_asset.into_iter().multi_cartesian_product() {
            for facilities in &facility_choices {
                let routes: RouteIndex = orders
                    .iter()
                    .map(|order| order.iter().map(|&p| (p, facilities[p])).collect())
                    .collect();
                visit(&routes)?;
            }
        }
    }
    Ok(())
}

fn to_plan(s: &Scenario, routes: &RouteIndex) -> TransportPlan {
    TransportPlan {
        routes: routes
            .iter()
            .enumerate()
            .map(|(a, trips)| AssetRoute {
                asset: s.assets[a].id.clone(),
                trips: trips
                    .iter()
                    .map(|&(p, f)| Trip {
                        patient: s.patients[p].id.clone(),
                        facility: s.facilities[f].id.clone(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// All feasible plans in deterministic enumeration order.
pub fn enumerate_plans(scenario: &Scenario) -> Result<Vec<TransportPlan>, PlanError> {
    let mut plans = Vec::new();
    for_each_plan(scenario, |routes| {
        plans.push(to_plan(scenario, routes));
        Ok(())
    })?;
    Ok(plans)
}

fn index_plan(s: &Scenario, plan: &TransportPlan) -> Result<RouteIndex, PlanError> {
    let find = |kind: &str, id: &str, pos: Option<usize>| {
        pos.ok_or_else(|| PlanError::InfeasiblePlan(format!("unknown {kind} `{id}`")))
    };
    let mut routes: RouteIndex = vec![Vec::new(); s.assets.len()];
    let mut seen_asset = vec![false; s.assets.len()];
    let mut seen_patient = vec![false; s.patients.len()];
    let mut load = vec![0usize; s.facilities.len()];
    for route in &plan.routes {
        let a = find("asset", &route.asset, s.assets.iter().position(|x| x.id == route.asset))?;
        if std::mem::replace(&mut seen_asset[a], true) {
            return Err(PlanError::InfeasiblePlan(format!("asset `{}` listed twice", route.asset)));
        }
        for trip in &route.trips {
            let p = find(
                "patient",
                &trip.patient,
                s.patients.iter().position(|x| x.id == trip.patient),
            )?;
            let f = find(
                "facility",
                &trip.facility,
                s.facilities.iter().position(|x| x.id == trip.facility),
            )?;
            if std::mem::replace(&mut seen_patient[p], true) {
                return Err(PlanError::InfeasiblePlan(format!(
                    "patient `{}` assigned more than once",
                    trip.patient
                )));
            }
            if !s.facilities[f].accepts(&s.patients[p]) {
                return Err(PlanError::InfeasiblePlan(format!(
                    "facility `{}` lacks capabilities required by `{}`",
                    trip.facility, trip.patient
                )));
            }
            load[f] += 1;
            routes[a].push((p, f));
        }
    }
    if let Some(p) = seen_patient.iter().position(|seen| !seen) {
        return Err(PlanError::InfeasiblePlan(format!(
            "patient `{}` is not assigned",
            s.patients[p].id
        )));
    }
    for (f, &l) in load.iter().enumerate() {
        if l > s.facilities[f].capacity {
            return Err(PlanError::InfeasiblePlan(format!(
                "facility `{}` receives {l} patients, capacity {}",
                s.facilities[f].id, s.facilities[f].capacity
            )));
        }
    }
    Ok(routes)
}

fn assemble(
    s: &Scenario,
    routes: &RouteIndex,
    costs: &[&[(TimeDistribution, f64)]],
) -> Result<PlanEvaluation, PlanError> {
    let mut per_patient: Vec<Option<PatientCost>> = vec![None; s.patients.len()];
    for (a, trips) in routes.iter().enumerate() {
        for (&(p, f), (arrival, cost)) in trips.iter().zip(costs[a]) {
            per_patient[p] = Some(PatientCost {
                patient: s.patients[p].id.clone(),
                asset: s.assets[a].id.clone(),
                facility: s.facilities[f].id.clone(),
                arrival: arrival.shifted(s.clock)?,
                expected_cost: *cost,
            });
        }
    }
    let patients: Vec<PatientCost> = per_patient
        .into_iter()
        .map(|c| c.expect("every patient is routed"))
        .collect();
    let total = patients.iter().map(|c| c.expected_cost).sum();
    Ok(PlanEvaluation {
        plan: to_plan(s, routes),
        patients,
        total,
    })
}

/// Per-patient and total expected cost of a feasible plan.
pub fn evaluate_plan(scenario: &Scenario, plan: &TransportPlan) -> Result<PlanEvaluation, PlanError> {
    let routes = index_plan(scenario, plan)?;
    let costs = routes
        .iter()
        .enumerate()
        .map(|(a, trips)| scenario.route_costs(a, trips))
        .collect::<Result<Vec<_>, _>>()?;
    let views: Vec<&[(TimeDistribution, f64)]> = costs.iter().map(Vec::as_slice).collect();
    assemble(scenario, &routes, &views)
}

/// Packs an asset route into a cache key: 2 bits of asset, 3 bits of length,
/// then 5 bits per trip. Fits the enumeration bounds.
fn route_key(asset: usize, trips: &[(usize, usize)]) -> u64 {
    trips.iter().fold(
        ((asset as u64) << 3) | trips.len() as u64,
        |key, &(p, f)| (key << 5) | ((p as u64) << 2) | f as u64,
    )
}

/// The cheapest plan; ties go to the earliest plan in enumeration order.
///
/// Streams the enumeration instead of materializing it, reusing the costs
/// of asset routes shared between plans.
pub fn best_plan(scenario: &Scenario) -> Result<PlanEvaluation, PlanError> {
    let mut cache: HashMap<u64, Vec<(TimeDistribution, f64)>> = HashMap::new();
    let mut best: Option<(f64, RouteIndex)> = None;
    let mut totals = vec![0.0; scenario.patients.len()];
    for_each_plan(scenario, |routes| {
        for (a, trips) in routes.iter().enumerate() {
            let key = route_key(a, trips);
            if !cache.contains_key(&key) {
                cache.insert(key, scenario.route_costs(a, trips)?);
            }
            for (&(p, _), &(_, cost)) in trips.iter().zip(&cache[&key]) {
                totals[p] = cost;
            }
        }
        // same summation order as evaluate_plan
        let total: f64 = totals.iter().sum();
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, routes.clone()));
        }
        Ok(())
    })?;
    let (_, routes) = best.ok_or(PlanError::InfeasibleScenario)?;
    evaluate_plan(scenario, &to_plan(scenario, &routes))
}

/// Every feasible plan evaluated, cheapest first; ties keep enumeration
/// order.
pub fn rank_plans(scenario: &Scenario) -> Result<Vec<PlanEvaluation>, PlanError> {
    let mut ranked = enumerate_plans(scenario)?
        .iter()
        .map(|plan| evaluate_plan(scenario, plan))
        .collect::<Result<Vec<_>, _>>()?;
    if ranked.is_empty() {
        return Err(PlanError::InfeasibleScenario);
    }
    ranked.sort_by(|a, b| a.total.total_cmp(&b.total));
    Ok(ranked)
}
