//! Greedy placement of classical channels on the grid.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::keyrate::{secret_key_rate, KeyRateResult};
use crate::noise::{total_noise_budget, CoexistenceScenario, Direction, WdmChannel};
use crate::registry::Registry;
use crate::units::{itu_channel, ItuChannel, PowerDbm, Reference, ShotNoiseUnits, C_BAND_MAX_INDEX, C_BAND_MIN_INDEX};

/// Ranks a candidate by the excess noise it adds; lower scores win.
pub trait AllocationObjective: Send + Sync {
    fn name(&self) -> &'static str;
    fn score(&self, marginal_xi: f64) -> f64;
}

/// Place channels where they add the least noise.
pub struct MinNoise;

impl AllocationObjective for MinNoise {
    fn name(&self) -> &'static str {
        "min_noise"
    }
    fn score(&self, marginal_xi: f64) -> f64 {
        marginal_xi
    }
}

/// Place channels where they add the most noise.
pub struct MaxNoise;

impl AllocationObjective for MaxNoise {
    fn name(&self) -> &'static str {
        "max_noise"
    }
    fn score(&self, marginal_xi: f64) -> f64 {
        -marginal_xi
    }
}

pub fn objective_registry() -> Registry<dyn AllocationObjective> {
    let mut reg: Registry<dyn AllocationObjective> = Registry::new("allocation objective");
    reg.register("min_noise", || Box::new(MinNoise))
        .register("max_noise", || Box::new(MaxNoise));
    reg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "pairs")]
pub enum AllocationMode {
    /// Keep adding while the key rate stays positive.
    MaxPairs,
    /// Place exactly this many steps whatever the key rate.
    FixedPairs(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// One forward and one backward channel on the same wavelength per step.
    Pairs,
    /// One channel in either direction per step.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRequest {
    /// Link, system, multiplexer and noise models; its channel list is the pre-existing load.
    pub scenario: CoexistenceScenario,
    pub candidate_indices: Vec<i32>,
    pub forward_power: PowerDbm,
    pub backward_power: PowerDbm,
    pub objective: String,
    pub mode: AllocationMode,
    pub placement: Placement,
}

impl AllocationRequest {
    /// Every in-band grid slot except the quantum channel.
    pub fn default_candidates(quantum: &ItuChannel) -> Vec<i32> {
        (C_BAND_MIN_INDEX..=C_BAND_MAX_INDEX).filter(|&i| i != quantum.index).collect()
    }

    pub fn new(scenario: CoexistenceScenario, forward_power: PowerDbm, backward_power: PowerDbm) -> Self {
        let candidate_indices = Self::default_candidates(&scenario.system.quantum_channel);
        AllocationRequest {
            scenario,
            candidate_indices,
            forward_power,
            backward_power,
            objective: "min_noise".into(),
            mode: AllocationMode::MaxPairs,
            placement: Placement::Pairs,
        }
    }

    fn validate(&self) -> Result<Vec<ItuChannel>> {
        let q = self.scenario.system.quantum_channel;
        let mut out: Vec<ItuChannel> = Vec::with_capacity(self.candidate_indices.len());
        for &i in &self.candidate_indices {
            if i == q.index {
                return Err(invalid("candidates", format!("ITU {i} is the quantum channel")));
            }
            if out.iter().any(|c| c.index == i) {
                return Err(invalid("candidates", format!("ITU {i} listed twice")));
            }
            if self.scenario.channels.iter().any(|c| c.itu.index == i) {
                return Err(invalid("candidates", format!("ITU {i} already carries a channel")));
            }
            out.push(itu_channel(i)?);
        }
        if out.is_empty() {
            return Err(invalid("candidates", "empty candidate list"));
        }
        Ok(out)
    }
}

/// One placed channel with its share of the noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedChannel {
    pub itu: ItuChannel,
    pub direction: Direction,
    pub step: usize,
    /// Input-referred noise added by this channel given everything placed before it.
    pub marginal_xi: ShotNoiseUnits,
    /// Input-referred total budget once this channel is in place.
    pub cumulative_xi: ShotNoiseUnits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub quantum: ItuChannel,
    pub candidates: Vec<i32>,
    pub chosen: Vec<PlacedChannel>,
    pub baseline_xi: ShotNoiseUnits,
    pub pairs_placed: usize,
    pub feasible: bool,
    pub key_rate_final: KeyRateResult,
    pub warnings: Vec<String>,
}

impl AllocationResult {
    pub fn per_channel_xi(&self) -> Vec<ShotNoiseUnits> {
        self.chosen.iter().map(|c| c.marginal_xi).collect()
    }

    pub fn cumulative_xi(&self) -> Vec<ShotNoiseUnits> {
        self.chosen.iter().map(|c| c.cumulative_xi).collect()
    }

    /// Writes `itu_index,wavelength_nm,role,marginal_xi_n0,cumulative_xi_n0`, one row per grid slot
    /// (two for a slot used in both directions), ascending index.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| invalid("allocation csv", e.to_string());
        w.write_record(["itu_index", "wavelength_nm", "role", "marginal_xi_n0", "cumulative_xi_n0"])
            .map_err(io)?;
        let mut slots: Vec<i32> = self.candidates.clone();
        slots.push(self.quantum.index);
        slots.sort_unstable();
        for idx in slots {
            let ch = itu_channel(idx)?;
            let wl = format!("{:.2}", ch.wavelength_nm);
            if idx == self.quantum.index {
                w.write_record([idx.to_string(), wl, "quantum".into(), String::new(), String::new()])
                    .map_err(io)?;
                continue;
            }
            let mut used: Vec<&PlacedChannel> = self.chosen.iter().filter(|c| c.itu.index == idx).collect();
            used.sort_by_key(|c| c.direction);
            if used.is_empty() {
                w.write_record([idx.to_string(), wl.clone(), "unused".into(), String::new(), String::new()])
                    .map_err(io)?;
            }
            for c in used {
                w.write_record([
                    idx.to_string(),
                    wl.clone(),
                    c.direction.label().into(),
                    format!("{:e}", c.marginal_xi.value),
                    format!("{:e}", c.cumulative_xi.value),
                ])
                .map_err(io)?;
            }
        }
        w.flush().map_err(|e| invalid("allocation csv", e.to_string()))
    }
}

/// Relative tolerance under which two candidate scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

struct Candidate {
    index: i32,
    channels: Vec<WdmChannel>,
    distance_thz: f64,
    direction_rank: u8,
}

struct Scored {
    option: usize,
    score: f64,
    total: f64,
}

fn budget_total(scenario: &CoexistenceScenario, channels: &[WdmChannel]) -> Result<f64> {
    Ok(total_noise_budget(&scenario.with_channels(channels.to_vec()), Reference::AtAlice)?
        .total
        .value)
}

/// Greedy allocation: at each step every remaining option is evaluated with
/// the full noise budget and the best one under the objective is placed.
/// Ties go to the option spectrally farther from the quantum channel, then to
/// the lower grid index.
pub fn allocate(req: &AllocationRequest) -> Result<AllocationResult> {
    allocate_with(req, &objective_registry())
}

pub fn allocate_with(req: &AllocationRequest, objectives: &Registry<dyn AllocationObjective>) -> Result<AllocationResult> {
    let objective = objectives.create(&req.objective)?;
    let candidates = req.validate()?;
    let scenario = &req.scenario;
    let mut warnings = scenario.validate()?;
    let t = scenario.channel_transmission();
    let q = scenario.system.quantum_channel;

    let mut placed: Vec<WdmChannel> = scenario.channels.clone();
    let baseline = budget_total(scenario, &placed)?;
    let baseline_rate = secret_key_rate(&scenario.system, t, ShotNoiseUnits::at_alice(baseline))?;
    if !baseline_rate.positive {
        if req.mode == AllocationMode::MaxPairs {
            return Err(Error::InfeasibleBaseline {
                key_bits_per_pulse: baseline_rate.key_bits_per_pulse,
            });
        }
        warnings.push(format!(
            "no key without classical channels ({:e} bits/pulse); nothing placed",
            baseline_rate.key_bits_per_pulse
        ));
        return Ok(AllocationResult {
            quantum: q,
            candidates: req.candidate_indices.clone(),
            chosen: Vec::new(),
            baseline_xi: ShotNoiseUnits::at_alice(baseline),
            pairs_placed: 0,
            feasible: false,
            key_rate_final: baseline_rate,
            warnings,
        });
    }

    let make = |itu: ItuChannel, direction: Direction| WdmChannel {
        itu,
        direction,
        launch_power: match direction {
            Direction::Forward => req.forward_power,
            Direction::Backward => req.backward_power,
        },
        modulation: Default::default(),
    };
    let mut options: Vec<Candidate> = Vec::new();
    for itu in &candidates {
        let distance_thz = itu.spectral_distance_thz(&q);
        match req.placement {
            Placement::Pairs => options.push(Candidate {
                index: itu.index,
                channels: vec![make(*itu, Direction::Forward), make(*itu, Direction::Backward)],
                distance_thz,
                direction_rank: 0,
            }),
            Placement::Single => {
                for (rank, dir) in [(0, Direction::Forward), (1, Direction::Backward)] {
                    options.push(Candidate {
                        index: itu.index,
                        channels: vec![make(*itu, dir)],
                        distance_thz,
                        direction_rank: rank,
                    });
                }
            }
        }
    }

    let mut remaining: Vec<usize> = (0..options.len()).collect();
    let mut chosen: Vec<PlacedChannel> = Vec::new();
    let mut current = baseline;
    let mut rate = baseline_rate;
    let mut step = 0usize;
    loop {
        if let AllocationMode::FixedPairs(k) = req.mode {
            if step >= k {
                break;
            }
        }
        if remaining.is_empty() {
            if let AllocationMode::FixedPairs(k) = req.mode {
                warnings.push(format!("only {step} of {k} requested steps fit on the candidate grid"));
            }
            break;
        }
        let scored: Vec<Scored> = remaining
            .par_iter()
            .map(|&o| {
                let mut trial = placed.clone();
                trial.extend_from_slice(&options[o].channels);
                let total = budget_total(scenario, &trial)?;
                Ok(Scored {
                    option: o,
                    score: objective.score(total - current),
                    total,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let best = pick(&scored, &options);
        let opt = &options[best.option];
        let trial_rate = secret_key_rate(&scenario.system, t, ShotNoiseUnits::at_alice(best.total))?;
        if req.mode == AllocationMode::MaxPairs && !trial_rate.positive {
            break;
        }
        step += 1;
        let mut running = current;
        for (i, ch) in opt.channels.iter().enumerate() {
            placed.push(*ch);
            let cumulative = if i + 1 == opt.channels.len() {
                best.total
            } else {
                budget_total(scenario, &placed)?
            };
            chosen.push(PlacedChannel {
                itu: ch.itu,
                direction: ch.direction,
                step,
                marginal_xi: ShotNoiseUnits::at_alice(cumulative - running),
                cumulative_xi: ShotNoiseUnits::at_alice(cumulative),
            });
            running = cumulative;
        }
        current = best.total;
        rate = trial_rate;
        // in single placement the same slot stays available for the other direction
        remaining.retain(|&o| {
            !(options[o].index == opt.index
                && (req.placement == Placement::Pairs || options[o].direction_rank == opt.direction_rank))
        });
    }

    Ok(AllocationResult {
        quantum: q,
        candidates: req.candidate_indices.clone(),
        chosen,
        baseline_xi: ShotNoiseUnits::at_alice(baseline),
        pairs_placed: step,
        feasible: rate.positive,
        key_rate_final: rate,
        warnings,
    })
}

fn pick<'a>(scored: &'a [Scored], options: &[Candidate]) -> &'a Scored {
    let mut best = &scored[0];
    for s in &scored[1..] {
        let scale = best.score.abs().max(s.score.abs()).max(f64::MIN_POSITIVE);
        let better = if (s.score - best.score).abs() <= TIE_TOLERANCE * scale {
            let (a, b) = (&options[s.option], &options[best.option]);
            a.distance_thz > b.distance_thz + 1e-9
                || ((a.distance_thz - b.distance_thz).abs() <= 1e-9
                    && (a.index, a.direction_rank) < (b.index, b.direction_rank))
        } else {
            s.score < best.score
        };
        if better {
            best = s;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::{null_key_threshold, CvqkdSystem};
    use crate::noise::{MuxSpec, RamanProfile};
    use crate::units::FiberLink;

    fn scenario(km: f64, v_a: f64) -> CoexistenceScenario {
        let mut s = CoexistenceScenario::new(
            CvqkdSystem {
                v_a,
                ..CvqkdSystem::default()
            },
            FiberLink::with_length(km),
            RamanProfile::flat(3e-9, 1531.12).unwrap(),
        );
        s.mux = MuxSpec {
            insertion_loss_db: 0.5,
            ..MuxSpec::default()
        };
        s
    }

    fn raman_only(mut s: CoexistenceScenario) -> CoexistenceScenario {
        s.sources = Some(vec!["sasrs_fwd".into(), "sasrs_bwd".into(), "system".into()]);
        s
    }

    #[test]
    fn tie_break_is_fully_determined() {
        let s = raman_only(scenario(50.0, 2.0));
        let mut req = AllocationRequest::new(s, PowerDbm(-10.0), PowerDbm(-10.0));
        req.mode = AllocationMode::FixedPairs(4);
        let r = allocate(&req).unwrap();
        let idx: Vec<i32> = r.chosen.iter().map(|c| c.itu.index).collect();
        // flat profile: every slot costs the same, so the farthest slots go first
        assert_eq!(idx, vec![12, 12, 13, 13, 14, 14, 15, 15]);
        assert_eq!(r, allocate(&req).unwrap());
    }

    #[test]
    fn cumulative_matches_independent_budget() {
        let s = scenario(25.0, 3.5);
        let req = AllocationRequest::new(s.clone(), PowerDbm(2.0), PowerDbm(1.0));
        let r = allocate(&req).unwrap();
        assert!(r.pairs_placed > 0);
        for (k, c) in r.chosen.iter().enumerate() {
            let prefix: Vec<WdmChannel> = r.chosen[..=k]
                .iter()
                .map(|p| WdmChannel::new(p.itu.index, p.direction, if p.direction == Direction::Forward { PowerDbm(2.0) } else { PowerDbm(1.0) }).unwrap())
                .collect();
            let truth = total_noise_budget(&s.with_channels(prefix), Reference::AtAlice).unwrap().total.value;
            assert!((c.cumulative_xi.value - truth).abs() <= 1e-9 * truth);
        }
        for w in r.chosen.windows(2) {
            assert!(w[1].cumulative_xi.value > w[0].cumulative_xi.value);
        }
        assert_eq!(r.feasible, r.key_rate_final.positive);
    }

    #[test]
    fn max_pairs_stops_before_rate_turns_negative() {
        let s = scenario(50.0, 2.0);
        let r = allocate(&AllocationRequest::new(s.clone(), PowerDbm(-10.0), PowerDbm(-10.0))).unwrap();
        assert!(r.feasible);
        let mut req = AllocationRequest::new(s, PowerDbm(-10.0), PowerDbm(-10.0));
        req.mode = AllocationMode::FixedPairs(r.pairs_placed + 1);
        let over = allocate(&req).unwrap();
        assert!(!over.feasible);
        assert_eq!(over.pairs_placed, r.pairs_placed + 1);
    }

    #[test]
    fn exhausted_budget() {
        let mut s = scenario(25.0, 3.5);
        let th = null_key_threshold(&s.system, s.channel_transmission()).unwrap().value;
        s.system.xi_system = ShotNoiseUnits::at_alice(th * (1.0 + 1e-6));
        assert!(matches!(
            allocate(&AllocationRequest::new(s.clone(), PowerDbm(0.0), PowerDbm(0.0))),
            Err(Error::InfeasibleBaseline { .. })
        ));
        let mut req = AllocationRequest::new(s.clone(), PowerDbm(0.0), PowerDbm(0.0));
        req.mode = AllocationMode::FixedPairs(3);
        let r = allocate(&req).unwrap();
        assert_eq!((r.pairs_placed, r.feasible), (0, false));
        assert!(r.chosen.is_empty() && !r.warnings.is_empty());
        // just below the threshold: MaxPairs finds no room, FixedPairs overshoots
        s.system.xi_system = ShotNoiseUnits::at_alice(th * (1.0 - 1e-9));
        let r = allocate(&AllocationRequest::new(s.clone(), PowerDbm(0.0), PowerDbm(0.0))).unwrap();
        assert_eq!(r.pairs_placed, 0);
        assert!(r.feasible);
        let mut req = AllocationRequest::new(s, PowerDbm(0.0), PowerDbm(0.0));
        req.mode = AllocationMode::FixedPairs(1);
        let r = allocate(&req).unwrap();
        assert_eq!(r.pairs_placed, 1);
        assert!(!r.feasible);
    }

    #[test]
    fn more_power_never_places_more_pairs() {
        let s = scenario(50.0, 2.0);
        let mut prev = usize::MAX;
        for p in [-16.0, -13.0, -10.0, -7.0, -4.0] {
            let n = allocate(&AllocationRequest::new(s.clone(), PowerDbm(p), PowerDbm(p))).unwrap().pairs_placed;
            assert!(n <= prev, "{p} dBm: {n} > {prev}");
            prev = n;
        }
    }

    #[test]
    fn max_noise_places_no_more_than_min_noise() {
        let s = scenario(25.0, 3.5);
        let mut req = AllocationRequest::new(s, PowerDbm(2.0), PowerDbm(1.0));
        let min = allocate(&req).unwrap().pairs_placed;
        req.objective = "max_noise".into();
        let max = allocate(&req).unwrap().pairs_placed;
        assert!(max <= min, "{max} > {min}");
    }

    #[test]
    fn single_placement_can_reuse_slot_in_other_direction() {
        let s = raman_only(scenario(50.0, 2.0));
        let mut req = AllocationRequest::new(s, PowerDbm(-10.0), PowerDbm(-10.0));
        req.placement = Placement::Single;
        req.mode = AllocationMode::FixedPairs(3);
        let r = allocate(&req).unwrap();
        // forward Raman is weaker than backward at 50 km, so forward slots fill first
        assert!(r.chosen.iter().all(|c| c.direction == Direction::Forward));
        assert_eq!(r.chosen.len(), 3);
    }

    #[test]
    fn rejects_bad_candidates() {
        let s = scenario(25.0, 3.5);
        let mut req = AllocationRequest::new(s, PowerDbm(0.0), PowerDbm(0.0));
        req.candidate_indices = vec![20, 58];
        assert!(allocate(&req).is_err());
        req.candidate_indices = vec![20, 20];
        assert!(allocate(&req).is_err());
        req.candidate_indices = vec![];
        assert!(allocate(&req).is_err());
        req.candidate_indices = vec![20];
        req.objective = "random".into();
        assert!(matches!(allocate(&req), Err(Error::UnknownStrategy { .. })));
    }

    #[test]
    fn csv_layout() {
        let s = scenario(25.0, 3.5);
        let mut req = AllocationRequest::new(s, PowerDbm(2.0), PowerDbm(1.0));
        req.candidate_indices = vec![20, 30, 57];
        let r = allocate(&req).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("itu_index,wavelength_nm,role,marginal_xi_n0,cumulative_xi_n0"));
        assert!(text.contains(",quantum,,"));
        assert!(text.lines().last().unwrap().starts_with("58,"));
    }
}
