//! Scenario runner behind the `aqs` binary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{swap_attack_entangled, transfer_attack_plain, AttackReport, DisputeVerdict};
use crate::error::{Error, Result};
use crate::hardened::CountermeasureSet;
use crate::harness::{parse_key_values, transcript_write, Lab, ParticipantId, Scheme, Transcript};
use crate::qcore::{state_equal, QubitString, DEFAULT_TOLERANCE};
use crate::scheme_entangled::EntangledProtocol;
use crate::scheme_plain::PlainProtocol;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATED: i32 = 2;

/// Session ids reserved per trial inside one combined transcript.
const SESSIONS_PER_TRIAL: u64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackChoice {
    None,
    Swap,
    Transfer,
}

impl FromStr for AttackChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(AttackChoice::None),
            "swap" => Ok(AttackChoice::Swap),
            "transfer" => Ok(AttackChoice::Transfer),
            other => Err(Error::Config(format!("unknown attack {other:?}"))),
        }
    }
}

impl fmt::Display for AttackChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackChoice::None => "none",
            AttackChoice::Swap => "swap",
            AttackChoice::Transfer => "transfer",
        })
    }
}

/// What every trial of a scenario is expected to show.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Honest run: the receiver accepts and recovers the message.
    Accept,
    /// All verifications pass, nothing is detected, the dispute stays open.
    AttackSucceeds,
    /// Deniability is not established.
    AttackPrevented,
    /// The dispute is resolved from the transcript.
    AttackAttributed,
}

impl Expectation {
    /// The default for an attack under a countermeasure set.
    pub fn derived(attack: AttackChoice, cm: CountermeasureSet) -> Self {
        match attack {
            AttackChoice::None => Expectation::Accept,
            _ if cm.prevents_in_flight() => Expectation::AttackPrevented,
            _ if cm.announce_metadata => Expectation::AttackAttributed,
            _ => Expectation::AttackSucceeds,
        }
    }
}

impl FromStr for Expectation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "accept" => Ok(Expectation::Accept),
            "attack_succeeds" | "succeeds" => Ok(Expectation::AttackSucceeds),
            "attack_prevented" | "prevented" => Ok(Expectation::AttackPrevented),
            "attack_attributed" | "attributed" => Ok(Expectation::AttackAttributed),
            other => Err(Error::Config(format!("unknown expectation {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scheme: Scheme,
    pub n_qubits: usize,
    pub seed: u64,
    pub attack: AttackChoice,
    pub countermeasures: CountermeasureSet,
    pub trials: usize,
    pub output_path: PathBuf,
    /// Overrides the derived expectation.
    pub expect: Option<Expectation>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scheme: Scheme::Entangled,
            n_qubits: 4,
            seed: 0,
            attack: AttackChoice::None,
            countermeasures: CountermeasureSet::BASELINE,
            trials: 1,
            output_path: PathBuf::from("transcript.jsonl"),
            expect: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

impl ScenarioConfig {
    /// Applies one `key = value` setting.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scheme" => self.scheme = value.parse()?,
            "n_qubits" | "qubits" => self.n_qubits = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "attack" => self.attack = value.parse()?,
            "countermeasures" | "harden" => self.countermeasures = CountermeasureSet::parse_list(value)?,
            "trials" => self.trials = parse_num(key, value)?,
            "out" | "output_path" => self.output_path = PathBuf::from(value),
            "expect" => self.expect = Some(value.parse()?),
            k if k.starts_with("harden.") => self.countermeasures.set(k, parse_flag(k, value)?)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        for (k, v) in pairs {
            cfg.apply(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses the `key = value` config-file format.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_key_values(text)?;
        Self::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn validate(&self) -> Result<()> {
        match (self.attack, self.scheme) {
            (AttackChoice::Swap, Scheme::Plain) => {
                return Err(Error::Config("the swap attack needs scheme=entangled".into()))
            }
            (AttackChoice::Transfer, Scheme::Entangled) => {
                return Err(Error::Config("the transfer attack needs scheme=plain".into()))
            }
            _ => {}
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_qubits == 0 {
            return Err(Error::Config("n_qubits must be at least 1".into()));
        }
        Ok(())
    }

    pub fn expectation(&self) -> Expectation {
        self.expect
            .unwrap_or_else(|| Expectation::derived(self.attack, self.countermeasures))
    }

    pub fn summary_path(&self) -> PathBuf {
        let mut name = self.output_path.as_os_str().to_owned();
        name.push(".summary.json");
        PathBuf::from(name)
    }
}

/// Per-trial result before aggregation.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub transcript: Transcript,
    pub accepted: bool,
    /// Every recovered message matched what its verifier was handed.
    pub recovered_ok: bool,
    pub report: Option<AttackReport>,
}

impl TrialOutcome {
    pub fn meets(&self, expect: Expectation) -> bool {
        match (expect, &self.report) {
            (Expectation::Accept, _) => self.accepted && self.recovered_ok,
            (_, None) => false,
            (Expectation::AttackSucceeds, Some(r)) => {
                r.deniability_established && !r.dispute.is_resolved()
            }
            (Expectation::AttackPrevented, Some(r)) => !r.deniability_established,
            (Expectation::AttackAttributed, Some(r)) => r.dispute.is_resolved(),
        }
    }
}

fn matches(got: Option<&QubitString>, want: &QubitString) -> Result<bool> {
    match got {
        Some(m) => state_equal(m, want, DEFAULT_TOLERANCE),
        None => Ok(true),
    }
}

/// Runs trial `index` of `cfg` in its own lab.
pub fn run_trial(cfg: &ScenarioConfig, index: usize) -> Result<TrialOutcome> {
    let seed = cfg.seed.wrapping_add(index as u64);
    let base = index as u64 * SESSIONS_PER_TRIAL;
    let mut lab = Lab::with_session_base(cfg.scheme, seed, cfg.countermeasures, base);
    let n = cfg.n_qubits;
    let outcome = match cfg.attack {
        AttackChoice::None => {
            let message = QubitString::random(n, &mut lab.rng)?;
            let verified = match cfg.scheme {
                Scheme::Entangled => EntangledProtocol::run_honest(&mut lab, ParticipantId::Bob, &message)?.1,
                Scheme::Plain => PlainProtocol::run_honest(&mut lab, ParticipantId::Bob, &message)?,
            };
            TrialOutcome {
                accepted: verified.accepted(),
                recovered_ok: matches(verified.recovered(), &message)?,
                transcript: Transcript::default(),
                report: None,
            }
        }
        AttackChoice::Swap => {
            let p_b = QubitString::random(n, &mut lab.rng)?;
            let p_c = QubitString::random(n, &mut lab.rng)?;
            let (report, run) = swap_attack_entangled(&mut lab, &p_b, &p_c)?;
            // Bob ends up with Charlie's message and vice versa.
            let mut recovered_ok = true;
            for o in &run.outcomes {
                let handed = if o.verifier == ParticipantId::Bob { &p_c } else { &p_b };
                recovered_ok &= matches(o.recovered(), handed)?;
            }
            TrialOutcome {
                accepted: run.outcomes.iter().all(|o| o.accepted()),
                recovered_ok,
                transcript: Transcript::default(),
                report: Some(report),
            }
        }
        AttackChoice::Transfer => {
            let message = QubitString::random(n, &mut lab.rng)?;
            let (report, outcome) = transfer_attack_plain(&mut lab, &message)?;
            TrialOutcome {
                accepted: outcome.accepted(),
                recovered_ok: matches(outcome.recovered(), &message)?,
                transcript: Transcript::default(),
                report: Some(report),
            }
        }
    };
    Ok(TrialOutcome {
        transcript: lab.transcript,
        ..outcome
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scheme: Scheme,
    pub attack: AttackChoice,
    pub n_qubits: usize,
    pub seed: u64,
    pub trials: usize,
    pub countermeasures: Vec<String>,
    pub expect: Expectation,
    pub accept_rate: f64,
    pub recovered_rate: f64,
    /// Attack-only aggregates; `None` for honest scenarios.
    pub deniability_rate: Option<f64>,
    pub detection_rate: Option<f64>,
    pub denial_rate: Option<f64>,
    pub resolved_rate: Option<f64>,
    pub unresolvable_rate: Option<f64>,
    /// Indices of trials that missed the expectation.
    pub violations: Vec<usize>,
    pub status: String,
}

impl Summary {
    pub fn exit_code(&self) -> i32 {
        if self.violations.is_empty() {
            EXIT_OK
        } else {
            EXIT_VIOLATED
        }
    }
}

fn rate(count: usize, total: usize) -> f64 {
    count as f64 / total as f64
}

pub fn summarize(cfg: &ScenarioConfig, outcomes: &[TrialOutcome]) -> Summary {
    let total = outcomes.len();
    let expect = cfg.expectation();
    let count = |f: &dyn Fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
    let attack_rate = |f: &dyn Fn(&AttackReport) -> bool| {
        (cfg.attack != AttackChoice::None)
            .then(|| rate(count(&|o| o.report.as_ref().is_some_and(f)), total))
    };
    let violations: Vec<usize> = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.meets(expect))
        .map(|(i, _)| i)
        .collect();
    Summary {
        scheme: cfg.scheme,
        attack: cfg.attack,
        n_qubits: cfg.n_qubits,
        seed: cfg.seed,
        trials: cfg.trials,
        countermeasures: cfg.countermeasures.names().iter().map(|s| s.to_string()).collect(),
        expect,
        accept_rate: rate(count(&|o| o.accepted), total),
        recovered_rate: rate(count(&|o| o.accepted && o.recovered_ok), total),
        deniability_rate: attack_rate(&|r| r.deniability_established),
        detection_rate: attack_rate(&|r| r.arbitrator_detected),
        denial_rate: attack_rate(&|r| r.denied_requests > 0),
        resolved_rate: attack_rate(&|r| r.dispute.is_resolved()),
        unresolvable_rate: attack_rate(&|r| r.dispute == DisputeVerdict::Unresolvable),
        status: if violations.is_empty() { "ok" } else { "violated" }.to_string(),
        violations,
    }
}

/// Runs every trial (in parallel), then merges transcripts in trial order.
pub fn run_trials(cfg: &ScenarioConfig) -> Result<(Transcript, Vec<TrialOutcome>)> {
    cfg.validate()?;
    let mut outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i))
        .collect::<Result<_>>()?;
    let mut merged = Transcript::new(cfg.scheme);
    for (i, o) in outcomes.iter_mut().enumerate() {
        merged.absorb(std::mem::take(&mut o.transcript), &format!("trial{i:04}."));
    }
    Ok((merged, outcomes))
}

pub fn summary_json(summary: &Summary) -> String {
    serde_json::to_string_pretty(summary).expect("summary is plain data")
}

/// Runs the scenario and writes the transcript and `<out>.summary.json`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Summary> {
    let (transcript, outcomes) = run_trials(cfg)?;
    let summary = summarize(cfg, &outcomes);
    write_outputs(cfg, &transcript, &summary)?;
    Ok(summary)
}

fn write_outputs(cfg: &ScenarioConfig, transcript: &Transcript, summary: &Summary) -> Result<()> {
    if let Some(dir) = cfg.output_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    transcript_write(transcript, &cfg.output_path)?;
    fs::write(cfg.summary_path(), summary_json(summary) + "\n")?;
    Ok(())
}

/// Reads a config file in `key = value` form.
pub fn load_config(path: &Path) -> Result<Vec<(String, String)>> {
    parse_key_values(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(pairs: &[(&str, &str)]) -> Result<ScenarioConfig> {
        ScenarioConfig::from_pairs(pairs.iter().copied())
    }

    #[test]
    fn invalid_combinations_rejected() {
        assert!(cfg(&[("scheme", "plain"), ("attack", "swap")]).is_err());
        assert!(cfg(&[("scheme", "entangled"), ("attack", "transfer")]).is_err());
        assert!(cfg(&[("trials", "0")]).is_err());
        assert!(cfg(&[("n_qubits", "0")]).is_err());
        assert!(cfg(&[("colour", "red")]).is_err());
    }

    #[test]
    fn config_text_parses() {
        let c = ScenarioConfig::parse(
            "scheme = plain\nattack = transfer\n# comment\nharden.preregister_receiver = true\ntrials = 3\nout = x.jsonl\n",
        )
        .unwrap();
        assert_eq!(c.scheme, Scheme::Plain);
        assert_eq!(c.trials, 3);
        assert!(c.countermeasures.preregister_receiver);
        assert_eq!(c.expectation(), Expectation::AttackPrevented);
        assert_eq!(c.summary_path(), PathBuf::from("x.jsonl.summary.json"));
    }

    #[test]
    fn derived_expectations() {
        use AttackChoice::*;
        let parse = |s| CountermeasureSet::parse_list(s).unwrap();
        assert_eq!(Expectation::derived(None, parse("all")), Expectation::Accept);
        assert_eq!(Expectation::derived(Swap, parse("none")), Expectation::AttackSucceeds);
        assert_eq!(Expectation::derived(Swap, parse("2")), Expectation::AttackAttributed);
        assert_eq!(Expectation::derived(Transfer, parse("1,2")), Expectation::AttackPrevented);
        assert_eq!(Expectation::derived(Transfer, parse("3")), Expectation::AttackPrevented);
    }

    #[test]
    fn trials_are_deterministic_and_ordered() {
        let c = cfg(&[("attack", "swap"), ("trials", "4"), ("n_qubits", "2"), ("seed", "9")]).unwrap();
        let (a, _) = run_trials(&c).unwrap();
        let (b, _) = run_trials(&c).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let times: Vec<u64> = a.events().iter().map(|e| e.time).collect();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn forced_wrong_expectation_is_a_violation() {
        let c = cfg(&[("trials", "2"), ("n_qubits", "1"), ("expect", "attack_prevented")]).unwrap();
        let (_, outcomes) = run_trials(&c).unwrap();
        let s = summarize(&c, &outcomes);
        assert_eq!(s.violations, vec![0, 1]);
        assert_eq!(s.exit_code(), EXIT_VIOLATED);
        assert_eq!(s.accept_rate, 1.0);
        assert!(s.deniability_rate.is_none());
    }
}
