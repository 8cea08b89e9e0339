//! Line-oriented scenario scripts: declare a protocol run, its parties,
//! misbehaviors, network adversary rules, and post-run assertions — then
//! execute the whole thing deterministically.
//!
//! ```text
//! # direct exchange with a tampering seller
//! protocol sedds
//! seed 7
//! file clip.bin 16384
//! party ue ue-1
//! party uav uav-1
//! behavior uav-1 tamper-content
//! assert payment ue-1 clip.bin refunded
//! assert no-plaintext ue-1
//! ```

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use rand_chacha::ChaCha20Rng;
use rand_core::{Rng, SeedableRng};
use thiserror::Error;

use crate::authority::{AusfService, PaymentState};
use crate::pki::{enroll, Directory, KgcState};
use crate::runtime::{kind_tag, StepOutput};
use crate::sedds::{resale_item, Uav, UavConfig, Ue, UeConfig};
use crate::segds::{Coordinator, GroupConfig, Member, Provider};

use super::adversary::{Action, Rule};
use super::sim::{Party, RunReport, SimConfig, Simulator};

/// Sub-seed domains so file content and key material differ from the
/// network schedule but stay derivable from the one scenario seed.
const SEED_FILE: u64 = 0xF11E;
const SEED_SETUP: u64 = 0x5E71;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("scenario is incomplete: {0}")]
    Incomplete(String),
}

fn perr(line: usize, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse { line, msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Segds,
    Sedds,
}

/// A post-run assertion from an `assert` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Check {
    Completed,
    Aborted,
    Reconstructed(String),
    NoPlaintext(String),
    Excluded(String),
    Blacklisted(String),
    NotBlacklisted(String),
    Payment { payer: String, file: String, state: String },
    Verdict(String),
    MemberMults { id: String, expected: u64 },
    ModexpsTotal(u64),
    Event(String),
    NoEvent(String),
}

/// A fully parsed scenario, ready to build and run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub protocol: Protocol,
    pub seed: u64,
    pub file_name: String,
    pub file_size: u64,
    pub freshness_window_ms: u64,
    pub deadline_ms: u64,
    pub ack_deadline_ms: u64,
    pub link_delay_ms: u64,
    pub step_limit: u64,
    pub prepay_percent: u8,
    pub offense_threshold: u32,
    pub coordinator: Option<String>,
    pub members: Vec<String>,
    pub provider: Option<String>,
    pub ue: Option<String>,
    pub uav: Option<String>,
    pub weights: Option<Vec<u64>>,
    pub behaviors: BTreeMap<String, Vec<String>>,
    pub rules: Vec<Rule>,
    pub checks: Vec<Check>,
}

impl Scenario {
    fn empty(protocol: Protocol) -> Self {
        Scenario {
            protocol,
            seed: 1,
            file_name: "data.bin".to_owned(),
            file_size: 65536,
            freshness_window_ms: crate::segds::DEFAULT_FRESHNESS_WINDOW_MS,
            deadline_ms: crate::segds::DEFAULT_TASK_DEADLINE_MS,
            ack_deadline_ms: crate::sedds::DEFAULT_ACK_DEADLINE_MS,
            link_delay_ms: 10,
            step_limit: 100_000,
            prepay_percent: 20,
            offense_threshold: 1,
            coordinator: None,
            members: Vec::new(),
            provider: None,
            ue: None,
            uav: None,
            weights: None,
            behaviors: BTreeMap::new(),
            rules: Vec::new(),
            checks: Vec::new(),
        }
    }

    /// Ready-made honest group download: coordinator `uav-1`, members
    /// `uav-2..uav-n`, provider `sp`.
    pub fn honest_segds(n: usize, file_size: u64, seed: u64) -> Scenario {
        assert!(n >= 2, "group needs a coordinator and at least one member");
        let mut s = Scenario::empty(Protocol::Segds);
        s.seed = seed;
        s.file_size = file_size;
        s.coordinator = Some("uav-1".to_owned());
        s.members = (2..=n).map(|i| format!("uav-{i}")).collect();
        s.provider = Some("sp".to_owned());
        s
    }

    /// Ready-made honest direct exchange: `ue-1` buys from `uav-1`.
    pub fn honest_sedds(file_size: u64, seed: u64) -> Scenario {
        let mut s = Scenario::empty(Protocol::Sedds);
        s.seed = seed;
        s.file_name = "clip.bin".to_owned();
        s.file_size = file_size;
        s.ue = Some("ue-1".to_owned());
        s.uav = Some("uav-1".to_owned());
        s.provider = Some("sp".to_owned());
        s
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut scenario: Option<Scenario> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let keyword = tokens.next().expect("non-empty line");
            let rest: Vec<&str> = tokens.collect();

            if keyword == "protocol" {
                if scenario.is_some() {
                    return Err(perr(line_no, "protocol declared twice"));
                }
                let protocol = match rest.as_slice() {
                    ["segds"] => Protocol::Segds,
                    ["sedds"] => Protocol::Sedds,
                    _ => return Err(perr(line_no, "expected `protocol segds` or `protocol sedds`")),
                };
                scenario = Some(Scenario::empty(protocol));
                continue;
            }
            let s = scenario
                .as_mut()
                .ok_or_else(|| perr(line_no, "`protocol` must be the first directive"))?;

            match keyword {
                "seed" => s.seed = parse_one(&rest, line_no, "seed")?,
                "freshness-window" => {
                    s.freshness_window_ms = parse_one(&rest, line_no, "freshness-window")?
                }
                "deadline" => s.deadline_ms = parse_one(&rest, line_no, "deadline")?,
                "ack-deadline" => s.ack_deadline_ms = parse_one(&rest, line_no, "ack-deadline")?,
                "delay" => s.link_delay_ms = parse_one(&rest, line_no, "delay")?,
                "step-limit" => s.step_limit = parse_one(&rest, line_no, "step-limit")?,
                "prepay" => s.prepay_percent = parse_one(&rest, line_no, "prepay")?,
                "offense-threshold" => {
                    s.offense_threshold = parse_one(&rest, line_no, "offense-threshold")?
                }
                "file" => match rest.as_slice() {
                    [name, size] => {
                        s.file_name = (*name).to_owned();
                        s.file_size = size
                            .parse()
                            .map_err(|_| perr(line_no, "file size must be an integer"))?;
                    }
                    _ => return Err(perr(line_no, "expected `file <name> <size>`")),
                },
                "party" => match rest.as_slice() {
                    ["coordinator", id] => s.coordinator = Some((*id).to_owned()),
                    ["member", id] => s.members.push((*id).to_owned()),
                    ["provider", id] => s.provider = Some((*id).to_owned()),
                    ["ue", id] => s.ue = Some((*id).to_owned()),
                    ["uav", id] => s.uav = Some((*id).to_owned()),
                    _ => {
                        return Err(perr(
                            line_no,
                            "expected `party <coordinator|member|provider|ue|uav> <id>`",
                        ))
                    }
                },
                "weights" => {
                    let w: Result<Vec<u64>, _> = rest.iter().map(|t| t.parse()).collect();
                    s.weights =
                        Some(w.map_err(|_| perr(line_no, "weights must be integers"))?);
                }
                "behavior" => match rest.as_slice() {
                    [id, flag] => {
                        let known = [
                            "silent",
                            "refuse-hint",
                            "false-claim",
                            "tamper-content",
                            "withhold-and-forge-ack",
                        ];
                        if !known.contains(flag) {
                            return Err(perr(line_no, format!("unknown behavior {flag:?}")));
                        }
                        s.behaviors.entry((*id).to_owned()).or_default().push((*flag).to_owned());
                    }
                    _ => return Err(perr(line_no, "expected `behavior <id> <flag>`")),
                },
                "rule" => s.rules.push(parse_rule(&rest, line_no)?),
                "assert" => s.checks.push(parse_check(&rest, line_no)?),
                other => return Err(perr(line_no, format!("unknown directive {other:?}"))),
            }
        }
        scenario.ok_or(ScenarioError::Incomplete("no `protocol` line".to_owned()))
    }

    /// Deterministic file content for this scenario.
    pub fn file_content(&self) -> Vec<u8> {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed ^ SEED_FILE);
        let mut out = vec![0u8; self.file_size as usize];
        rng.fill_bytes(&mut out);
        out
    }

    pub fn run(&self) -> Result<ScenarioOutcome, ScenarioError> {
        let built = self.build()?;
        Ok(built.run())
    }

    pub fn build(&self) -> Result<BuiltScenario, ScenarioError> {
        match self.protocol {
            Protocol::Segds => self.build_segds(),
            Protocol::Sedds => self.build_sedds(),
        }
    }

    fn build_segds(&self) -> Result<BuiltScenario, ScenarioError> {
        let coordinator = self
            .coordinator
            .clone()
            .ok_or_else(|| ScenarioError::Incomplete("no coordinator".to_owned()))?;
        let provider = self
            .provider
            .clone()
            .ok_or_else(|| ScenarioError::Incomplete("no provider".to_owned()))?;
        if self.members.is_empty() {
            return Err(ScenarioError::Incomplete("no members".to_owned()));
        }

        let mut setup_rng = ChaCha20Rng::seed_from_u64(self.seed ^ SEED_SETUP);
        let mut kgc_state = crate::pki::setup(128, &mut setup_rng);
        kgc_state.set_offense_threshold(self.offense_threshold);
        let kgc = Rc::new(RefCell::new(kgc_state));
        let ausf = Rc::new(RefCell::new(AusfService::new(kgc.clone(), self.prepay_percent)));

        let mut all_ids = vec![coordinator.clone()];
        all_ids.extend(self.members.iter().cloned());
        all_ids.push(provider.clone());
        let mut keys = BTreeMap::new();
        for id in &all_ids {
            let key = enroll(&mut kgc.borrow_mut(), id, &mut setup_rng)
                .map_err(|e| ScenarioError::Incomplete(e.to_string()))?;
            keys.insert(id.clone(), key);
        }
        let params = *kgc.borrow().params();
        let dir = Directory::from_kgc(&kgc.borrow(), &all_ids);
        let content = self.file_content();
        ausf.borrow_mut().publish(&self.file_name, &content);

        let mut cfg =
            GroupConfig::new(&coordinator, &self.members, &provider, &self.file_name);
        cfg.weights = self.weights.clone();
        cfg.freshness_window_ms = self.freshness_window_ms;
        cfg.task_deadline_ms = self.deadline_ms;

        let mut parties = Vec::new();
        parties.push(AnyParty::Coordinator(Coordinator::new(
            params,
            keys[&coordinator].clone(),
            cfg.clone(),
            dir.clone(),
            Some(kgc.clone()),
            &mut setup_rng,
        )));
        for m in &self.members {
            let mut member =
                Member::new(params, keys[m].clone(), cfg.clone(), dir.clone());
            if self.has_behavior(m, "silent") {
                member.silent = true;
            }
            parties.push(AnyParty::Member(member));
        }
        let mut files = BTreeMap::new();
        files.insert(self.file_name.clone(), content);
        parties.push(AnyParty::Provider(Provider::new(
            params,
            keys[&provider].clone(),
            dir,
            files,
            self.freshness_window_ms,
            &mut setup_rng,
        )));

        let sim_cfg = SimConfig {
            seed: self.seed,
            link_delay_ms: self.link_delay_ms,
            step_limit: self.step_limit,
        };
        let mut sim = Simulator::new(sim_cfg, parties);
        for rule in &self.rules {
            sim.adversary.add_rule(rule.clone());
        }
        Ok(BuiltScenario { scenario: self.clone(), sim, ausf, kgc, start: coordinator })
    }

    fn build_sedds(&self) -> Result<BuiltScenario, ScenarioError> {
        let ue_id =
            self.ue.clone().ok_or_else(|| ScenarioError::Incomplete("no ue".to_owned()))?;
        let uav_id =
            self.uav.clone().ok_or_else(|| ScenarioError::Incomplete("no uav".to_owned()))?;
        let provider = self.provider.clone().unwrap_or_else(|| "sp".to_owned());

        let mut setup_rng = ChaCha20Rng::seed_from_u64(self.seed ^ SEED_SETUP);
        let mut kgc_state = crate::pki::setup(128, &mut setup_rng);
        kgc_state.set_offense_threshold(self.offense_threshold);
        let kgc = Rc::new(RefCell::new(kgc_state));
        let ausf = Rc::new(RefCell::new(AusfService::new(kgc.clone(), self.prepay_percent)));

        let all_ids = vec![ue_id.clone(), uav_id.clone(), provider.clone()];
        let mut keys = BTreeMap::new();
        for id in &all_ids {
            let key = enroll(&mut kgc.borrow_mut(), id, &mut setup_rng)
                .map_err(|e| ScenarioError::Incomplete(e.to_string()))?;
            keys.insert(id.clone(), key);
        }
        let params = *kgc.borrow().params();
        let dir = Directory::from_kgc(&kgc.borrow(), &all_ids);
        let content = self.file_content();
        ausf.borrow_mut().publish(&self.file_name, &content);

        let mut ue_cfg = UeConfig::new(&uav_id, &self.file_name);
        ue_cfg.freshness_window_ms = self.freshness_window_ms;
        ue_cfg.data_deadline_ms = self.deadline_ms;
        ue_cfg.key_deadline_ms = self.deadline_ms;
        ue_cfg.refuse_hint = self.has_behavior(&ue_id, "refuse-hint");
        ue_cfg.false_claim = self.has_behavior(&ue_id, "false-claim");
        let ue = Ue::new(params, keys[&ue_id].clone(), ue_cfg, dir.clone(), ausf.clone());

        let uav_cfg = UavConfig {
            freshness_window_ms: self.freshness_window_ms,
            ack_deadline_ms: self.ack_deadline_ms,
            tamper_content: self.has_behavior(&uav_id, "tamper-content"),
            withhold_and_forge_ack: self.has_behavior(&uav_id, "withhold-and-forge-ack"),
        };
        // the holder already owns the attested file (from its own earlier
        // download); built here, before the metering window opens
        let item = resale_item(&params, &keys[&provider], &self.file_name, &content, &mut setup_rng);
        let mut items = BTreeMap::new();
        items.insert(self.file_name.clone(), item);
        let uav =
            Uav::new(params, keys[&uav_id].clone(), uav_cfg, dir, items, ausf.clone());

        let sim_cfg = SimConfig {
            seed: self.seed,
            link_delay_ms: self.link_delay_ms,
            step_limit: self.step_limit,
        };
        let mut sim = Simulator::new(sim_cfg, vec![AnyParty::Ue(ue), AnyParty::Uav(uav)]);
        for rule in &self.rules {
            sim.adversary.add_rule(rule.clone());
        }
        Ok(BuiltScenario { scenario: self.clone(), sim, ausf, kgc, start: ue_id })
    }

    fn has_behavior(&self, id: &str, flag: &str) -> bool {
        self.behaviors.get(id).is_some_and(|flags| flags.iter().any(|f| f == flag))
    }
}

fn parse_one<T: std::str::FromStr>(
    rest: &[&str],
    line: usize,
    what: &str,
) -> Result<T, ScenarioError> {
    match rest {
        [v] => v.parse().map_err(|_| perr(line, format!("bad value for {what}"))),
        _ => Err(perr(line, format!("expected `{what} <value>`"))),
    }
}

fn parse_rule(rest: &[&str], line: usize) -> Result<Rule, ScenarioError> {
    let action_token =
        rest.first().ok_or_else(|| perr(line, "rule needs an action"))?;
    let (name, value) = match action_token.split_once('=') {
        Some((n, v)) => (n, Some(v)),
        None => (*action_token, None),
    };
    let parse_val = |v: Option<&str>| -> Result<u64, ScenarioError> {
        v.ok_or_else(|| perr(line, format!("{name} needs =<value>")))?
            .parse()
            .map_err(|_| perr(line, format!("bad value for {name}")))
    };
    let mut action = match name {
        "drop" => Action::Drop,
        "delay-ms" => Action::DelayMs(parse_val(value)?),
        "tamper-content" => Action::TamperContent,
        "tamper-at" => Action::TamperAt(parse_val(value)? as usize),
        "replay" => Action::Replay { after_ms: 1000 },
        other => return Err(perr(line, format!("unknown rule action {other:?}"))),
    };
    let mut rule = Rule::new(action);
    for token in &rest[1..] {
        let Some((k, v)) = token.split_once('=') else {
            return Err(perr(line, format!("expected key=value, got {token:?}")));
        };
        match k {
            "from" => rule.from = Some(v.to_owned()),
            "to" => rule.to = Some(v.to_owned()),
            "kind" => {
                rule.kind =
                    Some(kind_tag(v).ok_or_else(|| {
                        perr(line, format!("unknown message kind {v:?}"))
                    })?)
            }
            "count" => {
                rule.count =
                    Some(v.parse().map_err(|_| perr(line, "bad value for count"))?)
            }
            "after-ms" => {
                if let Action::Replay { after_ms } = &mut action {
                    *after_ms = v
                        .parse()
                        .map_err(|_| perr(line, "bad value for after-ms"))?;
                    rule.action = action;
                } else {
                    return Err(perr(line, "after-ms only applies to replay"));
                }
            }
            other => return Err(perr(line, format!("unknown rule key {other:?}"))),
        }
    }
    Ok(rule)
}

fn parse_check(rest: &[&str], line: usize) -> Result<Check, ScenarioError> {
    let check = match rest {
        ["completed"] => Check::Completed,
        ["aborted"] => Check::Aborted,
        ["reconstructed", id] => Check::Reconstructed((*id).to_owned()),
        ["no-plaintext", id] => Check::NoPlaintext((*id).to_owned()),
        ["excluded", id] => Check::Excluded((*id).to_owned()),
        ["blacklisted", id] => Check::Blacklisted((*id).to_owned()),
        ["not-blacklisted", id] => Check::NotBlacklisted((*id).to_owned()),
        ["payment", payer, file, state] => {
            let state = (*state).to_owned();
            if !["none", "prepaid", "settled", "refunded"].contains(&state.as_str()) {
                return Err(perr(line, format!("unknown payment state {state:?}")));
            }
            Check::Payment { payer: (*payer).to_owned(), file: (*file).to_owned(), state }
        }
        ["verdict", outcome] => {
            let o = (*outcome).to_owned();
            if !["successful-transfer", "failed-connection", "invalid-claim"]
                .contains(&o.as_str())
            {
                return Err(perr(line, format!("unknown verdict {o:?}")));
            }
            Check::Verdict(o)
        }
        ["member-mults", id, n] => Check::MemberMults {
            id: (*id).to_owned(),
            expected: n.parse().map_err(|_| perr(line, "bad count"))?,
        },
        ["modexps-total", n] => {
            Check::ModexpsTotal(n.parse().map_err(|_| perr(line, "bad count"))?)
        }
        ["event", tail @ ..] if !tail.is_empty() => Check::Event(tail.join(" ")),
        ["no-event", tail @ ..] if !tail.is_empty() => Check::NoEvent(tail.join(" ")),
        _ => return Err(perr(line, format!("unknown assertion {:?}", rest.join(" ")))),
    };
    Ok(check)
}

/// Wraps every concrete role so one simulator type drives them all.
pub enum AnyParty {
    Coordinator(Coordinator),
    Member(Member),
    Provider(Provider),
    Ue(Ue),
    Uav(Uav),
}

impl Party for AnyParty {
    fn id(&self) -> &str {
        match self {
            AnyParty::Coordinator(p) => p.id(),
            AnyParty::Member(p) => p.id(),
            AnyParty::Provider(p) => p.id(),
            AnyParty::Ue(p) => p.id(),
            AnyParty::Uav(p) => p.id(),
        }
    }

    fn on_message(
        &mut self,
        now: u64,
        from: &str,
        bytes: &[u8],
        rng: &mut ChaCha20Rng,
    ) -> StepOutput {
        match self {
            AnyParty::Coordinator(p) => p.on_message(now, from, bytes, rng),
            AnyParty::Member(p) => p.on_message(now, from, bytes, rng),
            AnyParty::Provider(p) => p.on_message(now, from, bytes, rng),
            AnyParty::Ue(p) => p.on_message(now, from, bytes, rng),
            AnyParty::Uav(p) => p.on_message(now, from, bytes, rng),
        }
    }

    fn on_timer(&mut self, now: u64, kind: u32, rng: &mut ChaCha20Rng) -> StepOutput {
        match self {
            AnyParty::Coordinator(p) => p.on_timer(now, kind, rng),
            AnyParty::Member(p) => p.on_timer(now, kind, rng),
            AnyParty::Provider(p) => p.on_timer(now, kind, rng),
            AnyParty::Ue(p) => p.on_timer(now, kind, rng),
            AnyParty::Uav(p) => p.on_timer(now, kind, rng),
        }
    }
}

/// A scenario with its parties constructed but the clock not yet started.
pub struct BuiltScenario {
    pub scenario: Scenario,
    pub sim: Simulator<AnyParty>,
    pub ausf: Rc<RefCell<AusfService>>,
    pub kgc: Rc<RefCell<KgcState>>,
    start: String,
}

impl BuiltScenario {
    /// Meters, starts the initiating party, and runs to quiescence.
    pub fn run(mut self) -> ScenarioOutcome {
        self.sim.start_metering();
        self.sim.kick(&self.start, |party, now, rng| match party {
            AnyParty::Coordinator(c) => c.start(now, rng),
            AnyParty::Ue(u) => u.start(now, rng),
            _ => StepOutput::new(),
        });
        self.sim.run_until_idle();
        let (report, parties) = self.sim.finish();
        ScenarioOutcome {
            scenario: self.scenario,
            report,
            parties,
            ausf: self.ausf,
            kgc: self.kgc,
        }
    }
}

/// One evaluated assertion.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub desc: String,
    pub pass: bool,
    pub got: String,
}

/// Final state of a finished scenario run.
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub report: RunReport,
    pub parties: BTreeMap<String, AnyParty>,
    pub ausf: Rc<RefCell<AusfService>>,
    pub kgc: Rc<RefCell<KgcState>>,
}

impl ScenarioOutcome {
    fn plaintext_of(&self, id: &str) -> Option<Vec<u8>> {
        match self.parties.get(id)? {
            AnyParty::Coordinator(c) => c.reconstructed().cloned(),
            AnyParty::Member(m) => m.reconstructed().cloned(),
            AnyParty::Ue(u) => u.plaintext().cloned(),
            _ => None,
        }
    }

    fn completed(&self) -> bool {
        self.parties.values().any(|p| match p {
            AnyParty::Coordinator(c) => c.completed(),
            AnyParty::Ue(u) => u.succeeded(),
            _ => false,
        })
    }

    fn aborted(&self) -> bool {
        self.parties.values().any(|p| match p {
            AnyParty::Coordinator(c) => c.aborted(),
            AnyParty::Ue(u) => u.failed(),
            _ => false,
        })
    }

    pub fn evaluate(&self, check: &Check) -> CheckResult {
        let expected_content = self.scenario.file_content();
        let (desc, pass, got): (String, bool, String) = match check {
            Check::Completed => {
                ("completed".to_owned(), self.completed(), format!("completed={}", self.completed()))
            }
            Check::Aborted => {
                ("aborted".to_owned(), self.aborted(), format!("aborted={}", self.aborted()))
            }
            Check::Reconstructed(id) => {
                let got = self.plaintext_of(id);
                let pass = got.as_deref() == Some(expected_content.as_slice());
                (
                    format!("reconstructed {id}"),
                    pass,
                    match got {
                        Some(v) if pass => format!("exact content, {} bytes", v.len()),
                        Some(v) => format!("wrong content, {} bytes", v.len()),
                        None => "no plaintext".to_owned(),
                    },
                )
            }
            Check::NoPlaintext(id) => {
                let got = self.plaintext_of(id);
                (
                    format!("no-plaintext {id}"),
                    got.is_none(),
                    match got {
                        Some(v) => format!("has {} plaintext bytes", v.len()),
                        None => "no plaintext".to_owned(),
                    },
                )
            }
            Check::Excluded(id) => {
                let excluded = matches!(
                    self.parties.get(id.as_str()),
                    Some(AnyParty::Member(m)) if m.excluded()
                );
                (format!("excluded {id}"), excluded, format!("excluded={excluded}"))
            }
            Check::Blacklisted(id) => {
                let b = self.kgc.borrow().is_blacklisted(id);
                (format!("blacklisted {id}"), b, format!("blacklisted={b}"))
            }
            Check::NotBlacklisted(id) => {
                let b = self.kgc.borrow().is_blacklisted(id);
                (format!("not-blacklisted {id}"), !b, format!("blacklisted={b}"))
            }
            Check::Payment { payer, file, state } => {
                let got = self.ausf.borrow().payments.state(payer, file);
                let got_name = match got {
                    None => "none".to_owned(),
                    Some(PaymentState::Prepaid(_)) => "prepaid".to_owned(),
                    Some(PaymentState::Settled) => "settled".to_owned(),
                    Some(PaymentState::Refunded) => "refunded".to_owned(),
                };
                (
                    format!("payment {payer} {file} {state}"),
                    got_name == *state,
                    format!("payment={got_name}"),
                )
            }
            Check::Verdict(outcome) => {
                let ausf = self.ausf.borrow();
                let found = ausf
                    .verdicts()
                    .iter()
                    .any(|v| v.outcome.to_string() == *outcome);
                let all: Vec<String> =
                    ausf.verdicts().iter().map(|v| v.outcome.to_string()).collect();
                (
                    format!("verdict {outcome}"),
                    found,
                    format!("verdicts=[{}]", all.join(",")),
                )
            }
            Check::MemberMults { id, expected } => {
                let got = self
                    .report
                    .ledger
                    .as_ref()
                    .map(|l| l.party(id).scalar_mults)
                    .unwrap_or(0);
                (
                    format!("member-mults {id} {expected}"),
                    got == *expected,
                    format!("scalar-mults={got}"),
                )
            }
            Check::ModexpsTotal(expected) => {
                let got =
                    self.report.ledger.as_ref().map(|l| l.total.modexps).unwrap_or(0);
                (format!("modexps-total {expected}"), got == *expected, format!("modexps={got}"))
            }
            Check::Event(needle) => {
                let n = self.report.transcript.count_matching(needle);
                (format!("event {needle}"), n > 0, format!("matches={n}"))
            }
            Check::NoEvent(needle) => {
                let n = self.report.transcript.count_matching(needle);
                (format!("no-event {needle}"), n == 0, format!("matches={n}"))
            }
        };
        CheckResult { desc, pass, got }
    }

    /// Evaluates every `assert` line from the scenario.
    pub fn check_all(&self) -> Vec<CheckResult> {
        self.scenario.checks.iter().map(|c| self.evaluate(c)).collect()
    }

    pub fn all_passed(&self) -> bool {
        self.check_all().iter().all(|r| r.pass)
    }

    /// Renders the transcript, cost table, assertion results, and run
    /// summary as one text report. Returns the report together with the
    /// number of failed assertions so callers can pick an exit status.
    pub fn report_text(&self) -> (String, usize) {
        use std::fmt::Write as _;
        let mut report = String::new();
        let _ = writeln!(report, "# transcript (seed {})", self.scenario.seed);
        report.push_str(&self.report.transcript.to_text());
        if let Some(ledger) = &self.report.ledger {
            let _ = writeln!(report, "# costs");
            report.push_str(&ledger.to_text());
        }
        let results = self.check_all();
        if !results.is_empty() {
            let _ = writeln!(report, "# assertions");
            for r in &results {
                let _ = writeln!(
                    report,
                    "{} {} (got {})",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.desc,
                    r.got
                );
            }
        }
        let failed = results.iter().filter(|r| !r.pass).count();
        let _ = writeln!(
            report,
            "# outcome steps={} final-time={} assertions-failed={failed}",
            self.report.steps, self.report.final_time
        );
        (report, failed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip_of_a_full_script() {
        let text = "\
# comment line
protocol segds
seed 42
file data.bin 1024   # trailing comment
freshness-window 20000
deadline 5000
delay 15
step-limit 500
party coordinator uav-1
party member uav-2
party member uav-3
party provider sp
weights 2 1 1
behavior uav-3 silent
rule drop from=sp to=uav-2 kind=segment count=1
rule replay after-ms=40 kind=share
assert completed
assert reconstructed uav-2
assert blacklisted uav-3
assert payment ue-1 data.bin none
assert event deadline expired
assert no-event reason=bad-signature
assert member-mults uav-2 23
assert modexps-total 2
";
        let s = Scenario::parse(text).unwrap();
        assert_eq!(s.protocol, Protocol::Segds);
        assert_eq!(s.seed, 42);
        assert_eq!(s.file_size, 1024);
        assert_eq!(s.freshness_window_ms, 20000);
        assert_eq!(s.deadline_ms, 5000);
        assert_eq!(s.link_delay_ms, 15);
        assert_eq!(s.step_limit, 500);
        assert_eq!(s.members, vec!["uav-2", "uav-3"]);
        assert_eq!(s.weights, Some(vec![2, 1, 1]));
        assert!(s.behaviors["uav-3"].contains(&"silent".to_owned()));
        assert_eq!(s.rules.len(), 2);
        assert_eq!(s.rules[0].action, Action::Drop);
        assert_eq!(s.rules[0].kind, Some(crate::segds::messages::TAG_SEGMENT));
        assert_eq!(s.rules[1].action, Action::Replay { after_ms: 40 });
        assert_eq!(s.checks.len(), 8);
        assert_eq!(s.checks[4], Check::Event("deadline expired".to_owned()));
    }

    #[test]
    fn parse_rejects_malformed_lines() {
        for (text, needle) in [
            ("seed 1\n", "protocol"),
            ("protocol segds\nprotocol sedds\n", "twice"),
            ("protocol what\n", "expected"),
            ("protocol segds\nparty pilot x\n", "party"),
            ("protocol segds\nrule explode\n", "unknown rule action"),
            ("protocol segds\nrule drop kind=warp\n", "unknown message kind"),
            ("protocol segds\nassert vibes\n", "unknown assertion"),
            ("protocol segds\nbehavior uav-2 lazy\n", "unknown behavior"),
        ] {
            let err = Scenario::parse(text).unwrap_err().to_string();
            assert!(err.contains(needle), "error {err:?} should mention {needle:?}");
        }
    }

    #[test]
    fn file_content_is_seed_stable() {
        let a = Scenario::honest_segds(3, 256, 9).file_content();
        let b = Scenario::honest_segds(3, 256, 9).file_content();
        let c = Scenario::honest_segds(3, 256, 10).file_content();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 256);
    }

    /// Panics with the failing checks plus the full transcript, so a broken
    /// protocol flow is diagnosable straight from the test output.
    fn assert_checks(outcome: &ScenarioOutcome, checks: &[Check]) {
        let failed: Vec<String> = checks
            .iter()
            .map(|c| outcome.evaluate(c))
            .filter(|r| !r.pass)
            .map(|r| format!("  FAIL {} (got {})", r.desc, r.got))
            .collect();
        assert!(
            failed.is_empty(),
            "checks failed:\n{}\n--- transcript ---\n{}",
            failed.join("\n"),
            outcome.report.transcript.to_text()
        );
    }

    fn ck(text: &str) -> Check {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        parse_check(&tokens, 0).expect("test check parses")
    }

    #[test]
    fn honest_group_download_completes_with_pinned_costs() {
        let outcome = Scenario::honest_segds(3, 4096, 11).run().unwrap();
        assert!(!outcome.report.truncated);
        assert_checks(
            &outcome,
            &[
                ck("completed"),
                ck("reconstructed uav-1"),
                ck("reconstructed uav-2"),
                ck("reconstructed uav-3"),
                ck("no-event reject kind="),
                ck("member-mults uav-2 23"),
                ck("member-mults uav-3 23"),
                ck("modexps-total 2"),
                ck("event session established"),
                ck("event share broadcast"),
                ck("payment uav-1 data.bin none"),
            ],
        );
        let ledger = outcome.report.ledger.as_ref().unwrap();
        assert_eq!(ledger.party("uav-1").scalar_mults, 29, "coordinator: 9n+2 at n=3");
        assert_eq!(ledger.party("sp").scalar_mults, 16, "provider: 4n+4 at n=3");
        // 3 segment encrypts + 9 reconstruct decrypts (3 downloaders x 3
        // segments) + 2 key boxes wrapped + 2 unwrapped
        assert_eq!(ledger.total.sym_cipher_calls, 3 + 9 + 2 + 2);
    }

    #[test]
    fn honest_direct_exchange_settles_with_pinned_costs() {
        let outcome = Scenario::honest_sedds(2048, 13).run().unwrap();
        assert_checks(
            &outcome,
            &[
                ck("completed"),
                ck("reconstructed ue-1"),
                ck("payment ue-1 clip.bin settled"),
                ck("verdict successful-transfer"),
                ck("no-event reject kind="),
                ck("not-blacklisted uav-1"),
                ck("event prepaid"),
                ck("event key released"),
                ck("event content accepted"),
                ck("modexps-total 4"),
            ],
        );
        let ledger = outcome.report.ledger.as_ref().unwrap();
        assert_eq!(ledger.party("ue-1").scalar_mults, 12, "buyer side of the exchange");
        assert_eq!(ledger.party("uav-1").scalar_mults, 8, "seller side of the exchange");
        assert_eq!(ledger.party("ausf").scalar_mults, 3, "adjudicator verifies one ack");
        assert_eq!(ledger.party("ue-1").modexps, 2);
        assert_eq!(ledger.party("uav-1").modexps, 2);
        assert_eq!(ledger.total.sym_cipher_calls, 2, "one encrypt, one decrypt");
    }

    #[test]
    fn free_rider_is_blacklisted_reassigned_and_locked_out() {
        let mut s = Scenario::honest_segds(3, 4096, 17);
        s.behaviors.insert("uav-3".to_owned(), vec!["silent".to_owned()]);
        let outcome = s.run().unwrap();
        assert_checks(
            &outcome,
            &[
                ck("completed"),
                ck("reconstructed uav-1"),
                ck("reconstructed uav-2"),
                ck("blacklisted uav-3"),
                ck("not-blacklisted uav-2"),
                ck("excluded uav-3"),
                ck("no-plaintext uav-3"),
                ck("event deadline expired"),
                ck("event blacklist member=uav-3"),
                ck("event reassign"),
                ck("event excluded from key release"),
            ],
        );
    }

    #[test]
    fn tampering_seller_is_detected_and_refunded_against() {
        let mut s = Scenario::honest_sedds(1024, 19);
        s.behaviors.insert("uav-1".to_owned(), vec!["tamper-content".to_owned()]);
        let outcome = s.run().unwrap();
        assert_checks(
            &outcome,
            &[
                ck("aborted"),
                ck("no-plaintext ue-1"),
                ck("payment ue-1 clip.bin refunded"),
                ck("verdict failed-connection"),
                ck("event content tampered behavior=tamper-content"),
                ck("event provider attestation failed"),
                ck("event dispute outcome=failed-connection"),
            ],
        );
    }

    #[test]
    fn buyer_refusing_receipt_pays_nothing_and_gets_no_key() {
        let mut s = Scenario::honest_sedds(1024, 23);
        s.behaviors.insert("ue-1".to_owned(), vec!["refuse-hint".to_owned()]);
        let outcome = s.run().unwrap();
        assert_checks(
            &outcome,
            &[
                ck("no-plaintext ue-1"),
                ck("payment ue-1 clip.bin none"),
                ck("event receipt refused"),
                ck("no-event key released"),
                ck("no-event verdict"),
            ],
        );
    }

    #[test]
    fn withholding_seller_forfeits_payment_and_gets_blacklisted() {
        let mut s = Scenario::honest_sedds(1024, 29);
        s.behaviors
            .insert("uav-1".to_owned(), vec!["withhold-and-forge-ack".to_owned()]);
        let outcome = s.run().unwrap();
        assert_checks(
            &outcome,
            &[
                ck("aborted"),
                ck("no-plaintext ue-1"),
                ck("payment ue-1 clip.bin refunded"),
                ck("verdict failed-connection"),
                ck("verdict invalid-claim"),
                ck("blacklisted uav-1"),
                ck("event key withheld"),
                ck("event ack forged"),
                ck("event key deadline expired"),
            ],
        );
    }

    #[test]
    fn false_failure_claim_after_settlement_is_invalid_and_penalized() {
        let mut s = Scenario::honest_sedds(1024, 53);
        s.behaviors.insert("ue-1".to_owned(), vec!["false-claim".to_owned()]);
        let outcome = s.run().unwrap();
        assert_checks(
            &outcome,
            &[
                ck("completed"),
                ck("reconstructed ue-1"),
                ck("payment ue-1 clip.bin settled"),
                ck("verdict successful-transfer"),
                ck("verdict invalid-claim"),
                ck("blacklisted ue-1"),
                ck("event false failure claim filed"),
                ck("event dispute outcome=invalid-claim detail=already-settled"),
            ],
        );
    }

    #[test]
    fn replayed_share_is_deduplicated_without_disrupting_the_run() {
        let mut s = Scenario::honest_segds(3, 2048, 31);
        // replay toward a fellow member: the coordinator finalizes the
        // instant the last share lands, so only members still process
        // late share copies
        s.rules.push(Rule {
            from: Some("uav-2".to_owned()),
            to: Some("uav-3".to_owned()),
            kind: Some(crate::segds::messages::TAG_SHARE),
            count: Some(1),
            action: Action::Replay { after_ms: 40 },
        });
        let outcome = s.run().unwrap();
        assert_checks(
            &outcome,
            &[
                ck("completed"),
                ck("reconstructed uav-1"),
                ck("reconstructed uav-3"),
                ck("event reason=duplicate"),
                ck("no-event reason=stale-timestamp"),
            ],
        );
    }

    #[test]
    fn replayed_request_cannot_reopen_or_double_charge_a_session() {
        // in-window replay: suppressed as a duplicate
        let mut s = Scenario::honest_sedds(512, 37);
        s.rules.push(Rule {
            from: Some("ue-1".to_owned()),
            to: Some("uav-1".to_owned()),
            kind: Some(crate::sedds::messages::TAG_REQUEST),
            count: Some(1),
            action: Action::Replay { after_ms: 200 },
        });
        let outcome = s.run().unwrap();
        assert_checks(
            &outcome,
            &[
                ck("completed"),
                ck("payment ue-1 clip.bin settled"),
                ck("event kind=request from=ue-1 reason=duplicate"),
            ],
        );
        let sent = outcome.report.transcript.count_matching("event party=uav-1 ciphertext sent");
        assert_eq!(sent, 1, "only one data response despite two request copies");

        // replay landing outside the freshness window: rejected as stale
        let mut s = Scenario::honest_sedds(512, 37);
        s.rules.push(Rule {
            from: Some("ue-1".to_owned()),
            to: Some("uav-1".to_owned()),
            kind: Some(crate::sedds::messages::TAG_REQUEST),
            count: Some(1),
            action: Action::Replay { after_ms: 40_000 },
        });
        let outcome = s.run().unwrap();
        assert_checks(
            &outcome,
            &[
                ck("completed"),
                ck("event kind=request from=ue-1 reason=stale-timestamp"),
                ck("no-event reason=duplicate"),
            ],
        );
    }

    #[test]
    fn dropped_segment_recovers_via_round_reassignment() {
        let mut s = Scenario::honest_segds(3, 2048, 41);
        s.rules.push(Rule {
            from: Some("sp".to_owned()),
            to: Some("uav-2".to_owned()),
            kind: Some(crate::segds::messages::TAG_SEGMENT),
            count: Some(1),
            action: Action::Drop,
        });
        let outcome = s.run().unwrap();
        // the coordinator cannot tell a lossy link from a shirking member:
        // uav-2 misses the deadline, is cut out, and the survivors finish
        assert_checks(
            &outcome,
            &[
                ck("completed"),
                ck("reconstructed uav-1"),
                ck("reconstructed uav-3"),
                ck("blacklisted uav-2"),
                ck("event deadline expired"),
                ck("event reassign"),
            ],
        );
    }

    #[test]
    fn transcripts_are_deterministic_per_seed() {
        let a = Scenario::honest_segds(3, 1024, 43).run().unwrap();
        let b = Scenario::honest_segds(3, 1024, 43).run().unwrap();
        assert_eq!(
            a.report.transcript.to_text(),
            b.report.transcript.to_text(),
            "same seed must give a byte-identical transcript"
        );
        let c = Scenario::honest_sedds(512, 47).run().unwrap();
        let d = Scenario::honest_sedds(512, 47).run().unwrap();
        assert_eq!(c.report.transcript.to_text(), d.report.transcript.to_text());
        let e = Scenario::honest_sedds(512, 48).run().unwrap();
        assert_ne!(
            c.report.transcript.to_text(),
            e.report.transcript.to_text(),
            "different seed, different key material and ciphertext lengths"
        );
    }

    #[test]
    fn scripted_scenario_runs_end_to_end() {
        let text = "\
protocol sedds
seed 51
file clip.bin 900
party ue ue-1
party uav uav-1
behavior uav-1 tamper-content
assert aborted
assert payment ue-1 clip.bin refunded
assert verdict failed-connection
assert no-plaintext ue-1
";
        let outcome = Scenario::parse(text).unwrap().run().unwrap();
        let results = outcome.check_all();
        assert_eq!(results.len(), 4);
        assert!(
            outcome.all_passed(),
            "script checks failed: {:?}\n{}",
            results.iter().filter(|r| !r.pass).collect::<Vec<_>>(),
            outcome.report.transcript.to_text()
        );
    }
}
