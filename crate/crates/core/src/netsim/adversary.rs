//! Scripted network adversary: drops, delays, tampers, and replays
//! in-flight frames. Rules are applied per delivery copy, first match
//! wins, and each rule can carry a bounded use count.

/// What to do with a matched delivery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Drop,
    DelayMs(u64),
    /// Flip one bit inside the frame's content span (the carried file
    /// bytes), leaving headers and signatures intact on the wire.
    TamperContent,
    /// Flip one bit at the given byte offset (mod frame length).
    TamperAt(usize),
    /// Deliver normally, then deliver an identical copy later.
    Replay { after_ms: u64 },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Drop => "drop",
            Action::DelayMs(_) => "delay",
            Action::TamperContent => "tamper-content",
            Action::TamperAt(_) => "tamper-at",
            Action::Replay { .. } => "replay",
        }
    }
}

/// Match criteria plus an action; `None` fields match anything.
#[derive(Debug, Clone)]
pub struct Rule {
    pub from: Option<String>,
    pub to: Option<String>,
    pub kind: Option<u8>,
    /// How many deliveries this rule may consume (`None` = unlimited).
    pub count: Option<u32>,
    pub action: Action,
}

impl Rule {
    pub fn new(action: Action) -> Self {
        Rule { from: None, to: None, kind: None, count: None, action }
    }

    fn matches(&self, from: &str, to: &str, tag: u8) -> bool {
        self.from.as_deref().is_none_or(|f| f == from)
            && self.to.as_deref().is_none_or(|t| t == to)
            && self.kind.is_none_or(|k| k == tag)
            && self.count.is_none_or(|c| c > 0)
    }
}

#[derive(Debug, Default, Clone)]
pub struct AdversaryScript {
    rules: Vec<Rule>,
}

impl AdversaryScript {
    pub fn none() -> Self {
        AdversaryScript::default()
    }

    pub fn add_rule(&mut self, rule: Rule) -> &mut Self {
        self.rules.push(rule);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// First matching rule decides; consumes one use of a counted rule.
    pub fn decide(&mut self, from: &str, to: &str, tag: u8) -> Option<Action> {
        let rule = self.rules.iter_mut().find(|r| r.matches(from, to, tag))?;
        if let Some(c) = rule.count.as_mut() {
            *c -= 1;
        }
        Some(rule.action)
    }
}

/// Flips the low bit of one byte, choosing the offset from the action.
pub fn apply_tamper(bytes: &mut [u8], content: Option<&std::ops::Range<usize>>, action: Action) {
    match action {
        Action::TamperContent => {
            // prefer the content span; fall back to the frame's last byte
            // (still inside a signed region) when there is none
            let idx = match content {
                Some(r) if !r.is_empty() => r.start + r.len() / 2,
                _ => bytes.len().saturating_sub(1),
            };
            if let Some(b) = bytes.get_mut(idx) {
                *b ^= 0x01;
            }
        }
        Action::TamperAt(offset) => {
            // index into the content span when the frame has one, so an
            // offset sweep exercises the ciphertext region specifically
            let (base, len) = match content {
                Some(r) if !r.is_empty() => (r.start, r.len()),
                _ => (0, bytes.len()),
            };
            if len > 0 {
                bytes[base + offset % len] ^= 0x01;
            }
        }
        _ => unreachable!("only tamper actions rewrite bytes"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_matching_rule_wins_and_counts_down() {
        let mut script = AdversaryScript::none();
        script.add_rule(Rule {
            from: Some("sp".into()),
            to: Some("uav-2".into()),
            kind: Some(0x02),
            count: Some(1),
            action: Action::Drop,
        });
        script.add_rule(Rule { from: Some("sp".into()), ..Rule::new(Action::DelayMs(5)) });

        // counted rule consumed exactly once, then the broader rule applies
        assert_eq!(script.decide("sp", "uav-2", 0x02), Some(Action::Drop));
        assert_eq!(script.decide("sp", "uav-2", 0x02), Some(Action::DelayMs(5)));
        // non-matching deliveries pass through
        assert_eq!(script.decide("uav-1", "sp", 0x02), None);
        // different kind from sp still hits the unlimited delay rule
        assert_eq!(script.decide("sp", "uav-3", 0x01), Some(Action::DelayMs(5)));
    }

    #[test]
    fn tamper_targets_content_span_when_present() {
        let mut bytes = vec![0u8; 10];
        apply_tamper(&mut bytes, Some(&(4..8)), Action::TamperContent);
        assert_eq!(bytes[6], 0x01);
        assert_eq!(bytes.iter().filter(|b| **b != 0).count(), 1);

        let mut bytes = vec![0u8; 10];
        apply_tamper(&mut bytes, None, Action::TamperContent);
        assert_eq!(bytes[9], 0x01);

        let mut bytes = vec![0u8; 10];
        apply_tamper(&mut bytes, None, Action::TamperAt(13));
        assert_eq!(bytes[3], 0x01);

        let mut bytes = vec![0u8; 10];
        apply_tamper(&mut bytes, Some(&(4..8)), Action::TamperAt(13));
        assert_eq!(bytes[4 + 13 % 4], 0x01, "offset wraps inside the span");
    }
}
