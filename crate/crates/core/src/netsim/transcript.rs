//! Append-only run transcript: one line per observable step, plus a
//! structured record of every logical send for byte accounting.

use crate::runtime::{kind_name, WireMessage};

/// One logical send (a broadcast counts once, regardless of fan-out).
#[derive(Debug, Clone)]
pub struct SendRecord {
    pub at: u64,
    pub from: String,
    pub to: Vec<String>,
    pub tag: u8,
    pub wire_len: u64,
    /// Bytes of actual file content inside the frame (zero for pure
    /// control messages).
    pub content_len: u64,
}

impl SendRecord {
    /// Protocol overhead carried by this frame.
    pub fn overhead(&self) -> u64 {
        self.wire_len - self.content_len
    }
}

#[derive(Debug, Default, Clone)]
pub struct Transcript {
    pub lines: Vec<String>,
    pub sends: Vec<SendRecord>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    pub fn log_send(&mut self, at: u64, from: &str, to: &[String], message: &WireMessage) {
        let record = SendRecord {
            at,
            from: from.to_owned(),
            to: to.to_vec(),
            tag: message.tag(),
            wire_len: message.bytes.len() as u64,
            content_len: message.content_len(),
        };
        self.lines.push(format!(
            "t={at} send from={from} to={} kind={} bytes={} content={}",
            to.join(","),
            kind_name(record.tag),
            record.wire_len,
            record.content_len,
        ));
        self.sends.push(record);
    }

    pub fn log_event(&mut self, at: u64, party: &str, text: &str) {
        self.lines.push(format!("t={at} event party={party} {text}"));
    }

    pub fn log_adversary(&mut self, at: u64, action: &str, from: &str, to: &str, tag: u8) {
        self.lines.push(format!(
            "t={at} adversary action={action} from={from} to={to} kind={}",
            kind_name(tag)
        ));
    }

    pub fn log_note(&mut self, at: u64, text: &str) {
        self.lines.push(format!("t={at} note {text}"));
    }

    pub fn to_text(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }

    /// Number of lines containing the given substring.
    pub fn count_matching(&self, needle: &str) -> usize {
        self.lines.iter().filter(|l| l.contains(needle)).count()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.count_matching(needle) > 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn send_lines_carry_byte_accounting() {
        let mut t = Transcript::new();
        let msg = WireMessage { bytes: vec![0x02; 100], content: Some(10..90) };
        t.log_send(5, "sp", &["uav-1".into()], &msg);
        t.log_event(6, "uav-1", "segment fetched range=0+100");
        assert_eq!(t.lines[0], "t=5 send from=sp to=uav-1 kind=segment bytes=100 content=80");
        assert_eq!(t.sends[0].overhead(), 20);
        assert!(t.contains("segment fetched"));
        assert_eq!(t.count_matching("t=5"), 1);
        assert!(t.to_text().ends_with('\n'));
    }
}
