//! Operation-count and byte accounting for honest protocol runs.
//!
//! Every number here is measured from a deterministic simulation and then
//! checked against two layers of expectation:
//!
//! * closed-form predictions of what this implementation does, exact to
//!   the operation (`predict_*`), and
//! * the analytical reference figures the protocols were designed
//!   against, matched within a factor-two band because the reference
//!   tally abstracts away bookkeeping this implementation performs
//!   explicitly (verify-key derivation, arbiter-side checks).
//!
//! The byte metrics deliberately exclude file content: they sum the
//! framing, signatures, and key material that one pass of each protocol
//! puts on the wire, which is the part that stays near-constant as the
//! file grows.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::crypto::ledger::OpCounts;
use crate::netsim::sim::RunReport;
use crate::netsim::transcript::SendRecord;
use crate::netsim::Scenario;
use crate::segds::messages::{
    TAG_ASSIGN, TAG_CONSOLIDATE, TAG_SEGMENT, TAG_SETUP_ANSWER, TAG_SETUP_OFFER, TAG_SHARE,
};
use crate::sedds::messages::{TAG_ACK, TAG_HINT, TAG_REQUEST};

/// Closed-form operation counts for this implementation's honest runs.
/// `n` is the number of downloaders (coordinator plus members).
pub mod predict {
    /// Member: verify its assignment (3) and its segment (3), sign its
    /// share (1), verify n-1 peer shares at two signatures each (6(n-1)),
    /// verify the consolidation (3), open its key box (1).
    pub fn segds_member_mults(n: u64) -> u64 {
        6 * n + 5
    }

    /// Coordinator: sign the offer (1), verify the answer (3), sign n
    /// assignments (n), verify its own segment (3), sign its own share
    /// (1), verify n-1 member shares (6(n-1)), derive n-1 member verify
    /// keys (n-1), wrap n-1 key boxes plus one shared commitment (n),
    /// sign the consolidation (1).
    pub fn segds_coordinator_mults(n: u64) -> u64 {
        9 * n + 2
    }

    /// Provider: verify the offer (3), sign the answer (1), then per
    /// downloader verify the forwarded assignment (3) and sign the
    /// segment (1).
    pub fn segds_provider_mults(n: u64) -> u64 {
        4 * n + 4
    }

    /// One shared-secret computation on each end of the session-key
    /// agreement; the long-term public shares are precomputed.
    pub const SEGDS_MODEXPS: u64 = 2;

    /// Buyer: sign request (1), verify data (3), sign receipt (1),
    /// verify key release (3), verify origin attestation (3), sign
    /// acknowledgement (1).
    pub const SEDDS_UE_MULTS: u64 = 12;

    /// Seller: verify request (3), sign data (1), verify receipt (3),
    /// sign key release (1). The acknowledgement is forwarded unverified.
    pub const SEDDS_UAV_MULTS: u64 = 8;

    /// Arbiter: verify the buyer's acknowledgement when settling.
    pub const SEDDS_ARBITER_MULTS: u64 = 3;

    /// Both sides generate a fresh exponential and compute the shared
    /// secret inside the session.
    pub const SEDDS_MODEXPS: u64 = 4;

    /// One content encryption, one decryption.
    pub const SEDDS_AEAD_CALLS: u64 = 2;
}

/// Analytical reference figures for the factor-two acceptance band, and
/// the exact measured constants pinned from this implementation.
pub mod reference {
    /// Reference per-member cost at n = 5: 3(2n+3) group multiplications.
    pub const SEGDS_MEMBER_MULTS_N5: u64 = 39;
    /// Measured per-member cost at n = 5 (6n+5); pinned exact.
    pub const SEGDS_MEMBER_MULTS_N5_PINNED: u64 = 35;
    /// Reference end-to-end byte cost of one group-download sequence.
    pub const SEGDS_SEQUENCE_BYTES: u64 = 1500;
    /// Measured framing/signature bytes of one sequence at n = 5;
    /// pinned exact (see `segds_sequence_overhead` for the legs).
    pub const SEGDS_SEQUENCE_BYTES_PINNED: u64 = 1624;

    /// Reference direct-exchange cost: 10 group multiplications across
    /// both ends (plus 2 exponentiations and 2 symmetric calls).
    pub const SEDDS_MULTS: u64 = 10;
    /// Measured buyer+seller multiplications, pinned exact. The
    /// reference tally books signatures at one multiplication and
    /// verifications at two; this implementation performs the
    /// textbook three-multiplication verification and also meters the
    /// buyer's origin-attestation check, landing at 12 + 8.
    pub const SEDDS_MULTS_PINNED: u64 = 20;
    /// Reference exponentiation count; this implementation also meters
    /// the two fresh public-share computations (4 total).
    pub const SEDDS_MODEXPS: u64 = 2;
    /// Reference uplink byte cost of the buyer's three messages.
    pub const SEDDS_UPLINK_BYTES: u64 = 526;
    /// Measured request + receipt + acknowledgement bytes, pinned exact.
    pub const SEDDS_UPLINK_BYTES_PINNED: u64 = 501;
}

/// One measured honest run.
pub struct MeteredRun {
    /// Number of downloaders for the group protocol; 2 for the direct
    /// exchange (buyer and seller).
    pub n: usize,
    pub file_size: u64,
    pub seed: u64,
    pub per_party: BTreeMap<String, OpCounts>,
    pub total: OpCounts,
    /// The protocol's pinned byte metric (see module docs).
    pub overhead_bytes: u64,
    pub report: RunReport,
}

fn split_counts(report: &RunReport) -> (BTreeMap<String, OpCounts>, OpCounts) {
    let ledger = report.ledger.as_ref().expect("metered runs carry a ledger");
    (ledger.per_party.clone(), ledger.total)
}

/// Runs the honest group download and extracts its cost profile.
/// Panics if the run does not complete; metering only measures runs
/// whose outcome is already guaranteed by the protocol tests.
pub fn measure_segds(n: usize, file_size: u64, seed: u64) -> MeteredRun {
    let outcome = Scenario::honest_segds(n, file_size, seed)
        .run()
        .expect("honest scenario builds");
    assert!(
        outcome.report.transcript.count_matching("reconstructed len=") >= n,
        "honest run must complete before it is measured"
    );
    let (per_party, total) = split_counts(&outcome.report);
    let overhead_bytes = segds_sequence_overhead(&outcome.report.transcript.sends)
        .expect("complete run contains every leg");
    MeteredRun {
        n,
        file_size,
        seed,
        per_party,
        total,
        overhead_bytes,
        report: outcome.report,
    }
}

/// Runs the honest direct exchange and extracts its cost profile.
pub fn measure_sedds(file_size: u64, seed: u64) -> MeteredRun {
    let outcome = Scenario::honest_sedds(file_size, seed).run().expect("honest scenario builds");
    assert!(
        outcome.report.transcript.contains("content accepted"),
        "honest run must complete before it is measured"
    );
    let (per_party, total) = split_counts(&outcome.report);
    let ue = outcome.scenario.ue.clone().expect("direct exchange has a buyer");
    let overhead_bytes = sedds_uplink_bytes(&outcome.report.transcript.sends, &ue);
    MeteredRun {
        n: 2,
        file_size,
        seed,
        per_party,
        total,
        overhead_bytes,
        report: outcome.report,
    }
}

/// Sums the non-content bytes of one pass of the group-download message
/// sequence: offer, answer, one assignment out and one forwarded to the
/// provider, one segment, one share, and the consolidation. Returns
/// `None` if any leg is missing from the transcript.
pub fn segds_sequence_overhead(sends: &[SendRecord]) -> Option<u64> {
    let first = |pred: &dyn Fn(&&SendRecord) -> bool| sends.iter().find(|s| pred(&s));
    let provider = first(&|s| s.tag == TAG_SETUP_ANSWER)?.from.clone();
    let coordinator = first(&|s| s.tag == TAG_SETUP_OFFER)?.from.clone();
    let legs: [&SendRecord; 7] = [
        first(&|s| s.tag == TAG_SETUP_OFFER)?,
        first(&|s| s.tag == TAG_SETUP_ANSWER)?,
        // coordinator hands a member its task
        first(&|s| s.tag == TAG_ASSIGN && s.from == coordinator && s.to != [provider.clone()])?,
        // the member forwards it to the provider as fetch authorization
        first(&|s| s.tag == TAG_ASSIGN && s.from != coordinator && s.to == [provider.clone()])?,
        first(&|s| s.tag == TAG_SEGMENT)?,
        first(&|s| s.tag == TAG_SHARE)?,
        first(&|s| s.tag == TAG_CONSOLIDATE)?,
    ];
    Some(legs.iter().map(|s| s.overhead()).sum())
}

/// Total bytes the buyer sends: request, receipt, acknowledgement. None
/// of them carry file content, so this is pure protocol cost.
pub fn sedds_uplink_bytes(sends: &[SendRecord], ue: &str) -> u64 {
    sends
        .iter()
        .filter(|s| s.from == ue && [TAG_REQUEST, TAG_HINT, TAG_ACK].contains(&s.tag))
        .map(|s| s.wire_len)
        .sum()
}

/// Fits `y = c1*x + c0` through integer points and returns the
/// coefficients only if every point lies exactly on the line.
pub fn linear_fit_exact(points: &[(u64, u64)]) -> Option<(i64, i64)> {
    let [(x0, y0), (x1, y1), ..] = points else {
        return None;
    };
    let dx = *x1 as i64 - *x0 as i64;
    let dy = *y1 as i64 - *y0 as i64;
    if dx == 0 || dy % dx != 0 {
        return None;
    }
    let c1 = dy / dx;
    let c0 = *y0 as i64 - c1 * *x0 as i64;
    points
        .iter()
        .all(|&(x, y)| c1 * x as i64 + c0 == y as i64)
        .then_some((c1, c0))
}

/// Human-readable cost table for one or more runs of the same shape.
pub fn report_text(protocol: &str, runs: &[MeteredRun]) -> String {
    let mut out = String::new();
    let Some(head) = runs.first() else {
        return "no runs\n".to_owned();
    };
    let _ = writeln!(
        out,
        "protocol={protocol} n={} file={}B trials={}",
        head.n,
        head.file_size,
        runs.len()
    );
    let consistent = runs.iter().all(|r| {
        r.per_party
            .iter()
            .zip(&head.per_party)
            .all(|((ida, a), (idb, b))| ida == idb && a.scalar_mults == b.scalar_mults)
            && r.overhead_bytes == head.overhead_bytes
    });
    let _ = writeln!(out, "counts-identical-across-trials={consistent}");
    let _ = writeln!(
        out,
        "{:<10} {:>6} {:>8} {:>6} {:>7} {:>11} {:>9}",
        "party", "mults", "modexps", "aead", "adds", "bytes-sent", "overhead"
    );
    for (id, c) in &head.per_party {
        let _ = writeln!(
            out,
            "{:<10} {:>6} {:>8} {:>6} {:>7} {:>11} {:>9}",
            id,
            c.scalar_mults,
            c.modexps,
            c.sym_cipher_calls,
            c.point_adds,
            c.bytes_total,
            c.overhead_bytes()
        );
    }
    let t = &head.total;
    let _ = writeln!(
        out,
        "{:<10} {:>6} {:>8} {:>6} {:>7} {:>11} {:>9}",
        "total",
        t.scalar_mults,
        t.modexps,
        t.sym_cipher_calls,
        t.point_adds,
        t.bytes_total,
        t.overhead_bytes()
    );
    let _ = writeln!(out, "sequence-overhead-bytes={}", head.overhead_bytes);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_download_counts_match_predictions_at_n5() {
        let run = measure_segds(5, 65536, 101);
        assert_eq!(run.total.modexps, predict::SEGDS_MODEXPS);
        assert_eq!(
            run.per_party["uav-1"].scalar_mults,
            predict::segds_coordinator_mults(5)
        );
        for member in ["uav-2", "uav-3", "uav-4", "uav-5"] {
            assert_eq!(
                run.per_party[member].scalar_mults,
                predict::segds_member_mults(5),
                "member {member}"
            );
            assert_eq!(
                run.per_party[member].scalar_mults,
                reference::SEGDS_MEMBER_MULTS_N5_PINNED
            );
        }
        assert_eq!(run.per_party["sp"].scalar_mults, predict::segds_provider_mults(5));
        // the measured member cost sits inside the factor-two band of the
        // reference figure
        let m = run.per_party["uav-2"].scalar_mults;
        assert!(m * 2 >= reference::SEGDS_MEMBER_MULTS_N5 && m <= reference::SEGDS_MEMBER_MULTS_N5 * 2);
    }

    #[test]
    fn group_download_sequence_bytes_are_pinned_and_in_band() {
        let run = measure_segds(5, 65536, 103);
        assert_eq!(run.overhead_bytes, reference::SEGDS_SEQUENCE_BYTES_PINNED);
        let lo = reference::SEGDS_SEQUENCE_BYTES * 3 / 4;
        let hi = reference::SEGDS_SEQUENCE_BYTES * 5 / 4;
        assert!(
            (lo..=hi).contains(&run.overhead_bytes),
            "sequence bytes {} outside [{lo}, {hi}]",
            run.overhead_bytes
        );
        // content-free metric: growing the file must not move it
        let big = measure_segds(5, 131072, 103);
        assert_eq!(big.overhead_bytes, run.overhead_bytes);
    }

    #[test]
    fn direct_exchange_counts_match_predictions() {
        let run = measure_sedds(16384, 107);
        assert_eq!(run.per_party["ue-1"].scalar_mults, predict::SEDDS_UE_MULTS);
        assert_eq!(run.per_party["uav-1"].scalar_mults, predict::SEDDS_UAV_MULTS);
        assert_eq!(run.per_party["ausf"].scalar_mults, predict::SEDDS_ARBITER_MULTS);
        assert_eq!(run.total.modexps, predict::SEDDS_MODEXPS);
        assert_eq!(run.total.sym_cipher_calls, predict::SEDDS_AEAD_CALLS);
        let endpoint_mults =
            run.per_party["ue-1"].scalar_mults + run.per_party["uav-1"].scalar_mults;
        assert_eq!(endpoint_mults, reference::SEDDS_MULTS_PINNED);
        assert!(
            endpoint_mults * 2 >= reference::SEDDS_MULTS
                && endpoint_mults <= reference::SEDDS_MULTS * 2
        );
        assert!(
            run.total.modexps <= reference::SEDDS_MODEXPS * 2,
            "exponentiations within the factor-two band"
        );
    }

    #[test]
    fn direct_exchange_uplink_bytes_are_pinned_and_in_band() {
        let run = measure_sedds(16384, 109);
        assert_eq!(run.overhead_bytes, reference::SEDDS_UPLINK_BYTES_PINNED);
        let lo = reference::SEDDS_UPLINK_BYTES * 3 / 4;
        let hi = reference::SEDDS_UPLINK_BYTES * 5 / 4;
        assert!(
            (lo..=hi).contains(&run.overhead_bytes),
            "uplink bytes {} outside [{lo}, {hi}]",
            run.overhead_bytes
        );
        let big = measure_sedds(65536, 109);
        assert_eq!(big.overhead_bytes, run.overhead_bytes);
    }

    #[test]
    fn per_role_costs_grow_exactly_linearly_in_group_size() {
        let mut member_points = Vec::new();
        let mut coordinator_points = Vec::new();
        let mut provider_points = Vec::new();
        for n in 2..=10u64 {
            let run = measure_segds(n as usize, 4096, 200 + n);
            member_points.push((n, run.per_party["uav-2"].scalar_mults));
            coordinator_points.push((n, run.per_party["uav-1"].scalar_mults));
            provider_points.push((n, run.per_party["sp"].scalar_mults));
        }
        assert_eq!(linear_fit_exact(&member_points), Some((6, 5)));
        assert_eq!(linear_fit_exact(&coordinator_points), Some((9, 2)));
        assert_eq!(linear_fit_exact(&provider_points), Some((4, 4)));
    }

    #[test]
    fn linear_fit_rejects_nonlinear_points() {
        assert_eq!(linear_fit_exact(&[(1, 1), (2, 4), (3, 9)]), None);
        assert_eq!(linear_fit_exact(&[(2, 17), (3, 23), (4, 29)]), Some((6, 5)));
        assert_eq!(linear_fit_exact(&[(1, 1)]), None, "needs two points");
    }

    #[test]
    fn report_text_states_trial_consistency() {
        let runs = vec![measure_sedds(1024, 7), measure_sedds(1024, 8)];
        let text = report_text("sedds", &runs);
        assert!(text.contains("counts-identical-across-trials=true"), "{text}");
        assert!(text.contains("ue-1"));
        assert!(text.contains("sequence-overhead-bytes="));
    }
}
