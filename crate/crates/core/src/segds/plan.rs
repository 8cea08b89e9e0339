//! Segment plans: who downloads which byte range.
//!
//! A plan partitions `[0, file_size)` into contiguous ranges, one per
//! assignment, in byte order. Splits use largest-remainder rounding with
//! ties resolved toward later downloaders, so an equal split of 1001 bytes
//! across five parties yields four 200-byte ranges and a final 201-byte
//! range. Zero-length ranges are legal (tiny files, many downloaders):
//! every party runs the full protocol regardless of its share size.

use crate::crypto::hashes::h3;
use crate::wire::WireError;

/// A half-open byte range `[start, start+len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ByteRange {
    pub start: u64,
    pub len: u64,
}

impl ByteRange {
    pub fn end(&self) -> u64 {
        self.start + self.len
    }

    /// Fixed 16-byte encoding: start || len, big-endian.
    pub fn encode(&self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[..8].copy_from_slice(&self.start.to_be_bytes());
        out[8..].copy_from_slice(&self.len.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let arr: [u8; 16] =
            bytes.try_into().map_err(|_| WireError::Malformed("byte range needs 16 bytes"))?;
        Ok(ByteRange {
            start: u64::from_be_bytes(arr[..8].try_into().unwrap()),
            len: u64::from_be_bytes(arr[8..].try_into().unwrap()),
        })
    }
}

impl std::fmt::Display for ByteRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}+{}", self.start, self.len)
    }
}

/// One downloader's range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub member: String,
    pub range: ByteRange,
}

/// The full ordered partition of a file across downloaders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentPlan {
    pub file_name: String,
    pub assignments: Vec<Assignment>,
}

impl SegmentPlan {
    /// Splits `total` bytes across downloaders proportionally to `weights`,
    /// contiguous in list order.
    pub fn weighted_split(file_name: &str, total: u64, downloaders: &[(String, u64)]) -> Self {
        let assignments = split_span(0, total, downloaders);
        SegmentPlan { file_name: file_name.to_owned(), assignments }
    }

    /// Equal split (all weights 1), remainder drifting to the last ranges.
    pub fn equal_split(file_name: &str, total: u64, downloaders: &[String]) -> Self {
        let weighted: Vec<(String, u64)> =
            downloaders.iter().map(|d| (d.clone(), 1)).collect();
        SegmentPlan::weighted_split(file_name, total, &weighted)
    }

    /// Checks the assignments are contiguous from 0 with no gaps or
    /// overlaps; returns the covered size.
    pub fn validate(&self) -> Result<u64, WireError> {
        let mut cursor = 0u64;
        for a in &self.assignments {
            if a.range.start != cursor {
                return Err(WireError::Malformed("plan ranges must tile the file in order"));
            }
            cursor = cursor
                .checked_add(a.range.len)
                .ok_or(WireError::Malformed("plan range overflows"))?;
        }
        Ok(cursor)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.file_name.len() as u16).to_be_bytes());
        out.extend_from_slice(self.file_name.as_bytes());
        out.extend_from_slice(&(self.assignments.len() as u16).to_be_bytes());
        for a in &self.assignments {
            out.extend_from_slice(&(a.member.len() as u16).to_be_bytes());
            out.extend_from_slice(a.member.as_bytes());
            out.extend_from_slice(&a.range.encode());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let take = |pos: &mut usize, n: usize| -> Result<&[u8], WireError> {
            let end = pos.checked_add(n).ok_or(WireError::UnexpectedEnd)?;
            let s = bytes.get(*pos..end).ok_or(WireError::UnexpectedEnd)?;
            *pos = end;
            Ok(s)
        };
        let mut pos = 0usize;
        let name_len = u16::from_be_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let file_name = std::str::from_utf8(take(&mut pos, name_len)?)
            .map_err(|_| WireError::Malformed("file name is not UTF-8"))?
            .to_owned();
        let count = u16::from_be_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let mut assignments = Vec::with_capacity(count);
        for _ in 0..count {
            let id_len = u16::from_be_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
            let member = std::str::from_utf8(take(&mut pos, id_len)?)
                .map_err(|_| WireError::Malformed("member id is not UTF-8"))?
                .to_owned();
            let range = ByteRange::decode(take(&mut pos, 16)?)?;
            assignments.push(Assignment { member, range });
        }
        if pos != bytes.len() {
            return Err(WireError::TrailingBytes);
        }
        Ok(SegmentPlan { file_name, assignments })
    }

    pub fn digest(&self) -> [u8; 32] {
        h3(&self.encode())
    }
}

/// Splits the span `[start, start+len)` across downloaders proportionally to
/// their weights: largest-remainder rounding, ties favoring later indices,
/// contiguous in list order.
pub fn split_span(start: u64, len: u64, downloaders: &[(String, u64)]) -> Vec<Assignment> {
    assert!(!downloaders.is_empty(), "cannot split across zero downloaders");
    let weight_sum: u64 = downloaders.iter().map(|(_, w)| *w).sum();
    assert!(weight_sum > 0, "weights must not all be zero");

    let mut sizes: Vec<u64> = Vec::with_capacity(downloaders.len());
    let mut remainders: Vec<(u64, usize)> = Vec::with_capacity(downloaders.len());
    let mut allocated = 0u64;
    for (i, (_, w)) in downloaders.iter().enumerate() {
        let exact = (len as u128) * (*w as u128);
        let base = (exact / weight_sum as u128) as u64;
        let rem = (exact % weight_sum as u128) as u64;
        sizes.push(base);
        remainders.push((rem, i));
        allocated += base;
    }
    // distribute the leftover bytes to the largest remainders, later
    // downloaders first on ties
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
    let mut leftover = len - allocated;
    for (_, idx) in &remainders {
        if leftover == 0 {
            break;
        }
        sizes[*idx] += 1;
        leftover -= 1;
    }

    let mut cursor = start;
    downloaders
        .iter()
        .zip(sizes)
        .map(|((id, _), size)| {
            let a = Assignment { member: id.clone(), range: ByteRange { start: cursor, len: size } };
            cursor += size;
            a
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("uav-{i}")).collect()
    }

    #[test]
    fn equal_split_sends_remainder_to_the_tail() {
        let plan = SegmentPlan::equal_split("f", 1001, &ids(5));
        let lens: Vec<u64> = plan.assignments.iter().map(|a| a.range.len).collect();
        assert_eq!(lens, vec![200, 200, 200, 200, 201]);
        assert_eq!(plan.validate().unwrap(), 1001);
    }

    #[test]
    fn weighted_split_is_proportional() {
        let downloaders: Vec<(String, u64)> = ids(4)
            .into_iter()
            .zip([2u64, 1, 1, 1])
            .collect();
        let plan = SegmentPlan::weighted_split("f", 1000, &downloaders);
        let lens: Vec<u64> = plan.assignments.iter().map(|a| a.range.len).collect();
        assert_eq!(lens, vec![400, 200, 200, 200]);
        assert_eq!(plan.validate().unwrap(), 1000);
    }

    #[test]
    fn tiny_files_allow_zero_length_ranges() {
        let plan = SegmentPlan::equal_split("f", 1, &ids(5));
        let lens: Vec<u64> = plan.assignments.iter().map(|a| a.range.len).collect();
        assert_eq!(lens.iter().sum::<u64>(), 1);
        assert_eq!(lens.iter().filter(|l| **l == 0).count(), 4);
        assert_eq!(plan.validate().unwrap(), 1);
        // the single byte drifted to the last downloader
        assert_eq!(lens[4], 1);
    }

    #[test]
    fn split_conserves_every_byte() {
        for total in [0u64, 1, 7, 100, 65536, 1_000_003] {
            for n in 1..=10usize {
                let plan = SegmentPlan::equal_split("f", total, &ids(n));
                assert_eq!(plan.validate().unwrap(), total, "total={total} n={n}");
            }
        }
    }

    #[test]
    fn sub_span_split_keeps_offsets() {
        let downloaders: Vec<(String, u64)> = ids(3).into_iter().map(|i| (i, 1)).collect();
        let parts = split_span(1000, 10, &downloaders);
        assert_eq!(parts[0].range, ByteRange { start: 1000, len: 3 });
        assert_eq!(parts[1].range, ByteRange { start: 1003, len: 3 });
        assert_eq!(parts[2].range, ByteRange { start: 1006, len: 4 });
    }

    #[test]
    fn codec_roundtrip_and_digest_stability() {
        let plan = SegmentPlan::equal_split("data.bin", 4096, &ids(5));
        let bytes = plan.encode();
        assert_eq!(SegmentPlan::decode(&bytes).unwrap(), plan);
        assert_eq!(plan.digest(), SegmentPlan::decode(&bytes).unwrap().digest());
        let other = SegmentPlan::equal_split("data.bin", 4097, &ids(5));
        assert_ne!(plan.digest(), other.digest());
        assert!(SegmentPlan::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn validate_rejects_gaps_and_disorder() {
        let mut plan = SegmentPlan::equal_split("f", 100, &ids(2));
        plan.assignments[1].range.start += 1;
        assert!(plan.validate().is_err());
        let mut plan = SegmentPlan::equal_split("f", 100, &ids(2));
        plan.assignments.swap(0, 1);
        assert!(plan.validate().is_err());
    }
}
