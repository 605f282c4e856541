//! Wire format: each message is a 4-byte big-endian length followed by that
//! many bytes of compact UTF-8 JSON. Unknown fields are rejected.

use thiserror::Error;

use super::messages::FficeMessage;

const HEADER: usize = 4;

/// Where decoding failed: byte offset into the input and the JSON path of
/// the offending value (empty when the failure is in the framing).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("decode error at byte {offset} (path {path:?}): {message}")]
pub struct CodecError {
    pub offset: usize,
    pub path: String,
    pub message: String,
}

pub fn encode(msg: &FficeMessage) -> Vec<u8> {
    let json = serde_json::to_vec(msg).expect("messages always serialize");
    let len = u32::try_from(json.len()).expect("message under 4 GiB");
    let mut out = Vec::with_capacity(HEADER + json.len());
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&json);
    out
}

/// Byte offset of a 1-based (line, column) position in `text`.
fn offset_of(text: &[u8], line: usize, column: usize) -> usize {
    let mut off = 0;
    for _ in 1..line {
        match text[off..].iter().position(|&b| b == b'\n') {
            Some(p) => off += p + 1,
            None => return text.len(),
        }
    }
    (off + column.saturating_sub(1)).min(text.len())
}

/// Decode one frame at the start of `bytes`; returns the message and the
/// number of bytes consumed.
fn decode_frame(bytes: &[u8], base: usize) -> Result<(FficeMessage, usize), CodecError> {
    let framing = |offset: usize, message: String| CodecError {
        offset,
        path: String::new(),
        message,
    };
    if bytes.len() < HEADER {
        return Err(framing(base + bytes.len(), format!("truncated header: {} of {HEADER} bytes", bytes.len())));
    }
    let len = u32::from_be_bytes(bytes[..HEADER].try_into().expect("4 bytes")) as usize;
    let body = &bytes[HEADER..];
    if body.len() < len {
        return Err(framing(
            base + bytes.len(),
            format!("truncated payload: header declares {len} bytes, {} present", body.len()),
        ));
    }
    let body = &body[..len];
    let mut de = serde_json::Deserializer::from_slice(body);
    let msg: FficeMessage = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CodecError {
            offset: base + HEADER + offset_of(body, inner.line(), inner.column()),
            path,
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| CodecError {
        offset: base + HEADER + offset_of(body, e.line(), e.column()),
        path: String::new(),
        message: e.to_string(),
    })?;
    Ok((msg, HEADER + len))
}

/// Decode exactly one frame; trailing bytes are an error.
pub fn decode(bytes: &[u8]) -> Result<FficeMessage, CodecError> {
    let (msg, used) = decode_frame(bytes, 0)?;
    if used != bytes.len() {
        return Err(CodecError {
            offset: used,
            path: String::new(),
            message: format!("{} trailing bytes after frame", bytes.len() - used),
        });
    }
    Ok(msg)
}

/// Decode a concatenation of frames.
pub fn decode_stream(mut bytes: &[u8]) -> Result<Vec<FficeMessage>, CodecError> {
    let mut out = vec![];
    let mut base = 0;
    while !bytes.is_empty() {
        let (msg, used) = decode_frame(bytes, base)?;
        out.push(msg);
        bytes = &bytes[used..];
        base += used;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::perf::FlightLevel;
    use crate::protocol::messages::*;
    use crate::protocol::Gufi;
    use crate::trajectory::{tag_levels, StartPhase, Trajectory4D, TrajectoryPoint4D};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_trajectory(r: &mut ChaCha8Rng) -> Trajectory4D {
        let n = r.gen_range(2..8);
        let mut eto = r.gen_range(0.0..1e9);
        let mut mass = r.gen_range(100_000.0..300_000.0);
        let levels: Vec<FlightLevel> = (0..n).map(|_| FlightLevel::new(r.gen_range(20..45) * 10).unwrap()).collect();
        let tags = tag_levels(&levels, StartPhase::Origin);
        let pts = (0..n)
            .map(|i| {
                if i > 0 {
                    eto += r.gen_range(1.0..4000.0);
                    mass -= r.gen_range(1.0..4000.0);
                }
                TrajectoryPoint4D {
                    waypoint_id: format!("WP{}", r.gen_range(0..1000)),
                    position: GeoPoint::new(r.gen_range(-89.0..89.0), r.gen_range(-180.0..180.0)).unwrap(),
                    level: levels[i],
                    eto,
                    mass,
                    vcp: tags[i],
                }
            })
            .collect();
        Trajectory4D::new(pts).unwrap()
    }

    fn random_reply(r: &mut ChaCha8Rng) -> ReplyBody {
        let status = ReplyStatus::ALL[r.gen_range(0..3)];
        let errors = match status {
            ReplyStatus::Concur => vec![],
            _ => (0..r.gen_range(1..4))
                .map(|i| ValidationError {
                    rule_id: format!("R{i}"),
                    message: format!("rule \"{i}\" failed at é✈ {}", r.gen::<u32>()),
                    actionable: r.gen(),
                })
                .collect(),
        };
        let proposal = (status == ReplyStatus::Negotiate && r.gen()).then(|| random_trajectory(r));
        ReplyBody::new(status, errors, proposal, r.gen_range(1..100)).unwrap()
    }

    fn random_message(r: &mut ChaCha8Rng) -> FficeMessage {
        let payload = match r.gen_range(0..9) {
            0 => Payload::TrialRequest(TrajectoryBody {
                candidate_id: "c1".into(),
                trajectory: random_trajectory(r),
            }),
            1 => Payload::TrialReply(random_reply(r)),
            2 => Payload::FilingRequest(TrajectoryBody {
                candidate_id: format!("c{}", r.gen::<u16>()),
                trajectory: random_trajectory(r),
            }),
            3 => Payload::FilingStatus(random_reply(r)),
            4 => Payload::RevisionRequest(RevisionBody {
                candidate_id: "rev".into(),
                trajectory: random_trajectory(r),
                anchor_index: r.gen_range(0..5),
                reason: "constraint change".into(),
            }),
            5 => Payload::RevisionReply(random_reply(r)),
            6 => Payload::AgreedTrajectory(AgreedBody {
                trajectory: random_trajectory(r),
                agreed_by: "EASP-1".into(),
            }),
            7 => Payload::TrajectoryUpdate(UpdateBody {
                trajectory: random_trajectory(r),
                delay_s: r.gen_range(0.0..300.0),
            }),
            _ => Payload::ProposalRequest(ProposalBody {
                trajectory: random_trajectory(r),
                rule_id: "FLOW1".into(),
                message: "prefer the southern route".into(),
            }),
        };
        let sent = r.gen_range(0..1_000_000_000i64);
        let kind = payload.kind();
        FficeMessage {
            id: format!("m{}", r.gen::<u32>()),
            gufi: Gufi::new("OPR", "AAAA", "BBBB", r.gen_range(0..2_000_000_000), r.gen_range(0..10_000)).unwrap(),
            sender: "FOC".into(),
            receiver: "EASP-1".into(),
            sent_at_ms: sent,
            received_at_ms: sent + r.gen_range(0..5000),
            correlation_id: (kind.is_reply() || r.gen()).then(|| format!("m{}", r.gen::<u32>())),
            payload,
        }
    }

    #[test]
    fn minimal_trial_request_round_trips() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let mut m = random_message(&mut r);
        m.payload = Payload::TrialRequest(TrajectoryBody {
            candidate_id: "c".into(),
            trajectory: random_trajectory(&mut r),
        });
        m.correlation_id = None;
        assert_eq!(decode(&encode(&m)).unwrap(), m);
    }

    #[test]
    fn randomized_messages_round_trip_bit_exact() {
        let mut r = ChaCha8Rng::seed_from_u64(42);
        let mut stream = vec![];
        let mut all = vec![];
        for _ in 0..500 {
            let m = random_message(&mut r);
            let bytes = encode(&m);
            let back = decode(&bytes).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode(&back), bytes, "re-encoding is byte-identical");
            stream.extend_from_slice(&bytes);
            all.push(m);
        }
        assert_eq!(decode_stream(&stream).unwrap(), all);
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let bytes = encode(&random_message(&mut r));
        let cut = &bytes[..bytes.len() - 10];
        let err = decode(cut).unwrap_err();
        assert_eq!(err.offset, cut.len());
        assert!(err.message.contains("truncated payload"));
        assert!(decode(&bytes[..2]).unwrap_err().message.contains("truncated header"));
    }

    fn frame(json: &str) -> Vec<u8> {
        let mut b = (json.len() as u32).to_be_bytes().to_vec();
        b.extend_from_slice(json.as_bytes());
        b
    }

    #[test]
    fn unknown_fields_are_rejected_with_a_path() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let mut m = random_message(&mut r);
        m.payload = Payload::TrajectoryUpdate(UpdateBody {
            trajectory: random_trajectory(&mut r),
            delay_s: 12.0,
        });
        let mut v = serde_json::to_value(&m).unwrap();
        v["payload"]["body"]["surprise"] = serde_json::json!(1);
        let err = decode(&frame(&v.to_string())).unwrap_err();
        assert!(err.message.contains("surprise"), "{err}");
        assert!(err.path.starts_with("payload"), "{err}");
        assert!(err.offset > 4);

        let mut v = serde_json::to_value(&m).unwrap();
        v["extra"] = serde_json::json!("x");
        assert!(decode(&frame(&v.to_string())).is_err());
    }

    #[test]
    fn invariants_are_enforced_on_decode() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let mut m = random_message(&mut r);
        m.payload = Payload::TrialReply(ReplyBody::concur(1));
        m.correlation_id = None;
        let json = serde_json::to_string(&serde_json::json!({
            "id": m.id, "gufi": m.gufi, "sender": "A", "receiver": "B",
            "sent_at_ms": 10, "received_at_ms": 20, "payload": m.payload,
        }))
        .unwrap();
        assert!(decode(&frame(&json)).unwrap_err().message.contains("correlation"));
        let bad = r#"{"status":"NON_CONCUR","errors":[],"ruleset_version":1}"#;
        assert!(serde_json::from_str::<ReplyBody>(bad).is_err());
        let acausal = json.replace("\"received_at_ms\":20", "\"received_at_ms\":5");
        assert!(decode(&frame(&acausal)).is_err());
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let mut bytes = encode(&random_message(&mut r));
        let n = bytes.len();
        bytes.push(0);
        assert_eq!(decode(&bytes).unwrap_err().offset, n);
    }
}
