//! Message schema, wire codec, GUFI correlation and the per-flight lifecycle.

pub mod codec;
pub mod conversion;
pub mod gufi;
pub mod lifecycle;
pub mod messages;

pub use codec::{decode, decode_stream, encode, CodecError};
pub use conversion::{make_trial_request, ConversionError};
pub use gufi::{Gufi, GufiAllocator, GufiError};
pub use lifecycle::{next_state, FlightLifecycle, IllegalTransition, LifecycleEvent, LifecycleState};
pub use messages::{
    AgreedBody, FficeMessage, MessageKind, Payload, ProposalBody, ReplyBody, ReplyError, ReplyStatus, RevisionBody,
    TrajectoryBody, UpdateBody, ValidationError,
};
