//! Line-oriented protocol between the decision side and the executor side.

mod session;
mod stream;
mod wire;

pub use session::{
    read_message, run_decision_client, run_executor_session, write_message, ExecStatus, Executor,
    SessionEnd, SessionReport,
};
pub use stream::{
    duplex, pipe, DuplexEnd, Endpoint, PipeReader, PipeWriter, DEFAULT_PORT, PORT_ENV,
};
pub use wire::{decode, encode, MessageKind, ProtocolError, WireMessage};
