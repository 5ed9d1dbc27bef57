//! Serving an in-process agent over the framed stdio protocol.

use std::io::{self, BufRead, Write};

use turnbench::harness::{read_frame, write_frame, Agent, AgentOutput, Request};

/// Answers framed requests from `input` on `output` until end of input.
/// Replies echo the request's `request_id`; a request that does not parse
/// gets an empty reply.
pub fn serve_agent(
    agent: &mut dyn Agent,
    mut input: impl BufRead,
    mut output: impl Write,
) -> io::Result<()> {
    while let Some(frame) = read_frame(&mut input)? {
        let reply = match serde_json::from_str::<Request>(&frame) {
            Ok(request) => {
                let text = match agent.respond(&request) {
                    AgentOutput::Raw { text } => text,
                    _ => String::new(),
                };
                tag_reply(&text, request.request_id())
            }
            Err(_) => "{}".to_string(),
        };
        write_frame(&mut output, &reply)?;
    }
    Ok(())
}

fn tag_reply(text: &str, request_id: u64) -> String {
    match serde_json::from_str::<serde_json::Value>(text) {
        Ok(serde_json::Value::Object(mut map)) => {
            map.insert("request_id".into(), request_id.into());
            serde_json::Value::Object(map).to_string()
        }
        _ => text.to_string(),
    }
}
