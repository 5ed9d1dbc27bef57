//! Agents reached over HTTP.

use std::time::Duration;

use turnbench::harness::{Agent, AgentOutput, Request};

/// Posts each request envelope as JSON to a fixed URL and takes the reply
/// body as the agent's raw output.
pub struct HttpAgent {
    url: String,
    client: ureq::Agent,
    next_id: u64,
}

impl HttpAgent {
    pub fn new(url: impl Into<String>, timeout: Option<Duration>) -> Self {
        let client = ureq::Agent::config_builder()
            .timeout_global(timeout)
            .build()
            .into();
        HttpAgent {
            url: url.into(),
            client,
            next_id: 0,
        }
    }
}

impl Agent for HttpAgent {
    fn name(&self) -> String {
        self.url.clone()
    }

    fn respond(&mut self, request: &Request) -> AgentOutput {
        self.next_id += 1;
        let mut request = request.clone();
        request.set_request_id(self.next_id);
        let body = serde_json::to_string(&request).expect("requests serialize");
        let reply = self
            .client
            .post(&self.url)
            .header("content-type", "application/json")
            .send(body.as_str())
            .and_then(|mut r| r.body_mut().read_to_string());
        match reply {
            Ok(text) => AgentOutput::Raw { text },
            Err(ureq::Error::Timeout(_)) => AgentOutput::Timeout,
            Err(e) => AgentOutput::Transport {
                error: format!("{}: {e}", self.url),
            },
        }
    }
}
