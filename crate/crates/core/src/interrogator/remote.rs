//! Remote model oracle over newline-delimited JSON.
//!
//! Request: `{"id":<u64>,"question_id":"<string>","text":"<string, optional>"}`
//! Response: `{"id":<u64>,"answer":0}` or `{"id":<u64>,"answer":1}`
//!
//! One response per request, matching `id`.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ModelOracle;
use crate::error::OracleError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub question_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub answer: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemoteConfig {
    /// `host:port`
    pub addr: String,
    /// Applies to connecting and to each response.
    pub timeout: Duration,
    /// Resend once on timeout or transport failure, on a fresh connection.
    pub retry: bool,
}

impl RemoteConfig {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

    pub fn new(addr: impl Into<String>) -> Self {
        Self {
            addr: addr.into(),
            timeout: Self::DEFAULT_TIMEOUT,
            retry: false,
        }
    }
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

/// Oracle behind a TCP endpoint. Answers are cached for the session, so each
/// question goes over the wire at most once.
pub struct RemoteOracle {
    config: RemoteConfig,
    conn: Option<Connection>,
    next_id: u64,
    cache: HashMap<String, bool>,
    texts: HashMap<String, String>,
    requests_sent: u64,
}

impl RemoteOracle {
    pub fn new(config: RemoteConfig) -> Self {
        Self {
            config,
            conn: None,
            next_id: 0,
            cache: HashMap::new(),
            texts: HashMap::new(),
            requests_sent: 0,
        }
    }

    /// Question texts sent along with their ids.
    pub fn with_texts(mut self, texts: HashMap<String, String>) -> Self {
        self.texts = texts;
        self
    }

    /// Requests written to the wire so far, retries included.
    pub fn requests_sent(&self) -> u64 {
        self.requests_sent
    }

    fn connect(&self) -> Result<Connection, OracleError> {
        let addrs = self
            .config
            .addr
            .to_socket_addrs()
            .map_err(|e| OracleError::Transport(format!("{}: {e}", self.config.addr)))?;
        let mut last = None;
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, self.config.timeout) {
                Ok(stream) => {
                    stream
                        .set_read_timeout(Some(self.config.timeout))
                        .and_then(|_| stream.set_write_timeout(Some(self.config.timeout)))
                        .and_then(|_| stream.set_nodelay(true))
                        .map_err(io_error)?;
                    let writer = stream.try_clone().map_err(io_error)?;
                    return Ok(Connection {
                        reader: BufReader::new(stream),
                        writer,
                    });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last.map_or_else(
            || OracleError::Transport(format!("{} resolved to no address", self.config.addr)),
            io_error,
        ))
    }

    fn exchange(&mut self, question_id: &str) -> Result<bool, OracleError> {
        if self.conn.is_none() {
            self.conn = Some(self.connect()?);
        }
        let id = self.next_id;
        self.next_id += 1;
        let request = Request {
            id,
            question_id: question_id.to_owned(),
            text: self.texts.get(question_id).cloned(),
        };
        let mut line = serde_json::to_string(&request).expect("request serializes");
        line.push('\n');

        let conn = self.conn.as_mut().expect("connected above");
        self.requests_sent += 1;
        conn.writer.write_all(line.as_bytes()).map_err(io_error)?;
        conn.writer.flush().map_err(io_error)?;

        let mut reply = String::new();
        let n = conn.reader.read_line(&mut reply).map_err(io_error)?;
        if n == 0 {
            return Err(OracleError::Transport("connection closed".into()));
        }
        parse_response(&reply, id)
    }
}

fn io_error(e: io::Error) -> OracleError {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => OracleError::Timeout,
        _ => OracleError::Transport(e.to_string()),
    }
}

fn parse_response(line: &str, expected_id: u64) -> Result<bool, OracleError> {
    let value: serde_json::Value = serde_json::from_str(line.trim_end()).map_err(|e| {
        OracleError::Protocol(format!("malformed response {:?}: {e}", line.trim_end()))
    })?;
    let id = value
        .get("id")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| OracleError::Protocol("response without numeric id".into()))?;
    if id != expected_id {
        return Err(OracleError::Protocol(format!(
            "response id {id} does not match request id {expected_id}"
        )));
    }
    match value.get("answer").and_then(serde_json::Value::as_u64) {
        Some(0) => Ok(false),
        Some(1) => Ok(true),
        _ => Err(OracleError::Protocol(format!(
            "non-binary answer {}",
            value.get("answer").unwrap_or(&serde_json::Value::Null)
        ))),
    }
}

impl ModelOracle for RemoteOracle {
    fn answer(&mut self, question_id: &str) -> Result<bool, OracleError> {
        if let Some(&cached) = self.cache.get(question_id) {
            return Ok(cached);
        }
        let mut result = self.exchange(question_id);
        if self.config.retry
            && matches!(
                result,
                Err(OracleError::Timeout | OracleError::Transport(_))
            )
        {
            self.conn = None;
            result = self.exchange(question_id);
        }
        match result {
            Ok(answer) => {
                self.cache.insert(question_id.to_owned(), answer);
                Ok(answer)
            }
            Err(e) => {
                // a half-read stream cannot be trusted for the next request
                self.conn = None;
                Err(e)
            }
        }
    }

    fn concurrent(&self) -> bool {
        true
    }
}

/// Serves one connection from `oracle` until the peer closes it. Questions the
/// oracle cannot answer get `{"id":..,"error":".."}`, which clients treat as a
/// protocol error.
pub fn serve_connection<O: ModelOracle + ?Sized>(
    stream: TcpStream,
    oracle: &mut O,
) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Request>(&line) {
            Ok(req) => match oracle.answer(&req.question_id) {
                Ok(bit) => serde_json::to_string(&Response {
                    id: req.id,
                    answer: u8::from(bit),
                }),
                Err(e) => serde_json::to_string(
                    &serde_json::json!({"id": req.id, "error": e.to_string()}),
                ),
            },
            Err(e) => serde_json::to_string(&serde_json::json!({"error": e.to_string()})),
        }
        .expect("reply serializes");
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_format() {
        let r = Request {
            id: 7,
            question_id: "q1".into(),
            text: None,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"id":7,"question_id":"q1"}"#
        );
        let r = Request {
            text: Some("Is water wet?".into()),
            ..r
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"id":7,"question_id":"q1","text":"Is water wet?"}"#
        );
    }

    #[test]
    fn response_parsing() {
        assert_eq!(parse_response("{\"id\":3,\"answer\":1}\n", 3), Ok(true));
        assert_eq!(parse_response("{\"id\":3,\"answer\":0}", 3), Ok(false));
        assert!(matches!(
            parse_response("{\"id\":3,\"answer\":2}", 3),
            Err(OracleError::Protocol(_))
        ));
        assert!(matches!(
            parse_response("{\"id\":3,\"answer\":\"1\"}", 3),
            Err(OracleError::Protocol(_))
        ));
        assert!(matches!(
            parse_response("{\"id\":4,\"answer\":1}", 3),
            Err(OracleError::Protocol(_))
        ));
        assert!(matches!(
            parse_response("yes", 3),
            Err(OracleError::Protocol(_))
        ));
    }
}
