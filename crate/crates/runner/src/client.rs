use serde_json::Value;

const EXCERPT_CHARS: usize = 200;

/// How a single HTTP exchange is treated by the retry loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseClass {
    Ok(String),
    /// 4xx whose body names the temperature parameter.
    TemperatureRejected(String),
    /// 429 and 5xx.
    Retryable(String),
    /// Any other non-success status.
    Fatal(String),
    /// 2xx whose body lacks a non-empty assistant message.
    Malformed(String),
}

pub(crate) fn excerpt(body: &str) -> String {
    let mut s: String = body.chars().take(EXCERPT_CHARS).collect();
    if body.chars().count() > EXCERPT_CHARS {
        s.push('…');
    }
    s
}

fn message_text(body: &Value) -> Option<String> {
    let content = body.get("choices")?.get(0)?.get("message")?.get("content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        // some servers return content as a list of typed parts
        Value::Array(parts) => {
            let text: Vec<&str> = parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect();
            Some(text.join(""))
        }
        _ => None,
    }
}

pub fn classify_response(status: u16, body: &str) -> ResponseClass {
    if (200..300).contains(&status) {
        return match serde_json::from_str::<Value>(body).ok().as_ref().and_then(message_text) {
            Some(text) if !text.trim().is_empty() => ResponseClass::Ok(text),
            Some(_) => ResponseClass::Malformed(format!("empty assistant message: {}", excerpt(body))),
            None => ResponseClass::Malformed(format!("unexpected body: {}", excerpt(body))),
        };
    }
    let detail = format!("http {status}: {}", excerpt(body));
    if status == 429 || status >= 500 {
        ResponseClass::Retryable(detail)
    } else if (400..500).contains(&status) && body.to_ascii_lowercase().contains("temperature") {
        ResponseClass::TemperatureRejected(detail)
    } else {
        ResponseClass::Fatal(detail)
    }
}
