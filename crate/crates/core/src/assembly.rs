//! Task prompt construction and the chat-completions request body.
//!
//! A [`PromptBundle`] pairs one task instruction with exemplar reports, an
//! optional findings input and a gaze payload (plain image, heatmap, video
//! frames, or fixation text with the plain image). The instruction text
//! depends only on the task, never on the gaze mode.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use base64::Engine;
use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::gaze::ScanPath;
use crate::render::{
    encode_png, plan_frames, render_fixation_text, render_heatmap, render_video, BaseImage, FixationOrdering,
    FrameSet, Heatmap, RenderConfig,
};
use crate::{Error, Result};

pub const REPORT_MAX_TOKENS: u32 = 256;
pub const DIAGNOSIS_MAX_TOKENS: u32 = 64;
pub const DEFAULT_EXEMPLAR_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    FindingsGeneration,
    ImpressionGeneration,
    Diagnosis,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::FindingsGeneration => "findings_generation",
            TaskKind::ImpressionGeneration => "impression_generation",
            TaskKind::Diagnosis => "diagnosis",
        }
    }

    pub fn max_tokens(self) -> u32 {
        match self {
            TaskKind::FindingsGeneration | TaskKind::ImpressionGeneration => REPORT_MAX_TOKENS,
            TaskKind::Diagnosis => DIAGNOSIS_MAX_TOKENS,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "findings_generation" | "findings" => Ok(TaskKind::FindingsGeneration),
            "impression_generation" | "impression" => Ok(TaskKind::ImpressionGeneration),
            "diagnosis" => Ok(TaskKind::Diagnosis),
            other => Err(Error::Argument(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GazeMode {
    None,
    Heatmap,
    FixationText,
    Video,
}

impl GazeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GazeMode::None => "none",
            GazeMode::Heatmap => "heatmap",
            GazeMode::FixationText => "fixation_text",
            GazeMode::Video => "video",
        }
    }
}

impl fmt::Display for GazeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GazeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(GazeMode::None),
            "heatmap" => Ok(GazeMode::Heatmap),
            "fixation_text" | "text" => Ok(GazeMode::FixationText),
            "video" => Ok(GazeMode::Video),
            other => Err(Error::Argument(format!("unknown gaze mode `{other}`"))),
        }
    }
}

/// Instruction text per task. `impression_instruction` may contain a
/// `{findings}` placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub findings_instruction: String,
    pub impression_instruction: String,
    pub diagnosis_instruction: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            findings_instruction: "Provide a detailed description of the findings in the radiology image.".into(),
            impression_instruction: "Summarize the following findings into an impression: {findings}".into(),
            diagnosis_instruction: "What are the possible differential diagnoses for this patient?".into(),
        }
    }
}

const TEMPLATE_KEYS: [&str; 3] = ["findings_instruction", "impression_instruction", "diagnosis_instruction"];

impl Templates {
    /// Parses `key=value` entries. A value continues over following lines
    /// until the next line that starts with a known key and `=`. Lines
    /// starting with `#` before the first key are comments. Keys not present
    /// keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        let mut current: Option<(&str, String)> = None;
        let finish = |entry: Option<(&str, String)>, out: &mut Self| {
            if let Some((key, value)) = entry {
                let value = value.trim_end_matches(['\n', '\r']).to_string();
                match key {
                    "findings_instruction" => out.findings_instruction = value,
                    "impression_instruction" => out.impression_instruction = value,
                    _ => out.diagnosis_instruction = value,
                }
            }
        };
        for (n, line) in text.lines().enumerate() {
            let starts_key = line.split_once('=').and_then(|(k, v)| {
                TEMPLATE_KEYS.iter().find(|&&key| key == k.trim()).map(|&key| (key, v))
            });
            if let Some((key, value)) = starts_key {
                finish(current.take(), &mut out);
                current = Some((key, value.to_string()));
            } else if let Some((_, value)) = current.as_mut() {
                value.push('\n');
                value.push_str(line);
            } else if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            } else {
                return Err(Error::Template(format!(
                    "line {}: expected one of {} followed by `=`",
                    n + 1,
                    TEMPLATE_KEYS.join(", ")
                )));
            }
        }
        finish(current.take(), &mut out);
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The instruction for `task`; for impressions the findings text is
    /// substituted into `{findings}` (or appended when the template lacks it).
    pub fn instruction(&self, task: TaskKind, findings: Option<&str>) -> String {
        match task {
            TaskKind::FindingsGeneration => self.findings_instruction.clone(),
            TaskKind::Diagnosis => self.diagnosis_instruction.clone(),
            TaskKind::ImpressionGeneration => {
                let findings = findings.unwrap_or_default();
                if self.impression_instruction.contains("{findings}") {
                    self.impression_instruction.replace("{findings}", findings)
                } else {
                    format!("{}\n\nFindings: {findings}", self.impression_instruction)
                }
            }
        }
    }
}

/// Reads a JSON list of exemplar report strings.
pub fn load_exemplars(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_tokens: u32,
    pub temperature: f64,
}

#[derive(Debug, Clone)]
pub enum VisualPayload {
    /// The unmodified base image.
    Plain(RgbImage),
    Heatmap(Heatmap),
    Video(FrameSet),
}

impl VisualPayload {
    pub fn images(&self) -> Vec<&RgbImage> {
        match self {
            VisualPayload::Plain(img) => vec![img],
            VisualPayload::Heatmap(h) => vec![&h.image],
            VisualPayload::Video(set) => set.frames.iter().collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AssemblyOptions {
    pub expected_exemplars: usize,
    /// Exemplar count mismatches become errors instead of warnings.
    pub strict: bool,
    pub fixation_ordering: FixationOrdering,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            expected_exemplars: DEFAULT_EXEMPLAR_COUNT,
            strict: false,
            fixation_ordering: FixationOrdering::DurationDesc,
        }
    }
}

/// One task instance ready to be sent.
#[derive(Debug, Clone)]
pub struct PromptBundle {
    pub task: TaskKind,
    pub gaze_mode: GazeMode,
    pub image_id: String,
    pub reader_id: Option<String>,
    pub instruction: String,
    pub exemplars: Vec<String>,
    pub visual_payload: VisualPayload,
    pub fixation_text: Option<String>,
    pub findings_input: Option<String>,
    pub generation: GenerationParams,
    pub warnings: Vec<String>,
}

pub struct PromptInput<'a> {
    pub task: TaskKind,
    pub gaze_mode: GazeMode,
    pub scanpath: Option<&'a ScanPath>,
    pub image: &'a BaseImage,
    pub exemplars: &'a [String],
    pub findings: Option<&'a str>,
}

pub fn build_prompt(
    input: PromptInput<'_>,
    templates: &Templates,
    render_config: &RenderConfig,
    options: &AssemblyOptions,
) -> Result<PromptBundle> {
    let PromptInput { task, gaze_mode, scanpath, image, exemplars, findings } = input;

    let scanpath = match (gaze_mode, scanpath) {
        (GazeMode::None, sp) => sp,
        (_, Some(sp)) => Some(sp),
        (mode, None) => {
            return Err(Error::Argument(format!("gaze mode `{mode}` needs a scanpath")));
        }
    };
    if let Some(sp) = scanpath {
        if sp.image_id != image.record.image_id {
            return Err(Error::Argument(format!(
                "scanpath {} does not belong to image {}",
                sp.key(),
                image.record.image_id
            )));
        }
    }
    match (task, findings) {
        (TaskKind::ImpressionGeneration, None) => {
            return Err(Error::Argument("impression generation needs a findings input".into()));
        }
        (TaskKind::ImpressionGeneration, Some(_)) => {}
        (other, Some(_)) => {
            return Err(Error::Argument(format!("task `{other}` takes no findings input")));
        }
        _ => {}
    }

    let mut warnings = Vec::new();
    if exemplars.len() != options.expected_exemplars {
        let msg = format!(
            "expected {} exemplars, got {}",
            options.expected_exemplars,
            exemplars.len()
        );
        if options.strict {
            return Err(Error::Argument(msg));
        }
        warnings.push(msg);
    }

    let (visual_payload, fixation_text) = match (gaze_mode, scanpath) {
        (GazeMode::Video, Some(sp)) => {
            let plan = plan_frames(sp, render_config)?;
            (VisualPayload::Video(render_video(image, sp, &plan, render_config)?), None)
        }
        (GazeMode::Heatmap, Some(sp)) => (VisualPayload::Heatmap(render_heatmap(image, sp, render_config)?), None),
        (GazeMode::FixationText, Some(sp)) => {
            let text = render_fixation_text(sp, &image.record, options.fixation_ordering);
            (VisualPayload::Plain(image.pixels.clone()), Some(text))
        }
        _ => (VisualPayload::Plain(image.pixels.clone()), None),
    };

    Ok(PromptBundle {
        task,
        gaze_mode,
        image_id: image.record.image_id.clone(),
        reader_id: scanpath.map(|s| s.reader_id.clone()),
        instruction: templates.instruction(task, findings),
        exemplars: exemplars.to_vec(),
        visual_payload,
        fixation_text,
        findings_input: findings.map(str::to_string),
        generation: GenerationParams {
            max_tokens: task.max_tokens(),
            temperature: 0.0,
        },
        warnings,
    })
}

// ---- wire format -------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageUrl {
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    ImageUrl { image_url: ImageUrl },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: Vec<ContentPart>,
}

/// Body of a `POST {base_url}/chat/completions` request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn image_part_count(&self) -> usize {
        self.messages
            .iter()
            .flat_map(|m| &m.content)
            .filter(|p| matches!(p, ContentPart::ImageUrl { .. }))
            .count()
    }
}

pub fn exemplar_block(exemplars: &[String]) -> String {
    let mut out = String::from("Example reports:");
    for (i, e) in exemplars.iter().enumerate() {
        out.push_str(&format!("\n\nExample {}:\n{e}", i + 1));
    }
    out
}

pub fn fixation_block(text: &str) -> String {
    format!("Radiologist eye-gaze fixations (x and y relative to image width and height):\n{text}")
}

fn png_data_url(img: &RgbImage) -> Result<String> {
    let png = encode_png(img)?;
    Ok(format!(
        "data:image/png;base64,{}",
        base64::engine::general_purpose::STANDARD.encode(png)
    ))
}

/// A single user turn: exemplars, fixation text (if any), instruction, then
/// the image attachments in frame order.
pub fn serialize_bundle(bundle: &PromptBundle, model: &str) -> Result<ChatRequest> {
    let mut content = Vec::new();
    if !bundle.exemplars.is_empty() {
        content.push(ContentPart::Text { text: exemplar_block(&bundle.exemplars) });
    }
    if let Some(text) = &bundle.fixation_text {
        content.push(ContentPart::Text { text: fixation_block(text) });
    }
    content.push(ContentPart::Text { text: bundle.instruction.clone() });
    for img in bundle.visual_payload.images() {
        content.push(ContentPart::ImageUrl { image_url: ImageUrl { url: png_data_url(img)? } });
    }
    Ok(ChatRequest {
        model: model.to_string(),
        temperature: bundle.generation.temperature,
        max_tokens: bundle.generation.max_tokens,
        messages: vec![ChatMessage { role: "user".into(), content }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::{Fixation, ImageRecord, Split};
    use crate::render::phantom_image;

    fn base() -> BaseImage {
        let rec = ImageRecord {
            image_id: "img".into(),
            path: "img.png".into(),
            width: 32,
            height: 32,
        };
        BaseImage::from_pixels(rec, phantom_image(32, 32)).unwrap()
    }

    fn scanpath() -> ScanPath {
        let fx = vec![
            Fixation { x: 5.0, y: 5.0, duration: 0.8, seq: 0 },
            Fixation { x: 20.0, y: 12.0, duration: 0.4, seq: 0 },
        ];
        ScanPath::new("img", "r1", Split::Alpha, fx).unwrap()
    }

    fn exemplars() -> Vec<String> {
        vec!["Normal chest.".into(), "No acute findings.".into(), "Mild cardiomegaly.".into()]
    }

    fn build(task: TaskKind, mode: GazeMode, findings: Option<&str>) -> Result<PromptBundle> {
        let image = base();
        let sp = scanpath();
        let ex = exemplars();
        build_prompt(
            PromptInput { task, gaze_mode: mode, scanpath: Some(&sp), image: &image, exemplars: &ex, findings },
            &Templates::default(),
            &RenderConfig::default(),
            &AssemblyOptions::default(),
        )
    }

    #[test]
    fn diagnosis_uses_quoted_question() {
        let b = build(TaskKind::Diagnosis, GazeMode::None, None).unwrap();
        assert!(b.instruction.contains("What are the possible differential diagnoses for this patient?"));
        assert_eq!(b.generation.max_tokens, 64);
        assert_eq!(b.generation.temperature, 0.0);
    }

    #[test]
    fn findings_video_carries_k_frames() {
        let b = build(TaskKind::FindingsGeneration, GazeMode::Video, None).unwrap();
        assert_eq!(b.visual_payload.images().len(), 16);
        assert_eq!(b.generation.max_tokens, 256);
    }

    #[test]
    fn impression_requires_findings() {
        assert!(matches!(
            build(TaskKind::ImpressionGeneration, GazeMode::None, None),
            Err(Error::Argument(_))
        ));
        let b = build(TaskKind::ImpressionGeneration, GazeMode::Heatmap, Some("Clear lungs.")).unwrap();
        assert!(b.instruction.ends_with("Clear lungs."));
        assert_eq!(b.generation.max_tokens, 256);
    }

    #[test]
    fn missing_scanpath_is_an_error() {
        let image = base();
        let err = build_prompt(
            PromptInput {
                task: TaskKind::Diagnosis,
                gaze_mode: GazeMode::Heatmap,
                scanpath: None,
                image: &image,
                exemplars: &[],
                findings: None,
            },
            &Templates::default(),
            &RenderConfig::default(),
            &AssemblyOptions::default(),
        );
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn exemplar_count_warns_or_errors() {
        let image = base();
        let ex = vec!["only one".to_string()];
        let input = || PromptInput {
            task: TaskKind::Diagnosis,
            gaze_mode: GazeMode::None,
            scanpath: None,
            image: &image,
            exemplars: &ex,
            findings: None,
        };
        let b = build_prompt(input(), &Templates::default(), &RenderConfig::default(), &AssemblyOptions::default())
            .unwrap();
        assert_eq!(b.warnings.len(), 1);
        let strict = AssemblyOptions { strict: true, ..Default::default() };
        assert!(build_prompt(input(), &Templates::default(), &RenderConfig::default(), &strict).is_err());
    }

    #[test]
    fn instruction_is_independent_of_gaze_mode() {
        for task in [TaskKind::FindingsGeneration, TaskKind::Diagnosis] {
            let texts: Vec<String> = [GazeMode::None, GazeMode::Heatmap, GazeMode::FixationText, GazeMode::Video]
                .into_iter()
                .map(|m| build(task, m, None).unwrap().instruction)
                .collect();
            assert!(texts.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn fixation_text_mode_sends_plain_image() {
        let b = build(TaskKind::Diagnosis, GazeMode::FixationText, None).unwrap();
        match &b.visual_payload {
            VisualPayload::Plain(img) => assert_eq!(img, &base().pixels),
            other => panic!("unexpected payload {other:?}"),
        }
        assert!(b.fixation_text.as_deref().unwrap().starts_with("fixation 1:"));
    }

    #[test]
    fn serialization_order_and_attachments() {
        let b = build(TaskKind::Diagnosis, GazeMode::FixationText, None).unwrap();
        let req = serialize_bundle(&b, "m").unwrap();
        let content = &req.messages[0].content;
        assert_eq!(content.len(), 4);
        match (&content[0], &content[1], &content[2]) {
            (ContentPart::Text { text: e }, ContentPart::Text { text: f }, ContentPart::Text { text: i }) => {
                for ex in exemplars() {
                    assert!(e.contains(&ex));
                }
                assert!(f.contains("fixation 1:"));
                assert_eq!(i, &b.instruction);
            }
            _ => panic!("unexpected content order"),
        }
        assert_eq!(req.image_part_count(), 1);

        let heat = build(TaskKind::Diagnosis, GazeMode::Heatmap, None).unwrap();
        assert_eq!(serialize_bundle(&heat, "m").unwrap().image_part_count(), 1);
        let video = build(TaskKind::Diagnosis, GazeMode::Video, None).unwrap();
        let req = serialize_bundle(&video, "m").unwrap();
        assert_eq!(req.image_part_count(), 16);
        assert_eq!(req.to_bytes().unwrap(), serialize_bundle(&video, "m").unwrap().to_bytes().unwrap());
    }

    #[test]
    fn body_shape() {
        let b = build(TaskKind::Diagnosis, GazeMode::None, None).unwrap();
        let body: serde_json::Value = serde_json::from_slice(&serialize_bundle(&b, "llava").unwrap().to_bytes().unwrap()).unwrap();
        assert_eq!(body["model"], "llava");
        assert_eq!(body["max_tokens"], 64);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"][0]["type"], "text");
        let url = body["messages"][0]["content"][2]["image_url"]["url"].as_str().unwrap();
        assert!(url.starts_with("data:image/png;base64,"));
    }

    #[test]
    fn template_file_parsing() {
        let text = "# comment\n\
                    findings_instruction=Describe the film.\n\
                    Be thorough.\n\
                    diagnosis_instruction=List diagnoses.\n";
        let t = Templates::parse(text).unwrap();
        assert_eq!(t.findings_instruction, "Describe the film.\nBe thorough.");
        assert_eq!(t.diagnosis_instruction, "List diagnoses.");
        assert_eq!(t.impression_instruction, Templates::default().impression_instruction);
        assert!(Templates::parse("nonsense\n").is_err());
    }

    #[test]
    fn impression_without_placeholder_appends_findings() {
        let t = Templates { impression_instruction: "Write an impression.".into(), ..Default::default() };
        assert_eq!(
            t.instruction(TaskKind::ImpressionGeneration, Some("Clear.")),
            "Write an impression.\n\nFindings: Clear."
        );
    }
}
