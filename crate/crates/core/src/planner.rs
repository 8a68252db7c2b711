//! Resolution planning and prompt templates for training and inference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PROMPT: &str =
    "Style Transfer the style of Figure 2 to Figure 1, and keep the content and characteristics of Figure 1.";

pub const DEFAULT_MIN_EDGE: u32 = 1024;
pub const DEFAULT_MULTIPLE: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionPlan {
    pub output_w: u32,
    pub output_h: u32,
    /// Edge of the square the style reference is resized to.
    pub style_side: u32,
}

/// The generated image keeps the content reference's size; the style
/// reference becomes a square on the shorter content edge.
pub fn plan_inference_resolution(content_w: u32, content_h: u32) -> Result<ResolutionPlan> {
    if content_w == 0 || content_h == 0 {
        return Err(Error::InvalidDimensions(format!(
            "content {content_w}x{content_h} must be at least 1x1"
        )));
    }
    Ok(ResolutionPlan {
        output_w: content_w,
        output_h: content_h,
        style_side: content_w.min(content_h),
    })
}

/// round(num / den), halves away from zero, for positive operands.
fn div_round_half_up(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

/// Scales `(w, h)` so the shorter edge is `min_edge` and both edges are
/// multiples of `multiple`.
///
/// The longer edge is `round(edge * min_edge / short / multiple) * multiple`
/// computed in exact integer arithmetic.
pub fn plan_training_resolution(w: u32, h: u32, min_edge: u32, multiple: u32) -> Result<(u32, u32)> {
    if multiple == 0 {
        return Err(Error::InvalidConfig("multiple must be positive".into()));
    }
    if min_edge == 0 || !min_edge.is_multiple_of(multiple) {
        return Err(Error::InvalidConfig(format!(
            "min_edge {min_edge} must be a positive multiple of {multiple}"
        )));
    }
    if w < multiple || h < multiple {
        return Err(Error::InvalidDimensions(format!(
            "{w}x{h} is smaller than the {multiple}px grid"
        )));
    }
    let short = u64::from(w.min(h));
    let scale_edge = |edge: u32| -> u32 {
        if u64::from(edge) == short {
            return min_edge;
        }
        let steps = div_round_half_up(u64::from(edge) * u64::from(min_edge), short * u64::from(multiple));
        (steps * u64::from(multiple)) as u32
    };
    Ok((scale_edge(w), scale_edge(h)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTemplate {
    Default,
    Material,
    Style,
}

impl PromptTemplate {
    fn name(self) -> &'static str {
        match self {
            PromptTemplate::Default => "default",
            PromptTemplate::Material => "material",
            PromptTemplate::Style => "style",
        }
    }
}

impl std::str::FromStr for PromptTemplate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "default" => Ok(PromptTemplate::Default),
            "material" => Ok(PromptTemplate::Material),
            "style" => Ok(PromptTemplate::Style),
            other => Err(format!("unknown template {other:?}")),
        }
    }
}

pub fn render_prompt(template: PromptTemplate, arg: Option<&str>) -> Result<String> {
    let arg = arg.map(str::trim).filter(|a| !a.is_empty());
    match (template, arg) {
        (PromptTemplate::Default, _) => Ok(DEFAULT_PROMPT.to_string()),
        (PromptTemplate::Material, Some(a)) => Ok(format!("Transfer Figure 1 into {a} material.")),
        (PromptTemplate::Style, Some(a)) => Ok(format!("Transfer Figure 1 into {a} style.")),
        (t, None) => Err(Error::MissingTemplateArg(t.name())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inference_plan_keeps_content_size() {
        let p = plan_inference_resolution(1024, 768).unwrap();
        assert_eq!((p.output_w, p.output_h, p.style_side), (1024, 768, 768));
        assert_eq!(plan_inference_resolution(512, 512).unwrap().style_side, 512);
        assert_eq!(plan_inference_resolution(1920, 1080).unwrap().style_side, 1080);
        assert!(plan_inference_resolution(0, 10).is_err());
    }

    #[test]
    fn training_plan_examples() {
        assert_eq!(plan_training_resolution(2048, 1536, 1024, 16).unwrap(), (1360, 1024));
        assert_eq!(plan_training_resolution(1024, 1024, 1024, 16).unwrap(), (1024, 1024));
        assert_eq!(plan_training_resolution(1536, 2048, 1024, 16).unwrap(), (1024, 1360));
    }

    #[test]
    fn training_plan_rejects_tiny_images() {
        assert!(plan_training_resolution(15, 600, 1024, 16).is_err());
        assert!(plan_training_resolution(600, 600, 1000, 16).is_err());
    }

    #[test]
    fn rounding_ties_go_up() {
        // 1010 * 32 / 20 = 1616 = 101 * 16 exactly.
        assert_eq!(plan_training_resolution(1010, 20, 32, 16).unwrap(), (1616, 32));
        // 1005 * 32 / 20 = 1608 = 100.5 * 16 → rounds up to 101 * 16.
        assert_eq!(plan_training_resolution(1005, 20, 32, 16).unwrap(), (1616, 32));
    }

    #[test]
    fn prompt_templates() {
        assert_eq!(
            render_prompt(PromptTemplate::Default, None).unwrap(),
            "Style Transfer the style of Figure 2 to Figure 1, and keep the content and characteristics of Figure 1."
        );
        assert_eq!(
            render_prompt(PromptTemplate::Material, Some("metal")).unwrap(),
            "Transfer Figure 1 into metal material."
        );
        assert_eq!(
            render_prompt(PromptTemplate::Style, Some("Van-Gogh")).unwrap(),
            "Transfer Figure 1 into Van-Gogh style."
        );
        assert!(render_prompt(PromptTemplate::Style, None).is_err());
        assert!(render_prompt(PromptTemplate::Material, Some("  ")).is_err());
    }

    proptest! {
        #[test]
        fn training_dims_sit_on_the_grid(w in 16u32..8000, h in 16u32..8000) {
            let (tw, th) = plan_training_resolution(w, h, 1024, 16).unwrap();
            prop_assert_eq!(tw % 16, 0);
            prop_assert_eq!(th % 16, 0);
            prop_assert_eq!(tw.min(th), 1024);
            // Aspect ratio within one grid step on the long edge.
            let ideal = f64::from(w.max(h)) * 1024.0 / f64::from(w.min(h));
            prop_assert!((f64::from(tw.max(th)) - ideal).abs() <= 8.0 + 1e-9);
        }

        #[test]
        fn inference_style_plan_is_square(w in 1u32..10000, h in 1u32..10000) {
            let p = plan_inference_resolution(w, h).unwrap();
            prop_assert_eq!((p.output_w, p.output_h), (w, h));
            prop_assert_eq!(p.style_side, w.min(h));
        }
    }
}
