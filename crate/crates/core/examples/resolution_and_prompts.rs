//! Inference and training resolutions, and the instruction templates.
//!
//! ```bash
//! cargo run --example resolution_and_prompts
//! ```

use stylecurate::planner::{
    plan_inference_resolution, plan_training_resolution, render_prompt, PromptTemplate, DEFAULT_MIN_EDGE,
    DEFAULT_MULTIPLE,
};

fn main() -> stylecurate::Result<()> {
    for (w, h) in [(1024, 768), (1920, 1080), (512, 512)] {
        let plan = plan_inference_resolution(w, h)?;
        println!("content {w}x{h}: output {}x{}, style {}^2", plan.output_w, plan.output_h, plan.style_side);
    }
    for (w, h) in [(2048, 1536), (1536, 2048), (1000, 1000), (3000, 1000)] {
        let (tw, th) = plan_training_resolution(w, h, DEFAULT_MIN_EDGE, DEFAULT_MULTIPLE)?;
        println!("train {w}x{h} -> {tw}x{th}");
    }
    println!("{}", render_prompt(PromptTemplate::Default, None)?);
    println!("{}", render_prompt(PromptTemplate::Material, Some("glass"))?);
    println!("{}", render_prompt(PromptTemplate::Style, Some("ukiyo-e"))?);
    if let Err(e) = render_prompt(PromptTemplate::Style, None) {
        println!("missing argument: {e}");
    }
    Ok(())
}
