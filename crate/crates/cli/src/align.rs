use anyhow::{bail, Context, Result};
use bitplanes::{align, load_image, precompute_template, WarpParams};
use serde_json::json;

use crate::args::AlignArgs;

/// Prints the alignment result (or `{"error": ...}` when the solver fails)
/// as JSON on stdout.
pub fn run(args: &AlignArgs) -> Result<()> {
    let cfg = args.solver.config()?;
    let template = load_image(&args.template)?;
    let moving = load_image(&args.moving)?;
    let init = match &args.init {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            let w: WarpParams = serde_json::from_str(&text).with_context(|| format!("bad warp in {}", p.display()))?;
            if w.model() != cfg.model {
                bail!(
                    "initial warp is {} but --model is {}",
                    w.model().name(),
                    cfg.model.name()
                );
            }
            w
        }
        None => WarpParams::identity(cfg.model),
    };
    let model = precompute_template(&template, args.rect, &cfg).context("cannot build the template")?;
    let value = match align(&model, &moving, &init, &cfg) {
        Ok(r) => serde_json::to_value(&r)?,
        Err(e) => json!({ "error": e.to_string() }),
    };
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}
