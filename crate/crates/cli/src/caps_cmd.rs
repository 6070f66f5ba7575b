use std::path::PathBuf;

use clap::Args;
use decoupling_core::caps::{cap_family, family_to_csv, family_to_json};
use serde::Serialize;

use crate::config::{config_hash, output_dir, parse_kind, parse_u64, parse_usize, Layer};
use crate::error::{CliError, CliResult};
use crate::{out, svg, Global};

#[derive(Debug, Args)]
pub struct CapsArgs {
    /// Scale R (a power of 2^(2m)); `2^8` is accepted.
    #[arg(long = "R")]
    pub r: Option<String>,
    /// Half-degree of the phase t^(2m).
    #[arg(long)]
    pub m: Option<String>,
    /// Frequency dimension (1 to 3).
    #[arg(long)]
    pub d: Option<String>,
    /// f4, f4tilde, f4mixed[1,2] or uniform.
    #[arg(long)]
    pub kind: Option<String>,
    /// Output directory (default: <results>/<config hash>).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct CapsConfig {
    #[serde(rename = "R")]
    r: u64,
    m: u32,
    d: usize,
    kind: String,
}

pub fn run(g: &Global, args: &CapsArgs) -> CliResult<()> {
    let layer = Layer::load(g.config.as_deref(), "caps")?;
    let cfg = CapsConfig {
        r: parse_u64("R", layer.pick(&args.r, "r").unwrap_or("256"))?,
        m: parse_usize("m", layer.pick(&args.m, "m").unwrap_or("2"))? as u32,
        d: parse_usize("d", layer.pick(&args.d, "d").unwrap_or("3"))?,
        kind: parse_kind(layer.pick(&args.kind, "kind").unwrap_or("f4"))?.label(),
    };
    let kind = parse_kind(&cfg.kind)?;
    let fam = cap_family(cfg.r, cfg.m, cfg.d, kind)?;
    let hash = config_hash("caps", &cfg);
    let dir = output_dir(args.out.as_deref(), g.results_dir.as_deref(), &hash);
    out::ensure_dir(&dir)?;
    out::write_json(&dir.join("config.json"), &crate::tagged("caps", &hash, &cfg))?;
    out::write_json(&dir.join("caps.json"), &family_to_json(&fam))?;
    let mut csv = Vec::new();
    family_to_csv(&fam, &mut csv).map_err(|e| CliError::io(&dir.join("caps.csv"), e))?;
    out::write_bytes(&dir.join("caps.csv"), &csv)?;
    out::write_bytes(&dir.join("caps.svg"), svg::caps_svg(&fam).as_bytes())?;
    println!(
        "{} caps (R={}, m={}, d={}, kind={}) written to {}",
        fam.len(),
        cfg.r,
        cfg.m,
        cfg.d,
        cfg.kind,
        dir.display()
    );
    Ok(())
}
