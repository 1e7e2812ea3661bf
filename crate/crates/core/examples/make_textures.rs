//! Regenerates the bundled test images: `cargo run --example make_textures -- data/images`.

use std::path::PathBuf;

fn main() -> bitplanes::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/images".into()));
    std::fs::create_dir_all(&dir).map_err(|source| bitplanes::Error::Io {
        path: dir.clone(),
        source,
    })?;
    for seed in 1..=6u64 {
        let img = bitplanes::eval::procedural_texture(320, 240, seed)?;
        let path = dir.join(format!("texture_{seed:02}.pgm"));
        bitplanes::save_image(&img, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}
