//! Saves a model to a JSON checkpoint, reloads it, and confirms the flow is
//! reproduced bit for bit.

use mrmap::flow::run_flow;
use mrmap::io::{load_checkpoint, save_checkpoint};
use mrmap::operators::{make_latent, sample_mask};
use mrmap::train::TrainConfig;
use mrmap::{PotentialParams, Result, RngStream};

fn main() -> Result<()> {
    let config = TrainConfig::default();
    let mut rng = RngStream::new(9, 0);
    let params = PotentialParams::init(4, config.model.q, config.model.ell, config.hyper(), &mut rng)?;

    let dir = std::env::temp_dir().join("mrmap_checkpoint_example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("checkpoint.json");
    save_checkpoint(&path, &params, &config, &[])?;
    let loaded = load_checkpoint(&path)?;
    println!("{} ({} bytes, format {})", path.display(), std::fs::metadata(&path)?.len(), loaded.format_version);

    let x = rng.normals(4);
    let datum = make_latent(&x, sample_mask(4, 0.5, &mut rng)?, 0.1, &mut rng)?;
    let before = run_flow(&params, &datum)?;
    let after = run_flow(&loaded.params, &datum)?;
    let identical = before
        .u
        .iter()
        .flat_map(|u| u.iter())
        .zip(after.u.iter().flat_map(|u| u.iter()))
        .all(|(a, b)| a.to_bits() == b.to_bits());
    println!("parameters identical: {}", loaded.params == params);
    println!("trajectories identical bitwise: {identical}");
    Ok(())
}
