//! Reverse-mode gradients of the training loss against central differences,
//! tensor by tensor.

use std::collections::BTreeMap;

use mrmap::grad::fd_report;
use mrmap::operators::{make_latent, sample_mask};
use mrmap::potential::Hyper;
use mrmap::{PotentialParams, Result, RngStream};

fn main() -> Result<()> {
    let (p, q, ell) = (3, 5, 4);
    let mut rng = RngStream::new(2, 0);
    let hyper = Hyper {
        cg_iters: 5,
        ..Hyper::default()
    };
    let mut params = PotentialParams::init(p, q, ell, hyper, &mut rng)?;
    for v in params.omega_w.as_mut_slice() {
        *v = 0.3 * rng.normal();
    }
    for layer in &mut params.layers {
        layer.w.iter_mut().for_each(|w| *w = 0.5 * rng.uniform());
    }
    let x = rng.normals(p);
    let datum = make_latent(&x, sample_mask(p, 0.67, &mut rng)?, 0.2, &mut rng)?;

    let entries = fd_report(&params, &datum, &x, 1.0, 1.0, 1e-4)?;
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for e in &entries {
        let slot = worst.entry(e.kind.to_string()).or_insert(0.0);
        *slot = slot.max(e.rel_error);
    }
    for (kind, err) in &worst {
        println!("{kind:>8}: max relative error {err:.2e}");
    }
    println!("{} entries checked", entries.len());
    Ok(())
}
