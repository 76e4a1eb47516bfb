//! Score a single image: fit a model on noise, then compare a fresh draw's
//! likelihood against its compressed length.

use ood_core::codecs::{complexity, CodecId, CodecRegistry};
use ood_core::data::synth_noise;
use ood_core::density::ContextModel;
use ood_core::score::s_score;

fn main() -> Result<(), ood_core::Error> {
    let train = synth_noise(500, 7)?;
    let model: ContextModel<f64> = ContextModel::fit(&train, 2, 1.0)?;

    let fresh = synth_noise(1, 8)?;
    let probe = &fresh.images()[0];
    let nll = model.nll_bpd(probe);
    let l = complexity(probe, &CodecId::PngLike, &CodecRegistry::empty())?;
    let s = s_score(nll, l)?;
    println!("nll = {nll:.3} bpd, L = {l:.3} bpd, S = {s:.3}");
    Ok(())
}
