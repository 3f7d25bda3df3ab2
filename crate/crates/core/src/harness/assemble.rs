use ndarray::{s, Array2};

use crate::dsp::{Band, FeatureTensor, State};
use crate::error::{Error, Result};

/// Width of the node features built from `bands × states` latents of width `latent`.
pub fn feature_width(bands: usize, states: usize, latent: usize) -> usize {
    bands * states * latent
}

/// Concatenates one patient's latent vectors into a `sites × N′` matrix.
///
/// The order is fixed regardless of how the subsets are listed: states
/// (wake, sleep, seizure) outer, bands (delta … high gamma) inner.
pub fn assemble_node_features(latent: &FeatureTensor, bands: &[Band], states: &[State]) -> Result<Array2<f64>> {
    if bands.is_empty() || states.is_empty() {
        return Err(Error::config("band and state subsets must be non-empty"));
    }
    let state_idx = State::BEHAVIORAL
        .iter()
        .filter(|s| states.contains(s))
        .map(|s| {
            latent.states.iter().position(|t| t == s).ok_or_else(|| {
                Error::domain(format!("patient {} latents lack state {}", latent.patient, s.name()))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let band_idx = Band::ALL
        .iter()
        .filter(|b| bands.contains(b))
        .map(|b| {
            latent.bands.iter().position(|t| t == b).ok_or_else(|| {
                Error::domain(format!("patient {} latents lack band {}", latent.patient, b.name()))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = latent.unit_len();
    let mut x = Array2::zeros((latent.sites(), feature_width(band_idx.len(), state_idx.len(), n)));
    let mut col = 0;
    for &st in &state_idx {
        for &b in &band_idx {
            x.slice_mut(s![.., col..col + n]).assign(&latent.data.slice(s![.., st, b, ..]));
            col += n;
        }
    }
    Ok(x)
}
