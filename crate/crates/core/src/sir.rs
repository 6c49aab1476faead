//! Downlink SIR at the typical user from realized channels and precoders.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::Distribution;

use crate::channel::{ChannelSet, TYPICAL_UE};
use crate::error::Error;
use crate::geometry::TypicalUserContext;
use crate::precoding::{Precoder, PrecoderScheme};
use crate::Result;

/// One SIR measurement with its power decomposition (all components carry
/// their path-loss scaling; the common transmit power cancels in the ratio).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SirSample {
    /// Linear SIR; `f64::INFINITY` with `infinite` set when there is no
    /// interference at all (isolated single-cell scenarios).
    pub value: f64,
    pub scheme: PrecoderScheme,
    pub signal: f64,
    pub intra_cell: f64,
    pub out_of_cell: f64,
    pub infinite: bool,
}

impl SirSample {
    pub(crate) fn assemble(scheme: PrecoderScheme, signal: f64, intra_cell: f64, out_of_cell: f64) -> SirSample {
        let denom = intra_cell + out_of_cell;
        if denom > 0.0 {
            SirSample {
                value: signal / denom,
                scheme,
                signal,
                intra_cell,
                out_of_cell,
                infinite: false,
            }
        } else {
            SirSample {
                value: f64::INFINITY,
                scheme,
                signal,
                intra_cell,
                out_of_cell,
                infinite: true,
            }
        }
    }
}

/// Exact SIR of the typical user: the serving station's column 0 carries the
/// typical user's data (engine convention), every other serving column is
/// intra-cell interference, and every other station in `precoders`
/// contributes out-of-cell interference through its realized crosstalk.
///
/// All links (station, [`TYPICAL_UE`]) referenced by `precoders` must be
/// present in `channels` with true fading and path loss.
pub fn compute_sir(
    ctx: &TypicalUserContext,
    channels: &ChannelSet,
    precoders: &BTreeMap<usize, Precoder>,
) -> Result<SirSample> {
    let serving = precoders
        .get(&ctx.serving_bs)
        .ok_or_else(|| Error::Consistency(format!("no precoder for serving station {}", ctx.serving_bs)))?;
    let x_serv = channels.true_fading((ctx.serving_bs, TYPICAL_UE))?;
    if x_serv.len() != serving.n_antennas() {
        return Err(Error::Consistency(format!(
            "fading dimension {} does not match precoder antennas {}",
            x_serv.len(),
            serving.n_antennas()
        )));
    }
    let pl_serv = channels.path_loss((ctx.serving_bs, TYPICAL_UE))?;

    let mut signal = 0.0;
    let mut intra = 0.0;
    for l in 0..serving.k_served() {
        let gain = x_serv.0.dotc(&serving.columns.column(l).into_owned()).norm_sqr() * pl_serv;
        if l == 0 {
            signal = gain;
        } else {
            intra += gain;
        }
    }

    let mut out = 0.0;
    for (&bs, precoder) in precoders {
        if bs == ctx.serving_bs {
            continue;
        }
        let x = channels.true_fading((bs, TYPICAL_UE))?;
        let pl = channels.path_loss((bs, TYPICAL_UE))?;
        let mut effective = 0.0;
        for l in 0..precoder.k_served() {
            effective += x.0.dotc(&precoder.columns.column(l).into_owned()).norm_sqr();
        }
        out += pl * effective;
    }

    Ok(SirSample::assemble(serving.scheme, signal, intra, out))
}

/// Effective interferer fading `g ~ Gamma(K, 1/K)` (mean 1): the aggregate
/// crosstalk power of a `K`-column unit-power precoder onto an independent
/// receiver direction.
pub fn sample_effective_fading(k: usize, rng: &mut impl Rng) -> Result<f64> {
    if k < 1 {
        return Err(Error::parameter("k", "must be at least 1"));
    }
    let gamma = rand_distr::Gamma::new(k as f64, 1.0 / k as f64)
        .map_err(|e| Error::parameter("k", format!("invalid Gamma parameters: {e}")))?;
    Ok(gamma.sample(rng))
}
