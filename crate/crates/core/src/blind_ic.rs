//! Blind OFDM cancellation over a small pool of transmission hypotheses.
//!
//! The OTFS receiver does not know the OFDM user's modulation or which slots
//! it occupies. Each hypothesis is tried in turn: detect the OFDM columns it
//! claims, rebuild their received contribution, subtract it, and measure the
//! leftover energy over every OFDM column of the mask. The smallest residual
//! wins; ties go to the lower modulation order, then to pool order.

use crate::channel::{ChannelRealization, NoiseModel, OfdmPhaseReference};
use crate::coding::Modulation;
use crate::error::RxError;
use crate::geometry::FrameGeometry;
use crate::grid::TimeFrame;
use crate::rx_ofdm::{decision_grid, detect_ofdm_columns};
use crate::rx_otfs::tdic_cancel;
use crate::sparse::CsrMatrix;
use crate::tx::{FrameLayout, Normalization};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: String,
    pub modulation: Modulation,
    /// Occupied OFDM slots; `None` means every slot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<Vec<usize>>,
}

impl Hypothesis {
    pub fn full(modulation: Modulation) -> Self {
        Hypothesis {
            id: modulation.to_string(),
            modulation,
            slots: None,
        }
    }

    pub fn layout(&self, geometry: &FrameGeometry) -> Result<FrameLayout, RxError> {
        match &self.slots {
            None => Ok(FrameLayout::hybrid(geometry)),
            Some(slots) => match slots.iter().find(|&&s| s >= geometry.n_dd()) {
                Some(&bad) => Err(RxError::Occupancy(bad)),
                None => Ok(FrameLayout::hybrid_slots(geometry, slots)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlindOutcome {
    /// Index of the winning hypothesis in the pool.
    pub chosen: usize,
    pub cleaned: TimeFrame,
    /// Residual energy per hypothesis, in pool order.
    pub scores: Vec<f64>,
}

/// Everything the cancellation needs to know about the link.
#[derive(Debug, Clone, Copy)]
pub struct BlindContext<'a> {
    pub channel: &'a ChannelRealization,
    pub ht: &'a CsrMatrix,
    pub geometry: &'a FrameGeometry,
    pub noise: &'a NoiseModel,
    pub normalization: Normalization,
    pub reference: OfdmPhaseReference,
}

fn residual_energy(frame: &TimeFrame, geometry: &FrameGeometry) -> f64 {
    let m = geometry.m();
    geometry
        .mask()
        .ofdm_columns()
        .iter()
        .map(|&c| frame.block(m, c).iter().map(|v| v.norm_sqr()).sum::<f64>())
        .sum()
}

pub fn blind_cancel(r: &TimeFrame, ctx: &BlindContext<'_>, pool: &[Hypothesis]) -> Result<BlindOutcome, RxError> {
    if pool.is_empty() {
        return Err(RxError::EmptyPool);
    }
    let mut best: Option<(usize, TimeFrame)> = None;
    let mut scores = Vec::with_capacity(pool.len());
    for (i, hyp) in pool.iter().enumerate() {
        let layout = hyp.layout(ctx.geometry)?;
        let estimates = detect_ofdm_columns(
            r,
            ctx.channel,
            ctx.geometry,
            &layout.ofdm_columns,
            ctx.noise,
            ctx.reference,
        )?;
        let mut decided = decision_grid(&estimates, hyp.modulation);
        if estimates.is_empty() {
            decided = crate::grid::Grid::zeros(ctx.geometry.ofdm_len(), 0);
        }
        let cleaned = tdic_cancel(r, ctx.ht, &decided, &layout, ctx.geometry, ctx.normalization)?;
        let score = residual_energy(&cleaned, ctx.geometry);
        let better = match &best {
            None => true,
            Some((j, _)) => {
                let (s_best, m_best) = (scores[*j], pool[*j].modulation);
                score < s_best || (score == s_best && hyp.modulation < m_best)
            }
        };
        scores.push(score);
        if better {
            best = Some((i, cleaned));
        }
    }
    let (chosen, cleaned) = best.expect("pool is non-empty");
    Ok(BlindOutcome {
        chosen,
        cleaned,
        scores,
    })
}
