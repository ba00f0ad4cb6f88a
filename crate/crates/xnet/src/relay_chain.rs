//! Two-hop relaying: M sources reach M destinations only through K
//! half-duplex relays, so a message crosses two X networks back to back.
//! Each end-to-end message splits into K submessages, one per relay; the
//! first hop delivers submessage (source j, relay k) as the M x K network
//! message (k, j), and the second hop forwards it as the K x M network
//! message (j, k). Relays decode before forwarding, which is what makes
//! the X-network machinery applicable hop by hop.
//!
//! The two phases occupy disjoint extension blocks of mu1 and mu2 slots,
//! so relays never transmit and receive at the same time and the
//! end-to-end rate accounting divides by mu1 + mu2.

use crate::channel::{
    extend, sample_channel, ChannelError, ChannelProcess, DEFAULT_H_MAX, DEFAULT_H_MIN,
};
use crate::schemes::{
    build_2xm_reciprocal, build_general, build_mx2, compute_zero_forcing, general_extension_len,
    verify_plan, AlignmentReport, BeamformingPlan, Dof, SchemeError,
};
use crate::seeds;
use num::rational::Ratio;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RelayError {
    #[error("no perfect construction covers a {tx} x {rx} hop (one side must have 2 nodes)")]
    UnsupportedPerfect { tx: usize, rx: usize },
    #[error("phase {phase} plan failed verification: {detail}")]
    PhaseVerification { phase: u8, detail: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

/// How each hop builds its X-network plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopScheme {
    /// Exact alignment; needs 2 nodes on one side of every hop.
    Perfect,
    /// Partial alignment at the given order, any shape.
    General { order: u32 },
}

/// The two channel processes of a relay network: sources to relays, then
/// relays to destinations.
#[derive(Debug, Clone)]
pub struct RelayTopology {
    /// End-node count on each side.
    pub m: usize,
    /// Relay count.
    pub k: usize,
    pub hop1: ChannelProcess,
    pub hop2: ChannelProcess,
}

/// Achievable end-to-end DoF bound: MK / (2(M + K - 1)).
pub fn relay_dof(m: u64, k: u64) -> Ratio<u64> {
    assert!(m >= 1 && k >= 1);
    Ratio::new(m * k, 2 * (m + k - 1))
}

/// Extension length a hop of the given shape needs under a scheme.
pub fn hop_extension_len(tx: usize, rx: usize, scheme: HopScheme) -> Result<usize, RelayError> {
    match scheme {
        HopScheme::Perfect => {
            if rx == 2 {
                Ok(tx + 1)
            } else if tx == 2 {
                Ok(rx + 1)
            } else {
                Err(RelayError::UnsupportedPerfect { tx, rx })
            }
        }
        HopScheme::General { order } => Ok(general_extension_len(tx, rx, order)),
    }
}

impl RelayTopology {
    /// Draw both hops from the bounded continuous law, sized exactly for
    /// the scheme's extensions.
    pub fn sample(
        m: usize,
        k: usize,
        scheme: HopScheme,
        seed: u64,
    ) -> Result<RelayTopology, RelayError> {
        let mu1 = hop_extension_len(m, k, scheme)?;
        let mu2 = hop_extension_len(k, m, scheme)?;
        let hop1 = sample_channel(
            m,
            k,
            mu1,
            seeds::derive(seed, "hop1"),
            DEFAULT_H_MIN,
            DEFAULT_H_MAX,
        )?;
        let hop2 = sample_channel(
            k,
            m,
            mu2,
            seeds::derive(seed, "hop2"),
            DEFAULT_H_MIN,
            DEFAULT_H_MAX,
        )?;
        Ok(RelayTopology { m, k, hop1, hop2 })
    }
}

/// Pairing of one submessage's streams across the two hops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamLink {
    pub source: usize,
    pub relay: usize,
    /// Streams carried end to end: the smaller of the two hops' counts.
    pub streams: usize,
    /// First-hop streams with no second-hop partner.
    pub lost_phase1: usize,
    /// Second-hop capacity the first hop cannot fill.
    pub lost_phase2: usize,
}

/// A verified two-phase scheme with its end-to-end accounting.
#[derive(Debug)]
pub struct TwoHopScheme {
    pub plan1: BeamformingPlan,
    pub plan2: BeamformingPlan,
    pub report1: AlignmentReport,
    pub report2: AlignmentReport,
    /// One entry per (source, relay) submessage.
    pub stream_map: Vec<StreamLink>,
    pub end_to_end_dof: Dof,
}

impl TwoHopScheme {
    pub fn paired_streams(&self) -> usize {
        self.stream_map.iter().map(|l| l.streams).sum()
    }

    pub fn lost_streams(&self) -> (usize, usize) {
        let p1 = self.stream_map.iter().map(|l| l.lost_phase1).sum();
        let p2 = self.stream_map.iter().map(|l| l.lost_phase2).sum();
        (p1, p2)
    }
}

fn build_hop_plan(
    ext: &crate::channel::ExtendedChannel,
    scheme: HopScheme,
    seed: u64,
) -> Result<BeamformingPlan, RelayError> {
    let plan = match scheme {
        HopScheme::Perfect => {
            if ext.rx_count == 2 {
                build_mx2(ext, seed)?
            } else if ext.tx_count == 2 {
                // Run the exact construction on the mirrored network and
                // swap beamformer and zero-forcer roles back.
                let primal_ext = ext.reciprocal();
                let primal =
                    compute_zero_forcing(build_mx2(&primal_ext, seed)?, &primal_ext)?;
                build_2xm_reciprocal(&primal, &primal_ext)?
            } else {
                return Err(RelayError::UnsupportedPerfect {
                    tx: ext.tx_count,
                    rx: ext.rx_count,
                });
            }
        }
        HopScheme::General { order } => build_general(ext, order, seed)?,
    };
    if plan.has_zero_forcing() {
        Ok(plan)
    } else {
        Ok(compute_zero_forcing(plan, ext)?)
    }
}

/// Build, verify and pair both phases.
///
/// Phase 2 is only attempted once phase 1 verifies: the relays must be
/// able to decode their submessages before there is anything to forward.
/// Where the hops disagree on a submessage's stream count the pairing
/// takes the smaller side and the difference shows up in the link's loss
/// fields rather than the DoF.
pub fn compose_two_hop(
    topology: &RelayTopology,
    scheme: HopScheme,
    seed: u64,
) -> Result<TwoHopScheme, RelayError> {
    let mu1 = hop_extension_len(topology.m, topology.k, scheme)?;
    let mu2 = hop_extension_len(topology.k, topology.m, scheme)?;
    let ext1 = extend(&topology.hop1, 0, mu1)?;
    let ext2 = extend(&topology.hop2, 0, mu2)?;

    let plan1 = build_hop_plan(&ext1, scheme, seeds::derive(seed, "phase1-beams"))?;
    let report1 = verify_plan(&plan1, &ext1, 1e-9);
    if !report1.pass {
        return Err(RelayError::PhaseVerification {
            phase: 1,
            detail: format!(
                "max residual {:.3e}, interference dims {:?}",
                report1.max_residual, report1.interference_dims
            ),
        });
    }

    let plan2 = build_hop_plan(&ext2, scheme, seeds::derive(seed, "phase2-beams"))?;
    let report2 = verify_plan(&plan2, &ext2, 1e-9);
    if !report2.pass {
        return Err(RelayError::PhaseVerification {
            phase: 2,
            detail: format!(
                "max residual {:.3e}, interference dims {:?}",
                report2.max_residual, report2.interference_dims
            ),
        });
    }

    let mut stream_map = Vec::with_capacity(topology.m * topology.k);
    for j in 1..=topology.m {
        for k in 1..=topology.k {
            let s1 = plan1.streams(k, j);
            let s2 = plan2.streams(j, k);
            let streams = s1.min(s2);
            stream_map.push(StreamLink {
                source: j,
                relay: k,
                streams,
                lost_phase1: s1 - streams,
                lost_phase2: s2 - streams,
            });
        }
    }
    let paired: usize = stream_map.iter().map(|l| l.streams).sum();
    let end_to_end_dof = Dof::new(paired as u64, (plan1.mu + plan2.mu) as u64);
    Ok(TwoHopScheme {
        plan1,
        plan2,
        report1,
        report2,
        stream_map,
        end_to_end_dof,
    })
}

/// Sample a topology and compose in one step.
pub fn compose_sampled(
    m: usize,
    k: usize,
    scheme: HopScheme,
    seed: u64,
) -> Result<TwoHopScheme, RelayError> {
    let topology = RelayTopology::sample(m, k, scheme, seed)?;
    compose_two_hop(&topology, scheme, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::ToPrimitive;

    #[test]
    fn dof_formula_values() {
        assert_eq!(relay_dof(2, 2), Ratio::new(2, 3));
        assert_eq!(relay_dof(1, 1), Ratio::new(1, 2));
        assert_eq!(relay_dof(3, 2), Ratio::new(3, 4));
        assert_eq!(relay_dof(3, 5), relay_dof(5, 3));
        assert!(relay_dof(2, 1000).to_f64().unwrap() > 0.999);
    }

    #[test]
    fn perfect_two_by_two_hits_the_bound_exactly() {
        let scheme = compose_sampled(2, 2, HopScheme::Perfect, 7).unwrap();
        assert_eq!(scheme.end_to_end_dof, Dof::new(2, 3));
        assert_eq!(scheme.lost_streams(), (0, 0));
        assert_eq!(scheme.plan1.mu + scheme.plan2.mu, 6);
        assert!(scheme.report1.pass && scheme.report2.pass);
    }

    #[test]
    fn perfect_schemes_reach_the_bound_when_one_side_has_two_nodes() {
        for (m, k) in [(3usize, 2usize), (2, 3), (4, 2), (2, 5)] {
            let scheme = compose_sampled(m, k, HopScheme::Perfect, 11).unwrap();
            let want = relay_dof(m as u64, k as u64);
            assert_eq!(
                scheme.end_to_end_dof, want,
                "({m},{k}) got {} want {want}",
                scheme.end_to_end_dof
            );
            assert_eq!(scheme.lost_streams(), (0, 0));
        }
    }

    #[test]
    fn perfect_rejects_shapes_without_a_two_node_side() {
        assert!(matches!(
            compose_sampled(3, 3, HopScheme::Perfect, 1),
            Err(RelayError::UnsupportedPerfect { tx: 3, rx: 3 })
        ));
    }

    #[test]
    fn general_composition_pays_for_mismatched_stream_counts() {
        let scheme = compose_sampled(2, 2, HopScheme::General { order: 1 }, 5).unwrap();
        // Each hop carries 6 streams, but submessage pairing only
        // sustains 5: one stream per phase has no partner.
        assert_eq!(scheme.paired_streams(), 5);
        assert_eq!(scheme.lost_streams(), (1, 1));
        assert_eq!(scheme.end_to_end_dof, Dof::new(1, 2));
    }

    #[test]
    fn general_composition_climbs_toward_the_bound() {
        let bound = relay_dof(2, 2);
        let mut last = None;
        for order in 1..=3u32 {
            let scheme = compose_sampled(2, 2, HopScheme::General { order }, 13).unwrap();
            let dof = scheme.end_to_end_dof;
            assert!(dof < bound, "order {order}: {dof} not below {bound}");
            if let Some(prev) = last {
                assert!(dof > prev, "order {order}: {dof} not above {prev}");
            }
            last = Some(dof);
        }
    }

    #[test]
    fn submessage_partition_covers_every_source_relay_pair() {
        let scheme = compose_sampled(3, 2, HopScheme::General { order: 1 }, 17).unwrap();
        let mut seen: Vec<(usize, usize)> =
            scheme.stream_map.iter().map(|l| (l.source, l.relay)).collect();
        seen.sort_unstable();
        let want: Vec<(usize, usize)> =
            (1..=3).flat_map(|j| (1..=2).map(move |k| (j, k))).collect();
        assert_eq!(seen, want);
        assert!(scheme.stream_map.iter().all(|l| l.streams > 0));
    }

    #[test]
    fn end_to_end_never_beats_the_bound() {
        for (m, k, scheme) in [
            (2usize, 2usize, HopScheme::Perfect),
            (2, 2, HopScheme::General { order: 2 }),
            (3, 2, HopScheme::General { order: 1 }),
            (2, 3, HopScheme::General { order: 1 }),
        ] {
            let composed = compose_sampled(m, k, scheme, 23).unwrap();
            let dof = composed.end_to_end_dof;
            assert!(dof <= relay_dof(m as u64, k as u64), "({m},{k},{scheme:?})");
        }
    }

    #[test]
    fn undersampled_topology_is_rejected() {
        // First hop only covers 2 slots where the perfect scheme needs 3.
        let hop1 = sample_channel(2, 2, 2, 31, DEFAULT_H_MIN, DEFAULT_H_MAX).unwrap();
        let hop2 = sample_channel(2, 2, 3, 32, DEFAULT_H_MIN, DEFAULT_H_MAX).unwrap();
        let topology = RelayTopology { m: 2, k: 2, hop1, hop2 };
        assert!(matches!(
            compose_two_hop(&topology, HopScheme::Perfect, 3),
            Err(RelayError::Channel(ChannelError::HorizonExceeded { .. }))
        ));
    }
}
