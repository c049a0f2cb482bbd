use super::{solve_assignment, CostMatrix, Dispatch, Match, TravelTimes};
use crate::domain::{RandomSource, ZoneId};
use crate::request::{RequestId, SvId};

/// What a policy needs to know about an open request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequestView {
    pub id: RequestId,
    pub zone: ZoneId,
    pub announce_tick: u32,
    pub scheduled_tick: u32,
}

/// An idle SV offered to FCFS or OML.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvView {
    pub id: SvId,
    pub zone: ZoneId,
}

/// Matching cost of sending an SV that needs `travel` ticks to a request
/// scheduled at `scheduled`: lateness at full weight, earliness at `eta`.
#[inline]
pub fn oml_edge_cost(travel: f64, now: f64, scheduled: f64, eta: f64) -> f64 {
    let arrival = travel + now;
    (arrival - scheduled).max(0.0) + eta * (scheduled - arrival).max(0.0)
}

/// First-come-first-serve: requests in announce order each take the
/// available SV with the smallest sampled travel time, until either side
/// runs out.
pub fn fcfs_match(
    requests: &[RequestView],
    svs: &[SvView],
    travel: &impl TravelTimes,
    rng: &mut RandomSource,
) -> Dispatch {
    let mut order: Vec<&RequestView> = requests.iter().collect();
    order.sort_by_key(|r| (r.announce_tick, r.id));

    let mut available: Vec<SvView> = svs.to_vec();
    let mut out = Dispatch::default();
    for req in order {
        if available.is_empty() {
            break;
        }
        let mut best = 0usize;
        let mut best_cost = f64::INFINITY;
        for (k, sv) in available.iter().enumerate() {
            let c = travel.sample(sv.zone, req.zone, rng);
            if c < best_cost {
                best_cost = c;
                best = k;
            }
        }
        let sv = available.remove(best);
        out.matches.push(Match {
            sv: sv.id,
            request: req.id,
            cost: best_cost,
        });
        out.objective += best_cost;
    }
    out
}

/// Optimal matching of idle SVs to open requests on expected travel times.
pub fn oml_dispatch(
    svs: &[SvView],
    requests: &[RequestView],
    now: u32,
    eta: f64,
    travel: &impl TravelTimes,
) -> Dispatch {
    if svs.is_empty() || requests.is_empty() {
        return Dispatch::default();
    }
    let now_f = now as f64;
    let costs = CostMatrix::from_fn(svs.len(), requests.len(), |i, j| {
        let r = &requests[j];
        oml_edge_cost(travel.expected(svs[i].zone, r.zone), now_f, r.scheduled_tick as f64, eta)
    });
    let a = solve_assignment(&costs);
    Dispatch {
        matches: a
            .pairs
            .iter()
            .map(|&(i, j)| Match {
                sv: svs[i].id,
                request: requests[j].id,
                cost: costs.get(i, j),
            })
            .collect(),
        objective: a.objective,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::assignment::tests::brute_force_min;
    use crate::dispatch::MatrixTravel;
    use rand::Rng;

    fn req(id: u32, zone: usize, announce: u32, scheduled: u32) -> RequestView {
        RequestView {
            id,
            zone: ZoneId(zone),
            announce_tick: announce,
            scheduled_tick: scheduled,
        }
    }

    fn sv(id: u32, zone: usize) -> SvView {
        SvView { id, zone: ZoneId(zone) }
    }

    /// Zones on a line, one tick per unit of distance.
    fn line(n: usize) -> MatrixTravel {
        MatrixTravel::from_fn(n, |i, j| (i as f64 - j as f64).abs())
    }

    #[test]
    fn edge_cost_cases() {
        assert_eq!(oml_edge_cost(10.0, 5.0, 15.0, 0.1), 0.0);
        assert!((oml_edge_cost(10.0, 10.0, 15.0, 0.1) - 5.0).abs() < 1e-12);
        assert!((oml_edge_cost(5.0, 5.0, 15.0, 0.1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fcfs_empty_and_forced() {
        let mut rng = RandomSource::new(1);
        let t = line(3);
        assert!(fcfs_match(&[], &[sv(0, 0)], &t, &mut rng).is_empty());
        let d = fcfs_match(&[req(4, 2, 0, 5)], &[sv(9, 0)], &t, &mut rng);
        assert_eq!(d.matches, vec![Match { sv: 9, request: 4, cost: 2.0 }]);
    }

    #[test]
    fn fcfs_greedy_hand_simulation() {
        // zones 0..10 on a line; SVs at 0 and 6
        // requests in announce order: r0 at 5 (t=0), r1 at 1 (t=1), r2 at 7 (t=2)
        // greedy: r0 takes the SV at 6 (1 < 5); r1 takes the SV at 0; r2 is left over.
        // The optimal matching (r0 with 0, r2 with 6) would cost 6 instead of 2.
        let mut rng = RandomSource::new(1);
        let t = line(10);
        let reqs = [req(2, 7, 2, 20), req(0, 5, 0, 20), req(1, 1, 1, 20)];
        let d = fcfs_match(&reqs, &[sv(0, 0), sv(1, 6)], &t, &mut rng);
        assert_eq!(
            d.matches,
            vec![
                Match { sv: 1, request: 0, cost: 1.0 },
                Match { sv: 0, request: 1, cost: 1.0 },
            ]
        );
        assert_eq!(d.objective, 2.0);
    }

    #[test]
    fn oml_forced_and_diagonal() {
        let t = MatrixTravel::from_fn(2, |i, j| if i == j { 1.0 } else { 10.0 });
        let d = oml_dispatch(&[sv(3, 0)], &[req(8, 1, 0, 0)], 0, 0.1, &t);
        assert_eq!(d.len(), 1);
        assert_eq!((d.matches[0].sv, d.matches[0].request), (3, 8));

        // scheduled at now, so cost equals travel time: [[1,10],[10,1]]
        let d = oml_dispatch(&[sv(0, 0), sv(1, 1)], &[req(0, 0, 0, 0), req(1, 1, 0, 0)], 0, 0.1, &t);
        let pairs: Vec<_> = d.matches.iter().map(|m| (m.sv, m.request)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(d.objective, 2.0);
    }

    #[test]
    fn oml_empty_sides() {
        let t = line(2);
        assert!(oml_dispatch(&[], &[req(0, 0, 0, 0)], 0, 0.1, &t).is_empty());
        assert!(oml_dispatch(&[sv(0, 0)], &[], 0, 0.1, &t).is_empty());
    }

    #[test]
    fn oml_random_5x3_matches_oracle() {
        let mut rng = RandomSource::new(77);
        for _ in 0..50 {
            let n = 8;
            let t = MatrixTravel::from_fn(n, |i, j| ((i * 7 + j * 3) % 11) as f64 + 1.0);
            let svs: Vec<_> = (0..5).map(|k| sv(k, rng.random_range(0..n))).collect();
            let reqs: Vec<_> = (0..3)
                .map(|k| req(k, rng.random_range(0..n), 0, rng.random_range(0..15)))
                .collect();
            let d = oml_dispatch(&svs, &reqs, 2, 0.25, &t);
            let m = CostMatrix::from_fn(5, 3, |i, j| {
                oml_edge_cost(t.expected(svs[i].zone, reqs[j].zone), 2.0, reqs[j].scheduled_tick as f64, 0.25)
            });
            let (side, sq) = m.augmented();
            let oracle = brute_force_min(side, &sq) - 2.0 * m.big_m();
            assert!((d.objective - oracle).abs() < 1e-9);
            assert_eq!(d.len(), 3);
        }
    }
}
