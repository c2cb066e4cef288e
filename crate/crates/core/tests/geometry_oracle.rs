use mapfr::geometry::{collide, KinematicSegment};
use mapfr::model::Point;
use proptest::prelude::*;

fn arb_segment() -> impl Strategy<Value = KinematicSegment> {
    (
        -3.0..3.0f64,
        -3.0..3.0f64,
        -3.0..3.0f64,
        -3.0..3.0f64,
        0.0..2.0f64,
        0.1..3.0f64,
        prop::bool::ANY,
    )
        .prop_map(|(x0, y0, x1, y1, t, d, still)| {
            let to = if still {
                Point::new(x0, y0)
            } else {
                Point::new(x1, y1)
            };
            KinematicSegment::from_points(Point::new(x0, y0), to, t, t + d)
        })
}

fn dist(a: &KinematicSegment, b: &KinematicSegment, t: f64) -> f64 {
    let (p, q) = (a.at(t), b.at(t));
    ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt()
}

proptest! {
    #[test]
    fn collide_matches_dense_sampling(a in arb_segment(), b in arb_segment(), ri in 0.05..0.6f64, rj in 0.05..0.6f64) {
        let (lo, hi) = (a.t_a.max(b.t_a), a.t_b.min(b.t_b));
        prop_assume!(hi - lo > 1e-3);
        let reach = ri + rj;
        let got = collide(&a, ri, &b, rj).unwrap();
        let n = 4000;
        let samples: Vec<(f64, f64)> = (0..n).map(|k| {
            let t = lo + (hi - lo) * k as f64 / n as f64;
            (t, dist(&a, &b, t))
        }).collect();
        let first_deep = samples.iter().find(|(_, d)| *d < reach - 1e-6).map(|(t, _)| *t);
        match got {
            None => prop_assert!(first_deep.is_none()),
            Some(t) => {
                prop_assert!(t >= lo - 1e-12 && t < hi);
                // at contact the discs touch (or already overlap at the span start)
                let d = dist(&a, &b, t);
                prop_assert!((d - reach).abs() < 1e-6 || (t == lo && d < reach));
                if let Some(s) = first_deep {
                    prop_assert!(t <= s + 1e-9);
                }
                // nothing deeper before t
                prop_assert!(samples.iter().filter(|(s, _)| *s < t - 1e-9).all(|(_, d)| *d >= reach - 1e-6));
            }
        }
    }
}
