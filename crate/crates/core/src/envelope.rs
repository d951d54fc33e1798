//! Upper concave envelope of the allocation–payment curve.
//!
//! The envelope defines the convexified law `F_conv`. Deterministic bids under
//! `F_conv` reproduce every randomized bid under the original law.
//!
//! Coordinates: `x` is expected payment `b·F(b)`, `y` is win probability `F(b)`.

use serde::{Deserialize, Serialize};

use crate::dist::StepDistribution;
use crate::error::{check_unit, Error, Result};

/// A point `(b·F(b), F(b))` together with the bid `b` that produces it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub bid: f64,
}

impl CurvePoint {
    pub const ORIGIN: CurvePoint = CurvePoint {
        x: 0.0,
        y: 0.0,
        bid: 0.0,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationPaymentCurve {
    points: Vec<CurvePoint>,
}

impl AllocationPaymentCurve {
    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }
}

/// One point per support bid with positive CDF. Zero-CDF bids sit on the
/// origin and carry no information.
pub fn build_curve(dist: &StepDistribution) -> Result<AllocationPaymentCurve> {
    if !dist.is_proper() {
        return Err(Error::Precondition(format!(
            "allocation-payment curve needs a CDF ending at 1, got {}",
            dist.cdf_values().last().copied().unwrap_or(0.0)
        )));
    }
    let points = dist
        .support()
        .iter()
        .zip(dist.cdf_values())
        .filter(|(_, &c)| c > 0.0)
        .map(|(&b, &c)| CurvePoint {
            x: b * c,
            y: c,
            bid: b,
        })
        .collect();
    Ok(AllocationPaymentCurve { points })
}

/// Upper concave envelope of an allocation–payment curve.
///
/// The value is zero below `b0·F(b0)`. From there it follows `breakpoints`
/// linearly up to the saturation payment `x′` and stays at `1` beyond it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcaveEnvelope {
    breakpoints: Vec<CurvePoint>,
    slopes: Vec<f64>,
    saturation_x: f64,
    b0: f64,
    y0: f64,
}

/// Two-point bid lottery. The deterministic case has `p2 = 0` and `b2 = b1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedBid {
    pub b1: f64,
    pub p1: f64,
    pub b2: f64,
    pub p2: f64,
}

impl RandomizedBid {
    pub fn deterministic(b: f64) -> Self {
        Self {
            b1: b,
            p1: 1.0,
            b2: b,
            p2: 0.0,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.p2 == 0.0 || self.b1 == self.b2
    }

    /// Win probability of the lottery under `dist`.
    pub fn win_probability(&self, dist: &StepDistribution) -> f64 {
        self.p1 * dist.eval(self.b1) + self.p2 * dist.eval(self.b2)
    }

    /// Expected payment of the lottery under `dist` (first price: pay own bid on a win).
    pub fn expected_payment(&self, dist: &StepDistribution) -> f64 {
        self.p1 * self.b1 * dist.eval(self.b1) + self.p2 * self.b2 * dist.eval(self.b2)
    }

    /// Picks a bid from a uniform draw `u ∈ [0, 1)`.
    pub fn realize(&self, u: f64) -> f64 {
        if u < self.p1 {
            self.b1
        } else {
            self.b2
        }
    }

    pub fn map_bids(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            b1: f(self.b1),
            b2: f(self.b2),
            ..*self
        }
    }
}

fn cross(o: &CurvePoint, a: &CurvePoint, b: &CurvePoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Upper hull of `curve ∪ {(0, 0)}`, cut at the first vertex reaching `y = 1`.
///
/// Collinear points are dropped. The anchor never displaces the `b0` point
/// (slopes from the origin are `1/b`, strictly decreasing in `b`), so it is not
/// kept as a breakpoint.
pub fn concave_envelope(curve: &AllocationPaymentCurve) -> ConcaveEnvelope {
    let points = curve.points();
    assert!(!points.is_empty(), "curve always has a y = 1 point");
    let mut hull: Vec<CurvePoint> = Vec::with_capacity(points.len() + 1);
    let anchored = points[0].x > 0.0;
    if anchored {
        hull.push(CurvePoint::ORIGIN);
    }
    let top = points.iter().map(|p| p.y).fold(0.0_f64, f64::max);
    for p in points {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) >= 0.0 {
            hull.pop();
        }
        hull.push(*p);
        if p.y >= top {
            break;
        }
    }
    if anchored {
        hull.remove(0);
    }
    let slopes = hull
        .windows(2)
        .map(|w| (w[1].y - w[0].y) / (w[1].x - w[0].x))
        .collect();
    let last = *hull.last().unwrap();
    ConcaveEnvelope {
        b0: hull[0].bid,
        y0: hull[0].y,
        saturation_x: last.x,
        breakpoints: hull,
        slopes,
    }
}

impl ConcaveEnvelope {
    /// Builds the envelope of `dist`'s allocation–payment curve.
    pub fn of(dist: &StepDistribution) -> Result<Self> {
        Ok(concave_envelope(&build_curve(dist)?))
    }

    pub fn breakpoints(&self) -> &[CurvePoint] {
        &self.breakpoints
    }

    /// Slopes of consecutive hull segments, strictly decreasing.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn saturation_x(&self) -> f64 {
        self.saturation_x
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    /// Payment at which the envelope starts, `b0·F(b0)`.
    pub fn start_x(&self) -> f64 {
        self.breakpoints[0].x
    }

    /// Slope of the chord from the origin to the first breakpoint, when that
    /// breakpoint is not itself at zero payment.
    pub fn anchor_slope(&self) -> Option<f64> {
        (self.start_x() > 0.0).then(|| 1.0 / self.b0)
    }

    /// `G_conv(x)`.
    pub fn gconv(&self, x: f64) -> Result<f64> {
        check_unit("payment", x)?;
        Ok(self.gconv_unchecked(x))
    }

    pub(crate) fn gconv_unchecked(&self, x: f64) -> f64 {
        if x < self.start_x() {
            0.0
        } else {
            self.interpolate(x)
        }
    }

    /// Concave hull value including the chord from the origin: the best win
    /// probability any lottery (including losing bids) reaches at payment `x`.
    pub fn hull_value(&self, x: f64) -> f64 {
        let start = self.start_x();
        if x < start {
            x.max(0.0) * self.y0 / start
        } else {
            self.interpolate(x)
        }
    }

    fn interpolate(&self, x: f64) -> f64 {
        if x >= self.saturation_x {
            return 1.0;
        }
        let j = self.segment_by_x(x);
        let left = &self.breakpoints[j];
        left.y + self.slopes[j] * (x - left.x)
    }

    /// Index `j` with `x_j <= x < x_{j+1}`; requires `start_x <= x < saturation_x`.
    fn segment_by_x(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|p| p.x <= x) - 1
    }

    /// `F_conv(b)`: solves `y = s·(b·y) + c` on the segment whose bid range holds `b`.
    pub fn fconv(&self, b: f64) -> Result<f64> {
        check_unit("bid", b)?;
        Ok(self.fconv_unchecked(b))
    }

    pub(crate) fn fconv_unchecked(&self, b: f64) -> f64 {
        if b < self.b0 {
            return 0.0;
        }
        if b >= self.saturation_x {
            return 1.0;
        }
        // Hull bids increase along the hull, so search by bid.
        let j = self.breakpoints.partition_point(|p| p.bid <= b) - 1;
        let left = &self.breakpoints[j];
        if j + 1 == self.breakpoints.len() {
            return left.y;
        }
        let right = &self.breakpoints[j + 1];
        let s = self.slopes[j];
        let c = left.y - s * left.x;
        let denom = 1.0 - s * b;
        if denom <= 0.0 {
            return right.y;
        }
        (c / denom).clamp(left.y, right.y)
    }

    /// Largest-payment hull vertex at which every segment to its left has slope
    /// at least `threshold`: the maximizer of `y − threshold·x` with ties going
    /// to larger `x`. Returns the origin when even the anchor chord is too flat.
    pub fn tangent_point(&self, threshold: f64) -> CurvePoint {
        if let Some(anchor) = self.anchor_slope() {
            if anchor < threshold {
                return CurvePoint::ORIGIN;
            }
        }
        let j = self.slopes.partition_point(|&s| s >= threshold);
        self.breakpoints[j]
    }

    /// Two-point lottery under the source law with expected payment `x` and
    /// win probability `G_conv(x)`.
    pub fn decompose(&self, x: f64) -> Result<RandomizedBid> {
        check_unit("payment", x)?;
        if x < self.start_x() {
            return Ok(RandomizedBid::deterministic(0.0));
        }
        if x >= self.saturation_x {
            return Ok(RandomizedBid::deterministic(x));
        }
        let j = self.segment_by_x(x);
        let left = &self.breakpoints[j];
        if x == left.x {
            return Ok(RandomizedBid::deterministic(left.bid));
        }
        let right = &self.breakpoints[j + 1];
        let p2 = (x - left.x) / (right.x - left.x);
        Ok(RandomizedBid {
            b1: left.bid,
            p1: 1.0 - p2,
            b2: right.bid,
            p2,
        })
    }
}

/// [`ConcaveEnvelope::decompose`] with a check that `env` was built from `dist`.
pub fn decompose_bid(
    env: &ConcaveEnvelope,
    dist: &StepDistribution,
    x: f64,
) -> Result<RandomizedBid> {
    let lottery = env.decompose(x)?;
    for (b, p) in [(lottery.b1, lottery.p1), (lottery.b2, lottery.p2)] {
        if p > 0.0 && b <= env.saturation_x() {
            let on_hull = env.breakpoints().iter().find(|q| q.bid == b);
            if let Some(q) = on_hull {
                if dist.eval(b) != q.y {
                    return Err(Error::Precondition(format!(
                        "envelope breakpoint at bid {b} has y = {} but F({b}) = {}",
                        q.y,
                        dist.eval(b)
                    )));
                }
            }
        }
    }
    Ok(lottery)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn coin_flip() -> StepDistribution {
        StepDistribution::from_atoms(&[(0.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    fn three_atoms() -> StepDistribution {
        StepDistribution::from_atoms(&[(0.0, 0.5), (0.6, 0.2), (1.0, 0.3)]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn curve_examples() {
        let c = build_curve(&coin_flip()).unwrap();
        let xy: Vec<_> = c.points().iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(xy, vec![(0.0, 0.5), (1.0, 1.0)]);

        let c = build_curve(&StepDistribution::point_mass(0.4).unwrap()).unwrap();
        let xy: Vec<_> = c.points().iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(xy, vec![(0.4, 1.0)]);

        let c = build_curve(&three_atoms()).unwrap();
        assert_eq!(c.points().len(), 3);
        assert!(close(c.points()[1].x, 0.42, 1e-15));
        assert!(close(c.points()[1].y, 0.7, 1e-15));
    }

    #[test]
    fn curve_rejects_improper() {
        let partial = StepDistribution::new(vec![0.2, 0.5], vec![0.3, 0.8]).unwrap();
        assert!(matches!(build_curve(&partial), Err(Error::Precondition(_))));
    }

    #[test]
    fn envelope_examples() {
        let env = ConcaveEnvelope::of(&coin_flip()).unwrap();
        let xy: Vec<_> = env.breakpoints().iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(xy, vec![(0.0, 0.5), (1.0, 1.0)]);
        assert_eq!(env.b0(), 0.0);
        assert_eq!(env.saturation_x(), 1.0);

        let env = ConcaveEnvelope::of(&three_atoms()).unwrap();
        let xy: Vec<_> = env.breakpoints().iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(xy, vec![(0.0, 0.5), (1.0, 1.0)]);

        let env = ConcaveEnvelope::of(&StepDistribution::point_mass(0.4).unwrap()).unwrap();
        assert_eq!(env.breakpoints().len(), 1);
        assert_eq!(env.saturation_x(), 0.4);
        assert_eq!(env.gconv(0.39).unwrap(), 0.0);
        assert_eq!(env.gconv(0.4).unwrap(), 1.0);
        assert_eq!(env.gconv(1.0).unwrap(), 1.0);
        assert!(close(env.hull_value(0.2), 0.5, 1e-15));
    }

    #[test]
    fn gconv_examples() {
        let env = ConcaveEnvelope::of(&coin_flip()).unwrap();
        assert!(close(env.gconv(1.0 / 3.0).unwrap(), 2.0 / 3.0, 1e-15));
        assert_eq!(env.gconv(0.0).unwrap(), 0.5);
        assert_eq!(env.gconv(env.saturation_x()).unwrap(), 1.0);
        assert!(env.gconv(1.1).is_err());
        assert!(env.gconv(-0.1).is_err());
    }

    #[test]
    fn fconv_examples() {
        let env = ConcaveEnvelope::of(&coin_flip()).unwrap();
        assert!(close(env.fconv(0.5).unwrap(), 2.0 / 3.0, 1e-15));
        assert_eq!(env.fconv(0.0).unwrap(), 0.5);
        assert_eq!(env.fconv(1.0).unwrap(), 1.0);
        for i in 0..100 {
            let b = i as f64 / 100.0;
            assert!(close(env.fconv(b).unwrap(), 1.0 / (2.0 - b), 1e-12));
        }
        let pm = ConcaveEnvelope::of(&StepDistribution::point_mass(0.4).unwrap()).unwrap();
        assert_eq!(pm.fconv(0.39).unwrap(), 0.0);
        assert_eq!(pm.fconv(0.4).unwrap(), 1.0);
    }

    #[test]
    fn decompose_examples() {
        let f = coin_flip();
        let env = ConcaveEnvelope::of(&f).unwrap();
        let lot = decompose_bid(&env, &f, 1.0 / 3.0).unwrap();
        assert_eq!((lot.b1, lot.b2), (0.0, 1.0));
        assert!(close(lot.p1, 2.0 / 3.0, 1e-15));
        assert!(close(lot.p2, 1.0 / 3.0, 1e-15));

        let lot = decompose_bid(&env, &f, 0.5).unwrap();
        assert!(close(lot.p1, 0.5, 1e-15) && close(lot.p2, 0.5, 1e-15));
        assert!(close(lot.win_probability(&f), 0.75, 1e-15));
        assert!(close(env.gconv(0.5).unwrap(), 0.75, 1e-15));

        for bp in env.breakpoints() {
            let lot = decompose_bid(&env, &f, bp.x).unwrap();
            assert!(lot.is_deterministic());
            assert_eq!(lot.b1, bp.bid);
        }
    }

    #[test]
    fn decompose_below_start_is_a_losing_bid() {
        let f = StepDistribution::from_atoms(&[(0.3, 0.5), (0.8, 0.5)]).unwrap();
        let env = ConcaveEnvelope::of(&f).unwrap();
        let lot = decompose_bid(&env, &f, 0.1).unwrap();
        assert!(lot.is_deterministic());
        assert_eq!(lot.win_probability(&f), 0.0);
        assert_eq!(lot.expected_payment(&f), 0.0);
    }

    #[test]
    fn decompose_detects_foreign_distribution() {
        let env = ConcaveEnvelope::of(&coin_flip()).unwrap();
        let other = StepDistribution::from_atoms(&[(0.0, 0.25), (1.0, 0.75)]).unwrap();
        assert!(decompose_bid(&env, &other, 0.5).is_err());
    }

    #[test]
    fn tangent_point_ties_go_right() {
        let env = ConcaveEnvelope::of(&coin_flip()).unwrap();
        assert_eq!(env.tangent_point(1.0).x, 0.0);
        assert_eq!(env.tangent_point(0.5).x, 1.0);
        assert_eq!(env.tangent_point(0.2).x, 1.0);
        let pm = ConcaveEnvelope::of(&StepDistribution::point_mass(0.4).unwrap()).unwrap();
        assert_eq!(pm.tangent_point(2.5).x, 0.4);
        assert_eq!(pm.tangent_point(2.6), CurvePoint::ORIGIN);
        assert_eq!(pm.tangent_point(f64::INFINITY), CurvePoint::ORIGIN);
    }

    pub(crate) fn arb_step(max_atoms: usize) -> impl Strategy<Value = StepDistribution> {
        proptest::collection::vec((0u32..=100, 1u32..=20), 1..=max_atoms).prop_map(|atoms| {
            let total: u32 = atoms.iter().map(|a| a.1).sum();
            let atoms: Vec<(f64, f64)> = atoms
                .iter()
                .map(|&(p, w)| (p as f64 / 100.0, w as f64 / total as f64))
                .collect();
            StepDistribution::from_atoms(&atoms).unwrap()
        })
    }

    proptest! {
        #[test]
        fn lottery_matches_envelope(f in arb_step(8), u in 0.0f64..=1.0) {
            let env = ConcaveEnvelope::of(&f).unwrap();
            let x = env.start_x() + u * (1.0 - env.start_x());
            let lot = decompose_bid(&env, &f, x).unwrap();
            prop_assert!((lot.p1 + lot.p2 - 1.0).abs() <= 1e-12);
            prop_assert!(lot.p1 >= 0.0 && lot.p2 >= 0.0);
            prop_assert!((lot.expected_payment(&f) - x).abs() <= 1e-9);
            prop_assert!((lot.win_probability(&f) - env.gconv(x).unwrap()).abs() <= 1e-9);
        }

        #[test]
        fn envelope_dominates_curve(f in arb_step(8)) {
            let env = ConcaveEnvelope::of(&f).unwrap();
            for p in build_curve(&f).unwrap().points() {
                prop_assert!(p.y <= env.gconv(p.x).unwrap() + 1e-12);
            }
        }

        #[test]
        fn slopes_strictly_decrease(f in arb_step(8)) {
            let env = ConcaveEnvelope::of(&f).unwrap();
            for w in env.slopes().windows(2) {
                prop_assert!(w[1] < w[0]);
            }
            prop_assert!(env.slopes().iter().all(|&s| s > 0.0));
        }

        #[test]
        fn fconv_is_consistent_with_gconv(f in arb_step(8)) {
            let env = ConcaveEnvelope::of(&f).unwrap();
            let mut last_pay = 0.0;
            for i in 0..=1000 {
                let b = i as f64 / 1000.0;
                let y = env.fconv(b).unwrap();
                let pay = b * y;
                prop_assert!(pay >= last_pay - 1e-12);
                last_pay = pay;
                prop_assert!((env.gconv(pay).unwrap() - y).abs() <= 1e-9, "b={} y={} g={}", b, y, env.gconv(pay).unwrap());
            }
        }

        #[test]
        fn hull_is_minimal(f in arb_step(8)) {
            let env = ConcaveEnvelope::of(&f).unwrap();
            let bps = env.breakpoints();
            for k in 1..bps.len().saturating_sub(1) {
                let (l, m, r) = (bps[k - 1], bps[k], bps[k + 1]);
                let chord = l.y + (r.y - l.y) * (m.x - l.x) / (r.x - l.x);
                prop_assert!(m.y > chord);
            }
        }
    }
}
