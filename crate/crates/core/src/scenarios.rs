//! Instance generators: random Gaussian benchmark games and three market
//! scenarios (quality advertising, priced products, ride hailing).
//!
//! Every generator is a pure function of its spec and seed. Random features
//! are returned in a [`Sidecar`] so that instances can be audited.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameInstance, DEFAULT_TERM_CAP};
use crate::matrix::Matrix;
use crate::rng;

/// Standard deviation of benchmark utilities (variance 100).
pub const SYNTHETIC_STD: f64 = 10.0;
pub const DEFAULT_SHOCK_STD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub states: usize,
    pub signals: usize,
    pub actions: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, states: usize, signals: usize, actions: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            states,
            signals,
            actions,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.states < 2 || self.signals < 2 || self.actions < 2 {
            return Err(Error::arg(
                "synthetic games need n ≥ 1 and at least 2 states, signals and actions",
            ));
        }
        Ok(())
    }
}

/// Random features behind a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "kebab-case")]
pub enum Sidecar {
    Synthetic {
        spec: SyntheticSpec,
    },
    QualityAds {
        firms: usize,
        shock_std: f64,
        shocks: Vec<f64>,
    },
    ProductAds {
        firms: usize,
        shock_std: f64,
        prices: Vec<i64>,
        qualities: Vec<Vec<i64>>,
        shocks: Vec<f64>,
    },
    RideHailing {
        orders: Vec<Order>,
        payment_utility: bool,
    },
}

fn check_cap(states: usize, signals: usize, n: usize) -> Result<()> {
    let mut terms = states as u128;
    for _ in 0..n {
        terms = terms.saturating_mul(signals as u128);
    }
    if terms > DEFAULT_TERM_CAP {
        return Err(Error::size(
            "state × joint-signal terms",
            terms,
            DEFAULT_TERM_CAP,
        ));
    }
    Ok(())
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Utilities i.i.d. `N(0, 100)`; prior is the SoftMax of another such vector.
pub fn synthetic_instance(spec: &SyntheticSpec) -> Result<(GameInstance, Sidecar)> {
    spec.validate()?;
    check_cap(spec.states, spec.signals, spec.n)?;
    let mut r = rng::stream(spec.seed, "synthetic");
    let normal = Normal::new(0.0, SYNTHETIC_STD).expect("positive std");
    let mut draw = |rows: usize, cols: usize| {
        let mut m = Matrix::zeros(rows, cols);
        m.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = normal.sample(&mut r));
        m
    };
    let receiver = draw(spec.states, spec.actions);
    let senders: Vec<Matrix> = (0..spec.n)
        .map(|_| draw(spec.states, spec.actions))
        .collect();
    let logits = draw(1, spec.states);
    let game = GameInstance::new(softmax(logits.as_slice()), spec.signals, receiver, senders)?;
    Ok((game, Sidecar::Synthetic { spec: *spec }))
}

fn shocks(n: usize, std: f64, r: &mut impl Rng) -> Result<Vec<f64>> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::arg(format!(
            "shock std-dev must be finite and ≥ 0, got {std}"
        )));
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::arg(e.to_string()))?;
    Ok((0..n).map(|_| normal.sample(r)).collect())
}

/// Decodes a joint state index into per-firm levels (firm 0 most significant).
fn digits(mut index: usize, radix: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radix.len()];
    for k in (0..radix.len()).rev() {
        out[k] = index % radix[k];
        index /= radix[k];
    }
    out
}

/// Receiver and firm utilities for "buy from firm i or buy nothing" markets.
/// `value(state_levels, i)` is the receiver's utility of buying from `i`;
/// firm `i` gets `paid[i]` when chosen and `unpaid[i]` otherwise.
fn purchase_game(
    radix: &[usize],
    signals: usize,
    value: impl Fn(&[usize], usize) -> f64,
    paid: &[f64],
    unpaid: &[f64],
) -> Result<GameInstance> {
    let n = radix.len();
    let states: usize = radix.iter().product();
    let actions = n + 1;
    let mut v = Matrix::zeros(states, actions);
    let mut senders = vec![Matrix::zeros(states, actions); n];
    for ω in 0..states {
        let levels = digits(ω, radix);
        for i in 0..n {
            v[(ω, i)] = value(&levels, i);
        }
        for (j, u) in senders.iter_mut().enumerate() {
            for a in 0..actions {
                u[(ω, a)] = if a == j { paid[j] } else { unpaid[j] };
            }
        }
    }
    GameInstance::new(vec![1.0 / states as f64; states], signals, v, senders)
}

pub const QUALITY_HIGH: f64 = 5.0;
pub const QUALITY_LOW: f64 = -5.0;

/// Quality advertising: each firm is high (+5) or low (−5) quality, states
/// are all `2^n` combinations with a uniform prior, actions are "buy from
/// firm i" (`i < n`) and "buy nothing" (`n`).
pub fn quality_ads_instance(
    n: usize,
    signals: usize,
    shock_std: f64,
    seed: u64,
) -> Result<(GameInstance, Sidecar)> {
    let eps = shocks(n, shock_std, &mut rng::stream(seed, "quality-ads"))?;
    let game = quality_ads_from_shocks(&eps, signals)?;
    Ok((
        game,
        Sidecar::QualityAds {
            firms: n,
            shock_std,
            shocks: eps,
        },
    ))
}

pub fn quality_ads_from_shocks(shocks: &[f64], signals: usize) -> Result<GameInstance> {
    let n = shocks.len();
    if n == 0 || signals == 0 {
        return Err(Error::arg("need at least one firm and one signal"));
    }
    if n >= usize::BITS as usize {
        return Err(Error::size(
            "quality states",
            1u128 << n.min(127),
            DEFAULT_TERM_CAP,
        ));
    }
    check_cap(1 << n, signals, n)?;
    let radix = vec![2; n];
    let quality = |bit: usize| if bit == 1 { QUALITY_HIGH } else { QUALITY_LOW };
    purchase_game(
        &radix,
        signals,
        |levels, i| quality(levels[i]) + shocks[i],
        &vec![1.0; n],
        &vec![0.0; n],
    )
}

pub const PRICE_RANGE: (i64, i64) = (1, 10);
pub const QUALITY_RANGE: (i64, i64) = (-8, 12);

/// Priced products: firm `i` has a public price in `[1, 10]` and a private
/// quality drawn from `levels` distinct integers of `[−8, 12]`; states are
/// joint quality vectors with a uniform prior.
pub fn product_ads_instance(
    n: usize,
    levels: usize,
    signals: usize,
    shock_std: f64,
    seed: u64,
) -> Result<(GameInstance, Sidecar)> {
    let span = (QUALITY_RANGE.1 - QUALITY_RANGE.0 + 1) as usize;
    if levels == 0 || levels > span {
        return Err(Error::arg(format!("quality levels must lie in 1..={span}")));
    }
    let mut r = rng::stream(seed, "product-ads");
    let prices: Vec<i64> = (0..n)
        .map(|_| r.random_range(PRICE_RANGE.0..=PRICE_RANGE.1))
        .collect();
    let qualities: Vec<Vec<i64>> = (0..n)
        .map(|_| {
            let mut q: Vec<i64> = sample(&mut r, span, levels)
                .into_iter()
                .map(|k| QUALITY_RANGE.0 + k as i64)
                .collect();
            q.sort_unstable();
            q
        })
        .collect();
    let eps = shocks(n, shock_std, &mut r)?;
    let game = product_ads_from(&prices, &qualities, &eps, signals)?;
    Ok((
        game,
        Sidecar::ProductAds {
            firms: n,
            shock_std,
            prices,
            qualities,
            shocks: eps,
        },
    ))
}

pub fn product_ads_from(
    prices: &[i64],
    qualities: &[Vec<i64>],
    shocks: &[f64],
    signals: usize,
) -> Result<GameInstance> {
    let n = prices.len();
    if n == 0 || qualities.len() != n || shocks.len() != n {
        return Err(Error::arg(
            "prices, qualities and shocks must cover the same firms",
        ));
    }
    if qualities.iter().any(|q| q.is_empty()) {
        return Err(Error::arg("every firm needs at least one quality level"));
    }
    let radix: Vec<usize> = qualities.iter().map(|q| q.len()).collect();
    let states = radix.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k));
    let states =
        states.ok_or_else(|| Error::size("quality states", u128::MAX, DEFAULT_TERM_CAP))?;
    check_cap(states, signals, n)?;
    let paid: Vec<f64> = prices.iter().map(|&p| p as f64).collect();
    purchase_game(
        &radix,
        signals,
        |levels, i| (qualities[i][levels[i]] - prices[i]) as f64 + shocks[i],
        &paid,
        &vec![-1.0; n],
    )
}

/// One ride request. `costs` is the driver's private cost alphabet; the
/// state picks one level per order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub platform: usize,
    pub price: i64,
    pub payment: i64,
    pub costs: Vec<i64>,
}

pub const RIDE_PRICE_RANGE: (i64, i64) = (5, 15);

/// Two platforms with `m` and `n` orders. Prices are uniform in `[5, 15]`,
/// payments uniform in `[1, price]`, and each order's cost alphabet has
/// `cost_levels` uniform draws from `[0, 2·price]`. Both platforms use
/// `m + 1` signals.
pub fn ride_hailing_instance(
    m: usize,
    n: usize,
    cost_levels: usize,
    payment_utility: bool,
    seed: u64,
) -> Result<(GameInstance, Sidecar)> {
    if m == 0 || n == 0 || cost_levels == 0 {
        return Err(Error::arg("order counts and cost levels must be positive"));
    }
    let mut r = rng::stream(seed, "ride-hailing");
    let orders: Vec<Order> = (0..m + n)
        .map(|k| {
            let price = r.random_range(RIDE_PRICE_RANGE.0..=RIDE_PRICE_RANGE.1);
            let payment = r.random_range(1..=price);
            let costs = (0..cost_levels)
                .map(|_| r.random_range(0..=2 * price))
                .collect();
            Order {
                platform: usize::from(k >= m),
                price,
                payment,
                costs,
            }
        })
        .collect();
    let game = ride_hailing_from_orders(&orders, m + 1, payment_utility)?;
    Ok((
        game,
        Sidecar::RideHailing {
            orders,
            payment_utility,
        },
    ))
}

/// Builds the driver game: action `k` picks order `k`, the last action is
/// "no pickup" (utility −1). The driver values an order at price (or
/// payment, if `payment_utility`) minus its cost; the owning platform earns
/// price minus payment.
pub fn ride_hailing_from_orders(
    orders: &[Order],
    signals: usize,
    payment_utility: bool,
) -> Result<GameInstance> {
    if orders.is_empty() || signals == 0 {
        return Err(Error::arg("need at least one order and one signal"));
    }
    if orders.iter().any(|o| o.platform > 1 || o.costs.is_empty()) {
        return Err(Error::arg(
            "orders need platform 0 or 1 and a non-empty cost alphabet",
        ));
    }
    let radix: Vec<usize> = orders.iter().map(|o| o.costs.len()).collect();
    let states = radix
        .iter()
        .try_fold(1usize, |acc, &k| acc.checked_mul(k))
        .ok_or_else(|| Error::size("cost states", u128::MAX, DEFAULT_TERM_CAP))?;
    check_cap(states, signals, 2)?;
    let k = orders.len();
    let mut v = Matrix::zeros(states, k + 1);
    let mut senders = vec![Matrix::zeros(states, k + 1); 2];
    for ω in 0..states {
        let levels = digits(ω, &radix);
        for (a, o) in orders.iter().enumerate() {
            let gross = if payment_utility { o.payment } else { o.price };
            v[(ω, a)] = (gross - o.costs[levels[a]]) as f64;
            senders[o.platform][(ω, a)] = (o.price - o.payment) as f64;
        }
        v[(ω, k)] = -1.0;
    }
    GameInstance::new(vec![1.0 / states as f64; states], signals, v, senders)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_prior_is_distribution() {
        let (g, _) = synthetic_instance(&SyntheticSpec::new(2, 5, 2, 3, 11)).unwrap();
        assert!(g.prior().iter().all(|&p| p > 0.0));
        assert!((g.prior().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec::new(2, 2, 2, 2, 7);
        let (a, _) = synthetic_instance(&spec).unwrap();
        let (b, _) = synthetic_instance(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_variance_near_100() {
        let mut xs = Vec::new();
        let mut seed = 0;
        while xs.len() < 10_000 {
            let (g, _) = synthetic_instance(&SyntheticSpec::new(4, 10, 2, 10, seed)).unwrap();
            xs.extend_from_slice(g.receiver_utility().as_slice());
            for u in g.sender_utilities() {
                xs.extend_from_slice(u.as_slice());
            }
            seed += 1;
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((90.0..=110.0).contains(&var), "variance {var}");
    }

    #[test]
    fn quality_ads_dimensions() {
        let (g, _) = quality_ads_instance(7, 2, DEFAULT_SHOCK_STD, 1).unwrap();
        assert_eq!((g.states(), g.actions(), g.n_senders()), (128, 8, 7));
    }

    #[test]
    fn quality_ads_all_low_means_no_purchase() {
        let g = quality_ads_from_shocks(&[0.0; 3], 2).unwrap();
        assert_eq!(g.optimal_actions(0), vec![3]);
    }

    #[test]
    fn quality_ads_single_high_firm_is_unique_choice() {
        let n = 4;
        let g = quality_ads_from_shocks(&vec![0.0; n], 2).unwrap();
        for ω in 0..g.states() {
            if ω.count_ones() == 1 {
                let firm = n - 1 - ω.trailing_zeros() as usize;
                assert_eq!(g.optimal_actions(ω), vec![firm]);
            }
        }
    }

    #[test]
    fn product_ads_ranges() {
        for seed in 0..1000 {
            let (_, side) = product_ads_instance(2, 3, 3, 1.0, seed).unwrap();
            let Sidecar::ProductAds {
                prices, qualities, ..
            } = side
            else {
                unreachable!()
            };
            assert!(prices.iter().all(|p| (1..=10).contains(p)));
            assert!(qualities.iter().flatten().all(|q| (-8..=12).contains(q)));
        }
    }

    #[test]
    fn product_ads_dominated_firm_never_bought() {
        // firm 1 loses money for the buyer at every quality level
        let g = product_ads_from(&[1, 10], &[vec![0, 5], vec![-8, -2]], &[0.0, 0.0], 2).unwrap();
        for ω in 0..g.states() {
            assert!(!g.optimal_actions(ω).contains(&1));
        }
    }

    #[test]
    fn ride_hailing_dimensions() {
        let (g, _) = ride_hailing_instance(4, 4, 2, false, 3).unwrap();
        assert_eq!(
            (g.states(), g.signals(), g.actions(), g.n_senders()),
            (256, 5, 9, 2)
        );
    }

    #[test]
    fn ride_hailing_costly_orders_mean_no_pickup() {
        let orders: Vec<Order> = (0..3)
            .map(|k| Order {
                platform: usize::from(k > 0),
                price: 5 + k as i64,
                payment: 3,
                costs: vec![20, 20],
            })
            .collect();
        let g = ride_hailing_from_orders(&orders, 3, false).unwrap();
        for ω in 0..g.states() {
            assert_eq!(g.optimal_actions(ω), vec![3]);
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            quality_ads_from_shocks(&[0.0; 20], 4),
            Err(Error::Size { .. })
        ));
    }
}
