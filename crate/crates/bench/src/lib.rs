//! Shared fixtures for the benchmarks in `benches/`.

use contractlab_core::MarketParams;

/// Launch market with 50 pre-ordered units and a mean tail of 100 units.
pub fn launch_market() -> MarketParams {
    MarketParams::new(1e7, 1e5, 0.0, 50.0, 0.01)
}

/// Unit-cost market used by the renewal benchmarks.
pub fn renewal_market() -> MarketParams {
    MarketParams::new(10.0, 1.0, 0.0, 1.0, 1.0).with_discount(0.9)
}
