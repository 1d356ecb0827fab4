//! Engineering constants. Asymptotic statements leave their constants open;
//! these are the values this implementation pins, and the test suites assert
//! against exactly these.

/// Message budget is `ceil(kappa * log2 n)` bits per edge-direction per round.
pub const DEFAULT_KAPPA_BITS: u32 = 8;

/// Part-wise aggregation must finish within `AGG_ALPHA * (c+d) * ceil(log2 n)`
/// simulator rounds on a (c,d)-shortcut.
pub const AGG_ALPHA: f64 = 8.0;

/// Heads/tails must spend at most `HT_ALPHA * Q * log2 n` rounds per level
/// where Q is the measured quality of the level's shortcut.
pub const HT_ALPHA: f64 = 8.0;

/// Heads/tails level budget: `ceil(log_{4/3} n) + HT_LEVEL_SLACK`.
pub const HT_LEVEL_SLACK: usize = 40;

/// Reweighting growth constant (step-7 increment c1/beta * ln n).
pub const DEFAULT_C1: f64 = 4.0;
/// Expected per-level stretch constant.
pub const DEFAULT_C2: f64 = 2.0;
/// Main loop runs while R < n^c.
pub const DEFAULT_TERMINATION_EXPONENT: f64 = 4.0;
/// "Theta(log n)" repetition count is `ceil(gamma * log2 n)`.
pub const DEFAULT_GAMMA: f64 = 2.0;

/// Start-time constant in t_u = (c/beta) ln n - delta_u.
pub const DEFAULT_LDD_START_C: f64 = 4.0;

/// Observed per-level mean stretch must stay below KAPPA_STRETCH * ln n.
/// The per-edge expectation is at most 3*c1*ln(n) = 12 ln(n) at the default
/// constants; the extra headroom covers sample noise from the heavy-tailed
/// cut increments.
pub const KAPPA_STRETCH: f64 = 16.0;

/// Label budget: entries and bits bounded by KAPPA_LABEL * log2(n)^4.
/// The bit constant carries the 128-bit wire entries at the smallest desk
/// sizes, where the repetition count shrinks slower than log^4.
pub const KAPPA_LABEL_ENTRIES: f64 = 1.0;
pub const KAPPA_LABEL_BITS: f64 = 64.0;

/// Desk-scale oracle caps: refuse rather than silently approximate.
pub const ORACLE_APSP_CAP: usize = 512;
pub const ORACLE_FLOW_CAP: usize = 256;

/// Retries for probability-o(1) failures (flagged LDD trials, non-spanning
/// forests, heads/tails level-budget misses).
pub const RETRY_BUDGET: usize = 24;
