//! Published reference tables used by the `acceptance` target.
//!
//! Scenario tuples are `(ηE, ηE*, ηT*, ηT)`, the order the tables print them.

/// Four rates of one scenario, in the order given per table.
pub type Rates = (f64, f64, f64, f64);

/// Efficacy looks `{18, 36}`, toxicity looks `{9, 18, 36}`.
pub const TABLE1_SCENARIOS: [Rates; 8] = [
    (0.50, 0.20, 0.30, 0.10),
    (0.50, 0.20, 0.40, 0.20),
    (0.60, 0.30, 0.30, 0.10),
    (0.60, 0.30, 0.40, 0.20),
    (0.70, 0.40, 0.35, 0.15),
    (0.70, 0.40, 0.40, 0.20),
    (0.80, 0.50, 0.35, 0.15),
    (0.80, 0.50, 0.40, 0.20),
];

/// Published boundaries `(efficacy, toxicity)` per scenario for
/// `α10* = 0.10` and `α10* = 0.20`.
pub const TABLE1_BOUNDARIES: [[([i64; 2], [i64; 3]); 2]; 8] = [
    [([3, 10], [3, 5, 8]), ([3, 10], [3, 6, 9])],
    [([3, 10], [4, 7, 11]), ([3, 10], [4, 8, 13])],
    [([5, 14], [3, 5, 8]), ([5, 14], [3, 6, 9])],
    [([5, 14], [4, 7, 11]), ([5, 14], [4, 8, 13])],
    [([6, 18], [4, 6, 9]), ([6, 18], [4, 7, 11])],
    [([6, 18], [4, 7, 11]), ([6, 18], [4, 8, 13])],
    [([8, 22], [4, 6, 9]), ([8, 22], [4, 7, 11])],
    [([8, 21], [4, 7, 11]), ([8, 22], [4, 8, 13])],
];

/// `(PCP, PET, ESS)` under H00, H01, H10, H11.
pub type OcRows = [(f64, f64, f64); 4];

/// Operating characteristics for scenarios 1, 2, 4, 5 with the two BOP2-TE
/// designs (`α10* = 0.10`, `α10* = 0.20`).
pub const TABLE2: [(usize, [OcRows; 2]); 4] = [
    (
        0,
        [
            [(0.01, 0.86, 15.6), (0.08, 0.53, 25.9), (0.09, 0.73, 18.1), (0.92, 0.07, 34.3)],
            [(0.01, 0.81, 16.5), (0.08, 0.53, 26.0), (0.15, 0.63, 19.9), (0.93, 0.06, 34.5)],
        ],
    ),
    (
        1,
        [
            [(0.01, 0.85, 16.1), (0.07, 0.55, 25.2), (0.07, 0.70, 18.8), (0.84, 0.11, 33.2)],
            [(0.02, 0.80, 16.9), (0.08, 0.55, 25.4), (0.19, 0.60, 20.5), (0.89, 0.09, 33.6)],
        ],
    ),
    (
        3,
        [
            [(0.01, 0.86, 15.9), (0.07, 0.58, 24.7), (0.07, 0.70, 18.8), (0.83, 0.11, 33.2)],
            [(0.02, 0.81, 16.7), (0.08, 0.58, 24.9), (0.19, 0.60, 20.5), (0.89, 0.10, 33.5)],
        ],
    ),
    (
        4,
        [
            [(0.01, 0.80, 18.2), (0.07, 0.41, 28.3), (0.06, 0.67, 20.3), (0.88, 0.06, 34.6)],
            [(0.02, 0.71, 19.7), (0.08, 0.40, 28.5), (0.19, 0.54, 22.8), (0.94, 0.04, 35.0)],
        ],
    ),
];

/// Exact rows for the scenario-4 design `(5, 14) / (4, 7, 11)`.
pub const TABLE_A2_ANALYTIC: OcRows =
    [(0.0063, 0.8586, 15.89), (0.0728, 0.5845, 24.71), (0.0724, 0.6982, 18.78), (0.8337, 0.1127, 33.20)];

/// Per arm `(πE, πT)` and `(selection %, early stop %, average n)`.
pub type DoseRow = ((f64, f64), (f64, f64, f64));

pub const TABLE3_SCENARIO1: [DoseRow; 2] = [((0.30, 0.10), (4.5, 48.3, 18.1)), ((0.60, 0.20), (73.0, 8.0, 23.1))];
pub const TABLE3_SCENARIO2: [DoseRow; 2] = [((0.60, 0.15), (85.0, 2.7, 23.7)), ((0.65, 0.35), (5.3, 41.3, 19.1))];

/// One row of the global-search comparison.
pub struct GlobalRow {
    pub efficacy: [i64; 2],
    pub toxicity: [i64; 3],
    pub alphas: [f64; 3],
    pub power: f64,
}

const fn row(efficacy: [i64; 2], toxicity: [i64; 3], alphas: [f64; 3], power: f64) -> GlobalRow {
    GlobalRow { efficacy, toxicity, alphas, power }
}

/// `(ηE, ηE*, ηT*, ηT)`, then the unconstrained and practical-constraint optima.
pub const TABLE_A4: [(Rates, GlobalRow, GlobalRow); 4] = [
    (
        (0.5, 0.2, 0.3, 0.1),
        row([0, 10], [5, 5, 8], [0.009, 0.085, 0.097], 0.953),
        row([3, 10], [3, 6, 8], [0.008, 0.079, 0.091], 0.923),
    ),
    (
        (0.5, 0.2, 0.4, 0.2),
        row([0, 10], [7, 10, 11], [0.008, 0.081, 0.090], 0.906),
        row([3, 10], [4, 8, 11], [0.006, 0.072, 0.076], 0.846),
    ),
    (
        (0.6, 0.3, 0.3, 0.1),
        row([0, 14], [5, 5, 8], [0.009, 0.088, 0.097], 0.950),
        row([5, 14], [3, 6, 8], [0.008, 0.080, 0.091], 0.919),
    ),
    (
        (0.6, 0.3, 0.4, 0.2),
        row([0, 14], [8, 10, 11], [0.008, 0.084, 0.090], 0.903),
        row([5, 14], [4, 8, 11], [0.007, 0.074, 0.075], 0.842),
    ),
];

/// Attenuation factor 3: `(ηE*, ηE, ηT*, ηT)`, `α10*`, toxicity bounds at
/// looks 3, 6, 12, 24, 36. `α00* = 0.05`, `α01* = 0.10`.
pub const TABLE_A1_AF3: [(Rates, f64, [i64; 5]); 9] = [
    ((0.1, 0.3, 0.4, 0.2), 0.10, [2, 3, 5, 9, 12]),
    ((0.1, 0.3, 0.4, 0.2), 0.15, [2, 3, 5, 9, 13]),
    ((0.1, 0.3, 0.4, 0.2), 0.20, [2, 3, 5, 9, 13]),
    ((0.2, 0.4, 0.4, 0.2), 0.10, [2, 3, 5, 9, 12]),
    ((0.2, 0.4, 0.4, 0.2), 0.15, [2, 3, 5, 9, 13]),
    ((0.2, 0.4, 0.4, 0.2), 0.20, [2, 3, 5, 9, 13]),
    ((0.3, 0.5, 0.4, 0.2), 0.10, [2, 3, 5, 9, 12]),
    ((0.3, 0.5, 0.4, 0.2), 0.15, [2, 3, 5, 9, 13]),
    ((0.3, 0.5, 0.4, 0.2), 0.20, [2, 3, 6, 10, 14]),
];
