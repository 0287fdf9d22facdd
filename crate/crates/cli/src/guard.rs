//! Breakdown couplings used to refuse runs that cannot be trusted.

use rabi_nccm::nccm::{critical_coupling, ClusterConfig, CriticalScan};
use rabi_nccm::Error;

/// g_c(N) for ω = ω₀ = 1, N = 2..=40, from `rabi critical` at resolution 1e-4.
pub const RESONANT_GC: [(usize, f64); 39] = [
    (2, 0.3972),
    (3, 0.3632),
    (4, 0.3405),
    (5, 0.3093),
    (6, 0.2848),
    (7, 0.2652),
    (8, 0.2493),
    (9, 0.2364),
    (10, 0.2255),
    (11, 0.2164),
    (12, 0.2089),
    (13, 0.2089),
    (14, 0.2086),
    (15, 0.2015),
    (16, 0.1952),
    (17, 0.1894),
    (18, 0.1841),
    (19, 0.1793),
    (20, 0.1747),
    (21, 0.1706),
    (22, 0.1667),
    (23, 0.1631),
    (24, 0.1596),
    (25, 0.1564),
    (26, 0.1535),
    (27, 0.1506),
    (28, 0.1479),
    (29, 0.1454),
    (30, 0.1429),
    (31, 0.1407),
    (32, 0.1385),
    (33, 0.1364),
    (34, 0.1275),
    (35, 0.1257),
    (36, 0.1098),
    (37, 0.1138),
    (38, 0.1023),
    (39, 0.1005),
    (40, 0.0943),
];

/// Breakdown coupling for SUB-`n`; `None` when the spectrum stays real on
/// `[0, 1]`. Off the stored grid it is computed on the spot.
pub fn breakdown_coupling(n: usize, omega: f64, omega0: f64) -> Result<Option<f64>, Error> {
    if omega == 1.0 && omega0 == 1.0 {
        if let Some(&(_, gc)) = RESONANT_GC.iter().find(|(m, _)| *m == n) {
            return Ok(Some(gc));
        }
    }
    match critical_coupling(ClusterConfig::sub(n), omega, omega0, CriticalScan::default()) {
        Ok(gc) => Ok(Some(gc)),
        Err(Error::NotFoundInRange { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}
