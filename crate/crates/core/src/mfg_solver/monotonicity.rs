use std::io::Write;

use super::dp::{backward_dp, DpConfig};
use super::grids::{build_control_grid, StateGrid};
use crate::dynamics::ModelSpec;
use crate::error::{Error, Result};
use crate::measures::MeasureFlow;
use crate::scalar::Real;

/// `V_{M,M}(0, probe)` for one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityRow<T> {
    pub radius: u32,
    pub atoms: usize,
    pub values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityTable<T> {
    pub probes: Vec<Vec<T>>,
    pub rows: Vec<MonotonicityRow<T>>,
    pub tolerance: f64,
    /// Largest increase `V_{M',M'} − V_{M,M}` for `M < M'` consecutive.
    pub max_violation: f64,
    pub monotone: bool,
}

impl<T: Real> MonotonicityTable<T> {
    /// Writes `M,atoms,v1..`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["M".to_string(), "atoms".to_string()];
        header.extend((1..=self.probes.len()).map(|i| format!("v{i}")));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.radius.to_string(), row.atoms.to_string()];
            rec.extend(row.values.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Default tolerance for the monotonicity check.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-6;

/// Tabulates `V_{M,M}(0, ·)` at `probes` for ascending `radii`, with the
/// control grid `Γ_{M,M}` and `2^M` slots.
///
/// Every run shares the time stepping of the largest radius: a slot of level
/// `M` is split into `2^{M_max − M}` stages over which its action is held, so
/// all tables are built from the same one-stage operators. `sgrid` supplies
/// the spatial box; its level is ignored. `config.stages_per_slot` is
/// overridden.
pub fn value_monotonicity_study<T: Real>(
    model: &ModelSpec<T>,
    flow: &MeasureFlow<T>,
    sgrid: &StateGrid<T>,
    radii: &[u32],
    config: &DpConfig,
    probes: &[Vec<T>],
) -> Result<MonotonicityTable<T>> {
    if radii.is_empty() || radii.windows(2).any(|w| w[0] >= w[1]) || radii[0] == 0 {
        return Err(Error::InvalidParameter("radii must be positive and strictly ascending".into()));
    }
    let top = *radii.last().unwrap();
    if top > 20 {
        return Err(Error::InvalidParameter("radius too large for the coupled dyadic level".into()));
    }
    let mut rows = Vec::with_capacity(radii.len());
    for &m in radii {
        let grid = StateGrid::new(sgrid.lo.clone(), sgrid.hi.clone(), sgrid.nodes.clone(), m, sgrid.horizon)?;
        let cgrid = build_control_grid(model, T::of_usize(m as usize), m)?;
        let cfg = DpConfig {
            stages_per_slot: 1 << (top - m),
            ..*config
        };
        let dp = backward_dp(model, flow, &cgrid, &grid, &cfg)?;
        let values = probes.iter().map(|p| dp.value.interpolate(&grid, 0, p)).collect();
        rows.push(MonotonicityRow {
            radius: m,
            atoms: cgrid.len(),
            values,
        });
    }
    let max_violation = rows
        .windows(2)
        .flat_map(|w| w[0].values.iter().zip(&w[1].values).map(|(a, b)| (*b - *a).as_f64()))
        .fold(0.0_f64, f64::max);
    Ok(MonotonicityTable {
        probes: probes.to_vec(),
        rows,
        tolerance: MONOTONICITY_TOLERANCE,
        max_violation,
        monotone: max_violation <= MONOTONICITY_TOLERANCE,
    })
}
