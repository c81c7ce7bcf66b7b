use std::collections::HashMap;

use num_complex::Complex64;

use super::{kernels, MeasurementSet, MeasurementType};
use crate::network::BusBranchNetwork;
use crate::partition::AreaVariableMap;

/// Marks a template position with no unknown behind it (the slack angle,
/// or the angle position of a `Vm` row).
pub const NO_SLOT: usize = usize::MAX;

/// Fixed-sparsity templates for a group of measurement rows compiled
/// against one variable layout.
///
/// Built once; iterations only read it. Row `r` touches the local buses
/// `local_bus[ptr[r]..ptr[r + 1]]` and its derivative positions map to
/// `slots[2 * ptr[r]..2 * ptr[r + 1]]` as `[θ slots.., V slots..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowTemplates {
    pub rows: Vec<usize>,
    pub kinds: Vec<MeasurementType>,
    pub ptr: Vec<usize>,
    pub local_bus: Vec<usize>,
    pub y: Vec<Complex64>,
    pub slots: Vec<usize>,
}

/// Scratch buffers for evaluating one row at a time.
#[derive(Debug, Default)]
pub struct RowWork {
    va: Vec<f64>,
    vm: Vec<f64>,
    pub grad: Vec<f64>,
}

impl RowTemplates {
    /// Compile templates for `rows` of `ms` in the layout of `map`.
    ///
    /// Panics if a row touches a bus the map does not see; assignment by
    /// owner area guarantees closure.
    pub fn compile(
        net: &BusBranchNetwork,
        map: &AreaVariableMap,
        ms: &MeasurementSet,
        rows: impl IntoIterator<Item = usize>,
    ) -> Self {
        let position: HashMap<usize, usize> =
            map.local_buses().enumerate().map(|(p, b)| (b, p)).collect();
        let mut t = RowTemplates {
            rows: Vec::new(),
            kinds: Vec::new(),
            ptr: vec![0],
            local_bus: Vec::new(),
            y: Vec::new(),
            slots: Vec::new(),
        };
        for row in rows {
            let params = ms.params(net, row);
            let kind = params.kind;
            let mut angle_slots = Vec::with_capacity(params.buses.len());
            let mut mag_slots = Vec::with_capacity(params.buses.len());
            for (p, &bus) in params.buses.iter().enumerate() {
                let local = *position.get(&bus).unwrap_or_else(|| {
                    panic!(
                        "row {row} ({kind}) touches bus {bus} outside area {}",
                        map.area
                    )
                });
                let s = map.slots(bus).expect("local bus has slots");
                t.local_bus.push(local);
                t.y.push(params.y.get(p).copied().unwrap_or_default());
                angle_slots.push(if kind == MeasurementType::Vm {
                    NO_SLOT
                } else {
                    s.angle.unwrap_or(NO_SLOT)
                });
                mag_slots.push(s.magnitude);
            }
            t.slots.extend(angle_slots);
            t.slots.extend(mag_slots);
            t.rows.push(row);
            t.kinds.push(kind);
            t.ptr.push(t.local_bus.len());
        }
        t
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_slots(&self, r: usize) -> &[usize] {
        &self.slots[2 * self.ptr[r]..2 * self.ptr[r + 1]]
    }

    /// Evaluate h and its template gradient (into `work.grad`) for row `r`
    /// given local-bus voltages.
    pub fn evaluate(&self, r: usize, va: &[f64], vm: &[f64], work: &mut RowWork) -> f64 {
        let span = self.ptr[r]..self.ptr[r + 1];
        let nb = span.len();
        work.va.clear();
        work.vm.clear();
        for &lb in &self.local_bus[span.clone()] {
            work.va.push(va[lb]);
            work.vm.push(vm[lb]);
        }
        work.grad.clear();
        work.grad.resize(2 * nb, 0.0);
        kernels::eval_row(
            self.kinds[r],
            &self.y[span],
            &work.va,
            &work.vm,
            Some(&mut work.grad),
        )
    }

    pub fn value(&self, r: usize, va: &[f64], vm: &[f64], work: &mut RowWork) -> f64 {
        let span = self.ptr[r]..self.ptr[r + 1];
        work.va.clear();
        work.vm.clear();
        for &lb in &self.local_bus[span.clone()] {
            work.va.push(va[lb]);
            work.vm.push(vm[lb]);
        }
        kernels::eval_row(self.kinds[r], &self.y[span], &work.va, &work.vm, None)
    }
}
