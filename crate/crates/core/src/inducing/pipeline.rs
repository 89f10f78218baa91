use serde::{Deserialize, Serialize};

use super::{build_induced_map, InducedMap, InducingParams, ReturnFinderParams};
use crate::error::Result;
use crate::map_model::{HypothesisSet, IntervalMap};
use crate::partition::{binding_table, build_critical_partition, BindingTable, CriticalPartition};

/// Everything needed to go from a map to its induced map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InducePipeline {
    pub hypotheses: HypothesisSet,
    pub r_max: u32,
    pub binding_k_max: u32,
    pub binding_samples: usize,
    pub returns: ReturnFinderParams,
    pub inducing: InducingParams,
}

impl Default for InducePipeline {
    fn default() -> Self {
        InducePipeline {
            hypotheses: HypothesisSet::default(),
            r_max: 30,
            binding_k_max: 60,
            binding_samples: 64,
            returns: ReturnFinderParams::default(),
            inducing: InducingParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Induction {
    pub partition: CriticalPartition,
    pub binding: BindingTable,
    pub induced: InducedMap,
}

impl InducePipeline {
    pub fn run(&self, map: &IntervalMap) -> Result<Induction> {
        self.hypotheses.validate()?;
        let partition = build_critical_partition(map, &self.hypotheses, self.r_max)?;
        let binding = binding_table(map, &partition, &self.hypotheses, self.binding_k_max, self.binding_samples);
        let induced = build_induced_map(map, &partition, &binding, &self.returns, &self.inducing)?;
        Ok(Induction { partition, binding, induced })
    }
}
