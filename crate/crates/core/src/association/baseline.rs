use serde::{Deserialize, Serialize};

use super::ActivationVector;
use crate::mimo::SlotModel;
use crate::topology::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropPolicy {
    /// Admit requesters with their full stream demand; drop the rest.
    Drop,
    /// Share the stream budget among more requesters before dropping.
    ShareDrop,
}

/// Activation vector plus the per-UE stream counts actually granted.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineAssignment {
    pub activation: ActivationVector,
    /// 0 for dropped UEs.
    pub streams: Vec<usize>,
}

impl BaselineAssignment {
    pub fn dropped(&self) -> usize {
        self.activation.iter().filter(Option::is_none).count()
    }
}

/// Max-SINR association: each UE requests the BS with the largest
/// `P_j * sigma_max(H_kj)^2` and each BS admits its requesters strongest first.
pub fn max_sinr_assign(model: &SlotModel, scenario: &Scenario, policy: DropPolicy) -> BaselineAssignment {
    let k_count = scenario.num_ue();
    let j_count = scenario.num_bs();
    let score = |k: usize, j: usize| scenario.bs[j].power_w() * model.top_singular_value(k, j).powi(2);
    let mut requesters = vec![Vec::new(); j_count];
    for k in 0..k_count {
        let mut pick = 0;
        for j in 1..j_count {
            if score(k, j) > score(k, pick) {
                pick = j;
            }
        }
        requesters[pick].push(k);
    }

    let demand = scenario.streams();
    let mut activation = vec![None; k_count];
    let mut streams = vec![0; k_count];
    for (j, reqs) in requesters.iter_mut().enumerate() {
        reqs.sort_by(|&a, &b| score(b, j).total_cmp(&score(a, j)).then(a.cmp(&b)));
        let bs = &scenario.bs[j];
        let total: usize = reqs.iter().map(|&k| demand[k]).sum();
        let over = reqs.len() > bs.max_users || total > bs.max_streams;
        if policy == DropPolicy::ShareDrop && over {
            let served = reqs.len().min(bs.max_users).min(bs.max_streams);
            if served == 0 {
                continue;
            }
            let share = (bs.max_streams / served).max(1);
            for &k in &reqs[..served] {
                activation[k] = Some(j);
                streams[k] = demand[k].min(share);
            }
        } else {
            let mut load = 0;
            let mut users = 0;
            for &k in reqs.iter() {
                if users < bs.max_users && load + demand[k] <= bs.max_streams {
                    activation[k] = Some(j);
                    streams[k] = demand[k];
                    users += 1;
                    load += demand[k];
                }
            }
        }
    }
    BaselineAssignment {
        activation: ActivationVector::new(activation),
        streams,
    }
}
