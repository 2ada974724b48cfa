//! Seeded request streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::ids::{RequestId, RouterId, ServiceId};
use crate::model::{Level, RawRequest};
use crate::topology::ServiceDescriptor;

/// Poisson stream of Performance-level requests for one service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub arrival_rate_per_s: f64,
    /// Arrivals are generated in `[start_s, start_s + horizon_s)`.
    #[serde(default)]
    pub start_s: f64,
    pub horizon_s: f64,
    pub service: ServiceId,
    pub task_count: u32,
    pub deadline_s: f64,
    /// Candidate ingress routers, sampled uniformly. Empty means all routers.
    #[serde(default)]
    pub ingress: Vec<RouterId>,
}

/// Image-processing style service: input heavy, small output.
pub fn image_service(id: ServiceId) -> ServiceDescriptor {
    ServiceDescriptor {
        id,
        name: Some("image".to_string()),
        input_bytes_per_task: 8_000_000,
        output_bytes_per_task: 100_000,
        work_wu_per_task: 2.0,
    }
}

/// Requests numbered from `first_id`, ordered by submit time. `routers` is
/// used when the spec names no ingress.
pub fn generate_workload(spec: &WorkloadSpec, routers: &[RouterId], first_id: u32, seed: u64) -> Vec<RawRequest> {
    let ingress: &[RouterId] = if spec.ingress.is_empty() { routers } else { &spec.ingress };
    if !(spec.arrival_rate_per_s > 0.0) || ingress.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(spec.arrival_rate_per_s).expect("positive rate");
    let end = spec.start_s + spec.horizon_s;
    let mut out = Vec::new();
    let mut t = spec.start_s;
    loop {
        t += gap.sample(&mut rng);
        if t >= end {
            break;
        }
        let at = ingress[rng.random_range(0..ingress.len())];
        out.push(RawRequest {
            id: RequestId(first_id + out.len() as u32),
            level: Level::Performance,
            service: Some(spec.service),
            resource: None,
            task_count: spec.task_count,
            deadline_s: Some(spec.deadline_s),
            usage_duration_s: None,
            ingress: at,
            submit_time_s: t,
        });
    }
    out
}
