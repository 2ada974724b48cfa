//! Request regularization and restoration.
//!
//! Requests arrive at one of three convergence levels and are reduced to a
//! (requirement, deadline) pair before planning:
//!
//! | level       | requirement                         | deadline            |
//! |-------------|-------------------------------------|---------------------|
//! | resource    | pseudo-service of the covering class | usage duration     |
//! | function    | named service                        | `default_deadline_s` |
//! | performance | named service                        | client deadline     |

use serde::{Deserialize, Serialize};

use crate::ids::{RequestId, ServiceId};
use crate::model::{Level, RawRequest, RegularizedRequest, Requirement, ResourceSpec};
use crate::split::{MergedResult, TaskResult};

/// One virtual day.
pub const DEFAULT_DEADLINE_S: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegularizeError {
    #[error("{0}: performance-level request without a deadline")]
    MissingDeadline(RequestId),
    #[error("{0}: resource-level request without a usage duration")]
    MissingUsageDuration(RequestId),
    #[error("{0}: resource-level request without a resource spec")]
    MissingSpec(RequestId),
    #[error("{0}: request names no service")]
    MissingService(RequestId),
    #[error("{0}: no resource class covers the requested resources")]
    NoResourceClass(RequestId),
    #[error("{0}: task_count must be at least 1")]
    NoTasks(RequestId),
    #[error("{0}: deadline must be positive")]
    NonPositiveDeadline(RequestId),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RestoreError {
    #[error("{request}: result incomplete, task {missing} missing")]
    IncompleteResult { request: RequestId, missing: u32 },
}

/// A resource bundle offered through a pseudo-service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceClass {
    pub service: ServiceId,
    #[serde(flatten)]
    pub capacity: ResourceSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regularizer {
    pub default_deadline_s: f64,
    pub resource_classes: Vec<ResourceClass>,
}

impl Default for Regularizer {
    fn default() -> Self {
        Self {
            default_deadline_s: DEFAULT_DEADLINE_S,
            resource_classes: Vec::new(),
        }
    }
}

impl Regularizer {
    pub fn new(default_deadline_s: f64, resource_classes: Vec<ResourceClass>) -> Self {
        Self {
            default_deadline_s,
            resource_classes,
        }
    }

    /// Smallest class (by cpu, gpu, memory, then service id) covering `spec`.
    fn resource_class(&self, spec: &ResourceSpec) -> Option<&ResourceClass> {
        self.resource_classes
            .iter()
            .filter(|c| spec.covered_by(&c.capacity))
            .min_by(|x, y| {
                (x.capacity.cpu, x.capacity.gpu)
                    .cmp(&(y.capacity.cpu, y.capacity.gpu))
                    .then(x.capacity.memory_gb.total_cmp(&y.capacity.memory_gb))
                    .then(x.service.cmp(&y.service))
            })
    }

    pub fn regularize(&self, raw: &RawRequest) -> Result<RegularizedRequest, RegularizeError> {
        if raw.task_count == 0 {
            return Err(RegularizeError::NoTasks(raw.id));
        }
        let (requirement, deadline_s) = match raw.level {
            Level::Resource => {
                let spec = raw.resource.ok_or(RegularizeError::MissingSpec(raw.id))?;
                let usage = raw
                    .usage_duration_s
                    .ok_or(RegularizeError::MissingUsageDuration(raw.id))?;
                let class = self
                    .resource_class(&spec)
                    .ok_or(RegularizeError::NoResourceClass(raw.id))?;
                (
                    Requirement::Resource {
                        spec,
                        service: class.service,
                    },
                    usage,
                )
            }
            Level::Function => {
                let s = raw.service.ok_or(RegularizeError::MissingService(raw.id))?;
                (Requirement::Service(s), self.default_deadline_s)
            }
            Level::Performance => {
                let s = raw.service.ok_or(RegularizeError::MissingService(raw.id))?;
                let d = raw.deadline_s.ok_or(RegularizeError::MissingDeadline(raw.id))?;
                (Requirement::Service(s), d)
            }
        };
        if !(deadline_s > 0.0) {
            return Err(RegularizeError::NonPositiveDeadline(raw.id));
        }
        Ok(RegularizedRequest {
            id: raw.id,
            requirement,
            deadline_s,
            task_count: raw.task_count,
            ingress: raw.ingress,
            submit_time_s: raw.submit_time_s,
        })
    }
}

/// Level-specific framing of the returned results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "level", rename_all = "lowercase")]
pub enum ResultEnvelope {
    Resource {
        spec: ResourceSpec,
        usage_duration_s: Option<f64>,
    },
    Function {
        service: Option<ServiceId>,
    },
    Performance {
        service: Option<ServiceId>,
        deadline_s: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientResponse {
    pub request: RequestId,
    pub envelope: ResultEnvelope,
    pub completed_at_s: f64,
    pub payload: Vec<TaskResult>,
}

/// Turns merged results back into the form the client asked in.
pub fn restore(merged: MergedResult, raw: &RawRequest) -> Result<ClientResponse, RestoreError> {
    for i in 0..raw.task_count {
        if merged.results.get(i as usize).map(|r| r.index) != Some(i) {
            return Err(RestoreError::IncompleteResult {
                request: raw.id,
                missing: i,
            });
        }
    }
    let envelope = match raw.level {
        Level::Resource => ResultEnvelope::Resource {
            spec: raw.resource.unwrap_or(ResourceSpec {
                cpu: 0,
                gpu: 0,
                memory_gb: 0.0,
            }),
            usage_duration_s: raw.usage_duration_s,
        },
        Level::Function => ResultEnvelope::Function {
            service: raw.service,
        },
        Level::Performance => ResultEnvelope::Performance {
            service: raw.service,
            deadline_s: raw.deadline_s,
        },
    };
    Ok(ClientResponse {
        request: raw.id,
        envelope,
        completed_at_s: merged.completed_at_s,
        payload: merged.results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::RouterId;

    fn raw(level: Level) -> RawRequest {
        RawRequest {
            id: RequestId(7),
            level,
            service: Some(ServiceId(0)),
            resource: None,
            task_count: 4,
            deadline_s: None,
            usage_duration_s: None,
            ingress: RouterId(0),
            submit_time_s: 1.5,
        }
    }

    fn classes() -> Regularizer {
        Regularizer::new(
            DEFAULT_DEADLINE_S,
            vec![
                ResourceClass {
                    service: ServiceId(11),
                    capacity: ResourceSpec { cpu: 16, gpu: 2, memory_gb: 64.0 },
                },
                ResourceClass {
                    service: ServiceId(10),
                    capacity: ResourceSpec { cpu: 4, gpu: 0, memory_gb: 8.0 },
                },
            ],
        )
    }

    #[test]
    fn performance_deadline_is_kept() {
        let mut r = raw(Level::Performance);
        r.deadline_s = Some(20.0);
        let reg = Regularizer::default().regularize(&r).unwrap();
        assert_eq!(reg.deadline_s, 20.0);
        assert_eq!(reg.requirement, Requirement::Service(ServiceId(0)));
        assert_eq!((reg.task_count, reg.ingress, reg.submit_time_s), (4, RouterId(0), 1.5));
    }

    #[test]
    fn function_level_gets_default_deadline() {
        let reg = Regularizer::default().regularize(&raw(Level::Function)).unwrap();
        assert_eq!(reg.deadline_s, 86_400.0);
    }

    #[test]
    fn resource_level_uses_usage_duration_and_covering_class() {
        let mut r = raw(Level::Resource);
        r.service = None;
        r.resource = Some(ResourceSpec { cpu: 2, gpu: 0, memory_gb: 4.0 });
        r.usage_duration_s = Some(120.0);
        let reg = classes().regularize(&r).unwrap();
        assert_eq!(reg.deadline_s, 120.0);
        assert_eq!(reg.requirement.service(), ServiceId(10));

        r.resource = Some(ResourceSpec { cpu: 8, gpu: 1, memory_gb: 4.0 });
        assert_eq!(classes().regularize(&r).unwrap().requirement.service(), ServiceId(11));

        r.resource = Some(ResourceSpec { cpu: 64, gpu: 0, memory_gb: 4.0 });
        assert_eq!(classes().regularize(&r), Err(RegularizeError::NoResourceClass(RequestId(7))));
    }

    #[test]
    fn missing_fields_are_errors() {
        assert_eq!(
            Regularizer::default().regularize(&raw(Level::Performance)),
            Err(RegularizeError::MissingDeadline(RequestId(7)))
        );
        let mut r = raw(Level::Resource);
        r.usage_duration_s = Some(1.0);
        assert_eq!(classes().regularize(&r), Err(RegularizeError::MissingSpec(RequestId(7))));
        let mut r = raw(Level::Performance);
        r.deadline_s = Some(-1.0);
        assert_eq!(
            Regularizer::default().regularize(&r),
            Err(RegularizeError::NonPositiveDeadline(RequestId(7)))
        );
    }

    fn merged(indices: &[u32]) -> MergedResult {
        MergedResult {
            request: RequestId(7),
            completed_at_s: 3.0,
            results: indices.iter().map(|&index| TaskResult { index, bytes: 1 }).collect(),
        }
    }

    #[test]
    fn restore_preserves_payload_order() {
        let mut r = raw(Level::Function);
        r.task_count = 1;
        assert_eq!(restore(merged(&[0]), &r).unwrap().payload, merged(&[0]).results);

        let r = raw(Level::Performance);
        let resp = restore(merged(&[0, 1, 2, 3]), &r).unwrap();
        assert_eq!(resp.payload.iter().map(|t| t.index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert_eq!(resp.request, RequestId(7));
        assert_eq!(resp.completed_at_s, 3.0);
        assert!(matches!(resp.envelope, ResultEnvelope::Performance { .. }));
    }

    #[test]
    fn restore_detects_missing_task() {
        assert_eq!(
            restore(merged(&[0, 1, 3]), &raw(Level::Function)),
            Err(RestoreError::IncompleteResult {
                request: RequestId(7),
                missing: 2
            })
        );
    }
}
