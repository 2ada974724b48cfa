//! Opaque identifiers. All are ordered so that ties anywhere in the
//! planner or the engine resolve the same way on every run.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }

        impl From<u32> for $name {
            fn from(v: u32) -> Self {
                Self(v)
            }
        }
    };
}

id_type!(
    /// A router (switch) in the network graph.
    RouterId,
    "r"
);
id_type!(
    /// An undirected link; each direction has its own queue.
    LinkId,
    "l"
);
id_type!(
    /// A computation node attached to a router.
    CnodeId,
    "c"
);
id_type!(ServiceId, "s");
id_type!(RequestId, "q");
