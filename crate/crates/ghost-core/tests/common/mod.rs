//! Worked-example fixtures shared by the integration tests.
#![allow(dead_code)]

use ghost_core::clustering::{Basis, DissimilarityMatrix};
use ghost_core::consensus::MsaProfile;
use ghost_core::trace::{Interaction, TraceLibrary};

/// Eight-interaction directory library (search and add operations).
pub const LIBRARY8: [(&str, &str); 8] = [
    ("{id:1,op:S,sn:Du}", "{id:1,op:SearchRsp,result:Ok,gn:Miao,sn:Du,mobile:5362634}"),
    ("{id:13,op:S,sn:Versteeg}", "{id:13,op:SearchRsp,result:Ok,gn:Steve,sn:Versteeg,mobile:9374723}"),
    ("{id:24,op:A,sn:Schneider,mobile:123456}", "{id:24,op:AddRsp,result:Ok}"),
    ("{id:275,op:S,sn:Han}", "{id:275,op:SearchRsp,result:Ok,gn:Jun,sn:Han,mobile:33333333}"),
    ("{id:490,op:S,sn:Grundy}", "{id:490,op:SearchRsp,result:Ok,gn:John,sn:Grundy,mobile:44444444}"),
    ("{id:2273,op:S,sn:Schneider}", "{id:2273,op:SearchRsp,result:Ok,sn:Schneider,mobile:123456}"),
    ("{id:2487,op:A,sn:Will}", "{id:2487,op:AddRsp,result:Ok}"),
    ("{id:3106,op:A,sn:Hine,gn:Cam,Postcode:33589}", "{id:3106,op:AddRsp,result:Ok}"),
];

pub fn library8() -> TraceLibrary {
    TraceLibrary::new(LIBRARY8.iter().map(|(q, r)| Interaction::new(*q, *r)).collect())
}

/// Reference request dissimilarity matrix of `LIBRARY8`.
pub const DM_REQ: [[f64; 8]; 8] = [
    [0.0, 0.1875, 0.3333, 0.1500, 0.1739, 0.2407, 0.2045, 0.36],
    [0.1875, 0.0, 0.2949, 0.2083, 0.1875, 0.1852, 0.2292, 0.3100],
    [0.3333, 0.2949, 0.0, 0.3077, 0.2949, 0.2051, 0.2692, 0.25],
    [0.1500, 0.2083, 0.3077, 0.0, 0.1739, 0.1852, 0.1591, 0.3400],
    [0.1739, 0.1875, 0.2949, 0.1739, 0.0, 0.2037, 0.1956, 0.3300],
    [0.2407, 0.1852, 0.2051, 0.1852, 0.2037, 0.0, 0.2037, 0.3200],
    [0.2045, 0.2292, 0.2692, 0.1591, 0.1957, 0.2037, 0.0, 0.3400],
    [0.36, 0.31, 0.25, 0.3400, 0.3300, 0.3200, 0.3400, 0.0],
];

/// Reference response dissimilarity matrix of `LIBRARY8`.
pub const DM_RES: [[f64; 8]; 8] = [
    [0.0, 0.1364, 0.3103, 0.1230, 0.1493, 0.1742, 0.3103, 0.3017],
    [0.1364, 0.0, 0.3333, 0.1515, 0.1567, 0.1515, 0.3333, 0.3258],
    [0.3103, 0.3333, 0.0, 0.3115, 0.3284, 0.3258, 0.0345, 0.0690],
    [0.1230, 0.1515, 0.3115, 0.0, 0.1493, 0.1667, 0.3033, 0.3197],
    [0.1493, 0.1567, 0.3284, 0.1493, 0.0, 0.1716, 0.3284, 0.3284],
    [0.1742, 0.1515, 0.3258, 0.1667, 0.1716, 0.0, 0.3182, 0.3258],
    [0.3103, 0.3333, 0.0345, 0.3033, 0.3284, 0.3182, 0.0, 0.0690],
    [0.3017, 0.3258, 0.0690, 0.3197, 0.3284, 0.3258, 0.0690, 0.0],
];

pub fn matrix(rows: &[[f64; 8]; 8], basis: Basis) -> DissimilarityMatrix {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    DissimilarityMatrix::from_rows(&rows, basis).unwrap()
}

/// Sixteen-request library used for whole-library matching.
pub const LIBRARY16: [&str; 16] = [
    "{id:1,op:B}",
    "{id:2,op:S,sn:Du}",
    "{id:13,op:S,sn:Versteeg}",
    "{id:24,op:A,sn:Schneider,mobile:123456}",
    "{id:275,op:S,sn:Han}",
    "{id:490,op:S,sn:Grundy}",
    "{id:2273,op:S,sn:Schneider}",
    "{id:2487,op:A,sn:Will}",
    "{id:3106,op:A,sn:Hine,gn:Cam,Postcode:33589}",
    "{id:3211,op:U}",
    "{id:1,op:B}",
    "{id:12,op:S,sn:Hine}",
    "{id:34,op:A,sn:Lindsey,gn:Vanessa,PostalAddress1:83 Venton Road}",
    "{id:145,op:S,sn:Will}",
    "{id:1334,op:S,sn:Lindsey,gn:Vanessa,PostalAddress1:83 Venton Road}",
    "{id:1500,op:U}",
];

#[allow(clippy::approx_constant)]
/// Reference ratios of each `LIBRARY16` request against "{id:75,op:S,sn:Hune}".
pub const LIBRARY16_RATIOS: [f64; 16] = [
    0.275, 0.125, 0.1875, 0.307, 0.05, 0.152, 0.185, 0.182, 0.318, 0.275, 0.275, 0.075, 0.383, 0.143, 0.379, 0.25,
];

/// Reference multiple alignment of the five search requests.
pub const SEARCH_PROFILE: [&str; 5] = [
    "{id:--1-,op:S,sn:-------Du}",
    "{id:--13,op:S,sn:-Versteeg}",
    "{id:2273,op:S,sn:Schneider}",
    "{id:275-,op:S,sn:-Han-----}",
    "{id:490-,op:S,sn:Grundy---}",
];

/// The three add requests as they appear in the prototype walkthrough.
pub const ADD_REQUESTS: [&str; 3] = [
    "{id:24,op:A,sn:Schneider,mobile:123456}",
    "{id:2487,op:A,sn:Will}",
    "{id:3106,op:A,sn:Hine,gn:Cameron,postalCode:33589}",
];

pub const SEARCH_PROTOTYPE: &str = "{id:???,op:S,sn:???????}";
pub const ADD_PROTOTYPE: &str = "{id:????,op:A,sn:??????????????l???????}";

pub fn profile(rows: &[&str]) -> MsaProfile {
    MsaProfile {
        rows: rows.iter().map(|r| r.bytes().map(|b| if b == b'-' { None } else { Some(b) }).collect()).collect(),
    }
}

pub const DURAND: &str = "{id:37,op:A,sn:Durand}";
pub const HUNE: &str = "{id:75,op:S,sn:Hune}";
pub mod oracles;
