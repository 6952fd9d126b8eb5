// Copyright 2026 the nbv-sim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Results CSV serialization.

use std::io::Write;

use nalgebra::{Rotation3, UnitQuaternion};

use crate::trial::Record;
use crate::SimError;

pub const CSV_HEADER: &str =
    "trial,iter,controller,target_id,error,trace,objective,rx,ry,rz,qw,qx,qy,qz";

/// Serializes records in order. Formatting uses Rust's shortest
/// round-trip float notation, so equal runs produce identical bytes.
pub fn write_csv<W: Write>(mut out: W, records: &[Record]) -> Result<(), SimError> {
    writeln!(out, "{CSV_HEADER}")?;
    for rec in records {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            rec.pose.rot,
        ));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            rec.trial,
            rec.iter,
            rec.controller.label(),
            rec.target_id,
            rec.error,
            rec.trace,
            rec.objective,
            rec.pose.r.x,
            rec.pose.r.y,
            rec.pose.r.z,
            q.w,
            q.i,
            q.j,
            q.k,
        )?;
    }
    Ok(())
}

pub fn csv_string(records: &[Record]) -> Result<String, SimError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv is ascii"))
}
