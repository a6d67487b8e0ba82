//! Connected-component labelling on voxel grids.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Connectivity {
    /// Face neighbours only.
    Six,
    /// Face, edge and corner neighbours.
    #[default]
    TwentySix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub key: u16,
    /// Linear indices, in breadth-first discovery order.
    pub voxels: Vec<usize>,
}

/// Groups voxels into maximal connected sets of equal non-zero `key`.
///
/// Components are returned in scan order of their first voxel.
pub fn components_by_key(dims: [usize; 3], keys: &[u16], conn: Connectivity) -> Vec<Component> {
    assert_eq!(keys.len(), dims.iter().product::<usize>());
    let offsets: &[[i64; 3]] = match conn {
        Connectivity::Six => &crate::volume::OFFSETS_6,
        Connectivity::TwentySix => &crate::volume::OFFSETS_26,
    };
    let [nx, ny, nz] = dims;
    let mut seen = vec![false; keys.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..keys.len() {
        let key = keys[start];
        if key == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut voxels = Vec::new();
        while let Some(v) = queue.pop_front() {
            voxels.push(v);
            let x = (v % nx) as i64;
            let y = ((v / nx) % ny) as i64;
            let z = (v / (nx * ny)) as i64;
            for o in offsets {
                let (qx, qy, qz) = (x + o[0], y + o[1], z + o[2]);
                if qx < 0 || qy < 0 || qz < 0 || qx >= nx as i64 || qy >= ny as i64 || qz >= nz as i64 {
                    continue;
                }
                let q = qx as usize + nx * (qy as usize + ny * qz as usize);
                if !seen[q] && keys[q] == key {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        out.push(Component { key, voxels });
    }
    out
}

/// Connected components of a boolean membership grid.
pub fn components(dims: [usize; 3], member: &[bool], conn: Connectivity) -> Vec<Vec<usize>> {
    let keys: Vec<u16> = member.iter().map(|&m| u16::from(m)).collect();
    components_by_key(dims, &keys, conn)
        .into_iter()
        .map(|c| c.voxels)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_voxels_join_only_with_26() {
        let dims = [2, 2, 2];
        let mut member = vec![false; 8];
        member[0] = true; // (0,0,0)
        member[7] = true; // (1,1,1)
        assert_eq!(components(dims, &member, Connectivity::TwentySix).len(), 1);
        assert_eq!(components(dims, &member, Connectivity::Six).len(), 2);
    }

    #[test]
    fn equal_keys_split_by_value() {
        let keys = [1u16, 1, 2, 2, 0, 1];
        let comps = components_by_key([6, 1, 1], &keys, Connectivity::Six);
        let sizes: Vec<_> = comps.iter().map(|c| (c.key, c.voxels.len())).collect();
        assert_eq!(sizes, vec![(1, 2), (2, 2), (1, 1)]);
    }
}
