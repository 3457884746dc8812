use std::collections::HashMap;

use super::mesh::Mesh2D;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    /// (x, z) in µm.
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// Mesh edge identity: horizontal edges join (i, k)–(i+1, k), vertical ones (i, k)–(i, k+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeKey {
    H(usize, usize),
    V(usize, usize),
}

/// Zero contour of the node field `f` on the mesh. Nodes with f < 0 are inside.
pub fn marching_squares(mesh: &Mesh2D, f: &[f64]) -> Vec<Polyline> {
    let (nx, nz) = (mesh.nx(), mesh.nz());
    if nx < 2 || nz < 2 || !f.iter().any(|&v| v < 0.0) {
        return Vec::new();
    }
    let val = |i: usize, k: usize| f[mesh.index(i, k)];
    let point = |e: EdgeKey| -> (f64, f64) {
        let (x, z) = (mesh.x(), mesh.z());
        match e {
            EdgeKey::H(i, k) => {
                let (a, b) = (val(i, k), val(i + 1, k));
                let t = crossing(a, b);
                (x[i] + t * (x[i + 1] - x[i]), z[k])
            }
            EdgeKey::V(i, k) => {
                let (a, b) = (val(i, k), val(i, k + 1));
                let t = crossing(a, b);
                (x[i], z[k] + t * (z[k + 1] - z[k]))
            }
        }
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for i in 0..nx - 1 {
        for k in 0..nz - 1 {
            let (a, b, c, d) = (val(i, k), val(i + 1, k), val(i + 1, k + 1), val(i, k + 1));
            let case = (a < 0.0) as u8
                | ((b < 0.0) as u8) << 1
                | ((c < 0.0) as u8) << 2
                | ((d < 0.0) as u8) << 3;
            let e0 = EdgeKey::H(i, k);
            let e1 = EdgeKey::V(i + 1, k);
            let e2 = EdgeKey::H(i, k + 1);
            let e3 = EdgeKey::V(i, k);
            let centre_inside = 0.25 * (a + b + c + d) < 0.0;
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((e3, e0)),
                2 | 13 => segments.push((e0, e1)),
                3 | 12 => segments.push((e3, e1)),
                4 | 11 => segments.push((e1, e2)),
                6 | 9 => segments.push((e0, e2)),
                7 | 8 => segments.push((e3, e2)),
                5 => {
                    // a and c inside
                    if centre_inside {
                        segments.push((e3, e2));
                        segments.push((e0, e1));
                    } else {
                        segments.push((e3, e0));
                        segments.push((e1, e2));
                    }
                }
                10 => {
                    // b and d inside
                    if centre_inside {
                        segments.push((e3, e0));
                        segments.push((e1, e2));
                    } else {
                        segments.push((e0, e1));
                        segments.push((e3, e2));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, &(p, q)) in segments.iter().enumerate() {
        by_edge.entry(p).or_default().push(s);
        by_edge.entry(q).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];

    let walk =
        |start_seg: usize, start_edge: EdgeKey, used: &mut Vec<bool>| -> (Vec<EdgeKey>, bool) {
            let mut keys = vec![start_edge];
            let mut seg = start_seg;
            let mut at = start_edge;
            loop {
                used[seg] = true;
                let (p, q) = segments[seg];
                let next = if p == at { q } else { p };
                keys.push(next);
                if next == start_edge {
                    return (keys, true);
                }
                let cont = by_edge[&next].iter().copied().find(|&s| !used[s]);
                match cont {
                    Some(s) => {
                        seg = s;
                        at = next;
                    }
                    None => return (keys, false),
                }
            }
        };

    // Deterministic order: open branches from boundary edges first, then loops.
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by_key(|&s| {
        let (p, q) = segments[s];
        let open = by_edge[&p].len() == 1 || by_edge[&q].len() == 1;
        (!open, s)
    });
    let mut lines = Vec::new();
    for s in order {
        if used[s] {
            continue;
        }
        let (p, q) = segments[s];
        let start = if by_edge[&p].len() == 1 {
            p
        } else if by_edge[&q].len() == 1 {
            q
        } else {
            p
        };
        let (keys, closed) = walk(s, start, &mut used);
        let mut points: Vec<(f64, f64)> = keys.into_iter().map(point).collect();
        points.dedup();
        lines.push(Polyline { points, closed });
    }
    lines
}

fn crossing(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d == 0.0 {
        0.5
    } else {
        (a / d).clamp(0.0, 1.0)
    }
}
