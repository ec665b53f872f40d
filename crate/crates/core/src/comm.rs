//! Log-distance path-loss link model and the team communication graph.

use serde::{Deserialize, Serialize};

use crate::map::{GridMap, MapError, Position};

/// Radio parameters. All values are in dB except distances (meters) and the
/// exponent (dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommParams {
    pub tx_power: f64,
    pub pl_ref: f64,
    pub ref_dist: f64,
    pub path_exponent: f64,
    /// dB lost per meter of obstacle crossed by the line of sight.
    pub attenuation: f64,
    /// A link exists when quality is strictly above this value.
    pub threshold: f64,
}

impl Default for CommParams {
    /// 20 dB transmit power, 40 dB reference loss at 1 m, exponent 2 and
    /// 5 dB/m wall loss; the threshold gives a 10 m free-space range.
    fn default() -> Self {
        Self::with_range(10.0)
    }
}

impl CommParams {
    /// Default radio with the threshold set so free-space range is `range` meters.
    pub fn with_range(range: f64) -> Self {
        let mut p = Self {
            tx_power: 20.0,
            pl_ref: 40.0,
            ref_dist: 1.0,
            path_exponent: 2.0,
            attenuation: 5.0,
            threshold: 0.0,
        };
        p.threshold = p.free_space_quality(range);
        p
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            self.tx_power,
            self.pl_ref,
            self.ref_dist,
            self.path_exponent,
            self.attenuation,
            self.threshold,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err("all comm parameters must be finite".into());
        }
        if self.ref_dist <= 0.0 {
            return Err("ref_dist must be > 0".into());
        }
        if self.path_exponent <= 0.0 {
            return Err("path_exponent must be > 0".into());
        }
        if self.attenuation < 0.0 {
            return Err("attenuation must be >= 0".into());
        }
        Ok(())
    }

    /// Quality with no obstacle on the line of sight. Distances below
    /// `ref_dist / 10` are clamped to it.
    pub fn free_space_quality(&self, distance: f64) -> f64 {
        let d = distance.max(self.ref_dist / 10.0);
        self.tx_power - (self.pl_ref + 10.0 * self.path_exponent * (d / self.ref_dist).log10())
    }

    /// Largest free-space distance with quality above the threshold.
    pub fn free_space_range(&self) -> f64 {
        let exponent = (self.tx_power - self.pl_ref - self.threshold) / (10.0 * self.path_exponent);
        self.ref_dist * 10f64.powf(exponent)
    }
}

/// Link quality in dB between two positions.
pub fn quality(a: Position, b: Position, map: &GridMap, params: &CommParams) -> Result<f64, MapError> {
    let blocked = map.los_obstacle_length(a, b)?;
    Ok(params.free_space_quality(a.distance(&b)) - params.attenuation * blocked)
}

pub fn linked(a: Position, b: Position, map: &GridMap, params: &CommParams) -> Result<bool, MapError> {
    map.cell_of(a)?;
    map.cell_of(b)?;
    // obstacles only ever lower the quality
    if params.free_space_quality(a.distance(&b)) <= params.threshold {
        return Ok(false);
    }
    Ok(quality(a, b, map, params)? > params.threshold)
}

/// Undirected graph over agents `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl CommGraph {
    /// Builds a graph from an edge list; self-loops and duplicates are dropped
    /// and each edge is stored as `(low, high)`.
    pub fn new(nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut e: Vec<(usize, usize)> = edges
            .into_iter()
            .filter(|(a, b)| a != b && *a < nodes && *b < nodes)
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        e.sort_unstable();
        e.dedup();
        Self { nodes, edges: e }
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search(&key).is_ok()
    }

    /// Component label per node (smallest node id in the component).
    pub fn components(&self) -> Vec<usize> {
        let mut adj = vec![Vec::new(); self.nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut label = vec![usize::MAX; self.nodes];
        for start in 0..self.nodes {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = start;
            let mut stack = vec![start];
            while let Some(n) = stack.pop() {
                for &m in &adj[n] {
                    if label[m] == usize::MAX {
                        label[m] = start;
                        stack.push(m);
                    }
                }
            }
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }
}

/// Edge `{i, j}` iff `quality(p_i, p_j) > threshold`.
pub fn comm_graph(positions: &[Position], map: &GridMap, params: &CommParams) -> Result<CommGraph, MapError> {
    let mut edges = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if linked(positions[i], positions[j], map, params)? {
                edges.push((i, j));
            }
        }
    }
    Ok(CommGraph::new(positions.len(), edges))
}

/// True when a single component spans every node. An empty graph counts as
/// connected.
pub fn is_connected(graph: &CommGraph) -> bool {
    graph.is_connected()
}

/// Convenience: are the agents at these positions globally connected?
pub fn positions_connected(positions: &[Position], map: &GridMap, params: &CommParams) -> Result<bool, MapError> {
    Ok(comm_graph(positions, map, params)?.is_connected())
}

/// Writes `x,y,quality` rows for every free cell center relative to `source`.
pub fn quality_field_csv(source: Position, map: &GridMap, params: &CommParams) -> Result<String, MapError> {
    let mut out = String::from("x,y,quality\n");
    for cell in map.free_cells() {
        let c = map.center(cell);
        out.push_str(&format!(
            "{:.3},{:.3},{:.4}\n",
            c.x,
            c.y,
            quality(source, c, map, params)?
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::Cell;

    fn params() -> CommParams {
        CommParams {
            tx_power: 20.0,
            pl_ref: 40.0,
            ref_dist: 1.0,
            path_exponent: 2.0,
            attenuation: 5.0,
            threshold: -45.0,
        }
    }

    #[test]
    fn quality_at_reference_distance() {
        let m = GridMap::new(20, 4, 1.0).unwrap();
        let q = quality(Position::new(1.0, 1.0), Position::new(2.0, 1.0), &m, &params()).unwrap();
        assert!((q + 20.0).abs() < 1e-12);
    }

    #[test]
    fn quality_at_ten_meters_with_and_without_wall() {
        let mut m = GridMap::new(20, 4, 1.0).unwrap();
        let a = Position::new(1.5, 1.5);
        let b = Position::new(11.5, 1.5);
        let q = quality(a, b, &m, &params()).unwrap();
        assert!((q + 40.0).abs() < 1e-12);
        m.set_occupied(Cell { col: 5, row: 1 }, true);
        m.set_occupied(Cell { col: 6, row: 1 }, true);
        let q = quality(a, b, &m, &params()).unwrap();
        assert!((q + 50.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_quality_is_not_a_link() {
        let m = GridMap::new(20, 4, 1.0).unwrap();
        let mut p = params();
        p.threshold = -40.0;
        let g = comm_graph(&[Position::new(1.5, 1.5), Position::new(11.5, 1.5)], &m, &p).unwrap();
        assert!(g.edges().is_empty());
    }

    #[test]
    fn coincident_agents_form_complete_graph() {
        let m = GridMap::new(5, 5, 1.0).unwrap();
        let p = Position::new(2.5, 2.5);
        let g = comm_graph(&[p; 4], &m, &params()).unwrap();
        assert_eq!(g.edges().len(), 6);
        assert!(g.is_connected());
    }

    #[test]
    fn connectivity_basics() {
        assert!(CommGraph::new(1, []).is_connected());
        assert!(!CommGraph::new(4, [(0, 1), (2, 3)]).is_connected());
        assert!(CommGraph::new(4, [(0, 1), (1, 2), (3, 2)]).is_connected());
    }

    #[test]
    fn default_range_is_ten_meters() {
        let p = CommParams::default();
        assert!((p.free_space_range() - 10.0).abs() < 1e-9);
        assert!((p.threshold + 40.0).abs() < 1e-12);
    }
}
