//! Bistable node dynamics and diffusively coupled networks of them.
//!
//! Each node follows `x' = -(x - 1)(x^2 - nu)`, which for `0 < nu < 1` has a
//! quiescent sink at `-sqrt(nu)`, a saddle at `+sqrt(nu)` and an active sink
//! at `1`. A network adds `beta * sum_{j in N_i} (x_j - x_i)` to node `i`,
//! where an edge `(source, target)` puts `source` into the neighbour set of
//! `target`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bistability parameter used throughout unless overridden.
pub const BASELINE_NU: f64 = 0.01;
/// Noise amplitude used throughout unless overridden.
pub const BASELINE_ALPHA: f64 = 0.05;

/// Right-hand side of a single uncoupled node.
#[inline(always)]
pub fn node_drift(x: f64, nu: f64) -> f64 {
    -(x - 1.0) * (x * x - nu)
}

/// Derivative of [`node_drift`] with respect to `x`.
#[inline(always)]
pub fn node_drift_derivative(x: f64, nu: f64) -> f64 {
    -3.0 * x * x + 2.0 * x + nu
}

/// Single-node potential `v` with `node_drift = -v'`.
pub fn node_potential(x: f64, nu: f64) -> f64 {
    x.powi(4) / 4.0 - x.powi(3) / 3.0 - nu * x * x / 2.0 + nu * x
}

/// Potential of two uncoupled nodes; `-grad` of it is the drift at `beta = 0`.
pub fn potential_uncoupled(x1: f64, x2: f64, nu: f64) -> f64 {
    node_potential(x1, nu) + node_potential(x2, nu)
}

/// Node parameters shared by every node of a network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub nu: f64,
    pub beta: f64,
    pub alpha: f64,
}

impl ModelParams {
    pub fn new(nu: f64, beta: f64, alpha: f64) -> Result<Self> {
        let p = Self { nu, beta, alpha };
        p.validate()?;
        Ok(p)
    }

    /// `nu = 0.01`, `alpha = 0.05` at the given coupling.
    pub fn baseline(beta: f64) -> Self {
        Self {
            nu: BASELINE_NU,
            beta,
            alpha: BASELINE_ALPHA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::InvalidModel(format!(
                "nu must lie in (0, 1), got {}",
                self.nu
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidModel(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidModel(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn node_states(&self) -> NodeStates {
        NodeStates::new(self.nu)
    }
}

/// The three equilibria of an isolated node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeStates {
    pub quiescent: f64,
    pub saddle: f64,
    pub active: f64,
}

impl NodeStates {
    pub fn new(nu: f64) -> Self {
        let s = nu.sqrt();
        Self {
            quiescent: -s,
            saddle: s,
            active: 1.0,
        }
    }

    /// `'Q'`, `'S'` or `'A'`, whichever state is closest to `x`.
    pub fn nearest_symbol(&self, x: f64) -> char {
        let cands = [
            ('Q', self.quiescent),
            ('S', self.saddle),
            ('A', self.active),
        ];
        cands
            .iter()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .map(|c| c.0)
            .unwrap()
    }

    pub fn value_of(&self, symbol: char) -> Option<f64> {
        match symbol {
            'Q' => Some(self.quiescent),
            'S' => Some(self.saddle),
            'A' => Some(self.active),
            _ => None,
        }
    }
}

/// One real per evolving (non-frozen) node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Deref for StateVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for StateVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// JSON form of a network: `{"n_nodes", "edges", "nu", "beta", "alpha", "frozen"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_nodes: usize,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    pub nu: f64,
    pub beta: f64,
    pub alpha: f64,
    #[serde(default)]
    pub frozen: BTreeMap<usize, f64>,
}

/// Built-in topologies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    SingleNode,
    TwoNode,
    ThreeNode,
    /// Three-node chain with the last node frozen at `x_Q`.
    ThreeNodeSliceQ,
    /// Three-node chain with the last node frozen at `x_A`.
    ThreeNodeSliceA,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::SingleNode,
        Preset::TwoNode,
        Preset::ThreeNode,
        Preset::ThreeNodeSliceQ,
        Preset::ThreeNodeSliceA,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::SingleNode => "single-node",
            Preset::TwoNode => "two-node",
            Preset::ThreeNode => "three-node",
            Preset::ThreeNodeSliceQ => "three-node-slice-q",
            Preset::ThreeNodeSliceA => "three-node-slice-a",
        }
    }

    pub fn spec(&self, params: ModelParams) -> ModelSpec {
        let states = params.node_states();
        let (n_nodes, edges, frozen) = match self {
            Preset::SingleNode => (1, vec![], BTreeMap::new()),
            Preset::TwoNode => (2, vec![[1, 0]], BTreeMap::new()),
            Preset::ThreeNode => (3, vec![[1, 0], [2, 1]], BTreeMap::new()),
            Preset::ThreeNodeSliceQ => (
                3,
                vec![[1, 0], [2, 1]],
                BTreeMap::from([(2, states.quiescent)]),
            ),
            Preset::ThreeNodeSliceA => (
                3,
                vec![[1, 0], [2, 1]],
                BTreeMap::from([(2, states.active)]),
            ),
        };
        ModelSpec {
            n_nodes,
            edges,
            nu: params.nu,
            beta: params.beta,
            alpha: params.alpha,
            frozen,
        }
    }

    pub fn build(&self, params: ModelParams) -> Result<NetworkDrift> {
        NetworkDrift::from_spec(&self.spec(params))
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidModel(format!("unknown preset {s:?}")))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Drift field of a coupled network, optionally restricted to a slice by
/// freezing some nodes at fixed values.
///
/// Immutable after construction. The coupling is stored in reduced form over
/// the evolving coordinates: `f_i(x) = g(x_i) + beta * (sum_j M_ij x_j + c_i)`
/// where `M` is the (unnormalised) graph Laplacian restricted to evolving
/// nodes and `c` collects the contributions of frozen neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkDrift {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    params: ModelParams,
    frozen: BTreeMap<usize, f64>,
    evolving: Vec<usize>,
    coupling: Vec<f64>,
    offset: Vec<f64>,
}

impl NetworkDrift {
    pub fn new(
        n_nodes: usize,
        edges: Vec<(usize, usize)>,
        params: ModelParams,
        frozen: BTreeMap<usize, f64>,
    ) -> Result<Self> {
        params.validate()?;
        if n_nodes == 0 {
            return Err(Error::InvalidModel(
                "network needs at least one node".into(),
            ));
        }
        for &(s, t) in &edges {
            if s >= n_nodes || t >= n_nodes {
                return Err(Error::InvalidModel(format!(
                    "edge ({s}, {t}) references a node outside 0..{n_nodes}"
                )));
            }
            if s == t {
                return Err(Error::InvalidModel(format!("self-loop on node {s}")));
            }
        }
        let mut sorted = edges.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != edges.len() {
            return Err(Error::InvalidModel("duplicate edge".into()));
        }
        for (&k, v) in &frozen {
            if k >= n_nodes {
                return Err(Error::InvalidModel(format!("frozen node {k} out of range")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "frozen value for node {k} is not finite"
                )));
            }
        }
        let evolving: Vec<usize> = (0..n_nodes).filter(|i| !frozen.contains_key(i)).collect();
        if evolving.is_empty() {
            return Err(Error::InvalidModel("every node is frozen".into()));
        }
        let n = evolving.len();
        let pos = |node: usize| evolving.iter().position(|&e| e == node);
        let mut coupling = vec![0.0; n * n];
        let mut offset = vec![0.0; n];
        for &(s, t) in &edges {
            let Some(ti) = pos(t) else { continue };
            coupling[ti * n + ti] -= 1.0;
            match pos(s) {
                Some(si) => coupling[ti * n + si] += 1.0,
                None => offset[ti] += frozen[&s],
            }
        }
        Ok(Self {
            n_nodes,
            edges,
            params,
            frozen,
            evolving,
            coupling,
            offset,
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let params = ModelParams::new(spec.nu, spec.beta, spec.alpha)?;
        Self::new(
            spec.n_nodes,
            spec.edges.iter().map(|e| (e[0], e[1])).collect(),
            params,
            spec.frozen.clone(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            n_nodes: self.n_nodes,
            edges: self.edges.iter().map(|&(s, t)| [s, t]).collect(),
            nu: self.params.nu,
            beta: self.params.beta,
            alpha: self.params.alpha,
            frozen: self.frozen.clone(),
        }
    }

    /// Same topology at another coupling strength.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        let mut p = self.params;
        p.beta = beta;
        self.with_params(p)
    }

    pub fn with_params(&self, params: ModelParams) -> Result<Self> {
        params.validate()?;
        let mut out = self.clone();
        out.params = params;
        Ok(out)
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn frozen(&self) -> &BTreeMap<usize, f64> {
        &self.frozen
    }

    /// Node indices of the evolving coordinates, in state-vector order.
    pub fn evolving_nodes(&self) -> &[usize] {
        &self.evolving
    }

    pub fn dim(&self) -> usize {
        self.evolving.len()
    }

    /// Number of neighbours of evolving coordinate `i` (frozen ones included).
    pub fn degree(&self, i: usize) -> usize {
        let n = self.dim();
        (-self.coupling[i * n + i]).round() as usize
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// Writes the drift at `x` into `out`. Both slices must have length `dim()`.
    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let ModelParams { nu, beta, .. } = self.params;
        for i in 0..n {
            let row = &self.coupling[i * n..(i + 1) * n];
            let mut c = self.offset[i];
            for (m, xj) in row.iter().zip(x) {
                c += m * xj;
            }
            out[i] = node_drift(x[i], nu) + beta * c;
        }
    }

    pub fn drift(&self, x: &StateVector) -> Result<StateVector> {
        self.check_dim(x.dim())?;
        let mut out = vec![0.0; self.dim()];
        self.drift_into(x, &mut out);
        Ok(StateVector(out))
    }

    /// Derivative of the drift with respect to `beta` (the coupling term).
    pub fn beta_derivative(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let row = &self.coupling[i * n..(i + 1) * n];
                self.offset[i] + row.iter().zip(x).map(|(m, xj)| m * xj).sum::<f64>()
            })
            .collect()
    }

    pub fn jacobian(&self, x: &StateVector) -> Result<DMatrix<f64>> {
        self.check_dim(x.dim())?;
        Ok(self.jacobian_at(x))
    }

    pub(crate) fn jacobian_at(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let ModelParams { nu, beta, .. } = self.params;
        DMatrix::from_fn(n, n, |i, j| {
            let c = beta * self.coupling[i * n + j];
            if i == j {
                node_drift_derivative(x[i], nu) + c
            } else {
                c
            }
        })
    }

    /// Fast two-dimensional view, available when exactly two nodes evolve.
    pub fn planar(&self) -> Option<PlanarDrift> {
        if self.dim() != 2 {
            return None;
        }
        let m = &self.coupling;
        Some(PlanarDrift {
            nu: self.params.nu,
            beta: self.params.beta,
            m: [[m[0], m[1]], [m[2], m[3]]],
            c: [self.offset[0], self.offset[1]],
        })
    }

    /// Symbolic label such as `"AQ"`: nearest isolated-node state per evolving coordinate.
    pub fn label_for(&self, x: &[f64]) -> String {
        let states = self.params.node_states();
        x.iter().map(|&v| states.nearest_symbol(v)).collect()
    }

    /// State vector of a product state such as `"QQ"`, valid exactly at `beta = 0`.
    pub fn product_state(&self, label: &str) -> Result<StateVector> {
        let states = self.params.node_states();
        let v: Option<Vec<f64>> = label.chars().map(|c| states.value_of(c)).collect();
        match v {
            Some(v) if v.len() == self.dim() => Ok(StateVector(v)),
            _ => Err(Error::UnknownLabel(label.to_string())),
        }
    }
}

/// Allocation-free drift of a network with two evolving coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarDrift {
    pub nu: f64,
    pub beta: f64,
    m: [[f64; 2]; 2],
    c: [f64; 2],
}

impl PlanarDrift {
    #[inline(always)]
    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let [x, y] = p;
        [
            node_drift(x, self.nu) + self.beta * (self.m[0][0] * x + self.m[0][1] * y + self.c[0]),
            node_drift(y, self.nu) + self.beta * (self.m[1][0] * x + self.m[1][1] * y + self.c[1]),
        ]
    }

    /// Drift along a grid row at height `y`.
    pub fn eval_row(&self, xs: &[f64], y: f64, out: &mut [[f64; 2]]) {
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = self.eval([x, y]);
        }
    }

    pub fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let b = self.beta;
        [
            [
                node_drift_derivative(p[0], self.nu) + b * self.m[0][0],
                b * self.m[0][1],
            ],
            [
                b * self.m[1][0],
                node_drift_derivative(p[1], self.nu) + b * self.m[1][1],
            ],
        ]
    }
}
