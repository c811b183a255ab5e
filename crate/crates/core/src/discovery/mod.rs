//! Process discovery: process trees, gateway graphs, workflow nets and the
//! miners that produce them.

mod dfg;
mod gateway;
mod inductive;
mod petri;
mod tree;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use dfg::{dfg_discover, DfgOptions};
pub use gateway::{tree_to_gateway_graph, GatewayGraph, GatewayKind};
pub use inductive::inductive_discover;
pub use petri::{
    check_soundness, gateway_to_petri, tree_to_petri, Marking, PetriNet, Soundness, Transition,
};
pub use tree::{Operator, ProcessTree, SILENT_KEYWORD};

use crate::error::{Error, Result};
use crate::eventlog::EventLog;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelForm {
    Tree(ProcessTree),
    Graph(GatewayGraph),
}

/// A miner's output together with the derived net and gateway graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscoveredModel {
    pub miner: String,
    pub form: ModelForm,
    pub net: PetriNet,
    pub graph: GatewayGraph,
}

impl DiscoveredModel {
    pub fn from_tree(miner: impl Into<String>, tree: ProcessTree) -> Result<Self> {
        tree.validate()?;
        let graph = tree_to_gateway_graph(&tree);
        let net = tree_to_petri(&tree);
        Ok(DiscoveredModel {
            miner: miner.into(),
            form: ModelForm::Tree(tree),
            net,
            graph,
        })
    }

    pub fn from_graph(miner: impl Into<String>, graph: GatewayGraph) -> Result<Self> {
        let net = gateway_to_petri(&graph)?;
        Ok(DiscoveredModel {
            miner: miner.into(),
            form: ModelForm::Graph(graph.clone()),
            net,
            graph,
        })
    }

    /// Serialized primary form (tree text or gateway-graph lines).
    pub fn to_text(&self) -> String {
        match &self.form {
            ModelForm::Tree(t) => t.to_string(),
            ModelForm::Graph(g) => g.to_text(),
        }
    }
}

pub fn to_petri(model: &DiscoveredModel) -> Result<PetriNet> {
    match &model.form {
        ModelForm::Tree(t) => Ok(tree_to_petri(t)),
        ModelForm::Graph(g) => gateway_to_petri(g),
    }
}

pub trait Miner: Send + Sync {
    fn id(&self) -> &str;
    fn discover(&self, log: &EventLog) -> Result<DiscoveredModel>;
}

pub struct InductiveMiner;

impl Miner for InductiveMiner {
    fn id(&self) -> &str {
        "ind"
    }

    fn discover(&self, log: &EventLog) -> Result<DiscoveredModel> {
        DiscoveredModel::from_tree(self.id(), inductive_discover(log)?)
    }
}

pub struct DfgMiner(pub DfgOptions);

impl Miner for DfgMiner {
    fn id(&self) -> &str {
        "dfg"
    }

    fn discover(&self, log: &EventLog) -> Result<DiscoveredModel> {
        DiscoveredModel::from_graph(self.id(), dfg_discover(log, &self.0)?)
    }
}

/// Registered slot for a miner implemented outside this crate. Discovery
/// fails until an adapter replaces it in the registry.
pub struct ExternalSlot(pub String);

impl Miner for ExternalSlot {
    fn id(&self) -> &str {
        &self.0
    }

    fn discover(&self, _log: &EventLog) -> Result<DiscoveredModel> {
        Err(Error::domain(format!("miner {} has no adapter attached", self.0)))
    }
}

#[derive(Clone, Default)]
pub struct MinerRegistry {
    miners: BTreeMap<String, Arc<dyn Miner>>,
}

impl MinerRegistry {
    /// `ind`, `dfg` and the empty `ilp` slot.
    pub fn standard(dfg: DfgOptions) -> Self {
        let mut r = MinerRegistry::default();
        r.register(Arc::new(InductiveMiner));
        r.register(Arc::new(DfgMiner(dfg)));
        r.register(Arc::new(ExternalSlot("ilp".into())));
        r
    }

    /// Adds or replaces a miner under its id.
    pub fn register(&mut self, miner: Arc<dyn Miner>) {
        self.miners.insert(miner.id().to_string(), miner);
    }

    pub fn get(&self, id: &str) -> Result<Arc<dyn Miner>> {
        self.miners
            .get(id)
            .cloned()
            .ok_or_else(|| Error::domain(format!("unknown miner {id:?}")))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.miners.keys().map(String::as_str)
    }
}
