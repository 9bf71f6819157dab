//! JSON network-definition files.
//!
//! Schema (unknown keys rejected, all references by name):
//!
//! ```json
//! {
//!   "species":    [{"name": "A", "initial": 0}],
//!   "parameters": [{"name": "k", "value": 1.0}],
//!   "reactions":  [
//!     {"reactants": {"A": 1}, "products": {}, "law": {"massAction": {"param": "k"}}},
//!     {"reactants": {"A": 1}, "products": {"B": 1},
//!      "law": {"michaelisMenten": {"V": "v", "K": "km", "substrate": "A"}}}
//!   ]
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{CountState, ParameterVector, Reaction, ReactionNetwork};

/// A parsed network file: the network plus the initial state and parameter
/// values the file declares.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub network: ReactionNetwork,
    pub theta: ParameterVector,
    pub initial: CountState,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRoot {
    species: Vec<FileSpecies>,
    parameters: Vec<FileParameter>,
    reactions: Vec<FileReaction>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSpecies {
    name: String,
    initial: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileParameter {
    name: String,
    value: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileReaction {
    reactants: BTreeMap<String, u64>,
    products: BTreeMap<String, u64>,
    law: FileLaw,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
enum FileLaw {
    MassAction {
        param: String,
    },
    #[serde(rename_all = "UPPERCASE")]
    MichaelisMenten {
        v: String,
        k: String,
        #[serde(rename = "substrate")]
        substrate: String,
    },
}

/// Parse a network definition from JSON text.
pub fn parse_network(text: &str) -> Result<NetworkModel> {
    let root: FileRoot = serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;

    let species_names: Vec<String> = root.species.iter().map(|s| s.name.clone()).collect();
    let parameter_names: Vec<String> = root.parameters.iter().map(|p| p.name.clone()).collect();
    let initial = CountState::new(root.species.iter().map(|s| s.initial).collect());

    let species_index = |name: &str| -> Result<usize> {
        species_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::ModelFile(format!("unknown species '{name}'")))
    };
    let param_index = |name: &str| -> Result<usize> {
        parameter_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::ModelFile(format!("unknown parameter '{name}'")))
    };

    let n = species_names.len();
    let mut reactions = Vec::with_capacity(root.reactions.len());
    for fr in &root.reactions {
        let mut reactants = vec![0u64; n];
        let mut products = vec![0u64; n];
        for (name, &count) in &fr.reactants {
            reactants[species_index(name)?] = count;
        }
        for (name, &count) in &fr.products {
            products[species_index(name)?] = count;
        }
        let reaction = match &fr.law {
            FileLaw::MassAction { param } => {
                Reaction::mass_action(reactants, products, param_index(param)?)
            }
            FileLaw::MichaelisMenten { v, k, substrate } => Reaction::michaelis_menten(
                reactants,
                products,
                param_index(v)?,
                param_index(k)?,
                species_index(substrate)?,
            ),
        };
        reactions.push(reaction);
    }

    let theta = ParameterVector::new(
        root.parameters.iter().map(|p| p.value).collect(),
        parameter_names.clone(),
    )?;
    let network = ReactionNetwork::new(species_names, parameter_names, reactions)?;
    Ok(NetworkModel {
        network,
        theta,
        initial,
    })
}

/// Read and parse a network definition file.
pub fn load_network(path: &Path) -> Result<NetworkModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ModelFile(format!("{}: {e}", path.display())))?;
    parse_network(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const POISSON: &str = r#"{
        "species": [{"name": "A", "initial": 0}],
        "parameters": [{"name": "k", "value": 1.0}],
        "reactions": [
            {"reactants": {}, "products": {"A": 1}, "law": {"massAction": {"param": "k"}}}
        ]
    }"#;

    #[test]
    fn parses_poisson_fixture() {
        let model = parse_network(POISSON).unwrap();
        assert_eq!(model.network.species_count(), 1);
        assert_eq!(model.network.reaction_count(), 1);
        assert_eq!(model.theta.values(), &[1.0]);
        assert_eq!(model.initial.counts(), &[0]);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = POISSON.replacen("\"species\"", "\"extra\": 1, \"species\"", 1);
        assert!(matches!(parse_network(&bad), Err(Error::ModelFile(_))));
    }

    #[test]
    fn rejects_unresolvable_names() {
        let bad = POISSON.replace("\"param\": \"k\"", "\"param\": \"nope\"");
        let err = parse_network(&bad).unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
    }

    #[test]
    fn michaelis_menten_round_trip() {
        let text = r#"{
            "species": [{"name": "S", "initial": 10}, {"name": "P", "initial": 0}],
            "parameters": [{"name": "V", "value": 5.0}, {"name": "Km", "value": 10.0}],
            "reactions": [
                {"reactants": {"S": 1}, "products": {"P": 1},
                 "law": {"michaelisMenten": {"V": "V", "K": "Km", "substrate": "S"}}}
            ]
        }"#;
        let model = parse_network(text).unwrap();
        let a = model
            .network
            .propensity(&model.theta, &model.initial, 0)
            .unwrap();
        assert!((a - 2.5).abs() < 1e-15);
    }
}
