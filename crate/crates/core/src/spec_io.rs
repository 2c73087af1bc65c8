//! JSON formats for games and dynamic specs.
//!
//! A game is `{"n": 3, "worth": {"0,1": 1.0, "0,1,2": 1.0}}` with 0-based players;
//! subsets that are not listed are worth 0. A dynamic spec names a family:
//!
//! ```json
//! {"family": "damped_majority", "params": {"k": 1}, "floor": 0.0}
//! ```
//!
//! Families: `static`, `alternating`, `uniform_preserving`, `damped_majority`,
//! `cyclic_splits`, `tabulated`, `aggregate`, `market`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::credible_core::Policy;
use crate::dynamics::families::{
    AlternatingTriangles, CyclicSplits, DampedMajority, StaticGame, TableEntry, Tabulated,
    UniformPreserving,
};
use crate::dynamics::{AllocationSequence, DynamicSpec, InitialSubgames};
use crate::dynamics::families::{triangle_u1, unanimity};
use crate::error::{Error, Result};
use crate::game_core::{Coalition, Game};
use crate::market::{market_dynamic, MarketSpec};
use crate::stable_core::{AggregateDynamic, AggregateMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub n: usize,
    #[serde(default)]
    pub worth: BTreeMap<String, f64>,
}

/// Parses `"0,2"`, `"{0,2}"`, `"∅"` or `""`.
pub fn parse_coalition(key: &str, n: usize) -> Result<Coalition> {
    let k = key.trim().trim_start_matches('{').trim_end_matches('}').trim();
    if k.is_empty() || k == "∅" {
        return Ok(Coalition::default());
    }
    let mut members = Vec::new();
    for part in k.split(',') {
        let i: usize = part
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("bad coalition key {key:?}")))?;
        if i >= n {
            return Err(Error::input(format!("player {i} in {key:?} is out of range for n = {n}")));
        }
        members.push(i);
    }
    Ok(Coalition::from_members(members))
}

impl GameFile {
    pub fn to_game(&self) -> Result<Game> {
        if self.n == 0 || self.n > 16 {
            return Err(Error::input(format!("n must lie in 1..=16, got {}", self.n)));
        }
        let grand = Coalition::grand(self.n);
        let mut table = vec![0.0; 1 << self.n];
        for (key, &w) in &self.worth {
            let c = parse_coalition(key, self.n)?;
            if c.is_empty() && w != 0.0 {
                return Err(Error::input("the empty coalition must be worth 0"));
            }
            table[grand.local_mask(c)] = w;
        }
        Game::from_table(grand, table)
    }

    pub fn from_game(game: &Game) -> Self {
        let grand = game.grand();
        let worth = (1..game.table().len())
            .filter(|&m| game.worth_local(m) != 0.0)
            .map(|m| {
                let key = grand
                    .from_local_mask(m)
                    .members()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                (key, game.worth_local(m))
            })
            .collect();
        Self {
            n: grand.len(),
            worth,
        }
    }
}

/// An allocation sequence as a prefix followed by a repeated cycle; an empty cycle
/// makes the sequence finite.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceFile {
    #[serde(default)]
    pub prefix: Vec<Vec<f64>>,
    #[serde(default)]
    pub cycle: Vec<Vec<f64>>,
}

impl SequenceFile {
    pub fn to_sequence(&self) -> Result<AllocationSequence> {
        if self.cycle.is_empty() {
            AllocationSequence::finite(self.prefix.clone())
        } else {
            AllocationSequence::periodic(self.prefix.clone(), self.cycle.clone())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicFile {
    pub family: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub floor: f64,
    #[serde(default)]
    pub initial_subgames: InitialSubgames,
    #[serde(default)]
    pub pre_play: Option<Vec<f64>>,
    /// Sequence checked by `faircore check` and `stablecore check`.
    #[serde(default)]
    pub sequence: Option<SequenceFile>,
    /// Policy used by the `credible` commands.
    #[serde(default)]
    pub policy: Option<Policy>,
    #[serde(default)]
    pub description: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KParams {
    k: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NParams {
    n: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StaticParams {
    game: GameFile,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableEntryFile {
    allocation: Vec<f64>,
    game: GameFile,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TabulatedParams {
    initial: GameFile,
    entries: Vec<TableEntryFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AggregateParams {
    n: usize,
    /// `v_1(N)`.
    scale: f64,
    /// Maps keyed by coalition; unlisted coalitions use the identity.
    #[serde(default)]
    maps: BTreeMap<String, AggregateMap>,
    #[serde(default)]
    eval_steps: Option<u32>,
}

fn params<T: for<'de> Deserialize<'de>>(family: &str, v: &Value) -> Result<T> {
    let v = if v.is_null() {
        Value::Object(Default::default())
    } else {
        v.clone()
    };
    serde_json::from_value(v).map_err(|e| Error::input(format!("{family} params: {e}")))
}

/// Builds an aggregate dynamic from its JSON parameters.
pub fn aggregate_from_params(v: &Value) -> Result<AggregateDynamic> {
    let p: AggregateParams = params("aggregate", v)?;
    if p.n == 0 || p.n > 16 {
        return Err(Error::input(format!("n must lie in 1..=16, got {}", p.n)));
    }
    let mut maps = vec![AggregateMap::Identity; 1 << p.n];
    maps[0] = AggregateMap::Constant { value: 0.0 };
    for (key, m) in p.maps {
        let c = parse_coalition(&key, p.n)?;
        if c.is_empty() {
            return Err(Error::input("no map may be given for the empty coalition"));
        }
        maps[c.bits() as usize] = m;
    }
    let ad = AggregateDynamic::new(p.n, maps, p.scale)?;
    Ok(match p.eval_steps {
        Some(k) => ad.with_eval_steps(k),
        None => ad,
    })
}

impl DynamicFile {
    pub fn to_spec(&self) -> Result<DynamicSpec> {
        let f = self.family.as_str();
        let spec = match f {
            "static" => {
                let p: StaticParams = params(f, &self.params)?;
                let g = p.game.to_game()?;
                DynamicSpec::new(g.clone(), Arc::new(StaticGame { game: g }), self.floor)?
            }
            "alternating" => {
                params::<BTreeMap<String, Value>>(f, &self.params)?;
                DynamicSpec::new(triangle_u1(), Arc::new(AlternatingTriangles), self.floor)?
            }
            "uniform_preserving" => {
                let p: NParams = params(f, &self.params)?;
                let g = unanimity(Coalition::grand(p.n), 1.0);
                DynamicSpec::new(g, Arc::new(UniformPreserving), self.floor)?
            }
            "damped_majority" => {
                let p: KParams = params(f, &self.params)?;
                let t = DampedMajority { k: p.k };
                DynamicSpec::new(Game::majority(t.players(), 1.0), Arc::new(t), self.floor)?
            }
            "cyclic_splits" => {
                params::<BTreeMap<String, Value>>(f, &self.params)?;
                DynamicSpec::new(Game::majority(3, 1.0), Arc::new(CyclicSplits), self.floor)?
            }
            "tabulated" => {
                let p: TabulatedParams = params(f, &self.params)?;
                let initial = p.initial.to_game()?;
                let entries = p
                    .entries
                    .iter()
                    .map(|e| {
                        Ok(TableEntry {
                            allocation: e.allocation.clone(),
                            game: e.game.to_game()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let t = Tabulated::new(initial.players(), entries)?;
                DynamicSpec::new(initial, Arc::new(t), self.floor)?
            }
            "aggregate" => aggregate_from_params(&self.params)?.spec(self.floor)?,
            "market" => {
                let mut ms: MarketSpec = params(f, &self.params)?;
                ms.floor = self.floor;
                market_dynamic(&ms)?
            }
            other => return Err(Error::input(format!("unknown family {other:?}"))),
        };
        let spec = spec.with_initial_subgames(self.initial_subgames);
        match &self.pre_play {
            Some(x0) => spec.with_pre_play(x0.clone()),
            None => Ok(spec),
        }
    }

    pub fn sequence(&self) -> Result<Option<AllocationSequence>> {
        self.sequence.as_ref().map(SequenceFile::to_sequence).transpose()
    }
}

/// Contents of a spec file: either a plain game or a dynamic spec.
#[derive(Clone, Debug)]
pub enum SpecFile {
    Game(Game),
    Dynamic(Box<DynamicFile>),
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::input(format!("invalid JSON: {e}")))?;
        if v.get("family").is_some() {
            let d: DynamicFile =
                serde_json::from_value(v).map_err(|e| Error::input(format!("dynamic spec: {e}")))?;
            Ok(SpecFile::Dynamic(Box::new(d)))
        } else {
            let g: GameFile =
                serde_json::from_value(v).map_err(|e| Error::input(format!("game: {e}")))?;
            Ok(SpecFile::Game(g.to_game()?))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Input(m) => Error::input(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The game itself, or the initial game of a dynamic spec.
    pub fn game(&self) -> Result<Game> {
        match self {
            SpecFile::Game(g) => Ok(g.clone()),
            SpecFile::Dynamic(d) => Ok(d.to_spec()?.initial().clone()),
        }
    }

    /// The dynamic spec; a plain game is repeated unchanged.
    pub fn dynamic(&self) -> Result<DynamicSpec> {
        match self {
            SpecFile::Game(g) => DynamicSpec::new(g.clone(), Arc::new(StaticGame { game: g.clone() }), 0.0),
            SpecFile::Dynamic(d) => d.to_spec(),
        }
    }

    pub fn sequence(&self) -> Result<Option<AllocationSequence>> {
        match self {
            SpecFile::Game(_) => Ok(None),
            SpecFile::Dynamic(d) => d.sequence(),
        }
    }

    pub fn policy(&self) -> Option<Policy> {
        match self {
            SpecFile::Game(_) => None,
            SpecFile::Dynamic(d) => d.policy.clone(),
        }
    }
}
