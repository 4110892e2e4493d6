//! Embedded storage engines and the catalog that places every named object
//! on exactly one of them.

mod array;
mod keyvalue;
mod relational;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::cif;
use crate::error::{Error, Result};
use crate::value::{CanonicalTable, Column, Tag};

pub use array::{ArrayEngine, Dim, NDArray};
pub(crate) use keyvalue::parse_semiring;
pub use keyvalue::{assoc_ewise, assoc_matmul, AssociativeArray, EwiseOp, KeyValueEngine, Semiring};
pub use relational::{Relation, RelationalEngine};

/// Prefix of temporary objects created while a plan runs.
pub const TEMP_PREFIX: &str = "__mig_";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EngineId(String);

impl EngineId {
    pub fn new(s: impl Into<String>) -> Self {
        EngineId(s.into())
    }

    pub fn rel() -> Self {
        EngineId::new("rel")
    }

    pub fn kv() -> Self {
        EngineId::new("kv")
    }

    pub fn arr() -> Self {
        EngineId::new("arr")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EngineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EngineModel {
    Relational,
    KeyValue,
    Array,
}

impl fmt::Display for EngineModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineModel::Relational => "relational",
            EngineModel::KeyValue => "keyvalue",
            EngineModel::Array => "array",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DimSpec {
    pub column: String,
    /// Inferred as `max coordinate + 1` when absent.
    pub length: Option<u64>,
    /// Sorted, duplicate-free keys naming each coordinate.
    pub labels: Option<Vec<String>>,
}

impl DimSpec {
    pub fn named(column: impl Into<String>) -> Self {
        DimSpec {
            column: column.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadOptions {
    pub key: Option<Vec<String>>,
    pub dims: Option<Vec<DimSpec>>,
}

impl LoadOptions {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn key(cols: &[&str]) -> Self {
        LoadOptions {
            key: Some(cols.iter().map(|s| s.to_string()).collect()),
            dims: None,
        }
    }

    pub fn dims(cols: &[&str]) -> Self {
        LoadOptions {
            key: None,
            dims: Some(cols.iter().map(|c| DimSpec::named(*c)).collect()),
        }
    }
}

/// Shape of an array-valued result: dimensions then attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    pub dims: Vec<Dim>,
    pub attrs: Vec<Column>,
}

impl ArrayLayout {
    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            key: None,
            dims: Some(
                self.dims
                    .iter()
                    .map(|d| DimSpec {
                        column: d.name.clone(),
                        length: Some(d.len),
                        labels: d.labels.clone(),
                    })
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectMeta {
    Relation {
        schema: Vec<Column>,
        key: Option<Vec<String>>,
    },
    Assoc {
        val_tag: Tag,
    },
    Array(ArrayLayout),
}

/// Output of a native query; array engines also report the result's layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NativeResult {
    pub table: CanonicalTable,
    pub layout: Option<ArrayLayout>,
}

impl NativeResult {
    pub fn table(table: CanonicalTable) -> Self {
        NativeResult { table, layout: None }
    }
}

pub trait StorageEngine: Send + Sync {
    fn model(&self) -> EngineModel;
    fn load(&mut self, name: &str, table: &CanonicalTable, options: &LoadOptions) -> Result<()>;
    fn export(&self, name: &str) -> Result<CanonicalTable>;
    fn execute(&self, query: &str) -> Result<NativeResult>;
    fn drop_object(&mut self, name: &str) -> Result<()>;
    fn meta(&self, name: &str) -> Option<ObjectMeta>;
    /// Options that reproduce the object when reloading an export.
    fn stored_options(&self, name: &str) -> Option<LoadOptions>;
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct EngineSlot {
    id: EngineId,
    engine: RwLock<Box<dyn StorageEngine>>,
}

/// Engine registry plus the object directory. Each name lives on one engine.
pub struct Catalog {
    engines: Vec<EngineSlot>,
    directory: RwLock<BTreeMap<String, EngineId>>,
}

impl fmt::Debug for Catalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Catalog")
            .field("engines", &self.engine_ids())
            .field("objects", &*self.directory.read())
            .finish()
    }
}

impl Default for Catalog {
    fn default() -> Self {
        Self::with_default_engines()
    }
}

impl Catalog {
    pub fn empty() -> Self {
        Catalog {
            engines: Vec::new(),
            directory: RwLock::new(BTreeMap::new()),
        }
    }

    /// `rel`, `kv` and `arr`.
    pub fn with_default_engines() -> Self {
        let mut c = Catalog::empty();
        c.add_engine(EngineId::rel(), Box::new(RelationalEngine::default()));
        c.add_engine(EngineId::kv(), Box::new(KeyValueEngine::default()));
        c.add_engine(EngineId::arr(), Box::new(ArrayEngine::default()));
        c
    }

    pub fn add_engine(&mut self, id: EngineId, engine: Box<dyn StorageEngine>) {
        self.engines.retain(|s| s.id != id);
        self.engines.push(EngineSlot {
            id,
            engine: RwLock::new(engine),
        });
    }

    pub fn engine_ids(&self) -> Vec<EngineId> {
        self.engines.iter().map(|s| s.id.clone()).collect()
    }

    pub fn has_engine(&self, id: &EngineId) -> bool {
        self.slot(id).is_ok()
    }

    fn slot(&self, id: &EngineId) -> Result<&EngineSlot> {
        self.engines
            .iter()
            .find(|s| &s.id == id)
            .ok_or_else(|| Error::UnknownEngine(id.to_string()))
    }

    pub fn engine_model(&self, id: &EngineId) -> Result<EngineModel> {
        Ok(self.slot(id)?.engine.read().model())
    }

    pub fn load(&self, engine: &EngineId, name: &str, table: &CanonicalTable, options: &LoadOptions) -> Result<()> {
        let slot = self.slot(engine)?;
        if !is_identifier(name) {
            return Err(Error::Schema(format!("`{name}` is not a valid object name")));
        }
        let mut dir = self.directory.write();
        if let Some(existing) = dir.get(name) {
            return Err(Error::DuplicateObject {
                name: name.to_string(),
                engine: existing.to_string(),
            });
        }
        table.check_conformance()?;
        slot.engine.write().load(name, table, options)?;
        dir.insert(name.to_string(), engine.clone());
        Ok(())
    }

    pub fn locate(&self, name: &str) -> Option<EngineId> {
        self.directory.read().get(name).cloned()
    }

    pub fn export(&self, engine: &EngineId, name: &str) -> Result<CanonicalTable> {
        if self.locate(name).as_ref() != Some(engine) {
            return Err(Error::UnknownObject(format!("{engine}.{name}")));
        }
        self.slot(engine)?.engine.read().export(name)
    }

    pub fn execute_native(&self, engine: &EngineId, query: &str) -> Result<CanonicalTable> {
        Ok(self.execute_native_full(engine, query)?.table)
    }

    pub fn execute_native_full(&self, engine: &EngineId, query: &str) -> Result<NativeResult> {
        self.slot(engine)?.engine.read().execute(query)
    }

    pub fn meta(&self, name: &str) -> Option<(EngineId, ObjectMeta)> {
        let engine = self.locate(name)?;
        let meta = self.slot(&engine).ok()?.engine.read().meta(name)?;
        Some((engine, meta))
    }

    pub fn drop_object(&self, name: &str) -> Result<()> {
        let mut dir = self.directory.write();
        let engine = dir
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownObject(name.to_string()))?;
        self.slot(&engine)?.engine.write().drop_object(name)?;
        dir.remove(name);
        Ok(())
    }

    /// `(engine, name)` pairs in name order.
    pub fn objects(&self) -> Vec<(EngineId, String)> {
        self.directory
            .read()
            .iter()
            .map(|(n, e)| (e.clone(), n.clone()))
            .collect()
    }

    pub fn temporaries(&self) -> Vec<String> {
        self.directory
            .read()
            .keys()
            .filter(|n| n.starts_with(TEMP_PREFIX))
            .cloned()
            .collect()
    }

    /// Write every non-temporary object as CIF plus a manifest of load options.
    pub fn save_snapshot(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut manifest = Vec::new();
        for (engine, name) in self.objects() {
            if name.starts_with(TEMP_PREFIX) {
                continue;
            }
            let table = self.export(&engine, &name)?;
            let options = self
                .slot(&engine)?
                .engine
                .read()
                .stored_options(&name)
                .unwrap_or_default();
            let file = format!("{engine}.{name}.cif");
            cif::write_file(&dir.join(&file), &table)?;
            manifest.push(SnapshotEntry {
                engine,
                name,
                file,
                options,
            });
        }
        let json =
            serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(format!("snapshot manifest: {e}")))?;
        std::fs::write(dir.join(MANIFEST), json)?;
        Ok(())
    }

    /// Load a snapshot written by [`Catalog::save_snapshot`]; a directory
    /// without a manifest yields an empty catalog.
    pub fn open_snapshot(dir: &Path) -> Result<Self> {
        let catalog = Catalog::with_default_engines();
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(catalog);
        }
        let text = std::fs::read_to_string(&path)?;
        let manifest: Vec<SnapshotEntry> =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("snapshot manifest: {e}")))?;
        for entry in manifest {
            let table = cif::read_file(&dir.join(&entry.file))?;
            catalog.load(&entry.engine, &entry.name, &table, &entry.options)?;
        }
        Ok(catalog)
    }
}

const MANIFEST: &str = "catalog.json";

#[derive(Serialize, Deserialize)]
struct SnapshotEntry {
    engine: EngineId,
    name: String,
    file: String,
    options: LoadOptions,
}
