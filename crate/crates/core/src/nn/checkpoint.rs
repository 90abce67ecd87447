//! Checkpoint container: named f32 arrays in one binary file.
//!
//! Layout: 4-byte magic `AGCK`, one version byte, then records until EOF.
//! Each record is `name_len: u32 LE | name: utf-8 | ndim: u32 LE |
//! dims: u32 LE each | data: f32 LE, product(dims) values`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};

pub const MAGIC: [u8; 4] = *b"AGCK";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Default)]
pub struct Checkpoint {
    entries: Vec<Entry>,
    index: BTreeMap<String, usize>,
}

impl Checkpoint {
    pub fn new() -> Checkpoint {
        Checkpoint::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) {
        let name = name.into();
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        if let Some(&i) = self.index.get(&name) {
            self.entries[i] = Entry { name, shape, data };
        } else {
            self.index.insert(name.clone(), self.entries.len());
            self.entries.push(Entry { name, shape, data });
        }
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn require(&self, name: &str) -> Result<&Entry> {
        self.get(name)
            .ok_or_else(|| CoreError::Checkpoint(format!("missing entry '{name}'")))
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Convenience for scalar metadata records.
    pub fn insert_scalar(&mut self, name: impl Into<String>, value: f32) {
        self.insert(name, vec![1], vec![value]);
    }

    pub fn scalar(&self, name: &str) -> Result<f32> {
        let e = self.require(name)?;
        if e.data.len() != 1 {
            return Err(CoreError::Checkpoint(format!("'{name}' is not a scalar")));
        }
        Ok(e.data[0])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&MAGIC)?;
        f.write_all(&[VERSION])?;
        for e in &self.entries {
            let name = e.name.as_bytes();
            f.write_all(&(name.len() as u32).to_le_bytes())?;
            f.write_all(name)?;
            f.write_all(&(e.shape.len() as u32).to_le_bytes())?;
            for &d in &e.shape {
                f.write_all(&(d as u32).to_le_bytes())?;
            }
            for &v in &e.data {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        f.read_exact(&mut magic)
            .map_err(|_| CoreError::Checkpoint("file too short for magic".into()))?;
        if magic != MAGIC {
            return Err(CoreError::Checkpoint(format!(
                "bad magic {magic:?}, expected {MAGIC:?}"
            )));
        }
        let mut version = [0u8; 1];
        f.read_exact(&mut version)
            .map_err(|_| CoreError::Checkpoint("missing version byte".into()))?;
        if version[0] != VERSION {
            return Err(CoreError::Checkpoint(format!(
                "unsupported version {}",
                version[0]
            )));
        }
        let mut ckpt = Checkpoint::new();
        loop {
            let mut len_buf = [0u8; 4];
            match f.read_exact(&mut len_buf) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(e.into()),
            }
            let name_len = u32::from_le_bytes(len_buf) as usize;
            let mut name = vec![0u8; name_len];
            f.read_exact(&mut name)
                .map_err(|_| CoreError::Checkpoint("truncated record name".into()))?;
            let name = String::from_utf8(name)
                .map_err(|_| CoreError::Checkpoint("record name is not utf-8".into()))?;
            f.read_exact(&mut len_buf)
                .map_err(|_| CoreError::Checkpoint("truncated rank".into()))?;
            let ndim = u32::from_le_bytes(len_buf) as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                f.read_exact(&mut len_buf)
                    .map_err(|_| CoreError::Checkpoint("truncated dims".into()))?;
                shape.push(u32::from_le_bytes(len_buf) as usize);
            }
            let numel: usize = shape.iter().product();
            let mut data = vec![0f32; numel];
            let mut buf = vec![0u8; numel * 4];
            f.read_exact(&mut buf)
                .map_err(|_| CoreError::Checkpoint(format!("truncated data for '{name}'")))?;
            for (i, chunk) in buf.chunks_exact(4).enumerate() {
                data[i] = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            }
            ckpt.insert(name, shape, data);
        }
        Ok(ckpt)
    }
}
