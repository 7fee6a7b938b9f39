use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Genuine and impostor image pairs by path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    pub name: String,
    pub genuine_pairs: Vec<(PathBuf, PathBuf)>,
    pub impostor_pairs: Vec<(PathBuf, PathBuf)>,
}

impl PairSet {
    pub fn validate(&self) -> Result<()> {
        for (a, b) in self.genuine_pairs.iter().chain(&self.impostor_pairs) {
            if a == b {
                return Err(Error::invalid(format!(
                    "pair uses {} on both sides",
                    a.display()
                )));
            }
        }
        Ok(())
    }

    /// Reads a `kind,path_a,path_b` CSV where `kind` is `genuine` or
    /// `impostor`. Relative paths resolve against the CSV's directory.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Csv(e),
        })?;
        let mut set = PairSet {
            name: path
                .parent()
                .and_then(Path::file_name)
                .map_or_else(|| "pairs".to_string(), |n| n.to_string_lossy().into_owned()),
            genuine_pairs: Vec::new(),
            impostor_pairs: Vec::new(),
        };
        for row in rdr.records() {
            let row = row?;
            if row.len() != 3 {
                return Err(Error::Config(format!(
                    "{}: expected kind,path_a,path_b",
                    path.display()
                )));
            }
            let pair = (base.join(&row[1]), base.join(&row[2]));
            match &row[0] {
                "genuine" => set.genuine_pairs.push(pair),
                "impostor" => set.impostor_pairs.push(pair),
                other => return Err(Error::Config(format!("unknown pair kind `{other}`"))),
            }
        }
        set.validate()?;
        Ok(set)
    }

    /// Writes the CSV read by [`PairSet::read_csv`], with paths relative to
    /// the CSV's directory where possible.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new("."));
        let rel = |p: &Path| {
            p.strip_prefix(base)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["kind", "path_a", "path_b"])?;
        for (kind, pairs) in [
            ("genuine", &self.genuine_pairs),
            ("impostor", &self.impostor_pairs),
        ] {
            for (a, b) in pairs {
                w.write_record([kind.to_string(), rel(a), rel(b)])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// One subdirectory per identity, PNG files inside. Genuine pairs are all
    /// within-identity pairs; impostor pairs match the first image of each
    /// identity with the last image of every later identity.
    pub fn from_identity_dirs(root: &Path) -> Result<Self> {
        let read_dir = |p: &Path| -> Result<Vec<PathBuf>> {
            let mut v: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(p, err)))
                .collect::<Result<_>>()?;
            v.sort();
            Ok(v)
        };
        let mut identities = Vec::new();
        for dir in read_dir(root)?.into_iter().filter(|p| p.is_dir()) {
            let images: Vec<PathBuf> = read_dir(&dir)?
                .into_iter()
                .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
                .collect();
            if !images.is_empty() {
                identities.push(images);
            }
        }
        if identities.len() < 2 {
            return Err(Error::Config(format!(
                "{}: need at least two identity subdirectories with PNG images",
                root.display()
            )));
        }
        let mut set = PairSet {
            name: root.file_name().map_or_else(
                || "images".to_string(),
                |n| n.to_string_lossy().into_owned(),
            ),
            genuine_pairs: Vec::new(),
            impostor_pairs: Vec::new(),
        };
        for imgs in &identities {
            for i in 0..imgs.len() {
                for j in i + 1..imgs.len() {
                    set.genuine_pairs.push((imgs[i].clone(), imgs[j].clone()));
                }
            }
        }
        for i in 0..identities.len() {
            for j in i + 1..identities.len() {
                let b = identities[j].last().unwrap();
                set.impostor_pairs
                    .push((identities[i][0].clone(), b.clone()));
            }
        }
        Ok(set)
    }

    /// Loads every referenced image once.
    pub fn load(&self) -> Result<Dataset> {
        self.validate()?;
        let mut index: HashMap<PathBuf, usize> = HashMap::new();
        let mut data = Dataset::default();
        let mut intern = |p: &PathBuf, data: &mut Dataset| -> Result<usize> {
            if let Some(&i) = index.get(p) {
                return Ok(i);
            }
            data.images.push(ImageBuffer::read_png(p)?);
            data.labels.push(p.to_string_lossy().into_owned());
            index.insert(p.clone(), data.images.len() - 1);
            Ok(data.images.len() - 1)
        };
        for (a, b) in &self.genuine_pairs {
            let pair = (intern(a, &mut data)?, intern(b, &mut data)?);
            data.genuine.push(pair);
        }
        for (a, b) in &self.impostor_pairs {
            let pair = (intern(a, &mut data)?, intern(b, &mut data)?);
            data.impostor.push(pair);
        }
        Ok(data)
    }
}

/// Images in memory with pairs as indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    /// Display name of each image, usually its path.
    pub labels: Vec<String>,
    pub images: Vec<ImageBuffer>,
    pub genuine: Vec<(usize, usize)>,
    pub impostor: Vec<(usize, usize)>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        let n = self.images.len();
        if self.labels.len() != n {
            return Err(Error::invalid("dataset labels and images differ in length"));
        }
        for &(a, b) in self.genuine.iter().chain(&self.impostor) {
            if a >= n || b >= n || a == b {
                return Err(Error::invalid(format!("bad pair ({a}, {b})")));
            }
        }
        Ok(())
    }

    /// Keeps the first `genuine` genuine and `impostor` impostor pairs.
    pub fn truncated(&self, genuine: usize, impostor: usize) -> Dataset {
        Dataset {
            labels: self.labels.clone(),
            images: self.images.clone(),
            genuine: self.genuine.iter().take(genuine).copied().collect(),
            impostor: self.impostor.iter().take(impostor).copied().collect(),
        }
    }
}
