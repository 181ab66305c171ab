//! On-disk cache of coefficient tables.
//!
//! Layout: `<root>/p<p>/<rep>/tmax<T>-prec<P>/<side>-k<k>-mu<i>.json`, one file per
//! `(p, rep, k, mu-index)`. Files are written to a temporary name and renamed into place.
//! A loaded level is accepted only if one freshly solved column agrees with it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gl2newform::engine::{primal_identity, solve_identity, LevelTables, TailCertificate};
use gl2newform::{CoefficientTable, Context, Newform, Representation, Scalar, Side, TildeCharacter};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Serialize, Deserialize)]
struct StoredTable {
    mu: String,
    a_twist: u32,
    t_lo: i64,
    t_max: i64,
    coeffs: Vec<(String, String)>,
    tail: TailCertificate,
}

pub struct Cache {
    root: PathBuf,
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.@".contains(c) { c } else { '_' }).collect()
}

impl Cache {
    pub fn new(root: &Path) -> Self {
        Cache { root: root.to_path_buf() }
    }

    fn dir(&self, rep: &Representation, t_max: i64, prec: u32) -> PathBuf {
        self.root.join(format!("p{}", rep.p())).join(sanitize(&rep.to_string())).join(format!("tmax{t_max}-prec{prec}"))
    }

    fn file(dir: &Path, side: Side, k: u32, idx: usize) -> PathBuf {
        let s = match side {
            Side::Pi => "pi",
            Side::Contragredient => "dual",
        };
        dir.join(format!("{s}-k{k}-mu{idx}.json"))
    }

    /// Install every cached level `k <= n/2` of both sides that passes the spot check.
    pub fn load(&self, nf: &Newform<'_>) -> Result<(), CliError> {
        let ctx = nf.context();
        let dir = self.dir(nf.pi(), nf.t_max(), ctx.prec());
        if !dir.exists() {
            return Ok(());
        }
        for side in [Side::Pi, Side::Contragredient] {
            for k in 0..=nf.n() / 2 {
                let chars = gl2newform::characters::characters_up_to(nf.p(), k);
                let mut tables = Vec::with_capacity(chars.len());
                for (i, mu) in chars.iter().enumerate() {
                    match read_table(&Self::file(&dir, side, k, i), mu, ctx.prec())? {
                        Some(t) => tables.push(t),
                        None => break,
                    }
                }
                if tables.len() != chars.len() {
                    continue;
                }
                // Spot check: the column of the middle character, solved afresh.
                let j = chars.len() / 2;
                let fresh = primal_identity(ctx, nf.rep(side), &chars[j])
                    .and_then(|d| solve_identity(ctx, nf.p(), nf.n(), k, &chars[j], &d, nf.t_max()))?;
                if fresh != tables[j] {
                    continue;
                }
                nf.insert_level(side, LevelTables::new(nf.p(), k, tables));
            }
        }
        Ok(())
    }

    /// Write every level `k <= n/2` of both sides that is not stored yet.
    pub fn store(&self, nf: &Newform<'_>) -> Result<(), CliError> {
        let ctx: &Context = nf.context();
        let dir = self.dir(nf.pi(), nf.t_max(), ctx.prec());
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        for side in [Side::Pi, Side::Contragredient] {
            for k in 0..=nf.n() / 2 {
                let lvl = nf.level(side, k)?;
                for (i, tab) in lvl.tables.iter().enumerate() {
                    let path = Self::file(&dir, side, k, i);
                    if !path.exists() {
                        write_atomic(&path, &encode(tab))?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn encode(tab: &CoefficientTable) -> String {
    let stored = StoredTable {
        mu: tab.mu.to_string(),
        a_twist: tab.a_twist,
        t_lo: tab.t_lo,
        t_max: tab.t_max,
        coeffs: tab
            .coeffs
            .iter()
            .map(|c| if c.is_zero() { ("0".into(), "0".into()) } else { c.to_decimal_strings() })
            .collect(),
        tail: tab.tail,
    };
    serde_json::to_string(&stored).expect("table serializes")
}

fn read_table(path: &Path, mu: &TildeCharacter, prec: u32) -> Result<Option<CoefficientTable>, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(CliError::io(path, e)),
    };
    // Unreadable entries are treated as absent; the cache never overrides recomputation.
    let Ok(stored) = serde_json::from_str::<StoredTable>(&text) else { return Ok(None) };
    if stored.mu != mu.to_string() {
        return Ok(None);
    }
    let coeffs: Result<Vec<Scalar>, _> = stored.coeffs.iter().map(|(re, im)| Scalar::parse(re, im, prec)).collect();
    let Ok(coeffs) = coeffs else { return Ok(None) };
    Ok(Some(CoefficientTable {
        mu: mu.clone(),
        a_twist: stored.a_twist,
        t_lo: stored.t_lo,
        t_max: stored.t_max,
        coeffs,
        tail: stored.tail,
    }))
}

fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let dir = path.parent().expect("cache files live in a directory");
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}
