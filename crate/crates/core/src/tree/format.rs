//! Self-describing JSON model document. `f64` values are written in their
//! shortest round-trip form, so a save/load cycle reproduces every bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Node, ObliqueTree, SplitDirection};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "fcodt-model";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document<M> {
    format: String,
    version: u32,
    model: M,
}

impl ObliqueTree {
    pub fn to_json(&self) -> Result<String> {
        let doc = Document {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            model: self,
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document<ObliqueTree> = serde_json::from_str(text)?;
        if doc.format != FORMAT_TAG {
            return Err(Error::Format(format!("expected format tag {FORMAT_TAG:?}, found {:?}", doc.format)));
        }
        if doc.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", doc.version)));
        }
        doc.model.validate()?;
        Ok(doc.model)
    }

    pub fn read_json<R: Read>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)?;
        Self::from_json(&s)
    }

    /// Structural checks: a binary tree rooted at 0, children after their
    /// parent, depths consistent, projection lengths matching the variant.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Format(m));
        if self.nodes.is_empty() {
            return bad("model has no nodes".into());
        }
        let mut parent_seen = vec![false; self.nodes.len()];
        parent_seen[0] = true;
        if self.nodes[0].depth() != 0 {
            return bad("root must have depth 0".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.depth() > self.criteria.max_depth {
                return bad(format!("node {i} is deeper than max_depth"));
            }
            let Node::Split(s) = node else { continue };
            let expected_len = if self.flags.concatenate {
                self.input_dim + s.depth + 1
            } else {
                self.input_dim + 1
            };
            if s.projection.len() != expected_len {
                return bad(format!(
                    "node {i}: projection has {} entries, expected {expected_len}",
                    s.projection.len()
                ));
            }
            if self.direction == SplitDirection::AxisParallel
                && s.projection.iter().take(expected_len - 1).filter(|w| **w != 0.0).count() > 1
            {
                return bad(format!("node {i}: axis-parallel split with several weights"));
            }
            for c in [s.left, s.right] {
                if c <= i || c >= self.nodes.len() || parent_seen[c] {
                    return bad(format!("node {i}: invalid child index {c}"));
                }
                if self.nodes[c].depth() != s.depth + 1 {
                    return bad(format!("node {c}: depth does not follow its parent"));
                }
                parent_seen[c] = true;
            }
            if s.left == s.right {
                return bad(format!("node {i}: children must be distinct"));
            }
            if !(s.gain >= 0.0) || !s.threshold.is_finite() || s.projection.iter().any(|v| !v.is_finite()) {
                return bad(format!("node {i}: non-finite or negative split parameters"));
            }
        }
        if let Some(orphan) = parent_seen.iter().position(|s| !s) {
            return bad(format!("node {orphan} is unreachable"));
        }
        Ok(())
    }
}
