//! Per-keystroke prediction sessions.
//!
//! The session re-encodes the whole buffer on every edit rather than
//! caching recurrent state, so deletions are exact by construction and the
//! stream is stateless-equivalent: the output for any buffer is identical
//! to a one-shot prediction of that buffer. Incremental state caching is a
//! future optimization with this as its oracle.

use std::sync::Arc;

use crate::model::{IntentDistribution, ModelBundle};
use crate::text::{Granularity, Query, UserContext};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edit {
    Append(char),
    DeleteLast,
    Reset,
}

/// One user's live typing session against a char-granularity bundle.
pub struct TypeaheadSession {
    bundle: Arc<ModelBundle>,
    buffer: String,
    locale: u32,
    user: UserContext,
    log: Vec<(String, IntentDistribution)>,
    warned_empty_delete: bool,
}

impl TypeaheadSession {
    pub fn new(bundle: Arc<ModelBundle>, locale: u32, user: UserContext) -> Result<Self> {
        if bundle.vocab.granularity() != Granularity::Char {
            return Err(Error::InvalidConfig(
                "typeahead sessions need a char-granularity bundle".into(),
            ));
        }
        Ok(TypeaheadSession {
            bundle,
            buffer: String::new(),
            locale,
            user,
            log: Vec::new(),
            warned_empty_delete: false,
        })
    }

    /// Applies one edit and predicts on the updated buffer. Deleting from
    /// an empty buffer is a no-op that raises the warning flag; the empty
    /// buffer itself predicts through the encoder's all-PAD path.
    pub fn apply(&mut self, edit: Edit) -> Result<IntentDistribution> {
        self.warned_empty_delete = false;
        match edit {
            Edit::Append(c) => self.buffer.push(c),
            Edit::DeleteLast => {
                if self.buffer.pop().is_none() {
                    self.warned_empty_delete = true;
                }
            }
            Edit::Reset => self.buffer.clear(),
        }
        let dist = self
            .bundle
            .predict(&Query::incomplete(self.buffer.clone(), self.locale), &self.user)?;
        self.log.push((self.buffer.clone(), dist.clone()));
        Ok(dist)
    }

    pub fn buffer(&self) -> &str {
        &self.buffer
    }

    pub fn warned_empty_delete(&self) -> bool {
        self.warned_empty_delete
    }

    /// Every (buffer, distribution) pair emitted so far.
    pub fn log(&self) -> &[(String, IntentDistribution)] {
        &self.log
    }
}
