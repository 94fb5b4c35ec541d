//! Hand-crafted user features fed to the wide side of the fusion head.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A user id paired with its traditional feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserContext {
    pub user_id: String,
    pub features: Vec<f64>,
}

impl UserContext {
    /// A user with no history: uniform propensities, given locale.
    pub fn fresh(user_id: impl Into<String>, locale: u32, width: usize, label_count: usize, locale_cap: usize) -> Result<Self> {
        Ok(UserContext {
            user_id: user_id.into(),
            features: build_user_features(&[], locale, label_count, locale_cap, width)?,
        })
    }
}

/// Fixed-width behavioral feature vector:
/// Laplace-smoothed per-intent click propensities, then a locale one-hot
/// block where locales past the cap share the final "other" slot, then
/// zero padding up to `width`.
pub fn build_user_features(
    history: &[u32],
    locale: u32,
    label_count: usize,
    locale_cap: usize,
    width: usize,
) -> Result<Vec<f64>> {
    if width < label_count + locale_cap {
        return Err(Error::InvalidConfig(format!(
            "feature width {width} below propensity block {label_count} + locale block {locale_cap}"
        )));
    }
    let mut out = vec![0.0; width];
    let n = history.len() as f64;
    let denom = n + label_count as f64;
    for j in 0..label_count {
        let count = history.iter().filter(|&&l| l as usize == j).count() as f64;
        out[j] = (count + 1.0) / denom;
    }
    let slot = (locale as usize).min(locale_cap - 1);
    out[label_count + slot] = 1.0;
    Ok(out)
}

/// Stateful featurizer used during ingestion: tracks each user's past
/// labels so a record's features only reflect clicks before it.
#[derive(Debug, Clone)]
pub struct UserFeaturizer {
    width: usize,
    label_count: usize,
    locale_cap: usize,
    histories: HashMap<String, Vec<u32>>,
}

impl UserFeaturizer {
    pub fn new(width: usize, label_count: usize, locale_cap: usize) -> Result<Self> {
        if width < label_count + locale_cap {
            return Err(Error::InvalidConfig(format!(
                "feature width {width} below propensity block {label_count} + locale block {locale_cap}"
            )));
        }
        Ok(UserFeaturizer {
            width,
            label_count,
            locale_cap,
            histories: HashMap::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn features(&self, user_id: &str, locale: u32) -> Result<Vec<f64>> {
        let history = self.histories.get(user_id).map(Vec::as_slice).unwrap_or(&[]);
        build_user_features(history, locale, self.label_count, self.locale_cap, self.width)
    }

    pub fn observe(&mut self, user_id: &str, label: u32) {
        self.histories.entry(user_id.to_string()).or_default().push(label);
    }
}
