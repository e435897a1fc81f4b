//! Carrier geometry shared by the modulator, the detector and the analysis code.
//!
//! The band is split into `wide_total` wide carriers of `thin_per_wide` thin
//! carriers each. Wide carriers are indexed `0..wide_total` in ascending
//! frequency, so index `wide_total / 2` holds DC. Non-null wide carriers are
//! paired in ascending order into two-carrier groups; a tag activates exactly
//! one carrier of every group.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarrierLayout {
    /// Thin carriers per wide carrier (alpha).
    pub thin_per_wide: usize,
    /// Energised thin carriers inside an active wide carrier (beta).
    pub active_thin_per_wide: usize,
    /// Number of two-carrier groups (c).
    pub groups: usize,
    pub wide_total: usize,
    /// Sorted wide-carrier indices that are never activated.
    pub null_wide: Vec<usize>,
    pub fft_size: usize,
    /// Cyclic prefix length as a fraction of the transform length.
    pub cp_fraction: f64,
}

impl CarrierLayout {
    /// 512 thin carriers in 64 wide carriers of 8, 4 active thin carriers per
    /// active wide carrier, 8 nulls and 28 groups, with a 1/4 cyclic prefix.
    pub fn reference() -> Self {
        Self::new(8, 4, 64, vec![0, 1, 2, 32, 60, 61, 62, 63], 0.25)
            .expect("reference layout is valid")
    }

    pub fn new(
        thin_per_wide: usize,
        active_thin_per_wide: usize,
        wide_total: usize,
        mut null_wide: Vec<usize>,
        cp_fraction: f64,
    ) -> Result<Self> {
        null_wide.sort_unstable();
        null_wide.dedup();
        let usable = wide_total.checked_sub(null_wide.len()).ok_or_else(|| {
            Error::Layout("more null carriers than wide carriers".to_string())
        })?;
        let layout = Self {
            thin_per_wide,
            active_thin_per_wide,
            groups: usable / 2,
            wide_total,
            null_wide,
            fft_size: wide_total * thin_per_wide,
            cp_fraction,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin_per_wide == 0 || self.wide_total == 0 {
            return Err(Error::Layout("empty band".to_string()));
        }
        if self.wide_total * self.thin_per_wide != self.fft_size {
            return Err(Error::Layout(format!(
                "{} wide carriers x {} thin carriers != fft size {}",
                self.wide_total, self.thin_per_wide, self.fft_size
            )));
        }
        if self.active_thin_per_wide == 0 || self.active_thin_per_wide > self.thin_per_wide {
            return Err(Error::Layout(format!(
                "active thin carriers per wide carrier must be in 1..={}, got {}",
                self.thin_per_wide, self.active_thin_per_wide
            )));
        }
        if self.null_wide.iter().any(|&w| w >= self.wide_total) {
            return Err(Error::Layout("null carrier index out of range".to_string()));
        }
        if self.null_wide.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Layout("null carriers must be sorted and unique".to_string()));
        }
        if 2 * self.groups + self.null_wide.len() != self.wide_total {
            return Err(Error::Layout(format!(
                "2 x {} groups + {} nulls != {} wide carriers",
                self.groups,
                self.null_wide.len(),
                self.wide_total
            )));
        }
        if self.groups == 0 {
            return Err(Error::Layout("layout has no carrier groups".to_string()));
        }
        let cp = self.cp_fraction * self.fft_size as f64;
        if !(0.0..1.0).contains(&self.cp_fraction) || (cp - cp.round()).abs() > 1e-9 {
            return Err(Error::Layout(format!(
                "cyclic prefix fraction {} does not give a whole number of samples",
                self.cp_fraction
            )));
        }
        Ok(())
    }

    pub fn cp_len(&self) -> usize {
        (self.cp_fraction * self.fft_size as f64).round() as usize
    }

    /// Samples in one tag including the cyclic prefix.
    pub fn frame_len(&self) -> usize {
        self.fft_size + self.cp_len()
    }

    pub fn is_null(&self, wide: usize) -> bool {
        self.null_wide.binary_search(&wide).is_ok()
    }

    /// Non-null wide carriers in ascending order.
    pub fn data_wide(&self) -> Vec<usize> {
        (0..self.wide_total).filter(|&w| !self.is_null(w)).collect()
    }

    /// Pairs consecutive non-null wide carriers: group `g` is
    /// `(data[2g], data[2g + 1])`.
    pub fn group_map(&self) -> Vec<(usize, usize)> {
        self.data_wide()
            .chunks_exact(2)
            .map(|pair| (pair[0], pair[1]))
            .collect()
    }

    /// Offsets of the energised thin carriers inside a wide carrier.
    pub fn active_offsets(&self) -> std::ops::Range<usize> {
        let start = (self.thin_per_wide - self.active_thin_per_wide) / 2;
        start..start + self.active_thin_per_wide
    }

    /// FFT bin holding thin carrier `offset` of wide carrier `wide`.
    ///
    /// Wide carrier `w` is centred on the tone of a `wide_total`-point
    /// transform at signed frequency `w - wide_total / 2`, so it spans thin
    /// frequencies `alpha * (w - wide_total / 2) - alpha / 2 ..` upwards. The
    /// bin is the signed thin frequency taken modulo `fft_size`.
    pub fn thin_bin(&self, wide: usize, offset: usize) -> usize {
        let base = (self.fft_size / 2 + self.thin_per_wide / 2) as isize;
        let centered = (wide * self.thin_per_wide + offset) as isize - base;
        centered.rem_euclid(self.fft_size as isize) as usize
    }

    /// Inverse of [`thin_bin`](Self::thin_bin): the wide carrier an FFT bin falls in.
    pub fn wide_of_bin(&self, bin: usize) -> usize {
        let shifted = (bin + self.fft_size / 2 + self.thin_per_wide / 2) % self.fft_size;
        shifted / self.thin_per_wide
    }

    /// Active thin carriers per transmitted tag (beta * c).
    pub fn active_thin_total(&self) -> usize {
        self.active_thin_per_wide * self.groups
    }
}

impl Default for CarrierLayout {
    fn default() -> Self {
        Self::reference()
    }
}

/// The wide carriers activated by one tag.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WideCarrierMask {
    active: Vec<usize>,
}

impl WideCarrierMask {
    /// Checks that `active` holds exactly one carrier per group and no nulls.
    pub fn new(mut active: Vec<usize>, layout: &CarrierLayout) -> Result<Self> {
        active.sort_unstable();
        if active.len() != layout.groups {
            return Err(Error::Mask(format!(
                "{} active carriers for {} groups",
                active.len(),
                layout.groups
            )));
        }
        for (g, &(first, second)) in layout.group_map().iter().enumerate() {
            let hits = active.iter().filter(|&&w| w == first || w == second).count();
            if hits != 1 {
                return Err(Error::Mask(format!(
                    "group {g} has {hits} active carriers"
                )));
            }
        }
        if let Some(&w) = active.iter().find(|&&w| layout.is_null(w)) {
            return Err(Error::Mask(format!("null carrier {w} is active")));
        }
        Ok(Self { active })
    }

    pub(crate) fn from_sorted_unchecked(active: Vec<usize>) -> Self {
        Self { active }
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn contains(&self, wide: usize) -> bool {
        self.active.binary_search(&wide).is_ok()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Number of wide carriers active in exactly one of the two masks.
    pub fn symmetric_difference(&self, other: &WideCarrierMask) -> usize {
        let shared = self.active.iter().filter(|w| other.contains(**w)).count();
        self.len() + other.len() - 2 * shared
    }
}
