use alloc::string::String;
use core::fmt;
use sha2::{Digest, Sha256};

/// Stable content hash used to tag artifacts with the settings that produced
/// them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint([u8; 16]);

impl Fingerprint {
    /// Lowercase hex, 32 characters.
    pub fn to_hex(&self) -> String {
        use core::fmt::Write;
        let mut s = String::with_capacity(32);
        for b in self.0 {
            let _ = write!(s, "{b:02x}");
        }
        s
    }

    /// Parses the form produced by [`Fingerprint::to_hex`].
    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 32 || !s.is_ascii() {
            return None;
        }
        let mut out = [0u8; 16];
        for (k, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * k..2 * k + 2], 16).ok()?;
        }
        Some(Self(out))
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Fingerprint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Fingerprint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
        Fingerprint::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 32 hex digits"))
    }
}

/// Incremental builder; fields are tagged so reordering them changes the hash.
#[derive(Clone, Default)]
pub struct FingerprintBuilder(Sha256);

impl FingerprintBuilder {
    /// Empty builder.
    pub fn new() -> Self {
        Self::default()
    }

    /// Mixes a named float by its exact bit pattern.
    pub fn f64(mut self, tag: &str, v: f64) -> Self {
        self.tag(tag);
        self.0.update(v.to_bits().to_le_bytes());
        self
    }

    /// Mixes a named integer.
    pub fn u64(mut self, tag: &str, v: u64) -> Self {
        self.tag(tag);
        self.0.update(v.to_le_bytes());
        self
    }

    /// Mixes a named string.
    pub fn str(mut self, tag: &str, v: &str) -> Self {
        self.tag(tag);
        self.0.update((v.len() as u64).to_le_bytes());
        self.0.update(v.as_bytes());
        self
    }

    /// Mixes another fingerprint.
    pub fn fingerprint(self, tag: &str, v: Fingerprint) -> Self {
        self.str(tag, &v.to_hex())
    }

    fn tag(&mut self, tag: &str) {
        self.0.update((tag.len() as u64).to_le_bytes());
        self.0.update(tag.as_bytes());
    }

    /// Finalizes to the leading 128 bits of SHA-256.
    pub fn finish(self) -> Fingerprint {
        let digest = self.0.finalize();
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest[..16]);
        Fingerprint(out)
    }
}
