//! On-disk cache for eigendecompositions.
//!
//! Diagonalization dominates every sweep, so spectra are persisted per
//! (n, g, build-version) key. File layout, all little-endian:
//!
//! ```text
//! magic "OTLB" | format version u32 | n u32 | g f64 | d u64     header
//! d x f64 energies                                              payload
//! d*d complex entries, interleaved (re, im) f64, column-major   payload
//! CRC-64/XZ of the payload bytes, u64                           trailer
//! ```
//!
//! Writers never clobber an existing entry: data is written to a unique
//! temp file and published with a hard link, which fails if the key
//! already exists. The first complete write therefore wins and later
//! writers verify-and-discard, so concurrent sweeps sharing a cache
//! directory are safe.

use crate::error::{Error, Result};
use crate::operators::HamiltonianModel;
use crate::spectral::{self, ModelTag, SpectralData};
use crate::C64;
use crc::{Crc, CRC_64_XZ};
use ndarray::Array2;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

const MAGIC: &[u8; 4] = b"OTLB";
// A static (not const) so digests can borrow it for 'static.
static CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

/// Environment variable overriding any `--cache-dir` flag.
pub const CACHE_ENV_VAR: &str = "OTOC_LAB_CACHE";

/// Checksum of a byte slice with the same CRC-64 the cache trailers use;
/// also backs the configuration hashes embedded in output artifacts.
pub(crate) fn payload_checksum(bytes: &[u8]) -> u64 {
    CRC64.checksum(bytes)
}

/// Resolve the effective cache directory from a flag value and the
/// environment (the environment wins). `None` disables caching.
pub fn resolve_cache_dir(flag: Option<PathBuf>) -> Option<PathBuf> {
    match std::env::var_os(CACHE_ENV_VAR) {
        Some(v) if !v.is_empty() => Some(PathBuf::from(v)),
        _ => flag,
    }
}

/// File name for a cache key. Couplings use the shortest round-trip
/// decimal form, so distinct f64 values map to distinct names.
pub fn cache_file_name(tag: &ModelTag) -> String {
    format!(
        "spectrum_n{:02}_g{}_v{}.otlb",
        tag.n_sites(),
        tag.g(),
        tag.version()
    )
}

/// Outcome of a store attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreOutcome {
    /// This call published the entry.
    Stored,
    /// Another writer got there first; the existing entry was kept.
    AlreadyPresent,
}

/// How `load_or_compute` obtained its spectrum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheStatus {
    /// No cache directory configured.
    Disabled,
    /// Loaded and verified from disk.
    Hit,
    /// Not on disk; computed and stored.
    MissStored,
    /// Computed, but another writer published first.
    MissRaceLost,
    /// An unusable entry was found, replaced, and the reason recorded.
    Rebuilt(String),
}

struct Digesting<W: Write> {
    inner: W,
    digest: crc::Digest<'static, u64>,
}

impl<W: Write> Digesting<W> {
    fn new(inner: W) -> Self {
        Digesting {
            inner,
            digest: CRC64.digest(),
        }
    }

    fn write_payload(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.digest.update(bytes);
        self.inner.write_all(bytes)
    }

    fn finish(self) -> (W, u64) {
        (self.inner, self.digest.finalize())
    }
}

/// Serialize a spectrum to `dir`, creating the directory if needed.
pub fn store_spectrum(dir: &Path, s: &SpectralData) -> Result<StoreOutcome> {
    fs::create_dir_all(dir)?;
    let final_path = dir.join(cache_file_name(&s.tag()));
    if final_path.exists() {
        return Ok(StoreOutcome::AlreadyPresent);
    }

    static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);
    let unique = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let temp_path = dir.join(format!(
        ".{}.tmp.{}.{}",
        cache_file_name(&s.tag()),
        std::process::id(),
        unique
    ));

    let write_result = (|| -> Result<()> {
        let file = File::create(&temp_path)?;
        let mut w = BufWriter::with_capacity(1 << 20, file);
        let tag = s.tag();
        w.write_all(MAGIC)?;
        w.write_all(&tag.version().to_le_bytes())?;
        w.write_all(&(tag.n_sites() as u32).to_le_bytes())?;
        w.write_all(&tag.g().to_le_bytes())?;
        let d = s.dim() as u64;
        w.write_all(&d.to_le_bytes())?;

        let mut dw = Digesting::new(w);
        for &e in s.energies() {
            dw.write_payload(&e.to_le_bytes())?;
        }
        let v = s.eigenvectors();
        let d = s.dim();
        for j in 0..d {
            for t in 0..d {
                let z = v[[t, j]];
                dw.write_payload(&z.re.to_le_bytes())?;
                dw.write_payload(&z.im.to_le_bytes())?;
            }
        }
        let (mut w, crc) = dw.finish();
        w.write_all(&crc.to_le_bytes())?;
        w.flush()?;
        w.into_inner()
            .map_err(|e| Error::Io(e.into_error()))?
            .sync_all()?;
        Ok(())
    })();
    if let Err(e) = write_result {
        let _ = fs::remove_file(&temp_path);
        return Err(e);
    }

    // Publish atomically; an existing entry means another writer won.
    let outcome = match fs::hard_link(&temp_path, &final_path) {
        Ok(()) => Ok(StoreOutcome::Stored),
        Err(e) if e.kind() == ErrorKind::AlreadyExists => Ok(StoreOutcome::AlreadyPresent),
        Err(e) => Err(Error::Io(e)),
    };
    let _ = fs::remove_file(&temp_path);
    outcome
}

fn read_exact_payload<R: Read>(
    r: &mut R,
    digest: &mut crc::Digest<'_, u64>,
    buf: &mut [u8],
) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::CacheFormat(format!("short read: {e}")))?;
    digest.update(buf);
    Ok(())
}

/// Load and checksum-verify the spectrum for `tag` from `dir`.
///
/// A missing file surfaces as `Error::Io(NotFound)`; any structural or
/// checksum problem surfaces as `Error::CacheFormat`.
pub fn load_spectrum(dir: &Path, tag: &ModelTag) -> Result<SpectralData> {
    let path = dir.join(cache_file_name(tag));
    let file = File::open(&path)?;
    let mut r = BufReader::with_capacity(1 << 20, file);

    let mut header = [0u8; 4 + 4 + 4 + 8 + 8];
    r.read_exact(&mut header)
        .map_err(|e| Error::CacheFormat(format!("short header: {e}")))?;
    if &header[0..4] != MAGIC {
        return Err(Error::CacheFormat("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    let n = u32::from_le_bytes(header[8..12].try_into().unwrap());
    let g_bits = u64::from_le_bytes(header[12..20].try_into().unwrap());
    let d = u64::from_le_bytes(header[20..28].try_into().unwrap()) as usize;

    let file_tag = ModelTag::from_raw(n, g_bits, version);
    if file_tag != *tag {
        return Err(Error::CacheFormat(format!(
            "key mismatch: file has {file_tag}, wanted {tag}"
        )));
    }
    if d != 1usize << n {
        return Err(Error::CacheFormat(format!(
            "dimension {d} inconsistent with n={n}"
        )));
    }

    let mut digest = CRC64.digest();
    let mut f64_buf = [0u8; 8];
    let mut energies = Vec::with_capacity(d);
    for _ in 0..d {
        read_exact_payload(&mut r, &mut digest, &mut f64_buf)?;
        energies.push(f64::from_le_bytes(f64_buf));
    }
    let mut vectors = Array2::<C64>::zeros((d, d));
    let mut z_buf = [0u8; 16];
    for j in 0..d {
        for t in 0..d {
            read_exact_payload(&mut r, &mut digest, &mut z_buf)?;
            vectors[[t, j]] = C64::new(
                f64::from_le_bytes(z_buf[0..8].try_into().unwrap()),
                f64::from_le_bytes(z_buf[8..16].try_into().unwrap()),
            );
        }
    }
    let computed = digest.finalize();
    let mut crc_buf = [0u8; 8];
    r.read_exact(&mut crc_buf)
        .map_err(|e| Error::CacheFormat(format!("missing checksum: {e}")))?;
    let stored = u64::from_le_bytes(crc_buf);
    if computed != stored {
        return Err(Error::CacheFormat(format!(
            "checksum mismatch: computed {computed:#018x}, stored {stored:#018x}"
        )));
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(Error::CacheFormat("trailing bytes after checksum".into())),
        Err(e) => return Err(Error::CacheFormat(format!("read error at end: {e}"))),
    }

    if !energies.windows(2).all(|w| w[0] <= w[1]) {
        return Err(Error::CacheFormat("energies not sorted".into()));
    }
    SpectralData::from_parts(*tag, energies, vectors)
        .map_err(|e| Error::CacheFormat(format!("invalid spectral data: {e}")))
}

/// Fetch the spectrum of `model` from the cache or compute and store it.
///
/// Cached entries are verified against the model's eigen-residual before
/// being trusted; unusable entries are replaced and reported via
/// [`CacheStatus::Rebuilt`]. With `dir = None` caching is skipped.
pub fn load_or_compute(
    dir: Option<&Path>,
    model: &HamiltonianModel,
) -> Result<(SpectralData, CacheStatus)> {
    let Some(dir) = dir else {
        return Ok((spectral::diagonalize_model(model)?, CacheStatus::Disabled));
    };
    let tag = ModelTag::of_model(model);
    let rebuild_reason = match load_spectrum(dir, &tag) {
        Ok(s) => match spectral::verify_against_model(&s, model) {
            Ok(()) => return Ok((s, CacheStatus::Hit)),
            Err(e) => Some(format!("cached spectrum failed verification: {e}")),
        },
        Err(Error::Io(e)) if e.kind() == ErrorKind::NotFound => None,
        Err(e) => Some(format!("unreadable cache entry: {e}")),
    };
    if rebuild_reason.is_some() {
        // Drop the bad entry so the fresh store can publish.
        let _ = fs::remove_file(dir.join(cache_file_name(&tag)));
    }

    let s = spectral::diagonalize_model(model)?;
    let outcome = store_spectrum(dir, &s)?;
    let status = match (rebuild_reason, outcome) {
        (Some(reason), _) => CacheStatus::Rebuilt(reason),
        (None, StoreOutcome::Stored) => CacheStatus::MissStored,
        (None, StoreOutcome::AlreadyPresent) => CacheStatus::MissRaceLost,
    };
    Ok((s, status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::build_chain_hamiltonian;
    use crate::spectral::diagonalize_model;

    fn spectrum(n: usize, g: f64) -> (HamiltonianModel, SpectralData) {
        let m = build_chain_hamiltonian(n, g).unwrap();
        let s = diagonalize_model(&m).unwrap();
        (m, s)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (_, s) = spectrum(3, 0.1);
        assert_eq!(
            store_spectrum(dir.path(), &s).unwrap(),
            StoreOutcome::Stored
        );
        let loaded = load_spectrum(dir.path(), &s.tag()).unwrap();
        assert_eq!(loaded.tag(), s.tag());
        for (a, b) in loaded.energies().iter().zip(s.energies()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in loaded.eigenvectors().iter().zip(s.eigenvectors()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn second_store_keeps_first_entry() {
        let dir = tempfile::tempdir().unwrap();
        let (_, s) = spectrum(3, 0.1);
        assert_eq!(
            store_spectrum(dir.path(), &s).unwrap(),
            StoreOutcome::Stored
        );
        assert_eq!(
            store_spectrum(dir.path(), &s).unwrap(),
            StoreOutcome::AlreadyPresent
        );
    }

    #[test]
    fn concurrent_stores_publish_exactly_once() {
        let dir = tempfile::tempdir().unwrap();
        let (_, s) = spectrum(3, 0.1);
        let mut handles = Vec::new();
        for _ in 0..8 {
            let dir = dir.path().to_path_buf();
            let s = s.clone();
            handles.push(std::thread::spawn(move || {
                store_spectrum(&dir, &s).unwrap()
            }));
        }
        let stored = handles
            .into_iter()
            .map(|h| h.join().unwrap())
            .filter(|o| *o == StoreOutcome::Stored)
            .count();
        // The pre-existence fast path can make every racer see the file
        // already published; at most one may claim the store.
        assert!(stored <= 1);
        assert!(load_spectrum(dir.path(), &s.tag()).is_ok());
    }

    #[test]
    fn corrupted_payload_is_rejected_and_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let (m, s) = spectrum(3, 0.1);
        store_spectrum(dir.path(), &s).unwrap();
        let path = dir.path().join(cache_file_name(&s.tag()));
        // Flip one byte in the middle of the payload.
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        fs::write(&path, &bytes).unwrap();

        match load_spectrum(dir.path(), &s.tag()) {
            Err(e) => assert!(e.is_cache_miss(), "unexpected error {e}"),
            Ok(_) => panic!("corrupt file accepted"),
        }
        let (s2, status) = load_or_compute(Some(dir.path()), &m).unwrap();
        assert!(matches!(status, CacheStatus::Rebuilt(_)));
        assert_eq!(s2.energies(), s.energies());
        // The rebuilt entry must be valid again.
        let (_, status) = load_or_compute(Some(dir.path()), &m).unwrap();
        assert_eq!(status, CacheStatus::Hit);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (_, s) = spectrum(3, 0.1);
        store_spectrum(dir.path(), &s).unwrap();
        let path = dir.path().join(cache_file_name(&s.tag()));
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            load_spectrum(dir.path(), &s.tag()),
            Err(Error::CacheFormat(_))
        ));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (_, s) = spectrum(2, 0.1);
        store_spectrum(dir.path(), &s).unwrap();
        let path = dir.path().join(cache_file_name(&s.tag()));
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_spectrum(dir.path(), &s.tag()),
            Err(Error::CacheFormat(_))
        ));
    }

    #[test]
    fn miss_then_hit() {
        let dir = tempfile::tempdir().unwrap();
        let (m, _) = spectrum(3, 0.1);
        let (_, status) = load_or_compute(Some(dir.path()), &m).unwrap();
        assert_eq!(status, CacheStatus::MissStored);
        let (_, status) = load_or_compute(Some(dir.path()), &m).unwrap();
        assert_eq!(status, CacheStatus::Hit);
    }

    #[test]
    fn disabled_cache_still_computes() {
        let (m, _) = spectrum(2, 0.1);
        let (s, status) = load_or_compute(None, &m).unwrap();
        assert_eq!(status, CacheStatus::Disabled);
        assert_eq!(s.dim(), 4);
    }

    #[test]
    fn distinct_couplings_use_distinct_files() {
        let a = cache_file_name(&ModelTag::new(10, 0.1));
        let b = cache_file_name(&ModelTag::new(10, 0.2));
        let c = cache_file_name(&ModelTag::new(11, 0.1));
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn wrong_key_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let (_, s) = spectrum(2, 0.1);
        store_spectrum(dir.path(), &s).unwrap();
        // Rename the file so it is found under a different key.
        let from = dir.path().join(cache_file_name(&s.tag()));
        let wrong = ModelTag::new(2, 0.25);
        let to = dir.path().join(cache_file_name(&wrong));
        fs::rename(from, to).unwrap();
        assert!(matches!(
            load_spectrum(dir.path(), &wrong),
            Err(Error::CacheFormat(_))
        ));
    }
}
