//! C interface to the encfm index.
//!
//! Every function returns an [`EncfmStatus`]; on failure a one-line message
//! is available from [`encfm_last_error`] on the same thread. Buffers handed
//! out by the library must be released with the matching `*_free` call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use encfm::block_store::{serialize_index, BlockStoreError, StoreParams};
use encfm::crypto::{CryptoError, IndexKey};
use encfm::fasta::{parse_fasta, FastaError};
use encfm::pipeline::{build_collection_index, BuildError, BuildOptions};
use encfm::search::{SearchError, Searcher};

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncfmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    /// Wrong key or damaged index; the two cannot be told apart.
    Decryption = 5,
    Internal = 6,
}

/// An open index. Create with [`encfm_open`], release with [`encfm_close`].
pub struct EncfmIndex {
    searcher: Searcher,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncfmHit {
    pub item: u64,
    pub offset: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(EncfmStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(EncfmStatus::NullArgument, format!("{what} is null"))
    }
}

impl From<CryptoError> for Failure {
    fn from(e: CryptoError) -> Self {
        let status = match e {
            CryptoError::Io { .. } => EncfmStatus::Io,
            CryptoError::KeyLength(_) => EncfmStatus::InvalidArgument,
            _ => EncfmStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<BlockStoreError> for Failure {
    fn from(e: BlockStoreError) -> Self {
        let status = match e {
            BlockStoreError::Io(_) => EncfmStatus::Io,
            BlockStoreError::Format { .. } | BlockStoreError::UnsupportedVersion(_) => {
                EncfmStatus::Format
            }
            BlockStoreError::DecryptionFailed => EncfmStatus::Decryption,
            BlockStoreError::InvalidParameter(_) | BlockStoreError::OutOfBounds(_) => {
                EncfmStatus::InvalidArgument
            }
        };
        Failure(status, e.to_string())
    }
}

impl From<SearchError> for Failure {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Store(e) => e.into(),
            SearchError::Alphabet(e) => Failure(EncfmStatus::Decryption, e.to_string()),
            e => Failure(EncfmStatus::InvalidArgument, e.to_string()),
        }
    }
}

impl From<BuildError> for Failure {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Store(e) => e.into(),
            e => Failure(EncfmStatus::InvalidArgument, e.to_string()),
        }
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EncfmStatus {
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EncfmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            EncfmStatus::Internal
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(EncfmStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn bytes_arg<'a>(p: *const u8, len: usize, what: &str) -> Result<&'a [u8], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a>(h: *const EncfmIndex) -> Result<&'a EncfmIndex, Failure> {
    h.as_ref().ok_or_else(|| Failure::null("index handle"))
}

fn leak_vec<T>(v: Vec<T>) -> (*mut T, usize) {
    let len = v.len();
    if len == 0 {
        return (ptr::null_mut(), 0);
    }
    (Box::into_raw(v.into_boxed_slice()) as *mut T, len)
}

unsafe fn free_vec<T>(p: *mut T, len: usize) {
    if !p.is_null() && len > 0 {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(p, len)));
    }
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn encfm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Writes a new random key file. Fails if the file exists and `force` is 0.
///
/// # Safety
/// `key_path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn encfm_keygen(key_path: *const c_char, force: i32) -> EncfmStatus {
    guard(|| {
        let path = path_arg(key_path, "key_path")?;
        IndexKey::generate()?.write_file(&path, force != 0)?;
        Ok(())
    })
}

/// Builds an index of the FASTA file at `fasta_path` and writes it to
/// `index_path`. `threads` of 0 means one.
///
/// # Safety
/// All paths must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn encfm_build(
    fasta_path: *const c_char,
    key_path: *const c_char,
    index_path: *const c_char,
    k: u32,
    block_size: u32,
    sample_rate: u32,
    threads: u32,
) -> EncfmStatus {
    guard(|| {
        let fasta = path_arg(fasta_path, "fasta_path")?;
        let key = IndexKey::read_file(&path_arg(key_path, "key_path")?)?;
        let out = path_arg(index_path, "index_path")?;
        let file = fs::File::open(&fasta)
            .map_err(|e| Failure(EncfmStatus::Io, format!("{}: {e}", fasta.display())))?;
        let collection = parse_fasta(std::io::BufReader::new(file)).map_err(|e| match e {
            FastaError::Io(e) => Failure(EncfmStatus::Io, e.to_string()),
            e => Failure(EncfmStatus::Format, e.to_string()),
        })?;
        let options = BuildOptions {
            k,
            store: StoreParams {
                block_size,
                sample_rate,
                threads: threads.max(1) as usize,
            },
            ranges: None,
        };
        let bytes = serialize_index(&build_collection_index(&collection, &key, &options)?);
        fs::write(&out, bytes)
            .map_err(|e| Failure(EncfmStatus::Io, format!("{}: {e}", out.display())))
    })
}

/// Opens an index. On success `*out` holds a handle for [`encfm_close`].
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn encfm_open(
    index_path: *const c_char,
    key_path: *const c_char,
    out: *mut *mut EncfmIndex,
) -> EncfmStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        *out = ptr::null_mut();
        let key = IndexKey::read_file(&path_arg(key_path, "key_path")?)?;
        let searcher = Searcher::open(&path_arg(index_path, "index_path")?, &key)?;
        *out = Box::into_raw(Box::new(EncfmIndex { searcher }));
        Ok(())
    })
}

/// Releases a handle from [`encfm_open`]. Null is ignored.
///
/// # Safety
/// `index` must come from [`encfm_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn encfm_close(index: *mut EncfmIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// # Safety
/// `index` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn encfm_item_count(index: *const EncfmIndex, out: *mut u64) -> EncfmStatus {
    guard(|| {
        let h = handle(index)?;
        let out = out.as_mut().ok_or_else(|| Failure::null("out"))?;
        *out = h.searcher.item_count() as u64;
        Ok(())
    })
}

/// Number of occurrences of the `len` pattern bytes.
///
/// # Safety
/// `pattern` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn encfm_count(
    index: *const EncfmIndex,
    pattern: *const u8,
    len: usize,
    out: *mut u64,
) -> EncfmStatus {
    guard(|| {
        let h = handle(index)?;
        let p = bytes_arg(pattern, len, "pattern")?;
        let out = out.as_mut().ok_or_else(|| Failure::null("out"))?;
        *out = h.searcher.count(p)?;
        Ok(())
    })
}

/// All occurrences, sorted by item then offset. Release `*hits` with
/// [`encfm_hits_free`]; it is null when `*hit_count` is 0.
///
/// # Safety
/// `pattern` must point to `len` readable bytes; `hits` and `hit_count`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn encfm_locate(
    index: *const EncfmIndex,
    pattern: *const u8,
    len: usize,
    hits: *mut *mut EncfmHit,
    hit_count: *mut usize,
) -> EncfmStatus {
    guard(|| {
        let h = handle(index)?;
        let p = bytes_arg(pattern, len, "pattern")?;
        if hits.is_null() || hit_count.is_null() {
            return Err(Failure::null("hits"));
        }
        *hits = ptr::null_mut();
        *hit_count = 0;
        let found: Vec<EncfmHit> = h
            .searcher
            .locate(p)?
            .into_iter()
            .map(|m| EncfmHit {
                item: m.item as u64,
                offset: m.offset,
            })
            .collect();
        (*hits, *hit_count) = leak_vec(found);
        Ok(())
    })
}

/// # Safety
/// Arguments must be exactly what [`encfm_locate`] returned.
#[no_mangle]
pub unsafe extern "C" fn encfm_hits_free(hits: *mut EncfmHit, hit_count: usize) {
    free_vec(hits, hit_count);
}

/// Copies `len` bases of `item` starting at `start`. Release `*bases` with
/// [`encfm_bytes_free`].
///
/// # Safety
/// `bases` and `bases_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn encfm_extract(
    index: *const EncfmIndex,
    item: u64,
    start: u64,
    len: u64,
    bases: *mut *mut u8,
    bases_len: *mut usize,
) -> EncfmStatus {
    guard(|| {
        let h = handle(index)?;
        if bases.is_null() || bases_len.is_null() {
            return Err(Failure::null("bases"));
        }
        *bases = ptr::null_mut();
        *bases_len = 0;
        let item = usize::try_from(item)
            .map_err(|_| Failure(EncfmStatus::InvalidArgument, "item out of range".into()))?;
        (*bases, *bases_len) = leak_vec(h.searcher.extract(item, start, len)?);
        Ok(())
    })
}

/// # Safety
/// Arguments must be exactly what [`encfm_extract`] returned.
#[no_mangle]
pub unsafe extern "C" fn encfm_bytes_free(bases: *mut u8, bases_len: usize) {
    free_vec(bases, bases_len);
}
