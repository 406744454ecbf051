//! C ABI over the vector store: open a trained model file, run top-k and
//! analogy queries, clean raw skill strings.
//!
//! Conventions:
//! * handles are opaque pointers created by `sf_store_open` and released by
//!   `sf_store_close`;
//! * every fallible call returns an [`SfStatus`]; on failure
//!   `sf_last_error` holds a thread-local message until the next call;
//! * strings returned by `sf_store_skill` are borrowed from the store and
//!   stay valid until the store is closed;
//! * the generated header lives in `include/skillforge.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use skillforge::lexicon::Normalizer;
use skillforge::vectorstore::{analogy, top_k, EmbeddingStore, StoreError};

/// Result of every fallible FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The model file could not be read.
    Io = 3,
    /// The model file is malformed.
    Corrupt = 4,
    /// The queried skill is not in the store.
    UnknownSkill = 5,
    /// An argument was out of range (k = 0, index out of bounds, …).
    InvalidArgument = 6,
    /// The output buffer is too small; the required size is reported.
    BufferTooSmall = 7,
    /// An internal invariant failed.
    Internal = 8,
}

/// One query result: the skill's store index and its similarity score.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SfNeighbor {
    pub index: u32,
    pub score: f32,
}

/// Opaque store handle.
pub struct SfStore {
    store: EmbeddingStore,
    normalizer: Normalizer,
    /// NUL-terminated copies of the vocabulary, index-aligned.
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &StoreError) -> SfStatus {
    match err {
        StoreError::Io { .. } => SfStatus::Io,
        StoreError::UnknownSkill { .. } => SfStatus::UnknownSkill,
        StoreError::ZeroNorm { .. } | StoreError::ZeroK | StoreError::DimensionMismatch { .. } => {
            SfStatus::InvalidArgument
        }
        _ => SfStatus::Corrupt,
    }
}

fn guard(f: impl FnOnce() -> SfStatus) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SfStatus::Internal
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, SfStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        return Err(SfStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        SfStatus::InvalidUtf8
    })
}

/// Version string of the library; static storage, do not free.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread; static until
/// the next failing call, do not free.
#[no_mangle]
pub extern "C" fn sf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Opens a vector-store file (binary or text format) and returns a handle
/// through `out_store`.
///
/// # Safety
/// `path` must point to a NUL-terminated string and `out_store` to writable
/// pointer storage; the returned handle must be released with
/// [`sf_store_close`].
#[no_mangle]
pub unsafe extern "C" fn sf_store_open(
    path: *const c_char,
    out_store: *mut *mut SfStore,
) -> SfStatus {
    guard(|| {
        if out_store.is_null() {
            set_error("out_store is null");
            return SfStatus::NullArgument;
        }
        let path = match cstr_arg(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match EmbeddingStore::load(Path::new(path)) {
            Ok(store) => {
                let names = store
                    .words()
                    .iter()
                    .map(|w| CString::new(w.as_str()).unwrap_or_default())
                    .collect();
                let handle = Box::new(SfStore {
                    store,
                    normalizer: Normalizer::default(),
                    names,
                });
                *out_store = Box::into_raw(handle);
                SfStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                *out_store = ptr::null_mut();
                status_of(&e)
            }
        }
    })
}

/// Releases a store handle. Null is a no-op.
///
/// # Safety
/// `store` must be a handle from [`sf_store_open`] that has not been closed.
#[no_mangle]
pub unsafe extern "C" fn sf_store_close(store: *mut SfStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Number of skills in the store; 0 for a null handle.
///
/// # Safety
/// `store` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sf_store_size(store: *const SfStore) -> u32 {
    store.as_ref().map_or(0, |s| s.store.len() as u32)
}

/// Vector dimensionality; 0 for a null handle.
///
/// # Safety
/// `store` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sf_store_dim(store: *const SfStore) -> u32 {
    store.as_ref().map_or(0, |s| s.store.dim() as u32)
}

/// Canonical skill string at `index`; borrowed from the store, valid until
/// close. Null when the handle is null or the index is out of range.
///
/// # Safety
/// `store` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sf_store_skill(store: *const SfStore, index: u32) -> *const c_char {
    store.as_ref().map_or(ptr::null(), |s| {
        s.names
            .get(index as usize)
            .map_or(ptr::null(), |c| c.as_ptr())
    })
}

/// Resolves a raw skill string (exact, then cleaned) to its store index.
///
/// # Safety
/// `store` must be a live handle; `skill` a NUL-terminated string;
/// `out_index` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_store_resolve(
    store: *const SfStore,
    skill: *const c_char,
    out_index: *mut u32,
) -> SfStatus {
    guard(|| {
        let Some(handle) = store.as_ref() else {
            set_error("store is null");
            return SfStatus::NullArgument;
        };
        if out_index.is_null() {
            set_error("out_index is null");
            return SfStatus::NullArgument;
        }
        let skill = match cstr_arg(skill, "skill") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match handle.store.resolve(skill, &handle.normalizer) {
            Some(i) => {
                *out_index = i as u32;
                SfStatus::Ok
            }
            None => {
                set_error(&format!("unknown skill {skill:?}"));
                SfStatus::UnknownSkill
            }
        }
    })
}

/// Copies the embedding at `index` into `out` (capacity `out_cap` floats).
/// Fails with `BufferTooSmall` when `out_cap` is less than the store
/// dimensionality.
///
/// # Safety
/// `store` must be a live handle; `out` must point to at least `out_cap`
/// writable floats.
#[no_mangle]
pub unsafe extern "C" fn sf_store_embedding(
    store: *const SfStore,
    index: u32,
    out: *mut f32,
    out_cap: u32,
) -> SfStatus {
    guard(|| {
        let Some(handle) = store.as_ref() else {
            set_error("store is null");
            return SfStatus::NullArgument;
        };
        if out.is_null() {
            set_error("out is null");
            return SfStatus::NullArgument;
        }
        if index as usize >= handle.store.len() {
            set_error(&format!("index {index} out of range"));
            return SfStatus::InvalidArgument;
        }
        let dim = handle.store.dim();
        if (out_cap as usize) < dim {
            set_error(&format!("buffer holds {out_cap} floats, need {dim}"));
            return SfStatus::BufferTooSmall;
        }
        let row = handle.store.row(index as usize);
        ptr::copy_nonoverlapping(row.as_ptr(), out, dim);
        SfStatus::Ok
    })
}

unsafe fn write_neighbors(
    neighbors: &[skillforge::vectorstore::Neighbor],
    out: *mut SfNeighbor,
    out_cap: u32,
    out_len: *mut u32,
) -> SfStatus {
    if neighbors.len() > out_cap as usize {
        set_error(&format!(
            "buffer holds {out_cap} neighbors, need {}",
            neighbors.len()
        ));
        if !out_len.is_null() {
            *out_len = neighbors.len() as u32;
        }
        return SfStatus::BufferTooSmall;
    }
    for (i, n) in neighbors.iter().enumerate() {
        *out.add(i) = SfNeighbor {
            index: n.index as u32,
            score: n.score as f32,
        };
    }
    if !out_len.is_null() {
        *out_len = neighbors.len() as u32;
    }
    SfStatus::Ok
}

/// Writes up to `k` nearest skills to `query` into `out` and the result
/// count into `out_len`. Fewer than `k` results are returned when the store
/// has fewer candidates.
///
/// # Safety
/// `store` must be a live handle; `query` a NUL-terminated string; `out`
/// must point to at least `out_cap` writable entries; `out_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn sf_store_top_k(
    store: *const SfStore,
    query: *const c_char,
    k: u32,
    out: *mut SfNeighbor,
    out_cap: u32,
    out_len: *mut u32,
) -> SfStatus {
    guard(|| {
        let Some(handle) = store.as_ref() else {
            set_error("store is null");
            return SfStatus::NullArgument;
        };
        if out.is_null() {
            set_error("out is null");
            return SfStatus::NullArgument;
        }
        let query = match cstr_arg(query, "query") {
            Ok(q) => q,
            Err(status) => return status,
        };
        match top_k(query, k as usize, &handle.store, &handle.normalizer) {
            Ok(neighbors) => write_neighbors(&neighbors, out, out_cap, out_len),
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Writes up to `k` nearest skills to `v(b) − v(a) + v(c)` into `out`.
///
/// # Safety
/// As for [`sf_store_top_k`]; `a`, `b`, `c` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sf_store_analogy(
    store: *const SfStore,
    a: *const c_char,
    b: *const c_char,
    c: *const c_char,
    k: u32,
    out: *mut SfNeighbor,
    out_cap: u32,
    out_len: *mut u32,
) -> SfStatus {
    guard(|| {
        let Some(handle) = store.as_ref() else {
            set_error("store is null");
            return SfStatus::NullArgument;
        };
        if out.is_null() {
            set_error("out is null");
            return SfStatus::NullArgument;
        }
        let (a, b, c) = match (
            cstr_arg(a, "a"),
            cstr_arg(b, "b"),
            cstr_arg(c, "c"),
        ) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        match analogy(a, b, c, k as usize, &handle.store, &handle.normalizer) {
            Ok(neighbors) => write_neighbors(&neighbors, out, out_cap, out_len),
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Runs the skill-cleaning pipeline on `raw` and writes the NUL-terminated
/// result into `buf`. `out_len` receives the required buffer size including
/// the NUL, whether or not the copy succeeded. An empty result means the
/// input cleans away to nothing.
///
/// # Safety
/// `raw` must be a NUL-terminated string; `buf` must point to at least
/// `buf_cap` writable bytes; `out_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn sf_normalize(
    raw: *const c_char,
    buf: *mut c_char,
    buf_cap: u32,
    out_len: *mut u32,
) -> SfStatus {
    guard(|| {
        let raw = match cstr_arg(raw, "raw") {
            Ok(r) => r,
            Err(status) => return status,
        };
        let cleaned = Normalizer::default().normalize(raw);
        let needed = cleaned.len() + 1;
        if !out_len.is_null() {
            *out_len = needed as u32;
        }
        if buf.is_null() {
            set_error("buf is null");
            return SfStatus::NullArgument;
        }
        if (buf_cap as usize) < needed {
            set_error(&format!("buffer holds {buf_cap} bytes, need {needed}"));
            return SfStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(cleaned.as_ptr() as *const c_char, buf, cleaned.len());
        *buf.add(cleaned.len()) = 0;
        SfStatus::Ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use skillforge::vectorstore::EmbeddingStore;
    use std::ffi::CString;

    fn store_file(dir: &tempfile::TempDir) -> std::path::PathBuf {
        let store = EmbeddingStore::from_rows(
            vec!["java".into(), "spark".into(), "hadoop".into()],
            vec![1.0, 0.0, 0.9, 0.1, 0.0, 1.0],
            2,
        )
        .unwrap();
        let path = dir.path().join("model.sk2v");
        store.save(&path).unwrap();
        path
    }

    unsafe fn open(path: &std::path::Path) -> *mut SfStore {
        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        let mut handle: *mut SfStore = ptr::null_mut();
        assert_eq!(sf_store_open(c_path.as_ptr(), &mut handle), SfStatus::Ok);
        assert!(!handle.is_null());
        handle
    }

    #[test]
    fn open_query_close() {
        let dir = tempfile::tempdir().unwrap();
        let path = store_file(&dir);
        unsafe {
            let handle = open(&path);
            assert_eq!(sf_store_size(handle), 3);
            assert_eq!(sf_store_dim(handle), 2);

            let name = sf_store_skill(handle, 0);
            assert_eq!(CStr::from_ptr(name).to_str().unwrap(), "java");
            assert!(sf_store_skill(handle, 99).is_null());

            let query = CString::new("java").unwrap();
            let mut out = [SfNeighbor { index: 0, score: 0.0 }; 4];
            let mut len = 0u32;
            assert_eq!(
                sf_store_top_k(handle, query.as_ptr(), 2, out.as_mut_ptr(), 4, &mut len),
                SfStatus::Ok
            );
            assert_eq!(len, 2);
            assert_eq!(
                CStr::from_ptr(sf_store_skill(handle, out[0].index))
                    .to_str()
                    .unwrap(),
                "spark"
            );
            assert!(out[0].score > out[1].score);

            sf_store_close(handle);
        }
    }

    #[test]
    fn unknown_skill_sets_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = store_file(&dir);
        unsafe {
            let handle = open(&path);
            let query = CString::new("cobol").unwrap();
            let mut out = [SfNeighbor { index: 0, score: 0.0 }; 1];
            let status =
                sf_store_top_k(handle, query.as_ptr(), 1, out.as_mut_ptr(), 1, ptr::null_mut());
            assert_eq!(status, SfStatus::UnknownSkill);
            let msg = CStr::from_ptr(sf_last_error()).to_str().unwrap();
            assert!(msg.contains("cobol"));
            sf_store_close(handle);
        }
    }

    #[test]
    fn missing_file_reports_io() {
        unsafe {
            let c_path = CString::new("/nonexistent/model.sk2v").unwrap();
            let mut handle: *mut SfStore = ptr::null_mut();
            assert_eq!(sf_store_open(c_path.as_ptr(), &mut handle), SfStatus::Io);
            assert!(handle.is_null());
        }
    }

    #[test]
    fn buffer_too_small_reports_needed_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = store_file(&dir);
        unsafe {
            let handle = open(&path);
            let query = CString::new("java").unwrap();
            let mut out = [SfNeighbor { index: 0, score: 0.0 }; 1];
            let mut len = 0u32;
            assert_eq!(
                sf_store_top_k(handle, query.as_ptr(), 2, out.as_mut_ptr(), 1, &mut len),
                SfStatus::BufferTooSmall
            );
            assert_eq!(len, 2);
            sf_store_close(handle);
        }
    }

    #[test]
    fn resolve_and_embedding() {
        let dir = tempfile::tempdir().unwrap();
        let path = store_file(&dir);
        unsafe {
            let handle = open(&path);
            let skill = CString::new("Hadoop!").unwrap();
            let mut index = u32::MAX;
            assert_eq!(
                sf_store_resolve(handle, skill.as_ptr(), &mut index),
                SfStatus::Ok
            );
            assert_eq!(index, 2);

            let mut vec = [0f32; 2];
            assert_eq!(
                sf_store_embedding(handle, index, vec.as_mut_ptr(), 2),
                SfStatus::Ok
            );
            assert_eq!(vec, [0.0, 1.0]);
            assert_eq!(
                sf_store_embedding(handle, index, vec.as_mut_ptr(), 1),
                SfStatus::BufferTooSmall
            );
            sf_store_close(handle);
        }
    }

    #[test]
    fn normalize_round_trip() {
        unsafe {
            let raw = CString::new("Object-Oriented Programming").unwrap();
            let mut buf = [0i8 as c_char; 64];
            let mut needed = 0u32;
            assert_eq!(
                sf_normalize(raw.as_ptr(), buf.as_mut_ptr(), 64, &mut needed),
                SfStatus::Ok
            );
            assert_eq!(needed, 4);
            assert_eq!(
                CStr::from_ptr(buf.as_ptr()).to_str().unwrap(),
                "oop"
            );

            let mut tiny = [0 as c_char; 2];
            assert_eq!(
                sf_normalize(raw.as_ptr(), tiny.as_mut_ptr(), 2, &mut needed),
                SfStatus::BufferTooSmall
            );
            assert_eq!(needed, 4);
        }
    }

    #[test]
    fn null_arguments_are_rejected() {
        unsafe {
            let mut handle: *mut SfStore = ptr::null_mut();
            assert_eq!(
                sf_store_open(ptr::null(), &mut handle),
                SfStatus::NullArgument
            );
            assert_eq!(sf_store_size(ptr::null()), 0);
            sf_store_close(ptr::null_mut()); // must not crash
        }
    }

    #[test]
    fn version_is_exposed() {
        unsafe {
            let v = CStr::from_ptr(sf_version()).to_str().unwrap();
            assert_eq!(v, env!("CARGO_PKG_VERSION"));
        }
    }
}
