use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use dtk_ffi::*;

fn parse(text: &str) -> *mut DtkTree {
    let c = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { dtk_tree_parse(c.as_ptr(), &mut out) }, DtkStatus::Ok);
    out
}

fn model(dim: usize, lambda: f64, seed: u64) -> *mut DtkModel {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { dtk_model_new(dim, lambda, DtkComposition::Conv, seed, &mut out) }, DtkStatus::Ok);
    out
}

fn encode(m: *const DtkModel, t: *const DtkTree) -> *mut DtkVector {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { dtk_distributed_tree(m, t, &mut out) }, DtkStatus::Ok);
    out
}

fn last_error() -> Option<String> {
    let p = dtk_last_error_message();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

#[test]
fn round_trip_matches_the_rust_api() {
    let m = model(1024, 0.4, 42);
    let a = parse("(S (A a) (B b))");
    let b = parse("(S (A a) (B c))");
    let (va, vb) = (encode(m, a), encode(m, b));
    unsafe {
        assert_eq!(dtk_tree_node_count(a), 5);
        assert_eq!(dtk_vector_dim(va), 1024);
        let mut k = 0.0;
        assert_eq!(dtk_kernel(va, vb, &mut k), DtkStatus::Ok);

        let enc = dtk::Encoder::new(dtk::CompositionKind::ShuffledConvolution, 1024, 42, 0.4).unwrap();
        let ta = dtk::parse_tree("(S (A a) (B b))").unwrap();
        let tb = dtk::parse_tree("(S (A a) (B c))").unwrap();
        let expected = dtk::dtk(&enc.encode(&ta).unwrap(), &enc.encode(&tb).unwrap()).unwrap();
        assert_eq!(k, expected);

        let mut buf = vec![0.0; 1024];
        assert_eq!(dtk_vector_copy(va, buf.as_mut_ptr(), buf.len()), DtkStatus::Ok);
        assert_eq!(buf, enc.encode(&ta).unwrap().vector.into_vec());

        let mut tk = 0.0;
        assert_eq!(dtk_tree_kernel(a, a, 1.0, &mut tk), DtkStatus::Ok);
        assert_eq!(tk, 6.0);

        let mut n = 0.0;
        assert_eq!(dtk_kernel_normalized(va, va, &mut n), DtkStatus::Ok);
        assert!((n - 1.0).abs() < 1e-12);

        for v in [va, vb] {
            dtk_vector_free(v);
        }
        dtk_tree_free(a);
        dtk_tree_free(b);
        dtk_model_free(m);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(dtk_model_new(64, 0.0, DtkComposition::Conv, 1, &mut m), DtkStatus::InvalidConfig);
        assert!(last_error().unwrap().contains("lambda"));
        assert_eq!(dtk_model_new(0, 0.4, DtkComposition::Prod, 1, &mut m), DtkStatus::InvalidConfig);
        assert_eq!(dtk_model_new(64, 0.4, DtkComposition::Conv, 1, ptr::null_mut()), DtkStatus::NullPointer);

        let bad = CString::new("(A a").unwrap();
        let mut t = ptr::null_mut();
        assert_eq!(dtk_tree_parse(bad.as_ptr(), &mut t), DtkStatus::ParseError);
        assert!(t.is_null());
        assert!(last_error().is_some());
        assert_eq!(dtk_tree_parse(ptr::null(), &mut t), DtkStatus::NullPointer);

        let invalid_utf8 = [0x28u8, 0xff, 0x29, 0];
        assert_eq!(dtk_tree_parse(invalid_utf8.as_ptr().cast(), &mut t), DtkStatus::InvalidUtf8);

        // A successful call clears the previous message.
        let a = parse("(A a)");
        assert!(last_error().is_none());

        // Vectors from different configurations are not comparable.
        let (m1, m2) = (model(64, 0.4, 1), model(64, 0.4, 2));
        let (v1, v2) = (encode(m1, a), encode(m2, a));
        let mut k = 0.0;
        assert_eq!(dtk_kernel(v1, v2, &mut k), DtkStatus::ProvenanceMismatch);
        assert_eq!(dtk_kernel(v1, ptr::null(), &mut k), DtkStatus::NullPointer);

        let mut small = [0.0; 8];
        assert_eq!(dtk_vector_copy(v1, small.as_mut_ptr(), small.len()), DtkStatus::BufferTooSmall);

        let leaf = parse("X");
        let vl = encode(m1, leaf);
        assert_eq!(dtk_kernel_normalized(vl, v1, &mut k), DtkStatus::ZeroSelfKernel);

        assert_eq!(dtk_tree_node_count(ptr::null()), 0);
        assert_eq!(dtk_vector_dim(ptr::null()), 0);
        dtk_vector_free(ptr::null_mut());
        dtk_tree_free(ptr::null_mut());
        dtk_model_free(ptr::null_mut());

        for v in [v1, v2, vl] {
            dtk_vector_free(v);
        }
        dtk_tree_free(a);
        dtk_tree_free(leaf);
        dtk_model_free(m1);
        dtk_model_free(m2);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(dtk_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles a C program against the generated header and links it with the
/// static library built alongside this test.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(|deps| deps.parent()).unwrap().to_path_buf();
    let lib = lib_dir.join("libdtk_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());

    let out_dir = tempfile_dir();
    let bin = out_dir.join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler named cc");
    assert!(status.success(), "C compilation failed");

    let run = Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("nodes=9 dim=1024"), "{stdout}");
    let _ = std::fs::remove_dir_all(out_dir);
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dtk-ffi-c-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
