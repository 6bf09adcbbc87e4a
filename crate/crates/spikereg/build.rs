use std::path::Path;

// The netlib-backed LAPACK bindings link against `-lcblas`, but Debian ships
// the CBLAS interface inside libopenblas without a separate libcblas.so.
// Expose one via a symlink in OUT_DIR so the final link resolves.
fn main() {
    let out = std::env::var("OUT_DIR").unwrap();
    let link = Path::new(&out).join("libcblas.so");
    if !link.exists() {
        for cand in [
            "/usr/lib/x86_64-linux-gnu/libopenblas.so",
            "/usr/lib/x86_64-linux-gnu/openblas-pthread/libopenblas.so",
            "/usr/lib/libopenblas.so",
            "/usr/lib64/libopenblas.so",
        ] {
            if Path::new(cand).exists() {
                let _ = std::os::unix::fs::symlink(cand, &link);
                break;
            }
        }
    }
    println!("cargo:rustc-link-search=native={out}");
}
