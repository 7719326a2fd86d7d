fn main() {
    // LAPACK routines come from the system OpenBLAS build.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
