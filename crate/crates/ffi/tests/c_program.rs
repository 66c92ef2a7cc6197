//! Compiles a small C program against the generated header and the shared
//! library, then runs it.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "brainex.h"

int main(void) {
    size_t dims[3] = {16, 16, 16};
    double spacing[3] = {1.0, 1.0, 1.0};
    float data[16 * 16 * 16];
    memset(data, 0, sizeof data);
    for (int i = 0; i < 100; i++) data[i] = 1.0f;

    BxVolume *a = NULL, *b = NULL;
    if (bx_volume_new(dims, spacing, BX_VOLUME_KIND_MASK, data, 4096, &a) != BX_STATUS_OK) return 10;
    if (bx_volume_new(dims, spacing, BX_VOLUME_KIND_MASK, NULL, 0, &b) != BX_STATUS_OK) return 11;
    double d = -1.0;
    if (bx_dice(a, a, &d) != BX_STATUS_OK || d != 1.0) return 12;
    if (bx_dice(a, b, &d) != BX_STATUS_OK || d != 0.0) return 13;

    size_t n = 0, cube[3] = {192, 192, 192};
    if (bx_plan_count(cube, 128, 64, &n) != BX_STATUS_OK || n != 8) return 14;

    BxVolume *c = NULL;
    if (bx_volume_read("/no/such/file.nii", &c) != BX_STATUS_IO) return 15;
    if (strstr(bx_last_error_message(), "/no/such/file.nii") == NULL) return 16;

    bx_volume_free(a);
    bx_volume_free(b);
    printf("ok %s\n", bx_version());
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test-binary>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libbrainex_ffi.so");
    if !lib.exists() {
        eprintln!("SKIP: {} not built on this platform", lib.display());
        return;
    }
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("SKIP: no C compiler on PATH");
        return;
    };
    assert!(cc.status.success());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.path().join("main");
    let out = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg("-o")
        .arg(&bin)
        .arg("-L")
        .arg(&profile_dir)
        .arg("-lbrainex_ffi")
        .arg(format!("-Wl,-rpath,{}", profile_dir.display()))
        .output()
        .unwrap();
    assert!(out.status.success(), "cc failed:\n{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "program exited with {:?}\n{}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
