use std::path::PathBuf;
use std::process::Command;

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/maxwell_dd.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct MddMesh MddMesh;",
        "typedef struct MddProblem MddProblem;",
        "typedef struct MddPreconditioner MddPreconditioner;",
        "MDD_STATUS_OK = 0",
        "mdd_last_error_message(void)",
        "mdd_mesh_new(",
        "mdd_problem_new(",
        "mdd_preconditioner_new(",
        "mdd_preconditioner_apply(",
        "mdd_gmres_solve(",
        "mdd_theorem_bound(",
        "mdd_fit_growth_exponent(",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else { return };
    if !cc.status.success() {
        return;
    }
    let dir = std::env::temp_dir().join(format!("maxwell-dd-header-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("use.c");
    std::fs::write(
        &src,
        "#include \"maxwell_dd.h\"\n\
         int main(void) {\n\
           MddMesh *m = 0;\n\
           MddStatus s = mdd_mesh_new(2, &m);\n\
           MddGmresOptions o = mdd_gmres_default_options();\n\
           (void)o;\n\
           mdd_mesh_free(m);\n\
           return s == MDD_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let inc = header().parent().unwrap().to_path_buf();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&inc)
        .arg(&src)
        .output()
        .unwrap();
    std::fs::remove_dir_all(&dir).ok();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
