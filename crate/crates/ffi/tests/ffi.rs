use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use thzmap_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(thz_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn scene_trace_scale_sense_round() {
    unsafe {
        let mut scene = ptr::null_mut();
        assert_eq!(
            thz_scene_generate(100.0, 100.0, 32, 32, 2, 8.0, 25.0, 3, &mut scene),
            ThzStatus::Ok
        );
        let beams = thz_beams_default();
        let radio = thz_radio_default();
        let mut raw = ptr::null_mut();
        assert_eq!(thz_trace_all(scene, &beams, &radio, &mut raw), ThzStatus::Ok);

        let (mut r, mut c, mut d) = (0, 0, 0);
        assert_eq!(thz_tensor_dims(raw, &mut r, &mut c, &mut d), ThzStatus::Ok);
        assert_eq!((r, c, d), (32, 32, 18));

        let mut scaling = ThzScaling {
            psi_min: 0.0,
            psi_max: 0.0,
            db_floor: 0.0,
            db_ceil: 0.0,
        };
        assert_eq!(thz_scaling_for_scene(scene, &radio, &mut scaling), ThzStatus::Ok);
        let mut scaled = ptr::null_mut();
        assert_eq!(thz_scale(raw, scene, &scaling, &mut scaled), ThzStatus::Ok);

        let mut occ = vec![0u8; 1024];
        let mut sensed = vec![0u8; 1024];
        assert_eq!(thz_scene_occupancy(scene, occ.as_mut_ptr(), occ.len()), ThzStatus::Ok);
        assert_eq!(
            thz_sense_hard_vote(scaled, scaling.psi_max, sensed.as_mut_ptr(), sensed.len()),
            ThzStatus::Ok
        );
        assert_eq!(occ, sensed);
        assert!(occ.iter().any(|&v| v == 1));

        let mut soft = vec![0.0; 1024];
        assert_eq!(thz_soft_vote(scaled, scaling.psi_max, soft.as_mut_ptr(), soft.len()), ThzStatus::Ok);
        for (s, o) in soft.iter().zip(&occ) {
            assert_eq!(*s > 0.0, *o == 1);
        }

        let mut values = vec![0.0; 32 * 32 * 18];
        assert_eq!(thz_tensor_copy(raw, values.as_mut_ptr(), values.len()), ThzStatus::Ok);
        let noise = 10f64.powf(-9.0);
        assert!(values.iter().all(|&v| v >= noise));

        thz_tensor_free(scaled);
        thz_tensor_free(raw);
        thz_scene_free(scene);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut out = 0.0;
        assert_eq!(thz_exact_majority_error(3, 0.1, &mut out), ThzStatus::Ok);
        assert!((out - 0.028).abs() < 1e-12);
        assert_eq!(thz_exact_majority_error(4, 0.1, &mut out), ThzStatus::InvalidArgument);
        assert!(last_error().contains("odd"), "{}", last_error());
        assert_eq!(thz_hoeffding_bound(5, 0.7, &mut out), ThzStatus::OutOfDomain);
        assert_eq!(thz_hoeffding_bound(5, 0.1, ptr::null_mut()), ThzStatus::NullPointer);

        let cells = [0u8, 2, 0, 0];
        let mut scene = ptr::null_mut();
        assert_eq!(
            thz_scene_from_occupancy(2.0, 2.0, 2, 2, cells.as_ptr(), &mut scene),
            ThzStatus::OutOfDomain
        );
        let cells = [0u8, 1, 0, 0];
        assert_eq!(
            thz_scene_from_occupancy(2.0, 2.0, 2, 2, cells.as_ptr(), &mut scene),
            ThzStatus::Ok
        );
        let mut small = [0u8; 3];
        assert_eq!(
            thz_scene_occupancy(scene, small.as_mut_ptr(), small.len()),
            ThzStatus::BufferTooSmall
        );
        thz_scene_free(scene);
        thz_scene_free(ptr::null_mut());

        let data = [0.5; 12];
        let mut t = ptr::null_mut();
        assert_eq!(thz_tensor_new(2, 2, 3, data.as_ptr(), &mut t), ThzStatus::Ok);
        let mut hv = [9u8; 4];
        assert_eq!(thz_sense_hard_vote(t, 1.2, hv.as_mut_ptr(), 4), ThzStatus::OutOfDomain);
        thz_tensor_free(t);

        let msg = CStr::from_ptr(thz_status_message(ThzStatus::ShapeMismatch));
        assert_eq!(msg.to_str().unwrap(), "shape mismatch");
    }
}

#[test]
fn blocked_base_station_is_reported() {
    unsafe {
        let cells = [1u8; 16];
        let mut scene = ptr::null_mut();
        assert_eq!(
            thz_scene_from_occupancy(4.0, 4.0, 4, 4, cells.as_ptr(), &mut scene),
            ThzStatus::Ok
        );
        let beams = thz_beams_default();
        let radio = thz_radio_default();
        let mut raw = ptr::null_mut();
        assert_eq!(thz_trace_all(scene, &beams, &radio, &mut raw), ThzStatus::OutOfDomain);
        assert!(raw.is_null());
        thz_scene_free(scene);
    }
}

/// Compiles `tests/smoke.c` against the generated header and the static
/// library. Skipped when no C compiler is on the path.
#[test]
fn c_smoke_program() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libthzmap_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C smoke test");
        return;
    }
    let bin = profile_dir.join("thzmap_ffi_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
