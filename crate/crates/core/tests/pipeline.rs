//! The walk → wetting chain through persisted artifacts.

use renewlab::walk::{constrained_kernel, ConstrainedKernelTensor, TensorParams, WalkModel};
use renewlab::wetting::{
    critical_spectrum, partition_table, sample_critical_contacts, CriticalSampler, PartitionTable, SpectralResult,
    SurvivalMode,
};

#[test]
fn artifacts_reload_to_the_same_results() {
    let dir = std::env::temp_dir().join(format!("renewlab-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let model = WalkModel::gaussian(1.0, 1.0).unwrap();
    let t = constrained_kernel(&model, &TensorParams::new(9, 96)).unwrap();
    t.save(&dir.join("tensor.bin")).unwrap();
    let t2 = ConstrainedKernelTensor::load(&dir.join("tensor.bin")).unwrap();

    let (bc, spec) = critical_spectrum(&t).unwrap();
    let (bc2, _) = critical_spectrum(&t2).unwrap();
    assert_eq!(bc.to_bits(), bc2.to_bits());
    spec.save(&dir.join("spectral.bin"), bc).unwrap();
    let spec2 = SpectralResult::load(&dir.join("spectral.bin")).unwrap();
    assert_eq!(spec.v, spec2.v);

    let z = partition_table(&t2, bc, 96, SurvivalMode::Renewal).unwrap();
    z.save(&dir.join("z.bin")).unwrap();
    let z2 = PartitionTable::load(&dir.join("z.bin")).unwrap();
    assert_eq!(z.z(96, 4), z2.z(96, 4));

    let s1 = CriticalSampler::new(&t, &z).unwrap();
    let s2 = CriticalSampler::new(&t2, &z2).unwrap();
    let a = sample_critical_contacts(&s1, 96, 300, 5).unwrap();
    let b = sample_critical_contacts(&s2, 96, 300, 5).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.points == y.points));
    // every path starts with a contact at 0 and stays in [0, 1]
    assert!(a.iter().all(|s| s.points[0] == 0.0 && s.points.iter().all(|&p| p <= 1.0)));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn loading_a_missing_tensor_names_the_path() {
    let err = ConstrainedKernelTensor::load(std::path::Path::new("/nonexistent/tensor.bin")).unwrap_err();
    assert!(err.to_string().contains("tensor.bin") || matches!(err, renewlab::Error::Io(_)));
}
