#!/usr/bin/env python3
"""Smoke test for the shmdetect_py extension module.

Builds nothing itself: expects `cargo build --release -p shmdetect-python`
(or a debug build) to have produced libshmdetect_py.so, which is copied next
to a temp dir and imported. Exercises framing, the closed-form VAE math, the
simulator, FDD peak picking and the one-class SVM end to end.
"""

import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def import_extension():
    candidates = [
        ROOT / "target" / "release" / "libshmdetect_py.so",
        ROOT / "target" / "debug" / "libshmdetect_py.so",
    ]
    for built in candidates:
        if built.exists():
            staging = pathlib.Path(tempfile.mkdtemp(prefix="shmdetect_py_"))
            shutil.copy(built, staging / "shmdetect_py.so")
            sys.path.insert(0, str(staging))
            import shmdetect_py

            return shmdetect_py
    sys.exit(
        "extension not built; run `cargo build --release -p shmdetect-python` first"
    )


def main():
    sd = import_extension()

    # Framing contract.
    assert len(sd.window([0.0] * 24000, 128)) == 187
    assert len(sd.window([0.0] * 60000, 128)) == 468
    assert len(sd.window([0.0] * 72000, 128)) == 562
    assert sd.window([0.0] * 127, 128) == []
    print("ok: framing counts 187/468/562")

    # Closed-form VAE math.
    assert abs(sd.kl_to_standard_normal([0.0], [0.0])) < 1e-12
    assert abs(sd.kl_to_standard_normal([1.0], [0.0]) - 0.5) < 1e-12
    expected = 0.5 * (2.0 - math.log(2.0) - 1.0)
    assert abs(sd.kl_to_standard_normal([0.0], [math.log(2.0)]) - expected) < 1e-12
    z = sd.reparameterize([0.5], [2.0 * math.log(0.1)], [2.0])
    assert abs(z[0] - 0.7) < 1e-12
    print("ok: KL and reparameterization closed forms")

    # Features.
    assert sd.mse_feature([1.0, 2.0, 3.0], [1.0, 2.0, 5.0]) == 4.0 / 3.0
    assert abs(sd.orsr_feature([10.0, 0.0], [1.0, 3.0]) - 10.0) < 1e-12
    assert sd.pod(2, 38) == 100.0 * 2 / 38
    print("ok: MSE/ORSR/PoD")

    # Analytic modes: uniform 2-DOF chain has omega^2 = (3 +/- sqrt(5))/2.
    modes = sd.analytic_modes([1.0, 1.0], [1.0, 1.0], 0.0)
    want = [math.sqrt((3 - math.sqrt(5)) / 2) / (2 * math.pi),
            math.sqrt((3 + math.sqrt(5)) / 2) / (2 * math.pi)]
    for (freq, shape), expected_freq in zip(modes, want):
        assert abs(freq - expected_freq) < 1e-12
        assert max(abs(v) for v in shape) == 1.0
    print("ok: analytic modes match the closed form")

    # Deterministic band-limited noise.
    a = sd.bandlimited_noise(10.0, 200.0, 5.0, 50.0, 42)
    b = sd.bandlimited_noise(10.0, 200.0, 5.0, 50.0, 42)
    assert a == b and len(a) == 2000
    print("ok: seeded noise is reproducible")

    # Simulate a 4-story frame and pick its first mode with FDD.
    masses = [1000.0, 1000.0, 1000.0, 750.0]
    stiffness = [2.4e7] * 4
    channels = sd.simulate(masses, stiffness, [1.0] * 4, 0.0015,
                           60.0, 200.0, 5.0, 50.0, 3, 4)
    assert len(channels) == 4 and len(channels[0]) == 12000
    picked = sd.fdd_modes(channels, 200.0, 1024, 0.5, 5.0, 50.0, 6.0)
    f1 = sd.analytic_modes(masses, stiffness, 0.0015)[0][0]
    assert picked and abs(picked[0] - f1) / f1 < 0.02, (picked, f1)
    print(f"ok: FDD picks the first mode at {picked[0]:.2f} Hz (analytic {f1:.2f})")

    # One-class SVM: the cluster center is an inlier, a far point is not.
    import random

    rng = random.Random(5)
    cloud = [[rng.gauss(0.0, 1.0), rng.gauss(0.0, 1.0)] for _ in range(60)]
    svm = sd.OneClassSvm(cloud, nu=0.1)
    assert svm.is_inlier([0.0, 0.0])
    assert not svm.is_inlier([50.0, 50.0])
    assert svm.rho > 0.0 and svm.support_vector_count >= 1
    outliers = sum(not svm.is_inlier(p) for p in cloud)
    assert outliers / len(cloud) <= 0.1 + 1.0 / len(cloud)
    print(f"ok: one-class SVM ({svm.support_vector_count} support vectors, "
          f"{outliers} training outliers)")

    # Train a small VAE on smooth frames and check the reconstruction path.
    frames = []
    for i in range(80):
        phase = rng.uniform(0.0, 2.0 * math.pi)
        frames.append([0.5 + 0.35 * math.sin(2.0 * math.pi * 3.0 * t / 16.0 + phase)
                       for t in range(16)])
    vae = sd.Vae(frames, latent_dim=4, hidden_neurons=16, max_epochs=150, seed=1)
    recon = vae.reconstruct(frames[0])
    assert len(recon) == 16 and all(0.0 < v < 1.0 for v in recon)
    assert recon == vae.reconstruct(frames[0])
    mse, orsr = vae.features(frames[0])
    mean = [sum(f[t] for f in frames) / len(frames) for t in range(16)]
    baseline = sum((frames[0][t] - mean[t]) ** 2 for t in range(16)) / 16.0
    assert mse < baseline, (mse, baseline)
    mu, log_var = vae.encode(frames[0])
    assert len(mu) == 4 and len(log_var) == 4 and vae.latent_dim == 4
    print(f"ok: VAE reconstructs (mse {mse:.5f} < mean-predictor {baseline:.5f}, "
          f"orsr {orsr:+.3f} dB)")

    print("smoke test passed")


if __name__ == "__main__":
    main()
