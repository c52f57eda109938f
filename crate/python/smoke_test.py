"""Smoke test for the bridgenet_py extension.

Build and stage the module next to this script, then run it:

    cargo build --release -p bridgenet-python --features extension-module
    cp target/release/libbridgenet_py.so \
       python/bridgenet_py$(python3 -c 'import sysconfig; print(sysconfig.get_config_var("EXT_SUFFIX"))')
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import bridgenet_py as bn


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL: {msg}")
    print(f"ok   {msg}")


def main():
    data = bn.gen_blobs(60, 2, 2, 1.0, 1.0, 0)
    train, val, test = data.split((0.6, 0.2, 0.2), 0)
    check(len(train) + len(val) + len(test) == 120, "split partitions the data")

    arch = bn.Arch(2, 2, 8, 1)
    a, log = bn.train_mode(arch, train, 0.05, 100, 16, 1)
    b, _ = bn.train_mode(arch, train, 0.05, 100, 16, 2)
    check(len(log) == 100 and all(math.isfinite(row[2]) for row in log), "mode training log")
    again, _ = bn.train_mode(arch, train, 0.05, 100, 16, 1)
    check(again.params == a.params, "training is deterministic")

    curve, _ = bn.train_curve(bn.BezierCurve.between(a, b), train, 0.05, 100, 16, 3)
    check(curve.curve_point(0.0) == a.params and curve.curve_point(1.0) == b.params, "curve endpoints are exact")
    check(len(curve.scan(test, 5)) == 5, "curve scan")

    bridge, _ = bn.train_bridge(2, curve, train, 4, 0.05, 60, 16, 4)
    p_bridge = bridge.predict(test.x, a, b)
    check(all(abs(sum(row) - 1.0) < 1e-12 for row in p_bridge), "bridge outputs are distributions")

    members = [a, b, bridge]
    p_test = bn.ensemble_predict(members, test.x)
    p_val = bn.ensemble_predict(members, val.x)
    de2 = bn.ensemble_predict([a, b], test.x)
    de2_val = bn.ensemble_predict([a, b], val.x)
    baseline = [
        (1, bn.evaluate_calibrated(a.predict(test.x), test.y, a.predict(val.x), val.y)["nll"]),
        (2, bn.evaluate_calibrated(de2, test.y, de2_val, val.y)["nll"]),
    ]
    report = bn.evaluate_calibrated(p_test, test.y, p_val, val.y, baseline=baseline)
    check(sorted(report) == ["acc", "bs", "dee", "ece", "n", "nll", "temperature"], "report keys")
    check(report["dee"] >= 0.0, f"dee {report['dee']:.3f}")
    check(abs(bn.ensemble_flops([a, b], arch) - 2.0) < 1e-15, "DE-2 costs two networks")

    check(abs(bn.dee(0.9, [(1, 1.0), (2, 0.8), (3, 0.7)]) - 1.5) < 1e-12, "dee interpolation")
    check(abs(bn.ece([[0.9, 0.1], [0.8, 0.2]], [0, 1]) - 0.45) < 1e-15, "ece hand case")
    check(abs(bn.mean_kl([[1.0, 0.0]], [[0.5, 0.5]]) - math.log(2)) < 1e-12, "mean_kl hand case")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "a.ckpt")
        a.save(path)
        check(bn.Network.load(path).params == a.params, "checkpoint round trip")
        with open(path, "r+b") as f:
            f.write(b"XXXX")
        try:
            bn.Network.load(path)
            check(False, "corrupted checkpoint rejected")
        except ValueError as e:
            check("bad magic" in str(e), "corrupted checkpoint rejected")
    try:
        bn.train_bridge(3, curve, train, 4, 0.05, 10, 16, 0)
        check(False, "bad bridge kind rejected")
    except ValueError:
        check(True, "bad bridge kind rejected")
    print("smoke test passed")


if __name__ == "__main__":
    main()
