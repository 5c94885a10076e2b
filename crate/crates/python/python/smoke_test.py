"""Smoke test for the specvol_py extension.

Builds the extension with cargo when it is not importable, then checks a few
known values.

    python3 crates/python/python/smoke_test.py
"""

import importlib
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[3]


def load():
    try:
        return importlib.import_module("specvol_py")
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "specvol-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libspecvol_py.so"
    if not lib.exists():
        lib = lib.with_suffix(".dylib")
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "specvol_py.so")
    sys.path.insert(0, str(tmp))
    return importlib.import_module("specvol_py")


def main():
    sv = load()
    mu, sigma = 0.05, 0.34
    k, t = math.log(2.0), 0.5

    p0 = sv.MarketParams(mu, sigma * sigma)
    euro = sv.OptionSpec.european_call(k, t)
    for s in (1.0, 2.0, 3.5):
        x = math.log(s)
        got = sv.price(euro, p0, x)["u0"]
        want = sv.bs_reference(t, x, k, mu, sigma)
        assert abs(got - want) < 1e-8, (s, got, want)

    p1 = p0.with_group(0.01, 0.003)
    out = sv.Pricer(euro, p1).price(math.log(2.0))
    want = sv.fps_correction(t, math.log(2.0), k, mu, sigma * sigma * t, 0.01, 0.003)
    assert abs(out["u1"] - want) < 1e-8, (out["u1"], want)
    assert abs(out["price"] - out["u0"] - out["u1"]) < 1e-12

    # knock-in + knock-out = European
    uo = sv.OptionSpec.up_and_out_call(k, math.log(2.5), 1 / 12)
    ki = sv.OptionSpec.knock_in_call(k, 1 / 12, r=math.log(2.5))
    x = math.log(2.1)
    e = sv.price(sv.OptionSpec.european_call(k, 1 / 12), p1, x)["price"]
    assert abs(sv.price(uo, p1, x)["price"] + sv.price(ki, p1, x)["price"] - e) < 1e-6

    spec = sv.OptionSpec.from_dict(uo.to_dict())
    assert spec.r == uo.r and spec.l is None

    vol = sv.implied_vol(sv.bs_reference(1.0, 0.0, 0.1, mu, 0.3), 1.0, math.exp(0.1), 1.0, mu)
    assert abs(vol - 0.3) < 1e-8

    quotes = []
    for m in (0.25, 0.5, 1.0):
        for j in range(11):
            strike = 2.0 * (0.9 + 0.02 * j)
            iv = sv.implied_vol(
                sv.price(sv.OptionSpec.european_call(math.log(strike), m), p1, math.log(2.0))["price"],
                m, strike, 2.0, mu,
            )
            quotes.append({"maturity": m, "strike": strike, "spot": 2.0, "price_or_iv": iv, "type": "iv"})
    cal = sv.calibrate(quotes, sigma * sigma, mu)
    assert abs(cal["v2_eps"] - 0.01) < 0.002, cal

    gp = sv.group_parameters({"eps": 0.1, "rho": -0.5})
    assert gp["group"]["v3_eps"] < 0

    mc = sv.simulate_price(
        sv.OptionSpec.european_call(0.0, 0.25),
        {"eps": 0.1},
        mu,
        0.0,
        {"n_paths": 4000, "seed": 3},
    )
    assert mc["std_error"] > 0 and mc["n_paths"] == 4000

    try:
        sv.MarketParams(mu, -1.0)
    except sv.SpecVolException:
        pass
    else:
        raise AssertionError("negative variance accepted")

    print("python smoke test ok")


if __name__ == "__main__":
    main()
