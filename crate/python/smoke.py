"""Smoke test for the qtwist Python bindings.

Build the module first:

    cargo build -p qtwist-py --release --features extension-module

then run `python3 python/smoke.py`. The script imports an installed
`qtwist_py` if there is one, otherwise it loads the freshly built library
from target/.
"""

import importlib.machinery
import importlib.util
import pathlib
import sys
from fractions import Fraction


def load():
    try:
        import qtwist_py

        return qtwist_py
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for profile in ("release", "debug"):
        for name in ("libqtwist_py.so", "libqtwist_py.dylib", "qtwist_py.dll"):
            path = root / "target" / profile / name
            if path.exists():
                loader = importlib.machinery.ExtensionFileLoader("qtwist_py", str(path))
                spec = importlib.util.spec_from_file_location("qtwist_py", str(path), loader=loader)
                mod = importlib.util.module_from_spec(spec)
                loader.exec_module(mod)
                sys.modules["qtwist_py"] = mod
                return mod
    sys.exit("qtwist_py not found; build it with cargo build -p qtwist-py --release --features extension-module")


def main():
    qt = load()

    # series arithmetic
    a = qt.Series([1, 1, 0])
    b = qt.Series([1, -1, 0])
    assert (a * b).coeffs() == ["1", "0", "-1"]
    assert a.inverse().coeffs() == ["1", "-1", "1"]
    assert qt.Series([0, 1, 0]).exp().coeffs() == ["1", "1", "1/2"]
    assert qt.q_int(3, 2, 2).coeffs() == ["2", "0", "1"]
    assert qt.q_binom(3, 2, 1, 2) == qt.q_int(3, 2, 2)
    try:
        qt.Series([0, 1]).inverse()
        raise AssertionError("inverse of a non-unit")
    except ZeroDivisionError:
        pass

    # Lie bialgebra data
    g = qt.LieAlgebra("sl2")
    assert g.labels == ["h", "e", "f"]
    assert g.bracket("e", "f") == {"h": "1"}
    assert g.form("e", "f") == "1"
    r = g.standard_r()
    assert sorted(r.terms()) == [(["f", "e"], "1"), (["h", "h"], "1/4")]
    assert g.cybe_residual(r).is_zero()
    assert sorted(g.cobracket("e").terms()) == [(["e", "h"], "-1/2"), (["h", "e"], "1/2")]
    assert g.mix(1).is_zero()
    r2 = g.twisted_r(2)
    assert g.cybe_residual(r2).is_zero()
    assert r2.symmetric_part() == (g.twisted_r(2) + g.mix(2)).symmetric_part()

    # rescaled form, sl3
    g3 = qt.LieAlgebra("sl3", form_scale=Fraction(1, 3))
    assert g3.dim == 8
    assert g3.cybe_residual(g3.standard_r()).is_zero()
    assert g3.cybe_residual(g3.twisted_r(2)).is_zero()

    # function algebras
    mixed = qt.bracket("mixed", "phi:1:0@0", "phi:1:1@1")["result"]
    assert mixed["blocks"], "cross-factor bracket should not vanish"
    assert mixed == qt.bracket("twisted", "phi:1:0@0", "phi:1:1@1")["result"]
    assert isinstance(qt.qmultiply("phi:1:0@0", "phi:1:1@1"), dict)
    t1 = qt.twi(1)
    assert t1["tensor"]["terms"][0]["coeff"] == ["1", "0", "0"]
    c = qt.coiso_check("H,E")
    assert c["r_membership"]["verdict"]["status"] == "true"
    assert qt.coiso_check("F")["r_membership"]["verdict"]["status"] == "false"

    # verification suites
    report = qt.run_suite(suites=["classical"])
    assert report["schema"] == qt.REPORT_SCHEMA
    assert report["summary"] == {"pass": 8, "fail": 0, "inconclusive": 0}
    report = qt.run_suite(hbar_order=2, suites=["quantum"])
    assert all(c["status"] == "pass" for c in report["checks"])
    try:
        qt.run_suite(algebra="so5")
        raise AssertionError("unknown algebra accepted")
    except ValueError:
        pass

    print("qtwist_py smoke test: ok")


if __name__ == "__main__":
    main()
