"""Smoke test for the satops extension: maturin build, pip install the wheel, then python python/smoke_test.py"""

import tempfile
from pathlib import Path

import satops

T0 = "2021-05-10T00:00:00Z"


def checksum(line):
    return line + str(sum(int(c) if c.isdigit() else c == "-" for c in line) % 10)


ISS = "\n".join([
    "ISS (ZARYA)",
    checksum("1 25544U 98067A   21130.50000000  .00001264  00000-0  31221-4 0  999"),
    checksum("2 25544  51.6435 177.4986 0002399 321.4727 162.0458 15.4897701128296"),
]) + "\n"


def expect_error(code, fn, *args):
    try:
        fn(*args)
    except satops.SatopsError as e:
        assert e.args[0] == code, e.args
        return
    raise AssertionError(f"expected {code}")


def main():
    el = satops.Elements.from_tle(ISS)
    assert el.norad_id == 25544
    assert el.epoch.startswith("2021-05-10T12:00:00")
    passes = el.comm_passes(38.26, 140.87, T0, "2021-05-11T00:00:00Z", 5.0)
    assert passes and all(p["t_aos"] < p["t_mel"] < p["t_los"] for p in passes)
    expect_error("TLE_CHECKSUM_MISMATCH", satops.Elements.from_tle, ISS[:-2] + str((int(ISS[-2]) + 1) % 10) + "\n")

    diags = satops.lint_template("10 5 ; OK\n{nope} 5 ; BAD\n")
    assert [d["kind"] for d in diags] == ["unbound_variable"], diags

    with tempfile.TemporaryDirectory() as tmp:
        store = satops.Store(str(Path(tmp) / "ops.json"))
        store.init_demo(T0)
        assert "SAT1" in store.satellites() and "SENDAI" in store.locations()

        report = store.register_sessions(T0, 2 * 86400.0)
        comm = store.sessions(kind="comm", sat="SAT1")
        assert comm, report
        sid = comm[-1]["id"]
        assert store.set_priority(sid, 7, "smoke", T0)["priority"] == 7
        assert store.set_enabled(sid, True, "smoke", T0)["enabled"] is True
        expect_error("SESSION_IN_PAST", store.set_enabled, sid, False, "smoke", "2021-05-20T00:00:00Z")
        expect_error("NOT_FOUND", store.set_enabled, "COM-999999", True, "smoke", T0)

        text, gen = store.generate_cmd("SAT1", T0, "2021-05-13T00:00:00Z")
        again, _ = store.generate_cmd("SAT1", T0, "2021-05-13T00:00:00Z")
        assert text == again and sid in gen["sessions"]

        expect_error("WINDOW_OUT_OF_RANGE", store.create_request, T0, "umar", "hpt-standard", "TOKYO",
                     "2021-05-10T02:00:00Z", "2021-05-10T13:00:00Z")

        accepted, rejected = store.ingest_tle(ISS)
        assert accepted == [] and rejected[0][1] == "NOT_FOUND", (accepted, rejected)

        assert store.volume_report_csv(T0, "2021-05-13T00:00:00Z").startswith("GB,")

        reopened = satops.Store(str(Path(tmp) / "ops.json"))
        assert reopened.sessions(kind="comm", sat="SAT1") == store.sessions(kind="comm", sat="SAT1")

    print("smoke test ok")


if __name__ == "__main__":
    main()
