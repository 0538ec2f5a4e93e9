"""Regenerate the committed CLI inputs in ``tests/data`` and expected reports in ``tests/golden``.

Run ``python tests/make_fixtures.py`` from the repository root after an
intentional change in report content; review the diff before committing.
"""
from __future__ import annotations

import contextlib
import io
import os
import sys
from pathlib import Path

import numpy as np

from qdf import fileio
from qdf.cli import main
from qdf.ensembles import PAULI_I, PAULI_X, PAULI_Z, amplitude_damping, depolarizing, random_channel, random_unitary

HERE = Path(__file__).resolve().parent
DATA = HERE / "data"
GOLDEN = HERE / "golden"

CASES = [
    ("analyze_identity", ["analyze", "--channel", "identity.json"], 0),
    ("analyze_depolarizing", ["analyze", "--channel", "depolarizing.json"], 0),
    ("analyze_bad_choi", ["analyze", "--channel", "bad_choi.json"], 1),
    ("dilate_ad_pure", ["dilate", "--channel", "amp_damp.json", "--env", "env_pure2.json"], 0),
    ("dilate_ad_subsystem", ["dilate", "--channel", "amp_damp.json", "--env", "env_mixed4.json",
                             "--mode", "subsystem", "--m", "2"], 0),
    ("dilate_random_stinespring", ["dilate", "--channel", "random_channel.json", "--env", "env_pure4.json",
                                   "--mode", "stinespring"], 0),
    ("design_stochastic_ok", ["design", "stochastic", "--spec", "dephasing_spec.json", "--env", "env_09.json"], 0),
    ("design_stochastic_bad", ["design", "stochastic", "--spec", "dephasing_spec.json", "--env", "env_06.json"], 2),
    ("design_convex_ok", ["design", "convex", "--spec", "convex_spec.json", "--env", "env_convex8.json"], 0),
    ("design_convex_i8", ["design", "convex", "--spec", "convex_spec.json", "--env", "env_i8.json"], 2),
    ("decompose_depolarizing", ["decompose", "extreme", "--channel", "depolarizing.json"], 0),
    ("realize_depolarizing", ["realize", "average", "--channel", "depolarizing.json", "--env", "env_pure2.json"], 0),
    ("protocol_lv2", ["protocol", "lv2", "--config", "amp_damp.json", "--cycles", "256"], 0),
    ("protocol_lv3", ["protocol", "lv3", "--config", "pauli3.json", "--cycles", "256"], 0),
    ("protocol_fbdd_ok", ["protocol", "fbdd", "--config", "fbdd_ok.json"], 0),
    ("protocol_fbdd_bad", ["protocol", "fbdd", "--config", "fbdd_bad.json"], 2),
    ("protocol_fbdd_override", ["protocol", "fbdd", "--config", "fbdd_bad.json", "--override"], 0),
    ("protocol_split", ["protocol", "split", "--config", "split_5_2.json", "--seed", "3"], 0),
    ("optimize_ad", ["optimize", "--problem", "problem_2q.json", "--target", "amp_damp.json",
                     "--iters", "200", "--restarts", "2"], 0),
]


def _herm(rng, n):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (g + g.conj().T) / 2


def write_inputs() -> None:
    DATA.mkdir(exist_ok=True)
    rng = np.random.default_rng(20240601)

    def cplx(v):
        if isinstance(v, np.ndarray):
            return v.astype(np.complex128)
        if isinstance(v, dict):
            return {k: cplx(x) for k, x in v.items()}
        if isinstance(v, list):
            return [cplx(x) for x in v]
        return v

    def put(name, doc):
        (DATA / name).write_text(fileio.emit(cplx(doc)))

    put("identity.json", fileio.channel_document(amplitude_damping(0.0)))
    put("amp_damp.json", fileio.channel_document(amplitude_damping(0.36)))
    put("depolarizing.json", fileio.channel_document(depolarizing(0.5)))
    put("random_channel.json", fileio.channel_document(random_channel(2, 4, rng)))
    put("pauli3.json", fileio.channel_document(
        amplitude_damping(0.0).__class__.from_kraus([np.sqrt(0.5) * PAULI_I, np.sqrt(0.3) * PAULI_X, np.sqrt(0.2) * PAULI_Z])))
    bad = depolarizing(0.5).choi * 0.98
    put("bad_choi.json", {"kind": "choi", "dim": 2, "matrix": bad})
    put("env_pure2.json", fileio.state_document(np.diag([1.0, 0.0])))
    put("env_pure4.json", fileio.state_document(np.diag([1.0, 0.0, 0.0, 0.0])))
    put("env_mixed4.json", fileio.state_document(np.diag([0.97, 0.03, 0.0, 0.0])))
    put("env_09.json", fileio.state_document(np.diag([0.9, 0.1])))
    put("env_06.json", fileio.state_document(np.diag([0.6, 0.4])))
    put("env_i8.json", fileio.state_document(np.eye(8) / 8))
    put("env_convex8.json", fileio.state_document(np.diag([0.6, 0.4, 0, 0, 0, 0, 0, 0])))
    put("dephasing_spec.json", {"kind": "stochastic-spec", "unitaries": [PAULI_I, PAULI_Z], "weights": [0.7, 0.3]})
    t1, t2 = random_channel(2, 2, rng), random_channel(2, 2, rng)
    put("convex_spec.json", {"kind": "convex-spec", "components": [
        {"weight": 0.6, "ops": list(t1.kraus)}, {"weight": 0.4, "ops": list(t2.kraus)}]})
    b0, hb = _herm(rng, 4), _herm(rng, 4)
    psi = rng.normal(size=2) + 1j * rng.normal(size=2)
    psi /= np.linalg.norm(psi)
    rho_b = random_unitary(4, rng)
    rho_b = rho_b @ np.diag([0.4, 0.3, 0.2, 0.1]) @ rho_b.conj().T
    common = {"kind": "fbdd-config", "d_S": 2, "d_B": 4, "H_B": hb, "B0": b0, "T": 3.7,
              "psi": psi, "rho_B": rho_b}
    put("fbdd_ok.json", dict(common, H_S=0.4 * PAULI_Z, S0=PAULI_Z))
    put("fbdd_bad.json", dict(common, H_S=np.diag([0.4, 0.0]), S0=np.diag([1.0, 0.0])))
    u = random_unitary(5, rng)
    put("split_5_2.json", {"kind": "split-config", "d_S": 5, "projector": u[:, :2] @ u[:, :2].conj().T})
    put("problem_2q.json", {"kind": "problem", "d_S": 2, "d_E": 2, "controls": "full", "T": 1.0,
                            "n_steps": 16, "rho_E": np.diag([1.0, 0.0]).astype(complex)})


def run_case(argv) -> tuple[int, str]:
    """Run one CLI case from inside ``tests/data`` and return (code, report text)."""
    out = io.StringIO()
    old = os.getcwd()
    os.chdir(DATA)
    try:
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(io.StringIO()):
            code = main(list(argv) + ["--json"])
    finally:
        os.chdir(old)
    return code, out.getvalue()


def write_golden() -> None:
    GOLDEN.mkdir(exist_ok=True)
    for name, argv, expect in CASES:
        code, text = run_case(argv)
        if code != expect:
            raise SystemExit(f"{name}: exit {code}, expected {expect}\n{text}")
        (GOLDEN / f"{name}.json").write_text(text)
        print(f"{name}: exit {code}")


if __name__ == "__main__":
    if "--golden-only" not in sys.argv:
        write_inputs()
    write_golden()
