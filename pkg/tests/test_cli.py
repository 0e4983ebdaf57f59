import json

import numpy as np
import pytest

from qlsid import io as qio
from qlsid.cli import PROFILE_ENV, main, resolve_profile
from qlsid.dup import flat, random_symplectic
from qlsid.model import QlsParams, StateSpace, params_from_state_space


def write(path, doc):
    path.write_text(qio.dumps(doc))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


@pytest.fixture
def files(tmp_path, cavity, squeezed_cavity, squeezed_input):
    detuned = QlsParams.cavity(1.0, 1.0)
    dpa = QlsParams(np.zeros((1, 1)), np.array([[0.2]]), np.eye(1), np.zeros((1, 1)))
    return {
        "passive": write(tmp_path / "passive.json", qio.system_to_json(params_from_state_space(cavity))),
        "squeezed": write(tmp_path / "squeezed.json", qio.system_to_json(detuned, squeezed_input)),
        "reduced": write(tmp_path / "reduced.json", qio.system_to_json(params_from_state_space(squeezed_cavity))),
        "dpa": write(tmp_path / "dpa.json", qio.system_to_json(dpa)),
        "dir": tmp_path,
    }


def test_analyze_passive_and_squeezed(files, capsys):
    code, out = run(["analyze", files["passive"]], capsys)
    assert code == 0
    report = json.loads(out.out)
    assert report["globally_minimal"]["verdict"] is False
    assert report["passive"] is True and report["hurwitz"] is True
    assert report["realizability_residual"] <= 1e-12

    code, out = run(["analyze", files["squeezed"]], capsys)
    report = json.loads(out.out)
    assert code == 0 and report["input_reduced"]
    gm = report["globally_minimal"]
    assert gm["verdict"] and gm["by_covariance"] and gm["by_controllability"] and gm["by_observability"]
    assert report["min_eig_p"] > 0


def test_analyze_rejects_malformed_files(files, capsys, caplog):
    doc = json.loads(open(files["passive"]).read())
    doc["omega_minus"] = [[[0.0, 1.0]]]
    bad = write(files["dir"] / "bad.json", doc)
    code, out = run(["analyze", bad], capsys)
    assert code == 2 and "Hermitian" in caplog.text
    (files["dir"] / "junk.json").write_text("{not json")
    assert main(["analyze", str(files["dir"] / "junk.json")]) == 2
    assert main(["analyze", str(files["dir"] / "missing.json")]) == 2


def test_spectrum_of_passive_cavity_is_vacuum(files, capsys):
    code, out = run(["spectrum", files["passive"], "--points", "101"], capsys)
    lines = out.out.strip().splitlines()
    assert code == 0 and len(lines) == 102
    vals = np.array([[float(x) for x in ln.split(",")[1:]] for ln in lines[1:]])
    expect = np.array([1, 0, 0, 0, 0, 0, 0, 0], dtype=float)
    assert np.all(vals == expect)


def test_spectrum_csv_is_invariant_under_symplectic_change(files, squeezed_cavity, capsys):
    t = random_symplectic(1, np.random.default_rng(9), 0.4)
    conj = StateSpace(t @ squeezed_cavity.a @ np.linalg.inv(t), squeezed_cavity.c @ flat(t))
    other = write(files["dir"] / "conj.json", qio.system_to_json(params_from_state_space(conj)))
    args = ["--omega-min", "0.01", "--omega-max", "10", "--points", "41"]
    _, a = run(["spectrum", files["reduced"], *args], capsys)
    _, b = run(["spectrum", other, *args], capsys)
    assert a.out == b.out
    _, a = run(["transfer", files["reduced"], *args, "--linear"], capsys)
    _, b = run(["transfer", other, *args, "--linear"], capsys)
    assert a.out == b.out


def test_identify_exit_codes(files, capsys):
    out_path = files["dir"] / "ident.json"
    code, _ = run(["identify", files["squeezed"], "-o", str(out_path)], capsys)
    assert code == 0
    doc = json.loads(out_path.read_text())
    assert doc["diagnostics"]["residuals"]["transfer_distance"] <= 1e-7
    assert "input" in doc
    assert run(["identify", files["passive"]], capsys)[0] == 3
    assert run(["identify", files["dpa"]], capsys)[0] == 4
    assert run(["identify", files["squeezed"], "--order", "8"], capsys)[0] == 5


def test_identify_from_realization_and_dataset(files, capsys):
    real = files["dir"] / "real.json"
    gil = files["dir"] / "gil.json"
    data = files["dir"] / "data.json"
    assert main(["realize", files["squeezed"], "-o", str(real)]) == 0
    assert main(["realize", files["squeezed"], "--gilbert", "-o", str(gil)]) == 0
    assert main(["synthesize", files["reduced"], "--points", "60", "-o", str(data)]) == 0
    for path in (real, gil, data):
        code, _ = run(["identify", str(path)], capsys)
        assert code == 0


def test_equiv(files, squeezed_cavity, rng, capsys):
    t = random_symplectic(1, rng, 0.5)
    conj = StateSpace(t @ squeezed_cavity.a @ np.linalg.inv(t), squeezed_cavity.c @ flat(t))
    other = write(files["dir"] / "conj.json", qio.system_to_json(params_from_state_space(conj)))
    code, out = run(["equiv", files["reduced"], other], capsys)
    report = json.loads(out.out)
    assert code == 0 and report["equivalent"]
    found = qio.decode_matrix(report["t"], "t")
    assert np.allclose(found @ squeezed_cavity.a @ np.linalg.inv(found), conj.a, atol=1e-8)

    a, b = files["dir"] / "a.json", files["dir"] / "b.json"
    main(["random", "-n", "2", "-m", "1", "--seed", "1", "-o", str(a)])
    main(["random", "-n", "2", "-m", "1", "--seed", "2", "-o", str(b)])
    code, out = run(["equiv", str(a), str(b)], capsys)
    assert code == 0 and json.loads(out.out)["equivalent"] is False


def test_random_is_reproducible(capsys):
    argv = ["random", "-n", "2", "-m", "2", "--seed", "5", "--globally-minimal", "--generic"]
    _, a = run(argv, capsys)
    _, b = run(argv, capsys)
    assert a.out == b.out
    params, _ = qio.system_from_json(json.loads(a.out))
    assert params.modes == 2 and params.channels == 2


def test_tolerance_profiles(monkeypatch, files, capsys):
    assert resolve_profile("strict").transfer < resolve_profile("loose").transfer
    monkeypatch.setenv(PROFILE_ENV, "loose")
    assert resolve_profile() == resolve_profile("loose")
    monkeypatch.setenv(PROFILE_ENV, "nonsense")
    assert main(["analyze", files["passive"]]) == 2
    monkeypatch.delenv(PROFILE_ENV)
    assert main(["--profile", "strict", "identify", files["squeezed"]]) == 0
    assert main(["analyze", files["passive"], "--tol-gmin", "-1"]) == 2


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["bogus"])
    assert info.value.code == 2
