import json


from fppbrw.cli import main, parse_range


def test_range_syntax():
    assert parse_range("4..8") == (4, 5, 6, 7, 8)
    assert parse_range("4,6") == (4, 6)
    assert parse_range("5") == (5,)


def test_no_args_is_usage_error(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_flag(capsys):
    assert main(["rtv", "--lambda", "0.1", "--bogus"]) == 2
    assert "unrecognized" in capsys.readouterr().err


def test_runtime_error_exit_code(tmp_path, capsys):
    assert main(["fpp", "--field", str(tmp_path / "missing.bin"), "--gamma", "1"]) == 1


def test_exponent_csv_golden_header_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["exponent", "--gamma", "1.0", "--n", "3..5", "--reps", "8", "--seed", "7", "--bootstrap", "50"]
    assert main(args + ["--csv", str(a), "--json", str(tmp_path / "a.json")]) == 0
    assert main(args + ["--csv", str(b), "--json", str(tmp_path / "b.json"), "--workers", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "n,N,reps,mean_d,stderr_d,mom_d,mean_min_row,row_violations"
    assert len(lines) == 4


def test_rtv_csv(tmp_path, capsys):
    assert main(["rtv", "--lambda", "0.1,0.5", "--grid", "2000", "--reps", "5", "--seed", "1"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "lambda,mean_phi,stderr,mean_k"
    assert len(out) == 3 and out[1].startswith("0.1,")


def test_sample_and_fpp(tmp_path, capsys):
    f = tmp_path / "f.bin"
    assert main(["sample-field", "--kind", "brw", "--n", "4", "--seed", "9", "--out", str(f)]) == 0
    assert main(["fpp", "--field", str(f), "--gamma", "1.0", "--json"]) == 0
    first = capsys.readouterr().out
    rec = json.loads(first)
    assert list(rec) == ["weight", "path_length", "n", "seed"]
    assert rec["n"] == 4 and rec["seed"] == 9 and rec["path_length"] >= 16
    assert main(["fpp", "--field", str(f), "--gamma", "1.0", "--json"]) == 0
    assert capsys.readouterr().out == first


def test_construct_json(tmp_path):
    p = tmp_path / "c.json"
    assert main(["construct", "--n", "3", "--gamma", "1.0", "--seed", "4", "--json", str(p)]) == 0
    rec = json.loads(p.read_text())
    assert [lv["level"] for lv in rec["levels"]] == [0, 1, 2, 3]
    assert set(rec["levels"][1]) == {"level", "case", "d_total", "ratio", "switches", "valid"}
    assert all(lv["valid"] for lv in rec["levels"])
    q = tmp_path / "d.json"
    main(["construct", "--n", "3", "--gamma", "1.0", "--seed", "4", "--json", str(q)])
    assert p.read_bytes() == q.read_bytes()


def test_construct_paper_defaults(capsys):
    assert main(["construct", "--n", "2", "--gamma", "1.0", "--paper-defaults"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["delta_exp"] == 100 and rec["cutoff"] == 60


def test_checks(capsys):
    assert main(["check-cov", "--n", "2", "--brw-n", "3"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["lemma1"]["pass"] and rec["brw"]["pass"]
    assert main(["check-toy", "--reps", "20000", "--seed", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["reps"] == 20000
