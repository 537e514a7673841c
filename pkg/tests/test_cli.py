import csv
import json

import pytest
from hypothesis import given, strategies as st

from hfl import fixtures
from hfl.cli import main
from hfl.expanders import random_regular
from hfl.io import action_to_dict, group_to_dict
from hfl.runner import (ConfigError, ExperimentConfig, canonical_json, emit_csv, exit_code,
                        persist, run)


@pytest.fixture
def files(tmp_path):
    out = {}
    for name in ("z-translation", "non-isometric", "quarter-turn"):
        act = fixtures.FIXTURES[name]()
        g = tmp_path / f"{name}.group.json"
        a = tmp_path / f"{name}.action.json"
        g.write_text(json.dumps(group_to_dict(act.group)))
        a.write_text(json.dumps(action_to_dict(act)))
        out[name] = (str(g), str(a))
    graph = tmp_path / "graph.txt"
    graph.write_text(random_regular(50, 4, seed=1000, min_girth=6).to_edge_list())
    out["graph"] = str(graph)
    klein = tmp_path / "klein.json"
    klein.write_text(json.dumps({"type": "finite", "order": 4,
                                 "table": [[i ^ j for j in range(4)] for i in range(4)],
                                 "generators": [1, 2, 3]}))
    out["klein"] = str(klein)
    return out


def flow_config(files, tmp_path, **params):
    g, a = files["z-translation"]
    return ExperimentConfig("flow", {"group": g, "action": a}, params, 0, str(tmp_path / "out"))


class TestConfig:
    @given(st.sampled_from(["flow", "suite", "graph-gen"]),
           st.dictionaries(st.sampled_from(["radius", "n", "tol"]), st.integers(0, 9)),
           st.integers(0, 2**32), st.integers(1, 8))
    def test_roundtrip(self, kind, params, seed, jobs):
        cfg = ExperimentConfig(kind, {}, params, seed, "out", jobs)
        again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            ExperimentConfig("nope").validate()

    def test_missing_input(self, tmp_path):
        cfg = ExperimentConfig("graph-stats", {"graph": str(tmp_path / "none.txt")})
        with pytest.raises(FileNotFoundError):
            cfg.validate()
        with pytest.raises(ConfigError):
            ExperimentConfig("graph-stats", {}).validate()

    def test_bad_parameter(self, files, tmp_path):
        with pytest.raises(ConfigError):
            flow_config(files, tmp_path, radius=-1).validate()

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"kind": "flow", "extra": 1})

    def test_exit_codes(self):
        assert exit_code(FileNotFoundError()) == 2
        assert exit_code(ConfigError()) == 2
        assert exit_code(RuntimeError()) == 1


class TestRun:
    def test_translation_flow(self, files, tmp_path):
        rep = run(flow_config(files, tmp_path, max_n=10))
        assert rep["verdicts"]["stability"]["kind"] == "Harmonic"
        assert rep["verdicts"]["stability"]["radius"] == 4
        for n, En, ratio in rep["tables"]["energy_growth"]["rows"]:
            assert abs(En - n / 2) <= 1e-9 and abs(ratio - n) <= 1e-9

    def test_deterministic(self, files, tmp_path):
        cfg = ExperimentConfig("gmodel-fit-mixture", {"graph": files["graph"]},
                               {"n": 2, "samples": 40}, 3, str(tmp_path))
        assert canonical_json(run(cfg)) == canonical_json(run(cfg))

    def test_jobs_do_not_change_report(self, files, tmp_path):
        base = {"n": 2, "samples": 40}
        r1 = run(ExperimentConfig("gmodel-concentration", {"graph": files["graph"]}, base, 1, "o", 1))
        r4 = run(ExperimentConfig("gmodel-concentration", {"graph": files["graph"]}, base, 1, "o", 4))
        assert canonical_json(r1) == canonical_json(r4)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            canonical_json({"x": float("inf")})

    def test_criterion_check(self, files, tmp_path):
        cfg = ExperimentConfig("criterion-check", {"group": files["klein"]}, {"C": 1.0}, 0, "o")
        v = run(cfg)["verdicts"]["fixed_point_certified"]
        assert v["certified"] and v["kappa2"] == pytest.approx((2 / 3) ** 0.5)


class TestCsv:
    def test_flow_trace_schema(self, files, tmp_path):
        g, a = files["non-isometric"]
        rep = run(ExperimentConfig("flow", {"group": g, "action": a}, {"radius": 2, "cap": 20}))
        path = emit_csv(rep, "flow_trace", tmp_path / "t.csv")
        raw = path.read_bytes()
        assert raw.startswith(b"i,delta_e,ball_max\r\n")
        rows = list(csv.reader(path.open(newline="")))
        assert len(rows) == len(rep["tables"]["flow_trace"]["rows"]) + 1
        # 17 significant digits round-trip every float exactly
        for row, orig in zip(rows[1:], rep["tables"]["flow_trace"]["rows"]):
            assert [float(x) for x in row[1:]] == orig[1:]

    def test_mixture_schema(self, files, tmp_path):
        rep = run(ExperimentConfig("gmodel-fit-mixture", {"graph": files["graph"]},
                                   {"n": 1, "samples": 20}))
        path = emit_csv(rep, "mixture", tmp_path / "m.csv")
        assert path.read_text().splitlines()[0] == "l,w_l"

    def test_energy_growth_schema(self, files, tmp_path):
        rep = run(flow_config(files, tmp_path, max_n=3))
        path = emit_csv(rep, "energy_growth", tmp_path / "e.csv")
        assert path.read_text().splitlines()[0] == "n,E_n,E_n_over_E"

    def test_unknown_table(self, files, tmp_path):
        with pytest.raises(KeyError):
            emit_csv(run(flow_config(files, tmp_path)), "nope", tmp_path / "x.csv")


class TestPersist:
    def test_named_by_hash_and_append_only(self, files, tmp_path, monkeypatch):
        monkeypatch.delenv("HFL_CACHE_DIR", raising=False)
        cfg = flow_config(files, tmp_path)
        path, rep, cached = persist(cfg)
        assert not cached and path.name == f"report-flow-{cfg.content_hash()}.json"
        mtime = path.stat().st_mtime_ns
        path2, _, _ = persist(cfg)
        assert path2 == path and path.stat().st_mtime_ns == mtime
        assert (path.parent / f"{path.stem}-flow_trace.csv").is_file()

    def test_hash_ignores_out_dir_and_jobs(self, files, tmp_path):
        a = flow_config(files, tmp_path)
        b = flow_config(files, tmp_path / "elsewhere")
        b.jobs = 3
        assert a.content_hash() == b.content_hash()
        assert a.content_hash() != flow_config(files, tmp_path, radius=2).content_hash()

    def test_cache(self, files, tmp_path, monkeypatch):
        monkeypatch.setenv("HFL_CACHE_DIR", str(tmp_path / "cache"))
        cfg = flow_config(files, tmp_path)
        _, rep1, cached1 = persist(cfg)
        cfg.out_dir = str(tmp_path / "second")
        path, rep2, cached2 = persist(cfg)
        assert not cached1 and cached2 and rep1 == rep2
        assert path.is_file()


class TestCli:
    def test_flow_run(self, files, tmp_path, capsys):
        g, a = files["z-translation"]
        rc = main(["--out", str(tmp_path / "o"), "flow", "run", "--group", g, "--action", a,
                   "--max-n", "4"])
        assert rc == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["verdicts"]["stability"]["kind"] == "Harmonic"

    def test_global_flags_after_subcommand(self, files, tmp_path, capsys):
        rc = main(["graph", "stats", "--graph", files["graph"], "--out", str(tmp_path / "o"),
                   "--seed", "4"])
        assert rc == 0
        assert json.loads(capsys.readouterr().out)["config"]["seed"] == 4

    def test_missing_file_exit_2_no_output(self, tmp_path, capsys):
        out = tmp_path / "o"
        rc = main(["--out", str(out), "graph", "stats", "--graph", str(tmp_path / "missing.txt")])
        assert rc == 2 and not out.exists()
        err = capsys.readouterr().err
        assert "missing.txt" in err and "Traceback" not in err

    def test_malformed_json_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "g.json"
        bad.write_text('{"type": "free", "m": [2]}')
        out = tmp_path / "o"
        rc = main(["--out", str(out), "criterion", "link", "--presentation", str(bad)])
        err = capsys.readouterr().err
        assert rc == 2 and not out.exists()
        assert "g.json" in err and "m" in err and "Traceback" not in err

    def test_disconnected_link(self, tmp_path, files, capsys):
        g, _ = files["non-isometric"]
        assert main(["--out", str(tmp_path / "o"), "criterion", "k2", "--presentation", g]) == 7

    def test_deterministic_bytes(self, files, tmp_path, capsys):
        args = ["gmodel", "pushforward", "--graph", files["graph"], "--n", "2", "--quiet"]
        assert main(["--out", str(tmp_path / "a")] + args) == 0
        assert main(["--out", str(tmp_path / "b")] + args) == 0
        (fa,) = (tmp_path / "a").glob("*.json")
        (fb,) = (tmp_path / "b").glob("*.json")
        assert fa.read_bytes() == fb.read_bytes()

    @pytest.mark.parametrize("argv", [
        ["flow", "solve", "--group", "{qg}", "--action", "{qa}"],
        ["flow", "growth", "--group", "{qg}", "--action", "{qa}", "--base", "1,0"],
        ["energy", "local", "--group", "{qg}", "--action", "{qa}", "--at", "g0"],
        ["energy", "nstep", "--group", "{qg}", "--action", "{qa}", "--n", "3", "--max-n", "3"],
        ["fixedpoint", "--group", "{qg}", "--action", "{qa}"],
        ["delta", "search", "--group", "{qg}", "--action", "{qa}", "--base", "2,2"],
        ["graph", "gen", "--V", "20", "--k", "3"],
        ["graph", "energy-ineq", "--graph", "{graph}", "--n", "3", "--maps", "2"],
        ["gmodel", "sample", "--graph", "{graph}"],
        ["gmodel", "fit-mixture", "--graph", "{graph}", "--samples", "20"],
        ["gmodel", "concentration", "--graph", "{graph}", "--samples", "20"],
        ["gmodel", "relators", "--graph", "{graph}"],
        ["criterion", "link", "--presentation", "{klein}"],
        ["criterion", "check", "--presentation", "{klein}", "--C", "1.5"],
        ["suite", "--only", "1,9"],
    ])
    def test_subcommands(self, files, tmp_path, argv, capsys):
        subst = {"qg": files["quarter-turn"][0], "qa": files["quarter-turn"][1],
                 "graph": files["graph"], "klein": files["klein"]}
        argv = [x.format(**subst) for x in argv]
        assert main(["--out", str(tmp_path / "o"), "--quiet"] + argv) == 0
        (report,) = [p for p in (tmp_path / "o").glob("report-*.json")
                     if not p.name.endswith(("labelling.json", "presentation.json"))]
        json.loads(report.read_text())

    def test_run_config_file(self, files, tmp_path, capsys):
        g, a = files["z-translation"]
        cfg = ExperimentConfig("flow", {"group": g, "action": a}, {"max_n": 2}, 0,
                               str(tmp_path / "o"))
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg.to_dict()))
        assert main(["run", str(p), "--quiet"]) == 0
        assert (tmp_path / "o" / f"report-flow-{cfg.content_hash()}.json").is_file()

    def test_fixture_command(self, tmp_path, capsys):
        assert main(["--out", str(tmp_path), "fixture", "quarter-turn"]) == 0
        assert (tmp_path / "quarter-turn.action.json").is_file()

    def test_labelling_roundtrip(self, files, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["--out", str(out), "--quiet", "--seed", "5", "gmodel", "sample",
                     "--graph", files["graph"]]) == 0
        (lab,) = out.glob("*labelling.json")
        args = ["gmodel", "relators", "--graph", files["graph"]]
        assert main(["--out", str(tmp_path / "p"), "--seed", "5"] + args) == 0
        sampled = json.loads(capsys.readouterr().out)
        assert main(["--out", str(tmp_path / "q"), "--seed", "0"] + args + ["--labelling", str(lab)]) == 0
        loaded = json.loads(capsys.readouterr().out)
        assert sampled["results"]["presentation"] == loaded["results"]["presentation"]
