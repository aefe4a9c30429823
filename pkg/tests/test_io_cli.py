import csv
import json

import numpy as np
import pytest

from netgame.cli import main
from netgame.config import RunConfig
from netgame.dynamics import stationary_closed_form, total_variation
from netgame.equilibrium import enumerate_neksn, neksn_indices
from netgame.errors import ConfigError, DataError
from netgame.io import DatasetBundle, School, fmt, load_dataset, save_dataset
from netgame.model import AttributeTable, ModelParameters, NetworkState
from netgame.synthetic import CovariateProfile, generate_synthetic

NODE_HEADER = "school_id,node_id,smokes,sex,grade,race,price_cents,hh_smokes,mom_edu,income\n"
SMALL = {"data": {"n_schools": 2, "sizes": 6, "burn_in_sweeps": 100},
         "simulate": {"steps": 300, "thin": 10},
         "estimate": {"T": 60, "R": 20},
         "fit": {"steps": 600, "thin": 100, "burn_in": 100},
         "counterfact": {"replications": 2, "steps": 300, "burn_in": 100, "thin": 10,
                         "increases": [10, 20], "fractions": [0.1, 0.5],
                         "swap_fractions": [0.0, 0.5]}}


def read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# -------------------------------------------------------------- datasets

def test_round_trip(tmp_path):
    b = generate_synthetic(3, [5, 6, 7], ModelParameters(v0=0.3, w0=-1.0, phi=0.4), seed=4,
                           burn_in_sweeps=50)
    save_dataset(b, tmp_path)
    back = load_dataset(tmp_path / "nodes.csv", tmp_path / "edges.csv")
    assert back.equals(b)


def test_reals_round_trip_exactly():
    for x in (0.1, 1 / 3, 167.80000000000001, 1e-300, 2.0 ** 0.5):
        assert float(fmt(x)) == x


def test_directed_nominations_need_both_directions(tmp_path):
    (tmp_path / "nodes.csv").write_text(
        NODE_HEADER + "A,1,0,F,9,White,150,0,1,\nA,2,1,M,10,Black,150,1,0,\nA,3,0,F,11,White,150,0,0,\n")
    (tmp_path / "edges.csv").write_text("school_id,node_a,node_b\nA,1,2\nA,2,3\nA,3,2\n")
    b = load_dataset(tmp_path / "nodes.csv", tmp_path / "edges.csv", directed=True)
    S = b.schools[0].S
    assert S.link(0, 1) == 0 and S.link(1, 2) == 1 and S.link(0, 2) == 0


def test_malformed_grade_names_row(tmp_path):
    (tmp_path / "nodes.csv").write_text(NODE_HEADER + "A,1,0,F,9,White,150,0,1,\n"
                                        "A,2,1,M,tenth,Black,150,1,0,\n")
    (tmp_path / "edges.csv").write_text("school_id,node_a,node_b\n")
    with pytest.raises(DataError, match=r"nodes\.csv:3.*grade"):
        load_dataset(tmp_path / "nodes.csv", tmp_path / "edges.csv")


@pytest.mark.parametrize("nodes,edges,pattern", [
    ("A,1,0,F,9,White,150,0,1,\nA,1,0,F,9,White,150,0,1,\n", "", "duplicate node id"),
    ("A,1,0,F,9,White,150,0,1,\nA,2,0,F,9,White,150,0,1,\n", "A,1,9\n", "dangling"),
    ("A,1,0,F,9,White,150,0,1,\nA,2,0,F,9,White,150,0,1,\n", "A,2,1\n", "node_a < node_b"),
    ("A,1,0,X,9,White,150,0,1,\n", "", "sex"),
])
def test_schema_violations(tmp_path, nodes, edges, pattern):
    (tmp_path / "nodes.csv").write_text(NODE_HEADER + nodes)
    (tmp_path / "edges.csv").write_text("school_id,node_a,node_b\n" + edges)
    with pytest.raises(DataError, match=pattern):
        load_dataset(tmp_path / "nodes.csv", tmp_path / "edges.csv")


def test_split_by_grade(tmp_path):
    (tmp_path / "nodes.csv").write_text(
        NODE_HEADER + "A,1,0,F,9,White,150,0,1,\nA,2,1,M,9,Black,150,1,0,\nA,3,0,F,11,White,150,0,0,\n")
    (tmp_path / "edges.csv").write_text("school_id,node_a,node_b\nA,1,2\nA,2,3\n")
    b = load_dataset(tmp_path / "nodes.csv", tmp_path / "edges.csv", split_by_grade=True)
    assert [s.school_id for s in b.schools] == ["A_g9", "A_g11"]
    assert b.schools[0].S.link(0, 1) == 1 and b.schools[1].n == 1


# ------------------------------------------------------------- synthetic

def test_flat_synthetic_density_and_prevalence():
    b = generate_synthetic(4, 30, ModelParameters(), seed=1, burn_in_sweeps=200)
    for s in b.schools:
        assert abs(s.S.actions.mean() - 0.5) < 0.2
    prev = np.mean([s.S.actions.mean() for s in b.schools])
    dens = np.mean([s.S.links.mean() for s in b.schools])
    assert abs(prev - 0.5) < 0.03 and abs(dens - 0.5) < 0.03


def test_synthetic_states_follow_stationary_law():
    """Covariate-free coefficients, so every tiny school shares one law."""
    th = ModelParameters(v0=-0.4, w0=0.6, phi=0.5, h=0.3)
    b = generate_synthetic(20_000, 3, th, seed=2, burn_in_sweeps=30)
    idx = np.array([s.S.index() for s in b.schools])
    emp = np.bincount(idx, minlength=64) / idx.size
    assert total_variation(emp, stationary_closed_form(b.schools[0].X, th)) < 0.05


def test_synthetic_byte_identical(tmp_path):
    for d in ("a", "b"):
        b = generate_synthetic(2, 8, ModelParameters(v0=-0.5, phi=0.3), seed=7,
                               burn_in_sweeps=40)
        save_dataset(b, tmp_path / d) if (tmp_path / d).mkdir() is None else None
    for f in ("nodes.csv", "edges.csv", "provenance.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_profile_validation():
    with pytest.raises(ValueError):
        CovariateProfile(race_shares=(1.0, 0.0))
    with pytest.raises(ValueError):
        generate_synthetic(1, 1, ModelParameters())


# ---------------------------------------------------------------- config

def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="estimate"):
        RunConfig({"estimate": {"T": 10, "bogus": 1}})
    with pytest.raises(ConfigError):
        RunConfig({"nonsense": 1})
    with pytest.raises(ConfigError):
        RunConfig({"estimate": {"proposal_scale": 0}})


def test_config_merge_and_override():
    cfg = RunConfig({"estimate": {"T": 10}})
    assert cfg["estimate"]["T"] == 10 and cfg["estimate"]["R"] == 500
    cfg2 = cfg.override("estimate", R=7, T=None)
    assert cfg2["estimate"]["R"] == 7 and cfg2["estimate"]["T"] == 10


def test_config_from_environment(tmp_path, monkeypatch):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"seed": 42}))
    monkeypatch.setenv("NETGAME_CONFIG", str(p))
    assert RunConfig.load().seed == 42


# ------------------------------------------------------------------- CLI

@pytest.fixture
def cli_env(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL))
    data = tmp_path / "data"
    assert main(["gen-data", "--config", str(cfg), "--seed", "3", "--out", str(data)]) == 0
    return tmp_path, cfg, data


def _two_node_fixture(d):
    d.mkdir()
    (d / "nodes.csv").write_text(NODE_HEADER + "S,1,0,F,10,White,150,0,0,\n"
                                 "S,2,0,M,10,White,150,0,0,\n")
    (d / "edges.csv").write_text("school_id,node_a,node_b\n")
    return d


def test_enumerate_matches_module_oracle(tmp_path):
    data = _two_node_fixture(tmp_path / "fx")
    theta = {"v0": -0.3, "w0": 0.4, "w_sex": -1.0, "phi": 0.7}
    (tmp_path / "theta.json").write_text(json.dumps(theta))
    out = tmp_path / "eq"
    assert main(["enumerate-eq", "--data", str(data), "--theta", str(tmp_path / "theta.json"),
                 "--k", "2", "--out", str(out)]) == 0
    rows = read(out / "equilibria.csv")
    assert rows[0] == ["state_index", "state", "potential", "pairwise_stable"]
    X = load_dataset(data / "nodes.csv", data / "edges.csv").schools[0].X
    expect = neksn_indices(X, ModelParameters.from_mapping(theta), 2)
    assert [int(r[0]) for r in rows[1:]] == expect.tolist()
    assert {NetworkState.from_index(2, int(r[0])) for r in rows[1:]} == \
        enumerate_neksn(X, ModelParameters.from_mapping(theta), 2)


def test_simulate_zero_steps(cli_env):
    tmp, cfg, data = cli_env
    out = tmp / "sim0"
    assert main(["simulate", "--config", str(cfg), "--data", str(data), "--steps", "0",
                 "--out", str(out)]) == 0
    rows = read(out / "trajectory.csv")
    assert len(rows) == 2 and rows[1][0] == "0"
    S = load_dataset(data / "nodes.csv", data / "edges.csv").schools[0].S
    assert rows[1][1] == S.bitstring()


COMMANDS = [
    ["simulate"], ["enumerate-eq", "--n", "3"], ["spectrum", "--n", "3", "--k", "2"],
    ["estimate"], ["fit"], ["counterfact", "price"], ["counterfact", "mix"],
    ["counterfact", "campaign"],
]


@pytest.mark.parametrize("command", COMMANDS, ids=lambda c: "-".join(c))
def test_reruns_byte_identical(cli_env, command):
    tmp, cfg, data = cli_env
    outs = []
    for r in range(2):
        out = tmp / f"run{r}"
        argv = command + ["--config", str(cfg), "--seed", "5", "--out", str(out)]
        if command[0] not in ("enumerate-eq", "spectrum"):
            argv += ["--data", str(data)]
        assert main(argv) == 0
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir())
    assert files and files == sorted(p.name for p in outs[1].iterdir())
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f


def test_gen_data_byte_identical(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL))
    for d in ("a", "b"):
        assert main(["gen-data", "--config", str(cfg), "--seed", "1",
                     "--out", str(tmp_path / d)]) == 0
    for f in ("nodes.csv", "edges.csv", "provenance.json", "gen-data.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_pipeline_outputs_schema(cli_env):
    tmp, cfg, data = cli_env
    est = tmp / "est"
    assert main(["estimate", "--config", str(cfg), "--data", str(data), "--out", str(est)]) == 0
    chain = read(est / "chain.csv")
    assert chain[0][:2] == ["iter", "accepted"] and chain[0][-1] == "log_prior"
    assert len(chain) == 61
    summary = read(est / "summary.csv")
    assert summary[0] == ["coefficient", "mean", "lo90", "hi90", "lo95", "hi95", "lo99", "hi99"]
    assert len(summary) == 14
    cf = tmp / "cf"
    assert main(["counterfact", "price", "--config", str(cfg), "--data", str(data),
                 "--theta", str(est / "posterior_mean.json"), "--out", str(cf)]) == 0
    price = read(cf / "price.csv")
    assert price[0][0] == "increase_cents" and len(price) == 3
    meta = json.loads((cf / "counterfact-price.json").read_text())
    assert meta["seed"] == 0 and "config" in meta
    fit = tmp / "fit"
    assert main(["fit", "--config", str(cfg), "--data", str(data),
                 "--theta", str(est / "posterior_mean.json"), "--out", str(fit)]) == 0
    assert read(fit / "fit.csv")[0][0] == "statistic"


def test_exit_codes(cli_env, capsys):
    tmp, cfg, data = cli_env
    assert main(["no-such-command"]) == 2
    bad = tmp / "bad.json"
    bad.write_text(json.dumps({"simulate": {"stepz": 3}}))
    assert main(["simulate", "--config", str(bad), "--data", str(data),
                 "--out", str(tmp / "x")]) == 3
    assert "config" in capsys.readouterr().err
    assert main(["simulate", "--data", str(tmp / "missing"), "--out", str(tmp / "y")]) == 4
    blocker = tmp / "file"
    blocker.write_text("")
    assert main(["spectrum", "--out", str(blocker / "sub")]) == 5
    assert main(["enumerate-eq", "--n", "6", "--out", str(tmp / "z")]) in (2, 3)
