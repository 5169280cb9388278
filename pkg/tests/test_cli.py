import json
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from gamefort import io
from gamefort.cli import main
from gamefort.concat import concatenate
from gamefort.expanders import certify, complete_graph, matching, shift_union_graph
from gamefort.games import chsh, classical_value, parity_game


@pytest.fixture
def files(tmp_path):
    io.save_game(tmp_path / "chsh.json", chsh())
    io.save_graph(tmp_path / "k2.json", certify(complete_graph(2)))
    io.save_graph(tmp_path / "m2.json", certify(matching(2)))
    io.write_json(tmp_path / "parity.json", io.kgame_to_dict(parity_game(3)))
    return tmp_path


def test_game_roundtrip(tmp_path):
    g = chsh()
    io.save_game(tmp_path / "g.json", g)
    h = io.load_game(tmp_path / "g.json")
    assert np.array_equal(g.mu, h.mu) and np.array_equal(g.predicate, h.predicate)


def test_weighted_predicate_roundtrip(tmp_path):
    e = certify(shift_union_graph(2, [0, 1]))
    outer = concatenate(e, chsh(), certify(matching(2))).outer
    io.save_game(tmp_path / "o.json", outer)
    back = io.load_game(tmp_path / "o.json")
    assert np.array_equal(np.asarray(outer.predicate, dtype=object), np.asarray(back.predicate, dtype=object))
    assert classical_value(back) == classical_value(outer)


def test_kgame_roundtrip(tmp_path):
    io.write_json(tmp_path / "p.json", io.kgame_to_dict(parity_game(3)))
    g = io.load_any_game(tmp_path / "p.json")
    assert g.question_sizes == (2, 2, 2)


def test_graph_roundtrip_recomputes_lambda(tmp_path):
    data = io.graph_to_dict(certify(shift_union_graph(4, [0, 1])))
    data["lambda"] = 0.0
    io.write_json(tmp_path / "g.json", data)
    assert io.load_graph(tmp_path / "g.json").lam == pytest.approx(2**-0.5)


def test_format_errors(tmp_path):
    (tmp_path / "bad.json").write_text('{"x_size": 1}')
    with pytest.raises(io.FormatError, match="missing"):
        io.load_game(tmp_path / "bad.json")
    (tmp_path / "bad2.json").write_text("{")
    with pytest.raises(io.FormatError):
        io.load_game(tmp_path / "bad2.json")


def test_value(files, capsys):
    assert main(["value", str(files / "chsh.json")]) == 0
    assert "value: 3/4" in capsys.readouterr().out


def test_value_kplayer(files, capsys):
    assert main(["value", str(files / "parity.json")]) == 0
    assert "value: 7/8" in capsys.readouterr().out


def test_global_cap_before_subcommand(files, capsys):
    assert main(["--cap", "1", "value", str(files / "chsh.json")]) == 2
    assert "instance too large" in capsys.readouterr().err


def test_bireg(files, capsys):
    out = files / "b.json"
    assert main(["bireg", str(files / "chsh.json"), "--tau", "1/4", "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["provenance"]["q"] == 16
    assert classical_value(io.load_game(out)) == Fraction(3, 4)


def test_bireg_graphical_rejects(files, tmp_path, capsys):
    mu = np.array([[Fraction(1, 3), Fraction(2, 3)]], dtype=object)
    from gamefort.games import Game

    io.save_game(tmp_path / "ng.json", Game.from_arrays(mu, np.ones((1, 1, 1, 2), dtype=bool)))
    assert main(["bireg", str(tmp_path / "ng.json"), "--mode", "graphical"]) == 2


def test_concat(files):
    out = files / "o.json"
    assert main(["concat", str(files / "chsh.json"), str(files / "k2.json"), str(files / "k2.json"), "-o", str(out)]) == 0
    assert io.load_game(out).a_size == 4


def test_check_fort_fail_exit(files, capsys):
    code = main(["check-fort", str(files / "chsh.json"), str(files / "m2.json"), str(files / "m2.json"), "--delta", "1/16"])
    assert code == 1
    assert "max_violation: 1/8" in capsys.readouterr().out


@pytest.mark.parametrize("mode", ["exact", "ascent", "combinatorial", "pointwise"])
def test_check_fort_modes(files, mode):
    args = ["check-fort", str(files / "chsh.json"), str(files / "k2.json"), str(files / "k2.json"),
            "--epsilon", "1/4", "--delta", "1/4", "--mode", mode]
    assert main(args) == 0


def test_check_fort_kplayer(files, capsys):
    k2 = str(files / "k2.json")
    assert main(["check-fort", str(files / "parity.json"), k2, k2, k2, "--delta", "0"]) == 0


def test_spectral(files, capsys):
    assert main(["spectral", "--shift-union", "8,0,1,2,5", "--tilde", "5", "--family", "pairwise"]) == 0
    out = capsys.readouterr().out
    assert "lambda: 0.5" in out and "ok=True" in out


def test_spectral_target_fail(files):
    assert main(["spectral", str(files / "m2.json"), "--lambda-target", "1/2"]) == 1


def test_spectral_random_output(tmp_path):
    out = tmp_path / "r.json"
    assert main(["--seed", "2", "spectral", "--random", "10", "3", "-o", str(out)]) == 0
    assert io.load_graph(out).degree == 3


def test_repeat(files, capsys):
    assert main(["repeat", str(files / "chsh.json"), str(files / "k2.json"), str(files / "k2.json"), "--steps"]) == 0
    assert "exact_value: 9/16" in capsys.readouterr().out


def test_plan(capsys):
    assert main(["plan", "--sigma", "4", "--tau", "1/2", "--beta", "1/4"]) == 0
    assert "m: 8" in capsys.readouterr().out


def test_plan_bad_range():
    assert main(["plan", "--sigma", "4", "--tau", "2", "--beta", "1/4"]) == 2


def test_ordered_fort(files):
    out = files / "of.json"
    code = main(["ordered-fort", "--game", str(files / "chsh.json"), "--left-graph", str(files / "k2.json"),
                 "--right-graph", str(files / "k2.json"), "-o", str(out)])
    assert code == 0
    assert classical_value(io.load_game(out)) == Fraction(3, 4)


def test_pipeline(files, capsys):
    out = files / "run"
    code = main(["pipeline", str(files / "chsh.json"), "--out", str(out), "--epsilon", "1/2", "--delta", "1/2"])
    assert code == 0
    assert (out / "manifest.txt").exists()


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["value"])
    assert exc.value.code == 2


def test_console_module_runs(files):
    proc = subprocess.run([sys.executable, "-m", "gamefort.cli", "value", str(files / "chsh.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "3/4" in proc.stdout
