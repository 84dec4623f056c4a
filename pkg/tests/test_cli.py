"""Command-line interface: exit codes, artifacts, determinism."""

import json
import socket
import subprocess
import sys
from pathlib import Path

import pytest
from PIL import Image

from arena_lab import PROTOCOL_VERSION
from arena_lab.agents import EvaluationReport, RandomPolicy, run_evaluation
from arena_lab.cli import main, parse_physics
from arena_lab.physics import PhysicsParams

from test_episode import agent_at, config_text, item, sizes

ROOT = Path(__file__).resolve().parent.parent
MAZE = str(ROOT / "configs" / "radial_maze.yml")

CLEAN = config_text(agent_at(20, 20) + item("GoodGoal", 20, 30, sizes(1, 1, 1)), t=100)
BAD_WALL = config_text(
    agent_at(20, 20) + item("Wall", 45, 20, sizes(1, 3, 1)), t=100
)

TEMPLATE = """\
!ArenaConfig
arenas:
  0: !Arena
    t: !Choice [100, 200, 300]
    items:
    - !Item
      name: Agent
      positions:
      - !Vector3 {x: 20, y: 0, z: 20}
      rotations: [0]
    - !Item
      name: GoodGoal
      positions:
      - !Vector3 {x: 20, y: 0, z: !Choice [30, 35]}
      sizes:
      - !Vector3 {x: 1, y: 1, z: 1}
"""


def eval_cmd(out, episodes=3, seed=11, config=MAZE, extra=()):
    return ["eval", config, "random", "--episodes", str(episodes), "--seed", str(seed),
            "--out", str(out), *extra]


@pytest.fixture(scope="module")
def fresh_log(tmp_path_factory):
    """One recorded random rollout on the maze, shared by the replay tests."""
    out = tmp_path_factory.mktemp("log")
    assert main(eval_cmd(out, episodes=1, seed=9)) == 0
    return out / "trajectory_000.csv"


class TestValidate:
    def test_valid_file_exits_zero(self, capsys):
        assert main(["validate", MAZE]) == 0
        captured = capsys.readouterr()
        assert "checked 1 file(s): 0 error(s)" in captured.out
        assert captured.err == ""

    def test_out_of_bounds_wall_is_one_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.yml"
        bad.write_text(BAD_WALL)
        assert main(["validate", str(bad)]) == 1
        captured = capsys.readouterr()
        errors = [ln for ln in captured.err.splitlines() if ": error:" in ln]
        assert len(errors) == 1
        assert "checked 1 file(s): 1 error(s)" in captured.out

    def test_three_files_one_bad(self, tmp_path, capsys):
        good_a, bad, good_b = tmp_path / "a.yml", tmp_path / "bad.yml", tmp_path / "b.yml"
        good_a.write_text(CLEAN)
        bad.write_text(BAD_WALL)
        good_b.write_text(CLEAN)
        assert main(["validate", str(good_a), str(bad), str(good_b)]) == 1
        captured = capsys.readouterr()
        assert all("bad.yml" in ln for ln in captured.err.splitlines())
        assert "checked 3 file(s): 1 error(s)" in captured.out

    def test_diagnostics_carry_file_line_column(self, tmp_path, capsys):
        bad = tmp_path / "bad.yml"
        bad.write_text(BAD_WALL)
        main(["validate", str(bad)])
        first = capsys.readouterr().err.splitlines()[0]
        path, line, column, rest = first.split(":", 3)
        assert path.endswith("bad.yml") and int(line) > 0 and int(column) > 0
        assert rest.strip().startswith("error")

    def test_unreadable_file(self, tmp_path, capsys):
        assert main(["validate", str(tmp_path / "missing.yml")]) == 1
        assert "cannot read file" in capsys.readouterr().err


class TestEval:
    def test_writes_report_and_trajectories(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(eval_cmd(out)) == 0
        text = (out / "report.csv").read_text()
        assert text.startswith(f"# {PROTOCOL_VERSION} seed=11\n")
        report = EvaluationReport.from_csv(text)
        assert [r.seed for r in report.rows] == [11, 12, 13]
        for i in range(3):
            log = (out / f"trajectory_{i:03d}.csv").read_text()
            assert log.startswith(f"# {PROTOCOL_VERSION} seed={11 + i} arena=0\n")
        summary = capsys.readouterr().out
        assert "3 episode(s): mean reward" in summary and "pass rate" in summary

    def test_rerun_is_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(eval_cmd(a)) == 0
        assert main(eval_cmd(b)) == 0
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_matches_library_evaluation(self, tmp_path):
        out = tmp_path / "run"
        assert main(eval_cmd(out)) == 0
        report = EvaluationReport.from_csv((out / "report.csv").read_text())
        expected = run_evaluation(MAZE, RandomPolicy(), episodes=3, base_seed=11)
        assert report.rows == expected.rows

    def test_workers_merge_identically(self, tmp_path):
        serial, pooled = tmp_path / "serial", tmp_path / "pooled"
        assert main(eval_cmd(serial, episodes=4)) == 0
        assert main(eval_cmd(pooled, episodes=4, extra=("--workers", "2"))) == 0
        for name in sorted(p.name for p in serial.iterdir()):
            assert (serial / name).read_bytes() == (pooled / name).read_bytes()

    def test_env_seed_is_the_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ARENA_LAB_SEED", "77")
        out = tmp_path / "run"
        assert main(["eval", MAZE, "random", "--episodes", "1", "--out", str(out)]) == 0
        text = (out / "report.csv").read_text()
        assert text.startswith(f"# {PROTOCOL_VERSION} seed=77\n")
        assert EvaluationReport.from_csv(text).rows[0].seed == 77

    def test_explicit_seed_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ARENA_LAB_SEED", "77")
        out = tmp_path / "run"
        assert main(eval_cmd(out, episodes=1, seed=5)) == 0
        assert (out / "report.csv").read_text().startswith(f"# {PROTOCOL_VERSION} seed=5\n")

    def test_bad_env_seed_is_an_error(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("ARENA_LAB_SEED", "banana")
        out = tmp_path / "run"
        assert main(["eval", MAZE, "random", "--episodes", "1", "--out", str(out)]) == 1
        assert "ARENA_LAB_SEED" in capsys.readouterr().err

    def test_bad_config_is_an_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.yml"
        bad.write_text(BAD_WALL)
        out = tmp_path / "run"
        assert main(eval_cmd(out, config=str(bad))) == 1
        assert "error:" in capsys.readouterr().err


class TestProcgen:
    def test_exhaustive_expansion(self, tmp_path, capsys):
        tpl = tmp_path / "tpl.yml"
        tpl.write_text(TEMPLATE)
        out = tmp_path / "battery"
        assert main(["procgen", str(tpl), "--out", str(out), "--stem", "maze"]) == 0
        assert sorted(p.name for p in out.glob("*.yml")) == [
            f"maze_{i:03d}.yml" for i in range(6)
        ]
        assert (out / "maze_manifest.csv").exists()
        assert "wrote 6 file(s)" in capsys.readouterr().out

    def test_sampled_expansion_records_seed(self, tmp_path):
        tpl = tmp_path / "tpl.yml"
        tpl.write_text(TEMPLATE)
        out = tmp_path / "battery"
        assert main(["procgen", str(tpl), "--out", str(out), "--sample", "4", "--seed", "3"]) == 0
        assert len(list(out.glob("arena_*.yml"))) == 4
        rows = (out / "arena_manifest.csv").read_text().splitlines()
        assert rows[0] == "file,directive,value,seed"
        assert all(ln.endswith(",3") for ln in rows[1:])

    def test_bad_template_is_an_error(self, tmp_path, capsys):
        tpl = tmp_path / "tpl.yml"
        tpl.write_text("!ArenaConfig\narenas: {0: !Arena {t: !If [nope, a, 1, 2], items: []}}\n")
        assert main(["procgen", str(tpl), "--out", str(tmp_path / "battery")]) == 1
        assert "error:" in capsys.readouterr().err


class TestReplay:
    def test_fresh_log_is_exact(self, fresh_log, capsys):
        assert main(["replay", MAZE, str(fresh_log)]) == 0
        assert capsys.readouterr().out.strip() == "exact"

    def test_edited_reward_cell_is_located(self, fresh_log, tmp_path, capsys):
        lines = fresh_log.read_text().splitlines()
        fields = lines[4].split(",")  # data rows start at index 2, so this is row 3
        fields[7] = "9.5"
        lines[4] = ",".join(fields)
        edited = tmp_path / "edited.csv"
        edited.write_text("\n".join(lines) + "\n")
        assert main(["replay", MAZE, str(edited)]) == 1
        out = capsys.readouterr().out
        assert "mismatch at row 3: reward logged 9.5" in out

    def test_perturbed_physics_diverges(self, fresh_log, capsys):
        assert main(["replay", MAZE, str(fresh_log), "--physics", "impulse=0.2"]) == 1
        assert "mismatch at row" in capsys.readouterr().out

    def test_version_mismatch_is_an_error(self, fresh_log, tmp_path, capsys):
        lines = fresh_log.read_text().splitlines()
        lines[0] = lines[0].replace(PROTOCOL_VERSION, "arena-lab/0")
        stale = tmp_path / "stale.csv"
        stale.write_text("\n".join(lines) + "\n")
        assert main(["replay", MAZE, str(stale)]) == 1
        assert "does not match this build" in capsys.readouterr().err

    def test_truncated_log_is_an_error(self, fresh_log, tmp_path, capsys):
        lines = fresh_log.read_text().splitlines()
        lines[-1] = lines[-1].rsplit(",", 3)[0]  # chop the last row mid-fields
        broken = tmp_path / "broken.csv"
        broken.write_text("\n".join(lines) + "\n")
        assert main(["replay", MAZE, str(broken)]) == 1
        assert "malformed trajectory row" in capsys.readouterr().err


class TestRenderFrame:
    def test_writes_png_with_metadata(self, tmp_path):
        png = tmp_path / "shot.png"
        args = ["render-frame", MAZE, str(png), "--size", "16", "--seed", "5", "--steps", "2"]
        assert main(args) == 0
        img = Image.open(png)
        assert img.size == (16, 16) and img.mode == "RGB"
        assert img.text["arena-lab-version"] == PROTOCOL_VERSION
        assert img.text["arena-lab-seed"] == "5"
        assert img.text["arena-lab-step"] == "2"

    def test_grayscale(self, tmp_path):
        png = tmp_path / "shot.png"
        assert main(["render-frame", MAZE, str(png), "--size", "8", "--grayscale"]) == 0
        assert Image.open(png).mode == "L"

    def test_bad_arena_index_is_an_error(self, tmp_path, capsys):
        png = tmp_path / "shot.png"
        assert main(["render-frame", MAZE, str(png), "--arena", "7"]) == 1
        assert "error:" in capsys.readouterr().err


class TestPhysicsFlag:
    def test_overrides_selected_fields(self):
        params = parse_physics("gravity=0.03,iterations=2")
        assert params == PhysicsParams(gravity=0.03, iterations=2)

    def test_unknown_field_is_rejected(self):
        with pytest.raises(Exception, match="bad physics override"):
            parse_physics("warp=9")


class TestSubprocess:
    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "arena_lab.cli", "validate", MAZE],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        assert "0 error(s)" in proc.stdout

    def test_missing_subcommand_exits_nonzero(self):
        proc = subprocess.run(
            [sys.executable, "-m", "arena_lab.cli"], capture_output=True, timeout=120
        )
        assert proc.returncode != 0

    def test_serve_accepts_a_handshake(self):
        proc = subprocess.Popen(
            [sys.executable, "-m", "arena_lab.cli", "serve", "--port", "0"],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
        )
        try:
            line = proc.stdout.readline().strip()
            assert line.startswith("listening on 127.0.0.1:")
            port = int(line.rsplit(":", 1)[1])
            with socket.create_connection(("127.0.0.1", port), timeout=10) as sock:
                hello = {"seq": 1, "type": "hello", "payload": {"version": PROTOCOL_VERSION}}
                sock.sendall((json.dumps(hello) + "\n").encode())
                reply = json.loads(sock.makefile().readline())
            assert reply["type"] == "hello" and reply["seq"] == 1
        finally:
            proc.terminate()
            proc.wait(timeout=10)
