import csv
import io
import logging
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from evcheck.bench import CSV_HEADER, Scoring, collect_tasks, csv_text, read_manifest, run_bench
from evcheck.cegar import Config
from evcheck.cli import main

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
TICKS_LOOP = CORPUS / "flag_ticks_loop_safe.ev"

DIVERGING = """int main() {
  int n = nondet();
  int i = 0;
  while (i != n) {
    i = i + 1;
  }
  if (i != n) {
    error();
  }
  return 0;
}
"""


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# -- verify ----------------------------------------------------------------------------

def test_verify_ticks_loop(capsys):
    code, out, _ = run(["verify", TICKS_LOOP], capsys)
    assert code == 0
    assert out.splitlines()[-1] == "VERDICT: SAFE"
    assert "refinements: 1" in out


def test_verify_unguarded_error(tmp_path, capsys):
    task = tmp_path / "trivial.ev"
    task.write_text("int main() {\n  error();\n}\n")
    code, out, _ = run(["verify", task], capsys)
    assert code == 1
    lines = out.splitlines()
    assert lines[-1] == "VERDICT: UNSAFE"
    assert lines[-2] == "2\terror()\t{}\tinputs=[] confirmed=yes"
    assert not lines[-3].startswith("2\t")  # a single witness line


def test_verify_full_mode_budget(tmp_path, capsys):
    task = tmp_path / "diverge.ev"
    task.write_text(DIVERGING)
    code, out, _ = run(["verify", "--mode", "explicit-full", "--state-budget", "1e4", task], capsys)
    assert code == 2
    assert out.splitlines()[-1] == "VERDICT: UNKNOWN(StateBudgetExceeded)"


def test_verify_writes_witness_and_arg(tmp_path, capsys):
    witness, dump = tmp_path / "w.txt", tmp_path / "arg.dot"
    code, out, _ = run(["verify", CORPUS / "deep_bug_unsafe.ev", "--witness", witness,
                        "--arg-dump", dump], capsys)
    assert code == 1
    text = witness.read_text()
    assert "confirmed=yes" in text.splitlines()[-1]
    assert "error()" not in out  # witness went to the file
    assert dump.read_text().startswith("digraph ARG {")


def test_verify_flags(capsys):
    code, out, _ = run(["verify", TICKS_LOOP, "--scoped-precision=false", "--refine", "restart",
                        "--traversal", "bfs", "--max-refinements", "5", "--time-limit", "30"], capsys)
    assert code == 0 and "VERDICT: SAFE" in out


@pytest.mark.parametrize("argv", [
    [], ["verify"], ["frobnicate"], ["verify", "x.ev", "--mode", "symbolic"],
    ["verify", "x.ev", "--state-budget", "0"], ["verify", "x.ev", "--scoped-precision", "maybe"],
    ["bench", "corpus", "--jobs", "-1"],
])
def test_usage_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 3 and err


def test_parse_error(tmp_path, capsys):
    task = tmp_path / "bad.ev"
    task.write_text("int main() {\n  int x = ;\n}\n")
    code, _, err = run(["verify", task], capsys)
    assert code == 4
    assert "bad.ev" in err and ":2:" in err


def test_io_error(tmp_path, capsys):
    code, _, err = run(["verify", tmp_path / "missing.ev"], capsys)
    assert code == 5 and "missing.ev" in err


def test_help_exits_cleanly(capsys):
    assert run(["--help"], capsys)[0] == 0


def test_console_script():
    exe = shutil.which("evcheck")
    argv = [exe] if exe else [sys.executable, "-m", "evcheck.cli"]
    proc = subprocess.run(argv + ["verify", str(TICKS_LOOP)], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.rstrip().endswith("VERDICT: SAFE")


# -- bench -------------------------------------------------------------------------------

@pytest.fixture
def small_corpus(tmp_path):
    shutil.copy(TICKS_LOOP, tmp_path / "safe.ev")
    shutil.copy(CORPUS / "deep_bug_unsafe.ev", tmp_path / "unsafe.ev")
    (tmp_path / "diverge.ev").write_text(DIVERGING)
    (tmp_path / "manifest.tsv").write_text("# name\texpected\nsafe\tSAFE\nunsafe\tUNSAFE\ndiverge\tSAFE\n")
    return tmp_path


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def _strip_time(rows):
    col = CSV_HEADER.index("time_ms")
    return [r[:col] + r[col + 1:] for r in rows]


def test_bench_three_tasks(small_corpus, capsys):
    code, out, _ = run(["bench", small_corpus, "--state-budget", "5000"], capsys)
    assert code == 0
    rows = _rows(out)
    assert tuple(rows[0]) == CSV_HEADER
    assert [r[0] for r in rows[1:]] == ["safe", "unsafe", "diverge", "TOTAL"]
    assert [r[2] for r in rows[1:4]] == ["SAFE", "UNSAFE", "UNKNOWN(StateBudgetExceeded)"]
    assert [int(r[6]) for r in rows[1:4]] == [2, 1, 0]
    assert rows[4][1] == "2/3" and int(rows[4][6]) == 3
    assert all(len(r) == len(CSV_HEADER) for r in rows)


def test_bench_deterministic_modulo_time(small_corpus, capsys):
    first = _rows(run(["bench", small_corpus, "--state-budget", "5000"], capsys)[1])
    second = _rows(run(["bench", small_corpus, "--state-budget", "5000"], capsys)[1])
    assert _strip_time(first) == _strip_time(second)


def test_bench_jobs_keep_manifest_order(small_corpus, capsys):
    serial = _rows(run(["bench", small_corpus, "--state-budget", "5000"], capsys)[1])
    parallel = _rows(run(["bench", small_corpus, "--state-budget", "5000", "--jobs", "3"], capsys)[1])
    assert _strip_time(serial) == _strip_time(parallel)


def test_bench_csv_file_and_scoring(small_corpus, tmp_path, capsys):
    (small_corpus / "manifest.tsv").write_text("safe\tUNSAFE\nunsafe\tSAFE\n")
    out_csv = tmp_path / "out.csv"
    code, out, _ = run(["bench", small_corpus, "--csv", out_csv, "--score-false-alarm", "-5",
                        "--score-missed-bug", "-9"], capsys)
    assert code == 0 and out == ""
    rows = _rows(out_csv.read_text())
    # SAFE reported on an unsafe-labelled task is a missed bug and vice versa
    assert [int(r[6]) for r in rows[1:3]] == [-9, -5]


def test_missing_manifest_entry_warns(small_corpus, caplog):
    (small_corpus / "manifest.tsv").write_text("safe\tSAFE\nghost\tUNSAFE\n")
    with caplog.at_level(logging.WARNING):
        tasks = collect_tasks(small_corpus)
    assert [p.stem for p, _ in tasks] == ["safe"]
    text = caplog.text
    assert "unsafe: no manifest entry" in text and "ghost" in text


def test_malformed_manifest(small_corpus, capsys):
    (small_corpus / "manifest.tsv").write_text("safe\tMAYBE\n")
    with pytest.raises(ValueError):
        read_manifest(small_corpus)
    assert run(["bench", small_corpus], capsys)[0] == 3


def test_scoring_defaults():
    s = Scoring()
    assert (s.score("SAFE", "SAFE"), s.score("UNSAFE", "UNSAFE")) == (2, 1)
    assert (s.score("SAFE", "UNSAFE"), s.score("UNSAFE", "SAFE")) == (-4, -8)
    assert s.score("SAFE", "UNKNOWN(StateBudgetExceeded)") == 0


def test_full_mode_has_no_refinements(small_corpus):
    results = run_bench(small_corpus, Config(mode="explicit-full", state_budget=5000))
    assert all(r.refinements == 0 for r in results)
    text = csv_text(results)
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
