from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from evcheck.arg import (ARG, PrecisionNotRefined, StateBudgetExceeded, extract_error_path, prune_arg,
                         reach)
from evcheck.cfa import Edge, Location, load_problem, problem_from_source
from evcheck.cpa import AbstractState, ExplicitCPA, merge_sep, prec_adjust, stop_sep, transfer
from evcheck.domain import CONTRADICTING, EMPTY, ProgramPrecision, assignment, join, leq
from evcheck.generate import generate_programs
from evcheck.refine import is_feasible, refine, scope_precision
from evcheck.syntax import Assign, Assume, Const, Pred, Var

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
TICKS_LOOP = CORPUS / "flag_ticks_loop_safe.ev"

L1, L2 = Location(1, 1, "main"), Location(2, 2, "main")


# -- operators ---------------------------------------------------------------------------

def test_transfer_examples():
    guard = Edge(L1, Assume(Pred(">", Var("flag"), Const(0))), L2)
    assert transfer(AbstractState(L1, assignment(flag=0)), guard) == []
    assign = Edge(L1, Assign("x", Const(7)), L2)
    assert transfer(AbstractState(L1, EMPTY), assign) == [AbstractState(L2, assignment(x=7))]
    assert transfer(AbstractState(L1, CONTRADICTING), assign) == []
    with pytest.raises(ValueError):
        transfer(AbstractState(L2, EMPTY), assign)


def test_merge_sep_examples():
    assert merge_sep(assignment(x=1), assignment(x=2), {"x"}) == assignment(x=2)
    v = assignment(y=3)
    assert merge_sep(v, v, set()) == v
    assert merge_sep(CONTRADICTING, v, set()) == v


def test_stop_sep_examples():
    assert stop_sep(assignment(x=1, y=2), [assignment(x=1)], set())
    assert not stop_sep(assignment(x=1), [assignment(x=2)], set())
    assert stop_sep(CONTRADICTING, [], set())


def test_prec_adjust_examples():
    assert prec_adjust(assignment(ticks=3, flag=0), {"flag"}) == assignment(flag=0)
    assert prec_adjust(assignment(ticks=3), set()) == EMPTY
    v = assignment(a=1, b=2)
    assert prec_adjust(v, {"a", "b", "c"}) == v


# -- reach ---------------------------------------------------------------------------------

def ticks_loop():
    return load_problem(TICKS_LOOP)


def test_reach_ticks_loop_without_precision_finds_error():
    problem = ticks_loop()
    arg = ARG(problem, ProgramPrecision())
    out = reach(problem, arg, ProgramPrecision())
    assert not out.exhausted and arg.nodes[out.target].location in problem.errors


def test_reach_ticks_loop_tracking_flag_exhausts():
    problem = ticks_loop()
    pi = ProgramPrecision.uniform(problem.cfa.locations, {"main::flag"})
    arg = ARG(problem, pi)
    assert reach(problem, arg, pi).exhausted
    arg.check_wellformed()


def test_reach_loop_free_bounded_by_locations():
    problem = problem_from_source("int main() { int x = 3; if (x > 5) { x = 0; } else { x = x + 1; }"
                                  " if (x == 1) { error(); } return 0; }")
    pi = ProgramPrecision.uniform(problem.cfa.locations, problem.cfa.variables)
    arg = ARG(problem, pi)
    assert reach(problem, arg, pi).exhausted
    assert len(arg.nodes) <= len(problem.cfa.locations)


@pytest.mark.parametrize("traversal", ["dfs", "bfs"])
def test_reach_traversals_agree(traversal):
    problem = load_problem(CORPUS / "bounded_sum_safe.ev")
    pi = ProgramPrecision.uniform(problem.cfa.locations, problem.cfa.variables)
    arg = ARG(problem, pi)
    assert reach(problem, arg, pi, traversal=traversal).exhausted


def test_state_budget():
    problem = ticks_loop()
    pi = ProgramPrecision.uniform(problem.cfa.locations, problem.cfa.variables)
    arg = ARG(problem, pi)
    with pytest.raises(StateBudgetExceeded):
        reach(problem, arg, pi, budget=500)
    assert arg.created == 501


def test_coverage_by_weaker_state():
    problem = problem_from_source("int main() { int i = 0; while (nondet()) { i = 1; } return 0; }")
    pi = ProgramPrecision()  # nothing tracked: the loop folds back onto itself
    arg = ARG(problem, pi)
    assert reach(problem, arg, pi).exhausted
    covered = [n for n in arg.nodes.values() if n.covered_by is not None]
    assert covered
    arg.check_wellformed()


# -- error paths -------------------------------------------------------------------------------

def test_extract_path_depth_three():
    problem = problem_from_source("int main() {\n  int x = 1;\n  int y = 2;\n  error();\n}")
    arg = ARG(problem, ProgramPrecision())
    out = reach(problem, arg, ProgramPrecision())
    path = extract_error_path(arg, out.target)
    assert len(path) == 2
    problem = problem_from_source("int main() {\n  int x = 1;\n  int y = 2;\n  int z = 3;\n  error();\n}")
    arg = ARG(problem, ProgramPrecision())
    path = extract_error_path(arg, reach(problem, arg, ProgramPrecision()).target)
    assert len(path) == 3
    assert path.nodes[0] == arg.root and path.locations[-1] in problem.errors


def test_extract_path_ticks_loop():
    problem = ticks_loop()
    arg = ARG(problem, ProgramPrecision())
    path = extract_error_path(arg, reach(problem, arg, ProgramPrecision()).target)
    ops = [str(op) for op in path.ops]
    assert "main::flag := 0" in ops and ops[-1] == "[main::flag > 0]"
    assert ops.index("main::flag := 0") < len(ops) - 1


def test_extract_path_root_is_target():
    problem = problem_from_source("int main() { error(); }")
    arg = ARG(problem, ProgramPrecision())
    out = reach(problem, arg, ProgramPrecision())
    assert out.target == arg.root
    assert len(extract_error_path(arg, out.target)) == 0


def test_extract_path_broken_chain():
    problem = ticks_loop()
    arg = ARG(problem, ProgramPrecision())
    target = reach(problem, arg, ProgramPrecision()).target
    mid = extract_error_path(arg, target).nodes[2]
    del arg.nodes[mid]
    with pytest.raises(RuntimeError):
        extract_error_path(arg, target)


# -- pruning ------------------------------------------------------------------------------------

BRANCHY = """int main() {
  int a = 0;
  int b = nondet();
  if (b == 0) {
    b = 1;
  } else {
    b = 2;
  }
  if (a != 0) {
    error();
  }
  return 0;
}
"""


def _first_error(problem):
    pi = ProgramPrecision()
    arg = ARG(problem, pi)
    out = reach(problem, arg, pi)
    return arg, extract_error_path(arg, out.target)


def test_prune_below_first_grown_location():
    problem = problem_from_source(BRANCHY)
    arg, path = _first_error(problem)
    cut = path.steps[0]  # the node reached by a := 0
    refined = ProgramPrecision({cut.location: {"main::a"}})
    before = set(arg.nodes)
    parent = prune_arg(arg, refined, path)
    assert parent == arg.root
    assert cut.node not in arg.nodes
    removed = before - set(arg.nodes)
    assert set(path.nodes[1:]) <= removed
    assert arg.root in arg.waitlist
    arg.check_wellformed()


def test_prune_keeps_siblings():
    problem = problem_from_source(BRANCHY)
    arg, path = _first_error(problem)
    # grow precision only at the last location before the target
    last = path.steps[-2]
    refined = ProgramPrecision({last.location: {"main::a"}})
    siblings = [c for c in arg.nodes[path.nodes[-3]].children.values() if c != last.node]
    prune_arg(arg, refined, path)
    assert last.node not in arg.nodes and path.nodes[-1] not in arg.nodes
    assert all(s in arg.nodes for s in siblings)
    assert path.nodes[-3] in arg.waitlist
    arg.check_wellformed()


def test_prune_at_target_removes_only_target():
    problem = problem_from_source(BRANCHY)
    arg, path = _first_error(problem)
    refined = ProgramPrecision({path.locations[-1]: {"main::a"}})
    n = len(arg.nodes)
    assert prune_arg(arg, refined, path) == path.nodes[-2]
    assert len(arg.nodes) == n - 1
    arg.check_wellformed()


def test_prune_at_root_restarts():
    problem = problem_from_source(BRANCHY)
    arg, path = _first_error(problem)
    refined = ProgramPrecision({problem.initial: {"main::a"}})
    assert prune_arg(arg, refined, path) == arg.root
    assert list(arg.nodes) == [arg.root]
    assert list(arg.waitlist) == [arg.root]
    assert arg.nodes[arg.root].precision == {"main::a"}


def test_prune_without_growth_signals():
    problem = problem_from_source(BRANCHY)
    arg, path = _first_error(problem)
    with pytest.raises(PrecisionNotRefined):
        prune_arg(arg, ProgramPrecision(), path)


def test_prune_uncovers_nodes_covered_by_pruned_ones():
    problem = problem_from_source("int main() { int i = 0; int f = 0; while (nondet()) { i = 1; }"
                                  " if (f == 1) { error(); } return 0; }")
    arg, path = _first_error(problem)
    covered = {n.id: n.covered_by for n in arg.nodes.values() if n.covered_by is not None}
    refined = scope_precision(refine(path), problem.cfa)
    prune_arg(arg, refined, path)
    arg.check_wellformed()
    for node_id, by in covered.items():
        if node_id in arg.nodes and by not in arg.nodes:
            assert arg.nodes[node_id].covered_by is None and node_id in arg.waitlist


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.sampled_from(["dfs", "bfs"]), st.booleans())
def test_wellformed_through_cegar_steps(seed, traversal, scoped):
    (src,) = generate_programs(1, seed=seed)
    problem = problem_from_source(src)
    pi = ProgramPrecision()
    arg = ARG(problem, pi)
    for _ in range(30):
        out = reach(problem, arg, pi, traversal=traversal, budget=20_000)
        arg.check_wellformed()
        if out.exhausted:
            return
        path = extract_error_path(arg, out.target)
        if is_feasible(path).feasible:
            return
        found = refine(path)
        if scoped:
            found = scope_precision(found, problem.cfa)
        pi = pi | found
        prune_arg(arg, pi, path)
        arg.check_wellformed()


def test_custom_merge_operator_is_honoured():
    # merge-join instead of merge-sep: still sound on a small task
    def merge_join(v, w, precision):
        return join(v, w)

    def stop_join(v, reached, precision):
        return any(leq(v, w) for w in reached)

    problem = load_problem(CORPUS / "constant_guard_safe.ev")
    pi = ProgramPrecision.uniform(problem.cfa.locations, problem.cfa.variables)
    arg = ARG(problem, pi, ExplicitCPA(merge=merge_join, stop=stop_join))
    assert reach(problem, arg, pi).exhausted
    plain = ARG(problem, pi)
    reach(problem, plain, pi)
    assert len(arg.nodes) <= len(plain.nodes)


def test_dump_format(tmp_path):
    problem = ticks_loop()
    arg = ARG(problem, ProgramPrecision())
    reach(problem, arg, ProgramPrecision())
    out = tmp_path / "arg.dot"
    with open(out, "w") as fh:
        arg.dump(fh)
    lines = out.read_text().splitlines()
    assert lines[0] == "digraph ARG {" and lines[-1] == "}"
    node_lines = [l for l in lines if "[label=" in l and "->" not in l]
    edge_lines = [l for l in lines if "->" in l]
    assert len(node_lines) == len(arg.nodes)
    assert len(edge_lines) == sum(len(n.children) for n in arg.nodes.values()) + \
        sum(1 for n in arg.nodes.values() if n.covered_by is not None)
