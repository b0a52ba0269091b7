import hashlib

from pded.expr import parse_equation
from pded.prompt import (
    EMPTY_HISTORY_LINE,
    build_prompt,
    format_history,
    render_task,
)


def E(text):
    return parse_equation(text)


class TestFormatHistory:
    def test_dedup_keeps_best_score(self):
        hist = [(E("u_t = u"), 0.5), (E("u_t = u"), 0.7)]
        out = format_history(hist, top_n=5)
        assert out == "Eq: u_t = u | Score: 0.7000"

    def test_empty_history_placeholder(self):
        assert format_history([], top_n=5) == EMPTY_HISTORY_LINE

    def test_truncates_and_sorts(self):
        hist = [(E(f"u_t = u^{k}"), 0.1 * k) for k in range(1, 5)]
        hist += [(E(f"u_t = u_x^{k}"), 0.05 * k) for k in range(1, 5)]
        hist += [(E("u_t = u_xx"), 0.33), (E("u_t = u_xxx"), 0.21)]
        out = format_history(hist, top_n=5).splitlines()
        assert len(out) == 5
        scores = [float(line.rsplit(" ", 1)[1]) for line in out]
        assert scores == sorted(scores, reverse=True)

    def test_tie_prefers_earlier_discovery(self):
        hist = [(E("u_t = u_x"), 0.5), (E("u_t = u"), 0.5)]
        out = format_history(hist, top_n=2).splitlines()
        assert out[0] == "Eq: u_t = u_x | Score: 0.5000"

    def test_lines_round_trip_through_parser(self):
        hist = [(E("u_t = u*u_x + 0.5*u_xx"), 0.9131)]
        line = format_history(hist, top_n=1)
        skeleton = line[len("Eq: "):].split(" | Score:")[0]
        assert parse_equation(skeleton) == hist[0][0]

    def test_top_n_zero(self):
        assert format_history([(E("u_t = u"), 1.0)], top_n=0) == ""


class TestBuildPrompt:
    def test_exact_concatenation(self):
        parts = build_prompt("A", "B", "C")
        assert parts.rendered == "A\n\nB\n\nC"

    def test_sha_matches_payload(self):
        parts = build_prompt("task", "hist", "strat")
        expected = hashlib.sha256("task\n\nhist\n\nstrat".encode()).digest()
        assert parts.sha256 == expected
        assert parts.sha256_hex == expected.hex()

    def test_identical_inputs_identical_digest(self):
        a = build_prompt("t", "h", "s")
        b = build_prompt("t", "h", "s")
        assert a.sha256 == b.sha256

    def test_only_text_matters_not_strategy_id(self):
        # two bank entries with the same text produce the same bytes
        a = build_prompt("t", "h", "do the thing")
        b = build_prompt("t", "h", "do the thing")
        assert a.rendered == b.rendered

    def test_strategy_text_appears_once_and_last(self):
        parts = build_prompt("context", "history", "INSTRUCTION")
        assert parts.rendered.count("INSTRUCTION") == 1
        assert parts.rendered.endswith("INSTRUCTION")


class TestRenderTask:
    def test_mentions_dataset_and_format(self):
        task = render_task("burgers", 5)
        assert "burgers" in task
        assert "u_t = " in task
        assert "5" in task

    def test_lists_all_factors(self):
        task = render_task("fisher", 3)
        for atom in ("u_x", "u_xx", "u_xxx", "1/x", "sin(u)", "exp(u)"):
            assert atom in task

    def test_deterministic(self):
        assert render_task("divide", 4) == render_task("divide", 4)
