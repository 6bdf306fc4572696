import pytest

from seqtag.corpus import parse_conll


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One visible line per acceptance criterion, whatever the capture mode."""
    rows = {}
    for outcome in ("passed", "failed", "skipped"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            if outcome != "skipped" and getattr(report, "when", "call") != "call":
                continue
            rows[nodeid.split("::")[-1]] = outcome.upper()
    if rows:
        terminalreporter.section("acceptance criteria")
        for name in sorted(rows):
            terminalreporter.write_line(f"{name}: {rows[name]}")

# Burmese sample sentence: one S-LOC and two two-token ORG entities.
SAMPLE_CONLL = """\
မန္တလေး	n	S-LOC
၌	ppm	O
ရန်ကုန်	n	B-ORG
တက္ကသိုလ်	n	E-ORG
လက်အောက်ခံ	n	O
ဆေးအတတ်သင်	n	B-ORG
ကောလိပ်	n	E-ORG
ရှိ	v	O
ခဲ့	part	O
သည်	ppm	O
"""


@pytest.fixture
def sample_text():
    return SAMPLE_CONLL


@pytest.fixture
def sample_corpus():
    return parse_conll(SAMPLE_CONLL, strict=True, name="sample")


@pytest.fixture
def sample_sentence(sample_corpus):
    return sample_corpus.sentences[0]
