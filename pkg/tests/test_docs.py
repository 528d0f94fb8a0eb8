from ata.flow import discover_task_flow
from ata.ingest import load_trace_file, validate_trace

from conftest import REPO


def test_trace_format_example_is_valid():
    trace = load_trace_file(REPO / "docs" / "examples" / "one-plus-one.log").primary()
    assert validate_trace(trace) == []
    flow = discover_task_flow(trace)
    assert sorted(flow.nodes) == ["T", "T.1", "T.parse"]
    assert flow.dependency_edges() == [("T.parse", "T.1")]


def test_readme_python_example_runs(capsys):
    text = (REPO / "README.md").read_text()
    block = text.split("```python\n", 1)[1].split("```", 1)[0]
    exec(compile(block, "README.md", "exec"), {"__name__": "readme"})
    out = capsys.readouterr().out
    assert out.startswith('digraph "task_flow"')
    assert "task_count=3" in out


def test_every_doc_link_resolves():
    import re

    for md in [REPO / "README.md", *sorted((REPO / "docs").glob("*.md"))]:
        for target in re.findall(r"\]\(([^)#]+\.md)\)", md.read_text()):
            assert (md.parent / target).exists(), f"{md.name} links missing {target}"
