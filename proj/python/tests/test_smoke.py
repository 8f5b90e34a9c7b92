import json
import os
from pathlib import Path

import pytest

import astveil

REPO = Path(os.environ.get("ASTVEIL_REPO", Path(__file__).resolve().parents[2]))

C_PROGRAM = "int f(int a) {\n    int b = a;\n    return b + 1;\n}\n"


def toy_program(i, cls):
    loop = (
        "    while (n < 10) {\n        n = n + 1;\n    }\n"
        if cls
        else "    for (int i = 0; i < 10; i++) {\n        n = n + i;\n    }\n"
    )
    return f"int f{i}(int n) {{\n    int k = {i};\n{loop}    k = k + n;\n    return k;\n}}\n"


def test_parse_and_tokens():
    graph = astveil.parse(C_PROGRAM, "c")
    kinds = [n[0] for n in graph["nodes"]]
    assert kinds[graph["root"]] == "translation_unit"
    assert "function_definition" in kinds
    assert not astveil.has_parse_error(C_PROGRAM, "c")
    assert astveil.has_parse_error("int f( {", "c")
    assert astveil.count_tokens("x = 1;", "c") == 4
    assert astveil.sexp("x = 1", "python").startswith("(module")
    with pytest.raises(astveil.UnsupportedLanguage):
        astveil.parse("x", "cobol")


def test_masks_and_cork():
    text = "if (false && (<MASK>)) { <MASK>; }"
    assert astveil.count_masks(text) == 2
    assert astveil.replace_masks(text, ["x", "y"]) == "if (false && (x)) { y; }"
    # Per-pattern product; set quality is the negated sum of these.
    assert astveil.cork_term(3, 2, 1, 5) == 3 * 2 + 1 * 5


def test_surrogate_victim_round_trip():
    texts = [toy_program(i, i % 2) for i in range(20)]
    labels = [i % 2 for i in range(20)]
    victim = astveil.SurrogateVictim.train(texts, labels, "c")
    assert victim.num_classes == 2
    correct = sum(victim.predict(t)[0] == y for t, y in zip(texts, labels))
    assert correct == len(texts)
    cls, probs = victim.predict(texts[0])
    assert abs(sum(probs) - 1.0) < 1e-9
    again = astveil.SurrogateVictim.from_json(victim.to_json())
    assert again.predict(texts[3]) == victim.predict(texts[3])


def test_surrogate_filler_output_parses():
    filler = astveil.SurrogateFiller("c", seed=4)
    masked = "int f(int a) {\n    if (false && (<MASK>)) { <MASK>; }\n    return a;\n}\n"
    fills = filler.fill(masked, n=3)
    assert 1 <= len(fills) <= 3
    for cand in fills:
        assert len(cand) == 2
        assert not astveil.has_parse_error(astveil.replace_masks(masked, cand), "c")
    assert filler.fill(masked, n=3) == astveil.SurrogateFiller("c", seed=4).fill(masked, n=3)


def test_pipeline_run(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    with open(corpus / "index.jsonl", "w") as index:
        for i in range(12):
            (corpus / f"u{i:02d}.c").write_text(toy_program(i, i % 2))
            index.write(json.dumps({"id": f"u{i:02d}", "path": f"u{i:02d}.c", "label": i % 2}) + "\n")
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps(
            {
                "language": "c",
                "corpus": "corpus",
                "output_dir": "out",
                "mining": {"k": 3, "max_edges": 3},
                "attack": {"max_queries": 60, "record_elapsed": False},
            }
        )
    )
    for command in ("probe", "mine", "attack"):
        assert astveil.run(command, str(config)) == 0
    out = tmp_path / "out"
    reports = [json.loads(line) for line in (out / "reports.jsonl").read_text().splitlines()]
    assert [r["unit_id"] for r in reports] == sorted(r["unit_id"] for r in reports)
    assert all(r["queries_used"] <= 60 for r in reports)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["attempted"] == 12

    assert astveil.run("attack", str(config), ["attack.max_queries=0"], limit=2) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["attempted"] == 2
    assert summary["asr"] == 0.0

    with pytest.raises(astveil.ConfigError):
        astveil.run("probe", str(config), ["language=cobol"])
    with pytest.raises(astveil.ConfigError):
        astveil.run("dance", str(config))
    with pytest.raises(astveil.Unavailable):
        astveil.run("probe", str(config), ["victim.kind=http", "victim.endpoint=http://127.0.0.1:1/v1"])


def test_protocol_fixtures_match_schema():
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads((REPO / "protocol.schema.json").read_text())
    fixtures = json.loads((REPO / "tests" / "fixtures" / "protocol_exchanges.json").read_text())
    exchanges = fixtures["exchanges"]
    assert len(exchanges) == 20

    def validator(name):
        return jsonschema.Draft202012Validator({"$ref": f"#/$defs/{name}", "$defs": schema["$defs"]})

    for ex in exchanges:
        kind = ex["route"].rsplit("/", 1)[-1]
        validator(f"{kind}_request").validate(json.loads(ex["request"]))
        if ex["expect"] == "ok":
            validator(f"{kind}_response").validate(json.loads(ex["response"]))
