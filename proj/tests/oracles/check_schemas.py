"""Runs every JSON-emitting slcnn command on a small synthetic corpus and
validates the output against docs/schemas.

usage: check_schemas.py SLCNN_BINARY SCHEMA_DIR
Exit 77 when the jsonschema package is unavailable.
"""
import json
import os
import random
import subprocess
import sys
import tempfile

try:
    import jsonschema
except ImportError:
    print("jsonschema not installed", file=sys.stderr)
    sys.exit(77)


def write_corpus(path, n, classes, seed):
    rng = random.Random(seed)
    with open(path, "w", encoding="utf-8") as f:
        for i in range(n):
            c = i % classes
            words = " ".join(f"topic{c}w{rng.randint(0, 5)}" for _ in range(rng.randint(2, 8)))
            f.write(f'"{c + 1}","Title {i}","Topic{c} {words}. Second sentence with {words}!"\n')


def main():
    binary, schema_dir = sys.argv[1], sys.argv[2]
    schemas = {}
    for name in os.listdir(schema_dir):
        with open(os.path.join(schema_dir, name), encoding="utf-8") as f:
            schemas[name[: -len(".json")]] = json.load(f)

    failures = 0

    def check(schema, document, what):
        nonlocal failures
        validator = jsonschema.Draft202012Validator(schemas[schema], format_checker=jsonschema.FormatChecker())
        errors = sorted(validator.iter_errors(document), key=lambda e: list(e.path))
        for e in errors:
            print(f"FAIL {what}: {'/'.join(map(str, e.path))}: {e.message}")
        failures += bool(errors)
        if not errors:
            print(f"ok   {what}")

    def run(*args, expect=0):
        r = subprocess.run([binary, *args], capture_output=True, text=True)
        if r.returncode != expect:
            raise SystemExit(f"slcnn {' '.join(args)} exited {r.returncode}: {r.stderr}")
        return json.loads(r.stdout)

    with tempfile.TemporaryDirectory() as d:
        train = os.path.join(d, "train.csv")
        test = os.path.join(d, "test.csv")
        write_corpus(train, 40, 3, 1)
        write_corpus(test, 9, 3, 2)
        model = os.path.join(d, "m.slcn")
        report = os.path.join(d, "report.json")

        check("corpus_stats", run("stats", "--input", train, "--input", test), "stats")
        out = run("train", "--train", train, "--test", test, "--embeddings", "none", "--td", "3", "--filters", "4",
                  "--epochs", "2", "--out", model, "--report", report, "--quiet")
        check("train_report", out, "train stdout")
        with open(report, encoding="utf-8") as f:
            check("train_report", json.load(f), "train --report file")
        with open(model + ".manifest.json", encoding="utf-8") as f:
            check("run_manifest", json.load(f), "train manifest")
        check("eval", run("eval", "--model", model, "--input", test), "eval")
        check("predict", run("predict", "--model", model, "--text", "Topic1 topic1w2 here. And more."), "predict")
        check("params", run("params"), "params")
        check("params", run("params", "--table"), "params --table")
        check("grad_check", run("gradcheck", "--td", "2", "--filters", "2", "--fc", "4", "--classes", "2",
                                "--embed-dim", "5"), "gradcheck")
        grids = os.path.join(d, "g.slcg")
        check("preprocess", run("preprocess", "--input", train, "--out", grids, "--td", "3"), "preprocess")
        with open(grids + ".manifest.json", encoding="utf-8") as f:
            check("run_manifest", json.load(f), "preprocess manifest")
        check("rerun", run("rerun", "--manifest", model + ".manifest.json", "--verify"), "rerun --verify")

    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
