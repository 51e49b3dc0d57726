"""Smoke test for the faultbench_py extension.

Build and install first:

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/faultbench_py-*.whl
"""

import json

import faultbench_py as fb


def main():
    clean = fb.Dataset.generate(n=1000, defect_fraction=0.0, seed=7)
    assert len(clean) == 1000 and clean.class_counts() == (0, 1000)

    data, replaced = fb.inject(clean, 0.10, seed=7)
    assert len(replaced) == 100 and data.class_counts() == (100, 900)

    ref = fb.Dataset.generate()
    assert "54.000" in ref.profile() and "5343.000" in ref.profile()
    again = fb.Dataset.from_csv(ref.to_csv(), ref.schema_json())
    assert again.rows() == ref.rows() and again.labels() == ref.labels()

    model = fb.train("c5", ref)
    rows = ref.rows()
    labels = ref.labels()
    proba = model.predict_proba(rows)
    assert all(0.0 <= p <= 1.0 for p in proba)
    predicted = model.predict(rows)
    accuracy = sum(p == y for p, y in zip(predicted, labels)) / len(labels)
    assert accuracy >= 0.95, accuracy

    rules = model.rules(ref)
    assert rules.apply(rows) == predicted
    prose = rules.to_prose()
    assert "then the part is normal" in prose
    print(prose)

    auc = fb.roc_auc(proba, labels)
    assert 0.5 < auc <= 1.0, auc

    report = fb.compare(ref)
    accuracies = dict(report.accuracies())
    assert len(accuracies) == 7 and min(accuracies.values()) >= 0.75, accuracies
    assert len(json.loads(report.to_json())["rows"]) == 7
    print(report.render_text())

    try:
        fb.train("forest", ref)
    except ValueError as err:
        assert "forest" in str(err)
    else:
        raise AssertionError("unknown kind accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
