"""Smoke test for the Python bindings. Run after `maturin develop` (or with the
built extension on PYTHONPATH)."""

import math
import os
import tempfile

import sentibench_py as sb


def main():
    # "yg" expands to the stopword "yang", which is then dropped
    assert sb.preprocess("yg http://x.y BAGUS!!") == ["bagus"]
    assert sb.param_count(10_000) == 1_387_267

    corpus = sb.synthetic_corpus(300, 7)
    texts = [t for t, _ in corpus]
    labels = [l for _, l in corpus]
    train, val, test = sb.stratified_split(labels, (0.8, 0.1, 0.1), 7)
    assert len(train) + len(val) + len(test) == 300
    assert not set(train) & set(test)

    model = sb.train("logistic", [texts[i] for i in train], [labels[i] for i in train], seed=7)
    preds = model.predict([texts[i] for i in test])
    assert len(preds) == len(test)
    for p in preds:
        assert math.isclose(sum(p["probabilities"].values()), 1.0, rel_tol=1e-9)
    report = sb.evaluate([labels[i] for i in test], [p["label"] for p in preds])
    assert report["accuracy"] > 0.8, report

    empty = model.predict([""])[0]
    assert empty["no_signal"] and empty["label"] == "neutral"

    svm = sb.train("svm", texts, labels, options=[("svm.epochs", "20")])
    assert svm.predict(["bagus"])[0]["probabilities"] is None

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "m.sentib")
        model.save(path)
        again = sb.Model.load(path)
        assert again.family == "logistic"
        assert again.predict(texts[:20]) == model.predict(texts[:20])

    try:
        sb.train("logistic", ["a"], ["angry"])
    except ValueError:
        pass
    else:
        raise AssertionError("bad label accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
