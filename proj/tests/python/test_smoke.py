import json
import shutil
from pathlib import Path

import numpy as np
import pytest

import uidpipe

DATA = Path(__file__).resolve().parents[2] / "data"

SENTENCE = """# conversation_id = c1
# speaker = s1
# utterance_index = 0
1	I	I	PRON	_	_	2	nsubj	_	_
2	think	think	VERB	_	_	0	root	_	_
3	he	he	PRON	_	_	4	nsubj	_	_
4	left	leave	VERB	_	_	2	ccomp	_	_
5	.	.	PUNCT	_	_	2	punct	_	_

"""


def test_parse_conllu_round_trip():
    c = uidpipe.parse_conllu(SENTENCE)
    assert c["utterances"] == 1
    assert c["tokens"] == 5
    toks = c["conversations"]["c1"][0]["tokens"]
    assert toks[3][5] == "ccomp" and toks[3][4] == 2
    assert uidpipe.parse_conllu(c["conllu"])["conllu"] == c["conllu"]


def test_malformed_conllu_raises_data_error():
    with pytest.raises(uidpipe.DataError):
        uidpipe.parse_conllu("1\tI\tI\tPRON\t_\t_\t2\tnsubj\t_\t_\n\n")


def test_subcat_percentage():
    assert uidpipe.subcat_percentages([("know", 119678, 28664)]) == {"know": "23.95"}


def test_metrics():
    y = [1] * 3301 + [0] * 6699
    p = [0.3301] * len(y)
    assert uidpipe.log_loss(p, y) == pytest.approx(0.6346, abs=5e-4)
    assert uidpipe.f1(p, y) == 0.0
    aic, bic = uidpipe.aic_bic(100.0, 128, 236504)
    assert bic - aic == pytest.approx(128 * np.log(236504) - 256, abs=1e-9)
    assert uidpipe.surprisal(0.5) == pytest.approx(np.log(2))


def test_contrasts_shape():
    c = uidpipe.successive_difference_contrasts(4)
    assert c.shape == (4, 3)
    assert np.allclose(c.sum(axis=0), 0)


def test_pca_rank_one():
    rng = np.random.default_rng(0)
    x = np.outer(rng.normal(size=40), rng.normal(size=6))
    r = uidpipe.pca(x, 1)
    assert r["explained_variance_ratio"] == pytest.approx([1.0])


def test_lasso_zero_matches_least_squares():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(60, 4))
    y = x @ np.array([1.0, -2.0, 0.0, 0.5]) + 0.3 + rng.normal(scale=0.1, size=60)
    b0, b = uidpipe.lasso_fixed(x, y, 0.0)
    design = np.column_stack([np.ones(60), x])
    ref = np.linalg.lstsq(design, y, rcond=None)[0]
    assert b0 == pytest.approx(ref[0], abs=1e-6)
    assert np.allclose(b, ref[1:], atol=1e-6)


def test_glmm_small_fit():
    rng = np.random.default_rng(2)
    n, g = 600, 30
    groups = [f"s{i % g}" for i in range(n)]
    u = rng.normal(scale=1.0, size=g)
    x1 = rng.normal(size=n)
    eta = 0.2 + 0.8 * x1 + u[np.arange(n) % g]
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(int).tolist()
    x = np.column_stack([np.ones(n), x1])
    fit = uidpipe.fit_glmm(x, ["(Intercept)", "x1"], y, {"speaker": groups})
    assert fit["converged"]
    assert fit["beta"][1] == pytest.approx(0.8, abs=0.3)
    assert fit["wald"][1][0] == "x1"


def test_gvif_orthogonal():
    x = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    g = uidpipe.gvif(x, ["a", "b"], [("a", [0]), ("b", [1])])
    assert g["a"] == pytest.approx(1.0) and g["b"] == pytest.approx(1.0)


def test_binned_density_monotone():
    d = np.linspace(0, 5, 500)
    that = [1 if (i % 10) < (i // 50) else 0 for i in range(500)]
    r = uidpipe.binned_density(d.tolist(), that, 10)
    assert r["spearman"] == pytest.approx(1.0)


def test_mlp_cv_separable_small():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(300, 3))
    y = (x[:, 0] + x[:, 1] > 0).astype(int).tolist()
    r = uidpipe.train_mlp_cv(x, y, {"batch_size": 32, "max_epochs": 30, "seed": 5})
    assert r["f1"] > 0.85
    assert len(r["oof"]) == 300


def test_pipeline_stages(tmp_path):
    cfg = json.loads((DATA / "config.json").read_text())
    for key in ("corpus", "subcat_counts", "embeddings"):
        cfg[key] = str(DATA / cfg[key])
    cfg["lexicons"] = {k: str(DATA / v) for k, v in cfg["lexicons"].items()}
    cfg["output_dir"] = str(tmp_path / "out")
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    outs = uidpipe.run_stage("ingest", path)
    assert any(o.endswith("corpus.conllu") for o in outs)
    uidpipe.run_stage("extract", path)
    audit = json.loads((tmp_path / "out" / "exclusions.json").read_text())
    expected = json.loads((DATA / "expected_counts.json").read_text())
    assert audit["training"]["retained"] == expected["training"]["retained"]
    with pytest.raises(uidpipe.ConfigError):
        uidpipe.run_stage("density", path)
