"""Inference path tests: swap, occlusion pasting, progressive strips."""

import csv

import pytest
import torch

from faceswap_lab.config import TrainConfig
from faceswap_lab.data import load_image_png, make_corpus, make_pair_batch, make_sample
from faceswap_lab.sprites import sample_params
from faceswap_lab.swapping import occlusion_fuse, swap, swap_progressive
from faceswap_lab.trainer import init_state, train

TINY = dict(channels=(2, 4, 4, 4, 4), lmk_hidden=2, d_id=8, d_emb=8, batch=2,
            n_ids=3, per_id=2)


@pytest.fixture(scope="module")
def dataset():
    return make_corpus(3, 2, 64, seed=1)


@pytest.fixture(scope="module")
def trained(tmp_path_factory, dataset):
    cfg = TrainConfig(**TINY, iters=3, snapshot_iters=(1, 3), seed=0)
    out = tmp_path_factory.mktemp("run")
    return train(cfg, dataset, out)


def test_swap_returns_image_and_similarities(trained, dataset):
    src, tgt = dataset[0], dataset[2]
    res = swap(trained.state, src, tgt)
    assert res.image.shape == src.image.shape
    assert float(res.image.min()) >= -1.0 and float(res.image.max()) <= 1.0
    assert -1.0 <= res.similarity_to_src <= 1.0
    assert -1.0 <= res.similarity_to_tgt <= 1.0


def test_swap_accepts_checkpoint_path(trained, dataset):
    src, tgt = dataset[0], dataset[2]
    from_state = swap(trained.state, src, tgt)
    from_path = swap(trained.checkpoints[3], src, tgt)
    assert torch.equal(from_state.image, from_path.image)
    assert from_state.similarity_to_src == from_path.similarity_to_src


def test_swap_is_deterministic(trained, dataset):
    src, tgt = dataset[1], dataset[4]
    r1 = swap(trained.state, src, tgt)
    r2 = swap(trained.state, src, tgt)
    assert torch.equal(r1.image, r2.image)


def test_swap_validates_resolution(trained):
    a = make_sample(sample_params(50), 128, 128)
    b = make_sample(sample_params(51), 128, 128)
    with pytest.raises(ValueError, match="model expects"):
        swap(trained.state, a, b)
    c = make_sample(sample_params(52), 64, 64)
    with pytest.raises(ValueError, match="disagree"):
        swap(trained.state, a, c)


def test_occlusion_fuse_hand_oracle():
    syn = torch.full((1, 3, 2, 2), 0.5)
    tgt = torch.full((1, 3, 2, 2), -0.5)
    mask = torch.zeros(1, 1, 2, 2)
    mask[..., 0, :] = 1.0
    out = occlusion_fuse(syn, tgt, mask)
    assert torch.equal(out[..., 0, :], syn[..., 0, :])
    assert torch.equal(out[..., 1, :], tgt[..., 1, :])
    with pytest.raises(ValueError):
        occlusion_fuse(syn, torch.zeros(1, 3, 4, 4), mask)
    with pytest.raises(ValueError):
        occlusion_fuse(syn, tgt, torch.zeros(1, 1, 4, 4))


def test_swap_progressive_orders_checkpoints_and_writes_files(tmp_path, trained, dataset):
    src, tgt = dataset[0], dataset[3]
    # pass the later checkpoint first: output must still be iteration-ordered
    paths = [trained.checkpoints[3], trained.checkpoints[1]]
    strip, rows = swap_progressive(paths, src, tgt, out_dir=tmp_path)
    assert [r[0] for r in rows] == [1, 3]
    h, w = src.resolution
    assert strip.shape == (h, (2 + len(rows)) * w, 3)
    png = load_image_png(tmp_path / "progressive.png")
    assert png.shape == (1, 3, h, (2 + len(rows)) * w)
    with open(tmp_path / "progressive.csv") as fh:
        got = list(csv.DictReader(fh))
    assert [int(r["iter"]) for r in got] == [1, 3]
    for r, (_, s_src, s_tgt) in zip(got, rows):
        assert float(r["similarity_to_src"]) == s_src
        assert float(r["similarity_to_tgt"]) == s_tgt


def test_swap_progressive_panel_content_matches_individual_swaps(trained, dataset):
    src, tgt = dataset[1], dataset[5]
    strip, rows = swap_progressive([trained.checkpoints[1]], src, tgt)
    h, w = src.resolution
    from faceswap_lab.data import tensor_to_image
    import numpy as np
    assert np.array_equal(strip[:, :w], tensor_to_image(src.image))
    assert np.array_equal(strip[:, w:2 * w], tensor_to_image(tgt.image))
    res = swap(trained.checkpoints[1], src, tgt)
    assert np.array_equal(strip[:, 2 * w:], tensor_to_image(res.image))


def test_swap_progressive_requires_checkpoints():
    s = make_sample(sample_params(60), 64, 64)
    t = make_sample(sample_params(61), 64, 64)
    with pytest.raises(ValueError, match="at least one"):
        swap_progressive([], s, t)
