import numpy as np
import pytest

import bitmimo as bm
from bitmimo.dictionary import build_dictionary


def test_ula_config_paper_scale():
    cfg = bm.make_ula_config(8, 12, 1e6, 9e-6)
    assert cfg.L == 9
    assert cfg.mnl == 864
    assert cfg.grid_size == 6912


def test_ula_degenerate_single_element():
    cfg = bm.make_ula_config(1, 1, 1e6, 1e-6)
    assert cfg.rx_pos[0] == 0 and cfg.tx_pos[0] == 0
    assert cfg.L == 1


def test_ula_positions_m2_n3():
    cfg = bm.make_ula_config(2, 3, 1e6, 3e-6)
    assert np.allclose(cfg.tx_pos, [0.0, 1.5])
    assert np.allclose(cfg.rx_pos, [0.0, 0.5, 1.0])


def test_ula_virtual_positions_distinct():
    cfg = bm.make_ula_config(3, 4, 1e6, 3e-6)
    virt = (cfg.tx_pos[:, None] + cfg.rx_pos[None, :]).ravel()
    assert len(np.unique(virt)) == cfg.mn


def test_reject_even_L():
    with pytest.raises(ValueError):
        bm.make_ula_config(2, 2, 1e6, 4e-6)  # B_h*T_0 = 4, even


def test_reject_nonpositive():
    with pytest.raises(ValueError):
        bm.make_ula_config(0, 2, 1e6, 3e-6)
    with pytest.raises(ValueError):
        bm.make_ula_config(2, 2, -1e6, 3e-6)
    with pytest.raises(ValueError):
        bm.make_ula_config(2, 2, 1e6, 3e-6, eta=0.0)


def test_random_array_deterministic_and_distinct():
    cfg1 = bm.make_random_array_config(np.random.default_rng(42), 4, 3, 1e6, 3e-6)
    cfg2 = bm.make_random_array_config(np.random.default_rng(42), 4, 3, 1e6, 3e-6)
    assert np.array_equal(cfg1.rx_pos, cfg2.rx_pos)
    assert np.array_equal(cfg1.tone_offsets, cfg2.tone_offsets)
    cfg3 = bm.make_random_array_config(np.random.default_rng(43), 4, 3, 1e6, 3e-6)
    assert not np.array_equal(cfg1.rx_pos, cfg3.rx_pos)


def test_random_array_tone_permutation():
    cfg = bm.make_random_array_config(np.random.default_rng(0), 8, 12, 1e6, 9e-6)
    normalized = cfg.tone_offsets / cfg.bandwidth + (8 + 1) / 2.0
    assert sorted(np.rint(normalized).astype(int).tolist()) == list(range(8))
    # offsets land on the half-integer grid {-4.5 .. +3.5}
    assert set(np.round(cfg.tone_offsets / cfg.bandwidth, 6)) <= {i - 4.5 for i in range(8)}


def test_random_array_positions_in_aperture():
    cfg = bm.make_random_array_config(np.random.default_rng(5), 4, 6, 1e6, 3e-6)
    assert cfg.rx_pos[0] == 0 and cfg.tx_pos[0] == 0
    assert np.all(cfg.rx_pos <= cfg.mn / 2) and np.all(cfg.rx_pos >= 0)
    assert np.all(cfg.tx_pos <= cfg.mn / 2) and np.all(cfg.tx_pos >= 0)


def test_sample_scene_gaussian_counts_and_power():
    cfg = bm.make_ula_config(2, 3, 1e6, 3e-6)
    rng = np.random.default_rng(1)
    draws = [bm.sample_scene(rng, 4, cfg) for _ in range(4000)]
    for sc in draws[:50]:
        assert sc.k == 4
        assert len(set(sc.cells(cfg).tolist())) == 4
    power = np.mean([np.abs(sc.alpha) ** 2 for sc in draws])
    assert abs(power - cfg.sigma_alpha_sq) < 0.05


def test_sample_scene_unit_modulus():
    cfg = bm.make_ula_config(2, 3, 1e6, 3e-6, sigma_alpha_sq=4.0)
    scene = bm.sample_scene(np.random.default_rng(2), 5, cfg, "unit_modulus")
    assert np.allclose(np.abs(scene.alpha), 2.0)


def test_sample_scene_edge_cases():
    cfg = bm.make_ula_config(2, 3, 1e6, 3e-6)
    empty = bm.sample_scene(np.random.default_rng(0), 0, cfg)
    assert empty.k == 0
    assert np.count_nonzero(bm.scene_to_sparse_vector(empty, cfg)) == 0
    full = bm.sample_scene(np.random.default_rng(0), cfg.grid_size, cfg)
    assert sorted(full.cells(cfg).tolist()) == list(range(cfg.grid_size))
    with pytest.raises(ValueError):
        bm.sample_scene(np.random.default_rng(0), cfg.grid_size + 1, cfg)


def test_sparse_vector_origin_cell():
    cfg = bm.make_ula_config(2, 3, 1e6, 3e-6)
    scene = bm.TargetScene(delay_idx=[0], angle_idx=[0], alpha=[1.0])
    a = bm.scene_to_sparse_vector(scene, cfg)
    assert a[0] == 1.0 and np.count_nonzero(a) == 1


def test_sparse_vector_index_arithmetic():
    # M=2, N=3, L=3 -> MN=6, ML=6; (l1=2, l2=5) lands at 2*6+5 = 17
    cfg = bm.make_ula_config(2, 3, 1e6, 3e-6)
    scene = bm.TargetScene(delay_idx=[2], angle_idx=[5], alpha=[1 + 2j])
    a = bm.scene_to_sparse_vector(scene, cfg)
    assert a[17] == 1 + 2j and np.count_nonzero(a) == 1


def test_scene_roundtrip_property():
    cfg = bm.make_ula_config(2, 3, 1e6, 3e-6)
    rng = np.random.default_rng(3)
    for _ in range(100):
        scene = bm.sample_scene(rng, int(rng.integers(1, 8)), cfg)
        back = bm.scene_from_sparse_vector(bm.scene_to_sparse_vector(scene, cfg), cfg)
        assert sorted(zip(scene.delay_idx, scene.angle_idx)) == \
            sorted(zip(back.delay_idx, back.angle_idx))
        order_a = np.argsort(scene.cells(cfg))
        order_b = np.argsort(back.cells(cfg))
        assert np.allclose(scene.alpha[order_a], back.alpha[order_b])


def test_scene_rejects_duplicate_cells():
    with pytest.raises(ValueError):
        bm.TargetScene(delay_idx=[1, 1], angle_idx=[2, 2], alpha=[1.0, 2.0])


def test_snr_to_noise_variance_values():
    cfg = bm.make_ula_config(2, 3, 1e6, 3e-6, sigma_alpha_sq=1.0)
    assert bm.snr_to_noise_variance(10.0, cfg, 4) == pytest.approx(0.1)
    assert bm.snr_to_noise_variance(1.0, cfg, 4) == pytest.approx(1.0)
    assert bm.snr_to_noise_variance(1e12, cfg, 4) == pytest.approx(0.0, abs=1e-11)
    with pytest.raises(ValueError):
        bm.snr_to_noise_variance(0.0, cfg, 4)


def test_snr_closed_form_monte_carlo_oracle():
    # E||Phi a||^2 / (K*MNL) should equal sigma_alpha_sq to < 1%, which makes
    # sigma_n_sq = sigma_alpha_sq/SNR realize the target SNR within 2%.
    cfg = bm.make_ula_config(2, 2, 1e6, 3e-6)
    d = build_dictionary(cfg)
    rng = np.random.default_rng(7)
    K, n = 3, 10000
    acc = 0.0
    for _ in range(n):
        sc = bm.sample_scene(rng, K, cfg)
        acc += np.linalg.norm(d.apply_cells(sc.cells(cfg), sc.alpha)) ** 2
    mean_energy = acc / n / (K * cfg.mnl)
    assert abs(mean_energy - cfg.sigma_alpha_sq) < 0.01 * cfg.sigma_alpha_sq
    snr = 10.0
    sigma_n = bm.snr_to_noise_variance(snr, cfg, K)
    empirical_snr = mean_energy * K * cfg.mnl / (cfg.mnl * K * sigma_n)
    assert abs(empirical_snr - snr) < 0.02 * snr


def test_config_json_roundtrip(tmp_path):
    import json
    from bitmimo.model import config_to_dict, load_config

    cfg = bm.make_random_array_config(np.random.default_rng(3), 3, 4, 1e6, 3e-6,
                                      eta=2.5, sigma_n_sq=0.3)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(config_to_dict(cfg)))
    back = load_config(path)
    assert back.M == cfg.M and back.N == cfg.N and back.L == cfg.L
    assert np.allclose(back.rx_pos, cfg.rx_pos)
    assert np.allclose(back.tone_offsets, cfg.tone_offsets)
    assert back.eta == cfg.eta and back.sigma_n_sq == cfg.sigma_n_sq
