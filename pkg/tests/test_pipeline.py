import csv
import math
from dataclasses import replace

import numpy as np
import pytest
import torch

from sgir.errors import DimensionMismatch, NonFiniteGradient, ValidationError
from sgir.geometry import build_octree, standard_scene
from sgir.oracle import Camera, make_dataset
from sgir.pipeline import (
    DEFAULT_LR_SCALES, FieldConfig, LossReport, SceneModel, StageConfig, albedo_mae, align_channel_scale,
    blend_eta, deshadow_render, fit_env, indirect_l1, indirect_pool, kl_divergence, latent_kl, matching_lobes,
    metrics, normal_angular_error, normal_loss, pixel_pool, psnr, render_view, rve_loss, run_gradchecks,
    shade_batch, shadow_albedo_gap, stage_decompose, stage_indirect, stage_normals, stage_visibility,
    surface_pool, visibility_bce
)
from sgir.shading import EquirectMap
from sgir.util.sampling import DTYPE

TINY_FIELDS = FieldConfig(normal_resolution=4, visibility_resolution=4, codebook_size=8, indirect_resolution=2,
                          indirect_lobes=4, qtilde_resolution=4, material_resolution=4, latent_channels=2,
                          env_lobes=8)
KL_FLOOR = 0.0094888


def tiny_model(seed=0):
    return SceneModel(standard_scene().bbox, TINY_FIELDS, seed=seed)


def tiny_stage(**overrides):
    values = dict(epochs=1, batch_size=32, chunk_size=16, surface_samples=32, directions_per_point=2,
                  eta_samples=2, indirect_spp=2, rve_warmup_epochs=1)
    values.update(overrides)
    return StageConfig.from_dict(values)


def test_stage_config_defaults():
    """Test an empty config gives the documented defaults."""
    cfg = StageConfig.from_dict(None)
    assert cfg.lr == 5e-4
    assert (cfg.weight_rgb, cfg.weight_sm, cfg.weight_kl, cfg.weight_rve) == (1.0, 0.01, 0.001, 0.01)
    assert cfg.lr_scales == DEFAULT_LR_SCALES
    assert cfg.eta_samples == 64
    assert cfg.finetune_normals and cfg.normals_finetune_scale == 0.1


def test_stage_config_merges_lr_scales():
    """Test partial lr_scales override only the named slices."""
    cfg = StageConfig.from_dict({"lr_scales": {"env": 1.0}, "gamma_range": [0.1, 0.9]})
    assert cfg.lr_scales["env"] == 1.0
    assert cfg.lr_scales["normals"] == DEFAULT_LR_SCALES["normals"]
    assert cfg.gamma_range == (0.1, 0.9)


@pytest.mark.parametrize("data", [
    {"epoch": 3},
    {"weight_kl": -1.0},
    {"gamma_range": [0.5, 0.2]},
    {"tone_curve": "reinhard"},
    {"chunk_size": 0},
    {"lr_scales": {"env": -1.0}},
    {"normals_finetune_scale": -0.5},
    [1, 2],
])
def test_stage_config_rejects(data):
    """Test unknown keys and out-of-range values are rejected."""
    with pytest.raises(ValidationError):
        StageConfig.from_dict(data)


def test_field_config_rejects():
    """Test a codebook smaller than the octahedron is rejected."""
    with pytest.raises(ValidationError):
        FieldConfig.from_dict({"codebook_size": 2})
    with pytest.raises(ValidationError):
        FieldConfig.from_dict({"resolution": 8})


def test_kl_divergence_floor():
    """Test KL(1e-4 || 0.01), the value of the clamped zero residual."""
    assert kl_divergence(1e-4, 0.01).item() == pytest.approx(KL_FLOOR, rel=1e-4)
    assert kl_divergence(0.3, 0.3).item() == 0.0


def test_latent_kl_zero_at_target_mean():
    """Test the sparsity term vanishes when every channel mean equals rho."""
    z = torch.full((10, 4), 0.05, dtype=DTYPE)
    assert latent_kl(z, 0.05).item() == pytest.approx(0.0, abs=1e-15)
    assert latent_kl(torch.full((10, 4), 0.5, dtype=DTYPE), 0.05).item() > 0.0


def test_visibility_bce_clamped():
    """Test confident wrong predictions give a large but finite loss."""
    loss = visibility_bce(torch.tensor([0.0, 1.0], dtype=DTYPE), torch.tensor([1.0, 0.0], dtype=DTYPE))
    assert math.isfinite(loss.item())
    assert loss.item() == pytest.approx(-math.log(1e-6), rel=1e-6)


def test_normal_and_indirect_losses():
    """Test the normal and L1 losses on hand-computed inputs."""
    n = torch.tensor([[0.0, 0.0, 1.0]], dtype=DTYPE)
    assert normal_loss(n, n, n).item() == 0.0
    assert normal_loss(n, -n, n).item() == pytest.approx(4.0)
    assert indirect_l1(torch.zeros(2, 3, dtype=DTYPE), torch.ones(2, 3, dtype=DTYPE)).item() == pytest.approx(3.0)


def test_rve_loss_values():
    """Test the RVE loss at zero residual and at a residual of epsilon."""
    eta = torch.tensor([[0.2, 0.7]], dtype=DTYPE)
    assert rve_loss(eta, eta, 0.01).item() == pytest.approx(KL_FLOOR, rel=1e-4)
    assert rve_loss(eta + 0.01, eta, 0.01).item() == pytest.approx(0.0, abs=1e-12)


def test_rve_loss_reaches_both_inputs():
    """Test gradients flow to the prior and to the ratios."""
    q = torch.tensor([0.5, 0.2], dtype=DTYPE, requires_grad=True)
    eta = torch.tensor([0.3, 0.6], dtype=DTYPE, requires_grad=True)
    rve_loss(q, eta).backward()
    assert bool((q.grad != 0).all())
    assert torch.allclose(q.grad, -eta.grad)


def test_blend_eta_clamps_prior():
    """Test the blended ratio averages eta with the clamped prior."""
    blended = blend_eta(torch.tensor([0.2, 0.4], dtype=DTYPE), torch.tensor([1.5, -0.2], dtype=DTYPE))
    assert torch.allclose(blended, torch.tensor([0.6, 0.2], dtype=DTYPE))


def test_matching_lobes():
    """Test lobe identity ignores amplitudes but not counts."""
    env = tiny_model().env_mixture()
    assert matching_lobes(env, env.scaled(3.0))
    other = SceneModel(standard_scene().bbox, replace(TINY_FIELDS, env_lobes=16))
    assert not matching_lobes(other.env_mixture(), env)


def test_loss_report():
    """Test step counting, epoch means and lookups."""
    report = LossReport("normals")
    report.record(0, 0, {"normal": 1.0, "total": 1.0}, 0.5)
    report.record(0, 1, {"total": 3.0}, 0.1)
    report.record(1, 2, {"total": 5.0}, 0.2)
    assert report.steps == 3
    assert report.names() == ["normal", "total", "grad_norm"]
    assert report.epoch_means() == [2.0, 5.0]
    assert report.last() == 5.0
    assert report.running_mean("total", window=2) == 4.0
    assert math.isnan(report.last("kl"))


def test_loss_report_rejects_non_finite():
    """Test a NaN loss raises NonFiniteGradient and is not recorded."""
    report = LossReport("visibility")
    with pytest.raises(NonFiniteGradient):
        report.record(0, 0, {"total": float("nan")}, 1.0)
    with pytest.raises(NonFiniteGradient):
        report.record(0, 0, {"total": 1.0}, float("inf"))
    assert report.steps == 0


def test_loss_report_csv(tmp_path):
    """Test the CSV has one row per step under a shared header."""
    report = LossReport("decompose")
    report.record(0, 0, {"rgb": 0.5, "total": 0.5}, 1.0)
    report.record(0, 1, {"rgb": 0.25, "rve": 0.1, "total": 0.35}, 1.0)
    path = tmp_path / "loss.csv"
    report.to_csv(path)
    with open(path, newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 2
    assert list(rows[0]) == ["epoch", "step", "rgb", "total", "grad_norm", "rve"]
    assert rows[0]["rve"] == ""
    assert float(rows[1]["rve"]) == 0.1


def test_scene_model_initial_state():
    """Test the initial gamma and the slice layout."""
    model = tiny_model()
    assert model.gamma() == pytest.approx(0.5, rel=1e-12)
    for name in ("normals", "visibility", "indirect", "qtilde", "material", "env", "gamma_logit"):
        assert name in model.store
    assert model.store.slices["env"].lr_scale == DEFAULT_LR_SCALES["env"]


def test_scene_model_lr_scales():
    """Test configured scales reach the slices and unnamed slices keep their defaults."""
    scales = StageConfig.from_dict({"lr_scales": {"env": 0.0, "normals": 0.0}}).lr_scales
    model = SceneModel(standard_scene().bbox, TINY_FIELDS, lr_scales=scales)
    assert model.store.slices["env"].lr_scale == 0.0
    assert model.store.slices["normals"].lr_scale == 0.0
    assert model.store.slices["visibility"].lr_scale == DEFAULT_LR_SCALES["visibility"]


def test_stage_applies_lr_scales():
    """Test each stage applies its own lr_scales before training."""
    model = tiny_model()
    stage_normals(standard_scene(), model, tiny_stage(epochs=0, lr_scales={"env": 0.0, "normals": 3.0}))
    assert model.store.slices["env"].lr_scale == 0.0
    assert model.store.slices["normals"].lr_scale == 3.0
    stage_normals(standard_scene(), model, tiny_stage(epochs=0))
    assert model.store.slices["env"].lr_scale == DEFAULT_LR_SCALES["env"]


def test_zero_lr_scale_freezes_slice():
    """Test a slice with scale zero stays put while its stage trains."""
    model = tiny_model()
    before = model.store.value("normals")
    report = stage_normals(standard_scene(), model, tiny_stage(lr_scales={"normals": 0.0}))
    assert report.steps == 1
    assert torch.equal(model.store.value("normals"), before)


def test_scene_model_train_only():
    """Test train_only freezes every other slice."""
    model = tiny_model()
    model.train_only("normals", "env")
    trainable = {name for name, s in model.store.slices.items() if s.trainable}
    assert trainable == {"normals", "env"}


def test_scene_model_save_load(tmp_path):
    """Test a checkpoint restores every slice."""
    model = tiny_model()
    model.store.set_value("gamma_logit", torch.tensor([1.5], dtype=DTYPE))
    model.store.set_value("env", model.store.value("env") * 2.0)
    path = tmp_path / "model.sgirf"
    model.save(path)
    again = tiny_model(seed=1).load(path)
    for name, value in model.store.state_dict().items():
        assert torch.equal(again.store.value(name), value)


def test_scene_model_load_wrong_shape(tmp_path):
    """Test a checkpoint from other field sizes is rejected."""
    path = tmp_path / "model.sgirf"
    tiny_model().save(path)
    with pytest.raises(ValidationError):
        SceneModel(standard_scene().bbox, replace(TINY_FIELDS, normal_resolution=5)).load(path)


def test_stage_normals_zero_epochs():
    """Test zero epochs leave the +z initialization untouched."""
    model = tiny_model()
    report = stage_normals(standard_scene(), model, tiny_stage(epochs=0))
    assert report.steps == 0
    n = model.normals.evaluate(torch.zeros(2, 3, dtype=DTYPE))
    assert torch.allclose(n, torch.tensor([[0.0, 0.0, 1.0]] * 2, dtype=DTYPE))


def test_stage_normals_reduces_loss():
    """Test the normal loss falls and only the normal slice moves."""
    scene = standard_scene()
    model = tiny_model()
    before = model.store.state_dict()
    report = stage_normals(scene, model, tiny_stage(epochs=4, surface_samples=64))
    assert report.steps == 8
    means = report.epoch_means()
    assert means[-1] < means[0]
    after = model.store.state_dict()
    assert not torch.equal(after["normals"], before["normals"])
    for name in before:
        if name != "normals":
            assert torch.equal(after[name], before[name])


def test_stage_normals_thread_independent():
    """Test the thread count does not change the trained values."""
    scene = standard_scene()
    pool = surface_pool(scene, 64, 0, 1)
    a = tiny_model()
    b = tiny_model()
    stage_normals(scene, a, tiny_stage(epochs=2, threads=1), pool)
    stage_normals(scene, b, tiny_stage(epochs=2, threads=3), pool)
    assert torch.equal(a.store.flat, b.store.flat)


def test_stage_visibility_runs():
    """Test the visibility stage records finite losses on traced labels."""
    scene = standard_scene()
    model = tiny_model()
    before = model.store.value("visibility")
    report = stage_visibility(scene, build_octree(scene, 5), model, tiny_stage(epochs=2))
    assert report.steps == 4
    assert all(math.isfinite(v) for v in report.epoch_means())
    assert not torch.equal(model.store.value("visibility"), before)


def test_indirect_pool_targets():
    """Test escaping rays carry zero radiance and targets are LDR."""
    scene = standard_scene()
    pool = indirect_pool(scene, build_octree(scene, 5), tiny_stage())
    assert len(pool) == 64
    assert bool(((pool.ldr >= 0.0) & (pool.ldr <= 1.0)).all())
    assert np.array_equal(pool.ldr[~pool.occluded], np.zeros((int((~pool.occluded).sum()), 3)))


def test_stage_indirect_unmasked():
    """Test the unmasked variant supervises every ray."""
    scene = standard_scene()
    model = tiny_model()
    report = stage_indirect(scene, build_octree(scene, 5), model, tiny_stage(masked_indirect=False))
    assert report.steps == 2
    assert "indirect" in report.names()


def tiny_dataset(scene, octree):
    return make_dataset(scene, 1, spp=2, gamma_gt=0.2, seed=0, width=8, height=8, octree=octree)


def test_stage_decompose_terms():
    """Test the decomposition records every loss term and leaves the indirect field alone."""
    scene = standard_scene()
    octree = build_octree(scene, 5)
    dataset = tiny_dataset(scene, octree)
    model = tiny_model()
    before = model.store.state_dict()
    report = stage_decompose(dataset, scene, octree, model, tiny_stage(epochs=2))
    assert report.steps > 0
    assert {"rgb", "smooth", "kl", "rve", "total"} <= set(report.names())
    after = model.store.state_dict()
    assert torch.equal(after["indirect"], before["indirect"])
    assert not torch.equal(after["env"], before["env"])


def test_stage_decompose_finetunes_normals():
    """Test the decomposition moves the normals at a reduced scale unless disabled."""
    scene = standard_scene()
    octree = build_octree(scene, 5)
    dataset = tiny_dataset(scene, octree)
    model = tiny_model()
    before = model.store.value("normals")
    stage_decompose(dataset, scene, octree, model, tiny_stage())
    assert not torch.equal(model.store.value("normals"), before)
    assert model.store.slices["normals"].lr_scale == pytest.approx(0.1 * DEFAULT_LR_SCALES["normals"])
    frozen = tiny_model()
    stage_decompose(dataset, scene, octree, frozen, tiny_stage(finetune_normals=False))
    assert torch.equal(frozen.store.value("normals"), before)


def test_stage_decompose_kl_over_whole_batch():
    """Test the sparsity term takes its channel means over the whole batch, not per chunk."""
    scene = standard_scene()
    octree = build_octree(scene, 5)
    dataset = tiny_dataset(scene, octree)
    pool = pixel_pool(dataset, scene, octree)
    model = tiny_model()
    size = model.store.slices["material"].size
    model.store.set_value("material", torch.from_numpy(np.random.default_rng(3).normal(size=size)))
    cfg = tiny_stage(batch_size=4096, chunk_size=4)
    with torch.no_grad():
        z = model.material.latent_code(torch.from_numpy(pool.points))
        expected = cfg.weight_kl * latent_kl(z, cfg.rho).item()
    report = stage_decompose(dataset, scene, octree, model, cfg, pool=pool)
    assert report.steps == 1
    assert report.rows[0]["kl"] == pytest.approx(expected, rel=1e-9)


def test_stage_decompose_without_rve():
    """Test the ablation without RVE trains neither prior nor visibility."""
    scene = standard_scene()
    octree = build_octree(scene, 5)
    model = tiny_model()
    before = model.store.state_dict()
    report = stage_decompose(tiny_dataset(scene, octree), scene, octree, model, tiny_stage(rve=False))
    assert "rve" not in report.names()
    after = model.store.state_dict()
    assert torch.equal(after["qtilde"], before["qtilde"])
    assert torch.equal(after["visibility"], before["visibility"])


def test_shade_batch_ranges():
    """Test shaded colors are LDR and deshadowing sets every ratio to one."""
    model = tiny_model()
    x = torch.tensor([[0.0, 1.0, 0.0], [0.5, -1.0, 0.5]], dtype=DTYPE)
    wo = torch.tensor([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]], dtype=DTYPE)
    shaded = shade_batch(model, x, wo, tiny_stage())
    assert shaded.ldr.shape == (2, 3)
    assert bool(((shaded.ldr >= 0.0) & (shaded.ldr <= 1.0)).all())
    assert shaded.qtilde is not None
    free = shade_batch(model, x, wo, tiny_stage(), deshadow=True)
    assert torch.equal(free.eta, torch.ones(2, 8, dtype=DTYPE))
    assert free.qtilde is None


def test_render_view_and_deshadow():
    """Test the background stays black and removing shadows never darkens a pixel."""
    scene = standard_scene()
    octree = build_octree(scene, 5)
    camera = Camera((0.0, 1.0, -3.5), width=6, height=6)
    model = tiny_model()
    cfg = tiny_stage()
    rendered = render_view(model, scene, octree, camera, cfg)
    assert rendered.mask.any()
    assert np.array_equal(rendered.image.data[~rendered.mask], np.zeros((int((~rendered.mask).sum()), 3)))
    assert rendered.image.is_ldr
    free = deshadow_render(model, scene, octree, camera, cfg)
    assert bool((free.data >= rendered.image.data - 1e-12).all())


def test_fit_env_improves():
    """Test optimizing the lobes lowers the error of the initial guess."""
    env_map = EquirectMap(np.ones((8, 16, 3)))
    _, initial = fit_env(env_map, lobes=32, steps=0, samples=500)
    fitted, error = fit_env(env_map, lobes=32, steps=50, samples=500)
    assert fitted.count == 32
    assert error < initial


def test_psnr_values():
    """Test the sentinel, 20 dB and 0 dB cases."""
    zeros = np.zeros((4, 4, 3))
    assert psnr(zeros, zeros) == 99.0
    assert psnr(np.full((4, 4, 3), 0.1), zeros) == pytest.approx(20.0)
    assert psnr(np.ones((4, 4, 3)), zeros) == pytest.approx(0.0)


def test_metrics_shape_mismatch():
    """Test images of different sizes are rejected."""
    with pytest.raises(DimensionMismatch):
        metrics(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


def test_metrics_mae():
    """Test MAE next to PSNR."""
    scores = metrics(np.full((2, 2, 3), 0.25), np.full((2, 2, 3), 0.75))
    assert scores["mae"] == pytest.approx(0.5)
    assert scores["psnr"] == pytest.approx(-10.0 * math.log10(0.25))


def test_albedo_alignment():
    """Test a per-channel scaled albedo aligns to zero error."""
    gt = np.random.default_rng(0).uniform(0.1, 0.9, size=(4, 4, 3))
    pred = gt * np.array([0.5, 2.0, 1.5])
    assert np.allclose(align_channel_scale(pred, gt), gt)
    assert albedo_mae(pred, gt) == pytest.approx(0.0, abs=1e-12)


def test_shadow_albedo_gap():
    """Test the gap averages materials seen both in and out of shadow."""
    gt = np.zeros((2, 2, 3))
    gt[:, 1] = 1.0
    pred = np.array([[[0.2] * 3, [0.9] * 3], [[0.4] * 3, [0.9] * 3]])
    shadow = np.array([[True, True], [False, False]])
    valid = np.ones((2, 2), dtype=bool)
    assert shadow_albedo_gap(pred, gt, shadow, valid) == pytest.approx(0.1)
    assert math.isnan(shadow_albedo_gap(pred, gt, np.zeros((2, 2), dtype=bool), valid))


def test_normal_angular_error():
    """Test orthogonal normals are ninety degrees apart."""
    assert normal_angular_error([[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]]) == pytest.approx(90.0)
    assert normal_angular_error([[0.0, 1.0, 0.0]], [[0.0, 1.0, 0.0]]) == pytest.approx(0.0)


def test_gradchecks_pass_on_geometry_stages():
    """Test analytic gradients of the normal and visibility losses match finite differences."""
    reports = run_gradchecks(tiny_model(), standard_scene(), tiny_stage(), coords=8, only=("normals", "visibility"))
    assert set(reports) == {"normals", "visibility"}
    for report in reports.values():
        assert report.passed, report.format()
