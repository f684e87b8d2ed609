"""
The ``sgir`` command line.

Exit status: 0 on success, 1 for invalid input (bad config, malformed file,
missing file, usage error), 2 for any other failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import torch

from sgir.config import load_run_config, read_json
from sgir.errors import ParseError, SgirError, ValidationError
from sgir.geometry.octree import build_octree, load_octree, save_octree
from sgir.geometry.tracing import compare_tracers, random_rays
from sgir.io.image import ImageBuffer
from sgir.io.pfm import read_pfm, write_pfm
from sgir.io.png import read_png, write_png
from sgir.oracle.dataset import load_dataset, make_dataset, save_dataset
from sgir.pipeline.apps import deshadow_render, relight_render, render_view
from sgir.pipeline.checks import GRADCHECK_COORDS, run_gradchecks
from sgir.pipeline.metrics import metrics
from sgir.pipeline.model import SceneModel
from sgir.pipeline.stages import stage_decompose, stage_indirect, stage_normals, stage_visibility
from sgir.sg.lobes import SGMixture
from sgir.shading.light import EquirectMap
from sgir.util.sampling import rng_for

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILURE = 2

CHECKPOINT = "model.sgirf"
OCTREE = "octree.npz"
BENCH_RAYS = 10000


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


class Run:
    """Resolved configuration plus the scene, octree and model shared by subcommands."""

    def __init__(self, args):
        self.args = args
        self.cfg = load_run_config(args.config)
        if args.seed is not None:
            self.cfg.seed = args.seed
        if args.threads is not None:
            self.cfg.threads = args.threads
        if args.out is not None:
            self.cfg.out = args.out
        self.cfg.validate()
        self.out = Path(self.cfg.out)
        self._scene = None
        self._octree = None
        self._dataset = None

    def stage(self, name):
        cfg = self.cfg.stage_config(name)
        cfg.progress = not self.args.quiet
        return cfg

    @property
    def scene(self):
        if self._scene is None:
            self._scene = self.dataset.scene() if self.args.command in DATASET_SCENE else self.cfg.load_scene()
        return self._scene

    @property
    def octree(self):
        if self._octree is None:
            path = self.out / OCTREE
            if path.is_file():
                self._octree = load_octree(path)
            else:
                self._octree = build_octree(self.scene, self.cfg.octree_depth)
        return self._octree

    @property
    def dataset(self):
        if self._dataset is None:
            path = Path(self.cfg.dataset) if self.cfg.dataset else self.out / "dataset"
            if not (path / "meta.json").is_file():
                raise ValidationError(f"no dataset at {path}; run make-dataset first")
            self._dataset = load_dataset(path)
        return self._dataset

    def checkpoint(self):
        return Path(self.args.checkpoint) if self.args.checkpoint else self.out / CHECKPOINT

    def model(self, require=False):
        model = SceneModel(self.scene.bbox, self.cfg.fields, self.cfg.seed, self.cfg.stage.gamma_init,
                           self.cfg.stage.lr_scales)
        path = self.checkpoint()
        if path.is_file():
            model.load(path)
            logger.info("resumed from %s", path)
        elif require:
            raise ValidationError(f"no checkpoint at {path}")
        return model

    def finish_stage(self, model, report):
        self.out.mkdir(parents=True, exist_ok=True)
        model.save(self.checkpoint())
        report.to_csv(self.out / f"{report.stage}_loss.csv")
        if report.steps:
            print(f"{report.stage}: {report.steps} steps, final loss {report.last():.6g}")
        else:
            print(f"{report.stage}: no steps")


def cmd_make_dataset(run):
    cfg = run.cfg
    dataset = make_dataset(run.scene, cfg.views, cfg.spp, cfg.gamma_gt, cfg.seed, cfg.width, cfg.height,
                           cfg.bounce, cfg.threads, progress=not run.args.quiet, octree=run.octree)
    path = Path(cfg.dataset) if cfg.dataset else run.out / "dataset"
    save_dataset(dataset, path)
    print(f"wrote {len(dataset)} views to {path}")


def cmd_bake_octree(run):
    octree = build_octree(run.scene, run.cfg.octree_depth)
    run.out.mkdir(parents=True, exist_ok=True)
    save_octree(run.out / OCTREE, octree)
    print(f"octree depth {octree.max_depth}: {octree.node_count} nodes, {octree.leaf_count} occupied leaves")


def cmd_train_normals(run):
    model = run.model()
    run.finish_stage(model, stage_normals(run.scene, model, run.stage("normals")))


def cmd_train_visibility(run):
    model = run.model()
    run.finish_stage(model, stage_visibility(run.scene, run.octree, model, run.stage("visibility")))


def cmd_train_indirect(run):
    model = run.model()
    report = stage_indirect(run.scene, run.octree, model, run.stage("indirect"), gamma_gt=run.cfg.gamma_gt)
    run.finish_stage(model, report)


def cmd_decompose(run):
    model = run.model()
    report = stage_decompose(run.dataset, run.scene, run.octree, model, run.stage("decompose"))
    run.finish_stage(model, report)
    print(f"learned gamma {model.gamma():.4f}")


def _views(run):
    views = run.dataset.views
    if run.args.view is None:
        return list(enumerate(views))
    if not 0 <= run.args.view < len(views):
        raise ValidationError(f"view {run.args.view} out of range (dataset has {len(views)})")
    return [(run.args.view, views[run.args.view])]


def _write_view(run, prefix, index, image, reference):
    run.out.mkdir(parents=True, exist_ok=True)
    write_png(run.out / f"{prefix}_{index:03d}.png", image)
    write_pfm(run.out / f"{prefix}_{index:03d}.pfm", image)
    if reference is not None:
        scores = metrics(image, reference)
        print(f"{prefix} view {index}: PSNR {scores['psnr']:.2f} dB, MAE {scores['mae']:.4f}")
    else:
        print(f"{prefix} view {index} written")


def cmd_render(run):
    model = run.model(require=True)
    cfg = run.stage("decompose")
    for index, view in _views(run):
        rendered = render_view(model, run.scene, run.octree, view.camera, cfg)
        _write_view(run, "render", index, rendered.image, view.ldr)
        write_pfm(run.out / f"albedo_{index:03d}.pfm", ImageBuffer(rendered.albedo))


def cmd_deshadow(run):
    model = run.model(require=True)
    cfg = run.stage("decompose")
    for index, view in _views(run):
        _write_view(run, "deshadow", index, deshadow_render(model, run.scene, run.octree, view.camera, cfg), None)


def load_environment(path):
    """An SG mixture from JSON or an equirect map from PFM/PNG."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    suffix = path.suffix.lower()
    if suffix == ".json":
        return SGMixture.from_json(read_json(path))
    if suffix == ".pfm":
        return EquirectMap(read_pfm(path).data)
    if suffix == ".png":
        return EquirectMap(read_png(path).data)
    raise ValidationError(f"unsupported environment format {suffix!r}")


def cmd_relight(run):
    model = run.model(require=True)
    env = load_environment(run.args.env)
    cfg = run.stage("decompose")
    for index, view in _views(run):
        image = relight_render(model, run.scene, run.octree, view.camera, env, cfg)
        _write_view(run, "relight", index, image, None)


def cmd_gradcheck(run):
    model = run.model()
    dataset = run.dataset if run.args.with_dataset else None
    reports = run_gradchecks(model, run.scene, run.stage("decompose"), dataset, run.octree if dataset else None,
                             coords=run.args.coords)
    for name, report in reports.items():
        print(f"[{name}] " + report.format())
    failed = [name for name, report in reports.items() if not report.passed]
    if failed:
        raise SgirError(f"gradcheck failed for {', '.join(failed)}")


def cmd_bench_trace(run):
    scene = run.scene
    octree = build_octree(scene, run.cfg.octree_depth)
    rays = random_rays(scene, run.args.rays, rng_for(run.cfg.seed, 0x42))
    stats = compare_tracers(octree, scene, rays)
    print(f"octree: {1e6 * stats['octree_s_per_ray']:.2f} us/ray")
    print(f"sphere: {1e6 * stats['sphere_s_per_ray']:.2f} us/ray")
    print(f"hit parity {stats['hit_parity']:.4f} over {stats['rays'] - stats['capped']} conclusive rays of "
          f"{stats['rays']} ({stats['hits']} hits), max |dt| {stats['max_dt']:.2e}")


def read_image(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    if path.suffix.lower() == ".png":
        return read_png(path)
    return read_pfm(path)


def cmd_metrics(run):
    scores = metrics(read_image(run.args.pred), read_image(run.args.gt))
    if run.args.json:
        print(json.dumps(scores))
    else:
        print(f"PSNR {scores['psnr']:.2f} dB")
        print(f"MAE {scores['mae']:.6f}")


COMMANDS = {
    "make-dataset": (cmd_make_dataset, "render a ground-truth dataset with the Monte Carlo oracle"),
    "bake-octree": (cmd_bake_octree, "build and save the occupancy octree"),
    "train-normals": (cmd_train_normals, "fit the normal field"),
    "train-visibility": (cmd_train_visibility, "fit the visibility field"),
    "train-indirect": (cmd_train_indirect, "fit the indirect SG field"),
    "decompose": (cmd_decompose, "fit environment, materials and gamma to the dataset"),
    "render": (cmd_render, "render dataset views with the trained model"),
    "deshadow": (cmd_deshadow, "render dataset views with shadows removed"),
    "relight": (cmd_relight, "render dataset views under a new environment"),
    "gradcheck": (cmd_gradcheck, "finite-difference check of every stage loss"),
    "bench-trace": (cmd_bench_trace, "time octree against sphere tracing"),
    "metrics": (cmd_metrics, "PSNR and MAE between two images"),
}

DATASET_SCENE = {"decompose", "render", "deshadow", "relight"}


def build_parser():
    common = ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logging")
    common.add_argument("--quiet", action="store_true", help="no progress bars")
    common.add_argument("--config", help="run config JSON")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--checkpoint", help=f"model checkpoint (default <out>/{CHECKPOINT})")

    parser = ArgumentParser(prog="sgir", description="Spherical Gaussian inverse rendering.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)
    commands = {name: sub.add_parser(name, parents=[common], help=text) for name, (_, text) in COMMANDS.items()}
    for name in ("render", "deshadow", "relight"):
        commands[name].add_argument("--view", type=int, help="only this dataset view")
    commands["relight"].add_argument("--env", required=True, help="SG mixture JSON or equirect PFM/PNG")
    commands["gradcheck"].add_argument("--coords", type=int, default=GRADCHECK_COORDS)
    commands["gradcheck"].add_argument("--with-dataset", action="store_true",
                                       help="check the decomposition on a crop of the dataset")
    commands["bench-trace"].add_argument("--scene", help="scene JSON (default: the run config's scene)")
    commands["bench-trace"].add_argument("--rays", type=int, default=BENCH_RAYS)
    commands["metrics"].add_argument("--pred", required=True)
    commands["metrics"].add_argument("--gt", required=True)
    commands["metrics"].add_argument("--json", action="store_true", help="print a JSON object")
    return parser


def configure_logging(verbose):
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    configure_logging(args.verbose)
    torch.set_num_threads(1)
    try:
        run = Run(args)
        if args.command == "bench-trace" and args.scene:
            run.cfg.scene = args.scene
        torch.manual_seed(run.cfg.seed)
        COMMANDS[args.command][0](run)
    except (ValidationError, ParseError, FileNotFoundError) as exc:
        print(f"sgir {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        logger.debug("sgir %s failed", args.command, exc_info=True)
        print(f"sgir {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
