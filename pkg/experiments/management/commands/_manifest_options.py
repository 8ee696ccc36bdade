"""Arguments shared by the run, bench and validate commands."""
import os

from django.core.management.base import CommandError

from experiments.manifest import ConfigError, parse_config, preset_manifest

OUT_DIR_ENV = "PONHV_OUT_DIR"


def add_manifest_arguments(parser):
    parser.add_argument("config", nargs="?", help="JSON run config.")
    parser.add_argument(
        "--preset", choices=["paper-heuristic", "paper-stateless", "paper-exact"],
        help="Use a built-in experiment grid instead of a config file.",
    )
    parser.add_argument("--seed", type=int, help="Seed for every job.")
    parser.add_argument("--out-dir", help="Output directory (overrides %s)." % OUT_DIR_ENV)
    parser.add_argument("--jobs", type=int, help="Jobs executed in parallel.")
    parser.add_argument("--warmup", type=int, help="Merge calls discarded before timing.")


def load_manifest(options):
    """
    Build the manifest from a config file or a preset, then apply overrides:
    command-line flags first, then PONHV_OUT_DIR, then the file, then settings.
    """
    config, preset = options.get("config"), options.get("preset")
    if bool(config) == bool(preset):
        raise CommandError("Give either a config file or --preset.")
    try:
        manifest = parse_config(config) if config else preset_manifest(preset)
    except ConfigError as exc:
        raise CommandError(str(exc))
    if options.get("jobs") is not None and options["jobs"] < 1:
        raise CommandError("--jobs must be at least 1.")
    if options.get("warmup") is not None and options["warmup"] < 0:
        raise CommandError("--warmup must not be negative.")
    out_dir = options.get("out_dir") or os.environ.get(OUT_DIR_ENV)
    return manifest.with_overrides(
        seed=options.get("seed"),
        out_dir=out_dir,
        parallelism=options.get("jobs"),
        warmup=options.get("warmup"),
    )
