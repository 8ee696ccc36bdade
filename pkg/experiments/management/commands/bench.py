from django.core.management.base import BaseCommand

from experiments.reporting import emit_bench
from experiments.runner import run_bench

from ._manifest_options import add_manifest_arguments, load_manifest


class Command(BaseCommand):
    help = "Profile heuristic and stateless merge times on identical frames."

    def add_arguments(self, parser):
        add_manifest_arguments(parser)

    def handle(self, *args, **options):
        manifest = load_manifest(options)
        rows = run_bench(manifest)
        manifest.out_dir.mkdir(parents=True, exist_ok=True)
        path = emit_bench(rows, manifest.out_dir, self.stdout)
        self.stdout.write("Wrote %s" % path)
