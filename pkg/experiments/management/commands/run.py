from django.core.management.base import BaseCommand, CommandError

from experiments.manifest import manifest_summary
from experiments.runner import record_results, run_sweep

from ._manifest_options import add_manifest_arguments, load_manifest


class Command(BaseCommand):
    help = "Run a compliance sweep and write CSV and SVG results."

    def add_arguments(self, parser):
        add_manifest_arguments(parser)
        parser.add_argument(
            "--timing", action="store_true",
            help="Fill the merge-time columns of the CSV (output is then not reproducible).",
        )
        parser.add_argument(
            "--record", action="store_true", help="Also store the rows in the database.",
        )

    def handle(self, *args, **options):
        manifest = load_manifest(options)
        if options["timing"]:
            manifest = manifest.with_overrides(timing=True)
        self.stdout.write(manifest_summary(manifest))
        report = run_sweep(manifest)
        if options["record"]:
            count = record_results(report.results, manifest.timing)
            self.stdout.write("Recorded %d rows." % count)
        for path in report.artifacts:
            self.stdout.write("Wrote %s" % path)
        if report.exit_status:
            raise CommandError(
                "%d of %d jobs failed, see %s."
                % (len(report.failures), len(report.outcomes), report.out_dir / "failures.csv"),
                returncode=report.exit_status,
            )
        self.stdout.write(self.style.SUCCESS("%d jobs completed." % len(report.outcomes)))
