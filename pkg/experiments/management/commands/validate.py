from django.core.management.base import BaseCommand

from experiments.manifest import manifest_summary

from ._manifest_options import add_manifest_arguments, load_manifest


class Command(BaseCommand):
    help = "Check a run config and print the jobs it expands to."

    def add_arguments(self, parser):
        add_manifest_arguments(parser)

    def handle(self, *args, **options):
        manifest = load_manifest(options)
        self.stdout.write(manifest_summary(manifest, verbose=True))
        self.stdout.write(self.style.SUCCESS("%s is valid." % manifest.source))
