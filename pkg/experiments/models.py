from django.db import models


class SweepRecord(models.Model):
    """One compliance row of a sweep, stored by ``manage.py run --record``."""

    scheduler = models.CharField(max_length=16)
    load_fraction = models.FloatField()
    sla_share = models.FloatField()
    burst_class = models.CharField(max_length=8)
    sla_type = models.CharField(max_length=16)
    compliance = models.FloatField()
    flow_frames = models.PositiveIntegerField()
    mean_merge_us = models.FloatField(null=True, blank=True)
    p99_merge_us = models.FloatField(null=True, blank=True)
    seed = models.BigIntegerField()
    created = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["scheduler", "load_fraction", "burst_class", "sla_share", "sla_type"]

    def __str__(self):
        return "%s load=%s share=%s %s %s: %.3f" % (
            self.scheduler, self.load_fraction, self.sla_share,
            self.burst_class, self.sla_type, self.compliance,
        )
