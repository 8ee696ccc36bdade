# Generated by Django 5.0.6 on 2026-10-17 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="SweepRecord",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("scheduler", models.CharField(max_length=16)),
                ("load_fraction", models.FloatField()),
                ("sla_share", models.FloatField()),
                ("burst_class", models.CharField(max_length=8)),
                ("sla_type", models.CharField(max_length=16)),
                ("compliance", models.FloatField()),
                ("flow_frames", models.PositiveIntegerField()),
                ("mean_merge_us", models.FloatField(blank=True, null=True)),
                ("p99_merge_us", models.FloatField(blank=True, null=True)),
                ("seed", models.BigIntegerField()),
                ("created", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ["scheduler", "load_fraction", "burst_class", "sla_share", "sla_type"],
            },
        ),
    ]
