"""
Django settings for the ponhv experiment project.

Only the pieces the experiment harness needs are configured: the
``experiments`` app (commands, persisted sweep rows, chart templates),
a local sqlite database for ``run --record`` and logging.

Experiment defaults live in the ``PONHV`` dict below. Command-line flags
override them, and ``PONHV_OUT_DIR`` in the environment overrides the
output directory.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Not used for anything security relevant; nothing is served.
SECRET_KEY = os.environ.get("PONHV_SECRET_KEY", "ponhv-offline-experiments-only")

DEBUG = False

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    "experiments.apps.ExperimentsConfig",
]

TEMPLATES = [
    {
        "BACKEND": "django.template.backends.django.DjangoTemplates",
        "DIRS": [],
        "APP_DIRS": True,
        "OPTIONS": {
            "autoescape": True,
        },
    },
]

# Database
# Sweep rows are persisted here by ``manage.py run --record``.

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": os.environ.get("PONHV_DB", BASE_DIR / "ponhv.sqlite3"),
    },
}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

USE_TZ = True

TIME_ZONE = "UTC"

# Experiment defaults

PONHV = {
    "OUT_DIR": BASE_DIR / "results",
    "JOBS": 1,
    # Merge calls discarded before timing samples are kept.
    "WARMUP_CALLS": 100,
    "EXACT_MAX_ALLOCATIONS": 12,
    "EXACT_TIME_BUDGET_S": 10.0,
    "EXACT_SAMPLE_FRAMES": 20,
    "FRAME": {
        "capacity_words": 38_880,
        "guard_words": 31,
    },
}

# Logging

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "ponhv": {
            "handlers": ["console"],
            "level": os.environ.get("PONHV_LOG_LEVEL", "WARNING"),
        },
    },
}
